//! Treebank-style word tokenizer.
//!
//! Works chunk by chunk over whitespace. Within a chunk it detaches
//! punctuation that is always a token of its own (`; @ # $ % & ? ! * ( ) [ ]
//! { } < > "` plus dash runs and ellipses), commas and colons that are not
//! followed by a digit, a sentence-final period, leading and trailing
//! apostrophes, and the English clitics `n't 's 're 've 'll 'd 'm`.
//!
//! A period is detached when it ends the text or ends a sentence inside it:
//! the next chunk starts with an uppercase letter (possibly behind an opening
//! quote or bracket) and the chunk is not a known abbreviation or an
//! initialism such as `U.S.`.
//!
//! Double quotes are kept as a plain `"` token rather than being rewritten
//! into directional quote marks, so joining the tokens with single spaces and
//! tokenizing again returns the same list.

const ALWAYS_SPLIT: &[char] = &[
    ';', '@', '#', '$', '%', '&', '?', '!', '*', '(', ')', '[', ']', '{', '}', '<', '>', '"',
    '«', '»', '“', '”', '‘', '’', '„', '\u{2012}', '\u{2013}', '\u{2014}', '\u{2015}',
];

const CLOSERS: &[char] = &[']', ')', '}', '>', '"', '\''];

/// Whole-word contractions split into two stems, matched case-insensitively.
const FUSED: &[(&str, usize)] = &[
    ("cannot", 3),
    ("d'ye", 1),
    ("gimme", 3),
    ("gonna", 3),
    ("gotta", 3),
    ("lemme", 3),
    ("more'n", 4),
    ("wanna", 3),
];

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "vs", "etc", "inc", "ltd", "co",
    "corp", "gen", "gov", "sen", "rep", "rev", "hon", "lt", "col", "capt", "sgt", "vol",
    "fig", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
    "e.g", "i.e", "cf", "al", "approx", "dept", "univ", "ave", "blvd",
];

/// Runs the chunk rules until the token list is stable, so that
/// `tokenize(tokens.join(" "))` returns `tokens`. A pass only splits tokens,
/// so this ends after at most one pass per character; ordinary text settles
/// after the first.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = tokenize_once(text);
    loop {
        let next = tokenize_once(&tokens.join(" "));
        if next.len() == tokens.len() {
            return tokens;
        }
        tokens = next;
    }
}

fn tokenize_once(text: &str) -> Vec<String> {
    let chunks: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    for (i, chunk) in chunks.iter().enumerate() {
        let ends_sentence = match chunks.get(i + 1) {
            None => true,
            Some(next) => starts_sentence(next) && !is_abbreviation(chunk),
        };
        tokenize_chunk(chunk, ends_sentence, &mut out);
    }
    out
}

fn starts_sentence(chunk: &str) -> bool {
    chunk
        .trim_start_matches(['"', '\'', '(', '[', '`', '“', '‘'])
        .chars()
        .next()
        .is_some_and(char::is_uppercase)
}

fn is_abbreviation(chunk: &str) -> bool {
    let body = chunk.trim_end_matches(CLOSERS).trim_start_matches(['"', '\'', '(', '[']);
    let Some(stem) = body.strip_suffix('.') else {
        return false;
    };
    let lower = stem.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    // initialisms: single letters separated by periods ("U.S", "A")
    stem.split('.').all(|part| part.chars().count() == 1 && part.chars().all(char::is_alphabetic))
}

fn tokenize_chunk(chunk: &str, sentence_final: bool, out: &mut Vec<String>) {
    if sentence_final {
        if let Some((body, tail)) = split_final_period(chunk) {
            split_punctuation(body, out);
            out.push(".".to_string());
            split_punctuation(tail, out);
            return;
        }
    }
    split_punctuation(chunk, out);
}

/// `body.` followed only by closing brackets/quotes, where the character
/// before the period is not itself a period.
fn split_final_period(chunk: &str) -> Option<(&str, &str)> {
    let body = chunk.trim_end_matches(CLOSERS);
    let tail = &chunk[body.len()..];
    let stem = body.strip_suffix('.')?;
    match stem.chars().last() {
        Some(c) if c != '.' => Some((stem, tail)),
        _ => None,
    }
}

fn split_punctuation(s: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = s.chars().collect();
    let mut word = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let run = |ch: char| chars[i..].iter().take_while(|&&x| x == ch).count();
        if ALWAYS_SPLIT.contains(&c) {
            flush_word(&mut word, out);
            out.push(c.to_string());
            i += 1;
        } else if c == '`' {
            let n = run('`');
            flush_word(&mut word, out);
            out.push("`".repeat(n));
            i += n;
        } else if c == '.' && run('.') >= 2 {
            let n = run('.');
            flush_word(&mut word, out);
            out.push(".".repeat(n));
            i += n;
        } else if c == '-' && chars.get(i + 1) == Some(&'-') {
            flush_word(&mut word, out);
            out.push("--".to_string());
            i += 2;
        } else if (c == ',' || c == ':') && !chars.get(i + 1).is_some_and(|n| n.is_ascii_digit()) {
            flush_word(&mut word, out);
            out.push(c.to_string());
            i += 1;
        } else {
            word.push(c);
            i += 1;
        }
    }
    flush_word(&mut word, out);
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn flush_word(word: &mut String, out: &mut Vec<String>) {
    if word.is_empty() {
        return;
    }
    let w = std::mem::take(word);
    let mut rest = w.as_str();

    if let Some(after) = rest.strip_prefix('\'') {
        if after.chars().next().is_some_and(is_word_char) && !is_clitic_start(after) {
            out.push("'".to_string());
            rest = after;
        }
    }

    if let Some((a, b)) = split_fused(rest) {
        out.push(a.to_string());
        out.push(b.to_string());
        return;
    }

    if let Some((stem, clitic)) = split_clitic(rest) {
        out.push(stem.to_string());
        out.push(clitic.to_string());
    } else {
        out.push(rest.to_string());
    }
}

/// True when the text after a leading apostrophe reads as a clitic
/// (`'s`, `'re`, ...), in which case the apostrophe stays attached.
fn is_clitic_start(after: &str) -> bool {
    let lower = after.to_lowercase();
    ["re", "ve", "ll", "m", "t", "s", "d", "n"].iter().any(|c| {
        lower.starts_with(c) && !lower[c.len()..].chars().next().is_some_and(is_word_char)
    })
}

fn split_fused(word: &str) -> Option<(&str, &str)> {
    let lower = word.to_lowercase();
    FUSED
        .iter()
        .find(|(w, _)| lower == *w)
        .map(|&(_, at)| word.split_at(at))
}

fn split_clitic(word: &str) -> Option<(&str, &str)> {
    const CLITICS: &[&str] = &[
        "'s", "'S", "'m", "'M", "'d", "'D", "'ll", "'LL", "'re", "'RE", "'ve", "'VE", "n't", "N'T",
        "'",
    ];
    for clitic in CLITICS {
        if let Some(stem) = word.strip_suffix(clitic) {
            if stem.chars().last().is_some_and(|c| c != '\'') {
                return Some((stem, &word[stem.len()..]));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn basic_examples() {
        assert_eq!(toks("Hello, world."), ["Hello", ",", "world", "."]);
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \n\t").is_empty());
        assert_eq!(toks("don't"), ["do", "n't"]);
    }

    #[test]
    fn sentence_final_periods_are_detached() {
        assert_eq!(toks("Dr. Smith left."), ["Dr.", "Smith", "left", "."]);
        assert_eq!(toks("He left (again.)"), ["He", "left", "(", "again", ".", ")"]);
        assert_eq!(toks("Wait..."), ["Wait", "..."]);
        assert_eq!(toks("It rained. Then it stopped."), ["It", "rained", ".", "Then", "it", "stopped", "."]);
        assert_eq!(toks("Ask Mr. Smith."), ["Ask", "Mr.", "Smith", "."]);
        assert_eq!(toks("The U.S. Army left."), ["The", "U.S.", "Army", "left", "."]);
        assert_eq!(toks("He said no. OK."), ["He", "said", "no", ".", "OK", "."]);
    }

    #[test]
    fn numbers_keep_internal_separators() {
        assert_eq!(toks("$1,000 at 10:30"), ["$", "1,000", "at", "10:30"]);
        assert_eq!(toks("a,b"), ["a", ",", "b"]);
    }

    #[test]
    fn apostrophes() {
        assert_eq!(toks("the dogs' owners"), ["the", "dogs", "'", "owners"]);
        assert_eq!(toks("'Hello"), ["'", "Hello"]);
        assert_eq!(toks("O'Neil"), ["O'Neil"]);
        assert_eq!(toks("a's'"), ["a", "'s", "'"]);
        assert_eq!(toks("Aa.'S$"), ["Aa", ".", "'S", "$"]);
        assert_eq!(toks("cannot"), ["can", "not"]);
        assert_eq!(toks("They'll"), ["They", "'ll"]);
    }
}
