//! Acceptance suite: one line per criterion, run sequentially so the
//! timings are not distorted by other tests.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use anyhow::{bail, ensure, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{Binomial, DiscreteCDF};

use textorder::corpus::{build_vocab, read_corpus, write_corpus, Corpus, Level, LoadOptions};
use textorder::harness::{load_results, synth_corpus, CoherenceScheme, SynthConfig};
use textorder::humaneval::{interrater_pearson, krippendorff_alpha, pearson, regress_metric, RatingMatrix};
use textorder::metrics::{aggregate, pmr, kendall_tau, wlcs, wlcs_l, EvalPair, Order, WlcsParams};
use textorder::noise::{apply_edit, corrupt_corpus, NoiseConfig, TokenEdit};
use textorder::numkernel::{grad_check, lstm_cell, LstmParams, NodeId, ParamStore, Tensor};
use textorder::ordermodel::{
    beam_search, decode_step, document_loss, encode_document, encode_sequence, order_logprob, pairs,
    pointer_score, predict, prepare_documents, train, EncodedDoc, ModelConfig, OrderModel, StopReason,
    TrainConfig,
};
use textorder::rng::rng_from_seed;
use textorder::sampler::{bootstrap_sample, expand_plan, SampleMode, SamplePlan};

fn rng(seed: u64) -> impl Rng {
    rng_from_seed(seed)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn random_order(n: usize, r: &mut impl Rng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(r);
    v
}

fn order(v: &[usize]) -> Order {
    Order::new(v.to_vec()).unwrap()
}

/// Accepted counts `[lo, hi]` of the two-sided 99% acceptance region of
/// Binomial(n, p): each tail holds at most 0.5%.
fn binomial_99(n: u64, p: f64) -> (u64, u64) {
    let b = Binomial::new(p, n).unwrap();
    let lo = (0..=n).find(|&k| b.cdf(k) > 0.005).unwrap();
    let hi = (0..=n).find(|&k| b.cdf(k) >= 0.995).unwrap();
    (lo, hi)
}

fn discordant_pairs(pred: &[usize], gold: &[usize]) -> usize {
    let pos = |v: &[usize], x: usize| v.iter().position(|&y| y == x).unwrap();
    let n = gold.len();
    let mut d = 0;
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (gold[i], gold[j]);
            if pos(pred, a) > pos(pred, b) {
                d += 1;
            }
        }
    }
    d
}

/// Best run-weighted score over every common subsequence. A common
/// subsequence of two permutations is a subset of gold positions whose
/// elements also appear in increasing positions of `pred`; a run is a
/// stretch that is consecutive in both.
fn exhaustive_wlcs(pred: &[usize], gold: &[usize], alpha: f64) -> f64 {
    let n = gold.len();
    let pos: Vec<usize> = gold.iter().map(|x| pred.iter().position(|y| y == x).unwrap()).collect();
    let mut best = 0.0f64;
    for mask in 1u32..(1 << n) {
        let picked: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        if picked.windows(2).any(|w| pos[w[0]] >= pos[w[1]]) {
            continue;
        }
        let mut score = 0.0;
        let mut run = 1usize;
        for w in picked.windows(2) {
            if w[1] == w[0] + 1 && pos[w[1]] == pos[w[0]] + 1 {
                run += 1;
            } else {
                score += (run as f64).powf(alpha);
                run = 1;
            }
        }
        score += (run as f64).powf(alpha);
        best = best.max(score);
    }
    best
}

fn c1_metric_oracles() -> Result<String> {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = r.random_range(2..=8);
        let (p, g) = (random_order(n, &mut r), random_order(n, &mut r));
        let pairs_total = (n * (n - 1) / 2) as f64;
        let expect = 1.0 - 2.0 * discordant_pairs(&p, &g) as f64 / pairs_total;
        let tau = kendall_tau(&order(&p), &order(&g))?;
        ensure!(tau == expect, "tau {tau} != {expect} for {p:?} vs {g:?}");
        let dp = wlcs(&order(&p), &order(&g), 1.2)?;
        let ex = exhaustive_wlcs(&p, &g, 1.2);
        worst = worst.max((dp - ex).abs());
        ensure!((dp - ex).abs() <= 1e-9, "wlcs {dp} != {ex} for {p:?} vs {g:?}");
    }
    Ok(format!("1000 pairs, max wlcs gap {worst:.1e}"))
}

fn c2_wlcs_l_closed_forms() -> Result<String> {
    let params = WlcsParams { weight_exponent: 1.2, f_alpha: 0.5 };
    let mut last = f64::INFINITY;
    for n in 2..=10 {
        let id = Order::identity(n);
        let w = wlcs_l(&id, &id, &params)?;
        let r = 1.0 / n as f64;
        let a2 = 0.25;
        let f = (1.0 + a2) * r * 1.0 / (r + a2 * 1.0);
        ensure!((w.precision - 1.0).abs() <= 1e-12, "n={n}: P = {}", w.precision);
        ensure!((w.recall - r).abs() <= 1e-12, "n={n}: R = {}", w.recall);
        ensure!((w.f - f).abs() <= 1e-12, "n={n}: F = {} want {f}", w.f);
        ensure!(w.f < last, "F did not decrease at n={n}");
        last = w.f;
    }
    Ok(format!("F(10) = {last:.6}"))
}

fn c3_random_baseline() -> Result<String> {
    let mut r = rng(3);
    let pairs: Vec<EvalPair> = (0..10_000)
        .map(|i| EvalPair::new(format!("d{i}"), order(&random_order(5, &mut r)), Order::identity(5)).unwrap())
        .collect();
    let rep = aggregate(&pairs, &WlcsParams::default())?;
    let c = &rep.corpus;
    ensure!((0.19..=0.21).contains(&c.mean_acc), "mean acc {}", c.mean_acc);
    ensure!((-0.02..=0.02).contains(&c.mean_tau), "mean tau {}", c.mean_tau);
    let exact = pairs.iter().filter(|p| p.is_exact()).count() as u64;
    let (lo, hi) = binomial_99(10_000, 1.0 / 120.0);
    ensure!((lo..=hi).contains(&exact), "{exact} exact matches outside [{lo}, {hi}]");
    Ok(format!("acc {:.4}, tau {:.4}, exact {exact} in [{lo}, {hi}]", c.mean_acc, c.mean_tau))
}

fn synth(n_docs: usize, seq: (usize, usize), scheme: CoherenceScheme, seed: u64) -> Corpus {
    synth_corpus(&SynthConfig { n_docs, seq_per_doc: seq, scheme, seed, ..SynthConfig::default() })
        .unwrap()
        .0
}

fn c4_gradient_checks() -> Result<String> {
    let check = |store: &mut ParamStore, build: &dyn for<'a> Fn(&mut textorder::numkernel::Graph<'a>) -> textorder::Result<NodeId>| {
        grad_check(store, build, 1e-5, None).map(|r| r.max_rel_error)
    };
    let mut errs = Vec::new();

    let mut store = ParamStore::new();
    let cell = LstmParams::register(&mut store, "cell", 5, 8, &mut rng_from_seed(40))?;
    errs.push(check(&mut store, &|g| {
        let x = g.input(Tensor::vector((0..5).map(|i| (i as f64 * 0.7).sin()).collect()));
        let h = g.input(Tensor::vector((0..8).map(|i| (i as f64 * 0.3).cos() * 0.5).collect()));
        let c = g.input(Tensor::vector((0..8).map(|i| (i as f64 * 0.9).sin() * 0.5).collect()));
        let (h1, c1) = lstm_cell(g, x, h, c, &cell)?;
        let (h2, _) = lstm_cell(g, x, h1, c1, &cell)?;
        g.sum_squares(h2)
    })?);

    let corpus = synth(2, (3, 3), CoherenceScheme::MarkerChain, 41);
    let cfg = ModelConfig {
        embed_dim: 4,
        hidden_dim: 8,
        attention_dim: Some(8),
        l2_lambda: 1e-2,
        ..ModelConfig::default()
    };
    let model = OrderModel::new(cfg, build_vocab(&corpus, 1), None, 42)?;
    let ids = prepare_documents(&corpus, &model.vocab)[0].token_ids.clone();
    let heads = model.layout.heads.clone();
    let mut store = model.params.clone();
    errs.push(check(&mut store, &|g| {
        let s = g.input(Tensor::vector((0..8).map(|i| (i as f64 * 0.37).sin()).collect()));
        let h = g.input(Tensor::vector((0..8).map(|i| (i as f64 * 0.11).cos()).collect()));
        let e = pointer_score(g, &heads, s, h)?;
        g.sum_squares(e)
    })?);
    errs.push(check(&mut store, &|g| {
        let vs = ids.iter().map(|t| encode_sequence(g, &model, t)).collect::<textorder::Result<Vec<_>>>()?;
        let enc = encode_document(g, &model, &vs)?;
        let out = decode_step(g, &model, &vs, enc.h, enc.c, Some(vs[0]), &[true, false, false])?;
        g.masked_nll(out.logits, &[false, true, true], 2)
    })?);
    errs.push(check(&mut store, &|g| document_loss(g, &model, &ids, &[1, 2, 0], None))?);

    let worst = errs.iter().cloned().fold(0.0, f64::max);
    ensure!(worst < 1e-4, "relative errors {errs:?}");
    Ok(format!("lstm {:.1e}, pointer {:.1e}, step {:.1e}, loss {:.1e}", errs[0], errs[1], errs[2], errs[3]))
}

fn c5_overfit() -> Result<String> {
    let corpus = synth(20, (3, 5), CoherenceScheme::MarkerChain, 11);
    let vocab = build_vocab(&corpus, 1);
    ensure!(vocab.len() <= 51, "vocabulary of {} (plus UNK)", vocab.len() - 1);
    let mcfg = ModelConfig { embed_dim: 32, hidden_dim: 32, attention_dim: Some(32), ..ModelConfig::default() };
    let tcfg = TrainConfig {
        batch_size: 8,
        patience: 5,
        max_epochs: 2000,
        learning_rate: 1e-2,
        eval_beam_width: Some(4),
        seed: 5,
        ..TrainConfig::default()
    };
    let (model, hist) = train(&corpus, &corpus, &mcfg, &tcfg)?;
    let train_pmr = pmr(&pairs(&predict(&corpus, &model, 4, 0)?))?;
    ensure!(train_pmr == 1.0, "train PMR {train_pmr}");
    ensure!(hist.stop == StopReason::Patience, "stopped by {:?}", hist.stop);
    let last_improved = hist.epochs.iter().filter(|e| e.improved).map(|e| e.epoch).max().unwrap();
    ensure!(hist.epochs.len() == last_improved + 5, "{} epochs, last improvement {last_improved}", hist.epochs.len());
    Ok(format!("PMR 1 at epoch {}, stopped at {}", hist.best_epoch, hist.epochs.len()))
}

fn c6_beam() -> Result<String> {
    let corpus = synth(30, (2, 5), CoherenceScheme::Random, 60);
    let cfg = ModelConfig { embed_dim: 8, hidden_dim: 8, attention_dim: Some(8), ..ModelConfig::default() };
    let model = OrderModel::new(cfg, build_vocab(&corpus, 1), None, 61)?;
    let mut docs = 0;
    for d in prepare_documents(&corpus, &model.vocab) {
        let enc = EncodedDoc::new(&model, &d.token_ids)?;
        let n = enc.len();
        let mut best: (f64, Vec<usize>) = (f64::NEG_INFINITY, vec![]);
        for p in permutations(n) {
            let lp = order_logprob(&model, &enc, &p)?;
            if lp > best.0 {
                best = (lp, p);
            }
        }
        let fact: usize = (1..=n).product();
        for w in [fact, fact * 2] {
            let r = beam_search(&model, &enc, w)?;
            ensure!(r.logprob == best.0, "{}: beam {} vs exhaustive {}", d.id, r.logprob, best.0);
        }
        let mut last = f64::NEG_INFINITY;
        for w in [1, 2, 4, 8, 32] {
            let lp = beam_search(&model, &enc, w)?.logprob;
            ensure!(lp >= last, "{}: width {w} scored {lp} < {last}", d.id);
            last = lp;
        }
        docs += 1;
    }
    Ok(format!("{docs} documents"))
}

fn canonical(c: &Corpus) -> Vec<u8> {
    let mut buf = Vec::new();
    write_corpus(c, &mut buf).unwrap();
    buf
}

fn c7_noise() -> Result<String> {
    let corpus = synth(500, (4, 6), CoherenceScheme::Chain, 70);
    let bytes = canonical(&corpus);
    let reloaded = read_corpus(&bytes[..], "x", Level::Sentence, &LoadOptions::default())?.corpus;
    let (clean, audit0) = corrupt_corpus(&reloaded, &NoiseConfig::with_p(0.0, 9))?;
    ensure!(canonical(&clean) == bytes, "p=0 output differs from input");
    ensure!(audit0.contaminated == 0, "p=0 contaminated {}", audit0.contaminated);

    let (noisy, audit) = corrupt_corpus(&corpus, &NoiseConfig::with_p(0.5, 71))?;
    let n = audit.sequences_considered as u64;
    ensure!(n >= 2000, "only {n} sequences");
    let (lo, hi) = binomial_99(n, 0.5);
    let k = audit.contaminated as u64;
    ensure!((lo..=hi).contains(&k), "{k} of {n} contaminated, outside [{lo}, {hi}]");
    let (again, audit2) = corrupt_corpus(&corpus, &NoiseConfig::with_p(0.5, 71))?;
    ensure!(canonical(&again) == canonical(&noisy) && audit2 == audit, "same seed, different output");

    let mut r = rng(72);
    let alphabet: Vec<char> = "abcdefghij".chars().collect();
    let mut applied = 0;
    for _ in 0..1000 {
        let t = r.random_range(1..6);
        let mut tokens: Vec<String> = (0..t)
            .map(|_| (0..r.random_range(1..5)).map(|_| alphabet[r.random_range(0..10)]).collect())
            .collect();
        let pos = r.random_range(0..t);
        let len = tokens[pos].chars().count();
        let edit = match r.random_range(0..3) {
            0 => TokenEdit::Concatenate,
            1 => TokenEdit::Split { at: r.random_range(0..len + 1) },
            _ => TokenEdit::Replace { at: r.random_range(0..len), with: 'z' },
        };
        let before = tokens.clone();
        if !apply_edit(&mut tokens, pos, edit) {
            ensure!(tokens == before, "a refused edit changed the tokens");
            continue;
        }
        applied += 1;
        match edit {
            TokenEdit::Replace { .. } => {
                ensure!(tokens.len() == before.len(), "replace changed the token count");
                ensure!(tokens[pos].chars().count() == len, "replace changed the token length");
            }
            TokenEdit::Split { .. } => {
                ensure!(tokens.len() == before.len() + 1, "split did not add one token");
                ensure!(tokens[pos].clone() + &tokens[pos + 1] == before[pos], "split lost characters");
            }
            TokenEdit::Concatenate => {
                ensure!(tokens.len() + 1 == before.len(), "concatenate did not remove one token");
                ensure!(tokens[pos] == before[pos].clone() + &before[pos + 1], "concatenate lost characters");
            }
        }
    }
    Ok(format!("{k}/{n} contaminated in [{lo}, {hi}], {applied} edits applied"))
}

fn c8_bootstrap() -> Result<String> {
    let plan = SamplePlan::default();
    let entries = expand_plan(&plan)?;
    ensure!(entries.len() == 45, "{} runs", entries.len());
    for (size, reps) in [(1000, 20), (3000, 10), (5000, 5), (8000, 5), (10000, 5)] {
        let k = entries.iter().filter(|e| e.size == size).count();
        ensure!(k == reps, "size {size}: {k} reps");
    }
    let parent = synth(300, (2, 3), CoherenceScheme::Random, 80);
    let dev = synth(40, (2, 3), CoherenceScheme::Random, 81);
    for size in [1000usize, 3000, 90, 17] {
        let want = (size as f64 * 5.0 / 90.0).round() as usize;
        let (t, d) = bootstrap_sample(&parent, &dev, size, 3, plan.dev_ratio_lock, SampleMode::WithReplacement)?;
        ensure!(t.len() == size && d.len() == want.max(1), "size {size}: dev {} want {want}", d.len());
    }
    let multiset = |c: &Corpus| {
        let mut v: Vec<_> = c.documents.iter().map(|d| textorder::sampler::parent_id(&d.id).to_string()).collect();
        v.sort();
        v
    };
    let (a, _) = bootstrap_sample(&parent, &dev, 500, 9, plan.dev_ratio_lock, SampleMode::WithReplacement)?;
    let (b, _) = bootstrap_sample(&parent, &dev, 500, 9, plan.dev_ratio_lock, SampleMode::WithReplacement)?;
    ensure!(multiset(&a) == multiset(&b), "same seed, different multisets");
    Ok("45 runs, dev sizes locked".into())
}

fn c9_agreement() -> Result<String> {
    let perfect = RatingMatrix::from_rows(&[vec![1.0, 3.0, 5.0, 2.0], vec![1.0, 3.0, 5.0, 2.0], vec![1.0, 3.0, 5.0, 2.0]])?;
    let r = interrater_pearson(&perfect, false)?.mean_r;
    ensure!(r.is_some_and(|r| (r - 1.0).abs() < 1e-12), "mean r {r:?}");
    ensure!(krippendorff_alpha(&perfect)? == 1.0, "alpha not 1");

    // Two judges disagree on both passages. Pairable values {1,5} and {5,1}:
    // D_o = (2*16 + 2*16) / 4 = 16, D_e = 8 * 16 / (4*3) = 32/3.
    let hand = RatingMatrix::from_rows(&[vec![1.0, 5.0], vec![5.0, 1.0]])?;
    let expect = 1.0 - 16.0 / (32.0 / 3.0);
    let a = krippendorff_alpha(&hand)?;
    ensure!((a - expect).abs() < 1e-12 && a < 0.0, "alpha {a}, want {expect}");

    let mut r = rng(90);
    let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..2500).map(|_| r.random_range(1..=5) as f64).collect()).collect();
    let random = RatingMatrix::from_rows(&rows)?;
    let ar = krippendorff_alpha(&random)?;
    ensure!((-0.1..=0.1).contains(&ar), "random alpha {ar}");

    let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.7 * v).collect();
    let fit = regress_metric(&x, &y)?;
    ensure!((fit.r_squared - 1.0).abs() < 1e-12, "exact line R2 {}", fit.r_squared);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = r.random_range(5..40);
        let x: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|v| v * r.random_range(-2.0..2.0) + r.random::<f64>()).collect();
        let fit = regress_metric(&x, &y)?;
        let rr = pearson(&x, &y).unwrap();
        worst = worst.max((fit.r_squared - rr * rr).abs());
    }
    ensure!(worst < 1e-10, "R2 vs r^2 gap {worst}");
    Ok(format!("hand alpha {a:.3}, random alpha {ar:.4}"))
}

const SWEEP_SPEC: &str = r#"{
  "name": "acceptance",
  "domains": [
    {"name": "alpha", "source": {"kind": "synthetic", "name": "alpha", "n_docs": 100, "seed": 1}},
    {"name": "beta", "source": {"kind": "synthetic", "name": "beta", "n_docs": 100, "seed": 2, "scheme": "chain"}}
  ],
  "model": {"embed_dim": 8, "hidden_dim": 8, "beam_width": 4},
  "train": {"max_epochs": 4, "learning_rate": 0.01, "eval_beam_width": 2},
  "split": {"train": 0.8, "dev": 0.1, "test": 0.1},
  "noise_levels": [0.0, 0.5],
  "sample_plan": {"sizes": [10, 20], "reps": {"10": 2, "20": 2}, "dev_ratio_lock": [0.9, 0.05], "seed": 0}
}"#;

fn run_cli(args: &[&std::ffi::OsStr]) -> Result<()> {
    let out = Command::new(env!("CARGO_BIN_EXE_textorder")).args(args).output()?;
    if !out.status.success() {
        bail!("{:?} exited {}: {}", args, out.status, String::from_utf8_lossy(&out.stderr));
    }
    Ok(())
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn c10_end_to_end() -> Result<String> {
    let tmp = tempfile::tempdir()?;
    let spec = tmp.path().join("spec.json");
    std::fs::write(&spec, SWEEP_SPEC)?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let start = Instant::now();
    run_cli(&["sweep".as_ref(), "--spec".as_ref(), spec.as_os_str(), "--seed".as_ref(), "5".as_ref(), "--out".as_ref(), a.as_os_str()])?;
    let first = start.elapsed().as_secs_f64();
    ensure!(first <= 60.0, "sweep took {first:.1}s");
    let manifest = a.join("manifest.json");
    run_cli(&["replay".as_ref(), "--manifest".as_ref(), manifest.as_os_str(), "--out".as_ref(), b.as_os_str()])?;
    let (ta, tb) = (tree(&a), tree(&b));
    ensure!(ta.len() > 5, "only {} files", ta.len());
    ensure!(ta == tb, "replay output differs");

    let results = load_results(a.join("results.json"))?;
    let within = results.table("within").ok_or_else(|| anyhow::anyhow!("no within table"))?;
    for domain in ["alpha", "beta"] {
        let curve = results.curve("robustness", domain).ok_or_else(|| anyhow::anyhow!("no curve for {domain}"))?;
        let zero = curve.points.iter().find(|p| p.x == 0.0).ok_or_else(|| anyhow::anyhow!("no p=0 point"))?;
        let clean = within.cells.iter().find(|c| c.train_domain == domain).unwrap();
        ensure!(zero.cells.len() == 1, "p=0 has {} cells", zero.cells.len());
        ensure!(zero.cells[0].metrics == clean.metrics, "{domain}: p=0 differs from the clean run");
        ensure!(clean.metrics.is_some(), "{domain}: clean run failed");
    }
    Ok(format!("{} files identical, sweep {first:.1}s", ta.len()))
}

type Criterion = (&'static str, f64, fn() -> Result<String>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("metric oracles", 10.0, c1_metric_oracles),
        ("wlcs-l closed forms", f64::INFINITY, c2_wlcs_l_closed_forms),
        ("random baseline", 5.0, c3_random_baseline),
        ("gradient checks", 60.0, c4_gradient_checks),
        ("overfit and early stopping", 120.0, c5_overfit),
        ("beam exactness", f64::INFINITY, c6_beam),
        ("noise contract", f64::INFINITY, c7_noise),
        ("bootstrap contract", f64::INFINITY, c8_bootstrap),
        ("agreement suite", f64::INFINITY, c9_agreement),
        ("end-to-end determinism", f64::INFINITY, c10_end_to_end),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(anyhow::anyhow!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(_) if secs >= *limit => Err(anyhow::anyhow!("took {secs:.2}s, limit {limit}s")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("{label} ... PASS ({secs:.2}s) {detail}"),
            Err(e) => {
                failed += 1;
                println!("{label} ... FAIL ({secs:.2}s) {e:#}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
