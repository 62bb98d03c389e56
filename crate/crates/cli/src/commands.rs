use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use textorder::corpus::{
    build_vocab, load_corpus_with, load_embeddings, split_chronological, stats, write_corpus, Corpus,
    EmbeddingMatrix, Level, LoadOptions, SplitRatios, Vocabulary,
};
use textorder::harness::{emit_report, run_experiment, ExperimentSpec};
use textorder::humaneval::{agreement, load_ratings, pearson, regress_metric, Regression};
use textorder::metrics::{aggregate, WlcsParams};
use textorder::noise::{corrupt_corpus, load_slogans, NoiseConfig};
use textorder::ordermodel::{
    init_seed, predict, read_predictions, train_model, write_predictions, ModelConfig, OrderModel, TrainConfig,
};
use textorder::sampler::{bootstrap_sample, expand_plan, SamplePlan};

use crate::config::{invalid, require_file};

/// A subcommand's fully resolved configuration.
pub trait Command: Serialize + DeserializeOwned {
    const NAME: &'static str;

    fn seed(&self) -> u64;

    /// Runs the command, returning every file written under `out`.
    fn run(&self, out: &Path) -> anyhow::Result<Vec<PathBuf>>;
}

struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Self {
        Outputs { dir, files: Vec::new() }
    }

    fn write(&mut self, rel: impl AsRef<Path>, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: impl AsRef<Path>, value: &T) -> anyhow::Result<()> {
        self.write(rel, serde_json::to_string_pretty(value)? + "\n")
    }

    fn corpus(&mut self, rel: impl AsRef<Path>, corpus: &Corpus) -> anyhow::Result<()> {
        let mut buf = Vec::new();
        write_corpus(corpus, &mut buf)?;
        self.write(rel, buf)
    }
}

fn input<'p>(path: &'p Option<PathBuf>, flag: &str) -> anyhow::Result<&'p Path> {
    let path = path.as_deref().ok_or_else(|| invalid(format!("{flag} is required")))?;
    require_file(path)?;
    Ok(path)
}

fn load(path: &Path, level: Level, merge_bullets: bool) -> anyhow::Result<Corpus> {
    let opts = LoadOptions { merge_bullets };
    let loaded = load_corpus_with(path, level, &opts)?;
    if loaded.dropped > 0 {
        eprintln!("{}: dropped {} documents with fewer than 2 sequences", path.display(), loaded.dropped);
    }
    Ok(loaded.corpus)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepConfig {
    pub input: Option<PathBuf>,
    pub level: Level,
    pub merge_bullets: bool,
    pub split: SplitRatios,
    pub chronological: bool,
    pub min_freq: usize,
    /// Pretrained vectors, only used to report the vocabulary hit rate.
    pub embeddings: Option<PathBuf>,
    pub embed_dim: usize,
    pub seed: u64,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            input: None,
            level: Level::Sentence,
            merge_bullets: false,
            split: SplitRatios::default(),
            chronological: true,
            min_freq: 1,
            embeddings: None,
            embed_dim: ModelConfig::default().embed_dim,
            seed: 0,
        }
    }
}

impl Command for PrepConfig {
    const NAME: &'static str = "prep";

    fn seed(&self) -> u64 {
        self.seed
    }

    fn run(&self, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
        let corpus = load(input(&self.input, "--in")?, self.level, self.merge_bullets)?;
        if self.min_freq == 0 {
            return Err(invalid("min_freq must be at least 1"));
        }
        let split = split_chronological(&corpus, self.split, self.chronological)?;
        let vocab = build_vocab(&split.train, self.min_freq);
        let mut o = Outputs::new(out);
        o.corpus("train.jsonl", &split.train)?;
        o.corpus("dev.jsonl", &split.dev)?;
        o.corpus("test.jsonl", &split.test)?;
        o.json("vocab.json", &vocab)?;
        o.json(
            "stats.json",
            &serde_json::json!({
                "corpus": stats(&corpus),
                "train": stats(&split.train),
                "dev": stats(&split.dev),
                "test": stats(&split.test),
            }),
        )?;
        if let Some(path) = &self.embeddings {
            require_file(path)?;
            let (_, report) = load_embeddings(path, &vocab, self.embed_dim, self.seed)?;
            o.json("embeddings.json", &report)?;
        }
        Ok(o.files)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub input: Option<PathBuf>,
    pub level: Level,
    pub merge_bullets: bool,
    pub seed: u64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            input: None,
            level: Level::Sentence,
            merge_bullets: false,
            seed: 0,
        }
    }
}

impl Command for StatsConfig {
    const NAME: &'static str = "stats";

    fn seed(&self) -> u64 {
        self.seed
    }

    fn run(&self, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
        let corpus = load(input(&self.input, "--in")?, self.level, self.merge_bullets)?;
        let mut o = Outputs::new(out);
        o.json("stats.json", &stats(&corpus))?;
        Ok(o.files)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptConfig {
    pub input: Option<PathBuf>,
    pub level: Level,
    pub p: f64,
    /// One slogan per line; the bundled list when absent.
    pub slogans: Option<PathBuf>,
    pub mode_weights: [f64; 3],
    pub modify_fraction: f64,
    pub seed: u64,
}

impl Default for CorruptConfig {
    fn default() -> Self {
        let noise = NoiseConfig::default();
        CorruptConfig {
            input: None,
            level: Level::Sentence,
            p: noise.p,
            slogans: None,
            mode_weights: noise.mode_weights,
            modify_fraction: noise.modify_fraction,
            seed: 0,
        }
    }
}

impl Command for CorruptConfig {
    const NAME: &'static str = "corrupt";

    fn seed(&self) -> u64 {
        self.seed
    }

    fn run(&self, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
        let corpus = load(input(&self.input, "--in")?, self.level, false)?;
        let mut cfg = NoiseConfig {
            p: self.p,
            mode_weights: self.mode_weights,
            modify_fraction: self.modify_fraction,
            seed: self.seed,
            ..NoiseConfig::default()
        };
        if let Some(path) = &self.slogans {
            require_file(path)?;
            cfg.slogans = load_slogans(path)?;
        }
        let (noisy, audit) = corrupt_corpus(&corpus, &cfg)?;
        let mut o = Outputs::new(out);
        o.corpus("corpus.jsonl", &noisy)?;
        o.json("audit.json", &audit)?;
        Ok(o.files)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub level: Level,
    pub plan: SamplePlan,
    /// Draw a single sample of this size instead of expanding the plan.
    pub size: Option<usize>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            train: None,
            dev: None,
            level: Level::Sentence,
            plan: SamplePlan::default(),
            size: None,
        }
    }
}

impl Command for SampleConfig {
    const NAME: &'static str = "sample";

    fn seed(&self) -> u64 {
        self.plan.seed
    }

    fn run(&self, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
        let train = load(input(&self.train, "--train")?, self.level, false)?;
        let dev = load(input(&self.dev, "--dev")?, self.level, false)?;
        let plan = &self.plan;
        let mut o = Outputs::new(out);
        if let Some(size) = self.size {
            let (t, d) = bootstrap_sample(&train, &dev, size, plan.seed, plan.dev_ratio_lock, plan.mode)?;
            o.corpus("train.jsonl", &t)?;
            o.corpus("dev.jsonl", &d)?;
            return Ok(o.files);
        }
        let entries = expand_plan(plan)?;
        for e in &entries {
            let (t, d) = bootstrap_sample(&train, &dev, e.size, e.seed, plan.dev_ratio_lock, plan.mode)?;
            let dir = format!("{}_{}", e.size, e.rep);
            o.corpus(Path::new(&dir).join("train.jsonl"), &t)?;
            o.corpus(Path::new(&dir).join("dev.jsonl"), &d)?;
        }
        o.json("plan.json", &entries)?;
        Ok(o.files)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCmdConfig {
    pub train_corpus: Option<PathBuf>,
    pub dev_corpus: Option<PathBuf>,
    pub level: Level,
    pub embeddings: Option<PathBuf>,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        TrainCmdConfig {
            train_corpus: None,
            dev_corpus: None,
            level: Level::Sentence,
            embeddings: None,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl Command for TrainCmdConfig {
    const NAME: &'static str = "train";

    fn seed(&self) -> u64 {
        self.train.seed
    }

    fn run(&self, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
        let train = load(input(&self.train_corpus, "--train")?, self.level, false)?;
        let dev = load(input(&self.dev_corpus, "--dev")?, self.level, false)?;
        self.model.validate()?;
        self.train.validate()?;
        let vocab: Vocabulary = build_vocab(&train, self.train.min_freq);
        let seed = init_seed(self.train.seed);
        let embeddings: Option<EmbeddingMatrix> = match &self.embeddings {
            Some(path) => {
                require_file(path)?;
                let (m, report) = load_embeddings(path, &vocab, self.model.embed_dim, seed)?;
                eprintln!("embeddings: {} of {} vocabulary ids matched", report.matched, report.vocab_size);
                Some(m)
            }
            None => None,
        };
        let model = OrderModel::new(self.model.clone(), vocab, embeddings.as_ref(), seed)?;
        let (model, history) = train_model(model, &train, &dev, &self.train)?;
        let mut o = Outputs::new(out);
        o.write("model.json", model.to_json()?)?;
        o.json("history.json", &history)?;
        Ok(o.files)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrderConfig {
    pub model: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub level: Level,
    /// Defaults to the checkpoint's beam width.
    pub beam_width: Option<usize>,
    pub seed: u64,
}

impl Default for OrderConfig {
    fn default() -> Self {
        OrderConfig {
            model: None,
            input: None,
            level: Level::Sentence,
            beam_width: None,
            seed: 0,
        }
    }
}

impl Command for OrderConfig {
    const NAME: &'static str = "order";

    fn seed(&self) -> u64 {
        self.seed
    }

    fn run(&self, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
        let model = OrderModel::load(input(&self.model, "--model")?)?;
        let corpus = load(input(&self.input, "--in")?, self.level, false)?;
        let width = self.beam_width.unwrap_or(model.config.beam_width);
        if width == 0 {
            return Err(invalid("beam width must be at least 1"));
        }
        let preds = predict(&corpus, &model, width, self.seed)?;
        let mut buf = Vec::new();
        write_predictions(&preds, &mut buf)?;
        let mut o = Outputs::new(out);
        o.write("predictions.jsonl", buf)?;
        Ok(o.files)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub predictions: Option<PathBuf>,
    /// Row label in `report.tsv`.
    pub dataset: String,
    pub metrics: WlcsParams,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            predictions: None,
            dataset: "test".into(),
            metrics: WlcsParams::default(),
            seed: 0,
        }
    }
}

impl Command for EvalConfig {
    const NAME: &'static str = "eval";

    fn seed(&self) -> u64 {
        self.seed
    }

    fn run(&self, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
        let path = input(&self.predictions, "--pred")?;
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let pairs = read_predictions(BufReader::new(file))?;
        let report = aggregate(&pairs, &self.metrics)?;
        let mut o = Outputs::new(out);
        o.json("report.json", &report)?;
        o.write("report.tsv", report.to_tsv(&self.dataset))?;
        Ok(o.files)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub spec: ExperimentSpec,
}

impl Command for SweepConfig {
    const NAME: &'static str = "sweep";

    fn seed(&self) -> u64 {
        self.spec.master_seed
    }

    fn run(&self, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
        self.spec.validate()?;
        let run = run_experiment(&self.spec)?;
        Ok(emit_report(&run.results, &run.models, out)?)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgreeConfig {
    pub ratings: Option<PathBuf>,
    /// TSV with a `passage` column followed by one column per metric.
    pub metrics: Option<PathBuf>,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct MetricFit {
    metric: String,
    pearson: Option<f64>,
    #[serde(flatten)]
    regression: Regression,
}

impl Command for AgreeConfig {
    const NAME: &'static str = "agree";

    fn seed(&self) -> u64 {
        self.seed
    }

    fn run(&self, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
        let matrix = load_ratings(input(&self.ratings, "--ratings")?)?;
        let mut o = Outputs::new(out);
        o.json("agreement.json", &agreement(&matrix)?)?;
        if let Some(path) = &self.metrics {
            require_file(path)?;
            let table = read_metric_table(path)?;
            let means = matrix.passage_means();
            let mut fits = Vec::new();
            for (k, name) in table.names.iter().enumerate() {
                let mut x = Vec::new();
                let mut y = Vec::new();
                for (passage, mean) in matrix.passages.iter().zip(&means) {
                    let Some(mean) = mean else { continue };
                    let row = table
                        .rows
                        .iter()
                        .find(|(p, _)| p == passage)
                        .ok_or_else(|| invalid(format!("{}: no metric row for passage {passage:?}", path.display())))?;
                    x.push(row.1[k]);
                    y.push(*mean);
                }
                fits.push(MetricFit {
                    metric: name.clone(),
                    pearson: pearson(&x, &y),
                    regression: regress_metric(&x, &y)?,
                });
            }
            o.json("regressions.json", &fits)?;
        }
        Ok(o.files)
    }
}

struct MetricTable {
    names: Vec<String>,
    rows: Vec<(String, Vec<f64>)>,
}

fn read_metric_table(path: &Path) -> anyhow::Result<MetricTable> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let bad = |line: usize, m: String| invalid(format!("{}:{line}: {m}", path.display()));
    let header: Vec<&str> = lines.next().ok_or_else(|| bad(1, "empty file".into()))?.split('\t').collect();
    if header.first() != Some(&"passage") || header.len() < 2 {
        return Err(bad(1, "header must be `passage` followed by metric names".into()));
    }
    let names = header[1..].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != header.len() {
            return Err(bad(i + 2, format!("expected {} fields, got {}", header.len(), f.len())));
        }
        let values = f[1..]
            .iter()
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad(i + 2, format!("bad number {v:?}"))))
            .collect::<anyhow::Result<Vec<_>>>()?;
        rows.push((f[0].to_string(), values));
    }
    Ok(MetricTable { names, rows })
}
