use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::synth::{synth_corpus, SynthConfig};
use crate::corpus::{load_corpus, split_chronological, Corpus, Level, Split, SplitRatios};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, CorpusMetrics, WlcsParams};
use crate::noise::{corrupt_corpus, load_slogans, NoiseAudit, NoiseConfig};
use crate::ordermodel::{pairs, predict, train, ModelConfig, OrderModel, TrainConfig, TrainHistory};
use crate::rng::derive_seed_str;
use crate::sampler::{bootstrap_sample, expand_plan, SamplePlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CorpusSource {
    File { path: PathBuf, level: Level },
    Synthetic(SynthConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub source: CorpusSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseTargets {
    pub train: bool,
    pub dev: bool,
    pub test: bool,
}

impl Default for NoiseTargets {
    fn default() -> Self {
        NoiseTargets {
            train: true,
            dev: true,
            test: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSettings {
    /// Slogan file for Insert; the bundled list when absent.
    pub slogans: Option<PathBuf>,
    pub mode_weights: [f64; 3],
    pub modify_fraction: f64,
    pub targets: NoiseTargets,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        let d = NoiseConfig::default();
        NoiseSettings {
            slogans: None,
            mode_weights: d.mode_weights,
            modify_fraction: d.modify_fraction,
            targets: NoiseTargets::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Experiments {
    pub within: bool,
    pub cross: bool,
    pub learnability: bool,
    pub robustness: bool,
}

impl Default for Experiments {
    fn default() -> Self {
        Experiments {
            within: true,
            cross: true,
            learnability: true,
            robustness: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub name: String,
    pub domains: Vec<DomainSpec>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitRatios,
    pub chronological: bool,
    pub noise_levels: Vec<f64>,
    pub noise: NoiseSettings,
    pub sample_plan: Option<SamplePlan>,
    pub metrics: WlcsParams,
    pub experiments: Experiments,
    pub output_dir: Option<PathBuf>,
    pub master_seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "experiment".into(),
            domains: Vec::new(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split: SplitRatios::default(),
            chronological: true,
            noise_levels: vec![0.2, 0.5, 0.8, 1.0],
            noise: NoiseSettings::default(),
            sample_plan: None,
            metrics: WlcsParams::default(),
            experiments: Experiments::default(),
            output_dir: None,
            master_seed: 0,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() {
            return Err(Error::Config("an experiment needs at least one domain".into()));
        }
        let mut names: Vec<_> = self.domains.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("domain names must be unique".into()));
        }
        self.model.validate()?;
        self.train.validate()?;
        self.metrics.validate()?;
        if let Some(p) = self.noise_levels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("noise level {p} outside [0, 1]")));
        }
        if let Some(plan) = &self.sample_plan {
            plan.validate()?;
        }
        if self.experiments.learnability && self.sample_plan.is_none() {
            return Err(Error::Config("learnability needs a sample_plan".into()));
        }
        for d in &self.domains {
            if let CorpusSource::File { path, .. } = &d.source {
                if !path.exists() {
                    return Err(Error::Config(format!("corpus file {} does not exist", path.display())));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn seed(&self, key: &str) -> u64 {
        derive_seed_str(self.master_seed, key)
    }

    fn train_config(&self, key: &str) -> TrainConfig {
        TrainConfig {
            seed: self.seed(&format!("train:{key}")),
            ..self.train.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub pmr: f64,
    pub acc: f64,
    pub tau: f64,
    #[serde(rename = "wlcs-l")]
    pub wlcs_l: f64,
    /// Number of trainable scalars ("#pm").
    pub parameters: usize,
    pub documents: usize,
    pub epochs: usize,
    pub best_epoch: usize,
}

impl CellMetrics {
    pub const NAMES: [&'static str; 4] = ["pmr", "acc", "tau", "wlcs-l"];

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "pmr" => Some(self.pmr),
            "acc" => Some(self.acc),
            "tau" => Some(self.tau),
            "wlcs-l" => Some(self.wlcs_l),
            _ => None,
        }
    }

    fn new(c: &CorpusMetrics, model: &OrderModel, hist: &TrainHistory) -> Self {
        CellMetrics {
            pmr: c.pmr,
            acc: c.mean_acc,
            tau: c.mean_tau,
            wlcs_l: c.mean_wlcs_f,
            parameters: model.parameter_count(),
            documents: c.k,
            epochs: hist.epochs.len(),
            best_epoch: hist.best_epoch,
        }
    }
}

/// One train/evaluate run. Exactly one of `metrics` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub train_domain: String,
    pub test_domain: String,
    pub level: Level,
    /// Run identifier within the experiment, e.g. `p=0.5` or `size=10/rep=2`.
    pub tag: String,
    pub train_seed: u64,
    pub predict_seed: u64,
    pub metrics: Option<CellMetrics>,
    pub error: Option<String>,
}

impl Cell {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub experiment: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero with a single value.
    pub std: f64,
    pub values: Vec<f64>,
}

impl Summary {
    pub fn of(values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Summary { mean, std, values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub metrics: BTreeMap<String, Summary>,
    pub runs: usize,
    pub failed: usize,
    /// Realized contamination rate per noisy split (robustness only).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub realized_rate: BTreeMap<String, f64>,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub experiment: String,
    pub domain: String,
    pub x_name: String,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub domain: String,
    pub p: f64,
    pub split: String,
    pub audit: NoiseAudit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainInfo {
    pub name: String,
    pub level: Level,
    pub documents: usize,
    pub dropped: usize,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessResults {
    pub spec: ExperimentSpec,
    pub domains: Vec<DomainInfo>,
    pub tables: Vec<ResultTable>,
    pub curves: Vec<Curve>,
    pub audits: Vec<AuditRecord>,
}

impl HarnessResults {
    pub fn table(&self, experiment: &str) -> Option<&ResultTable> {
        self.tables.iter().find(|t| t.experiment == experiment)
    }

    pub fn curve(&self, experiment: &str, domain: &str) -> Option<&Curve> {
        self.curves
            .iter()
            .find(|c| c.experiment == experiment && c.domain == domain)
    }

    pub fn is_empty(&self) -> bool {
        self.tables.iter().all(|t| t.cells.is_empty()) && self.curves.iter().all(|c| c.points.is_empty())
    }
}

/// A loaded and split domain.
#[derive(Debug, Clone)]
pub struct Domain {
    pub info: DomainInfo,
    pub split: Split,
}

pub fn load_domain(spec: &ExperimentSpec, d: &DomainSpec) -> Result<Domain> {
    let (mut corpus, dropped) = match &d.source {
        CorpusSource::File { path, level } => {
            let loaded = load_corpus(path, *level)?;
            (loaded.corpus, loaded.dropped)
        }
        CorpusSource::Synthetic(cfg) => (synth_corpus(cfg)?.0, 0),
    };
    corpus.name = d.name.clone();
    let split = split_chronological(&corpus, spec.split, spec.chronological)?;
    for (which, part) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
        if part.is_empty() {
            return Err(Error::Config(format!("domain {}: {which} split is empty", d.name)));
        }
    }
    Ok(Domain {
        info: DomainInfo {
            name: d.name.clone(),
            level: corpus.level,
            documents: corpus.len(),
            dropped,
            train: split.train.len(),
            dev: split.dev.len(),
            test: split.test.len(),
        },
        split,
    })
}

type Trained = std::result::Result<(OrderModel, TrainHistory), String>;

fn fit(spec: &ExperimentSpec, train_set: &Corpus, dev: &Corpus, tcfg: &TrainConfig) -> Trained {
    train(train_set, dev, &spec.model, tcfg).map_err(|e| e.to_string())
}

fn evaluate(
    spec: &ExperimentSpec,
    trained: &Trained,
    test: &Corpus,
    key: &str,
) -> (u64, std::result::Result<CellMetrics, String>) {
    let predict_seed = spec.seed(&format!("predict:{key}"));
    let out = trained.as_ref().map_err(Clone::clone).and_then(|(model, hist)| {
        let preds = predict(test, model, model.config.beam_width, predict_seed).map_err(|e| e.to_string())?;
        let report = aggregate(&pairs(&preds), &spec.metrics).map_err(|e| e.to_string())?;
        Ok(CellMetrics::new(&report.corpus, model, hist))
    });
    (predict_seed, out)
}

fn cell(
    train_domain: &str,
    test: &Domain,
    tag: String,
    train_seed: u64,
    eval: (u64, std::result::Result<CellMetrics, String>),
) -> Cell {
    let (predict_seed, out) = eval;
    let (metrics, error) = match out {
        Ok(m) => (Some(m), None),
        Err(e) => (None, Some(e)),
    };
    Cell {
        train_domain: train_domain.into(),
        test_domain: test.info.name.clone(),
        level: test.info.level,
        tag,
        train_seed,
        predict_seed,
        metrics,
        error,
    }
}

/// Trains once per domain (in parallel) and keeps the fitted models.
fn fit_domains(spec: &ExperimentSpec, domains: &[Domain]) -> Vec<(TrainConfig, Trained)> {
    domains
        .par_iter()
        .map(|d| {
            let tcfg = spec.train_config(&d.info.name);
            let trained = fit(spec, &d.split.train, &d.split.dev, &tcfg);
            (tcfg, trained)
        })
        .collect()
}

/// Train on each domain's train split, evaluate on its own test split.
pub fn run_within_domain(spec: &ExperimentSpec, domains: &[Domain]) -> ResultTable {
    let fitted = fit_domains(spec, domains);
    within_from(spec, domains, &fitted)
}

fn within_from(spec: &ExperimentSpec, domains: &[Domain], fitted: &[(TrainConfig, Trained)]) -> ResultTable {
    let cells = domains
        .iter()
        .zip(fitted)
        .map(|(d, (tcfg, trained))| {
            let key = format!("{0}->{0}", d.info.name);
            cell(&d.info.name, d, "within".into(), tcfg.seed, evaluate(spec, trained, &d.split.test, &key))
        })
        .collect();
    ResultTable {
        experiment: "within".into(),
        cells,
    }
}

/// Every domain's model against every domain's test split; the diagonal
/// repeats the within-domain runs.
pub fn run_cross_domain(spec: &ExperimentSpec, domains: &[Domain]) -> Result<ResultTable> {
    if domains.len() < 2 {
        return Err(Error::Precondition("cross-domain evaluation needs at least 2 domains".into()));
    }
    let fitted = fit_domains(spec, domains);
    Ok(cross_from(spec, domains, &fitted))
}

fn cross_from(spec: &ExperimentSpec, domains: &[Domain], fitted: &[(TrainConfig, Trained)]) -> ResultTable {
    let jobs: Vec<(usize, usize)> = (0..domains.len())
        .flat_map(|i| (0..domains.len()).map(move |j| (i, j)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(i, j)| {
            let (src, dst) = (&domains[i], &domains[j]);
            let key = format!("{}->{}", src.info.name, dst.info.name);
            let (tcfg, trained) = &fitted[i];
            let tag = if i == j { "within" } else { "cross" };
            cell(&src.info.name, dst, tag.into(), tcfg.seed, evaluate(spec, trained, &dst.split.test, &key))
        })
        .collect();
    ResultTable {
        experiment: "cross".into(),
        cells,
    }
}

fn summarize(x: f64, cells: Vec<Cell>, realized_rate: BTreeMap<String, f64>) -> CurvePoint {
    let ok: Vec<&CellMetrics> = cells.iter().filter_map(|c| c.metrics.as_ref()).collect();
    let metrics = CellMetrics::NAMES
        .iter()
        .filter_map(|&name| {
            let values = ok.iter().map(|m| m.get(name).expect("known metric")).collect();
            Summary::of(values).map(|s| (name.to_string(), s))
        })
        .collect();
    CurvePoint {
        x,
        metrics,
        runs: cells.len(),
        failed: cells.iter().filter(|c| c.failed()).count(),
        realized_rate,
        cells,
    }
}

/// Bootstrap mini datasets from each domain's train/dev splits, one curve
/// point per plan size. Test is always the domain's full test split.
pub fn run_learnability(spec: &ExperimentSpec, domain: &Domain) -> Result<Curve> {
    let plan = spec
        .sample_plan
        .as_ref()
        .ok_or_else(|| Error::Config("learnability needs a sample_plan".into()))?;
    let name = &domain.info.name;
    let plan = SamplePlan {
        seed: spec.seed(&format!("sample:{name}")) ^ plan.seed,
        ..plan.clone()
    };
    let entries = expand_plan(&plan)?;
    let cells: Vec<Cell> = entries
        .par_iter()
        .map(|e| {
            let tag = format!("size={}/rep={}", e.size, e.rep);
            let tcfg = spec.train_config(&format!("{name}:{tag}"));
            let trained = bootstrap_sample(
                &domain.split.train,
                &domain.split.dev,
                e.size,
                e.seed,
                plan.dev_ratio_lock,
                plan.mode,
            )
            .map_err(|err| err.to_string())
            .and_then(|(tr, dv)| fit(spec, &tr, &dv, &tcfg));
            let eval = evaluate(spec, &trained, &domain.split.test, &format!("{name}:{tag}"));
            cell(name, domain, tag, tcfg.seed, eval)
        })
        .collect();
    let points = plan
        .sizes
        .iter()
        .map(|&size| {
            let prefix = format!("size={size}/");
            let here: Vec<Cell> = cells.iter().filter(|c| c.tag.starts_with(&prefix)).cloned().collect();
            summarize(size as f64, here, BTreeMap::new())
        })
        .collect();
    Ok(Curve {
        experiment: "learnability".into(),
        domain: name.clone(),
        x_name: "size".into(),
        points,
    })
}

fn noise_config(spec: &ExperimentSpec, p: f64, seed: u64) -> Result<NoiseConfig> {
    let mut cfg = NoiseConfig::with_p(p, seed);
    if let Some(path) = &spec.noise.slogans {
        cfg.slogans = load_slogans(path)?;
    }
    cfg.mode_weights = spec.noise.mode_weights;
    cfg.modify_fraction = spec.noise.modify_fraction;
    Ok(cfg)
}

/// One curve point per noise level. The training seed does not depend on
/// `p`, so the `p = 0` point reproduces the clean within-domain run.
pub fn run_robustness(spec: &ExperimentSpec, domain: &Domain) -> Result<(Curve, Vec<AuditRecord>)> {
    let name = &domain.info.name;
    let targets = spec.noise.targets;
    let results: Vec<Result<(CurvePoint, Vec<AuditRecord>)>> = spec
        .noise_levels
        .par_iter()
        .map(|&p| {
            let mut audits = Vec::new();
            let mut rates = BTreeMap::new();
            let mut noisy = |which: &str, part: &Corpus, on: bool| -> Result<Corpus> {
                if !on {
                    return Ok(part.clone());
                }
                let cfg = noise_config(spec, p, spec.seed(&format!("noise:{name}:{which}")))?;
                let (out, audit) = corrupt_corpus(part, &cfg)?;
                rates.insert(which.to_string(), audit.realized_rate);
                audits.push(AuditRecord {
                    domain: name.clone(),
                    p,
                    split: which.into(),
                    audit,
                });
                Ok(out)
            };
            let tr = noisy("train", &domain.split.train, targets.train)?;
            let dv = noisy("dev", &domain.split.dev, targets.dev)?;
            let te = noisy("test", &domain.split.test, targets.test)?;
            let tcfg = spec.train_config(name);
            let trained = fit(spec, &tr, &dv, &tcfg);
            let key = format!("{0}->{0}", name);
            let c = cell(name, domain, format!("p={p}"), tcfg.seed, evaluate(spec, &trained, &te, &key));
            Ok((summarize(p, vec![c], rates), audits))
        })
        .collect();
    let mut points = Vec::new();
    let mut audits = Vec::new();
    for r in results {
        let (pt, a) = r?;
        points.push(pt);
        audits.extend(a);
    }
    Ok((
        Curve {
            experiment: "robustness".into(),
            domain: name.clone(),
            x_name: "p".into(),
            points,
        },
        audits,
    ))
}

/// Results plus the per-domain models trained for the within/cross grid.
#[derive(Debug, Clone)]
pub struct HarnessRun {
    pub results: HarnessResults,
    pub models: Vec<(String, OrderModel)>,
}

/// Runs every enabled experiment of `spec`. Failed training runs become
/// failed cells; only spec or data errors abort.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<HarnessRun> {
    spec.validate()?;
    let domains = spec
        .domains
        .iter()
        .map(|d| load_domain(spec, d))
        .collect::<Result<Vec<_>>>()?;
    let mut tables = Vec::new();
    let mut curves = Vec::new();
    let mut audits = Vec::new();
    let mut models = Vec::new();
    let ex = spec.experiments;
    if ex.within || (ex.cross && domains.len() >= 2) {
        let fitted = fit_domains(spec, &domains);
        for (d, (_, trained)) in domains.iter().zip(&fitted) {
            if let Ok((m, _)) = trained {
                models.push((d.info.name.clone(), m.clone()));
            }
        }
        if ex.within {
            tables.push(within_from(spec, &domains, &fitted));
        }
        if ex.cross && domains.len() >= 2 {
            tables.push(cross_from(spec, &domains, &fitted));
        }
    }
    if ex.learnability {
        for d in &domains {
            curves.push(run_learnability(spec, d)?);
        }
    }
    if ex.robustness {
        for d in &domains {
            let (curve, a) = run_robustness(spec, d)?;
            curves.push(curve);
            audits.extend(a);
        }
    }
    Ok(HarnessRun {
        results: HarnessResults {
            spec: spec.clone(),
            domains: domains.into_iter().map(|d| d.info).collect(),
            tables,
            curves,
            audits,
        },
        models,
    })
}
