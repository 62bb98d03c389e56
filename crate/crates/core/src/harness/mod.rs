//! Experiment grids over the ordering model: within- and cross-domain
//! evaluation, learnability and robustness sweeps, synthetic corpora and
//! report files.

mod experiment;
mod report;
mod synth;

pub use experiment::{
    load_domain, run_cross_domain, run_experiment, run_learnability, run_robustness,
    run_within_domain, AuditRecord, Cell, CellMetrics, CorpusSource, Curve, CurvePoint, Domain,
    DomainInfo, DomainSpec, ExperimentSpec, Experiments, HarnessResults, HarnessRun, NoiseSettings,
    NoiseTargets, ResultTable, Summary,
};
pub use report::{cells_tsv, cross_tsv, curve_tsv, emit_report, load_results, within_tsv};
pub use synth::{marker_token, parse_marker, synth_corpus, CoherenceScheme, SynthConfig, SynthReport};
