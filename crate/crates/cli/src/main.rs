//! `textorder`: the sequence-ordering pipeline from the command line.
//!
//! Every subcommand resolves its configuration as defaults, then the
//! `--config` JSON file, then flags, and writes `manifest.json` under
//! `--out` on success. `textorder replay --manifest m.json --out d/` reruns
//! a manifest and reproduces its outputs.
//!
//! Exit status: 0 on success, 1 for usage or validation errors, 2 for
//! runtime failures.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use commands::{
    AgreeConfig, Command, CorruptConfig, EvalConfig, OrderConfig, PrepConfig, SampleConfig, StatsConfig, SweepConfig,
    TrainCmdConfig,
};
use config::{exit_code, invalid, read_json, resolve, Manifest, Overrides};

#[derive(Parser)]
#[command(name = "textorder", version, about = "Sequence ordering: data prep, training, decoding and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// JSON file with the subcommand's configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load a corpus, split it and build the vocabulary.
    Prep {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// sentence or paragraph
        #[arg(long)]
        level: Option<String>,
        #[arg(long)]
        min_freq: Option<usize>,
        /// Keep file order instead of sorting by date.
        #[arg(long)]
        no_chronological: bool,
        #[arg(long)]
        merge_bullets: bool,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        embed_dim: Option<usize>,
    },
    /// Corpus statistics.
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        level: Option<String>,
        #[arg(long)]
        merge_bullets: bool,
    },
    /// Contaminate a corpus with synthetic noise.
    Corrupt {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        level: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        slogans: Option<PathBuf>,
        #[arg(long)]
        modify_fraction: Option<f64>,
    },
    /// Draw bootstrap train/dev samples.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        level: Option<String>,
        /// Single sample of this train size instead of the full plan.
        #[arg(long)]
        size: Option<usize>,
        /// JSON sample plan.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Train an ordering model.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        level: Option<String>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        embed_dim: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        heads: Option<usize>,
        #[arg(long)]
        beam_width: Option<usize>,
        #[arg(long)]
        l2: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        patience: Option<usize>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// sgd or adam
        #[arg(long)]
        optimizer: Option<String>,
        #[arg(long)]
        min_freq: Option<usize>,
        #[arg(long)]
        eval_beam_width: Option<usize>,
    },
    /// Decode orders for a corpus with a trained model.
    Order {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        level: Option<String>,
        #[arg(long)]
        beam_width: Option<usize>,
    },
    /// Score predictions against gold orders.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long = "pred")]
        predictions: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        weight_exponent: Option<f64>,
        #[arg(long)]
        f_alpha: Option<f64>,
    },
    /// Run an experiment spec.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Experiment spec JSON; replaces any spec in --config.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Inter-rater agreement and metric regressions.
    Agree {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Rerun the command recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute<C: Command>(cfg: C, out: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let files = cfg.run(out)?;
    Manifest::new(C::NAME, cfg.seed(), serde_json::to_value(&cfg)?, out, &files).write(out)
}

fn start<C: Command>(common: &Common, flags: Overrides) -> anyhow::Result<()> {
    let cfg: C = resolve(common.config.as_deref(), flags)?;
    execute(cfg, &common.out)
}

fn replay_as<C: Command>(config: Value, out: &Path) -> anyhow::Result<()> {
    let cfg: C = serde_json::from_value(config).map_err(|e| invalid(format!("manifest config: {e}")))?;
    execute(cfg, out)
}

fn replay(manifest: &Path, out: &Path) -> anyhow::Result<()> {
    let m = Manifest::load(manifest)?;
    match m.command.as_str() {
        PrepConfig::NAME => replay_as::<PrepConfig>(m.config, out),
        StatsConfig::NAME => replay_as::<StatsConfig>(m.config, out),
        CorruptConfig::NAME => replay_as::<CorruptConfig>(m.config, out),
        SampleConfig::NAME => replay_as::<SampleConfig>(m.config, out),
        TrainCmdConfig::NAME => replay_as::<TrainCmdConfig>(m.config, out),
        OrderConfig::NAME => replay_as::<OrderConfig>(m.config, out),
        EvalConfig::NAME => replay_as::<EvalConfig>(m.config, out),
        SweepConfig::NAME => replay_as::<SweepConfig>(m.config, out),
        AgreeConfig::NAME => replay_as::<AgreeConfig>(m.config, out),
        other => Err(invalid(format!("manifest names unknown command {other:?}"))),
    }
}

fn dispatch(cmd: Cmd) -> anyhow::Result<()> {
    let mut o = Overrides::default();
    match cmd {
        Cmd::Prep { common, input, level, min_freq, no_chronological, merge_bullets, embeddings, embed_dim } => {
            o.set("input", input)
                .set("level", level)
                .set("min_freq", min_freq)
                .set("chronological", no_chronological.then_some(false))
                .flag("merge_bullets", merge_bullets)
                .set("embeddings", embeddings)
                .set("embed_dim", embed_dim)
                .set("seed", common.seed);
            start::<PrepConfig>(&common, o)
        }
        Cmd::Stats { common, input, level, merge_bullets } => {
            o.set("input", input).set("level", level).flag("merge_bullets", merge_bullets).set("seed", common.seed);
            start::<StatsConfig>(&common, o)
        }
        Cmd::Corrupt { common, input, level, p, slogans, modify_fraction } => {
            o.set("input", input)
                .set("level", level)
                .set("p", p)
                .set("slogans", slogans)
                .set("modify_fraction", modify_fraction)
                .set("seed", common.seed);
            start::<CorruptConfig>(&common, o)
        }
        Cmd::Sample { common, train, dev, level, size, plan } => {
            let plan = plan.map(|p| read_json(&p)).transpose()?;
            o.set("train", train)
                .set("dev", dev)
                .set("level", level)
                .set("size", size)
                .set("plan", plan)
                .set("plan.seed", common.seed);
            start::<SampleConfig>(&common, o)
        }
        Cmd::Train {
            common,
            train,
            dev,
            level,
            embeddings,
            embed_dim,
            hidden,
            heads,
            beam_width,
            l2,
            batch_size,
            patience,
            max_epochs,
            lr,
            optimizer,
            min_freq,
            eval_beam_width,
        } => {
            o.set("train_corpus", train)
                .set("dev_corpus", dev)
                .set("level", level)
                .set("embeddings", embeddings)
                .set("model.embed_dim", embed_dim)
                .set("model.hidden_dim", hidden)
                .set("model.pointer_heads", heads)
                .set("model.beam_width", beam_width)
                .set("model.l2_lambda", l2)
                .set("train.batch_size", batch_size)
                .set("train.patience", patience)
                .set("train.max_epochs", max_epochs)
                .set("train.learning_rate", lr)
                .set("train.optimizer", optimizer)
                .set("train.min_freq", min_freq)
                .set("train.eval_beam_width", eval_beam_width)
                .set("train.seed", common.seed);
            start::<TrainCmdConfig>(&common, o)
        }
        Cmd::Order { common, model, input, level, beam_width } => {
            o.set("model", model)
                .set("input", input)
                .set("level", level)
                .set("beam_width", beam_width)
                .set("seed", common.seed);
            start::<OrderConfig>(&common, o)
        }
        Cmd::Eval { common, predictions, dataset, weight_exponent, f_alpha } => {
            o.set("predictions", predictions)
                .set("dataset", dataset)
                .set("metrics.weight_exponent", weight_exponent)
                .set("metrics.f_alpha", f_alpha)
                .set("seed", common.seed);
            start::<EvalConfig>(&common, o)
        }
        Cmd::Sweep { common, spec } => {
            let spec = spec.map(|p| read_json(&p)).transpose()?;
            o.set("spec", spec).set("spec.master_seed", common.seed);
            start::<SweepConfig>(&common, o)
        }
        Cmd::Agree { common, ratings, metrics } => {
            o.set("ratings", ratings).set("metrics", metrics).set("seed", common.seed);
            start::<AgreeConfig>(&common, o)
        }
        Cmd::Replay { manifest, out } => replay(&manifest, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
