//! Bootstrap mini-datasets: train and dev are drawn from their parent sets
//! independently while the dev/train size proportion stays locked.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    #[default]
    WithReplacement,
    WithoutReplacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplePlan {
    pub sizes: Vec<usize>,
    /// Repetitions per size.
    pub reps: BTreeMap<usize, usize>,
    /// (train fraction, dev fraction) of the parent split.
    pub dev_ratio_lock: (f64, f64),
    pub seed: u64,
    pub mode: SampleMode,
}

impl Default for SamplePlan {
    /// Five size levels with 20/10/5/5/5 repetitions and the 90/5 lock.
    fn default() -> Self {
        SamplePlan {
            sizes: vec![1000, 3000, 5000, 8000, 10000],
            reps: [(1000, 20), (3000, 10), (5000, 5), (8000, 5), (10000, 5)]
                .into_iter()
                .collect(),
            dev_ratio_lock: (0.9, 0.05),
            seed: 0,
            mode: SampleMode::WithReplacement,
        }
    }
}

impl SamplePlan {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::Config("plan sizes must be non-empty and positive".into()));
        }
        for size in &self.sizes {
            match self.reps.get(size) {
                Some(&r) if r > 0 => {}
                _ => return Err(Error::Config(format!("size {size} needs a positive repetition count"))),
            }
        }
        let (t, d) = self.dev_ratio_lock;
        if !(t > 0.0 && d > 0.0) {
            return Err(Error::Config("dev_ratio_lock fractions must be positive".into()));
        }
        Ok(())
    }

    pub fn dev_size(&self, train_size: usize) -> usize {
        dev_size(train_size, self.dev_ratio_lock)
    }
}

pub fn dev_size(train_size: usize, lock: (f64, f64)) -> usize {
    (train_size as f64 * lock.1 / lock.0).round() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub size: usize,
    pub rep: usize,
    pub seed: u64,
}

/// One entry per (size, repetition), in plan order; seeds depend only on
/// `(plan.seed, size, rep)`.
pub fn expand_plan(plan: &SamplePlan) -> Result<Vec<PlanEntry>> {
    plan.validate()?;
    Ok(plan
        .sizes
        .iter()
        .flat_map(|&size| {
            (0..plan.reps[&size]).map(move |rep| PlanEntry {
                size,
                rep,
                seed: derive_seed(plan.seed, &[size as u64, rep as u64]),
            })
        })
        .collect())
}

pub fn bootstrap_sample(
    parent_train: &Corpus,
    parent_dev: &Corpus,
    train_size: usize,
    seed: u64,
    lock: (f64, f64),
    mode: SampleMode,
) -> Result<(Corpus, Corpus)> {
    if train_size == 0 {
        return Err(Error::Precondition("train_size must be at least 1".into()));
    }
    if parent_train.is_empty() || parent_dev.is_empty() {
        return Err(Error::Precondition("bootstrap parents must be non-empty".into()));
    }
    let train = draw(parent_train, train_size, derive_seed(seed, &[0]), mode)?;
    let dev = draw(parent_dev, dev_size(train_size, lock).max(1), derive_seed(seed, &[1]), mode)?;
    Ok((train, dev))
}

fn draw(parent: &Corpus, size: usize, seed: u64, mode: SampleMode) -> Result<Corpus> {
    let mut rng = rng_from_seed(seed);
    let n = parent.len();
    let picks: Vec<usize> = match mode {
        SampleMode::WithReplacement => (0..size).map(|_| rng.random_range(0..n)).collect(),
        SampleMode::WithoutReplacement => {
            if size > n {
                return Err(Error::Precondition(format!(
                    "cannot draw {size} documents without replacement from {n}"
                )));
            }
            rand::seq::index::sample(&mut rng, n, size).into_vec()
        }
    };
    let mut seen: HashMap<usize, usize> = HashMap::new();
    let documents = picks
        .into_iter()
        .map(|i| {
            let count = seen.entry(i).or_default();
            let mut doc: Document = parent.documents[i].clone();
            if *count > 0 {
                doc.id = format!("{}#{}", doc.id, count);
            }
            *count += 1;
            doc
        })
        .collect();
    Ok(Corpus {
        name: parent.name.clone(),
        level: parent.level,
        documents,
    })
}

/// Strips a `#k` duplicate suffix, recovering the parent document id.
pub fn parent_id(id: &str) -> &str {
    match id.rfind('#') {
        Some(i) if id[i + 1..].chars().all(|c| c.is_ascii_digit()) && i + 1 < id.len() => &id[..i],
        _ => id,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Level, Sequence};

    fn parent(n: usize, tag: &str) -> Corpus {
        Corpus {
            name: tag.into(),
            level: Level::Sentence,
            documents: (0..n)
                .map(|i| Document {
                    id: format!("{tag}{i}"),
                    date: None,
                    sequences: vec![Sequence::new("a"), Sequence::new("b")],
                })
                .collect(),
        }
    }

    #[test]
    fn default_plan_has_45_runs() {
        let entries = expand_plan(&SamplePlan::default()).unwrap();
        assert_eq!(entries.len(), 45);
        let mut seeds: Vec<_> = entries.iter().map(|e| e.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 45);
        assert_eq!(entries, expand_plan(&SamplePlan::default()).unwrap());
    }

    #[test]
    fn small_plan() {
        let plan = SamplePlan {
            sizes: vec![100],
            reps: [(100, 3)].into_iter().collect(),
            ..SamplePlan::default()
        };
        assert_eq!(expand_plan(&plan).unwrap().len(), 3);
    }

    #[test]
    fn plan_json_round_trip() {
        let plan = SamplePlan::default();
        let json = serde_json::to_string(&plan).unwrap();
        assert_eq!(serde_json::from_str::<SamplePlan>(&json).unwrap(), plan);
    }

    #[test]
    fn dev_size_follows_lock() {
        assert_eq!(dev_size(1000, (0.9, 0.05)), 56);
        let (train, dev) = bootstrap_sample(&parent(50, "t"), &parent(10, "d"), 1000, 1, (0.9, 0.05), SampleMode::WithReplacement).unwrap();
        assert_eq!(train.len(), 1000);
        assert_eq!(dev.len(), 56);
    }

    #[test]
    fn oversampling_yields_suffixed_duplicates() {
        let p = parent(5, "t");
        let (train, _) = bootstrap_sample(&p, &parent(5, "d"), 20, 4, (0.9, 0.05), SampleMode::WithReplacement).unwrap();
        let mut ids: Vec<_> = train.documents.iter().map(|d| d.id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 20);
        assert!(train.documents.iter().any(|d| d.id.contains('#')));
        for d in &train.documents {
            assert!(p.documents.iter().any(|q| q.id == parent_id(&d.id)));
        }
    }

    #[test]
    fn without_replacement_is_bounded() {
        let p = parent(5, "t");
        assert!(bootstrap_sample(&p, &p, 6, 0, (0.9, 0.05), SampleMode::WithoutReplacement).is_err());
        let (train, _) = bootstrap_sample(&p, &p, 5, 0, (0.9, 0.05), SampleMode::WithoutReplacement).unwrap();
        assert!(train.documents.iter().all(|d| !d.id.contains('#')));
    }

    #[test]
    fn parent_id_strips_suffix() {
        assert_eq!(parent_id("doc#3"), "doc");
        assert_eq!(parent_id("doc"), "doc");
        assert_eq!(parent_id("a#b"), "a#b");
        assert_eq!(parent_id("x#"), "x#");
    }
}
