//! Agreement and regression analysis of human coherence ratings on the
//! 1 to 5 scale.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const RATING_MIN: f64 = 1.0;
pub const RATING_MAX: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub judge: String,
    pub passage: String,
    pub rating: f64,
}

/// Judges by passages; `ratings[j][p]` is judge `j` on passage `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingMatrix {
    pub judges: Vec<String>,
    pub passages: Vec<String>,
    pub ratings: Vec<Vec<Option<f64>>>,
}

impl RatingMatrix {
    /// Judges and passages in first-seen order. A repeated (judge, passage)
    /// pair is an error.
    pub fn from_records(records: &[RatingRecord]) -> Result<Self> {
        let mut judges: Vec<String> = Vec::new();
        let mut passages: Vec<String> = Vec::new();
        let mut jidx = BTreeMap::new();
        let mut pidx = BTreeMap::new();
        for r in records {
            jidx.entry(r.judge.clone()).or_insert_with(|| {
                judges.push(r.judge.clone());
                judges.len() - 1
            });
            pidx.entry(r.passage.clone()).or_insert_with(|| {
                passages.push(r.passage.clone());
                passages.len() - 1
            });
        }
        let mut ratings = vec![vec![None; passages.len()]; judges.len()];
        for (row, r) in records.iter().enumerate() {
            if !(RATING_MIN..=RATING_MAX).contains(&r.rating) {
                return Err(Error::RatingOutOfRange {
                    row: row + 1,
                    rating: r.rating,
                });
            }
            let slot = &mut ratings[jidx[&r.judge]][pidx[&r.passage]];
            if slot.is_some() {
                return Err(Error::Parse {
                    line: row + 1,
                    message: format!("judge {} rated passage {} twice", r.judge, r.passage),
                });
            }
            *slot = Some(r.rating);
        }
        Ok(RatingMatrix {
            judges,
            passages,
            ratings,
        })
    }

    /// Complete matrix from rows of ratings, judges named `j0, j1, ...` and
    /// passages `p0, p1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let records: Vec<RatingRecord> = rows
            .iter()
            .enumerate()
            .flat_map(|(j, row)| {
                row.iter().enumerate().map(move |(p, &rating)| RatingRecord {
                    judge: format!("j{j}"),
                    passage: format!("p{p}"),
                    rating,
                })
            })
            .collect();
        Self::from_records(&records)
    }

    pub fn rating_count(&self) -> usize {
        self.ratings.iter().flatten().filter(|r| r.is_some()).count()
    }

    pub fn missing(&self) -> usize {
        self.judges.len() * self.passages.len() - self.rating_count()
    }

    fn column(&self, p: usize) -> impl Iterator<Item = f64> + '_ {
        self.ratings.iter().filter_map(move |row| row[p])
    }

    /// Mean rating per passage over the judges who rated it.
    pub fn passage_means(&self) -> Vec<Option<f64>> {
        (0..self.passages.len())
            .map(|p| {
                let v: Vec<f64> = self.column(p).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect()
    }

    /// Applies `a * r + b` to every rating without range checks.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        let mut out = self.clone();
        for r in out.ratings.iter_mut().flatten().flatten() {
            *r = a * *r + b;
        }
        out
    }
}

/// Reads a TSV with the header `judge\tpassage\trating`. Row numbers in
/// errors count data rows from 1.
pub fn read_ratings(reader: impl BufRead) -> Result<RatingMatrix> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io("<ratings>", e))?
        .ok_or_else(|| Error::Parse { line: 1, message: "empty ratings file".into() })?;
    let cols: Vec<&str> = header.trim_end().split('\t').collect();
    if cols != ["judge", "passage", "rating"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header judge/passage/rating, got {header:?}"),
        });
    }
    let mut records = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io("<ratings>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim_end().split('\t').collect();
        let bad = |m: String| Error::Parse { line: k + 2, message: m };
        if f.len() != 3 {
            return Err(bad(format!("expected 3 fields, got {}", f.len())));
        }
        let rating: f64 = f[2].trim().parse().map_err(|_| bad(format!("bad rating {:?}", f[2])))?;
        if !(RATING_MIN..=RATING_MAX).contains(&rating) {
            return Err(Error::RatingOutOfRange { row: k + 1, rating });
        }
        records.push(RatingRecord {
            judge: f[0].into(),
            passage: f[1].into(),
            rating,
        });
    }
    RatingMatrix::from_records(&records)
}

pub fn load_ratings(path: impl AsRef<Path>) -> Result<RatingMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ratings(std::io::BufReader::new(file))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample Pearson correlation; `None` if either side has zero variance or
/// fewer than 2 points.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value of `r` over `n` points from the t-transform with
/// `n - 2` degrees of freedom.
pub fn pearson_p_value(r: f64, n: usize) -> Option<f64> {
    if n < 3 || !r.is_finite() {
        return None;
    }
    if r.abs() >= 1.0 {
        return Some(0.0);
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some(2.0 * (1.0 - dist.cdf(t.abs())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeCorrelation {
    pub judge: String,
    /// Passages used: rated by this judge and at least one other.
    pub n: usize,
    /// `None` when undefined (too few passages or zero variance).
    pub r: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearsonReport {
    pub leave_one_out: bool,
    pub per_judge: Vec<JudgeCorrelation>,
    /// Mean of the defined per-judge values.
    pub mean_r: Option<f64>,
    pub undefined: usize,
}

/// Correlates each judge with the per-passage mean over judges, including
/// that judge unless `leave_one_out`.
pub fn interrater_pearson(m: &RatingMatrix, leave_one_out: bool) -> Result<PearsonReport> {
    if m.judges.len() < 2 {
        return Err(Error::Precondition("agreement needs at least 2 judges".into()));
    }
    let mut per_judge = Vec::with_capacity(m.judges.len());
    for (j, name) in m.judges.iter().enumerate() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for p in 0..m.passages.len() {
            let Some(own) = m.ratings[j][p] else { continue };
            let others: Vec<f64> = (0..m.judges.len())
                .filter(|&k| k != j)
                .filter_map(|k| m.ratings[k][p])
                .collect();
            if others.is_empty() {
                continue;
            }
            let avg = if leave_one_out {
                mean(&others)
            } else {
                (own + others.iter().sum::<f64>()) / (others.len() + 1) as f64
            };
            x.push(own);
            y.push(avg);
        }
        let r = if x.len() >= 3 { pearson(&x, &y) } else { None };
        per_judge.push(JudgeCorrelation {
            judge: name.clone(),
            n: x.len(),
            r,
            p_value: r.and_then(|r| pearson_p_value(r, x.len())),
        });
    }
    let defined: Vec<f64> = per_judge.iter().filter_map(|c| c.r).collect();
    if per_judge.iter().all(|c| c.n < 3) {
        return Err(Error::Precondition("fewer than 3 commonly rated passages".into()));
    }
    Ok(PearsonReport {
        leave_one_out,
        mean_r: (!defined.is_empty()).then(|| mean(&defined)),
        undefined: per_judge.len() - defined.len(),
        per_judge,
    })
}

/// Krippendorff's alpha with the interval metric `(v - w)^2`. Only passages
/// with at least two ratings are pairable; missing cells are skipped.
pub fn krippendorff_alpha(m: &RatingMatrix) -> Result<f64> {
    // Over ordered pairs i != j, sum (v_i - v_j)^2 = 2 m sum (v_i - mean)^2;
    // the centered form avoids cancellation when ratings share a large offset.
    let centered = |v: &[f64]| {
        let mu = mean(v);
        2.0 * v.len() as f64 * v.iter().map(|x| (x - mu).powi(2)).sum::<f64>()
    };
    let units: Vec<Vec<f64>> = (0..m.passages.len())
        .map(|p| m.column(p).collect::<Vec<f64>>())
        .filter(|v| v.len() >= 2)
        .collect();
    let pooled: Vec<f64> = units.iter().flatten().copied().collect();
    if pooled.is_empty() {
        return Err(Error::Undefined("alpha needs a passage rated by at least 2 judges".into()));
    }
    if pooled.iter().all(|&v| v == pooled[0]) {
        return Err(Error::Undefined("alpha is undefined when all pairable ratings are equal".into()));
    }
    let n = pooled.len() as f64;
    let d_o = units.iter().map(|v| centered(v) / (v.len() as f64 - 1.0)).sum::<f64>() / n;
    let d_e = centered(&pooled) / (n * (n - 1.0));
    Ok(1.0 - d_o / d_e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub judges: usize,
    pub passages: usize,
    pub ratings: usize,
    pub missing: usize,
    pub pearson: PearsonReport,
    pub pearson_leave_one_out: PearsonReport,
    pub alpha: Option<f64>,
}

pub fn agreement(m: &RatingMatrix) -> Result<AgreementReport> {
    Ok(AgreementReport {
        judges: m.judges.len(),
        passages: m.passages.len(),
        ratings: m.rating_count(),
        missing: m.missing(),
        pearson: interrater_pearson(m, false)?,
        pearson_leave_one_out: interrater_pearson(m, true)?,
        alpha: krippendorff_alpha(m).ok(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Simple least squares of `ratings` on `metric` with an intercept.
pub fn regress_metric(metric: &[f64], ratings: &[f64]) -> Result<Regression> {
    if metric.len() != ratings.len() {
        return Err(Error::LengthMismatch {
            predicted: metric.len(),
            gold: ratings.len(),
        });
    }
    if metric.len() < 3 {
        return Err(Error::Precondition("regression needs at least 3 passages".into()));
    }
    let (mx, my) = (mean(metric), mean(ratings));
    let sxx: f64 = metric.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ratings.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Undefined("metric has zero variance".into()));
    }
    if syy == 0.0 {
        return Err(Error::Undefined("ratings have zero variance, R^2 is undefined".into()));
    }
    let sxy: f64 = metric.iter().zip(ratings).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = metric
        .iter()
        .zip(ratings)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(Regression {
        slope,
        intercept,
        r_squared: (1.0 - ss_res / syy).clamp(0.0, 1.0),
        n: metric.len(),
    })
}
