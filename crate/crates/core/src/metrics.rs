//! Ordering metrics: perfect match ratio, positional accuracy, Kendall's tau
//! and the length-adapted weighted LCS F-measure (WLCS-l).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A permutation of `0..n`, read as "the item placed at position t".
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Order(Vec<usize>);

impl Order {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::NotPermutation(perm));
            }
        }
        if n < 2 {
            return Err(Error::Precondition(format!(
                "orders need at least 2 items, got {n}"
            )));
        }
        Ok(Order(perm))
    }

    pub fn identity(n: usize) -> Self {
        Order((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn reversed(&self) -> Self {
        Order(self.0.iter().rev().copied().collect())
    }

    /// `pos[item] = position of item`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (t, &item) in self.0.iter().enumerate() {
            pos[item] = t;
        }
        pos
    }
}

impl TryFrom<Vec<usize>> for Order {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Order::new(v)
    }
}

impl From<Order> for Vec<usize> {
    fn from(o: Order) -> Self {
        o.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub id: String,
    pub predicted: Order,
    pub gold: Order,
}

impl EvalPair {
    pub fn new(id: impl Into<String>, predicted: Order, gold: Order) -> Result<Self> {
        if predicted.len() != gold.len() {
            return Err(Error::LengthMismatch {
                predicted: predicted.len(),
                gold: gold.len(),
            });
        }
        Ok(EvalPair {
            id: id.into(),
            predicted,
            gold,
        })
    }

    pub fn n(&self) -> usize {
        self.gold.len()
    }

    pub fn is_exact(&self) -> bool {
        self.predicted == self.gold
    }
}

fn check_lengths(pred: &Order, gold: &Order) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            predicted: pred.len(),
            gold: gold.len(),
        });
    }
    Ok(())
}

/// Fraction of positions holding the gold item.
pub fn accuracy(pred: &Order, gold: &Order) -> Result<f64> {
    check_lengths(pred, gold)?;
    let hits = pred
        .as_slice()
        .iter()
        .zip(gold.as_slice())
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Number of item pairs whose relative order in `pred` disagrees with `gold`.
pub fn inversions(pred: &Order, gold: &Order) -> Result<u64> {
    check_lengths(pred, gold)?;
    let gold_pos = gold.positions();
    let mut seq: Vec<usize> = pred.as_slice().iter().map(|&i| gold_pos[i]).collect();
    let mut buf = vec![0; seq.len()];
    Ok(merge_count(&mut seq, &mut buf))
}

fn merge_count(v: &mut [usize], buf: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            count += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    let k = k + mid - i;
    buf[k..n].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}

/// `1 - 2 * inversions / C(n, 2)`.
pub fn kendall_tau(pred: &Order, gold: &Order) -> Result<f64> {
    let inv = inversions(pred, gold)?;
    let n = gold.len() as u64;
    if n < 2 {
        return Err(Error::Precondition("kendall tau needs n >= 2".into()));
    }
    let pairs = n * (n - 1) / 2;
    Ok(1.0 - 2.0 * inv as f64 / pairs as f64)
}

/// Fraction of pairs whose prediction equals the gold order exactly.
pub fn pmr(pairs: &[EvalPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Precondition("pmr over an empty batch".into()));
    }
    let exact = pairs.iter().filter(|p| p.is_exact()).count();
    Ok(exact as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WlcsParams {
    /// Exponent of the run weight `f(k) = k^weight_exponent`; must exceed 1.
    pub weight_exponent: f64,
    /// The F-measure's recall/precision balance.
    pub f_alpha: f64,
}

impl Default for WlcsParams {
    fn default() -> Self {
        WlcsParams {
            weight_exponent: 1.2,
            f_alpha: 0.5,
        }
    }
}

impl WlcsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.weight_exponent > 1.0) || !(self.f_alpha >= 0.0) {
            return Err(Error::Config(format!(
                "need weight_exponent > 1 and f_alpha >= 0, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn weight(&self, k: f64) -> f64 {
        k.powf(self.weight_exponent)
    }

    pub fn inverse_weight(&self, x: f64) -> f64 {
        x.powf(1.0 / self.weight_exponent)
    }
}

/// Weighted LCS score: consecutive runs of length `k` earn `k^weight_exponent`.
///
/// Standard ROUGE-W table fill. `c` holds the best score of the prefixes and
/// `w` the length of the run ending at the cell.
pub fn wlcs(pred: &Order, gold: &Order, weight_exponent: f64) -> Result<f64> {
    check_lengths(pred, gold)?;
    let (x, y) = (gold.as_slice(), pred.as_slice());
    let (m, n) = (x.len(), y.len());
    let f = |k: usize| (k as f64).powf(weight_exponent);
    let mut c = vec![vec![0.0f64; n + 1]; m + 1];
    let mut w = vec![vec![0usize; n + 1]; m + 1];
    for i in 1..=m {
        for j in 1..=n {
            if x[i - 1] == y[j - 1] {
                let k = w[i - 1][j - 1];
                c[i][j] = c[i - 1][j - 1] + f(k + 1) - f(k);
                w[i][j] = k + 1;
            } else if c[i - 1][j] > c[i][j - 1] {
                c[i][j] = c[i - 1][j];
            } else {
                c[i][j] = c[i][j - 1];
            }
        }
    }
    Ok(c[m][n])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WlcsL {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// Length-adapted WLCS. Precision normalizes by `f(n)`, recall by `f(n)^2`,
/// both mapped back through `f^-1`, combined by the weighted F-measure.
pub fn wlcs_l(pred: &Order, gold: &Order, params: &WlcsParams) -> Result<WlcsL> {
    params.validate()?;
    let score = wlcs(pred, gold, params.weight_exponent)?;
    let fn_ = params.weight(gold.len() as f64);
    let precision = params.inverse_weight(score / fn_);
    let recall = params.inverse_weight(score / (fn_ * fn_));
    let a2 = params.f_alpha * params.f_alpha;
    let f = (1.0 + a2) * recall * precision / (recall + a2 * precision);
    Ok(WlcsL {
        precision,
        recall,
        f,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentMetrics {
    pub id: String,
    pub n: usize,
    pub exact: bool,
    pub acc: f64,
    pub tau: f64,
    pub wlcs_p: f64,
    pub wlcs_r: f64,
    pub wlcs_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMetrics {
    pub pmr: f64,
    /// Macro average over documents.
    pub mean_acc: f64,
    /// Correct positions over all positions in the batch.
    pub micro_acc: f64,
    pub mean_tau: f64,
    pub mean_wlcs_p: f64,
    pub mean_wlcs_r: f64,
    pub mean_wlcs_f: f64,
    #[serde(rename = "K")]
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub params: WlcsParams,
    pub per_document: Vec<DocumentMetrics>,
    pub corpus: CorpusMetrics,
}

pub fn evaluate_pair(pair: &EvalPair, params: &WlcsParams) -> Result<DocumentMetrics> {
    let w = wlcs_l(&pair.predicted, &pair.gold, params)?;
    Ok(DocumentMetrics {
        id: pair.id.clone(),
        n: pair.n(),
        exact: pair.is_exact(),
        acc: accuracy(&pair.predicted, &pair.gold)?,
        tau: kendall_tau(&pair.predicted, &pair.gold)?,
        wlcs_p: w.precision,
        wlcs_r: w.recall,
        wlcs_f: w.f,
    })
}

pub fn aggregate(pairs: &[EvalPair], params: &WlcsParams) -> Result<MetricReport> {
    let pmr = pmr(pairs)?;
    let per_document = pairs
        .iter()
        .map(|p| evaluate_pair(p, params))
        .collect::<Result<Vec<_>>>()?;
    let k = per_document.len();
    let mean = |f: fn(&DocumentMetrics) -> f64| per_document.iter().map(f).sum::<f64>() / k as f64;
    let positions: usize = per_document.iter().map(|d| d.n).sum();
    let correct: f64 = per_document.iter().map(|d| d.acc * d.n as f64).sum();
    let corpus = CorpusMetrics {
        pmr,
        mean_acc: mean(|d| d.acc),
        micro_acc: (correct / positions as f64).clamp(0.0, 1.0),
        mean_tau: mean(|d| d.tau),
        mean_wlcs_p: mean(|d| d.wlcs_p),
        mean_wlcs_r: mean(|d| d.wlcs_r),
        mean_wlcs_f: mean(|d| d.wlcs_f),
        k,
    };
    Ok(MetricReport {
        params: *params,
        per_document,
        corpus,
    })
}

impl MetricReport {
    /// One-row table in the column order `pmr, wlcs-l, acc, tau, K`.
    pub fn to_tsv(&self, dataset: &str) -> String {
        let c = &self.corpus;
        format!(
            "dataset\tpmr\twlcs-l\tacc\ttau\tK\n{dataset}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
            c.pmr, c.mean_wlcs_f, c.mean_acc, c.mean_tau, c.k
        )
    }
}
