use rand::seq::index;

use super::{Graph, NodeId, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

/// Smallest denominator in the relative error, so coordinates whose true
/// gradient is zero are compared absolutely.
const REL_FLOOR: f64 = 1e-6;

/// Compares backward against central differences, perturbing coordinates of
/// `params` in place (each is restored afterwards). With `sample =
/// Some((k, seed))` only `k` coordinates chosen uniformly are checked.
pub fn grad_check<F>(
    params: &mut ParamStore,
    build: F,
    eps: f64,
    sample: Option<(usize, u64)>,
) -> Result<GradCheckReport>
where
    F: for<'a> Fn(&mut Graph<'a>) -> Result<NodeId>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Precondition(format!("epsilon {eps} outside [1e-7, 1e-3]")));
    }
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(store);
        let loss = build(&mut g)?;
        Ok(g.value(loss).item())
    };
    let analytic = {
        let mut g = Graph::new(params);
        let loss = build(&mut g)?;
        g.backward(loss)?
    };

    let coords: Vec<(ParamId, usize)> = params
        .ids()
        .flat_map(|id| (0..params.get(id).len()).map(move |k| (id, k)))
        .collect();
    let chosen: Vec<(ParamId, usize)> = match sample {
        Some((k, seed)) if k < coords.len() => {
            let mut picks = index::sample(&mut rng_from_seed(seed), coords.len(), k).into_vec();
            picks.sort_unstable();
            picks.into_iter().map(|i| coords[i]).collect()
        }
        _ => coords,
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coords_checked: chosen.len(),
        worst: None,
    };
    for (id, k) in chosen {
        let orig = params.get(id).data()[k];
        params.get_mut(id).data_mut()[k] = orig + eps;
        let plus = eval(params);
        params.get_mut(id).data_mut()[k] = orig - eps;
        let minus = eval(params);
        params.get_mut(id).data_mut()[k] = orig;
        let numeric = (plus? - minus?) / (2.0 * eps);
        let a = analytic.get(id).data()[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        if rel > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(rel);
            report.worst = Some((params.name(id).to_string(), k));
        }
    }
    Ok(report)
}
