//! Finite-difference verification of analytic gradients.

use rand::Rng;

use crate::error::Result;
use crate::numerics::rng::rng_from_seed;
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub coords_checked: usize,
    /// (parameter name, max relative error over its sampled coordinates)
    pub per_param: Vec<(String, f64)>,
}

/// Relative error with a small absolute floor so near-zero gradients do not
/// blow up the ratio.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Compares `analytic` gradients of a deterministic scalar `loss` against
/// central finite differences (loss(p+h) - loss(p-h)) / 2h on a seeded random
/// subset of at least `min_coords` coordinates spread over all parameters.
pub fn grad_check<F>(
    mut loss: F,
    params: &[Tensor],
    names: &[String],
    analytic: &[Vec<f64>],
    h: f64,
    min_coords: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    assert!(h > 0.0, "grad_check: h must be positive");
    assert_eq!(params.len(), analytic.len());
    let total: usize = params.iter().map(|p| p.numel()).sum();
    let mut rng = rng_from_seed(seed);

    // Sample coordinates proportionally per parameter, at least one each,
    // topping up until the global minimum is met.
    let mut picks: Vec<(usize, usize)> = Vec::new();
    let want = min_coords.min(total).max(params.len().min(total));
    for (pi, p) in params.iter().enumerate() {
        if p.numel() == 0 {
            continue;
        }
        let share = ((want * p.numel()) / total).max(1).min(p.numel());
        let mut seen = std::collections::HashSet::new();
        while seen.len() < share {
            seen.insert(rng.gen_range(0..p.numel()));
        }
        picks.extend(seen.into_iter().map(|c| (pi, c)));
    }
    while picks.len() < want {
        let pi = rng.gen_range(0..params.len());
        if params[pi].numel() == 0 {
            continue;
        }
        picks.push((pi, rng.gen_range(0..params[pi].numel())));
    }
    picks.sort_unstable();
    picks.dedup();

    let mut work: Vec<Tensor> = params.to_vec();
    let mut per_param: Vec<(String, f64)> = names.iter().map(|n| (n.clone(), 0.0)).collect();
    let mut max_rel = 0.0;
    for &(pi, ci) in &picks {
        let orig = work[pi].data()[ci];
        work[pi].data_mut()[ci] = orig + h;
        let lp = loss(&work)?;
        work[pi].data_mut()[ci] = orig - h;
        let lm = loss(&work)?;
        work[pi].data_mut()[ci] = orig;
        let numeric = (lp - lm) / (2.0 * h);
        let e = rel_err(analytic[pi][ci], numeric);
        if e > per_param[pi].1 {
            per_param[pi].1 = e;
        }
        if e > max_rel {
            max_rel = e;
        }
    }
    Ok(GradCheckReport {
        max_rel_err: max_rel,
        coords_checked: picks.len(),
        per_param,
    })
}
