//! Distribution distance and spread over feature-vector sets.

use crate::error::{Error, Result};
use crate::numerics::linalg::{jacobi_eigh, matmul};

const COV_REGULARIZER: f64 = 1e-6;

fn check_set(set: &[Vec<f64>], label: &str) -> Result<usize> {
    if set.len() < 2 {
        return Err(Error::MetricInput(format!(
            "{label} needs at least 2 feature vectors, got {}",
            set.len()
        )));
    }
    let dim = set[0].len();
    if dim == 0 {
        return Err(Error::MetricInput(format!("{label} has zero-dim vectors")));
    }
    for (i, v) in set.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::MetricInput(format!(
                "{label} vector {i} has dim {}, expected {dim}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::MetricInput(format!("{label} vector {i} is not finite")));
        }
    }
    Ok(dim)
}

fn mean(set: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut mu = vec![0.0; dim];
    for v in set {
        for (m, x) in mu.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mu {
        *m /= set.len() as f64;
    }
    mu
}

/// Unbiased sample covariance plus a small ridge that keeps tiny sets (40
/// samples in 72 dims) away from exact singularity.
fn covariance(set: &[Vec<f64>], mu: &[f64], dim: usize) -> Vec<f64> {
    let mut cov = vec![0.0; dim * dim];
    for v in set {
        for i in 0..dim {
            let di = v[i] - mu[i];
            for j in i..dim {
                cov[i * dim + j] += di * (v[j] - mu[j]);
            }
        }
    }
    let norm = (set.len() - 1) as f64;
    for i in 0..dim {
        for j in i..dim {
            let val = cov[i * dim + j] / norm;
            cov[i * dim + j] = val;
            cov[j * dim + i] = val;
        }
    }
    for i in 0..dim {
        cov[i * dim + i] += COV_REGULARIZER;
    }
    cov
}

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// from roundoff are clamped to zero.
fn sqrtm_psd(dim: usize, m: &[f64]) -> Vec<f64> {
    let (w, v) = jacobi_eigh(dim, m);
    let roots: Vec<f64> = w.iter().map(|&x| x.max(0.0).sqrt()).collect();
    let mut out = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let s: f64 = (0..dim).map(|k| v[i * dim + k] * roots[k] * v[j * dim + k]).sum();
            out[i * dim + j] = s;
            out[j * dim + i] = s;
        }
    }
    out
}

fn trace(dim: usize, m: &[f64]) -> f64 {
    (0..dim).map(|i| m[i * dim + i]).sum()
}

/// Fréchet distance between Gaussian fits of the two sets:
/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2).
/// The symmetrized inner product keeps the result real and (up to roundoff)
/// symmetric in its arguments.
pub fn frechet_distance(set_a: &[Vec<f64>], set_b: &[Vec<f64>]) -> Result<f64> {
    let dim = check_set(set_a, "set_a")?;
    let dim_b = check_set(set_b, "set_b")?;
    if dim != dim_b {
        return Err(Error::MetricInput(format!(
            "feature dims differ: {dim} vs {dim_b}"
        )));
    }
    let mu_a = mean(set_a, dim);
    let mu_b = mean(set_b, dim);
    let cov_a = covariance(set_a, &mu_a, dim);
    let cov_b = covariance(set_b, &mu_b, dim);

    let root_a = sqrtm_psd(dim, &cov_a);
    let tmp = matmul(dim, dim, dim, &root_a, false, &cov_b, false);
    let mut inner = matmul(dim, dim, dim, &tmp, false, &root_a, false);
    // Symmetrize away the roundoff asymmetry before taking the square root.
    for i in 0..dim {
        for j in (i + 1)..dim {
            let s = 0.5 * (inner[i * dim + j] + inner[j * dim + i]);
            inner[i * dim + j] = s;
            inner[j * dim + i] = s;
        }
    }
    let (w, _) = jacobi_eigh(dim, &inner);
    let trace_root: f64 = w.iter().map(|&x| x.max(0.0).sqrt()).sum();

    let mean_term: f64 = mu_a
        .iter()
        .zip(&mu_b)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let fid = mean_term + trace(dim, &cov_a) + trace(dim, &cov_b) - 2.0 * trace_root;
    Ok(fid.max(0.0))
}

/// Mean Euclidean distance over all unordered pairs.
pub fn diversity(set: &[Vec<f64>]) -> Result<f64> {
    let dim = check_set(set, "set")?;
    let n = set.len();
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = (0..dim)
                .map(|k| (set[i][k] - set[j][k]) * (set[i][k] - set[j][k]))
                .sum();
            sum += d.sqrt();
        }
    }
    Ok(sum / (n * (n - 1) / 2) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{rng_from_seed, standard_normal};

    fn gaussian_set(n: usize, dim: usize, mean: f64, std: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| mean + std * standard_normal(&mut rng)).collect())
            .collect()
    }

    #[test]
    fn identical_sets_have_zero_distance() {
        let a = gaussian_set(40, 33, 0.3, 1.0, 1);
        let d = frechet_distance(&a, &a).unwrap();
        assert!(d.abs() < 1e-6, "{d}");
    }

    #[test]
    fn one_dimensional_gaussians_match_the_closed_form() {
        // FID between N(0,1) and N(1,1) fits is (0-1)^2 + (s_a - s_b)^2 ~ 1.
        let a = gaussian_set(4000, 1, 0.0, 1.0, 2);
        let b = gaussian_set(4000, 1, 1.0, 1.0, 3);
        let d = frechet_distance(&a, &b).unwrap();
        assert!((d - 1.0).abs() < 0.1, "{d}");
    }

    #[test]
    fn translating_a_copy_shifts_by_squared_norm() {
        let a = gaussian_set(40, 5, 0.0, 1.0, 4);
        let shift = [0.3, -0.2, 0.5, 0.0, 1.0];
        let b: Vec<Vec<f64>> = a
            .iter()
            .map(|v| v.iter().zip(&shift).map(|(x, s)| x + s).collect())
            .collect();
        let d = frechet_distance(&a, &b).unwrap();
        let norm2: f64 = shift.iter().map(|s| s * s).sum();
        assert!((d - norm2).abs() < 1e-6, "{d} vs {norm2}");
    }

    #[test]
    fn distance_is_symmetric() {
        let a = gaussian_set(30, 8, 0.0, 1.0, 5);
        let b = gaussian_set(25, 8, 0.4, 1.5, 6);
        let ab = frechet_distance(&a, &b).unwrap();
        let ba = frechet_distance(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-6, "{ab} vs {ba}");
        assert!(ab > 0.0);
    }

    #[test]
    fn degenerate_inputs_are_metric_errors() {
        let a = gaussian_set(10, 3, 0.0, 1.0, 7);
        assert!(frechet_distance(&a[..1], &a).is_err());
        let b = gaussian_set(10, 4, 0.0, 1.0, 8);
        let err = frechet_distance(&a, &b).unwrap_err();
        assert!(err.to_string().contains("dims differ"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn singular_covariances_still_work() {
        // Constant sets: covariance is exactly zero before regularization.
        let a = vec![vec![1.0, 2.0]; 10];
        let b = vec![vec![1.0, 5.0]; 12];
        let d = frechet_distance(&a, &b).unwrap();
        assert!((d - 9.0).abs() < 1e-6, "{d}");
    }

    #[test]
    fn diversity_enumerates_unordered_pairs() {
        assert_eq!(diversity(&vec![vec![1.0, 0.0]; 6]).unwrap(), 0.0);
        let two = vec![vec![0.0, 0.0], vec![3.0, 4.0]];
        assert_eq!(diversity(&two).unwrap(), 5.0);
        let three = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert!((diversity(&three).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert!(diversity(&two[..1]).is_err());
    }
}
