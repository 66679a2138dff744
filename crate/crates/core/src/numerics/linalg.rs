//! Matrix kernels: gemm over row-major buffers and a Jacobi eigensolver for
//! symmetric matrices (covariance square roots, rotation projection).

/// C = beta*C + op(A)*op(B) for row-major buffers.
///
/// `a` holds an (m,k) matrix when `ta` is false, else a (k,m) matrix read as
/// its transpose; `b` likewise with (k,n)/(n,k). Single-threaded and
/// deterministic for fixed inputs.
pub fn gemm(
    c: &mut [f64],
    beta: f64,
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
) {
    assert_eq!(c.len(), m * n, "gemm: C buffer length");
    assert_eq!(a.len(), m * k, "gemm: A buffer length");
    assert_eq!(b.len(), k * n, "gemm: B buffer length");
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Fresh C = op(A)*op(B).
pub fn matmul(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    gemm(&mut c, 0.0, m, k, n, a, ta, b, tb);
    c
}

/// Eigendecomposition of a symmetric n x n matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and eigenvectors as columns of a
/// row-major n x n matrix: A = V diag(w) V^T.
pub fn jacobi_eigh(n: usize, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n, "jacobi_eigh: matrix buffer length");
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n <= 1 {
        return (m, v);
    }

    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * norm;
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q].abs();
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= tol / (n * n) as f64 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                // Smaller-angle root keeps the rotation stable.
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let mip = m[i * n + p];
                    let miq = m[i * n + q];
                    m[i * n + p] = c * mip - s * miq;
                    m[i * n + q] = s * mip + c * miq;
                }
                for j in 0..n {
                    let mpj = m[p * n + j];
                    let mqj = m[q * n + j];
                    m[p * n + j] = c * mpj - s * mqj;
                    m[q * n + j] = s * mpj + c * mqj;
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| m[i * n + i].partial_cmp(&m[j * n + j]).unwrap());
    let w: Vec<f64> = idx.iter().map(|&i| m[i * n + i]).collect();
    let mut vs = vec![0.0; n * n];
    for (new_col, &old_col) in idx.iter().enumerate() {
        for r in 0..n {
            vs[r * n + new_col] = v[r * n + old_col];
        }
    }
    (w, vs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn gemm_matches_hand_product() {
        // A (2x3) * B (3x2)
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [7.0, 8.0, 9.0, 10.0, 11.0, 12.0];
        let c = matmul(2, 3, 2, &a, false, &b, false);
        assert_eq!(c, vec![58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn gemm_transpose_flags() {
        let a = [1.0, 2.0, 3.0, 4.0]; // 2x2
        let b = [5.0, 6.0, 7.0, 8.0]; // 2x2
        // A^T * B
        let c = matmul(2, 2, 2, &a, true, &b, false);
        assert_eq!(c, vec![26.0, 30.0, 38.0, 44.0]);
        // A * B^T
        let c = matmul(2, 2, 2, &a, false, &b, true);
        assert_eq!(c, vec![17.0, 23.0, 39.0, 53.0]);
    }

    #[test]
    fn gemm_accumulates_with_beta_one() {
        let a = [1.0, 0.0, 0.0, 1.0];
        let b = [2.0, 3.0, 4.0, 5.0];
        let mut c = vec![1.0, 1.0, 1.0, 1.0];
        gemm(&mut c, 1.0, 2, 2, 2, &a, false, &b, false);
        assert_eq!(c, vec![3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // diag(1,2,3) rotated by a known orthogonal matrix keeps eigenvalues.
        let m = [2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0];
        let (w, _) = jacobi_eigh(3, &m);
        // Analytic eigenvalues of this tridiagonal matrix: 2 - sqrt(2), 2, 2 + sqrt(2).
        let expect = [2.0 - 2f64.sqrt(), 2.0, 2.0 + 2f64.sqrt()];
        for (got, want) in w.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric_matrices() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for n in [1usize, 2, 5, 12] {
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..=i {
                    let x = rng.gen_range(-1.0..1.0);
                    a[i * n + j] = x;
                    a[j * n + i] = x;
                }
            }
            let (w, v) = jacobi_eigh(n, &a);
            // Check A v_i = w_i v_i columnwise.
            for col in 0..n {
                for r in 0..n {
                    let av: f64 = (0..n).map(|k| a[r * n + k] * v[k * n + col]).sum();
                    assert!((av - w[col] * v[r * n + col]).abs() < 1e-9, "n={n} col={col}");
                }
            }
            // Eigenvectors orthonormal.
            for c1 in 0..n {
                for c2 in 0..n {
                    let dot: f64 = (0..n).map(|r| v[r * n + c1] * v[r * n + c2]).sum();
                    let want = if c1 == c2 { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-10);
                }
            }
            // Ascending order.
            for i in 1..n {
                assert!(w[i] >= w[i - 1]);
            }
        }
    }
}
