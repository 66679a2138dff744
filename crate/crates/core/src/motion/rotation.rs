//! 3x3 rotation helpers: Rodrigues construction and projection of arbitrary
//! matrices onto the nearest rotation.

use crate::error::{Error, Result};
use crate::numerics::linalg::jacobi_eigh;

pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

pub fn mat3_transpose(a: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn mat3_det(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

pub fn mat3_apply(a: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

/// Max absolute entry of R*R^T - I; zero for perfectly orthonormal R.
pub fn orthonormality_defect(r: &Mat3) -> f64 {
    let g = mat3_mul(r, &mat3_transpose(r));
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[i][j] - want).abs());
        }
    }
    worst
}

/// Rodrigues formula; the zero vector maps to the identity.
pub fn axis_angle_to_matrix(aa: &[f64; 3]) -> Mat3 {
    let theta = (aa[0] * aa[0] + aa[1] * aa[1] + aa[2] * aa[2]).sqrt();
    if theta == 0.0 {
        return IDENTITY;
    }
    let (x, y, z) = (aa[0] / theta, aa[1] / theta, aa[2] / theta);
    let c = theta.cos();
    let s = theta.sin();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

/// Tolerance under which a matrix counts as already orthonormal and is
/// returned unchanged, making the projection exactly idempotent and keeping
/// encode/decode of valid poses bit-identical.
pub const ORTHONORMAL_SHORTCUT_TOL: f64 = 1e-9;

/// Nearest rotation matrix in the Frobenius sense (orthogonal polar factor),
/// with det forced to +1 by flipping the weakest singular direction.
pub fn orthonormalize(r: &Mat3) -> Result<Mat3> {
    if orthonormality_defect(r) <= ORTHONORMAL_SHORTCUT_TOL && mat3_det(r) > 0.0 {
        return Ok(*r);
    }

    // R^T R = V diag(w) V^T with w ascending; singular values are sqrt(w).
    let mut m = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            m[i * 3 + j] = (0..3).map(|k| r[k][i] * r[k][j]).sum();
        }
    }
    let (w, v) = jacobi_eigh(3, &m);
    let w = [w[0].max(0.0), w[1].max(0.0), w[2].max(0.0)];
    if w[2] <= 0.0 || w[0] <= 1e-20 * w[2] {
        return Err(Error::DegenerateRotation(format!(
            "rank-deficient matrix: squared singular values {:?}",
            w
        )));
    }

    // U = R V diag(1/sigma); nearest det+1 rotation is U diag(d,1,1) V^T with
    // the sign flip on the smallest singular value (ascending index 0).
    let d = if mat3_det(r) < 0.0 { -1.0 } else { 1.0 };
    let inv_sigma = [d / w[0].sqrt(), 1.0 / w[1].sqrt(), 1.0 / w[2].sqrt()];
    // rot = R * (V diag(inv_sigma) V^T)
    let mut p = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            p[i][j] = (0..3).map(|k| v[i * 3 + k] * inv_sigma[k] * v[j * 3 + k]).sum();
        }
    }
    let mut rot = mat3_mul(r, &p);
    // Ill-conditioned inputs leave the projection orthonormal only to about
    // sqrt(condition) * eps; Newton steps Q <- Q(3I - Q^T Q)/2 restore machine
    // precision without moving off the polar factor.
    for _ in 0..4 {
        if orthonormality_defect(&rot) <= 1e-14 {
            break;
        }
        let mut gram = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                gram[i][j] = (0..3).map(|k| rot[k][i] * rot[k][j]).sum();
            }
        }
        let mut half = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let eye = if i == j { 3.0 } else { 0.0 };
                half[i][j] = 0.5 * (eye - gram[i][j]);
            }
        }
        rot = mat3_mul(&rot, &half);
    }
    debug_assert!(orthonormality_defect(&rot) < 1e-8);
    debug_assert!(mat3_det(&rot) > 0.0);
    Ok(rot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::rng_from_seed;
    use rand::Rng;
    use std::f64::consts::PI;

    fn random_rotation(rng: &mut rand_chacha::ChaCha20Rng) -> Mat3 {
        let aa = [
            rng.gen_range(-PI..PI),
            rng.gen_range(-PI..PI),
            rng.gen_range(-PI..PI),
        ];
        axis_angle_to_matrix(&aa)
    }

    #[test]
    fn rodrigues_zero_is_identity() {
        assert_eq!(axis_angle_to_matrix(&[0.0, 0.0, 0.0]), IDENTITY);
    }

    #[test]
    fn rodrigues_quarter_turn_about_z() {
        let r = axis_angle_to_matrix(&[0.0, 0.0, PI / 2.0]);
        let want = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((r[i][j] - want[i][j]).abs() < 1e-9, "({i},{j})");
            }
        }
    }

    #[test]
    fn rodrigues_full_turn_is_identity() {
        let axis = [1.0f64, 2.0, -0.5];
        let norm = (axis.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let aa = [
            axis[0] / norm * 2.0 * PI,
            axis[1] / norm * 2.0 * PI,
            axis[2] / norm * 2.0 * PI,
        ];
        let r = axis_angle_to_matrix(&aa);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((r[i][j] - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn orthonormalize_identity_and_scale() {
        assert_eq!(orthonormalize(&IDENTITY).unwrap(), IDENTITY);
        let scaled = [[1.1, 0.0, 0.0], [0.0, 1.1, 0.0], [0.0, 0.0, 1.1]];
        let r = orthonormalize(&scaled).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((r[i][j] - want).abs() < 1e-12, "({i},{j}) = {}", r[i][j]);
            }
        }
    }

    #[test]
    fn orthonormalize_projects_perturbed_rotations() {
        let mut rng = rng_from_seed(42);
        for _ in 0..100 {
            let mut r = random_rotation(&mut rng);
            for row in r.iter_mut() {
                for v in row.iter_mut() {
                    *v += rng.gen_range(-0.2..0.2);
                }
            }
            let q = orthonormalize(&r).unwrap();
            assert!(orthonormality_defect(&q) <= 1e-9, "defect {}", orthonormality_defect(&q));
            assert!((mat3_det(&q) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn orthonormalize_is_bitwise_idempotent_on_rotations() {
        let mut rng = rng_from_seed(9);
        for _ in 0..50 {
            let r = random_rotation(&mut rng);
            let once = orthonormalize(&r).unwrap();
            let twice = orthonormalize(&once).unwrap();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn orthonormalize_fixes_reflections() {
        // det -1 input must come back as a det +1 rotation.
        let refl = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let q = orthonormalize(&refl).unwrap();
        assert!((mat3_det(&q) - 1.0).abs() < 1e-9);
        assert!(orthonormality_defect(&q) < 1e-9);
    }

    #[test]
    fn orthonormalize_rejects_rank_deficient_input() {
        let zero = [[0.0; 3]; 3];
        assert!(matches!(orthonormalize(&zero), Err(Error::DegenerateRotation(_))));
        let rank2 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
        assert!(matches!(orthonormalize(&rank2), Err(Error::DegenerateRotation(_))));
        let rank1 = [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [3.0, 6.0, 9.0]];
        assert!(matches!(orthonormalize(&rank1), Err(Error::DegenerateRotation(_))));
    }

    #[test]
    fn projection_is_no_worse_than_sampled_rotations() {
        // Frobenius optimality spot-check: orthonormalize(R) is at least as
        // close to R as every rotation on a coarse axis-angle grid.
        let fro = |a: &Mat3, b: &Mat3| -> f64 {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += (a[i][j] - b[i][j]) * (a[i][j] - b[i][j]);
                }
            }
            s.sqrt()
        };
        let mut rng = rng_from_seed(5);
        for _ in 0..10 {
            let mut r = random_rotation(&mut rng);
            for row in r.iter_mut() {
                for v in row.iter_mut() {
                    *v += rng.gen_range(-0.3..0.3);
                }
            }
            let q = orthonormalize(&r).unwrap();
            let best = fro(&q, &r);
            let steps = 6;
            for ix in 0..steps {
                for iy in 0..steps {
                    for iz in 0..steps {
                        let aa = [
                            -PI + 2.0 * PI * ix as f64 / steps as f64,
                            -PI + 2.0 * PI * iy as f64 / steps as f64,
                            -PI + 2.0 * PI * iz as f64 / steps as f64,
                        ];
                        let cand = axis_angle_to_matrix(&aa);
                        assert!(fro(&cand, &r) + 1e-12 >= best, "grid rotation beat the projection");
                    }
                }
            }
        }
    }
}
