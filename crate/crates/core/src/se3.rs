//! Rigid-body math: twists, transforms, exponential and log maps, and
//! principal-axis frames for point clouds.
//!
//! Conventions used across the crate:
//! - A twist stores translation first: `(v, w)` packs into a 6-vector as
//!   `[v0 v1 v2 w0 w1 w2]`.
//! - `twist_exp` uses the closed Rodrigues form, switching to Taylor series
//!   below [`ANGLE_TAYLOR_SWITCH`] where the closed form loses digits.
//! - `twist_log` refuses rotations within [`LOG_ANGLE_MARGIN`] of a half
//!   turn, where the axis is numerically unrecoverable.

use nalgebra::{Matrix3, SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Rotation angle below which exp/log evaluate their coefficient functions
/// by Taylor series instead of the closed trigonometric form.
pub const ANGLE_TAYLOR_SWITCH: f64 = 1e-8;

/// Rotations closer than this to a half turn are rejected by [`twist_log`].
pub const LOG_ANGLE_MARGIN: f64 = 1e-6;

/// Orthonormality / determinant tolerance for [`RigidTransform`] validation.
pub const ROTATION_TOL: f64 = 1e-10;

/// A rigid-body velocity or small displacement: linear part `v` (m), angular
/// part `w` (rad). Packing order in 6-vectors is always `v` then `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    pub v: Vector3<f64>,
    pub w: Vector3<f64>,
}

impl Twist {
    pub fn zero() -> Self {
        Twist {
            v: Vector3::zeros(),
            w: Vector3::zeros(),
        }
    }

    pub fn from_vector6(d: &Vector6<f64>) -> Self {
        Twist {
            v: Vector3::new(d[0], d[1], d[2]),
            w: Vector3::new(d[3], d[4], d[5]),
        }
    }

    pub fn to_vector6(&self) -> Vector6<f64> {
        Vector6::new(
            self.v[0], self.v[1], self.v[2], self.w[0], self.w[1], self.w[2],
        )
    }

    /// Unweighted Euclidean norm of the packed 6-vector. Mixes meters and
    /// radians; this is the magnitude the game loop thresholds against.
    pub fn norm(&self) -> f64 {
        (self.v.norm_squared() + self.w.norm_squared()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().chain(self.w.iter()).all(|x| x.is_finite())
    }
}

/// A proper rigid transform: rotation matrix plus translation.
///
/// The rotation is kept orthonormal with determinant +1 to [`ROTATION_TOL`];
/// constructors that accept raw matrices validate this.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds from a raw rotation matrix, validating orthonormality and
    /// orientation.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().all(|x| x.is_finite()) || !translation.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "rigid transform",
            });
        }
        let gram = rotation.transpose() * rotation;
        let ortho_err = (gram - Matrix3::identity()).abs().max();
        if ortho_err > ROTATION_TOL {
            return Err(Error::NotARotation {
                detail: format!("R^T R differs from identity by {ortho_err:.3e}"),
            });
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::NotARotation {
                detail: format!("determinant {det} is not +1"),
            });
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    /// Builds from exponential rotation coordinates; always yields a valid
    /// rotation, so this is the preferred constructor for file formats.
    pub fn from_rotvec(rotvec: &Vector3<f64>, translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation: so3_exp(rotvec),
            translation,
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Exponential coordinates of the rotation part. Unlike [`twist_log`]
    /// this stays well-defined arbitrarily close to (and at) a half turn,
    /// which pose initialization needs because principal-axis frames often
    /// differ from a reference orientation by exactly pi.
    pub fn rotvec(&self) -> Vector3<f64> {
        rotation_log(&self.rotation)
    }
}

/// Skew-symmetric cross-product matrix of `w`.
pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
}

/// `sin(t)/t, (1-cos(t))/t^2, (t-sin(t))/t^3` with series fallback below
/// `switch`. These scale the skew powers in the Rodrigues formulas.
fn rodrigues_coefficients(theta: f64, switch: f64) -> (f64, f64, f64) {
    if theta < switch {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let t2 = theta * theta;
        let s_half = (0.5 * theta).sin();
        (
            theta.sin() / theta,
            // 1 - cos t = 2 sin^2(t/2), stable at small angles.
            2.0 * s_half * s_half / t2,
            (theta - theta.sin()) / (t2 * theta),
        )
    }
}

/// Rotation-only exponential map (Rodrigues).
pub fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let (a, b, _) = rodrigues_coefficients(theta, ANGLE_TAYLOR_SWITCH);
    let wx = skew(w);
    Matrix3::identity() + wx * a + wx * wx * b
}

/// Left Jacobian of the rotation exponential. Also the matrix mapping the
/// linear part of a twist to the translation of its exponential.
pub(crate) fn so3_left_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let (_, b, c) = rodrigues_coefficients(theta, ANGLE_TAYLOR_SWITCH);
    let wx = skew(w);
    Matrix3::identity() + wx * b + wx * wx * c
}

/// Exponential coordinates of a rotation matrix, defined for all proper
/// rotations including half turns. Angle is recovered from both the
/// symmetric and antisymmetric parts, which keeps small angles accurate and
/// half turns well-posed.
pub(crate) fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    // Antisymmetric part holds sin(theta) * axis.
    let sin_axis = Vector3::new(
        0.5 * (r[(2, 1)] - r[(1, 2)]),
        0.5 * (r[(0, 2)] - r[(2, 0)]),
        0.5 * (r[(1, 0)] - r[(0, 1)]),
    );
    let sin_theta = sin_axis.norm().min(1.0);
    let cos_theta = (0.5 * (r.trace() - 1.0)).clamp(-1.0, 1.0);
    let theta = sin_theta.atan2(cos_theta);

    if theta < ANGLE_TAYLOR_SWITCH {
        // sin(t)/t ~ 1 here, so the antisymmetric part is the answer.
        return sin_axis;
    }
    if sin_theta > 1e-6 {
        return sin_axis * (theta / sin_theta);
    }
    // Near a half turn the antisymmetric part vanishes; recover the axis
    // from the symmetric part (R + R^T)/2 = cos I + (1-cos) n n^T.
    let m = (r + r.transpose()) * 0.5;
    let one_minus_cos = 1.0 - cos_theta;
    let mut n = Vector3::zeros();
    let k = if m[(0, 0)] >= m[(1, 1)] && m[(0, 0)] >= m[(2, 2)] {
        0
    } else if m[(1, 1)] >= m[(2, 2)] {
        1
    } else {
        2
    };
    n[k] = ((m[(k, k)] - cos_theta) / one_minus_cos).max(0.0).sqrt();
    for i in 0..3 {
        if i != k {
            n[i] = m[(i, k)] / (one_minus_cos * n[k]);
        }
    }
    // Fix the sign using whatever survives of the antisymmetric part.
    if sin_axis.dot(&n) < 0.0 {
        n = -n;
    }
    n * theta
}

/// Exponential map from a twist to a rigid transform.
///
/// Closed form above [`ANGLE_TAYLOR_SWITCH`], series below; the two branches
/// agree to well under 1e-10 at the switch angle.
pub fn twist_exp(d: &Twist) -> Result<RigidTransform> {
    if !d.is_finite() {
        return Err(Error::NonFinite {
            context: "twist_exp",
        });
    }
    let rotation = so3_exp(&d.w);
    let translation = so3_left_jacobian(&d.w) * d.v;
    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// Log map from a rigid transform back to a twist.
///
/// Errors when the rotation angle is within [`LOG_ANGLE_MARGIN`] of pi,
/// where the sign of the axis (and hence the twist) is ill-conditioned.
pub fn twist_log(t: &RigidTransform) -> Result<Twist> {
    let w = rotation_log(&t.rotation);
    let theta = w.norm();
    if theta >= std::f64::consts::PI - LOG_ANGLE_MARGIN {
        return Err(Error::LogNearPi {
            angle: theta,
            margin: LOG_ANGLE_MARGIN,
        });
    }
    // Invert the left Jacobian: I - wx/2 + k * wx^2 with
    // k = (1 - A/(2B)) / theta^2, series below 1e-2 where the closed form
    // cancels.
    let wx = skew(&w);
    let k = if theta < 1e-2 {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        let a = theta.sin() / theta;
        let b = (1.0 - theta.cos()) / (theta * theta);
        (1.0 - a / (2.0 * b)) / (theta * theta)
    };
    let v_inv = Matrix3::identity() - wx * 0.5 + wx * wx * k;
    Ok(Twist {
        v: v_inv * t.translation,
        w,
    })
}

/// Per-twist factors of the derivative of `p -> exp(d) * p`.
///
/// The 3x6 Jacobian at a transformed point `q` is `[ V | Q - [q]x V ]`,
/// where `V` and `Q` depend only on the twist. Building the context once per
/// twist lets a caller differentiate a whole cloud cheaply.
pub struct ExpActionJacobian {
    pub transform: RigidTransform,
    v_mat: Matrix3<f64>,
    q_mat: Matrix3<f64>,
}

impl ExpActionJacobian {
    pub fn new(d: &Twist) -> Result<Self> {
        let transform = twist_exp(d)?;
        let v_mat = so3_left_jacobian(&d.w);
        let q_mat = exp_q_matrix(d);
        Ok(ExpActionJacobian {
            transform,
            v_mat,
            q_mat,
        })
    }

    /// Jacobian of the transformed point `q = exp(d) * p0` with respect to
    /// the six twist coordinates, columns ordered `(v, w)`.
    pub fn point_jacobian(&self, q: &Vector3<f64>) -> SMatrix<f64, 3, 6> {
        let rot_part = self.q_mat - skew(q) * self.v_mat;
        let mut jac = SMatrix::<f64, 3, 6>::zeros();
        jac.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.v_mat);
        jac.fixed_view_mut::<3, 3>(0, 3).copy_from(&rot_part);
        jac
    }
}

/// Coupling block of the left Jacobian of the rigid-body exponential: the
/// part of d(exp(d) p)/dw that does not rotate with the point.
fn exp_q_matrix(d: &Twist) -> Matrix3<f64> {
    let theta = d.w.norm();
    let vx = skew(&d.v);
    let wx = skew(&d.w);
    // Coefficient functions with heavy cancellation; series below 1e-2.
    let (a2, a3, a4) = if theta < 1e-2 {
        let t2 = theta * theta;
        let t4 = t2 * t2;
        (
            1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0,
            1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0,
            1.0 / 120.0 - t2 / 2520.0 + t4 / 120960.0,
        )
    } else {
        let t2 = theta * theta;
        let t4 = t2 * t2;
        let (s, c) = theta.sin_cos();
        (
            (theta - s) / (t2 * theta),
            (t2 + 2.0 * c - 2.0) / (2.0 * t4),
            (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t4 * theta),
        )
    };
    let wvx = wx * vx;
    let vwx = vx * wx;
    let wvwx = wvx * wx;
    vx * 0.5
        + (wvx + vwx + wx * vwx) * a2
        + (wx * wvx + vwx * wx - wvwx * 3.0) * a3
        + (wvwx * wx + wx * wvwx) * a4
}

/// Principal-axis frame of a point cloud: origin at the mean, axes along
/// covariance eigenvectors in descending eigenvalue order.
///
/// Sign convention: each of the first two axes is flipped so its
/// largest-magnitude component is positive (lowest index wins ties); the
/// third axis is their cross product, making the frame right-handed.
///
/// Errors for fewer than 4 points or a covariance whose smallest eigenvalue
/// is below 1e-9 of its largest (collinear or planar clouds).
pub fn pca_object_frame(points: &[Vector3<f64>]) -> Result<RigidTransform> {
    if points.len() < 4 {
        return Err(Error::DegenerateGeometry(format!(
            "principal frame needs at least 4 points, got {}",
            points.len()
        )));
    }
    if !points.iter().all(|p| p.iter().all(|x| x.is_finite())) {
        return Err(Error::NonFinite {
            context: "pca_object_frame",
        });
    }
    let n = points.len() as f64;
    let mean: Vector3<f64> = points.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= n;

    let eig = nalgebra::SymmetricEigen::new(cov);
    // Descending eigenvalue order.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = eig.eigenvalues[order[0]].max(0.0);
    let lambda_min = eig.eigenvalues[order[2]].max(0.0);
    if lambda_max <= 0.0 || lambda_min / lambda_max < 1e-9 {
        return Err(Error::DegenerateGeometry(format!(
            "covariance eigenvalue ratio {:.3e} below 1e-9; cloud has no full 3-D extent",
            if lambda_max > 0.0 {
                lambda_min / lambda_max
            } else {
                0.0
            }
        )));
    }

    let mut axes = [Vector3::zeros(), Vector3::zeros(), Vector3::zeros()];
    for (i, &oi) in order.iter().enumerate().take(2) {
        let mut a: Vector3<f64> = eig.eigenvectors.column(oi).into();
        // Flip so the largest-magnitude component is positive.
        let mut k = 0;
        for j in 1..3 {
            if a[j].abs() > a[k].abs() {
                k = j;
            }
        }
        if a[k] < 0.0 {
            a = -a;
        }
        axes[i] = a;
    }
    axes[2] = axes[0].cross(&axes[1]);

    let rotation = Matrix3::from_columns(&axes);
    Ok(RigidTransform {
        rotation,
        translation: mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_twist(rng: &mut StdRng, w_max: f64) -> Twist {
        let u = |rng: &mut StdRng| rng.random_range(-1.0..1.0);
        let mut w = Vector3::new(u(rng), u(rng), u(rng));
        let norm = w.norm();
        if norm > 0.0 {
            w *= rng.random_range(0.0..w_max) / norm;
        }
        Twist {
            v: Vector3::new(u(rng), u(rng), u(rng)),
            w,
        }
    }

    #[test]
    fn exp_rotates_point_quarter_turn() {
        let d = Twist {
            v: Vector3::zeros(),
            w: Vector3::new(0.0, 0.0, FRAC_PI_2),
        };
        let t = twist_exp(&d).unwrap();
        let p = t.apply(&Vector3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(p, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let t = twist_exp(&Twist::zero()).unwrap();
        assert_eq!(t.rotation, Matrix3::identity());
        assert_eq!(t.translation, Vector3::zeros());
    }

    #[test]
    fn exp_rejects_non_finite() {
        let d = Twist {
            v: Vector3::new(f64::NAN, 0.0, 0.0),
            w: Vector3::zeros(),
        };
        assert!(matches!(twist_exp(&d), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn log_rejects_half_turn() {
        let t = RigidTransform::from_rotvec(&Vector3::new(PI - 1e-9, 0.0, 0.0), Vector3::zeros());
        assert!(matches!(twist_log(&t), Err(Error::LogNearPi { .. })));
    }

    #[test]
    fn log_exp_round_trip_random() {
        let mut rng = StdRng::seed_from_u64(0x5e3);
        for _ in 0..1000 {
            let d = random_twist(&mut rng, 1.0);
            let back = twist_log(&twist_exp(&d).unwrap()).unwrap();
            assert_relative_eq!(back.to_vector6(), d.to_vector6(), epsilon = 1e-9);
        }
    }

    #[test]
    fn exp_of_negated_twist_is_inverse() {
        let mut rng = StdRng::seed_from_u64(0x1e5);
        for _ in 0..300 {
            let d = random_twist(&mut rng, FRAC_PI_2);
            let neg = Twist { v: -d.v, w: -d.w };
            let t = twist_exp(&d).unwrap();
            let t_inv = t.inverse();
            let t_neg = twist_exp(&neg).unwrap();
            assert_relative_eq!(t_neg.rotation, t_inv.rotation, epsilon = 1e-10);
            assert_relative_eq!(t_neg.translation, t_inv.translation, epsilon = 1e-10);
        }
    }

    #[test]
    fn exp_branches_agree_at_switch_angle() {
        // Evaluate both coefficient branches at the switch angle and check
        // the resulting transforms agree far below the promised 1e-10.
        let axis = Vector3::new(0.6, -0.48, 0.64).normalize();
        let w = axis * ANGLE_TAYLOR_SWITCH;
        let v = Vector3::new(0.3, -0.2, 0.5);
        let t2 = ANGLE_TAYLOR_SWITCH * ANGLE_TAYLOR_SWITCH;
        let series = (1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0);
        let theta = ANGLE_TAYLOR_SWITCH;
        let s_half = (0.5 * theta).sin();
        let closed = (
            theta.sin() / theta,
            2.0 * s_half * s_half / t2,
            (theta - theta.sin()) / (t2 * theta),
        );
        let build = |(a, b, c): (f64, f64, f64)| {
            let wx = skew(&w);
            let r = Matrix3::identity() + wx * a + wx * wx * b;
            let vm = Matrix3::identity() + wx * b + wx * wx * c;
            (r, vm * v)
        };
        let (r_s, t_s) = build(series);
        let (r_c, t_c) = build(closed);
        assert!((r_s - r_c).abs().max() < 1e-10);
        assert!((t_s - t_c).abs().max() < 1e-10);
    }

    #[test]
    fn log_small_angle_accuracy() {
        // Small rotations must survive the round trip; acos-based angle
        // recovery would flatten these to zero.
        for exponent in [-9, -7, -5, -3] {
            let theta = 10f64.powi(exponent);
            let d = Twist {
                v: Vector3::new(0.1, 0.2, -0.3),
                w: Vector3::new(0.0, theta, 0.0),
            };
            let back = twist_log(&twist_exp(&d).unwrap()).unwrap();
            assert_relative_eq!(back.to_vector6(), d.to_vector6(), epsilon = 1e-12);
        }
    }

    #[test]
    fn rotation_log_handles_half_turn() {
        for axis in [
            Vector3::x_axis().into_inner(),
            Vector3::new(1.0, 1.0, 0.0).normalize(),
            Vector3::new(0.3, -0.5, 0.8).normalize(),
        ] {
            let r = so3_exp(&(axis * PI));
            let back = rotation_log(&r);
            // Either sign of the axis is a valid log at pi.
            let err_pos = (back - axis * PI).norm();
            let err_neg = (back + axis * PI).norm();
            assert!(err_pos.min(err_neg) < 1e-7, "axis {axis:?}");
        }
    }

    #[test]
    fn exp_action_jacobian_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(0xace);
        for _ in 0..50 {
            let d = random_twist(&mut rng, 0.8);
            let p0 = Vector3::new(
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
            );
            let ctx = ExpActionJacobian::new(&d).unwrap();
            let q = ctx.transform.apply(&p0);
            let jac = ctx.point_jacobian(&q);

            let h = 1e-6;
            let mut fd = SMatrix::<f64, 3, 6>::zeros();
            let base = d.to_vector6();
            for j in 0..6 {
                let mut plus = base;
                plus[j] += h;
                let mut minus = base;
                minus[j] -= h;
                let qp = twist_exp(&Twist::from_vector6(&plus)).unwrap().apply(&p0);
                let qm = twist_exp(&Twist::from_vector6(&minus)).unwrap().apply(&p0);
                fd.set_column(j, &((qp - qm) / (2.0 * h)));
            }
            let scale = fd.amax().max(1.0);
            assert!(
                (jac - fd).amax() / scale < 1e-5,
                "jacobian mismatch: {:.3e}",
                (jac - fd).amax() / scale
            );
        }
    }

    #[test]
    fn pca_unit_cube_gives_axis_frame() {
        let mut pts = Vec::new();
        for sx in [-0.5, 0.5] {
            for sy in [-0.5, 0.5] {
                for sz in [-0.5, 0.5] {
                    pts.push(Vector3::new(sx, sy, sz));
                }
            }
        }
        let frame = pca_object_frame(&pts).unwrap();
        assert_relative_eq!(frame.translation, Vector3::zeros(), epsilon = 1e-12);
        // Eigenvalues tie, so any axis permutation is acceptable; with the
        // sign convention each returned axis must be a positive unit axis.
        let expected = [Vector3::x(), Vector3::y(), Vector3::z()];
        let mut used = [false; 3];
        for i in 0..2 {
            let col: Vector3<f64> = frame.rotation.column(i).into();
            let hit = expected
                .iter()
                .position(|e| (col - e).norm() < 1e-9)
                .unwrap_or_else(|| panic!("column {i} = {col:?} is not a unit axis"));
            assert!(!used[hit]);
            used[hit] = true;
        }
        assert!((frame.rotation.determinant() - 1.0).abs() < 1e-12);
    }

    /// Hand-rolled cyclic Jacobi eigensolver, kept independent of the
    /// nalgebra decomposition the implementation uses.
    fn jacobi_eigen(mut m: Matrix3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        let mut v = Matrix3::identity();
        for _ in 0..60 {
            // Largest off-diagonal element.
            let (mut p, mut q, mut biggest) = (0, 1, 0.0f64);
            for i in 0..3 {
                for j in (i + 1)..3 {
                    if m[(i, j)].abs() > biggest {
                        biggest = m[(i, j)].abs();
                        p = i;
                        q = j;
                    }
                }
            }
            if biggest < 1e-15 {
                break;
            }
            let app = m[(p, p)];
            let aqq = m[(q, q)];
            let apq = m[(p, q)];
            let phi = 0.5 * (2.0 * apq).atan2(aqq - app);
            let (s, c) = phi.sin_cos();
            let mut rot = Matrix3::identity();
            rot[(p, p)] = c;
            rot[(q, q)] = c;
            rot[(p, q)] = s;
            rot[(q, p)] = -s;
            m = rot.transpose() * m * rot;
            v *= rot;
        }
        (Vector3::new(m[(0, 0)], m[(1, 1)], m[(2, 2)]), v)
    }

    #[test]
    fn pca_recovers_rotated_box_axes() {
        // Box-corner cloud with distinct extents, rotated and shifted; the
        // principal axes must match an independent eigendecomposition of the
        // same covariance, up to per-axis sign.
        let rot = so3_exp(&Vector3::new(0.3, -0.7, 0.5));
        let shift = Vector3::new(1.0, 2.0, 3.0);
        let mut pts = Vec::new();
        for sx in [-3.0, 3.0] {
            for sy in [-2.0, 2.0] {
                for sz in [-1.0, 1.0] {
                    pts.push(rot * Vector3::new(sx, sy, sz) + shift);
                }
            }
        }
        let frame = pca_object_frame(&pts).unwrap();
        assert_relative_eq!(frame.translation, shift, epsilon = 1e-10);

        let n = pts.len() as f64;
        let mean: Vector3<f64> = pts.iter().sum::<Vector3<f64>>() / n;
        let mut cov = Matrix3::zeros();
        for p in &pts {
            let d = p - mean;
            cov += d * d.transpose();
        }
        cov /= n;
        let (vals, vecs) = jacobi_eigen(cov);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        for (i, &oi) in order.iter().enumerate() {
            let expect: Vector3<f64> = vecs.column(oi).into();
            let got: Vector3<f64> = frame.rotation.column(i).into();
            let align = expect.dot(&got).abs();
            assert!(align > 1.0 - 1e-9, "axis {i} misaligned: |dot| = {align}");
        }
    }

    #[test]
    fn pca_translation_recovered() {
        let shift = Vector3::new(1.0, 2.0, 3.0);
        let mut pts = Vec::new();
        for sx in [-3.0, 3.0] {
            for sy in [-2.0, 2.0] {
                for sz in [-1.0, 1.0] {
                    pts.push(Vector3::new(sx, sy, sz) + shift);
                }
            }
        }
        let frame = pca_object_frame(&pts).unwrap();
        assert_relative_eq!(frame.translation, shift, epsilon = 1e-12);
    }

    #[test]
    fn pca_rejects_degenerate_clouds() {
        let line: Vec<_> = (0..10)
            .map(|i| Vector3::new(i as f64, 2.0 * i as f64, 0.0))
            .collect();
        assert!(matches!(
            pca_object_frame(&line),
            Err(Error::DegenerateGeometry(_))
        ));
        let few = [Vector3::zeros(), Vector3::x(), Vector3::y()];
        assert!(matches!(
            pca_object_frame(&few),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn pca_equivariant_under_rigid_transform() {
        let mut rng = StdRng::seed_from_u64(0x9ca);
        for _ in 0..100 {
            // Anisotropic random cloud so eigenvalues are well separated.
            let pts: Vec<Vector3<f64>> = (0..40)
                .map(|_| {
                    Vector3::new(
                        3.0 * rng.random_range(-1.0..1.0f64),
                        1.5 * rng.random_range(-1.0..1.0f64),
                        0.5 * rng.random_range(-1.0..1.0f64),
                    )
                })
                .collect();
            let frame = match pca_object_frame(&pts) {
                Ok(f) => f,
                Err(_) => continue, // rare near-degenerate draw
            };
            let t = RigidTransform::from_rotvec(
                &Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ),
                Vector3::new(0.4, -0.2, 0.9),
            );
            let moved: Vec<Vector3<f64>> = pts.iter().map(|p| t.apply(p)).collect();
            let frame_moved = pca_object_frame(&moved).unwrap();
            assert_relative_eq!(
                frame_moved.translation,
                t.apply(&frame.translation),
                epsilon = 1e-9
            );
            let expected_rot = t.rotation * frame.rotation;
            // Equal up to the per-axis sign convention.
            for i in 0..3 {
                let a: Vector3<f64> = frame_moved.rotation.column(i).into();
                let b: Vector3<f64> = expected_rot.column(i).into();
                assert!(a.dot(&b).abs() > 1.0 - 1e-9, "axis {i} not parallel");
            }
        }
    }
}
