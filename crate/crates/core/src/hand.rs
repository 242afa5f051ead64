//! Articulated hand model: kinematic tree, attached collision geometry,
//! forward kinematics with analytic Jacobians, and the sigmoid squashing
//! between unconstrained optimizer coordinates and bounded joint/base
//! coordinates.
//!
//! A hand is a tree of frames. Each frame is either rigidly fixed to its
//! parent or follows a proximal DH step `Rx(alpha) Tx(a) Rz(theta0 + q)
//! Tz(d)` whose angle `q` is driven by one revolute joint. The floating base
//! is parameterized by three translations plus three exponential rotation
//! coordinates, each interval-bounded like a joint.
//!
//! Optimizer coordinate order is fixed everywhere: base translation (3),
//! base orientation (3), then joints in declaration order (M), for a total
//! of `6 + M` coordinates.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, HandSpecError};
use crate::se3::{self, RigidTransform};
use crate::{PointSet, Result};

/// Margin (fraction of interval width) used when a coordinate handed to
/// [`unsquash_robot`] sits on or outside its bounds.
const UNSQUASH_CLAMP_FRACTION: f64 = 1e-6;

/// Coordinates closer to a bound than this fraction of the interval width
/// are treated as out of bounds by [`unsquash_robot`].
const UNSQUASH_PRE_FRACTION: f64 = 1e-9;

/// How a frame moves relative to its parent.
#[derive(Debug, Clone)]
pub enum FrameKind {
    /// Rigidly attached.
    Fixed(RigidTransform),
    /// Proximal DH step; `theta0` is the angle at the joint zero position.
    Dh {
        a: f64,
        alpha: f64,
        d: f64,
        theta0: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Frame {
    /// Parent frame index; `None` attaches to the floating base. Parents
    /// always precede children, which rules out cycles.
    pub parent: Option<usize>,
    pub kind: FrameKind,
}

/// One revolute joint driving the DH angle of `frame`.
#[derive(Debug, Clone)]
pub struct Joint {
    pub frame: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Sphere collision site rigidly attached to a frame.
#[derive(Debug, Clone)]
pub struct AttachedPoint {
    pub frame: usize,
    pub offset: Vector3<f64>,
    pub radius: f64,
}

/// Tube collision volume between two attached points: a cloud point is
/// inside when the sum of its distances to the two endpoints drops below
/// `threshold` (an ellipsoid with the endpoints as foci).
#[derive(Debug, Clone)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    pub threshold: f64,
}

/// A point participating in the grasp proximity objective with its own
/// attraction threshold.
#[derive(Debug, Clone)]
pub struct Fingertip {
    pub point: usize,
    pub contact_threshold: f64,
}

/// Explicitly declared self-collision check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelfPair {
    /// Two attached points; clearance is their distance minus the radius of
    /// the first.
    PointPoint(usize, usize),
    /// A tube against an attached point.
    LinkPoint { link: usize, point: usize },
}

/// Component-wise bounds for the six base coordinates, translation first.
#[derive(Debug, Clone)]
pub struct BaseLimits {
    pub lower: Vector6<f64>,
    pub upper: Vector6<f64>,
}

/// Validated hand description.
#[derive(Debug, Clone)]
pub struct HandSpec {
    pub name: String,
    pub frames: Vec<Frame>,
    pub joints: Vec<Joint>,
    pub base_limits: BaseLimits,
    pub points: Vec<AttachedPoint>,
    pub links: Vec<Link>,
    pub fingertips: Vec<Fingertip>,
    pub self_pairs: Vec<SelfPair>,
    /// Transform from the base frame to the palm frame used for pose
    /// initialization against an object frame.
    pub palm_offset: RigidTransform,
    /// For each frame, the joint indices encountered walking from the base
    /// down to (and including) that frame. Precomputed for Jacobians.
    joint_path: Vec<Vec<usize>>,
    /// Joint index driving each frame, if any.
    joint_of_frame: Vec<Option<usize>>,
}

impl HandSpec {
    /// Number of joints.
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    /// Length of the optimizer coordinate vector: 6 base + joints.
    pub fn var_dim(&self) -> usize {
        6 + self.joints.len()
    }

    /// Number of attached points.
    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    /// Lower/upper bound for optimizer coordinate `i` (base then joints).
    pub fn coordinate_bounds(&self, i: usize) -> (f64, f64) {
        if i < 6 {
            (self.base_limits.lower[i], self.base_limits.upper[i])
        } else {
            let j = &self.joints[i - 6];
            (j.lower, j.upper)
        }
    }

    /// Joint vector with every joint at the midpoint of its interval.
    pub fn midpoint_joints(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.joints.len(),
            self.joints.iter().map(|j| 0.5 * (j.lower + j.upper)),
        )
    }
}

/// Hand configuration in physical coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// Base pose: translation (m) then exponential orientation coordinates
    /// (rad).
    pub base: Vector6<f64>,
    /// Joint angles in declaration order.
    pub joints: DVector<f64>,
}

impl RobotState {
    pub fn base_transform(&self) -> RigidTransform {
        RigidTransform::from_rotvec(
            &Vector3::new(self.base[3], self.base[4], self.base[5]),
            Vector3::new(self.base[0], self.base[1], self.base[2]),
        )
    }

    /// Builds a state from an explicit base transform, extracting
    /// exponential coordinates (well-defined even for half-turn rotations).
    pub fn from_base_transform(base: &RigidTransform, joints: DVector<f64>) -> Self {
        let r = base.rotvec();
        let t = base.translation;
        RobotState {
            base: Vector6::new(t[0], t[1], t[2], r[0], r[1], r[2]),
            joints,
        }
    }

    /// Flat coordinate vector, base then joints.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut x = DVector::zeros(6 + self.joints.len());
        for i in 0..6 {
            x[i] = self.base[i];
        }
        for j in 0..self.joints.len() {
            x[6 + j] = self.joints[j];
        }
        x
    }

    pub fn from_vector(x: &DVector<f64>) -> Self {
        let m = x.len() - 6;
        RobotState {
            base: Vector6::new(x[0], x[1], x[2], x[3], x[4], x[5]),
            joints: DVector::from_fn(m, |j, _| x[6 + j]),
        }
    }
}

/// Unconstrained optimizer coordinates for the hand, length `6 + M`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotVariable {
    pub omega: DVector<f64>,
}

/// Numerically stable logistic function.
pub(crate) fn sigmoid(w: f64) -> f64 {
    if w >= 0.0 {
        1.0 / (1.0 + (-w).exp())
    } else {
        let e = w.exp();
        e / (1.0 + e)
    }
}

/// Squash one coordinate into the open interval `(lo, hi)`.
///
/// The sigmoid saturates in floating point around `|w| ~ 37`, which would
/// otherwise return the bound exactly; the final nudge keeps the result
/// strictly interior for every finite input.
pub(crate) fn squash_scalar(lo: f64, hi: f64, w: f64) -> f64 {
    let x = lo + (hi - lo) * sigmoid(w);
    x.clamp(lo.next_up(), hi.next_down())
}

/// Derivative of [`squash_scalar`] with respect to `w`.
pub(crate) fn squash_scalar_derivative(lo: f64, hi: f64, w: f64) -> f64 {
    let s = sigmoid(w);
    (hi - lo) * s * (1.0 - s)
}

/// Maps unconstrained coordinates to a state strictly inside all bounds.
pub fn squash_robot(spec: &HandSpec, var: &RobotVariable) -> Result<RobotState> {
    if var.omega.len() != spec.var_dim() {
        return Err(Error::DimensionMismatch {
            what: "robot variable",
            expected: spec.var_dim(),
            got: var.omega.len(),
        });
    }
    if !var.omega.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite {
            context: "squash_robot",
        });
    }
    let x = DVector::from_fn(spec.var_dim(), |i, _| {
        let (lo, hi) = spec.coordinate_bounds(i);
        squash_scalar(lo, hi, var.omega[i])
    });
    Ok(RobotState::from_vector(&x))
}

/// Per-coordinate derivative dx/dw of the squash map at `var`.
pub fn squash_robot_derivative(spec: &HandSpec, var: &RobotVariable) -> DVector<f64> {
    DVector::from_fn(spec.var_dim(), |i, _| {
        let (lo, hi) = spec.coordinate_bounds(i);
        squash_scalar_derivative(lo, hi, var.omega[i])
    })
}

/// Inverse of [`squash_robot`].
///
/// Coordinates on or outside their bounds (or within 1e-9 of the width from
/// a bound) are clamped to 1e-6 of the width inside before inversion; the
/// returned flag reports whether any clamping happened.
pub fn unsquash_robot(spec: &HandSpec, state: &RobotState) -> Result<(RobotVariable, bool)> {
    if state.joints.len() != spec.dof() {
        return Err(Error::DimensionMismatch {
            what: "joint vector",
            expected: spec.dof(),
            got: state.joints.len(),
        });
    }
    let x = state.to_vector();
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            context: "unsquash_robot",
        });
    }
    let mut clamped = false;
    let omega = DVector::from_fn(spec.var_dim(), |i, _| {
        let (lo, hi) = spec.coordinate_bounds(i);
        let width = hi - lo;
        let mut xi = x[i];
        if xi < lo + UNSQUASH_PRE_FRACTION * width {
            xi = lo + UNSQUASH_CLAMP_FRACTION * width;
            clamped = true;
        } else if xi > hi - UNSQUASH_PRE_FRACTION * width {
            xi = hi - UNSQUASH_CLAMP_FRACTION * width;
            clamped = true;
        }
        let t = (xi - lo) / width;
        (t / (1.0 - t)).ln()
    });
    Ok((RobotVariable { omega }, clamped))
}

/// Forward kinematics with everything follow-up computations need: world
/// frame poses, world point positions, and the pieces of the analytic point
/// Jacobians.
pub struct ForwardKinematics {
    /// World pose of every frame.
    pub world: Vec<RigidTransform>,
    /// World position of every attached point.
    pub points: PointSet,
    /// World joint axis (unit z of the driven frame) per joint.
    joint_axis: Vec<Vector3<f64>>,
    /// A world point on each joint axis (the driven frame origin).
    joint_origin: Vec<Vector3<f64>>,
    /// Left Jacobian of the base orientation coordinates.
    base_orient_jac: Matrix3<f64>,
    base_translation: Vector3<f64>,
}

impl ForwardKinematics {
    /// Gradient accumulation: `out += (dp_k/dx)^T g` where `x` is the
    /// physical coordinate vector (base then joints). This is the transpose
    /// product the constraint assembly uses; building the full `(3K) x
    /// (6+M)` matrix is only worthwhile for tests.
    pub fn accumulate_point_gradient(
        &self,
        spec: &HandSpec,
        k: usize,
        g: &Vector3<f64>,
        out: &mut DVector<f64>,
    ) {
        let p = self.points[k];
        // Base translation block: identity.
        out[0] += g[0];
        out[1] += g[1];
        out[2] += g[2];
        // Base orientation block: dp/dr = -[p - t]x Jl(r).
        let d = p - self.base_translation;
        let contrib = self.base_orient_jac.transpose() * d.cross(g);
        out[3] += contrib[0];
        out[4] += contrib[1];
        out[5] += contrib[2];
        // Revolute joints on the path to the point's frame.
        let frame = spec.points[k].frame;
        for &j in &spec.joint_path[frame] {
            let arm = p - self.joint_origin[j];
            out[6 + j] += self.joint_axis[j].dot(&arm.cross(g));
        }
    }

    /// Dense Jacobian of all point positions, shape `(3K) x (6+M)`.
    pub fn dense_jacobian(&self, spec: &HandSpec) -> DMatrix<f64> {
        let k_count = self.points.len();
        let dim = spec.var_dim();
        let mut jac = DMatrix::zeros(3 * k_count, dim);
        let mut unit = DVector::zeros(dim);
        for k in 0..k_count {
            for row in 0..3 {
                let mut g = Vector3::zeros();
                g[row] = 1.0;
                unit.fill(0.0);
                self.accumulate_point_gradient(spec, k, &g, &mut unit);
                for c in 0..dim {
                    jac[(3 * k + row, c)] = unit[c];
                }
            }
        }
        jac
    }
}

/// Computes world frame poses and point positions for a state.
///
/// The only structural requirement is that the joint vector length matches
/// the declaration; bound membership is the caller's business (the squash
/// map guarantees it on the optimizer path).
pub fn forward_kinematics(spec: &HandSpec, state: &RobotState) -> Result<ForwardKinematics> {
    if state.joints.len() != spec.dof() {
        return Err(Error::DimensionMismatch {
            what: "joint vector",
            expected: spec.dof(),
            got: state.joints.len(),
        });
    }
    let base = state.base_transform();
    let rotvec = Vector3::new(state.base[3], state.base[4], state.base[5]);

    let mut world: Vec<RigidTransform> = Vec::with_capacity(spec.frames.len());
    let mut joint_axis = vec![Vector3::zeros(); spec.joints.len()];
    let mut joint_origin = vec![Vector3::zeros(); spec.joints.len()];

    for (idx, frame) in spec.frames.iter().enumerate() {
        let parent_world = match frame.parent {
            Some(p) => world[p],
            None => base,
        };
        let local = match &frame.kind {
            FrameKind::Fixed(t) => *t,
            FrameKind::Dh {
                a,
                alpha,
                d,
                theta0,
            } => {
                let q = spec.joint_of_frame[idx]
                    .map(|j| state.joints[j])
                    .unwrap_or(0.0);
                dh_step(*a, *alpha, *d, theta0 + q)
            }
        };
        let w = parent_world.compose(&local);
        if let Some(j) = spec.joint_of_frame[idx] {
            joint_axis[j] = w.rotation.column(2).into();
            joint_origin[j] = w.translation;
        }
        world.push(w);
    }

    let points = spec
        .points
        .iter()
        .map(|p| world[p.frame].apply(&p.offset))
        .collect();

    Ok(ForwardKinematics {
        world,
        points,
        joint_axis,
        joint_origin,
        base_orient_jac: se3::so3_left_jacobian(&rotvec),
        base_translation: base.translation,
    })
}

/// World positions of all attached points.
pub fn forward_points(spec: &HandSpec, state: &RobotState) -> Result<PointSet> {
    Ok(forward_kinematics(spec, state)?.points)
}

/// World positions plus the dense `(3K) x (6+M)` position Jacobian.
pub fn forward_points_with_jacobian(
    spec: &HandSpec,
    state: &RobotState,
) -> Result<(PointSet, DMatrix<f64>)> {
    let fk = forward_kinematics(spec, state)?;
    let jac = fk.dense_jacobian(spec);
    Ok((fk.points, jac))
}

/// Proximal DH local transform `Rx(alpha) Tx(a) Rz(theta) Tz(d)`.
fn dh_step(a: f64, alpha: f64, d: f64, theta: f64) -> RigidTransform {
    let (sa, ca) = alpha.sin_cos();
    let (st, ct) = theta.sin_cos();
    // Rotation: Rx(alpha) * Rz(theta).
    let rotation = Matrix3::new(
        ct,
        -st,
        0.0, //
        ca * st,
        ca * ct,
        -sa, //
        sa * st,
        sa * ct,
        ca,
    );
    // Translation: (a, 0, 0) + Rx(alpha) * (0, 0, d).
    let translation = Vector3::new(a, -sa * d, ca * d);
    RigidTransform {
        rotation,
        translation,
    }
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HandFile {
    name: String,
    dof: usize,
    point_count: usize,
    frames: Vec<FrameEntry>,
    joints: Vec<JointEntry>,
    base_limits: BaseLimitsEntry,
    points: Vec<PointEntry>,
    #[serde(default)]
    links: Vec<LinkEntry>,
    fingertip_subset: Vec<FingertipEntry>,
    #[serde(default)]
    self_collision_pairs: Vec<SelfPairEntry>,
    palm_offset: TransformEntry,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameEntry {
    parent: Option<usize>,
    #[serde(default)]
    fixed: Option<TransformEntry>,
    #[serde(default)]
    dh: Option<DhEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformEntry {
    rotvec: [f64; 3],
    translation: [f64; 3],
}

impl TransformEntry {
    fn to_transform(&self) -> RigidTransform {
        RigidTransform::from_rotvec(&Vector3::from(self.rotvec), Vector3::from(self.translation))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DhEntry {
    a: f64,
    alpha: f64,
    d: f64,
    theta0: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointEntry {
    frame: usize,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaseLimitsEntry {
    lower: [f64; 6],
    upper: [f64; 6],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointEntry {
    frame: usize,
    offset: [f64; 3],
    radius: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkEntry {
    a: usize,
    b: usize,
    threshold: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FingertipEntry {
    point: usize,
    contact_threshold: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SelfPairEntry {
    #[serde(default)]
    points: Option<[usize; 2]>,
    #[serde(default)]
    link: Option<usize>,
    #[serde(default)]
    point: Option<usize>,
}

/// Parses and validates a hand description from JSON text.
pub fn load_hand_spec_str(json: &str) -> Result<HandSpec> {
    let file: HandFile =
        serde_json::from_str(json).map_err(|e| HandSpecError::Schema(e.to_string()))?;
    validate_hand_file(file).map_err(Error::from)
}

/// Reads a hand description file.
pub fn load_hand_spec(path: &Path) -> Result<HandSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    load_hand_spec_str(&text)
}

fn validate_hand_file(file: HandFile) -> std::result::Result<HandSpec, HandSpecError> {
    // Frames: exactly one motion kind, parents strictly earlier.
    let mut frames = Vec::with_capacity(file.frames.len());
    for (i, f) in file.frames.iter().enumerate() {
        if let Some(parent) = f.parent {
            if parent >= i {
                return Err(HandSpecError::CyclicParent { frame: i, parent });
            }
        }
        let kind = match (&f.fixed, &f.dh) {
            (Some(t), None) => {
                let finite = t
                    .rotvec
                    .iter()
                    .chain(t.translation.iter())
                    .all(|x| x.is_finite());
                if !finite {
                    return Err(HandSpecError::Schema(format!(
                        "frame {i} fixed transform has non-finite entries"
                    )));
                }
                FrameKind::Fixed(t.to_transform())
            }
            (None, Some(dh)) => {
                if ![dh.a, dh.alpha, dh.d, dh.theta0]
                    .iter()
                    .all(|x| x.is_finite())
                {
                    return Err(HandSpecError::Schema(format!(
                        "frame {i} dh parameters have non-finite entries"
                    )));
                }
                FrameKind::Dh {
                    a: dh.a,
                    alpha: dh.alpha,
                    d: dh.d,
                    theta0: dh.theta0,
                }
            }
            _ => {
                return Err(HandSpecError::Schema(format!(
                    "frame {i} must declare exactly one of `fixed` or `dh`"
                )))
            }
        };
        frames.push(Frame {
            parent: f.parent,
            kind,
        });
    }

    // Header counts.
    if file.dof != file.joints.len() {
        return Err(HandSpecError::HeaderCount(format!(
            "dof says {} but {} joints are declared",
            file.dof,
            file.joints.len()
        )));
    }
    if file.point_count != file.points.len() {
        return Err(HandSpecError::HeaderCount(format!(
            "point_count says {} but {} points are declared",
            file.point_count,
            file.points.len()
        )));
    }

    // Joints: valid articulable frames, one joint per frame, sane limits.
    let mut joint_of_frame = vec![None; frames.len()];
    let mut joints = Vec::with_capacity(file.joints.len());
    for (j, joint) in file.joints.iter().enumerate() {
        if joint.frame >= frames.len() {
            return Err(HandSpecError::BadJointFrame {
                joint: j,
                frame: joint.frame,
                reason: "no such frame",
            });
        }
        if !matches!(frames[joint.frame].kind, FrameKind::Dh { .. }) {
            return Err(HandSpecError::BadJointFrame {
                joint: j,
                frame: joint.frame,
                reason: "frame is fixed, not articulable",
            });
        }
        if joint_of_frame[joint.frame].is_some() {
            return Err(HandSpecError::BadJointFrame {
                joint: j,
                frame: joint.frame,
                reason: "frame already driven by another joint",
            });
        }
        if !(joint.lower.is_finite() && joint.upper.is_finite()) || joint.lower >= joint.upper {
            return Err(HandSpecError::BadLimits {
                what: format!("joint {j}"),
                lower: joint.lower,
                upper: joint.upper,
            });
        }
        joint_of_frame[joint.frame] = Some(j);
        joints.push(Joint {
            frame: joint.frame,
            lower: joint.lower,
            upper: joint.upper,
        });
    }

    // Base limits.
    let base_lower = Vector6::from(file.base_limits.lower);
    let base_upper = Vector6::from(file.base_limits.upper);
    for i in 0..6 {
        if !(base_lower[i].is_finite() && base_upper[i].is_finite())
            || base_lower[i] >= base_upper[i]
        {
            return Err(HandSpecError::BadLimits {
                what: format!("base coordinate {i}"),
                lower: base_lower[i],
                upper: base_upper[i],
            });
        }
    }

    // Points.
    let mut points = Vec::with_capacity(file.points.len());
    for (k, p) in file.points.iter().enumerate() {
        if p.frame >= frames.len() {
            return Err(HandSpecError::BadPoint {
                point: k,
                reason: format!("frame {} does not exist", p.frame),
            });
        }
        if !(p.radius.is_finite() && p.radius > 0.0) {
            return Err(HandSpecError::BadPoint {
                point: k,
                reason: format!("radius {} must be positive", p.radius),
            });
        }
        if !p.offset.iter().all(|x| x.is_finite()) {
            return Err(HandSpecError::BadPoint {
                point: k,
                reason: "offset has non-finite entries".into(),
            });
        }
        points.push(AttachedPoint {
            frame: p.frame,
            offset: Vector3::from(p.offset),
            radius: p.radius,
        });
    }

    // Fingertip subset.
    if file.fingertip_subset.is_empty() {
        return Err(HandSpecError::BadFingertipSubset(
            "fingertip subset must not be empty".into(),
        ));
    }
    let mut fingertips = Vec::with_capacity(file.fingertip_subset.len());
    for f in &file.fingertip_subset {
        if f.point >= points.len() {
            return Err(HandSpecError::BadFingertipSubset(format!(
                "point {} does not exist",
                f.point
            )));
        }
        if !(f.contact_threshold.is_finite() && f.contact_threshold > 0.0) {
            return Err(HandSpecError::BadFingertipSubset(format!(
                "contact threshold {} must be positive",
                f.contact_threshold
            )));
        }
        fingertips.push(Fingertip {
            point: f.point,
            contact_threshold: f.contact_threshold,
        });
    }

    // Links need endpoint distances at the zero configuration; assemble a
    // provisional spec to run forward kinematics once.
    let joint_path = build_joint_paths(&frames, &joint_of_frame);
    let mut spec = HandSpec {
        name: file.name,
        frames,
        joints,
        base_limits: BaseLimits {
            lower: base_lower,
            upper: base_upper,
        },
        points,
        links: Vec::new(),
        fingertips,
        self_pairs: Vec::new(),
        palm_offset: file.palm_offset.to_transform(),
        joint_path,
        joint_of_frame,
    };

    let zero_state = RobotState {
        base: Vector6::zeros(),
        joints: DVector::zeros(spec.joints.len()),
    };
    let zero_points = forward_points(&spec, &zero_state)
        .map_err(|e| HandSpecError::Schema(format!("zero-configuration kinematics failed: {e}")))?;

    let mut links = Vec::with_capacity(file.links.len());
    for (l, link) in file.links.iter().enumerate() {
        if link.a >= spec.points.len() || link.b >= spec.points.len() || link.a == link.b {
            return Err(HandSpecError::BadLink {
                link: l,
                reason: format!("endpoints ({}, {}) invalid", link.a, link.b),
            });
        }
        let reference = (zero_points[link.a] - zero_points[link.b]).norm();
        if !(link.threshold.is_finite() && link.threshold > reference) {
            return Err(HandSpecError::BadLink {
                link: l,
                reason: format!(
                    "threshold {} must exceed endpoint distance {reference:.6} at the zero \
                     configuration (the tube would be empty)",
                    link.threshold
                ),
            });
        }
        links.push(Link {
            a: link.a,
            b: link.b,
            threshold: link.threshold,
        });
    }
    spec.links = links;

    // Self-collision pairs.
    let mut self_pairs = Vec::with_capacity(file.self_collision_pairs.len());
    for (i, sp) in file.self_collision_pairs.iter().enumerate() {
        let pair = match (sp.points, sp.link, sp.point) {
            (Some([a, b]), None, None) => {
                if a >= spec.points.len() || b >= spec.points.len() || a == b {
                    return Err(HandSpecError::BadSelfPair {
                        index: i,
                        reason: format!("point indices ({a}, {b}) invalid"),
                    });
                }
                if spec.points[a].frame == spec.points[b].frame {
                    return Err(HandSpecError::BadSelfPair {
                        index: i,
                        reason: "both points sit on the same frame".into(),
                    });
                }
                SelfPair::PointPoint(a, b)
            }
            (None, Some(link), Some(point)) => {
                if link >= spec.links.len() || point >= spec.points.len() {
                    return Err(HandSpecError::BadSelfPair {
                        index: i,
                        reason: format!("link {link} / point {point} invalid"),
                    });
                }
                let lk = &spec.links[link];
                if point == lk.a || point == lk.b {
                    return Err(HandSpecError::BadSelfPair {
                        index: i,
                        reason: "point is an endpoint of the link".into(),
                    });
                }
                SelfPair::LinkPoint { link, point }
            }
            _ => {
                return Err(HandSpecError::BadSelfPair {
                    index: i,
                    reason: "declare either `points: [a, b]` or `link` + `point`".into(),
                })
            }
        };
        self_pairs.push(pair);
    }
    spec.self_pairs = self_pairs;

    Ok(spec)
}

fn build_joint_paths(frames: &[Frame], joint_of_frame: &[Option<usize>]) -> Vec<Vec<usize>> {
    let mut paths: Vec<Vec<usize>> = Vec::with_capacity(frames.len());
    for (i, frame) in frames.iter().enumerate() {
        let mut path = match frame.parent {
            Some(p) => paths[p].clone(),
            None => Vec::new(),
        };
        if let Some(j) = joint_of_frame[i] {
            path.push(j);
        }
        paths.push(path);
    }
    paths
}
