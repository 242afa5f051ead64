//! Differentiable collision clearances and the grasp proximity objective.
//!
//! The hand's collision geometry consists of spheres at the attached points
//! and ellipsoidal tubes along declared links (the tube is the set of points
//! whose summed distance to the two endpoint spheres' centers is below a
//! threshold). A clearance is positive when the pair is separated, zero at
//! touch, negative under penetration. Everything here is piecewise smooth
//! with deterministic subgradients at the kinks: ties in a min go to the
//! lowest index, and `max(x, 0)` uses the one-sided derivative 0 at x = 0.
//!
//! Gradients in the unconstrained player coordinates are assembled by chain
//! rule: clearance derivatives with respect to point positions, pushed
//! through the kinematic point Jacobians (hand side) or the displacement
//! twist Jacobian (object side), then through the squash derivatives.

use nalgebra::{DVector, Vector3, Vector6};

use crate::hand::{
    forward_kinematics, squash_robot, squash_robot_derivative, ForwardKinematics, HandSpec,
    RobotVariable, SelfPair,
};
use crate::object::{
    squash_object, squash_object_derivative, transform_object, DisplacedCloud, EscapeBounds,
    ObjectCloud, ObjectVariable,
};
use crate::Result;

/// Distances below this are treated as coincident points; the clearance
/// direction degenerates and the subgradient used is the zero vector.
const DEGENERATE_DISTANCE: f64 = 1e-15;

/// Identifies what a clearance entry measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClearanceId {
    /// Hand point sphere against an object cloud point.
    PointPair { point: usize, cloud: usize },
    /// Link tube against an object cloud point.
    LinkPair { link: usize, cloud: usize },
    /// Declared self-collision pair.
    SelfPair { pair: usize },
}

/// Ordered clearances plus the identity of each entry for diagnostics.
#[derive(Debug, Clone)]
pub struct ClearanceVector {
    pub values: DVector<f64>,
    pub index_map: Vec<ClearanceId>,
}

impl ClearanceVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    /// Smallest entry with its identity; ties go to the lowest index.
    pub fn min_entry(&self) -> Option<(f64, ClearanceId)> {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..self.values.len() {
            if best.is_none_or(|(v, _)| self.values[i] < v) {
                best = Some((self.values[i], i));
            }
        }
        best.map(|(v, i)| (v, self.index_map[i]))
    }
}

/// Separation of a sphere of radius `r_k` centered at `p_r` from the point
/// `p_o`: positive outside, zero on the surface, negative inside.
pub fn sphere_clearance(p_r: &Vector3<f64>, p_o: &Vector3<f64>, r_k: f64) -> f64 {
    (p_r - p_o).norm() - r_k
}

/// Separation of the tube with foci `p_r1`, `p_r2` and sum-distance
/// threshold `r12` from the point `p_o`: positive outside the ellipsoid,
/// zero on it, negative inside.
pub fn link_clearance(
    p_r1: &Vector3<f64>,
    p_r2: &Vector3<f64>,
    p_o: &Vector3<f64>,
    r12: f64,
) -> f64 {
    (p_r1 - p_o).norm() + (p_r2 - p_o).norm() - r12
}

fn unit_or_zero(d: &Vector3<f64>) -> Vector3<f64> {
    let n = d.norm();
    if n > DEGENERATE_DISTANCE {
        d / n
    } else {
        Vector3::zeros()
    }
}

// ---------------------------------------------------------------------------
// Pair stacks over raw point sets
// ---------------------------------------------------------------------------
//
// The solver evaluates these thousands of times per run, so they operate on
// plain point slices with no allocation; the omega-level wrappers below tie
// them to the squash maps and kinematics.

/// Number of hand-object clearance entries for a cloud of `n_cloud` points.
pub(crate) fn pair_count(spec: &HandSpec, n_cloud: usize) -> usize {
    (spec.points.len() + spec.links.len()) * n_cloud
}

/// Identity of hand-object pair entry `idx` (sphere pairs first, point-major,
/// then link pairs, link-major).
pub(crate) fn pair_identity(spec: &HandSpec, n_cloud: usize, idx: usize) -> ClearanceId {
    let sphere_entries = spec.points.len() * n_cloud;
    if idx < sphere_entries {
        ClearanceId::PointPair {
            point: idx / n_cloud,
            cloud: idx % n_cloud,
        }
    } else {
        let rem = idx - sphere_entries;
        ClearanceId::LinkPair {
            link: rem / n_cloud,
            cloud: rem % n_cloud,
        }
    }
}

/// Fills `out` with all hand-object clearances in pair order.
pub(crate) fn pair_clearances_into(
    spec: &HandSpec,
    hand_pts: &[Vector3<f64>],
    obj_pts: &[Vector3<f64>],
    out: &mut [f64],
) {
    debug_assert_eq!(out.len(), pair_count(spec, obj_pts.len()));
    let n = obj_pts.len();
    for (k, p) in spec.points.iter().enumerate() {
        let center = hand_pts[k];
        for (i, y) in obj_pts.iter().enumerate() {
            out[k * n + i] = (center - y).norm() - p.radius;
        }
    }
    let base = spec.points.len() * n;
    for (l, link) in spec.links.iter().enumerate() {
        let a = hand_pts[link.a];
        let b = hand_pts[link.b];
        for (i, y) in obj_pts.iter().enumerate() {
            out[base + l * n + i] = (a - y).norm() + (b - y).norm() - link.threshold;
        }
    }
}

/// Smallest hand-object clearance and its entry index.
pub(crate) fn pair_min(
    spec: &HandSpec,
    hand_pts: &[Vector3<f64>],
    obj_pts: &[Vector3<f64>],
) -> (f64, usize) {
    let n = obj_pts.len();
    let mut best = f64::INFINITY;
    let mut best_idx = 0;
    for (k, p) in spec.points.iter().enumerate() {
        let center = hand_pts[k];
        for (i, y) in obj_pts.iter().enumerate() {
            let v = (center - y).norm() - p.radius;
            if v < best {
                best = v;
                best_idx = k * n + i;
            }
        }
    }
    let base = spec.points.len() * n;
    for (l, link) in spec.links.iter().enumerate() {
        let a = hand_pts[link.a];
        let b = hand_pts[link.b];
        for (i, y) in obj_pts.iter().enumerate() {
            let v = (a - y).norm() + (b - y).norm() - link.threshold;
            if v < best {
                best = v;
                best_idx = base + l * n + i;
            }
        }
    }
    (best, best_idx)
}

/// Accumulates `w * d(entry idx)/d(positions)` into the per-point gradient
/// buffers. Either buffer may be omitted when that side is held fixed.
pub(crate) fn pair_clearance_vjp(
    spec: &HandSpec,
    hand_pts: &[Vector3<f64>],
    obj_pts: &[Vector3<f64>],
    idx: usize,
    w: f64,
    g_hand: Option<&mut [Vector3<f64>]>,
    g_obj: Option<&mut [Vector3<f64>]>,
) {
    match pair_identity(spec, obj_pts.len(), idx) {
        ClearanceId::PointPair { point, cloud } => {
            let u = unit_or_zero(&(hand_pts[point] - obj_pts[cloud]));
            if let Some(gh) = g_hand {
                gh[point] += w * u;
            }
            if let Some(gobj) = g_obj {
                gobj[cloud] -= w * u;
            }
        }
        ClearanceId::LinkPair { link, cloud } => {
            let lk = &spec.links[link];
            let ua = unit_or_zero(&(hand_pts[lk.a] - obj_pts[cloud]));
            let ub = unit_or_zero(&(hand_pts[lk.b] - obj_pts[cloud]));
            if let Some(gh) = g_hand {
                gh[lk.a] += w * ua;
                gh[lk.b] += w * ub;
            }
            if let Some(gobj) = g_obj {
                gobj[cloud] -= w * (ua + ub);
            }
        }
        ClearanceId::SelfPair { .. } => unreachable!("self pairs are not hand-object entries"),
    }
}

/// Fills `out` with the declared self-collision clearances in declaration
/// order.
pub(crate) fn self_clearances_into(spec: &HandSpec, hand_pts: &[Vector3<f64>], out: &mut [f64]) {
    debug_assert_eq!(out.len(), spec.self_pairs.len());
    for (i, pair) in spec.self_pairs.iter().enumerate() {
        out[i] = match *pair {
            SelfPair::PointPoint(a, b) => {
                sphere_clearance(&hand_pts[a], &hand_pts[b], spec.points[a].radius)
            }
            SelfPair::LinkPoint { link, point } => {
                let lk = &spec.links[link];
                link_clearance(
                    &hand_pts[lk.a],
                    &hand_pts[lk.b],
                    &hand_pts[point],
                    lk.threshold,
                )
            }
        };
    }
}

/// Accumulates `w * d(self pair)/d(positions)` into the hand point gradient
/// buffer.
pub(crate) fn self_clearance_vjp(
    spec: &HandSpec,
    hand_pts: &[Vector3<f64>],
    pair: usize,
    w: f64,
    g_hand: &mut [Vector3<f64>],
) {
    match spec.self_pairs[pair] {
        SelfPair::PointPoint(a, b) => {
            let u = unit_or_zero(&(hand_pts[a] - hand_pts[b]));
            g_hand[a] += w * u;
            g_hand[b] -= w * u;
        }
        SelfPair::LinkPoint { link, point } => {
            let lk = &spec.links[link];
            let ua = unit_or_zero(&(hand_pts[lk.a] - hand_pts[point]));
            let ub = unit_or_zero(&(hand_pts[lk.b] - hand_pts[point]));
            g_hand[lk.a] += w * ua;
            g_hand[lk.b] += w * ub;
            g_hand[point] -= w * (ua + ub);
        }
    }
}

/// Proximity objective over the fingertip subset: half the sum of squared
/// positive parts of (nearest cloud distance minus contact threshold).
pub(crate) fn grasp_value(
    spec: &HandSpec,
    hand_pts: &[Vector3<f64>],
    obj_pts: &[Vector3<f64>],
) -> f64 {
    let mut total = 0.0;
    for tip in &spec.fingertips {
        let p = hand_pts[tip.point];
        let mut dmin = f64::INFINITY;
        for y in obj_pts {
            let d = (p - y).norm();
            if d < dmin {
                dmin = d;
            }
        }
        let jk = (dmin - tip.contact_threshold).max(0.0);
        total += 0.5 * jk * jk;
    }
    total
}

/// Accumulates the objective gradient with respect to the hand points into
/// `g_hand` (scaled by `w`).
pub(crate) fn grasp_vjp(
    spec: &HandSpec,
    hand_pts: &[Vector3<f64>],
    obj_pts: &[Vector3<f64>],
    w: f64,
    g_hand: &mut [Vector3<f64>],
) {
    for tip in &spec.fingertips {
        let p = hand_pts[tip.point];
        let mut dmin = f64::INFINITY;
        let mut nearest = 0;
        for (n, y) in obj_pts.iter().enumerate() {
            let d = (p - y).norm();
            if d < dmin {
                dmin = d;
                nearest = n;
            }
        }
        let jk = dmin - tip.contact_threshold;
        if jk > 0.0 {
            let u = unit_or_zero(&(p - obj_pts[nearest]));
            g_hand[tip.point] += (w * jk) * u;
        }
    }
}

// ---------------------------------------------------------------------------
// Chain rule to player coordinates
// ---------------------------------------------------------------------------

/// Pushes per-hand-point gradients through the kinematic Jacobians and the
/// squash derivative, yielding a gradient in the hand's unconstrained
/// coordinates.
pub(crate) fn chain_to_robot(
    spec: &HandSpec,
    fk: &ForwardKinematics,
    dsquash: &DVector<f64>,
    g_hand: &[Vector3<f64>],
) -> DVector<f64> {
    let mut out = DVector::zeros(spec.var_dim());
    for (k, g) in g_hand.iter().enumerate() {
        if g.norm_squared() != 0.0 {
            fk.accumulate_point_gradient(spec, k, g, &mut out);
        }
    }
    out.component_mul_assign(dsquash);
    out
}

/// Pushes per-cloud-point gradients through the displacement twist Jacobian
/// and the object squash derivative, yielding a gradient in the object's six
/// unconstrained coordinates.
pub(crate) fn chain_to_object(
    displaced: &DisplacedCloud,
    dsquash: &Vector6<f64>,
    g_obj: &[Vector3<f64>],
) -> Vector6<f64> {
    let mut acc = Vector6::zeros();
    for (n, g) in g_obj.iter().enumerate() {
        if g.norm_squared() != 0.0 {
            acc += displaced.point_jacobian(n).transpose() * g;
        }
    }
    acc.component_mul(dsquash)
}

// ---------------------------------------------------------------------------
// Player-coordinate API
// ---------------------------------------------------------------------------

/// Forward pass shared by the omega-level evaluations.
struct SceneAtOmega {
    fk: ForwardKinematics,
    dsquash_r: DVector<f64>,
    displaced: DisplacedCloud,
    dsquash_o: Vector6<f64>,
}

fn scene_at_omega(
    spec: &HandSpec,
    cloud: &ObjectCloud,
    bounds: &EscapeBounds,
    wr: &RobotVariable,
    wo: &ObjectVariable,
) -> Result<SceneAtOmega> {
    let state = squash_robot(spec, wr)?;
    let fk = forward_kinematics(spec, &state)?;
    let delta = squash_object(bounds, wo)?;
    let displaced = transform_object(cloud, &delta)?;
    Ok(SceneAtOmega {
        fk,
        dsquash_r: squash_robot_derivative(spec, wr),
        displaced,
        dsquash_o: squash_object_derivative(bounds, wo),
    })
}

/// All hand-object clearances at the squashed configuration: sphere pairs
/// over points x cloud, then tube pairs over links x cloud.
pub fn phi(
    spec: &HandSpec,
    cloud: &ObjectCloud,
    bounds: &EscapeBounds,
    wr: &RobotVariable,
    wo: &ObjectVariable,
) -> Result<ClearanceVector> {
    let scene = scene_at_omega(spec, cloud, bounds, wr, wo)?;
    let n = cloud.len();
    let mut values = DVector::zeros(pair_count(spec, n));
    pair_clearances_into(
        spec,
        &scene.fk.points,
        &scene.displaced.points,
        values.as_mut_slice(),
    );
    let index_map = (0..values.len())
        .map(|i| pair_identity(spec, n, i))
        .collect();
    Ok(ClearanceVector { values, index_map })
}

/// Smallest hand-object clearance with its gradient in both players'
/// coordinates. The subgradient at a tie follows the lowest entry index.
pub fn phi_min_with_gradient(
    spec: &HandSpec,
    cloud: &ObjectCloud,
    bounds: &EscapeBounds,
    wr: &RobotVariable,
    wo: &ObjectVariable,
) -> Result<(f64, DVector<f64>, Vector6<f64>)> {
    let scene = scene_at_omega(spec, cloud, bounds, wr, wo)?;
    let (value, idx) = pair_min(spec, &scene.fk.points, &scene.displaced.points);
    let mut g_hand = vec![Vector3::zeros(); spec.point_count()];
    let mut g_obj = vec![Vector3::zeros(); cloud.len()];
    pair_clearance_vjp(
        spec,
        &scene.fk.points,
        &scene.displaced.points,
        idx,
        1.0,
        Some(&mut g_hand),
        Some(&mut g_obj),
    );
    let grad_r = chain_to_robot(spec, &scene.fk, &scene.dsquash_r, &g_hand);
    let grad_o = chain_to_object(&scene.displaced, &scene.dsquash_o, &g_obj);
    Ok((value, grad_r, grad_o))
}

/// Declared self-collision clearances at the squashed configuration.
pub fn phi_self(spec: &HandSpec, wr: &RobotVariable) -> Result<ClearanceVector> {
    let state = squash_robot(spec, wr)?;
    let fk = forward_kinematics(spec, &state)?;
    let mut values = DVector::zeros(spec.self_pairs.len());
    self_clearances_into(spec, &fk.points, values.as_mut_slice());
    let index_map = (0..spec.self_pairs.len())
        .map(|pair| ClearanceId::SelfPair { pair })
        .collect();
    Ok(ClearanceVector { values, index_map })
}

/// Fingertip proximity objective and its gradient in the hand coordinates.
///
/// Each fingertip contributes half the squared positive part of its nearest
/// cloud distance minus its contact threshold, so the objective is zero
/// exactly when every fingertip is within threshold of the (displaced)
/// cloud.
pub fn grasp_objective(
    spec: &HandSpec,
    cloud: &ObjectCloud,
    bounds: &EscapeBounds,
    wr: &RobotVariable,
    wo: &ObjectVariable,
) -> Result<(f64, DVector<f64>)> {
    let scene = scene_at_omega(spec, cloud, bounds, wr, wo)?;
    let value = grasp_value(spec, &scene.fk.points, &scene.displaced.points);
    let mut g_hand = vec![Vector3::zeros(); spec.point_count()];
    grasp_vjp(
        spec,
        &scene.fk.points,
        &scene.displaced.points,
        1.0,
        &mut g_hand,
    );
    let grad = chain_to_robot(spec, &scene.fk, &scene.dsquash_r, &g_hand);
    Ok((value, grad))
}
