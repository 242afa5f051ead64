//! Constrained minimization for both players: an augmented Lagrangian outer
//! loop drives a limited-memory quasi-Newton inner minimizer, turning each
//! player's inequality-constrained problem into a sequence of smooth
//! unconstrained ones.
//!
//! The hand player minimizes the fingertip proximity objective subject to
//! three constraint blocks (stacked as `C(x) <= 0`): the smallest clearance
//! against the displaced object must be non-positive (the hand blocks the
//! attempted displacement), self-collision clearances must be non-negative,
//! and every clearance against the object at its nominal pose must be
//! non-negative. The object player maximizes its squared displacement norm
//! (implemented as minimizing the negation, so both players share this
//! engine) subject to every clearance staying non-negative.

use nalgebra::{DVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::contact::{
    chain_to_object, chain_to_robot, grasp_value, grasp_vjp, pair_clearance_vjp,
    pair_clearances_into, pair_count, pair_min, self_clearance_vjp, self_clearances_into,
};
use crate::error::Error;
use crate::hand::{
    forward_kinematics, squash_robot, squash_robot_derivative, HandSpec, RobotVariable,
};
use crate::object::{
    squash_object, squash_object_derivative, transform_object, EscapeBounds, ObjectCloud,
    ObjectVariable,
};
use crate::{PointSet, Result};

/// Armijo sufficient-decrease coefficient for the backtracking line search.
const ARMIJO_C1: f64 = 1e-4;

/// Multiplicative step shrink per backtrack.
const BACKTRACK_SHRINK: f64 = 0.5;

/// Maximum number of step shrinks before the line search gives up.
const MAX_BACKTRACKS: usize = 40;

/// Settings for one augmented Lagrangian solve (shared by both players).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlConfig {
    /// Outer iteration cap.
    pub max_outer: usize,
    /// Penalty growth factor applied after every outer iteration.
    pub penalty_growth: f64,
    /// Initial penalty coefficient.
    pub penalty_init: f64,
    /// Initial value broadcast to every constraint multiplier.
    pub multiplier_init: f64,
    /// Stop when the largest constraint violation falls to this level.
    pub constraint_tol: f64,
    /// Stop when the merit value changes by less than this fraction
    /// (relative to the previous merit, floored at one) per outer iteration.
    pub rel_improve_tol: f64,
    /// Inner minimizer iteration cap per outer iteration.
    pub inner_max_iters: usize,
    /// Inner minimizer gradient infinity-norm target.
    pub inner_grad_tol: f64,
    /// Quasi-Newton history length.
    pub memory: usize,
}

impl Default for AlConfig {
    fn default() -> Self {
        AlConfig {
            max_outer: 100,
            penalty_growth: 10.0,
            penalty_init: 1.0,
            multiplier_init: 0.0,
            constraint_tol: 1e-5,
            rel_improve_tol: 1e-2,
            inner_max_iters: 200,
            inner_grad_tol: 1e-6,
            memory: 10,
        }
    }
}

impl AlConfig {
    pub fn validate(&self) -> Result<()> {
        let complain = |what: &str| {
            Err(Error::OutOfBounds(format!(
                "augmented Lagrangian config: {what}"
            )))
        };
        if !(self.penalty_growth > 1.0) {
            return complain("penalty growth must exceed 1");
        }
        if !(self.penalty_init > 0.0 && self.penalty_init.is_finite()) {
            return complain("initial penalty must be positive");
        }
        if !(self.multiplier_init >= 0.0 && self.multiplier_init.is_finite()) {
            return complain("initial multiplier must be non-negative");
        }
        if !(self.constraint_tol > 0.0) {
            return complain("constraint tolerance must be positive");
        }
        if !(self.rel_improve_tol > 0.0) {
            return complain("relative improvement tolerance must be positive");
        }
        if !(self.inner_grad_tol > 0.0) {
            return complain("inner gradient tolerance must be positive");
        }
        if self.max_outer == 0 || self.inner_max_iters == 0 || self.memory == 0 {
            return complain("iteration caps and memory must be at least 1");
        }
        Ok(())
    }
}

/// Why an augmented Lagrangian solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ToleranceMet,
    RelativeImprovementStalled,
    IterationCap,
}

/// Result of one augmented Lagrangian solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    /// Final decision vector (unconstrained coordinates).
    pub argmin: DVector<f64>,
    /// True objective value at `argmin` (not the merit).
    pub objective: f64,
    /// Largest constraint violation at `argmin`.
    pub max_violation: f64,
    /// Completed outer iterations.
    pub outer_iters: usize,
    /// Inner minimizer iterations summed over all outer iterations.
    pub inner_iters_total: usize,
    pub termination: Termination,
    /// A non-finite value or gradient was encountered; `argmin` is the last
    /// finite iterate.
    pub aborted: bool,
    /// Penalty coefficient in effect during each outer iteration.
    pub penalty_trace: Vec<f64>,
    /// Largest violation after each outer iteration.
    pub violation_trace: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Inner minimizer
// ---------------------------------------------------------------------------

/// A smooth scalar function the inner minimizer can evaluate, with a cheaper
/// value-only path for line searches.
pub trait Objective {
    fn value(&mut self, x: &DVector<f64>) -> Result<f64>;
    fn value_and_gradient(&mut self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)>;
}

/// Outcome of the inner minimizer.
#[derive(Debug, Clone)]
pub struct InnerReport {
    pub x: DVector<f64>,
    pub value: f64,
    /// Infinity norm of the gradient at `x` (stale if `aborted`).
    pub grad_norm: f64,
    /// Accepted steps.
    pub iterations: usize,
    /// A non-finite value or gradient appeared at an accepted point.
    pub aborted: bool,
}

/// Limited-memory quasi-Newton minimization (two-loop recursion) with a
/// backtracking Armijo line search.
///
/// Stops on the gradient tolerance, the iteration cap, or a failed line
/// search. The returned point never has a value above the starting one:
/// steps are only ever accepted on sufficient decrease.
pub fn lm_quasi_newton_minimize<O: Objective>(
    obj: &mut O,
    x0: &DVector<f64>,
    cfg: &AlConfig,
) -> Result<InnerReport> {
    let (mut f, mut g) = obj.value_and_gradient(x0)?;
    if !f.is_finite() || !g.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            context: "minimizer starting point",
        });
    }
    let mut x = x0.clone();
    let mut history: VecDeque<(DVector<f64>, DVector<f64>, f64)> =
        VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;
    let mut aborted = false;

    for _ in 0..cfg.inner_max_iters {
        if g.amax() <= cfg.inner_grad_tol {
            break;
        }
        let mut d = two_loop_direction(&history, &g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) || !d.iter().all(|v| v.is_finite()) {
            // The curvature pairs stopped describing a positive definite
            // model; fall back to steepest descent.
            history.clear();
            d = -&g;
            slope = g.dot(&d);
        }

        let mut step = 1.0;
        let mut accepted: Option<(DVector<f64>, f64)> = None;
        for _ in 0..=MAX_BACKTRACKS {
            let cand = &x + step * &d;
            let fc = obj.value(&cand)?;
            if fc.is_finite() && fc <= f + ARMIJO_C1 * step * slope {
                accepted = Some((cand, fc));
                break;
            }
            step *= BACKTRACK_SHRINK;
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        iterations += 1;
        let (_, g_new) = obj.value_and_gradient(&x_new)?;
        if !g_new.iter().all(|v| v.is_finite()) {
            x = x_new;
            f = f_new;
            aborted = true;
            break;
        }
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        } else {
            // A step without positive curvature means the stored pairs no
            // longer describe the local Hessian; keeping them causes long
            // stalls with tiny accepted steps. Restart the model instead.
            history.clear();
        }
        x = x_new;
        f = f_new;
        g = g_new;
    }

    Ok(InnerReport {
        grad_norm: g.amax(),
        value: f,
        x,
        iterations,
        aborted,
    })
}

/// Two-loop recursion producing the quasi-Newton descent direction.
fn two_loop_direction(
    history: &VecDeque<(DVector<f64>, DVector<f64>, f64)>,
    g: &DVector<f64>,
) -> DVector<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, r) in history.iter().rev() {
        let a = r * s.dot(&q);
        q.axpy(-a, y, 1.0);
        alphas.push(a);
    }
    let gamma = history
        .back()
        .map(|(s, y, _)| s.dot(y) / y.dot(y))
        .unwrap_or(1.0);
    let mut r_vec = gamma * q;
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * y.dot(&r_vec);
        r_vec.axpy(a - b, s, 1.0);
    }
    -r_vec
}

// ---------------------------------------------------------------------------
// Augmented Lagrangian engine
// ---------------------------------------------------------------------------

/// An objective with inequality constraints `C(x) <= 0`.
///
/// `weighted_gradient` returns the gradient of `f(x) + weights . C(x)` in one
/// pass; the engine chooses the weights from the multipliers and the active
/// set, so implementations never see the merit bookkeeping.
pub trait ConstrainedProblem {
    fn dim(&self) -> usize;
    fn constraint_count(&self) -> usize;
    fn evaluate(&mut self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)>;
    fn weighted_gradient(
        &mut self,
        x: &DVector<f64>,
        weights: &DVector<f64>,
    ) -> Result<DVector<f64>>;
}

fn merit_value(f: f64, c: &DVector<f64>, mu: &DVector<f64>, rho: f64) -> f64 {
    let mut v = f;
    for i in 0..c.len() {
        let viol = c[i].max(0.0);
        v += mu[i] * viol + 0.5 * rho * viol * viol;
    }
    v
}

/// Adapter presenting the merit of a constrained problem (at fixed
/// multipliers and penalty) as a smooth objective.
struct AlMerit<'a, P: ConstrainedProblem> {
    problem: &'a mut P,
    mu: &'a DVector<f64>,
    rho: f64,
}

impl<P: ConstrainedProblem> Objective for AlMerit<'_, P> {
    fn value(&mut self, x: &DVector<f64>) -> Result<f64> {
        let (f, c) = self.problem.evaluate(x)?;
        Ok(merit_value(f, &c, self.mu, self.rho))
    }

    fn value_and_gradient(&mut self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let (f, c) = self.problem.evaluate(x)?;
        let val = merit_value(f, &c, self.mu, self.rho);
        // Inactive constraints get weight zero; at the kink itself the
        // one-sided derivative 0 keeps line searches reproducible.
        let weights = DVector::from_fn(c.len(), |i, _| {
            if c[i] > 0.0 {
                self.mu[i] + self.rho * c[i]
            } else {
                0.0
            }
        });
        let grad = self.problem.weighted_gradient(x, &weights)?;
        Ok((val, grad))
    }
}

/// Minimizes a constrained problem through the augmented Lagrangian
/// schedule: inner minimization, first-order multiplier update with
/// projection to non-negative values, geometric penalty growth.
pub fn augmented_lagrangian_minimize<P: ConstrainedProblem>(
    problem: &mut P,
    x0: &DVector<f64>,
    cfg: &AlConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            what: "solve starting point",
            expected: problem.dim(),
            got: x0.len(),
        });
    }
    let m = problem.constraint_count();
    let mut x = x0.clone();
    let mut mu = DVector::from_element(m, cfg.multiplier_init);
    let mut rho = cfg.penalty_init;
    let mut prev_merit: Option<f64> = None;
    let mut inner_total = 0;
    let mut aborted = false;
    let mut penalty_trace = Vec::new();
    let mut violation_trace = Vec::new();
    let mut termination = Termination::IterationCap;
    let mut outer_done = 0;
    let mut objective = f64::NAN;
    let mut max_violation = f64::NAN;

    for outer in 0..cfg.max_outer {
        penalty_trace.push(rho);
        let inner = {
            let mut merit = AlMerit {
                problem: &mut *problem,
                mu: &mu,
                rho,
            };
            lm_quasi_newton_minimize(&mut merit, &x, cfg)
        }
        .map_err(|e| Error::Solver {
            outer,
            source: Box::new(e),
        })?;
        x = inner.x;
        inner_total += inner.iterations;
        aborted |= inner.aborted;

        let (f, c) = problem.evaluate(&x).map_err(|e| Error::Solver {
            outer,
            source: Box::new(e),
        })?;
        let viol = c.map(|v| v.max(0.0));
        max_violation = if m == 0 { 0.0 } else { viol.amax() };
        objective = f;
        let merit = merit_value(f, &c, &mu, rho);
        violation_trace.push(max_violation);
        outer_done = outer + 1;

        // First-order multiplier update (projected) and penalty growth.
        mu = (&mu + rho * &viol).map(|v| v.max(0.0));
        rho *= cfg.penalty_growth;

        if max_violation <= cfg.constraint_tol {
            termination = Termination::ToleranceMet;
            break;
        }
        if let Some(prev) = prev_merit {
            if (merit - prev).abs() / prev.abs().max(1.0) < cfg.rel_improve_tol {
                termination = Termination::RelativeImprovementStalled;
                break;
            }
        }
        prev_merit = Some(merit);
    }

    Ok(SolveReport {
        argmin: x,
        objective,
        max_violation,
        outer_iters: outer_done,
        inner_iters_total: inner_total,
        termination,
        aborted,
        penalty_trace,
        violation_trace,
    })
}

// ---------------------------------------------------------------------------
// Player problems
// ---------------------------------------------------------------------------

/// Hand player: minimize fingertip proximity subject to blocking the
/// object's attempted displacement while staying collision-free against the
/// nominal object pose and itself.
///
/// Constraint stack (all `<= 0`): entry 0 is the smallest clearance against
/// the displaced cloud, then negated self clearances, then negated
/// clearances against the nominal cloud.
pub struct Player1Problem<'a> {
    spec: &'a HandSpec,
    cloud: &'a ObjectCloud,
    /// Object points displaced by the adversary's fixed twist.
    displaced: PointSet,
}

impl<'a> Player1Problem<'a> {
    pub fn new(
        spec: &'a HandSpec,
        cloud: &'a ObjectCloud,
        bounds: &EscapeBounds,
        wo_fixed: &ObjectVariable,
    ) -> Result<Self> {
        let delta = squash_object(bounds, wo_fixed)?;
        let displaced = transform_object(cloud, &delta)?.points;
        Ok(Player1Problem {
            spec,
            cloud,
            displaced,
        })
    }
}

impl ConstrainedProblem for Player1Problem<'_> {
    fn dim(&self) -> usize {
        self.spec.var_dim()
    }

    fn constraint_count(&self) -> usize {
        1 + self.spec.self_pairs.len() + pair_count(self.spec, self.cloud.len())
    }

    fn evaluate(&mut self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let wr = RobotVariable { omega: x.clone() };
        let state = squash_robot(self.spec, &wr)?;
        let fk = forward_kinematics(self.spec, &state)?;
        let f = grasp_value(self.spec, &fk.points, &self.displaced);

        let s_count = self.spec.self_pairs.len();
        let mut c = DVector::zeros(self.constraint_count());
        c[0] = pair_min(self.spec, &fk.points, &self.displaced).0;
        let tail = c.as_mut_slice();
        self_clearances_into(self.spec, &fk.points, &mut tail[1..1 + s_count]);
        pair_clearances_into(
            self.spec,
            &fk.points,
            self.cloud.points(),
            &mut tail[1 + s_count..],
        );
        for v in tail[1..].iter_mut() {
            *v = -*v;
        }
        Ok((f, c))
    }

    fn weighted_gradient(
        &mut self,
        x: &DVector<f64>,
        weights: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let wr = RobotVariable { omega: x.clone() };
        let state = squash_robot(self.spec, &wr)?;
        let fk = forward_kinematics(self.spec, &state)?;
        let dsquash = squash_robot_derivative(self.spec, &wr);

        let mut g_hand = vec![Vector3::zeros(); self.spec.point_count()];
        grasp_vjp(self.spec, &fk.points, &self.displaced, 1.0, &mut g_hand);
        if weights[0] != 0.0 {
            let (_, idx) = pair_min(self.spec, &fk.points, &self.displaced);
            pair_clearance_vjp(
                self.spec,
                &fk.points,
                &self.displaced,
                idx,
                weights[0],
                Some(&mut g_hand),
                None,
            );
        }
        let s_count = self.spec.self_pairs.len();
        for s in 0..s_count {
            let w = weights[1 + s];
            if w != 0.0 {
                self_clearance_vjp(self.spec, &fk.points, s, -w, &mut g_hand);
            }
        }
        let base = 1 + s_count;
        for p in 0..pair_count(self.spec, self.cloud.len()) {
            let w = weights[base + p];
            if w != 0.0 {
                pair_clearance_vjp(
                    self.spec,
                    &fk.points,
                    self.cloud.points(),
                    p,
                    -w,
                    Some(&mut g_hand),
                    None,
                );
            }
        }
        Ok(chain_to_robot(self.spec, &fk, &dsquash, &g_hand))
    }
}

/// Object player: maximize the squared displacement norm (minimized here as
/// its negation) while keeping every clearance against the frozen hand
/// non-negative.
pub struct Player2Problem<'a> {
    spec: &'a HandSpec,
    cloud: &'a ObjectCloud,
    bounds: EscapeBounds,
    /// Hand collision points at the frozen hand configuration.
    hand_pts: PointSet,
}

impl<'a> Player2Problem<'a> {
    pub fn new(
        spec: &'a HandSpec,
        cloud: &'a ObjectCloud,
        bounds: &EscapeBounds,
        wr_fixed: &RobotVariable,
    ) -> Result<Self> {
        bounds.validate()?;
        let state = squash_robot(spec, wr_fixed)?;
        let hand_pts = forward_kinematics(spec, &state)?.points;
        Ok(Player2Problem {
            spec,
            cloud,
            bounds: *bounds,
            hand_pts,
        })
    }

    fn object_variable(&self, x: &DVector<f64>) -> Result<ObjectVariable> {
        if x.len() != 6 {
            return Err(Error::DimensionMismatch {
                what: "object variable",
                expected: 6,
                got: x.len(),
            });
        }
        Ok(ObjectVariable {
            omega: Vector6::from_column_slice(x.as_slice()),
        })
    }
}

impl ConstrainedProblem for Player2Problem<'_> {
    fn dim(&self) -> usize {
        6
    }

    fn constraint_count(&self) -> usize {
        pair_count(self.spec, self.cloud.len())
    }

    fn evaluate(&mut self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let wo = self.object_variable(x)?;
        let delta = squash_object(&self.bounds, &wo)?;
        let displaced = transform_object(self.cloud, &delta)?;
        let f = -delta.to_vector6().norm_squared();
        let mut c = DVector::zeros(self.constraint_count());
        pair_clearances_into(
            self.spec,
            &self.hand_pts,
            &displaced.points,
            c.as_mut_slice(),
        );
        c.neg_mut();
        Ok((f, c))
    }

    fn weighted_gradient(
        &mut self,
        x: &DVector<f64>,
        weights: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let wo = self.object_variable(x)?;
        let delta = squash_object(&self.bounds, &wo)?;
        let displaced = transform_object(self.cloud, &delta)?;
        let dsquash = squash_object_derivative(&self.bounds, &wo);
        let dv = delta.to_vector6();
        let mut grad = Vector6::from_fn(|i, _| -2.0 * dv[i] * dsquash[i]);

        let mut g_obj = vec![Vector3::zeros(); self.cloud.len()];
        let mut any = false;
        for p in 0..weights.len() {
            if weights[p] != 0.0 {
                pair_clearance_vjp(
                    self.spec,
                    &self.hand_pts,
                    &displaced.points,
                    p,
                    -weights[p],
                    None,
                    Some(&mut g_obj),
                );
                any = true;
            }
        }
        if any {
            grad += chain_to_object(&displaced, &dsquash, &g_obj);
        }
        Ok(DVector::from_column_slice(grad.as_slice()))
    }
}

/// Solves the hand player's best response to a fixed object displacement.
pub fn solve_player1(
    spec: &HandSpec,
    cloud: &ObjectCloud,
    bounds: &EscapeBounds,
    wr0: &RobotVariable,
    wo_fixed: &ObjectVariable,
    cfg: &AlConfig,
) -> Result<SolveReport> {
    let mut problem = Player1Problem::new(spec, cloud, bounds, wo_fixed)?;
    augmented_lagrangian_minimize(&mut problem, &wr0.omega, cfg)
}

/// Solves the object player's best escape attempt against a frozen hand.
pub fn solve_player2(
    spec: &HandSpec,
    cloud: &ObjectCloud,
    bounds: &EscapeBounds,
    wo0: &ObjectVariable,
    wr_fixed: &RobotVariable,
    cfg: &AlConfig,
) -> Result<SolveReport> {
    let mut problem = Player2Problem::new(spec, cloud, bounds, wr_fixed)?;
    let x0 = DVector::from_column_slice(wo0.omega.as_slice());
    let report = augmented_lagrangian_minimize(&mut problem, &x0, cfg)?;
    if cfg!(debug_assertions) {
        // The squash construction keeps the displacement strictly inside the
        // box for any finite coordinates.
        let wo = ObjectVariable {
            omega: Vector6::from_column_slice(report.argmin.as_slice()),
        };
        let d = squash_object(bounds, &wo)?.to_vector6();
        let eps = bounds.as_vector();
        for i in 0..6 {
            debug_assert!(d[i].abs() < eps[i], "displacement reached the box bound");
        }
    }
    Ok(report)
}
