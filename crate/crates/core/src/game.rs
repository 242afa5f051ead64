//! The two-player game: the hand repeatedly adapts to the object's best
//! escape attempt until the attempt collapses below tolerance (a firm
//! grasp), progress stops, or the players start trading the same pair of
//! answers back and forth.
//!
//! Besides the alternating loop this module owns pose initialization (palm
//! aligned to the cloud's principal frame), a brute-force escape search
//! that double-checks the game's verdict without going through either
//! player's optimizer, and the bookkeeping that compares the two.
//!
//! A note on units: an escape twist mixes meters (translation) and radians
//! (rotation). The loop's norms are plain Euclidean norms over the raw
//! 6-vector, matching the squared-norm objective the object player
//! maximizes; no metric weighting is applied anywhere.

use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use crate::contact::{pair_clearances_into, pair_count};
use crate::error::Error;
use crate::hand::{
    forward_kinematics, squash_robot, unsquash_robot, HandSpec, RobotState, RobotVariable,
};
use crate::object::{squash_object, EscapeBounds, ObjectCloud, ObjectVariable};
use crate::se3::{pca_object_frame, twist_exp, Twist};
use crate::solver::{solve_player1, solve_player2, AlConfig, SolveReport};
use crate::{PointSet, Result};

/// Two sampled escape-norm values this close count as "the same" for cycle
/// detection, and adjacent values must differ by more than this to count as
/// genuine alternation rather than noise.
const CYCLE_MATCH_TOL: f64 = 1e-4;

/// Reporting threshold for the brute-force search: a feasible twist must
/// beat this norm to count as an escape.
const ESCAPE_NORM_FLOOR: f64 = 1e-6;

/// How far inside its interval a base coordinate is placed when the
/// principal-frame initialization lands outside the limits.
const INIT_CLAMP_MARGIN: f64 = 1e-3;

/// The object player's first-round starting coordinates. Zero displacement
/// is a stationary point of the squared-norm objective (and feasible
/// whenever the grasp is collision-free), so starting the very first solve
/// exactly at zero would end it immediately; this fixed alternating-sign
/// offset breaks the tie identically on every run.
const FIRST_ROUND_OFFSET: f64 = 0.05;

/// Settings for one full game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    /// Round cap.
    pub max_rounds: usize,
    /// The grasp is firm when the escape norm drops below this.
    pub firm_tol: f64,
    /// The game stalls when the escape norm fails to grow by at least this
    /// much between rounds.
    pub stall_tol: f64,
    /// Escape displacement box.
    pub epsilon_bounds: EscapeBounds,
    /// Number of trailing rounds inspected for period-2 alternation.
    pub cycle_window: usize,
    /// Restart the hand player from the principal-frame pose every round
    /// instead of warm-starting from its previous answer.
    pub fresh_player1_starts: bool,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            max_rounds: 10,
            firm_tol: 1e-3,
            stall_tol: 1e-5,
            epsilon_bounds: EscapeBounds::default(),
            cycle_window: 3,
            fresh_player1_starts: false,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 {
            return Err(Error::OutOfBounds(
                "game config: round cap must be at least 1".into(),
            ));
        }
        if !(self.firm_tol > 0.0 && self.stall_tol > 0.0) {
            return Err(Error::OutOfBounds(
                "game config: tolerances must be positive".into(),
            ));
        }
        if self.cycle_window < 3 {
            return Err(Error::OutOfBounds(
                "game config: cycle window must cover at least 3 rounds".into(),
            ));
        }
        self.epsilon_bounds.validate()
    }
}

/// How a game ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameOutcome {
    FirmGrasp,
    Stalled,
    CycleSuspected,
    RoundCap,
}

/// One completed round: both best responses, the resulting escape norm, and
/// the hand configuration the round settled on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub round: usize,
    pub player1: SolveReport,
    pub player2: SolveReport,
    /// Euclidean norm of the escape twist the object player found.
    pub delta_norm: f64,
    /// Hand configuration after this round's update.
    pub robot_state: RobotState,
}

/// Full record of a game.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameTrace {
    pub rounds: Vec<RoundRecord>,
    pub outcome: GameOutcome,
    /// Hand configuration from the last completed round.
    pub final_state: RobotState,
    /// Set when both players' inner solves hit non-finite values in the same
    /// round; the loop stops there and the trace ends at that round.
    pub aborted_round: Option<usize>,
}

/// Places the palm at the cloud's principal frame and every joint at its
/// interval midpoint, returning unconstrained coordinates plus a flag that
/// is set when any base coordinate had to be clamped into its limits.
pub fn initialize_pose(spec: &HandSpec, cloud: &ObjectCloud) -> Result<(RobotVariable, bool)> {
    let object_frame = pca_object_frame(cloud.points())?;
    let base = object_frame.compose(&spec.palm_offset.inverse());
    let mut state = RobotState::from_base_transform(&base, spec.midpoint_joints());
    let mut clamped = false;
    for i in 0..6 {
        let (lo, hi) = spec.coordinate_bounds(i);
        // Narrow intervals get a proportional margin so the clamp never
        // crosses the midpoint.
        let margin = INIT_CLAMP_MARGIN.min(0.25 * (hi - lo));
        let inside = state.base[i].clamp(lo + margin, hi - margin);
        if inside != state.base[i] {
            state.base[i] = inside;
            clamped = true;
        }
    }
    let (var, ulp_clamped) = unsquash_robot(spec, &state)?;
    Ok((var, clamped || ulp_clamped))
}

/// Period-2 alternation test over the trailing `window` escape norms: values
/// two apart agree within tolerance while adjacent values genuinely differ.
fn period_two_cycle(norms: &[f64], window: usize) -> bool {
    if norms.len() < window {
        return false;
    }
    let w = &norms[norms.len() - window..];
    let matches = w
        .iter()
        .skip(2)
        .zip(w.iter())
        .all(|(a, b)| (a - b).abs() <= CYCLE_MATCH_TOL);
    let alternates = w.windows(2).all(|p| (p[1] - p[0]).abs() > CYCLE_MATCH_TOL);
    matches && alternates
}

/// Plays the alternating game: each round the hand best-responds to the
/// object's previous escape attempt, then the object best-responds to the
/// new hand configuration. The round's escape norm decides termination, in
/// this order: firm grasp (norm below `firm_tol`), suspected cycle
/// (period-2 alternation), stall (norm failed to grow by `stall_tol`), and
/// finally the round cap.
///
/// Both players warm-start from their previous round's answer. A solve that
/// hits non-finite values is recorded through its report's `aborted` flag
/// and the game continues from the last finite iterate, unless both players
/// abort in the same round, which ends the game with a partial trace.
pub fn run_game(
    spec: &HandSpec,
    cloud: &ObjectCloud,
    cfg: &GameConfig,
    al1: &AlConfig,
    al2: &AlConfig,
    warm: Option<&RobotState>,
) -> Result<GameTrace> {
    cfg.validate()?;
    let bounds = cfg.epsilon_bounds;
    let fresh_start = initialize_pose(spec, cloud)?.0;
    let mut wr = match warm {
        Some(state) => unsquash_robot(spec, state)?.0,
        None => fresh_start.clone(),
    };
    // The hand's first opponent move is no displacement at all.
    let mut wo = ObjectVariable::zeros();

    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut norms: Vec<f64> = Vec::new();
    let mut outcome = GameOutcome::RoundCap;
    let mut aborted_round = None;
    let mut prev_norm = 0.0;

    for round in 1..=cfg.max_rounds {
        let p1_start = if cfg.fresh_player1_starts && round > 1 {
            fresh_start.clone()
        } else {
            wr.clone()
        };
        let p1 = solve_player1(spec, cloud, &bounds, &p1_start, &wo, al1)?;
        wr = RobotVariable {
            omega: p1.argmin.clone(),
        };

        let p2_start = if round == 1 {
            ObjectVariable {
                omega: Vector6::from_fn(|i, _| {
                    if i % 2 == 0 {
                        FIRST_ROUND_OFFSET
                    } else {
                        -FIRST_ROUND_OFFSET
                    }
                }),
            }
        } else {
            wo.clone()
        };
        let p2 = solve_player2(spec, cloud, &bounds, &p2_start, &wr, al2)?;
        wo = ObjectVariable {
            omega: Vector6::from_column_slice(p2.argmin.as_slice()),
        };

        let delta_norm = squash_object(&bounds, &wo)?.to_vector6().norm();
        let both_aborted = p1.aborted && p2.aborted;
        if both_aborted {
            aborted_round = Some(round);
        }
        rounds.push(RoundRecord {
            round,
            player1: p1,
            player2: p2,
            delta_norm,
            robot_state: squash_robot(spec, &wr)?,
        });
        norms.push(delta_norm);

        if delta_norm < cfg.firm_tol {
            outcome = GameOutcome::FirmGrasp;
            break;
        }
        if period_two_cycle(&norms, cfg.cycle_window) {
            outcome = GameOutcome::CycleSuspected;
            break;
        }
        if delta_norm - prev_norm < cfg.stall_tol {
            outcome = GameOutcome::Stalled;
            break;
        }
        if both_aborted {
            break;
        }
        prev_norm = delta_norm;
    }

    let final_state = rounds
        .last()
        .map(|r| r.robot_state.clone())
        .expect("at least one round always runs");
    Ok(GameTrace {
        rounds,
        outcome,
        final_state,
        aborted_round,
    })
}

/// Low-discrepancy radical-inverse sequence value for `index` in `base`.
fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// The 12 signed coordinate directions followed by deterministic
/// low-discrepancy unit 6-vectors (radical-inverse uniforms pushed through
/// the Box-Muller map and normalized).
fn escape_directions(n_dirs: usize) -> Vec<Vector6<f64>> {
    let mut dirs = Vec::with_capacity(n_dirs);
    for i in 0..6 {
        for sign in [1.0, -1.0] {
            let mut u = Vector6::zeros();
            u[i] = sign;
            dirs.push(u);
        }
    }
    let mut index = 1u64;
    while dirs.len() < n_dirs {
        let mut z = Vector6::zeros();
        for (k, (b1, b2)) in [(2u64, 3u64), (5, 7), (11, 13)].iter().enumerate() {
            let u1 = halton(index, *b1);
            let u2 = halton(index, *b2);
            let radius = (-2.0 * u1.ln()).sqrt();
            let angle = std::f64::consts::TAU * u2;
            z[2 * k] = radius * angle.cos();
            z[2 * k + 1] = radius * angle.sin();
        }
        index += 1;
        let norm = z.norm();
        if norm > 1e-9 {
            dirs.push(z / norm);
        }
    }
    dirs
}

/// Exhaustive escape check that shares nothing with the players' solvers:
/// it applies candidate twists directly to the cloud and inspects raw
/// clearances against the hand at `x`.
///
/// Directions are the 12 signed axes plus low-discrepancy unit twists; each
/// is scaled to the largest magnitude that keeps every component inside the
/// `eps` box, then bisected (`n_mags` steps) for the largest collision-free
/// magnitude, with a coarse outside-in scan as fallback when the feasible
/// set does not reach down to zero. Returns the feasible twist of largest
/// norm when that norm is meaningful (above 1e-6), preferring earlier
/// directions on exact ties.
pub fn brute_force_escape(
    spec: &HandSpec,
    cloud: &ObjectCloud,
    x: &RobotState,
    eps: &Vector6<f64>,
    n_dirs: usize,
    n_mags: usize,
) -> Result<Option<Twist>> {
    assert!(n_dirs >= 100, "direction budget too small to trust");
    assert!(n_mags >= 10, "magnitude budget too small to trust");
    let hand_pts = forward_kinematics(spec, x)?.points;
    let mut buf = vec![0.0; pair_count(spec, cloud.len())];

    let feasible = |delta: Vector6<f64>, buf: &mut [f64]| -> Result<bool> {
        let t = twist_exp(&Twist::from_vector6(&delta))?;
        let moved: PointSet = cloud.points().iter().map(|p| t.apply(p)).collect();
        pair_clearances_into(spec, &hand_pts, &moved, buf);
        Ok(buf.iter().all(|&v| v >= 0.0))
    };

    let mut best: Option<(f64, Vector6<f64>)> = None;
    for u in escape_directions(n_dirs) {
        let mut m_hi = f64::INFINITY;
        for i in 0..6 {
            if u[i] != 0.0 {
                m_hi = m_hi.min(eps[i] / u[i].abs());
            }
        }
        if !(m_hi > 0.0) || !m_hi.is_finite() {
            continue;
        }
        let mut found = 0.0;
        if feasible(m_hi * u, &mut buf)? {
            found = m_hi;
        } else {
            let (mut lo, mut lo_ok, mut hi) = (0.0, false, m_hi);
            for _ in 0..n_mags {
                let mid = 0.5 * (lo + hi);
                if feasible(mid * u, &mut buf)? {
                    lo = mid;
                    lo_ok = true;
                } else {
                    hi = mid;
                }
            }
            if lo_ok {
                found = lo;
            } else {
                // The ray may be blocked near the object but clear further
                // out; sweep outside-in for such detached pockets.
                for k in (1..=n_mags).rev() {
                    let m = m_hi * k as f64 / (n_mags + 1) as f64;
                    if feasible(m * u, &mut buf)? {
                        found = m;
                        break;
                    }
                }
            }
        }
        if found > best.map_or(ESCAPE_NORM_FLOOR, |(b, _)| b) {
            best = Some((found, found * u));
        }
    }
    Ok(best.map(|(_, d)| Twist::from_vector6(&d)))
}

/// Agreement between the game's verdict and the brute-force search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agreement {
    Consistent,
    /// The game called the grasp firm but an escape exists.
    FalseFirm,
    /// The game gave up although no escape exists.
    MissedFirm,
}

pub fn classify_agreement(trace: &GameTrace, oracle_escape: Option<&Twist>) -> Agreement {
    match (trace.outcome == GameOutcome::FirmGrasp, oracle_escape) {
        (true, None) => Agreement::Consistent,
        (true, Some(_)) => Agreement::FalseFirm,
        (false, None) => Agreement::MissedFirm,
        (false, Some(_)) => Agreement::Consistent,
    }
}
