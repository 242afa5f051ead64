//! Grasp synthesis engine that searches for hand configurations holding a
//! rigid object so that no small rigid motion of the object stays free of
//! collision.
//!
//! The search is organized as a two-player game. Player 1 (the hand) picks a
//! base pose and joint vector that minimizes a fingertip proximity objective
//! while staying collision-free against the resting object and against
//! itself, and while blocking the object's best known escape motion. Player 2
//! (the object) picks the largest rigid twist, bounded componentwise, that
//! keeps the displaced object out of collision with the hand. The two solves
//! alternate until the best escape shrinks below a firmness threshold or the
//! exchange stops making progress.
//!
//! Module layout:
//! - [`se3`]: twists, rigid transforms, exponential/log maps, principal-axis
//!   frames for point clouds.
//! - [`hand`]: articulated hand descriptions, forward kinematics with
//!   analytic Jacobians, bound squashing between optimizer coordinates and
//!   joint/base coordinates.
//! - [`object`]: object point clouds, rigid motion of the cloud, bounded
//!   twist squashing, loading and farthest-point downsampling.
//! - [`contact`]: sphere and tube clearances between hand geometry and the
//!   cloud, self-collision clearances, and the grasp proximity objective.
//! - [`solver`]: limited-memory quasi-Newton descent and an augmented
//!   Lagrangian loop shared by both players.
//! - [`game`]: the alternating best-response loop, its trace record, and a
//!   sampling-based escape oracle used to audit outcomes.

// Validation and line-search predicates are written as `!(x > c)` on purpose:
// the negation is true for NaN, so non-finite values fail the check instead
// of slipping through a plain `x <= c`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contact;
pub mod error;
#[cfg(test)]
pub(crate) mod fixtures;
pub mod game;
pub mod hand;
pub mod object;
pub mod se3;
pub mod solver;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Ordered world-space point positions, for hand geometry or object clouds.
pub type PointSet = Vec<nalgebra::Vector3<f64>>;
