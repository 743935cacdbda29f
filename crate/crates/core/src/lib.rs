//! Core of a tactile-servoed manipulation simulator for one-DoF articulated
//! objects.
//!
//! The crate is `no_std` with `alloc`. It holds the rigid-body geometry, the
//! marker contact model, articulated trajectories, the quasi-static world,
//! the execute/recover controller and the two comparison baselines.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod articulation;
pub mod baselines;
pub mod contact;
pub mod controller;
pub mod kabsch;
pub mod metrics;
pub mod se3;
pub mod sim;

pub use articulation::{ArticulationError, JointKind, Trajectory};
pub use contact::{ContactError, ContactSet, DeviationSummary, EpsilonLadder, MarkerGrid, MarkerId};
pub use se3::{AugmentedPoint, Pose};
