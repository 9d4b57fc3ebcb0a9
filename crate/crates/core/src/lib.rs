//! Online policy optimization in obliviously adversarial tabular episodic MDPs.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`]: the true environment, exact policy evaluation, trajectory
//!   sampling and the best static policy in hindsight.
//! - [`olo`]: online linear optimization strategies over the simplex
//!   (polynomial potential, exponential potential, AdaHedge).
//! - [`learner`]: the APO-MVP learner, which runs one OLO instance per
//!   (stage, state) on optimistic advantage estimates computed from a kernel
//!   estimate and bonuses that stay frozen within doubling epochs.
//! - [`adversary`]: generators of fixed-in-advance reward sequences.
//! - [`harness`]: experiment orchestration, exact regret traces, CSV and SVG
//!   output, and the command line entry point.
//!
//! Stages are zero-based throughout the API: stage `h` ranges over
//! `0..horizon`, and transition kernels exist for `h` in `0..horizon - 1`.

pub mod adversary;
pub mod error;
pub mod harness;
pub mod learner;
pub mod mdp;
pub mod olo;

pub use error::{Error, Result};
