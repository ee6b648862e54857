//! Multiagent deterministic actor-critic with a bidirectional recurrent
//! communication channel, trained off-policy with replay and target networks.
//!
//! The workspace is organized as:
//! - [`autodiff`]: tape-based reverse-mode differentiation and Adam
//! - [`nets`]: actor/critic networks and the alternative communication modes
//! - [`learner`]: exploration, replay, the training loop, and the policy
//!   gradient verification harness
//! - [`envs`]: a 2D combat micro-simulator and the guessing-sum game
//! - [`harness`]: configuration, CLI commands, logging, and checkpoints

pub mod autodiff;
pub mod nets;

pub use autodiff::{AdamState, Gradients, GradCheckReport, Tape, TapeError, Tensor, Var};
