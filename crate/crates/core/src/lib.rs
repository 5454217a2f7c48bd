//! Standard and implicit TD(λ) policy evaluation with linear function
//! approximation, SARSA(λ) control, step-size schedules, and closed-form
//! per-step stability audits of the TD gain matrices.

pub mod control;
pub mod envs;
pub mod error;
pub mod harness;
pub mod learners;
pub mod seed;
pub mod stability;
pub mod stepsize;
pub mod vector;

pub use error::{Error, Result};
pub use learners::{TdLearnerState, TdStepRecord, TdVariant, DIVERGENCE_THRESHOLD};
pub use vector::{DiscountSpec, EligibilityTrace, FeatureVector, Transition, WeightVector};
