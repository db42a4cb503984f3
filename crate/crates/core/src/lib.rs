//! Nonparametric goodness-of-fit testing for the triggering kernel of
//! self-exciting point processes.
//!
//! Two samples of event sequences are mixed pairwise and fitted with a
//! shared piecewise-constant kernel; the generalized score statistic of the
//! equal-kernel constraint is then asymptotically chi-square.

pub mod asymptotics;
pub mod baselines;
pub mod calibration;
pub mod em;
pub mod error;
pub mod gs;
pub mod harness;
pub mod kernel;
pub mod likelihood;
pub mod rng;
pub mod sequence;
pub mod simulate;
pub mod theta;

pub use error::{Error, Result};
pub use kernel::{BinGrid, HawkesModel, TriggeringKernel};
pub use sequence::{merge_sequences, validate_sequence, EventSequence, Label, LabeledSequence};
pub use simulate::{simulate_batch, simulate_hawkes};
pub use theta::{ThetaFull, ThetaNull};
