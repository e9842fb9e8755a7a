//! Exact simulation of a finite spin-l directional reference frame that is
//! repeatedly used to measure, or interact unitarily with, polarized
//! spin-1/2 particles.

pub mod analytic;
pub mod channels;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod spin;
pub mod states;
pub mod trajectory;

pub use channels::Outcome;
pub use error::{QrfError, Result};
pub use metrics::FrameSummary;
pub use spin::{SpinOperators, SpinQuantum};
pub use states::{DensityMatrix, SourceQubit};
pub use trajectory::CorrectionStrategy;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
