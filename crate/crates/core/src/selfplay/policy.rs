//! What a policy sees and returns.
//!
//! A solver receives exactly the fields its mode allows: `(I, p, o)` for
//! abduction, `(I, p, a)` for deduction and `(I, visible pairs)` for
//! induction. The sampling seed accompanying each call carries no problem
//! information; it only makes stochastic policies reproducible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bank::Problem;
use crate::program::Value;
use crate::raster::ImageRef;
use crate::verify::{IoPair, Mode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("policy timed out after {0} s")]
    Timeout(u64),
    #[error("policy process failed: {0}")]
    Process(String),
    #[error("malformed policy response: {0}")]
    Protocol(String),
}

/// The solver's input for one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SolverView {
    Abduction { image: ImageRef, p: String, o: Value },
    Deduction { image: ImageRef, p: String, a: Value },
    Induction { image: ImageRef, visible: Vec<IoPair> },
}

impl SolverView {
    pub fn mode(&self) -> Mode {
        match self {
            SolverView::Abduction { .. } => Mode::Abduction,
            SolverView::Deduction { .. } => Mode::Deduction,
            SolverView::Induction { .. } => Mode::Induction,
        }
    }

    pub fn image(&self) -> &ImageRef {
        match self {
            SolverView::Abduction { image, .. }
            | SolverView::Deduction { image, .. }
            | SolverView::Induction { image, .. } => image,
        }
    }
}

/// Program handed to the induction proposer, with the argument it was
/// banked with as an example of the expected shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramSeed {
    pub p: String,
    pub a: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposeRequest {
    pub mode: Mode,
    pub image: ImageRef,
    pub references: Vec<Problem>,
    /// Set for induction only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub program: Option<ProgramSeed>,
    pub n_io: usize,
}

/// A single policy playing both roles.
///
/// Proposal text is JSON: `{"q", "p", "a"}` for abduction and deduction,
/// `{"io_pairs": [{"a"}, ...]}` (optionally with `"q"`) for induction.
/// Solve text is an argument literal, an output literal, or program source.
pub trait Policy: Send + Sync {
    fn name(&self) -> String;

    fn propose(&self, req: &ProposeRequest, seed: u64) -> Result<String, PolicyError>;

    fn solve(&self, view: &SolverView, seed: u64) -> Result<String, PolicyError>;

    /// Whether `solve` may be called from several threads at once without
    /// affecting results.
    fn parallel_safe(&self) -> bool {
        true
    }
}
