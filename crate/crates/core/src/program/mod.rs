//! The spatial-program language: parser, static validator and deterministic
//! evaluator over the primitives library and the segmenter tool.
//!
//! Programs are s-expressions with two free variables, `image` and `arg`.
//! For example, a presence check is written
//!
//! ```text
//! (exists (segment image arg))
//! ```
//!
//! and the quadrant of the largest instance's centroid as
//!
//! ```text
//! (let ((ms (segment image arg)))
//!   (quadrant (centroid (nth ms (largest ms))) image))
//! ```

pub mod ast;
pub mod builtins;
mod eval;
pub mod validate;
pub mod value;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{parse, Callee, Expr, ExprKind, ParseError, Pos};
pub use builtins::{Builtin, Primitive, PrimitiveGroup};
pub use eval::{EvalError, ExecLimits, RuntimeErrorKind};
pub use validate::{validate, ValidationError};
pub use value::{value_equal, NotScorable, ScoreBranch, Value};

use crate::raster::ImageRef;
use crate::tools::{Manifest, SegmenterProvider, ToolError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// A parsed and validated program together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    source: String,
    ast: Expr,
}

impl Program {
    pub fn compile(source: &str) -> Result<Self, ProgramError> {
        let ast = parse(source)?;
        validate(&ast)?;
        Ok(Self {
            source: source.to_string(),
            ast,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    /// Evaluates with `image` and `arg` bound. The outcome is the final value
    /// or a failure; intermediates are never observable.
    pub fn evaluate(
        &self,
        image: &ImageRef,
        arg: &Value,
        seg: &dyn SegmenterProvider,
        limits: &ExecLimits,
    ) -> ExecOutcome {
        let mut ev = eval::Evaluator::new(image, arg, seg, *limits);
        ev.eval(&self.ast).map_err(ExecFailure::from)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ExecFailure {
    #[error("{0}")]
    ParseError(String),
    #[error("{0}")]
    ValidationError(String),
    #[error("runtime error {kind} in {head}")]
    RuntimeError { kind: RuntimeErrorKind, head: String },
    #[error("step budget exceeded")]
    StepBudgetExceeded,
    #[error("mask set exceeds the element limit")]
    MaskSetOverflow,
    #[error("repeated evaluation disagreed")]
    NonDeterministic,
}

impl From<EvalError> for ExecFailure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Runtime { kind, head } => ExecFailure::RuntimeError {
                kind,
                head: head.to_string(),
            },
            EvalError::StepBudgetExceeded => ExecFailure::StepBudgetExceeded,
            EvalError::MaskSetOverflow => ExecFailure::MaskSetOverflow,
        }
    }
}

impl From<ProgramError> for ExecFailure {
    fn from(e: ProgramError) -> Self {
        match e {
            ProgramError::Parse(p) => ExecFailure::ParseError(p.to_string()),
            ProgramError::Validation(v) => ExecFailure::ValidationError(v.to_string()),
        }
    }
}

/// Either the program's final value or why it produced none.
pub type ExecOutcome = Result<Value, ExecFailure>;

/// Why a proposed (program, argument, image) construction is unusable.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum Invalid {
    #[error("{0}")]
    Failed(ExecFailure),
    #[error("result of type {0} is not scorable")]
    NotScorable(String),
    #[error("unknown image {0:?}")]
    UnknownImage(String),
}

impl Invalid {
    /// Short machine-readable tag for logs.
    pub fn tag(&self) -> String {
        match self {
            Invalid::Failed(f) => match f {
                ExecFailure::RuntimeError { kind, .. } => format!("RuntimeError:{kind}"),
                ExecFailure::ParseError(_) => "ParseError".into(),
                ExecFailure::ValidationError(_) => "ValidationError".into(),
                ExecFailure::StepBudgetExceeded => "StepBudgetExceeded".into(),
                ExecFailure::MaskSetOverflow => "MaskSetOverflow".into(),
                ExecFailure::NonDeterministic => "NonDeterministic".into(),
            },
            Invalid::NotScorable(_) => "NotScorable".into(),
            Invalid::UnknownImage(_) => "UnknownImage".into(),
        }
    }
}

/// Everything needed to execute programs against a dataset.
#[derive(Clone, Copy)]
pub struct ExecContext<'a> {
    pub manifest: &'a Manifest,
    pub seg: &'a dyn SegmenterProvider,
    pub limits: ExecLimits,
}

impl fmt::Debug for ExecContext<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExecContext")
            .field("images", &self.manifest.len())
            .field("limits", &self.limits)
            .finish()
    }
}

impl<'a> ExecContext<'a> {
    pub fn new(manifest: &'a Manifest, seg: &'a dyn SegmenterProvider, limits: ExecLimits) -> Self {
        Self {
            manifest,
            seg,
            limits,
        }
    }

    pub fn image(&self, id: &str) -> Result<&'a ImageRef, ToolError> {
        self.manifest.get(id)
    }

    /// Compiles and evaluates source text in one go.
    pub fn run(&self, source: &str, image: &ImageRef, arg: &Value) -> ExecOutcome {
        let prog = Program::compile(source)?;
        prog.evaluate(image, arg, self.seg, &self.limits)
    }

    pub fn check_validity(&self, source: &str, image_id: &str, arg: &Value) -> Result<Value, Invalid> {
        let image = self
            .image(image_id)
            .map_err(|_| Invalid::UnknownImage(image_id.to_string()))?;
        check_problem_validity(source, image, arg, self.seg, &self.limits)
    }
}

/// Admission check for proposals: the program must compile, evaluate twice
/// to bit-identical results, and produce a scorable value.
pub fn check_problem_validity(
    source: &str,
    image: &ImageRef,
    arg: &Value,
    seg: &dyn SegmenterProvider,
    limits: &ExecLimits,
) -> Result<Value, Invalid> {
    let prog = Program::compile(source).map_err(|e| Invalid::Failed(e.into()))?;
    let first = prog.evaluate(image, arg, seg, limits).map_err(Invalid::Failed)?;
    let second = prog.evaluate(image, arg, seg, limits).map_err(Invalid::Failed)?;
    if !first.identical(&second) {
        return Err(Invalid::Failed(ExecFailure::NonDeterministic));
    }
    if !first.is_scorable() {
        return Err(Invalid::NotScorable(first.type_name().to_string()));
    }
    Ok(first)
}
