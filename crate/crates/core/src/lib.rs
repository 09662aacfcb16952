//! Verifiable self-play environment for spatial reasoning over images.
//!
//! Spatial questions are executable programs over segmentation masks. A
//! proposer writes `(question, program, argument)` triples, the executor
//! determines the output, and a solver answers under one of three modes:
//! abduction (recover the argument), deduction (predict the output) or
//! induction (recover the program from input/output pairs). Every answer is
//! scored by re-execution.
//!
//! Module map:
//!
//! - [`raster`]: masks, boxes, points and the RLE wire format
//! - [`primitives`]: geometric, topological and aggregation operators
//! - [`tools`]: the segmenter interface and its file-backed oracle
//! - [`program`]: the s-expression language and its evaluator
//! - [`verify`]: solver/proposer rewards and task-relative advantages
//! - [`bank`]: the three append-only problem banks
//! - [`selfplay`]: the propose/solve orchestrator and policy interfaces
//! - [`analysis`]: question taxonomy and primitive-usage statistics
//! - [`synthetic`]: deterministic synthetic datasets for tests and demos

pub mod analysis;
pub mod bank;
pub mod primitives;
pub mod program;
pub mod raster;
pub mod selfplay;
pub mod synthetic;
pub mod tools;
pub mod verify;

pub use program::{ExecContext, ExecLimits, Program, Value};
pub use raster::{BBox, ImageRef, Mask, MaskSet, Point};
pub use tools::{Manifest, OracleIndex, SegmenterProvider};
pub use verify::{Mode, Role};
