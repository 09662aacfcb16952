//! The three append-only problem banks, one per reasoning mode.
//!
//! Every stored problem passed the validity check when it was admitted, ids
//! are unique across all three banks, and insertion order is preserved.
//! On disk a bank set is a directory holding `abduction.jsonl`,
//! `deduction.jsonl`, `induction.jsonl` and `bank_state.json` (the sampling
//! RNG state).

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{ExecContext, Invalid, Value};
use crate::raster::ImageRef;
use crate::tools::{for_each_record, write_lines, ToolError};
use crate::verify::{IoPair, Mode};

pub const SEED_PROGRAM: &str = "(exists (segment image arg))";
const STATE_FILE: &str = "bank_state.json";

pub fn seed_question(phrase: &str) -> String {
    format!("Is there a {phrase}?")
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },
    #[error("the {0} bank is empty")]
    EmptyBank(Mode),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl From<ToolError> for BankError {
    fn from(e: ToolError) -> Self {
        match e {
            ToolError::Io { path, source } => BankError::Io { path, source },
            ToolError::Schema { path, line, message } => BankError::Schema { path, line, message },
            ToolError::UnknownImage(id) => BankError::InsufficientData(format!("unknown image {id:?}")),
        }
    }
}

/// An execution-verified problem grounded in one image. Induction problems
/// also carry their input/output pairs; `a` and `o` then mirror the first
/// pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub mode: Mode,
    pub image_id: String,
    pub q: String,
    pub p: String,
    pub a: Value,
    pub o: Value,
    #[serde(default)]
    pub io_pairs: Vec<IoPair>,
    pub created_step: u64,
}

/// Why a problem was not admitted to a bank.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Rejection {
    #[error("{0}")]
    Invalid(Invalid),
    #[error("stored output does not match execution (pair {pair:?})")]
    OutputMismatch { pair: Option<usize> },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("induction problem has {0} pairs")]
    BadPairCount(usize),
}

impl Rejection {
    pub fn tag(&self) -> String {
        match self {
            Rejection::Invalid(i) => i.tag(),
            Rejection::OutputMismatch { .. } => "OutputMismatch".into(),
            Rejection::DuplicateId(_) => "DuplicateId".into(),
            Rejection::BadPairCount(_) => "BadPairCount".into(),
        }
    }
}

impl Problem {
    /// Re-executes the program and checks every stored output bit-for-bit.
    pub fn reverify(&self, ctx: &ExecContext<'_>) -> Result<(), Rejection> {
        let check = |a: &Value, o: &Value, pair: Option<usize>| {
            let got = ctx
                .check_validity(&self.p, &self.image_id, a)
                .map_err(Rejection::Invalid)?;
            if got.identical(o) {
                Ok(())
            } else {
                Err(Rejection::OutputMismatch { pair })
            }
        };
        check(&self.a, &self.o, None)?;
        if self.mode == Mode::Induction {
            if self.io_pairs.is_empty() || !self.io_pairs.len().is_multiple_of(2) {
                return Err(Rejection::BadPairCount(self.io_pairs.len()));
            }
            for (i, pair) in self.io_pairs.iter().enumerate() {
                check(&pair.a, &pair.o, Some(i))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BankState {
    seed: u64,
    word_pos: String,
}

/// The three banks plus the RNG used for reference sampling and refill.
#[derive(Debug, Clone)]
pub struct BankSet {
    banks: [Vec<Problem>; 3],
    ids: HashSet<String>,
    seed: u64,
    rng: ChaCha8Rng,
}

fn slot(mode: Mode) -> usize {
    match mode {
        Mode::Abduction => 0,
        Mode::Deduction => 1,
        Mode::Induction => 2,
    }
}

fn bank_file(dir: &Path, mode: Mode) -> PathBuf {
    dir.join(format!("{}.jsonl", mode.as_str()))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BankError + '_ {
    move |source| BankError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl BankSet {
    pub fn new(seed: u64) -> Self {
        Self {
            banks: Default::default(),
            ids: HashSet::new(),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Restarts the sampling RNG from `seed`.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Drops problems created after `step`; used when resuming a run whose
    /// last step was interrupted.
    pub fn truncate_after(&mut self, step: u64) {
        for bank in &mut self.banks {
            bank.retain(|p| p.created_step <= step);
        }
        self.ids = self.iter().map(|p| p.id.clone()).collect();
    }

    pub fn bank(&self, mode: Mode) -> &[Problem] {
        &self.banks[slot(mode)]
    }

    pub fn len(&self, mode: Mode) -> usize {
        self.banks[slot(mode)].len()
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.banks[0].len(), self.banks[1].len(), self.banks[2].len()]
    }

    pub fn total(&self) -> usize {
        self.banks.iter().map(Vec::len).sum()
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.ids.contains(id)
    }

    /// All problems, abduction then deduction then induction, each in
    /// insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &Problem> {
        self.banks.iter().flatten()
    }

    /// Appends `problem` iff its id is fresh and it re-executes to its stored
    /// outputs.
    pub fn grow(&mut self, problem: Problem, ctx: &ExecContext<'_>) -> Result<(), Rejection> {
        if self.ids.contains(&problem.id) {
            return Err(Rejection::DuplicateId(problem.id));
        }
        problem.reverify(ctx)?;
        self.ids.insert(problem.id.clone());
        self.banks[slot(problem.mode)].push(problem);
        Ok(())
    }

    /// `k` draws from one bank: distinct when the bank holds at least `k`
    /// problems, otherwise with replacement.
    pub fn sample_references(&mut self, mode: Mode, k: usize) -> Result<Vec<Problem>, BankError> {
        let n = self.len(mode);
        if n == 0 {
            return Err(BankError::EmptyBank(mode));
        }
        let picks: Vec<usize> = if n >= k {
            index::sample(&mut self.rng, n, k).into_vec()
        } else {
            (0..k).map(|_| self.rng.gen_range(0..n)).collect()
        };
        let bank = &self.banks[slot(mode)];
        Ok(picks.into_iter().map(|i| bank[i].clone()).collect())
    }

    /// `valid_new` first, topped up to `target` with bank samples.
    pub fn fill_shortfall(
        &mut self,
        mode: Mode,
        mut valid_new: Vec<Problem>,
        target: usize,
    ) -> Result<Vec<Problem>, BankError> {
        if valid_new.len() >= target {
            valid_new.truncate(target);
            return Ok(valid_new);
        }
        let extra = self.sample_references(mode, target - valid_new.len())?;
        valid_new.extend(extra);
        Ok(valid_new)
    }

    /// Problems that no longer re-execute to their stored outputs.
    pub fn reverify_all(&self, ctx: &ExecContext<'_>) -> Vec<(String, Rejection)> {
        self.iter()
            .filter_map(|p| p.reverify(ctx).err().map(|e| (p.id.clone(), e)))
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<(), BankError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for mode in Mode::ALL {
            write_lines(&bank_file(dir, mode), self.bank(mode).iter())?;
        }
        let state = BankState {
            seed: self.seed,
            word_pos: self.rng.get_word_pos().to_string(),
        };
        let path = dir.join(STATE_FILE);
        let text = serde_json::to_string(&state).expect("state serializes");
        fs::write(&path, text + "\n").map_err(io_err(&path))
    }

    /// Loads a bank set. Schema errors carry the 1-based line number.
    pub fn load(dir: &Path) -> Result<Self, BankError> {
        let path = dir.join(STATE_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let schema = |message: String| BankError::Schema {
            path: path.display().to_string(),
            line: 1,
            message,
        };
        let state: BankState = serde_json::from_str(&text).map_err(|e| schema(e.to_string()))?;
        let word_pos: u128 = state
            .word_pos
            .parse()
            .map_err(|e: std::num::ParseIntError| schema(e.to_string()))?;
        let mut set = Self::new(state.seed);
        set.rng.set_word_pos(word_pos);
        for mode in Mode::ALL {
            let file = bank_file(dir, mode);
            let mut items = Vec::new();
            for_each_record(&file, |line, p: Problem| {
                if p.mode != mode {
                    return Err(format!("{} problem in the {mode} bank", p.mode));
                }
                if !p.o.is_scorable() {
                    return Err(format!("output of type {} is not scorable", p.o.type_name()));
                }
                if !set.ids.insert(p.id.clone()) {
                    return Err(format!("duplicate id {:?} at line {line}", p.id));
                }
                items.push(p);
                Ok(())
            })?;
            set.banks[slot(mode)] = items;
        }
        Ok(set)
    }
}

/// One benchmark line: an execution-verified question and its answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub id: String,
    pub image_id: String,
    pub question: String,
    pub answer: Value,
    pub mode: Mode,
    pub program: String,
    pub arg: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Export {
    pub records: Vec<BenchmarkRecord>,
    /// Ids of problems that failed re-verification.
    pub dropped: Vec<String>,
}

/// Benchmark records for every banked problem that still re-executes to
/// its stored outputs.
pub fn export(banks: &BankSet, ctx: &ExecContext<'_>) -> Export {
    let mut records = Vec::new();
    let mut dropped = Vec::new();
    for p in banks.iter() {
        if p.reverify(ctx).is_err() {
            dropped.push(p.id.clone());
            continue;
        }
        records.push(BenchmarkRecord {
            id: p.id.clone(),
            image_id: p.image_id.clone(),
            question: p.q.clone(),
            answer: p.o.clone(),
            mode: p.mode,
            program: p.p.clone(),
            arg: p.a.clone(),
        });
    }
    Export { records, dropped }
}

/// Builds the seed banks from the presence-check template over uniformly
/// sampled (image, phrase) pairs. Induction seeds carry `n_io` pairs over
/// distinct phrases (with repeats only when fewer phrases exist).
pub fn seed_banks(
    images: &[ImageRef],
    phrases: &[String],
    n_seed: usize,
    n_io: usize,
    seed: u64,
    ctx: &ExecContext<'_>,
) -> Result<BankSet, BankError> {
    if images.is_empty() {
        return Err(BankError::InsufficientData("no images".into()));
    }
    if phrases.is_empty() {
        return Err(BankError::InsufficientData("no phrases".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut set = BankSet::new(seed);
    let max_attempts = n_seed.saturating_mul(10).max(10);
    for mode in Mode::ALL {
        let mut attempts = 0;
        while set.len(mode) < n_seed {
            attempts += 1;
            if attempts > max_attempts {
                return Err(BankError::InsufficientData(format!(
                    "only {} valid {mode} seeds after {max_attempts} attempts",
                    set.len(mode)
                )));
            }
            let image = &images[rng.gen_range(0..images.len())];
            let args: Vec<String> = if mode == Mode::Induction {
                if phrases.len() >= n_io {
                    index::sample(&mut rng, phrases.len(), n_io)
                        .into_iter()
                        .map(|i| phrases[i].clone())
                        .collect()
                } else {
                    (0..n_io)
                        .map(|_| phrases[rng.gen_range(0..phrases.len())].clone())
                        .collect()
                }
            } else {
                vec![phrases[rng.gen_range(0..phrases.len())].clone()]
            };
            let mut pairs = Vec::with_capacity(args.len());
            for phrase in &args {
                let a = Value::Str(phrase.clone());
                match ctx.check_validity(SEED_PROGRAM, &image.id, &a) {
                    Ok(o) => pairs.push(IoPair { a, o }),
                    Err(_) => break,
                }
            }
            if pairs.len() != args.len() {
                continue;
            }
            let first = pairs[0].clone();
            let problem = Problem {
                id: format!("{}-seed-{:03}", mode.short(), set.len(mode)),
                mode,
                image_id: image.id.clone(),
                q: seed_question(&args[0]),
                p: SEED_PROGRAM.to_string(),
                a: first.a,
                o: first.o,
                io_pairs: if mode == Mode::Induction { pairs } else { Vec::new() },
                created_step: 0,
            };
            if set.grow(problem, ctx).is_err() {
                continue;
            }
        }
    }
    Ok(set)
}
