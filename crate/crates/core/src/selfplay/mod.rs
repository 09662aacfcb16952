//! The propose/solve loop.
//!
//! One step runs, per mode, a proposal phase (B attempts, each validated by
//! execution) and a solve phase (R rollouts on each of B problems: the new
//! valid proposals first, topped up from the bank). Every rollout and every
//! proposal attempt yields one reward record; advantages are standardized
//! within the six (role, mode) groups.
//!
//! All randomness is derived from `(rng_seed, step, ...)`, so a run is
//! reproducible, parallel rollouts do not perturb it, and an interrupted run
//! resumes to the same final state.

pub mod external;
pub mod policy;
pub mod scripted;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::ExternalPolicy;
pub use policy::{Policy, PolicyError, ProgramSeed, ProposeRequest, SolverView};
pub use scripted::{ScriptedPolicy, Template, TEMPLATES};

use crate::bank::{seed_banks, BankError, BankSet, Problem};
use crate::program::{ExecContext, ExecLimits, Value};
use crate::raster::ImageRef;
use crate::verify::{
    joint_step_objective, mean, proposer_reward, reward_abduction, reward_deduction,
    reward_induction, task_relative_advantages, InductionViews, IoPair, Mode, RewardRecord, Role,
    TaskKey, VerifyError,
};

#[derive(Debug, Error)]
pub enum SelfPlayError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Bank(#[from] BankError),
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
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfPlayConfig {
    /// Proposals per mode per step.
    pub b: usize,
    /// In-context references per proposal.
    pub k: usize,
    /// Solver rollouts per problem.
    pub r: usize,
    /// Input/output pairs per induction problem.
    pub n_io: usize,
    /// Seed problems per bank.
    pub n_seed: usize,
    /// Weight of the proposer term in the step objective.
    pub lambda: f64,
    pub total_steps: u64,
    pub limits: ExecLimits,
    pub rng_seed: u64,
}

impl Default for SelfPlayConfig {
    fn default() -> Self {
        Self {
            b: 32,
            k: 6,
            r: 8,
            n_io: 6,
            n_seed: 100,
            lambda: 1.0,
            total_steps: 150,
            limits: ExecLimits::default(),
            rng_seed: 0,
        }
    }
}

impl SelfPlayConfig {
    pub fn validate(&self) -> Result<(), SelfPlayError> {
        let counts = [("b", self.b), ("k", self.k), ("r", self.r), ("n_io", self.n_io), ("n_seed", self.n_seed)];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(SelfPlayError::Config(format!("{name} must be at least 1")));
        }
        if !self.n_io.is_multiple_of(2) {
            return Err(SelfPlayError::Config("n_io must be even".into()));
        }
        if !self.lambda.is_finite() {
            return Err(SelfPlayError::Config("lambda must be finite".into()));
        }
        Ok(())
    }

    fn same_run(&self, other: &Self) -> bool {
        Self {
            total_steps: 0,
            ..self.clone()
        } == Self {
            total_steps: 0,
            ..other.clone()
        }
    }
}

/// Mixes a base seed with a path of integers (SplitMix64 finalizer).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |h, &p| mix(h ^ mix(p)))
}

fn mode_index(mode: Mode) -> u64 {
    match mode {
        Mode::Abduction => 0,
        Mode::Deduction => 1,
        Mode::Induction => 2,
    }
}

/// Even random split of a problem's pairs into visible and held-out halves.
pub fn make_induction_views(problem: &Problem, rng: &mut ChaCha8Rng) -> Result<InductionViews, VerifyError> {
    InductionViews::split(&problem.io_pairs, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLogEntry {
    pub step: u64,
    pub role: Role,
    pub mode: Mode,
    pub problem_id: String,
    /// Proposal index for proposers, batch position for solvers.
    pub slot: usize,
    pub rollout: Option<usize>,
    pub reward: f64,
    pub advantage: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalCounts {
    pub attempted: usize,
    pub accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub proposals: BTreeMap<Mode, ProposalCounts>,
    pub solver_records: usize,
    pub proposer_records: usize,
    /// Mean reward per `role/mode` group.
    pub group_means: BTreeMap<String, f64>,
    pub proposer_mean: f64,
    pub solver_mean: f64,
    pub objective: f64,
    pub bank_sizes: BTreeMap<Mode, usize>,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub report: StepReport,
    pub entries: Vec<EpisodeLogEntry>,
}

/// One proposal attempt.
#[derive(Debug, Clone)]
pub struct ProposalOutcome {
    pub id: String,
    pub result: Result<Problem, String>,
}

#[derive(Deserialize)]
struct ProposalText {
    q: Option<String>,
    p: Option<String>,
    a: Option<serde_json::Value>,
    io_pairs: Option<Vec<ArgOnly>>,
}

#[derive(Deserialize)]
struct ArgOnly {
    a: serde_json::Value,
}

fn json_value(j: &serde_json::Value) -> Value {
    Value::parse_answer(&j.to_string())
}

/// In-memory propose/solve loop over a bank set.
pub struct Orchestrator<'a> {
    pub cfg: SelfPlayConfig,
    pub ctx: ExecContext<'a>,
    pub banks: BankSet,
    policy: &'a dyn Policy,
    images: Vec<ImageRef>,
}

impl<'a> Orchestrator<'a> {
    pub fn new(
        cfg: SelfPlayConfig,
        ctx: ExecContext<'a>,
        banks: BankSet,
        policy: &'a dyn Policy,
    ) -> Result<Self, SelfPlayError> {
        cfg.validate()?;
        let images: Vec<ImageRef> = ctx.manifest.images().cloned().collect();
        if images.is_empty() {
            return Err(SelfPlayError::Config("manifest has no images".into()));
        }
        Ok(Self {
            cfg,
            ctx,
            banks,
            policy,
            images,
        })
    }

    /// Seeds fresh banks from the presence template.
    pub fn seeded(
        cfg: SelfPlayConfig,
        ctx: ExecContext<'a>,
        phrases: &[String],
        policy: &'a dyn Policy,
    ) -> Result<Self, SelfPlayError> {
        cfg.validate()?;
        let images: Vec<ImageRef> = ctx.manifest.images().cloned().collect();
        let banks = seed_banks(&images, phrases, cfg.n_seed, cfg.n_io, derive_seed(cfg.rng_seed, &[0]), &ctx)?;
        Self::new(cfg, ctx, banks, policy)
    }

    fn seed(&self, parts: &[u64]) -> u64 {
        derive_seed(self.cfg.rng_seed, parts)
    }

    /// Proposal attempts for one mode; nothing is banked here.
    pub fn propose_phase(&mut self, mode: Mode, step: u64) -> Vec<ProposalOutcome> {
        let m = mode_index(mode);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed(&[step, m, 0]));
        let b = self.cfg.b;
        let sources: Vec<(ImageRef, Option<Problem>)> = match mode {
            Mode::Abduction | Mode::Deduction => {
                let n = self.images.len();
                let picks: Vec<usize> = if n >= b {
                    index::sample(&mut rng, n, b).into_vec()
                } else {
                    (0..b).map(|_| rng.gen_range(0..n)).collect()
                };
                picks.into_iter().map(|i| (self.images[i].clone(), None)).collect()
            }
            Mode::Induction => {
                let pool: Vec<&Problem> = self
                    .banks
                    .bank(Mode::Abduction)
                    .iter()
                    .chain(self.banks.bank(Mode::Deduction))
                    .collect();
                (0..b)
                    .filter_map(|_| {
                        if pool.is_empty() {
                            return None;
                        }
                        let src = pool[rng.gen_range(0..pool.len())];
                        let image = self.ctx.image(&src.image_id).ok()?.clone();
                        Some((image, Some(src.clone())))
                    })
                    .collect()
            }
        };
        let mut out = Vec::with_capacity(b);
        for (i, (image, src)) in sources.into_iter().enumerate() {
            let id = format!("{}-s{step:04}-{i:03}", mode.short());
            let references = self.banks.sample_references(mode, self.cfg.k).unwrap_or_default();
            let req = ProposeRequest {
                mode,
                image,
                references,
                program: src.as_ref().map(|s| ProgramSeed {
                    p: s.p.clone(),
                    a: s.a.clone(),
                }),
                n_io: self.cfg.n_io,
            };
            let result = match self.policy.propose(&req, self.seed(&[step, m, 1, i as u64])) {
                Ok(text) => self.admit(&id, &req, src.as_ref(), &text, step),
                Err(e) => Err(format!("PolicyError:{e}")),
            };
            out.push(ProposalOutcome { id, result });
        }
        out
    }

    fn admit(
        &self,
        id: &str,
        req: &ProposeRequest,
        src: Option<&Problem>,
        text: &str,
        step: u64,
    ) -> Result<Problem, String> {
        let parsed: ProposalText =
            serde_json::from_str(text.trim()).map_err(|_| "MalformedProposal".to_string())?;
        let image = &req.image;
        let problem = match (req.mode, src) {
            (Mode::Induction, Some(src)) => {
                let args = parsed.io_pairs.ok_or("MalformedProposal")?;
                if args.len() != self.cfg.n_io {
                    return Err("BadPairCount".into());
                }
                let mut pairs = Vec::with_capacity(args.len());
                for arg in &args {
                    let a = json_value(&arg.a);
                    let o = self.ctx.check_validity(&src.p, &image.id, &a).map_err(|e| e.tag())?;
                    pairs.push(IoPair { a, o });
                }
                Problem {
                    id: id.to_string(),
                    mode: req.mode,
                    image_id: image.id.clone(),
                    q: parsed.q.unwrap_or_else(|| src.q.clone()),
                    p: src.p.clone(),
                    a: pairs[0].a.clone(),
                    o: pairs[0].o.clone(),
                    io_pairs: pairs,
                    created_step: step,
                }
            }
            (Mode::Induction, None) => return Err("MissingProgram".into()),
            _ => {
                let (Some(q), Some(p), Some(a)) = (parsed.q, parsed.p, parsed.a) else {
                    return Err("MalformedProposal".into());
                };
                let a = json_value(&a);
                let o = self.ctx.check_validity(&p, &image.id, &a).map_err(|e| e.tag())?;
                Problem {
                    id: id.to_string(),
                    mode: req.mode,
                    image_id: image.id.clone(),
                    q,
                    p,
                    a,
                    o,
                    io_pairs: Vec::new(),
                    created_step: step,
                }
            }
        };
        Ok(problem)
    }

    /// The view a solver gets for `problem`, or `None` when the problem can
    /// no longer be posed (unknown image, malformed pairs).
    pub fn solver_view(&self, problem: &Problem, rng: &mut ChaCha8Rng) -> Option<(SolverView, Option<InductionViews>)> {
        let image = self.ctx.image(&problem.image_id).ok()?.clone();
        Some(match problem.mode {
            Mode::Abduction => (
                SolverView::Abduction {
                    image,
                    p: problem.p.clone(),
                    o: problem.o.clone(),
                },
                None,
            ),
            Mode::Deduction => (
                SolverView::Deduction {
                    image,
                    p: problem.p.clone(),
                    a: problem.a.clone(),
                },
                None,
            ),
            Mode::Induction => {
                let views = make_induction_views(problem, rng).ok()?;
                (
                    SolverView::Induction {
                        image,
                        visible: views.visible.clone(),
                    },
                    Some(views),
                )
            }
        })
    }

    fn score(&self, problem: &Problem, view: &SolverView, views: Option<&InductionViews>, text: &str) -> f64 {
        let image = view.image();
        match problem.mode {
            Mode::Abduction => {
                reward_abduction(&self.ctx, &problem.p, image, &problem.o, &Value::parse_answer(text))
            }
            Mode::Deduction => reward_deduction(&Value::parse_answer(text), &problem.o),
            Mode::Induction => views.map_or(0.0, |v| reward_induction(&self.ctx, text, v, image)),
        }
    }

    /// R rollout rewards for each problem of the batch, in batch order.
    pub fn solve_phase(&self, mode: Mode, batch: &[Problem], step: u64) -> Vec<Vec<f64>> {
        let m = mode_index(mode);
        let one = |(i, problem): (usize, &Problem)| -> Vec<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed(&[step, m, 2, i as u64]));
            let Some((view, views)) = self.solver_view(problem, &mut rng) else {
                return vec![0.0; self.cfg.r];
            };
            (0..self.cfg.r)
                .map(|r| {
                    let seed = self.seed(&[step, m, 3, i as u64, r as u64]);
                    match self.policy.solve(&view, seed) {
                        Ok(text) => self.score(problem, &view, views.as_ref(), &text),
                        Err(_) => 0.0,
                    }
                })
                .collect()
        };
        if self.policy.parallel_safe() {
            batch.par_iter().enumerate().map(one).collect()
        } else {
            batch.iter().enumerate().map(one).collect()
        }
    }

    /// One full step: proposals for all three modes, then solving, then
    /// reward and advantage assembly. Valid proposals are banked.
    pub fn run_step(&mut self, step: u64) -> Result<StepOutput, SelfPlayError> {
        self.banks.reseed(self.seed(&[step, 9]));
        let outcomes: Vec<(Mode, Vec<ProposalOutcome>)> = Mode::ALL
            .into_iter()
            .map(|mode| (mode, self.propose_phase(mode, step)))
            .collect();

        let mut batches = Vec::with_capacity(3);
        for (mode, outs) in &outcomes {
            let valid: Vec<Problem> = outs.iter().filter_map(|o| o.result.clone().ok()).collect();
            batches.push(self.banks.fill_shortfall(*mode, valid, self.cfg.b)?);
        }
        let mut outcomes = outcomes;
        for (_, outs) in &mut outcomes {
            for out in outs.iter_mut() {
                if let Ok(problem) = &out.result {
                    if let Err(e) = self.banks.grow(problem.clone(), &self.ctx) {
                        out.result = Err(e.tag());
                    }
                }
            }
        }

        let mut records = Vec::new();
        let mut rejections = Vec::new();
        let mut slots = Vec::new();
        let mut proposals = BTreeMap::new();
        for ((mode, outs), batch) in outcomes.iter().zip(&batches) {
            let rewards = self.solve_phase(*mode, batch, step);
            let mut k = 0;
            for (i, out) in outs.iter().enumerate() {
                let (reward, rejection) = match &out.result {
                    Ok(problem) => {
                        let r = batch
                            .iter()
                            .position(|b| b.id == problem.id)
                            .and_then(|j| proposer_reward(&rewards[j]).ok())
                            .unwrap_or(0.0);
                        k += 1;
                        (r, None)
                    }
                    Err(reason) => (0.0, Some(reason.clone())),
                };
                records.push(RewardRecord {
                    task: TaskKey { role: Role::Proposer, mode: *mode },
                    problem_id: out.id.clone(),
                    rollout: None,
                    reward,
                    advantage: 0.0,
                });
                rejections.push(rejection);
                slots.push(i);
            }
            proposals.insert(
                *mode,
                ProposalCounts {
                    attempted: outs.len(),
                    accepted: k,
                },
            );
            for (i, (problem, rs)) in batch.iter().zip(&rewards).enumerate() {
                for (r, &reward) in rs.iter().enumerate() {
                    records.push(RewardRecord {
                        task: TaskKey { role: Role::Solver, mode: *mode },
                        problem_id: problem.id.clone(),
                        rollout: Some(r),
                        reward,
                        advantage: 0.0,
                    });
                    rejections.push(None);
                    slots.push(i);
                }
            }
        }
        task_relative_advantages(&mut records);

        let rewards_of = |role: Role| -> Vec<f64> {
            records.iter().filter(|r| r.task.role == role).map(|r| r.reward).collect()
        };
        let proposer = rewards_of(Role::Proposer);
        let solver = rewards_of(Role::Solver);
        let proposer_mean = mean(&proposer).unwrap_or(0.0);
        let solver_mean = mean(&solver).unwrap_or(0.0);
        let group_means = TaskKey::all()
            .filter_map(|key| {
                let xs: Vec<f64> = records.iter().filter(|r| r.task == key).map(|r| r.reward).collect();
                mean(&xs).ok().map(|m| (key.to_string(), m))
            })
            .collect();
        let report = StepReport {
            step,
            proposals,
            solver_records: solver.len(),
            proposer_records: proposer.len(),
            group_means,
            proposer_mean,
            solver_mean,
            objective: joint_step_objective(proposer_mean, solver_mean, self.cfg.lambda),
            bank_sizes: Mode::ALL.into_iter().map(|m| (m, self.banks.len(m))).collect(),
        };
        let entries = records
            .into_iter()
            .zip(rejections)
            .zip(slots)
            .map(|((rec, rejection), slot)| EpisodeLogEntry {
                step,
                role: rec.task.role,
                mode: rec.task.mode,
                problem_id: rec.problem_id,
                slot,
                rollout: rec.rollout,
                reward: rec.reward,
                advantage: rec.advantage,
                rejection,
            })
            .collect();
        Ok(StepOutput { report, entries })
    }
}

pub const BANK_DIR: &str = "banks";
pub const EPISODES_FILE: &str = "episodes.jsonl";
pub const REPORTS_FILE: &str = "reports.jsonl";
pub const STATE_FILE: &str = "run_state.json";

#[derive(Debug, Serialize, Deserialize)]
struct RunState {
    completed_steps: u64,
    config: SelfPlayConfig,
}

/// A self-play run persisted under one directory:
/// `banks/`, `episodes.jsonl`, `reports.jsonl` and `run_state.json`.
/// Opening an existing directory resumes after the last completed step.
pub struct Session<'a> {
    dir: PathBuf,
    orch: Orchestrator<'a>,
    completed: u64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SelfPlayError + '_ {
    move |source| SelfPlayError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl<'a> Session<'a> {
    pub fn open(
        dir: &Path,
        cfg: SelfPlayConfig,
        ctx: ExecContext<'a>,
        phrases: &[String],
        policy: &'a dyn Policy,
    ) -> Result<Self, SelfPlayError> {
        cfg.validate()?;
        let state_path = dir.join(STATE_FILE);
        if state_path.exists() {
            let text = fs::read_to_string(&state_path).map_err(io_err(&state_path))?;
            let state: RunState = serde_json::from_str(&text).map_err(|e| SelfPlayError::Schema {
                path: state_path.display().to_string(),
                line: 1,
                message: e.to_string(),
            })?;
            if !state.config.same_run(&cfg) {
                return Err(SelfPlayError::Config(
                    "existing run was started with a different configuration".into(),
                ));
            }
            let mut banks = BankSet::load(&dir.join(BANK_DIR))?;
            banks.truncate_after(state.completed_steps);
            for name in [EPISODES_FILE, REPORTS_FILE] {
                truncate_log(&dir.join(name), state.completed_steps)?;
            }
            let orch = Orchestrator::new(cfg, ctx, banks, policy)?;
            return Ok(Self {
                dir: dir.to_path_buf(),
                orch,
                completed: state.completed_steps,
            });
        }
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let orch = Orchestrator::seeded(cfg, ctx, phrases, policy)?;
        orch.banks.save(&dir.join(BANK_DIR))?;
        for name in [EPISODES_FILE, REPORTS_FILE] {
            let path = dir.join(name);
            File::create(&path).map_err(io_err(&path))?;
        }
        let session = Self {
            dir: dir.to_path_buf(),
            orch,
            completed: 0,
        };
        session.write_state()?;
        Ok(session)
    }

    pub fn completed_steps(&self) -> u64 {
        self.completed
    }

    pub fn banks(&self) -> &BankSet {
        &self.orch.banks
    }

    pub fn config(&self) -> &SelfPlayConfig {
        &self.orch.cfg
    }

    pub fn is_finished(&self) -> bool {
        self.completed >= self.orch.cfg.total_steps
    }

    fn write_state(&self) -> Result<(), SelfPlayError> {
        let state = RunState {
            completed_steps: self.completed,
            config: self.orch.cfg.clone(),
        };
        let path = self.dir.join(STATE_FILE);
        let tmp = self.dir.join(format!("{STATE_FILE}.tmp"));
        let text = serde_json::to_string_pretty(&state).expect("state serializes") + "\n";
        fs::write(&tmp, text).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    /// Runs and persists the next step.
    pub fn step(&mut self) -> Result<StepReport, SelfPlayError> {
        let step = self.completed + 1;
        let out = self.orch.run_step(step)?;
        append_lines(&self.dir.join(EPISODES_FILE), &out.entries)?;
        append_lines(&self.dir.join(REPORTS_FILE), std::slice::from_ref(&out.report))?;
        self.orch.banks.save(&self.dir.join(BANK_DIR))?;
        self.completed = step;
        self.write_state()?;
        Ok(out.report)
    }

    /// Runs the remaining steps up to `total_steps`.
    pub fn run(&mut self) -> Result<Vec<StepReport>, SelfPlayError> {
        let mut reports = Vec::new();
        while !self.is_finished() {
            reports.push(self.step()?);
        }
        Ok(reports)
    }
}

fn append_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), SelfPlayError> {
    let file = OpenOptions::new()
        .append(true)
        .create(true)
        .open(path)
        .map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("records serialize");
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

#[derive(Deserialize)]
struct StepOnly {
    step: u64,
}

/// Keeps only lines whose `step` is at most `last`.
fn truncate_log(path: &Path, last: u64) -> Result<(), SelfPlayError> {
    if !path.exists() {
        File::create(path).map_err(io_err(path))?;
        return Ok(());
    }
    let file = File::open(path).map_err(io_err(path))?;
    let mut kept = String::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let Ok(rec) = serde_json::from_str::<StepOnly>(&line) else {
            // a torn final line from an interrupted write
            if i > 0 {
                continue;
            }
            return Err(SelfPlayError::Schema {
                path: path.display().to_string(),
                line: i + 1,
                message: "record without a step".into(),
            });
        };
        if rec.step <= last {
            kept.push_str(&line);
            kept.push('\n');
        }
    }
    fs::write(path, kept).map_err(io_err(path))
}
