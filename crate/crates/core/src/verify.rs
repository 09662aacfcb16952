//! Rewards for both roles.
//!
//! Solver rewards are computed per reasoning mode: abduction and induction
//! check execution consistency, deduction uses a type-aware comparison. The
//! proposer is paid for learnability, `1[r̄ > 0]·(1 − r̄)`, where `r̄` is the
//! mean solver reward over the rollouts on its problem. Advantages are
//! standardized within each (role, mode) task group.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{value_equal, ExecContext, Program, Value};
use crate::raster::ImageRef;
use crate::tools::normalize_phrase;

/// Stabilizer added to the group standard deviation.
pub const ADVANTAGE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("collection is empty")]
    EmptyCollection,
    #[error("value of type {0} is not scorable")]
    NotScorable(&'static str),
    #[error("induction needs an even, nonzero number of pairs; got {0}")]
    BadPairCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Abduction,
    Deduction,
    Induction,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Abduction, Mode::Deduction, Mode::Induction];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Abduction => "abduction",
            Mode::Deduction => "deduction",
            Mode::Induction => "induction",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Mode::Abduction => "abd",
            Mode::Deduction => "ded",
            Mode::Induction => "ind",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "abduction" | "abd" => Ok(Mode::Abduction),
            "deduction" | "ded" => Ok(Mode::Deduction),
            "induction" | "ind" => Ok(Mode::Induction),
            _ => Err(format!("unknown mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Proposer,
    Solver,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Proposer => "proposer",
            Role::Solver => "solver",
        })
    }
}

/// One input/output example of a program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoPair {
    pub a: Value,
    pub o: Value,
}

/// Visible pairs shown to the solver and held-out pairs used for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct InductionViews {
    pub visible: Vec<IoPair>,
    pub held_out: Vec<IoPair>,
}

impl InductionViews {
    /// Uniformly random even split of `pairs`.
    pub fn split<R: Rng + ?Sized>(pairs: &[IoPair], rng: &mut R) -> Result<Self, VerifyError> {
        if pairs.is_empty() || !pairs.len().is_multiple_of(2) {
            return Err(VerifyError::BadPairCount(pairs.len()));
        }
        let mut idx: Vec<usize> = (0..pairs.len()).collect();
        idx.shuffle(rng);
        let half = pairs.len() / 2;
        let mut vis = idx[..half].to_vec();
        let mut held = idx[half..].to_vec();
        vis.sort_unstable();
        held.sort_unstable();
        Ok(Self {
            visible: vis.into_iter().map(|i| pairs[i].clone()).collect(),
            held_out: held.into_iter().map(|i| pairs[i].clone()).collect(),
        })
    }
}

/// 1 iff executing `program` on the proposed argument reproduces `expected`.
/// Any failure to execute scores 0.
pub fn reward_abduction(
    ctx: &ExecContext<'_>,
    program: &str,
    image: &ImageRef,
    expected: &Value,
    answer: &Value,
) -> f64 {
    match ctx.run(program, image, answer) {
        Ok(out) => indicator(&out, expected),
        Err(_) => 0.0,
    }
}

fn indicator(got: &Value, expected: &Value) -> f64 {
    match value_equal(got, expected) {
        Ok(true) => 1.0,
        _ => 0.0,
    }
}

/// Type-aware comparison of a predicted output against the executed one.
///
/// Numeric: `max(0, 1 − |ô − o| / max(|o|, 1))`; string: normalized exact
/// match; boolean: exact; box: IoU on inclusive pixel areas. Answers from a
/// different branch than the target score 0.
pub fn reward_deduction(predicted: &Value, target: &Value) -> f64 {
    match (predicted, target) {
        (Value::Bool(p), Value::Bool(t)) => f64::from(u8::from(p == t)),
        (Value::Str(p), Value::Str(t)) => {
            f64::from(u8::from(normalize_phrase(p) == normalize_phrase(t)))
        }
        (Value::Box(p), Value::Box(t)) => p.iou(t),
        _ => match (predicted.as_f64(), target.as_f64()) {
            (Some(p), Some(t)) if p.is_finite() && t.is_finite() => {
                (1.0 - (p - t).abs() / t.abs().max(1.0)).max(0.0)
            }
            _ => 0.0,
        },
    }
}

/// Fraction of held-out pairs the candidate program reproduces. A program
/// that fails to compile scores 0; per-pair execution failures count as
/// misses.
pub fn reward_induction(
    ctx: &ExecContext<'_>,
    candidate: &str,
    views: &InductionViews,
    image: &ImageRef,
) -> f64 {
    if views.held_out.is_empty() {
        return 0.0;
    }
    let Ok(prog) = Program::compile(candidate) else {
        return 0.0;
    };
    let hits: f64 = views
        .held_out
        .iter()
        .map(|pair| match prog.evaluate(image, &pair.a, ctx.seg, &ctx.limits) {
            Ok(out) => indicator(&out, &pair.o),
            Err(_) => 0.0,
        })
        .sum();
    hits / views.held_out.len() as f64
}

pub fn mean(xs: &[f64]) -> Result<f64, VerifyError> {
    if xs.is_empty() {
        return Err(VerifyError::EmptyCollection);
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Learnability reward from the solver rollout rewards on one problem.
pub fn proposer_reward(rollout_rewards: &[f64]) -> Result<f64, VerifyError> {
    let r = mean(rollout_rewards)?;
    Ok(if r > 0.0 { 1.0 - r } else { 0.0 })
}

/// `λ·proposer_mean + solver_mean`.
pub fn joint_step_objective(proposer_mean: f64, solver_mean: f64, lambda: f64) -> f64 {
    lambda * proposer_mean + solver_mean
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskKey {
    pub role: Role,
    pub mode: Mode,
}

impl TaskKey {
    pub fn all() -> impl Iterator<Item = TaskKey> {
        [Role::Proposer, Role::Solver]
            .into_iter()
            .flat_map(|role| Mode::ALL.into_iter().map(move |mode| TaskKey { role, mode }))
    }
}

impl fmt::Display for TaskKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.role, self.mode)
    }
}

/// One scalar reward: a solver rollout, or a proposer's learnability reward
/// for one proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub task: TaskKey,
    pub problem_id: String,
    pub rollout: Option<usize>,
    pub reward: f64,
    pub advantage: f64,
}

/// Rollout summary for one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemScore {
    pub problem_id: String,
    pub mode: Mode,
    pub rollout_rewards: Vec<f64>,
    pub mean: f64,
    pub proposer_reward: f64,
}

impl ProblemScore {
    pub fn new(problem_id: String, mode: Mode, rollout_rewards: Vec<f64>) -> Result<Self, VerifyError> {
        let mean = mean(&rollout_rewards)?;
        let proposer_reward = proposer_reward(&rollout_rewards)?;
        Ok(Self {
            problem_id,
            mode,
            rollout_rewards,
            mean,
            proposer_reward,
        })
    }
}

/// Standardizes rewards within each task group:
/// `(r − mean) / (std + ε)` with the population std. Singleton groups get 0.
pub fn task_relative_advantages(records: &mut [RewardRecord]) {
    let mut groups: BTreeMap<TaskKey, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(r.task).or_default().push(i);
    }
    for idx in groups.values() {
        if idx.len() < 2 {
            for &i in idx {
                records[i].advantage = 0.0;
            }
            continue;
        }
        let n = idx.len() as f64;
        let m = idx.iter().map(|&i| records[i].reward).sum::<f64>() / n;
        let var = idx
            .iter()
            .map(|&i| (records[i].reward - m).powi(2))
            .sum::<f64>()
            / n;
        let denom = var.sqrt() + ADVANTAGE_EPS;
        for &i in idx {
            records[i].advantage = (records[i].reward - m) / denom;
        }
    }
}

/// Most frequent answer under [`value_equal`]; ties go to the class seen
/// first. Returns the first member of the winning class.
pub fn majority_vote(answers: &[Value]) -> Result<Value, VerifyError> {
    if answers.is_empty() {
        return Err(VerifyError::EmptyCollection);
    }
    let mut classes: Vec<(usize, usize)> = Vec::new(); // (representative, count)
    for (i, a) in answers.iter().enumerate() {
        if !a.is_scorable() {
            return Err(VerifyError::NotScorable(a.type_name()));
        }
        match classes
            .iter_mut()
            .find(|(rep, _)| value_equal(&answers[*rep], a).unwrap_or(false))
        {
            Some((_, count)) => *count += 1,
            None => classes.push((i, 1)),
        }
    }
    let mut best = classes[0];
    for &c in &classes[1..] {
        if c.1 > best.1 {
            best = c;
        }
    }
    Ok(answers[best.0].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::BBox;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deduction_branches() {
        assert!((reward_deduction(&Value::Int(7), &Value::Int(10)) - 0.7).abs() < 1e-12);
        assert_eq!(
            reward_deduction(&Value::Str("Cargo ship".into()), &Value::Str("cargo ship".into())),
            1.0
        );
        let iou = reward_deduction(
            &Value::Box(BBox::new(0, 0, 1, 1)),
            &Value::Box(BBox::new(1, 1, 2, 2)),
        );
        assert!((iou - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(reward_deduction(&Value::Bool(true), &Value::Int(7)), 0.0);
        assert_eq!(reward_deduction(&Value::Bool(false), &Value::Bool(false)), 1.0);
        assert_eq!(reward_deduction(&Value::Float(7.0), &Value::Int(7)), 1.0);
        // small targets use the unit denominator
        assert!((reward_deduction(&Value::Float(0.25), &Value::Int(0)) - 0.75).abs() < 1e-12);
        assert_eq!(reward_deduction(&Value::Int(30), &Value::Int(10)), 0.0);
        assert_eq!(reward_deduction(&Value::Int(-1), &Value::Int(-2)), 0.5);
    }

    #[test]
    fn proposer_reward_examples() {
        assert_eq!(proposer_reward(&[0.0; 8]).unwrap(), 0.0);
        assert_eq!(proposer_reward(&[1.0; 8]).unwrap(), 0.0);
        assert_eq!(proposer_reward(&[1.0, 0.0]).unwrap(), 0.5);
        assert_eq!(proposer_reward(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.75);
        assert_eq!(proposer_reward(&[]), Err(VerifyError::EmptyCollection));
    }

    #[test]
    fn joint_objective_examples() {
        assert!((joint_step_objective(0.4, 0.6, 1.0) - 1.0).abs() < 1e-12);
        assert_eq!(joint_step_objective(0.4, 0.6, 0.0), 0.6);
        assert_eq!(joint_step_objective(0.0, 0.0, 1.0), 0.0);
    }

    fn rec(role: Role, mode: Mode, reward: f64) -> RewardRecord {
        RewardRecord {
            task: TaskKey { role, mode },
            problem_id: String::new(),
            rollout: None,
            reward,
            advantage: f64::NAN,
        }
    }

    #[test]
    fn advantages_per_group() {
        let mut rs = vec![
            rec(Role::Solver, Mode::Deduction, 0.0),
            rec(Role::Solver, Mode::Deduction, 1.0),
            rec(Role::Solver, Mode::Abduction, 0.3),
            rec(Role::Solver, Mode::Abduction, 0.3),
            rec(Role::Solver, Mode::Abduction, 0.3),
            rec(Role::Proposer, Mode::Induction, 0.9),
        ];
        task_relative_advantages(&mut rs);
        let expect = 0.5 / (0.5 + ADVANTAGE_EPS);
        assert!((rs[0].advantage + expect).abs() < 1e-15);
        assert!((rs[1].advantage - expect).abs() < 1e-15);
        assert!(rs[2..5].iter().all(|r| r.advantage == 0.0));
        assert_eq!(rs[5].advantage, 0.0);
    }

    #[test]
    fn advantage_groups_are_isolated() {
        let base = vec![
            rec(Role::Solver, Mode::Deduction, 0.1),
            rec(Role::Solver, Mode::Deduction, 0.7),
            rec(Role::Proposer, Mode::Deduction, 0.2),
            rec(Role::Proposer, Mode::Deduction, 0.5),
            rec(Role::Proposer, Mode::Deduction, 0.0),
        ];
        let mut a = base.clone();
        task_relative_advantages(&mut a);
        let mut b = base;
        for r in b.iter_mut().filter(|r| r.task.role == Role::Solver) {
            r.reward += 3.0;
        }
        task_relative_advantages(&mut b);
        for (x, y) in a.iter().zip(&b).filter(|(x, _)| x.task.role == Role::Proposer) {
            assert_eq!(x.advantage, y.advantage);
        }
    }

    #[test]
    fn majority_vote_examples() {
        let s = |x: &str| Value::Str(x.into());
        assert_eq!(majority_vote(&[s("A"), s("B"), s("A")]).unwrap(), s("A"));
        assert_eq!(majority_vote(&[s("A"), s("B")]).unwrap(), s("A"));
        assert_eq!(
            majority_vote(&[Value::Int(7), Value::Float(7.0), Value::Int(9)]).unwrap(),
            Value::Int(7)
        );
        assert_eq!(majority_vote(&[]), Err(VerifyError::EmptyCollection));
        assert_eq!(majority_vote(&[s("B"), s("A"), s("A")]).unwrap(), s("A"));
    }

    #[test]
    fn induction_split() {
        let pairs: Vec<IoPair> = (0..6)
            .map(|i| IoPair {
                a: Value::Int(i),
                o: Value::Int(i * 10),
            })
            .collect();
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let v1 = InductionViews::split(&pairs, &mut r1).unwrap();
        let v2 = InductionViews::split(&pairs, &mut r2).unwrap();
        assert_eq!(v1, v2);
        assert_eq!((v1.visible.len(), v1.held_out.len()), (3, 3));
        let mut all: Vec<_> = v1.visible.iter().chain(&v1.held_out).map(|p| p.a.clone()).collect();
        all.sort_by_key(|v| match v {
            Value::Int(i) => *i,
            _ => unreachable!(),
        });
        assert_eq!(all, pairs.iter().map(|p| p.a.clone()).collect::<Vec<_>>());
        assert_eq!(
            InductionViews::split(&pairs[..5], &mut r1),
            Err(VerifyError::BadPairCount(5))
        );
    }
}
