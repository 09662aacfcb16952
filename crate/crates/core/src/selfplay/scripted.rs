//! In-process scripted policies.
//!
//! The proposer instantiates a fixed set of question templates. The solver
//! answers correctly with probability `accuracy`, independently per rollout;
//! it finds correct answers by running the executor itself (search over the
//! phrase vocabulary for abduction, over the template programs for
//! induction), and otherwise emits an answer that scores 0. Induction
//! proposals draw arguments that keep that search unambiguous, so a correct
//! rollout scores 1 on every held-out split.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::policy::{Policy, PolicyError, ProposeRequest, SolverView};
use crate::bank::SEED_PROGRAM;
use crate::program::{value_equal, ExecContext, Value};
use crate::raster::ImageRef;
use crate::verify::Mode;

const RESAMPLE_TRIES: usize = 32;

/// A question template: program source, number of phrase slots and the
/// question text with `{x}`/`{y}` placeholders.
#[derive(Debug, Clone, Copy)]
pub struct Template {
    pub name: &'static str,
    pub program: &'static str,
    pub slots: usize,
    pub question: &'static str,
}

pub const TEMPLATES: [Template; 10] = [
    Template {
        name: "exists",
        program: "(exists (segment image arg))",
        slots: 1,
        question: "Is there a {x}?",
    },
    Template {
        name: "count",
        program: "(count (segment image arg))",
        slots: 1,
        question: "How many {x} are there?",
    },
    Template {
        name: "coverage",
        program: "(area (union (segment image arg)))",
        slots: 1,
        question: "What is the area of {x}?",
    },
    Template {
        name: "larger-area",
        program: "(let ((x1 (nth arg 0)) (x2 (nth arg 1))) \
                  (if (> (area (union (segment image x1))) (area (union (segment image x2)))) x1 x2))",
        slots: 2,
        question: "Which covers a larger area, {x} or {y}?",
    },
    Template {
        name: "largest-quadrant",
        program: "(let ((ms (segment image arg))) (quadrant (centroid (nth ms (largest ms))) image))",
        slots: 1,
        question: "In which quadrant is the largest {x}?",
    },
    Template {
        name: "nearest-quadrant",
        program: "(let ((vs (segment image (nth arg 0))) (r (union (segment image (nth arg 1))))) \
                  (quadrant (centroid (nth vs (nearest vs r))) image))",
        slots: 2,
        question: "In which quadrant is the {x} nearest to the {y}?",
    },
    Template {
        name: "northmost-quadrant",
        program: "(let ((ms (segment image arg))) (quadrant (centroid (nth ms (extreme ms \"north\"))) image))",
        slots: 1,
        question: "Where is the northernmost {x}?",
    },
    Template {
        name: "largest-bbox",
        program: "(let ((ms (segment image arg))) (bbox (nth ms (largest ms))))",
        slots: 1,
        question: "What is the bounding box of the largest {x}?",
    },
    Template {
        name: "more-count",
        program: "(> (count (segment image (nth arg 0))) (count (segment image (nth arg 1))))",
        slots: 2,
        question: "Are there more {x} than {y}?",
    },
    Template {
        name: "relative-direction",
        program: "(relpos (union (segment image (nth arg 0))) (union (segment image (nth arg 1))))",
        slots: 2,
        question: "In which direction is the {y} from the {x}?",
    },
];

/// Template proposer plus Bernoulli solver.
pub struct ScriptedPolicy<'a> {
    name: String,
    ctx: ExecContext<'a>,
    phrases: Vec<String>,
    accuracy: f64,
    answers: Mutex<HashMap<String, Option<String>>>,
}

impl<'a> ScriptedPolicy<'a> {
    pub fn new(ctx: ExecContext<'a>, phrases: Vec<String>, accuracy: f64) -> Self {
        Self {
            name: format!("scripted:bernoulli-{accuracy}"),
            ctx,
            phrases,
            accuracy: accuracy.clamp(0.0, 1.0),
            answers: Mutex::new(HashMap::new()),
        }
    }

    /// `template` (accuracy 0.5), `oracle` (1), `wrong` (0) or
    /// `bernoulli-<p>`.
    pub fn from_name(name: &str, ctx: ExecContext<'a>, phrases: Vec<String>) -> Option<Self> {
        let accuracy = match name {
            "template" => 0.5,
            "oracle" => 1.0,
            "wrong" => 0.0,
            _ => {
                let p: f64 = name.strip_prefix("bernoulli-")?.parse().ok()?;
                if !(0.0..=1.0).contains(&p) {
                    return None;
                }
                p
            }
        };
        let mut policy = Self::new(ctx, phrases, accuracy);
        policy.name = format!("scripted:{name}");
        Some(policy)
    }

    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    fn pick_phrases(&self, rng: &mut ChaCha8Rng, k: usize) -> Vec<String> {
        let n = self.phrases.len();
        if n >= k {
            index::sample(rng, n, k)
                .into_iter()
                .map(|i| self.phrases[i].clone())
                .collect()
        } else {
            (0..k).map(|_| self.phrases[rng.gen_range(0..n)].clone()).collect()
        }
    }

    fn arg_for(&self, rng: &mut ChaCha8Rng, slots: usize) -> Value {
        let ps = self.pick_phrases(rng, slots);
        if slots == 1 {
            Value::Str(ps[0].clone())
        } else {
            Value::List(ps.into_iter().map(Value::Str).collect())
        }
    }

    fn correct_answer(&self, view: &SolverView) -> Option<String> {
        let key = serde_json::to_string(view).ok()?;
        if let Some(hit) = self.answers.lock().expect("cache lock").get(&key) {
            return hit.clone();
        }
        let found = self.search(view);
        self.answers
            .lock()
            .expect("cache lock")
            .insert(key, found.clone());
        found
    }

    fn search(&self, view: &SolverView) -> Option<String> {
        match view {
            SolverView::Deduction { image, p, a } => {
                let v = self.ctx.run(p, image, a).ok()?;
                serde_json::to_string(&v).ok()
            }
            SolverView::Abduction { image, p, o } => {
                let singles = self.phrases.iter().map(|x| Value::Str(x.clone()));
                let pairs = self.phrases.iter().flat_map(|x| {
                    self.phrases
                        .iter()
                        .filter(move |y| *y != x)
                        .map(move |y| Value::List(vec![Value::Str(x.clone()), Value::Str(y.clone())]))
                });
                singles
                    .chain(pairs)
                    .find(|cand| {
                        self.ctx
                            .run(p, image, cand)
                            .is_ok_and(|out| value_equal(&out, o).unwrap_or(false))
                    })
                    .and_then(|cand| serde_json::to_string(&cand).ok())
            }
            SolverView::Induction { image, visible } => Self::candidates()
                .find(|src| {
                    visible.iter().all(|pair| {
                        self.ctx
                            .run(src, image, &pair.a)
                            .is_ok_and(|out| value_equal(&out, &pair.o).unwrap_or(false))
                    })
                })
                .map(str::to_string),
        }
    }

    /// Programs the induction search tries, in order.
    fn candidates() -> impl Iterator<Item = &'static str> {
        std::iter::once(SEED_PROGRAM).chain(TEMPLATES.iter().map(|t| t.program))
    }

    /// True when a candidate searched before `program` could match it on
    /// some visible half of the pairs without matching it on all of them.
    fn ambiguous(&self, image: &ImageRef, program: &str, args: &[Value]) -> bool {
        let Ok(outs) = args
            .iter()
            .map(|a| self.ctx.run(program, image, a))
            .collect::<Result<Vec<_>, _>>()
        else {
            return false;
        };
        let n = args.len();
        for cand in Self::candidates().take_while(|c| *c != program) {
            let agree = args
                .iter()
                .zip(&outs)
                .filter(|(a, o)| {
                    self.ctx
                        .run(cand, image, a)
                        .is_ok_and(|out| value_equal(&out, o).unwrap_or(false))
                })
                .count();
            if agree < n && 2 * agree >= n {
                return true;
            }
        }
        false
    }

    fn wrong_answer(&self, view: &SolverView) -> String {
        match view {
            SolverView::Abduction { .. } => "-1".into(),
            SolverView::Deduction { .. } => {
                let target = self.correct_answer(view).map(|t| Value::parse_answer(&t));
                match target {
                    Some(Value::Str(_)) => json!({"t": "bool", "v": false}).to_string(),
                    _ => json!({"t": "str", "v": "<none>"}).to_string(),
                }
            }
            SolverView::Induction { .. } => "(".into(),
        }
    }
}

fn fill(question: &str, arg: &Value) -> String {
    let word = |v: &Value| match v {
        Value::Str(s) => s.clone(),
        other => other.to_string(),
    };
    match arg {
        Value::List(items) if items.len() >= 2 => question
            .replace("{x}", &word(&items[0]))
            .replace("{y}", &word(&items[1])),
        other => question.replace("{x}", &word(other)),
    }
}

impl Policy for ScriptedPolicy<'_> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn propose(&self, req: &ProposeRequest, seed: u64) -> Result<String, PolicyError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if self.phrases.is_empty() {
            return Err(PolicyError::Protocol("no phrase vocabulary".into()));
        }
        let text = match req.mode {
            Mode::Abduction | Mode::Deduction => {
                let t = TEMPLATES[rng.gen_range(0..TEMPLATES.len())];
                let a = self.arg_for(&mut rng, t.slots);
                json!({"q": fill(t.question, &a), "p": t.program, "a": a})
            }
            Mode::Induction => {
                let example = req.program.as_ref().map(|s| s.a.clone());
                let draw = |rng: &mut ChaCha8Rng| -> Vec<Value> {
                    (0..req.n_io)
                        .map(|_| match &example {
                            Some(Value::Str(_)) | None => self.arg_for(rng, 1),
                            Some(Value::List(items)) if items.iter().all(|v| matches!(v, Value::Str(_))) => {
                                self.arg_for(rng, items.len())
                            }
                            Some(other) => other.clone(),
                        })
                        .collect()
                };
                let mut args = draw(&mut rng);
                if let Some(seed) = &req.program {
                    for _ in 0..RESAMPLE_TRIES {
                        if !self.ambiguous(&req.image, &seed.p, &args) {
                            break;
                        }
                        args = draw(&mut rng);
                    }
                }
                let pairs: Vec<_> = args.into_iter().map(|a| json!({"a": a})).collect();
                json!({"io_pairs": pairs})
            }
        };
        Ok(text.to_string())
    }

    fn solve(&self, view: &SolverView, seed: u64) -> Result<String, PolicyError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let correct = rng.gen_bool(self.accuracy);
        if correct {
            if let Some(ans) = self.correct_answer(view) {
                return Ok(ans);
            }
        }
        Ok(self.wrong_answer(view))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{ExecLimits, Program};
    use crate::raster::{ImageRef, Mask};
    use crate::tools::{Manifest, OracleIndex};
    use crate::verify::{reward_abduction, reward_deduction};

    #[test]
    fn templates_compile() {
        for t in TEMPLATES {
            Program::compile(t.program).unwrap_or_else(|e| panic!("{}: {e}", t.name));
        }
    }

    fn fixture() -> OracleIndex {
        let img = ImageRef::new("i", 8, 8).unwrap();
        let mut idx = OracleIndex::new(Manifest::new([img.clone()]));
        idx.insert(&img, "ship", vec![Mask::from_pixels(8, 8, &[(6, 1)]).unwrap()])
            .unwrap();
        idx.insert(&img, "road", vec![Mask::from_pixels(8, 8, &[(0, 7), (1, 7)]).unwrap()])
            .unwrap();
        idx
    }

    #[test]
    fn oracle_and_wrong_solvers_score_extremes() {
        let idx = fixture();
        let ctx = ExecContext::new(idx.manifest(), &idx, ExecLimits::default());
        let phrases = vec!["ship".to_string(), "road".to_string()];
        let oracle = ScriptedPolicy::from_name("oracle", ctx, phrases.clone()).unwrap();
        let wrong = ScriptedPolicy::from_name("wrong", ctx, phrases).unwrap();
        let image = ctx.image("i").unwrap().clone();
        let p = TEMPLATES[4].program.to_string();
        let a = Value::Str("ship".into());
        let o = ctx.run(&p, &image, &a).unwrap();
        assert_eq!(o, Value::Str("TR".into()));

        let ded = SolverView::Deduction { image: image.clone(), p: p.clone(), a };
        let abd = SolverView::Abduction { image: image.clone(), p: p.clone(), o: o.clone() };
        for seed in 0..4 {
            let good = Value::parse_answer(&oracle.solve(&ded, seed).unwrap());
            assert_eq!(reward_deduction(&good, &o), 1.0);
            let bad = Value::parse_answer(&wrong.solve(&ded, seed).unwrap());
            assert_eq!(reward_deduction(&bad, &o), 0.0);
            let good = Value::parse_answer(&oracle.solve(&abd, seed).unwrap());
            assert_eq!(reward_abduction(&ctx, &p, &image, &o, &good), 1.0);
            let bad = Value::parse_answer(&wrong.solve(&abd, seed).unwrap());
            assert_eq!(reward_abduction(&ctx, &p, &image, &o, &bad), 0.0);
        }
    }

    #[test]
    fn names() {
        let idx = fixture();
        let ctx = ExecContext::new(idx.manifest(), &idx, ExecLimits::default());
        let p = ScriptedPolicy::from_name("bernoulli-0.25", ctx, vec![]).unwrap();
        assert_eq!(p.accuracy(), 0.25);
        assert_eq!(p.name(), "scripted:bernoulli-0.25");
        assert!(ScriptedPolicy::from_name("bernoulli-2", ctx, vec![]).is_none());
        assert!(ScriptedPolicy::from_name("nope", ctx, vec![]).is_none());
    }
}
