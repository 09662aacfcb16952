//! Tree-walking evaluator. Only the final value leaves this module; no
//! intermediate is recorded or returned, and runtime errors carry a kind and
//! the failing head but never a value.

use std::fmt;

use thiserror::Error;

use super::ast::{Callee, Expr, ExprKind};
use super::builtins::Builtin;
use super::value::{value_equal, Value};
use crate::primitives::{self as prim, Cardinal, Comparator, Extremum, FilterKey, PrimitiveError, SizeMode};
use crate::raster::{ImageRef, Mask, MaskSet, Point};
use crate::tools::{SegmenterProvider, ToolError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ExecLimits {
    pub step_budget: u64,
    pub max_maskset: usize,
}

impl Default for ExecLimits {
    fn default() -> Self {
        Self {
            step_budget: 1_000_000,
            max_maskset: 4_096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum RuntimeErrorKind {
    EmptyMask,
    EmptyCollection,
    TypeError,
    DivByZero,
    DimensionMismatch,
    CoincidentCentroids,
    NonFinite,
    IndexOutOfRange,
    InvalidArgument,
    UnknownImage,
}

impl fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl From<&PrimitiveError> for RuntimeErrorKind {
    fn from(e: &PrimitiveError) -> Self {
        match e {
            PrimitiveError::EmptyMask => RuntimeErrorKind::EmptyMask,
            PrimitiveError::EmptyCollection => RuntimeErrorKind::EmptyCollection,
            PrimitiveError::DimensionMismatch => RuntimeErrorKind::DimensionMismatch,
            PrimitiveError::CoincidentCentroids => RuntimeErrorKind::CoincidentCentroids,
            PrimitiveError::NonFinite => RuntimeErrorKind::NonFinite,
            PrimitiveError::InvalidArgument(_) => RuntimeErrorKind::InvalidArgument,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("runtime error {kind} in {head}")]
    Runtime { kind: RuntimeErrorKind, head: &'static str },
    #[error("step budget exceeded")]
    StepBudgetExceeded,
    #[error("mask set exceeds the element limit")]
    MaskSetOverflow,
}

type EvalResult<T> = Result<T, EvalError>;

fn prim_res<T>(r: Result<T, PrimitiveError>, head: Builtin) -> EvalResult<T> {
    r.map_err(|e| rt((&e).into(), head))
}

fn rt(kind: RuntimeErrorKind, head: Builtin) -> EvalError {
    EvalError::Runtime {
        kind,
        head: head.name(),
    }
}

fn type_err(head: Builtin) -> EvalError {
    rt(RuntimeErrorKind::TypeError, head)
}

pub(crate) struct Evaluator<'a> {
    image: &'a ImageRef,
    seg: &'a dyn SegmenterProvider,
    limits: ExecLimits,
    steps: u64,
    env: Vec<(&'a str, Value)>,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(
        image: &'a ImageRef,
        arg: &Value,
        seg: &'a dyn SegmenterProvider,
        limits: ExecLimits,
    ) -> Self {
        Self {
            image,
            seg,
            limits,
            steps: 0,
            env: vec![("image", Value::Image(image.clone())), ("arg", arg.clone())],
        }
    }

    fn tick(&mut self) -> EvalResult<()> {
        self.steps += 1;
        if self.steps > self.limits.step_budget {
            Err(EvalError::StepBudgetExceeded)
        } else {
            Ok(())
        }
    }

    fn lookup(&self, name: &str) -> Value {
        self.env
            .iter()
            .rev()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.clone())
            .expect("validated programs only reference bound names")
    }

    pub(crate) fn eval(&mut self, expr: &'a Expr) -> EvalResult<Value> {
        self.tick()?;
        match &expr.kind {
            ExprKind::Int(i) => Ok(Value::Int(*i)),
            ExprKind::Float(f) => Ok(Value::Float(*f)),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Str(s) => Ok(Value::Str(s.clone())),
            ExprKind::Var(name) => Ok(self.lookup(name)),
            ExprKind::List(items) => Ok(Value::List(
                items.iter().map(|e| self.eval(e)).collect::<EvalResult<_>>()?,
            )),
            ExprKind::Let(binds, body) => {
                let mark = self.env.len();
                for (name, e) in binds {
                    let v = self.eval(e)?;
                    self.env.push((name.as_str(), v));
                }
                let r = self.eval(body);
                self.env.truncate(mark);
                r
            }
            ExprKind::If(c, t, e) => match self.eval(c)? {
                Value::Bool(true) => self.eval(t),
                Value::Bool(false) => self.eval(e),
                _ => Err(EvalError::Runtime {
                    kind: RuntimeErrorKind::TypeError,
                    head: "if",
                }),
            },
            ExprKind::Call(Callee::Builtin(head), args) => self.call(*head, args),
            ExprKind::Call(Callee::Unknown(_), _) => {
                unreachable!("validated programs have no unknown callables")
            }
        }
    }

    fn call(&mut self, head: Builtin, args: &'a [Expr]) -> EvalResult<Value> {
        match head {
            Builtin::And | Builtin::Or => {
                let short = head == Builtin::Or;
                for a in args {
                    match self.eval(a)? {
                        Value::Bool(b) if b == short => return Ok(Value::Bool(short)),
                        Value::Bool(_) => {}
                        _ => return Err(type_err(head)),
                    }
                }
                return Ok(Value::Bool(!short));
            }
            _ => {}
        }
        let vals = args
            .iter()
            .map(|a| self.eval(a))
            .collect::<EvalResult<Vec<_>>>()?;
        self.apply(head, vals)
    }

    fn check_set(&self, ms: MaskSet) -> EvalResult<Value> {
        if ms.len() > self.limits.max_maskset {
            Err(EvalError::MaskSetOverflow)
        } else {
            Ok(Value::MaskSet(ms))
        }
    }

    fn apply(&mut self, head: Builtin, mut v: Vec<Value>) -> EvalResult<Value> {
        macro_rules! p {
            ($e:expr) => {
                prim_res($e, head)
            };
        }
        use Builtin as B;
        match head {
            B::Area => Ok(Value::Int(prim::area(mask(&v[0], head)?) as i64)),
            B::BBox => Ok(Value::Box(p!(prim::bbox(mask(&v[0], head)?))?)),
            B::Centroid => Ok(Value::Point(p!(prim::centroid(mask(&v[0], head)?))?)),
            B::Orientation => Ok(Value::Float(p!(prim::orientation(mask(&v[0], head)?))?)),
            B::Overlaps => Ok(Value::Bool(p!(prim::overlaps(
                mask(&v[0], head)?,
                mask(&v[1], head)?,
            ))?)),
            B::Contains => Ok(Value::Bool(p!(prim::contains(
                mask(&v[0], head)?,
                mask(&v[1], head)?,
            ))?)),
            B::Adjacent => Ok(Value::Bool(p!(prim::adjacent(
                mask(&v[0], head)?,
                mask(&v[1], head)?,
            ))?)),
            B::Distance => Ok(Value::Float(p!(prim::distance(
                mask(&v[0], head)?,
                mask(&v[1], head)?,
            ))?)),
            B::Quadrant => {
                let q = p!(prim::quadrant(point(&v[0], head)?, image(&v[1], head)?))?;
                Ok(Value::Str(q.as_str().to_string()))
            }
            B::Relpos => {
                let d = p!(prim::relpos(mask(&v[0], head)?, mask(&v[1], head)?))?;
                Ok(Value::Str(d.as_str().to_string()))
            }
            B::Grid => Ok(Value::Int(p!(prim::grid_cell(
                point(&v[0], head)?,
                image(&v[1], head)?,
                int(&v[2], head)?,
            ))?)),
            B::InCell => Ok(Value::Bool(p!(prim::in_cell(
                mask(&v[0], head)?,
                int(&v[1], head)?,
                int(&v[2], head)?,
            ))?)),
            B::Nearest => {
                let ms = mask_set(&v[0], head)?;
                Ok(Value::Int(p!(prim::nearest(&ms, mask(&v[1], head)?))? as i64))
            }
            B::Components => self.check_set(prim::components(mask(&v[0], head)?)),
            B::Count => Ok(Value::Int(mask_set(&v[0], head)?.len() as i64)),
            B::Exists => match &v[0] {
                Value::Mask(m) => Ok(Value::Bool(prim::exists_mask(m))),
                Value::MaskSet(ms) => Ok(Value::Bool(prim::exists_set(ms))),
                Value::List(items) => Ok(Value::Bool(!items.is_empty())),
                _ => Err(type_err(head)),
            },
            B::Union => Ok(Value::Mask(prim::union(&mask_set(&v[0], head)?))),
            B::Argmin | B::Argmax => {
                let Value::List(items) = &v[0] else {
                    return Err(type_err(head));
                };
                let nums = items
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(|| type_err(head)))
                    .collect::<EvalResult<Vec<_>>>()?;
                let mode = if head == B::Argmin {
                    Extremum::Min
                } else {
                    Extremum::Max
                };
                Ok(Value::Int(p!(prim::arg_extremum(&nums, mode))? as i64))
            }
            B::Largest | B::Smallest => {
                let mode = if head == B::Largest {
                    SizeMode::Largest
                } else {
                    SizeMode::Smallest
                };
                Ok(Value::Int(
                    p!(prim::size_extremum(&mask_set(&v[0], head)?, mode))? as i64,
                ))
            }
            B::Extreme => {
                let dir: Cardinal = p!(string(&v[1], head)?.parse())?;
                Ok(Value::Int(p!(prim::extreme(&mask_set(&v[0], head)?, dir))? as i64))
            }
            B::FilterBy => {
                let key: FilterKey = p!(string(&v[1], head)?.parse())?;
                let cmp: Comparator = p!(string(&v[2], head)?.parse())?;
                let threshold = v[3].as_f64().ok_or_else(|| type_err(head))?;
                let out = p!(prim::filter_by(&mask_set(&v[0], head)?, key, cmp, threshold))?;
                self.check_set(out)
            }
            B::MeanPosition => Ok(Value::Point(p!(prim::mean_position(&mask_set(&v[0], head)?))?)),
            B::Segment => {
                let img = image(&v[0], head)?;
                let phrase = string(&v[1], head)?;
                let ms = self.seg.segment(img, phrase).map_err(|e| match e {
                    ToolError::UnknownImage(_) => rt(RuntimeErrorKind::UnknownImage, head),
                    _ => rt(RuntimeErrorKind::InvalidArgument, head),
                })?;
                if ms.width() != self.image.width || ms.height() != self.image.height {
                    return Err(rt(RuntimeErrorKind::DimensionMismatch, head));
                }
                self.check_set(ms)
            }
            B::Add | B::Mul => {
                let mut acc = v.remove(0);
                for x in v {
                    acc = arith(head, &acc, &x)?;
                }
                Ok(acc)
            }
            B::Sub if v.len() == 1 => arith(head, &Value::Int(0), &v[0]),
            B::Sub => arith(head, &v[0], &v[1]),
            B::Div => {
                let (a, b) = (num(&v[0], head)?, num(&v[1], head)?);
                if b == 0.0 {
                    return Err(rt(RuntimeErrorKind::DivByZero, head));
                }
                finite(a / b, head)
            }
            B::Lt | B::Le | B::Gt | B::Ge => {
                let (a, b) = (num(&v[0], head)?, num(&v[1], head)?);
                let r = match head {
                    B::Lt => a < b,
                    B::Le => a <= b,
                    B::Gt => a > b,
                    _ => a >= b,
                };
                Ok(Value::Bool(r))
            }
            B::Eq => value_equal(&v[0], &v[1])
                .map(Value::Bool)
                .map_err(|_| type_err(head)),
            B::Not => match v[0] {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                _ => Err(type_err(head)),
            },
            B::And | B::Or => unreachable!("short-circuit forms handled in call"),
            B::Nth => {
                let i = int(&v[1], head)?;
                let oob = || rt(RuntimeErrorKind::IndexOutOfRange, head);
                let i = usize::try_from(i).map_err(|_| oob())?;
                match &v[0] {
                    Value::List(items) => items.get(i).cloned().ok_or_else(oob),
                    Value::MaskSet(ms) => ms.get(i).cloned().map(Value::Mask).ok_or_else(oob),
                    Value::Point(pt) => [pt.x, pt.y].get(i).map(|&c| Value::Float(c)).ok_or_else(oob),
                    Value::Box(b) => [b.xmin, b.ymin, b.xmax, b.ymax]
                        .get(i)
                        .map(|&c| Value::Int(c as i64))
                        .ok_or_else(oob),
                    _ => Err(type_err(head)),
                }
            }
            B::Len => match &v[0] {
                Value::List(items) => Ok(Value::Int(items.len() as i64)),
                Value::MaskSet(ms) => Ok(Value::Int(ms.len() as i64)),
                _ => Err(type_err(head)),
            },
            B::Pair => {
                let b = v.pop().unwrap();
                let a = v.pop().unwrap();
                Ok(Value::List(vec![a, b]))
            }
        }
    }
}

fn mask(v: &Value, head: Builtin) -> EvalResult<&Mask> {
    match v {
        Value::Mask(m) => Ok(m),
        _ => Err(type_err(head)),
    }
}

/// A MaskSet, or a nonempty list of same-sized masks.
fn mask_set(v: &Value, head: Builtin) -> EvalResult<MaskSet> {
    match v {
        Value::MaskSet(ms) => Ok(ms.clone()),
        Value::List(items) if !items.is_empty() => {
            let masks = items
                .iter()
                .map(|x| mask(x, head).cloned())
                .collect::<EvalResult<Vec<_>>>()?;
            let (w, h) = (masks[0].width(), masks[0].height());
            MaskSet::new(w, h, masks).map_err(|_| rt(RuntimeErrorKind::DimensionMismatch, head))
        }
        _ => Err(type_err(head)),
    }
}

fn point(v: &Value, head: Builtin) -> EvalResult<Point> {
    match v {
        Value::Point(p) => Ok(*p),
        _ => Err(type_err(head)),
    }
}

fn image(v: &Value, head: Builtin) -> EvalResult<&ImageRef> {
    match v {
        Value::Image(i) => Ok(i),
        _ => Err(type_err(head)),
    }
}

fn string(v: &Value, head: Builtin) -> EvalResult<&str> {
    match v {
        Value::Str(s) => Ok(s),
        _ => Err(type_err(head)),
    }
}

fn int(v: &Value, head: Builtin) -> EvalResult<i64> {
    match v {
        Value::Int(i) => Ok(*i),
        _ => Err(type_err(head)),
    }
}

fn num(v: &Value, head: Builtin) -> EvalResult<f64> {
    v.as_f64().ok_or_else(|| type_err(head))
}

fn finite(x: f64, head: Builtin) -> EvalResult<Value> {
    if x.is_finite() {
        Ok(Value::Float(x))
    } else {
        Err(rt(RuntimeErrorKind::NonFinite, head))
    }
}

/// Int op Int stays integral (overflow reports NonFinite); any Float operand
/// promotes to Float.
fn arith(head: Builtin, a: &Value, b: &Value) -> EvalResult<Value> {
    if let (Value::Int(x), Value::Int(y)) = (a, b) {
        let r = match head {
            Builtin::Add => x.checked_add(*y),
            Builtin::Sub => x.checked_sub(*y),
            Builtin::Mul => x.checked_mul(*y),
            _ => unreachable!(),
        };
        return r
            .map(Value::Int)
            .ok_or(rt(RuntimeErrorKind::NonFinite, head));
    }
    let (x, y) = (num(a, head)?, num(b, head)?);
    let r = match head {
        Builtin::Add => x + y,
        Builtin::Sub => x - y,
        Builtin::Mul => x * y,
        _ => unreachable!(),
    };
    finite(r, head)
}
