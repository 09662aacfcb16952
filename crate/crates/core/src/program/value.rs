use std::fmt;

use serde::de::Error as _;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::primitives::numbers_close;
use crate::raster::{BBox, ImageRef, Mask, MaskSet, Point};
use crate::tools::normalize_phrase;

/// Result domain of program execution.
///
/// `Image` only ever appears as the binding of the `image` variable; it is
/// neither scorable nor serializable.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Point(Point),
    Box(BBox),
    Mask(Mask),
    MaskSet(MaskSet),
    List(Vec<Value>),
    Image(ImageRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("value of type {0} is not scorable")]
pub struct NotScorable(pub &'static str);

/// Verifier branch of a scorable value; Int and Float share `Numeric`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreBranch {
    Numeric,
    String,
    Boolean,
    Box,
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Bool(_) => "bool",
            Value::Str(_) => "str",
            Value::Point(_) => "point",
            Value::Box(_) => "box",
            Value::Mask(_) => "mask",
            Value::MaskSet(_) => "maskset",
            Value::List(_) => "list",
            Value::Image(_) => "image",
        }
    }

    pub fn branch(&self) -> Option<ScoreBranch> {
        match self {
            Value::Int(_) | Value::Float(_) => Some(ScoreBranch::Numeric),
            Value::Str(_) => Some(ScoreBranch::String),
            Value::Bool(_) => Some(ScoreBranch::Boolean),
            Value::Box(_) => Some(ScoreBranch::Box),
            _ => None,
        }
    }

    pub fn is_scorable(&self) -> bool {
        self.branch().is_some()
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Int(i) => Some(i as f64),
            Value::Float(f) => Some(f),
            _ => None,
        }
    }

    /// Structural equality with floats compared by bit pattern.
    pub fn identical(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Point(a), Value::Point(b)) => {
                a.x.to_bits() == b.x.to_bits() && a.y.to_bits() == b.y.to_bits()
            }
            (Value::List(a), Value::List(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.identical(y))
            }
            _ => self == other,
        }
    }

    /// Parses a solver answer or CLI literal.
    ///
    /// Accepted forms, tried in order: tagged JSON (`{"t": .., "v": ..}`),
    /// plain JSON scalars and arrays (a four-integer array is a box), and
    /// finally bare text, which becomes a string with surrounding quotes
    /// removed.
    pub fn parse_answer(text: &str) -> Value {
        let t = text.trim();
        if t.starts_with('{') {
            if let Ok(v) = serde_json::from_str::<Value>(t) {
                return v;
            }
        }
        if let Ok(j) = serde_json::from_str::<serde_json::Value>(t) {
            if let Some(v) = from_plain_json(&j) {
                return v;
            }
        }
        match t.to_ascii_lowercase().as_str() {
            "true" => return Value::Bool(true),
            "false" => return Value::Bool(false),
            _ => {}
        }
        let unquoted = t
            .strip_prefix('\'')
            .and_then(|s| s.strip_suffix('\''))
            .unwrap_or(t);
        Value::Str(unquoted.to_string())
    }
}

fn from_plain_json(j: &serde_json::Value) -> Option<Value> {
    use serde_json::Value as J;
    Some(match j {
        J::Bool(b) => Value::Bool(*b),
        J::Number(n) => match n.as_i64() {
            Some(i) => Value::Int(i),
            None => Value::Float(n.as_f64().filter(|f| f.is_finite())?),
        },
        J::String(s) => Value::Str(s.clone()),
        J::Array(items) => {
            let ints: Option<Vec<usize>> = items
                .iter()
                .map(|v| v.as_u64().map(|u| u as usize))
                .collect();
            match ints.as_deref() {
                Some(&[x0, y0, x1, y1]) if x0 <= x1 && y0 <= y1 => {
                    Value::Box(BBox::new(x0, y0, x1, y1))
                }
                _ => Value::List(items.iter().map(from_plain_json).collect::<Option<_>>()?),
            }
        }
        J::Null | J::Object(_) => return None,
    })
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Point(p) => write!(f, "({:?}, {:?})", p.x, p.y),
            Value::Box(b) => write!(f, "[{}, {}, {}, {}]", b.xmin, b.ymin, b.xmax, b.ymax),
            Value::Mask(m) => write!(f, "<mask {}x{}>", m.width(), m.height()),
            Value::MaskSet(ms) => write!(f, "<maskset of {}>", ms.len()),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Image(img) => write!(f, "<image {}>", img.id),
        }
    }
}

/// Equality used by every verifier: exact for booleans and boxes,
/// normalized for strings, tolerance `max(1e-9, 1e-9·max(|a|,|b|))` for
/// numbers (Int and Float compare numerically).
pub fn value_equal(a: &Value, b: &Value) -> Result<bool, NotScorable> {
    if !a.is_scorable() {
        return Err(NotScorable(a.type_name()));
    }
    if !b.is_scorable() {
        return Err(NotScorable(b.type_name()));
    }
    Ok(match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Box(x), Value::Box(y)) => x == y,
        (Value::Str(x), Value::Str(y)) => normalize_phrase(x) == normalize_phrase(y),
        (Value::Int(x), Value::Int(y)) => x == y,
        _ => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => numbers_close(x, y),
            _ => false,
        },
    })
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "t", content = "v", rename_all = "lowercase")]
enum Tagged {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Box([usize; 4]),
    Point([f64; 2]),
    List(Vec<Tagged>),
}

impl TryFrom<&Value> for Tagged {
    type Error = &'static str;

    fn try_from(v: &Value) -> Result<Self, Self::Error> {
        Ok(match v {
            Value::Int(i) => Tagged::Int(*i),
            Value::Float(f) => Tagged::Float(*f),
            Value::Bool(b) => Tagged::Bool(*b),
            Value::Str(s) => Tagged::Str(s.clone()),
            Value::Box(b) => Tagged::Box([b.xmin, b.ymin, b.xmax, b.ymax]),
            Value::Point(p) => Tagged::Point([p.x, p.y]),
            Value::List(items) => Tagged::List(
                items
                    .iter()
                    .map(Tagged::try_from)
                    .collect::<Result<_, _>>()?,
            ),
            other => return Err(other.type_name()),
        })
    }
}

impl TryFrom<Tagged> for Value {
    type Error = String;

    fn try_from(t: Tagged) -> Result<Self, Self::Error> {
        Ok(match t {
            Tagged::Int(i) => Value::Int(i),
            Tagged::Float(f) if f.is_finite() => Value::Float(f),
            Tagged::Float(_) => return Err("non-finite float".into()),
            Tagged::Bool(b) => Value::Bool(b),
            Tagged::Str(s) => Value::Str(s),
            Tagged::Box([x0, y0, x1, y1]) => {
                if x0 > x1 || y0 > y1 {
                    return Err(format!("malformed box [{x0}, {y0}, {x1}, {y1}]"));
                }
                Value::Box(BBox::new(x0, y0, x1, y1))
            }
            Tagged::Point([x, y]) => Value::Point(Point::new(x, y)),
            Tagged::List(items) => Value::List(
                items
                    .into_iter()
                    .map(Value::try_from)
                    .collect::<Result<_, _>>()?,
            ),
        })
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Tagged::try_from(self)
            .map_err(|t| S::Error::custom(format!("{t} values are not serializable")))?
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Value::try_from(Tagged::deserialize(d)?).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn value_equal_examples() {
        assert!(value_equal(&Value::Int(7), &Value::Float(7.0)).unwrap());
        assert!(value_equal(&Value::Str("Cargo ".into()), &Value::Str("cargo".into())).unwrap());
        assert!(!value_equal(
            &Value::Box(BBox::new(0, 0, 1, 1)),
            &Value::Box(BBox::new(0, 0, 1, 2))
        )
        .unwrap());
        assert!(!value_equal(&Value::Bool(true), &Value::Int(1)).unwrap());
        assert!(value_equal(&Value::Float(1e12), &Value::Float(1e12 + 1.0)).unwrap());
        assert!(!value_equal(&Value::Float(0.0), &Value::Float(1e-8)).unwrap());
        assert_eq!(
            value_equal(&Value::Mask(Mask::empty(1, 1)), &Value::Int(0)),
            Err(NotScorable("mask"))
        );
    }

    #[test]
    fn tagged_json_shapes() {
        let cases = [
            (Value::Int(7), r#"{"t":"int","v":7}"#),
            (Value::Float(0.5), r#"{"t":"float","v":0.5}"#),
            (Value::Bool(true), r#"{"t":"bool","v":true}"#),
            (Value::Str("ship".into()), r#"{"t":"str","v":"ship"}"#),
            (Value::Box(BBox::new(0, 1, 2, 3)), r#"{"t":"box","v":[0,1,2,3]}"#),
            (
                Value::List(vec![Value::Str("water".into()), Value::Int(2)]),
                r#"{"t":"list","v":[{"t":"str","v":"water"},{"t":"int","v":2}]}"#,
            ),
        ];
        for (v, json) in cases {
            assert_eq!(serde_json::to_string(&v).unwrap(), json);
            let back: Value = serde_json::from_str(json).unwrap();
            assert!(back.identical(&v));
        }
        assert!(serde_json::to_string(&Value::Mask(Mask::empty(1, 1))).is_err());
        assert!(serde_json::from_str::<Value>(r#"{"t":"box","v":[3,0,1,1]}"#).is_err());
        assert!(serde_json::from_str::<Value>(r#"{"t":"mask","v":1}"#).is_err());
    }

    #[test]
    fn parse_answer_forms() {
        assert_eq!(Value::parse_answer("7"), Value::Int(7));
        assert_eq!(Value::parse_answer(" 7.5 "), Value::Float(7.5));
        assert_eq!(Value::parse_answer("True"), Value::Bool(true));
        assert_eq!(Value::parse_answer("\"TR\""), Value::Str("TR".into()));
        assert_eq!(Value::parse_answer("building"), Value::Str("building".into()));
        assert_eq!(Value::parse_answer("'ship'"), Value::Str("ship".into()));
        assert_eq!(
            Value::parse_answer("[0, 0, 1, 1]"),
            Value::Box(BBox::new(0, 0, 1, 1))
        );
        assert_eq!(
            Value::parse_answer(r#"["water", "vegetation"]"#),
            Value::List(vec![Value::Str("water".into()), Value::Str("vegetation".into())])
        );
        assert_eq!(Value::parse_answer(r#"{"t":"int","v":3}"#), Value::Int(3));
    }

    fn scorable() -> impl Strategy<Value = Value> {
        prop_oneof![
            (-5i64..5).prop_map(Value::Int),
            (-5i64..5).prop_map(|i| Value::Float(i as f64)),
            any::<bool>().prop_map(Value::Bool),
            prop::sample::select(vec!["a", "A ", "b", " b"]).prop_map(|s| Value::Str(s.into())),
            (0usize..2, 0usize..2).prop_map(|(x, y)| Value::Box(BBox::new(x, y, 2, 2))),
        ]
    }

    proptest! {
        #[test]
        fn value_equal_is_an_equivalence(a in scorable(), b in scorable(), c in scorable()) {
            prop_assert!(value_equal(&a, &a).unwrap());
            prop_assert_eq!(value_equal(&a, &b).unwrap(), value_equal(&b, &a).unwrap());
            if value_equal(&a, &b).unwrap() && value_equal(&b, &c).unwrap() {
                prop_assert!(value_equal(&a, &c).unwrap());
            }
        }
    }
}
