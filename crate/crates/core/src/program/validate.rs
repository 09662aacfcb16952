use thiserror::Error;

use super::ast::{Callee, Expr, ExprKind, Pos};
use super::builtins::{Arity, Builtin};

/// Variables bound for every program.
pub const TOP_LEVEL_VARS: [&str; 2] = ["image", "arg"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("unknown callable {name:?} at {pos}")]
    UnknownCallable { name: String, pos: Pos },
    #[error("{head} takes {expected} argument(s), got {got} at {pos}")]
    ArityError {
        head: Builtin,
        expected: Arity,
        got: usize,
        pos: Pos,
    },
    #[error("unbound variable {name:?} at {pos}")]
    UnboundVariable { name: String, pos: Pos },
}

/// Checks heads, arities and scoping. The language has no loops, recursion,
/// randomness or I/O, so a program that validates is deterministic and
/// terminates.
pub fn validate(expr: &Expr) -> Result<(), ValidationError> {
    let mut scope: Vec<&str> = TOP_LEVEL_VARS.to_vec();
    check(expr, &mut scope)
}

fn check<'a>(expr: &'a Expr, scope: &mut Vec<&'a str>) -> Result<(), ValidationError> {
    match &expr.kind {
        ExprKind::Int(_) | ExprKind::Float(_) | ExprKind::Bool(_) | ExprKind::Str(_) => Ok(()),
        ExprKind::Var(name) => {
            if scope.iter().any(|s| s == name) {
                Ok(())
            } else {
                Err(ValidationError::UnboundVariable {
                    name: name.clone(),
                    pos: expr.pos,
                })
            }
        }
        ExprKind::List(items) => items.iter().try_for_each(|e| check(e, scope)),
        ExprKind::If(c, t, e) => {
            check(c, scope)?;
            check(t, scope)?;
            check(e, scope)
        }
        ExprKind::Let(binds, body) => {
            let mark = scope.len();
            for (name, value) in binds {
                check(value, scope)?;
                scope.push(name);
            }
            let r = check(body, scope);
            scope.truncate(mark);
            r
        }
        ExprKind::Call(callee, args) => {
            let head = match callee {
                Callee::Builtin(b) => *b,
                Callee::Unknown(name) => {
                    return Err(ValidationError::UnknownCallable {
                        name: name.clone(),
                        pos: expr.pos,
                    })
                }
            };
            let arity = head.arity();
            if !arity.accepts(args.len()) {
                return Err(ValidationError::ArityError {
                    head,
                    expected: arity,
                    got: args.len(),
                    pos: expr.pos,
                });
            }
            args.iter().try_for_each(|e| check(e, scope))
        }
    }
}
