//! Differentiation, substitution, and evaluation of expression trees. All of
//! these walk the raw tree (the rules are valid on any shape) and normalize
//! the result, so callers never depend on the input being canonical.

use std::collections::{BTreeMap, BTreeSet};

use num::{BigRational, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::{Expr, ExprError, JetAtom};

#[derive(Clone, PartialEq, Debug, Error)]
pub enum EvalError {
    #[error("no value bound for atom {0:?}")]
    UnboundAtom(JetAtom),
    #[error("division by zero during evaluation")]
    DivisionByZero,
    #[error("ln of a non-positive value during evaluation")]
    LnDomain,
    #[error("ln has no exact rational value for this argument")]
    LnNotRational,
}

pub(super) fn partial_diff(e: &Expr, atom: &JetAtom) -> Result<Expr, ExprError> {
    diff_tree(e, atom).normalize()
}

fn diff_tree(e: &Expr, atom: &JetAtom) -> Expr {
    match e {
        Expr::Rational(_) => Expr::zero(),
        Expr::Atom(a) => {
            if a == atom {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Sum(v) => Expr::Sum(v.iter().map(|t| diff_tree(t, atom)).collect()),
        Expr::Product(v) => {
            let mut terms = Vec::with_capacity(v.len());
            for i in 0..v.len() {
                let mut factors: Vec<Expr> = v.clone();
                factors[i] = diff_tree(&v[i], atom);
                terms.push(Expr::Product(factors));
            }
            Expr::Sum(terms)
        }
        Expr::Pow(b, n) => {
            if *n == 0 {
                Expr::zero()
            } else {
                Expr::Product(vec![
                    Expr::int(*n),
                    Expr::Pow(b.clone(), n - 1),
                    diff_tree(b, atom),
                ])
            }
        }
        Expr::Ln(b) => Expr::Product(vec![
            diff_tree(b, atom),
            Expr::Pow(b.clone(), -1),
        ]),
    }
}

pub(super) fn substitute(e: &Expr, map: &BTreeMap<JetAtom, Expr>) -> Result<Expr, ExprError> {
    subst_tree(e, map).normalize()
}

fn subst_tree(e: &Expr, map: &BTreeMap<JetAtom, Expr>) -> Expr {
    match e {
        Expr::Rational(_) => e.clone(),
        Expr::Atom(a) => match map.get(a) {
            Some(v) => v.clone(),
            None => e.clone(),
        },
        Expr::Sum(v) => Expr::Sum(v.iter().map(|t| subst_tree(t, map)).collect()),
        Expr::Product(v) => Expr::Product(v.iter().map(|t| subst_tree(t, map)).collect()),
        Expr::Pow(b, n) => Expr::Pow(Box::new(subst_tree(b, map)), *n),
        Expr::Ln(b) => Expr::Ln(Box::new(subst_tree(b, map))),
    }
}

pub(super) fn collect_atoms(e: &Expr, out: &mut BTreeSet<JetAtom>) {
    match e {
        Expr::Rational(_) => {}
        Expr::Atom(a) => {
            out.insert(a.clone());
        }
        Expr::Sum(v) | Expr::Product(v) => {
            for t in v {
                collect_atoms(t, out);
            }
        }
        Expr::Pow(b, _) | Expr::Ln(b) => collect_atoms(b, out),
    }
}

pub(super) fn eval(e: &Expr, lookup: &dyn Fn(&JetAtom) -> Option<f64>) -> Result<f64, EvalError> {
    match e {
        Expr::Rational(r) => Ok(rational_to_f64(r)),
        Expr::Atom(a) => lookup(a).ok_or_else(|| EvalError::UnboundAtom(a.clone())),
        Expr::Sum(v) => {
            let mut acc = 0.0;
            for t in v {
                acc += eval(t, lookup)?;
            }
            Ok(acc)
        }
        Expr::Product(v) => {
            let mut acc = 1.0;
            for t in v {
                acc *= eval(t, lookup)?;
            }
            Ok(acc)
        }
        Expr::Pow(b, n) => {
            let base = eval(b, lookup)?;
            if *n < 0 && base == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            Ok(base.powi(i32::try_from(*n).unwrap_or(i32::MAX)))
        }
        Expr::Ln(b) => {
            let arg = eval(b, lookup)?;
            if arg <= 0.0 {
                return Err(EvalError::LnDomain);
            }
            Ok(arg.ln())
        }
    }
}

pub(super) fn eval_rational(
    e: &Expr,
    values: &BTreeMap<JetAtom, BigRational>,
) -> Result<BigRational, EvalError> {
    match e {
        Expr::Rational(r) => Ok(r.clone()),
        Expr::Atom(a) => values
            .get(a)
            .cloned()
            .ok_or_else(|| EvalError::UnboundAtom(a.clone())),
        Expr::Sum(v) => {
            let mut acc = BigRational::zero();
            for t in v {
                acc += eval_rational(t, values)?;
            }
            Ok(acc)
        }
        Expr::Product(v) => {
            let mut acc = BigRational::one();
            for t in v {
                acc *= eval_rational(t, values)?;
            }
            Ok(acc)
        }
        Expr::Pow(b, n) => {
            let base = eval_rational(b, values)?;
            if *n == 0 {
                return Ok(BigRational::one());
            }
            if base.is_zero() {
                if *n < 0 {
                    return Err(EvalError::DivisionByZero);
                }
                return Ok(BigRational::zero());
            }
            let exp = u32::try_from(n.unsigned_abs()).map_err(|_| EvalError::DivisionByZero)?;
            let pos = BigRational::new(base.numer().pow(exp), base.denom().pow(exp));
            Ok(if *n < 0 { pos.recip() } else { pos })
        }
        Expr::Ln(b) => {
            let arg = eval_rational(b, values)?;
            if arg.is_one() {
                return Ok(BigRational::zero());
            }
            if !arg.is_positive() {
                return Err(EvalError::LnDomain);
            }
            Err(EvalError::LnNotRational)
        }
    }
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}
