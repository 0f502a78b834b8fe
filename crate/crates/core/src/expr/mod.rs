//! Exact symbolic expressions over jet-space atoms.
//!
//! The expression language is deliberately small: arbitrary-precision
//! rational constants, jet atoms (fields, conjugate momenta, and Lagrange
//! multipliers together with their spatial/temporal derivative orders), sums,
//! products, integer powers, and natural logarithms. Everything the rest of
//! the crate does (variational calculus, the constraint algorithm, code
//! generation for the numeric checks) is built on `normalize`, which rewrites
//! any expression into a canonical multinomial form with exact rational
//! arithmetic. Two expressions are equal as rational functions if and only if
//! their normal forms are identical, so equality and zero tests are decision
//! procedures rather than heuristics (logarithms are compared structurally
//! after a monomial-splitting rewrite, which is the one place the test is
//! conservative instead of complete).

mod calc;
mod normal;
mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::BigRational;
use thiserror::Error;

pub use calc::EvalError;
pub use render::{from_json_tree, to_json_tree};

/// What a jet atom refers to: a field, the momentum conjugate to a field, or
/// a Lagrange multiplier introduced by the constraint algorithm.
///
/// The ordering (fields before momenta before multipliers) is part of the
/// canonical term order, so it is fixed here once and relied on everywhere.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum AtomKind {
    Field,
    Momentum,
    Multiplier,
}

/// A single jet coordinate: a named quantity together with how many spatial
/// and temporal derivatives have been applied to it. `t_order` never exceeds
/// one anywhere in this crate; the Lagrangians handled here are first order
/// in time and the algorithms preserve that.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct JetAtom {
    pub kind: AtomKind,
    pub name: String,
    pub x_order: u32,
    pub t_order: u32,
}

impl JetAtom {
    pub fn field(name: &str) -> Self {
        JetAtom { kind: AtomKind::Field, name: name.to_string(), x_order: 0, t_order: 0 }
    }

    pub fn field_jet(name: &str, x_order: u32, t_order: u32) -> Self {
        JetAtom { kind: AtomKind::Field, name: name.to_string(), x_order, t_order }
    }

    pub fn momentum(name: &str) -> Self {
        JetAtom { kind: AtomKind::Momentum, name: name.to_string(), x_order: 0, t_order: 0 }
    }

    pub fn momentum_jet(name: &str, x_order: u32, t_order: u32) -> Self {
        JetAtom { kind: AtomKind::Momentum, name: name.to_string(), x_order, t_order }
    }

    pub fn multiplier(name: &str) -> Self {
        JetAtom { kind: AtomKind::Multiplier, name: name.to_string(), x_order: 0, t_order: 0 }
    }

    /// The same quantity with one more spatial derivative.
    pub fn dx(&self) -> Self {
        let mut a = self.clone();
        a.x_order += 1;
        a
    }

    /// The same quantity with one more temporal derivative.
    pub fn dt(&self) -> Self {
        let mut a = self.clone();
        a.t_order += 1;
        a
    }
}

/// Symbolic expression tree. Construct through the helper methods, compare
/// through [`Expr::normalize`] / [`Expr::equals`]; the `PartialEq` derive is
/// purely structural.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Expr {
    Rational(BigRational),
    Atom(JetAtom),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Box<Expr>, i64),
    Ln(Box<Expr>),
}

/// Errors surfaced by normalization and the symbolic operations built on it.
#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum ExprError {
    #[error("division by zero while normalizing")]
    DivisionByZero,
    #[error("ln of zero while normalizing")]
    LnOfZero,
    #[error("exponent {0} exceeds the supported magnitude for multi-term bases")]
    ExponentOverflow(i64),
    #[error("time derivative applied to an expression already containing time jets")]
    TimeJetPresent,
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Rational(BigRational::from_integer(0.into()))
    }

    pub fn one() -> Expr {
        Expr::Rational(BigRational::from_integer(1.into()))
    }

    pub fn int(n: i64) -> Expr {
        Expr::Rational(BigRational::from_integer(n.into()))
    }

    /// Exact fraction `num/den`. Panics when `den == 0`; callers only pass
    /// literal nonzero denominators.
    pub fn rational(num: i64, den: i64) -> Expr {
        assert!(den != 0, "rational literal with zero denominator");
        Expr::Rational(BigRational::new(num.into(), den.into()))
    }

    pub fn atom(a: JetAtom) -> Expr {
        Expr::Atom(a)
    }

    pub fn field(name: &str) -> Expr {
        Expr::Atom(JetAtom::field(name))
    }

    pub fn field_jet(name: &str, x_order: u32, t_order: u32) -> Expr {
        Expr::Atom(JetAtom::field_jet(name, x_order, t_order))
    }

    pub fn momentum(name: &str) -> Expr {
        Expr::Atom(JetAtom::momentum(name))
    }

    pub fn multiplier(name: &str) -> Expr {
        Expr::Atom(JetAtom::multiplier(name))
    }

    pub fn add(terms: Vec<Expr>) -> Expr {
        match terms.len() {
            0 => Expr::zero(),
            1 => terms.into_iter().next().unwrap(),
            _ => Expr::Sum(terms),
        }
    }

    pub fn mul(factors: Vec<Expr>) -> Expr {
        match factors.len() {
            0 => Expr::one(),
            1 => factors.into_iter().next().unwrap(),
            _ => Expr::Product(factors),
        }
    }

    pub fn pow(self, n: i64) -> Expr {
        Expr::Pow(Box::new(self), n)
    }

    pub fn ln(self) -> Expr {
        Expr::Ln(Box::new(self))
    }

    pub fn neg(self) -> Expr {
        Expr::Product(vec![Expr::int(-1), self])
    }

    pub fn sub(self, other: Expr) -> Expr {
        Expr::Sum(vec![self, other.neg()])
    }

    pub fn div(self, other: Expr) -> Expr {
        Expr::Product(vec![self, Expr::Pow(Box::new(other), -1)])
    }

    /// Rewrite into the canonical multinomial form. The result is unique per
    /// equivalence class of rational functions: sums are flattened and merged
    /// with exact coefficients, products are distributed, integer powers of
    /// multi-term expressions are expanded (negative powers through inverse
    /// factors), denominators are simplified by exact polynomial division,
    /// and terms are emitted in a fixed total order.
    pub fn normalize(&self) -> Result<Expr, ExprError> {
        let m = normal::build(self)?;
        Ok(normal::finalize(m).emit())
    }

    /// Decide whether the expression is identically zero as a rational
    /// function of its atoms (with logarithms treated as independent
    /// transcendental quantities after monomial splitting).
    pub fn is_zero(&self) -> Result<bool, ExprError> {
        Ok(normal::finalize(normal::build(self)?).is_zero())
    }

    /// Decide equality of two expressions via `is_zero` on the difference.
    pub fn equals(&self, other: &Expr) -> Result<bool, ExprError> {
        self.clone().sub(other.clone()).is_zero()
    }

    /// Partial derivative with respect to one jet atom, treating every other
    /// atom as an independent coordinate.
    pub fn partial_diff(&self, atom: &JetAtom) -> Result<Expr, ExprError> {
        calc::partial_diff(self, atom)
    }

    /// Simultaneous substitution of atoms by expressions. Atoms absent from
    /// the map are left in place; replacements are not re-substituted.
    pub fn substitute(&self, map: &BTreeMap<JetAtom, Expr>) -> Result<Expr, ExprError> {
        calc::substitute(self, map)
    }

    pub fn substitute_one(&self, atom: &JetAtom, value: &Expr) -> Result<Expr, ExprError> {
        let mut map = BTreeMap::new();
        map.insert(atom.clone(), value.clone());
        calc::substitute(self, &map)
    }

    /// Every atom occurring in the expression, including inside logarithms
    /// and denominators.
    pub fn atoms(&self) -> BTreeSet<JetAtom> {
        let mut set = BTreeSet::new();
        calc::collect_atoms(self, &mut set);
        set
    }

    pub fn contains_atom(&self, atom: &JetAtom) -> bool {
        self.atoms().contains(atom)
    }

    /// True when any atom carries a time derivative.
    pub fn has_time_jets(&self) -> bool {
        self.atoms().iter().any(|a| a.t_order > 0)
    }

    /// Floating point evaluation with atom values supplied by a lookup.
    pub fn eval(&self, lookup: &dyn Fn(&JetAtom) -> Option<f64>) -> Result<f64, EvalError> {
        calc::eval(self, lookup)
    }

    /// Exact rational evaluation; errors on unbound atoms, on division by
    /// zero, and on logarithms (which have no rational value in general).
    pub fn eval_rational(
        &self,
        values: &BTreeMap<JetAtom, BigRational>,
    ) -> Result<BigRational, EvalError> {
        calc::eval_rational(self, values)
    }

    /// Render using plain text conventions (`phi_xx`, `pi_phi`, `lambda_1`).
    pub fn render_plain(&self) -> String {
        render::plain(self)
    }

    /// Render as LaTeX source.
    pub fn render_latex(&self) -> String {
        render::latex(self)
    }

    /// Render in the input grammar (`Dx`/`Dt`/`ln`, `*`, `^`). Only defined
    /// for expressions whose atoms are fields; momenta and multipliers fall
    /// back to their plain names, which the grammar will read as fields.
    pub fn render_input(&self) -> String {
        render::input(self)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_plain())
    }
}
