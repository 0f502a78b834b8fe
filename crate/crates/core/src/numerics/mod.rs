//! Numerical backend: evaluates symbolic densities on a periodic grid,
//! cross-validates the Hamilton equations against the input Lagrangian on
//! random constraint-surface data, and integrates the closed equations in
//! time.

pub mod spectral;

mod check;
mod evolve;


use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use num::ToPrimitive;
use rand::Rng;

use crate::expr::{AtomKind, Expr, ExprError, JetAtom};

pub use check::{
    check_eom_equivalence, el_residual_exprs, residual, residual_profiles, EquivalenceReport,
};
pub use evolve::{
    sech_bump, sech_squared_bump, EvolutionSystem, EvolveOptions, Trajectory,
};
pub use spectral::Grid;

/// Guard threshold below which a divisor is treated as vanishing.
const DIV_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, thiserror::Error)]
pub enum NumericsError {
    #[error("{0}")]
    InvalidGrid(String),
    #[error("no grid data bound for `{0}`")]
    UnboundAtom(String),
    #[error("division by a near-zero quantity while evaluating `{0}`")]
    DivisionNearZero(String),
    #[error("logarithm of a non-positive value while evaluating `{0}`")]
    LnNonPositive(String),
    #[error("could not sample data with `{0}` bounded away from zero")]
    AssumptionViolated(String),
    #[error("{0}")]
    UnsupportedEvolution(String),
    #[error("time integration became unstable at t = {time}: {detail}")]
    Instability { time: f64, detail: String },
    #[error("{0}")]
    Engine(String),
}

impl From<ExprError> for NumericsError {
    fn from(e: ExprError) -> Self {
        NumericsError::Engine(e.to_string())
    }
}

impl From<crate::dba::DbaError> for NumericsError {
    fn from(e: crate::dba::DbaError) -> Self {
        NumericsError::Engine(e.to_string())
    }
}

/// Pointwise evaluation failures, tagged with the offending expression only
/// when they surface.
#[derive(Clone, Copy)]
enum PointError {
    DivisionNearZero,
    LnNonPositive,
}

impl PointError {
    fn describe(self, ctx: &Expr) -> NumericsError {
        match self {
            PointError::DivisionNearZero => {
                NumericsError::DivisionNearZero(ctx.render_plain())
            }
            PointError::LnNonPositive => NumericsError::LnNonPositive(ctx.render_plain()),
        }
    }
}

/// Result of evaluating an expression on a grid: either uniform in space or
/// a pointwise array.
#[derive(Clone, Debug)]
pub enum Value {
    Scalar(f64),
    Field(Rc<Vec<f64>>),
}

impl Value {
    pub fn max_abs(&self) -> f64 {
        match self {
            Value::Scalar(s) => s.abs(),
            Value::Field(v) => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        }
    }

    /// Materialize as an array of the given length.
    pub fn into_array(self, n: usize) -> Vec<f64> {
        match self {
            Value::Scalar(s) => vec![s; n],
            Value::Field(rc) => Rc::try_unwrap(rc).unwrap_or_else(|rc| (*rc).clone()),
        }
    }

    fn map(
        self,
        ctx: &Expr,
        f: impl Fn(f64) -> Result<f64, PointError>,
    ) -> Result<Value, NumericsError> {
        let apply = |x: f64| f(x).map_err(|pe| pe.describe(ctx));
        match self {
            Value::Scalar(s) => Ok(Value::Scalar(apply(s)?)),
            Value::Field(rc) => {
                let mut out = Vec::with_capacity(rc.len());
                for &x in rc.iter() {
                    out.push(apply(x)?);
                }
                Ok(Value::Field(Rc::new(out)))
            }
        }
    }

    fn zip(a: Value, b: Value, f: impl Fn(f64, f64) -> f64) -> Value {
        match (a, b) {
            (Value::Scalar(x), Value::Scalar(y)) => Value::Scalar(f(x, y)),
            (Value::Scalar(x), Value::Field(v)) => {
                Value::Field(Rc::new(v.iter().map(|&y| f(x, y)).collect()))
            }
            (Value::Field(v), Value::Scalar(y)) => {
                Value::Field(Rc::new(v.iter().map(|&x| f(x, y)).collect()))
            }
            (Value::Field(u), Value::Field(v)) => {
                Value::Field(Rc::new(u.iter().zip(v.iter()).map(|(&x, &y)| f(x, y)).collect()))
            }
        }
    }
}

/// Binds jet atoms to grid samples and evaluates expressions on them.
///
/// Base data is bound per name and time order at spatial order zero; spatial
/// jets are derived spectrally on demand and cached. Explicit bindings at
/// higher spatial orders take precedence over derivation.
pub struct Sampler<'g> {
    grid: &'g Grid,
    bound: HashMap<(String, u32, u32), Rc<Vec<f64>>>,
    cache: RefCell<HashMap<(String, u32, u32), Rc<Vec<f64>>>>,
}

impl<'g> Sampler<'g> {
    pub fn new(grid: &'g Grid) -> Self {
        Sampler { grid, bound: HashMap::new(), cache: RefCell::new(HashMap::new()) }
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    /// Bind field data at spatial and time order zero.
    pub fn bind(&mut self, name: &str, values: Vec<f64>) {
        self.bind_jet(name, 0, 0, values);
    }

    /// Bind data for a specific jet; `(name, 0, 1)` binds the first time
    /// derivative, from which its spatial jets can be derived.
    pub fn bind_jet(&mut self, name: &str, x_order: u32, t_order: u32, values: Vec<f64>) {
        assert_eq!(values.len(), self.grid.n(), "array length does not match the grid");
        self.cache.borrow_mut().clear();
        self.bound.insert((name.to_string(), x_order, t_order), Rc::new(values));
    }

    pub fn is_bound(&self, name: &str, t_order: u32) -> bool {
        self.bound.contains_key(&(name.to_string(), 0, t_order))
    }

    /// Grid samples of one jet atom. Only field atoms can carry data.
    pub fn atom(&self, a: &JetAtom) -> Result<Rc<Vec<f64>>, NumericsError> {
        let describe = || Expr::atom(a.clone()).render_plain();
        if a.kind != AtomKind::Field {
            return Err(NumericsError::UnboundAtom(describe()));
        }
        let key = (a.name.clone(), a.x_order, a.t_order);
        if let Some(v) = self.bound.get(&key) {
            return Ok(v.clone());
        }
        if let Some(v) = self.cache.borrow().get(&key) {
            return Ok(v.clone());
        }
        // Differentiate from the deepest bound jet at or below the requested
        // spatial order; a potential-form system may only ever bind a first
        // derivative.
        let base = self
            .bound
            .iter()
            .filter(|((n, x, t), _)| *n == a.name && *t == a.t_order && *x <= a.x_order)
            .max_by_key(|((_, x, _), _)| *x);
        let ((_, base_order, _), base) =
            base.ok_or_else(|| NumericsError::UnboundAtom(describe()))?;
        let v = Rc::new(self.grid.deriv(base, a.x_order - base_order));
        self.cache.borrow_mut().insert(key, v.clone());
        Ok(v)
    }

    /// Evaluate an expression pointwise on the grid.
    pub fn eval(&self, e: &Expr) -> Result<Value, NumericsError> {
        match e {
            Expr::Rational(q) => {
                let v = q.to_f64().ok_or_else(|| {
                    NumericsError::Engine(format!("constant {q} does not fit in a float"))
                })?;
                Ok(Value::Scalar(v))
            }
            Expr::Atom(a) => Ok(Value::Field(self.atom(a)?)),
            Expr::Sum(terms) => {
                let mut acc = Value::Scalar(0.0);
                for t in terms {
                    acc = Value::zip(acc, self.eval(t)?, |x, y| x + y);
                }
                Ok(acc)
            }
            Expr::Product(factors) => {
                let mut acc = Value::Scalar(1.0);
                for f in factors {
                    acc = Value::zip(acc, self.eval(f)?, |x, y| x * y);
                }
                Ok(acc)
            }
            Expr::Pow(base, k) => {
                let v = self.eval(base)?;
                let exp = i32::try_from(*k).map_err(|_| {
                    NumericsError::Engine(format!("exponent {k} is out of range"))
                })?;
                if exp >= 0 {
                    v.map(e, move |x| Ok(x.powi(exp)))
                } else {
                    v.map(e, move |x| {
                        if x.abs() < DIV_FLOOR {
                            Err(PointError::DivisionNearZero)
                        } else {
                            Ok(x.powi(exp))
                        }
                    })
                }
            }
            Expr::Ln(arg) => {
                let v = self.eval(arg)?;
                v.map(e, |x| if x <= 0.0 { Err(PointError::LnNonPositive) } else { Ok(x.ln()) })
            }
        }
    }

    /// Largest pointwise magnitude among the top-level terms: the natural
    /// scale against which a residual of the expression is measured.
    pub fn term_scale(&self, e: &Expr) -> Result<f64, NumericsError> {
        match e {
            Expr::Sum(terms) => {
                let mut m = 0.0f64;
                for t in terms {
                    m = m.max(self.eval(t)?.max_abs());
                }
                Ok(m)
            }
            _ => Ok(self.eval(e)?.max_abs()),
        }
    }

    /// `max |e| / (1 + term scale)`: near machine precision when the terms
    /// of `e` cancel identically on the bound data.
    pub fn rel_residual(&self, e: &Expr) -> Result<f64, NumericsError> {
        Ok(self.eval(e)?.max_abs() / (1.0 + self.term_scale(e)?))
    }
}

/// Smooth band-limited sample: an offset plus random low modes whose
/// amplitudes fall off with the mode number.
pub fn band_limited(
    grid: &Grid,
    rng: &mut impl Rng,
    offset: f64,
    amplitude: f64,
    modes: u32,
) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / grid.length();
    let mut coeffs = Vec::new();
    for m in 1..=modes {
        let scale = amplitude / m as f64;
        coeffs.push((m, rng.gen_range(-scale..=scale), rng.gen_range(-scale..=scale)));
    }
    grid.points()
        .into_iter()
        .map(|x| {
            let mut v = offset;
            for &(m, a, b) in &coeffs {
                let arg = base * m as f64 * x;
                v += a * arg.cos() + b * arg.sin();
            }
            v
        })
        .collect()
}
