//! Constrained Hamiltonian analysis of field Lagrangians that are linear in
//! time derivatives.
//!
//! For such Lagrangians the velocity Hessian vanishes identically, every
//! momentum definition is a constraint, and the Legendre transform leaves a
//! canonical Hamiltonian with no velocities. Demanding that each constraint
//! be preserved in time either determines the multiplier in front of it,
//! produces a new (higher generation) constraint, or exposes the system as
//! inconsistent. [`analyze`] drives that procedure to closure and returns an
//! [`Analysis`] holding the full result.

mod consistency;
mod report;

pub use report::{report_json, report_latex, report_plain};

use std::collections::BTreeMap;

use crate::expr::{AtomKind, Expr, ExprError, JetAtom};
use crate::parser::LagrangianSpec;
use crate::varcalc::{dx_iter, euler_op, poisson_with_hamiltonian};

/// Knobs for [`analyze`].
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    /// Maximum number of consistency sweeps before giving up.
    pub max_iterations: u32,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { max_iterations: 10 }
    }
}

/// One constraint density, together with its bookkeeping.
#[derive(Debug, Clone)]
pub struct Constraint {
    /// `c1`, `c2`, ... for the first generation, `ct1`, ... for the second,
    /// `ctt1`, ... for the third.
    pub label: String,
    /// 1 = primary, 2 = secondary, 3 = tertiary, ...
    pub generation: u32,
    /// The density itself, free of velocities and multipliers.
    pub density: Expr,
    /// Name of the multiplier paired with this constraint in the total
    /// Hamiltonian: `lambda_k` for generation one, `mu_k` for generation
    /// two, `nu_k` for generation three.
    pub multiplier: String,
    /// Label of the constraint whose consistency equation produced this one
    /// (`None` for primaries).
    pub source: Option<String>,
}

/// A directed replacement extracted from a constraint: the atom (and all of
/// its higher spatial derivatives) rewrites to the expression.
#[derive(Debug, Clone)]
pub(crate) struct Rewrite {
    pub kind: AtomKind,
    pub name: String,
    pub x_order: u32,
    pub rhs: Expr,
}

/// Errors from the constraint analysis.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DbaError {
    #[error(
        "partially regular Lagrangians unsupported: the velocity Hessian has rank {rank}"
    )]
    PartiallyRegular { rank: usize },
    #[error("inconsistent dynamics: preserving {constraint} demands {residual} = 0")]
    InconsistentDynamics { constraint: String, residual: String },
    #[error("constraint generation did not close within {iterations} consistency sweeps")]
    NoClosure { iterations: u32 },
    #[error(
        "the consistency equation of {constraint} determines its multipliers only through \
         spatial derivatives with field-dependent coefficients, which this solver cannot invert"
    )]
    UnresolvedMultiplierEquation { constraint: String },
    #[error("the equations of motion contain undetermined multipliers: {}", .0.join(", "))]
    UndeterminedMultipliers(Vec<String>),
    #[error("internal consistency check failed: {0}")]
    Internal(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Result of a completed constraint analysis.
#[derive(Debug, Clone)]
pub struct Analysis {
    /// Field names in declaration order.
    pub fields: Vec<String>,
    /// The input Lagrangian density (normalized).
    pub lagrangian: Expr,
    /// Velocity Hessian (all zeros for supported systems).
    pub hessian: Vec<Vec<Expr>>,
    /// Generic rank of the Hessian (zero for supported systems).
    pub rank: usize,
    /// Momentum definitions: for each field, the derivative of the
    /// Lagrangian by its velocity, in declaration order.
    pub momenta: Vec<(String, Expr)>,
    /// Canonical (velocity-free) Hamiltonian density.
    pub canonical_h: Expr,
    /// All constraints, in discovery order.
    pub constraints: Vec<Constraint>,
    /// Solved multiplier values in constraint order, fully back-substituted:
    /// values reference fields, momenta, and at most the undetermined
    /// multipliers.
    pub multipliers: Vec<(String, Expr)>,
    /// Multipliers the consistency conditions leave undetermined (gauge
    /// freedom or multipliers that would need antiderivatives of field data).
    pub undetermined: Vec<String>,
    /// Quantities assumed nonvanishing while dividing by pivots.
    pub assumptions: Vec<String>,
    /// Total Hamiltonian density: canonical part plus multiplier times
    /// constraint over every generation, with solved multipliers substituted.
    pub total_h: Expr,
    /// Number of consistency sweeps executed.
    pub iterations: u32,
    pub(crate) rewrites: Vec<Rewrite>,
}

/// Velocity Hessian of the Lagrangian and its generic symbolic rank.
pub fn hessian_and_rank(
    fields: &[String],
    lagrangian: &Expr,
) -> Result<(Vec<Vec<Expr>>, usize), ExprError> {
    let n = fields.len();
    let vels: Vec<JetAtom> = fields.iter().map(|f| JetAtom::field_jet(f, 0, 1)).collect();
    let mut w = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        let row = lagrangian.partial_diff(&vels[i])?;
        for (j, vel) in vels.iter().enumerate() {
            w[i][j] = row.partial_diff(vel)?;
        }
    }
    let mut m = w.clone();
    let mut rank = 0usize;
    for col in 0..n {
        let mut pivot = None;
        for (r, row) in m.iter().enumerate().take(n).skip(rank) {
            if !row[col].is_zero()? {
                pivot = Some(r);
                break;
            }
        }
        let Some(p) = pivot else { continue };
        m.swap(rank, p);
        let pv = m[rank][col].clone();
        for r in rank + 1..n {
            if m[r][col].is_zero()? {
                continue;
            }
            let factor = m[r][col].clone().div(pv.clone());
            for c2 in col..n {
                m[r][c2] = m[r][c2]
                    .clone()
                    .sub(Expr::mul(vec![factor.clone(), m[rank][c2].clone()]))
                    .normalize()?;
            }
        }
        rank += 1;
    }
    Ok((w, rank))
}

/// Momentum definitions and the primary constraints `pi_f - dL/d(f_t)`.
fn primary_data(
    fields: &[String],
    lagrangian: &Expr,
) -> Result<(Vec<(String, Expr)>, Vec<Constraint>), ExprError> {
    let mut momenta = Vec::new();
    let mut constraints = Vec::new();
    for (i, f) in fields.iter().enumerate() {
        let def = lagrangian.partial_diff(&JetAtom::field_jet(f, 0, 1))?;
        let density = Expr::momentum(f).sub(def.clone()).normalize()?;
        momenta.push((f.clone(), def));
        constraints.push(Constraint {
            label: format!("c{}", i + 1),
            generation: 1,
            density,
            multiplier: format!("lambda_{}", i + 1),
            source: None,
        });
    }
    Ok((momenta, constraints))
}

/// Canonical Hamiltonian density: sum of momentum definitions times
/// velocities minus the Lagrangian. For velocity-linear Lagrangians the
/// velocity terms cancel exactly.
fn canonical_hamiltonian(
    momenta: &[(String, Expr)],
    lagrangian: &Expr,
) -> Result<Expr, DbaError> {
    let mut terms = vec![lagrangian.clone().neg()];
    for (f, def) in momenta {
        terms.push(Expr::mul(vec![def.clone(), Expr::field_jet(f, 0, 1)]));
    }
    let h = Expr::add(terms).normalize()?;
    if h.has_time_jets() {
        return Err(DbaError::Internal(
            "canonical Hamiltonian retains velocities".to_string(),
        ));
    }
    Ok(h)
}

/// Names of multiplier atoms appearing in an expression.
pub(crate) fn multiplier_names(e: &Expr) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for a in e.atoms() {
        if a.kind == AtomKind::Multiplier && !names.contains(&a.name) {
            names.push(a.name.clone());
        }
    }
    names
}

/// Substitute solved multipliers (and their spatial derivatives) into an
/// expression.
pub(crate) fn substitute_multipliers(
    e: &Expr,
    solved: &[(String, Expr)],
) -> Result<Expr, ExprError> {
    let mut map = BTreeMap::new();
    for a in e.atoms() {
        if a.kind != AtomKind::Multiplier || map.contains_key(&a) {
            continue;
        }
        if let Some((_, v)) = solved.iter().find(|(n, _)| *n == a.name) {
            map.insert(a.clone(), dx_iter(v, a.x_order)?);
        }
    }
    if map.is_empty() {
        return Ok(e.normalize()?);
    }
    e.substitute(&map)
}

/// Reduce an expression with the oriented constraint replacements, repeating
/// until nothing changes (with a cap as a safety net).
pub(crate) fn reduce_with(rewrites: &[Rewrite], e: &Expr) -> Result<Expr, ExprError> {
    let mut cur = e.normalize()?;
    for _ in 0..64 {
        let mut changed = false;
        for rw in rewrites {
            let mut map = BTreeMap::new();
            for a in cur.atoms() {
                if a.kind == rw.kind
                    && a.name == rw.name
                    && a.t_order == 0
                    && a.x_order >= rw.x_order
                {
                    map.insert(a.clone(), dx_iter(&rw.rhs, a.x_order - rw.x_order)?);
                }
            }
            if !map.is_empty() {
                cur = cur.substitute(&map)?;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(cur)
}

/// Run the full constraint analysis on a parsed system.
pub fn analyze(spec: &LagrangianSpec, options: &AnalysisOptions) -> Result<Analysis, DbaError> {
    let (hessian, rank) = hessian_and_rank(&spec.fields, &spec.lagrangian)?;
    if rank > 0 {
        return Err(DbaError::PartiallyRegular { rank });
    }
    let (momenta, primaries) = primary_data(&spec.fields, &spec.lagrangian)?;
    let canonical_h = canonical_hamiltonian(&momenta, &spec.lagrangian)?;
    let outcome = consistency::run(&spec.fields, &canonical_h, &momenta, primaries, options)?;

    let solved = finalize_multipliers(outcome.solved)?;
    let mut multipliers = Vec::new();
    let mut undetermined = Vec::new();
    for c in &outcome.constraints {
        match solved.iter().find(|(n, _)| *n == c.multiplier) {
            Some((n, v)) => multipliers.push((n.clone(), v.clone())),
            None => undetermined.push(c.multiplier.clone()),
        }
    }

    let mut terms = vec![canonical_h.clone()];
    for c in &outcome.constraints {
        terms.push(Expr::mul(vec![Expr::multiplier(&c.multiplier), c.density.clone()]));
    }
    let symbolic_total = Expr::add(terms).normalize()?;
    let total_h = substitute_multipliers(&symbolic_total, &multipliers)?;

    let analysis = Analysis {
        fields: spec.fields.clone(),
        lagrangian: spec.lagrangian.clone(),
        hessian,
        rank,
        momenta,
        canonical_h,
        constraints: outcome.constraints,
        multipliers,
        undetermined,
        assumptions: outcome.assumptions,
        total_h,
        iterations: outcome.iterations,
        rewrites: outcome.rewrites,
    };
    analysis.verify_closure()?;
    Ok(analysis)
}

/// Back-substitute solved multipliers into each other so every stored value
/// references only fields, momenta, and undetermined multipliers. Solutions
/// form a dependency order by solve time, so a bounded number of passes
/// reaches a fixed point.
fn finalize_multipliers(
    mut solved: Vec<(String, Expr)>,
) -> Result<Vec<(String, Expr)>, ExprError> {
    let n = solved.len();
    for _ in 0..n {
        let mut changed = false;
        for i in 0..n {
            let (name, value) = solved[i].clone();
            let others: Vec<(String, Expr)> = solved
                .iter()
                .filter(|(other, _)| *other != name)
                .cloned()
                .collect();
            if multiplier_names(&value).iter().any(|m| others.iter().any(|(n2, _)| n2 == m)) {
                let new = substitute_multipliers(&value, &others)?;
                if !new.equals(&value)? {
                    solved[i].1 = new;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(solved)
}

impl Analysis {
    /// Look up a constraint by label.
    pub fn constraint(&self, label: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.label == label)
    }

    /// Look up a solved multiplier value.
    pub fn multiplier_value(&self, name: &str) -> Option<&Expr> {
        self.multipliers.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// Reduce an expression with the oriented replacements extracted from
    /// the constraints (momenta rewrite to their definitions, higher
    /// generation constraints to their solved atom). The result is zero
    /// exactly when the expression vanishes on the constraint surface, for
    /// expressions in the reachable fragment.
    pub fn reduce(&self, e: &Expr) -> Result<Expr, ExprError> {
        reduce_with(&self.rewrites, e)
    }

    /// Substitute every momentum atom by its definition.
    pub fn substitute_momenta(&self, e: &Expr) -> Result<Expr, ExprError> {
        let mut map = BTreeMap::new();
        for a in e.atoms() {
            if a.kind != AtomKind::Momentum || a.t_order != 0 || map.contains_key(&a) {
                continue;
            }
            if let Some((_, def)) = self.momenta.iter().find(|(f, _)| *f == a.name) {
                map.insert(a.clone(), dx_iter(def, a.x_order)?);
            }
        }
        if map.is_empty() {
            return Ok(e.normalize()?);
        }
        e.substitute(&map)
    }

    /// Hamilton equations of motion from the total Hamiltonian, with solved
    /// multipliers substituted and momenta replaced by their definitions.
    /// Undetermined multipliers stay as symbols in the right-hand sides.
    /// The result pairs `"f"` and `"pi_f"` names with the corresponding
    /// time-derivative right-hand sides, fields first, in declaration order.
    pub fn hamilton_eoms_permissive(&self) -> Result<Vec<(String, Expr)>, DbaError> {
        let mut out = Vec::new();
        for f in &self.fields {
            let rhs = euler_op(&self.total_h, AtomKind::Momentum, f)?;
            out.push((f.clone(), self.substitute_momenta(&rhs)?));
        }
        for f in &self.fields {
            let rhs = euler_op(&self.total_h, AtomKind::Field, f)?.neg().normalize()?;
            out.push((format!("pi_{f}"), self.substitute_momenta(&rhs)?));
        }
        Ok(out)
    }

    /// Hamilton equations of motion, requiring every multiplier to have been
    /// determined: errors with the list of offending multipliers otherwise.
    pub fn hamilton_eoms(&self) -> Result<Vec<(String, Expr)>, DbaError> {
        let eoms = self.hamilton_eoms_permissive()?;
        let mut offenders = Vec::new();
        for (_, rhs) in &eoms {
            for m in multiplier_names(rhs) {
                if !offenders.contains(&m) {
                    offenders.push(m);
                }
            }
        }
        if offenders.is_empty() {
            Ok(eoms)
        } else {
            Err(DbaError::UndeterminedMultipliers(offenders))
        }
    }

    /// Euler-Lagrange equations of the input Lagrangian, one density per
    /// field (each understood as `= 0`).
    pub fn lagrangian_eoms(&self) -> Result<Vec<(String, Expr)>, ExprError> {
        let mut out = Vec::new();
        for f in &self.fields {
            out.push((f.clone(), euler_op(&self.lagrangian, AtomKind::Field, f)?));
        }
        Ok(out)
    }

    /// Check that the Hamiltonian flow reproduces the Euler-Lagrange
    /// equations: substituting the Hamilton right-hand sides for every time
    /// derivative in each Euler-Lagrange density must give zero on the
    /// constraint surface. Returns `false` when a residual fails to vanish
    /// or still contains an undetermined multiplier.
    pub fn cross_check_lagrangian(&self) -> Result<bool, DbaError> {
        let eoms = self.hamilton_eoms_permissive()?;
        let rhs_of = |name: &str| -> Option<&Expr> {
            eoms.iter().find(|(n, _)| n == name).map(|(_, v)| v)
        };
        for f in &self.fields {
            let el = euler_op(&self.lagrangian, AtomKind::Field, f)?;
            let mut map = BTreeMap::new();
            for a in el.atoms() {
                if a.t_order == 0 || map.contains_key(&a) {
                    continue;
                }
                if a.t_order > 1 || a.kind != AtomKind::Field {
                    return Ok(false);
                }
                let Some(rhs) = rhs_of(&a.name) else { return Ok(false) };
                map.insert(a.clone(), dx_iter(rhs, a.x_order)?);
            }
            let substituted =
                if map.is_empty() { el } else { el.substitute(&map)? };
            let names = multiplier_names(&substituted);
            if names.iter().any(|m| self.undetermined.contains(m)) {
                return Ok(false);
            }
            if !self.reduce(&substituted)?.is_zero()? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Re-derive every consistency equation from the final total
    /// Hamiltonian and check that it vanishes on the constraint surface.
    /// Equations involving undetermined multipliers are skipped (their
    /// preservation is what left the multiplier undetermined).
    pub fn verify_closure(&self) -> Result<(), DbaError> {
        for c in &self.constraints {
            let e = poisson_with_hamiltonian(&c.density, &self.total_h)?;
            if multiplier_names(&e).iter().any(|m| self.undetermined.contains(m)) {
                continue;
            }
            let r = self.reduce(&e)?;
            if !r.is_zero()? {
                return Err(DbaError::Internal(format!(
                    "consistency of {} does not close; residual {}",
                    c.label, r
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
