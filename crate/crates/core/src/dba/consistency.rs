//! The consistency sweep: preservation in time of every constraint.
//!
//! Each sweep rebuilds the total Hamiltonian with a fresh symbolic
//! multiplier for every constraint found so far and recomputes every
//! consistency bracket. Equations are then resolved one at a time:
//!
//! 1. an equation with a single multiplier appearing bare and linearly is
//!    solved by division (recording the pivot as a nonvanishing assumption
//!    when it is not constant);
//! 2. an equation that is an exact spatial derivative integrates down until
//!    the multiplier appears bare, then solves as above;
//! 3. otherwise the equation is reduced with the oriented replacements from
//!    the known constraints: a vanishing reduction means the equation holds
//!    on the constraint surface; a multiplier-free nonzero reduction is a
//!    contradiction (constant) or a new constraint; a reduction homogeneous
//!    and linear in one multiplier's derivatives forces that multiplier to
//!    zero; a reduction that leaves derivatives of the multiplier against
//!    inhomogeneous terms admits no local solution, so the multiplier is
//!    reported undetermined and the equation dropped.
//!
//! Equations with several multipliers wait for the others to resolve; if
//! that stalls, the remaining equations are solved jointly as a linear
//! system in the bare multipliers. A sweep that produced new constraints
//! triggers another sweep; a sweep that produced none closes the algorithm.

use std::collections::BTreeMap;

use crate::expr::{AtomKind, Expr, ExprError, JetAtom};
use crate::varcalc::{integrate_dx, poisson_with_hamiltonian};

use super::{
    multiplier_names, reduce_with, substitute_multipliers, AnalysisOptions, Constraint, DbaError,
    Rewrite,
};

pub(crate) struct Outcome {
    pub constraints: Vec<Constraint>,
    pub solved: Vec<(String, Expr)>,
    pub assumptions: Vec<String>,
    pub iterations: u32,
    pub rewrites: Vec<Rewrite>,
}

/// Shared mutable context for one analysis run.
struct Ctx {
    fields: Vec<String>,
    rewrites: Vec<Rewrite>,
    assumptions: Vec<String>,
    /// Constraints created so far per generation, for labeling.
    counters: BTreeMap<u32, u32>,
}

impl Ctx {
    fn record_assumption(&mut self, pivot: &Expr) {
        let entries: Vec<String> = match pivot {
            Expr::Rational(_) => Vec::new(),
            Expr::Sum(_) => vec![pivot.render_plain()],
            _ => pivot
                .atoms()
                .into_iter()
                .map(|a| Expr::Atom(a).render_plain())
                .collect(),
        };
        for s in entries {
            if !self.assumptions.contains(&s) {
                self.assumptions.push(s);
            }
        }
    }

    /// Build a constraint of the next generation from a density discovered
    /// while preserving `source`. Extracts an oriented replacement for the
    /// reduction ideal when the density is linear in its leading atom.
    fn make_constraint(
        &mut self,
        density: Expr,
        source_label: &str,
        source_generation: u32,
    ) -> Result<Constraint, DbaError> {
        let density = density.normalize()?;
        let generation = source_generation + 1;
        let idx = {
            let slot = self.counters.entry(generation).or_insert(0);
            *slot += 1;
            *slot
        };
        let label = format!("c{}{}", "t".repeat((generation - 1) as usize), idx);
        let prefix = match generation {
            2 => "mu".to_string(),
            3 => "nu".to_string(),
            g => format!("m{g}"),
        };
        if let Some((rewrite, pivot)) = orient(&density, &self.fields)? {
            self.record_assumption(&pivot);
            self.rewrites.push(rewrite);
        }
        Ok(Constraint {
            label,
            generation,
            density,
            multiplier: format!("{prefix}_{idx}"),
            source: Some(source_label.to_string()),
        })
    }
}

/// Choose the oriented replacement for a constraint density: the
/// highest-derivative atom of the latest-declared field present, provided
/// the density is linear in it. Solving for that atom expresses it through
/// earlier data.
fn orient(
    density: &Expr,
    fields: &[String],
) -> Result<Option<(Rewrite, Expr)>, ExprError> {
    let mut best: Option<(usize, JetAtom)> = None;
    for a in density.atoms() {
        if a.kind != AtomKind::Field || a.t_order != 0 {
            continue;
        }
        let Some(fi) = fields.iter().position(|f| *f == a.name) else { continue };
        let better = match &best {
            None => true,
            Some((bi, ba)) => fi > *bi || (fi == *bi && a.x_order > ba.x_order),
        };
        if better {
            best = Some((fi, a));
        }
    }
    let Some((_, v)) = best else { return Ok(None) };
    let pivot = density.partial_diff(&v)?;
    if pivot.is_zero()? || pivot.contains_atom(&v) {
        return Ok(None);
    }
    let b = density.substitute_one(&v, &Expr::zero())?;
    let recon = Expr::add(vec![
        Expr::mul(vec![pivot.clone(), Expr::Atom(v.clone())]),
        b.clone(),
    ]);
    if !recon.equals(density)? {
        return Ok(None);
    }
    let rhs = b.div(pivot.clone()).neg().normalize()?;
    Ok(Some((
        Rewrite { kind: AtomKind::Field, name: v.name.clone(), x_order: v.x_order, rhs },
        pivot,
    )))
}

pub(crate) fn run(
    fields: &[String],
    canonical_h: &Expr,
    momenta: &[(String, Expr)],
    primaries: Vec<Constraint>,
    options: &AnalysisOptions,
) -> Result<Outcome, DbaError> {
    let mut ctx = Ctx {
        fields: fields.to_vec(),
        rewrites: momenta
            .iter()
            .map(|(f, def)| Rewrite {
                kind: AtomKind::Momentum,
                name: f.clone(),
                x_order: 0,
                rhs: def.clone(),
            })
            .collect(),
        assumptions: Vec::new(),
        counters: BTreeMap::from([(1, primaries.len() as u32)]),
    };
    let mut constraints = primaries;
    let mut iterations = 0u32;
    let solved = loop {
        if iterations >= options.max_iterations {
            return Err(DbaError::NoClosure { iterations });
        }
        iterations += 1;
        let result = run_sweep(canonical_h, &constraints, &mut ctx)?;
        if result.new_constraints.is_empty() {
            break result.solved;
        }
        constraints.extend(result.new_constraints);
    };
    Ok(Outcome {
        constraints,
        solved,
        assumptions: ctx.assumptions,
        iterations,
        rewrites: ctx.rewrites,
    })
}

struct SweepResult {
    new_constraints: Vec<Constraint>,
    solved: Vec<(String, Expr)>,
}

struct Equation {
    source_label: String,
    source_generation: u32,
    raw: Expr,
    done: bool,
}

fn run_sweep(
    canonical_h: &Expr,
    constraints: &[Constraint],
    ctx: &mut Ctx,
) -> Result<SweepResult, DbaError> {
    let mut terms = vec![canonical_h.clone()];
    for c in constraints {
        terms.push(Expr::mul(vec![Expr::multiplier(&c.multiplier), c.density.clone()]));
    }
    let h_t = Expr::add(terms).normalize()?;

    let mut eqs = Vec::new();
    for c in constraints {
        eqs.push(Equation {
            source_label: c.label.clone(),
            source_generation: c.generation,
            raw: poisson_with_hamiltonian(&c.density, &h_t)?,
            done: false,
        });
    }

    let mut solved: Vec<(String, Expr)> = Vec::new();
    let mut new_constraints: Vec<Constraint> = Vec::new();

    loop {
        let mut progress = false;
        for i in 0..eqs.len() {
            if eqs[i].done {
                continue;
            }
            let current = substitute_multipliers(&eqs[i].raw, &solved)?;
            if current.is_zero()? {
                eqs[i].done = true;
                progress = true;
                continue;
            }
            let unknowns = multiplier_names(&current);
            match unknowns.len() {
                0 => {
                    let reduced = reduce_with(&ctx.rewrites, &current)?;
                    if reduced.is_zero()? {
                        eqs[i].done = true;
                    } else if matches!(reduced, Expr::Rational(_)) {
                        return Err(DbaError::InconsistentDynamics {
                            constraint: eqs[i].source_label.clone(),
                            residual: current.render_plain(),
                        });
                    } else {
                        let c = ctx.make_constraint(
                            current,
                            &eqs[i].source_label,
                            eqs[i].source_generation,
                        )?;
                        new_constraints.push(c);
                        eqs[i].done = true;
                    }
                    progress = true;
                }
                1 => {
                    let name = unknowns[0].clone();
                    if let Some(v) = try_algebraic(&current, &name, ctx)? {
                        solved.push((name, v));
                        eqs[i].done = true;
                        progress = true;
                    } else if let Some(v) = try_integration(&current, &name, ctx)? {
                        solved.push((name, v));
                        eqs[i].done = true;
                        progress = true;
                    } else {
                        match fallback(&current, &name, ctx)? {
                            Fallback::Satisfied => {
                                eqs[i].done = true;
                                progress = true;
                            }
                            Fallback::Solved(v) => {
                                solved.push((name, v));
                                eqs[i].done = true;
                                progress = true;
                            }
                            Fallback::NewConstraint(d) => {
                                let c = ctx.make_constraint(
                                    d,
                                    &eqs[i].source_label,
                                    eqs[i].source_generation,
                                )?;
                                new_constraints.push(c);
                                eqs[i].done = true;
                                progress = true;
                            }
                            Fallback::Undetermined => {
                                // no local expression for this multiplier
                                // exists; it stays undetermined and the
                                // equation carries no further information
                                eqs[i].done = true;
                                progress = true;
                            }
                            Fallback::Inconsistent(residual) => {
                                return Err(DbaError::InconsistentDynamics {
                                    constraint: eqs[i].source_label.clone(),
                                    residual,
                                });
                            }
                            Fallback::Stuck => {}
                        }
                    }
                }
                _ => {}
            }
        }
        if progress {
            continue;
        }
        if linear_system_pass(&mut eqs, &mut solved, &mut new_constraints, constraints, ctx)? {
            continue;
        }
        break;
    }

    if let Some(eq) = eqs.iter().find(|e| !e.done) {
        // Every strategy (algebraic elimination, constant-coefficient
        // integration, the joint linear pass) has given up: the remaining
        // multipliers sit under derivative operators whose coefficients
        // depend on the fields.
        return Err(DbaError::UnresolvedMultiplierEquation {
            constraint: eq.source_label.clone(),
        });
    }
    Ok(SweepResult { new_constraints, solved })
}

/// Solve an equation that is linear in the bare multiplier: `A*m + B = 0`
/// with `A`, `B` free of the multiplier. Returns the value, recording the
/// pivot `A` as an assumption when it is not a constant.
fn try_algebraic(
    current: &Expr,
    name: &str,
    ctx: &mut Ctx,
) -> Result<Option<Expr>, ExprError> {
    for a in current.atoms() {
        if a.kind == AtomKind::Multiplier && a.name == name && (a.x_order > 0 || a.t_order > 0) {
            return Ok(None);
        }
    }
    let atom = JetAtom::multiplier(name);
    let pivot = current.partial_diff(&atom)?;
    if pivot.is_zero()? {
        return Ok(None);
    }
    if pivot.atoms().iter().any(|x| x.kind == AtomKind::Multiplier) {
        return Ok(None);
    }
    let b = current.substitute_one(&atom, &Expr::zero())?;
    let recon = Expr::add(vec![
        Expr::mul(vec![pivot.clone(), Expr::Atom(atom)]),
        b.clone(),
    ]);
    if !recon.equals(current)? {
        return Ok(None);
    }
    ctx.record_assumption(&pivot);
    Ok(Some(b.div(pivot).neg().normalize()?))
}

/// Solve an equation that is an exact spatial derivative by integrating it
/// down (dropping the integration constant) until the multiplier appears
/// bare, then dividing.
fn try_integration(
    current: &Expr,
    name: &str,
    ctx: &mut Ctx,
) -> Result<Option<Expr>, ExprError> {
    let mut e = current.clone();
    for _ in 0..16 {
        let Some(f) = integrate_dx(&e)? else { return Ok(None) };
        e = f;
        let has_jets = e
            .atoms()
            .iter()
            .any(|a| a.kind == AtomKind::Multiplier && a.name == name && a.x_order > 0);
        if !has_jets {
            return try_algebraic(&e, name, ctx);
        }
    }
    Ok(None)
}

enum Fallback {
    Satisfied,
    Solved(Expr),
    NewConstraint(Expr),
    Undetermined,
    Inconsistent(String),
    Stuck,
}

/// Last-resort handling of a single-multiplier equation, working with its
/// reduction to the constraint surface.
fn fallback(current: &Expr, name: &str, ctx: &mut Ctx) -> Result<Fallback, DbaError> {
    let reduced = reduce_with(&ctx.rewrites, current)?;
    if reduced.is_zero()? {
        return Ok(Fallback::Satisfied);
    }
    if multiplier_names(&reduced).is_empty() {
        return Ok(if matches!(reduced, Expr::Rational(_)) {
            Fallback::Inconsistent(current.render_plain())
        } else {
            Fallback::NewConstraint(reduced)
        });
    }
    let mut zero_map = BTreeMap::new();
    let mut linear = true;
    for a in reduced.atoms() {
        if a.kind != AtomKind::Multiplier || a.name != name {
            continue;
        }
        if reduced
            .partial_diff(&a)?
            .atoms()
            .iter()
            .any(|x| x.kind == AtomKind::Multiplier)
        {
            linear = false;
        }
        zero_map.insert(a, Expr::zero());
    }
    let homogeneous = reduced.substitute(&zero_map)?.is_zero()?;
    if homogeneous && linear {
        // the equation is a homogeneous linear differential condition on
        // the multiplier; zero is its admissible local solution
        return Ok(Fallback::Solved(Expr::zero()));
    }
    if let Some(v) = try_algebraic(&reduced, name, ctx)? {
        return Ok(Fallback::Solved(v));
    }
    if let Some(v) = try_integration(&reduced, name, ctx)? {
        return Ok(Fallback::Solved(v));
    }
    let has_jets = reduced
        .atoms()
        .iter()
        .any(|a| a.kind == AtomKind::Multiplier && a.name == name && a.x_order > 0);
    if has_jets && !homogeneous {
        // derivatives of the multiplier against inhomogeneous data: any
        // solution would be an antiderivative of field data, not a local
        // expression
        return Ok(Fallback::Undetermined);
    }
    Ok(Fallback::Stuck)
}

/// Joint resolution of the remaining equations as a linear system in the
/// bare multipliers, eliminating in constraint order. Only applies when
/// every pending equation is linear in bare multiplier atoms.
fn linear_system_pass(
    eqs: &mut [Equation],
    solved: &mut Vec<(String, Expr)>,
    new_constraints: &mut Vec<Constraint>,
    constraints: &[Constraint],
    ctx: &mut Ctx,
) -> Result<bool, DbaError> {
    struct Row {
        eq_index: usize,
        coeffs: Vec<(String, Expr)>,
        b: Expr,
    }

    let mut rows = Vec::new();
    for (i, eq) in eqs.iter().enumerate() {
        if eq.done {
            continue;
        }
        let current = substitute_multipliers(&eq.raw, solved)?;
        let names = multiplier_names(&current);
        if names.is_empty() {
            continue;
        }
        for a in current.atoms() {
            if a.kind == AtomKind::Multiplier && (a.x_order > 0 || a.t_order > 0) {
                return Ok(false);
            }
        }
        let mut coeffs = Vec::new();
        let mut b = current.clone();
        for n in &names {
            let atom = JetAtom::multiplier(n);
            let coeff = current.partial_diff(&atom)?;
            if coeff.atoms().iter().any(|x| x.kind == AtomKind::Multiplier) {
                return Ok(false);
            }
            b = b.substitute_one(&atom, &Expr::zero())?;
            coeffs.push((n.clone(), coeff));
        }
        let mut recon = vec![b.clone()];
        for (n, c) in &coeffs {
            recon.push(Expr::mul(vec![c.clone(), Expr::multiplier(n)]));
        }
        if !Expr::add(recon).equals(&current)? {
            return Ok(false);
        }
        rows.push(Row { eq_index: i, coeffs, b });
    }
    if rows.is_empty() {
        return Ok(false);
    }

    let order: Vec<String> = constraints.iter().map(|c| c.multiplier.clone()).collect();
    let mut solutions: Vec<(String, Expr)> = Vec::new();
    for m in &order {
        let mut pos = None;
        for (ri, r) in rows.iter().enumerate() {
            for (n, c) in &r.coeffs {
                if n == m && !c.is_zero()? {
                    pos = Some(ri);
                    break;
                }
            }
            if pos.is_some() {
                break;
            }
        }
        let Some(pos) = pos else { continue };
        let row = rows.remove(pos);
        let pivot = row
            .coeffs
            .iter()
            .find(|(n, _)| n == m)
            .map(|(_, c)| c.clone())
            .expect("pivot present");
        ctx.record_assumption(&pivot);
        let mut value_terms = vec![row.b.clone()];
        for (n, c) in &row.coeffs {
            if n != m {
                value_terms.push(Expr::mul(vec![c.clone(), Expr::multiplier(n)]));
            }
        }
        let value = Expr::add(value_terms).div(pivot.clone()).neg().normalize()?;
        // eliminate m from the other rows: substitute the value, then fold
        // any multipliers it mentions back into the coefficient columns
        for other in rows.iter_mut() {
            let Some(kpos) = other.coeffs.iter().position(|(n, _)| n == m) else { continue };
            let (_, cm) = other.coeffs.remove(kpos);
            if cm.is_zero()? {
                continue;
            }
            let contribution = Expr::mul(vec![cm, value.clone()]).normalize()?;
            let mut extra_b = contribution.clone();
            for n in multiplier_names(&contribution) {
                let atom = JetAtom::multiplier(&n);
                let c2 = contribution.partial_diff(&atom)?;
                extra_b = extra_b.substitute_one(&atom, &Expr::zero())?;
                match other.coeffs.iter_mut().find(|(n2, _)| *n2 == n) {
                    Some((_, c0)) => *c0 = Expr::add(vec![c0.clone(), c2]).normalize()?,
                    None => other.coeffs.push((n, c2)),
                }
            }
            other.b = Expr::add(vec![other.b.clone(), extra_b]).normalize()?;
        }
        eqs[row.eq_index].done = true;
        solutions.push((m.clone(), value));
    }
    if solutions.is_empty() {
        return Ok(false);
    }
    // leftover rows no longer involve any solved multiplier; those with no
    // multipliers left are plain statements about the fields
    for row in rows {
        let mut terms = vec![row.b.clone()];
        let mut residual_names = Vec::new();
        for (n, c) in &row.coeffs {
            if c.is_zero()? {
                continue;
            }
            residual_names.push(n.clone());
            terms.push(Expr::mul(vec![c.clone(), Expr::multiplier(n)]));
        }
        if !residual_names.is_empty() {
            continue; // still constrains the remaining multipliers; retry later
        }
        let residual = Expr::add(terms).normalize()?;
        let reduced = reduce_with(&ctx.rewrites, &residual)?;
        let eq = &eqs[row.eq_index];
        if reduced.is_zero()? {
            // satisfied on the surface
        } else if matches!(reduced, Expr::Rational(_)) {
            return Err(DbaError::InconsistentDynamics {
                constraint: eq.source_label.clone(),
                residual: residual.render_plain(),
            });
        } else {
            let c =
                ctx.make_constraint(residual, &eq.source_label, eq.source_generation)?;
            new_constraints.push(c);
        }
        eqs[row.eq_index].done = true;
    }
    // back-substitute later solutions into earlier ones
    for i in (0..solutions.len()).rev() {
        let late = solutions[i].clone();
        for sol in solutions.iter_mut().take(i) {
            sol.1 = substitute_multipliers(&sol.1, std::slice::from_ref(&late))?;
        }
    }
    solved.extend(solutions);
    Ok(true)
}
