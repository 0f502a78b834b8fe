//! Numerical cross-validation: evaluate the Euler-Lagrange residuals of the
//! input Lagrangian on random constraint-surface data, with every time
//! derivative supplied by the Hamilton equations the analysis produced. When
//! the two formulations describe the same dynamics the residuals cancel to
//! rounding; a wrong multiplier or a wrong sign leaves a residual of order
//! one.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dba::Analysis;
use crate::expr::{AtomKind, Expr, JetAtom};
use crate::varcalc::{dx_iter, total_dt};

use super::{band_limited, Grid, NumericsError, Sampler};

/// Outcome of [`check_eom_equivalence`].
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    /// Worst relative residual across all samples and equations.
    pub max_rel_error: f64,
    /// Worst relative residual per equation, in field declaration order;
    /// `dt(f)` rows check that the evolution of a constrained field matches
    /// the time derivative of its defining expression.
    pub per_equation: Vec<(String, f64)>,
    /// Number of random field configurations checked.
    pub samples: usize,
    /// Skipped equations and sampling caveats.
    pub notes: Vec<String>,
}

fn has_multiplier(e: &Expr) -> bool {
    e.atoms().iter().any(|a| a.kind == AtomKind::Multiplier)
}

/// Euler-Lagrange residuals of the input Lagrangian with every first time
/// derivative replaced by the supplied flow (`field -> d field / dt`).
///
/// Returns `(field, None)` for equations that need a time derivative the
/// flow does not provide.
pub fn el_residual_exprs(
    analysis: &Analysis,
    flow: &[(String, Expr)],
) -> Result<Vec<(String, Option<Expr>)>, NumericsError> {
    let el = analysis.lagrangian_eoms()?;
    let mut out = Vec::new();
    for (field, expr) in el {
        let mut map = BTreeMap::new();
        let mut missing = false;
        for a in expr.atoms() {
            if a.t_order == 0 {
                continue;
            }
            if a.t_order > 1 || a.kind != AtomKind::Field {
                return Err(NumericsError::Engine(format!(
                    "unexpected time derivative `{}` in an Euler-Lagrange equation",
                    Expr::atom(a.clone()).render_plain()
                )));
            }
            match flow.iter().find(|(g, _)| *g == a.name) {
                Some((_, rhs)) if !has_multiplier(rhs) => {
                    map.insert(a.clone(), dx_iter(rhs, a.x_order)?);
                }
                _ => {
                    missing = true;
                    break;
                }
            }
        }
        if missing {
            out.push((field, None));
        } else {
            out.push((field, Some(expr.substitute(&map)?)));
        }
    }
    Ok(out)
}

/// How the fields of an analysis are pinned to the constraint surface when
/// sampling data.
struct SurfacePlan {
    /// Fields sampled as random band-limited data, with their offsets.
    free: Vec<(String, f64)>,
    /// Fields defined pointwise by a constraint solved for the bare field.
    defined: Vec<(String, Expr)>,
    /// Fields constrained only through their derivatives; pinned to zero,
    /// which satisfies any constraint where every term carries the field.
    pinned: Vec<String>,
    /// Free fields that must stay away from zero.
    floors: Vec<String>,
}

fn surface_plan(analysis: &Analysis) -> SurfacePlan {
    let mut defined = Vec::new();
    let mut pinned = Vec::new();
    for rw in &analysis.rewrites {
        if rw.kind != AtomKind::Field {
            continue;
        }
        if rw.x_order == 0 {
            defined.push((rw.name.clone(), rw.rhs.clone()));
        } else {
            pinned.push(rw.name.clone());
        }
    }
    let mut free = Vec::new();
    let mut floors = Vec::new();
    for f in &analysis.fields {
        if defined.iter().any(|(n, _)| n == f) || pinned.contains(f) {
            continue;
        }
        let needs_floor = analysis.assumptions.iter().any(|a| a == f);
        if needs_floor {
            floors.push(f.clone());
        }
        free.push((f.clone(), if needs_floor { 1.5 } else { 0.0 }));
    }
    SurfacePlan { free, defined, pinned, floors }
}

/// Draw one constraint-surface configuration, retrying when an assumption
/// floor is violated.
fn sample_surface<'g>(
    plan: &SurfacePlan,
    grid: &'g Grid,
    rng: &mut ChaCha8Rng,
) -> Result<Sampler<'g>, NumericsError> {
    let n = grid.n();
    'attempt: for _ in 0..10 {
        let mut s = Sampler::new(grid);
        for (f, offset) in &plan.free {
            s.bind(f, band_limited(grid, rng, *offset, 0.25, 6));
        }
        for f in &plan.pinned {
            s.bind(f, vec![0.0; n]);
        }
        let mut pending = plan.defined.clone();
        while !pending.is_empty() {
            let mut next = Vec::new();
            let mut progressed = false;
            for (f, def) in pending {
                match s.eval(&def) {
                    Ok(v) => {
                        let arr = v.into_array(n);
                        s.bind(&f, arr);
                        progressed = true;
                    }
                    Err(NumericsError::UnboundAtom(_)) => next.push((f, def)),
                    Err(e) => return Err(e),
                }
            }
            if !progressed {
                return Err(NumericsError::Engine(
                    "constraint definitions depend on each other circularly".into(),
                ));
            }
            pending = next;
        }
        for f in &plan.floors {
            let arr = s.atom(&JetAtom::field(f))?;
            if arr.iter().any(|v| v.abs() < 0.5) {
                continue 'attempt;
            }
        }
        return Ok(s);
    }
    Err(NumericsError::AssumptionViolated(plan.floors.join(", ")))
}

/// Check that the Hamilton equations produced by the analysis reproduce the
/// Euler-Lagrange dynamics of the input Lagrangian.
///
/// For each of `samples` random band-limited field configurations pinned to
/// the constraint surface, the Euler-Lagrange residual of every field is
/// evaluated with time derivatives taken from the Hamilton flow, and the
/// evolution of every constraint-defined field is compared against the time
/// derivative of its definition. The report carries the worst relative
/// residual seen.
pub fn check_eom_equivalence(
    analysis: &Analysis,
    grid: &Grid,
    samples: usize,
    seed: u64,
) -> Result<EquivalenceReport, NumericsError> {
    let n = grid.n();
    let eoms = analysis.hamilton_eoms_permissive()?;
    let flow: Vec<(String, Expr)> = eoms
        .into_iter()
        .filter(|(name, _)| analysis.fields.contains(name))
        .collect();
    let determined: Vec<(String, Expr)> =
        flow.iter().filter(|(_, r)| !has_multiplier(r)).cloned().collect();

    let mut notes = Vec::new();
    for (f, r) in &flow {
        if has_multiplier(r) {
            notes.push(format!(
                "d{f}/dt is not fixed by the constraint algorithm; it does not enter \
                 any Euler-Lagrange residual checked here"
            ));
        }
    }

    let residuals = el_residual_exprs(analysis, &determined)?;
    for (f, r) in &residuals {
        if r.is_none() {
            notes.push(format!(
                "equation for {f} skipped: it involves an undetermined time derivative"
            ));
        }
    }

    let plan = surface_plan(analysis);
    for f in &plan.pinned {
        notes.push(format!("{f} is sampled as zero, the simplest constraint-surface data"));
    }

    let mut per: Vec<(String, f64)> = Vec::new();
    let mut bump = |label: String, rel: f64| {
        if let Some(row) = per.iter_mut().find(|(l, _)| *l == label) {
            row.1 = row.1.max(rel);
        } else {
            per.push((label, rel));
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let mut s = sample_surface(&plan, grid, &mut rng)?;

        // sanity: the sampled data really lies on the constraint surface
        for c in analysis.constraints.iter().filter(|c| c.generation > 1) {
            let rel = s.rel_residual(&c.density)?;
            if rel > 1e-9 {
                return Err(NumericsError::Engine(format!(
                    "sampled data violates constraint {} (relative size {rel:.3e})",
                    c.label
                )));
            }
        }

        // bind the flow as time-derivative data
        let mut t_arrays = Vec::new();
        for (g, rhs) in &determined {
            t_arrays.push((g.clone(), s.eval(rhs)?.into_array(n)));
        }
        for (g, arr) in t_arrays {
            s.bind_jet(&g, 0, 1, arr);
        }

        for (f, maybe) in &residuals {
            if let Some(expr) = maybe {
                bump(f.clone(), s.rel_residual(expr)?);
            }
        }

        // a constraint-defined field must evolve as its definition does
        for (f, def) in &plan.defined {
            let Some((_, rf)) = determined.iter().find(|(g, _)| g == f) else {
                continue;
            };
            let lhs = s.eval(rf)?.into_array(n);
            let rhs = match s.eval(&total_dt(def)?) {
                Ok(v) => v.into_array(n),
                Err(NumericsError::UnboundAtom(what)) => {
                    let note = format!(
                        "consistency of {f} skipped: its definition evolves through `{what}`"
                    );
                    if !notes.contains(&note) {
                        notes.push(note);
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            let scale = 1.0
                + lhs.iter().chain(rhs.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
            let diff = lhs
                .iter()
                .zip(rhs.iter())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            bump(format!("dt({f})"), diff / scale);
        }
    }

    let max_rel_error = per.iter().fold(0.0f64, |m, (_, r)| m.max(*r));
    Ok(EquivalenceReport { max_rel_error, per_equation: per, samples, notes })
}

/// Euler-Lagrange residual arrays of the analyzed Lagrangian on explicitly
/// sampled data.
///
/// `data` binds jets `(name, x_order, t_order)` to grid arrays; jets that are
/// not bound are derived spectrally from the deepest bound jet of the same
/// time order. Useful for testing a claimed solution: on an exact solution
/// every residual vanishes to rounding.
pub fn residual_profiles(
    analysis: &Analysis,
    grid: &Grid,
    data: &[(String, u32, u32, Vec<f64>)],
) -> Result<Vec<(String, Vec<f64>)>, NumericsError> {
    let mut s = Sampler::new(grid);
    for (name, xo, to, arr) in data {
        s.bind_jet(name, *xo, *to, arr.clone());
    }
    let mut out = Vec::new();
    for (f, r) in analysis.lagrangian_eoms()? {
        let v = s.eval(&r)?;
        out.push((f, v.into_array(grid.n())));
    }
    Ok(out)
}

/// Largest absolute Euler-Lagrange residual over all fields and grid points.
pub fn residual(
    analysis: &Analysis,
    grid: &Grid,
    data: &[(String, u32, u32, Vec<f64>)],
) -> Result<f64, NumericsError> {
    let profiles = residual_profiles(analysis, grid, data)?;
    Ok(profiles
        .iter()
        .flat_map(|(_, arr)| arr.iter())
        .fold(0.0f64, |m, v| m.max(v.abs())))
}
