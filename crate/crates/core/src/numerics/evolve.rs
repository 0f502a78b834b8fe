//! Time integration of the closed Hamilton equations: classical RK4 in time,
//! spectral derivatives in space, 2/3 dealiasing on the state.
//!
//! Building a system eliminates every constraint-defined field from the
//! right-hand sides. A field whose momentum involves its own spatial jets is
//! evolved through its first derivative instead (its bare value never enters
//! the closed equations), which keeps the state representation local.

use crate::dba::Analysis;
use crate::expr::{AtomKind, Expr};
use crate::varcalc::dx_iter;

use super::{Grid, NumericsError, Sampler};

/// One evolved grid variable.
#[derive(Debug, Clone)]
struct EvolvedVar {
    /// Underlying field.
    field: String,
    /// Reported name: the field itself, or `field_x` when evolved through
    /// its first spatial derivative.
    name: String,
    /// How many spatial derivatives separate the stored array from the
    /// field (zero or one).
    offset: u32,
    /// Time derivative of the stored array, in terms of field jets.
    rhs: Expr,
}

/// Integration parameters.
#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Record monitors every this many steps (the first and last step are
    /// always recorded).
    pub monitor_stride: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { dt: 1e-4, t_end: 1.0, monitor_stride: 1 }
    }
}

/// Monitor series from a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Integral of the square of the first evolved variable.
    pub mass: Vec<f64>,
    /// Integral of the canonical Hamiltonian density on the constraint
    /// surface.
    pub hamiltonian: Vec<f64>,
    /// Names of the evolved variables, in field order.
    pub vars: Vec<String>,
    /// Final arrays, one per evolved variable.
    pub final_state: Vec<(String, Vec<f64>)>,
}

fn max_rel_drift(series: &[f64]) -> f64 {
    let Some(&first) = series.first() else { return 0.0 };
    let scale = first.abs().max(1.0);
    series.iter().fold(0.0f64, |m, v| m.max((v - first).abs())) / scale
}

impl Trajectory {
    /// Largest deviation of the mass monitor from its initial value,
    /// relative to `max(1, |initial|)`.
    pub fn max_rel_mass_drift(&self) -> f64 {
        max_rel_drift(&self.mass)
    }

    /// Largest deviation of the Hamiltonian monitor from its initial value,
    /// relative to `max(1, |initial|)`.
    pub fn max_rel_hamiltonian_drift(&self) -> f64 {
        max_rel_drift(&self.hamiltonian)
    }
}

/// A system of closed evolution equations ready to integrate.
pub struct EvolutionSystem {
    grid: Grid,
    vars: Vec<EvolvedVar>,
    /// Canonical Hamiltonian density on the constraint surface.
    monitor: Expr,
    /// Jets needed per right-hand-side evaluation: `(var index, x_order)`.
    needed: Vec<(usize, u32)>,
    /// Indices of evolved variables whose amplitude must stay away from
    /// zero (they appear in denominators or logarithms).
    floor_guard: Vec<usize>,
}

impl EvolutionSystem {
    /// Close the Hamilton equations of an analysis over a concrete grid.
    ///
    /// Fails when the flow of a needed field is left undetermined by the
    /// constraint algorithm, or when a constrained field cannot be
    /// eliminated from the right-hand sides.
    pub fn build(analysis: &Analysis, grid: Grid) -> Result<EvolutionSystem, NumericsError> {
        let defined: Vec<&str> = analysis
            .rewrites
            .iter()
            .filter(|rw| rw.kind == AtomKind::Field && rw.x_order == 0)
            .map(|rw| rw.name.as_str())
            .collect();

        let eoms = analysis.hamilton_eoms_permissive()?;
        let mut vars: Vec<EvolvedVar> = Vec::new();
        for f in &analysis.fields {
            if defined.contains(&f.as_str()) {
                continue;
            }
            let rhs_raw = eoms
                .iter()
                .find(|(name, _)| name == f)
                .map(|(_, r)| r.clone())
                .ok_or_else(|| {
                    NumericsError::Engine(format!("no evolution equation for {f}"))
                })?;
            let reduced = analysis.reduce(&rhs_raw)?;
            let undetermined: Vec<String> = reduced
                .atoms()
                .iter()
                .filter(|a| a.kind == AtomKind::Multiplier)
                .map(|a| a.name.clone())
                .collect();
            if !undetermined.is_empty() {
                return Err(NumericsError::UnsupportedEvolution(format!(
                    "the evolution of {f} depends on the undetermined multiplier {}; \
                     this system cannot be integrated in time",
                    undetermined.join(", ")
                )));
            }
            let momentum = analysis
                .momenta
                .iter()
                .find(|(name, _)| name == f)
                .map(|(_, a)| a.clone())
                .unwrap_or_else(Expr::zero);
            let self_jets =
                momentum.atoms().iter().any(|a| a.kind == AtomKind::Field && a.name == *f);
            let (name, offset, rhs) = if self_jets {
                (format!("{f}_x"), 1, dx_iter(&reduced, 1)?)
            } else {
                (f.clone(), 0, reduced)
            };
            vars.push(EvolvedVar { field: f.clone(), name, offset, rhs });
        }
        if vars.is_empty() {
            return Err(NumericsError::UnsupportedEvolution(
                "the system has no dynamical fields to evolve".into(),
            ));
        }

        let monitor = analysis.reduce(&analysis.canonical_h)?;

        // every atom of every right-hand side and of the monitor must be a
        // time-free spatial jet of an evolved field, at an order the stored
        // arrays can reach
        let mut needed = Vec::new();
        let exprs: Vec<&Expr> =
            vars.iter().map(|v| &v.rhs).chain(std::iter::once(&monitor)).collect();
        for e in exprs {
            for a in e.atoms() {
                if a.kind != AtomKind::Field || a.t_order != 0 {
                    return Err(NumericsError::UnsupportedEvolution(format!(
                        "`{}` survives reduction and cannot be sampled on the grid",
                        Expr::atom(a.clone()).render_plain()
                    )));
                }
                let Some(vi) = vars.iter().position(|v| v.field == a.name) else {
                    return Err(NumericsError::UnsupportedEvolution(format!(
                        "the constrained field {} cannot be eliminated from the \
                         closed equations",
                        a.name
                    )));
                };
                if a.x_order < vars[vi].offset {
                    return Err(NumericsError::UnsupportedEvolution(format!(
                        "{} appears undifferentiated, but only its derivative is \
                         evolved",
                        a.name
                    )));
                }
                if !needed.contains(&(vi, a.x_order)) {
                    needed.push((vi, a.x_order));
                }
            }
        }

        let floor_guard = vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.offset == 0 && analysis.assumptions.iter().any(|a| *a == v.field))
            .map(|(i, _)| i)
            .collect();

        Ok(EvolutionSystem { grid, vars, monitor, needed, floor_guard })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Names of the evolved variables, in field declaration order.
    pub fn var_names(&self) -> Vec<String> {
        self.vars.iter().map(|v| v.name.clone()).collect()
    }

    /// `(variable name, underlying field, derivative offset)` per evolved
    /// variable, in field declaration order.
    pub fn variables(&self) -> Vec<(String, String, u32)> {
        self.vars.iter().map(|v| (v.name.clone(), v.field.clone(), v.offset)).collect()
    }

    /// Evaluate all right-hand sides for the given state.
    fn rhs_all(&self, state: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NumericsError> {
        let n = self.grid.n();
        let mut s = Sampler::new(&self.grid);
        for &(vi, k) in &self.needed {
            let v = &self.vars[vi];
            s.bind_jet(&v.field, k, 0, self.grid.deriv(&state[vi], k - v.offset));
        }
        let mut out = Vec::with_capacity(self.vars.len());
        for v in &self.vars {
            let arr = s.eval(&v.rhs)?.into_array(n);
            out.push(self.grid.project(&arr));
        }
        Ok(out)
    }

    fn monitors(&self, state: &[Vec<f64>]) -> Result<(f64, f64), NumericsError> {
        let n = self.grid.n();
        let mut s = Sampler::new(&self.grid);
        for &(vi, k) in &self.needed {
            let v = &self.vars[vi];
            s.bind_jet(&v.field, k, 0, self.grid.deriv(&state[vi], k - v.offset));
        }
        let mass =
            self.grid.integrate(&state[0].iter().map(|v| v * v).collect::<Vec<_>>());
        let h = self.grid.integrate(&s.eval(&self.monitor)?.into_array(n));
        Ok((mass, h))
    }

    fn guard(&self, state: &[Vec<f64>], time: f64) -> Result<(), NumericsError> {
        for arr in state {
            for &v in arr {
                if !v.is_finite() {
                    return Err(NumericsError::Instability {
                        time,
                        detail: "the state is no longer finite".into(),
                    });
                }
            }
            let max = arr.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if max > 1e8 {
                return Err(NumericsError::Instability {
                    time,
                    detail: format!("the state amplitude reached {max:.3e}"),
                });
            }
        }
        for &vi in &self.floor_guard {
            let min = state[vi].iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            if min < 1e-12 {
                return Err(NumericsError::Instability {
                    time,
                    detail: format!(
                        "|{}| reached {min:.3e}; the equations divide by it",
                        self.vars[vi].field
                    ),
                });
            }
        }
        Ok(())
    }

    /// Integrate from `initial` (arrays keyed by evolved-variable name) and
    /// record the monitors.
    pub fn run(
        &self,
        initial: &[(String, Vec<f64>)],
        opts: &EvolveOptions,
    ) -> Result<Trajectory, NumericsError> {
        let n = self.grid.n();
        if !(opts.dt.is_finite() && opts.dt > 0.0) || !(opts.t_end.is_finite() && opts.t_end > 0.0)
        {
            return Err(NumericsError::InvalidGrid(format!(
                "time step and horizon must be positive, got dt = {}, t_end = {}",
                opts.dt, opts.t_end
            )));
        }
        let mut state = Vec::with_capacity(self.vars.len());
        for v in &self.vars {
            let arr = initial
                .iter()
                .find(|(name, _)| *name == v.name)
                .map(|(_, a)| a.clone())
                .ok_or_else(|| {
                    NumericsError::Engine(format!("no initial data for {}", v.name))
                })?;
            if arr.len() != n {
                return Err(NumericsError::InvalidGrid(format!(
                    "initial data for {} has {} points, the grid has {n}",
                    v.name,
                    arr.len()
                )));
            }
            state.push(self.grid.project(&arr));
        }
        self.guard(&state, 0.0)?;

        let steps = ((opts.t_end / opts.dt).round() as usize).max(1);
        let dt = opts.t_end / steps as f64;
        let stride = opts.monitor_stride.max(1);

        let mut traj = Trajectory {
            times: Vec::new(),
            mass: Vec::new(),
            hamiltonian: Vec::new(),
            vars: self.var_names(),
            final_state: Vec::new(),
        };
        let record = |t: f64, state: &[Vec<f64>], traj: &mut Trajectory| {
            let (mass, h) = self.monitors(state)?;
            traj.times.push(t);
            traj.mass.push(mass);
            traj.hamiltonian.push(h);
            Ok::<(), NumericsError>(())
        };
        record(0.0, &state, &mut traj)?;

        let axpy = |y: &[Vec<f64>], a: f64, x: &[Vec<f64>]| -> Vec<Vec<f64>> {
            y.iter()
                .zip(x.iter())
                .map(|(yr, xr)| yr.iter().zip(xr.iter()).map(|(u, v)| u + a * v).collect())
                .collect()
        };

        for step in 1..=steps {
            let k1 = self.rhs_all(&state)?;
            let k2 = self.rhs_all(&axpy(&state, 0.5 * dt, &k1))?;
            let k3 = self.rhs_all(&axpy(&state, 0.5 * dt, &k2))?;
            let k4 = self.rhs_all(&axpy(&state, dt, &k3))?;
            for (i, arr) in state.iter_mut().enumerate() {
                let next: Vec<f64> = arr
                    .iter()
                    .zip(&k1[i])
                    .zip(&k2[i])
                    .zip(&k3[i])
                    .zip(&k4[i])
                    .map(|((((s, a), b), c), d)| s + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d))
                    .collect();
                *arr = self.grid.project(&next);
            }
            let t = step as f64 * dt;
            self.guard(&state, t)?;
            if step % stride == 0 || step == steps {
                record(t, &state, &mut traj)?;
            }
        }

        traj.final_state = self
            .vars
            .iter()
            .zip(state)
            .map(|(v, arr)| (v.name.clone(), arr))
            .collect();
        Ok(traj)
    }
}

/// Periodized solitary profile `amplitude * sech(rate * (x - center))`,
/// summed over neighboring period images so the seam stays smooth.
pub fn sech_bump(grid: &Grid, amplitude: f64, rate: f64, center: f64) -> Vec<f64> {
    profile(grid, center, |d| amplitude / (rate * d).cosh())
}

/// Periodized `amplitude * sech^2(rate * (x - center))`.
pub fn sech_squared_bump(grid: &Grid, amplitude: f64, rate: f64, center: f64) -> Vec<f64> {
    profile(grid, center, |d| {
        let s = 1.0 / (rate * d).cosh();
        amplitude * s * s
    })
}

fn profile(grid: &Grid, center: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let length = grid.length();
    grid.points()
        .into_iter()
        .map(|x| (-2..=2).map(|m| f(x - center + m as f64 * length)).sum())
        .collect()
}
