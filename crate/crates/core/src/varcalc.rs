//! Variational calculus on one-dimensional densities: total derivatives,
//! Euler operators, equivalence modulo total spatial derivatives, exact
//! spatial antiderivatives, and Poisson brackets of local densities with
//! Hamiltonian functionals.
//!
//! Densities live on a spatial circle, so integration by parts never
//! produces boundary terms: two densities define the same functional exactly
//! when their difference is a total spatial derivative (plus a constant,
//! which integrates to something state independent and is ignored here).

use std::collections::BTreeSet;

use crate::expr::{AtomKind, Expr, ExprError, JetAtom};

/// Total spatial derivative: every atom gains one `x` order through the
/// chain rule.
pub fn total_dx(e: &Expr) -> Result<Expr, ExprError> {
    dx_tree(e).normalize()
}

fn dx_tree(e: &Expr) -> Expr {
    match e {
        Expr::Rational(_) => Expr::zero(),
        Expr::Atom(a) => Expr::Atom(a.dx()),
        Expr::Sum(v) => Expr::Sum(v.iter().map(dx_tree).collect()),
        Expr::Product(v) => {
            let mut terms = Vec::with_capacity(v.len());
            for i in 0..v.len() {
                let mut fs = v.clone();
                fs[i] = dx_tree(&v[i]);
                terms.push(Expr::Product(fs));
            }
            Expr::Sum(terms)
        }
        Expr::Pow(b, n) => {
            if *n == 0 {
                Expr::zero()
            } else {
                Expr::Product(vec![Expr::int(*n), Expr::Pow(b.clone(), n - 1), dx_tree(b)])
            }
        }
        Expr::Ln(b) => Expr::Product(vec![dx_tree(b), Expr::Pow(b.clone(), -1)]),
    }
}

/// Total temporal derivative. The systems handled here are first order in
/// time, so applying this to an expression that already carries a time jet
/// is refused rather than silently producing second-order jets.
pub fn total_dt(e: &Expr) -> Result<Expr, ExprError> {
    if e.has_time_jets() {
        return Err(ExprError::TimeJetPresent);
    }
    dt_tree(e).normalize()
}

fn dt_tree(e: &Expr) -> Expr {
    match e {
        Expr::Rational(_) => Expr::zero(),
        Expr::Atom(a) => Expr::Atom(a.dt()),
        Expr::Sum(v) => Expr::Sum(v.iter().map(dt_tree).collect()),
        Expr::Product(v) => {
            let mut terms = Vec::with_capacity(v.len());
            for i in 0..v.len() {
                let mut fs = v.clone();
                fs[i] = dt_tree(&v[i]);
                terms.push(Expr::Product(fs));
            }
            Expr::Sum(terms)
        }
        Expr::Pow(b, n) => {
            if *n == 0 {
                Expr::zero()
            } else {
                Expr::Product(vec![Expr::int(*n), Expr::Pow(b.clone(), n - 1), dt_tree(b)])
            }
        }
        Expr::Ln(b) => Expr::Product(vec![dt_tree(b), Expr::Pow(b.clone(), -1)]),
    }
}

/// Apply `total_dx` repeatedly.
pub fn dx_iter(e: &Expr, k: u32) -> Result<Expr, ExprError> {
    let mut out = e.clone();
    for _ in 0..k {
        out = total_dx(&out)?;
    }
    Ok(out)
}

/// Euler operator (variational derivative) of a density with respect to the
/// named quantity: the alternating sum over every jet of that quantity of
/// total derivatives of the partial derivatives.
pub fn euler_op(e: &Expr, kind: AtomKind, name: &str) -> Result<Expr, ExprError> {
    let mut terms = Vec::new();
    for atom in e.atoms() {
        if atom.kind != kind || atom.name != name {
            continue;
        }
        let mut piece = e.partial_diff(&atom)?;
        for _ in 0..atom.t_order {
            piece = total_dt(&piece)?;
        }
        piece = dx_iter(&piece, atom.x_order)?;
        if (atom.x_order + atom.t_order) % 2 == 1 {
            piece = piece.neg();
        }
        terms.push(piece);
    }
    Expr::add(terms).normalize()
}

/// Decide whether two densities define the same functional on the circle:
/// their difference must be a total spatial derivative. Constant differences
/// are accepted too, since they do not affect any dynamics derived from the
/// functional. The test applies the Euler operator for every quantity in the
/// difference; on a single spatial dimension the kernel of all Euler
/// operators is exactly the total derivatives plus constants.
pub fn equal_mod_dx(a: &Expr, b: &Expr) -> Result<bool, ExprError> {
    let d = a.clone().sub(b.clone()).normalize()?;
    if matches!(d, Expr::Rational(_)) {
        return Ok(true);
    }
    let mut names: BTreeSet<(AtomKind, String)> = BTreeSet::new();
    for atom in d.atoms() {
        names.insert((atom.kind, atom.name.clone()));
    }
    for (kind, name) in names {
        if !euler_op(&d, kind, &name)?.is_zero()? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Attempt to write a density as a total spatial derivative, returning the
/// antiderivative density. Works by repeatedly stripping the highest-order
/// jet: if `e = D_x F`, the coefficient of the top jet in `e` is linear and
/// equals a partial derivative of `F` by the predecessor jet, so a polynomial
/// antiderivative step peels it off. Returns `Ok(None)` when the density is
/// not an exact derivative (or is outside the polynomial fragment this
/// handles, e.g. antiderivatives that would need logarithms).
pub fn integrate_dx(e: &Expr) -> Result<Option<Expr>, ExprError> {
    let mut rem = e.normalize()?;
    let mut acc = Expr::zero();
    for _ in 0..256 {
        if rem.is_zero()? {
            return Ok(Some(acc.normalize()?));
        }
        let atoms = rem.atoms();
        let top = atoms
            .iter()
            .max_by_key(|a| (a.x_order, a.kind, a.name.clone(), a.t_order))
            .cloned()
            .expect("nonzero expression has atoms");
        if top.x_order == 0 {
            return Ok(None);
        }
        let coeff = rem.partial_diff(&top)?;
        if coeff.contains_atom(&top) {
            // nonlinear in the top jet, cannot be exact
            return Ok(None);
        }
        let mut prev = top.clone();
        prev.x_order -= 1;
        let Some(step) = antiderivative_in(&coeff, &prev)? else {
            return Ok(None);
        };
        acc = Expr::add(vec![acc, step.clone()]);
        rem = rem.sub(total_dx(&step)?).normalize()?;
    }
    Ok(None)
}

/// Polynomial antiderivative of a canonical expression with respect to one
/// atom. Fails when the atom sits inside a logarithm or an irreducible
/// denominator, or when a `1/v` term would integrate to a logarithm.
fn antiderivative_in(e: &Expr, v: &JetAtom) -> Result<Option<Expr>, ExprError> {
    let canon = e.normalize()?;
    let terms: Vec<Expr> = match canon {
        Expr::Sum(ts) => ts,
        Expr::Rational(ref r) if r == &num::BigRational::from_integer(0.into()) => Vec::new(),
        other => vec![other],
    };
    let mut out = Vec::new();
    for t in terms {
        let factors: Vec<Expr> = match t {
            Expr::Product(fs) => fs,
            other => vec![other],
        };
        let mut exp: i64 = 0;
        let mut rest = Vec::new();
        for f in factors {
            match &f {
                Expr::Atom(a) if a == v => exp += 1,
                Expr::Pow(b, n) => {
                    if let Expr::Atom(a) = b.as_ref() {
                        if a == v {
                            exp += n;
                            continue;
                        }
                    }
                    if f.contains_atom(v) {
                        return Ok(None);
                    }
                    rest.push(f);
                }
                _ => {
                    if f.contains_atom(v) {
                        return Ok(None);
                    }
                    rest.push(f);
                }
            }
        }
        if exp == -1 {
            return Ok(None);
        }
        rest.push(Expr::rational(1, exp + 1));
        rest.push(Expr::Atom(v.clone()).pow(exp + 1));
        out.push(Expr::mul(rest));
    }
    Ok(Some(Expr::add(out).normalize()?))
}

/// Poisson bracket of a local density with the spatial integral of another
/// density, under the canonical pairing of each field with its momentum:
///
/// For every field name, the bracket adds the partial derivatives of the
/// density by the field's jets times spatial derivatives of the functional's
/// variation by the momentum, minus the same construction with field and
/// momentum swapped. Multiplier atoms are inert parameters, never variation
/// targets (though spatial derivatives act on them like on anything else).
pub fn poisson_with_hamiltonian(c: &Expr, h: &Expr) -> Result<Expr, ExprError> {
    let mut names: BTreeSet<String> = BTreeSet::new();
    for atom in c.atoms().into_iter().chain(h.atoms()) {
        match atom.kind {
            AtomKind::Field | AtomKind::Momentum => {
                names.insert(atom.name);
            }
            AtomKind::Multiplier => {}
        }
    }
    let c_atoms = c.atoms();
    let mut terms = Vec::new();
    for name in names {
        let dh_dpi = euler_op(h, AtomKind::Momentum, &name)?;
        let dh_df = euler_op(h, AtomKind::Field, &name)?;
        for atom in &c_atoms {
            if atom.name != name || atom.t_order != 0 {
                continue;
            }
            match atom.kind {
                AtomKind::Field => {
                    if dh_dpi.is_zero()? {
                        continue;
                    }
                    let coeff = c.partial_diff(atom)?;
                    terms.push(Expr::mul(vec![coeff, dx_iter(&dh_dpi, atom.x_order)?]));
                }
                AtomKind::Momentum => {
                    if dh_df.is_zero()? {
                        continue;
                    }
                    let coeff = c.partial_diff(atom)?;
                    terms.push(
                        Expr::mul(vec![coeff, dx_iter(&dh_df, atom.x_order)?]).neg(),
                    );
                }
                AtomKind::Multiplier => {}
            }
        }
    }
    Expr::add(terms).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn phi() -> Expr {
        Expr::field("phi")
    }

    fn phi_j(x: u32) -> Expr {
        Expr::field_jet("phi", x, 0)
    }

    fn theta_j(x: u32) -> Expr {
        Expr::field_jet("theta", x, 0)
    }

    fn psi_j(x: u32) -> Expr {
        Expr::field_jet("psi", x, 0)
    }

    fn half() -> Expr {
        Expr::rational(1, 2)
    }

    #[test]
    fn total_dx_applies_chain_rule() {
        // d/dx (1/2 phi_x^2) = phi_x phi_xx
        let e = Expr::mul(vec![half(), phi_j(1).pow(2)]);
        let d = total_dx(&e).unwrap();
        assert!(d.equals(&Expr::mul(vec![phi_j(1), phi_j(2)])).unwrap());
        // d/dx ln(phi) = phi_x / phi
        let d2 = total_dx(&phi().ln()).unwrap();
        assert!(d2.equals(&phi_j(1).div(phi())).unwrap());
    }

    #[test]
    fn total_dt_produces_mixed_jets_and_guards_input() {
        let e = Expr::mul(vec![half(), phi_j(1)]);
        let d = total_dt(&e).unwrap();
        assert!(d
            .equals(&Expr::mul(vec![half(), Expr::field_jet("phi", 1, 1)]))
            .unwrap());
        let already = Expr::field_jet("phi", 0, 1);
        assert_eq!(total_dt(&already), Err(ExprError::TimeJetPresent));
    }

    #[test]
    fn euler_operator_basics() {
        // delta/delta phi of 1/2 phi_x^2 is -phi_xx
        let kinetic = Expr::mul(vec![half(), phi_j(1).pow(2)]);
        let r = euler_op(&kinetic, AtomKind::Field, "phi").unwrap();
        assert!(r.equals(&phi_j(2).neg()).unwrap());
        // delta/delta phi of phi^2 ln(phi) is 2 phi ln(phi) + phi
        let pot = Expr::mul(vec![phi().pow(2), phi().ln()]);
        let r2 = euler_op(&pot, AtomKind::Field, "phi").unwrap();
        let expected = Expr::add(vec![
            Expr::mul(vec![Expr::int(2), phi(), phi().ln()]),
            phi(),
        ]);
        assert!(r2.equals(&expected).unwrap());
    }

    #[test]
    fn total_derivatives_have_vanishing_euler_operator() {
        let f = Expr::add(vec![
            Expr::mul(vec![phi(), phi_j(1), theta_j(0)]),
            phi_j(2).pow(2),
            Expr::mul(vec![phi().ln(), theta_j(1)]),
        ]);
        let d = total_dx(&f).unwrap();
        for name in ["phi", "theta"] {
            assert!(euler_op(&d, AtomKind::Field, name).unwrap().is_zero().unwrap());
        }
    }

    #[test]
    fn equal_mod_dx_ignores_exact_terms_and_constants() {
        // phi phi_xx and -phi_x^2 differ by d/dx(phi phi_x)
        let a = Expr::mul(vec![phi(), phi_j(2)]);
        let b = phi_j(1).pow(2).neg();
        assert!(equal_mod_dx(&a, &b).unwrap());
        assert!(!equal_mod_dx(&a, &phi_j(1).pow(2)).unwrap());
        let c = Expr::add(vec![phi_j(1), Expr::int(5)]);
        assert!(equal_mod_dx(&c, &phi_j(1)).unwrap());
        // a bare quantity is not a total derivative
        assert!(!equal_mod_dx(&phi(), &Expr::zero()).unwrap());
    }

    #[test]
    fn integrate_dx_recovers_antiderivatives() {
        // phi_x phi_xx = d/dx (1/2 phi_x^2)
        let e = Expr::mul(vec![phi_j(1), phi_j(2)]);
        let f = integrate_dx(&e).unwrap().expect("exact");
        assert!(f.equals(&Expr::mul(vec![half(), phi_j(1).pow(2)])).unwrap());

        // -6 phi_x phi_xx - psi_xx = d/dx (-3 phi_x^2 - psi_x)
        let e2 = Expr::add(vec![
            Expr::mul(vec![Expr::int(-6), phi_j(1), phi_j(2)]),
            psi_j(2).neg(),
        ]);
        let f2 = integrate_dx(&e2).unwrap().expect("exact");
        let expected = Expr::add(vec![
            Expr::mul(vec![Expr::int(-3), phi_j(1).pow(2)]),
            psi_j(1).neg(),
        ]);
        assert!(f2.equals(&expected).unwrap());

        // multiplier jets integrate like any other atom
        let lam_xx = Expr::Atom(crate::expr::JetAtom {
            kind: AtomKind::Multiplier,
            name: "lambda_1".to_string(),
            x_order: 2,
            t_order: 0,
        });
        let f3 = integrate_dx(&lam_xx).unwrap().expect("exact");
        assert_eq!(
            f3.atoms().into_iter().next().unwrap().x_order,
            1,
            "expected the first derivative of the multiplier"
        );

        // non-exact densities are rejected
        assert!(integrate_dx(&phi()).unwrap().is_none());
        assert!(integrate_dx(&Expr::mul(vec![phi(), phi_j(2)])).unwrap().is_none());
    }

    #[test]
    fn integrate_dx_round_trips_random_densities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..40 {
            // random polynomial density in low-order jets
            let mut terms = Vec::new();
            for _ in 0..rng.gen_range(1..4) {
                let mut fs = vec![Expr::rational(rng.gen_range(-4..=4), rng.gen_range(1..=3))];
                for _ in 0..rng.gen_range(1..4) {
                    let name = if rng.gen_bool(0.5) { "phi" } else { "theta" };
                    fs.push(Expr::field_jet(name, rng.gen_range(0..3), 0));
                }
                terms.push(Expr::mul(fs));
            }
            let f = Expr::add(terms);
            let d = total_dx(&f).unwrap();
            let back = integrate_dx(&d)
                .unwrap()
                .unwrap_or_else(|| panic!("case {case}: exact density not recognized"));
            assert!(
                total_dx(&back).unwrap().equals(&d).unwrap(),
                "case {case}: antiderivative does not differentiate back"
            );
        }
    }

    /// The canonical bracket of the density `pi_psi` with the total
    /// Hamiltonian of the third-derivative system: the variation by `psi`
    /// picks up the quadratic potential and the cross term.
    #[test]
    fn bracket_with_momentum_density() {
        let h = Expr::add(vec![
            phi_j(1).pow(3).neg(),
            Expr::mul(vec![phi_j(1), psi_j(1)]).neg(),
            Expr::mul(vec![half(), psi_j(0).pow(2)]).neg(),
            Expr::mul(vec![
                Expr::multiplier("lambda_1"),
                Expr::momentum("phi").sub(Expr::mul(vec![half(), phi_j(1)])),
            ]),
            Expr::mul(vec![Expr::multiplier("lambda_2"), Expr::momentum("psi")]),
        ]);
        let c = Expr::momentum("psi");
        let bracket = poisson_with_hamiltonian(&c, &h).unwrap();
        let expected = psi_j(0).sub(phi_j(2));
        assert!(
            bracket.equals(&expected).unwrap(),
            "got {bracket} instead of psi - phi_xx"
        );
    }

    /// Consistency equation of the other primary constraint of the same
    /// system: field parts of the constraint pick up derivatives of the
    /// multiplier.
    #[test]
    fn bracket_produces_multiplier_jets() {
        let h = Expr::add(vec![
            phi_j(1).pow(3).neg(),
            Expr::mul(vec![phi_j(1), psi_j(1)]).neg(),
            Expr::mul(vec![half(), psi_j(0).pow(2)]).neg(),
            Expr::mul(vec![
                Expr::multiplier("lambda_1"),
                Expr::momentum("phi").sub(Expr::mul(vec![half(), phi_j(1)])),
            ]),
            Expr::mul(vec![Expr::multiplier("lambda_2"), Expr::momentum("psi")]),
        ]);
        let c = Expr::momentum("phi").sub(Expr::mul(vec![half(), phi_j(1)]));
        let bracket = poisson_with_hamiltonian(&c, &h).unwrap();
        let lam_x = Expr::Atom(crate::expr::JetAtom {
            kind: AtomKind::Multiplier,
            name: "lambda_1".to_string(),
            x_order: 1,
            t_order: 0,
        });
        let expected = Expr::add(vec![
            lam_x.neg(),
            Expr::mul(vec![Expr::int(-6), phi_j(1), phi_j(2)]),
            psi_j(2).neg(),
        ]);
        assert!(
            bracket.equals(&expected).unwrap(),
            "got {bracket} instead of -(lambda_1)_x - 6 phi_x phi_xx - psi_xx"
        );
    }

    /// Brackets of the phase-amplitude system: both consistency equations
    /// frozen against independent hand derivations.
    #[test]
    fn brackets_of_phase_amplitude_system() {
        let h_c = Expr::add(vec![
            Expr::mul(vec![half(), phi().pow(4)]).neg(),
            Expr::mul(vec![half(), phi_j(1).pow(2)]),
            Expr::mul(vec![half(), theta_j(1).pow(2), phi().pow(2)]),
        ]);
        let c1 = Expr::momentum("phi");
        let c2 = Expr::momentum("theta").sub(theta_t_coefficient());
        let h = Expr::add(vec![
            h_c,
            Expr::mul(vec![Expr::multiplier("lambda_1"), c1.clone()]),
            Expr::mul(vec![Expr::multiplier("lambda_2"), c2.clone()]),
        ]);
        let e1 = poisson_with_hamiltonian(&c1, &h).unwrap();
        let expected1 = Expr::add(vec![
            Expr::mul(vec![Expr::int(2), phi().pow(3)]),
            phi_j(2),
            Expr::mul(vec![phi(), theta_j(1).pow(2)]).neg(),
            Expr::mul(vec![Expr::multiplier("lambda_2"), phi()]).neg(),
        ]);
        assert!(e1.equals(&expected1).unwrap(), "got {e1}");

        let e2 = poisson_with_hamiltonian(&c2, &h).unwrap();
        let expected2 = Expr::add(vec![
            Expr::mul(vec![Expr::multiplier("lambda_1"), phi()]),
            Expr::mul(vec![phi().pow(2), theta_j(2)]),
            Expr::mul(vec![Expr::int(2), phi(), phi_j(1), theta_j(1)]),
        ]);
        assert!(e2.equals(&expected2).unwrap(), "got {e2}");
    }

    fn theta_t_coefficient() -> Expr {
        // negative momentum definition: pi_theta = -1/2 phi^2, so the
        // constraint is pi_theta + 1/2 phi^2
        Expr::mul(vec![Expr::rational(-1, 2), Expr::field("phi").pow(2)])
    }

    /// Antisymmetry modulo total derivatives: the bracket of c with the
    /// functional of h equals minus the bracket of h with the functional of
    /// c, up to a total spatial derivative.
    #[test]
    fn bracket_antisymmetry_mod_total_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..20 {
            let c = random_density(&mut rng);
            let h = random_density(&mut rng);
            let ab = poisson_with_hamiltonian(&c, &h).unwrap();
            let ba = poisson_with_hamiltonian(&h, &c).unwrap();
            assert!(
                equal_mod_dx(&ab, &ba.neg()).unwrap(),
                "case {case}: bracket not antisymmetric mod d/dx"
            );
        }
    }

    fn random_density(rng: &mut ChaCha8Rng) -> Expr {
        let mut terms = Vec::new();
        for _ in 0..rng.gen_range(1..4) {
            let mut fs = vec![Expr::int(rng.gen_range(-3..=3i64).max(1))];
            for _ in 0..rng.gen_range(1..3) {
                let atom = match rng.gen_range(0..4) {
                    0 => JetAtom::field_jet("phi", rng.gen_range(0..2), 0),
                    1 => JetAtom::field_jet("theta", rng.gen_range(0..2), 0),
                    2 => JetAtom::momentum_jet("phi", rng.gen_range(0..2), 0),
                    _ => JetAtom::momentum_jet("theta", rng.gen_range(0..2), 0),
                };
                fs.push(Expr::Atom(atom));
            }
            terms.push(Expr::mul(fs));
        }
        Expr::add(terms)
    }
}
