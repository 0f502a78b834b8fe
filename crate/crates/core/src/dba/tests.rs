use super::*;
use crate::corpus;
use crate::parser::parse;
use crate::varcalc::equal_mod_dx;

fn run(src: &str) -> Analysis {
    analyze(&parse(src).unwrap(), &AnalysisOptions::default()).unwrap()
}

fn phi() -> Expr {
    Expr::field("phi")
}

fn pj(name: &str, x: u32) -> Expr {
    Expr::field_jet(name, x, 0)
}

fn half() -> Expr {
    Expr::rational(1, 2)
}

fn assert_eq_expr(got: &Expr, want: &Expr, what: &str) {
    assert!(got.equals(want).unwrap(), "{what}: got {got}, want {want}");
}

#[test]
fn quadratic_velocity_dependence_is_rejected() {
    let spec = parse("fields phi\nL = 1/2*Dt(phi)^2\n").unwrap();
    let (w, rank) = hessian_and_rank(&spec.fields, &spec.lagrangian).unwrap();
    assert!(w[0][0].equals(&Expr::one()).unwrap());
    assert_eq!(rank, 1);
    match analyze(&spec, &AnalysisOptions::default()) {
        Err(DbaError::PartiallyRegular { rank }) => assert_eq!(rank, 1),
        other => panic!("expected partial regularity error, got {other:?}"),
    }
}

#[test]
fn inconsistent_dynamics_is_detected() {
    let spec = parse("fields phi\nL = Dt(phi)*phi + phi\n").unwrap();
    match analyze(&spec, &AnalysisOptions::default()) {
        Err(DbaError::InconsistentDynamics { constraint, .. }) => assert_eq!(constraint, "c1"),
        other => panic!("expected inconsistent dynamics, got {other:?}"),
    }
}

#[test]
fn multipliers_under_field_dependent_operators_are_refused() {
    // Preserving c1 here demands inverting D_x^2(phi * lambda_1) plus lower
    // order terms, a variable-coefficient operator with no closed-form
    // inverse in this calculus.
    let spec = parse(
        "fields phi, theta\n\
         L = Dt(phi)*(Dx(Dx(theta))*phi + 3*phi*Dx(Dx(phi))) + Dt(theta)*(2 - 3*Dx(theta)) + 2\n",
    )
    .unwrap();
    match analyze(&spec, &AnalysisOptions::default()) {
        Err(DbaError::UnresolvedMultiplierEquation { constraint }) => {
            assert_eq!(constraint, "c1")
        }
        other => panic!("expected an unresolved multiplier equation, got {other:?}"),
    }
}

#[test]
fn iteration_budget_is_respected() {
    let spec = parse(corpus::KDV).unwrap();
    for budget in [0u32, 1] {
        match analyze(&spec, &AnalysisOptions { max_iterations: budget }) {
            Err(DbaError::NoClosure { iterations }) => assert_eq!(iterations, budget),
            other => panic!("budget {budget}: expected no closure, got {other:?}"),
        }
    }
}

#[test]
fn cubic_system_full_analysis() {
    let a = run(corpus::CUBIC_NLS);
    assert_eq!(a.rank, 0);
    assert_eq!(a.iterations, 1);
    assert_eq!(a.assumptions, vec!["phi"]);
    assert!(a.undetermined.is_empty());

    let labels: Vec<&str> = a.constraints.iter().map(|c| c.label.as_str()).collect();
    assert_eq!(labels, vec!["c1", "c2"]);
    assert!(a.constraints.iter().all(|c| c.generation == 1));
    assert_eq_expr(&a.constraints[0].density, &Expr::momentum("phi"), "c1");
    let c2 = Expr::add(vec![Expr::momentum("theta"), Expr::mul(vec![half(), phi().pow(2)])]);
    assert_eq_expr(&a.constraints[1].density, &c2, "c2");

    let hc = Expr::add(vec![
        Expr::mul(vec![Expr::rational(-1, 2), phi().pow(4)]),
        Expr::mul(vec![half(), pj("phi", 1).pow(2)]),
        Expr::mul(vec![half(), pj("theta", 1).pow(2), phi().pow(2)]),
    ]);
    assert_eq_expr(&a.canonical_h, &hc, "canonical hamiltonian");

    let lambda_1 = Expr::add(vec![
        Expr::mul(vec![phi(), pj("theta", 2)]).neg(),
        Expr::mul(vec![Expr::int(-2), pj("phi", 1), pj("theta", 1)]),
    ]);
    let lambda_2 = Expr::add(vec![
        Expr::mul(vec![Expr::int(2), phi().pow(2)]),
        pj("theta", 1).pow(2).neg(),
        pj("phi", 2).div(phi()),
    ]);
    assert_eq_expr(a.multiplier_value("lambda_1").unwrap(), &lambda_1, "lambda_1");
    assert_eq_expr(a.multiplier_value("lambda_2").unwrap(), &lambda_2, "lambda_2");

    // with momenta written out, the total Hamiltonian density is exactly
    // the canonical energy density of the flow
    let subst = a.substitute_momenta(&a.total_h).unwrap();
    let energy = Expr::add(vec![
        Expr::mul(vec![half(), pj("phi", 1).pow(2)]),
        Expr::mul(vec![half(), phi().pow(2), pj("theta", 1).pow(2)]),
        Expr::mul(vec![Expr::rational(-1, 2), phi().pow(4)]),
    ]);
    assert_eq_expr(&subst, &energy, "reduced total hamiltonian");

    let eoms = a.hamilton_eoms().unwrap();
    let rhs = |n: &str| {
        eoms.iter().find(|(m, _)| m == n).map(|(_, v)| v.clone()).unwrap()
    };
    assert_eq_expr(&rhs("phi"), &lambda_1, "phi_t");
    assert_eq_expr(&rhs("theta"), &lambda_2, "theta_t");
    assert_eq_expr(&rhs("pi_phi"), &Expr::zero(), "pi_phi_t");
    let pi_theta_t = Expr::add(vec![
        Expr::mul(vec![phi().pow(2), pj("theta", 2)]),
        Expr::mul(vec![Expr::int(2), phi(), pj("phi", 1), pj("theta", 1)]),
    ]);
    assert_eq_expr(&rhs("pi_theta"), &pi_theta_t, "pi_theta_t");

    assert!(a.cross_check_lagrangian().unwrap());
}

#[test]
fn logarithmic_system_multipliers() {
    let a = run(corpus::LOG_NLS);
    assert_eq!(a.iterations, 1);
    assert_eq!(a.assumptions, vec!["phi"]);
    let lambda_2 = Expr::add(vec![
        Expr::mul(vec![Expr::int(2), phi().ln()]),
        pj("theta", 1).pow(2).neg(),
        pj("phi", 2).div(phi()),
    ]);
    assert_eq_expr(a.multiplier_value("lambda_2").unwrap(), &lambda_2, "lambda_2");
    let lambda_1 = Expr::add(vec![
        Expr::mul(vec![phi(), pj("theta", 2)]).neg(),
        Expr::mul(vec![Expr::int(-2), pj("phi", 1), pj("theta", 1)]),
    ]);
    assert_eq_expr(a.multiplier_value("lambda_1").unwrap(), &lambda_1, "lambda_1");
    assert!(a.cross_check_lagrangian().unwrap());
}

#[test]
fn third_derivative_system_full_analysis() {
    let a = run(corpus::KDV);
    assert_eq!(a.iterations, 2);
    assert!(a.assumptions.is_empty(), "no divisions by field data: {:?}", a.assumptions);
    assert!(a.undetermined.is_empty());

    let labels: Vec<&str> = a.constraints.iter().map(|c| c.label.as_str()).collect();
    assert_eq!(labels, vec!["c1", "c2", "ct1"]);
    let ct1 = &a.constraints[2];
    assert_eq!(ct1.generation, 2);
    assert_eq!(ct1.source.as_deref(), Some("c2"));
    assert_eq!(ct1.multiplier, "mu_1");
    let secondary = pj("psi", 0).sub(pj("phi", 2));
    assert_eq_expr(&ct1.density, &secondary, "secondary constraint");

    let lambda_1 = Expr::add(vec![
        Expr::mul(vec![Expr::int(-3), pj("phi", 1).pow(2)]),
        pj("phi", 3).neg(),
    ]);
    let lambda_2 = Expr::add(vec![
        Expr::mul(vec![Expr::int(-6), pj("phi", 2).pow(2)]),
        Expr::mul(vec![Expr::int(-6), pj("phi", 1), pj("phi", 3)]),
        pj("phi", 5).neg(),
    ]);
    assert_eq_expr(a.multiplier_value("lambda_1").unwrap(), &lambda_1, "lambda_1");
    assert_eq_expr(a.multiplier_value("lambda_2").unwrap(), &lambda_2, "lambda_2");
    assert_eq_expr(a.multiplier_value("mu_1").unwrap(), &secondary, "mu_1");

    // total Hamiltonian assembled with the solved multipliers
    let c1 = Expr::momentum("phi").sub(Expr::mul(vec![half(), pj("phi", 1)]));
    let hc = Expr::add(vec![
        pj("phi", 1).pow(3).neg(),
        Expr::mul(vec![pj("phi", 1), pj("psi", 1)]).neg(),
        Expr::mul(vec![half(), pj("psi", 0).pow(2)]).neg(),
    ]);
    let expected_total = Expr::add(vec![
        hc,
        Expr::mul(vec![lambda_1.clone(), c1]),
        Expr::mul(vec![lambda_2, Expr::momentum("psi")]),
        secondary.clone().pow(2),
    ]);
    assert_eq_expr(&a.total_h, &expected_total, "total hamiltonian");

    let eoms = a.hamilton_eoms().unwrap();
    let rhs = |n: &str| {
        eoms.iter().find(|(m, _)| m == n).map(|(_, v)| v.clone()).unwrap()
    };
    assert_eq_expr(&rhs("phi"), &lambda_1, "phi_t");
    // the auxiliary field tracks phi_xx, so its evolution is D_x^2 of phi_t
    let psi_t = crate::varcalc::dx_iter(&rhs("phi"), 2).unwrap();
    assert_eq_expr(&rhs("psi"), &psi_t, "psi_t");

    assert!(a.cross_check_lagrangian().unwrap());
}

#[test]
fn fourth_order_system_full_analysis() {
    let a = run(corpus::FOURTH_ORDER_NLS);
    assert_eq!(a.iterations, 2);
    assert_eq!(a.assumptions, vec!["phi"]);
    assert_eq!(a.undetermined, vec!["lambda_3"]);

    let labels: Vec<&str> = a.constraints.iter().map(|c| c.label.as_str()).collect();
    assert_eq!(labels, vec!["c1", "c2", "c3", "c4", "ct1", "ct2"]);
    assert!(a.constraints.iter().all(|c| c.generation <= 2), "no tertiary constraints");

    let theta = || pj("theta", 1);
    let xi = || Expr::field("xi");
    let ct1 = Expr::add(vec![
        Expr::mul(vec![Expr::int(6), theta().pow(2), xi()]),
        xi().neg(),
        pj("xi", 2).neg(),
    ]);
    assert_eq_expr(&a.constraint("ct1").unwrap().density, &ct1, "ct1");
    assert_eq!(a.constraint("ct1").unwrap().source.as_deref(), Some("c3"));

    let ct2 = Expr::add(vec![
        Expr::mul(vec![Expr::int(2), phi().pow(2), pj("theta", 2)]),
        Expr::mul(vec![Expr::int(4), phi(), pj("phi", 1), theta()]),
        Expr::mul(vec![Expr::int(-3), phi().pow(2), Expr::field("gamma")]),
    ]);
    assert_eq_expr(&a.constraint("ct2").unwrap().density, &ct2, "ct2");
    assert_eq!(a.constraint("ct2").unwrap().source.as_deref(), Some("c4"));

    assert_eq_expr(a.multiplier_value("mu_1").unwrap(), &Expr::zero(), "mu_1");
    assert!(a.multiplier_value("lambda_3").is_none());
    assert!(a.multiplier_value("lambda_1").is_some());
    assert!(a.multiplier_value("lambda_2").is_some());
    assert!(a.multiplier_value("lambda_4").is_some());
    assert!(a.multiplier_value("mu_2").is_some());

    // strict equations of motion refuse the undetermined multiplier ...
    match a.hamilton_eoms() {
        Err(DbaError::UndeterminedMultipliers(names)) => {
            assert_eq!(names, vec!["lambda_3"])
        }
        other => panic!("expected undetermined multipliers, got {other:?}"),
    }
    // ... which enters only through the auxiliary field equation
    let eoms = a.hamilton_eoms_permissive().unwrap();
    let xi_t = eoms.iter().find(|(n, _)| n == "xi").map(|(_, v)| v.clone()).unwrap();
    assert_eq_expr(&xi_t, &Expr::multiplier("lambda_3"), "xi_t");

    assert!(a.cross_check_lagrangian().unwrap());
}

#[test]
fn solved_equations_vanish_on_the_constraint_surface() {
    for (name, src) in corpus::BUILTINS {
        let a = run(src);
        a.verify_closure().unwrap_or_else(|e| panic!("{name}: {e}"));
        // primaries vanish identically under momentum substitution
        for c in a.constraints.iter().filter(|c| c.generation == 1) {
            let r = a.substitute_momenta(&c.density).unwrap();
            assert!(r.is_zero().unwrap(), "{name}/{}: got {r}", c.label);
        }
    }
}

#[test]
fn canonical_energy_matches_lagrangian_functional() {
    // the reduced total Hamiltonian and the density built directly from the
    // Lagrangian by the Legendre rule integrate to the same functional
    for (name, src) in [("cubic-nls", corpus::CUBIC_NLS), ("log-nls", corpus::LOG_NLS)] {
        let a = run(src);
        let reduced = a.substitute_momenta(&a.total_h).unwrap();
        assert!(
            equal_mod_dx(&reduced, &a.canonical_h).unwrap(),
            "{name}: reduced total and canonical Hamiltonians differ by more than a derivative"
        );
    }
}

#[test]
fn report_document_is_complete_and_round_trips() {
    let a = run(corpus::KDV);
    let doc = report_json(&a).unwrap();
    let obj = doc.as_object().unwrap();
    let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        vec![
            "hessian",
            "rank",
            "constraints",
            "multipliers",
            "undetermined_multipliers",
            "assumptions",
            "canonical_hamiltonian",
            "total_hamiltonian",
            "hamilton_eoms",
            "lagrangian_eoms",
            "iterations"
        ]
    );
    assert_eq!(obj["rank"], 0);
    assert_eq!(obj["iterations"], 2);
    assert_eq!(obj["constraints"][2]["label"], "ct1");
    assert_eq!(obj["constraints"][2]["generation"], "secondary");
    assert_eq!(obj["constraints"][2]["source"], "c2");

    // expression objects round-trip through their trees
    let tree = &obj["total_hamiltonian"]["tree"];
    let back = crate::expr::from_json_tree(tree).unwrap();
    assert!(back.equals(&a.total_h).unwrap());
    let text = obj["total_hamiltonian"]["text"].as_str().unwrap();
    assert_eq!(text, a.total_h.render_plain());

    let eoms = obj["hamilton_eoms"].as_object().unwrap();
    let eom_keys: Vec<&str> = eoms.keys().map(String::as_str).collect();
    assert_eq!(eom_keys, vec!["phi", "psi", "pi_phi", "pi_psi"]);

    let plain = report_plain(&a).unwrap();
    assert!(plain.contains("hessian rank: 0"));
    assert!(plain.contains("ct1 (secondary): -phi_xx + psi"));
    assert!(plain.contains("mu_1 = -phi_xx + psi"));
    assert!(plain.contains("iterations: 2"));

    let latex = report_latex(&a).unwrap();
    assert!(latex.contains("\\tilde{c}_{1}"));
    assert!(latex.contains("\\pi_{\\phi}"));
}

#[test]
fn undetermined_multiplier_appears_in_report() {
    let a = run(corpus::FOURTH_ORDER_NLS);
    let doc = report_json(&a).unwrap();
    assert_eq!(doc["undetermined_multipliers"][0], "lambda_3");
    assert_eq!(doc["assumptions"][0], "phi");
    let mults = doc["multipliers"].as_object().unwrap();
    assert!(mults.contains_key("mu_1"));
    assert!(!mults.contains_key("lambda_3"));
}
