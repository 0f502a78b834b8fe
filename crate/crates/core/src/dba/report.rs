//! Rendering of a finished [`Analysis`]: a structured JSON document and
//! plain-text / LaTeX reports.

use serde_json::{Map, Value};

use super::{Analysis, DbaError};
use crate::expr::{to_json_tree, Expr};

fn generation_name(g: u32) -> String {
    match g {
        1 => "primary".to_string(),
        2 => "secondary".to_string(),
        3 => "tertiary".to_string(),
        g => format!("generation-{g}"),
    }
}

/// An expression as a JSON object carrying both the rendered text and the
/// full tree (which round-trips losslessly).
fn expr_obj(e: &Expr) -> Value {
    let mut m = Map::new();
    m.insert("text".to_string(), Value::String(e.render_plain()));
    m.insert("tree".to_string(), to_json_tree(e));
    Value::Object(m)
}

/// Structured report of the whole analysis.
pub fn report_json(a: &Analysis) -> Result<Value, DbaError> {
    let mut root = Map::new();
    root.insert(
        "hessian".to_string(),
        Value::Array(
            a.hessian
                .iter()
                .map(|row| Value::Array(row.iter().map(expr_obj).collect()))
                .collect(),
        ),
    );
    root.insert("rank".to_string(), Value::from(a.rank));
    root.insert(
        "constraints".to_string(),
        Value::Array(
            a.constraints
                .iter()
                .map(|c| {
                    let mut m = Map::new();
                    m.insert("label".to_string(), Value::String(c.label.clone()));
                    m.insert(
                        "generation".to_string(),
                        Value::String(generation_name(c.generation)),
                    );
                    m.insert("density".to_string(), expr_obj(&c.density));
                    m.insert("multiplier".to_string(), Value::String(c.multiplier.clone()));
                    m.insert(
                        "source".to_string(),
                        match &c.source {
                            Some(s) => Value::String(s.clone()),
                            None => Value::Null,
                        },
                    );
                    Value::Object(m)
                })
                .collect(),
        ),
    );
    let mut mults = Map::new();
    for (name, value) in &a.multipliers {
        mults.insert(name.clone(), expr_obj(value));
    }
    root.insert("multipliers".to_string(), Value::Object(mults));
    root.insert(
        "undetermined_multipliers".to_string(),
        Value::Array(a.undetermined.iter().map(|s| Value::String(s.clone())).collect()),
    );
    root.insert(
        "assumptions".to_string(),
        Value::Array(a.assumptions.iter().map(|s| Value::String(s.clone())).collect()),
    );
    root.insert("canonical_hamiltonian".to_string(), expr_obj(&a.canonical_h));
    root.insert("total_hamiltonian".to_string(), expr_obj(&a.total_h));
    let mut eoms = Map::new();
    for (name, rhs) in a.hamilton_eoms_permissive()? {
        eoms.insert(name, expr_obj(&rhs));
    }
    root.insert("hamilton_eoms".to_string(), Value::Object(eoms));
    let mut leoms = Map::new();
    for (name, lhs) in a.lagrangian_eoms()? {
        leoms.insert(name, expr_obj(&lhs));
    }
    root.insert("lagrangian_eoms".to_string(), Value::Object(leoms));
    root.insert("iterations".to_string(), Value::from(a.iterations));
    Ok(Value::Object(root))
}

/// Plain-text report.
pub fn report_plain(a: &Analysis) -> Result<String, DbaError> {
    let mut out = String::new();
    let push = |out: &mut String, s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    push(&mut out, format!("fields: {}", a.fields.join(", ")));
    push(&mut out, format!("hessian rank: {}", a.rank));
    push(&mut out, "hessian:".to_string());
    for row in &a.hessian {
        let cells: Vec<String> = row.iter().map(|e| e.render_plain()).collect();
        push(&mut out, format!("  [{}]", cells.join(", ")));
    }
    push(&mut out, "constraints:".to_string());
    for c in &a.constraints {
        push(
            &mut out,
            format!(
                "  {} ({}): {}",
                c.label,
                generation_name(c.generation),
                c.density.render_plain()
            ),
        );
    }
    push(&mut out, "multipliers:".to_string());
    for (name, value) in &a.multipliers {
        push(&mut out, format!("  {} = {}", name, value.render_plain()));
    }
    if a.undetermined.is_empty() {
        push(&mut out, "undetermined multipliers: none".to_string());
    } else {
        push(
            &mut out,
            format!("undetermined multipliers: {}", a.undetermined.join(", ")),
        );
    }
    if a.assumptions.is_empty() {
        push(&mut out, "assumptions: none".to_string());
    } else {
        let parts: Vec<String> =
            a.assumptions.iter().map(|s| format!("{s} != 0")).collect();
        push(&mut out, format!("assumptions: {}", parts.join(", ")));
    }
    push(
        &mut out,
        format!("canonical hamiltonian: {}", a.canonical_h.render_plain()),
    );
    push(&mut out, format!("total hamiltonian: {}", a.total_h.render_plain()));
    push(&mut out, "hamilton equations:".to_string());
    for (name, rhs) in a.hamilton_eoms_permissive()? {
        push(&mut out, format!("  {}_t = {}", name, rhs.render_plain()));
    }
    push(&mut out, "euler-lagrange equations:".to_string());
    for (name, lhs) in a.lagrangian_eoms()? {
        push(&mut out, format!("  {}: {} = 0", name, lhs.render_plain()));
    }
    push(&mut out, format!("iterations: {}", a.iterations));
    Ok(out)
}

fn latex_label(label: &str) -> String {
    // c1 -> c_{1}, ct2 -> \tilde{c}_{2}, ctt1 -> doubly decorated
    let tildes = label.chars().filter(|&ch| ch == 't').count();
    let idx: String = label.chars().filter(char::is_ascii_digit).collect();
    let mut core = "c".to_string();
    for _ in 0..tildes {
        core = format!("\\tilde{{{core}}}");
    }
    format!("{core}_{{{idx}}}")
}

fn latex_multiplier(name: &str) -> String {
    Expr::multiplier(name).render_latex()
}

/// LaTeX report: the same structure as the plain report with displayed
/// equations.
pub fn report_latex(a: &Analysis) -> Result<String, DbaError> {
    let mut out = String::new();
    let push = |out: &mut String, s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    let latex_fields: Vec<String> =
        a.fields.iter().map(|f| format!("${}$", Expr::field(f).render_latex())).collect();
    push(&mut out, format!("Fields: {}.", latex_fields.join(", ")));
    push(&mut out, format!("Hessian rank: {}.", a.rank));
    let rows: Vec<String> = a
        .hessian
        .iter()
        .map(|row| row.iter().map(|e| e.render_latex()).collect::<Vec<_>>().join(" & "))
        .collect();
    push(
        &mut out,
        format!("\\[ W = \\begin{{pmatrix}} {} \\end{{pmatrix}} \\]", rows.join(" \\\\ ")),
    );
    push(&mut out, "Constraints:".to_string());
    for c in &a.constraints {
        push(
            &mut out,
            format!(
                "\\[ {} = {} \\qquad \\text{{({})}} \\]",
                latex_label(&c.label),
                c.density.render_latex(),
                generation_name(c.generation)
            ),
        );
    }
    push(&mut out, "Multipliers:".to_string());
    for (name, value) in &a.multipliers {
        push(
            &mut out,
            format!("\\[ {} = {} \\]", latex_multiplier(name), value.render_latex()),
        );
    }
    if !a.undetermined.is_empty() {
        let names: Vec<String> =
            a.undetermined.iter().map(|n| format!("${}$", latex_multiplier(n))).collect();
        push(&mut out, format!("Undetermined multipliers: {}.", names.join(", ")));
    }
    if !a.assumptions.is_empty() {
        push(
            &mut out,
            format!("Assumptions: {} nonvanishing.", a.assumptions.join(", ")),
        );
    }
    push(
        &mut out,
        format!("\\[ \\mathcal{{H}}_c = {} \\]", a.canonical_h.render_latex()),
    );
    push(&mut out, format!("\\[ \\mathcal{{H}}_T = {} \\]", a.total_h.render_latex()));
    push(&mut out, "Hamilton equations:".to_string());
    for (name, rhs) in a.hamilton_eoms_permissive()? {
        let lhs = if let Some(f) = name.strip_prefix("pi_") {
            format!("\\partial_t \\pi_{{{}}}", Expr::field(f).render_latex())
        } else {
            format!("\\partial_t {}", Expr::field(&name).render_latex())
        };
        push(&mut out, format!("\\[ {} = {} \\]", lhs, rhs.render_latex()));
    }
    push(&mut out, "Euler-Lagrange equations:".to_string());
    for (name, lhs) in a.lagrangian_eoms()? {
        push(
            &mut out,
            format!(
                "\\[ 0 = {} \\qquad (\\text{{variation by }} {}) \\]",
                lhs.render_latex(),
                Expr::field(&name).render_latex()
            ),
        );
    }
    push(&mut out, format!("Consistency sweeps: {}.", a.iterations));
    Ok(out)
}
