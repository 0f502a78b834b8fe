//! Rendering of expression trees: plain text, LaTeX, the input grammar, and
//! a JSON tree encoding that round-trips exactly.

use num::{BigInt, BigRational, One, Signed};
use serde_json::{json, Value};

use super::{AtomKind, Expr, JetAtom};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Style {
    Plain,
    Latex,
    Input,
}

pub(super) fn plain(e: &Expr) -> String {
    render(e, Style::Plain)
}

pub(super) fn latex(e: &Expr) -> String {
    render(e, Style::Latex)
}

pub(super) fn input(e: &Expr) -> String {
    render(e, Style::Input)
}

fn render(e: &Expr, style: Style) -> String {
    match e {
        Expr::Sum(v) if !v.is_empty() => {
            let mut out = String::new();
            for (i, t) in v.iter().enumerate() {
                let (neg, body) = signed_term(t, style);
                if i == 0 {
                    if neg {
                        out.push('-');
                    }
                } else {
                    out.push_str(if neg { " - " } else { " + " });
                }
                out.push_str(&body);
            }
            out
        }
        Expr::Sum(_) => "0".to_string(),
        _ => {
            let (neg, body) = signed_term(e, style);
            if neg {
                format!("-{body}")
            } else {
                body
            }
        }
    }
}

/// Extract a leading sign from a canonical term so sums can join terms with
/// ` + ` / ` - ` instead of printing `+ -1*...`.
fn signed_term(e: &Expr, style: Style) -> (bool, String) {
    match e {
        Expr::Rational(r) if r.is_negative() => (true, rational_string(&-r, style)),
        Expr::Product(v) => {
            if let Some(Expr::Rational(r)) = v.first() {
                if r.is_negative() {
                    let flipped = -r;
                    let mut rest: Vec<Expr> = v[1..].to_vec();
                    if !flipped.is_one() {
                        rest.insert(0, Expr::Rational(flipped));
                    }
                    return (true, term(&Expr::mul(rest), style));
                }
            }
            (false, term(e, style))
        }
        _ => (false, term(e, style)),
    }
}

/// Render one multiplicative term, folding negative powers into a trailing
/// denominator (`phi_xx/phi`, `\frac{...}{...}`).
fn term(e: &Expr, style: Style) -> String {
    let factors: Vec<&Expr> = match e {
        Expr::Product(v) => v.iter().collect(),
        other => vec![other],
    };
    let mut num: Vec<String> = Vec::new();
    let mut den: Vec<String> = Vec::new();
    for f in factors {
        match f {
            Expr::Pow(b, n) if *n < 0 && style != Style::Input => {
                den.push(power(b, -n, style));
            }
            other => num.push(factor(other, style)),
        }
    }
    let joiner = match style {
        Style::Latex => " ",
        _ => "*",
    };
    let num_str = if num.is_empty() { "1".to_string() } else { num.join(joiner) };
    if den.is_empty() {
        return num_str;
    }
    match style {
        Style::Latex => format!("\\frac{{{}}}{{{}}}", num_str, den.join(" ")),
        _ => {
            let den_str = if den.len() == 1 {
                den.into_iter().next().unwrap()
            } else {
                format!("({})", den.join("*"))
            };
            format!("{num_str}/{den_str}")
        }
    }
}

fn factor(e: &Expr, style: Style) -> String {
    match e {
        Expr::Rational(r) => {
            let s = rational_string(r, style);
            if r.is_negative() {
                format!("({s})")
            } else {
                s
            }
        }
        Expr::Atom(a) => atom_name(a, style),
        Expr::Ln(b) => match style {
            Style::Latex => format!("\\ln\\left({}\\right)", render(b, style)),
            _ => format!("ln({})", render(b, style)),
        },
        Expr::Sum(_) => match style {
            Style::Latex => format!("\\left({}\\right)", render(e, style)),
            _ => format!("({})", render(e, style)),
        },
        Expr::Pow(b, n) => power(b, *n, style),
        Expr::Product(_) => match style {
            Style::Latex => format!("\\left({}\\right)", render(e, style)),
            _ => format!("({})", render(e, style)),
        },
    }
}

fn power(base: &Expr, exp: i64, style: Style) -> String {
    if exp == 1 {
        return factor(base, style);
    }
    let base_str = match base {
        Expr::Atom(a) => atom_name(a, style),
        Expr::Ln(_) => factor(base, style),
        _ => match style {
            Style::Latex => format!("\\left({}\\right)", render(base, style)),
            _ => format!("({})", render(base, style)),
        },
    };
    match style {
        Style::Latex => format!("{base_str}^{{{exp}}}"),
        _ => format!("{base_str}^{exp}"),
    }
}

fn rational_string(r: &BigRational, style: Style) -> String {
    if r.denom().is_one() {
        return r.numer().to_string();
    }
    match style {
        Style::Latex => {
            let neg = r.is_negative();
            let a = r.numer().abs();
            let b = r.denom().clone();
            let body = format!("\\frac{{{a}}}{{{b}}}");
            if neg {
                format!("-{body}")
            } else {
                body
            }
        }
        _ => format!("{}/{}", r.numer(), r.denom()),
    }
}

fn jet_suffix(x_order: u32, t_order: u32) -> String {
    let mut s = String::new();
    match x_order {
        0 => {}
        1 => s.push('x'),
        2 => s.push_str("xx"),
        k => s.push_str(&format!("{k}x")),
    }
    if t_order > 0 {
        s.push('t');
    }
    s
}

fn atom_name(a: &JetAtom, style: Style) -> String {
    match style {
        Style::Plain => plain_atom(a),
        Style::Latex => latex_atom(a),
        Style::Input => input_atom(a),
    }
}

fn plain_atom(a: &JetAtom) -> String {
    let base = match a.kind {
        AtomKind::Field | AtomKind::Multiplier => a.name.clone(),
        AtomKind::Momentum => format!("pi_{}", a.name),
    };
    let suffix = jet_suffix(a.x_order, a.t_order);
    if suffix.is_empty() {
        base
    } else {
        format!("{base}_{suffix}")
    }
}

fn input_atom(a: &JetAtom) -> String {
    if a.kind != AtomKind::Field {
        return plain_atom(a);
    }
    let mut s = a.name.clone();
    if a.t_order > 0 {
        s = format!("Dt({s})");
    }
    for _ in 0..a.x_order {
        s = format!("Dx({s})");
    }
    s
}

const GREEK: &[(&str, &str)] = &[
    ("alpha", "\\alpha"),
    ("beta", "\\beta"),
    ("gamma", "\\gamma"),
    ("delta", "\\delta"),
    ("epsilon", "\\epsilon"),
    ("zeta", "\\zeta"),
    ("eta", "\\eta"),
    ("theta", "\\theta"),
    ("iota", "\\iota"),
    ("kappa", "\\kappa"),
    ("lambda", "\\lambda"),
    ("mu", "\\mu"),
    ("nu", "\\nu"),
    ("xi", "\\xi"),
    ("pi", "\\pi"),
    ("rho", "\\rho"),
    ("sigma", "\\sigma"),
    ("tau", "\\tau"),
    ("upsilon", "\\upsilon"),
    ("phi", "\\phi"),
    ("chi", "\\chi"),
    ("psi", "\\psi"),
    ("omega", "\\omega"),
];

fn latex_symbol(name: &str) -> String {
    for (plain, tex) in GREEK {
        if name == *plain {
            return (*tex).to_string();
        }
    }
    // names like lambda_1 get a numeric subscript; others pass through
    if let Some((head, tail)) = name.rsplit_once('_') {
        if !tail.is_empty() && tail.chars().all(|c| c.is_ascii_digit()) {
            return format!("{}_{{{}}}", latex_symbol(head), tail);
        }
    }
    name.replace('_', "\\_")
}

fn latex_atom(a: &JetAtom) -> String {
    let core = match a.kind {
        AtomKind::Field => latex_symbol(&a.name),
        AtomKind::Momentum => format!("\\pi_{{{}}}", latex_symbol(&a.name)),
        AtomKind::Multiplier => {
            // second and later generation multipliers (mu_k) are displayed as
            // decorated lambdas to match the first generation visually
            if let Some(tail) = a.name.strip_prefix("mu_") {
                format!("\\tilde{{\\lambda}}_{{{tail}}}")
            } else {
                latex_symbol(&a.name)
            }
        }
    };
    let suffix = jet_suffix(a.x_order, a.t_order);
    if suffix.is_empty() {
        return core;
    }
    if core.contains('_') {
        format!("({core})_{{{suffix}}}")
    } else {
        format!("{core}_{{{suffix}}}")
    }
}

/// Encode an expression as a JSON tree (`kind` plus children). Rational
/// coefficients are carried as decimal strings so arbitrary precision
/// survives the round trip.
pub fn to_json_tree(e: &Expr) -> Value {
    match e {
        Expr::Rational(r) => json!({
            "kind": "rational",
            "numerator": r.numer().to_string(),
            "denominator": r.denom().to_string(),
        }),
        Expr::Atom(a) => json!({
            "kind": "atom",
            "atom": {
                "kind": match a.kind {
                    AtomKind::Field => "field",
                    AtomKind::Momentum => "momentum",
                    AtomKind::Multiplier => "multiplier",
                },
                "name": a.name,
                "x_order": a.x_order,
                "t_order": a.t_order,
            },
        }),
        Expr::Sum(v) => json!({
            "kind": "sum",
            "terms": v.iter().map(to_json_tree).collect::<Vec<_>>(),
        }),
        Expr::Product(v) => json!({
            "kind": "product",
            "factors": v.iter().map(to_json_tree).collect::<Vec<_>>(),
        }),
        Expr::Pow(b, n) => json!({
            "kind": "pow",
            "base": to_json_tree(b),
            "exponent": n,
        }),
        Expr::Ln(b) => json!({
            "kind": "ln",
            "arg": to_json_tree(b),
        }),
    }
}

/// Decode the JSON tree encoding produced by [`to_json_tree`].
pub fn from_json_tree(v: &Value) -> Result<Expr, String> {
    let kind = v
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| "expression node lacks a kind".to_string())?;
    match kind {
        "rational" => {
            let n = field_str(v, "numerator")?;
            let d = field_str(v, "denominator")?;
            let num: BigInt = n.parse().map_err(|_| format!("bad numerator {n:?}"))?;
            let den: BigInt = d.parse().map_err(|_| format!("bad denominator {d:?}"))?;
            if den == BigInt::from(0) {
                return Err("zero denominator".to_string());
            }
            Ok(Expr::Rational(BigRational::new(num, den)))
        }
        "atom" => {
            let a = v.get("atom").ok_or("atom node lacks atom payload")?;
            let akind = match field_str(a, "kind")? {
                "field" => AtomKind::Field,
                "momentum" => AtomKind::Momentum,
                "multiplier" => AtomKind::Multiplier,
                other => return Err(format!("unknown atom kind {other:?}")),
            };
            let name = field_str(a, "name")?.to_string();
            let x_order = field_u32(a, "x_order")?;
            let t_order = field_u32(a, "t_order")?;
            Ok(Expr::Atom(JetAtom { kind: akind, name, x_order, t_order }))
        }
        "sum" => Ok(Expr::Sum(child_list(v, "terms")?)),
        "product" => Ok(Expr::Product(child_list(v, "factors")?)),
        "pow" => {
            let base = from_json_tree(v.get("base").ok_or("pow node lacks base")?)?;
            let exp = v
                .get("exponent")
                .and_then(Value::as_i64)
                .ok_or("pow node lacks integer exponent")?;
            Ok(Expr::Pow(Box::new(base), exp))
        }
        "ln" => {
            let arg = from_json_tree(v.get("arg").ok_or("ln node lacks arg")?)?;
            Ok(Expr::Ln(Box::new(arg)))
        }
        other => Err(format!("unknown expression kind {other:?}")),
    }
}

fn field_str<'a>(v: &'a Value, key: &str) -> Result<&'a str, String> {
    v.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| format!("missing string field {key:?}"))
}

fn field_u32(v: &Value, key: &str) -> Result<u32, String> {
    v.get(key)
        .and_then(Value::as_u64)
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| format!("missing integer field {key:?}"))
}

fn child_list(v: &Value, key: &str) -> Result<Vec<Expr>, String> {
    v.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| format!("missing list field {key:?}"))?
        .iter()
        .map(from_json_tree)
        .collect()
}
