//! The canonical multinomial form behind `Expr::normalize`.
//!
//! A `Multi` is a finite map from monomials to nonzero rational coefficients.
//! A monomial is a sorted list of (base, exponent) pairs with nonzero integer
//! exponents. Bases come in three flavours:
//!
//! * `Atom` - a jet coordinate; exponents may be any nonzero integer, so a
//!   plain `Multi` is a Laurent multinomial over the atoms.
//! * `Ln` - a logarithm kept as an opaque multiplicative base. Logarithms of
//!   monomials with positive rational coefficient are split into sums of
//!   logarithms of single bases first, so `ln(phi^2 * psi)` and
//!   `2*ln(phi) + ln(psi)` normalize identically.
//! * `Poly` - the inverse of a multi-term polynomial. Only negative exponents
//!   of `Poly` bases are ever stored; positive powers are expanded into the
//!   monomial map on sight. The wrapped polynomial is content-free with a
//!   positive leading coefficient, so equal denominators are shared.
//!
//! Zero testing is complete for rational functions of the atoms: a pure
//! Laurent multinomial is zero exactly when its map is empty, and when `Poly`
//! bases are present `finalize` clears removable denominators by exact
//! division and then combines everything over a common denominator, reducing
//! the question to the Laurent case. Logarithms are compared structurally
//! after the monomial splitting above.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num::{BigInt, BigRational, Integer, One, Signed, Zero};

use super::{Expr, ExprError, JetAtom};

/// Expanding a power of a sum with `m` terms to exponent `n` yields up to
/// `C(n + m - 1, m - 1)` monomials; refuse expansions past this budget so a
/// stray huge exponent errors out instead of exhausting memory.
const MAX_EXPANSION_TERMS: u128 = 100_000;

/// Iteration cap for exact polynomial division; reaching it means the
/// quotient is not going to terminate usefully, so the division is abandoned.
const MAX_DIVISION_STEPS: usize = 10_000;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub(crate) enum Base {
    Atom(JetAtom),
    Ln(Multi),
    Poly(Multi),
}

pub(crate) type Mono = Vec<(Base, i64)>;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub(crate) struct Multi {
    pub(crate) terms: BTreeMap<Mono, BigRational>,
}

impl Multi {
    pub(crate) fn zero() -> Multi {
        Multi { terms: BTreeMap::new() }
    }

    pub(crate) fn one() -> Multi {
        Multi::from_rational(BigRational::one())
    }

    pub(crate) fn from_rational(r: BigRational) -> Multi {
        let mut terms = BTreeMap::new();
        if !r.is_zero() {
            terms.insert(Vec::new(), r);
        }
        Multi { terms }
    }

    pub(crate) fn from_atom(a: JetAtom) -> Multi {
        Multi::from_mono(vec![(Base::Atom(a), 1)], BigRational::one())
    }

    pub(crate) fn from_mono(mono: Mono, coeff: BigRational) -> Multi {
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert(mono, coeff);
        }
        Multi { terms }
    }

    pub(crate) fn single(base: Base, exp: i64) -> Multi {
        debug_assert!(exp != 0);
        Multi::from_mono(vec![(base, exp)], BigRational::one())
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn constant_coeff(&self) -> Option<&BigRational> {
        let empty: &[(Base, i64)] = &[];
        self.terms.get(empty)
    }

    pub(crate) fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.constant_coeff().map(|c| c.is_one()).unwrap_or(false)
    }

    pub(crate) fn add(&self, other: &Multi) -> Multi {
        let mut out = self.terms.clone();
        for (k, c) in &other.terms {
            merge_term(&mut out, k.clone(), c.clone());
        }
        Multi { terms: out }
    }

    pub(crate) fn neg(&self) -> Multi {
        Multi { terms: self.terms.iter().map(|(k, c)| (k.clone(), -c)).collect() }
    }

    pub(crate) fn sub(&self, other: &Multi) -> Multi {
        self.add(&other.neg())
    }

    pub(crate) fn mul(&self, other: &Multi) -> Multi {
        let mut out: BTreeMap<Mono, BigRational> = BTreeMap::new();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                merge_term(&mut out, mono_mul(ka, kb), ca * cb);
            }
        }
        Multi { terms: out }
    }

    fn has_poly(&self) -> bool {
        self.terms
            .keys()
            .any(|k| k.iter().any(|(b, _)| matches!(b, Base::Poly(_))))
    }

    fn leading_mono(&self) -> Option<&Mono> {
        self.terms.keys().max_by(|a, b| grlex_cmp(a, b))
    }

    /// Convert back into an expression tree: terms in descending graded
    /// lexicographic order, factors in base order, coefficients in front.
    pub(crate) fn emit(&self) -> Expr {
        if self.terms.is_empty() {
            return Expr::zero();
        }
        let mut keys: Vec<&Mono> = self.terms.keys().collect();
        keys.sort_by(|a, b| grlex_cmp(b, a));
        let rendered: Vec<Expr> = keys
            .into_iter()
            .map(|k| emit_term(k, &self.terms[k]))
            .collect();
        Expr::add(rendered)
    }
}

fn merge_term(map: &mut BTreeMap<Mono, BigRational>, k: Mono, c: BigRational) {
    if c.is_zero() {
        return;
    }
    match map.entry(k) {
        std::collections::btree_map::Entry::Vacant(e) => {
            e.insert(c);
        }
        std::collections::btree_map::Entry::Occupied(mut e) => {
            let sum = e.get() + &c;
            if sum.is_zero() {
                e.remove();
            } else {
                *e.get_mut() = sum;
            }
        }
    }
}

fn mono_mul(a: &Mono, b: &Mono) -> Mono {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            Ordering::Equal => {
                let e = a[i].1 + b[j].1;
                if e != 0 {
                    out.push((a[i].0.clone(), e));
                }
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Graded lexicographic order: total degree first, then base-by-base over the
/// merged base list in ascending base order, where the larger exponent on the
/// earliest differing base wins. This order is compatible with monomial
/// multiplication, which exact division relies on.
pub(crate) fn grlex_cmp(a: &Mono, b: &Mono) -> Ordering {
    let da: i64 = a.iter().map(|(_, e)| *e).sum();
    let db: i64 = b.iter().map(|(_, e)| *e).sum();
    match da.cmp(&db) {
        Ordering::Equal => {}
        o => return o,
    }
    let (mut i, mut j) = (0, 0);
    loop {
        match (a.get(i), b.get(j)) {
            (None, None) => return Ordering::Equal,
            (Some((_, ea)), None) => return ea.cmp(&0),
            (None, Some((_, eb))) => return 0.cmp(eb),
            (Some((ba, ea)), Some((bb, eb))) => match ba.cmp(bb) {
                Ordering::Less => return ea.cmp(&0),
                Ordering::Greater => return 0.cmp(eb),
                Ordering::Equal => match ea.cmp(eb) {
                    Ordering::Equal => {
                        i += 1;
                        j += 1;
                    }
                    o => return o,
                },
            },
        }
    }
}

fn emit_term(mono: &Mono, coeff: &BigRational) -> Expr {
    if mono.is_empty() {
        return Expr::Rational(coeff.clone());
    }
    let mut factors = Vec::new();
    if !coeff.is_one() {
        factors.push(Expr::Rational(coeff.clone()));
    }
    for (base, exp) in mono {
        let base_expr = match base {
            Base::Atom(a) => Expr::Atom(a.clone()),
            Base::Ln(arg) => Expr::Ln(Box::new(arg.emit())),
            Base::Poly(core) => core.emit(),
        };
        factors.push(if *exp == 1 { base_expr } else { Expr::Pow(Box::new(base_expr), *exp) });
    }
    Expr::mul(factors)
}

/// Translate an expression tree into the canonical map.
pub(crate) fn build(e: &Expr) -> Result<Multi, ExprError> {
    Ok(match e {
        Expr::Rational(r) => Multi::from_rational(r.clone()),
        Expr::Atom(a) => Multi::from_atom(a.clone()),
        Expr::Sum(v) => {
            let mut acc = Multi::zero();
            for t in v {
                acc = acc.add(&build(t)?);
            }
            acc
        }
        Expr::Product(v) => {
            let mut acc = Multi::one();
            for f in v {
                if acc.is_zero() {
                    break;
                }
                acc = acc.mul(&build(f)?);
            }
            acc
        }
        Expr::Pow(b, n) => pow(&build(b)?, *n)?,
        Expr::Ln(b) => ln_of(build(b)?)?,
    })
}

/// Integer power. `m^0` is `1` for every `m`, including zero; negative powers
/// go through `invert`.
pub(crate) fn pow(m: &Multi, n: i64) -> Result<Multi, ExprError> {
    if n == 0 {
        return Ok(Multi::one());
    }
    if n < 0 {
        let inv = invert(m)?;
        return pow_u(&inv, n.unsigned_abs());
    }
    pow_u(m, n as u64)
}

fn pow_u(m: &Multi, n: u64) -> Result<Multi, ExprError> {
    if n == 0 {
        return Ok(Multi::one());
    }
    if n == 1 {
        return Ok(m.clone());
    }
    if m.terms.len() <= 1 {
        // a monomial power stays a single term; scale exponents directly
        let Some((k, c)) = m.terms.iter().next() else {
            return Ok(Multi::zero());
        };
        let exp = u32::try_from(n).map_err(|_| ExprError::ExponentOverflow(n as i64))?;
        let coeff = BigRational::new(c.numer().pow(exp), c.denom().pow(exp));
        let mono: Mono = k
            .iter()
            .map(|(b, e)| {
                e.checked_mul(n as i64)
                    .map(|e2| (b.clone(), e2))
                    .ok_or(ExprError::ExponentOverflow(n as i64))
            })
            .collect::<Result<_, _>>()?;
        return Ok(Multi::from_mono(mono, coeff));
    }
    if expansion_estimate(m.terms.len() as u128, n as u128) > MAX_EXPANSION_TERMS {
        return Err(ExprError::ExponentOverflow(n as i64));
    }
    let mut acc = Multi::one();
    let mut base = m.clone();
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            acc = acc.mul(&base);
        }
        k >>= 1;
        if k > 0 {
            base = base.mul(&base);
        }
    }
    Ok(acc)
}

/// Upper bound for the monomial count of an `m`-term sum raised to `n`,
/// saturating well past the budget instead of overflowing.
fn expansion_estimate(m: u128, n: u128) -> u128 {
    // C(n + m - 1, m - 1), computed incrementally with saturation
    let k = m.saturating_sub(1);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n.saturating_add(i) + 1) / (i + 1);
        if acc > MAX_EXPANSION_TERMS * 1000 {
            return u128::MAX;
        }
    }
    acc
}

/// Multiplicative inverse. The input is rewritten as
/// `coefficient * monomial * core` with a polynomial core; the coefficient
/// and monomial invert termwise and a multi-term core becomes a `Poly` base
/// with exponent `-1`.
pub(crate) fn invert(m: &Multi) -> Result<Multi, ExprError> {
    if m.terms.is_empty() {
        return Err(ExprError::DivisionByZero);
    }
    let (coeff, mono, core) = extract_content(m.clone())?;
    if core.is_zero() {
        // expansion inside content extraction cancelled every term, so the
        // input was the zero function in disguise
        return Err(ExprError::DivisionByZero);
    }
    let flipped: Mono = mono.iter().map(|(b, e)| (b.clone(), -e)).collect();
    let mut out = expand_mono(&flipped, &coeff.recip())?;
    if core.is_one() {
        return Ok(out);
    }
    if core.terms.len() == 1 {
        // a content-free single monomial is the unit and is handled above;
        // this branch is defensive
        let (k, c) = core.terms.iter().next().unwrap();
        let fl: Mono = k.iter().map(|(b, e)| (b.clone(), -e)).collect();
        let extra = expand_mono(&fl, &c.recip())?;
        return Ok(out.mul(&extra));
    }
    out = out.mul(&Multi::single(Base::Poly(core), -1));
    Ok(out)
}

/// Split `m` into `coefficient * monomial * core`. The core is a polynomial
/// over atom and logarithm bases: nonnegative exponents, no `Poly` bases at
/// all (negative powers are pulled into the monomial and positive powers are
/// expanded), integer coprime coefficients, and a positive leading
/// coefficient under the graded lexicographic order.
fn extract_content(mut m: Multi) -> Result<(BigRational, Mono, Multi), ExprError> {
    let mut coeff = BigRational::one();
    let mut mono: Mono = Vec::new();
    let mut rounds = 0usize;
    loop {
        rounds += 1;
        assert!(rounds < 10_000, "content extraction failed to settle");
        if m.terms.is_empty() {
            return Ok((coeff, mono, m));
        }
        if m
            .terms
            .keys()
            .any(|k| k.iter().any(|(b, e)| matches!(b, Base::Poly(_)) && *e > 0))
        {
            let mut out = Multi::zero();
            for (k, c) in &m.terms {
                out = out.add(&expand_mono(k, c)?);
            }
            m = out;
            continue;
        }
        // rational content: gcd of numerators over lcm of denominators,
        // signed so the core's leading coefficient comes out positive
        let lead = m.leading_mono().unwrap().clone();
        let lead_negative = m.terms[&lead].is_negative();
        let mut num_gcd = BigInt::zero();
        let mut den_lcm = BigInt::one();
        for c in m.terms.values() {
            num_gcd = num_gcd.gcd(&c.numer().abs());
            den_lcm = den_lcm.lcm(c.denom());
        }
        let mut content = BigRational::new(num_gcd, den_lcm);
        if lead_negative {
            content = -content;
        }
        // monomial content: per base, the minimum exponent over all terms,
        // with a missing base counting as zero
        let mut mins: BTreeMap<&Base, i64> = BTreeMap::new();
        for k in m.terms.keys() {
            for (b, e) in k {
                mins.entry(b).or_insert(0);
                let _ = e;
            }
        }
        let keys: Vec<&Base> = mins.keys().cloned().collect();
        for b in keys {
            let mut lo = i64::MAX;
            for k in m.terms.keys() {
                let e = k
                    .iter()
                    .find(|(kb, _)| kb == b)
                    .map(|(_, e)| *e)
                    .unwrap_or(0);
                lo = lo.min(e);
                if lo == i64::MIN {
                    break;
                }
            }
            mins.insert(b, lo);
        }
        let content_mono: Mono = mins
            .into_iter()
            .filter(|(_, e)| *e != 0)
            .map(|(b, e)| (b.clone(), e))
            .collect();
        if content.is_one() && content_mono.is_empty() {
            return Ok((coeff, mono, m));
        }
        // divide the content out and fold it into the accumulators
        let inv_c = content.recip();
        let inv_mono: Mono = content_mono.iter().map(|(b, e)| (b.clone(), -e)).collect();
        let mut reduced = BTreeMap::new();
        for (k, c) in &m.terms {
            reduced.insert(mono_mul(k, &inv_mono), c * &inv_c);
        }
        m = Multi { terms: reduced };
        coeff *= &content;
        mono = mono_mul(&mono, &content_mono);
    }
}

/// Expand the positive `Poly` powers inside one monomial term into the
/// monomial map, leaving every other factor in place.
fn expand_mono(mono: &Mono, coeff: &BigRational) -> Result<Multi, ExprError> {
    let mut flat: Mono = Vec::new();
    let mut acc: Option<Multi> = None;
    for (b, e) in mono {
        match b {
            Base::Poly(core) if *e > 0 => {
                let expanded = pow_u(core, *e as u64)?;
                acc = Some(match acc {
                    None => expanded,
                    Some(a) => a.mul(&expanded),
                });
            }
            _ => flat.push((b.clone(), *e)),
        }
    }
    let base = Multi::from_mono(flat, coeff.clone());
    Ok(match acc {
        None => base,
        Some(a) => a.mul(&base),
    })
}

/// Natural logarithm of a canonical map. Zero errors, one vanishes, a single
/// term with positive rational coefficient splits into a sum of logarithms of
/// its bases (plus the logarithm of the coefficient), anything else is kept
/// as an opaque logarithm base.
fn ln_of(m: Multi) -> Result<Multi, ExprError> {
    if m.terms.is_empty() {
        return Err(ExprError::LnOfZero);
    }
    let m = finalize(m);
    if m.is_one() {
        return Ok(Multi::zero());
    }
    if m.terms.len() == 1 {
        let (k, c) = m.terms.iter().next().unwrap();
        if c.is_positive() {
            let mut out = Multi::zero();
            if !c.is_one() {
                out = out.add(&Multi::single(
                    Base::Ln(Multi::from_rational(c.clone())),
                    1,
                ));
            }
            for (b, e) in k {
                let arg = match b {
                    Base::Poly(core) => core.clone(),
                    other => Multi::from_mono(vec![(other.clone(), 1)], BigRational::one()),
                };
                let piece = Multi::from_mono(
                    vec![(Base::Ln(arg), 1)],
                    BigRational::from_integer((*e).into()),
                );
                out = out.add(&piece);
            }
            return Ok(out);
        }
    }
    Ok(Multi::single(Base::Ln(m), 1))
}

/// Exact polynomial division by leading terms. Inputs must be `Poly`-free
/// with nonnegative exponents. Returns the quotient only when the remainder
/// is exactly zero.
fn try_div_exact(n: &Multi, d: &Multi) -> Option<Multi> {
    let d_lead = d.leading_mono()?.clone();
    let d_coeff = d.terms[&d_lead].clone();
    let mut rem = n.clone();
    let mut quot = Multi::zero();
    let mut steps = 0;
    while !rem.terms.is_empty() {
        steps += 1;
        if steps > MAX_DIVISION_STEPS {
            return None;
        }
        let r_lead = rem.leading_mono().unwrap().clone();
        let q_mono = mono_div(&r_lead, &d_lead)?;
        let q_coeff = &rem.terms[&r_lead] / &d_coeff;
        let q_term = Multi::from_mono(q_mono, q_coeff);
        rem = rem.sub(&q_term.mul(d));
        quot = quot.add(&q_term);
    }
    Some(quot)
}

/// Divide one monomial by another, failing when any exponent would go
/// negative (so the result stays polynomial).
fn mono_div(a: &Mono, b: &Mono) -> Option<Mono> {
    let mut out: Mono = Vec::new();
    let mut i = 0;
    for (bb, eb) in b {
        loop {
            let (ba, ea) = a.get(i)?;
            match ba.cmp(bb) {
                Ordering::Less => {
                    out.push((ba.clone(), *ea));
                    i += 1;
                }
                Ordering::Equal => {
                    let e = ea - eb;
                    if e < 0 {
                        return None;
                    }
                    if e > 0 {
                        out.push((ba.clone(), e));
                    }
                    i += 1;
                    break;
                }
                Ordering::Greater => return None,
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    if out.iter().any(|(_, e)| *e < 0) {
        return None;
    }
    Some(out)
}

/// Simplify denominators and decide hidden zeros.
///
/// Terms are grouped by their exact multiset of `Poly` factors; each group's
/// numerator tries to divide out its denominators exactly. If `Poly` bases
/// survive, the whole map is combined over a common denominator purely to
/// decide whether the function is identically zero.
pub(crate) fn finalize(m: Multi) -> Multi {
    if !m.has_poly() {
        return m;
    }
    let m = group_divide(m);
    if !m.has_poly() {
        return m;
    }
    if is_zero_by_combination(&m) {
        return Multi::zero();
    }
    m
}

type PolySig = Vec<(Multi, i64)>;

fn split_mono(k: &Mono) -> (Mono, PolySig) {
    let mut flat: Mono = Vec::new();
    let mut sig: PolySig = Vec::new();
    for (b, e) in k {
        match b {
            Base::Poly(core) => sig.push((core.clone(), *e)),
            _ => flat.push((b.clone(), *e)),
        }
    }
    (flat, sig)
}

fn group_divide(m: Multi) -> Multi {
    let mut groups: BTreeMap<PolySig, Multi> = BTreeMap::new();
    for (k, c) in &m.terms {
        let (flat, sig) = split_mono(k);
        let piece = Multi::from_mono(flat, c.clone());
        groups
            .entry(sig)
            .and_modify(|g| *g = g.add(&piece))
            .or_insert(piece);
    }
    let mut out = Multi::zero();
    for (sig, num) in groups {
        if sig.is_empty() || num.is_zero() {
            out = out.add(&num);
            continue;
        }
        // separate the numerator's monomial content so the polynomial part
        // can be divided exactly against each denominator core
        let (c, mono, mut core_n) = match extract_content(num.clone()) {
            Ok(v) => v,
            Err(_) => (BigRational::one(), Vec::new(), num.clone()),
        };
        let mut remaining: PolySig = Vec::new();
        for (dcore, mut e) in sig {
            while e < 0 {
                match try_div_exact(&core_n, &dcore) {
                    Some(q) => {
                        core_n = q;
                        e += 1;
                    }
                    None => break,
                }
            }
            if e != 0 {
                remaining.push((dcore, e));
            }
        }
        let mut rebuilt = Multi::from_mono(mono, c).mul(&core_n);
        for (dcore, e) in remaining {
            rebuilt = rebuilt.mul(&Multi::single(Base::Poly(dcore), e));
        }
        out = out.add(&rebuilt);
    }
    out
}

fn is_zero_by_combination(m: &Multi) -> bool {
    let mut max_mult: BTreeMap<Multi, i64> = BTreeMap::new();
    for k in m.terms.keys() {
        for (core, e) in split_mono(k).1 {
            let mult = -e;
            let cur = max_mult.entry(core).or_insert(0);
            *cur = (*cur).max(mult);
        }
    }
    let mut num = Multi::zero();
    for (k, c) in &m.terms {
        let (flat, sig) = split_mono(k);
        let mut t = Multi::from_mono(flat, c.clone());
        for (core, need) in &max_mult {
            let have = sig
                .iter()
                .find(|(s, _)| s == core)
                .map(|(_, e)| -e)
                .unwrap_or(0);
            let deficit = need - have;
            if deficit > 0 {
                match pow_u(core, deficit as u64) {
                    Ok(p) => t = t.mul(&p),
                    Err(_) => return false,
                }
            }
        }
        num = num.add(&t);
    }
    num.terms.is_empty()
}
