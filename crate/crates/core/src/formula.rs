//! Symbolic expressions for reuse-distance and DMD formulas.
//!
//! [`FormulaExpr::simplify`] flattens nested sums and products, collects like
//! terms with rational coefficients, folds constants and pulls perfect-square
//! factors out of square roots. Symbols stand for program parameters, which
//! are non-negative integers, so `sqrt(N^2)` simplifies to `N`.
//!
//! Canonical order: products put the constant first and sort the remaining
//! factors by base; sums sort terms by descending degree, then structurally,
//! with the constant term last.

use std::cmp::Reverse;
use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, One, Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

type Q = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormulaError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow while folding constants")]
    Overflow,
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("square root of negative value {0}")]
    NegativeSqrt(f64),
    #[error("raw formula `{0}` cannot be evaluated")]
    NotEvaluable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FormulaExpr {
    Rational { numerator: i64, denominator: i64 },
    Symbol(String),
    Raw { plain: String, latex: String },
    Add(Vec<FormulaExpr>),
    Mul(Vec<FormulaExpr>),
    Div(Box<FormulaExpr>, Box<FormulaExpr>),
    Pow(Box<FormulaExpr>, u32),
    Sqrt(Box<FormulaExpr>),
}

/// A formula rendered both ways, the shape formulas take in JSON reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rendered {
    pub plain: String,
    pub latex: String,
}

impl FormulaExpr {
    pub fn int(value: i64) -> Self {
        FormulaExpr::Rational { numerator: value, denominator: 1 }
    }

    /// Builds a rational in lowest terms with a positive denominator.
    pub fn rational(numerator: i64, denominator: i64) -> Result<Self, FormulaError> {
        if denominator == 0 {
            return Err(FormulaError::DivisionByZero);
        }
        let q = checked_ratio(numerator, denominator)?;
        Ok(from_q(q))
    }

    pub fn symbol(name: impl Into<String>) -> Self {
        FormulaExpr::Symbol(name.into())
    }

    pub fn raw(plain: impl Into<String>, latex: impl Into<String>) -> Self {
        FormulaExpr::Raw { plain: plain.into(), latex: latex.into() }
    }

    pub fn sqrt(child: FormulaExpr) -> Self {
        FormulaExpr::Sqrt(Box::new(child))
    }

    pub fn pow(base: FormulaExpr, exponent: u32) -> Self {
        FormulaExpr::Pow(Box::new(base), exponent)
    }

    pub fn div(num: FormulaExpr, den: FormulaExpr) -> Self {
        FormulaExpr::Div(Box::new(num), Box::new(den))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, FormulaExpr::Rational { numerator: 0, .. })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, FormulaExpr::Rational { .. })
    }

    pub fn simplify(&self) -> Result<FormulaExpr, FormulaError> {
        match self {
            FormulaExpr::Rational { numerator, denominator } => FormulaExpr::rational(*numerator, *denominator),
            FormulaExpr::Symbol(_) | FormulaExpr::Raw { .. } => Ok(self.clone()),
            FormulaExpr::Add(children) => {
                let terms = children.iter().map(|c| c.simplify()).collect::<Result<Vec<_>, _>>()?;
                build_sum(terms)
            }
            FormulaExpr::Mul(children) => {
                let factors = children.iter().map(|c| c.simplify()).collect::<Result<Vec<_>, _>>()?;
                build_product(factors)
            }
            FormulaExpr::Div(num, den) => build_quotient(num.simplify()?, den.simplify()?),
            FormulaExpr::Pow(base, exponent) => build_power(base.simplify()?, *exponent),
            FormulaExpr::Sqrt(child) => build_sqrt(child.simplify()?),
        }
    }

    /// Evaluates in double precision. `binding` supplies every symbol.
    pub fn evaluate<F>(&self, binding: &F) -> Result<f64, FormulaError>
    where
        F: Fn(&str) -> Option<f64>,
    {
        Ok(match self {
            FormulaExpr::Rational { numerator, denominator } => {
                if *denominator == 0 {
                    return Err(FormulaError::DivisionByZero);
                }
                *numerator as f64 / *denominator as f64
            }
            FormulaExpr::Symbol(name) => binding(name).ok_or_else(|| FormulaError::UnboundSymbol(name.clone()))?,
            FormulaExpr::Raw { plain, .. } => return Err(FormulaError::NotEvaluable(plain.clone())),
            FormulaExpr::Add(children) => {
                let mut acc = 0.0;
                for c in children {
                    acc += c.evaluate(binding)?;
                }
                acc
            }
            FormulaExpr::Mul(children) => {
                let mut acc = 1.0;
                for c in children {
                    acc *= c.evaluate(binding)?;
                }
                acc
            }
            FormulaExpr::Div(num, den) => {
                let d = den.evaluate(binding)?;
                if d == 0.0 {
                    return Err(FormulaError::DivisionByZero);
                }
                num.evaluate(binding)? / d
            }
            FormulaExpr::Pow(base, exponent) => {
                base.evaluate(binding)?.powi(i32::try_from(*exponent).unwrap_or(i32::MAX))
            }
            FormulaExpr::Sqrt(child) => {
                let v = child.evaluate(binding)?;
                if v < 0.0 {
                    return Err(FormulaError::NegativeSqrt(v));
                }
                v.sqrt()
            }
        })
    }

    /// Convenience wrapper over [`FormulaExpr::evaluate`] for map bindings.
    pub fn evaluate_with(&self, binding: &BTreeMap<String, f64>) -> Result<f64, FormulaError> {
        self.evaluate(&|name: &str| binding.get(name).copied())
    }

    pub fn render_plain(&self) -> String {
        let mut out = String::new();
        write_plain(self, &mut out);
        out
    }

    pub fn render_latex(&self) -> String {
        let mut out = String::new();
        write_latex(self, &mut out);
        out
    }

    pub fn rendered(&self) -> Rendered {
        Rendered { plain: self.render_plain(), latex: self.render_latex() }
    }
}

impl fmt::Display for FormulaExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_plain())
    }
}

impl Serialize for FormulaExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Formula", 2)?;
        s.serialize_field("plain", &self.render_plain())?;
        s.serialize_field("latex", &self.render_latex())?;
        s.end()
    }
}

impl From<&FormulaExpr> for Rendered {
    fn from(expr: &FormulaExpr) -> Self {
        expr.rendered()
    }
}

fn checked_ratio(numerator: i64, denominator: i64) -> Result<Q, FormulaError> {
    // Ratio::new negates the denominator, which overflows on i64::MIN.
    if numerator == i64::MIN || denominator == i64::MIN {
        return Err(FormulaError::Overflow);
    }
    Ok(Q::new(numerator, denominator))
}

fn from_q(q: Q) -> FormulaExpr {
    FormulaExpr::Rational { numerator: *q.numer(), denominator: *q.denom() }
}

fn as_q(expr: &FormulaExpr) -> Option<Q> {
    match expr {
        FormulaExpr::Rational { numerator, denominator } => Some(Q::new_raw(*numerator, *denominator)),
        _ => None,
    }
}

fn one() -> FormulaExpr {
    FormulaExpr::int(1)
}

/// Doubled polynomial degree, used only to order the terms of a sum.
fn degree2(expr: &FormulaExpr) -> i64 {
    match expr {
        FormulaExpr::Rational { .. } | FormulaExpr::Raw { .. } => 0,
        FormulaExpr::Symbol(_) => 2,
        FormulaExpr::Add(cs) => cs.iter().map(degree2).max().unwrap_or(0),
        FormulaExpr::Mul(cs) => cs.iter().map(degree2).sum(),
        FormulaExpr::Div(n, d) => degree2(n) - degree2(d),
        FormulaExpr::Pow(b, e) => degree2(b).saturating_mul(i64::from(*e)),
        FormulaExpr::Sqrt(c) => degree2(c) / 2,
    }
}

/// Splits a simplified term into its rational coefficient and the rest.
fn split_coefficient(term: FormulaExpr) -> (Q, Option<FormulaExpr>) {
    match term {
        FormulaExpr::Rational { .. } => (as_q(&term).unwrap(), None),
        FormulaExpr::Mul(mut factors) => match as_q(&factors[0]) {
            Some(q) => {
                factors.remove(0);
                let rest = if factors.len() == 1 { factors.pop().unwrap() } else { FormulaExpr::Mul(factors) };
                (q, Some(rest))
            }
            None => (Q::one(), Some(FormulaExpr::Mul(factors))),
        },
        other => (Q::one(), Some(other)),
    }
}

fn scale_term(coef: Q, rest: FormulaExpr) -> FormulaExpr {
    if coef.is_one() {
        return rest;
    }
    let mut factors = vec![from_q(coef)];
    match rest {
        FormulaExpr::Mul(fs) => factors.extend(fs),
        other => factors.push(other),
    }
    FormulaExpr::Mul(factors)
}

fn build_sum(terms: Vec<FormulaExpr>) -> Result<FormulaExpr, FormulaError> {
    let mut flat = Vec::with_capacity(terms.len());
    for t in terms {
        match t {
            FormulaExpr::Add(children) => flat.extend(children),
            other => flat.push(other),
        }
    }
    let mut constant = Q::zero();
    let mut collected: BTreeMap<FormulaExpr, Q> = BTreeMap::new();
    for t in flat {
        let (coef, rest) = split_coefficient(t);
        match rest {
            None => constant = constant.checked_add(&coef).ok_or(FormulaError::Overflow)?,
            Some(rest) => {
                let slot = collected.entry(rest).or_insert_with(Q::zero);
                *slot = slot.checked_add(&coef).ok_or(FormulaError::Overflow)?;
            }
        }
    }
    let mut out: Vec<FormulaExpr> =
        collected.into_iter().filter(|(_, c)| !c.is_zero()).map(|(rest, c)| scale_term(c, rest)).collect();
    out.sort_by_cached_key(|t| (Reverse(degree2(t)), term_body(t), t.clone()));
    if !constant.is_zero() {
        out.push(from_q(constant));
    }
    Ok(match out.len() {
        0 => FormulaExpr::int(0),
        1 => out.pop().unwrap(),
        _ => FormulaExpr::Add(out),
    })
}

/// Term with its coefficient stripped, so `2*N` and `N` order by `N`.
fn term_body(term: &FormulaExpr) -> FormulaExpr {
    split_coefficient(term.clone()).1.unwrap_or_else(one)
}

fn base_and_exponent(f: &FormulaExpr) -> (&FormulaExpr, u32) {
    match f {
        FormulaExpr::Pow(b, e) => (b, *e),
        other => (other, 1),
    }
}

fn build_product(factors: Vec<FormulaExpr>) -> Result<FormulaExpr, FormulaError> {
    let mut flat = Vec::with_capacity(factors.len());
    for f in factors {
        match f {
            FormulaExpr::Mul(children) => flat.extend(children),
            other => flat.push(other),
        }
    }
    let mut coef = Q::one();
    let mut powers: BTreeMap<FormulaExpr, u32> = BTreeMap::new();
    for f in flat {
        if let Some(q) = as_q(&f) {
            coef = coef.checked_mul(&q).ok_or(FormulaError::Overflow)?;
            continue;
        }
        let (base, e) = base_and_exponent(&f);
        let slot = powers.entry(base.clone()).or_insert(0);
        *slot = slot.checked_add(e).ok_or(FormulaError::Overflow)?;
    }
    if coef.is_zero() {
        return Ok(FormulaExpr::int(0));
    }
    let mut out = Vec::with_capacity(powers.len() + 1);
    if !coef.is_one() || powers.is_empty() {
        out.push(from_q(coef));
    }
    // BTreeMap iteration already yields bases in canonical order.
    for (base, e) in powers {
        out.push(if e == 1 { base } else { FormulaExpr::pow(base, e) });
    }
    Ok(if out.len() == 1 { out.pop().unwrap() } else { FormulaExpr::Mul(out) })
}

fn build_quotient(num: FormulaExpr, den: FormulaExpr) -> Result<FormulaExpr, FormulaError> {
    if let Some(q) = as_q(&den) {
        if q.is_zero() {
            return Err(FormulaError::DivisionByZero);
        }
        return build_product(vec![num, from_q(q.recip())]);
    }
    if num.is_zero() {
        return Ok(FormulaExpr::int(0));
    }
    Ok(FormulaExpr::div(num, den))
}

fn checked_pow(q: Q, exponent: u32) -> Result<Q, FormulaError> {
    let n = q.numer().checked_pow(exponent).ok_or(FormulaError::Overflow)?;
    let d = q.denom().checked_pow(exponent).ok_or(FormulaError::Overflow)?;
    checked_ratio(n, d)
}

fn build_power(base: FormulaExpr, exponent: u32) -> Result<FormulaExpr, FormulaError> {
    if exponent == 0 {
        return Ok(one());
    }
    if exponent == 1 {
        return Ok(base);
    }
    match base {
        FormulaExpr::Rational { .. } => Ok(from_q(checked_pow(as_q(&base).unwrap(), exponent)?)),
        FormulaExpr::Pow(inner, e) => build_power(*inner, e.checked_mul(exponent).ok_or(FormulaError::Overflow)?),
        FormulaExpr::Mul(factors) => {
            let powered = factors.into_iter().map(|f| build_power(f, exponent)).collect::<Result<Vec<_>, _>>()?;
            build_product(powered)
        }
        other => Ok(FormulaExpr::pow(other, exponent)),
    }
}

/// Bases known to be non-negative: parameters, square roots, and
/// non-negative constants.
fn non_negative(expr: &FormulaExpr) -> bool {
    match expr {
        FormulaExpr::Symbol(_) | FormulaExpr::Sqrt(_) => true,
        FormulaExpr::Rational { numerator, .. } => *numerator >= 0,
        _ => false,
    }
}

/// Returns `(s, r)` with `n = s^2 * r` and `r` square-free, for `n >= 0`.
fn square_split(n: i64) -> (i64, i64) {
    if n < 4 {
        return (1, n);
    }
    let mut rest = n;
    let mut root = 1i64;
    let mut p = 2i64;
    while p.saturating_mul(p) <= rest && p < 1_000_000 {
        let sq = p * p;
        while rest % sq == 0 {
            rest /= sq;
            root *= p;
        }
        p += 1;
    }
    (root, rest)
}

fn build_sqrt(child: FormulaExpr) -> Result<FormulaExpr, FormulaError> {
    let (coef, factors) = match child {
        FormulaExpr::Rational { .. } => (as_q(&child).unwrap(), Vec::new()),
        FormulaExpr::Mul(mut fs) => match as_q(&fs[0]) {
            Some(q) => {
                fs.remove(0);
                (q, fs)
            }
            None => (Q::one(), fs),
        },
        other => (Q::one(), vec![other]),
    };
    let mut outside = Vec::new();
    let mut inside = Vec::new();
    if coef.is_negative() {
        inside.push(from_q(coef));
    } else if !coef.is_zero() {
        // sqrt(n/d) = sqrt(n*d)/d, then pull squares out of n*d.
        let (n, d) = (*coef.numer(), *coef.denom());
        let nd = n.checked_mul(d).ok_or(FormulaError::Overflow)?;
        let (root, rest) = square_split(nd);
        outside.push(from_q(checked_ratio(root, d)?));
        inside.push(FormulaExpr::int(rest));
    } else {
        return Ok(FormulaExpr::int(0));
    }
    for f in factors {
        let (base, e) = base_and_exponent(&f);
        if non_negative(base) && e >= 2 {
            let outer = build_power(base.clone(), e / 2)?;
            outside.push(outer);
            if e % 2 == 1 {
                inside.push(base.clone());
            }
        } else {
            inside.push(f);
        }
    }
    let inner = build_product(inside)?;
    if as_q(&inner).is_some_and(|q| q.is_one()) {
        return build_product(outside);
    }
    if inner.is_zero() {
        return Ok(FormulaExpr::int(0));
    }
    outside.push(FormulaExpr::sqrt(inner));
    build_product(outside)
}

// ---------------------------------------------------------------------------
// Rendering

fn is_negative_rational(expr: &FormulaExpr) -> bool {
    matches!(expr, FormulaExpr::Rational { numerator, .. } if *numerator < 0)
}

/// For a sum term with a negative leading coefficient, the term with the
/// sign flipped (so it can be printed after ` - `).
fn negated_term(term: &FormulaExpr) -> Option<FormulaExpr> {
    match term {
        FormulaExpr::Rational { numerator, denominator } if *numerator < 0 && *numerator != i64::MIN => {
            Some(FormulaExpr::Rational { numerator: -numerator, denominator: *denominator })
        }
        FormulaExpr::Mul(fs) if fs.len() >= 2 => match &fs[0] {
            FormulaExpr::Rational { numerator, denominator } if *numerator < 0 && *numerator != i64::MIN => {
                let mut rest = Vec::with_capacity(fs.len());
                if !(*numerator == -1 && *denominator == 1) {
                    rest.push(FormulaExpr::Rational { numerator: -numerator, denominator: *denominator });
                }
                rest.extend(fs[1..].iter().cloned());
                Some(if rest.len() == 1 { rest.pop().unwrap() } else { FormulaExpr::Mul(rest) })
            }
            _ => None,
        },
        _ => None,
    }
}

fn is_atom_for_power(expr: &FormulaExpr) -> bool {
    match expr {
        FormulaExpr::Symbol(_) => true,
        FormulaExpr::Rational { numerator, denominator } => *numerator >= 0 && *denominator == 1,
        _ => false,
    }
}

fn write_plain(expr: &FormulaExpr, out: &mut String) {
    match expr {
        FormulaExpr::Rational { numerator, denominator } => {
            if *denominator == 1 {
                out.push_str(&numerator.to_string());
            } else {
                out.push_str(&format!("{numerator}/{denominator}"));
            }
        }
        FormulaExpr::Symbol(name) => out.push_str(name),
        FormulaExpr::Raw { plain, .. } => out.push_str(plain),
        FormulaExpr::Add(terms) => {
            for (i, term) in terms.iter().enumerate() {
                let (sep, shown) = match (i, negated_term(term)) {
                    (0, _) => ("", term.clone()),
                    (_, Some(neg)) => (" - ", neg),
                    (_, None) => (" + ", term.clone()),
                };
                out.push_str(sep);
                if matches!(shown, FormulaExpr::Add(_)) || (i > 0 && is_negative_rational(&shown)) {
                    out.push('(');
                    write_plain(&shown, out);
                    out.push(')');
                } else {
                    write_plain(&shown, out);
                }
            }
        }
        FormulaExpr::Mul(factors) => {
            let mut start = 0;
            if let Some(FormulaExpr::Rational { numerator: -1, denominator: 1 }) = factors.first() {
                if factors.len() > 1 {
                    out.push('-');
                    start = 1;
                }
            }
            for (i, f) in factors.iter().enumerate().skip(start) {
                if i > start {
                    out.push_str(" * ");
                }
                let wrap = matches!(f, FormulaExpr::Add(_) | FormulaExpr::Div(..) | FormulaExpr::Mul(_))
                    || (i > 0 && is_negative_rational(f))
                    || (start == 1 && i == 1 && is_negative_rational(f));
                if wrap {
                    out.push('(');
                    write_plain(f, out);
                    out.push(')');
                } else {
                    write_plain(f, out);
                }
            }
        }
        FormulaExpr::Div(num, den) => {
            let wrap_num = matches!(**num, FormulaExpr::Add(_));
            let wrap_den = matches!(**den, FormulaExpr::Add(_) | FormulaExpr::Mul(_) | FormulaExpr::Div(..))
                || matches!(**den, FormulaExpr::Rational { numerator, denominator } if numerator < 0 || denominator != 1);
            wrapped_plain(num, wrap_num, out);
            out.push_str(" / ");
            wrapped_plain(den, wrap_den, out);
        }
        FormulaExpr::Pow(base, exponent) => {
            wrapped_plain(base, !is_atom_for_power(base), out);
            out.push('^');
            out.push_str(&exponent.to_string());
        }
        FormulaExpr::Sqrt(child) => {
            out.push_str("sqrt(");
            write_plain(child, out);
            out.push(')');
        }
    }
}

fn wrapped_plain(expr: &FormulaExpr, wrap: bool, out: &mut String) {
    if wrap {
        out.push('(');
        write_plain(expr, out);
        out.push(')');
    } else {
        write_plain(expr, out);
    }
}

fn wrapped_latex(expr: &FormulaExpr, wrap: bool, out: &mut String) {
    if wrap {
        out.push_str("\\left(");
        write_latex(expr, out);
        out.push_str("\\right)");
    } else {
        write_latex(expr, out);
    }
}

fn write_latex(expr: &FormulaExpr, out: &mut String) {
    match expr {
        FormulaExpr::Rational { numerator, denominator } => {
            if *denominator == 1 {
                out.push_str(&numerator.to_string());
            } else {
                if *numerator < 0 {
                    out.push('-');
                }
                out.push_str(&format!("\\frac{{{}}}{{{}}}", numerator.unsigned_abs(), denominator));
            }
        }
        FormulaExpr::Symbol(name) => out.push_str(name),
        FormulaExpr::Raw { latex, .. } => out.push_str(latex),
        FormulaExpr::Add(terms) => {
            for (i, term) in terms.iter().enumerate() {
                let (sep, shown) = match (i, negated_term(term)) {
                    (0, _) => ("", term.clone()),
                    (_, Some(neg)) => (" - ", neg),
                    (_, None) => (" + ", term.clone()),
                };
                out.push_str(sep);
                let wrap = matches!(shown, FormulaExpr::Add(_)) || (i > 0 && is_negative_rational(&shown));
                wrapped_latex(&shown, wrap, out);
            }
        }
        FormulaExpr::Mul(factors) => {
            let mut start = 0;
            if let Some(FormulaExpr::Rational { numerator: -1, denominator: 1 }) = factors.first() {
                if factors.len() > 1 {
                    out.push('-');
                    start = 1;
                }
            }
            for (i, f) in factors.iter().enumerate().skip(start) {
                if i > start {
                    out.push_str(" \\cdot ");
                }
                let wrap = matches!(f, FormulaExpr::Add(_) | FormulaExpr::Mul(_)) || (i > 0 && is_negative_rational(f));
                wrapped_latex(f, wrap, out);
            }
        }
        FormulaExpr::Div(num, den) => {
            out.push_str("\\frac{");
            write_latex(num, out);
            out.push_str("}{");
            write_latex(den, out);
            out.push('}');
        }
        FormulaExpr::Pow(base, exponent) => {
            wrapped_latex(base, !is_atom_for_power(base), out);
            out.push_str(&format!("^{{{exponent}}}"));
        }
        FormulaExpr::Sqrt(child) => {
            out.push_str("\\sqrt{");
            write_latex(child, out);
            out.push('}');
        }
    }
}
