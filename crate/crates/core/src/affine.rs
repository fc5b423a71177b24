//! Resolved affine expressions over parameters, loop iterators and
//! timestamp ordinals.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::ast::CmpOp;

/// What a variable reference resolved to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// Index into the program's parameter list.
    Param(usize),
    /// Loop iterator, by nesting level (0 = outermost enclosing loop).
    Iter(usize),
    /// Timestamp dimension, after the ordinal substitution.
    Ordinal(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AffineExpr {
    Const(i64),
    Var(Var),
    Add(Box<AffineExpr>, Box<AffineExpr>),
    Sub(Box<AffineExpr>, Box<AffineExpr>),
    /// Constant times expression.
    Mul(i64, Box<AffineExpr>),
    /// Floor division by a positive constant.
    FloorDiv(Box<AffineExpr>, i64),
    Neg(Box<AffineExpr>),
}

impl AffineExpr {
    pub fn var(v: Var) -> Self {
        AffineExpr::Var(v)
    }

    pub fn add(a: AffineExpr, b: AffineExpr) -> Self {
        AffineExpr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: AffineExpr, b: AffineExpr) -> Self {
        AffineExpr::Sub(Box::new(a), Box::new(b))
    }

    pub fn scale(c: i64, a: AffineExpr) -> Self {
        AffineExpr::Mul(c, Box::new(a))
    }

    pub fn eval<F: Fn(Var) -> i64>(&self, env: &F) -> i64 {
        match self {
            AffineExpr::Const(c) => *c,
            AffineExpr::Var(v) => env(*v),
            AffineExpr::Add(a, b) => a.eval(env) + b.eval(env),
            AffineExpr::Sub(a, b) => a.eval(env) - b.eval(env),
            AffineExpr::Mul(c, a) => c * a.eval(env),
            AffineExpr::FloorDiv(a, d) => a.eval(env).div_euclid(*d),
            AffineExpr::Neg(a) => -a.eval(env),
        }
    }

    /// Value when the expression mentions no variables.
    pub fn constant(&self) -> Option<i64> {
        Some(match self {
            AffineExpr::Const(c) => *c,
            AffineExpr::Var(_) => return None,
            AffineExpr::Add(a, b) => a.constant()?.checked_add(b.constant()?)?,
            AffineExpr::Sub(a, b) => a.constant()?.checked_sub(b.constant()?)?,
            AffineExpr::Mul(c, a) => c.checked_mul(a.constant()?)?,
            AffineExpr::FloorDiv(a, d) => a.constant()?.div_euclid(*d),
            AffineExpr::Neg(a) => a.constant()?.checked_neg()?,
        })
    }

    /// Replaces every variable by the expression `f` returns for it.
    pub fn substitute<F: Fn(Var) -> AffineExpr>(&self, f: &F) -> AffineExpr {
        match self {
            AffineExpr::Const(c) => AffineExpr::Const(*c),
            AffineExpr::Var(v) => f(*v),
            AffineExpr::Add(a, b) => AffineExpr::add(a.substitute(f), b.substitute(f)),
            AffineExpr::Sub(a, b) => AffineExpr::sub(a.substitute(f), b.substitute(f)),
            AffineExpr::Mul(c, a) => AffineExpr::scale(*c, a.substitute(f)),
            AffineExpr::FloorDiv(a, d) => AffineExpr::FloorDiv(Box::new(a.substitute(f)), *d),
            AffineExpr::Neg(a) => AffineExpr::Neg(Box::new(a.substitute(f))),
        }
    }

    pub fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            AffineExpr::Const(_) => {}
            AffineExpr::Var(v) => out.push(*v),
            AffineExpr::Add(a, b) | AffineExpr::Sub(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            AffineExpr::Mul(_, a) | AffineExpr::FloorDiv(a, _) | AffineExpr::Neg(a) => a.collect_vars(out),
        }
    }

    pub fn collect_divisors(&self, out: &mut Vec<i64>) {
        match self {
            AffineExpr::Const(_) | AffineExpr::Var(_) => {}
            AffineExpr::Add(a, b) | AffineExpr::Sub(a, b) => {
                a.collect_divisors(out);
                b.collect_divisors(out);
            }
            AffineExpr::FloorDiv(a, d) => {
                out.push(*d);
                a.collect_divisors(out);
            }
            AffineExpr::Mul(_, a) | AffineExpr::Neg(a) => a.collect_divisors(out),
        }
    }

    /// Coefficient form, when the expression has no floor division.
    pub fn linear(&self) -> Option<Linear> {
        Some(match self {
            AffineExpr::Const(c) => Linear { terms: BTreeMap::new(), constant: *c },
            AffineExpr::Var(v) => Linear { terms: [(*v, 1)].into(), constant: 0 },
            AffineExpr::Add(a, b) => a.linear()?.plus(&b.linear()?, 1),
            AffineExpr::Sub(a, b) => a.linear()?.plus(&b.linear()?, -1),
            AffineExpr::Mul(c, a) => a.linear()?.times(*c),
            AffineExpr::Neg(a) => a.linear()?.times(-1),
            AffineExpr::FloorDiv(..) => return None,
        })
    }

    /// Human-readable rendering, folding to `2*i + 1` style when linear.
    pub fn render<F: Fn(Var) -> String>(&self, names: &F) -> String {
        if let Some(lin) = self.linear() {
            return lin.render(names);
        }
        match self {
            AffineExpr::FloorDiv(a, d) => format!("floor(({}) / {d})", a.render(names)),
            AffineExpr::Add(a, b) => format!("{} + {}", a.render(names), b.render(names)),
            AffineExpr::Sub(a, b) => format!("{} - ({})", a.render(names), b.render(names)),
            AffineExpr::Mul(c, a) => format!("{c}*({})", a.render(names)),
            AffineExpr::Neg(a) => format!("-({})", a.render(names)),
            AffineExpr::Const(_) | AffineExpr::Var(_) => unreachable!("linear forms render above"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Linear {
    pub terms: BTreeMap<Var, i64>,
    pub constant: i64,
}

impl Linear {
    fn plus(mut self, other: &Linear, sign: i64) -> Linear {
        for (v, c) in &other.terms {
            *self.terms.entry(*v).or_insert(0) += sign * c;
        }
        self.terms.retain(|_, c| *c != 0);
        self.constant += sign * other.constant;
        self
    }

    fn times(mut self, k: i64) -> Linear {
        self.terms.values_mut().for_each(|c| *c *= k);
        self.terms.retain(|_, c| *c != 0);
        self.constant *= k;
        self
    }

    pub fn render<F: Fn(Var) -> String>(&self, names: &F) -> String {
        let mut out = String::new();
        for (v, c) in &self.terms {
            let name = names(*v);
            let mag = c.unsigned_abs();
            if out.is_empty() {
                if *c < 0 {
                    out.push('-');
                }
            } else {
                out.push_str(if *c < 0 { " - " } else { " + " });
            }
            if mag == 1 {
                out.push_str(&name);
            } else {
                let _ = write!(out, "{mag}*{name}");
            }
        }
        if out.is_empty() {
            return self.constant.to_string();
        }
        if self.constant != 0 {
            let sign = if self.constant < 0 { " - " } else { " + " };
            let _ = write!(out, "{sign}{}", self.constant.unsigned_abs());
        }
        out
    }
}

/// An affine comparison `lhs op rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub lhs: AffineExpr,
    pub op: CmpOp,
    pub rhs: AffineExpr,
}

impl Constraint {
    pub fn holds<F: Fn(Var) -> i64>(&self, env: &F) -> bool {
        self.op.holds(self.lhs.eval(env), self.rhs.eval(env))
    }

    /// The complement as a disjunction of conjunctive constraints:
    /// `a == b` negates to `a < b` or `a > b`.
    pub fn negated(&self) -> Vec<Constraint> {
        let with = |op| Constraint { lhs: self.lhs.clone(), op, rhs: self.rhs.clone() };
        match self.op {
            CmpOp::Lt => vec![with(CmpOp::Ge)],
            CmpOp::Le => vec![with(CmpOp::Gt)],
            CmpOp::Ge => vec![with(CmpOp::Lt)],
            CmpOp::Gt => vec![with(CmpOp::Le)],
            CmpOp::Eq => vec![with(CmpOp::Lt), with(CmpOp::Gt)],
        }
    }

    pub fn substitute<F: Fn(Var) -> AffineExpr>(&self, f: &F) -> Constraint {
        Constraint { lhs: self.lhs.substitute(f), op: self.op, rhs: self.rhs.substitute(f) }
    }

    pub fn render<F: Fn(Var) -> String>(&self, names: &F) -> String {
        format!("{} {} {}", self.lhs.render(names), self.op.as_str(), self.rhs.render(names))
    }
}

/// Floor-division-safe ceiling of `a / b` for `b > 0`.
pub fn ceil_div(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_div_handles_signs() {
        assert_eq!(ceil_div(7, 2), 4);
        assert_eq!(ceil_div(6, 2), 3);
        assert_eq!(ceil_div(0, 3), 0);
        assert_eq!(ceil_div(-1, 2), 0);
        assert_eq!(ceil_div(-3, 2), -1);
    }

    #[test]
    fn floor_div_rounds_toward_negative_infinity() {
        let e = AffineExpr::FloorDiv(Box::new(AffineExpr::Var(Var::Iter(0))), 4);
        assert_eq!(e.eval(&|_| -1), -1);
        assert_eq!(e.eval(&|_| 7), 1);
    }

    #[test]
    fn renders_linear_forms() {
        let o = AffineExpr::var(Var::Ordinal(0));
        let e = AffineExpr::add(AffineExpr::scale(2, o.clone()), AffineExpr::Const(1));
        let names = |v: Var| match v {
            Var::Ordinal(d) => format!("o{d}"),
            _ => "p".into(),
        };
        assert_eq!(e.render(&names), "2*o0 + 1");
        let e = AffineExpr::sub(AffineExpr::Const(0), o);
        assert_eq!(e.render(&names), "-o0");
    }
}
