//! Multivariate polynomials and quasi-polynomials with exact rational
//! coefficients.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::formula::FormulaExpr;

/// Exponent vector, one entry per parameter.
pub type Monomial = Vec<u32>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Poly {
    pub nvars: usize,
    /// Non-zero coefficients only.
    pub terms: BTreeMap<Monomial, BigRational>,
}

/// All monomials of total degree at most `degree`, by ascending degree.
pub fn monomials(nvars: usize, degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut current = vec![0; nvars];
        fill(&mut current, 0, total, &mut out);
    }
    out
}

fn fill(current: &mut Monomial, pos: usize, remaining: u32, out: &mut Vec<Monomial>) {
    if pos + 1 >= current.len() {
        if let Some(last) = current.last_mut() {
            *last = remaining;
            out.push(current.clone());
        } else if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        fill(current, pos + 1, remaining - e, out);
    }
    current[pos] = 0;
}

pub fn monomial_value(m: &[u32], x: &[i64]) -> BigInt {
    m.iter().zip(x).fold(BigInt::one(), |acc, (&e, &v)| acc * BigInt::from(v).pow(e))
}

pub fn ratio(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        let mut p = Poly::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn from_coefficients(nvars: usize, monos: &[Monomial], coefs: Vec<BigRational>) -> Self {
        let terms = monos.iter().cloned().zip(coefs).filter(|(_, c)| !c.is_zero()).collect();
        Poly { nvars, terms }
    }

    pub fn eval(&self, x: &[i64]) -> BigRational {
        self.terms
            .iter()
            .fold(BigRational::zero(), |acc, (m, c)| acc + c * BigRational::from_integer(monomial_value(m, x)))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.iter().sum()).max().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            let e = terms.entry(m.clone()).or_insert_with(BigRational::zero);
            *e += c;
            if e.is_zero() {
                terms.remove(m);
            }
        }
        Poly { nvars: self.nvars.max(other.nvars), terms }
    }

    pub fn neg(&self) -> Poly {
        Poly { nvars: self.nvars, terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn to_formula(&self, names: &[String]) -> FormulaExpr {
        let terms: Vec<FormulaExpr> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mut factors = vec![rational_formula(c)];
                for (name, &e) in names.iter().zip(m) {
                    match e {
                        0 => {}
                        1 => factors.push(FormulaExpr::symbol(name.clone())),
                        e => factors.push(FormulaExpr::pow(FormulaExpr::symbol(name.clone()), e)),
                    }
                }
                FormulaExpr::Mul(factors)
            })
            .collect();
        let sum = FormulaExpr::Add(terms);
        sum.simplify().unwrap_or(sum)
    }
}

/// Rational constant, or a verbatim rendering when it does not fit in i64.
pub fn rational_formula(c: &BigRational) -> FormulaExpr {
    match (c.numer().to_i64(), c.denom().to_i64()) {
        (Some(n), Some(d)) => FormulaExpr::rational(n, d).expect("denominator of a reduced ratio is positive"),
        _ => {
            let plain = c.to_string();
            let latex = if c.is_integer() {
                c.numer().to_string()
            } else {
                let sign = if c.is_negative() { "-" } else { "" };
                format!("{sign}\\frac{{{}}}{{{}}}", c.numer().abs(), c.denom())
            };
            FormulaExpr::raw(plain, latex)
        }
    }
}

/// Polynomial per residue class of the parameters modulo `period`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuasiPoly {
    pub nvars: usize,
    /// Period of each parameter.
    pub period: Vec<i64>,
    /// Indexed by [`QuasiPoly::residue_index`]; `None` where no samples
    /// were available.
    pub pieces: Vec<Option<Poly>>,
}

impl QuasiPoly {
    pub fn polynomial(p: Poly) -> Self {
        QuasiPoly { nvars: p.nvars, period: vec![1; p.nvars], pieces: vec![Some(p)] }
    }

    pub fn residue_count(period: &[i64]) -> usize {
        period.iter().map(|&p| p as usize).product()
    }

    /// Mixed-radix index of the residues of `x`, first parameter most
    /// significant.
    pub fn residue_index(period: &[i64], x: &[i64]) -> usize {
        period.iter().zip(x).fold(0, |acc, (&p, &v)| acc * p as usize + v.rem_euclid(p) as usize)
    }

    pub fn residues_of(period: &[i64], mut index: usize) -> Vec<i64> {
        let mut out = vec![0; period.len()];
        for (slot, &p) in out.iter_mut().zip(period).rev() {
            *slot = (index % p as usize) as i64;
            index /= p as usize;
        }
        out
    }

    pub fn piece(&self, x: &[i64]) -> Option<&Poly> {
        self.pieces.get(Self::residue_index(&self.period, x))?.as_ref()
    }

    pub fn eval(&self, x: &[i64]) -> Option<BigRational> {
        self.piece(x).map(|p| p.eval(x))
    }

    pub fn eval_f64(&self, x: &[i64]) -> Option<f64> {
        self.eval(x).and_then(|r| r.to_f64())
    }

    pub fn is_uniform(&self) -> bool {
        let mut it = self.pieces.iter();
        let first = it.next();
        it.all(|p| Some(p) == first)
    }

    /// True when every available piece is a constant.
    pub fn is_constant(&self) -> bool {
        self.pieces.iter().flatten().all(Poly::is_constant)
    }

    pub fn map2(&self, other: &QuasiPoly, f: impl Fn(&Poly, &Poly) -> Poly) -> QuasiPoly {
        assert_eq!(self.period, other.period, "quasi-polynomials with different periods");
        let pieces = self
            .pieces
            .iter()
            .zip(&other.pieces)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Some(f(a, b)),
                _ => None,
            })
            .collect();
        QuasiPoly { nvars: self.nvars, period: self.period.clone(), pieces }
    }

    /// Single polynomial when all pieces agree, otherwise a case table.
    pub fn to_formula(&self, names: &[String]) -> FormulaExpr {
        if self.is_uniform() {
            return match &self.pieces[0] {
                Some(p) => p.to_formula(names),
                None => FormulaExpr::raw("undefined", "\\text{undefined}"),
            };
        }
        let mut plain = Vec::new();
        let mut latex = Vec::new();
        for (idx, piece) in self.pieces.iter().enumerate() {
            let Some(p) = piece else { continue };
            let residues = Self::residues_of(&self.period, idx);
            let conds: Vec<(String, String)> = names
                .iter()
                .zip(&self.period)
                .zip(&residues)
                .filter(|((_, &per), _)| per > 1)
                .map(|((n, per), r)| (format!("{n} mod {per} = {r}"), format!("{n} \\equiv {r} \\pmod{{{per}}}")))
                .collect();
            let f = p.to_formula(names);
            let (cp, cl): (Vec<_>, Vec<_>) = conds.into_iter().unzip();
            plain.push(format!("{} if {}", f.render_plain(), cp.join(" and ")));
            latex.push(format!("{} & {}", f.render_latex(), cl.join(", ")));
        }
        FormulaExpr::raw(
            format!("cases({})", plain.join("; ")),
            format!("\\begin{{cases}} {} \\end{{cases}}", latex.join(" \\\\ ")),
        )
    }
}
