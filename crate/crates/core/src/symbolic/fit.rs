//! Exact interpolation of sampled counts.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use super::poly::{monomial_value, monomials, Monomial, Poly, QuasiPoly};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FitError {
    #[error("fit-failure: samples are not a polynomial of degree {degree} with period {period}")]
    Inconsistent { degree: u32, period: i64 },
    #[error("fit-failure: held-out binding {binding:?} gives {actual}, formula predicts {predicted}")]
    Validation { binding: Vec<i64>, actual: String, predicted: String },
    #[error("too few independent samples for degree {degree} (need {needed}, have {have})")]
    Underdetermined { degree: u32, needed: usize, have: usize },
    #[error("no samples for residue class {0:?}")]
    MissingResidue(Vec<i64>),
}

pub type Sample = (Vec<i64>, BigRational);

/// Interpolation over a fixed point set. Building it inverts the
/// collocation matrix once; each [`Interpolator::solve`] is then a
/// matrix-vector product plus a consistency check on the surplus points.
#[derive(Debug)]
pub struct Interpolator {
    nvars: usize,
    degree: u32,
    monos: Vec<Monomial>,
    rows: Vec<Vec<BigRational>>,
    /// Indices of the rows forming an invertible square system.
    basis: Vec<usize>,
    inverse: Vec<Vec<BigRational>>,
}

impl Interpolator {
    pub fn new(nvars: usize, degree: u32, points: &[Vec<i64>]) -> Result<Self, FitError> {
        let monos = monomials(nvars, degree);
        let m = monos.len();
        let rows: Vec<Vec<BigRational>> = points
            .iter()
            .map(|x| monos.iter().map(|mo| BigRational::from_integer(monomial_value(mo, x))).collect())
            .collect();
        // Greedy row selection by incremental elimination.
        let mut echelon: Vec<(usize, Vec<BigRational>)> = Vec::new();
        let mut basis = Vec::new();
        for (idx, row) in rows.iter().enumerate() {
            if basis.len() == m {
                break;
            }
            let mut r = row.clone();
            for (pivot, e) in &echelon {
                if !r[*pivot].is_zero() {
                    let f = &r[*pivot] / &e[*pivot];
                    for (a, b) in r.iter_mut().zip(e) {
                        *a -= &f * b;
                    }
                }
            }
            if let Some(pivot) = r.iter().position(|v| !v.is_zero()) {
                echelon.push((pivot, r));
                basis.push(idx);
            }
        }
        if basis.len() < m {
            return Err(FitError::Underdetermined { degree, needed: m, have: basis.len() });
        }
        let square: Vec<Vec<BigRational>> = basis.iter().map(|&i| rows[i].clone()).collect();
        let inverse = invert(square);
        Ok(Interpolator { nvars, degree, monos, rows, basis, inverse })
    }

    pub fn solve(&self, values: &[BigRational], period: i64) -> Result<Poly, FitError> {
        let coefs: Vec<BigRational> = self
            .inverse
            .iter()
            .map(|row| row.iter().zip(&self.basis).fold(BigRational::zero(), |acc, (a, &i)| acc + a * &values[i]))
            .collect();
        for (row, v) in self.rows.iter().zip(values) {
            let predicted = row.iter().zip(&coefs).fold(BigRational::zero(), |acc, (a, c)| acc + a * c);
            if &predicted != v {
                return Err(FitError::Inconsistent { degree: self.degree, period });
            }
        }
        Ok(Poly::from_coefficients(self.nvars, &self.monos, coefs))
    }
}

fn invert(mut a: Vec<Vec<BigRational>>) -> Vec<Vec<BigRational>> {
    let n = a.len();
    let mut inv: Vec<Vec<BigRational>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero()).expect("basis rows are independent");
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for v in a[col].iter_mut().chain(inv[col].iter_mut()) {
            *v /= &p;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let (src_a, src_i) = (a[col].clone(), inv[col].clone());
                for (x, y) in a[r].iter_mut().zip(&src_a) {
                    *x -= &f * y;
                }
                for (x, y) in inv[r].iter_mut().zip(&src_i) {
                    *x -= &f * y;
                }
            }
        }
    }
    inv
}

/// Samples handed to a [`CountingBackend`].
#[derive(Debug, Clone, Copy)]
pub struct SampleSet<'a> {
    pub nvars: usize,
    pub period: i64,
    pub degree: u32,
    pub fit: &'a [Sample],
    pub validation: &'a [Sample],
}

/// Turns classified samples into a quasi-polynomial. The engine only
/// depends on this trait, so a parametric counting library can stand in
/// for interpolation.
pub trait CountingBackend: Send + Sync {
    fn count(&self, samples: &SampleSet<'_>) -> Result<QuasiPoly, FitError>;
}

/// Exact rational interpolation, with interpolators cached per point set.
#[derive(Debug, Default)]
pub struct InterpolationBackend {
    cache: Mutex<HashMap<(u32, Vec<Vec<i64>>), Arc<Interpolator>>>,
}

impl InterpolationBackend {
    pub fn new() -> Self {
        Self::default()
    }

    fn interpolator(&self, nvars: usize, degree: u32, points: Vec<Vec<i64>>) -> Result<Arc<Interpolator>, FitError> {
        let key = (degree, points);
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let interp = Arc::new(Interpolator::new(nvars, degree, &key.1)?);
        self.cache.lock().expect("cache lock").insert(key, interp.clone());
        Ok(interp)
    }
}

impl CountingBackend for InterpolationBackend {
    fn count(&self, s: &SampleSet<'_>) -> Result<QuasiPoly, FitError> {
        let period = vec![s.period.max(1); s.nvars];
        let mut by_residue: BTreeMap<usize, (Vec<Vec<i64>>, Vec<BigRational>)> = BTreeMap::new();
        for (x, v) in s.fit {
            let slot = by_residue.entry(QuasiPoly::residue_index(&period, x)).or_default();
            slot.0.push(x.clone());
            slot.1.push(v.clone());
        }
        let mut pieces = vec![None; QuasiPoly::residue_count(&period)];
        for (idx, (points, values)) in by_residue {
            let interp = self.interpolator(s.nvars, s.degree, points)?;
            pieces[idx] = Some(interp.solve(&values, s.period)?);
        }
        let q = QuasiPoly { nvars: s.nvars, period, pieces };
        for (x, v) in s.validation {
            let predicted = q.eval(x).ok_or_else(|| {
                FitError::MissingResidue(QuasiPoly::residues_of(&q.period, QuasiPoly::residue_index(&q.period, x)))
            })?;
            if &predicted != v {
                return Err(FitError::Validation {
                    binding: x.clone(),
                    actual: v.to_string(),
                    predicted: predicted.to_string(),
                });
            }
        }
        Ok(q)
    }
}

/// Fits `samples` with one polynomial of total degree at most `degree` per
/// residue class modulo `period`. Surplus samples must agree exactly.
pub fn fit(samples: &[Sample], degree: u32, period: i64) -> Result<QuasiPoly, FitError> {
    fit_validated(samples, &[], degree, period)
}

/// As [`fit`], then checks the held-out `validation` samples.
pub fn fit_validated(
    samples: &[Sample],
    validation: &[Sample],
    degree: u32,
    period: i64,
) -> Result<QuasiPoly, FitError> {
    let nvars = samples.first().map_or(0, |(x, _)| x.len());
    InterpolationBackend::new().count(&SampleSet { nvars, period, degree, fit: samples, validation })
}
