//! Sample grid, per-class fitting, the scaling filter and DMD assembly.

use std::collections::{BTreeMap, BTreeSet};

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use super::classify::{sample_binding, BindingSample, ClassRef, StructKey};
use super::fit::{CountingBackend, FitError, InterpolationBackend, Sample, SampleSet};
use super::poly::{ratio, Poly, QuasiPoly};
use crate::affine::Var;
use crate::exec::Execution;
use crate::formula::FormulaExpr;
use crate::locality::RdGroup;
use crate::polyhedral::{build_access_map, build_timestamp_space, Limits, ParamBinding, ResourceError, SpaceNode};
use crate::semantics::ValidatedProgram;

#[derive(Debug, Clone)]
pub struct SymbolicConfig {
    /// Smallest sampled parameter value. Defaults to `max(4 * period, 2 * depth)`,
    /// raised in steps of the period until parameter-bounded loops run at
    /// least three times.
    pub base: Option<i64>,
    /// Quasi-period; defaults to the lcm of steps, divisors, block size and set count.
    pub period: Option<i64>,
    /// Degree bound; defaults to the loop depth.
    pub degree: Option<u32>,
    /// Degree increments tried after a fit failure.
    pub retries: u32,
    /// Held-out bindings per residue class.
    pub validation: usize,
    /// Extra grid layers beyond what the highest degree needs.
    pub extra_layers: u32,
    pub execution: Execution,
    pub limits: Limits,
}

impl Default for SymbolicConfig {
    fn default() -> Self {
        SymbolicConfig {
            base: None,
            period: None,
            degree: None,
            retries: 1,
            validation: 2,
            extra_layers: 0,
            execution: Execution::default(),
            limits: Limits::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymbolicError {
    #[error(transparent)]
    Resource(#[from] ResourceError),
    #[error("no closed form for the {what} count: {source}")]
    Counts { what: &'static str, source: FitError },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicGroup {
    pub class: ClassRef,
    pub rd: QuasiPoly,
    pub multiplicity: QuasiPoly,
    pub scaling: bool,
}

/// A class with no closed form, with its concrete values at some bindings.
#[derive(Debug, Clone, PartialEq)]
pub struct UnresolvedClass {
    pub class: ClassRef,
    pub reason: String,
    /// The structural keys that failed, all under `class`.
    pub keys: Vec<StructKey>,
    pub samples: Vec<(Vec<i64>, Vec<RdGroup>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicDistribution {
    pub params: Vec<String>,
    pub period: i64,
    pub degree: u32,
    pub base: i64,
    pub groups: Vec<SymbolicGroup>,
    pub unresolved: Vec<UnresolvedClass>,
    pub n_total: QuasiPoly,
    pub n_warm: QuasiPoly,
    pub n_cold: QuasiPoly,
    pub grid: Vec<Vec<i64>>,
    pub validation: Vec<Vec<i64>>,
}

/// `n_c + Σ m_i * sqrt(r_i)` over the scaling groups.
#[derive(Debug, Clone, PartialEq)]
pub struct DmdFormula {
    pub cold_term: FormulaExpr,
    pub warm_terms: Vec<(FormulaExpr, FormulaExpr)>,
    pub expr: FormulaExpr,
    cold: QuasiPoly,
    warm: Vec<(QuasiPoly, QuasiPoly)>,
}

impl DmdFormula {
    /// Exact-count evaluation; only the square roots are floating point.
    pub fn evaluate(&self, x: &[i64]) -> Option<f64> {
        let mut total = self.cold.eval_f64(x)?;
        for (m, r) in &self.warm {
            let m = m.eval_f64(x)?;
            if m != 0.0 {
                total += m * r.eval_f64(x)?.sqrt();
            }
        }
        Some(total)
    }
}

/// Simplex grid offsets `j` with `Σ j ≤ layers`.
fn simplex(nvars: usize, layers: u32) -> Vec<Vec<i64>> {
    super::poly::monomials(nvars, layers).into_iter().map(|m| m.into_iter().map(i64::from).collect()).collect()
}

pub fn default_period(program: &ValidatedProgram, block_size: i64, num_sets: i64) -> i64 {
    let mut consts = program.periodic_constants();
    consts.push(block_size.max(1));
    consts.push(num_sets.max(1));
    consts.into_iter().filter(|&c| c > 0).fold(1, |acc, c| acc.lcm(&c))
}

struct Plan {
    period: i64,
    degree: u32,
    max_degree: u32,
    base: i64,
    /// Per residue index: grid bindings and validation bindings.
    residues: Vec<(Vec<Vec<i64>>, Vec<Vec<i64>>)>,
}

fn plan(
    program: &ValidatedProgram,
    block_size: i64,
    num_sets: i64,
    cfg: &SymbolicConfig,
) -> Result<Plan, SymbolicError> {
    let n = program.params.len();
    let period = cfg.period.unwrap_or_else(|| default_period(program, block_size, num_sets));
    if period < 1 {
        return Err(SymbolicError::Config(format!("period must be positive, found {period}")));
    }
    let depth = program.max_depth() as u32;
    let degree = cfg.degree.unwrap_or(depth);
    let max_degree = degree + cfg.retries;
    let base = match cfg.base {
        Some(b) => b,
        None => {
            // Raise the base until every loop bounded by parameters alone
            // runs at least three times, so first, interior and last
            // iterations all occur.
            let space = build_timestamp_space(program);
            let mut b = (4 * period).max(2 * i64::from(depth));
            for _ in 0..64 {
                if min_param_trip(&space.root, &ParamBinding(vec![b; n])).map_or(true, |t| t >= 3) {
                    break;
                }
                b += period;
            }
            b
        }
    };
    if base < 0 {
        return Err(SymbolicError::Config(format!("sample base must be non-negative, found {base}")));
    }
    let layers = max_degree + cfg.extra_layers;
    let offsets = simplex(n, layers);
    let periods = vec![period; n];
    let residues = (0..QuasiPoly::residue_count(&periods))
        .map(|idx| {
            let r = QuasiPoly::residues_of(&periods, idx);
            let at = |j: &[i64]| -> Vec<i64> { (0..n).map(|k| base + r[k] + period * j[k]).collect() };
            let grid = offsets.iter().map(|j| at(j)).collect();
            let validation = (0..cfg.validation)
                .map(|m| {
                    let j: Vec<i64> = (0..n).map(|k| i64::from(layers) + 1 + ((k + m) % 3) as i64).collect();
                    at(&j)
                })
                .collect();
            (grid, validation)
        })
        .collect();
    Ok(Plan { period, degree, max_degree, base, residues })
}

fn min_param_trip(node: &SpaceNode, binding: &ParamBinding) -> Option<i64> {
    match node {
        SpaceNode::Loop(l) => {
            let mut vars = Vec::new();
            l.lower.collect_vars(&mut vars);
            l.upper.collect_vars(&mut vars);
            let own = if vars.iter().all(|v| matches!(v, Var::Param(_))) {
                Some(l.trip_count(&|v| match v {
                    Var::Param(i) => binding.0[i],
                    _ => 0,
                }))
            } else {
                None
            };
            [own, min_param_trip(&l.body, binding)].into_iter().flatten().min()
        }
        SpaceNode::Sequence(s) => s.children.iter().filter_map(|c| min_param_trip(c, binding)).min(),
        SpaceNode::Branch(b) => b.bodies.iter().filter_map(|c| min_param_trip(c, binding)).min(),
        SpaceNode::Statement(_) | SpaceNode::Empty => None,
    }
}

/// Fits with increasing degree until the backend succeeds.
fn fit_retrying(
    backend: &dyn CountingBackend,
    nvars: usize,
    plan: &Plan,
    fit: &[Sample],
    validation: &[Sample],
) -> Result<QuasiPoly, FitError> {
    let mut last = None;
    for degree in plan.degree..=plan.max_degree {
        match backend.count(&SampleSet { nvars, period: plan.period, degree, fit, validation }) {
            Ok(q) => return Ok(q),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one degree is tried"))
}

pub fn analyze_symbolic(
    program: &ValidatedProgram,
    block_size: i64,
    num_sets: i64,
    config: &SymbolicConfig,
) -> Result<SymbolicDistribution, SymbolicError> {
    analyze_symbolic_with(program, block_size, num_sets, config, &InterpolationBackend::new())
}

pub fn analyze_symbolic_with(
    program: &ValidatedProgram,
    block_size: i64,
    num_sets: i64,
    config: &SymbolicConfig,
    backend: &dyn CountingBackend,
) -> Result<SymbolicDistribution, SymbolicError> {
    let n = program.params.len();
    let plan = plan(program, block_size, num_sets, config)?;
    let space = build_timestamp_space(program);
    let map = build_access_map(program, block_size, num_sets);

    let mut bindings = Vec::new();
    for (grid, validation) in &plan.residues {
        bindings.extend(grid.iter().cloned());
        bindings.extend(validation.iter().cloned());
    }
    let samples: Vec<BindingSample> = config
        .execution
        .map(&bindings, |b| sample_binding(&space, &map, &ParamBinding(b.clone()), &config.limits))
        .into_iter()
        .collect::<Result<_, _>>()?;
    let by_binding: BTreeMap<&[i64], &BindingSample> = samples.iter().map(|s| (s.binding.as_slice(), s)).collect();

    // Totals over the whole grid.
    let all_grid: Vec<&BindingSample> =
        plan.residues.iter().flat_map(|(g, _)| g.iter().map(|b| by_binding[b.as_slice()])).collect();
    let all_validation: Vec<&BindingSample> =
        plan.residues.iter().flat_map(|(_, v)| v.iter().map(|b| by_binding[b.as_slice()])).collect();
    let count_samples = |set: &[&BindingSample], f: &dyn Fn(&BindingSample) -> u64| -> Vec<Sample> {
        set.iter().map(|s| (s.binding.clone(), ratio(f(s) as i64))).collect()
    };
    let n_total = fit_retrying(
        backend,
        n,
        &plan,
        &count_samples(&all_grid, &|s| s.n_total),
        &count_samples(&all_validation, &|s| s.n_total),
    )
    .map_err(|source| SymbolicError::Counts { what: "total access", source })?;
    let n_warm = fit_retrying(
        backend,
        n,
        &plan,
        &count_samples(&all_grid, &|s| s.n_warm),
        &count_samples(&all_validation, &|s| s.n_warm),
    )
    .map_err(|source| SymbolicError::Counts { what: "warm access", source })?;
    let n_cold = n_total.map2(&n_warm, Poly::sub);

    // Per residue: fit every structural key rank by rank.
    let nres = plan.residues.len();
    type Fitted = BTreeMap<ClassRef, BTreeMap<Poly, Poly>>;
    let mut fitted: Vec<Fitted> = vec![BTreeMap::new(); nres];
    let mut unresolved_keys: BTreeMap<ClassRef, (BTreeSet<String>, BTreeSet<StructKey>)> = BTreeMap::new();
    for (ridx, (grid, validation)) in plan.residues.iter().enumerate() {
        let gs: Vec<&BindingSample> = grid.iter().map(|b| by_binding[b.as_slice()]).collect();
        let vs: Vec<&BindingSample> = validation.iter().map(|b| by_binding[b.as_slice()]).collect();
        let keys: BTreeSet<&StructKey> = gs.iter().chain(&vs).flat_map(|s| s.classes.keys()).collect();
        for key in keys {
            match fit_key(backend, n, &plan, key, &gs, &vs, ridx) {
                Ok(pieces) => {
                    let slot = fitted[ridx].entry(key.class).or_default();
                    for (rd, m) in pieces {
                        let merged = match slot.remove(&rd) {
                            Some(prev) => prev.add(&m),
                            None => m,
                        };
                        slot.insert(rd, merged);
                    }
                }
                Err(reason) => {
                    let entry = unresolved_keys.entry(key.class).or_default();
                    entry.0.insert(reason);
                    entry.1.insert(key.clone());
                }
            }
        }
    }

    let groups = align_residues(n, &plan, &fitted);
    let unresolved = unresolved_keys
        .into_iter()
        .map(|(class, (reasons, keys))| {
            let samples = plan.residues[0]
                .0
                .iter()
                .take(4)
                .map(|b| {
                    let s = by_binding[b.as_slice()];
                    let mut tally: BTreeMap<u64, u64> = BTreeMap::new();
                    for k in &keys {
                        for (rd, c) in s.classes.get(k).into_iter().flatten() {
                            *tally.entry(*rd).or_insert(0) += c;
                        }
                    }
                    (b.clone(), tally.into_iter().map(|(rd, count)| RdGroup { rd, count }).collect())
                })
                .collect();
            let reason = reasons.into_iter().collect::<Vec<_>>().join("; ");
            UnresolvedClass { class, reason, keys: keys.into_iter().collect(), samples }
        })
        .collect();

    Ok(SymbolicDistribution {
        params: program.params.clone(),
        period: plan.period,
        degree: plan.degree,
        base: plan.base,
        groups,
        unresolved,
        n_total,
        n_warm,
        n_cold,
        grid: plan.residues.iter().flat_map(|(g, _)| g.clone()).collect(),
        validation: plan.residues.iter().flat_map(|(_, v)| v.clone()).collect(),
    })
}

/// Fits the rd value and multiplicity of each rank of `key` within one
/// residue class. Errors carry the reason the class has no closed form.
fn fit_key(
    backend: &dyn CountingBackend,
    nvars: usize,
    plan: &Plan,
    key: &StructKey,
    grid: &[&BindingSample],
    validation: &[&BindingSample],
    ridx: usize,
) -> Result<Vec<(Poly, Poly)>, String> {
    let ranks: Vec<Option<Vec<(u64, u64)>>> = grid.iter().map(|s| s.ranks(key)).collect();
    if ranks.iter().any(Option::is_none) {
        return Err("absent at some sampled bindings".into());
    }
    let ranks: Vec<Vec<(u64, u64)>> = ranks.into_iter().flatten().collect();
    let held: Vec<Vec<(u64, u64)>> = validation.iter().map(|s| s.ranks(key).unwrap_or_default()).collect();
    let width = ranks[0].len();
    if ranks.iter().chain(&held).any(|r| r.len() != width) {
        return Err("number of distinct reuse distances varies with the parameters".into());
    }
    let mut out = Vec::with_capacity(width);
    for rank in 0..width {
        let pick = |set: &[&BindingSample], rows: &[Vec<(u64, u64)>], f: fn((u64, u64)) -> u64| -> Vec<Sample> {
            set.iter().zip(rows).map(|(s, r)| (s.binding.clone(), ratio(f(r[rank]) as i64))).collect()
        };
        let rd = fit_retrying(backend, nvars, plan, &pick(grid, &ranks, |p| p.0), &pick(validation, &held, |p| p.0));
        let m = fit_retrying(backend, nvars, plan, &pick(grid, &ranks, |p| p.1), &pick(validation, &held, |p| p.1));
        match (rd, m) {
            (Ok(rd), Ok(m)) => {
                let piece = |q: QuasiPoly| q.pieces[ridx].clone().expect("residue was sampled");
                out.push((piece(rd), piece(m)));
            }
            (Err(e), _) | (_, Err(e)) => return Err(format!("no closed form found ({e})")),
        }
    }
    Ok(out)
}

/// Combines per-residue pieces of each class into quasi-polynomial groups.
fn align_residues(
    nvars: usize,
    plan: &Plan,
    fitted: &[BTreeMap<ClassRef, BTreeMap<Poly, Poly>>],
) -> Vec<SymbolicGroup> {
    let period = vec![plan.period; nvars];
    let classes: BTreeSet<ClassRef> = fitted.iter().flat_map(|f| f.keys().copied()).collect();
    let mut groups = Vec::new();
    for class in classes {
        // Pieces per residue, ordered by rd value far out in the grid.
        let per_residue: Vec<Vec<(Poly, Poly)>> = fitted
            .iter()
            .enumerate()
            .map(|(ridx, f)| {
                let r = QuasiPoly::residues_of(&period, ridx);
                let far: Vec<i64> = r.iter().map(|v| plan.base + v + plan.period * 1000).collect();
                let mut pieces: Vec<(Poly, Poly)> =
                    f.get(&class).into_iter().flatten().map(|(rd, m)| (rd.clone(), m.clone())).collect();
                pieces.sort_by(|a, b| a.0.eval(&far).cmp(&b.0.eval(&far)).then_with(|| a.0.cmp(&b.0)));
                pieces
            })
            .collect();
        let width = per_residue[0].len();
        if per_residue.iter().all(|p| p.len() == width) {
            for k in 0..width {
                let rd = QuasiPoly {
                    nvars,
                    period: period.clone(),
                    pieces: per_residue.iter().map(|p| Some(p[k].0.clone())).collect(),
                };
                let m = QuasiPoly {
                    nvars,
                    period: period.clone(),
                    pieces: per_residue.iter().map(|p| Some(p[k].1.clone())).collect(),
                };
                groups.push(make_group(class, collapse(rd), collapse(m)));
            }
        } else {
            for (ridx, pieces) in per_residue.iter().enumerate() {
                for (rd_p, m_p) in pieces {
                    let mut rd = QuasiPoly { nvars, period: period.clone(), pieces: vec![None; per_residue.len()] };
                    let mut m = QuasiPoly {
                        nvars,
                        period: period.clone(),
                        pieces: vec![Some(Poly::zero(nvars)); per_residue.len()],
                    };
                    rd.pieces[ridx] = Some(rd_p.clone());
                    m.pieces[ridx] = Some(m_p.clone());
                    groups.push(make_group(class, rd, m));
                }
            }
        }
    }
    groups
}

/// Uses a single polynomial when all residue pieces coincide.
fn collapse(q: QuasiPoly) -> QuasiPoly {
    if q.is_uniform() && q.pieces.len() > 1 {
        if let Some(Some(p)) = q.pieces.first() {
            return QuasiPoly::polynomial(p.clone());
        }
    }
    q
}

fn make_group(class: ClassRef, rd: QuasiPoly, multiplicity: QuasiPoly) -> SymbolicGroup {
    let mut g = SymbolicGroup { class, rd, multiplicity, scaling: false };
    g.scaling = scaling_filter(&g);
    g
}

/// A fitted group scales when some residue's multiplicity depends on the
/// parameters. Groups missing at some grid bindings never reach this
/// point; they are reported as unresolved.
pub fn scaling_filter(group: &SymbolicGroup) -> bool {
    group.multiplicity.pieces.iter().flatten().any(|p| !p.is_constant())
}

pub fn assemble_dmd(dist: &SymbolicDistribution) -> DmdFormula {
    let names = &dist.params;
    let cold_term = dist.n_cold.to_formula(names);
    let mut warm_terms = Vec::new();
    let mut warm = Vec::new();
    let mut terms = vec![cold_term.clone()];
    for g in dist.groups.iter().filter(|g| g.scaling) {
        let m = g.multiplicity.to_formula(names);
        let r = g.rd.to_formula(names);
        let term = if g.multiplicity.is_uniform() && g.rd.is_uniform() {
            FormulaExpr::Mul(vec![m.clone(), FormulaExpr::sqrt(r.clone())])
        } else {
            quasi_term(g, names)
        };
        terms.push(term);
        warm_terms.push((m, FormulaExpr::sqrt(r)));
        warm.push((g.multiplicity.clone(), g.rd.clone()));
    }
    let sum = FormulaExpr::Add(terms);
    let expr = sum.simplify().unwrap_or(sum);
    DmdFormula { cold_term, warm_terms, expr, cold: dist.n_cold.clone(), warm }
}

/// Case table of `m * sqrt(r)` per residue class.
fn quasi_term(g: &SymbolicGroup, names: &[String]) -> FormulaExpr {
    let nres = g.multiplicity.pieces.len().max(g.rd.pieces.len());
    let period = if g.multiplicity.pieces.len() >= g.rd.pieces.len() { &g.multiplicity.period } else { &g.rd.period };
    let mut pieces = Vec::new();
    for idx in 0..nres {
        let res = QuasiPoly::residues_of(period, idx);
        let m = piece_at(&g.multiplicity, &res);
        let r = piece_at(&g.rd, &res);
        let term = match (m, r) {
            (Some(m), _) if m.is_zero() => FormulaExpr::int(0),
            (Some(m), Some(r)) => FormulaExpr::Mul(vec![m.to_formula(names), FormulaExpr::sqrt(r.to_formula(names))]),
            _ => FormulaExpr::int(0),
        };
        pieces.push(term.simplify().unwrap_or(term));
    }
    let conds = |idx: usize| -> (String, String) {
        let res = QuasiPoly::residues_of(period, idx);
        let (p, l): (Vec<_>, Vec<_>) = names
            .iter()
            .zip(period)
            .zip(&res)
            .filter(|((_, &per), _)| per > 1)
            .map(|((n, per), r)| (format!("{n} mod {per} = {r}"), format!("{n} \\equiv {r} \\pmod{{{per}}}")))
            .unzip();
        (p.join(" and "), l.join(", "))
    };
    let plain: Vec<String> =
        pieces.iter().enumerate().map(|(i, t)| format!("{} if {}", t.render_plain(), conds(i).0)).collect();
    let latex: Vec<String> =
        pieces.iter().enumerate().map(|(i, t)| format!("{} & {}", t.render_latex(), conds(i).1)).collect();
    FormulaExpr::raw(
        format!("cases({})", plain.join("; ")),
        format!("\\begin{{cases}} {} \\end{{cases}}", latex.join(" \\\\ ")),
    )
}

fn piece_at<'q>(q: &'q QuasiPoly, residues: &[i64]) -> Option<&'q Poly> {
    q.piece(residues)
}

impl SymbolicDistribution {
    /// Σ multiplicities of fitted groups at `x`.
    pub fn fitted_warm_at(&self, x: &[i64]) -> Option<BigRational> {
        self.groups.iter().try_fold(BigRational::zero(), |acc, g| Some(acc + g.multiplicity.eval(x)?))
    }

    pub fn n_total_at(&self, x: &[i64]) -> Option<i64> {
        self.n_total.eval(x)?.to_integer().to_i64()
    }
}
