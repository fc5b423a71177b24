//! The report document printed by the CLI and returned by the playground.
//!
//! One shape for both analyses. Concrete reports carry constant formulas.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::diagnostic::{Category, Diagnostic};
use crate::formula::{FormulaExpr, Rendered};
use crate::locality::{scan, RdGroup};
use crate::polyhedral::{build_access_map, build_timestamp_space, Limits, ParamBinding, ResourceError};
use crate::semantics::ValidatedProgram;
use crate::symbolic::classify::event_key;
use crate::symbolic::{assemble_dmd, ClassRef, SymbolicDistribution, UnresolvedClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub program: ProgramInfo,
    pub config: ReportConfig,
    pub dmd: Rendered,
    pub counts: Counts,
    pub groups: Vec<GroupReport>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramInfo {
    pub params: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Symbolic,
    Concrete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub mode: Mode,
    pub block_size: i64,
    pub num_sets: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<BTreeMap<String, i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_bindings: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counts {
    pub n_total: Rendered,
    pub n_warm: Rendered,
    pub n_cold: Rendered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupReport {
    pub rd: Rendered,
    pub multiplicity: Rendered,
    /// False for groups left out of the DMD formula.
    pub scaling: bool,
    pub class: ClassRef,
}

pub fn symbolic_report(dist: &SymbolicDistribution, block_size: i64, num_sets: i64) -> Report {
    let names = &dist.params;
    let dmd = assemble_dmd(dist);
    let groups = dist
        .groups
        .iter()
        .map(|g| GroupReport {
            rd: g.rd.to_formula(names).rendered(),
            multiplicity: g.multiplicity.to_formula(names).rendered(),
            scaling: g.scaling,
            class: g.class,
        })
        .collect();
    let mut diagnostics: Vec<Diagnostic> = dist.unresolved.iter().map(|u| unresolved_note(u, names)).collect();
    let dropped = dist.groups.iter().filter(|g| !g.scaling).count();
    if dropped > 0 {
        diagnostics.push(Diagnostic::note(
            Category::Note,
            format!("{dropped} group(s) with constant multiplicity left out of the DMD formula"),
        ));
    }
    Report {
        program: ProgramInfo { params: names.clone() },
        config: ReportConfig {
            mode: Mode::Symbolic,
            block_size,
            num_sets,
            binding: None,
            period: Some(dist.period),
            degree: Some(dist.degree),
            base: Some(dist.base),
            grid_size: Some(dist.grid.len()),
            validation_bindings: Some(dist.validation.len()),
        },
        dmd: dmd.expr.rendered(),
        counts: Counts {
            n_total: dist.n_total.to_formula(names).rendered(),
            n_warm: dist.n_warm.to_formula(names).rendered(),
            n_cold: dist.n_cold.to_formula(names).rendered(),
        },
        groups,
        diagnostics,
    }
}

fn unresolved_note(u: &UnresolvedClass, names: &[String]) -> Diagnostic {
    let samples: Vec<String> = u
        .samples
        .iter()
        .map(|(x, groups)| {
            let at: Vec<String> = names.iter().zip(x).map(|(n, v)| format!("{n}={v}")).collect();
            let rds: Vec<String> = groups.iter().map(|g| format!("rd {} x {}", g.rd, g.count)).collect();
            format!("[{}: {}]", at.join(", "), rds.join(", "))
        })
        .collect();
    Diagnostic::note(
        Category::NoClosedForm,
        format!(
            "no closed form found for S{} after S{} (carrier {}): {}; samples {}",
            u.class.source.0,
            u.class.pred.0,
            u.class.carrier,
            u.reason,
            samples.join(" ")
        ),
    )
}

/// Exact analysis at one binding, grouped by class and rd.
pub fn concrete_report(
    program: &ValidatedProgram,
    binding: &ParamBinding,
    block_size: i64,
    num_sets: i64,
    limits: &Limits,
) -> Result<Report, ResourceError> {
    let space = build_timestamp_space(program);
    let map = build_access_map(program, block_size, num_sets);
    let mut by_class: BTreeMap<(ClassRef, u64), u64> = BTreeMap::new();
    let mut n_warm = 0u64;
    let n_total = scan(&space, &map, binding, limits, |e| {
        if let (Some(key), Some(r)) = (event_key(&e), e.reuse) {
            *by_class.entry((key.class, r.rd)).or_insert(0) += 1;
            n_warm += 1;
        }
    })?;
    let n_cold = n_total - n_warm;
    let mut terms = vec![count_expr(n_cold)];
    let mut rd_totals: BTreeMap<u64, u64> = BTreeMap::new();
    for (&(_, rd), &count) in &by_class {
        *rd_totals.entry(rd).or_insert(0) += count;
    }
    for (&rd, &count) in &rd_totals {
        terms.push(FormulaExpr::Mul(vec![count_expr(count), FormulaExpr::sqrt(count_expr(rd))]));
    }
    let sum = FormulaExpr::Add(terms);
    let dmd = sum.simplify().unwrap_or(sum);
    let groups = by_class
        .iter()
        .map(|(&(class, rd), &count)| GroupReport {
            rd: count_expr(rd).rendered(),
            multiplicity: count_expr(count).rendered(),
            scaling: true,
            class,
        })
        .collect();
    Ok(Report {
        program: ProgramInfo { params: program.params.clone() },
        config: ReportConfig {
            mode: Mode::Concrete,
            block_size,
            num_sets,
            binding: Some(program.params.iter().cloned().zip(binding.0.iter().copied()).collect()),
            period: None,
            degree: None,
            base: None,
            grid_size: None,
            validation_bindings: None,
        },
        dmd: dmd.rendered(),
        counts: Counts {
            n_total: count_expr(n_total).rendered(),
            n_warm: count_expr(n_warm).rendered(),
            n_cold: count_expr(n_cold).rendered(),
        },
        groups,
        diagnostics: Vec::new(),
    })
}

fn count_expr(v: u64) -> FormulaExpr {
    match i64::try_from(v) {
        Ok(v) => FormulaExpr::int(v),
        Err(_) => FormulaExpr::raw(v.to_string(), v.to_string()),
    }
}

/// Rolls per-class groups of a concrete report up into an rd histogram.
pub fn rd_histogram(report: &Report) -> Vec<RdGroup> {
    let mut out: BTreeMap<u64, u64> = BTreeMap::new();
    for g in &report.groups {
        if let (Ok(rd), Ok(count)) = (g.rd.plain.parse::<u64>(), g.multiplicity.plain.parse::<u64>()) {
            *out.entry(rd).or_insert(0) += count;
        }
    }
    out.into_iter().map(|(rd, count)| RdGroup { rd, count }).collect()
}

/// Human-readable rendering.
pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let c = &report.config;
    let params = if report.program.params.is_empty() { "(none)".to_string() } else { report.program.params.join(", ") };
    let _ = writeln!(out, "params: {params}");
    match c.mode {
        Mode::Symbolic => {
            let _ = writeln!(
                out,
                "mode: symbolic (block size {}, sets {}, period {}, degree {}, base {}, {} samples + {} held out)",
                c.block_size,
                c.num_sets,
                c.period.unwrap_or(1),
                c.degree.unwrap_or(0),
                c.base.unwrap_or(0),
                c.grid_size.unwrap_or(0),
                c.validation_bindings.unwrap_or(0),
            );
        }
        Mode::Concrete => {
            let at: Vec<String> = c.binding.iter().flatten().map(|(n, v)| format!("{n}={v}")).collect();
            let _ = writeln!(
                out,
                "mode: concrete at {} (block size {}, sets {})",
                if at.is_empty() { "()".to_string() } else { at.join(", ") },
                c.block_size,
                c.num_sets
            );
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "DMD   = {}", report.dmd.plain);
    let _ = writeln!(out, "LaTeX: {}", report.dmd.latex);
    let _ = writeln!(out);
    let _ = writeln!(out, "accesses  {}", report.counts.n_total.plain);
    let _ = writeln!(out, "warm      {}", report.counts.n_warm.plain);
    let _ = writeln!(out, "cold      {}", report.counts.n_cold.plain);
    let _ = writeln!(out);
    if report.groups.is_empty() {
        let _ = writeln!(out, "no reuse");
    } else {
        let _ = writeln!(out, "reuse groups:");
        for g in &report.groups {
            let _ = writeln!(
                out,
                "  S{} after S{}, carrier {}: rd = {}, count = {}{}",
                g.class.source.0,
                g.class.pred.0,
                g.class.carrier,
                g.rd.plain,
                g.multiplicity.plain,
                if g.scaling { "" } else { "  [diagnostic, not in DMD]" }
            );
        }
    }
    if !report.diagnostics.is_empty() {
        let _ = writeln!(out);
        for d in &report.diagnostics {
            let _ = writeln!(out, "{d}");
        }
    }
    out
}
