//! Name resolution and well-formedness checks.

use std::collections::HashMap;

use crate::affine::{AffineExpr, Constraint, Var};
use crate::ast::{self, AccessKind, Expr, ExprKind, Program, Stmt};
use crate::diagnostic::{Category, Diagnostic, Span};

/// Index of an access statement in program (textual) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct StmtId(pub usize);

#[derive(Debug, Clone)]
pub struct ArrayInfo {
    pub name: String,
    pub extents: Vec<AffineExpr>,
}

impl ArrayInfo {
    pub fn rank(&self) -> usize {
        self.extents.len()
    }
}

#[derive(Debug, Clone)]
pub struct AccessInfo {
    pub id: StmtId,
    pub kind: AccessKind,
    pub array: usize,
    /// Subscripts over `Var::Param` and `Var::Iter`.
    pub subscripts: Vec<AffineExpr>,
    /// Number of enclosing loops.
    pub depth: usize,
    pub span: Span,
    /// Source form, e.g. `read C[i, j]`.
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct CheckedLoop {
    pub level: usize,
    pub iterator: String,
    pub lower: AffineExpr,
    pub upper: AffineExpr,
    pub step: i64,
    pub body: Vec<CheckedStmt>,
}

#[derive(Debug, Clone)]
pub struct CheckedIf {
    pub conditions: Vec<Constraint>,
    pub then_body: Vec<CheckedStmt>,
    pub else_body: Vec<CheckedStmt>,
}

#[derive(Debug, Clone)]
pub enum CheckedStmt {
    Loop(CheckedLoop),
    If(CheckedIf),
    Access(StmtId),
}

#[derive(Debug, Clone)]
pub struct ValidatedProgram {
    pub ast: Program,
    pub params: Vec<String>,
    pub arrays: Vec<ArrayInfo>,
    pub body: Vec<CheckedStmt>,
    pub accesses: Vec<AccessInfo>,
}

impl ValidatedProgram {
    pub fn access(&self, id: StmtId) -> &AccessInfo {
        &self.accesses[id.0]
    }

    pub fn max_rank(&self) -> usize {
        self.arrays.iter().map(ArrayInfo::rank).max().unwrap_or(0)
    }

    pub fn max_depth(&self) -> usize {
        self.accesses.iter().map(|a| a.depth).max().unwrap_or(0)
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p == name)
    }

    /// Loop steps and constant divisors; these set the quasi-period.
    pub fn periodic_constants(&self) -> Vec<i64> {
        fn walk(stmts: &[CheckedStmt], out: &mut Vec<i64>) {
            for s in stmts {
                match s {
                    CheckedStmt::Loop(l) => {
                        out.push(l.step);
                        l.lower.collect_divisors(out);
                        l.upper.collect_divisors(out);
                        walk(&l.body, out);
                    }
                    CheckedStmt::If(i) => {
                        for c in &i.conditions {
                            c.lhs.collect_divisors(out);
                            c.rhs.collect_divisors(out);
                        }
                        walk(&i.then_body, out);
                        walk(&i.else_body, out);
                    }
                    CheckedStmt::Access(_) => {}
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.body, &mut out);
        for a in &self.accesses {
            a.subscripts.iter().for_each(|s| s.collect_divisors(&mut out));
        }
        out
    }
}

/// Checks `program`, reporting every violation found.
pub fn validate(program: &Program) -> Result<ValidatedProgram, Vec<Diagnostic>> {
    let mut cx = Checker { diags: Vec::new(), params: HashMap::new(), arrays: HashMap::new(), scope: Vec::new() };
    let mut params = Vec::new();
    for p in &program.params {
        if cx.params.contains_key(&p.name) {
            cx.error(Category::DuplicateName, format!("duplicate parameter `{}`", p.name), p.span);
            continue;
        }
        cx.params.insert(p.name.clone(), params.len());
        params.push(p.name.clone());
    }
    let mut arrays = Vec::new();
    for a in &program.arrays {
        let name = &a.name.name;
        if cx.params.contains_key(name) {
            cx.error(Category::DuplicateName, format!("array `{name}` has the same name as a parameter"), a.name.span);
        } else if cx.arrays.contains_key(name) {
            cx.error(Category::DuplicateName, format!("duplicate array `{name}`"), a.name.span);
        }
        // Extents are checked with no loop iterators in scope.
        let extents = a.extents.iter().map(|e| cx.expr(e).unwrap_or(AffineExpr::Const(0))).collect();
        cx.arrays.entry(name.clone()).or_insert(arrays.len());
        arrays.push(ArrayInfo { name: name.clone(), extents });
    }
    let mut accesses = Vec::new();
    let body = cx.block(&program.body, &arrays, &mut accesses);
    if cx.diags.is_empty() {
        Ok(ValidatedProgram { ast: program.clone(), params, arrays, body, accesses })
    } else {
        Err(cx.diags)
    }
}

struct Checker {
    diags: Vec<Diagnostic>,
    params: HashMap<String, usize>,
    arrays: HashMap<String, usize>,
    /// Enclosing loop iterators, outermost first.
    scope: Vec<String>,
}

impl Checker {
    fn error(&mut self, category: Category, message: String, span: Span) {
        self.diags.push(Diagnostic::new(category, message, span));
    }

    fn block(&mut self, stmts: &[Stmt], arrays: &[ArrayInfo], out: &mut Vec<AccessInfo>) -> Vec<CheckedStmt> {
        stmts.iter().filter_map(|s| self.stmt(s, arrays, out)).collect()
    }

    fn stmt(&mut self, stmt: &Stmt, arrays: &[ArrayInfo], out: &mut Vec<AccessInfo>) -> Option<CheckedStmt> {
        match stmt {
            Stmt::For(l) => {
                let name = &l.iterator.name;
                if self.params.contains_key(name) {
                    self.error(
                        Category::Shadowing,
                        format!("loop variable shadowing: `{name}` shadows a parameter"),
                        l.iterator.span,
                    );
                } else if self.scope.contains(name) {
                    self.error(
                        Category::Shadowing,
                        format!("loop variable shadowing: `{name}` shadows an enclosing loop iterator"),
                        l.iterator.span,
                    );
                }
                if l.step < 1 {
                    let span = l.step_span.unwrap_or(l.span);
                    self.error(Category::InvalidStep, format!("loop step must be positive, found {}", l.step), span);
                }
                let lower = self.expr(&l.lower);
                let upper = self.expr(&l.upper);
                let level = self.scope.len();
                self.scope.push(name.clone());
                let body = self.block(&l.body, arrays, out);
                self.scope.pop();
                Some(CheckedStmt::Loop(CheckedLoop {
                    level,
                    iterator: name.clone(),
                    lower: lower?,
                    upper: upper?,
                    step: l.step,
                    body,
                }))
            }
            Stmt::If(i) => {
                let conditions: Vec<_> = i
                    .conditions
                    .iter()
                    .map(|c| Some(Constraint { lhs: self.expr(&c.lhs)?, op: c.op, rhs: self.expr(&c.rhs)? }))
                    .collect();
                let then_body = self.block(&i.then_body, arrays, out);
                let else_body = self.block(&i.else_body, arrays, out);
                Some(CheckedStmt::If(CheckedIf {
                    conditions: conditions.into_iter().collect::<Option<_>>()?,
                    then_body,
                    else_body,
                }))
            }
            Stmt::Access(a) => self.access(a, arrays, out),
        }
    }

    fn access(&mut self, a: &ast::Access, arrays: &[ArrayInfo], out: &mut Vec<AccessInfo>) -> Option<CheckedStmt> {
        let subscripts: Vec<_> = a.subscripts.iter().map(|e| self.expr(e)).collect();
        let Some(&array) = self.arrays.get(&a.array.name) else {
            self.error(Category::UnknownArray, format!("unknown array `{}`", a.array.name), a.array.span);
            return None;
        };
        let rank = arrays[array].rank();
        if rank != a.subscripts.len() {
            self.error(
                Category::RankMismatch,
                format!("rank mismatch: expected {rank} subscripts, found {}", a.subscripts.len()),
                a.span,
            );
            return None;
        }
        let subscripts = subscripts.into_iter().collect::<Option<Vec<_>>>()?;
        let id = StmtId(out.len());
        let label = Stmt::Access(a.clone()).to_string().trim_end().trim_end_matches(';').to_string();
        out.push(AccessInfo { id, kind: a.kind, array, subscripts, depth: self.scope.len(), span: a.span, label });
        Some(CheckedStmt::Access(id))
    }

    fn resolve(&self, name: &str) -> Option<Var> {
        if let Some(level) = self.scope.iter().rposition(|s| s == name) {
            return Some(Var::Iter(level));
        }
        self.params.get(name).map(|&i| Var::Param(i))
    }

    /// Lowers an expression, or records diagnostics and returns `None`.
    fn expr(&mut self, e: &Expr) -> Option<AffineExpr> {
        match &e.kind {
            ExprKind::Const(c) => Some(AffineExpr::Const(*c)),
            ExprKind::Var(name) => match self.resolve(name) {
                Some(v) => Some(AffineExpr::Var(v)),
                None => {
                    let what =
                        if self.arrays.contains_key(name) { "array used as a scalar" } else { "unknown variable" };
                    self.error(Category::UnknownVariable, format!("{what} `{name}`"), e.span);
                    None
                }
            },
            ExprKind::Neg(a) => Some(AffineExpr::Neg(Box::new(self.expr(a)?))),
            ExprKind::Add(a, b) => {
                let (a, b) = (self.expr(a), self.expr(b));
                Some(AffineExpr::add(a?, b?))
            }
            ExprKind::Sub(a, b) => {
                let (a, b) = (self.expr(a), self.expr(b));
                Some(AffineExpr::sub(a?, b?))
            }
            ExprKind::Mul(a, b) => {
                let (a, b) = (self.expr(a), self.expr(b));
                let (a, b) = (a?, b?);
                match (a.constant(), b.constant()) {
                    (Some(c), _) => Some(AffineExpr::scale(c, b)),
                    (None, Some(c)) => Some(AffineExpr::scale(c, a)),
                    (None, None) => {
                        self.error(Category::NonAffine, "non-affine: product of two variables".into(), e.span);
                        None
                    }
                }
            }
            ExprKind::Div(a, b) => {
                let (num, den) = (self.expr(a), self.expr(b));
                let (num, den) = (num?, den?);
                match den.constant() {
                    Some(d) if d > 0 => Some(AffineExpr::FloorDiv(Box::new(num), d)),
                    Some(d) => {
                        self.error(
                            Category::InvalidDivisor,
                            format!("divisor must be a positive constant, found {d}"),
                            b.span,
                        );
                        None
                    }
                    None => {
                        self.error(Category::NonAffine, "non-affine: division by a variable".into(), e.span);
                        None
                    }
                }
            }
        }
    }
}
