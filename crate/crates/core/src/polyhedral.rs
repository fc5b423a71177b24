//! Timestamp spaces and access maps.
//!
//! Every loop becomes an ordinal dimension `o` with iterator value
//! `o * step + lower`, so each dimension runs from 0 to its trip count.
//! Blocks holding two or more statements get a selector dimension whose
//! value is the statement's position. Lexicographic order on the padded
//! points is execution order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use smallvec::SmallVec;
use thiserror::Error;

use crate::affine::{ceil_div, AffineExpr, Constraint, Var};
use crate::semantics::{CheckedStmt, StmtId, ValidatedProgram};

pub type Coords = SmallVec<[i64; 8]>;

/// Default cap on enumerated points.
pub const DEFAULT_MAX_POINTS: u64 = 10_000_000;
/// Environment variable overriding [`DEFAULT_MAX_POINTS`].
pub const MAX_POINTS_ENV: &str = "LOOPDMD_MAX_POINTS";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResourceError {
    #[error("enumeration exceeds the cap of {cap} timestamp points")]
    TooManyPoints { cap: u64 },
    #[error("analysis cancelled")]
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BindingError {
    #[error("unknown parameter `{0}`")]
    Unknown(String),
    #[error("missing value for parameter `{0}`")]
    Missing(String),
    #[error("parameter `{0}` must be non-negative, found {1}")]
    Negative(String, i64),
    #[error("parameter `{0}` bound twice")]
    Duplicate(String),
}

/// Resource limits shared by every enumeration of one analysis.
#[derive(Debug, Clone)]
pub struct Limits {
    pub max_points: u64,
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Default for Limits {
    fn default() -> Self {
        let max_points =
            std::env::var(MAX_POINTS_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_MAX_POINTS);
        Limits { max_points, cancel: None }
    }
}

impl Limits {
    pub fn with_max_points(max_points: u64) -> Self {
        Limits { max_points, cancel: None }
    }

    pub fn cancelled(&self) -> bool {
        self.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed))
    }
}

/// Parameter values, indexed like the program's parameter list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamBinding(pub Vec<i64>);

impl ParamBinding {
    pub fn from_pairs<S: AsRef<str>>(program: &ValidatedProgram, pairs: &[(S, i64)]) -> Result<Self, BindingError> {
        let mut values = vec![None; program.params.len()];
        for (name, value) in pairs {
            let name = name.as_ref();
            let idx = program.param_index(name).ok_or_else(|| BindingError::Unknown(name.to_string()))?;
            if *value < 0 {
                return Err(BindingError::Negative(name.to_string(), *value));
            }
            if values[idx].replace(*value).is_some() {
                return Err(BindingError::Duplicate(name.to_string()));
            }
        }
        values
            .into_iter()
            .zip(&program.params)
            .map(|(v, name)| v.ok_or_else(|| BindingError::Missing(name.clone())))
            .collect::<Result<_, _>>()
            .map(ParamBinding)
    }

    pub fn uniform(program: &ValidatedProgram, value: i64) -> Self {
        ParamBinding(vec![value; program.params.len()])
    }

    pub fn get(&self, idx: usize) -> i64 {
        self.0[idx]
    }

    pub fn to_map(&self, program: &ValidatedProgram) -> BTreeMap<String, i64> {
        program.params.iter().cloned().zip(self.0.iter().copied()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct LoopNode {
    pub dim: usize,
    pub iterator: String,
    /// Bounds over ordinals of enclosing loops and parameters.
    pub lower: AffineExpr,
    pub upper: AffineExpr,
    pub step: i64,
    pub body: Box<SpaceNode>,
}

impl LoopNode {
    pub fn trip_count<F: Fn(Var) -> i64>(&self, env: &F) -> i64 {
        ceil_div(self.upper.eval(env) - self.lower.eval(env), self.step).max(0)
    }
}

#[derive(Debug, Clone)]
pub struct SequenceNode {
    pub dim: usize,
    pub children: Vec<SpaceNode>,
}

/// Mutually exclusive guarded alternatives. Several alternatives may share
/// one body (the else-branch of a conjunction splits into several guards).
#[derive(Debug, Clone)]
pub struct BranchNode {
    pub alternatives: Vec<(Vec<Constraint>, usize)>,
    pub bodies: Vec<SpaceNode>,
}

#[derive(Debug, Clone)]
pub enum SpaceNode {
    Loop(LoopNode),
    Sequence(SequenceNode),
    Branch(BranchNode),
    Statement(StmtId),
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimKind {
    Loop,
    Selector,
}

#[derive(Debug, Clone)]
pub struct TimestampSpace {
    pub ndims: usize,
    pub root: SpaceNode,
    pub params: Vec<String>,
    /// Kind of each dimension per statement path, indexed by statement.
    pub stmt_dims: Vec<Vec<(usize, DimKind)>>,
}

struct Lowering<'p> {
    program: &'p ValidatedProgram,
    ndims: usize,
    /// Iterator value per enclosing loop level, in ordinal form.
    iters: Vec<AffineExpr>,
    dims: Vec<(usize, DimKind)>,
    stmt_dims: Vec<Vec<(usize, DimKind)>>,
    subscripts: Vec<Vec<AffineExpr>>,
}

impl Lowering<'_> {
    fn ordinal_form(&self, e: &AffineExpr) -> AffineExpr {
        e.substitute(&|v| match v {
            Var::Iter(level) => self.iters[level].clone(),
            other => AffineExpr::Var(other),
        })
    }

    fn block(&mut self, stmts: &[CheckedStmt], dim: usize) -> SpaceNode {
        match stmts {
            [] => SpaceNode::Empty,
            [single] => self.stmt(single, dim),
            many => {
                self.ndims = self.ndims.max(dim + 1);
                self.dims.push((dim, DimKind::Selector));
                let children = many.iter().map(|s| self.stmt(s, dim + 1)).collect();
                self.dims.pop();
                SpaceNode::Sequence(SequenceNode { dim, children })
            }
        }
    }

    fn stmt(&mut self, stmt: &CheckedStmt, dim: usize) -> SpaceNode {
        match stmt {
            CheckedStmt::Access(id) => {
                self.ndims = self.ndims.max(dim);
                self.stmt_dims[id.0] = self.dims.clone();
                let subs = self.program.access(*id).subscripts.iter().map(|s| self.ordinal_form(s)).collect();
                self.subscripts[id.0] = subs;
                SpaceNode::Statement(*id)
            }
            CheckedStmt::Loop(l) => {
                let lower = self.ordinal_form(&l.lower);
                let upper = self.ordinal_form(&l.upper);
                let value =
                    AffineExpr::add(AffineExpr::scale(l.step, AffineExpr::var(Var::Ordinal(dim))), lower.clone());
                self.iters.push(value);
                self.dims.push((dim, DimKind::Loop));
                self.ndims = self.ndims.max(dim + 1);
                let body = self.block(&l.body, dim + 1);
                self.dims.pop();
                self.iters.pop();
                if matches!(body, SpaceNode::Empty) {
                    return SpaceNode::Empty;
                }
                SpaceNode::Loop(LoopNode {
                    dim,
                    iterator: l.iterator.clone(),
                    lower,
                    upper,
                    step: l.step,
                    body: Box::new(body),
                })
            }
            CheckedStmt::If(i) => {
                let conds: Vec<_> = i.conditions.iter().map(|c| c.substitute(&|v| self.subst_var(v))).collect();
                let then_body = self.block(&i.then_body, dim);
                let else_body = self.block(&i.else_body, dim);
                let mut alternatives = vec![(conds.clone(), 0)];
                for k in 0..conds.len() {
                    for neg in conds[k].negated() {
                        let mut guard = conds[..k].to_vec();
                        guard.push(neg);
                        alternatives.push((guard, 1));
                    }
                }
                SpaceNode::Branch(BranchNode { alternatives, bodies: vec![then_body, else_body] })
            }
        }
    }

    fn subst_var(&self, v: Var) -> AffineExpr {
        match v {
            Var::Iter(level) => self.iters[level].clone(),
            other => AffineExpr::Var(other),
        }
    }
}

/// Access function of one statement.
#[derive(Debug, Clone)]
pub struct StmtMap {
    pub array: usize,
    pub rank: usize,
    /// Subscripts over ordinals and parameters.
    pub subscripts: Vec<AffineExpr>,
}

#[derive(Debug, Clone)]
pub struct AccessMap {
    pub max_rank: usize,
    pub block_size: i64,
    pub num_sets: i64,
    pub stmts: Vec<StmtMap>,
}

/// A data-space element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataPoint {
    pub array: u32,
    /// Tail-padded to the maximum rank.
    pub subscripts: SmallVec<[i64; 4]>,
    pub block: Option<i64>,
    pub set: Option<i64>,
}

impl DataPoint {
    /// Applies blocking and set tagging to the last declared subscript.
    pub fn transform(mut self, rank: usize, block_size: i64, num_sets: i64) -> DataPoint {
        if rank == 0 || (block_size <= 1 && num_sets <= 1) {
            return self;
        }
        let last = self.subscripts[rank - 1];
        let line = last.div_euclid(block_size.max(1));
        if block_size > 1 {
            self.subscripts[rank - 1] = 0;
            self.block = Some(line);
        }
        if num_sets > 1 {
            self.set = Some(line.rem_euclid(num_sets));
        }
        self
    }
}

impl std::fmt::Display for DataPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}", self.array)?;
        for s in &self.subscripts {
            write!(f, ", {s}")?;
        }
        if let Some(b) = self.block {
            write!(f, ", b={b}")?;
        }
        if let Some(s) = self.set {
            write!(f, ", s={s}")?;
        }
        f.write_str(")")
    }
}

pub fn build_timestamp_space(program: &ValidatedProgram) -> TimestampSpace {
    lower(program).0
}

pub fn build_access_map(program: &ValidatedProgram, block_size: i64, num_sets: i64) -> AccessMap {
    let (_, subscripts) = lower(program);
    let stmts = program
        .accesses
        .iter()
        .zip(subscripts)
        .map(|(a, subscripts)| StmtMap { array: a.array, rank: a.subscripts.len(), subscripts })
        .collect();
    AccessMap { max_rank: program.max_rank(), block_size: block_size.max(1), num_sets: num_sets.max(1), stmts }
}

fn lower(program: &ValidatedProgram) -> (TimestampSpace, Vec<Vec<AffineExpr>>) {
    let n = program.accesses.len();
    let mut cx = Lowering {
        program,
        ndims: 0,
        iters: Vec::new(),
        dims: Vec::new(),
        stmt_dims: vec![Vec::new(); n],
        subscripts: vec![Vec::new(); n],
    };
    let root = cx.block(&program.body, 0);
    let space = TimestampSpace { ndims: cx.ndims, root, params: program.params.clone(), stmt_dims: cx.stmt_dims };
    (space, cx.subscripts)
}

impl AccessMap {
    pub fn evaluate_stmt(&self, stmt: StmtId, coords: &[i64], binding: &ParamBinding) -> DataPoint {
        let m = &self.stmts[stmt.0];
        let env = env_of(coords, binding);
        let mut subscripts: SmallVec<[i64; 4]> = m.subscripts.iter().map(|s| s.eval(&env)).collect();
        subscripts.resize(self.max_rank, 0);
        DataPoint { array: m.array as u32, subscripts, block: None, set: None }.transform(
            m.rank,
            self.block_size,
            self.num_sets,
        )
    }
}

pub fn env_of<'a>(coords: &'a [i64], binding: &'a ParamBinding) -> impl Fn(Var) -> i64 + 'a {
    move |v| match v {
        Var::Param(i) => binding.0[i],
        Var::Ordinal(d) => coords[d],
        Var::Iter(_) => unreachable!("iterators are rewritten to ordinals during lowering"),
    }
}

/// The statement executed at `point`, if the point lies in the space.
pub fn locate(space: &TimestampSpace, point: &[i64], binding: &ParamBinding) -> Option<StmtId> {
    let env = env_of(point, binding);
    let mut node = &space.root;
    loop {
        match node {
            SpaceNode::Statement(id) => return Some(*id),
            SpaceNode::Empty => return None,
            SpaceNode::Loop(l) => {
                let o = *point.get(l.dim)?;
                if o < 0 || o >= l.trip_count(&env) {
                    return None;
                }
                node = &l.body;
            }
            SpaceNode::Sequence(s) => node = s.children.get(usize::try_from(*point.get(s.dim)?).ok()?)?,
            SpaceNode::Branch(b) => {
                let (_, body) = b.alternatives.iter().find(|(g, _)| g.iter().all(|c| c.holds(&env)))?;
                node = &b.bodies[*body];
            }
        }
    }
}

/// Iterator values of the loops enclosing `point`, outermost first.
pub fn iterator_values(space: &TimestampSpace, point: &[i64], binding: &ParamBinding) -> Vec<i64> {
    let env = env_of(point, binding);
    let mut out = Vec::new();
    let mut node = &space.root;
    loop {
        match node {
            SpaceNode::Loop(l) => {
                out.push(l.lower.eval(&env) + point[l.dim] * l.step);
                node = &l.body;
            }
            SpaceNode::Sequence(s) => match s.children.get(point[s.dim] as usize) {
                Some(c) => node = c,
                None => return out,
            },
            SpaceNode::Branch(b) => match b.alternatives.iter().find(|(g, _)| g.iter().all(|c| c.holds(&env))) {
                Some((_, body)) => node = &b.bodies[*body],
                None => return out,
            },
            SpaceNode::Statement(_) | SpaceNode::Empty => return out,
        }
    }
}

pub fn evaluate_access(
    space: &TimestampSpace,
    map: &AccessMap,
    point: &[i64],
    binding: &ParamBinding,
) -> Option<DataPoint> {
    locate(space, point, binding).map(|stmt| map.evaluate_stmt(stmt, point, binding))
}

// ---------------------------------------------------------------------------
// Enumeration

enum Frame<'s> {
    Loop { node: &'s LoopNode, o: i64, trip: i64 },
    Seq { node: &'s SequenceNode, idx: usize },
}

/// Lazy lexicographic enumeration of the points of a timestamp space.
pub struct Enumerator<'s> {
    binding: ParamBinding,
    stack: Vec<Frame<'s>>,
    coords: Coords,
    /// Trip count per dimension along the current path (0 elsewhere).
    trips: Coords,
    enter: Option<&'s SpaceNode>,
    limits: Limits,
    yielded: u64,
    steps: u64,
    failed: bool,
}

/// One enumerated point.
pub struct Visit<'e> {
    pub stmt: StmtId,
    pub coords: &'e [i64],
    /// Trip counts of the loop dimensions enclosing the statement.
    pub trips: &'e [i64],
}

pub fn enumerate<'s>(space: &'s TimestampSpace, binding: &ParamBinding, limits: &Limits) -> Enumerator<'s> {
    Enumerator {
        binding: binding.clone(),
        stack: Vec::new(),
        coords: SmallVec::from_elem(0, space.ndims),
        trips: SmallVec::from_elem(0, space.ndims),
        enter: Some(&space.root),
        limits: limits.clone(),
        yielded: 0,
        steps: 0,
        failed: false,
    }
}

impl<'s> Enumerator<'s> {
    /// Advances to the next point without allocating.
    pub fn next_visit(&mut self) -> Option<Result<Visit<'_>, ResourceError>> {
        if self.failed {
            return None;
        }
        loop {
            self.steps += 1;
            if self.steps & 0xfff == 0 && self.limits.cancelled() {
                self.failed = true;
                return Some(Err(ResourceError::Cancelled));
            }
            if let Some(node) = self.enter.take() {
                match node {
                    SpaceNode::Statement(id) => {
                        self.yielded += 1;
                        if self.yielded > self.limits.max_points {
                            self.failed = true;
                            return Some(Err(ResourceError::TooManyPoints { cap: self.limits.max_points }));
                        }
                        return Some(Ok(Visit { stmt: *id, coords: &self.coords, trips: &self.trips }));
                    }
                    SpaceNode::Empty => {}
                    SpaceNode::Loop(l) => {
                        let trip = l.trip_count(&env_of(&self.coords, &self.binding));
                        if trip > 0 {
                            self.coords[l.dim] = 0;
                            self.trips[l.dim] = trip;
                            self.stack.push(Frame::Loop { node: l, o: 0, trip });
                            self.enter = Some(&l.body);
                        }
                    }
                    SpaceNode::Sequence(s) => {
                        if !s.children.is_empty() {
                            self.coords[s.dim] = 0;
                            self.stack.push(Frame::Seq { node: s, idx: 0 });
                            self.enter = Some(&s.children[0]);
                        }
                    }
                    SpaceNode::Branch(b) => {
                        let env = env_of(&self.coords, &self.binding);
                        if let Some((_, body)) = b.alternatives.iter().find(|(g, _)| g.iter().all(|c| c.holds(&env))) {
                            self.enter = Some(&b.bodies[*body]);
                        }
                    }
                }
                if self.enter.is_some() {
                    continue;
                }
            }
            match self.stack.last_mut()? {
                Frame::Loop { node, o, trip } => {
                    *o += 1;
                    if *o < *trip {
                        self.coords[node.dim] = *o;
                        self.enter = Some(&node.body);
                    } else {
                        self.coords[node.dim] = 0;
                        self.trips[node.dim] = 0;
                        self.stack.pop();
                    }
                }
                Frame::Seq { node, idx } => {
                    *idx += 1;
                    if *idx < node.children.len() {
                        self.coords[node.dim] = *idx as i64;
                        self.enter = Some(&node.children[*idx]);
                    } else {
                        self.coords[node.dim] = 0;
                        self.stack.pop();
                    }
                }
            }
        }
    }

    pub fn binding(&self) -> &ParamBinding {
        &self.binding
    }
}

impl Iterator for Enumerator<'_> {
    type Item = Result<(StmtId, Coords), ResourceError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_visit().map(|r| r.map(|v| (v.stmt, SmallVec::from_slice(v.coords))))
    }
}

// ---------------------------------------------------------------------------
// Debug dump

fn dim_names(space: &TimestampSpace) -> Vec<String> {
    let mut names: Vec<String> = (0..space.ndims).map(|d| format!("t{d}")).collect();
    fn walk(node: &SpaceNode, names: &mut Vec<String>) {
        match node {
            SpaceNode::Loop(l) => {
                names[l.dim] = l.iterator.clone();
                walk(&l.body, names);
            }
            SpaceNode::Sequence(s) => s.children.iter().for_each(|c| walk(c, names)),
            SpaceNode::Branch(b) => b.bodies.iter().for_each(|c| walk(c, names)),
            SpaceNode::Statement(_) | SpaceNode::Empty => {}
        }
    }
    walk(&space.root, &mut names);
    names
}

/// Text rendering of the space as constraints and of the map as
/// `path : (ordinals) -> (tuple)` lines. Ordinal dimensions are named
/// after their loop iterator. Rank-deficient arrays are shown padded at
/// the front, e.g. `(1, 0, j)`; internally padding is at the tail.
pub fn dump(program: &ValidatedProgram, space: &TimestampSpace, map: &AccessMap) -> String {
    let names = dim_names(space);
    let render = |v: Var| match v {
        Var::Param(i) => program.params[i].clone(),
        Var::Ordinal(d) => names[d].clone(),
        Var::Iter(l) => format!("i{l}"),
    };
    let mut out = String::new();
    let _ = writeln!(out, "space ({}) dims={}", names.join(", "), space.ndims);
    dump_node(&space.root, &render, program, 1, &mut out);
    let _ = writeln!(out, "map");
    let mut paths = Vec::new();
    collect_paths(&space.root, &mut vec![String::new(); space.ndims], &names, &mut Vec::new(), &render, &mut paths);
    for (stmt, coords, guards) in paths {
        let m = &map.stmts[stmt.0];
        let mut tuple = vec![m.array.to_string()];
        tuple.extend(std::iter::repeat("0".to_string()).take(map.max_rank - m.rank));
        let subs: Vec<String> = m.subscripts.iter().map(|s| s.render(&render)).collect();
        let (last, init) = subs.split_last().map_or((None, &[][..]), |(l, i)| (Some(l.clone()), i));
        tuple.extend(init.iter().cloned());
        if let Some(last) = last {
            if map.block_size > 1 {
                tuple.push(format!("floor(({last}) / {})", map.block_size));
            } else {
                tuple.push(last.clone());
            }
            if map.num_sets > 1 {
                let line = if map.block_size > 1 { format!("floor(({last}) / {})", map.block_size) } else { last };
                tuple.push(format!("({line}) mod {}", map.num_sets));
            }
        }
        let guard = if guards.is_empty() { String::new() } else { format!(" | {}", guards.join(" && ")) };
        let _ = writeln!(
            out,
            "  S{} {} : ({}) -> ({}){guard}",
            stmt.0,
            program.access(stmt).label,
            coords.join(", "),
            tuple.join(", ")
        );
    }
    out
}

fn dump_node<F: Fn(Var) -> String>(
    node: &SpaceNode,
    render: &F,
    program: &ValidatedProgram,
    depth: usize,
    out: &mut String,
) {
    let pad = "  ".repeat(depth);
    match node {
        SpaceNode::Empty => {}
        SpaceNode::Statement(id) => {
            let _ = writeln!(out, "{pad}S{} {}", id.0, program.access(*id).label);
        }
        SpaceNode::Loop(l) => {
            let extent = AffineExpr::sub(l.upper.clone(), l.lower.clone()).render(render);
            let bound = if l.step == 1 { extent } else { format!("ceil(({extent}) / {})", l.step) };
            let _ = writeln!(out, "{pad}0 <= {} < {bound}", render(Var::Ordinal(l.dim)));
            dump_node(&l.body, render, program, depth + 1, out);
        }
        SpaceNode::Sequence(s) => {
            let _ = writeln!(out, "{pad}0 <= {} <= {}", render(Var::Ordinal(s.dim)), s.children.len() - 1);
            for (k, c) in s.children.iter().enumerate() {
                let _ = writeln!(out, "{pad}{} = {k}:", render(Var::Ordinal(s.dim)));
                dump_node(c, render, program, depth + 1, out);
            }
        }
        SpaceNode::Branch(b) => {
            for (guard, body) in &b.alternatives {
                let g: Vec<_> = guard.iter().map(|c| c.render(render)).collect();
                let _ = writeln!(out, "{pad}if {}:", g.join(" && "));
                dump_node(&b.bodies[*body], render, program, depth + 1, out);
            }
        }
    }
}

type PathEntry = (StmtId, Vec<String>, Vec<String>);

fn collect_paths<F: Fn(Var) -> String>(
    node: &SpaceNode,
    coords: &mut Vec<String>,
    names: &[String],
    guards: &mut Vec<String>,
    render: &F,
    out: &mut Vec<PathEntry>,
) {
    match node {
        SpaceNode::Empty => {}
        SpaceNode::Statement(id) => {
            let c = coords.iter().map(|c| if c.is_empty() { "0".to_string() } else { c.clone() }).collect();
            out.push((*id, c, guards.clone()));
        }
        SpaceNode::Loop(l) => {
            coords[l.dim] = names[l.dim].clone();
            collect_paths(&l.body, coords, names, guards, render, out);
            coords[l.dim].clear();
        }
        SpaceNode::Sequence(s) => {
            for (k, c) in s.children.iter().enumerate() {
                coords[s.dim] = k.to_string();
                collect_paths(c, coords, names, guards, render, out);
            }
            coords[s.dim].clear();
        }
        SpaceNode::Branch(b) => {
            for (guard, body) in &b.alternatives {
                let n = guards.len();
                guards.extend(guard.iter().map(|c| c.render(render)));
                collect_paths(&b.bodies[*body], coords, names, guards, render, out);
                guards.truncate(n);
            }
        }
    }
}
