//! Exact reuse analysis at one parameter binding.
//!
//! One forward pass over the enumerated trace. The last access position of
//! every element is marked in a Fenwick tree, so the number of distinct
//! elements touched in the window `(pred, t]` is a prefix-sum difference.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::polyhedral::{
    build_access_map, build_timestamp_space, enumerate, AccessMap, Coords, DataPoint, Limits, ParamBinding,
    ResourceError, TimestampSpace,
};
use crate::semantics::{StmtId, ValidatedProgram};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReuseRecord {
    pub timestamp: Coords,
    pub stmt: StmtId,
    pub element: DataPoint,
    pub predecessor: Option<Coords>,
    /// Accesses in `(pred, t]`.
    pub ri: Option<u64>,
    /// Distinct elements in `(pred, t]`, endpoint included, so at least 1.
    pub rd: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdGroup {
    pub rd: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcreteDistribution {
    pub n_total: u64,
    pub n_warm: u64,
    pub n_cold: u64,
    /// Sorted by ascending `rd`.
    pub groups: Vec<RdGroup>,
    pub dmd: f64,
}

impl ConcreteDistribution {
    pub fn from_counts(n_total: u64, counts: &BTreeMap<u64, u64>) -> Self {
        let groups: Vec<_> = counts.iter().map(|(&rd, &count)| RdGroup { rd, count }).collect();
        let n_warm = groups.iter().map(|g| g.count).sum();
        let mut dist = ConcreteDistribution { n_total, n_warm, n_cold: n_total - n_warm, groups, dmd: 0.0 };
        dist.dmd = dmd_numeric(&dist);
        dist
    }

    /// Hits of a fully associative LRU cache holding `capacity` elements:
    /// an access hits when at most `capacity` distinct elements, itself
    /// included, were touched since its previous use.
    pub fn predicted_hits(&self, capacity: u64) -> u64 {
        self.groups.iter().filter(|g| g.rd <= capacity).map(|g| g.count).sum()
    }
}

/// `n_cold + Σ count * sqrt(rd)`.
pub fn dmd_numeric(dist: &ConcreteDistribution) -> f64 {
    dist.n_cold as f64 + dist.groups.iter().map(|g| g.count as f64 * (g.rd as f64).sqrt()).sum::<f64>()
}

/// Reuse of one warm access.
#[derive(Debug, Clone, Copy)]
pub struct Reuse<'a> {
    pub pred_index: u64,
    pub pred_stmt: StmtId,
    pub pred_coords: &'a [i64],
    pub ri: u64,
    pub rd: u64,
}

/// One access of the trace as seen by [`scan`].
#[derive(Debug, Clone, Copy)]
pub struct AccessEvent<'a> {
    pub index: u64,
    pub stmt: StmtId,
    pub coords: &'a [i64],
    /// Trip count of each loop dimension on the statement's path.
    pub trips: &'a [i64],
    pub element: &'a DataPoint,
    pub reuse: Option<Reuse<'a>>,
}

/// Fenwick tree over trace positions that grows by doubling.
struct Marks {
    tree: Vec<i64>,
    flags: Vec<bool>,
}

impl Marks {
    fn new() -> Self {
        Marks { tree: vec![0; 1025], flags: Vec::new() }
    }

    fn capacity(&self) -> usize {
        self.tree.len() - 1
    }

    fn grow(&mut self) {
        let cap = self.capacity() * 2;
        self.tree = vec![0; cap + 1];
        for (i, &f) in self.flags.iter().enumerate() {
            if f {
                self.tree[i + 1] += 1;
            }
        }
        for i in 1..=cap {
            let parent = i + (i & i.wrapping_neg());
            if parent <= cap {
                self.tree[parent] += self.tree[i];
            }
        }
    }

    fn add(&mut self, pos: usize, delta: i64) {
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    fn set(&mut self, pos: usize, on: bool) {
        while pos >= self.capacity() {
            self.grow();
        }
        if self.flags.len() <= pos {
            self.flags.resize(pos + 1, false);
        }
        if self.flags[pos] != on {
            self.flags[pos] = on;
            self.add(pos, if on { 1 } else { -1 });
        }
    }

    /// Marks in positions `0..=pos`.
    fn prefix(&self, pos: usize) -> i64 {
        let mut i = (pos + 1).min(self.capacity());
        let mut sum = 0;
        while i > 0 {
            sum += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        sum
    }
}

struct Last {
    index: u64,
    stmt: StmtId,
    coords: Coords,
}

/// Streams every access of the trace to `visit`, with its reuse when warm.
/// Returns the number of accesses.
pub fn scan<F>(
    space: &TimestampSpace,
    map: &AccessMap,
    binding: &ParamBinding,
    limits: &Limits,
    mut visit: F,
) -> Result<u64, ResourceError>
where
    F: FnMut(AccessEvent<'_>),
{
    let mut points = enumerate(space, binding, limits);
    let mut last: HashMap<DataPoint, Last> = HashMap::new();
    let mut marks = Marks::new();
    let mut t: u64 = 0;
    while let Some(visit_result) = points.next_visit() {
        let v = visit_result?;
        let element = map.evaluate_stmt(v.stmt, v.coords, binding);
        match last.entry(element) {
            Entry::Occupied(mut slot) => {
                let prev = slot.get_mut();
                let p = prev.index as usize;
                let between = if t as usize > p + 1 { marks.prefix(t as usize - 1) - marks.prefix(p) } else { 0 };
                let rd = between as u64 + 1;
                let old =
                    std::mem::replace(prev, Last { index: t, stmt: v.stmt, coords: Coords::from_slice(v.coords) });
                marks.set(p, false);
                marks.set(t as usize, true);
                visit(AccessEvent {
                    index: t,
                    stmt: v.stmt,
                    coords: v.coords,
                    trips: v.trips,
                    element: slot.key(),
                    reuse: Some(Reuse {
                        pred_index: old.index,
                        pred_stmt: old.stmt,
                        pred_coords: &old.coords,
                        ri: t - old.index,
                        rd,
                    }),
                });
            }
            Entry::Vacant(slot) => {
                marks.set(t as usize, true);
                let key = slot.key().clone();
                slot.insert(Last { index: t, stmt: v.stmt, coords: Coords::from_slice(v.coords) });
                visit(AccessEvent {
                    index: t,
                    stmt: v.stmt,
                    coords: v.coords,
                    trips: v.trips,
                    element: &key,
                    reuse: None,
                });
            }
        }
        t += 1;
    }
    Ok(t)
}

#[derive(Debug, Clone)]
pub struct ConcreteAnalysis {
    pub records: Vec<ReuseRecord>,
    pub distribution: ConcreteDistribution,
}

pub fn analyze_concrete(
    program: &ValidatedProgram,
    binding: &ParamBinding,
    block_size: i64,
    num_sets: i64,
    limits: &Limits,
) -> Result<ConcreteAnalysis, ResourceError> {
    let space = build_timestamp_space(program);
    let map = build_access_map(program, block_size, num_sets);
    let mut records = Vec::new();
    let mut counts = BTreeMap::new();
    let total = scan(&space, &map, binding, limits, |e| {
        if let Some(r) = e.reuse {
            *counts.entry(r.rd).or_insert(0) += 1;
        }
        records.push(ReuseRecord {
            timestamp: Coords::from_slice(e.coords),
            stmt: e.stmt,
            element: e.element.clone(),
            predecessor: e.reuse.map(|r| Coords::from_slice(r.pred_coords)),
            ri: e.reuse.map(|r| r.ri),
            rd: e.reuse.map(|r| r.rd),
        });
    })?;
    Ok(ConcreteAnalysis { records, distribution: ConcreteDistribution::from_counts(total, &counts) })
}

/// Distribution only, without keeping per-access records.
pub fn concrete_distribution(
    program: &ValidatedProgram,
    binding: &ParamBinding,
    block_size: i64,
    num_sets: i64,
    limits: &Limits,
) -> Result<ConcreteDistribution, ResourceError> {
    let space = build_timestamp_space(program);
    let map = build_access_map(program, block_size, num_sets);
    let mut counts = BTreeMap::new();
    let total = scan(&space, &map, binding, limits, |e| {
        if let Some(r) = e.reuse {
            *counts.entry(r.rd).or_insert(0) += 1;
        }
    })?;
    Ok(ConcreteDistribution::from_counts(total, &counts))
}
