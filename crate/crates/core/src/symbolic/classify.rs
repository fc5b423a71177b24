//! Structural reuse classes at one binding.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::locality::{scan, AccessEvent, ReuseRecord};
use crate::polyhedral::{locate, AccessMap, Coords, Limits, ParamBinding, ResourceError, SpaceNode, TimestampSpace};
use crate::semantics::StmtId;

/// Position of a loop ordinal within its range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Boundary {
    First,
    Interior,
    Last,
    /// The loop runs exactly once.
    Only,
}

impl Boundary {
    pub fn of(o: i64, trip: i64) -> Boundary {
        match (o == 0, o == trip - 1) {
            (true, true) => Boundary::Only,
            (true, false) => Boundary::First,
            (false, true) => Boundary::Last,
            (false, false) => Boundary::Interior,
        }
    }
}

/// The part of a class key that fitted formulas are reported under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassRef {
    pub source: StmtId,
    pub pred: StmtId,
    pub carrier: usize,
}

/// Reuse class before rank splitting: statement pair, carrier dimension and
/// the boundary position of the reusing access in each enclosing loop.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StructKey {
    pub class: ClassRef,
    pub signature: SmallVec<[Boundary; 6]>,
}

/// A class as matched across bindings: structural key plus the position of
/// its rd value among the key's distinct rd values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReuseClass {
    pub key: StructKey,
    pub rank: usize,
    pub residue: Vec<i64>,
}

/// Everything the symbolic engine needs from one binding.
#[derive(Debug, Clone, Default)]
pub struct BindingSample {
    pub binding: Vec<i64>,
    pub n_total: u64,
    pub n_warm: u64,
    /// rd value to count, per structural key.
    pub classes: BTreeMap<StructKey, BTreeMap<u64, u64>>,
}

impl BindingSample {
    /// Per-rank `(rd, count)` of one key, ascending rd.
    pub fn ranks(&self, key: &StructKey) -> Option<Vec<(u64, u64)>> {
        self.classes.get(key).map(|m| m.iter().map(|(&rd, &c)| (rd, c)).collect())
    }
}

fn key_of(stmt: StmtId, coords: &[i64], trips: &[i64], pred_stmt: StmtId, pred: &[i64]) -> StructKey {
    let carrier = coords.iter().zip(pred).position(|(a, b)| a != b).unwrap_or(coords.len());
    let signature = coords.iter().zip(trips).filter(|(_, &t)| t > 0).map(|(&o, &t)| Boundary::of(o, t)).collect();
    StructKey { class: ClassRef { source: stmt, pred: pred_stmt, carrier }, signature }
}

pub fn event_key(e: &AccessEvent<'_>) -> Option<StructKey> {
    e.reuse.map(|r| key_of(e.stmt, e.coords, e.trips, r.pred_stmt, r.pred_coords))
}

/// Runs the concrete analysis at `binding` and groups warm accesses.
pub fn sample_binding(
    space: &TimestampSpace,
    map: &AccessMap,
    binding: &ParamBinding,
    limits: &Limits,
) -> Result<BindingSample, ResourceError> {
    let mut sample = BindingSample { binding: binding.0.clone(), ..Default::default() };
    let total = scan(space, map, binding, limits, |e| {
        if let (Some(key), Some(r)) = (event_key(&e), e.reuse) {
            *sample.classes.entry(key).or_default().entry(r.rd).or_insert(0) += 1;
            sample.n_warm += 1;
        }
    })?;
    sample.n_total = total;
    Ok(sample)
}

/// Trip count of each loop dimension on the path to `point`.
pub fn path_trips(space: &TimestampSpace, point: &[i64], binding: &ParamBinding) -> Coords {
    let env = crate::polyhedral::env_of(point, binding);
    let mut trips = Coords::from_elem(0, space.ndims);
    let mut node = &space.root;
    loop {
        match node {
            SpaceNode::Loop(l) => {
                trips[l.dim] = l.trip_count(&env);
                node = &l.body;
            }
            SpaceNode::Sequence(s) => match s.children.get(point[s.dim] as usize) {
                Some(c) => node = c,
                None => return trips,
            },
            SpaceNode::Branch(b) => match b.alternatives.iter().find(|(g, _)| g.iter().all(|c| c.holds(&env))) {
                Some((_, body)) => node = &b.bodies[*body],
                None => return trips,
            },
            SpaceNode::Statement(_) | SpaceNode::Empty => return trips,
        }
    }
}

/// Assigns each warm record its class and tallies `(rd, count)` per class.
pub fn classify(
    records: &[ReuseRecord],
    space: &TimestampSpace,
    binding: &ParamBinding,
    period: i64,
) -> BTreeMap<ReuseClass, (u64, u64)> {
    let residue: Vec<i64> = binding.0.iter().map(|v| v.rem_euclid(period.max(1))).collect();
    let mut by_key: BTreeMap<StructKey, BTreeMap<u64, u64>> = BTreeMap::new();
    for r in records {
        let (Some(pred), Some(rd)) = (&r.predecessor, r.rd) else { continue };
        let pred_stmt = locate(space, pred, binding).expect("predecessor is a member point");
        let trips = path_trips(space, &r.timestamp, binding);
        let key = key_of(r.stmt, &r.timestamp, &trips, pred_stmt, pred);
        *by_key.entry(key).or_default().entry(rd).or_insert(0) += 1;
    }
    let mut out = BTreeMap::new();
    for (key, ranks) in by_key {
        for (rank, (rd, count)) in ranks.into_iter().enumerate() {
            out.insert(ReuseClass { key: key.clone(), rank, residue: residue.clone() }, (rd, count));
        }
    }
    out
}
