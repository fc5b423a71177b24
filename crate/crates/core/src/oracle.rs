//! Ground truth for tests: a direct interpreter of the checked program and
//! a Mattson LRU stack simulator.

use std::collections::VecDeque;

use smallvec::SmallVec;

use crate::affine::Var;
use crate::polyhedral::{DataPoint, ParamBinding};
use crate::semantics::{CheckedStmt, StmtId, ValidatedProgram};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub stmt: StmtId,
    /// Iterator values of the enclosing loops, outermost first.
    pub iters: Vec<i64>,
    pub element: DataPoint,
}

/// Runs the program by plain recursion over loops and blocks.
pub fn reference_trace(
    program: &ValidatedProgram,
    binding: &ParamBinding,
    block_size: i64,
    num_sets: i64,
) -> Vec<TraceEntry> {
    let mut out = Vec::new();
    let mut iters = Vec::new();
    run(program, &program.body, binding, &mut iters, block_size, num_sets, &mut out);
    out
}

fn run(
    program: &ValidatedProgram,
    stmts: &[CheckedStmt],
    binding: &ParamBinding,
    iters: &mut Vec<i64>,
    block_size: i64,
    num_sets: i64,
    out: &mut Vec<TraceEntry>,
) {
    for stmt in stmts {
        let env = |v: Var| match v {
            Var::Param(p) => binding.0[p],
            Var::Iter(l) => iters[l],
            Var::Ordinal(_) => unreachable!(),
        };
        match stmt {
            CheckedStmt::Loop(l) => {
                let (lo, hi) = (l.lower.eval(&env), l.upper.eval(&env));
                let mut i = lo;
                while i < hi {
                    iters.push(i);
                    run(program, &l.body, binding, iters, block_size, num_sets, out);
                    iters.pop();
                    i += l.step;
                }
            }
            CheckedStmt::If(c) => {
                let taken = c.conditions.iter().all(|c| c.holds(&env));
                let body = if taken { &c.then_body } else { &c.else_body };
                run(program, body, binding, iters, block_size, num_sets, out);
            }
            CheckedStmt::Access(id) => {
                let a = program.access(*id);
                let mut subscripts: SmallVec<[i64; 4]> = a.subscripts.iter().map(|s| s.eval(&env)).collect();
                subscripts.resize(program.max_rank(), 0);
                let element = DataPoint { array: a.array as u32, subscripts, block: None, set: None }.transform(
                    a.subscripts.len(),
                    block_size,
                    num_sets,
                );
                out.push(TraceEntry { stmt: *id, iters: iters.clone(), element });
            }
        }
    }
}

/// LRU stack depth (1-based) of each access, `None` on first touch.
pub fn stack_distances<T: PartialEq + Clone>(trace: &[T]) -> Vec<Option<u64>> {
    let mut stack: Vec<T> = Vec::new();
    trace
        .iter()
        .map(|x| {
            // Most recent at the end.
            let found = stack.iter().rposition(|y| y == x);
            match found {
                Some(pos) => {
                    let depth = (stack.len() - pos) as u64;
                    let item = stack.remove(pos);
                    stack.push(item);
                    Some(depth)
                }
                None => {
                    stack.push(x.clone());
                    None
                }
            }
        })
        .collect()
}

/// Hits of a fully associative LRU cache holding `capacity` elements.
pub fn lru_hits<T: PartialEq + Clone>(trace: &[T], capacity: usize) -> u64 {
    let mut cache: VecDeque<T> = VecDeque::with_capacity(capacity + 1);
    let mut hits = 0;
    for x in trace {
        if let Some(pos) = cache.iter().position(|y| y == x) {
            hits += 1;
            let item = cache.remove(pos).expect("position is in range");
            cache.push_front(item);
        } else {
            cache.push_front(x.clone());
            if cache.len() > capacity {
                cache.pop_back();
            }
        }
    }
    hits
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stack_distance_examples() {
        assert_eq!(stack_distances(&["x"]), vec![None]);
        assert_eq!(stack_distances(&["x", "x"]), vec![None, Some(1)]);
        assert_eq!(stack_distances(&["x", "y", "x"]), vec![None, None, Some(2)]);
    }

    #[test]
    fn lru_cache_of_one_hits_only_repeats() {
        assert_eq!(lru_hits(&[1, 1, 2, 1, 1], 1), 2);
        assert_eq!(lru_hits(&[1, 2, 1, 2], 2), 2);
        assert_eq!(lru_hits(&[1, 2, 3, 1], 2), 0);
        assert_eq!(lru_hits(&[1], 0), 0);
    }
}
