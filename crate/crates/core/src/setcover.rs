//! Minimum set cover: a lazy greedy pass that never materializes the
//! incidence matrix, and an exact branch-and-bound over bitsets.

use std::sync::atomic::{AtomicU32, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use rustc_hash::FxHashMap;

/// Incidence structure of a set-cover instance. Sets are identified by their
/// index; lower indices win ties.
pub trait CoverSystem: Sync {
    fn universe_len(&self) -> usize;
    fn num_sets(&self) -> usize;
    /// Universe elements covered by `set`.
    fn members(&self, set: usize, out: &mut Vec<u32>);
    /// Sets covering universe element `elem`.
    fn containing(&self, elem: usize, out: &mut Vec<u32>);
}

/// Explicit instance, mostly for tests and small problems.
#[derive(Clone, Debug)]
pub struct ExplicitSystem {
    universe: usize,
    sets: Vec<Vec<u32>>,
    incidence: Vec<Vec<u32>>,
}

impl ExplicitSystem {
    pub fn new(universe: usize, sets: Vec<Vec<u32>>) -> Self {
        let mut incidence = vec![Vec::new(); universe];
        for (i, s) in sets.iter().enumerate() {
            for &u in s {
                incidence[u as usize].push(i as u32);
            }
        }
        for l in &mut incidence {
            l.dedup();
        }
        ExplicitSystem {
            universe,
            sets,
            incidence,
        }
    }
}

impl CoverSystem for ExplicitSystem {
    fn universe_len(&self) -> usize {
        self.universe
    }
    fn num_sets(&self) -> usize {
        self.sets.len()
    }
    fn members(&self, set: usize, out: &mut Vec<u32>) {
        out.clear();
        out.extend_from_slice(&self.sets[set]);
    }
    fn containing(&self, elem: usize, out: &mut Vec<u32>) {
        out.clear();
        out.extend_from_slice(&self.incidence[elem]);
    }
}

/// Greedy cover: repeatedly take the set covering the most uncovered
/// elements, lowest index on ties. Returns `None` if some element is in no set.
pub fn greedy<S: CoverSystem + ?Sized>(sys: &S) -> Option<Vec<usize>> {
    let n = sys.universe_len();
    let counts: Vec<AtomicU32> = (0..sys.num_sets()).map(|_| AtomicU32::new(0)).collect();
    let orphan = (0..n).into_par_iter().any(|u| {
        let mut buf = Vec::new();
        sys.containing(u, &mut buf);
        for &s in &buf {
            counts[s as usize].fetch_add(1, Ordering::Relaxed);
        }
        buf.is_empty()
    });
    if orphan {
        return None;
    }
    let mut counts: Vec<u32> = counts.into_iter().map(AtomicU32::into_inner).collect();
    let mut covered = vec![false; n];
    let mut remaining = n;
    let mut chosen = Vec::new();
    let mut buf = Vec::new();
    while remaining > 0 {
        let (best, _) = counts
            .iter()
            .enumerate()
            .fold((0usize, 0u32), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc });
        chosen.push(best);
        sys.members(best, &mut buf);
        let fresh: Vec<u32> = buf.iter().copied().filter(|&u| !covered[u as usize]).collect();
        for &u in &fresh {
            covered[u as usize] = true;
        }
        remaining -= fresh.len();
        let deltas: Vec<Vec<u32>> = fresh
            .par_iter()
            .map(|&u| {
                let mut b = Vec::new();
                sys.containing(u as usize, &mut b);
                b
            })
            .collect();
        for d in deltas {
            for s in d {
                counts[s as usize] -= 1;
            }
        }
    }
    Some(chosen)
}

#[derive(Clone, Copy, Debug)]
pub struct ExactLimits {
    pub max_nodes: u64,
    pub deadline: Option<Instant>,
    /// Upper bound on `universe * sets` bits materialized as bitsets.
    pub max_matrix_bits: usize,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits {
            max_nodes: 2_000_000,
            deadline: None,
            max_matrix_bits: 1 << 31,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactOutcome {
    /// Best cover found (indices into the original set list, ascending).
    pub best: Vec<usize>,
    /// True iff `best` is certified minimum.
    pub optimal: bool,
    /// A certified lower bound on the optimum.
    pub lower_bound: usize,
    pub nodes: u64,
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn zeros(words: usize) -> Self {
        Bits(vec![0; words])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
    fn and_count(&self, other: &Bits) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }
    fn and_not(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & !b).collect())
    }
    fn and_not_assign(&mut self, other: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a &= !b;
        }
    }
    fn subset_of(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }
    fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + t)
            })
        })
    }
}

struct Search {
    sets: Vec<Bits>,
    orig: Vec<usize>,
    incidence: Vec<Vec<u32>>,
    /// Union of all sets through an element; `None` when too large to keep.
    neighbourhood: Option<Vec<Bits>>,
    elem_order: Vec<usize>,
    max_size: usize,
    best: Vec<usize>,
    nodes: u64,
    aborted: bool,
    timed_out: bool,
    limits: ExactLimits,
    memo: FxHashMap<Vec<u64>, usize>,
    memo_cap: usize,
}

impl Search {
    fn lower_bound(&self, uncovered: &Bits) -> usize {
        let cnt = uncovered.count();
        if cnt == 0 {
            return 0;
        }
        let counting = cnt.div_ceil(self.max_size.max(1));
        let packing = match &self.neighbourhood {
            Some(nb) => {
                // elements whose covering sets are pairwise disjoint each need their own set
                let mut avail = uncovered.clone();
                let mut lb = 0;
                for &u in &self.elem_order {
                    if avail.get(u) {
                        lb += 1;
                        avail.and_not_assign(&nb[u]);
                    }
                }
                lb
            }
            None => 0,
        };
        counting.max(packing)
    }

    fn dfs(&mut self, uncovered: Bits, chosen: &mut Vec<usize>) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.limits.max_nodes {
            self.aborted = true;
            return;
        }
        if self.nodes % 1024 == 0 && self.limits.deadline.is_some_and(|d| Instant::now() > d) {
            self.aborted = true;
            self.timed_out = true;
            return;
        }
        let Some(pivot) = self.pick_pivot(&uncovered) else {
            if chosen.len() < self.best.len() {
                self.best = chosen.iter().map(|&s| self.orig[s]).collect();
            }
            return;
        };
        if chosen.len() + self.lower_bound(&uncovered) >= self.best.len() {
            return;
        }
        if self.memo_cap > 0 {
            match self.memo.get(&uncovered.0) {
                Some(&d) if d <= chosen.len() => return,
                _ => {
                    if self.memo.len() < self.memo_cap {
                        self.memo.insert(uncovered.0.clone(), chosen.len());
                    }
                }
            }
        }
        let mut options: Vec<(usize, u32)> = self.incidence[pivot]
            .iter()
            .map(|&s| (self.sets[s as usize].and_count(&uncovered), s))
            .collect();
        options.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, s) in options {
            let next = uncovered.and_not(&self.sets[s as usize]);
            chosen.push(s as usize);
            self.dfs(next, chosen);
            chosen.pop();
            if self.aborted || chosen.len() + 1 >= self.best.len() {
                return;
            }
        }
    }

    /// Uncovered element in the fewest sets.
    fn pick_pivot(&self, uncovered: &Bits) -> Option<usize> {
        uncovered.ones().min_by_key(|&u| (self.incidence[u].len(), u))
    }
}

/// Exact minimum cover by branch and bound, seeded with `upper` (a valid
/// cover, typically the greedy one).
pub fn exact<S: CoverSystem + ?Sized>(sys: &S, upper: Vec<usize>, limits: ExactLimits) -> ExactOutcome {
    let n = sys.universe_len();
    let words = n.div_ceil(64).max(1);
    let mut upper = upper;
    upper.sort_unstable();
    if n == 0 {
        return ExactOutcome {
            best: Vec::new(),
            optimal: true,
            lower_bound: 0,
            nodes: 0,
        };
    }
    if n.saturating_mul(sys.num_sets()) > limits.max_matrix_bits {
        return ExactOutcome {
            lower_bound: 1,
            best: upper,
            optimal: false,
            nodes: 0,
        };
    }

    // materialize, dropping duplicate sets (lowest index kept)
    let mut buf = Vec::new();
    let mut seen: FxHashMap<Vec<u64>, usize> = FxHashMap::default();
    let mut sets = Vec::new();
    let mut orig = Vec::new();
    for s in 0..sys.num_sets() {
        sys.members(s, &mut buf);
        if buf.is_empty() {
            continue;
        }
        let mut b = Bits::zeros(words);
        for &u in &buf {
            b.set(u as usize);
        }
        if seen.contains_key(&b.0) {
            continue;
        }
        seen.insert(b.0.clone(), s);
        sets.push(b);
        orig.push(s);
    }
    drop(seen);

    let build_incidence = |sets: &[Bits]| {
        let mut inc = vec![Vec::new(); n];
        for (i, s) in sets.iter().enumerate() {
            for u in s.ones() {
                inc[u].push(i as u32);
            }
        }
        inc
    };

    // dominance: a set contained in another set is never needed
    let incidence = build_incidence(&sets);
    let dominated: Vec<bool> = (0..sets.len())
        .into_par_iter()
        .map(|i| {
            let rare = sets[i].ones().min_by_key(|&u| incidence[u].len()).expect("nonempty");
            incidence[rare]
                .iter()
                .any(|&j| j as usize != i && sets[i].subset_of(&sets[j as usize]))
        })
        .collect();
    let (sets, orig): (Vec<Bits>, Vec<usize>) = sets
        .into_iter()
        .zip(orig)
        .zip(&dominated)
        .filter(|(_, &d)| !d)
        .map(|(p, _)| p)
        .unzip();
    let incidence = build_incidence(&sets);
    if incidence.iter().any(Vec::is_empty) {
        // infeasible universe; cannot happen when `upper` is a cover
        return ExactOutcome {
            best: upper,
            optimal: false,
            lower_bound: usize::MAX,
            nodes: 0,
        };
    }

    let neighbourhood = if n * words <= 1 << 24 {
        Some(
            incidence
                .par_iter()
                .map(|list| {
                    let mut b = Bits::zeros(words);
                    for &s in list {
                        for (w, x) in b.0.iter_mut().zip(&sets[s as usize].0) {
                            *w |= x;
                        }
                    }
                    b
                })
                .collect(),
        )
    } else {
        None
    };
    let mut elem_order: Vec<usize> = (0..n).collect();
    elem_order.sort_by_key(|&u| (incidence[u].len(), u));
    let max_size = sets.iter().map(Bits::count).max().unwrap_or(1);

    let mut search = Search {
        sets,
        orig,
        incidence,
        neighbourhood,
        elem_order,
        max_size,
        best: upper.clone(),
        nodes: 0,
        aborted: false,
        timed_out: false,
        limits,
        memo: FxHashMap::default(),
        memo_cap: (1usize << 23) / words,
    };
    let mut all = Bits::zeros(words);
    for u in 0..n {
        all.set(u);
    }
    let root_lb = search.lower_bound(&all);
    if root_lb < search.best.len() {
        search.dfs(all, &mut Vec::new());
    }
    // a timed-out search returns the seed, so the answer does not depend on
    // how far it got
    let mut best = if search.timed_out { upper } else { search.best };
    best.sort_unstable();
    let optimal = !search.aborted;
    ExactOutcome {
        lower_bound: if optimal { best.len() } else { root_lb },
        best,
        optimal,
        nodes: search.nodes,
    }
}

/// Checks that `chosen` covers every element.
pub fn is_cover<S: CoverSystem + ?Sized>(sys: &S, chosen: &[usize]) -> bool {
    let mut covered = vec![false; sys.universe_len()];
    let mut buf = Vec::new();
    for &s in chosen {
        sys.members(s, &mut buf);
        for &u in &buf {
            covered[u as usize] = true;
        }
    }
    covered.into_iter().all(|c| c)
}
