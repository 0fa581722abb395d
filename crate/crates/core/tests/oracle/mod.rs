//! Brute-force reference implementations. Nothing here calls the library's
//! algorithms; group arithmetic is written out from the model formulas.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet, VecDeque};

pub type P = Vec<i64>;

/// `Z^k`, or `H_3(Z)` as `Z^2 x| Z` with `t.(a, b) = (a + t b, b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum G {
    Z(usize),
    H3,
}

impl G {
    pub fn dim(self) -> usize {
        match self {
            G::Z(k) => k,
            G::H3 => 3,
        }
    }

    pub fn e(self) -> P {
        vec![0; self.dim()]
    }

    pub fn mul(self, x: &[i64], y: &[i64]) -> P {
        match self {
            G::Z(_) => x.iter().zip(y).map(|(a, b)| a + b).collect(),
            G::H3 => vec![x[0] + y[0] + x[2] * y[1], x[1] + y[1], x[2] + y[2]],
        }
    }

    pub fn inv(self, x: &[i64]) -> P {
        match self {
            G::Z(_) => x.iter().map(|a| -a).collect(),
            G::H3 => vec![x[2] * x[1] - x[0], -x[1], -x[2]],
        }
    }

    /// Unit vectors and their inverses.
    pub fn gens(self) -> Vec<P> {
        let mut out = Vec::new();
        for i in 0..self.dim() {
            let mut u = self.e();
            u[i] = 1;
            out.push(self.inv(&u));
            out.push(u);
        }
        out
    }

    /// Word-metric ball by BFS, sorted.
    pub fn ball(self, r: u32) -> Vec<P> {
        let gens = self.gens();
        let mut dist: HashMap<P, u32> = HashMap::new();
        let mut q = VecDeque::new();
        dist.insert(self.e(), 0);
        q.push_back(self.e());
        while let Some(x) = q.pop_front() {
            let d = dist[&x];
            if d == r {
                continue;
            }
            for s in &gens {
                let y = self.mul(&x, s);
                if !dist.contains_key(&y) {
                    dist.insert(y.clone(), d + 1);
                    q.push_back(y);
                }
            }
        }
        let mut v: Vec<P> = dist.into_keys().collect();
        v.sort();
        v
    }

    pub fn product(self, a: &[P], b: &[P]) -> HashSet<P> {
        let mut out = HashSet::new();
        for x in a {
            for y in b {
                out.insert(self.mul(x, y));
            }
        }
        out
    }

    pub fn inverse_set(self, a: &[P]) -> Vec<P> {
        a.iter().map(|x| self.inv(x)).collect()
    }
}

pub fn box_points(ranges: &[(i64, i64)]) -> Vec<P> {
    let mut out = vec![Vec::new()];
    for &(lo, hi) in ranges {
        let mut next = Vec::new();
        for p in &out {
            for v in lo..=hi {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Do the left translates `g A` for `g` in `translates` cover `A^-1 A`?
pub fn covers_product_set(g: G, a: &[P], translates: &[P]) -> bool {
    let target = g.product(&g.inverse_set(a), a);
    let mut got = HashSet::new();
    for t in translates {
        for x in a {
            got.insert(g.mul(t, x));
        }
    }
    target.iter().all(|x| got.contains(x))
}

/// Minimum number of the given sets covering `universe`, by iterative
/// deepening over "branch on the uncovered point with fewest options".
pub fn min_cover(universe: &[P], sets: &[HashSet<P>]) -> usize {
    let idx: HashMap<&P, usize> = universe.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let sets: Vec<Vec<usize>> = sets
        .iter()
        .map(|s| s.iter().filter_map(|p| idx.get(p).copied()).collect())
        .filter(|s: &Vec<usize>| !s.is_empty())
        .collect();
    let mut by_point: Vec<Vec<usize>> = vec![Vec::new(); universe.len()];
    for (j, s) in sets.iter().enumerate() {
        for &p in s {
            by_point[p].push(j);
        }
    }
    assert!(by_point.iter().all(|v| !v.is_empty()), "universe is not coverable");
    let max_set = sets.iter().map(Vec::len).max().unwrap_or(1);
    let mut count = vec![0u32; universe.len()];
    let mut k = universe.len().div_ceil(max_set);
    loop {
        if search(&sets, &by_point, &mut count, universe.len(), max_set, k) {
            return k;
        }
        k += 1;
    }
}

fn search(
    sets: &[Vec<usize>],
    by_point: &[Vec<usize>],
    count: &mut [u32],
    uncovered: usize,
    max_set: usize,
    k: usize,
) -> bool {
    if uncovered == 0 {
        return true;
    }
    if k == 0 || uncovered > k * max_set {
        return false;
    }
    let p = (0..count.len())
        .filter(|&p| count[p] == 0)
        .min_by_key(|&p| by_point[p].len())
        .unwrap();
    for &j in &by_point[p] {
        let mut newly = 0;
        for &q in &sets[j] {
            if count[q] == 0 {
                newly += 1;
            }
            count[q] += 1;
        }
        let ok = search(sets, by_point, count, uncovered - newly, max_set, k - 1);
        for &q in &sets[j] {
            count[q] -= 1;
        }
        if ok {
            return true;
        }
    }
    false
}

/// `L_A` by brute force: cover `A^-1 A` with translates `g A`, where `g`
/// ranges over `A^-1 A A^-1` (every translate meeting the target).
pub fn covering_number(g: G, a: &[P]) -> usize {
    let a_inv = g.inverse_set(a);
    let target: Vec<P> = {
        let mut v: Vec<P> = g.product(&a_inv, a).into_iter().collect();
        v.sort();
        v
    };
    let cands: Vec<P> = g.product(&target, &a_inv).into_iter().collect();
    let sets: Vec<HashSet<P>> = cands
        .iter()
        .map(|t| a.iter().map(|x| g.mul(t, x)).collect())
        .collect();
    min_cover(&target, &sets)
}

/// Both `{F g_i}` and `{g_i F}` pairwise disjoint over `gs`, by explicit
/// pairwise intersection.
pub fn double_disjoint(g: G, f: &[P], gs: &[P]) -> bool {
    let right: Vec<HashSet<P>> = gs.iter().map(|h| f.iter().map(|x| g.mul(x, h)).collect()).collect();
    let left: Vec<HashSet<P>> = gs.iter().map(|h| f.iter().map(|x| g.mul(h, x)).collect()).collect();
    for i in 0..gs.len() {
        for j in i + 1..gs.len() {
            if !right[i].is_disjoint(&right[j]) || !left[i].is_disjoint(&left[j]) {
                return false;
            }
        }
    }
    true
}

/// `{s U : s in S}` pairwise disjoint, i.e. `(s, u) -> s u` injective.
pub fn tower_disjoint(g: G, shape: &[P], base: &[P]) -> bool {
    let mut seen = HashSet::with_capacity(shape.len() * base.len());
    for s in shape {
        for u in base {
            if !seen.insert(g.mul(s, u)) {
                return false;
            }
        }
    }
    true
}

pub fn is_subset(a: &HashSet<P>, b: &[P]) -> bool {
    let b: HashSet<&P> = b.iter().collect();
    a.iter().all(|x| b.contains(x))
}

/// Integer part of the square root.
pub fn isqrt(l: u64) -> i64 {
    let mut s = (l as f64).sqrt() as i64;
    while s * s > l as i64 {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= l as i64 {
        s += 1;
    }
    s
}

/// Is `x` in `B_{s1} B_{s2}` for cubes of radius `s1`, `s2` in the shear
/// model? Solves for the factors coordinatewise.
pub fn h3_in_box_product(x: &[i64], s1: i64, s2: i64) -> bool {
    let (a, b, t) = (x[0], x[1], x[2]);
    for t1 in -s1..=s1 {
        let t2 = t - t1;
        if t2.abs() > s2 {
            continue;
        }
        for b1 in -s1..=s1 {
            let b2 = b - b1;
            if b2.abs() > s2 {
                continue;
            }
            // a1 + a2 = a - t1 b2 with |a1| <= s1, |a2| <= s2
            if (a - t1 * b2).abs() <= s1 + s2 {
                return true;
            }
        }
    }
    false
}
