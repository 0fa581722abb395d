//! Discrete amenability-dimension witness on a castle: indicator partitions
//! of unity and the averaged maps `μ^{(i)}_g`. All arithmetic is exact.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::cover::Verdict;
use crate::error::{Error, Result};
use crate::folner::folner_defect;
use crate::group::{GroupElement, GroupSpec};
use crate::markers::{CastleReport, OrbitWindow};
use crate::subset::FiniteSubset;
use crate::Rational;

/// `ψ_{i,g}` as an assignment `y -> (i, g)`; `ψ_{i,g}(y) = 1` iff `y` is
/// assigned to `(i, g)`, with `g` in the tower shape.
#[derive(Clone, Debug)]
pub struct Psi {
    assign: FxHashMap<GroupElement, (usize, GroupElement)>,
    towers: usize,
}

impl Psi {
    pub fn get(&self, y: &GroupElement) -> Option<&(usize, GroupElement)> {
        self.assign.get(y)
    }

    pub fn value(&self, i: usize, g: &GroupElement, y: &GroupElement) -> bool {
        matches!(self.assign.get(y), Some((j, h)) if *j == i && h == g)
    }

    pub fn tower_count(&self) -> usize {
        self.towers
    }

    pub fn support_size(&self) -> usize {
        self.assign.len()
    }
}

/// First tower wins; within a tower, first level in canonical order.
pub fn indicator_partition(castle: &CastleReport, window: &OrbitWindow) -> Result<Psi> {
    let spec = castle.shape.owner();
    let mut assign = FxHashMap::default();
    for (i, tower) in castle.towers.iter().enumerate() {
        for g in &castle.shape {
            for u in &tower.base {
                assign.entry(spec.multiply(g, u)?).or_insert_with(|| (i, g.clone()));
            }
        }
    }
    if let Some(x) = window.core().iter().find(|x| !assign.contains_key(*x)) {
        return Err(Error::CastleDefect(format!("core point {x:?} is not covered")));
    }
    Ok(Psi {
        assign,
        towers: castle.towers.len(),
    })
}

/// `μ^{(i)}_g(x) = (1/|F_n|) Σ_{h ∈ F_n} ψ_{i, h^-1 g}(h^-1 x)`
#[derive(Clone, Debug)]
pub struct MuSystem {
    psi: Psi,
    shape: FiniteSubset,
    shape_inv: Vec<GroupElement>,
    /// Core points with `F_n^-1 x` inside the window.
    verified_core: FiniteSubset,
    excluded: Vec<GroupElement>,
    window: FxHashSet<GroupElement>,
}

pub type MuValues = BTreeMap<(usize, GroupElement), Rational>;

impl MuSystem {
    pub fn shape(&self) -> &FiniteSubset {
        &self.shape
    }

    pub fn psi(&self) -> &Psi {
        &self.psi
    }

    pub fn verified_core(&self) -> &FiniteSubset {
        &self.verified_core
    }

    pub fn excluded(&self) -> &[GroupElement] {
        &self.excluded
    }

    fn spec(&self) -> &GroupSpec {
        self.shape.owner()
    }

    /// Nonzero values `μ^{(i)}_g(x)`, keyed by `(i, g)`.
    pub fn values_at(&self, x: &GroupElement) -> Result<MuValues> {
        let spec = self.spec();
        let mut counts: BTreeMap<(usize, GroupElement), i64> = BTreeMap::new();
        for (h, h_inv) in self.shape.iter().zip(&self.shape_inv) {
            // ψ_{i,k}(h^-1 x) = 1 contributes to g = h k
            if let Some((i, k)) = self.psi.get(&spec.multiply(h_inv, x)?) {
                *counts.entry((*i, spec.multiply(h, k)?)).or_insert(0) += 1;
            }
        }
        let n = self.shape.len() as i64;
        Ok(counts.into_iter().map(|(k, c)| (k, Rational::new(c, n))).collect())
    }

    /// Condition (a): `Σ_{i,g} μ^{(i)}_g(x) = 1` on the verified core.
    pub fn partition_holds(&self) -> Result<(Verdict, Option<GroupElement>)> {
        let one = Rational::from_integer(1);
        self.first_failure(|vals| vals.values().sum::<Rational>() == one)
    }

    /// Condition (b): `μ^{(i)}_{g} μ^{(i)}_{g'} = 0` for `g != g'`.
    pub fn orthogonality_holds(&self) -> Result<(Verdict, Option<GroupElement>)> {
        self.first_failure(|vals| {
            let mut seen = FxHashSet::default();
            vals.keys().all(|(i, _)| seen.insert(*i))
        })
    }

    fn first_failure(&self, ok: impl Fn(&MuValues) -> bool + Sync) -> Result<(Verdict, Option<GroupElement>)> {
        if self.verified_core.is_empty() {
            return Ok((Verdict::Indeterminate, None));
        }
        let bad = self
            .verified_core
            .elements()
            .par_iter()
            .map(|x| Ok((!ok(&self.values_at(x)?)).then(|| x.clone())))
            .collect::<Result<Vec<_>>>()?;
        let first = bad.into_iter().flatten().next();
        Ok((Verdict::from_bool(first.is_none()), first))
    }
}

/// Requires a strong castle: its bases are `(F_N, 1)`-disjoint with
/// `F_n^2 ⊆ F_N`.
pub fn mu_from_castle(castle: &CastleReport, window: &OrbitWindow) -> Result<MuSystem> {
    if !castle.strong {
        return Err(Error::Refused(
            "the averaged maps need bases (F_N,1)-disjoint with F_n^2 ⊆ F_N; rebuild the castle in strong mode".into(),
        ));
    }
    if castle.strong_disjoint() != Some(Verdict::True) {
        return Err(Error::Refused("castle bases are not verified (F_N,1)-disjoint".into()));
    }
    let (_, fbig) = castle.strong_shape.as_ref().expect("strong castle has F_N");
    if !castle.shape.set_product(&castle.shape)?.is_subset(fbig)? {
        return Err(Error::Refused("F_n^2 is not contained in F_N".into()));
    }
    let psi = indicator_partition(castle, window)?;
    let spec = castle.shape.owner();
    let shape_inv = castle
        .shape
        .iter()
        .map(|h| spec.inverse(h))
        .collect::<Result<Vec<_>>>()?;
    let ball = window.ball();
    let mut verified = Vec::new();
    let mut excluded = Vec::new();
    for x in window.core() {
        let mut inside = true;
        for h_inv in &shape_inv {
            if !ball.contains(&spec.multiply(h_inv, x)?) {
                inside = false;
                break;
            }
        }
        if inside {
            verified.push(x.clone());
        } else {
            excluded.push(x.clone());
        }
    }
    Ok(MuSystem {
        psi,
        shape: castle.shape.clone(),
        shape_inv,
        verified_core: FiniteSubset::from_trusted(window.spec_arc().clone(), verified),
        excluded,
        window: ball.hash_set(),
    })
}

#[derive(Clone, Debug)]
pub struct EquivarianceReport {
    pub g: GroupElement,
    /// `max |μ^{(i)}_{g'}(g^-1 x) - μ^{(i)}_{g g'}(x)|`
    pub pointwise: Rational,
    /// `max_x Σ_{i,g'} |μ^{(i)}_{g'}(g^-1 x) - μ^{(i)}_{g g'}(x)|`
    pub summed: Rational,
    /// `|F_n △ g F_n| / |F_n|`
    pub bound: Rational,
    pub points: usize,
    /// Verified-core points dropped because `g^-1 x` leaves the window.
    pub shrunk_by: usize,
}

impl EquivarianceReport {
    pub fn holds(&self) -> bool {
        self.pointwise <= self.bound && self.summed <= self.bound
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::json!({
            "g": self.g.coords().to_vec(),
            "pointwise_defect": self.pointwise.to_string(),
            "summed_defect": self.summed.to_string(),
            "folner_defect": self.bound.to_string(),
            "holds": self.holds(),
            "points": self.points,
            "shrunk_by": self.shrunk_by,
        })
    }
}

pub fn equivariance_defect(mu: &MuSystem, g: &GroupElement) -> Result<EquivarianceReport> {
    let spec = mu.spec();
    if !spec.contains(g) {
        return Err(Error::MalformedElement {
            expected: spec.dim(),
            got: g.len(),
        });
    }
    let g_inv = spec.inverse(g)?;
    let bound = folner_defect(&mu.shape, g)?;
    let mut pts = Vec::new();
    for x in &mu.verified_core {
        let y = spec.multiply(&g_inv, x)?;
        if mu.window.contains(&y) {
            pts.push((x.clone(), y));
        }
    }
    let zero = Rational::from_integer(0);
    let per_point = pts
        .par_iter()
        .map(|(x, y)| {
            let at_x = mu.values_at(x)?;
            let at_y = mu.values_at(y)?;
            // compare μ_{g'}(g^-1 x) with μ_{g g'}(x)
            let mut diff: BTreeMap<(usize, GroupElement), Rational> = BTreeMap::new();
            for ((i, gp), v) in at_y {
                *diff.entry((i, spec.multiply(g, &gp)?)).or_insert(zero) += v;
            }
            for (k, v) in at_x {
                *diff.entry(k).or_insert(zero) -= v;
            }
            let mut max = zero;
            let mut sum = zero;
            for v in diff.values() {
                let a = if *v < zero { -*v } else { *v };
                max = max.max(a);
                sum += a;
            }
            Ok((max, sum))
        })
        .collect::<Result<Vec<_>>>()?;
    let (pointwise, summed) = per_point
        .into_iter()
        .fold((zero, zero), |(m, s), (a, b)| (m.max(a), s.max(b)));
    Ok(EquivarianceReport {
        g: g.clone(),
        pointwise,
        summed,
        bound,
        points: pts.len(),
        shrunk_by: mu.verified_core.len() - pts.len(),
    })
}
