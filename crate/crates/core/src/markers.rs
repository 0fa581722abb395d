//! Markers and Rokhlin castles on the orbit model: the group acting on
//! itself by left translation, truncated to a word-metric ball.
//!
//! A tower `(U, S)` has levels `sU`, `s in S`; it is disjoint when the map
//! `(s, u) -> su` is injective. A castle is a list of towers whose levels
//! cover the core of the window.

use std::sync::Arc;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use crate::ball::{self, DEFAULT_BALL_BUDGET};
use crate::cover::{self, CoverBudget, CoverWitness, Verdict};
use crate::error::{Error, Result};
use crate::folner::FolnerFamily;
use crate::group::{GroupElement, GroupSpec};
use crate::subset::{FiniteSubset, GeneratingSet};
use crate::Rational;

/// A finite window `B_R` of one free orbit, with coverage claimed on `B_{r_core}`.
#[derive(Clone, Debug)]
pub struct OrbitWindow {
    gens: GeneratingSet,
    radius: u32,
    core_radius: u32,
    ball: FiniteSubset,
    core: FiniteSubset,
}

impl OrbitWindow {
    pub fn new(gens: GeneratingSet, radius: u32, core_radius: u32) -> Result<Self> {
        if core_radius > radius {
            return Err(Error::WindowTooSmall(format!(
                "core radius {core_radius} exceeds window radius {radius}"
            )));
        }
        let layers = ball::spheres(&gens, radius, DEFAULT_BALL_BUDGET)?;
        let owner = gens.gens().owner_arc().clone();
        let core = FiniteSubset::from_trusted(
            owner.clone(),
            layers[..=core_radius as usize].iter().flatten().cloned().collect(),
        );
        let ball = FiniteSubset::from_trusted(owner, layers.into_iter().flatten().collect());
        Ok(OrbitWindow {
            gens,
            radius,
            core_radius,
            ball,
            core,
        })
    }

    /// Window over the standard generators of `spec`.
    pub fn standard(spec: Arc<GroupSpec>, radius: u32, core_radius: u32) -> Result<Self> {
        Self::new(GeneratingSet::standard(spec)?, radius, core_radius)
    }

    pub fn spec(&self) -> &GroupSpec {
        self.gens.owner()
    }

    pub fn spec_arc(&self) -> &Arc<GroupSpec> {
        self.ball.owner_arc()
    }

    pub fn gens(&self) -> &GeneratingSet {
        &self.gens
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn core_radius(&self) -> u32 {
        self.core_radius
    }

    /// `B_R`
    pub fn ball(&self) -> &FiniteSubset {
        &self.ball
    }

    /// `B_{r_core}`
    pub fn core(&self) -> &FiniteSubset {
        &self.core
    }
}

/// With `g_0 = e`, greedily picks `g_1..g_d` from `sample` (in its order) so
/// that `{F g_i}` and `{g_i F}` are both pairwise disjoint.
pub fn choose_disjoint_translates(
    f: &FiniteSubset,
    sample: &[GroupElement],
    d: usize,
) -> Result<Vec<GroupElement>> {
    if d == 0 {
        return Ok(Vec::new());
    }
    let spec = f.owner();
    let f_inv = f.set_inverse()?;
    let right = f_inv.set_product(f)?.hash_set(); // F^-1 F
    let left = f.set_product(&f_inv)?.hash_set(); // F F^-1
    let e = spec.identity();
    let mut chosen_inv: Vec<GroupElement> = vec![e.clone()];
    let mut out = Vec::with_capacity(d);
    for g in sample {
        if !spec.contains(g) {
            return Err(Error::MalformedElement {
                expected: spec.dim(),
                got: g.len(),
            });
        }
        if *g == e {
            continue;
        }
        let mut ok = true;
        for gi_inv in &chosen_inv {
            // g ∉ F^-1 F g_i  and  g ∉ g_i F F^-1
            if right.contains(&spec.multiply(g, gi_inv)?) || left.contains(&spec.multiply(gi_inv, g)?) {
                ok = false;
                break;
            }
        }
        if ok {
            chosen_inv.push(spec.inverse(g)?);
            out.push(g.clone());
            if out.len() == d {
                break;
            }
        }
    }
    if out.len() < d {
        return Err(Error::ExhaustedSample {
            found: out.len(),
            requested: d,
        });
    }
    let mut all = vec![e];
    all.extend(out.iter().cloned());
    if !translates_pairwise_disjoint(f, &all)? {
        return Err(Error::CastleDefect("disjoint translate selection failed re-verification".into()));
    }
    Ok(out)
}

/// Checks both `{F g}` and `{g F}` over `gs` for pairwise disjointness.
pub fn translates_pairwise_disjoint(f: &FiniteSubset, gs: &[GroupElement]) -> Result<bool> {
    let mut right = FxHashSet::default();
    let mut left = FxHashSet::default();
    for g in gs {
        for x in f {
            let spec = f.owner();
            if !right.insert(spec.multiply(x, g)?) || !left.insert(spec.multiply(g, x)?) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `v_1..v_L` with `F F^-1 ⊆ ∪ F v_i^-1`.
#[derive(Clone, Debug)]
pub struct CoveringTranslates {
    pub v: Vec<GroupElement>,
    /// The cover of `F F^-1` by left translates of `F^-1` the list came from.
    pub witness: CoverWitness,
}

impl CoveringTranslates {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

pub fn covering_translates(f: &FiniteSubset, budget: &CoverBudget) -> Result<CoveringTranslates> {
    if !f.contains_identity() {
        return Err(Error::Precondition("covering translates need e in F".into()));
    }
    let f_inv = f.set_inverse()?;
    let witness = cover::covering_number(&f_inv, budget)?;
    // F F^-1 ⊆ ∪ u F^-1  ⇒  F F^-1 ⊆ ∪ F u^-1
    let v = witness.translates().to_vec();
    let spec = f.owner();
    let mut covered = FxHashSet::default();
    for vi in &v {
        let vi_inv = spec.inverse(vi)?;
        for x in f {
            covered.insert(spec.multiply(x, &vi_inv)?);
        }
    }
    for x in f.set_product(&f_inv)?.iter() {
        if !covered.contains(x) {
            return Err(Error::CastleDefect(format!("v-list misses {x:?} in F F^-1")));
        }
    }
    Ok(CoveringTranslates { v, witness })
}

/// Exact `(M, k)`-disjointness of `E`: every point lies in at most `k` of the
/// translates `mE`. Indeterminate when `|M||E|` exceeds `budget`.
pub fn verify_disjointness(e: &FiniteSubset, m: &FiniteSubset, k: usize, budget: usize) -> Result<Verdict> {
    if k == 0 {
        return Err(Error::Precondition("k must be >= 1".into()));
    }
    e.same_owner(m)?;
    if m.len().saturating_mul(e.len()) > budget {
        return Ok(Verdict::Indeterminate);
    }
    let spec = e.owner();
    let mut count: FxHashMap<GroupElement, usize> = FxHashMap::default();
    for g in m {
        for x in e {
            let c = count.entry(spec.multiply(g, x)?).or_insert(0);
            *c += 1;
            if *c > k {
                return Ok(Verdict::False);
            }
        }
    }
    Ok(Verdict::True)
}

pub const DEFAULT_DISJOINTNESS_BUDGET: usize = 50_000_000;

/// Separation test `x d^-1 ∈ ∪_c c E c^-1`, with `E` symmetric.
struct Separation<'a> {
    spec: &'a GroupSpec,
    conj: Vec<(GroupElement, GroupElement)>,
    e: FxHashSet<GroupElement>,
}

impl<'a> Separation<'a> {
    fn new(spec: &'a GroupSpec, e: &FiniteSubset, conjugators: &[GroupElement]) -> Result<Self> {
        let e = e.union(&e.set_inverse()?)?.hash_set();
        let conj = conjugators
            .iter()
            .map(|c| Ok((c.clone(), spec.inverse(c)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Separation { spec, conj, e })
    }

    fn blocks(&self, x: &GroupElement, d_inv: &GroupElement) -> Result<bool> {
        let y = self.spec.multiply(x, d_inv)?;
        for (c, c_inv) in &self.conj {
            let z = self.spec.multiply(&self.spec.multiply(c_inv, &y)?, c)?;
            if self.e.contains(&z) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn admissible(&self, x: &GroupElement, d: &[(GroupElement, GroupElement)]) -> Result<bool> {
        for (_, d_inv) in d {
            if self.blocks(x, d_inv)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Adds every admissible candidate in order.
    fn fill<'b>(
        &self,
        d: &mut Vec<(GroupElement, GroupElement)>,
        candidates: impl IntoIterator<Item = &'b GroupElement>,
    ) -> Result<()> {
        for x in candidates {
            if self.admissible(x, d)? {
                d.push((x.clone(), self.spec.inverse(x)?));
            }
        }
        Ok(())
    }
}

/// How the marker points were chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerStrategy {
    /// Maximal separated set, candidates in canonical order.
    Lexicographic,
    /// Each uncovered core point (canonical order) pulls in the admissible
    /// point covering it that covers the most uncovered core points; then a
    /// lexicographic fill.
    CoverDriven,
}

/// A separated subset `D ⊆ B_R` of the window.
#[derive(Clone, Debug)]
pub struct MarkerSet {
    pub d: FiniteSubset,
    pub f: FiniteSubset,
    /// Controlling translates `{v_i^-1 g_j}`.
    pub b: FiniteSubset,
    /// Symmetric separation set: `d' d^-1 ∉ separation` for `d != d'`.
    pub separation: FiniteSubset,
    pub strategy: MarkerStrategy,
    pub separated: bool,
    /// `Fd` pairwise disjoint over `d in D`; computed independently.
    pub translates_disjoint: bool,
    /// `|core ∩ separation·D| / |core|`
    pub maximal_coverage: Rational,
    /// `|core ∩ (F·B)·D| / |core|`
    pub controlled_coverage: Rational,
    pub uncovered: Option<GroupElement>,
}

impl MarkerSet {
    pub fn to_value(&self) -> serde_json::Value {
        serde_json::json!({
            "D": self.d.to_value(),
            "F": self.f.to_value(),
            "B": self.b.to_value(),
            "strategy": self.strategy,
            "separated": self.separated,
            "translates_disjoint": self.translates_disjoint,
            "maximal_coverage": self.maximal_coverage.to_string(),
            "controlled_coverage": self.controlled_coverage.to_string(),
            "uncovered_example": self.uncovered.as_ref().map(|g| g.coords().to_vec()),
        })
    }

    /// For each `g`, whether `gD` is still separated by the marker's
    /// separation set. Evidence only: the window is finite.
    pub fn translated_separation(&self, gs: &[GroupElement]) -> Result<Vec<(GroupElement, bool)>> {
        gs.iter()
            .map(|g| {
                let gd = self.d.translate(g)?;
                Ok((g.clone(), is_separated(&gd, &self.separation)?))
            })
            .collect()
    }
}

/// `d' d^-1 ∉ sep` for all distinct `d, d'` in `d_set`, by pairwise check.
pub fn is_separated(d_set: &FiniteSubset, sep: &FiniteSubset) -> Result<bool> {
    let spec = d_set.owner();
    let inv = d_set
        .iter()
        .map(|d| spec.inverse(d))
        .collect::<Result<Vec<_>>>()?;
    let hits = d_set
        .elements()
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            for (j, d_inv) in inv.iter().enumerate() {
                if i != j && sep.contains(&spec.multiply(x, d_inv)?) {
                    return Ok(true);
                }
            }
            Ok(false)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(!hits.into_iter().any(|h| h))
}

fn coverage(core: &FiniteSubset, covered: &FxHashSet<GroupElement>) -> (Rational, Option<GroupElement>) {
    let mut hit = 0i64;
    let mut first_miss = None;
    for x in core {
        if covered.contains(x) {
            hit += 1;
        } else if first_miss.is_none() {
            first_miss = Some(x.clone());
        }
    }
    let frac = if core.is_empty() {
        Rational::from_integer(1)
    } else {
        Rational::new(hit, core.len() as i64)
    };
    (frac, first_miss)
}

fn product_set(a: &FiniteSubset, b: &FiniteSubset) -> Result<FxHashSet<GroupElement>> {
    Ok(a.set_product(b)?.hash_set())
}

/// Greedy maximal `separation_shape`-separated `D ⊆ B_R` in canonical order.
/// The controlling set `B` is `{v_i^-1}` from `covering_translates(F)`.
pub fn build_marker(
    window: &OrbitWindow,
    f: &FiniteSubset,
    separation_shape: &FiniteSubset,
    budget: &CoverBudget,
) -> Result<MarkerSet> {
    f.same_owner(window.ball())?;
    separation_shape.same_owner(f)?;
    let f_inv = f.set_inverse()?;
    if !f_inv.set_product(f)?.is_subset(separation_shape)? {
        return Err(Error::Precondition("separation shape must contain F^-1 F".into()));
    }
    let spec = window.spec();
    let sep = Separation::new(spec, separation_shape, &[spec.identity()])?;
    let mut d = Vec::new();
    sep.fill(&mut d, window.ball().iter())?;
    let d = FiniteSubset::from_trusted(window.spec_arc().clone(), d.into_iter().map(|(x, _)| x).collect());

    let v = covering_translates(f, budget)?;
    let b = FiniteSubset::new(
        window.spec_arc().clone(),
        v.v.iter().map(|x| spec.inverse(x)).collect::<Result<Vec<_>>>()?,
    )?;
    let sym = separation_shape.union(&separation_shape.set_inverse()?)?;
    finish_marker(window, f, b, sym, d, MarkerStrategy::Lexicographic)
}

fn finish_marker(
    window: &OrbitWindow,
    f: &FiniteSubset,
    b: FiniteSubset,
    separation: FiniteSubset,
    d: FiniteSubset,
    strategy: MarkerStrategy,
) -> Result<MarkerSet> {
    let separated = is_separated(&d, &separation)?;
    let translates_disjoint = verify_disjointness(&d, f, 1, usize::MAX)? == Verdict::True;
    let (maximal_coverage, _) = coverage(window.core(), &product_set(&separation, &d)?);
    let fb = f.set_product(&b)?;
    let (controlled_coverage, uncovered) = coverage(window.core(), &product_set(&fb, &d)?);
    Ok(MarkerSet {
        d,
        f: f.clone(),
        b,
        separation,
        strategy,
        separated,
        translates_disjoint,
        maximal_coverage,
        controlled_coverage,
        uncovered,
    })
}

#[derive(Clone, Debug)]
pub struct CastleOptions {
    pub cover_budget: CoverBudget,
    /// Largest `|F_N|` tried when looking for `F_n^2 ⊆ F_N`.
    pub strong_max_size: usize,
    /// Largest radius searched for central elements.
    pub sample_radius_max: u32,
    pub disjointness_budget: usize,
}

impl Default for CastleOptions {
    fn default() -> Self {
        CastleOptions {
            cover_budget: CoverBudget {
                time_cap: 5.0,
                ..CoverBudget::default()
            },
            strong_max_size: 1 << 20,
            sample_radius_max: 64,
            disjointness_budget: DEFAULT_DISJOINTNESS_BUDGET,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Tower {
    /// `(i, j)`: base `v_i^-1 g_j D`.
    pub label: (usize, usize),
    pub base: FiniteSubset,
    pub disjoint: Verdict,
    /// `(F_N, 1)`-disjointness, strong mode only.
    pub strong_disjoint: Option<Verdict>,
    /// `g·base ∩ base = ∅` for all `g in F_N \ {e}`, strong mode only.
    pub freeness_shadow: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct CastleReport {
    pub family: String,
    pub n: u64,
    pub d_extra: usize,
    pub strong: bool,
    pub window_radius: u32,
    pub core_radius: u32,
    pub shape: FiniteSubset,
    /// `(N, F_N)` in strong mode.
    pub strong_shape: Option<(u64, FiniteSubset)>,
    pub v_list: Vec<GroupElement>,
    pub l: usize,
    pub l_exact: bool,
    pub g_list: Vec<GroupElement>,
    pub marker: MarkerSet,
    pub towers: Vec<Tower>,
    pub core_size: usize,
    pub covered_fraction: Rational,
    pub uncovered: Vec<GroupElement>,
    pub max_multiplicity: usize,
    pub tower_count_ok: bool,
}

const MAX_LISTED_UNCOVERED: usize = 16;

impl CastleReport {
    pub fn all_disjoint(&self) -> Verdict {
        Verdict::all(self.towers.iter().map(|t| t.disjoint))
    }

    pub fn strong_disjoint(&self) -> Option<Verdict> {
        self.strong
            .then(|| Verdict::all(self.towers.iter().map(|t| t.strong_disjoint.unwrap_or(Verdict::False))))
    }

    pub fn freeness_shadow(&self) -> Option<bool> {
        self.strong
            .then(|| self.towers.iter().all(|t| t.freeness_shadow == Some(true)))
    }

    pub fn covers_core(&self) -> bool {
        self.covered_fraction == Rational::from_integer(1)
    }

    /// Conjunction of every verdict in the report.
    pub fn verdict(&self) -> Verdict {
        let mut v = self
            .all_disjoint()
            .and(Verdict::from_bool(self.covers_core()))
            .and(Verdict::from_bool(self.tower_count_ok))
            .and(Verdict::from_bool(self.marker.separated));
        if let Some(s) = self.strong_disjoint() {
            v = v.and(s);
        }
        if let Some(f) = self.freeness_shadow() {
            v = v.and(Verdict::from_bool(f));
        }
        v
    }

    pub fn to_value(&self) -> serde_json::Value {
        let coords = |gs: &[GroupElement]| gs.iter().map(|g| g.coords().to_vec()).collect::<Vec<_>>();
        serde_json::json!({
            "family": self.family,
            "n": self.n,
            "d_extra": self.d_extra,
            "d_extra_mode": if self.d_extra == 0 { "default" } else { "exercise" },
            "strong": self.strong,
            "N": self.strong_shape.as_ref().map(|(n, _)| *n),
            "window": { "R": self.window_radius, "r_core": self.core_radius, "core_size": self.core_size },
            "shape": self.shape.to_value(),
            "strong_shape_size": self.strong_shape.as_ref().map(|(_, f)| f.len()),
            "v_list": coords(&self.v_list),
            "L": self.l,
            "L_exact": self.l_exact,
            "g_list": coords(&self.g_list),
            "marker": self.marker.to_value(),
            "towers": self.towers.iter().map(|t| serde_json::json!({
                "i": t.label.0,
                "j": t.label.1,
                "base": t.base.to_value(),
                "disjoint": t.disjoint,
                "strong_disjoint": t.strong_disjoint,
                "freeness_shadow": t.freeness_shadow,
            })).collect::<Vec<_>>(),
            "tower_count": self.towers.len(),
            "tower_count_bound": self.l * (self.d_extra + 1),
            "tower_count_ok": self.tower_count_ok,
            "covered_fraction": self.covered_fraction.to_string(),
            "uncovered_examples": coords(&self.uncovered),
            "max_multiplicity": self.max_multiplicity,
            "verdicts": {
                "all_disjoint": self.all_disjoint(),
                "covers_core": self.covers_core(),
                "strong_disjoint": self.strong_disjoint(),
                "freeness_shadow": self.freeness_shadow(),
                "overall": self.verdict(),
            },
        })
    }

    /// `i,j,base_size`
    pub fn tower_csv(&self) -> String {
        let mut out = String::from("i,j,base_size\n");
        for t in &self.towers {
            out.push_str(&format!("{},{},{}\n", t.label.0, t.label.1, t.base.len()));
        }
        out
    }
}

/// Smallest `N >= n` with `F_n^2 ⊆ F_N`, assuming the family is nested.
pub fn strong_index(family: &FolnerFamily, n: u64, max_size: usize) -> Result<(u64, FiniteSubset)> {
    let f = family.member(n)?;
    let sq = f.set_product(&f)?;
    let fits = |k: u64| -> Result<Option<FiniteSubset>> {
        let fk = family.member(k)?;
        Ok(sq.is_subset(&fk)?.then_some(fk))
    };
    let mut lo = n;
    let mut hi = n;
    loop {
        let fk = family.member(hi)?;
        if fk.len() > max_size {
            return Err(Error::StrongUnavailable { max_index: hi });
        }
        if sq.is_subset(&fk)? {
            break;
        }
        lo = hi + 1;
        hi = hi.checked_mul(2).ok_or(Error::Overflow)?;
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if fits(mid)?.is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let fk = fits(lo)?.ok_or_else(|| Error::StrongUnavailable { max_index: lo })?;
    Ok((lo, fk))
}

/// Central elements for `J` in ascending word length, then canonical order,
/// over balls of radius up to `max_radius`.
fn central_sample(gens: &GeneratingSet, j: &FiniteSubset, radius: u32) -> Result<Vec<GroupElement>> {
    let layers = ball::spheres(gens, radius, DEFAULT_BALL_BUDGET)?;
    let spec = gens.owner();
    let mut out = Vec::new();
    for layer in layers {
        for g in layer {
            let mut central = true;
            for z in j {
                if !spec.commutes(&g, z)? {
                    central = false;
                    break;
                }
            }
            if central {
                out.push(g);
            }
        }
    }
    Ok(out)
}

pub fn build_castle(
    window: &OrbitWindow,
    family: &FolnerFamily,
    n: u64,
    d_extra: usize,
    strong: bool,
    opts: &CastleOptions,
) -> Result<CastleReport> {
    if family.owner().as_ref() != window.spec() {
        return Err(Error::OwnerMismatch);
    }
    let spec = window.spec();
    let owner = window.spec_arc().clone();
    let f = family.member(n)?;
    let cover = covering_translates(&f, &opts.cover_budget)?;
    let v = cover.v.clone();
    let v_inv = v.iter().map(|x| spec.inverse(x)).collect::<Result<Vec<_>>>()?;

    let strong_shape = if strong {
        Some(strong_index(family, n, opts.strong_max_size)?)
    } else {
        None
    };

    // g_1..g_d central for F ∪ {v_i}, disjoint for F~ = F ∪ ⋃ F v_i^-1
    let g_list = if d_extra == 0 {
        Vec::new()
    } else {
        let j = f.union(&FiniteSubset::new(owner.clone(), v.clone())?)?;
        let mut f_tilde = f.clone();
        for vi in &v_inv {
            f_tilde = f_tilde.union(&f.translate_right(vi)?)?;
        }
        let mut radius = window.radius().max(1);
        loop {
            let sample = central_sample(window.gens(), &j, radius)?;
            match choose_disjoint_translates(&f_tilde, &sample, d_extra) {
                Ok(g) => break g,
                Err(Error::ExhaustedSample { .. }) if radius < opts.sample_radius_max => {
                    radius = (radius * 2).min(opts.sample_radius_max);
                }
                Err(e) => return Err(e),
            }
        }
    };
    let mut g_all = vec![spec.identity()];
    g_all.extend(g_list.iter().cloned());

    // separation against ⋃ v_i E v_i^-1, E = F^-1 F or F_N^-1 F_N
    let sep_base = match &strong_shape {
        Some((_, fbig)) => fbig.set_inverse()?.set_product(fbig)?,
        None => f.set_inverse()?.set_product(&f)?,
    };
    let sep = Separation::new(spec, &sep_base, &v)?;

    // coverage target: T = ⋃ F v_i^-1
    let mut t = FxHashSet::default();
    for vi in &v_inv {
        for x in &f {
            t.insert(spec.multiply(x, vi)?);
        }
    }
    let t_inv: Vec<GroupElement> = t.iter().map(|x| spec.inverse(x)).collect::<Result<Vec<_>>>()?;
    let covered_by = |d: &[(GroupElement, GroupElement)]| -> Result<FxHashSet<GroupElement>> {
        let mut c = FxHashSet::default();
        for (x, _) in d {
            for s in &t {
                c.insert(spec.multiply(s, x)?);
            }
        }
        Ok(c)
    };

    let mut d = Vec::new();
    sep.fill(&mut d, window.ball().iter())?;
    let mut strategy = MarkerStrategy::Lexicographic;
    let lex_cov = covered_by(&d)?;
    if window.core().iter().any(|x| !lex_cov.contains(x)) {
        strategy = MarkerStrategy::CoverDriven;
        d.clear();
        let mut cov: FxHashSet<GroupElement> = FxHashSet::default();
        let core = window.core().hash_set();
        for x in window.core() {
            if cov.contains(x) {
                continue;
            }
            let mut cands: Vec<GroupElement> = t_inv
                .iter()
                .map(|s| spec.multiply(s, x))
                .collect::<Result<Vec<_>>>()?;
            cands.retain(|c| window.ball().contains(c));
            cands.sort_unstable();
            let mut best: Option<(usize, GroupElement)> = None;
            for c in cands {
                if !sep.admissible(&c, &d)? {
                    continue;
                }
                let mut gain = 0;
                for s in &t {
                    let y = spec.multiply(s, &c)?;
                    if !cov.contains(&y) && core.contains(&y) {
                        gain += 1;
                    }
                }
                if best.as_ref().map_or(true, |(g, _)| gain > *g) {
                    best = Some((gain, c));
                }
            }
            if let Some((_, c)) = best {
                for s in &t {
                    cov.insert(spec.multiply(s, &c)?);
                }
                d.push((c.clone(), spec.inverse(&c)?));
            }
        }
        sep.fill(&mut d, window.ball().iter())?;
    }
    let d_set = FiniteSubset::from_trusted(owner.clone(), d.into_iter().map(|(x, _)| x).collect());

    // materialized separation set, for the marker report
    let mut sep_elems = Vec::new();
    for (vi, vi_inv) in v.iter().zip(&v_inv) {
        for z in sep.e.iter() {
            sep_elems.push(spec.multiply(&spec.multiply(vi, z)?, vi_inv)?);
        }
    }
    let separation = FiniteSubset::from_trusted(owner.clone(), sep_elems);
    let mut b = Vec::new();
    for gj in &g_all {
        for vi in &v_inv {
            b.push(spec.multiply(vi, gj)?);
        }
    }
    let b = FiniteSubset::new(owner.clone(), b)?;
    let marker = finish_marker(window, &f, b, separation, d_set.clone(), strategy)?;

    let mut labels = Vec::new();
    for (jdx, gj) in g_all.iter().enumerate() {
        for (idx, vi) in v_inv.iter().enumerate() {
            labels.push(((idx, jdx), spec.multiply(vi, gj)?));
        }
    }
    let towers = labels
        .into_par_iter()
        .map(|(label, h)| {
            let base = d_set.translate(&h)?;
            let disjoint = verify_disjointness(&base, &f, 1, opts.disjointness_budget)?;
            let (strong_disjoint, freeness_shadow) = match &strong_shape {
                Some((_, fbig)) => {
                    let sd = verify_disjointness(&base, fbig, 1, opts.disjointness_budget)?;
                    let e = spec.identity();
                    let mut free = true;
                    for g in fbig.iter().filter(|g| **g != e) {
                        if !base.translate(g)?.is_disjoint(&base)? {
                            free = false;
                            break;
                        }
                    }
                    (Some(sd), Some(free))
                }
                None => (None, None),
            };
            Ok(Tower {
                label,
                base,
                disjoint,
                strong_disjoint,
                freeness_shadow,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // multiplicity: number of towers with a level through each core point
    let core = window.core().hash_set();
    let mut mult: FxHashMap<GroupElement, usize> = FxHashMap::default();
    for tower in &towers {
        let mut seen = FxHashSet::default();
        for s in &f {
            for u in &tower.base {
                let x = spec.multiply(s, u)?;
                if core.contains(&x) && seen.insert(x.clone()) {
                    *mult.entry(x).or_insert(0) += 1;
                }
            }
        }
    }
    let uncovered: Vec<GroupElement> = window
        .core()
        .iter()
        .filter(|x| !mult.contains_key(*x))
        .take(MAX_LISTED_UNCOVERED)
        .cloned()
        .collect();
    let covered = mult.len();
    let l = cover.len();
    Ok(CastleReport {
        family: family.name(),
        n,
        d_extra,
        strong,
        window_radius: window.radius(),
        core_radius: window.core_radius(),
        shape: f,
        strong_shape,
        l,
        l_exact: cover.witness.is_exact(),
        v_list: v,
        g_list,
        marker,
        tower_count_ok: towers.len() <= l * (d_extra + 1),
        towers,
        core_size: window.core().len(),
        covered_fraction: Rational::new(covered as i64, window.core().len().max(1) as i64),
        uncovered,
        max_multiplicity: mult.values().copied().max().unwrap_or(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z() -> Arc<GroupSpec> {
        Arc::new(GroupSpec::free_abelian(1))
    }

    fn naturals(n: i64) -> Vec<GroupElement> {
        (0..n).map(|k| GroupElement::new(&[k])).collect()
    }

    #[test]
    fn lemma_ct_on_integers() {
        let f = FiniteSubset::integer_box(z(), -2, 2).unwrap();
        let g = choose_disjoint_translates(&f, &naturals(100), 2).unwrap();
        assert_eq!(g, vec![GroupElement::new(&[5]), GroupElement::new(&[10])]);
        assert!(choose_disjoint_translates(&f, &naturals(100), 0).unwrap().is_empty());
        assert_eq!(
            choose_disjoint_translates(&f, &naturals(8), 2),
            Err(Error::ExhaustedSample { found: 1, requested: 2 })
        );
    }

    #[test]
    fn disjointness_examples() {
        let e0 = FiniteSubset::from_coords(z(), &[&[0]]).unwrap();
        let e01 = FiniteSubset::from_coords(z(), &[&[0], &[1]]).unwrap();
        assert_eq!(verify_disjointness(&e0, &e01, 1, 100).unwrap(), Verdict::True);
        assert_eq!(verify_disjointness(&e01, &e01, 1, 100).unwrap(), Verdict::False);
        assert_eq!(verify_disjointness(&e01, &e01, 2, 100).unwrap(), Verdict::True);
        assert_eq!(verify_disjointness(&e01, &e01, 1, 3).unwrap(), Verdict::Indeterminate);
    }

    #[test]
    fn covering_translates_of_interval() {
        let f = FiniteSubset::integer_box(z(), -3, 3).unwrap();
        let v = covering_translates(&f, &CoverBudget::default()).unwrap();
        assert_eq!(v.v, vec![GroupElement::new(&[-3]), GroupElement::new(&[3])]);
        let e = FiniteSubset::identity(z());
        assert_eq!(covering_translates(&e, &CoverBudget::default()).unwrap().len(), 1);
    }

    #[test]
    fn integer_marker_has_spacing_five() {
        let w = OrbitWindow::standard(z(), 100, 90).unwrap();
        let f = FiniteSubset::integer_box(z(), -2, 2).unwrap();
        let sep = f.set_inverse().unwrap().set_product(&f).unwrap();
        let m = build_marker(&w, &f, &sep, &CoverBudget::default()).unwrap();
        let expected: Vec<_> = (-100..=100).step_by(5).map(|k| GroupElement::new(&[k])).collect();
        assert_eq!(m.d.elements(), &expected[..]);
        assert!(m.separated && m.translates_disjoint);
        assert_eq!(m.controlled_coverage, Rational::from_integer(1));
    }

    #[test]
    fn trivial_shape_marks_everything() {
        let w = OrbitWindow::standard(z(), 10, 5).unwrap();
        let e = FiniteSubset::identity(z());
        let m = build_marker(&w, &e, &e, &CoverBudget::default()).unwrap();
        assert_eq!(&m.d, w.ball());
    }

    #[test]
    fn window_radii_checked() {
        assert!(matches!(OrbitWindow::standard(z(), 3, 4), Err(Error::WindowTooSmall(_))));
    }

    #[test]
    fn integer_castles() {
        let w = OrbitWindow::standard(z(), 200, 190).unwrap();
        let fam = FolnerFamily::zm_box(1).unwrap();
        let plain = build_castle(&w, &fam, 3, 0, false, &CastleOptions::default()).unwrap();
        assert_eq!(plain.towers.len(), 2);
        assert_eq!(plain.verdict(), Verdict::True);
        let strong = build_castle(&w, &fam, 3, 0, true, &CastleOptions::default()).unwrap();
        assert_eq!(strong.strong_shape.as_ref().unwrap().0, 6);
        assert_eq!(strong.verdict(), Verdict::True);
    }
}
