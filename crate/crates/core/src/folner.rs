//! Følner families and finite-range checks of the approximate Følner
//! conditions.
//!
//! Every verdict here is scoped to the indices actually tested; nothing is
//! extrapolated to the infinite family.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::cover::{self, CoverBudget, CoverWitness, Decision, Verdict};
use crate::error::{Error, Result};
use crate::group::{ActionRule, GroupElement, GroupSpec};
use crate::subset::{box_points, FiniteSubset};
use crate::Rational;

pub type Generator = Arc<dyn Fn(u64) -> Result<FiniteSubset> + Send + Sync>;

/// Serializable description of a built-in family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyDescriptor {
    /// `F_l = {-l..l}^m` in Z^m.
    ZmBox { m: usize },
    /// `F_l = {-s..s}^m` with `s = isqrt(l)`.
    ZmSqrtBox { m: usize },
    /// `N_l x H_l` in Z^{2n} x| Z (shear), both factors square-root boxes.
    HeisenbergSqrt { n: usize },
    /// `N_l x H_l` from two families under an action.
    Product {
        normal: Box<FamilyDescriptor>,
        acting: Box<FamilyDescriptor>,
        action: ActionRule,
    },
    /// `F_l = {e}` for every l.
    Singletons { group: GroupSpec },
}

#[derive(Clone)]
enum Kind {
    Builtin(FamilyDescriptor),
    Custom { name: String, generator: Generator },
}

/// An indexed family `l -> F_l` of finite subsets of one group.
#[derive(Clone)]
pub struct FolnerFamily {
    owner: Arc<GroupSpec>,
    kind: Kind,
}

impl fmt::Debug for FolnerFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FolnerFamily")
            .field("name", &self.name())
            .field("owner", &self.owner)
            .finish()
    }
}

fn isqrt(l: u64) -> i64 {
    l.isqrt() as i64
}

impl FamilyDescriptor {
    pub fn owner(&self) -> Result<GroupSpec> {
        Ok(match self {
            FamilyDescriptor::ZmBox { m } | FamilyDescriptor::ZmSqrtBox { m } => {
                if *m == 0 {
                    return Err(Error::InvalidFamily("m must be >= 1".into()));
                }
                GroupSpec::free_abelian(*m)
            }
            FamilyDescriptor::HeisenbergSqrt { n } => {
                if *n == 0 {
                    return Err(Error::InvalidFamily("n must be >= 1".into()));
                }
                GroupSpec::heisenberg_shear(*n)
            }
            FamilyDescriptor::Product {
                normal,
                acting,
                action,
            } => {
                let (n, h) = (normal.owner()?, acting.owner()?);
                if *action == ActionRule::Trivial {
                    GroupSpec::direct(n, h)
                } else {
                    let g = GroupSpec::semidirect(n, h, *action);
                    g.validate()?;
                    g
                }
            }
            FamilyDescriptor::Singletons { group } => {
                group.validate()?;
                group.clone()
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            FamilyDescriptor::ZmBox { m } => format!("zm_box(m={m})"),
            FamilyDescriptor::ZmSqrtBox { m } => format!("zm_sqrt_box(m={m})"),
            FamilyDescriptor::HeisenbergSqrt { n } => format!("heisenberg_sqrt(n={n})"),
            FamilyDescriptor::Product {
                normal,
                acting,
                action,
            } => format!("product({}, {}, {})", normal.name(), acting.name(), action.name()),
            FamilyDescriptor::Singletons { .. } => "singletons".into(),
        }
    }

    /// Coordinate ranges of `F_l` when it is a box, in coordinate order.
    fn box_ranges(&self, l: u64) -> Option<Vec<(i64, i64)>> {
        match self {
            FamilyDescriptor::ZmBox { m } => Some(vec![(-(l as i64), l as i64); *m]),
            FamilyDescriptor::ZmSqrtBox { m } => {
                let s = isqrt(l);
                Some(vec![(-s, s); *m])
            }
            FamilyDescriptor::HeisenbergSqrt { n } => {
                let s = isqrt(l);
                Some(vec![(-s, s); 2 * n + 1])
            }
            FamilyDescriptor::Product { normal, acting, .. } => {
                let mut r = normal.box_ranges(l)?;
                r.extend(acting.box_ranges(l)?);
                Some(r)
            }
            FamilyDescriptor::Singletons { .. } => None,
        }
    }
}

impl FolnerFamily {
    pub fn builtin(desc: FamilyDescriptor) -> Result<Self> {
        let owner = Arc::new(desc.owner()?);
        Ok(FolnerFamily {
            owner,
            kind: Kind::Builtin(desc),
        })
    }

    pub fn zm_box(m: usize) -> Result<Self> {
        Self::builtin(FamilyDescriptor::ZmBox { m })
    }

    pub fn zm_sqrt_box(m: usize) -> Result<Self> {
        Self::builtin(FamilyDescriptor::ZmSqrtBox { m })
    }

    pub fn heisenberg_sqrt(n: usize) -> Result<Self> {
        Self::builtin(FamilyDescriptor::HeisenbergSqrt { n })
    }

    pub fn singletons(group: GroupSpec) -> Result<Self> {
        Self::builtin(FamilyDescriptor::Singletons { group })
    }

    /// `F_l = N_l x H_l`. Both factors must be built-in families.
    pub fn product(normal: &FolnerFamily, acting: &FolnerFamily, action: ActionRule) -> Result<Self> {
        match (&normal.kind, &acting.kind) {
            (Kind::Builtin(n), Kind::Builtin(h)) => Self::builtin(FamilyDescriptor::Product {
                normal: Box::new(n.clone()),
                acting: Box::new(h.clone()),
                action,
            }),
            _ => Err(Error::InvalidFamily("product factors must be built-in families".into())),
        }
    }

    /// A family given by an arbitrary generator; not serializable.
    pub fn custom(owner: Arc<GroupSpec>, name: impl Into<String>, generator: Generator) -> Self {
        FolnerFamily {
            owner,
            kind: Kind::Custom {
                name: name.into(),
                generator,
            },
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let desc: FamilyDescriptor =
            serde_json::from_str(s).map_err(|e| Error::InvalidFamily(e.to_string()))?;
        Self::builtin(desc)
    }

    pub fn descriptor(&self) -> Option<&FamilyDescriptor> {
        match &self.kind {
            Kind::Builtin(d) => Some(d),
            Kind::Custom { .. } => None,
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            Kind::Builtin(d) => d.name(),
            Kind::Custom { name, .. } => name.clone(),
        }
    }

    pub fn owner(&self) -> &Arc<GroupSpec> {
        &self.owner
    }

    /// `F_l`, for `l >= 1`.
    pub fn member(&self, l: u64) -> Result<FiniteSubset> {
        if l == 0 {
            return Err(Error::Precondition("family indices start at 1".into()));
        }
        match &self.kind {
            Kind::Custom { generator, .. } => {
                let f = generator(l)?;
                if f.owner() != self.owner.as_ref() {
                    return Err(Error::OwnerMismatch);
                }
                Ok(f)
            }
            Kind::Builtin(FamilyDescriptor::Singletons { .. }) => {
                Ok(FiniteSubset::identity(self.owner.clone()))
            }
            Kind::Builtin(d) => {
                let ranges = d.box_ranges(l).expect("box-shaped built-in");
                Ok(FiniteSubset::from_trusted(self.owner.clone(), box_points(&ranges)))
            }
        }
    }

    /// The family `l -> F_l^-1`.
    pub fn inverted(&self) -> FolnerFamily {
        let base = self.clone();
        FolnerFamily::custom(
            self.owner.clone(),
            format!("inverse({})", self.name()),
            Arc::new(move |l| base.member(l)?.set_inverse()),
        )
    }
}

/// Memoizes family members and collapses identical ones to a shared id.
struct MemberCache<'a> {
    family: &'a FolnerFamily,
    by_index: BTreeMap<u64, usize>,
    sets: Vec<Arc<FiniteSubset>>,
    ids: FxHashMap<Arc<FiniteSubset>, usize>,
}

impl<'a> MemberCache<'a> {
    fn new(family: &'a FolnerFamily) -> Self {
        MemberCache {
            family,
            by_index: BTreeMap::new(),
            sets: Vec::new(),
            ids: FxHashMap::default(),
        }
    }

    fn id(&mut self, l: u64) -> Result<usize> {
        if let Some(&id) = self.by_index.get(&l) {
            return Ok(id);
        }
        let set = Arc::new(self.family.member(l)?);
        let id = match self.ids.get(&set) {
            Some(&id) => id,
            None => {
                let id = self.sets.len();
                self.sets.push(set.clone());
                self.ids.insert(set, id);
                id
            }
        };
        self.by_index.insert(l, id);
        Ok(id)
    }

    fn get(&mut self, l: u64) -> Result<Arc<FiniteSubset>> {
        let id = self.id(l)?;
        Ok(self.sets[id].clone())
    }
}

/// `|gF △ F| / |F|`
pub fn folner_defect(f: &FiniteSubset, g: &GroupElement) -> Result<Rational> {
    if f.is_empty() {
        return Err(Error::Precondition("Følner defect of the empty set".into()));
    }
    let gf = f.translate(g)?;
    let sym = gf.symmetric_difference_len(f)?;
    Ok(Rational::new(sym as i64, f.len() as i64))
}

#[derive(Clone, Debug)]
pub struct WafcEntry {
    pub index: u64,
    pub size: usize,
    pub witness: CoverWitness,
    pub symmetric: bool,
    pub verdict: Verdict,
    /// Defect against each standard generator, in generator order.
    pub defects: Vec<Rational>,
}

#[derive(Clone, Debug)]
pub struct WafcReport {
    pub family: String,
    pub l_budget: usize,
    pub entries: Vec<WafcEntry>,
    /// Largest per-index constant found (an upper bound where not exact).
    pub sup_l: usize,
    pub all_exact: bool,
    pub all_symmetric: bool,
    pub verdict: Verdict,
}

impl WafcReport {
    pub fn tested_range(&self) -> Option<(u64, u64)> {
        Some((self.entries.first()?.index, self.entries.last()?.index))
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::json!({
            "family": self.family,
            "L_budget": self.l_budget,
            "sup_L": self.sup_l,
            "all_exact": self.all_exact,
            "all_symmetric": self.all_symmetric,
            "verdict": self.verdict,
            "scope": match self.tested_range() {
                Some((a, b)) => format!("verified for {a} <= l <= {b}"),
                None => "no indices tested".into(),
            },
            "entries": self.entries.iter().map(|e| serde_json::json!({
                "index": e.index,
                "size": e.size,
                "symmetric": e.symmetric,
                "verdict": e.verdict,
                "witness": e.witness.to_value(),
                "defects": e.defects.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }

    /// `index,size,L,mode,symmetric,defect_0,...`
    pub fn to_csv(&self) -> String {
        let gens = self.entries.first().map_or(0, |e| e.defects.len());
        let mut out = String::from("index,size,L,mode,symmetric");
        for k in 0..gens {
            out.push_str(&format!(",defect_{k}"));
        }
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}",
                e.index,
                e.size,
                e.witness.L(),
                if e.witness.is_exact() { "exact" } else { "greedy" },
                e.symmetric
            ));
            for d in &e.defects {
                out.push_str(&format!(",{d}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Computes `L_{F_l}` for each tested index and checks `L_{F_l} <= l_budget`.
pub fn check_wafc(
    family: &FolnerFamily,
    indices: &[u64],
    l_budget: usize,
    budget: &CoverBudget,
) -> Result<WafcReport> {
    let gens = family.owner.standard_generators();
    let entries = indices
        .par_iter()
        .map(|&l| {
            let f = family.member(l)?;
            let witness = cover::covering_number(&f, budget)?;
            let Decision { verdict, .. } = decide_bound(&witness, l_budget);
            let defects = gens
                .iter()
                .map(|g| folner_defect(&f, g))
                .collect::<Result<Vec<_>>>()?;
            Ok(WafcEntry {
                index: l,
                size: f.len(),
                symmetric: f.is_symmetric()?,
                witness,
                verdict,
                defects,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WafcReport {
        family: family.name(),
        l_budget,
        sup_l: entries.iter().map(|e| e.witness.L()).max().unwrap_or(0),
        all_exact: entries.iter().all(|e| e.witness.is_exact()),
        all_symmetric: entries.iter().all(|e| e.symmetric),
        verdict: Verdict::all(entries.iter().map(|e| e.verdict)),
        entries,
    })
}

fn decide_bound(w: &CoverWitness, l: usize) -> Decision {
    let verdict = if w.L() <= l {
        Verdict::True
    } else if w.is_exact() || w.lower_bound() > l {
        Verdict::False
    } else {
        Verdict::Indeterminate
    };
    Decision {
        verdict,
        witness: Some(w.clone()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AfcResult {
    pub l1: u64,
    pub l2: u64,
    pub holds: bool,
    /// First element of `F_{l1+l2}` (canonical order) outside `F_{l1} F_{l2}`.
    pub counterexample: Option<GroupElement>,
}

/// First `x` in `target` not in `left * right`, if any.
fn first_outside_product(
    target: &FiniteSubset,
    left: &FiniteSubset,
    right: &FiniteSubset,
) -> Result<Option<GroupElement>> {
    let spec = target.owner();
    let left_inv = left
        .iter()
        .map(|a| spec.inverse(a))
        .collect::<Result<Vec<_>>>()?;
    let right_set: FxHashSet<&GroupElement> = right.iter().collect();
    let found = target
        .elements()
        .par_iter()
        .map(|x| {
            for a in &left_inv {
                if right_set.contains(&spec.multiply(a, x)?) {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(found
        .iter()
        .position(|&missing| missing)
        .map(|i| target.elements()[i].clone()))
}

/// Exact test of `F_{l1+l2} ⊆ F_{l1} F_{l2}` for each pair.
pub fn check_afc_containment(family: &FolnerFamily, pairs: &[(u64, u64)]) -> Result<Vec<AfcResult>> {
    let mut cache = MemberCache::new(family);
    let mut memo: FxHashMap<(usize, usize, usize), Option<GroupElement>> = FxHashMap::default();
    let mut out = Vec::with_capacity(pairs.len());
    for &(l1, l2) in pairs {
        if l1 == 0 || l2 == 0 {
            return Err(Error::Precondition("family indices start at 1".into()));
        }
        let key = (cache.id(l1)?, cache.id(l2)?, cache.id(l1 + l2)?);
        let cex = match memo.get(&key) {
            Some(c) => c.clone(),
            None => {
                let (a, b, c) = (cache.get(l1)?, cache.get(l2)?, cache.get(l1 + l2)?);
                let r = first_outside_product(&c, &a, &b)?;
                memo.insert(key, r.clone());
                r
            }
        };
        out.push(AfcResult {
            l1,
            l2,
            holds: cex.is_none(),
            counterexample: cex,
        });
    }
    Ok(out)
}

/// All ordered pairs `1 <= l1, l2 <= max`.
pub fn all_pairs(max: u64) -> Vec<(u64, u64)> {
    (1..=max).flat_map(|a| (1..=max).map(move |b| (a, b))).collect()
}

#[derive(Clone, Debug)]
pub struct SafcEntry {
    pub index: u64,
    /// `None` when no cover by translates from `F_l` exists.
    pub witness: Option<CoverWitness>,
    pub verdict: Verdict,
}

/// Per index: does a cover of `F_l^-1 F_l` by translates `a F_l`, `a` in
/// `F_l`, exist? Witnesses are the minimal (or best found) such covers.
pub fn check_safc_witnesses(
    family: &FolnerFamily,
    indices: &[u64],
    budget: &CoverBudget,
) -> Result<Vec<SafcEntry>> {
    indices
        .par_iter()
        .map(|&l| {
            let f = family.member(l)?;
            let witness = cover::strong_covering_number(&f, budget)?;
            if let Some(w) = &witness {
                debug_assert!(w.translates().iter().all(|g| f.contains(g)));
            }
            Ok(SafcEntry {
                index: l,
                verdict: Verdict::from_bool(witness.is_some()),
                witness,
            })
        })
        .collect()
}

/// How `ξ(i, j)` is obtained for hypothesis (1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiRule {
    /// Minimal index whose member contains the image, searched up to
    /// `xi_search_max`.
    Inferred,
    /// `ξ(i, j) = j`, the rule for the trivial action.
    Identity,
    /// Index whose square-root box has radius `s_j (1 + s_i)`, `s_k = isqrt(k)`:
    /// the shear image of a radius-`s_j` box under `|h| <= s_i`.
    SqrtShear,
}

impl XiRule {
    fn closed_form(self, i: u64, j: u64) -> Option<u64> {
        match self {
            XiRule::Inferred => None,
            XiRule::Identity => Some(j),
            XiRule::SqrtShear => {
                let r = j.isqrt() * (1 + i.isqrt());
                Some(r * r)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SdpConfig {
    pub m: u64,
    pub xi: XiRule,
    /// Indices `1..=scale_max` for `i, j` in (1).
    pub scale_max: u64,
    /// Largest index searched when inferring `ξ`.
    pub xi_search_max: u64,
    pub epsilon: Rational,
    /// Threshold `K` for (2); indices `K..=density_max` are tested.
    pub k: u64,
    pub density_max: u64,
    /// Elements `(a, b)` of `N x H` tested in (2).
    pub test_elements: Vec<(GroupElement, GroupElement)>,
    /// Indices `1..=l_max` for `l1, l2` in (3).
    pub l_max: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContainmentFailure {
    pub i: u64,
    pub j: u64,
    pub xi: Option<u64>,
    pub witness: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct XiFailure {
    pub i: u64,
    pub xi_ii: u64,
    pub limit: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DensityFailure {
    pub a: Vec<i64>,
    pub b: Vec<i64>,
    pub l: u64,
    /// `|a α_b(N_l) ∩ N_l| / |N_l|`
    pub ratio: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntersectionFailure {
    pub l1: u64,
    pub l2: u64,
    pub x: Vec<i64>,
    pub b: Vec<i64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SdpReport {
    pub xi_rule: XiRule,
    pub containment: Verdict,
    pub containment_failures: Vec<ContainmentFailure>,
    pub xi_bound: Verdict,
    pub xi_bound_failures: Vec<XiFailure>,
    pub density: Verdict,
    pub density_failures: Vec<DensityFailure>,
    pub density_checked: usize,
    pub intersection: Verdict,
    pub intersection_failures: Vec<IntersectionFailure>,
    pub intersection_failure_count: usize,
    pub intersection_checked: usize,
}

impl SdpReport {
    pub fn hypothesis1(&self) -> Verdict {
        self.containment.and(self.xi_bound)
    }

    pub fn all(&self) -> Verdict {
        Verdict::all([self.hypothesis1(), self.density, self.intersection])
    }
}

const MAX_LISTED_FAILURES: usize = 32;

/// Finite-scale check of the three semidirect-product hypotheses for
/// families `N_l` (normal) and `H_l` (acting) under `action`.
pub fn check_sdp_hypotheses(
    normal: &FolnerFamily,
    acting: &FolnerFamily,
    action: ActionRule,
    cfg: &SdpConfig,
) -> Result<SdpReport> {
    let nspec = normal.owner().clone();
    let hspec = acting.owner().clone();
    GroupSpec::semidirect(nspec.as_ref().clone(), hspec.as_ref().clone(), action).validate()?;
    let act = |b: &GroupElement, n: &GroupElement| action.act(&nspec, b, n);

    let mut ncache = MemberCache::new(normal);
    let mut hcache = MemberCache::new(acting);

    // (1) α_{H_i}(N_j) ⊆ N_ξ(i,j)
    let mut containment_failures = Vec::new();
    let mut xi_of = BTreeMap::new();
    for i in 1..=cfg.scale_max {
        let h = hcache.get(i)?;
        for j in 1..=cfg.scale_max {
            let nj = ncache.get(j)?;
            let mut image = Vec::with_capacity(h.len() * nj.len());
            for b in h.iter() {
                for n in nj.iter() {
                    image.push(act(b, n)?);
                }
            }
            let image = FiniteSubset::from_trusted(nspec.clone(), image);
            let xi = match cfg.xi.closed_form(i, j) {
                Some(x) => Some(x),
                None => infer_index(&mut ncache, &image, cfg.xi_search_max)?,
            };
            let miss = match xi {
                Some(x) => {
                    let target = ncache.get(x.max(1))?;
                    image.iter().find(|g| !target.contains(g)).cloned()
                }
                None => image.iter().next().cloned(),
            };
            if let Some(w) = miss {
                containment_failures.push(ContainmentFailure {
                    i,
                    j,
                    xi,
                    witness: w.coords().to_vec(),
                });
            }
            if i == j {
                xi_of.insert(i, xi);
            }
        }
    }
    let mut xi_bound_failures = Vec::new();
    for (&i, xi) in &xi_of {
        let limit = i * cfg.m;
        match xi {
            Some(x) if *x <= limit => {}
            Some(x) => xi_bound_failures.push(XiFailure { i, xi_ii: *x, limit }),
            None => xi_bound_failures.push(XiFailure {
                i,
                xi_ii: u64::MAX,
                limit,
            }),
        }
    }
    // members are nested, so the inferred ξ(i,i) is the least admissible one;
    // a search that ran out of indices decides nothing
    let xi_bound = if xi_bound_failures.iter().any(|f| f.xi_ii != u64::MAX) {
        Verdict::False
    } else if !xi_bound_failures.is_empty() {
        Verdict::Indeterminate
    } else {
        Verdict::True
    };

    // (2) |a α_b(N_l) ∩ N_l| > (1 - ε)|N_l|
    let mut density_failures = Vec::new();
    let mut density_checked = 0;
    let threshold = Rational::from_integer(1) - cfg.epsilon;
    for (a, b) in &cfg.test_elements {
        if !nspec.contains(a) || !hspec.contains(b) {
            return Err(Error::MalformedElement {
                expected: nspec.dim() + hspec.dim(),
                got: a.len() + b.len(),
            });
        }
        for l in cfg.k.max(1)..=cfg.density_max {
            let nl = ncache.get(l)?;
            let mut hits = 0usize;
            for n in nl.iter() {
                if nl.contains(&nspec.multiply(a, &act(b, n)?)?) {
                    hits += 1;
                }
            }
            density_checked += 1;
            let ratio = Rational::new(hits as i64, nl.len() as i64);
            if ratio <= threshold {
                density_failures.push(DensityFailure {
                    a: a.coords().to_vec(),
                    b: b.coords().to_vec(),
                    l,
                    ratio: ratio.to_string(),
                });
            }
        }
    }

    // (3) N_{l1} x ∩ α_b(N_{l2}) ≠ ∅ for x in N_{l1+l2}, b in H_{l1}
    let mut intersection_failures = Vec::new();
    let mut intersection_failure_count = 0;
    let mut intersection_checked = 0;
    let mut memo: FxHashMap<(usize, usize, usize, usize), Vec<(GroupElement, GroupElement)>> =
        FxHashMap::default();
    for l1 in 1..=cfg.l_max {
        for l2 in 1..=cfg.l_max {
            let key = (ncache.id(l1)?, ncache.id(l2)?, ncache.id(l1 + l2)?, hcache.id(l1)?);
            let (n1, n2, n12, h1) = (ncache.get(l1)?, ncache.get(l2)?, ncache.get(l1 + l2)?, hcache.get(l1)?);
            intersection_checked += n12.len() * h1.len();
            let fails = match memo.get(&key) {
                Some(f) => f.clone(),
                None => {
                    let f = intersection_misses(&nspec, &hspec, action, &n1, &n2, &n12, &h1)?;
                    memo.insert(key, f.clone());
                    f
                }
            };
            intersection_failure_count += fails.len();
            for (x, b) in fails {
                if intersection_failures.len() < MAX_LISTED_FAILURES {
                    intersection_failures.push(IntersectionFailure {
                        l1,
                        l2,
                        x: x.coords().to_vec(),
                        b: b.coords().to_vec(),
                    });
                }
            }
        }
    }

    containment_failures.truncate(MAX_LISTED_FAILURES);
    density_failures.truncate(MAX_LISTED_FAILURES);
    Ok(SdpReport {
        xi_rule: cfg.xi,
        containment: Verdict::from_bool(containment_failures.is_empty()),
        containment_failures,
        xi_bound,
        xi_bound_failures,
        density: Verdict::from_bool(density_failures.is_empty()),
        density_failures,
        density_checked,
        intersection: Verdict::from_bool(intersection_failure_count == 0),
        intersection_failures,
        intersection_failure_count,
        intersection_checked,
    })
}

/// Smallest index `k <= max` with `image ⊆ N_k`, assuming nested members.
fn infer_index(cache: &mut MemberCache<'_>, image: &FiniteSubset, max: u64) -> Result<Option<u64>> {
    let fits = |cache: &mut MemberCache<'_>, k: u64| -> Result<bool> {
        let nk = cache.get(k)?;
        Ok(image.iter().all(|g| nk.contains(g)))
    };
    if !fits(cache, max)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (1u64, max);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if fits(cache, mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(lo))
}

/// Pairs `(x, b)` with `N_{l1} x ∩ α_b(N_{l2}) = ∅`.
fn intersection_misses(
    nspec: &GroupSpec,
    hspec: &GroupSpec,
    action: ActionRule,
    n1: &FiniteSubset,
    n2: &FiniteSubset,
    n12: &FiniteSubset,
    h1: &FiniteSubset,
) -> Result<Vec<(GroupElement, GroupElement)>> {
    let pairs: Vec<(&GroupElement, &GroupElement)> =
        n12.iter().flat_map(|x| h1.iter().map(move |b| (x, b))).collect();
    let misses = pairs
        .par_iter()
        .map(|&(x, b)| {
            // n x ∈ α_b(N_{l2})  iff  α_{b^-1}(n x) ∈ N_{l2}
            let b_inv = hspec.inverse(b)?;
            for n in n1.iter() {
                let y = action.act(nspec, &b_inv, &nspec.multiply(n, x)?)?;
                if n2.contains(&y) {
                    return Ok(None);
                }
            }
            Ok(Some((x.clone(), b.clone())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(misses.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_defect() {
        let fam = FolnerFamily::zm_box(1).unwrap();
        for n in 1..6u64 {
            let f = fam.member(n).unwrap();
            assert_eq!(
                folner_defect(&f, &GroupElement::new(&[1])).unwrap(),
                Rational::new(2, 2 * n as i64 + 1)
            );
            assert_eq!(folner_defect(&f, &GroupElement::new(&[0])).unwrap(), Rational::from_integer(0));
        }
    }

    #[test]
    fn heisenberg_members_are_boxes() {
        let fam = FolnerFamily::heisenberg_sqrt(1).unwrap();
        let f = fam.member(9).unwrap();
        assert_eq!(f.len(), 7 * 7 * 7);
        assert!(f.contains_identity());
        // ((a,b),t)^-1 = ((tb - a, -b), -t) leaves the box
        assert!(!f.is_symmetric().unwrap());
        assert!(f.is_subset(&fam.member(10).unwrap()).unwrap());
    }

    #[test]
    fn descriptors_parse() {
        let f = FolnerFamily::from_json(r#"{"family":"heisenberg_sqrt","n":1}"#).unwrap();
        assert_eq!(f.owner().as_ref(), &GroupSpec::heisenberg_shear(1));
        assert!(FolnerFamily::from_json(r#"{"family":"zm_box"}"#).is_err());
        assert!(FolnerFamily::from_json(r#"{"family":"nope","m":1}"#).is_err());
        let p = FolnerFamily::product(
            &FolnerFamily::zm_box(1).unwrap(),
            &FolnerFamily::zm_box(1).unwrap(),
            ActionRule::Trivial,
        )
        .unwrap();
        assert_eq!(p.owner().as_ref(), &GroupSpec::direct(GroupSpec::free_abelian(1), GroupSpec::free_abelian(1)));
        assert_eq!(
            p.member(2).unwrap().elements(),
            FolnerFamily::zm_box(2).unwrap().member(2).unwrap().elements()
        );
    }

    #[test]
    fn zero_index_rejected() {
        assert!(FolnerFamily::zm_box(1).unwrap().member(0).is_err());
    }

    #[test]
    fn afc_on_intervals() {
        let fam = FolnerFamily::zm_box(1).unwrap();
        assert!(check_afc_containment(&fam, &all_pairs(6)).unwrap().iter().all(|r| r.holds));
    }

    #[test]
    fn singleton_family_is_strong() {
        let fam = FolnerFamily::singletons(GroupSpec::heisenberg(1)).unwrap();
        let r = check_safc_witnesses(&fam, &[1, 2, 3], &CoverBudget::default()).unwrap();
        assert!(r.iter().all(|e| e.verdict == Verdict::True && e.witness.as_ref().unwrap().L() == 1));
    }
}
