//! Covering constants of approximate groups.
//!
//! `L_A` is the least number of left translates `g A` needed to cover
//! `A^-1 A`. Only translates meeting `A^-1 A` can help, and those are exactly
//! the elements of `(A^-1 A) A^-1`, so minimizing over that finite candidate
//! set is minimizing over the whole group.

use std::time::{Duration, Instant};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupSpec};
use crate::setcover::{self, CoverSystem, ExactLimits};
use crate::subset::FiniteSubset;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverBudget {
    /// Universes larger than this skip the exact search.
    pub max_universe: usize,
    /// Branch-and-bound node cap.
    pub max_nodes: u64,
    /// Wall-clock cap on the exact search, in seconds.
    pub time_cap: f64,
}

impl Default for CoverBudget {
    fn default() -> Self {
        CoverBudget {
            max_universe: 60_000,
            max_nodes: 2_000_000,
            time_cap: 30.0,
        }
    }
}

impl CoverBudget {
    pub fn validate(&self) -> Result<()> {
        if self.max_universe == 0 || self.max_nodes == 0 || !(self.time_cap > 0.0) {
            return Err(Error::Precondition("cover budget fields must be positive".into()));
        }
        Ok(())
    }

    fn limits(&self) -> ExactLimits {
        ExactLimits {
            max_nodes: self.max_nodes,
            deadline: Some(Instant::now() + Duration::from_secs_f64(self.time_cap)),
            ..ExactLimits::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverMode {
    /// `L` is certified minimal.
    Exact,
    /// `L` is only an upper bound.
    Greedy,
}

/// Three-valued answer to an existential question under a search budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    True,
    False,
    Indeterminate,
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::True
        } else {
            Verdict::False
        }
    }

    /// Conjunction where any indeterminate poisons a non-false result.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::False, _) | (_, Verdict::False) => Verdict::False,
            (Verdict::True, Verdict::True) => Verdict::True,
            _ => Verdict::Indeterminate,
        }
    }

    pub fn all(it: impl IntoIterator<Item = Verdict>) -> Verdict {
        it.into_iter().fold(Verdict::True, Verdict::and)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::True => "true",
            Verdict::False => "false",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

/// A cover of `A^-1 A` by left translates of `A`, re-verified on construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverWitness {
    l: usize,
    translates: Vec<GroupElement>,
    universe: FiniteSubset,
    mode: CoverMode,
    lower_bound: usize,
}

impl CoverWitness {
    /// Fails unless `translates` really cover `universe` with copies of `set`.
    pub fn new(
        set: &FiniteSubset,
        universe: FiniteSubset,
        mut translates: Vec<GroupElement>,
        mode: CoverMode,
        lower_bound: usize,
    ) -> Result<Self> {
        translates.sort();
        translates.dedup();
        if !covers(set, &universe, &translates)? {
            return Err(Error::Precondition("translates do not cover the universe".into()));
        }
        let l = translates.len();
        Ok(CoverWitness {
            l,
            translates,
            universe,
            mode,
            lower_bound: if mode == CoverMode::Exact { l } else { lower_bound.min(l) },
        })
    }

    #[allow(non_snake_case)]
    pub fn L(&self) -> usize {
        self.l
    }

    pub fn translates(&self) -> &[GroupElement] {
        &self.translates
    }

    pub fn universe(&self) -> &FiniteSubset {
        &self.universe
    }

    pub fn mode(&self) -> CoverMode {
        self.mode
    }

    pub fn is_exact(&self) -> bool {
        self.mode == CoverMode::Exact
    }

    /// Certified lower bound on the true constant.
    pub fn lower_bound(&self) -> usize {
        self.lower_bound
    }

    /// `{"L":..., "mode":..., "translates":[[...]], "verified":true}`
    pub fn to_value(&self) -> serde_json::Value {
        serde_json::json!({
            "L": self.l,
            "mode": self.mode,
            "lower_bound": self.lower_bound,
            "translates": self.translates.iter().map(|g| g.coords().to_vec()).collect::<Vec<_>>(),
            "universe_size": self.universe.len(),
            "verified": true,
        })
    }
}

/// True iff `universe` is contained in the union of `g set` over `translates`.
pub fn covers(set: &FiniteSubset, universe: &FiniteSubset, translates: &[GroupElement]) -> Result<bool> {
    set.same_owner(universe)?;
    let mut covered = vec![false; universe.len()];
    let index = universe.index();
    let spec = set.owner();
    for g in translates {
        for a in set {
            if let Some(&i) = index.get(&spec.multiply(g, a)?) {
                covered[i as usize] = true;
            }
        }
    }
    Ok(covered.into_iter().all(|c| c))
}

/// Translates `c A` of a fixed set, restricted to a finite universe.
pub(crate) struct TranslateSystem<'a> {
    spec: &'a GroupSpec,
    set: &'a [GroupElement],
    set_inv: Vec<GroupElement>,
    universe: &'a FiniteSubset,
    universe_index: FxHashMap<GroupElement, u32>,
    candidates: &'a [GroupElement],
    candidate_index: FxHashMap<GroupElement, u32>,
}

impl<'a> TranslateSystem<'a> {
    pub(crate) fn new(set: &'a FiniteSubset, universe: &'a FiniteSubset, candidates: &'a FiniteSubset) -> Result<Self> {
        let spec = set.owner();
        let set_inv = set
            .iter()
            .map(|a| spec.inverse(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(TranslateSystem {
            spec,
            set: set.elements(),
            set_inv,
            universe,
            universe_index: universe.index(),
            candidates: candidates.elements(),
            candidate_index: candidates.index(),
        })
    }
}

// A product that overflows cannot lie in the universe or candidate set.
impl CoverSystem for TranslateSystem<'_> {
    fn universe_len(&self) -> usize {
        self.universe.len()
    }

    fn num_sets(&self) -> usize {
        self.candidates.len()
    }

    fn members(&self, set: usize, out: &mut Vec<u32>) {
        out.clear();
        let c = &self.candidates[set];
        for a in self.set {
            if let Ok(u) = self.spec.multiply(c, a) {
                if let Some(&i) = self.universe_index.get(&u) {
                    out.push(i);
                }
            }
        }
    }

    fn containing(&self, elem: usize, out: &mut Vec<u32>) {
        out.clear();
        let u = &self.universe.elements()[elem];
        for a in &self.set_inv {
            if let Ok(c) = self.spec.multiply(u, a) {
                if let Some(&i) = self.candidate_index.get(&c) {
                    out.push(i);
                }
            }
        }
    }
}

fn require_identity(a: &FiniteSubset) -> Result<()> {
    if !a.contains_identity() {
        return Err(Error::Precondition("the set must contain the identity".into()));
    }
    Ok(())
}

/// `{g : gA meets A^-1 A} = (A^-1 A) A^-1`
pub fn candidate_translates(a: &FiniteSubset) -> Result<FiniteSubset> {
    require_identity(a)?;
    let inv = a.set_inverse()?;
    inv.set_product(a)?.set_product(&inv)
}

/// Outcome of a search restricted to a given candidate family.
pub(crate) enum Solved {
    Witness(CoverWitness),
    /// Some universe element is in no candidate translate.
    Infeasible,
}

/// Minimum cover of `universe` by translates `c set`, `c` in `candidates`.
pub(crate) fn solve_over(
    set: &FiniteSubset,
    universe: &FiniteSubset,
    candidates: &FiniteSubset,
    budget: &CoverBudget,
) -> Result<Solved> {
    budget.validate()?;
    let sys = TranslateSystem::new(set, universe, candidates)?;
    let Some(greedy) = setcover::greedy(&sys) else {
        return Ok(Solved::Infeasible);
    };
    let (chosen, mode, lb) = if universe.len() <= budget.max_universe {
        let out = setcover::exact(&sys, greedy, budget.limits());
        let mode = if out.optimal { CoverMode::Exact } else { CoverMode::Greedy };
        (out.best, mode, out.lower_bound)
    } else {
        let lb = universe.len().div_ceil(set.len());
        (greedy, CoverMode::Greedy, lb)
    };
    let translates = chosen.iter().map(|&i| candidates.elements()[i].clone()).collect();
    Ok(Solved::Witness(CoverWitness::new(set, universe.clone(), translates, mode, lb)?))
}

/// `L_A` with a verified witness. Falls back to an upper bound (mode
/// `greedy`) when the exact search runs out of budget.
pub fn covering_number(a: &FiniteSubset, budget: &CoverBudget) -> Result<CoverWitness> {
    let candidates = candidate_translates(a)?;
    covering_number_over(a, &candidates, budget)
}

/// Like [`covering_number`] but with an explicit candidate family, which must
/// cover `A^-1 A`.
pub fn covering_number_over(a: &FiniteSubset, candidates: &FiniteSubset, budget: &CoverBudget) -> Result<CoverWitness> {
    require_identity(a)?;
    a.same_owner(candidates)?;
    let universe = a.set_inverse()?.set_product(a)?;
    match solve_over(a, &universe, candidates, budget)? {
        Solved::Witness(w) => Ok(w),
        Solved::Infeasible => Err(Error::Precondition(
            "candidate translates do not cover A^-1 A".into(),
        )),
    }
}

/// Strong covering constant: translates restricted to elements of `A`.
/// `Ok(None)` when `A^-1 A` is not covered by `{aA : a in A}` at all.
pub fn strong_covering_number(a: &FiniteSubset, budget: &CoverBudget) -> Result<Option<CoverWitness>> {
    require_identity(a)?;
    let universe = a.set_inverse()?.set_product(a)?;
    match solve_over(a, &universe, a, budget)? {
        Solved::Witness(w) => Ok(Some(w)),
        Solved::Infeasible => Ok(None),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decision {
    pub verdict: Verdict,
    pub witness: Option<CoverWitness>,
}

fn decide(witness: Option<CoverWitness>, l: usize) -> Decision {
    match witness {
        None => Decision {
            verdict: Verdict::False,
            witness: None,
        },
        Some(w) if w.L() <= l => Decision {
            verdict: Verdict::True,
            witness: Some(w),
        },
        Some(w) if w.is_exact() || w.lower_bound() > l => Decision {
            verdict: Verdict::False,
            witness: None,
        },
        Some(_) => Decision {
            verdict: Verdict::Indeterminate,
            witness: None,
        },
    }
}

/// Is `A^-1 A` covered by at most `l` left translates of `A`?
pub fn is_approximate(a: &FiniteSubset, l: usize, budget: &CoverBudget) -> Result<Decision> {
    Ok(decide(Some(covering_number(a, budget)?), l))
}

/// Same question with translates drawn from `A` itself.
pub fn is_strongly_approximate(a: &FiniteSubset, l: usize, budget: &CoverBudget) -> Result<Decision> {
    Ok(decide(strong_covering_number(a, budget)?, l))
}

/// `2 L_A L_{A^-1} + L_A + L_{A^-1}`
pub fn symmetrization_bound(l_a: usize, l_a_inv: usize) -> usize {
    2 * l_a * l_a_inv + l_a + l_a_inv
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SymmetrizationReport {
    pub l_a: usize,
    pub l_a_inv: usize,
    pub l_b: usize,
    pub bound: usize,
    pub holds: bool,
    /// All three constants solved exactly; otherwise `holds` is not a proof.
    pub certifying: bool,
}

/// Computes `L_A`, `L_{A^-1}`, `L_B` for `B = A u A^-1` and compares `L_B`
/// with the symmetrization bound.
pub fn symmetrization_bound_check(a: &FiniteSubset, budget: &CoverBudget) -> Result<SymmetrizationReport> {
    let inv = a.set_inverse()?;
    let b = a.union(&inv)?;
    let wa = covering_number(a, budget)?;
    let wi = covering_number(&inv, budget)?;
    let wb = covering_number(&b, budget)?;
    let bound = symmetrization_bound(wa.L(), wi.L());
    Ok(SymmetrizationReport {
        l_a: wa.L(),
        l_a_inv: wi.L(),
        l_b: wb.L(),
        bound,
        holds: wb.L() <= bound,
        certifying: wa.is_exact() && wi.is_exact() && wb.is_exact(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn z() -> Arc<GroupSpec> {
        Arc::new(GroupSpec::free_abelian(1))
    }

    fn subset(owner: &Arc<GroupSpec>, coords: &[&[i64]]) -> Result<FiniteSubset> {
        FiniteSubset::from_coords(owner.clone(), coords)
    }

    fn interval(owner: &Arc<GroupSpec>, lo: i64, hi: i64) -> FiniteSubset {
        FiniteSubset::integer_box(owner.clone(), lo, hi).unwrap()
    }

    #[test]
    fn candidates_of_small_sets() {
        let z = z();
        assert_eq!(
            candidate_translates(&FiniteSubset::identity(z.clone())).unwrap(),
            FiniteSubset::identity(z.clone())
        );
        assert_eq!(candidate_translates(&interval(&z, -1, 1)).unwrap(), interval(&z, -3, 3));
        let z2 = Arc::new(GroupSpec::free_abelian(2));
        assert_eq!(
            candidate_translates(&interval(&z2, -1, 1)).unwrap(),
            interval(&z2, -3, 3)
        );
    }

    #[test]
    fn identity_required() {
        let z = z();
        let a = interval(&z, 1, 3);
        assert!(matches!(candidate_translates(&a), Err(Error::Precondition(_))));
        assert!(matches!(covering_number(&a, &CoverBudget::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn trivial_set_has_constant_one() {
        let w = covering_number(&FiniteSubset::identity(z()), &CoverBudget::default()).unwrap();
        assert_eq!(w.L(), 1);
        assert!(w.is_exact());
    }

    #[test]
    fn interval_constant_is_two() {
        let z = z();
        let w = covering_number(&interval(&z, -5, 5), &CoverBudget::default()).unwrap();
        assert_eq!(w.L(), 2);
        assert!(w.is_exact());
    }

    #[test]
    fn approximate_verdicts_for_interval() {
        let z = z();
        let n = 4;
        let a = interval(&z, -n, n);
        let budget = CoverBudget::default();
        let d = is_approximate(&a, 2, &budget).unwrap();
        assert_eq!(d.verdict, Verdict::True);
        assert_eq!(is_approximate(&a, 1, &budget).unwrap().verdict, Verdict::False);
        let s = is_strongly_approximate(&a, 2, &budget).unwrap();
        assert_eq!(s.verdict, Verdict::True);
        let w = s.witness.unwrap();
        assert!(w.translates().iter().all(|g| a.contains(g)));
        assert_eq!(
            w.translates(),
            &[GroupElement::new(&[-n]), GroupElement::new(&[n])]
        );
    }

    #[test]
    fn strong_cover_can_be_infeasible() {
        // A = {0, 5}: A^-1 A = {-5, 0, 5}, translates aA = {0,5},{5,10}; -5 is never covered
        let z = z();
        let a = subset(&z, &[&[0], &[5]]).unwrap();
        assert_eq!(strong_covering_number(&a, &CoverBudget::default()).unwrap(), None);
        assert_eq!(
            is_strongly_approximate(&a, 10, &CoverBudget::default()).unwrap().verdict,
            Verdict::False
        );
        assert_eq!(covering_number(&a, &CoverBudget::default()).unwrap().L(), 2);
    }

    #[test]
    fn witness_rejects_non_cover() {
        let z = z();
        let a = interval(&z, -2, 2);
        let u = a.set_inverse().unwrap().set_product(&a).unwrap();
        assert!(CoverWitness::new(&a, u, vec![GroupElement::new(&[0])], CoverMode::Greedy, 1).is_err());
    }

    #[test]
    fn witness_json_shape() {
        let z = z();
        let w = covering_number(&interval(&z, -1, 1), &CoverBudget::default()).unwrap();
        let v = w.to_value();
        assert_eq!(v["L"], 2);
        assert_eq!(v["mode"], "exact");
        assert_eq!(v["verified"], true);
        assert_eq!(v["translates"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn symmetric_set_bound_is_trivial() {
        let z = z();
        let r = symmetrization_bound_check(&interval(&z, -3, 3), &CoverBudget::default()).unwrap();
        assert_eq!(r.l_a, r.l_b);
        assert_eq!(r.l_a_inv, r.l_b);
        assert!(r.holds && r.certifying);
    }

    #[test]
    fn bound_for_zero_one_two() {
        let z = z();
        let r = symmetrization_bound_check(&interval(&z, 0, 2), &CoverBudget::default()).unwrap();
        // A^-1 A = {-2..2} needs two copies of {0,1,2}; B = {-2..2}, B^2 = {-4..4} needs two
        assert_eq!((r.l_a, r.l_a_inv, r.l_b), (2, 2, 2));
        assert_eq!(r.bound, 12);
        assert!(r.holds && r.certifying);
    }

    #[test]
    fn verdict_algebra() {
        use Verdict::*;
        assert_eq!(True.and(Indeterminate), Indeterminate);
        assert_eq!(Indeterminate.and(False), False);
        assert_eq!(Verdict::all([True, True]), True);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small_set() -> impl Strategy<Value = Vec<i64>> {
            prop::collection::btree_set(-6i64..6, 0..6).prop_map(|s| {
                let mut v: Vec<i64> = s.into_iter().collect();
                v.push(0);
                v
            })
        }

        fn from_ints(owner: &Arc<GroupSpec>, v: &[i64]) -> FiniteSubset {
            FiniteSubset::new(owner.clone(), v.iter().map(|&x| GroupElement::new(&[x]))).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn witness_covers_and_inverse_obeys_bound(v in small_set()) {
                let z = z();
                let a = from_ints(&z, &v);
                let w = covering_number(&a, &CoverBudget::default()).unwrap();
                prop_assert!(w.is_exact());
                let universe = a.set_inverse().unwrap().set_product(&a).unwrap();
                prop_assert!(covers(&a, &universe, w.translates()).unwrap());
                prop_assert!(w.L() * a.len() >= universe.len());
                let r = symmetrization_bound_check(&a, &CoverBudget::default()).unwrap();
                prop_assert!(r.holds);
            }

            #[test]
            fn translating_back_to_identity_keeps_the_constant(v in small_set(), shift in 0usize..6) {
                // A x^-1 contains e for x in A, and (A x^-1)^-1 (A x^-1) is a conjugate of A^-1 A
                let z = z();
                let a = from_ints(&z, &v);
                let x = a.elements()[shift % a.len()].clone();
                let b = a.translate_right(&z.inverse(&x).unwrap()).unwrap();
                let la = covering_number(&a, &CoverBudget::default()).unwrap().L();
                let lb = covering_number(&b, &CoverBudget::default()).unwrap().L();
                prop_assert_eq!(la, lb);
            }
        }
    }
}
