//! Word-metric balls, growth profiles and centralizers.

use std::sync::Arc;

use rustc_hash::FxHashSet;

use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::subset::{FiniteSubset, GeneratingSet};

pub const DEFAULT_BALL_BUDGET: usize = 5_000_000;

/// Spheres `S_0, S_1, ..., S_n` of the Cayley graph, each in canonical order.
pub fn spheres(gens: &GeneratingSet, radius: u32, budget: usize) -> Result<Vec<Vec<GroupElement>>> {
    let spec = gens.owner();
    let e = spec.identity();
    let mut seen: FxHashSet<GroupElement> = FxHashSet::default();
    seen.insert(e.clone());
    let mut layers = vec![vec![e]];
    for k in 1..=radius {
        let mut next = Vec::new();
        for g in layers.last().expect("at least the identity layer") {
            for s in gens.gens() {
                let h = spec.multiply(g, s)?;
                if seen.insert(h.clone()) {
                    next.push(h);
                    if seen.len() > budget {
                        return Err(Error::BudgetExceeded { radius: k, budget });
                    }
                }
            }
        }
        next.sort_unstable();
        layers.push(next);
    }
    Ok(layers)
}

/// `B_n`: elements expressible as words of length at most `n` in `gens`.
pub fn ball(gens: &GeneratingSet, radius: u32) -> Result<FiniteSubset> {
    ball_with_budget(gens, radius, DEFAULT_BALL_BUDGET)
}

pub fn ball_with_budget(gens: &GeneratingSet, radius: u32, budget: usize) -> Result<FiniteSubset> {
    let layers = spheres(gens, radius, budget)?;
    let owner = Arc::clone(gens.gens().owner_arc());
    Ok(FiniteSubset::from_trusted(owner, layers.into_iter().flatten().collect()))
}

/// `[#(0), #(1), ..., #(n_max)]` with `#(k) = |B_k|`.
pub fn growth_profile(gens: &GeneratingSet, n_max: u32) -> Result<Vec<usize>> {
    growth_profile_with_budget(gens, n_max, DEFAULT_BALL_BUDGET)
}

pub fn growth_profile_with_budget(gens: &GeneratingSet, n_max: u32, budget: usize) -> Result<Vec<usize>> {
    let layers = spheres(gens, n_max, budget)?;
    let mut total = 0;
    Ok(layers
        .iter()
        .map(|s| {
            total += s.len();
            total
        })
        .collect())
}

/// `{g in search : gz = zg for all z in J}`
pub fn centralizer_in_ball(j: &FiniteSubset, search: &FiniteSubset) -> Result<FiniteSubset> {
    j.same_owner(search)?;
    let spec = search.owner();
    let mut out = Vec::new();
    for g in search {
        let mut central = true;
        for z in j {
            if !spec.commutes(g, z)? {
                central = false;
                break;
            }
        }
        if central {
            out.push(g.clone());
        }
    }
    Ok(FiniteSubset::from_trusted(Arc::clone(search.owner_arc()), out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupSpec;

    #[test]
    fn interval_and_diamond() {
        let z = Arc::new(GroupSpec::free_abelian(1));
        let s = GeneratingSet::standard(z).unwrap();
        assert_eq!(growth_profile(&s, 3).unwrap(), vec![1, 3, 5, 7]);

        let z2 = Arc::new(GroupSpec::free_abelian(2));
        let s = GeneratingSet::standard(z2).unwrap();
        assert_eq!(growth_profile(&s, 2).unwrap()[2], 13);
    }

    #[test]
    fn budget_is_enforced() {
        let z2 = Arc::new(GroupSpec::free_abelian(2));
        let s = GeneratingSet::standard(z2).unwrap();
        assert!(matches!(
            ball_with_budget(&s, 10, 50),
            Err(Error::BudgetExceeded { budget: 50, .. })
        ));
    }

    #[test]
    fn abelian_centralizer_is_everything() {
        let z2 = Arc::new(GroupSpec::free_abelian(2));
        let s = GeneratingSet::standard(z2.clone()).unwrap();
        let b = ball(&s, 3).unwrap();
        let j = FiniteSubset::from_coords(z2, &[&[1, 2], &[-3, 0]]).unwrap();
        assert_eq!(centralizer_in_ball(&j, &b).unwrap(), b);
    }

    #[test]
    fn identity_centralizer_is_everything() {
        let h = Arc::new(GroupSpec::heisenberg(1));
        let s = GeneratingSet::standard(h.clone()).unwrap();
        let b = ball(&s, 3).unwrap();
        let j = FiniteSubset::identity(h);
        assert_eq!(centralizer_in_ball(&j, &b).unwrap(), b);
    }

    #[test]
    fn heisenberg_centralizer_is_center() {
        let h = Arc::new(GroupSpec::heisenberg(1));
        let s = GeneratingSet::standard(h.clone()).unwrap();
        let b = ball(&s, 6).unwrap();
        let j = FiniteSubset::from_coords(h, &[&[1, 0, 0], &[0, 1, 0]]).unwrap();
        let c = centralizer_in_ball(&j, &b).unwrap();
        assert!(c.len() > 1);
        assert!(c.iter().all(|g| g.coords()[0] == 0 && g.coords()[1] == 0));
        // every central element of the ball is found
        let expected = b.iter().filter(|g| g.coords()[0] == 0 && g.coords()[1] == 0).count();
        assert_eq!(c.len(), expected);
    }
}
