use std::sync::Arc;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupSpec};

/// A finite subset of a group, kept sorted (lexicographically) and
/// duplicate-free.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteSubset {
    owner: Arc<GroupSpec>,
    elements: Vec<GroupElement>,
}

/// Products beyond this many pairs are evaluated in parallel.
const PAR_THRESHOLD: usize = 1 << 14;

impl FiniteSubset {
    /// Builds a subset, validating every element against `owner`.
    pub fn new(owner: Arc<GroupSpec>, elements: impl IntoIterator<Item = GroupElement>) -> Result<Self> {
        let mut elements: Vec<GroupElement> = elements.into_iter().collect();
        for g in &elements {
            if !owner.contains(g) {
                return Err(Error::MalformedElement {
                    expected: owner.dim(),
                    got: g.len(),
                });
            }
        }
        elements.par_sort_unstable();
        elements.dedup();
        Ok(FiniteSubset { owner, elements })
    }

    /// Elements are trusted to belong to `owner`.
    pub(crate) fn from_trusted(owner: Arc<GroupSpec>, mut elements: Vec<GroupElement>) -> Self {
        elements.par_sort_unstable();
        elements.dedup();
        FiniteSubset { owner, elements }
    }

    pub fn from_coords(owner: Arc<GroupSpec>, coords: &[&[i64]]) -> Result<Self> {
        let elems = coords
            .iter()
            .map(|c| owner.element(c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(owner, elems)
    }

    pub fn empty(owner: Arc<GroupSpec>) -> Self {
        FiniteSubset {
            owner,
            elements: Vec::new(),
        }
    }

    pub fn identity(owner: Arc<GroupSpec>) -> Self {
        let e = owner.identity();
        FiniteSubset {
            owner,
            elements: vec![e],
        }
    }

    /// The box `{lo..hi}^m` in Z^m (owner must be free abelian of rank m).
    pub fn integer_box(owner: Arc<GroupSpec>, lo: i64, hi: i64) -> Result<Self> {
        let m = match owner.as_ref() {
            GroupSpec::FreeAbelian { rank } => *rank,
            _ => return Err(Error::InvalidSpec("integer_box needs a free abelian group".into())),
        };
        let ranges = vec![(lo, hi); m];
        Ok(Self::from_trusted(owner, box_points(&ranges)))
    }

    pub fn owner(&self) -> &GroupSpec {
        &self.owner
    }

    pub fn owner_arc(&self) -> &Arc<GroupSpec> {
        &self.owner
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GroupElement> {
        self.elements.iter()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.elements.binary_search(g).is_ok()
    }

    pub fn contains_identity(&self) -> bool {
        self.contains(&self.owner.identity())
    }

    /// Position of each element in canonical order.
    pub fn index(&self) -> FxHashMap<GroupElement, u32> {
        self.elements
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i as u32))
            .collect()
    }

    pub fn hash_set(&self) -> FxHashSet<GroupElement> {
        self.elements.iter().cloned().collect()
    }

    pub(crate) fn same_owner(&self, other: &FiniteSubset) -> Result<()> {
        if Arc::ptr_eq(&self.owner, &other.owner) || self.owner == other.owner {
            Ok(())
        } else {
            Err(Error::OwnerMismatch)
        }
    }

    fn with_elements(&self, elements: Vec<GroupElement>) -> Self {
        Self::from_trusted(self.owner.clone(), elements)
    }

    /// `AB = {ab : a in A, b in B}`
    pub fn set_product(&self, other: &FiniteSubset) -> Result<Self> {
        self.same_owner(other)?;
        let spec = self.owner.as_ref();
        let out: Vec<GroupElement> = if self.len() * other.len() >= PAR_THRESHOLD {
            // dedupe per worker so the pair count never lives in memory at once
            let merged = self
                .elements
                .par_iter()
                .try_fold(FxHashSet::default, |mut acc, a| {
                    for b in &other.elements {
                        acc.insert(spec.multiply(a, b)?);
                    }
                    Ok::<_, Error>(acc)
                })
                .try_reduce(FxHashSet::default, |mut x, y| {
                    if x.len() < y.len() {
                        return Ok(y.into_iter().chain(x).collect());
                    }
                    x.extend(y);
                    Ok(x)
                })?;
            merged.into_iter().collect()
        } else {
            let mut v = Vec::with_capacity(self.len() * other.len());
            for a in &self.elements {
                for b in &other.elements {
                    v.push(spec.multiply(a, b)?);
                }
            }
            v
        };
        Ok(self.with_elements(out))
    }

    pub fn set_inverse(&self) -> Result<Self> {
        let spec = self.owner.as_ref();
        let out = self
            .elements
            .iter()
            .map(|a| spec.inverse(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.with_elements(out))
    }

    /// Left translate `gA`.
    pub fn translate(&self, g: &GroupElement) -> Result<Self> {
        let spec = self.owner.as_ref();
        let out = self
            .elements
            .iter()
            .map(|a| spec.multiply(g, a))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.with_elements(out))
    }

    /// Right translate `Ag`.
    pub fn translate_right(&self, g: &GroupElement) -> Result<Self> {
        let spec = self.owner.as_ref();
        let out = self
            .elements
            .iter()
            .map(|a| spec.multiply(a, g))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.with_elements(out))
    }

    /// `A^-1 u A`
    pub fn symmetrize(&self) -> Result<Self> {
        self.union(&self.set_inverse()?)
    }

    pub fn is_symmetric(&self) -> Result<bool> {
        Ok(self.set_inverse()? == *self)
    }

    pub fn union(&self, other: &FiniteSubset) -> Result<Self> {
        self.same_owner(other)?;
        let mut v = self.elements.clone();
        v.extend(other.elements.iter().cloned());
        Ok(self.with_elements(v))
    }

    pub fn intersection(&self, other: &FiniteSubset) -> Result<Self> {
        self.same_owner(other)?;
        let v = self
            .elements
            .iter()
            .filter(|g| other.contains(g))
            .cloned()
            .collect();
        Ok(FiniteSubset {
            owner: self.owner.clone(),
            elements: v,
        })
    }

    pub fn difference(&self, other: &FiniteSubset) -> Result<Self> {
        self.same_owner(other)?;
        let v = self
            .elements
            .iter()
            .filter(|g| !other.contains(g))
            .cloned()
            .collect();
        Ok(FiniteSubset {
            owner: self.owner.clone(),
            elements: v,
        })
    }

    pub fn symmetric_difference_len(&self, other: &FiniteSubset) -> Result<usize> {
        self.same_owner(other)?;
        let common = self.elements.iter().filter(|g| other.contains(g)).count();
        Ok(self.len() + other.len() - 2 * common)
    }

    pub fn is_subset(&self, other: &FiniteSubset) -> Result<bool> {
        self.same_owner(other)?;
        Ok(self.elements.iter().all(|g| other.contains(g)))
    }

    pub fn is_disjoint(&self, other: &FiniteSubset) -> Result<bool> {
        self.same_owner(other)?;
        Ok(!self.elements.iter().any(|g| other.contains(g)))
    }

    /// Serialized as a JSON array of integer arrays.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_value()).expect("integer arrays always serialize")
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.elements
                .iter()
                .map(|g| serde_json::Value::from(g.coords().to_vec()))
                .collect(),
        )
    }

    pub fn from_json(owner: Arc<GroupSpec>, s: &str) -> Result<Self> {
        let raw: Vec<Vec<i64>> = serde_json::from_str(s)?;
        let elems = raw
            .iter()
            .map(|c| {
                if c.len() != owner.dim() {
                    return Err(Error::MalformedElement {
                        expected: owner.dim(),
                        got: c.len(),
                    });
                }
                if !owner.contains(&GroupElement::new(c)) {
                    return Err(Error::InvalidSpec(format!("{c:?} is not a canonical element")));
                }
                Ok(GroupElement::new(c))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(owner, elems)
    }
}

impl<'a> IntoIterator for &'a FiniteSubset {
    type Item = &'a GroupElement;
    type IntoIter = std::slice::Iter<'a, GroupElement>;

    fn into_iter(self) -> Self::IntoIter {
        self.elements.iter()
    }
}

/// All integer points of a product of closed intervals, in lexicographic order.
pub fn box_points(ranges: &[(i64, i64)]) -> Vec<GroupElement> {
    let mut out: Vec<Vec<i64>> = vec![Vec::new()];
    for &(lo, hi) in ranges {
        let mut next = Vec::with_capacity(out.len() * (hi - lo + 1).max(0) as usize);
        for prefix in &out {
            for x in lo..=hi {
                let mut p = prefix.clone();
                p.push(x);
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter().map(GroupElement::from).collect()
}

/// A symmetric generating set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratingSet {
    gens: FiniteSubset,
}

impl GeneratingSet {
    /// Symmetrizes `gens`; the identity is dropped since it never extends a word.
    pub fn new(gens: FiniteSubset) -> Result<Self> {
        let sym = gens.symmetrize()?;
        let e = sym.owner().identity();
        let elements: Vec<_> = sym.elements.into_iter().filter(|g| *g != e).collect();
        if elements.is_empty() {
            return Err(Error::Precondition("generating set must contain a non-identity element".into()));
        }
        Ok(GeneratingSet {
            gens: FiniteSubset {
                owner: sym.owner,
                elements,
            },
        })
    }

    pub fn standard(owner: Arc<GroupSpec>) -> Result<Self> {
        let gens = owner.standard_generators();
        Self::new(FiniteSubset::new(owner, gens)?)
    }

    pub fn from_coords(owner: Arc<GroupSpec>, coords: &[&[i64]]) -> Result<Self> {
        Self::new(FiniteSubset::from_coords(owner, coords)?)
    }

    pub fn gens(&self) -> &FiniteSubset {
        &self.gens
    }

    pub fn owner(&self) -> &GroupSpec {
        self.gens.owner()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z() -> Arc<GroupSpec> {
        Arc::new(GroupSpec::free_abelian(1))
    }

    fn ints(owner: &Arc<GroupSpec>, xs: &[i64]) -> FiniteSubset {
        FiniteSubset::new(owner.clone(), xs.iter().map(|&x| GroupElement::new(&[x]))).unwrap()
    }

    #[test]
    fn product_of_intervals() {
        let z = z();
        let a = ints(&z, &[0, 1]);
        assert_eq!(a.set_product(&a).unwrap(), ints(&z, &[0, 1, 2]));
    }

    #[test]
    fn symmetrize_example() {
        let z = z();
        let a = ints(&z, &[-1, 0, 2]);
        assert_eq!(a.symmetrize().unwrap(), ints(&z, &[-2, -1, 0, 1, 2]));
        assert!(a.symmetrize().unwrap().is_symmetric().unwrap());
    }

    #[test]
    fn identity_translate() {
        let z = z();
        let a = ints(&z, &[-1, 0, 2]);
        assert_eq!(a.translate(&z.identity()).unwrap(), a);
        assert_eq!(a.translate(&GroupElement::new(&[3])).unwrap(), ints(&z, &[2, 3, 5]));
    }

    #[test]
    fn owner_mismatch() {
        let a = ints(&z(), &[0]);
        let b = FiniteSubset::identity(Arc::new(GroupSpec::free_abelian(2)));
        assert_eq!(a.set_product(&b), Err(Error::OwnerMismatch));
        assert_eq!(a.union(&b), Err(Error::OwnerMismatch));
    }

    #[test]
    fn dedup_and_order() {
        let a = ints(&z(), &[3, -1, 3, 0]);
        let v: Vec<i64> = a.iter().map(|g| g.coords()[0]).collect();
        assert_eq!(v, vec![-1, 0, 3]);
    }

    #[test]
    fn json_array_of_arrays() {
        let owner = Arc::new(GroupSpec::free_abelian(2));
        let a = FiniteSubset::integer_box(owner.clone(), 0, 1).unwrap();
        assert_eq!(a.to_json(), "[[0,0],[0,1],[1,0],[1,1]]");
        assert_eq!(FiniteSubset::from_json(owner.clone(), &a.to_json()).unwrap(), a);
        assert!(FiniteSubset::from_json(owner, "[[1]]").is_err());
    }

    #[test]
    fn generating_set_is_symmetric() {
        let owner = Arc::new(GroupSpec::heisenberg_shear(1));
        let s = GeneratingSet::from_coords(owner, &[&[0, 1, 0], &[0, 0, 1]]).unwrap();
        assert_eq!(s.gens().len(), 4);
        assert!(s.gens().is_symmetric().unwrap());
    }
}
