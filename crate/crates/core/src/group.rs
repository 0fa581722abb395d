//! Concrete computable groups and their elements.
//!
//! Every element is a fixed-length integer vector whose meaning is given by
//! the [`GroupSpec`] it belongs to. All arithmetic is overflow-checked.

use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type Coords = SmallVec<[i64; 8]>;

/// An element of a [`GroupSpec`], stored as its coordinate vector.
///
/// Ordering is lexicographic on coordinates, which is the canonical order used
/// throughout the crate.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupElement(pub Coords);

impl GroupElement {
    pub fn new(coords: &[i64]) -> Self {
        GroupElement(Coords::from_slice(coords))
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

impl From<Vec<i64>> for GroupElement {
    fn from(v: Vec<i64>) -> Self {
        GroupElement(Coords::from_vec(v))
    }
}

/// Closed-form action of the acting factor on the normal factor of a
/// semidirect product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionRule {
    /// Every acting element is the identity automorphism.
    Trivial,
    /// Acting group Z on Z^{2k} = (a, b) with a, b in Z^k, by
    /// `l . (a, b) = (a + l b, b)`. For k = 1 the product is the discrete
    /// Heisenberg group H_3(Z).
    HeisenbergShear,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupSpec {
    FreeAbelian {
        rank: usize,
    },
    /// H_{2n+1}(Z) in coordinates (a, b, c) with a, b in Z^n and
    /// `(a, b, c)(a', b', c') = (a + a', b + b', c + c' + a.b')`.
    Heisenberg {
        n: usize,
    },
    DirectProduct {
        left: Box<GroupSpec>,
        right: Box<GroupSpec>,
    },
    /// Coordinates are the normal factor's followed by the acting factor's,
    /// with `(a1, b1)(a2, b2) = (a1 . act(b1, a2), b1 b2)`.
    SemidirectProduct {
        normal: Box<GroupSpec>,
        acting: Box<GroupSpec>,
        action: ActionRule,
    },
    FiniteCyclic {
        order: i64,
    },
}

#[inline]
fn add(a: i64, b: i64) -> Result<i64> {
    a.checked_add(b).ok_or(Error::Overflow)
}

#[inline]
fn mul(a: i64, b: i64) -> Result<i64> {
    a.checked_mul(b).ok_or(Error::Overflow)
}

#[inline]
fn neg(a: i64) -> Result<i64> {
    a.checked_neg().ok_or(Error::Overflow)
}

impl GroupSpec {
    pub fn free_abelian(rank: usize) -> Self {
        GroupSpec::FreeAbelian { rank }
    }

    pub fn heisenberg(n: usize) -> Self {
        GroupSpec::Heisenberg { n }
    }

    pub fn cyclic(order: i64) -> Self {
        GroupSpec::FiniteCyclic { order }
    }

    pub fn direct(left: GroupSpec, right: GroupSpec) -> Self {
        GroupSpec::DirectProduct {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn semidirect(normal: GroupSpec, acting: GroupSpec, action: ActionRule) -> Self {
        GroupSpec::SemidirectProduct {
            normal: Box::new(normal),
            acting: Box::new(acting),
            action,
        }
    }

    /// Z^{2k} x| Z under the shear action.
    pub fn heisenberg_shear(k: usize) -> Self {
        Self::semidirect(
            Self::free_abelian(2 * k),
            Self::free_abelian(1),
            ActionRule::HeisenbergShear,
        )
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: GroupSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("group descriptors always serialize")
    }

    /// Checks the structural parameters (ranks, orders, action compatibility).
    pub fn validate(&self) -> Result<()> {
        match self {
            GroupSpec::FreeAbelian { rank } if *rank == 0 => {
                Err(Error::InvalidSpec("free abelian rank must be >= 1".into()))
            }
            GroupSpec::Heisenberg { n } if *n == 0 => {
                Err(Error::InvalidSpec("heisenberg parameter must be >= 1".into()))
            }
            GroupSpec::FiniteCyclic { order } if *order < 1 => {
                Err(Error::InvalidSpec("cyclic order must be >= 1".into()))
            }
            GroupSpec::DirectProduct { left, right } => {
                left.validate()?;
                right.validate()
            }
            GroupSpec::SemidirectProduct {
                normal,
                acting,
                action,
            } => {
                normal.validate()?;
                acting.validate()?;
                if *action == ActionRule::HeisenbergShear {
                    match (normal.as_ref(), acting.as_ref()) {
                        (GroupSpec::FreeAbelian { rank }, GroupSpec::FreeAbelian { rank: 1 })
                            if rank % 2 == 0 => {}
                        _ => {
                            return Err(Error::InvalidSpec(
                                "heisenberg_shear needs normal Z^{2k} and acting Z".into(),
                            ))
                        }
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Number of integer coordinates of an element.
    pub fn dim(&self) -> usize {
        match self {
            GroupSpec::FreeAbelian { rank } => *rank,
            GroupSpec::Heisenberg { n } => 2 * n + 1,
            GroupSpec::DirectProduct { left, right } => left.dim() + right.dim(),
            GroupSpec::SemidirectProduct { normal, acting, .. } => normal.dim() + acting.dim(),
            GroupSpec::FiniteCyclic { .. } => 1,
        }
    }

    pub fn is_abelian(&self) -> bool {
        match self {
            GroupSpec::FreeAbelian { .. } | GroupSpec::FiniteCyclic { .. } => true,
            GroupSpec::Heisenberg { .. } => false,
            GroupSpec::DirectProduct { left, right } => left.is_abelian() && right.is_abelian(),
            GroupSpec::SemidirectProduct {
                normal,
                acting,
                action,
            } => *action == ActionRule::Trivial && normal.is_abelian() && acting.is_abelian(),
        }
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(smallvec::smallvec![0; self.dim()])
    }

    /// Builds an element, reducing cyclic coordinates into `[0, q)`.
    pub fn element(&self, coords: &[i64]) -> Result<GroupElement> {
        self.check_len(coords)?;
        let mut v = Coords::from_slice(coords);
        self.reduce(&mut v);
        Ok(GroupElement(v))
    }

    /// True iff `g` has the right length and canonical cyclic coordinates.
    pub fn contains(&self, g: &GroupElement) -> bool {
        if g.len() != self.dim() {
            return false;
        }
        let mut v = g.0.clone();
        self.reduce(&mut v);
        v == g.0
    }

    fn check_len(&self, coords: &[i64]) -> Result<()> {
        if coords.len() != self.dim() {
            return Err(Error::MalformedElement {
                expected: self.dim(),
                got: coords.len(),
            });
        }
        Ok(())
    }

    fn reduce(&self, v: &mut [i64]) {
        match self {
            GroupSpec::FiniteCyclic { order } => v[0] = v[0].rem_euclid(*order),
            GroupSpec::DirectProduct { left, right } => {
                let (l, r) = v.split_at_mut(left.dim());
                left.reduce(l);
                right.reduce(r);
            }
            GroupSpec::SemidirectProduct { normal, acting, .. } => {
                let (l, r) = v.split_at_mut(normal.dim());
                normal.reduce(l);
                acting.reduce(r);
            }
            _ => {}
        }
    }

    pub fn multiply(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.check_len(&g.0)?;
        self.check_len(&h.0)?;
        let mut out: Coords = smallvec::smallvec![0; self.dim()];
        self.mul_into(&g.0, &h.0, &mut out)?;
        Ok(GroupElement(out))
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        self.check_len(&g.0)?;
        let mut out: Coords = smallvec::smallvec![0; self.dim()];
        self.inv_into(&g.0, &mut out)?;
        Ok(GroupElement(out))
    }

    /// `g h g^-1 h^-1`
    pub fn commutator(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        let gh = self.multiply(g, h)?;
        let hg = self.multiply(h, g)?;
        self.multiply(&gh, &self.inverse(&hg)?)
    }

    pub fn commutes(&self, g: &GroupElement, h: &GroupElement) -> Result<bool> {
        Ok(self.multiply(g, h)? == self.multiply(h, g)?)
    }

    /// Symmetric generating set: unit vectors for the free abelian and
    /// Heisenberg parts, the generators of both factors for products.
    pub fn standard_generators(&self) -> Vec<GroupElement> {
        let dim = self.dim();
        let mut out = Vec::new();
        self.push_generators(0, dim, &mut out);
        let mut sym = Vec::with_capacity(out.len() * 2);
        for g in out {
            let inv = self.inverse(&g).expect("unit generators never overflow");
            sym.push(g);
            sym.push(inv);
        }
        sym.sort();
        sym.dedup();
        sym.retain(|g| *g != self.identity());
        sym
    }

    fn push_generators(&self, offset: usize, total: usize, out: &mut Vec<GroupElement>) {
        let unit = |i: usize| {
            let mut v: Coords = smallvec::smallvec![0; total];
            v[offset + i] = 1;
            GroupElement(v)
        };
        match self {
            GroupSpec::FreeAbelian { rank } => out.extend((0..*rank).map(unit)),
            // the c-coordinate is generated by commutators
            GroupSpec::Heisenberg { n } => out.extend((0..2 * n).map(unit)),
            GroupSpec::FiniteCyclic { order } => {
                if *order > 1 {
                    out.push(unit(0))
                }
            }
            GroupSpec::DirectProduct { left, right } => {
                left.push_generators(offset, total, out);
                right.push_generators(offset + left.dim(), total, out);
            }
            GroupSpec::SemidirectProduct { normal, acting, .. } => {
                normal.push_generators(offset, total, out);
                acting.push_generators(offset + normal.dim(), total, out);
            }
        }
    }

    pub(crate) fn mul_into(&self, g: &[i64], h: &[i64], out: &mut [i64]) -> Result<()> {
        match self {
            GroupSpec::FreeAbelian { .. } => {
                for i in 0..g.len() {
                    out[i] = add(g[i], h[i])?;
                }
            }
            GroupSpec::FiniteCyclic { order } => {
                out[0] = ((g[0] as i128 + h[0] as i128).rem_euclid(*order as i128)) as i64;
            }
            GroupSpec::Heisenberg { n } => {
                let n = *n;
                let mut dot = 0i64;
                for i in 0..n {
                    dot = add(dot, mul(g[i], h[n + i])?)?;
                }
                for i in 0..2 * n {
                    out[i] = add(g[i], h[i])?;
                }
                out[2 * n] = add(add(g[2 * n], h[2 * n])?, dot)?;
            }
            GroupSpec::DirectProduct { left, right } => {
                let k = left.dim();
                let (ol, or) = out.split_at_mut(k);
                left.mul_into(&g[..k], &h[..k], ol)?;
                right.mul_into(&g[k..], &h[k..], or)?;
            }
            GroupSpec::SemidirectProduct {
                normal,
                acting,
                action,
            } => {
                let k = normal.dim();
                let mut acted: Coords = smallvec::smallvec![0; k];
                action.apply(normal, &g[k..], &h[..k], &mut acted)?;
                let (on, oa) = out.split_at_mut(k);
                normal.mul_into(&g[..k], &acted, on)?;
                acting.mul_into(&g[k..], &h[k..], oa)?;
            }
        }
        Ok(())
    }

    pub(crate) fn inv_into(&self, g: &[i64], out: &mut [i64]) -> Result<()> {
        match self {
            GroupSpec::FreeAbelian { .. } => {
                for i in 0..g.len() {
                    out[i] = neg(g[i])?;
                }
            }
            GroupSpec::FiniteCyclic { order } => out[0] = (-(g[0] as i128)).rem_euclid(*order as i128) as i64,
            GroupSpec::Heisenberg { n } => {
                let n = *n;
                let mut dot = 0i64;
                for i in 0..n {
                    dot = add(dot, mul(g[i], g[n + i])?)?;
                }
                for i in 0..2 * n {
                    out[i] = neg(g[i])?;
                }
                out[2 * n] = add(neg(g[2 * n])?, dot)?;
            }
            GroupSpec::DirectProduct { left, right } => {
                let k = left.dim();
                let (ol, or) = out.split_at_mut(k);
                left.inv_into(&g[..k], ol)?;
                right.inv_into(&g[k..], or)?;
            }
            GroupSpec::SemidirectProduct {
                normal,
                acting,
                action,
            } => {
                // (a, b)^-1 = (act(b^-1, a^-1), b^-1)
                let k = normal.dim();
                let mut a_inv: Coords = smallvec::smallvec![0; k];
                normal.inv_into(&g[..k], &mut a_inv)?;
                let (on, oa) = out.split_at_mut(k);
                acting.inv_into(&g[k..], oa)?;
                action.apply(normal, oa, &a_inv, on)?;
            }
        }
        Ok(())
    }
}

impl ActionRule {
    /// Writes `act(h, n)` into `out`. `normal` is the group `n` lives in.
    pub(crate) fn apply(self, normal: &GroupSpec, h: &[i64], n: &[i64], out: &mut [i64]) -> Result<()> {
        match self {
            ActionRule::Trivial => out.copy_from_slice(n),
            ActionRule::HeisenbergShear => {
                let k = normal.dim() / 2;
                let l = h[0];
                for i in 0..k {
                    out[i] = add(n[i], mul(l, n[k + i])?)?;
                    out[k + i] = n[k + i];
                }
            }
        }
        Ok(())
    }

    /// `act(h, n)` on whole elements of the acting and normal groups.
    pub fn act(self, normal: &GroupSpec, h: &GroupElement, n: &GroupElement) -> Result<GroupElement> {
        let mut out: Coords = smallvec::smallvec![0; normal.dim()];
        self.apply(normal, &h.0, &n.0, &mut out)?;
        Ok(GroupElement(out))
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionRule::Trivial => "trivial",
            ActionRule::HeisenbergShear => "heisenberg_shear",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn el(v: &[i64]) -> GroupElement {
        GroupElement::new(v)
    }

    #[test]
    fn shear_product_examples() {
        let g = GroupSpec::heisenberg_shear(1);
        assert_eq!(
            g.multiply(&el(&[1, 0, 0]), &el(&[0, 1, 0])).unwrap(),
            el(&[1, 1, 0])
        );
        // act(1, (0,1)) = (1,1)
        assert_eq!(
            g.multiply(&el(&[0, 0, 1]), &el(&[0, 1, 0])).unwrap(),
            el(&[1, 1, 1])
        );
        let x = el(&[3, -2, 5]);
        assert_eq!(g.multiply(&g.identity(), &x).unwrap(), x);
    }

    #[test]
    fn shear_inverse_example() {
        let g = GroupSpec::heisenberg_shear(1);
        // (act(-1, (-1,-1)), -1) = ((0,-1),-1)
        assert_eq!(g.inverse(&el(&[1, 1, 1])).unwrap(), el(&[0, -1, -1]));
        assert_eq!(g.inverse(&g.identity()).unwrap(), g.identity());
    }

    #[test]
    fn integer_inverse() {
        let z = GroupSpec::free_abelian(1);
        assert_eq!(z.inverse(&el(&[3])).unwrap(), el(&[-3]));
    }

    #[test]
    fn heisenberg_law() {
        let h = GroupSpec::heisenberg(1);
        let x = el(&[1, 0, 0]);
        let y = el(&[0, 1, 0]);
        assert_eq!(h.commutator(&x, &y).unwrap(), el(&[0, 0, 1]));
        let g = el(&[2, -3, 7]);
        assert_eq!(h.multiply(&g, &h.inverse(&g).unwrap()).unwrap(), h.identity());
    }

    #[test]
    fn malformed_and_overflow() {
        let z2 = GroupSpec::free_abelian(2);
        assert_eq!(
            z2.multiply(&el(&[1]), &el(&[1, 2])),
            Err(Error::MalformedElement { expected: 2, got: 1 })
        );
        assert_eq!(
            z2.multiply(&el(&[i64::MAX, 0]), &el(&[1, 0])),
            Err(Error::Overflow)
        );
        let s = GroupSpec::heisenberg_shear(1);
        assert_eq!(
            s.multiply(&el(&[0, 0, i64::MAX / 2]), &el(&[0, 3, 0])),
            Err(Error::Overflow)
        );
    }

    #[test]
    fn cyclic_reduces() {
        let c = GroupSpec::cyclic(5);
        assert_eq!(c.element(&[-1]).unwrap(), el(&[4]));
        assert_eq!(c.multiply(&el(&[3]), &el(&[4])).unwrap(), el(&[2]));
        assert_eq!(c.inverse(&el(&[2])).unwrap(), el(&[3]));
        assert!(!c.contains(&el(&[7])));
    }

    #[test]
    fn descriptors_round_trip() {
        let spec = GroupSpec::direct(GroupSpec::heisenberg_shear(1), GroupSpec::cyclic(3));
        let back = GroupSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
        assert_eq!(
            GroupSpec::from_json(r#"{"kind":"heisenberg","n":1}"#).unwrap(),
            GroupSpec::heisenberg(1)
        );
        assert!(GroupSpec::from_json(r#"{"kind":"heisenberg","n":0}"#).is_err());
        assert!(GroupSpec::from_json(r#"{"kind":"heisenberg","n":1,"extra":2}"#).is_err());
        let bad = r#"{"kind":"semidirect_product","normal":{"kind":"free_abelian","rank":3},
                     "acting":{"kind":"free_abelian","rank":1},"action":"heisenberg_shear"}"#;
        assert!(GroupSpec::from_json(bad).is_err());
    }

    #[test]
    fn shear_is_an_action() {
        let n = GroupSpec::free_abelian(2);
        let a = ActionRule::HeisenbergShear;
        let v = el(&[4, -3]);
        assert_eq!(a.act(&n, &el(&[0]), &v).unwrap(), v);
        let twice = a.act(&n, &el(&[2]), &a.act(&n, &el(&[-5]), &v).unwrap()).unwrap();
        assert_eq!(twice, a.act(&n, &el(&[-3]), &v).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn shear_el() -> impl Strategy<Value = GroupElement> {
            prop::collection::vec(-50i64..50, 3).prop_map(|v| GroupElement::new(&v))
        }

        proptest! {
            #[test]
            fn shear_is_associative(x in shear_el(), y in shear_el(), z in shear_el()) {
                let g = GroupSpec::heisenberg_shear(1);
                let l = g.multiply(&g.multiply(&x, &y).unwrap(), &z).unwrap();
                let r = g.multiply(&x, &g.multiply(&y, &z).unwrap()).unwrap();
                prop_assert_eq!(l, r);
            }

            #[test]
            fn shear_inverse_cancels(x in shear_el()) {
                let g = GroupSpec::heisenberg_shear(1);
                let inv = g.inverse(&x).unwrap();
                prop_assert_eq!(g.multiply(&x, &inv).unwrap(), g.identity());
                prop_assert_eq!(g.multiply(&inv, &x).unwrap(), g.identity());
            }
        }
    }
}
