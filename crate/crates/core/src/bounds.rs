//! Closed-form dimension bounds in terms of the covering constant `L_G`, the
//! covering dimension `d` and the embedding parameter `m`.
//!
//! Values named `*_plus1` follow the `D^{+1} = D + 1` convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInput {
    pub l_g: u64,
    pub d: u64,
    #[serde(default)]
    pub m: Option<u64>,
}

impl BoundInput {
    pub fn validate(&self) -> Result<()> {
        if self.l_g == 0 {
            return Err(Error::Precondition("L_G must be >= 1".into()));
        }
        if self.m == Some(0) {
            return Err(Error::Precondition("m must be >= 1".into()));
        }
        Ok(())
    }
}

fn lg_d1(l_g: u64, d: u64) -> Result<u64> {
    if l_g == 0 {
        return Err(Error::Precondition("L_G must be >= 1".into()));
    }
    d.checked_add(1).and_then(|x| x.checked_mul(l_g)).ok_or(Error::Overflow)
}

/// `dim_Rok <= L_G (d+1) - 1`
pub fn rokhlin_bound(l_g: u64, d: u64) -> Result<u64> {
    Ok(lg_d1(l_g, d)? - 1)
}

/// `dim_am^{+1} <= L_G (d+1)`
pub fn amenability_bound(l_g: u64, d: u64) -> Result<u64> {
    lg_d1(l_g, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NuclearBounds {
    pub dad_plus1: u64,
    pub tow_plus1: u64,
    pub ftow_plus1: u64,
    pub nuc_plus1: u64,
}

/// `dad^{+1} <= L_G (d+1)`, and `L_G (d+1)^2` for the tower, fine tower and
/// nuclear dimensions.
pub fn nuclear_and_tower_bounds(l_g: u64, d: u64) -> Result<NuclearBounds> {
    let dad = lg_d1(l_g, d)?;
    let sq = dad.checked_mul(d + 1).ok_or(Error::Overflow)?;
    Ok(NuclearBounds {
        dad_plus1: dad,
        tow_plus1: sq,
        ftow_plus1: sq,
        nuc_plus1: sq,
    })
}

/// `Q = (L_G (d+1) + 1) m + 1`
pub fn embedding_bound(l_g: u64, d: u64, m: u64) -> Result<u64> {
    if m == 0 {
        return Err(Error::Precondition("m must be >= 1".into()));
    }
    lg_d1(l_g, d)?
        .checked_add(1)
        .and_then(|x| x.checked_mul(m))
        .and_then(|x| x.checked_add(1))
        .ok_or(Error::Overflow)
}

/// `2 L_A L_{A^-1} + L_A + L_{A^-1}`
pub fn symmetrization_bound(l_a: u64, l_a_inv: u64) -> Result<u64> {
    if l_a == 0 || l_a_inv == 0 {
        return Err(Error::Precondition("covering constants are >= 1".into()));
    }
    l_a.checked_mul(l_a_inv)
        .and_then(|x| x.checked_mul(2))
        .and_then(|x| x.checked_add(l_a))
        .and_then(|x| x.checked_add(l_a_inv))
        .ok_or(Error::Overflow)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundEntry {
    pub name: &'static str,
    pub formula: &'static str,
    pub raw: u64,
    pub plus1: u64,
}

/// Every bound for `input`, in a fixed order.
pub fn evaluate(input: &BoundInput) -> Result<Vec<BoundEntry>> {
    input.validate()?;
    let (l, d) = (input.l_g, input.d);
    let rok = rokhlin_bound(l, d)?;
    let nb = nuclear_and_tower_bounds(l, d)?;
    let mut out = vec![
        BoundEntry {
            name: "rok",
            formula: "dim_Rok <= L_G*(d+1) - 1",
            raw: rok,
            plus1: rok + 1,
        },
        BoundEntry {
            name: "am",
            formula: "dim_am^{+1} <= L_G*(d+1)",
            raw: amenability_bound(l, d)? - 1,
            plus1: amenability_bound(l, d)?,
        },
        BoundEntry {
            name: "dad",
            formula: "dad^{+1} <= L_G*(d+1)",
            raw: nb.dad_plus1 - 1,
            plus1: nb.dad_plus1,
        },
        BoundEntry {
            name: "tow",
            formula: "dim_tow^{+1} <= L_G*(d+1)^2",
            raw: nb.tow_plus1 - 1,
            plus1: nb.tow_plus1,
        },
        BoundEntry {
            name: "ftow",
            formula: "dim_ftow^{+1} <= L_G*(d+1)^2",
            raw: nb.ftow_plus1 - 1,
            plus1: nb.ftow_plus1,
        },
        BoundEntry {
            name: "nuc",
            formula: "dim_nuc^{+1} <= L_G*(d+1)^2",
            raw: nb.nuc_plus1 - 1,
            plus1: nb.nuc_plus1,
        },
    ];
    if let Some(m) = input.m {
        let q = embedding_bound(l, d, m)?;
        out.push(BoundEntry {
            name: "Q",
            formula: "Q = (L_G*(d+1) + 1)*m + 1 (assumes mdim < m/2)",
            raw: q,
            plus1: q + 1,
        });
    }
    Ok(out)
}

pub fn report(input: &BoundInput) -> Result<serde_json::Value> {
    let entries = evaluate(input)?;
    let summary: serde_json::Map<String, serde_json::Value> = entries
        .iter()
        .map(|e| {
            let v = if e.name == "rok" || e.name == "Q" { e.raw } else { e.plus1 };
            (e.name.to_string(), v.into())
        })
        .collect();
    Ok(serde_json::json!({
        "input": input,
        "summary": summary,
        "bounds": entries,
    }))
}
