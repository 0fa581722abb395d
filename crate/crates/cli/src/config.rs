//! Run configurations: what one command computes, independent of how it was
//! requested (flags or a config file).

use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use folnerlab_core::group::GroupSpec;
use folnerlab_core::{ball, CoverBudget, FamilyDescriptor, FiniteSubset, FolnerFamily, GeneratingSet, GroupElement, XiRule};
use serde::{Deserialize, Serialize};

/// A group: shorthand (`z`, `z2`, `zm`, `heis1`, `c5`) or a descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupArg {
    Short(String),
    Spec(GroupSpec),
}

/// A family: built-in name or a descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilyArg {
    Name(String),
    Spec(FamilyDescriptor),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CoverCheck {
    /// Compute `L_A` with a witness.
    #[default]
    Constant,
    /// Decide `L_A <= L`.
    Approximate,
    /// Decide whether a cover with translates inside `A` of size `<= L` exists.
    Strong,
    /// Compare `L_B`, `B = A u A^-1`, with `2 L_A L_{A^-1} + L_A + L_{A^-1}`.
    Symmetrization,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FolnerCheck {
    #[default]
    Wafc,
    Afc,
    Safc,
    Sdp,
    Defect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverConfig {
    pub group: GroupArg,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub set: Option<String>,
    #[serde(default)]
    pub family: Option<FamilyArg>,
    #[serde(default)]
    pub index: Option<u64>,
    #[serde(default)]
    pub check: CoverCheck,
    #[serde(default, rename = "L")]
    pub l: Option<usize>,
    #[serde(default)]
    pub budget: CoverBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdpParams {
    #[serde(rename = "M")]
    pub m_bound: u64,
    pub xi: XiRule,
    /// `ε` as `p/q`.
    pub epsilon: String,
    #[serde(rename = "K")]
    pub k: u64,
    pub density_max: u64,
    pub scale_max: u64,
    pub l_max: u64,
    pub xi_search_max: u64,
    /// `(a, b)` coordinates; empty means units and their shears.
    #[serde(default)]
    pub test_elements: Vec<(Vec<i64>, Vec<i64>)>,
}

impl Default for SdpParams {
    fn default() -> Self {
        SdpParams {
            m_bound: 2,
            xi: XiRule::Inferred,
            epsilon: "1/4".into(),
            k: 16,
            density_max: 64,
            scale_max: 16,
            l_max: 16,
            xi_search_max: 4096,
            test_elements: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FolnerConfig {
    pub family: FamilyArg,
    #[serde(default)]
    pub group: Option<GroupArg>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub check: FolnerCheck,
    #[serde(default = "one")]
    pub lmin: u64,
    pub lmax: u64,
    #[serde(default, rename = "L_budget")]
    pub l_budget: Option<usize>,
    /// Check `l -> F_l^-1` instead.
    #[serde(default)]
    pub inverse: bool,
    #[serde(default)]
    pub budget: CoverBudget,
    #[serde(default)]
    pub sdp: SdpParams,
    #[serde(default)]
    pub format: Format,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerConfig {
    pub group: GroupArg,
    #[serde(default)]
    pub m: Option<usize>,
    pub set: String,
    /// Defaults to `F^-1 F`.
    #[serde(default)]
    pub separation: Option<String>,
    pub radius: u32,
    #[serde(default)]
    pub core_radius: Option<u32>,
    #[serde(default)]
    pub budget: CoverBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CastleConfig {
    pub group: GroupArg,
    pub family: FamilyArg,
    #[serde(default)]
    pub m: Option<usize>,
    pub n: u64,
    #[serde(default)]
    pub d_extra: usize,
    #[serde(default)]
    pub strong: bool,
    pub radius: u32,
    /// Defaults to `radius`.
    #[serde(default)]
    pub core_radius: Option<u32>,
    #[serde(default = "castle_budget")]
    pub budget: CoverBudget,
    #[serde(default)]
    pub format: Format,
}

pub fn castle_budget() -> CoverBudget {
    folnerlab_core::CastleOptions::default().cover_budget
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmdimConfig {
    pub castle: CastleConfig,
    /// Elements `g` for the equivariance defect; empty means the standard
    /// generators.
    #[serde(default)]
    pub test_elements: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(rename = "Lg")]
    pub l_g: u64,
    pub d: u64,
    #[serde(default)]
    pub m: Option<u64>,
    #[serde(default, rename = "LA")]
    pub l_a: Option<u64>,
    #[serde(default, rename = "LAinv")]
    pub l_a_inv: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Cover(CoverConfig),
    Folner(FolnerConfig),
    Marker(MarkerConfig),
    Castle(CastleConfig),
    Amdim(AmdimConfig),
    Bounds(BoundsConfig),
}

/// A config file holds one run or a list of runs.
pub fn parse_campaign(text: &str) -> Result<Vec<RunConfig>> {
    let value: serde_json::Value = serde_json::from_str(text).context("config is not valid JSON")?;
    let runs = match value {
        serde_json::Value::Array(items) => items
            .into_iter()
            .map(|v| serde_json::from_value(v).context("invalid run config"))
            .collect::<Result<Vec<RunConfig>>>()?,
        v => vec![serde_json::from_value(v).context("invalid run config")?],
    };
    Ok(runs)
}

impl GroupArg {
    pub fn resolve(&self, m: Option<usize>) -> Result<GroupSpec> {
        let spec = match self {
            GroupArg::Spec(s) => s.clone(),
            GroupArg::Short(s) => parse_group(s, m)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_group(s: &str, m: Option<usize>) -> Result<GroupSpec> {
    let s = s.trim();
    if s.starts_with('{') {
        return Ok(GroupSpec::from_json(s)?);
    }
    let num = |rest: &str| -> Result<usize> {
        rest.parse::<usize>()
            .map_err(|_| anyhow!("unknown group shorthand {s:?}"))
    };
    Ok(match s {
        "z" => GroupSpec::free_abelian(1),
        "zm" => GroupSpec::free_abelian(m.ok_or_else(|| anyhow!("group zm needs --m"))?),
        _ if s.starts_with("heis") => GroupSpec::heisenberg_shear(num(&s[4..])?),
        _ if s.starts_with('z') => GroupSpec::free_abelian(num(&s[1..])?),
        _ if s.starts_with('c') => GroupSpec::cyclic(num(&s[1..])? as i64),
        _ => bail!("unknown group shorthand {s:?}"),
    })
}

/// `k` when `spec` is the shear model `Z^{2k} x| Z`.
fn shear_rank(spec: &GroupSpec) -> Option<usize> {
    (1..=64).find(|&k| *spec == GroupSpec::heisenberg_shear(k))
}

impl FamilyArg {
    pub fn resolve(&self, group: Option<&GroupSpec>, m: Option<usize>) -> Result<FolnerFamily> {
        let desc = match self {
            FamilyArg::Spec(d) => d.clone(),
            FamilyArg::Name(name) => {
                let rank = match group {
                    Some(GroupSpec::FreeAbelian { rank }) => Some(*rank),
                    _ => None,
                };
                match name.as_str() {
                    "zm_box" => FamilyDescriptor::ZmBox {
                        m: m.or(rank).unwrap_or(1),
                    },
                    "zm_sqrt_box" => FamilyDescriptor::ZmSqrtBox {
                        m: m.or(rank).unwrap_or(1),
                    },
                    "heisenberg_sqrt" => FamilyDescriptor::HeisenbergSqrt {
                        n: group.and_then(shear_rank).unwrap_or(1),
                    },
                    "singletons" => FamilyDescriptor::Singletons {
                        group: group
                            .cloned()
                            .ok_or_else(|| anyhow!("family singletons needs --group"))?,
                    },
                    s if s.starts_with('{') => serde_json::from_str(s).context("invalid family descriptor")?,
                    other => bail!("unknown family {other:?}"),
                }
            }
        };
        let fam = FolnerFamily::builtin(desc)?;
        if let Some(g) = group {
            if fam.owner().as_ref() != g {
                bail!("family {} lives in a different group than --group", fam.name());
            }
        }
        Ok(fam)
    }
}

/// Parses `a..b` boxes (comma-separated per coordinate), single points,
/// `ball:R`, or a JSON array of coordinate arrays.
pub fn parse_set(owner: &Arc<GroupSpec>, s: &str) -> Result<FiniteSubset> {
    let s = s.trim();
    if s.starts_with('[') {
        return Ok(FiniteSubset::from_json(owner.clone(), s)?);
    }
    if let Some(r) = s.strip_prefix("ball:") {
        let r: u32 = r.parse().context("ball radius")?;
        return Ok(ball(&GeneratingSet::standard(owner.clone())?, r)?);
    }
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != owner.dim() {
        bail!("set {s:?} has {} coordinates, group has {}", parts.len(), owner.dim());
    }
    let mut ranges = Vec::with_capacity(parts.len());
    for p in parts {
        let range = match p.split_once("..") {
            Some((a, b)) => (parse_int(a)?, parse_int(b)?),
            None => {
                let v = parse_int(p)?;
                (v, v)
            }
        };
        if range.0 > range.1 {
            bail!("empty range {p:?}");
        }
        ranges.push(range);
    }
    let points = folnerlab_core::subset::box_points(&ranges);
    Ok(FiniteSubset::new(owner.clone(), points)?)
}

fn parse_int(s: &str) -> Result<i64> {
    s.trim().parse().with_context(|| format!("not an integer: {s:?}"))
}

pub fn parse_rational(s: &str) -> Result<folnerlab_core::Rational> {
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (parse_int(p)?, parse_int(q)?),
        None => (parse_int(s)?, 1),
    };
    if q == 0 {
        bail!("zero denominator in {s:?}");
    }
    Ok(folnerlab_core::Rational::new(p, q))
}

pub fn element(spec: &GroupSpec, coords: &[i64]) -> Result<GroupElement> {
    Ok(spec.element(coords)?)
}
