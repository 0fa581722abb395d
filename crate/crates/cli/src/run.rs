//! Executes one run configuration and assembles its report.

use std::sync::Arc;

use anyhow::{anyhow, bail, Result};
use folnerlab_core::amdim::{equivariance_defect, mu_from_castle};
use folnerlab_core::cover::{self, Verdict};
use folnerlab_core::folner::{
    all_pairs, check_afc_containment, check_safc_witnesses, check_sdp_hypotheses, check_wafc, folner_defect,
    SdpConfig,
};
use folnerlab_core::group::GroupSpec;
use folnerlab_core::{
    bounds, build_castle, build_marker, ActionRule, BoundInput, CastleOptions, Error, FamilyDescriptor,
    FolnerFamily, GroupElement, OrbitWindow,
};
use serde_json::{json, Value};

use crate::config::*;

/// Overall status of a run, ordered by severity for campaigns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Computed,
    True,
    Indeterminate,
    False,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Computed => "computed",
            Status::True => "true",
            Status::Indeterminate => "indeterminate",
            Status::False => "false",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Computed | Status::True => 0,
            Status::False => 2,
            Status::Indeterminate => 3,
        }
    }
}

impl From<Verdict> for Status {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::True => Status::True,
            Verdict::False => Status::False,
            Verdict::Indeterminate => Status::Indeterminate,
        }
    }
}

pub struct Outcome {
    pub status: Status,
    pub result: Value,
    pub csv: Option<String>,
}

impl Outcome {
    fn new(status: Status, result: Value) -> Self {
        Outcome {
            status,
            result,
            csv: None,
        }
    }
}

pub fn report(config: &RunConfig, outcome: &Outcome) -> Value {
    json!({
        "tool": "folnerlab",
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "status": outcome.status.as_str(),
        "result": outcome.result,
    })
}

pub fn execute(config: &RunConfig) -> Result<Outcome> {
    match config {
        RunConfig::Cover(c) => cover_cmd(c),
        RunConfig::Folner(c) => folner_cmd(c),
        RunConfig::Marker(c) => marker_cmd(c),
        RunConfig::Castle(c) => castle_cmd(c),
        RunConfig::Amdim(c) => amdim_cmd(c),
        RunConfig::Bounds(c) => bounds_cmd(c),
    }
}

fn coords(gs: &[GroupElement]) -> Vec<Vec<i64>> {
    gs.iter().map(|g| g.coords().to_vec()).collect()
}

fn cover_cmd(c: &CoverConfig) -> Result<Outcome> {
    c.budget.validate()?;
    let owner = Arc::new(c.group.resolve(c.m)?);
    let set = match (&c.set, &c.family, c.index) {
        (Some(s), None, None) => parse_set(&owner, s)?,
        (None, Some(f), Some(l)) => f.resolve(Some(&owner), c.m)?.member(l)?,
        _ => bail!("give either --set, or --family with --index"),
    };
    let base = json!({ "set_size": set.len(), "symmetric": set.is_symmetric()? });
    let with = |mut v: Value, extra: Value| {
        if let (Some(a), Some(b)) = (v.as_object_mut(), extra.as_object()) {
            a.extend(b.clone());
        }
        v
    };
    Ok(match c.check {
        CoverCheck::Constant => {
            let w = cover::covering_number(&set, &c.budget)?;
            Outcome::new(Status::Computed, with(base, json!({ "L": w.L(), "witness": w.to_value() })))
        }
        CoverCheck::Approximate | CoverCheck::Strong => {
            let l = c.l.ok_or_else(|| anyhow!("--check {:?} needs --L", c.check))?;
            let d = if c.check == CoverCheck::Approximate {
                cover::is_approximate(&set, l, &c.budget)?
            } else {
                cover::is_strongly_approximate(&set, l, &c.budget)?
            };
            Outcome::new(
                d.verdict.into(),
                with(
                    base,
                    json!({
                        "L": l,
                        "verdict": d.verdict,
                        "witness": d.witness.map(|w| w.to_value()),
                    }),
                ),
            )
        }
        CoverCheck::Symmetrization => {
            let r = cover::symmetrization_bound_check(&set, &c.budget)?;
            let status = match (r.holds, r.certifying) {
                (true, true) => Status::True,
                (false, true) => Status::False,
                _ => Status::Indeterminate,
            };
            Outcome::new(status, with(base, json!({ "symmetrization": r })))
        }
    })
}

fn family_of(c: &FolnerConfig) -> Result<FolnerFamily> {
    let group = c.group.as_ref().map(|g| g.resolve(c.m)).transpose()?;
    let fam = c.family.resolve(group.as_ref(), c.m)?;
    Ok(if c.inverse { fam.inverted() } else { fam })
}

/// `(N, H, action)` for a semidirect family.
fn sdp_parts(fam: &FolnerFamily) -> Result<(FolnerFamily, FolnerFamily, ActionRule)> {
    match fam.descriptor() {
        Some(FamilyDescriptor::HeisenbergSqrt { n }) => Ok((
            FolnerFamily::zm_sqrt_box(2 * n)?,
            FolnerFamily::zm_sqrt_box(1)?,
            ActionRule::HeisenbergShear,
        )),
        Some(FamilyDescriptor::Product {
            normal,
            acting,
            action,
        }) => Ok((
            FolnerFamily::builtin((**normal).clone())?,
            FolnerFamily::builtin((**acting).clone())?,
            *action,
        )),
        _ => bail!("--check sdp needs a product or heisenberg_sqrt family"),
    }
}

fn default_tests(n: &GroupSpec, h: &GroupSpec) -> Vec<(GroupElement, GroupElement)> {
    let mut a = vec![n.identity()];
    a.extend(n.standard_generators());
    let mut b = vec![h.identity()];
    b.extend(h.standard_generators());
    a.iter()
        .flat_map(|x| b.iter().map(move |y| (x.clone(), y.clone())))
        .collect()
}

fn folner_cmd(c: &FolnerConfig) -> Result<Outcome> {
    c.budget.validate()?;
    if c.lmin == 0 || c.lmin > c.lmax {
        bail!("need 1 <= lmin <= lmax");
    }
    let fam = family_of(c)?;
    let indices: Vec<u64> = (c.lmin..=c.lmax).collect();
    let scope = format!("verified for {} <= l <= {}", c.lmin, c.lmax);
    Ok(match c.check {
        FolnerCheck::Wafc => {
            let r = check_wafc(&fam, &indices, c.l_budget.unwrap_or(usize::MAX), &c.budget)?;
            let mut v = r.to_value();
            v["L_G"] = json!(r.sup_l);
            v["L_budget"] = match c.l_budget {
                Some(b) => json!(b),
                None => json!("observed"),
            };
            Outcome {
                status: r.verdict.into(),
                result: v,
                csv: Some(r.to_csv()),
            }
        }
        FolnerCheck::Afc => {
            let pairs: Vec<(u64, u64)> = all_pairs(c.lmax)
                .into_iter()
                .filter(|(a, b)| *a >= c.lmin && *b >= c.lmin)
                .collect();
            let res = check_afc_containment(&fam, &pairs)?;
            let failures: Vec<Value> = res
                .iter()
                .filter(|r| !r.holds)
                .map(|r| {
                    json!({
                        "l1": r.l1,
                        "l2": r.l2,
                        "counterexample": r.counterexample.as_ref().map(|g| g.coords().to_vec()),
                    })
                })
                .collect();
            let status = Status::from(Verdict::from_bool(failures.is_empty()));
            Outcome::new(
                status,
                json!({
                    "family": fam.name(),
                    "scope": scope,
                    "pairs_checked": res.len(),
                    "failure_count": failures.len(),
                    "failures": failures.into_iter().take(64).collect::<Vec<_>>(),
                }),
            )
        }
        FolnerCheck::Safc => {
            let entries = check_safc_witnesses(&fam, &indices, &c.budget)?;
            let verdict = Verdict::all(entries.iter().map(|e| e.verdict));
            let sup = entries.iter().filter_map(|e| e.witness.as_ref().map(|w| w.L())).max();
            Outcome::new(
                verdict.into(),
                json!({
                    "family": fam.name(),
                    "scope": scope,
                    "sup_L": sup,
                    "entries": entries.iter().map(|e| json!({
                        "index": e.index,
                        "verdict": e.verdict,
                        "witness": e.witness.as_ref().map(|w| w.to_value()),
                    })).collect::<Vec<_>>(),
                }),
            )
        }
        FolnerCheck::Sdp => {
            let (n, h, action) = sdp_parts(&fam)?;
            let p = &c.sdp;
            let tests = if p.test_elements.is_empty() {
                default_tests(n.owner(), h.owner())
            } else {
                p.test_elements
                    .iter()
                    .map(|(a, b)| Ok((element(n.owner(), a)?, element(h.owner(), b)?)))
                    .collect::<Result<Vec<_>>>()?
            };
            let cfg = SdpConfig {
                m: p.m_bound,
                xi: p.xi,
                scale_max: p.scale_max,
                xi_search_max: p.xi_search_max,
                epsilon: parse_rational(&p.epsilon)?,
                k: p.k,
                density_max: p.density_max,
                test_elements: tests,
                l_max: p.l_max,
            };
            let r = check_sdp_hypotheses(&n, &h, action, &cfg)?;
            let mut v = serde_json::to_value(&r)?;
            v["hypothesis1"] = json!(r.hypothesis1());
            v["family"] = json!(fam.name());
            Outcome::new(r.all().into(), v)
        }
        FolnerCheck::Defect => {
            let gens = fam.owner().standard_generators();
            let mut rows = Vec::new();
            let mut csv = String::from("index,size");
            for k in 0..gens.len() {
                csv.push_str(&format!(",defect_{k}"));
            }
            csv.push('\n');
            for &l in &indices {
                let f = fam.member(l)?;
                let d = gens
                    .iter()
                    .map(|g| folner_defect(&f, g))
                    .collect::<folnerlab_core::Result<Vec<_>>>()?;
                csv.push_str(&format!("{l},{}", f.len()));
                for x in &d {
                    csv.push_str(&format!(",{x}"));
                }
                csv.push('\n');
                rows.push(json!({
                    "index": l,
                    "size": f.len(),
                    "defects": d.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                }));
            }
            Outcome {
                status: Status::Computed,
                result: json!({
                    "family": fam.name(),
                    "generators": coords(&gens),
                    "rows": rows,
                }),
                csv: Some(csv),
            }
        }
    })
}

fn marker_cmd(c: &MarkerConfig) -> Result<Outcome> {
    c.budget.validate()?;
    let owner = Arc::new(c.group.resolve(c.m)?);
    let f = parse_set(&owner, &c.set)?;
    let sep = match &c.separation {
        Some(s) => parse_set(&owner, s)?,
        None => f.set_inverse()?.set_product(&f)?,
    };
    let window = OrbitWindow::standard(owner, c.radius, c.core_radius.unwrap_or(c.radius))?;
    let m = build_marker(&window, &f, &sep, &c.budget)?;
    let one = folnerlab_core::Rational::from_integer(1);
    let ok = m.separated && m.translates_disjoint && m.controlled_coverage == one;
    let mut v = m.to_value();
    v["window"] = json!({ "R": window.radius(), "r_core": window.core_radius(), "core_size": window.core().len() });
    Ok(Outcome::new(Verdict::from_bool(ok).into(), v))
}

fn castle_of(c: &CastleConfig) -> Result<(OrbitWindow, folnerlab_core::CastleReport)> {
    c.budget.validate()?;
    let spec = c.group.resolve(c.m)?;
    let fam = c.family.resolve(Some(&spec), c.m)?;
    let window = OrbitWindow::standard(Arc::new(spec), c.radius, c.core_radius.unwrap_or(c.radius))?;
    let opts = CastleOptions {
        cover_budget: c.budget,
        ..CastleOptions::default()
    };
    let castle = build_castle(&window, &fam, c.n, c.d_extra, c.strong, &opts)?;
    Ok((window, castle))
}

fn castle_cmd(c: &CastleConfig) -> Result<Outcome> {
    let (_, castle) = castle_of(c)?;
    Ok(Outcome {
        status: castle.verdict().into(),
        result: castle.to_value(),
        csv: Some(castle.tower_csv()),
    })
}

fn amdim_cmd(c: &AmdimConfig) -> Result<Outcome> {
    let (window, castle) = castle_of(&c.castle)?;
    let castle_summary = json!({
        "verdicts": castle.to_value()["verdicts"],
        "tower_count": castle.towers.len(),
        "L": castle.l,
        "covered_fraction": castle.covered_fraction.to_string(),
    });
    let mu = match mu_from_castle(&castle, &window) {
        Ok(mu) => mu,
        Err(Error::CastleDefect(msg)) => {
            return Ok(Outcome::new(
                Status::False,
                json!({ "castle": castle_summary, "error": msg }),
            ))
        }
        Err(e) => return Err(e.into()),
    };
    let spec = window.spec();
    let tests: Vec<GroupElement> = if c.test_elements.is_empty() {
        let mut t = vec![spec.identity()];
        t.extend(spec.standard_generators());
        t
    } else {
        c.test_elements
            .iter()
            .map(|g| element(spec, g))
            .collect::<Result<_>>()?
    };
    let (a, a_bad) = mu.partition_holds()?;
    let (b, b_bad) = mu.orthogonality_holds()?;
    let eq = tests
        .iter()
        .map(|g| equivariance_defect(&mu, g))
        .collect::<folnerlab_core::Result<Vec<_>>>()?;
    let c_ok = Verdict::from_bool(eq.iter().all(|r| r.holds()));
    let towers = castle.towers.len();
    let t_ok = Verdict::from_bool(towers <= castle.l * (castle.d_extra + 1));
    Ok(Outcome::new(
        Verdict::all([a, b, c_ok, t_ok]).into(),
        json!({
            "castle": castle_summary,
            "verified_core_size": mu.verified_core().len(),
            "excluded_core_points": mu.excluded().len(),
            "partition": { "verdict": a, "first_failure": a_bad.map(|g| g.coords().to_vec()) },
            "orthogonality": { "verdict": b, "first_failure": b_bad.map(|g| g.coords().to_vec()) },
            "equivariance": eq.iter().map(|r| r.to_value()).collect::<Vec<_>>(),
            "equivariance_verdict": c_ok,
            "tower_indices": towers,
            "tower_bound": castle.l * (castle.d_extra + 1),
        }),
    ))
}

fn bounds_cmd(c: &BoundsConfig) -> Result<Outcome> {
    let input = BoundInput {
        l_g: c.l_g,
        d: c.d,
        m: c.m,
    };
    let mut v = bounds::report(&input)?;
    match (c.l_a, c.l_a_inv) {
        (Some(a), Some(b)) => {
            v["symmetrization"] = json!({
                "formula": "2*L_A*L_{A^-1} + L_A + L_{A^-1}",
                "L_A": a,
                "L_A_inv": b,
                "bound": bounds::symmetrization_bound(a, b)?,
            });
        }
        (None, None) => {}
        _ => bail!("--LA and --LAinv go together"),
    }
    Ok(Outcome::new(Status::Computed, v))
}
