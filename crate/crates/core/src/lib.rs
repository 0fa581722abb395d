//! Covering constants of approximate groups, Følner-family checks, marker and
//! castle constructions on orbit windows, and the dimension bounds built on
//! them.

pub mod amdim;
pub mod ball;
pub mod bounds;
pub mod cover;
pub mod error;
pub mod folner;
pub mod group;
pub mod markers;
pub mod setcover;
pub mod subset;

pub use amdim::{equivariance_defect, indicator_partition, mu_from_castle, MuSystem};
pub use ball::{ball, centralizer_in_ball, growth_profile};
pub use bounds::BoundInput;
pub use cover::{
    candidate_translates, covering_number, is_approximate, is_strongly_approximate,
    symmetrization_bound_check, CoverBudget, CoverMode, CoverWitness, Verdict,
};
pub use error::{Error, Result};
pub use folner::{FamilyDescriptor, FolnerFamily, WafcReport, XiRule};
pub use group::{ActionRule, GroupElement, GroupSpec};
pub use markers::{
    build_castle, build_marker, choose_disjoint_translates, covering_translates, verify_disjointness,
    CastleOptions, CastleReport, MarkerSet, OrbitWindow,
};
pub use subset::{FiniteSubset, GeneratingSet};

/// Exact ratios used for defects, densities and measures.
pub type Rational = num_rational::Ratio<i64>;
