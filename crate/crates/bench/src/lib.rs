//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use folnerlab_core::{FiniteSubset, FolnerFamily, GeneratingSet, GroupSpec, OrbitWindow};

pub fn z_interval(half: i64) -> FiniteSubset {
    FiniteSubset::integer_box(Arc::new(GroupSpec::free_abelian(1)), -half, half).expect("interval")
}

pub fn z2_box(half: i64) -> FiniteSubset {
    FiniteSubset::integer_box(Arc::new(GroupSpec::free_abelian(2)), -half, half).expect("box")
}

pub fn heis_member(l: u64) -> FiniteSubset {
    FolnerFamily::heisenberg_sqrt(1).and_then(|f| f.member(l)).expect("family member")
}

pub fn heis_gens() -> GeneratingSet {
    GeneratingSet::standard(Arc::new(GroupSpec::heisenberg_shear(1))).expect("generators")
}

pub fn z_window(radius: u32) -> OrbitWindow {
    let gens = GeneratingSet::standard(Arc::new(GroupSpec::free_abelian(1))).expect("generators");
    OrbitWindow::new(gens, radius, radius).expect("window")
}
