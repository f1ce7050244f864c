//! Fixtures shared by the criterion benchmarks.

use cfa_core::bench::{fig4_spec, find_benchmark};
use cfa_core::{CfaLayout, KernelSpec, TileCoord};

/// A named kernel with its layout and an interior tile.
pub struct Fixture {
    pub name: String,
    pub spec: KernelSpec,
    pub layout: CfaLayout,
    pub interior: TileCoord,
}

impl Fixture {
    pub fn new(name: impl Into<String>, spec: KernelSpec) -> Self {
        let layout = CfaLayout::build(&spec).expect("fixture layout");
        let interior = TileCoord(vec![1; spec.dims()]);
        Fixture { name: name.into(), spec, layout, interior }
    }
}

/// Benchmark `name` with `tile` per axis, three tiles per axis.
pub fn benchmark(name: &str, tile: &[i64]) -> Fixture {
    let def = find_benchmark(name).unwrap_or_else(|| panic!("no benchmark {name}"));
    let label = format!("{name}/{}", tile.iter().map(i64::to_string).collect::<Vec<_>>().join("x"));
    Fixture::new(label, def.spec(tile, 3).expect("fixture spec"))
}

pub fn fixtures() -> Vec<Fixture> {
    vec![
        Fixture::new("fig4", fig4_spec()),
        benchmark("jacobi2d5p", &[16, 16, 16]),
        benchmark("jacobi2d5p", &[64, 64, 64]),
        benchmark("gaussian", &[4, 32, 32]),
        benchmark("smith-waterman-3seq", &[32, 32, 32]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        let f = fixtures();
        assert_eq!(f.len(), 5);
        assert!(f.iter().all(|f| f.spec.check_tile(&f.interior).is_ok()));
    }
}
