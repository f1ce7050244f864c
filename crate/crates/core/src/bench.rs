//! Built-in benchmark dependence patterns.
//!
//! The stencils are time-iterated 2-d stencils. A point `(t, i, j)` reads
//! `(t - 1, i + di, j + dj)` for every `(di, dj)` of the stencil shape. To
//! make every dependence backward in all dimensions the space is skewed by
//! the stencil radius `r`: `i' = i + r t`, `j' = j + r t`, which turns each
//! offset into the vector `(-1, di - r, dj - r)`.
//!
//! | name                 | shape                                 | deps | reach      |
//! |----------------------|---------------------------------------|------|------------|
//! | `jacobi2d5p`         | 5-point cross, r = 1                  | 5    | (1, 2, 2)  |
//! | `jacobi2d9p`         | 3x3 box, r = 1                        | 9    | (1, 2, 2)  |
//! | `jacobi2d9p-gol`     | radius-2 cross (2nd-order), r = 2     | 9    | (1, 4, 4)  |
//! | `gaussian`           | 5x5 box, r = 2                        | 25   | (1, 4, 4)  |
//! | `smith-waterman-3seq`| `{-1,0}^3` minus the origin, unskewed | 7    | (1, 1, 1)  |

use crate::kernel::KernelSpec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkDef {
    pub name: &'static str,
    pub deps: Vec<Vec<i64>>,
    /// Tile sizes of the bandwidth sweep.
    pub tile_sweep: Vec<Vec<i64>>,
    /// Tile size used for exhaustive verification.
    pub reduced_tile: Vec<i64>,
    /// Weight of each dependence in the integer statement used by the
    /// functional check: `v(x) = 1 + sum_j weights[j] * v(x + dep_j)`.
    pub weights: Vec<i64>,
    pub element_bytes: u32,
}

impl BenchmarkDef {
    /// Instance with `tiles_per_axis` tiles of size `tile` on every axis.
    pub fn spec(&self, tile: &[i64], tiles_per_axis: i64) -> Result<KernelSpec, crate::kernel::KernelError> {
        KernelSpec::new(
            tile.iter().map(|t| t * tiles_per_axis).collect(),
            tile.to_vec(),
            self.deps.clone(),
            self.element_bytes,
        )
    }

    pub fn reduced_spec(&self) -> KernelSpec {
        self.spec(&self.reduced_tile, 2).expect("built-in reduced spec is valid")
    }

    /// Sweep entry with largest tile extent `size`, keeping this
    /// benchmark's shape (e.g. `4 x size x size` for gaussian).
    pub fn tile_for(&self, size: i64) -> Vec<i64> {
        let top = self.tile_sweep.last().cloned().unwrap_or_default();
        let max = top.iter().copied().max().unwrap_or(1);
        top.iter().map(|&t| if t == max { size } else { t.min(size) }).collect()
    }
}

fn skewed_stencil(offsets: &[(i64, i64)], radius: i64) -> Vec<Vec<i64>> {
    offsets
        .iter()
        .map(|&(di, dj)| vec![-1, di - radius, dj - radius])
        .collect()
}

fn weights(n: usize) -> Vec<i64> {
    (1..=n as i64).collect()
}

fn cubes(sizes: &[i64]) -> Vec<Vec<i64>> {
    sizes.iter().map(|&s| vec![s; 3]).collect()
}

const SWEEP: [i64; 4] = [16, 32, 64, 128];

pub fn jacobi2d5p() -> BenchmarkDef {
    let deps = skewed_stencil(&[(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)], 1);
    BenchmarkDef {
        name: "jacobi2d5p",
        weights: weights(deps.len()),
        deps,
        tile_sweep: cubes(&SWEEP),
        reduced_tile: vec![4; 3],
        element_bytes: 8,
    }
}

pub fn jacobi2d9p() -> BenchmarkDef {
    let offsets: Vec<(i64, i64)> = (-1..=1).flat_map(|di| (-1..=1).map(move |dj| (di, dj))).collect();
    let deps = skewed_stencil(&offsets, 1);
    BenchmarkDef {
        name: "jacobi2d9p",
        weights: weights(deps.len()),
        deps,
        tile_sweep: cubes(&SWEEP),
        reduced_tile: vec![4; 3],
        element_bytes: 8,
    }
}

pub fn jacobi2d9p_gol() -> BenchmarkDef {
    let offsets = [(0, 0), (1, 0), (-1, 0), (2, 0), (-2, 0), (0, 1), (0, -1), (0, 2), (0, -2)];
    let deps = skewed_stencil(&offsets, 2);
    BenchmarkDef {
        name: "jacobi2d9p-gol",
        weights: weights(deps.len()),
        deps,
        tile_sweep: cubes(&SWEEP),
        reduced_tile: vec![4; 3],
        element_bytes: 8,
    }
}

pub fn gaussian() -> BenchmarkDef {
    let offsets: Vec<(i64, i64)> = (-2..=2).flat_map(|di| (-2..=2).map(move |dj| (di, dj))).collect();
    let deps = skewed_stencil(&offsets, 2);
    BenchmarkDef {
        name: "gaussian",
        weights: weights(deps.len()),
        deps,
        tile_sweep: SWEEP.iter().map(|&s| vec![4, s, s]).collect(),
        reduced_tile: vec![4, 8, 8],
        element_bytes: 8,
    }
}

pub fn smith_waterman_3seq() -> BenchmarkDef {
    let deps: Vec<Vec<i64>> = (1u32..8)
        .map(|mask| (0..3).map(|q| if mask & (4 >> q) != 0 { -1 } else { 0 }).collect())
        .collect();
    BenchmarkDef {
        name: "smith-waterman-3seq",
        weights: weights(deps.len()),
        deps,
        tile_sweep: cubes(&SWEEP),
        reduced_tile: vec![4; 3],
        element_bytes: 8,
    }
}

pub fn builtin_benchmarks() -> Vec<BenchmarkDef> {
    vec![
        jacobi2d5p(),
        jacobi2d9p(),
        jacobi2d9p_gol(),
        gaussian(),
        smith_waterman_3seq(),
    ]
}

pub fn find_benchmark(name: &str) -> Option<BenchmarkDef> {
    builtin_benchmarks().into_iter().find(|b| b.name == name)
}

/// The running example: 15^3 space, 5^3 tiles, and the full box pattern of
/// reach 1 along i and 2 along j and k, so every producer contributes a
/// whole slab and the corner set holds 1 x 2 x 2 points.
pub fn fig4_spec() -> KernelSpec {
    let mut deps = Vec::new();
    for a in 0..=1 {
        for b in 0..=2 {
            for c in 0..=2 {
                if (a, b, c) != (0, 0, 0) {
                    deps.push(vec![-a, -b, -c]);
                }
            }
        }
    }
    KernelSpec::new(vec![15; 3], vec![5; 3], deps, 8).expect("valid running example")
}

/// Three tiles of 5 per axis with the single dependence `-e_1`.
pub fn single_dep_spec(dims: usize) -> KernelSpec {
    let mut dep = vec![0; dims];
    dep[0] = -1;
    KernelSpec::new(vec![15; dims], vec![5; dims], vec![dep], 8).expect("valid single-dep spec")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facet::facet_thickness;

    #[test]
    fn dependence_counts_match_the_benchmark_table() {
        let counts: Vec<(&str, usize)> = builtin_benchmarks().iter().map(|b| (b.name, b.deps.len())).collect();
        assert_eq!(
            counts,
            vec![
                ("jacobi2d5p", 5),
                ("jacobi2d9p", 9),
                ("jacobi2d9p-gol", 9),
                ("gaussian", 25),
                ("smith-waterman-3seq", 7)
            ]
        );
    }

    #[test]
    fn jacobi2d5p_vectors() {
        let b = jacobi2d5p();
        assert_eq!(
            b.deps,
            vec![vec![-1, -1, -1], vec![-1, 0, -1], vec![-1, -2, -1], vec![-1, -1, 0], vec![-1, -1, -2]]
        );
        let spec = b.reduced_spec();
        let w: Vec<i64> = (0..3).map(|k| facet_thickness(&spec, k)).collect();
        assert_eq!(w, vec![1, 2, 2]);
    }

    #[test]
    fn every_builtin_is_valid_and_distinct() {
        for b in builtin_benchmarks() {
            assert!(b.deps.iter().all(|d| d.iter().all(|&c| c <= 0)));
            let mut sorted = b.deps.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), b.deps.len(), "{}", b.name);
            for tile in &b.tile_sweep {
                b.spec(tile, 3).unwrap();
            }
            b.reduced_spec();
        }
        assert_ne!(jacobi2d9p().deps, jacobi2d9p_gol().deps);
    }

    #[test]
    fn gaussian_time_facet_fits_its_tile() {
        let g = gaussian();
        let spec = g.reduced_spec();
        assert_eq!(facet_thickness(&spec, 0), 1);
        assert_eq!(facet_thickness(&spec, 1), 4);
        assert_eq!(g.tile_for(64), vec![4, 64, 64]);
        assert_eq!(jacobi2d5p().tile_for(32), vec![32, 32, 32]);
    }
}
