//! Facet data spaces: per-axis thickness, modulo projection, single-assignment
//! replication, and the containment check of flow-in sets inside facets.

use rayon::prelude::*;
use thiserror::Error;

use crate::kernel::{flow_in, Boxed, KernelError, KernelSpec, Point, PointSet, TileCoord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FacetError {
    #[error("facet normal to axis {axis} is absent (zero thickness)")]
    AbsentFacet { axis: usize },
    #[error("no dependence crosses any tile face")]
    NoFlow,
    #[error(
        "flow-in point {point:?} of tile {tile} (produced by tile {producer}) lies in no facet"
    )]
    ContainmentViolation {
        point: Point,
        tile: TileCoord,
        producer: TileCoord,
    },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Conventional axis names used in reports and emitted code.
pub fn axis_name(axis: usize) -> String {
    const NAMES: [&str; 6] = ["i", "j", "k", "l", "m", "n"];
    NAMES
        .get(axis)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("x{axis}"))
}

/// Thickness of the facet normal to `axis`: the longest reach of any
/// dependence along that axis.
pub fn facet_thickness(spec: &KernelSpec, axis: usize) -> i64 {
    spec.deps.iter().map(|dep| dep[axis].abs()).max().unwrap_or(0)
}

/// One facet data space (the slab normal to `axis`, replicated per tile
/// along `axis`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacetDescriptor {
    /// Normal axis, 0-based.
    pub axis: usize,
    pub thickness: i64,
    /// Number of tiles along `axis`; the single-assignment dimension.
    pub sa_extent: i64,
    pub space_sizes: Vec<i64>,
    pub tile_sizes: Vec<i64>,
}

impl FacetDescriptor {
    pub fn name(&self) -> String {
        format!("facet_{}", axis_name(self.axis))
    }

    /// Extents `N_q` of the axes that survive the projection.
    pub fn projected_extents(&self) -> Vec<i64> {
        (0..self.space_sizes.len())
            .filter(|&q| q != self.axis)
            .map(|q| self.space_sizes[q])
            .collect()
    }

    /// Elements stored for one tile.
    pub fn block_len(&self) -> u64 {
        (self.thickness
            * (0..self.tile_sizes.len())
                .filter(|&q| q != self.axis)
                .map(|q| self.tile_sizes[q])
                .product::<i64>()) as u64
    }

    /// Total elements of the single-assignment data space.
    pub fn capacity(&self) -> u64 {
        (self.sa_extent * self.thickness * self.projected_extents().iter().product::<i64>()) as u64
    }

    /// The facet slab of `tile` as a box of iteration points.
    pub fn slab(&self, tile_box: &Boxed) -> Boxed {
        let mut lo = tile_box.lo.clone();
        let mut extent = tile_box.extent.clone();
        lo[self.axis] += extent[self.axis] - self.thickness;
        extent[self.axis] = self.thickness;
        Boxed::new(lo, extent)
    }

    /// Whether `point` lies in the last `thickness` planes of its tile.
    pub fn in_domain(&self, point: &[i64]) -> bool {
        let t = self.tile_sizes[self.axis];
        point[self.axis].rem_euclid(t) >= t - self.thickness
    }
}

/// `x_k -> x_k mod w_k` on the last `w_k` planes of every tile; all other
/// coordinates pass through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuloProjection {
    pub axis: usize,
    pub modulus: i64,
    pub tile_size: i64,
}

impl ModuloProjection {
    pub fn in_domain(&self, point: &[i64]) -> bool {
        let r = point[self.axis].rem_euclid(self.tile_size);
        self.tile_size - self.modulus <= r && r < self.tile_size
    }

    pub fn apply(&self, point: &[i64]) -> Point {
        let mut image = point.to_vec();
        image[self.axis] = point[self.axis].rem_euclid(self.modulus);
        image
    }
}

pub fn build_projection(spec: &KernelSpec, axis: usize) -> Result<ModuloProjection, FacetError> {
    let modulus = facet_thickness(spec, axis);
    if modulus == 0 {
        return Err(FacetError::AbsentFacet { axis });
    }
    Ok(ModuloProjection {
        axis,
        modulus,
        tile_size: spec.tile_sizes[axis],
    })
}

/// Exact point set `S_k(T)` of the facet of `tile` normal to `axis`.
pub fn facet_set(spec: &KernelSpec, tile: &TileCoord, axis: usize) -> Result<PointSet, FacetError> {
    spec.check_tile(tile)?;
    let thickness = facet_thickness(spec, axis);
    if thickness == 0 {
        return Err(FacetError::AbsentFacet { axis });
    }
    let desc = descriptor(spec, axis, thickness);
    Ok(spec.point_set(desc.slab(&spec.tile_box(tile)).points()))
}

fn descriptor(spec: &KernelSpec, axis: usize, thickness: i64) -> FacetDescriptor {
    FacetDescriptor {
        axis,
        thickness,
        sa_extent: spec.space_sizes[axis] / spec.tile_sizes[axis],
        space_sizes: spec.space_sizes.clone(),
        tile_sizes: spec.tile_sizes.clone(),
    }
}

/// One descriptor per axis with nonzero thickness, in axis order.
pub fn allocate_facets(spec: &KernelSpec) -> Result<Vec<FacetDescriptor>, FacetError> {
    let facets: Vec<FacetDescriptor> = (0..spec.dims())
        .map(|axis| (axis, facet_thickness(spec, axis)))
        .filter(|&(_, w)| w > 0)
        .map(|(axis, w)| descriptor(spec, axis, w))
        .collect();
    if facets.is_empty() {
        return Err(FacetError::NoFlow);
    }
    Ok(facets)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileWitness {
    pub tile: TileCoord,
    pub flow_in_points: usize,
    /// Flow-in points found in at least one facet of their producer.
    pub matched: usize,
    /// Total (point, facet) memberships; exceeds `matched` where facets overlap.
    pub facet_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainmentReport {
    pub tiles: Vec<TileWitness>,
}

impl ContainmentReport {
    pub fn total_points(&self) -> usize {
        self.tiles.iter().map(|t| t.flow_in_points).sum()
    }
}

/// Checks, tile by tile, that every flow-in point lies inside a facet of the
/// tile producing it.
pub fn verify_containment(spec: &KernelSpec) -> Result<ContainmentReport, FacetError> {
    let facets = allocate_facets(spec)?;
    verify_containment_with(spec, &facets)
}

/// Same as [`verify_containment`] with caller-supplied facets, so a
/// deliberately thinned facet set can be checked.
pub fn verify_containment_with(
    spec: &KernelSpec,
    facets: &[FacetDescriptor],
) -> Result<ContainmentReport, FacetError> {
    spec.validate()?;
    let results: Vec<Result<TileWitness, FacetError>> = spec
        .tiles()
        .into_par_iter()
        .map(|tile| {
            let set = flow_in(spec, &tile)?;
            let mut matched = 0;
            let mut facet_hits = 0;
            for point in set.points() {
                let hits = facets.iter().filter(|f| f.thickness > 0 && f.in_domain(&point)).count();
                if hits == 0 {
                    let producer = spec.tile_of(&point)?;
                    return Err(FacetError::ContainmentViolation {
                        point,
                        tile,
                        producer,
                    });
                }
                matched += 1;
                facet_hits += hits;
            }
            Ok(TileWitness {
                tile,
                flow_in_points: set.len(),
                matched,
                facet_hits,
            })
        })
        .collect();
    // tiles() is lexicographic and collect preserves order, so the first
    // error is the lexicographically smallest failing tile.
    let tiles = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ContainmentReport { tiles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::fig4_spec;
    use crate::kernel::flow_out;

    #[test]
    fn fig4_thicknesses() {
        let spec = fig4_spec();
        assert_eq!(facet_thickness(&spec, 0), 1);
        assert_eq!(facet_thickness(&spec, 1), 2);
        assert_eq!(facet_thickness(&spec, 2), 2);
    }

    #[test]
    fn fig4_projections() {
        let spec = fig4_spec();
        let pi = build_projection(&spec, 0).unwrap();
        assert!(pi.in_domain(&[4, 0, 0]) && pi.in_domain(&[9, 3, 1]));
        assert!(!pi.in_domain(&[3, 0, 0]));
        let pk = build_projection(&spec, 2).unwrap();
        assert_eq!(pk.apply(&[1, 2, 8]), vec![1, 2, 0]);
        assert!(pk.in_domain(&[0, 0, 3]) && pk.in_domain(&[0, 0, 14]));
        assert!(!pk.in_domain(&[0, 0, 2]) && !pk.in_domain(&[0, 0, 5]));
    }

    #[test]
    fn full_thickness_projection_covers_the_tile() {
        let spec = KernelSpec::new(vec![8, 8], vec![4, 4], vec![vec![-4, 0], vec![0, -1]], 8).unwrap();
        let p = build_projection(&spec, 0).unwrap();
        assert!((0..8).all(|x| p.in_domain(&[x, 0])));
        assert_eq!(p.apply(&[6, 1]), vec![2, 1]);
        let tile = TileCoord(vec![1, 0]);
        assert_eq!(facet_set(&spec, &tile, 0).unwrap(), spec.point_set(spec.tile_box(&tile).points()));
    }

    #[test]
    fn absent_facet_is_rejected() {
        let spec = KernelSpec::new(vec![10, 10], vec![5, 5], vec![vec![-1, 0]], 8).unwrap();
        assert_eq!(build_projection(&spec, 1).unwrap_err(), FacetError::AbsentFacet { axis: 1 });
        assert!(facet_set(&spec, &TileCoord(vec![0, 0]), 1).is_err());
        let facets = allocate_facets(&spec).unwrap();
        assert_eq!(facets.len(), 1);
        assert_eq!(facets[0].axis, 0);
    }

    #[test]
    fn fig4_facet_sets_and_capacities() {
        let spec = fig4_spec();
        let tile = TileCoord(vec![1, 1, 1]);
        assert_eq!(facet_set(&spec, &tile, 0).unwrap().len(), 25);
        let sk = facet_set(&spec, &tile, 2).unwrap();
        assert_eq!(sk.len(), 50);
        assert!(sk.points().all(|p| p[2] == 8 || p[2] == 9));
        let capacities: Vec<u64> = allocate_facets(&spec).unwrap().iter().map(|f| f.capacity()).collect();
        assert_eq!(capacities, vec![675, 1350, 1350]);
    }

    #[test]
    fn flow_out_lies_in_own_facets() {
        let spec = fig4_spec();
        for tile in spec.tiles() {
            let out = flow_out(&spec, &tile).unwrap();
            let facets: Vec<PointSet> = (0..3).map(|k| facet_set(&spec, &tile, k).unwrap()).collect();
            let all = facets.iter().skip(1).fold(facets[0].clone(), |acc, s| acc.union(s));
            assert!(out.is_subset(&all));
        }
    }

    #[test]
    fn thinned_facet_is_caught() {
        let spec = fig4_spec();
        let mut facets = allocate_facets(&spec).unwrap();
        facets[1].thickness -= 1;
        let err = verify_containment_with(&spec, &facets).unwrap_err();
        match err {
            FacetError::ContainmentViolation { point, tile, producer } => {
                assert_eq!(spec.tile_of(&point).unwrap(), producer);
                assert_ne!(tile, producer);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_flow_when_nothing_crosses() {
        // A zero-reach pattern cannot pass validation, so build facets by hand.
        let spec = fig4_spec();
        let mut facets = allocate_facets(&spec).unwrap();
        for f in &mut facets {
            f.thickness = 0;
        }
        assert!(verify_containment_with(&spec, &facets).is_err());
    }
}
