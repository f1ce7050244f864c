//! Concrete off-chip layouts of facet data spaces.
//!
//! Every facet is data-tiled with the iteration tile sizes: each surviving
//! axis `q` becomes an outer (tile index) and an inner (offset in tile)
//! dimension, the normal axis keeps only its tile index (the
//! single-assignment dimension) plus the slab dimension of extent `w_k`.
//! Outer dimensions always precede inner ones, so each tile's facet is one
//! contiguous block. Permuting the outer dimensions picks which neighbor
//! block comes next in memory; permuting the inner ones picks which part of
//! a block sits at its end.

use std::fmt;

use thiserror::Error;

use crate::facet::{allocate_facets, axis_name, FacetDescriptor, FacetError};
use crate::kernel::{flow_in_by_producer, producer_offsets, Boxed, KernelSpec, Point, TileCoord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("point {point:?} is outside the domain of {facet}")]
    OutOfDomain { facet: String, point: Point },
    #[error("dimension order {0} is not a permutation of the facet dimensions")]
    BadOrder(String),
    #[error(transparent)]
    Facet(#[from] FacetError),
}

/// One dimension of a data-tiled facet space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FacetDim {
    /// Tile index along an axis. For the normal axis this is the
    /// single-assignment dimension.
    Outer(usize),
    /// Offset inside the tile along a surviving axis.
    Inner(usize),
    /// Position inside the `w_k`-deep slab along the normal axis.
    Slab,
}

/// Tiled dimension list of a facet in default order: single-assignment
/// dimension, other outer dimensions, inner dimensions, then the slab
/// dimension (dropped when the facet is one plane thick).
pub fn data_tile(desc: &FacetDescriptor) -> Vec<(FacetDim, i64)> {
    let d = desc.space_sizes.len();
    let k = desc.axis;
    let mut dims = vec![(FacetDim::Outer(k), desc.sa_extent)];
    for q in (0..d).filter(|&q| q != k) {
        dims.push((FacetDim::Outer(q), desc.space_sizes[q] / desc.tile_sizes[q]));
    }
    for q in (0..d).filter(|&q| q != k) {
        dims.push((FacetDim::Inner(q), desc.tile_sizes[q]));
    }
    if desc.thickness > 1 {
        dims.push((FacetDim::Slab, desc.thickness));
    }
    dims
}

/// Exact address function of one facet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacetLayout {
    pub facet: FacetDescriptor,
    pub order: Vec<FacetDim>,
    pub extents: Vec<i64>,
    pub strides: Vec<u64>,
    /// First element of this facet in the shared address space.
    pub base: u64,
    /// Axis along which consecutive tiles' blocks are adjacent (the last
    /// outer dimension), when it is a surviving axis.
    pub contiguity_axis: Option<usize>,
}

impl FacetLayout {
    /// Builds the layout for an explicit dimension order.
    pub fn with_order(
        facet: FacetDescriptor,
        order: Vec<FacetDim>,
        base: u64,
    ) -> Result<Self, LayoutError> {
        let default = data_tile(&facet);
        let mut expected: Vec<FacetDim> = default.iter().map(|(dim, _)| *dim).collect();
        let mut given = order.clone();
        expected.sort();
        given.sort();
        let outer_first = order
            .iter()
            .position(|d| !matches!(d, FacetDim::Outer(_)))
            .is_none_or(|first_inner| {
                order[first_inner..].iter().all(|d| !matches!(d, FacetDim::Outer(_)))
            });
        if expected != given || !outer_first {
            return Err(LayoutError::BadOrder(render_order(&facet, &order)));
        }
        let extents: Vec<i64> = order
            .iter()
            .map(|dim| default.iter().find(|(d, _)| d == dim).map(|(_, e)| *e).unwrap())
            .collect();
        let mut strides = vec![1u64; order.len()];
        for idx in (0..order.len().saturating_sub(1)).rev() {
            strides[idx] = strides[idx + 1] * extents[idx + 1] as u64;
        }
        let contiguity_axis = order
            .iter()
            .rev()
            .find_map(|d| match d {
                FacetDim::Outer(q) => Some(*q),
                _ => None,
            })
            .filter(|&q| q != facet.axis);
        Ok(FacetLayout {
            facet,
            order,
            extents,
            strides,
            base,
            contiguity_axis,
        })
    }

    pub fn name(&self) -> String {
        self.facet.name()
    }

    pub fn capacity(&self) -> u64 {
        self.facet.capacity()
    }

    pub fn block_len(&self) -> u64 {
        self.facet.block_len()
    }

    /// Elements in one row of blocks along the contiguity axis: the span over
    /// which all outer coordinates but the last are fixed.
    pub fn row_len(&self) -> u64 {
        let n_outer = self.order.iter().filter(|d| matches!(d, FacetDim::Outer(_))).count();
        if n_outer >= 2 {
            self.strides[n_outer - 2]
        } else {
            self.capacity().max(1)
        }
    }

    fn coord(&self, dim: FacetDim, point: &[i64]) -> i64 {
        let t = &self.facet.tile_sizes;
        match dim {
            FacetDim::Outer(q) => point[q].div_euclid(t[q]),
            FacetDim::Inner(q) => point[q].rem_euclid(t[q]),
            FacetDim::Slab => {
                let k = self.facet.axis;
                point[k].rem_euclid(t[k]) - (t[k] - self.facet.thickness)
            }
        }
    }

    pub fn in_domain(&self, point: &[i64]) -> bool {
        point.len() == self.facet.space_sizes.len()
            && point
                .iter()
                .zip(&self.facet.space_sizes)
                .all(|(&x, &n)| (0..n).contains(&x))
            && self.facet.in_domain(point)
    }

    /// Offset of `point` in the shared address space.
    pub fn linearize(&self, point: &[i64]) -> Result<u64, LayoutError> {
        if !self.in_domain(point) {
            return Err(LayoutError::OutOfDomain {
                facet: self.name(),
                point: point.to_vec(),
            });
        }
        Ok(self.base + self.local_offset(point))
    }

    /// Offset relative to `base`; caller guarantees the point is in domain.
    pub(crate) fn local_offset(&self, point: &[i64]) -> u64 {
        self.order
            .iter()
            .zip(&self.strides)
            .map(|(&dim, &stride)| self.coord(dim, point) as u64 * stride)
            .sum()
    }

    /// Inverse of [`linearize`](Self::linearize).
    pub fn point_at(&self, offset: u64) -> Option<Point> {
        if offset < self.base || offset >= self.base + self.capacity() {
            return None;
        }
        let local = offset - self.base;
        let d = self.facet.space_sizes.len();
        let k = self.facet.axis;
        let t = &self.facet.tile_sizes;
        let mut outer = vec![0i64; d];
        let mut inner = vec![0i64; d];
        let mut slab = 0;
        for ((&dim, &stride), &extent) in self.order.iter().zip(&self.strides).zip(&self.extents) {
            let c = ((local / stride) % extent as u64) as i64;
            match dim {
                FacetDim::Outer(q) => outer[q] = c,
                FacetDim::Inner(q) => inner[q] = c,
                FacetDim::Slab => slab = c,
            }
        }
        inner[k] = t[k] - self.facet.thickness + slab;
        Some((0..d).map(|q| outer[q] * t[q] + inner[q]).collect())
    }

    /// Offset of the first element of `tile`'s block.
    pub fn block_start(&self, tile: &TileCoord) -> u64 {
        self.base
            + self
                .order
                .iter()
                .zip(&self.strides)
                .filter_map(|(dim, stride)| match dim {
                    FacetDim::Outer(q) => Some(tile.0[*q] as u64 * stride),
                    _ => None,
                })
                .sum::<u64>()
    }

    /// Per-axis coefficient of the tile coordinate in [`block_start`](Self::block_start).
    pub fn tile_strides(&self) -> Vec<u64> {
        let mut coef = vec![0; self.facet.space_sizes.len()];
        for (dim, stride) in self.order.iter().zip(&self.strides) {
            if let FacetDim::Outer(q) = dim {
                coef[*q] = *stride;
            }
        }
        coef
    }

    pub fn order_string(&self) -> String {
        render_order(&self.facet, &self.order)
    }
}

pub fn dim_name(facet: &FacetDescriptor, dim: FacetDim) -> String {
    match dim {
        FacetDim::Outer(q) => axis_name(q).repeat(2),
        FacetDim::Inner(q) => axis_name(q),
        FacetDim::Slab => format!("{} % {}", axis_name(facet.axis), facet.thickness),
    }
}

fn render_order(facet: &FacetDescriptor, order: &[FacetDim]) -> String {
    order.iter().map(|&d| format!("[{}]", dim_name(facet, d))).collect()
}

/// Per-facet choice of inter-tile contiguity axis and inner order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContiguityAssignment {
    pub facets: Vec<FacetChoice>,
    /// Second-level producer pairs `(a, b)` whose flow cannot be read as an
    /// extension of a first-level facet read.
    pub uncovered_pairs: Vec<(usize, usize)>,
    /// Facet holding the third-level corner set as one run (3-d only).
    pub corner_facet: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacetChoice {
    pub axis: usize,
    pub contiguity_axis: Option<usize>,
    pub order: Vec<FacetDim>,
}

impl ContiguityAssignment {
    pub fn choice(&self, axis: usize) -> Option<&FacetChoice> {
        self.facets.iter().find(|c| c.axis == axis)
    }
}

/// A spec of the same pattern and tile sizes with two tiles per axis, used
/// to look at interior flow shapes independently of the real space size.
fn probe_spec(spec: &KernelSpec) -> KernelSpec {
    KernelSpec {
        space_sizes: spec.tile_sizes.iter().map(|t| 2 * t).collect(),
        ..spec.clone()
    }
}

fn order_for(desc: &FacetDescriptor, contiguity: Option<usize>) -> Vec<FacetDim> {
    let d = desc.space_sizes.len();
    let k = desc.axis;
    let mut order = vec![FacetDim::Outer(k)];
    order.extend((0..d).filter(|&q| q != k && Some(q) != contiguity).map(FacetDim::Outer));
    if let Some(c) = contiguity {
        order.push(FacetDim::Outer(c));
        order.push(FacetDim::Inner(c));
    }
    order.extend((0..d).filter(|&q| q != k && Some(q) != contiguity).map(FacetDim::Inner));
    if desc.thickness > 1 {
        order.push(FacetDim::Slab);
    }
    order
}

/// Chooses each facet's inter-tile contiguity axis and dimension order.
///
/// Contiguity axes are distinct across facets. Among all such assignments
/// the one covering the most second-level producer pairs wins; ties go to
/// the lexicographically smallest (facet axis ascending, contiguity axis
/// ascending). The chosen axis becomes the last outer and first inner
/// dimension. For 3-d spaces the inner order of one facet may then be
/// permuted so the corner set from the third-level neighbor is one run.
pub fn assign_contiguity(
    spec: &KernelSpec,
    facets: &[FacetDescriptor],
) -> Result<ContiguityAssignment, LayoutError> {
    let d = spec.dims();
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|a| (a + 1..d).map(move |b| (a, b)))
        .filter(|&(a, b)| spec.deps.iter().any(|dep| dep[a] < 0 && dep[b] < 0))
        .collect();

    let candidates: Vec<Vec<usize>> = facets
        .iter()
        .map(|f| (0..d).filter(|&q| q != f.axis).collect())
        .collect();
    let mut best: Option<(usize, Vec<usize>)> = None;
    let mut current = vec![0usize; facets.len()];
    search_assignments(&candidates, 0, &mut current, &mut |assign| {
        let axes: Vec<usize> = facets.iter().map(|f| f.axis).collect();
        let covered = pairs
            .iter()
            .filter(|&&(a, b)| {
                axes.iter().zip(assign).any(|(&k, &c)| (k == a && c == b) || (k == b && c == a))
            })
            .count();
        // Enumeration is lexicographic, so only a strictly better count replaces.
        if best.as_ref().is_none_or(|(n, _)| covered > *n) {
            best = Some((covered, assign.to_vec()));
        }
    });
    let assign = best.map(|(_, a)| a).unwrap_or_default();
    let contiguity: Vec<Option<usize>> = if assign.len() == facets.len() {
        assign.iter().map(|&c| Some(c)).collect()
    } else {
        // More facets than distinct axes can only happen for d = 2 with both
        // facets present, which always has an assignment; keep a fallback.
        vec![None; facets.len()]
    };
    let uncovered_pairs = pairs
        .iter()
        .copied()
        .filter(|&(a, b)| {
            !facets.iter().zip(&contiguity).any(|(f, c)| {
                (f.axis == a && *c == Some(b)) || (f.axis == b && *c == Some(a))
            })
        })
        .collect();

    let mut choices: Vec<FacetChoice> = facets
        .iter()
        .zip(&contiguity)
        .map(|(f, &c)| FacetChoice {
            axis: f.axis,
            contiguity_axis: c,
            order: order_for(f, c),
        })
        .collect();

    let corner_facet = if d == 3 {
        place_corner(spec, facets, &mut choices)?
    } else {
        None
    };

    Ok(ContiguityAssignment {
        facets: choices,
        uncovered_pairs,
        corner_facet,
    })
}

fn search_assignments(
    candidates: &[Vec<usize>],
    idx: usize,
    current: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    if idx == candidates.len() {
        visit(current);
        return;
    }
    for &c in &candidates[idx] {
        if current[..idx].contains(&c) {
            continue;
        }
        current[idx] = c;
        search_assignments(candidates, idx + 1, current, visit);
    }
}

/// Picks the facet (and if needed an inner order) making the corner flow set
/// one run. Returns the facet axis, or `None` if no facet can.
fn place_corner(
    spec: &KernelSpec,
    facets: &[FacetDescriptor],
    choices: &mut [FacetChoice],
) -> Result<Option<usize>, LayoutError> {
    let probe = probe_spec(spec);
    let corner = vec![-1; spec.dims()];
    let consumer = TileCoord(vec![1; spec.dims()]);
    let pieces = flow_in_by_producer(&probe, &consumer);
    let Some((_, set)) = pieces.iter().find(|(delta, _)| *delta == corner) else {
        return Ok(None);
    };
    let points: Vec<Point> = set.points().collect();
    let Some(bbox) = Boxed::bounding(points.iter().map(|p| p.as_slice())) else {
        return Ok(None);
    };
    let one_run = |layout: &FacetLayout| -> bool {
        bbox.points().all(|p| layout.in_domain(&p)) && {
            let mut offs: Vec<u64> = bbox.points().map(|p| layout.local_offset(&p)).collect();
            offs.sort_unstable();
            offs.windows(2).all(|w| w[1] == w[0] + 1)
        }
    };
    let probe_facets: Vec<FacetDescriptor> = facets
        .iter()
        .map(|f| FacetDescriptor {
            space_sizes: probe.space_sizes.clone(),
            sa_extent: 2,
            ..f.clone()
        })
        .collect();
    // Default orders first, in facet axis order.
    for (f, choice) in probe_facets.iter().zip(choices.iter()) {
        if one_run(&FacetLayout::with_order(f.clone(), choice.order.clone(), 0)?) {
            return Ok(Some(f.axis));
        }
    }
    // Otherwise permute inner dimensions behind the contiguity dimension.
    for (f, choice) in probe_facets.iter().zip(choices.iter_mut()) {
        let n_outer = choice.order.iter().filter(|d| matches!(d, FacetDim::Outer(_))).count();
        let fixed = n_outer + usize::from(choice.contiguity_axis.is_some());
        let mut tail: Vec<FacetDim> = choice.order[fixed..].to_vec();
        tail.sort();
        loop {
            let mut order = choice.order[..fixed].to_vec();
            order.extend_from_slice(&tail);
            if one_run(&FacetLayout::with_order(f.clone(), order.clone(), 0)?) {
                choice.order = order;
                return Ok(Some(f.axis));
            }
            if !next_permutation(&mut tail) {
                break;
            }
        }
    }
    Ok(None)
}

fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// The complete allocation: every present facet, back to back in axis order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfaLayout {
    pub facets: Vec<FacetLayout>,
    pub assignment: ContiguityAssignment,
}

impl CfaLayout {
    pub fn build(spec: &KernelSpec) -> Result<Self, LayoutError> {
        let descs = allocate_facets(spec)?;
        let assignment = assign_contiguity(spec, &descs)?;
        let mut base = 0;
        let mut facets = Vec::with_capacity(descs.len());
        for desc in descs {
            let order = assignment.choice(desc.axis).unwrap().order.clone();
            let layout = FacetLayout::with_order(desc, order, base)?;
            base += layout.capacity();
            facets.push(layout);
        }
        Ok(CfaLayout { facets, assignment })
    }

    /// Replaces dimension orders (keyed by facet axis) and recomputes bases.
    pub fn with_orders(spec: &KernelSpec, orders: &[(usize, Vec<FacetDim>)]) -> Result<Self, LayoutError> {
        let mut layout = Self::build(spec)?;
        let mut base = 0;
        for facet in &mut layout.facets {
            let order = orders
                .iter()
                .find(|(axis, _)| *axis == facet.facet.axis)
                .map(|(_, o)| o.clone())
                .unwrap_or_else(|| facet.order.clone());
            *facet = FacetLayout::with_order(facet.facet.clone(), order, base)?;
            base += facet.capacity();
        }
        Ok(layout)
    }

    pub fn facet(&self, axis: usize) -> Option<&FacetLayout> {
        self.facets.iter().find(|f| f.facet.axis == axis)
    }

    pub fn total_len(&self) -> u64 {
        self.facets.iter().map(|f| f.capacity()).sum()
    }

    /// Facet owning an offset and the point stored there.
    pub fn point_at(&self, offset: u64) -> Option<(usize, Point)> {
        self.facets
            .iter()
            .find(|f| offset >= f.base && offset < f.base + f.capacity())
            .and_then(|f| f.point_at(offset).map(|p| (f.facet.axis, p)))
    }
}

/// A maximal range of consecutive offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Run {
    pub start: u64,
    pub len: u64,
}

impl Run {
    pub fn end(&self) -> u64 {
        self.start + self.len
    }
}

impl fmt::Display for Run {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end())
    }
}

/// Collapses sorted-or-not offsets into maximal runs of consecutive values.
pub fn runs_of(mut offsets: Vec<u64>) -> Vec<Run> {
    offsets.sort_unstable();
    offsets.dedup();
    let mut runs: Vec<Run> = Vec::new();
    for off in offsets {
        match runs.last_mut() {
            Some(run) if run.end() == off => run.len += 1,
            _ => runs.push(Run { start: off, len: 1 }),
        }
    }
    runs
}

/// Maximal runs of the images of `points` under `layout`.
pub fn contiguity_check<'a, I>(layout: &FacetLayout, points: I) -> Result<Vec<Run>, LayoutError>
where
    I: IntoIterator<Item = &'a [i64]>,
{
    let offsets = points
        .into_iter()
        .map(|p| layout.linearize(p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(runs_of(offsets))
}

/// Renders the per-facet layout table printed by `cfa plan --layout`.
pub fn layout_table(layout: &CfaLayout, element_bytes: u32) -> String {
    let mut out = String::from("facet\taxis\twidth\tcontiguity\torder\textents\tstrides\tbase\tbytes\n");
    for f in &layout.facets {
        let join = |v: Vec<String>| v.join("x");
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            f.name(),
            axis_name(f.facet.axis),
            f.facet.thickness,
            f.contiguity_axis.map(axis_name).unwrap_or_else(|| "-".into()),
            f.order_string(),
            join(f.extents.iter().map(i64::to_string).collect()),
            join(f.strides.iter().map(u64::to_string).collect()),
            f.base,
            f.capacity() * element_bytes as u64,
        ));
    }
    out
}

/// Per-facet summary printed by `cfa plan`.
pub fn facet_table(layout: &CfaLayout) -> String {
    let mut out = String::from("facet\taxis\twidth\tcapacity\torder\n");
    for f in &layout.facets {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            f.name(),
            axis_name(f.facet.axis),
            f.facet.thickness,
            f.capacity(),
            f.order_string()
        ));
    }
    out
}

/// Every producer offset of the 3-d corner, exposed for reports.
pub fn corner_offset(dims: usize) -> Vec<i64> {
    producer_offsets(dims).pop().unwrap_or_default()
}
