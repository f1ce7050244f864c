//! Rectangular iteration spaces, rectangular tiles and uniform backward
//! dependence patterns.

use std::fmt;

use thiserror::Error;

/// An integer point of the iteration space.
pub type Point = Vec<i64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("iteration space needs at least 2 dimensions, got {0}")]
    TooFewDims(usize),
    #[error("{field} has {got} entries, expected {expected}")]
    DimMismatch {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{field}[{axis}] must be positive, got {value}")]
    NonPositive {
        field: &'static str,
        axis: usize,
        value: i64,
    },
    #[error("at least one dependence vector is required")]
    NoDeps,
    #[error("dependence {index} is the zero vector")]
    ZeroDep { index: usize },
    #[error("dependence {index} has a positive component on axis {axis}: {dep:?}")]
    NonUniformOrForwardDep { index: usize, axis: usize, dep: Vec<i64> },
    #[error("tile size {tile} does not divide space size {space} on axis {axis}")]
    TileMismatch { axis: usize, space: i64, tile: i64 },
    #[error("dependence {index} reaches {reach} on axis {axis}, beyond tile size {tile}")]
    DepExceedsTile {
        index: usize,
        axis: usize,
        reach: i64,
        tile: i64,
    },
    #[error("element width must be positive")]
    ZeroElementBytes,
    #[error("point {0:?} lies outside the iteration space")]
    OutOfSpace(Point),
    #[error("tile {0} lies outside the tile grid")]
    TileOutOfRange(TileCoord),
    #[error("tiles {a} and {b} are not neighbors")]
    NotANeighbor { a: TileCoord, b: TileCoord },
}

/// A tiled loop nest with uniform dependences: the problem instance.
///
/// Dependence vectors point from a consumer iteration to its producer, so
/// iteration `x` reads the result of `x + dep` for every `dep`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelSpec {
    pub space_sizes: Vec<i64>,
    pub tile_sizes: Vec<i64>,
    pub deps: Vec<Vec<i64>>,
    pub element_bytes: u32,
}

impl KernelSpec {
    pub fn new(
        space_sizes: Vec<i64>,
        tile_sizes: Vec<i64>,
        deps: Vec<Vec<i64>>,
        element_bytes: u32,
    ) -> Result<Self, KernelError> {
        let spec = KernelSpec {
            space_sizes,
            tile_sizes,
            deps,
            element_bytes,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dims(&self) -> usize {
        self.space_sizes.len()
    }

    /// Checks every structural invariant of the instance.
    pub fn validate(&self) -> Result<(), KernelError> {
        let d = self.dims();
        if d < 2 {
            return Err(KernelError::TooFewDims(d));
        }
        if self.tile_sizes.len() != d {
            return Err(KernelError::DimMismatch {
                field: "tile_sizes",
                expected: d,
                got: self.tile_sizes.len(),
            });
        }
        for (field, values) in [("space_sizes", &self.space_sizes), ("tile_sizes", &self.tile_sizes)] {
            if let Some((axis, &value)) = values.iter().enumerate().find(|(_, v)| **v <= 0) {
                return Err(KernelError::NonPositive { field, axis, value });
            }
        }
        if self.element_bytes == 0 {
            return Err(KernelError::ZeroElementBytes);
        }
        if self.deps.is_empty() {
            return Err(KernelError::NoDeps);
        }
        for (index, dep) in self.deps.iter().enumerate() {
            if dep.len() != d {
                return Err(KernelError::DimMismatch {
                    field: "deps",
                    expected: d,
                    got: dep.len(),
                });
            }
            if dep.iter().all(|&c| c == 0) {
                return Err(KernelError::ZeroDep { index });
            }
            if let Some(axis) = dep.iter().position(|&c| c > 0) {
                return Err(KernelError::NonUniformOrForwardDep {
                    index,
                    axis,
                    dep: dep.clone(),
                });
            }
        }
        for axis in 0..d {
            let (space, tile) = (self.space_sizes[axis], self.tile_sizes[axis]);
            if space % tile != 0 {
                return Err(KernelError::TileMismatch { axis, space, tile });
            }
        }
        for (index, dep) in self.deps.iter().enumerate() {
            for axis in 0..d {
                let reach = -dep[axis];
                if reach > self.tile_sizes[axis] {
                    return Err(KernelError::DepExceedsTile {
                        index,
                        axis,
                        reach,
                        tile: self.tile_sizes[axis],
                    });
                }
            }
        }
        Ok(())
    }

    /// Number of tiles along each axis.
    pub fn tile_counts(&self) -> Vec<i64> {
        self.space_sizes
            .iter()
            .zip(&self.tile_sizes)
            .map(|(n, t)| n / t)
            .collect()
    }

    pub fn total_tiles(&self) -> usize {
        self.tile_counts().iter().product::<i64>() as usize
    }

    pub fn contains(&self, point: &[i64]) -> bool {
        point.len() == self.dims()
            && point
                .iter()
                .zip(&self.space_sizes)
                .all(|(&x, &n)| (0..n).contains(&x))
    }

    pub fn tile_of(&self, point: &[i64]) -> Result<TileCoord, KernelError> {
        if !self.contains(point) {
            return Err(KernelError::OutOfSpace(point.to_vec()));
        }
        Ok(TileCoord(
            point
                .iter()
                .zip(&self.tile_sizes)
                .map(|(x, t)| x.div_euclid(*t))
                .collect(),
        ))
    }

    pub fn check_tile(&self, tile: &TileCoord) -> Result<(), KernelError> {
        let counts = self.tile_counts();
        if tile.0.len() != counts.len()
            || tile.0.iter().zip(&counts).any(|(&i, &n)| !(0..n).contains(&i))
        {
            return Err(KernelError::TileOutOfRange(tile.clone()));
        }
        Ok(())
    }

    /// All tiles in lexicographic order. Because every dependence is
    /// backward, this order is a legal tile schedule.
    pub fn tiles(&self) -> Vec<TileCoord> {
        Boxed::new(vec![0; self.dims()], self.tile_counts())
            .points()
            .map(TileCoord)
            .collect()
    }

    /// The hyperrectangle of points covered by `tile`.
    pub fn tile_box(&self, tile: &TileCoord) -> Boxed {
        let lo: Vec<i64> = tile.0.iter().zip(&self.tile_sizes).map(|(i, t)| i * t).collect();
        Boxed::new(lo, self.tile_sizes.clone())
    }

    /// Maximum reach of the dependence pattern along each axis.
    pub fn reach(&self) -> Vec<i64> {
        (0..self.dims())
            .map(|axis| self.deps.iter().map(|dep| -dep[axis]).max().unwrap_or(0))
            .collect()
    }

    /// Row-major linear index of a point of the space.
    pub fn linear_index(&self, point: &[i64]) -> u64 {
        linear_index(&self.space_sizes, point)
    }

    pub fn point_at(&self, index: u64) -> Point {
        point_at(&self.space_sizes, index)
    }

    pub fn empty_set(&self) -> PointSet {
        PointSet {
            extents: self.space_sizes.clone(),
            indices: Vec::new(),
        }
    }

    pub fn point_set<I: IntoIterator<Item = Point>>(&self, points: I) -> PointSet {
        let indices = points.into_iter().map(|p| self.linear_index(&p)).collect();
        PointSet::from_indices(self.space_sizes.clone(), indices)
    }
}

pub(crate) fn linear_index(extents: &[i64], point: &[i64]) -> u64 {
    point
        .iter()
        .zip(extents)
        .fold(0u64, |acc, (&x, &n)| acc * n as u64 + x as u64)
}

pub(crate) fn point_at(extents: &[i64], mut index: u64) -> Point {
    let mut point = vec![0; extents.len()];
    for axis in (0..extents.len()).rev() {
        let n = extents[axis] as u64;
        point[axis] = (index % n) as i64;
        index /= n;
    }
    point
}

/// Tile indices, 0-based along each axis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileCoord(pub Vec<i64>);

impl TileCoord {
    pub fn offset(&self, delta: &[i64]) -> TileCoord {
        TileCoord(self.0.iter().zip(delta).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Display for TileCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Count of axes on which two adjacent tiles differ.
pub fn neighbor_level(a: &TileCoord, b: &TileCoord) -> Result<usize, KernelError> {
    let not_neighbor = || KernelError::NotANeighbor {
        a: a.clone(),
        b: b.clone(),
    };
    if a.0.len() != b.0.len() || a == b {
        return Err(not_neighbor());
    }
    let mut level = 0;
    for (x, y) in a.0.iter().zip(&b.0) {
        match (x - y).abs() {
            0 => {}
            1 => level += 1,
            _ => return Err(not_neighbor()),
        }
    }
    Ok(level)
}

/// An axis-aligned hyperrectangle `lo .. lo + extent`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Boxed {
    pub lo: Vec<i64>,
    pub extent: Vec<i64>,
}

impl Boxed {
    pub fn new(lo: Vec<i64>, extent: Vec<i64>) -> Self {
        Boxed { lo, extent }
    }

    /// Smallest box containing every point, or `None` for no points.
    pub fn bounding<'a, I: IntoIterator<Item = &'a [i64]>>(points: I) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for p in iter {
            for q in 0..p.len() {
                lo[q] = lo[q].min(p[q]);
                hi[q] = hi[q].max(p[q]);
            }
        }
        let extent = lo.iter().zip(&hi).map(|(l, h)| h - l + 1).collect();
        Some(Boxed { lo, extent })
    }

    pub fn hi(&self) -> Vec<i64> {
        self.lo.iter().zip(&self.extent).map(|(l, e)| l + e).collect()
    }

    pub fn len(&self) -> u64 {
        self.extent.iter().map(|&e| e.max(0) as u64).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, point: &[i64]) -> bool {
        point
            .iter()
            .zip(self.lo.iter().zip(&self.extent))
            .all(|(&x, (&l, &e))| x >= l && x < l + e)
    }

    pub fn intersect(&self, other: &Boxed) -> Option<Boxed> {
        let mut lo = Vec::with_capacity(self.lo.len());
        let mut extent = Vec::with_capacity(self.lo.len());
        for q in 0..self.lo.len() {
            let l = self.lo[q].max(other.lo[q]);
            let h = (self.lo[q] + self.extent[q]).min(other.lo[q] + other.extent[q]);
            if h <= l {
                return None;
            }
            lo.push(l);
            extent.push(h - l);
        }
        Some(Boxed { lo, extent })
    }

    /// Points in lexicographic order.
    pub fn points(&self) -> BoxPoints {
        BoxPoints {
            lo: self.lo.clone(),
            hi: self.hi(),
            next: if self.is_empty() { None } else { Some(self.lo.clone()) },
        }
    }
}

pub struct BoxPoints {
    lo: Vec<i64>,
    hi: Vec<i64>,
    next: Option<Point>,
}

impl Iterator for BoxPoints {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut axis = succ.len();
        loop {
            if axis == 0 {
                break;
            }
            axis -= 1;
            succ[axis] += 1;
            if succ[axis] < self.hi[axis] {
                self.next = Some(succ);
                break;
            }
            succ[axis] = self.lo[axis];
        }
        Some(current)
    }
}

/// A finite set of points of one iteration space, kept as sorted row-major
/// indices. Sorted index order is lexicographic point order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    extents: Vec<i64>,
    indices: Vec<u64>,
}

impl PointSet {
    pub fn from_indices(extents: Vec<i64>, mut indices: Vec<u64>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        PointSet { extents, indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn extents(&self) -> &[i64] {
        &self.extents
    }

    pub fn contains(&self, point: &[i64]) -> bool {
        point
            .iter()
            .zip(&self.extents)
            .all(|(&x, &n)| (0..n).contains(&x))
            && self.contains_index(linear_index(&self.extents, point))
    }

    pub fn contains_index(&self, index: u64) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        self.indices.iter().map(|&i| point_at(&self.extents, i))
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.indices.iter().all(|&i| other.contains_index(i))
    }

    pub fn is_disjoint(&self, other: &PointSet) -> bool {
        self.indices.iter().all(|&i| !other.contains_index(i))
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        let mut indices = self.indices.clone();
        indices.extend_from_slice(&other.indices);
        PointSet::from_indices(self.extents.clone(), indices)
    }

    pub fn intersect_box(&self, bx: &Boxed) -> PointSet {
        let indices = self
            .indices
            .iter()
            .copied()
            .filter(|&i| bx.contains(&point_at(&self.extents, i)))
            .collect();
        PointSet {
            extents: self.extents.clone(),
            indices,
        }
    }

    pub fn bounding_box(&self) -> Option<Boxed> {
        let points: Vec<Point> = self.points().collect();
        Boxed::bounding(points.iter().map(|p| p.as_slice()))
    }
}

/// Reference flow-in set: points outside `tile` whose results it consumes,
/// by enumeration of every point of the tile against every dependence.
pub fn flow_in(spec: &KernelSpec, tile: &TileCoord) -> Result<PointSet, KernelError> {
    spec.check_tile(tile)?;
    let bx = spec.tile_box(tile);
    let mut indices = Vec::new();
    let mut y = vec![0; spec.dims()];
    for x in bx.points() {
        for dep in &spec.deps {
            for q in 0..y.len() {
                y[q] = x[q] + dep[q];
            }
            if spec.contains(&y) && !bx.contains(&y) {
                indices.push(spec.linear_index(&y));
            }
        }
    }
    Ok(PointSet::from_indices(spec.space_sizes.clone(), indices))
}

/// Reference flow-out set: points of `tile` consumed by some other tile.
pub fn flow_out(spec: &KernelSpec, tile: &TileCoord) -> Result<PointSet, KernelError> {
    spec.check_tile(tile)?;
    let bx = spec.tile_box(tile);
    let mut indices = Vec::new();
    let mut consumer = vec![0; spec.dims()];
    for x in bx.points() {
        let used_outside = spec.deps.iter().any(|dep| {
            for q in 0..consumer.len() {
                consumer[q] = x[q] - dep[q];
            }
            spec.contains(&consumer) && !bx.contains(&consumer)
        });
        if used_outside {
            indices.push(spec.linear_index(&x));
        }
    }
    Ok(PointSet::from_indices(spec.space_sizes.clone(), indices))
}

/// Relative positions of the tiles that can produce flow-in data, i.e.
/// every vector of `{-1, 0}^d` except zero, ordered by neighbor level and
/// then lexicographically.
pub fn producer_offsets(dims: usize) -> Vec<Vec<i64>> {
    let mut offsets: Vec<Vec<i64>> = (1u32..(1 << dims))
        .map(|mask| {
            (0..dims)
                .map(|q| if mask & (1 << (dims - 1 - q)) != 0 { -1 } else { 0 })
                .collect()
        })
        .collect();
    offsets.sort_by_key(|delta: &Vec<i64>| {
        let level = delta.iter().filter(|&&c| c != 0).count();
        (level, delta.clone())
    });
    offsets
}

/// Flow-in of `tile` split per producer tile, computed by scanning only the
/// slab of each producer that dependences can reach. Equivalent to
/// [`flow_in`] but proportional to the flow size instead of the tile volume.
pub fn flow_in_by_producer(spec: &KernelSpec, tile: &TileCoord) -> Vec<(Vec<i64>, PointSet)> {
    let reach = spec.reach();
    let tile_box = spec.tile_box(tile);
    let mut pieces = Vec::new();
    for delta in producer_offsets(spec.dims()) {
        let producer = tile.offset(&delta);
        if spec.check_tile(&producer).is_err() {
            continue;
        }
        let pbox = spec.tile_box(&producer);
        let mut lo = pbox.lo.clone();
        let mut extent = pbox.extent.clone();
        for q in 0..delta.len() {
            if delta[q] != 0 {
                lo[q] += extent[q] - reach[q];
                extent[q] = reach[q];
            }
        }
        let region = Boxed::new(lo, extent);
        let mut indices = Vec::new();
        let mut consumer = vec![0; spec.dims()];
        for y in region.points() {
            let consumed = spec.deps.iter().any(|dep| {
                for q in 0..consumer.len() {
                    consumer[q] = y[q] - dep[q];
                }
                tile_box.contains(&consumer)
            });
            if consumed {
                indices.push(spec.linear_index(&y));
            }
        }
        if !indices.is_empty() {
            pieces.push((delta, PointSet::from_indices(spec.space_sizes.clone(), indices)));
        }
    }
    pieces
}

/// Flow-out restricted to the reach slabs of the tile. Equivalent to
/// [`flow_out`].
pub fn flow_out_fast(spec: &KernelSpec, tile: &TileCoord) -> PointSet {
    let reach = spec.reach();
    let bx = spec.tile_box(tile);
    let mut indices = Vec::new();
    let mut consumer = vec![0; spec.dims()];
    for axis in 0..spec.dims() {
        if reach[axis] == 0 {
            continue;
        }
        let mut lo = bx.lo.clone();
        let mut extent = bx.extent.clone();
        lo[axis] += extent[axis] - reach[axis];
        extent[axis] = reach[axis];
        for x in Boxed::new(lo, extent).points() {
            let used = spec.deps.iter().any(|dep| {
                for q in 0..consumer.len() {
                    consumer[q] = x[q] - dep[q];
                }
                spec.contains(&consumer) && !bx.contains(&consumer)
            });
            if used {
                indices.push(spec.linear_index(&x));
            }
        }
    }
    PointSet::from_indices(spec.space_sizes.clone(), indices)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(n: i64, t: i64, deps: Vec<Vec<i64>>) -> KernelSpec {
        KernelSpec::new(vec![n; 3], vec![t; 3], deps, 8).unwrap()
    }

    #[test]
    fn rejects_zero_dependence() {
        let err = KernelSpec::new(vec![15; 3], vec![5; 3], vec![vec![0, 0, 0]], 8).unwrap_err();
        assert_eq!(err, KernelError::ZeroDep { index: 0 });
    }

    #[test]
    fn rejects_dependence_longer_than_tile() {
        let err = KernelSpec::new(vec![15; 3], vec![5; 3], vec![vec![-6, 0, 0]], 8).unwrap_err();
        assert!(matches!(err, KernelError::DepExceedsTile { axis: 0, reach: 6, .. }));
    }

    #[test]
    fn rejects_forward_dependence_and_partial_tiles() {
        let err = KernelSpec::new(vec![15; 3], vec![5; 3], vec![vec![-1, 1, 0]], 8).unwrap_err();
        assert!(matches!(err, KernelError::NonUniformOrForwardDep { axis: 1, .. }));
        let err = KernelSpec::new(vec![16, 15, 15], vec![5; 3], vec![vec![-1, 0, 0]], 8).unwrap_err();
        assert!(matches!(err, KernelError::TileMismatch { axis: 0, .. }));
        let err = KernelSpec::new(vec![15], vec![5], vec![vec![-1]], 8).unwrap_err();
        assert_eq!(err, KernelError::TooFewDims(1));
    }

    #[test]
    fn tile_of_is_floor_division() {
        let spec = cube(15, 5, vec![vec![-1, 0, 0]]);
        assert_eq!(spec.tile_of(&[4, 9, 0]).unwrap(), TileCoord(vec![0, 1, 0]));
        assert_eq!(spec.tile_of(&[0, 0, 0]).unwrap(), TileCoord(vec![0, 0, 0]));
        assert!(matches!(spec.tile_of(&[15, 0, 0]), Err(KernelError::OutOfSpace(_))));
        let spec = KernelSpec::new(vec![8, 32, 32], vec![4, 16, 16], vec![vec![-1, 0, 0]], 8).unwrap();
        assert_eq!(spec.tile_of(&[7, 31, 0]).unwrap(), TileCoord(vec![1, 1, 0]));
    }

    #[test]
    fn single_dep_flow_in_is_one_plane() {
        let spec = cube(15, 5, vec![vec![-1, 0, 0]]);
        let set = flow_in(&spec, &TileCoord(vec![1, 1, 1])).unwrap();
        assert_eq!(set.len(), 25);
        assert!(set.points().all(|p| p[0] == 4 && (5..10).contains(&p[1]) && (5..10).contains(&p[2])));
    }

    #[test]
    fn single_dep_flow_out_is_last_plane() {
        let spec = cube(15, 5, vec![vec![-1, 0, 0]]);
        let set = flow_out(&spec, &TileCoord(vec![1, 1, 1])).unwrap();
        assert_eq!(set.len(), 25);
        assert!(set.points().all(|p| p[0] == 9));
        let last = flow_out(&spec, &TileCoord(vec![2, 2, 2])).unwrap();
        assert!(last.is_empty());
    }

    #[test]
    fn neighbor_levels() {
        let base = TileCoord(vec![5, 5, 5]);
        assert_eq!(neighbor_level(&TileCoord(vec![5, 6, 5]), &base).unwrap(), 1);
        assert_eq!(neighbor_level(&TileCoord(vec![4, 6, 5]), &base).unwrap(), 2);
        assert_eq!(neighbor_level(&TileCoord(vec![6, 6, 6]), &base).unwrap(), 3);
        assert!(neighbor_level(&base, &base).is_err());
        assert!(neighbor_level(&TileCoord(vec![7, 5, 5]), &base).is_err());
    }

    #[test]
    fn producer_offsets_are_ordered_by_level() {
        let offsets = producer_offsets(3);
        assert_eq!(offsets.len(), 7);
        assert_eq!(offsets[0], vec![-1, 0, 0]);
        assert_eq!(offsets[2], vec![0, 0, -1]);
        assert_eq!(offsets[3], vec![-1, -1, 0]);
        assert_eq!(offsets[6], vec![-1, -1, -1]);
    }

    #[test]
    fn box_points_enumerate_lexicographically() {
        let pts: Vec<Point> = Boxed::new(vec![1, 2], vec![2, 2]).points().collect();
        assert_eq!(pts, vec![vec![1, 2], vec![1, 3], vec![2, 2], vec![2, 3]]);
        assert_eq!(Boxed::new(vec![0, 0], vec![0, 3]).points().count(), 0);
    }
}
