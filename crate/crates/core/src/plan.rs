//! Per-tile copy-in/copy-out transaction plans for the facet allocation and
//! the three baseline layouts of the original array.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::kernel::{
    flow_in_by_producer, flow_out_fast, linear_index, point_at, Boxed, KernelSpec, Point, PointSet,
    TileCoord,
};
use crate::layout::{runs_of, CfaLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayoutKind {
    Cfa,
    Original,
    Bbox,
    Dtile,
}

impl LayoutKind {
    pub const ALL: [LayoutKind; 4] = [LayoutKind::Cfa, LayoutKind::Original, LayoutKind::Bbox, LayoutKind::Dtile];

    pub fn as_str(self) -> &'static str {
        match self {
            LayoutKind::Cfa => "cfa",
            LayoutKind::Original => "original",
            LayoutKind::Bbox => "bbox",
            LayoutKind::Dtile => "dtile",
        }
    }
}

impl fmt::Display for LayoutKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayoutKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LayoutKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown layout `{s}` (expected cfa, original, bbox or dtile)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TxKind {
    Burst,
    Element,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Read,
    Write,
}

/// Useful sub-ranges of a transaction, relative to its base. Only fetched
/// elements inside these ranges are stored on chip.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Guard {
    pub ranges: Vec<(u64, u64)>,
}

impl Guard {
    pub fn accepts(&self, rel: u64) -> bool {
        let idx = self.ranges.partition_point(|&(start, _)| start <= rel);
        idx > 0 && {
            let (start, len) = self.ranges[idx - 1];
            rel < start + len
        }
    }

    pub fn useful(&self) -> u64 {
        self.ranges.iter().map(|(_, len)| len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub kind: TxKind,
    pub direction: Direction,
    pub base: u64,
    pub length: u64,
    /// Elements of this transaction that carry flow data.
    pub useful: u64,
    /// Present on reads that fetch more than their useful elements.
    pub guard: Option<Guard>,
}

impl Transaction {
    pub fn end(&self) -> u64 {
        self.base + self.length
    }

    /// Whether the element at `rel` is stored on chip (reads) or carries
    /// flow data (writes are never filtered).
    pub fn accepts(&self, rel: u64) -> bool {
        self.guard.as_ref().is_none_or(|g| g.accepts(rel))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferPlan {
    pub tile: TileCoord,
    pub layout: LayoutKind,
    /// Data tile sizes of the `Dtile` layout.
    pub data_tile: Option<Vec<i64>>,
    pub reads: Vec<Transaction>,
    pub writes: Vec<Transaction>,
    pub element_bytes: u32,
}

impl TransferPlan {
    pub fn transactions(&self) -> impl Iterator<Item = &Transaction> {
        self.reads.iter().chain(&self.writes)
    }

    pub fn total_elems(&self) -> u64 {
        self.transactions().map(|t| t.length).sum()
    }

    pub fn useful_elems(&self) -> u64 {
        self.transactions().map(|t| t.useful).sum()
    }

    pub fn total_bytes(&self) -> u64 {
        self.total_elems() * self.element_bytes as u64
    }

    pub fn useful_bytes(&self) -> u64 {
        self.useful_elems() * self.element_bytes as u64
    }

    pub fn transaction_count(&self) -> usize {
        self.reads.len() + self.writes.len()
    }
}

/// Groups `(offset, useful)` elements into maximal consecutive runs, one
/// transaction per run.
fn transactions_from_elements(mut elems: Vec<(u64, bool)>, direction: Direction) -> Vec<Transaction> {
    elems.sort_unstable_by_key(|e| e.0);
    elems.dedup_by_key(|e| e.0);
    let mut out = Vec::new();
    let mut i = 0;
    while i < elems.len() {
        let start = elems[i].0;
        let mut j = i + 1;
        while j < elems.len() && elems[j].0 == elems[j - 1].0 + 1 {
            j += 1;
        }
        let run = &elems[i..j];
        let mut ranges: Vec<(u64, u64)> = Vec::new();
        for (idx, &(_, useful)) in run.iter().enumerate() {
            if !useful {
                continue;
            }
            match ranges.last_mut() {
                Some((s, l)) if *s + *l == idx as u64 => *l += 1,
                _ => ranges.push((idx as u64, 1)),
            }
        }
        let length = run.len() as u64;
        let useful: u64 = ranges.iter().map(|r| r.1).sum();
        let guard = (direction == Direction::Read && useful < length).then_some(Guard { ranges });
        out.push(Transaction {
            kind: if length == 1 { TxKind::Element } else { TxKind::Burst },
            direction,
            base: start,
            length,
            useful,
            guard,
        });
        i = j;
    }
    out
}

/// Read/write plan under the facet allocation.
///
/// Writes: one burst per facet covering the tile's whole facet, skipped
/// when no tile follows along the facet's axis. Reads: the
/// flow-in is split per producer tile; each piece is over-approximated by
/// its bounding box inside one facet of the producer, choosing the facet
/// whose runs merge best with what is already planned (ties: fewer fetched
/// elements, then lower axis). Address-adjacent runs are merged into one
/// guarded burst.
pub fn plan_cfa(spec: &KernelSpec, layout: &CfaLayout, tile: &TileCoord) -> TransferPlan {
    let flow_out = flow_out_fast(spec, tile);
    let tile_box = spec.tile_box(tile);
    let counts = spec.tile_counts();
    let writes = layout
        .facets
        .iter()
        // The last tile along an axis has no consumer for that facet.
        .filter(|f| tile.0[f.facet.axis] + 1 < counts[f.facet.axis])
        .map(|f| {
            let slab = f.facet.slab(&tile_box);
            let useful = slab
                .points()
                .filter(|p| flow_out.contains_index(spec.linear_index(p)))
                .count() as u64;
            Transaction {
                kind: TxKind::Burst,
                direction: Direction::Write,
                base: f.block_start(tile),
                length: f.block_len(),
                useful,
                guard: None,
            }
        })
        .collect();

    let mut chosen: Vec<(u64, bool)> = Vec::new();
    let mut chosen_runs: Vec<(u64, u64)> = Vec::new();
    for (delta, piece) in flow_in_by_producer(spec, tile) {
        let producer = tile.offset(&delta);
        let pbox = spec.tile_box(&producer);
        let candidates: Vec<_> = layout
            .facets
            .iter()
            .filter(|f| delta[f.facet.axis] == -1)
            .collect();
        let points: Vec<Point> = piece.points().collect();
        let whole: Vec<_> = candidates
            .iter()
            .filter(|f| points.iter().all(|p| f.facet.slab(&pbox).contains(p)))
            .collect();
        let options: Vec<Vec<(u64, bool)>> = if whole.is_empty() {
            // No single facet holds the piece: give each point to the first
            // facet containing it, one bounding box per facet.
            let mut parts = Vec::new();
            let mut left: Vec<&Point> = points.iter().collect();
            for f in &candidates {
                let slab = f.facet.slab(&pbox);
                let (mine, rest): (Vec<&Point>, Vec<&Point>) = left.into_iter().partition(|p| slab.contains(p));
                left = rest;
                if !mine.is_empty() {
                    parts.extend(box_elements(spec, f, &mine, &piece));
                }
            }
            debug_assert!(left.is_empty(), "flow-in point outside every facet");
            vec![parts]
        } else {
            let refs: Vec<&Point> = points.iter().collect();
            whole.iter().map(|f| box_elements(spec, f, &refs, &piece)).collect()
        };
        let best = options
            .into_iter()
            .min_by_key(|elems| {
                let runs = runs_of(elems.iter().map(|e| e.0).collect());
                let merges = runs
                    .iter()
                    .filter(|r| chosen_runs.iter().any(|&(s, l)| s + l == r.start || r.end() == s))
                    .count();
                (runs.len() - merges.min(runs.len()), elems.len())
            })
            .unwrap_or_default();
        for run in runs_of(best.iter().map(|e| e.0).collect()) {
            chosen_runs.push((run.start, run.len));
        }
        chosen.extend(best);
    }
    // Each facet is its own off-chip array: runs never cross facet bounds.
    let mut reads = Vec::new();
    for f in &layout.facets {
        let end = f.base + f.capacity();
        let mut mine: Vec<(u64, bool)> = chosen.iter().copied().filter(|e| (f.base..end).contains(&e.0)).collect();
        mine.sort_unstable_by_key(|e| e.0);
        // A run that wraps from one row of outer blocks into the next has no
        // div/mod form for its on-chip index, so rows are never merged.
        let row = f.row_len();
        for group in mine.chunk_by(|a, b| (a.0 - f.base) / row == (b.0 - f.base) / row) {
            // Padding runs of a bounding box that carry nothing are skipped.
            reads.extend(
                transactions_from_elements(group.to_vec(), Direction::Read)
                    .into_iter()
                    .filter(|t| t.useful > 0),
            );
        }
    }
    TransferPlan {
        tile: tile.clone(),
        layout: LayoutKind::Cfa,
        data_tile: None,
        reads,
        writes,
        element_bytes: spec.element_bytes,
    }
}

fn box_elements(
    spec: &KernelSpec,
    facet: &crate::layout::FacetLayout,
    points: &[&Point],
    piece: &PointSet,
) -> Vec<(u64, bool)> {
    let Some(bbox) = Boxed::bounding(points.iter().map(|p| p.as_slice())) else {
        return Vec::new();
    };
    let mine: PointSet = spec.point_set(points.iter().map(|p| (*p).clone()));
    bbox.points()
        .map(|p| {
            let idx = spec.linear_index(&p);
            let useful = mine.contains_index(idx) && piece.contains_index(idx);
            (facet.base + facet.local_offset(&p), useful)
        })
        .collect()
}

fn flow_in_set(spec: &KernelSpec, tile: &TileCoord) -> PointSet {
    flow_in_by_producer(spec, tile)
        .into_iter()
        .map(|(_, s)| s)
        .fold(spec.empty_set(), |acc, s| acc.union(&s))
}

/// Best-effort bursts on the row-major original array: exactly the flow
/// sets, with runs of consecutive addresses coalesced.
pub fn plan_original(spec: &KernelSpec, tile: &TileCoord) -> TransferPlan {
    let flow_in = flow_in_set(spec, tile);
    let flow_out = flow_out_fast(spec, tile);
    let exact = |set: &PointSet, dir| transactions_from_elements(set.indices().iter().map(|&i| (i, true)).collect(), dir);
    TransferPlan {
        tile: tile.clone(),
        layout: LayoutKind::Original,
        data_tile: None,
        reads: exact(&flow_in, Direction::Read),
        writes: exact(&flow_out, Direction::Write),
        element_bytes: spec.element_bytes,
    }
}

/// Bounding box of each flow set on the row-major original array.
pub fn plan_bbox(spec: &KernelSpec, tile: &TileCoord) -> TransferPlan {
    let flow_in = flow_in_set(spec, tile);
    let flow_out = flow_out_fast(spec, tile);
    let boxed = |set: &PointSet, dir| -> Vec<Transaction> {
        let Some(bbox) = set.bounding_box() else {
            return Vec::new();
        };
        let elems = bbox
            .points()
            .map(|p| {
                let idx = spec.linear_index(&p);
                (idx, set.contains_index(idx))
            })
            .collect();
        transactions_from_elements(elems, dir)
    };
    TransferPlan {
        tile: tile.clone(),
        layout: LayoutKind::Bbox,
        data_tile: None,
        reads: boxed(&flow_in, Direction::Read),
        writes: boxed(&flow_out, Direction::Write),
        element_bytes: spec.element_bytes,
    }
}

/// Row-major array of row-major data tiles of size `sizes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataTiling {
    pub space_sizes: Vec<i64>,
    pub sizes: Vec<i64>,
}

impl DataTiling {
    pub fn new(spec: &KernelSpec, sizes: Vec<i64>) -> Self {
        assert!(
            sizes.iter().zip(&spec.tile_sizes).all(|(s, t)| *s > 0 && t % s == 0),
            "data tile sizes must divide the iteration tile sizes"
        );
        DataTiling {
            space_sizes: spec.space_sizes.clone(),
            sizes,
        }
    }

    pub fn block_len(&self) -> u64 {
        self.sizes.iter().product::<i64>() as u64
    }

    fn grid(&self) -> Vec<i64> {
        self.space_sizes.iter().zip(&self.sizes).map(|(n, s)| n / s).collect()
    }

    pub fn block_of(&self, point: &[i64]) -> u64 {
        let outer: Vec<i64> = point.iter().zip(&self.sizes).map(|(x, s)| x / s).collect();
        linear_index(&self.grid(), &outer)
    }

    pub fn offset(&self, point: &[i64]) -> u64 {
        let inner: Vec<i64> = point.iter().zip(&self.sizes).map(|(x, s)| x % s).collect();
        self.block_of(point) * self.block_len() + linear_index(&self.sizes, &inner)
    }

    pub fn point_at(&self, offset: u64) -> Point {
        let outer = point_at(&self.grid(), offset / self.block_len());
        let inner = point_at(&self.sizes, offset % self.block_len());
        outer
            .iter()
            .zip(&inner)
            .zip(&self.sizes)
            .map(|((o, i), s)| o * s + i)
            .collect()
    }
}

/// Every data tile touching a flow set is transferred whole, one burst per
/// data tile.
pub fn plan_dtile(spec: &KernelSpec, tile: &TileCoord, data_tile: &[i64]) -> TransferPlan {
    let tiling = DataTiling::new(spec, data_tile.to_vec());
    let flow_in = flow_in_set(spec, tile);
    let flow_out = flow_out_fast(spec, tile);
    let per_block = |set: &PointSet, dir: Direction| -> Vec<Transaction> {
        let block_len = tiling.block_len();
        let mut useful: Vec<(u64, u64)> = set
            .points()
            .map(|p| {
                let off = tiling.offset(&p);
                (off / block_len, off % block_len)
            })
            .collect();
        useful.sort_unstable();
        let mut out: Vec<Transaction> = Vec::new();
        let mut i = 0;
        while i < useful.len() {
            let block = useful[i].0;
            let mut rel = Vec::new();
            while i < useful.len() && useful[i].0 == block {
                rel.push(useful[i].1);
                i += 1;
            }
            let ranges: Vec<(u64, u64)> = runs_of(rel).into_iter().map(|r| (r.start, r.len)).collect();
            let n: u64 = ranges.iter().map(|r| r.1).sum();
            out.push(Transaction {
                kind: if block_len == 1 { TxKind::Element } else { TxKind::Burst },
                direction: dir,
                base: block * block_len,
                length: block_len,
                useful: n,
                guard: (dir == Direction::Read && n < block_len).then_some(Guard { ranges }),
            });
        }
        out
    };
    TransferPlan {
        tile: tile.clone(),
        layout: LayoutKind::Dtile,
        data_tile: Some(data_tile.to_vec()),
        reads: per_block(&flow_in, Direction::Read),
        writes: per_block(&flow_out, Direction::Write),
        element_bytes: spec.element_bytes,
    }
}

/// Candidate data tile sizes: for each power of two `s` from 2 up to the
/// largest tile extent, `gcd(s, t_q)` on every axis.
pub fn dtile_candidates(spec: &KernelSpec) -> Vec<Vec<i64>> {
    let max = spec.tile_sizes.iter().copied().max().unwrap_or(1);
    let mut out: Vec<Vec<i64>> = Vec::new();
    let mut s = 2;
    while s <= max {
        let sizes: Vec<i64> = spec.tile_sizes.iter().map(|&t| gcd(s, t)).collect();
        if !out.contains(&sizes) {
            out.push(sizes);
        }
        s *= 2;
    }
    if out.is_empty() {
        out.push(spec.tile_sizes.clone());
    }
    out
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Everything needed to plan one layout over a whole space.
#[derive(Debug, Clone)]
pub enum LayoutContext {
    Cfa(CfaLayout),
    Original,
    Bbox,
    Dtile(Vec<i64>),
}

impl LayoutContext {
    pub fn kind(&self) -> LayoutKind {
        match self {
            LayoutContext::Cfa(_) => LayoutKind::Cfa,
            LayoutContext::Original => LayoutKind::Original,
            LayoutContext::Bbox => LayoutKind::Bbox,
            LayoutContext::Dtile(_) => LayoutKind::Dtile,
        }
    }

    pub fn plan(&self, spec: &KernelSpec, tile: &TileCoord) -> TransferPlan {
        match self {
            LayoutContext::Cfa(layout) => plan_cfa(spec, layout, tile),
            LayoutContext::Original => plan_original(spec, tile),
            LayoutContext::Bbox => plan_bbox(spec, tile),
            LayoutContext::Dtile(sizes) => plan_dtile(spec, tile, sizes),
        }
    }

    /// Plans for every tile, in lexicographic tile order.
    pub fn plan_all(&self, spec: &KernelSpec) -> Vec<TransferPlan> {
        spec.tiles().par_iter().map(|t| self.plan(spec, t)).collect()
    }

    /// Size of the off-chip address space.
    pub fn capacity(&self, spec: &KernelSpec) -> u64 {
        match self {
            LayoutContext::Cfa(layout) => layout.total_len(),
            _ => spec.space_sizes.iter().product::<i64>() as u64,
        }
    }

    /// Iteration point stored at `offset`.
    pub fn point_at(&self, spec: &KernelSpec, offset: u64) -> Option<Point> {
        match self {
            LayoutContext::Cfa(layout) => layout.point_at(offset).map(|(_, p)| p),
            LayoutContext::Original | LayoutContext::Bbox => {
                (offset < self.capacity(spec)).then(|| spec.point_at(offset))
            }
            LayoutContext::Dtile(sizes) => (offset < self.capacity(spec))
                .then(|| DataTiling::new(spec, sizes.clone()).point_at(offset)),
        }
    }
}

/// CSV header of [`transactions_csv`].
pub const TRANSACTION_CSV_HEADER: &str = "tile,layout,direction,kind,base,length,useful_elems";

pub fn transactions_csv(plans: &[TransferPlan]) -> String {
    let mut out = String::from(TRANSACTION_CSV_HEADER);
    out.push('\n');
    for plan in plans {
        for tx in plan.transactions() {
            out.push_str(&format!(
                "\"{}\",{},{},{},{},{},{}\n",
                plan.tile,
                plan.layout,
                match tx.direction {
                    Direction::Read => "read",
                    Direction::Write => "write",
                },
                match tx.kind {
                    TxKind::Burst => "burst",
                    TxKind::Element => "element",
                },
                tx.base,
                tx.length,
                tx.useful
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FunctionalError {
    #[error("tile {tile}: value at {point:?} is {got}, untiled execution gives {expected}")]
    Mismatch {
        tile: TileCoord,
        point: Point,
        expected: i64,
        got: i64,
    },
    #[error("tile {tile}: producer {point:?} was never brought on chip")]
    MissingValue { tile: TileCoord, point: Point },
    #[error("tile {tile}: guard accepts {point:?}, which is not flow-in data of the tile")]
    OverFetch { tile: TileCoord, point: Point },
    #[error("tile {tile}: flow-in point {point:?} accepted {count} times")]
    Coverage { tile: TileCoord, point: Point, count: usize },
    #[error("tile {tile}: accepted offset {offset} was never written")]
    UninitializedRead { tile: TileCoord, offset: u64 },
    #[error("tile {tile}: write of {point:?} lies outside the tile")]
    ForeignWrite { tile: TileCoord, point: Point },
    #[error("tile {tile}: offset {offset} is outside the layout")]
    BadOffset { tile: TileCoord, offset: u64 },
    #[error("plans are not one per tile in schedule order")]
    PlanOrder,
}

/// Integer statement `v(x) = 1 + sum_j weights[j] * v(x + dep_j)` with
/// wrapping arithmetic; producers outside the space read [`boundary_value`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub weights: Vec<i64>,
}

impl Statement {
    pub fn uniform(spec: &KernelSpec) -> Self {
        Statement {
            weights: (1..=spec.deps.len() as i64).collect(),
        }
    }
}

pub fn boundary_value(point: &[i64]) -> i64 {
    point
        .iter()
        .fold(17i64, |acc, &x| acc.wrapping_mul(31).wrapping_add(x))
}

/// Untiled reference execution, row-major over the whole space.
pub fn reference_execution(spec: &KernelSpec, stmt: &Statement) -> Vec<i64> {
    let total = spec.space_sizes.iter().product::<i64>() as usize;
    let mut values = vec![0i64; total];
    let mut y = vec![0; spec.dims()];
    for (idx, x) in Boxed::new(vec![0; spec.dims()], spec.space_sizes.clone()).points().enumerate() {
        let mut v = 1i64;
        for (dep, w) in spec.deps.iter().zip(&stmt.weights) {
            for q in 0..y.len() {
                y[q] = x[q] + dep[q];
            }
            let producer = if spec.contains(&y) {
                values[spec.linear_index(&y) as usize]
            } else {
                boundary_value(&y)
            };
            v = v.wrapping_add(w.wrapping_mul(producer));
        }
        values[idx] = v;
    }
    values
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionalReport {
    pub tiles: usize,
    pub points_checked: usize,
    pub elements_read: u64,
    pub elements_accepted: u64,
}

/// Executes the kernel tile by tile where values cross tiles only through
/// `plans`: writes fill the off-chip memory of `ctx`, guarded reads fill a
/// per-tile on-chip buffer. Checks that the guards accept exactly the
/// tile's flow-in, once each, and that every tile's results equal the
/// untiled execution.
pub fn functional_check(
    spec: &KernelSpec,
    ctx: &LayoutContext,
    plans: &[TransferPlan],
    stmt: &Statement,
) -> Result<FunctionalReport, FunctionalError> {
    let tiles = spec.tiles();
    if plans.len() != tiles.len() || plans.iter().zip(&tiles).any(|(p, t)| &p.tile != t) {
        return Err(FunctionalError::PlanOrder);
    }
    let reference = reference_execution(spec, stmt);
    let mut offchip: Vec<Option<i64>> = vec![None; ctx.capacity(spec) as usize];
    let reach = spec.reach();
    let mut report = FunctionalReport {
        tiles: tiles.len(),
        points_checked: 0,
        elements_read: 0,
        elements_accepted: 0,
    };
    for plan in plans {
        let tile = &plan.tile;
        let tile_box = spec.tile_box(tile);
        let footprint = Boxed::new(
            tile_box.lo.iter().zip(&reach).map(|(l, r)| l - r).collect(),
            tile_box.extent.iter().zip(&reach).map(|(e, r)| e + r).collect(),
        );
        let mut buffer: Vec<Option<i64>> = vec![None; footprint.len() as usize];
        let slot = |p: &[i64]| linear_index(&footprint.extent, &p.iter().zip(&footprint.lo).map(|(x, l)| x - l).collect::<Vec<_>>()) as usize;
        let expected_in = flow_in_set(spec, tile);
        let mut accepted: Vec<u64> = Vec::new();

        for tx in &plan.reads {
            for rel in 0..tx.length {
                report.elements_read += 1;
                if !tx.accepts(rel) {
                    continue;
                }
                let offset = tx.base + rel;
                let point = ctx.point_at(spec, offset).ok_or(FunctionalError::BadOffset {
                    tile: tile.clone(),
                    offset,
                })?;
                let idx = spec.linear_index(&point);
                if !expected_in.contains_index(idx) {
                    return Err(FunctionalError::OverFetch { tile: tile.clone(), point });
                }
                let value = offchip[offset as usize].ok_or(FunctionalError::UninitializedRead {
                    tile: tile.clone(),
                    offset,
                })?;
                buffer[slot(&point)] = Some(value);
                accepted.push(idx);
                report.elements_accepted += 1;
            }
        }
        accepted.sort_unstable();
        for w in accepted.windows(2) {
            if w[0] == w[1] {
                let count = accepted.iter().filter(|&&i| i == w[0]).count();
                return Err(FunctionalError::Coverage { tile: tile.clone(), point: spec.point_at(w[0]), count });
            }
        }
        if let Some(&missing) = expected_in.indices().iter().find(|i| accepted.binary_search(i).is_err()) {
            return Err(FunctionalError::Coverage { tile: tile.clone(), point: spec.point_at(missing), count: 0 });
        }

        let mut y = vec![0; spec.dims()];
        for x in tile_box.points() {
            let mut v = 1i64;
            for (dep, w) in spec.deps.iter().zip(&stmt.weights) {
                for q in 0..y.len() {
                    y[q] = x[q] + dep[q];
                }
                let producer = if spec.contains(&y) {
                    buffer[slot(&y)].ok_or_else(|| FunctionalError::MissingValue {
                        tile: tile.clone(),
                        point: y.clone(),
                    })?
                } else {
                    boundary_value(&y)
                };
                v = v.wrapping_add(w.wrapping_mul(producer));
            }
            buffer[slot(&x)] = Some(v);
            let expected = reference[spec.linear_index(&x) as usize];
            if v != expected {
                return Err(FunctionalError::Mismatch {
                    tile: tile.clone(),
                    point: x,
                    expected,
                    got: v,
                });
            }
            report.points_checked += 1;
        }

        for tx in &plan.writes {
            for rel in 0..tx.length {
                let offset = tx.base + rel;
                let point = ctx.point_at(spec, offset).ok_or(FunctionalError::BadOffset {
                    tile: tile.clone(),
                    offset,
                })?;
                if !tile_box.contains(&point) {
                    return Err(FunctionalError::ForeignWrite { tile: tile.clone(), point });
                }
                offchip[offset as usize] = buffer[slot(&point)];
            }
        }
    }
    Ok(report)
}
