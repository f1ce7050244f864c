//! Cycle model of an AXI-like memory bus and the bandwidth sweep.
//!
//! A transaction of `n` elements is split into bursts of at most
//! `max_burst_beats` beats. Burst `i` may issue once burst `i - D` has
//! completed (`D` = `overlap_depth` outstanding requests), pays a fixed
//! `overhead` latency, and then occupies the data bus for
//! `beats * cycles_per_beat` cycles, after the previous burst's data:
//!
//! ```text
//! r_i = e_{i-D}                (0 for i < D)
//! s_i = max(r_i + overhead, e_{i-1})
//! e_i = s_i + beats_i * cycles_per_beat
//! ```

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::bench::BenchmarkDef;
use crate::kernel::{KernelError, KernelSpec};
use crate::layout::{CfaLayout, LayoutError};
use crate::plan::{dtile_candidates, LayoutContext, LayoutKind, TransferPlan};
use crate::textfmt::{Document, ParseError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid bus model: {0}")]
    Model(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusModel {
    pub bus_bytes: u32,
    pub clock_hz: f64,
    pub overhead: u64,
    pub cycles_per_beat: u64,
    pub max_burst_beats: u64,
    pub overlap_depth: usize,
}

impl Default for BusModel {
    fn default() -> Self {
        BusModel {
            bus_bytes: 8,
            clock_hz: 100e6,
            overhead: 20,
            cycles_per_beat: 1,
            max_burst_beats: 256,
            overlap_depth: 4,
        }
    }
}

pub const MODEL_KEYS: &[&str] = &[
    "bus_bytes",
    "clock_hz",
    "overhead",
    "cycles_per_beat",
    "max_burst_beats",
    "overlap_depth",
];

impl BusModel {
    /// Reads a model file; absent keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let doc = Document::parse(text)?;
        doc.expect_keys(MODEL_KEYS)?;
        Self::from_document(&doc)
    }

    pub fn from_document(doc: &Document) -> Result<Self, SimError> {
        let d = BusModel::default();
        let positive = |key: &str, default: u64| -> Result<u64, SimError> {
            match doc.int(key)? {
                None => Ok(default),
                Some(v) if v > 0 => Ok(v as u64),
                Some(v) => Err(SimError::Model(format!("{key} must be positive, got {v}"))),
            }
        };
        let model = BusModel {
            bus_bytes: positive("bus_bytes", d.bus_bytes as u64)? as u32,
            clock_hz: doc.float("clock_hz")?.unwrap_or(d.clock_hz),
            overhead: match doc.int("overhead")? {
                Some(v) if v < 0 => return Err(SimError::Model(format!("overhead must be >= 0, got {v}"))),
                Some(v) => v as u64,
                None => d.overhead,
            },
            cycles_per_beat: positive("cycles_per_beat", d.cycles_per_beat)?,
            max_burst_beats: positive("max_burst_beats", d.max_burst_beats)?,
            overlap_depth: positive("overlap_depth", d.overlap_depth as u64)? as usize,
        };
        if !(model.clock_hz > 0.0) {
            return Err(SimError::Model("clock_hz must be positive".into()));
        }
        Ok(model)
    }

    pub fn peak_bandwidth(&self) -> f64 {
        self.bus_bytes as f64 * self.clock_hz / self.cycles_per_beat as f64
    }

    fn beats(&self, bytes: u64) -> u64 {
        bytes.div_ceil(self.bus_bytes as u64).max(1)
    }

    /// Bus bursts of a transaction of `bytes` bytes.
    pub fn split(&self, bytes: u64) -> Vec<u64> {
        let mut beats = self.beats(bytes);
        let mut out = Vec::new();
        while beats > 0 {
            let b = beats.min(self.max_burst_beats);
            out.push(b);
            beats -= b;
        }
        out
    }

    /// Completion cycle of a sequence of bursts given in beats.
    pub fn cycles<I: IntoIterator<Item = u64>>(&self, bursts: I) -> u64 {
        let depth = self.overlap_depth.max(1);
        let mut ends: Vec<u64> = Vec::new();
        for (i, beats) in bursts.into_iter().enumerate() {
            let ready = if i >= depth { ends[i - depth] } else { 0 };
            let prev = ends.last().copied().unwrap_or(0);
            let start = (ready + self.overhead).max(prev);
            ends.push(start + beats * self.cycles_per_beat);
        }
        ends.last().copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimResult {
    pub transactions: u64,
    pub bursts: u64,
    pub total_bytes: u64,
    pub useful_bytes: u64,
    pub cycles: u64,
    pub raw_bw: f64,
    pub effective_bw: f64,
    pub ratio_to_peak: f64,
}

impl SimResult {
    fn finish(mut self, model: &BusModel) -> Self {
        if self.cycles > 0 {
            self.raw_bw = self.total_bytes as f64 * model.clock_hz / self.cycles as f64;
            self.effective_bw = self.useful_bytes as f64 * model.clock_hz / self.cycles as f64;
        }
        self.ratio_to_peak = self.effective_bw / model.peak_bandwidth();
        self
    }
}

/// Plays the plans' reads then writes, tile after tile, on one bus.
pub fn simulate(model: &BusModel, plans: &[TransferPlan]) -> SimResult {
    let mut res = SimResult::default();
    let mut bursts = Vec::new();
    for plan in plans {
        let eb = plan.element_bytes as u64;
        for tx in plan.transactions() {
            res.transactions += 1;
            res.total_bytes += tx.length * eb;
            res.useful_bytes += tx.useful * eb;
            bursts.extend(model.split(tx.length * eb));
        }
    }
    res.bursts = bursts.len() as u64;
    res.cycles = model.cycles(bursts);
    res.finish(model)
}

/// One row of the bandwidth sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub benchmark: String,
    pub tile: Vec<i64>,
    pub layout: LayoutKind,
    pub data_tile: Option<Vec<i64>>,
    pub result: SimResult,
}

pub const SWEEP_CSV_HEADER: &str =
    "benchmark,t1,t2,t3,layout,transactions,total_bytes,useful_bytes,cycles,raw_bw,effective_bw,ratio_to_peak";

impl fmt::Display for SweepRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = |q: usize| self.tile.get(q).map_or(String::new(), i64::to_string);
        let r = &self.result;
        write!(
            f,
            "{},{},{},{},{},{},{},{},{},{:.0},{:.0},{:.4}",
            self.benchmark,
            t(0),
            t(1),
            t(2),
            self.layout,
            r.transactions,
            r.total_bytes,
            r.useful_bytes,
            r.cycles,
            r.raw_bw,
            r.effective_bw,
            r.ratio_to_peak
        )
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_string());
        out.push('\n');
    }
    out
}

/// Best data tile for `spec` by effective bandwidth (ties: first candidate).
pub fn best_dtile(model: &BusModel, spec: &KernelSpec) -> (Vec<i64>, SimResult) {
    dtile_candidates(spec)
        .into_iter()
        .map(|sizes| {
            let ctx = LayoutContext::Dtile(sizes.clone());
            let res = simulate(model, &ctx.plan_all(spec));
            (sizes, res)
        })
        .fold(None, |best: Option<(Vec<i64>, SimResult)>, cand| match best {
            Some(b) if b.1.effective_bw >= cand.1.effective_bw => Some(b),
            _ => Some(cand),
        })
        .expect("at least one data tile candidate")
}

/// Simulates one layout over every tile of `spec`.
pub fn simulate_layout(model: &BusModel, spec: &KernelSpec, kind: LayoutKind) -> Result<(Option<Vec<i64>>, SimResult), SimError> {
    Ok(match kind {
        LayoutKind::Cfa => {
            let ctx = LayoutContext::Cfa(CfaLayout::build(spec)?);
            (None, simulate(model, &ctx.plan_all(spec)))
        }
        LayoutKind::Original => (None, simulate(model, &LayoutContext::Original.plan_all(spec))),
        LayoutKind::Bbox => (None, simulate(model, &LayoutContext::Bbox.plan_all(spec))),
        LayoutKind::Dtile => {
            let (sizes, res) = best_dtile(model, spec);
            (Some(sizes), res)
        }
    })
}

/// Tiles per axis of the sweep spaces.
pub const SWEEP_TILES_PER_AXIS: i64 = 3;

/// All layouts of `bench` at every tile size of its sweep, `tiles_per_axis`
/// tiles per axis.
pub fn sweep(model: &BusModel, bench: &BenchmarkDef, tiles: &[Vec<i64>], tiles_per_axis: i64) -> Result<Vec<SweepRow>, SimError> {
    let jobs: Vec<(Vec<i64>, LayoutKind)> = tiles
        .iter()
        .flat_map(|t| LayoutKind::ALL.into_iter().map(move |k| (t.clone(), k)))
        .collect();
    jobs.into_par_iter()
        .map(|(tile, kind)| {
            let spec = bench.spec(&tile, tiles_per_axis)?;
            let (data_tile, result) = simulate_layout(model, &spec, kind)?;
            Ok(SweepRow {
                benchmark: bench.name.to_string(),
                tile,
                layout: kind,
                data_tile,
                result,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::jacobi2d5p;

    #[test]
    fn single_burst_latency() {
        let m = BusModel::default();
        assert_eq!(m.cycles([10]), 30);
        assert_eq!(m.cycles(Vec::<u64>::new()), 0);
    }

    #[test]
    fn outstanding_requests_hide_latency() {
        let m = BusModel::default();
        // Four short bursts all issue at once; the fifth waits for the first.
        assert_eq!(m.cycles([1, 1, 1, 1]), 21 + 3);
        assert_eq!(m.cycles([1; 5]), 21 + 21);
        let serial = BusModel { overlap_depth: 1, ..m.clone() };
        assert_eq!(serial.cycles([1, 1]), 42);
    }

    #[test]
    fn long_transactions_are_split() {
        let m = BusModel::default();
        assert_eq!(m.split(8 * 600), vec![256, 256, 88]);
        assert_eq!(m.split(3), vec![1]);
    }

    #[test]
    fn merging_bursts_never_hurts() {
        let m = BusModel::default();
        for a in 1..40 {
            for b in 1..40 {
                assert!(m.cycles([a + b]) <= m.cycles([a, b]));
            }
        }
    }

    #[test]
    fn model_file_overrides_defaults() {
        let m = BusModel::parse("overhead = 50\nbus_bytes = 16\n").unwrap();
        assert_eq!(m.overhead, 50);
        assert_eq!(m.bus_bytes, 16);
        assert_eq!(m.max_burst_beats, 256);
        assert!(BusModel::parse("overlap_depth = 0").is_err());
        assert!(BusModel::parse("speed = 1").is_err());
    }

    #[test]
    fn cfa_beats_baselines_on_jacobi() {
        let m = BusModel::default();
        let spec = jacobi2d5p().spec(&[16, 16, 16], 3).unwrap();
        let cfa = simulate_layout(&m, &spec, LayoutKind::Cfa).unwrap().1;
        for kind in [LayoutKind::Original, LayoutKind::Bbox, LayoutKind::Dtile] {
            let other = simulate_layout(&m, &spec, kind).unwrap().1;
            assert!(cfa.effective_bw > other.effective_bw, "{kind}: {} vs {}", cfa.effective_bw, other.effective_bw);
        }
        assert!(cfa.ratio_to_peak <= 1.0);
    }

    #[test]
    fn sweep_rows_render_as_csv() {
        let m = BusModel::default();
        let b = jacobi2d5p();
        let rows = sweep(&m, &b, &[vec![4, 4, 4]], 2).unwrap();
        assert_eq!(rows.len(), 4);
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with(SWEEP_CSV_HEADER));
        assert!(csv.lines().nth(1).unwrap().starts_with("jacobi2d5p,4,4,4,cfa,"));
    }
}
