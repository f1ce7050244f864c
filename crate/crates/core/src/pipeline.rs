//! End-to-end runs: verification at reduced scale, bandwidth sweeps and the
//! artifact bundle (CSV, emitted sources, plots, manifest).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::bench::{builtin_benchmarks, BenchmarkDef};
use crate::codegen::{emit_with_layout, verify_round_trip, write_units, EmittedUnit};
use crate::facet::verify_containment;
use crate::kernel::{KernelSpec, TileCoord};
use crate::layout::{contiguity_check, CfaLayout};
use crate::lint::burst_lint;
use crate::plan::{
    dtile_candidates, functional_check, transactions_csv, LayoutContext, LayoutKind, Statement, TransferPlan,
};
use crate::report::bandwidth_svg;
use crate::sim::{sweep, sweep_csv, BusModel, SimError, SweepRow, MODEL_KEYS, SWEEP_TILES_PER_AXIS};
use crate::textfmt::Document;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Outcome of one verification step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub benchmark: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(benchmark: &str, name: impl Into<String>, result: Result<String, String>) -> Self {
        let (passed, detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        Check {
            benchmark: benchmark.to_string(),
            name: name.into(),
            passed,
            detail,
        }
    }
}

/// Every facet block of every tile is a single run of offsets.
pub fn full_tile_contiguity(spec: &KernelSpec, layout: &CfaLayout) -> Result<usize, String> {
    let mut blocks = 0;
    for tile in spec.tiles() {
        let tb = spec.tile_box(&tile);
        for f in &layout.facets {
            let pts: Vec<Vec<i64>> = f.facet.slab(&tb).points().collect();
            let runs = contiguity_check(f, pts.iter().map(Vec::as_slice)).map_err(|e| e.to_string())?;
            if runs.len() != 1 {
                return Err(format!("{} of tile {tile} spans {} runs", f.name(), runs.len()));
            }
            blocks += 1;
        }
    }
    Ok(blocks)
}

/// Layouts checked functionally: the facet allocation, both row-major
/// baselines and every candidate data tiling.
pub fn verification_layouts(spec: &KernelSpec, layout: &CfaLayout) -> Vec<LayoutContext> {
    let mut out = vec![
        LayoutContext::Cfa(layout.clone()),
        LayoutContext::Original,
        LayoutContext::Bbox,
    ];
    out.extend(dtile_candidates(spec).into_iter().map(LayoutContext::Dtile));
    out
}

fn context_name(ctx: &LayoutContext) -> String {
    match ctx {
        LayoutContext::Dtile(s) => format!(
            "dtile {}",
            s.iter().map(i64::to_string).collect::<Vec<_>>().join("x")
        ),
        other => other.kind().to_string(),
    }
}

/// Validation, containment, contiguity, functional and codegen checks of
/// `spec`. `name` labels the rows.
pub fn verify_spec(name: &str, spec: &KernelSpec, stmt: &Statement) -> Vec<Check> {
    let mut checks = Vec::new();
    if let Err(e) = spec.validate() {
        checks.push(Check::new(name, "validate", Err(e.to_string())));
        return checks;
    }
    checks.push(Check::new(name, "validate", Ok(format!("{} tiles", spec.total_tiles()))));
    checks.push(Check::new(
        name,
        "containment",
        verify_containment(spec)
            .map(|r| format!("{} flow-in points over {} tiles", r.total_points(), r.tiles.len()))
            .map_err(|e| e.to_string()),
    ));
    let layout = match CfaLayout::build(spec) {
        Ok(l) => l,
        Err(e) => {
            checks.push(Check::new(name, "layout", Err(e.to_string())));
            return checks;
        }
    };
    checks.push(Check::new(
        name,
        "full-tile contiguity",
        full_tile_contiguity(spec, &layout).map(|n| format!("{n} facet blocks, one run each")),
    ));
    let functional: Vec<Check> = verification_layouts(spec, &layout)
        .par_iter()
        .map(|ctx| {
            let plans = ctx.plan_all(spec);
            let res = functional_check(spec, ctx, &plans, stmt)
                .map(|r| format!("{} points, {} elements read", r.points_checked, r.elements_read))
                .map_err(|e| e.to_string());
            Check::new(name, format!("functional {}", context_name(ctx)), res)
        })
        .collect();
    checks.extend(functional);
    let writes = LayoutContext::Cfa(layout.clone())
        .plan_all(spec)
        .iter()
        .flat_map(|p| p.writes.iter())
        .filter(|w| w.kind == crate::plan::TxKind::Element)
        .count();
    checks.push(Check::new(
        name,
        "burst-only writes",
        if writes == 0 {
            Ok("0 element writes".into())
        } else {
            Err(format!("{writes} element writes"))
        },
    ));
    let codegen = emit_with_layout(name, spec, &layout)
        .map_err(|e| e.to_string())
        .and_then(|unit| {
            let n = verify_round_trip(spec, &layout, &unit).map_err(|e| e.to_string())?;
            let lint = burst_lint(&unit.source);
            if lint.is_empty() {
                Ok(format!("{n} elements replayed, lint clean"))
            } else {
                Err(lint.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
            }
        });
    checks.push(Check::new(name, "codegen", codegen));
    checks
}

pub fn verify_benchmark(bench: &BenchmarkDef) -> Vec<Check> {
    verify_spec(bench.name, &bench.reduced_spec(), &Statement { weights: bench.weights.clone() })
}

pub const CHECK_CSV_HEADER: &str = "benchmark,check,passed,detail";

pub fn checks_csv(checks: &[Check]) -> String {
    let mut out = String::from(CHECK_CSV_HEADER);
    out.push('\n');
    for c in checks {
        let _ = writeln!(
            out,
            "{},{},{},\"{}\"",
            c.benchmark,
            c.name,
            c.passed,
            c.detail.replace('"', "'")
        );
    }
    out
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: BusModel,
    /// Benchmarks to run; empty means all built-ins.
    pub benchmarks: Vec<String>,
    /// Largest tile extents of the sweep; `None` uses each benchmark's own.
    pub tile_sizes: Option<Vec<i64>>,
    pub tiles_per_axis: i64,
    /// Omit the timestamp from the manifest.
    pub deterministic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: BusModel::default(),
            benchmarks: Vec::new(),
            tile_sizes: None,
            tiles_per_axis: SWEEP_TILES_PER_AXIS,
            deterministic: false,
        }
    }
}

/// Keys of a run config file: the bus model keys plus the sweep.
pub const CONFIG_SWEEP_KEYS: &[&str] = &["benchmarks", "tiles", "tiles_per_axis"];

impl RunConfig {
    /// Reads a config file: bus model keys plus `benchmarks`, `tiles`
    /// (largest tile extents) and `tiles_per_axis`. Absent keys keep their
    /// defaults.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let doc = Document::parse(text)?;
        let allowed: Vec<&str> = MODEL_KEYS.iter().chain(CONFIG_SWEEP_KEYS).copied().collect();
        doc.expect_keys(&allowed)?;
        let mut config = RunConfig {
            model: BusModel::from_document(&doc)?,
            ..RunConfig::default()
        };
        if let Some(names) = doc.word_list("benchmarks")? {
            config.benchmarks = names;
        }
        if let Some(tiles) = doc.int_list("tiles")? {
            if tiles.iter().any(|&t| t <= 0) {
                return Err(SimError::Model("tiles must be positive".into()));
            }
            config.tile_sizes = Some(tiles);
        }
        if let Some(n) = doc.int("tiles_per_axis")? {
            if n < 1 {
                return Err(SimError::Model(format!("tiles_per_axis must be >= 1, got {n}")));
            }
            config.tiles_per_axis = n;
        }
        Ok(config)
    }

    pub fn selected(&self) -> Result<Vec<BenchmarkDef>, PipelineError> {
        let all = builtin_benchmarks();
        if self.benchmarks.is_empty() {
            return Ok(all);
        }
        self.benchmarks
            .iter()
            .map(|name| {
                all.iter()
                    .find(|b| b.name == name)
                    .cloned()
                    .ok_or_else(|| PipelineError::UnknownBenchmark(name.clone()))
            })
            .collect()
    }

    pub fn tiles_for(&self, bench: &BenchmarkDef) -> Vec<Vec<i64>> {
        match &self.tile_sizes {
            Some(sizes) => sizes.iter().map(|&s| bench.tile_for(s)).collect(),
            None => bench.tile_sweep.clone(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub checks: Vec<Check>,
    pub rows: Vec<SweepRow>,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn tile_label(tile: &[i64]) -> String {
    tile.iter().map(i64::to_string).collect::<Vec<_>>().join("x")
}

/// Verifies, sweeps and writes the artifact bundle of every selected
/// benchmark into `out`. A benchmark whose verification fails gets no
/// simulation rows.
pub fn run_all(out: &Path, config: &RunConfig) -> Result<RunSummary, PipelineError> {
    let benches = config.selected()?;
    std::fs::create_dir_all(out).map_err(io(out))?;
    let mut summary = RunSummary::default();
    for bench in &benches {
        let checks = verify_benchmark(bench);
        let ok = checks.iter().all(|c| c.passed);
        summary.checks.extend(checks);
        if !ok {
            continue;
        }
        let dir = out.join(bench.name);
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        let tiles = config.tiles_for(bench);
        let rows = sweep(&config.model, bench, &tiles, config.tiles_per_axis)?;

        let csv = dir.join("bandwidth.csv");
        std::fs::write(&csv, sweep_csv(&rows)).map_err(io(&csv))?;
        let svg = dir.join("bandwidth.svg");
        std::fs::write(&svg, bandwidth_svg(bench.name, &rows)).map_err(io(&svg))?;

        let mut plans: Vec<TransferPlan> = Vec::new();
        let mut units: Vec<EmittedUnit> = Vec::new();
        for tile in &tiles {
            let spec = bench.spec(tile, config.tiles_per_axis).map_err(SimError::from)?;
            let layout = CfaLayout::build(&spec).map_err(SimError::from)?;
            let interior = TileCoord(vec![1.min(config.tiles_per_axis - 1); spec.dims()]);
            for row in rows.iter().filter(|r| &r.tile == tile) {
                let ctx = match row.layout {
                    LayoutKind::Cfa => LayoutContext::Cfa(layout.clone()),
                    LayoutKind::Original => LayoutContext::Original,
                    LayoutKind::Bbox => LayoutContext::Bbox,
                    LayoutKind::Dtile => LayoutContext::Dtile(row.data_tile.clone().unwrap_or_else(|| spec.tile_sizes.clone())),
                };
                plans.push(ctx.plan(&spec, &interior));
            }
            let name = format!("{}_{}", bench.name, tile_label(tile));
            match emit_with_layout(&name, &spec, &layout) {
                Ok(unit) => {
                    let lint = burst_lint(&unit.source);
                    summary.checks.push(Check::new(
                        bench.name,
                        format!("lint {}", tile_label(tile)),
                        if lint.is_empty() {
                            Ok("0 violations".into())
                        } else {
                            Err(lint.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
                        },
                    ));
                    units.push(unit);
                }
                Err(e) => summary.checks.push(Check::new(bench.name, format!("emit {}", tile_label(tile)), Err(e.to_string()))),
            }
        }
        let tx = dir.join("transactions.csv");
        std::fs::write(&tx, transactions_csv(&plans)).map_err(io(&tx))?;
        let src = dir.join("src");
        write_units(&src, &units).map_err(io(&src))?;

        summary.files.extend([csv, svg, tx]);
        summary.files.extend(units.iter().map(|u| src.join(&u.file_name)));
        summary.files.push(src.join("manifest.txt"));
        summary.rows.extend(rows);
    }

    let checks = out.join("verification.csv");
    std::fs::write(&checks, checks_csv(&summary.checks)).map_err(io(&checks))?;
    let all = out.join("bandwidth.csv");
    std::fs::write(&all, sweep_csv(&summary.rows)).map_err(io(&all))?;
    summary.files.insert(0, checks);
    summary.files.insert(1, all);

    let manifest = out.join("manifest.txt");
    let mut text = String::new();
    if !config.deterministic {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let _ = writeln!(text, "# generated at unix time {secs}");
    }
    let _ = writeln!(
        text,
        "# {} checks, {} failed",
        summary.checks.len(),
        summary.checks.iter().filter(|c| !c.passed).count()
    );
    for f in &summary.files {
        let rel = f.strip_prefix(out).unwrap_or(f);
        let _ = writeln!(text, "{}", rel.display());
    }
    std::fs::write(&manifest, text).map_err(io(&manifest))?;
    summary.files.push(manifest);
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{fig4_spec, jacobi2d5p};

    #[test]
    fn fig4_verifies() {
        let spec = fig4_spec();
        let checks = verify_spec("fig4", &spec, &Statement::uniform(&spec));
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert!(checks.iter().any(|c| c.name == "functional cfa"));
    }

    #[test]
    fn invalid_spec_stops_after_validation() {
        let mut spec = fig4_spec();
        spec.deps.push(vec![0, 0, 1]);
        let checks = verify_spec("bad", &spec, &Statement::uniform(&spec));
        assert_eq!(checks.len(), 1);
        assert!(!checks[0].passed);
    }

    #[test]
    fn unknown_benchmark_is_an_error() {
        let config = RunConfig {
            benchmarks: vec!["nope".into()],
            ..Default::default()
        };
        assert!(matches!(config.selected(), Err(PipelineError::UnknownBenchmark(_))));
    }

    #[test]
    fn small_run_writes_the_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig {
            benchmarks: vec![jacobi2d5p().name.into()],
            tile_sizes: Some(vec![4, 8]),
            tiles_per_axis: 2,
            deterministic: true,
            ..Default::default()
        };
        let summary = run_all(dir.path(), &config).unwrap();
        assert!(summary.all_passed());
        assert_eq!(summary.rows.len(), 2 * LayoutKind::ALL.len());
        for f in &summary.files {
            assert!(f.exists(), "{}", f.display());
        }
        let first = std::fs::read(dir.path().join("bandwidth.csv")).unwrap();
        let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
        assert!(!manifest.contains("unix time"));
        run_all(dir.path(), &config).unwrap();
        assert_eq!(std::fs::read(dir.path().join("bandwidth.csv")).unwrap(), first);
    }

    #[test]
    fn config_file_sets_model_and_sweep() {
        let c = RunConfig::parse("overhead = 30\nbenchmarks = jacobi2d5p gaussian\ntiles = 16, 32\ntiles_per_axis = 2\n").unwrap();
        assert_eq!(c.model.overhead, 30);
        assert_eq!(c.model.bus_bytes, BusModel::default().bus_bytes);
        assert_eq!(c.benchmarks, ["jacobi2d5p", "gaussian"]);
        assert_eq!(c.tile_sizes, Some(vec![16, 32]));
        assert_eq!(c.tiles_per_axis, 2);
        assert!(RunConfig::parse("tiles_per_axis = 0\n").is_err());
        assert!(RunConfig::parse("tile = 4\n").is_err());
    }
}
