//! `cfa`: validate kernel specs, plan and simulate layouts, emit HLS copy
//! code and run the benchmark bundle.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cfa_core::codegen::{emit_with_layout, write_units};
use cfa_core::layout::{facet_table, layout_table};
use cfa_core::pipeline::{checks_csv, verify_benchmark, verify_spec, Check, CHECK_CSV_HEADER};
use cfa_core::plan::{transactions_csv, TRANSACTION_CSV_HEADER};
use cfa_core::sim::{best_dtile, simulate_layout, sweep, sweep_csv, SweepRow, SWEEP_TILES_PER_AXIS};
use cfa_core::textfmt::Document;
use cfa_core::{
    builtin_benchmarks, find_benchmark, parse_kernel_spec, run_all, BusModel, CfaLayout, KernelSpec, LayoutContext,
    LayoutKind, RunConfig, Statement, TileCoord,
};

#[derive(Parser)]
#[command(name = "cfa", version, about = "Canonical facet allocation layout toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a kernel, then print its facets.
    Validate(Source),
    /// Print the CFA layout and the transfer plans of one or all layouts.
    Plan(PlanArgs),
    /// Emit the HLS source of the CFA copy functions.
    Emit(EmitArgs),
    /// Simulate bus bandwidth for one kernel or a benchmark sweep.
    Simulate(SimArgs),
    /// Run containment, contiguity, functional and codegen checks.
    Verify(VerifyArgs),
    /// Verify, sweep and write the full report bundle.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct Source {
    /// Kernel spec file.
    #[arg(long, conflicts_with = "benchmark")]
    spec: Option<PathBuf>,
    /// Built-in benchmark name.
    #[arg(long)]
    benchmark: Option<String>,
    /// Tile sizes of a built-in benchmark, e.g. `16,16,16`. The space
    /// holds three tiles per axis; without it the reduced instance is used.
    #[arg(long, value_delimiter = ',', requires = "benchmark")]
    tiles: Option<Vec<i64>>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum LayoutArg {
    Cfa,
    Original,
    Bbox,
    Dtile,
    All,
}

impl LayoutArg {
    fn kinds(self) -> Vec<LayoutKind> {
        match self {
            LayoutArg::Cfa => vec![LayoutKind::Cfa],
            LayoutArg::Original => vec![LayoutKind::Original],
            LayoutArg::Bbox => vec![LayoutKind::Bbox],
            LayoutArg::Dtile => vec![LayoutKind::Dtile],
            LayoutArg::All => LayoutKind::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_enum, default_value = "cfa")]
    layout: LayoutArg,
    /// Plan only this tile, e.g. `1,1,1`.
    #[arg(long, value_delimiter = ',')]
    tile: Option<Vec<i64>>,
    /// Print every transaction as CSV instead of the summary.
    #[arg(long)]
    transactions: bool,
    /// Bus model used to pick the dtile data-tile size.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Write the output to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmitArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory for the `.c` file and `manifest.txt`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_enum, default_value = "all")]
    layout: LayoutArg,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Sweep the benchmark's tile sizes instead of a single instance.
    #[arg(long, requires = "benchmark", conflicts_with = "tiles")]
    sweep: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Config file with bus model keys plus `benchmarks`, `tiles` and
    /// `tiles_per_axis`; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmarks to run (default: all).
    #[arg(long, value_delimiter = ',')]
    benchmark: Vec<String>,
    /// Largest tile extents to sweep, e.g. `16,32,64`.
    #[arg(long, value_delimiter = ',')]
    tiles: Option<Vec<i64>>,
    #[arg(long)]
    tiles_per_axis: Option<i64>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Leave the timestamp out of the manifest.
    #[arg(long)]
    deterministic: bool,
}

struct Kernel {
    name: String,
    spec: KernelSpec,
    stmt: Statement,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: Option<&Path>) -> Result<BusModel> {
    match path {
        None => Ok(BusModel::default()),
        Some(p) => BusModel::parse(&read(p)?).with_context(|| p.display().to_string()),
    }
}

fn load_kernel(source: &Source) -> Result<Kernel> {
    if let Some(path) = &source.spec {
        let text = read(path)?;
        let spec = parse_kernel_spec(&text).with_context(|| path.display().to_string())?;
        let name = Document::parse(&text)?
            .string("name")?
            .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "kernel".into());
        let stmt = Statement::uniform(&spec);
        return Ok(Kernel { name, spec, stmt });
    }
    let Some(name) = &source.benchmark else {
        bail!("one of --spec or --benchmark is required");
    };
    let bench = find_benchmark(name).with_context(|| format!("unknown benchmark `{name}`"))?;
    let spec = match &source.tiles {
        Some(t) => bench.spec(t, SWEEP_TILES_PER_AXIS)?,
        None => bench.reduced_spec(),
    };
    spec.validate()?;
    let name = match &source.tiles {
        Some(t) => format!("{}_{}", bench.name, t.iter().map(i64::to_string).collect::<Vec<_>>().join("x")),
        None => bench.name.to_string(),
    };
    Ok(Kernel {
        name,
        spec,
        stmt: Statement { weights: bench.weights },
    })
}

fn output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn context_for(kind: LayoutKind, model: &BusModel, spec: &KernelSpec) -> Result<LayoutContext> {
    Ok(match kind {
        LayoutKind::Cfa => LayoutContext::Cfa(CfaLayout::build(spec)?),
        LayoutKind::Original => LayoutContext::Original,
        LayoutKind::Bbox => LayoutContext::Bbox,
        LayoutKind::Dtile => LayoutContext::Dtile(best_dtile(model, spec).0),
    })
}

fn validate(source: &Source) -> Result<bool> {
    let k = load_kernel(source)?;
    let layout = CfaLayout::build(&k.spec)?;
    println!(
        "{}: valid, {} tiles of {:?} over {:?}, {} dependences",
        k.name,
        k.spec.total_tiles(),
        k.spec.tile_sizes,
        k.spec.space_sizes,
        k.spec.deps.len()
    );
    print!("{}", facet_table(&layout));
    Ok(true)
}

fn plan(args: &PlanArgs) -> Result<bool> {
    let k = load_kernel(&args.source)?;
    let model = load_model(args.model.as_deref())?;
    let tiles = match &args.tile {
        Some(t) => {
            let tile = TileCoord(t.clone());
            k.spec.check_tile(&tile)?;
            vec![tile]
        }
        None => k.spec.tiles(),
    };
    let mut plans = Vec::new();
    let mut text = String::new();
    if !args.transactions {
        text.push_str(&layout_table(&CfaLayout::build(&k.spec)?, k.spec.element_bytes));
        text.push_str("\nlayout\ttransactions\ttotal_bytes\tuseful_bytes\n");
    }
    for kind in args.layout.kinds() {
        let ctx = context_for(kind, &model, &k.spec)?;
        let mine: Vec<_> = tiles.iter().map(|t| ctx.plan(&k.spec, t)).collect();
        if !args.transactions {
            text.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                kind,
                mine.iter().map(|p| p.transaction_count()).sum::<usize>(),
                mine.iter().map(|p| p.total_bytes()).sum::<u64>(),
                mine.iter().map(|p| p.useful_bytes()).sum::<u64>(),
            ));
        }
        plans.extend(mine);
    }
    if args.transactions {
        text = transactions_csv(&plans);
        debug_assert!(text.starts_with(TRANSACTION_CSV_HEADER));
    }
    output(args.out.as_deref(), &text)?;
    Ok(true)
}

fn emit(args: &EmitArgs) -> Result<bool> {
    let k = load_kernel(&args.source)?;
    let layout = CfaLayout::build(&k.spec)?;
    let unit = emit_with_layout(&k.name, &k.spec, &layout)?;
    write_units(&args.out, std::slice::from_ref(&unit))
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("{}", args.out.join(&unit.file_name).display());
    Ok(true)
}

fn simulate(args: &SimArgs) -> Result<bool> {
    let model = load_model(args.model.as_deref())?;
    let kinds = args.layout.kinds();
    let rows: Vec<SweepRow> = if args.sweep {
        let name = args.source.benchmark.as_deref().unwrap_or_default();
        let bench = find_benchmark(name).with_context(|| format!("unknown benchmark `{name}`"))?;
        sweep(&model, &bench, &bench.tile_sweep, SWEEP_TILES_PER_AXIS)?
            .into_iter()
            .filter(|r| kinds.contains(&r.layout))
            .collect()
    } else {
        let k = load_kernel(&args.source)?;
        kinds
            .iter()
            .map(|&kind| {
                let (data_tile, result) = simulate_layout(&model, &k.spec, kind)?;
                Ok(SweepRow {
                    benchmark: k.name.clone(),
                    tile: k.spec.tile_sizes.clone(),
                    layout: kind,
                    data_tile,
                    result,
                })
            })
            .collect::<Result<_>>()?
    };
    output(args.out.as_deref(), &sweep_csv(&rows))?;
    Ok(true)
}

fn verify(args: &VerifyArgs) -> Result<bool> {
    let checks: Vec<Check> = if args.source.spec.is_none() && args.source.benchmark.is_none() {
        builtin_benchmarks().iter().flat_map(verify_benchmark).collect()
    } else if args.source.spec.is_none() && args.source.tiles.is_none() {
        let name = args.source.benchmark.as_deref().unwrap_or_default();
        verify_benchmark(&find_benchmark(name).with_context(|| format!("unknown benchmark `{name}`"))?)
    } else {
        let k = load_kernel(&args.source)?;
        verify_spec(&k.name, &k.spec, &k.stmt)
    };
    let csv = checks_csv(&checks);
    debug_assert!(csv.starts_with(CHECK_CSV_HEADER));
    output(args.out.as_deref(), &csv)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    eprintln!("{} checks, {failed} failed", checks.len());
    Ok(failed == 0)
}

fn bench(args: &BenchArgs) -> Result<bool> {
    let mut config = match &args.config {
        Some(p) => RunConfig::parse(&read(p)?).with_context(|| p.display().to_string())?,
        None => RunConfig::default(),
    };
    if args.model.is_some() {
        config.model = load_model(args.model.as_deref())?;
    }
    if !args.benchmark.is_empty() {
        config.benchmarks = args.benchmark.clone();
    }
    if let Some(t) = &args.tiles {
        config.tile_sizes = Some(t.clone());
    }
    if let Some(n) = args.tiles_per_axis {
        config.tiles_per_axis = n;
    }
    config.deterministic |= args.deterministic;
    let summary = run_all(&args.out, &config)?;
    for c in summary.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAILED {} {}: {}", c.benchmark, c.name, c.detail);
    }
    println!(
        "{} checks, {} bandwidth rows, {} files in {}",
        summary.checks.len(),
        summary.rows.len(),
        summary.files.len(),
        args.out.display()
    );
    Ok(summary.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(s) => validate(s),
        Command::Plan(a) => plan(a),
        Command::Emit(a) => emit(a),
        Command::Simulate(a) => simulate(a),
        Command::Verify(a) => verify(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
