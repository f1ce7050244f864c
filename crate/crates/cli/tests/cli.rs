use std::path::Path;
use std::process::{Command, Output};

fn cfa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfa")).args(args).output().expect("run cfa")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const FIG4: &str = "name = fig4\ndims = 3\nspace_sizes = 15, 15, 15\ntile_sizes = 5, 5, 5\n\
deps = (-1,0,0) (0,-1,0) (0,0,-1)\n";

fn write_spec(dir: &Path, text: &str) -> String {
    let path = dir.join("k.spec");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn validate_prints_facets() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), FIG4);
    let o = cfa(&["validate", "--spec", &spec]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("fig4: valid, 27 tiles"));
    assert!(out.contains("facet_j\tj\t1\t675\t[jj][ii][kk][k][i]"));
}

#[test]
fn invalid_spec_reports_line_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &FIG4.replace("(0,0,-1)", "(0,0,1)"));
    let o = cfa(&["validate", "--spec", &spec]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));
}

#[test]
fn plan_transactions_csv_for_one_tile() {
    let o = cfa(&["plan", "--benchmark", "jacobi2d5p", "--tile", "1,1,1", "--transactions"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("tile,layout,direction,kind,base,length,useful_elems"));
    assert!(lines.all(|l| l.starts_with("\"(1,1,1)\",cfa,")));
}

#[test]
fn plan_summary_lists_every_layout() {
    let o = cfa(&["plan", "--benchmark", "jacobi2d5p", "--layout", "all"]);
    assert!(o.status.success());
    let out = stdout(&o);
    for kind in ["cfa", "original", "bbox", "dtile"] {
        assert!(out.lines().any(|l| l.starts_with(&format!("{kind}\t"))), "{kind} missing:\n{out}");
    }
}

#[test]
fn simulate_uses_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.txt");
    std::fs::write(&model, "overhead = 200\n").unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["simulate", "--benchmark", "jacobi2d5p", "--tiles", "16,16,16", "--layout", "cfa"];
        args.extend_from_slice(extra);
        let o = cfa(&args);
        assert!(o.status.success());
        let out = stdout(&o);
        let row = out.lines().nth(1).unwrap().to_string();
        row.rsplit(',').next().unwrap().parse::<f64>().unwrap()
    };
    let default = run(&[]);
    let slow = run(&["--model", model.to_str().unwrap()]);
    assert!(slow < default, "{slow} >= {default}");
}

#[test]
fn emit_writes_source_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), FIG4);
    let out = dir.path().join("src");
    let o = cfa(&["emit", "--spec", &spec, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let source = std::fs::read_to_string(out.join("fig4.c")).unwrap();
    assert!(source.contains("#pragma HLS PIPELINE II=1"));
    assert!(std::fs::read_to_string(out.join("manifest.txt")).unwrap().contains("file fig4.c"));
}

#[test]
fn verify_exit_code_reflects_checks() {
    let o = cfa(&["verify", "--benchmark", "smith-waterman-3seq"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("benchmark,check,passed,detail"));
    assert!(out.lines().skip(1).all(|l| l.contains(",true,")));
    assert_eq!(cfa(&["verify", "--benchmark", "nope"]).status.code(), Some(2));
}

#[test]
fn bench_is_reproducible_with_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    std::fs::write(&config, "benchmarks = jacobi2d5p\ntiles = 16, 32, 64\n").unwrap();
    let run = |out: &Path| {
        let o = cfa(&[
            "bench",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--deterministic",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a);
    run(&b);
    let csv = std::fs::read_to_string(a.join("bandwidth.csv")).unwrap();
    // 3 tile sizes x 4 layouts plus the header.
    assert_eq!(csv.lines().count(), 13);
    for file in ["bandwidth.csv", "verification.csv", "manifest.txt", "jacobi2d5p/bandwidth.svg"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn spec_and_benchmark_conflict() {
    let o = cfa(&["validate", "--spec", "x", "--benchmark", "jacobi2d5p"]);
    assert!(!o.status.success());
}
