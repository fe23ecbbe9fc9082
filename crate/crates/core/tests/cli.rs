//! The `mub` command line driven in-process through `dispatch`.

use std::path::Path;

use musb::cli::{dispatch, parse_report, render_report, Report, ReportFormat, RunManifest};
use proptest::prelude::*;

fn mub(args: &[&str]) -> i32 {
    dispatch(std::iter::once("mub").chain(args.iter().copied()))
}

fn report(path: &Path, format: ReportFormat) -> Report {
    parse_report(&std::fs::read_to_string(path).unwrap(), format).unwrap()
}

#[test]
fn counts_table_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("counts.txt");
    assert_eq!(mub(&["counts", "--dim", "6", "--sizes", "3,3,3,3", "--out", out.to_str().unwrap()]), 0);
    let golden = include_str!("golden/counts_d6_3333.txt");
    assert_eq!(std::fs::read_to_string(&out).unwrap(), golden);
    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("counts.txt.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.command, "counts");
    assert_eq!(manifest.outcome.vars, 122);
}

#[test]
fn unreduced_count_for_four_bases_in_dimension_six() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = out.to_str().unwrap();
    assert_eq!(mub(&["counts", "--unreduced", "--dim", "6", "--bases", "4", "--format", "json", "--out", o]), 0);
    assert_eq!(report(&out, ReportFormat::Json).vars, 360);
}

#[test]
fn feasible_search_reports_converged() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let trace = dir.path().join("trace.csv");
    let args = ["search", "--dim", "2", "--sizes", "2,2,2", "--format", "json"];
    let code = mub(&[&args[..], &["--out", out.to_str().unwrap(), "--trace", trace.to_str().unwrap()]].concat());
    assert_eq!(code, 0);
    let r = report(&out, ReportFormat::Json);
    assert_eq!(r.status, "converged");
    assert!(r.residual.unwrap() <= 1e-13);
    let lines = std::fs::read_to_string(&trace).unwrap();
    assert!(lines.starts_with("iteration,combined\n"));
    assert_eq!(lines.lines().count(), r.iterations.unwrap() + 2);
}

#[test]
fn infeasible_search_exits_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let code = mub(&[
        "search", "--dim", "2", "--sizes", "2,1,1,1", "--max-iters", "500", "--format", "csv", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    let r = report(&out, ReportFormat::Csv);
    assert_eq!(r.status, "iteration_limit");
    assert_eq!(r.iterations, Some(500));
}

#[test]
fn prove_reports_full_pruning() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.json");
    let sdpa = dir.path().join("sdpa");
    let code = mub(&[
        "prove", "--dim", "2", "--sizes", "1,1,2,1", "--format", "json", "--out", out.to_str().unwrap(),
        "--export-sdpa", sdpa.to_str().unwrap(), "--export-every", "5",
    ]);
    assert_eq!(code, 0);
    let r = report(&out, ReportFormat::Json);
    assert_eq!(r.status, "proven_infeasible");
    assert_eq!(r.pruned_fraction, Some(1.0));
    let dumped = std::fs::read_dir(&sdpa).unwrap().count();
    assert_eq!(dumped, r.regions.unwrap().div_ceil(5));
}

#[test]
fn prove_budget_exits_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.txt");
    let code = mub(&["prove", "--dim", "2", "--sizes", "2,1,1,1", "--max-regions", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    let r = report(&out, ReportFormat::Table);
    assert_eq!((r.status.as_str(), r.regions), ("budget", Some(3)));
    assert!(r.pruned_fraction.unwrap() < 1.0);
}

#[test]
fn build_then_verify_a_point_file() {
    let dir = tempfile::tempdir().unwrap();
    let system = dir.path().join("system.txt");
    let manifest = dir.path().join("build.json");
    let code = mub(&[
        "build", "--dim", "2", "--sizes", "2,2,2", "--out", system.to_str().unwrap(), "--manifest",
        manifest.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (_, x) = musb::model::qubit_mub_triple();
    let point = dir.path().join("point.txt");
    std::fs::write(&point, x.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join("\n")).unwrap();
    let out = dir.path().join("v.json");
    let code = mub(&[
        "verify", "--system", system.to_str().unwrap(), "--point", point.to_str().unwrap(), "--format", "json",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let r = report(&out, ReportFormat::Json);
    assert_eq!(r.status, "valid");
    assert!(r.residual.unwrap() <= 1e-12);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(mub(&["counts", "--dim", "3", "--sizes", "2,1", "--bogus"]), 1);
    assert_eq!(mub(&["frobnicate"]), 1);
    assert_eq!(mub(&["counts", "--dim", "1", "--sizes", "1,1"]), 1);
    assert_eq!(mub(&["-h"]), 0);
}

fn any_report() -> impl Strategy<Value = Report> {
    let float = prop_oneof![Just(None), any::<f64>().prop_filter("finite", |v| v.is_finite()).prop_map(Some)];
    (
        "[a-z_]{1,20}",
        any::<usize>(),
        proptest::option::of(any::<usize>()),
        proptest::option::of(any::<usize>()),
        proptest::option::of(any::<usize>()),
        (float.clone(), float.clone(), float.clone(), float),
        proptest::option::of(any::<u64>()),
    )
        .prop_map(|(status, vars, eqns, iterations, regions, (residual, lambda, pruned_fraction, eta_seconds), seed)| {
            Report { status, vars, eqns, iterations, regions, residual, lambda, pruned_fraction, eta_seconds, seed }
        })
}

proptest! {
    #[test]
    fn reports_round_trip_in_every_format(r in any_report()) {
        for format in [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Table] {
            let text = render_report(&r, format).unwrap();
            prop_assert_eq!(&parse_report(&text, format).unwrap(), &r);
        }
    }
}
