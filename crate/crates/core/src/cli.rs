//! Command-line front end: `counts`, `build`, `search`, `prove`, `verify`.
//!
//! Every run writes one report (json, csv or an aligned table) and one run
//! manifest. Exit codes: 0 when a verdict was reached, 2 when the run ended
//! inconclusive (iteration limit, region budget), 1 on usage or runtime
//! errors.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bnb::{BnbConfig, BnbObserver, BnbStatus, BranchAndBound, ProgressEstimate, QueueDiscipline, RegionReport, SdpaDump};
use crate::error::{Error, Result};
use crate::model::{
    build_problem, count_profile, parse_system_text, qubit_mub_triple, reconstruction_error, system_to_text,
    unreduced_count, verify_candidate, EquationSystem, ProblemSpec, SymmetryFlags,
};
use crate::region::Region;
use crate::relaxation::RelaxationOptions;
use crate::search::{run as run_search, IntegrationVariable, SearchConfig, SearchStatus};

/// Environment variable giving the default worker count.
pub const THREADS_ENV: &str = "MUB_THREADS";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    #[default]
    Table,
}

/// One row of results. Fields that do not apply to a subcommand are empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub status: String,
    pub vars: usize,
    pub eqns: Option<usize>,
    pub iterations: Option<usize>,
    pub regions: Option<usize>,
    /// Combined objective `Σ h²` for searches, max `|h|` otherwise.
    pub residual: Option<f64>,
    /// Root relaxation value for proofs.
    pub lambda: Option<f64>,
    pub pruned_fraction: Option<f64>,
    pub eta_seconds: Option<f64>,
    pub seed: Option<u64>,
}

const FIELDS: [&str; 10] =
    ["status", "vars", "eqns", "iterations", "regions", "residual", "lambda", "pruned_fraction", "eta_seconds", "seed"];

impl Report {
    fn new(status: &str, vars: usize) -> Self {
        Self {
            status: status.to_string(),
            vars,
            eqns: None,
            iterations: None,
            regions: None,
            residual: None,
            lambda: None,
            pruned_fraction: None,
            eta_seconds: None,
            seed: None,
        }
    }

    fn cells(&self) -> Vec<String> {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map_or_else(|| "-".to_string(), |v| v.to_string())
        }
        // Display and `{:e}` both print the shortest round-tripping digits.
        fn float(v: Option<f64>) -> String {
            match v {
                Some(x) if x != 0.0 && !(1e-4..1e6).contains(&x.abs()) => format!("{x:e}"),
                v => opt(v),
            }
        }
        vec![
            self.status.clone(),
            self.vars.to_string(),
            opt(self.eqns),
            opt(self.iterations),
            opt(self.regions),
            float(self.residual),
            float(self.lambda),
            float(self.pruned_fraction),
            float(self.eta_seconds),
            opt(self.seed),
        ]
    }

    fn from_cells(cells: &[(&str, &str)]) -> Result<Self> {
        fn get<'a>(cells: &[(&str, &'a str)], key: &str) -> Result<&'a str> {
            cells
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Parse { line: 0, msg: format!("missing field {key}") })
        }
        fn opt<T: std::str::FromStr>(cells: &[(&str, &str)], key: &str) -> Result<Option<T>> {
            match get(cells, key)? {
                "-" | "" => Ok(None),
                v => v
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::Parse { line: 0, msg: format!("bad value {v:?} for {key}") }),
            }
        }
        Ok(Self {
            status: get(cells, "status")?.to_string(),
            vars: opt(cells, "vars")?.ok_or_else(|| Error::Parse { line: 0, msg: "vars is required".into() })?,
            eqns: opt(cells, "eqns")?,
            iterations: opt(cells, "iterations")?,
            regions: opt(cells, "regions")?,
            residual: opt(cells, "residual")?,
            lambda: opt(cells, "lambda")?,
            pruned_fraction: opt(cells, "pruned_fraction")?,
            eta_seconds: opt(cells, "eta_seconds")?,
            seed: opt(cells, "seed")?,
        })
    }
}

/// Renders a report. Floats use the shortest representation that reads back
/// to the same value, so every format round-trips through [`parse_report`].
pub fn render_report(report: &Report, format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Json => serde_json::to_string(report)? + "\n",
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(FIELDS)?;
            w.write_record(report.cells().iter().map(|c| if c == "-" { "" } else { c.as_str() }))?;
            String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
                .map_err(|e| Error::Logic(e.to_string()))?
        }
        ReportFormat::Table => FIELDS
            .iter()
            .zip(report.cells())
            .map(|(k, v)| format!("{k:<16}{v}\n"))
            .collect(),
    })
}

pub fn parse_report(text: &str, format: ReportFormat) -> Result<Report> {
    match format {
        ReportFormat::Json => Ok(serde_json::from_str(text)?),
        ReportFormat::Csv => {
            let mut r = csv::Reader::from_reader(text.as_bytes());
            let headers = r.headers()?.clone();
            let row = r
                .records()
                .next()
                .ok_or_else(|| Error::Parse { line: 2, msg: "csv report has no data row".into() })??;
            let cells: Vec<(&str, &str)> = headers.iter().zip(row.iter()).collect();
            Report::from_cells(&cells)
        }
        ReportFormat::Table => {
            let cells: Vec<(&str, &str)> = text
                .lines()
                .filter_map(|l| l.split_once(' ').map(|(k, v)| (k, v.trim())))
                .collect();
            Report::from_cells(&cells)
        }
    }
}

/// Writes the report to `out`, or stdout when absent.
pub fn write_report(report: &Report, format: ReportFormat, out: Option<&Path>) -> Result<()> {
    let text = render_report(report, format)?;
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub spec: Option<ProblemSpec>,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub started: String,
    pub finished: String,
    pub outcome: Report,
}

#[derive(Parser, Debug)]
#[command(name = "mub", version, about = "Mutually unbiased sub-bases: counts, Newton search and relaxation proofs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Variable and equation counts of a size profile.
    Counts(CountsArgs),
    /// Write the polynomial system as text.
    Build(BuildArgs),
    /// Newton search on the integrated squared-sum objective.
    Search(SearchArgs),
    /// Branch-and-bound over moment relaxations.
    Prove(ProveArgs),
    /// Check a point against the equalities and symmetry inequalities.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct SpecArgs {
    #[arg(long)]
    dim: usize,
    /// Comma-separated set sizes; sorted non-increasing if needed.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long)]
    no_vector_swap: bool,
    #[arg(long)]
    no_set_swap: bool,
    #[arg(long)]
    no_conjugation: bool,
}

impl SpecArgs {
    fn spec(&self) -> Result<ProblemSpec> {
        let spec = ProblemSpec::new(self.dim, &sorted_sizes(&self.sizes)).with_symmetry(SymmetryFlags {
            vector_swap: !self.no_vector_swap,
            set_swap: !self.no_set_swap,
            conjugation: !self.no_conjugation,
        });
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Manifest destination; defaults to `<out>.manifest.json`, or stderr.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CountsArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long, value_delimiter = ',', conflicts_with = "bases")]
    sizes: Vec<usize>,
    /// Number of complete bases, instead of `--sizes`.
    #[arg(long)]
    bases: Option<usize>,
    /// Count the formulation without any reductions.
    #[arg(long)]
    unreduced: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct BuildArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// System text destination.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SearchArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-13)]
    tol: f64,
    #[arg(long, default_value_t = 1e-7)]
    residual_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    damping: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    starts: usize,
    /// Worker threads for multi-start; defaults to MUB_THREADS or 1.
    #[arg(long)]
    threads: Option<usize>,
    /// `aux` or a variable index.
    #[arg(long, default_value = "aux")]
    integrate_var: String,
    /// CSV of (iteration, combined value) for the reported start.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
enum QueueArg {
    Lifo,
    BestFirst,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ProveArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 1)]
    level: u32,
    #[arg(long, default_value_t = 1e-8)]
    eps_err: f64,
    #[arg(long, default_value_t = 1e-7)]
    eps_infeas: f64,
    #[arg(long, value_enum, default_value_t = QueueArg::Lifo)]
    queue: QueueArg,
    /// Defaults to MUB_THREADS or 1.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    max_regions: usize,
    #[arg(long)]
    progress_interval: Option<f64>,
    #[arg(long)]
    export_sdpa: Option<PathBuf>,
    /// With `--export-sdpa`, write every N-th region.
    #[arg(long, default_value_t = 1)]
    export_every: usize,
    /// Drop the products of equalities with monomials.
    #[arg(long)]
    no_products: bool,
    /// Add McCormick rows for cross moments.
    #[arg(long)]
    mccormick: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct VerifyArgs {
    #[arg(long, required_unless_present_any = ["system", "qubit_example"])]
    dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    /// System file written by `build`.
    #[arg(long, conflicts_with = "dim")]
    system: Option<PathBuf>,
    /// Point file: numbers separated by whitespace or commas, or a json array.
    #[arg(long, required_unless_present = "qubit_example")]
    point: Option<PathBuf>,
    /// Verify the three qubit bases instead of a point file.
    #[arg(long)]
    qubit_example: bool,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[command(flatten)]
    output: OutputArgs,
}

fn sorted_sizes(sizes: &[usize]) -> Vec<usize> {
    let mut s = sizes.to_vec();
    s.sort_unstable_by(|a, b| b.cmp(a));
    if s != sizes {
        eprintln!("warning: sizes {sizes:?} reordered to {s:?}");
    }
    s
}

fn env_threads() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()).filter(|&n| n > 0).unwrap_or(1)
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339()
}

/// Runs the command line and returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli.command, argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

struct Run {
    command: &'static str,
    argv: Vec<String>,
    started: String,
    spec: Option<ProblemSpec>,
    config: serde_json::Value,
    seeds: Vec<u64>,
}

impl Run {
    fn finish(self, report: Report, output: &OutputArgs) -> Result<()> {
        write_report(&report, output.format, output.out.as_deref())?;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command.to_string(),
            argv: self.argv,
            spec: self.spec,
            config: self.config,
            seeds: self.seeds,
            started: self.started,
            finished: timestamp(),
            outcome: report,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        let path = output.manifest.clone().or_else(|| {
            output.out.as_ref().map(|o| {
                let mut s = o.clone().into_os_string();
                s.push(".manifest.json");
                PathBuf::from(s)
            })
        });
        match path {
            Some(p) => std::fs::write(p, text + "\n")?,
            None => eprintln!("manifest: {}", serde_json::to_string(&manifest)?),
        }
        Ok(())
    }
}

fn execute(command: Command, argv: Vec<String>) -> Result<i32> {
    let started = timestamp();
    let run = |command, spec, config: &dyn erased::Config, seeds| Run {
        command,
        argv: argv.clone(),
        started: started.clone(),
        spec,
        config: config.to_json(),
        seeds,
    };
    match command {
        Command::Counts(a) => {
            let report = counts(&a)?;
            run("counts", None, &a, vec![]).finish(report, &a.output)?;
            Ok(0)
        }
        Command::Build(a) => {
            let spec = a.spec.spec()?;
            let system = build_problem(&spec)?;
            std::fs::write(&a.out, system_to_text(&system))?;
            let c = system.counts();
            let mut report = Report::new("built", c.variables);
            report.eqns = Some(c.reported_equalities);
            let output = OutputArgs { format: a.format, out: None, manifest: a.manifest.clone() };
            run("build", Some(spec), &a, vec![]).finish(report, &output)?;
            Ok(0)
        }
        Command::Search(a) => {
            let spec = a.spec.spec()?;
            let system = build_problem(&spec)?;
            let cfg = SearchConfig {
                alpha: a.alpha,
                max_iters: a.max_iters,
                tol: a.tol,
                residual_tol: a.residual_tol,
                damping: a.damping,
                seed: a.seed,
                starts: a.starts,
                threads: a.threads.unwrap_or_else(env_threads),
                integration_variable: parse_integration_variable(&a.integrate_var)?,
                record_trace: a.trace.is_some(),
            };
            let out = run_search(&system, &cfg)?;
            if let (Some(path), Some(trace)) = (&a.trace, &out.trace) {
                write_trace(path, trace)?;
            }
            let status = match out.status {
                SearchStatus::Converged => "converged",
                SearchStatus::IterationLimit => "iteration_limit",
                SearchStatus::NumericalFailure => "numerical_failure",
            };
            let mut report = Report::new(status, system.num_vars());
            report.eqns = Some(system.reported_equalities);
            report.iterations = Some(out.iterations);
            report.residual = Some(out.combined_value);
            report.seed = Some(out.seed);
            let seeds = (0..cfg.starts as u64).map(|k| cfg.seed.wrapping_add(k)).collect();
            let mut r = run("search", Some(spec), &a, seeds);
            r.config = serde_json::to_value(&cfg)?;
            r.finish(report, &a.output)?;
            Ok(if out.status == SearchStatus::Converged { 0 } else { 2 })
        }
        Command::Prove(a) => {
            let spec = a.spec.spec()?;
            let system = build_problem(&spec)?;
            let cfg = prove_config(&a)?;
            let bnb = BranchAndBound::new(&system, cfg.clone())?;
            let mut observer = CliObserver { root_lambda: None, progress: a.progress_interval.is_some() };
            let out = bnb.run(&mut observer)?;
            if let Some(cause) = &out.cause {
                eprintln!("stopped: {cause}");
            }
            let status = match out.status {
                BnbStatus::FeasiblePoint => "feasible_point",
                BnbStatus::ProvenInfeasible => "proven_infeasible",
                BnbStatus::Budget => "budget",
            };
            let mut report = Report::new(status, system.num_vars());
            report.eqns = Some(system.reported_equalities);
            report.regions = Some(out.regions_processed);
            report.residual = out.residual;
            report.lambda = observer.root_lambda;
            report.pruned_fraction = Some(out.pruned_fraction);
            report.eta_seconds = out.estimate.eta_secs();
            let mut r = run("prove", Some(spec), &a, vec![]);
            r.config = serde_json::to_value(&cfg)?;
            r.finish(report, &a.output)?;
            Ok(if out.status == BnbStatus::Budget { 2 } else { 0 })
        }
        Command::Verify(a) => {
            let (system, point) = verify_inputs(&a)?;
            let c = verify_candidate(&system, &point)?;
            let recon = reconstruction_error(&system, &point)?;
            let ok = c.max_residual <= a.tol && c.min_inequality() >= -a.tol;
            eprintln!(
                "max residual {:.3e}, worst inequality {:.3e}, reconstruction error {:.3e}",
                c.max_residual,
                c.min_inequality(),
                recon
            );
            let mut report = Report::new(if ok { "valid" } else { "invalid" }, system.num_vars());
            report.eqns = Some(system.reported_equalities);
            report.residual = Some(c.max_residual);
            run("verify", Some(system.spec.clone()), &a, vec![]).finish(report, &a.output)?;
            Ok(0)
        }
    }
}

mod erased {
    /// Serializable echo of the parsed arguments.
    pub trait Config {
        fn to_json(&self) -> serde_json::Value;
    }

    impl<T: serde::Serialize> Config for T {
        fn to_json(&self) -> serde_json::Value {
            serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
        }
    }
}

fn counts(a: &CountsArgs) -> Result<Report> {
    if a.unreduced {
        let n = match (a.bases, a.sizes.len()) {
            (Some(n), _) => n,
            (None, 0) => return Err(Error::Usage("--unreduced needs --bases or --sizes".into())),
            (None, n) => n,
        };
        return Ok(Report::new("counted", unreduced_count(a.dim, n)?));
    }
    let spec = match a.bases {
        Some(n) => ProblemSpec::full_bases(a.dim, n),
        None => ProblemSpec::new(a.dim, &sorted_sizes(&a.sizes)),
    };
    let c = count_profile(&spec)?;
    let mut report = Report::new("counted", c.variables);
    report.eqns = Some(c.reported_equalities);
    Ok(report)
}

fn parse_integration_variable(s: &str) -> Result<IntegrationVariable> {
    match s {
        "aux" => Ok(IntegrationVariable::Aux),
        _ => s
            .parse()
            .map(IntegrationVariable::Index)
            .map_err(|_| Error::Usage(format!("--integrate-var expects `aux` or an index, got {s:?}"))),
    }
}

fn write_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "combined"])?;
    for (i, f) in trace.iter().enumerate() {
        w.write_record([i.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn prove_config(a: &ProveArgs) -> Result<BnbConfig> {
    if let Some(dir) = &a.export_sdpa {
        std::fs::create_dir_all(dir)?;
    }
    let interval = match a.progress_interval {
        Some(s) if !(s > 0.0 && s.is_finite()) => {
            return Err(Error::Usage(format!("--progress-interval must be positive, got {s}")))
        }
        s => s.map(Duration::from_secs_f64),
    };
    Ok(BnbConfig {
        level: a.level,
        eps_err: a.eps_err,
        eps_infeas: a.eps_infeas,
        queue: match a.queue {
            QueueArg::Lifo => QueueDiscipline::Lifo,
            QueueArg::BestFirst => QueueDiscipline::BestFirst,
        },
        workers: a.workers.unwrap_or_else(env_threads),
        max_regions: a.max_regions,
        progress_interval: interval,
        relaxation: RelaxationOptions { products: !a.no_products, mccormick: a.mccormick, ..Default::default() },
        export_sdpa: a.export_sdpa.clone().map(|dir| SdpaDump { dir, every: a.export_every.max(1) }),
        ..Default::default()
    })
}

fn verify_inputs(a: &VerifyArgs) -> Result<(EquationSystem, Vec<f64>)> {
    if a.qubit_example {
        return Ok(qubit_mub_triple());
    }
    let system = match (&a.system, a.dim) {
        (Some(path), _) => parse_system_text(&std::fs::read_to_string(path)?)?,
        (None, Some(d)) => build_problem(&ProblemSpec::new(d, &sorted_sizes(&a.sizes)))?,
        (None, None) => return Err(Error::Usage("verify needs --dim/--sizes or --system".into())),
    };
    let path = a.point.as_ref().ok_or_else(|| Error::Usage("verify needs --point".into()))?;
    Ok((system, read_point(&std::fs::read_to_string(path)?)?))
}

/// Numbers separated by whitespace or commas, or a json array.
pub fn read_point(text: &str) -> Result<Vec<f64>> {
    let t = text.trim();
    if t.starts_with('[') {
        return Ok(serde_json::from_str(t)?);
    }
    t.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(i, s)| s.parse().map_err(|_| Error::Parse { line: 0, msg: format!("entry {i}: {s:?} is not a number") }))
        .collect()
}

struct CliObserver {
    root_lambda: Option<f64>,
    progress: bool,
}

impl BnbObserver for CliObserver {
    fn region_done(&mut self, region: &Region, report: &RegionReport) {
        if region.depth == 0 {
            self.root_lambda = Some(report.lambda);
        }
    }

    fn progress(&mut self, e: &ProgressEstimate) {
        if self.progress {
            eprintln!("{}", e.line());
        }
    }
}
