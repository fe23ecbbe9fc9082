//! Spatial branch-and-bound over the variable box.
//!
//! Each region gets a moment relaxation. A region is pruned when the
//! relaxation's optimal `λ` exceeds `eps_infeas`, and otherwise split at the
//! first-order moment of the variable with the largest monomial error. The
//! pruned volume fraction drives the completion estimate.

use std::collections::BinaryHeap;
use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::conic::{export_sdpa, solve, Iterate, SolveOptions, SolveStatus};
use crate::error::{Error, Result};
use crate::model::{canonicalize, initial_region, verify_candidate, EquationSystem};
use crate::region::Region;
use crate::relaxation::{extract, moments_from_solution, ExtractedPoint, Relaxation, RelaxationOptions};
use crate::search::{NewtonSolver, SearchConfig, SearchStatus};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueDiscipline {
    /// Depth first; memory bounded by depth.
    #[default]
    Lifo,
    /// Smallest parent `λ` first.
    BestFirst,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpaDump {
    pub dir: PathBuf,
    /// Write every `every`-th region's program.
    pub every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BnbConfig {
    pub level: u32,
    pub eps_err: f64,
    pub eps_infeas: f64,
    pub min_width_fraction: f64,
    pub queue: QueueDiscipline,
    pub workers: usize,
    pub max_regions: usize,
    pub progress_interval: Option<Duration>,
    pub relaxation: RelaxationOptions,
    pub solver: SolveOptions,
    /// Newton iterations tried from each unpruned region's first-order
    /// moments; 0 disables.
    pub polish_iters: usize,
    /// Residual a reported point must meet on every equality.
    pub residual_tol: f64,
    /// Slack allowed on the symmetry inequalities of a reported point.
    pub inequality_tol: f64,
    pub export_sdpa: Option<SdpaDump>,
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self {
            level: 1,
            eps_err: 1e-8,
            eps_infeas: 1e-7,
            min_width_fraction: 0.01,
            queue: QueueDiscipline::Lifo,
            workers: 1,
            max_regions: 1_000_000,
            progress_interval: None,
            relaxation: RelaxationOptions::default(),
            solver: SolveOptions::default(),
            polish_iters: 30,
            residual_tol: 1e-6,
            inequality_tol: 1e-8,
            export_sdpa: None,
        }
    }
}

impl BnbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_err > 0.0 && self.eps_infeas > 0.0) {
            return Err(Error::Usage("thresholds must be positive".into()));
        }
        if !(self.min_width_fraction > 0.0 && self.min_width_fraction < 0.5) {
            return Err(Error::Usage("min width fraction must lie in (0, 0.5)".into()));
        }
        if self.workers == 0 || self.max_regions == 0 {
            return Err(Error::Usage("workers and max regions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum RegionVerdict {
    Pruned { lambda: f64, certified: bool },
    Candidate { point: Vec<f64>, max_residual: f64 },
    Branch { variable: usize, point: f64 },
}

/// Everything learned from one region's relaxation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionReport {
    pub verdict: RegionVerdict,
    pub lambda: f64,
    pub solver_status: SolveStatus,
    pub solver_iterations: usize,
    pub extracted: Option<ExtractedPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BnbStatus {
    FeasiblePoint,
    ProvenInfeasible,
    Budget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressEstimate {
    pub pruned_fraction: f64,
    pub regions: usize,
    pub queue_depth: usize,
    pub elapsed_secs: f64,
    /// `elapsed / pruned_fraction`; undefined while nothing is pruned.
    pub estimate_total_secs: Option<f64>,
}

impl ProgressEstimate {
    pub fn eta_secs(&self) -> Option<f64> {
        self.estimate_total_secs.map(|t| (t - self.elapsed_secs).max(0.0))
    }

    /// `pruned=<frac> regions=<n> eta=<dur>`.
    pub fn line(&self) -> String {
        let eta = self.eta_secs().map_or_else(|| "undefined".to_string(), format_duration);
        format!("pruned={:.6} regions={} eta={eta}", self.pruned_fraction, self.regions)
    }
}

pub fn format_duration(secs: f64) -> String {
    if !secs.is_finite() {
        return "inf".into();
    }
    let s = secs.round() as u64;
    match s {
        0..=59 => format!("{secs:.1}s"),
        60..=3599 => format!("{}m{:02}s", s / 60, s % 60),
        3600..=86_399 => format!("{}h{:02}m", s / 3600, (s % 3600) / 60),
        86_400..=31_535_999 => format!("{}d{:02}h", s / 86_400, (s % 86_400) / 3600),
        _ => format!("{:.3e}y", secs / 31_536_000.0),
    }
}

/// Linear extrapolation of elapsed time to a fully pruned box.
pub fn progress(pruned_fraction: f64, elapsed_secs: f64, regions: usize, queue_depth: usize) -> ProgressEstimate {
    ProgressEstimate {
        pruned_fraction,
        regions,
        queue_depth,
        elapsed_secs,
        estimate_total_secs: (pruned_fraction > 0.0).then(|| elapsed_secs / pruned_fraction.min(1.0)),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BnbOutcome {
    pub status: BnbStatus,
    pub point: Option<Vec<f64>>,
    pub residual: Option<f64>,
    pub regions_processed: usize,
    pub pruned_fraction: f64,
    pub elapsed_secs: f64,
    pub estimate: ProgressEstimate,
    pub max_depth: usize,
    pub max_queue: usize,
    pub solver_iterations: usize,
    pub cause: Option<String>,
}

/// Hooks into a run. Calls are serialized.
pub trait BnbObserver: Send {
    fn region_done(&mut self, _region: &Region, _report: &RegionReport) {}
    fn progress(&mut self, _estimate: &ProgressEstimate) {}
}

/// Observer that ignores everything.
pub struct Silent;
impl BnbObserver for Silent {}

/// Prints progress lines to stderr.
pub struct StderrProgress;
impl BnbObserver for StderrProgress {
    fn progress(&mut self, e: &ProgressEstimate) {
        eprintln!("{}", e.line());
    }
}

pub struct BranchAndBound<'a> {
    pub system: &'a EquationSystem,
    pub relaxation: Relaxation,
    pub cfg: BnbConfig,
    newton: Option<NewtonSolver>,
    newton_cfg: SearchConfig,
}

impl<'a> BranchAndBound<'a> {
    pub fn new(system: &'a EquationSystem, cfg: BnbConfig) -> Result<Self> {
        cfg.validate()?;
        let relaxation = Relaxation::new(system, cfg.level, cfg.relaxation)?;
        let newton_cfg = SearchConfig { max_iters: cfg.polish_iters, ..SearchConfig::default() };
        let newton = (cfg.polish_iters > 0).then(|| NewtonSolver::new(system, &newton_cfg)).transpose()?;
        Ok(Self { system, relaxation, cfg, newton, newton_cfg })
    }

    /// Solves one region's relaxation and decides what to do with it.
    pub fn process_region(&self, region: &Region, solver: &SolveOptions) -> Result<RegionReport> {
        self.process(region, solver, None)
    }

    fn process(&self, region: &Region, solver: &SolveOptions, dump: Option<PathBuf>) -> Result<RegionReport> {
        let rp = self.relaxation.assemble(region)?;
        let program = rp.to_conic();
        if let Some(path) = dump {
            export_sdpa(&program, &path)?;
        }
        let bounds = rp.variable_bounds(&self.relaxation.layout, region);
        let eps = self.cfg.eps_infeas;
        let mut certified: Option<f64> = None;
        let mut upper: Option<f64> = None;
        let mut checks = 0usize;
        let mut monitor = |it: &Iterate| -> bool {
            checks += 1;
            // Dual side: a certified bound above eps rules out every real point.
            let w: Vec<f64> = it.y.iter().map(|v| -v).collect();
            if let Ok(lb) = program.dual_lower_bound(&w, &bounds) {
                if lb > eps {
                    certified = Some(lb);
                    return true;
                }
            }
            // Primal side: moments already reaching λ ≤ eps settle "not prunable".
            if checks % 4 == 0 && it.primal_residual < 1e-4 {
                if let Ok(u) = rp.min_lambda(&moments_from_solution(it.x)) {
                    if u <= eps {
                        upper = Some(u);
                        return true;
                    }
                }
            }
            false
        };
        let result = solve(&program, solver, Some(&mut monitor))?;
        let moments = moments_from_solution(&result.x);
        let report = |verdict, lambda, extracted| RegionReport {
            verdict,
            lambda,
            solver_status: result.status,
            solver_iterations: result.iterations,
            extracted,
        };
        if let Some(lb) = certified {
            return Ok(report(RegionVerdict::Pruned { lambda: lb, certified: true }, lb, None));
        }
        let lambda = match (result.status, upper) {
            (_, Some(u)) => u,
            (SolveStatus::Optimal, None) => {
                if result.objective > eps {
                    return Ok(report(RegionVerdict::Pruned { lambda: result.objective, certified: false }, result.objective, None));
                }
                result.objective
            }
            _ => {
                // Unfinished solve: only an exact primal value can keep the region.
                let u = rp.min_lambda(&moments)?;
                if u > eps {
                    return Err(Error::NumericalTrouble(format!(
                        "relaxation solve ended {:?} after {} iterations without a decision",
                        result.status, result.iterations
                    )));
                }
                u
            }
        };
        let ex = extract(&moments, &self.relaxation.layout);
        if let Some((point, max_residual)) = self.try_point(&ex) {
            return Ok(report(RegionVerdict::Candidate { point, max_residual }, lambda, Some(ex)));
        }
        let i = ex.argmax;
        let (l, u) = (region.lower[i], region.upper[i]);
        let w = u - l;
        let point = ex.x[i].clamp(l + w * self.cfg.min_width_fraction, u - w * self.cfg.min_width_fraction);
        Ok(report(RegionVerdict::Branch { variable: i, point }, lambda, Some(ex)))
    }

    /// A point passing every equality within `residual_tol` and every
    /// symmetry inequality within `inequality_tol`, from the relaxation's
    /// first-order moments or a short Newton polish started there.
    fn try_point(&self, ex: &ExtractedPoint) -> Option<(Vec<f64>, f64)> {
        let mut starts = Vec::new();
        if ex.max_error <= self.cfg.eps_err {
            starts.push(ex.x.clone());
        }
        if let Some(newton) = &self.newton {
            let out = newton.run_from(&ex.x, &self.newton_cfg, 0);
            if out.status == SearchStatus::Converged {
                starts.push(out.point);
            }
        }
        starts.into_iter().find_map(|x| self.accept(&x))
    }

    fn accept(&self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        let x = canonicalize(self.system, x).ok()?;
        let c = verify_candidate(self.system, &x).ok()?;
        (c.max_residual <= self.cfg.residual_tol && c.min_inequality() >= -self.cfg.inequality_tol)
            .then_some((x, c.max_residual))
    }

    pub fn run(&self, observer: &mut dyn BnbObserver) -> Result<BnbOutcome> {
        let root = initial_region(self.system);
        let shared = Shared {
            state: Mutex::new(State::new(root, self.cfg.queue)),
            wake: Condvar::new(),
            start: Instant::now(),
        };
        let observer = Mutex::new(observer);
        let workers = self.cfg.workers.max(1);
        if workers == 1 {
            self.worker(&shared, &observer);
        } else {
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| self.worker(&shared, &observer));
                }
            });
        }
        let st = shared.state.into_inner().expect("state lock poisoned");
        let elapsed = shared.start.elapsed().as_secs_f64();
        let estimate = progress(st.pruned, elapsed, st.processed, st.queue.len());
        let status = match (&st.found, &st.abort) {
            (Some(_), _) => BnbStatus::FeasiblePoint,
            (None, Some(_)) => BnbStatus::Budget,
            (None, None) if st.queue.is_empty() && st.in_flight == 0 => BnbStatus::ProvenInfeasible,
            _ => BnbStatus::Budget,
        };
        let pruned_fraction = if status == BnbStatus::ProvenInfeasible { 1.0 } else { st.pruned };
        Ok(BnbOutcome {
            status,
            residual: st.found.as_ref().map(|f| f.1),
            point: st.found.map(|f| f.0),
            regions_processed: st.processed,
            pruned_fraction,
            elapsed_secs: elapsed,
            estimate,
            max_depth: st.max_depth,
            max_queue: st.max_queue,
            solver_iterations: st.solver_iterations,
            cause: st.abort,
        })
    }

    fn worker(&self, shared: &Shared, observer: &Mutex<&mut dyn BnbObserver>) {
        let mut last_progress = Instant::now();
        loop {
            let (item, index) = {
                let mut st = shared.state.lock().expect("state lock poisoned");
                loop {
                    if st.done(self.cfg.max_regions) {
                        shared.wake.notify_all();
                        return;
                    }
                    if let Some(item) = st.queue.pop() {
                        st.queue_volume -= item.region.volume_fraction;
                        st.in_flight += 1;
                        st.in_flight_volume += item.region.volume_fraction;
                        st.started += 1;
                        let idx = st.started;
                        break (item, idx);
                    }
                    if st.in_flight == 0 {
                        shared.wake.notify_all();
                        return;
                    }
                    st = shared.wake.wait(st).expect("state lock poisoned");
                }
            };
            let dump = self.cfg.export_sdpa.as_ref().and_then(|d| {
                (d.every > 0 && (index - 1) % d.every == 0).then(|| d.dir.join(format!("region-{index:08}.dat-s")))
            });
            let mut solver = self.cfg.solver.clone();
            solver.max_iters = solver.max_iters.saturating_mul(1 << item.retries);
            let result = self.process(&item.region, &solver, dump);

            let mut st = shared.state.lock().expect("state lock poisoned");
            st.in_flight -= 1;
            st.in_flight_volume -= item.region.volume_fraction;
            match result {
                Ok(report) => {
                    st.processed += 1;
                    st.solver_iterations += report.solver_iterations;
                    observer.lock().expect("observer lock poisoned").region_done(&item.region, &report);
                    match report.verdict {
                        RegionVerdict::Pruned { .. } => st.pruned += item.region.volume_fraction,
                        RegionVerdict::Candidate { point, max_residual } => {
                            if st.found.is_none() {
                                st.found = Some((point, max_residual));
                            }
                        }
                        RegionVerdict::Branch { variable, point } => match item.region.split(variable, point) {
                            Ok((low, high)) => {
                                st.max_depth = st.max_depth.max(low.depth);
                                // the low child is popped first in lifo order
                                st.push(Item { region: high, priority: report.lambda, retries: 0 });
                                st.push(Item { region: low, priority: report.lambda, retries: 0 });
                            }
                            Err(e) => st.abort = Some(e.to_string()),
                        },
                    }
                }
                Err(e) if item.retries == 0 => {
                    let _ = e;
                    st.push(Item { retries: 1, ..item });
                }
                Err(e) => st.abort = Some(format!("region failed twice: {e}")),
            }
            if let Some(every) = self.cfg.progress_interval {
                if last_progress.elapsed() >= every {
                    last_progress = Instant::now();
                    let est = progress(st.pruned, shared.start.elapsed().as_secs_f64(), st.processed, st.queue.len());
                    observer.lock().expect("observer lock poisoned").progress(&est);
                }
            }
            shared.wake.notify_all();
        }
    }
}

struct Shared {
    state: Mutex<State>,
    wake: Condvar,
    start: Instant,
}

struct Item {
    region: Region,
    priority: f64,
    retries: u32,
}

impl PartialEq for Item {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Item {
    // max-heap on the negated priority: smallest λ first, deeper first on ties
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.priority.total_cmp(&self.priority).then(self.region.depth.cmp(&other.region.depth))
    }
}

enum Queue {
    Lifo(Vec<Item>),
    BestFirst(BinaryHeap<Item>),
}

impl Queue {
    fn pop(&mut self) -> Option<Item> {
        match self {
            Queue::Lifo(v) => v.pop(),
            Queue::BestFirst(h) => h.pop(),
        }
    }

    fn len(&self) -> usize {
        match self {
            Queue::Lifo(v) => v.len(),
            Queue::BestFirst(h) => h.len(),
        }
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct State {
    queue: Queue,
    queue_volume: f64,
    in_flight: usize,
    in_flight_volume: f64,
    pruned: f64,
    started: usize,
    processed: usize,
    solver_iterations: usize,
    max_depth: usize,
    max_queue: usize,
    found: Option<(Vec<f64>, f64)>,
    abort: Option<String>,
}

impl State {
    fn new(root: Region, discipline: QueueDiscipline) -> Self {
        let mut st = Self {
            queue: match discipline {
                QueueDiscipline::Lifo => Queue::Lifo(Vec::new()),
                QueueDiscipline::BestFirst => Queue::BestFirst(BinaryHeap::new()),
            },
            queue_volume: 0.0,
            in_flight: 0,
            in_flight_volume: 0.0,
            pruned: 0.0,
            started: 0,
            processed: 0,
            solver_iterations: 0,
            max_depth: 0,
            max_queue: 0,
            found: None,
            abort: None,
        };
        st.push(Item { region: root, priority: f64::NEG_INFINITY, retries: 0 });
        st
    }

    fn push(&mut self, item: Item) {
        self.queue_volume += item.region.volume_fraction;
        match &mut self.queue {
            Queue::Lifo(v) => v.push(item),
            Queue::BestFirst(h) => h.push(item),
        }
        self.max_queue = self.max_queue.max(self.queue.len());
    }

    fn done(&self, max_regions: usize) -> bool {
        self.found.is_some() || self.abort.is_some() || self.started >= max_regions
    }
}
