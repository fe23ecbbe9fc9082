//! Newton search for stationary points of the integrated squared-sum
//! objective.
//!
//! With `f = Σ h_k²`, the lifted objective `f_v = ∫ f dx_v` has
//! `∂f_v/∂x_v = f`, so every stationary point of `f_v` is a zero of `f`.
//! The iteration solves `(H + δI) p = g` and steps `x ← x − αp`.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lu_solve_in_place, DenseMatrix};
use crate::model::EquationSystem;
use crate::poly::{CompiledPolynomial, Polynomial};

/// Variable the objective is integrated by.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegrationVariable {
    /// A fresh variable appended after the registry, started at 0.1.
    #[default]
    Aux,
    Index(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub alpha: f64,
    pub max_iters: usize,
    /// Threshold on the unlifted objective `Σ h_k²`.
    pub tol: f64,
    /// Every equality must also be below this before a run counts as converged.
    pub residual_tol: f64,
    pub damping: f64,
    pub seed: u64,
    pub starts: usize,
    pub threads: usize,
    pub integration_variable: IntegrationVariable,
    pub record_trace: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            max_iters: 100_000,
            tol: 1e-13,
            residual_tol: 1e-7,
            damping: 1e-10,
            seed: 0,
            starts: 1,
            threads: 1,
            integration_variable: IntegrationVariable::Aux,
            record_trace: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Usage(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if !(self.tol > 0.0) || !(self.residual_tol > 0.0) {
            return Err(Error::Usage("tolerances must be positive".into()));
        }
        if self.damping < 0.0 {
            return Err(Error::Usage("damping must be non-negative".into()));
        }
        if self.starts == 0 {
            return Err(Error::Usage("starts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Converged,
    IterationLimit,
    NumericalFailure,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub status: SearchStatus,
    /// Registry variables only; an auxiliary integration variable is dropped.
    pub point: Vec<f64>,
    pub combined_value: f64,
    pub max_equation_residual: f64,
    pub iterations: usize,
    pub seed: u64,
    pub trace: Option<Vec<f64>>,
}

/// `Σ h_k²` over the equalities. Inequalities play no part here.
pub fn build_objective(system: &EquationSystem) -> Polynomial {
    let mut f = Polynomial::zero().with_nvars(system.num_vars());
    for h in &system.equalities {
        f.add_assign_scaled(&h.square(), 1.0);
    }
    f
}

/// Integrates `f` by the chosen variable. Returns the lifted polynomial and
/// the index of the integration variable; with [`IntegrationVariable::Aux`]
/// the new index is `nvars`.
pub fn lift_objective(f: &Polynomial, v: IntegrationVariable, nvars: usize) -> Result<(Polynomial, usize)> {
    let idx = match v {
        IntegrationVariable::Aux => nvars,
        IntegrationVariable::Index(i) if i < nvars => i,
        IntegrationVariable::Index(i) => {
            return Err(Error::Usage(format!("integration variable {i} out of range (have {nvars})")))
        }
    };
    let total = nvars.max(idx + 1);
    Ok((f.integrate(idx as u32).with_nvars(total), idx))
}

/// Compiled gradient and upper-triangle Hessian of a lifted objective.
pub struct LiftedObjective {
    n: usize,
    grad: Vec<CompiledPolynomial>,
    hess: Vec<(usize, usize, CompiledPolynomial)>,
}

impl LiftedObjective {
    pub fn new(fv: &Polynomial) -> Self {
        let n = fv.nvars();
        let grad_poly = fv.gradient();
        let mut hess = Vec::new();
        for (i, gi) in grad_poly.iter().enumerate() {
            let used: BTreeSet<u32> = gi.terms().flat_map(|(m, _)| m.vars()).collect();
            for j in used.into_iter().map(|j| j as usize).filter(|&j| j >= i) {
                let hij = gi.differentiate(j as u32);
                if !hij.is_zero() {
                    hess.push((i, j, CompiledPolynomial::new(&hij)));
                }
            }
        }
        Self { n, grad: grad_poly.iter().map(CompiledPolynomial::new).collect(), hess }
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.grad.iter().map(|g| g.evaluate(x)).collect()
    }

    pub fn hessian(&self, x: &[f64]) -> DenseMatrix {
        let mut h = DenseMatrix::zeros(self.n, self.n);
        let data = h.data_mut();
        for (i, j, p) in &self.hess {
            let v = p.evaluate(x);
            data[i * self.n + j] = v;
            data[j * self.n + i] = v;
        }
        h
    }

    /// One damped Newton step from `x`.
    pub fn step(&self, x: &[f64], alpha: f64, damping: f64) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::InputShape(format!("point has {} entries, objective has {}", x.len(), self.n)));
        }
        let mut p = self.gradient(x);
        let mut h = self.hessian(x);
        lu_solve_in_place(&mut h, &mut p, damping)?;
        Ok(x.iter().zip(&p).map(|(xi, pi)| xi - alpha * pi).collect())
    }
}

/// Convenience wrapper compiling `fv` for a single step.
pub fn newton_step(fv: &Polynomial, x: &[f64], cfg: &SearchConfig) -> Result<Vec<f64>> {
    LiftedObjective::new(fv).step(x, cfg.alpha, cfg.damping)
}

/// Compiled objective, equalities and bounds for repeated searches over one
/// system.
pub struct NewtonSolver {
    lifted: LiftedObjective,
    equalities: Vec<CompiledPolynomial>,
    bounds: Vec<(f64, f64)>,
    integration_index: usize,
    aux: bool,
}

impl NewtonSolver {
    pub fn new(system: &EquationSystem, cfg: &SearchConfig) -> Result<Self> {
        let nvars = system.num_vars();
        let f = build_objective(system);
        let (fv, idx) = lift_objective(&f, cfg.integration_variable, nvars)?;
        Ok(Self {
            lifted: LiftedObjective::new(&fv),
            equalities: system.equalities.iter().map(CompiledPolynomial::new).collect(),
            bounds: system.registry.bounds(),
            integration_index: idx,
            aux: idx == nvars,
        })
    }

    fn residuals(&self, x: &[f64]) -> (f64, f64) {
        self.equalities.iter().fold((0.0, 0.0), |(sum, max), h| {
            let r = h.evaluate(x);
            (sum + r * r, f64::max(max, r.abs()))
        })
    }

    fn run_one(&self, cfg: &SearchConfig, seed: u64) -> SearchOutcome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0: Vec<f64> = self.bounds.iter().map(|&(l, u)| rng.gen_range(l..=u)).collect();
        self.run_from(&x0, cfg, seed)
    }

    /// Iterates from `x0` (registry variables; an auxiliary variable starts
    /// at 0.1).
    pub fn run_from(&self, x0: &[f64], cfg: &SearchConfig, seed: u64) -> SearchOutcome {
        let mut x = x0.to_vec();
        if self.aux {
            x.push(0.1);
        }
        let nreg = self.bounds.len();
        let mut trace = cfg.record_trace.then(Vec::new);
        let mut singular_streak = 0;
        let finish = |status, x: &[f64], f: f64, r: f64, it, trace| SearchOutcome {
            status,
            point: x[..nreg].to_vec(),
            combined_value: f,
            max_equation_residual: r,
            iterations: it,
            seed,
            trace,
        };
        for it in 0..cfg.max_iters {
            let (f, r) = self.residuals(&x);
            if let Some(t) = trace.as_mut() {
                t.push(f);
            }
            if !f.is_finite() {
                return finish(SearchStatus::NumericalFailure, &x, f, r, it, trace);
            }
            if f <= cfg.tol && r <= cfg.residual_tol {
                return finish(SearchStatus::Converged, &x, f, r, it, trace);
            }
            match self.lifted.step(&x, cfg.alpha, cfg.damping) {
                Ok(next) => {
                    singular_streak = 0;
                    x = next;
                }
                Err(Error::Singular { .. }) => {
                    singular_streak += 1;
                    if singular_streak >= 3 {
                        return finish(SearchStatus::NumericalFailure, &x, f, r, it, trace);
                    }
                }
                Err(_) => return finish(SearchStatus::NumericalFailure, &x, f, r, it, trace),
            }
        }
        let (f, r) = self.residuals(&x);
        let status = if f <= cfg.tol && r <= cfg.residual_tol {
            SearchStatus::Converged
        } else {
            SearchStatus::IterationLimit
        };
        finish(status, &x, f, r, cfg.max_iters, trace)
    }
}

/// Runs `cfg.starts` independent searches with seeds `seed, seed+1, …` and
/// returns the one with the smallest combined value.
pub fn run(system: &EquationSystem, cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let prepared = NewtonSolver::new(system, cfg)?;
    debug_assert!(prepared.integration_index < prepared.lifted.nvars());
    let seeds: Vec<u64> = (0..cfg.starts as u64).map(|k| cfg.seed.wrapping_add(k)).collect();
    let threads = cfg.threads.clamp(1, seeds.len());
    let outcomes: Vec<SearchOutcome> = if threads == 1 {
        seeds.iter().map(|&s| prepared.run_one(cfg, s)).collect()
    } else {
        let chunks: Vec<Vec<u64>> = (0..threads)
            .map(|t| seeds.iter().copied().skip(t).step_by(threads).collect())
            .collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .iter()
                .map(|chunk| {
                    let prepared = &prepared;
                    scope.spawn(move || chunk.iter().map(|&s| prepared.run_one(cfg, s)).collect::<Vec<_>>())
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("search worker panicked")).collect()
        })
    };
    outcomes
        .into_iter()
        .min_by(|a, b| rank(a).cmp(&rank(b)).then(a.combined_value.total_cmp(&b.combined_value)).then(a.seed.cmp(&b.seed)))
        .ok_or_else(|| Error::Logic("no search starts ran".into()))
}

fn rank(o: &SearchOutcome) -> u8 {
    match o.status {
        SearchStatus::Converged => 0,
        SearchStatus::IterationLimit => 1,
        SearchStatus::NumericalFailure => 2,
    }
}
