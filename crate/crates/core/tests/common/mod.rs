//! Checks shared by the property suites and the acceptance run. Each returns
//! the measured error so callers can compare it with their own tolerance.
#![allow(dead_code)]

use musb::bnb::{BnbConfig, BnbObserver, BranchAndBound, RegionReport, RegionVerdict};
use musb::linalg::{lu_solve, psd_project, sym_eig, sym_eig_tridiagonal, DenseMatrix};
use musb::model::{build_problem, canonicalize, verify_candidate, EquationSystem, ProblemSpec};
use musb::poly::{CompiledPolynomial, Monomial, Polynomial};
use musb::region::Region;
use musb::relaxation::{MomentLayout, Relaxation, RelaxationOptions};
use musb::search::{build_objective, lift_objective, run, IntegrationVariable, LiftedObjective, SearchConfig, SearchStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random polynomial whose coefficients are multiples of 60, so integrating
/// by any variable of exponent at most 4 divides exactly.
pub fn divisible_polynomial(r: &mut impl Rng, nvars: u32, terms: usize) -> Polynomial {
    Polynomial::from_terms((0..terms).map(|_| {
        let m = Monomial::from_pairs((0..nvars).filter_map(|v| {
            let e = r.gen_range(0..=4u32);
            (e > 0).then_some((v, e))
        }));
        (m, 60.0 * r.gen_range(-20i32..=20) as f64)
    }))
}

/// `∂/∂v ∫ p dv == p` term for term.
pub fn roundtrip_exact(p: &Polynomial, v: u32) -> bool {
    let back = p.integrate(v).differentiate(v);
    back.len() == p.len() && p.terms().all(|(m, c)| back.coeff(m) == c)
}

/// Worst relative disagreement between the compiled gradient of the lifted
/// objective and central differences, over `points` random points.
pub fn gradient_vs_differences(system: &EquationSystem, points: usize, seed: u64) -> f64 {
    let f = build_objective(system);
    let (fv, _) = lift_objective(&f, IntegrationVariable::Aux, system.num_vars()).expect("lift");
    let lifted = LiftedObjective::new(&fv);
    let compiled = CompiledPolynomial::new(&fv);
    let mut bounds = system.registry.bounds();
    bounds.push((-1.0, 1.0));
    let mut r = rng(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let x: Vec<f64> = bounds.iter().map(|&(l, u)| r.gen_range(l..=u)).collect();
        let g = lifted.gradient(&x);
        let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let fd = (compiled.evaluate(&xp) - compiled.evaluate(&xm)) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / scale);
        }
    }
    worst
}

pub fn random_matrix(r: &mut impl Rng, n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0))
}

pub fn random_symmetric(r: &mut impl Rng, n: usize) -> DenseMatrix {
    random_matrix(r, n).symmetrized()
}

/// `‖A x − b‖∞` for the LU solution of a random system with a
/// dominant diagonal.
pub fn lu_multiply_back(r: &mut impl Rng, n: usize) -> f64 {
    let mut a = random_matrix(r, n);
    for i in 0..n {
        a[(i, i)] += n as f64;
    }
    let b: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
    let x = lu_solve(&a, &b, 0.0).expect("nonsingular");
    let ax = a.matvec(&x).expect("shapes");
    ax.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// Reconstruction error of both eigensolvers on a random symmetric matrix.
pub fn eigen_reconstruction(r: &mut impl Rng, n: usize) -> f64 {
    let a = random_symmetric(r, n);
    let e1 = sym_eig(&a).expect("jacobi").reconstruct().sub(&a).max_abs();
    let e2 = sym_eig_tridiagonal(&a).expect("ql").reconstruct().sub(&a).max_abs();
    e1.max(e2)
}

/// `‖P(P(A)) − P(A)‖max` for the PSD projection.
pub fn psd_idempotence(r: &mut impl Rng, n: usize) -> f64 {
    let a = random_symmetric(r, n);
    let p = psd_project(&a).expect("projection");
    psd_project(&p).expect("projection").sub(&p).max_abs()
}

/// Splits a random leaf `splits` times; returns `|Σ leaf volumes − 1|`.
pub fn volume_conservation(r: &mut impl Rng, dim: usize, splits: usize) -> f64 {
    let mut leaves = vec![Region::root(&vec![(-1.0, 1.0); dim])];
    for _ in 0..splits {
        let k = r.gen_range(0..leaves.len());
        let v = r.gen_range(0..dim);
        let (l, u) = (leaves[k].lower[v], leaves[k].upper[v]);
        let point = l + (u - l) * r.gen_range(0.01..0.99);
        if !(l < point && point < u) {
            continue;
        }
        let (a, b) = leaves[k].split(v, point).expect("interior split");
        leaves[k] = a;
        leaves.push(b);
    }
    (leaves.iter().map(|g| g.volume_fraction).sum::<f64>() - 1.0).abs()
}

/// For `samples` moment vectors built as random mixtures of point moments
/// plus noise, the level-1 value of the truncation never exceeds the level-2
/// value. Returns the largest `λ₁ − λ₂` seen (non-positive when contained).
pub fn containment_gap(system: &EquationSystem, samples: usize, seed: u64) -> f64 {
    let opts = RelaxationOptions::default();
    let r1 = Relaxation::new(system, 1, opts).expect("level 1");
    let r2 = Relaxation::new(system, 2, opts).expect("level 2");
    let region = musb::model::initial_region(system);
    let p1 = r1.assemble(&region).expect("assemble");
    let p2 = r2.assemble(&region).expect("assemble");
    let truncate: Vec<usize> = r1
        .layout
        .moments
        .iter()
        .map(|m| r2.layout.index_of(m).expect("level-1 moment in level-2 layout"))
        .collect();
    let mut r = rng(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let y2 = sample_moments(&r2.layout, &region, &mut r);
        let y1: Vec<f64> = truncate.iter().map(|&k| y2[k]).collect();
        let l1 = p1.min_lambda(&y1).expect("eig");
        let l2 = p2.min_lambda(&y2).expect("eig");
        worst = worst.max(l1 - l2);
    }
    worst
}

fn sample_moments(layout: &MomentLayout, region: &Region, r: &mut impl Rng) -> Vec<f64> {
    let k = r.gen_range(1..=4);
    let weights: Vec<f64> = (0..k).map(|_| r.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut y = vec![0.0; layout.num_moments()];
    for w in weights {
        let x: Vec<f64> = (0..region.dim()).map(|i| r.gen_range(region.lower[i]..=region.upper[i])).collect();
        for (yi, mi) in y.iter_mut().zip(layout.moments_of_point(&x)) {
            *yi += w / total * mi;
        }
    }
    for v in y.iter_mut().skip(1) {
        *v += r.gen_range(-0.05..0.05);
    }
    y
}

/// Collects every region the search pruned.
#[derive(Default)]
pub struct PrunedRegions(pub Vec<Region>);

impl BnbObserver for PrunedRegions {
    fn region_done(&mut self, region: &Region, report: &RegionReport) {
        if matches!(report.verdict, RegionVerdict::Pruned { .. }) {
            self.0.push(region.clone());
        }
    }
}

/// Explores `max_regions` regions of a feasible profile without stopping at
/// candidates, then checks `starts` Newton solutions (in canonical form)
/// against every pruned region. Returns (solutions, pruned regions,
/// solutions found inside a pruned region).
pub fn soundness(spec: &ProblemSpec, max_regions: usize, starts: u64) -> (usize, usize, usize) {
    let system = build_problem(spec).expect("spec");
    let cfg = BnbConfig { max_regions, polish_iters: 0, residual_tol: 0.0, ..Default::default() };
    let bnb = BranchAndBound::new(&system, cfg).expect("config");
    let mut pruned = PrunedRegions::default();
    bnb.run(&mut pruned).expect("run");
    let mut solutions = Vec::new();
    for seed in 0..starts {
        let out = run(&system, &SearchConfig { seed, max_iters: 2000, ..Default::default() }).expect("search");
        if out.status != SearchStatus::Converged {
            continue;
        }
        let x = canonicalize(&system, &out.point).expect("canonical form");
        let c = verify_candidate(&system, &x).expect("verify");
        if c.max_residual <= 1e-6 && c.min_inequality() >= -1e-9 {
            solutions.push(x);
        }
    }
    let inside = solutions.iter().filter(|x| pruned.0.iter().any(|g| g.contains(x))).count();
    (solutions.len(), pruned.0.len(), inside)
}

/// Smallest `Σ h²` on a grid with `points` values per axis, endpoints
/// included.
pub fn grid_minimum(system: &EquationSystem, points: usize) -> f64 {
    let f = CompiledPolynomial::new(&build_objective(system));
    let axes: Vec<Vec<f64>> = system
        .registry
        .bounds()
        .into_iter()
        .map(|(l, u)| (0..points).map(|k| l + (u - l) * k as f64 / (points - 1) as f64).collect())
        .collect();
    let n = axes.len();
    let mut idx = vec![0usize; n];
    let mut x: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut best = f64::INFINITY;
    loop {
        best = best.min(f.evaluate(&x));
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            idx[k] += 1;
            if idx[k] < points {
                x[k] = axes[k][idx[k]];
                break;
            }
            idx[k] = 0;
            x[k] = axes[k][0];
            k += 1;
        }
    }
}
