//! Symmetry-reduced real polynomial systems for mutually unbiased sub-bases.
//!
//! Set 1 is fixed to the first `s1` computational basis vectors and the first
//! vector of set 2 to the uniform vector. Every other ("free") vector has its
//! first element pinned to `1/sqrt(d)` and carries the real and imaginary
//! parts of elements `2..=d` as variables. Each pair of free vectors in
//! different sets also gets two circle variables `(c, d)` for their inner
//! product.
//!
//! Indices in this module are zero-based: set 0 is the computational set,
//! element 0 is the pinned element.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::region::Region;

/// Which symmetry-breaking inequality families to emit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryFlags {
    pub vector_swap: bool,
    pub set_swap: bool,
    pub conjugation: bool,
}

impl Default for SymmetryFlags {
    fn default() -> Self {
        Self { vector_swap: true, set_swap: true, conjugation: true }
    }
}

impl SymmetryFlags {
    pub fn none() -> Self {
        Self { vector_swap: false, set_swap: false, conjugation: false }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionLevel {
    /// Only the closed-form count of the unreduced formulation is available.
    None,
    #[default]
    Full,
}

/// Dimension, size profile and reduction options.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub d: usize,
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub symmetry: SymmetryFlags,
    #[serde(default)]
    pub reduction: ReductionLevel,
}

impl ProblemSpec {
    pub fn new(d: usize, sizes: &[usize]) -> Self {
        Self {
            d,
            sizes: sizes.to_vec(),
            symmetry: SymmetryFlags::default(),
            reduction: ReductionLevel::Full,
        }
    }

    /// `n` complete bases in dimension `d`.
    pub fn full_bases(d: usize, n: usize) -> Self {
        Self::new(d, &vec![d; n])
    }

    pub fn with_symmetry(mut self, flags: SymmetryFlags) -> Self {
        self.symmetry = flags;
        self
    }

    pub fn n(&self) -> usize {
        self.sizes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidSpec(format!("dimension {} < 2", self.d)));
        }
        if self.sizes.len() < 2 {
            return Err(Error::InvalidSpec(format!("need at least 2 sets, got {}", self.sizes.len())));
        }
        if let Some(&s) = self.sizes.iter().find(|&&s| s == 0 || s > self.d) {
            return Err(Error::InvalidSpec(format!("set size {s} outside 1..={}", self.d)));
        }
        if self.sizes.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidSpec(format!("sizes {:?} are not non-increasing", self.sizes)));
        }
        Ok(())
    }

    /// Sizes rendered the way tables show them, e.g. `{2,1,1,1,1}`.
    pub fn profile_label(&self) -> String {
        let inner: Vec<String> = self.sizes.iter().map(ToString::to_string).collect();
        format!("{{{}}}", inner.join(","))
    }

    /// Free vectors per set: none in set 0, all but the uniform vector in
    /// set 1, every vector afterwards.
    fn free_per_set(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .enumerate()
            .map(|(i, &s)| match i {
                0 => 0,
                1 => s - 1,
                _ => s,
            })
            .collect()
    }
}

/// A vector that carries variables, addressed by (set, index within set).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FreeVector {
    pub set: usize,
    pub vec: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarKind {
    Re { set: usize, vec: usize, elem: usize },
    Im { set: usize, vec: usize, elem: usize },
    UnbiasRe { pair: usize },
    UnbiasIm { pair: usize },
}

impl VarKind {
    pub fn is_imaginary(&self) -> bool {
        matches!(self, VarKind::Im { .. } | VarKind::UnbiasIm { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableDescriptor {
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

/// Ordered variable descriptors plus the index maps the builder needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableRegistry {
    pub d: usize,
    pub vars: Vec<VariableDescriptor>,
    pub free: Vec<FreeVector>,
    /// Cross-set pairs of free vectors, as indices into `free`.
    pub pairs: Vec<(usize, usize)>,
}

impl VariableRegistry {
    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.vars.iter().map(|v| (v.lower, v.upper)).collect()
    }

    /// Index of Re(element `elem`) of free vector `f`; `elem` in `1..d`.
    pub fn re(&self, f: usize, elem: usize) -> usize {
        2 * (self.d - 1) * f + 2 * (elem - 1)
    }

    pub fn im(&self, f: usize, elem: usize) -> usize {
        self.re(f, elem) + 1
    }

    pub fn unbias_re(&self, pair: usize) -> usize {
        2 * (self.d - 1) * self.free.len() + 2 * pair
    }

    pub fn unbias_im(&self, pair: usize) -> usize {
        self.unbias_re(pair) + 1
    }

    pub fn free_index(&self, set: usize, vec: usize) -> Option<usize> {
        self.free.iter().position(|f| f.set == set && f.vec == vec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationKind {
    Norm,
    ElementMagnitude,
    OrthogonalRe,
    OrthogonalIm,
    /// One of the two linear scalars of (uniform ⊥ free) in set 2.
    UniformOrthogonal,
    UniformUnbiased,
    UnbiasedRe,
    UnbiasedIm,
    Circle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityFamily {
    Conjugation,
    VectorSwap,
    SetSwap,
}

/// Equalities `p = 0` and inequalities `q >= 0` over the registry variables.
#[derive(Clone, Debug)]
pub struct EquationSystem {
    pub spec: ProblemSpec,
    pub registry: VariableRegistry,
    pub equalities: Vec<Polynomial>,
    pub equality_kinds: Vec<EquationKind>,
    pub inequalities: Vec<Polynomial>,
    pub inequality_families: Vec<InequalityFamily>,
    pub reported_equalities: usize,
}

impl EquationSystem {
    pub fn num_vars(&self) -> usize {
        self.registry.len()
    }

    pub fn counts(&self) -> CountProfile {
        CountProfile {
            variables: self.num_vars(),
            reported_equalities: self.reported_equalities,
            inequalities: self.inequalities.len(),
        }
    }
}

/// Table-style counts for a size profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountProfile {
    pub variables: usize,
    pub reported_equalities: usize,
    pub inequalities: usize,
}

fn inv_sqrt_d(d: usize) -> f64 {
    1.0 / (d as f64).sqrt()
}

/// Bound on |Re| and |Im| of element `elem` (zero-based, `>= 1`).
fn coordinate_bound(d: usize, s1: usize, elem: usize) -> f64 {
    if elem < s1 {
        inv_sqrt_d(d)
    } else {
        // Elements 0..s1 each carry 1/d of the unit norm.
        (((d - s1) as f64) / d as f64).sqrt()
    }
}

fn build_registry(spec: &ProblemSpec) -> VariableRegistry {
    let d = spec.d;
    let s1 = spec.sizes[0];
    let free: Vec<FreeVector> = spec
        .free_per_set()
        .iter()
        .enumerate()
        .flat_map(|(set, &nf)| {
            let first = spec.sizes[set] - nf;
            (first..spec.sizes[set]).map(move |vec| FreeVector { set, vec })
        })
        .collect();
    let mut vars = Vec::new();
    for f in &free {
        for elem in 1..d {
            let b = coordinate_bound(d, s1, elem);
            let (set, vec) = (f.set, f.vec);
            vars.push(VariableDescriptor { kind: VarKind::Re { set, vec, elem }, lower: -b, upper: b });
            vars.push(VariableDescriptor { kind: VarKind::Im { set, vec, elem }, lower: -b, upper: b });
        }
    }
    let mut pairs = Vec::new();
    for a in 0..free.len() {
        for b in a + 1..free.len() {
            if free[a].set != free[b].set {
                pairs.push((a, b));
            }
        }
    }
    let r = inv_sqrt_d(d);
    for pair in 0..pairs.len() {
        vars.push(VariableDescriptor { kind: VarKind::UnbiasRe { pair }, lower: -r, upper: r });
        vars.push(VariableDescriptor { kind: VarKind::UnbiasIm { pair }, lower: -r, upper: r });
    }
    VariableRegistry { d, vars, free, pairs }
}

fn var(i: usize) -> Polynomial {
    Polynomial::var(i as u32)
}

/// Real and imaginary parts of ⟨u|v⟩ for two free vectors, including the
/// pinned first elements.
fn inner_product(reg: &VariableRegistry, u: usize, v: usize) -> (Polynomial, Polynomial) {
    let d = reg.d;
    let mut re = Polynomial::constant(1.0 / d as f64);
    let mut im = Polynomial::zero();
    for m in 1..d {
        let (a, b) = (var(reg.re(u, m)), var(reg.im(u, m)));
        let (a2, b2) = (var(reg.re(v, m)), var(reg.im(v, m)));
        re = re + &a * &a2 + &b * &b2;
        im = im + &a * &b2 - &b * &a2;
    }
    (re, im)
}

/// Σ_{m≥1} Re and Σ_{m≥1} Im of a free vector.
fn element_sums(reg: &VariableRegistry, f: usize) -> (Polynomial, Polynomial) {
    let mut re = Polynomial::zero();
    let mut im = Polynomial::zero();
    for m in 1..reg.d {
        re = re + var(reg.re(f, m));
        im = im + var(reg.im(f, m));
    }
    (re, im)
}

fn component_sum(reg: &VariableRegistry, f: usize) -> Polynomial {
    let (re, im) = element_sums(reg, f);
    re + im
}

/// Builds the reduced equation system for `spec`.
pub fn build_problem(spec: &ProblemSpec) -> Result<EquationSystem> {
    spec.validate()?;
    if spec.reduction == ReductionLevel::None {
        return Err(Error::InvalidSpec(
            "the unreduced formulation is only available as a count".into(),
        ));
    }
    let d = spec.d;
    let df = d as f64;
    let s1 = spec.sizes[0];
    let reg = build_registry(spec);
    let nv = reg.len();
    let mut eqs: Vec<(Polynomial, EquationKind)> = Vec::new();
    let mut reported = 0;
    let sq = |i: usize| &var(i) * &var(i);

    if s1 < d {
        for f in 0..reg.free.len() {
            let mut p = Polynomial::constant(-(1.0 - 1.0 / df));
            for m in 1..d {
                p = p + sq(reg.re(f, m)) + sq(reg.im(f, m));
            }
            eqs.push((p, EquationKind::Norm));
            reported += 1;
        }
    }
    for f in 0..reg.free.len() {
        for k in 1..s1 {
            let p = Polynomial::constant(-1.0 / df) + sq(reg.re(f, k)) + sq(reg.im(f, k));
            eqs.push((p, EquationKind::ElementMagnitude));
            reported += 1;
        }
    }
    for set in 1..spec.n() {
        let members: Vec<Option<usize>> =
            (0..spec.sizes[set]).map(|vec| reg.free_index(set, vec)).collect();
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                match (members[a], members[b]) {
                    (None, Some(v)) => {
                        // ⟨uniform|v⟩ = 0 splits into two linear scalars.
                        let (re, im) = element_sums(&reg, v);
                        eqs.push((re + Polynomial::constant(inv_sqrt_d(d)), EquationKind::UniformOrthogonal));
                        eqs.push((im, EquationKind::UniformOrthogonal));
                        reported += 1;
                    }
                    (Some(u), Some(v)) => {
                        let (re, im) = inner_product(&reg, u, v);
                        eqs.push((re, EquationKind::OrthogonalRe));
                        eqs.push((im, EquationKind::OrthogonalIm));
                        reported += 2;
                    }
                    _ => unreachable!("only the first vector of set 2 is fixed"),
                }
            }
        }
    }
    for (f, fv) in reg.free.iter().enumerate() {
        if fv.set >= 2 {
            let (re, im) = element_sums(&reg, f);
            let re = re + Polynomial::constant(inv_sqrt_d(d));
            let p = re.square() + im.square() - Polynomial::constant(1.0);
            eqs.push((p, EquationKind::UniformUnbiased));
            reported += 1;
        }
    }
    for (t, &(u, v)) in reg.pairs.iter().enumerate() {
        let (re, im) = inner_product(&reg, u, v);
        let (c, dd) = (reg.unbias_re(t), reg.unbias_im(t));
        eqs.push((re - var(c), EquationKind::UnbiasedRe));
        eqs.push((im - var(dd), EquationKind::UnbiasedIm));
        eqs.push((sq(c) + sq(dd) - Polynomial::constant(1.0 / df), EquationKind::Circle));
        reported += 3;
    }

    let mut ineqs: Vec<(Polynomial, InequalityFamily)> = Vec::new();
    if spec.symmetry.conjugation && !reg.free.is_empty() {
        let mut p = Polynomial::zero();
        for f in 0..reg.free.len() {
            p = p + element_sums(&reg, f).1;
        }
        ineqs.push((p, InequalityFamily::Conjugation));
    }
    if spec.symmetry.vector_swap {
        for set in 1..spec.n() {
            let members: Vec<usize> =
                (0..spec.sizes[set]).filter_map(|vec| reg.free_index(set, vec)).collect();
            for w in members.windows(2) {
                ineqs.push((component_sum(&reg, w[0]) - component_sum(&reg, w[1]), InequalityFamily::VectorSwap));
            }
        }
    }
    if spec.symmetry.set_swap {
        let set_sum = |set: usize| {
            (0..spec.sizes[set])
                .filter_map(|vec| reg.free_index(set, vec))
                .fold(Polynomial::zero(), |acc, f| acc + component_sum(&reg, f))
        };
        for set in 2..spec.n().saturating_sub(1) {
            if spec.sizes[set] == spec.sizes[set + 1] {
                ineqs.push((set_sum(set) - set_sum(set + 1), InequalityFamily::SetSwap));
            }
        }
    }

    let (equalities, equality_kinds): (Vec<_>, Vec<_>) =
        eqs.into_iter().map(|(p, k)| (p.with_nvars(nv), k)).unzip();
    let (inequalities, inequality_families): (Vec<_>, Vec<_>) =
        ineqs.into_iter().map(|(p, k)| (p.with_nvars(nv), k)).unzip();
    Ok(EquationSystem {
        spec: spec.clone(),
        registry: reg,
        equalities,
        equality_kinds,
        inequalities,
        inequality_families,
        reported_equalities: reported,
    })
}

/// Closed-form counts matching [`build_problem`] without building anything.
pub fn count_profile(spec: &ProblemSpec) -> Result<CountProfile> {
    spec.validate()?;
    let d = spec.d;
    if spec.reduction == ReductionLevel::None {
        return Ok(CountProfile {
            variables: unreduced_count(d, spec.n())?,
            reported_equalities: 0,
            inequalities: 0,
        });
    }
    let s1 = spec.sizes[0];
    let per_set = spec.free_per_set();
    let free: usize = per_set.iter().sum();
    let mut pairs = 0;
    for i in 0..per_set.len() {
        for j in i + 1..per_set.len() {
            pairs += per_set[i] * per_set[j];
        }
    }
    let choose2 = |k: usize| k * k.saturating_sub(1) / 2;
    let mut eqns = 0;
    if s1 < d {
        eqns += free;
    }
    eqns += (s1 - 1) * free;
    // set 2: one reported equation per (uniform, free) pair
    eqns += per_set[1] + 2 * choose2(per_set[1]);
    for &f in &per_set[2..] {
        eqns += 2 * choose2(f);
        eqns += f;
    }
    eqns += 3 * pairs;

    let sym = spec.symmetry;
    let mut ineqs = 0;
    if sym.conjugation && free > 0 {
        ineqs += 1;
    }
    if sym.vector_swap {
        ineqs += per_set.iter().map(|&f| f.saturating_sub(1)).sum::<usize>();
    }
    if sym.set_swap {
        ineqs += (2..spec.n().saturating_sub(1)).filter(|&i| spec.sizes[i] == spec.sizes[i + 1]).count();
    }
    Ok(CountProfile {
        variables: 2 * (d - 1) * free + 2 * pairs,
        reported_equalities: eqns,
        inequalities: ineqs,
    })
}

/// Variables of the unreduced formulation: `n d² + d² n (n-1) / 2`.
pub fn unreduced_count(d: usize, n: usize) -> Result<usize> {
    if d < 2 || n < 2 {
        return Err(Error::InvalidSpec(format!("unreduced count needs d >= 2 and n >= 2, got d={d}, n={n}")));
    }
    Ok(n * d * d + d * d * n * (n - 1) / 2)
}

/// Residuals of a candidate assignment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CandidateSolution {
    pub assignment: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Σ residual², the squared-sum objective.
    pub combined: f64,
    /// `(inequality index, value)` for every inequality below zero.
    pub violated_inequalities: Vec<(usize, f64)>,
}

impl CandidateSolution {
    pub fn min_inequality(&self) -> f64 {
        self.violated_inequalities.iter().map(|v| v.1).fold(0.0, f64::min)
    }
}

pub fn verify_candidate(system: &EquationSystem, assignment: &[f64]) -> Result<CandidateSolution> {
    if assignment.len() != system.num_vars() {
        return Err(Error::InputShape(format!(
            "assignment has {} entries, system has {} variables",
            assignment.len(),
            system.num_vars()
        )));
    }
    let residuals: Vec<f64> =
        system.equalities.iter().map(|p| p.evaluate_unchecked(assignment)).collect();
    let max_residual = residuals.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
    let combined = residuals.iter().map(|r| r * r).sum();
    let violated_inequalities = system
        .inequalities
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p.evaluate_unchecked(assignment)))
        .filter(|&(_, v)| v < 0.0)
        .collect();
    Ok(CandidateSolution {
        assignment: assignment.to_vec(),
        residuals,
        max_residual,
        combined,
        violated_inequalities,
    })
}

/// The registry box, volume fraction 1.
pub fn initial_region(system: &EquationSystem) -> Region {
    Region::root(&system.registry.bounds())
}

/// Complex vectors for every set, fixed ones included.
pub type VectorSets = Vec<Vec<Vec<Complex64>>>;

/// Rebuilds all vectors of the MUSB from a reduced assignment.
pub fn reconstruct_vectors(system: &EquationSystem, x: &[f64]) -> Result<VectorSets> {
    if x.len() != system.num_vars() {
        return Err(Error::InputShape(format!("assignment length {} != {}", x.len(), system.num_vars())));
    }
    let spec = &system.spec;
    let reg = &system.registry;
    let d = spec.d;
    let r = inv_sqrt_d(d);
    let mut sets: VectorSets = Vec::with_capacity(spec.n());
    for (set, &size) in spec.sizes.iter().enumerate() {
        let mut vecs = Vec::with_capacity(size);
        for vec in 0..size {
            let v: Vec<Complex64> = if set == 0 {
                (0..d).map(|m| Complex64::new(if m == vec { 1.0 } else { 0.0 }, 0.0)).collect()
            } else if let Some(f) = reg.free_index(set, vec) {
                std::iter::once(Complex64::new(r, 0.0))
                    .chain((1..d).map(|m| Complex64::new(x[reg.re(f, m)], x[reg.im(f, m)])))
                    .collect()
            } else {
                vec![Complex64::new(r, 0.0); d]
            };
            vecs.push(v);
        }
        sets.push(vecs);
    }
    Ok(sets)
}

/// Inverse of [`reconstruct_vectors`] for vectors already in reduced form
/// (first element `1/sqrt(d)`); circle variables are recomputed from the
/// inner products.
pub fn assignment_from_vectors(system: &EquationSystem, sets: &VectorSets) -> Result<Vec<f64>> {
    let reg = &system.registry;
    let mut x = vec![0.0; reg.len()];
    for (f, fv) in reg.free.iter().enumerate() {
        let v = sets
            .get(fv.set)
            .and_then(|s| s.get(fv.vec))
            .ok_or_else(|| Error::InputShape(format!("missing vector ({}, {})", fv.set, fv.vec)))?;
        if v.len() != reg.d {
            return Err(Error::InputShape(format!("vector of length {} in dimension {}", v.len(), reg.d)));
        }
        for m in 1..reg.d {
            x[reg.re(f, m)] = v[m].re;
            x[reg.im(f, m)] = v[m].im;
        }
    }
    for (t, &(u, v)) in reg.pairs.iter().enumerate() {
        let (fu, fv) = (reg.free[u], reg.free[v]);
        let ip = inner(&sets[fu.set][fu.vec], &sets[fv.set][fv.vec]);
        x[reg.unbias_re(t)] = ip.re;
        x[reg.unbias_im(t)] = ip.im;
    }
    Ok(x)
}

/// ⟨u|v⟩ = Σ conj(u_m) v_m.
pub fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Largest deviation of any pairwise inner-product magnitude from its target:
/// 1 for a vector with itself, 0 within a set, `1/sqrt(d)` across sets.
pub fn reconstruction_error(system: &EquationSystem, x: &[f64]) -> Result<f64> {
    let sets = reconstruct_vectors(system, x)?;
    let r = inv_sqrt_d(system.spec.d);
    let mut worst: f64 = 0.0;
    let flat: Vec<(usize, &Vec<Complex64>)> =
        sets.iter().enumerate().flat_map(|(i, s)| s.iter().map(move |v| (i, v))).collect();
    for (a, (sa, u)) in flat.iter().enumerate() {
        for (b, (sb, v)) in flat.iter().enumerate().skip(a) {
            let target = if a == b {
                1.0
            } else if sa == sb {
                0.0
            } else {
                r
            };
            worst = worst.max((inner(u, v).norm() - target).abs());
        }
    }
    Ok(worst)
}

/// Negates every imaginary variable (vector parts and circle variables).
pub fn conjugate_assignment(system: &EquationSystem, x: &[f64]) -> Vec<f64> {
    system
        .registry
        .vars
        .iter()
        .zip(x)
        .map(|(v, &xi)| if v.kind.is_imaginary() { -xi } else { xi })
        .collect()
}

/// Maps a solution onto the representative selected by the symmetry
/// inequalities: conjugate if the imaginary sum is negative, then order
/// equal-size sets from set 3 and the free vectors inside each set by
/// decreasing component sum.
pub fn canonicalize(system: &EquationSystem, x: &[f64]) -> Result<Vec<f64>> {
    let spec = &system.spec;
    let mut sets = reconstruct_vectors(system, x)?;
    let imag_sum: f64 = sets[1..].iter().flatten().flat_map(|v| v[1..].iter()).map(|c| c.im).sum();
    let uniform_first = |set: usize| usize::from(set == 1);
    if imag_sum < 0.0 {
        for v in sets.iter_mut().flatten() {
            for c in v.iter_mut() {
                *c = c.conj();
            }
        }
    }
    let vec_sum = |v: &Vec<Complex64>| v[1..].iter().map(|c| c.re + c.im).sum::<f64>();
    let mut start = 2;
    while start < spec.n() {
        let mut end = start + 1;
        while end < spec.n() && spec.sizes[end] == spec.sizes[start] {
            end += 1;
        }
        sets[start..end].sort_by(|a, b| {
            let sa: f64 = a.iter().map(vec_sum).sum();
            let sb: f64 = b.iter().map(vec_sum).sum();
            sb.total_cmp(&sa)
        });
        start = end;
    }
    for (set, vecs) in sets.iter_mut().enumerate().skip(1) {
        vecs[uniform_first(set)..].sort_by(|a, b| vec_sum(b).total_cmp(&vec_sum(a)));
    }
    assignment_from_vectors(system, &sets)
}

/// Writes the system in the line-oriented text format read by
/// [`parse_system_text`].
pub fn system_to_text(system: &EquationSystem) -> String {
    let spec = &system.spec;
    let mut s = String::new();
    let sizes: Vec<String> = spec.sizes.iter().map(ToString::to_string).collect();
    let _ = writeln!(s, "musb-system 1");
    let _ = writeln!(s, "dim {}", spec.d);
    let _ = writeln!(s, "sizes {}", sizes.join(" "));
    let _ = writeln!(s, "reported_equalities {}", system.reported_equalities);
    let _ = writeln!(s, "variables {}", system.num_vars());
    for (i, v) in system.registry.vars.iter().enumerate() {
        let kind = match v.kind {
            VarKind::Re { set, vec, elem } => format!("re {} {} {}", set + 1, vec + 1, elem + 1),
            VarKind::Im { set, vec, elem } => format!("im {} {} {}", set + 1, vec + 1, elem + 1),
            VarKind::UnbiasRe { pair } => format!("c {}", pair + 1),
            VarKind::UnbiasIm { pair } => format!("d {}", pair + 1),
        };
        let _ = writeln!(s, "var {i} {:?} {:?} {kind}", v.lower, v.upper);
    }
    let _ = writeln!(s, "equalities {}", system.equalities.len());
    for (p, k) in system.equalities.iter().zip(&system.equality_kinds) {
        let _ = writeln!(s, "eq {} {}", serde_json::to_string(k).unwrap_or_default().trim_matches('"'), p.len());
        s.push_str(&p.to_text());
    }
    let _ = writeln!(s, "inequalities {}", system.inequalities.len());
    for (p, k) in system.inequalities.iter().zip(&system.inequality_families) {
        let _ = writeln!(s, "ineq {} {}", serde_json::to_string(k).unwrap_or_default().trim_matches('"'), p.len());
        s.push_str(&p.to_text());
    }
    s
}

/// Reads the header of a system file and rebuilds it, checking that the
/// stored polynomials match what the builder produces.
pub fn parse_system_text(text: &str) -> Result<EquationSystem> {
    let mut d = None;
    let mut sizes = None;
    let mut lines = text.lines().enumerate().peekable();
    let mut stored_eqs: Vec<Polynomial> = Vec::new();
    let mut stored_ineqs: Vec<Polynomial> = Vec::new();
    while let Some((k, line)) = lines.next() {
        let mut tok = line.split_whitespace();
        let bad = |msg: &str| Error::Parse { line: k + 1, msg: msg.to_string() };
        match tok.next() {
            Some("dim") => d = Some(tok.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad dim"))?),
            Some("sizes") => {
                sizes = Some(tok.map(|t| t.parse()).collect::<std::result::Result<Vec<usize>, _>>().map_err(|_| bad("bad sizes"))?)
            }
            Some(tag @ ("eq" | "ineq")) => {
                let count: usize = tok.nth(1).and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad term count"))?;
                let mut body = String::new();
                for _ in 0..count {
                    let (_, l) = lines.next().ok_or_else(|| bad("truncated polynomial"))?;
                    body.push_str(l);
                    body.push('\n');
                }
                let p = Polynomial::from_text(&body)?;
                if tag == "eq" {
                    stored_eqs.push(p);
                } else {
                    stored_ineqs.push(p);
                }
            }
            _ => {}
        }
    }
    let d = d.ok_or(Error::Parse { line: 0, msg: "missing dim".into() })?;
    let sizes = sizes.ok_or(Error::Parse { line: 0, msg: "missing sizes".into() })?;
    let mut system = build_problem(&ProblemSpec::new(d, &sizes))?;
    let nv = system.num_vars();
    system.equalities = stored_eqs.into_iter().map(|p| p.with_nvars(nv)).collect();
    system.inequalities = stored_ineqs.into_iter().map(|p| p.with_nvars(nv)).collect();
    if system.equalities.len() != system.equality_kinds.len()
        || system.inequalities.len() != system.inequality_families.len()
    {
        return Err(Error::Parse { line: 0, msg: "equation counts do not match the size profile".into() });
    }
    Ok(system)
}

/// The three mutually unbiased bases of dimension 2, in the reduced
/// coordinates of `{2,2,2}`.
pub fn qubit_mub_triple() -> (EquationSystem, Vec<f64>) {
    let system = build_problem(&ProblemSpec::new(2, &[2, 2, 2])).expect("valid spec");
    let r = inv_sqrt_d(2);
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let sets: VectorSets = vec![
        vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]],
        vec![vec![c(r, 0.0), c(r, 0.0)], vec![c(r, 0.0), c(-r, 0.0)]],
        vec![vec![c(r, 0.0), c(0.0, r)], vec![c(r, 0.0), c(0.0, -r)]],
    ];
    let x = assignment_from_vectors(&system, &sets).expect("shapes match");
    (system, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(d: usize, sizes: &[usize]) -> (usize, usize) {
        let c = count_profile(&ProblemSpec::new(d, sizes)).unwrap();
        (c.variables, c.reported_equalities)
    }

    #[test]
    fn table_rows() {
        assert_eq!(counts(3, &[2, 1, 1, 1, 1]), (18, 18));
        assert_eq!(counts(6, &[3, 3, 3, 3]), (122, 109));
        assert_eq!(counts(2, &[1, 1]), (0, 0));
        assert_eq!(counts(6, &[6, 6, 6]), (170, 206));
        assert_eq!(counts(6, &[4, 4, 3, 3]), (144, 144));
        assert_eq!(counts(5, &[1, 1, 1, 1, 1, 1, 1]), (60, 40));
    }

    #[test]
    fn builder_agrees_with_closed_form() {
        for (d, sizes) in [(3, vec![2, 1, 1, 1, 1]), (3, vec![3, 3, 3, 3]), (2, vec![1, 1]), (4, vec![4, 2, 1, 1, 1, 1])] {
            let spec = ProblemSpec::new(d, &sizes);
            let sys = build_problem(&spec).unwrap();
            assert_eq!(sys.counts(), count_profile(&spec).unwrap(), "{d} {sizes:?}");
        }
    }

    #[test]
    fn degrees_are_bounded() {
        let sys = build_problem(&ProblemSpec::new(3, &[3, 3, 3, 3])).unwrap();
        assert!(sys.equalities.iter().all(|p| p.degree() <= 2));
        assert!(sys.inequalities.iter().all(|p| p.degree() <= 1));
    }

    #[test]
    fn unreduced_table() {
        assert_eq!(unreduced_count(6, 4).unwrap(), 360);
        assert_eq!(unreduced_count(2, 2).unwrap(), 12);
        assert_eq!(unreduced_count(5, 7).unwrap(), 700);
        assert!(unreduced_count(1, 3).is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(build_problem(&ProblemSpec::new(1, &[1, 1])).is_err());
        assert!(build_problem(&ProblemSpec::new(3, &[1, 2])).is_err());
        assert!(build_problem(&ProblemSpec::new(3, &[4, 1])).is_err());
        assert!(build_problem(&ProblemSpec::new(3, &[3])).is_err());
        let mut s = ProblemSpec::new(3, &[3, 3]);
        s.reduction = ReductionLevel::None;
        assert!(build_problem(&s).is_err());
        assert_eq!(count_profile(&s).unwrap().variables, unreduced_count(3, 2).unwrap());
    }

    #[test]
    fn qubit_triple_is_a_solution() {
        let (sys, x) = qubit_mub_triple();
        let c = verify_candidate(&sys, &x).unwrap();
        assert!(c.max_residual <= 1e-12, "{}", c.max_residual);
        assert!(reconstruction_error(&sys, &x).unwrap() <= 1e-12);
    }

    #[test]
    fn zero_assignment_norm_residual() {
        let sys = build_problem(&ProblemSpec::new(3, &[2, 1, 1, 1, 1])).unwrap();
        let c = verify_candidate(&sys, &vec![0.0; 18]).unwrap();
        assert_eq!(sys.equality_kinds[0], EquationKind::Norm);
        assert!((c.residuals[0].abs() - (1.0 - 1.0 / 3.0)).abs() < 1e-15);
        assert!(verify_candidate(&sys, &[0.0; 3]).is_err());
    }

    #[test]
    fn initial_region_bounds() {
        let sys = build_problem(&ProblemSpec::new(2, &[2, 1, 1, 1])).unwrap();
        let r = initial_region(&sys);
        assert_eq!(r.dim(), 6);
        let b = 1.0 / 2f64.sqrt();
        assert!(r.lower.iter().all(|&l| l == -b) && r.upper.iter().all(|&u| u == b));
        assert_eq!(r.volume_fraction, 1.0);
    }

    #[test]
    fn system_text_round_trip() {
        let sys = build_problem(&ProblemSpec::new(3, &[2, 1, 1, 1, 1])).unwrap();
        let text = system_to_text(&sys);
        assert_eq!(text, system_to_text(&build_problem(&sys.spec).unwrap()));
        let back = parse_system_text(&text).unwrap();
        assert_eq!(back.equalities, sys.equalities);
        assert_eq!(back.inequalities, sys.inequalities);
    }
}
