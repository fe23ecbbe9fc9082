//! Moment relaxations of the equation system over a region.
//!
//! Every monomial of degree at most `2·level` becomes a moment variable
//! (`x1*x2 → x12`), with the unit monomial pinned to 1. The moment matrix is
//! indexed by the basis monomials of degree at most `level`; the relaxation
//! asks for the smallest `λ` making `M + λI` positive semidefinite.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conic::{ConeSpec, ConicProgram, SparseMatrix};
use crate::error::{Error, Result};
use crate::linalg::{sym_eig_tridiagonal, DenseMatrix};
use crate::model::EquationSystem;
use crate::poly::{Monomial, Polynomial};
use crate::region::Region;

/// All monomials in `nvars` variables of degree `0..=max_degree`, in
/// degree-then-lex order.
pub fn monomials_up_to(nvars: usize, max_degree: u32) -> Vec<Monomial> {
    let mut out = vec![Monomial::unit()];
    let mut current: Vec<Vec<u32>> = vec![Vec::new()];
    for _ in 0..max_degree {
        let mut next = Vec::new();
        for seq in &current {
            let start = seq.last().copied().unwrap_or(0);
            for v in start..nvars as u32 {
                let mut s = seq.clone();
                s.push(v);
                next.push(s);
            }
        }
        out.extend(next.iter().map(|s| Monomial::from_vars(s)));
        current = next;
    }
    out
}

/// Basis monomials and moment-variable indices for one relaxation level.
#[derive(Clone, Debug)]
pub struct MomentLayout {
    pub level: u32,
    pub nvars: usize,
    pub basis: Vec<Monomial>,
    pub moments: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
}

impl MomentLayout {
    pub fn new(nvars: usize, level: u32) -> Result<Self> {
        if !(1..=2).contains(&level) {
            return Err(Error::Usage(format!("relaxation level {level} not in 1..=2")));
        }
        let moments = monomials_up_to(nvars, 2 * level);
        let index = moments.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        let basis = monomials_up_to(nvars, level);
        Ok(Self { level, nvars, basis, moments, index })
    }

    pub fn num_moments(&self) -> usize {
        self.moments.len()
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// Moment index of `x_i`.
    pub fn linear(&self, i: usize) -> usize {
        1 + i
    }

    /// Moment index of `x_i²`.
    pub fn square(&self, i: usize) -> usize {
        self.index[&Monomial::pow(i as u32, 2)]
    }

    /// Moment index of `x_i x_j`.
    pub fn product(&self, i: usize, j: usize) -> usize {
        self.index[&Monomial::var(i as u32).mul(&Monomial::var(j as u32))]
    }

    /// Every moment evaluated at a concrete point.
    pub fn moments_of_point(&self, x: &[f64]) -> Vec<f64> {
        self.moments.iter().map(|m| m.evaluate_unchecked(x)).collect()
    }
}

/// `Σ coeff·y_k + constant`, with the unit moment folded into the constant.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinearRow {
    pub fn evaluate(&self, y: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(k, c)| c * y[k]).sum::<f64>()
    }
}

pub fn linearize(p: &Polynomial, layout: &MomentLayout) -> Result<LinearRow> {
    let degree = p.degree();
    if degree > 2 * layout.level {
        return Err(Error::LevelTooHigh { degree, level: layout.level, max: 2 * layout.level });
    }
    let mut row = LinearRow::default();
    for (m, c) in p.sorted_terms() {
        if m.is_unit() {
            row.constant += c;
        } else {
            let k = layout.index_of(m).ok_or_else(|| {
                Error::InputShape(format!("monomial {m} uses a variable outside the layout"))
            })?;
            row.terms.push((k, c));
        }
    }
    Ok(row)
}

/// Symmetric matrix of moment indices: entry `(a, b)` is the index of
/// `basis[a]·basis[b]`.
pub fn moment_matrix(layout: &MomentLayout) -> Vec<Vec<usize>> {
    layout
        .basis
        .iter()
        .map(|a| layout.basis.iter().map(|b| layout.index[&a.mul(b)]).collect())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Symmetry,
    Box,
    Secant,
    McCormick,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelaxationOptions {
    /// At level 2, multiply each equality by every monomial that keeps the
    /// product within degree 4.
    pub products: bool,
    /// Bilinear envelope cuts for every `x_i x_j`, `i < j`.
    pub mccormick: bool,
    /// Relax every linear row by `λ` as well as the matrix, so the program
    /// is feasible for every region.
    pub elastic: bool,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        Self { products: true, mccormick: false, elastic: true }
    }
}

/// One region's relaxation: rows over the moment variables plus the matrix.
#[derive(Clone, Debug)]
pub struct RelaxedProblem {
    pub num_moments: usize,
    pub equalities: Arc<Vec<LinearRow>>,
    pub inequalities: Vec<LinearRow>,
    pub inequality_kinds: Vec<RowKind>,
    pub psd: Arc<Vec<Vec<usize>>>,
    pub lambda_lower: f64,
    pub elastic: bool,
}

/// Region-independent part of a relaxation, built once per system and level.
#[derive(Clone, Debug)]
pub struct Relaxation {
    pub layout: MomentLayout,
    pub options: RelaxationOptions,
    equalities: Arc<Vec<LinearRow>>,
    symmetry: Vec<LinearRow>,
    psd: Arc<Vec<Vec<usize>>>,
}

impl Relaxation {
    pub fn new(system: &EquationSystem, level: u32, options: RelaxationOptions) -> Result<Self> {
        let layout = MomentLayout::new(system.num_vars(), level)?;
        let mut equalities = Vec::new();
        for h in &system.equalities {
            let dh = h.degree();
            if dh > 2 * level {
                return Err(Error::LevelTooHigh { degree: dh, level, max: 2 * level });
            }
            if options.products && level >= 2 {
                for m in monomials_up_to(layout.nvars, 2 * level - dh) {
                    let shifted = Polynomial::from_terms(h.terms().map(|(t, c)| (t.mul(&m), c)));
                    equalities.push(linearize(&shifted, &layout)?);
                }
            } else {
                equalities.push(linearize(h, &layout)?);
            }
        }
        let symmetry = system.inequalities.iter().map(|q| linearize(q, &layout)).collect::<Result<_>>()?;
        let psd = Arc::new(moment_matrix(&layout));
        Ok(Self { layout, options, equalities: Arc::new(equalities), symmetry, psd })
    }

    pub fn num_equality_rows(&self) -> usize {
        self.equalities.len()
    }

    pub fn assemble(&self, region: &Region) -> Result<RelaxedProblem> {
        let l = &self.layout;
        if region.dim() != l.nvars {
            return Err(Error::InputShape(format!("region has {} variables, layout {}", region.dim(), l.nvars)));
        }
        let mut rows = Vec::new();
        let mut kinds = Vec::new();
        for r in &self.symmetry {
            rows.push(r.clone());
            kinds.push(RowKind::Symmetry);
        }
        for i in 0..l.nvars {
            let (lo, hi) = (region.lower[i], region.upper[i]);
            let xi = l.linear(i);
            rows.push(LinearRow { terms: vec![(xi, 1.0)], constant: -lo });
            rows.push(LinearRow { terms: vec![(xi, -1.0)], constant: hi });
            kinds.extend([RowKind::Box, RowKind::Box]);
            rows.push(LinearRow { terms: vec![(xi, lo + hi), (l.square(i), -1.0)], constant: -lo * hi });
            kinds.push(RowKind::Secant);
        }
        if self.options.mccormick {
            for i in 0..l.nvars {
                for j in i + 1..l.nvars {
                    let (li, ui, lj, uj) = (region.lower[i], region.upper[i], region.lower[j], region.upper[j]);
                    let (xi, xj, xij) = (l.linear(i), l.linear(j), l.product(i, j));
                    // (x_i - l_i)(x_j - l_j) >= 0 and the three siblings
                    for (a, b, sa, sb) in [(li, lj, 1.0, 1.0), (ui, uj, -1.0, -1.0), (li, uj, 1.0, -1.0), (ui, lj, -1.0, 1.0)] {
                        let s = sa * sb;
                        rows.push(LinearRow {
                            terms: vec![(xij, s), (xi, -s * b), (xj, -s * a)],
                            constant: s * a * b,
                        });
                        kinds.push(RowKind::McCormick);
                    }
                }
            }
        }
        Ok(RelaxedProblem {
            num_moments: l.num_moments(),
            equalities: Arc::clone(&self.equalities),
            inequalities: rows,
            inequality_kinds: kinds,
            psd: Arc::clone(&self.psd),
            lambda_lower: -(l.dim() as f64),
            elastic: self.options.elastic,
        })
    }
}

impl RelaxedProblem {
    pub fn dim(&self) -> usize {
        self.psd.len()
    }

    /// Variables are moments `1..num_moments` followed by `λ`. Rows: elastic
    /// or hard equalities, then inequalities, the `λ` bound, and the matrix
    /// block (upper triangle, column by column).
    pub fn to_conic(&self) -> ConicProgram {
        let nm = self.num_moments;
        let n = nm;
        let lam = nm - 1;
        let col = |k: usize| k - 1;
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut b = Vec::new();
        let mut zero = 0;
        let mut nonneg = 0;
        let push_ge = |row: &LinearRow, with_lambda: bool, trip: &mut Vec<_>, b: &mut Vec<f64>| {
            // row + λ >= 0  ⇔  -row·y - λ + s = constant, s >= 0
            let r = b.len();
            for &(k, c) in &row.terms {
                trip.push((r, col(k), -c));
            }
            if with_lambda {
                trip.push((r, lam, -1.0));
            }
            b.push(row.constant);
        };
        if self.elastic {
            for row in self.equalities.iter() {
                push_ge(row, true, &mut triplets, &mut b);
                let neg = LinearRow { terms: row.terms.iter().map(|&(k, c)| (k, -c)).collect(), constant: -row.constant };
                push_ge(&neg, true, &mut triplets, &mut b);
                nonneg += 2;
            }
        } else {
            for row in self.equalities.iter() {
                push_ge(row, false, &mut triplets, &mut b);
                zero += 1;
            }
        }
        for row in &self.inequalities {
            push_ge(row, self.elastic, &mut triplets, &mut b);
            nonneg += 1;
        }
        // λ >= lambda_lower
        let r = b.len();
        triplets.push((r, lam, -1.0));
        b.push(-self.lambda_lower);
        nonneg += 1;
        // M(y) + λI: s_ij = M_ij(y) + λ δ_ij
        let k = self.dim();
        for j in 0..k {
            for i in 0..=j {
                let r = b.len();
                let idx = self.psd[i][j];
                if idx == 0 {
                    b.push(1.0);
                } else {
                    triplets.push((r, col(idx), -1.0));
                    b.push(0.0);
                }
                if i == j {
                    triplets.push((r, lam, -1.0));
                }
            }
        }
        let m = b.len();
        let mut c = vec![0.0; n];
        c[lam] = 1.0;
        ConicProgram {
            n,
            c,
            a: SparseMatrix::from_triplets(m, n, triplets),
            b,
            cones: ConeSpec { zero, nonneg, psd: vec![k] },
        }
    }

    /// Smallest `λ` that makes the moments `y` feasible (entry 0 is the unit
    /// moment). Every `λ` attained this way bounds the optimum from above.
    /// Without elastic rows a violated row makes the value infinite.
    pub fn min_lambda(&self, y: &[f64]) -> Result<f64> {
        let mut need = self.lambda_lower;
        for row in self.equalities.iter() {
            let v = row.evaluate(y).abs();
            if self.elastic {
                need = need.max(v);
            } else if v > 0.0 {
                return Ok(f64::INFINITY);
            }
        }
        for row in &self.inequalities {
            let v = -row.evaluate(y);
            if self.elastic {
                need = need.max(v);
            } else if v > 0.0 {
                return Ok(f64::INFINITY);
            }
        }
        let k = self.dim();
        let m = DenseMatrix::from_fn(k, k, |i, j| y[self.psd[i][j]]);
        let eig = sym_eig_tridiagonal(&m)?;
        Ok(need.max(-eig.eigenvalues[0]))
    }

    /// Magnitude bound on each conic variable for a real point in `region`:
    /// products of per-variable maxima for moments, 0 for `λ`.
    pub fn variable_bounds(&self, layout: &MomentLayout, region: &Region) -> Vec<f64> {
        let mag: Vec<f64> = region.lower.iter().zip(&region.upper).map(|(l, u)| l.abs().max(u.abs())).collect();
        let mut out: Vec<f64> = layout.moments[1..]
            .iter()
            .map(|m| m.factors().iter().map(|&(v, e)| mag[v as usize].powi(e as i32)).product())
            .collect();
        out.push(0.0);
        out
    }
}

/// First-order moments, per-variable monomial errors and the branching
/// variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractedPoint {
    pub x: Vec<f64>,
    pub errors: Vec<f64>,
    pub max_error: f64,
    pub argmax: usize,
}

/// `moments` is indexed like the layout (entry 0 is the unit moment).
pub fn extract(moments: &[f64], layout: &MomentLayout) -> ExtractedPoint {
    let x: Vec<f64> = (0..layout.nvars).map(|i| moments[layout.linear(i)]).collect();
    let errors: Vec<f64> = (0..layout.nvars)
        .map(|i| {
            let e = moments[layout.square(i)] - x[i] * x[i];
            e * e
        })
        .collect();
    let (argmax, max_error) = errors
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    ExtractedPoint { x, errors, max_error: max_error.max(0.0), argmax }
}

/// Moments from a conic solution vector (moments `1..`, then `λ`).
pub fn moments_from_solution(solution: &[f64]) -> Vec<f64> {
    let mut y = Vec::with_capacity(solution.len());
    y.push(1.0);
    y.extend_from_slice(&solution[..solution.len() - 1]);
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_sizes() {
        let l1 = MomentLayout::new(18, 1).unwrap();
        assert_eq!(l1.dim(), 19);
        let l2 = MomentLayout::new(18, 2).unwrap();
        assert_eq!(l2.dim(), 1 + 18 + 18 * 19 / 2);
        assert_eq!(l2.num_moments(), 7315);
        assert!(MomentLayout::new(3, 3).is_err());
    }

    #[test]
    fn two_variable_matrices() {
        let l = MomentLayout::new(2, 1).unwrap();
        let m = moment_matrix(&l);
        let names: Vec<Vec<String>> =
            m.iter().map(|r| r.iter().map(|&k| l.moments[k].to_string()).collect()).collect();
        assert_eq!(names[0], ["1", "x0", "x1"]);
        assert_eq!(names[1], ["x0", "x0^2", "x0*x1"]);
        let l2 = MomentLayout::new(2, 2).unwrap();
        let m2 = moment_matrix(&l2);
        assert_eq!(m2.len(), 6);
        assert_eq!(l2.moments[m2[3][5]].to_string(), "x0^2*x1^2");
    }

    #[test]
    fn linearize_example() {
        let l = MomentLayout::new(2, 1).unwrap();
        let p = Polynomial::var(0) * Polynomial::var(1) + Polynomial::var(1) * Polynomial::var(1) + Polynomial::var(0);
        let row = linearize(&p, &l).unwrap();
        let y: Vec<f64> = (0..l.num_moments()).map(|k| k as f64 * 10.0).collect();
        let expect = y[l.product(0, 1)] + y[l.square(1)] + y[l.linear(0)];
        assert_eq!(row.evaluate(&y), expect);
        let cubic = Polynomial::var(0) * Polynomial::var(0) * Polynomial::var(0);
        assert!(matches!(linearize(&cubic, &l), Err(Error::LevelTooHigh { degree: 3, .. })));
        assert_eq!(linearize(&Polynomial::constant(1.0), &l).unwrap(), LinearRow { terms: vec![], constant: 1.0 });
    }

    #[test]
    fn extract_errors() {
        let l = MomentLayout::new(1, 1).unwrap();
        assert_eq!(extract(&[1.0, 0.0, 1.0], &l).max_error, 1.0);
        assert_eq!(extract(&[1.0, 0.5, 0.5], &l).errors[0], 0.0625);
        assert_eq!(extract(&[1.0, 0.5, 0.25], &l).max_error, 0.0);
    }
}
