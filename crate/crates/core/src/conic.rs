//! Operator-splitting solver for linear-conic programs
//!
//! ```text
//! minimize cᵀx  subject to  Ax + s = b,  s ∈ {0}^z × R₊^p × PSD(k₁) × …
//! ```
//!
//! PSD slack blocks hold the upper triangle of a symmetric matrix, column by
//! column, as plain matrix entries. Internally the off-diagonal rows are
//! scaled by √2 so the Euclidean projection in packed form is the matrix
//! projection.
//!
//! The iteration is ADMM on the quasi-definite KKT system
//! `[σI Aᵀ; A −ρ⁻¹I]`, factored once by sparse LDLᵀ after an AMD ordering
//! and refactored only when the step parameter ρ is rebalanced.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{project_from_eig, sym_eig_tridiagonal, DenseMatrix};

/// Compressed sparse column matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Duplicates are summed; exact zeros are dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut col_ptr = vec![0; cols + 1];
        let mut row_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                row_idx.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..cols {
            col_ptr[c + 1] += col_ptr[c];
        }
        let mut m = Self { rows, cols, col_ptr, row_idx, values };
        m.drop_zeros();
        m
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut t = Vec::with_capacity(self.nnz());
        for c in 0..self.cols {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                if self.values[k] != 0.0 {
                    t.push((self.row_idx[k], c, self.values[k]));
                }
            }
        }
        *self = Self::from_triplets(self.rows, self.cols, t);
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.cols).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (self.row_idx[k], c, self.values[k]))
        })
    }

    /// `out = A x`.
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..self.cols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                out[self.row_idx[k]] += self.values[k] * xc;
            }
        }
    }

    /// `out = Aᵀ y`.
    pub fn tmul_vec(&self, y: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = (self.col_ptr[c]..self.col_ptr[c + 1]).map(|k| self.values[k] * y[self.row_idx[k]]).sum();
        }
    }
}

/// Sizes of the slack cones, in row order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub zero: usize,
    pub nonneg: usize,
    /// Matrix orders of the PSD blocks.
    pub psd: Vec<usize>,
}

impl ConeSpec {
    pub fn rows(&self) -> usize {
        self.zero + self.nonneg + self.psd.iter().map(|k| k * (k + 1) / 2).sum::<usize>()
    }

    /// Row offset of each PSD block.
    fn psd_offsets(&self) -> Vec<usize> {
        let mut off = self.zero + self.nonneg;
        self.psd
            .iter()
            .map(|k| {
                let o = off;
                off += k * (k + 1) / 2;
                o
            })
            .collect()
    }

    /// Whether packed row `r` of a block is an off-diagonal entry.
    fn off_diagonal_flags(k: usize) -> Vec<bool> {
        (0..k).flat_map(|j| (0..=j).map(move |i| i != j)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub n: usize,
    pub c: Vec<f64>,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub cones: ConeSpec,
}

impl ConicProgram {
    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.cones.rows();
        if self.c.len() != self.n || self.a.cols != self.n || self.a.rows != m || self.b.len() != m {
            return Err(Error::InputShape(format!(
                "conic program: n={} c={} A={}x{} b={} cone rows={m}",
                self.n,
                self.c.len(),
                self.a.rows,
                self.a.cols,
                self.b.len()
            )));
        }
        Ok(())
    }

    /// SHA-256 over the program data, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for v in [self.n, self.m(), self.cones.zero, self.cones.nonneg] {
            h.update((v as u64).to_le_bytes());
        }
        for &k in &self.cones.psd {
            h.update((k as u64).to_le_bytes());
        }
        for v in self.c.iter().chain(&self.b) {
            h.update(v.to_bits().to_le_bytes());
        }
        for (r, c, v) in self.a.triplets() {
            h.update((r as u64).to_le_bytes());
            h.update((c as u64).to_le_bytes());
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Projection onto the dual cone, for a vector in the row space of this
    /// program (PSD entries paired with slack entries as `Σ_{i≤j} w_ij s_ij`).
    pub fn project_dual_cone(&self, w: &mut [f64]) -> Result<()> {
        let z = self.cones.zero;
        for v in &mut w[z..z + self.cones.nonneg] {
            *v = v.max(0.0);
        }
        for (&k, off) in self.cones.psd.iter().zip(self.cones.psd_offsets()) {
            // ⟨W, S⟩ = Σ_{i≤j} w_ij s_ij when W keeps w on the diagonal and
            // halves it off the diagonal.
            let block = &mut w[off..off + k * (k + 1) / 2];
            let mut mat = DenseMatrix::zeros(k, k);
            let mut r = 0;
            for j in 0..k {
                for i in 0..=j {
                    let v = if i == j { block[r] } else { block[r] / 2.0 };
                    mat[(i, j)] = v;
                    mat[(j, i)] = v;
                    r += 1;
                }
            }
            let proj = project_from_eig(&mat, &sym_eig_tridiagonal(&mat)?);
            let mut r = 0;
            for j in 0..k {
                for i in 0..=j {
                    block[r] = if i == j { proj[(i, j)] } else { 2.0 * proj[(i, j)] };
                    r += 1;
                }
            }
        }
        Ok(())
    }

    /// Lower bound on `cᵀx` over every feasible `x` with `|x_j| ≤ bounds[j]`,
    /// from any dual estimate `w`: with `w` projected onto the dual cone and
    /// `r = c + Aᵀw`, `cᵀx ≥ −bᵀw − Σ |r_j| bounds_j`.
    pub fn dual_lower_bound(&self, w: &[f64], bounds: &[f64]) -> Result<f64> {
        let mut w = w.to_vec();
        self.project_dual_cone(&mut w)?;
        let mut r = vec![0.0; self.n];
        self.a.tmul_vec(&w, &mut r);
        let slack: f64 = r.iter().zip(&self.c).zip(bounds).map(|((ri, ci), bj)| (ri + ci).abs() * bj).sum();
        let bw: f64 = self.b.iter().zip(&w).map(|(b, w)| b * w).sum();
        Ok(-bw - slack)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    NumericalTrouble,
    /// Stopped early by the caller's monitor.
    Stopped,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    /// Multipliers with `c = Aᵀy`; `−y` lies in the dual cone.
    pub y: Vec<f64>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iters: usize,
    pub rho: f64,
    pub sigma: f64,
    pub relaxation: f64,
    pub adaptive_rho: bool,
    pub check_interval: usize,
    pub ruiz_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_primal: 1e-8,
            tol_dual: 1e-8,
            max_iters: 200_000,
            rho: 0.1,
            sigma: 1e-6,
            relaxation: 1.6,
            adaptive_rho: true,
            check_interval: 25,
            ruiz_iters: 15,
        }
    }
}

/// Original-scale iterate handed to a monitor.
pub struct Iterate<'a> {
    pub iteration: usize,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Quasi-definite LDLᵀ factorization of `[σI Aᵀ; A −diag(ρ)⁻¹]`.
struct KktFactor {
    n: usize,
    dim: usize,
    perm: Vec<usize>,
    pinv: Vec<usize>,
    a_p: Vec<usize>,
    a_i: Vec<usize>,
    a_x: Vec<f64>,
    /// Positions in `a_x` of the `−1/ρ_i` diagonal entries.
    rho_slots: Vec<usize>,
    l_p: Vec<usize>,
    l_i: Vec<usize>,
    l_x: Vec<f64>,
    d: Vec<f64>,
    d_inv: Vec<f64>,
    l_nz: Vec<usize>,
    etree: Vec<Option<usize>>,
    work: Vec<f64>,
}

impl KktFactor {
    fn new(a: &SparseMatrix, sigma: f64, rho: &[f64]) -> Result<Self> {
        let (n, m) = (a.cols, a.rows);
        let dim = n + m;
        // Upper triangle, original numbering: (j, j) = σ, (j, n+i) = A_ij,
        // (n+i, n+i) = −1/ρ_i. Tag -1 marks σ, -2-i marks ρ_i.
        let mut entries: Vec<(usize, usize, f64, isize)> = Vec::with_capacity(dim + a.nnz());
        for j in 0..n {
            entries.push((j, j, sigma, -1));
        }
        for (i, j, v) in a.triplets() {
            entries.push((j, n + i, v, 0));
        }
        for (i, &r) in rho.iter().enumerate() {
            entries.push((n + i, n + i, -1.0 / r, -2 - i as isize));
        }
        let (ap, ai) = csc_pattern(dim, entries.iter().map(|e| (e.0, e.1)));
        let (perm, pinv, _) = amd::order::<usize>(dim, &ap, &ai, &amd::Control::default())
            .map_err(|s| Error::NumericalTrouble(format!("AMD ordering failed: {s:?}")))?;
        let mut permuted: Vec<(usize, usize, f64, isize)> = entries
            .into_iter()
            .map(|(r, c, v, tag)| {
                let (pr, pc) = (pinv[r], pinv[c]);
                (pr.min(pc), pr.max(pc), v, tag)
            })
            .collect();
        permuted.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut a_p = vec![0; dim + 1];
        let mut a_i = Vec::with_capacity(permuted.len());
        let mut a_x = Vec::with_capacity(permuted.len());
        let mut rho_slots = vec![0; m];
        for (k, &(r, c, v, tag)) in permuted.iter().enumerate() {
            a_p[c + 1] += 1;
            a_i.push(r);
            a_x.push(v);
            if tag <= -2 {
                rho_slots[(-2 - tag) as usize] = k;
            }
        }
        for c in 0..dim {
            a_p[c + 1] += a_p[c];
        }
        let mut l_nz = vec![0; dim];
        let mut etree = vec![None; dim];
        let mut iwork = vec![0usize; dim];
        let total = ldl::etree(dim, &a_p, &a_i, &mut iwork, &mut l_nz, &mut etree)
            .map_err(|e| Error::NumericalTrouble(format!("KKT elimination tree failed ({e})")))?;
        let mut f = Self {
            n,
            dim,
            perm,
            pinv,
            a_p,
            a_i,
            a_x,
            rho_slots,
            l_p: vec![0; dim + 1],
            l_i: vec![0; total],
            l_x: vec![0.0; total],
            d: vec![0.0; dim],
            d_inv: vec![0.0; dim],
            l_nz,
            etree,
            work: vec![0.0; dim],
        };
        f.factor()?;
        Ok(f)
    }

    fn factor(&mut self) -> Result<()> {
        let dim = self.dim;
        let mut bwork = vec![ldl::Marker::Unused; dim];
        let mut iwork = vec![0usize; 3 * dim];
        let mut fwork = vec![0.0; dim];
        let positives = ldl::factor(
            dim,
            &self.a_p,
            &self.a_i,
            &self.a_x,
            &mut self.l_p,
            &mut self.l_i,
            &mut self.l_x,
            &mut self.d,
            &mut self.d_inv,
            &self.l_nz,
            &self.etree,
            &mut bwork,
            &mut iwork,
            &mut fwork,
        )
        .map_err(|_| Error::NumericalTrouble("KKT factorization hit a zero pivot".into()))?;
        if positives != self.n {
            return Err(Error::NumericalTrouble(format!(
                "KKT matrix not quasi-definite ({positives} positive pivots, expected {})",
                self.n
            )));
        }
        Ok(())
    }

    fn update_rho(&mut self, rho: &[f64]) -> Result<()> {
        for (&slot, &r) in self.rho_slots.iter().zip(rho) {
            self.a_x[slot] = -1.0 / r;
        }
        self.factor()
    }

    /// Solves in place; `rhs` is in original numbering.
    fn solve(&mut self, rhs: &mut [f64]) {
        for (k, &p) in self.perm.iter().enumerate() {
            self.work[k] = rhs[p];
        }
        ldl::solve(self.dim, &self.l_p, &self.l_i, &self.l_x, &self.d_inv, &mut self.work);
        for (i, r) in rhs.iter_mut().enumerate() {
            *r = self.work[self.pinv[i]];
        }
    }
}

fn csc_pattern(dim: usize, entries: impl Iterator<Item = (usize, usize)>) -> (Vec<usize>, Vec<usize>) {
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); dim];
    for (r, c) in entries {
        cols[c].push(r);
    }
    let mut ap = vec![0];
    let mut ai = Vec::new();
    for mut col in cols {
        col.sort_unstable();
        col.dedup();
        ai.extend(col);
        ap.push(ai.len());
    }
    (ap, ai)
}

/// Packed PSD block projection with √2-scaled off-diagonal entries.
fn project_psd_packed(v: &mut [f64], k: usize, mat: &mut DenseMatrix) -> Result<()> {
    let s2 = std::f64::consts::SQRT_2;
    let mut r = 0;
    for j in 0..k {
        for i in 0..=j {
            let x = if i == j { v[r] } else { v[r] / s2 };
            mat[(i, j)] = x;
            mat[(j, i)] = x;
            r += 1;
        }
    }
    let eig = sym_eig_tridiagonal(mat)?;
    if eig.eigenvalues.first().is_some_and(|&l| l >= 0.0) {
        return Ok(());
    }
    let p = project_from_eig(mat, &eig);
    let mut r = 0;
    for j in 0..k {
        for i in 0..=j {
            v[r] = if i == j { p[(i, j)] } else { p[(i, j)] * s2 };
            r += 1;
        }
    }
    Ok(())
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// Scaled copy of a program: `Â = E A D`, `b̂ = E b`, `ĉ = γ D c`, with the
/// √2 packing of PSD rows folded into `E`.
struct Scaled {
    a: SparseMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
    gamma: f64,
}

fn scale_program(p: &ConicProgram, iters: usize) -> Scaled {
    let (n, m) = (p.n, p.m());
    let mut e = vec![1.0; m];
    for (&k, off) in p.cones.psd.iter().zip(p.cones.psd_offsets()) {
        for (r, off_diag) in ConeSpec::off_diagonal_flags(k).into_iter().enumerate() {
            if off_diag {
                e[off + r] = std::f64::consts::SQRT_2;
            }
        }
    }
    let mut d = vec![1.0; n];
    let mut a = p.a.clone();
    let apply = |a: &mut SparseMatrix, d: &[f64], e: &[f64], base: &SparseMatrix| {
        for c in 0..a.cols {
            for k in a.col_ptr[c]..a.col_ptr[c + 1] {
                a.values[k] = base.values[k] * e[a.row_idx[k]] * d[c];
            }
        }
    };
    apply(&mut a, &d, &e, &p.a);
    let blocks: Vec<(usize, usize)> =
        p.cones.psd.iter().zip(p.cones.psd_offsets()).map(|(&k, off)| (off, off + k * (k + 1) / 2)).collect();
    let clamp = |v: f64| if v > 0.0 { (1.0 / v.sqrt()).clamp(1e-4, 1e4) } else { 1.0 };
    for _ in 0..iters {
        let mut row_max = vec![0.0f64; m];
        let mut col_max = vec![0.0f64; n];
        for (r, c, v) in a.triplets() {
            row_max[r] = row_max[r].max(v.abs());
            col_max[c] = col_max[c].max(v.abs());
        }
        for &(lo, hi) in &blocks {
            let mx = row_max[lo..hi].iter().fold(0.0f64, |a, &b| a.max(b));
            row_max[lo..hi].iter_mut().for_each(|v| *v = mx);
        }
        for (ej, rm) in e.iter_mut().zip(&row_max) {
            *ej *= clamp(*rm);
        }
        for (dj, cm) in d.iter_mut().zip(&col_max) {
            *dj *= clamp(*cm);
        }
        apply(&mut a, &d, &e, &p.a);
    }
    let b: Vec<f64> = p.b.iter().zip(&e).map(|(b, e)| b * e).collect();
    let dc: Vec<f64> = p.c.iter().zip(&d).map(|(c, d)| c * d).collect();
    let gamma = 1.0 / norm_inf(&dc).max(1e-6);
    let c = dc.iter().map(|v| v * gamma).collect();
    Scaled { a, b, c, d, e, gamma }
}

/// Solves `p`. The monitor, if given, sees the original-scale iterate every
/// `check_interval` iterations and stops the solve by returning `true`.
pub fn solve(
    p: &ConicProgram,
    opts: &SolveOptions,
    mut monitor: Option<&mut dyn FnMut(&Iterate) -> bool>,
) -> Result<SolveResult> {
    p.validate()?;
    let (n, m) = (p.n, p.m());
    let sc = scale_program(p, opts.ruiz_iters);
    let z = p.cones.zero;
    let rho_for = |base: f64| -> Vec<f64> { (0..m).map(|i| if i < z { base * 1e3 } else { base }).collect() };
    let mut rho_base = opts.rho;
    let mut rho = rho_for(rho_base);
    let mut kkt = KktFactor::new(&sc.a, opts.sigma, &rho)?;
    let psd_blocks: Vec<(usize, usize)> = p.cones.psd.iter().copied().zip(p.cones.psd_offsets()).collect();
    let mut mats: Vec<DenseMatrix> = p.cones.psd.iter().map(|&k| DenseMatrix::zeros(k, k)).collect();

    let (mut x, mut s, mut y) = (vec![0.0; n], vec![0.0; m], vec![0.0; m]);
    let mut rhs = vec![0.0; n + m];
    let mut ax = vec![0.0; m];
    let mut aty = vec![0.0; n];
    let alpha = opts.relaxation;
    let interval = opts.check_interval.max(1);
    let mut window_residual: Option<f64> = None;
    let mut status = SolveStatus::MaxIters;
    let mut iterations = opts.max_iters;

    // original-scale quantities for reporting
    let unscale = |x: &[f64], s: &[f64], y: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            x.iter().zip(&sc.d).map(|(v, d)| v * d).collect(),
            s.iter().zip(&sc.e).map(|(v, e)| v / e).collect(),
            y.iter().zip(&sc.e).map(|(v, e)| v * e / sc.gamma).collect(),
        )
    };
    let residuals = |xo: &[f64], so: &[f64], yo: &[f64]| -> (f64, f64, f64, f64) {
        let mut axo = vec![0.0; m];
        p.a.mul_vec(xo, &mut axo);
        let rp = axo.iter().zip(so).zip(&p.b).map(|((a, s), b)| a + s - b).fold(0.0f64, |mx, v| mx.max(v.abs()));
        let mut atyo = vec![0.0; n];
        p.a.tmul_vec(yo, &mut atyo);
        let rd = p.c.iter().zip(&atyo).map(|(c, a)| c - a).fold(0.0f64, |mx, v| mx.max(v.abs()));
        let pobj: f64 = p.c.iter().zip(xo).map(|(c, x)| c * x).sum();
        let dobj: f64 = p.b.iter().zip(yo).map(|(b, y)| b * y).sum();
        let p_scale = 1.0 + norm_inf(&axo).max(norm_inf(so)).max(norm_inf(&p.b));
        let d_scale = 1.0 + norm_inf(&atyo).max(norm_inf(&p.c));
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        (rp / p_scale, rd / d_scale, gap, pobj)
    };

    for it in 0..opts.max_iters {
        for j in 0..n {
            rhs[j] = opts.sigma * x[j] - sc.c[j];
        }
        for i in 0..m {
            rhs[n + i] = sc.b[i] - s[i] + y[i] / rho[i];
        }
        kkt.solve(&mut rhs);
        for j in 0..n {
            x[j] = alpha * rhs[j] + (1.0 - alpha) * x[j];
        }
        // s̃ = s − (ν + y)/ρ, relaxed, then shifted by y/ρ for the projection
        let mut v = vec![0.0; m];
        for i in 0..m {
            let s_tilde = s[i] - (rhs[n + i] + y[i]) / rho[i];
            let s_relax = alpha * s_tilde + (1.0 - alpha) * s[i];
            v[i] = s_relax;
            s[i] = s_relax + y[i] / rho[i];
        }
        s[..z].iter_mut().for_each(|x| *x = 0.0);
        s[z..z + p.cones.nonneg].iter_mut().for_each(|x| *x = x.max(0.0));
        for (bi, &(k, off)) in psd_blocks.iter().enumerate() {
            project_psd_packed(&mut s[off..off + k * (k + 1) / 2], k, &mut mats[bi])?;
        }
        for i in 0..m {
            y[i] += rho[i] * (v[i] - s[i]);
        }

        if (it + 1) % interval != 0 && it + 1 != opts.max_iters {
            continue;
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            status = SolveStatus::NumericalTrouble;
            iterations = it + 1;
            break;
        }
        let (xo, so, yo) = unscale(&x, &s, &y);
        let (rp, rd, gap, _) = residuals(&xo, &so, &yo);
        if rp <= opts.tol_primal && rd <= opts.tol_dual && gap <= opts.tol_primal.max(opts.tol_dual) {
            status = SolveStatus::Optimal;
            iterations = it + 1;
            break;
        }
        if let Some(mon) = monitor.as_mut() {
            let view = Iterate { iteration: it + 1, x: &xo, y: &yo, primal_residual: rp, dual_residual: rd };
            if mon(&view) {
                status = SolveStatus::Stopped;
                iterations = it + 1;
                break;
            }
        }
        if (it + 1) % 1000 < interval {
            let r = rp.max(rd);
            if let Some(prev) = window_residual {
                if r > 10.0 * prev && r > 1e-3 {
                    status = SolveStatus::NumericalTrouble;
                    iterations = it + 1;
                    break;
                }
            }
            window_residual = Some(r);
        }
        if opts.adaptive_rho && (it + 1) % (4 * interval) == 0 {
            // balance the scaled residuals
            sc.a.mul_vec(&x, &mut ax);
            sc.a.tmul_vec(&y, &mut aty);
            let rp_s = ax.iter().zip(&s).zip(&sc.b).map(|((a, s), b)| a + s - b).fold(0.0f64, |mx, v| mx.max(v.abs()));
            let rd_s = sc.c.iter().zip(&aty).map(|(c, a)| c - a).fold(0.0f64, |mx, v| mx.max(v.abs()));
            let pn = rp_s / norm_inf(&ax).max(norm_inf(&s)).max(norm_inf(&sc.b)).max(1e-10);
            let dn = rd_s / norm_inf(&aty).max(norm_inf(&sc.c)).max(1e-10);
            let ratio = (pn / dn.max(1e-300)).sqrt();
            if ratio.is_finite() && !(0.2..=5.0).contains(&ratio) {
                rho_base = (rho_base * ratio).clamp(1e-6, 1e6);
                rho = rho_for(rho_base);
                kkt.update_rho(&rho)?;
            }
        }
    }
    let (xo, so, yo) = unscale(&x, &s, &y);
    let (rp, rd, gap, objective) = residuals(&xo, &so, &yo);
    Ok(SolveResult {
        status,
        x: xo,
        s: so,
        y: yo,
        objective,
        primal_residual: rp,
        dual_residual: rd,
        gap,
        iterations,
    })
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// SDPA sparse text. SDPA reads `min cᵀx s.t. Σ F_i x_i − F_0 ⪰ 0`; with
/// `F_i = −(column i of A)` and `F_0 = −b` this is `b − Ax ∈ K`. Zero-cone
/// rows are written twice in the diagonal block, once negated.
pub fn sdpa_string(p: &ConicProgram) -> Result<String> {
    p.validate()?;
    let z = p.cones.zero;
    let lp = 2 * z + p.cones.nonneg;
    let mut out = String::new();
    let _ = writeln!(out, "* musb conic program sha256={}", p.hash());
    let _ = writeln!(out, "* cones zero={} nonneg={} psd={:?}", z, p.cones.nonneg, p.cones.psd);
    let _ = writeln!(out, "{}", p.n);
    let mut blocks: Vec<String> = Vec::new();
    if lp > 0 {
        blocks.push(format!("-{lp}"));
    }
    blocks.extend(p.cones.psd.iter().map(ToString::to_string));
    let _ = writeln!(out, "{}", blocks.len());
    let _ = writeln!(out, "{}", blocks.join(" "));
    let _ = writeln!(out, "{}", p.c.iter().map(|&v| fmt17(v)).collect::<Vec<_>>().join(" "));

    // (row) → (block, i, j) in 1-based SDPA coordinates, with sign
    let lp_block = usize::from(lp > 0);
    let mut row_targets: Vec<Vec<(usize, usize, usize, f64)>> = vec![Vec::new(); p.m()];
    for r in 0..z {
        row_targets[r].push((1, r + 1, r + 1, 1.0));
        row_targets[r].push((1, z + r + 1, z + r + 1, -1.0));
    }
    for r in z..z + p.cones.nonneg {
        row_targets[r].push((1, z + r + 1, z + r + 1, 1.0));
    }
    for (bi, (&k, off)) in p.cones.psd.iter().zip(p.cones.psd_offsets()).enumerate() {
        let mut r = off;
        for j in 0..k {
            for i in 0..=j {
                row_targets[r].push((lp_block + bi + 1, i + 1, j + 1, 1.0));
                r += 1;
            }
        }
    }
    let mut lines: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
    for (r, &bv) in p.b.iter().enumerate() {
        if bv != 0.0 {
            for &(blk, i, j, sg) in &row_targets[r] {
                lines.push((0, blk, i, j, -bv * sg));
            }
        }
    }
    for (r, c, v) in p.a.triplets() {
        for &(blk, i, j, sg) in &row_targets[r] {
            lines.push((c + 1, blk, i, j, -v * sg));
        }
    }
    lines.sort_by(|a, b| (a.0, a.1, a.2, a.3).cmp(&(b.0, b.1, b.2, b.3)));
    for (mat, blk, i, j, v) in lines {
        let _ = writeln!(out, "{mat} {blk} {i} {j} {}", fmt17(v));
    }
    Ok(out)
}

pub fn export_sdpa(p: &ConicProgram, path: &Path) -> Result<()> {
    std::fs::write(path, sdpa_string(p)?)?;
    Ok(())
}

/// Reads a file written by [`sdpa_string`] back into a program.
pub fn parse_sdpa(text: &str) -> Result<ConicProgram> {
    let mut cones: Option<ConeSpec> = None;
    let mut data: Vec<(usize, &str)> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("* cones ") {
            cones = Some(parse_cone_comment(rest).ok_or(Error::Parse { line: k + 1, msg: "bad cones comment".into() })?);
        } else if !t.is_empty() && !t.starts_with('*') && !t.starts_with('"') {
            data.push((k + 1, t));
        }
    }
    let cones = cones.ok_or(Error::Parse { line: 0, msg: "missing '* cones' comment".into() })?;
    let bad = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
    let num = |(line, s): (usize, &str)| -> Result<f64> { s.parse().map_err(|_| bad(line, "bad number")) };
    let mut it = data.into_iter();
    let (l0, s0) = it.next().ok_or(bad(0, "empty file"))?;
    let n: usize = s0.parse().map_err(|_| bad(l0, "bad variable count"))?;
    let _nblocks = it.next().ok_or(bad(0, "missing block count"))?;
    let _sizes = it.next().ok_or(bad(0, "missing block sizes"))?;
    let (lc, sc) = it.next().ok_or(bad(0, "missing objective"))?;
    let c = sc.split_whitespace().map(|s| num((lc, s))).collect::<Result<Vec<f64>>>()?;
    if c.len() != n {
        return Err(bad(lc, "objective length differs from variable count"));
    }
    let z = cones.zero;
    let lp_block = usize::from(2 * z + cones.nonneg > 0);
    let offsets = cones.psd_offsets();
    let m = cones.rows();
    let mut b = vec![0.0; m];
    let mut trip = Vec::new();
    for (line, s) in it {
        let f: Vec<&str> = s.split_whitespace().collect();
        if f.len() != 5 {
            return Err(bad(line, "expected 5 fields"));
        }
        let ints: Vec<usize> = f[..4].iter().map(|t| t.parse().map_err(|_| bad(line, "bad index"))).collect::<Result<_>>()?;
        let (mat, blk, i, j) = (ints[0], ints[1], ints[2], ints[3]);
        let v = num((line, f[4]))?;
        let row = if lp_block == 1 && blk == 1 {
            if i != j {
                return Err(bad(line, "off-diagonal entry in diagonal block"));
            }
            if i > z && i <= 2 * z {
                continue; // negated copy of a zero-cone row
            }
            if i <= z { i - 1 } else { i - 1 - z }
        } else {
            let bi = blk - 1 - lp_block;
            let (lo, hi) = (i.min(j), i.max(j));
            let k = *cones.psd.get(bi).ok_or(bad(line, "block out of range"))?;
            if hi > k || lo == 0 {
                return Err(bad(line, "entry outside block"));
            }
            offsets[bi] + hi * (hi - 1) / 2 + (lo - 1)
        };
        if mat == 0 {
            b[row] = -v;
        } else {
            trip.push((row, mat - 1, -v));
        }
    }
    let p = ConicProgram { n, c, a: SparseMatrix::from_triplets(m, n, trip), b, cones };
    p.validate()?;
    Ok(p)
}

fn parse_cone_comment(s: &str) -> Option<ConeSpec> {
    let mut zero = None;
    let mut nonneg = None;
    let mut psd = None;
    for part in s.split_whitespace() {
        if let Some(v) = part.strip_prefix("zero=") {
            zero = v.parse().ok();
        } else if let Some(v) = part.strip_prefix("nonneg=") {
            nonneg = v.parse().ok();
        } else if let Some(v) = part.strip_prefix("psd=") {
            let inner = v.trim_start_matches('[').trim_end_matches(']');
            psd = Some(if inner.is_empty() {
                Vec::new()
            } else {
                inner.split(',').map(|t| t.trim().parse().ok()).collect::<Option<Vec<usize>>>()?
            });
        }
    }
    Some(ConeSpec { zero: zero?, nonneg: nonneg?, psd: psd? })
}

/// `min λ s.t. A + λI ⪰ 0, λ ≥ lower`: a small program used in tests and
/// examples.
pub fn min_eigen_shift_program(a: &DenseMatrix, lower: f64) -> ConicProgram {
    let k = a.rows();
    let mut trip = vec![(0, 0, -1.0)];
    let mut b = vec![-lower];
    for j in 0..k {
        for i in 0..=j {
            let r = b.len();
            b.push(a[(i, j)]);
            if i == j {
                trip.push((r, 0, -1.0));
            }
        }
    }
    let m = b.len();
    ConicProgram {
        n: 1,
        c: vec![1.0],
        a: SparseMatrix::from_triplets(m, 1, trip),
        b,
        cones: ConeSpec { zero: 0, nonneg: 1, psd: vec![k] },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_shift() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let p = min_eigen_shift_program(&a, -2.0);
        let r = solve(&p, &SolveOptions::default(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-6, "{}", r.objective);
        let w: Vec<f64> = r.y.iter().map(|v| -v).collect();
        let lb = p.dual_lower_bound(&w, &[10.0]).unwrap();
        assert!(lb <= 1.0 + 1e-12 && lb > 1.0 - 1e-5, "{lb}");
    }

    #[test]
    fn bound_active() {
        // I + λI ⪰ 0 alone gives λ = −1; 5I reaches the bound first.
        let p = min_eigen_shift_program(&DenseMatrix::identity(3), -3.0);
        let r = solve(&p, &SolveOptions::default(), None).unwrap();
        assert!((r.objective + 1.0).abs() < 1e-6);
        let five = DenseMatrix::diag(&[5.0, 5.0, 5.0]);
        let r = solve(&min_eigen_shift_program(&five, -3.0), &SolveOptions::default(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective + 3.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn zero_cone_rows() {
        // min x0 + x1 s.t. x0 - x1 = 1, x1 >= 0
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, -1.0), (1, 1, -1.0)]);
        let p = ConicProgram { n: 2, c: vec![1.0, 1.0], a, b: vec![1.0, 0.0], cones: ConeSpec { zero: 1, nonneg: 1, psd: vec![] } };
        let r = solve(&p, &SolveOptions::default(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && r.x[1].abs() < 1e-6);
    }

    #[test]
    fn sdpa_round_trip() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.3, 0.0], vec![0.3, 2.0, 0.1], vec![0.0, 0.1, 0.5]]).unwrap();
        let mut p = min_eigen_shift_program(&a, -3.0);
        p.cones.zero = 0;
        let text = sdpa_string(&p).unwrap();
        assert_eq!(text, sdpa_string(&p).unwrap());
        let back = parse_sdpa(&text).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn sparse_products() {
        let a = SparseMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (1, 2, 2.0), (0, 2, 3.0), (0, 0, 1.0)]);
        let mut out = vec![0.0; 2];
        a.mul_vec(&[1.0, 1.0, 1.0], &mut out);
        assert_eq!(out, vec![5.0, 2.0]);
        let mut t = vec![0.0; 3];
        a.tmul_vec(&[1.0, 1.0], &mut t);
        assert_eq!(t, vec![2.0, 0.0, 5.0]);
    }
}
