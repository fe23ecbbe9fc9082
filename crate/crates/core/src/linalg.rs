//! Dense linear algebra: damped LU solves, symmetric eigendecomposition and
//! projection onto the positive semidefinite cone.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Pivots with magnitude below this are treated as exactly singular.
pub const SINGULAR_PIVOT: f64 = 1e-30;

/// Cyclic Jacobi sweep limit.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Above this order `sym_eig_auto` switches from cyclic Jacobi to
/// Householder tridiagonalization with implicit QL.
pub const JACOBI_MAX_ORDER: usize = 32;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InputShape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InputShape("ragged rows".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.concat() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::InputShape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::InputShape(format!(
                "vector of length {} for {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        DenseMatrix { rows: self.rows, cols: self.cols, data }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// (A + Aᵀ) / 2.
    pub fn symmetrized(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `(A + damping·I) p = b` by LU factorization with partial pivoting.
pub fn lu_solve(a: &DenseMatrix, b: &[f64], damping: f64) -> Result<Vec<f64>> {
    let mut work = a.clone();
    let mut rhs = b.to_vec();
    lu_solve_in_place(&mut work, &mut rhs, damping)?;
    Ok(rhs)
}

/// In-place variant of [`lu_solve`]: `a` is overwritten by its factors and
/// `b` by the solution.
pub fn lu_solve_in_place(a: &mut DenseMatrix, b: &mut [f64], damping: f64) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InputShape(format!("LU of {}x{} matrix", a.rows, a.cols)));
    }
    let n = a.rows;
    if b.len() != n {
        return Err(Error::InputShape(format!("rhs length {} for order {n}", b.len())));
    }
    if damping != 0.0 {
        for i in 0..n {
            a[(i, i)] += damping;
        }
    }
    let d = &mut a.data;
    for k in 0..n {
        let mut piv = k;
        let mut best = d[k * n + k].abs();
        for i in k + 1..n {
            let v = d[i * n + k].abs();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best < SINGULAR_PIVOT {
            return Err(Error::Singular { pivot: k, threshold: SINGULAR_PIVOT });
        }
        if piv != k {
            for j in 0..n {
                d.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        let pivot = d[k * n + k];
        let (head, tail) = d.split_at_mut((k + 1) * n);
        let row_k = &head[k * n..];
        for i in 0..n - k - 1 {
            let row_i = &mut tail[i * n..(i + 1) * n];
            let factor = row_i[k] / pivot;
            if factor == 0.0 {
                continue;
            }
            row_i[k] = factor;
            for j in k + 1..n {
                row_i[j] -= factor * row_k[j];
            }
            b[k + 1 + i] -= factor * b[k];
        }
    }
    for k in (0..n).rev() {
        let row = &d[k * n..(k + 1) * n];
        let s: f64 = (k + 1..n).map(|j| row[j] * b[j]).sum();
        b[k] = (b[k] - s) / row[k];
    }
    Ok(())
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

impl EigenDecomposition {
    /// V Λ Vᵀ.
    pub fn reconstruct(&self) -> DenseMatrix {
        self.weighted_outer(|l| l)
    }

    /// V f(Λ) Vᵀ.
    pub fn weighted_outer(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = DenseMatrix::zeros(n, n);
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            let w = f(l);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = w * v[(i, k)];
                if vik == 0.0 {
                    continue;
                }
                for j in i..n {
                    out[(i, j)] += vik * v[(j, k)];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                out[(i, j)] = out[(j, i)];
            }
        }
        out
    }

    fn sorted(mut values: Vec<f64>, vectors: DenseMatrix) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let eigenvectors = DenseMatrix::from_fn(n, n, |i, k| vectors[(i, order[k])]);
        values = order.iter().map(|&k| values[k]).collect();
        Self { eigenvalues: values, eigenvectors }
    }
}

fn check_square(a: &DenseMatrix) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::InputShape(format!("eigendecomposition of {}x{} matrix", a.rows, a.cols)))
    }
}

/// Cyclic Jacobi eigendecomposition of the symmetric part of `a`.
pub fn sym_eig(a: &DenseMatrix) -> Result<EigenDecomposition> {
    check_square(a)?;
    let n = a.rows;
    let mut m = a.symmetrized();
    let mut v = DenseMatrix::identity(n);
    let norm2: f64 = m.data.iter().map(|x| x * x).sum();
    let target = (f64::EPSILON * f64::EPSILON) * norm2;

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| 2.0 * m[(p, q)] * m[(p, q)])
            .sum();
        if off <= target || off == 0.0 {
            let values = (0..n).map(|i| m[(i, i)]).collect();
            return Ok(EigenDecomposition::sorted(values, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    theta.signum() / (theta.abs() + theta.hypot(1.0))
                };
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::NumericalTrouble(format!(
        "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps"
    )))
}

/// Householder tridiagonalization followed by implicit QL iteration
/// (EISPACK tred2/tql2). O(n³) with a much smaller constant than Jacobi.
pub fn sym_eig_tridiagonal(a: &DenseMatrix) -> Result<EigenDecomposition> {
    check_square(a)?;
    let n = a.rows;
    if n == 0 {
        return Ok(EigenDecomposition { eigenvalues: vec![], eigenvectors: DenseMatrix::zeros(0, 0) });
    }
    let mut v = a.symmetrized();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    // QL rotates pairs of eigenvector columns; operate on the transpose so the
    // rotations touch contiguous rows.
    let mut vt = v.transpose();
    tql2(&mut vt, &mut d, &mut e)?;
    Ok(EigenDecomposition::sorted(d, vt.transpose()))
}

/// Jacobi for small orders, tridiagonal QL above [`JACOBI_MAX_ORDER`].
pub fn sym_eig_auto(a: &DenseMatrix) -> Result<EigenDecomposition> {
    if a.rows <= JACOBI_MAX_ORDER {
        sym_eig(a)
    } else {
        sym_eig_tridiagonal(a)
    }
}

fn tred2(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = v.rows;
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    let vkj = v[(k, j)];
                    g += vkj * d[k];
                    e[k] += vkj * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// `vt` holds eigenvectors as rows.
fn tql2(vt: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = vt.rows;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::NumericalTrouble("QL iteration did not converge".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = vt.data.split_at_mut((i + 1) * n);
                    let row_i = &mut lo[i * n..];
                    let row_i1 = &mut hi[..n];
                    for k in 0..n {
                        let hk = row_i1[k];
                        row_i1[k] = s * row_i[k] + c * hk;
                        row_i[k] = c * row_i[k] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Nearest positive semidefinite matrix in Frobenius norm: V Λ₊ Vᵀ.
pub fn psd_project(a: &DenseMatrix) -> Result<DenseMatrix> {
    let eig = sym_eig_auto(a)?;
    Ok(project_from_eig(a, &eig))
}

/// Builds the projection from a precomputed decomposition of `a`, summing
/// over whichever eigenvalue sign class is smaller.
pub fn project_from_eig(a: &DenseMatrix, eig: &EigenDecomposition) -> DenseMatrix {
    let negatives = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    if negatives == 0 {
        return a.symmetrized();
    }
    if 2 * negatives <= eig.eigenvalues.len() {
        a.symmetrized().sub(&eig.weighted_outer(|l| l.min(0.0)))
    } else {
        eig.weighted_outer(|l| l.max(0.0))
    }
}
