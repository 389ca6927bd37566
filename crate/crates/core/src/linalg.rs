//! Dense complex-Hermitian matrix kernel.
//!
//! Everything in the library is built on [`HermitianMatrix`], a thin wrapper
//! over a square `nalgebra` matrix of `Complex64` that is symmetrized on
//! construction. Spectral work goes through [`eigh`], which is backed by
//! nalgebra's Householder tridiagonalization followed by implicit symmetric QR
//! (deterministic for a fixed input). Eigenvalues are returned in ascending
//! order.
//!
//! Eigenvalues whose magnitude is at most [`SUPPORT_CUTOFF`] times the largest
//! eigenvalue magnitude are treated as exact zeros by the support-aware helpers.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Relative eigenvalue cutoff below which an eigenvalue counts as zero.
pub const SUPPORT_CUTOFF: f64 = 1e-12;

/// Iteration cap per unit dimension for the eigensolver.
const EIG_ITER_PER_DIM: usize = 100;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A complex Hermitian matrix. The Hermitian invariant is enforced by
/// symmetrizing `(A + A†)/2` whenever a matrix is wrapped.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    mat: CMatrix,
}

impl HermitianMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::NotSquare {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        Ok(Self::symmetrized(mat))
    }

    /// Wraps a square matrix, replacing it by its Hermitian part.
    pub(crate) fn symmetrized(mat: CMatrix) -> Self {
        debug_assert!(mat.is_square());
        let adj = mat.adjoint();
        Self {
            mat: (mat + adj) * c64(0.5, 0.0),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: CMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: CMatrix::identity(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut mat = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            mat[(i, i)] = c64(d, 0.0);
        }
        Self { mat }
    }

    /// Builds a matrix from real entries given row by row.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut mat = CMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                mat[(i, j)] = c64(v, 0.0);
            }
        }
        Self::new(mat)
    }

    /// `|ψ⟩⟨ψ|` for an arbitrary (not necessarily normalized) vector.
    pub fn outer(psi: &[C64]) -> Self {
        let n = psi.len();
        let mat = CMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj());
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.mat.diagonal().iter().map(|z| z.re).sum()
    }

    /// `Re tr(A B)`, the Hilbert–Schmidt inner product of two Hermitian matrices.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = self.mat[(i, j)];
                let b = other.mat[(j, i)];
                acc += a.re * b.re - a.im * b.im;
            }
        }
        acc
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mat: &self.mat * c64(s, 0.0),
        }
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        Self {
            mat: &self.mat + &other.mat,
        }
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Self {
        Self {
            mat: &self.mat - &other.mat,
        }
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &HermitianMatrix, b: f64) -> Self {
        Self {
            mat: &self.mat * c64(a, 0.0) + &other.mat * c64(b, 0.0),
        }
    }

    /// `X · self · X†` for an arbitrary (possibly rectangular) `X`.
    pub fn congruence(&self, x: &CMatrix) -> Self {
        Self::symmetrized(x * &self.mat * x.adjoint())
    }

    /// `B · self · B` for Hermitian `B`.
    pub fn sandwich(&self, b: &HermitianMatrix) -> Self {
        Self::symmetrized(&b.mat * &self.mat * &b.mat)
    }

    pub fn kron(&self, other: &HermitianMatrix) -> Self {
        Self {
            mat: self.mat.kronecker(&other.mat),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// True when every off-diagonal entry is at most `tol` in magnitude.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.mat[(i, j)].norm() <= tol))
    }

    pub fn real_diagonal(&self) -> Vec<f64> {
        self.mat.diagonal().iter().map(|z| z.re).collect()
    }
}

/// Spectral decomposition `A = V diag(λ) V†` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest eigenvalue magnitude.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0_f64, |m, l| m.max(l.abs()))
    }

    /// Absolute threshold below which an eigenvalue is treated as zero.
    pub fn cutoff(&self) -> f64 {
        SUPPORT_CUTOFF * self.spectral_radius()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// `Σ_k w_k |v_k⟩⟨v_k|`.
    pub fn reconstruct_with(&self, weights: &[f64]) -> HermitianMatrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &w) in weights.iter().enumerate() {
            let mut col = scaled.column_mut(k);
            col *= c64(w, 0.0);
        }
        let mat = if n == 0 {
            CMatrix::zeros(0, 0)
        } else {
            scaled * v.adjoint()
        };
        HermitianMatrix::symmetrized(mat)
    }

    /// Projector onto the span of eigenvectors whose eigenvalue satisfies `keep`.
    pub fn projector_where(&self, keep: impl Fn(f64) -> bool) -> HermitianMatrix {
        let w: Vec<f64> = self
            .eigenvalues
            .iter()
            .map(|&l| if keep(l) { 1.0 } else { 0.0 })
            .collect();
        self.reconstruct_with(&w)
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues.
pub fn eigh(a: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = a.dim();
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    if n == 1 {
        return Ok(EigenDecomposition {
            eigenvalues: vec![a.mat[(0, 0)].re],
            eigenvectors: CMatrix::identity(1, 1),
        });
    }
    let cap = EIG_ITER_PER_DIM * n;
    let eig = SymmetricEigen::try_new(a.mat.clone(), f64::EPSILON, cap)
        .ok_or(Error::NoConvergence { dim: n, cap })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Applies a real function to the spectrum: `V f(diag λ) V†`.
///
/// With `support_only`, eigenvalues within the relative cutoff of zero are
/// mapped to exactly zero and `f` is evaluated only on the remaining ones.
/// A non-finite `f(λ)` on an evaluated eigenvalue is a domain error.
pub fn matrix_function(
    a: &HermitianMatrix,
    f: impl Fn(f64) -> f64,
    support_only: bool,
) -> Result<HermitianMatrix> {
    let eig = eigh(a)?;
    spectral_map(&eig, f, support_only)
}

pub(crate) fn spectral_map(
    eig: &EigenDecomposition,
    f: impl Fn(f64) -> f64,
    support_only: bool,
) -> Result<HermitianMatrix> {
    let cut = eig.cutoff();
    let mut w = Vec::with_capacity(eig.dim());
    for &l in &eig.eigenvalues {
        if support_only && l.abs() <= cut {
            w.push(0.0);
            continue;
        }
        let v = f(l);
        if !v.is_finite() {
            return Err(Error::Domain { eigenvalue: l });
        }
        w.push(v);
    }
    Ok(eig.reconstruct_with(&w))
}

/// Projector onto the support of a (numerically) positive semidefinite matrix.
pub fn support_projector(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let eig = eigh(a)?;
    let cut = eig.cutoff();
    Ok(eig.projector_where(|l| l > cut))
}

/// Sum of the strictly positive eigenvalues.
pub fn positive_part_trace(a: &HermitianMatrix) -> Result<f64> {
    let eig = eigh(a)?;
    Ok(eig.eigenvalues.iter().filter(|&&l| l > 0.0).sum())
}

/// Schatten 1-norm.
pub fn trace_norm(a: &HermitianMatrix) -> Result<f64> {
    let eig = eigh(a)?;
    Ok(eig.eigenvalues.iter().map(|l| l.abs()).sum())
}

/// Square root of a PSD matrix; tiny negative eigenvalues are clipped to zero.
pub fn sqrt_psd(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let eig = eigh(a)?;
    let w: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok(eig.reconstruct_with(&w))
}

/// Real Hermitian basis of the `d×d` Hermitian matrices, orthonormal in the
/// Hilbert–Schmidt inner product. Each element is returned as a sparse list
/// of `(row, col, value)` entries.
pub(crate) fn hermitian_basis(d: usize) -> Vec<Vec<(usize, usize, C64)>> {
    let mut out = Vec::with_capacity(d * d);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        out.push(vec![(i, i, c64(1.0, 0.0))]);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            out.push(vec![(i, j, c64(s, 0.0)), (j, i, c64(s, 0.0))]);
            out.push(vec![(i, j, c64(0.0, -s)), (j, i, c64(0.0, s))]);
        }
    }
    out
}

/// `log2` of a sum of powers of two given in log form, `log2 Σ 2^{x_i}`.
pub(crate) fn log2_sum_exp2(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp2()).sum();
    m + s.log2()
}

/// `log2(2^a + 2^b)`.
pub(crate) fn log2_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp2().ln_1p() / std::f64::consts::LN_2
}

/// `log2(2^a - 2^b)` for `a ≥ b`; `-∞` when equal.
pub(crate) fn log2_sub(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b >= a {
        return f64::NEG_INFINITY;
    }
    let d = b - a;
    let ln = if d < -1.0 {
        (-d.exp2()).ln_1p()
    } else {
        (-(d * std::f64::consts::LN_2).exp_m1()).ln()
    };
    a + ln / std::f64::consts::LN_2
}
