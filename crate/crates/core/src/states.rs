//! Density matrices, dichotomies, distance measures and tensor powers.

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, eigh, trace_norm, CMatrix, HermitianMatrix, C64};

/// Tolerance used when validating states on construction.
pub const STATE_TOLERANCE: f64 = 1e-10;

/// Default cap on the Hilbert-space dimension of explicitly built operators.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Environment variable overriding [`DEFAULT_DIM_CAP`].
pub const DIM_CAP_ENV: &str = "DICHOTOMY_DIM_CAP";

/// The active dimension cap: `DICHOTOMY_DIM_CAP` if set and valid, otherwise
/// [`DEFAULT_DIM_CAP`]. Read once per process.
pub fn dim_cap() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var(DIM_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&c| c > 0)
            .unwrap_or(DEFAULT_DIM_CAP)
    })
}

/// A positive semidefinite, unit-trace Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: HermitianMatrix,
}

impl DensityMatrix {
    /// Validates positivity and normalization within [`STATE_TOLERANCE`].
    pub fn new(mat: HermitianMatrix) -> Result<Self> {
        Self::with_tolerance(mat, STATE_TOLERANCE)
    }

    pub(crate) fn with_tolerance(mat: HermitianMatrix, tol: f64) -> Result<Self> {
        if mat.dim() == 0 {
            return Err(Error::InvalidState("empty matrix".into()));
        }
        let tr = mat.trace();
        if (tr - 1.0).abs() > tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = eigh(&mat)?.min_eigenvalue();
        if min < -tol {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(Self { mat })
    }

    /// Wraps a matrix known to be a state up to rounding.
    pub(crate) fn new_unchecked(mat: HermitianMatrix) -> Self {
        Self { mat }
    }

    pub fn from_matrix(mat: CMatrix) -> Result<Self> {
        Self::new(HermitianMatrix::new(mat)?)
    }

    /// Pure state `|ψ⟩⟨ψ|`; the vector is normalized first.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Ok(Self {
            mat: HermitianMatrix::outer(&v),
        })
    }

    /// Computational basis state `|i⟩⟨i|` in dimension `d`.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        if i >= d {
            return Err(Error::arg("i", format!("index {i} out of range for dimension {d}")));
        }
        let mut diag = vec![0.0; d];
        diag[i] = 1.0;
        Ok(Self {
            mat: HermitianMatrix::from_real_diagonal(&diag),
        })
    }

    /// `|+⟩⟨+|` on a qubit.
    pub fn plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            mat: HermitianMatrix::outer(&[c64(s, 0.0), c64(s, 0.0)]),
        }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            mat: HermitianMatrix::identity(d).scale(1.0 / d as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.mat
    }

    pub fn into_hermitian(self) -> HermitianMatrix {
        self.mat
    }

    /// Convex combination `(1-t)·self + t·other`.
    pub fn mix(&self, other: &DensityMatrix, t: f64) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::arg("t", format!("mixing weight {t} outside [0, 1]")));
        }
        Ok(Self {
            mat: self.mat.lin_comb(1.0 - t, &other.mat, t),
        })
    }

    pub fn kron(&self, other: &DensityMatrix) -> Self {
        Self {
            mat: self.mat.kron(&other.mat),
        }
    }
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// An ordered pair of states `(ρ, σ)` of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dichotomy {
    pub rho: DensityMatrix,
    pub sigma: DensityMatrix,
}

impl Dichotomy {
    pub fn new(rho: DensityMatrix, sigma: DensityMatrix) -> Result<Self> {
        check_dims(rho.dim(), sigma.dim())?;
        Ok(Self { rho, sigma })
    }

    /// A dichotomy of commuting (diagonal) states built from probability vectors.
    pub fn classical(p: &[f64], q: &[f64]) -> Result<Self> {
        Self::new(classical_embed(p)?, classical_embed(q)?)
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    /// `(σ, ρ)`.
    pub fn swapped(&self) -> Self {
        Self {
            rho: self.sigma.clone(),
            sigma: self.rho.clone(),
        }
    }

    pub fn tensor_power(&self, n: usize) -> Result<Self> {
        Ok(Self {
            rho: tensor_power(&self.rho, n)?,
            sigma: tensor_power(&self.sigma, n)?,
        })
    }

    /// If `ρ` and `σ` commute, returns their joint eigenvalue lists
    /// `(p, q)` in a common eigenbasis.
    pub fn classical_form(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let (r, s) = (self.rho.as_hermitian(), self.sigma.as_hermitian());
        if r.is_diagonal(1e-12) && s.is_diagonal(1e-12) {
            return Some((clip_probs(r.real_diagonal()), clip_probs(s.real_diagonal())));
        }
        let comm = r.as_matrix() * s.as_matrix() - s.as_matrix() * r.as_matrix();
        if comm.norm() > 1e-10 {
            return None;
        }
        // A generic combination of two commuting matrices has an eigenbasis
        // that diagonalizes both.
        let golden = 0.618_033_988_749_894_8;
        let eig = eigh(&r.lin_comb(1.0, s, golden)).ok()?;
        let v = &eig.eigenvectors;
        let rd = r.congruence(&v.adjoint());
        let sd = s.congruence(&v.adjoint());
        if !rd.is_diagonal(1e-9) || !sd.is_diagonal(1e-9) {
            return None;
        }
        Some((clip_probs(rd.real_diagonal()), clip_probs(sd.real_diagonal())))
    }
}

fn clip_probs(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

/// A distribution `(p, 1-p)` on two outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryDistribution {
    p: f64,
}

impl BinaryDistribution {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(Error::arg("p", format!("{p} is not a probability")));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn flipped(&self) -> Self {
        Self { p: 1.0 - self.p }
    }

    pub fn to_state(&self) -> DensityMatrix {
        DensityMatrix::new_unchecked(HermitianMatrix::from_real_diagonal(&[self.p, 1.0 - self.p]))
    }
}

/// Distance used for smoothing and for error reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[serde(rename = "trace")]
    TraceDistance,
    #[serde(rename = "purified")]
    PurifiedDistance,
}

impl Metric {
    pub fn distance(&self, a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
        match self {
            Metric::TraceDistance => trace_distance(a, b),
            Metric::PurifiedDistance => purified_distance(a, b),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::TraceDistance => "trace",
            Metric::PurifiedDistance => "purified",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trace" | "T" => Ok(Metric::TraceDistance),
            "purified" | "P" => Ok(Metric::PurifiedDistance),
            other => Err(Error::arg("metric", format!("unknown metric `{other}`"))),
        }
    }
}

/// `½‖a − b‖₁`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let d = trace_norm(&a.mat.sub(&b.mat))?;
    Ok((0.5 * d).clamp(0.0, 1.0))
}

/// `‖√a √b‖₁²`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    Ok(root_fidelity(a.as_hermitian(), b.as_hermitian())?.powi(2).clamp(0.0, 1.0))
}

/// `‖√a √b‖₁ = tr √(√a b √a)` for PSD operators (not necessarily normalized).
pub(crate) fn root_fidelity(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    let sa = sqrt_clean(a)?;
    let inner = b.sandwich(&sa);
    let eig = eigh(&inner)?;
    let floor = inner.dim() as f64 * f64::EPSILON * eig.spectral_radius();
    Ok(eig.eigenvalues.iter().filter(|&&l| l > floor).map(|l| l.sqrt()).sum())
}

/// `min_U ‖√a U − √b‖²_F = tr a + tr b − 2‖√a √b‖₁`, evaluated at the polar
/// factor of `√a √b`. Unlike `1 − F`, the difference is formed entrywise, so
/// the result keeps full absolute precision when `a ≈ b`.
pub(crate) fn bures_sq(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    let (sa, sb) = (sqrt_clean(a)?, sqrt_clean(b)?);
    let prod = sa.as_matrix() * sb.as_matrix();
    let fallback = || Ok((a.trace() + b.trace() - 2.0 * root_fidelity(a, b)?).max(0.0));
    // nalgebra's default tolerance; at exactly ε its deflation test can
    // accept a wrong factorization, hence also the reconstruction check.
    let Some(svd) = prod.clone().try_svd(true, true, 5.0 * f64::EPSILON, 1000 * a.dim()) else {
        return fallback();
    };
    let (u, v) = (svd.u.clone().unwrap(), svd.v_t.clone().unwrap().adjoint());
    let s = CMatrix::from_diagonal(&svd.singular_values.map(|x| c64(x, 0.0)));
    if (&u * s * v.adjoint() - &prod).camax() > 1e-12 * prod.camax().max(1.0) {
        return fallback();
    }
    let floor = a.dim() as f64 * f64::EPSILON * svd.singular_values.max();
    let keep: Vec<usize> = (0..a.dim()).filter(|&i| svd.singular_values[i] > floor).collect();
    let x = unitary_completion(&u, &keep) * unitary_completion(&v, &keep).adjoint();
    let diff = sa.as_matrix() * x - sb.as_matrix();
    Ok(diff.iter().map(|z| z.norm_sqr()).sum())
}

/// An orthonormal basis whose leading columns are `m`'s columns `keep`.
/// The singular vectors of zero singular values are not reliably
/// orthonormal, so they are replaced by a QR completion.
fn unitary_completion(m: &CMatrix, keep: &[usize]) -> CMatrix {
    let d = m.nrows();
    let mut cols = CMatrix::zeros(d, keep.len() + d);
    for (k, &i) in keep.iter().enumerate() {
        cols.set_column(k, &m.column(i));
    }
    for i in 0..d {
        cols[(i, keep.len() + i)] = c64(1.0, 0.0);
    }
    // The Q columns after the kept ones span their orthogonal complement;
    // the kept columns themselves are restored to undo QR's phase choice.
    let mut out = cols.qr().q().columns(0, d).into_owned();
    for (k, &i) in keep.iter().enumerate() {
        out.set_column(k, &m.column(i));
    }
    out
}

/// Square root with eigenvalues below the eigensolver's backward error set
/// to zero; their roots would otherwise be of order `√ε`.
fn sqrt_clean(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let eig = eigh(a)?;
    let floor = a.dim() as f64 * f64::EPSILON * eig.spectral_radius();
    let w: Vec<f64> = eig.eigenvalues.iter().map(|&l| if l > floor { l.sqrt() } else { 0.0 }).collect();
    Ok(eig.reconstruct_with(&w))
}

/// `√(1 − F)` from `h = 1 − √F`: `1 − F = h(2 − h)`.
pub(crate) fn purified_from_half_bures(h: f64) -> f64 {
    let h = h.clamp(0.0, 1.0);
    (h * (2.0 - h)).sqrt()
}

/// `√(1 − F)`, via the Bures form for accuracy near zero.
pub fn purified_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    Ok(purified_from_half_bures(0.5 * bures_sq(a.as_hermitian(), b.as_hermitian())?))
}

/// `a^{⊗n}` subject to the active dimension cap.
pub fn tensor_power(a: &DensityMatrix, n: usize) -> Result<DensityMatrix> {
    tensor_power_with_cap(a, n, dim_cap())
}

pub fn tensor_power_with_cap(a: &DensityMatrix, n: usize, cap: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(Error::arg("n", "tensor power must be positive"));
    }
    let dim = (a.dim() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if dim > cap as u128 {
        return Err(Error::DimensionCap {
            dim: dim.min(usize::MAX as u128) as usize,
            cap,
        });
    }
    let mut out = a.mat.clone();
    for _ in 1..n {
        out = out.kron(&a.mat);
    }
    Ok(DensityMatrix { mat: out })
}

/// Random state of the given rank drawn from the induced measure: the
/// normalized `GG†` for a `dim×rank` complex Gaussian `G`.
pub fn random_density(dim: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    if dim == 0 || rank == 0 || rank > dim {
        return Err(Error::arg(
            "rank",
            format!("need 1 <= rank <= dim, got rank {rank}, dim {dim}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_gaussian_matrix(&mut rng, dim, rank);
    let gg = HermitianMatrix::symmetrized(&g * g.adjoint());
    let tr = gg.trace();
    Ok(DensityMatrix {
        mat: gg.scale(1.0 / tr),
    })
}

/// A pair of independent full-rank random states.
pub fn random_dichotomy(dim: usize, seed: u64) -> Result<Dichotomy> {
    let rho = random_density(dim, dim, seed.wrapping_mul(2).wrapping_add(1))?;
    let sigma = random_density(dim, dim, seed.wrapping_mul(2).wrapping_add(2))?;
    Dichotomy::new(rho, sigma)
}

pub(crate) fn random_gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c64(re, im)
    })
}

/// Diagonal state with the given probabilities.
pub fn classical_embed(p: &[f64]) -> Result<DensityMatrix> {
    validate_probabilities(p, "p")?;
    Ok(DensityMatrix {
        mat: HermitianMatrix::from_real_diagonal(p),
    })
}

pub(crate) fn validate_probabilities(p: &[f64], name: &'static str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::arg(name, "empty probability vector"));
    }
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::arg(name, format!("invalid entry {x}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > STATE_TOLERANCE {
        return Err(Error::arg(name, format!("entries sum to {s}, not 1")));
    }
    Ok(())
}
