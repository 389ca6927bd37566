//! Relative entropy, Petz and sandwiched Rényi divergences, min- and
//! max-relative entropies and the relative entropy variance. All values in bits.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{eigh, log2_sum_exp2, spectral_map, EigenDecomposition};
use crate::states::Dichotomy;

/// Tolerance on `tr((1 − Π_σ)ρ)` for the support condition.
pub const SUPPORT_TOLERANCE: f64 = 1e-10;

/// A divergence in bits, or `+∞` when the support condition fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceValue {
    Finite(f64),
    Infinite,
}

impl DivergenceValue {
    pub fn bits(&self) -> f64 {
        match self {
            DivergenceValue::Finite(v) => *v,
            DivergenceValue::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            DivergenceValue::Finite(v) => Some(*v),
            DivergenceValue::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, DivergenceValue::Infinite)
    }
}

impl fmt::Display for DivergenceValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DivergenceValue::Finite(v) => write!(f, "{v:.6}"),
            DivergenceValue::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for DivergenceValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DivergenceValue::Finite(v) => s.serialize_f64(*v),
            DivergenceValue::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Joint spectral data of a pair: eigen-decompositions of both states and
/// the squared overlaps `|⟨u_i|v_j⟩|²` between their eigenvectors.
struct PairSpectra {
    r: EigenDecomposition,
    s: EigenDecomposition,
    r_cut: f64,
    s_cut: f64,
    overlap: DMatrix<f64>,
}

impl PairSpectra {
    fn new(d: &Dichotomy) -> Result<Self> {
        let r = eigh(d.rho.as_hermitian())?;
        let s = eigh(d.sigma.as_hermitian())?;
        let o = r.eigenvectors.adjoint() * &s.eigenvectors;
        let overlap = o.map(|z| z.norm_sqr());
        Ok(Self {
            r_cut: r.cutoff(),
            s_cut: s.cutoff(),
            r,
            s,
            overlap,
        })
    }

    fn rho_support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let cut = self.r_cut;
        self.r.eigenvalues.iter().copied().enumerate().filter(move |&(_, l)| l > cut)
    }

    fn sigma_support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let cut = self.s_cut;
        self.s.eigenvalues.iter().copied().enumerate().filter(move |&(_, l)| l > cut)
    }

    /// `tr((1 − Π_σ)ρ)`.
    fn leak(&self) -> f64 {
        let mut t = 0.0;
        for (i, ri) in self.rho_support() {
            for (j, &sj) in self.s.eigenvalues.iter().enumerate() {
                if sj <= self.s_cut {
                    t += ri * self.overlap[(i, j)];
                }
            }
        }
        t
    }

    fn dominated(&self) -> bool {
        self.leak() <= SUPPORT_TOLERANCE
    }
}

/// `true` when `supp ρ ⊆ supp σ` up to [`SUPPORT_TOLERANCE`].
pub fn support_contained(d: &Dichotomy) -> Result<bool> {
    Ok(PairSpectra::new(d)?.dominated())
}

/// `D(ρ‖σ) = tr ρ(log ρ − log σ)`.
pub fn relative_entropy(d: &Dichotomy) -> Result<DivergenceValue> {
    let sp = PairSpectra::new(d)?;
    if !sp.dominated() {
        return Ok(DivergenceValue::Infinite);
    }
    let mut v = 0.0;
    for (i, ri) in sp.rho_support() {
        v += ri * ri.log2();
        for (j, sj) in sp.sigma_support() {
            v -= ri * sp.overlap[(i, j)] * sj.log2();
        }
    }
    Ok(DivergenceValue::Finite(v.max(0.0)))
}

fn check_petz_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) || alpha == 1.0 || !alpha.is_finite() {
        return Err(Error::arg(
            "alpha",
            format!("{alpha} outside (0,1) ∪ (1,2] for the Petz divergence"),
        ));
    }
    Ok(())
}

fn check_sandwiched_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.5) || alpha == 1.0 || !alpha.is_finite() {
        return Err(Error::arg(
            "alpha",
            format!("{alpha} outside [1/2,1) ∪ (1,∞) for the sandwiched divergence"),
        ));
    }
    Ok(())
}

/// Petz Rényi divergence `(1/(α−1)) log tr ρ^α σ^{1−α}`.
pub fn petz_renyi(d: &Dichotomy, alpha: f64) -> Result<DivergenceValue> {
    check_petz_alpha(alpha)?;
    let sp = PairSpectra::new(d)?;
    if alpha > 1.0 && !sp.dominated() {
        return Ok(DivergenceValue::Infinite);
    }
    let mut logs = Vec::new();
    for (i, ri) in sp.rho_support() {
        for (j, sj) in sp.sigma_support() {
            let o = sp.overlap[(i, j)];
            if o > 0.0 {
                logs.push(alpha * ri.log2() + (1.0 - alpha) * sj.log2() + o.log2());
            }
        }
    }
    let lq = log2_sum_exp2(logs);
    if lq == f64::NEG_INFINITY {
        return Ok(DivergenceValue::Infinite);
    }
    Ok(DivergenceValue::Finite(lq / (alpha - 1.0)))
}

/// Sandwiched Rényi divergence
/// `(1/(α−1)) log tr (σ^{(1−α)/2α} ρ σ^{(1−α)/2α})^α`.
pub fn sandwiched_renyi(d: &Dichotomy, alpha: f64) -> Result<DivergenceValue> {
    check_sandwiched_alpha(alpha)?;
    let sp = PairSpectra::new(d)?;
    if alpha > 1.0 && !sp.dominated() {
        return Ok(DivergenceValue::Infinite);
    }
    let g = (1.0 - alpha) / (2.0 * alpha);
    let sg = spectral_map(&sp.s, |x| x.powf(g), true)?;
    let inner = d.rho.as_hermitian().sandwich(&sg);
    let eig = eigh(&inner)?;
    let cut = eig.cutoff();
    // Sum in the log domain so large α does not overflow.
    let lq = log2_sum_exp2(
        eig.eigenvalues
            .iter()
            .filter(|&&l| l > cut)
            .map(|&l| alpha * l.log2()),
    );
    if lq == f64::NEG_INFINITY {
        return Ok(DivergenceValue::Infinite);
    }
    Ok(DivergenceValue::Finite(lq / (alpha - 1.0)))
}

/// `D_min(ρ‖σ) = −log tr σ Π_ρ`.
pub fn d_min(d: &Dichotomy) -> Result<DivergenceValue> {
    let sp = PairSpectra::new(d)?;
    let mut t = 0.0;
    for (i, _) in sp.rho_support() {
        for (j, &sj) in sp.s.eigenvalues.iter().enumerate() {
            t += sj.max(0.0) * sp.overlap[(i, j)];
        }
    }
    if t <= 0.0 {
        return Ok(DivergenceValue::Infinite);
    }
    Ok(DivergenceValue::Finite((-t.min(1.0).log2()).max(0.0)))
}

/// `D_max(ρ‖σ) = log λ_max(σ^{−1/2} ρ σ^{−1/2})` on the support of `σ`.
pub fn d_max(d: &Dichotomy) -> Result<DivergenceValue> {
    let sp = PairSpectra::new(d)?;
    if !sp.dominated() {
        return Ok(DivergenceValue::Infinite);
    }
    let inv_sqrt = spectral_map(&sp.s, |x| x.powf(-0.5), true)?;
    let lmax = eigh(&d.rho.as_hermitian().sandwich(&inv_sqrt))?.max_eigenvalue();
    Ok(DivergenceValue::Finite(lmax.log2()))
}

/// `V(ρ‖σ) = tr ρ(log ρ − log σ)² − D(ρ‖σ)²`.
pub fn relative_entropy_variance(d: &Dichotomy) -> Result<f64> {
    let sp = PairSpectra::new(d)?;
    if !sp.dominated() {
        return Err(Error::Precondition(
            "relative entropy variance needs supp(rho) inside supp(sigma)".into(),
        ));
    }
    let log_r = spectral_map(&sp.r, f64::log2, true)?;
    let log_s = spectral_map(&sp.s, f64::log2, true)?;
    let l = log_r.sub(&log_s);
    let rho = d.rho.as_hermitian();
    let second = (rho.as_matrix() * l.as_matrix() * l.as_matrix()).trace().re;
    let first = rho.inner(&l);
    Ok((second - first * first).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{fidelity, random_density, random_dichotomy, DensityMatrix};
    use approx::assert_abs_diff_eq;

    fn classical(p: &[f64], q: &[f64]) -> Dichotomy {
        Dichotomy::classical(p, q).unwrap()
    }

    fn ket0_mixed() -> Dichotomy {
        Dichotomy::new(DensityMatrix::basis(2, 0).unwrap(), DensityMatrix::maximally_mixed(2)).unwrap()
    }

    fn same(seed: u64) -> Dichotomy {
        let r = random_density(3, 3, seed).unwrap();
        Dichotomy::new(r.clone(), r).unwrap()
    }

    #[test]
    fn relative_entropy_examples() {
        assert_abs_diff_eq!(relative_entropy(&same(1)).unwrap().bits(), 0.0, epsilon = 1e-10);
        let oracle = 0.9 * 1.8f64.log2() + 0.1 * 0.2f64.log2();
        let v = relative_entropy(&classical(&[0.9, 0.1], &[0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(v.bits(), oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(v.bits(), 0.531004, epsilon = 1e-6);
        let disjoint = classical(&[1.0, 0.0], &[0.0, 1.0]);
        assert!(relative_entropy(&disjoint).unwrap().is_infinite());
    }

    #[test]
    fn petz_examples() {
        for alpha in [0.3, 0.5, 1.5, 2.0] {
            assert_abs_diff_eq!(petz_renyi(&same(2), alpha).unwrap().bits(), 0.0, epsilon = 1e-9);
        }
        let v = petz_renyi(&classical(&[0.9, 0.1], &[0.5, 0.5]), 0.5).unwrap();
        let oracle = -2.0 * (0.45f64.sqrt() + 0.05f64.sqrt()).log2();
        assert_abs_diff_eq!(v.bits(), oracle, epsilon = 1e-12);
        // Near α = 1 the gap is (1−α)·V·ln2/2 to first order, so the fixed
        // 2e-3 window only applies to pairs of moderate variance.
        let mut checked = 0;
        for seed in 0..40 {
            let d = random_dichotomy(2, seed).unwrap();
            let p = petz_renyi(&d, 0.999).unwrap().bits();
            let r = relative_entropy(&d).unwrap().bits();
            let v = relative_entropy_variance(&d).unwrap();
            let first_order = 1e-3 * v * std::f64::consts::LN_2 / 2.0;
            assert!((r - p - first_order).abs() < 1e-4 * (1.0 + v), "seed {seed}: {p} vs {r}");
            if v <= 4.0 {
                assert!((p - r).abs() < 2e-3, "seed {seed}: {p} vs {r}");
                checked += 1;
            }
        }
        assert!(checked >= 20);
    }

    #[test]
    fn alpha_range_is_enforced() {
        let d = same(3);
        for bad in [0.0, 1.0, 2.5, -1.0, f64::NAN] {
            assert!(petz_renyi(&d, bad).is_err());
        }
        for bad in [0.4, 1.0, f64::INFINITY, f64::NAN] {
            assert!(sandwiched_renyi(&d, bad).is_err());
        }
    }

    #[test]
    fn sandwiched_examples() {
        assert_abs_diff_eq!(sandwiched_renyi(&same(4), 2.0).unwrap().bits(), 0.0, epsilon = 1e-9);
        let d = Dichotomy::new(DensityMatrix::basis(2, 0).unwrap(), DensityMatrix::plus()).unwrap();
        assert_abs_diff_eq!(sandwiched_renyi(&d, 0.5).unwrap().bits(), 1.0, epsilon = 1e-9);
        let (p, q) = ([0.7, 0.2, 0.1], [0.3, 0.3, 0.4]);
        let alpha = 2.0;
        let s: f64 = p.iter().zip(&q).map(|(a, b)| a * a / b).sum();
        let oracle = s.log2() / (alpha - 1.0);
        let v = sandwiched_renyi(&classical(&p, &q), alpha).unwrap();
        assert_abs_diff_eq!(v.bits(), oracle, epsilon = 1e-12);
    }

    #[test]
    fn sandwiched_half_is_minus_log_fidelity() {
        for seed in 0..30 {
            let d = random_dichotomy(3, seed).unwrap();
            let f = fidelity(&d.rho, &d.sigma).unwrap();
            let v = sandwiched_renyi(&d, 0.5).unwrap().bits();
            assert_abs_diff_eq!(v, -f.log2(), epsilon = 1e-9);
        }
    }

    #[test]
    fn d_min_examples() {
        let full = random_dichotomy(3, 5).unwrap();
        assert_abs_diff_eq!(d_min(&full).unwrap().bits(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d_min(&ket0_mixed()).unwrap().bits(), 1.0, epsilon = 1e-12);
        let d = classical(&[1.0, 0.0], &[0.25, 0.75]);
        assert_abs_diff_eq!(d_min(&d).unwrap().bits(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn d_max_examples() {
        assert_abs_diff_eq!(d_max(&same(6)).unwrap().bits(), 0.0, epsilon = 1e-9);
        let d = Dichotomy::new(DensityMatrix::plus(), DensityMatrix::maximally_mixed(2)).unwrap();
        assert_abs_diff_eq!(d_max(&d).unwrap().bits(), 1.0, epsilon = 1e-12);
        let c = d_max(&classical(&[0.9, 0.1], &[0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(c.bits(), 1.8f64.log2(), epsilon = 1e-12);
        assert!(d_max(&ket0_mixed().swapped()).unwrap().is_infinite());
    }

    #[test]
    fn variance_examples() {
        assert_abs_diff_eq!(relative_entropy_variance(&same(7)).unwrap(), 0.0, epsilon = 1e-9);
        let (p, q) = ([0.6, 0.3, 0.1], [0.2, 0.5, 0.3]);
        let lr: Vec<f64> = p.iter().zip(&q).map(|(a, b): (&f64, &f64)| (a / b).log2()).collect();
        let mean: f64 = p.iter().zip(&lr).map(|(a, l)| a * l).sum();
        let oracle: f64 = p.iter().zip(&lr).map(|(a, l)| a * (l - mean).powi(2)).sum();
        let v = relative_entropy_variance(&classical(&p, &q)).unwrap();
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(relative_entropy_variance(&ket0_mixed()).unwrap(), 0.0, epsilon = 1e-12);
        assert!(relative_entropy_variance(&ket0_mixed().swapped()).is_err());
    }

    #[test]
    fn alpha_monotonicity_and_ordering() {
        let grid = [0.3, 0.5, 0.8, 1.2, 1.5, 2.0];
        for seed in 0..100 {
            let d = random_dichotomy(2 + seed as usize % 3, 1000 + seed).unwrap();
            let petz: Vec<f64> = grid.iter().map(|&a| petz_renyi(&d, a).unwrap().bits()).collect();
            for w in petz.windows(2) {
                assert!(w[1] - w[0] >= -1e-9, "petz not monotone: {petz:?}");
            }
            let sw: Vec<f64> = grid
                .iter()
                .filter(|&&a| a >= 0.5)
                .map(|&a| sandwiched_renyi(&d, a).unwrap().bits())
                .collect();
            for w in sw.windows(2) {
                assert!(w[1] - w[0] >= -1e-9, "sandwiched not monotone: {sw:?}");
            }
            for &a in grid.iter().filter(|&&a| a >= 0.5) {
                let p = petz_renyi(&d, a).unwrap().bits();
                let s = sandwiched_renyi(&d, a).unwrap().bits();
                assert!(p - s >= -1e-9, "petz < sandwiched at alpha {a}");
            }
        }
    }

    #[test]
    fn limits_at_small_and_large_alpha() {
        let d = Dichotomy::new(random_density(3, 2, 40).unwrap(), random_density(3, 3, 41).unwrap()).unwrap();
        let dmin = d_min(&d).unwrap().bits();
        let a = petz_renyi(&d, 0.1).unwrap().bits();
        let b = petz_renyi(&d, 0.01).unwrap().bits();
        assert!((b - dmin).abs() <= (a - dmin).abs());
        assert!((b - dmin).abs() < 0.05);
        for seed in 0..20 {
            let q = random_dichotomy(2, 200 + seed).unwrap();
            let s = sandwiched_renyi(&q, 64.0).unwrap().bits();
            let m = d_max(&q).unwrap().bits();
            assert!((s - m).abs() < 0.05, "seed {seed}: {s} vs {m}");
        }
    }

    #[test]
    fn additivity_on_two_copies() {
        for seed in 0..5 {
            let d = random_dichotomy(2, 300 + seed).unwrap();
            let d2 = d.tensor_power(2).unwrap();
            let r1 = relative_entropy(&d).unwrap().bits();
            assert_abs_diff_eq!(relative_entropy(&d2).unwrap().bits(), 2.0 * r1, epsilon = 1e-8);
            for a in [0.5, 1.5] {
                let p = petz_renyi(&d, a).unwrap().bits();
                assert_abs_diff_eq!(petz_renyi(&d2, a).unwrap().bits(), 2.0 * p, epsilon = 1e-8);
                let s = sandwiched_renyi(&d, a).unwrap().bits();
                assert_abs_diff_eq!(sandwiched_renyi(&d2, a).unwrap().bits(), 2.0 * s, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn infinite_serializes_as_string() {
        assert_eq!(serde_json::to_string(&DivergenceValue::Infinite).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&DivergenceValue::Finite(1.5)).unwrap(), "1.5");
    }
}
