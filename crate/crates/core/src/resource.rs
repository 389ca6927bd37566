//! Athermality and coherence as dichotomies.
//!
//! Everything is in bits. With `γ = e^{−βE}/Z` the free energy reads
//! `F_H(ρ) = (1/β)(D(ρ‖γ) − log₂ Z) = log₂e·tr ρE − S(ρ)/β`, i.e. `βE` is
//! measured in nats and converted.

use serde::Serialize;

use crate::asymptotics::{ExperimentConfig, NEAR_CRITICAL_BAND};
use crate::channels::{Channel, GeneralChannel};
use crate::error::{Error, Result};
use crate::linalg::{eigh, CMatrix, HermitianMatrix};
use crate::states::{check_dims, DensityMatrix, Dichotomy, Metric};
use crate::divergences::relative_entropy;

/// Tolerance of the DIO commutation checks.
pub const DIO_TOLERANCE: f64 = 1e-9;
/// Allowed disagreement between the two free-energy expressions.
pub const FREE_ENERGY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSpec {
    hamiltonian: HermitianMatrix,
    beta: f64,
}

impl GibbsSpec {
    pub fn new(hamiltonian: HermitianMatrix, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::arg("beta", format!("{beta} must be positive and finite")));
        }
        Ok(Self { hamiltonian, beta })
    }

    pub fn hamiltonian(&self) -> &HermitianMatrix {
        &self.hamiltonian
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// `log₂ Z` with `Z = tr e^{−βE}`.
    pub fn log2_partition_function(&self) -> Result<f64> {
        let e = eigh(&self.hamiltonian)?;
        let e0 = e.min_eigenvalue();
        let z0: f64 = e.eigenvalues.iter().map(|&x| (-self.beta * (x - e0)).exp()).sum();
        Ok((-self.beta * e0 + z0.ln()) / std::f64::consts::LN_2)
    }
}

/// `e^{−βE}/Z`, full rank.
pub fn gibbs_state(g: &GibbsSpec) -> Result<DensityMatrix> {
    let e = eigh(g.hamiltonian())?;
    let e0 = e.min_eigenvalue();
    let w: Vec<f64> = e.eigenvalues.iter().map(|&x| (-g.beta * (x - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|v| v / z).collect();
    Ok(DensityMatrix::new_unchecked(e.reconstruct_with(&w)))
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let e = eigh(rho.as_hermitian())?;
    Ok(e
        .eigenvalues
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.log2())
        .sum())
}

/// Helmholtz free energy in bits, cross-checked between its two forms.
pub fn free_energy(rho: &DensityMatrix, g: &GibbsSpec) -> Result<f64> {
    check_dims(g.dim(), rho.dim())?;
    let gamma = gibbs_state(g)?;
    let d = relative_entropy(&Dichotomy::new(rho.clone(), gamma)?)?.bits();
    let via_divergence = (d - g.log2_partition_function()?) / g.beta;
    let energy = rho.as_hermitian().inner(g.hamiltonian()) * std::f64::consts::LOG2_E;
    let via_entropy = energy - von_neumann_entropy(rho)? / g.beta;
    let scale = via_divergence.abs().max(1.0);
    if (via_divergence - via_entropy).abs() > FREE_ENERGY_TOLERANCE * scale {
        return Err(Error::Numerical(format!(
            "free energy forms disagree: {via_divergence} vs {via_entropy}"
        )));
    }
    Ok(via_divergence)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    AsymptoticallyFeasible,
    StrongConverseRegime,
    NearCritical,
}

fn verdict(lambda1: f64, lambda2: f64) -> Verdict {
    if (lambda1 - lambda2).abs() <= NEAR_CRITICAL_BAND * lambda1.max(lambda2) {
        Verdict::NearCritical
    } else if lambda1 > lambda2 {
        Verdict::AsymptoticallyFeasible
    } else {
        Verdict::StrongConverseRegime
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AthermalityReport {
    pub lambda1: f64,
    pub lambda2: f64,
    pub free_energy1: f64,
    pub free_energy2: f64,
    pub verdict: Verdict,
    pub units: &'static str,
}

/// Whether `ρ₁^{⊗n} → ρ₂^{⊗n}` is possible under Gibbs-preserving maps with
/// vanishing error (`D(ρ₁‖γ) > D(ρ₂‖γ)`), or fails with error tending to one.
pub fn athermality_feasible(rho1: &DensityMatrix, rho2: &DensityMatrix, g: &GibbsSpec) -> Result<AthermalityReport> {
    check_dims(rho1.dim(), rho2.dim())?;
    check_dims(g.dim(), rho1.dim())?;
    let gamma = gibbs_state(g)?;
    let lambda1 = relative_entropy(&Dichotomy::new(rho1.clone(), gamma.clone())?)?.bits();
    let lambda2 = relative_entropy(&Dichotomy::new(rho2.clone(), gamma)?)?.bits();
    Ok(AthermalityReport {
        lambda1,
        lambda2,
        free_energy1: free_energy(rho1, g)?,
        free_energy2: free_energy(rho2, g)?,
        verdict: verdict(lambda1, lambda2),
        units: "bits",
    })
}

/// Rate experiment for `(ρ₁, γ) → (ρ₂, γ)`.
pub fn athermality_experiment(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    g: &GibbsSpec,
    metric: Metric,
    eps: f64,
    n_max: usize,
) -> Result<ExperimentConfig> {
    let gamma = gibbs_state(g)?;
    ExperimentConfig::new(
        Dichotomy::new(rho1.clone(), gamma.clone())?,
        Dichotomy::new(rho2.clone(), gamma)?,
        metric,
        eps,
        n_max,
    )
}

/// Complete dephasing in the computational basis.
pub fn dephase(rho: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::new_unchecked(HermitianMatrix::from_real_diagonal(&rho.as_hermitian().real_diagonal()))
}

/// The dephasing map in Kraus form, `K_i = |i⟩⟨i|`.
pub fn dephasing_channel(d: usize) -> GeneralChannel {
    let kraus = (0..d)
        .map(|i| CMatrix::from_fn(d, d, |a, b| if a == i && b == i { 1.0.into() } else { 0.0.into() }))
        .collect();
    GeneralChannel::new(kraus).expect("projectors onto a basis are complete")
}

fn apply_kraus(ch: &GeneralChannel, x: &CMatrix) -> CMatrix {
    let d = ch.d_out();
    let mut out = CMatrix::zeros(d, d);
    for k in ch.kraus() {
        out += k * x * k.adjoint();
    }
    out
}

fn diag_part(x: &CMatrix) -> CMatrix {
    CMatrix::from_fn(x.nrows(), x.ncols(), |i, j| if i == j { x[(i, i)] } else { 0.0.into() })
}

#[derive(Debug, Clone, Serialize)]
pub struct DioCheck {
    pub holds: bool,
    pub max_deviation: f64,
    /// Matrix unit `|i⟩⟨j|` with the largest deviation, when the check fails.
    pub violating_unit: Option<(usize, usize)>,
}

/// `𝓔∘diag = diag∘𝓔` on every matrix unit.
pub fn is_dio(ch: &GeneralChannel) -> DioCheck {
    let d = ch.d_in();
    let (mut worst, mut at) = (0.0f64, (0, 0));
    for i in 0..d {
        for j in 0..d {
            let mut unit = CMatrix::zeros(d, d);
            unit[(i, j)] = 1.0.into();
            let left = apply_kraus(ch, &diag_part(&unit));
            let right = diag_part(&apply_kraus(ch, &unit));
            let dev = (left - right).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if dev > worst {
                (worst, at) = (dev, (i, j));
            }
        }
    }
    let holds = worst <= DIO_TOLERANCE;
    DioCheck {
        holds,
        max_deviation: worst,
        violating_unit: (!holds).then_some(at),
    }
}

/// `(𝓔∘diag)(ρ) = (diag∘𝓔)(ρ)` on the single state `ρ`.
pub fn is_rho_dio(ch: &dyn Channel, rho: &DensityMatrix) -> Result<DioCheck> {
    let left = ch.apply(&dephase(rho))?;
    let right = dephase(&ch.apply(rho)?);
    let dev = left.as_hermitian().sub(right.as_hermitian()).max_abs_entry();
    Ok(DioCheck {
        holds: dev <= DIO_TOLERANCE,
        max_deviation: dev,
        violating_unit: None,
    })
}

/// `D(ρ‖diag ρ)` in bits.
pub fn coherence_distillation_rate(rho: &DensityMatrix) -> Result<f64> {
    Ok(relative_entropy(&Dichotomy::new(rho.clone(), dephase(rho))?)?.bits())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Rate {
    Finite(f64),
    Unbounded,
}

/// `D(ρ‖diag ρ)/D(σ‖diag σ)`, the threshold for `ρ^{⊗n} → σ^{⊗Rn}` under
/// DIO; unbounded when `σ` is incoherent.
pub fn dio_transformation_rate(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<Rate> {
    let target = coherence_distillation_rate(sigma)?;
    if target <= 1e-12 {
        return Ok(Rate::Unbounded);
    }
    Ok(Rate::Finite(coherence_distillation_rate(rho)? / target))
}

/// Rate experiment for `(ρ, diag ρ) → (σ, diag σ)`.
pub fn coherence_experiment(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    metric: Metric,
    eps: f64,
    n_max: usize,
) -> Result<ExperimentConfig> {
    ExperimentConfig::new(
        Dichotomy::new(rho.clone(), dephase(rho))?,
        Dichotomy::new(sigma.clone(), dephase(sigma))?,
        metric,
        eps,
        n_max,
    )
}
