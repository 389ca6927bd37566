//! Test-and-prepare channels and their synthesis from divergence conditions.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::divergences::{d_max, d_min};
use crate::error::{Error, Result};
use crate::linalg::{c64, eigh, support_projector, CMatrix, HermitianMatrix};
use crate::oneshot::{hypothesis_testing, smooth_dmax, Effect};
use crate::states::{check_dims, random_gaussian_matrix, BinaryDistribution, DensityMatrix, Dichotomy, Metric};

/// Slack below which a sufficient condition counts as violated.
pub const CONDITION_SLACK: f64 = 1e-8;
/// The same for the commuting-qubit construction, whose conditions are
/// closed-form ratios.
pub const QUBIT_CONDITION_SLACK: f64 = 1e-10;
/// Tolerance for `Σ K†K = 𝟙`.
pub const COMPLETENESS_TOLERANCE: f64 = 1e-9;
/// Guard for the denominators of the synthesized maps.
pub const DENOMINATOR_GUARD: f64 = 1e-12;

/// A channel acting on density matrices.
pub trait Channel {
    fn d_in(&self) -> usize;
    fn d_out(&self) -> usize;
    fn apply(&self, x: &DensityMatrix) -> Result<DensityMatrix>;
}

/// `X ↦ γ₁ tr(XE) + γ₂ tr(X(𝟙 − E))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestAndPrepareChannel {
    effect: Effect,
    prep_accept: DensityMatrix,
    prep_reject: DensityMatrix,
}

impl TestAndPrepareChannel {
    pub fn new(effect: Effect, prep_accept: DensityMatrix, prep_reject: DensityMatrix) -> Result<Self> {
        check_dims(prep_accept.dim(), prep_reject.dim())?;
        Ok(Self {
            effect,
            prep_accept,
            prep_reject,
        })
    }

    /// Prepares `state` whatever the input.
    pub fn constant(d_in: usize, state: DensityMatrix) -> Self {
        Self {
            effect: Effect::identity(d_in),
            prep_accept: state.clone(),
            prep_reject: state,
        }
    }

    pub fn effect(&self) -> &Effect {
        &self.effect
    }

    pub fn prep_accept(&self) -> &DensityMatrix {
        &self.prep_accept
    }

    pub fn prep_reject(&self) -> &DensityMatrix {
        &self.prep_reject
    }
}

impl Channel for TestAndPrepareChannel {
    fn d_in(&self) -> usize {
        self.effect.dim()
    }

    fn d_out(&self) -> usize {
        self.prep_accept.dim()
    }

    fn apply(&self, x: &DensityMatrix) -> Result<DensityMatrix> {
        check_dims(self.d_in(), x.dim())?;
        let a = self.effect.probability(x).clamp(0.0, 1.0);
        let out = self
            .prep_accept
            .as_hermitian()
            .lin_comb(a, self.prep_reject.as_hermitian(), 1.0 - a);
        Ok(DensityMatrix::new_unchecked(out))
    }
}

/// A channel in Kraus form, `X ↦ Σ K X K†`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralChannel {
    kraus: Vec<CMatrix>,
}

impl GeneralChannel {
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::arg("kraus", "at least one Kraus operator is required"))?;
        let (d_out, d_in) = first.shape();
        if d_out == 0 || d_in == 0 {
            return Err(Error::arg("kraus", "empty Kraus operator"));
        }
        let mut sum = CMatrix::zeros(d_in, d_in);
        for k in &kraus {
            if k.shape() != (d_out, d_in) {
                return Err(Error::arg("kraus", "Kraus operators must share one shape"));
            }
            sum += k.adjoint() * k;
        }
        let dev = (sum - CMatrix::identity(d_in, d_in)).camax();
        if dev > COMPLETENESS_TOLERANCE {
            return Err(Error::arg(
                "kraus",
                format!("sum of K^dagger K deviates from identity by {dev:e}"),
            ));
        }
        Ok(Self { kraus })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            kraus: vec![CMatrix::identity(d, d)],
        }
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }
}

impl Channel for GeneralChannel {
    fn d_in(&self) -> usize {
        self.kraus[0].ncols()
    }

    fn d_out(&self) -> usize {
        self.kraus[0].nrows()
    }

    fn apply(&self, x: &DensityMatrix) -> Result<DensityMatrix> {
        check_dims(self.d_in(), x.dim())?;
        let mut out = CMatrix::zeros(self.d_out(), self.d_out());
        for k in &self.kraus {
            out += k * x.as_hermitian().as_matrix() * k.adjoint();
        }
        Ok(DensityMatrix::new_unchecked(HermitianMatrix::symmetrized(out)))
    }
}

/// A synthesized channel with the margin by which its sufficient condition
/// held. `borderline` flags margins within [`CONDITION_SLACK`] of zero.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub channel: TestAndPrepareChannel,
    pub slack: f64,
    pub borderline: bool,
}

/// `lhs − rhs` with infinities resolved.
fn margin(lhs: f64, rhs: f64) -> f64 {
    if lhs == f64::INFINITY || rhs == f64::NEG_INFINITY {
        f64::INFINITY
    } else if rhs == f64::INFINITY {
        f64::NEG_INFINITY
    } else {
        lhs - rhs
    }
}

fn binary_dmax(p: f64, q: f64) -> f64 {
    let ratio = |a: f64, b: f64| {
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a / b
        }
    };
    ratio(p, q).max(ratio(1.0 - p, 1.0 - q)).log2()
}

/// Turns a Hermitian combination that is a state up to rounding into one.
fn as_state(h: HermitianMatrix) -> Result<(DensityMatrix, bool)> {
    let e = eigh(&h)?;
    let min = e.min_eigenvalue();
    if min < -1e-6 * e.spectral_radius().max(1.0) {
        return Err(Error::Numerical(format!(
            "prepared operator has eigenvalue {min:e}"
        )));
    }
    let clipped = min < -1e-12;
    let w: Vec<f64> = e.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let m = e.reconstruct_with(&w);
    let tr = m.trace();
    Ok((DensityMatrix::new_unchecked(m.scale(1.0 / tr)), clipped))
}

/// The map of the commuting-qubit construction for a binary pair with
/// `p = Pr[accept | ρ₁]`, `q = Pr[accept | σ₁]`, before any condition check.
/// Returns the accept and reject preparations.
fn binary_preparations(p: f64, q: f64, dst: &Dichotomy) -> Result<(DensityMatrix, DensityMatrix, bool)> {
    let (rho2, sigma2) = (dst.rho.as_hermitian(), dst.sigma.as_hermitian());
    if q >= 1.0 - DENOMINATOR_GUARD || (p - q).abs() <= DENOMINATOR_GUARD {
        // ρ₁ = σ₁ on the test: only ρ₂ = σ₂ is reachable.
        return Ok((dst.sigma.clone(), dst.sigma.clone(), false));
    }
    let m = (1.0 - p) / (1.0 - q);
    let (accept, c1) = as_state(rho2.lin_comb(1.0 / (1.0 - m), sigma2, -m / (1.0 - m)))?;
    if q <= DENOMINATOR_GUARD {
        return Ok((accept, dst.sigma.clone(), c1));
    }
    let big = p / q;
    let (reject, c2) = as_state(sigma2.lin_comb(big / (big - 1.0), rho2, -1.0 / (big - 1.0)))?;
    Ok((accept, reject, c1 || c2))
}

/// Exact synthesis for commuting qubit sources: `(p, 1−p)` and `(q, 1−q)`
/// are mapped to `dst` whenever
/// `D_max(p‖q) ≥ D_max(ρ₂‖σ₂)` and `D_max(q‖p) ≥ D_max(σ₂‖ρ₂)`.
pub fn synthesize_exact_qubit(
    src_rho: BinaryDistribution,
    src_sigma: BinaryDistribution,
    dst: &Dichotomy,
) -> Result<Synthesis> {
    let (p, q) = (src_rho.p(), src_sigma.p());
    let forward = margin(binary_dmax(p, q), d_max(dst)?.bits());
    let backward = margin(binary_dmax(q, p), d_max(&dst.swapped())?.bits());
    let slack = forward.min(backward);
    if slack < -QUBIT_CONDITION_SLACK {
        let which = if forward < -QUBIT_CONDITION_SLACK {
            format!("D_max(p||q) >= D_max(rho2||sigma2) fails by {:e}", -forward)
        } else {
            format!("D_max(q||p) >= D_max(sigma2||rho2) fails by {:e}", -backward)
        };
        return Err(Error::Precondition(which));
    }
    // Without loss of generality p ≥ q: otherwise relabel the outcomes,
    // i.e. pre-compose with the bit flip.
    let flip = p < q;
    let (pp, qq) = if flip { (1.0 - p, 1.0 - q) } else { (p, q) };
    let (accept, reject, clipped) = binary_preparations(pp, qq, dst)?;
    let first = HermitianMatrix::from_real_diagonal(if flip { &[0.0, 1.0] } else { &[1.0, 0.0] });
    Ok(Synthesis {
        channel: TestAndPrepareChannel::new(Effect::new_unchecked(first), accept, reject)?,
        slack,
        borderline: clipped || slack < QUBIT_CONDITION_SLACK,
    })
}

/// Exact synthesis under `D_min(ρ₁‖σ₁) ≥ D_max(ρ₂‖σ₂)`, or, tried second,
/// `D_min(σ₁‖ρ₁) ≥ D_max(σ₂‖ρ₂)`: measure the support projector of the
/// first state, then apply the qubit construction.
pub fn synthesize_exact(src: &Dichotomy, dst: &Dichotomy) -> Result<Synthesis> {
    let first = margin(d_min(src)?.bits(), d_max(dst)?.bits());
    let second = margin(d_min(&src.swapped())?.bits(), d_max(&dst.swapped())?.bits());
    let (s, d, slack) = if first >= -CONDITION_SLACK {
        (src.clone(), dst.clone(), first)
    } else if second >= -CONDITION_SLACK {
        (src.swapped(), dst.swapped(), second)
    } else {
        return Err(Error::Precondition(format!(
            "D_min(rho1||sigma1) - D_max(rho2||sigma2) = {first:.6e} and \
             D_min(sigma1||rho1) - D_max(sigma2||rho2) = {second:.6e}; both negative"
        )));
    };
    let pi = support_projector(s.rho.as_hermitian())?;
    let q = pi.inner(s.sigma.as_hermitian()).clamp(0.0, 1.0);
    let (accept, reject, clipped) = binary_preparations(1.0, q, &d)?;
    Ok(Synthesis {
        channel: TestAndPrepareChannel::new(Effect::new_unchecked(pi), accept, reject)?,
        slack,
        borderline: clipped || slack < CONDITION_SLACK,
    })
}

/// Approximate synthesis under `D_h^{ε₁}(ρ₁‖σ₁) ≥ D_max^{ε₂,Δ}(ρ₂‖σ₂)`:
/// the channel is exact on `σ₁` and moves `ρ₁` within `ε₁ + ε₂` (trace
/// distance) or `√ε₁ + ε₂` (purified distance) of `ρ₂`.
pub fn synthesize_approx(src: &Dichotomy, dst: &Dichotomy, eps1: f64, eps2: f64, metric: Metric) -> Result<Synthesis> {
    let test = hypothesis_testing(src, eps1)?;
    let smooth = smooth_dmax(dst, eps2, metric)?;
    let slack = margin(test.value_bits, smooth.value_bits);
    if slack < -CONDITION_SLACK {
        return Err(Error::Precondition(format!(
            "D_h^{eps1}(rho1||sigma1) = {:.9} is below D_max^({eps2},{})(rho2||sigma2) = {:.9}",
            test.value_bits,
            metric.name(),
            smooth.value_bits
        )));
    }
    let t = test.type2;
    let den = 1.0 - t;
    if den <= DENOMINATOR_GUARD {
        // σ₁ is accepted with certainty, so D_max^{ε₂} = 0 and σ₂ itself
        // lies in the ball.
        return Ok(Synthesis {
            channel: TestAndPrepareChannel::constant(src.dim(), dst.sigma.clone()),
            slack,
            borderline: slack < CONDITION_SLACK,
        });
    }
    // σ₂ ⪰ 2^{−D_max(ρ̃₂‖σ₂)} ρ̃₂ ⪰ t ρ̃₂ keeps the reject branch positive.
    // At the margin, mix ρ̃₂ towards σ₂ until it holds again; this keeps
    // the σ-leg exact.
    let mut witness = smooth.smoothed_state.clone();
    let r = (-smooth.value_bits).exp2();
    let mut mixed = false;
    if t > r {
        let lambda = ((t - r) / (t * (1.0 - r))).clamp(0.0, 1.0);
        witness = witness.mix(&dst.sigma, lambda)?;
        mixed = true;
    }
    let reject = dst
        .sigma
        .as_hermitian()
        .lin_comb(1.0 / den, witness.as_hermitian(), -t / den);
    let (reject, clipped) = as_state(reject)?;
    Ok(Synthesis {
        channel: TestAndPrepareChannel::new(test.optimizer, witness, reject)?,
        slack,
        borderline: mixed || clipped || slack < CONDITION_SLACK,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformationReport {
    pub sigma_error: f64,
    pub rho_error: f64,
}

/// Distances of `𝓔(σ₁)` from `σ₂` and of `𝓔(ρ₁)` from `ρ₂`.
pub fn verify_transformation(
    ch: &dyn Channel,
    src: &Dichotomy,
    dst: &Dichotomy,
    metric: Metric,
) -> Result<TransformationReport> {
    check_dims(ch.d_in(), src.dim())?;
    check_dims(ch.d_out(), dst.dim())?;
    Ok(TransformationReport {
        sigma_error: metric.distance(&ch.apply(&src.sigma)?, &dst.sigma)?,
        rho_error: metric.distance(&ch.apply(&src.rho)?, &dst.rho)?,
    })
}

/// Stinespring-style random channel: a seeded random isometry
/// `ℂ^{d_in} → ℂ^{d_out} ⊗ ℂ^{env}` cut into `env` Kraus operators.
pub fn random_channel(d_in: usize, d_out: usize, env_dim: usize, seed: u64) -> Result<GeneralChannel> {
    if d_in == 0 || d_out == 0 || env_dim == 0 {
        return Err(Error::arg("dims", "channel dimensions must be positive"));
    }
    if d_out * env_dim < d_in {
        return Err(Error::arg(
            "env_dim",
            format!("an isometry needs d_out * env_dim >= d_in, got {d_out} * {env_dim} < {d_in}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_gaussian_matrix(&mut rng, d_out * env_dim, d_in);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // Fix the phases so that R has a positive diagonal: Haar-distributed.
    let phases = DMatrix::from_fn(d_in, d_in, |i, j| {
        if i == j {
            let v = r[(i, i)];
            if v.norm() > 0.0 {
                v / v.norm()
            } else {
                c64(1.0, 0.0)
            }
        } else {
            c64(0.0, 0.0)
        }
    });
    let v = q * phases;
    let kraus = (0..env_dim)
        .map(|k| CMatrix::from_fn(d_out, d_in, |i, j| v[(i * env_dim + k, j)]))
        .collect();
    GeneralChannel::new(kraus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::relative_entropy;
    use crate::states::{fidelity, random_density, random_dichotomy, trace_distance};
    use approx::assert_abs_diff_eq;

    fn classical(p: &[f64], q: &[f64]) -> Dichotomy {
        Dichotomy::classical(p, q).unwrap()
    }

    fn bin(p: f64) -> BinaryDistribution {
        BinaryDistribution::new(p).unwrap()
    }

    fn assert_exact(ch: &TestAndPrepareChannel, src: &Dichotomy, dst: &Dichotomy) {
        let out_r = ch.apply(&src.rho).unwrap();
        let out_s = ch.apply(&src.sigma).unwrap();
        assert!(out_r.as_hermitian().sub(dst.rho.as_hermitian()).max_abs_entry() < 1e-9);
        assert!(out_s.as_hermitian().sub(dst.sigma.as_hermitian()).max_abs_entry() < 1e-9);
    }

    #[test]
    fn apply_examples() {
        let x = random_density(3, 3, 1).unwrap();
        let id = GeneralChannel::identity(3);
        assert_eq!(id.apply(&x).unwrap(), x);

        let a = random_density(2, 2, 2).unwrap();
        let b = random_density(2, 2, 3).unwrap();
        let ch = TestAndPrepareChannel::new(Effect::identity(3), a.clone(), b.clone()).unwrap();
        assert_eq!(ch.apply(&x).unwrap(), a);
        let half = Effect::new(HermitianMatrix::identity(3).scale(0.5)).unwrap();
        let ch = TestAndPrepareChannel::new(half, a.clone(), b.clone()).unwrap();
        let expect = a.as_hermitian().lin_comb(0.5, b.as_hermitian(), 0.5);
        assert!(ch.apply(&x).unwrap().as_hermitian().sub(&expect).max_abs_entry() < 1e-15);
        assert!(ch.apply(&random_density(2, 2, 4).unwrap()).is_err());
    }

    #[test]
    fn kraus_validation() {
        let bad = vec![CMatrix::identity(2, 2) * c64(0.5, 0.0)];
        assert!(GeneralChannel::new(bad).is_err());
        assert!(GeneralChannel::new(vec![]).is_err());
    }

    #[test]
    fn qubit_synthesis_example() {
        let dst = classical(&[0.6, 0.4], &[0.5, 0.5]);
        let s = synthesize_exact_qubit(bin(0.9), bin(0.5), &dst).unwrap();
        let src = Dichotomy::new(bin(0.9).to_state(), bin(0.5).to_state()).unwrap();
        assert_exact(&s.channel, &src, &dst);
        assert!(!s.borderline);
    }

    #[test]
    fn qubit_synthesis_degenerate_cases() {
        // p = q: only ρ₂ = σ₂ is reachable, by a constant channel.
        let r = random_density(3, 3, 7).unwrap();
        let same = Dichotomy::new(r.clone(), r.clone()).unwrap();
        let s = synthesize_exact_qubit(bin(0.3), bin(0.3), &same).unwrap();
        assert_eq!(s.channel.prep_accept(), &r);
        assert_eq!(s.channel.prep_reject(), &r);
        let other = random_dichotomy(3, 8).unwrap();
        assert!(matches!(
            synthesize_exact_qubit(bin(0.3), bin(0.3), &other),
            Err(Error::Precondition(_))
        ));

        // Perfectly distinguishable source reaches anything.
        let src = Dichotomy::new(bin(1.0).to_state(), bin(0.0).to_state()).unwrap();
        let dst = random_dichotomy(3, 9).unwrap();
        let s = synthesize_exact_qubit(bin(1.0), bin(0.0), &dst).unwrap();
        assert_exact(&s.channel, &src, &dst);

        // p < q uses the flipped test.
        let src = Dichotomy::new(bin(0.1).to_state(), bin(0.5).to_state()).unwrap();
        let dst = classical(&[0.4, 0.6], &[0.5, 0.5]);
        let s = synthesize_exact_qubit(bin(0.1), bin(0.5), &dst).unwrap();
        assert_abs_diff_eq!(s.channel.effect().as_hermitian().get(1, 1).re, 1.0);
        assert_exact(&s.channel, &src, &dst);

        // q = 0 with p < 1.
        let src = Dichotomy::new(bin(0.7).to_state(), bin(0.0).to_state()).unwrap();
        let dst = classical(&[0.5, 0.5], &[0.2, 0.8]);
        let s = synthesize_exact_qubit(bin(0.7), bin(0.0), &dst).unwrap();
        assert_exact(&s.channel, &src, &dst);
    }

    #[test]
    fn qubit_synthesis_on_random_instances() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut done = 0;
        while done < 50 {
            let p: f64 = rng.random_range(0.0..1.0);
            let q: f64 = rng.random_range(0.0..1.0);
            let dst = random_dichotomy(2 + done % 2, rng.random()).unwrap();
            // Pull dst towards a common state until condition (ii) holds.
            let t: f64 = rng.random_range(0.0..1.0);
            let mid = dst.rho.mix(&dst.sigma, 0.5).unwrap();
            let dst = Dichotomy::new(dst.rho.mix(&mid, t).unwrap(), dst.sigma.mix(&mid, t).unwrap()).unwrap();
            match synthesize_exact_qubit(bin(p), bin(q), &dst) {
                Ok(s) => {
                    let src = Dichotomy::new(bin(p).to_state(), bin(q).to_state()).unwrap();
                    assert_exact(&s.channel, &src, &dst);
                    done += 1;
                }
                Err(Error::Precondition(_)) => {
                    let fwd = binary_dmax(p, q) - d_max(&dst).unwrap().bits();
                    let bwd = binary_dmax(q, p) - d_max(&dst.swapped()).unwrap().bits();
                    assert!(fwd.min(bwd) < 0.0);
                }
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn support_projector_synthesis_examples() {
        let src = Dichotomy::new(DensityMatrix::basis(2, 0).unwrap(), DensityMatrix::maximally_mixed(2)).unwrap();
        let dst = classical(&[0.75, 0.25], &[0.5, 0.5]);
        let s = synthesize_exact(&src, &dst).unwrap();
        assert_exact(&s.channel, &src, &dst);
        assert_abs_diff_eq!(s.slack, 1.0 - 1.5f64.log2(), epsilon = 1e-9);

        let full = random_dichotomy(2, 3).unwrap();
        let err = synthesize_exact(&full, &random_dichotomy(2, 4).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Precondition(ref m) if m.contains("both negative")));

        let r = random_density(2, 2, 11).unwrap();
        let trivial = Dichotomy::new(r.clone(), r.clone()).unwrap();
        let s = synthesize_exact(&full, &trivial).unwrap();
        assert_exact(&s.channel, &full, &trivial);

        // Only the swapped condition holds.
        let src = Dichotomy::new(DensityMatrix::maximally_mixed(2), DensityMatrix::basis(2, 0).unwrap()).unwrap();
        let dst = classical(&[0.5, 0.5], &[0.75, 0.25]);
        let s = synthesize_exact(&src, &dst).unwrap();
        assert_exact(&s.channel, &src, &dst);
    }

    #[test]
    fn approx_examples() {
        let src = Dichotomy::new(DensityMatrix::basis(2, 0).unwrap(), DensityMatrix::maximally_mixed(2)).unwrap();
        let dst = Dichotomy::new(DensityMatrix::plus(), DensityMatrix::maximally_mixed(2)).unwrap();
        let s = synthesize_approx(&src, &dst, 0.2, 0.1, Metric::TraceDistance).unwrap();
        let rep = verify_transformation(&s.channel, &src, &dst, Metric::TraceDistance).unwrap();
        assert!(rep.sigma_error <= 1e-8);
        assert!(rep.rho_error <= 0.3 + 1e-8);

        let d = random_dichotomy(2, 21).unwrap();
        for metric in [Metric::TraceDistance, Metric::PurifiedDistance] {
            if let Ok(s) = synthesize_approx(&d, &d, 0.1, 0.1, metric) {
                let rep = verify_transformation(&s.channel, &d, &d, metric).unwrap();
                let bound = match metric {
                    Metric::TraceDistance => 0.2,
                    Metric::PurifiedDistance => 0.1f64.sqrt() + 0.1,
                };
                assert!(rep.sigma_error <= 1e-8);
                assert!(rep.rho_error <= bound + 1e-8);
            }
        }

        let src = classical(&[0.9, 0.1], &[0.5, 0.5]).tensor_power(6).unwrap();
        let dst = classical(&[0.8, 0.2], &[0.5, 0.5]);
        for metric in [Metric::TraceDistance, Metric::PurifiedDistance] {
            let s = synthesize_approx(&src, &dst, 0.05, 0.05, metric).unwrap();
            let rep = verify_transformation(&s.channel, &src, &dst, metric).unwrap();
            let bound = match metric {
                Metric::TraceDistance => 0.1,
                Metric::PurifiedDistance => 0.05f64.sqrt() + 0.05,
            };
            assert!(rep.sigma_error <= 1e-8);
            assert!(rep.rho_error <= bound + 1e-8);
            let dpi = relative_entropy(&Dichotomy::new(
                s.channel.apply(&src.rho).unwrap(),
                s.channel.apply(&src.sigma).unwrap(),
            ).unwrap()).unwrap().bits();
            assert!(dpi <= relative_entropy(&src).unwrap().bits() + 1e-8);
        }
    }

    #[test]
    fn approx_refusal_names_both_values() {
        let src = random_dichotomy(2, 30).unwrap();
        let dst = classical(&[0.999, 0.001], &[0.001, 0.999]);
        match synthesize_approx(&src, &dst, 0.05, 0.05, Metric::TraceDistance) {
            Err(Error::Precondition(m)) => assert!(m.contains("D_h") && m.contains("D_max")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn approx_cp_certificate() {
        for seed in 0..10u64 {
            let src = random_dichotomy(2, 100 + seed).unwrap();
            let dst = random_dichotomy(2, 200 + seed).unwrap();
            let mid = dst.rho.mix(&dst.sigma, 0.5).unwrap();
            let dst = Dichotomy::new(dst.rho.mix(&mid, 0.8).unwrap(), dst.sigma.clone()).unwrap();
            let Ok(s) = synthesize_approx(&src, &dst, 0.3, 0.1, Metric::TraceDistance) else {
                continue;
            };
            let t = s.channel.effect().probability(&src.sigma);
            let cert = dst
                .sigma
                .as_hermitian()
                .sub(&s.channel.prep_accept().as_hermitian().scale(t));
            assert!(eigh(&cert).unwrap().min_eigenvalue() >= -1e-9);
        }
    }

    #[test]
    fn fuchs_van_de_graaf_between_contracts() {
        let src = classical(&[0.9, 0.1], &[0.5, 0.5]).tensor_power(4).unwrap();
        let dst = classical(&[0.7, 0.3], &[0.5, 0.5]);
        let s = synthesize_approx(&src, &dst, 0.1, 0.1, Metric::TraceDistance).unwrap();
        let out = s.channel.apply(&src.rho).unwrap();
        let t = trace_distance(&out, &dst.rho).unwrap();
        let f = fidelity(&out, &dst.rho).unwrap();
        let p = crate::states::purified_distance(&out, &dst.rho).unwrap();
        assert!(1.0 - f.sqrt() <= t + 1e-12);
        assert!(t <= p + 1e-12);
    }

    #[test]
    fn verify_examples() {
        let d = random_dichotomy(3, 40).unwrap();
        let rep = verify_transformation(&GeneralChannel::identity(3), &d, &d, Metric::TraceDistance).unwrap();
        assert_eq!((rep.sigma_error, rep.rho_error), (0.0, 0.0));
        let dst = random_dichotomy(2, 41).unwrap();
        let ch = TestAndPrepareChannel::constant(3, dst.sigma.clone());
        let rep = verify_transformation(&ch, &d, &dst, Metric::TraceDistance).unwrap();
        assert_eq!(rep.sigma_error, 0.0);
        assert_abs_diff_eq!(rep.rho_error, trace_distance(&dst.sigma, &dst.rho).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn random_channels() {
        let u = random_channel(3, 3, 1, 4).unwrap();
        let k = &u.kraus()[0];
        assert!((k * k.adjoint() - CMatrix::identity(3, 3)).camax() < 1e-12);
        let c = random_channel(2, 3, 2, 5).unwrap();
        let mut sum = CMatrix::zeros(2, 2);
        for k in c.kraus() {
            sum += k.adjoint() * k;
        }
        assert!((sum - CMatrix::identity(2, 2)).camax() < 1e-9);
        assert_eq!(random_channel(2, 3, 2, 5).unwrap(), c);
        assert!(random_channel(4, 1, 2, 0).is_err());
        let x = random_density(2, 2, 9).unwrap();
        DensityMatrix::new(c.apply(&x).unwrap().into_hermitian()).unwrap();
    }

    #[test]
    fn data_processing_under_random_channels() {
        for seed in 0..10u64 {
            let d = random_dichotomy(2, 500 + seed).unwrap();
            let ch = random_channel(2, 2, 2, 600 + seed).unwrap();
            let out = Dichotomy::new(ch.apply(&d.rho).unwrap(), ch.apply(&d.sigma).unwrap()).unwrap();
            let before = hypothesis_testing(&d, 0.2).unwrap().value_bits;
            let after = hypothesis_testing(&out, 0.2).unwrap().value_bits;
            assert!(after <= before + 1e-6);
            for metric in [Metric::TraceDistance, Metric::PurifiedDistance] {
                let before = smooth_dmax(&d, 0.2, metric).unwrap().value_bits;
                let after = smooth_dmax(&out, 0.2, metric).unwrap().value_bits;
                assert!(after <= before + 1e-6, "{metric:?} {after} > {before}");
            }
        }
    }
}
