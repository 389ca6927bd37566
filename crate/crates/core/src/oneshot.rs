//! Smoothed one-shot divergences: the hypothesis-testing divergence `D_h^ε`
//! and the smooth max-divergence `D_max^{ε,Δ}`, plus numerical checks of the
//! inequalities linking them to each other and to the Rényi families.

use serde::Serialize;

use crate::blocks::{for_each_composition, ln_factorial_table, BlockDichotomy, MAX_BLOCKS};
use crate::conic::{self, BlockId, LinearTerm, SdpProblem, SdpStatus};
use crate::divergences::{d_max, d_min, petz_renyi, sandwiched_renyi};
use crate::error::{Error, Result};
use crate::linalg::{eigh, hermitian_basis, log2_add, log2_sub, spectral_map, CMatrix, HermitianMatrix, SUPPORT_CUTOFF};
use crate::states::{validate_probabilities, DensityMatrix, Dichotomy, Metric};

/// Bisection tolerance on `log₂ μ` for the fallback smoothing search.
pub const BISECTION_TOLERANCE: f64 = 1e-7;

/// Tolerance for `0 ⪯ E ⪯ 𝟙`.
pub const EFFECT_TOLERANCE: f64 = 1e-9;

/// A two-outcome measurement operator `0 ⪯ E ⪯ 𝟙`.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    mat: HermitianMatrix,
}

impl Effect {
    pub fn new(mat: HermitianMatrix) -> Result<Self> {
        let e = eigh(&mat)?;
        if e.min_eigenvalue() < -EFFECT_TOLERANCE || e.max_eigenvalue() > 1.0 + EFFECT_TOLERANCE {
            return Err(Error::arg(
                "effect",
                format!(
                    "eigenvalues must lie in [0, 1], found [{:e}, {:e}]",
                    e.min_eigenvalue(),
                    e.max_eigenvalue()
                ),
            ));
        }
        Ok(Self { mat })
    }

    pub(crate) fn new_unchecked(mat: HermitianMatrix) -> Self {
        Self { mat }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mat: HermitianMatrix::identity(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.mat
    }

    /// `𝟙 − E`.
    pub fn complement(&self) -> Self {
        Self {
            mat: HermitianMatrix::identity(self.dim()).sub(&self.mat),
        }
    }

    /// `tr(ρE)`.
    pub fn probability(&self, rho: &DensityMatrix) -> f64 {
        self.mat.inner(rho.as_hermitian())
    }
}

fn check_eps(eps: f64, name: &'static str) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::arg(name, format!("{eps} outside (0, 1)")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct HypothesisTestResult {
    pub value_bits: f64,
    pub optimizer: Effect,
    /// `1 − tr ρQ`.
    pub type1: f64,
    /// `tr σQ`.
    pub type2: f64,
    /// Distance between `type2` and the best Lagrangian dual bound found.
    pub duality_gap: f64,
}

/// Hypothesis test on a block pair; the optimizer is stored per block.
#[derive(Debug, Clone)]
pub struct BlockHypothesisTest {
    pub value_bits: f64,
    pub optimizer: Vec<HermitianMatrix>,
    pub type1: f64,
    pub type2: f64,
    pub duality_gap: f64,
}

struct NpPoint {
    accept: f64,
    type2: f64,
    dual_excess: f64,
}

/// `Σ m tr ρ P₊`, `Σ m tr σ P₊` and `Σ m tr(μρ − σ)₊` at `μ`.
fn np_eval(bd: &BlockDichotomy, mu: f64, projs: Option<&mut Vec<HermitianMatrix>>) -> Result<NpPoint> {
    let mut out = NpPoint {
        accept: 0.0,
        type2: 0.0,
        dual_excess: 0.0,
    };
    let mut keep = Vec::new();
    for b in &bd.blocks {
        let e = eigh(&b.rho.lin_comb(mu, &b.sigma, -1.0))?;
        let cut = SUPPORT_CUTOFF * (mu * b.rho.frobenius_norm()).max(b.sigma.frobenius_norm());
        let p = e.projector_where(|l| l > cut);
        out.accept += b.multiplicity * p.inner(&b.rho);
        out.type2 += b.multiplicity * p.inner(&b.sigma);
        out.dual_excess += b.multiplicity * e.eigenvalues.iter().filter(|&&l| l > 0.0).sum::<f64>();
        keep.push(p);
    }
    if let Some(v) = projs {
        *v = keep;
    }
    Ok(out)
}

/// Neyman–Pearson solution of `min Σ m tr σQ` over `0 ⪯ Q ⪯ 𝟙` with
/// `Σ m tr ρQ = 1 − ε`. Bisection on `μ` over the monotone map
/// `μ ↦ tr ρ P₊(μρ − σ)`, then interpolation between the bracketing
/// projectors to meet the constraint exactly.
pub fn hypothesis_testing_blocks(bd: &BlockDichotomy, eps: f64) -> Result<BlockHypothesisTest> {
    check_eps(eps, "eps")?;
    let target = 1.0 - eps;

    // Part of ρ outside the support of σ is free to accept.
    let mut kernel = Vec::with_capacity(bd.blocks.len());
    let mut leak = 0.0;
    for b in &bd.blocks {
        let e = eigh(&b.sigma)?;
        let cut = SUPPORT_CUTOFF * e.spectral_radius().max(b.rho.frobenius_norm());
        let k = e.projector_where(|l| l <= cut);
        leak += b.multiplicity * k.inner(&b.rho);
        kernel.push(k);
    }
    if leak >= target {
        let s = target / leak;
        let optimizer: Vec<HermitianMatrix> = kernel.iter().map(|k| k.scale(s)).collect();
        let type2 = bd.inner(&optimizer, &bd.sigma_blocks()).max(0.0);
        return Ok(BlockHypothesisTest {
            value_bits: if type2 > 0.0 { -type2.log2() } else { f64::INFINITY },
            type1: 1.0 - bd.inner(&optimizer, &bd.rho_blocks()),
            type2,
            optimizer,
            duality_gap: type2,
        });
    }

    let f = |lmu: f64| np_eval(bd, lmu.exp2(), None);
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    if f(0.0)?.accept >= target {
        while f(lo)?.accept >= target {
            lo -= 1.0;
            if lo < -1000.0 {
                return Err(Error::Numerical("no lower bracket for the test threshold".into()));
            }
        }
        hi = lo + 1.0;
    } else {
        while f(hi)?.accept < target {
            hi += 1.0;
            if hi > 1000.0 {
                return Err(Error::Numerical("no upper bracket for the test threshold".into()));
            }
        }
        lo = hi - 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo < 1e-15 {
            break;
        }
        if f(mid)?.accept >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let mut p_lo = Vec::new();
    let mut p_hi = Vec::new();
    let a = np_eval(bd, lo.exp2(), Some(&mut p_lo))?;
    let b = np_eval(bd, hi.exp2(), Some(&mut p_hi))?;
    let x = if b.accept > a.accept {
        ((target - a.accept) / (b.accept - a.accept)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let optimizer: Vec<HermitianMatrix> = p_lo
        .iter()
        .zip(&p_hi)
        .map(|(l, h)| l.lin_comb(1.0 - x, h, x))
        .collect();
    let type2 = bd.inner(&optimizer, &bd.sigma_blocks()).max(0.0);
    let type1 = 1.0 - bd.inner(&optimizer, &bd.rho_blocks());
    let dual = (lo.exp2() * target - a.dual_excess).max(hi.exp2() * target - b.dual_excess);
    Ok(BlockHypothesisTest {
        value_bits: if type2 > 0.0 { -type2.log2() } else { f64::INFINITY },
        optimizer,
        type1,
        type2,
        duality_gap: (type2 - dual).abs(),
    })
}

/// `D_h^ε(ρ‖σ) = −log min{tr σQ : 0 ⪯ Q ⪯ 𝟙, tr ρQ ≥ 1 − ε}`.
pub fn hypothesis_testing(d: &Dichotomy, eps: f64) -> Result<HypothesisTestResult> {
    let bd = BlockDichotomy::from_dichotomy(d);
    let r = hypothesis_testing_blocks(&bd, eps)?;
    let q = bd.expand(&r.optimizer).expect("explicit layout");
    Ok(HypothesisTestResult {
        value_bits: r.value_bits,
        optimizer: Effect::new_unchecked(q),
        type1: r.type1,
        type2: r.type2,
        duality_gap: r.duality_gap,
    })
}

/// Result of the semidefinite formulation of `D_h^ε`.
#[derive(Debug, Clone, Serialize)]
pub struct SdpHypothesisTest {
    pub value_bits: f64,
    pub type2: f64,
    pub duality_gap: f64,
    pub status: SdpStatus,
}

/// `D_h^ε` by the interior-point solver, as an independent check of the
/// Neyman–Pearson route.
pub fn hypothesis_testing_sdp(d: &Dichotomy, eps: f64) -> Result<SdpHypothesisTest> {
    check_eps(eps, "eps")?;
    let bd = BlockDichotomy::from_dichotomy(d);
    let mut p = SdpProblem::new();
    let mut rho_terms = Vec::new();
    for b in &bd.blocks {
        let dim = b.dim();
        let q = p.add_block(dim);
        let s = p.add_block(dim);
        p.add_cost(q, &b.sigma, b.multiplicity);
        rho_terms.push(LinearTerm::weighted(q, &b.rho, 0, b.multiplicity));
        p.add_matrix_equality(&[(q, 0, 1.0), (s, 0, 1.0)], &[], &HermitianMatrix::identity(dim));
    }
    p.add_constraint(rho_terms, 1.0 - eps);
    let sol = conic::solve(&p)?;
    let type2 = sol.primal_value.max(0.0);
    Ok(SdpHypothesisTest {
        value_bits: -type2.log2(),
        type2,
        duality_gap: sol.gap,
        status: sol.status,
    })
}

#[derive(Debug, Clone)]
pub struct SmoothMaxResult {
    pub value_bits: f64,
    pub smoothed_state: DensityMatrix,
    pub metric: Metric,
    pub achieved_distance: f64,
}

/// Smooth max-divergence on a block pair, with the witness kept per block.
#[derive(Debug, Clone)]
pub struct BlockSmoothMax {
    pub value_bits: f64,
    pub witness: Vec<HermitianMatrix>,
    pub metric: Metric,
    pub achieved_distance: f64,
}

fn block_distance(bd: &BlockDichotomy, a: &[HermitianMatrix], b: &[HermitianMatrix], metric: Metric) -> Result<f64> {
    match metric {
        Metric::TraceDistance => bd.trace_distance(a, b),
        Metric::PurifiedDistance => bd.purified_distance(a, b),
    }
}

/// `max_k log λ_max(σ_k^{−1/2} X_k σ_k^{−1/2})`.
fn block_dmax(bd: &BlockDichotomy, x: &[HermitianMatrix]) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for (b, xk) in bd.blocks.iter().zip(x) {
        let e = eigh(&b.sigma)?;
        let inv = spectral_map(&e, |v| v.powf(-0.5), true)?;
        let l = eigh(&xk.sandwich(&inv))?.max_eigenvalue();
        if l > 0.0 {
            best = best.max(l.log2());
        }
    }
    Ok(best.max(0.0))
}

/// Clips negative eigenvalues and renormalizes a block state.
fn clean_state(bd: &BlockDichotomy, x: &[HermitianMatrix]) -> Result<Vec<HermitianMatrix>> {
    let mut out = Vec::with_capacity(x.len());
    for xk in x {
        let e = eigh(xk)?;
        let w: Vec<f64> = e.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        out.push(e.reconstruct_with(&w));
    }
    let t = bd.trace(&out);
    if !(t > 0.0) {
        return Err(Error::Numerical("smoothing witness has zero trace".into()));
    }
    Ok(out.into_iter().map(|m| m.scale(1.0 / t)).collect())
}

fn require_full_support(bd: &BlockDichotomy) -> Result<()> {
    // Blocks of a reduced power legitimately span many orders of magnitude;
    // the relative cutoff only applies to explicit matrices.
    let rel = if bd.is_explicit() { SUPPORT_CUTOFF } else { 0.0 };
    for b in &bd.blocks {
        let e = eigh(&b.sigma)?;
        if e.min_eigenvalue() <= rel * e.max_eigenvalue() {
            return Err(Error::Precondition(
                "smooth max-divergence needs sigma with full support".into(),
            ));
        }
    }
    Ok(())
}

/// `D_max^{ε,Δ}(ρ‖σ)`: minimizes `μ` jointly with the witness `ρ̃` in one
/// linear program: `ρ̃ ⪯ μσ` is linear in `(μ, ρ̃)`.
pub fn smooth_dmax_blocks(bd: &BlockDichotomy, eps: f64, metric: Metric) -> Result<BlockSmoothMax> {
    check_eps(eps, "eps")?;
    require_full_support(bd)?;
    let rho = bd.rho_blocks();
    let sigma = bd.sigma_blocks();
    let base = block_distance(bd, &rho, &sigma, metric)?;
    if base <= eps {
        return Ok(BlockSmoothMax {
            value_bits: 0.0,
            witness: sigma,
            metric,
            achieved_distance: base,
        });
    }
    let raw = if metric == Metric::TraceDistance && bd.blocks.iter().all(|b| b.dim() == 1) {
        classical_trace_witness(bd, eps)?
    } else {
        sdp_witness(bd, eps, metric)?
    };
    let mut witness = clean_state(bd, &raw)?;
    let mut achieved_distance = block_distance(bd, &rho, &witness, metric)?;
    if achieved_distance > eps {
        // Solver round-off can leave the witness just outside the ball;
        // pull it back along the segment towards ρ.
        let t = match metric {
            Metric::TraceDistance => 1.0 - eps / achieved_distance,
            Metric::PurifiedDistance => {
                let f0 = (1.0 - achieved_distance * achieved_distance).max(0.0).sqrt();
                let f1 = (1.0 - eps * eps).sqrt();
                (f1 - f0) / (1.0 - f0)
            }
        };
        let t = (t * (1.0 + 1e-9) + 1e-15).min(1.0);
        witness = witness.iter().zip(&rho).map(|(w, r)| w.lin_comb(1.0 - t, r, t)).collect();
        achieved_distance = block_distance(bd, &rho, &witness, metric)?;
    }
    Ok(BlockSmoothMax {
        value_bits: block_dmax(bd, &witness)?,
        witness,
        metric,
        achieved_distance,
    })
}

pub fn smooth_dmax(d: &Dichotomy, eps: f64, metric: Metric) -> Result<SmoothMaxResult> {
    let bd = BlockDichotomy::from_dichotomy(d);
    let r = smooth_dmax_blocks(&bd, eps, metric)?;
    Ok(SmoothMaxResult {
        value_bits: r.value_bits,
        smoothed_state: bd.expand_state(&r.witness).expect("explicit layout"),
        metric,
        achieved_distance: r.achieved_distance,
    })
}

/// Commuting case: cap every entry at `λq`, shaving exactly `ε` of mass,
/// and spread the removed mass over entries below the cap.
fn classical_trace_witness(bd: &BlockDichotomy, eps: f64) -> Result<Vec<HermitianMatrix>> {
    let pair = ClassicalPair::from_blocks(bd)?;
    let lambda = pair.dmax_trace_lambda(Level::new(eps)?)?.exp2();
    let p: Vec<f64> = bd.blocks.iter().map(|b| b.rho.get(0, 0).re).collect();
    let q: Vec<f64> = bd.blocks.iter().map(|b| b.sigma.get(0, 0).re).collect();
    let m = bd.multiplicities();
    let mut removed = 0.0;
    let mut room = 0.0;
    for i in 0..p.len() {
        removed += m[i] * (p[i] - lambda * q[i]).max(0.0);
        room += m[i] * (lambda * q[i] - p[i]).max(0.0);
    }
    let fill = if room > 0.0 { removed / room } else { 0.0 };
    Ok((0..p.len())
        .map(|i| {
            let v = p[i].min(lambda * q[i]) + fill * (lambda * q[i] - p[i]).max(0.0);
            HermitianMatrix::from_real_diagonal(&[v])
        })
        .collect())
}

/// `W + T R T = μ𝟙` for Hermitian `T`, i.e. `T R T ⪯ μ𝟙` with slack `W`;
/// `μ` is either a variable or a constant.
fn add_whitened_bound(
    p: &mut SdpProblem,
    w: BlockId,
    r: (BlockId, usize),
    mu: Bound,
    t: &HermitianMatrix,
) {
    let d = t.dim();
    for e in hermitian_basis(d) {
        let mut em = CMatrix::zeros(d, d);
        for &(i, j, v) in &e {
            em[(i, j)] += v;
        }
        let em = HermitianMatrix::symmetrized(em);
        let mut terms = vec![
            LinearTerm::weighted(w, &em, 0, 1.0),
            LinearTerm::weighted(r.0, &em.sandwich(t), r.1, 1.0),
        ];
        let rhs = match mu {
            Bound::Variable(b) => {
                terms.push(LinearTerm::scalar(b, -em.trace()));
                0.0
            }
            Bound::Fixed(v) => v * em.trace(),
        };
        p.add_constraint(terms, rhs);
    }
}

#[derive(Debug, Clone, Copy)]
enum Bound {
    Variable(BlockId),
    Fixed(f64),
}

/// What the smoothing program optimizes.
#[derive(Debug, Clone, Copy)]
enum Smoothing {
    /// Smallest `μ` with a witness inside the ε-ball.
    MinBound { eps: f64 },
    /// Closest witness with `ρ̃ ⪯ μ·2^{D_max(ρ‖σ)}·σ`, `μ` given.
    Closest { mu: f64 },
}

struct SmoothingSolution {
    witness: Vec<HermitianMatrix>,
    /// `μ` relative to `2^{D_max(ρ‖σ)}`, or the optimal trace distance /
    /// root fidelity when `μ` is fixed.
    value: f64,
}

/// ρ̃ ⪯ μσ is imposed in σ-whitened form, with μ measured in units of the
/// unsmoothed bound 2^{D_max(ρ‖σ)}; this keeps the slack of order one on
/// tensor powers. Each block is normalized to unit trace, its weight
/// absorbing the scale.
fn smoothing_program(bd: &BlockDichotomy, metric: Metric, mode: Smoothing, mu0: f64) -> Result<SmoothingSolution> {
    let scales: Vec<f64> = bd.blocks.iter().map(|b| b.rho.trace() + b.sigma.trace()).collect();
    let mut p = SdpProblem::new();
    let bound = match mode {
        Smoothing::MinBound { .. } => {
            let mu = p.add_block(1);
            p.add_cost_term(LinearTerm::scalar(mu, 1.0));
            Bound::Variable(mu)
        }
        Smoothing::Closest { mu } => Bound::Fixed(mu),
    };
    let mut witness_at = Vec::with_capacity(bd.blocks.len());
    let mut norm_terms = Vec::new();
    let mut ball_terms = vec![];
    for (b, &c) in bd.blocks.iter().zip(&scales) {
        let d = b.dim();
        let rho = b.rho.scale(1.0 / c);
        let sigma = b.sigma.scale(1.0 / c);
        let m = b.multiplicity * c;
        let t = spectral_map(&eigh(&sigma)?, |v| (v * mu0).powf(-0.5), false)?;
        match metric {
            Metric::TraceDistance => {
                // R + A − B = ρ, Σ m tr A ≤ ε.
                let r = p.add_block(d);
                let a = p.add_block(d);
                let bb = p.add_block(d);
                let w = p.add_block(d);
                norm_terms.push(LinearTerm::partial_trace(r, 0, d, m));
                ball_terms.push(LinearTerm::partial_trace(a, 0, d, m));
                p.add_matrix_equality(&[(r, 0, 1.0), (a, 0, 1.0), (bb, 0, -1.0)], &[], &rho);
                add_whitened_bound(&mut p, w, (r, 0), bound, &t);
                witness_at.push((r, 0, d));
            }
            Metric::PurifiedDistance => {
                // [[𝟙, X], [X†, R]] ⪰ 0 on the support of ρ, whitened by
                // ρ_c^{1/2}; Σ m Re tr(X V ρ_c^{1/2}) ≥ √(1 − ε²) certifies
                // the fidelity.
                let e = eigh(&rho)?;
                let cut = e.cutoff();
                let keep: Vec<usize> = (0..d).filter(|&i| e.eigenvalues[i] > cut).collect();
                let rk = keep.len();
                let y = p.add_block(rk + d);
                let w = p.add_block(d);
                norm_terms.push(LinearTerm::partial_trace(y, rk, d, m));
                if rk > 0 {
                    p.add_matrix_equality(&[(y, 0, 1.0)], &[], &HermitianMatrix::identity(rk));
                    let mut entries = Vec::new();
                    for (a, &col) in keep.iter().enumerate() {
                        let scale = m * e.eigenvalues[col].sqrt() / 2.0;
                        for row in 0..d {
                            let v = e.eigenvectors[(row, col)] * scale;
                            if v.norm() > 0.0 {
                                entries.push((rk + row, a, v));
                                entries.push((a, rk + row, v.conj()));
                            }
                        }
                    }
                    ball_terms.push(LinearTerm { block: y, entries });
                }
                add_whitened_bound(&mut p, w, (y, rk), bound, &t);
                witness_at.push((y, rk, d));
            }
        }
    }
    match (mode, metric) {
        (Smoothing::MinBound { eps }, Metric::TraceDistance) => {
            let slack = p.add_block(1);
            ball_terms.push(LinearTerm::scalar(slack, 1.0));
            p.add_constraint(ball_terms, eps);
        }
        (Smoothing::MinBound { eps }, Metric::PurifiedDistance) => {
            let slack = p.add_block(1);
            ball_terms.push(LinearTerm::scalar(slack, -1.0));
            p.add_constraint(ball_terms, (1.0 - eps * eps).sqrt());
        }
        (Smoothing::Closest { .. }, Metric::TraceDistance) => {
            for t in ball_terms {
                p.add_cost_term(t);
            }
        }
        (Smoothing::Closest { .. }, Metric::PurifiedDistance) => {
            for mut t in ball_terms {
                for e in t.entries.iter_mut() {
                    e.2 = -e.2;
                }
                p.add_cost_term(t);
            }
        }
    }
    p.add_constraint(norm_terms, 1.0);
    let sol = conic::solve(&p)?;
    // A stalled run is still usable when it is nearly feasible and nearly
    // complementary; the witness is repaired and re-evaluated afterwards.
    // The duality gap itself can stay large when the dual grows without
    // bound, as it does for very small ε.
    let scale = sol.primal_value.abs().max(1.0);
    let complementarity: f64 = sol.primal.iter().zip(&sol.dual_slack).map(|(x, z)| x.inner(z)).sum();
    let loose = sol.primal_residual <= 1e-5
        && sol.dual_residual <= 1e-6 * scale
        && (sol.gap <= 1e-5 * scale || complementarity.abs() <= 1e-6 * scale);
    if !(sol.status == SdpStatus::Optimal || (sol.status == SdpStatus::IterLimit && loose)) {
        return Err(Error::Numerical(format!(
            "smoothing program ended with status {:?} (residual {:e}, gap {:e})",
            sol.status, sol.primal_residual, sol.gap
        )));
    }
    let witness = witness_at
        .into_iter()
        .zip(&scales)
        .map(|((blk, off, d), &c)| {
            let m = sol.block(blk).as_matrix().view((off, off), (d, d)).into_owned();
            HermitianMatrix::symmetrized(m).scale(c)
        })
        .collect();
    let value = match (mode, metric) {
        (Smoothing::Closest { .. }, Metric::PurifiedDistance) => -sol.primal_value,
        _ => sol.primal_value,
    };
    Ok(SmoothingSolution { witness, value })
}

/// Witness of the smooth max-divergence: one program minimizing μ, or, if
/// that stalls, bisection on log μ over programs finding the closest state
/// below μσ.
fn sdp_witness(bd: &BlockDichotomy, eps: f64, metric: Metric) -> Result<Vec<HermitianMatrix>> {
    let mu0 = block_dmax(bd, &bd.rho_blocks())?.exp2();
    let direct = smoothing_program(bd, metric, Smoothing::MinBound { eps }, mu0);
    match direct {
        Ok(s) => Ok(s.witness),
        Err(_) => bisection_witness(bd, eps, metric, mu0),
    }
}

fn bisection_witness(bd: &BlockDichotomy, eps: f64, metric: Metric, mu0: f64) -> Result<Vec<HermitianMatrix>> {
    let inside = |s: &SmoothingSolution| match metric {
        Metric::TraceDistance => s.value <= eps,
        Metric::PurifiedDistance => s.value >= (1.0 - eps * eps).sqrt(),
    };
    // log₂ μ relative to mu0; μ = mu0 admits ρ itself.
    let (mut lo, mut hi) = (-mu0.log2(), 0.0f64);
    let mut best = None;
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        match smoothing_program(bd, metric, Smoothing::Closest { mu: mid.exp2() }, mu0) {
            Ok(s) if inside(&s) => {
                hi = mid;
                best = Some(s.witness);
            }
            Ok(_) => lo = mid,
            Err(e) => return Err(e),
        }
    }
    Ok(best.unwrap_or_else(|| bd.rho_blocks()))
}

/// Error level `ε` kept together with `1 − ε`, both as base-2 logarithms,
/// so that levels extremely close to 0 or to 1 stay representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub log_eps: f64,
    pub log_comp: f64,
}

impl Level {
    pub fn new(eps: f64) -> Result<Self> {
        check_eps(eps, "eps")?;
        Ok(Self {
            log_eps: eps.log2(),
            log_comp: (-eps).ln_1p() / std::f64::consts::LN_2,
        })
    }

    /// From `log₂ ε < 0`.
    pub fn from_log_eps(log_eps: f64) -> Self {
        Self {
            log_eps,
            log_comp: log2_sub(0.0, log_eps),
        }
    }

    /// From `log₂(1 − ε) < 0`.
    pub fn from_log_comp(log_comp: f64) -> Self {
        Self {
            log_eps: log2_sub(0.0, log_comp),
            log_comp,
        }
    }

    pub fn eps(&self) -> f64 {
        self.log_eps.exp2()
    }
}

/// A commuting pair stored in the log domain as `(log p, log q, log w)`
/// triples (weight `w` counts identical outcomes), sorted by decreasing
/// likelihood ratio.
#[derive(Debug, Clone)]
pub struct ClassicalPair {
    lp: Vec<f64>,
    lq: Vec<f64>,
    lw: Vec<f64>,
    /// `log Σ_{i<j} w_i q_i`.
    prefix_q: Vec<f64>,
    /// `log Σ_{i<j} w_i p_i`.
    prefix_p: Vec<f64>,
    /// `log Σ_{i≥j} w_i p_i`.
    suffix_p: Vec<f64>,
}

impl ClassicalPair {
    fn build(mut rows: Vec<(f64, f64, f64)>) -> Self {
        rows.retain(|r| r.0 > f64::NEG_INFINITY || r.1 > f64::NEG_INFINITY);
        rows.sort_by(|a, b| (b.0 - b.1).total_cmp(&(a.0 - a.1)));
        let k = rows.len();
        let mut prefix_q = vec![f64::NEG_INFINITY; k + 1];
        for i in 0..k {
            prefix_q[i + 1] = log2_add(prefix_q[i], rows[i].1 + rows[i].2);
        }
        let mut prefix_p = vec![f64::NEG_INFINITY; k + 1];
        for i in 0..k {
            prefix_p[i + 1] = log2_add(prefix_p[i], rows[i].0 + rows[i].2);
        }
        let mut suffix_p = vec![f64::NEG_INFINITY; k + 1];
        for i in (0..k).rev() {
            suffix_p[i] = log2_add(suffix_p[i + 1], rows[i].0 + rows[i].2);
        }
        Self {
            lp: rows.iter().map(|r| r.0).collect(),
            lq: rows.iter().map(|r| r.1).collect(),
            lw: rows.iter().map(|r| r.2).collect(),
            prefix_q,
            prefix_p,
            suffix_p,
        }
    }

    pub fn from_probabilities(p: &[f64], q: &[f64]) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                found: q.len(),
            });
        }
        validate_probabilities(p, "p")?;
        validate_probabilities(q, "q")?;
        Ok(Self::build(
            p.iter().zip(q).map(|(&a, &b)| (a.log2(), b.log2(), 0.0)).collect(),
        ))
    }

    pub(crate) fn from_blocks(bd: &BlockDichotomy) -> Result<Self> {
        if bd.blocks.iter().any(|b| b.dim() != 1) {
            return Err(Error::arg("blocks", "classical path needs 1x1 blocks"));
        }
        Ok(Self::build(
            bd.blocks
                .iter()
                .map(|b| {
                    (
                        b.rho.get(0, 0).re.max(0.0).log2(),
                        b.sigma.get(0, 0).re.max(0.0).log2(),
                        b.multiplicity.log2(),
                    )
                })
                .collect(),
        ))
    }

    /// The `n`-fold product, grouped into type classes with exact
    /// multinomial weights.
    pub fn power(p: &[f64], q: &[f64], n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("n", "tensor power must be positive"));
        }
        let base = Self::from_probabilities(p, q)?;
        // Merge identical outcomes first.
        let mut distinct: Vec<(f64, f64, f64)> = Vec::new();
        for i in 0..base.lp.len() {
            match distinct.iter_mut().find(|r| r.0 == base.lp[i] && r.1 == base.lq[i]) {
                Some(r) => r.2 = log2_add(r.2, base.lw[i]),
                None => distinct.push((base.lp[i], base.lq[i], base.lw[i])),
            }
        }
        let k = distinct.len();
        let count = crate::blocks::count_compositions(n, k);
        if count > MAX_BLOCKS as f64 {
            return Err(Error::DimensionCap {
                dim: count.min(usize::MAX as f64) as usize,
                cap: MAX_BLOCKS,
            });
        }
        let lf: Vec<f64> = ln_factorial_table(n)
            .into_iter()
            .map(|v| v / std::f64::consts::LN_2)
            .collect();
        let mut rows = Vec::with_capacity(count as usize);
        for_each_composition(n, k, |t| {
            let (mut a, mut b, mut w) = (0.0, 0.0, lf[n]);
            for i in 0..k {
                if t[i] > 0 {
                    let c = t[i] as f64;
                    a += c * distinct[i].0;
                    b += c * distinct[i].1;
                    w += c * distinct[i].2 - lf[t[i]];
                }
            }
            rows.push((a, b, w));
        });
        Ok(Self::build(rows))
    }

    pub fn len(&self) -> usize {
        self.lp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lp.is_empty()
    }

    /// `D_h` at the given level, in bits.
    pub fn dh(&self, level: Level) -> f64 {
        // Accept entries in order of decreasing ratio until the accepted
        // ρ-mass reaches 1 − ε; entry j is the one accepted partially. For
        // ε ≥ ½ the accepted mass is tracked directly, otherwise through the
        // rejected mass, so that neither side rounds to 0 or 1.
        let k = self.len();
        let small = level.log_eps < -1.0;
        // Entries before j are fully accepted iff this holds at j.
        let open = |j: usize| {
            if small {
                self.suffix_p[j] > level.log_eps
            } else {
                self.prefix_p[j] < level.log_comp
            }
        };
        if !open(0) {
            return 0.0;
        }
        let (mut lo, mut hi) = (0usize, k);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if open(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let j = lo;
        let rest = if small {
            log2_sub(self.suffix_p[j], level.log_eps)
        } else {
            log2_sub(level.log_comp, self.prefix_p[j])
        };
        let beta = log2_add(self.prefix_q[j], rest - self.lp[j] + self.lq[j]);
        -beta
    }

    /// `log Σ_{i<k} w_i (p_i − r_k q_i)` at the `k`-th ratio `r_k`.
    fn excess_at(&self, k: usize) -> f64 {
        let lr = self.lp[k] - self.lq[k];
        let mut acc = f64::NEG_INFINITY;
        for i in 0..k {
            let li = self.lp[i] - self.lq[i];
            acc = log2_add(acc, self.lw[i] + self.lq[i] + log2_sub(li, lr));
        }
        acc
    }

    /// `log λ` solving `Σ w (p − λq)₊ = ε`.
    fn dmax_trace_lambda(&self, level: Level) -> Result<f64> {
        if self.lq.iter().any(|&v| v == f64::NEG_INFINITY) {
            return Err(Error::arg("q", "smooth max-divergence needs q > 0"));
        }
        let k = self.len();
        if level.log_eps >= -1.0 {
            return Ok(self.dmax_trace_lambda_comp(level));
        }
        // Last breakpoint whose excess stays within ε.
        let (mut lo, mut hi) = (0usize, k);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.excess_at(mid) <= level.log_eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k1 = lo + 1;
        if k1 >= k {
            // Every entry is active: λ = (Σ p − ε)/Σ q.
            return Ok(log2_sub(self.suffix_p[0], level.log_eps) - self.prefix_q[k]);
        }
        let exc1 = self.excess_at(k1);
        let lr1 = self.lp[k1] - self.lq[k1];
        Ok(log2_add(lr1, log2_sub(exc1, level.log_eps) - self.prefix_q[k1]))
    }

    /// The same through `Σ w min(p, λq) = 1 − ε`, accurate for `ε ≥ ½`.
    fn dmax_trace_lambda_comp(&self, level: Level) -> f64 {
        // With the first k entries above λ the left side is
        // λ·Σ_{i<k} w q + Σ_{i≥k} w p, decreasing in k at λ = r_k.
        let k = self.len();
        let at = |j: usize| log2_add(self.lp[j] - self.lq[j] + self.prefix_q[j], self.suffix_p[j]);
        let (mut lo, mut hi) = (0usize, k);
        // Invariant: at(lo) > 1 − ε, and at(hi) ≤ 1 − ε or hi = k.
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if at(mid) > level.log_comp {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        log2_sub(level.log_comp, self.suffix_p[hi]) - self.prefix_q[hi]
    }

    /// `D_max^{ε,T}` in bits (trace-distance smoothing).
    pub fn dmax_trace(&self, level: Level) -> Result<f64> {
        Ok(self.dmax_trace_lambda(level)?.max(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClassicalQuantity {
    Dh,
    DmaxT,
}

/// One-shot quantities of a commuting pair given as probability vectors.
pub fn classical_oneshot(p: &[f64], q: &[f64], eps: f64, which: ClassicalQuantity) -> Result<f64> {
    let pair = ClassicalPair::from_probabilities(p, q)?;
    let level = Level::new(eps)?;
    match which {
        ClassicalQuantity::Dh => Ok(pair.dh(level)),
        ClassicalQuantity::DmaxT => pair.dmax_trace(level),
    }
}

/// A named inequality `lhs ≥ rhs` with its slack `lhs − rhs`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl BoundCheck {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let slack = if lhs == f64::INFINITY || rhs == f64::NEG_INFINITY {
            f64::INFINITY
        } else if rhs == f64::INFINITY || lhs == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            lhs - rhs
        };
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub checks: Vec<BoundCheck>,
}

impl BoundReport {
    pub fn min_slack(&self) -> f64 {
        self.checks.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.min_slack() >= -tol
    }
}

/// `D_h^{1−ε} ≥ D_max^{√ε,P} − log 1/(1−ε) ≥ D_h^{1−ε−ν} − log 4/ν²`.
pub fn check_prop_dh_dmax(d: &Dichotomy, eps: f64, nu: f64) -> Result<BoundReport> {
    check_eps(eps, "eps")?;
    if !(nu > 0.0 && nu < 1.0 - eps) {
        return Err(Error::arg("nu", format!("{nu} outside (0, 1 - eps)")));
    }
    let dh_hi = hypothesis_testing(d, 1.0 - eps)?.value_bits;
    let dmax = smooth_dmax(d, eps.sqrt(), Metric::PurifiedDistance)?.value_bits;
    let dh_lo = hypothesis_testing(d, 1.0 - eps - nu)?.value_bits;
    let middle = dmax - (1.0 / (1.0 - eps)).log2();
    Ok(BoundReport {
        checks: vec![
            BoundCheck::new("dh(1-eps) >= dmax(sqrt eps, P) - log 1/(1-eps)", dh_hi, middle),
            BoundCheck::new(
                "dmax(sqrt eps, P) - log 1/(1-eps) >= dh(1-eps-nu) - log 4/nu^2",
                middle,
                dh_lo - (4.0 / (nu * nu)).log2(),
            ),
        ],
    })
}

/// Lower-bound Rényi term: `D_min` at `α = 0`, otherwise Petz.
fn renyi_lower(d: &Dichotomy, alpha: f64) -> Result<f64> {
    if alpha == 0.0 {
        Ok(d_min(d)?.bits())
    } else {
        Ok(petz_renyi(d, alpha)?.bits())
    }
}

/// `D_h^ε ≥ D̄_α − α/(1−α) log 1/ε` for `α ∈ [0,1)` and
/// `D_max^{ε,Δ} ≤ D̃_α + 1/(α−1) log 1/ε² + log 1/(1−ε²)` for `α ∈ (1,∞]`,
/// for both metrics. Where defined, the variants with the Rényi families
/// interchanged are checked as well.
pub fn check_prop_renyi_bounds(d: &Dichotomy, eps: f64, alpha_lo: f64, alpha_hi: f64) -> Result<BoundReport> {
    check_eps(eps, "eps")?;
    if !(0.0..1.0).contains(&alpha_lo) {
        return Err(Error::arg("alpha_lo", format!("{alpha_lo} outside [0, 1)")));
    }
    if !(alpha_hi > 1.0) {
        return Err(Error::arg("alpha_hi", format!("{alpha_hi} outside (1, inf]")));
    }
    let mut checks = Vec::new();
    let dh = hypothesis_testing(d, eps)?.value_bits;
    let pen_lo = alpha_lo / (1.0 - alpha_lo) * (1.0 / eps).log2();
    checks.push(BoundCheck::new(
        format!("dh >= petz({alpha_lo}) - penalty"),
        dh,
        renyi_lower(d, alpha_lo)? - pen_lo,
    ));
    if alpha_lo >= 0.5 {
        checks.push(BoundCheck::new(
            format!("dh >= sandwiched({alpha_lo}) - penalty"),
            dh,
            sandwiched_renyi(d, alpha_lo)?.bits() - pen_lo,
        ));
    }

    let (upper_s, upper_p) = if alpha_hi == f64::INFINITY {
        let v = d_max(d)?.bits();
        (v, None)
    } else {
        let s = sandwiched_renyi(d, alpha_hi)?.bits();
        let p = if alpha_hi <= 2.0 {
            Some(petz_renyi(d, alpha_hi)?.bits())
        } else {
            None
        };
        (s, p)
    };
    let pen_hi = if alpha_hi == f64::INFINITY {
        0.0
    } else {
        (1.0 / (eps * eps)).log2() / (alpha_hi - 1.0)
    } + (1.0 / (1.0 - eps * eps)).log2();
    for metric in [Metric::TraceDistance, Metric::PurifiedDistance] {
        let v = smooth_dmax(d, eps, metric)?.value_bits;
        checks.push(BoundCheck::new(
            format!("sandwiched({alpha_hi}) + penalty >= dmax({})", metric.name()),
            upper_s + pen_hi,
            v,
        ));
        if let Some(pv) = upper_p {
            checks.push(BoundCheck::new(
                format!("petz({alpha_hi}) + penalty >= dmax({})", metric.name()),
                pv + pen_hi,
                v,
            ));
        }
    }
    Ok(BoundReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::relative_entropy;
    use crate::states::{random_density, random_dichotomy};
    use approx::assert_abs_diff_eq;

    fn classical(p: &[f64], q: &[f64]) -> Dichotomy {
        Dichotomy::classical(p, q).unwrap()
    }

    fn ket0_mixed() -> Dichotomy {
        Dichotomy::new(DensityMatrix::basis(2, 0).unwrap(), DensityMatrix::maximally_mixed(2)).unwrap()
    }

    fn check_result(r: &HypothesisTestResult, d: &Dichotomy, eps: f64) {
        assert_abs_diff_eq!(r.value_bits, -r.type2.log2(), epsilon = 1e-9);
        assert!(r.type1 <= eps + 1e-9);
        assert_abs_diff_eq!(r.type2, r.optimizer.probability(&d.sigma), epsilon = 1e-12);
        assert_abs_diff_eq!(1.0 - r.type1, r.optimizer.probability(&d.rho), epsilon = 1e-12);
        Effect::new(r.optimizer.as_hermitian().clone()).unwrap();
    }

    #[test]
    fn hypothesis_testing_examples() {
        let d = ket0_mixed();
        let r = hypothesis_testing(&d, 1e-6).unwrap();
        check_result(&r, &d, 1e-6);
        assert!((r.value_bits - 1.0).abs() < 1e-5);

        let c = classical(&[0.9, 0.1], &[0.5, 0.5]);
        let r = hypothesis_testing(&c, 0.1).unwrap();
        check_result(&r, &c, 0.1);
        assert_abs_diff_eq!(r.value_bits, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.optimizer.as_hermitian().get(0, 0).re, 1.0, epsilon = 1e-12);

        let rr = random_density(3, 3, 12).unwrap();
        let same = Dichotomy::new(rr.clone(), rr).unwrap();
        let r = hypothesis_testing(&same, 0.5).unwrap();
        check_result(&r, &same, 0.5);
        assert_abs_diff_eq!(r.value_bits, 1.0, epsilon = 1e-9);
        assert!(r.duality_gap < 1e-9);
    }

    #[test]
    fn hypothesis_testing_with_disjoint_supports_is_infinite() {
        let d = classical(&[1.0, 0.0], &[0.0, 1.0]);
        let r = hypothesis_testing(&d, 0.1).unwrap();
        assert_eq!(r.value_bits, f64::INFINITY);
        assert_abs_diff_eq!(r.type1, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn eps_range_is_enforced() {
        let d = ket0_mixed();
        for bad in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(hypothesis_testing(&d, bad).is_err());
            assert!(smooth_dmax(&d, bad, Metric::TraceDistance).is_err());
        }
        assert!(check_prop_dh_dmax(&d, 0.5, 0.6).is_err());
    }

    #[test]
    fn neyman_pearson_matches_sdp() {
        for seed in 0..15u64 {
            let d = random_dichotomy(2 + seed as usize % 3, 900 + seed).unwrap();
            let eps = 0.05 + 0.06 * (seed % 10) as f64;
            let np = hypothesis_testing(&d, eps).unwrap();
            let sdp = hypothesis_testing_sdp(&d, eps).unwrap();
            assert_eq!(sdp.status, SdpStatus::Optimal);
            assert!((np.value_bits - sdp.value_bits).abs() <= 1e-6, "seed {seed}");
            assert!(np.duality_gap <= 1e-7 && sdp.duality_gap <= 1e-7);
        }
    }

    #[test]
    fn smooth_dmax_examples() {
        let d = ket0_mixed();
        let r = smooth_dmax(&d, 0.1, Metric::TraceDistance).unwrap();
        assert_abs_diff_eq!(r.value_bits, 1.8f64.log2(), epsilon = 1e-9);
        assert!(r.value_bits < 1.0);
        assert!(r.achieved_distance <= 0.1 + 1e-9);

        let rr = random_density(2, 2, 31).unwrap();
        let same = Dichotomy::new(rr.clone(), rr.clone()).unwrap();
        for metric in [Metric::TraceDistance, Metric::PurifiedDistance] {
            let r = smooth_dmax(&same, 0.3, metric).unwrap();
            assert_eq!(r.value_bits, 0.0);
            assert_eq!(r.smoothed_state, rr);
        }

        for seed in 0..5u64 {
            let d = random_dichotomy(2, 40 + seed).unwrap();
            let dm = d_max(&d).unwrap().bits();
            for metric in [Metric::TraceDistance, Metric::PurifiedDistance] {
                let r = smooth_dmax(&d, 1e-4, metric).unwrap_or_else(|e| panic!("seed {seed} {metric:?}: {e}"));
                assert!((r.value_bits - dm).abs() < 2e-3, "{metric:?}: {} vs {dm}", r.value_bits);
            }
        }
    }

    #[test]
    fn smooth_dmax_trace_agrees_with_sdp_on_classical_input() {
        let d = classical(&[0.9, 0.1], &[0.5, 0.5]);
        let bd = BlockDichotomy::from_dichotomy(&d);
        let fast = smooth_dmax_blocks(&bd, 0.1, Metric::TraceDistance).unwrap();
        assert_abs_diff_eq!(fast.value_bits, 1.6f64.log2(), epsilon = 1e-12);
        let raw = sdp_witness(&bd, 0.1, Metric::TraceDistance).unwrap();
        let w = clean_state(&bd, &raw).unwrap();
        assert_abs_diff_eq!(block_dmax(&bd, &w).unwrap(), 1.6f64.log2(), epsilon = 1e-6);
    }

    /// Dense scan over real qubit states `ρ̃ = ½(𝟙 + x X + z Z)`.
    fn grid_smooth_dmax(d: &Dichotomy, eps: f64) -> f64 {
        let mut best = f64::INFINITY;
        let steps = 400;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = -1.0 + 2.0 * i as f64 / steps as f64;
                let z = -1.0 + 2.0 * j as f64 / steps as f64;
                if x * x + z * z > 1.0 {
                    continue;
                }
                let m = HermitianMatrix::from_real_rows(&[&[(1.0 + z) / 2.0, x / 2.0], &[x / 2.0, (1.0 - z) / 2.0]]).unwrap();
                let cand = DensityMatrix::new(m).unwrap();
                if crate::states::trace_distance(&d.rho, &cand).unwrap() > eps {
                    continue;
                }
                let v = d_max(&Dichotomy::new(cand, d.sigma.clone()).unwrap()).unwrap().bits();
                best = best.min(v);
            }
        }
        best
    }

    #[test]
    fn smooth_dmax_against_grid_oracle() {
        let rho = DensityMatrix::from_matrix(
            HermitianMatrix::from_real_rows(&[&[0.8, 0.3], &[0.3, 0.2]]).unwrap().into_matrix(),
        )
        .unwrap();
        let sigma = DensityMatrix::from_matrix(
            HermitianMatrix::from_real_rows(&[&[0.4, -0.1], &[-0.1, 0.6]]).unwrap().into_matrix(),
        )
        .unwrap();
        let d = Dichotomy::new(rho, sigma).unwrap();
        let sdp = smooth_dmax(&d, 0.1, Metric::TraceDistance).unwrap().value_bits;
        let grid = grid_smooth_dmax(&d, 0.1);
        assert!(sdp <= grid + 1e-6);
        assert!(grid - sdp < 0.02, "{sdp} vs {grid}");
    }

    #[test]
    fn smooth_dmax_invariants() {
        for seed in 0..6u64 {
            let d = random_dichotomy(2 + seed as usize % 2, 70 + seed).unwrap();
            for metric in [Metric::TraceDistance, Metric::PurifiedDistance] {
                let r = smooth_dmax(&d, 0.2, metric).unwrap();
                let check = d_max(&Dichotomy::new(r.smoothed_state.clone(), d.sigma.clone()).unwrap())
                    .unwrap()
                    .bits();
                assert_abs_diff_eq!(check, r.value_bits, epsilon = 1e-6);
                assert!(r.achieved_distance <= 0.2 + 1e-6);
                assert!(eigh(r.smoothed_state.as_hermitian()).unwrap().min_eigenvalue() >= -1e-12);
            }
        }
    }

    #[test]
    fn bisection_fallback_matches_direct_program() {
        for seed in 0..3u64 {
            let d = random_dichotomy(2 + seed as usize % 2, 300 + seed).unwrap();
            let bd = BlockDichotomy::from_dichotomy(&d);
            let mu0 = block_dmax(&bd, &bd.rho_blocks()).unwrap().exp2();
            for metric in [Metric::TraceDistance, Metric::PurifiedDistance] {
                let direct = smooth_dmax_blocks(&bd, 0.2, metric).unwrap().value_bits;
                let w = bisection_witness(&bd, 0.2, metric, mu0).unwrap();
                let v = block_dmax(&bd, &clean_state(&bd, &w).unwrap()).unwrap();
                assert!((v - direct).abs() < 1e-5, "{metric:?}: {v} vs {direct}");
            }
        }
    }

    #[test]
    fn rank_deficient_sigma_is_rejected() {
        let d = ket0_mixed().swapped();
        assert!(matches!(
            smooth_dmax(&d, 0.1, Metric::TraceDistance),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn classical_oneshot_examples() {
        let v = classical_oneshot(&[0.9, 0.1], &[0.5, 0.5], 0.1, ClassicalQuantity::Dh).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        let v = classical_oneshot(&[0.3, 0.7], &[0.3, 0.7], 0.5, ClassicalQuantity::Dh).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        let v = classical_oneshot(&[0.9, 0.1], &[0.5, 0.5], 0.1, ClassicalQuantity::DmaxT).unwrap();
        assert_abs_diff_eq!(v, 1.6f64.log2(), epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.678072, epsilon = 1e-6);
        assert!(classical_oneshot(&[0.5, 0.5], &[1.0, 0.0], 0.1, ClassicalQuantity::DmaxT).is_err());
        assert!(classical_oneshot(&[0.5, 0.5], &[1.0], 0.1, ClassicalQuantity::Dh).is_err());
    }

    #[test]
    fn classical_path_matches_matrix_path() {
        let p = [0.6, 0.3, 0.1];
        let q = [0.2, 0.3, 0.5];
        for n in 1..=4 {
            let pair = ClassicalPair::power(&p, &q, n).unwrap();
            let full = classical(&p, &q).tensor_power(n).unwrap();
            for eps in [0.05, 0.2, 0.49, 0.5, 0.51, 0.8, 0.97] {
                let lv = Level::new(eps).unwrap();
                let m = hypothesis_testing(&full, eps).unwrap().value_bits;
                assert_abs_diff_eq!(pair.dh(lv), m, epsilon = 1e-8);
                let s = smooth_dmax(&full, eps, Metric::TraceDistance).unwrap().value_bits;
                assert_abs_diff_eq!(pair.dmax_trace(lv).unwrap(), s, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn classical_trace_smoothing_matches_sdp_on_random_instances() {
        for seed in 0..8u64 {
            let r = random_density(3, 3, 2 * seed + 600).unwrap();
            let s = random_density(3, 3, 2 * seed + 601).unwrap();
            let p = r.as_hermitian().real_diagonal();
            let q = s.as_hermitian().real_diagonal();
            let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
            let p: Vec<f64> = p.iter().map(|v| v / sp).collect();
            let q: Vec<f64> = q.iter().map(|v| v / sq).collect();
            let bd = BlockDichotomy::from_dichotomy(&classical(&p, &q));
            let fast = smooth_dmax_blocks(&bd, 0.1, Metric::TraceDistance).unwrap().value_bits;
            if fast == 0.0 {
                continue;
            }
            let w = clean_state(&bd, &sdp_witness(&bd, 0.1, Metric::TraceDistance).unwrap()).unwrap();
            assert_abs_diff_eq!(fast, block_dmax(&bd, &w).unwrap(), epsilon = 1e-6);
        }
    }

    #[test]
    fn classical_levels_near_one() {
        // Only the top-ratio outcome is (partially) accepted.
        let pair = ClassicalPair::power(&[0.9, 0.1], &[0.5, 0.5], 50).unwrap();
        let dh = pair.dh(Level::from_log_comp(-300.0));
        assert_abs_diff_eq!(dh, 300.0 + 50.0 * 1.8f64.log2(), epsilon = 1e-9);
        // Σ min(p, λq) = 2^{-300} with λ below every ratio gives λ = 2^{-300}.
        let lam = pair.dmax_trace_lambda(Level::from_log_comp(-300.0)).unwrap();
        assert_abs_diff_eq!(lam, -300.0, epsilon = 1e-9);
        // Both branches agree across ε = ½.
        let a = pair.dh(Level::from_log_eps(-1.0 - 1e-12));
        let b = pair.dh(Level::from_log_eps(-1.0 + 1e-12));
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        let a = pair.dmax_trace_lambda(Level::from_log_eps(-1.0 - 1e-12)).unwrap();
        let b = pair.dmax_trace_lambda(Level::from_log_eps(-1.0 + 1e-12)).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }

    #[test]
    fn level_round_trips() {
        let l = Level::new(0.25).unwrap();
        assert_abs_diff_eq!(l.log_comp, 0.75f64.log2(), epsilon = 1e-15);
        let a = Level::from_log_eps(-600.0);
        assert_abs_diff_eq!(a.log_comp, 0.0, epsilon = 1e-15);
        let b = Level::from_log_comp(-600.0);
        assert_abs_diff_eq!(b.log_eps, 0.0, epsilon = 1e-15);
        assert!(b.log_eps < 0.0 || b.log_eps == 0.0);
    }

    #[test]
    fn prop_dh_dmax_examples() {
        let rr = random_density(2, 2, 5).unwrap();
        let same = Dichotomy::new(rr.clone(), rr).unwrap();
        assert!(check_prop_dh_dmax(&same, 0.5, 0.25).unwrap().holds(1e-6));
        let q = random_dichotomy(2, 8).unwrap();
        assert!(check_prop_dh_dmax(&q, 0.36, 0.1).unwrap().holds(1e-6));
        let c = classical(&[0.9, 0.1], &[0.5, 0.5]);
        assert!(check_prop_dh_dmax(&c, 0.25, 0.2).unwrap().holds(1e-6));
    }

    #[test]
    fn prop_renyi_examples() {
        let rr = random_density(2, 2, 6).unwrap();
        let same = Dichotomy::new(rr.clone(), rr).unwrap();
        let rep = check_prop_renyi_bounds(&same, 0.3, 0.5, 2.0).unwrap();
        assert!(rep.holds(1e-6));
        let q = random_dichotomy(2, 9).unwrap();
        assert!(check_prop_renyi_bounds(&q, 0.2, 0.5, 2.0).unwrap().holds(1e-6));
        assert!(check_prop_renyi_bounds(&q, 0.2, 0.0, f64::INFINITY).unwrap().holds(1e-6));
        let c = classical(&[0.9, 0.1], &[0.5, 0.5]).tensor_power(4).unwrap();
        assert!(check_prop_renyi_bounds(&c, 0.2, 0.5, 2.0).unwrap().holds(1e-6));
    }

    #[test]
    fn monotone_in_eps() {
        let grid = [0.05, 0.1, 0.2, 0.3, 0.4];
        for seed in 0..5u64 {
            let d = random_dichotomy(2, 20 + seed).unwrap();
            let dh: Vec<f64> = grid.iter().map(|&e| hypothesis_testing(&d, e).unwrap().value_bits).collect();
            for w in dh.windows(2) {
                assert!(w[1] >= w[0] - 1e-9);
            }
            for metric in [Metric::TraceDistance, Metric::PurifiedDistance] {
                let dm: Vec<f64> = grid.iter().map(|&e| smooth_dmax(&d, e, metric).unwrap().value_bits).collect();
                for w in dm.windows(2) {
                    assert!(w[1] <= w[0] + 1e-6);
                }
            }
        }
    }

    #[test]
    fn qaep_trend_on_qubits() {
        let d = random_dichotomy(2, 0).unwrap();
        let rel = relative_entropy(&d).unwrap().bits();
        let gap = |n: usize| {
            let bd = BlockDichotomy::tensor_power(&d, n).unwrap();
            let v = smooth_dmax_blocks(&bd, 0.1, Metric::TraceDistance).unwrap().value_bits;
            (v / n as f64 - rel).abs()
        };
        assert!(gap(6) < gap(2));
    }
}
