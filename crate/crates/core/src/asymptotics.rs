//! Tensor-power experiments: achievable output copies, rate curves, error
//! exponents and the Rényi-gap condition behind them.

use rayon::prelude::*;
use serde::Serialize;

use crate::blocks::BlockDichotomy;
use crate::channels::{synthesize_approx, verify_transformation, CONDITION_SLACK};
use crate::divergences::{relative_entropy, sandwiched_renyi};
use crate::error::{Error, Result};
use crate::oneshot::{hypothesis_testing_blocks, smooth_dmax_blocks, ClassicalPair, Level};
use crate::states::{Dichotomy, Metric};

/// Half-width of the refused band around the critical rate, relative.
pub const NEAR_CRITICAL_BAND: f64 = 0.02;
/// Lowest `log₂ ε` (and `log₂(1 − ε)`) explored by the exponent sweep.
pub const LEVEL_FLOOR_BITS: f64 = -1000.0;
/// Explicit verification of synthesized channels is attempted up to this
/// Hilbert-space dimension on either side.
pub const VERIFY_DIM_LIMIT: usize = 64;
/// Number of `n` values in an exponent sweep when none is configured.
pub const DEFAULT_SWEEP_POINTS: usize = 19;
const M_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub src: Dichotomy,
    pub dst: Dichotomy,
    pub metric: Metric,
    pub eps_total: f64,
    /// Fraction of `eps_total` assigned to the source test.
    pub eps_split: f64,
    pub n_min: usize,
    pub n_max: usize,
    /// Number of sampled `n` values; `None` evaluates every `n`.
    pub samples: Option<usize>,
    pub classical_fast_path: bool,
}

impl ExperimentConfig {
    pub fn new(src: Dichotomy, dst: Dichotomy, metric: Metric, eps_total: f64, n_max: usize) -> Result<Self> {
        let cfg = Self {
            src,
            dst,
            metric,
            eps_total,
            eps_split: 0.5,
            n_min: 1,
            n_max,
            samples: None,
            classical_fast_path: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_total > 0.0 && self.eps_total < 1.0) {
            return Err(Error::arg("eps_total", format!("{} outside (0, 1)", self.eps_total)));
        }
        if !(self.eps_split > 0.0 && self.eps_split < 1.0) {
            return Err(Error::arg("eps_split", format!("{} outside (0, 1)", self.eps_split)));
        }
        if self.n_min == 0 || self.n_max < self.n_min {
            return Err(Error::arg(
                "n_max",
                format!("need 1 <= n_min <= n_max, got {}..{}", self.n_min, self.n_max),
            ));
        }
        if self.samples == Some(0) {
            return Err(Error::arg("samples", "at least one sample is required"));
        }
        Ok(())
    }

    /// `(ε₁, ε₂)`.
    pub fn eps_pair(&self) -> (f64, f64) {
        (self.eps_split * self.eps_total, (1.0 - self.eps_split) * self.eps_total)
    }

    /// `(λ₁, λ₂)`, the relative entropies of source and target.
    pub fn lambdas(&self) -> Result<(f64, f64)> {
        Ok((relative_entropy(&self.src)?.bits(), relative_entropy(&self.dst)?.bits()))
    }

    fn dst_classical(&self) -> bool {
        self.classical_fast_path && self.metric == Metric::TraceDistance
    }
}

/// A tensor power kept in whichever form is cheapest to evaluate.
enum Powered {
    Classical(ClassicalPair),
    Blocks(BlockDichotomy),
}

impl Powered {
    fn new(d: &Dichotomy, n: usize, classical: bool) -> Result<Self> {
        if classical {
            if let Some((p, q)) = d.classical_form() {
                return Ok(Self::Classical(ClassicalPair::power(&p, &q, n)?));
            }
        }
        Ok(Self::Blocks(BlockDichotomy::tensor_power(d, n)?))
    }

    fn dh(&self, level: Level) -> Result<f64> {
        match self {
            Self::Classical(c) => Ok(c.dh(level)),
            Self::Blocks(b) => Ok(hypothesis_testing_blocks(b, level.eps())?.value_bits),
        }
    }

    fn dmax(&self, level: Level, metric: Metric) -> Result<f64> {
        match self {
            Self::Classical(c) => c.dmax_trace(level),
            Self::Blocks(b) => Ok(smooth_dmax_blocks(b, level.eps(), metric)?.value_bits),
        }
    }
}

fn dh_at(cfg: &ExperimentConfig, n: usize, level: Level) -> Result<f64> {
    Powered::new(&cfg.src, n, cfg.classical_fast_path)?.dh(level)
}

fn dmax_at(cfg: &ExperimentConfig, m: usize, level: Level) -> Result<f64> {
    if m == 0 {
        return Ok(0.0);
    }
    Powered::new(&cfg.dst, m, cfg.dst_classical())?.dmax(level, cfg.metric)
}

/// Largest number of target copies, or no bound at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Achievable {
    Finite(usize),
    Unbounded,
}

impl Achievable {
    pub fn finite(&self) -> Option<usize> {
        match self {
            Self::Finite(m) => Some(*m),
            Self::Unbounded => None,
        }
    }
}

/// `(m, D_max^{ε₂}(ρ₂^{⊗m}‖σ₂^{⊗m}))` for the largest `m` whose smoothed
/// max-divergence stays below `bound`, searching upwards from `start`.
fn search_m(cfg: &ExperimentConfig, bound: f64, start: usize, level: Level) -> Result<(usize, f64)> {
    let ok = |m: usize| -> Result<Option<f64>> {
        let v = dmax_at(cfg, m, level)?;
        Ok((v <= bound + CONDITION_SLACK).then_some(v))
    };
    let (mut lo, mut lo_val) = (0usize, 0.0);
    let mut hi = None;
    if start > 0 {
        match ok(start)? {
            Some(v) => (lo, lo_val) = (start, v),
            None => hi = Some(start),
        }
    }
    let mut hi = match hi {
        Some(h) => h,
        None => {
            let mut step = 1usize;
            loop {
                let cand = lo + step;
                if cand > M_LIMIT {
                    return Err(Error::Numerical(format!("output copies exceed {M_LIMIT}")));
                }
                match ok(cand)? {
                    Some(v) => {
                        (lo, lo_val) = (cand, v);
                        step *= 2;
                    }
                    None => break cand,
                }
            }
        }
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match ok(mid)? {
            Some(v) => (lo, lo_val) = (mid, v),
            None => hi = mid,
        }
    }
    Ok((lo, lo_val))
}

fn unbounded_target(cfg: &ExperimentConfig) -> Result<bool> {
    Ok(relative_entropy(&cfg.dst)?.bits() <= 1e-12)
}

/// Largest `m` with `D_h^{ε₁}(ρ₁^{⊗n}‖σ₁^{⊗n}) ≥ D_max^{ε₂}(ρ₂^{⊗m}‖σ₂^{⊗m})`.
pub fn achievable_m(cfg: &ExperimentConfig, n: usize) -> Result<Achievable> {
    cfg.validate()?;
    if n == 0 || n > cfg.n_max {
        return Err(Error::arg("n", format!("{n} outside 1..={}", cfg.n_max)));
    }
    let (e1, e2) = cfg.eps_pair();
    let dh = dh_at(cfg, n, Level::new(e1)?)?;
    if dh.is_infinite() || unbounded_target(cfg)? {
        return Ok(Achievable::Unbounded);
    }
    Ok(Achievable::Finite(search_m(cfg, dh, 0, Level::new(e2)?)?.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRecord {
    pub n: usize,
    /// `None` when every `m` is achievable.
    pub m: Option<usize>,
    pub rate: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub achieved_error: f64,
    /// The error is the guaranteed bound rather than a measured distance.
    pub certified: bool,
    pub dh_value: f64,
    pub dmax_value: f64,
}

fn sample_grid(cfg: &ExperimentConfig, geometric: bool) -> Vec<usize> {
    let (a, b) = (cfg.n_min, cfg.n_max);
    let k = match cfg.samples {
        None if geometric => return (a..=b).collect(),
        None => DEFAULT_SWEEP_POINTS,
        Some(k) => k,
    };
    if k == 1 || a == b {
        return vec![b];
    }
    let mut grid: Vec<usize> = (0..k)
        .map(|i| {
            let t = i as f64 / (k - 1) as f64;
            let x = if geometric {
                (a as f64).powf(1.0 - t) * (b as f64).powf(t)
            } else {
                a as f64 + t * (b - a) as f64
            };
            (x.round() as usize).clamp(a, b)
        })
        .collect();
    grid.dedup();
    grid
}

/// The guaranteed error of the synthesized channel.
fn certified_error(metric: Metric, e1: f64, e2: f64) -> f64 {
    match metric {
        Metric::TraceDistance => e1 + e2,
        Metric::PurifiedDistance => e1.sqrt() + e2,
    }
}

/// Measures the error of the synthesized channel when both powers are small
/// enough to build explicitly.
fn measured_error(cfg: &ExperimentConfig, n: usize, m: usize) -> Result<Option<f64>> {
    let small = |d: usize, k: usize| {
        (d as f64).powi(k as i32) <= VERIFY_DIM_LIMIT as f64
    };
    if !small(cfg.src.dim(), n) || !small(cfg.dst.dim(), m) {
        return Ok(None);
    }
    let (e1, e2) = cfg.eps_pair();
    let src = cfg.src.tensor_power(n)?;
    let dst = cfg.dst.tensor_power(m)?;
    match synthesize_approx(&src, &dst, e1, e2, cfg.metric) {
        Ok(s) => Ok(Some(verify_transformation(&s.channel, &src, &dst, cfg.metric)?.rho_error)),
        // The explicit solvers may land on the other side of a borderline
        // condition; the certified bound still applies.
        Err(Error::Precondition(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Records for every configured `n`: the largest achievable `m` and the
/// error of the corresponding channel.
pub fn rate_curve(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let (e1, e2) = cfg.eps_pair();
    let (l1, l2) = (Level::new(e1)?, Level::new(e2)?);
    let unbounded = unbounded_target(cfg)?;
    let mut prev = 0usize;
    let mut out = Vec::new();
    for n in sample_grid(cfg, true) {
        let dh = dh_at(cfg, n, l1)?;
        if unbounded || dh.is_infinite() {
            out.push(ExperimentRecord {
                n,
                m: None,
                rate: f64::INFINITY,
                eps1: e1,
                eps2: e2,
                achieved_error: 0.0,
                certified: true,
                dh_value: dh,
                dmax_value: 0.0,
            });
            continue;
        }
        let (m, dmax) = search_m(cfg, dh, prev, l2)?;
        prev = m;
        let (achieved_error, certified) = if m == 0 {
            (0.0, true)
        } else {
            match measured_error(cfg, n, m)? {
                Some(e) => (e, false),
                None => (certified_error(cfg.metric, e1, e2), true),
            }
        };
        out.push(ExperimentRecord {
            n,
            m: Some(m),
            rate: m as f64 / n as f64,
            eps1: e1,
            eps2: e2,
            achieved_error,
            certified,
            dh_value: dh,
            dmax_value: dmax,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    ErrorDecay,
    StrongConverse,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentFit {
    pub slope_bits_per_n: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub regime: Regime,
    /// First `n` included in the fit.
    pub n0: usize,
}

/// Smallest total error at which the precondition holds for `(n, m)`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub n: usize,
    pub m: usize,
    pub log2_eps: f64,
    pub log2_one_minus_eps: f64,
    /// The precondition already holds at `ε = 2^LEVEL_FLOOR_BITS`.
    pub at_floor: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentSweep {
    pub rate: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub points: Vec<SweepPoint>,
    pub fit: ExponentFit,
}

/// `1 − ε = (1 − ε₁)(1 − ε₂)` with `1 − ε₁ = (1 − ε)^split`: matches the
/// additive split to first order for small `ε` and keeps both parts
/// representable as `ε → 1`.
fn split_level(total: Level, split: f64) -> (Level, Level) {
    (
        Level::from_log_comp(split * total.log_comp),
        Level::from_log_comp((1.0 - split) * total.log_comp),
    )
}

fn threshold(src: &Powered, dst: &Powered, split: f64, metric: Metric) -> Result<(Level, bool)> {
    let holds = |total: Level| -> Result<bool> {
        let (l1, l2) = split_level(total, split);
        Ok(src.dh(l1)? >= dst.dmax(l2, metric)?)
    };
    let tol = |a: f64, b: f64| (b - a).abs() <= 1e-10 * a.abs().max(1.0);
    if holds(Level::new(0.5)?)? {
        if holds(Level::from_log_eps(LEVEL_FLOOR_BITS))? {
            return Ok((Level::from_log_eps(LEVEL_FLOOR_BITS), true));
        }
        let (mut lo, mut hi) = (LEVEL_FLOOR_BITS, -1.0);
        while !tol(lo, hi) {
            let mid = 0.5 * (lo + hi);
            if holds(Level::from_log_eps(mid))? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok((Level::from_log_eps(hi), false))
    } else {
        if !holds(Level::from_log_comp(LEVEL_FLOOR_BITS))? {
            return Err(Error::Numerical(format!(
                "precondition fails even at log2(1 - eps) = {LEVEL_FLOOR_BITS}"
            )));
        }
        let (mut lo, mut hi) = (LEVEL_FLOOR_BITS, -1.0);
        while !tol(lo, hi) {
            let mid = 0.5 * (lo + hi);
            if holds(Level::from_log_comp(mid))? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((Level::from_log_comp(lo), false))
    }
}

/// Least-squares line through `(x, y)`.
fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy <= f64::EPSILON * my.abs().max(1.0) {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    (slope, intercept, r2)
}

/// At the fixed rate `R` (`m = ⌈Rn⌉`), the smallest total error for which
/// the synthesis precondition holds, and the fitted exponent of `ε` (below
/// the critical rate `λ₁/λ₂`) or of `1 − ε` (above it).
pub fn error_exponent_sweep(cfg: &ExperimentConfig, rate: f64) -> Result<ExponentSweep> {
    cfg.validate()?;
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::arg("rate", format!("{rate} must be positive and finite")));
    }
    let (lambda1, lambda2) = cfg.lambdas()?;
    let critical = if lambda2 > 0.0 { lambda1 / lambda2 } else { f64::INFINITY };
    if (rate - critical).abs() <= NEAR_CRITICAL_BAND * critical {
        return Err(Error::NearCritical {
            rate,
            critical,
            lambda1,
            lambda2,
        });
    }
    let regime = if rate < critical {
        Regime::ErrorDecay
    } else {
        Regime::StrongConverse
    };
    let grid = sample_grid(cfg, false);
    if grid.len() < 4 {
        return Err(Error::arg("samples", "an exponent fit needs at least 4 distinct n"));
    }
    let points = grid
        .par_iter()
        .map(|&n| {
            let m = (rate * n as f64).ceil() as usize;
            let src = Powered::new(&cfg.src, n, cfg.classical_fast_path)?;
            let dst = Powered::new(&cfg.dst, m, cfg.dst_classical())?;
            let (level, at_floor) = threshold(&src, &dst, cfg.eps_split, cfg.metric)?;
            Ok(SweepPoint {
                n,
                m,
                log2_eps: level.log_eps,
                log2_one_minus_eps: level.log_comp,
                at_floor,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tail = &points[points.len() / 2..];
    let xs: Vec<f64> = tail.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = tail
        .iter()
        .map(|p| match regime {
            Regime::ErrorDecay => p.log2_eps,
            Regime::StrongConverse => p.log2_one_minus_eps,
        })
        .collect();
    let (slope, intercept, r_squared) = fit_line(&xs, &ys);
    Ok(ExponentSweep {
        rate,
        lambda1,
        lambda2,
        fit: ExponentFit {
            slope_bits_per_n: slope,
            intercept,
            r_squared,
            regime,
            n0: tail[0].n,
        },
        points,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RenyiRow {
    pub alpha: f64,
    pub src_bits: f64,
    pub dst_bits: f64,
}

/// `κ(δ) = D̃_{1−δ}(src) − R·D̃_{1+δ}(dst)` and the exponent `γ = κδ/8` it
/// guarantees when positive.
#[derive(Debug, Clone, Serialize)]
pub struct GapRow {
    pub delta: f64,
    pub kappa: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SequenceReport {
    pub rate: f64,
    pub rows: Vec<RenyiRow>,
    pub gaps: Vec<GapRow>,
    /// The gap row with the largest positive `γ`, if any.
    pub best: Option<GapRow>,
}

/// Tabulates sandwiched Rényi divergences of both pairs on `alpha_grid`
/// (per copy, which for i.i.d. sequences equals the single-copy value) and
/// the gaps at every `δ` with both `1 − δ` and `1 + δ` on the grid. `rate`
/// scales the target side, i.e. the target sequence is `ρ₂^{⊗Rn}`.
pub fn check_sequence_condition(
    src: &Dichotomy,
    dst: &Dichotomy,
    alpha_grid: &[f64],
    rate: f64,
) -> Result<SequenceReport> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::arg("rate", format!("{rate} must be positive and finite")));
    }
    if !alpha_grid.iter().any(|&a| a < 1.0) || !alpha_grid.iter().any(|&a| a > 1.0) {
        return Err(Error::arg("alpha_grid", "the grid must contain values on both sides of 1"));
    }
    let mut grid: Vec<f64> = alpha_grid.iter().copied().filter(|&a| a != 1.0).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let rows = grid
        .iter()
        .map(|&alpha| {
            Ok(RenyiRow {
                alpha,
                src_bits: sandwiched_renyi(src, alpha)?.bits(),
                dst_bits: sandwiched_renyi(dst, alpha)?.bits(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut gaps = Vec::new();
    for lo in rows.iter().filter(|r| r.alpha < 1.0) {
        let delta = 1.0 - lo.alpha;
        let Some(hi) = rows.iter().find(|r| (r.alpha - (1.0 + delta)).abs() <= 1e-9) else {
            continue;
        };
        let kappa = if lo.src_bits == f64::INFINITY {
            f64::INFINITY
        } else if hi.dst_bits == f64::INFINITY {
            f64::NEG_INFINITY
        } else {
            lo.src_bits - rate * hi.dst_bits
        };
        let gamma = if kappa > 0.0 { kappa * delta / 8.0 } else { 0.0 };
        gaps.push(GapRow { delta, kappa, gamma });
    }
    gaps.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let best = gaps
        .iter()
        .filter(|g| g.kappa > 0.0)
        .max_by(|a, b| a.gamma.total_cmp(&b.gamma))
        .cloned();
    Ok(SequenceReport { rate, rows, gaps, best })
}
