//! Block-diagonal representations of dichotomies.
//!
//! A pair is stored as a list of blocks `(ρ_k, σ_k, m_k)` meaning
//! `ρ = ⊕_k ρ_k ⊗ 𝟙_{m_k}` and likewise for `σ`. Tensor powers of commuting
//! pairs collapse to type classes and tensor powers of qubit pairs to the
//! Schur–Weyl decomposition, so optimizations over permutation-invariant
//! operators scale polynomially in `n`.

use crate::error::{Error, Result};
use crate::linalg::{eigh, CMatrix, HermitianMatrix, C64};
use crate::states::{bures_sq, dim_cap, purified_from_half_bures, root_fidelity, tensor_power_with_cap, DensityMatrix, Dichotomy};

/// Upper bound on the number of blocks produced by a tensor power.
pub const MAX_BLOCKS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub rho: HermitianMatrix,
    pub sigma: HermitianMatrix,
    pub multiplicity: f64,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.rho.dim()
    }
}

/// How blocks map back to the original Hilbert space.
#[derive(Debug, Clone, PartialEq)]
enum Layout {
    /// A single block holding the full matrices.
    Full,
    /// Both matrices diagonal; `index[i]` is the 1×1 block of basis vector `i`.
    Diagonal(Vec<usize>),
    /// Symmetry-reduced power; no explicit embedding is kept.
    Reduced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockDichotomy {
    pub blocks: Vec<Block>,
    layout: Layout,
    dim: f64,
}

impl BlockDichotomy {
    /// Groups diagonal pairs into 1×1 blocks of equal `(p_i, q_i)`; any other
    /// pair becomes one full block.
    pub fn from_dichotomy(d: &Dichotomy) -> Self {
        let (r, s) = (d.rho.as_hermitian(), d.sigma.as_hermitian());
        if r.is_diagonal(0.0) && s.is_diagonal(0.0) {
            let (p, q) = (r.real_diagonal(), s.real_diagonal());
            let mut blocks: Vec<Block> = Vec::new();
            let mut keys: Vec<(u64, u64)> = Vec::new();
            let mut index = Vec::with_capacity(p.len());
            for (&pi, &qi) in p.iter().zip(&q) {
                let key = (pi.to_bits(), qi.to_bits());
                match keys.iter().position(|k| *k == key) {
                    Some(b) => {
                        blocks[b].multiplicity += 1.0;
                        index.push(b);
                    }
                    None => {
                        keys.push(key);
                        index.push(blocks.len());
                        blocks.push(Block {
                            rho: HermitianMatrix::from_real_diagonal(&[pi]),
                            sigma: HermitianMatrix::from_real_diagonal(&[qi]),
                            multiplicity: 1.0,
                        });
                    }
                }
            }
            return Self {
                blocks,
                layout: Layout::Diagonal(index),
                dim: p.len() as f64,
            };
        }
        Self {
            blocks: vec![Block {
                rho: r.clone(),
                sigma: s.clone(),
                multiplicity: 1.0,
            }],
            layout: Layout::Full,
            dim: d.dim() as f64,
        }
    }

    /// `(ρ^{⊗n}, σ^{⊗n})` in reduced form: type classes for diagonal pairs,
    /// Schur–Weyl blocks for qubits, otherwise the explicit power (subject to
    /// the dimension cap).
    pub fn tensor_power(d: &Dichotomy, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("n", "tensor power must be positive"));
        }
        if n == 1 {
            return Ok(Self::from_dichotomy(d));
        }
        let (r, s) = (d.rho.as_hermitian(), d.sigma.as_hermitian());
        if r.is_diagonal(0.0) && s.is_diagonal(0.0) {
            return type_class_power(&Self::from_dichotomy(d), n);
        }
        if d.dim() == 2 {
            return Ok(schur_weyl_power(r, s, n));
        }
        let p = Dichotomy::new(
            tensor_power_with_cap(&d.rho, n, dim_cap())?,
            tensor_power_with_cap(&d.sigma, n, dim_cap())?,
        )?;
        Ok(Self::from_dichotomy(&p))
    }

    /// Total Hilbert-space dimension `Σ m_k d_k`.
    pub fn total_dim(&self) -> f64 {
        self.dim
    }

    pub fn is_explicit(&self) -> bool {
        !matches!(self.layout, Layout::Reduced)
    }

    pub fn swapped(&self) -> Self {
        Self {
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    rho: b.sigma.clone(),
                    sigma: b.rho.clone(),
                    multiplicity: b.multiplicity,
                })
                .collect(),
            layout: self.layout.clone(),
            dim: self.dim,
        }
    }

    pub fn multiplicities(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.multiplicity).collect()
    }

    pub fn rho_blocks(&self) -> Vec<HermitianMatrix> {
        self.blocks.iter().map(|b| b.rho.clone()).collect()
    }

    pub fn sigma_blocks(&self) -> Vec<HermitianMatrix> {
        self.blocks.iter().map(|b| b.sigma.clone()).collect()
    }

    /// `Σ m_k tr X_k`.
    pub fn trace(&self, x: &[HermitianMatrix]) -> f64 {
        self.blocks.iter().zip(x).map(|(b, xk)| b.multiplicity * xk.trace()).sum()
    }

    /// `Σ m_k ⟨A_k, B_k⟩`.
    pub fn inner(&self, a: &[HermitianMatrix], b: &[HermitianMatrix]) -> f64 {
        self.blocks
            .iter()
            .zip(a.iter().zip(b))
            .map(|(blk, (x, y))| blk.multiplicity * x.inner(y))
            .sum()
    }

    /// `½ Σ m_k ‖a_k − b_k‖₁`.
    pub fn trace_distance(&self, a: &[HermitianMatrix], b: &[HermitianMatrix]) -> Result<f64> {
        let mut t = 0.0;
        for (blk, (x, y)) in self.blocks.iter().zip(a.iter().zip(b)) {
            let e = eigh(&x.sub(y))?;
            t += blk.multiplicity * e.eigenvalues.iter().map(|l| l.abs()).sum::<f64>();
        }
        Ok((0.5 * t).clamp(0.0, 1.0))
    }

    /// `(Σ m_k ‖√a_k √b_k‖₁)²`.
    pub fn fidelity(&self, a: &[HermitianMatrix], b: &[HermitianMatrix]) -> Result<f64> {
        let mut f = 0.0;
        for (blk, (x, y)) in self.blocks.iter().zip(a.iter().zip(b)) {
            f += blk.multiplicity * root_fidelity(x, y)?;
        }
        Ok((f * f).clamp(0.0, 1.0))
    }

    /// `√(1 − F)`, summing the per-block Bures terms.
    pub fn purified_distance(&self, a: &[HermitianMatrix], b: &[HermitianMatrix]) -> Result<f64> {
        let mut h = 0.0;
        for (blk, (x, y)) in self.blocks.iter().zip(a.iter().zip(b)) {
            h += 0.5 * blk.multiplicity * bures_sq(x, y)?;
        }
        Ok(purified_from_half_bures(h))
    }

    /// Rebuilds a full operator from per-block parts, when the layout allows.
    pub fn expand(&self, parts: &[HermitianMatrix]) -> Option<HermitianMatrix> {
        match &self.layout {
            Layout::Full => parts.first().cloned(),
            Layout::Diagonal(index) => {
                let mut m = CMatrix::zeros(index.len(), index.len());
                for (i, &b) in index.iter().enumerate() {
                    m[(i, i)] = parts[b].get(0, 0);
                }
                Some(HermitianMatrix::symmetrized(m))
            }
            Layout::Reduced => None,
        }
    }

    /// Expands a block state into a [`DensityMatrix`], if possible.
    pub fn expand_state(&self, parts: &[HermitianMatrix]) -> Option<DensityMatrix> {
        self.expand(parts).map(DensityMatrix::new_unchecked)
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0f64;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}

/// Natural log of `n!`, summed exactly term by term.
pub(crate) fn ln_factorial_table(n: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(n + 1);
    let mut acc = 0.0f64;
    t.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        t.push(acc);
    }
    t
}

/// Calls `f` on every composition of `n` into `k` non-negative parts.
pub(crate) fn for_each_composition(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut parts = vec![0usize; k];
    fn rec(parts: &mut Vec<usize>, pos: usize, left: usize, f: &mut impl FnMut(&[usize])) {
        if pos + 1 == parts.len() {
            parts[pos] = left;
            f(parts);
            return;
        }
        for t in (0..=left).rev() {
            parts[pos] = t;
            rec(parts, pos + 1, left - t, f);
        }
    }
    if k == 0 {
        return;
    }
    rec(&mut parts, 0, n, &mut f);
}

pub(crate) fn count_compositions(n: usize, k: usize) -> f64 {
    binomial(n + k - 1, k - 1)
}

fn type_class_power(base: &BlockDichotomy, n: usize) -> Result<BlockDichotomy> {
    let k = base.blocks.len();
    let count = count_compositions(n, k);
    if count > MAX_BLOCKS as f64 {
        return Err(Error::DimensionCap {
            dim: count as usize,
            cap: MAX_BLOCKS,
        });
    }
    let lf = ln_factorial_table(n);
    let lp: Vec<f64> = base.blocks.iter().map(|b| b.rho.get(0, 0).re.ln()).collect();
    let lq: Vec<f64> = base.blocks.iter().map(|b| b.sigma.get(0, 0).re.ln()).collect();
    let lm: Vec<f64> = base.blocks.iter().map(|b| b.multiplicity.ln()).collect();
    let mut blocks = Vec::with_capacity(count as usize);
    for_each_composition(n, k, |t| {
        let mut a = 0.0;
        let mut b = 0.0;
        let mut w = lf[n];
        for i in 0..k {
            if t[i] > 0 {
                a += t[i] as f64 * lp[i];
                b += t[i] as f64 * lq[i];
                w += t[i] as f64 * lm[i] - lf[t[i]];
            }
        }
        blocks.push(Block {
            rho: HermitianMatrix::from_real_diagonal(&[a.exp()]),
            sigma: HermitianMatrix::from_real_diagonal(&[b.exp()]),
            multiplicity: w.exp().round().max(1.0),
        });
    });
    Ok(BlockDichotomy {
        blocks,
        layout: Layout::Reduced,
        dim: base.dim.powi(n as i32),
    })
}

/// Symmetric power `Sym^k(A)` of a 2×2 matrix in the orthonormal Dicke basis.
pub(crate) fn symmetric_power(a: &CMatrix, k: usize) -> CMatrix {
    let (a00, a01, a10, a11) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let mut out = CMatrix::zeros(k + 1, k + 1);
    for b in 0..=k {
        // (a00 + a10 t)^{k−b} (a01 + a11 t)^b, coefficient of t^a.
        let p1: Vec<C64> = (0..=k - b)
            .map(|s| a00.powi((k - b - s) as i32) * a10.powi(s as i32) * binomial(k - b, s))
            .collect();
        let p2: Vec<C64> = (0..=b)
            .map(|s| a01.powi((b - s) as i32) * a11.powi(s as i32) * binomial(b, s))
            .collect();
        for (i, &u) in p1.iter().enumerate() {
            for (j, &v) in p2.iter().enumerate() {
                out[(i + j, b)] += u * v;
            }
        }
    }
    for a in 0..=k {
        for b in 0..=k {
            out[(a, b)] *= (binomial(k, b) / binomial(k, a)).sqrt();
        }
    }
    out
}

fn schur_weyl_power(rho: &HermitianMatrix, sigma: &HermitianMatrix, n: usize) -> BlockDichotomy {
    let det = |m: &CMatrix| m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let (r, s) = (rho.as_matrix(), sigma.as_matrix());
    let (dr, ds) = (det(r), det(s));
    let mut blocks = Vec::new();
    for l2 in 0..=n / 2 {
        let k = n - 2 * l2;
        let mult = binomial(n, l2) - if l2 > 0 { binomial(n, l2 - 1) } else { 0.0 };
        let br = symmetric_power(r, k) * dr.powi(l2 as i32);
        let bs = symmetric_power(s, k) * ds.powi(l2 as i32);
        blocks.push(Block {
            rho: HermitianMatrix::symmetrized(br),
            sigma: HermitianMatrix::symmetrized(bs),
            multiplicity: mult,
        });
    }
    BlockDichotomy {
        blocks,
        layout: Layout::Reduced,
        dim: 2f64.powi(n as i32),
    }
}
