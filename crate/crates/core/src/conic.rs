//! Dense semidefinite programming over complex Hermitian blocks.
//!
//! Standard form
//!
//! ```text
//!   minimize   Σ_b ⟨C_b, X_b⟩
//!   subject to Σ_b ⟨A_ib, X_b⟩ = b_i,   X_b ⪰ 0,
//! ```
//!
//! with `⟨A, X⟩ = Re tr(AX)`, and its dual `max bᵀy s.t. C − Σ y_i A_i = Z ⪰ 0`.
//! Solved with an infeasible primal-dual interior-point method using the
//! HKM search direction and a Mehrotra predictor-corrector. Complex blocks
//! are handled natively; a scalar variable is a 1×1 block.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c64, eigh, hermitian_basis, CMatrix, HermitianMatrix, C64};

/// Largest total block dimension accepted by [`solve`].
pub const MAX_TOTAL_DIM: usize = 256;
pub const MAX_ITERATIONS: usize = 200;
/// Target for relative primal/dual residuals and the relative gap.
pub const TOLERANCE: f64 = 1e-8;

/// A sparse Hermitian coefficient matrix as `(row, col, value)` triples.
pub type Entries = Vec<(usize, usize, C64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub usize);

/// The contribution `⟨A, X_block⟩` of one block to a linear constraint.
#[derive(Debug, Clone)]
pub struct LinearTerm {
    pub block: BlockId,
    pub entries: Entries,
}

impl LinearTerm {
    /// `coeff · X[i][i]` summed over `i ∈ [offset, offset + len)`.
    pub fn partial_trace(block: BlockId, offset: usize, len: usize, coeff: f64) -> Self {
        let entries = (offset..offset + len).map(|i| (i, i, c64(coeff, 0.0))).collect();
        Self { block, entries }
    }

    /// `coeff · Re X[i][j]`.
    pub fn entry_real(block: BlockId, i: usize, j: usize, coeff: f64) -> Self {
        let entries = if i == j {
            vec![(i, i, c64(coeff, 0.0))]
        } else {
            vec![(i, j, c64(coeff / 2.0, 0.0)), (j, i, c64(coeff / 2.0, 0.0))]
        };
        Self { block, entries }
    }

    /// `coeff · x` for a 1×1 block `x`.
    pub fn scalar(block: BlockId, coeff: f64) -> Self {
        Self::entry_real(block, 0, 0, coeff)
    }

    /// `coeff · Re tr(H · X[off.., off..])` for a dense Hermitian `H`.
    pub fn weighted(block: BlockId, h: &HermitianMatrix, offset: usize, coeff: f64) -> Self {
        let d = h.dim();
        let mut entries = Vec::new();
        for i in 0..d {
            for j in 0..d {
                let v = h.get(i, j) * coeff;
                if v.norm() > 0.0 {
                    entries.push((offset + i, offset + j, v));
                }
            }
        }
        Self { block, entries }
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub terms: Vec<LinearTerm>,
    pub rhs: f64,
}

/// A semidefinite program in standard form, assembled incrementally.
#[derive(Debug, Clone, Default)]
pub struct SdpProblem {
    dims: Vec<usize>,
    cost: Vec<Entries>,
    constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, dim: usize) -> BlockId {
        self.dims.push(dim);
        self.cost.push(Vec::new());
        BlockId(self.dims.len() - 1)
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Adds `coeff · ⟨H, X_block⟩` to the objective.
    pub fn add_cost(&mut self, block: BlockId, h: &HermitianMatrix, coeff: f64) {
        let t = LinearTerm::weighted(block, h, 0, coeff);
        self.add_cost_term(t);
    }

    pub fn add_cost_term(&mut self, term: LinearTerm) {
        if let Some(c) = self.cost.get_mut(term.block.0) {
            c.extend(term.entries);
        } else {
            // Out-of-range blocks are reported by validation.
            self.cost.resize(term.block.0 + 1, Vec::new());
            self.cost[term.block.0].extend(term.entries);
        }
    }

    pub fn add_constraint(&mut self, terms: Vec<LinearTerm>, rhs: f64) {
        self.constraints.push(Constraint { terms, rhs });
    }

    /// Imposes the matrix equation
    /// `Σ coeff · X_block[off.., off..] + Σ x_block · M = rhs`
    /// with one scalar constraint per element of a Hermitian basis.
    pub fn add_matrix_equality(
        &mut self,
        subs: &[(BlockId, usize, f64)],
        scalars: &[(BlockId, &HermitianMatrix)],
        rhs: &HermitianMatrix,
    ) {
        let d = rhs.dim();
        for e in hermitian_basis(d) {
            let mut terms = Vec::with_capacity(subs.len() + scalars.len());
            for &(block, off, coeff) in subs {
                let entries = e
                    .iter()
                    .map(|&(i, j, v)| (off + i, off + j, v * coeff))
                    .collect();
                terms.push(LinearTerm { block, entries });
            }
            for &(block, m) in scalars {
                let w = basis_inner(&e, m);
                if w != 0.0 {
                    terms.push(LinearTerm::scalar(block, w));
                }
            }
            self.add_constraint(terms, basis_inner(&e, rhs));
        }
    }

    /// Scales the objective by `c`.
    pub fn scale_objective(&mut self, c: f64) {
        for block in &mut self.cost {
            for e in block.iter_mut() {
                e.2 *= c;
            }
        }
    }
}

fn basis_inner(e: &[(usize, usize, C64)], m: &HermitianMatrix) -> f64 {
    e.iter().map(|&(i, j, v)| (v * m.get(j, i)).re).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SdpStatus {
    Optimal,
    /// The primal constraints admit no PSD solution (certified by a dual ray).
    Infeasible,
    /// The primal objective is unbounded below (certified by a primal ray).
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub primal: Vec<HermitianMatrix>,
    pub dual: Vec<f64>,
    pub dual_slack: Vec<HermitianMatrix>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    /// `‖b − A(X)‖_∞`.
    pub primal_residual: f64,
    /// `‖C − Aᵀy − Z‖_F`.
    pub dual_residual: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn block(&self, id: BlockId) -> &HermitianMatrix {
        &self.primal[id.0]
    }

    /// Value of a 1×1 block.
    pub fn scalar(&self, id: BlockId) -> f64 {
        self.primal[id.0].get(0, 0).re
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

/// Canonical internal form: merged sparse entries per (constraint, block).
struct Compiled {
    dims: Vec<usize>,
    cost: Vec<CMatrix>,
    /// `a[i]` lists `(block, entries)` for constraint `i`.
    a: Vec<Vec<(usize, Entries)>>,
    b: DVector<f64>,
    /// Factor each constraint row was multiplied by during equilibration.
    row_scale: DVector<f64>,
    /// Constraints touching each block.
    touching: Vec<Vec<usize>>,
}

fn merge_entries(entries: &[(usize, usize, C64)], dim: usize, what: &str) -> Result<Entries> {
    let mut map: BTreeMap<(usize, usize), C64> = BTreeMap::new();
    let mut scale = 0.0f64;
    for &(i, j, v) in entries {
        if i >= dim || j >= dim {
            return Err(Error::InvalidProblem(format!(
                "{what}: entry ({i}, {j}) outside a block of dimension {dim}"
            )));
        }
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::InvalidProblem(format!("{what}: non-finite coefficient")));
        }
        *map.entry((i, j)).or_insert(c64(0.0, 0.0)) += v;
        scale = scale.max(v.norm());
    }
    let tol = 1e-12 * scale.max(1.0);
    for (&(i, j), &v) in &map {
        let t = map.get(&(j, i)).copied().unwrap_or(c64(0.0, 0.0));
        if (v - t.conj()).norm() > tol {
            return Err(Error::InvalidProblem(format!(
                "{what}: coefficient matrix is not Hermitian at ({i}, {j})"
            )));
        }
    }
    Ok(map
        .into_iter()
        .filter(|(_, v)| v.norm() > 0.0)
        .map(|((i, j), v)| (i, j, v))
        .collect())
}

fn compile(p: &SdpProblem) -> Result<Compiled> {
    if p.dims.is_empty() {
        return Err(Error::InvalidProblem("no variable blocks".into()));
    }
    if let Some(pos) = p.dims.iter().position(|&d| d == 0) {
        return Err(Error::InvalidProblem(format!("block {pos} has dimension 0")));
    }
    let total = p.total_dim();
    if total > MAX_TOTAL_DIM {
        return Err(Error::InvalidProblem(format!(
            "total block dimension {total} exceeds {MAX_TOTAL_DIM}"
        )));
    }
    if p.cost.len() > p.dims.len() {
        return Err(Error::InvalidProblem("objective references an unknown block".into()));
    }
    let mut cost = Vec::with_capacity(p.dims.len());
    for (b, &d) in p.dims.iter().enumerate() {
        let merged = merge_entries(&p.cost[b], d, &format!("objective block {b}"))?;
        let mut m = CMatrix::zeros(d, d);
        for (i, j, v) in merged {
            m[(i, j)] += v;
        }
        cost.push(m);
    }
    let mut a = Vec::with_capacity(p.constraints.len());
    let mut row_scale = DVector::from_element(p.constraints.len(), 1.0);
    let mut touching = vec![Vec::new(); p.dims.len()];
    for (ci, c) in p.constraints.iter().enumerate() {
        if !c.rhs.is_finite() {
            return Err(Error::InvalidProblem(format!("constraint {ci}: non-finite rhs")));
        }
        let mut per_block: BTreeMap<usize, Entries> = BTreeMap::new();
        for t in &c.terms {
            if t.block.0 >= p.dims.len() {
                return Err(Error::InvalidProblem(format!(
                    "constraint {ci} references unknown block {}",
                    t.block.0
                )));
            }
            per_block.entry(t.block.0).or_default().extend(t.entries.iter().copied());
        }
        let mut row = Vec::new();
        for (b, entries) in per_block {
            let merged = merge_entries(&entries, p.dims[b], &format!("constraint {ci}"))?;
            if !merged.is_empty() {
                touching[b].push(ci);
                row.push((b, merged));
            }
        }
        // Rows are equilibrated to unit Frobenius norm.
        let norm = row
            .iter()
            .flat_map(|(_, es)| es.iter())
            .map(|e| e.2.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if norm > 0.0 {
            row_scale[ci] = 1.0 / norm;
            for (_, es) in row.iter_mut() {
                for e in es.iter_mut() {
                    e.2 /= norm;
                }
            }
        }
        a.push(row);
    }
    let b = DVector::from_iterator(p.constraints.len(), p.constraints.iter().map(|c| c.rhs))
        .component_mul(&row_scale);
    Ok(Compiled {
        dims: p.dims.clone(),
        cost,
        a,
        b,
        row_scale,
        touching,
    })
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c64(0.5, 0.0)
}

fn inner(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y.iter()).map(|(u, v)| (u.conj() * v).re).sum::<f64>())
        .sum()
}

fn frob(a: &[CMatrix]) -> f64 {
    a.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

impl Compiled {
    fn m(&self) -> usize {
        self.a.len()
    }

    /// `A(X)_i = Σ_b Re tr(A_ib X_b)`.
    fn apply(&self, x: &[CMatrix]) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            self.a.iter().map(|row| {
                row.iter()
                    .map(|(b, es)| es.iter().map(|&(i, j, v)| (v * x[*b][(j, i)]).re).sum::<f64>())
                    .sum::<f64>()
            }),
        )
    }

    /// `Aᵀ(y) = Σ_i y_i A_i`.
    fn adjoint(&self, y: &DVector<f64>) -> Vec<CMatrix> {
        let mut out: Vec<CMatrix> = self.dims.iter().map(|&d| CMatrix::zeros(d, d)).collect();
        for (row, &yi) in self.a.iter().zip(y.iter()) {
            if yi == 0.0 {
                continue;
            }
            for (b, es) in row {
                for &(i, j, v) in es {
                    out[*b][(i, j)] += v * yi;
                }
            }
        }
        out
    }

    /// Schur complement `M_ij = Re Σ_b tr(A_ib X_b A_jb W_b)` with `W = Z⁻¹`.
    fn schur(&self, x: &[CMatrix], w: &[CMatrix]) -> DMatrix<f64> {
        let m = self.m();
        let mut out = DMatrix::<f64>::zeros(m, m);
        for (b, cons) in self.touching.iter().enumerate() {
            let (xb, wb) = (&x[b], &w[b]);
            let entries: Vec<&Entries> = cons
                .iter()
                .map(|&ci| &self.a[ci].iter().find(|(bb, _)| *bb == b).expect("touching").1)
                .collect();
            for (p, &i) in cons.iter().enumerate() {
                for (q, &j) in cons.iter().enumerate().skip(p) {
                    // tr(A_i X A_j W) = Σ A_i[c,d] X[d,a] A_j[a,e] W[e,c]
                    let mut s = c64(0.0, 0.0);
                    for &(c, d, u) in entries[p] {
                        for &(a, e, v) in entries[q] {
                            s += u * v * xb[(d, a)] * wb[(e, c)];
                        }
                    }
                    out[(i, j)] += s.re;
                    if i != j {
                        out[(j, i)] += s.re;
                    }
                }
            }
        }
        out
    }
}

/// Largest `α` with `X + αΔ ⪰ 0`, or `∞` if unrestricted.
fn max_step(x: &CMatrix, delta: &CMatrix) -> f64 {
    let Some(ch) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = ch.l();
    let Some(s) = l.solve_lower_triangular(delta) else {
        return 0.0;
    };
    let Some(t) = l.solve_lower_triangular(&s.adjoint()) else {
        return 0.0;
    };
    match eigh(&HermitianMatrix::symmetrized(t)) {
        Ok(e) => {
            let lmin = e.min_eigenvalue();
            if lmin >= 0.0 {
                f64::INFINITY
            } else {
                -1.0 / lmin
            }
        }
        Err(_) => 0.0,
    }
}

fn solve_schur(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if m.nrows() == 0 {
        return Some(DVector::zeros(0));
    }
    if let Some(ch) = Cholesky::new(m.clone()) {
        let sol = ch.solve(rhs);
        if sol.iter().all(|v| v.is_finite()) {
            return Some(sol);
        }
    }
    let diag_max = m.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
    let mut reg = m.clone();
    for i in 0..reg.nrows() {
        reg[(i, i)] += 1e-13 * diag_max;
    }
    if let Some(ch) = Cholesky::new(reg) {
        let sol = ch.solve(rhs);
        if sol.iter().all(|v| v.is_finite()) {
            return Some(sol);
        }
    }
    let sol = m.clone().lu().solve(rhs)?;
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

struct Direction {
    dx: Vec<CMatrix>,
    dy: DVector<f64>,
    dz: Vec<CMatrix>,
}

/// Solves the program. Structural problems are rejected with
/// [`Error::InvalidProblem`]; numerical trouble ends in `IterLimit`.
pub fn solve(p: &SdpProblem) -> Result<SdpSolution> {
    let cp = compile(p)?;
    let nb = cp.dims.len();
    let m = cp.m();
    let n_total: f64 = cp.dims.iter().sum::<usize>() as f64;

    let b_norm = cp.b.component_div(&cp.row_scale).norm();
    let c_norm = frob(&cp.cost);

    // Starting point scaled to the data.
    let mut x = Vec::with_capacity(nb);
    let mut z = Vec::with_capacity(nb);
    for (blk, &d) in cp.dims.iter().enumerate() {
        let nd = d as f64;
        let mut xi = 10.0f64.max(nd.sqrt());
        let mut eta = 10.0f64.max(nd.sqrt()).max(cp.cost[blk].norm());
        for (ci, row) in cp.a.iter().enumerate() {
            if let Some((_, es)) = row.iter().find(|(bb, _)| *bb == blk) {
                let an = es.iter().map(|e| e.2.norm_sqr()).sum::<f64>().sqrt();
                xi = xi.max(nd * (1.0 + cp.b[ci].abs()) / (1.0 + an));
                eta = eta.max(an);
            }
        }
        x.push(CMatrix::identity(d, d) * c64(xi, 0.0));
        z.push(CMatrix::identity(d, d) * c64(eta, 0.0));
    }
    let mut y = DVector::<f64>::zeros(m);
    let mut gamma = 0.9;
    let mut best: Option<(f64, Vec<CMatrix>, DVector<f64>, Vec<CMatrix>)> = None;

    let finish = |status: SdpStatus,
                  x: Vec<CMatrix>,
                  y: DVector<f64>,
                  z: Vec<CMatrix>,
                  iterations: usize|
     -> SdpSolution {
        let rp = (&cp.b - cp.apply(&x)).component_div(&cp.row_scale);
        let aty = cp.adjoint(&y);
        let rd: Vec<CMatrix> = (0..nb).map(|k| &cp.cost[k] - &aty[k] - &z[k]).collect();
        let pv = inner(&cp.cost, &x);
        let dv = cp.b.dot(&y);
        SdpSolution {
            status,
            primal: x.into_iter().map(HermitianMatrix::symmetrized).collect(),
            dual: y.component_mul(&cp.row_scale).iter().copied().collect(),
            dual_slack: z.into_iter().map(HermitianMatrix::symmetrized).collect(),
            primal_value: pv,
            dual_value: dv,
            gap: (pv - dv).abs(),
            primal_residual: rp.amax(),
            dual_residual: frob(&rd),
            iterations,
        }
    };

    for iter in 0..MAX_ITERATIONS {
        let ax = cp.apply(&x);
        let rp = &cp.b - &ax;
        let aty = cp.adjoint(&y);
        let rd: Vec<CMatrix> = (0..nb).map(|k| &cp.cost[k] - &aty[k] - &z[k]).collect();
        let pobj = inner(&cp.cost, &x);
        let dobj = cp.b.dot(&y);
        let mu = inner(&x, &z) / n_total;

        let pinf = rp.component_div(&cp.row_scale).norm() / (1.0 + b_norm);
        let dinf = frob(&rd) / (1.0 + c_norm);
        let gap = (pobj - dobj).abs();
        let rel_gap = gap / (1.0 + pobj.abs().max(dobj.abs()));

        if pinf <= 0.1 * TOLERANCE && dinf <= 0.1 * TOLERANCE && rel_gap <= 0.1 * TOLERANCE {
            return Ok(finish(SdpStatus::Optimal, x, y, z, iter));
        }
        // Complementarity stands in for the gap when a large dual multiplier
        // inflates the latter.
        let comp = (mu * n_total).abs() / (1.0 + pobj.abs().max(dobj.abs()));
        let merit = pinf.max(dinf).max(rel_gap.min(comp));
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, x.clone(), y.clone(), z.clone()));
        }

        // Farkas certificates: a dual ray (primal infeasible) or a primal
        // ray (dual infeasible, primal unbounded).
        if dobj > 0.0 {
            let ray: Vec<CMatrix> = (0..nb).map(|k| &aty[k] + &z[k]).collect();
            if frob(&ray) / dobj <= TOLERANCE && dobj > 1e6 * (1.0 + c_norm) {
                return Ok(finish(SdpStatus::Infeasible, x, y, z, iter));
            }
        }
        if pobj < 0.0 {
            let xn = frob(&x);
            if ax.norm() / -pobj <= TOLERANCE && -pobj > 1e6 * (1.0 + b_norm) && xn.is_finite() {
                return Ok(finish(SdpStatus::Unbounded, x, y, z, iter));
            }
        }

        let mut w = Vec::with_capacity(nb);
        for zk in &z {
            match Cholesky::new(zk.clone()) {
                Some(ch) => w.push(hermitize(&ch.inverse())),
                None => return Ok(stalled(&finish, best, iter)),
            }
        }
        let schur = cp.schur(&x, &w);

        let direction = |sigma_mu: f64, corr: Option<&Direction>| -> Option<Direction> {
            // T = σμW − X − sym(X R_d W) − sym(ΔX_a ΔZ_a W)
            let mut t = Vec::with_capacity(nb);
            for k in 0..nb {
                let mut tk = &w[k] * c64(sigma_mu, 0.0) - &x[k] - hermitize(&(&x[k] * &rd[k] * &w[k]));
                if let Some(c) = corr {
                    tk -= hermitize(&(&c.dx[k] * &c.dz[k] * &w[k]));
                }
                t.push(tk);
            }
            let rhs = &rp - cp.apply(&t);
            let mut dy = solve_schur(&schur, &rhs)?;
            // Refine against the operator itself; the assembled Schur matrix
            // loses accuracy as the iterates approach the boundary.
            for _ in 0..3 {
                let atdy = cp.adjoint(&dy);
                let applied: Vec<CMatrix> = (0..nb).map(|k| hermitize(&(&x[k] * &atdy[k] * &w[k]))).collect();
                let res = &rhs - cp.apply(&applied);
                if res.norm() <= 1e-15 * (1.0 + rhs.norm()) {
                    break;
                }
                dy += solve_schur(&schur, &res)?;
            }
            let atdy = cp.adjoint(&dy);
            let dz: Vec<CMatrix> = (0..nb).map(|k| &rd[k] - &atdy[k]).collect();
            let dx: Vec<CMatrix> = (0..nb)
                .map(|k| &t[k] + hermitize(&(&x[k] * &atdy[k] * &w[k])))
                .collect();
            Some(Direction { dx, dy, dz })
        };
        let steps = |d: &Direction| -> (f64, f64) {
            let ap = (0..nb).map(|k| max_step(&x[k], &d.dx[k])).fold(f64::INFINITY, f64::min);
            let ad = (0..nb).map(|k| max_step(&z[k], &d.dz[k])).fold(f64::INFINITY, f64::min);
            (ap, ad)
        };

        let Some(pred) = direction(0.0, None) else {
            return Ok(stalled(&finish, best, iter));
        };
        let (ap, ad) = steps(&pred);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut mu_aff = 0.0;
        for k in 0..nb {
            let xa = &x[k] + &pred.dx[k] * c64(ap, 0.0);
            let za = &z[k] + &pred.dz[k] * c64(ad, 0.0);
            mu_aff += inner(std::slice::from_ref(&xa), std::slice::from_ref(&za));
        }
        mu_aff /= n_total;
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        let Some(dir) = direction(sigma * mu, Some(&pred)) else {
            return Ok(stalled(&finish, best, iter));
        };
        let (ap, ad) = steps(&dir);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        if !(ap > 1e-14 || ad > 1e-14) {
            return Ok(stalled(&finish, best, iter));
        }
        for k in 0..nb {
            x[k] = hermitize(&(&x[k] + &dir.dx[k] * c64(ap, 0.0)));
            z[k] = hermitize(&(&z[k] + &dir.dz[k] * c64(ad, 0.0)));
        }
        y += &dir.dy * ad;
        gamma = 0.9 + 0.09 * ap.min(ad);
    }
    Ok(stalled(&finish, best, MAX_ITERATIONS))
}

/// Returns the best iterate seen; accepted as optimal if it already meets
/// the looser reporting tolerances.
fn stalled<F>(
    finish: &F,
    best: Option<(f64, Vec<CMatrix>, DVector<f64>, Vec<CMatrix>)>,
    iterations: usize,
) -> SdpSolution
where
    F: Fn(SdpStatus, Vec<CMatrix>, DVector<f64>, Vec<CMatrix>, usize) -> SdpSolution,
{
    let (_, x, y, z) = best.expect("at least one iterate");
    let sol = finish(SdpStatus::IterLimit, x.clone(), y.clone(), z.clone(), iterations);
    let scale = sol.primal_value.abs().max(1.0);
    if sol.primal_residual <= TOLERANCE && sol.gap <= 1e-7 * scale && sol.dual_residual <= 1e-7 * scale {
        return finish(SdpStatus::Optimal, x, y, z, iterations);
    }
    sol
}
