//! Generalized eigenproblem `A u = μ M u` and the resolvent `(A − μM)⁻¹ M`.
//!
//! Sparse work goes through a banded LU with partial pivoting (the tensor
//! numbering keeps the band narrow) and a restarted shift-invert Arnoldi
//! iteration. Small problems can be solved densely through a Cholesky
//! reduction of the mass matrix.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretization::{AssembledOperator, CsrMatrix};
use crate::error::{Error, Result};

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Largest problem `solve_dense` accepts.
pub const DENSE_CAP: usize = 3000;
/// Pivots below this fraction of `max |a_ij|` count as breakdown.
const PIVOT_TOL: f64 = 1e-13;

/// LU factorization of a banded matrix with partial pivoting (row
/// interchanges only, LINPACK-style unpermuted multipliers).
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    // row r holds columns r-kl ..= r+kl+ku
    data: Vec<C>,
    lmul: Vec<C>,
    piv: Vec<usize>,
}

impl BandedLu {
    /// Factors `a`. On breakdown returns the elimination step that failed.
    pub fn factor(a: &CsrMatrix) -> std::result::Result<Self, usize> {
        let n = a.rows;
        let bw = a.bandwidth();
        let (kl, ku) = (bw, bw);
        let width = 2 * kl + ku + 1;
        let mut data = vec![ZERO; n * width];
        let scale = a.max_abs();
        for r in 0..n {
            for (c, v) in a.row(r) {
                data[r * width + c + kl - r] = v;
            }
        }
        let mut lu = Self { n, kl, ku, width, data, lmul: vec![ZERO; n * kl.max(1)], piv: vec![0; n] };
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.at(k, k).norm();
            for r in k + 1..=last {
                let v = lu.at(r, k).norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > PIVOT_TOL * scale) {
                return Err(k);
            }
            lu.piv[k] = p;
            let cmax = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=cmax {
                    let (i, j) = (lu.idx(k, c), lu.idx(p, c));
                    lu.data.swap(i, j);
                }
            }
            let pivot = lu.at(k, k);
            for r in k + 1..=last {
                let m = lu.at(r, k) / pivot;
                lu.lmul[k * kl + (r - k - 1)] = m;
                let ir = lu.idx(r, k);
                lu.data[ir] = ZERO;
                if m == ZERO {
                    continue;
                }
                for c in k + 1..=cmax {
                    let u = lu.at(k, c);
                    let i = lu.idx(r, c);
                    lu.data[i] -= m * u;
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        r * self.width + c + self.kl - r
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> C {
        self.data[self.idx(r, c)]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Overwrites `b` with the solution of `A x = b`.
    pub fn solve_in_place(&self, b: &mut [C]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == ZERO {
                continue;
            }
            for r in k + 1..=(k + kl).min(n - 1) {
                b[r] -= self.lmul[k * kl + (r - k - 1)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for c in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.at(k, c) * b[c];
            }
            b[k] = s / self.at(k, k);
        }
    }

    pub fn solve(&self, b: &[C]) -> Vec<C> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dense,
    ShiftInvert,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenPair {
    #[serde(serialize_with = "crate::ser_complex")]
    pub mu: C,
    /// `‖Au − μMu‖ / ‖u‖_M`.
    pub residual: f64,
    /// `‖Au − μMu‖ / ((‖A‖₁ + |μ| ‖M‖₁) ‖u‖)`.
    pub backward_error: f64,
    #[serde(skip)]
    pub vector: Option<Vec<C>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenResult {
    pub pairs: Vec<EigenPair>,
    pub method: Method,
    #[serde(serialize_with = "crate::ser_opt_complex")]
    pub shift: Option<C>,
}

impl EigenResult {
    pub fn values(&self) -> Vec<C> {
        self.pairs.iter().map(|p| p.mu).collect()
    }

    pub fn max_backward_error(&self) -> f64 {
        self.pairs.iter().fold(0.0, |m, p| m.max(p.backward_error))
    }
}

/// Recomputes both residual measures of `(μ, u)` against the sparse pencil.
pub fn pair_residuals(op: &AssembledOperator, mu: C, u: &[C]) -> (f64, f64) {
    let au = op.a.matvec(u);
    let mu_v = op.m.matvec(u);
    let r = au.iter().zip(&mu_v).map(|(a, m)| (a - mu * m).norm_sqr()).sum::<f64>().sqrt();
    let m_norm = u.iter().zip(&mu_v).map(|(a, b)| (a.conj() * b).re).sum::<f64>().max(0.0).sqrt();
    let two = u.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let scale = (op.a.norm1() + mu.norm() * op.m.norm1()) * two;
    (r / m_norm.max(f64::MIN_POSITIVE), r / scale.max(f64::MIN_POSITIVE))
}

fn dense(a: &CsrMatrix) -> Mat<c64> {
    let mut out = Mat::<c64>::zeros(a.rows, a.cols);
    for r in 0..a.rows {
        for (c, v) in a.row(r) {
            out[(r, c)] = v;
        }
    }
    out
}

/// All eigenpairs by dense reduction to `M⁻¹A`, sorted by `Re μ`. Residuals use the sparse pencil.
pub fn solve_dense(op: &AssembledOperator) -> Result<EigenResult> {
    solve_dense_with(op, true)
}

pub fn solve_dense_with(op: &AssembledOperator, keep_vectors: bool) -> Result<EigenResult> {
    let n = op.dofs();
    if n > DENSE_CAP {
        return Err(Error::SizeCap { size: n, cap: DENSE_CAP });
    }
    let a = dense(&op.a);
    let m = dense(&op.m);
    // M is Hermitian positive definite, so the pencil reduces to M⁻¹A; the
    // standard Schur path is far faster than QZ at these sizes
    let llt = m.llt(Side::Lower).map_err(|e| Error::Dense(format!("mass matrix is not positive definite: {e:?}")))?;
    let b = llt.solve(&a);
    let ev = b.eigen().map_err(|e| Error::Dense(format!("{e:?}")))?;
    let (s, u) = (ev.S(), ev.U());
    let mut pairs = Vec::with_capacity(n);
    for j in 0..n {
        let mu = s[j];
        let v: Vec<C> = (0..n).map(|i| u[(i, j)]).collect();
        let (residual, backward_error) = pair_residuals(op, mu, &v);
        pairs.push(EigenPair { mu, residual, backward_error, vector: keep_vectors.then_some(v) });
    }
    pairs.sort_by(|p, q| p.mu.re.total_cmp(&q.mu.re).then(p.mu.im.total_cmp(&q.mu.im)));
    Ok(EigenResult { pairs, method: Method::Dense, shift: None })
}

/// Factors `A − σ M`; breakdown becomes `ShiftOnSpectrum`.
pub fn factor_shifted(op: &AssembledOperator, sigma: C) -> Result<BandedLu> {
    let shifted = op.a.add_scaled(-sigma, &op.m);
    BandedLu::factor(&shifted).map_err(|_| Error::ShiftOnSpectrum(sigma))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArnoldiOptions {
    /// Convergence tolerance on the transformed problem, relative to `|θ|`.
    pub tol: f64,
    pub max_restarts: usize,
    /// Krylov dimension; `None` means `4k + 20`.
    pub krylov_dim: Option<usize>,
    pub seed: u64,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_restarts: 60, krylov_dim: None, seed: 0x5eed }
    }
}

/// `k` eigenvalues nearest `σ` by shift-invert Arnoldi with thick restarts.
pub fn solve_shift_invert(op: &AssembledOperator, sigma: C, k: usize, tol: f64, max_iter: usize) -> Result<EigenResult> {
    solve_shift_invert_with(op, sigma, k, &ArnoldiOptions { tol, max_restarts: max_iter, ..Default::default() })
}

pub fn solve_shift_invert_with(op: &AssembledOperator, sigma: C, k: usize, opts: &ArnoldiOptions) -> Result<EigenResult> {
    if k == 0 || k > 50 {
        return Err(Error::Config(format!("eigenvalue count must be in 1..=50, got {k}")));
    }
    let n = op.dofs();
    if k >= n {
        return Err(Error::Config(format!("eigenvalue count {k} must be below the dof count {n}")));
    }
    let lu = factor_shifted(op, sigma)?;
    let apply = |x: &[C]| -> Vec<C> {
        let mut y = op.m.matvec(x);
        lu.solve_in_place(&mut y);
        y
    };
    let m = opts.krylov_dim.unwrap_or(4 * k + 20).min(n).max(k + 2);
    let keep = (k + (m - k) / 3).min(m - 1).max(k);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<C> = (0..n).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    normalize(&mut start);

    // Krylov decomposition T V_m = V_m H_m + v_{m} h_mᵀ
    let mut basis: Vec<Vec<C>> = vec![start];
    let mut h = vec![vec![ZERO; m]; m + 1];
    let mut filled = 0usize;
    let mut restarts = 0usize;
    loop {
        let mut size = m;
        for j in filled..m {
            let mut w = apply(&basis[j]);
            let coeffs = cgs2(&basis, &mut w);
            for (i, c) in coeffs.iter().enumerate() {
                h[i][j] = *c;
            }
            let beta = norm(&w);
            h[j + 1][j] = C::new(beta, 0.0);
            if beta <= 1e-13 * coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() {
                // invariant subspace found
                size = j + 1;
                break;
            }
            w.iter_mut().for_each(|a| *a /= beta);
            basis.push(w);
        }
        let hm = Mat::<c64>::from_fn(size, size, |i, j| h[i][j]);
        let evd = hm.eigen().map_err(|e| Error::Dense(format!("{e:?}")))?;
        let (theta, y) = (evd.S(), evd.U());
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| theta[b].norm().total_cmp(&theta[a].norm()));
        let estimate = |col: usize| -> f64 {
            if size < m {
                return 0.0;
            }
            let ycol = norm_col(y, col);
            (0..size).map(|c| h[size][c] * y[(c, col)]).sum::<C>().norm() / ycol
        };
        let wanted = &order[..k.min(size)];
        let converged: Vec<bool> = wanted.iter().map(|&c| estimate(c) <= opts.tol * theta[c].norm()).collect();
        let all = converged.iter().all(|&c| c) && wanted.len() == k;
        if all || size < m || restarts >= opts.max_restarts {
            let vm = &basis[..size];
            let mut pairs = Vec::new();
            for (&col, &ok) in wanted.iter().zip(&converged) {
                if !ok {
                    continue;
                }
                let t = theta[col];
                let mu = sigma + C::new(1.0, 0.0) / t;
                let mut x = vec![ZERO; n];
                for (c, v) in vm.iter().enumerate() {
                    let coef = y[(c, col)];
                    x.iter_mut().zip(v).for_each(|(a, b)| *a += coef * b);
                }
                let (residual, backward_error) = pair_residuals(op, mu, &x);
                pairs.push(EigenPair { mu, residual, backward_error, vector: Some(x) });
            }
            pairs.sort_by(|p, q| (p.mu - sigma).norm().total_cmp(&(q.mu - sigma).norm()));
            let result = EigenResult { pairs, method: Method::ShiftInvert, shift: Some(sigma) };
            if result.pairs.len() < k {
                return Err(Error::NoConvergence {
                    converged: result.pairs.len(),
                    wanted: k,
                    restarts,
                    partial: Box::new(result),
                });
            }
            return Ok(result);
        }

        // thick restart onto the `keep` leading Ritz vectors
        restarts += 1;
        let kept: Vec<usize> = order[..keep].to_vec();
        let q = orthonormal_columns(y, &kept, size);
        let p = q.len();
        let hq: Vec<Vec<C>> = q
            .iter()
            .map(|qc| (0..size).map(|i| (0..size).map(|c| h[i][c] * qc[c]).sum()).collect())
            .collect();
        let mut new_h = vec![vec![ZERO; m]; m + 1];
        for (j, hqj) in hq.iter().enumerate() {
            for (i, qi) in q.iter().enumerate() {
                new_h[i][j] = qi.iter().zip(hqj).map(|(a, b)| a.conj() * b).sum();
            }
            new_h[p][j] = (0..size).map(|c| h[size][c] * q[j][c]).sum();
        }
        let mut new_basis: Vec<Vec<C>> = q
            .iter()
            .map(|qc| {
                let mut v = vec![ZERO; n];
                for (c, b) in basis[..size].iter().enumerate() {
                    v.iter_mut().zip(b).for_each(|(a, x)| *a += qc[c] * x);
                }
                v
            })
            .collect();
        new_basis.push(basis.swap_remove(size));
        basis = new_basis;
        h = new_h;
        filled = p;
    }
}

fn norm(v: &[C]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut [C]) {
    let s = norm(v);
    v.iter_mut().for_each(|a| *a /= s);
}

fn norm_col(y: faer::MatRef<'_, c64>, col: usize) -> f64 {
    (0..y.nrows()).map(|i| y[(i, col)].norm_sqr()).sum::<f64>().sqrt()
}

/// Classical Gram–Schmidt with one reorthogonalization pass; returns the
/// accumulated coefficients.
fn cgs2(basis: &[Vec<C>], w: &mut [C]) -> Vec<C> {
    let mut total = vec![ZERO; basis.len()];
    for _ in 0..2 {
        let coeffs: Vec<C> = basis.iter().map(|b| b.iter().zip(w.iter()).map(|(a, x)| a.conj() * x).sum()).collect();
        for (b, c) in basis.iter().zip(&coeffs) {
            w.iter_mut().zip(b).for_each(|(x, a)| *x -= c * a);
        }
        total.iter_mut().zip(&coeffs).for_each(|(t, c)| *t += c);
    }
    total
}

/// Orthonormal basis (modified Gram–Schmidt) of the chosen columns of `y`.
fn orthonormal_columns(y: faer::MatRef<'_, c64>, cols: &[usize], size: usize) -> Vec<Vec<C>> {
    let mut out: Vec<Vec<C>> = Vec::with_capacity(cols.len());
    for &c in cols {
        let mut v: Vec<C> = (0..size).map(|i| y[(i, c)]).collect();
        for _ in 0..2 {
            for q in &out {
                let d: C = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                v.iter_mut().zip(q).for_each(|(x, a)| *x -= d * a);
            }
        }
        let s = norm(&v);
        if s > 1e-10 {
            v.iter_mut().for_each(|a| *a /= s);
            out.push(v);
        }
    }
    out
}

/// Factorization of `A − μM` reusable across right-hand sides.
#[derive(Clone, Debug)]
pub struct Resolvent {
    mu: C,
    lu: BandedLu,
    shifted: CsrMatrix,
}

/// Relative residual accepted for a resolvent solve.
pub const RESOLVENT_TOL: f64 = 1e-9;

impl Resolvent {
    pub fn new(op: &AssembledOperator, mu: C) -> Result<Self> {
        let shifted = op.a.add_scaled(-mu, &op.m);
        let lu = BandedLu::factor(&shifted).map_err(|_| Error::SingularPencil(mu))?;
        Ok(Self { mu, lu, shifted })
    }

    pub fn mu(&self) -> C {
        self.mu
    }

    /// `u = (A − μM)⁻¹ M f`, with up to two steps of iterative refinement.
    pub fn apply(&self, op: &AssembledOperator, f: &[C]) -> Result<Vec<C>> {
        let rhs = op.m.matvec(f);
        self.solve(&rhs)
    }

    /// `u = (A − μM)⁻¹ b`.
    pub fn solve(&self, rhs: &[C]) -> Result<Vec<C>> {
        let scale = norm(rhs);
        let mut u = self.lu.solve(rhs);
        for _ in 0..3 {
            let r: Vec<C> = self.shifted.matvec(&u).iter().zip(rhs).map(|(a, b)| b - a).collect();
            let rn = norm(&r);
            if !rn.is_finite() || !u.iter().all(|a| a.is_finite()) {
                return Err(Error::SingularPencil(self.mu));
            }
            if rn <= RESOLVENT_TOL * scale {
                break;
            }
            let d = self.lu.solve(&r);
            u.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
        }
        let r: Vec<C> = self.shifted.matvec(&u).iter().zip(rhs).map(|(a, b)| b - a).collect();
        // a solution this large means the pencil is numerically singular
        let growth = norm(&u) * self.shifted.norm1() / scale.max(f64::MIN_POSITIVE);
        if norm(&r) > RESOLVENT_TOL * scale || growth > 1e13 {
            return Err(Error::SingularPencil(self.mu));
        }
        Ok(u)
    }
}

/// `(A − μM)⁻¹ M F`.
pub fn resolvent_apply(op: &AssembledOperator, mu: C, f: &[C]) -> Result<Vec<C>> {
    Resolvent::new(op, mu)?.apply(op, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    #[test]
    fn banded_lu_solves_with_pivoting() {
        // needs a row swap at step 0
        let a = CsrMatrix::from_dense(&[
            vec![c(1e-3), c(2.0), ZERO, ZERO],
            vec![c(3.0), c(1.0), C::new(0.0, 1.0), ZERO],
            vec![ZERO, c(1.0), c(4.0), c(1.0)],
            vec![ZERO, ZERO, c(2.0), C::new(5.0, -1.0)],
        ]);
        let lu = BandedLu::factor(&a).unwrap();
        let b = vec![c(1.0), C::new(2.0, 1.0), c(-1.0), c(0.5)];
        let x = lu.solve(&b);
        let ax = a.matvec(&x);
        for (p, q) in ax.iter().zip(&b) {
            assert!((p - q).norm() < 1e-14);
        }
    }

    #[test]
    fn singular_band_is_detected() {
        let a = CsrMatrix::from_dense(&[vec![c(1.0), c(1.0)], vec![c(1.0), c(1.0)]]);
        assert!(BandedLu::factor(&a).is_err());
    }
}
