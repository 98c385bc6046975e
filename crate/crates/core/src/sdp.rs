//! ADMM for the kernel k-means relaxation
//!
//! ```text
//! maximize ⟨K, X⟩  s.t.  X ⪰ 0,  X ≥ 0,  X1 = (n/r)1,  diag(X) = 1.
//! ```
//!
//! Two-block splitting with a scaled dual `U`:
//!
//! ```text
//! X ← Π_psd(Y − U + K/ρ)
//! W ← αX + (1 − α)Y
//! Y ← Π_poly(W + U)
//! U ← U + W − Y
//! ```
//!
//! with over-relaxation `α` (default 1.6; `α = 1` is the plain iteration).
//!
//! `Π_poly` projects onto `{X symmetric, X ≥ 0, X1 = (n/r)1, diag(X) = 1}` by
//! Dykstra's method between the affine part (closed form, see
//! [`project_affine`]) and the nonnegative orthant. The returned `X̂` is the
//! polytope iterate `Y`, so nonnegativity, unit diagonal and row sums hold to
//! the Dykstra tolerance and only the PSD constraint is approximate.

use std::io::Write;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::linalg;
use crate::model::ClusteringMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmParams {
    /// Augmented-Lagrangian weight ρ. `None` means `n / ‖K‖_F`.
    pub penalty: Option<f64>,
    pub max_iter: usize,
    /// Relative primal tolerance on `‖X − Y‖_F / max(‖X‖_F, ‖Y‖_F)`.
    pub tol_primal: f64,
    /// Relative dual tolerance on `‖ρ(Y − Y_prev)‖_F / ‖ρU‖_F`.
    pub tol_dual: f64,
    /// Snap to the rounded solution when it is an equally good balanced partition.
    pub polish: bool,
    /// Extra passes of up to `max_iter` iterations each, run only while
    /// unconverged. Every pass warm-starts from the last iterate with ρ
    /// divided by 10.
    pub continuation: usize,
    /// Over-relaxation α in `(0, 2)`; the Y and U steps see `αX + (1 − α)Y`.
    pub relaxation: f64,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            penalty: None,
            max_iter: 5000,
            tol_primal: 1e-5,
            tol_dual: 1e-5,
            polish: true,
            continuation: 0,
            relaxation: 1.6,
        }
    }
}

impl AdmmParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(rho) = self.penalty {
            if !(rho > 0.0) || !rho.is_finite() {
                return Err(Error::InvalidArgument(format!("penalty must be positive, got {rho}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::InvalidArgument(format!("relaxation must lie in (0, 2), got {}", self.relaxation)));
        }
        if !(self.tol_primal > 0.0) || !(self.tol_dual > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x_hat: ClusteringMatrix,
    /// `⟨K, X̂⟩`
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// `X̂` was replaced by its rounding (an integral clustering matrix).
    pub polished: bool,
}

/// One line of solver telemetry.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub penalty: f64,
}

/// Writes each [`IterationRecord`] as one JSON object per line.
pub struct JsonLinesSink<W: Write> {
    out: W,
    every: usize,
}

impl<W: Write> JsonLinesSink<W> {
    pub fn new(out: W, every: usize) -> Self {
        Self { out, every: every.max(1) }
    }

    pub fn record(&mut self, rec: &IterationRecord) -> Result<()> {
        if rec.iteration % self.every == 0 {
            serde_json::to_writer(&mut self.out, rec)?;
            self.out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

fn check_partition(n: usize, r: usize) -> Result<()> {
    if r < 2 {
        return Err(Error::InvalidArgument(format!("need r >= 2 clusters, got {r}")));
    }
    if n == 0 || n % r != 0 {
        return Err(Error::InvalidArgument(format!("r = {r} must divide n = {n}")));
    }
    Ok(())
}

fn symmetrized(m: MatRef<'_, f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// Nearest positive semidefinite matrix in Frobenius norm.
pub fn project_psd(m: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", n, m.ncols()),
        });
    }
    psd_part(symmetrized(m).as_ref())
}

/// Projection of a symmetric matrix onto `{diag(X) = 1, X1 = c1}` (`c = n/r`).
///
/// With the diagonal pinned, the off-diagonal pairs `x_ij` must satisfy
/// `Σ_{j≠i} x_ij = c − 1`. The constraint Gram matrix is `(n−2)I + J`, whose
/// inverse is explicit, so `x_ij ← x_ij − λ_i − λ_j` with
/// `λ = (e − (Σe / (2n−2))·1) / (n−2)` and `e` the row-sum excess.
pub fn project_affine(x: &mut Mat<f64>, target: f64) {
    let n = x.nrows();
    for i in 0..n {
        x[(i, i)] = 1.0;
    }
    if n == 1 {
        return;
    }
    if n == 2 {
        x[(0, 1)] = target - 1.0;
        x[(1, 0)] = target - 1.0;
        return;
    }
    let mut e = linalg::row_sums(x.as_ref());
    for ei in e.iter_mut() {
        *ei -= target;
    }
    let t = e.iter().sum::<f64>() / (2.0 * n as f64 - 2.0);
    let lambda: Vec<f64> = e.iter().map(|&ei| (ei - t) / (n as f64 - 2.0)).collect();
    for j in 0..n {
        let lj = lambda[j];
        let col = x.col_as_slice_mut(j);
        for (i, v) in col.iter_mut().enumerate() {
            if i != j {
                *v -= lambda[i] + lj;
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DykstraOptions {
    /// Stop once every row sum is within `tol` of `n/r`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl DykstraOptions {
    /// Row sums to `1e-10·n`, well inside the `1e-8·n` contract.
    pub fn for_size(n: usize) -> Self {
        Self {
            tol: 1e-10 * n as f64,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PolytopeProjection {
    pub x: Mat<f64>,
    pub sweeps: usize,
    pub row_sum_residual: f64,
}

fn row_sum_residual(x: MatRef<'_, f64>, target: f64) -> f64 {
    linalg::row_sums(x)
        .into_iter()
        .map(|s| (s - target).abs())
        .fold(0.0, f64::max)
}

/// Projection onto `{X ≥ 0, X1 = (n/r)1, diag(X) = 1}`.
pub fn project_polytope(m: MatRef<'_, f64>, r: usize) -> Result<Mat<f64>> {
    Ok(project_polytope_with(m, r, DykstraOptions::for_size(m.nrows()))?.x)
}

pub fn project_polytope_with(m: MatRef<'_, f64>, r: usize, opts: DykstraOptions) -> Result<PolytopeProjection> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", n, m.ncols()),
        });
    }
    check_partition(n, r)?;
    let mut x = symmetrized(m);
    let (sweeps, row_sum_residual) = dykstra_in_place(&mut x, r, opts)?;
    Ok(PolytopeProjection {
        x,
        sweeps,
        row_sum_residual,
    })
}

/// Dykstra between the affine set and the orthant on a symmetric `x`.
///
/// Each sweep is a single pass: the affine correction `λ_i + λ_j` comes from
/// the previous pass's column sums (equal to row sums by symmetry), and the
/// orthant step, the correction update and the next sums are fused.
fn dykstra_in_place(x: &mut Mat<f64>, r: usize, opts: DykstraOptions) -> Result<(usize, f64)> {
    let n = x.nrows();
    let target = n as f64 / r as f64;
    if n <= 2 {
        project_affine(x, target);
        return Ok((1, row_sum_residual(x.as_ref(), target)));
    }
    let nf = n as f64;
    // off-diagonal column sums
    let mut sums: Vec<f64> = (0..n)
        .map(|j| x.col_as_slice(j).iter().sum::<f64>() - x[(j, j)])
        .collect();
    let mut q = Mat::<f64>::zeros(n, n);
    let mut lambda = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        let mut total = 0.0;
        for (l, s) in lambda.iter_mut().zip(&sums) {
            *l = s + 1.0 - target;
            total += *l;
        }
        let t = total / (2.0 * nf - 2.0);
        for l in lambda.iter_mut() {
            *l = (*l - t) / (nf - 2.0);
        }
        residual = 0.0;
        for j in 0..n {
            let lj = lambda[j];
            let xc = x.col_as_slice_mut(j);
            let qc = q.col_as_slice_mut(j);
            let mut sj = 0.0;
            for i in 0..n {
                let v = xc[i] - lambda[i] - lj + qc[i];
                let z = v.max(0.0);
                qc[i] = v - z;
                xc[i] = z;
                sj += z;
            }
            // the diagonal is pinned to 1 and never clipped
            sj -= xc[j];
            xc[j] = 1.0;
            qc[j] = 0.0;
            sums[j] = sj;
            residual = f64::max(residual, (sj + 1.0 - target).abs());
        }
        if residual <= opts.tol {
            return Ok((sweep, residual));
        }
    }
    Err(Error::ProjectionStalled {
        iterations: opts.max_sweeps,
        residual,
    })
}

/// PSD part of an exactly symmetric matrix.
fn psd_part(sym: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let n = sym.nrows();
    let (vals, vecs) = linalg::sym_eigen(sym)?;
    let first_pos = vals.partition_point(|&v| v <= 0.0);
    let n_pos = n - first_pos;
    let mut out = if n_pos == 0 {
        return Ok(Mat::zeros(n, n));
    } else if n_pos <= first_pos {
        linalg::scaled_outer(vecs.subcols(first_pos, n_pos), &vals[first_pos..])
    } else {
        // fewer negative eigenvalues: subtract them off instead
        let neg = linalg::scaled_outer(vecs.subcols(0, first_pos), &vals[..first_pos]);
        linalg::sub(sym, neg.as_ref())
    };
    for j in 0..n {
        for i in (j + 1)..n {
            let a = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = a;
            out[(j, i)] = a;
        }
    }
    Ok(out)
}

/// Solve the relaxation for kernel `K` with `r` clusters.
pub fn solve_sdp1(k: &KernelMatrix, r: usize, params: &AdmmParams) -> Result<SdpSolution> {
    solve_sdp1_observed(k, r, params, |_| Ok(()))
}

/// As [`solve_sdp1`], calling `observe` after every iteration.
pub fn solve_sdp1_observed<F>(k: &KernelMatrix, r: usize, params: &AdmmParams, mut observe: F) -> Result<SdpSolution>
where
    F: FnMut(&IterationRecord) -> Result<()>,
{
    params.validate()?;
    let kk = k.k.as_ref();
    let n = kk.nrows();
    if kk.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: "square kernel".into(),
            found: format!("{}x{}", n, kk.ncols()),
        });
    }
    check_partition(n, r)?;
    if linalg::max_asymmetry(kk) > 1e-12 * linalg::max_abs(kk).max(1.0) {
        return Err(Error::InvalidArgument("kernel matrix is not symmetric".into()));
    }
    let kk = symmetrized(kk);
    let target = n as f64 / r as f64;
    let k_norm = linalg::frobenius(kk.as_ref());
    let mut rho = params.penalty.unwrap_or(if k_norm > 0.0 { n as f64 / k_norm } else { 1.0 });
    let mut k_scaled = Mat::from_fn(n, n, |i, j| kk[(i, j)] / rho);
    let dykstra_opts = DykstraOptions::for_size(n);

    // feasible start: (1 − b)I + bJ with b = (c − 1)/(n − 1)
    let b = (target - 1.0) / (n as f64 - 1.0).max(1.0);
    let mut y = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { b });
    let mut y_prev = y.clone();
    let mut u = Mat::<f64>::zeros(n, n);
    let mut work = Mat::<f64>::zeros(n, n);

    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=params.max_iter.saturating_mul(params.continuation + 1) {
        iterations = it;
        if it > 1 && (it - 1) % params.max_iter == 0 {
            // scaled dual is Λ/ρ
            rho /= 10.0;
            k_scaled = Mat::from_fn(n, n, |i, j| kk[(i, j)] / rho);
            for j in 0..n {
                for v in u.col_as_slice_mut(j) {
                    *v *= 10.0;
                }
            }
        }
        for j in 0..n {
            let (yc, uc, kc) = (y.col_as_slice(j), u.col_as_slice(j), k_scaled.col_as_slice(j));
            for (i, w) in work.col_as_slice_mut(j).iter_mut().enumerate() {
                *w = yc[i] - uc[i] + kc[i];
            }
        }
        let x = psd_part(work.as_ref())?;

        // work ← αX + (1 − α)Y
        let alpha = params.relaxation;
        for j in 0..n {
            let (xc, yc) = (x.col_as_slice(j), y.col_as_slice(j));
            for (i, w) in work.col_as_slice_mut(j).iter_mut().enumerate() {
                *w = alpha * xc[i] + (1.0 - alpha) * yc[i];
            }
        }
        std::mem::swap(&mut y, &mut y_prev);
        for j in 0..n {
            let (wc, uc) = (work.col_as_slice(j), u.col_as_slice(j));
            for (i, v) in y.col_as_slice_mut(j).iter_mut().enumerate() {
                *v = wc[i] + uc[i];
            }
        }
        dykstra_in_place(&mut y, r, dykstra_opts)?;

        let (mut r2, mut s2, mut nx, mut ny, mut nu, mut obj) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for j in 0..n {
            let (xc, wc, yc, pc, kc) = (x.col_as_slice(j), work.col_as_slice(j), y.col_as_slice(j), y_prev.col_as_slice(j), kk.col_as_slice(j));
            let uc = u.col_as_slice_mut(j);
            for i in 0..n {
                uc[i] += wc[i] - yc[i];
                let d = xc[i] - yc[i];
                r2 += d * d;
                let dy = yc[i] - pc[i];
                s2 += dy * dy;
                nx += xc[i] * xc[i];
                ny += yc[i] * yc[i];
                nu += uc[i] * uc[i];
                obj += kc[i] * yc[i];
            }
        }
        primal = r2.sqrt() / nx.max(ny).sqrt().max(f64::MIN_POSITIVE);
        // ρ cancels between ‖ρ ΔY‖ and ‖ρU‖
        dual = s2.sqrt() / nu.sqrt().max(f64::MIN_POSITIVE);

        observe(&IterationRecord {
            iteration: it,
            objective: obj,
            primal_residual: primal,
            dual_residual: dual,
            penalty: rho,
        })?;

        if primal <= params.tol_primal && dual <= params.tol_dual {
            converged = true;
            break;
        }
    }

    // Y meets the polytope constraints; pull it into the PSD cone by mixing
    // in the strictly feasible (1 − b)I + bJ, whose smallest eigenvalue is 1 − b
    let lam_min = linalg::sym_eigenvalues(y.as_ref())?[0];
    if lam_min < 0.0 {
        let t = -lam_min / (-lam_min + 1.0 - b);
        for j in 0..n {
            for (i, v) in y.col_as_slice_mut(j).iter_mut().enumerate() {
                let bij = if i == j { 1.0 } else { b };
                *v = (1.0 - t) * *v + t * bij;
            }
        }
    }

    let mut x_hat = ClusteringMatrix { x: y };
    let mut objective = linalg::inner(kk.as_ref(), x_hat.x.as_ref());
    let mut polished = false;
    if params.polish {
        let cand = x_hat.rounded();
        let near = linalg::max_abs(linalg::sub(cand.x.as_ref(), x_hat.x.as_ref()).as_ref()) < 0.25;
        if near && cand.as_partition(r, 0.0).is_some() {
            let cand_obj = linalg::inner(kk.as_ref(), cand.x.as_ref());
            let slack = 10.0 * params.tol_primal.max(params.tol_dual) * objective.abs().max(1.0);
            if cand_obj >= objective - slack {
                x_hat = cand;
                objective = cand_obj;
                polished = true;
            }
        }
    }

    Ok(SdpSolution {
        x_hat,
        objective,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        converged,
        polished,
    })
}
