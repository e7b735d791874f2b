//! Jacobi-preconditioned conjugate gradients and condition number estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sparse::CsrMatrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual target `||r|| / ||b||`.
    pub tol: f64,
    /// `None` means `20 n`.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    /// Relative residual after each iteration, starting with the initial one.
    pub residual_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` for symmetric positive definite `A` from `x = 0`.
/// Non-convergence is reported, not raised.
pub fn solve_cg(a: &CsrMatrix, b: &[f64], opts: SolverOptions) -> Result<SolveReport> {
    solve_cg_with_monitor(a, b, opts, |_, _| {})
}

/// Like [`solve_cg`], calling `monitor(iteration, x)` after every update.
pub fn solve_cg_with_monitor(
    a: &CsrMatrix,
    b: &[f64],
    opts: SolverOptions,
    mut monitor: impl FnMut(usize, &[f64]),
) -> Result<SolveReport> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::Contract(format!(
            "matrix is {}x{}, right-hand side has {n} entries",
            a.nrows(),
            a.ncols()
        )));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::Solver(format!("non-positive diagonal entry {d} in row {i}")))
            }
        })
        .collect::<Result<_>>()?;

    let max_iter = opts.max_iter.unwrap_or(20 * n.max(1));
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(SolveReport {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            residual_history: vec![0.0],
        });
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = vec![1.0];
    let mut rel = 1.0;
    let mut it = 0;
    while it < max_iter && rel > opts.tol {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            log::warn!("conjugate gradients broke down at iteration {it} (p'Ap = {pap:e})");
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        it += 1;
        monitor(it, &x);
        rel = norm(&r) / bnorm;
        history.push(rel);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let converged = rel <= opts.tol;
    if !converged {
        log::warn!("conjugate gradients stopped after {it} iterations at relative residual {rel:e}");
    }
    Ok(SolveReport {
        x,
        iterations: it,
        relative_residual: rel,
        converged,
        residual_history: history,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionEstimate {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub kappa: f64,
    /// Set when an inner solve failed to converge; `kappa` is then a lower
    /// bound, or infinite if no estimate of `lambda_min` was obtained.
    pub lower_bound: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct ConditionOptions {
    pub iterations: usize,
    pub rel_change: f64,
    pub seed: u64,
    pub inner: SolverOptions,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self {
            iterations: 500,
            rel_change: 1e-8,
            seed: 7,
            inner: SolverOptions {
                tol: 1e-12,
                max_iter: None,
            },
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let s = norm(v);
    v.iter_mut().for_each(|x| *x /= s);
    s
}

/// Spectral condition number of a symmetric positive definite matrix from
/// power iteration on `A` and on `A^{-1}` (inner CG solves).
pub fn estimate_condition(a: &CsrMatrix, opts: ConditionOptions) -> Result<ConditionEstimate> {
    let n = a.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();

    let mut v = start.clone();
    normalize(&mut v);
    let mut lambda_max = 0.0;
    for _ in 0..opts.iterations {
        let mut w = a.mul_vec(&v);
        let rq = dot(&w, &v);
        normalize(&mut w);
        v = w;
        let done = (rq - lambda_max).abs() <= opts.rel_change * rq.abs();
        lambda_max = rq;
        if done {
            break;
        }
    }

    let mut v = start;
    normalize(&mut v);
    let mut mu = 0.0; // Rayleigh quotient of A^{-1}
    let mut lower_bound = false;
    for _ in 0..opts.iterations {
        let rep = solve_cg(a, &v, opts.inner)?;
        if !rep.converged {
            lower_bound = true;
        }
        let mut w = rep.x;
        let rq = dot(&w, &v);
        if !rq.is_finite() || rq <= 0.0 {
            lower_bound = true;
            mu = f64::INFINITY;
            break;
        }
        normalize(&mut w);
        v = w;
        let done = (rq - mu).abs() <= opts.rel_change * rq;
        mu = rq;
        if done || lower_bound {
            break;
        }
    }
    let lambda_min = 1.0 / mu;
    let kappa = if lambda_min > 0.0 { lambda_max / lambda_min } else { f64::INFINITY };
    Ok(ConditionEstimate {
        lambda_max,
        lambda_min,
        kappa,
        lower_bound,
    })
}
