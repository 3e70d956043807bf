//! Full GMRES over a black-box operator and the Nystrom system of a
//! second-kind Fredholm equation with the Coulomb kernel on `[-1, 1]^3`.

use std::time::Instant;

use crate::cloud::{uniform_grid, uniform_random, PointCloud};
use crate::error::{NncaError, Result};
use crate::kernel::builtin_kernel;
use crate::matvec::{h2_matvec, relative_error};
use crate::nnca::{H2Matrix, NncaOptions};

/// Default GMRES tolerance for the integral-equation solve.
pub const DEFAULT_GMRES_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct GmresReport {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Relative residual before the first iteration and after each one.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

impl GmresReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` from `x = 0` by GMRES without restarts (modified
/// Gram-Schmidt, Givens rotations). Stops once the relative residual is at
/// most `tol` or after `max_iter` iterations.
pub fn gmres<F>(mut apply: F, b: &[f64], tol: f64, max_iter: usize) -> Result<GmresReport>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(tol > 0.0) {
        return Err(NncaError::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let n = b.len();
    let beta = norm(b);
    if !beta.is_finite() {
        return Err(NncaError::NonFinite("right-hand side".into()));
    }
    if beta == 0.0 {
        return Ok(GmresReport {
            solution: vec![0.0; n],
            iterations: 0,
            residual_history: vec![0.0],
            converged: true,
        });
    }

    let mut basis: Vec<Vec<f64>> = vec![b.iter().map(|x| x / beta).collect()];
    // Columns of the rotated Hessenberg matrix, each of length j + 2.
    let mut r: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];
    let mut history = vec![1.0];
    let mut converged = false;

    for j in 0..max_iter {
        let mut w = apply(&basis[j])?;
        if w.len() != n {
            return Err(NncaError::LengthMismatch {
                expected: n,
                actual: w.len(),
            });
        }
        let mut h = vec![0.0; j + 2];
        for (i, v) in basis.iter().enumerate() {
            let hij = dot(&w, v);
            h[i] = hij;
            for (wk, vk) in w.iter_mut().zip(v) {
                *wk -= hij * vk;
            }
        }
        let h_next = norm(&w);
        h[j + 1] = h_next;
        if !h_next.is_finite() {
            return Err(NncaError::NonFinite("Arnoldi vector".into()));
        }

        for i in 0..j {
            let t = cs[i] * h[i] + sn[i] * h[i + 1];
            h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
            h[i] = t;
        }
        let denom = h[j].hypot(h[j + 1]);
        let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (h[j] / denom, h[j + 1] / denom) };
        h[j] = denom;
        h[j + 1] = 0.0;
        cs.push(c);
        sn.push(s);
        g.push(-s * g[j]);
        g[j] *= c;
        r.push(h);

        let rel = g[j + 1].abs() / beta;
        history.push(rel);
        if rel <= tol {
            converged = true;
            break;
        }
        if h_next <= 1e-14 * beta {
            // Happy breakdown: the Krylov space is invariant.
            break;
        }
        basis.push(w.iter().map(|x| x / h_next).collect());
    }

    let k = r.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for l in i + 1..k {
            s -= r[l][i] * y[l];
        }
        y[i] = if r[i][i] == 0.0 { 0.0 } else { s / r[i][i] };
    }
    let mut x = vec![0.0; n];
    for (yi, v) in y.iter().zip(&basis) {
        for (xk, vk) in x.iter_mut().zip(v) {
            *xk += yi * vk;
        }
    }
    if !converged {
        converged = history.last().is_some_and(|&h| h <= tol);
    }
    Ok(GmresReport {
        solution: x,
        iterations: k,
        residual_history: history,
        converged,
    })
}

/// Nystrom discretisation `(I + w_q K) sigma = f` on a cell-centred grid of
/// `[-1, 1]^3`, with `K` the Coulomb kernel (zero diagonal) held as an H2
/// matrix and `w_q = 8 / N`.
pub struct FredholmSystem {
    pub cloud: PointCloud,
    pub h2: H2Matrix,
    pub quad_weight: f64,
    pub assembly_seconds: f64,
}

impl FredholmSystem {
    pub fn new(n_per_axis: usize, nu: usize, opts: &NncaOptions) -> Result<Self> {
        if n_per_axis < 2 {
            return Err(NncaError::InvalidParameter(format!(
                "need at least 2 points per axis, got {n_per_axis}"
            )));
        }
        let cloud = PointCloud::shared(3, uniform_grid(n_per_axis, 3))?;
        let kernel = builtin_kernel("coulomb-3d", 3)?;
        let start = Instant::now();
        let h2 = H2Matrix::build(&cloud, &kernel, nu, std::f64::consts::SQRT_2, opts)?;
        let assembly_seconds = start.elapsed().as_secs_f64();
        let quad_weight = 8.0 / cloud.num_targets() as f64;
        Ok(Self {
            cloud,
            h2,
            quad_weight,
            assembly_seconds,
        })
    }

    pub fn len(&self) -> usize {
        self.cloud.num_targets()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `v + w_q K v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let kv = h2_matvec(&self.h2, v)?;
        Ok(v.iter().zip(kv).map(|(a, b)| a + self.quad_weight * b).collect())
    }
}

#[derive(Debug, Clone)]
pub struct FredholmReport {
    pub n: usize,
    pub gmres: GmresReport,
    /// `|sigma_solved - sigma| / |sigma|`, zero when the reference is zero.
    pub forward_error: f64,
    pub memory_bytes: usize,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
}

/// Draws a reference density, forms `f = A sigma` through the operator and
/// solves for it again with GMRES.
pub fn solve_fredholm(n_per_axis: usize, nu: usize, opts: &NncaOptions, gmres_tol: f64, seed: u64) -> Result<FredholmReport> {
    let system = FredholmSystem::new(n_per_axis, nu, opts)?;
    let sigma = uniform_random(system.len(), 1, seed);
    solve_with_reference(&system, &sigma, gmres_tol)
}

/// Solves `A x = A sigma` on an assembled system.
pub fn solve_with_reference(system: &FredholmSystem, sigma: &[f64], gmres_tol: f64) -> Result<FredholmReport> {
    let f = system.apply(sigma)?;
    let start = Instant::now();
    let report = gmres(|v| system.apply(v), &f, gmres_tol, 200)?;
    let solve_seconds = start.elapsed().as_secs_f64();
    let forward_error = match relative_error(&report.solution, sigma) {
        Ok(e) => e,
        Err(NncaError::ZeroReference) => norm(&report.solution),
        Err(e) => return Err(e),
    };
    Ok(FredholmReport {
        n: system.len(),
        gmres: report,
        forward_error,
        memory_bytes: system.h2.stats().memory_bytes,
        assembly_seconds: system.assembly_seconds,
        solve_seconds,
    })
}
