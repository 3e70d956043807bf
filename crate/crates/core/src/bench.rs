//! Benchmark sweeps producing plot-ready CSV tables.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::{chebyshev_grid, uniform_random, PointCloud};
use crate::error::{NncaError, Result};
use crate::kernel::KernelSpec;
use crate::krylov::{solve_fredholm, DEFAULT_GMRES_TOL};
use crate::matvec::{dense_matvec, dense_matvec_rows, h2_matvec, relative_error};
use crate::nnca::{H2Matrix, NncaOptions};
use crate::svm::{evaluate, synth_dataset, train, Backend, SynthShape, TrainParams};

/// Largest `N` for which the matvec error uses the full dense product.
pub const DEFAULT_ORACLE_CAP: usize = 20_000;
/// Output rows sampled for the error estimate above the oracle cap.
pub const SAMPLED_ROWS: usize = 200;
/// Repetitions of the matvec; the median time is reported.
pub const MATVEC_REPEATS: usize = 3;

/// Leaf capacity used when none is given.
pub fn default_leaf_size(dim: usize) -> usize {
    match dim {
        3 => 216,
        _ => 64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    Uniform,
    Chebyshev,
}

impl Distribution {
    /// `n` points in `[-1, 1]^dim`.
    pub fn points(self, n: usize, dim: usize, seed: u64) -> Vec<f64> {
        match self {
            Distribution::Uniform => uniform_random(n, dim, seed),
            Distribution::Chebyshev => chebyshev_grid(n, dim, seed),
        }
    }
}

impl FromStr for Distribution {
    type Err = NncaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Distribution::Uniform),
            "chebyshev" => Ok(Distribution::Chebyshev),
            _ => Err(NncaError::InvalidParameter(format!(
                "unknown distribution {s:?} (expected uniform or chebyshev)"
            ))),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distribution::Uniform => "uniform",
            Distribution::Chebyshev => "chebyshev",
        })
    }
}

fn check_increasing(name: &str, values: &[usize]) -> Result<()> {
    if values.is_empty() {
        return Err(NncaError::InvalidParameter(format!("{name} list is empty")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(NncaError::InvalidParameter(format!("{name} list must be strictly increasing")));
    }
    Ok(())
}

fn check_epsilons(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(NncaError::InvalidParameter("epsilon list is empty".into()));
    }
    if let Some(e) = values.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(NncaError::InvalidParameter(format!("epsilon must lie in (0, 1), got {e}")));
    }
    Ok(())
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(NncaError::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    Ok(())
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn fmt_time(t: f64, mask: bool) -> String {
    if mask {
        String::new()
    } else {
        format!("{t:.6}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Matvec benchmark over every `(N, epsilon)` pair.
#[derive(Debug, Clone)]
pub struct MatvecConfig {
    pub dim: usize,
    pub distribution: Distribution,
    pub sizes: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub kernel: KernelSpec,
    pub nu: usize,
    pub eta: f64,
    pub seed: u64,
    pub oracle_cap: usize,
}

impl MatvecConfig {
    pub fn validate(&self) -> Result<()> {
        check_increasing("N", &self.sizes)?;
        check_epsilons(&self.epsilons)?;
        check_eta(self.eta)?;
        if self.kernel.dim() != self.dim {
            return Err(NncaError::DimensionMismatch {
                expected: self.dim,
                actual: self.kernel.dim(),
            });
        }
        if self.nu == 0 {
            return Err(NncaError::InvalidParameter("leaf size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatvecRow {
    pub n: usize,
    pub epsilon: f64,
    pub mem: usize,
    pub t_a: f64,
    pub t_m: f64,
    pub eps_m: f64,
    pub max_rank: usize,
}

pub fn run_matvec_bench(cfg: &MatvecConfig) -> Result<Vec<MatvecRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        let cloud = PointCloud::shared(cfg.dim, cfg.distribution.points(n, cfg.dim, cfg.seed))?;
        let w = uniform_random(n, 1, cfg.seed.wrapping_add(1));
        let sample_rows = (n > cfg.oracle_cap).then(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
            let mut idx = sample(&mut rng, n, SAMPLED_ROWS.min(n)).into_vec();
            idx.sort_unstable();
            idx
        });
        let reference = match &sample_rows {
            None => dense_matvec(&cfg.kernel, &cloud, &w)?,
            Some(idx) => dense_matvec_rows(&cfg.kernel, &cloud, &w, idx)?,
        };
        for &epsilon in &cfg.epsilons {
            log::info!("matvec bench: N={n} eps={epsilon:e}");
            let start = Instant::now();
            let h2 = H2Matrix::build(&cloud, &cfg.kernel, cfg.nu, cfg.eta, &NncaOptions::new(epsilon))?;
            let t_a = start.elapsed().as_secs_f64();
            let mut times = Vec::with_capacity(MATVEC_REPEATS);
            let mut u = Vec::new();
            for _ in 0..MATVEC_REPEATS {
                let start = Instant::now();
                u = h2_matvec(&h2, &w)?;
                times.push(start.elapsed().as_secs_f64());
            }
            let u = match &sample_rows {
                None => u,
                Some(idx) => idx.iter().map(|&i| u[i]).collect(),
            };
            rows.push(MatvecRow {
                n,
                epsilon,
                mem: h2.stats().memory_bytes,
                t_a,
                t_m: median(times),
                eps_m: relative_error(&u, &reference)?,
                max_rank: h2.stats().max_rank,
            });
        }
    }
    Ok(rows)
}

/// Writes matvec rows; memory is in bytes of stored blocks and pivot lists.
/// With `mask_timings` the time columns are left empty.
pub fn write_matvec_csv<W: Write>(out: W, rows: &[MatvecRow], mask_timings: bool) -> Result<()> {
    write_rows(
        out,
        &["N", "eps_nca", "mem", "T_a", "T_m", "ε_m", "max_rank"],
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                format!("{:e}", r.epsilon),
                r.mem.to_string(),
                fmt_time(r.t_a, mask_timings),
                fmt_time(r.t_m, mask_timings),
                format!("{:.6e}", r.eps_m),
                r.max_rank.to_string(),
            ]
        }),
    )
}

/// Integral-equation solves over a list of grid sizes.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub per_axis: Vec<usize>,
    pub eps_nca: f64,
    pub eps_gmres: f64,
    pub nu: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            per_axis: vec![8, 12, 16],
            eps_nca: 1e-7,
            eps_gmres: DEFAULT_GMRES_TOL,
            nu: default_leaf_size(3),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverRow {
    pub n: usize,
    pub mem: usize,
    pub t_a: f64,
    pub t_s: f64,
    pub iter: usize,
    pub eps_s: f64,
    pub converged: bool,
}

pub fn run_solver_bench(cfg: &SolverConfig) -> Result<Vec<SolverRow>> {
    check_increasing("points per axis", &cfg.per_axis)?;
    check_epsilons(&[cfg.eps_nca])?;
    let mut rows = Vec::new();
    for &k in &cfg.per_axis {
        log::info!("solver bench: {k} points per axis");
        let rep = solve_fredholm(k, cfg.nu, &NncaOptions::new(cfg.eps_nca), cfg.eps_gmres, cfg.seed)?;
        rows.push(SolverRow {
            n: rep.n,
            mem: rep.memory_bytes,
            t_a: rep.assembly_seconds,
            t_s: rep.solve_seconds,
            iter: rep.gmres.iterations,
            eps_s: rep.forward_error,
            converged: rep.gmres.converged,
        });
    }
    Ok(rows)
}

pub fn write_solver_csv<W: Write>(out: W, rows: &[SolverRow], mask_timings: bool) -> Result<()> {
    write_rows(
        out,
        &["N", "mem", "T_a", "T_s", "iter", "ε_s", "converged"],
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.mem.to_string(),
                fmt_time(r.t_a, mask_timings),
                fmt_time(r.t_s, mask_timings),
                r.iter.to_string(),
                format!("{:.6e}", r.eps_s),
                r.converged.to_string(),
            ]
        }),
    )
}

/// SVM training with both backends over a list of dataset sizes.
#[derive(Debug, Clone)]
pub struct SvmBenchConfig {
    pub shape: SynthShape,
    pub sizes: Vec<usize>,
    pub kernel: KernelSpec,
    pub params: TrainParams,
    pub seed: u64,
    /// Also train with the dense backend.
    pub with_dense: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmRow {
    pub m: usize,
    pub n_train: usize,
    pub t_f: f64,
    pub t_n: Option<f64>,
    pub i_f: f64,
    pub i_n: Option<f64>,
    pub iterations: usize,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub oa: f64,
}

pub fn run_svm_bench(cfg: &SvmBenchConfig) -> Result<Vec<SvmRow>> {
    check_increasing("M", &cfg.sizes)?;
    check_eta(cfg.params.eta)?;
    let dim = cfg.shape.dim();
    let mut rows = Vec::new();
    for &m in &cfg.sizes {
        log::info!("svm bench: M={m}");
        let ds = synth_dataset(cfg.shape, m, cfg.seed)?;
        let (xf, yf) = ds.subset(&ds.train);
        let (xt, yt) = ds.subset(&ds.test);
        let (model, fast) = train(dim, &xf, &yf, &cfg.kernel, &cfg.params, Backend::Fast)?;
        let dense = if cfg.with_dense {
            Some(train(dim, &xf, &yf, &cfg.kernel, &cfg.params, Backend::Dense)?.1)
        } else {
            None
        };
        let acc = evaluate(&model, &xt, &yt)?;
        rows.push(SvmRow {
            m,
            n_train: yf.len(),
            t_f: fast.wall_seconds,
            t_n: dense.as_ref().map(|r| r.wall_seconds),
            i_f: fast.per_iter_seconds,
            i_n: dense.as_ref().map(|r| r.per_iter_seconds),
            iterations: fast.iterations,
            a1: acc.a1,
            a2: acc.a2,
            oa: acc.overall,
        });
    }
    Ok(rows)
}

pub fn write_svm_csv<W: Write>(out: W, rows: &[SvmRow], mask_timings: bool) -> Result<()> {
    let opt_time = |t: Option<f64>| t.map(|t| fmt_time(t, mask_timings)).unwrap_or_default();
    write_rows(
        out,
        &["M", "N_train", "t_F", "t_N", "i_F", "i_N", "iter", "A1", "A2", "OA"],
        rows.iter().map(|r| {
            vec![
                r.m.to_string(),
                r.n_train.to_string(),
                fmt_time(r.t_f, mask_timings),
                opt_time(r.t_n),
                fmt_time(r.i_f, mask_timings),
                opt_time(r.i_n),
                r.iterations.to_string(),
                fmt_opt(r.a1),
                fmt_opt(r.a2),
                format!("{:.2}", r.oa),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::builtin_kernel;

    fn config(sizes: Vec<usize>) -> MatvecConfig {
        MatvecConfig {
            dim: 2,
            distribution: Distribution::Uniform,
            sizes,
            epsilons: vec![1e-6],
            kernel: builtin_kernel("reg-log-2d", 2).unwrap(),
            nu: 64,
            eta: std::f64::consts::SQRT_2,
            seed: 3,
            oracle_cap: DEFAULT_ORACLE_CAP,
        }
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        assert!((loglog_slope(&xs, &ys) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn single_leaf_is_exact() {
        let rows = run_matvec_bench(&config(vec![40])).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].eps_m <= 1e-13);
    }

    #[test]
    fn sampled_rows_estimate_used_above_cap() {
        let mut cfg = config(vec![1500]);
        cfg.oracle_cap = 1000;
        let sampled = run_matvec_bench(&cfg).unwrap();
        cfg.oracle_cap = DEFAULT_ORACLE_CAP;
        let full = run_matvec_bench(&cfg).unwrap();
        assert!(sampled[0].eps_m <= 1e-4);
        assert!(full[0].eps_m <= 1e-4);
        assert_ne!(sampled[0].eps_m, full[0].eps_m);
    }

    #[test]
    fn masked_csv_is_reproducible() {
        let cfg = config(vec![300, 600]);
        let render = || {
            let mut buf = Vec::new();
            write_matvec_csv(&mut buf, &run_matvec_bench(&cfg).unwrap(), true).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let a = render();
        assert_eq!(a, render());
        assert!(a.starts_with("N,eps_nca,mem,T_a,T_m,ε_m,max_rank\n"));
        assert_eq!(a.lines().count(), 3);
    }

    #[test]
    fn rejects_bad_sweeps() {
        assert!(run_matvec_bench(&config(vec![600, 300])).is_err());
        assert!(run_matvec_bench(&config(vec![])).is_err());
        let mut cfg = config(vec![100]);
        cfg.eta = 0.0;
        assert!(run_matvec_bench(&cfg).is_err());
        cfg.eta = 1.0;
        cfg.epsilons = vec![0.0];
        assert!(run_matvec_bench(&cfg).is_err());
        cfg.epsilons = vec![1e-6];
        cfg.dim = 3;
        assert!(run_matvec_bench(&cfg).is_err());
        let solver = SolverConfig {
            per_axis: vec![6, 4],
            ..SolverConfig::default()
        };
        assert!(run_solver_bench(&solver).is_err());
    }

    #[test]
    fn solver_rows_have_expected_size() {
        let cfg = SolverConfig {
            per_axis: vec![4, 6],
            ..SolverConfig::default()
        };
        let rows = run_solver_bench(&cfg).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![64, 216]);
        assert!(rows.iter().all(|r| r.converged && r.eps_s <= 1e-6));
        let mut buf = Vec::new();
        write_solver_csv(&mut buf, &rows, false).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("N,mem,T_a,T_s,iter,ε_s,converged\n"));
    }

    #[test]
    fn svm_bench_small_run() {
        let cfg = SvmBenchConfig {
            shape: SynthShape::Rings2d,
            sizes: vec![300],
            kernel: builtin_kernel("matern", 2).unwrap(),
            params: TrainParams {
                max_iter: 50,
                ..TrainParams::default()
            },
            seed: 2,
            with_dense: true,
        };
        let rows = run_svm_bench(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].t_n.is_some() && rows[0].i_n.is_some());
        assert!(rows[0].oa > 50.0);
        let mut buf = Vec::new();
        write_svm_csv(&mut buf, &rows, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("M,N_train,t_F,t_N,i_F,i_N,iter,A1,A2,OA\n"));
    }

    #[test]
    fn distribution_parsing() {
        assert_eq!("uniform".parse::<Distribution>().unwrap(), Distribution::Uniform);
        assert_eq!("chebyshev".parse::<Distribution>().unwrap().to_string(), "chebyshev");
        assert!("normal".parse::<Distribution>().is_err());
    }
}
