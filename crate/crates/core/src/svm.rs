//! Two-class kernel SVM trained by projected gradient ascent on the dual.
//!
//! The dual objective carries the equality constraint `sum alpha_i y_i = 0`
//! as a quadratic penalty with weight `beta`; every step needs one product
//! with the kernel matrix, computed either through an H2 matrix (`Fast`) or
//! by direct summation (`Dense`).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{NncaError, Result};
use crate::kernel::{builtin_kernel, KernelSpec};
use crate::matvec::{dense_matvec, h2_matvec};
use crate::nnca::{H2Matrix, NncaOptions};

/// Fraction of each class assigned to the training split.
pub const TRAIN_FRACTION: f64 = 0.85;

/// `alpha` values within this distance of a box bound count as on the bound.
const BOUND_SLACK: f64 = 1e-8;

/// Labelled points with a stratified train/test split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dim: usize,
    /// Row-major, `dim` values per point.
    pub features: Vec<f64>,
    /// `+1` or `-1`.
    pub labels: Vec<f64>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Dataset {
    /// Validates labels and splits each class `train_fraction` / rest with a
    /// seeded shuffle.
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<f64>, train_fraction: f64, seed: u64) -> Result<Self> {
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(NncaError::LengthMismatch {
                expected: dim * labels.len(),
                actual: features.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(NncaError::InvalidParameter(format!("labels must be +1 or -1, found {bad}")));
        }
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(NncaError::InvalidParameter(format!(
                "train fraction must lie in [0, 1], got {train_fraction}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for class in [1.0, -1.0] {
            let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            idx.shuffle(&mut rng);
            let cut = (train_fraction * idx.len() as f64).round() as usize;
            train.extend_from_slice(&idx[..cut]);
            test.extend_from_slice(&idx[cut..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok(Self {
            dim,
            features,
            labels,
            train,
            test,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Features and labels of a subset, in the given order.
    pub fn subset(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let features = idx.iter().flat_map(|&i| self.point(i).iter().copied()).collect();
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        (features, labels)
    }
}

/// Synthetic two-class shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthShape {
    /// Concentric radius bands in `[-1.4, 1.4]^2`.
    Rings2d,
    /// Inside versus outside a ball in `[-1, 1]^4`.
    Hypersphere4d,
}

impl SynthShape {
    pub fn dim(self) -> usize {
        match self {
            SynthShape::Rings2d => 2,
            SynthShape::Hypersphere4d => 4,
        }
    }

    fn label(self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let inside = match self {
            SynthShape::Rings2d => ((r / RING_WIDTH) as usize) % 2 == 0,
            SynthShape::Hypersphere4d => r < SPHERE_RADIUS,
        };
        if inside {
            1.0
        } else {
            -1.0
        }
    }

    fn half_width(self) -> f64 {
        match self {
            SynthShape::Rings2d => 1.4,
            SynthShape::Hypersphere4d => 1.0,
        }
    }
}

impl FromStr for SynthShape {
    type Err = NncaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rings2d" => Ok(SynthShape::Rings2d),
            "hypersphere4d" => Ok(SynthShape::Hypersphere4d),
            _ => Err(NncaError::InvalidParameter(format!(
                "unknown synthetic shape {s:?} (expected rings2d or hypersphere4d)"
            ))),
        }
    }
}

const RING_WIDTH: f64 = 0.5;
/// Radius giving roughly equal class volumes inside `[-1, 1]^4`.
const SPHERE_RADIUS: f64 = 1.2;

/// `m` points drawn uniformly in the shape's box, alternating between the two
/// classes by rejection so the classes stay balanced, split into train/test.
pub fn synth_dataset(shape: SynthShape, m: usize, seed: u64) -> Result<Dataset> {
    if m < 20 {
        return Err(NncaError::InvalidParameter(format!("need at least 20 points, got {m}")));
    }
    let dim = shape.dim();
    let h = shape.half_width();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(m * dim);
    let mut labels = Vec::with_capacity(m);
    let mut x = vec![0.0; dim];
    for i in 0..m {
        let want = if i % 2 == 0 { 1.0 } else { -1.0 };
        loop {
            for v in x.iter_mut() {
                *v = rng.random_range(-h..h);
            }
            if shape.label(&x) == want {
                break;
            }
        }
        features.extend_from_slice(&x);
        labels.push(want);
    }
    Dataset::new(dim, features, labels, TRAIN_FRACTION, seed.wrapping_add(1))
}

/// How the kernel product of each iteration is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// H2 matrix assembled once, product in linear time.
    Fast,
    /// Direct summation, evaluating the kernel every iteration.
    Dense,
}

impl FromStr for Backend {
    type Err = NncaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Backend::Fast),
            "dense" => Ok(Backend::Dense),
            _ => Err(NncaError::InvalidParameter(format!(
                "unknown backend {s:?} (expected fast or dense)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainParams {
    /// Upper box bound on every `alpha_i`.
    pub lambda: f64,
    /// Step size; `None` picks `1.7 / mu` with `mu` a power-iteration
    /// estimate of the largest eigenvalue of the dual Hessian.
    pub learn_rate: Option<f64>,
    /// Weight of the equality-constraint penalty.
    pub beta: f64,
    pub max_iter: usize,
    /// Stop once the projected gradient has RMS norm below this.
    pub grad_tol: f64,
    pub nca: NncaOptions,
    pub nu: usize,
    pub eta: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            learn_rate: None,
            beta: 1.0,
            max_iter: 500,
            grad_tol: 1e-4,
            nca: NncaOptions::new(1e-8),
            nu: 64,
            eta: std::f64::consts::SQRT_2,
        }
    }
}

const POWER_STEPS: usize = 20;
const AUTO_STEP_FACTOR: f64 = 1.7;

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub iterations: usize,
    pub converged: bool,
    /// Whole training time including any assembly.
    pub wall_seconds: f64,
    pub assembly_seconds: f64,
    /// Mean time of one iteration, assembly excluded.
    pub per_iter_seconds: f64,
    /// RMS norm of the projected gradient at exit.
    pub final_gradient: f64,
    /// Learning rate actually used.
    pub step_size: f64,
}

/// A trained classifier.
#[derive(Debug, Clone)]
pub struct SvmModel {
    pub dim: usize,
    pub kernel: KernelSpec,
    /// Training points, row-major.
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: f64,
    pub score: f64,
}

/// Per-class and overall accuracy in percent; `None` for a class absent from
/// the evaluated set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub overall: f64,
}

/// The kernel product used by training.
pub struct KernelOperator {
    kernel: KernelSpec,
    cloud: PointCloud,
    h2: Option<H2Matrix>,
    pub assembly_seconds: f64,
}

impl KernelOperator {
    pub fn new(kernel: &KernelSpec, dim: usize, features: &[f64], backend: Backend, params: &TrainParams) -> Result<Self> {
        let cloud = PointCloud::shared(dim, features.to_vec())?;
        let start = Instant::now();
        let h2 = match backend {
            Backend::Fast => Some(H2Matrix::build(&cloud, kernel, params.nu, params.eta, &params.nca)?),
            Backend::Dense => None,
        };
        Ok(Self {
            kernel: kernel.clone(),
            cloud,
            h2,
            assembly_seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn h2(&self) -> Option<&H2Matrix> {
        self.h2.as_ref()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        match &self.h2 {
            Some(h2) => h2_matvec(h2, v),
            None => dense_matvec(&self.kernel, &self.cloud, v),
        }
    }
}

/// `1 - y (K v) - beta sum(v) y` with `v = y alpha`, given `kv = K v`.
pub fn dual_gradient(labels: &[f64], alpha: &[f64], kv: &[f64], beta: f64) -> Vec<f64> {
    let sum_v: f64 = labels.iter().zip(alpha).map(|(y, a)| y * a).sum();
    labels
        .iter()
        .zip(kv)
        .map(|(y, k)| 1.0 - y * k - beta * sum_v * y)
        .collect()
}

/// Gradient with the components that would push `alpha` through a bound
/// zeroed.
fn projected(grad: &[f64], alpha: &[f64], lambda: f64) -> Vec<f64> {
    grad.iter()
        .zip(alpha)
        .map(|(&g, &a)| {
            if (a <= BOUND_SLACK && g < 0.0) || (a >= lambda - BOUND_SLACK && g > 0.0) {
                0.0
            } else {
                g
            }
        })
        .collect()
}

fn signed(labels: &[f64], alpha: &[f64]) -> Vec<f64> {
    labels.iter().zip(alpha).map(|(y, a)| y * a).collect()
}

/// Trains on the given points and `+1`/`-1` labels.
pub fn train(
    dim: usize,
    features: &[f64],
    labels: &[f64],
    kernel: &KernelSpec,
    params: &TrainParams,
    backend: Backend,
) -> Result<(SvmModel, TrainReport)> {
    let n = labels.len();
    if features.len() != dim * n {
        return Err(NncaError::LengthMismatch {
            expected: dim * n,
            actual: features.len(),
        });
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(NncaError::InvalidParameter("training data must contain both classes".into()));
    }
    if params.learn_rate.is_some_and(|r| !(r > 0.0)) || !(params.lambda > 0.0) {
        return Err(NncaError::InvalidParameter("learning rate and lambda must be positive".into()));
    }
    let start = Instant::now();
    let op = KernelOperator::new(kernel, dim, features, backend, params)?;
    let step = match params.learn_rate {
        Some(r) => r,
        None => AUTO_STEP_FACTOR / hessian_norm_estimate(&op, labels, params.beta)?,
    };
    let loop_start = Instant::now();

    let mut alpha = vec![0.0; n];
    let mut report = TrainReport {
        assembly_seconds: op.assembly_seconds,
        step_size: step,
        ..Default::default()
    };
    let rms = |g: &[f64]| (g.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let mut kv = op.apply(&signed(labels, &alpha))?;
    loop {
        let grad = dual_gradient(labels, &alpha, &kv, params.beta);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(NncaError::NonFinite(format!(
                "dual gradient at iteration {}; try a smaller learning rate",
                report.iterations
            )));
        }
        report.final_gradient = rms(&projected(&grad, &alpha, params.lambda));
        if report.final_gradient <= params.grad_tol {
            report.converged = true;
            break;
        }
        if report.iterations == params.max_iter {
            break;
        }
        for (a, g) in alpha.iter_mut().zip(&grad) {
            *a = (*a + step * g).clamp(0.0, params.lambda);
        }
        kv = op.apply(&signed(labels, &alpha))?;
        report.iterations += 1;
    }
    let loop_seconds = loop_start.elapsed().as_secs_f64();
    report.per_iter_seconds = loop_seconds / (report.iterations + 1) as f64;

    let bias = bias_from(labels, &alpha, &kv, params.lambda);
    report.wall_seconds = start.elapsed().as_secs_f64();
    let model = SvmModel {
        dim,
        kernel: kernel.clone(),
        features: features.to_vec(),
        labels: labels.to_vec(),
        alpha,
        bias,
        lambda: params.lambda,
        beta: params.beta,
    };
    Ok((model, report))
}

/// Largest eigenvalue of `diag(y) K diag(y) + beta y y^T` by power iteration.
fn hessian_norm_estimate(op: &KernelOperator, labels: &[f64], beta: f64) -> Result<f64> {
    let n = labels.len();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i * 7919) % 13) as f64 / 13.0).collect();
    let mut mu = 0.0;
    for _ in 0..POWER_STEPS {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        let kv = op.apply(&signed(labels, &x))?;
        let sum_v: f64 = labels.iter().zip(&x).map(|(y, a)| y * a).sum();
        let hx: Vec<f64> = labels.iter().zip(&kv).map(|(y, k)| y * k + beta * sum_v * y).collect();
        mu = x.iter().zip(&hx).map(|(a, b)| a * b).sum::<f64>();
        x = hx;
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(NncaError::NonFinite("curvature estimate for the step size".into()));
    }
    Ok(mu)
}

/// Mean of `y_i - (K v)_i` over margin support vectors, falling back to all
/// support vectors, then to zero.
fn bias_from(labels: &[f64], alpha: &[f64], kv: &[f64], lambda: f64) -> f64 {
    let mean = |pick: &dyn Fn(f64) -> bool| {
        let (sum, count) = labels
            .iter()
            .zip(alpha)
            .zip(kv)
            .filter(|((_, &a), _)| pick(a))
            .fold((0.0, 0usize), |(s, c), ((y, _), k)| (s + y - k, c + 1));
        (count > 0).then(|| sum / count as f64)
    };
    mean(&|a| a > BOUND_SLACK && a < lambda - BOUND_SLACK)
        .or_else(|| mean(&|a| a > BOUND_SLACK))
        .unwrap_or(0.0)
}

/// Label and score of one point; a zero score maps to `+1`.
pub fn predict(model: &SvmModel, x: &[f64]) -> Prediction {
    let score = model
        .alpha
        .iter()
        .zip(&model.labels)
        .enumerate()
        .filter(|(_, (a, _))| **a != 0.0)
        .map(|(i, (a, y))| a * y * model.kernel.evaluate(&model.features[i * model.dim..(i + 1) * model.dim], x))
        .sum::<f64>()
        + model.bias;
    Prediction {
        label: if score >= 0.0 { 1.0 } else { -1.0 },
        score,
    }
}

/// Predictions for row-major points.
pub fn predict_many(model: &SvmModel, points: &[f64]) -> Vec<Prediction> {
    points.par_chunks(model.dim).map(|x| predict(model, x)).collect()
}

/// Accuracy of predicted against true labels; class 1 is `+1`.
pub fn accuracy(predicted: &[f64], truth: &[f64]) -> Result<Accuracy> {
    if predicted.len() != truth.len() {
        return Err(NncaError::LengthMismatch {
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(NncaError::InvalidParameter("nothing to evaluate".into()));
    }
    let class = |c: f64| {
        let (hit, total) = predicted
            .iter()
            .zip(truth)
            .filter(|(_, &t)| t == c)
            .fold((0usize, 0usize), |(h, n), (p, t)| (h + (p == t) as usize, n + 1));
        (hit, total)
    };
    let (h1, n1) = class(1.0);
    let (h2, n2) = class(-1.0);
    let pct = |h: usize, n: usize| (n > 0).then(|| 100.0 * h as f64 / n as f64);
    Ok(Accuracy {
        a1: pct(h1, n1),
        a2: pct(h2, n2),
        overall: 100.0 * (h1 + h2) as f64 / (n1 + n2) as f64,
    })
}

/// Accuracy of a model on row-major points with known labels.
pub fn evaluate(model: &SvmModel, points: &[f64], labels: &[f64]) -> Result<Accuracy> {
    let predicted: Vec<f64> = predict_many(model, points).iter().map(|p| p.label).collect();
    accuracy(&predicted, labels)
}

impl SvmModel {
    /// Writes `key,value` header lines, a `data` marker and one
    /// `features...,y,alpha` row per training point.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "dim,{}", self.dim);
        let _ = writeln!(out, "n_train,{}", self.labels.len());
        let _ = writeln!(out, "kernel,{}", self.kernel.name());
        for (name, value) in self.kernel.params() {
            let _ = writeln!(out, "param:{name},{value}");
        }
        let _ = writeln!(out, "lambda,{}", self.lambda);
        let _ = writeln!(out, "beta,{}", self.beta);
        let _ = writeln!(out, "bias,{}", self.bias);
        let _ = writeln!(out, "data");
        for i in 0..self.labels.len() {
            for v in &self.features[i * self.dim..(i + 1) * self.dim] {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{},{}", self.labels[i], self.alpha[i]);
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let mut dim = None;
        let mut n_train = None;
        let mut kernel_name = None;
        let mut reg_a = None;
        let mut lambda = None;
        let mut beta = None;
        let mut bias = None;
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| NncaError::Parse(format!("bad number {v:?}")));
        for line in lines.by_ref() {
            if line.trim() == "data" {
                break;
            }
            let (key, value) = line
                .split_once(',')
                .ok_or_else(|| NncaError::Parse(format!("bad header line {line:?}")))?;
            match key {
                "dim" => dim = Some(num(value)? as usize),
                "n_train" => n_train = Some(num(value)? as usize),
                "kernel" => kernel_name = Some(value.trim().to_string()),
                "param:reg_a" => reg_a = Some(num(value)?),
                "lambda" => lambda = Some(num(value)?),
                "beta" => beta = Some(num(value)?),
                "bias" => bias = Some(num(value)?),
                _ => return Err(NncaError::Parse(format!("unknown header key {key:?}"))),
            }
        }
        let missing = |k: &str| NncaError::Parse(format!("model file lacks {k}"));
        let dim = dim.ok_or_else(|| missing("dim"))?;
        let n_train = n_train.ok_or_else(|| missing("n_train"))?;
        let mut kernel = builtin_kernel(&kernel_name.ok_or_else(|| missing("kernel"))?, dim)?;
        if let Some(a) = reg_a {
            kernel = kernel.with_reg_a(a)?;
        }
        let mut features = Vec::with_capacity(n_train * dim);
        let mut labels = Vec::with_capacity(n_train);
        let mut alpha = Vec::with_capacity(n_train);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let values: Vec<f64> = line.split(',').map(num).collect::<Result<_>>()?;
            if values.len() != dim + 2 {
                return Err(NncaError::Parse(format!("expected {} values per row, got {}", dim + 2, values.len())));
            }
            features.extend_from_slice(&values[..dim]);
            labels.push(values[dim]);
            alpha.push(values[dim + 1]);
        }
        if labels.len() != n_train {
            return Err(NncaError::Parse(format!("expected {n_train} rows, got {}", labels.len())));
        }
        Ok(Self {
            dim,
            kernel,
            features,
            labels,
            alpha,
            bias: bias.ok_or_else(|| missing("bias"))?,
            lambda: lambda.ok_or_else(|| missing("lambda"))?,
            beta: beta.ok_or_else(|| missing("beta"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn matern(dim: usize) -> KernelSpec {
        builtin_kernel("matern", dim).unwrap()
    }

    fn model(features: Vec<f64>, labels: Vec<f64>, alpha: Vec<f64>, bias: f64) -> SvmModel {
        SvmModel {
            dim: 2,
            kernel: matern(2),
            features,
            labels,
            alpha,
            bias,
            lambda: 10.0,
            beta: 1.0,
        }
    }

    #[test]
    fn zero_model_predicts_plus_one() {
        let m = model(vec![0.0, 0.0], vec![1.0], vec![0.0], 0.0);
        let p = predict(&m, &[0.5, 0.5]);
        assert_eq!(p.score, 0.0);
        assert_eq!(p.label, 1.0);
    }

    #[test]
    fn single_support_vector_scores_one_at_itself() {
        let m = model(vec![0.2, -0.1], vec![1.0], vec![1.0], 0.0);
        let p = predict(&m, &[0.2, -0.1]);
        assert_relative_eq!(p.score, 1.0, epsilon = 1e-15);
        assert_eq!(p.label, 1.0);
    }

    #[test]
    fn three_support_vectors_match_hand_sum() {
        let m = model(vec![0.0, 0.0, 1.0, 0.0, 0.0, 2.0], vec![1.0, -1.0, 1.0], vec![0.5, 2.0, 1.5], 0.25);
        let x = [0.0, 1.0];
        let hand = 0.5 * (-1f64).exp() - 2.0 * (-(2f64).sqrt()).exp() + 1.5 * (-1f64).exp() + 0.25;
        assert_relative_eq!(predict(&m, &x).score, hand, epsilon = 1e-12);
    }

    #[test]
    fn accuracy_counts() {
        let truth: Vec<f64> = [vec![1.0; 10], vec![-1.0; 10]].concat();
        let all = accuracy(&truth, &truth).unwrap();
        assert_eq!((all.a1, all.a2, all.overall), (Some(100.0), Some(100.0), 100.0));
        let flipped: Vec<f64> = truth.iter().map(|y| -y).collect();
        let none = accuracy(&flipped, &truth).unwrap();
        assert_eq!((none.a1, none.a2, none.overall), (Some(0.0), Some(0.0), 0.0));
        let mut some = truth.clone();
        some[0] = -1.0;
        some[10] = 1.0;
        some[11] = 1.0;
        let acc = accuracy(&some, &truth).unwrap();
        assert_relative_eq!(acc.a1.unwrap(), 90.0);
        assert_relative_eq!(acc.a2.unwrap(), 80.0);
        assert_relative_eq!(acc.overall, 85.0);
        let one_class = accuracy(&[1.0], &[1.0]).unwrap();
        assert_eq!(one_class.a2, None);
    }

    #[test]
    fn two_separated_points_are_learned() {
        let features = vec![-1.0, -1.0, 1.0, 1.0];
        let labels = vec![1.0, -1.0];
        for backend in [Backend::Fast, Backend::Dense] {
            let (m, rep) = train(2, &features, &labels, &matern(2), &TrainParams::default(), backend).unwrap();
            assert!(rep.converged);
            assert!(m.alpha.iter().all(|&a| (0.0..=10.0).contains(&a)));
            assert_eq!(predict(&m, &[-1.0, -1.0]).label, 1.0);
            assert_eq!(predict(&m, &[1.0, 1.0]).label, -1.0);
        }
    }

    #[test]
    fn dual_gradient_by_hand() {
        let y = [1.0, -1.0];
        let a = [0.5, 2.0];
        let kv = [0.3, -0.4];
        // sum(v) = 0.5 - 2 = -1.5
        let g = dual_gradient(&y, &a, &kv, 1.0);
        assert_relative_eq!(g[0], 1.0 - 0.3 + 1.5, epsilon = 1e-15);
        assert_relative_eq!(g[1], 1.0 - 0.4 - 1.5, epsilon = 1e-15);
    }

    #[test]
    fn synthetic_data_is_reproducible_balanced_and_in_range() {
        let a = synth_dataset(SynthShape::Rings2d, 1000, 7).unwrap();
        let b = synth_dataset(SynthShape::Rings2d, 1000, 7).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.train, b.train);
        assert!(a.features.iter().all(|v| (-1.4..=1.4).contains(v)));
        let pos = a.labels.iter().filter(|&&y| y == 1.0).count();
        assert!((pos as f64 / 1000.0 - 0.5).abs() <= 0.02);
        let train_pos = a.train.iter().filter(|&&i| a.labels[i] == 1.0).count();
        assert!((train_pos as f64 / a.train.len() as f64 - 0.5).abs() <= 0.02);
        assert!((a.train.len() as f64 / 1000.0 - TRAIN_FRACTION).abs() < 0.01);

        let s = synth_dataset(SynthShape::Hypersphere4d, 200, 1).unwrap();
        assert_eq!(s.dim, 4);
        assert!(s.features.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(synth_dataset(SynthShape::Rings2d, 10, 1).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Dataset::new(2, vec![0.0; 4], vec![1.0, 0.0], 0.85, 1).is_err());
        assert!(Dataset::new(2, vec![0.0; 3], vec![1.0, -1.0], 0.85, 1).is_err());
        let err = train(2, &[0.0, 0.0, 1.0, 1.0], &[1.0, 1.0], &matern(2), &TrainParams::default(), Backend::Dense);
        assert!(err.is_err());
        assert!("slow".parse::<Backend>().is_err());
        assert!("cubes".parse::<SynthShape>().is_err());
    }

    #[test]
    fn model_round_trips_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.csv");
        let m = model(vec![0.1, 0.2, -0.3, 0.4], vec![1.0, -1.0], vec![0.25, 1.0 / 3.0], -0.125);
        m.save(&path).unwrap();
        let back = SvmModel::load(&path).unwrap();
        assert_eq!(back.features, m.features);
        assert_eq!(back.alpha, m.alpha);
        assert_eq!(back.labels, m.labels);
        assert_eq!(back.bias, m.bias);
        assert_eq!(back.kernel.name(), "matern");
        std::fs::write(&path, "dim,2\nwhat,1\ndata\n").unwrap();
        assert!(SvmModel::load(&path).is_err());
    }
}
