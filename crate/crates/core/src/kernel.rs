//! Kernel functions `K(x, y)` and the counted matrix-entry oracle built on
//! top of a point cloud.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::cloud::PointCloud;
use crate::error::{NncaError, Result};

/// Default regularisation radius of the regularised benchmark kernels.
pub const DEFAULT_REG_A: f64 = 1e-4;

/// Names accepted by [`builtin_kernel`].
pub const BUILTIN_KERNELS: [&str; 5] = ["reg-log-2d", "reg-inverse", "coulomb-3d", "matern", "gaussian"];

/// A scalar kernel function of two points.
pub trait Kernel: Send + Sync {
    fn evaluate(&self, x: &[f64], y: &[f64]) -> f64;
}

impl<F> Kernel for F
where
    F: Fn(&[f64], &[f64]) -> f64 + Send + Sync,
{
    fn evaluate(&self, x: &[f64], y: &[f64]) -> f64 {
        self(x, y)
    }
}

/// The radial kernels used by the benchmarks, `K(x, y) = f(|x - y|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialKernel {
    /// `r (log r - 1) / (a (log a - 1))` for `r < a`, `log r / log a` otherwise.
    RegLog { a: f64 },
    /// `r / a` for `r < a`, `a / r` otherwise.
    RegInverse { a: f64 },
    /// `1 / r`, with `K(x, x) = 0`.
    Coulomb,
    /// `exp(-r)`.
    Matern,
    /// `exp(-r^2)`.
    Gaussian,
}

impl RadialKernel {
    #[inline]
    pub fn profile(&self, r: f64) -> f64 {
        match *self {
            RadialKernel::RegLog { a } => {
                if r < a {
                    if r == 0.0 {
                        0.0
                    } else {
                        r * (r.ln() - 1.0) / (a * (a.ln() - 1.0))
                    }
                } else {
                    r.ln() / a.ln()
                }
            }
            RadialKernel::RegInverse { a } => {
                if r < a {
                    r / a
                } else {
                    a / r
                }
            }
            RadialKernel::Coulomb => {
                if r == 0.0 {
                    0.0
                } else {
                    1.0 / r
                }
            }
            RadialKernel::Matern => (-r).exp(),
            RadialKernel::Gaussian => (-r * r).exp(),
        }
    }
}

impl Kernel for RadialKernel {
    #[inline]
    fn evaluate(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if let RadialKernel::Gaussian = self {
            return (-r2).exp();
        }
        self.profile(r2.sqrt())
    }
}

#[derive(Clone)]
enum KernelImpl {
    Radial(RadialKernel),
    Custom(Arc<dyn Kernel>),
}

/// A named kernel together with its parameters.
///
/// Parameters are fixed at construction; use [`KernelSpec::with_reg_a`] to
/// derive a kernel with a different regularisation radius.
#[derive(Clone)]
pub struct KernelSpec {
    name: String,
    dim: usize,
    symmetric: bool,
    params: Vec<(String, f64)>,
    imp: KernelImpl,
}

impl KernelSpec {
    /// Registers a user-defined kernel.
    pub fn custom(
        name: impl Into<String>,
        dim: usize,
        symmetric: bool,
        kernel: impl Kernel + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            symmetric,
            params: Vec::new(),
            imp: KernelImpl::Custom(Arc::new(kernel)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Same kernel with regularisation radius `a` (only meaningful for the
    /// regularised kernels; other kernels are returned unchanged).
    pub fn with_reg_a(&self, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(NncaError::InvalidParameter(format!("reg_a must be positive, got {a}")));
        }
        let mut out = self.clone();
        if let KernelImpl::Radial(RadialKernel::RegLog { .. }) = self.imp {
            out.imp = KernelImpl::Radial(RadialKernel::RegLog { a });
            out.params = vec![("reg_a".into(), a)];
        } else if let KernelImpl::Radial(RadialKernel::RegInverse { .. }) = self.imp {
            out.imp = KernelImpl::Radial(RadialKernel::RegInverse { a });
            out.params = vec![("reg_a".into(), a)];
        }
        Ok(out)
    }

    #[inline]
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.imp {
            KernelImpl::Radial(k) => k.evaluate(x, y),
            KernelImpl::Custom(k) => k.evaluate(x, y),
        }
    }
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("symmetric", &self.symmetric)
            .field("params", &self.params)
            .finish()
    }
}

/// One of the benchmark kernels by name, with `reg_a` at its default.
pub fn builtin_kernel(name: &str, dim: usize) -> Result<KernelSpec> {
    let (radial, params) = match name {
        "reg-log-2d" => (
            RadialKernel::RegLog { a: DEFAULT_REG_A },
            vec![("reg_a".to_string(), DEFAULT_REG_A)],
        ),
        "reg-inverse" => (
            RadialKernel::RegInverse { a: DEFAULT_REG_A },
            vec![("reg_a".to_string(), DEFAULT_REG_A)],
        ),
        "coulomb-3d" => (RadialKernel::Coulomb, Vec::new()),
        "matern" => (RadialKernel::Matern, Vec::new()),
        "gaussian" => (RadialKernel::Gaussian, Vec::new()),
        _ => {
            return Err(NncaError::UnknownKernel {
                name: name.to_string(),
                valid: BUILTIN_KERNELS.join(", "),
            })
        }
    };
    if dim == 0 {
        return Err(NncaError::InvalidParameter("kernel dimension must be positive".into()));
    }
    Ok(KernelSpec {
        name: name.to_string(),
        dim,
        symmetric: true,
        params,
        imp: KernelImpl::Radial(radial),
    })
}

/// The matrix `A(i, j) = K(p_i, q_j)` seen through an entry oracle that counts
/// every kernel evaluation it performs.
pub struct KernelMatrix<'a> {
    kernel: &'a KernelSpec,
    cloud: &'a PointCloud,
    evaluations: AtomicU64,
}

impl<'a> KernelMatrix<'a> {
    pub fn new(kernel: &'a KernelSpec, cloud: &'a PointCloud) -> Result<Self> {
        if kernel.dim() != cloud.dim() {
            return Err(NncaError::DimensionMismatch {
                expected: kernel.dim(),
                actual: cloud.dim(),
            });
        }
        Ok(Self {
            kernel,
            cloud,
            evaluations: AtomicU64::new(0),
        })
    }

    pub fn kernel(&self) -> &'a KernelSpec {
        self.kernel
    }

    pub fn cloud(&self) -> &'a PointCloud {
        self.cloud
    }

    pub fn nrows(&self) -> usize {
        self.cloud.num_targets()
    }

    pub fn ncols(&self) -> usize {
        self.cloud.num_sources()
    }

    /// Total kernel evaluations performed through this oracle.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// `K(p_i, q_j)`.
    pub fn entry(&self, i: usize, j: usize) -> Result<f64> {
        if i >= self.nrows() || j >= self.ncols() {
            return Err(NncaError::IndexOutOfRange {
                row: i,
                col: j,
                rows: self.nrows(),
                cols: self.ncols(),
            });
        }
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        Ok(self.kernel.evaluate(self.cloud.target(i), self.cloud.source(j)))
    }

    /// Dense sub-block `A(rows, cols)` in the order of the given index lists.
    ///
    /// # Panics
    /// If an index is out of range.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rows.len(), cols.len());
        for (c, &j) in cols.iter().enumerate() {
            self.fill_column(j, rows, out.column_mut(c).as_mut_slice());
        }
        out
    }

    /// Writes `A(i, cols)` into `out`.
    pub(crate) fn fill_row(&self, i: usize, cols: &[usize], out: &mut [f64]) {
        let p = self.cloud.target(i);
        for (o, &j) in out.iter_mut().zip(cols) {
            *o = self.kernel.evaluate(p, self.cloud.source(j));
        }
        self.evaluations
            .fetch_add(cols.len() as u64, Ordering::Relaxed);
    }

    /// Writes `A(rows, j)` into `out`.
    pub(crate) fn fill_column(&self, j: usize, rows: &[usize], out: &mut [f64]) {
        let q = self.cloud.source(j);
        for (o, &i) in out.iter_mut().zip(rows) {
            *o = self.kernel.evaluate(self.cloud.target(i), q);
        }
        self.evaluations
            .fetch_add(rows.len() as u64, Ordering::Relaxed);
    }
}
