//! Hierarchical H2 matrices built by nested cross approximation, with fast
//! matrix-vector products, a GMRES solver and a kernel SVM trainer on top.

pub mod aca;
pub mod bench;
pub mod cloud;
pub mod error;
pub mod kernel;
pub mod krylov;
pub mod matvec;
pub mod nnca;
pub mod svm;
pub mod tree;

pub use aca::{partial_aca, AcaResult, EntrySource, Transposed};
pub use cloud::PointCloud;
pub use error::{NncaError, Result};
pub use krylov::{gmres, solve_fredholm, FredholmSystem, GmresReport};
pub use matvec::{dense_matvec, h2_matvec, relative_error};
pub use nnca::{H2Matrix, H2Stats, NncaOptions, PivotSet};
pub use kernel::{builtin_kernel, Kernel, KernelMatrix, KernelSpec, RadialKernel};
pub use tree::{admissible, Cell, CellId, CubeBox, HierTree};
