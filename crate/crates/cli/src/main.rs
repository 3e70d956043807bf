//! Command-line driver for the NNCA benchmarks and applications.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nnca::bench::{
    default_leaf_size, run_matvec_bench, run_solver_bench, run_svm_bench, write_matvec_csv, write_solver_csv,
    write_svm_csv, Distribution, MatvecConfig, SolverConfig, SvmBenchConfig, DEFAULT_ORACLE_CAP,
};
use nnca::cloud::read_points_csv;
use nnca::svm::{self, Backend, Dataset, SvmModel, SynthShape, TrainParams, TRAIN_FRACTION};
use nnca::{builtin_kernel, HierTree, KernelSpec, NncaError, NncaOptions, PointCloud};

#[derive(Parser, Debug)]
#[command(name = "nnca", version, about = "H2 matrices by nested cross approximation")]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "NNCA_THREADS")]
    threads: Option<usize>,
    /// Single thread and empty timing columns, for byte-identical output.
    #[arg(long, global = true)]
    reproducible: bool,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the cluster tree and print its levels and occupancy.
    TreeInfo(TreeInfoArgs),
    /// Matvec benchmark sweeping N (and optionally epsilon).
    MatvecBench(MatvecArgs),
    /// Matvec benchmark sweeping epsilon at a fixed N.
    ConvergenceSweep(SweepArgs),
    /// Fredholm integral-equation solves on uniform 3D grids.
    SolveIe(SolveArgs),
    /// Train a kernel SVM and save the model.
    SvmTrain(SvmTrainArgs),
    /// Label query points with a saved model.
    SvmPredict(SvmPredictArgs),
    /// Fast versus dense SVM training over dataset sizes.
    SvmBench(SvmBenchArgs),
}

#[derive(Args, Debug)]
struct GeometryArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value = "uniform", value_parser = parse_distribution)]
    distribution: Distribution,
    /// Leaf capacity; defaults to 64 (216 in 3D).
    #[arg(long)]
    nu: Option<usize>,
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    eta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct KernelArgs {
    /// reg-log-2d, reg-inverse, coulomb-3d, matern or gaussian.
    #[arg(long, default_value = "reg-log-2d")]
    kernel: String,
    #[arg(long)]
    reg_a: Option<f64>,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// CSV destination; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TreeInfoArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    #[arg(long, default_value_t = 4096)]
    n: usize,
    /// Read points from a CSV file instead of generating them.
    #[arg(long)]
    points: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MatvecArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1024, 4096])]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1e-9])]
    eps_nca: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    oracle_cap: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, default_value_t = 10240)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1e-4, 1e-6, 1e-8, 1e-10])]
    eps_nca: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    oracle_cap: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![8, 12, 16])]
    n_per_axis: Vec<usize>,
    #[arg(long, default_value_t = 1e-7)]
    eps_nca: f64,
    #[arg(long, default_value_t = nnca::krylov::DEFAULT_GMRES_TOL)]
    eps_gmres: f64,
    #[arg(long, default_value_t = default_leaf_size(3))]
    nu: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// matern or gaussian.
    #[arg(long, default_value = "matern")]
    kernel: String,
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
    /// Step size; chosen from a Hessian norm estimate when absent.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-4)]
    grad_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps_nca: f64,
    #[arg(long, default_value_t = 64)]
    nu: usize,
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    eta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SvmTrainArgs {
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, default_value = "fast", value_parser = parse_backend)]
    backend: Backend,
    /// Labelled CSV, label in the last column.
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    data: Option<PathBuf>,
    /// rings2d or hypersphere4d.
    #[arg(long, value_parser = parse_shape)]
    synth: Option<SynthShape>,
    /// Size of the synthetic dataset.
    #[arg(long, default_value_t = 5600)]
    m: usize,
    /// Where to save the trained model.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SvmPredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Query points, one per row.
    #[arg(long)]
    data: PathBuf,
    /// The last column of the query file holds true labels.
    #[arg(long)]
    labelled: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SvmBenchArgs {
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, default_value = "hypersphere4d", value_parser = parse_shape)]
    synth: SynthShape,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1024, 4096])]
    m: Vec<usize>,
    /// Skip the dense backend.
    #[arg(long)]
    fast_only: bool,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_distribution(s: &str) -> Result<Distribution, String> {
    s.parse().map_err(|e: NncaError| e.to_string())
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    s.parse().map_err(|e: NncaError| e.to_string())
}

fn parse_shape(s: &str) -> Result<SynthShape, String> {
    s.parse().map_err(|e: NncaError| e.to_string())
}

fn make_kernel(args: &KernelArgs, dim: usize) -> nnca::Result<KernelSpec> {
    let kernel = builtin_kernel(&args.kernel, dim)?;
    match args.reg_a {
        Some(a) => kernel.with_reg_a(a),
        None => Ok(kernel),
    }
}

fn open_output(args: &OutputArgs) -> nnca::Result<Box<dyn Write>> {
    Ok(match &args.output {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    })
}

impl TrainArgs {
    fn params(&self) -> TrainParams {
        TrainParams {
            lambda: self.lambda,
            learn_rate: self.lr,
            beta: self.beta,
            max_iter: self.max_iter,
            grad_tol: self.grad_tol,
            nca: NncaOptions::new(self.eps_nca),
            nu: self.nu,
            eta: self.eta,
        }
    }
}

fn is_usage_error(e: &NncaError) -> bool {
    matches!(
        e,
        NncaError::InvalidParameter(_)
            | NncaError::InvalidEta(_)
            | NncaError::InvalidLeafCapacity(_)
            | NncaError::UnknownKernel { .. }
            | NncaError::DimensionMismatch { .. }
    )
}

fn run(cli: &Cli) -> nnca::Result<()> {
    let mask = cli.reproducible;
    match &cli.command {
        Command::TreeInfo(args) => {
            let g = &args.geometry;
            let cloud = match &args.points {
                Some(path) => {
                    let pts = read_points_csv(path, false)?;
                    PointCloud::shared(pts.dim, pts.coords)?
                }
                None => PointCloud::shared(g.dim, g.distribution.points(args.n, g.dim, g.seed))?,
            };
            let nu = g.nu.unwrap_or(default_leaf_size(cloud.dim()));
            let tree = HierTree::build(&cloud, nu, g.eta)?;
            print!("{}", tree.report());
        }
        Command::MatvecBench(args) => {
            let g = &args.geometry;
            let cfg = MatvecConfig {
                dim: g.dim,
                distribution: g.distribution,
                sizes: args.n.clone(),
                epsilons: args.eps_nca.clone(),
                kernel: make_kernel(&args.kernel, g.dim)?,
                nu: g.nu.unwrap_or(default_leaf_size(g.dim)),
                eta: g.eta,
                seed: g.seed,
                oracle_cap: args.oracle_cap,
            };
            cfg.validate()?;
            if cli.dry_run {
                println!("{cfg:#?}");
                return Ok(());
            }
            write_matvec_csv(open_output(&args.output)?, &run_matvec_bench(&cfg)?, mask)?;
        }
        Command::ConvergenceSweep(args) => {
            let g = &args.geometry;
            let cfg = MatvecConfig {
                dim: g.dim,
                distribution: g.distribution,
                sizes: vec![args.n],
                epsilons: args.eps_nca.clone(),
                kernel: make_kernel(&args.kernel, g.dim)?,
                nu: g.nu.unwrap_or(default_leaf_size(g.dim)),
                eta: g.eta,
                seed: g.seed,
                oracle_cap: args.oracle_cap,
            };
            cfg.validate()?;
            if cli.dry_run {
                println!("{cfg:#?}");
                return Ok(());
            }
            write_matvec_csv(open_output(&args.output)?, &run_matvec_bench(&cfg)?, mask)?;
        }
        Command::SolveIe(args) => {
            let cfg = SolverConfig {
                per_axis: args.n_per_axis.clone(),
                eps_nca: args.eps_nca,
                eps_gmres: args.eps_gmres,
                nu: args.nu,
                seed: args.seed,
            };
            if cli.dry_run {
                println!("{cfg:#?}");
                return Ok(());
            }
            write_solver_csv(open_output(&args.output)?, &run_solver_bench(&cfg)?, mask)?;
        }
        Command::SvmTrain(args) => {
            let params = args.train.params();
            let ds = match (&args.data, args.synth) {
                (Some(path), _) => {
                    let pts = read_points_csv(path, true)?;
                    let labels = pts.labels.unwrap_or_default();
                    Dataset::new(pts.dim, pts.coords, labels, TRAIN_FRACTION, args.train.seed)?
                }
                (None, Some(shape)) => svm::synth_dataset(shape, args.m, args.train.seed)?,
                (None, None) => unreachable!("clap requires --data or --synth"),
            };
            let kernel = builtin_kernel(&args.train.kernel, ds.dim)?;
            if cli.dry_run {
                println!("backend: {:?}\nkernel: {}\npoints: {}\n{params:#?}", args.backend, kernel.name(), ds.len());
                return Ok(());
            }
            let (xf, yf) = ds.subset(&ds.train);
            let (xt, yt) = ds.subset(&ds.test);
            let (model, report) = svm::train(ds.dim, &xf, &yf, &kernel, &params, args.backend)?;
            model.save(&args.model)?;
            let acc = svm::evaluate(&model, &xt, &yt)?;
            let mut w = csv::Writer::from_writer(open_output(&args.output)?);
            w.write_record(["N_train", "iter", "converged", "t", "i", "A1", "A2", "OA"])?;
            let pct = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
            let time = |t: f64| if mask { String::new() } else { format!("{t:.6}") };
            w.write_record([
                yf.len().to_string(),
                report.iterations.to_string(),
                report.converged.to_string(),
                time(report.wall_seconds),
                time(report.per_iter_seconds),
                pct(acc.a1),
                pct(acc.a2),
                format!("{:.2}", acc.overall),
            ])?;
            w.flush()?;
        }
        Command::SvmPredict(args) => {
            if cli.dry_run {
                println!("{args:#?}");
                return Ok(());
            }
            let model = SvmModel::load(&args.model)?;
            let pts = read_points_csv(&args.data, args.labelled)?;
            if pts.dim != model.dim {
                return Err(NncaError::DimensionMismatch {
                    expected: model.dim,
                    actual: pts.dim,
                });
            }
            let preds = svm::predict_many(&model, &pts.coords);
            let mut w = csv::Writer::from_writer(open_output(&args.output)?);
            w.write_record(["label", "score"])?;
            for p in &preds {
                w.write_record([format!("{}", p.label), format!("{:.12e}", p.score)])?;
            }
            w.flush()?;
            if let Some(labels) = &pts.labels {
                let predicted: Vec<f64> = preds.iter().map(|p| p.label).collect();
                let acc = svm::accuracy(&predicted, labels)?;
                eprintln!("OA {:.2}%", acc.overall);
            }
        }
        Command::SvmBench(args) => {
            let kernel = builtin_kernel(&args.train.kernel, args.synth.dim())?;
            let cfg = SvmBenchConfig {
                shape: args.synth,
                sizes: args.m.clone(),
                kernel,
                params: args.train.params(),
                seed: args.train.seed,
                with_dense: !args.fast_only,
            };
            if cli.dry_run {
                println!("{cfg:#?}");
                return Ok(());
            }
            write_svm_csv(open_output(&args.output)?, &run_svm_bench(&cfg)?, mask)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = if cli.reproducible { Some(1) } else { cli.threads };
    if let Some(t) = threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
