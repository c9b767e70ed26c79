//! `ttc`: synthesize, mask, tensorize, complete and evaluate tensors.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid arguments or malformed
//! input, 3 shape mismatch, 4 solver divergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ttcomp::eval::{gen_random_mask, gen_sin_tensor, psnr, rse};
use ttcomp::io::{read_pnm, read_tnsr, write_pnm, write_tnsr};
use ttcomp::pipeline::{run_complete, Algorithm, CompletionOptions, RunConfig, VdtChoice};
use ttcomp::{AdamParams, Error, RankSpec, SolverConfig, VdtPlan, WoptMethod};

#[derive(Parser)]
#[command(name = "ttc", version, about = "Tensor-train completion toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the sampled oscillating-function tensor.
    Synth {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a random observation mask with an exact missing rate.
    Mask {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long)]
        missing_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Complete a tensor from its observed entries.
    Complete(CompleteArgs),
    /// Print RSE and PSNR of a completed tensor against the truth.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        completed: PathBuf,
        /// Value range of the data, mapped to 0..255 for PSNR.
        #[arg(long, default_value_t = 1.0)]
        range: f64,
    },
    /// Apply or invert visual data tensorization.
    Vdt {
        #[arg(long)]
        input: PathBuf,
        /// `auto` or a plan line such as `u=2,2 v=2,2 trailing=3`.
        #[arg(long)]
        plan: String,
        #[arg(long)]
        invert: bool,
        /// Image modes `U,V`; needed to invert an `auto` plan.
        #[arg(long, value_delimiter = ',')]
        image: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a binary PPM/PGM image to a TNSR tensor in [0, 1].
    Img2tnsr {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert an HxW or HxWx3 TNSR tensor to a binary PGM/PPM image.
    Tnsr2img {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Wopt,
    Sgd,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Adam,
    Backtracking,
}

#[derive(Args)]
struct CompleteArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// CSV convergence log.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Directory for the fitted cores.
    #[arg(long)]
    model_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "wopt")]
    algorithm: AlgorithmArg,
    /// Uniform rank (`12`) or full chain (`1,3,3,1`).
    #[arg(long, default_value = "12")]
    ranks: String,
    /// Defaults to 500 for wopt and 100000 for sgd.
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long)]
    bias_correction: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    init_scale: f64,
    #[arg(long, default_value_t = 1000)]
    log_every: usize,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerArg,
    /// `auto` or a plan line; omitted means no tensorization.
    #[arg(long)]
    vdt: Option<String>,
    /// Solve on the raw values instead of mapping them onto [0, 1].
    #[arg(long)]
    no_normalize: bool,
    /// Write 0 in the elapsed_ms log column.
    #[arg(long)]
    no_timing: bool,
    #[arg(long, default_value_t = 1.0)]
    range: f64,
}

fn parse_vdt(s: &str) -> Result<VdtChoice, Error> {
    if s == "auto" {
        Ok(VdtChoice::Auto)
    } else {
        Ok(VdtChoice::Plan(s.parse()?))
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 1,
        Error::ShapeMismatch { .. }
        | Error::ModeOutOfRange { .. }
        | Error::IndexOutOfRange { .. } => 3,
        Error::Diverged { .. } => 4,
        _ => 2,
    }
}

fn complete_config(a: CompleteArgs) -> Result<RunConfig, Error> {
    let ranks: RankSpec = a.ranks.parse()?;
    let (algorithm, mut solver) = match a.algorithm {
        AlgorithmArg::Wopt => (Algorithm::Wopt, SolverConfig::wopt(ranks)),
        AlgorithmArg::Sgd => (Algorithm::Sgd, SolverConfig::sgd(ranks)),
    };
    if let Some(m) = a.max_iters {
        solver.max_iters = m;
    }
    solver.tol = a.tol;
    solver.adam = AdamParams {
        lr: a.lr,
        beta1: a.beta1,
        beta2: a.beta2,
        eps: a.eps,
        bias_correction: a.bias_correction,
    };
    solver.seed = a.seed;
    solver.init_scale = a.init_scale;
    solver.log_every = a.log_every;
    solver.wopt_method = match a.optimizer {
        OptimizerArg::Adam => WoptMethod::Adam,
        OptimizerArg::Backtracking => WoptMethod::Backtracking,
    };
    let vdt = a
        .vdt
        .as_deref()
        .map(parse_vdt)
        .transpose()?
        .unwrap_or_default();
    Ok(RunConfig {
        options: CompletionOptions {
            algorithm,
            solver,
            vdt,
            normalize: !a.no_normalize,
            data_range: a.range,
        },
        input: a.input,
        mask: a.mask,
        output: a.out,
        log: a.log,
        model_dir: a.model_dir,
        timing: !a.no_timing,
    })
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Synth { dims, out } => write_tnsr(&out, &gen_sin_tensor(&dims)?),
        Command::Mask {
            dims,
            missing_rate,
            seed,
            out,
        } => write_tnsr(
            &out,
            gen_random_mask(&dims, missing_rate, seed)?.as_tensor(),
        ),
        Command::Complete(args) => {
            let config = complete_config(args)?;
            let result = run_complete(&config)?;
            eprintln!(
                "iterations={} elapsed_s={:.3}",
                result.iterations,
                result.elapsed.as_secs_f64()
            );
            Ok(())
        }
        Command::Eval {
            truth,
            completed,
            range,
        } => {
            let y = read_tnsr(&truth)?;
            let z = read_tnsr(&completed)?;
            let r = rse(&y, &z)?;
            let p = psnr(&y, &z, range)?;
            println!("rse={r}\npsnr={p}");
            Ok(())
        }
        Command::Vdt {
            input,
            plan,
            invert,
            image,
            out,
        } => {
            let t = read_tnsr(&input)?;
            let plan = match (plan.as_str(), invert) {
                ("auto", false) => VdtChoice::Auto
                    .resolve(t.dims())?
                    .expect("auto resolves to a plan"),
                ("auto", true) => {
                    let image = image.ok_or_else(|| {
                        Error::InvalidPlan("inverting an auto plan needs --image U,V".into())
                    })?;
                    let &[u, v] = image.as_slice() else {
                        return Err(Error::InvalidPlan("--image takes two values".into()));
                    };
                    let levels = VdtPlan::auto(u, v, Vec::new())?.levels();
                    let trailing = t.dims().get(levels..).unwrap_or_default().to_vec();
                    VdtPlan::auto(u, v, trailing)?
                }
                (text, _) => text.parse::<VdtPlan>()?,
            };
            let result = if invert {
                plan.invert(&t)?
            } else {
                plan.apply(&t)?
            };
            write_tnsr(&out, &result)
        }
        Command::Img2tnsr { input, out } => write_tnsr(&out, &read_pnm(&input)?),
        Command::Tnsr2img { input, out } => write_pnm(&out, &read_tnsr(&input)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
