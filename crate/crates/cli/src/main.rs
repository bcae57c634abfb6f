//! `csep`: generate benchmark forms, inspect structural certificates, run the
//! sphere-constrained inner solver, and project onto the S-separable set.
//!
//! Exit codes: 0 success, 1 not converged / inconclusive at the iteration
//! cap, 2 bad arguments, 3 I/O or malformed file, 4 validation failure
//! (for example a dense payload that is not completely symmetric).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use csep_core::inner::{InitKind, InnerOptions, InnerResult};
use csep_core::projection::{OuterResult, ProjectOptions, StopReason, Verdict};
use csep_core::{io as csio, multi_start, structural_certificate, CsError, FeasibleSet, QuarticForm};

#[derive(Parser)]
#[command(name = "csep", version, about = "Best S-separable approximation of completely symmetric matrices")]
struct Cli {
    /// Cap the rayon thread pool used by multi-start solves.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one of the four benchmark forms as a csmat-v1 file.
    Gen(GenArgs),
    /// Print the structural certificate of a form as JSON.
    Check(CheckArgs),
    /// Maximize f over the unit sphere and print the result as JSON.
    SolveInner(SolveArgs),
    /// Project onto the S-separable set and print the result as JSON.
    Project(ProjectArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Benchmark id: 1 random state, 2 signed mixture, 3 linear kernel,
    /// 4 sine kernel.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=4))]
    example: u32,
    /// Local dimension N.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// csmat-v1 input file.
    input: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// csmat-v1 input file.
    input: PathBuf,
    #[arg(long = "tol-inner", default_value_t = 1e-12)]
    tol_inner: f64,
    #[arg(long = "max-inner", default_value_t = 500)]
    max_inner: usize,
    #[arg(long, default_value_t = 1)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Componentwise-uniform initial vectors instead of sphere-uniform.
    #[arg(long = "component-init")]
    component_init: bool,
    /// Write the per-iteration trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Also write the result JSON here.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    /// csmat-v1 input file.
    input: PathBuf,
    #[arg(long = "tol-outer", default_value_t = 1e-12)]
    tol_outer: f64,
    #[arg(long = "tol-inner", default_value_t = 1e-12)]
    tol_inner: f64,
    /// Relative stopping-gap factor (scaled by max(1, |rho|_F)).
    #[arg(long = "gap-tol", default_value_t = 1e-10)]
    gap_tol: f64,
    #[arg(long = "max-outer", default_value_t = 1000)]
    max_outer: usize,
    #[arg(long = "max-inner", default_value_t = 500)]
    max_inner: usize,
    #[arg(long, default_value_t = 5)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Cone)]
    mode: ModeArg,
    /// Plain conditional gradient: no weight re-fit, no atom descent.
    #[arg(long = "no-refine")]
    no_refine: bool,
    /// Componentwise-uniform initial vectors instead of sphere-uniform.
    #[arg(long = "component-init")]
    component_init: bool,
    /// Write the outer trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the final atom list as a csmat-v1 file here.
    #[arg(long = "atoms-out")]
    atoms_out: Option<PathBuf>,
    /// Also write the result JSON here.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Cone,
    Convex,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let outcome = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Check(args) => cmd_check(args),
        Command::SolveInner(args) => cmd_solve_inner(args),
        Command::Project(args) => cmd_project(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &CsError) -> u8 {
    match err {
        CsError::Io(_) | CsError::MalformedFile(_) | CsError::UnsupportedVersion(_) => 3,
        CsError::UnknownExampleId(_) => 2,
        _ => 4,
    }
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode, CsError> {
    let form = csep_core::gen_example(args.example, args.n as usize, args.seed)?;
    let text = csio::form_to_json(&form) + "\n";
    match args.output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn load_form(path: &Path) -> Result<QuarticForm, CsError> {
    let outcome = csio::read(path)?;
    if outcome.rescaled_vectors > 0 {
        eprintln!(
            "warning: {} stored vector(s) were not unit; scale absorbed into weights",
            outcome.rescaled_vectors
        );
    }
    outcome.doc.into_form()
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode, CsError> {
    let form = load_form(&args.input)?;
    let certificate = structural_certificate(&form);
    println!("{}", serde_json::to_string_pretty(&certificate).expect("serializable"));
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct InnerConfigEcho {
    tol_inner: f64,
    max_inner: usize,
    starts: usize,
    seed: u64,
    init: InitKind,
}

#[derive(Serialize)]
struct InnerReport<'a> {
    converged: bool,
    iterations: usize,
    f_star: f64,
    lambda_star: f64,
    x_star: Vec<f64>,
    config: &'a InnerConfigEcho,
}

fn cmd_solve_inner(args: SolveArgs) -> Result<ExitCode, CsError> {
    let form = load_form(&args.input)?;
    let opts = InnerOptions {
        tol: args.tol_inner,
        max_iterations: args.max_inner,
        init: if args.component_init {
            InitKind::ComponentUniform
        } else {
            InitKind::SphereUniform
        },
    };
    let result = multi_start(&form, args.starts, args.seed, &opts);
    if let Some(path) = &args.trace {
        write_inner_trace(path, &result)?;
    }
    let config = InnerConfigEcho {
        tol_inner: args.tol_inner,
        max_inner: args.max_inner,
        starts: args.starts,
        seed: args.seed,
        init: opts.init,
    };
    let report = InnerReport {
        converged: result.converged,
        iterations: result.iterations,
        f_star: result.f_star,
        lambda_star: result.lambda_star,
        x_star: result.x_star.as_slice().to_vec(),
        config: &config,
    };
    let text = serde_json::to_string_pretty(&report).expect("serializable");
    println!("{text}");
    if let Some(path) = &args.output {
        fs::write(path, text + "\n")?;
    }
    Ok(if result.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn write_inner_trace(path: &Path, result: &InnerResult) -> Result<(), CsError> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "iter,f,kkt_residual,step_source")?;
    for row in &result.trace {
        let source = match row.step_source {
            csep_core::inner::StepSource::Init => "INIT",
            csep_core::inner::StepSource::Sqp => "SQP",
            csep_core::inner::StepSource::Pm => "PM",
            csep_core::inner::StepSource::Mix => "MIX",
        };
        writeln!(
            out,
            "{},{:.16e},{:.16e},{}",
            row.iter, row.f, row.kkt_residual, source
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ProjectReport<'a> {
    verdict: Verdict,
    distance: f64,
    gap: f64,
    iterations: usize,
    stop_reason: StopReason,
    atom_count: usize,
    atoms: serde_json::Value,
    config: &'a ProjectOptions,
}

fn cmd_project(args: ProjectArgs) -> Result<ExitCode, CsError> {
    let form = load_form(&args.input)?;
    let opts = ProjectOptions {
        outer_tol: args.tol_outer,
        max_outer: args.max_outer,
        inner: InnerOptions {
            tol: args.tol_inner,
            max_iterations: args.max_inner,
            init: if args.component_init {
                InitKind::ComponentUniform
            } else {
                InitKind::SphereUniform
            },
        },
        starts: args.starts,
        seed: args.seed,
        mode: match args.mode {
            ModeArg::Cone => FeasibleSet::Cone,
            ModeArg::Convex => FeasibleSet::Convex,
        },
        refine: !args.no_refine,
        gap_rtol: args.gap_tol,
    };
    let result = csep_core::project(&form, &opts)?;
    if let Some(path) = &args.trace {
        write_outer_trace(path, &result)?;
    }
    if let Some(path) = &args.atoms_out {
        csio::write_atoms(path, &result.approximation)?;
    }
    let atoms_json: serde_json::Value =
        serde_json::from_str(&csio::atoms_to_json(&result.approximation))
            .expect("atom payload is valid JSON");
    let report = ProjectReport {
        verdict: result.verdict,
        distance: result.distance,
        gap: result.gap,
        iterations: result.iterations,
        stop_reason: result.stop_reason,
        atom_count: result.approximation.len(),
        atoms: atoms_json,
        config: &opts,
    };
    let text = serde_json::to_string_pretty(&report).expect("serializable");
    println!("{text}");
    if let Some(path) = &args.output {
        fs::write(path, text + "\n")?;
    }
    let inconclusive_at_cap = result.verdict == Verdict::Inconclusive
        && matches!(
            result.stop_reason,
            StopReason::MaxOuterReached | StopReason::InnerSolverFailed
        );
    Ok(if inconclusive_at_cap {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn write_outer_trace(path: &Path, result: &OuterResult) -> Result<(), CsError> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "iter,distance,gap,alpha,atom_count,inner_iterations")?;
    for row in &result.trace {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{},{}",
            row.iter, row.distance, row.gap, row.alpha, row.atom_count, row.inner_iterations
        )?;
    }
    Ok(())
}
