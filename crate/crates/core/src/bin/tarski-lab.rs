use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tarski_adversary::lab::{
    self, BoundProblem, BoundSize, Format, LabError, Suite, VerifyOptions,
};
use tarski_adversary::lattice::Algorithm;

#[derive(Parser)]
#[command(
    name = "tarski-lab",
    version,
    about = "Spectral adversary bounds and Tarski instance experiments"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Output {
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write herringbone instances and their provenance sidecars.
    Gen {
        #[arg(long)]
        n: usize,
        /// Chunk entry points, e.g. 1,2,1,3.
        #[arg(long = "C", value_delimiter = ',')]
        c: Option<Vec<usize>>,
        #[arg(long)]
        i: Option<usize>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run one verification suite.
    Verify {
        #[arg(long)]
        suite: Suite,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        a: Option<usize>,
        #[arg(long)]
        b: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Interior points for n=3 covering sweeps; 0 means all.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Tabulate spectral adversary bounds.
    Bound {
        problem: BoundProblem,
        /// Sizes for os/hsos.
        #[arg(long, value_delimiter = ',')]
        m: Vec<usize>,
        /// Outer sizes for nos.
        #[arg(long, value_delimiter = ',')]
        a: Vec<usize>,
        /// Inner sizes for nos.
        #[arg(long, value_delimiter = ',')]
        b: Vec<usize>,
        /// Parameters for tarski.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, default_value = "1/3", value_parser = lab::parse_eps)]
        eps: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Directory receiving one matrix JSON per row.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Find a fixed point of an instance file.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value = "nested", value_parser = parse_algo)]
        algo: Algorithm,
        #[command(flatten)]
        output: Output,
    },
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    match s {
        "nested" => Ok(Algorithm::Nested),
        "brute" => Ok(Algorithm::Brute),
        _ => Err(format!("unknown algorithm `{s}` (nested, brute)")),
    }
}

fn sizes(
    problem: BoundProblem,
    m: Vec<usize>,
    a: Vec<usize>,
    b: Vec<usize>,
    n: Vec<usize>,
) -> Vec<BoundSize> {
    let given = match problem {
        BoundProblem::Os | BoundProblem::Hsos => m.into_iter().map(BoundSize::M).collect(),
        BoundProblem::Nos if !a.is_empty() && !b.is_empty() => a
            .iter()
            .flat_map(|&a| b.iter().map(move |&b| BoundSize::Ab(a, b)))
            .collect(),
        BoundProblem::Nos => Vec::new(),
        BoundProblem::Tarski => n.into_iter().map(BoundSize::N).collect(),
    };
    if given.is_empty() {
        lab::default_sizes(problem)
    } else {
        given
    }
}

fn run(cli: Cli) -> Result<u8, LabError> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| LabError::Usage(e.to_string()))?;
    }
    match cli.cmd {
        Cmd::Gen { n, c, i, out } => {
            let files = lab::cmd_gen(n, c.as_deref(), i, &out)?;
            eprintln!("wrote {} instance(s) to {}", files.len(), out.display());
            Ok(lab::EXIT_OK)
        }
        Cmd::Verify {
            suite,
            n,
            m,
            a,
            b,
            seed,
            sample,
            tol,
            output,
        } => {
            let opts = VerifyOptions {
                n,
                m,
                a,
                b,
                seed,
                sample,
                tol,
            };
            let report = lab::cmd_verify(suite, &opts)?;
            lab::emit(output.out.as_deref(), &report.render(output.format)?)?;
            eprintln!(
                "{}: {} checks, {} failures ({:.2} s)",
                report.suite,
                report.checks_run,
                report.failures.len(),
                report.wall_time
            );
            Ok(report.exit_code())
        }
        Cmd::Bound {
            problem,
            m,
            a,
            b,
            n,
            eps,
            tol,
            dump_matrix,
            output,
        } => {
            let rows = lab::cmd_bound(
                problem,
                &sizes(problem, m, a, b, n),
                eps,
                tol,
                dump_matrix.as_deref(),
            )?;
            lab::emit(
                output.out.as_deref(),
                &lab::render_rows(&rows, output.format)?,
            )?;
            Ok(lab::EXIT_OK)
        }
        Cmd::Solve {
            instance,
            algo,
            output,
        } => {
            let r = lab::cmd_solve(&instance, algo)?;
            lab::emit(
                output.out.as_deref(),
                &lab::render_solve(&r, output.format)?,
            )?;
            Ok(lab::EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
