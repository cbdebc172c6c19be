use std::path::PathBuf;
use std::process::ExitCode;

use bayesflow_cli::commands::{self, for_each_case};
use bayesflow_cli::manifest::{resolve, Manifest, NoiseKind, Overrides, RunCase};
use bayesflow_cli::CliError;
use clap::{Args, Parser, Subcommand};

/// Bayesian optical flow with uncertainty quantification.
#[derive(Parser)]
#[command(name = "bayesflow", version)]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark pair: F.pgm, G.pgm, Gbar.pgm and truth_flow.csv.
    Synth(CaseArgs),
    /// Sample the posterior flow and write means, traces, ellipses and metrics.
    Run(CaseArgs),
    /// Summarize the run outputs in a directory.
    Report {
        /// A run directory or a directory of run directories.
        dir: PathBuf,
    },
}

/// Case settings; flags override every case of the manifest.
#[derive(Args)]
struct CaseArgs {
    /// JSON manifest with one case or `{"cases": [...]}`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// "synthetic" or a PGM first image.
    #[arg(long)]
    input: Option<String>,
    /// Observed PGM second image (run only; the flow is then unknown).
    #[arg(long)]
    second_image: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Confidence level of the ellipses.
    #[arg(long)]
    q: Option<f64>,
    /// Write every n-th pixel in each direction to ellipses.csv.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long, value_enum)]
    noise: Option<NoiseKind>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Benchmark flow field, 1 to 5.
    #[arg(long)]
    flow_id: Option<u8>,
    /// Grid size, `N` or `NXxNY`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<[usize; 2]>,
    /// CG iteration cap per solve.
    #[arg(long)]
    cg_max_iter: Option<usize>,
}

fn parse_grid(s: &str) -> Result<[usize; 2], String> {
    let side = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    match s.split_once(['x', 'X']) {
        Some((nx, ny)) => Ok([side(nx)?, side(ny)?]),
        None => side(s).map(|n| [n, n]),
    }
}

impl CaseArgs {
    fn cases(self) -> Result<Vec<RunCase>, CliError> {
        let manifest = self.manifest.as_deref().map(Manifest::load).transpose()?;
        let overrides = Overrides {
            input: self.input,
            second_image: self.second_image,
            seed: self.seed,
            out: self.out,
            iterations: self.iterations,
            burn_in: self.burn_in,
            q: self.q,
            stride: self.stride,
            noise: self.noise,
            sigma: self.sigma,
            flow_id: self.flow_id,
            grid: self.grid,
            cg_max_iter: self.cg_max_iter,
        };
        resolve(manifest, &overrides)
    }
}

/// Prints every failure and returns the exit code of the first one.
fn finish<T>(results: Vec<Result<T, CliError>>, mut ok: impl FnMut(T)) -> ExitCode {
    let mut code = 0;
    for r in results {
        match r {
            Ok(v) => ok(v),
            Err(e) => {
                eprintln!("error: {e}");
                if code == 0 {
                    code = e.exit_code();
                }
            }
        }
    }
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let fail = |e: CliError| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code() as u8)
    };
    match cli.command {
        Command::Synth(args) => match args.cases() {
            Ok(cases) => finish(for_each_case(&cases, commands::synth), |dir| {
                println!("wrote {}", dir.display())
            }),
            Err(e) => fail(e),
        },
        Command::Run(args) => match args.cases() {
            Ok(cases) => finish(for_each_case(&cases, commands::run), |o| {
                let m = &o.metrics;
                let aee = m.aee.map_or_else(String::new, |a| format!(" aee={a:.4e}"));
                println!(
                    "{}:{aee} rmse_g={:.4e} alpha={:.4e} mean_area={:.4e} restarts={} -> {}",
                    m.case,
                    m.rmse_g,
                    m.alpha_mean,
                    m.mean_area,
                    m.restart_count,
                    o.out.display()
                )
            }),
            Err(e) => fail(e),
        },
        Command::Report { dir } => match commands::report(&dir) {
            Ok(report) => {
                print!("{}", report.text);
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
