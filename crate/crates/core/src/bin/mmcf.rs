//! Command-line front end: scenario simulation, identity verification
//! suites, CMC foliation sweeps, and the PDE-vs-ODE oracle comparison.
//!
//! Exit codes: 0 pass, 1 monitor/assertion failure, 2 usage or config
//! error, 3 numerical fault (overflow or singular metric).

use clap::{Parser, Subcommand, ValueEnum};
use mmcf_lab::config::Config;
use mmcf_lab::error::Error;
use mmcf_lab::harness::{
    oracle_compare, run_foliate, run_scenario, verify_christoffel, verify_codazzi, verify_gamma,
    verify_geometry, RunOutcome, Scenario,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mmcf",
    version,
    about = "Mean curvature flow laboratory over almost-Fuchsian warped metrics"
)]
struct Cli {
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Seed for the suites' random draws (splitmix64 stream).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for the nodewise maps (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Suppress progress output; artifacts are still written.
    #[arg(long, global = true, default_value_t = false)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Suite {
    Geometry,
    Gamma,
    Christoffel,
    Codazzi,
}

#[derive(Subcommand)]
enum Command {
    /// Run a flow scenario from a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one of the identity verification suites.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Field magnitude for the sampled tuples.
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        /// Relative tolerance for the gamma suite.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Sweep c into a CMC foliation.
    Foliate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        c_min: Option<f64>,
        #[arg(long)]
        c_max: Option<f64>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Compare the PDE to the scalar comparison ODE.
    Oracle {
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long)]
        w0: f64,
        #[arg(long, default_value_t = 5.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 64)]
        nx: usize,
    },
}

fn dispatch(cli: &Cli) -> mmcf_lab::Result<RunOutcome> {
    match &cli.command {
        Command::Simulate { config } => run_scenario(config, &cli.out, cli.seed, cli.quiet),
        Command::Verify {
            suite,
            samples,
            eps,
            tol,
        } => {
            let seed = cli.seed.unwrap_or(0);
            match suite {
                Suite::Gamma => verify_gamma(*samples, *eps, seed, *tol, &cli.out, cli.quiet),
                Suite::Geometry => verify_geometry(*samples, *eps, seed, cli.quiet),
                Suite::Christoffel => verify_christoffel(cli.quiet),
                Suite::Codazzi => verify_codazzi(cli.quiet),
            }
        }
        Command::Foliate {
            config,
            c_min,
            c_max,
            count,
        } => {
            let text = std::fs::read_to_string(config)?;
            let cfg = Config::parse(&text)?;
            let stem = config
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "foliate".to_string());
            let sc = Scenario::from_config(&cfg, &stem)?;
            let lo = c_min.unwrap_or(sc.c_min);
            let hi = c_max.unwrap_or(sc.c_max);
            let n = count.unwrap_or(sc.c_count);
            run_foliate(&sc, lo, hi, n, &cli.out, cli.quiet)
        }
        Command::Oracle {
            c,
            lambda,
            w0,
            t_end,
            dt,
            nx,
        } => {
            let (_, outcome) =
                oracle_compare(*c, *lambda, *w0, *t_end, *dt, *nx, &cli.out, cli.quiet)?;
            Ok(outcome)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("mmcf: cannot configure {} threads: {e}", cli.threads);
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(outcome) => {
            for f in &outcome.failures {
                eprintln!("mmcf: FAIL {f}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(err) => {
            eprintln!("mmcf: error: {err}");
            let code = match &err {
                Error::Io(_) => 2,
                other => other.exit_code(),
            };
            ExitCode::from(code as u8)
        }
    }
}
