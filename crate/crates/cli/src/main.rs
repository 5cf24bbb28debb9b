//! `fermigas`: batch front end for the fermigas-core library.
//!
//! Exit codes: 0 ok, 1 invariant failure, 2 config error, 3 numeric
//! non-convergence, 4 resource guard.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fermigas_core::Error;

use config::{Format, RunConfig};

#[derive(Parser)]
#[command(
    name = "fermigas",
    version,
    about = "Momentum distribution of the mean-field Fermi gas: sweeps, tables, verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides the same-named config
/// file field.
#[derive(Args, Debug, Default)]
struct Common {
    /// JSON config file with RunConfig fields; flags override file values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    shell_cap: Option<i64>,
    /// Interaction: coulomb:g=<g>, yukawa:g=<g>,p=<p>, or zero
    #[arg(long)]
    potential: Option<String>,
    #[arg(long)]
    coupling_scale: Option<f64>,
    /// Momentum "x,y,z"; repeatable
    #[arg(long = "q", value_parser = parse_q_arg)]
    q: Option<Vec<[i64; 3]>>,
    /// Range selector: all q outside the ball with |q|^2 <= this
    #[arg(long)]
    q_norm2_max: Option<i64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    max_subdivisions: Option<usize>,
    /// |l|^2 cutoff for the inside-ball shift sum
    #[arg(long)]
    inside_shift_cap: Option<i64>,
    /// Output file (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn parse_q_arg(s: &str) -> Result<[i64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z — got '{s}'"));
    }
    let mut q = [0i64; 3];
    for (slot, p) in q.iter_mut().zip(&parts) {
        *slot = p
            .trim()
            .parse()
            .map_err(|_| format!("bad integer '{p}' in '{s}'"))?;
    }
    Ok(q)
}

#[derive(Args, Debug, Default)]
struct OracleFlags {
    /// |l|^2 cutoff of the shift family entering the generator
    #[arg(long)]
    oracle_cutoff: Option<i64>,
    /// Even cap on the particle number of the truncated basis
    #[arg(long)]
    particle_cap: Option<u32>,
    /// Taylor-series stopping tolerance for the exponential action
    #[arg(long)]
    oracle_tol: Option<f64>,
    /// Interpolation grid in [0,1], comma separated
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Refuse basis construction above this dimension
    #[arg(long)]
    basis_dim_limit: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the Fermi ball geometry summary
    Ball {
        #[command(flatten)]
        common: Common,
    },
    /// Momentum-distribution table over a q selector
    Rpa {
        #[command(flatten)]
        common: Common,
        /// matrix | integral | series:<n> | all
        #[arg(long)]
        route: Option<String>,
    },
    /// Exchange terms over a q selector
    Exchange {
        #[command(flatten)]
        common: Common,
    },
    /// Continuum-limit value at real momentum radius
    Continuum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kf: f64,
        #[arg(long)]
        q_radius: f64,
        /// Direction "x,y,z" (normalized internally)
        #[arg(long, default_value = "1,0,0", value_parser = parse_dir_arg)]
        direction: [f64; 3],
    },
    /// Exact-solver run plus the truncated-analytics comparison
    Oracle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        oracle: OracleFlags,
    },
    /// Size or coupling sweeps with fitted slopes
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Shell caps for a size sweep, comma separated
        #[arg(long, value_delimiter = ',')]
        shell_caps: Option<Vec<i64>>,
        /// Coupling scales for a coupling sweep, comma separated
        #[arg(long, value_delimiter = ',')]
        couplings: Option<Vec<f64>>,
    },
    /// Run the cross-module invariant suite
    Verify {
        #[command(flatten)]
        common: Common,
        /// Replace the interaction by a deliberately uneven one
        #[arg(long)]
        inject_evenness_violation: bool,
        /// Tolerance for the spectral-vs-integral agreement check
        #[arg(long, default_value_t = 1e-8)]
        route_tol: f64,
    },
}

fn parse_dir_arg(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z — got '{s}'"));
    }
    let mut d = [0f64; 3];
    for (slot, p) in d.iter_mut().zip(&parts) {
        *slot = p
            .trim()
            .parse()
            .map_err(|_| format!("bad number '{p}' in '{s}'"))?;
    }
    Ok(d)
}

impl Common {
    /// Merge flags over the config file (flags win), validating nothing yet.
    fn resolve(self, route: Option<String>, oracle: Option<OracleFlags>) -> Result<RunConfig, Error> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let oracle = oracle.unwrap_or_default();
        let flags = RunConfig {
            shell_cap: self.shell_cap,
            potential: self.potential,
            coupling_scale: self.coupling_scale,
            q: self.q,
            q_norm2_max: self.q_norm2_max,
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_subdivisions: self.max_subdivisions,
            oracle_cutoff: oracle.oracle_cutoff,
            particle_cap: oracle.particle_cap,
            oracle_tol: oracle.oracle_tol,
            lambda_grid: oracle.lambda_grid,
            basis_dim_limit: oracle.basis_dim_limit,
            inside_shift_cap: self.inside_shift_cap,
            route,
            output: self.output,
            format: self.format,
        };
        Ok(flags.merged_over(base))
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::CacheFormat(_) | Error::Io(_) => 2,
        Error::QuadratureNonConvergence { .. } | Error::ExpNonConvergence { .. } => 3,
        Error::ResourceGuard(_) => 4,
        Error::NumericDomain(_) | Error::RangeViolation { .. } => 1,
    }
}

fn run() -> Result<u8, Error> {
    // FERMIGAS_THREADS caps parallelism; errors in the value are config errors
    if let Ok(v) = std::env::var("FERMIGAS_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::invalid(format!("FERMIGAS_THREADS: bad value '{v}'")))?;
        if n == 0 {
            return Err(Error::invalid("FERMIGAS_THREADS must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Ball { common } => {
            commands::cmd_ball(&common.resolve(None, None)?)?;
            Ok(0)
        }
        Command::Rpa { common, route } => {
            commands::cmd_rpa(&common.resolve(route, None)?)?;
            Ok(0)
        }
        Command::Exchange { common } => {
            commands::cmd_exchange(&common.resolve(None, None)?)?;
            Ok(0)
        }
        Command::Continuum {
            common,
            kf,
            q_radius,
            direction,
        } => {
            commands::cmd_continuum(&common.resolve(None, None)?, kf, q_radius, direction)?;
            Ok(0)
        }
        Command::Oracle { common, oracle } => {
            commands::cmd_oracle(&common.resolve(None, Some(oracle))?)?;
            Ok(0)
        }
        Command::Sweep {
            common,
            shell_caps,
            couplings,
        } => {
            commands::cmd_sweep(&common.resolve(None, None)?, shell_caps, couplings)?;
            Ok(0)
        }
        Command::Verify {
            common,
            inject_evenness_violation,
            route_tol,
        } => {
            let ok = commands::cmd_verify(
                &common.resolve(None, None)?,
                &commands::VerifyOptions {
                    inject_evenness_violation,
                    route_tol,
                },
            )?;
            Ok(if ok { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
