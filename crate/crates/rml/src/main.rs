use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rml_core::grid::read_grid_function;
use rml_core::harness::{
    parse_grid_list, reduce_command, run_scenario_file, ReduceMode, RunArgs, EXIT_PARSE,
    EXIT_SOLVER,
};
use rml_core::literal::parse_mass;
use rml_core::mollifier::{KernelShape, MollifierFamily};
use rml_core::oracle::{radial_mollified, radial_singular, ShootingConfig};
use rml_core::{Nonlinearity, NonlinearityKind};

#[derive(Parser)]
#[command(name = "rml", version, about = "Measure-data Chern-Simons workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file over its grid ladder and write report, summary and plots.
    Run {
        scenario: PathBuf,
        /// Output root; artifacts go to <out>/<scenario name>/.
        #[arg(long, env = "RML_OUT", default_value = "rml-out")]
        out: PathBuf,
        /// Grid spacings overriding the scenario, e.g. `1/128,1/256`.
        #[arg(long)]
        grids: Option<String>,
        /// (grid, schedule) pairs solved concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print exact reduced measures of measure literals.
    Reduce {
        #[arg(long)]
        mu: String,
        #[arg(long)]
        nu: Option<String>,
        /// scalar, system-sum or system-atom.
        #[arg(long, default_value = "scalar")]
        mode: String,
        /// Nonlinearity for the scalar mode.
        #[arg(long, default_value = "chern-simons")]
        nl: String,
    },
    /// Radial shooting oracle; prints `r,u,flux` rows.
    Oracle {
        /// Atom mass, e.g. `pi` or `1.9pi`.
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        #[arg(long, default_value = "chern-simons")]
        nl: String,
        #[arg(long, default_value_t = 0.5)]
        radius: f64,
        /// Spread the mass with a bump of this width instead of a point mass.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 20_000)]
        steps: usize,
        #[arg(long, default_value_t = 40)]
        rows: usize,
    },
    /// Convert a binary grid file to `x,y,value` CSV.
    DumpGrid {
        file: PathBuf,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(code: i32, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code as u8)
}

fn nonlinearity(s: &str) -> Result<Nonlinearity, ExitCode> {
    NonlinearityKind::parse(s)
        .map(Nonlinearity::new)
        .map_err(|e| fail(EXIT_PARSE, e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            grids,
            jobs,
        } => {
            let grids = match grids.as_deref().map(parse_grid_list).transpose() {
                Ok(g) => g,
                Err(e) => return fail(EXIT_PARSE, e),
            };
            let args = RunArgs {
                out_root: out,
                grids,
                jobs: jobs.max(1),
            };
            let code = run_scenario_file(&scenario, &args, &mut io::stdout());
            ExitCode::from(code as u8)
        }
        Command::Reduce { mu, nu, mode, nl } => {
            let mode: ReduceMode = match mode.parse() {
                Ok(m) => m,
                Err(e) => return fail(EXIT_PARSE, e),
            };
            let nl = match nonlinearity(&nl) {
                Ok(nl) => nl,
                Err(c) => return c,
            };
            match reduce_command(&mu, nu.as_deref(), mode, nl) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_PARSE, e),
            }
        }
        Command::Oracle {
            alpha,
            nl,
            radius,
            epsilon,
            steps,
            rows,
        } => {
            let alpha = match parse_mass(&alpha) {
                Ok(a) => a,
                Err(e) => return fail(EXIT_PARSE, e),
            };
            let nl = match nonlinearity(&nl) {
                Ok(nl) => nl,
                Err(c) => return c,
            };
            let cfg = ShootingConfig {
                steps,
                ..ShootingConfig::default()
            };
            let result = match epsilon {
                Some(eps) => radial_mollified(
                    alpha,
                    nl,
                    radius,
                    &MollifierFamily {
                        shape: KernelShape::CompactBump,
                        epsilon: eps,
                    },
                    &cfg,
                ),
                None => radial_singular(alpha, nl, radius, &cfg),
            };
            match result {
                Ok(p) => {
                    let out = io::stdout();
                    let mut w = BufWriter::new(out.lock());
                    let _ = writeln!(
                        w,
                        "# alpha {} shooting parameter {} bisections {}",
                        alpha, p.shooting_parameter, p.bisections
                    );
                    let _ = writeln!(w, "r,u,flux");
                    for (r, u, f) in p.table(rows) {
                        let _ = writeln!(w, "{r},{u},{f}");
                    }
                    let _ = w.flush();
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_SOLVER, e),
            }
        }
        Command::DumpGrid { file, out } => {
            let g = match std::fs::File::open(&file)
                .map_err(rml_core::Error::from)
                .and_then(|f| read_grid_function(BufReader::new(f)))
            {
                Ok(g) => g,
                Err(e) => return fail(EXIT_PARSE, e),
            };
            let res = match out {
                Some(path) => {
                    std::fs::File::create(path).and_then(|f| g.write_csv(BufWriter::new(f)))
                }
                None => g.write_csv(BufWriter::new(io::stdout().lock())),
            };
            match res {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(1, e),
            }
        }
    }
}
