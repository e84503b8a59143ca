use clap::{Parser, Subcommand};
use hslab::config::{parse_config, RunConfig};
use hslab::grid::Grid;
use hslab::initial_data::{audit_well_prepared, build_initial};
use hslab::oracles::{run_oracles, write_oracle_csv, OracleCase};
use hslab::output::create_dir;
use hslab::run::{run_simulation, RunSummary};
use hslab::sweep::{
    decay_report, run_gamma_sweep, segregation_study, write_sweep_csv, write_verdicts, SweepOptions,
    DEFAULT_IMPLICIT_FROM,
};
use hslab::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hslab", version, about = "Two-species tissue growth laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its outputs.
    Run { config: PathBuf },
    /// Matched runs over a list of gamma (and epsilon) values.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20,40,80")]
        gammas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0")]
        epsilons: Vec<f64>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        /// Rows with gamma at or above this value use the semi-implicit
        /// scheme; pass `none` to keep the configured scheme everywhere.
        #[arg(long, default_value_t = DEFAULT_IMPLICIT_FROM.to_string())]
        implicit_from: String,
        /// Parent directory for the sweep (defaults to outputs.directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that species without cross reactions stay segregated.
    Segregation { config: PathBuf },
    /// Barenblatt convergence and uniform-state ODE checks.
    Oracle {
        #[arg(long, default_value = "all")]
        case: String,
        #[arg(long, default_value = "out/oracle")]
        out: PathBuf,
    },
    /// Parse a configuration and report feasibility and the initial-data audit.
    Validate { config: PathBuf },
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

fn print_summary(s: &RunSummary, dir: &Path) {
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "t = {} after {} steps ({:.2} s); max p = {:.6}, mass balance residual {:.3e}",
        s.final_state.t, s.steps, s.runtime_seconds, s.peaks.max_p, s.mass_balance_residual
    );
    println!("outputs in {}", dir.display());
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let s = run_simulation(&cfg)?;
            print_summary(&s, &cfg.output_dir);
        }
        Command::Sweep { config, gammas, epsilons, workers, implicit_from, out } => {
            let cfg = load(&config)?;
            let implicit_from = match implicit_from.as_str() {
                "none" => None,
                v => Some(v.parse::<f64>().map_err(|e| {
                    Error::Config(vec![hslab::error::ConfigIssue::general(format!("--implicit-from: {e}"))])
                })?),
            };
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            create_dir(&dir)?;
            let opts = SweepOptions { gammas, epsilons, workers, implicit_from, out_dir: Some(dir.clone()) };
            let rows = run_gamma_sweep(&cfg, &opts)?;
            write_sweep_csv(&rows, &dir.join("sweep.csv"))?;
            for r in rows.iter().filter(|r| !r.is_ok()) {
                eprintln!("row gamma={} eps={}: {:?}", r.gamma, r.epsilon, r.status);
            }
            let verdicts = decay_report(&rows)?;
            write_verdicts(&verdicts, &dir.join("verdicts.txt"))?;
            for v in &verdicts {
                println!("{v}");
            }
        }
        Command::Segregation { config } => {
            let cfg = load(&config)?;
            let v = segregation_study(&cfg, true)?;
            for line in v.verdicts() {
                println!("{line}");
            }
        }
        Command::Oracle { case, out } => {
            let case: OracleCase = case.parse()?;
            create_dir(&out)?;
            let rows = run_oracles(case)?;
            write_oracle_csv(&rows, &out.join("oracle.csv"))?;
            for r in &rows {
                let order = r.observed_order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".into());
                let verdict = if r.pass { "PASS" } else { "FAIL" };
                println!("{} N={} error={:.3e} order={order} {verdict}", r.case, r.grid_n, r.error);
            }
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            println!("{}", cfg.feasibility());
            let grid = Grid::new(cfg.half_width, cfg.cells)?;
            let (n1, n2) = build_initial(&cfg.profiles, &grid)?;
            let audit = audit_well_prepared(&n1, &n2, cfg.gamma, cfg.epsilon, &cfg.model, &grid, cfg.vac_tol)?;
            println!("{audit}");
            println!("configuration ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
