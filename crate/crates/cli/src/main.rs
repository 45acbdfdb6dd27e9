use std::path::PathBuf;
use std::process::ExitCode;

use arznet_cli::{
    capacity_drop_scenario, cmd_capacity_drop, cmd_pareto_dump, cmd_simulate, cmd_solve, CliError, CliResult,
    DropMode, ScenarioFile, SimOverrides, CAPACITY_DROP_SWEEP,
};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "arznet", version, about = "ARZ traffic junction solvers and network simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the single junction of a scenario and print fluxes and boundary states.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run the Godunov simulation and write flux series, profiles and the mass ledger.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        cfl: Option<f64>,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
    },
    /// Sweep the desired inflow of the second merge road and tabulate the outflow.
    CapacityDrop {
        /// Merge scenario; defaults to the built-in capacity-drop setup.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated desired inflows in veh/h.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
        /// Use the junction solver on the initial data instead of simulating.
        #[arg(long)]
        direct: bool,
        #[arg(long)]
        cfl: Option<f64>,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
    },
    /// Sample the admissible flux set of a merge on an (n+1) x (n+1) grid.
    ParetoDump {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 512)]
        grid: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn threads() -> CliResult<Option<usize>> {
    match std::env::var("ARZNET_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|e| CliError::invalid("ARZNET_THREADS", e)),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Solve { scenario } => cmd_solve(&ScenarioFile::load(&scenario)?),
        Command::Simulate {
            scenario,
            out,
            cfl,
            t_end,
        } => cmd_simulate(&ScenarioFile::load(&scenario)?, &out, SimOverrides { cfl, t_end }),
        Command::CapacityDrop {
            scenario,
            out,
            sweep,
            direct,
            cfl,
            t_end,
        } => {
            let base = match scenario {
                Some(p) => ScenarioFile::load(&p)?,
                None => capacity_drop_scenario(CAPACITY_DROP_SWEEP[0]),
            };
            let sweep = sweep.unwrap_or_else(|| CAPACITY_DROP_SWEEP.to_vec());
            let mode = if direct { DropMode::Direct } else { DropMode::Simulated };
            cmd_capacity_drop(&base, &sweep, mode, &out, SimOverrides { cfl, t_end })
        }
        Command::ParetoDump { scenario, grid, out } => {
            cmd_pareto_dump(&ScenarioFile::load(&scenario)?, grid, &out, threads()?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
