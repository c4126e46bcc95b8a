use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crnctl::run::{self, SweepAxis};
use crnctl::scenario::Scenario;

#[derive(Parser)]
#[command(
    name = "crnctl",
    about = "Integral feedback control of reaction networks: analysis, simulation, DSD compilation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (JSON).
    scenario: PathBuf,
    /// Override scenario values, e.g. --set controller.alpha=0.45
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
    /// Directory for artifacts (default: scenario's output.directory or `out`).
    #[arg(long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Structural and stability analysis: equilibria, the alpha threshold,
    /// tuning, disturbance margins, stationary power.
    Analyze(CommonArgs),
    /// Integrate the closed loop under the scenario's schedule; writes the
    /// trajectory CSV and a run report (plus an SSA trace when
    /// simulation.volume_scale is set).
    Simulate(CommonArgs),
    /// Compile the closed loop into a DNA strand displacement network,
    /// simulate both, and compare.
    CompileDsd(CommonArgs),
    /// Run the scenario once per parameter tuple and tabulate tracking
    /// error, settling time, and stationary power.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Sweep axis, e.g. --param controller.k=1,10,100 (repeatable;
        /// tuples run in cartesian order, first axis outermost).
        #[arg(long = "param", value_name = "PATH=V1,V2,...", required = true)]
        params: Vec<String>,
        /// Worker threads for independent runs.
        #[arg(long, default_value_t = 4)]
        jobs: usize,
    },
}

fn load(common: &CommonArgs) -> Result<Scenario> {
    let mut scenario = Scenario::load(&common.scenario)?;
    for assignment in &common.set {
        scenario.apply_override(assignment)?;
    }
    scenario.validate()?;
    Ok(scenario)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(common) => {
            let scenario = load(&common)?;
            let report = run::analyze(&scenario, common.output_dir.as_deref())?;
            print!("{}", report.render());
        }
        Command::Simulate(common) => {
            let scenario = load(&common)?;
            let report = run::simulate(&scenario, common.output_dir.as_deref())?;
            print!("{}", report.render());
        }
        Command::CompileDsd(common) => {
            let scenario = load(&common)?;
            let report = run::compile_dsd(&scenario, common.output_dir.as_deref())?;
            print!("{}", report.render());
        }
        Command::Sweep {
            common,
            params,
            jobs,
        } => {
            let scenario = load(&common)?;
            let axes = params
                .iter()
                .map(|p| SweepAxis::parse(p))
                .collect::<Result<Vec<_>>>()?;
            let csv = run::sweep(&scenario, &axes, jobs, common.output_dir.as_deref())?;
            print!("{csv}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
