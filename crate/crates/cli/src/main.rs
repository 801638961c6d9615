use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cstr_periodic::commands::{
    self, cmd_simulate, cmd_solve, cmd_strategies, cmd_sweep, cmd_table1, parse_list, parse_pin,
    RunConfig, SweepAxis,
};
use cstr_periodic::error::{CliError, Result};
use cstr_periodic::io::{
    self, integrals_doc, load_params, read_json, to_json_bytes, trajectory_points, write_output,
    ScheduleDoc, SolutionDoc,
};
use cstr_periodic::reference::REFERENCE_TAU;
use cstr_periodic_core::sim::DEFAULT_STEPS_PER_UNIT;
use cstr_periodic_core::{ControlBounds, NewtonConfig, Schedule, StrategyId, Vec2};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "cstr-periodic",
    version,
    about = "Periodic bang-bang control of a CSTR"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON file with dimensionless (`gamma`, `k1`, ...) or physical parameters.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Required mean of u1 over a period.
    #[arg(long, global = true, default_value_t = 1.0)]
    u1_bar: f64,
    /// RK4 steps per unit of dimensionless time.
    #[arg(long, global = true, default_value_t = DEFAULT_STEPS_PER_UNIT)]
    steps: usize,
    #[arg(long, global = true, default_value_t = 0.15)]
    v1_min: f64,
    #[arg(long, global = true, default_value_t = 1.85)]
    v1_max: f64,
    #[arg(long, global = true, default_value_t = 0.15)]
    v2_min: f64,
    #[arg(long, global = true, default_value_t = 1.85)]
    v2_max: f64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every reference row and compare with the printed values.
    Table1 {
        #[arg(long, default_value_t = REFERENCE_TAU)]
        tau: f64,
    },
    /// Find the periodic orbit of one strategy.
    Solve {
        #[arg(long)]
        strategy: String,
        /// Pin a fraction, `INDEX=VALUE` with a 1-based index. Repeatable.
        #[arg(long = "alpha")]
        alpha: Vec<String>,
        #[arg(long, default_value_t = REFERENCE_TAU)]
        tau: f64,
        /// Also write the iterated integrals of the schedule as JSON.
        #[arg(long)]
        dump_integrals: Option<PathBuf>,
    },
    /// Integrate one period of a schedule file from a given state.
    Simulate {
        #[arg(long)]
        schedule: PathBuf,
        /// Initial state as `x1,x2`.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
    },
    /// Solve a strategy over a grid of one fraction or of the period.
    Sweep {
        #[arg(long)]
        strategy: String,
        /// `alpha1`..`alpha4` or `tau`.
        #[arg(long)]
        over: String,
        /// Comma-separated grid; for fractions the default is the feasible twelfths.
        #[arg(long, allow_hyphen_values = true)]
        values: Option<String>,
        #[arg(long = "alpha")]
        alpha: Vec<String>,
        #[arg(long, default_value_t = REFERENCE_TAU)]
        tau: f64,
    },
    /// List the strategies that can meet the mean of u1.
    Strategies,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    let cfg = RunConfig {
        params: load_params(c.params.as_deref())?,
        bounds: ControlBounds::new(c.v1_min, c.v1_max, c.v2_min, c.v2_max)?,
        u1_bar: c.u1_bar,
        steps_per_unit: c.steps,
        newton: NewtonConfig::default(),
    };
    let out = c.out.as_deref();
    match cli.command {
        Command::Table1 { tau } => {
            let table = cmd_table1(&cfg, tau)?;
            for w in &table.warnings {
                eprintln!("warning: {w}");
            }
            emit(out, c.format, &table.rows, |buf| {
                commands::write_table_csv(buf, &table.rows)
            })
        }
        Command::Solve {
            strategy,
            alpha,
            tau,
            dump_integrals,
        } => {
            let id: StrategyId = strategy.parse()?;
            let pins = pins(&alpha)?;
            let sol = cmd_solve(&cfg, id, &pins, tau)?;
            if let Some(path) = dump_integrals {
                let v = commands::schedule_integrals(&sol.schedule)?;
                write_output(Some(&path), &to_json_bytes(&integrals_doc(&v)))?;
            }
            let mut docs = Vec::new();
            match &sol.expansion {
                Some(e) => {
                    eprintln!(
                        "expansion: x0 = ({:.6}, {:.6}), defect on flow {:.3e}",
                        e.x0[0], e.x0[1], e.defect
                    );
                    docs.push(SolutionDoc::from(e));
                }
                None => eprintln!(
                    "expansion: {}",
                    sol.expansion_error.as_deref().unwrap_or("no root")
                ),
            }
            let s = &sol.shooting;
            eprintln!(
                "shooting ({} start): x0 = ({:.6}, {:.6}), J = {:.6}, defect {:.3e}",
                sol.shooting_start, s.x0[0], s.x0[1], s.cost, s.defect
            );
            docs.push(SolutionDoc::from(s));
            write_output(out, &to_json_bytes(&docs))
        }
        Command::Simulate { schedule, x0 } => {
            let doc: ScheduleDoc = read_json(&schedule)?;
            let schedule = Schedule::try_from(&doc)?;
            let x = parse_list(&x0)?;
            let [x1, x2] = x[..] else {
                return Err(CliError::Input(format!(
                    "--x0 needs two numbers, got {x0:?}"
                )));
            };
            let sim = cmd_simulate(&cfg, &schedule, Vec2::new(x1, x2))?;
            eprintln!("J = {:.9}, defect = {:.3e}", sim.cost, sim.defect);
            #[derive(Serialize)]
            struct SimDoc {
                cost: f64,
                defect: f64,
                points: Vec<io::TrajectoryPoint>,
            }
            let doc = SimDoc {
                cost: sim.cost,
                defect: sim.defect,
                points: trajectory_points(&sim.trajectory),
            };
            emit(out, c.format, &doc, |buf| {
                io::write_trajectory_csv(buf, &sim.trajectory)
            })
        }
        Command::Sweep {
            strategy,
            over,
            values,
            alpha,
            tau,
        } => {
            let id: StrategyId = strategy.parse()?;
            let axis: SweepAxis = over.parse()?;
            let pins = pins(&alpha)?;
            let grid = match (values, axis) {
                (Some(v), _) => parse_list(&v)?,
                (None, SweepAxis::Alpha(i)) => commands::default_alpha_grid(&cfg, id, i)?,
                (None, SweepAxis::Tau) => {
                    return Err(CliError::Input(
                        "--values is required for a sweep over tau".into(),
                    ))
                }
            };
            let sweep = cmd_sweep(&cfg, id, &pins, axis, &grid, tau)?;
            match sweep.cost_strictly_increasing {
                Some(true) => eprintln!("cost strictly increases along {}", sweep.axis),
                Some(false) => eprintln!("cost is not strictly increasing along {}", sweep.axis),
                None => eprintln!("fewer than two converged points"),
            }
            emit(out, c.format, &sweep, |buf| {
                commands::write_sweep_csv(buf, &sweep.rows)
            })
        }
        Command::Strategies => {
            let list = cmd_strategies(&cfg)?;
            emit(out, c.format, &list, |buf| {
                commands::write_strategies_csv(buf, &list)
            })
        }
    }
}

fn pins(raw: &[String]) -> Result<Vec<(usize, f64)>> {
    raw.iter().map(|s| parse_pin(s)).collect()
}

fn emit<T: Serialize>(
    out: Option<&Path>,
    format: Format,
    value: &T,
    csv: impl FnOnce(&mut Vec<u8>) -> Result<()>,
) -> Result<()> {
    let bytes = match format {
        Format::Json => to_json_bytes(value),
        Format::Csv => {
            let mut buf = Vec::new();
            csv(&mut buf)?;
            buf
        }
    };
    write_output(out, &bytes)
}
