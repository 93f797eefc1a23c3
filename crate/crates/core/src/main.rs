use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use risnet::experiments::{emit_outputs, load_plan, run_plan, ExperimentPlan, SweepVar};
use risnet::scenario::load_scenario;
use risnet::{ChannelSet, Error, SolverSettings, SystemConfig};

#[derive(Parser)]
#[command(name = "risnet", version, about = "RIS-aided multi-BS downlink simulator")]
struct Cli {
    /// Log per-drop progress (repeat for solver traces).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment plan and write CSV, timing and plot script.
    Run {
        #[arg(long)]
        plan: PathBuf,
        /// Output directory; defaults to the plan's `output`, then `results/`.
        #[arg(long, env = "RISNET_OUT_DIR")]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and validate a plan without running it.
    Validate {
        #[arg(long)]
        plan: PathBuf,
    },
    /// Sweep one parameter of a scenario with every method.
    Sweep {
        /// Scenario file; the built-in desk scenario when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_parser = parse_var)]
        var: SweepVar,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        drops: usize,
        /// Comma-separated methods; all six when omitted.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        #[arg(long, default_value = "sweep")]
        name: String,
        #[arg(long, env = "RISNET_OUT_DIR", default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Solve one drop and print the solution.
    Solve {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Drop seed; the scenario seed when omitted.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the channels of one drop as JSON.
    DumpChannels {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_var(s: &str) -> Result<SweepVar, String> {
    match s {
        "M" | "m" => Ok(SweepVar::M),
        "N" | "n" => Ok(SweepVar::N),
        "K" | "k" => Ok(SweepVar::K),
        _ => Err(format!("expected M, N or K, got {s:?}")),
    }
}

fn scenario_or_desk(path: Option<&PathBuf>) -> Result<SystemConfig, Error> {
    match path {
        Some(p) => load_scenario(p),
        None => Ok(SystemConfig::desk_default()),
    }
}

fn execute(plan: &ExperimentPlan, out: PathBuf, threads: Option<usize>) -> Result<(), Error> {
    let table = run_plan(plan, threads)?;
    let files = emit_outputs(&table, plan, &out)?;
    // Reports go to a locked handle so a closed pipe ends output quietly.
    let mut stdout = std::io::stdout().lock();
    for &method in &plan.methods {
        let means: Vec<String> = plan
            .values
            .iter()
            .map(|&v| {
                let m = match plan.sweep_var {
                    SweepVar::K => table.mean_avg_rate(method, v),
                    _ => table.mean_sum_rate(method, v),
                };
                format!("{}={v}: {:.3}", plan.sweep_var, m.unwrap_or(f64::NAN))
            })
            .collect();
        let _ = writeln!(stdout, "{method:<24} {}", means.join("  "));
    }
    let _ = writeln!(stdout, "wrote {}", files.csv.display());
    let _ = writeln!(stdout, "wrote {}", files.timing.display());
    let _ = writeln!(stdout, "wrote {}", files.plot_script.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { plan, out, threads } => {
            let plan = load_plan(&plan)?;
            let out = out.or_else(|| plan.output.clone()).unwrap_or_else(|| PathBuf::from("results"));
            execute(&plan, out, threads)
        }
        Command::Validate { plan } => {
            let p = load_plan(&plan)?;
            println!(
                "{}: {} over {} = {:?}, {} drops, {} methods",
                plan.display(),
                p.name,
                p.sweep_var,
                p.values,
                p.drops,
                p.methods.len()
            );
            Ok(())
        }
        Command::Sweep { scenario, var, values, drops, methods, name, out, threads } => {
            let base = scenario_or_desk(scenario.as_ref())?;
            let methods = if methods.is_empty() {
                risnet::experiments::Method::ALL.to_vec()
            } else {
                methods.iter().map(|m| m.parse()).collect::<Result<_, _>>()?
            };
            if drops == 0 || values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Plan("need drops >= 1 and strictly increasing values".into()));
            }
            for &v in &values {
                risnet::system_model::validate_config(var.apply(&base, v))?;
            }
            let plan = ExperimentPlan {
                name,
                base,
                sweep_var: var,
                values,
                drops,
                methods,
                settings: SolverSettings::default(),
                policy: Default::default(),
                record_wall_time: false,
                output: None,
            };
            execute(&plan, out, threads)
        }
        Command::Solve { scenario, seed } => {
            let cfg = scenario_or_desk(scenario.as_ref())?;
            let channels = ChannelSet::for_drop(&cfg, seed.unwrap_or(cfg.seed));
            let solution = risnet::solve(&cfg, &channels, &SolverSettings::default())?;
            let _ = write!(std::io::stdout(), "{}", solution.dump());
            Ok(())
        }
        Command::DumpChannels { scenario, seed, out } => {
            let cfg = scenario_or_desk(scenario.as_ref())?;
            let seed = seed.unwrap_or(cfg.seed);
            let json = ChannelSet::for_drop(&cfg, seed).to_json(seed);
            match out {
                Some(path) => std::fs::write(&path, json).map_err(|source| Error::Io { path, source }),
                None => {
                    let _ = writeln!(std::io::stdout(), "{json}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
