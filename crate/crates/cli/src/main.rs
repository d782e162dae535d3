use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use robustinfo::{EvaluationMode, SequentialPolicy};
use robustinfo_cli::run::{self, to_json, write_file, RunOptions};
use robustinfo_cli::{load_scenario, CliError, ScenarioConfig};

#[derive(Parser)]
#[command(name = "robustinfo", version, about = "Robust sequential information design")]
struct Cli {
    /// Preset name (`case1`, `case2`) or path to a scenario JSON file.
    #[arg(long, global = true, default_value = "case1")]
    scenario: String,
    /// Directory for artifacts. `run` defaults to `out`; other commands
    /// only print unless this is given.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Obedience tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Exit with status 1 when a modelling assumption fails.
    #[arg(long, global = true)]
    strict: bool,
    /// Seed for randomized verification helpers.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal threshold policy.
    Design,
    /// Feasibility and sequential obedience of a policy.
    Check {
        /// Policy JSON; defaults to the designed policy.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Exact LP over all invitation sequences (small populations).
    Lp {
        /// Instead, compare LP and threshold rule on K random instances.
        #[arg(long, value_name = "K")]
        verify_random: Option<usize>,
    },
    /// Realized welfare under smallest-equilibrium play.
    Evaluate {
        #[arg(long, value_enum, default_value_t = ModeArg::Private)]
        mode: ModeArg,
        /// Policy JSON; defaults to the designed policy.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Robust optimum against the optimistic and realized baselines.
    Compare,
    /// Comparison over the scenario's cost sweep.
    Sweep,
    /// Every analysis enabled in the scenario, written to `--out`.
    Run,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Private,
    Public,
}

fn load_policy(path: &Path) -> Result<SequentialPolicy, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_owned(),
        source: e,
    })?;
    SequentialPolicy::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn policy_for(config: &ScenarioConfig, path: Option<&Path>, opts: &RunOptions) -> Result<SequentialPolicy, CliError> {
    match path {
        Some(p) => load_policy(p),
        None => Ok(run::design_outcome(config, opts)?.policy),
    }
}

/// Prints `contents` and writes it to `--out/name` when requested.
fn emit(out: Option<&Path>, name: &str, contents: &str) -> Result<(), CliError> {
    print!("{contents}");
    if let Some(dir) = out {
        write_file(dir, name, contents)?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let opts = RunOptions {
        tol: cli.tol,
        strict: cli.strict,
    };
    let out = cli.out.as_deref();
    if let Command::Lp {
        verify_random: Some(k),
    } = cli.command
    {
        let v = run::verify_random(k, cli.seed)?;
        emit(out, "lp_verify.json", &to_json(&v))?;
        return if v.disagreements.is_empty() {
            Ok(())
        } else {
            Err(CliError::Verification(format!(
                "LP and threshold rule disagree on {} of {k} instances",
                v.disagreements.len()
            )))
        };
    }

    let config = load_scenario(&cli.scenario)?;
    run::check_strict(&config, &opts)?;
    match cli.command {
        Command::Design => {
            let d = run::design_outcome(&config, &opts)?;
            emit(out, "design.json", &d.to_json())?;
            if let Some(dir) = out {
                write_file(dir, "policy.json", &to_json(&d.policy))?;
                write_file(dir, "figdata_scores.csv", &d.scores_csv())?;
            }
        }
        Command::Check { policy } => {
            let p = policy_for(&config, policy.as_deref(), &opts)?;
            emit(out, "obedience.json", &to_json(&run::obedience(&config, &p, &opts)?))?;
        }
        Command::Lp { .. } => {
            let (artifact, model) = run::lp_outcome(&config, &opts)?;
            emit(out, "lp.json", &to_json(&artifact))?;
            if let Some(dir) = out {
                write_file(dir, "lp_model.lp", &model)?;
            }
        }
        Command::Evaluate { mode, policy } => {
            let p = policy_for(&config, policy.as_deref(), &opts)?;
            let mode = match mode {
                ModeArg::Private => EvaluationMode::PrivateSequential,
                ModeArg::Public => EvaluationMode::Public,
            };
            emit(out, "evaluation.json", &to_json(&run::evaluate(&config, &p, mode)?))?;
        }
        Command::Compare => {
            emit(out, "comparison.csv", &run::comparison_csv([&run::comparison(&config)?]))?;
        }
        Command::Sweep => {
            if config.sweep.is_none() {
                return Err(CliError::Input(format!("scenario `{}` has no sweep", config.name)));
            }
            let points = run::sweep(&config)?;
            emit(out, "sweep.csv", &run::comparison_csv(points.iter().map(|p| &p.record)))?;
            if let Some(dir) = out {
                write_file(dir, "figdata_welfare.csv", &run::welfare_curves_csv(&points))?;
                write_file(dir, "sweep_summary.json", &to_json(&run::summarize(&points)))?;
            }
        }
        Command::Run => {
            let dir = out.map_or_else(|| PathBuf::from("out"), Path::to_path_buf);
            let report = run::run(&config, &dir, &opts)?;
            for note in &report.notes {
                eprintln!("note: {note}");
            }
            println!("wrote {} artifacts to {}", report.files.len() + 1, dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
