//! Command-line front end.
//!
//! Exit codes: 0 on success (and on "satisfied" for the commands that
//! render a verdict), 1 when a verdict command ends unsatisfied, 2 on
//! any error. Set `GRADSTL_LOG=info` (or `debug`) for progress detail
//! on stderr.

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{debug, info};

use gradstl::casestudy::{run_case_study, write_outputs, Scenario};
use gradstl::formula::{parse_formula, Formula};
use gradstl::optimize::{optimize_signal, GammaSchedule, OptimizerConfig};
use gradstl::robustness::{gradient, rstar};
use gradstl::semantics::eval_estar;
use gradstl::signal::{load_signal, save_signal, Signal};

#[derive(Parser)]
#[command(name = "gradstl", version, about = "Differentiable signal temporal logic toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate boolean satisfaction of a formula on a signal.
    Check(CheckArgs),
    /// Compute smooth robustness (gamma 0 gives the hard semantics).
    Robustness(RobustnessArgs),
    /// Compute the robustness gradient for every signal entry, as CSV.
    Grad(GradArgs),
    /// Ascend the smooth robustness surface to repair a signal.
    Optimize(OptimizeArgs),
    /// Run the patient-room delivery case study.
    Casestudy(CasestudyArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Signal CSV file (header `t,<var>,...`).
    #[arg(long)]
    signal: PathBuf,
    /// Formula: inline text, or a path to a file containing it.
    #[arg(long)]
    formula: String,
    /// Sample index to evaluate at.
    #[arg(long, default_value_t = 0)]
    at: usize,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct RobustnessArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Smoothing parameter; 0 for the hard min/max semantics.
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
}

#[derive(Args)]
struct GradArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Smoothing parameter; must be strictly positive.
    #[arg(long)]
    gamma: f64,
    /// Write the gradient CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Directory receiving final.csv and trace.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    /// Starting smoothing parameter.
    #[arg(long, default_value_t = 0.25)]
    gamma: f64,
    /// Anneal gamma linearly down to this value over the run.
    #[arg(long)]
    gamma_floor: Option<f64>,
    /// Comma-separated sample indices to hold fixed.
    #[arg(long, value_delimiter = ',')]
    pin: Vec<usize>,
}

#[derive(Args)]
struct CasestudyArgs {
    /// Scenario TOML; defaults to the bundled patient-room mission.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Directory receiving initial.csv, final.csv, trace.csv, report.json.
    #[arg(long)]
    out: PathBuf,
}

/// Twelve significant digits, printed in the shortest form that round
/// trips to the same value.
fn format_sig12(v: f64) -> String {
    let rounded: f64 = format!("{v:.11e}").parse().unwrap();
    format!("{rounded}")
}

fn load_inputs(common: &CommonArgs) -> Result<(Signal, Formula), Box<dyn Error>> {
    let signal = load_signal(&common.signal)
        .map_err(|e| format!("{}: {e}", common.signal.display()))?;
    let text = if Path::new(&common.formula).exists() {
        fs::read_to_string(&common.formula)?
    } else {
        common.formula.clone()
    };
    let formula = parse_formula(text.trim(), signal.names())?;
    info!(
        "formula: size {} depth {} temporal nesting {}",
        formula.size(),
        formula.depth(),
        formula.temporal_nesting()
    );
    Ok((signal, formula))
}

fn cmd_check(args: &CheckArgs) -> Result<ExitCode, Box<dyn Error>> {
    let (signal, formula) = load_inputs(&args.common)?;
    let (value, stats) = eval_estar(&signal, &formula, args.common.at)?;
    info!(
        "evaluator calls {} max temporal depth {}",
        stats.call_count, stats.max_temporal_depth
    );
    if value {
        println!("satisfied");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("not satisfied");
        Ok(ExitCode::from(1))
    }
}

fn cmd_robustness(args: &RobustnessArgs) -> Result<ExitCode, Box<dyn Error>> {
    let (signal, formula) = load_inputs(&args.common)?;
    let r = rstar(&signal, &formula, args.common.at, args.gamma)?;
    println!("{}", format_sig12(r));
    Ok(ExitCode::SUCCESS)
}

fn cmd_grad(args: &GradArgs) -> Result<ExitCode, Box<dyn Error>> {
    let (signal, formula) = load_inputs(&args.common)?;
    let (value, tensor) = gradient(&signal, &formula, args.common.at, args.gamma)?;
    info!("robustness {}", format_sig12(value));
    let csv = tensor.render_csv(&signal);
    match &args.out {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn write_trace(
    path: &Path,
    steps: &[gradstl::optimize::StepRecord],
) -> Result<(), Box<dyn Error>> {
    let mut out = String::from("step,smooth_robustness,hard_robustness\n");
    for rec in steps {
        out.push_str(&format!("{},{},{}\n", rec.step, rec.smooth, rec.hard));
    }
    fs::write(path, out)?;
    Ok(())
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<ExitCode, Box<dyn Error>> {
    let (signal, formula) = load_inputs(&args.common)?;
    let mut cfg = OptimizerConfig {
        steps: args.steps,
        learning_rate: args.learning_rate,
        gamma: args.gamma,
        schedule: match args.gamma_floor {
            Some(floor) => GammaSchedule::LinearTo { floor },
            None => GammaSchedule::Constant,
        },
        ..OptimizerConfig::default()
    };
    for k in &args.pin {
        cfg.pin_mask.pin_sample(*k);
    }
    let (optimized, trace) = optimize_signal(&signal, &formula, args.common.at, &cfg)?;
    for rec in &trace.steps {
        debug!("step {} smooth {} hard {}", rec.step, rec.smooth, rec.hard);
    }
    fs::create_dir_all(&args.out)?;
    save_signal(&optimized, args.out.join("final.csv"))?;
    write_trace(&args.out.join("trace.csv"), &trace.steps)?;
    println!("initial {}", format_sig12(trace.steps[0].hard));
    println!("final {}", format_sig12(trace.final_hard));
    if trace.final_hard > 0.0 {
        println!("satisfied");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("not satisfied");
        Ok(ExitCode::from(1))
    }
}

fn cmd_casestudy(args: &CasestudyArgs) -> Result<ExitCode, Box<dyn Error>> {
    let scenario = match &args.scenario {
        Some(path) => {
            Scenario::load(path).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => Scenario::bundled(),
    };
    let outcome = run_case_study(&scenario)?;
    write_outputs(&outcome, &args.out)?;
    let r = &outcome.report;
    println!("initial {}", format_sig12(r.initial_robustness));
    println!("final {}", format_sig12(r.final_robustness));
    println!("steps {}", r.steps_run);
    if r.satisfied {
        println!("satisfied");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("not satisfied");
        Ok(ExitCode::from(1))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRADSTL_LOG", "off"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(args) => cmd_check(args),
        Command::Robustness(args) => cmd_robustness(args),
        Command::Grad(args) => cmd_grad(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Casestudy(args) => cmd_casestudy(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
