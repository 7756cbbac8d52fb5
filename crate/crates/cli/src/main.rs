use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use levy_emm::kernel::EmmVerdict;
use levy_emm::pipeline::{self, write_json};
use levy_emm::scenario::Scenario;
use levy_emm::verify::Verdict;
use levy_emm::Error;

const EXIT_FAIL: u8 = 1;
const EXIT_REJECTED: u8 = 2;
const EXIT_INDETERMINATE: u8 = 3;
const EXIT_CONFIG: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "levy-emm", version, about = "Equivalent martingale measures for Levy-driven moving averages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, global = true, env = "LEVY_EMM_SCENARIO")]
    scenario: Option<PathBuf>,
    #[arg(long, global = true, env = "LEVY_EMM_SEED")]
    seed: Option<u64>,
    /// Overrides both simulation and verification path counts.
    #[arg(long, global = true, env = "LEVY_EMM_N_PATHS")]
    n_paths: Option<usize>,
    #[arg(long, global = true, env = "LEVY_EMM_OUT")]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = "LEVY_EMM_PROFILE", value_enum, default_value_t = Profile::Full)]
    profile: Profile,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Profile {
    Smoke,
    Full,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify the kernel/driver pair (exit 0 admissible, 2 not, 3 undecided).
    CheckKernel,
    /// Build and validate the Girsanov kernel on a state grid.
    Construct,
    /// Write simulated P-paths, jumps and density processes as CSV.
    Simulate,
    /// Run the configured test battery.
    Verify,
    /// Summarize a verification document written earlier.
    Report,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidConfig(_) => EXIT_CONFIG,
        Error::TruncationViolated { .. } | Error::ZetaOutOfRange { .. } => EXIT_REJECTED,
        _ => EXIT_FAIL,
    }
}

fn load(common: &Common) -> Result<Scenario, Error> {
    let path = common
        .scenario
        .as_deref()
        .ok_or_else(|| Error::Config("no scenario given (--scenario or LEVY_EMM_SCENARIO)".into()))?;
    let mut s = Scenario::load(path).map_err(|e| match e {
        Error::Io(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if common.profile == Profile::Smoke {
        s.smoke();
    }
    s.apply_overrides(common.seed, common.n_paths);
    s.validate()?;
    Ok(s)
}

fn out_dir(common: &Common, s: Option<&Scenario>) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| s.and_then(|s| s.output.as_ref().map(|o| o.dir.clone())))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn emit<T: serde::Serialize>(dir: &Path, file: &str, value: &T) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join(file), value)?;
    println!("{}", serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?);
    Ok(())
}

fn run(cli: &Cli) -> Result<u8, Error> {
    let common = &cli.common;
    if let Command::Report = cli.command {
        return report(&out_dir(common, None));
    }
    let s = load(common)?;
    let out = out_dir(common, Some(&s));
    match cli.command {
        Command::CheckKernel => {
            let r = pipeline::check_kernel(&s)?;
            emit(&out, "kernel_check.json", &r)?;
            Ok(match r.verdict {
                EmmVerdict::Admissible => 0,
                EmmVerdict::NotAdmissible(_) => EXIT_REJECTED,
                EmmVerdict::Indeterminate(_) => EXIT_INDETERMINATE,
            })
        }
        Command::Construct => {
            let r = pipeline::construct(&s)?;
            emit(&out, "construct.json", &r)?;
            Ok(if r.passed { 0 } else { EXIT_REJECTED })
        }
        Command::Simulate => {
            let r = pipeline::simulate(&s, &out)?;
            emit(&out, "simulate.json", &r)?;
            Ok(0)
        }
        Command::Verify => {
            let doc = pipeline::verify(&s)?;
            std::fs::create_dir_all(&out)?;
            doc.write_plot_csv(&out.join("plot.csv"))?;
            emit(&out, "verification.json", &doc)?;
            Ok(if doc.verdict == Verdict::Pass { 0 } else { EXIT_FAIL })
        }
        Command::Report => unreachable!(),
    }
}

fn report(out: &Path) -> Result<u8, Error> {
    let path = out.join("verification.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    println!("scenario {} (seed {}, {} paths)", doc["scenario"], doc["seed"], doc["n_paths"]);
    for r in doc["reports"].as_array().into_iter().flatten() {
        println!(
            "{:<28} {:<12} estimate {:>14.6e}  se {:>11.3e}  n {}",
            r["name"].as_str().unwrap_or("?"),
            r["verdict"].as_str().unwrap_or("?"),
            r["estimate"].as_f64().unwrap_or(f64::NAN),
            r["std_error"].as_f64().unwrap_or(f64::NAN),
            r["n_samples"],
        );
    }
    let verdict = doc["verdict"].as_str().unwrap_or("inconclusive");
    println!("overall: {verdict}");
    Ok(if verdict == "pass" { 0 } else { EXIT_FAIL })
}
