use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use qtraj::scenario::{
    compare_runs, dump, load_bundle, parse_scenario, preset, preset_names, run_scenario, write_outputs, Metric,
    Scenario, ScenarioError, ToleranceProfile,
};

/// Bohmian trajectories and Gaussian wave-packet interference in one dimension.
#[derive(Debug, Parser)]
#[command(name = "qtraj", version)]
struct Cli {
    /// Directory receiving one subdirectory per scenario.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Skip SVG plots.
    #[arg(long, global = true)]
    no_plots: bool,
    /// Replace the integrator tolerances of every scenario.
    #[arg(long, global = true, value_name = "fast|strict")]
    tolerance_profile: Option<ToleranceProfile>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run scenario files or presets; a batch runs concurrently.
    Run {
        #[arg(required = true, value_name = "CONFIG|PRESET")]
        inputs: Vec<String>,
    },
    /// List the built-in presets.
    ListPresets,
    /// Compare two result directories.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_name = "density_L2|trajectory_RMS")]
        metric: Metric,
    },
    /// Print the normalized document of a preset or scenario file.
    DumpConfig {
        #[arg(value_name = "PRESET|CONFIG")]
        input: String,
    },
}

fn load(input: &str) -> Result<Scenario, ScenarioError> {
    let path = Path::new(input);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        return parse_scenario(&text);
    }
    if let Some(s) = preset(input) {
        return Ok(s);
    }
    if input.ends_with(".json") || input.contains(std::path::MAIN_SEPARATOR) {
        return Err(ScenarioError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        });
    }
    Err(ScenarioError::UnknownPreset(input.to_string()))
}

fn fail(e: &ScenarioError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn run_batch(cli: &Cli, inputs: &[String]) -> ExitCode {
    let mut scenarios = Vec::new();
    for input in inputs {
        match load(input) {
            Ok(s) => scenarios.push(match cli.tolerance_profile {
                Some(p) => s.with_profile(p),
                None => s,
            }),
            Err(e) => return fail(&e),
        }
    }
    let mut names: Vec<&str> = scenarios.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return fail(&ScenarioError::Validation {
            field: "name".into(),
            message: format!("scenario `{}` appears twice in the batch", w[0]),
        });
    }
    let results: Vec<Result<usize, ScenarioError>> = scenarios
        .par_iter()
        .map(|s| {
            log::info!("running {}", s.name);
            let out = run_scenario(s)?;
            let files = write_outputs(&out, &cli.out_dir.join(&s.name), !cli.no_plots)?;
            Ok(files.len())
        })
        .collect();
    let mut code = 0;
    for (s, r) in scenarios.iter().zip(&results) {
        match r {
            Ok(n) => println!("{}: wrote {n} files to {}", s.name, cli.out_dir.join(&s.name).display()),
            Err(e) => {
                eprintln!("error: {e}");
                code = code.max(e.exit_code());
            }
        }
    }
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match &cli.command {
        Command::Run { inputs } => run_batch(&cli, inputs),
        Command::ListPresets => {
            for name in preset_names() {
                let s = preset(name).expect("registered preset");
                let mode = serde_json::to_value(s.mode).expect("mode serializes");
                println!("{name}\t{}", mode.as_str().unwrap_or_default());
            }
            ExitCode::SUCCESS
        }
        Command::Compare { a, b, metric } => {
            let report = load_bundle(a).and_then(|a| load_bundle(b).and_then(|b| compare_runs(&a, &b, *metric)));
            match report {
                Ok(r) => {
                    println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::DumpConfig { input } => match load(input) {
            Ok(s) => {
                print!("{}", dump(&s));
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
