use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use planar_flow_cli::{run, CliError, Command, Invocation};

/// Stochastic flows of the upper half-plane and chordal Loewner chains.
#[derive(Debug, Parser)]
#[command(name = "planar-flow", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Run configuration (INI style: [field], [driver], [experiment], [output]).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one key, as in `--set driver.seed=7`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory; beats `output.dir` and PLANAR_FLOW_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "PLANAR_FLOW_WORKERS")]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let result = if workers == 0 {
        Err(CliError::Config("`--workers` must be at least 1".into()))
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))
            .and_then(|_| {
                run(&Invocation {
                    command: args.command,
                    config: args.config,
                    sets: args.sets,
                    out: args.out,
                    workers,
                })
            })
    };
    match result {
        Ok(dir) => {
            println!("{}", dir.join("manifest.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("planar-flow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
