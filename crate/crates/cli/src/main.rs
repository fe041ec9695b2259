use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sebd_cli::{
    config::ConfigMap,
    error::{CliError, Result},
    runner,
};
use sebd_core::{oracle::verify_all, schedule::assign_cones};

#[derive(Parser)]
#[command(name = "sebd", version, about = "Trajectory-averaged MPS dynamics of spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run TEBD or sampled SEBD and write estimator and profile tables.
    Run(RunArgs),
    /// Run the exact-oracle suite and print a JSON report.
    Verify,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the light-cone schedule of the final time as JSON and exit.
    #[arg(long)]
    dump_schedule: bool,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// Final time.
    #[arg(long)]
    time: Option<String>,
    /// Comma-separated output times; overrides --time.
    #[arg(long)]
    times: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    j: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    /// Integer or `none`.
    #[arg(long)]
    chi_max: Option<String>,
    /// tebd or sebd.
    #[arg(long)]
    engine: Option<String>,
    /// x, y, z or rdm.
    #[arg(long)]
    basis: Option<String>,
    /// Comma-separated specs such as `sx,czz@5,uzz@6:em`.
    #[arg(long)]
    observables: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    output: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// `neel` or `random:<chi>:<seed>`.
    #[arg(long)]
    initial: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("model", &self.model),
            ("n", &self.n),
            ("time", &self.time),
            ("times", &self.times),
            ("dt", &self.dt),
            ("j", &self.j),
            ("h", &self.h),
            ("epsilon", &self.epsilon),
            ("chi-max", &self.chi_max),
            ("engine", &self.engine),
            ("basis", &self.basis),
            ("observables", &self.observables),
            ("samples", &self.samples),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("output", &self.output),
            ("format", &self.format),
            ("initial", &self.initial),
        ]
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut map = ConfigMap::defaults();
    if let Some(path) = &args.config {
        map.merge_file(path)?;
    }
    map.merge_env()?;
    for (key, value) in args.overrides() {
        if let Some(v) = value {
            map.set(key, v)?;
        }
    }
    let config = map.into_config()?;
    if args.dump_schedule {
        println!("{}", assign_cones(&config.circuit()?).to_json());
        return Ok(());
    }
    let summary = runner::run(&config)?;
    eprintln!(
        "{} trajectories, {} estimator rows -> {}, {} profile rows -> {}",
        summary.trajectories,
        summary.estimate_rows,
        config.output_path.display(),
        summary.profile_rows,
        config.profiles_path().display()
    );
    Ok(())
}

fn verify() -> Result<()> {
    let reports = verify_all()?;
    let passed = reports.iter().all(|r| r.passed);
    let report = serde_json::json!({ "passed": passed, "checks": reports });
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if passed {
        Ok(())
    } else {
        let failed: Vec<_> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
        Err(CliError::Verification(failed.join(", ")))
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Verify => verify(),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
