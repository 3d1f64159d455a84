use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use banlin::config::{resolve, ActionSpec, AdversarySpec, ConfigError, RawConfig, Setting};
use banlin::io::read_points;
use banlin::report::{write_outputs, Report};
use banlin::{john, json, run_experiment, verify};
use clap::{Args, Parser, Subcommand};

/// Bandit linear optimization experiments.
#[derive(Parser)]
#[command(name = "banlin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicates of one experiment and check the regret bound.
    Run(RunArgs),
    /// Run the randomized invariant checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiplier on the number of random cases.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Print the checks as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Print John's ellipsoid, contact points and weights of a point set.
    John {
        /// CSV file, one point per row.
        #[arg(long)]
        points: PathBuf,
        #[arg(long, default_value_t = john::DEFAULT_TOL)]
        tol: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat JSON config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    setting: Option<Setting>,
    #[arg(long = "d")]
    d: Option<usize>,
    #[arg(long = "n")]
    n: Option<usize>,
    /// Number of actions (finite) or experts (experts).
    #[arg(long = "N")]
    big_n: Option<usize>,
    /// cross-polytope, corners, random or file:PATH.
    #[arg(long)]
    actions: Option<ActionSpec>,
    /// Actions offered to the experts each round.
    #[arg(long)]
    context: Option<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// zero, fixed[:list], iid-l1-vertex, iid-sphere, rotating[:period], adaptive-worst or file:PATH.
    #[arg(long)]
    adversary: Option<AdversarySpec>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Refuse clamped or out-of-range parameters instead of warning.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    strict: Option<bool>,
    /// Ball only: shrink the played internal point to norm 1 - gamma.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    project: Option<bool>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Print the resolved config and exit.
    #[arg(long)]
    emit_config: bool,
}

impl RunArgs {
    fn raw(&self) -> RawConfig {
        RawConfig {
            setting: self.setting,
            d: self.d,
            n: self.n,
            big_n: self.big_n,
            actions: self.actions.clone(),
            context: self.context,
            seeds: self.seeds,
            seed: self.seed,
            adversary: self.adversary.clone(),
            eta: self.eta,
            gamma: self.gamma,
            strict: self.strict,
            project: self.project,
            out_dir: self.out_dir.clone(),
        }
    }
}

enum Failure {
    Usage(anyhow::Error),
    Check(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Check(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        if e.is_usage() {
            Failure::Usage(e.into())
        } else {
            Failure::Check(e.into())
        }
    }
}

fn run(args: RunArgs) -> Result<bool, Failure> {
    let file = match &args.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    let resolved = resolve(&file, &args.raw())?;
    if args.emit_config {
        print!("{}", json::to_string_pretty(&resolved.config).map_err(anyhow::Error::from)?);
        return Ok(true);
    }
    for w in &resolved.warnings {
        eprintln!("warning: {w}");
    }
    let jobs = match args.jobs {
        Some(0) => return Err(Failure::Usage(anyhow::anyhow!("--jobs must be at least 1"))),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let cfg = &resolved.config;
    let exp = run_experiment(cfg, jobs)?;
    let report = Report::new(&resolved, &exp);
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from(banlin::config::DEFAULT_OUT_DIR));
    write_outputs(&dir, &resolved, &exp, &report)?;

    let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
    println!(
        "{:?} d={} n={} seeds={}: mean regret {:.3} ± {:.3} ({:?})",
        cfg.setting, cfg.d, cfg.n, cfg.seeds, report.mean_regret, report.stderr, report.regret_kind
    );
    println!("bound       {:.3}  {}", report.bound, verdict(report.pass_bound));
    println!("certificate {:.3}  {}", report.mean_certificate, verdict(report.pass_certificate));
    if let Some(r) = report.range {
        println!("range       {:.3} of {:.3}, {} exceedances  {}", r.max, r.bound, r.exceedances, verdict(report.pass_range));
    }
    println!("wrote {}", dir.display());
    Ok(report.pass)
}

fn john_cmd(points: PathBuf, tol: f64) -> Result<bool, Failure> {
    let pts = read_points(&points).map_err(|e| Failure::Usage(e.into()))?;
    let summary = john::summarize(&pts, tol)?;
    print!("{}", json::to_string_pretty(&summary).context("serializing")?);
    Ok(summary.pass)
}

fn verify_cmd(seed: u64, scale: f64, as_json: bool) -> Result<bool, Failure> {
    if !(scale > 0.0) {
        return Err(Failure::Usage(anyhow::anyhow!("--scale must be positive")));
    }
    let checks = verify::run_all(seed, scale);
    if as_json {
        print!("{}", json::to_string_pretty(&checks).context("serializing")?);
    } else {
        for c in &checks {
            let mark = if c.passed { "pass" } else { "FAIL" };
            println!("{mark}  {:<44} worst {:.3e} limit {:.3e} ({} cases)", c.name, c.worst, c.limit, c.cases);
        }
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Verify { seed, scale, json } => verify_cmd(seed, scale, json),
        Command::John { points, tol } => john_cmd(points, tol),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Check(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
