use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use swipt_cli::checks;
use swipt_cli::config::{self, ScenarioConfig};
use swipt_cli::experiment::{self, Check};

/// Rate-energy regions of wireless information and power transfer over
/// fading channels.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace the boundary of every configured scheme and write CSV files.
    Trace(Scenario),
    /// Run the invariant suite on small ensembles.
    Verify(Scenario),
    /// Time subset selection against the number of antennas.
    Bench(Bench),
}

#[derive(Args)]
struct Scenario {
    /// Scenario file of `key = value [unit]` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated scheme names such as `dps-nocsit,ts-csit`.
    #[arg(long)]
    schemes: Option<String>,
    /// Number of energy targets per boundary.
    #[arg(long)]
    points: Option<usize>,
    /// Number of fading states.
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    antennas: Option<usize>,
}

impl Scenario {
    fn load(&self) -> anyhow::Result<ScenarioConfig> {
        let mut cfg = config::load_config(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = dir.clone();
        }
        if let Some(list) = &self.schemes {
            cfg.schemes = config::parse_schemes(list)?;
        }
        if let Some(n) = self.points {
            cfg.n_points = n;
        }
        if let Some(n) = self.states {
            cfg.num_states = n;
        }
        if let Some(m) = self.antennas {
            cfg.channel.num_antennas = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct Bench {
    /// Antenna counts to time.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
    antennas: Vec<usize>,
    /// Channel states per antenna count.
    #[arg(long, default_value_t = 2000)]
    instances: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also write `bench.json` here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", c.name, c.detail);
    }
}

fn trace(cfg: &ScenarioConfig) -> anyhow::Result<bool> {
    let start = Instant::now();
    let report = match experiment::run_experiment(cfg) {
        Ok(r) => r,
        Err(e) => {
            experiment::write_fatal_error(&cfg.out_dir, &e.to_string())?;
            return Err(e.into());
        }
    };
    for s in &report.schemes {
        match (&s.error, s.r_max_bits, s.q_max_microwatts) {
            (Some(e), ..) => println!("{}: failed: {e}", s.scheme),
            (None, Some(r), Some(q)) => println!("{}: R_max {r:.4} bits/s/Hz, Q_max {q:.4} uW", s.scheme),
            _ => {}
        }
    }
    print_checks(&report.checks);
    println!(
        "wrote {} in {:.1} s",
        cfg.out_dir.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(!report.failed())
}

fn bench(args: &Bench) -> anyhow::Result<bool> {
    let report = checks::bench_subset_selection(
        &args.antennas,
        args.instances,
        args.repeats,
        args.epsilon,
        args.eta,
        args.seed,
    )?;
    println!("{:>8} {:>16} {:>12}", "antennas", "us/instance", "mean list");
    for r in &report.rows {
        println!(
            "{:>8} {:>16.3} {:>12.1}",
            r.antennas,
            r.seconds_per_instance * 1e6,
            r.mean_largest_list
        );
    }
    println!("log-log slope {:.3}", report.slope);
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("bench.json");
        std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(true)
}

fn run() -> anyhow::Result<bool> {
    match Cli::parse().command {
        Command::Trace(s) => trace(&s.load()?),
        Command::Verify(s) => {
            let cfg = s.load()?;
            let results = checks::verify(&cfg)?;
            print_checks(&results);
            Ok(results.iter().all(|c| c.passed))
        }
        Command::Bench(b) => bench(&b),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
