//! `phdpmb`: run Monte Carlo campaigns, or the forward filter and the
//! smoother on their own.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phdpmb::campaign::{run_seed, simulate_forward, smooth_record};
use phdpmb::output::{read_json, write_json, write_trajectories};
use phdpmb::{emit_outputs, run_campaign, CampaignConfig, HarnessError, Variant};
use phdpmb_core::phd::ForwardRecord;

#[derive(Parser)]
#[command(version, about = "GM-PHD filtering with PMB backward trajectory smoothing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and write the result files.
    Run(Common),
    /// Simulate one run and write its truth and forward-filter record.
    Forward {
        #[command(flatten)]
        common: Common,
        /// Run index whose seed is used.
        #[arg(long, default_value_t = 0)]
        run: usize,
    },
    /// Smooth a forward record written by `forward`.
    Smooth {
        #[command(flatten)]
        common: Common,
        /// Forward record (JSON).
        #[arg(long)]
        record: PathBuf,
        /// Run index whose seed is used.
        #[arg(long, default_value_t = 0)]
        run: usize,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, value_enum)]
    variant: Option<Variant>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    max_hypotheses: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<CampaignConfig, HarnessError> {
        let mut c = match &self.config {
            Some(path) => CampaignConfig::load(path)?,
            None => CampaignConfig::default(),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.runs {
            c.runs = v;
        }
        if let Some(v) = self.variant {
            c.variant = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        if let Some(v) = self.particles {
            c.smoother.particles = v;
        }
        if let Some(v) = self.max_hypotheses {
            c.smoother.max_hypotheses = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn create_dir(dir: &std::path::Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.into(), source })
}

fn write_jsonl(path: PathBuf, source: &str, ts: &[phdpmb_core::Trajectory<4>]) -> Result<PathBuf, HarnessError> {
    let io = |source| HarnessError::Io { path: path.clone(), source };
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path).map_err(io)?);
    write_trajectories(&mut out, source, ts).map_err(io)?;
    std::io::Write::flush(&mut out).map_err(io)?;
    Ok(path)
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run(common) => {
            let config = common.resolve()?;
            let result = run_campaign(&config)?;
            for f in &result.failures {
                eprintln!("run {} failed: {}", f.run, f.message);
            }
            for path in emit_outputs(&result, &config.out)? {
                println!("{}", path.display());
            }
            let s = result.summary();
            println!(
                "GOSPA per step: PHD {:.3}, smoother {:.3}; smoother TGOSPA per step {:.3}",
                s.gospa.phd.total, s.gospa.hybrid.total, s.tgospa_hybrid.total
            );
            if result.failed() {
                return Err(HarnessError::CampaignFailed { failed: result.failures.len(), runs: config.runs });
            }
        }
        Command::Forward { common, run } => {
            let config = common.resolve()?;
            create_dir(&config.out)?;
            let (truth, record) = simulate_forward(&config, run)?;
            println!("{}", write_jsonl(config.out.join("truth.jsonl"), "truth", &truth.trajectories)?.display());
            let path = config.out.join("forward.json");
            write_json(&path, &record)?;
            println!("{}", path.display());
        }
        Command::Smooth { common, record, run } => {
            let config = common.resolve()?;
            create_dir(&config.out)?;
            let record: ForwardRecord<4, 2> = read_json(&record)?;
            let estimate = smooth_record(&config, &record, run_seed(config.seed, run))?;
            println!("{}", write_jsonl(config.out.join("estimate.jsonl"), "estimate", &estimate)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
