use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use turbonlc::harness::{
    aggregate, final_iteration, optimal_power, read_records, run_campaign, write_records, CampaignConfig, Figure,
    ReceiverMode, Tables,
};
use turbonlc::harness::synthetic::{synthetic_trial, SyntheticConfig};
use turbonlc::{LdpcCode, SlidingWindowConfig};

#[derive(Parser)]
#[command(name = "turbonlc", version, about = "WDM link simulation and turbo equalization campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the campaign described by a config file.
    Run(RunArgs),
    /// Like `run`, with sweep axes overridden on the command line.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Launch powers in dBm, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        powers: Option<Vec<f64>>,
        /// Span counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        spans: Option<Vec<usize>>,
        /// Receiver modes (edc, dbp, dbp_turbo), comma separated.
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<ReceiverMode>>,
        #[arg(long)]
        trials: Option<usize>,
        /// Replace NLMS and the PLL by a static pilot least-squares fit.
        #[arg(long)]
        bypass_dsp: bool,
    },
    /// Write plot-ready CSV tables from a results file.
    Tables {
        #[arg(long)]
        results: PathBuf,
        /// One of power_ber, power_snr, power_gmi, reach_snr, reach_ber.
        #[arg(long)]
        figure: Option<Figure>,
        /// Output directory; defaults to the results file's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turbo receiver on a synthetic time-varying ISI channel.
    Synthetic {
        /// Parity-check file.
        #[arg(long)]
        code: PathBuf,
        #[arg(long, default_value_t = 15.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 0.22)]
        isi: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        iterations: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory for results.jsonl, failures.jsonl and the tables.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load(&args)?;
            campaign(cfg, &args)
        }
        Command::Sweep {
            run,
            powers,
            spans,
            modes,
            trials,
            bypass_dsp,
        } => {
            let mut cfg = load(&run)?;
            if let Some(p) = powers {
                cfg.launch_powers_dbm = p;
            }
            if let Some(s) = spans {
                cfg.spans = s;
            }
            if let Some(m) = modes {
                cfg.modes = m;
            }
            if let Some(t) = trials {
                cfg.n_trials = t;
            }
            if bypass_dsp {
                cfg.dsp.enabled = false;
            }
            cfg.validate()?;
            campaign(cfg, &run)
        }
        Command::Tables { results, figure, out } => {
            let records = read_records(&results).with_context(|| format!("reading {}", results.display()))?;
            let dir = out.unwrap_or_else(|| results.parent().map(Path::to_path_buf).unwrap_or_default());
            for p in Tables::from_records(&records).write(&dir, figure)? {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Synthetic {
            code,
            snr_db,
            isi,
            seed,
            iterations,
        } => {
            let code = LdpcCode::load(&code).with_context(|| format!("loading {}", code.display()))?;
            let cfg = SyntheticConfig {
                snr_db,
                isi,
                seed,
                ..SyntheticConfig::default()
            };
            let trial = synthetic_trial(&cfg, &code)?;
            let turbo = SlidingWindowConfig {
                n_turbo_iters: iterations,
                ..SlidingWindowConfig::default()
            };
            let out = trial.run(&turbo, &code)?;
            println!("iteration,post_fec_ber,snr_db,snr_conventional_db,gmi_bits_per_4d_symbol");
            for s in trial.score(&out, &code)? {
                println!(
                    "{},{:.4e},{:.3},{:.3},{:.4}",
                    s.iteration,
                    s.ber.ber(),
                    s.snr_db,
                    s.snr_conventional_db,
                    s.gmi
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load(args: &RunArgs) -> Result<CampaignConfig> {
    let mut cfg = CampaignConfig::load(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    Ok(cfg)
}

fn campaign(cfg: CampaignConfig, args: &RunArgs) -> Result<ExitCode> {
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let res = run_campaign(&cfg, args.jobs)?;
    write_records(args.out.join("results.jsonl"), &res.records)?;
    let mut failures = String::new();
    for f in &res.failures {
        failures.push_str(&serde_json::to_string(f)?);
        failures.push('\n');
    }
    std::fs::write(args.out.join("failures.jsonl"), failures)?;
    Tables::from_records(&res.records).write(&args.out, None)?;

    let cells = aggregate(&res.records);
    println!("{:>6} {:>9} {:>5} {:>10} {:>8} {:>8} {:>7}", "spans", "mode", "iter", "power_dBm", "SNR_dB", "convSNR", "GMI");
    for c in final_iteration(&cells) {
        println!(
            "{:>6} {:>9} {:>5} {:>10.2} {:>8.3} {:>8.3} {:>7.3}",
            c.n_spans, c.mode, c.iteration, c.power_dbm, c.snr_db, c.snr_conventional_db, c.gmi_bits_per_4d_symbol
        );
    }
    println!("optimal launch power per mode (final iteration):");
    let opt = optimal_power(&cells);
    for o in &opt {
        let last = opt
            .iter()
            .filter(|x| x.mode == o.mode && x.n_spans == o.n_spans)
            .map(|x| x.iteration)
            .max();
        if Some(o.iteration) == last {
            println!(
                "  {} spans {:>9}: {:.2} dBm, SNR {:.3} dB, BER {:.3e}",
                o.n_spans, o.mode, o.power_dbm, o.snr_db, o.post_fec_ber
            );
        }
    }
    if !res.failures.is_empty() {
        eprintln!("{} cell(s) failed, see failures.jsonl", res.failures.len());
        return Ok(ExitCode::from(2));
    }
    if res.records.is_empty() {
        bail!("campaign produced no records");
    }
    Ok(ExitCode::SUCCESS)
}
