use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lindeberg_lab::census::census_csv;
use lindeberg_lab::error::{LabError, Result};
use lindeberg_lab::lab::{self, check_acceptance, emit_plot_data, Criteria, ExperimentConfig, Mode, PlotKind};
use lindeberg_lab::schedule::schedule_to_csv;
use lindeberg_lab::stats::engine::Backend;

#[derive(Parser)]
#[command(name = "lindeberg-lab", version, about = "Glued periodic orbits and their central limit statistics")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides LINDEBERG_LAB_SEED and the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    exact_cap: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_parser = parse_backend)]
    backend: Option<Backend>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every level and write the report directory.
    Run {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Census every level, fix k_l, and check the schedule hypotheses.
    ValidateSchedule {
        #[command(flatten)]
        run: RunArgs,
        /// Also write schedule.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the window census of every level.
    Census {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a finished run into plot-ready CSV.
    EmitPlots {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        which: Vec<PlotKind>,
    },
    /// Evaluate a finished run against a criteria file.
    CheckAcceptance {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        criteria: PathBuf,
    },
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_lowercase())).map_err(|_| format!("unknown mode {s:?}"))
}

fn parse_backend(s: &str) -> std::result::Result<Backend, String> {
    serde_json::from_value(serde_json::Value::String(s.to_lowercase())).map_err(|_| format!("unknown backend {s:?}"))
}

fn load(args: &RunArgs) -> Result<(ExperimentConfig, u64)> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(c) = args.exact_cap {
        cfg.engine.exact_cap = c;
    }
    if let Some(s) = args.samples {
        cfg.engine.samples = s;
    }
    if let Some(b) = args.backend {
        cfg.engine.backend = b;
    }
    let seed = lab::resolve_seed(args.seed, &cfg)?;
    Ok((cfg, seed))
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir.display().to_string(), e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| LabError::io(path.display().to_string(), e))
}

fn execute(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run { run, out } => {
            let (cfg, seed) = load(&run)?;
            let (res, manifest) = lab::run_to_dir(&cfg, seed, &out)?;
            for lv in &res.levels {
                match (&lv.stats, &lv.error) {
                    (_, Some(e)) => println!("l={} error: {e}", lv.l),
                    (Some(s), None) => {
                        let ks = s.clt.ks.iter().find(|k| k.normalizer == "s_doubleprime").map(|k| k.ks);
                        println!(
                            "l={} cycles={} k={} backend={:?} ks''={}",
                            lv.l,
                            lv.census.cycles,
                            lv.entry.k,
                            s.backend,
                            ks.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
                        );
                    }
                    (None, None) => println!("l={} no statistics", lv.l),
                }
            }
            println!("wrote {} ({} levels)", out.display(), manifest.levels.len());
            let failed = res.levels.iter().any(|l| l.error.is_some());
            Ok(if failed { ExitCode::from(3) } else { ExitCode::SUCCESS })
        }
        Command::ValidateSchedule { run, out } => {
            let (cfg, _) = load(&run)?;
            let inst = cfg.load_instance()?;
            let prep = lab::prepare(&cfg, &inst)?;
            if let Some(dir) = out {
                mkdir(&dir)?;
                write_file(&dir.join("schedule.csv"), &schedule_to_csv(&prep.entries))?;
            }
            println!("{}", serde_json::to_string_pretty(&prep.report).expect("report serializes"));
            if prep.report.passed {
                println!("schedule passes");
                Ok(ExitCode::SUCCESS)
            } else {
                Err(LabError::ScheduleRejected(prep.report.violated_items().join(", ")))
            }
        }
        Command::Census { run, out } => {
            let (cfg, _) = load(&run)?;
            let inst = cfg.load_instance()?;
            let prep = lab::prepare(&cfg, &inst)?;
            mkdir(&out)?;
            for (e, w) in prep.entries.iter().zip(&prep.windows) {
                write_file(&out.join(format!("census_l{}.csv", e.l)), &census_csv(w, &w.cycles))?;
                println!("l={} T={} delta={} cycles={} separated={}", e.l, e.t, e.delta, w.len(), w.separation.separated);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::EmitPlots { out, which } => {
            let kinds = if which.is_empty() {
                vec![PlotKind::Ks, PlotKind::Ratios, PlotKind::Cdf, PlotKind::Lindeberg, PlotKind::Deviation]
            } else {
                which
            };
            for k in kinds {
                println!("{}", emit_plot_data(&out, k)?.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckAcceptance { out, criteria } => {
            let text = std::fs::read_to_string(&criteria).map_err(|e| LabError::io(criteria.display().to_string(), e))?;
            let report = check_acceptance(&out, &Criteria::from_toml(&text)?)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for v in &report.verdicts {
                let measured = v.measured.map(|m| format!("{m:.6}")).unwrap_or_else(|| "-".into());
                println!("{} {} measured={measured} {}", if v.passed { "PASS" } else { "FAIL" }, v.criterion, v.detail);
            }
            write_file(&out.join("acceptance.json"), &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(3);
        }
    }
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
