use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use omnirank_core::domain::{parse_month_range, Month};
use omnirank_core::error::Error;
use omnirank_core::io::dashboard::RankingsFile;
use omnirank_core::io::pipeline::{clean_stage, evaluate_stage, features_stage, train_stage};
use omnirank_core::io::{
    export_dashboard, read_dataset, read_json, read_jsonl, run_pipeline, save_checkpoint, write_json, write_jsonl,
    write_universe, ReportsFile, RunConfig, SCHEMA_VERSION,
};
use omnirank_core::synth::generate_universe;
use omnirank_core::FeatureBundle;

#[derive(Parser)]
#[command(name = "omnirank", version, about = "Risk scoring for lending platforms")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory of the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset with planted risk signal.
    Generate,
    /// Deduplicate, fill nulls and filter low-quality comments.
    Clean {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Build feature bundles at one cutoff from a cleaned dataset.
    Features {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        cutoff: Month,
    },
    /// Train the network on a bundle file and write a checkpoint.
    Train {
        #[arg(long)]
        bundles: PathBuf,
    },
    /// Rolling cross-validated evaluation of a cleaned dataset.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        /// `YYYY-MM` or `YYYY-MM:YYYY-MM`; the configured months when omitted.
        #[arg(long)]
        months: Option<String>,
    },
    /// Per-month rankings from an evaluation report file.
    Rank {
        #[arg(long)]
        reports: PathBuf,
    },
    /// Static bundle for the dashboard from a pipeline output directory.
    ExportDashboard {
        #[arg(long)]
        artifacts: PathBuf,
        /// Platforms kept from the latest ranking.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// clean, features, train, evaluate and rank in one go.
    Run {
        /// Raw dataset directory; overrides the configured path.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => {
            let mut c = RunConfig::default();
            c.apply_env(|k| std::env::var(k).ok())?;
            c
        }
    };
    if let Some(s) = cli.seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

fn out_path(cli: &Cli) -> Result<&Path, Error> {
    cli.out.as_deref().ok_or_else(|| Error::Config("--out is required for this command".into()))
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let seeded = cfg.seeded();
    match &cli.command {
        Command::Generate => {
            let out = out_path(cli)?;
            let universe = generate_universe(&seeded.generator)?;
            write_universe(out, &universe)?;
            println!("wrote {} platforms to {}", universe.platforms.len(), out.display());
        }
        Command::Clean { input } => {
            let out = out_path(cli)?;
            let (data, summary) = clean_stage(input, out, &seeded, &seeded.lexicon()?)?;
            println!(
                "kept {} platforms, {} news and {} comments; {} nulls filled",
                data.platforms.len(),
                summary.news.docs_kept,
                summary.comments.docs_kept,
                summary.nulls_filled
            );
        }
        Command::Features { input, cutoff } => {
            let out = out_path(cli)?;
            let data = read_dataset(input)?;
            let bundles = features_stage(&data, *cutoff, &seeded, &seeded.lexicon()?)?;
            write_jsonl(out, &bundles)?;
            println!("wrote {} bundles at {}", bundles.len(), cutoff);
        }
        Command::Train { bundles } => {
            let out = out_path(cli)?;
            let bundles: Vec<FeatureBundle> = read_jsonl(bundles)?;
            let model = train_stage(&bundles, &seeded)?;
            save_checkpoint(out, &model)?;
            let last = model.history.last().map_or(f64::NAN, |e| e.train_loss);
            println!("trained {} parameters, final loss {:.4}", model.params.len(), last);
        }
        Command::Evaluate { data, months } => {
            let out = out_path(cli)?;
            let months = match months {
                Some(m) => parse_month_range(m).map_err(|e| Error::Config(format!("--months: {e}")))?,
                None => seeded.eval_months()?,
            };
            let dataset = read_dataset(data)?;
            let reports = evaluate_stage(&dataset, &months, &seeded, &seeded.lexicon()?)?;
            for r in &reports {
                println!("{} auc {:.4} accuracy {:.4} ({} platforms)", r.cutoff_month, r.auc, r.accuracy, r.platforms);
            }
            write_json(out, &ReportsFile { schema_version: SCHEMA_VERSION, reports })?;
        }
        Command::Rank { reports } => {
            let out = out_path(cli)?;
            let file: ReportsFile = read_json(reports)?;
            write_json(out, &RankingsFile::from_reports(&file.reports))?;
            println!("ranked {} months", file.reports.len());
        }
        Command::ExportDashboard { artifacts, limit } => {
            let out = out_path(cli)?;
            let mut dash = seeded.dashboard.clone();
            if let Some(l) = limit {
                dash.limit = *l;
            }
            let bundle = export_dashboard(artifacts, out, &dash)?;
            println!("exported {} platforms to {}", bundle.platforms.platforms.len(), out.display());
        }
        Command::Run { .. } => unreachable!("handled by run"),
    }
    Ok(())
}

fn run(cli: &Cli, data: &Option<PathBuf>) -> ExitCode {
    let mut cfg = match load_config(cli) {
        Ok(c) => c,
        Err(e) => return fail(&format!("stage:config: {e}"), e.exit_code()),
    };
    if let Some(d) = data {
        cfg.paths.data = d.clone();
    }
    if let Some(o) = &cli.out {
        cfg.paths.out = o.clone();
    }
    match run_pipeline(&cfg) {
        Ok(out) => {
            for r in &out.reports {
                println!("{} auc {:.4} accuracy {:.4}", r.cutoff_month, r.auc, r.accuracy);
            }
            println!("artifacts in {}", out.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e.to_string(), e.exit_code()),
    }
}

fn fail(msg: &str, code: i32) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Command::Run { data } = &cli.command {
        return run(&cli, data);
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e.to_string(), e.exit_code()),
    }
}
