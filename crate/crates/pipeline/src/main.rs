use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use log::{error, warn};
use snowcover::photo::{self, Inputs};
use snowcover::store::PhotoRecord;
use snowcover::{evaluate, service, webcam, JobConfig, Store};

/// Snow cover estimation from mountain photographs and webcams.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Job configuration (JSON).
    #[arg(long, global = true, default_value = "snowcover.json")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read the photo directory, filter photos and write the index.
    Ingest,
    /// Render panoramas and align accepted photos.
    Align,
    /// Classify aligned photos and compute their snow index.
    Classify,
    /// Process a webcam archive over a date range.
    WebcamRun {
        /// Webcam ids; every webcam under `webcam_dir` when omitted.
        #[arg(long = "id")]
        ids: Vec<String>,
        #[arg(long)]
        from: NaiveDate,
        #[arg(long)]
        to: NaiveDate,
    },
    /// Score pipeline outputs against the stored ground truth.
    Evaluate,
    /// Serve the annotation API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Write the photo table as CSV.
    ExportCsv {
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Work finished, but some items failed.
struct Partial(usize);

fn failures(records: &[PhotoRecord]) -> usize {
    records
        .iter()
        .filter(|r| r.flags.iter().any(|f| f.ends_with("_failed") || f.contains("_failed:")))
        .count()
}

fn webcam_ids(cfg: &JobConfig) -> anyhow::Result<Vec<String>> {
    let Some(dir) = &cfg.webcam_dir else {
        bail!("webcam_dir is not set");
    };
    let mut ids: Vec<String> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .flatten()
        .filter(|e| e.path().join("reference_skyline.json").exists())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    ids.sort();
    Ok(ids)
}

fn run(cli: Cli) -> anyhow::Result<Partial> {
    let cfg = JobConfig::load(&cli.config)?;
    cfg.validate()?;
    let store = Store::open(&cfg.output_dir)?;
    match cli.command {
        Command::Ingest => {
            photo::ingest(&cfg, &store, &Inputs::load(&cfg)?)?;
            Ok(Partial(0))
        }
        Command::Align => {
            let inputs = Inputs::load(&cfg)?;
            if !store.photo_index_path().exists() {
                photo::ingest(&cfg, &store, &inputs)?;
            }
            Ok(Partial(failures(&photo::align_photos(&cfg, &store, &inputs)?)))
        }
        Command::Classify => Ok(Partial(failures(&photo::classify_photos(&cfg, &store)?))),
        Command::WebcamRun { ids, from, to } => {
            let ids = if ids.is_empty() { webcam_ids(&cfg)? } else { ids };
            let mut failed = 0;
            for id in &ids {
                match webcam::run_webcam_pipeline(id, from, to, &cfg, &store) {
                    Ok(s) => match s.trend_m_per_day {
                        Some(t) => println!("{id}: {} days, snow line trend {t:+.1} m/day", s.days.len()),
                        None => println!("{id}: {} days, no snow line trend", s.days.len()),
                    },
                    Err(e) => {
                        error!("webcam {id}: {e}");
                        failed += 1;
                    }
                }
            }
            if failed == ids.len() && failed > 0 {
                bail!("every webcam failed");
            }
            Ok(Partial(failed))
        }
        Command::Evaluate => {
            let m = evaluate::evaluate(&cfg, &store)?;
            for c in &m.photos {
                println!(
                    "photos {:<16} TPR@{:.2} {:.3}  AUC {:.3}",
                    c.classifier, c.fpr, c.tpr_at_fpr, c.auc
                );
            }
            for w in &m.webcams {
                for c in &w.classifiers {
                    println!(
                        "{} {:<16} {:<10} TPR@{:.2} {:.3}  AUC {:.3}",
                        w.webcam_id, c.classifier, c.stage, c.fpr, c.tpr_at_fpr, c.auc
                    );
                }
            }
            if let Some(a) = &m.alignment {
                println!(
                    "alignment: {} photos, p_G {:.3}, p_R {:.3} (K={}, {:.2} deg)",
                    a.photos, a.p_global, a.p_refined, a.k, a.theta_deg
                );
            }
            for n in &m.notes {
                warn!("{n}");
            }
            Ok(Partial(0))
        }
        Command::Serve { addr } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(store, addr))?;
            Ok(Partial(0))
        }
        Command::ExportCsv { out } => {
            let csv = photo::photos_csv(&photo::current_records(&store)?, cfg.thresholds.bands)?;
            match out {
                Some(p) => std::fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?,
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(&csv)?;
                }
            }
            Ok(Partial(0))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(Partial(0)) => ExitCode::SUCCESS,
        Ok(Partial(n)) => {
            warn!("{n} item(s) failed");
            ExitCode::from(1)
        }
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(2)
        }
    }
}
