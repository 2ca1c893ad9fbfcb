//! `radartrack`: simulate radar datasets, train the CRNN tracker, run the
//! UKF baseline, and compare the two with calibration diagnostics.
//!
//! Exit codes: 0 on success, 2 for invalid configuration or arguments,
//! 3 for numeric failures (divergence, lost positive definiteness), 1 for
//! everything else.

use clap::{Parser, Subcommand};
use radartrack_core::baseline_ukf::{TuneEpisode, UkfTuneGrids};
use radartrack_core::dataset::{dataset_hash, load_dataset};
use radartrack_core::error::Error;
use radartrack_core::evaluation::{emit_report, read_tracklog, write_tracklog};
use radartrack_core::mlcrnn::{load_checkpoint, save_checkpoint, MlCrnnConfig};
use radartrack_core::train::{train, write_train_curves, TrainConfig};
use radartrack_core::workbench::{
    compare, simulate_dataset, track_dataset, ukf_dataset, write_tuned_ukf, CompareArgs,
    SimConfig,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "radartrack", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset of radar episodes into a directory.
    Simulate {
        /// JSON simulation config (see `SimConfig` in the README).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the CRNN tracker on a dataset directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// JSON training config; defaults apply where absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's loss ("ml" or "mse").
        #[arg(long)]
        loss: Option<String>,
    },
    /// Tune (or run) the DBSCAN + UKF baseline over a dataset.
    Ukf {
        #[arg(long)]
        data: PathBuf,
        /// Run a grid search and write the tuned parameters.
        #[arg(long, default_value_t = false)]
        tune: bool,
        /// Tuned-parameter JSON (output of --tune, input otherwise).
        #[arg(long)]
        params: PathBuf,
        /// Track log CSV output (omit when only tuning).
        #[arg(long)]
        out: Option<PathBuf>,
        /// With --tune: use only the first N episodes for the grid search.
        #[arg(long)]
        tune_episodes: Option<usize>,
        /// Optional JSON file overriding the default search grids.
        #[arg(long)]
        grids: Option<PathBuf>,
    },
    /// Stream a trained model over a dataset with MC dropout.
    Track {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// MC replicas; 1 = deterministic eval pass without covariance
        /// spread.
        #[arg(long, default_value_t = 25)]
        mc: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Method tag written into the log.
        #[arg(long, default_value = "ml-crnn")]
        method: String,
        /// Log no covariance columns (for MSE-trained models).
        #[arg(long, default_value_t = false)]
        no_covariance: bool,
    },
    /// Compute metrics and figure data from track logs.
    Evaluate {
        /// Track log CSVs (one method each).
        #[arg(long, num_args = 1.., required = true)]
        logs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run UKF, MSE-CRNN and ML-CRNN on one test dataset and report.
    Compare {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ml: PathBuf,
        #[arg(long)]
        mse: PathBuf,
        #[arg(long)]
        ukf_params: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 25)]
        mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let mut cfg: SimConfig = read_json(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let summary = simulate_dataset(&cfg, &out)?;
            println!(
                "wrote {} episodes ({} frames) to {} (hash {})",
                summary.episodes,
                summary.frames,
                summary.dir.display(),
                &summary.hash[..16]
            );
        }
        Command::Train {
            data,
            config,
            out,
            seed,
            loss,
        } => {
            let mut cfg: TrainConfig = match config {
                Some(p) => read_json(&p)?,
                None => TrainConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(l) = loss {
                cfg.loss = match l.as_str() {
                    "ml" => radartrack_core::train::LossKind::Ml,
                    "mse" => radartrack_core::train::LossKind::Mse,
                    other => {
                        return Err(Error::InvalidArgument(format!(
                            "loss must be ml or mse, got {other}"
                        )))
                    }
                };
            }
            let (meta, episodes) = load_dataset(&data)?;
            let arch = MlCrnnConfig {
                input_h: meta.radar.range_bins_kept,
                input_w: meta.radar.doppler_bins,
                ..MlCrnnConfig::default()
            };
            let (model, report) = train(&episodes, arch, &cfg)?;
            let hash = dataset_hash(&data)?;
            let loss_name = match report.loss {
                radartrack_core::train::LossKind::Ml => "ml",
                radartrack_core::train::LossKind::Mse => "mse",
            };
            save_checkpoint(&out, &model, cfg.seed, Some(hash), Some(loss_name.into()))?;
            write_train_curves(&out.join("train_curves.csv"), &report)?;
            println!(
                "trained {} epochs (best val {:.4} at epoch {}); checkpoint in {}",
                report.epochs_run,
                report.best_val_loss,
                report.best_epoch,
                out.display()
            );
        }
        Command::Ukf {
            data,
            tune,
            params,
            out,
            tune_episodes,
            grids,
        } => {
            let (meta, episodes) = load_dataset(&data)?;
            let sim: SimConfig = serde_json::from_value(meta.sim.clone())?;
            if tune {
                let take = tune_episodes.unwrap_or(episodes.len()).min(episodes.len());
                let tune_eps: Vec<TuneEpisode> = episodes
                    .iter()
                    .take(take)
                    .map(|ep| TuneEpisode {
                        frames: ep.frames.clone(),
                        truth: ep.states.clone(),
                    })
                    .collect();
                let grid_spec: UkfTuneGrids = match grids {
                    Some(p) => read_json(&p)?,
                    None => UkfTuneGrids::default(),
                };
                let tuned =
                    radartrack_core::baseline_ukf::grid_search_tune(&tune_eps, &meta.radar, &grid_spec)?;
                write_tuned_ukf(&params, &tuned)?;
                println!(
                    "tuned UKF on {} episodes: position RMSE {:.1} cm (params in {})",
                    take,
                    100.0 * tuned.position_rmse_m,
                    params.display()
                );
            }
            if let Some(out) = out {
                let tuned = radartrack_core::workbench::read_tuned_ukf(&params)?;
                let log = ukf_dataset(
                    &episodes,
                    &meta.radar,
                    &tuned.ukf,
                    &tuned.detection,
                    &sim.area,
                    "ukf",
                )?;
                write_tracklog(&out, &log)?;
                println!("wrote UKF track log to {}", out.display());
            }
        }
        Command::Track {
            model,
            data,
            mc,
            out,
            seed,
            method,
            no_covariance,
        } => {
            let (model, _) = load_checkpoint(&model)?;
            let (_, episodes) = load_dataset(&data)?;
            let log = track_dataset(&model, &episodes, mc, seed, &method, !no_covariance)?;
            write_tracklog(&out, &log)?;
            println!("wrote {} frames to {}", log.frames.len(), out.display());
        }
        Command::Evaluate { logs, out } => {
            let parsed = logs
                .iter()
                .map(|p| read_tracklog(p))
                .collect::<Result<Vec<_>, _>>()?;
            emit_report(&parsed, &out)?;
            println!("wrote report to {}", out.display());
        }
        Command::Compare {
            data,
            ml,
            mse,
            ukf_params,
            out,
            mc,
            seed,
        } => {
            let outputs = compare(&CompareArgs {
                data_dir: data,
                ml_checkpoint: ml,
                mse_checkpoint: mse,
                ukf_params,
                out_dir: out,
                mc_samples: mc,
                seed,
            })?;
            println!("comparison manifest: {}", outputs.manifest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidSpec(_) | Error::InvalidArgument(_) | Error::Json(_) | Error::Format(_) => {
                    ExitCode::from(2)
                }
                Error::Numeric(_) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
