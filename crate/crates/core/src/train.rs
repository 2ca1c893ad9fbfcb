//! Training loop: length-T windows over episodes, Gaussian-NLL (or MSE)
//! loss, Adam, early stopping on a validation split.

use crate::dataset::EpisodeRecord;
use crate::error::{Error, Result};
use crate::mlcrnn::{backward_sequence, forward_sequence, MlCrnnConfig, MlCrnnModel, StepGrad};
use crate::nn_core::{adam_step, AdamConfig, AdamState, DropoutMode, Tensor};
use crate::radar_sim::Image;
use crate::uncertainty::gaussian_nll_with_grads;
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Gaussian negative log-likelihood through the covariance head.
    Ml,
    /// Plain squared error on the state estimate (covariance head untrained).
    Mse,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Window length T.
    pub seq_len: usize,
    /// Stride between window starts (T/2 by default: 50% overlap).
    pub window_stride: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Early-stop patience: epochs without validation improvement.
    pub patience: usize,
    pub dropout_p: f64,
    pub seed: u64,
    pub loss: LossKind,
    /// Fraction of episodes held out for validation.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seq_len: 10,
            window_stride: 5,
            batch_size: 32,
            learning_rate: 1e-3,
            max_epochs: 60,
            patience: 10,
            dropout_p: 0.33,
            seed: 0,
            loss: LossKind::Ml,
            val_fraction: 0.15,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seq_len < 1 {
            return Err(Error::InvalidSpec("seq_len must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidSpec("dropout_p must be in [0, 1)".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction <= 0.5) {
            return Err(Error::InvalidSpec("val_fraction must be in (0, 0.5]".into()));
        }
        if self.batch_size < 1 || self.window_stride < 1 || self.max_epochs < 1 {
            return Err(Error::InvalidSpec("batch/stride/epochs must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidSpec("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Trace of the epistemic covariance on a fixed training probe
    /// (diagnostic only; not a stop criterion).
    pub epistemic_trace: f64,
    pub skipped_batches: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss: LossKind,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub curve: Vec<EpochStats>,
}

/// deterministic per-purpose seed derivation (splitmix64 step).
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

type FrameTensors = Vec<(Tensor<f32>, Tensor<f32>)>;

fn image_to_tensor(img: &Image) -> Tensor<f32> {
    Tensor::from_vec(&[img.rows, img.cols, 1], img.data.clone()).expect("image dims")
}

fn episode_tensors(ep: &EpisodeRecord) -> FrameTensors {
    ep.frames
        .iter()
        .map(|f| (image_to_tensor(&f.rd), image_to_tensor(&f.ra)))
        .collect()
}

#[derive(Clone, Copy)]
struct Window {
    episode: usize,
    start: usize,
}

fn windows_of(episodes: &[EpisodeRecord], seq_len: usize, stride: usize) -> Vec<(usize, Vec<Window>)> {
    episodes
        .iter()
        .enumerate()
        .map(|(e, ep)| {
            let mut w = Vec::new();
            let mut start = 0;
            while start + seq_len <= ep.len() {
                w.push(Window { episode: e, start });
                start += stride;
            }
            (e, w)
        })
        .collect()
}

/// Loss and head-output gradients over one window. Targets are the
/// ground-truth states; the loss is averaged over the T steps.
fn window_loss_and_grads(
    model: &MlCrnnModel<f32>,
    tensors: &FrameTensors,
    targets: &[crate::types::State],
    window: Window,
    cfg: &TrainConfig,
    pass_seed: u64,
) -> Result<(f64, crate::mlcrnn::MlCrnnParams<f32>)> {
    let t_len = cfg.seq_len;
    let frames: Vec<(Tensor<f32>, Tensor<f32>)> = tensors
        [window.start..window.start + t_len]
        .iter()
        .cloned()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(pass_seed);
    let (outs, _, cache) = forward_sequence(model, &frames, DropoutMode::Train, &mut rng)?;
    let scale = 1.0 / t_len as f32;
    let mut total = 0.0f64;
    let mut step_grads = Vec::with_capacity(t_len);
    for (t, o) in outs.iter().enumerate() {
        let target = &targets[window.start + t];
        let x: [f32; 4] = std::array::from_fn(|i| target.0[i] as f32);
        match cfg.loss {
            LossKind::Ml => {
                let (loss, g) = gaussian_nll_with_grads(&x, &o.x_hat, &o.alpha, &o.beta)?;
                total += loss as f64;
                step_grads.push(StepGrad {
                    x_hat: g.x_hat.map(|v| v * scale),
                    alpha: g.alpha.map(|v| v * scale),
                    beta: g.beta.map(|v| v * scale),
                });
            }
            LossKind::Mse => {
                let mut g = StepGrad::default();
                let mut loss = 0.0f32;
                for i in 0..4 {
                    let e = o.x_hat[i] - x[i];
                    loss += e * e;
                    g.x_hat[i] = 2.0 * e * scale;
                }
                total += loss as f64;
                step_grads.push(g);
            }
        }
    }
    let grads = backward_sequence(model, &cache, &step_grads)?;
    Ok((total / t_len as f64, grads))
}

/// Validation loss (dropout disabled) over a window list.
fn evaluate_loss(
    model: &MlCrnnModel<f32>,
    data: &[(FrameTensors, &EpisodeRecord)],
    windows: &[Window],
    cfg: &TrainConfig,
) -> Result<f64> {
    let losses: Vec<Result<f64>> = windows
        .par_iter()
        .map(|w| {
            let (tensors, ep) = &data[w.episode];
            let frames: Vec<_> = tensors[w.start..w.start + cfg.seq_len].iter().cloned().collect();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let (outs, _, _) = forward_sequence(model, &frames, DropoutMode::Eval, &mut rng)?;
            let mut total = 0.0f64;
            for (t, o) in outs.iter().enumerate() {
                let target = &ep.states[w.start + t];
                let x: [f32; 4] = std::array::from_fn(|i| target.0[i] as f32);
                match cfg.loss {
                    LossKind::Ml => {
                        let (chol, _) = crate::uncertainty::build_covariance(&o.alpha, &o.beta)?;
                        total += crate::uncertainty::gaussian_nll(&x, &o.x_hat, &chol)? as f64;
                    }
                    LossKind::Mse => {
                        total += (0..4).map(|i| ((o.x_hat[i] - x[i]) as f64).powi(2)).sum::<f64>();
                    }
                }
            }
            Ok(total / cfg.seq_len as f64)
        })
        .collect();
    let mut sum = 0.0;
    let mut n = 0usize;
    for l in losses {
        sum += l?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidArgument("no validation windows".into()));
    }
    Ok(sum / n as f64)
}

/// Epistemic diagnostic: trace of the MC-dropout state spread on one probe
/// window.
fn epistemic_probe(
    model: &MlCrnnModel<f32>,
    data: &[(FrameTensors, &EpisodeRecord)],
    window: Window,
    cfg: &TrainConfig,
) -> Result<f64> {
    let m = 8usize;
    let (tensors, _) = &data[window.episode];
    let frames: Vec<_> = tensors[window.start..window.start + cfg.seq_len]
        .iter()
        .cloned()
        .collect();
    let mut finals = Vec::with_capacity(m);
    for k in 0..m {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0xE915 + k as u64));
        let (outs, _, _) = forward_sequence(model, &frames, DropoutMode::Mc, &mut rng)?;
        let last = outs.last().unwrap();
        finals.push(nalgebra::Vector4::new(
            last.x_hat[0] as f64,
            last.x_hat[1] as f64,
            last.x_hat[2] as f64,
            last.x_hat[3] as f64,
        ));
    }
    let samples: Vec<_> = finals
        .into_iter()
        .map(|x| (x, nalgebra::Matrix4::zeros()))
        .collect();
    let (_, cov) = crate::uncertainty::fuse_mc_samples(&samples)?;
    Ok(cov.epistemic.trace())
}

/// Trains a model on the episodes. Episodes are split into train/validation
/// by episode (the last `val_fraction` of them, at least one); early stopping
/// restores the best-validation parameters.
pub fn train(
    episodes: &[EpisodeRecord],
    arch: MlCrnnConfig,
    cfg: &TrainConfig,
) -> Result<(MlCrnnModel<f32>, TrainReport)> {
    cfg.validate()?;
    arch.validate()?;
    if episodes.is_empty() {
        return Err(Error::InvalidArgument("no training episodes".into()));
    }
    for (i, ep) in episodes.iter().enumerate() {
        if ep.len() < 2 * cfg.seq_len {
            return Err(Error::InvalidSpec(format!(
                "episode {i} has {} frames; training needs at least 2*T = {}",
                ep.len(),
                2 * cfg.seq_len
            )));
        }
    }
    let arch = MlCrnnConfig {
        dropout_p: cfg.dropout_p,
        ..arch
    };
    let mut model = MlCrnnModel::<f32>::init(arch, cfg.seed)?;

    let n_val = ((episodes.len() as f64 * cfg.val_fraction).round() as usize)
        .clamp(1, episodes.len().saturating_sub(1).max(1));
    let n_train = episodes.len() - n_val;
    if n_train == 0 {
        return Err(Error::InvalidSpec("validation split leaves no training episodes".into()));
    }

    let data: Vec<(FrameTensors, &EpisodeRecord)> = episodes
        .iter()
        .map(|ep| (episode_tensors(ep), ep))
        .collect();
    let per_episode = windows_of(episodes, cfg.seq_len, cfg.window_stride);
    let mut train_windows: Vec<Window> = Vec::new();
    let mut val_windows: Vec<Window> = Vec::new();
    for (e, ws) in per_episode {
        if e < n_train {
            train_windows.extend(ws);
        } else {
            val_windows.extend(ws);
        }
    }
    if train_windows.is_empty() || val_windows.is_empty() {
        return Err(Error::InvalidSpec("empty train or validation window set".into()));
    }

    let mut adam = AdamState::new(AdamConfig {
        lr: cfg.learning_rate,
        ..AdamConfig::default()
    });
    let mut curve = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params = model.params.clone();
    let mut epochs_without_improvement = 0usize;

    for epoch in 0..cfg.max_epochs {
        let mut order = train_windows.clone();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 1000 + epoch as u64));
        order.shuffle(&mut shuffle_rng);

        let mut epoch_loss = 0.0;
        let mut epoch_batches = 0usize;
        let mut skipped = 0usize;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let results: Vec<Result<(f64, crate::mlcrnn::MlCrnnParams<f32>)>> = batch
                .par_iter()
                .enumerate()
                .map(|(i, w)| {
                    let pass_seed = mix_seed(
                        cfg.seed,
                        ((epoch as u64) << 40) ^ ((b as u64) << 20) ^ i as u64,
                    );
                    let (tensors, ep) = &data[w.episode];
                    window_loss_and_grads(&model, tensors, &ep.states, *w, cfg, pass_seed)
                })
                .collect();

            let mut batch_loss = 0.0;
            let mut merged: Option<crate::mlcrnn::MlCrnnParams<f32>> = None;
            let mut ok = true;
            for r in results {
                match r {
                    Ok((loss, grads)) if loss.is_finite() => {
                        batch_loss += loss;
                        match merged.as_mut() {
                            Some(m) => m.add_assign(&grads),
                            None => merged = Some(grads),
                        }
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            let Some(mut grads) = merged else {
                skipped += 1;
                continue;
            };
            if !ok || !grads.all_finite() {
                skipped += 1;
                continue;
            }
            grads.scale(1.0 / batch.len() as f32);
            let mut params = model.params.tensors_mut();
            let grad_list = grads.tensors();
            match adam_step(&mut params, &grad_list, &mut adam) {
                Ok(()) => {
                    epoch_loss += batch_loss / batch.len() as f64;
                    epoch_batches += 1;
                }
                Err(Error::Numeric(_)) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        if epoch_batches == 0 {
            return Err(Error::Numeric(format!(
                "training diverged: every batch in epoch {epoch} was skipped"
            )));
        }

        let val_loss = evaluate_loss(&model, &data, &val_windows, cfg)?;
        let epistemic_trace = epistemic_probe(&model, &data, train_windows[0], cfg)?;
        curve.push(EpochStats {
            epoch,
            train_loss: epoch_loss / epoch_batches as f64,
            val_loss,
            epistemic_trace,
            skipped_batches: skipped,
        });

        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_params = model.params.clone();
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement >= cfg.patience {
                break;
            }
        }
    }

    model.params = best_params;
    Ok((
        model,
        TrainReport {
            loss: cfg.loss,
            epochs_run: curve.len(),
            best_epoch,
            best_val_loss: best_val,
            curve,
        },
    ))
}

/// Writes the loss curves CSV next to a checkpoint.
pub fn write_train_curves(path: &std::path::Path, report: &TrainReport) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "epoch,train_loss,val_loss,epistemic_trace,skipped_batches")?;
    for s in &report.curve {
        writeln!(
            w,
            "{},{},{},{},{}",
            s.epoch, s.train_loss, s.val_loss, s.epistemic_trace, s.skipped_batches
        )?;
    }
    Ok(())
}
