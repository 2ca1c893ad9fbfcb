//! Streaming one-frame-at-a-time inference with parallel MC-dropout replicas.

use crate::error::{Error, Result};
use crate::mlcrnn::forward::{frame_forward, HeadOutputs};
use crate::mlcrnn::model::MlCrnnModel;
use crate::nn_core::{dropout_mask, DropoutMode, Scalar, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Replica<T: Scalar> {
    h: Vec<T>,
    /// Recurrent dropout mask, drawn once per track (Mc mode only).
    rec_mask: Option<Vec<T>>,
    /// Per-replica stream for the fresh FC masks drawn each frame.
    rng: ChaCha8Rng,
}

/// Hidden state of a streaming track: one independent hidden state (and mask
/// set) per MC replica.
pub struct StreamState<T: Scalar> {
    replicas: Vec<Replica<T>>,
    mode: DropoutMode,
    pub frame_index: usize,
}

impl<T: Scalar> StreamState<T> {
    pub fn replica_count(&self) -> usize {
        self.replicas.len()
    }

    pub fn hidden(&self, replica: usize) -> &[T] {
        &self.replicas[replica].h
    }
}

/// Initializes a streaming state with `m` replicas and zero hidden states.
/// In `Mc` mode each replica draws its own recurrent dropout mask, held
/// fixed for the whole track.
pub fn stream_init<T: Scalar>(
    model: &MlCrnnModel<T>,
    m: usize,
    mode: DropoutMode,
    seed: u64,
) -> Result<StreamState<T>> {
    if m < 1 {
        return Err(Error::InvalidArgument("stream_init needs M >= 1".into()));
    }
    if mode == DropoutMode::Train {
        return Err(Error::InvalidArgument(
            "streaming inference runs in Mc or Eval mode".into(),
        ));
    }
    let p = model.config.dropout_p;
    let replicas = (0..m)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let rec_mask = if mode == DropoutMode::Mc && p > 0.0 {
                Some(dropout_mask(model.config.hidden_dim, p, &mut rng)?)
            } else {
                None
            };
            Ok(Replica {
                h: vec![T::zero(); model.config.hidden_dim],
                rec_mask,
                rng,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StreamState {
        replicas,
        mode,
        frame_index: 0,
    })
}

/// Advances every replica by one frame and returns the per-replica head
/// outputs. Replicas are independent and evaluated in parallel.
pub fn stream_step<T: Scalar>(
    model: &MlCrnnModel<T>,
    state: &mut StreamState<T>,
    rd_img: &Tensor<T>,
    ra_img: &Tensor<T>,
) -> Result<Vec<HeadOutputs<T>>> {
    let p = model.config.dropout_p;
    let mc = state.mode == DropoutMode::Mc && p > 0.0;
    let outputs: Vec<Result<HeadOutputs<T>>> = state
        .replicas
        .par_iter_mut()
        .map(|rep| {
            let fc_mask = if mc {
                Some(dropout_mask(model.config.concat_dim(), p, &mut rep.rng)?)
            } else {
                None
            };
            let (h_new, cache) = frame_forward(
                model,
                rd_img.clone(),
                ra_img.clone(),
                fc_mask,
                &rep.h,
                rep.rec_mask.as_deref(),
            )?;
            rep.h = h_new;
            Ok(cache.heads)
        })
        .collect();
    state.frame_index += 1;
    outputs.into_iter().collect()
}
