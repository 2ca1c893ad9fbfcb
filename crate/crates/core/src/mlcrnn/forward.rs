//! Sequence forward and backward passes.

use crate::error::{Error, Result};
use crate::mlcrnn::model::{MlCrnnModel, MlCrnnParams, ALPHA_DIM, BETA_DIM, CONV_LAYERS, STATE_DIM};
use crate::nn_core::{
    conv2d, conv2d_backward, dropout_mask, elu, elu_backward, fully_connected,
    fully_connected_backward, gru_step, gru_step_backward, DropoutMode, GruCache, Scalar, Tensor,
};
use rand::Rng;

/// Per-step head outputs (post-activation): `x̂`, `α = exp(·) > 0`,
/// `β = tanh(·) ∈ (−1, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct HeadOutputs<T: Scalar> {
    pub x_hat: [T; STATE_DIM],
    pub alpha: [T; ALPHA_DIM],
    pub beta: [T; BETA_DIM],
}

pub(crate) struct BranchCache<T: Scalar> {
    image: Tensor<T>,
    /// Post-ELU output of each conv layer.
    outputs: Vec<Tensor<T>>,
}

pub(crate) struct FrameCache<T: Scalar> {
    rd: BranchCache<T>,
    ra: BranchCache<T>,
    y_dropped: Tensor<T>,
    fc_mask: Option<Vec<T>>,
    /// Compressed observation (post-ELU).
    obs: Tensor<T>,
    gru: GruCache<T>,
    pub(crate) heads: HeadOutputs<T>,
}

/// Everything needed to backpropagate through a `T`-step unroll.
pub struct SequenceCache<T: Scalar> {
    pub(crate) frames: Vec<FrameCache<T>>,
    pub(crate) rec_mask: Option<Vec<T>>,
}

fn check_image<T: Scalar>(model: &MlCrnnModel<T>, img: &Tensor<T>, name: &str) -> Result<()> {
    let want = [model.config.input_h, model.config.input_w, 1];
    if img.shape() != want {
        return Err(Error::Shape(format!(
            "{name} image must be {:?}, got {:?}",
            want,
            img.shape()
        )));
    }
    Ok(())
}

fn branch_forward<T: Scalar>(
    layers: &[crate::mlcrnn::model::ConvLayer<T>],
    image: Tensor<T>,
) -> Result<BranchCache<T>> {
    let mut outputs = Vec::with_capacity(CONV_LAYERS);
    let mut x = &image;
    for layer in layers {
        let pre = conv2d(x, &layer.kernels, &layer.bias, (2, 2))?;
        outputs.push(elu(&pre));
        x = outputs.last().unwrap();
    }
    Ok(BranchCache { image, outputs })
}

fn heads_forward<T: Scalar>(params: &MlCrnnParams<T>, h: &[T]) -> Result<HeadOutputs<T>> {
    let ht = Tensor::from_vec(&[h.len()], h.to_vec())?;
    let x_hat = fully_connected(&ht, &params.head_x_w, &params.head_x_b)?;
    let a_pre = fully_connected(&ht, &params.head_a_w, &params.head_a_b)?;
    let b_pre = fully_connected(&ht, &params.head_b_w, &params.head_b_b)?;
    let mut out = HeadOutputs {
        x_hat: [T::zero(); STATE_DIM],
        alpha: [T::zero(); ALPHA_DIM],
        beta: [T::zero(); BETA_DIM],
    };
    out.x_hat.copy_from_slice(x_hat.data());
    for (o, v) in out.alpha.iter_mut().zip(a_pre.data()) {
        *o = v.exp();
    }
    for (o, v) in out.beta.iter_mut().zip(b_pre.data()) {
        *o = v.tanh();
    }
    Ok(out)
}

/// One frame through conv block, GRU step and heads. `fc_mask` is the
/// dropout mask over the concatenated conv features (None in eval mode);
/// `rec_mask` is the per-sequence recurrent dropout mask.
pub(crate) fn frame_forward<T: Scalar>(
    model: &MlCrnnModel<T>,
    rd_img: Tensor<T>,
    ra_img: Tensor<T>,
    fc_mask: Option<Vec<T>>,
    h_prev: &[T],
    rec_mask: Option<&[T]>,
) -> Result<(Vec<T>, FrameCache<T>)> {
    check_image(model, &rd_img, "RD")?;
    check_image(model, &ra_img, "RA")?;
    let p = &model.params;
    let rd = branch_forward(&p.rd_conv, rd_img)?;
    let ra = branch_forward(&p.ra_conv, ra_img)?;

    // RD branch first, then RA; row-major flatten (checkpoint-pinned order).
    let flat = model.config.branch_flat_dim();
    let mut y = Vec::with_capacity(2 * flat);
    y.extend_from_slice(rd.outputs[CONV_LAYERS - 1].data());
    y.extend_from_slice(ra.outputs[CONV_LAYERS - 1].data());

    let y_dropped = match &fc_mask {
        Some(mask) => {
            debug_assert_eq!(mask.len(), y.len());
            Tensor::from_vec(
                &[y.len()],
                y.iter().zip(mask).map(|(&v, &m)| v * m).collect(),
            )?
        }
        None => Tensor::from_vec(&[y.len()], y)?,
    };
    let fc_pre = fully_connected(&y_dropped, &p.fc_w, &p.fc_b)?;
    let obs = elu(&fc_pre);

    let (h_new, gru_cache) = gru_step(&p.gru, obs.data(), h_prev, rec_mask)?;
    let heads = heads_forward(p, &h_new)?;

    Ok((
        h_new,
        FrameCache {
            rd,
            ra,
            y_dropped,
            fc_mask,
            obs,
            gru: gru_cache,
            heads,
        },
    ))
}

/// The conv block alone: maps one RD/RA image pair to the compressed
/// observation `o_t ∈ ℝ^obs_dim`.
pub fn conv_block<T: Scalar, R: Rng>(
    model: &MlCrnnModel<T>,
    rd_img: &Tensor<T>,
    ra_img: &Tensor<T>,
    mode: DropoutMode,
    rng: &mut R,
) -> Result<Tensor<T>> {
    check_image(model, rd_img, "RD")?;
    check_image(model, ra_img, "RA")?;
    let p = &model.params;
    let rd = branch_forward(&p.rd_conv, rd_img.clone())?;
    let ra = branch_forward(&p.ra_conv, ra_img.clone())?;
    let mut y = Vec::with_capacity(model.config.concat_dim());
    y.extend_from_slice(rd.outputs[CONV_LAYERS - 1].data());
    y.extend_from_slice(ra.outputs[CONV_LAYERS - 1].data());
    if mode != DropoutMode::Eval && model.config.dropout_p > 0.0 {
        let mask: Vec<T> = dropout_mask(y.len(), model.config.dropout_p, rng)?;
        for (v, m) in y.iter_mut().zip(&mask) {
            *v = *v * *m;
        }
    }
    let y = Tensor::from_vec(&[y.len()], y)?;
    let fc_pre = fully_connected(&y, &p.fc_w, &p.fc_b)?;
    Ok(elu(&fc_pre))
}

/// Runs the model over a `T`-step sequence from a zero hidden state.
/// Returns per-step head outputs, per-step hidden states, and the cache for
/// [`backward_sequence`].
///
/// In `Train`/`Mc` mode a fresh FC dropout mask is drawn per frame and one
/// recurrent dropout mask is drawn for the whole sequence.
pub fn forward_sequence<T: Scalar, R: Rng>(
    model: &MlCrnnModel<T>,
    frames: &[(Tensor<T>, Tensor<T>)],
    mode: DropoutMode,
    rng: &mut R,
) -> Result<(Vec<HeadOutputs<T>>, Vec<Vec<T>>, SequenceCache<T>)> {
    if frames.is_empty() {
        return Err(Error::InvalidArgument("forward_sequence needs T >= 1".into()));
    }
    let p = model.config.dropout_p;
    let dropping = mode != DropoutMode::Eval && p > 0.0;
    let rec_mask: Option<Vec<T>> = if dropping {
        Some(dropout_mask(model.config.hidden_dim, p, rng)?)
    } else {
        None
    };

    let mut h = vec![T::zero(); model.config.hidden_dim];
    let mut outputs = Vec::with_capacity(frames.len());
    let mut hiddens = Vec::with_capacity(frames.len());
    let mut caches = Vec::with_capacity(frames.len());
    for (rd, ra) in frames {
        let fc_mask = if dropping {
            Some(dropout_mask(model.config.concat_dim(), p, rng)?)
        } else {
            None
        };
        let (h_new, cache) =
            frame_forward(model, rd.clone(), ra.clone(), fc_mask, &h, rec_mask.as_deref())?;
        outputs.push(cache.heads);
        hiddens.push(h_new.clone());
        caches.push(cache);
        h = h_new;
    }
    Ok((
        outputs,
        hiddens,
        SequenceCache {
            frames: caches,
            rec_mask,
        },
    ))
}

/// Loss gradient w.r.t. one step's post-activation head outputs.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepGrad<T: Scalar> {
    pub x_hat: [T; STATE_DIM],
    pub alpha: [T; ALPHA_DIM],
    pub beta: [T; BETA_DIM],
}

fn accumulate_linear_backward<T: Scalar>(
    x: &[T],
    w: &Tensor<T>,
    grad_out: &[T],
    dw: &mut Tensor<T>,
    db: &mut Tensor<T>,
    dx: &mut [T],
) {
    let n = x.len();
    let wd = w.data();
    let dwd = dw.data_mut();
    let dbd = db.data_mut();
    for (i, &g) in grad_out.iter().enumerate() {
        dbd[i] += g;
        let row = &wd[i * n..(i + 1) * n];
        let drow = &mut dwd[i * n..(i + 1) * n];
        for j in 0..n {
            drow[j] += g * x[j];
            dx[j] += g * row[j];
        }
    }
}

fn branch_backward<T: Scalar>(
    layers: &[crate::mlcrnn::model::ConvLayer<T>],
    cache: &BranchCache<T>,
    grad_flat: &[T],
    grads: &mut [crate::mlcrnn::model::ConvLayer<T>],
) -> Result<()> {
    let last = &cache.outputs[CONV_LAYERS - 1];
    let mut d_post = Tensor::from_vec(last.shape(), grad_flat.to_vec())?;
    for l in (0..CONV_LAYERS).rev() {
        let d_pre = elu_backward(&cache.outputs[l], &d_post);
        let input = if l == 0 { &cache.image } else { &cache.outputs[l - 1] };
        let g = conv2d_backward(input, &layers[l].kernels, &d_pre, (2, 2))?;
        grads[l].kernels.data_mut().iter_mut().zip(g.kernels.data()).for_each(|(a, b)| *a += *b);
        grads[l].bias.data_mut().iter_mut().zip(g.bias.data()).for_each(|(a, b)| *a += *b);
        d_post = g.input;
    }
    Ok(())
}

/// Backpropagation through the full unroll (heads → GRU BPTT → FC → conv
/// branches). `step_grads[t]` is the loss gradient at step `t` w.r.t. the
/// post-activation head outputs. Returns parameter gradients shaped like the
/// model parameters.
pub fn backward_sequence<T: Scalar>(
    model: &MlCrnnModel<T>,
    cache: &SequenceCache<T>,
    step_grads: &[StepGrad<T>],
) -> Result<MlCrnnParams<T>> {
    if step_grads.len() != cache.frames.len() {
        return Err(Error::Shape(format!(
            "backward_sequence: {} step gradients for {} cached frames",
            step_grads.len(),
            cache.frames.len()
        )));
    }
    let p = &model.params;
    let hd = model.config.hidden_dim;
    let flat = model.config.branch_flat_dim();
    let mut grads = MlCrnnParams::zeros(&model.config);
    let mut dh_carry = vec![T::zero(); hd];

    for (t, frame) in cache.frames.iter().enumerate().rev() {
        let sg = &step_grads[t];
        let heads = &frame.heads;
        let h_t = &frame.gru.h_new;

        // Head activations: α = exp(a_pre) → da_pre = dα ⊙ α;
        // β = tanh(b_pre) → db_pre = dβ ⊙ (1 − β²).
        let mut da_pre = [T::zero(); ALPHA_DIM];
        for i in 0..ALPHA_DIM {
            da_pre[i] = sg.alpha[i] * heads.alpha[i];
        }
        let mut db_pre = [T::zero(); BETA_DIM];
        for i in 0..BETA_DIM {
            db_pre[i] = sg.beta[i] * (T::one() - heads.beta[i] * heads.beta[i]);
        }

        let mut dh = dh_carry.clone();
        accumulate_linear_backward(h_t, &p.head_x_w, &sg.x_hat, &mut grads.head_x_w, &mut grads.head_x_b, &mut dh);
        accumulate_linear_backward(h_t, &p.head_a_w, &da_pre, &mut grads.head_a_w, &mut grads.head_a_b, &mut dh);
        accumulate_linear_backward(h_t, &p.head_b_w, &db_pre, &mut grads.head_b_w, &mut grads.head_b_b, &mut dh);

        let (d_obs, dh_prev) =
            gru_step_backward(&p.gru, &frame.gru, &dh, cache.rec_mask.as_deref(), &mut grads.gru);
        dh_carry = dh_prev;

        // FC layer (obs = ELU(W·y_dropped + b)).
        let d_obs_t = Tensor::from_vec(&[d_obs.len()], d_obs)?;
        let d_fc_pre = elu_backward(&frame.obs, &d_obs_t);
        let (d_y_dropped, d_fc_w, d_fc_b) =
            fully_connected_backward(&frame.y_dropped, &p.fc_w, &d_fc_pre)?;
        grads.fc_w.data_mut().iter_mut().zip(d_fc_w.data()).for_each(|(a, b)| *a += *b);
        grads.fc_b.data_mut().iter_mut().zip(d_fc_b.data()).for_each(|(a, b)| *a += *b);

        // Through the dropout mask back to the concatenated features.
        let d_y: Vec<T> = match &frame.fc_mask {
            Some(mask) => d_y_dropped.data().iter().zip(mask).map(|(&g, &m)| g * m).collect(),
            None => d_y_dropped.into_data(),
        };
        branch_backward(&p.rd_conv, &frame.rd, &d_y[..flat], &mut grads.rd_conv)?;
        branch_backward(&p.ra_conv, &frame.ra, &d_y[flat..], &mut grads.ra_conv)?;
    }
    Ok(grads)
}
