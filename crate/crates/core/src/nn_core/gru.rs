//! GRU cell with backpropagation through time.
//!
//! Gate convention (pinned by unit test): with update gate `z`, reset gate
//! `r` and candidate `n`,
//!
//! ```text
//! z = σ(W_z [x; h]+ b_z)
//! r = σ(W_r [x; h]+ b_r)
//! n = tanh(W_n [x; r⊙h] + b_n)
//! h' = (1 − z)⊙h + z⊙n
//! ```
//!
//! Each gate has one weight matrix over the concatenated `[input; hidden]`
//! vector and a single bias. Recurrent dropout, when enabled, multiplies the
//! hidden state fed to the gates by one mask held fixed across the whole
//! sequence; the carried state `h'` itself is not masked.

use crate::error::{Error, Result};
use crate::nn_core::tensor::{Scalar, Tensor};

#[derive(Debug, Clone)]
pub struct GruCell<T: Scalar> {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Update gate weights `[hidden, input+hidden]` and bias `[hidden]`.
    pub w_z: Tensor<T>,
    pub b_z: Tensor<T>,
    /// Reset gate.
    pub w_r: Tensor<T>,
    pub b_r: Tensor<T>,
    /// Candidate.
    pub w_n: Tensor<T>,
    pub b_n: Tensor<T>,
}

impl<T: Scalar> GruCell<T> {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let cat = input_dim + hidden_dim;
        GruCell {
            input_dim,
            hidden_dim,
            w_z: Tensor::zeros(&[hidden_dim, cat]),
            b_z: Tensor::zeros(&[hidden_dim]),
            w_r: Tensor::zeros(&[hidden_dim, cat]),
            b_r: Tensor::zeros(&[hidden_dim]),
            w_n: Tensor::zeros(&[hidden_dim, cat]),
            b_n: Tensor::zeros(&[hidden_dim]),
        }
    }

    pub fn parameter_count(&self) -> usize {
        3 * (self.hidden_dim * (self.input_dim + self.hidden_dim) + self.hidden_dim)
    }
}

/// Values cached by [`gru_step`] for the backward pass.
#[derive(Debug, Clone)]
pub struct GruCache<T: Scalar> {
    pub x: Vec<T>,
    pub h_prev: Vec<T>,
    /// Hidden state after the recurrent-dropout mask (equals `h_prev` when
    /// no mask is active).
    pub h_masked: Vec<T>,
    pub z: Vec<T>,
    pub r: Vec<T>,
    pub n: Vec<T>,
    pub h_new: Vec<T>,
}

fn sigmoid<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

/// `W [a; b] + bias` for gate matrices over the concatenated vector.
fn gate_affine<T: Scalar>(w: &Tensor<T>, bias: &Tensor<T>, a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len() + b.len();
    let wd = w.data();
    let mut out = bias.data().to_vec();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &wd[i * n..(i + 1) * n];
        let mut acc = T::zero();
        for (wv, av) in row[..a.len()].iter().zip(a) {
            acc += *wv * *av;
        }
        for (wv, bv) in row[a.len()..].iter().zip(b) {
            acc += *wv * *bv;
        }
        *o += acc;
    }
    out
}

/// One GRU step. `rec_mask`, when present, is the per-sequence recurrent
/// dropout mask (entries 0 or 1/(1−p)).
pub fn gru_step<T: Scalar>(
    cell: &GruCell<T>,
    x: &[T],
    h_prev: &[T],
    rec_mask: Option<&[T]>,
) -> Result<(Vec<T>, GruCache<T>)> {
    if x.len() != cell.input_dim || h_prev.len() != cell.hidden_dim {
        return Err(Error::Shape(format!(
            "gru_step: expected input {} and hidden {}, got {} and {}",
            cell.input_dim,
            cell.hidden_dim,
            x.len(),
            h_prev.len()
        )));
    }
    let h_masked: Vec<T> = match rec_mask {
        Some(m) => h_prev.iter().zip(m).map(|(&h, &mv)| h * mv).collect(),
        None => h_prev.to_vec(),
    };
    let z: Vec<T> = gate_affine(&cell.w_z, &cell.b_z, x, &h_masked)
        .into_iter()
        .map(sigmoid)
        .collect();
    let r: Vec<T> = gate_affine(&cell.w_r, &cell.b_r, x, &h_masked)
        .into_iter()
        .map(sigmoid)
        .collect();
    let rh: Vec<T> = r.iter().zip(&h_masked).map(|(&rv, &hv)| rv * hv).collect();
    let n: Vec<T> = gate_affine(&cell.w_n, &cell.b_n, x, &rh)
        .into_iter()
        .map(|v| v.tanh())
        .collect();
    let h_new: Vec<T> = h_prev
        .iter()
        .zip(&z)
        .zip(&n)
        .map(|((&h, &zv), &nv)| (T::one() - zv) * h + zv * nv)
        .collect();
    let cache = GruCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        h_masked,
        z,
        r,
        n,
        h_new: h_new.clone(),
    };
    Ok((h_new, cache))
}

/// Gradient accumulators for a GRU cell, shaped like the cell itself.
pub type GruGrads<T> = GruCell<T>;

fn accumulate_gate_backward<T: Scalar>(
    w: &Tensor<T>,
    dw: &mut Tensor<T>,
    db: &mut Tensor<T>,
    da: &[T],
    first: &[T],
    second: &[T],
    d_first: &mut [T],
    d_second: &mut [T],
) {
    let n = first.len() + second.len();
    let wd = w.data();
    let dwd = dw.data_mut();
    let dbd = db.data_mut();
    for (i, &g) in da.iter().enumerate() {
        dbd[i] += g;
        let row = &wd[i * n..(i + 1) * n];
        let drow = &mut dwd[i * n..(i + 1) * n];
        for j in 0..first.len() {
            drow[j] += g * first[j];
            d_first[j] += g * row[j];
        }
        for j in 0..second.len() {
            drow[first.len() + j] += g * second[j];
            d_second[j] += g * row[first.len() + j];
        }
    }
}

/// Backward pass of one GRU step. Accumulates weight gradients into `grads`
/// and returns `(dx, dh_prev)`.
pub fn gru_step_backward<T: Scalar>(
    cell: &GruCell<T>,
    cache: &GruCache<T>,
    grad_h_new: &[T],
    rec_mask: Option<&[T]>,
    grads: &mut GruGrads<T>,
) -> (Vec<T>, Vec<T>) {
    let hd = cell.hidden_dim;
    let id = cell.input_dim;
    let mut dx = vec![T::zero(); id];
    let mut dh_masked = vec![T::zero(); hd];
    // Direct path h' = (1 − z) ⊙ h_prev + z ⊙ n.
    let mut dh_prev: Vec<T> = grad_h_new
        .iter()
        .zip(&cache.z)
        .map(|(&g, &z)| g * (T::one() - z))
        .collect();

    // Candidate gate.
    let da_n: Vec<T> = grad_h_new
        .iter()
        .zip(&cache.z)
        .zip(&cache.n)
        .map(|((&g, &z), &n)| g * z * (T::one() - n * n))
        .collect();
    let rh: Vec<T> = cache
        .r
        .iter()
        .zip(&cache.h_masked)
        .map(|(&r, &h)| r * h)
        .collect();
    let mut d_rh = vec![T::zero(); hd];
    accumulate_gate_backward(
        &cell.w_n,
        &mut grads.w_n,
        &mut grads.b_n,
        &da_n,
        &cache.x,
        &rh,
        &mut dx,
        &mut d_rh,
    );
    let mut dr = vec![T::zero(); hd];
    for i in 0..hd {
        dr[i] = d_rh[i] * cache.h_masked[i];
        dh_masked[i] += d_rh[i] * cache.r[i];
    }

    // Reset gate.
    let da_r: Vec<T> = dr
        .iter()
        .zip(&cache.r)
        .map(|(&g, &r)| g * r * (T::one() - r))
        .collect();
    accumulate_gate_backward(
        &cell.w_r,
        &mut grads.w_r,
        &mut grads.b_r,
        &da_r,
        &cache.x,
        &cache.h_masked,
        &mut dx,
        &mut dh_masked,
    );

    // Update gate: dz = g ⊙ (n − h_prev).
    let da_z: Vec<T> = grad_h_new
        .iter()
        .zip(&cache.n)
        .zip(&cache.h_prev)
        .zip(&cache.z)
        .map(|(((&g, &n), &h), &z)| g * (n - h) * z * (T::one() - z))
        .collect();
    accumulate_gate_backward(
        &cell.w_z,
        &mut grads.w_z,
        &mut grads.b_z,
        &da_z,
        &cache.x,
        &cache.h_masked,
        &mut dx,
        &mut dh_masked,
    );

    // Through the recurrent-dropout mask back to the carried state.
    match rec_mask {
        Some(m) => {
            for i in 0..hd {
                dh_prev[i] += dh_masked[i] * m[i];
            }
        }
        None => {
            for i in 0..hd {
                dh_prev[i] += dh_masked[i];
            }
        }
    }
    (dx, dh_prev)
}
