//! Convolution, activation, linear and dropout ops with explicit backward
//! passes.

use crate::error::{Error, Result};
use crate::nn_core::tensor::{Scalar, Tensor};
use rand::Rng;

/// Output spatial size and zero-same padding for one axis: the output length
/// is `ceil(len / stride)` and the input is padded so every output position
/// has a full kernel window.
fn same_padding(len: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = len.div_ceil(stride);
    let needed = ((out - 1) * stride + kernel).saturating_sub(len);
    (out, needed / 2)
}

/// Output shape of [`conv2d`] for an `[h, w, c_in]` input.
pub fn conv2d_output_shape(h: usize, w: usize, c_out: usize, stride: (usize, usize)) -> [usize; 3] {
    let (oh, _) = same_padding(h, 3, stride.0);
    let (ow, _) = same_padding(w, 3, stride.1);
    [oh, ow, c_out]
}

fn check_conv_shapes<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<(usize, usize, usize, usize)> {
    let ishape = input.shape();
    let kshape = kernels.shape();
    if ishape.len() != 3 {
        return Err(Error::Shape(format!("conv2d input must be H×W×C, got {ishape:?}")));
    }
    if kshape.len() != 4 || kshape[0] != 3 || kshape[1] != 3 {
        return Err(Error::Shape(format!("conv2d kernels must be 3×3×Cin×Cout, got {kshape:?}")));
    }
    if kshape[2] != ishape[2] {
        return Err(Error::Shape(format!(
            "conv2d channel mismatch: input has {}, kernels expect {}",
            ishape[2], kshape[2]
        )));
    }
    if let Some(b) = bias {
        if b.shape() != [kshape[3]] {
            return Err(Error::Shape(format!(
                "conv2d bias must be [{}], got {:?}",
                kshape[3],
                b.shape()
            )));
        }
    }
    Ok((ishape[0], ishape[1], ishape[2], kshape[3]))
}

/// Unrolls the 3×3 windows into a patch matrix `[oh·ow][9·cin]`; the
/// column index is `(ky·3 + kx)·cin + ci`, matching the kernel layout, so
/// the convolution becomes `patches × kernels`. Out-of-bounds taps stay 0.
fn im2col<T: Scalar>(
    x: &[T],
    h: usize,
    w: usize,
    cin: usize,
    stride: (usize, usize),
    pads: (usize, usize),
    outs: (usize, usize),
) -> Vec<T> {
    let (oh, ow) = outs;
    let ulen = 9 * cin;
    let mut patches = vec![T::zero(); oh * ow * ulen];
    for oy in 0..oh {
        let iy0 = (oy * stride.0) as isize - pads.0 as isize;
        for ky in 0..3usize {
            let iy = iy0 + ky as isize;
            if iy < 0 || iy >= h as isize {
                continue;
            }
            let in_row = &x[iy as usize * w * cin..(iy as usize + 1) * w * cin];
            for ox in 0..ow {
                let ix0 = (ox * stride.1) as isize - pads.1 as isize;
                let dst_base = (oy * ow + ox) * ulen + ky * 3 * cin;
                for kx in 0..3usize {
                    let ix = ix0 + kx as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let src = &in_row[ix as usize * cin..(ix as usize + 1) * cin];
                    patches[dst_base + kx * cin..dst_base + (kx + 1) * cin].copy_from_slice(src);
                }
            }
        }
    }
    patches
}

/// Scatters patch-gradient rows back onto the input (adjoint of [`im2col`]).
fn col2im<T: Scalar>(
    dp: &[T],
    h: usize,
    w: usize,
    cin: usize,
    stride: (usize, usize),
    pads: (usize, usize),
    outs: (usize, usize),
) -> Vec<T> {
    let (oh, ow) = outs;
    let ulen = 9 * cin;
    let mut dx = vec![T::zero(); h * w * cin];
    for oy in 0..oh {
        let iy0 = (oy * stride.0) as isize - pads.0 as isize;
        for ky in 0..3usize {
            let iy = iy0 + ky as isize;
            if iy < 0 || iy >= h as isize {
                continue;
            }
            let out_row = &mut dx[iy as usize * w * cin..(iy as usize + 1) * w * cin];
            for ox in 0..ow {
                let ix0 = (ox * stride.1) as isize - pads.1 as isize;
                let src_base = (oy * ow + ox) * ulen + ky * 3 * cin;
                for kx in 0..3usize {
                    let ix = ix0 + kx as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let dst = &mut out_row[ix as usize * cin..(ix as usize + 1) * cin];
                    for (d, s) in dst.iter_mut().zip(&dp[src_base + kx * cin..]) {
                        *d += *s;
                    }
                }
            }
        }
    }
    dx
}

/// `out[pos] = bias + patches[pos] · k` with `k` as `[ulen][CO]` rows;
/// positions are blocked in fours to keep the accumulators in registers.
fn gemm_forward_fixed<T: Scalar, const CO: usize>(
    patches: &[T],
    k: &[T],
    bias: &[T],
    ulen: usize,
    out: &mut [T],
) {
    let npos = out.len() / CO;
    let mut b = [T::zero(); CO];
    b.copy_from_slice(bias);
    let quads = npos / 4;
    for q in 0..quads {
        let p0 = 4 * q;
        let mut acc = [b; 4];
        let rows: [&[T]; 4] =
            std::array::from_fn(|i| &patches[(p0 + i) * ulen..(p0 + i + 1) * ulen]);
        for u in 0..ulen {
            let kr: &[T; CO] = k[u * CO..(u + 1) * CO].try_into().unwrap();
            for i in 0..4 {
                let xv = rows[i][u];
                for c in 0..CO {
                    acc[i][c] += xv * kr[c];
                }
            }
        }
        for i in 0..4 {
            out[(p0 + i) * CO..(p0 + i + 1) * CO].copy_from_slice(&acc[i]);
        }
    }
    for pos in 4 * quads..npos {
        let mut acc = b;
        let row = &patches[pos * ulen..(pos + 1) * ulen];
        for u in 0..ulen {
            let kr: &[T; CO] = k[u * CO..(u + 1) * CO].try_into().unwrap();
            let xv = row[u];
            for c in 0..CO {
                acc[c] += xv * kr[c];
            }
        }
        out[pos * CO..(pos + 1) * CO].copy_from_slice(&acc);
    }
}

fn gemm_forward_generic<T: Scalar>(patches: &[T], k: &[T], bias: &[T], ulen: usize, out: &mut [T]) {
    let co = bias.len();
    for (pos, chunk) in out.chunks_mut(co).enumerate() {
        chunk.copy_from_slice(bias);
        let row = &patches[pos * ulen..(pos + 1) * ulen];
        for (u, &xv) in row.iter().enumerate() {
            for (a, kv) in chunk.iter_mut().zip(&k[u * co..(u + 1) * co]) {
                *a += xv * *kv;
            }
        }
    }
}

macro_rules! dispatch_co {
    ($co:expr, $fixed:ident, $generic:ident, ($($args:expr),*)) => {
        match $co {
            1 => $fixed::<T, 1>($($args),*),
            2 => $fixed::<T, 2>($($args),*),
            3 => $fixed::<T, 3>($($args),*),
            4 => $fixed::<T, 4>($($args),*),
            8 => $fixed::<T, 8>($($args),*),
            16 => $fixed::<T, 16>($($args),*),
            _ => $generic::<T>($($args),*),
        }
    };
}

/// 3×3 convolution with zero-same padding. Input is `[h, w, c_in]`, kernels
/// are `[3, 3, c_in, c_out]`, output is `[ceil(h/sh), ceil(w/sw), c_out]`.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    stride: (usize, usize),
) -> Result<Tensor<T>> {
    let (h, w, cin, cout) = check_conv_shapes(input, kernels, Some(bias))?;
    let (oh, pad_y) = same_padding(h, 3, stride.0);
    let (ow, pad_x) = same_padding(w, 3, stride.1);
    let ulen = 9 * cin;
    let patches = im2col(input.data(), h, w, cin, stride, (pad_y, pad_x), (oh, ow));
    let mut out = vec![T::zero(); oh * ow * cout];
    let (k, b) = (kernels.data(), bias.data());
    dispatch_co!(cout, gemm_forward_fixed, gemm_forward_generic, (&patches, k, b, ulen, &mut out));
    Tensor::from_vec(&[oh, ow, cout], out)
}

/// Gradients of [`conv2d`] with respect to its three inputs.
pub struct Conv2dGrads<T: Scalar> {
    pub input: Tensor<T>,
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Backward GEMMs in channel-transposed form so every inner loop is a
/// contiguous reduction-free axpy over the patch width:
/// `dkT[c] += g[pos][c]·p[pos]` and `dp[pos] += g[pos][c]·kT[c]`.
fn gemm_backward<T: Scalar>(
    patches: &[T],
    k: &[T],
    g: &[T],
    ulen: usize,
    dk: &mut [T],
    db: &mut [T],
    dp: &mut [T],
) {
    let co = db.len();
    let npos = g.len() / co;
    let mut kt = vec![T::zero(); ulen * co];
    for u in 0..ulen {
        for c in 0..co {
            kt[c * ulen + u] = k[u * co + c];
        }
    }
    let mut dkt = vec![T::zero(); ulen * co];
    for pos in 0..npos {
        let gr = &g[pos * co..(pos + 1) * co];
        let prow = &patches[pos * ulen..(pos + 1) * ulen];
        let dprow = &mut dp[pos * ulen..(pos + 1) * ulen];
        for c in 0..co {
            let gv = gr[c];
            db[c] += gv;
            let ktr = &kt[c * ulen..(c + 1) * ulen];
            let dktr = &mut dkt[c * ulen..(c + 1) * ulen];
            for u in 0..ulen {
                dktr[u] += gv * prow[u];
                dprow[u] += gv * ktr[u];
            }
        }
    }
    for u in 0..ulen {
        for c in 0..co {
            dk[u * co + c] += dkt[c * ulen + u];
        }
    }
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: (usize, usize),
) -> Result<Conv2dGrads<T>> {
    let (h, w, cin, cout) = check_conv_shapes(input, kernels, None)?;
    let (oh, pad_y) = same_padding(h, 3, stride.0);
    let (ow, pad_x) = same_padding(w, 3, stride.1);
    if grad_out.shape() != [oh, ow, cout] {
        return Err(Error::Shape(format!(
            "conv2d_backward grad_out must be [{oh}, {ow}, {cout}], got {:?}",
            grad_out.shape()
        )));
    }
    let ulen = 9 * cin;
    let patches = im2col(input.data(), h, w, cin, stride, (pad_y, pad_x), (oh, ow));
    let (k, g) = (kernels.data(), grad_out.data());
    let mut dk = vec![T::zero(); k.len()];
    let mut db = vec![T::zero(); cout];
    let mut dp = vec![T::zero(); patches.len()];
    gemm_backward(&patches, k, g, ulen, &mut dk, &mut db, &mut dp);
    let dx = col2im(&dp, h, w, cin, stride, (pad_y, pad_x), (oh, ow));

    Ok(Conv2dGrads {
        input: Tensor::from_vec(input.shape(), dx)?,
        kernels: Tensor::from_vec(kernels.shape(), dk)?,
        bias: Tensor::from_vec(&[cout], db)?,
    })
}

/// Elementwise ELU: `x` for `x > 0`, `exp(x) − 1` otherwise.
pub fn elu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let data = x
        .data()
        .iter()
        .map(|&v| if v > T::zero() { v } else { v.exp() - T::one() })
        .collect();
    Tensor::from_vec(x.shape(), data).expect("same shape")
}

/// ELU backward from the saved output: the derivative is 1 where `y > 0`
/// and `y + 1 = exp(x)` otherwise.
pub fn elu_backward<T: Scalar>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    debug_assert_eq!(output.shape(), grad_out.shape());
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&y, &g)| if y > T::zero() { g } else { g * (y + T::one()) })
        .collect();
    Tensor::from_vec(output.shape(), data).expect("same shape")
}

/// Affine map `y = W x + b` with `W` of shape `[m, n]` (row-major), `x` of
/// shape `[n]` and `b` of shape `[m]`.
pub fn fully_connected<T: Scalar>(
    x: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let wshape = weights.shape();
    if wshape.len() != 2 {
        return Err(Error::Shape(format!("weights must be 2-D, got {wshape:?}")));
    }
    let (m, n) = (wshape[0], wshape[1]);
    if x.len() != n || bias.len() != m {
        return Err(Error::Shape(format!(
            "fully_connected: W is {m}×{n}, x has {}, b has {}",
            x.len(),
            bias.len()
        )));
    }
    let xv = x.data();
    let w = weights.data();
    let mut y = bias.data().to_vec();
    for (i, yi) in y.iter_mut().enumerate() {
        let row = &w[i * n..(i + 1) * n];
        let mut acc = T::zero();
        for (wv, xvj) in row.iter().zip(xv) {
            acc += *wv * *xvj;
        }
        *yi += acc;
    }
    Tensor::from_vec(&[m], y)
}

/// Gradients of [`fully_connected`]: `(dx, dW, db)`.
pub fn fully_connected_backward<T: Scalar>(
    x: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (m, n) = (weights.shape()[0], weights.shape()[1]);
    if x.len() != n || grad_out.len() != m {
        return Err(Error::Shape(format!(
            "fully_connected_backward: W is {m}×{n}, x has {}, grad has {}",
            x.len(),
            grad_out.len()
        )));
    }
    let xv = x.data();
    let w = weights.data();
    let g = grad_out.data();
    let mut dx = vec![T::zero(); n];
    let mut dw = vec![T::zero(); m * n];
    for i in 0..m {
        let gi = g[i];
        let row = &w[i * n..(i + 1) * n];
        let drow = &mut dw[i * n..(i + 1) * n];
        for j in 0..n {
            dx[j] += gi * row[j];
            drow[j] = gi * xv[j];
        }
    }
    Ok((
        Tensor::from_vec(&[n], dx)?,
        Tensor::from_vec(&[m, n], dw)?,
        Tensor::from_vec(&[m], g.to_vec())?,
    ))
}

/// Dropout behaviour. `Train` and `Mc` both drop; `Mc` marks inference-time
/// Monte-Carlo sampling where every call draws fresh masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Mc,
    Eval,
}

/// Draws an inverted-dropout mask: each entry is `0` with probability `p` and
/// `1/(1−p)` otherwise.
pub fn dropout_mask<T: Scalar, R: Rng>(len: usize, p: f64, rng: &mut R) -> Result<Vec<T>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "dropout probability must be in [0, 1), got {p}"
        )));
    }
    let keep = T::from_f64(1.0 / (1.0 - p));
    Ok((0..len)
        .map(|_| {
            if rng.random::<f64>() < p {
                T::zero()
            } else {
                keep
            }
        })
        .collect())
}

/// Applies dropout, returning the output and the mask used (`None` in eval
/// mode, where the op is the identity).
pub fn dropout<T: Scalar, R: Rng>(
    x: &Tensor<T>,
    p: f64,
    mode: DropoutMode,
    rng: &mut R,
) -> Result<(Tensor<T>, Option<Vec<T>>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "dropout probability must be in [0, 1), got {p}"
        )));
    }
    if mode == DropoutMode::Eval || p == 0.0 {
        return Ok((x.clone(), None));
    }
    let mask = dropout_mask::<T, R>(x.len(), p, rng)?;
    let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Ok((Tensor::from_vec(x.shape(), data)?, Some(mask)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        Tensor::from_vec(shape, data).unwrap()
    }

    /// Naive sliding-window convolution used as an oracle.
    fn conv2d_oracle(
        input: &Tensor<f64>,
        kernels: &Tensor<f64>,
        bias: &Tensor<f64>,
        stride: (usize, usize),
    ) -> Tensor<f64> {
        let (h, w, cin) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let cout = kernels.shape()[3];
        let oh = h.div_ceil(stride.0);
        let ow = w.div_ceil(stride.1);
        let pad_y = (((oh - 1) * stride.0 + 3).saturating_sub(h)) / 2;
        let pad_x = (((ow - 1) * stride.1 + 3).saturating_sub(w)) / 2;
        let mut out = vec![0.0; oh * ow * cout];
        for oy in 0..oh {
            for ox in 0..ow {
                for co in 0..cout {
                    let mut acc = bias.data()[co];
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let iy = oy as isize * stride.0 as isize + ky as isize - pad_y as isize;
                            let ix = ox as isize * stride.1 as isize + kx as isize - pad_x as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            for ci in 0..cin {
                                let xv = input.data()[(iy as usize * w + ix as usize) * cin + ci];
                                let kv = kernels.data()[((ky * 3 + kx) * cin + ci) * cout + co];
                                acc += xv * kv;
                            }
                        }
                    }
                    out[(oy * ow + ox) * cout + co] = acc;
                }
            }
        }
        Tensor::from_vec(&[oh, ow, cout], out).unwrap()
    }

    #[test]
    fn conv2d_shape_trace_matches_paper_pipeline() {
        // 134×64×1 input with 4 kernels halves each spatial dim (ceiling).
        let input: Tensor<f32> = Tensor::zeros(&[134, 64, 1]);
        let kernels = Tensor::zeros(&[3, 3, 1, 4]);
        let bias = Tensor::zeros(&[4]);
        let out = conv2d(&input, &kernels, &bias, (2, 2)).unwrap();
        assert_eq!(out.shape(), &[67, 32, 4]);
        assert_eq!(conv2d_output_shape(67, 32, 8, (2, 2)), [34, 16, 8]);
        assert_eq!(conv2d_output_shape(34, 16, 16, (2, 2)), [17, 8, 16]);
        assert_eq!(conv2d_output_shape(17, 8, 4, (2, 2)), [9, 4, 4]);
    }

    #[test]
    fn conv2d_zero_input_yields_bias() {
        let input: Tensor<f64> = Tensor::zeros(&[6, 5, 2]);
        let kernels = Tensor::filled(&[3, 3, 2, 3], 0.7);
        let bias = Tensor::from_vec(&[3], vec![0.1, -0.2, 0.3]).unwrap();
        let out = conv2d(&input, &kernels, &bias, (2, 2)).unwrap();
        for px in out.data().chunks(3) {
            assert_eq!(px, bias.data());
        }
    }

    #[test]
    fn conv2d_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(h, w, cin, cout) in &[(5, 5, 1, 3), (7, 6, 2, 4), (8, 9, 3, 2)] {
            let input = rand_tensor(&[h, w, cin], &mut rng);
            let kernels = rand_tensor(&[3, 3, cin, cout], &mut rng);
            let bias = rand_tensor(&[cout], &mut rng);
            let got = conv2d(&input, &kernels, &bias, (2, 2)).unwrap();
            let want = conv2d_oracle(&input, &kernels, &bias, (2, 2));
            assert_eq!(got.shape(), want.shape());
            for (a, b) in got.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-6, "conv2d disagrees with oracle: {a} vs {b}");
            }
        }
    }

    #[test]
    fn conv2d_rejects_channel_mismatch() {
        let input: Tensor<f32> = Tensor::zeros(&[6, 6, 2]);
        let kernels = Tensor::zeros(&[3, 3, 3, 4]);
        let bias = Tensor::zeros(&[4]);
        assert!(matches!(
            conv2d(&input, &kernels, &bias, (2, 2)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn elu_reference_points() {
        let x = Tensor::from_vec(&[3], vec![0.0f64, 1.0, -20.0]).unwrap();
        let y = elu(&x);
        assert_eq!(y.data()[0], 0.0);
        assert_eq!(y.data()[1], 1.0);
        // exp(-20) − 1 ≈ −1 to well under 1e-8.
        assert!((y.data()[2] + 1.0).abs() < 1e-8);
    }

    #[test]
    fn fully_connected_identity_and_constant() {
        let x = Tensor::from_vec(&[3], vec![1.0f64, -2.0, 0.5]).unwrap();
        let eye = Tensor::from_vec(&[3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        let zero_b = Tensor::zeros(&[3]);
        let y = fully_connected(&x, &eye, &zero_b).unwrap();
        assert_eq!(y.data(), x.data());

        let zero_w = Tensor::zeros(&[2, 3]);
        let c = Tensor::from_vec(&[2], vec![3.0, -4.0]).unwrap();
        let y = fully_connected(&x, &zero_w, &c).unwrap();
        assert_eq!(y.data(), c.data());
    }

    #[test]
    fn fully_connected_matches_dot_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_tensor(&[7], &mut rng);
        let w = rand_tensor(&[4, 7], &mut rng);
        let b = rand_tensor(&[4], &mut rng);
        let y = fully_connected(&x, &w, &b).unwrap();
        for i in 0..4 {
            let mut acc = b.data()[i];
            for j in 0..7 {
                acc += w.data()[i * 7 + j] * x.data()[j];
            }
            assert!((y.data()[i] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn dropout_zero_p_and_eval_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_tensor(&[50], &mut rng);
        let (y, mask) = dropout(&x, 0.0, DropoutMode::Train, &mut rng).unwrap();
        assert_eq!(y.data(), x.data());
        assert!(mask.is_none());
        let (y, mask) = dropout(&x, 0.9, DropoutMode::Eval, &mut rng).unwrap();
        assert_eq!(y.data(), x.data());
        assert!(mask.is_none());
    }

    #[test]
    fn dropout_rejects_p_of_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Tensor<f32> = Tensor::zeros(&[4]);
        assert!(dropout(&x, 1.0, DropoutMode::Train, &mut rng).is_err());
    }

    #[test]
    fn dropout_empirical_rate() {
        // Monte-Carlo estimate: zero fraction over 1e5 elements within ±1 % of p.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let p = 0.33;
        let x: Tensor<f64> = Tensor::filled(&[100_000], 1.0);
        let (y, _) = dropout(&x, p, DropoutMode::Mc, &mut rng).unwrap();
        let zeros = y.data().iter().filter(|v| **v == 0.0).count();
        let frac = zeros as f64 / 100_000.0;
        assert!((frac - p).abs() < 0.01, "zero fraction {frac} vs p {p}");
        // Survivors are scaled by 1/(1−p), so the expected value matches the input.
        let mean = y.data().iter().sum::<f64>() / 100_000.0;
        assert!((mean - 1.0).abs() < 0.02);
    }
}
