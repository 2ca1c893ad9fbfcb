//! Cholesky parameterization of the aleatoric covariance and the Gaussian
//! negative log-likelihood evaluated through it.
//!
//! The network emits `α ∈ ℝ⁴₊` (diagonal of `L`, from an exponential
//! activation) and `β ∈ ℝ⁶` (strict lower triangle, from tanh). The
//! aleatoric covariance is `Σᵃ = L Lᵀ`, which is symmetric positive definite
//! whenever the diagonal is positive.

use crate::error::{Error, Result};
use crate::nn_core::tensor::Scalar;

pub const STATE_DIM: usize = 4;

/// Strict-lower-triangle placement of the six β entries: row-major order
/// (2,1),(3,1),(3,2),(4,1),(4,2),(4,3) in 1-based indexing.
pub const BETA_INDEX: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

/// Lower bound applied to the diagonal of `L`. The exponential head keeps α
/// positive but can underflow early in training; the floor keeps the NLL
/// finite. It carries a zero subgradient, and converged models sit far above
/// it (asserted in the training tests).
pub const ALPHA_FLOOR: f64 = 1e-4;

/// 4×4 lower-triangular Cholesky factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CholFactor<T: Scalar> {
    l: [[T; STATE_DIM]; STATE_DIM],
    /// True where the floor clamped the diagonal (zero subgradient there).
    floored: [bool; STATE_DIM],
}

impl<T: Scalar> CholFactor<T> {
    pub fn matrix(&self) -> &[[T; STATE_DIM]; STATE_DIM] {
        &self.l
    }

    pub fn diag(&self) -> [T; STATE_DIM] {
        [self.l[0][0], self.l[1][1], self.l[2][2], self.l[3][3]]
    }

    /// `ln |L Lᵀ| = 2 Σ ln L_ii`.
    pub fn log_det_sigma(&self) -> T {
        let mut s = T::zero();
        for i in 0..STATE_DIM {
            s += self.l[i][i].ln();
        }
        s + s
    }

    /// Solves `L u = e` by forward substitution.
    pub fn forward_substitute(&self, e: &[T; STATE_DIM]) -> [T; STATE_DIM] {
        let mut u = [T::zero(); STATE_DIM];
        for i in 0..STATE_DIM {
            let mut acc = e[i];
            for j in 0..i {
                acc = acc - self.l[i][j] * u[j];
            }
            u[i] = acc / self.l[i][i];
        }
        u
    }

    /// Solves `Lᵀ w = u` by back substitution.
    pub fn back_substitute(&self, u: &[T; STATE_DIM]) -> [T; STATE_DIM] {
        let mut w = [T::zero(); STATE_DIM];
        for i in (0..STATE_DIM).rev() {
            let mut acc = u[i];
            for j in (i + 1)..STATE_DIM {
                acc = acc - self.l[j][i] * w[j];
            }
            w[i] = acc / self.l[i][i];
        }
        w
    }

    /// `Σᵃ = L Lᵀ`.
    pub fn sigma(&self) -> [[T; STATE_DIM]; STATE_DIM] {
        let mut s = [[T::zero(); STATE_DIM]; STATE_DIM];
        for i in 0..STATE_DIM {
            for j in 0..STATE_DIM {
                let mut acc = T::zero();
                for k in 0..=i.min(j) {
                    acc += self.l[i][k] * self.l[j][k];
                }
                s[i][j] = acc;
            }
        }
        s
    }
}

/// Builds the Cholesky factor and `Σᵃ = L Lᵀ` from the head outputs.
///
/// α must be strictly positive (the exponential head guarantees it; asserted
/// anyway). Values below [`ALPHA_FLOOR`] are clamped.
pub fn build_covariance<T: Scalar>(
    alpha: &[T; STATE_DIM],
    beta: &[T; 6],
) -> Result<(CholFactor<T>, [[T; STATE_DIM]; STATE_DIM])> {
    let floor = T::from_f64(ALPHA_FLOOR);
    let mut l = [[T::zero(); STATE_DIM]; STATE_DIM];
    let mut floored = [false; STATE_DIM];
    for i in 0..STATE_DIM {
        if alpha[i] <= T::zero() || !alpha[i].is_finite() {
            return Err(Error::InvalidArgument(format!(
                "alpha must be strictly positive and finite, got {}",
                alpha[i]
            )));
        }
        if alpha[i] < floor {
            l[i][i] = floor;
            floored[i] = true;
        } else {
            l[i][i] = alpha[i];
        }
    }
    for (k, &(i, j)) in BETA_INDEX.iter().enumerate() {
        l[i][j] = beta[k];
    }
    let factor = CholFactor { l, floored };
    let sigma = factor.sigma();
    Ok((factor, sigma))
}

/// Gaussian NLL of one step: `ℓ = (x−x̂)ᵀ (Σᵃ)⁻¹ (x−x̂) + ln |Σᵃ|`,
/// evaluated through the Cholesky factor.
pub fn gaussian_nll<T: Scalar>(
    x: &[T; STATE_DIM],
    x_hat: &[T; STATE_DIM],
    chol: &CholFactor<T>,
) -> Result<T> {
    let mut e = [T::zero(); STATE_DIM];
    for i in 0..STATE_DIM {
        e[i] = x[i] - x_hat[i];
        if !e[i].is_finite() {
            return Err(Error::Numeric("non-finite residual in gaussian_nll".into()));
        }
    }
    let u = chol.forward_substitute(&e);
    let mut quad = T::zero();
    for ui in &u {
        quad += *ui * *ui;
    }
    Ok(quad + chol.log_det_sigma())
}

/// Gradients of the per-step NLL with respect to the head outputs.
#[derive(Debug, Clone, Copy)]
pub struct NllGrads<T: Scalar> {
    pub x_hat: [T; STATE_DIM],
    pub alpha: [T; STATE_DIM],
    pub beta: [T; 6],
}

/// NLL and its gradients w.r.t. `(x̂, α, β)`.
///
/// With `u = L⁻¹ e` and `w = L⁻ᵀ u`:
/// `dℓ/dx̂ = −2w`, `dℓ/dL = −2 w uᵀ` on the lower triangle plus `2/L_ii`
/// on the diagonal from the log-determinant.
pub fn gaussian_nll_with_grads<T: Scalar>(
    x: &[T; STATE_DIM],
    x_hat: &[T; STATE_DIM],
    alpha: &[T; STATE_DIM],
    beta: &[T; 6],
) -> Result<(T, NllGrads<T>)> {
    let (chol, _) = build_covariance(alpha, beta)?;
    let mut e = [T::zero(); STATE_DIM];
    for i in 0..STATE_DIM {
        e[i] = x[i] - x_hat[i];
        if !e[i].is_finite() {
            return Err(Error::Numeric("non-finite residual in gaussian_nll".into()));
        }
    }
    let u = chol.forward_substitute(&e);
    let w = chol.back_substitute(&u);
    let mut quad = T::zero();
    for ui in &u {
        quad += *ui * *ui;
    }
    let loss = quad + chol.log_det_sigma();

    let two = T::from_f64(2.0);
    let mut d_xhat = [T::zero(); STATE_DIM];
    for i in 0..STATE_DIM {
        d_xhat[i] = -two * w[i];
    }
    let l = chol.matrix();
    let mut d_alpha = [T::zero(); STATE_DIM];
    for i in 0..STATE_DIM {
        if chol.floored[i] {
            continue;
        }
        d_alpha[i] = -two * w[i] * u[i] + two / l[i][i];
    }
    let mut d_beta = [T::zero(); 6];
    for (k, &(i, j)) in BETA_INDEX.iter().enumerate() {
        d_beta[k] = -two * w[i] * u[j];
    }
    Ok((
        loss,
        NllGrads {
            x_hat: d_xhat,
            alpha: d_alpha,
            beta: d_beta,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_close(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4], tol: f64) {
        for i in 0..4 {
            for j in 0..4 {
                assert!((a[i][j] - b[i][j]).abs() < tol, "({i},{j}): {} vs {}", a[i][j], b[i][j]);
            }
        }
    }

    #[test]
    fn identity_covariance() {
        let (_, sigma) = build_covariance(&[1.0, 1.0, 1.0, 1.0], &[0.0; 6]).unwrap();
        let eye = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        mat_close(&sigma, &eye, 1e-15);
    }

    #[test]
    fn hand_multiplied_example() {
        // α = (2,1,1,1), β = (1,0,0,0,0,0): first off-diagonal slot is (2,1).
        let (chol, sigma) = build_covariance(&[2.0, 1.0, 1.0, 1.0], &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let l = chol.matrix();
        assert_eq!(l[0], [2.0, 0.0, 0.0, 0.0]);
        assert_eq!(l[1], [1.0, 1.0, 0.0, 0.0]);
        let want = [
            [4.0, 2.0, 0.0, 0.0],
            [2.0, 2.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        mat_close(&sigma, &want, 1e-15);
    }

    #[test]
    fn zero_residual_identity_gives_zero_loss() {
        let (chol, _) = build_covariance(&[1.0, 1.0, 1.0, 1.0], &[0.0; 6]).unwrap();
        let x = [0.3f64, -0.7, 1.1, 0.0];
        let loss = gaussian_nll(&x, &x, &chol).unwrap();
        assert!(loss.abs() < 1e-15);
    }

    #[test]
    fn diagonal_hand_example() {
        // e = (2,0,0,0), Σ = diag(4,1,1,1) → ℓ = 1 + ln 4.
        let (chol, _) = build_covariance(&[2.0, 1.0, 1.0, 1.0], &[0.0; 6]).unwrap();
        let loss = gaussian_nll(&[2.0, 0.0, 0.0, 0.0], &[0.0; 4], &chol).unwrap();
        assert!((loss - (1.0 + 4.0f64.ln())).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn nll_matches_explicit_inverse_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let alpha: [f64; 4] = std::array::from_fn(|_| 0.3 + rng.random::<f64>());
            let beta: [f64; 6] = std::array::from_fn(|_| rng.random::<f64>() * 1.6 - 0.8);
            let x: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() * 2.0 - 1.0);
            let x_hat: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() * 2.0 - 1.0);
            let (chol, sigma) = build_covariance(&alpha, &beta).unwrap();
            let loss = gaussian_nll(&x, &x_hat, &chol).unwrap();

            // Oracle: explicit inverse and determinant via nalgebra.
            let m = nalgebra::Matrix4::from_fn(|i, j| sigma[i][j]);
            let inv = m.try_inverse().unwrap();
            let e = nalgebra::Vector4::from_fn(|i, _| x[i] - x_hat[i]);
            let want = (e.transpose() * inv * e)[(0, 0)] + m.determinant().ln();
            assert!((loss - want).abs() < 1e-6, "{loss} vs {want}");
        }
    }

    #[test]
    fn alpha_must_be_positive() {
        assert!(build_covariance(&[1.0, -0.5, 1.0, 1.0], &[0.0; 6]).is_err());
        assert!(build_covariance(&[1.0, 0.0, 1.0, 1.0], &[0.0; 6]).is_err());
    }

    #[test]
    fn floor_clamps_and_zeroes_gradient() {
        let alpha = [1e-7, 1.0, 1.0, 1.0];
        let (chol, _) = build_covariance(&alpha, &[0.0; 6]).unwrap();
        assert_eq!(chol.diag()[0], ALPHA_FLOOR);
        let (_, grads) =
            gaussian_nll_with_grads(&[0.1, 0.0, 0.0, 0.0], &[0.0; 4], &alpha, &[0.0; 6]).unwrap();
        assert_eq!(grads.alpha[0], 0.0);
        assert!(grads.alpha[1] != 0.0);
    }

    #[test]
    fn nll_gradients_match_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let h = 1e-6;
        for _ in 0..100 {
            let alpha: [f64; 4] = std::array::from_fn(|_| 0.4 + rng.random::<f64>());
            let beta: [f64; 6] = std::array::from_fn(|_| rng.random::<f64>() * 1.6 - 0.8);
            let x: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() * 2.0 - 1.0);
            let x_hat: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() * 2.0 - 1.0);
            let (_, grads) = gaussian_nll_with_grads(&x, &x_hat, &alpha, &beta).unwrap();

            let eval = |alpha: &[f64; 4], beta: &[f64; 6], x_hat: &[f64; 4]| {
                let (chol, _) = build_covariance(alpha, beta).unwrap();
                gaussian_nll(&x, x_hat, &chol).unwrap()
            };
            let check = |analytic: f64, numeric: f64| {
                let denom = analytic.abs().max(numeric.abs()).max(1e-4);
                assert!(
                    ((analytic - numeric) / denom).abs() < 1e-6,
                    "grad mismatch: analytic {analytic}, numeric {numeric}"
                );
            };
            for i in 0..4 {
                let mut ap = alpha;
                let mut am = alpha;
                ap[i] += h;
                am[i] -= h;
                check(grads.alpha[i], (eval(&ap, &beta, &x_hat) - eval(&am, &beta, &x_hat)) / (2.0 * h));
                let mut xp = x_hat;
                let mut xm = x_hat;
                xp[i] += h;
                xm[i] -= h;
                check(grads.x_hat[i], (eval(&alpha, &beta, &xp) - eval(&alpha, &beta, &xm)) / (2.0 * h));
            }
            for k in 0..6 {
                let mut bp = beta;
                let mut bm = beta;
                bp[k] += h;
                bm[k] -= h;
                check(grads.beta[k], (eval(&alpha, &bp, &x_hat) - eval(&alpha, &bm, &x_hat)) / (2.0 * h));
            }
        }
    }
}
