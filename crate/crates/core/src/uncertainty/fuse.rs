//! MC-dropout fusion of aleatoric and epistemic uncertainty.

use crate::error::{Error, Result};
use nalgebra::{Matrix4, Vector4};

/// Aleatoric / epistemic split of the total error covariance.
#[derive(Debug, Clone, Copy)]
pub struct CovarianceEstimate {
    /// Mean aleatoric covariance over the MC samples.
    pub aleatoric: Matrix4<f64>,
    /// Sample covariance of the MC state estimates (biased, 1/M).
    pub epistemic: Matrix4<f64>,
    /// `Σ̂ = Σᵉ + Σ̄ᵃ`.
    pub total: Matrix4<f64>,
}

impl CovarianceEstimate {
    pub fn symmetry_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for m in [&self.aleatoric, &self.epistemic, &self.total] {
            for i in 0..4 {
                for j in 0..4 {
                    worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
                }
            }
        }
        worst
    }
}

/// Fuses `M` MC-dropout samples of `(x̂_m, Σᵃ_m)` into the averaged state and
/// the total covariance: `x̄ = Σ x̂_m / M`, `Σᵉ = Σ (x̂_m − x̄)(x̂_m − x̄)ᵀ / M`
/// (biased sample covariance), `Σ̂ = Σᵉ + Σ̄ᵃ`.
pub fn fuse_mc_samples(
    samples: &[(Vector4<f64>, Matrix4<f64>)],
) -> Result<(Vector4<f64>, CovarianceEstimate)> {
    let m = samples.len();
    if m == 0 {
        return Err(Error::InvalidArgument("fuse_mc_samples needs M >= 1".into()));
    }
    let inv_m = 1.0 / m as f64;
    let mut mean = Vector4::zeros();
    let mut aleatoric = Matrix4::zeros();
    for (x, sa) in samples {
        mean += x;
        aleatoric += sa;
    }
    mean *= inv_m;
    aleatoric *= inv_m;

    // Pairwise form of the biased (1/M) sample covariance:
    // Σᵉ = Σ_{i<j} (x_i − x_j)(x_i − x_j)ᵀ / M². Exactly zero when all
    // samples coincide, and symmetric term by term.
    let mut epistemic = Matrix4::zeros();
    for i in 0..m {
        for j in (i + 1)..m {
            let d = samples[i].0 - samples[j].0;
            epistemic += d * d.transpose();
        }
    }
    epistemic *= inv_m * inv_m;

    Ok((
        mean,
        CovarianceEstimate {
            aleatoric,
            epistemic,
            total: epistemic + aleatoric,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_has_zero_epistemic() {
        let sa = Matrix4::identity() * 0.5;
        let (mean, cov) = fuse_mc_samples(&[(Vector4::new(1.0, 2.0, 0.1, -0.1), sa)]).unwrap();
        assert_eq!(mean, Vector4::new(1.0, 2.0, 0.1, -0.1));
        assert_eq!(cov.epistemic, Matrix4::zeros());
        assert_eq!(cov.total, sa);
    }

    #[test]
    fn two_sample_hand_example() {
        let samples = [
            (Vector4::new(0.0, 0.0, 0.0, 0.0), Matrix4::identity()),
            (Vector4::new(2.0, 0.0, 0.0, 0.0), Matrix4::identity()),
        ];
        let (mean, cov) = fuse_mc_samples(&samples).unwrap();
        assert_eq!(mean, Vector4::new(1.0, 0.0, 0.0, 0.0));
        // Σᵉ = diag(1,0,0,0); Σ̂ = I + diag(1,0,0,0).
        let mut want = Matrix4::identity();
        want[(0, 0)] = 2.0;
        assert_eq!(cov.total, want);
    }

    #[test]
    fn identical_samples_give_exactly_zero_spread() {
        let x = Vector4::new(0.4, -0.2, 0.9, 0.3);
        let sa = Matrix4::identity() * 0.1;
        let samples = vec![(x, sa); 7];
        let (_, cov) = fuse_mc_samples(&samples).unwrap();
        assert_eq!(cov.epistemic, Matrix4::zeros());
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(fuse_mc_samples(&[]).is_err());
    }

    #[test]
    fn centered_and_uncentered_forms_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<_> = (0..25)
            .map(|_| {
                let x = Vector4::from_fn(|_, _| rng.random::<f64>() * 4.0 - 2.0);
                (x, Matrix4::identity() * rng.random::<f64>())
            })
            .collect();
        let (mean, cov) = fuse_mc_samples(&samples).unwrap();
        // Uncentered form: Σ x̂x̂ᵀ/M − x̄x̄ᵀ.
        let mut second = Matrix4::zeros();
        for (x, _) in &samples {
            second += x * x.transpose();
        }
        second /= 25.0;
        let uncentered = second - mean * mean.transpose();
        assert!((cov.epistemic - uncentered).abs().max() < 1e-5);
    }
}
