//! χ²₄ calibration of the squared Mahalanobis distances.
//!
//! Under the Gaussian posterior assumption the squared Mahalanobis distance
//! of a 4-D state follows a χ² distribution with 4 degrees of freedom. The
//! report compares the empirical CDF of the observed values against the
//! theoretical CDF on a fixed grid of 200 evenly spaced probability levels.

use crate::error::{Error, Result};

/// χ²₄ CDF in closed form: `F(x) = 1 − e^{−x/2}(1 + x/2)`.
pub fn chi2_cdf_4(x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "chi-squared CDF domain is x >= 0, got {x}"
        )));
    }
    Ok(1.0 - (-x / 2.0).exp() * (1.0 + x / 2.0))
}

/// Inverse of [`chi2_cdf_4`] by bisection (the CDF is strictly increasing).
pub fn chi2_quantile_4(p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "quantile level must be in [0, 1), got {p}"
        )));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while chi2_cdf_4(hi)? < p {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Numeric("chi2 quantile out of range".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf_4(mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Number of probability levels in the comparison grid.
pub const CALIBRATION_GRID: usize = 200;

#[derive(Debug, Clone)]
pub struct CalibrationReport {
    /// Probability levels `(i + 0.5)/200`; the theoretical CDF at each grid
    /// threshold equals the level by construction.
    pub levels: Vec<f64>,
    /// ξ thresholds: the χ²₄ quantile of each level.
    pub thresholds: Vec<f64>,
    /// Empirical CDF of the observed ξ at each threshold.
    pub empirical: Vec<f64>,
    /// Mean squared difference between the empirical and theoretical CDFs
    /// over the grid.
    pub mse: f64,
    /// Largest absolute CDF difference over the grid.
    pub ks: f64,
    /// Samples excluded upstream (singular covariances).
    pub excluded: usize,
}

impl CalibrationReport {
    /// Mean signed difference `empirical − theoretical` over the lower half
    /// of the grid; negative values mean the ξ mass sits to the right of the
    /// theory (underestimated uncertainty).
    pub fn lower_tail_bias(&self) -> f64 {
        let half = self.levels.len() / 2;
        (0..half)
            .map(|i| self.empirical[i] - self.levels[i])
            .sum::<f64>()
            / half as f64
    }
}

/// Builds the calibration report from observed squared Mahalanobis distances.
pub fn calibration_report(xis: &[f64], excluded: usize) -> Result<CalibrationReport> {
    if xis.len() < 100 {
        return Err(Error::InvalidArgument(format!(
            "calibration needs at least 100 samples, got {}",
            xis.len()
        )));
    }
    let mut sorted: Vec<f64> = xis.to_vec();
    if sorted.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Numeric("calibration input must be finite and nonnegative".into()));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;

    let mut levels = Vec::with_capacity(CALIBRATION_GRID);
    let mut thresholds = Vec::with_capacity(CALIBRATION_GRID);
    let mut empirical = Vec::with_capacity(CALIBRATION_GRID);
    let mut mse = 0.0;
    let mut ks = 0.0f64;
    for i in 0..CALIBRATION_GRID {
        let p = (i as f64 + 0.5) / CALIBRATION_GRID as f64;
        let x = chi2_quantile_4(p)?;
        let count = sorted.partition_point(|v| *v <= x);
        let ecdf = count as f64 / n;
        let d = ecdf - p;
        mse += d * d;
        ks = ks.max(d.abs());
        levels.push(p);
        thresholds.push(x);
        empirical.push(ecdf);
    }
    mse /= CALIBRATION_GRID as f64;
    Ok(CalibrationReport {
        levels,
        thresholds,
        empirical,
        mse,
        ks,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn chi2_4_samples(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n)
            .map(|_| {
                (0..4)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        z * z
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn cdf_reference_values() {
        assert_eq!(chi2_cdf_4(0.0).unwrap(), 0.0);
        // F(4) = 1 − 3e⁻² ≈ 0.5940.
        let f4 = chi2_cdf_4(4.0).unwrap();
        assert!((f4 - (1.0 - 3.0 * (-2.0f64).exp())).abs() < 1e-15);
        assert!((f4 - 0.5940).abs() < 1e-4);
        assert!(chi2_cdf_4(-0.1).is_err());
        // Nondecreasing toward 1.
        let mut prev = 0.0;
        for k in 0..100 {
            let v = chi2_cdf_4(k as f64 * 0.5).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        assert!(chi2_cdf_4(100.0).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn cdf_matches_quadrature_oracle() {
        // Simpson's rule over the χ²₄ density x·e^{−x/2}/4 on a fine grid.
        let density = |x: f64| x * (-x / 2.0).exp() / 4.0;
        let simpson = |b: f64| {
            let n = 4000;
            let h = b / n as f64;
            let mut s = density(0.0) + density(b);
            for k in 1..n {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                s += w * density(k as f64 * h);
            }
            s * h / 3.0
        };
        for &x in &[0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let got = chi2_cdf_4(x).unwrap();
            let want = simpson(x);
            assert!((got - want).abs() < 1e-9, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[0.01, 0.25, 0.5, 0.75, 0.99] {
            let x = chi2_quantile_4(p).unwrap();
            assert!((chi2_cdf_4(x).unwrap() - p).abs() < 1e-10);
        }
    }

    #[test]
    fn iid_chi2_samples_calibrate_to_small_mse() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let xis = chi2_4_samples(100_000, &mut rng);
        let rep = calibration_report(&xis, 0).unwrap();
        assert!(rep.mse < 1e-4, "calibration MSE {}", rep.mse);
        // Empirical CDF values are nondecreasing over the grid.
        assert!(rep.empirical.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn calibration_mse_shrinks_with_sample_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut prev = f64::INFINITY;
        for &n in &[1_000usize, 10_000, 100_000] {
            let xis = chi2_4_samples(n, &mut rng);
            let rep = calibration_report(&xis, 0).unwrap();
            assert!(rep.mse < prev, "mse did not shrink at n={n}");
            prev = rep.mse;
        }
    }

    #[test]
    fn overconfident_xis_have_large_mse() {
        // ξ ≡ 0: the empirical CDF jumps to 1 at zero, far from the theory.
        let xis = vec![0.0; 1000];
        let rep = calibration_report(&xis, 0).unwrap();
        assert!(rep.mse > 0.2, "mse {}", rep.mse);
        assert!(rep.ks > 0.9);
    }

    #[test]
    fn doubling_covariance_shifts_the_cdf_up() {
        // Doubling Σ̂ halves every ξ, moving empirical mass left of the
        // theory: the empirical CDF then sits above it (overestimated
        // uncertainty direction).
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xis = chi2_4_samples(20_000, &mut rng);
        let halved: Vec<f64> = xis.iter().map(|x| x / 2.0).collect();
        let rep = calibration_report(&halved, 0).unwrap();
        assert!(rep.lower_tail_bias() > 0.05, "bias {}", rep.lower_tail_bias());
        // And the inflated-ξ direction (underestimated uncertainty) biases low.
        let doubled: Vec<f64> = xis.iter().map(|x| x * 2.0).collect();
        let rep = calibration_report(&doubled, 0).unwrap();
        assert!(rep.lower_tail_bias() < -0.05, "bias {}", rep.lower_tail_bias());
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(calibration_report(&[1.0; 99], 0).is_err());
    }
}
