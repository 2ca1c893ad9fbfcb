//! Projection of the 3-D RDA map onto the RD and RA image pair.

use crate::error::{Error, Result};
use crate::radar_sim::synth::RdaMap;

/// Row-major 2-D image, pixels in `[0, 1]` after normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Image {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn max(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, &v| m.max(v))
    }

    /// Pixel index of the maximum value.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0usize;
        let mut best_v = f32::MIN;
        for (i, &v) in self.data.iter().enumerate() {
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        (best / self.cols, best % self.cols)
    }
}

/// Normalized RD/RA image pair for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePair {
    /// Range-Doppler image `[range_bins × doppler_bins]`.
    pub rd: Image,
    /// Range-azimuth image `[range_bins × azimuth_bins]`.
    pub ra: Image,
    pub timestamp: f64,
}

fn normalize(img: &mut Image) {
    let max = img.max();
    if max > 0.0 {
        let inv = 1.0 / max;
        for v in img.data.iter_mut() {
            *v = (*v * inv).clamp(0.0, 1.0);
        }
    }
}

/// Integrates the map along azimuth (→ RD image) and along Doppler (→ RA
/// image), then scales each image by its own maximum into `[0, 1]`. An
/// all-zero map yields all-zero images.
pub fn project_rda(map: &RdaMap, timestamp: f64) -> Result<FramePair> {
    if map.power.len() != map.range_bins * map.doppler_bins * map.azimuth_bins {
        return Err(Error::Shape("RDA map buffer does not match its dimensions".into()));
    }
    let (nr, nd, na) = (map.range_bins, map.doppler_bins, map.azimuth_bins);
    let mut rd64 = vec![0.0f64; nr * nd];
    let mut ra64 = vec![0.0f64; nr * na];
    for r in 0..nr {
        let plane = &map.power[r * nd * na..(r + 1) * nd * na];
        let ra_row = &mut ra64[r * na..(r + 1) * na];
        for d in 0..nd {
            let row = &plane[d * na..(d + 1) * na];
            let mut sum = 0.0f64;
            for (a, &v) in row.iter().enumerate() {
                sum += v as f64;
                ra_row[a] += v as f64;
            }
            rd64[r * nd + d] = sum;
        }
    }
    let mut rd = Image {
        rows: nr,
        cols: nd,
        data: rd64.into_iter().map(|v| v as f32).collect(),
    };
    let mut ra = Image {
        rows: nr,
        cols: na,
        data: ra64.into_iter().map(|v| v as f32).collect(),
    };
    normalize(&mut rd);
    normalize(&mut ra);
    Ok(FramePair { rd, ra, timestamp })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_input_projects_to_single_pixels() {
        let mut map = RdaMap::zeros(134, 64, 64);
        let idx = map.index(10, 20, 30);
        map.power[idx] = 5.0;
        let pair = project_rda(&map, 0.0).unwrap();
        assert_eq!(pair.rd.at(10, 20), 1.0);
        assert_eq!(pair.ra.at(10, 30), 1.0);
        assert_eq!(pair.rd.data.iter().filter(|v| **v != 0.0).count(), 1);
        assert_eq!(pair.ra.data.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn uniform_map_projects_to_ones() {
        let mut map = RdaMap::zeros(8, 4, 4);
        map.power.iter_mut().for_each(|v| *v = 0.25);
        let pair = project_rda(&map, 0.0).unwrap();
        assert!(pair.rd.data.iter().all(|v| (*v - 1.0).abs() < 1e-6));
        assert!(pair.ra.data.iter().all(|v| (*v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn all_zero_map_stays_zero() {
        let map = RdaMap::zeros(134, 64, 64);
        let pair = project_rda(&map, 1.5).unwrap();
        assert!(pair.rd.data.iter().all(|v| *v == 0.0));
        assert!(pair.ra.data.iter().all(|v| *v == 0.0));
        assert_eq!(pair.timestamp, 1.5);
    }

    #[test]
    fn projections_match_triple_loop_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let (nr, nd, na) = (9, 6, 5);
        let mut map = RdaMap::zeros(nr, nd, na);
        map.power.iter_mut().for_each(|v| *v = rng.random::<f32>());
        let pair = project_rda(&map, 0.0).unwrap();

        // Independent triple-loop sums (before normalization), then apply the
        // same per-image max scaling.
        let mut rd = vec![0.0f64; nr * nd];
        let mut ra = vec![0.0f64; nr * na];
        for r in 0..nr {
            for d in 0..nd {
                for a in 0..na {
                    let v = map.at(r, d, a) as f64;
                    rd[r * nd + d] += v;
                    ra[r * na + a] += v;
                }
            }
        }
        let rd_max = rd.iter().cloned().fold(0.0f64, f64::max);
        let ra_max = ra.iter().cloned().fold(0.0f64, f64::max);
        for (got, want) in pair.rd.data.iter().zip(&rd) {
            assert!((*got as f64 - want / rd_max).abs() < 1e-6);
        }
        for (got, want) in pair.ra.data.iter().zip(&ra) {
            assert!((*got as f64 - want / ra_max).abs() < 1e-6);
        }
    }

    #[test]
    fn normalized_images_have_unit_max() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut map = RdaMap::zeros(20, 8, 8);
        map.power.iter_mut().for_each(|v| *v = rng.random::<f32>() * 3.0);
        let pair = project_rda(&map, 0.0).unwrap();
        assert_eq!(pair.rd.max(), 1.0);
        assert_eq!(pair.ra.max(), 1.0);
        assert!(pair.rd.data.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(pair.ra.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
