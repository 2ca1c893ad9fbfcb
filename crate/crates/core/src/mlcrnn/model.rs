//! Model configuration, parameter container, and initialization.

use crate::error::{Error, Result};
use crate::nn_core::{conv2d_output_shape, GruCell, Scalar, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const STATE_DIM: usize = 4;
pub const ALPHA_DIM: usize = 4;
pub const BETA_DIM: usize = 6;
pub const CONV_LAYERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlCrnnConfig {
    /// Input image height (range bins).
    pub input_h: usize,
    /// Input image width (Doppler or azimuth bins).
    pub input_w: usize,
    /// Feature maps per conv layer.
    pub conv_channels: [usize; CONV_LAYERS],
    /// Compressed observation dimension.
    pub obs_dim: usize,
    /// GRU hidden dimension.
    pub hidden_dim: usize,
    /// Dropout probability for the FC input and the recurrent state.
    pub dropout_p: f64,
}

impl Default for MlCrnnConfig {
    fn default() -> Self {
        MlCrnnConfig {
            input_h: 134,
            input_w: 64,
            conv_channels: [4, 8, 16, 4],
            obs_dim: 16,
            hidden_dim: 128,
            dropout_p: 0.33,
        }
    }
}

impl MlCrnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_h == 0 || self.input_w == 0 {
            return Err(Error::InvalidSpec("input dimensions must be positive".into()));
        }
        if self.conv_channels.iter().any(|&c| c == 0) || self.obs_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidSpec("layer dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidSpec(format!(
                "dropout probability must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        Ok(())
    }

    /// Spatial/channel trace of one conv branch, input included. For the
    /// default config: 134×64×1 → 67×32×4 → 34×16×8 → 17×8×16 → 9×4×4.
    pub fn branch_shapes(&self) -> [[usize; 3]; CONV_LAYERS + 1] {
        let mut shapes = [[0usize; 3]; CONV_LAYERS + 1];
        shapes[0] = [self.input_h, self.input_w, 1];
        for l in 0..CONV_LAYERS {
            shapes[l + 1] = conv2d_output_shape(
                shapes[l][0],
                shapes[l][1],
                self.conv_channels[l],
                (2, 2),
            );
        }
        shapes
    }

    /// Flattened size of one branch output.
    pub fn branch_flat_dim(&self) -> usize {
        let s = self.branch_shapes()[CONV_LAYERS];
        s[0] * s[1] * s[2]
    }

    /// Concatenated feature size feeding the FC layer (RD branch then RA).
    pub fn concat_dim(&self) -> usize {
        2 * self.branch_flat_dim()
    }

    /// Closed-form trainable parameter count, layer by layer.
    pub fn parameter_count_formula(&self) -> usize {
        let mut conv = 0usize;
        let mut cin = 1usize;
        for &cout in &self.conv_channels {
            conv += 9 * cin * cout + cout;
            cin = cout;
        }
        conv *= 2; // two branches
        let fc = self.obs_dim * self.concat_dim() + self.obs_dim;
        let gru = 3 * (self.hidden_dim * (self.obs_dim + self.hidden_dim) + self.hidden_dim);
        let heads = (self.hidden_dim * STATE_DIM + STATE_DIM)
            + (self.hidden_dim * ALPHA_DIM + ALPHA_DIM)
            + (self.hidden_dim * BETA_DIM + BETA_DIM);
        conv + fc + gru + heads
    }

    /// Hash of the architecture (used to pair checkpoints with configs).
    pub fn arch_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex_string(&hasher.finalize())
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct ConvLayer<T: Scalar> {
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

/// All trainable parameters. The tensor order returned by [`MlCrnnParams::tensors`]
/// is the checkpoint order: RD conv layers (kernels, bias), RA conv layers,
/// FC (W, b), GRU (W_z, b_z, W_r, b_r, W_n, b_n), heads x, α, β (W, b each).
#[derive(Debug, Clone)]
pub struct MlCrnnParams<T: Scalar> {
    pub rd_conv: Vec<ConvLayer<T>>,
    pub ra_conv: Vec<ConvLayer<T>>,
    pub fc_w: Tensor<T>,
    pub fc_b: Tensor<T>,
    pub gru: GruCell<T>,
    pub head_x_w: Tensor<T>,
    pub head_x_b: Tensor<T>,
    pub head_a_w: Tensor<T>,
    pub head_a_b: Tensor<T>,
    pub head_b_w: Tensor<T>,
    pub head_b_b: Tensor<T>,
}

impl<T: Scalar> MlCrnnParams<T> {
    pub fn zeros(config: &MlCrnnConfig) -> Self {
        let branch = |_: ()| -> Vec<ConvLayer<T>> {
            let mut cin = 1usize;
            config
                .conv_channels
                .iter()
                .map(|&cout| {
                    let layer = ConvLayer {
                        kernels: Tensor::zeros(&[3, 3, cin, cout]),
                        bias: Tensor::zeros(&[cout]),
                    };
                    cin = cout;
                    layer
                })
                .collect()
        };
        let cat = config.concat_dim();
        let h = config.hidden_dim;
        MlCrnnParams {
            rd_conv: branch(()),
            ra_conv: branch(()),
            fc_w: Tensor::zeros(&[config.obs_dim, cat]),
            fc_b: Tensor::zeros(&[config.obs_dim]),
            gru: GruCell::zeros(config.obs_dim, h),
            head_x_w: Tensor::zeros(&[STATE_DIM, h]),
            head_x_b: Tensor::zeros(&[STATE_DIM]),
            head_a_w: Tensor::zeros(&[ALPHA_DIM, h]),
            head_a_b: Tensor::zeros(&[ALPHA_DIM]),
            head_b_w: Tensor::zeros(&[BETA_DIM, h]),
            head_b_b: Tensor::zeros(&[BETA_DIM]),
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut v = Vec::with_capacity(16 + 4 * CONV_LAYERS);
        for layer in self.rd_conv.iter().chain(&self.ra_conv) {
            v.push(&layer.kernels);
            v.push(&layer.bias);
        }
        v.push(&self.fc_w);
        v.push(&self.fc_b);
        v.push(&self.gru.w_z);
        v.push(&self.gru.b_z);
        v.push(&self.gru.w_r);
        v.push(&self.gru.b_r);
        v.push(&self.gru.w_n);
        v.push(&self.gru.b_n);
        v.push(&self.head_x_w);
        v.push(&self.head_x_b);
        v.push(&self.head_a_w);
        v.push(&self.head_a_b);
        v.push(&self.head_b_w);
        v.push(&self.head_b_b);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v: Vec<&mut Tensor<T>> = Vec::with_capacity(16 + 4 * CONV_LAYERS);
        for layer in self.rd_conv.iter_mut().chain(self.ra_conv.iter_mut()) {
            v.push(&mut layer.kernels);
            v.push(&mut layer.bias);
        }
        v.push(&mut self.fc_w);
        v.push(&mut self.fc_b);
        v.push(&mut self.gru.w_z);
        v.push(&mut self.gru.b_z);
        v.push(&mut self.gru.w_r);
        v.push(&mut self.gru.b_r);
        v.push(&mut self.gru.w_n);
        v.push(&mut self.gru.b_n);
        v.push(&mut self.head_x_w);
        v.push(&mut self.head_x_b);
        v.push(&mut self.head_a_w);
        v.push(&mut self.head_a_b);
        v.push(&mut self.head_b_w);
        v.push(&mut self.head_b_b);
        v
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Elementwise `self += other` over all tensors (gradient merging).
    pub fn add_assign(&mut self, other: &Self) {
        let o = other.tensors();
        for (t, s) in self.tensors_mut().into_iter().zip(o) {
            for (a, b) in t.data_mut().iter_mut().zip(s.data()) {
                *a += *b;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            for v in t.data_mut() {
                *v *= factor;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }

    pub fn cast<U: Scalar>(&self) -> MlCrnnParams<U> {
        MlCrnnParams {
            rd_conv: self
                .rd_conv
                .iter()
                .map(|l| ConvLayer {
                    kernels: l.kernels.cast(),
                    bias: l.bias.cast(),
                })
                .collect(),
            ra_conv: self
                .ra_conv
                .iter()
                .map(|l| ConvLayer {
                    kernels: l.kernels.cast(),
                    bias: l.bias.cast(),
                })
                .collect(),
            fc_w: self.fc_w.cast(),
            fc_b: self.fc_b.cast(),
            gru: GruCell {
                input_dim: self.gru.input_dim,
                hidden_dim: self.gru.hidden_dim,
                w_z: self.gru.w_z.cast(),
                b_z: self.gru.b_z.cast(),
                w_r: self.gru.w_r.cast(),
                b_r: self.gru.b_r.cast(),
                w_n: self.gru.w_n.cast(),
                b_n: self.gru.b_n.cast(),
            },
            head_x_w: self.head_x_w.cast(),
            head_x_b: self.head_x_b.cast(),
            head_a_w: self.head_a_w.cast(),
            head_a_b: self.head_a_b.cast(),
            head_b_w: self.head_b_w.cast(),
            head_b_b: self.head_b_b.cast(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlCrnnModel<T: Scalar> {
    pub config: MlCrnnConfig,
    pub params: MlCrnnParams<T>,
}

impl<T: Scalar> MlCrnnModel<T> {
    /// Seed-reproducible initialization: uniform `±1/√fan_in` weights, zero
    /// biases. Fan-in is 9·C_in for conv kernels, the input width for the
    /// FC/GRU/head matrices.
    pub fn init(config: MlCrnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = MlCrnnParams::zeros(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |t: &mut Tensor<T>, fan_in: usize| {
            let limit = 1.0 / (fan_in as f64).sqrt();
            for v in t.data_mut() {
                *v = T::from_f64((rng.random::<f64>() * 2.0 - 1.0) * limit);
            }
        };
        let mut cin = 1usize;
        let channels = config.conv_channels;
        for l in 0..CONV_LAYERS {
            fill(&mut params.rd_conv[l].kernels, 9 * cin);
            cin = channels[l];
        }
        cin = 1;
        for l in 0..CONV_LAYERS {
            fill(&mut params.ra_conv[l].kernels, 9 * cin);
            cin = channels[l];
        }
        fill(&mut params.fc_w, config.concat_dim());
        let gru_fan = config.obs_dim + config.hidden_dim;
        fill(&mut params.gru.w_z, gru_fan);
        fill(&mut params.gru.w_r, gru_fan);
        fill(&mut params.gru.w_n, gru_fan);
        fill(&mut params.head_x_w, config.hidden_dim);
        fill(&mut params.head_a_w, config.hidden_dim);
        fill(&mut params.head_b_w, config.hidden_dim);
        Ok(MlCrnnModel { config, params })
    }

    /// Exact parameter count summed over all tensors.
    pub fn count_parameters(&self) -> usize {
        self.params.count()
    }

    pub fn cast<U: Scalar>(&self) -> MlCrnnModel<U> {
        MlCrnnModel {
            config: self.config,
            params: self.params.cast(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_shape_trace() {
        let cfg = MlCrnnConfig::default();
        let shapes = cfg.branch_shapes();
        assert_eq!(shapes[0], [134, 64, 1]);
        assert_eq!(shapes[1], [67, 32, 4]);
        assert_eq!(shapes[2], [34, 16, 8]);
        assert_eq!(shapes[3], [17, 8, 16]);
        assert_eq!(shapes[4], [9, 4, 4]);
        assert_eq!(cfg.branch_flat_dim(), 144);
        assert_eq!(cfg.concat_dim(), 288);
    }

    #[test]
    fn parameter_count_matches_formula_and_paper() {
        let cfg = MlCrnnConfig::default();
        let model = MlCrnnModel::<f32>::init(cfg, 1).unwrap();
        // Per-piece hand counts: conv branches 2·(40+296+1168+580) = 4168,
        // heads 516+516+774 = 1806.
        let conv: usize = 2 * (40 + 296 + 1168 + 580);
        assert_eq!(conv, 4168);
        let heads = 516 + 516 + 774;
        assert_eq!(heads, 1806);
        let fc = 16 * 288 + 16;
        let gru = 3 * ((16 + 128) * 128 + 128);
        assert_eq!(gru, 55_680);
        let total = conv + heads + fc + gru;
        assert_eq!(cfg.parameter_count_formula(), total);
        assert_eq!(model.count_parameters(), total);
        // Single-bias GRU convention: within 1% of the reference 66 730.
        let rel = (total as f64 - 66_730.0).abs() / 66_730.0;
        assert!(rel < 0.01, "parameter count {total} deviates {rel:.4} from 66730");
    }

    #[test]
    fn init_is_reproducible_and_bounded() {
        let cfg = MlCrnnConfig::default();
        let a = MlCrnnModel::<f32>::init(cfg, 42).unwrap();
        let b = MlCrnnModel::<f32>::init(cfg, 42).unwrap();
        for (ta, tb) in a.params.tensors().iter().zip(b.params.tensors()) {
            assert_eq!(ta.data(), tb.data());
        }
        let c = MlCrnnModel::<f32>::init(cfg, 43).unwrap();
        assert_ne!(a.params.fc_w.data(), c.params.fc_w.data());
        // Biases start at zero.
        assert!(a.params.fc_b.data().iter().all(|v| *v == 0.0));
        // Kernel entries bounded by 1/√fan_in.
        let limit = 1.0 / 3.0; // fan_in = 9 for the first layer
        assert!(a.params.rd_conv[0]
            .kernels
            .data()
            .iter()
            .all(|v| v.abs() <= limit as f32));
    }
}
