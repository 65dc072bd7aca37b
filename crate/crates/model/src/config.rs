use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Beamforming head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BfType {
    /// Pointwise convolution `C → 2P`.
    #[serde(rename = "C-BF")]
    CBf,
    /// LayerNorm, two frequency-shared LSTMs along time, two FC layers.
    #[serde(rename = "R-BF")]
    RBf,
    /// No beamforming: a complex mask on the reference channel.
    #[serde(rename = "mask-only")]
    MaskOnly,
}

impl BfType {
    pub fn name(&self) -> &'static str {
        match self {
            BfType::CBf => "C-BF",
            BfType::RBf => "R-BF",
            BfType::MaskOnly => "mask-only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub mics: usize,
    pub freq_bins: usize,
    pub embedding_channels: usize,
    pub encoder_layers: usize,
    pub glu_kernel: (usize, usize),
    pub glu_stride: (usize, usize),
    pub unet_block_depths_encoder: Vec<usize>,
    pub unet_block_depths_decoder: Vec<usize>,
    pub unet_kernel: (usize, usize),
    pub unet_stride: (usize, usize),
    pub stcn_groups: usize,
    pub stcm_per_group: usize,
    pub stcm_kernel: usize,
    pub stcm_dilations: Vec<usize>,
    /// Squeezed channel width inside each S-TCM.
    pub stcm_channels: usize,
    pub bf_type: BfType,
    /// LSTM and FC hidden width of the R-BF head.
    pub lstm_hidden: usize,
    pub use_unet_blocks: bool,
    pub multi_output: bool,
    pub compression: bool,
    pub norm_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            mics: 9,
            freq_bins: 161,
            embedding_channels: 64,
            encoder_layers: 5,
            glu_kernel: (2, 3),
            glu_stride: (1, 2),
            unet_block_depths_encoder: vec![4, 3, 2, 1, 0],
            unet_block_depths_decoder: vec![1, 2, 3, 4, 0],
            unet_kernel: (1, 3),
            unet_stride: (1, 2),
            stcn_groups: 3,
            stcm_per_group: 6,
            stcm_kernel: 5,
            stcm_dilations: vec![1, 2, 4, 8, 16, 32],
            stcm_channels: 64,
            bf_type: BfType::RBf,
            lstm_hidden: 64,
            use_unet_blocks: true,
            multi_output: true,
            compression: true,
            norm_eps: 1e-5,
        }
    }
}

impl ModelConfig {
    /// Small network used for smoke training and gradient checks:
    /// two microphones, eight channels, three encoder layers.
    pub fn tiny() -> Self {
        Self {
            mics: 2,
            embedding_channels: 8,
            encoder_layers: 3,
            unet_block_depths_encoder: vec![2, 1, 0],
            unet_block_depths_decoder: vec![1, 2, 0],
            stcn_groups: 2,
            stcm_per_group: 3,
            stcm_dilations: vec![1, 2, 4],
            stcm_channels: 16,
            lstm_hidden: 16,
            ..Self::default()
        }
    }

    /// The mask-only variant of this configuration (MO off).
    pub fn mask_only(&self) -> Self {
        Self { bf_type: BfType::MaskOnly, multi_output: false, ..self.clone() }
    }

    /// Number of output channels of the beamforming head.
    pub fn head_channels(&self) -> usize {
        match self.bf_type {
            BfType::MaskOnly => 2,
            _ => 2 * self.mics,
        }
    }

    /// Frequency widths along the encoder: `widths[0] = freq_bins`,
    /// `widths[i+1]` is the output width of encoder layer `i`.
    pub fn encoder_widths(&self) -> Vec<usize> {
        let mut widths = vec![self.freq_bins];
        for _ in 0..self.encoder_layers {
            let w = *widths.last().unwrap();
            widths.push(downsampled_width(w, self.glu_kernel.1, self.glu_stride.1));
        }
        widths
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mics", self.mics),
            ("freq_bins", self.freq_bins),
            ("embedding_channels", self.embedding_channels),
            ("encoder_layers", self.encoder_layers),
            ("stcn_groups", self.stcn_groups),
            ("stcm_per_group", self.stcm_per_group),
            ("stcm_kernel", self.stcm_kernel),
            ("stcm_channels", self.stcm_channels),
            ("lstm_hidden", self.lstm_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(config_err(name, "must be positive"));
            }
        }
        for (name, (a, b)) in [
            ("glu_kernel", self.glu_kernel),
            ("glu_stride", self.glu_stride),
            ("unet_kernel", self.unet_kernel),
            ("unet_stride", self.unet_stride),
        ] {
            if a == 0 || b == 0 {
                return Err(config_err(name, format!("degenerate ({a}, {b})")));
            }
        }
        if self.glu_stride.0 != 1 || self.unet_stride.0 != 1 {
            return Err(config_err("stride", "time stride must be 1 to keep one output per frame"));
        }
        if self.unet_kernel.0 != 1 {
            return Err(config_err("unet_kernel", "sub-UNet kernels must have time extent 1"));
        }
        if self.unet_block_depths_encoder.len() != self.encoder_layers {
            return Err(config_err(
                "unet_block_depths_encoder",
                format!("{} depths for {} encoder layers", self.unet_block_depths_encoder.len(), self.encoder_layers),
            ));
        }
        if self.unet_block_depths_decoder.len() != self.encoder_layers {
            return Err(config_err(
                "unet_block_depths_decoder",
                format!("{} depths for {} decoder layers", self.unet_block_depths_decoder.len(), self.encoder_layers),
            ));
        }
        if self.stcm_dilations.len() != self.stcm_per_group {
            return Err(config_err(
                "stcm_dilations",
                format!("{} dilations for {} modules per group", self.stcm_dilations.len(), self.stcm_per_group),
            ));
        }
        if self.stcm_dilations.contains(&0) {
            return Err(config_err("stcm_dilations", "dilation must be positive"));
        }
        if (self.bf_type == BfType::MaskOnly) == self.multi_output {
            return Err(config_err(
                "bf_type",
                "mask-only requires multi_output = false and beamforming heads require multi_output = true",
            ));
        }
        if !(self.norm_eps > 0.0) {
            return Err(config_err("norm_eps", "must be positive"));
        }

        let mut w = self.freq_bins;
        for i in 0..self.encoder_layers {
            if w + pad_for(w, self.glu_kernel.1, self.glu_stride.1) < self.glu_kernel.1 {
                return Err(config_err(format!("encoder layer {i}"), format!("width {w} too small for kernel")));
            }
            w = downsampled_width(w, self.glu_kernel.1, self.glu_stride.1);
        }
        if self.use_unet_blocks {
            let widths = self.encoder_widths();
            let layers = (0..self.encoder_layers)
                .map(|i| (format!("encoder layer {i} UNet-block"), widths[i + 1], self.unet_block_depths_encoder[i]))
                .chain((0..self.encoder_layers).map(|j| {
                    let i = self.encoder_layers - 1 - j;
                    (format!("decoder layer {j} UNet-block"), widths[i], self.unet_block_depths_decoder[j])
                }));
            for (name, width, depth) in layers {
                self.unet_widths(width, depth).map_err(|m| config_err(name, m))?;
            }
        }
        Ok(())
    }

    /// Frequency widths inside a sub-UNet of depth `depth` at `width`.
    pub(crate) fn unet_widths(&self, width: usize, depth: usize) -> std::result::Result<Vec<usize>, String> {
        let (kf, sf) = (self.unet_kernel.1, self.unet_stride.1);
        let mut widths = vec![width];
        for level in 0..depth {
            let w = *widths.last().unwrap();
            if w < 2 || w + pad_for(w, kf, sf) < kf {
                return Err(format!("width {width} too small for {depth} halvings (level {level} has width {w})"));
            }
            widths.push(downsampled_width(w, kf, sf));
        }
        Ok(widths)
    }
}

/// Output width `⌊w / s⌋` (at least one) of a strided frequency convolution.
pub(crate) fn downsampled_width(w: usize, _kernel: usize, stride: usize) -> usize {
    (w / stride).max(1)
}

/// Low-side frequency padding that makes a kernel-`k` stride-`s`
/// convolution map width `w` to [`downsampled_width`].
pub(crate) fn pad_for(w: usize, kernel: usize, stride: usize) -> usize {
    let out = downsampled_width(w, kernel, stride);
    ((out - 1) * stride + kernel).saturating_sub(w)
}
