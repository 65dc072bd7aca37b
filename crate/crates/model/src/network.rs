use eabnet_dsp::ComplexSpectrogram;
use eabnet_tensor::ops::{self, Conv2dSpec, Deconv2dSpec};
use eabnet_tensor::{no_grad, Checkpoint, Initializer, ParamId, ParamStore, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::config::{pad_for, BfType, ModelConfig};
use crate::error::{ModelError, Result};
use crate::layers::{Builder, Conv, Deconv, LayerNorm, Linear, Lstm, Params, Recalibration, Stcm, UNetBlock};
use crate::post::{IdentityPost, PostProcessor};
use crate::spectra::{prepare_input, reference_channel, tensor_to_spectrogram};

pub const CHECKPOINT_FORMAT: &str = "eabnet.model";
pub const CHECKPOINT_VERSION: u32 = 1;

enum Head {
    Conv(Conv),
    Recurrent { norm: LayerNorm, lstm1: Lstm, lstm2: Lstm, fc1: Linear, fc2: Linear },
}

/// Intermediate and final outputs of one forward pass.
pub struct ModelOutput {
    /// `N × C × T × F` real embedding.
    pub embedding: Var,
    /// `N × 2P × T × F` complex filters, or `N × 2 × T × F` reference-channel
    /// mask for the mask-only head.
    pub weights: Var,
    /// `N × 2 × T × F` estimate before post-processing.
    pub beamformed: Var,
    /// `N × 2 × T × F` final estimate.
    pub enhanced: Var,
}

/// Scalar parameter counts per module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBreakdown {
    pub encoder: usize,
    pub encoder_unet: usize,
    pub stcn: usize,
    pub decoder: usize,
    pub decoder_unet: usize,
    pub beamformer: usize,
    pub total: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    config: ModelConfig,
}

pub struct Model {
    config: ModelConfig,
    seed: u64,
    store: ParamStore,
    encoder: Vec<Recalibration<Conv>>,
    stcms: Vec<Stcm>,
    decoder: Vec<Recalibration<Deconv>>,
    head: Head,
    post: Box<dyn PostProcessor>,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("config", &self.config)
            .field("seed", &self.seed)
            .field("parameters", &self.store.count())
            .field("post", &self.post.name())
            .finish()
    }
}

impl Model {
    /// Builds the network with parameters drawn deterministically from
    /// `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut init = Initializer::new(seed);
        let mut b = Builder { store: &mut store, init: &mut init };
        let c = config.embedding_channels;
        let eps = config.norm_eps;
        let widths = config.encoder_widths();
        let (kernel, stride) = (config.glu_kernel, config.glu_stride);

        let mut encoder = Vec::with_capacity(config.encoder_layers);
        for i in 0..config.encoder_layers {
            let name = format!("enc.{i}");
            let cin = if i == 0 { 2 * config.mics } else { c };
            let pad = pad_for(widths[i], kernel.1, stride.1);
            let spec = Conv2dSpec::new(kernel, stride).with_freq_pad(pad, 0);
            let lin = Conv::new(&mut b, &format!("{name}.glu.linear"), cin, c, spec, true)?;
            let gate = Conv::new(&mut b, &format!("{name}.glu.gate"), cin, c, spec, true)?;
            let mut layer = Recalibration::from_parts(&mut b, &name, lin, gate, c, eps)?;
            layer.unet = unet(&mut b, &config, &format!("{name}.unet"), widths[i + 1], config.unet_block_depths_encoder[i])?;
            encoder.push(layer);
        }

        let flat = c * widths[config.encoder_layers];
        let mut stcms = Vec::with_capacity(config.stcn_groups * config.stcm_per_group);
        for g in 0..config.stcn_groups {
            for (m, &d) in config.stcm_dilations.iter().enumerate() {
                let name = format!("stcn.{g}.{m}");
                stcms.push(Stcm::new(&mut b, &name, flat, config.stcm_channels, config.stcm_kernel, d, eps)?);
            }
        }

        let mut decoder = Vec::with_capacity(config.encoder_layers);
        for j in 0..config.encoder_layers {
            let i = config.encoder_layers - 1 - j;
            let name = format!("dec.{j}");
            let pad = pad_for(widths[i], kernel.1, stride.1);
            let spec = Deconv2dSpec::new(kernel, stride, widths[i]).with_freq_pad(pad, 0);
            let lin = Deconv::new(&mut b, &format!("{name}.glu.linear"), 2 * c, c, spec, true)?;
            let gate = Deconv::new(&mut b, &format!("{name}.glu.gate"), 2 * c, c, spec, true)?;
            let mut layer = Recalibration::from_parts(&mut b, &name, lin, gate, c, eps)?;
            layer.unet = unet(&mut b, &config, &format!("{name}.unet"), widths[i], config.unet_block_depths_decoder[j])?;
            decoder.push(layer);
        }

        let out = config.head_channels();
        let head = match config.bf_type {
            BfType::CBf | BfType::MaskOnly => {
                Head::Conv(Conv::new(&mut b, "bf.conv", c, out, Conv2dSpec::new((1, 1), (1, 1)), true)?)
            }
            BfType::RBf => {
                let h = config.lstm_hidden;
                Head::Recurrent {
                    norm: LayerNorm::new(&mut b, "bf.norm", c, eps)?,
                    lstm1: Lstm::new(&mut b, "bf.lstm1", c, h)?,
                    lstm2: Lstm::new(&mut b, "bf.lstm2", h, h)?,
                    fc1: Linear::new(&mut b, "bf.fc1", h, h)?,
                    fc2: Linear::new(&mut b, "bf.fc2", h, out)?,
                }
            }
        };

        Ok(Self { config, seed, store, encoder, stcms, decoder, head, post: Box::new(IdentityPost) })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn num_params(&self) -> usize {
        self.store.count()
    }

    pub fn breakdown(&self) -> ParamBreakdown {
        let s = &self.store;
        let encoder_unet = s.iter().filter(|(_, p)| p.name.starts_with("enc.") && p.name.contains(".unet.")).map(|(_, p)| p.value.numel()).sum();
        let decoder_unet = s.iter().filter(|(_, p)| p.name.starts_with("dec.") && p.name.contains(".unet.")).map(|(_, p)| p.value.numel()).sum();
        ParamBreakdown {
            encoder: s.count_prefix("enc."),
            encoder_unet,
            stcn: s.count_prefix("stcn."),
            decoder: s.count_prefix("dec."),
            decoder_unet,
            beamformer: s.count_prefix("bf."),
            total: s.count(),
        }
    }

    pub fn set_post_processor(&mut self, post: Box<dyn PostProcessor>) {
        self.post = post;
    }

    pub fn post_processor(&self) -> &dyn PostProcessor {
        self.post.as_ref()
    }

    /// Parameter ids of every UNet-block output projection.
    pub fn unet_heads(&self) -> Vec<ParamId> {
        let enc = self.encoder.iter().filter_map(|l| l.unet.as_ref());
        let dec = self.decoder.iter().filter_map(|l| l.unet.as_ref());
        enc.chain(dec).flat_map(UNetBlock::head).collect()
    }

    /// Graph leaves for every parameter, indexed by `ParamId`.
    pub fn param_vars(&self) -> Vec<Var> {
        self.store.iter().map(|(id, _)| self.store.var(id)).collect()
    }

    /// Forward pass with the stored parameters.
    pub fn forward(&self, x: &Tensor) -> Result<ModelOutput> {
        self.forward_with(&self.param_vars(), x)
    }

    /// Forward pass on an `N × 2P × T × F` (compressed) input using the
    /// given parameter leaves.
    pub fn forward_with(&self, p: Params, x: &Tensor) -> Result<ModelOutput> {
        let cfg = &self.config;
        let shape = x.shape();
        if shape.len() != 4 || shape[1] != 2 * cfg.mics || shape[3] != cfg.freq_bins || shape[2] == 0 {
            return Err(ModelError::Input(format!(
                "expected N×{}×T×{} input, got {shape:?}",
                2 * cfg.mics,
                cfg.freq_bins
            )));
        }
        if p.len() != self.store.len() {
            return Err(ModelError::Input(format!("{} parameter leaves for {} parameters", p.len(), self.store.len())));
        }
        let (n, t) = (shape[0], shape[2]);
        let input = Var::constant(x.clone());

        let mut skips = Vec::with_capacity(self.encoder.len());
        let mut h = input.clone();
        for layer in &self.encoder {
            h = layer.forward(p, &h)?;
            skips.push(h.clone());
        }

        let (c, w) = (cfg.embedding_channels, h.shape()[3]);
        let mut z = ops::reshape(&ops::permute(&h, &[0, 1, 3, 2])?, &[n, c * w, t, 1])?;
        for module in &self.stcms {
            z = module.forward(p, &z)?;
        }
        h = ops::permute(&ops::reshape(&z, &[n, c, w, t])?, &[0, 1, 3, 2])?;

        for layer in &self.decoder {
            let skip = skips.pop().expect("one skip per decoder layer");
            h = layer.forward(p, &ops::concat(&[&h, &skip], 1)?)?;
        }
        let embedding = h;
        let f = cfg.freq_bins;

        let weights = self.head(p, &embedding)?;

        let reference = Var::constant(reference_channel(x)?);
        let beamformed = match cfg.bf_type {
            BfType::MaskOnly => ops::filter_and_sum(&weights, &reference, false)?,
            _ => ops::filter_and_sum(&weights, &input, true)?,
        };
        let enhanced = self.post.process(&beamformed, &reference)?;
        if enhanced.shape() != [n, 2, t, f] {
            return Err(ModelError::Input(format!(
                "post-processor {} returned {:?}",
                self.post.name(),
                enhanced.shape()
            )));
        }
        Ok(ModelOutput { embedding, weights, beamformed, enhanced })
    }

    /// Beamforming head applied to an `N × C × T × F` embedding.
    pub fn head_forward(&self, embedding: &Tensor) -> Result<Tensor> {
        let p = self.param_vars();
        Ok(no_grad(|| self.head(&p, &Var::constant(embedding.clone())))?.value().clone())
    }

    fn head(&self, p: Params, embedding: &Var) -> Result<Var> {
        let (n, c, t, f) = match embedding.shape() {
            &[n, c, t, f] if c == self.config.embedding_channels => (n, c, t, f),
            s => return Err(ModelError::Input(format!("embedding {s:?} for {} channels", self.config.embedding_channels))),
        };
        match &self.head {
            Head::Conv(conv) => conv.forward(p, embedding),
            Head::Recurrent { norm, lstm1, lstm2, fc1, fc2 } => {
                let seq = ops::reshape(&ops::permute(embedding, &[0, 3, 2, 1])?, &[n * f, t, c])?;
                let y = lstm2.forward(p, &lstm1.forward(p, &norm.forward(p, &seq)?)?)?;
                let y = fc2.forward(p, &ops::relu(&fc1.forward(p, &y)?))?;
                let out = self.config.head_channels();
                Ok(ops::permute(&ops::reshape(&y, &[n, f, t, out])?, &[0, 3, 2, 1])?)
            }
        }
    }

    /// Enhances a `P`-channel mixture spectrum without recording gradients.
    /// The result is in the compressed domain when `compression` is on.
    pub fn enhance(&self, mixture: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
        let x = prepare_input(mixture, &self.config)?;
        let out = no_grad(|| self.forward(&x))?;
        tensor_to_spectrogram(out.enhanced.value(), 0, mixture)
    }

    /// Checkpoint with the configuration serialised into the header.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let header = Header { format: CHECKPOINT_FORMAT.into(), version: CHECKPOINT_VERSION, config: self.config.clone() };
        let json = serde_json::to_string(&header).expect("config serialises");
        Checkpoint::from_store(&self.store, self.seed, json)
    }

    /// Rebuilds a model from a checkpoint written by [`Model::to_checkpoint`].
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let header: Header = serde_json::from_str(&ckpt.header).map_err(|e| ModelError::Header(e.to_string()))?;
        if header.format != CHECKPOINT_FORMAT || header.version != CHECKPOINT_VERSION {
            return Err(ModelError::Header(format!(
                "expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}",
                header.format, header.version
            )));
        }
        let mut model = Model::new(header.config, ckpt.seed)?;
        ckpt.load_into(&mut model.store)?;
        Ok(model)
    }
}

fn unet(b: &mut Builder, cfg: &ModelConfig, name: &str, width: usize, depth: usize) -> Result<Option<UNetBlock>> {
    if !cfg.use_unet_blocks || depth == 0 {
        return Ok(None);
    }
    let widths = cfg.unet_widths(width, depth).map_err(|m| crate::error::config_err(name, m))?;
    let eps = cfg.norm_eps;
    Ok(Some(UNetBlock::new(b, name, cfg.embedding_channels, &widths, cfg.unet_kernel, cfg.unet_stride, eps)?))
}
