//! Parameterised building blocks. Each layer stores the [`ParamId`]s of
//! its tensors; forward passes look the graph leaves up in a table indexed
//! by parameter id so the same code serves inference, training and
//! finite-difference checks.

use eabnet_tensor::ops::{self, Conv2dSpec, CumulativeMode, Deconv2dSpec};
use eabnet_tensor::{InitScheme, Initializer, ParamId, ParamStore, Var};

use crate::error::Result;

pub(crate) struct Builder<'a> {
    pub store: &'a mut ParamStore,
    pub init: &'a mut Initializer,
}

impl Builder<'_> {
    fn add(&mut self, name: &str, shape: &[usize], scheme: InitScheme) -> Result<ParamId> {
        Ok(self.store.add(name, shape, scheme, self.init)?)
    }

    fn weight(&mut self, name: &str, shape: &[usize], fan_in: usize) -> Result<ParamId> {
        self.add(name, shape, InitScheme::Uniform { bound: 1.0 / (fan_in as f64).sqrt() })
    }
}

pub(crate) type Params<'a> = &'a [Var];

pub(crate) struct Conv {
    w: ParamId,
    b: Option<ParamId>,
    spec: Conv2dSpec,
}

impl Conv {
    pub fn new(
        b: &mut Builder,
        name: &str,
        cin: usize,
        cout: usize,
        spec: Conv2dSpec,
        bias: bool,
    ) -> Result<Self> {
        let (kt, kf) = spec.kernel;
        let fan_in = cin * kt * kf;
        let w = b.weight(&format!("{name}.weight"), &[cout, cin, kt, kf], fan_in)?;
        let bias = if bias { Some(b.weight(&format!("{name}.bias"), &[cout], fan_in)?) } else { None };
        Ok(Self { w, b: bias, spec })
    }

    pub fn forward(&self, p: Params, x: &Var) -> Result<Var> {
        Ok(ops::conv2d(x, &p[self.w.0], self.b.map(|b| &p[b.0]), self.spec)?)
    }
}

pub(crate) struct Deconv {
    w: ParamId,
    b: Option<ParamId>,
    spec: Deconv2dSpec,
}

impl Deconv {
    pub fn new(
        b: &mut Builder,
        name: &str,
        cin: usize,
        cout: usize,
        spec: Deconv2dSpec,
        bias: bool,
    ) -> Result<Self> {
        let (kt, kf) = spec.kernel;
        let fan_in = cout * kt * kf;
        let w = b.weight(&format!("{name}.weight"), &[cin, cout, kt, kf], fan_in)?;
        let bias = if bias { Some(b.weight(&format!("{name}.bias"), &[cout], fan_in)?) } else { None };
        Ok(Self { w, b: bias, spec })
    }

    pub fn forward(&self, p: Params, x: &Var) -> Result<Var> {
        Ok(ops::deconv2d(x, &p[self.w.0], self.b.map(|b| &p[b.0]), self.spec)?)
    }
}

pub(crate) struct Norm {
    gamma: ParamId,
    beta: ParamId,
    mode: CumulativeMode,
    eps: f64,
}

impl Norm {
    pub fn new(b: &mut Builder, name: &str, channels: usize, mode: CumulativeMode, eps: f64) -> Result<Self> {
        let gamma = b.add(&format!("{name}.gamma"), &[channels], InitScheme::Constant(1.0))?;
        let beta = b.add(&format!("{name}.beta"), &[channels], InitScheme::Constant(0.0))?;
        Ok(Self { gamma, beta, mode, eps })
    }

    pub fn forward(&self, p: Params, x: &Var) -> Result<Var> {
        Ok(ops::cumulative_norm(x, &p[self.gamma.0], &p[self.beta.0], self.eps, self.mode)?)
    }
}

/// Instance norm computed separately for every frame: statistics per
/// `(n, c, t)` over frequency only. Causal and frame-local.
pub(crate) struct FrameNorm {
    gamma: ParamId,
    beta: ParamId,
    eps: f64,
}

impl FrameNorm {
    pub fn new(b: &mut Builder, name: &str, channels: usize, eps: f64) -> Result<Self> {
        let gamma = b.add(&format!("{name}.gamma"), &[channels], InitScheme::Constant(1.0))?;
        let beta = b.add(&format!("{name}.beta"), &[channels], InitScheme::Constant(0.0))?;
        Ok(Self { gamma, beta, eps })
    }

    pub fn forward(&self, p: Params, x: &Var) -> Result<Var> {
        let &[n, c, t, f] = x.shape() else { unreachable!("4-D feature map") };
        let frames = ops::reshape(&ops::permute(x, &[0, 2, 1, 3])?, &[n * t, c, 1, f])?;
        let y = ops::instance_norm(&frames, &p[self.gamma.0], &p[self.beta.0], self.eps)?;
        Ok(ops::permute(&ops::reshape(&y, &[n, t, c, f])?, &[0, 2, 1, 3])?)
    }
}

pub(crate) struct Prelu {
    alpha: ParamId,
}

impl Prelu {
    pub fn new(b: &mut Builder, name: &str, channels: usize) -> Result<Self> {
        Ok(Self { alpha: b.add(&format!("{name}.alpha"), &[channels], InitScheme::Constant(0.25))? })
    }

    pub fn forward(&self, p: Params, x: &Var) -> Result<Var> {
        Ok(ops::prelu(x, &p[self.alpha.0])?)
    }
}

pub(crate) struct LayerNorm {
    gamma: ParamId,
    beta: ParamId,
    eps: f64,
}

impl LayerNorm {
    pub fn new(b: &mut Builder, name: &str, width: usize, eps: f64) -> Result<Self> {
        let gamma = b.add(&format!("{name}.gamma"), &[width], InitScheme::Constant(1.0))?;
        let beta = b.add(&format!("{name}.beta"), &[width], InitScheme::Constant(0.0))?;
        Ok(Self { gamma, beta, eps })
    }

    pub fn forward(&self, p: Params, x: &Var) -> Result<Var> {
        Ok(ops::layer_norm(x, &p[self.gamma.0], &p[self.beta.0], self.eps)?)
    }
}

pub(crate) struct Linear {
    w: ParamId,
    b: ParamId,
}

impl Linear {
    pub fn new(b: &mut Builder, name: &str, input: usize, output: usize) -> Result<Self> {
        let w = b.weight(&format!("{name}.weight"), &[output, input], input)?;
        let bias = b.weight(&format!("{name}.bias"), &[output], input)?;
        Ok(Self { w, b: bias })
    }

    pub fn forward(&self, p: Params, x: &Var) -> Result<Var> {
        Ok(ops::linear(x, &p[self.w.0], Some(&p[self.b.0]))?)
    }
}

pub(crate) struct Lstm {
    w_ih: ParamId,
    w_hh: ParamId,
    bias: ParamId,
}

impl Lstm {
    pub fn new(b: &mut Builder, name: &str, input: usize, hidden: usize) -> Result<Self> {
        let w_ih = b.weight(&format!("{name}.w_ih"), &[4 * hidden, input], hidden)?;
        let w_hh = b.weight(&format!("{name}.w_hh"), &[4 * hidden, hidden], hidden)?;
        let bias = b.weight(&format!("{name}.bias"), &[4 * hidden], hidden)?;
        Ok(Self { w_ih, w_hh, bias })
    }

    pub fn forward(&self, p: Params, x: &Var) -> Result<Var> {
        Ok(ops::lstm(x, &p[self.w_ih.0], &p[self.w_hh.0], &p[self.bias.0])?)
    }
}

/// Conv → frame norm → PReLU, used inside the sub-UNet.
pub(crate) struct ConvUnit {
    conv: Conv,
    norm: FrameNorm,
    act: Prelu,
}

pub(crate) struct DeconvUnit {
    conv: Deconv,
    norm: FrameNorm,
    act: Prelu,
}

/// Light-weight sub-UNet over frequency with a residual connection:
/// `out(x) + x`. Kernels have time extent 1, so frames are independent.
pub(crate) struct UNetBlock {
    down: Vec<ConvUnit>,
    up: Vec<DeconvUnit>,
    out: Conv,
}

impl UNetBlock {
    pub fn new(
        b: &mut Builder,
        name: &str,
        channels: usize,
        widths: &[usize],
        kernel: (usize, usize),
        stride: (usize, usize),
        eps: f64,
    ) -> Result<Self> {
        let depth = widths.len() - 1;
        let mut down = Vec::with_capacity(depth);
        for level in 0..depth {
            let w = widths[level];
            let pad = crate::config::pad_for(w, kernel.1, stride.1);
            let spec = Conv2dSpec::new(kernel, stride).with_freq_pad(pad, 0);
            let n = format!("{name}.down{level}");
            down.push(ConvUnit {
                conv: Conv::new(b, &format!("{n}.conv"), channels, channels, spec, false)?,
                norm: FrameNorm::new(b, &format!("{n}.norm"), channels, eps)?,
                act: Prelu::new(b, &format!("{n}.prelu"), channels)?,
            });
        }
        let mut up = Vec::with_capacity(depth);
        for level in (0..depth).rev() {
            let w = widths[level];
            let pad = crate::config::pad_for(w, kernel.1, stride.1);
            let spec = Deconv2dSpec::new(kernel, stride, w).with_freq_pad(pad, 0);
            let cin = if level + 1 == depth { channels } else { 2 * channels };
            let n = format!("{name}.up{level}");
            up.push(DeconvUnit {
                conv: Deconv::new(b, &format!("{n}.deconv"), cin, channels, spec, false)?,
                norm: FrameNorm::new(b, &format!("{n}.norm"), channels, eps)?,
                act: Prelu::new(b, &format!("{n}.prelu"), channels)?,
            });
        }
        let out = Conv::new(b, &format!("{name}.out"), 2 * channels, channels, Conv2dSpec::new((1, 1), (1, 1)), true)?;
        Ok(Self { down, up, out })
    }

    pub fn forward(&self, p: Params, x: &Var) -> Result<Var> {
        let mut skips = vec![x.clone()];
        for unit in &self.down {
            let h = unit.conv.forward(p, skips.last().unwrap())?;
            let h = unit.act.forward(p, &unit.norm.forward(p, &h)?)?;
            skips.push(h);
        }
        let mut h = skips.pop().unwrap();
        for unit in &self.up {
            let u = unit.conv.forward(p, &h)?;
            let u = unit.act.forward(p, &unit.norm.forward(p, &u)?)?;
            h = ops::concat(&[&u, &skips.pop().unwrap()], 1)?;
        }
        Ok(ops::add(&self.out.forward(p, &h)?, x)?)
    }

    /// Parameters of the output projection, whose zeroing turns the block
    /// into the identity.
    pub fn head(&self) -> Vec<ParamId> {
        self.out.weight_and_bias()
    }
}

impl Conv {
    pub fn weight_and_bias(&self) -> Vec<ParamId> {
        std::iter::once(self.w).chain(self.b).collect()
    }
}

/// Recalibration encoder (or decoder) layer: 2-D (de)GLU, cumulative
/// norm, PReLU and an optional UNet-block.
pub(crate) struct Recalibration<C> {
    linear: C,
    gate: C,
    norm: Norm,
    act: Prelu,
    pub unet: Option<UNetBlock>,
}

pub(crate) trait Kernel {
    fn apply(&self, p: Params, x: &Var) -> Result<Var>;
}

impl Kernel for Conv {
    fn apply(&self, p: Params, x: &Var) -> Result<Var> {
        self.forward(p, x)
    }
}

impl Kernel for Deconv {
    fn apply(&self, p: Params, x: &Var) -> Result<Var> {
        self.forward(p, x)
    }
}

impl<C: Kernel> Recalibration<C> {
    pub fn from_parts(b: &mut Builder, name: &str, linear: C, gate: C, channels: usize, eps: f64) -> Result<Self> {
        Ok(Self {
            linear,
            gate,
            norm: Norm::new(b, &format!("{name}.norm"), channels, CumulativeMode::PerChannel, eps)?,
            act: Prelu::new(b, &format!("{name}.prelu"), channels)?,
            unet: None,
        })
    }

    pub fn forward(&self, p: Params, x: &Var) -> Result<Var> {
        let g = ops::glu(&self.linear.apply(p, x)?, &self.gate.apply(p, x)?)?;
        let h = self.act.forward(p, &self.norm.forward(p, &g)?)?;
        match &self.unet {
            Some(u) => u.forward(p, &h),
            None => Ok(h),
        }
    }
}

/// Squeezed temporal convolution module on a flattened `N × D × T × 1`
/// sequence: pointwise squeeze `D → H`, a gated pair of causal dilated
/// convolutions over time, pointwise expansion `H → D`, residual add.
pub(crate) struct Stcm {
    input: Conv,
    main_act: Prelu,
    main_norm: Norm,
    main: Conv,
    gate_act: Prelu,
    gate_norm: Norm,
    gate: Conv,
    out_act: Prelu,
    out_norm: Norm,
    output: Conv,
}

impl Stcm {
    pub fn new(
        b: &mut Builder,
        name: &str,
        width: usize,
        hidden: usize,
        kernel: usize,
        dilation: usize,
        eps: f64,
    ) -> Result<Self> {
        let point = Conv2dSpec::new((1, 1), (1, 1));
        let dilated = Conv2dSpec::new((kernel, 1), (1, 1)).with_dilation(dilation);
        let all = CumulativeMode::AllChannels;
        Ok(Self {
            input: Conv::new(b, &format!("{name}.in"), width, hidden, point, true)?,
            main_act: Prelu::new(b, &format!("{name}.main.prelu"), hidden)?,
            main_norm: Norm::new(b, &format!("{name}.main.norm"), hidden, all, eps)?,
            main: Conv::new(b, &format!("{name}.main.conv"), hidden, hidden, dilated, true)?,
            gate_act: Prelu::new(b, &format!("{name}.gate.prelu"), hidden)?,
            gate_norm: Norm::new(b, &format!("{name}.gate.norm"), hidden, all, eps)?,
            gate: Conv::new(b, &format!("{name}.gate.conv"), hidden, hidden, dilated, true)?,
            out_act: Prelu::new(b, &format!("{name}.out.prelu"), hidden)?,
            out_norm: Norm::new(b, &format!("{name}.out.norm"), hidden, all, eps)?,
            output: Conv::new(b, &format!("{name}.out.conv"), hidden, width, point, true)?,
        })
    }

    pub fn forward(&self, p: Params, x: &Var) -> Result<Var> {
        let a = self.input.forward(p, x)?;
        let main = self.main.forward(p, &self.main_norm.forward(p, &self.main_act.forward(p, &a)?)?)?;
        let gate = self.gate.forward(p, &self.gate_norm.forward(p, &self.gate_act.forward(p, &a)?)?)?;
        let h = ops::glu(&main, &gate)?;
        let h = self.out_norm.forward(p, &self.out_act.forward(p, &h)?)?;
        Ok(ops::add(&self.output.forward(p, &h)?, x)?)
    }
}
