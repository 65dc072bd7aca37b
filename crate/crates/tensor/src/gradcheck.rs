//! Central finite-difference gradient checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::{backward, no_grad, Var};
use crate::ops;
use crate::tensor::Tensor;

/// `|a - n| / (max(|a|, |n|) + 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs().max(numeric.abs()) + 1e-8)
}

/// `(f(x+h) - f(x-h)) / 2h`.
pub fn central_difference(mut f: impl FnMut(f64) -> Result<f64>, x: f64, h: f64) -> Result<f64> {
    Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
}

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Upper bound on checked elements per input; larger inputs are
    /// sub-sampled.
    pub max_per_input: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-5, max_per_input: 64, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input, element)` with the largest error.
    pub worst: (usize, usize),
    pub checked: usize,
}

/// Compares the analytic gradient of `sum(R ⊙ f(inputs))`, for a fixed
/// random projection `R`, against central differences.
pub fn check_gradients<F>(inputs: &[Tensor], f: F, options: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let vars: Vec<Var> = inputs.iter().map(|t| Var::variable(t.clone())).collect();
    let out = f(&vars)?;
    let projection = Tensor::from_fn(out.shape().to_vec(), |_| rng.gen_range(-1.0..1.0));
    let proj = Var::constant(projection.clone());
    let loss = ops::sum(&ops::mul(&out, &proj)?);
    let grads = backward(&loss)?;

    let eval = |values: &[Tensor]| -> Result<f64> {
        no_grad(|| {
            let vs: Vec<Var> = values.iter().map(|t| Var::constant(t.clone())).collect();
            Ok(f(&vs)?.value().dot(&projection))
        })
    };

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: (0, 0), checked: 0 };
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (k, var) in vars.iter().enumerate() {
        let n = inputs[k].numel();
        let zeros = Tensor::zeros(inputs[k].shape().to_vec());
        let analytic = grads.wrt(var).unwrap_or(&zeros);
        let indices: Vec<usize> = if n <= options.max_per_input {
            (0..n).collect()
        } else {
            (0..options.max_per_input).map(|_| rng.gen_range(0..n)).collect()
        };
        for i in indices {
            let x0 = inputs[k].data()[i];
            let numeric = central_difference(
                |x| {
                    work[k].data_mut()[i] = x;
                    eval(&work)
                },
                x0,
                options.step,
            )?;
            work[k].data_mut()[i] = x0;
            let err = relative_error(analytic.data()[i], numeric);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (k, i);
            }
        }
    }
    Ok(report)
}

/// Directional variant of [`check_gradients`] for large graphs. For each
/// input `k` the probe direction is `v = ĝ + r̂/2`, the normalised analytic
/// gradient plus half a random unit vector, and `⟨g, v⟩` is compared with
/// the central difference of `L(x_k + h·v)`. `L` is `f` itself, which must
/// be scalar. The gradient component keeps the projected derivative at
/// least `|g|/2` (a purely random direction can nearly cancel it); the
/// random component means an erroneous `g` is still detected.
///
/// Each direction is differenced at the steps in `steps`, in order, until
/// one agrees to 1e-6; the smallest error is reported. In deep
/// piecewise-linear networks small steps lose derivatives to rounding noise
/// while large steps straddle PReLU kinks, but a wrong gradient disagrees
/// at every step.
pub fn check_directional<F>(inputs: &[Tensor], f: F, steps: &[f64], seed: u64) -> Result<GradCheckReport>
where
    F: Fn(&[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars: Vec<Var> = inputs.iter().map(|t| Var::variable(t.clone())).collect();
    let loss = f(&vars)?;
    let grads = backward(&loss)?;
    let eval = |values: &[Tensor]| -> Result<f64> {
        no_grad(|| {
            let vs: Vec<Var> = values.iter().map(|t| Var::constant(t.clone())).collect();
            Ok(f(&vs)?.value().data()[0])
        })
    };

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: (0, 0), checked: 0 };
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (k, var) in vars.iter().enumerate() {
        let n = inputs[k].numel();
        let zeros = Tensor::zeros(inputs[k].shape().to_vec());
        let g = grads.wrt(var).unwrap_or(&zeros).data();
        let random: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (gn, rn) = (norm(g), norm(&random));
        let direction: Vec<f64> = g
            .iter()
            .zip(&random)
            .map(|(gi, ri)| if gn > 0.0 { gi / gn } else { 0.0 } + 0.5 * ri / rn)
            .collect();
        let analytic: f64 = g.iter().zip(&direction).map(|(a, b)| a * b).sum();
        let mut err = f64::INFINITY;
        for &h in steps {
            if err <= 1e-6 {
                break;
            }
            let numeric = central_difference(
                |s| {
                    for ((w, x0), d) in work[k].data_mut().iter_mut().zip(inputs[k].data()).zip(&direction) {
                        *w = x0 + s * d;
                    }
                    eval(&work)
                },
                0.0,
                h,
            )?;
            err = err.min(relative_error(analytic, numeric));
        }
        work[k] = inputs[k].clone();
        report.checked += 1;
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst = (k, 0);
        }
    }
    Ok(report)
}
