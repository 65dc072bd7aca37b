use eabnet_tensor::ops::{self, Conv2dSpec, CumulativeMode, Deconv2dSpec, LstmWeights};
use eabnet_tensor::{
    backward, no_grad, read_checkpoint, write_checkpoint, Checkpoint, InitScheme, Initializer, ParamStore,
    Tensor, TensorError, Var,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape.to_vec(), |_| rng.gen_range(-1.0..1.0))
}

fn c(t: &Tensor) -> Var {
    Var::constant(t.clone())
}

/// Direct convolution over an explicitly zero-padded copy of the input.
fn conv_oracle(x: &Tensor, w: &Tensor, b: &[f64], spec: &Conv2dSpec) -> Vec<f64> {
    let [n, ci, t, f] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let [co, _, kt, kf] = [w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]];
    let d = spec.dilation_time;
    let tp = if spec.causal { (kt - 1) * d } else { 0 };
    let (pl, ph) = spec.freq_pad;
    let (pt, pf) = (t + tp, f + pl + ph);
    let padded = |bn: usize, ch: usize, tt: usize, ff: usize| -> f64 {
        if tt < tp || ff < pl || ff >= pl + f {
            0.0
        } else {
            x.data()[((bn * ci + ch) * t + tt - tp) * f + ff - pl]
        }
    };
    let to = (pt - (kt - 1) * d - 1) / spec.stride.0 + 1;
    let fo = (pf - kf) / spec.stride.1 + 1;
    let mut out = Vec::new();
    for bn in 0..n {
        for oc in 0..co {
            for ot in 0..to {
                for of in 0..fo {
                    let mut acc = b[oc];
                    for ic in 0..ci {
                        for a in 0..kt {
                            for k in 0..kf {
                                acc += w.data()[((oc * ci + ic) * kt + a) * kf + k]
                                    * padded(bn, ic, ot * spec.stride.0 + a * d, of * spec.stride.1 + k);
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    out
}

#[test]
fn conv2d_matches_nested_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..8 {
        let kt = 1 + case % 3;
        let spec = Conv2dSpec::new((kt, 3), (1 + case % 2, 2))
            .with_freq_pad(1, case % 2)
            .with_dilation(1 + case % 2);
        let spec = if case == 7 { spec.non_causal() } else { spec };
        let x = rand_tensor(&mut rng, &[2, 3, 7, 11]);
        let w = rand_tensor(&mut rng, &[4, 3, kt, 3]);
        let b = rand_tensor(&mut rng, &[4]);
        let y = ops::conv2d(&c(&x), &c(&w), Some(&c(&b)), spec).unwrap();
        let expect = conv_oracle(&x, &w, b.data(), &spec);
        assert_eq!(y.data().len(), expect.len());
        for (a, e) in y.data().iter().zip(&expect) {
            assert!((a - e).abs() < 1e-12, "case {case}: {a} vs {e}");
        }
    }
}

#[test]
fn conv_with_one_hot_kernel_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = rand_tensor(&mut rng, &[1, 1, 5, 6]);
    let w = Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap();
    let y = ops::conv2d(&c(&x), &c(&w), None, Conv2dSpec::new((1, 1), (1, 1))).unwrap();
    assert_eq!(y.data(), x.data());
}

#[test]
fn conv_parameter_count_formula() {
    let mut init = Initializer::new(0);
    let mut store = ParamStore::new();
    let (kt, kf, ci, co) = (2, 3, 64, 64);
    store.add("w", &[co, ci, kt, kf], InitScheme::KaimingUniform { fan_in: ci * kt * kf }, &mut init).unwrap();
    store.add("b", &[co], InitScheme::Uniform { bound: 0.1 }, &mut init).unwrap();
    let mut enumerated = 0;
    for _ in 0..co {
        for _ in 0..ci {
            for _ in 0..kt * kf {
                enumerated += 1;
            }
        }
        enumerated += 1;
    }
    assert_eq!(store.count(), enumerated);
    assert_eq!(store.count(), kt * kf * ci * co + co);
}

#[test]
fn deconv_is_adjoint_of_causal_conv() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (kt, dil, width) in [(1, 1, 161), (2, 1, 40), (2, 2, 9), (3, 1, 10)] {
        let fwd = Conv2dSpec::new((kt, 3), (1, 2)).with_freq_pad(1, 0).with_dilation(dil);
        let t = 6;
        let (_, fo) = ops::conv2d_output_size(&fwd, t, width).unwrap();
        let mut bwd = Deconv2dSpec::new((kt, 3), (1, 2), width).with_freq_pad(1, 0).non_causal();
        bwd.dilation_time = dil;
        let x = rand_tensor(&mut rng, &[2, 3, t, width]);
        let y = rand_tensor(&mut rng, &[2, 4, t, fo]);
        let w = rand_tensor(&mut rng, &[4, 3, kt, 3]);
        let ax = ops::conv2d(&c(&x), &c(&w), None, fwd).unwrap();
        let aty = ops::deconv2d(&c(&y), &c(&w), None, bwd).unwrap();
        let lhs = ax.value().dot(&y);
        let rhs = x.dot(aty.value());
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}

#[test]
fn encoder_width_chain_inverts() {
    let spec = Conv2dSpec::new((2, 3), (1, 2)).with_freq_pad(1, 0);
    let mut widths = vec![161];
    for _ in 0..5 {
        let w = *widths.last().unwrap();
        widths.push(ops::conv2d_output_size(&spec, 4, w).unwrap().1);
    }
    assert_eq!(widths, [161, 80, 40, 20, 10, 5]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for pair in widths.windows(2).rev() {
        let spec = Deconv2dSpec::new((2, 3), (1, 2), pair[0]).with_freq_pad(1, 0);
        let x = rand_tensor(&mut rng, &[1, 1, 3, pair[1]]);
        let w = rand_tensor(&mut rng, &[1, 1, 2, 3]);
        let y = ops::deconv2d(&c(&x), &c(&w), None, spec).unwrap();
        assert_eq!(y.shape()[3], pair[0]);
    }
}

/// Zeroing input frames after `t0` must leave outputs up to `t0`
/// bit-identical.
fn assert_causal(name: &str, frames: usize, input: &Tensor, f: impl Fn(&Tensor) -> Tensor) {
    let base = f(input);
    let shape = input.shape().to_vec();
    let per_frame_in: usize = shape[3..].iter().product();
    let out_shape = base.shape().to_vec();
    let per_frame_out: usize = out_shape[3..].iter().product();
    for t0 in 0..frames - 1 {
        let mut cut = input.clone();
        let lead: usize = shape[..2].iter().product();
        for l in 0..lead {
            for t in t0 + 1..frames {
                let start = (l * frames + t) * per_frame_in;
                cut.data_mut()[start..start + per_frame_in].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let out = f(&cut);
        let lead_out: usize = out_shape[..2].iter().product();
        for l in 0..lead_out {
            for t in 0..=t0 {
                let start = (l * frames + t) * per_frame_out;
                assert_eq!(
                    &out.data()[start..start + per_frame_out],
                    &base.data()[start..start + per_frame_out],
                    "{name}: frame {t} changed after cutting at {t0}"
                );
            }
        }
    }
}

#[test]
fn causal_layers_ignore_future_frames() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let frames = 7;
    let x = rand_tensor(&mut rng, &[2, 3, frames, 9]);
    let w = rand_tensor(&mut rng, &[4, 3, 2, 3]);
    let wd = rand_tensor(&mut rng, &[3, 2, 2, 3]);
    let g = rand_tensor(&mut rng, &[3]);
    let spec = Conv2dSpec::new((2, 3), (1, 2)).with_freq_pad(1, 0);
    assert_causal("conv2d", frames, &x, |x| ops::conv2d(&c(x), &c(&w), None, spec).unwrap().value().clone());
    let dil = Conv2dSpec::new((3, 1), (1, 1)).with_dilation(2);
    let wdil = rand_tensor(&mut rng, &[2, 3, 3, 1]);
    assert_causal("dilated conv2d", frames, &x, |x| {
        ops::conv2d(&c(x), &c(&wdil), None, dil).unwrap().value().clone()
    });
    let dspec = Deconv2dSpec::new((2, 3), (1, 2), 18).with_freq_pad(1, 0);
    assert_causal("deconv2d", frames, &x, |x| ops::deconv2d(&c(x), &c(&wd), None, dspec).unwrap().value().clone());
    for mode in [CumulativeMode::PerChannel, CumulativeMode::AllChannels] {
        assert_causal("cumulative_norm", frames, &x, |x| {
            ops::cumulative_norm(&c(x), &c(&g), &c(&g), 1e-5, mode).unwrap().value().clone()
        });
    }
}

#[test]
fn lstm_matches_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (i, h, t) = (3, 4, 6);
    let w_ih = rand_tensor(&mut rng, &[4 * h, i]);
    let w_hh = rand_tensor(&mut rng, &[4 * h, h]);
    let bias = rand_tensor(&mut rng, &[4 * h]);
    let x = rand_tensor(&mut rng, &[1, t, i]);
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let (mut hs, mut cs) = (vec![0.0; h], vec![0.0; h]);
    let mut expect = Vec::new();
    for step in 0..t {
        let xt = &x.data()[step * i..(step + 1) * i];
        let pre = |r: usize| -> f64 {
            let mut acc = bias.data()[r];
            for k in 0..i {
                acc += w_ih.data()[r * i + k] * xt[k];
            }
            for k in 0..h {
                acc += w_hh.data()[r * h + k] * hs[k];
            }
            acc
        };
        let mut nh = vec![0.0; h];
        for k in 0..h {
            let (ig, fg, gg, og) = (sig(pre(k)), sig(pre(h + k)), pre(2 * h + k).tanh(), sig(pre(3 * h + k)));
            cs[k] = fg * cs[k] + ig * gg;
            nh[k] = og * cs[k].tanh();
        }
        hs = nh;
        expect.extend_from_slice(&hs);
    }
    let y = ops::lstm(&c(&x), &c(&w_ih), &c(&w_hh), &c(&bias)).unwrap();
    for (a, e) in y.data().iter().zip(&expect) {
        assert!((a - e).abs() < 1e-12);
    }
    let weights = LstmWeights {
        w_ih: w_ih.data().to_vec(),
        w_hh: w_hh.data().to_vec(),
        bias: bias.data().to_vec(),
        input_size: i,
        hidden: h,
    };
    let (mut hh, mut cc) = (vec![0.0; h], vec![0.0; h]);
    for step in 0..t {
        (hh, cc) = ops::lstm_step(&weights, &x.data()[step * i..(step + 1) * i], &hh, &cc).unwrap();
    }
    for (a, e) in hh.iter().zip(&expect[(t - 1) * h..]) {
        assert!((a - e).abs() < 1e-12);
    }
}

#[test]
fn layer_norm_matches_direct_formula_and_is_affine_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = rand_tensor(&mut rng, &[5, 8]);
    let ones = Tensor::full([8], 1.0);
    let zeros = Tensor::zeros([8]);
    let y = ops::layer_norm(&c(&x), &c(&ones), &c(&zeros), 1e-5).unwrap();
    for r in 0..5 {
        let row = &x.data()[r * 8..(r + 1) * 8];
        let mean = row.iter().sum::<f64>() / 8.0;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 8.0;
        for k in 0..8 {
            let e = (row[k] - mean) / (var + 1e-5).sqrt();
            assert!((y.data()[r * 8 + k] - e).abs() < 1e-12);
        }
    }
    let shifted = Tensor::from_fn([5, 8], |i| 3.0 * x.data()[i] - 2.0);
    // Invariance is exact only as eps vanishes.
    let y0 = ops::layer_norm(&c(&x), &c(&ones), &c(&zeros), 1e-12).unwrap();
    let ys = ops::layer_norm(&c(&shifted), &c(&ones), &c(&zeros), 1e-12).unwrap();
    assert!(ys.value().max_abs_diff(y0.value()) < 1e-6);
}

#[test]
fn instance_norm_output_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = Tensor::from_fn([2, 3, 10, 12], |_| 4.0 + 3.0 * rng.gen_range(-1.0..1.0));
    let y = ops::instance_norm(&c(&x), &c(&Tensor::full([3], 1.0)), &c(&Tensor::zeros([3])), 1e-5).unwrap();
    for group in y.data().chunks(120) {
        let mean = group.iter().sum::<f64>() / 120.0;
        let var = group.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 120.0;
        assert!(mean.abs() < 1e-6);
        assert!((var - 1.0).abs() < 1e-3);
    }
}

#[test]
fn prelu_examples() {
    let x = Tensor::new(vec![1, 1, 1, 1], vec![-2.0]).unwrap();
    let y = ops::prelu(&c(&x), &c(&Tensor::full([1], 0.25))).unwrap();
    assert_eq!(y.data(), &[-0.5]);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let r = rand_tensor(&mut rng, &[2, 3, 4]);
    let id = ops::prelu(&c(&r), &c(&Tensor::full([3], 1.0))).unwrap();
    assert_eq!(id.data(), r.data());
    let relu_like = ops::prelu(&c(&r), &c(&Tensor::zeros([3]))).unwrap();
    let relu = ops::relu(&c(&r));
    assert_eq!(relu_like.data(), relu.data());
}

#[test]
fn linear_matches_nested_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = rand_tensor(&mut rng, &[3, 5]);
    let w = rand_tensor(&mut rng, &[4, 5]);
    let b = rand_tensor(&mut rng, &[4]);
    let y = ops::linear(&c(&x), &c(&w), Some(&c(&b))).unwrap();
    for r in 0..3 {
        for o in 0..4 {
            let mut acc = b.data()[o];
            for k in 0..5 {
                acc += w.data()[o * 5 + k] * x.data()[r * 5 + k];
            }
            assert!((y.data()[r * 4 + o] - acc).abs() < 1e-12);
        }
    }
}

#[test]
fn chained_linears_equal_product_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = rand_tensor(&mut rng, &[2, 4]);
    let a = rand_tensor(&mut rng, &[3, 4]);
    let b = rand_tensor(&mut rng, &[5, 3]);
    let proj = rand_tensor(&mut rng, &[2, 5]);
    let product = Tensor::from_fn([5, 4], |i| {
        let (r, k) = (i / 4, i % 4);
        (0..3).map(|j| b.data()[r * 3 + j] * a.data()[j * 4 + k]).sum()
    });
    let xv = Var::variable(x.clone());
    let chained = ops::linear(&ops::linear(&xv, &c(&a), None).unwrap(), &c(&b), None).unwrap();
    let g1 = backward(&ops::sum(&ops::mul(&chained, &c(&proj)).unwrap())).unwrap();
    let xv2 = Var::variable(x);
    let direct = ops::linear(&xv2, &c(&product), None).unwrap();
    assert!(direct.value().max_abs_diff(chained.value()) < 1e-10);
    let g2 = backward(&ops::sum(&ops::mul(&direct, &c(&proj)).unwrap())).unwrap();
    assert!(g1.wrt(&xv).unwrap().max_abs_diff(g2.wrt(&xv2).unwrap()) < 1e-10);
}

#[test]
fn sum_gradient_is_all_ones() {
    let x = Var::variable(Tensor::from_fn([3, 4], |i| i as f64));
    let g = backward(&ops::sum(&x)).unwrap();
    assert!(g.wrt(&x).unwrap().data().iter().all(|&v| v == 1.0));
}

#[test]
fn backward_rejects_non_scalar() {
    let x = Var::variable(Tensor::zeros([2]));
    assert!(matches!(backward(&ops::scale(&x, 2.0)), Err(TensorError::NotScalar(_))));
}

#[test]
fn no_grad_records_nothing() {
    let x = Var::variable(Tensor::full([2], 1.0));
    let y = no_grad(|| ops::scale(&x, 3.0));
    assert!(!y.requires_grad());
    assert!(eabnet_tensor::grad_enabled());
}

#[test]
fn shape_errors_name_the_op() {
    let a = c(&Tensor::zeros([2, 3]));
    let b = c(&Tensor::zeros([3, 2]));
    assert!(ops::add(&a, &b).unwrap_err().to_string().starts_with("add"));
    assert!(ops::mul(&a, &b).unwrap_err().to_string().starts_with("mul"));
    assert!(ops::glu(&a, &b).unwrap_err().to_string().starts_with("glu"));
    let img = c(&Tensor::zeros([1, 2, 3, 4]));
    let w = c(&Tensor::zeros([1, 3, 1, 1]));
    let err = ops::conv2d(&img, &w, None, Conv2dSpec::new((1, 1), (1, 1))).unwrap_err();
    assert!(err.to_string().starts_with("conv2d"), "{err}");
}

#[test]
fn checkpoint_file_round_trip_restores_store() {
    let mut init = Initializer::new(99);
    let mut store = ParamStore::new();
    store.add("enc.w", &[4, 2, 2, 3], InitScheme::KaimingUniform { fan_in: 12 }, &mut init).unwrap();
    store.add("enc.b", &[4], InitScheme::Uniform { bound: 0.3 }, &mut init).unwrap();
    let ckpt = Checkpoint::from_store(&store, 99, "{\"mics\":2}");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    write_checkpoint(&path, &ckpt).unwrap();
    let back = read_checkpoint(&path).unwrap();
    assert_eq!(back, ckpt);
    let mut fresh = ParamStore::new();
    let mut other = Initializer::new(1);
    fresh.add("enc.w", &[4, 2, 2, 3], InitScheme::KaimingUniform { fan_in: 12 }, &mut other).unwrap();
    fresh.add("enc.b", &[4], InitScheme::Uniform { bound: 0.3 }, &mut other).unwrap();
    back.load_into(&mut fresh).unwrap();
    for ((_, a), (_, b)) in fresh.iter().zip(store.iter()) {
        assert_eq!(a.value, b.value);
    }
    let mut wrong = ParamStore::new();
    wrong.add("enc.w", &[4, 2, 2, 2], InitScheme::Constant(0.0), &mut other).unwrap();
    wrong.add("enc.b", &[4], InitScheme::Constant(0.0), &mut other).unwrap();
    assert!(back.load_into(&mut wrong).is_err());
}

#[test]
fn identical_seeds_give_identical_parameters() {
    let build = |seed| {
        let mut init = Initializer::new(seed);
        let mut s = ParamStore::new();
        s.add("a", &[10, 10], InitScheme::KaimingUniform { fan_in: 10 }, &mut init).unwrap();
        s.get(eabnet_tensor::ParamId(0)).value.clone()
    };
    assert_eq!(build(3), build(3));
    assert_ne!(build(3), build(4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sigmoid_stays_in_unit_interval(v in -800.0f64..800.0) {
        let y = ops::sigmoid(&c(&Tensor::scalar(v)));
        prop_assert!((0.0..=1.0).contains(&y.data()[0]));
    }

    #[test]
    fn permute_round_trips(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rand_tensor(&mut rng, &[2, 3, 4]);
        let y = ops::permute(&c(&x), &[2, 0, 1]).unwrap();
        let z = ops::permute(&y, &[1, 2, 0]).unwrap();
        prop_assert_eq!(z.value(), &x);
    }

    #[test]
    fn conv_is_linear_in_input(seed in 0u64..1000, a in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rand_tensor(&mut rng, &[1, 2, 4, 7]);
        let z = rand_tensor(&mut rng, &[1, 2, 4, 7]);
        let w = rand_tensor(&mut rng, &[3, 2, 2, 3]);
        let spec = Conv2dSpec::new((2, 3), (1, 2)).with_freq_pad(1, 0);
        let conv = |t: &Tensor| ops::conv2d(&c(t), &c(&w), None, spec).unwrap().value().clone();
        let mix = Tensor::from_fn([1, 2, 4, 7], |i| a * x.data()[i] + z.data()[i]);
        let lhs = conv(&mix);
        let (cx, cz) = (conv(&x), conv(&z));
        let rhs = Tensor::from_fn(lhs.shape().to_vec(), |i| a * cx.data()[i] + cz.data()[i]);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn spectral_loss_is_non_negative(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = rand_tensor(&mut rng, &[1, 2, 3, 4]);
        let s = rand_tensor(&mut rng, &[1, 2, 3, 4]);
        let (_, terms) = ops::spectral_loss(&c(&e), &c(&s), 0.5, 0.5).unwrap();
        prop_assert!(terms.ri >= 0.0 && terms.mag >= 0.0);
        prop_assert!((terms.total - 0.5 * (terms.ri + terms.mag)).abs() < 1e-15);
        prop_assert!(terms.mag <= terms.ri + 1e-12);
    }
}
