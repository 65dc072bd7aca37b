//! Metrics, loss, optimiser and schedule.

use std::collections::HashMap;

use eabnet_dsp::{Complex64, ComplexSpectrogram};
use eabnet_tensor::{InitScheme, Initializer, ParamId, ParamStore, Tensor, Var};
use eabnet_train::*;
use proptest::prelude::*;

fn bin(z: Complex64) -> ComplexSpectrogram {
    ComplexSpectrogram::from_raw(vec![z; 2], 2, 1, 1, 2, 1, 2, 16_000).unwrap()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn loss_hand_examples() {
    let w = LossWeights::default();
    let r = loss_report(&bin(c(1.0, 0.0)), &bin(c(0.0, 0.0)), w).unwrap();
    assert_eq!((r.ri_term, r.mag_term, r.total), (1.0, 1.0, 1.0));
    let r = loss_report(&bin(c(0.0, 1.0)), &bin(c(1.0, 0.0)), w).unwrap();
    assert!((r.ri_term - 2.0).abs() < 1e-15);
    assert_eq!(r.mag_term, 0.0);
    assert!((r.total - 1.0).abs() < 1e-15);
    let r = loss_report(&bin(c(0.3, -0.2)), &bin(c(0.3, -0.2)), w).unwrap();
    assert_eq!(r.total, 0.0);
}

#[test]
fn loss_rejects_mismatched_spectra() {
    let a = bin(c(1.0, 0.0));
    let b = ComplexSpectrogram::from_raw(vec![c(0.0, 0.0); 4], 2, 2, 1, 2, 1, 2, 16_000).unwrap();
    assert!(loss_report(&a, &b, LossWeights::default()).is_err());
    assert!(LossWeights { ri: -1.0, mag: 1.0 }.validate().is_err());
}

fn spec_from(values: &[(f64, f64)]) -> ComplexSpectrogram {
    let data: Vec<Complex64> = values.iter().map(|&(a, b)| c(a, b)).collect();
    ComplexSpectrogram::from_raw(data, 3, values.len() / 3, 1, 4, 2, 4, 16_000).unwrap()
}

fn as_tensor(s: &ComplexSpectrogram) -> Var {
    Var::constant(eabnet_model::spectrogram_to_tensor(s))
}

proptest! {
    #[test]
    fn loss_is_non_negative_and_zero_only_at_target(
        e in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 12),
        s in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 12),
    ) {
        let (es, ss) = (spec_from(&e), spec_from(&s));
        let w = LossWeights::default();
        let r = loss_report(&es, &ss, w).unwrap();
        prop_assert!(r.total >= 0.0 && r.ri_term >= 0.0 && r.mag_term >= 0.0);
        prop_assert!((r.total - (0.5 * r.ri_term + 0.5 * r.mag_term)).abs() < 1e-12);
        prop_assert!(loss_report(&ss, &ss, w).unwrap().total <= 1e-12);
        if e != s {
            prop_assert!(r.ri_term > 0.0);
        }
        let (_, tr) = loss_var(&as_tensor(&es), &as_tensor(&ss), w).unwrap();
        prop_assert!((tr.total - r.total).abs() < 1e-12);
        prop_assert!((tr.ri_term - r.ri_term).abs() < 1e-12);
        prop_assert!((tr.mag_term - r.mag_term).abs() < 1e-12);
    }
}

// --- metrics ---

fn tone(len: usize, freq: f64, phase: f64) -> Vec<f64> {
    (0..len).map(|i| (freq * i as f64 + phase).sin()).collect()
}

fn centred(x: &[f64]) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - m).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Zero-mean `n` with the component along zero-mean `s` removed.
fn orthogonal_to(s: &[f64], n: &[f64]) -> Vec<f64> {
    let (s, n) = (centred(s), centred(n));
    let k = dot(&n, &s) / dot(&s, &s);
    n.iter().zip(&s).map(|(a, b)| a - k * b).collect()
}

#[test]
fn metric_saturation_and_scale() {
    let s = tone(400, 0.07, 0.3);
    let twice: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
    assert_eq!(si_snr(&s, &s).unwrap(), SATURATION_DB);
    assert_eq!(si_snr(&twice, &s).unwrap(), SATURATION_DB);
    assert_eq!(snr(&s, &s).unwrap(), SATURATION_DB);
    assert!(snr(&twice, &s).unwrap().abs() < 1e-12);
    assert_eq!(snr(&vec![0.0; 400], &s).unwrap(), 0.0);
}

#[test]
fn equal_energy_orthogonal_noise_is_zero_db() {
    let s = tone(1000, 0.05, 0.1);
    let raw = orthogonal_to(&s, &tone(1000, 0.31, 1.2));
    let sc = centred(&s);
    assert!(dot(&raw, &sc).abs() < 1e-9);
    let gain = (dot(&sc, &sc) / dot(&raw, &raw)).sqrt();
    let e: Vec<f64> = s.iter().zip(&raw).map(|(a, b)| a + gain * b).collect();
    // projection of e onto s recovers s exactly; the residual is the noise.
    let got = si_snr(&e, &s).unwrap();
    assert!(got.abs() < 1e-9, "{got}");
}

#[test]
fn metrics_are_mean_invariant_for_si_snr_only() {
    let s = tone(300, 0.09, 0.0);
    let n = orthogonal_to(&s, &tone(300, 0.4, 0.5));
    let e: Vec<f64> = s.iter().zip(&n).map(|(a, b)| a + 0.3 * b).collect();
    let shifted: Vec<f64> = e.iter().map(|v| v + 5.0).collect();
    assert!((si_snr(&shifted, &s).unwrap() - si_snr(&e, &s).unwrap()).abs() < 1e-9);
    assert!(snr(&shifted, &s).unwrap() < snr(&e, &s).unwrap());
}

proptest! {
    #[test]
    fn si_snr_is_scale_invariant(
        noise in prop::collection::vec(-1.0f64..1.0, 64),
        level in 0.05f64..2.0,
        scale in 0.01f64..100.0,
    ) {
        let s = tone(64, 0.2, 0.4);
        let e: Vec<f64> = s.iter().zip(&noise).map(|(a, b)| a + level * b).collect();
        let base = si_snr(&e, &s).unwrap();
        let scaled: Vec<f64> = e.iter().map(|v| v * scale).collect();
        prop_assert!((si_snr(&scaled, &s).unwrap() - base).abs() < 1e-9);
        let doubled: Vec<f64> = e.iter().map(|v| v * 2.0).collect();
        prop_assert_eq!(si_snr(&doubled, &s).unwrap(), base);
    }

    #[test]
    fn more_orthogonal_noise_lowers_si_snr(
        noise in prop::collection::vec(-1.0f64..1.0, 64),
        a in 0.01f64..1.0,
        extra in 0.01f64..1.0,
    ) {
        let s = tone(64, 0.2, 0.4);
        let n = orthogonal_to(&s, &noise);
        prop_assume!(dot(&n, &n) > 1e-3);
        let mix = |k: f64| s.iter().zip(&n).map(|(x, y)| x + k * y).collect::<Vec<_>>();
        let low = si_snr(&mix(a + extra), &s).unwrap();
        let high = si_snr(&mix(a), &s).unwrap();
        prop_assert!(low < high || high == -SATURATION_DB, "{low} vs {high}");
    }
}

// --- optimiser ---

fn scalar_store(v: f64) -> ParamStore {
    let mut store = ParamStore::new();
    store.insert("w".into(), Tensor::scalar(v), InitScheme::External).unwrap();
    store
}

fn grad(g: f64) -> HashMap<ParamId, Tensor> {
    HashMap::from([(ParamId(0), Tensor::scalar(g))])
}

#[test]
fn adam_matches_scalar_oracle() {
    let cfg = AdamConfig { learning_rate: 0.01, ..Default::default() };
    let mut store = scalar_store(1.5);
    let mut adam = Adam::new(cfg, &store).unwrap();
    let grads = [0.4, -1.2, 0.05];
    let (mut m, mut v, mut theta) = (0.0f64, 0.0f64, 1.5f64);
    for (k, g) in grads.iter().enumerate() {
        adam.step(&mut store, &grad(*g)).unwrap();
        let t = (k + 1) as i32;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        let m_hat = m / (1.0 - 0.9f64.powi(t));
        let v_hat = v / (1.0 - 0.999f64.powi(t));
        theta -= 0.01 * m_hat / (v_hat.sqrt() + 1e-8);
        let got = store.get(ParamId(0)).value.data()[0];
        assert!((got - theta).abs() < 1e-12, "step {t}: {got} vs {theta}");
    }
    // the first step moves by lr·sign(g) up to ε.
    let mut s = scalar_store(0.0);
    Adam::new(cfg, &s).unwrap().step(&mut s, &grad(-3.0)).unwrap();
    assert!((s.get(ParamId(0)).value.data()[0] - 0.01).abs() < 1e-9);
}

#[test]
fn adam_zero_gradient_leaves_parameters() {
    let mut init = Initializer::new(3);
    let mut store = ParamStore::new();
    store.add("a", &[3, 4], InitScheme::Uniform { bound: 1.0 }, &mut init).unwrap();
    store.add("b", &[5], InitScheme::Uniform { bound: 1.0 }, &mut init).unwrap();
    let before = store.clone();
    let mut adam = Adam::new(AdamConfig::default(), &store).unwrap();
    let zeros = HashMap::from([(ParamId(0), Tensor::zeros(vec![3, 4]))]);
    for _ in 0..5 {
        adam.step(&mut store, &zeros).unwrap();
        adam.step(&mut store, &HashMap::new()).unwrap();
    }
    for ((_, a), (_, b)) in store.iter().zip(before.iter()) {
        assert_eq!(a.value, b.value);
    }
    assert_eq!(adam.steps(), 10);
}

#[test]
fn adam_constant_gradient_steps_at_learning_rate() {
    let lr = 1e-3;
    let mut store = scalar_store(0.0);
    let mut adam = Adam::new(AdamConfig { learning_rate: lr, ..Default::default() }, &store).unwrap();
    let mut prev = 0.0;
    for _ in 0..5000 {
        adam.step(&mut store, &grad(0.7)).unwrap();
        let now = store.get(ParamId(0)).value.data()[0];
        let step = now - prev;
        prev = now;
        assert!(step < 0.0);
    }
    let before = prev;
    adam.step(&mut store, &grad(0.7)).unwrap();
    let step = store.get(ParamId(0)).value.data()[0] - before;
    assert!((step + lr).abs() < 1e-9, "{step}");
}

#[test]
fn adam_rejects_bad_config_and_mismatched_store() {
    let store = scalar_store(0.0);
    assert!(Adam::new(AdamConfig { beta1: 1.0, ..Default::default() }, &store).is_err());
    assert!(Adam::new(AdamConfig { learning_rate: -1.0, ..Default::default() }, &store).is_err());
    let mut adam = Adam::new(AdamConfig::default(), &store).unwrap();
    let mut bigger = scalar_store(0.0);
    bigger.insert("v".into(), Tensor::scalar(0.0), InitScheme::External).unwrap();
    assert!(adam.step(&mut bigger, &HashMap::new()).is_err());
}

// --- plateau schedule ---

fn halvings(losses: &[f64]) -> Vec<bool> {
    let mut sched = PlateauSchedule::default();
    let mut lr = 1.0;
    losses
        .iter()
        .map(|&l| {
            let (next, halved) = sched.observe(l, lr);
            lr = next;
            halved
        })
        .collect()
}

#[test]
fn plateau_examples() {
    assert_eq!(halvings(&[1.0, 0.9, 0.8]), [false, false, false]);
    assert_eq!(halvings(&[1.0, 1.1, 1.2]), [false, false, true]);
    assert_eq!(halvings(&[1.0, 1.1, 0.9, 1.0, 1.1]), [false, false, false, false, true]);
    // equal is not an improvement.
    assert_eq!(halvings(&[1.0, 1.0, 1.0]), [false, false, true]);
}

/// Oracle: count, for every epoch, the run of non-improving epochs since
/// the last improvement or reduction.
fn oracle_halvings(losses: &[f64]) -> Vec<bool> {
    let mut out = Vec::new();
    let mut best = f64::INFINITY;
    let mut run_start = 0;
    for (i, &l) in losses.iter().enumerate() {
        if l < best {
            best = l;
            run_start = i + 1;
            out.push(false);
        } else if i + 1 - run_start == 2 {
            run_start = i + 1;
            out.push(true);
        } else {
            out.push(false);
        }
    }
    out
}

proptest! {
    #[test]
    fn plateau_matches_run_oracle(losses in prop::collection::vec(0u8..6, 1..30)) {
        let l: Vec<f64> = losses.iter().map(|&v| v as f64).collect();
        prop_assert_eq!(halvings(&l), oracle_halvings(&l));
        let mut sched = PlateauSchedule::default();
        let mut lr = 5e-4;
        for v in &l {
            let (next, _) = sched.observe(*v, lr);
            prop_assert!(next <= lr && next > 0.0);
            lr = next;
        }
    }
}
