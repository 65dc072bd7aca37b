use eabnet_beamform::linalg::{inner, matvec, quadratic_form};
use eabnet_beamform::{oracle_mvdr_with, SteeringMethod, 
    apply_utterance_beamformer, irm, mvdr_weights, oracle_mvdr, spatial_covariance, steering_from_covariance,
    BeamformError, BeamformerWeights, SpatialCovariance, SteeringNorm, SteeringVector, TfMask, DIAGONAL_LOADING,
};
use eabnet_dsp::ComplexSpectrogram;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const FFT: usize = 8;
const BINS: usize = FFT / 2 + 1;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn spec(data: Vec<Complex64>, frames: usize, channels: usize) -> ComplexSpectrogram {
    ComplexSpectrogram::from_raw(data, BINS, frames, channels, FFT, FFT / 2, FFT, 16000).unwrap()
}

fn random_spec(rng: &mut ChaCha8Rng, frames: usize, channels: usize) -> ComplexSpectrogram {
    spec((0..BINS * frames * channels).map(|_| cn(rng)).collect(), frames, channels)
}

fn orthonormal(rng: &mut ChaCha8Rng, p: usize) -> Vec<Vec<Complex64>> {
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    while basis.len() < p {
        let mut v: Vec<Complex64> = (0..p).map(|_| cn(rng)).collect();
        for b in &basis {
            let proj = inner(b, &v);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-6 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

/// Hermitian PSD matrix with eigenvalues `lambdas` and a random eigenbasis.
fn psd_with_spectrum(rng: &mut ChaCha8Rng, lambdas: &[f64]) -> (Vec<Complex64>, Vec<Vec<Complex64>>) {
    let p = lambdas.len();
    let basis = orthonormal(rng, p);
    let mut m = vec![c(0.0, 0.0); p * p];
    for (l, u) in lambdas.iter().zip(&basis) {
        for r in 0..p {
            for k in 0..p {
                m[r * p + k] += u[r] * u[k].conj() * *l;
            }
        }
    }
    (m, basis)
}

fn random_psd(rng: &mut ChaCha8Rng, p: usize) -> Vec<Complex64> {
    let lambdas: Vec<f64> = (0..p).map(|_| rng.gen_range(0.1..2.0)).collect();
    psd_with_spectrum(rng, &lambdas).0
}

fn single_bin_cov(m: Vec<Complex64>, p: usize) -> SpatialCovariance {
    SpatialCovariance::new(m, 1, p).unwrap()
}

#[test]
fn irm_examples() {
    let s = spec(vec![c(3.0, 0.0), c(0.0, 0.0), c(0.0, 2.0), c(1.0, 0.0), c(0.0, 0.0)], 1, 1);
    let n = spec(vec![c(0.0, 1.0), c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(-4.0, 0.0)], 1, 1);
    let m = irm(&s, &n).unwrap();
    assert_eq!(m.values(), &[0.75, 0.5, 0.5, 1.0, 0.0]);
}

#[test]
fn mask_rejects_out_of_range_values() {
    assert!(matches!(TfMask::new(vec![1.5], 1, 1), Err(BeamformError::Mask(_))));
    assert!(matches!(TfMask::new(vec![0.5], 1, 2), Err(BeamformError::Shape(_))));
}

#[test]
fn unit_mask_gives_sample_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_spec(&mut rng, 12, 3);
    let phi = spatial_covariance(&x, &TfMask::constant(1.0, BINS, 12).unwrap()).unwrap();
    for f in 0..BINS {
        for r in 0..3 {
            for k in 0..3 {
                let direct: Complex64 = (0..12).map(|t| x.get(f, t, r) * x.get(f, t, k).conj()).sum::<Complex64>() / 12.0;
                assert!((phi.matrix(f)[r * 3 + k] - direct).norm() < 1e-12);
            }
        }
    }
    assert!(phi.hermitian_error() < 1e-15);
}

#[test]
fn covariance_is_invariant_to_mask_scale_and_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_spec(&mut rng, 20, 4);
    let values: Vec<f64> = (0..BINS * 20).map(|_| rng.gen_range(0.0..1.0)).collect();
    let a = spatial_covariance(&x, &TfMask::new(values.clone(), BINS, 20).unwrap()).unwrap();
    let b = spatial_covariance(&x, &TfMask::new(values.iter().map(|v| v * 0.25).collect(), BINS, 20).unwrap()).unwrap();
    for f in 0..BINS {
        for (u, v) in a.matrix(f).iter().zip(b.matrix(f)) {
            assert!((u - v).norm() < 1e-12 * (1.0 + u.norm()));
        }
        for _ in 0..10 {
            let z: Vec<Complex64> = (0..4).map(|_| cn(&mut rng)).collect();
            assert!(quadratic_form(a.matrix(f), &z) >= -1e-12);
        }
    }
}

#[test]
fn zero_mask_uses_floor_and_stays_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_spec(&mut rng, 5, 2);
    let phi = spatial_covariance(&x, &TfMask::constant(0.0, BINS, 5).unwrap()).unwrap();
    assert!(phi.matrix(0).iter().all(|v| *v == c(0.0, 0.0)));
}

#[test]
fn steering_matches_eigen_decomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..50 {
        let p = 2 + trial % 7;
        let top = 1.0;
        let lambdas: Vec<f64> =
            std::iter::once(top).chain((1..p).map(|_| rng.gen_range(0.0..0.8))).collect();
        let (m, _) = psd_with_spectrum(&mut rng, &lambdas);
        let steering = steering_from_covariance(&single_bin_cov(m.clone(), p), SteeringNorm::Unit).unwrap();

        let eig = SymmetricEigen::new(DMatrix::from_fn(p, p, |r, k| m[r * p + k]));
        let imax = (0..p).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
        let mut u: Vec<Complex64> = (0..p).map(|r| eig.eigenvectors[(r, imax)]).collect();
        let phase = u[0].conj() / u[0].norm();
        u.iter_mut().for_each(|v| *v *= phase);
        for (a, b) in steering.bin(0).iter().zip(&u) {
            assert!((a - b).norm() < 1e-6, "trial {trial}: {a} vs {b}");
        }
        assert!(steering.bin(0)[0].im == 0.0 && steering.bin(0)[0].re > 0.0);
    }
}

#[test]
fn reference_normalisation_sets_reference_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = random_psd(&mut rng, 4);
    let unit = steering_from_covariance(&single_bin_cov(m.clone(), 4), SteeringNorm::Unit).unwrap();
    let rtf = steering_from_covariance(&single_bin_cov(m, 4), SteeringNorm::Reference).unwrap();
    assert_eq!(rtf.bin(0)[0], c(1.0, 0.0));
    let n: f64 = unit.bin(0).iter().map(|v| v.norm_sqr()).sum();
    assert!((n - 1.0).abs() < 1e-12);
    for (u, r) in unit.bin(0).iter().zip(rtf.bin(0)) {
        assert!((u / unit.bin(0)[0] - r).norm() < 1e-12);
    }
}

#[test]
fn identity_covariance_steers_to_first_microphone() {
    let mut id = vec![c(0.0, 0.0); 9];
    for i in 0..3 {
        id[i * 3 + i] = c(1.0, 0.0);
    }
    let s = steering_from_covariance(&single_bin_cov(id, 3), SteeringNorm::Unit).unwrap();
    assert_eq!(s.bin(0), &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
}

#[test]
fn zero_covariance_is_degenerate() {
    let err = steering_from_covariance(&single_bin_cov(vec![c(0.0, 0.0); 4], 2), SteeringNorm::Unit).unwrap_err();
    assert_eq!(err, BeamformError::DegenerateSteering { bin: 0 });
}

#[test]
fn singular_noise_covariance_reports_bin() {
    let phi = SpatialCovariance::new(vec![c(0.0, 0.0); 2 * 4], 2, 2).unwrap();
    let steering = SteeringVector::new(vec![c(1.0, 0.0); 4], 2, 2, SteeringNorm::Reference).unwrap();
    assert_eq!(mvdr_weights(&phi, &steering).unwrap_err(), BeamformError::Singular { bin: 0 });
}

fn loaded(m: &[Complex64], p: usize) -> Vec<Complex64> {
    let tr: f64 = (0..p).map(|i| m[i * p + i].re).sum();
    let mut out = m.to_vec();
    for i in 0..p {
        out[i * p + i] += DIAGONAL_LOADING * tr / p as f64;
    }
    out
}

#[test]
fn mvdr_is_distortionless_and_minimum_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for trial in 0..100 {
        let p = 2 + trial % 7;
        let phi = random_psd(&mut rng, p);
        let cvec: Vec<Complex64> = (0..p).map(|_| cn(&mut rng)).collect();
        let w = mvdr_weights(
            &single_bin_cov(phi.clone(), p),
            &SteeringVector::new(cvec.clone(), 1, p, SteeringNorm::Unit).unwrap(),
        )
        .unwrap();
        let w = w.bin(0);
        assert!((inner(w, &cvec) - c(1.0, 0.0)).norm() < 1e-9);

        let phil = loaded(&phi, p);
        let best = quadratic_form(&phil, w);
        let cc: f64 = cvec.iter().map(|v| v.norm_sqr()).sum();
        for _ in 0..20 {
            let r: Vec<Complex64> = (0..p).map(|_| cn(&mut rng)).collect();
            let proj = inner(&cvec, &r) / cc;
            let v: Vec<Complex64> = cvec.iter().zip(&r).map(|(ci, ri)| ci / cc + ri - proj * ci).collect();
            assert!((inner(&v, &cvec) - c(1.0, 0.0)).norm() < 1e-9);
            assert!(quadratic_form(&phil, &v) >= best * (1.0 - 1e-9));
        }
    }
}

#[test]
fn mvdr_weights_are_invariant_to_noise_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let phi = single_bin_cov(random_psd(&mut rng, 5), 5);
    let st = SteeringVector::new((0..5).map(|_| cn(&mut rng)).collect(), 1, 5, SteeringNorm::Unit).unwrap();
    let a = mvdr_weights(&phi, &st).unwrap();
    let b = mvdr_weights(&phi.scaled(37.5), &st).unwrap();
    for (u, v) in a.bin(0).iter().zip(b.bin(0)) {
        assert!((u - v).norm() < 1e-10);
    }
}

#[test]
fn white_noise_mvdr_is_matched_filter() {
    let mut id = vec![c(0.0, 0.0); 16];
    for i in 0..4 {
        id[i * 4 + i] = c(2.0, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cvec: Vec<Complex64> = (0..4).map(|_| cn(&mut rng)).collect();
    let cc: f64 = cvec.iter().map(|v| v.norm_sqr()).sum();
    let w = mvdr_weights(&single_bin_cov(id, 4), &SteeringVector::new(cvec.clone(), 1, 4, SteeringNorm::Unit).unwrap())
        .unwrap();
    for (wi, ci) in w.bin(0).iter().zip(&cvec) {
        assert!((wi - ci / cc).norm() < 1e-12);
    }
}

#[test]
fn apply_computes_hermitian_inner_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random_spec(&mut rng, 6, 3);
    let w = BeamformerWeights::new((0..BINS * 3).map(|_| cn(&mut rng)).collect(), BINS, 3).unwrap();
    let y = apply_utterance_beamformer(&w, &x).unwrap();
    assert_eq!(y.channels(), 1);
    for f in 0..BINS {
        for t in 0..6 {
            assert!((y.get(f, t, 0) - inner(w.bin(f), x.point(f, t))).norm() < 1e-12);
        }
    }
    let sel = apply_utterance_beamformer(&BeamformerWeights::selector(BINS, 3, 2), &x).unwrap();
    assert_eq!(sel.data(), x.select_channel(2).data());
}

fn snr_db(s: &ComplexSpectrogram, n: &ComplexSpectrogram) -> f64 {
    10.0 * (s.energy() / n.energy()).log10()
}

/// Rank-one speech image plus spatially white noise: the oracle MVDR output,
/// split into its speech and noise parts, improves the reference SNR by
/// close to `10 log10 P`.
#[test]
fn oracle_pipeline_improves_output_snr() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (p, frames) = (6, 400);
    let rtf: Vec<Vec<Complex64>> = (0..BINS)
        .map(|_| std::iter::once(c(1.0, 0.0)).chain((1..p).map(|_| cn(&mut rng) * 0.7)).collect())
        .collect();
    let mut sdata = vec![c(0.0, 0.0); BINS * frames * p];
    let mut ndata = vec![c(0.0, 0.0); BINS * frames * p];
    for f in 0..BINS {
        for t in 0..frames {
            let src = cn(&mut rng);
            for m in 0..p {
                sdata[(f * frames + t) * p + m] = src * rtf[f][m];
                ndata[(f * frames + t) * p + m] = cn(&mut rng);
            }
        }
    }
    let speech = spec(sdata, frames, p);
    let noise = spec(ndata, frames, p);
    let mix = spec(speech.data().iter().zip(noise.data()).map(|(a, b)| a + b).collect(), frames, p);
    let out = oracle_mvdr(&mix, &speech, &noise, SteeringNorm::Reference).unwrap();
    assert!(out.fallback_bins.is_empty());

    let ys = apply_utterance_beamformer(&out.weights, &speech).unwrap();
    let yn = apply_utterance_beamformer(&out.weights, &noise).unwrap();
    let before = snr_db(&speech.select_channel(0), &noise.select_channel(0));
    let after = snr_db(&ys, &yn);
    assert!(after - before > 4.0, "gain {:.2} dB", after - before);
    // Gain on the true RTF; the IRM leaks speech into the noise
    // statistics, so neither estimator is exact.
    for (method, tol) in [(SteeringMethod::Whitened, 0.3), (SteeringMethod::Principal, 0.1)] {
        let o = oracle_mvdr_with(&mix, &speech, &noise, SteeringNorm::Reference, method).unwrap();
        for f in 0..BINS {
            let gain = inner(o.weights.bin(f), &rtf[f]);
            assert!((gain - c(1.0, 0.0)).norm() < tol, "{method:?} bin {f}: {gain}");
        }
    }
    let sum: Vec<Complex64> = ys.data().iter().zip(yn.data()).map(|(a, b)| a + b).collect();
    for (a, b) in sum.iter().zip(out.output.data()) {
        assert!((a - b).norm() < 1e-9);
    }
}

#[test]
fn oracle_pipeline_falls_back_on_silent_bins() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let frames = 10;
    let speech = spec(vec![c(0.0, 0.0); BINS * frames * 2], frames, 2);
    let noise = random_spec(&mut rng, frames, 2);
    let out = oracle_mvdr(&noise, &speech, &noise, SteeringNorm::Reference).unwrap();
    assert_eq!(out.fallback_bins, (0..BINS).collect::<Vec<_>>());
    assert_eq!(out.output.data(), noise.select_channel(0).data());
}

proptest! {
    #[test]
    fn irm_lies_in_unit_interval(vals in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2 * BINS)) {
        let s = spec(vals[..BINS].iter().map(|&(a, b)| c(a, b)).collect(), 1, 1);
        let n = spec(vals[BINS..].iter().map(|&(a, b)| c(b, a)).collect(), 1, 1);
        let m = irm(&s, &n).unwrap();
        prop_assert!(m.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let swapped = irm(&n, &s).unwrap();
        for (a, b) in m.values().iter().zip(swapped.values()) {
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mvdr_constraint_holds(seed in any::<u64>(), p in 2usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_psd(&mut rng, p);
        let cvec: Vec<Complex64> = (0..p).map(|_| cn(&mut rng)).collect();
        let st = SteeringVector::new(cvec.clone(), 1, p, SteeringNorm::Unit).unwrap();
        let w = mvdr_weights(&single_bin_cov(phi.clone(), p), &st).unwrap();
        prop_assert!((inner(w.bin(0), &cvec) - c(1.0, 0.0)).norm() < 1e-9);
        let y = matvec(&loaded(&phi, p), w.bin(0));
        let ratio = inner(&cvec, &y).re;
        prop_assert!(ratio.is_finite() && ratio > 0.0);
    }
}
