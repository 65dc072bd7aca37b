//! Synthetic stand-ins for speech and noise recordings.
//!
//! `speech_like` strings together syllables: voiced ones are harmonic
//! series with a gliding pitch and three formant resonances, unvoiced ones
//! are high-passed noise bursts, separated by short gaps and pauses.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    Pink,
    Babble,
    Factory,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [NoiseKind::White, NoiseKind::Pink, NoiseKind::Babble, NoiseKind::Factory];
}

fn normalise(x: &mut [f64], rms: f64) {
    let cur = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if cur > 0.0 {
        x.iter_mut().for_each(|v| *v *= rms / cur);
    }
}

fn resonance(f: f64, centre: f64, bandwidth: f64) -> f64 {
    1.0 / (1.0 + ((f - centre) / bandwidth).powi(2))
}

/// Raised-cosine attack and release over `edge` samples.
fn envelope(i: usize, len: usize, edge: usize) -> f64 {
    let edge = edge.min(len / 2).max(1);
    if i < edge {
        0.5 - 0.5 * (std::f64::consts::PI * i as f64 / edge as f64).cos()
    } else if i >= len - edge {
        0.5 - 0.5 * (std::f64::consts::PI * (len - i) as f64 / edge as f64).cos()
    } else {
        1.0
    }
}

/// Speech-like mono signal of `len` samples at RMS 0.05.
pub fn speech_like(rng: &mut impl Rng, len: usize, fs: u32) -> Vec<f64> {
    let fs_f = fs as f64;
    let mut out = vec![0.0; len];
    let base_f0: f64 = rng.gen_range(90.0..240.0);
    let mut pos = (rng.gen_range(0.0..0.15) * fs_f) as usize;
    while pos < len {
        let dur = (rng.gen_range(0.12..0.35) * fs_f) as usize;
        let end = (pos + dur).min(len);
        let seg = end - pos;
        if rng.gen_bool(0.8) {
            let f0a = base_f0 * rng.gen_range(0.85..1.2);
            let f0b = base_f0 * rng.gen_range(0.8..1.15);
            let formants = [
                (rng.gen_range(300.0..900.0), 90.0),
                (rng.gen_range(900.0..2500.0), 140.0),
                (rng.gen_range(2200.0..3500.0), 200.0),
            ];
            let harmonics = (4000.0 / f0a.max(f0b)) as usize;
            let gains: Vec<f64> = (1..=harmonics)
                .map(|h| {
                    let f = h as f64 * (f0a + f0b) / 2.0;
                    let shape: f64 = formants.iter().map(|&(c, b)| resonance(f, c, b)).sum();
                    (0.05 + shape) / (h as f64).sqrt()
                })
                .collect();
            let mut phases: Vec<f64> = (0..harmonics).map(|_| rng.gen_range(0.0..TAU)).collect();
            for i in 0..seg {
                let f0 = f0a + (f0b - f0a) * i as f64 / seg as f64;
                let env = envelope(i, seg, (0.02 * fs_f) as usize);
                let mut s = 0.0;
                for (h, (ph, g)) in phases.iter_mut().zip(&gains).enumerate() {
                    *ph += TAU * f0 * (h + 1) as f64 / fs_f;
                    s += g * ph.sin();
                }
                out[pos + i] += env * s;
            }
            phases.clear();
        } else {
            let gain = rng.gen_range(0.2..0.5);
            let mut prev = 0.0;
            for i in 0..seg {
                let w: f64 = rng.sample(StandardNormal);
                out[pos + i] += gain * envelope(i, seg, (0.01 * fs_f) as usize) * (w - prev);
                prev = w;
            }
        }
        let gap = if rng.gen_bool(0.15) { rng.gen_range(0.3..0.6) } else { rng.gen_range(0.03..0.2) };
        pos = end + (gap * fs_f) as usize;
    }
    normalise(&mut out, 0.05);
    out
}

/// Pink noise via Kellet's economy filter on white noise.
fn pink(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    (0..len)
        .map(|_| {
            let w: f64 = rng.sample(StandardNormal);
            b0 = 0.99765 * b0 + w * 0.0990460;
            b1 = 0.96300 * b1 + w * 0.2965164;
            b2 = 0.57000 * b2 + w * 1.0526913;
            b0 + b1 + b2 + w * 0.1848
        })
        .collect()
}

/// Noise of the given kind, `len` samples at RMS 0.05.
pub fn noise(kind: NoiseKind, rng: &mut impl Rng, len: usize, fs: u32) -> Vec<f64> {
    let mut out = match kind {
        NoiseKind::White => (0..len).map(|_| rng.sample(StandardNormal)).collect(),
        NoiseKind::Pink => pink(rng, len),
        NoiseKind::Babble => {
            let talkers = rng.gen_range(4..8);
            let mut acc = vec![0.0; len];
            for _ in 0..talkers {
                let s = speech_like(rng, len, fs);
                acc.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
            }
            acc
        }
        NoiseKind::Factory => {
            let mut base = pink(rng, len);
            normalise(&mut base, 1.0);
            let hum: f64 = rng.gen_range(50.0..200.0);
            let rate = rng.gen_range(2.0..8.0) / fs as f64;
            let mut decay = 0.0;
            for (i, v) in base.iter_mut().enumerate() {
                let t = i as f64 / fs as f64;
                *v += 0.8 * (TAU * hum * t).sin() + 0.4 * (TAU * 2.0 * hum * t).sin();
                if rng.gen_bool(rate) {
                    decay = rng.gen_range(3.0..8.0);
                }
                let w: f64 = rng.sample(StandardNormal);
                *v += decay * w;
                decay *= 0.995;
            }
            base
        }
    };
    normalise(&mut out, 0.05);
    out
}
