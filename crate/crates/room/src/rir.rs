use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RoomError};
use crate::geometry::{distance, ArraySpec, Point, RoomSpec};

/// Uniform wall absorption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorption {
    pub alpha: f64,
    /// `alpha` reached 1: walls reflect nothing.
    pub anechoic: bool,
}

impl Absorption {
    /// Pressure reflection coefficient `sqrt(1 - alpha)`.
    pub fn reflection(&self) -> f64 {
        (1.0 - self.alpha).max(0.0).sqrt()
    }
}

/// Sabine inversion `alpha = 0.161 V / (S · RT60)`, clamped to `(0, 1]`.
pub fn absorption_from_rt60(room: &RoomSpec) -> Result<Absorption> {
    room.validate()?;
    let alpha = 0.161 * room.volume() / (room.surface_area() * room.rt60);
    if alpha >= 1.0 {
        return Ok(Absorption { alpha: 1.0, anechoic: true });
    }
    Ok(Absorption { alpha, anechoic: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractionalDelay {
    /// Each image lands on the nearest sample.
    #[default]
    Round,
    /// 8-tap Hann-windowed sinc interpolation.
    Sinc8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RirOptions {
    pub sample_rate: u32,
    /// Highest total reflection order; `None` picks [`default_max_order`].
    pub max_order: Option<usize>,
    /// RIR length in taps; `None` uses `RT60 · fs`, extended if needed so
    /// that every direct path fits.
    pub length: Option<usize>,
    pub fractional: FractionalDelay,
}

impl Default for RirOptions {
    fn default() -> Self {
        Self { sample_rate: 16_000, max_order: None, length: None, fractional: FractionalDelay::Round }
    }
}

/// Impulse responses from one source to every microphone.
#[derive(Debug, Clone, PartialEq)]
pub struct RirSet {
    pub impulse_responses: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

const ORDER_CAP: usize = 30;
const SINC_HALF: usize = 4;

/// Per-axis image coordinates: `(coordinate, reflections)` for every
/// `(m, q)` whose reflection count `|m - q| + |m|` is at most `max_order`.
fn axis_images(pos: f64, size: f64, max_order: usize) -> Vec<(f64, usize)> {
    let reach = (max_order as i64 + 1) / 2 + 1;
    let mut out = Vec::new();
    for m in -reach..=reach {
        for q in 0..2i64 {
            let order = ((m - q).abs() + m.abs()) as usize;
            if order <= max_order {
                out.push(((1 - 2 * q) as f64 * pos + 2.0 * m as f64 * size, order));
            }
        }
    }
    out
}

/// All image sources with total order ≤ `max_order`, as `(position, order)`.
fn image_sources(room: &RoomSpec, source: &Point, max_order: usize) -> Vec<(Point, usize)> {
    let axes: Vec<Vec<(f64, usize)>> =
        (0..3).map(|k| axis_images(source[k], room.dimensions[k], max_order)).collect();
    let mut out = Vec::new();
    for &(x, ox) in &axes[0] {
        for &(y, oy) in &axes[1] {
            if ox + oy > max_order {
                continue;
            }
            for &(z, oz) in &axes[2] {
                let order = ox + oy + oz;
                if order <= max_order {
                    out.push(([x, y, z], order));
                }
            }
        }
    }
    out
}

/// Smallest reflection order whose image sources all lie farther from the
/// array centre than sound travels in RT60 seconds, capped at 30.
pub fn default_max_order(room: &RoomSpec, array: &ArraySpec, source: &Point) -> usize {
    let center = array.center();
    let reach = room.speed_of_sound * room.rt60;
    let mut nearest = [f64::INFINITY; ORDER_CAP + 1];
    for (p, order) in image_sources(room, source, ORDER_CAP) {
        nearest[order] = nearest[order].min(distance(&p, &center));
    }
    (1..=ORDER_CAP).find(|&k| nearest[k] > reach).unwrap_or(ORDER_CAP)
}

fn check_inside(room: &RoomSpec, p: &Point, what: &str) -> Result<()> {
    if room.wall_clearance(p) <= 0.0 {
        return Err(RoomError::Geometry(format!("{what} at {p:?} is not strictly inside room {:?}", room.dimensions)));
    }
    Ok(())
}

/// Image-method (Allen–Berkley) impulse responses from `source` to each
/// microphone. Every image contributes `β^order / (4π d)` at delay
/// `d / c · fs`.
pub fn image_method_rir(room: &RoomSpec, array: &ArraySpec, source: &Point, opts: &RirOptions) -> Result<RirSet> {
    room.validate()?;
    check_inside(room, source, "source")?;
    for (i, m) in array.mic_positions.iter().enumerate() {
        check_inside(room, m, &format!("microphone {i}"))?;
    }
    if opts.sample_rate == 0 {
        return Err(RoomError::Invalid("sample rate must be positive".into()));
    }
    let fs = opts.sample_rate as f64;
    let c = room.speed_of_sound;
    let beta = absorption_from_rt60(room)?.reflection();
    let max_order = opts.max_order.unwrap_or_else(|| default_max_order(room, array, source));
    let direct_max = array
        .mic_positions
        .iter()
        .map(|m| distance(m, source) / c * fs)
        .fold(0.0, f64::max);
    let length = opts
        .length
        .unwrap_or_else(|| ((room.rt60 * fs).ceil() as usize).max(direct_max.ceil() as usize + SINC_HALF + 1));

    let images = image_sources(room, source, max_order);
    let mut responses = Vec::with_capacity(array.num_mics());
    for mic in &array.mic_positions {
        let mut h = vec![0.0; length];
        for (pos, order) in &images {
            let d = distance(pos, mic);
            let delay = d / c * fs;
            let gain = beta.powi(*order as i32) / (4.0 * PI * d);
            if gain == 0.0 {
                continue;
            }
            match opts.fractional {
                FractionalDelay::Round => {
                    let tap = delay.round() as usize;
                    if tap < length {
                        h[tap] += gain;
                    }
                }
                FractionalDelay::Sinc8 => {
                    let base = delay.floor() as i64;
                    for n in base - SINC_HALF as i64 + 1..=base + SINC_HALF as i64 {
                        if n < 0 || n as usize >= length {
                            continue;
                        }
                        let x = n as f64 - delay;
                        let window = 0.5 * (1.0 + (PI * x / SINC_HALF as f64).cos());
                        let sinc = if x.abs() < 1e-12 { 1.0 } else { (PI * x).sin() / (PI * x) };
                        h[n as usize] += gain * window * sinc;
                    }
                }
            }
        }
        responses.push(h);
    }
    Ok(RirSet { impulse_responses: responses, sample_rate: opts.sample_rate })
}
