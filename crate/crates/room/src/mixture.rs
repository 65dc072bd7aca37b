use eabnet_dsp::WaveBuffer;

use crate::convolve::fft_convolve;
use crate::error::{Result, RoomError};
use crate::geometry::SceneSpec;
use crate::rir::{image_method_rir, RirOptions};

#[derive(Debug, Clone, Default)]
pub struct MixOptions {
    pub rir: RirOptions,
    /// Leave the noise unscaled instead of matching `scene.snr_db`.
    pub skip_snr: bool,
}

/// Reverberant `P`-channel signals of one scene. `mixture` is computed
/// sample by sample as `speech + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub mixture: WaveBuffer,
    pub speech: WaveBuffer,
    pub noise: WaveBuffer,
}

fn mono<'a>(w: &'a WaveBuffer, what: &str) -> Result<&'a [f64]> {
    if w.num_channels() != 1 {
        return Err(RoomError::Invalid(format!("{what} must be mono, got {} channels", w.num_channels())));
    }
    Ok(w.channel(0))
}

/// Repeats or truncates `x` to exactly `len` samples.
fn fit_length(x: &[f64], len: usize) -> Vec<f64> {
    if x.is_empty() {
        return vec![0.0; len];
    }
    x.iter().cycle().take(len).copied().collect()
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Convolves both sources with their scene RIRs, scales the noise so that
/// the reference-channel (mic 0) SNR equals `scene.snr_db`, and sums.
/// Noise is tiled or truncated to the speech length, which is also the
/// output length.
pub fn synthesize_mixture(speech: &WaveBuffer, noise: &WaveBuffer, scene: &SceneSpec, opts: &MixOptions) -> Result<Mixture> {
    let fs = speech.sample_rate();
    if noise.sample_rate() != fs || opts.rir.sample_rate != fs {
        return Err(RoomError::Invalid(format!(
            "sample rates differ: speech {fs}, noise {}, rir {}",
            noise.sample_rate(),
            opts.rir.sample_rate
        )));
    }
    let s = mono(speech, "speech")?;
    let len = s.len();
    let n = fit_length(mono(noise, "noise")?, len);
    let speech_rir = image_method_rir(&scene.room, &scene.array, &scene.speech_position, &opts.rir)?;
    let noise_rir = image_method_rir(&scene.room, &scene.array, &scene.noise_position, &opts.rir)?;

    let rev_s: Vec<Vec<f64>> = speech_rir.impulse_responses.iter().map(|h| fft_convolve(s, h, len)).collect();
    let mut rev_n: Vec<Vec<f64>> = noise_rir.impulse_responses.iter().map(|h| fft_convolve(&n, h, len)).collect();

    if !opts.skip_snr {
        let es = energy(&rev_s[0]);
        let en = energy(&rev_n[0]);
        if es == 0.0 {
            return Err(RoomError::ZeroEnergy("speech"));
        }
        if en == 0.0 {
            return Err(RoomError::ZeroEnergy("noise"));
        }
        let gain = (es / (en * 10f64.powf(scene.snr_db / 10.0))).sqrt();
        rev_n.iter_mut().flatten().for_each(|v| *v *= gain);
    }
    let mix: Vec<Vec<f64>> = rev_s
        .iter()
        .zip(&rev_n)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
        .collect();
    Ok(Mixture {
        mixture: WaveBuffer::new(mix, fs)?,
        speech: WaveBuffer::new(rev_s, fs)?,
        noise: WaveBuffer::new(rev_n, fs)?,
    })
}
