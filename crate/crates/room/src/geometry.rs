use serde::{Deserialize, Serialize};

use crate::error::{Result, RoomError};

/// Cartesian position in metres: (length, width, height) axes.
pub type Point = [f64; 3];

pub(crate) fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Shoebox room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dimensions: Point,
    pub rt60: f64,
    pub speed_of_sound: f64,
}

impl RoomSpec {
    pub fn new(dimensions: Point, rt60: f64) -> Self {
        Self { dimensions, rt60, speed_of_sound: 343.0 }
    }

    pub fn volume(&self) -> f64 {
        self.dimensions.iter().product()
    }

    pub fn surface_area(&self) -> f64 {
        let [l, w, h] = self.dimensions;
        2.0 * (l * w + l * h + w * h)
    }

    /// Smallest distance from `p` to any wall; negative outside the room.
    pub fn wall_clearance(&self, p: &Point) -> f64 {
        (0..3).map(|k| p[k].min(self.dimensions[k] - p[k])).fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(RoomError::Invalid(format!("room dimensions {:?}", self.dimensions)));
        }
        if !(self.rt60 > 0.0 && self.rt60.is_finite()) {
            return Err(RoomError::Invalid(format!("rt60 {} must be positive", self.rt60)));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(RoomError::Invalid(format!("speed of sound {}", self.speed_of_sound)));
        }
        Ok(())
    }
}

/// Microphone positions; microphone 0 is the reference channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub mic_positions: Vec<Point>,
}

impl ArraySpec {
    /// Uniform linear array along the length axis, centred on `center`.
    pub fn linear(mics: usize, spacing: f64, center: Point) -> Self {
        let offset = (mics as f64 - 1.0) / 2.0;
        let mic_positions = (0..mics)
            .map(|i| [center[0] + (i as f64 - offset) * spacing, center[1], center[2]])
            .collect();
        Self { mic_positions }
    }

    pub fn num_mics(&self) -> usize {
        self.mic_positions.len()
    }

    pub fn center(&self) -> Point {
        let n = self.mic_positions.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.mic_positions {
            for k in 0..3 {
                c[k] += p[k] / n;
            }
        }
        c
    }

    /// Unit vector from the first to the last microphone.
    pub fn axis(&self) -> Point {
        let (a, b) = (self.mic_positions[0], self.mic_positions[self.mic_positions.len() - 1]);
        let d = distance(&a, &b);
        if d == 0.0 {
            return [1.0, 0.0, 0.0];
        }
        [(b[0] - a[0]) / d, (b[1] - a[1]) / d, (b[2] - a[2]) / d]
    }

    /// Angle in degrees, `[0, 180]`, between the array axis and the
    /// direction from the array centre to `p`.
    pub fn doa_degrees(&self, p: &Point) -> f64 {
        let c = self.center();
        let axis = self.axis();
        let d = distance(&c, p);
        if d == 0.0 {
            return 0.0;
        }
        let cos = (0..3).map(|k| (p[k] - c[k]) * axis[k]).sum::<f64>() / d;
        cos.clamp(-1.0, 1.0).acos().to_degrees()
    }
}

/// One simulated acoustic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub room: RoomSpec,
    pub array: ArraySpec,
    pub speech_position: Point,
    pub noise_position: Point,
    pub snr_db: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn doa_difference_degrees(&self) -> f64 {
        (self.array.doa_degrees(&self.speech_position) - self.array.doa_degrees(&self.noise_position)).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_array_is_centred_with_fixed_spacing() {
        let a = ArraySpec::linear(9, 0.04, [2.0, 1.0, 1.5]);
        assert_eq!(a.num_mics(), 9);
        let c = a.center();
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] - 1.0).abs() < 1e-12);
        for w in a.mic_positions.windows(2) {
            assert!((distance(&w[0], &w[1]) - 0.04).abs() < 1e-12);
        }
    }

    #[test]
    fn doa_along_and_across_axis() {
        let a = ArraySpec::linear(2, 0.1, [0.0, 0.0, 0.0]);
        assert!((a.doa_degrees(&[1.0, 0.0, 0.0])).abs() < 1e-9);
        assert!((a.doa_degrees(&[0.0, 1.0, 0.0]) - 90.0).abs() < 1e-9);
        assert!((a.doa_degrees(&[-1.0, 0.0, 0.0]) - 180.0).abs() < 1e-9);
    }
}
