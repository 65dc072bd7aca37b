use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RoomError};
use crate::geometry::{distance, ArraySpec, Point, RoomSpec, SceneSpec};

pub const DOA_MIN_DEG: f64 = 5.0;
/// Rejection budget per scene.
pub const MAX_DRAWS: usize = 10_000;

/// Ranges of the randomised scene recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub room_min: Point,
    pub room_max: Point,
    pub rt60_min: f64,
    pub rt60_max: f64,
    pub mics: usize,
    pub mic_spacing: f64,
    pub array_height: f64,
    /// Minimum distance from any microphone to a wall.
    pub array_margin: f64,
    pub distances: Vec<f64>,
    pub snr_grid: Vec<f64>,
    pub min_doa_deg: f64,
    /// Minimum distance from either source to a wall.
    pub source_margin: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            room_min: [3.0, 3.0, 2.5],
            room_max: [10.0, 10.0, 3.0],
            rt60_min: 0.05,
            rt60_max: 0.7,
            mics: 9,
            mic_spacing: 0.04,
            array_height: 1.5,
            array_margin: 0.5,
            distances: vec![0.5, 1.0, 2.0, 3.0],
            snr_grid: vec![-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0],
            min_doa_deg: DOA_MIN_DEG,
            source_margin: 0.1,
        }
    }
}

impl SamplerConfig {
    /// Same recipe with a different SNR grid (e.g. the evaluation grid).
    pub fn with_snr_grid(mut self, grid: &[f64]) -> Self {
        self.snr_grid = grid.to_vec();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RoomError::Invalid(m));
        if (0..3).any(|k| !(self.room_min[k] > 0.0 && self.room_min[k] <= self.room_max[k])) {
            return bad(format!("room range {:?}..{:?}", self.room_min, self.room_max));
        }
        if !(self.rt60_min > 0.0 && self.rt60_min <= self.rt60_max) {
            return bad(format!("rt60 range {}..{}", self.rt60_min, self.rt60_max));
        }
        if self.mics == 0 || self.distances.is_empty() || self.snr_grid.is_empty() {
            return bad("mics, distances and snr grid must be non-empty".into());
        }
        Ok(())
    }

    /// Every recipe constraint `scene` breaks, as readable strings.
    pub fn violations(&self, scene: &SceneSpec) -> Vec<String> {
        let mut v = Vec::new();
        let dims = scene.room.dimensions;
        for k in 0..3 {
            if dims[k] < self.room_min[k] || dims[k] > self.room_max[k] {
                v.push(format!("room axis {k} = {}", dims[k]));
            }
        }
        if scene.room.rt60 < self.rt60_min || scene.room.rt60 > self.rt60_max {
            v.push(format!("rt60 {}", scene.room.rt60));
        }
        if scene.array.num_mics() != self.mics {
            v.push(format!("{} mics", scene.array.num_mics()));
        }
        for w in scene.array.mic_positions.windows(2) {
            if (distance(&w[0], &w[1]) - self.mic_spacing).abs() > 1e-9 {
                v.push("mic spacing".into());
                break;
            }
        }
        let center = scene.array.center();
        for (name, p) in [("speech", &scene.speech_position), ("noise", &scene.noise_position)] {
            let d = distance(p, &center);
            if !self.distances.iter().any(|&x| (x - d).abs() < 1e-9) {
                v.push(format!("{name} distance {d}"));
            }
            if scene.room.wall_clearance(p) < self.source_margin {
                v.push(format!("{name} wall clearance {}", scene.room.wall_clearance(p)));
            }
        }
        if scene.doa_difference_degrees() < self.min_doa_deg {
            v.push(format!("DOA difference {}", scene.doa_difference_degrees()));
        }
        if !self.snr_grid.contains(&scene.snr_db) {
            v.push(format!("snr {}", scene.snr_db));
        }
        v
    }
}

/// Deterministic per-scene seed from a master seed and scene index
/// (SplitMix64 finaliser), so scenes can be generated in any order.
pub fn scene_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn draw(cfg: &SamplerConfig, rng: &mut ChaCha8Rng) -> (RoomSpec, ArraySpec, Point, Point, f64) {
    let mut dims = [0.0; 3];
    for k in 0..3 {
        dims[k] = if cfg.room_min[k] < cfg.room_max[k] {
            rng.gen_range(cfg.room_min[k]..=cfg.room_max[k])
        } else {
            cfg.room_min[k]
        };
    }
    let rt60 = rng.gen_range(cfg.rt60_min..=cfg.rt60_max);
    let half = (cfg.mics as f64 - 1.0) / 2.0 * cfg.mic_spacing;
    let lo_x = cfg.array_margin + half;
    let hi_x = dims[0] - cfg.array_margin - half;
    let cx = if lo_x < hi_x { rng.gen_range(lo_x..hi_x) } else { dims[0] / 2.0 };
    let (lo_y, hi_y) = (cfg.array_margin, dims[1] - cfg.array_margin);
    let cy = if lo_y < hi_y { rng.gen_range(lo_y..hi_y) } else { dims[1] / 2.0 };
    let center = [cx, cy, cfg.array_height];
    let array = ArraySpec::linear(cfg.mics, cfg.mic_spacing, center);
    let mut source = || {
        let d = *cfg.distances.choose(rng).expect("non-empty");
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        [center[0] + d * phi.cos(), center[1] + d * phi.sin(), center[2]]
    };
    let speech = source();
    let noise = source();
    let snr = *cfg.snr_grid.choose(rng).expect("non-empty");
    (RoomSpec::new(dims, rt60), array, speech, noise, snr)
}

/// Rejection-samples one scene from the recipe. All randomness comes from
/// `seed`, which is stored in the scene.
pub fn sample_scene(cfg: &SamplerConfig, seed: u64) -> Result<SceneSpec> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_DRAWS {
        let (room, array, speech_position, noise_position, snr_db) = draw(cfg, &mut rng);
        let scene = SceneSpec { room, array, speech_position, noise_position, snr_db, seed };
        if cfg.violations(&scene).is_empty()
            && scene.array.mic_positions.iter().all(|m| scene.room.wall_clearance(m) >= cfg.array_margin - 1e-12)
        {
            return Ok(scene);
        }
    }
    Err(RoomError::Exhausted(MAX_DRAWS))
}
