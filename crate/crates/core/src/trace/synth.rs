//! Synthetic viewer cohorts with tunable viewing-interest correlation.
//!
//! Each viewer follows a shared reference path (a sum of slow sinusoids in yaw
//! and pitch) plus a private smooth deviation scaled by `1 - correlation`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Orientation, TileGridSpec, ViewerTrace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortParams {
    pub n_viewers: u32,
    pub duration_s: f64,
    pub correlation: f64,
    pub seed: u64,
    pub buffer_s: f64,
    pub d_max_s: f64,
}

impl Default for CohortParams {
    fn default() -> Self {
        Self {
            n_viewers: 48,
            duration_s: 120.0,
            correlation: 0.9,
            seed: 0,
            buffer_s: 2.0,
            d_max_s: 20.0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Wave {
    amp: f64,
    freq_hz: f64,
    phase: f64,
}

impl Wave {
    fn at(&self, t: f64) -> f64 {
        self.amp * (std::f64::consts::TAU * self.freq_hz * t + self.phase).sin()
    }
}

#[derive(Clone, Debug)]
struct SmoothPath {
    yaw: Vec<Wave>,
    pitch: Vec<Wave>,
}

impl SmoothPath {
    fn draw(
        rng: &mut ChaCha8Rng,
        yaw_amp: (f64, f64),
        pitch_amp: (f64, f64),
        freq: (f64, f64),
    ) -> Self {
        let mut wave = |amp: (f64, f64)| Wave {
            amp: rng.random_range(amp.0..amp.1),
            freq_hz: rng.random_range(freq.0..freq.1),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        };
        let yaw = (0..3).map(|_| wave(yaw_amp)).collect();
        let pitch = (0..2).map(|_| wave(pitch_amp)).collect();
        Self { yaw, pitch }
    }

    fn at(&self, t: f64) -> (f64, f64) {
        (
            self.yaw.iter().map(|w| w.at(t)).sum(),
            self.pitch.iter().map(|w| w.at(t)).sum(),
        )
    }
}

/// Deterministic cohort for the given seed. Device levels are assigned
/// round-robin by viewer index; `l_i = b_i + U[0, d_max]`.
pub fn synthesize_cohort(params: &CohortParams, grid: &TileGridSpec) -> Vec<ViewerTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let fps = grid.fps();
    let frames = (params.duration_s * fps).round() as u32;
    let rho = params.correlation.clamp(0.0, 1.0);
    let scale = 1.0 - rho;

    let heading = rng.random_range(-180.0..180.0);
    let reference = SmoothPath::draw(&mut rng, (15.0, 45.0), (4.0, 15.0), (0.01, 0.08));

    (0..params.n_viewers)
        .map(|viewer_id| {
            let deviation = SmoothPath::draw(&mut rng, (20.0, 60.0), (5.0, 20.0), (0.03, 0.2));
            let lag = rng.random_range(0.0..=params.d_max_s);
            let poses = (0..frames)
                .map(|f| {
                    let t = f64::from(f) / fps;
                    let (ry, rp) = reference.at(t);
                    let (dy, dp) = deviation.at(t);
                    Orientation::new(heading + ry + scale * dy, rp + scale * dp, 0.0)
                })
                .collect();
            ViewerTrace {
                viewer_id,
                first_frame: 0,
                poses,
                playback_latency_s: params.buffer_s + lag,
                buffer_s: params.buffer_s,
                device_level: (viewer_id as usize % grid.levels()) as u8,
            }
        })
        .collect()
}
