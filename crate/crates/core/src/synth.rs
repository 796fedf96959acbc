//! Deterministic synthetic videos for tests, demos and the bundled sample.

use crate::backend::blend_real;
use crate::error::Result;
use crate::model::{quantize_sample, Frame, FrameRate, Geometry, RawVideo};
use crate::rng::SplitMix64;

/// Drifting sinusoidal texture over a slow gradient, with light noise.
pub fn moving_pattern(geometry: Geometry, frames: usize, seed: u64) -> Result<RawVideo> {
    let mut rng = SplitMix64::new(seed);
    let fx = 0.15 + rng.next_f64() * 0.35;
    let fy = 0.10 + rng.next_f64() * 0.30;
    let vx = 0.5 + rng.next_f64() * 1.5;
    let vy = rng.next_f64() - 0.5;
    let phase = rng.next_f64() * std::f64::consts::TAU;
    let noise = 4.0 + rng.next_f64() * 6.0;
    let list = (0..frames)
        .map(|t| {
            let t = t as f64;
            Frame::from_fn(geometry, |p, x, y| {
                let (x, y) = (x as f64 + vx * t, y as f64 + vy * t);
                let v = 128.0
                    + 70.0 * (fx * x + phase + p as f64).sin() * (fy * y).cos()
                    + 30.0 * ((x + y) / (geometry.width + geometry.height) as f64 - 0.5)
                    + noise * (rng.next_f64() - 0.5);
                quantize_sample(v)
            })
        })
        .collect();
    RawVideo::new(geometry, FrameRate::default(), list)
}

/// A single clip whose interior frames are pixel blends of the two end
/// frames: frame `t` (1-based inside the clip) uses `weight(t_frac)`.
pub fn blend_video(left: &Frame, right: &Frame, frames: usize, weight: impl Fn(f64) -> f64) -> Result<RawVideo> {
    let inner = frames - 2;
    let mut list = vec![left.clone()];
    for t in 0..inner {
        let w = weight((t + 1) as f64 / (inner + 1) as f64);
        list.push(blend_real(left, right, w)?.quantize());
    }
    list.push(right.clone());
    RawVideo::new(left.geometry(), FrameRate::default(), list)
}

/// Uniform noise with samples in `[lo, hi]`.
pub fn noise_frame(geometry: Geometry, seed: u64, lo: u8, hi: u8) -> Frame {
    let mut rng = SplitMix64::new(seed);
    let span = (hi - lo) as u64 + 1;
    Frame::from_fn(geometry, |_, _, _| lo + rng.below(span) as u8)
}

/// The sample shipped in `testdata/`: 64x48 luma, 16 frames, seed 0.
pub fn bundled_sample() -> RawVideo {
    moving_pattern(Geometry::new(64, 48, 1).unwrap(), 16, 0).expect("16 frames is a valid video")
}
