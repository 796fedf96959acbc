//! Raw planar video, frames and clip spans.
//!
//! Samples are 8-bit, planar, row-major. A raw video file is a headerless
//! concatenation of frames; each frame is its planes back to back. Geometry
//! (width, height, plane count, frame rate) is supplied out of band.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frame rate as a rational number of frames per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl FrameRate {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::contract(format!("invalid frame rate {num}/{den}")));
        }
        Ok(FrameRate { num, den })
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for FrameRate {
    fn default() -> Self {
        FrameRate { num: 30, den: 1 }
    }
}

impl fmt::Display for FrameRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for FrameRate {
    type Err = Error;

    /// Accepts `30`, `30/1` or `30000/1001`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::MalformedInput(format!("bad frame rate '{s}'"));
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?),
            None => (s.trim().parse().map_err(|_| bad())?, 1),
        };
        FrameRate::new(num, den).map_err(|_| bad())
    }
}

/// Frame dimensions shared by every frame of a video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Geometry {
    pub width: usize,
    pub height: usize,
    pub planes: usize,
}

impl Geometry {
    pub fn new(width: usize, height: usize, planes: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::contract(format!("empty geometry {width}x{height}")));
        }
        if planes != 1 && planes != 3 {
            return Err(Error::contract(format!("planes must be 1 or 3, got {planes}")));
        }
        Ok(Geometry { width, height, planes })
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn frame_len(&self) -> usize {
        self.plane_len() * self.planes
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.width, self.height, self.planes)
    }
}

/// One picture: `planes` row-major sample planes stored back to back.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    geometry: Geometry,
    samples: Vec<u8>,
}

impl Frame {
    pub fn new(geometry: Geometry, samples: Vec<u8>) -> Result<Self> {
        if samples.len() != geometry.frame_len() {
            return Err(Error::contract(format!(
                "frame of {geometry} needs {} samples, got {}",
                geometry.frame_len(),
                samples.len()
            )));
        }
        Ok(Frame { geometry, samples })
    }

    pub fn filled(geometry: Geometry, value: u8) -> Self {
        Frame { samples: vec![value; geometry.frame_len()], geometry }
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut(usize, usize, usize) -> u8) -> Self {
        let mut samples = Vec::with_capacity(geometry.frame_len());
        for p in 0..geometry.planes {
            for y in 0..geometry.height {
                for x in 0..geometry.width {
                    samples.push(f(p, x, y));
                }
            }
        }
        Frame { geometry, samples }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    pub fn planes(&self) -> usize {
        self.geometry.planes
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    pub fn plane(&self, p: usize) -> &[u8] {
        let len = self.geometry.plane_len();
        &self.samples[p * len..(p + 1) * len]
    }

    pub fn to_real(&self) -> RealFrame {
        RealFrame { geometry: self.geometry, samples: self.samples.iter().map(|&s| s as f64).collect() }
    }

    pub(crate) fn check_same_geometry(&self, other: &Frame) -> Result<()> {
        if self.geometry != other.geometry {
            return Err(Error::contract(format!("geometry mismatch: {} vs {}", self.geometry, other.geometry)));
        }
        Ok(())
    }
}

/// A frame with real-valued samples on the 0..=255 scale, before rounding.
///
/// Backends render into this so the weight optimizer can differentiate their
/// output without 8-bit quantization steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RealFrame {
    pub geometry: Geometry,
    pub samples: Vec<f64>,
}

impl RealFrame {
    /// Rounds half-up and clamps to `[0, 255]`.
    pub fn quantize(&self) -> Frame {
        Frame { geometry: self.geometry, samples: self.samples.iter().map(|&v| quantize_sample(v)).collect() }
    }
}

/// Rounds half-up (`floor(v + 0.5)`) and clamps to the 8-bit range.
pub fn quantize_sample(v: f64) -> u8 {
    let r = (v + 0.5).floor();
    if r.is_nan() || r <= 0.0 {
        0
    } else if r >= 255.0 {
        255
    } else {
        r as u8
    }
}

/// Inclusive frame range `[start, end]` between two consecutive keyframes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClipSpan {
    pub start: usize,
    pub end: usize,
}

impl ClipSpan {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::contract(format!("clip span [{start}, {end}] is empty")));
        }
        Ok(ClipSpan { start, end })
    }

    /// Frames strictly between the two keyframes.
    pub fn intermediate_count(&self) -> usize {
        self.end - self.start - 1
    }
}

/// A decoded or loaded video. Always at least two frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawVideo {
    geometry: Geometry,
    frame_rate: FrameRate,
    frames: Vec<Frame>,
}

impl RawVideo {
    pub fn new(geometry: Geometry, frame_rate: FrameRate, frames: Vec<Frame>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::TooShort { frames: frames.len() });
        }
        if let Some(bad) = frames.iter().position(|f| f.geometry != geometry) {
            return Err(Error::contract(format!(
                "frame {bad} has geometry {}, video is {geometry}",
                frames[bad].geometry
            )));
        }
        Ok(RawVideo { geometry, frame_rate, frames })
    }

    /// Splits a headerless planar buffer into frames.
    pub fn from_bytes(bytes: &[u8], geometry: Geometry, frame_rate: FrameRate) -> Result<Self> {
        let frame_len = geometry.frame_len();
        if !bytes.len().is_multiple_of(frame_len) {
            return Err(Error::MalformedInput(format!(
                "{} bytes is not a multiple of the {frame_len}-byte frame size for {geometry}",
                bytes.len()
            )));
        }
        let frames = bytes.chunks_exact(frame_len).map(|c| Frame { geometry, samples: c.to_vec() }).collect();
        RawVideo::new(geometry, frame_rate, frames)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.frames.len() * self.geometry.frame_len());
        for f in &self.frames {
            out.extend_from_slice(&f.samples);
        }
        out
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    pub fn planes(&self) -> usize {
        self.geometry.planes
    }

    pub fn frame_rate(&self) -> FrameRate {
        self.frame_rate
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &Frame {
        &self.frames[i]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Never true; a video holds at least two frames.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub(crate) fn check_same_shape(&self, other: &RawVideo) -> Result<()> {
        if self.geometry != other.geometry || self.len() != other.len() {
            return Err(Error::contract(format!(
                "video shape mismatch: {} x {} frames vs {} x {} frames",
                self.geometry,
                self.len(),
                other.geometry,
                other.len()
            )));
        }
        Ok(())
    }
}

/// Reads a headerless planar raw video file.
pub fn load_raw_video(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    planes: usize,
    frame_rate: FrameRate,
) -> Result<RawVideo> {
    let geometry = Geometry::new(width, height, planes)?;
    let bytes = fs::read(path)?;
    RawVideo::from_bytes(&bytes, geometry, frame_rate)
}

pub fn write_raw_video(path: impl AsRef<Path>, video: &RawVideo) -> Result<()> {
    fs::write(path, video.to_bytes())?;
    Ok(())
}

/// Bits per pixel: `total_bits / (width * height * frames)`. Planes are not
/// counted, following the usual codec convention.
pub fn compute_bpp(total_bits: u64, video: &RawVideo) -> f64 {
    let pixels = video.width() * video.height() * video.len();
    total_bits as f64 / pixels as f64
}
