//! Keyframe image codec.
//!
//! Per plane: level shift by 128, 8x8 orthonormal DCT, uniform quantization
//! with step `2048 / q`, zigzag scan, zero-run/magnitude tokens coded with
//! adaptive arithmetic models. Magnitudes are coded as a bit-length class
//! followed by sign and mantissa bits at even odds. DC values are coded as
//! differences from the previous block of the same plane.
//!
//! Payload layout (big-endian):
//!
//! | bytes | field                          |
//! |-------|--------------------------------|
//! | 2     | width (unpadded)               |
//! | 2     | height (unpadded)              |
//! | 1     | planes                         |
//! | 1     | log2(q)                        |
//! | ...   | arithmetic-coded body          |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::arith::{Decoder, Encoder, FrequencyModel};
use crate::dct::{self, BLOCK};
use crate::error::{Error, Result};
use crate::model::{quantize_sample, Frame, Geometry};

const HEADER_LEN: usize = 6;
const CLASSES: usize = 16;
const EOB: usize = 63;

#[rustfmt::skip]
const ZIGZAG: [usize; BLOCK] = [
     0,  1,  8, 16,  9,  2,  3, 10,
    17, 24, 32, 25, 18, 11,  4,  5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13,  6,  7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
];

/// Keyframe quality tier; larger is finer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum QualityFactor {
    Q64,
    #[default]
    Q128,
    Q256,
}

impl QualityFactor {
    pub const ALL: [QualityFactor; 3] = [QualityFactor::Q64, QualityFactor::Q128, QualityFactor::Q256];

    pub fn value(self) -> u32 {
        match self {
            QualityFactor::Q64 => 64,
            QualityFactor::Q128 => 128,
            QualityFactor::Q256 => 256,
        }
    }

    pub fn from_value(q: u32) -> Result<Self> {
        match q {
            64 => Ok(QualityFactor::Q64),
            128 => Ok(QualityFactor::Q128),
            256 => Ok(QualityFactor::Q256),
            _ => Err(Error::Config(format!("quality must be 64, 128 or 256, got {q}"))),
        }
    }

    /// Quantizer step `2048 / q`.
    pub fn step(self) -> f64 {
        2048.0 / self.value() as f64
    }

    fn log2(self) -> u8 {
        self.value().trailing_zeros() as u8
    }
}

impl fmt::Display for QualityFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl FromStr for QualityFactor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let q = s.trim().parse().map_err(|_| Error::Config(format!("bad quality '{s}'")))?;
        QualityFactor::from_value(q)
    }
}

struct Models {
    dc_class: FrequencyModel,
    ac_run: FrequencyModel,
    ac_class: FrequencyModel,
}

impl Models {
    fn new() -> Self {
        Models {
            dc_class: FrequencyModel::new(CLASSES),
            ac_run: FrequencyModel::new(EOB + 1),
            ac_class: FrequencyModel::new(CLASSES),
        }
    }
}

fn bit_length(v: u32) -> u32 {
    32 - v.leading_zeros()
}

fn put_value(enc: &mut Encoder, class_model: &mut FrequencyModel, v: i32) {
    let mag = v.unsigned_abs();
    let class = bit_length(mag);
    debug_assert!((class as usize) < CLASSES);
    enc.encode(class_model, class as usize);
    if class > 0 {
        enc.encode_bits((v < 0) as u32, 1);
        enc.encode_bits(mag - (1 << (class - 1)), class - 1);
    }
}

fn get_value(dec: &mut Decoder, class_model: &mut FrequencyModel) -> Result<i32> {
    let class = dec.decode(class_model)? as u32;
    if class == 0 {
        return Ok(0);
    }
    let negative = dec.decode_bits(1)? == 1;
    let mag = (1i32 << (class - 1)) + dec.decode_bits(class - 1)? as i32;
    Ok(if negative { -mag } else { mag })
}

fn quantize_coeff(c: f64, step: f64) -> i32 {
    (c / step).round() as i32
}

pub fn encode_keyframe(frame: &Frame, q: QualityFactor) -> Result<Vec<u8>> {
    let g = frame.geometry();
    if g.width > u16::MAX as usize || g.height > u16::MAX as usize {
        return Err(Error::contract(format!("frame {g} too large for a keyframe payload")));
    }
    let mut out = Vec::new();
    out.extend((g.width as u16).to_be_bytes());
    out.extend((g.height as u16).to_be_bytes());
    out.push(g.planes as u8);
    out.push(q.log2());

    let (pw, ph) = (dct::padded(g.width), dct::padded(g.height));
    let step = q.step();
    let mut enc = Encoder::new();
    let mut models = Models::new();
    for p in 0..g.planes {
        let shifted: Vec<f64> = frame.plane(p).iter().map(|&s| s as f64 - 128.0).collect();
        let coeffs = dct::forward_plane(&dct::pad_plane(&shifted, g.width, g.height), pw, ph);
        let mut prev_dc = 0;
        for block in coeffs.chunks_exact(BLOCK) {
            let levels: Vec<i32> = ZIGZAG.iter().map(|&i| quantize_coeff(block[i], step)).collect();
            put_value(&mut enc, &mut models.dc_class, levels[0] - prev_dc);
            prev_dc = levels[0];
            let mut pos = 1;
            while pos < BLOCK {
                match (pos..BLOCK).find(|&i| levels[i] != 0) {
                    None => {
                        enc.encode(&mut models.ac_run, EOB);
                        break;
                    }
                    Some(i) => {
                        enc.encode(&mut models.ac_run, i - pos);
                        put_value(&mut enc, &mut models.ac_class, levels[i]);
                        pos = i + 1;
                    }
                }
            }
        }
    }
    out.extend(enc.finish());
    Ok(out)
}

/// Reads the geometry recorded in a keyframe payload header.
pub fn keyframe_geometry(payload: &[u8]) -> Result<(Geometry, QualityFactor)> {
    if payload.len() < HEADER_LEN {
        return Err(Error::payload("keyframe payload shorter than its header"));
    }
    let width = u16::from_be_bytes([payload[0], payload[1]]) as usize;
    let height = u16::from_be_bytes([payload[2], payload[3]]) as usize;
    let planes = payload[4] as usize;
    let q = match payload[5] {
        6 => QualityFactor::Q64,
        7 => QualityFactor::Q128,
        8 => QualityFactor::Q256,
        other => return Err(Error::payload(format!("unknown quality code {other}"))),
    };
    let g = Geometry::new(width, height, planes)
        .map_err(|_| Error::payload(format!("bad keyframe geometry {width}x{height}x{planes}")))?;
    Ok((g, q))
}

pub fn decode_keyframe(payload: &[u8]) -> Result<Frame> {
    let (g, q) = keyframe_geometry(payload)?;
    let (pw, ph) = (dct::padded(g.width), dct::padded(g.height));
    let blocks = (pw / dct::N) * (ph / dct::N);
    let step = q.step();
    let mut dec = Decoder::new(&payload[HEADER_LEN..]);
    let mut models = Models::new();
    let mut samples = Vec::with_capacity(g.frame_len());
    for _ in 0..g.planes {
        let mut coeffs = vec![0.0; blocks * BLOCK];
        let mut prev_dc = 0;
        for block in coeffs.chunks_exact_mut(BLOCK) {
            let dc = prev_dc + get_value(&mut dec, &mut models.dc_class)?;
            prev_dc = dc;
            block[ZIGZAG[0]] = dc as f64 * step;
            let mut pos = 1;
            while pos < BLOCK {
                let run = dec.decode(&mut models.ac_run)?;
                if run == EOB {
                    break;
                }
                let i = pos + run;
                if i >= BLOCK {
                    return Err(Error::payload("zero run past the end of a block"));
                }
                let level = get_value(&mut dec, &mut models.ac_class)?;
                if level == 0 {
                    return Err(Error::payload("zero level after a run token"));
                }
                block[ZIGZAG[i]] = level as f64 * step;
                pos = i + 1;
            }
        }
        let plane = dct::crop_plane(&dct::inverse_plane(&coeffs, pw, ph), pw, g.width, g.height);
        samples.extend(plane.iter().map(|&v| quantize_sample(v + 128.0)));
    }
    dec.finish()?;
    Frame::new(g, samples)
}

/// Decodes and checks the result against the geometry the caller expects.
pub fn decode_keyframe_as(payload: &[u8], expected: Geometry) -> Result<Frame> {
    let (g, _) = keyframe_geometry(payload)?;
    if g != expected {
        return Err(Error::contract(format!("keyframe payload is {g}, stream expects {expected}")));
    }
    decode_keyframe(payload)
}
