//! Frame generation between decoded keyframes.
//!
//! Three backends share one contract: given the left/right keyframes, the
//! clip's motion text and a weight track, produce the intermediate frames.
//!
//! * `linear` blends pixels: `wi * left + (1 - wi) * right`.
//! * `latent` works on block-DCT latents. The left/right latents define two
//!   adapter residuals around their mean; the adapter is interpolated with
//!   `wl` independently of the pixel blend driven by `wi`, plus an optional
//!   text-seeded modulation.
//! * `external` forwards requests to a child process (see [`external`]).

pub mod external;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::codec::{TextRepr, WeightTrack};
use crate::dct;
use crate::error::{Error, Result};
use crate::model::{Frame, Geometry, RealFrame};
use crate::rng::{fnv1a64, SplitMix64};

pub use external::ExternalBackend;

/// Which backend to run; parsed from `linear`, `latent[:<modulation>]` or
/// `external:<command>`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    #[default]
    Linear,
    Latent {
        modulation: f64,
    },
    External {
        command: String,
    },
}

impl BackendSpec {
    pub fn instantiate(&self) -> Result<Box<dyn Backend>> {
        Ok(match self {
            BackendSpec::Linear => Box::new(LinearBackend),
            BackendSpec::Latent { modulation } => Box::new(LatentAdapterBackend::new(*modulation)),
            BackendSpec::External { command } => Box::new(ExternalBackend::spawn(command)?),
        })
    }

    /// In-process backends are pure and may be cloned per worker thread.
    pub fn is_in_process(&self) -> bool {
        !matches!(self, BackendSpec::External { .. })
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Linear => f.write_str("linear"),
            BackendSpec::Latent { modulation } if *modulation == 0.0 => f.write_str("latent"),
            BackendSpec::Latent { modulation } => write!(f, "latent:{modulation}"),
            BackendSpec::External { command } => write!(f, "external:{command}"),
        }
    }
}

impl FromStr for BackendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind, arg) {
            ("linear", None) => Ok(BackendSpec::Linear),
            ("latent", None) => Ok(BackendSpec::Latent { modulation: 0.0 }),
            ("latent", Some(a)) => {
                let modulation: f64 = a.parse().map_err(|_| Error::Config(format!("bad latent modulation '{a}'")))?;
                if !modulation.is_finite() {
                    return Err(Error::Config("latent modulation must be finite".into()));
                }
                Ok(BackendSpec::Latent { modulation })
            }
            ("external", Some(cmd)) if !cmd.trim().is_empty() => Ok(BackendSpec::External { command: cmd.to_string() }),
            _ => Err(Error::Config(format!(
                "unknown backend '{s}' (expected linear, latent[:<m>] or external:<command>)"
            ))),
        }
    }
}

/// One clip's worth of generation input.
#[derive(Debug, Clone)]
pub struct GenerationRequest {
    pub left: Frame,
    pub right: Frame,
    pub motion_text: TextRepr,
    pub weights: WeightTrack,
}

impl GenerationRequest {
    pub fn new(left: Frame, right: Frame, motion_text: TextRepr, weights: WeightTrack) -> Result<Self> {
        left.check_same_geometry(&right)?;
        Ok(GenerationRequest { left, right, motion_text, weights })
    }

    pub fn intermediate_count(&self) -> usize {
        self.weights.len()
    }

    /// Position of intermediate `t` within the clip, in `(0, 1)`.
    pub fn t_frac(&self, t: usize) -> f64 {
        (t + 1) as f64 / (self.intermediate_count() + 1) as f64
    }
}

/// Everything a backend needs to render one intermediate frame.
#[derive(Debug, Clone, Copy)]
pub struct FrameQuery<'a> {
    pub left: &'a Frame,
    pub right: &'a Frame,
    pub motion_text: &'a TextRepr,
    pub wi: f64,
    pub wl: f64,
    pub t_frac: f64,
}

pub trait Backend: Send {
    fn name(&self) -> String;

    /// Real-valued (pre-rounding) rendering of a single intermediate frame.
    /// Weights slightly outside `[0, 1]` must be accepted so finite
    /// differences can straddle the boundary.
    fn render(&mut self, query: &FrameQuery<'_>) -> Result<RealFrame>;

    fn generate(&mut self, req: &GenerationRequest) -> Result<Vec<Frame>> {
        (0..req.intermediate_count())
            .map(|t| {
                let q = FrameQuery {
                    left: &req.left,
                    right: &req.right,
                    motion_text: &req.motion_text,
                    wi: req.weights.wi()[t],
                    wl: req.weights.wl()[t],
                    t_frac: req.t_frac(t),
                };
                self.render(&q).map(|f| f.quantize())
            })
            .collect()
    }
}

/// Runs `backend` over `req`; checks the number of frames returned.
pub fn generate_clip(backend: &mut dyn Backend, req: &GenerationRequest) -> Result<Vec<Frame>> {
    let frames = backend.generate(req)?;
    if frames.len() != req.intermediate_count() {
        return Err(Error::ProtocolViolation(format!(
            "backend {} returned {} frames, expected {}",
            backend.name(),
            frames.len(),
            req.intermediate_count()
        )));
    }
    if let Some(f) = frames.iter().find(|f| f.geometry() != req.left.geometry()) {
        return Err(Error::ProtocolViolation(format!(
            "backend {} returned a {} frame for a {} clip",
            backend.name(),
            f.geometry(),
            req.left.geometry()
        )));
    }
    Ok(frames)
}

/// `wi * left + (1 - wi) * right` without rounding.
pub fn blend_real(left: &Frame, right: &Frame, wi: f64) -> Result<RealFrame> {
    left.check_same_geometry(right)?;
    Ok(RealFrame {
        geometry: left.geometry(),
        samples: left
            .samples()
            .iter()
            .zip(right.samples())
            .map(|(&a, &b)| wi * a as f64 + (1.0 - wi) * b as f64)
            .collect(),
    })
}

/// Pixel blend, rounded half-up and clamped.
pub fn interpolate_frames(left: &Frame, right: &Frame, wi: f64) -> Result<Frame> {
    if !(0.0..=1.0).contains(&wi) {
        return Err(Error::contract(format!("frame weight {wi} outside [0, 1]")));
    }
    Ok(blend_real(left, right, wi)?.quantize())
}

/// Flattened latent residual standing in for adapter parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterState(pub Vec<f64>);

impl AdapterState {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// `wl * a0 + (1 - wl) * a1`, elementwise.
pub fn interpolate_adapters(a0: &AdapterState, a1: &AdapterState, wl: f64) -> Result<AdapterState> {
    if !(0.0..=1.0).contains(&wl) {
        return Err(Error::contract(format!("adapter weight {wl} outside [0, 1]")));
    }
    mix_adapters(a0, a1, wl)
}

fn mix_adapters(a0: &AdapterState, a1: &AdapterState, w: f64) -> Result<AdapterState> {
    if a0.0.len() != a1.0.len() {
        return Err(Error::contract(format!("adapter dimension mismatch: {} vs {}", a0.0.len(), a1.0.len())));
    }
    Ok(AdapterState(a0.0.iter().zip(&a1.0).map(|(x, y)| w * x + (1.0 - w) * y).collect()))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LinearBackend;

impl Backend for LinearBackend {
    fn name(&self) -> String {
        "linear".into()
    }

    fn render(&mut self, q: &FrameQuery<'_>) -> Result<RealFrame> {
        blend_real(q.left, q.right, q.wi)
    }
}

/// Block-DCT latents of every plane, padded to multiples of 8 and
/// concatenated plane after plane.
fn latent_of(samples: &[f64], g: Geometry) -> Vec<f64> {
    let (pw, ph) = (dct::padded(g.width), dct::padded(g.height));
    let mut out = Vec::with_capacity(pw * ph * g.planes);
    for plane in samples.chunks_exact(g.plane_len()) {
        out.extend(dct::forward_plane(&dct::pad_plane(plane, g.width, g.height), pw, ph));
    }
    out
}

fn pixels_of(latent: &[f64], g: Geometry) -> Vec<f64> {
    let (pw, ph) = (dct::padded(g.width), dct::padded(g.height));
    let mut out = Vec::with_capacity(g.frame_len());
    for plane in latent.chunks_exact(pw * ph) {
        out.extend(dct::crop_plane(&dct::inverse_plane(plane, pw, ph), pw, g.width, g.height));
    }
    out
}

/// Unit-norm pseudorandom direction seeded by the FNV-1a hash of `text`.
pub fn text_direction(text: &TextRepr, dim: usize) -> Vec<f64> {
    let mut rng = SplitMix64::new(fnv1a64(text.as_bytes()));
    let mut d: Vec<f64> = (0..dim).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut d {
            *v /= norm;
        }
    }
    d
}

/// Deterministic stand-in for an image+text-to-video model.
///
/// With `modulation == 0` the output equals the pixel blend at `wl`, because
/// the adapter correction `(wl - wi) * (z0 - z1)` moves the `wi` blend there.
#[derive(Debug, Clone, Copy, Default)]
pub struct LatentAdapterBackend {
    modulation: f64,
}

impl LatentAdapterBackend {
    pub fn new(modulation: f64) -> Self {
        LatentAdapterBackend { modulation }
    }

    /// Adapter residuals `z0 - mean` and `z1 - mean` of the two keyframes.
    pub fn adapters(left: &Frame, right: &Frame) -> Result<(AdapterState, AdapterState)> {
        left.check_same_geometry(right)?;
        let g = left.geometry();
        let z0 = latent_of(&left.to_real().samples, g);
        let z1 = latent_of(&right.to_real().samples, g);
        let (d0, d1) = z0
            .iter()
            .zip(&z1)
            .map(|(a, b)| {
                let mean = (a + b) / 2.0;
                (a - mean, b - mean)
            })
            .unzip();
        Ok((AdapterState(d0), AdapterState(d1)))
    }
}

impl Backend for LatentAdapterBackend {
    fn name(&self) -> String {
        if self.modulation == 0.0 {
            "latent".into()
        } else {
            format!("latent:{}", self.modulation)
        }
    }

    fn render(&mut self, q: &FrameQuery<'_>) -> Result<RealFrame> {
        let g = q.left.geometry();
        let (a0, a1) = Self::adapters(q.left, q.right)?;
        let adapter = mix_adapters(&a0, &a1, q.wl)?;
        let baseline = mix_adapters(&a0, &a1, q.wi)?;
        let mut z = latent_of(&blend_real(q.left, q.right, q.wi)?.samples, g);
        for ((zv, a), b) in z.iter_mut().zip(adapter.values()).zip(baseline.values()) {
            *zv += a - b;
        }
        let s = (std::f64::consts::PI * q.t_frac).sin() * self.modulation;
        if s != 0.0 {
            let d = text_direction(q.motion_text, z.len());
            for (zv, dv) in z.iter_mut().zip(&d) {
                *zv += s * dv;
            }
        }
        Ok(RealFrame { geometry: g, samples: pixels_of(&z, g) })
    }
}

/// Text-only decoding placeholder: a pseudorandom frame seeded by the
/// keyframe text, the motion text and the frame index.
pub fn placeholder_frame(geometry: Geometry, keyframe_text: &TextRepr, motion_text: &TextRepr, index: usize) -> Frame {
    let mut key = Vec::with_capacity(keyframe_text.as_bytes().len() + motion_text.as_bytes().len() + 10);
    key.extend_from_slice(keyframe_text.as_bytes());
    key.push(0x1F);
    key.extend_from_slice(motion_text.as_bytes());
    key.push(0x1F);
    key.extend((index as u64).to_be_bytes());
    let mut rng = SplitMix64::new(fnv1a64(&key));
    let samples = (0..geometry.frame_len()).map(|_| rng.next_u64() as u8).collect();
    Frame::new(geometry, samples).expect("sample count matches geometry")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(w: usize, h: usize) -> Geometry {
        Geometry::new(w, h, 1).unwrap()
    }

    fn noise(geom: Geometry, seed: u64) -> Frame {
        let mut rng = SplitMix64::new(seed);
        Frame::from_fn(geom, |_, _, _| rng.next_u64() as u8)
    }

    fn text(s: &str) -> TextRepr {
        TextRepr::new(s).unwrap()
    }

    #[test]
    fn blend_endpoints_and_midpoint() {
        let (l, r) = (noise(g(9, 7), 1), noise(g(9, 7), 2));
        assert_eq!(interpolate_frames(&l, &r, 1.0).unwrap(), l);
        assert_eq!(interpolate_frames(&l, &r, 0.0).unwrap(), r);
        let z = Frame::filled(g(4, 4), 0);
        let h = Frame::filled(g(4, 4), 100);
        assert_eq!(interpolate_frames(&z, &h, 0.5).unwrap(), Frame::filled(g(4, 4), 50));
        // 0.5 * 0 + 0.5 * 1 rounds half-up.
        let one = Frame::filled(g(4, 4), 1);
        assert_eq!(interpolate_frames(&z, &one, 0.5).unwrap(), one);
    }

    #[test]
    fn blend_rejects_bad_input() {
        let l = noise(g(4, 4), 1);
        assert!(matches!(interpolate_frames(&l, &noise(g(4, 5), 1), 0.5), Err(Error::Contract(_))));
        assert!(matches!(interpolate_frames(&l, &l, 1.5), Err(Error::Contract(_))));
    }

    #[test]
    fn adapter_interpolation() {
        let a0 = AdapterState(vec![2.0, 2.0]);
        let a1 = AdapterState(vec![0.0, 0.0]);
        assert_eq!(interpolate_adapters(&a0, &a1, 1.0).unwrap(), a0);
        assert_eq!(interpolate_adapters(&a0, &a1, 0.25).unwrap(), AdapterState(vec![0.5, 0.5]));
        let neg = AdapterState(vec![-2.0, -2.0]);
        assert_eq!(interpolate_adapters(&a0, &neg, 0.5).unwrap(), AdapterState(vec![0.0, 0.0]));
        assert!(interpolate_adapters(&a0, &AdapterState(vec![1.0]), 0.5).is_err());
    }

    #[test]
    fn linear_single_frame_is_left() {
        let (l, r) = (noise(g(8, 8), 3), noise(g(8, 8), 4));
        let req =
            GenerationRequest::new(l.clone(), r, text(""), WeightTrack::new(vec![1.0], vec![1.0]).unwrap()).unwrap();
        assert_eq!(generate_clip(&mut LinearBackend, &req).unwrap(), vec![l]);
    }

    #[test]
    fn latent_matches_linear_when_weights_agree() {
        for seed in 0..10 {
            let geom = g(13 + seed as usize, 11);
            let (l, r) = (noise(geom, seed), noise(geom, seed + 100));
            let w = WeightTrack::new(vec![0.9, 0.6, 0.31, 0.05], vec![0.9, 0.6, 0.31, 0.05]).unwrap();
            let req = GenerationRequest::new(l, r, text("a dog runs"), w).unwrap();
            let lin = generate_clip(&mut LinearBackend, &req).unwrap();
            let lat = generate_clip(&mut LatentAdapterBackend::new(0.0), &req).unwrap();
            for (a, b) in lin.iter().zip(&lat) {
                for (&x, &y) in a.samples().iter().zip(b.samples()) {
                    assert!((x as i32 - y as i32).abs() <= 1);
                }
            }
        }
    }

    #[test]
    fn latent_follows_wl() {
        let geom = g(16, 8);
        let (l, r) = (noise(geom, 1), noise(geom, 2));
        let mut b = LatentAdapterBackend::new(0.0);
        let t = text("");
        let q = FrameQuery { left: &l, right: &r, motion_text: &t, wi: 0.2, wl: 0.7, t_frac: 0.5 };
        let out = b.render(&q).unwrap();
        let want = blend_real(&l, &r, 0.7).unwrap();
        for (a, b) in out.samples.iter().zip(&want.samples) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn latent_adapter_endpoints() {
        let geom = g(8, 8);
        let (l, r) = (noise(geom, 5), noise(geom, 6));
        let (a0, a1) = LatentAdapterBackend::adapters(&l, &r).unwrap();
        assert_eq!(interpolate_adapters(&a0, &a1, 1.0).unwrap(), a0);
        assert_eq!(interpolate_adapters(&a0, &a1, 0.0).unwrap(), a1);
        for (x, y) in a0.values().iter().zip(a1.values()) {
            assert!((x + y).abs() < 1e-9);
        }
    }

    #[test]
    fn motion_text_sensitivity() {
        let geom = g(16, 16);
        let (l, r) = (noise(geom, 7), noise(geom, 8));
        let w = WeightTrack::linear(3);
        let run = |m: f64, s: &str| {
            let req = GenerationRequest::new(l.clone(), r.clone(), text(s), w.clone()).unwrap();
            generate_clip(&mut LatentAdapterBackend::new(m), &req).unwrap()
        };
        assert_eq!(run(0.0, "walks left"), run(0.0, "walks right"));
        assert_ne!(run(400.0, "walks left"), run(400.0, "walks right"));
        assert_eq!(run(400.0, "walks left"), run(400.0, "walks left"));
    }

    #[test]
    fn text_direction_is_unit() {
        let d = text_direction(&text("x"), 1000);
        let n: f64 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
        assert_ne!(d, text_direction(&text("y"), 1000));
    }

    #[test]
    fn placeholder_is_deterministic() {
        let geom = g(8, 4);
        let a = placeholder_frame(geom, &text("a"), &text("b"), 3);
        assert_eq!(a, placeholder_frame(geom, &text("a"), &text("b"), 3));
        assert_ne!(a, placeholder_frame(geom, &text("a"), &text("b"), 4));
        assert_ne!(a, placeholder_frame(geom, &text("ab"), &text(""), 3));
    }

    #[test]
    fn backend_spec_parsing() {
        assert_eq!("linear".parse::<BackendSpec>().unwrap(), BackendSpec::Linear);
        assert_eq!("latent".parse::<BackendSpec>().unwrap(), BackendSpec::Latent { modulation: 0.0 });
        assert_eq!("latent:2.5".parse::<BackendSpec>().unwrap(), BackendSpec::Latent { modulation: 2.5 });
        assert_eq!(
            "external:python3 serve.py --mode blend".parse::<BackendSpec>().unwrap(),
            BackendSpec::External { command: "python3 serve.py --mode blend".into() }
        );
        assert!("external:".parse::<BackendSpec>().is_err());
        assert!("diffusion".parse::<BackendSpec>().is_err());
        assert_eq!(BackendSpec::Latent { modulation: 2.5 }.to_string(), "latent:2.5");
    }

    proptest! {
        #[test]
        fn blend_is_monotone_in_weight(seed in any::<u64>(), w1 in 0.0f64..=1.0, w2 in 0.0f64..=1.0) {
            let geom = g(6, 5);
            let (a, b) = (noise(geom, seed), noise(geom, seed.wrapping_add(1)));
            let left = Frame::from_fn(geom, |_, x, y| a.samples()[y * 6 + x].max(b.samples()[y * 6 + x]));
            let right = Frame::from_fn(geom, |_, x, y| a.samples()[y * 6 + x].min(b.samples()[y * 6 + x]));
            let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
            let f_lo = interpolate_frames(&left, &right, lo).unwrap();
            let f_hi = interpolate_frames(&left, &right, hi).unwrap();
            prop_assert!(f_lo.samples().iter().zip(f_hi.samples()).all(|(x, y)| x <= y));
        }

        #[test]
        fn latent_is_deterministic(seed in any::<u64>(), wi in 0.0f64..=1.0, wl in 0.0f64..=1.0) {
            let geom = g(10, 9);
            let (l, r) = (noise(geom, seed), noise(geom, !seed));
            let w = WeightTrack::new(vec![wi], vec![wl]).unwrap();
            let req = GenerationRequest::new(l, r, text("pan"), w).unwrap();
            let mut b = LatentAdapterBackend::new(3.0);
            prop_assert_eq!(generate_clip(&mut b, &req).unwrap(), generate_clip(&mut b, &req).unwrap());
        }
    }
}
