//! End-to-end encode and decode.
//!
//! Encode: select keyframes, cut clips, code each clip's representation and
//! mux. Decode: demux, decode keyframes or text, generate the frames between
//! keyframes with a backend, and reassemble the full frame sequence.
//!
//! Boundary keyframes are coded once, in the clip they open; the last clip
//! also carries the final keyframe.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::backend::{generate_clip, placeholder_frame, Backend, BackendSpec, GenerationRequest};
use crate::bitstream::{self, ClipRecord, Mode, RateBreakdown, Section, SectionTag, StreamHeader};
use crate::codec::image::decode_keyframe_as;
use crate::codec::{
    decode_text, decode_weights, encode_keyframe, encode_text, encode_weights, QualityFactor, TextRepr, WeightTrack,
};
use crate::error::{Error, Result};
use crate::keyframe::{select_keyframes_with, split_into_clips, FileFeatures, KeyframeSet, PooledLuma, Strategy};
use crate::model::{ClipSpan, Frame, FrameRate, Geometry, RawVideo};
use crate::optimize::{optimize_weights, Optimized, OptimizerConfig};

/// Per-keyframe and per-clip text, as read from a sidecar file:
///
/// ```text
/// [keyframe 0]
/// a red car parked by a wall
/// [clip 0]
/// the car drives off to the right
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TextSidecar {
    keyframes: BTreeMap<usize, String>,
    clips: BTreeMap<usize, String>,
}

impl TextSidecar {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut sidecar = TextSidecar::default();
        let mut current: Option<(bool, usize)> = None;
        let mut body: Vec<&str> = Vec::new();

        fn flush(sidecar: &mut TextSidecar, current: Option<(bool, usize)>, body: &mut Vec<&str>) -> Result<()> {
            if let Some((is_clip, i)) = current {
                let text = body.join("\n").trim_end().to_string();
                let map = if is_clip { &mut sidecar.clips } else { &mut sidecar.keyframes };
                if map.insert(i, text).is_some() {
                    let kind = if is_clip { "clip" } else { "keyframe" };
                    return Err(Error::MalformedInput(format!("duplicate [{kind} {i}] section")));
                }
            }
            body.clear();
            Ok(())
        }

        for (lineno, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if let Some(inner) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let (kind, idx) = inner
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| Error::MalformedInput(format!("line {}: bad header '{trimmed}'", lineno + 1)))?;
                let idx: usize = idx
                    .trim()
                    .parse()
                    .map_err(|_| Error::MalformedInput(format!("line {}: bad index in '{trimmed}'", lineno + 1)))?;
                let is_clip = match kind {
                    "clip" => true,
                    "keyframe" => false,
                    _ => return Err(Error::MalformedInput(format!("line {}: unknown section '{kind}'", lineno + 1))),
                };
                flush(&mut sidecar, current, &mut body)?;
                current = Some((is_clip, idx));
            } else if current.is_some() {
                if !(body.is_empty() && trimmed.is_empty()) {
                    body.push(line);
                }
            } else if !trimmed.is_empty() {
                return Err(Error::MalformedInput(format!("line {}: text before the first section", lineno + 1)));
            }
        }
        flush(&mut sidecar, current, &mut body)?;
        Ok(sidecar)
    }

    pub fn keyframe(&self, i: usize) -> Option<&str> {
        self.keyframes.get(&i).map(String::as_str)
    }

    pub fn clip(&self, j: usize) -> Option<&str> {
        self.clips.get(&j).map(String::as_str)
    }

    pub fn set_keyframe(&mut self, i: usize, text: impl Into<String>) {
        self.keyframes.insert(i, text.into());
    }

    pub fn set_clip(&mut self, j: usize, text: impl Into<String>) {
        self.clips.insert(j, text.into());
    }
}

#[derive(Debug, Clone)]
pub struct EncodeConfig {
    pub mode: Mode,
    pub n_keyframes: usize,
    pub strategy: Strategy,
    pub quality: QualityFactor,
    pub optimizer: Option<OptimizerConfig>,
    pub backend: BackendSpec,
    /// `None` is only accepted in IT2V mode, where every motion text is empty.
    pub text: Option<TextSidecar>,
    pub features: Option<FileFeatures>,
    pub seed: u64,
    /// Worker threads for per-clip work; 0 picks the machine default.
    pub jobs: usize,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            mode: Mode::ImageTextToVideo,
            n_keyframes: 2,
            strategy: Strategy::Cosine,
            quality: QualityFactor::default(),
            optimizer: None,
            backend: BackendSpec::Linear,
            text: None,
            features: None,
            seed: 0,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EncodeOutput {
    pub stream: Vec<u8>,
    pub keyframes: KeyframeSet,
    pub clips: Vec<ClipSpan>,
    pub breakdown: RateBreakdown,
    /// One entry per clip when the optimizer ran.
    pub optimized: Vec<Optimized>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StreamSummary {
    pub header: StreamHeader,
    pub clips: Vec<ClipSummary>,
    pub breakdown: RateBreakdown,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClipSummary {
    pub start: u16,
    pub end: u16,
    pub sections: Vec<(SectionTag, usize)>,
}

fn run_in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Maps `f` over `items`, in parallel with fresh backends for in-process
/// specs, sequentially through one shared instance for external ones.
fn map_with_backend<I: Sync, T: Send>(
    spec: &BackendSpec,
    items: &[I],
    f: impl Fn(&mut dyn Backend, usize, &I) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    if spec.is_in_process() {
        items
            .par_iter()
            .enumerate()
            .map(|(i, item)| {
                let mut backend = spec.instantiate()?;
                f(backend.as_mut(), i, item)
            })
            .collect()
    } else {
        if items.is_empty() {
            return Ok(Vec::new());
        }
        let mut backend = spec.instantiate()?;
        items.iter().enumerate().map(|(i, item)| f(backend.as_mut(), i, item)).collect()
    }
}

fn stream_header(video: &RawVideo, mode: Mode, clip_count: usize) -> Result<StreamHeader> {
    let g = video.geometry();
    let fr = video.frame_rate();
    let fit = |v: usize, what: &str| {
        u16::try_from(v).map_err(|_| Error::Config(format!("{what} {v} does not fit the stream header")))
    };
    Ok(StreamHeader {
        mode,
        width: fit(g.width, "width")?,
        height: fit(g.height, "height")?,
        planes: g.planes as u8,
        frame_count: fit(video.len(), "frame count")?,
        frame_rate_num: fit(fr.num as usize, "frame rate numerator")?,
        frame_rate_den: fit(fr.den as usize, "frame rate denominator")?,
        clip_count: fit(clip_count, "clip count")?,
    })
}

fn text_payload(text: &str) -> Result<Vec<u8>> {
    Ok(encode_text(&TextRepr::new(text)?))
}

pub fn encode(video: &RawVideo, cfg: &EncodeConfig) -> Result<Vec<u8>> {
    encode_detailed(video, cfg).map(|o| o.stream)
}

pub fn encode_detailed(video: &RawVideo, cfg: &EncodeConfig) -> Result<EncodeOutput> {
    if let Some(opt) = &cfg.optimizer {
        opt.validate()?;
    }
    run_in_pool(cfg.jobs, || encode_inner(video, cfg))?
}

fn encode_inner(video: &RawVideo, cfg: &EncodeConfig) -> Result<EncodeOutput> {
    let keyframes = match &cfg.features {
        Some(f) => select_keyframes_with(video, cfg.n_keyframes, cfg.strategy, cfg.seed, f)?,
        None => select_keyframes_with(video, cfg.n_keyframes, cfg.strategy, cfg.seed, &PooledLuma)?,
    };
    let spans = split_into_clips(video, &keyframes);
    let header = stream_header(video, cfg.mode, spans.len())?;

    let motion: Vec<String> = (0..spans.len())
        .map(|j| match &cfg.text {
            Some(s) => s
                .clip(j)
                .map(str::to_string)
                .ok_or_else(|| Error::Config(format!("text sidecar has no [clip {j}] section"))),
            None if cfg.mode == Mode::ImageTextToVideo => Ok(String::new()),
            None => Err(Error::Config("TT2V mode needs a text sidecar".into())),
        })
        .collect::<Result<_>>()?;

    let mut optimized = Vec::new();
    let clips: Vec<ClipRecord> = match cfg.mode {
        Mode::TextToVideo => {
            let sidecar = cfg.text.as_ref().expect("checked above");
            let kf_text = |i: usize| {
                sidecar
                    .keyframe(i)
                    .ok_or_else(|| Error::Config(format!("text sidecar has no [keyframe {i}] section")))
                    .and_then(text_payload)
            };
            spans
                .iter()
                .enumerate()
                .map(|(j, span)| {
                    let mut sections = vec![Section::new(SectionTag::KeyframeText, kf_text(j)?)];
                    if j + 1 == spans.len() {
                        sections.push(Section::new(SectionTag::KeyframeText, kf_text(j + 1)?));
                    }
                    sections.push(Section::new(SectionTag::MotionText, text_payload(&motion[j])?));
                    Ok(ClipRecord { start: span.start as u16, end: span.end as u16, sections })
                })
                .collect::<Result<_>>()?
        }
        Mode::ImageTextToVideo => {
            let images: Vec<Vec<u8>> = keyframes
                .indices()
                .par_iter()
                .map(|&i| encode_keyframe(video.frame(i), cfg.quality))
                .collect::<Result<_>>()?;

            let weights: Vec<Option<Optimized>> = match &cfg.optimizer {
                None => vec![None; spans.len()],
                Some(opt) => {
                    // Optimize against what the decoder will actually hold.
                    let decoded: Vec<Frame> =
                        images.par_iter().map(|p| decode_keyframe_as(p, video.geometry())).collect::<Result<_>>()?;
                    map_with_backend(&cfg.backend, &spans, |backend, j, span| {
                        let targets: Vec<_> = (span.start + 1..span.end).map(|i| video.frame(i).to_real()).collect();
                        let text = TextRepr::new(motion[j].as_str())?;
                        optimize_weights(backend, &decoded[j], &decoded[j + 1], &text, &targets, opt).map(Some)
                    })?
                }
            };

            let mut clips = Vec::with_capacity(spans.len());
            for (j, (span, fit)) in spans.iter().zip(weights).enumerate() {
                let mut sections = vec![Section::new(SectionTag::KeyframeImage, images[j].clone())];
                if j + 1 == spans.len() {
                    sections.push(Section::new(SectionTag::KeyframeImage, images[j + 1].clone()));
                }
                sections.push(Section::new(SectionTag::MotionText, text_payload(&motion[j])?));
                if let Some(fit) = fit {
                    sections.push(Section::new(SectionTag::Weights, encode_weights(&fit.weights)));
                    optimized.push(fit);
                }
                clips.push(ClipRecord { start: span.start as u16, end: span.end as u16, sections });
            }
            clips
        }
    };

    let stream = bitstream::mux(&header, &clips)?;
    let breakdown = bitstream::rate_breakdown(&header, &clips);
    Ok(EncodeOutput { stream, keyframes, clips: spans, breakdown, optimized })
}

/// Header, section sizes and rate breakdown of a stream, without decoding.
pub fn inspect(stream: &[u8]) -> Result<StreamSummary> {
    let (header, clips) = bitstream::demux(stream)?;
    let breakdown = bitstream::rate_breakdown(&header, &clips);
    Ok(StreamSummary {
        header,
        clips: clips
            .iter()
            .map(|c| ClipSummary {
                start: c.start,
                end: c.end,
                sections: c.sections.iter().map(|s| (s.tag, s.payload.len())).collect(),
            })
            .collect(),
        breakdown,
    })
}

/// Decoded content of one clip before generation.
struct ClipPlan {
    span: ClipSpan,
    motion: TextRepr,
    weights: WeightTrack,
}

pub fn decode(stream: &[u8], backend: &BackendSpec) -> Result<RawVideo> {
    decode_with_jobs(stream, backend, 0)
}

pub fn decode_with_jobs(stream: &[u8], backend: &BackendSpec, jobs: usize) -> Result<RawVideo> {
    run_in_pool(jobs, || decode_inner(stream, backend))?
}

fn decode_inner(stream: &[u8], backend: &BackendSpec) -> Result<RawVideo> {
    let (header, clips) = bitstream::demux(stream)?;
    let geometry = Geometry::new(header.width as usize, header.height as usize, header.planes as usize)
        .map_err(|e| Error::MalformedStream(e.to_string()))?;
    let frame_rate = FrameRate::new(header.frame_rate_num as u32, header.frame_rate_den as u32)
        .map_err(|e| Error::MalformedStream(e.to_string()))?;

    let plans: Vec<ClipPlan> = clips
        .iter()
        .map(|c| {
            let span = ClipSpan::new(c.start as usize, c.end as usize)?;
            let motion = decode_text(c.sections_tagged(SectionTag::MotionText).next().expect("validated"))?;
            let weights = match c.sections_tagged(SectionTag::Weights).next() {
                Some(p) => {
                    let w = decode_weights(p)?;
                    if w.len() != span.intermediate_count() {
                        return Err(Error::payload(format!(
                            "clip [{}, {}] carries {} weights for {} frames",
                            span.start,
                            span.end,
                            w.len(),
                            span.intermediate_count()
                        )));
                    }
                    w
                }
                None => WeightTrack::linear(span.intermediate_count()),
            };
            Ok(ClipPlan { span, motion, weights })
        })
        .collect::<Result<_>>()?;

    // Keyframe j opens clip j; the final keyframe closes the last clip.
    let key_payloads: Vec<&[u8]> = {
        let tag = match header.mode {
            Mode::ImageTextToVideo => SectionTag::KeyframeImage,
            Mode::TextToVideo => SectionTag::KeyframeText,
        };
        let mut v: Vec<&[u8]> = clips.iter().map(|c| c.sections_tagged(tag).next().expect("validated")).collect();
        v.push(clips.last().expect("validated").sections_tagged(tag).nth(1).expect("validated"));
        v
    };
    let key_positions: Vec<usize> =
        plans.iter().map(|p| p.span.start).chain(std::iter::once(plans.last().expect("validated").span.end)).collect();

    let (keyframes, key_texts): (Vec<Frame>, Vec<TextRepr>) = match header.mode {
        Mode::ImageTextToVideo => {
            let frames =
                key_payloads.par_iter().map(|p| decode_keyframe_as(p, geometry)).collect::<Result<Vec<_>>>()?;
            (frames, Vec::new())
        }
        Mode::TextToVideo => {
            let texts = key_payloads.iter().map(|p| decode_text(p)).collect::<Result<Vec<_>>>()?;
            let frames = texts
                .iter()
                .zip(&key_positions)
                .map(|(t, &pos)| placeholder_frame(geometry, t, &TextRepr::default(), pos))
                .collect();
            (frames, texts)
        }
    };

    let intermediates: Vec<Vec<Frame>> = if header.mode == Mode::TextToVideo && backend.is_in_process() {
        plans
            .par_iter()
            .enumerate()
            .map(|(j, p)| {
                (p.span.start + 1..p.span.end)
                    .map(|i| placeholder_frame(geometry, &key_texts[j], &p.motion, i))
                    .collect()
            })
            .collect()
    } else {
        map_with_backend(backend, &plans, |b, j, p| {
            let req = GenerationRequest::new(
                keyframes[j].clone(),
                keyframes[j + 1].clone(),
                p.motion.clone(),
                p.weights.clone(),
            )?;
            generate_clip(b, &req)
        })?
    };

    let mut frames = Vec::with_capacity(header.frame_count as usize);
    for (j, (plan, generated)) in plans.iter().zip(intermediates).enumerate() {
        frames.push(keyframes[j].clone());
        debug_assert_eq!(generated.len(), plan.span.intermediate_count());
        frames.extend(generated);
    }
    frames.push(keyframes.last().expect("at least two keyframes").clone());
    debug_assert_eq!(frames.len(), header.frame_count as usize);
    RawVideo::new(geometry, frame_rate, frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::psnr;
    use crate::synth::{blend_video, moving_pattern, noise_frame};

    fn video(frames: usize) -> RawVideo {
        moving_pattern(Geometry::new(32, 24, 1).unwrap(), frames, 3).unwrap()
    }

    fn section_counts(stream: &[u8]) -> BTreeMap<&'static str, usize> {
        let (_, clips) = bitstream::demux(stream).unwrap();
        let mut m = BTreeMap::new();
        for s in clips.iter().flat_map(|c| &c.sections) {
            let k = match s.tag {
                SectionTag::KeyframeImage => "KIMG",
                SectionTag::KeyframeText => "KTXT",
                SectionTag::MotionText => "MTXT",
                SectionTag::Weights => "WGTS",
            };
            *m.entry(k).or_insert(0) += 1;
        }
        m
    }

    #[test]
    fn sidecar_parsing() {
        let s = TextSidecar::parse(
            "\n[keyframe 0]\na red car\n\n[clip 0]\nthe car drives\noff to the right\n\n[keyframe 1]\n",
        )
        .unwrap();
        assert_eq!(s.keyframe(0), Some("a red car"));
        assert_eq!(s.clip(0), Some("the car drives\noff to the right"));
        assert_eq!(s.keyframe(1), Some(""));
        assert!(TextSidecar::parse("stray\n[clip 0]\nx").is_err());
        assert!(TextSidecar::parse("[scene 0]\nx").is_err());
        assert!(TextSidecar::parse("[clip 0]\nx\n[clip 0]\ny").is_err());
    }

    #[test]
    fn it2v_structure_without_optimizer() {
        let out = encode_detailed(&video(10), &EncodeConfig::default()).unwrap();
        let counts = section_counts(&out.stream);
        assert_eq!(counts.get("KIMG"), Some(&2));
        assert_eq!(counts.get("MTXT"), Some(&1));
        assert_eq!(counts.get("WGTS"), None);
        assert_eq!(out.breakdown.total_bits, 8 * out.stream.len() as u64);
    }

    #[test]
    fn it2v_structure_with_optimizer() {
        let cfg = EncodeConfig { optimizer: Some(OptimizerConfig::default()), ..Default::default() };
        let stream = encode(&video(10), &cfg).unwrap();
        assert_eq!(section_counts(&stream).get("WGTS"), Some(&1));
        let (_, clips) = bitstream::demux(&stream).unwrap();
        let w = decode_weights(clips[0].sections_tagged(SectionTag::Weights).next().unwrap()).unwrap();
        assert_eq!(w.len(), 8);
    }

    #[test]
    fn tt2v_structure_and_decode() {
        let mut text = TextSidecar::default();
        for i in 0..3 {
            text.set_keyframe(i, format!("keyframe {i}"));
        }
        text.set_clip(0, "moves left");
        text.set_clip(1, "moves right");
        let cfg = EncodeConfig { mode: Mode::TextToVideo, n_keyframes: 3, text: Some(text), ..Default::default() };
        let v = video(9);
        let stream = encode(&v, &cfg).unwrap();
        let counts = section_counts(&stream);
        assert_eq!(counts.get("KTXT"), Some(&3));
        assert_eq!(counts.get("MTXT"), Some(&2));
        assert_eq!(counts.get("KIMG"), None);

        for backend in [BackendSpec::Linear, BackendSpec::Latent { modulation: 0.0 }] {
            let d = decode(&stream, &backend).unwrap();
            assert_eq!(d.len(), 9);
            assert_eq!(d.geometry(), v.geometry());
            assert_eq!(d.frame_rate(), v.frame_rate());
        }
        assert_eq!(decode(&stream, &BackendSpec::Linear).unwrap(), decode(&stream, &BackendSpec::Linear).unwrap());
    }

    #[test]
    fn missing_text_is_a_config_error() {
        let tt = EncodeConfig { mode: Mode::TextToVideo, ..Default::default() };
        assert!(matches!(encode(&video(6), &tt), Err(Error::Config(_))));
        let mut partial = TextSidecar::default();
        partial.set_clip(0, "x");
        let it = EncodeConfig { n_keyframes: 3, text: Some(partial), ..Default::default() };
        assert!(matches!(encode(&video(6), &it), Err(Error::Config(_))));
    }

    #[test]
    fn it2v_round_trip_structure_and_keyframes() {
        let v = video(12);
        let cfg = EncodeConfig { n_keyframes: 4, ..Default::default() };
        let out = encode_detailed(&v, &cfg).unwrap();
        for backend in [BackendSpec::Linear, BackendSpec::Latent { modulation: 5.0 }] {
            let d = decode(&out.stream, &backend).unwrap();
            assert_eq!((d.len(), d.geometry(), d.frame_rate()), (v.len(), v.geometry(), v.frame_rate()));
            for &k in out.keyframes.indices() {
                let coded = encode_keyframe(v.frame(k), cfg.quality).unwrap();
                assert_eq!(d.frame(k), &crate::codec::decode_keyframe(&coded).unwrap());
            }
        }
    }

    #[test]
    fn optimizer_beats_linear_schedule_on_blend_videos() {
        let g = Geometry::new(24, 16, 1).unwrap();
        for seed in 0..4 {
            let l = noise_frame(g, seed, 0, 50);
            let r = noise_frame(g, seed + 50, 200, 255);
            let v = blend_video(&l, &r, 8, |t| (1.0 - t) * (1.0 - t)).unwrap();
            let plain = EncodeConfig { quality: QualityFactor::Q256, ..Default::default() };
            let tuned = EncodeConfig {
                optimizer: Some(OptimizerConfig { training_steps: 300, learning_rate: 0.01, ..Default::default() }),
                ..plain.clone()
            };
            let p0 = psnr(&decode(&encode(&v, &plain).unwrap(), &BackendSpec::Linear).unwrap(), &v).unwrap();
            let p1 = psnr(&decode(&encode(&v, &tuned).unwrap(), &BackendSpec::Linear).unwrap(), &v).unwrap();
            assert!(p1 >= p0, "seed {seed}: tuned {p1} < plain {p0}");
        }
    }

    #[test]
    fn job_count_does_not_change_output() {
        let v = video(14);
        let base = EncodeConfig {
            n_keyframes: 5,
            optimizer: Some(OptimizerConfig { training_steps: 5, ..Default::default() }),
            ..Default::default()
        };
        let one = encode(&v, &EncodeConfig { jobs: 1, ..base.clone() }).unwrap();
        let four = encode(&v, &EncodeConfig { jobs: 4, ..base }).unwrap();
        assert_eq!(one, four);
        assert_eq!(
            decode_with_jobs(&one, &BackendSpec::Linear, 1).unwrap(),
            decode_with_jobs(&one, &BackendSpec::Linear, 3).unwrap()
        );
    }

    #[test]
    fn stream_size_grows_with_keyframes_and_quality() {
        for seed in 0..5 {
            let v = moving_pattern(Geometry::new(32, 32, 1).unwrap(), 12, seed).unwrap();
            let size = |n: usize, q: QualityFactor| {
                encode(&v, &EncodeConfig { n_keyframes: n, quality: q, ..Default::default() }).unwrap().len()
            };
            for q in QualityFactor::ALL {
                assert!(size(2, q) <= size(3, q) && size(3, q) <= size(4, q));
            }
            for n in 2..=4 {
                assert!(size(n, QualityFactor::Q64) <= size(n, QualityFactor::Q128));
                assert!(size(n, QualityFactor::Q128) <= size(n, QualityFactor::Q256));
            }
        }
    }

    #[test]
    fn inspect_reports_sections() {
        let stream = encode(&video(6), &EncodeConfig::default()).unwrap();
        let s = inspect(&stream).unwrap();
        assert_eq!(s.clips.len(), 1);
        assert_eq!(s.breakdown.total_bits, 8 * stream.len() as u64);
    }
}
