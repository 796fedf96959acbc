//! Keyframe selection.
//!
//! The first and last frames are always keyframes. For `n > 2` the interior
//! range `[1, N-2]` is cut into `n-2` contiguous intervals and one keyframe is
//! picked inside each, left to right. The cosine strategy keeps an anchor
//! feature (initially frame 0) and picks the frame least similar to it, then
//! moves the anchor to the pick.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClipSpan, Frame, RawVideo};
use crate::rng::SplitMix64;

/// Side of the pooling grid used by the built-in embedding.
pub const GRID: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::contract("feature vector must have at least one component"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("feature vector has non-finite entries"));
        }
        Ok(FeatureVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Cosine,
    Mse,
    Uniform,
    Random,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Cosine => "cosine",
            Strategy::Mse => "mse",
            Strategy::Uniform => "uniform",
            Strategy::Random => "random",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" | "cs" => Ok(Strategy::Cosine),
            "mse" => Ok(Strategy::Mse),
            "uniform" => Ok(Strategy::Uniform),
            "random" => Ok(Strategy::Random),
            _ => Err(Error::Config(format!("unknown keyframe strategy '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeyframeSet {
    indices: Vec<usize>,
    strategy: Strategy,
}

impl KeyframeSet {
    /// Validates `indices` against a video of `frame_count` frames.
    pub fn new(indices: Vec<usize>, strategy: Strategy, frame_count: usize) -> Result<Self> {
        let n = indices.len();
        if n < 2 || n > frame_count {
            return Err(Error::contract(format!("{n} keyframes for {frame_count} frames")));
        }
        if indices[0] != 0 || indices[n - 1] != frame_count - 1 {
            return Err(Error::contract("keyframes must include the first and last frame"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("keyframe indices must be strictly increasing"));
        }
        Ok(KeyframeSet { indices, strategy })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Source of per-frame features for the cosine strategy.
pub trait EmbeddingProvider: Sync {
    fn embed(&self, index: usize, frame: &Frame) -> Result<FeatureVector>;
}

/// Pooled-luma embedding: 16x16 area-weighted average of the first plane,
/// mean-removed and L2-normalized.
#[derive(Debug, Clone, Copy, Default)]
pub struct PooledLuma;

impl EmbeddingProvider for PooledLuma {
    fn embed(&self, _index: usize, frame: &Frame) -> Result<FeatureVector> {
        Ok(embed_frame(frame))
    }
}

/// Features loaded from a sidecar file, one line per frame.
#[derive(Debug, Clone)]
pub struct FileFeatures {
    rows: Vec<FeatureVector>,
}

impl FileFeatures {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let values = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::MalformedInput(format!("feature line {}: {e}", lineno + 1)))?;
            rows.push(FeatureVector::new(values)?);
        }
        if let Some(first) = rows.first() {
            let m = first.dim();
            if rows.iter().any(|r| r.dim() != m) {
                return Err(Error::MalformedInput("feature rows have differing dimensions".into()));
            }
        }
        Ok(FileFeatures { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl EmbeddingProvider for FileFeatures {
    fn embed(&self, index: usize, _frame: &Frame) -> Result<FeatureVector> {
        self.rows
            .get(index)
            .cloned()
            .ok_or_else(|| Error::MalformedInput(format!("feature file has no row for frame {index}")))
    }
}

/// Overlap of pixel `[i, i+1)` with each of `GRID` equal cells spanning
/// `[0, len)`; returned as `(cell, pixel, weight)` triples.
fn axis_weights(len: usize) -> Vec<(usize, usize, f64)> {
    let cell = len as f64 / GRID as f64;
    let mut out = Vec::new();
    for g in 0..GRID {
        let lo = g as f64 * cell;
        let hi = lo + cell;
        let first = lo.floor() as usize;
        let last = (hi.ceil() as usize).min(len);
        for i in first..last {
            let w = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
            if w > 0.0 {
                out.push((g, i, w));
            }
        }
    }
    out
}

/// Built-in frame embedding. A constant frame maps to `(1, 0, ..., 0)`.
pub fn embed_frame(frame: &Frame) -> FeatureVector {
    let (w, h) = (frame.width(), frame.height());
    let luma = frame.plane(0);
    let xs = axis_weights(w);
    let ys = axis_weights(h);
    let cell_area = (w as f64 / GRID as f64) * (h as f64 / GRID as f64);

    // Pool rows first, then columns.
    let mut rows = vec![0.0f64; GRID * w];
    for &(gy, y, wy) in &ys {
        let src = &luma[y * w..(y + 1) * w];
        let dst = &mut rows[gy * w..(gy + 1) * w];
        for (d, &s) in dst.iter_mut().zip(src) {
            *d += wy * s as f64;
        }
    }
    let mut grid = vec![0.0f64; GRID * GRID];
    for gy in 0..GRID {
        for &(gx, x, wx) in &xs {
            grid[gy * GRID + gx] += wx * rows[gy * w + x];
        }
    }
    for v in &mut grid {
        *v /= cell_area;
    }

    let mean = grid.iter().sum::<f64>() / grid.len() as f64;
    for v in &mut grid {
        *v -= mean;
    }
    let norm = grid.iter().map(|v| v * v).sum::<f64>().sqrt();
    // Pooled values are multiples of 1/(cell area) and at most 255, so real
    // contrast never leaves a norm this small.
    if norm < 1e-9 {
        let mut unit = vec![0.0; grid.len()];
        unit[0] = 1.0;
        return FeatureVector(unit);
    }
    for v in &mut grid {
        *v /= norm;
    }
    FeatureVector(grid)
}

/// `sum(a*b) / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::contract(format!("feature dimension mismatch: {} vs {}", a.dim(), b.dim())));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::contract("cosine similarity of a zero vector"));
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Interior intervals `[lo, hi]` (inclusive) for `n` keyframes over `n_frames`.
pub fn interior_intervals(n_frames: usize, n: usize) -> Vec<(usize, usize)> {
    if n <= 2 {
        return Vec::new();
    }
    let inner = n_frames - 2;
    let parts = n - 2;
    (0..parts).map(|b| (1 + b * inner / parts, (b + 1) * inner / parts)).collect()
}

fn mean_squared_distance(a: &Frame, b: &Frame) -> f64 {
    let sum: u64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    sum as f64 / a.samples().len() as f64
}

/// Index of the lowest score; ties resolve to the lowest index.
fn argmin_by_score(range: (usize, usize), score: impl Fn(usize) -> Result<f64> + Sync) -> Result<usize> {
    let scores = (range.0..=range.1).into_par_iter().map(|i| score(i).map(|s| (i, s))).collect::<Result<Vec<_>>>()?;
    let mut best = scores[0];
    for &(i, s) in &scores[1..] {
        if s < best.1 {
            best = (i, s);
        }
    }
    Ok(best.0)
}

pub fn select_keyframes(video: &RawVideo, n: usize, strategy: Strategy, seed: u64) -> Result<KeyframeSet> {
    select_keyframes_with(video, n, strategy, seed, &PooledLuma)
}

/// Keyframe selection with an explicit embedding provider (cosine only).
pub fn select_keyframes_with(
    video: &RawVideo,
    n: usize,
    strategy: Strategy,
    seed: u64,
    provider: &dyn EmbeddingProvider,
) -> Result<KeyframeSet> {
    let count = video.len();
    if n < 2 || n > count {
        return Err(Error::contract(format!("keyframe count {n} outside [2, {count}]")));
    }
    let intervals = interior_intervals(count, n);
    let mut indices = Vec::with_capacity(n);
    indices.push(0);

    match strategy {
        Strategy::Cosine => {
            let mut anchor = provider.embed(0, video.frame(0))?;
            for &range in &intervals {
                let feats = (range.0..=range.1)
                    .into_par_iter()
                    .map(|i| provider.embed(i, video.frame(i)))
                    .collect::<Result<Vec<_>>>()?;
                let pick = argmin_by_score(range, |i| cosine_similarity(&anchor, &feats[i - range.0]))?;
                anchor = feats[pick - range.0].clone();
                indices.push(pick);
            }
        }
        Strategy::Mse => {
            let mut anchor = 0;
            for &range in &intervals {
                let pick = argmin_by_score(range, |i| Ok(-mean_squared_distance(video.frame(anchor), video.frame(i))))?;
                anchor = pick;
                indices.push(pick);
            }
        }
        Strategy::Uniform => {
            indices.extend(intervals.iter().map(|&(lo, hi)| lo + (hi - lo) / 2));
        }
        Strategy::Random => {
            let mut rng = SplitMix64::new(seed);
            indices.extend(intervals.iter().map(|&(lo, hi)| lo + rng.below((hi - lo + 1) as u64) as usize));
        }
    }

    indices.push(count - 1);
    KeyframeSet::new(indices, strategy, count)
}

/// `n-1` spans between consecutive keyframes.
pub fn split_into_clips(video: &RawVideo, keyframes: &KeyframeSet) -> Vec<ClipSpan> {
    debug_assert_eq!(*keyframes.indices().last().unwrap(), video.len() - 1);
    keyframes.indices().windows(2).map(|w| ClipSpan { start: w[0], end: w[1] }).collect()
}
