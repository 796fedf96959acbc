//! Distortion metrics, rate-distortion curves and Bjøntegaard delta rate.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{compute_bpp, RawVideo};

/// Serializes an infinite PSNR as the string `"inf"`.
pub fn serialize_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

/// Formats a dB value, printing `inf` for identical inputs.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".into()
    } else {
        format!("{v}")
    }
}

pub fn mse(a: &RawVideo, b: &RawVideo) -> Result<f64> {
    a.check_same_shape(b)?;
    let mut sum = 0u64;
    let mut count = 0u64;
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        for (&x, &y) in fa.samples().iter().zip(fb.samples()) {
            let d = x as i64 - y as i64;
            sum += (d * d) as u64;
        }
        count += fa.samples().len() as u64;
    }
    Ok(sum as f64 / count as f64)
}

/// `10 log10(255^2 / MSE)` over every sample of every frame; `+inf` when
/// the videos are identical.
pub fn psnr(a: &RawVideo, b: &RawVideo) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0f64 * 255.0 / m).log10())
}

/// Mean over consecutive frame pairs of the mean absolute sample difference.
pub fn temporal_flicker(v: &RawVideo) -> f64 {
    let pairs = v.frames().windows(2);
    let n = pairs.len();
    let total: f64 = pairs
        .map(|w| {
            let sum: u64 =
                w[0].samples().iter().zip(w[1].samples()).map(|(&a, &b)| (a as i64 - b as i64).unsigned_abs()).sum();
            sum as f64 / w[0].samples().len() as f64
        })
        .sum();
    total / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Psnr,
    Mse,
    Flicker,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Psnr => "psnr",
            Metric::Mse => "mse",
            Metric::Flicker => "flicker",
        }
    }

    pub fn higher_better(self) -> bool {
        matches!(self, Metric::Psnr)
    }

    pub fn evaluate(self, decoded: &RawVideo, reference: &RawVideo) -> Result<f64> {
        match self {
            Metric::Psnr => psnr(decoded, reference),
            Metric::Mse => mse(decoded, reference),
            Metric::Flicker => {
                decoded.check_same_shape(reference)?;
                Ok(temporal_flicker(decoded))
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "psnr" => Ok(Metric::Psnr),
            "mse" => Ok(Metric::Mse),
            "flicker" => Ok(Metric::Flicker),
            _ => Err(Error::Config(format!("unknown metric '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdPoint {
    pub rate: f64,
    #[serde(serialize_with = "serialize_db")]
    pub distortion: f64,
    pub metric_name: String,
    pub higher_better: bool,
}

impl RdPoint {
    pub fn new(rate: f64, distortion: f64, metric_name: impl Into<String>, higher_better: bool) -> Self {
        RdPoint { rate, distortion, metric_name: metric_name.into(), higher_better }
    }
}

/// At least two points of one metric, strictly increasing in rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdCurve {
    points: Vec<RdPoint>,
}

impl RdCurve {
    /// Sorts by rate and validates.
    pub fn new(mut points: Vec<RdPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::contract(format!("a curve needs at least 2 points, got {}", points.len())));
        }
        if let Some(p) = points.iter().find(|p| !(p.rate > 0.0 && p.rate.is_finite()) || !p.distortion.is_finite()) {
            return Err(Error::contract(format!("invalid point (rate {}, distortion {})", p.rate, p.distortion)));
        }
        let metric = points[0].metric_name.clone();
        if points.iter().any(|p| p.metric_name != metric) {
            return Err(Error::contract("curve mixes metrics"));
        }
        points.sort_by(|a, b| a.rate.total_cmp(&b.rate));
        if points.windows(2).any(|w| w[0].rate == w[1].rate) {
            return Err(Error::contract("duplicate rates in curve"));
        }
        Ok(RdCurve { points })
    }

    /// Curve of `(rate, distortion)` pairs under one metric name.
    pub fn from_pairs(pairs: &[(f64, f64)], metric_name: &str, higher_better: bool) -> Result<Self> {
        RdCurve::new(pairs.iter().map(|&(r, d)| RdPoint::new(r, d, metric_name, higher_better)).collect())
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn is_strictly_monotone(&self) -> bool {
        let inc = self.points.windows(2).all(|w| w[1].distortion > w[0].distortion);
        let dec = self.points.windows(2).all(|w| w[1].distortion < w[0].distortion);
        inc || dec
    }

    /// Reads a `rate_bpp,distortion` CSV.
    pub fn read_csv(reader: impl Read, metric_name: &str, higher_better: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(csv_err)?.clone();
        if headers.len() < 2 || &headers[0] != "rate_bpp" || &headers[1] != "distortion" {
            return Err(Error::MalformedInput(format!(
                "curve CSV header must be 'rate_bpp,distortion', got '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut pairs = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::MalformedInput(format!("bad curve row {:?}", rec)))
            };
            pairs.push((num(0)?, num(1)?));
        }
        RdCurve::from_pairs(&pairs, metric_name, higher_better)
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "rate_bpp,distortion")?;
        for p in &self.points {
            writeln!(out, "{},{}", p.rate, p.distortion)?;
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::MalformedInput(format!("csv: {e}"))
}

/// Least-squares polynomial `log10(rate) = p(distortion)` in a normalized
/// variable `x = (d - center) / scale` to keep the Vandermonde system well
/// conditioned.
struct LogRateFit {
    coeffs: Vec<f64>,
    center: f64,
    scale: f64,
}

impl LogRateFit {
    fn new(curve: &RdCurve) -> Result<Self> {
        let n = curve.len();
        let degree = 3.min(n - 1);
        let ds: Vec<f64> = curve.points.iter().map(|p| p.distortion).collect();
        let (lo, hi) = ds.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
        let center = (lo + hi) / 2.0;
        let scale = ((hi - lo) / 2.0).max(f64::MIN_POSITIVE);
        let a = DMatrix::from_fn(n, degree + 1, |i, j| ((ds[i] - center) / scale).powi(j as i32));
        let b = DVector::from_iterator(n, curve.points.iter().map(|p| p.rate.log10()));
        let svd = a.svd(true, true);
        let sol = svd.solve(&b, 1e-12).map_err(|e| Error::NumericalFailure(format!("polynomial fit: {e}")))?;
        Ok(LogRateFit { coeffs: sol.iter().copied().collect(), center, scale })
    }

    /// `integral of p(d) dd` over `[lo, hi]`, via the antiderivative.
    fn integral(&self, lo: f64, hi: f64) -> f64 {
        let anti = |d: f64| {
            let x = (d - self.center) / self.scale;
            self.coeffs.iter().enumerate().map(|(k, c)| c * x.powi(k as i32 + 1) / (k + 1) as f64).sum::<f64>()
        };
        self.scale * (anti(hi) - anti(lo))
    }
}

/// Bjøntegaard delta rate of `test` against `anchor`, in percent.
///
/// Each curve is fitted with `log10(rate)` as a polynomial in distortion of
/// degree `min(3, points - 1)`; both fits are integrated over the common
/// distortion range and the mean log-rate gap is converted to a percentage.
/// Negative means the test codec needs fewer bits for the same quality.
pub fn bd_rate(anchor: &RdCurve, test: &RdCurve) -> Result<f64> {
    for (name, c) in [("anchor", anchor), ("test", test)] {
        if c.len() < 3 {
            return Err(Error::contract(format!("{name} curve has {} points, BD-Rate needs 3", c.len())));
        }
        if !c.is_strictly_monotone() {
            return Err(Error::contract(format!("{name} curve distortion is not monotone in rate")));
        }
    }
    let range = |c: &RdCurve| {
        c.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.distortion), b.max(p.distortion)))
    };
    let (a_lo, a_hi) = range(anchor);
    let (t_lo, t_hi) = range(test);
    let lo = a_lo.max(t_lo);
    let hi = a_hi.min(t_hi);
    if hi <= lo {
        return Err(Error::NoOverlap);
    }
    let fa = LogRateFit::new(anchor)?;
    let ft = LogRateFit::new(test)?;
    let mean_gap = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
    Ok((10f64.powf(mean_gap) - 1.0) * 100.0)
}

/// `video_id,metric_name,value` rows for metrics computed elsewhere.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricTable {
    values: BTreeMap<(String, String), f64>,
}

impl MetricTable {
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr =
            csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).flexible(true).from_reader(reader);
        let mut values = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != 3 {
                return Err(Error::MalformedInput(format!("metric row {} has {} fields", i + 1, rec.len())));
            }
            let parsed = rec[2].parse::<f64>();
            match parsed {
                Ok(v) => {
                    values.insert((rec[0].to_string(), rec[1].to_string()), v);
                }
                // A header line is tolerated in the first row.
                Err(_) if i == 0 => {}
                Err(_) => {
                    return Err(Error::MalformedInput(format!("metric row {}: bad value '{}'", i + 1, &rec[2])));
                }
            }
        }
        Ok(MetricTable { values })
    }

    pub fn get(&self, video_id: &str, metric: &str) -> Option<f64> {
        self.values.get(&(video_id.to_string(), metric.to_string())).copied()
    }

    pub fn insert(&mut self, video_id: &str, metric: &str, value: f64) {
        self.values.insert((video_id.to_string(), metric.to_string()), value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One encoded operating point, as consumed by [`assemble_curve`].
pub struct RdRun<'a> {
    pub stream: &'a [u8],
    pub decoded: &'a RawVideo,
    pub reference: &'a RawVideo,
}

fn check_runs(count: usize) -> Result<()> {
    if count < 2 {
        return Err(Error::contract(format!("a curve needs at least 2 runs, got {count}")));
    }
    Ok(())
}

pub fn assemble_curve(runs: &[RdRun<'_>], metric: Metric) -> Result<RdCurve> {
    check_runs(runs.len())?;
    let geometry = runs[0].reference.geometry();
    let points = runs
        .iter()
        .map(|r| {
            if r.reference.geometry() != geometry {
                return Err(Error::contract("runs use references of different geometry"));
            }
            let rate = compute_bpp(8 * r.stream.len() as u64, r.reference);
            let d = metric.evaluate(r.decoded, r.reference)?;
            Ok(RdPoint::new(rate, d, metric.name(), metric.higher_better()))
        })
        .collect::<Result<Vec<_>>>()?;
    RdCurve::new(points)
}

/// Curve whose distortions come verbatim from an external metric table.
/// Each run is `(video_id, stream length in bytes, reference video)`.
pub fn assemble_curve_external(
    runs: &[(&str, usize, &RawVideo)],
    table: &MetricTable,
    metric_name: &str,
    higher_better: bool,
) -> Result<RdCurve> {
    check_runs(runs.len())?;
    let points = runs
        .iter()
        .map(|&(id, len, reference)| {
            let d = table
                .get(id, metric_name)
                .ok_or_else(|| Error::MalformedInput(format!("no '{metric_name}' value for video '{id}'")))?;
            Ok(RdPoint::new(compute_bpp(8 * len as u64, reference), d, metric_name, higher_better))
        })
        .collect::<Result<Vec<_>>>()?;
    RdCurve::new(points)
}

/// BD-Rate of every curve against every other; `None` where undefined.
#[derive(Debug, Clone, Serialize)]
pub struct BdRateMatrix {
    pub names: Vec<String>,
    /// `values[anchor][test]`.
    pub values: Vec<Vec<Option<f64>>>,
}

impl BdRateMatrix {
    pub fn compute(curves: &[(String, RdCurve)]) -> Self {
        let values = curves.iter().map(|(_, a)| curves.iter().map(|(_, t)| bd_rate(a, t).ok()).collect()).collect();
        BdRateMatrix { names: curves.iter().map(|(n, _)| n.clone()).collect(), values }
    }
}
