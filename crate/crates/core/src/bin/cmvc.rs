use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use cmvc::backend::external::{serve, ServeMode};
use cmvc::backend::BackendSpec;
use cmvc::bitstream::{Mode, RateBreakdown};
use cmvc::codec::QualityFactor;
use cmvc::eval::{
    assemble_curve, assemble_curve_external, bd_rate, psnr, serialize_db, temporal_flicker, Metric, MetricTable,
    RdCurve, RdPoint, RdRun,
};
use cmvc::keyframe::{select_keyframes_with, FileFeatures, PooledLuma, Strategy};
use cmvc::model::{compute_bpp, write_raw_video, Geometry};
use cmvc::optimize::OptimizerConfig;
use cmvc::pipeline::{decode_with_jobs, encode_detailed, inspect, EncodeConfig, TextSidecar};
use cmvc::synth::{bundled_sample, moving_pattern};
use cmvc::{Error, FrameRate, RawVideo};

#[derive(Parser)]
#[command(name = "cmvc", version, about = "Cross-modal video codec: keyframes + text + generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a raw video into a .cmvc stream.
    Encode(EncodeCmd),
    /// Decode a .cmvc stream back to raw video.
    Decode(DecodeCmd),
    /// Print the selected keyframe indices.
    Keyframes(KeyframesCmd),
    /// Score decoded videos against a reference; optionally build an R-D curve.
    Evaluate(EvaluateCmd),
    /// BD-Rate of a test curve against an anchor curve.
    Bdrate(BdrateCmd),
    /// Encode, decode and evaluate in one go; reports one R-D point.
    Roundtrip(RoundtripCmd),
    /// Print the structure of a .cmvc stream.
    Inspect(InspectCmd),
    /// Write a synthetic test video.
    Synth(SynthCmd),
    /// Run the external-backend protocol on stdin/stdout.
    #[command(hide = true)]
    ServeBackend(ServeCmd),
}

#[derive(Args, Clone)]
struct VideoArgs {
    /// Raw planar 8-bit video file.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, default_value_t = 1)]
    planes: usize,
    /// Frame rate, `30` or `30000/1001`.
    #[arg(long, default_value = "30")]
    fps: FrameRate,
}

#[derive(Args, Clone)]
struct SelectArgs {
    #[arg(long = "keyframes", default_value_t = 2)]
    keyframes: usize,
    #[arg(long, default_value = "cosine")]
    strategy: Strategy,
    /// Per-frame feature vectors (one line of floats per frame) replacing the built-in embedding.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct CodecArgs {
    #[command(flatten)]
    select: SelectArgs,
    /// IT2V or TT2V.
    #[arg(long, default_value = "IT2V")]
    mode: Mode,
    /// Keyframe quality factor: 64, 128 or 256.
    #[arg(long, default_value = "128")]
    quality: QualityFactor,
    /// linear, latent[:modulation] or external:<command>.
    #[arg(long, default_value = "linear")]
    backend: BackendSpec,
    /// Fit per-frame generation weights and transmit them.
    #[arg(long)]
    optimize: bool,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    /// Text sidecar with `[keyframe i]` and `[clip j]` sections.
    #[arg(long)]
    text: Option<PathBuf>,
    /// Worker threads for per-clip work (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct EncodeCmd {
    #[command(flatten)]
    video: VideoArgs,
    #[command(flatten)]
    codec: CodecArgs,
    /// Output stream path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    report: ReportFormat,
}

#[derive(Args)]
struct DecodeCmd {
    /// Input .cmvc stream.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "linear")]
    backend: BackendSpec,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output raw video path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KeyframesCmd {
    #[command(flatten)]
    video: VideoArgs,
    #[command(flatten)]
    select: SelectArgs,
    /// Also write a JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateCmd {
    /// Reference raw video; geometry flags describe it and the decoded videos.
    #[command(flatten)]
    video: VideoArgs,
    /// Decoded raw video, repeatable.
    #[arg(long, required = true)]
    decoded: Vec<PathBuf>,
    /// Stream for each decoded video, in the same order; enables rates.
    #[arg(long)]
    stream: Vec<PathBuf>,
    /// Distortion metric for the curve: psnr, mse or flicker.
    #[arg(long, default_value = "psnr")]
    metric: Metric,
    /// External metric table (`video_id,metric_name,value`) supplying the curve's distortions.
    #[arg(long)]
    metric_table: Option<PathBuf>,
    /// Table key of each decoded video, in order.
    #[arg(long)]
    video_id: Vec<String>,
    /// Metric name to read from the table.
    #[arg(long)]
    table_metric: Option<String>,
    /// The table metric improves as it decreases.
    #[arg(long)]
    lower_better: bool,
    /// Write the R-D curve as `rate_bpp,distortion` CSV.
    #[arg(long)]
    curve_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    report: ReportFormat,
}

#[derive(Args)]
struct BdrateCmd {
    /// Anchor curve CSV (`rate_bpp,distortion`).
    #[arg(long)]
    anchor: PathBuf,
    /// Test curve CSV.
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "psnr")]
    metric_name: String,
    /// Distortion improves as it decreases (e.g. DISTS, MSE).
    #[arg(long)]
    lower_better: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RoundtripCmd {
    /// Defaults to the bundled 64x48, 16-frame sample when `--input` is absent.
    #[command(flatten)]
    video: VideoArgs,
    #[command(flatten)]
    codec: CodecArgs,
    #[arg(long)]
    stream_out: Option<PathBuf>,
    #[arg(long)]
    decoded_out: Option<PathBuf>,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    report: ReportFormat,
}

#[derive(Args)]
struct InspectCmd {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthCmd {
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 48)]
    height: usize,
    #[arg(long, default_value_t = 1)]
    planes: usize,
    #[arg(long, default_value_t = 16)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ServeModeArg {
    Blend,
    NoiseText,
}

#[derive(Args)]
struct ServeCmd {
    #[arg(long, value_enum, default_value = "blend")]
    mode: ServeModeArg,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) => 2,
            e if e.is_backend() => 4,
            _ => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 3, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type CmdResult<T = ()> = std::result::Result<T, Failure>;

/// Tracks what a command read and wrote, for the run manifest.
struct Run {
    command: &'static str,
    started: Instant,
    seed: Option<u64>,
    inputs: Vec<(String, String)>,
    outputs: Vec<(String, String)>,
}

impl Run {
    fn new(command: &'static str) -> Self {
        Run { command, started: Instant::now(), seed: None, inputs: Vec::new(), outputs: Vec::new() }
    }

    fn read(&mut self, path: &Path) -> CmdResult<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| Failure { code: 3, message: format!("{}: {e}", path.display()) })?;
        self.inputs.push((path.display().to_string(), hex::encode(Sha256::digest(&bytes))));
        Ok(bytes)
    }

    fn write(&mut self, path: &Path, bytes: &[u8]) -> CmdResult {
        fs::write(path, bytes).map_err(|e| Failure { code: 3, message: format!("{}: {e}", path.display()) })?;
        self.outputs.push((path.display().to_string(), hex::encode(Sha256::digest(bytes))));
        Ok(())
    }

    /// Writes `<out>.manifest.json` next to the primary output.
    fn finish(self, out: Option<&Path>) -> CmdResult {
        let Some(out) = out else { return Ok(()) };
        let entries = |v: &[(String, String)]| -> Vec<Value> {
            v.iter().map(|(p, h)| json!({ "path": p, "sha256": h })).collect()
        };
        let manifest = json!({
            "tool": "cmvc",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": std::env::args().skip(1).collect::<Vec<_>>(),
            "seed": self.seed,
            "inputs": entries(&self.inputs),
            "outputs": entries(&self.outputs),
            "timings": { "wall_seconds": self.started.elapsed().as_secs_f64() },
        });
        let mut path = out.as_os_str().to_owned();
        path.push(".manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest).expect("json") + "\n")?;
        Ok(())
    }
}

impl VideoArgs {
    fn geometry(&self) -> CmdResult<Geometry> {
        let (Some(w), Some(h)) = (self.width, self.height) else {
            return Err(usage("--width and --height are required with --input"));
        };
        Ok(Geometry::new(w, h, self.planes)?)
    }

    fn load(&self, run: &mut Run) -> CmdResult<RawVideo> {
        let path = self.input.as_ref().ok_or_else(|| usage("--input is required"))?;
        self.load_path(path, run)
    }

    fn load_path(&self, path: &Path, run: &mut Run) -> CmdResult<RawVideo> {
        let bytes = run.read(path)?;
        Ok(RawVideo::from_bytes(&bytes, self.geometry()?, self.fps)?)
    }
}

impl SelectArgs {
    fn features(&self, run: &mut Run) -> CmdResult<Option<FileFeatures>> {
        match &self.features {
            Some(p) => {
                let text = String::from_utf8(run.read(p)?)
                    .map_err(|_| Failure { code: 3, message: format!("{}: not UTF-8", p.display()) })?;
                Ok(Some(FileFeatures::parse(&text)?))
            }
            None => Ok(None),
        }
    }
}

impl CodecArgs {
    fn config(&self, run: &mut Run) -> CmdResult<EncodeConfig> {
        run.seed = Some(self.select.seed);
        let text = match &self.text {
            Some(p) => {
                let raw = String::from_utf8(run.read(p)?)
                    .map_err(|_| Failure { code: 3, message: format!("{}: not UTF-8", p.display()) })?;
                Some(TextSidecar::parse(&raw)?)
            }
            None => None,
        };
        let optimizer = self.optimize.then(|| OptimizerConfig {
            learning_rate: self.alpha,
            training_steps: self.steps,
            ..OptimizerConfig::default()
        });
        Ok(EncodeConfig {
            mode: self.mode,
            n_keyframes: self.select.keyframes,
            strategy: self.select.strategy,
            quality: self.quality,
            optimizer,
            backend: self.backend.clone(),
            text,
            features: self.select.features(run)?,
            seed: self.select.seed,
            jobs: self.jobs,
        })
    }
}

/// Flattens a JSON report into `key,value` rows with dotted keys.
fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, rows)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, rows)),
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        Value::Null => rows.push((prefix.to_string(), String::new())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

fn render_report(report: &impl Serialize, format: ReportFormat) -> Vec<u8> {
    let value = serde_json::to_value(report).expect("reports serialize");
    match format {
        ReportFormat::Json => (serde_json::to_string_pretty(&value).expect("json") + "\n").into_bytes(),
        ReportFormat::Csv => {
            let mut rows = Vec::new();
            flatten("", &value, &mut rows);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["key", "value"]).expect("in-memory write");
            for (k, v) in rows {
                w.write_record([k, v]).expect("in-memory write");
            }
            w.into_inner().expect("in-memory flush")
        }
    }
}

fn emit(run: &mut Run, out: Option<&Path>, bytes: &[u8]) -> CmdResult {
    match out {
        Some(p) => run.write(p, bytes),
        None => Ok(io::stdout().write_all(bytes)?),
    }
}

#[derive(Serialize)]
struct ClipReport {
    start: usize,
    end: usize,
    /// Loss of the fitted weights, when the optimizer ran.
    final_loss: Option<f64>,
}

#[derive(Serialize)]
struct EncodeReport {
    mode: String,
    frames: usize,
    keyframes: Vec<usize>,
    clips: Vec<ClipReport>,
    stream_bytes: usize,
    bpp: f64,
    breakdown: RateBreakdown,
}

fn encode_report(video: &RawVideo, cfg: &EncodeConfig) -> CmdResult<(Vec<u8>, EncodeReport)> {
    let out = encode_detailed(video, cfg)?;
    let final_loss = |j: usize| -> Option<f64> {
        let fit = out.optimized.get(j)?;
        let last: Vec<f64> = fit.fits.iter().filter_map(|f| f.losses.last().copied()).collect();
        (!last.is_empty()).then(|| last.iter().sum::<f64>() / last.len() as f64)
    };
    let report = EncodeReport {
        mode: cfg.mode.to_string(),
        frames: video.len(),
        keyframes: out.keyframes.indices().to_vec(),
        clips: out
            .clips
            .iter()
            .enumerate()
            .map(|(j, c)| ClipReport { start: c.start, end: c.end, final_loss: final_loss(j) })
            .collect(),
        stream_bytes: out.stream.len(),
        bpp: compute_bpp(out.breakdown.total_bits, video),
        breakdown: out.breakdown,
    };
    Ok((out.stream, report))
}

fn cmd_encode(c: EncodeCmd) -> CmdResult {
    let mut run = Run::new("encode");
    let video = c.video.load(&mut run)?;
    let cfg = c.codec.config(&mut run)?;
    let (stream, report) = encode_report(&video, &cfg)?;
    run.write(&c.out, &stream)?;
    let mut report_path = c.out.as_os_str().to_owned();
    report_path.push(match c.report {
        ReportFormat::Json => ".report.json",
        ReportFormat::Csv => ".report.csv",
    });
    run.write(Path::new(&report_path), &render_report(&report, c.report))?;
    run.finish(Some(&c.out))
}

fn cmd_decode(c: DecodeCmd) -> CmdResult {
    let mut run = Run::new("decode");
    let stream = run.read(&c.input)?;
    let video = decode_with_jobs(&stream, &c.backend, c.jobs)?;
    run.write(&c.out, &video.to_bytes())?;
    eprintln!("decoded {} frames of {}x{}x{}", video.len(), video.width(), video.height(), video.planes());
    run.finish(Some(&c.out))
}

fn cmd_keyframes(c: KeyframesCmd) -> CmdResult {
    let mut run = Run::new("keyframes");
    run.seed = Some(c.select.seed);
    let video = c.video.load(&mut run)?;
    let set = match c.select.features(&mut run)? {
        Some(f) => select_keyframes_with(&video, c.select.keyframes, c.select.strategy, c.select.seed, &f)?,
        None => select_keyframes_with(&video, c.select.keyframes, c.select.strategy, c.select.seed, &PooledLuma)?,
    };
    let line: Vec<String> = set.indices().iter().map(usize::to_string).collect();
    println!("{}", line.join(","));
    if let Some(out) = &c.out {
        run.write(out, &render_report(&set, ReportFormat::Json))?;
    }
    run.finish(c.out.as_deref())
}

#[derive(Serialize)]
struct RunMetrics {
    decoded: String,
    stream: Option<String>,
    bpp: Option<f64>,
    #[serde(serialize_with = "serialize_db")]
    psnr: f64,
    mse: f64,
    flicker: f64,
}

#[derive(Serialize)]
struct EvaluateReport {
    reference_flicker: f64,
    runs: Vec<RunMetrics>,
    curve: Option<RdCurve>,
}

fn cmd_evaluate(c: EvaluateCmd) -> CmdResult {
    let mut run = Run::new("evaluate");
    let reference = c.video.load(&mut run)?;
    if !c.stream.is_empty() && c.stream.len() != c.decoded.len() {
        return Err(usage("give one --stream per --decoded, or none"));
    }
    let decoded = c.decoded.iter().map(|p| c.video.load_path(p, &mut run)).collect::<CmdResult<Vec<_>>>()?;
    let streams = c.stream.iter().map(|p| run.read(p)).collect::<CmdResult<Vec<_>>>()?;

    let runs = decoded
        .iter()
        .enumerate()
        .map(|(i, d)| {
            Ok(RunMetrics {
                decoded: c.decoded[i].display().to_string(),
                stream: c.stream.get(i).map(|p| p.display().to_string()),
                bpp: streams.get(i).map(|s| compute_bpp(8 * s.len() as u64, &reference)),
                psnr: psnr(d, &reference)?,
                mse: Metric::Mse.evaluate(d, &reference)?,
                flicker: temporal_flicker(d),
            })
        })
        .collect::<CmdResult<Vec<_>>>()?;

    let curve = if streams.len() >= 2 {
        Some(match &c.metric_table {
            Some(p) => {
                let table = MetricTable::read_csv(run.read(p)?.as_slice())?;
                if c.video_id.len() != streams.len() {
                    return Err(usage("give one --video-id per --stream with --metric-table"));
                }
                let name = c.table_metric.as_deref().ok_or_else(|| usage("--table-metric is required"))?;
                let rows: Vec<(&str, usize, &RawVideo)> =
                    c.video_id.iter().zip(&streams).map(|(id, s)| (id.as_str(), s.len(), &reference)).collect();
                assemble_curve_external(&rows, &table, name, !c.lower_better)?
            }
            None => {
                let rd: Vec<RdRun> = streams
                    .iter()
                    .zip(&decoded)
                    .map(|(s, d)| RdRun { stream: s, decoded: d, reference: &reference })
                    .collect();
                assemble_curve(&rd, c.metric)?
            }
        })
    } else {
        None
    };
    if let (Some(curve), Some(p)) = (&curve, &c.curve_out) {
        let mut buf = Vec::new();
        curve.write_csv(&mut buf)?;
        run.write(p, &buf)?;
    }
    let report = EvaluateReport { reference_flicker: temporal_flicker(&reference), runs, curve };
    emit(&mut run, c.out.as_deref(), &render_report(&report, c.report))?;
    run.finish(c.out.as_deref())
}

/// Rounds away float noise so equal curves print `0.0` rather than `-1e-14`.
fn tidy(v: f64) -> f64 {
    let r = (v * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn cmd_bdrate(c: BdrateCmd) -> CmdResult {
    let mut run = Run::new("bdrate");
    let read = |run: &mut Run, p: &Path| -> CmdResult<RdCurve> {
        Ok(RdCurve::read_csv(run.read(p)?.as_slice(), &c.metric_name, !c.lower_better)?)
    };
    let anchor = read(&mut run, &c.anchor)?;
    let test = read(&mut run, &c.test)?;
    let value = tidy(bd_rate(&anchor, &test)?);
    println!("{value:?}");
    if let Some(out) = &c.out {
        let report = json!({ "metric": c.metric_name, "bd_rate_percent": value, "anchor": anchor, "test": test });
        run.write(out, &render_report(&report, ReportFormat::Json))?;
    }
    run.finish(c.out.as_deref())
}

#[derive(Serialize)]
struct RoundtripReport {
    point: RdPoint,
    bpp: f64,
    #[serde(serialize_with = "serialize_db")]
    psnr: f64,
    mse: f64,
    flicker: f64,
    reference_flicker: f64,
    stream_sha256: String,
    encode: EncodeReport,
}

fn cmd_roundtrip(c: RoundtripCmd) -> CmdResult {
    let mut run = Run::new("roundtrip");
    let video = match &c.video.input {
        Some(_) => c.video.load(&mut run)?,
        None => bundled_sample(),
    };
    let cfg = c.codec.config(&mut run)?;
    let (stream, encode) = encode_report(&video, &cfg)?;
    let decoded = decode_with_jobs(&stream, &cfg.backend, cfg.jobs)?;
    let p = psnr(&decoded, &video)?;
    let report = RoundtripReport {
        point: RdPoint::new(encode.bpp, p, "psnr", true),
        bpp: encode.bpp,
        psnr: p,
        mse: Metric::Mse.evaluate(&decoded, &video)?,
        flicker: temporal_flicker(&decoded),
        reference_flicker: temporal_flicker(&video),
        stream_sha256: hex::encode(Sha256::digest(&stream)),
        encode,
    };
    if let Some(path) = &c.stream_out {
        run.write(path, &stream)?;
    }
    if let Some(path) = &c.decoded_out {
        run.write(path, &decoded.to_bytes())?;
    }
    emit(&mut run, c.out.as_deref(), &render_report(&report, c.report))?;
    run.finish(c.out.as_deref())
}

fn cmd_inspect(c: InspectCmd) -> CmdResult {
    let mut run = Run::new("inspect");
    let stream = run.read(&c.input)?;
    let summary = inspect(&stream)?;
    emit(&mut run, c.out.as_deref(), &render_report(&summary, ReportFormat::Json))?;
    run.finish(c.out.as_deref())
}

fn cmd_synth(c: SynthCmd) -> CmdResult {
    let mut run = Run::new("synth");
    run.seed = Some(c.seed);
    let video = moving_pattern(Geometry::new(c.width, c.height, c.planes)?, c.frames, c.seed)?;
    write_raw_video(&c.out, &video)?;
    run.outputs.push((c.out.display().to_string(), hex::encode(Sha256::digest(video.to_bytes()))));
    run.finish(Some(&c.out))
}

fn cmd_serve(c: ServeCmd) -> CmdResult {
    let mode = match c.mode {
        ServeModeArg::Blend => ServeMode::Blend,
        ServeModeArg::NoiseText => ServeMode::NoiseText,
    };
    let (stdin, stdout) = (io::stdin(), io::stdout());
    serve(&mut stdin.lock(), &mut stdout.lock(), mode)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Encode(c) => cmd_encode(c),
        Command::Decode(c) => cmd_decode(c),
        Command::Keyframes(c) => cmd_keyframes(c),
        Command::Evaluate(c) => cmd_evaluate(c),
        Command::Bdrate(c) => cmd_bdrate(c),
        Command::Roundtrip(c) => cmd_roundtrip(c),
        Command::Inspect(c) => cmd_inspect(c),
        Command::Synth(c) => cmd_synth(c),
        Command::ServeBackend(c) => cmd_serve(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("cmvc: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
