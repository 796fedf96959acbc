use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::{Arc, Mutex};

use cmvc::backend::external::{serve, ExternalBackend, ServeMode};
use cmvc::backend::{generate_clip, BackendSpec, GenerationRequest, LinearBackend};
use cmvc::codec::{TextRepr, WeightTrack};
use cmvc::model::{Frame, Geometry};
use cmvc::pipeline::{decode, encode, EncodeConfig};
use cmvc::rng::SplitMix64;
use cmvc::synth::moving_pattern;
use cmvc::Error;

const CLIENT: &[u8] = include_bytes!("../testdata/protocol/client.bin");
const SERVER: &[u8] = include_bytes!("../testdata/protocol/server.bin");

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cmvc")
}

fn serve_command(mode: &str) -> String {
    format!("'{}' serve-backend --mode {mode}", bin())
}

/// The recorded session's request: a 3x2 clip, three frames.
fn transcript_request() -> GenerationRequest {
    let g = Geometry::new(3, 2, 1).unwrap();
    let w = vec![0.75, 0.5, 0.25];
    GenerationRequest::new(
        Frame::new(g, vec![10, 200, 0, 255, 37, 90]).unwrap(),
        Frame::new(g, vec![13, 100, 255, 0, 38, 91]).unwrap(),
        TextRepr::new("pan left").unwrap(),
        WeightTrack::new(w.clone(), w).unwrap(),
    )
    .unwrap()
}

#[derive(Clone, Default)]
struct SharedSink(Arc<Mutex<Vec<u8>>>);

impl Write for SharedSink {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[test]
fn server_side_matches_golden_transcript() {
    let mut out = Vec::new();
    serve(&mut &CLIENT[..], &mut out, ServeMode::Blend).unwrap();
    assert_eq!(out, SERVER);
}

#[test]
fn client_side_matches_golden_transcript() {
    let sink = SharedSink::default();
    let mut backend = ExternalBackend::from_streams("golden", SERVER, sink.clone()).unwrap();
    let frames = generate_clip(&mut backend, &transcript_request()).unwrap();
    backend.shutdown().unwrap();
    assert_eq!(sink.0.lock().unwrap().as_slice(), CLIENT);
    assert_eq!(frames[1].samples(), &[12, 150, 128, 128, 38, 91]);
}

#[test]
fn served_process_replays_golden_transcript() {
    let mut child = Command::new(bin())
        .args(["serve-backend", "--mode", "blend"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(CLIENT).unwrap();
    let mut out = Vec::new();
    child.stdout.take().unwrap().read_to_end(&mut out).unwrap();
    assert!(child.wait().unwrap().success());
    assert_eq!(out, SERVER);
}

#[test]
fn blend_server_equals_linear_backend_on_random_requests() {
    let mut ext = ExternalBackend::spawn(&serve_command("blend")).unwrap();
    let mut rng = SplitMix64::new(11);
    for _ in 0..20 {
        let g = Geometry::new(1 + rng.below(17) as usize, 1 + rng.below(13) as usize, [1, 3][rng.below(2) as usize])
            .unwrap();
        let mut frame = || Frame::from_fn(g, |_, _, _| rng.below(256) as u8);
        let (left, right) = (frame(), frame());
        let count = 1 + rng.below(5) as usize;
        let wi: Vec<f64> = (0..count).map(|_| rng.next_f64()).collect();
        let wl: Vec<f64> = (0..count).map(|_| rng.next_f64()).collect();
        let req = GenerationRequest::new(left, right, TextRepr::new("x").unwrap(), WeightTrack::new(wi, wl).unwrap())
            .unwrap();
        assert_eq!(generate_clip(&mut ext, &req).unwrap(), generate_clip(&mut LinearBackend, &req).unwrap());
    }
    ext.shutdown().unwrap();
}

#[test]
fn noise_text_server_depends_on_text_within_one_level() {
    let mut ext = ExternalBackend::spawn(&serve_command("noise-text")).unwrap();
    let mut req = transcript_request();
    let a = generate_clip(&mut ext, &req).unwrap();
    req.motion_text = TextRepr::new("zoom in").unwrap();
    let b = generate_clip(&mut ext, &req).unwrap();
    let lin = generate_clip(&mut LinearBackend, &req).unwrap();
    assert_ne!(a, b);
    for (x, y) in b.iter().zip(&lin) {
        for (&p, &q) in x.samples().iter().zip(y.samples()) {
            assert!((p as i32 - q as i32).abs() <= 1);
        }
    }
    assert_eq!(generate_clip(&mut ext, &req).unwrap(), b);
}

#[test]
fn pipeline_decodes_identically_through_external_backend() {
    let video = moving_pattern(Geometry::new(24, 16, 1).unwrap(), 10, 5).unwrap();
    let stream = encode(&video, &EncodeConfig { n_keyframes: 3, ..Default::default() }).unwrap();
    let spec: BackendSpec = format!("external:{}", serve_command("blend")).parse().unwrap();
    assert_eq!(decode(&stream, &spec).unwrap(), decode(&stream, &BackendSpec::Linear).unwrap());
}

#[test]
fn missing_backend_is_reported_as_unavailable() {
    let err = ExternalBackend::spawn("exit 0").unwrap_err();
    assert!(matches!(err, Error::BackendUnavailable(_)), "{err:?}");
    assert!(err.is_backend());
}

#[test]
fn wrong_version_server_is_rejected() {
    // A server answering hello with version 2.
    let reply = br#"{"type":"hello","version":2}"#;
    let mut framed = (reply.len() as u32).to_be_bytes().to_vec();
    framed.extend_from_slice(reply);
    let err = ExternalBackend::from_streams("v2", std::io::Cursor::new(framed), std::io::sink()).unwrap_err();
    assert!(matches!(err, Error::BackendUnavailable(_)), "{err:?}");
}
