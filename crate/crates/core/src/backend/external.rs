//! External generation backends over a child process's stdin/stdout.
//!
//! Every message is a 4-byte big-endian length followed by a UTF-8 JSON
//! object. Binary frame payloads follow the message that announces them as
//! raw planar bytes (`width * height * planes` each).
//!
//! ```text
//! parent -> child  {"type":"hello","version":1}
//! child  -> parent {"type":"hello","version":1}
//! parent -> child  {"type":"generate","width":W,"height":H,"planes":P,"count":F,
//!                   "motion_text":S,"weights_i":[..],"weights_l":[..]}
//!                  <left keyframe bytes> <right keyframe bytes>
//! child  -> parent {"type":"frames","count":F} <F frame payloads>
//!               or {"type":"error","message":"..."}
//! parent -> child  {"type":"bye"}
//! ```
//!
//! [`serve`] implements the child side (pixel blend, optionally perturbed by
//! the motion text) and backs `cmvc serve-backend`.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::process::{Child, Command, Stdio};

use serde::{Deserialize, Serialize};

use super::{blend_real, Backend, FrameQuery, GenerationRequest};
use crate::codec::{TextRepr, WeightTrack};
use crate::error::{Error, Result};
use crate::model::{Frame, Geometry, RealFrame};
use crate::rng::{fnv1a64, SplitMix64};

pub const PROTOCOL_VERSION: u32 = 1;
const MAX_MESSAGE: usize = 16 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Hello {
        version: u32,
    },
    Generate {
        width: usize,
        height: usize,
        planes: usize,
        count: usize,
        motion_text: String,
        weights_i: Vec<f64>,
        weights_l: Vec<f64>,
    },
    Frames {
        count: usize,
    },
    Error {
        message: String,
    },
    Bye,
}

pub fn write_message(w: &mut impl Write, msg: &Message) -> io::Result<()> {
    let json = serde_json::to_vec(msg).map_err(io::Error::other)?;
    w.write_all(&(json.len() as u32).to_be_bytes())?;
    w.write_all(&json)
}

/// Reads one framed message. `Ok(None)` on a clean end of stream.
pub fn read_raw_message(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_MESSAGE {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("message of {len} bytes")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(Some(buf))
}

fn unavailable(e: impl std::fmt::Display) -> Error {
    Error::BackendUnavailable(e.to_string())
}

/// Client side of the protocol.
pub struct ExternalBackend {
    command: String,
    child: Option<Child>,
    reader: Box<dyn Read + Send>,
    writer: Box<dyn Write + Send>,
}

impl std::fmt::Debug for ExternalBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalBackend").field("command", &self.command).finish()
    }
}

impl ExternalBackend {
    /// Launches `command` through `sh -c` and performs the handshake.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| unavailable(format!("cannot start '{command}': {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut backend = ExternalBackend {
            command: command.to_string(),
            child: Some(child),
            reader: Box::new(BufReader::new(stdout)),
            writer: Box::new(BufWriter::new(stdin)),
        };
        backend.handshake()?;
        Ok(backend)
    }

    /// Uses already-connected streams (a socket, a pipe pair, a test double).
    pub fn from_streams(
        name: &str,
        reader: impl Read + Send + 'static,
        writer: impl Write + Send + 'static,
    ) -> Result<Self> {
        let mut backend = ExternalBackend {
            command: name.to_string(),
            child: None,
            reader: Box::new(reader),
            writer: Box::new(writer),
        };
        backend.handshake()?;
        Ok(backend)
    }

    fn send(&mut self, msg: &Message) -> Result<()> {
        write_message(&mut self.writer, msg).map_err(unavailable)
    }

    fn recv(&mut self) -> Result<Message> {
        let raw = read_raw_message(&mut self.reader)
            .map_err(unavailable)?
            .ok_or_else(|| unavailable("backend closed its output"))?;
        serde_json::from_slice(&raw).map_err(|e| Error::ProtocolViolation(format!("unparseable message: {e}")))
    }

    fn handshake(&mut self) -> Result<()> {
        self.send(&Message::Hello { version: PROTOCOL_VERSION })?;
        self.writer.flush().map_err(unavailable)?;
        match self.recv() {
            Ok(Message::Hello { version: PROTOCOL_VERSION }) => Ok(()),
            Ok(Message::Hello { version }) => Err(unavailable(format!("backend speaks protocol version {version}"))),
            Ok(Message::Error { message }) => Err(unavailable(format!("handshake refused: {message}"))),
            Ok(other) => Err(unavailable(format!("unexpected handshake reply {other:?}"))),
            Err(Error::ProtocolViolation(e)) => Err(unavailable(e)),
            Err(e) => Err(e),
        }
    }

    fn request(&mut self, left: &Frame, right: &Frame, text: &TextRepr, weights: &WeightTrack) -> Result<Vec<Frame>> {
        let g = left.geometry();
        self.send(&Message::Generate {
            width: g.width,
            height: g.height,
            planes: g.planes,
            count: weights.len(),
            motion_text: text.as_str().to_string(),
            weights_i: weights.wi().to_vec(),
            weights_l: weights.wl().to_vec(),
        })?;
        self.writer.write_all(left.samples()).map_err(unavailable)?;
        self.writer.write_all(right.samples()).map_err(unavailable)?;
        self.writer.flush().map_err(unavailable)?;

        match self.recv()? {
            Message::Frames { count } if count == weights.len() => (0..count)
                .map(|_| {
                    let mut buf = vec![0u8; g.frame_len()];
                    self.reader.read_exact(&mut buf).map_err(unavailable)?;
                    Frame::new(g, buf)
                })
                .collect(),
            Message::Frames { count } => {
                Err(Error::ProtocolViolation(format!("backend announced {count} frames, expected {}", weights.len())))
            }
            Message::Error { message } => Err(unavailable(format!("backend error: {message}"))),
            other => Err(Error::ProtocolViolation(format!("unexpected reply {other:?}"))),
        }
    }

    /// Sends `bye` and reaps the child.
    pub fn shutdown(mut self) -> Result<()> {
        self.close()
    }

    fn close(&mut self) -> Result<()> {
        let sent = self.send(&Message::Bye).and_then(|_| self.writer.flush().map_err(unavailable));
        // Dropping our end of stdin lets a well-behaved child exit.
        self.writer = Box::new(io::sink());
        if let Some(mut child) = self.child.take() {
            child.wait().map_err(unavailable)?;
        }
        sent
    }
}

impl Drop for ExternalBackend {
    fn drop(&mut self) {
        if self.child.is_some() {
            let _ = self.close();
        }
    }
}

impl Backend for ExternalBackend {
    fn name(&self) -> String {
        format!("external:{}", self.command)
    }

    /// One-frame request; the result is the child's 8-bit output.
    fn render(&mut self, q: &FrameQuery<'_>) -> Result<RealFrame> {
        let w = WeightTrack::new(vec![q.wi.clamp(0.0, 1.0)], vec![q.wl.clamp(0.0, 1.0)])?;
        let frames = self.request(q.left, q.right, q.motion_text, &w)?;
        let frame = frames.into_iter().next().ok_or_else(|| Error::ProtocolViolation("empty reply".into()))?;
        Ok(frame.to_real())
    }

    fn generate(&mut self, req: &GenerationRequest) -> Result<Vec<Frame>> {
        self.request(&req.left, &req.right, &req.motion_text, &req.weights)
    }
}

/// Child-side behaviour of [`serve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServeMode {
    /// Exactly the in-process linear backend.
    Blend,
    /// Blend plus a +-1 level perturbation seeded by the motion text.
    NoiseText,
}

fn blend_frames(
    mode: ServeMode,
    g: Geometry,
    left: &Frame,
    right: &Frame,
    text: &str,
    wi: &[f64],
) -> Result<Vec<Frame>> {
    wi.iter()
        .enumerate()
        .map(|(t, &w)| {
            let mut frame = blend_real(left, right, w)?.quantize();
            if mode == ServeMode::NoiseText {
                let mut rng = SplitMix64::new(fnv1a64(text.as_bytes()) ^ t as u64);
                let samples =
                    frame.samples().iter().map(|&s| (s as i32 + rng.below(3) as i32 - 1).clamp(0, 255) as u8).collect();
                frame = Frame::new(g, samples)?;
            }
            Ok(frame)
        })
        .collect()
}

/// Serves the protocol until `bye` or end of input.
///
/// Malformed requests get an error reply and the loop continues; a version
/// mismatch in the handshake gets an error reply and ends the session with
/// an error.
pub fn serve(reader: &mut impl Read, writer: &mut impl Write, mode: ServeMode) -> Result<()> {
    let mut greeted = false;
    loop {
        let Some(raw) = read_raw_message(reader)? else {
            return Ok(());
        };
        let reply_error = |w: &mut dyn Write, message: String| -> Result<()> {
            let mut w = w;
            write_message(&mut w, &Message::Error { message })?;
            w.flush()?;
            Ok(())
        };
        let msg: Message = match serde_json::from_slice(&raw) {
            Ok(m) => m,
            Err(e) => {
                reply_error(writer, format!("malformed message: {e}"))?;
                continue;
            }
        };
        match msg {
            Message::Hello { version } if version == PROTOCOL_VERSION => {
                greeted = true;
                write_message(writer, &Message::Hello { version: PROTOCOL_VERSION })?;
                writer.flush()?;
            }
            Message::Hello { version } => {
                reply_error(writer, format!("unsupported protocol version {version}"))?;
                return Err(Error::ProtocolViolation(format!("client speaks version {version}")));
            }
            Message::Generate { width, height, planes, count, motion_text, weights_i, .. } => {
                let geometry = Geometry::new(width, height, planes);
                // Keyframe payloads follow regardless; consume them first.
                let frame_len = geometry.as_ref().map(|g| g.frame_len()).unwrap_or(0);
                let mut left = vec![0u8; frame_len];
                let mut right = vec![0u8; frame_len];
                reader.read_exact(&mut left)?;
                reader.read_exact(&mut right)?;
                let g = match geometry {
                    Ok(g) if greeted && weights_i.len() == count => g,
                    Ok(_) if !greeted => {
                        reply_error(writer, "generate before hello".into())?;
                        continue;
                    }
                    Ok(_) => {
                        reply_error(writer, format!("{} weights for {count} frames", weights_i.len()))?;
                        continue;
                    }
                    Err(e) => {
                        reply_error(writer, e.to_string())?;
                        continue;
                    }
                };
                if weights_i.iter().any(|w| !(0.0..=1.0).contains(w)) {
                    reply_error(writer, "weights must lie in [0, 1]".into())?;
                    continue;
                }
                let frames =
                    blend_frames(mode, g, &Frame::new(g, left)?, &Frame::new(g, right)?, &motion_text, &weights_i)?;
                write_message(writer, &Message::Frames { count: frames.len() })?;
                for f in &frames {
                    writer.write_all(f.samples())?;
                }
                writer.flush()?;
            }
            Message::Bye => return Ok(()),
            other => reply_error(writer, format!("unexpected message {other:?}"))?,
        }
    }
}
