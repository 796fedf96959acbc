//! The `.cmvc` container.
//!
//! All integers are big-endian.
//!
//! ```text
//! header (20 bytes)
//!   0  4  magic "CMVC"
//!   4  1  version (1)
//!   5  1  mode (0 = TT2V, 1 = IT2V)
//!   6  2  width
//!   8  2  height
//!  10  1  planes
//!  11  2  frame count
//!  13  2  frame rate numerator
//!  15  2  frame rate denominator
//!  17  2  clip count
//!  19  1  reserved, zero
//! clip record (repeated clip-count times)
//!      2  start frame index
//!      2  end frame index (inclusive)
//!      1  section count
//!      section (repeated)
//!        4  tag: "KIMG" | "KTXT" | "MTXT" | "WGTS"
//!        4  payload length
//!        n  payload
//! trailer
//!      4  CRC-32 (IEEE, reflected 0xEDB88320) of every preceding byte
//! ```
//!
//! Clip spans tile `[0, frame_count - 1]` and share boundary frames. In IT2V
//! streams each clip carries the image of its left keyframe (the last clip
//! also carries the right one), one motion text and optionally one weight
//! track. TT2V clips carry keyframe text instead of images and never weights.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CMVC";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 20;
pub const CLIP_OVERHEAD: usize = 5;
pub const SECTION_OVERHEAD: usize = 8;
pub const CRC_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Mode {
    #[serde(rename = "TT2V")]
    TextToVideo = 0,
    #[serde(rename = "IT2V")]
    ImageTextToVideo = 1,
}

impl Mode {
    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Mode::TextToVideo),
            1 => Ok(Mode::ImageTextToVideo),
            other => Err(Error::UnsupportedStream(format!("unknown mode {other}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::TextToVideo => "TT2V",
            Mode::ImageTextToVideo => "IT2V",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TT2V" => Ok(Mode::TextToVideo),
            "IT2V" => Ok(Mode::ImageTextToVideo),
            _ => Err(Error::Config(format!("unknown mode '{s}' (expected TT2V or IT2V)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StreamHeader {
    pub mode: Mode,
    pub width: u16,
    pub height: u16,
    pub planes: u8,
    pub frame_count: u16,
    pub frame_rate_num: u16,
    pub frame_rate_den: u16,
    pub clip_count: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SectionTag {
    #[serde(rename = "KIMG")]
    KeyframeImage,
    #[serde(rename = "KTXT")]
    KeyframeText,
    #[serde(rename = "MTXT")]
    MotionText,
    #[serde(rename = "WGTS")]
    Weights,
}

impl SectionTag {
    pub fn bytes(self) -> [u8; 4] {
        match self {
            SectionTag::KeyframeImage => *b"KIMG",
            SectionTag::KeyframeText => *b"KTXT",
            SectionTag::MotionText => *b"MTXT",
            SectionTag::Weights => *b"WGTS",
        }
    }

    fn parse(b: &[u8]) -> Option<Self> {
        match b {
            b"KIMG" => Some(SectionTag::KeyframeImage),
            b"KTXT" => Some(SectionTag::KeyframeText),
            b"MTXT" => Some(SectionTag::MotionText),
            b"WGTS" => Some(SectionTag::Weights),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub tag: SectionTag,
    pub payload: Vec<u8>,
}

impl Section {
    pub fn new(tag: SectionTag, payload: Vec<u8>) -> Self {
        Section { tag, payload }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipRecord {
    pub start: u16,
    pub end: u16,
    pub sections: Vec<Section>,
}

impl ClipRecord {
    pub fn sections_tagged(&self, tag: SectionTag) -> impl Iterator<Item = &[u8]> {
        self.sections.iter().filter(move |s| s.tag == tag).map(|s| s.payload.as_slice())
    }

    fn count(&self, tag: SectionTag) -> usize {
        self.sections.iter().filter(|s| s.tag == tag).count()
    }
}

/// Bit totals per component. `total_bits` is always 8x the stream length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RateBreakdown {
    pub keyframe_bits: u64,
    pub motion_bits: u64,
    pub weight_bits: u64,
    pub header_bits: u64,
    pub total_bits: u64,
}

/// Checks everything the container guarantees. Returns a description of the
/// first violation.
fn check_structure(header: &StreamHeader, clips: &[ClipRecord]) -> std::result::Result<(), String> {
    if header.frame_count < 2 {
        return Err(format!("frame count {} < 2", header.frame_count));
    }
    if header.clip_count == 0 {
        return Err("clip count is zero".into());
    }
    if header.clip_count as usize != clips.len() {
        return Err(format!("header declares {} clips, {} given", header.clip_count, clips.len()));
    }
    if header.width == 0 || header.height == 0 {
        return Err("zero frame dimension".into());
    }
    if header.planes != 1 && header.planes != 3 {
        return Err(format!("planes must be 1 or 3, got {}", header.planes));
    }
    if header.frame_rate_num == 0 || header.frame_rate_den == 0 {
        return Err("zero frame rate term".into());
    }

    let mut expected_start = 0u16;
    for (j, clip) in clips.iter().enumerate() {
        if clip.start != expected_start || clip.end <= clip.start {
            return Err(format!("clip {j} span [{}, {}] does not tile", clip.start, clip.end));
        }
        expected_start = clip.end;
        if clip.sections.len() > u8::MAX as usize {
            return Err(format!("clip {j} has too many sections"));
        }
        if let Some(s) = clip.sections.iter().find(|s| s.payload.len() > u32::MAX as usize) {
            return Err(format!("clip {j} section {:?} too large", s.tag));
        }
        let last = j + 1 == clips.len();
        let keyframes = if last { 2 } else { 1 };
        let (kimg, ktxt, mtxt, wgts) = (
            clip.count(SectionTag::KeyframeImage),
            clip.count(SectionTag::KeyframeText),
            clip.count(SectionTag::MotionText),
            clip.count(SectionTag::Weights),
        );
        let ok = match header.mode {
            Mode::ImageTextToVideo => kimg == keyframes && ktxt == 0 && mtxt == 1 && wgts <= 1,
            Mode::TextToVideo => ktxt == keyframes && kimg == 0 && mtxt == 1 && wgts == 0,
        };
        if !ok {
            return Err(format!(
                "clip {j} sections (KIMG {kimg}, KTXT {ktxt}, MTXT {mtxt}, WGTS {wgts}) invalid for {}",
                header.mode
            ));
        }
    }
    if expected_start as usize != header.frame_count as usize - 1 {
        return Err(format!("clips end at frame {expected_start}, video has {} frames", header.frame_count));
    }
    Ok(())
}

fn write_header(out: &mut Vec<u8>, h: &StreamHeader) {
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(h.mode as u8);
    out.extend(h.width.to_be_bytes());
    out.extend(h.height.to_be_bytes());
    out.push(h.planes);
    out.extend(h.frame_count.to_be_bytes());
    out.extend(h.frame_rate_num.to_be_bytes());
    out.extend(h.frame_rate_den.to_be_bytes());
    out.extend(h.clip_count.to_be_bytes());
    out.push(0);
}

pub fn mux(header: &StreamHeader, clips: &[ClipRecord]) -> Result<Vec<u8>> {
    check_structure(header, clips).map_err(Error::Contract)?;
    let body: usize = clips
        .iter()
        .map(|c| CLIP_OVERHEAD + c.sections.iter().map(|s| SECTION_OVERHEAD + s.payload.len()).sum::<usize>())
        .sum();
    let mut out = Vec::with_capacity(HEADER_LEN + body + CRC_LEN);
    write_header(&mut out, header);
    for clip in clips {
        out.extend(clip.start.to_be_bytes());
        out.extend(clip.end.to_be_bytes());
        out.push(clip.sections.len() as u8);
        for s in &clip.sections {
            out.extend(s.tag.bytes());
            out.extend((s.payload.len() as u32).to_be_bytes());
            out.extend_from_slice(&s.payload);
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend(crc.to_be_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::MalformedStream(format!("truncated: need {n} bytes at offset {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn demux(bytes: &[u8]) -> Result<(StreamHeader, Vec<ClipRecord>)> {
    if bytes.len() < HEADER_LEN + CRC_LEN {
        return Err(Error::MalformedStream(format!("{} bytes is shorter than an empty stream", bytes.len())));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::UnsupportedStream("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::UnsupportedStream(format!("version {}", bytes[4])));
    }

    // The body is everything but the trailer; a record walking into the
    // trailer means the stream was cut short.
    let body = &bytes[..bytes.len() - CRC_LEN];
    let mut r = Reader { buf: body, pos: 5 };
    let mode = Mode::from_byte(r.u8()?)?;
    let width = r.u16()?;
    let height = r.u16()?;
    let planes = r.u8()?;
    let frame_count = r.u16()?;
    let frame_rate_num = r.u16()?;
    let frame_rate_den = r.u16()?;
    let clip_count = r.u16()?;
    let _reserved = r.u8()?;
    let header = StreamHeader { mode, width, height, planes, frame_count, frame_rate_num, frame_rate_den, clip_count };

    let mut clips = Vec::with_capacity(clip_count as usize);
    for _ in 0..clip_count {
        let start = r.u16()?;
        let end = r.u16()?;
        let n = r.u8()?;
        let mut sections = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let raw_tag = r.take(4)?;
            let tag = SectionTag::parse(raw_tag)
                .ok_or_else(|| Error::MalformedStream(format!("unknown section tag {raw_tag:02x?}")))?;
            let len = r.u32()? as usize;
            sections.push(Section { tag, payload: r.take(len)?.to_vec() });
        }
        clips.push(ClipRecord { start, end, sections });
    }

    let stored = u32::from_be_bytes(bytes[bytes.len() - CRC_LEN..].try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::CorruptStream { stored, computed });
    }
    if r.pos != body.len() {
        return Err(Error::MalformedStream(format!("{} trailing bytes after the last clip", body.len() - r.pos)));
    }
    check_structure(&header, &clips).map_err(Error::MalformedStream)?;
    Ok((header, clips))
}

pub fn rate_breakdown(_header: &StreamHeader, clips: &[ClipRecord]) -> RateBreakdown {
    let mut b = RateBreakdown::default();
    let mut overhead = (HEADER_LEN + CRC_LEN) as u64;
    for clip in clips {
        overhead += CLIP_OVERHEAD as u64;
        for s in &clip.sections {
            overhead += SECTION_OVERHEAD as u64;
            let bits = 8 * s.payload.len() as u64;
            match s.tag {
                SectionTag::KeyframeImage | SectionTag::KeyframeText => b.keyframe_bits += bits,
                SectionTag::MotionText => b.motion_bits += bits,
                SectionTag::Weights => b.weight_bits += bits,
            }
        }
    }
    b.header_bits = 8 * overhead;
    b.total_bits = b.keyframe_bits + b.motion_bits + b.weight_bits + b.header_bits;
    b
}
