//! Cross-modal video codec.
//!
//! A video is carried as a handful of keyframes, a short motion description
//! per clip and (optionally) per-frame interpolation weights. The decoder
//! regenerates the frames between keyframes with a pluggable generation
//! backend. The crate also ships the rate/distortion tooling used to compare
//! such streams against conventional codecs (PSNR, BD-Rate).
//!
//! Module map:
//!
//! * [`model`]: raw planar video, frames, clip spans, bit accounting.
//! * [`keyframe`]: frame embeddings and keyframe selection strategies.
//! * [`codec`]: payload coders for text, keyframe images and weight tracks.
//! * [`bitstream`]: the `.cmvc` container.
//! * [`backend`]: frame generation (linear, latent-adapter, external process).
//! * [`optimize`]: encoder-side tuning of interpolation weights.
//! * [`eval`]: distortion metrics, R-D curves and BD-Rate.
//! * [`pipeline`]: end-to-end encode and decode.

pub mod backend;
pub mod bitstream;
pub mod codec;
pub mod dct;
pub mod error;
pub mod eval;
pub mod keyframe;
pub mod model;
pub mod optimize;
pub mod pipeline;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use model::{ClipSpan, Frame, FrameRate, RawVideo};
