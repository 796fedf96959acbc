//! Payload codecs for the three representation kinds carried in a stream.

pub mod arith;
pub mod image;
pub mod text;
pub mod weights;

pub use image::{decode_keyframe, encode_keyframe, QualityFactor};
pub use text::{decode_text, encode_text, TextRepr};
pub use weights::{decode_weights, encode_weights, WeightTrack};
