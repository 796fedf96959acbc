//! Text payloads: 2-byte big-endian plaintext length, then the bytes coded
//! with an adaptive order-0 model over the 256 byte values.

use crate::codec::arith::{Decoder, Encoder, FrequencyModel};
use crate::error::{Error, Result};

pub const MAX_TEXT_LEN: usize = u16::MAX as usize;

/// UTF-8 text of at most 65535 bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TextRepr(String);

impl TextRepr {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.len() > MAX_TEXT_LEN {
            return Err(Error::contract(format!("text is {} bytes, limit is {MAX_TEXT_LEN}", text.len())));
        }
        Ok(TextRepr(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

pub fn encode_text(text: &TextRepr) -> Vec<u8> {
    let bytes = text.as_bytes();
    let mut out = (bytes.len() as u16).to_be_bytes().to_vec();
    if bytes.is_empty() {
        return out;
    }
    let mut enc = Encoder::new();
    let mut model = FrequencyModel::new(256);
    for &b in bytes {
        enc.encode(&mut model, b as usize);
    }
    out.extend(enc.finish());
    out
}

pub fn decode_text(payload: &[u8]) -> Result<TextRepr> {
    let (len, body) = match payload {
        [hi, lo, body @ ..] => (u16::from_be_bytes([*hi, *lo]) as usize, body),
        _ => return Err(Error::payload("text payload shorter than its length prefix")),
    };
    if len == 0 {
        if !body.is_empty() {
            return Err(Error::payload("empty text with a non-empty body"));
        }
        return Ok(TextRepr::default());
    }
    let mut dec = Decoder::new(body);
    let mut model = FrequencyModel::new(256);
    let mut bytes = Vec::with_capacity(len);
    for _ in 0..len {
        bytes.push(dec.decode(&mut model)? as u8);
    }
    dec.finish()?;
    let text = String::from_utf8(bytes).map_err(|_| Error::payload("text is not valid UTF-8"))?;
    Ok(TextRepr(text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(s: &str) -> TextRepr {
        TextRepr::new(s).unwrap()
    }

    #[test]
    fn empty_text_is_two_bytes() {
        let p = encode_text(&t(""));
        assert_eq!(p, vec![0, 0]);
        assert_eq!(decode_text(&p).unwrap(), t(""));
    }

    #[test]
    fn repeated_byte_compresses() {
        let s = "a".repeat(1000);
        let p = encode_text(&t(&s));
        assert!(p.len() < 1002, "{} bytes", p.len());
        assert_eq!(decode_text(&p).unwrap().as_str(), s);
    }

    #[test]
    fn length_limit() {
        assert!(TextRepr::new("x".repeat(MAX_TEXT_LEN)).is_ok());
        assert!(matches!(TextRepr::new("x".repeat(MAX_TEXT_LEN + 1)), Err(Error::Contract(_))));
    }

    #[test]
    fn truncation_is_detected() {
        let p = encode_text(&t("a camera pans slowly to the left across a crowded street"));
        assert!(decode_text(&p[..1]).is_err());
        assert!(decode_text(&[]).is_err());
        for cut in 3..p.len() {
            assert!(
                matches!(decode_text(&p[..cut]), Err(Error::MalformedPayload(_))),
                "truncation to {cut} bytes went unnoticed"
            );
        }
        let mut extended = p.clone();
        extended.push(0);
        assert!(decode_text(&extended).is_err());
        assert!(decode_text(&[0, 0, 1]).is_err());
    }

    #[test]
    fn encoding_is_deterministic() {
        let s = t("the same words, twice");
        assert_eq!(encode_text(&s), encode_text(&s));
    }

    proptest! {
        #[test]
        fn round_trip(s in "\\PC{0,400}") {
            let text = t(&s);
            prop_assert_eq!(decode_text(&encode_text(&text)).unwrap(), text);
        }

        #[test]
        fn round_trip_binary_like(bytes in prop::collection::vec(any::<u8>(), 0..600)) {
            let s = String::from_utf8_lossy(&bytes).into_owned();
            prop_assume!(s.len() <= MAX_TEXT_LEN);
            let text = t(&s);
            prop_assert_eq!(decode_text(&encode_text(&text)).unwrap(), text);
        }
    }
}
