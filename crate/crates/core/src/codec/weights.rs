//! Weight tracks: one `(wi, wl)` pair per generated frame, each stored as a
//! 16-bit fixed-point code `round(w * 65535)`. Layout: u16 count, then the
//! interleaved pairs, all big-endian.

use crate::error::{Error, Result};

const SCALE: f64 = 65535.0;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightTrack {
    wi: Vec<f64>,
    wl: Vec<f64>,
}

impl WeightTrack {
    pub fn new(wi: Vec<f64>, wl: Vec<f64>) -> Result<Self> {
        if wi.len() != wl.len() {
            return Err(Error::contract(format!("weight track lengths differ: {} vs {}", wi.len(), wl.len())));
        }
        if wi.len() > u16::MAX as usize {
            return Err(Error::contract("weight track longer than 65535 entries"));
        }
        if let Some(w) = wi.iter().chain(&wl).find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::contract(format!("weight {w} outside [0, 1]")));
        }
        Ok(WeightTrack { wi, wl })
    }

    /// `wi = wl = 1 - (t+1)/(count+1)`: the uncorrected linear schedule.
    pub fn linear(count: usize) -> Self {
        let w: Vec<f64> = (0..count).map(|t| 1.0 - (t + 1) as f64 / (count + 1) as f64).collect();
        WeightTrack { wi: w.clone(), wl: w }
    }

    pub fn wi(&self) -> &[f64] {
        &self.wi
    }

    pub fn wl(&self) -> &[f64] {
        &self.wl
    }

    pub fn len(&self) -> usize {
        self.wi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wi.is_empty()
    }
}

fn quantize(w: f64) -> u16 {
    (w * SCALE).round() as u16
}

pub fn encode_weights(track: &WeightTrack) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 + 4 * track.len());
    out.extend((track.len() as u16).to_be_bytes());
    for (&wi, &wl) in track.wi.iter().zip(&track.wl) {
        out.extend(quantize(wi).to_be_bytes());
        out.extend(quantize(wl).to_be_bytes());
    }
    out
}

pub fn decode_weights(payload: &[u8]) -> Result<WeightTrack> {
    if payload.len() < 2 {
        return Err(Error::payload("weight payload shorter than its count"));
    }
    let count = u16::from_be_bytes([payload[0], payload[1]]) as usize;
    let body = &payload[2..];
    if body.len() != 4 * count {
        return Err(Error::payload(format!("weight payload declares {count} pairs but carries {} bytes", body.len())));
    }
    let code = |c: &[u8]| u16::from_be_bytes([c[0], c[1]]) as f64 / SCALE;
    let (wi, wl) = body.chunks_exact(4).map(|c| (code(&c[..2]), code(&c[2..]))).unzip();
    Ok(WeightTrack { wi, wl })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoint_codes() {
        let w = WeightTrack::new(vec![0.0], vec![1.0]).unwrap();
        let p = encode_weights(&w);
        assert_eq!(p, vec![0x00, 0x01, 0x00, 0x00, 0xFF, 0xFF]);
        assert_eq!(decode_weights(&p).unwrap(), w);
    }

    #[test]
    fn half_rounds_to_32768() {
        let w = WeightTrack::new(vec![0.5], vec![0.5]).unwrap();
        let p = encode_weights(&w);
        assert_eq!(&p[2..4], &32768u16.to_be_bytes());
        let d = decode_weights(&p).unwrap();
        assert_eq!(d.wi()[0], 32768.0 / 65535.0);
        assert!((d.wi()[0] - 0.500_007_63).abs() < 1e-8);
    }

    #[test]
    fn malformed_payloads() {
        assert!(matches!(decode_weights(&[0]), Err(Error::MalformedPayload(_))));
        assert!(matches!(decode_weights(&[0, 2, 0, 0, 0, 0]), Err(Error::MalformedPayload(_))));
        assert!(matches!(decode_weights(&[0, 0, 1]), Err(Error::MalformedPayload(_))));
        assert_eq!(decode_weights(&[0, 0]).unwrap().len(), 0);
    }

    #[test]
    fn invalid_tracks() {
        assert!(WeightTrack::new(vec![0.1], vec![]).is_err());
        assert!(WeightTrack::new(vec![1.1], vec![0.0]).is_err());
        assert!(WeightTrack::new(vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn linear_schedule() {
        let w = WeightTrack::linear(3);
        assert_eq!(w.wi(), &[0.75, 0.5, 0.25]);
        assert_eq!(w.wi(), w.wl());
    }

    proptest! {
        #[test]
        fn round_trip_within_half_step(pairs in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 0..300)) {
            let (wi, wl): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let w = WeightTrack::new(wi, wl).unwrap();
            let d = decode_weights(&encode_weights(&w)).unwrap();
            prop_assert_eq!(d.len(), w.len());
            for (a, b) in w.wi().iter().chain(w.wl()).zip(d.wi().iter().chain(d.wl())) {
                prop_assert!((a - b).abs() <= 1.0 / 131_070.0 + 1e-15);
            }
        }
    }
}
