//! Adaptive multi-symbol arithmetic coder with binary (bit-level) output.
//!
//! Classic 32-bit integer coder with underflow (pending bit) handling. Models
//! are frequency tables: every symbol starts at count 1, gains 1 per coded
//! occurrence, and the table is halved (rounding up, so no count reaches 0)
//! once the total exceeds 2^16.

use crate::error::{Error, Result};

const PRECISION: u32 = 32;
const TOP: u64 = (1 << PRECISION) - 1;
const HALF: u64 = 1 << (PRECISION - 1);
const QUARTER: u64 = 1 << (PRECISION - 2);
const THREE_QUARTERS: u64 = HALF + QUARTER;

/// Rescale threshold for frequency tables.
pub const MAX_TOTAL: u32 = 1 << 16;

#[derive(Debug, Clone)]
pub struct FrequencyModel {
    counts: Vec<u32>,
    total: u32,
}

impl FrequencyModel {
    pub fn new(symbols: usize) -> Self {
        assert!(symbols >= 1 && symbols < MAX_TOTAL as usize);
        FrequencyModel { counts: vec![1; symbols], total: symbols as u32 }
    }

    pub fn symbols(&self) -> usize {
        self.counts.len()
    }

    fn range_of(&self, symbol: usize) -> (u32, u32) {
        let low: u32 = self.counts[..symbol].iter().sum();
        (low, low + self.counts[symbol])
    }

    /// Symbol whose cumulative range contains `target`.
    fn find(&self, target: u32) -> (usize, u32, u32) {
        let mut low = 0;
        for (s, &c) in self.counts.iter().enumerate() {
            if target < low + c {
                return (s, low, low + c);
            }
            low += c;
        }
        unreachable!("target {target} beyond total {}", self.total)
    }

    fn update(&mut self, symbol: usize) {
        self.counts[symbol] += 1;
        self.total += 1;
        if self.total > MAX_TOTAL {
            self.total = 0;
            for c in &mut self.counts {
                *c = c.div_ceil(2);
                self.total += *c;
            }
        }
    }
}

#[derive(Debug, Default)]
pub struct Encoder {
    low: u64,
    high: u64,
    pending: u64,
    out: Vec<u8>,
    bit_buf: u8,
    bit_count: u8,
}

impl Encoder {
    pub fn new() -> Self {
        Encoder { low: 0, high: TOP, ..Default::default() }
    }

    fn push_bit(&mut self, bit: u8) {
        self.bit_buf = (self.bit_buf << 1) | bit;
        self.bit_count += 1;
        if self.bit_count == 8 {
            self.out.push(self.bit_buf);
            self.bit_buf = 0;
            self.bit_count = 0;
        }
    }

    fn emit(&mut self, bit: u8) {
        self.push_bit(bit);
        while self.pending > 0 {
            self.push_bit(1 - bit);
            self.pending -= 1;
        }
    }

    fn encode_range(&mut self, low: u32, high: u32, total: u32) {
        let span = self.high - self.low + 1;
        self.high = self.low + span * high as u64 / total as u64 - 1;
        self.low += span * low as u64 / total as u64;
        loop {
            if self.high < HALF {
                self.emit(0);
            } else if self.low >= HALF {
                self.emit(1);
                self.low -= HALF;
                self.high -= HALF;
            } else if self.low >= QUARTER && self.high < THREE_QUARTERS {
                self.pending += 1;
                self.low -= QUARTER;
                self.high -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
        }
    }

    pub fn encode(&mut self, model: &mut FrequencyModel, symbol: usize) {
        let (lo, hi) = model.range_of(symbol);
        self.encode_range(lo, hi, model.total);
        model.update(symbol);
    }

    /// Codes `count` raw bits (MSB first) at probability one half each.
    pub fn encode_bits(&mut self, value: u32, count: u32) {
        for i in (0..count).rev() {
            let bit = (value >> i) & 1;
            self.encode_range(bit, bit + 1, 2);
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        self.pending += 1;
        if self.low < QUARTER {
            self.emit(0);
        } else {
            self.emit(1);
        }
        if self.bit_count > 0 {
            let pad = 8 - self.bit_count;
            self.out.push(self.bit_buf << pad);
        }
        self.out
    }
}

/// Decoder over a complete coded body.
///
/// Reads past the end of the body are served as zero bits. [`Decoder::finish`]
/// checks that the body has exactly the length the encoder would have
/// produced for the symbols decoded, which catches truncation and most
/// trailing garbage.
#[derive(Debug)]
pub struct Decoder<'a> {
    input: &'a [u8],
    low: u64,
    high: u64,
    value: u64,
    bits_read: u64,
}

impl<'a> Decoder<'a> {
    pub fn new(input: &'a [u8]) -> Self {
        let mut d = Decoder { input, low: 0, high: TOP, value: 0, bits_read: 0 };
        for _ in 0..PRECISION {
            d.value = (d.value << 1) | d.next_bit();
        }
        d
    }

    fn next_bit(&mut self) -> u64 {
        let i = self.bits_read;
        self.bits_read += 1;
        let byte = (i / 8) as usize;
        match self.input.get(byte) {
            Some(b) => ((b >> (7 - (i % 8))) & 1) as u64,
            None => 0,
        }
    }

    fn decode_target(&self, total: u32) -> u32 {
        let span = self.high - self.low + 1;
        (((self.value - self.low + 1) * total as u64 - 1) / span) as u32
    }

    fn consume(&mut self, low: u32, high: u32, total: u32) {
        let span = self.high - self.low + 1;
        self.high = self.low + span * high as u64 / total as u64 - 1;
        self.low += span * low as u64 / total as u64;
        loop {
            if self.high < HALF {
            } else if self.low >= HALF {
                self.low -= HALF;
                self.high -= HALF;
                self.value -= HALF;
            } else if self.low >= QUARTER && self.high < THREE_QUARTERS {
                self.low -= QUARTER;
                self.high -= QUARTER;
                self.value -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
            self.value = (self.value << 1) | self.next_bit();
        }
    }

    pub fn decode(&mut self, model: &mut FrequencyModel) -> Result<usize> {
        if self.value < self.low || self.value > self.high {
            return Err(Error::payload("arithmetic decoder left its interval"));
        }
        let target = self.decode_target(model.total);
        if target >= model.total {
            return Err(Error::payload("arithmetic decoder target out of range"));
        }
        let (symbol, lo, hi) = model.find(target);
        self.consume(lo, hi, model.total);
        model.update(symbol);
        Ok(symbol)
    }

    pub fn decode_bits(&mut self, count: u32) -> Result<u32> {
        let mut v = 0u32;
        for _ in 0..count {
            if self.value < self.low || self.value > self.high {
                return Err(Error::payload("arithmetic decoder left its interval"));
            }
            let bit = self.decode_target(2);
            if bit > 1 {
                return Err(Error::payload("arithmetic decoder target out of range"));
            }
            self.consume(bit, bit + 1, 2);
            v = (v << 1) | bit;
        }
        Ok(v)
    }

    /// Verifies the body length matches what the encoder emits: one bit per
    /// renormalization plus two flush bits, padded to a byte.
    pub fn finish(self) -> Result<()> {
        let shifts = self.bits_read - PRECISION as u64;
        let expected = (shifts + 2).div_ceil(8);
        if expected != self.input.len() as u64 {
            return Err(Error::payload(format!(
                "coded body is {} bytes, decoded symbols account for {expected}",
                self.input.len()
            )));
        }
        Ok(())
    }
}
