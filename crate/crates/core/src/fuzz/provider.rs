//! Reference input-provider primitives.
//!
//! Each primitive is a pure function from the remaining buffer to a value and a
//! shorter remaining buffer. An exhausted buffer yields the primitive's minimum.
//! The subject runner implements the same rules; the golden vector file pins
//! them byte for byte.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("invalid range: lo {lo} > hi {hi}")]
    InvalidRange { lo: i64, hi: i64 },
}

/// Reads up to `k` bytes big-endian, treating missing trailing bytes as zero.
fn read_be(buf: &[u8], k: usize) -> (u128, &[u8]) {
    let take = k.min(buf.len());
    let mut u: u128 = 0;
    for i in 0..k {
        u = (u << 8) | u128::from(if i < take { buf[i] } else { 0 });
    }
    (u, &buf[take..])
}

/// `lo + (u mod range)` where `u` is the first `k` bytes big-endian and `k` is
/// the least byte count with `256^k >= range`.
pub fn reference_consume_int_in_range(buf: &[u8], lo: i64, hi: i64) -> Result<(i64, &[u8]), ProviderError> {
    if lo > hi {
        return Err(ProviderError::InvalidRange { lo, hi });
    }
    let range = (i128::from(hi) - i128::from(lo) + 1) as u128;
    let mut k = 0;
    while (1u128 << (8 * k)) < range {
        k += 1;
    }
    let (u, rest) = read_be(buf, k);
    let value = i128::from(lo) + (u % range) as i128;
    Ok((value as i64, rest))
}

/// Low bit of one byte.
pub fn reference_consume_bool(buf: &[u8]) -> (bool, &[u8]) {
    match buf.split_first() {
        Some((b, rest)) => (b & 1 == 1, rest),
        None => (false, buf),
    }
}

/// Four bytes big-endian divided by 2^32, in [0, 1).
pub fn reference_consume_probability(buf: &[u8]) -> (f64, &[u8]) {
    let (u, rest) = read_be(buf, 4);
    (u as f64 / 4_294_967_296.0, rest)
}

/// One length byte modulo `max_len + 1`, then that many bytes (or what remains)
/// each mapped to `0x20 + b mod 95`.
pub fn reference_consume_ascii_string(buf: &[u8], max_len: usize) -> (String, &[u8]) {
    let Some((&len_byte, rest)) = buf.split_first() else {
        return (String::new(), buf);
    };
    let len = (len_byte as usize) % (max_len + 1);
    let take = len.min(rest.len());
    let s = rest[..take].iter().map(|b| char::from(0x20 + b % 95)).collect();
    (s, &rest[take..])
}

/// `count` sequential [`reference_consume_int_in_range`] calls.
pub fn reference_consume_int_list(
    buf: &[u8],
    count: usize,
    lo: i64,
    hi: i64,
) -> Result<(Vec<i64>, &[u8]), ProviderError> {
    if lo > hi {
        return Err(ProviderError::InvalidRange { lo, hi });
    }
    let mut rest = buf;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (v, r) = reference_consume_int_in_range(rest, lo, hi)?;
        out.push(v);
        rest = r;
    }
    Ok((out, rest))
}

/// Stateful wrapper consuming from one buffer.
#[derive(Debug, Clone)]
pub struct FuzzedDataProvider<'a> {
    rest: &'a [u8],
}

impl<'a> FuzzedDataProvider<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        FuzzedDataProvider { rest: buf }
    }

    pub fn remaining(&self) -> &'a [u8] {
        self.rest
    }

    pub fn consume_int_in_range(&mut self, lo: i64, hi: i64) -> Result<i64, ProviderError> {
        let (v, rest) = reference_consume_int_in_range(self.rest, lo, hi)?;
        self.rest = rest;
        Ok(v)
    }

    pub fn consume_bool(&mut self) -> bool {
        let (v, rest) = reference_consume_bool(self.rest);
        self.rest = rest;
        v
    }

    pub fn consume_probability(&mut self) -> f64 {
        let (v, rest) = reference_consume_probability(self.rest);
        self.rest = rest;
        v
    }

    pub fn consume_ascii_string(&mut self, max_len: usize) -> String {
        let (v, rest) = reference_consume_ascii_string(self.rest, max_len);
        self.rest = rest;
        v
    }

    pub fn consume_int_list(&mut self, count: usize, lo: i64, hi: i64) -> Result<Vec<i64>, ProviderError> {
        let (v, rest) = reference_consume_int_list(self.rest, count, lo, hi)?;
        self.rest = rest;
        Ok(v)
    }
}
