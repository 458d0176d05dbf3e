//! Fibonacci (Zeckendorf) universal code for byte values.
//!
//! A codeword lists the Zeckendorf digits lowest Fibonacci number first and
//! ends with an extra `1`, so every codeword ends in `11` and holds no other
//! `11`. Bytes are shifted by one (`b + 1`) since the code has no zero.

use std::sync::OnceLock;

use thiserror::Error;

pub const MIN_VALUE: u32 = 1;
pub const MAX_VALUE: u32 = 257;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FibError {
    #[error("value {0} outside Fibonacci code domain 1..=257")]
    ValueOutOfRange(u32),
    #[error("malformed Fibonacci stream: {0}")]
    Decode(&'static str),
}

/// Ascending Fibonacci numbers 1, 2, 3, 5, ... up to the first one above 257.
#[derive(Debug)]
pub struct FibTable {
    fib: Vec<u32>,
}

impl FibTable {
    fn build() -> Self {
        let mut fib = vec![1u32, 2];
        while *fib.last().unwrap() <= MAX_VALUE {
            let n = fib[fib.len() - 1] + fib[fib.len() - 2];
            fib.push(n);
        }
        Self { fib }
    }

    pub fn get() -> &'static FibTable {
        static TABLE: OnceLock<FibTable> = OnceLock::new();
        TABLE.get_or_init(FibTable::build)
    }

    pub fn values(&self) -> &[u32] {
        &self.fib
    }
}

pub fn fib_encode_value(v: u32) -> Result<Vec<bool>, FibError> {
    if !(MIN_VALUE..=MAX_VALUE).contains(&v) {
        return Err(FibError::ValueOutOfRange(v));
    }
    let fib = FibTable::get().values();
    let top = fib.iter().rposition(|&f| f <= v).expect("v >= 1");
    let mut bits = vec![false; top + 2];
    let mut rest = v;
    for i in (0..=top).rev() {
        if fib[i] <= rest {
            bits[i] = true;
            rest -= fib[i];
        }
    }
    bits[top + 1] = true;
    Ok(bits)
}

pub fn fib_encode_bytes(data: &[u8]) -> Vec<bool> {
    let mut out = Vec::with_capacity(data.len() * 10);
    for &b in data {
        out.extend(fib_encode_value(u32::from(b) + 1).expect("b + 1 is in range"));
    }
    out
}

/// Inverse of [`fib_encode_bytes`]; a trailing run of zero bits is treated as padding.
pub fn fib_decode_bytes(bits: &[bool]) -> Result<Vec<u8>, FibError> {
    let fib = FibTable::get().values();
    let mut out = Vec::new();
    let mut value: u32 = 0;
    let mut idx = 0usize;
    let mut prev = false;
    let mut pending = false;
    for &bit in bits {
        if bit && prev {
            if value > 256 || value == 0 {
                return Err(FibError::Decode("codeword value exceeds byte range"));
            }
            out.push((value - 1) as u8);
            value = 0;
            idx = 0;
            prev = false;
            pending = false;
            continue;
        }
        if bit {
            let f = *fib
                .get(idx)
                .ok_or(FibError::Decode("codeword too long"))?;
            value = value.saturating_add(f);
        }
        pending |= bit;
        prev = bit;
        idx += 1;
    }
    if pending {
        return Err(FibError::Decode("unterminated codeword"));
    }
    Ok(out)
}
