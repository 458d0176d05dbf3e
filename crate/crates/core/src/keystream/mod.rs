//! Keystreams drawn from the binary expansion of `frac(x * T)` for a base
//! transcendental `T` and a positive integer multiplier `x`.

mod constants;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

/// Default number of bits computed the first time a stream is read.
pub const DEFAULT_MIN_PRECISION_BITS: u64 = 4096;

/// Upper bound on the bits a single stream may materialize.
pub const DEFAULT_MAX_PRECISION_BITS: u64 = 1 << 22;

/// Extra low-order bits carried beyond the ones handed out.
const GUARD_BITS: u64 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeystreamError {
    #[error("seed material must be non-empty")]
    InvalidSeedMaterial,
    #[error("seed must be a positive integer")]
    InvalidSeed,
    #[error("seed is reserved for the host")]
    ReservedSeed,
    #[error("cannot extend keystream beyond {limit} bits")]
    PrecisionExhausted { limit: u64 },
    #[error("bit count must be positive")]
    ZeroCount,
    #[error("keystream bits changed after precision extension at offset {offset}")]
    PrecisionInconsistent { offset: u64 },
}

/// The fixed transcendental a key is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TranscendentalBase {
    #[default]
    Pi,
    E,
    Ln2,
}

impl TranscendentalBase {
    pub const ALL: [TranscendentalBase; 3] = [Self::Pi, Self::E, Self::Ln2];

    pub fn tag(self) -> u8 {
        match self {
            Self::Pi => 0,
            Self::E => 1,
            Self::Ln2 => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Pi => "pi",
            Self::E => "e",
            Self::Ln2 => "ln2",
        }
    }
}

impl fmt::Display for TranscendentalBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TranscendentalBase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pi" => Ok(Self::Pi),
            "e" => Ok(Self::E),
            "ln2" => Ok(Self::Ln2),
            other => Err(format!("unknown base `{other}` (expected pi, e or ln2)")),
        }
    }
}

/// Everything needed to regenerate a keystream.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KeySpec {
    pub base: TranscendentalBase,
    pub seed_x: BigUint,
    pub min_precision_bits: u64,
}

impl KeySpec {
    pub fn new(base: TranscendentalBase, seed_x: BigUint) -> Self {
        Self {
            base,
            seed_x,
            min_precision_bits: DEFAULT_MIN_PRECISION_BITS,
        }
    }

    pub fn with_min_precision(mut self, bits: u64) -> Self {
        self.min_precision_bits = bits.max(1);
        self
    }

    /// Builds a spec for a user-role key, refusing seeds reserved by the host.
    pub fn for_user(
        base: TranscendentalBase,
        seed_x: BigUint,
        reserved_host_seeds: &HashSet<BigUint>,
    ) -> Result<Self, KeystreamError> {
        let spec = Self::new(base, seed_x);
        spec.check(reserved_host_seeds)?;
        Ok(spec)
    }

    fn check(&self, reserved: &HashSet<BigUint>) -> Result<(), KeystreamError> {
        if self.seed_x.is_zero() {
            return Err(KeystreamError::InvalidSeed);
        }
        if reserved.contains(&self.seed_x) {
            return Err(KeystreamError::ReservedSeed);
        }
        debug_assert!(admissible_multiplier(&self.seed_x));
        Ok(())
    }
}

/// The multiplier may not equal `T`, `-T` or `1/T`. A positive integer never
/// equals an irrational or its inverse, so this reduces to `x >= 1`.
pub fn admissible_multiplier(x: &BigUint) -> bool {
    !x.is_zero()
}

/// Seed from identifier bytes `B` and a timestamp: `B * 2^64 + timestamp_ms`.
pub fn derive_seed(identifier: &[u8], timestamp_ms: u64) -> Result<BigUint, KeystreamError> {
    if identifier.is_empty() {
        return Err(KeystreamError::InvalidSeedMaterial);
    }
    Ok((BigUint::from_bytes_be(identifier) << 64u32) + timestamp_ms)
}

/// Builds a stream over `frac(seed_x * T)`, positioned at bit 0.
pub fn make_stream(
    spec: &KeySpec,
    reserved_host_seeds: &HashSet<BigUint>,
) -> Result<DigitStream, KeystreamError> {
    spec.check(reserved_host_seeds)?;
    Ok(DigitStream::unchecked(spec.clone()))
}

/// Sequential reader over the binary fraction digits of `frac(x * T)`.
///
/// Bits are materialized lazily. When the reader runs past the cached
/// prefix, the expansion is recomputed at twice the length and the prefix
/// already handed out is verified unchanged.
#[derive(Debug, Clone)]
pub struct DigitStream {
    spec: KeySpec,
    cursor: u64,
    bits: Vec<bool>,
    max_precision_bits: u64,
}

impl DigitStream {
    /// Stream for a spec with no reserved-seed restriction (host role).
    pub fn new(spec: &KeySpec) -> Result<Self, KeystreamError> {
        make_stream(spec, &HashSet::new())
    }

    fn unchecked(spec: KeySpec) -> Self {
        Self {
            spec,
            cursor: 0,
            bits: Vec::new(),
            max_precision_bits: DEFAULT_MAX_PRECISION_BITS,
        }
    }

    pub fn with_max_precision(mut self, bits: u64) -> Self {
        self.max_precision_bits = bits;
        self
    }

    pub fn spec(&self) -> &KeySpec {
        &self.spec
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    pub fn cached_precision(&self) -> u64 {
        self.bits.len() as u64
    }

    pub fn next_bits(&mut self, count: usize) -> Result<Vec<bool>, KeystreamError> {
        if count == 0 {
            return Err(KeystreamError::ZeroCount);
        }
        let end = self.cursor + count as u64;
        self.ensure(end)?;
        let out = self.bits[self.cursor as usize..end as usize].to_vec();
        self.cursor = end;
        Ok(out)
    }

    pub fn next_bit(&mut self) -> Result<bool, KeystreamError> {
        self.ensure(self.cursor + 1)?;
        let b = self.bits[self.cursor as usize];
        self.cursor += 1;
        Ok(b)
    }

    /// Reads `width` (at most 64) bits as a big-endian unsigned integer.
    pub fn next_uint(&mut self, width: u32) -> Result<u64, KeystreamError> {
        debug_assert!(width <= 64);
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | u64::from(self.next_bit()?);
        }
        Ok(v)
    }

    fn ensure(&mut self, needed: u64) -> Result<(), KeystreamError> {
        if needed <= self.bits.len() as u64 {
            return Ok(());
        }
        let target = needed
            .max(self.spec.min_precision_bits)
            .max(2 * self.bits.len() as u64);
        let target = if target > self.max_precision_bits {
            if needed > self.max_precision_bits {
                return Err(KeystreamError::PrecisionExhausted {
                    limit: self.max_precision_bits,
                });
            }
            self.max_precision_bits
        } else {
            target
        };
        let fresh = fraction_bits(&self.spec, target);
        if let Some(offset) = self.bits.iter().zip(&fresh).position(|(a, b)| a != b) {
            return Err(KeystreamError::PrecisionInconsistent {
                offset: offset as u64,
            });
        }
        self.bits = fresh;
        Ok(())
    }
}

/// First `n` binary fraction digits of `frac(x * T)`.
///
/// With `V` within 2 units of `T * 2^P`, `x * V` is within `2x < 2^(bits(x)+1)`
/// units of the true scaled product. The leading `n` fraction bits are only
/// trusted when the discarded tail stays that far away from a rounding
/// boundary; otherwise `P` grows and the product is recomputed.
fn fraction_bits(spec: &KeySpec, n: u64) -> Vec<bool> {
    let x = &spec.seed_x;
    let x_bits = x.bits();
    let mut extra = GUARD_BITS;
    loop {
        let prec = n + x_bits + extra;
        let v = constants::fixed_point(spec.base, prec);
        let product = x * v;
        let tail_bits = prec - n;
        let tail_mask = (BigUint::one() << tail_bits) - 1u32;
        let tail = &product & &tail_mask;
        let slack = BigUint::one() << (x_bits + 1);
        if tail >= slack && tail < &tail_mask + 1u32 - &slack {
            let frac_mask = (BigUint::one() << n) - 1u32;
            let head = (product >> tail_bits) & frac_mask;
            return unpack(&head, n);
        }
        extra *= 2;
    }
}

fn unpack(value: &BigUint, n: u64) -> Vec<bool> {
    let bytes = value.to_bytes_be();
    let total = bytes.len() as u64 * 8;
    let mut out = Vec::with_capacity(n as usize);
    // `value < 2^n`, so any bits above `n` in the byte image are zero.
    let lead = n.saturating_sub(total);
    out.extend(std::iter::repeat_n(false, lead as usize));
    let skip = total.saturating_sub(n);
    for i in skip..total {
        let byte = bytes[(i / 8) as usize];
        out.push(byte >> (7 - (i % 8)) & 1 == 1);
    }
    out
}
