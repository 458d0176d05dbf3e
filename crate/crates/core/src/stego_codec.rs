//! Bit-insertion codec.
//!
//! Each plaintext byte becomes an `(8 + k)`-bit block, `k` in `{2, 3}`. The
//! keystream picks `k`, the `k` filler slots inside the block and the filler
//! values; the byte's bits fill the remaining slots most-significant first.
//! Blocks are concatenated and the last byte is zero padded.
//!
//! Per-byte key symbol layout, in stream order:
//!
//! ```text
//! 1 bit    c        k = 2 + c
//! 8 bits   r        slot set = lexicographic unrank of r mod C(8 + k, k)
//! k bits   fillers
//! ```

use num_integer::binomial;
use thiserror::Error;

use crate::bits::{get_bit, pack_bits, unpack_bits, BitWriter};
use crate::fib_coding::{self, FibError};
use crate::keystream::{DigitStream, KeySpec, KeystreamError};

pub const FILE_MAGIC: &[u8; 4] = b"TEC1";
pub const FLAG_FIB: u8 = 0x01;
const FILE_HEADER_LEN: usize = 4 + 1 + 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("plan covers {plan} bytes but plaintext has {data}")]
    PlanMismatch { plan: usize, data: usize },
    #[error("ciphertext holds {actual} bits, key expects {expected}")]
    CiphertextTruncated { expected: u64, actual: u64 },
    #[error("non-zero padding after the last block")]
    MalformedPadding,
    #[error("filler bit in block {block} does not match the key")]
    FillerMismatch { block: usize },
    #[error("invalid insertion plan: {0}")]
    InvalidPlan(&'static str),
    #[error("ciphertext file: {0}")]
    Format(&'static str),
    #[error(transparent)]
    Fib(#[from] FibError),
    #[error(transparent)]
    Keystream(#[from] KeystreamError),
}

/// Insertion record for one plaintext byte.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ByteInsertion {
    pub k: u8,
    /// Strictly increasing slot indices in `[0, 8 + k)`.
    pub positions: Vec<u8>,
    pub fillers: Vec<bool>,
}

impl ByteInsertion {
    pub fn block_len(&self) -> u64 {
        8 + u64::from(self.k)
    }

    fn validate(&self) -> Result<(), CodecError> {
        if !(2..=3).contains(&self.k) {
            return Err(CodecError::InvalidPlan("k must be 2 or 3"));
        }
        let k = self.k as usize;
        if self.positions.len() != k || self.fillers.len() != k {
            return Err(CodecError::InvalidPlan("position/filler count differs from k"));
        }
        if !self.positions.windows(2).all(|w| w[0] < w[1]) {
            return Err(CodecError::InvalidPlan("positions must be strictly increasing"));
        }
        if self.positions.iter().any(|&p| u64::from(p) >= self.block_len()) {
            return Err(CodecError::InvalidPlan("position outside block"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct InsertionPlan {
    pub per_byte: Vec<ByteInsertion>,
}

impl InsertionPlan {
    pub fn len(&self) -> usize {
        self.per_byte.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_byte.is_empty()
    }

    pub fn inserted_bits(&self) -> u64 {
        self.per_byte.iter().map(|r| u64::from(r.k)).sum()
    }

    /// `sum(8 + k_i)`.
    pub fn total_bits(&self) -> u64 {
        self.per_byte.iter().map(ByteInsertion::block_len).sum()
    }

    /// Keystream bits the plan consumed: `sum(9 + k_i)`.
    pub fn key_bits(&self) -> u64 {
        self.per_byte.iter().map(|r| 9 + u64::from(r.k)).sum()
    }
}

/// Bit buffer with an explicit meaningful length.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Ciphertext {
    bytes: Vec<u8>,
    bit_len: u64,
}

impl Ciphertext {
    /// Wraps raw bytes; only the byte count is checked against `bit_len`.
    pub fn from_raw(bytes: Vec<u8>, bit_len: u64) -> Result<Self, CodecError> {
        let want = bit_len.div_ceil(8);
        if bytes.len() as u64 != want {
            return Err(CodecError::CiphertextTruncated {
                expected: bytes.len() as u64 * 8,
                actual: bit_len,
            });
        }
        Ok(Self { bytes, bit_len })
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    pub fn pad_bits(&self) -> u64 {
        (8 - self.bit_len % 8) % 8
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit(&self, index: u64) -> bool {
        get_bit(&self.bytes, index)
    }

    fn padding_is_zero(&self) -> bool {
        (self.bit_len..self.bytes.len() as u64 * 8).all(|i| !self.bit(i))
    }

    /// `TEC1` framing: magic, flags byte, big-endian `bit_len`, payload.
    pub fn to_file_bytes(&self, use_fib: bool) -> Vec<u8> {
        let mut out = Vec::with_capacity(FILE_HEADER_LEN + self.bytes.len());
        out.extend_from_slice(FILE_MAGIC);
        out.push(if use_fib { FLAG_FIB } else { 0 });
        out.extend_from_slice(&self.bit_len.to_be_bytes());
        out.extend_from_slice(&self.bytes);
        out
    }

    /// Parses a `TEC1` frame, returning the ciphertext and the fib flag.
    pub fn from_file_bytes(data: &[u8]) -> Result<(Self, bool), CodecError> {
        if data.len() < FILE_HEADER_LEN {
            return Err(CodecError::Format("shorter than header"));
        }
        if &data[..4] != FILE_MAGIC {
            return Err(CodecError::Format("bad magic"));
        }
        let flags = data[4];
        if flags & !FLAG_FIB != 0 {
            return Err(CodecError::Format("unknown flag bits"));
        }
        let bit_len = u64::from_be_bytes(data[5..13].try_into().expect("8 bytes"));
        let payload = &data[FILE_HEADER_LEN..];
        if payload.len() as u64 != bit_len.div_ceil(8) {
            return Err(CodecError::Format("payload length disagrees with bit length"));
        }
        let ct = Self {
            bytes: payload.to_vec(),
            bit_len,
        };
        if !ct.padding_is_zero() {
            return Err(CodecError::MalformedPadding);
        }
        Ok((ct, flags & FLAG_FIB != 0))
    }
}

/// The `rank`-th `k`-subset of `[0, n)` in lexicographic order.
pub fn unrank_subset(n: u32, k: u32, mut rank: u64) -> Vec<u8> {
    debug_assert!(rank < binomial(u64::from(n), u64::from(k)));
    let mut out = Vec::with_capacity(k as usize);
    let mut next = 0u32;
    for slot in 0..k {
        let remaining = k - slot - 1;
        loop {
            let with_next = binomial(u64::from(n - next - 1), u64::from(remaining));
            if rank < with_next {
                break;
            }
            rank -= with_next;
            next += 1;
        }
        out.push(next as u8);
        next += 1;
    }
    out
}

/// Every `k`-subset of `[0, n)` in lexicographic order.
pub fn all_subsets(n: u32, k: u32) -> Vec<Vec<u8>> {
    let total = binomial(u64::from(n), u64::from(k));
    (0..total).map(|r| unrank_subset(n, k, r)).collect()
}

/// Builds one record from its key symbol: count bit, rank byte, fillers.
pub fn record_from_symbol(count_bit: bool, rank_byte: u8, fillers: Vec<bool>) -> ByteInsertion {
    let k = 2 + u8::from(count_bit);
    let n = 8 + u32::from(k);
    let rank = u64::from(rank_byte) % binomial(u64::from(n), u64::from(k));
    debug_assert_eq!(fillers.len(), k as usize);
    ByteInsertion {
        k,
        positions: unrank_subset(n, u32::from(k), rank),
        fillers,
    }
}

fn draw_record(stream: &mut DigitStream) -> Result<ByteInsertion, CodecError> {
    let count_bit = stream.next_bit()?;
    let rank_byte = stream.next_uint(8)? as u8;
    let fillers = stream.next_bits(2 + usize::from(count_bit))?;
    Ok(record_from_symbol(count_bit, rank_byte, fillers))
}

pub fn plan_from_stream(stream: &mut DigitStream, n_bytes: usize) -> Result<InsertionPlan, CodecError> {
    let per_byte = (0..n_bytes)
        .map(|_| draw_record(stream))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(InsertionPlan { per_byte })
}

/// Draws records until their blocks cover exactly `bit_len` bits.
fn plan_for_bit_len(stream: &mut DigitStream, bit_len: u64) -> Result<InsertionPlan, CodecError> {
    let mut plan = InsertionPlan::default();
    let mut covered = 0u64;
    while covered < bit_len {
        let rec = draw_record(stream)?;
        covered += rec.block_len();
        plan.per_byte.push(rec);
    }
    if covered != bit_len {
        return Err(CodecError::CiphertextTruncated {
            expected: covered,
            actual: bit_len,
        });
    }
    Ok(plan)
}

pub fn encode(plaintext: &[u8], plan: &InsertionPlan) -> Result<Ciphertext, CodecError> {
    if plaintext.len() != plan.len() {
        return Err(CodecError::PlanMismatch {
            plan: plan.len(),
            data: plaintext.len(),
        });
    }
    let mut w = BitWriter::with_capacity_bits(plan.total_bits() as usize);
    for (&byte, rec) in plaintext.iter().zip(&plan.per_byte) {
        rec.validate()?;
        let mut data_bit = 0u32;
        let mut filler = 0usize;
        for slot in 0..rec.block_len() as u8 {
            if rec.positions.get(filler) == Some(&slot) {
                w.push(rec.fillers[filler]);
                filler += 1;
            } else {
                w.push(byte >> (7 - data_bit) & 1 == 1);
                data_bit += 1;
            }
        }
    }
    let (bytes, bit_len) = w.into_bytes();
    Ok(Ciphertext { bytes, bit_len })
}

/// Inverse of [`encode`]. Filler slots must hold the plan's filler bits, so any
/// ciphertext outside the image of `encode` under `plan` is rejected.
pub fn decode(ct: &Ciphertext, plan: &InsertionPlan) -> Result<Vec<u8>, CodecError> {
    let expected = plan.total_bits();
    if ct.bit_len != expected {
        return Err(CodecError::CiphertextTruncated {
            expected,
            actual: ct.bit_len,
        });
    }
    if !ct.padding_is_zero() {
        return Err(CodecError::MalformedPadding);
    }
    let mut out = Vec::with_capacity(plan.len());
    let mut at = 0u64;
    for (block, rec) in plan.per_byte.iter().enumerate() {
        rec.validate()?;
        let mut byte = 0u8;
        let mut filler = 0usize;
        for slot in 0..rec.block_len() as u8 {
            if rec.positions.get(filler) == Some(&slot) {
                if ct.bit(at) != rec.fillers[filler] {
                    return Err(CodecError::FillerMismatch { block });
                }
                filler += 1;
            } else {
                byte = (byte << 1) | u8::from(ct.bit(at));
            }
            at += 1;
        }
        out.push(byte);
    }
    Ok(out)
}

/// The bytes actually fed to the inserter: the plaintext, or its Fibonacci
/// code regrouped into zero-padded bytes.
pub fn codec_input(plaintext: &[u8], use_fib: bool) -> Vec<u8> {
    if use_fib {
        pack_bits(&fib_coding::fib_encode_bytes(plaintext))
    } else {
        plaintext.to_vec()
    }
}

pub fn seal(plaintext: &[u8], spec: &KeySpec, use_fib: bool) -> Result<Ciphertext, CodecError> {
    let input = codec_input(plaintext, use_fib);
    let mut stream = DigitStream::new(spec)?;
    let plan = plan_from_stream(&mut stream, input.len())?;
    encode(&input, &plan)
}

pub fn open(ct: &Ciphertext, spec: &KeySpec, use_fib: bool) -> Result<Vec<u8>, CodecError> {
    let mut stream = DigitStream::new(spec)?;
    let plan = plan_for_bit_len(&mut stream, ct.bit_len)?;
    let inner = decode(ct, &plan)?;
    if use_fib {
        let bits = unpack_bits(&inner, inner.len() as u64 * 8);
        Ok(fib_coding::fib_decode_bytes(&bits)?)
    } else {
        Ok(inner)
    }
}
