//! Attack harness: try-count models, exhaustive candidate enumeration,
//! false-positive measurement, dictionary attacks, password policy and a
//! digit-balance diagnostic for keystreams.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use num_bigint::BigUint;
use num_integer::binomial;
use num_traits::{One, Pow};
use rayon::prelude::*;
use thiserror::Error;

use crate::bits::unpack_bits;
use crate::fib_coding;
use crate::keystream::{DigitStream, KeySpec, KeystreamError};
use crate::password_store::UserRecord;
use crate::stego_codec::{all_subsets, seal, Ciphertext, CodecError};

/// Largest message the exhaustive enumerator accepts.
pub const MAX_ENUMERATION_BYTES: usize = 3;

/// Smallest sample accepted by [`digit_distribution`].
pub const MIN_DISTRIBUTION_BITS: u64 = 1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("enumeration is limited to {MAX_ENUMERATION_BYTES} bytes, got {0}")]
    TooManyBytes(usize),
    #[error("bit length {bit_len} cannot encode {n_bytes} bytes")]
    NotDecodable { bit_len: u64, n_bytes: usize },
    #[error("digit distribution needs at least {MIN_DISTRIBUTION_BITS} bits, got {0}")]
    TooFewBits(u64),
    #[error(transparent)]
    Keystream(#[from] KeystreamError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TryCountModel {
    /// `4^n`: two inserted bits per byte, counted as `2^2` tries.
    PaperMin,
    /// `8^n`: three inserted bits per byte, counted as `2^3` tries.
    PaperMax,
    /// Number of slot sets an attacker must try. With known `k_i` this is
    /// `prod C(8 + k_i, k_i)`; with unknown `k` it is `(45 + 165)^n`.
    ExactPositions(Option<Vec<u8>>),
}

pub fn paper_try_count(n_chars: u64, model: &TryCountModel) -> BigUint {
    match model {
        TryCountModel::PaperMin => BigUint::from(4u8).pow(n_chars),
        TryCountModel::PaperMax => BigUint::from(8u8).pow(n_chars),
        TryCountModel::ExactPositions(None) => {
            let per_byte = binomial(10u32, 2) + binomial(11u32, 3);
            BigUint::from(per_byte).pow(n_chars)
        }
        TryCountModel::ExactPositions(Some(ks)) => ks
            .iter()
            .map(|&k| BigUint::from(binomial(8 + u64::from(k), u64::from(k))))
            .fold(BigUint::one(), |acc, c| acc * c),
    }
}

/// The multiplicative reading `(2^2) * n` and `(2^3) * n` of the same bounds.
pub fn multiplicative_try_count(n_chars: u64) -> (u64, u64) {
    (4 * n_chars, 8 * n_chars)
}

/// Plaintexts consistent with a ciphertext, in sorted order, and the number
/// of decode attempts (before deduplication) it took to find them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateSet {
    pub candidates: BTreeSet<Vec<u8>>,
    pub enumerated: u64,
}

/// All `k`-assignments in `{2, 3}^n` whose blocks sum to `bit_len`.
pub fn k_assignments(bit_len: u64, n_bytes: usize) -> Vec<Vec<u8>> {
    let total_k = match bit_len.checked_sub(8 * n_bytes as u64) {
        Some(t) => t,
        None => return Vec::new(),
    };
    let mut out = Vec::new();
    for mask in 0u32..(1 << n_bytes) {
        let ks: Vec<u8> = (0..n_bytes).map(|i| 2 + (mask >> i & 1) as u8).collect();
        if ks.iter().map(|&k| u64::from(k)).sum::<u64>() == total_k {
            out.push(ks);
        }
    }
    out
}

/// Byte recovered from a block by deleting the slots in `fillers`.
fn strip_block(ct: &Ciphertext, offset: u64, block_len: u8, fillers: &[u8]) -> u8 {
    let mut byte = 0u8;
    let mut f = 0usize;
    for slot in 0..block_len {
        if fillers.get(f) == Some(&slot) {
            f += 1;
        } else {
            byte = (byte << 1) | u8::from(ct.bit(offset + u64::from(slot)));
        }
    }
    byte
}

fn candidates_for_assignment(ct: &Ciphertext, ks: &[u8]) -> (BTreeSet<Vec<u8>>, u64) {
    let mut per_byte: Vec<Vec<u8>> = Vec::with_capacity(ks.len());
    let mut offset = 0u64;
    for &k in ks {
        let n = 8 + k;
        let choices = all_subsets(u32::from(n), u32::from(k))
            .iter()
            .map(|slots| strip_block(ct, offset, n, slots))
            .collect();
        per_byte.push(choices);
        offset += u64::from(n);
    }
    let attempts = per_byte.iter().map(|c| c.len() as u64).product();
    let mut found = BTreeSet::new();
    let mut current = Vec::with_capacity(ks.len());
    cartesian(&per_byte, &mut current, &mut found);
    (found, attempts)
}

fn cartesian(per_byte: &[Vec<u8>], current: &mut Vec<u8>, out: &mut BTreeSet<Vec<u8>>) {
    match per_byte.split_first() {
        None => {
            out.insert(current.clone());
        }
        Some((head, rest)) => {
            for &b in head {
                current.push(b);
                cartesian(rest, current, out);
                current.pop();
            }
        }
    }
}

/// Exhaustively tries every `k`-assignment and every slot set.
///
/// `n_bytes` counts bytes at the inserter's input. With `use_fib` the stripped
/// bytes are additionally Fibonacci-decoded and undecodable ones dropped.
pub fn enumerate_candidates(
    ct: &Ciphertext,
    n_bytes: usize,
    use_fib: bool,
) -> Result<CandidateSet, AnalysisError> {
    if n_bytes > MAX_ENUMERATION_BYTES {
        return Err(AnalysisError::TooManyBytes(n_bytes));
    }
    let padding_clean = (ct.bit_len()..ct.as_bytes().len() as u64 * 8).all(|i| !ct.bit(i));
    let assignments = k_assignments(ct.bit_len(), n_bytes);
    if assignments.is_empty() || !padding_clean {
        return Err(AnalysisError::NotDecodable {
            bit_len: ct.bit_len(),
            n_bytes,
        });
    }
    let (raw, enumerated) = assignments
        .par_iter()
        .map(|ks| candidates_for_assignment(ct, ks))
        .reduce(
            || (BTreeSet::new(), 0u64),
            |(mut a, na), (b, nb)| {
                a.extend(b);
                (a, na + nb)
            },
        );
    let candidates = if use_fib {
        raw.into_iter()
            .filter_map(|bytes| {
                let bits = unpack_bits(&bytes, bytes.len() as u64 * 8);
                fib_coding::fib_decode_bytes(&bits).ok()
            })
            .collect()
    } else {
        raw
    };
    Ok(CandidateSet {
        candidates,
        enumerated,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validator {
    /// Every byte in `0x20..=0x7E`.
    PrintableAscii,
    Wordlist(HashSet<Vec<u8>>),
}

impl Validator {
    pub fn accepts(&self, candidate: &[u8]) -> bool {
        match self {
            Validator::PrintableAscii => candidate.iter().all(|b| (0x20..=0x7E).contains(b)),
            Validator::Wordlist(words) => words.contains(candidate),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Validator::PrintableAscii => "printable_ascii",
            Validator::Wordlist(_) => "wordlist",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FalsePositiveReport {
    pub total: u64,
    pub valid: u64,
    pub contains_truth: bool,
}

impl FalsePositiveReport {
    /// More than one plausible plaintext: the attacker cannot single out the truth.
    pub fn ambiguous(&self) -> bool {
        self.valid > 1
    }
}

pub fn false_positive_report(
    cs: &CandidateSet,
    validator: &Validator,
    truth: Option<&[u8]>,
) -> FalsePositiveReport {
    let valid = cs.candidates.iter().filter(|c| validator.accepts(c)).count() as u64;
    FalsePositiveReport {
        total: cs.candidates.len() as u64,
        valid,
        contains_truth: truth.is_some_and(|t| cs.candidates.contains(t)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DictionaryMatch {
    pub word_index: usize,
    pub spec_index: usize,
}

/// Seals every word under every hypothesised spec and keeps bit-exact matches.
pub fn dictionary_attack_ciphertext(
    target: &Ciphertext,
    use_fib: bool,
    wordlist: &[Vec<u8>],
    spec_hypotheses: &[KeySpec],
) -> Vec<DictionaryMatch> {
    let mut hits: Vec<DictionaryMatch> = spec_hypotheses
        .par_iter()
        .enumerate()
        .flat_map_iter(|(spec_index, spec)| {
            wordlist.iter().enumerate().filter_map(move |(word_index, word)| {
                match seal(word, spec, use_fib) {
                    Ok(ct) if &ct == target => Some(DictionaryMatch {
                        word_index,
                        spec_index,
                    }),
                    _ => None,
                }
            })
        })
        .collect();
    hits.sort_by_key(|m| (m.word_index, m.spec_index));
    hits
}

pub fn dictionary_attack(
    record: &UserRecord,
    wordlist: &[Vec<u8>],
    spec_hypotheses: &[KeySpec],
) -> Vec<DictionaryMatch> {
    dictionary_attack_ciphertext(&record.ciphertext, record.use_fib, wordlist, spec_hypotheses)
}

/// Password selection rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PasswordPolicy {
    pub min_len: usize,
    pub max_len: usize,
    pub require_upper: bool,
    pub require_lower: bool,
    pub require_digit: bool,
    /// Any byte that is not an ASCII letter or digit counts as special.
    pub require_special: bool,
    /// Names and other known strings; matched ASCII case-insensitively.
    pub banned_substrings: Vec<Vec<u8>>,
    /// Longest allowed run of consecutive digits (dates, phone numbers).
    pub max_digit_run: Option<usize>,
}

impl Default for PasswordPolicy {
    fn default() -> Self {
        Self {
            min_len: 8,
            max_len: 64,
            require_upper: true,
            require_lower: true,
            require_digit: true,
            require_special: true,
            banned_substrings: Vec::new(),
            max_digit_run: Some(5),
        }
    }
}

impl PasswordPolicy {
    /// Only the length bounds.
    pub fn length_only(min_len: usize, max_len: usize) -> Self {
        Self {
            min_len,
            max_len,
            require_upper: false,
            require_lower: false,
            require_digit: false,
            require_special: false,
            banned_substrings: Vec::new(),
            max_digit_run: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyViolation {
    /// The policy itself has `min_len > max_len`.
    InvalidPolicy,
    TooShort { len: usize, min: usize },
    TooLong { len: usize, max: usize },
    MissingUpper,
    MissingLower,
    MissingDigit,
    MissingSpecial,
    BannedSubstring(Vec<u8>),
    DigitRun { len: usize, max: usize },
}

impl fmt::Display for PolicyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidPolicy => write!(f, "policy minimum length exceeds maximum"),
            Self::TooShort { len, min } => write!(f, "length {len} below minimum {min}"),
            Self::TooLong { len, max } => write!(f, "length {len} above maximum {max}"),
            Self::MissingUpper => write!(f, "needs an upper-case letter"),
            Self::MissingLower => write!(f, "needs a lower-case letter"),
            Self::MissingDigit => write!(f, "needs a digit"),
            Self::MissingSpecial => write!(f, "needs a special character"),
            Self::BannedSubstring(s) => {
                write!(f, "contains banned text `{}`", String::from_utf8_lossy(s))
            }
            Self::DigitRun { len, max } => {
                write!(f, "{len} consecutive digits (at most {max} allowed)")
            }
        }
    }
}

pub fn check_policy(password: &[u8], policy: &PasswordPolicy) -> Vec<PolicyViolation> {
    let mut out = Vec::new();
    if policy.min_len > policy.max_len {
        out.push(PolicyViolation::InvalidPolicy);
    }
    let len = password.len();
    if len < policy.min_len {
        out.push(PolicyViolation::TooShort { len, min: policy.min_len });
    }
    if len > policy.max_len {
        out.push(PolicyViolation::TooLong { len, max: policy.max_len });
    }
    if policy.require_upper && !password.iter().any(u8::is_ascii_uppercase) {
        out.push(PolicyViolation::MissingUpper);
    }
    if policy.require_lower && !password.iter().any(u8::is_ascii_lowercase) {
        out.push(PolicyViolation::MissingLower);
    }
    if policy.require_digit && !password.iter().any(u8::is_ascii_digit) {
        out.push(PolicyViolation::MissingDigit);
    }
    if policy.require_special && password.iter().all(u8::is_ascii_alphanumeric) {
        out.push(PolicyViolation::MissingSpecial);
    }
    let lowered = password.to_ascii_lowercase();
    for banned in &policy.banned_substrings {
        let needle = banned.to_ascii_lowercase();
        if !needle.is_empty() && lowered.windows(needle.len()).any(|w| w == needle.as_slice()) {
            out.push(PolicyViolation::BannedSubstring(banned.clone()));
        }
    }
    if let Some(max) = policy.max_digit_run {
        let longest = password
            .split(|b| !b.is_ascii_digit())
            .map(<[u8]>::len)
            .max()
            .unwrap_or(0);
        if longest > max {
            out.push(PolicyViolation::DigitRun { len: longest, max });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitDistribution {
    pub n_bits: u64,
    pub zeros: u64,
    pub ones: u64,
    /// Pearson chi-square against a fair coin, one degree of freedom.
    pub chi_square: f64,
}

pub fn digit_distribution(spec: &KeySpec, n_bits: u64) -> Result<DigitDistribution, AnalysisError> {
    if n_bits < MIN_DISTRIBUTION_BITS {
        return Err(AnalysisError::TooFewBits(n_bits));
    }
    let mut stream = DigitStream::new(&spec.clone().with_min_precision(n_bits))?;
    let bits = stream.next_bits(n_bits as usize)?;
    let ones = bits.iter().filter(|&&b| b).count() as u64;
    let zeros = n_bits - ones;
    let expected = n_bits as f64 / 2.0;
    let chi_square =
        ((zeros as f64 - expected).powi(2) + (ones as f64 - expected).powi(2)) / expected;
    Ok(DigitDistribution {
        n_bits,
        zeros,
        ones,
        chi_square,
    })
}
