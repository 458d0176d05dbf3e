//! Fixed-point evaluation of the base transcendentals.
//!
//! Every routine returns `V` with `|V - T * 2^prec| < 2`. Series are summed with
//! [`GUARD_BITS`] extra bits and truncated at the end, which keeps the per-term
//! truncation error below one unit in the last returned place.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigUint;
use num_traits::Zero;

use super::TranscendentalBase;

const GUARD_BITS: u64 = 64;

/// `floor(2^scale / n)`-scaled arctangent of `1/n`, split into positive and negative
/// partial sums so everything stays unsigned.
fn arctan_inv(n: u32, scale: u64) -> BigUint {
    let n2 = BigUint::from(n) * n;
    let mut power: BigUint = (BigUint::from(1u8) << scale) / n;
    let mut pos = BigUint::zero();
    let mut neg = BigUint::zero();
    let mut k: u64 = 0;
    while !power.is_zero() {
        let term = &power / (2 * k + 1);
        if k.is_multiple_of(2) {
            pos += term;
        } else {
            neg += term;
        }
        power /= &n2;
        k += 1;
    }
    pos - neg
}

/// Machin: pi = 16 atan(1/5) - 4 atan(1/239).
fn pi_fixed(prec: u64) -> BigUint {
    let scale = prec + GUARD_BITS;
    let v = (arctan_inv(5, scale) << 4u32) - (arctan_inv(239, scale) << 2u32);
    v >> GUARD_BITS
}

/// e = sum 1/k!.
fn e_fixed(prec: u64) -> BigUint {
    let scale = prec + GUARD_BITS;
    let mut term: BigUint = BigUint::from(1u8) << scale;
    let mut sum = BigUint::zero();
    let mut k: u64 = 1;
    while !term.is_zero() {
        sum += &term;
        term /= k;
        k += 1;
    }
    sum >> GUARD_BITS
}

/// ln 2 = 2 atanh(1/3) = sum 2 / ((2k+1) 3^(2k+1)).
fn ln2_fixed(prec: u64) -> BigUint {
    let scale = prec + GUARD_BITS;
    let mut power: BigUint = (BigUint::from(1u8) << (scale + 1)) / 3u32;
    let mut sum = BigUint::zero();
    let mut k: u64 = 0;
    while !power.is_zero() {
        sum += &power / (2 * k + 1);
        power /= 9u32;
        k += 1;
    }
    sum >> GUARD_BITS
}

fn compute(base: TranscendentalBase, prec: u64) -> BigUint {
    match base {
        TranscendentalBase::Pi => pi_fixed(prec),
        TranscendentalBase::E => e_fixed(prec),
        TranscendentalBase::Ln2 => ln2_fixed(prec),
    }
}

struct Cached {
    prec: u64,
    value: BigUint,
}

fn cache() -> &'static Mutex<HashMap<TranscendentalBase, Cached>> {
    static CACHE: OnceLock<Mutex<HashMap<TranscendentalBase, Cached>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `T * 2^prec` to within two units, served from a process-wide cache.
///
/// A cached value at higher precision is shifted down; the shift only adds
/// truncation below one unit, so the error bound is preserved.
pub(crate) fn fixed_point(base: TranscendentalBase, prec: u64) -> BigUint {
    let mut guard = cache().lock().unwrap_or_else(|e| e.into_inner());
    if let Some(c) = guard.get(&base) {
        if c.prec >= prec {
            return &c.value >> (c.prec - prec);
        }
    }
    let target = guard
        .get(&base)
        .map(|c| prec.max(c.prec.saturating_mul(2)))
        .unwrap_or(prec);
    let value = compute(base, target);
    let out = &value >> (target - prec);
    guard.insert(base, Cached { prec: target, value });
    out
}
