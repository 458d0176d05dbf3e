//! Bit-insertion steganographic codec keyed by transcendental digit streams.
//!
//! The crate is split by concern:
//!
//! - [`keystream`]: seeds and digit streams over `frac(x * T)`.
//! - [`stego_codec`]: filler-bit insertion and removal, `TEC1` files.
//! - [`fib_coding`]: Fibonacci coding used as an optional pre-layer.
//! - [`password_store`]: enrollment and the `TECP` password file.
//! - [`protocol`]: the timestamp challenge-response login and its wire frames.
//! - [`cryptanalysis`]: try-count models, exhaustive candidate enumeration,
//!   dictionary attacks, password policy and digit statistics.
//! - [`cli`]: the `tec` command line.

pub mod bits;
pub mod cli;
pub mod cryptanalysis;
pub mod fib_coding;
pub mod keystream;
pub mod password_store;
pub mod protocol;
pub mod stego_codec;
mod wire;

pub use keystream::{derive_seed, make_stream, DigitStream, KeySpec, KeystreamError, TranscendentalBase};
pub use stego_codec::{decode, encode, open, plan_from_stream, seal, Ciphertext, CodecError, InsertionPlan};
