//! Timestamp challenge-response login.
//!
//! ```text
//! user                                   host
//!  | -- LoginRequest{username} -------->  |  T_s = now, pick token t
//!  | <-------- Challenge{t, E(T_s)} ----  |  keep (username, T_s) until T_s + T_a
//!  |  recover T_s with identifier t       |
//!  | -- Response{r, E(password)} ------>  |  open with (identifier r, T_s),
//!  |                                      |  compare with the stored password,
//!  | <------------------ Verdict -------  |  forget the pending login
//! ```
//!
//! Identifiers never cross the wire; only their index does. The challenge is
//! sealed under `derive_seed(identifier[t], T_s / 86_400_000)` because the
//! user cannot know `T_s` before reading it. The response is sealed under
//! `derive_seed(identifier[r], T_s)`.

mod client;
mod frame;
mod host;
mod service;

use std::io;

use thiserror::Error;

use crate::keystream::{KeystreamError, TranscendentalBase, DEFAULT_MIN_PRECISION_BITS};
use crate::password_store::StoreError;
use crate::stego_codec::{Ciphertext, CodecError};

pub use client::{Client, UserCredentials};
pub use frame::{frame_decode, frame_encode, read_frame, write_frame, MAX_BODY_LEN};
pub use host::{Host, PendingLogin};
pub use service::{login_over_stream, serve, serve_connection, spawn_host, Clock, HostHandle, ManualClock, SystemClock};

pub const MS_PER_DAY: u64 = 86_400_000;
pub const DEFAULT_T_A_MS: u64 = 30_000;

pub fn epoch_day(ts_ms: u64) -> u64 {
    ts_ms / MS_PER_DAY
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("a login for `{0}` is already in progress")]
    LoginInProgress(String),
    #[error("no pending login for `{0}`")]
    NoPendingLogin(String),
    #[error("challenge cannot be decrypted with the local identifiers")]
    ChallengeUndecryptable,
    #[error("frame error: {0}")]
    Frame(String),
    #[error("unexpected message: {0}")]
    UnexpectedMessage(&'static str),
    #[error("host service stopped")]
    ServiceStopped,
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Keystream(#[from] KeystreamError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolConfig {
    /// Allowed time between challenge and response.
    pub t_a_ms: u64,
    /// Clients omit the token and the host tries every identifier.
    pub tokenless_mode: bool,
    pub use_fib: bool,
    /// Base of the user-role keys.
    pub user_base: TranscendentalBase,
    pub min_precision_bits: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            t_a_ms: DEFAULT_T_A_MS,
            tokenless_mode: false,
            use_fib: false,
            user_base: TranscendentalBase::Pi,
            min_precision_bits: DEFAULT_MIN_PRECISION_BITS,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.t_a_ms == 0 {
            return Err(ProtocolError::Config("t_a_ms must be positive"));
        }
        Ok(())
    }
}

/// Ciphertext plus the flag saying whether it carries the Fibonacci layer.
/// Travels as a `TEC1` frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedPayload {
    pub ciphertext: Ciphertext,
    pub use_fib: bool,
}

impl SealedPayload {
    pub fn to_file_bytes(&self) -> Vec<u8> {
        self.ciphertext.to_file_bytes(self.use_fib)
    }

    pub fn from_file_bytes(data: &[u8]) -> Result<Self, CodecError> {
        let (ciphertext, use_fib) = Ciphertext::from_file_bytes(data)?;
        Ok(Self { ciphertext, use_fib })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoginRequest {
    pub username: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Challenge {
    pub token: u16,
    pub enc_ts: SealedPayload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    /// `None` in tokenless mode.
    pub token: Option<u16>,
    pub enc_payload: SealedPayload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerdictReason {
    Accepted,
    BadCredentials,
    Expired,
    NoPendingLogin,
    UnknownUser,
    LoginInProgress,
    ProtocolViolation,
}

impl VerdictReason {
    pub fn code(self) -> u8 {
        match self {
            Self::Accepted => 0,
            Self::BadCredentials => 1,
            Self::Expired => 2,
            Self::NoPendingLogin => 3,
            Self::UnknownUser => 4,
            Self::LoginInProgress => 5,
            Self::ProtocolViolation => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Self::Accepted,
            1 => Self::BadCredentials,
            2 => Self::Expired,
            3 => Self::NoPendingLogin,
            4 => Self::UnknownUser,
            5 => Self::LoginInProgress,
            6 => Self::ProtocolViolation,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub ok: bool,
    pub reason: VerdictReason,
}

impl Verdict {
    pub fn accept() -> Self {
        Self {
            ok: true,
            reason: VerdictReason::Accepted,
        }
    }

    pub fn reject(reason: VerdictReason) -> Self {
        Self { ok: false, reason }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolMessage {
    LoginRequest(LoginRequest),
    Challenge(Challenge),
    Response(Response),
    Verdict(Verdict),
}

impl From<&ProtocolError> for VerdictReason {
    fn from(e: &ProtocolError) -> Self {
        match e {
            ProtocolError::UnknownUser(_) => Self::UnknownUser,
            ProtocolError::LoginInProgress(_) => Self::LoginInProgress,
            ProtocolError::NoPendingLogin(_) => Self::NoPendingLogin,
            _ => Self::ProtocolViolation,
        }
    }
}
