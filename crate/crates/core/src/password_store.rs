//! Host-side password file.
//!
//! Each record keeps the user's identifiers and the password sealed under a
//! host key. The host key's multiplier combines the enrollment identifier,
//! the enrollment timestamp and the host secret:
//!
//! ```text
//! user_seed = derive_seed(identifiers[0], enroll_timestamp_ms)
//! seed_x    = user_seed * 2^64 + (host_secret mod 2^64)
//! ```
//!
//! The host secret never enters the file.
//!
//! File layout (`TECP`, all integers big-endian):
//!
//! ```text
//! "TECP" | version u8 = 1 | record count u32
//! record: username      u16 len + bytes
//!         identifiers   u16 count, each: label u16 len + bytes, value u16 len + bytes
//!         enroll index  u16
//!         enroll ts ms  u64
//!         ciphertext    u16 len + TEC1 frame (flag bit 0 = Fibonacci layer)
//! ```

use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use thiserror::Error;

use crate::cryptanalysis::{check_policy, PasswordPolicy, PolicyViolation};
use crate::keystream::{derive_seed, KeySpec, KeystreamError, TranscendentalBase, DEFAULT_MIN_PRECISION_BITS};
use crate::stego_codec::{open, seal, Ciphertext, CodecError};
use crate::wire::{put_bytes16, Reader};

pub const STORE_MAGIC: &[u8; 4] = b"TECP";
pub const STORE_VERSION: u8 = 0x01;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("user `{0}` already enrolled")]
    DuplicateUser(String),
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("password rejected by policy: {}", join(.0))]
    PolicyViolation(Vec<PolicyViolation>),
    #[error("at least one identifier is required")]
    NoIdentifiers,
    #[error("invalid identifier: {0}")]
    InvalidIdentifier(&'static str),
    #[error("invalid username")]
    InvalidUsername,
    #[error("store file corrupt: {0}")]
    StoreCorrupt(String),
    #[error(transparent)]
    Keystream(#[from] KeystreamError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("store i/o: {0}")]
    Io(#[from] io::Error),
}

fn join(v: &[PolicyViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// A secret answer the user supplied, referenced on the wire only by index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Identifier {
    pub label: String,
    pub value: Vec<u8>,
}

impl Identifier {
    pub fn new(label: impl Into<String>, value: impl Into<Vec<u8>>) -> Self {
        Self {
            label: label.into(),
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub username: String,
    pub identifiers: Vec<Identifier>,
    pub enroll_identifier_index: u16,
    pub enroll_timestamp_ms: u64,
    pub ciphertext: Ciphertext,
    pub use_fib: bool,
}

/// Host-side key material and enrollment settings.
#[derive(Debug, Clone)]
pub struct HostConfig {
    pub base: TranscendentalBase,
    pub secret: BigUint,
    pub use_fib: bool,
    pub policy: PasswordPolicy,
    pub min_precision_bits: u64,
}

impl HostConfig {
    pub fn new(secret: BigUint) -> Self {
        Self {
            base: TranscendentalBase::E,
            secret,
            use_fib: false,
            policy: PasswordPolicy::default(),
            min_precision_bits: DEFAULT_MIN_PRECISION_BITS,
        }
    }

    pub fn host_seed(&self, identifier: &[u8], timestamp_ms: u64) -> Result<BigUint, KeystreamError> {
        let user_seed = derive_seed(identifier, timestamp_ms)?;
        let low = &self.secret & BigUint::from(u64::MAX);
        Ok((user_seed << 64u32) + low)
    }

    pub fn record_spec(&self, record: &UserRecord) -> Result<KeySpec, StoreError> {
        let id = record
            .identifiers
            .get(usize::from(record.enroll_identifier_index))
            .ok_or_else(|| StoreError::StoreCorrupt("enroll index out of range".into()))?;
        let seed = self.host_seed(&id.value, record.enroll_timestamp_ms)?;
        Ok(KeySpec::new(self.base, seed).with_min_precision(self.min_precision_bits))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PasswordStore {
    pub version: u8,
    records: Vec<UserRecord>,
}

impl Default for PasswordStore {
    fn default() -> Self {
        Self::new()
    }
}

/// Equality that inspects every byte regardless of where the first mismatch is.
pub fn bytes_equal(a: &[u8], b: &[u8]) -> bool {
    let mut diff = (a.len() ^ b.len()) as u64;
    for i in 0..a.len().max(b.len()) {
        let x = a.get(i).copied().unwrap_or(0);
        let y = b.get(i).copied().unwrap_or(0);
        diff |= u64::from(x ^ y);
    }
    diff == 0
}

fn validate_identifiers(identifiers: &[Identifier]) -> Result<(), StoreError> {
    if identifiers.is_empty() {
        return Err(StoreError::NoIdentifiers);
    }
    if identifiers.len() > usize::from(u16::MAX) {
        return Err(StoreError::InvalidIdentifier("too many identifiers"));
    }
    let mut labels = HashSet::new();
    for id in identifiers {
        if id.value.is_empty() {
            return Err(StoreError::InvalidIdentifier("empty value"));
        }
        if id.value.len() > usize::from(u16::MAX) || id.label.len() > usize::from(u16::MAX) {
            return Err(StoreError::InvalidIdentifier("field too long"));
        }
        if !labels.insert(id.label.as_str()) {
            return Err(StoreError::InvalidIdentifier("duplicate label"));
        }
    }
    Ok(())
}

impl PasswordStore {
    pub fn new() -> Self {
        Self {
            version: STORE_VERSION,
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[UserRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, username: &str) -> Option<&UserRecord> {
        self.records.iter().find(|r| r.username == username)
    }

    pub fn enroll(
        &mut self,
        host: &HostConfig,
        username: &str,
        password: &[u8],
        identifiers: Vec<Identifier>,
        now_ms: u64,
    ) -> Result<&UserRecord, StoreError> {
        if username.is_empty() || username.len() > usize::from(u16::MAX) {
            return Err(StoreError::InvalidUsername);
        }
        if self.get(username).is_some() {
            return Err(StoreError::DuplicateUser(username.to_owned()));
        }
        let violations = check_policy(password, &host.policy);
        if !violations.is_empty() {
            return Err(StoreError::PolicyViolation(violations));
        }
        validate_identifiers(&identifiers)?;
        let mut record = UserRecord {
            username: username.to_owned(),
            identifiers,
            enroll_identifier_index: 0,
            enroll_timestamp_ms: now_ms,
            ciphertext: Ciphertext::default(),
            use_fib: host.use_fib,
        };
        let spec = host.record_spec(&record)?;
        record.ciphertext = seal(password, &spec, host.use_fib)?;
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    /// Decrypts the stored password with the host key.
    pub fn recover_password(&self, username: &str, host: &HostConfig) -> Result<Vec<u8>, StoreError> {
        let record = self
            .get(username)
            .ok_or_else(|| StoreError::UnknownUser(username.to_owned()))?;
        let spec = host.record_spec(record)?;
        open(&record.ciphertext, &spec, record.use_fib)
            .map_err(|e| StoreError::StoreCorrupt(format!("ciphertext for `{username}`: {e}")))
    }

    pub fn verify_stored(
        &self,
        username: &str,
        candidate: &[u8],
        host: &HostConfig,
    ) -> Result<bool, StoreError> {
        let stored = self.recover_password(username, host)?;
        Ok(bytes_equal(&stored, candidate))
    }

    /// Host-key multipliers of every record; user-role keys may not reuse them.
    pub fn reserved_seeds(&self, host: &HostConfig) -> HashSet<BigUint> {
        self.records
            .iter()
            .filter_map(|r| {
                let id = r.identifiers.get(usize::from(r.enroll_identifier_index))?;
                host.host_seed(&id.value, r.enroll_timestamp_ms).ok()
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(STORE_MAGIC);
        out.push(self.version);
        out.extend_from_slice(&(self.records.len() as u32).to_be_bytes());
        for r in &self.records {
            put_bytes16(&mut out, r.username.as_bytes());
            out.extend_from_slice(&(r.identifiers.len() as u16).to_be_bytes());
            for id in &r.identifiers {
                put_bytes16(&mut out, id.label.as_bytes());
                put_bytes16(&mut out, &id.value);
            }
            out.extend_from_slice(&r.enroll_identifier_index.to_be_bytes());
            out.extend_from_slice(&r.enroll_timestamp_ms.to_be_bytes());
            put_bytes16(&mut out, &r.ciphertext.to_file_bytes(r.use_fib));
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, StoreError> {
        parse_store(data).map_err(StoreError::StoreCorrupt)
    }

    /// Writes to a sibling temp file, syncs it, then renames over `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let path = path.as_ref();
        let tmp = temp_sibling(path);
        let result = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        Ok(result?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

fn parse_store(data: &[u8]) -> Result<PasswordStore, String> {
    let mut r = Reader::new(data);
    if r.take(4)? != STORE_MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u8()?;
    if version != STORE_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let count = r.u32()?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for _ in 0..count {
        let username = String::from_utf8(r.bytes16()?.to_vec()).map_err(|_| "username not utf-8")?;
        if !seen.insert(username.clone()) {
            return Err(format!("duplicate user `{username}`"));
        }
        let n_ids = r.u16()?;
        let mut identifiers = Vec::with_capacity(usize::from(n_ids));
        for _ in 0..n_ids {
            let label = String::from_utf8(r.bytes16()?.to_vec()).map_err(|_| "label not utf-8")?;
            let value = r.bytes16()?.to_vec();
            identifiers.push(Identifier { label, value });
        }
        validate_identifiers(&identifiers).map_err(|e| e.to_string())?;
        let enroll_identifier_index = r.u16()?;
        if usize::from(enroll_identifier_index) >= identifiers.len() {
            return Err("enroll index out of range".into());
        }
        let enroll_timestamp_ms = r.u64()?;
        let (ciphertext, use_fib) =
            Ciphertext::from_file_bytes(r.bytes16()?).map_err(|e| e.to_string())?;
        records.push(UserRecord {
            username,
            identifiers,
            enroll_identifier_index,
            enroll_timestamp_ms,
            ciphertext,
            use_fib,
        });
    }
    r.finish()?;
    Ok(PasswordStore { version, records })
}
