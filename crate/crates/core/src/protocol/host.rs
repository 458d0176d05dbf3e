use std::collections::{HashMap, HashSet};

use num_bigint::BigUint;

use super::{epoch_day, Challenge, LoginRequest, ProtocolConfig, ProtocolError, Response, SealedPayload, Verdict, VerdictReason};
use crate::keystream::{derive_seed, KeySpec, KeystreamError};
use crate::password_store::{HostConfig, Identifier, PasswordStore};
use crate::stego_codec::{open, seal};

/// A challenge that has been issued and not yet answered or expired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingLogin {
    pub username: String,
    pub ts_value_ms: u64,
    pub challenge_token: u16,
    pub issued_at_ms: u64,
    pub expiry_ms: u64,
}

/// Host-side protocol state. Not thread-safe; see [`super::spawn_host`].
#[derive(Debug)]
pub struct Host {
    store: PasswordStore,
    host_cfg: HostConfig,
    cfg: ProtocolConfig,
    pending: HashMap<String, PendingLogin>,
    next_token: HashMap<String, usize>,
    reserved: HashSet<BigUint>,
}

impl Host {
    pub fn new(store: PasswordStore, host_cfg: HostConfig, cfg: ProtocolConfig) -> Result<Self, ProtocolError> {
        cfg.validate()?;
        let reserved = store.reserved_seeds(&host_cfg);
        Ok(Self {
            store,
            host_cfg,
            cfg,
            pending: HashMap::new(),
            next_token: HashMap::new(),
            reserved,
        })
    }

    pub fn store(&self) -> &PasswordStore {
        &self.store
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn pending(&self, username: &str) -> Option<&PendingLogin> {
        self.pending.get(username)
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    pub(super) fn user_spec(&self, identifier: &[u8], ts: u64) -> Result<KeySpec, KeystreamError> {
        let seed = derive_seed(identifier, ts)?;
        Ok(KeySpec::for_user(self.cfg.user_base, seed, &self.reserved)?
            .with_min_precision(self.cfg.min_precision_bits))
    }

    pub fn handle_login_request(&mut self, req: &LoginRequest, now_ms: u64) -> Result<Challenge, ProtocolError> {
        let record = self
            .store
            .get(&req.username)
            .ok_or_else(|| ProtocolError::UnknownUser(req.username.clone()))?;
        if let Some(p) = self.pending.get(&req.username) {
            if p.expiry_ms >= now_ms {
                return Err(ProtocolError::LoginInProgress(req.username.clone()));
            }
        }
        let n = record.identifiers.len();
        let counter = self.next_token.entry(req.username.clone()).or_insert(0);
        let token = *counter % n;
        *counter = (token + 1) % n;

        let spec = self.user_spec(&record.identifiers[token].value, epoch_day(now_ms))?;
        let ciphertext = seal(&now_ms.to_be_bytes(), &spec, self.cfg.use_fib)?;
        let token = token as u16;
        self.pending.insert(
            req.username.clone(),
            PendingLogin {
                username: req.username.clone(),
                ts_value_ms: now_ms,
                challenge_token: token,
                issued_at_ms: now_ms,
                expiry_ms: now_ms.saturating_add(self.cfg.t_a_ms),
            },
        );
        Ok(Challenge {
            token,
            enc_ts: SealedPayload {
                ciphertext,
                use_fib: self.cfg.use_fib,
            },
        })
    }

    /// Checks a response. The pending login is erased whatever the outcome.
    pub fn handle_response(&mut self, username: &str, resp: &Response, now_ms: u64) -> Result<Verdict, ProtocolError> {
        let pending = self
            .pending
            .remove(username)
            .ok_or_else(|| ProtocolError::NoPendingLogin(username.to_owned()))?;
        let elapsed = now_ms.saturating_sub(pending.issued_at_ms);
        if elapsed > self.cfg.t_a_ms {
            return Ok(Verdict::reject(VerdictReason::Expired));
        }
        let record = self
            .store
            .get(username)
            .ok_or_else(|| ProtocolError::UnknownUser(username.to_owned()))?;
        let tried: Vec<&Identifier> = match resp.token {
            Some(t) => record.identifiers.get(usize::from(t)).into_iter().collect(),
            None if self.cfg.tokenless_mode => record.identifiers.iter().collect(),
            None => Vec::new(),
        };
        for id in tried {
            let Ok(spec) = self.user_spec(&id.value, pending.ts_value_ms) else {
                continue;
            };
            let Ok(candidate) = open(&resp.enc_payload.ciphertext, &spec, resp.enc_payload.use_fib) else {
                continue;
            };
            if self.store.verify_stored(username, &candidate, &self.host_cfg)? {
                return Ok(Verdict::accept());
            }
        }
        Ok(Verdict::reject(VerdictReason::BadCredentials))
    }

    /// Drops every pending login whose expiry is strictly before `now_ms`.
    pub fn expire_pending(&mut self, now_ms: u64) -> usize {
        let before = self.pending.len();
        self.pending.retain(|_, p| p.expiry_ms >= now_ms);
        before - self.pending.len()
    }
}
