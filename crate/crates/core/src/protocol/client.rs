use super::{epoch_day, Challenge, LoginRequest, ProtocolConfig, ProtocolError, Response, SealedPayload};
use crate::keystream::{derive_seed, KeySpec};
use crate::stego_codec::{open, seal};

/// What the user's side knows: password and identifier values, in enrollment order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserCredentials {
    pub username: String,
    pub password: Vec<u8>,
    pub identifiers: Vec<Vec<u8>>,
}

#[derive(Debug, Clone)]
pub struct Client {
    pub creds: UserCredentials,
    pub cfg: ProtocolConfig,
}

impl Client {
    pub fn new(creds: UserCredentials, cfg: ProtocolConfig) -> Self {
        Self { creds, cfg }
    }

    pub fn login_request(&self) -> LoginRequest {
        LoginRequest {
            username: self.creds.username.clone(),
        }
    }

    fn spec(&self, identifier: &[u8], ts: u64) -> Result<KeySpec, ProtocolError> {
        Ok(KeySpec::new(self.cfg.user_base, derive_seed(identifier, ts)?)
            .with_min_precision(self.cfg.min_precision_bits))
    }

    /// Recovers the host timestamp, trying today's and yesterday's day key.
    pub fn recover_timestamp(&self, challenge: &Challenge, now_ms: u64) -> Result<u64, ProtocolError> {
        let identifier = self
            .creds
            .identifiers
            .get(usize::from(challenge.token))
            .ok_or(ProtocolError::ChallengeUndecryptable)?;
        let today = epoch_day(now_ms);
        for day in [Some(today), today.checked_sub(1)].into_iter().flatten() {
            let spec = self.spec(identifier, day)?;
            let Ok(bytes) = open(&challenge.enc_ts.ciphertext, &spec, challenge.enc_ts.use_fib) else {
                continue;
            };
            let Ok(raw) = <[u8; 8]>::try_from(bytes.as_slice()) else {
                continue;
            };
            let ts = u64::from_be_bytes(raw);
            if epoch_day(ts) == day {
                return Ok(ts);
            }
        }
        Err(ProtocolError::ChallengeUndecryptable)
    }

    /// Answers with the identifier the challenge referenced.
    pub fn process_challenge(&self, challenge: &Challenge, now_ms: u64) -> Result<Response, ProtocolError> {
        self.process_challenge_with(challenge, now_ms, usize::from(challenge.token))
    }

    /// Answers using identifier `respond_with`, which may differ from the challenge token.
    pub fn process_challenge_with(
        &self,
        challenge: &Challenge,
        now_ms: u64,
        respond_with: usize,
    ) -> Result<Response, ProtocolError> {
        let ts = self.recover_timestamp(challenge, now_ms)?;
        let identifier = self
            .creds
            .identifiers
            .get(respond_with)
            .ok_or(ProtocolError::ChallengeUndecryptable)?;
        let token = u16::try_from(respond_with).map_err(|_| ProtocolError::ChallengeUndecryptable)?;
        let spec = self.spec(identifier, ts)?;
        let ciphertext = seal(&self.creds.password, &spec, self.cfg.use_fib)?;
        Ok(Response {
            token: (!self.cfg.tokenless_mode).then_some(token),
            enc_payload: SealedPayload {
                ciphertext,
                use_fib: self.cfg.use_fib,
            },
        })
    }
}
