//! Wire frames.
//!
//! ```text
//! type u8 | body length u32 (big-endian, at most 1 MiB) | body
//!
//! 0x01 LoginRequest        username u16 len + utf-8
//! 0x02 Challenge           token u16 | TEC1 frame u32 len + bytes
//! 0x03 Response            token u16 | TEC1 frame u32 len + bytes
//! 0x04 Response, no token  TEC1 frame u32 len + bytes
//! 0x05 Verdict             ok u8 | reason u8
//! ```

use std::io::{self, Read, Write};

use super::{Challenge, LoginRequest, ProtocolError, ProtocolMessage, Response, SealedPayload, Verdict, VerdictReason};
use crate::wire::{put_bytes16, put_bytes32, Reader};

pub const MAX_BODY_LEN: usize = 1 << 20;
pub const HEADER_LEN: usize = 5;

pub const TYPE_LOGIN_REQUEST: u8 = 0x01;
pub const TYPE_CHALLENGE: u8 = 0x02;
pub const TYPE_RESPONSE: u8 = 0x03;
pub const TYPE_RESPONSE_TOKENLESS: u8 = 0x04;
pub const TYPE_VERDICT: u8 = 0x05;

fn known_type(t: u8) -> bool {
    (TYPE_LOGIN_REQUEST..=TYPE_VERDICT).contains(&t)
}

pub fn frame_encode(msg: &ProtocolMessage) -> Vec<u8> {
    let mut body = Vec::new();
    let kind = match msg {
        ProtocolMessage::LoginRequest(m) => {
            put_bytes16(&mut body, m.username.as_bytes());
            TYPE_LOGIN_REQUEST
        }
        ProtocolMessage::Challenge(m) => {
            body.extend_from_slice(&m.token.to_be_bytes());
            put_bytes32(&mut body, &m.enc_ts.to_file_bytes());
            TYPE_CHALLENGE
        }
        ProtocolMessage::Response(m) => {
            let kind = match m.token {
                Some(t) => {
                    body.extend_from_slice(&t.to_be_bytes());
                    TYPE_RESPONSE
                }
                None => TYPE_RESPONSE_TOKENLESS,
            };
            put_bytes32(&mut body, &m.enc_payload.to_file_bytes());
            kind
        }
        ProtocolMessage::Verdict(m) => {
            body.push(u8::from(m.ok));
            body.push(m.reason.code());
            TYPE_VERDICT
        }
    };
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.push(kind);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

fn check_header(kind: u8, len: u32) -> Result<usize, ProtocolError> {
    if !known_type(kind) {
        return Err(ProtocolError::Frame(format!("unknown frame type 0x{kind:02X}")));
    }
    let len = len as usize;
    if len > MAX_BODY_LEN {
        return Err(ProtocolError::Frame(format!("body length {len} exceeds 1 MiB")));
    }
    Ok(len)
}

pub fn frame_decode(bytes: &[u8]) -> Result<ProtocolMessage, ProtocolError> {
    if bytes.len() < HEADER_LEN {
        return Err(ProtocolError::Frame("short header".into()));
    }
    let kind = bytes[0];
    let len = check_header(kind, u32::from_be_bytes(bytes[1..5].try_into().expect("4 bytes")))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != len {
        return Err(ProtocolError::Frame(format!(
            "body length {} disagrees with header {len}",
            body.len()
        )));
    }
    decode_body(kind, body)
}

fn sealed(field: &[u8]) -> Result<SealedPayload, ProtocolError> {
    SealedPayload::from_file_bytes(field).map_err(|e| ProtocolError::Frame(e.to_string()))
}

fn decode_body(kind: u8, body: &[u8]) -> Result<ProtocolMessage, ProtocolError> {
    let frame_err = |e: &'static str| ProtocolError::Frame(e.to_owned());
    let mut r = Reader::new(body);
    let msg = match kind {
        TYPE_LOGIN_REQUEST => {
            let name = r.bytes16().map_err(frame_err)?;
            let username = String::from_utf8(name.to_vec())
                .map_err(|_| ProtocolError::Frame("username not utf-8".into()))?;
            ProtocolMessage::LoginRequest(LoginRequest { username })
        }
        TYPE_CHALLENGE => {
            let token = r.u16().map_err(frame_err)?;
            let enc_ts = sealed(r.bytes32().map_err(frame_err)?)?;
            ProtocolMessage::Challenge(Challenge { token, enc_ts })
        }
        TYPE_RESPONSE | TYPE_RESPONSE_TOKENLESS => {
            let token = if kind == TYPE_RESPONSE {
                Some(r.u16().map_err(frame_err)?)
            } else {
                None
            };
            let enc_payload = sealed(r.bytes32().map_err(frame_err)?)?;
            ProtocolMessage::Response(Response { token, enc_payload })
        }
        TYPE_VERDICT => {
            let ok = match r.u8().map_err(frame_err)? {
                0 => false,
                1 => true,
                _ => return Err(frame_err("verdict flag must be 0 or 1")),
            };
            let reason = VerdictReason::from_code(r.u8().map_err(frame_err)?)
                .ok_or_else(|| frame_err("unknown verdict reason"))?;
            ProtocolMessage::Verdict(Verdict { ok, reason })
        }
        _ => unreachable!("checked by check_header"),
    };
    r.finish().map_err(frame_err)?;
    Ok(msg)
}

pub fn write_frame<W: Write>(w: &mut W, msg: &ProtocolMessage) -> io::Result<()> {
    w.write_all(&frame_encode(msg))?;
    w.flush()
}

/// Reads exactly one frame, validating the header before allocating the body.
pub fn read_frame<R: Read>(r: &mut R) -> Result<ProtocolMessage, ProtocolError> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    let len = check_header(header[0], u32::from_be_bytes(header[1..5].try_into().expect("4 bytes")))?;
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    decode_body(header[0], &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keystream::{KeySpec, TranscendentalBase};
    use crate::stego_codec::seal;

    fn payload(fib: bool) -> SealedPayload {
        let spec = KeySpec::new(TranscendentalBase::Pi, 99u32.into());
        SealedPayload {
            ciphertext: seal(b"payload", &spec, fib).unwrap(),
            use_fib: fib,
        }
    }

    fn all_messages() -> Vec<ProtocolMessage> {
        vec![
            ProtocolMessage::LoginRequest(LoginRequest {
                username: "alice".into(),
            }),
            ProtocolMessage::Challenge(Challenge {
                token: 3,
                enc_ts: payload(false),
            }),
            ProtocolMessage::Response(Response {
                token: Some(1),
                enc_payload: payload(true),
            }),
            ProtocolMessage::Response(Response {
                token: None,
                enc_payload: payload(false),
            }),
            ProtocolMessage::Verdict(Verdict {
                ok: false,
                reason: VerdictReason::Expired,
            }),
        ]
    }

    #[test]
    fn round_trip_all_variants() {
        for m in all_messages() {
            let bytes = frame_encode(&m);
            assert_eq!(frame_decode(&bytes).unwrap(), m);
            assert_eq!(read_frame(&mut bytes.as_slice()).unwrap(), m);
        }
    }

    #[test]
    fn tokenless_response_has_no_token_field() {
        let with = frame_encode(&all_messages()[2]);
        let without = frame_encode(&all_messages()[3]);
        assert_eq!(with[0], TYPE_RESPONSE);
        assert_eq!(without[0], TYPE_RESPONSE_TOKENLESS);
        let body_len = u32::from_be_bytes(without[1..5].try_into().unwrap()) as usize;
        // body = u32 length + TEC1 frame, nothing else
        let tec1_len = u32::from_be_bytes(without[5..9].try_into().unwrap()) as usize;
        assert_eq!(body_len, 4 + tec1_len);
    }

    #[test]
    fn malformed_frames() {
        assert!(matches!(frame_decode(&[0xFF, 0, 0, 0, 0]), Err(ProtocolError::Frame(_))));
        let huge = [TYPE_LOGIN_REQUEST, 0x00, 0x10, 0x00, 0x01];
        assert!(matches!(frame_decode(&huge), Err(ProtocolError::Frame(_))));
        assert!(matches!(read_frame(&mut &huge[..]), Err(ProtocolError::Frame(_))));
        let mut short = frame_encode(&all_messages()[0]);
        short.pop();
        assert!(matches!(frame_decode(&short), Err(ProtocolError::Frame(_))));
        assert!(frame_decode(&[TYPE_VERDICT, 0, 0, 0, 2, 7, 0]).is_err());
        assert!(frame_decode(&[TYPE_VERDICT, 0, 0, 0, 3, 1, 0, 0]).is_err());
    }
}
