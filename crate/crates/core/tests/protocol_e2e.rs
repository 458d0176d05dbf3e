use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use num_bigint::BigUint;
use tec_core::password_store::{HostConfig, Identifier, PasswordStore};
use tec_core::protocol::{
    login_over_stream, read_frame, serve, spawn_host, write_frame, Client, Clock, Host, HostHandle, ManualClock,
    ProtocolConfig, ProtocolMessage, Response, SealedPayload, UserCredentials, VerdictReason,
};
use tec_core::stego_codec::Ciphertext;

const NOON: u64 = 19_700 * 86_400_000 + 43_200_000;
const PASSWORD: &[u8] = b"Blue-Whale-2024!";

fn identifiers() -> Vec<Vec<u8>> {
    vec![b"voiceprint:0xA1B2".to_vec(), b"licence:D1234567".to_vec()]
}

fn host_cfg() -> HostConfig {
    HostConfig::new(BigUint::from(0xabcdefu32))
}

fn host(cfg: ProtocolConfig) -> Host {
    let mut store = PasswordStore::new();
    let ids = identifiers()
        .into_iter()
        .enumerate()
        .map(|(i, v)| Identifier::new(format!("id{i}"), v))
        .collect();
    store.enroll(&host_cfg(), "bob", PASSWORD, ids, NOON - 86_400_000).unwrap();
    Host::new(store, host_cfg(), cfg).unwrap()
}

fn client(password: &[u8]) -> Client {
    Client::new(
        UserCredentials {
            username: "bob".into(),
            password: password.to_vec(),
            identifiers: identifiers(),
        },
        ProtocolConfig::default(),
    )
}

fn start(sessions: usize) -> (Arc<ManualClock>, std::net::SocketAddr, thread::JoinHandle<()>) {
    let clock = Arc::new(ManualClock::new(NOON));
    let dyn_clock: Arc<dyn Clock> = clock.clone();
    let (handle, owner): (HostHandle, _) = spawn_host(host(ProtocolConfig::default()), dyn_clock);
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let t = thread::spawn(move || {
        serve(listener, handle, Some(sessions)).unwrap();
        owner.join().unwrap();
    });
    (clock, addr, t)
}

#[test]
fn loopback_handshake_accepts_and_rejects() {
    let (clock, addr, server) = start(3);
    let c = clock.clone();
    let v = login_over_stream(&mut TcpStream::connect(addr).unwrap(), &client(PASSWORD), None, move || c.now_ms()).unwrap();
    assert!(v.ok);
    let c = clock.clone();
    let v = login_over_stream(&mut TcpStream::connect(addr).unwrap(), &client(b"Blue-Whale-2025!"), None, move || {
        c.now_ms()
    })
    .unwrap();
    assert_eq!(v.reason, VerdictReason::BadCredentials);
    // second identifier answers the next challenge
    let c = clock.clone();
    let v = login_over_stream(&mut TcpStream::connect(addr).unwrap(), &client(PASSWORD), Some(0), move || c.now_ms())
        .unwrap();
    assert!(v.ok, "respond-with a different identifier than the challenge token");
    server.join().unwrap();
}

#[test]
fn response_at_window_edge() {
    let mut h = host(ProtocolConfig::default());
    let cl = client(PASSWORD);
    let ch = h.handle_login_request(&cl.login_request(), NOON).unwrap();
    let r = cl.process_challenge(&ch, NOON + 30_000).unwrap();
    assert!(h.handle_response("bob", &r, NOON + 30_000).unwrap().ok);

    let ch = h.handle_login_request(&cl.login_request(), NOON + 60_000).unwrap();
    let r = cl.process_challenge(&ch, NOON + 90_001).unwrap();
    assert_eq!(h.handle_response("bob", &r, NOON + 90_001).unwrap().reason, VerdictReason::Expired);
}

#[test]
fn any_single_byte_corruption_is_rejected() {
    let cl = client(PASSWORD);
    let mut h = host(ProtocolConfig::default());
    let mut now = NOON;
    let mut tried = 0;
    for i in 0.. {
        for flip in [0x01u8, 0x10, 0x80, 0xff] {
            now += 1_000;
            let ch = h.handle_login_request(&cl.login_request(), now).unwrap();
            let resp = cl.process_challenge(&ch, now).unwrap();
            let ct = &resp.enc_payload.ciphertext;
            if i >= ct.as_bytes().len() {
                assert!(h.handle_response("bob", &resp, now).unwrap().ok);
                assert!(tried > 0);
                return;
            }
            let mut raw = ct.as_bytes().to_vec();
            raw[i] ^= flip;
            let tampered = Response {
                token: resp.token,
                enc_payload: SealedPayload {
                    ciphertext: Ciphertext::from_raw(raw, ct.bit_len()).unwrap(),
                    use_fib: false,
                },
            };
            assert!(!h.handle_response("bob", &tampered, now).unwrap().ok, "byte {i} ^ {flip:#x}");
            tried += 1;
        }
    }
}

#[test]
fn session_one_response_fails_in_session_two() {
    let (clock, addr, server) = start(2);
    let cl = client(PASSWORD);
    let mut s = TcpStream::connect(addr).unwrap();
    write_frame(&mut s, &ProtocolMessage::LoginRequest(cl.login_request())).unwrap();
    let ProtocolMessage::Challenge(ch) = read_frame(&mut s).unwrap() else { panic!() };
    let resp = cl.process_challenge(&ch, clock.now_ms()).unwrap();
    write_frame(&mut s, &ProtocolMessage::Response(resp.clone())).unwrap();
    let ProtocolMessage::Verdict(v) = read_frame(&mut s).unwrap() else { panic!() };
    assert!(v.ok);

    clock.advance(5);
    let mut s = TcpStream::connect(addr).unwrap();
    write_frame(&mut s, &ProtocolMessage::LoginRequest(cl.login_request())).unwrap();
    let ProtocolMessage::Challenge(_) = read_frame(&mut s).unwrap() else { panic!() };
    write_frame(&mut s, &ProtocolMessage::Response(resp)).unwrap();
    let ProtocolMessage::Verdict(v) = read_frame(&mut s).unwrap() else { panic!() };
    assert!(!v.ok);
    server.join().unwrap();
}

#[test]
fn unknown_user_gets_verdict_frame() {
    let (_clock, addr, server) = start(1);
    let mut s = TcpStream::connect(addr).unwrap();
    let mut nobody = client(PASSWORD);
    nobody.creds.username = "mallory".into();
    let v = login_over_stream(&mut s, &nobody, None, || NOON).unwrap();
    assert_eq!(v.reason, VerdictReason::UnknownUser);
    server.join().unwrap();
}
