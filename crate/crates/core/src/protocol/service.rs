//! Runs a [`Host`] on one owner thread and serves it over byte streams.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use super::frame::{read_frame, write_frame};
use super::{Challenge, Client, Host, LoginRequest, ProtocolError, ProtocolMessage, Response, Verdict, VerdictReason};

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        Self(AtomicU64::new(start_ms))
    }

    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

enum Command {
    Login(LoginRequest, u64, mpsc::Sender<Result<Challenge, ProtocolError>>),
    Respond(String, Response, u64, mpsc::Sender<Result<Verdict, ProtocolError>>),
    Expire(u64, mpsc::Sender<usize>),
}

/// Cloneable handle through which sessions submit commands to the owner thread.
#[derive(Clone)]
pub struct HostHandle {
    tx: mpsc::Sender<Command>,
    clock: Arc<dyn Clock>,
}

impl HostHandle {
    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    fn call<T>(&self, make: impl FnOnce(mpsc::Sender<T>) -> Command) -> Result<T, ProtocolError> {
        let (reply_tx, reply_rx) = mpsc::channel();
        self.tx.send(make(reply_tx)).map_err(|_| ProtocolError::ServiceStopped)?;
        reply_rx.recv().map_err(|_| ProtocolError::ServiceStopped)
    }

    pub fn login(&self, req: LoginRequest) -> Result<Challenge, ProtocolError> {
        let now = self.now_ms();
        self.call(|tx| Command::Login(req, now, tx))?
    }

    pub fn respond(&self, username: &str, resp: Response) -> Result<Verdict, ProtocolError> {
        let now = self.now_ms();
        self.call(|tx| Command::Respond(username.to_owned(), resp, now, tx))?
    }

    pub fn expire(&self) -> Result<usize, ProtocolError> {
        let now = self.now_ms();
        self.call(|tx| Command::Expire(now, tx))
    }
}

/// Moves `host` onto its own thread. The thread returns the host once every
/// handle has been dropped.
pub fn spawn_host(mut host: Host, clock: Arc<dyn Clock>) -> (HostHandle, JoinHandle<Host>) {
    let (tx, rx) = mpsc::channel::<Command>();
    let owner = thread::spawn(move || {
        for cmd in rx {
            match cmd {
                Command::Login(req, now, reply) => {
                    let _ = reply.send(host.handle_login_request(&req, now));
                }
                Command::Respond(user, resp, now, reply) => {
                    let _ = reply.send(host.handle_response(&user, &resp, now));
                }
                Command::Expire(now, reply) => {
                    let _ = reply.send(host.expire_pending(now));
                }
            }
        }
        host
    });
    (HostHandle { tx, clock }, owner)
}

fn reject_with<S: Write>(stream: &mut S, err: &ProtocolError) -> Result<Verdict, ProtocolError> {
    let verdict = Verdict::reject(VerdictReason::from(err));
    write_frame(stream, &ProtocolMessage::Verdict(verdict))?;
    Ok(verdict)
}

/// Runs one login exchange on `stream` and returns the verdict that was sent.
pub fn serve_connection<S: Read + Write>(stream: &mut S, host: &HostHandle) -> Result<Verdict, ProtocolError> {
    let req = match read_frame(stream)? {
        ProtocolMessage::LoginRequest(r) => r,
        _ => {
            let e = ProtocolError::UnexpectedMessage("expected LoginRequest");
            reject_with(stream, &e)?;
            return Err(e);
        }
    };
    let username = req.username.clone();
    let challenge = match host.login(req) {
        Ok(c) => c,
        Err(e) => return reject_with(stream, &e),
    };
    write_frame(stream, &ProtocolMessage::Challenge(challenge))?;
    let resp = match read_frame(stream)? {
        ProtocolMessage::Response(r) => r,
        _ => {
            let e = ProtocolError::UnexpectedMessage("expected Response");
            reject_with(stream, &e)?;
            return Err(e);
        }
    };
    let verdict = match host.respond(&username, resp) {
        Ok(v) => v,
        Err(e) => return reject_with(stream, &e),
    };
    write_frame(stream, &ProtocolMessage::Verdict(verdict))?;
    Ok(verdict)
}

/// Accepts connections, one thread per session. Stops accepting after
/// `max_sessions` connections when given, then waits for their sessions.
pub fn serve(listener: TcpListener, host: HostHandle, max_sessions: Option<usize>) -> Result<(), ProtocolError> {
    let mut workers = Vec::new();
    for (accepted, conn) in listener.incoming().enumerate() {
        let mut conn: TcpStream = conn?;
        let handle = host.clone();
        workers.push(thread::spawn(move || {
            let _ = conn.set_read_timeout(Some(Duration::from_secs(60)));
            let _ = serve_connection(&mut conn, &handle);
        }));
        workers.retain(|w| !w.is_finished());
        if max_sessions.is_some_and(|m| accepted + 1 >= m) {
            break;
        }
    }
    for w in workers {
        let _ = w.join();
    }
    Ok(())
}

/// Client side of one exchange. `now_ms` is read after the challenge arrives.
pub fn login_over_stream<S: Read + Write>(
    stream: &mut S,
    client: &Client,
    respond_with: Option<usize>,
    now_ms: impl Fn() -> u64,
) -> Result<Verdict, ProtocolError> {
    write_frame(stream, &ProtocolMessage::LoginRequest(client.login_request()))?;
    let challenge = match read_frame(stream)? {
        ProtocolMessage::Challenge(c) => c,
        ProtocolMessage::Verdict(v) => return Ok(v),
        _ => return Err(ProtocolError::UnexpectedMessage("expected Challenge")),
    };
    let index = respond_with.unwrap_or(usize::from(challenge.token));
    let response = client.process_challenge_with(&challenge, now_ms(), index)?;
    write_frame(stream, &ProtocolMessage::Response(response))?;
    match read_frame(stream)? {
        ProtocolMessage::Verdict(v) => Ok(v),
        _ => Err(ProtocolError::UnexpectedMessage("expected Verdict")),
    }
}
