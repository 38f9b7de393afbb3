//! Framed message endpoints over local TCP, driven by a mio poller.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::net::SocketAddr;
use std::time::{Duration, Instant};

use adnprof_core::control::{FrameDecoder, Message, Payload, Register, RegisterAck, SeqCounter, WireError};
use adnprof_core::TimeCategory;
use mio::net::{TcpListener, TcpStream};
use mio::{Events, Interest, Poll, Token};
use serde::{Deserialize, Serialize};

use crate::instrument::{builtin, poll_site};

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("connection to {0} closed")]
    SocketClosed(String),
    #[error("timed out waiting for {0}")]
    Timeout(String),
    #[error("registration rejected: {0}")]
    Rejected(String),
    #[error("unexpected {got} while waiting for {expected}")]
    Unexpected { expected: &'static str, got: String },
}

/// Counters of one endpoint's event loop.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LoopStats {
    pub poll_invocations: u64,
    pub messages_handled: u64,
    pub wall_time_in_poll_ns: u64,
    pub wall_time_ns: u64,
}

impl LoopStats {
    pub fn wall_time_in_poll_s(&self) -> f64 {
        self.wall_time_in_poll_ns as f64 / 1e9
    }

    /// Fraction of loop wall time spent inside the poller, in percent.
    pub fn poll_share_pct(&self) -> f64 {
        if self.wall_time_ns == 0 {
            0.0
        } else {
            100.0 * self.wall_time_in_poll_ns as f64 / self.wall_time_ns as f64
        }
    }

    fn since(&self, earlier: &LoopStats) -> LoopStats {
        LoopStats {
            poll_invocations: self.poll_invocations - earlier.poll_invocations,
            messages_handled: self.messages_handled - earlier.messages_handled,
            wall_time_in_poll_ns: self.wall_time_in_poll_ns - earlier.wall_time_in_poll_ns,
            wall_time_ns: self.wall_time_ns - earlier.wall_time_ns,
        }
    }
}

#[derive(Debug)]
pub enum NetEvent {
    Accepted(Token),
    Message(Token, Message),
    Closed(Token),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

struct Conn {
    stream: TcpStream,
    decoder: FrameDecoder,
    out: Vec<u8>,
    peer: String,
}

impl Conn {
    /// Writes queued bytes until the socket would block.
    fn flush(&mut self) -> io::Result<()> {
        while !self.out.is_empty() {
            match self.stream.write(&self.out) {
                Ok(0) => return Err(io::ErrorKind::WriteZero.into()),
                Ok(n) => {
                    self.out.drain(..n);
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => break,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    /// Drains the socket; `true` once the peer has closed.
    fn fill(&mut self) -> io::Result<bool> {
        let mut buf = [0u8; 16 * 1024];
        loop {
            match self.stream.read(&mut buf) {
                Ok(0) => return Ok(true),
                Ok(n) => self.decoder.push(&buf[..n]),
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => return Ok(false),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) if e.kind() == io::ErrorKind::ConnectionReset => return Ok(true),
                Err(e) => return Err(e),
            }
        }
    }
}

const LISTENER: Token = Token(0);

/// A named node's sockets: an optional listener plus framed connections.
pub struct Endpoint {
    name: String,
    poll: Poll,
    events: Events,
    listener: Option<TcpListener>,
    local_addr: Option<SocketAddr>,
    conns: BTreeMap<usize, Conn>,
    next_token: usize,
    seq: SeqCounter,
    stats: LoopStats,
}

impl Endpoint {
    /// An endpoint that only makes outgoing connections.
    pub fn new(name: &str) -> io::Result<Endpoint> {
        Ok(Endpoint {
            name: name.into(),
            poll: Poll::new()?,
            events: Events::with_capacity(256),
            listener: None,
            local_addr: None,
            conns: BTreeMap::new(),
            next_token: 1,
            seq: SeqCounter::default(),
            stats: LoopStats::default(),
        })
    }

    pub fn bind(name: &str, addr: SocketAddr) -> io::Result<Endpoint> {
        let mut ep = Endpoint::new(name)?;
        let mut listener = TcpListener::bind(addr)?;
        ep.poll
            .registry()
            .register(&mut listener, LISTENER, Interest::READABLE)?;
        ep.local_addr = Some(listener.local_addr()?);
        ep.listener = Some(listener);
        Ok(ep)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn local_addr(&self) -> Option<SocketAddr> {
        self.local_addr
    }

    /// Cumulative counters since creation.
    pub fn stats(&self) -> LoopStats {
        self.stats
    }

    pub fn peer(&self, token: Token) -> Option<&str> {
        self.conns.get(&token.0).map(|c| c.peer.as_str())
    }

    pub fn set_peer(&mut self, token: Token, peer: &str) {
        if let Some(c) = self.conns.get_mut(&token.0) {
            c.peer = peer.into();
        }
    }

    pub fn is_open(&self, token: Token) -> bool {
        self.conns.contains_key(&token.0)
    }

    fn adopt(&mut self, mut stream: TcpStream, decoder: FrameDecoder, peer: String) -> io::Result<Token> {
        let token = Token(self.next_token);
        self.next_token += 1;
        self.poll
            .registry()
            .register(&mut stream, token, Interest::READABLE | Interest::WRITABLE)?;
        self.conns.insert(
            token.0,
            Conn {
                stream,
                decoder,
                out: Vec::new(),
                peer,
            },
        );
        Ok(token)
    }

    /// Opens a connection; the handshake-free variant of [`Endpoint::register_with`].
    pub fn connect(&mut self, addr: SocketAddr, peer: &str) -> Result<Token, NetError> {
        let s = std::net::TcpStream::connect_timeout(&addr, Duration::from_secs(5))?;
        s.set_nodelay(true)?;
        s.set_nonblocking(true)?;
        Ok(self.adopt(TcpStream::from_std(s), FrameDecoder::new(), peer.into())?)
    }

    /// Connects, sends `Register` and blocks until the `RegisterAck`.
    pub fn register_with(
        &mut self,
        addr: SocketAddr,
        peer: &str,
        register: Register,
        timeout: Duration,
    ) -> Result<Token, NetError> {
        let mut s = std::net::TcpStream::connect_timeout(&addr, timeout)?;
        s.set_nodelay(true)?;
        let msg = Message::new(self.name.as_str(), self.seq.issue(), Payload::Register(register));
        s.write_all(&msg.encode()?)?;
        s.set_read_timeout(Some(timeout))?;
        let deadline = Instant::now() + timeout;
        let mut decoder = FrameDecoder::new();
        let mut buf = [0u8; 4096];
        let ack = loop {
            if let Some(m) = decoder.next_message()? {
                break m;
            }
            if Instant::now() >= deadline {
                return Err(NetError::Timeout(format!("RegisterAck from {peer}")));
            }
            match s.read(&mut buf) {
                Ok(0) => return Err(NetError::SocketClosed(peer.into())),
                Ok(n) => decoder.push(&buf[..n]),
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    return Err(NetError::Timeout(format!("RegisterAck from {peer}")))
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        };
        match ack.payload {
            Payload::RegisterAck(RegisterAck { accepted: true, .. }) => {}
            Payload::RegisterAck(RegisterAck { reason, .. }) => {
                return Err(NetError::Rejected(reason.unwrap_or_default()));
            }
            other => {
                return Err(NetError::Unexpected {
                    expected: "RegisterAck",
                    got: other.msg_type().to_string(),
                })
            }
        }
        s.set_read_timeout(None)?;
        s.set_nonblocking(true)?;
        Ok(self.adopt(TcpStream::from_std(s), decoder, peer.into())?)
    }

    /// Queues a message with the next sequence number and tries to flush it.
    pub fn send(&mut self, token: Token, payload: Payload) -> Result<(), NetError> {
        let msg = Message::new(self.name.as_str(), self.seq.issue(), payload);
        let bytes = msg.encode()?;
        let conn = self
            .conns
            .get_mut(&token.0)
            .ok_or_else(|| NetError::SocketClosed(format!("token {}", token.0)))?;
        conn.out.extend_from_slice(&bytes);
        if let Err(e) = conn.flush() {
            let peer = conn.peer.clone();
            self.close(token);
            log::debug!("{}: send to {peer} failed: {e}", self.name);
            return Err(NetError::SocketClosed(peer));
        }
        Ok(())
    }

    pub fn close(&mut self, token: Token) {
        if let Some(mut c) = self.conns.remove(&token.0) {
            let _ = self.poll.registry().deregister(&mut c.stream);
        }
    }

    /// One poller wait of at most `timeout`, inside the `{poll}` frame,
    /// followed by socket IO. Returns what happened.
    pub fn poll_once(&mut self, timeout: Duration) -> io::Result<Vec<NetEvent>> {
        let t0 = Instant::now();
        let r = builtin(poll_site(), TimeCategory::IoWaitPoll, || {
            self.poll.poll(&mut self.events, Some(timeout))
        });
        self.stats.poll_invocations += 1;
        self.stats.wall_time_in_poll_ns += t0.elapsed().as_nanos() as u64;
        match r {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::Interrupted => return Ok(Vec::new()),
            Err(e) => return Err(e),
        }
        let ready: Vec<Token> = self.events.iter().map(|e| e.token()).collect();
        let mut out = Vec::new();
        for token in ready {
            if token == LISTENER {
                self.accept_all(&mut out)?;
            } else {
                self.service(token, &mut out);
            }
        }
        Ok(out)
    }

    fn accept_all(&mut self, out: &mut Vec<NetEvent>) -> io::Result<()> {
        loop {
            let Some(listener) = self.listener.as_ref() else {
                return Ok(());
            };
            match listener.accept() {
                Ok((stream, addr)) => {
                    let _ = stream.set_nodelay(true);
                    let token = self.adopt(stream, FrameDecoder::new(), addr.to_string())?;
                    out.push(NetEvent::Accepted(token));
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => return Ok(()),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => {
                    log::warn!("{}: accept failed: {e}", self.name);
                    return Ok(());
                }
            }
        }
    }

    fn service(&mut self, token: Token, out: &mut Vec<NetEvent>) {
        let Some(conn) = self.conns.get_mut(&token.0) else {
            return;
        };
        let mut closed = conn.flush().is_err();
        match conn.fill() {
            Ok(eof) => closed |= eof,
            Err(_) => closed = true,
        }
        loop {
            match conn.decoder.next_message() {
                Ok(Some(m)) => {
                    self.stats.messages_handled += 1;
                    out.push(NetEvent::Message(token, m));
                }
                Ok(None) => break,
                Err(e) => {
                    log::warn!("{}: dropping {}: {e}", self.name, conn.peer);
                    closed = true;
                    break;
                }
            }
        }
        if closed {
            self.close(token);
            out.push(NetEvent::Closed(token));
        }
    }

    /// Runs the event loop for `duration` (or until the handler stops it),
    /// waiting at most `timeout` per poll. The handler sees every event and
    /// then `None` once per iteration. Returns the counters of this loop.
    pub fn poll_loop(
        &mut self,
        duration: Option<Duration>,
        timeout: Duration,
        mut handler: impl FnMut(&mut Endpoint, Option<NetEvent>) -> Flow,
    ) -> io::Result<LoopStats> {
        let before = self.stats;
        let start = Instant::now();
        let deadline = duration.map(|d| start + d);
        loop {
            let now = Instant::now();
            if deadline.is_some_and(|d| now >= d) {
                break;
            }
            let wait = deadline.map_or(timeout, |d| timeout.min(d - now));
            let mut stop = false;
            for ev in self.poll_once(wait)? {
                stop |= handler(self, Some(ev)) == Flow::Stop;
            }
            stop |= handler(self, None) == Flow::Stop;
            if stop {
                break;
            }
        }
        self.stats.wall_time_ns += start.elapsed().as_nanos() as u64;
        Ok(self.stats.since(&before))
    }

    /// Accounts loop time for callers that drive `poll_once` themselves.
    pub fn add_loop_time(&mut self, d: Duration) {
        self.stats.wall_time_ns += d.as_nanos() as u64;
    }
}

pub fn loopback(port: u16) -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], port))
}
