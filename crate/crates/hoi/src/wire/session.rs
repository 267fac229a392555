//! Streaming sessions over a reliable byte transport.
//!
//! A producer pushes messages at its native rate; the consumer exposes
//! latest-value semantics per message type plus an ordered log, and measures
//! one-way latency from each message's timestamp to its delivery time.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use crate::wire::{
    decode, encode, us_to_seconds, DecodeOutcome, MessageKind, ProtocolError, WireError,
    WireMessage,
};

/// Reliable, ordered byte pipe.
pub trait Transport: Send {
    fn send(&mut self, bytes: &[u8]) -> Result<(), WireError>;
    /// Non-blocking read; `Ok(0)` means nothing available right now.
    fn recv(&mut self, buf: &mut [u8]) -> Result<usize, WireError>;
    fn is_closed(&self) -> bool;
    fn close(&mut self);
}

/// In-memory duplex pipe for tests and the simulated pipeline.
pub struct LoopbackTransport {
    incoming: Arc<Mutex<Vec<u8>>>,
    outgoing: Arc<Mutex<Vec<u8>>>,
    closed: Arc<AtomicBool>,
}

impl LoopbackTransport {
    /// A connected pair of endpoints.
    pub fn pair() -> (LoopbackTransport, LoopbackTransport) {
        let a_to_b = Arc::new(Mutex::new(Vec::new()));
        let b_to_a = Arc::new(Mutex::new(Vec::new()));
        let closed = Arc::new(AtomicBool::new(false));
        (
            LoopbackTransport {
                incoming: Arc::clone(&b_to_a),
                outgoing: Arc::clone(&a_to_b),
                closed: Arc::clone(&closed),
            },
            LoopbackTransport {
                incoming: a_to_b,
                outgoing: b_to_a,
                closed,
            },
        )
    }
}

impl Transport for LoopbackTransport {
    fn send(&mut self, bytes: &[u8]) -> Result<(), WireError> {
        if self.is_closed() {
            return Err(WireError::SessionClosed);
        }
        self.outgoing.lock().unwrap().extend_from_slice(bytes);
        Ok(())
    }

    fn recv(&mut self, buf: &mut [u8]) -> Result<usize, WireError> {
        let mut incoming = self.incoming.lock().unwrap();
        let n = incoming.len().min(buf.len());
        if n == 0 {
            return if self.is_closed() {
                Err(WireError::SessionClosed)
            } else {
                Ok(0)
            };
        }
        buf[..n].copy_from_slice(&incoming[..n]);
        incoming.drain(..n);
        Ok(n)
    }

    fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }

    fn close(&mut self) {
        self.closed.store(true, Ordering::SeqCst);
    }
}

/// Non-blocking TCP transport.
pub struct TcpTransport {
    stream: TcpStream,
    closed: bool,
}

impl TcpTransport {
    pub fn new(stream: TcpStream) -> Result<TcpTransport, WireError> {
        stream.set_nodelay(true)?;
        stream.set_nonblocking(true)?;
        Ok(TcpTransport {
            stream,
            closed: false,
        })
    }
}

/// Accept one connection on `addr` (e.g. `127.0.0.1:30301`).
pub fn listen_tcp(addr: &str) -> Result<TcpTransport, WireError> {
    let listener = TcpListener::bind(addr)?;
    let (stream, _) = listener.accept()?;
    TcpTransport::new(stream)
}

pub fn connect_tcp(addr: &str) -> Result<TcpTransport, WireError> {
    TcpTransport::new(TcpStream::connect(addr)?)
}

impl Transport for TcpTransport {
    fn send(&mut self, bytes: &[u8]) -> Result<(), WireError> {
        if self.closed {
            return Err(WireError::SessionClosed);
        }
        let mut remaining = bytes;
        while !remaining.is_empty() {
            match self.stream.write(remaining) {
                Ok(0) => {
                    self.closed = true;
                    return Err(WireError::SessionClosed);
                }
                Ok(n) => remaining = &remaining[n..],
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => continue,
                Err(e) => {
                    self.closed = true;
                    return Err(e.into());
                }
            }
        }
        Ok(())
    }

    fn recv(&mut self, buf: &mut [u8]) -> Result<usize, WireError> {
        if self.closed {
            return Err(WireError::SessionClosed);
        }
        match self.stream.read(buf) {
            Ok(0) => {
                self.closed = true;
                Err(WireError::SessionClosed)
            }
            Ok(n) => Ok(n),
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => Ok(0),
            Err(e) => {
                self.closed = true;
                Err(e.into())
            }
        }
    }

    fn is_closed(&self) -> bool {
        self.closed
    }

    fn close(&mut self) {
        let _ = self.stream.shutdown(std::net::Shutdown::Both);
        self.closed = true;
    }
}

/// Sending side of a one-way stream.
pub struct ProducerSession<T: Transport> {
    transport: T,
    sent: u64,
}

impl<T: Transport> ProducerSession<T> {
    pub fn new(transport: T) -> Self {
        ProducerSession { transport, sent: 0 }
    }

    pub fn send(&mut self, message: &WireMessage) -> Result<(), WireError> {
        let bytes = encode(message)?;
        self.transport.send(&bytes)?;
        self.sent += 1;
        Ok(())
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn is_closed(&self) -> bool {
        self.transport.is_closed()
    }

    pub fn close(&mut self) {
        self.transport.close();
    }
}

/// Receiving side: latest-value per message type, an ordered log, and
/// per-message one-way latency samples (seconds).
pub struct ConsumerSession<T: Transport> {
    transport: T,
    decoder: crate::wire::Decoder,
    latest: BTreeMap<MessageKind, WireMessage>,
    log: Vec<(f64, WireMessage)>,
    latencies: Vec<f64>,
    closed: bool,
}

impl<T: Transport> ConsumerSession<T> {
    pub fn new(transport: T) -> Self {
        ConsumerSession {
            transport,
            decoder: crate::wire::Decoder::new(),
            latest: BTreeMap::new(),
            log: Vec::new(),
            latencies: Vec::new(),
            closed: false,
        }
    }

    /// Drain the transport at time `now` (seconds). Returns the number of
    /// messages delivered, or the session-closed status once the transport
    /// is gone and its bytes are exhausted.
    pub fn pump(&mut self, now: f64) -> Result<usize, WireError> {
        let mut buf = [0u8; 4096];
        loop {
            match self.transport.recv(&mut buf) {
                Ok(0) => break,
                Ok(n) => self.decoder.push(&buf[..n]),
                Err(WireError::SessionClosed) => {
                    self.closed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let mut delivered = 0;
        while let Some(message) = self.decoder.next_message() {
            self.latencies
                .push(now - us_to_seconds(message.timestamp_us));
            self.latest.insert(message.kind(), message.clone());
            self.log.push((now, message));
            delivered += 1;
        }
        if delivered == 0 && self.closed && self.decoder.buffered() == 0 {
            return Err(WireError::SessionClosed);
        }
        Ok(delivered)
    }

    /// Newest message of a kind, skipping anything older.
    pub fn latest(&self, kind: MessageKind) -> Option<&WireMessage> {
        self.latest.get(&kind)
    }

    /// Newest message of a kind, consuming it.
    pub fn take_latest(&mut self, kind: MessageKind) -> Option<WireMessage> {
        self.latest.remove(&kind)
    }

    /// Every delivered message with its delivery time, in order.
    pub fn log(&self) -> &[(f64, WireMessage)] {
        &self.log
    }

    pub fn latencies(&self) -> &[f64] {
        &self.latencies
    }

    pub fn protocol_errors(&self) -> &[ProtocolError] {
        self.decoder.protocol_errors()
    }

    pub fn is_closed(&self) -> bool {
        self.closed || self.transport.is_closed()
    }
}

// decode is re-exported by the parent; keep the import used.
const _: fn(&[u8]) -> DecodeOutcome = decode;
