//! The pulse-source emulator: answers `SetGate` with `Counts` straight from
//! the physics model, one connection handler per client, strictly serial
//! within a connection.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::os::unix::net::{UnixListener, UnixStream};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use thiserror::Error;

use qsync_core::source::CountSource;
use qsync_core::{LocalSource, Scenario, TimePs};

use crate::frame::{read_frame, write_frame, Frame, FrameError};
use crate::message::{
    Message, ERR_BAD_ARGUMENT, ERR_BAD_DETECTOR, ERR_MALFORMED,
};

/// Where a server listens or a client connects: `host:port` or a filesystem
/// socket path (anything containing `/`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    Unix(PathBuf),
}

impl FromStr for Endpoint {
    type Err = LinkError;

    fn from_str(s: &str) -> Result<Self, LinkError> {
        if s.is_empty() {
            return Err(LinkError::InvalidEndpoint(s.to_string()));
        }
        if s.contains('/') {
            Ok(Endpoint::Unix(PathBuf::from(s)))
        } else if s.contains(':') {
            Ok(Endpoint::Tcp(s.to_string()))
        } else {
            Err(LinkError::InvalidEndpoint(s.to_string()))
        }
    }
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Endpoint::Tcp(addr) => write!(f, "{addr}"),
            Endpoint::Unix(path) => write!(f, "{}", path.display()),
        }
    }
}

#[derive(Debug, Error)]
pub enum LinkError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid endpoint '{0}': expected host:port or a socket path")]
    InvalidEndpoint(String),
}

pub(crate) enum Conn {
    Tcp(TcpStream),
    Unix(UnixStream),
}

impl Conn {
    fn try_clone(&self) -> std::io::Result<Conn> {
        match self {
            Conn::Tcp(s) => s.try_clone().map(Conn::Tcp),
            Conn::Unix(s) => s.try_clone().map(Conn::Unix),
        }
    }

    fn shutdown_both(&self) {
        let _ = match self {
            Conn::Tcp(s) => s.shutdown(std::net::Shutdown::Both),
            Conn::Unix(s) => s.shutdown(std::net::Shutdown::Both),
        };
    }
}

impl Read for Conn {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        match self {
            Conn::Tcp(s) => s.read(buf),
            Conn::Unix(s) => s.read(buf),
        }
    }
}

impl Write for Conn {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        match self {
            Conn::Tcp(s) => s.write(buf),
            Conn::Unix(s) => s.write(buf),
        }
    }

    fn flush(&mut self) -> std::io::Result<()> {
        match self {
            Conn::Tcp(s) => s.flush(),
            Conn::Unix(s) => s.flush(),
        }
    }
}

enum Listener {
    Tcp(TcpListener),
    Unix(UnixListener),
}

impl Listener {
    fn accept(&self) -> std::io::Result<Conn> {
        match self {
            Listener::Tcp(l) => l.accept().map(|(s, _)| Conn::Tcp(s)),
            Listener::Unix(l) => l.accept().map(|(s, _)| Conn::Unix(s)),
        }
    }

    fn set_nonblocking(&self, nb: bool) -> std::io::Result<()> {
        match self {
            Listener::Tcp(l) => l.set_nonblocking(nb),
            Listener::Unix(l) => l.set_nonblocking(nb),
        }
    }
}

/// A running pulse-source server. Dropping the handle stops accepting new
/// connections; in-flight connections finish on their own threads.
pub struct Server {
    endpoint: Endpoint,
    shutdown: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
    connections: Arc<Mutex<Vec<Conn>>>,
    socket_path: Option<PathBuf>,
}

impl Server {
    /// The endpoint the server actually bound (resolves `:0` ports).
    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    /// Block until the server is shut down.
    pub fn join(mut self) {
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
        // Sever live connections so clients observe the loss immediately.
        for conn in self.connections.lock().expect("connection list").drain(..) {
            conn.shutdown_both();
        }
        if let Some(path) = &self.socket_path {
            let _ = std::fs::remove_file(path);
        }
    }
}

/// Bind and serve `scenario` on `endpoint` until the handle is dropped.
pub fn serve(scenario: Scenario, endpoint: &Endpoint) -> Result<Server, LinkError> {
    let source = LocalSource::new(scenario).map_err(std::io::Error::other)?;
    let period = source.scenario().period().map_err(std::io::Error::other)?;
    let n = source.scenario().n_detectors() as u8;
    let state = Arc::new(Mutex::new(source));

    let (listener, bound, socket_path) = match endpoint {
        Endpoint::Tcp(addr) => {
            let l = TcpListener::bind(addr)?;
            let bound = Endpoint::Tcp(l.local_addr()?.to_string());
            (Listener::Tcp(l), bound, None)
        }
        Endpoint::Unix(path) => {
            // A stale socket file from a previous run blocks the bind.
            let _ = std::fs::remove_file(path);
            let l = UnixListener::bind(path)?;
            (
                Listener::Unix(l),
                Endpoint::Unix(path.clone()),
                Some(path.clone()),
            )
        }
    };
    listener.set_nonblocking(true)?;

    let shutdown = Arc::new(AtomicBool::new(false));
    let connections: Arc<Mutex<Vec<Conn>>> = Arc::new(Mutex::new(Vec::new()));
    let accept_shutdown = Arc::clone(&shutdown);
    let accept_connections = Arc::clone(&connections);
    let accept_thread = thread::spawn(move || loop {
        if accept_shutdown.load(Ordering::SeqCst) {
            break;
        }
        match listener.accept() {
            Ok(conn) => {
                if let Ok(clone) = conn.try_clone() {
                    accept_connections.lock().expect("connection list").push(clone);
                }
                let state = Arc::clone(&state);
                thread::spawn(move || handle_connection(conn, state, period, n));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                thread::sleep(Duration::from_millis(5));
            }
            Err(_) => break,
        }
    });

    Ok(Server {
        endpoint: bound,
        shutdown,
        accept_thread: Some(accept_thread),
        connections,
        socket_path,
    })
}

fn send(conn: &mut Conn, message: &Message) -> bool {
    write_frame(conn, &message.encode()).is_ok()
}

fn handle_connection(mut conn: Conn, state: Arc<Mutex<LocalSource>>, period: TimePs, n: u8) {
    connection_loop(&mut conn, state, period, n);
    // The server keeps a clone for forced shutdown; close both halves here
    // so the client sees EOF as soon as the handler is done.
    conn.shutdown_both();
}

fn connection_loop(conn: &mut Conn, state: Arc<Mutex<LocalSource>>, period: TimePs, n: u8) {
    loop {
        let frame = match read_frame(conn) {
            Ok(frame) => frame,
            Err(FrameError::Closed) => return,
            Err(e) if e.is_malformed() => {
                let _ = send(conn, &Message::error(ERR_MALFORMED, e.to_string()));
                return;
            }
            Err(_) => return,
        };
        let message = match Message::decode(&frame) {
            Ok(message) => message,
            Err(e) => {
                let _ = send(conn, &Message::error(ERR_MALFORMED, e.to_string()));
                return;
            }
        };
        match message {
            Message::SetGate { detector_id, gate_time_ps, accumulation_us } => {
                if detector_id < 1 || detector_id > n {
                    if !send(
                        conn,
                        &Message::error(
                            ERR_BAD_DETECTOR,
                            format!("detector_id {detector_id} outside [1, {n}]"),
                        ),
                    ) {
                        return;
                    }
                    continue;
                }
                if gate_time_ps >= period.ps() as u64 {
                    if !send(
                        conn,
                        &Message::error(
                            ERR_BAD_ARGUMENT,
                            format!("gate_time_ps {gate_time_ps} beyond period {period}"),
                        ),
                    ) {
                        return;
                    }
                    continue;
                }
                let result = {
                    let mut source = state.lock().expect("source mutex");
                    source.counts(detector_id, TimePs::new(gate_time_ps as i64), accumulation_us)
                };
                let reply = match result {
                    Ok(count) => Message::Counts { detector_id, count },
                    Err(e) => Message::error(ERR_BAD_ARGUMENT, e.to_string()),
                };
                if !send(conn, &reply) {
                    return;
                }
            }
            // Swaps atomically between requests; no reply by contract.
            Message::SetAttack(profile) => {
                state.lock().expect("source mutex").set_attack(profile);
            }
            Message::Counts { .. } | Message::Error { .. } => {
                let _ = send(
                    conn,
                    &Message::error(ERR_MALFORMED, "unexpected message direction"),
                );
                return;
            }
        }
    }
}

/// Encode one message into raw frame bytes (test and tooling helper).
pub fn frame_bytes(message: &Message) -> Vec<u8> {
    let mut buf = Vec::new();
    write_frame(&mut buf, &message.encode()).expect("vec write");
    buf
}

/// Decode one frame from raw bytes (test and tooling helper).
pub fn parse_frame_bytes(bytes: &[u8]) -> Result<Frame, FrameError> {
    read_frame(&mut std::io::Cursor::new(bytes))
}
