//! Scriptable stand-in for a remote-controlling server.

use std::collections::VecDeque;
use std::io::{self, BufRead, BufReader, Cursor, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;

use log::{debug, warn};

use super::{LinkError, Transport};
use crate::wire::{self, RemoteCommand, StatusPacket};

#[derive(Debug)]
struct MockState {
    pending: VecDeque<Vec<u8>>,
    received: Vec<Vec<u8>>,
    available: bool,
    polls: u64,
    rejected_lines: u64,
}

/// Shared mock server state. Cloning yields another handle to the same
/// server; it also works as an in-process [`Transport`].
#[derive(Debug, Clone)]
pub struct MockRemote {
    state: Arc<Mutex<MockState>>,
}

impl Default for MockRemote {
    fn default() -> Self {
        Self::new()
    }
}

impl MockRemote {
    pub fn new() -> Self {
        MockRemote {
            state: Arc::new(Mutex::new(MockState {
                pending: VecDeque::new(),
                received: Vec::new(),
                available: true,
                polls: 0,
                rejected_lines: 0,
            })),
        }
    }

    fn lock(&self) -> MutexGuard<'_, MockState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn enqueue(&self, cmd: &RemoteCommand) {
        self.lock().pending.push_back(wire::encode_command(cmd));
    }

    /// Queues a raw line verbatim, malformed or not.
    pub fn enqueue_raw(&self, line: impl Into<Vec<u8>>) {
        self.lock().pending.push_back(line.into());
    }

    pub fn set_available(&self, on: bool) {
        self.lock().available = on;
    }

    pub fn is_available(&self) -> bool {
        self.lock().available
    }

    pub fn pending_commands(&self) -> usize {
        self.lock().pending.len()
    }

    pub fn poll_count(&self) -> u64 {
        self.lock().polls
    }

    /// STAT lines accepted so far, in arrival order.
    pub fn received_lines(&self) -> Vec<Vec<u8>> {
        self.lock().received.clone()
    }

    pub fn received(&self) -> Vec<StatusPacket> {
        self.lock()
            .received
            .iter()
            .filter_map(|l| wire::decode_status_packet(l).ok())
            .collect()
    }

    /// Serves one connection's worth of request lines.
    pub fn respond(&self, reader: &mut impl BufRead, writer: &mut impl Write) -> io::Result<()> {
        let mut line = Vec::new();
        loop {
            line.clear();
            if reader.read_until(b'\n', &mut line)? == 0 {
                return Ok(());
            }
            let text = String::from_utf8_lossy(&line).into_owned();
            let body = text.trim_end_matches('\n');
            if let Some(_session) = body.strip_prefix("POLL|") {
                let mut st = self.lock();
                if !st.available {
                    writer.write_all(&wire::encode_err("unavailable"))?;
                } else {
                    st.polls += 1;
                    for cmd in st.pending.drain(..) {
                        writer.write_all(&cmd)?;
                    }
                    writer.write_all(wire::END)?;
                }
            } else if body.starts_with("STAT|") || body == "END" {
                let mut batch = Vec::new();
                if body != "END" {
                    batch.push(line.clone());
                    loop {
                        let mut next = Vec::new();
                        if reader.read_until(b'\n', &mut next)? == 0 || next == wire::END {
                            break;
                        }
                        batch.push(next);
                    }
                }
                let mut st = self.lock();
                if !st.available {
                    writer.write_all(&wire::encode_err("unavailable"))?;
                } else {
                    let mut stored = 0;
                    for l in batch {
                        if wire::decode_status_packet(&l).is_ok() {
                            st.received.push(l);
                            stored += 1;
                        } else {
                            st.rejected_lines += 1;
                        }
                    }
                    writer.write_all(&wire::encode_ack(stored))?;
                }
            } else if let Some(payload) = body.strip_prefix("ENQ|") {
                let cmd_line = format!("{payload}\n");
                match wire::decode_command(cmd_line.as_bytes()) {
                    Ok(_) => {
                        self.lock().pending.push_back(cmd_line.into_bytes());
                        writer.write_all(b"OK\n")?;
                    }
                    Err(e) => writer.write_all(&wire::encode_err(&e.to_string()))?,
                }
            } else if body == "AVAIL|on" || body == "AVAIL|off" {
                self.set_available(body == "AVAIL|on");
                writer.write_all(b"OK\n")?;
            } else if body == "DUMP" {
                let lines = self.received_lines();
                for l in lines {
                    writer.write_all(&l)?;
                }
                writer.write_all(wire::END)?;
            } else {
                writer.write_all(&wire::encode_err("unknown request"))?;
            }
            writer.flush()?;
        }
    }

    /// Starts a TCP listener on `addr` serving this state.
    pub fn serve(&self, addr: &str) -> Result<MockServerHandle, LinkError> {
        let listener = TcpListener::bind(addr).map_err(|e| LinkError::BindFailure(format!("{addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| LinkError::BindFailure(e.to_string()))?;
        let stop = Arc::new(AtomicBool::new(false));
        let remote = self.clone();
        let stop_flag = Arc::clone(&stop);
        let thread = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if stop_flag.load(Ordering::SeqCst) {
                    break;
                }
                match conn {
                    Ok(stream) => {
                        let remote = remote.clone();
                        std::thread::spawn(move || {
                            if let Err(e) = remote.serve_connection(stream) {
                                debug!("mock remote connection ended: {e}");
                            }
                        });
                    }
                    Err(e) => warn!("mock remote accept failed: {e}"),
                }
            }
        });
        Ok(MockServerHandle { addr: local, stop, thread: Some(thread) })
    }

    fn serve_connection(&self, stream: TcpStream) -> io::Result<()> {
        let mut writer = stream.try_clone()?;
        let mut reader = BufReader::new(stream);
        self.respond(&mut reader, &mut writer)
    }
}

/// Runs the mock server on `addr` until the handle is dropped.
pub fn serve_mock_remote(addr: &str) -> Result<(MockRemote, MockServerHandle), LinkError> {
    let remote = MockRemote::new();
    let handle = remote.serve(addr)?;
    Ok((remote, handle))
}

#[derive(Debug)]
pub struct MockServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl MockServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the accept loop exits.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockServerHandle {
    fn drop(&mut self) {
        if let Some(t) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            // wake the blocking accept
            let _ = TcpStream::connect(self.addr);
            let _ = t.join();
        }
    }
}

/// In-process transport: same request handling as the TCP server, no sockets.
impl Transport for MockRemote {
    fn poll(&mut self, session_id: &str) -> Result<Vec<Vec<u8>>, LinkError> {
        let mut out = Vec::new();
        self.respond(&mut Cursor::new(wire::encode_poll_request(session_id)), &mut out)
            .map_err(|e| LinkError::Unreachable(e.to_string()))?;
        super::parse_poll_response(&mut Cursor::new(out))
    }

    fn push(&mut self, lines: &[Vec<u8>]) -> Result<usize, LinkError> {
        let mut request: Vec<u8> = lines.concat();
        request.extend_from_slice(wire::END);
        let mut out = Vec::new();
        self.respond(&mut Cursor::new(request), &mut out)
            .map_err(|e| LinkError::Unreachable(e.to_string()))?;
        super::parse_push_response(&out)
    }
}
