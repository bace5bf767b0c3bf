use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::{parse_poll_response, parse_push_response, LinkError, Transport};
use crate::wire;

/// One short-lived TCP connection per request.
#[derive(Debug, Clone)]
pub struct TcpTransport {
    addr: String,
    timeout: Duration,
}

impl TcpTransport {
    pub fn new(endpoint: &str) -> Self {
        let addr = endpoint.strip_prefix("tcp://").unwrap_or(endpoint).trim_end_matches('/').to_string();
        TcpTransport { addr, timeout: Duration::from_secs(2) }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn connect(&self) -> Result<TcpStream, LinkError> {
        let unreachable = |e: std::io::Error| LinkError::Unreachable(format!("{}: {e}", self.addr));
        let addr = self
            .addr
            .to_socket_addrs()
            .map_err(unreachable)?
            .next()
            .ok_or_else(|| LinkError::Unreachable(format!("{}: no address", self.addr)))?;
        let stream = TcpStream::connect_timeout(&addr, self.timeout).map_err(unreachable)?;
        stream.set_read_timeout(Some(self.timeout)).map_err(unreachable)?;
        stream.set_write_timeout(Some(self.timeout)).map_err(unreachable)?;
        Ok(stream)
    }
}

impl Transport for TcpTransport {
    fn poll(&mut self, session_id: &str) -> Result<Vec<Vec<u8>>, LinkError> {
        let mut stream = self.connect()?;
        stream
            .write_all(&wire::encode_poll_request(session_id))
            .map_err(|e| LinkError::Unreachable(e.to_string()))?;
        parse_poll_response(&mut BufReader::new(stream))
    }

    fn push(&mut self, lines: &[Vec<u8>]) -> Result<usize, LinkError> {
        let mut stream = self.connect()?;
        let mut request: Vec<u8> = lines.concat();
        request.extend_from_slice(wire::END);
        stream.write_all(&request).map_err(|e| LinkError::Unreachable(e.to_string()))?;
        let mut reply = Vec::new();
        BufReader::new(stream)
            .read_until(b'\n', &mut reply)
            .map_err(|e| LinkError::Unreachable(e.to_string()))?;
        parse_push_response(&reply)
    }
}
