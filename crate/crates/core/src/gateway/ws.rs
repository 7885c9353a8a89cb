//! Minimal RFC 6455 WebSocket: opening handshake, text/close/ping/pong
//! frames with fragmentation, and a blocking client for tests and tools.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

use super::{sha1, GatewayError};

const GUID: &str = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
const MAX_HEAD: usize = 8 * 1024;
pub const MAX_MESSAGE: usize = 1 << 20;

pub const OP_CONTINUATION: u8 = 0x0;
pub const OP_TEXT: u8 = 0x1;
pub const OP_BINARY: u8 = 0x2;
pub const OP_CLOSE: u8 = 0x8;
pub const OP_PING: u8 = 0x9;
pub const OP_PONG: u8 = 0xA;

pub fn accept_key(key: &str) -> String {
    STANDARD.encode(sha1(format!("{key}{GUID}").as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Text(String),
    Binary(Vec<u8>),
    Ping(Vec<u8>),
    Pong(Vec<u8>),
    Close,
}

fn protocol(m: impl Into<String>) -> GatewayError {
    GatewayError::Protocol(m.into())
}

/// Reads an HTTP head up to the blank line.
fn read_head(reader: &mut impl BufRead) -> Result<Vec<String>, GatewayError> {
    let mut lines = Vec::new();
    let mut total = 0;
    loop {
        let mut line = String::new();
        let n = reader.read_line(&mut line)?;
        total += n;
        if n == 0 {
            return Err(GatewayError::Handshake("connection closed during handshake".into()));
        }
        if total > MAX_HEAD {
            return Err(GatewayError::Handshake("request head too large".into()));
        }
        let line = line.trim_end_matches(['\r', '\n']).to_string();
        if line.is_empty() {
            return Ok(lines);
        }
        lines.push(line);
    }
}

fn header<'a>(lines: &'a [String], name: &str) -> Option<&'a str> {
    lines.iter().skip(1).find_map(|l| {
        let (k, v) = l.split_once(':')?;
        k.trim().eq_ignore_ascii_case(name).then(|| v.trim())
    })
}

/// Completes the server side of the opening handshake.
pub fn accept(stream: &mut TcpStream) -> Result<(), GatewayError> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let head = read_head(&mut reader)?;
    if reader.buffer().len() > 0 {
        return Err(GatewayError::Handshake("data sent before handshake completed".into()));
    }
    let request = head.first().map(String::as_str).unwrap_or("");
    let upgrade = header(&head, "upgrade").is_some_and(|v| v.eq_ignore_ascii_case("websocket"));
    let key = header(&head, "sec-websocket-key");
    let (true, true, Some(key)) = (request.starts_with("GET "), upgrade, key) else {
        let _ = stream.write_all(b"HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n");
        return Err(GatewayError::Handshake(format!("not a websocket upgrade: {request:?}")));
    };
    let response = format!(
        "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Accept: {}\r\n\r\n",
        accept_key(key)
    );
    stream.write_all(response.as_bytes())?;
    Ok(())
}

pub fn write_frame(
    w: &mut impl Write,
    opcode: u8,
    payload: &[u8],
    mask: Option<[u8; 4]>,
) -> io::Result<()> {
    let mut head = Vec::with_capacity(14);
    head.push(0x80 | opcode);
    let mask_bit = if mask.is_some() { 0x80 } else { 0 };
    match payload.len() {
        n @ 0..=125 => head.push(mask_bit | n as u8),
        n @ 126..=0xFFFF => {
            head.push(mask_bit | 126);
            head.extend_from_slice(&(n as u16).to_be_bytes());
        }
        n => {
            head.push(mask_bit | 127);
            head.extend_from_slice(&(n as u64).to_be_bytes());
        }
    }
    match mask {
        Some(key) => {
            head.extend_from_slice(&key);
            let masked: Vec<u8> = payload
                .iter()
                .enumerate()
                .map(|(i, b)| b ^ key[i % 4])
                .collect();
            w.write_all(&head)?;
            w.write_all(&masked)?;
        }
        None => {
            w.write_all(&head)?;
            w.write_all(payload)?;
        }
    }
    w.flush()
}

struct Frame {
    fin: bool,
    opcode: u8,
    payload: Vec<u8>,
}

fn read_frame(r: &mut impl Read, require_mask: bool) -> Result<Frame, GatewayError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    if b[0] & 0x70 != 0 {
        return Err(protocol("reserved bits set"));
    }
    let fin = b[0] & 0x80 != 0;
    let opcode = b[0] & 0x0F;
    let masked = b[1] & 0x80 != 0;
    if require_mask && !masked {
        return Err(protocol("client frames must be masked"));
    }
    let len = match b[1] & 0x7F {
        126 => {
            let mut e = [0u8; 2];
            r.read_exact(&mut e)?;
            u64::from(u16::from_be_bytes(e))
        }
        127 => {
            let mut e = [0u8; 8];
            r.read_exact(&mut e)?;
            u64::from_be_bytes(e)
        }
        n => u64::from(n),
    };
    if len > MAX_MESSAGE as u64 {
        return Err(protocol("frame too large"));
    }
    if opcode >= 0x8 && (len > 125 || !fin) {
        return Err(protocol("bad control frame"));
    }
    let mut key = [0u8; 4];
    if masked {
        r.read_exact(&mut key)?;
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    if masked {
        payload.iter_mut().enumerate().for_each(|(i, b)| *b ^= key[i % 4]);
    }
    Ok(Frame {
        fin,
        opcode,
        payload,
    })
}

/// Reads whole messages from a stream, joining fragments. Control frames
/// may arrive between fragments and are returned as they come.
pub struct MessageReader<R> {
    inner: R,
    require_mask: bool,
    partial: Vec<u8>,
    kind: Option<u8>,
}

impl<R: Read> MessageReader<R> {
    /// Servers must set `require_mask`; clients must not.
    pub fn new(inner: R, require_mask: bool) -> Self {
        MessageReader {
            inner,
            require_mask,
            partial: Vec::new(),
            kind: None,
        }
    }

    pub fn get_ref(&self) -> &R {
        &self.inner
    }

    pub fn read(&mut self) -> Result<Message, GatewayError> {
        loop {
            let frame = read_frame(&mut self.inner, self.require_mask)?;
            match frame.opcode {
                OP_CLOSE => return Ok(Message::Close),
                OP_PING => return Ok(Message::Ping(frame.payload)),
                OP_PONG => return Ok(Message::Pong(frame.payload)),
                OP_TEXT | OP_BINARY if self.kind.is_none() => self.kind = Some(frame.opcode),
                OP_CONTINUATION if self.kind.is_some() => {}
                other => return Err(protocol(format!("unexpected opcode {other:#x}"))),
            }
            self.partial.extend_from_slice(&frame.payload);
            if self.partial.len() > MAX_MESSAGE {
                return Err(protocol("message too large"));
            }
            if frame.fin {
                let data = std::mem::take(&mut self.partial);
                return match self.kind.take() {
                    Some(OP_TEXT) => String::from_utf8(data)
                        .map(Message::Text)
                        .map_err(|_| protocol("text frame is not UTF-8")),
                    _ => Ok(Message::Binary(data)),
                };
            }
        }
    }
}

/// Blocking client, used by the test suite and for scripting the runtime.
pub struct Client {
    stream: TcpStream,
    reader: MessageReader<BufReader<TcpStream>>,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, GatewayError> {
        let mut stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let key = STANDARD.encode(rand::random::<[u8; 16]>());
        let host = stream.peer_addr()?;
        write!(
            stream,
            "GET / HTTP/1.1\r\nHost: {host}\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Key: {key}\r\nSec-WebSocket-Version: 13\r\n\r\n"
        )?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let head = read_head(&mut reader)?;
        let status = head.first().map(String::as_str).unwrap_or("");
        if !status.contains(" 101 ") {
            return Err(GatewayError::Handshake(format!("server answered {status:?}")));
        }
        if header(&head, "sec-websocket-accept") != Some(accept_key(&key).as_str()) {
            return Err(GatewayError::Handshake("bad Sec-WebSocket-Accept".into()));
        }
        Ok(Client {
            stream,
            reader: MessageReader::new(reader, false),
        })
    }

    /// A handle that writes on the same connection, for sending from
    /// another thread while this one reads.
    pub fn sender(&self) -> io::Result<ClientSender> {
        Ok(ClientSender {
            stream: self.stream.try_clone()?,
        })
    }

    pub fn set_read_timeout(&self, timeout: Option<Duration>) -> io::Result<()> {
        self.stream.set_read_timeout(timeout)
    }

    pub fn send_text(&mut self, text: &str) -> io::Result<()> {
        write_frame(&mut self.stream, OP_TEXT, text.as_bytes(), Some(rand::random()))
    }

    pub fn send_raw(&mut self, opcode: u8, payload: &[u8]) -> io::Result<()> {
        write_frame(&mut self.stream, opcode, payload, Some(rand::random()))
    }

    /// Next text message; pings are answered, pongs skipped. `None` once
    /// the server closes.
    pub fn recv_text(&mut self) -> Result<Option<String>, GatewayError> {
        loop {
            match self.reader.read() {
                Ok(Message::Text(t)) => return Ok(Some(t)),
                Ok(Message::Ping(p)) => {
                    write_frame(&mut self.stream, OP_PONG, &p, Some(rand::random()))?
                }
                Ok(Message::Pong(_)) | Ok(Message::Binary(_)) => {}
                Ok(Message::Close) => return Ok(None),
                Err(GatewayError::Io(e)) if e.kind() == io::ErrorKind::UnexpectedEof => {
                    return Ok(None)
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn close(mut self) -> io::Result<()> {
        write_frame(&mut self.stream, OP_CLOSE, &[], Some(rand::random()))?;
        self.stream.shutdown(std::net::Shutdown::Both)
    }
}

pub struct ClientSender {
    stream: TcpStream,
}

impl ClientSender {
    pub fn send_text(&mut self, text: &str) -> io::Result<()> {
        write_frame(&mut self.stream, OP_TEXT, text.as_bytes(), Some(rand::random()))
    }

    pub fn send_raw(&mut self, opcode: u8, payload: &[u8]) -> io::Result<()> {
        write_frame(&mut self.stream, opcode, payload, Some(rand::random()))
    }
}
