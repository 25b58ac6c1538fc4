use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};

use serde_json::{json, Value};
use thiserror::Error;

use super::Reply;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("server closed the connection")]
    Disconnected,
    #[error("unparseable reply {line:?}: {message}")]
    BadReply { line: String, message: String },
}

/// Minimal blocking client, one request in flight at a time.
pub struct Client<R, W> {
    reader: R,
    writer: W,
}

impl Client<BufReader<TcpStream>, TcpStream> {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self::new(BufReader::new(stream.try_clone()?), stream))
    }
}

impl<R: BufRead, W: Write> Client<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self { reader, writer }
    }

    /// Sends one raw line (a newline is appended) and reads the reply.
    pub fn send_raw(&mut self, line: &[u8]) -> Result<Reply, ClientError> {
        self.writer.write_all(line)?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        let mut buf = String::new();
        if self.reader.read_line(&mut buf)? == 0 {
            return Err(ClientError::Disconnected);
        }
        serde_json::from_str(&buf).map_err(|e| ClientError::BadReply {
            line: buf.trim_end().to_string(),
            message: e.to_string(),
        })
    }

    pub fn request(&mut self, msg: &Value) -> Result<Reply, ClientError> {
        self.send_raw(msg.to_string().as_bytes())
    }

    pub fn hello(&mut self, want_frames: bool) -> Result<Reply, ClientError> {
        self.request(&json!({"type": "hello", "want_frames": want_frames}))
    }

    pub fn reset(&mut self, scene: Option<&str>, seed: Option<u64>) -> Result<Reply, ClientError> {
        let mut msg = json!({"type": "reset"});
        if let Some(s) = scene {
            msg["scene"] = json!(s);
        }
        if let Some(s) = seed {
            msg["seed"] = json!(s);
        }
        self.request(&msg)
    }

    pub fn step(&mut self, action: [f64; 5]) -> Result<Reply, ClientError> {
        self.request(&json!({"type": "step", "action": action}))
    }

    pub fn close(&mut self) -> Result<Reply, ClientError> {
        self.request(&json!({"type": "close"}))
    }
}
