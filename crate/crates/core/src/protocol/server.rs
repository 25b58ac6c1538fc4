use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::{Control, Session};
use crate::env::{EnvConfig, Scene};
use crate::exec::Execution;

/// Environment variable holding the default listen address.
pub const BIND_ENV: &str = "NBV_BIND";

/// How often blocked reads and accepts check the shutdown flag.
const POLL: Duration = Duration::from_millis(50);

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut)
}

/// Runs the request loop on one stream until `close`, end of input or
/// `shutdown`. Any running episode is aborted on exit.
///
/// Reads that time out (see [`TcpStream::set_read_timeout`]) keep the
/// partial line and only serve to poll `shutdown`.
pub fn serve_stream(
    session: &mut Session,
    mut reader: impl BufRead,
    mut writer: impl Write,
    shutdown: &AtomicBool,
) -> io::Result<()> {
    let mut line = Vec::new();
    let result = loop {
        if shutdown.load(Ordering::Relaxed) {
            break Ok(());
        }
        match reader.read_until(b'\n', &mut line) {
            Ok(0) => break Ok(()),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => continue,
            Err(e) => break Err(e),
        }
        let body = line.strip_suffix(b"\n").unwrap_or(&line);
        let body = body.strip_suffix(b"\r").unwrap_or(body);
        if body.iter().all(u8::is_ascii_whitespace) {
            line.clear();
            continue;
        }
        let (reply, control) = session.handle(body);
        line.clear();
        if let Err(e) = writer.write_all(reply.to_line().as_bytes()).and_then(|_| writer.flush()) {
            break Err(e);
        }
        if control == Control::Close {
            break Ok(());
        }
    };
    session.abort();
    result
}

/// TCP front end: one thread and one [`Session`] per connection.
pub struct Server {
    listener: TcpListener,
    config: Arc<EnvConfig>,
    scenes: Arc<[Arc<Scene>]>,
    exec: Execution,
    shutdown: Arc<AtomicBool>,
}

impl Server {
    pub fn bind(
        addr: impl ToSocketAddrs,
        config: Arc<EnvConfig>,
        scenes: Arc<[Arc<Scene>]>,
        exec: Execution,
    ) -> io::Result<Self> {
        if scenes.is_empty() {
            return Err(io::Error::new(ErrorKind::InvalidInput, "server needs at least one scene"));
        }
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(Self {
            listener,
            config,
            scenes,
            exec,
            shutdown: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Setting this flag stops the accept loop and every connection.
    pub fn shutdown_handle(&self) -> Arc<AtomicBool> {
        self.shutdown.clone()
    }

    /// Accepts connections until shutdown, then waits for their threads.
    pub fn run(self) -> io::Result<()> {
        let mut workers = Vec::new();
        while !self.shutdown.load(Ordering::Relaxed) {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    log::info!("connection from {peer}");
                    let mut session = Session::new(self.config.clone(), self.scenes.clone(), self.exec);
                    let shutdown = self.shutdown.clone();
                    workers.push(thread::spawn(move || {
                        if let Err(e) = serve_connection(&mut session, stream, &shutdown) {
                            log::warn!("connection from {peer}: {e}");
                        }
                        log::info!("connection from {peer} closed");
                    }));
                }
                Err(e) if is_timeout(&e) => thread::sleep(POLL),
                Err(e) => log::warn!("accept failed: {e}"),
            }
            workers.retain(|w| !w.is_finished());
        }
        for w in workers {
            let _ = w.join();
        }
        Ok(())
    }
}

fn serve_connection(session: &mut Session, stream: TcpStream, shutdown: &AtomicBool) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(POLL))?;
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    serve_stream(session, reader, stream, shutdown)
}
