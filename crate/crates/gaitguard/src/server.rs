//! TCP mitigation server. One thread per connection; frames within a
//! connection are answered in order of receipt.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Instant;

use gaitguard_core::mitigate::NoiseConfig;
use gaitguard_core::stream::{
    Header, MeterEvent, MeterSnapshot, Message, MsgType, Session, ThroughputMeter, WireError, DEFAULT_MAX_PAYLOAD,
    HEADER_LEN,
};

use crate::io::regions::RegionMap;

#[derive(Debug, Clone)]
pub struct ServerOptions {
    /// Initial config of every connection.
    pub config: NoiseConfig,
    /// Regions used when a frame carries no trailer.
    pub regions: Arc<RegionMap>,
    pub max_payload: u32,
    pub meter_window_s: f64,
    /// Stop accepting after this many connections, once they all close.
    pub max_connections: Option<usize>,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions {
            config: NoiseConfig::default(),
            regions: Arc::new(RegionMap::new()),
            max_payload: DEFAULT_MAX_PAYLOAD,
            meter_window_s: 2.0,
            max_connections: None,
        }
    }
}

/// Server-wide meter over all connections.
#[derive(Debug)]
struct Aggregate {
    meter: Mutex<ThroughputMeter>,
    next_id: AtomicU32,
    start: Instant,
}

impl Aggregate {
    fn now(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn record(&self, event: MeterEvent, id: u32) {
        let t = self.now();
        self.meter.lock().expect("meter lock").record(event, id, t);
    }
}

pub struct Server {
    listener: TcpListener,
    opts: Arc<ServerOptions>,
    shutdown: Arc<AtomicBool>,
    aggregate: Arc<Aggregate>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, opts: ServerOptions) -> io::Result<Server> {
        let listener = TcpListener::bind(addr)?;
        let aggregate = Arc::new(Aggregate {
            meter: Mutex::new(ThroughputMeter::new(opts.meter_window_s)),
            next_id: AtomicU32::new(0),
            start: Instant::now(),
        });
        Ok(Server {
            listener,
            opts: Arc::new(opts),
            shutdown: Arc::new(AtomicBool::new(false)),
            aggregate,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until shut down or until `max_connections`
    /// connections have been served and closed.
    pub fn run(self) -> io::Result<()> {
        let mut workers: Vec<JoinHandle<()>> = Vec::new();
        let accepted = AtomicUsize::new(0);
        for stream in self.listener.incoming() {
            if self.shutdown.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let opts = Arc::clone(&self.opts);
            let agg = Arc::clone(&self.aggregate);
            workers.push(thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                if let Err(e) = handle_connection(stream, &opts, &agg) {
                    log::debug!("connection {peer:?} ended: {e}");
                }
            }));
            let n = accepted.fetch_add(1, Ordering::SeqCst) + 1;
            if self.opts.max_connections.is_some_and(|m| n >= m) {
                break;
            }
        }
        for w in workers {
            let _ = w.join();
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        let shutdown = Arc::clone(&self.shutdown);
        let aggregate = Arc::clone(&self.aggregate);
        let join = thread::spawn(move || self.run());
        Ok(ServerHandle {
            addr,
            shutdown,
            aggregate,
            join: Some(join),
        })
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    aggregate: Arc<Aggregate>,
    join: Option<JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Rates over every connection.
    pub fn aggregate_stats(&self) -> MeterSnapshot {
        let now = self.aggregate.now();
        self.aggregate.meter.lock().expect("meter lock").snapshot(now)
    }

    /// Stops accepting and waits for open connections to close.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        if let Some(j) = self.join.take() {
            let _ = j.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.join.is_some() {
            self.stop();
        }
    }
}

/// Fills `buf`, or returns `Ok(false)` on a clean end of stream before the
/// first byte.
fn read_header(r: &mut impl Read, buf: &mut [u8; HEADER_LEN]) -> io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

fn discard(r: &mut impl Read, len: u32) -> io::Result<()> {
    let copied = io::copy(&mut r.take(len as u64), &mut io::sink())?;
    if copied < len as u64 {
        return Err(io::ErrorKind::UnexpectedEof.into());
    }
    Ok(())
}

fn send(w: &mut impl Write, msg: &Message) -> io::Result<()> {
    w.write_all(&msg.header.encode())?;
    w.write_all(&msg.payload)?;
    w.flush()
}

fn handle_connection(stream: TcpStream, opts: &ServerOptions, agg: &Aggregate) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let start = Instant::now();
    let mut reader = BufReader::with_capacity(1 << 16, stream.try_clone()?);
    let mut writer = BufWriter::with_capacity(1 << 16, stream);
    let mut session = Session::new(opts.config);
    session.max_payload = opts.max_payload;
    let mut meter = ThroughputMeter::new(opts.meter_window_s);
    let mut hb = [0u8; HEADER_LEN];
    loop {
        if !read_header(&mut reader, &mut hb)? {
            return Ok(());
        }
        let header = match Header::decode(&hb) {
            Ok(h) => h,
            Err(e) if e.is_fatal() => {
                send(&mut writer, &Message::error(&e))?;
                return Ok(());
            }
            Err(e) => {
                let len = Header::raw_payload_len(&hb);
                if len > session.max_payload {
                    send(&mut writer, &Message::error(&e))?;
                    return Ok(());
                }
                discard(&mut reader, len)?;
                send(&mut writer, &Message::error(&e))?;
                continue;
            }
        };
        // An oversized payload is not read; the stream cannot be resynced.
        if let Err(e) = session.admit(&header) {
            send(&mut writer, &Message::error(&e))?;
            return Ok(());
        }
        let mut payload = vec![0u8; header.payload_len as usize];
        reader.read_exact(&mut payload)?;
        let msg = Message { header, payload };
        let is_frame = header.msg_type == MsgType::RawFrame;
        let id = header.frame_id;
        let global = agg.next_id.fetch_add(1, Ordering::Relaxed);
        if is_frame {
            meter.record(MeterEvent::Received, id, start.elapsed().as_secs_f64());
            agg.record(MeterEvent::Received, global);
        }
        let reply = session.handle(
            &msg,
            |fid| opts.regions.get(&fid),
            || meter.snapshot(start.elapsed().as_secs_f64()),
        );
        let ok_frame = is_frame && reply.header.msg_type == MsgType::MitigatedFrame;
        if ok_frame {
            meter.record(MeterEvent::Processed, id, start.elapsed().as_secs_f64());
            agg.record(MeterEvent::Processed, global);
        }
        send(&mut writer, &reply)?;
        if ok_frame {
            meter.record(MeterEvent::Sent, id, start.elapsed().as_secs_f64());
            agg.record(MeterEvent::Sent, global);
        }
    }
}

/// Reads one whole message from a stream (client side).
pub fn read_message(r: &mut impl Read) -> Result<Option<Message>, ReadError> {
    let mut hb = [0u8; HEADER_LEN];
    if !read_header(r, &mut hb).map_err(ReadError::Io)? {
        return Ok(None);
    }
    let header = Header::decode(&hb).map_err(ReadError::Wire)?;
    let mut payload = vec![0u8; header.payload_len as usize];
    r.read_exact(&mut payload).map_err(ReadError::Io)?;
    Ok(Some(Message { header, payload }))
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Io(io::Error),
    #[error(transparent)]
    Wire(WireError),
}

pub fn write_message(w: &mut impl Write, msg: &Message) -> io::Result<()> {
    send(w, msg)
}
