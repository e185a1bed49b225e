//! Queue server. Accepts client requests, checks them, and hands them to a
//! fixed pool of workers through a bounded FIFO. A worker forwards each
//! sealed input share to its party and relays the sealed result shares
//! back. The queue never holds a key that opens the shares.

use std::collections::{HashSet, VecDeque};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};
use std::thread;

use privnet_core::link::TAG_LEN;
use privnet_core::{Frame, MsgType, SessionId};

use crate::config::QueueConfig;
use crate::error::{Result, ServingError};
use crate::protocol::{
    connect, hello_frame, parse_status, parse_submit, read_frame, status_frame, write_frame, StatusCode, ROLE_QUEUE,
};
use crate::server::{spawn_accept_loop, ServerHandle};

pub const QUEUE_CAPACITY: usize = 64;
pub const WORKERS: usize = 4;
/// Request ids remembered for duplicate detection.
const SEEN_LIMIT: usize = 1 << 16;

type Reply = std::result::Result<[Frame; 2], (StatusCode, String)>;

struct Job {
    session: SessionId,
    submit: Frame,
    shares: [Frame; 2],
    reply: mpsc::Sender<Reply>,
}

#[derive(Default)]
struct Seen {
    set: HashSet<SessionId>,
    order: VecDeque<SessionId>,
}

impl Seen {
    fn insert(&mut self, id: SessionId) -> bool {
        if !self.set.insert(id) {
            return false;
        }
        self.order.push_back(id);
        if self.order.len() > SEEN_LIMIT {
            if let Some(old) = self.order.pop_front() {
                self.set.remove(&old);
            }
        }
        true
    }

    fn forget(&mut self, id: SessionId) {
        self.set.remove(&id);
        self.order.retain(|&x| x != id);
    }
}

struct QueueState {
    config: QueueConfig,
    capacity: usize,
    seen: Mutex<Seen>,
    jobs: SyncSender<Job>,
}

pub fn start_queue(listener: TcpListener, config: QueueConfig) -> Result<ServerHandle> {
    start_queue_with(listener, config, QUEUE_CAPACITY, WORKERS)
}

/// As [`start_queue`] with an explicit queue bound and worker count.
pub fn start_queue_with(
    listener: TcpListener,
    config: QueueConfig,
    capacity: usize,
    workers: usize,
) -> Result<ServerHandle> {
    config.validate()?;
    if workers == 0 {
        return Err(ServingError::Invalid("queue needs at least one worker".into()));
    }
    let (tx, rx) = mpsc::sync_channel::<Job>(capacity);
    let rx = Arc::new(Mutex::new(rx));
    for _ in 0..workers {
        let rx = rx.clone();
        let config = config.clone();
        thread::spawn(move || worker(rx, config));
    }
    let state = Arc::new(QueueState { config, capacity, seen: Mutex::new(Seen::default()), jobs: tx });
    spawn_accept_loop(listener, move |stream| state.handle(stream))
}

pub fn serve_queue(config: QueueConfig) -> Result<ServerHandle> {
    let listener = TcpListener::bind(&config.queue)?;
    start_queue(listener, config)
}

fn worker(rx: Arc<Mutex<Receiver<Job>>>, config: QueueConfig) {
    loop {
        let job = match rx.lock().unwrap().recv() {
            Ok(job) => job,
            Err(_) => return,
        };
        let out = dispatch(&config, &job);
        let _ = job.reply.send(out);
    }
}

fn unavailable(e: ServingError) -> (StatusCode, String) {
    match e {
        ServingError::Timeout(m) => (StatusCode::Timeout, m),
        ServingError::Status { code, message } => (code, message),
        other => (StatusCode::ServiceUnavailable, other.to_string()),
    }
}

fn dispatch(config: &QueueConfig, job: &Job) -> Reply {
    let timeout = config.timeout();
    let mut streams: Vec<TcpStream> = Vec::with_capacity(3);
    for (i, ep) in config.parties.iter().enumerate() {
        let s = connect(ep, timeout).map_err(|e| (StatusCode::ServiceUnavailable, format!("party {i}: {e}")))?;
        streams.push(s);
    }
    let send = |s: &mut TcpStream, i: usize| -> Result<()> {
        write_frame(s, &hello_frame(job.session, ROLE_QUEUE, 0))?;
        write_frame(s, &job.submit)?;
        if i < 2 {
            write_frame(s, &job.shares[i])?;
        }
        Ok(())
    };
    for (i, s) in streams.iter_mut().enumerate() {
        send(s, i).map_err(|e| unavailable(ServingError::Unavailable(format!("party {i}: {e}"))))?;
    }
    // Replies are read in parallel so that one party failing fast is not
    // hidden behind another one waiting on it.
    let (tx, rx) = mpsc::channel();
    let mut closers = Vec::with_capacity(3);
    for (i, mut s) in streams.into_iter().enumerate() {
        if let Ok(c) = s.try_clone() {
            closers.push(c);
        }
        let tx = tx.clone();
        thread::spawn(move || {
            let _ = tx.send((i, read_frame(&mut s)));
        });
    }
    drop(tx);
    let close_all = || {
        for c in &closers {
            let _ = c.shutdown(Shutdown::Both);
        }
    };
    let mut results: [Option<Frame>; 2] = [None, None];
    for (i, reply) in rx.iter() {
        let outcome = match reply {
            Err(e) => {
                let (code, m) = unavailable(e);
                Err((code, format!("party {i}: {m}")))
            }
            Ok(f) => match f.msg_type {
                MsgType::ResultShare if i < 2 && f.session == job.session && f.seq == i as u64 => {
                    results[i] = Some(f);
                    Ok(())
                }
                MsgType::Status => match parse_status(&f) {
                    Ok((StatusCode::Ok, _)) if i == 2 => Ok(()),
                    Ok((code, m)) => Err((code, m)),
                    Err(e) => Err(unavailable(e)),
                },
                other => Err((StatusCode::ServiceUnavailable, format!("party {i} sent {other:?}"))),
            },
        };
        if let Err(e) = outcome {
            close_all();
            return Err(e);
        }
    }
    match results {
        [Some(a), Some(b)] => Ok([a, b]),
        _ => Err((StatusCode::ServiceUnavailable, "missing result share".to_string())),
    }
}

impl QueueState {
    fn handle(&self, mut stream: TcpStream) {
        let timeout = self.config.timeout();
        if stream.set_read_timeout(Some(timeout)).is_err() || stream.set_write_timeout(Some(timeout)).is_err() {
            return;
        }
        let (session, reply) = match self.read_request(&mut stream) {
            Ok((session, submit, shares)) => (session, self.run(session, submit, shares)),
            Err((session, code, m)) => (session, Err((code, m))),
        };
        match reply {
            Ok(frames) => {
                for f in &frames {
                    if write_frame(&mut stream, f).is_err() {
                        return;
                    }
                }
                let _ = write_frame(&mut stream, &status_frame(session, StatusCode::Ok, ""));
            }
            Err((code, m)) => {
                let _ = write_frame(&mut stream, &status_frame(session, code, &m));
            }
        }
    }

    #[allow(clippy::type_complexity)]
    fn read_request(
        &self,
        stream: &mut TcpStream,
    ) -> std::result::Result<(SessionId, Frame, [Frame; 2]), (SessionId, StatusCode, String)> {
        let bad = |s: SessionId, m: String| (s, StatusCode::BadRequest, m);
        // All three frames are read before any check so that a rejected
        // client is never cut off while still writing.
        let submit = read_frame(stream).map_err(|e| bad(SessionId::default(), e.to_string()))?;
        let session = submit.session;
        let frames = [read_frame(stream), read_frame(stream)];
        let (n, model) = parse_submit(&submit).map_err(|e| bad(session, e.to_string()))?;
        if model != self.config.model {
            return Err(bad(session, format!("unknown model {model:?}")));
        }
        let expected = self.config.input_shape.len();
        if n != expected {
            return Err(bad(session, format!("input has {n} values, model takes {expected}")));
        }
        let mut shares: [Option<Frame>; 2] = [None, None];
        for f in frames {
            let f = f.map_err(|e| bad(session, e.to_string()))?;
            if f.msg_type != MsgType::SharePayload || f.session != session || f.seq > 1 {
                return Err(bad(session, "expected SHARE_PAYLOAD addressed to party 0 or 1".into()));
            }
            if f.payload.len() != 8 * n + TAG_LEN {
                return Err(bad(
                    session,
                    format!("share for party {} has {} bytes, expected {}", f.seq, f.payload.len(), 8 * n + TAG_LEN),
                ));
            }
            let slot = &mut shares[f.seq as usize];
            if slot.is_some() {
                return Err(bad(session, format!("two shares addressed to party {}", f.seq)));
            }
            *slot = Some(f);
        }
        let [Some(a), Some(b)] = shares else { unreachable!() };
        Ok((session, submit, [a, b]))
    }

    fn run(&self, session: SessionId, submit: Frame, shares: [Frame; 2]) -> Reply {
        if !self.seen.lock().unwrap().insert(session) {
            return Err((StatusCode::Duplicate, format!("request {session} was already submitted")));
        }
        let (tx, rx) = mpsc::channel();
        match self.jobs.try_send(Job { session, submit, shares, reply: tx }) {
            Ok(()) => {}
            Err(TrySendError::Full(_)) => {
                self.seen.lock().unwrap().forget(session);
                return Err((StatusCode::Busy, format!("{} requests pending", self.capacity)));
            }
            Err(TrySendError::Disconnected(_)) => {
                return Err((StatusCode::ServiceUnavailable, "no workers".into()));
            }
        }
        match rx.recv_timeout(self.config.timeout()) {
            Ok(r) => r,
            Err(RecvTimeoutError::Timeout) => Err((StatusCode::Timeout, format!("request {session} timed out"))),
            Err(RecvTimeoutError::Disconnected) => Err((StatusCode::ServiceUnavailable, "worker failed".into())),
        }
    }
}
