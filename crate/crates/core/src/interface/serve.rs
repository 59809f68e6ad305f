//! TCP front end for [`Bridge`]: wall-clock paced ticks streamed to every
//! connected client.
//!
//! The first client to connect controls the episode; later clients observe.
//! An observer can send `{"type":"control","action":"claim"}` to take over
//! once the controller has gone; a claim while a controller is connected is
//! refused. Each connection gets a reader and a writer thread, and inbound
//! messages reach the engine only at tick boundaries.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::engine::{Engine, EngineError};

use super::bridge::{
    command_table, parse_inbound, vocabulary, Bridge, ControlAction, ControlEvent, Inbound, Outbound, RecordedInbound, Role,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServeConfig {
    /// Simulated seconds per wall-clock second.
    pub speed: f64,
    /// Stop after this many ticks.
    pub max_ticks: Option<u64>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self { speed: 1.0, max_ticks: None }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("speed must be positive and finite")]
    Speed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub struct ServeOutcome {
    pub engine: Engine,
    pub record: Vec<RecordedInbound>,
}

struct Client {
    tx: Sender<String>,
    stream: TcpStream,
}

#[derive(Default)]
struct Hub {
    clients: BTreeMap<u64, Client>,
    controller: Option<u64>,
    next_id: u64,
    writers: Vec<JoinHandle<()>>,
}

impl Hub {
    fn send(&self, id: u64, msg: &Outbound) {
        if let Some(c) = self.clients.get(&id) {
            let _ = c.tx.send(msg.to_line());
        }
    }

    fn broadcast(&self, lines: &[String]) {
        for c in self.clients.values() {
            for l in lines {
                let _ = c.tx.send(l.clone());
            }
        }
    }
}

type Shared = Arc<Mutex<Hub>>;

fn lock(hub: &Shared) -> std::sync::MutexGuard<'_, Hub> {
    hub.lock().unwrap_or_else(|e| e.into_inner())
}

/// Serves `engine` on `listener` until the episode ends.
pub fn serve(listener: TcpListener, engine: Engine, cfg: &ServeConfig) -> Result<ServeOutcome, ServeError> {
    if !(cfg.speed > 0.0 && cfg.speed.is_finite()) {
        return Err(ServeError::Speed);
    }
    let t_r = engine.scenario().iso.t_r;
    let hub: Shared = Arc::default();
    let (tx_in, rx_in) = mpsc::channel::<(u64, Inbound)>();
    let done = Arc::new(AtomicBool::new(false));

    listener.set_nonblocking(true)?;
    let acceptor = {
        let (hub, done) = (hub.clone(), done.clone());
        thread::spawn(move || accept_loop(listener, hub, tx_in, done, t_r))
    };

    let result = tick_loop(Bridge::new(engine), &hub, &rx_in, cfg, t_r);

    done.store(true, Ordering::SeqCst);
    let _ = acceptor.join();
    let writers = {
        let mut h = lock(&hub);
        for c in h.clients.values() {
            // Readers block on the socket; closing the read half wakes them.
            let _ = c.stream.shutdown(Shutdown::Read);
        }
        h.clients.clear();
        h.controller = None;
        std::mem::take(&mut h.writers)
    };
    for w in writers {
        let _ = w.join();
    }
    result
}

fn tick_loop(mut bridge: Bridge, hub: &Shared, rx_in: &Receiver<(u64, Inbound)>, cfg: &ServeConfig, t_r: f64) -> Result<ServeOutcome, ServeError> {
    let period = Duration::from_secs_f64(t_r / cfg.speed);
    let start = Instant::now();
    let mut ticks: u32 = 0;
    while !bridge.is_finished() {
        while let Ok((id, msg)) = rx_in.try_recv() {
            if let Some(reply) = bridge.apply(&msg) {
                lock(hub).send(id, &reply);
            }
        }
        if cfg.max_ticks.is_some_and(|m| bridge.engine().tick_count() >= m) && !bridge.is_finished() {
            bridge.apply(&Inbound::Control { action: ControlAction::Stop });
        }
        let lines: Vec<String> = bridge.tick()?.iter().map(Outbound::to_line).collect();
        lock(hub).broadcast(&lines);
        ticks += 1;
        let due = start + period * ticks;
        let now = Instant::now();
        if due > now && !bridge.is_finished() {
            thread::sleep(due - now);
        }
    }
    let record = bridge.recorded().to_vec();
    Ok(ServeOutcome { engine: bridge.into_engine(), record })
}

fn accept_loop(listener: TcpListener, hub: Shared, tx_in: Sender<(u64, Inbound)>, done: Arc<AtomicBool>, t_r: f64) {
    while !done.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                if let Err(e) = connect(stream, &hub, &tx_in, t_r) {
                    log::warn!("dropping client {peer}: {e}");
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                log::error!("accept failed: {e}");
                return;
            }
        }
    }
}

fn connect(stream: TcpStream, hub: &Shared, tx_in: &Sender<(u64, Inbound)>, t_r: f64) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let reader = stream.try_clone()?;
    let mut writer = stream.try_clone()?;
    let (tx, rx) = mpsc::channel::<String>();

    let mut h = lock(hub);
    let id = h.next_id;
    h.next_id += 1;
    let role = if h.controller.is_none() {
        h.controller = Some(id);
        Role::Controller
    } else {
        Role::Observer
    };
    log::info!("client {id} connected as {role:?}");
    let hello = Outbound::Control(ControlEvent::Hello { role, t_r, vocabulary: vocabulary(), commands: command_table() });
    let _ = tx.send(hello.to_line());
    h.clients.insert(id, Client { tx, stream });
    h.writers.push(thread::spawn(move || {
        for line in rx {
            if writer.write_all(line.as_bytes()).and_then(|_| writer.write_all(b"\n")).is_err() {
                break;
            }
        }
        let _ = writer.flush();
        let _ = writer.shutdown(Shutdown::Write);
    }));
    drop(h);

    let (hub, tx_in) = (hub.clone(), tx_in.clone());
    thread::spawn(move || read_loop(id, reader, hub, tx_in));
    Ok(())
}

fn read_loop(id: u64, stream: TcpStream, hub: Shared, tx_in: Sender<(u64, Inbound)>) {
    for line in BufReader::new(stream).lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let msg = match parse_inbound(&line) {
            Ok(m) => m,
            Err(e) => {
                lock(&hub).send(id, &Outbound::Control((&e).into()));
                continue;
            }
        };
        let mut h = lock(&hub);
        match msg {
            Inbound::Control { action: ControlAction::Claim } => {
                let reply = match h.controller {
                    Some(c) if c != id => ControlEvent::error("controller_busy", format!("client {c} is controlling")),
                    _ => {
                        h.controller = Some(id);
                        ControlEvent::Role { role: Role::Controller }
                    }
                };
                h.send(id, &Outbound::Control(reply));
            }
            Inbound::Control { action: ControlAction::Ping } => h.send(id, &Outbound::Control(ControlEvent::Pong)),
            _ if h.controller != Some(id) => {
                h.send(id, &Outbound::Control(ControlEvent::error("read_only", "observers cannot change the episode")));
            }
            msg => {
                drop(h);
                if tx_in.send((id, msg)).is_err() {
                    break;
                }
            }
        }
    }
    let mut h = lock(&hub);
    h.clients.remove(&id);
    if h.controller == Some(id) {
        h.controller = None;
    }
    log::info!("client {id} disconnected");
}
