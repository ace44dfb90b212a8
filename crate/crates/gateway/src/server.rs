//! WebSocket service. The first connected client drives the session; later
//! clients are read-only until the driver disconnects.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc};

use crate::live::{ForceFilter, LiveSession, DEFAULT_DECIMATION};
use crate::protocol::{ClientMessage, ServerMessage};

const BROADCAST_CAPACITY: usize = 4096;

#[derive(Clone)]
pub struct AppState {
    live: Arc<Mutex<LiveSession>>,
    tx: broadcast::Sender<ServerMessage>,
    writer: Arc<Mutex<Option<u64>>>,
    next_client: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(live: LiveSession) -> Self {
        let (tx, _) = broadcast::channel(BROADCAST_CAPACITY);
        AppState {
            live: Arc::new(Mutex::new(live)),
            tx,
            writer: Arc::new(Mutex::new(None)),
            next_client: Arc::new(AtomicU64::new(1)),
        }
    }

    fn live(&self) -> MutexGuard<'_, LiveSession> {
        self.live.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn broadcast(&self, msg: ServerMessage) {
        // No receivers is fine.
        let _ = self.tx.send(msg);
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/ws", get(upgrade))
        .route("/", get(upgrade))
        .with_state(state)
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, state))
}

/// Stops the tick thread when dropped.
pub struct TickLoop {
    stop: Arc<AtomicBool>,
    handle: Option<thread::JoinHandle<()>>,
}

impl Drop for TickLoop {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Runs session ticks at the configured rate on a dedicated thread, so
/// network I/O never delays the haptic loop.
pub fn spawn_tick_loop(state: AppState) -> TickLoop {
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let handle = thread::Builder::new()
        .name("morpho-tick".into())
        .spawn(move || {
            let mut next = Instant::now();
            let mut stale_since: Option<u64> = None;
            while !flag.load(Ordering::Relaxed) {
                let (report, rate, status) = {
                    let mut live = state.live();
                    let rate = live.config().haptic.tick_rate.max(1);
                    let report = live.tick();
                    let mut status = None;
                    if let Some(r) = &report {
                        let tick = live.status().tick;
                        if r.carved {
                            stale_since.get_or_insert(tick);
                        }
                        // Revision updates go out at most every 16 ticks.
                        if stale_since.is_some_and(|t| tick >= t + u64::from(DEFAULT_DECIMATION)) {
                            stale_since = None;
                            status = Some(ServerMessage::Status(live.status()));
                        }
                    }
                    (report, rate, status)
                };
                if let Some(r) = report {
                    state.broadcast(r.force);
                }
                if let Some(s) = status {
                    state.broadcast(s);
                }
                next += Duration::from_secs_f64(1.0 / f64::from(rate));
                let now = Instant::now();
                if next > now {
                    thread::sleep(next - now);
                } else if now - next > Duration::from_millis(100) {
                    // Fell far behind; skip rather than burst.
                    next = now;
                }
            }
        })
        .expect("spawn tick thread");
    TickLoop {
        stop,
        handle: Some(handle),
    }
}

async fn client(socket: WebSocket, state: AppState) {
    let id = state.next_client.fetch_add(1, Ordering::Relaxed);
    let is_writer = {
        let mut w = state.writer.lock().unwrap_or_else(|e| e.into_inner());
        if w.is_none() {
            *w = Some(id);
        }
        *w == Some(id)
    };
    tracing::info!(client = id, writer = is_writer, "client connected");

    let (mut sink, mut stream) = socket.split();
    let mut events = state.tx.subscribe();
    let (direct_tx, mut direct_rx) = mpsc::unbounded_channel::<ServerMessage>();
    let mut filter = ForceFilter::default();

    let _ = direct_tx.send(ServerMessage::Status(state.live().status()));

    loop {
        tokio::select! {
            incoming = stream.next() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t.to_string(),
                    Some(Ok(Message::Binary(_))) => {
                        let _ = direct_tx.send(ServerMessage::error("binary frames are not supported"));
                        continue;
                    }
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                handle(&state, &text, is_writer, &mut filter, &direct_tx);
            }
            Some(msg) = direct_rx.recv() => {
                if sink.send(Message::Text(msg.to_json().into())).await.is_err() {
                    break;
                }
            }
            event = events.recv() => {
                let msg = match event {
                    Ok(m) => m,
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        tracing::debug!(client = id, skipped = n, "slow client");
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                };
                if let ServerMessage::Force { tick, .. } = &msg {
                    if !filter.wants(*tick) {
                        continue;
                    }
                }
                if sink.send(Message::Text(msg.to_json().into())).await.is_err() {
                    break;
                }
            }
        }
    }

    if is_writer {
        let mut w = state.writer.lock().unwrap_or_else(|e| e.into_inner());
        if *w == Some(id) {
            *w = None;
        }
    }
    tracing::info!(client = id, "client disconnected");
}

/// Replies go to the sender only, status updates to everyone.
fn route(state: &AppState, direct: &mpsc::UnboundedSender<ServerMessage>, msgs: Vec<ServerMessage>) {
    for m in msgs {
        match m {
            ServerMessage::Status(_) => state.broadcast(m),
            other => {
                let _ = direct.send(other);
            }
        }
    }
}

fn handle(
    state: &AppState,
    text: &str,
    is_writer: bool,
    filter: &mut ForceFilter,
    direct: &mpsc::UnboundedSender<ServerMessage>,
) {
    let msg = match ClientMessage::parse(text) {
        Ok(m) => m,
        Err(reason) => {
            let _ = direct.send(ServerMessage::error(reason));
            return;
        }
    };
    if !is_writer && msg.is_mutating() {
        let _ = direct.send(ServerMessage::error(
            "read-only client: another client controls the session",
        ));
        return;
    }
    if let ClientMessage::SubscribeForces { decimation } = msg {
        if decimation > 0 {
            filter.subscribe(decimation);
        }
    }
    let (replies, job) = state.live().begin(msg);
    route(state, direct, replies);
    if let Some(job) = job {
        let state = state.clone();
        let direct = direct.clone();
        tokio::task::spawn_blocking(move || {
            let output = job.run();
            let replies = state.live().complete(output);
            route(&state, &direct, replies);
        });
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, live: LiveSession) -> anyhow::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    tracing::info!("listening on ws://{}/ws", listener.local_addr()?);
    serve_on(listener, live).await
}

pub async fn serve_on(listener: TcpListener, live: LiveSession) -> anyhow::Result<()> {
    let state = AppState::new(live);
    let _ticks = spawn_tick_loop(state.clone());
    axum::serve(listener, router(state)).await?;
    Ok(())
}
