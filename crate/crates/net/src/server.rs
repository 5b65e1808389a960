//! WebSocket front end. Every connection feeds a single command loop that
//! owns the [`Hub`], so messages are processed strictly one at a time in
//! arrival order.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use textmerge::{ClientId, Doc};
use tokio::net::{TcpListener, ToSocketAddrs};
use tokio::sync::{mpsc, oneshot, watch};
use tokio::task::JoinHandle;

use crate::hub::{Hub, Mode};
use crate::protocol::WireMsg;

type ConnId = u64;

enum Out {
    Msg(WireMsg),
    Close,
}

enum Command {
    Open(ConnId, mpsc::UnboundedSender<Out>),
    Frame(ConnId, Result<WireMsg, String>),
    Closed(ConnId),
    Inspect(oneshot::Sender<Snapshot>),
}

/// The hub's state at one point in the command stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub doc: Doc,
    pub serials: BTreeMap<ClientId, u64>,
    /// Client frames processed so far.
    pub processed: u64,
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::UnboundedSender<Command>,
    next_conn: Arc<AtomicU64>,
}

pub struct ServerHandle {
    local_addr: SocketAddr,
    commands: mpsc::UnboundedSender<Command>,
    processed: watch::Receiver<u64>,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}/ws", self.local_addr)
    }

    /// Waits until at least `n` client frames have been processed.
    pub async fn wait_processed(&self, n: u64) {
        let mut rx = self.processed.clone();
        // The sender lives as long as the command loop; if it is gone there
        // is nothing left to wait for.
        let _ = rx.wait_for(|&p| p >= n).await;
    }

    pub async fn snapshot(&self) -> Option<Snapshot> {
        let (tx, rx) = oneshot::channel();
        self.commands.send(Command::Inspect(tx)).ok()?;
        rx.await.ok()
    }

    pub async fn shutdown(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.task.await.unwrap_or_else(|e| Err(std::io::Error::other(e)))
    }

    /// Runs until the server stops on its own, which it only does on error.
    pub async fn wait(self) -> std::io::Result<()> {
        let ServerHandle { task, shutdown, .. } = self;
        let _keep_open = shutdown;
        task.await.unwrap_or_else(|e| Err(std::io::Error::other(e)))
    }
}

/// Binds `addr` and serves `/ws` in the background.
pub async fn serve(addr: impl ToSocketAddrs, doc: Doc, mode: Mode) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr).await?;
    serve_on(listener, doc, mode)
}

pub fn serve_on(listener: TcpListener, doc: Doc, mode: Mode) -> std::io::Result<ServerHandle> {
    let local_addr = listener.local_addr()?;
    let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
    let (processed_tx, processed_rx) = watch::channel(0);
    tokio::spawn(command_loop(Hub::new(doc, mode), cmd_rx, processed_tx));

    let state = AppState {
        commands: cmd_tx.clone(),
        next_conn: Arc::new(AtomicU64::new(0)),
    };
    let app = Router::new().route("/ws", get(upgrade)).with_state(state);
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stop_rx.await;
            })
            .await
    });
    tracing::info!(%local_addr, ?mode, "listening");
    Ok(ServerHandle {
        local_addr,
        commands: cmd_tx,
        processed: processed_rx,
        shutdown: Some(stop_tx),
        task,
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, state))
}

async fn connection(socket: WebSocket, state: AppState) {
    let conn = state.next_conn.fetch_add(1, Ordering::Relaxed);
    let (out_tx, mut out_rx) = mpsc::unbounded_channel();
    if state.commands.send(Command::Open(conn, out_tx)).is_err() {
        return;
    }
    let (mut sink, mut stream) = socket.split();

    let writer = tokio::spawn(async move {
        while let Some(out) = out_rx.recv().await {
            match out {
                Out::Msg(m) => {
                    if sink.send(Message::Text(m.encode().into())).await.is_err() {
                        break;
                    }
                }
                Out::Close => {
                    let _ = sink.send(Message::Close(None)).await;
                    break;
                }
            }
        }
    });

    while let Some(Ok(frame)) = stream.next().await {
        let parsed = match frame {
            Message::Text(t) => WireMsg::decode(t.as_str()).map_err(|e| e.to_string()),
            Message::Binary(_) => Err("binary frames are not supported".to_string()),
            Message::Close(_) => break,
            _ => continue,
        };
        if state.commands.send(Command::Frame(conn, parsed)).is_err() {
            break;
        }
    }
    let _ = state.commands.send(Command::Closed(conn));
    let _ = writer.await;
}

struct Conn {
    out: mpsc::UnboundedSender<Out>,
    client: Option<ClientId>,
}

async fn command_loop(mut hub: Hub, mut rx: mpsc::UnboundedReceiver<Command>, processed: watch::Sender<u64>) {
    let mut conns: HashMap<ConnId, Conn> = HashMap::new();
    let mut by_client: HashMap<ClientId, ConnId> = HashMap::new();
    let mut count = 0u64;

    while let Some(cmd) = rx.recv().await {
        match cmd {
            Command::Open(id, out) => {
                conns.insert(id, Conn { out, client: None });
            }
            Command::Closed(id) => {
                if let Some(Conn { client: Some(c), .. }) = conns.remove(&id) {
                    tracing::debug!(client = %c, "left");
                    by_client.remove(&c);
                    hub.leave(&c);
                }
            }
            Command::Inspect(reply) => {
                let _ = reply.send(Snapshot {
                    doc: hub.doc().clone(),
                    serials: hub.serials(),
                    processed: count,
                });
            }
            Command::Frame(id, parsed) => {
                let Some(conn) = conns.get_mut(&id) else { continue };
                let result = match (parsed, conn.client.clone()) {
                    (Err(e), _) => Err(format!("malformed message: {e}")),
                    (Ok(WireMsg::Join { client }), None) => hub
                        .join(client.clone())
                        .inspect(|_| {
                            conn.client = Some(client.clone());
                            by_client.insert(client, id);
                        })
                        .map_err(|e| e.to_string()),
                    (Ok(WireMsg::Join { .. }), Some(c)) => Err(format!("connection already joined as {c}")),
                    (Ok(_), None) => Err("join first".to_string()),
                    (Ok(msg), Some(c)) => hub.handle(&c, msg).map_err(|e| e.to_string()),
                };
                match result {
                    Ok(out) => {
                        for (to, msg) in out {
                            if let Some(c) = by_client.get(&to).and_then(|cid| conns.get(cid)) {
                                let _ = c.out.send(Out::Msg(msg));
                            }
                        }
                    }
                    Err(e) => {
                        tracing::warn!(conn = id, error = %e, "rejecting connection");
                        let _ = conn.out.send(Out::Msg(WireMsg::err(e)));
                        let _ = conn.out.send(Out::Close);
                    }
                }
                count += 1;
                processed.send_replace(count);
            }
        }
    }
}
