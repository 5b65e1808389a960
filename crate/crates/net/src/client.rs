//! Headless protocol client over tokio-tungstenite.

use futures_util::{SinkExt, StreamExt};
use textmerge::{ClientId, Diff, Doc};
use thiserror::Error;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use crate::hub::Mode;
use crate::protocol::WireMsg;
use crate::replica::{Replica, ReplicaError};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("websocket: {0}")]
    Ws(Box<tokio_tungstenite::tungstenite::Error>),
    #[error("bad frame from server: {0}")]
    Decode(#[from] serde_json::Error),
    #[error("connection closed")]
    Closed,
    #[error(transparent)]
    Protocol(#[from] ReplicaError),
}

impl From<tokio_tungstenite::tungstenite::Error> for ClientError {
    fn from(e: tokio_tungstenite::tungstenite::Error) -> Self {
        ClientError::Ws(Box::new(e))
    }
}

pub struct Client {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
    replica: Replica,
    /// Frames sent, including the join.
    sent: u64,
}

impl Client {
    /// Connects and joins. Returns once the initial document has arrived.
    pub async fn connect(url: &str, id: impl Into<ClientId>, mode: Mode) -> Result<Self, ClientError> {
        let (ws, _) = connect_async(url).await?;
        let mut client = Client {
            ws,
            replica: Replica::new(id.into(), mode),
            sent: 0,
        };
        client.send(client.replica.join_msg()).await?;
        client.recv().await?;
        Ok(client)
    }

    pub fn replica(&self) -> &Replica {
        &self.replica
    }

    pub fn doc(&self) -> &Doc {
        self.replica.doc()
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn edit(&mut self, diff: Diff) -> Result<(), ClientError> {
        Ok(self.replica.edit(diff)?)
    }

    /// Sends local edits, if any. Returns whether a frame went out.
    pub async fn put(&mut self) -> Result<bool, ClientError> {
        match self.replica.take_put() {
            Some(m) => {
                self.send(m).await?;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Pull mode: fetches and applies everything the server has queued.
    pub async fn get(&mut self) -> Result<(), ClientError> {
        let m = self.replica.get_msg()?;
        self.send(m).await?;
        self.recv().await
    }

    /// Push mode: processes incoming frames until `serial` has been seen.
    pub async fn catch_up(&mut self, serial: u64) -> Result<(), ClientError> {
        while self.replica.seen() < serial {
            self.recv().await?;
        }
        Ok(())
    }

    pub async fn close(mut self) -> Result<(), ClientError> {
        self.ws.close(None).await?;
        Ok(())
    }

    async fn send(&mut self, m: WireMsg) -> Result<(), ClientError> {
        self.ws.send(Message::text(m.encode())).await?;
        self.sent += 1;
        Ok(())
    }

    async fn recv(&mut self) -> Result<(), ClientError> {
        loop {
            match self.ws.next().await {
                Some(Ok(Message::Text(t))) => {
                    let msg = WireMsg::decode(t.as_str())?;
                    return Ok(self.replica.on_message(msg)?);
                }
                Some(Ok(Message::Close(_))) | None => return Err(ClientError::Closed),
                Some(Ok(_)) => continue,
                Some(Err(e)) => return Err(e.into()),
            }
        }
    }
}
