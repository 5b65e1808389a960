//! Seeded client schedules replayed against a live server.
//!
//! The event list depends only on the seed, so the same schedule can be run
//! in push and in pull mode and the outcomes compared. Edits are drawn when
//! they happen, from an RNG that only advances on edits, so both runs see
//! the same diffs as long as the replicas agree along the way.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use textmerge::gen::EditGen;
use textmerge::Doc;
use thiserror::Error;

use crate::client::{Client, ClientError};
use crate::hub::Mode;
use crate::server::{serve, ServerHandle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", content = "client", rename_all = "lowercase")]
pub enum Event {
    /// One local edit.
    Edit(usize),
    /// Send local edits without waiting for anything back.
    Put(usize),
    /// Send local edits, then bring the replica up to date.
    Sync(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptConfig {
    pub clients: usize,
    pub steps: usize,
    pub seed: u64,
    pub initial_doc: String,
    pub alphabet: String,
    pub insert_prob: f64,
    pub max_insert_len: usize,
    pub max_delete_len: usize,
}

impl Default for ScriptConfig {
    fn default() -> Self {
        ScriptConfig {
            clients: 3,
            steps: 40,
            seed: 0,
            initial_doc: "shared".into(),
            alphabet: "xyz".into(),
            insert_prob: 0.6,
            max_insert_len: 3,
            max_delete_len: 3,
        }
    }
}

impl ScriptConfig {
    pub fn events(&self) -> Vec<Event> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.steps)
            .map(|_| {
                let c = rng.gen_range(0..self.clients);
                match rng.gen_range(0..4) {
                    0 | 1 => Event::Edit(c),
                    2 => Event::Put(c),
                    _ => Event::Sync(c),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Outcome {
    pub mode: Mode,
    pub server_doc: Doc,
    pub client_docs: Vec<Doc>,
}

impl Outcome {
    pub fn quiesced(&self) -> bool {
        self.client_docs.iter().all(|d| *d == self.server_doc)
    }
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
    #[error("client: {0}")]
    Client(#[from] ClientError),
    #[error("server stopped answering")]
    ServerGone,
}

struct Driver {
    server: ServerHandle,
    clients: Vec<Client>,
    mode: Mode,
}

impl Driver {
    async fn settle(&self) {
        let sent = self.clients.iter().map(Client::sent).sum();
        self.server.wait_processed(sent).await;
    }

    async fn put(&mut self, c: usize) -> Result<(), ScriptError> {
        self.clients[c].put().await?;
        self.settle().await;
        Ok(())
    }

    async fn sync(&mut self, c: usize) -> Result<(), ScriptError> {
        self.put(c).await?;
        match self.mode {
            Mode::Pull => self.clients[c].get().await?,
            Mode::Push => {
                let snap = self.server.snapshot().await.ok_or(ScriptError::ServerGone)?;
                let id = self.clients[c].replica().id();
                let serial = snap.serials.get(id).copied().ok_or(ScriptError::ServerGone)?;
                self.clients[c].catch_up(serial).await?;
            }
        }
        self.settle().await;
        Ok(())
    }
}

/// Starts a server on an ephemeral port, runs the schedule, syncs every
/// client twice, and reports the resulting documents.
pub async fn run_script(cfg: &ScriptConfig, mode: Mode) -> Result<Outcome, ScriptError> {
    let server = serve("127.0.0.1:0", Doc::from(cfg.initial_doc.as_str()), mode).await?;
    let url = server.url();
    let mut clients = Vec::with_capacity(cfg.clients);
    for n in 0..cfg.clients {
        clients.push(Client::connect(&url, format!("c{n}"), mode).await?);
    }
    let mut d = Driver { server, clients, mode };
    d.settle().await;

    let gen = EditGen::new(&cfg.alphabet, cfg.insert_prob, cfg.max_insert_len, cfg.max_delete_len);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    for ev in cfg.events() {
        match ev {
            Event::Edit(c) => {
                let diff = gen.diff(&mut rng, d.clients[c].doc().len());
                d.clients[c].edit(diff)?;
            }
            Event::Put(c) => d.put(c).await?,
            Event::Sync(c) => d.sync(c).await?,
        }
    }
    // The first round delivers every outstanding edit to the server, the
    // second brings every replica up to the final state.
    for _ in 0..2 {
        for c in 0..cfg.clients {
            d.sync(c).await?;
        }
    }

    let snap = d.server.snapshot().await.ok_or(ScriptError::ServerGone)?;
    let outcome = Outcome {
        mode,
        server_doc: snap.doc,
        client_docs: d.clients.iter().map(|c| c.doc().clone()).collect(),
    };
    for c in d.clients {
        c.close().await?;
    }
    d.server.shutdown().await?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_depend_only_on_seed() {
        let cfg = ScriptConfig {
            seed: 7,
            ..ScriptConfig::default()
        };
        assert_eq!(cfg.events(), cfg.events());
        assert_eq!(cfg.events().len(), cfg.steps);
        let other = ScriptConfig { seed: 8, ..cfg.clone() };
        assert_ne!(cfg.events(), other.events());
        assert!(cfg.events().iter().all(|e| match e {
            Event::Edit(c) | Event::Put(c) | Event::Sync(c) => *c < cfg.clients,
        }));
    }

    #[test]
    fn event_json() {
        assert_eq!(
            serde_json::to_string(&Event::Sync(2)).unwrap(),
            r#"{"event":"sync","client":2}"#
        );
    }
}
