//! Deterministic multi-client convergence simulator.
//!
//! Drives [`ServerState`] and a set of [`ClientState`]s through a seeded
//! random schedule of edits, puts and gets, then quiesces and compares every
//! replica with the server. A client only gets while its outbox is empty.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{apply_seq, Doc};
use crate::gen::EditGen;
use crate::session::{ClientId, ClientState, ServerState, SessionError};
use crate::xform::SplitStrategy;

/// Relative weights of the three client actions. Must sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleMix {
    pub edit: f64,
    pub flush: f64,
    pub get: f64,
}

impl Default for ScheduleMix {
    fn default() -> Self {
        ScheduleMix {
            edit: 0.5,
            flush: 0.25,
            get: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub clients: usize,
    pub steps: usize,
    pub seed: u64,
    pub insert_prob: f64,
    pub max_insert_len: usize,
    pub max_delete_len: usize,
    pub alphabet: String,
    pub schedule_mix: ScheduleMix,
    pub initial_doc: String,
    pub split: SplitStrategy,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            clients: 2,
            steps: 200,
            seed: 0,
            insert_prob: 0.6,
            max_insert_len: 3,
            max_delete_len: 3,
            alphabet: "abc".into(),
            schedule_mix: ScheduleMix::default(),
            initial_doc: String::new(),
            split: SplitStrategy::Midpoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("protocol violation: {0}")]
    Session(#[from] SessionError),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.clients < 2 {
            return bad("clients must be at least 2");
        }
        if self.alphabet.is_empty() {
            return bad("alphabet must be non-empty");
        }
        if self.max_insert_len == 0 || self.max_delete_len == 0 {
            return bad("max_insert_len and max_delete_len must be positive");
        }
        if !(0.0..=1.0).contains(&self.insert_prob) {
            return bad("insert_prob must be in [0, 1]");
        }
        let m = self.schedule_mix;
        if [m.edit, m.flush, m.get].iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("schedule_mix weights must be in [0, 1]");
        }
        if (m.edit + m.flush + m.get - 1.0).abs() > 1e-6 {
            return bad("schedule_mix weights must sum to 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimCounts {
    pub edits: u64,
    pub puts: u64,
    pub gets: u64,
    /// Gets not taken because the client still had unsent edits.
    pub deferred_gets: u64,
    pub transform_calls: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub converged: bool,
    pub final_docs: BTreeMap<ClientId, Doc>,
    pub server_doc: Doc,
    pub counts: SimCounts,
    pub max_pending_len: usize,
    /// Times the server's queue for a client failed to lead from that
    /// client's last known document to the server's.
    pub queue_invariant_violations: u64,
}

struct Sim {
    server: ServerState,
    clients: Vec<ClientState>,
    /// The document the server believes each client holds, i.e. the one its
    /// pending queue starts from.
    base_view: Vec<Doc>,
    counts: SimCounts,
    max_pending_len: usize,
    queue_violations: u64,
}

impl Sim {
    fn flush(&mut self, i: usize) -> Result<(), SimError> {
        let diffs = self.clients[i].flush();
        self.server.put(self.clients[i].id(), &diffs)?;
        self.base_view[i] = self.clients[i].doc().clone();
        self.counts.puts += 1;
        Ok(())
    }

    fn get(&mut self, i: usize) -> Result<(), SimError> {
        let delivered = self.server.get(self.clients[i].id())?;
        self.clients[i].receive(&delivered)?;
        self.base_view[i] = self.clients[i].doc().clone();
        self.counts.gets += 1;
        Ok(())
    }

    fn observe(&mut self) {
        for (i, c) in self.clients.iter().enumerate() {
            let queue = self.server.pending(c.id()).unwrap_or_default();
            self.max_pending_len = self.max_pending_len.max(queue.len());
            if apply_seq(&self.base_view[i], queue).as_ref() != Ok(self.server.doc()) {
                self.queue_violations += 1;
            }
        }
    }

    fn quiescent(&self) -> bool {
        self.clients
            .iter()
            .all(|c| c.outbox().is_empty() && self.server.pending(c.id()).is_some_and(<[_]>::is_empty))
    }
}

pub fn run_sim(cfg: &SimConfig) -> Result<SimReport, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let edits = EditGen::new(&cfg.alphabet, cfg.insert_prob, cfg.max_insert_len, cfg.max_delete_len);

    let mut server = ServerState::with_strategy(Doc::from(cfg.initial_doc.as_str()), cfg.split);
    let mut clients = Vec::with_capacity(cfg.clients);
    for n in 0..cfg.clients {
        let id = ClientId::new(format!("c{n}"));
        let doc = server.join(id.clone())?;
        clients.push(ClientState::new(id, doc));
    }
    let base_view = clients.iter().map(|c| c.doc().clone()).collect();
    let mut sim = Sim {
        server,
        clients,
        base_view,
        counts: SimCounts::default(),
        max_pending_len: 0,
        queue_violations: 0,
    };

    let mix = cfg.schedule_mix;
    for _ in 0..cfg.steps {
        let i = rng.gen_range(0..cfg.clients);
        let roll: f64 = rng.gen();
        if roll < mix.edit {
            let d = edits.diff(&mut rng, sim.clients[i].doc().len());
            sim.clients[i].edit(d)?;
            sim.counts.edits += 1;
        } else if roll < mix.edit + mix.flush {
            sim.flush(i)?;
        } else if sim.clients[i].outbox().is_empty() {
            sim.get(i)?;
        } else {
            sim.counts.deferred_gets += 1;
        }
        sim.observe();
    }

    // No new edits from here on, so every round strictly drains.
    while !sim.quiescent() {
        for i in 0..cfg.clients {
            sim.flush(i)?;
            sim.observe();
        }
        for i in 0..cfg.clients {
            sim.get(i)?;
            sim.observe();
        }
    }

    let server_doc = sim.server.doc().clone();
    let final_docs: BTreeMap<_, _> = sim
        .clients
        .iter()
        .map(|c| (c.id().clone(), c.doc().clone()))
        .collect();
    sim.counts.transform_calls = sim.server.transform_calls();
    Ok(SimReport {
        converged: final_docs.values().all(|d| *d == server_doc),
        final_docs,
        server_doc,
        counts: sim.counts,
        max_pending_len: sim.max_pending_len,
        queue_invariant_violations: sim.queue_violations,
    })
}
