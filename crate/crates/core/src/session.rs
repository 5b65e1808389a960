//! Central-server protocol.
//!
//! The server holds the authoritative document and, per client, a queue of
//! foreign diffs the client has not fetched yet. A put is rebased against the
//! putter's queue, applied, and appended to every other client's queue. A get
//! hands the queue over and empties it.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{apply, apply_seq, Diff, DiffError, DiffSeq, Doc};
use crate::xform::{SplitStrategy, Transformer};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClientId(String);

impl ClientId {
    pub fn new(id: impl Into<String>) -> Self {
        ClientId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClientId {
    fn from(s: &str) -> Self {
        ClientId::new(s)
    }
}

impl From<String> for ClientId {
    fn from(s: String) -> Self {
        ClientId(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("client {0} has not joined")]
    UnknownClient(ClientId),
    #[error("client {0} has already joined")]
    DuplicateJoin(ClientId),
    #[error("client {0} must flush its outbox before receiving")]
    OutboxNotEmpty(ClientId),
    #[error(transparent)]
    Inapplicable(#[from] DiffError),
}

#[derive(Debug, Clone)]
pub struct ServerState {
    doc: Doc,
    pending: BTreeMap<ClientId, DiffSeq>,
    transformer: Transformer,
}

impl ServerState {
    pub fn new(doc: Doc) -> Self {
        Self::with_strategy(doc, SplitStrategy::default())
    }

    pub fn with_strategy(doc: Doc, strategy: SplitStrategy) -> Self {
        ServerState {
            doc,
            pending: BTreeMap::new(),
            transformer: Transformer::new(strategy),
        }
    }

    pub fn doc(&self) -> &Doc {
        &self.doc
    }

    pub fn is_joined(&self, c: &ClientId) -> bool {
        self.pending.contains_key(c)
    }

    pub fn clients(&self) -> impl Iterator<Item = &ClientId> {
        self.pending.keys()
    }

    pub fn pending(&self, c: &ClientId) -> Option<&[Diff]> {
        self.pending.get(c).map(Vec::as_slice)
    }

    /// Single-diff transforms performed by all puts so far.
    pub fn transform_calls(&self) -> u64 {
        self.transformer.single_calls()
    }

    /// Registers `c` and returns its starting copy of the document.
    pub fn join(&mut self, c: ClientId) -> Result<Doc, SessionError> {
        if self.pending.contains_key(&c) {
            return Err(SessionError::DuplicateJoin(c));
        }
        self.pending.insert(c, DiffSeq::new());
        Ok(self.doc.clone())
    }

    /// Accepts `diffs`, made by `c` against the document it last synchronized
    /// to. On error the state is unchanged.
    pub fn put(&mut self, c: &ClientId, diffs: &[Diff]) -> Result<(), SessionError> {
        let queue = self
            .pending
            .get(c)
            .ok_or_else(|| SessionError::UnknownClient(c.clone()))?;
        let rebased = self.transformer.transform(queue, diffs);
        let doc = apply_seq(&self.doc, &rebased.b_after_a)?;
        self.doc = doc;
        for (other, queue) in self.pending.iter_mut() {
            if other == c {
                *queue = rebased.a_after_b.clone();
            } else {
                queue.extend(rebased.b_after_a.iter().cloned());
            }
        }
        Ok(())
    }

    /// Hands over and clears `c`'s queue.
    pub fn get(&mut self, c: &ClientId) -> Result<DiffSeq, SessionError> {
        self.pending
            .get_mut(c)
            .map(std::mem::take)
            .ok_or_else(|| SessionError::UnknownClient(c.clone()))
    }
}

/// A client's local document and the edits it has made but not yet put.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientState {
    id: ClientId,
    doc: Doc,
    outbox: DiffSeq,
}

impl ClientState {
    pub fn new(id: ClientId, doc: Doc) -> Self {
        ClientState {
            id,
            doc,
            outbox: DiffSeq::new(),
        }
    }

    pub fn id(&self) -> &ClientId {
        &self.id
    }

    pub fn doc(&self) -> &Doc {
        &self.doc
    }

    pub fn outbox(&self) -> &[Diff] {
        &self.outbox
    }

    /// Applies a local edit and queues it for the next put.
    pub fn edit(&mut self, diff: Diff) -> Result<(), SessionError> {
        self.doc = apply(&self.doc, &diff)?;
        self.outbox.push(diff);
        Ok(())
    }

    /// Takes the outbox for transmission. The local document is unchanged.
    pub fn flush(&mut self) -> DiffSeq {
        std::mem::take(&mut self.outbox)
    }

    /// Applies a delivered queue. Only valid with an empty outbox.
    pub fn receive(&mut self, delivered: &[Diff]) -> Result<(), SessionError> {
        if !self.outbox.is_empty() {
            return Err(SessionError::OutboxNotEmpty(self.id.clone()));
        }
        self.doc = apply_seq(&self.doc, delivered)?;
        Ok(())
    }

    /// Applies a delivered queue while edits are still unsent, rebasing the
    /// outbox over it.
    pub fn receive_rebasing(&mut self, delivered: &[Diff], strategy: SplitStrategy) -> Result<(), SessionError> {
        let r = Transformer::new(strategy).transform(&self.outbox, delivered);
        self.doc = apply_seq(&self.doc, &r.b_after_a)?;
        self.outbox = r.a_after_b;
        Ok(())
    }
}
