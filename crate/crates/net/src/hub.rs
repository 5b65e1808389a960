//! The serialized collaboration state machine behind the WebSocket server.
//!
//! For each client the hub keeps a ledger of diff batches it has queued for
//! that client, each tagged with a per-client serial. A put carries `seen`,
//! the highest serial the client had applied when it made the diffs; batches
//! up to `seen` are dropped as confirmed, and the put is rebased over the
//! rest one batch at a time. Each remaining batch is in turn rebased over the
//! put, so the ledger always leads from the client's view to the server's.
//!
//! In push mode every new batch is sent immediately, and every put is
//! acknowledged with an empty batch so the client knows which of its puts the
//! following batches already include. In pull mode batches are sent only in
//! reply to `get`, which also confirms everything it delivers.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use textmerge::{apply_seq, ClientId, DiffError, DiffSeq, Doc, SplitStrategy, Transformer};
use thiserror::Error;

use crate::protocol::WireMsg;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Push,
    #[default]
    Pull,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HubError {
    #[error("client {0} has not joined")]
    UnknownClient(ClientId),
    #[error("client {0} has already joined")]
    DuplicateJoin(ClientId),
    #[error("seen {seen} is ahead of the latest serial {serial}")]
    SeenAhead { seen: u64, serial: u64 },
    #[error("seen {seen} is behind the already confirmed serial {confirmed}")]
    SeenBehind { seen: u64, confirmed: u64 },
    #[error("get is only served in pull mode")]
    GetInPushMode,
    #[error("rebased diffs do not apply: {0}")]
    Inapplicable(#[from] DiffError),
}

/// Messages the hub wants delivered, in order.
pub type Outbound = Vec<(ClientId, WireMsg)>;

#[derive(Debug, Clone, Default)]
struct Ledger {
    batches: VecDeque<(u64, DiffSeq)>,
    /// Last serial handed out to this client.
    serial: u64,
    confirmed: u64,
}

impl Ledger {
    fn next_serial(&mut self) -> u64 {
        self.serial += 1;
        self.serial
    }
}

#[derive(Debug, Clone)]
pub struct Hub {
    doc: Doc,
    mode: Mode,
    clients: BTreeMap<ClientId, Ledger>,
    transformer: Transformer,
}

impl Hub {
    pub fn new(doc: Doc, mode: Mode) -> Self {
        Hub {
            doc,
            mode,
            clients: BTreeMap::new(),
            transformer: Transformer::new(SplitStrategy::Midpoint),
        }
    }

    pub fn doc(&self) -> &Doc {
        &self.doc
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_joined(&self, c: &ClientId) -> bool {
        self.clients.contains_key(c)
    }

    /// Latest serial handed out to `c`.
    pub fn serial(&self, c: &ClientId) -> Option<u64> {
        self.clients.get(c).map(|l| l.serial)
    }

    pub fn serials(&self) -> BTreeMap<ClientId, u64> {
        self.clients.iter().map(|(c, l)| (c.clone(), l.serial)).collect()
    }

    /// Unconfirmed batches for `c`, concatenated.
    pub fn unconfirmed(&self, c: &ClientId) -> Option<DiffSeq> {
        self.clients
            .get(c)
            .map(|l| l.batches.iter().flat_map(|(_, b)| b.iter().cloned()).collect())
    }

    pub fn join(&mut self, c: ClientId) -> Result<Outbound, HubError> {
        if self.clients.contains_key(&c) {
            return Err(HubError::DuplicateJoin(c));
        }
        self.clients.insert(c.clone(), Ledger::default());
        let msg = WireMsg::Doc {
            text: self.doc.to_string(),
            serial: 0,
        };
        Ok(vec![(c, msg)])
    }

    pub fn leave(&mut self, c: &ClientId) {
        self.clients.remove(c);
    }

    /// On error nothing changes.
    pub fn put(&mut self, c: &ClientId, diffs: DiffSeq, seen: u64) -> Result<Outbound, HubError> {
        let ledger = self
            .clients
            .get(c)
            .ok_or_else(|| HubError::UnknownClient(c.clone()))?;
        if seen > ledger.serial {
            return Err(HubError::SeenAhead {
                seen,
                serial: ledger.serial,
            });
        }
        if seen < ledger.confirmed {
            return Err(HubError::SeenBehind {
                seen,
                confirmed: ledger.confirmed,
            });
        }

        let mut transformer = self.transformer.clone();
        let mut put = diffs;
        let mut remaining = VecDeque::new();
        for (serial, batch) in ledger.batches.iter().filter(|(s, _)| *s > seen) {
            let r = transformer.transform(batch, &put);
            put = r.b_after_a;
            remaining.push_back((*serial, r.a_after_b));
        }
        let doc = apply_seq(&self.doc, &put)?;

        self.doc = doc;
        self.transformer = transformer;
        let mut out = Outbound::new();
        for (other, ledger) in self.clients.iter_mut() {
            if other == c {
                ledger.batches = std::mem::take(&mut remaining);
                ledger.confirmed = seen;
                if self.mode == Mode::Push {
                    let serial = ledger.next_serial();
                    out.push((other.clone(), WireMsg::Diffs { diffs: vec![], serial }));
                }
            } else if !put.is_empty() {
                let serial = ledger.next_serial();
                ledger.batches.push_back((serial, put.clone()));
                if self.mode == Mode::Push {
                    out.push((
                        other.clone(),
                        WireMsg::Diffs {
                            diffs: put.clone(),
                            serial,
                        },
                    ));
                }
            }
        }
        Ok(out)
    }

    /// Sends every unconfirmed batch as one message and confirms them.
    pub fn get(&mut self, c: &ClientId) -> Result<Outbound, HubError> {
        if self.mode == Mode::Push {
            return Err(HubError::GetInPushMode);
        }
        let ledger = self
            .clients
            .get_mut(c)
            .ok_or_else(|| HubError::UnknownClient(c.clone()))?;
        let diffs = ledger.batches.drain(..).flat_map(|(_, b)| b).collect();
        ledger.confirmed = ledger.serial;
        Ok(vec![(
            c.clone(),
            WireMsg::Diffs {
                diffs,
                serial: ledger.serial,
            },
        )])
    }

    /// Dispatches a client message. `join` is handled by the caller, which
    /// owns the mapping from connections to client ids.
    pub fn handle(&mut self, c: &ClientId, msg: WireMsg) -> Result<Outbound, HubError> {
        match msg {
            WireMsg::Put { diffs, seen } => self.put(c, diffs, seen),
            WireMsg::Get => self.get(c),
            WireMsg::Join { client } => Err(HubError::DuplicateJoin(client)),
            other => Ok(vec![(c.clone(), WireMsg::err(format!("unexpected message {}", other.encode())))]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use textmerge::Diff;

    fn id(s: &str) -> ClientId {
        ClientId::new(s)
    }

    #[test]
    fn join_sends_current_doc() {
        let mut hub = Hub::new("hello".into(), Mode::Pull);
        let out = hub.join(id("a")).unwrap();
        assert_eq!(
            out,
            vec![(
                id("a"),
                WireMsg::Doc {
                    text: "hello".into(),
                    serial: 0
                }
            )]
        );
        assert_eq!(hub.join(id("a")), Err(HubError::DuplicateJoin(id("a"))));
        hub.join(id("b")).unwrap();
        hub.put(&id("b"), vec![Diff::insert(5, "!")], 0).unwrap();
        let out = hub.join(id("c")).unwrap();
        assert_eq!(
            out[0].1,
            WireMsg::Doc {
                text: "hello!".into(),
                serial: 0
            }
        );
    }

    #[test]
    fn put_without_backlog_is_plain() {
        let mut hub = Hub::new("abc".into(), Mode::Pull);
        hub.join(id("a")).unwrap();
        hub.join(id("b")).unwrap();
        let out = hub.put(&id("a"), vec![Diff::delete(0, 1)], 0).unwrap();
        assert!(out.is_empty());
        assert_eq!(hub.doc().to_string(), "bc");
        assert_eq!(hub.unconfirmed(&id("b")), Some(vec![Diff::delete(0, 1)]));
        assert_eq!(hub.unconfirmed(&id("a")), Some(vec![]));
    }

    #[test]
    fn get_concatenates_and_confirms() {
        let mut hub = Hub::new("".into(), Mode::Pull);
        hub.join(id("a")).unwrap();
        hub.join(id("b")).unwrap();
        let empty = hub.get(&id("a")).unwrap();
        assert_eq!(
            empty[0].1,
            WireMsg::Diffs {
                diffs: vec![],
                serial: 0
            }
        );
        hub.put(&id("b"), vec![Diff::insert(0, "x")], 0).unwrap();
        hub.put(&id("b"), vec![Diff::insert(1, "y")], 0).unwrap();
        let out = hub.get(&id("a")).unwrap();
        assert_eq!(
            out[0].1,
            WireMsg::Diffs {
                diffs: vec![Diff::insert(0, "x"), Diff::insert(1, "y")],
                serial: 2
            }
        );
        assert_eq!(hub.unconfirmed(&id("a")), Some(vec![]));
        assert_eq!(hub.get(&id("zz")), Err(HubError::UnknownClient(id("zz"))));
    }

    #[test]
    fn seen_is_validated() {
        let mut hub = Hub::new("ab".into(), Mode::Pull);
        hub.join(id("a")).unwrap();
        assert_eq!(
            hub.put(&id("a"), vec![], 1),
            Err(HubError::SeenAhead { seen: 1, serial: 0 })
        );
        hub.join(id("b")).unwrap();
        hub.put(&id("b"), vec![Diff::insert(0, "x")], 0).unwrap();
        hub.get(&id("a")).unwrap();
        assert_eq!(
            hub.put(&id("a"), vec![], 0),
            Err(HubError::SeenBehind { seen: 0, confirmed: 1 })
        );
    }

    #[test]
    fn failed_put_changes_nothing() {
        let mut hub = Hub::new("ab".into(), Mode::Push);
        hub.join(id("a")).unwrap();
        hub.join(id("b")).unwrap();
        let before = (hub.doc().clone(), hub.serials());
        assert!(matches!(
            hub.put(&id("a"), vec![Diff::delete(0, 9)], 0),
            Err(HubError::Inapplicable(_))
        ));
        assert_eq!((hub.doc().clone(), hub.serials()), before);
    }

    #[test]
    fn push_sends_batches_and_acks() {
        let mut hub = Hub::new("ab".into(), Mode::Push);
        hub.join(id("a")).unwrap();
        hub.join(id("b")).unwrap();
        let out = hub.put(&id("a"), vec![Diff::insert(0, "x")], 0).unwrap();
        assert_eq!(
            out,
            vec![
                (
                    id("a"),
                    WireMsg::Diffs {
                        diffs: vec![],
                        serial: 1
                    }
                ),
                (
                    id("b"),
                    WireMsg::Diffs {
                        diffs: vec![Diff::insert(0, "x")],
                        serial: 1
                    }
                ),
            ]
        );
        assert_eq!(hub.get(&id("a")), Err(HubError::GetInPushMode));
    }

    #[test]
    fn put_crossing_a_batch_is_rebased() {
        let mut hub = Hub::new("abcdef".into(), Mode::Push);
        hub.join(id("a")).unwrap();
        hub.join(id("b")).unwrap();
        // b deletes "cd"; a, not having seen it, inserts inside the range.
        hub.put(&id("b"), vec![Diff::delete(2, 2)], 0).unwrap();
        hub.put(&id("a"), vec![Diff::insert(3, "X")], 0).unwrap();
        assert_eq!(hub.doc().to_string(), "abXef");
        // a's pending batch now leads from a's view ("abcXdef") to the server.
        let view = Doc::from("abcXdef");
        assert_eq!(
            apply_seq(&view, &hub.unconfirmed(&id("a")).unwrap()).unwrap(),
            *hub.doc()
        );
    }

    #[test]
    fn unexpected_messages() {
        let mut hub = Hub::new("".into(), Mode::Pull);
        hub.join(id("a")).unwrap();
        assert!(hub.handle(&id("a"), WireMsg::Join { client: id("q") }).is_err());
        let out = hub
            .handle(
                &id("a"),
                WireMsg::Doc {
                    text: "".into(),
                    serial: 0,
                },
            )
            .unwrap();
        assert!(matches!(out[0].1, WireMsg::Err { .. }));
    }
}
