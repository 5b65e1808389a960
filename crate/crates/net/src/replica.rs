//! Client-side protocol state, independent of any transport.
//!
//! In pull mode a replica never transforms: it puts all local edits before
//! each get, and the hub delivers batches already rebased over them. In push
//! mode batches arrive unannounced, so each foreign batch is rebased over the
//! puts still awaiting acknowledgement and over unsent local edits. The hub
//! performs the mirror-image computation with the same argument order, which
//! keeps both sides' diffs identical rather than merely equivalent.

use std::collections::VecDeque;

use textmerge::{apply, apply_seq, ClientId, Diff, DiffError, DiffSeq, Doc, SplitStrategy, Transformer};
use thiserror::Error;

use crate::hub::Mode;
use crate::protocol::WireMsg;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplicaError {
    #[error("server error: {0}")]
    Server(String),
    #[error("unexpected message: {0}")]
    Unexpected(String),
    #[error("acknowledgement with no put in flight")]
    StrayAck,
    #[error("serial went from {from} to {to}")]
    SerialOrder { from: u64, to: u64 },
    #[error("pull-mode get with unsent edits")]
    OutboxNotEmpty,
    #[error(transparent)]
    Diff(#[from] DiffError),
}

#[derive(Debug, Clone)]
pub struct Replica {
    id: ClientId,
    mode: Mode,
    doc: Doc,
    seen: u64,
    outbox: DiffSeq,
    in_flight: VecDeque<DiffSeq>,
    transformer: Transformer,
}

impl Replica {
    pub fn new(id: ClientId, mode: Mode) -> Self {
        Replica {
            id,
            mode,
            doc: Doc::default(),
            seen: 0,
            outbox: vec![],
            in_flight: VecDeque::new(),
            transformer: Transformer::new(SplitStrategy::Midpoint),
        }
    }

    pub fn id(&self) -> &ClientId {
        &self.id
    }

    pub fn doc(&self) -> &Doc {
        &self.doc
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn outbox(&self) -> &[Diff] {
        &self.outbox
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    pub fn join_msg(&self) -> WireMsg {
        WireMsg::Join { client: self.id.clone() }
    }

    pub fn edit(&mut self, diff: Diff) -> Result<(), ReplicaError> {
        self.doc = apply(&self.doc, &diff)?;
        self.outbox.push(diff);
        Ok(())
    }

    /// Takes the outbox as a put message. Returns `None` when there is
    /// nothing to send.
    pub fn take_put(&mut self) -> Option<WireMsg> {
        if self.outbox.is_empty() {
            return None;
        }
        let diffs = std::mem::take(&mut self.outbox);
        if self.mode == Mode::Push {
            self.in_flight.push_back(diffs.clone());
        }
        Some(WireMsg::Put { diffs, seen: self.seen })
    }

    pub fn get_msg(&self) -> Result<WireMsg, ReplicaError> {
        if !self.outbox.is_empty() {
            return Err(ReplicaError::OutboxNotEmpty);
        }
        Ok(WireMsg::Get)
    }

    pub fn on_message(&mut self, msg: WireMsg) -> Result<(), ReplicaError> {
        match msg {
            WireMsg::Doc { text, serial } => {
                self.doc = Doc::from(text);
                self.seen = serial;
                self.outbox.clear();
                self.in_flight.clear();
                Ok(())
            }
            WireMsg::Diffs { diffs, serial } => {
                if serial < self.seen || (self.mode == Mode::Push && serial != self.seen + 1) {
                    return Err(ReplicaError::SerialOrder {
                        from: self.seen,
                        to: serial,
                    });
                }
                match self.mode {
                    Mode::Pull => self.doc = apply_seq(&self.doc, &diffs)?,
                    Mode::Push if diffs.is_empty() => {
                        self.in_flight.pop_front().ok_or(ReplicaError::StrayAck)?;
                    }
                    Mode::Push => self.integrate(diffs)?,
                }
                self.seen = serial;
                Ok(())
            }
            WireMsg::Err { msg } => Err(ReplicaError::Server(msg)),
            other => Err(ReplicaError::Unexpected(other.encode())),
        }
    }

    fn integrate(&mut self, mut batch: DiffSeq) -> Result<(), ReplicaError> {
        let mut in_flight = self.in_flight.clone();
        for put in in_flight.iter_mut() {
            let r = self.transformer.transform(&batch, put);
            *put = r.b_after_a;
            batch = r.a_after_b;
        }
        let r = self.transformer.transform(&batch, &self.outbox);
        let doc = apply_seq(&self.doc, &r.a_after_b)?;
        self.in_flight = in_flight;
        self.outbox = r.b_after_a;
        self.doc = doc;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hub::Hub;

    fn joined(hub: &mut Hub, name: &str, mode: Mode) -> Replica {
        let mut r = Replica::new(name.into(), mode);
        for (_, m) in hub.join(r.id().clone()).unwrap() {
            r.on_message(m).unwrap();
        }
        r
    }

    fn put(hub: &mut Hub, r: &mut Replica) -> Vec<(ClientId, WireMsg)> {
        match r.take_put() {
            Some(WireMsg::Put { diffs, seen }) => hub.put(r.id(), diffs, seen).unwrap(),
            _ => vec![],
        }
    }

    fn deliver(out: Vec<(ClientId, WireMsg)>, rs: &mut [&mut Replica]) {
        for (to, m) in out {
            let r = rs.iter_mut().find(|r| *r.id() == to).unwrap();
            r.on_message(m).unwrap();
        }
    }

    #[test]
    fn push_crossing_edits_converge() {
        let mut hub = Hub::new("abcdef".into(), Mode::Push);
        let mut a = joined(&mut hub, "a", Mode::Push);
        let mut b = joined(&mut hub, "b", Mode::Push);
        a.edit(Diff::insert(3, "X")).unwrap();
        b.edit(Diff::delete(2, 2)).unwrap();
        // Both puts reach the hub before either side hears anything.
        let out_b = put(&mut hub, &mut b);
        let out_a = put(&mut hub, &mut a);
        // a keeps typing meanwhile.
        a.edit(Diff::insert(0, "Y")).unwrap();
        deliver(out_b, &mut [&mut a, &mut b]);
        deliver(out_a, &mut [&mut a, &mut b]);
        let out_a = put(&mut hub, &mut a);
        deliver(out_a, &mut [&mut a, &mut b]);
        assert_eq!(hub.doc().to_string(), "YabXef");
        assert_eq!(*a.doc(), *hub.doc());
        assert_eq!(*b.doc(), *hub.doc());
        assert_eq!(a.in_flight() + b.in_flight(), 0);
    }

    #[test]
    fn pull_replica_applies_delivered_diffs() {
        let mut hub = Hub::new("xy".into(), Mode::Pull);
        let mut a = joined(&mut hub, "a", Mode::Pull);
        let mut b = joined(&mut hub, "b", Mode::Pull);
        b.edit(Diff::insert(2, "z")).unwrap();
        put(&mut hub, &mut b);
        a.edit(Diff::delete(0, 1)).unwrap();
        assert_eq!(a.get_msg(), Err(ReplicaError::OutboxNotEmpty));
        put(&mut hub, &mut a);
        deliver(hub.get(a.id()).unwrap(), &mut [&mut a]);
        deliver(hub.get(b.id()).unwrap(), &mut [&mut b]);
        assert_eq!(a.doc().to_string(), "yz");
        assert_eq!(b.doc().to_string(), "yz");
    }

    #[test]
    fn protocol_errors() {
        let mut r = Replica::new("a".into(), Mode::Push);
        assert_eq!(
            r.on_message(WireMsg::Diffs { diffs: vec![], serial: 1 }),
            Err(ReplicaError::StrayAck)
        );
        assert_eq!(
            r.on_message(WireMsg::Diffs { diffs: vec![], serial: 5 }),
            Err(ReplicaError::SerialOrder { from: 0, to: 5 })
        );
        assert_eq!(
            r.on_message(WireMsg::err("boom")),
            Err(ReplicaError::Server("boom".into()))
        );
        assert!(matches!(r.on_message(WireMsg::Get), Err(ReplicaError::Unexpected(_))));
        assert!(r.take_put().is_none());
    }
}
