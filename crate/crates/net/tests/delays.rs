//! Hub and replicas wired through in-memory FIFO links with random delivery
//! timing, so puts and batches cross in flight arbitrarily.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textmerge::gen::EditGen;
use textmerge::Doc;
use textmerge_net::{Hub, Mode, Replica, WireMsg};

struct Net {
    hub: Hub,
    replicas: Vec<Replica>,
    to_hub: Vec<VecDeque<WireMsg>>,
    to_client: Vec<VecDeque<WireMsg>>,
}

impl Net {
    fn new(doc: &str, n: usize, mode: Mode) -> Self {
        let mut hub = Hub::new(Doc::from(doc), mode);
        let mut replicas = vec![];
        for i in 0..n {
            let mut r = Replica::new(format!("c{i}").into(), mode);
            for (_, m) in hub.join(r.id().clone()).unwrap() {
                r.on_message(m).unwrap();
            }
            replicas.push(r);
        }
        Net {
            hub,
            replicas,
            to_hub: vec![VecDeque::new(); n],
            to_client: vec![VecDeque::new(); n],
        }
    }

    fn deliver_to_hub(&mut self, i: usize) -> bool {
        let Some(m) = self.to_hub[i].pop_front() else { return false };
        let id = self.replicas[i].id().clone();
        for (to, reply) in self.hub.handle(&id, m).unwrap() {
            let j = self.replicas.iter().position(|r| *r.id() == to).unwrap();
            self.to_client[j].push_back(reply);
        }
        true
    }

    fn deliver_to_client(&mut self, i: usize) -> bool {
        let Some(m) = self.to_client[i].pop_front() else { return false };
        self.replicas[i].on_message(m).unwrap();
        true
    }

    fn drain(&mut self) {
        loop {
            let mut moved = false;
            for i in 0..self.replicas.len() {
                if let Some(m) = self.replicas[i].take_put() {
                    self.to_hub[i].push_back(m);
                }
                while self.deliver_to_hub(i) {
                    moved = true;
                }
            }
            for i in 0..self.replicas.len() {
                while self.deliver_to_client(i) {
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
    }
}

fn run_push(seed: u64, clients: usize, steps: usize) -> Net {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gen = EditGen::new("ab", 0.6, 3, 3);
    let mut net = Net::new("xyz", clients, Mode::Push);
    for _ in 0..steps {
        let i = rng.gen_range(0..clients);
        match rng.gen_range(0..5) {
            0 | 1 => {
                let d = gen.diff(&mut rng, net.replicas[i].doc().len());
                net.replicas[i].edit(d).unwrap();
            }
            2 => {
                if let Some(m) = net.replicas[i].take_put() {
                    net.to_hub[i].push_back(m);
                }
            }
            3 => {
                net.deliver_to_hub(i);
            }
            _ => {
                net.deliver_to_client(i);
            }
        }
    }
    net.drain();
    net
}

#[test]
fn push_converges_under_arbitrary_delays() {
    for clients in [2, 3, 5] {
        for seed in 0..300 {
            let net = run_push(seed, clients, 150);
            for r in &net.replicas {
                assert_eq!(r.doc(), net.hub.doc(), "seed {seed}, {clients} clients, {}", r.id());
                assert_eq!(r.in_flight(), 0);
            }
        }
    }
}

#[test]
fn pull_ledger_leads_from_replica_to_server() {
    let gen = EditGen::new("ab", 0.5, 2, 3);
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Net::new("", 3, Mode::Pull);
        for _ in 0..100 {
            let i = rng.gen_range(0..3);
            match rng.gen_range(0..3) {
                0 => {
                    let d = gen.diff(&mut rng, net.replicas[i].doc().len());
                    net.replicas[i].edit(d).unwrap();
                }
                1 => {
                    if let Some(m) = net.replicas[i].take_put() {
                        net.to_hub[i].push_back(m);
                        net.deliver_to_hub(i);
                    }
                }
                _ => {
                    if let Some(m) = net.replicas[i].take_put() {
                        net.to_hub[i].push_back(m);
                    }
                    net.to_hub[i].push_back(net.replicas[i].get_msg().unwrap());
                    while net.deliver_to_hub(i) {}
                    net.deliver_to_client(i);
                }
            }
            for r in &net.replicas {
                if r.outbox().is_empty() {
                    let pending = net.hub.unconfirmed(r.id()).unwrap();
                    assert_eq!(&textmerge::apply_seq(r.doc(), &pending).unwrap(), net.hub.doc());
                }
            }
        }
    }
}
