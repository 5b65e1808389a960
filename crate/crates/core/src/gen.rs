//! Seeded random documents and edits, always applicable by construction.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::diff::{Delete, Diff, DiffSeq, Doc};

#[derive(Debug, Clone)]
pub struct EditGen {
    pub alphabet: Vec<char>,
    pub insert_prob: f64,
    pub max_insert_len: usize,
    pub max_delete_len: usize,
}

impl EditGen {
    pub fn new(alphabet: &str, insert_prob: f64, max_insert_len: usize, max_delete_len: usize) -> Self {
        let alphabet: Vec<char> = alphabet.chars().collect();
        assert!(!alphabet.is_empty(), "alphabet must be non-empty");
        assert!(max_insert_len > 0 && max_delete_len > 0);
        EditGen {
            alphabet,
            insert_prob,
            max_insert_len,
            max_delete_len,
        }
    }

    pub fn text<R: Rng>(&self, rng: &mut R, len: usize) -> String {
        (0..len)
            .map(|_| *self.alphabet.choose(rng).expect("non-empty alphabet"))
            .collect()
    }

    pub fn doc<R: Rng>(&self, rng: &mut R, max_len: usize) -> Doc {
        let len = rng.gen_range(0..=max_len);
        Doc::from(self.text(rng, len))
    }

    pub fn insert<R: Rng>(&self, rng: &mut R, pos: usize) -> Diff {
        let len = rng.gen_range(1..=self.max_insert_len);
        Diff::insert(pos, self.text(rng, len))
    }

    /// A diff applicable to a document of length `doc_len`. Empty documents
    /// always get an insert.
    pub fn diff<R: Rng>(&self, rng: &mut R, doc_len: usize) -> Diff {
        if doc_len == 0 || rng.gen_bool(self.insert_prob) {
            let pos = rng.gen_range(0..=doc_len);
            self.insert(rng, pos)
        } else {
            let pos = rng.gen_range(0..doc_len);
            let len = rng.gen_range(1..=self.max_delete_len.min(doc_len - pos));
            Diff::delete(pos, len)
        }
    }

    /// A delete of length at least two, when the document allows one.
    pub fn wide_delete<R: Rng>(&self, rng: &mut R, doc_len: usize) -> Option<Delete> {
        if doc_len < 2 {
            return None;
        }
        let pos = rng.gen_range(0..doc_len - 1);
        let len = rng.gen_range(2..=(doc_len - pos).max(2));
        Some(Delete::new(pos, len))
    }

    /// Up to `max_len` diffs, each applicable after the ones before it.
    pub fn seq<R: Rng>(&self, rng: &mut R, doc_len: usize, max_len: usize) -> DiffSeq {
        let n = rng.gen_range(0..=max_len);
        self.extend_seq(rng, doc_len, Vec::with_capacity(n), n)
    }

    /// Appends diffs to `prefix` (already applicable to `doc_len`) until it
    /// holds `n`.
    pub fn extend_seq<R: Rng>(&self, rng: &mut R, doc_len: usize, mut prefix: DiffSeq, n: usize) -> DiffSeq {
        let mut len = prefix.iter().fold(doc_len, after);
        while prefix.len() < n {
            let d = self.diff(rng, len);
            len = after(len, &d);
            prefix.push(d);
        }
        prefix
    }
}

/// Document length after applying `d`.
fn after(len: usize, d: &Diff) -> usize {
    match d {
        Diff::Insert(i) => len + i.text_len(),
        Diff::Delete(x) => len - x.len,
    }
}
