//! Brute-force and randomized checks of the convergence identity.
//!
//! The oracle throughout is the identity itself: apply each side's own edits
//! followed by the other side's transformed edits, and compare the strings.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{apply_seq, Diff, DiffSeq, Doc};
use crate::gen::EditGen;
use crate::xform::{transform_single_traced, Branch, Rules, SeqTransformPair, SplitStrategy, Step, Transformer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("alphabet must be non-empty")]
    EmptyAlphabet,
    #[error("{0} must be positive")]
    NotPositive(&'static str),
}

/// Limits for exhaustive enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumBounds {
    pub max_doc_len: usize,
    pub max_text_len: usize,
    pub alphabet: Vec<char>,
}

impl EnumBounds {
    pub fn new(max_doc_len: usize, max_text_len: usize, alphabet: &str) -> Result<Self, BoundsError> {
        let b = EnumBounds {
            max_doc_len,
            max_text_len,
            alphabet: alphabet.chars().collect(),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        if self.alphabet.is_empty() {
            return Err(BoundsError::EmptyAlphabet);
        }
        if self.max_text_len == 0 {
            return Err(BoundsError::NotPositive("max_text_len"));
        }
        Ok(())
    }

    /// Every string over the alphabet with length in `min..=max`, shortest
    /// first, then in alphabet order.
    fn strings(&self, min: usize, max: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut layer = vec![String::new()];
        for len in 0..=max {
            if len >= min {
                out.extend(layer.iter().cloned());
            }
            layer = layer
                .iter()
                .flat_map(|s| {
                    self.alphabet.iter().map(move |c| {
                        let mut t = s.clone();
                        t.push(*c);
                        t
                    })
                })
                .collect();
        }
        out
    }

    pub fn docs(&self) -> Vec<Doc> {
        self.strings(0, self.max_doc_len).into_iter().map(Doc::from).collect()
    }
}

/// All diffs applicable to a document of length `doc_len` within `bounds`:
/// inserts at every position of every text, then deletes of every range.
pub fn enumerate_diffs(doc_len: usize, bounds: &EnumBounds) -> Vec<Diff> {
    let texts = bounds.strings(1, bounds.max_text_len);
    let mut out = Vec::with_capacity((doc_len + 1) * texts.len() + doc_len * (doc_len + 1) / 2);
    for pos in 0..=doc_len {
        for t in &texts {
            out.push(Diff::insert(pos, t.clone()));
        }
    }
    for pos in 0..doc_len {
        for len in 1..=doc_len - pos {
            out.push(Diff::delete(pos, len));
        }
    }
    out
}

/// A pair of diffs for which the two application orders disagree. A side is
/// `None` when its transformed diffs did not even apply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub doc: Doc,
    pub first: Diff,
    pub second: Diff,
    pub branch: Branch,
    pub first_then_second: Option<Doc>,
    pub second_then_first: Option<Doc>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Tp1Report {
    pub docs: u64,
    pub pairs: u64,
    pub counterexamples: Vec<Counterexample>,
    pub coverage: BTreeMap<Branch, u64>,
    pub missing_branches: Vec<Branch>,
}

impl Tp1Report {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty()
    }

    pub fn full_coverage(&self) -> bool {
        self.missing_branches.is_empty()
    }
}

/// Checks the single-diff identity on every document and every ordered pair
/// of diffs within `bounds`.
pub fn check_tp1_exhaustive(bounds: &EnumBounds, rules: Rules) -> Tp1Report {
    let mut report = Tp1Report::default();
    let mut by_len: Vec<Option<Vec<Diff>>> = vec![None; bounds.max_doc_len + 1];
    for doc in bounds.docs() {
        report.docs += 1;
        let diffs = by_len[doc.len()].get_or_insert_with(|| enumerate_diffs(doc.len(), bounds));
        for first in diffs.iter() {
            for second in diffs.iter() {
                report.pairs += 1;
                let (p, branch) = transform_single_traced(first, second, rules);
                *report.coverage.entry(branch).or_default() += 1;
                let left = apply_pair(&doc, first, &p.second_after_first);
                let right = apply_pair(&doc, second, &p.first_after_second);
                if left.is_none() || left != right {
                    report.counterexamples.push(Counterexample {
                        doc: doc.clone(),
                        first: first.clone(),
                        second: second.clone(),
                        branch,
                        first_then_second: left,
                        second_then_first: right,
                    });
                }
            }
        }
    }
    report.missing_branches = Branch::ALL
        .iter()
        .filter(|b| !report.coverage.contains_key(b))
        .copied()
        .collect();
    report
}

fn apply_pair(doc: &Doc, own: &Diff, other: &[Diff]) -> Option<Doc> {
    let mut seq = Vec::with_capacity(1 + other.len());
    seq.push(own.clone());
    seq.extend_from_slice(other);
    apply_seq(doc, &seq).ok()
}

/// Settings for the randomized sequence checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeqBounds {
    pub trials: u64,
    pub seed: u64,
    pub max_seq_len: usize,
    pub max_doc_len: usize,
    pub max_text_len: usize,
    pub max_delete_len: usize,
    pub alphabet: String,
    pub insert_prob: f64,
    /// Force the first diff of `a` to be an insert strictly inside a delete
    /// opening `b`, so every trial produces split fragments.
    pub targeted: bool,
}

impl Default for SeqBounds {
    fn default() -> Self {
        SeqBounds {
            trials: 10_000,
            seed: 0,
            max_seq_len: 5,
            max_doc_len: 12,
            max_text_len: 3,
            max_delete_len: 4,
            alphabet: "ab".into(),
            insert_prob: 0.5,
            targeted: false,
        }
    }
}

impl SeqBounds {
    fn edit_gen(&self) -> EditGen {
        EditGen::new(&self.alphabet, self.insert_prob, self.max_text_len, self.max_delete_len)
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        if self.alphabet.is_empty() {
            return Err(BoundsError::EmptyAlphabet);
        }
        if self.max_text_len == 0 {
            return Err(BoundsError::NotPositive("max_text_len"));
        }
        if self.max_delete_len == 0 {
            return Err(BoundsError::NotPositive("max_delete_len"));
        }
        Ok(())
    }
}

/// One random instance: a document and two sequences both applicable to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trial {
    pub doc: Doc,
    pub a: DiffSeq,
    pub b: DiffSeq,
}

/// Deterministic stream of trials.
pub struct TrialGen {
    rng: ChaCha8Rng,
    edits: EditGen,
    bounds: SeqBounds,
}

impl TrialGen {
    pub fn new(bounds: &SeqBounds) -> Self {
        TrialGen {
            rng: ChaCha8Rng::seed_from_u64(bounds.seed),
            edits: bounds.edit_gen(),
            bounds: bounds.clone(),
        }
    }

    pub fn next_trial(&mut self) -> Trial {
        let max_seq = self.bounds.max_seq_len;
        let doc = if self.bounds.targeted {
            // need room for a delete of length two
            let len = self.rng.gen_range(2.min(self.bounds.max_doc_len)..=self.bounds.max_doc_len);
            Doc::from(self.edits.text(&mut self.rng, len))
        } else {
            self.edits.doc(&mut self.rng, self.bounds.max_doc_len)
        };
        let wide = self.bounds.targeted && max_seq > 0;
        if let (true, Some(del)) = (wide, self.edits.wide_delete(&mut self.rng, doc.len())) {
            let at = self.rng.gen_range(del.pos + 1..del.pos + del.len);
            let ins = self.edits.insert(&mut self.rng, at);
            let na = self.rng.gen_range(1..=max_seq);
            let nb = self.rng.gen_range(1..=max_seq);
            let a = self.edits.extend_seq(&mut self.rng, doc.len(), vec![ins], na);
            let b = self.edits.extend_seq(&mut self.rng, doc.len(), vec![del.into()], nb);
            return Trial { doc, a, b };
        }
        let a = self.edits.seq(&mut self.rng, doc.len(), max_seq);
        let b = self.edits.seq(&mut self.rng, doc.len(), max_seq);
        Trial { doc, a, b }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Result of applying both sides of a sequence transform to `doc`, or `None`
/// where a side did not apply.
pub fn both_sides(doc: &Doc, a: &[Diff], b: &[Diff], r: &SeqTransformPair) -> (Option<Doc>, Option<Doc>) {
    let left: DiffSeq = a.iter().chain(&r.b_after_a).cloned().collect();
    let right: DiffSeq = b.iter().chain(&r.a_after_b).cloned().collect();
    (apply_seq(doc, &left).ok(), apply_seq(doc, &right).ok())
}

pub fn identity_holds(doc: &Doc, a: &[Diff], b: &[Diff], r: &SeqTransformPair) -> bool {
    match both_sides(doc, a, b, r) {
        (Some(l), Some(r)) => l == r,
        _ => false,
    }
}

/// `|b after a| <= |b|·(|a|+1)` and the mirror.
pub fn within_fragmentation_bound(a: &[Diff], b: &[Diff], r: &SeqTransformPair) -> bool {
    r.b_after_a.len() <= b.len() * (a.len() + 1) && r.a_after_b.len() <= a.len() * (b.len() + 1)
}

pub fn single_call_budget(a_len: usize, b_len: usize) -> u64 {
    ((a_len + 1) * (b_len + 1) * 4) as u64
}

#[derive(Debug, Clone, Serialize)]
pub struct SeqFailure {
    pub trial: Trial,
    pub reason: &'static str,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SeqReport {
    pub trials: u64,
    pub passes: u64,
    pub identity_failures: u64,
    pub split_mismatches: u64,
    pub fragmentation_violations: u64,
    pub budget_violations: u64,
    pub max_single_calls: u64,
    /// Trials in which some single-diff transform split a delete.
    pub trials_with_splits: u64,
    pub failures: Vec<SeqFailure>,
}

impl SeqReport {
    pub fn passed(&self) -> bool {
        self.passes == self.trials
    }
}

/// Randomized check of the sequence identity. Each trial also runs the
/// leftmost split and requires the same resulting document, the
/// fragmentation bound, and the single-transform budget.
pub fn check_seq_identity(bounds: &SeqBounds) -> SeqReport {
    let mut gen = TrialGen::new(bounds);
    let mut report = SeqReport::default();
    for _ in 0..bounds.trials {
        let trial = gen.next_trial();
        report.trials += 1;
        let mut reasons = Vec::new();

        let mut mid = Transformer::new(SplitStrategy::Midpoint);
        let rm = mid.transform(&trial.a, &trial.b);
        let mut left = Transformer::new(SplitStrategy::Leftmost);
        let rl = left.transform(&trial.a, &trial.b);

        let (ml, mr) = both_sides(&trial.doc, &trial.a, &trial.b, &rm);
        let (ll, lr) = both_sides(&trial.doc, &trial.a, &trial.b, &rl);
        if ml.is_none() || ml != mr || ll.is_none() || ll != lr {
            report.identity_failures += 1;
            reasons.push("identity");
        } else if ml != ll {
            report.split_mismatches += 1;
            reasons.push("split strategies disagree");
        }
        if !within_fragmentation_bound(&trial.a, &trial.b, &rm) || !within_fragmentation_bound(&trial.a, &trial.b, &rl) {
            report.fragmentation_violations += 1;
            reasons.push("fragmentation bound");
        }
        let budget = single_call_budget(trial.a.len(), trial.b.len());
        let calls = mid.single_calls().max(left.single_calls());
        report.max_single_calls = report.max_single_calls.max(calls);
        if calls > budget {
            report.budget_violations += 1;
            reasons.push("single-transform budget");
        }
        if mid.splits() > 0 {
            report.trials_with_splits += 1;
        }
        if reasons.is_empty() {
            report.passes += 1;
        } else {
            report.failures.push(SeqFailure {
                trial,
                reason: reasons[0],
            });
        }
    }
    report
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct EpsilonReport {
    pub trials: u64,
    pub passes: u64,
    pub markers_inserted: u64,
    pub failures: Vec<Trial>,
}

impl EpsilonReport {
    pub fn passed(&self) -> bool {
        self.passes == self.trials
    }
}

fn sprinkle_markers<R: Rng>(rng: &mut R, seq: &[Diff]) -> (Vec<Step>, u64) {
    let mut steps: Vec<Step> = seq.iter().cloned().map(Step::Diff).collect();
    let n = rng.gen_range(1..=3);
    for _ in 0..n {
        let at = rng.gen_range(0..=steps.len());
        steps.insert(at, Step::Empty);
    }
    let markers = steps.iter().filter(|s| **s == Step::Empty).count() as u64;
    (steps, markers)
}

/// Inserts empty markers at random positions of both sequences and checks
/// that the transform's results apply exactly like the unmarked ones.
pub fn check_epsilon(bounds: &SeqBounds) -> EpsilonReport {
    let mut gen = TrialGen::new(bounds);
    let mut report = EpsilonReport::default();
    for _ in 0..bounds.trials {
        let trial = gen.next_trial();
        report.trials += 1;
        let (a_marked, ma) = sprinkle_markers(gen.rng(), &trial.a);
        let (b_marked, mb) = sprinkle_markers(gen.rng(), &trial.b);
        report.markers_inserted += ma + mb;

        let plain = Transformer::default().transform(&trial.a, &trial.b);
        let marked = Transformer::default().transform(&a_marked, &b_marked);
        let (pl, pr) = both_sides(&trial.doc, &trial.a, &trial.b, &plain);
        let (ml, mr) = both_sides(&trial.doc, &trial.a, &trial.b, &marked);
        if pl.is_some() && pl == pr && ml == pl && mr == pr {
            report.passes += 1;
        } else {
            report.failures.push(trial);
        }
    }
    report
}
