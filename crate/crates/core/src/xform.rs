//! Transformation of concurrent edits.
//!
//! Given two diffs made against the same document, [`transform_single`]
//! rewrites each so it applies after the other, such that both orders end in
//! the same text. [`transform_seq`] extends this to sequences by splitting
//! the longer side and recursing; single-diff results of length two (an insert
//! landing inside a delete) simply re-enter the recursion as sequences.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::diff::{classify, lift, split_delete, subtract, Delete, Diff, DiffSeq, Insert, Placement};

/// Result of transforming two single diffs made against the same document.
///
/// Each side holds zero, one or two diffs. Two diffs arise only when an insert
/// splits a delete; the second fragment is already expressed in the
/// coordinates left by the first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformPair {
    /// The second diff rewritten to apply after the first.
    pub second_after_first: DiffSeq,
    /// The first diff rewritten to apply after the second.
    pub first_after_second: DiffSeq,
}

/// Result of transforming two diff sequences made against the same document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqTransformPair {
    pub b_after_a: DiffSeq,
    pub a_after_b: DiffSeq,
}

/// Which row of the single-diff case table produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    InsInsIdentical,
    InsInsSameStartFirstLesser,
    InsInsSameStartSecondLesser,
    InsInsFirstLeft,
    InsInsFirstRight,
    InsDelInsertBefore,
    InsDelInsertAfter,
    InsDelSplit,
    DelInsDeleteLeft,
    DelInsDeleteAtOrAfter,
    DelInsSplit,
    DelDelIdentical,
    DelDelFirstLeft,
    DelDelFirstRight,
    DelDelSameStartFirstShorter,
    DelDelSameStartFirstLonger,
    DelDelOverlapLeft,
    DelDelOverlapRight,
    DelDelFirstContains,
    DelDelSecondContains,
}

impl Branch {
    pub const ALL: [Branch; 20] = [
        Branch::InsInsIdentical,
        Branch::InsInsSameStartFirstLesser,
        Branch::InsInsSameStartSecondLesser,
        Branch::InsInsFirstLeft,
        Branch::InsInsFirstRight,
        Branch::InsDelInsertBefore,
        Branch::InsDelInsertAfter,
        Branch::InsDelSplit,
        Branch::DelInsDeleteLeft,
        Branch::DelInsDeleteAtOrAfter,
        Branch::DelInsSplit,
        Branch::DelDelIdentical,
        Branch::DelDelFirstLeft,
        Branch::DelDelFirstRight,
        Branch::DelDelSameStartFirstShorter,
        Branch::DelDelSameStartFirstLonger,
        Branch::DelDelOverlapLeft,
        Branch::DelDelOverlapRight,
        Branch::DelDelFirstContains,
        Branch::DelDelSecondContains,
    ];
}

/// Case-table variants. `LiteralEqualDeletes` reproduces a known-broken rule
/// for two identical deletes (one side keeps its delete) and exists only as a
/// negative control for the verifiers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rules {
    #[default]
    Standard,
    LiteralEqualDeletes,
}

/// Where [`transform_seq`] cuts a sequence of length > 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    #[default]
    Midpoint,
    /// Peel off one diff at a time.
    Leftmost,
}

impl SplitStrategy {
    fn split_point(self, len: usize) -> usize {
        match self {
            SplitStrategy::Midpoint => len / 2,
            SplitStrategy::Leftmost => 1,
        }
    }
}

pub fn transform_single(first: &Diff, second: &Diff) -> TransformPair {
    transform_single_traced(first, second, Rules::Standard).0
}

// Every lift/subtract/split below is only reached in a configuration where it
// is defined, whatever the document.
const TABLE: &str = "case table only lifts/subtracts/splits inside their domain";

fn pair(second_after_first: DiffSeq, first_after_second: DiffSeq) -> TransformPair {
    TransformPair {
        second_after_first,
        first_after_second,
    }
}

/// Like [`transform_single`], also reporting the case-table row used.
pub fn transform_single_traced(first: &Diff, second: &Diff, rules: Rules) -> (TransformPair, Branch) {
    let place = classify(first, second).placement();
    match (first, second) {
        (Diff::Insert(a), Diff::Insert(b)) => insert_insert(first, second, a, b, place),
        (Diff::Insert(_), Diff::Delete(b)) => insert_delete(first, second, b, place),
        (Diff::Delete(a), Diff::Insert(_)) => {
            // Mirror of insert/delete with the roles swapped.
            let (p, branch) = insert_delete(second, first, a, mirror(place));
            let branch = match branch {
                Branch::InsDelInsertBefore => Branch::DelInsDeleteAtOrAfter,
                Branch::InsDelInsertAfter => Branch::DelInsDeleteLeft,
                _ => Branch::DelInsSplit,
            };
            (pair(p.first_after_second, p.second_after_first), branch)
        }
        (Diff::Delete(a), Diff::Delete(b)) => delete_delete(first, second, a, b, place, rules),
    }
}

fn mirror(place: Placement) -> Placement {
    match place {
        Placement::SeparateLeft => Placement::SeparateRight,
        Placement::OverlapLeft => Placement::OverlapRight,
        Placement::SameStart => Placement::SameStart,
        Placement::OverlapRight => Placement::OverlapLeft,
        Placement::SeparateRight => Placement::SeparateLeft,
    }
}

fn insert_insert(first: &Diff, second: &Diff, a: &Insert, b: &Insert, place: Placement) -> (TransformPair, Branch) {
    let keep = || pair(vec![second.clone()], vec![first.clone()]);
    match place {
        _ if a == b => (keep(), Branch::InsInsIdentical),
        // The diff with the lesser text is lifted, so it lands after the other.
        Placement::SameStart => match a.text.cmp(&b.text) {
            Ordering::Less => (
                pair(vec![second.clone()], vec![lift(first, second).expect(TABLE)]),
                Branch::InsInsSameStartFirstLesser,
            ),
            _ => (
                pair(vec![lift(second, first).expect(TABLE)], vec![first.clone()]),
                Branch::InsInsSameStartSecondLesser,
            ),
        },
        Placement::SeparateLeft | Placement::OverlapLeft => (
            pair(vec![lift(second, first).expect(TABLE)], vec![first.clone()]),
            Branch::InsInsFirstLeft,
        ),
        Placement::OverlapRight | Placement::SeparateRight => (
            pair(vec![second.clone()], vec![lift(first, second).expect(TABLE)]),
            Branch::InsInsFirstRight,
        ),
    }
}

/// `ins` is an insert, `del` the delete it is transformed against.
fn insert_delete(ins: &Diff, del_diff: &Diff, del: &Delete, place: Placement) -> (TransformPair, Branch) {
    match place {
        Placement::SeparateLeft | Placement::SameStart | Placement::OverlapLeft => (
            pair(vec![lift(del_diff, ins).expect(TABLE)], vec![ins.clone()]),
            Branch::InsDelInsertBefore,
        ),
        Placement::SeparateRight => (
            pair(vec![del_diff.clone()], vec![lift(ins, del_diff).expect(TABLE)]),
            Branch::InsDelInsertAfter,
        ),
        Placement::OverlapRight => {
            // The insert lands strictly inside the delete, which keeps both
            // sides of it and leaves the inserted text alone.
            let (left, right) = split_delete(del, ins.pos()).expect(TABLE);
            let left = Diff::from(left);
            let right = lift(&lift(&Diff::from(right), ins).expect(TABLE), &left).expect(TABLE);
            let ins_after = lift(ins, &left).expect(TABLE);
            (pair(vec![left, right], vec![ins_after]), Branch::InsDelSplit)
        }
    }
}

fn delete_delete(
    first: &Diff,
    second: &Diff,
    a: &Delete,
    b: &Delete,
    place: Placement,
    rules: Rules,
) -> (TransformPair, Branch) {
    let rest = |outer: &Delete, inner: &Delete| Diff::from(subtract(outer, inner).expect(TABLE));
    match place {
        _ if a == b => match rules {
            Rules::Standard => (pair(vec![], vec![]), Branch::DelDelIdentical),
            Rules::LiteralEqualDeletes => (pair(vec![], vec![first.clone()]), Branch::DelDelIdentical),
        },
        Placement::SeparateLeft => (
            pair(vec![lift(second, first).expect(TABLE)], vec![first.clone()]),
            Branch::DelDelFirstLeft,
        ),
        Placement::SeparateRight => (
            pair(vec![second.clone()], vec![lift(first, second).expect(TABLE)]),
            Branch::DelDelFirstRight,
        ),
        Placement::SameStart if a.len < b.len => (
            pair(vec![lift(&rest(b, a), first).expect(TABLE)], vec![]),
            Branch::DelDelSameStartFirstShorter,
        ),
        Placement::SameStart => (
            pair(vec![], vec![lift(&rest(a, b), second).expect(TABLE)]),
            Branch::DelDelSameStartFirstLonger,
        ),
        Placement::OverlapLeft if a.end() < b.end() => (
            pair(vec![lift(&rest(b, a), first).expect(TABLE)], vec![rest(a, b)]),
            Branch::DelDelOverlapLeft,
        ),
        // One delete covering the other shrinks to a single delete.
        Placement::OverlapLeft => (
            pair(vec![], vec![Diff::delete(a.pos, a.len - b.len)]),
            Branch::DelDelFirstContains,
        ),
        Placement::OverlapRight if a.end() > b.end() => (
            pair(vec![rest(b, a)], vec![lift(&rest(a, b), second).expect(TABLE)]),
            Branch::DelDelOverlapRight,
        ),
        Placement::OverlapRight => (
            pair(vec![Diff::delete(b.pos, b.len - a.len)], vec![]),
            Branch::DelDelSecondContains,
        ),
    }
}

/// A sequence element that may be an explicit empty edit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Diff(Diff),
    Empty,
}

impl From<Diff> for Step {
    fn from(d: Diff) -> Self {
        Step::Diff(d)
    }
}

/// Anything [`Transformer`] can walk: plain diffs, or [`Step`]s carrying
/// empty markers.
pub trait SeqItem {
    fn as_diff(&self) -> Option<&Diff>;
}

impl SeqItem for Diff {
    fn as_diff(&self) -> Option<&Diff> {
        Some(self)
    }
}

impl SeqItem for Step {
    fn as_diff(&self) -> Option<&Diff> {
        match self {
            Step::Diff(d) => Some(d),
            Step::Empty => None,
        }
    }
}

/// Drops empty markers. Application is unaffected.
pub fn normalize<T: SeqItem>(items: &[T]) -> DiffSeq {
    items.iter().filter_map(|s| s.as_diff().cloned()).collect()
}

pub fn transform_seq(a: &[Diff], b: &[Diff]) -> SeqTransformPair {
    Transformer::default().transform(a, b)
}

/// Sequence transformer with a configurable split point and case table.
/// Counts the single-diff transforms it performs.
#[derive(Debug, Clone, Default)]
pub struct Transformer {
    strategy: SplitStrategy,
    rules: Rules,
    single_calls: u64,
    splits: u64,
}

impl Transformer {
    pub fn new(strategy: SplitStrategy) -> Self {
        Transformer {
            strategy,
            ..Self::default()
        }
    }

    pub fn with_rules(mut self, rules: Rules) -> Self {
        self.rules = rules;
        self
    }

    pub fn strategy(&self) -> SplitStrategy {
        self.strategy
    }

    /// Number of single-diff transforms performed so far.
    pub fn single_calls(&self) -> u64 {
        self.single_calls
    }

    /// Number of single-diff transforms in which an insert split a delete.
    pub fn splits(&self) -> u64 {
        self.splits
    }

    pub fn transform<A: SeqItem, B: SeqItem>(&mut self, a: &[A], b: &[B]) -> SeqTransformPair {
        let (b_after_a, a_after_b) = self.run(a, b);
        SeqTransformPair { b_after_a, a_after_b }
    }

    /// Returns `(b after a, a after b)`.
    fn run<A: SeqItem, B: SeqItem>(&mut self, a: &[A], b: &[B]) -> (DiffSeq, DiffSeq) {
        match (a.len(), b.len()) {
            (0, _) => (normalize(b), vec![]),
            (_, 0) => (vec![], normalize(a)),
            (1, 1) => match (a[0].as_diff(), b[0].as_diff()) {
                (Some(x), Some(y)) => {
                    self.single_calls += 1;
                    let (p, branch) = transform_single_traced(x, y, self.rules);
                    if matches!(branch, Branch::InsDelSplit | Branch::DelInsSplit) {
                        self.splits += 1;
                    }
                    (p.second_after_first, p.first_after_second)
                }
                _ => (normalize(b), normalize(a)),
            },
            (la, lb) if la >= lb => {
                let (a1, a2) = a.split_at(self.strategy.split_point(la));
                let (b1, mut a1_after) = self.run(a1, b);
                let (b2, a2_after) = self.run(a2, &b1);
                a1_after.extend(a2_after);
                (b2, a1_after)
            }
            (_, lb) => {
                let (b1, b2) = b.split_at(self.strategy.split_point(lb));
                let (mut b1_after, a1) = self.run(a, b1);
                let (b2_after, a2) = self.run(&a1, b2);
                b1_after.extend(b2_after);
                (b1_after, a2)
            }
        }
    }
}
