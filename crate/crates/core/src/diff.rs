//! Single-edit values and the arithmetic on them.
//!
//! A [`Diff`] is either an insert of non-empty text before a position or a
//! delete of a positive-length range. Positions are 0-based and count Unicode
//! scalar values, never bytes.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A document: a finite sequence of characters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Doc(Vec<char>);

impl Doc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.0
    }
}

impl From<&str> for Doc {
    fn from(s: &str) -> Self {
        Doc(s.chars().collect())
    }
}

impl From<String> for Doc {
    fn from(s: String) -> Self {
        Doc(s.chars().collect())
    }
}

impl From<Vec<char>> for Doc {
    fn from(chars: Vec<char>) -> Self {
        Doc(chars)
    }
}

impl FromIterator<char> for Doc {
    fn from_iter<I: IntoIterator<Item = char>>(iter: I) -> Self {
        Doc(iter.into_iter().collect())
    }
}

impl fmt::Display for Doc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.0 {
            fmt::Write::write_char(f, *c)?;
        }
        Ok(())
    }
}

impl Serialize for Doc {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Doc {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer).map(Doc::from)
    }
}

/// Insert `text` before index `pos`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Insert {
    pub pos: usize,
    pub text: String,
}

impl Insert {
    /// Length of the inserted text in characters.
    pub fn text_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// Remove the `len` characters starting at index `pos`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Delete {
    pub pos: usize,
    pub len: usize,
}

impl Delete {
    pub fn new(pos: usize, len: usize) -> Self {
        assert!(len > 0, "delete length must be positive");
        Delete { pos, len }
    }

    /// Last index removed.
    pub fn end(&self) -> usize {
        self.pos + self.len - 1
    }

    /// The range `[start, end]` (inclusive) as a delete.
    fn spanning(start: usize, end: usize) -> Self {
        Delete::new(start, end - start + 1)
    }
}

/// One edit against a specific document state.
///
/// Encoded on the wire as `{"op":"i","pos":N,"text":S}` or
/// `{"op":"d","pos":N,"len":L}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", try_from = "RawDiff")]
pub enum Diff {
    #[serde(rename = "i")]
    Insert(Insert),
    #[serde(rename = "d")]
    Delete(Delete),
}

/// Ordered diffs, each expressed in the coordinates left by the ones before it.
/// The empty sequence is the identity edit.
pub type DiffSeq = Vec<Diff>;

#[derive(Deserialize)]
#[serde(tag = "op")]
enum RawDiff {
    #[serde(rename = "i")]
    Insert(Insert),
    #[serde(rename = "d")]
    Delete(Delete),
}

impl TryFrom<RawDiff> for Diff {
    type Error = DiffError;

    fn try_from(raw: RawDiff) -> Result<Self, Self::Error> {
        let diff = match raw {
            RawDiff::Insert(i) => Diff::Insert(i),
            RawDiff::Delete(d) => Diff::Delete(d),
        };
        diff.validate()?;
        Ok(diff)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("malformed diff {0}: inserts need text and deletes a positive length")]
    Malformed(Diff),
    #[error("{diff} does not fit a document of length {doc_len}")]
    OutOfRange { diff: Diff, doc_len: usize },
    #[error("diff #{index} ({diff}) does not fit a document of length {doc_len}")]
    OutOfRangeAt {
        index: usize,
        diff: Diff,
        doc_len: usize,
    },
    #[error("lifting {target} by {by} gives a negative position")]
    NegativeLift { target: Diff, by: Diff },
    #[error("{inner:?} does not overlap {outer:?} on exactly one side")]
    NotOneSidedOverlap { outer: Delete, inner: Delete },
    #[error("split point {at} is not strictly inside {target:?}")]
    SplitOutside { target: Delete, at: usize },
}

impl Diff {
    /// Panics if `text` is empty.
    pub fn insert(pos: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        assert!(!text.is_empty(), "insert text must be non-empty");
        Diff::Insert(Insert { pos, text })
    }

    /// Panics if `len` is zero.
    pub fn delete(pos: usize, len: usize) -> Self {
        Diff::Delete(Delete::new(pos, len))
    }

    pub fn validate(&self) -> Result<(), DiffError> {
        let ok = match self {
            Diff::Insert(i) => !i.text.is_empty(),
            Diff::Delete(d) => d.len > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(DiffError::Malformed(self.clone()))
        }
    }

    pub fn pos(&self) -> usize {
        match self {
            Diff::Insert(i) => i.pos,
            Diff::Delete(d) => d.pos,
        }
    }

    /// Number of characters inserted or removed.
    pub fn width(&self) -> usize {
        match self {
            Diff::Insert(i) => i.text_len(),
            Diff::Delete(d) => d.len,
        }
    }

    pub fn is_insert(&self) -> bool {
        matches!(self, Diff::Insert(_))
    }

    /// `(start, end)`: the first and last index the diff covers. An insert of
    /// `k` characters at `n` covers `n..=n+k-1`, a delete of `l` at `n` covers
    /// `n..=n+l-1`.
    pub fn endpoints(&self) -> (usize, usize) {
        let start = self.pos();
        (start, (start + self.width()).saturating_sub(1).max(start))
    }

    fn with_pos(&self, pos: usize) -> Diff {
        match self {
            Diff::Insert(i) => Diff::Insert(Insert {
                pos,
                text: i.text.clone(),
            }),
            Diff::Delete(d) => Diff::Delete(Delete { pos, len: d.len }),
        }
    }

    /// Whether the diff can be applied to a document of length `doc_len`.
    pub fn fits(&self, doc_len: usize) -> bool {
        match self {
            Diff::Insert(i) => i.pos <= doc_len,
            Diff::Delete(d) => d.pos + d.len <= doc_len,
        }
    }
}

impl fmt::Display for Diff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diff::Insert(i) => write!(f, "i({},{:?})", i.pos, i.text),
            Diff::Delete(d) => write!(f, "d({},{})", d.pos, d.len),
        }
    }
}

impl From<Delete> for Diff {
    fn from(d: Delete) -> Self {
        Diff::Delete(d)
    }
}

impl From<Insert> for Diff {
    fn from(i: Insert) -> Self {
        Diff::Insert(i)
    }
}

pub fn apply(doc: &Doc, diff: &Diff) -> Result<Doc, DiffError> {
    diff.validate()?;
    if !diff.fits(doc.len()) {
        return Err(DiffError::OutOfRange {
            diff: diff.clone(),
            doc_len: doc.len(),
        });
    }
    let chars = doc.chars();
    let out = match diff {
        Diff::Insert(i) => {
            let mut out = Vec::with_capacity(chars.len() + i.text.len());
            out.extend_from_slice(&chars[..i.pos]);
            out.extend(i.text.chars());
            out.extend_from_slice(&chars[i.pos..]);
            out
        }
        Diff::Delete(d) => {
            let mut out = Vec::with_capacity(chars.len() - d.len);
            out.extend_from_slice(&chars[..d.pos]);
            out.extend_from_slice(&chars[d.pos + d.len..]);
            out
        }
    };
    Ok(Doc(out))
}

/// Applies `diffs` left to right.
pub fn apply_seq(doc: &Doc, diffs: &[Diff]) -> Result<Doc, DiffError> {
    let mut cur = doc.clone();
    for (index, diff) in diffs.iter().enumerate() {
        cur = apply(&cur, diff).map_err(|e| match e {
            DiffError::OutOfRange { diff, doc_len } => DiffError::OutOfRangeAt {
                index,
                diff,
                doc_len,
            },
            other => other,
        })?;
    }
    Ok(cur)
}

/// Coarse placement of one diff's range relative to another's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Placement {
    /// Entirely to the left, no shared index.
    SeparateLeft,
    /// Starts strictly left and overlaps.
    OverlapLeft,
    SameStart,
    /// Starts strictly right and overlaps.
    OverlapRight,
    /// Entirely to the right, no shared index.
    SeparateRight,
}

/// How the range of `a` relates to the range of `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rel {
    pub start: Ordering,
    pub end: Ordering,
    pub overlap: bool,
}

impl Rel {
    /// Same start is checked first; the remaining overlapping cases split on
    /// which diff starts further left.
    pub fn placement(&self) -> Placement {
        match (self.start, self.overlap) {
            (Ordering::Equal, _) => Placement::SameStart,
            (Ordering::Less, false) => Placement::SeparateLeft,
            (Ordering::Greater, false) => Placement::SeparateRight,
            (Ordering::Less, true) => Placement::OverlapLeft,
            (Ordering::Greater, true) => Placement::OverlapRight,
        }
    }
}

pub fn classify(a: &Diff, b: &Diff) -> Rel {
    let (a_start, a_end) = a.endpoints();
    let (b_start, b_end) = b.endpoints();
    Rel {
        start: a_start.cmp(&b_start),
        end: a_end.cmp(&b_end),
        overlap: a_start <= b_end && a_end >= b_start,
    }
}

/// Shifts `target` to account for `by` having been applied first: right by the
/// inserted length, or left by the deleted length.
pub fn lift(target: &Diff, by: &Diff) -> Result<Diff, DiffError> {
    let pos = match by {
        Diff::Insert(i) => target.pos() + i.text_len(),
        Diff::Delete(d) => {
            target
                .pos()
                .checked_sub(d.len)
                .ok_or_else(|| DiffError::NegativeLift {
                    target: target.clone(),
                    by: by.clone(),
                })?
        }
    };
    Ok(target.with_pos(pos))
}

/// The part of `outer` not covered by `inner`, when `inner` overlaps `outer`
/// from one side only.
///
/// If `inner` starts at or before `outer` and ends before it, the remainder is
/// the suffix `inner.end+1 ..= outer.end`. If `inner` starts after `outer` and
/// reaches at least its end, the remainder is the prefix
/// `outer.pos .. inner.pos`. Any other arrangement is an error.
pub fn subtract(outer: &Delete, inner: &Delete) -> Result<Delete, DiffError> {
    let overlap = inner.pos <= outer.end() && inner.end() >= outer.pos;
    if overlap && inner.pos <= outer.pos && inner.end() < outer.end() {
        Ok(Delete::spanning(inner.end() + 1, outer.end()))
    } else if overlap && inner.pos > outer.pos && inner.end() >= outer.end() {
        Ok(Delete::spanning(outer.pos, inner.pos - 1))
    } else {
        Err(DiffError::NotOneSidedOverlap {
            outer: *outer,
            inner: *inner,
        })
    }
}

/// Splits `target` at `at`, giving the pieces before and from `at`, both in
/// the original document's coordinates.
pub fn split_delete(target: &Delete, at: usize) -> Result<(Delete, Delete), DiffError> {
    if at <= target.pos || at >= target.pos + target.len {
        return Err(DiffError::SplitOutside {
            target: *target,
            at,
        });
    }
    let left = target.pos..at;
    Ok((
        Delete::new(target.pos, left.len()),
        Delete::new(at, target.len - left.len()),
    ))
}
