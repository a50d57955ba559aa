//! Query definitions and window selection over an ascending score list.
//!
//! Every answer is a contiguous window of the subdomain's list, which is
//! ordered by ascending score with ties by descending id.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::codec::{Decode, DecodeError, Encode, Reader, Writer, TAG_QUERY};
use crate::ranking::{FunctionInput, RankingTemplate, Record};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("range lower bound exceeds upper bound")]
    EmptyRange,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryKind {
    TopK,
    Range,
    Knn,
}

impl QueryKind {
    pub const ALL: [QueryKind; 3] = [QueryKind::TopK, QueryKind::Range, QueryKind::Knn];

    pub fn name(self) -> &'static str {
        match self {
            QueryKind::TopK => "topk",
            QueryKind::Range => "range",
            QueryKind::Knn => "knn",
        }
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QueryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "topk" => Ok(QueryKind::TopK),
            "range" => Ok(QueryKind::Range),
            "knn" => Ok(QueryKind::Knn),
            other => Err(format!("unknown query type {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Query {
    TopK {
        x: FunctionInput,
        k: usize,
    },
    /// Closed score interval `[lo, hi]`.
    Range {
        x: FunctionInput,
        lo: Scalar,
        hi: Scalar,
    },
    Knn {
        x: FunctionInput,
        k: usize,
        y: Scalar,
    },
}

impl Query {
    pub fn top_k(x: FunctionInput, k: usize) -> Result<Self, QueryError> {
        if k == 0 {
            return Err(QueryError::ZeroK);
        }
        Ok(Query::TopK { x, k })
    }

    pub fn range(x: FunctionInput, lo: Scalar, hi: Scalar) -> Result<Self, QueryError> {
        if lo > hi {
            return Err(QueryError::EmptyRange);
        }
        Ok(Query::Range { x, lo, hi })
    }

    pub fn knn(x: FunctionInput, k: usize, y: Scalar) -> Result<Self, QueryError> {
        if k == 0 {
            return Err(QueryError::ZeroK);
        }
        Ok(Query::Knn { x, k, y })
    }

    pub fn input(&self) -> &FunctionInput {
        match self {
            Query::TopK { x, .. } | Query::Range { x, .. } | Query::Knn { x, .. } => x,
        }
    }

    pub fn kind(&self) -> QueryKind {
        match self {
            Query::TopK { .. } => QueryKind::TopK,
            Query::Range { .. } => QueryKind::Range,
            Query::Knn { .. } => QueryKind::Knn,
        }
    }

    /// Selects the answer window from an ascending list.
    pub fn select<L: ScoreList + ?Sized>(&self, list: &L) -> Window {
        match self {
            Query::TopK { k, .. } => answer_topk(list.len(), *k),
            Query::Range { lo, hi, .. } => answer_range(list, lo, hi),
            Query::Knn { k, y, .. } => answer_knn(list, *k, y),
        }
    }
}

/// Positions `start..start + len` of an ascending list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Random access to scores of an ascending list.
pub trait ScoreList {
    fn len(&self) -> usize;
    fn score(&self, pos: usize) -> Scalar;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ScoreList for [Scalar] {
    fn len(&self) -> usize {
        <[Scalar]>::len(self)
    }

    fn score(&self, pos: usize) -> Scalar {
        self[pos].clone()
    }
}

impl ScoreList for Vec<Scalar> {
    fn len(&self) -> usize {
        Vec::len(self)
    }

    fn score(&self, pos: usize) -> Scalar {
        self[pos].clone()
    }
}

/// Scores evaluated on demand at `x`, counting evaluations.
pub struct LazyScores<'a, F> {
    len: usize,
    record_at: F,
    tpl: &'a RankingTemplate,
    x: &'a [Scalar],
    evaluations: Cell<u64>,
}

impl<'a, F: Fn(usize) -> &'a Record> LazyScores<'a, F> {
    /// `record_at(p)` returns the record at ascending position `p < len`.
    pub fn new(len: usize, record_at: F, tpl: &'a RankingTemplate, x: &'a [Scalar]) -> Self {
        LazyScores {
            len,
            record_at,
            tpl,
            x,
            evaluations: Cell::new(0),
        }
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations.get()
    }
}

impl<'a, F: Fn(usize) -> &'a Record> ScoreList for LazyScores<'a, F> {
    fn len(&self) -> usize {
        self.len
    }

    fn score(&self, pos: usize) -> Scalar {
        self.evaluations.set(self.evaluations.get() + 1);
        let r = (self.record_at)(pos);
        self.tpl
            .form_of(r)
            .expect("records validated at build")
            .eval(self.x)
    }
}

/// First position whose score fails `pred`; `pred` must hold on a prefix.
fn partition<L: ScoreList + ?Sized>(list: &L, pred: impl Fn(&Scalar) -> bool) -> usize {
    let (mut lo, mut hi) = (0, list.len());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(&list.score(mid)) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// The last `min(k, n)` entries.
pub fn answer_topk(n: usize, k: usize) -> Window {
    let len = k.min(n);
    Window {
        start: n - len,
        len,
    }
}

/// Every entry with `lo <= score <= hi`.
pub fn answer_range<L: ScoreList + ?Sized>(list: &L, lo: &Scalar, hi: &Scalar) -> Window {
    let start = partition(list, |s| s < lo);
    let end = partition(list, |s| s <= hi).max(start);
    Window {
        start,
        len: end - start,
    }
}

/// The `min(k, n)` entries nearest to `y`; equal distances go to the lower score.
pub fn answer_knn<L: ScoreList + ?Sized>(list: &L, k: usize, y: &Scalar) -> Window {
    let n = list.len();
    let want = k.min(n);
    let split = partition(list, |s| s <= y);
    let (mut start, mut end) = (split, split);
    let mut left: Option<Scalar> = None;
    let mut right: Option<Scalar> = None;
    while end - start < want {
        if left.is_none() && start > 0 {
            left = Some(y - &list.score(start - 1));
        }
        if right.is_none() && end < n {
            right = Some(&list.score(end) - y);
        }
        let take_left = match (&left, &right) {
            (Some(l), Some(r)) => l <= r,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if take_left {
            start -= 1;
            left = None;
        } else {
            end += 1;
            right = None;
        }
    }
    Window { start, len: want }
}

impl Encode for FunctionInput {
    fn encode(&self, w: &mut Writer) {
        w.seq(&self.0);
    }
}

impl Decode for FunctionInput {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(FunctionInput(r.seq()?))
    }
}

impl Encode for Query {
    fn encode(&self, w: &mut Writer) {
        w.u8(TAG_QUERY);
        match self {
            Query::TopK { x, k } => {
                w.u8(0).put(x).u64(*k as u64);
            }
            Query::Range { x, lo, hi } => {
                w.u8(1).put(x).put(lo).put(hi);
            }
            Query::Knn { x, k, y } => {
                w.u8(2).put(x).u64(*k as u64).put(y);
            }
        }
    }
}

impl Decode for Query {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.tag(TAG_QUERY)?;
        let kind = r.u8()?;
        let x: FunctionInput = r.get()?;
        let q = match kind {
            0 => Query::top_k(x, r.u64()? as usize),
            1 => {
                let lo = r.get()?;
                Query::range(x, lo, r.get()?)
            }
            2 => {
                let k = r.u64()? as usize;
                Query::knn(x, k, r.get()?)
            }
            _ => return Err(r.invalid("query kind")),
        };
        q.map_err(|_| r.invalid("query parameters"))
    }
}
