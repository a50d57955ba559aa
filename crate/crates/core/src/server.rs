//! The untrusted server: subdomain search with a trace, query answering on
//! the subdomain's list, and verification object construction.

use thiserror::Error;

use crate::authenticator::{SignMode, SignedTree};
use crate::codec::{
    Decode, DecodeError, Encode, Reader, Sentinel, Writer, TAG_RECORD, TAG_RESPONSE, TAG_SENTINEL,
    TAG_VO,
};
use crate::fmh::{CoPathEntry, CoSide};
use crate::hash::Digest;
use crate::itree::{Node, NodeId, SubdomainNode};
use crate::query::{LazyScores, Query, Window};
use crate::ranking::{FunctionInput, Intersection, RankingError, Record, Side, SubdomainRegion};
use crate::sign::Signature;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ServerError {
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error("subdomain node {0} has no signature")]
    MissingSignature(NodeId),
}

/// A payload just outside the result window.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    Sentinel(Sentinel),
    Record(Record),
}

impl Boundary {
    pub fn record(&self) -> Option<&Record> {
        match self {
            Boundary::Record(r) => Some(r),
            Boundary::Sentinel(_) => None,
        }
    }
}

impl Encode for Boundary {
    fn encode(&self, w: &mut Writer) {
        match self {
            Boundary::Sentinel(s) => s.encode(w),
            Boundary::Record(r) => r.encode(w),
        }
    }
}

impl Decode for Boundary {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.peek()? {
            TAG_RECORD => Ok(Boundary::Record(r.get()?)),
            TAG_SENTINEL => Ok(Boundary::Sentinel(r.get()?)),
            _ => Err(r.invalid("boundary tag")),
        }
    }
}

/// One internal node on the search path.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TraceEntry {
    pub intersection: Intersection,
    pub side: Side,
    /// Digest of the child not taken.
    pub sibling: Digest,
}

impl Encode for TraceEntry {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.intersection)
            .put(&self.side)
            .digest(&self.sibling);
    }
}

impl Decode for TraceEntry {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let intersection = r.get()?;
        let side = r.get()?;
        Ok(TraceEntry {
            intersection,
            side,
            sibling: r.digest()?,
        })
    }
}

/// Root-to-leaf search evidence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct SubdomainTrace {
    pub entries: Vec<TraceEntry>,
}

/// Evidence that the answering subdomain is the one containing the input.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SubdomainProof {
    Trace(SubdomainTrace),
    Region(SubdomainRegion),
}

/// Leaf position and co-path of the run `[lower, R..., upper]` in the FMH tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FmhProof {
    pub leaf_count: u64,
    /// FMH leaf index of the lower boundary.
    pub first: u64,
    pub co_path: Vec<CoPathEntry>,
}

impl Encode for CoPathEntry {
    fn encode(&self, w: &mut Writer) {
        w.u8(match self.side {
            CoSide::Left => 0,
            CoSide::Right => 1,
        })
        .digest(&self.digest);
    }
}

impl Decode for CoPathEntry {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let side = match r.u8()? {
            0 => CoSide::Left,
            1 => CoSide::Right,
            _ => return Err(r.invalid("co-path side")),
        };
        Ok(CoPathEntry {
            side,
            digest: r.digest()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VerificationObject {
    pub query: Query,
    pub subdomain: SubdomainProof,
    pub lower: Boundary,
    pub upper: Boundary,
    pub fmh: FmhProof,
    pub signature: Signature,
}

impl VerificationObject {
    pub fn mode(&self) -> SignMode {
        match self.subdomain {
            SubdomainProof::Trace(_) => SignMode::OneSignature,
            SubdomainProof::Region(_) => SignMode::MultiSignature,
        }
    }
}

impl Encode for VerificationObject {
    fn encode(&self, w: &mut Writer) {
        w.u8(TAG_VO);
        match &self.subdomain {
            SubdomainProof::Trace(t) => {
                w.u8(1).put(&self.query).seq(&t.entries);
            }
            SubdomainProof::Region(region) => {
                w.u8(2).put(&self.query).put(region);
            }
        }
        w.put(&self.lower).put(&self.upper);
        w.u64(self.fmh.leaf_count)
            .u64(self.fmh.first)
            .seq(&self.fmh.co_path);
        w.put(&self.signature);
    }
}

impl Decode for VerificationObject {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.tag(TAG_VO)?;
        let mode = r.u8()?;
        let query = r.get()?;
        let subdomain = match mode {
            1 => SubdomainProof::Trace(SubdomainTrace { entries: r.seq()? }),
            2 => SubdomainProof::Region(r.get()?),
            _ => return Err(r.invalid("vo mode")),
        };
        let lower = r.get()?;
        let upper = r.get()?;
        let leaf_count = r.u64()?;
        let first = r.u64()?;
        let fmh = FmhProof {
            leaf_count,
            first,
            co_path: r.seq()?,
        };
        Ok(VerificationObject {
            query,
            subdomain,
            lower,
            upper,
            fmh,
            signature: r.get()?,
        })
    }
}

/// Result records in ascending score order plus the proof.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Response {
    pub result: Vec<Record>,
    pub vo: VerificationObject,
}

impl Encode for Response {
    fn encode(&self, w: &mut Writer) {
        w.u8(TAG_RESPONSE).seq(&self.result).put(&self.vo);
    }
}

impl Decode for Response {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.tag(TAG_RESPONSE)?;
        let result = r.seq()?;
        Ok(Response {
            result,
            vo: r.get()?,
        })
    }
}

/// Per-request server costs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CostCounters {
    /// Search nodes, sibling reads, score evaluations and FMH nodes touched.
    pub nodes_visited: u64,
    /// Internal nodes evaluated on the way to the subdomain.
    pub search_nodes: u64,
    pub hashes_computed: u64,
    pub signatures_included: u64,
    pub vo_bytes: u64,
}

/// Walks from the root to the subdomain containing `x`.
pub fn find_subdomain_with_trace(
    signed: &SignedTree,
    x: &FunctionInput,
    cost: &mut CostCounters,
) -> Result<(NodeId, SubdomainTrace), ServerError> {
    let tree = &signed.tree;
    let (path, leaf) = tree.walk(x)?;
    let mut entries = Vec::with_capacity(path.len());
    for (id, side) in path {
        let Node::Intersection(n) = tree.node(id) else {
            unreachable!()
        };
        let sibling = tree.node(n.child(side.flipped())).digest();
        entries.push(TraceEntry {
            intersection: n.intersection.clone(),
            side,
            sibling,
        });
    }
    cost.search_nodes += entries.len() as u64;
    cost.nodes_visited += entries.len() as u64;
    if signed.mode == SignMode::OneSignature {
        cost.nodes_visited += entries.len() as u64;
    }
    Ok((leaf, SubdomainTrace { entries }))
}

/// Record at ascending position `pos` of a subdomain list.
pub fn record_at<'t>(signed: &'t SignedTree, leaf: &SubdomainNode, pos: usize) -> &'t Record {
    signed
        .tree
        .record(leaf.ascending_at(pos))
        .expect("leaf ids are database ids")
}

/// Selects the window for `query` in `leaf`, counting score evaluations.
pub fn answer_in_leaf(
    signed: &SignedTree,
    leaf: &SubdomainNode,
    query: &Query,
    cost: &mut CostCounters,
) -> Window {
    let tpl = signed.tree.template();
    let x = query.input().values();
    let scores = LazyScores::new(leaf.order.len(), |p| record_at(signed, leaf, p), tpl, x);
    let w = query.select(&scores);
    cost.nodes_visited += scores.evaluations();
    w
}

pub fn boundaries_of(
    records: impl Fn(usize) -> Record,
    n: usize,
    w: Window,
) -> (Boundary, Boundary) {
    let lower = if w.start == 0 {
        Boundary::Sentinel(Sentinel::Min)
    } else {
        Boundary::Record(records(w.start - 1))
    };
    let upper = if w.end() == n {
        Boundary::Sentinel(Sentinel::Max)
    } else {
        Boundary::Record(records(w.end()))
    };
    (lower, upper)
}

pub fn build_vo(
    signed: &SignedTree,
    leaf_id: NodeId,
    query: &Query,
    window: Window,
    trace: SubdomainTrace,
    cost: &mut CostCounters,
) -> Result<Response, ServerError> {
    let leaf = signed.tree.leaf(leaf_id);
    let n = leaf.order.len();
    let result: Vec<Record> = (window.start..window.end())
        .map(|p| record_at(signed, leaf, p).clone())
        .collect();
    let (lower, upper) = boundaries_of(|p| record_at(signed, leaf, p).clone(), n, window);
    let fmh = leaf.fmh.as_ref().expect("signed trees carry FMH trees");
    // FMH leaf i + 1 holds ascending position i.
    let (first, last) = (window.start, window.end() + 1);
    let co_path = fmh.range_proof(first, last);
    cost.nodes_visited += (last - first + 1) as u64 + fmh.path_nodes(first, last) as u64;
    let subdomain = match signed.mode {
        SignMode::OneSignature => SubdomainProof::Trace(trace),
        SignMode::MultiSignature => SubdomainProof::Region(leaf.region.clone()),
    };
    let signature = signed
        .signature_for(leaf_id)
        .ok_or(ServerError::MissingSignature(leaf_id))?
        .clone();
    let vo = VerificationObject {
        query: query.clone(),
        subdomain,
        lower,
        upper,
        fmh: FmhProof {
            leaf_count: fmh.leaf_count() as u64,
            first: first as u64,
            co_path,
        },
        signature,
    };
    cost.signatures_included += 1;
    cost.vo_bytes += vo.to_bytes().len() as u64;
    Ok(Response { result, vo })
}

/// Full server path for one query.
pub fn answer(signed: &SignedTree, query: &Query) -> Result<(Response, CostCounters), ServerError> {
    let mut cost = CostCounters::default();
    let (leaf_id, trace) = find_subdomain_with_trace(signed, query.input(), &mut cost)?;
    let window = answer_in_leaf(signed, signed.tree.leaf(leaf_id), query, &mut cost);
    let response = build_vo(signed, leaf_id, query, window, trace, &mut cost)?;
    Ok((response, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::authenticator::{authenticate, AuthOptions};
    use crate::ranking::fixture::*;
    use crate::sign::{SignatureScheme, SigningKey};

    fn signed(mode: SignMode, n: usize) -> SignedTree {
        let key = SigningKey::generate(SignatureScheme::Ed25519, 5).unwrap();
        authenticate(
            f1_records()[..n].to_vec(),
            f1_template(),
            f1_domain(),
            AuthOptions::new(mode),
            &key,
        )
        .unwrap()
    }

    fn ids(rs: &[Record]) -> Vec<u64> {
        rs.iter().map(|r| r.id).collect()
    }

    fn s(v: &str) -> crate::scalar::Scalar {
        v.parse().unwrap()
    }

    #[test]
    fn trace_matches_path() {
        let t = signed(SignMode::OneSignature, 4);
        let mut cost = CostCounters::default();
        let (leaf, trace) = find_subdomain_with_trace(&t, &x("0"), &mut cost).unwrap();
        let (path, walked) = t.tree.walk(&x("0")).unwrap();
        assert_eq!(leaf, walked);
        assert_eq!(trace.entries.len(), path.len());
        assert!(cost.search_nodes as usize <= t.tree.depth());
        for e in &trace.entries {
            assert_eq!(e.intersection.side_at(&[s("0")]), e.side);
        }
        let single = signed(SignMode::OneSignature, 1);
        let (_, trace) = find_subdomain_with_trace(&single, &x("3"), &mut cost).unwrap();
        assert!(trace.entries.is_empty());
    }

    #[test]
    fn fixture_answers_at_zero() {
        for mode in [SignMode::OneSignature, SignMode::MultiSignature] {
            let t = signed(mode, 4);
            let (r, cost) = answer(&t, &Query::top_k(x("0"), 2).unwrap()).unwrap();
            assert_eq!(ids(&r.result), vec![2, 3]);
            assert_eq!(r.vo.lower, Boundary::Record(f1_records()[0].clone()));
            assert_eq!(r.vo.upper, Boundary::Sentinel(Sentinel::Max));
            assert_eq!(cost.signatures_included, 1);
            assert_eq!(cost.vo_bytes as usize, r.vo.to_bytes().len());
            assert_eq!(r.vo.mode(), mode);

            let (r, _) = answer(&t, &Query::range(x("0"), s("0.5"), s("5")).unwrap()).unwrap();
            assert_eq!(ids(&r.result), vec![2, 3]);
            assert_eq!(r.vo.lower, Boundary::Record(f1_records()[0].clone()));

            let (r, _) = answer(&t, &Query::knn(x("0"), 2, s("0.5")).unwrap()).unwrap();
            assert_eq!(ids(&r.result), vec![1, 2]);

            let (r, _) = answer(&t, &Query::range(x("0"), s("-9"), s("-5")).unwrap()).unwrap();
            assert!(r.result.is_empty());
            assert_eq!(r.vo.lower, Boundary::Sentinel(Sentinel::Min));
            assert_eq!(r.vo.upper, Boundary::Record(f1_records()[3].clone()));

            let (r, _) = answer(&t, &Query::top_k(x("0"), 4).unwrap()).unwrap();
            assert_eq!(r.vo.lower, Boundary::Sentinel(Sentinel::Min));
            assert_eq!(r.vo.upper, Boundary::Sentinel(Sentinel::Max));
        }
    }

    #[test]
    fn outside_domain_is_an_error() {
        let t = signed(SignMode::MultiSignature, 4);
        assert!(matches!(
            answer(&t, &Query::top_k(x("10.5"), 1).unwrap()),
            Err(ServerError::Ranking(RankingError::OutsideDomain))
        ));
    }

    #[test]
    fn response_round_trip() {
        let t = signed(SignMode::OneSignature, 4);
        let (r, _) = answer(&t, &Query::knn(x("1.2"), 3, s("2")).unwrap()).unwrap();
        let bytes = r.to_bytes();
        assert_eq!(Response::from_bytes(&bytes).unwrap(), r);
        assert!(Response::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
