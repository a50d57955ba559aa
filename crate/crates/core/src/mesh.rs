//! Signature-mesh baseline: every subdomain keeps its own sorted chain, each
//! adjacent pair is signed together with the region it is adjacent in, and
//! pairs that stay adjacent across consecutive cells share one signature.
//!
//! Cells are the I-tree leaves. For d = 1 they are ordered left to right and
//! pair spans merge across neighbours; for d >= 2 every cell signs its own
//! pairs, which gives an upper bound on the merged count.

use std::collections::HashMap;

use thiserror::Error;

use crate::authenticator::LeafDigests;
use crate::codec::{Decode, DecodeError, Encode, Reader, Sentinel, Writer, TAG_MESH, TAG_MESH_VO};
use crate::hash::{CountingHasher, Digest, Sha256Provider};
use crate::itree::{build_itree, ITree};
use crate::query::{LazyScores, Query, Window};
use crate::ranking::{
    region_contains, Constraint, DomainBox, FunctionInput, RankingError, RankingTemplate, Record,
    RecordId, Side, SubdomainRegion,
};
use crate::scalar::Scalar;
use crate::server::{boundaries_of, Boundary, CostCounters};
use crate::sign::{Signature, SigningKey, VerifyingKey};
use crate::verifier::{re_execute, RejectReason, Verdict, VerifyCost};

pub const TAG_MESH_RESPONSE: u8 = 0x17;
pub const TAG_MESH_PARAMS: u8 = 0x18;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeshError {
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// A chain element: a record or one of the two sentinels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    Min,
    Max,
    Rec(RecordId),
}

impl Encode for Token {
    fn encode(&self, w: &mut Writer) {
        match self {
            Token::Min => w.u8(0),
            Token::Max => w.u8(1),
            Token::Rec(id) => w.u8(2).u64(*id),
        };
    }
}

impl Decode for Token {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(Token::Min),
            1 => Ok(Token::Max),
            2 => Ok(Token::Rec(r.u64()?)),
            _ => Err(r.invalid("token")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeshCell {
    pub region: SubdomainRegion,
    /// Ids by ascending score.
    pub order: Vec<RecordId>,
    /// `links[p]` signs chain positions `p` and `p + 1`, with MIN at 0.
    pub links: Vec<usize>,
}

impl MeshCell {
    fn chain(&self) -> Vec<Token> {
        let mut c = Vec::with_capacity(self.order.len() + 2);
        c.push(Token::Min);
        c.extend(self.order.iter().map(|&id| Token::Rec(id)));
        c.push(Token::Max);
        c
    }
}

/// One signature shared by a pair over the contiguous cells `first..=last`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairSignature {
    pub lo: Token,
    pub hi: Token,
    pub first: usize,
    pub last: usize,
    pub region: usize,
    pub sig: Signature,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mesh {
    pub template: RankingTemplate,
    pub domain: DomainBox,
    /// Sorted by id.
    pub records: Vec<Record>,
    pub cells: Vec<MeshCell>,
    /// Span regions referenced by `pairs`.
    pub regions: Vec<SubdomainRegion>,
    pub pairs: Vec<PairSignature>,
    pub build_hashes: u64,
}

impl Mesh {
    pub fn signature_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn record(&self, id: RecordId) -> Option<&Record> {
        self.records
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|i| &self.records[i])
    }
}

/// Lower and upper root of a one-variable constraint, if it bounds `x`.
fn bound_of(c: &Constraint) -> Option<(Scalar, bool)> {
    let plane = &c.intersection.plane;
    let w = &plane.weights[0];
    if w.is_zero() {
        return None;
    }
    let root = -plane.offset.clone() / w.clone();
    // plane >= 0 is x >= root when w > 0.
    let is_lower = (w.signum() > 0) == (c.side == Side::Above);
    Some((root, is_lower))
}

/// Interval of a one-variable region with the constraints attaining its ends.
fn interval_of(
    region: &SubdomainRegion,
) -> (Scalar, Option<Constraint>, Scalar, Option<Constraint>) {
    let (mut lo, mut hi) = region.domain.bounds()[0].clone();
    let (mut left, mut right) = (None, None);
    for c in region.sorted_constraints() {
        match bound_of(c) {
            Some((root, true)) if root > lo => {
                lo = root;
                left = Some(c.clone());
            }
            Some((root, false)) if root < hi => {
                hi = root;
                right = Some(c.clone());
            }
            _ => {}
        }
    }
    (lo, left, hi, right)
}

fn span_region(
    domain: &DomainBox,
    left: Option<&Constraint>,
    right: Option<&Constraint>,
) -> SubdomainRegion {
    let mut r = SubdomainRegion::whole(domain.clone());
    for c in left.into_iter().chain(right) {
        r = r.with_constraint(c.clone());
    }
    r
}

/// `H(H(enc lo) | H(enc hi) | enc(B))`.
fn pair_message(
    hasher: &CountingHasher<'_>,
    lo: &Digest,
    hi: &Digest,
    region_bytes: &[u8],
) -> Digest {
    hasher.hash_parts(&[&lo.0, &hi.0, region_bytes])
}

pub fn build_mesh(
    records: Vec<Record>,
    template: RankingTemplate,
    domain: DomainBox,
    key: &SigningKey,
) -> Result<Mesh, MeshError> {
    let tree = build_itree(records, template, domain)?;
    Ok(build_mesh_from_tree(&tree, key))
}

/// Builds the mesh over the cells of an existing I-tree.
pub fn build_mesh_from_tree(tree: &ITree, key: &SigningKey) -> Mesh {
    let domain = tree.domain().clone();
    let merge = domain.dim() == 1;
    let mut cells: Vec<MeshCell> = tree
        .leaves()
        .into_iter()
        .map(|id| {
            let leaf = tree.leaf(id);
            MeshCell {
                region: leaf.region.clone(),
                order: leaf.ascending().collect(),
                links: Vec::new(),
            }
        })
        .collect();
    // Tight end constraints per cell, in the final cell order.
    let mut ends: Vec<(Option<Constraint>, Option<Constraint>)> = Vec::new();
    if merge {
        let mut keyed: Vec<_> = cells
            .into_iter()
            .map(|c| {
                let (lo, left, _, right) = interval_of(&c.region);
                (lo, c, left, right)
            })
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        cells = Vec::with_capacity(keyed.len());
        for (_, c, left, right) in keyed {
            cells.push(c);
            ends.push((left, right));
        }
    }

    // Open spans of the previous cell, keyed by pair.
    let mut spans: Vec<(Token, Token, usize, usize)> = Vec::new();
    let mut open: HashMap<(Token, Token), usize> = HashMap::new();
    for (ci, cell) in cells.iter_mut().enumerate() {
        let chain = cell.chain();
        let mut next = HashMap::with_capacity(chain.len());
        for w in chain.windows(2) {
            let pair = (w[0], w[1]);
            let idx = match open.get(&pair) {
                Some(&s) if merge => {
                    spans[s].3 = ci;
                    s
                }
                _ => {
                    spans.push((w[0], w[1], ci, ci));
                    spans.len() - 1
                }
            };
            next.insert(pair, idx);
            cell.links.push(idx);
        }
        open = next;
    }

    let hasher = CountingHasher::new(&Sha256Provider);
    let digests = LeafDigests::new(tree.records(), &hasher);
    let token_digest = |t: Token| match t {
        Token::Min => digests.sentinel(Sentinel::Min),
        Token::Max => digests.sentinel(Sentinel::Max),
        Token::Rec(id) => digests.record(id).expect("mesh ids are database ids"),
    };

    let mut regions = Vec::new();
    let mut region_bytes: Vec<Vec<u8>> = Vec::new();
    let mut region_of: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pairs = Vec::with_capacity(spans.len());
    for (lo, hi, first, last) in spans {
        let ri = *region_of.entry((first, last)).or_insert_with(|| {
            let r = if merge {
                span_region(&domain, ends[first].0.as_ref(), ends[last].1.as_ref())
            } else {
                cells[first].region.clone()
            };
            region_bytes.push(r.to_bytes());
            regions.push(r);
            regions.len() - 1
        });
        let msg = pair_message(
            &hasher,
            &token_digest(lo),
            &token_digest(hi),
            &region_bytes[ri],
        );
        pairs.push(PairSignature {
            lo,
            hi,
            first,
            last,
            region: ri,
            sig: key.sign(&msg),
        });
    }

    Mesh {
        template: *tree.template(),
        domain,
        records: tree.records().to_vec(),
        cells,
        regions,
        pairs,
        build_hashes: hasher.count(),
    }
}

/// Pair signatures for the chain `[lower, R..., upper]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeshVO {
    pub lower: Boundary,
    pub upper: Boundary,
    pub regions: Vec<SubdomainRegion>,
    /// `(index into regions, signature)` per adjacent pair.
    pub links: Vec<(u32, Signature)>,
}

impl Encode for MeshVO {
    fn encode(&self, w: &mut Writer) {
        w.u8(TAG_MESH_VO)
            .put(&self.lower)
            .put(&self.upper)
            .seq(&self.regions);
        w.len_of(self.links.len());
        for (i, s) in &self.links {
            w.u32(*i).put(s);
        }
    }
}

impl Decode for MeshVO {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.tag(TAG_MESH_VO)?;
        let lower = r.get()?;
        let upper = r.get()?;
        let regions = r.seq()?;
        let n = r.length()?;
        let mut links = Vec::with_capacity(n);
        for _ in 0..n {
            links.push((r.u32()?, r.get()?));
        }
        Ok(MeshVO {
            lower,
            upper,
            regions,
            links,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeshResponse {
    pub result: Vec<Record>,
    pub vo: MeshVO,
}

impl Encode for MeshResponse {
    fn encode(&self, w: &mut Writer) {
        w.u8(TAG_MESH_RESPONSE).seq(&self.result).put(&self.vo);
    }
}

impl Decode for MeshResponse {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.tag(TAG_MESH_RESPONSE)?;
        Ok(MeshResponse {
            result: r.seq()?,
            vo: r.get()?,
        })
    }
}

/// Linear scan for the first cell containing `x`, returning it and the number of cells scanned.
pub fn find_cell(mesh: &Mesh, x: &FunctionInput) -> Result<(usize, u64), RankingError> {
    mesh.template.check_input(x)?;
    if !mesh.domain.contains(x.values()) {
        return Err(RankingError::OutsideDomain);
    }
    for (i, c) in mesh.cells.iter().enumerate() {
        if region_contains(&c.region, x) {
            return Ok((i, i as u64 + 1));
        }
    }
    Err(RankingError::OutsideDomain)
}

/// VO for ascending window `w` of cell `cell`.
pub fn mesh_build_vo(mesh: &Mesh, cell: usize, w: Window) -> MeshResponse {
    let c = &mesh.cells[cell];
    let rec = |p: usize| {
        mesh.record(c.order[p])
            .expect("mesh ids are database ids")
            .clone()
    };
    let result = (w.start..w.end()).map(rec).collect();
    let (lower, upper) = boundaries_of(rec, c.order.len(), w);
    let mut local: HashMap<usize, u32> = HashMap::new();
    let mut regions = Vec::new();
    let mut links = Vec::with_capacity(w.len + 1);
    // Chain position p + 1 is ascending position p.
    for &pi in &c.links[w.start..=w.end()] {
        let pair = &mesh.pairs[pi];
        let ri = *local.entry(pair.region).or_insert_with(|| {
            regions.push(mesh.regions[pair.region].clone());
            regions.len() as u32 - 1
        });
        links.push((ri, pair.sig.clone()));
    }
    MeshResponse {
        result,
        vo: MeshVO {
            lower,
            upper,
            regions,
            links,
        },
    }
}

pub fn mesh_answer(mesh: &Mesh, query: &Query) -> Result<(MeshResponse, CostCounters), MeshError> {
    let (cell, scanned) = find_cell(mesh, query.input())?;
    let c = &mesh.cells[cell];
    let scores = LazyScores::new(
        c.order.len(),
        |p| mesh.record(c.order[p]).expect("mesh ids are database ids"),
        &mesh.template,
        query.input().values(),
    );
    let w = query.select(&scores);
    let response = mesh_build_vo(mesh, cell, w);
    let cost = CostCounters {
        nodes_visited: scanned,
        search_nodes: scanned,
        hashes_computed: 0,
        signatures_included: response.vo.links.len() as u64,
        vo_bytes: response.vo.to_bytes().len() as u64,
    };
    Ok((response, cost))
}

/// What a mesh client knows ahead of any query.
#[derive(Clone, Debug)]
pub struct MeshParams {
    pub template: RankingTemplate,
    pub domain: DomainBox,
    pub key: VerifyingKey,
}

impl Encode for MeshParams {
    fn encode(&self, w: &mut Writer) {
        w.u8(TAG_MESH_PARAMS)
            .put(&self.template)
            .put(&self.domain)
            .bytes(self.key.to_pem().as_bytes());
    }
}

impl Decode for MeshParams {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.tag(TAG_MESH_PARAMS)?;
        let template = r.get()?;
        let domain = r.get()?;
        let pem = std::str::from_utf8(r.bytes()?).map_err(|_| r.invalid("key text"))?;
        let key = VerifyingKey::from_pem(pem).map_err(|_| r.invalid("public key"))?;
        Ok(MeshParams {
            template,
            domain,
            key,
        })
    }
}

pub fn mesh_verify(
    query: &Query,
    response: &MeshResponse,
    params: &MeshParams,
) -> (Verdict, VerifyCost) {
    let hasher = CountingHasher::new(&Sha256Provider);
    let mut cost = VerifyCost::default();
    let verdict = mesh_checks(&hasher, &mut cost, query, response, params);
    cost.hashes = hasher.count();
    (verdict, cost)
}

fn mesh_checks(
    hasher: &CountingHasher<'_>,
    cost: &mut VerifyCost,
    query: &Query,
    response: &MeshResponse,
    params: &MeshParams,
) -> Verdict {
    let vo = &response.vo;
    if params.template.check_input(query.input()).is_err() {
        return Verdict::reject(RejectReason::MalformedVO);
    }
    if vo
        .links
        .iter()
        .any(|(i, _)| *i as usize >= vo.regions.len())
    {
        return Verdict::reject(RejectReason::MalformedVO);
    }
    // Each adjacent pair of the chain needs its own link.
    if vo.links.len() != response.result.len() + 1 {
        return Verdict::reject(RejectReason::SignatureMismatch);
    }
    let mut chain = Vec::with_capacity(response.result.len() + 2);
    chain.push(hasher.hash(&vo.lower.to_bytes()));
    chain.extend(response.result.iter().map(|r| hasher.hash(&r.to_bytes())));
    chain.push(hasher.hash(&vo.upper.to_bytes()));
    let region_bytes: Vec<Vec<u8>> = vo.regions.iter().map(|r| r.to_bytes()).collect();
    for (k, (ri, sig)) in vo.links.iter().enumerate() {
        let msg = pair_message(
            hasher,
            &chain[k],
            &chain[k + 1],
            &region_bytes[*ri as usize],
        );
        cost.sig_ops += 1;
        if !params.key.verify(&msg, sig) {
            return Verdict::reject(RejectReason::SignatureMismatch);
        }
    }
    if !vo
        .links
        .iter()
        .all(|(ri, _)| region_contains(&vo.regions[*ri as usize], query.input()))
    {
        return Verdict::reject(RejectReason::ContainmentFail);
    }
    match re_execute(
        query,
        &response.result,
        &vo.lower,
        &vo.upper,
        &params.template,
    ) {
        Ok(true) => Verdict::ACCEPT,
        Ok(false) => Verdict::reject(RejectReason::ReExecutionMismatch),
        Err(r) => Verdict::reject(r),
    }
}

impl Encode for Mesh {
    fn encode(&self, w: &mut Writer) {
        w.u8(TAG_MESH)
            .put(&self.template)
            .put(&self.domain)
            .seq(&self.records)
            .u64(self.build_hashes);
        w.len_of(self.cells.len());
        for c in &self.cells {
            w.put(&c.region).seq(&c.order);
            w.len_of(c.links.len());
            for &l in &c.links {
                w.u64(l as u64);
            }
        }
        w.seq(&self.regions);
        w.len_of(self.pairs.len());
        for p in &self.pairs {
            w.put(&p.lo)
                .put(&p.hi)
                .u64(p.first as u64)
                .u64(p.last as u64)
                .u64(p.region as u64)
                .put(&p.sig);
        }
    }
}

impl Decode for Mesh {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.tag(TAG_MESH)?;
        let template: RankingTemplate = r.get()?;
        let domain = r.get()?;
        let records: Vec<Record> = r.seq()?;
        if records.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(r.invalid("record order"));
        }
        let build_hashes = r.u64()?;
        let mut cells = Vec::with_capacity(r.length()?.min(1 << 16));
        let n_cells = cells.capacity();
        for _ in 0..n_cells {
            let region = r.get()?;
            let order: Vec<u64> = r.seq()?;
            let n = r.length()?;
            let mut links = Vec::with_capacity(n);
            for _ in 0..n {
                links.push(r.u64()? as usize);
            }
            cells.push(MeshCell {
                region,
                order,
                links,
            });
        }
        let regions: Vec<SubdomainRegion> = r.seq()?;
        let n = r.length()?;
        let mut pairs = Vec::with_capacity(n);
        for _ in 0..n {
            let lo = r.get()?;
            let hi = r.get()?;
            let first = r.u64()? as usize;
            let last = r.u64()? as usize;
            let region = r.u64()? as usize;
            let sig = r.get()?;
            pairs.push(PairSignature {
                lo,
                hi,
                first,
                last,
                region,
                sig,
            });
        }
        let mesh = Mesh {
            template,
            domain,
            records,
            cells,
            regions,
            pairs,
            build_hashes,
        };
        let consistent = mesh.pairs.iter().all(|p| p.region < mesh.regions.len())
            && mesh.cells.iter().all(|c| {
                c.links.len() == c.order.len() + 1
                    && c.links.iter().all(|&l| l < mesh.pairs.len())
                    && c.order.iter().all(|&id| mesh.record(id).is_some())
            });
        if !consistent {
            return Err(r.invalid("mesh links"));
        }
        Ok(mesh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::fixture::*;
    use crate::sign::SignatureScheme;

    fn key() -> SigningKey {
        SigningKey::generate(SignatureScheme::Ed25519, 8).unwrap()
    }

    fn params() -> MeshParams {
        MeshParams {
            template: f1_template(),
            domain: f1_domain(),
            key: key().verifying_key(),
        }
    }

    fn mesh(n: usize) -> Mesh {
        build_mesh(
            f1_records()[..n].to_vec(),
            f1_template(),
            f1_domain(),
            &key(),
        )
        .unwrap()
    }

    fn s(v: &str) -> Scalar {
        v.parse().unwrap()
    }

    fn ids(rs: &[Record]) -> Vec<u64> {
        rs.iter().map(|r| r.id).collect()
    }

    #[test]
    fn fixture_has_seven_cells_of_five_links() {
        let m = mesh(4);
        assert_eq!(m.cell_count(), 7);
        assert!(m.cells.iter().all(|c| c.links.len() == 5));
        // Left to right.
        let lows: Vec<Scalar> = m.cells.iter().map(|c| interval_of(&c.region).0).collect();
        assert!(lows.windows(2).all(|w| w[0] < w[1]));
        assert!(m.signature_count() >= 7);
    }

    #[test]
    fn single_record_has_two_signatures() {
        let m = mesh(1);
        assert_eq!(m.cell_count(), 1);
        assert_eq!(m.signature_count(), 2);
    }

    #[test]
    fn pair_never_reordered_is_signed_once() {
        let r = |id, a: &str, b: &str| Record::new(id, vec![s(a), s(b)]);
        // 1 and 2 never cross on [-10, 10]; 3 and 4 cross at 0 far above them.
        let recs = vec![
            r(1, "1", "0"),
            r(2, "101/100", "100"),
            r(3, "5", "200"),
            r(4, "-5", "200"),
        ];
        let m = build_mesh(recs, f1_template(), f1_domain(), &key()).unwrap();
        assert_eq!(m.cell_count(), 2);
        let count = |lo, hi| m.pairs.iter().filter(|p| p.lo == lo && p.hi == hi).count();
        assert_eq!(count(Token::Rec(1), Token::Rec(2)), 1);
        assert_eq!(count(Token::Min, Token::Rec(1)), 1);
        assert_eq!(m.signature_count(), 5 + 3);
    }

    #[test]
    fn top_two_at_zero() {
        let m = mesh(4);
        let q = Query::top_k(x("0"), 2).unwrap();
        let (resp, cost) = mesh_answer(&m, &q).unwrap();
        assert_eq!(ids(&resp.result), vec![2, 3]);
        assert_eq!(resp.vo.links.len(), 3);
        assert_eq!(cost.signatures_included, 3);
        assert!(cost.nodes_visited >= 1 && cost.nodes_visited <= 7);
        assert_eq!(mesh_verify(&q, &resp, &params()).0, Verdict::ACCEPT);
    }

    #[test]
    fn full_window_carries_whole_chain() {
        let m = mesh(4);
        let q = Query::top_k(x("3"), 10).unwrap();
        let (resp, _) = mesh_answer(&m, &q).unwrap();
        assert_eq!(resp.vo.links.len(), 5);
        let (v, cost) = mesh_verify(&q, &resp, &params());
        assert_eq!(v, Verdict::ACCEPT);
        assert_eq!(cost.sig_ops, 5);
    }

    #[test]
    fn honest_queries_verify_everywhere() {
        let m = mesh(4);
        for at in ["-10", "-3", "0", "1", "1.2", "7/4", "2.5", "10"] {
            for q in [
                Query::top_k(x(at), 2).unwrap(),
                Query::range(x(at), s("0.5"), s("5")).unwrap(),
                Query::range(x(at), s("100"), s("200")).unwrap(),
                Query::knn(x(at), 2, s("0.5")).unwrap(),
            ] {
                let (resp, _) = mesh_answer(&m, &q).unwrap();
                assert_eq!(
                    mesh_verify(&q, &resp, &params()).0,
                    Verdict::ACCEPT,
                    "{q:?}"
                );
            }
        }
    }

    #[test]
    fn dropped_record_and_forged_boundary_are_rejected() {
        let m = mesh(4);
        let q = Query::top_k(x("0"), 3).unwrap();
        let (resp, _) = mesh_answer(&m, &q).unwrap();
        let mut dropped = resp.clone();
        dropped.result.remove(1);
        assert_eq!(
            mesh_verify(&q, &dropped, &params()).0,
            Verdict::reject(RejectReason::SignatureMismatch)
        );
        let mut forged = resp.clone();
        forged.vo.lower = Boundary::Record(Record::new(99, vec![s("0"), s("-500")]));
        assert_eq!(
            mesh_verify(&q, &forged, &params()).0,
            Verdict::reject(RejectReason::SignatureMismatch)
        );
    }

    #[test]
    fn response_from_another_cell_fails_containment() {
        let m = mesh(4);
        let q = Query::top_k(x("0"), 2).unwrap();
        let (resp, _) = mesh_answer(&m, &Query::top_k(x("5"), 2).unwrap()).unwrap();
        assert_eq!(
            mesh_verify(&q, &resp, &params()).0,
            Verdict::reject(RejectReason::ContainmentFail)
        );
    }

    #[test]
    fn outside_domain_is_an_error() {
        let m = mesh(4);
        let q = Query::top_k(x("11"), 2).unwrap();
        assert_eq!(
            mesh_answer(&m, &q).unwrap_err(),
            MeshError::Ranking(RankingError::OutsideDomain)
        );
    }

    #[test]
    fn encodings_round_trip() {
        let m = mesh(4);
        let back = Mesh::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back.to_bytes(), m.to_bytes());
        assert_eq!(back.signature_count(), m.signature_count());
        let (resp, _) = mesh_answer(&m, &Query::knn(x("1"), 2, s("1")).unwrap()).unwrap();
        assert_eq!(MeshResponse::from_bytes(&resp.to_bytes()).unwrap(), resp);
        let p = params();
        assert_eq!(
            MeshParams::from_bytes(&p.to_bytes()).unwrap().to_bytes(),
            p.to_bytes()
        );
    }
}
