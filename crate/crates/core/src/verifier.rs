//! Client-side verification of a response against the owner's public key.

use std::fmt;

use crate::authenticator::{internal_digest, subdomain_message, DigestMode, SignMode};
use crate::codec::{Decode, DecodeError, Encode, Reader, Sentinel, Writer};
use crate::fmh::fold_range;
use crate::hash::{CountingHasher, Digest, HashProvider, Sha256Provider};
use crate::query::{answer_knn, Query};
use crate::ranking::{region_contains, DomainBox, FunctionInput, RankingTemplate, Record, Side};
use crate::scalar::Scalar;
use crate::server::{Boundary, Response, SubdomainProof, SubdomainTrace, VerificationObject};
use crate::sign::{Signature, VerifyingKey};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RejectReason {
    SignatureMismatch,
    ContainmentFail,
    ReExecutionMismatch,
    MalformedVO,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::SignatureMismatch => "SignatureMismatch",
            RejectReason::ContainmentFail => "ContainmentFail",
            RejectReason::ReExecutionMismatch => "ReExecutionMismatch",
            RejectReason::MalformedVO => "MalformedVO",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Verdict {
    pub accepted: bool,
    pub reason: Option<RejectReason>,
}

impl Verdict {
    pub const ACCEPT: Verdict = Verdict {
        accepted: true,
        reason: None,
    };

    pub fn reject(reason: RejectReason) -> Self {
        Verdict {
            accepted: false,
            reason: Some(reason),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.reason {
            None => f.write_str("accepted"),
            Some(r) => write!(f, "rejected: {r}"),
        }
    }
}

/// Client-side costs of one verification.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VerifyCost {
    pub hashes: u64,
    pub sig_ops: u64,
}

/// What a client knows ahead of any query.
#[derive(Clone, Debug)]
pub struct ClientParams {
    pub template: RankingTemplate,
    pub domain: DomainBox,
    pub mode: SignMode,
    pub digest_mode: DigestMode,
    pub key: VerifyingKey,
}

/// Folds `[lower, R..., upper]` with the co-path into the FMH root.
pub fn rebuild_fmh_root(
    hasher: &CountingHasher<'_>,
    result: &[Record],
    vo: &VerificationObject,
) -> Result<Digest, RejectReason> {
    let mut leaves = Vec::with_capacity(result.len() + 2);
    leaves.push(hasher.hash(&vo.lower.to_bytes()));
    leaves.extend(result.iter().map(|r| hasher.hash(&r.to_bytes())));
    leaves.push(hasher.hash(&vo.upper.to_bytes()));
    let count = usize::try_from(vo.fmh.leaf_count).map_err(|_| RejectReason::MalformedVO)?;
    let first = usize::try_from(vo.fmh.first).map_err(|_| RejectReason::MalformedVO)?;
    fold_range(hasher, count, first, &leaves, &vo.fmh.co_path)
        .map_err(|_| RejectReason::MalformedVO)
}

/// Folds a leaf digest up a root-first trace.
pub fn rebuild_imh_root(
    hasher: &CountingHasher<'_>,
    leaf_digest: Digest,
    trace: &SubdomainTrace,
    mode: DigestMode,
) -> Digest {
    trace
        .entries
        .iter()
        .rev()
        .fold(leaf_digest, |cur, e| match e.side {
            Side::Above => internal_digest(hasher, mode, &e.intersection, &cur, &e.sibling),
            Side::Below => internal_digest(hasher, mode, &e.intersection, &e.sibling, &cur),
        })
}

/// The message the signature must cover, given the rebuilt FMH root.
pub fn signed_message(
    hasher: &CountingHasher<'_>,
    fmh_root: Digest,
    proof: &SubdomainProof,
    digest_mode: DigestMode,
) -> Digest {
    match proof {
        SubdomainProof::Trace(trace) => rebuild_imh_root(hasher, fmh_root, trace, digest_mode),
        SubdomainProof::Region(region) => subdomain_message(hasher, region, &fmh_root),
    }
}

pub fn check_signature(key: &VerifyingKey, message: &Digest, sig: &Signature) -> bool {
    key.verify(message, sig)
}

pub fn check_containment(x: &FunctionInput, proof: &SubdomainProof) -> bool {
    match proof {
        SubdomainProof::Trace(trace) => trace
            .entries
            .iter()
            .all(|e| e.intersection.side_at(x.values()) == e.side),
        SubdomainProof::Region(region) => region_contains(region, x),
    }
}

/// Score at `x`, or `None` for a sentinel.
fn boundary_score(
    b: &Boundary,
    tpl: &RankingTemplate,
    x: &[Scalar],
) -> Result<Option<Scalar>, RejectReason> {
    match b {
        Boundary::Sentinel(_) => Ok(None),
        Boundary::Record(r) => Ok(Some(
            tpl.form_of(r)
                .map_err(|_| RejectReason::MalformedVO)?
                .eval(x),
        )),
    }
}

/// Re-runs the query over `R` and its boundaries.
pub fn re_execute(
    query: &Query,
    result: &[Record],
    lower: &Boundary,
    upper: &Boundary,
    tpl: &RankingTemplate,
) -> Result<bool, RejectReason> {
    let x = query.input().values();
    let mut scores = Vec::with_capacity(result.len());
    for r in result {
        scores.push(
            tpl.form_of(r)
                .map_err(|_| RejectReason::MalformedVO)?
                .eval(x),
        );
    }
    let lo_score = boundary_score(lower, tpl, x)?;
    let hi_score = boundary_score(upper, tpl, x)?;
    let is_min = matches!(lower, Boundary::Sentinel(Sentinel::Min));
    let is_max = matches!(upper, Boundary::Sentinel(Sentinel::Max));
    if matches!(lower, Boundary::Sentinel(Sentinel::Max))
        || matches!(upper, Boundary::Sentinel(Sentinel::Min))
    {
        return Ok(false);
    }

    // The chain lower, R..., upper must be non-decreasing.
    let chain: Vec<&Scalar> = lo_score
        .iter()
        .chain(scores.iter())
        .chain(hi_score.iter())
        .collect();
    if chain.windows(2).any(|w| w[0] > w[1]) {
        return Ok(false);
    }

    Ok(match query {
        Query::TopK { k, .. } => is_max && (result.len() == *k || (result.len() < *k && is_min)),
        Query::Range { lo, hi, .. } => {
            scores.iter().all(|s| lo <= s && s <= hi)
                && lo_score.as_ref().is_none_or(|s| s < lo)
                && hi_score.as_ref().is_none_or(|s| s > hi)
        }
        Query::Knn { k, y, .. } => {
            let offset = usize::from(lo_score.is_some());
            let list: Vec<Scalar> = chain.into_iter().cloned().collect();
            let w = answer_knn(&list, *k, y);
            w.start == offset && w.len == result.len()
        }
    })
}

/// Runs every check in order and reports the first failure.
pub fn verify(query: &Query, response: &Response, params: &ClientParams) -> (Verdict, VerifyCost) {
    verify_with(&Sha256Provider, query, response, params)
}

pub fn verify_with(
    provider: &dyn HashProvider,
    query: &Query,
    response: &Response,
    params: &ClientParams,
) -> (Verdict, VerifyCost) {
    let hasher = CountingHasher::new(provider);
    let mut cost = VerifyCost::default();
    let verdict = run_checks(&hasher, &mut cost, query, response, params);
    cost.hashes = hasher.count();
    (verdict, cost)
}

fn run_checks(
    hasher: &CountingHasher<'_>,
    cost: &mut VerifyCost,
    query: &Query,
    response: &Response,
    params: &ClientParams,
) -> Verdict {
    let vo = &response.vo;
    if vo.query != *query
        || vo.mode() != params.mode
        || params.template.check_input(query.input()).is_err()
    {
        return Verdict::reject(RejectReason::MalformedVO);
    }
    let fmh_root = match rebuild_fmh_root(hasher, &response.result, vo) {
        Ok(d) => d,
        Err(r) => return Verdict::reject(r),
    };
    let message = signed_message(hasher, fmh_root, &vo.subdomain, params.digest_mode);
    cost.sig_ops += 1;
    if !check_signature(&params.key, &message, &vo.signature) {
        return Verdict::reject(RejectReason::SignatureMismatch);
    }
    if !check_containment(query.input(), &vo.subdomain) {
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

const TAG_PARAMS: u8 = 0x16;

impl Encode for ClientParams {
    fn encode(&self, w: &mut Writer) {
        w.u8(TAG_PARAMS).put(&self.template).put(&self.domain);
        w.u8(match self.mode {
            SignMode::OneSignature => 1,
            SignMode::MultiSignature => 2,
        });
        w.u8(match self.digest_mode {
            DigestMode::RoutingBound => 0,
            DigestMode::ChildrenOnly => 1,
        });
        w.bytes(self.key.to_pem().as_bytes());
    }
}

impl Decode for ClientParams {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.tag(TAG_PARAMS)?;
        let template = r.get()?;
        let domain = r.get()?;
        let mode = match r.u8()? {
            1 => SignMode::OneSignature,
            2 => SignMode::MultiSignature,
            _ => return Err(r.invalid("sign mode")),
        };
        let digest_mode = match r.u8()? {
            0 => DigestMode::RoutingBound,
            1 => DigestMode::ChildrenOnly,
            _ => return Err(r.invalid("digest mode")),
        };
        let pem = std::str::from_utf8(r.bytes()?).map_err(|_| r.invalid("key text"))?;
        let key = VerifyingKey::from_pem(pem).map_err(|_| r.invalid("public key"))?;
        Ok(ClientParams {
            template,
            domain,
            mode,
            digest_mode,
            key,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::authenticator::{authenticate, AuthOptions, SignedTree};
    use crate::ranking::fixture::*;
    use crate::server::answer;
    use crate::sign::{SignatureScheme, SigningKey};

    fn key() -> SigningKey {
        SigningKey::generate(SignatureScheme::Ed25519, 21).unwrap()
    }

    fn setup(mode: SignMode, n: usize) -> (SignedTree, ClientParams) {
        let t = authenticate(
            f1_records()[..n].to_vec(),
            f1_template(),
            f1_domain(),
            AuthOptions::new(mode),
            &key(),
        )
        .unwrap();
        let params = ClientParams {
            template: f1_template(),
            domain: f1_domain(),
            mode,
            digest_mode: DigestMode::RoutingBound,
            key: key().verifying_key(),
        };
        (t, params)
    }

    fn s(v: &str) -> Scalar {
        v.parse().unwrap()
    }

    fn queries(at: &str) -> Vec<Query> {
        vec![
            Query::top_k(x(at), 2).unwrap(),
            Query::top_k(x(at), 9).unwrap(),
            Query::range(x(at), s("0.5"), s("5")).unwrap(),
            Query::range(x(at), s("-100"), s("-90")).unwrap(),
            Query::knn(x(at), 2, s("0.5")).unwrap(),
            Query::knn(x(at), 1, s("3")).unwrap(),
        ]
    }

    #[test]
    fn honest_responses_verify() {
        for mode in [SignMode::OneSignature, SignMode::MultiSignature] {
            for n in [1, 4] {
                let (t, params) = setup(mode, n);
                for at in ["0", "1", "1.2", "-10", "10", "7/4"] {
                    for q in queries(at) {
                        let (resp, _) = answer(&t, &q).unwrap();
                        let (v, cost) = verify(&q, &resp, &params);
                        assert_eq!(v, Verdict::ACCEPT, "{mode:?} n={n} {q:?}");
                        assert_eq!(cost.sig_ops, 1);
                    }
                }
            }
        }
    }

    #[test]
    fn fold_matches_stored_leaf_digest() {
        let (t, _) = setup(SignMode::MultiSignature, 4);
        let q = Query::top_k(x("0"), 2).unwrap();
        let (resp, _) = answer(&t, &q).unwrap();
        let h = CountingHasher::new(&Sha256Provider);
        let leaf = t.tree.locate(&x("0")).unwrap();
        assert_eq!(
            rebuild_fmh_root(&h, &resp.result, &resp.vo).unwrap(),
            t.tree.leaf(leaf).digest
        );
        let mut bad = resp.result.clone();
        bad[0].attrs[1] = s("77");
        assert_ne!(
            rebuild_fmh_root(&h, &bad, &resp.vo).unwrap(),
            t.tree.leaf(leaf).digest
        );
    }

    #[test]
    fn trace_fold_and_tamper() {
        let (t, params) = setup(SignMode::OneSignature, 4);
        let q = Query::top_k(x("0"), 2).unwrap();
        let (resp, _) = answer(&t, &q).unwrap();
        let h = CountingHasher::new(&Sha256Provider);
        let root = rebuild_fmh_root(&h, &resp.result, &resp.vo).unwrap();
        assert_eq!(
            signed_message(&h, root, &resp.vo.subdomain, DigestMode::RoutingBound),
            t.root_digest()
        );
        assert_eq!(
            rebuild_imh_root(
                &h,
                root,
                &SubdomainTrace::default(),
                DigestMode::RoutingBound
            ),
            root
        );
        let mut bad = resp.clone();
        if let SubdomainProof::Trace(tr) = &mut bad.vo.subdomain {
            tr.entries[0].sibling.0[0] ^= 1;
        }
        assert_eq!(
            verify(&q, &bad, &params).0,
            Verdict::reject(RejectReason::SignatureMismatch)
        );
    }

    #[test]
    fn containment_checks() {
        let (t, _) = setup(SignMode::MultiSignature, 4);
        let leaf = t.tree.leaf(t.tree.locate(&x("0")).unwrap());
        let own = SubdomainProof::Region(leaf.region.clone());
        assert!(check_containment(&x("0"), &own));
        let other = t.tree.leaf(t.tree.locate(&x("5")).unwrap());
        assert!(!check_containment(
            &x("0"),
            &SubdomainProof::Region(other.region.clone())
        ));
        assert!(check_containment(
            &x("0"),
            &SubdomainProof::Trace(SubdomainTrace::default())
        ));
    }

    #[test]
    fn shuffled_constraints_still_verify() {
        let (t, params) = setup(SignMode::MultiSignature, 4);
        let q = Query::top_k(x("1.2"), 2).unwrap();
        let (mut resp, _) = answer(&t, &q).unwrap();
        if let SubdomainProof::Region(r) = &mut resp.vo.subdomain {
            r.constraints.reverse();
        }
        assert_eq!(verify(&q, &resp, &params).0, Verdict::ACCEPT);
    }

    #[test]
    fn re_execution_rejections() {
        let tpl = f1_template();
        let recs = f1_records();
        let q = Query::top_k(x("0"), 2).unwrap();
        // Honest: R = [f2, f3], lower f1, upper MAX.
        let (l, u) = (
            Boundary::Record(recs[0].clone()),
            Boundary::Sentinel(Sentinel::Max),
        );
        assert_eq!(
            re_execute(&q, &[recs[1].clone(), recs[2].clone()], &l, &u, &tpl),
            Ok(true)
        );
        // Out of order.
        assert_eq!(
            re_execute(&q, &[recs[2].clone(), recs[1].clone()], &l, &u, &tpl),
            Ok(false)
        );
        // A boundary that satisfies the range condition.
        let r = Query::range(x("0"), s("0"), s("5")).unwrap();
        assert_eq!(
            re_execute(&r, &[recs[1].clone(), recs[2].clone()], &l, &u, &tpl),
            Ok(false)
        );
        // Too short without the MIN sentinel.
        assert_eq!(
            re_execute(
                &q,
                &[recs[2].clone()],
                &Boundary::Record(recs[1].clone()),
                &u,
                &tpl
            ),
            Ok(false)
        );
    }

    #[test]
    fn params_round_trip() {
        let (_, params) = setup(SignMode::MultiSignature, 4);
        let back = ClientParams::from_bytes(&params.to_bytes()).unwrap();
        assert_eq!(back.to_bytes(), params.to_bytes());
    }

    #[test]
    fn mismatched_echo_is_malformed() {
        let (t, params) = setup(SignMode::OneSignature, 4);
        let q = Query::top_k(x("0"), 2).unwrap();
        let (resp, _) = answer(&t, &q).unwrap();
        let other = Query::top_k(x("0"), 3).unwrap();
        assert_eq!(
            verify(&other, &resp, &params).0,
            Verdict::reject(RejectReason::MalformedVO)
        );
    }
}
