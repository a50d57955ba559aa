//! Turns an I-tree into a signed IMH tree: one FMH tree per subdomain,
//! digests propagated to the root, then one root signature or one
//! signature per subdomain.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::codec::{Decode, DecodeError, Encode, Reader, Sentinel, Writer, TAG_SIGNED_TREE};
use crate::fmh::FmhTree;
use crate::hash::{provider_by_name, CountingHasher, Digest, HashProvider, Sha256Provider};
use crate::itree::{build_itree, ITree, IntersectionNode, Node, NodeId, SubdomainNode};
use crate::ranking::{
    Constraint, DomainBox, Intersection, RankingError, RankingTemplate, Record, RecordId, Side,
    SubdomainRegion,
};
use crate::sign::{Signature, SigningKey, VerifyingKey};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SignMode {
    OneSignature,
    MultiSignature,
}

/// What an internal IMH digest commits to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum DigestMode {
    /// `H(enc(intersection) || above.h || below.h)`.
    #[default]
    RoutingBound,
    /// `H(above.h || below.h)`; cannot bind a trace to its intersections.
    ChildrenOnly,
}

#[derive(Debug, Error)]
pub enum AuthError {
    #[error("subdomain node {0} has no FMH tree")]
    MissingFmh(NodeId),
    #[error("record {0} referenced by a subdomain is not in the database")]
    UnknownRecord(RecordId),
    #[error("node {node}: stored digest does not match its recomputation")]
    DigestMismatch { node: NodeId },
    #[error("node {0} still holds the invalid digest")]
    InvalidDigest(NodeId),
    #[error("signature check failed at {0}")]
    BadSignature(String),
    #[error("signature set does not match the signing mode")]
    SignatureLayout,
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// `H(enc(record))` for every record plus the two sentinels, computed once.
pub struct LeafDigests {
    records: HashMap<RecordId, Digest>,
    min: Digest,
    max: Digest,
}

impl LeafDigests {
    pub fn new(records: &[Record], hasher: &CountingHasher<'_>) -> Self {
        let records = records
            .iter()
            .map(|r| (r.id, hasher.hash(&r.to_bytes())))
            .collect();
        LeafDigests {
            records,
            min: hasher.hash(&Sentinel::Min.to_bytes()),
            max: hasher.hash(&Sentinel::Max.to_bytes()),
        }
    }

    pub fn record(&self, id: RecordId) -> Option<Digest> {
        self.records.get(&id).copied()
    }

    pub fn sentinel(&self, s: Sentinel) -> Digest {
        match s {
            Sentinel::Min => self.min,
            Sentinel::Max => self.max,
        }
    }
}

/// FMH tree over `[MIN, ascending ids..., MAX]` for a descending order list.
pub fn build_fmh(
    descending: &[RecordId],
    digests: &LeafDigests,
    hasher: &CountingHasher<'_>,
) -> Result<FmhTree, AuthError> {
    let mut leaves = Vec::with_capacity(descending.len() + 2);
    leaves.push(digests.min);
    for &id in descending.iter().rev() {
        leaves.push(digests.record(id).ok_or(AuthError::UnknownRecord(id))?);
    }
    leaves.push(digests.max);
    Ok(FmhTree::from_leaves(leaves, hasher))
}

/// Builds and attaches an FMH tree to every subdomain, setting its digest.
pub fn attach_fmh_trees(tree: &mut ITree, hasher: &CountingHasher<'_>) -> Result<(), AuthError> {
    let digests = LeafDigests::new(tree.records(), hasher);
    for id in tree.leaves() {
        let fmh = build_fmh(&tree.leaf(id).order, &digests, hasher)?;
        let leaf = tree.leaf_mut(id);
        leaf.digest = fmh.root();
        leaf.fmh = Some(fmh);
    }
    Ok(())
}

pub fn internal_digest(
    hasher: &CountingHasher<'_>,
    mode: DigestMode,
    inter: &Intersection,
    above: &Digest,
    below: &Digest,
) -> Digest {
    match mode {
        DigestMode::RoutingBound => {
            hasher.hash_parts(&[&inter.to_bytes(), above.as_bytes(), below.as_bytes()])
        }
        DigestMode::ChildrenOnly => hasher.combine(above, below),
    }
}

/// `H(H(enc(region)) || fmh_root)`, the message signed per subdomain.
pub fn subdomain_message(
    hasher: &CountingHasher<'_>,
    region: &SubdomainRegion,
    fmh_root: &Digest,
) -> Digest {
    let region_digest = hasher.hash(&region.to_bytes());
    hasher.combine(&region_digest, fmh_root)
}

/// Post-order digest propagation with an explicit stack; returns the root digest.
pub fn propagate_hashes(
    tree: &mut ITree,
    mode: DigestMode,
    hasher: &CountingHasher<'_>,
) -> Result<Digest, AuthError> {
    let mut stack = vec![(tree.root(), false)];
    while let Some((id, expanded)) = stack.pop() {
        match tree.node(id) {
            Node::Subdomain(leaf) => {
                let fmh = leaf.fmh.as_ref().ok_or(AuthError::MissingFmh(id))?;
                let root = fmh.root();
                tree.leaf_mut(id).digest = root;
            }
            Node::Intersection(n) if !expanded => {
                let (a, b) = (n.above, n.below);
                stack.push((id, true));
                stack.push((b, false));
                stack.push((a, false));
            }
            Node::Intersection(n) => {
                let h = internal_digest(
                    hasher,
                    mode,
                    &n.intersection,
                    &tree.node(n.above).digest(),
                    &tree.node(n.below).digest(),
                );
                if let Node::Intersection(n) = tree.node_mut(id) {
                    n.digest = h;
                }
            }
        }
    }
    Ok(tree.node(tree.root()).digest())
}

#[derive(Clone)]
pub struct SignedTree {
    pub tree: ITree,
    pub mode: SignMode,
    pub digest_mode: DigestMode,
    pub root_sig: Option<Signature>,
    /// One entry per subdomain in multi-signature mode.
    pub leaf_sigs: Option<HashMap<NodeId, Signature>>,
    /// Hash invocations spent building the authenticated structure.
    pub build_hashes: u64,
    hash: &'static dyn HashProvider,
}

impl fmt::Debug for SignedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SignedTree")
            .field("mode", &self.mode)
            .field("digest_mode", &self.digest_mode)
            .field("leaves", &self.tree.leaf_count())
            .field("root", &self.root_digest())
            .finish()
    }
}

impl SignedTree {
    pub fn hash_provider(&self) -> &'static dyn HashProvider {
        self.hash
    }

    pub fn root_digest(&self) -> Digest {
        self.tree.node(self.tree.root()).digest()
    }

    pub fn signature_count(&self) -> usize {
        usize::from(self.root_sig.is_some()) + self.leaf_sigs.as_ref().map_or(0, HashMap::len)
    }

    /// The signature a VO for `leaf` carries.
    pub fn signature_for(&self, leaf: NodeId) -> Option<&Signature> {
        match self.mode {
            SignMode::OneSignature => self.root_sig.as_ref(),
            SignMode::MultiSignature => self.leaf_sigs.as_ref()?.get(&leaf),
        }
    }
}

pub fn sign_tree(
    tree: ITree,
    mode: SignMode,
    digest_mode: DigestMode,
    key: &SigningKey,
    hasher: &CountingHasher<'static>,
) -> SignedTree {
    let (root_sig, leaf_sigs) = match mode {
        SignMode::OneSignature => (Some(key.sign(&tree.node(tree.root()).digest())), None),
        SignMode::MultiSignature => {
            let sigs = tree
                .leaves()
                .into_iter()
                .map(|id| {
                    let leaf = tree.leaf(id);
                    (
                        id,
                        key.sign(&subdomain_message(hasher, &leaf.region, &leaf.digest)),
                    )
                })
                .collect();
            (None, Some(sigs))
        }
    };
    SignedTree {
        tree,
        mode,
        digest_mode,
        root_sig,
        leaf_sigs,
        build_hashes: hasher.count(),
        hash: hasher.provider(),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AuthOptions {
    pub mode: SignMode,
    pub digest_mode: DigestMode,
}

impl AuthOptions {
    pub fn new(mode: SignMode) -> Self {
        AuthOptions {
            mode,
            digest_mode: DigestMode::default(),
        }
    }
}

/// Builds the I-tree and runs every authentication step with SHA-256.
pub fn authenticate(
    records: Vec<Record>,
    tpl: RankingTemplate,
    domain: DomainBox,
    opts: AuthOptions,
    key: &SigningKey,
) -> Result<SignedTree, AuthError> {
    authenticate_tree(build_itree(records, tpl, domain)?, opts, key)
}

pub fn authenticate_tree(
    mut tree: ITree,
    opts: AuthOptions,
    key: &SigningKey,
) -> Result<SignedTree, AuthError> {
    let hasher = CountingHasher::new(&Sha256Provider);
    attach_fmh_trees(&mut tree, &hasher)?;
    propagate_hashes(&mut tree, opts.digest_mode, &hasher)?;
    Ok(sign_tree(tree, opts.mode, opts.digest_mode, key, &hasher))
}

/// Recomputes every FMH and IMH digest and, given a key, every signature.
pub fn audit(signed: &SignedTree, key: Option<&VerifyingKey>) -> Result<(), AuthError> {
    let hasher = CountingHasher::new(signed.hash);
    let tree = &signed.tree;
    let digests = LeafDigests::new(tree.records(), &hasher);
    for id in 0..tree.node_count() {
        match tree.node(id) {
            Node::Subdomain(leaf) => {
                let fmh = leaf.fmh.as_ref().ok_or(AuthError::MissingFmh(id))?;
                let fresh = build_fmh(&leaf.order, &digests, &hasher)?;
                for layer in fmh.layers() {
                    if layer.iter().any(|d| !d.is_valid()) {
                        return Err(AuthError::InvalidDigest(id));
                    }
                }
                if fresh != *fmh || leaf.digest != fmh.root() {
                    return Err(AuthError::DigestMismatch { node: id });
                }
            }
            Node::Intersection(n) => {
                if !n.digest.is_valid() {
                    return Err(AuthError::InvalidDigest(id));
                }
                let h = internal_digest(
                    &hasher,
                    signed.digest_mode,
                    &n.intersection,
                    &tree.node(n.above).digest(),
                    &tree.node(n.below).digest(),
                );
                if h != n.digest {
                    return Err(AuthError::DigestMismatch { node: id });
                }
            }
        }
    }
    match (signed.mode, &signed.root_sig, &signed.leaf_sigs) {
        (SignMode::OneSignature, Some(sig), None) => {
            if let Some(k) = key {
                if !k.verify(&signed.root_digest(), sig) {
                    return Err(AuthError::BadSignature("root".into()));
                }
            }
        }
        (SignMode::MultiSignature, None, Some(sigs)) => {
            let leaves = tree.leaves();
            if sigs.len() != leaves.len() {
                return Err(AuthError::SignatureLayout);
            }
            for id in leaves {
                let sig = sigs.get(&id).ok_or(AuthError::SignatureLayout)?;
                if let Some(k) = key {
                    let leaf = tree.leaf(id);
                    if !k.verify(&subdomain_message(&hasher, &leaf.region, &leaf.digest), sig) {
                        return Err(AuthError::BadSignature(format!("subdomain node {id}")));
                    }
                }
            }
        }
        _ => return Err(AuthError::SignatureLayout),
    }
    Ok(())
}

const NODE_INTERSECTION: u8 = 0;
const NODE_SUBDOMAIN: u8 = 1;

impl Encode for RankingTemplate {
    fn encode(&self, w: &mut Writer) {
        w.u32(self.dim() as u32).u8(u8::from(self.has_intercept()));
    }
}

impl Decode for RankingTemplate {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let dim = r.u32()? as usize;
        let tpl = match r.u8()? {
            0 => RankingTemplate::linear(dim),
            1 => RankingTemplate::affine(dim),
            _ => return Err(r.invalid("template flag")),
        };
        tpl.map_err(|_| r.invalid("template dimension"))
    }
}

/// Tree files store the node structure, leaf orders, digests and signatures.
/// Leaf regions are rebuilt from the path and FMH trees from the orders.
impl Encode for SignedTree {
    fn encode(&self, w: &mut Writer) {
        let tree = &self.tree;
        w.u8(TAG_SIGNED_TREE).bytes(self.hash.name().as_bytes());
        w.u8(match self.mode {
            SignMode::OneSignature => 1,
            SignMode::MultiSignature => 2,
        });
        w.u8(match self.digest_mode {
            DigestMode::RoutingBound => 0,
            DigestMode::ChildrenOnly => 1,
        });
        w.put(tree.template())
            .put(tree.domain())
            .seq(tree.records())
            .u64(self.build_hashes);
        w.len_of(tree.node_count());
        let mut stack = vec![tree.root()];
        while let Some(id) = stack.pop() {
            match tree.node(id) {
                Node::Intersection(n) => {
                    w.u8(NODE_INTERSECTION)
                        .put(&n.intersection)
                        .digest(&n.digest);
                    stack.push(n.below);
                    stack.push(n.above);
                }
                Node::Subdomain(leaf) => {
                    w.u8(NODE_SUBDOMAIN).seq(&leaf.order).digest(&leaf.digest);
                    let sig = self.leaf_sigs.as_ref().and_then(|s| s.get(&id));
                    w.put(&sig.cloned());
                }
            }
        }
        w.put(&self.root_sig);
    }
}

impl Decode for SignedTree {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.tag(TAG_SIGNED_TREE)?;
        let name = std::str::from_utf8(r.bytes()?).map_err(|_| r.invalid("hash name"))?;
        let hash = provider_by_name(name).ok_or_else(|| r.invalid("hash provider"))?;
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
        let template: RankingTemplate = r.get()?;
        let domain: DomainBox = r.get()?;
        let records: Vec<Record> = r.seq()?;
        let build_hashes = r.u64()?;
        let count = r.length()?;

        // Preorder: each entry is placed at a pending parent slot.
        enum Slot {
            Root,
            Child(NodeId, Side),
        }
        let mut nodes: Vec<Node> = Vec::with_capacity(count);
        let mut regions: Vec<SubdomainRegion> = Vec::with_capacity(count);
        let mut leaf_sigs = HashMap::new();
        let mut pending = vec![Slot::Root];
        for _ in 0..count {
            let slot = pending.pop().ok_or_else(|| r.invalid("tree shape"))?;
            let id = nodes.len();
            let region = match slot {
                Slot::Root => SubdomainRegion::whole(domain.clone()),
                Slot::Child(parent, side) => {
                    let Node::Intersection(p) = &mut nodes[parent] else {
                        unreachable!()
                    };
                    match side {
                        Side::Above => p.above = id,
                        Side::Below => p.below = id,
                    }
                    regions[parent].with_constraint(Constraint::new(p.intersection.clone(), side))
                }
            };
            match r.u8()? {
                NODE_INTERSECTION => {
                    let intersection: Intersection = r.get()?;
                    let digest = r.digest()?;
                    nodes.push(Node::Intersection(IntersectionNode {
                        intersection,
                        above: 0,
                        below: 0,
                        digest,
                    }));
                    pending.push(Slot::Child(id, Side::Below));
                    pending.push(Slot::Child(id, Side::Above));
                }
                NODE_SUBDOMAIN => {
                    let order: Vec<RecordId> = r.seq()?;
                    let digest = r.digest()?;
                    if let Some(sig) = r.get::<Option<Signature>>()? {
                        leaf_sigs.insert(id, sig);
                    }
                    nodes.push(Node::Subdomain(SubdomainNode {
                        region: region.clone(),
                        order,
                        fmh: None,
                        digest,
                    }));
                }
                _ => return Err(r.invalid("node kind")),
            }
            regions.push(region);
        }
        if !pending.is_empty() || nodes.is_empty() {
            return Err(r.invalid("tree shape"));
        }
        let root_sig: Option<Signature> = r.get()?;
        let mut tree = ITree::from_parts(nodes, 0, domain, template, records)
            .map_err(|_| r.invalid("record set"))?;
        let hasher = CountingHasher::new(hash);
        let digests = LeafDigests::new(tree.records(), &hasher);
        for id in tree.leaves() {
            let fmh = build_fmh(&tree.leaf(id).order, &digests, &hasher)
                .map_err(|_| r.invalid("leaf order"))?;
            tree.leaf_mut(id).fmh = Some(fmh);
        }
        let leaf_sigs = (mode == SignMode::MultiSignature).then_some(leaf_sigs);
        Ok(SignedTree {
            tree,
            mode,
            digest_mode,
            root_sig,
            leaf_sigs,
            build_hashes,
            hash,
        })
    }
}
