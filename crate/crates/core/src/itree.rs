//! The intersection tree: a binary routing structure whose internal nodes
//! are pairwise function intersections and whose leaves are subdomains with
//! a fixed total order of the records.

use std::collections::{HashMap, VecDeque};

use crate::fmh::FmhTree;
use crate::hash::Digest;
use crate::ranking::{
    rank_at, Constraint, DomainBox, FunctionInput, Intersection, LinearForm, RankingError,
    RankingTemplate, Record, RecordId, Side, SubdomainRegion,
};
use crate::scalar::Scalar;

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntersectionNode {
    pub intersection: Intersection,
    /// Child covering `f_i - f_j >= 0`.
    pub above: NodeId,
    /// Child covering `f_i - f_j < 0`.
    pub below: NodeId,
    pub digest: Digest,
}

impl IntersectionNode {
    pub fn child(&self, side: Side) -> NodeId {
        match side {
            Side::Above => self.above,
            Side::Below => self.below,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubdomainNode {
    pub region: SubdomainRegion,
    /// Record ids by descending score (ties by ascending id).
    pub order: Vec<RecordId>,
    pub fmh: Option<FmhTree>,
    pub digest: Digest,
}

impl SubdomainNode {
    /// Ids in ascending score order, the FMH leaf order between the sentinels.
    pub fn ascending(&self) -> impl DoubleEndedIterator<Item = RecordId> + ExactSizeIterator + '_ {
        self.order.iter().rev().copied()
    }

    /// Id at ascending position `pos`.
    pub fn ascending_at(&self, pos: usize) -> RecordId {
        self.order[self.order.len() - 1 - pos]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Intersection(IntersectionNode),
    Subdomain(SubdomainNode),
}

impl Node {
    pub fn digest(&self) -> Digest {
        match self {
            Node::Intersection(n) => n.digest,
            Node::Subdomain(n) => n.digest,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ITree {
    nodes: Vec<Node>,
    root: NodeId,
    domain: DomainBox,
    template: RankingTemplate,
    records: Vec<Record>,
    index: HashMap<RecordId, usize>,
}

impl ITree {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Panics when `id` is not a leaf.
    pub fn leaf(&self, id: NodeId) -> &SubdomainNode {
        match &self.nodes[id] {
            Node::Subdomain(s) => s,
            Node::Intersection(_) => panic!("node {id} is not a subdomain"),
        }
    }

    pub fn leaf_mut(&mut self, id: NodeId) -> &mut SubdomainNode {
        match &mut self.nodes[id] {
            Node::Subdomain(s) => s,
            Node::Intersection(_) => panic!("node {id} is not a subdomain"),
        }
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn template(&self) -> &RankingTemplate {
        &self.template
    }

    /// Records in ascending id order.
    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn record(&self, id: RecordId) -> Option<&Record> {
        self.index.get(&id).map(|&i| &self.records[i])
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Subdomain(_)))
            .count()
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.len() - self.leaf_count()
    }

    /// Longest root-to-leaf path, in intersection nodes.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self.root, 0usize)];
        while let Some((id, d)) = stack.pop() {
            match &self.nodes[id] {
                Node::Intersection(n) => {
                    stack.push((n.above, d + 1));
                    stack.push((n.below, d + 1));
                }
                Node::Subdomain(_) => best = best.max(d),
            }
        }
        best
    }

    /// Leaves in depth-first order, `above` before `below`.
    pub fn leaves(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            match &self.nodes[id] {
                Node::Intersection(n) => {
                    stack.push(n.below);
                    stack.push(n.above);
                }
                Node::Subdomain(_) => out.push(id),
            }
        }
        out
    }

    /// Root-to-leaf walk, returning the path of intersection nodes and the leaf.
    pub fn walk(&self, x: &FunctionInput) -> Result<(Vec<(NodeId, Side)>, NodeId), RankingError> {
        self.template.check_input(x)?;
        if !self.domain.contains(x.values()) {
            return Err(RankingError::OutsideDomain);
        }
        let mut path = Vec::new();
        let mut id = self.root;
        while let Node::Intersection(n) = &self.nodes[id] {
            let side = n.intersection.side_at(x.values());
            path.push((id, side));
            id = n.child(side);
        }
        Ok((path, id))
    }

    pub fn locate(&self, x: &FunctionInput) -> Result<NodeId, RankingError> {
        Ok(self.walk(x)?.1)
    }

    /// True when both trees have identical shape, intersections and leaf orders.
    pub fn same_structure(&self, other: &ITree) -> bool {
        fn go(a: &ITree, ia: NodeId, b: &ITree, ib: NodeId) -> bool {
            match (&a.nodes[ia], &b.nodes[ib]) {
                (Node::Intersection(x), Node::Intersection(y)) => {
                    x.intersection == y.intersection
                        && go(a, x.above, b, y.above)
                        && go(a, x.below, b, y.below)
                }
                (Node::Subdomain(x), Node::Subdomain(y)) => {
                    x.order == y.order && x.region == y.region
                }
                _ => false,
            }
        }
        go(self, self.root, other, other.root)
    }

    /// Reassembles a tree from its parts; used by the decoder.
    pub(crate) fn from_parts(
        nodes: Vec<Node>,
        root: NodeId,
        domain: DomainBox,
        template: RankingTemplate,
        records: Vec<Record>,
    ) -> Result<Self, RankingError> {
        let index = index_records(&records)?;
        Ok(ITree {
            nodes,
            root,
            domain,
            template,
            records,
            index,
        })
    }
}

fn index_records(records: &[Record]) -> Result<HashMap<RecordId, usize>, RankingError> {
    let mut index = HashMap::with_capacity(records.len());
    for (pos, r) in records.iter().enumerate() {
        if index.insert(r.id, pos).is_some() {
            return Err(RankingError::DuplicateId(r.id));
        }
    }
    Ok(index)
}

/// Build-time geometry of a node, used to decide splits quickly.
#[derive(Clone, Debug)]
enum Shape {
    /// Closed interval with positive width (one variable).
    Interval(Scalar, Scalar),
    /// Closed convex polygon with positive area, vertices in boundary order.
    Polygon(Vec<[Scalar; 2]>),
    /// Any dimension: the region itself plus an interior witness.
    General(SubdomainRegion, Vec<Scalar>),
}

impl Shape {
    fn is_split_by(&self, plane: &LinearForm) -> bool {
        if plane.is_constant() {
            return false;
        }
        match self {
            Shape::Interval(lo, hi) => {
                let root = -&plane.offset / &plane.weights[0];
                lo < &root && &root < hi
            }
            Shape::Polygon(verts) => {
                let (mut pos, mut neg) = (false, false);
                for v in verts {
                    match plane.eval(v).signum() {
                        1 => pos = true,
                        -1 => neg = true,
                        _ => {}
                    }
                    if pos && neg {
                        return true;
                    }
                }
                false
            }
            Shape::General(region, witness) => {
                let at = plane.eval(witness);
                if at.is_zero() {
                    // An interior point on a non-constant hyperplane has
                    // interior neighbours on both sides.
                    return true;
                }
                let missing = if at.is_positive() {
                    plane.negated()
                } else {
                    plane.clone()
                };
                let probe = region.with_constraint(Constraint::new(
                    Intersection {
                        i: 0,
                        j: 0,
                        plane: missing,
                    },
                    Side::Above,
                ));
                probe.interior_point().is_some()
            }
        }
    }

    /// Closures of the `>= 0` and `<= 0` parts; the caller ensures a split.
    fn split(
        &self,
        plane: &LinearForm,
        above: &SubdomainRegion,
        below: &SubdomainRegion,
    ) -> (Shape, Shape) {
        match self {
            Shape::Interval(lo, hi) => {
                let root = -&plane.offset / &plane.weights[0];
                let left = Shape::Interval(lo.clone(), root.clone());
                let right = Shape::Interval(root, hi.clone());
                if plane.weights[0].is_positive() {
                    (right, left)
                } else {
                    (left, right)
                }
            }
            Shape::Polygon(verts) => (
                Shape::Polygon(clip(verts, plane)),
                Shape::Polygon(clip(verts, &plane.negated())),
            ),
            Shape::General(..) => {
                let wa = above.interior_point().expect("split child has an interior");
                let wb = below.interior_point().expect("split child has an interior");
                (
                    Shape::General(above.clone(), wa),
                    Shape::General(below.clone(), wb),
                )
            }
        }
    }

    fn witness(&self) -> Vec<Scalar> {
        match self {
            Shape::Interval(lo, hi) => vec![lo.midpoint(hi)],
            Shape::Polygon(verts) => {
                let k = Scalar::from_int(verts.len() as i64);
                let sx: Scalar = verts.iter().map(|v| v[0].clone()).sum();
                let sy: Scalar = verts.iter().map(|v| v[1].clone()).sum();
                vec![&sx / &k, &sy / &k]
            }
            Shape::General(_, w) => w.clone(),
        }
    }
}

/// Clips a convex polygon to `plane >= 0`.
fn clip(verts: &[[Scalar; 2]], plane: &LinearForm) -> Vec<[Scalar; 2]> {
    let vals: Vec<Scalar> = verts.iter().map(|v| plane.eval(v)).collect();
    let k = verts.len();
    let mut out = Vec::with_capacity(k + 1);
    for a in 0..k {
        let b = (a + 1) % k;
        let (ha, hb) = (&vals[a], &vals[b]);
        if !ha.is_negative() {
            out.push(verts[a].clone());
        }
        if (ha.is_positive() && hb.is_negative()) || (ha.is_negative() && hb.is_positive()) {
            let t = ha / &(ha - hb);
            let p = [
                &verts[a][0] + &(&t * &(&verts[b][0] - &verts[a][0])),
                &verts[a][1] + &(&t * &(&verts[b][1] - &verts[a][1])),
            ];
            out.push(p);
        }
    }
    out
}

/// Incremental construction of an [`ITree`].
pub struct ITreeBuilder {
    nodes: Vec<Node>,
    shapes: Vec<Shape>,
    domain: DomainBox,
    template: RankingTemplate,
    records: Vec<Record>,
    index: HashMap<RecordId, usize>,
    split_checks: u64,
}

impl ITreeBuilder {
    /// A tree holding a single subdomain that covers the whole domain.
    pub fn new(
        mut records: Vec<Record>,
        template: RankingTemplate,
        domain: DomainBox,
    ) -> Result<Self, RankingError> {
        if records.is_empty() {
            return Err(RankingError::EmptyDatabase);
        }
        if domain.dim() != template.dim() {
            return Err(RankingError::DimensionMismatch {
                expected: template.dim(),
                got: domain.dim(),
            });
        }
        if !domain.has_interior() {
            return Err(RankingError::InfeasibleRegion);
        }
        for r in &records {
            template.check_record(r)?;
        }
        records.sort_by_key(|r| r.id);
        let index = index_records(&records)?;
        let bounds = domain.bounds();
        let shape = match template.dim() {
            1 => Shape::Interval(bounds[0].0.clone(), bounds[0].1.clone()),
            2 => {
                let ((x0, x1), (y0, y1)) = (&bounds[0], &bounds[1]);
                Shape::Polygon(vec![
                    [x0.clone(), y0.clone()],
                    [x1.clone(), y0.clone()],
                    [x1.clone(), y1.clone()],
                    [x0.clone(), y1.clone()],
                ])
            }
            _ => {
                let region = SubdomainRegion::whole(domain.clone());
                let w = region
                    .interior_point()
                    .ok_or(RankingError::InfeasibleRegion)?;
                Shape::General(region, w)
            }
        };
        let root = Node::Subdomain(SubdomainNode {
            region: SubdomainRegion::whole(domain.clone()),
            order: Vec::new(),
            fmh: None,
            digest: Digest::INVALID,
        });
        Ok(ITreeBuilder {
            nodes: vec![root],
            shapes: vec![shape],
            domain,
            template,
            records,
            index,
            split_checks: 0,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn record(&self, id: RecordId) -> Option<&Record> {
        self.index.get(&id).map(|&i| &self.records[i])
    }

    /// Number of split tests performed so far.
    pub fn split_checks(&self) -> u64 {
        self.split_checks
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Subdomain(_)))
            .count()
    }

    /// Breadth-first insertion of one intersection; returns how many leaves it split.
    pub fn insert_intersection(&mut self, inter: &Intersection) -> usize {
        let mut queue = VecDeque::from([0usize]);
        let mut splits = 0;
        while let Some(id) = queue.pop_front() {
            self.split_checks += 1;
            if !self.shapes[id].is_split_by(&inter.plane) {
                continue;
            }
            match &self.nodes[id] {
                Node::Intersection(n) => {
                    queue.push_back(n.above);
                    queue.push_back(n.below);
                }
                Node::Subdomain(_) => {
                    self.split_leaf(id, inter);
                    splits += 1;
                }
            }
        }
        splits
    }

    fn split_leaf(&mut self, id: NodeId, inter: &Intersection) {
        let Node::Subdomain(leaf) = &self.nodes[id] else {
            unreachable!()
        };
        let above_region = leaf
            .region
            .with_constraint(Constraint::new(inter.clone(), Side::Above));
        let below_region = leaf
            .region
            .with_constraint(Constraint::new(inter.clone(), Side::Below));
        let (above_shape, below_shape) =
            self.shapes[id].split(&inter.plane, &above_region, &below_region);
        let above = self.nodes.len();
        let below = above + 1;
        for (region, shape) in [(above_region, above_shape), (below_region, below_shape)] {
            self.nodes.push(Node::Subdomain(SubdomainNode {
                region,
                order: Vec::new(),
                fmh: None,
                digest: Digest::INVALID,
            }));
            self.shapes.push(shape);
        }
        // Regions live on leaves only; the parent keeps just its intersection.
        self.nodes[id] = Node::Intersection(IntersectionNode {
            intersection: inter.clone(),
            above,
            below,
            digest: Digest::INVALID,
        });
    }

    /// Sorts every leaf and returns the finished tree.
    pub fn finish(mut self) -> ITree {
        for id in 0..self.nodes.len() {
            if let Node::Subdomain(leaf) = &mut self.nodes[id] {
                let witness = self.shapes[id].witness();
                leaf.order = rank_at(&self.records, &self.template, &witness)
                    .expect("records validated at build start");
            }
        }
        ITree {
            nodes: self.nodes,
            root: 0,
            domain: self.domain,
            template: self.template,
            records: self.records,
            index: self.index,
        }
    }
}

/// Inserts every pairwise intersection in ascending `(i, j)` order and sorts
/// each resulting subdomain.
pub fn build_itree(
    records: Vec<Record>,
    template: RankingTemplate,
    domain: DomainBox,
) -> Result<ITree, RankingError> {
    let mut b = ITreeBuilder::new(records, template, domain)?;
    let n = b.records.len();
    for a in 0..n {
        for c in a + 1..n {
            let inter = Intersection::between(&b.records[a], &b.records[c], &b.template)?;
            b.insert_intersection(&inter);
        }
    }
    Ok(b.finish())
}

/// The leaf whose subdomain contains `x`.
pub fn locate_subdomain<'t>(
    tree: &'t ITree,
    x: &FunctionInput,
) -> Result<&'t SubdomainNode, RankingError> {
    Ok(tree.leaf(tree.locate(x)?))
}

/// All leaves, depth-first with `above` before `below`.
pub fn enumerate_subdomains(tree: &ITree) -> Vec<&SubdomainNode> {
    tree.leaves().into_iter().map(|id| tree.leaf(id)).collect()
}
