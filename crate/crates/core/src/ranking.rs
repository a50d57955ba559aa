//! Records as linear functions of the query input, and the half-space
//! geometry used to partition the input domain.

use thiserror::Error;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::One;

use crate::feasibility;
use crate::scalar::Scalar;

pub type RecordId = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RankingError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("template dimension must be at least 1")]
    ZeroDimension,
    #[error("domain bound {index} has lo > hi")]
    InvalidDomain { index: usize },
    #[error("region has an empty interior")]
    InfeasibleRegion,
    #[error("database is empty")]
    EmptyDatabase,
    #[error("duplicate record id {0}")]
    DuplicateId(RecordId),
    #[error("input lies outside the domain box")]
    OutsideDomain,
}

/// A database row.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Record {
    pub id: RecordId,
    pub attrs: Vec<Scalar>,
}

impl Record {
    pub fn new(id: RecordId, attrs: Vec<Scalar>) -> Self {
        Record { id, attrs }
    }
}

/// The query-time variable assignment `X = (x_1, ..., x_d)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FunctionInput(pub Vec<Scalar>);

impl FunctionInput {
    pub fn new(values: Vec<Scalar>) -> Self {
        FunctionInput(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[Scalar] {
        &self.0
    }
}

/// Turns a record into a function of `X`.
///
/// A linear template scores `sum_t attrs[t] * X[t]`. An affine template
/// expects one extra trailing attribute that is added as a constant term, so
/// `f(x) = 2x` over one variable is the record `(2, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RankingTemplate {
    dim: usize,
    intercept: bool,
}

impl RankingTemplate {
    pub fn linear(dim: usize) -> Result<Self, RankingError> {
        if dim == 0 {
            return Err(RankingError::ZeroDimension);
        }
        Ok(RankingTemplate {
            dim,
            intercept: false,
        })
    }

    pub fn affine(dim: usize) -> Result<Self, RankingError> {
        if dim == 0 {
            return Err(RankingError::ZeroDimension);
        }
        Ok(RankingTemplate {
            dim,
            intercept: true,
        })
    }

    /// Number of query variables `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    /// Number of attributes each record must carry.
    pub fn arity(&self) -> usize {
        self.dim + usize::from(self.intercept)
    }

    pub fn check_record(&self, r: &Record) -> Result<(), RankingError> {
        if r.attrs.len() != self.arity() {
            return Err(RankingError::DimensionMismatch {
                expected: self.arity(),
                got: r.attrs.len(),
            });
        }
        Ok(())
    }

    pub fn check_input(&self, x: &FunctionInput) -> Result<(), RankingError> {
        if x.dim() != self.dim {
            return Err(RankingError::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// The record's score as a linear form over `X`.
    pub fn form_of(&self, r: &Record) -> Result<LinearForm, RankingError> {
        self.check_record(r)?;
        let weights = r.attrs[..self.dim].to_vec();
        let offset = if self.intercept {
            r.attrs[self.dim].clone()
        } else {
            Scalar::zero()
        };
        Ok(LinearForm { weights, offset })
    }
}

/// `w . X + c`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LinearForm {
    pub weights: Vec<Scalar>,
    pub offset: Scalar,
}

impl LinearForm {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Evaluates at `x`; the caller guarantees matching dimension.
    pub fn eval(&self, x: &[Scalar]) -> Scalar {
        debug_assert_eq!(x.len(), self.weights.len());
        let mut acc = self.offset.clone();
        for (w, v) in self.weights.iter().zip(x) {
            if !w.is_zero() {
                acc = acc + w * v;
            }
        }
        acc
    }

    /// True when the form does not depend on `X`.
    pub fn is_constant(&self) -> bool {
        self.weights.iter().all(Scalar::is_zero)
    }

    pub fn sub(&self, other: &LinearForm) -> LinearForm {
        LinearForm {
            weights: self
                .weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| a - b)
                .collect(),
            offset: &self.offset - &other.offset,
        }
    }

    pub fn negated(&self) -> LinearForm {
        LinearForm {
            weights: self.weights.iter().map(|w| -w).collect(),
            offset: -&self.offset,
        }
    }
}

/// Score of `r` at `x`, exactly.
pub fn evaluate(
    r: &Record,
    tpl: &RankingTemplate,
    x: &FunctionInput,
) -> Result<Scalar, RankingError> {
    tpl.check_input(x)?;
    Ok(tpl.form_of(r)?.eval(x.values()))
}

/// Which side of an intersection hyperplane a point lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    /// `f_i(X) - f_j(X) < 0`
    Below,
    /// `f_i(X) - f_j(X) >= 0`
    Above,
}

impl Side {
    pub fn of_value(v: &Scalar) -> Side {
        if v.is_negative() {
            Side::Below
        } else {
            Side::Above
        }
    }

    pub fn flipped(self) -> Side {
        match self {
            Side::Above => Side::Below,
            Side::Below => Side::Above,
        }
    }
}

/// Sign of `f_i(X) - f_j(X)` with zero classified as `Above`.
pub fn side_of(
    i: &Record,
    j: &Record,
    tpl: &RankingTemplate,
    x: &FunctionInput,
) -> Result<Side, RankingError> {
    let diff = evaluate(i, tpl, x)? - evaluate(j, tpl, x)?;
    Ok(Side::of_value(&diff))
}

/// The hyperplane `f_i(X) - f_j(X) = 0` for `i < j`, with its difference
/// form carried along so a client can evaluate it without the database.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Intersection {
    pub i: RecordId,
    pub j: RecordId,
    pub plane: LinearForm,
}

impl Intersection {
    /// Builds the intersection in canonical orientation (lower id first).
    pub fn between(a: &Record, b: &Record, tpl: &RankingTemplate) -> Result<Self, RankingError> {
        let (first, second) = if a.id <= b.id { (a, b) } else { (b, a) };
        let plane = tpl.form_of(first)?.sub(&tpl.form_of(second)?);
        Ok(Intersection {
            i: first.id,
            j: second.id,
            plane,
        })
    }

    pub fn side_at(&self, x: &[Scalar]) -> Side {
        Side::of_value(&self.plane.eval(x))
    }
}

/// One signed half-space of a subdomain.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub intersection: Intersection,
    pub side: Side,
}

impl Constraint {
    pub fn new(intersection: Intersection, side: Side) -> Self {
        Constraint { intersection, side }
    }

    pub fn holds_at(&self, x: &[Scalar]) -> bool {
        self.intersection.side_at(x) == self.side
    }

    /// Sort key used by the canonical encoding.
    pub fn key(&self) -> (RecordId, RecordId, Side) {
        (self.intersection.i, self.intersection.j, self.side)
    }

    /// The form that is strictly positive on this constraint's interior.
    pub(crate) fn interior_form(&self) -> LinearForm {
        match self.side {
            Side::Above => self.intersection.plane.clone(),
            Side::Below => self.intersection.plane.negated(),
        }
    }
}

/// Per-variable closed intervals bounding the domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DomainBox {
    bounds: Vec<(Scalar, Scalar)>,
}

impl DomainBox {
    pub fn new(bounds: Vec<(Scalar, Scalar)>) -> Result<Self, RankingError> {
        if bounds.is_empty() {
            return Err(RankingError::ZeroDimension);
        }
        for (index, (lo, hi)) in bounds.iter().enumerate() {
            if lo > hi {
                return Err(RankingError::InvalidDomain { index });
            }
        }
        Ok(DomainBox { bounds })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: Scalar, hi: Scalar) -> Result<Self, RankingError> {
        DomainBox::new(vec![(lo, hi); dim])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(Scalar, Scalar)] {
        &self.bounds
    }

    pub fn contains(&self, x: &[Scalar]) -> bool {
        x.len() == self.bounds.len()
            && self
                .bounds
                .iter()
                .zip(x)
                .all(|((lo, hi), v)| lo <= v && v <= hi)
    }

    /// True when every interval has positive width.
    pub fn has_interior(&self) -> bool {
        self.bounds.iter().all(|(lo, hi)| lo < hi)
    }
}

/// A subdomain: the domain box cut down by a conjunction of signed
/// half-spaces (the set `B_i`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubdomainRegion {
    pub domain: DomainBox,
    pub constraints: Vec<Constraint>,
}

impl SubdomainRegion {
    pub fn whole(domain: DomainBox) -> Self {
        SubdomainRegion {
            domain,
            constraints: Vec::new(),
        }
    }

    pub fn with_constraint(&self, c: Constraint) -> Self {
        let mut constraints = self.constraints.clone();
        constraints.push(c);
        SubdomainRegion {
            domain: self.domain.clone(),
            constraints,
        }
    }

    /// Constraints in ascending `(i, j, side)` order.
    pub fn sorted_constraints(&self) -> Vec<&Constraint> {
        let mut v: Vec<&Constraint> = self.constraints.iter().collect();
        v.sort_by_key(|c| c.key());
        v
    }

    /// A point strictly inside the region, if the interior is nonempty.
    pub fn interior_point(&self) -> Option<Vec<Scalar>> {
        feasibility::interior_point(self)
    }

    pub fn has_interior(&self) -> bool {
        self.interior_point().is_some()
    }
}

/// True iff the hyperplane has interior points of `region` strictly on both sides.
pub fn region_is_split_by(region: &SubdomainRegion, intersection: &Intersection) -> bool {
    feasibility::is_split_by(region, &intersection.plane)
}

/// Box membership plus every constraint of `B_i`.
pub fn region_contains(region: &SubdomainRegion, x: &FunctionInput) -> bool {
    region.domain.contains(x.values()) && region.constraints.iter().all(|c| c.holds_at(x.values()))
}

/// Descending score order with ties broken by ascending id.
///
/// Scores are compared as integers scaled by one common positive factor.
pub fn rank_at(
    records: &[Record],
    tpl: &RankingTemplate,
    x: &[Scalar],
) -> Result<Vec<RecordId>, RankingError> {
    if x.len() != tpl.dim() {
        return Err(RankingError::DimensionMismatch {
            expected: tpl.dim(),
            got: x.len(),
        });
    }
    let one = BigInt::one();
    let attr_lcm = records
        .iter()
        .flat_map(|r| &r.attrs)
        .fold(one.clone(), |l, a| l.lcm(a.denom()));
    let x_lcm = x.iter().fold(one.clone(), |l, v| l.lcm(v.denom()));
    // Input coordinates times x_lcm; the constant term uses x_lcm itself.
    let mut xs: Vec<BigInt> = x.iter().map(|v| v.numer() * (&x_lcm / v.denom())).collect();
    if tpl.has_intercept() {
        xs.push(x_lcm);
    }
    let mut keyed = Vec::with_capacity(records.len());
    for r in records {
        tpl.check_record(r)?;
        let key: BigInt = r
            .attrs
            .iter()
            .zip(&xs)
            .map(|(a, xv)| a.numer() * (&attr_lcm / a.denom()) * xv)
            .sum();
        keyed.push((key, r.id));
    }
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(keyed.into_iter().map(|(_, id)| id).collect())
}

/// The total order of all records valid throughout the region's interior.
pub fn sort_for_region(
    region: &SubdomainRegion,
    records: &[Record],
    tpl: &RankingTemplate,
) -> Result<Vec<RecordId>, RankingError> {
    let witness = region
        .interior_point()
        .ok_or(RankingError::InfeasibleRegion)?;
    rank_at(records, tpl, &witness)
}


#[cfg(test)]
mod tests {
    use super::fixture::*;
    use super::*;

    fn s(v: &str) -> Scalar {
        v.parse().unwrap()
    }

    #[test]
    fn evaluate_fig1_style_template() {
        let tpl = RankingTemplate::linear(3).unwrap();
        let r = Record::new(7, vec![s("4.0"), s("2"), s("3")]);
        let x = FunctionInput::new(vec![s("1"), s("1"), s("1")]);
        assert_eq!(evaluate(&r, &tpl, &x).unwrap(), s("9"));
        let zero = FunctionInput::new(vec![Scalar::zero(); 3]);
        assert_eq!(evaluate(&r, &tpl, &zero).unwrap(), Scalar::zero());
    }

    #[test]
    fn evaluate_fixture_and_dimension_errors() {
        let recs = f1_records();
        assert_eq!(
            evaluate(&recs[0], &f1_template(), &x("1.2")).unwrap(),
            s("2.4")
        );
        let bad = FunctionInput::new(vec![s("1"), s("2")]);
        assert!(matches!(
            evaluate(&recs[0], &f1_template(), &bad),
            Err(RankingError::DimensionMismatch {
                expected: 1,
                got: 2
            })
        ));
        let short = Record::new(9, vec![s("1")]);
        assert!(evaluate(&short, &f1_template(), &x("0")).is_err());
    }

    #[test]
    fn side_of_boundary_is_above() {
        let recs = f1_records();
        let tpl = f1_template();
        assert_eq!(
            side_of(&recs[0], &recs[1], &tpl, &x("1")).unwrap(),
            Side::Above
        );
        assert_eq!(
            side_of(&recs[0], &recs[1], &tpl, &x("0")).unwrap(),
            Side::Below
        );
        let twin = Record::new(5, recs[0].attrs.clone());
        for v in ["-10", "0", "3/7", "10"] {
            assert_eq!(side_of(&recs[0], &twin, &tpl, &x(v)).unwrap(), Side::Above);
        }
    }

    #[test]
    fn split_tests_on_fixture() {
        let recs = f1_records();
        let tpl = f1_template();
        let i12 = Intersection::between(&recs[0], &recs[1], &tpl).unwrap();
        let whole = SubdomainRegion::whole(f1_domain());
        assert!(region_is_split_by(&whole, &i12));

        // {x >= 5}, expressed through f4 - f1 = x - 3 >= 0 is not tight enough; use
        // a dedicated box instead.
        let right = SubdomainRegion::whole(DomainBox::cube(1, s("5"), s("10")).unwrap());
        assert!(!region_is_split_by(&right, &i12));

        let tpl = RankingTemplate::affine(1).unwrap();
        let p = Record::new(1, vec![s("1"), s("0")]);
        let q = Record::new(2, vec![s("1"), s("1")]);
        let parallel = Intersection::between(&p, &q, &tpl).unwrap();
        assert!(!region_is_split_by(&whole, &parallel));
    }

    #[test]
    fn containment_on_leftmost_cell() {
        let recs = f1_records();
        let tpl = f1_template();
        let i12 = Intersection::between(&recs[0], &recs[1], &tpl).unwrap();
        let cell =
            SubdomainRegion::whole(f1_domain()).with_constraint(Constraint::new(i12, Side::Below));
        assert!(region_contains(&cell, &x("0")));
        assert!(!region_contains(&cell, &x("2")));
        let empty = SubdomainRegion::whole(f1_domain());
        assert!(region_contains(&empty, &x("3")));
        assert!(!region_contains(&empty, &x("11")));
    }

    #[test]
    fn sorts_fixture_cells() {
        let recs = f1_records();
        let tpl = f1_template();
        let i12 = Intersection::between(&recs[0], &recs[1], &tpl).unwrap();
        let whole = SubdomainRegion::whole(f1_domain());
        // Leftmost cell (-10, 1): witness anywhere inside gives f3, f2, f1, f4.
        let i13 = Intersection::between(&recs[0], &recs[2], &tpl).unwrap();
        let left = whole
            .with_constraint(Constraint::new(i12.clone(), Side::Below))
            .with_constraint(Constraint::new(i13.clone(), Side::Below));
        assert_eq!(
            sort_for_region(&left, &recs, &tpl).unwrap(),
            vec![3, 2, 1, 4]
        );
        // Cell containing 1.2 is [1, 4/3): above I12, below I13 (crossing at 4/3).
        let mid = whole
            .with_constraint(Constraint::new(i12.clone(), Side::Above))
            .with_constraint(Constraint::new(i13, Side::Below));
        assert_eq!(
            sort_for_region(&mid, &recs, &tpl).unwrap(),
            vec![3, 1, 2, 4]
        );
        assert_eq!(sort_for_region(&whole, &recs[..1], &tpl).unwrap(), vec![1]);
        // Both sides of I12 at once is empty.
        let none = whole
            .with_constraint(Constraint::new(i12.clone(), Side::Above))
            .with_constraint(Constraint::new(i12, Side::Below));
        assert_eq!(
            sort_for_region(&none, &recs, &tpl),
            Err(RankingError::InfeasibleRegion)
        );
    }

    #[test]
    fn domain_box_validation() {
        assert!(DomainBox::new(vec![(s("1"), s("0"))]).is_err());
        assert!(DomainBox::new(vec![]).is_err());
        let b = DomainBox::new(vec![(s("1"), s("1"))]).unwrap();
        assert!(!b.has_interior());
    }
}
