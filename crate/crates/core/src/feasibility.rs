//! Exact interior-feasibility tests for subdomain regions.
//!
//! One variable is handled with exact interval arithmetic. Higher dimensions
//! maximize a uniform slack `t` over all strict constraints with a rational
//! simplex: the interior is nonempty iff the optimum is positive, and the
//! optimal point is then an interior witness.

use crate::ranking::{LinearForm, SubdomainRegion};
use crate::scalar::Scalar;

/// A point strictly inside `region`, if any.
pub(crate) fn interior_point(region: &SubdomainRegion) -> Option<Vec<Scalar>> {
    let forms = strict_forms(region, None)?;
    if region.domain.dim() == 1 {
        let (lo, hi) = open_interval(region, &forms)?;
        return Some(vec![lo.midpoint(&hi)]);
    }
    max_slack_point(region, &forms)
}

/// True iff `plane` is strictly positive somewhere and strictly negative
/// somewhere in the interior of `region`.
pub(crate) fn is_split_by(region: &SubdomainRegion, plane: &LinearForm) -> bool {
    if plane.is_constant() {
        return false;
    }
    if region.domain.dim() == 1 {
        let Some(forms) = strict_forms(region, None) else {
            return false;
        };
        let Some((lo, hi)) = open_interval(region, &forms) else {
            return false;
        };
        let root = -&plane.offset / &plane.weights[0];
        return lo < root && root < hi;
    }
    let pos = plane.clone();
    let neg = plane.negated();
    let Some(pos_forms) = strict_forms(region, Some(&pos)) else {
        return false;
    };
    if max_slack_point(region, &pos_forms).is_none() {
        return false;
    }
    let Some(neg_forms) = strict_forms(region, Some(&neg)) else {
        return false;
    };
    max_slack_point(region, &neg_forms).is_some()
}

/// Forms that must be strictly positive on the interior, after discarding
/// constant constraints. `None` when a constant constraint already empties it.
fn strict_forms(region: &SubdomainRegion, extra: Option<&LinearForm>) -> Option<Vec<LinearForm>> {
    let mut forms = Vec::with_capacity(region.constraints.len() + 1);
    for c in &region.constraints {
        let plane = &c.intersection.plane;
        if plane.is_constant() {
            // Closed half-space `>= 0` with a constant form is all-or-nothing;
            // the open `< 0` side likewise.
            let ok = match c.side {
                crate::ranking::Side::Above => !plane.offset.is_negative(),
                crate::ranking::Side::Below => plane.offset.is_negative(),
            };
            if !ok {
                return None;
            }
            continue;
        }
        forms.push(c.interior_form());
    }
    if let Some(f) = extra {
        if f.is_constant() {
            if !f.offset.is_positive() {
                return None;
            }
        } else {
            forms.push(f.clone());
        }
    }
    Some(forms)
}

fn open_interval(region: &SubdomainRegion, forms: &[LinearForm]) -> Option<(Scalar, Scalar)> {
    let (mut lo, mut hi) = region.domain.bounds()[0].clone();
    for f in forms {
        let w = &f.weights[0];
        let root = -&f.offset / w;
        if w.is_positive() {
            if root > lo {
                lo = root;
            }
        } else if root < hi {
            hi = root;
        }
    }
    (lo < hi).then_some((lo, hi))
}

fn max_slack_point(region: &SubdomainRegion, forms: &[LinearForm]) -> Option<Vec<Scalar>> {
    let d = region.domain.dim();
    let bounds = region.domain.bounds();
    if !region.domain.has_interior() {
        return None;
    }
    // Variables: y_0..y_{d-1} (x = lo + y), then t. All rows are `a . z <= b`.
    let n = d + 1;
    let mut a: Vec<Vec<Scalar>> = Vec::new();
    let mut b: Vec<Scalar> = Vec::new();
    for f in forms {
        // w.(lo + y) + c - t >= 0  =>  -w.y + t <= w.lo + c
        let mut row: Vec<Scalar> = f.weights.iter().map(|w| -w).collect();
        row.push(Scalar::one());
        let lo: Vec<Scalar> = bounds.iter().map(|(l, _)| l.clone()).collect();
        b.push(f.eval(&lo));
        a.push(row);
    }
    for (k, (lo, hi)) in bounds.iter().enumerate() {
        let mut upper = vec![Scalar::zero(); n];
        upper[k] = Scalar::one();
        upper[d] = Scalar::one();
        a.push(upper);
        b.push(hi - lo);
        let mut lower = vec![Scalar::zero(); n];
        lower[k] = -Scalar::one();
        lower[d] = Scalar::one();
        a.push(lower);
        b.push(Scalar::zero());
    }
    let mut cap = vec![Scalar::zero(); n];
    cap[d] = Scalar::one();
    a.push(cap);
    b.push(Scalar::one());

    let mut c = vec![Scalar::zero(); n];
    c[d] = Scalar::one();
    match lp::maximize(&c, &a, &b) {
        lp::Outcome::Optimal { value, point } if value.is_positive() => Some(
            bounds
                .iter()
                .zip(&point)
                .map(|((lo, _), y)| lo + y)
                .collect(),
        ),
        _ => None,
    }
}

/// Dense two-phase simplex over exact rationals with Bland's rule.
pub(crate) mod lp {
    use crate::scalar::Scalar;

    #[derive(Debug, Clone, PartialEq)]
    pub enum Outcome {
        Infeasible,
        Unbounded,
        Optimal { value: Scalar, point: Vec<Scalar> },
    }

    struct Tableau {
        rows: Vec<Vec<Scalar>>,
        rhs: Vec<Scalar>,
        basis: Vec<usize>,
        cost: Vec<Scalar>,
        value: Scalar,
        enabled: Vec<bool>,
    }

    impl Tableau {
        fn pivot(&mut self, l: usize, e: usize) {
            let p = self.rows[l][e].clone();
            for v in self.rows[l].iter_mut() {
                if !v.is_zero() {
                    *v = &*v / &p;
                }
            }
            self.rhs[l] = &self.rhs[l] / &p;
            let pivot_row = self.rows[l].clone();
            let pivot_rhs = self.rhs[l].clone();
            for i in 0..self.rows.len() {
                if i == l {
                    continue;
                }
                let f = self.rows[i][e].clone();
                if f.is_zero() {
                    continue;
                }
                for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                    if !pv.is_zero() {
                        *v = &*v - &(&f * pv);
                    }
                }
                self.rhs[i] = &self.rhs[i] - &(&f * &pivot_rhs);
            }
            let f = self.cost[e].clone();
            if !f.is_zero() {
                for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                    if !pv.is_zero() {
                        *v = &*v - &(&f * pv);
                    }
                }
                self.value = &self.value + &(&f * &pivot_rhs);
            }
            self.basis[l] = e;
        }

        /// Returns false when unbounded.
        fn run(&mut self) -> bool {
            loop {
                let entering =
                    (0..self.cost.len()).find(|&j| self.enabled[j] && self.cost[j].is_positive());
                let Some(e) = entering else { return true };
                let mut best: Option<(usize, Scalar)> = None;
                for i in 0..self.rows.len() {
                    let coef = &self.rows[i][e];
                    if !coef.is_positive() {
                        continue;
                    }
                    let ratio = &self.rhs[i] / coef;
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => {
                            ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi])
                        }
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
                let Some((l, _)) = best else { return false };
                self.pivot(l, e);
            }
        }

        fn reset_cost(&mut self, c: &[Scalar]) {
            let width = self.cost.len();
            let coeff = |j: usize| c.get(j).cloned().unwrap_or_else(Scalar::zero);
            let mut cost: Vec<Scalar> = (0..width).map(coeff).collect();
            let mut value = Scalar::zero();
            for (i, &bv) in self.basis.iter().enumerate() {
                let cb = coeff(bv);
                if cb.is_zero() {
                    continue;
                }
                for (j, v) in cost.iter_mut().enumerate() {
                    let a = &self.rows[i][j];
                    if !a.is_zero() {
                        *v = &*v - &(&cb * a);
                    }
                }
                value = value + &cb * &self.rhs[i];
            }
            self.cost = cost;
            self.value = value;
        }
    }

    /// Maximize `c . z` subject to `a z <= b`, `z >= 0`.
    pub fn maximize(c: &[Scalar], a: &[Vec<Scalar>], b: &[Scalar]) -> Outcome {
        let n = c.len();
        let m = a.len();
        let negative_rows: Vec<usize> = (0..m).filter(|&i| b[i].is_negative()).collect();
        let art = negative_rows.len();
        let width = n + m + art;
        let mut rows = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut next_art = n + m;
        for i in 0..m {
            let mut row = vec![Scalar::zero(); width];
            row[..n].clone_from_slice(&a[i]);
            row[n + i] = Scalar::one();
            if b[i].is_negative() {
                for v in row.iter_mut() {
                    *v = -&*v;
                }
                row[next_art] = Scalar::one();
                basis.push(next_art);
                next_art += 1;
                rhs.push(-&b[i]);
            } else {
                basis.push(n + i);
                rhs.push(b[i].clone());
            }
            rows.push(row);
        }
        let mut t = Tableau {
            rows,
            rhs,
            basis,
            cost: vec![Scalar::zero(); width],
            value: Scalar::zero(),
            enabled: vec![true; width],
        };

        if art > 0 {
            let mut phase1 = vec![Scalar::zero(); width];
            for v in phase1.iter_mut().skip(n + m) {
                *v = -Scalar::one();
            }
            t.reset_cost(&phase1);
            t.run();
            if t.value.is_negative() {
                return Outcome::Infeasible;
            }
            // Drive zero-valued artificials out of the basis.
            let mut i = 0;
            while i < t.rows.len() {
                if t.basis[i] >= n + m {
                    match (0..n + m).find(|&j| !t.rows[i][j].is_zero()) {
                        Some(j) => {
                            t.pivot(i, j);
                            i += 1;
                        }
                        None => {
                            t.rows.remove(i);
                            t.rhs.remove(i);
                            t.basis.remove(i);
                        }
                    }
                } else {
                    i += 1;
                }
            }
            for j in n + m..width {
                t.enabled[j] = false;
            }
        }

        t.reset_cost(c);
        if !t.run() {
            return Outcome::Unbounded;
        }
        let mut point = vec![Scalar::zero(); n];
        for (i, &bv) in t.basis.iter().enumerate() {
            if bv < n {
                point[bv] = t.rhs[i].clone();
            }
        }
        Outcome::Optimal {
            value: t.value,
            point,
        }
    }
}
