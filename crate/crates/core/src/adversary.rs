//! Seeded tampering of honest responses, for detection testing.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::authenticator::{DigestMode, SignMode, SignedTree};
use crate::fmh::fold_range;
use crate::hash::{CountingHasher, Digest, Sha256Provider};
use crate::mesh::{find_cell, mesh_answer, mesh_build_vo, Mesh, MeshError, MeshResponse};
use crate::query::{Query, Window};
use crate::ranking::{region_contains, FunctionInput, LinearForm, RankingTemplate, Record, Side};
use crate::scalar::Scalar;
use crate::server::{
    answer, build_vo, find_subdomain_with_trace, Boundary, CostCounters, Response, ServerError,
    SubdomainProof,
};
use crate::verifier::{re_execute, RejectReason};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TamperMode {
    DropInterior,
    ForgeBoundary,
    ModifyRecord,
    SwapSubdomainProof,
    TruncateTail,
}

impl TamperMode {
    pub const ALL: [TamperMode; 5] = [
        TamperMode::DropInterior,
        TamperMode::ForgeBoundary,
        TamperMode::ModifyRecord,
        TamperMode::SwapSubdomainProof,
        TamperMode::TruncateTail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TamperMode::DropInterior => "drop-interior",
            TamperMode::ForgeBoundary => "forge-boundary",
            TamperMode::ModifyRecord => "modify-record",
            TamperMode::SwapSubdomainProof => "swap-subdomain-proof",
            TamperMode::TruncateTail => "truncate-tail",
        }
    }
}

impl fmt::Display for TamperMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TamperMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        TamperMode::ALL
            .into_iter()
            .find(|m| m.name() == norm || m.name().replace('-', "") == norm)
            .ok_or_else(|| format!("unknown tamper mode {s:?}"))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TamperError {
    #[error("{mode} does not apply: {why}")]
    Inapplicable { mode: TamperMode, why: &'static str },
    #[error(transparent)]
    Server(#[from] ServerError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// A tampered response and the rejection it should draw, or `None` for a
/// known miss.
#[derive(Clone, Debug)]
pub struct Tampered<T> {
    pub response: T,
    pub expected: Option<RejectReason>,
}

fn rng_for(mode: TamperMode, seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed ^ ((mode as u64 + 1) << 56))
}

fn inapplicable<T>(mode: TamperMode, why: &'static str) -> Result<T, TamperError> {
    Err(TamperError::Inapplicable { mode, why })
}

/// The same query at another input.
pub fn retarget(query: &Query, x: FunctionInput) -> Query {
    match query {
        Query::TopK { k, .. } => Query::TopK { x, k: *k },
        Query::Range { lo, hi, .. } => Query::Range {
            x,
            lo: lo.clone(),
            hi: hi.clone(),
        },
        Query::Knn { k, y, .. } => Query::Knn {
            x,
            k: *k,
            y: y.clone(),
        },
    }
}

fn drop_interior(result: &mut Vec<Record>, rng: &mut ChaCha20Rng) -> Result<(), TamperError> {
    if result.len() < 3 {
        return inapplicable(TamperMode::DropInterior, "needs at least 3 records");
    }
    let i = rng.gen_range(1..result.len() - 1);
    result.remove(i);
    Ok(())
}

fn modify_record(result: &mut [Record], rng: &mut ChaCha20Rng) -> Result<(), TamperError> {
    if result.is_empty() {
        return inapplicable(TamperMode::ModifyRecord, "empty result");
    }
    let i = rng.gen_range(0..result.len());
    let t = rng.gen_range(0..result[i].attrs.len());
    let mag = rng.gen_range(1..=16i64);
    let delta = Scalar::ratio(if rng.gen() { mag } else { -mag }, 16).expect("nonzero denominator");
    result[i].attrs[t] = result[i].attrs[t].clone() + delta;
    Ok(())
}

/// A record scoring far below (or above) `like` at `x`.
fn fabricate(
    like: &Record,
    tpl: &RankingTemplate,
    x: &[Scalar],
    below: bool,
    rng: &mut ChaCha20Rng,
) -> Record {
    let shift = Scalar::from_int(1000 + rng.gen_range(0..1000i64));
    let shift = if below { -shift } else { shift };
    let mut attrs = like.attrs.clone();
    if tpl.has_intercept() {
        let last = attrs.len() - 1;
        attrs[last] = attrs[last].clone() + shift;
    } else {
        for (a, xi) in attrs.iter_mut().zip(x) {
            *a = a.clone() + shift.clone() * xi.clone();
        }
    }
    Record::new(u64::MAX - rng.gen_range(0..1u64 << 20), attrs)
}

fn forge_boundary(
    result: &[Record],
    lower: &mut Boundary,
    upper: &mut Boundary,
    tpl: &RankingTemplate,
    x: &[Scalar],
    rng: &mut ChaCha20Rng,
) -> Result<(), TamperError> {
    let forge_lower = match (&*lower, &*upper) {
        (Boundary::Record(_), Boundary::Record(_)) => rng.gen(),
        (Boundary::Record(_), _) => true,
        (_, Boundary::Record(_)) => false,
        _ => true,
    };
    let like = if forge_lower {
        lower.record().or(result.first()).or(upper.record())
    } else {
        upper.record().or(result.last()).or(lower.record())
    };
    let Some(like) = like.cloned() else {
        return inapplicable(TamperMode::ForgeBoundary, "no record to imitate");
    };
    let fake = Boundary::Record(fabricate(&like, tpl, x, forge_lower, rng));
    if forge_lower {
        *lower = fake;
    } else {
        *upper = fake;
    }
    Ok(())
}

fn truncate_len(len: usize, rng: &mut ChaCha20Rng) -> Result<usize, TamperError> {
    if len < 2 {
        return inapplicable(TamperMode::TruncateTail, "needs at least 2 records");
    }
    Ok(rng.gen_range(1..len))
}

/// True when the verifier can fold `n` leaves against the VO's co-path.
fn fold_shape_ok(resp: &Response, n: usize) -> bool {
    let h = CountingHasher::new(&Sha256Provider);
    let leaves = vec![Digest::INVALID; n];
    fold_range(
        &h,
        resp.vo.fmh.leaf_count as usize,
        resp.vo.fmh.first as usize,
        &leaves,
        &resp.vo.fmh.co_path,
    )
    .is_ok()
}

/// Tampers an honest I-tree response to `query`.
pub fn tamper(
    signed: &SignedTree,
    query: &Query,
    honest: &Response,
    mode: TamperMode,
    seed: u64,
) -> Result<Tampered<Response>, TamperError> {
    let mut rng = rng_for(mode, seed);
    let mut resp = honest.clone();
    let x = query.input();
    let expected = match mode {
        TamperMode::DropInterior => {
            drop_interior(&mut resp.result, &mut rng)?;
            // An inconsistent co-path shape is caught before the signature.
            if fold_shape_ok(&resp, resp.result.len() + 2) {
                Some(RejectReason::SignatureMismatch)
            } else {
                Some(RejectReason::MalformedVO)
            }
        }
        TamperMode::ModifyRecord => {
            modify_record(&mut resp.result, &mut rng)?;
            Some(RejectReason::SignatureMismatch)
        }
        TamperMode::ForgeBoundary => {
            let tpl = signed.tree.template();
            forge_boundary(
                &resp.result,
                &mut resp.vo.lower,
                &mut resp.vo.upper,
                tpl,
                x.values(),
                &mut rng,
            )?;
            Some(RejectReason::SignatureMismatch)
        }
        TamperMode::TruncateTail => {
            let keep = truncate_len(resp.result.len(), &mut rng)?;
            let mut cost = CostCounters::default();
            let (leaf, trace) = find_subdomain_with_trace(signed, x, &mut cost)?;
            let w = Window {
                start: honest.vo.fmh.first as usize,
                len: keep,
            };
            resp = build_vo(signed, leaf, query, w, trace, &mut cost)?;
            Some(RejectReason::ReExecutionMismatch)
        }
        TamperMode::SwapSubdomainProof => {
            let own = signed.tree.locate(x).map_err(ServerError::from)?;
            let mut others: Vec<_> = signed
                .tree
                .leaves()
                .into_iter()
                .filter(|&l| l != own)
                .collect();
            if others.is_empty() {
                return inapplicable(mode, "single subdomain");
            }
            others.shuffle(&mut rng);
            let Some(x2) = others.iter().find_map(|&l| {
                let p = FunctionInput::new(signed.tree.leaf(l).region.interior_point()?);
                (signed.tree.locate(&p).ok()? == l).then_some(p)
            }) else {
                return inapplicable(mode, "no other subdomain has an interior point");
            };
            let (other, _) = answer(signed, &retarget(query, x2))?;
            resp = other;
            resp.vo.query = query.clone();
            match (&mut resp.vo.subdomain, signed.mode) {
                (SubdomainProof::Trace(trace), SignMode::OneSignature) => {
                    // Relabel so every trace step routes the client's input.
                    let dim = x.dim();
                    for e in &mut trace.entries {
                        let offset = match e.side {
                            Side::Above => Scalar::one(),
                            Side::Below => -Scalar::one(),
                        };
                        e.intersection.plane = LinearForm {
                            weights: vec![Scalar::zero(); dim],
                            offset,
                        };
                    }
                    match signed.digest_mode {
                        DigestMode::RoutingBound => Some(RejectReason::SignatureMismatch),
                        // Only re-execution at the client's input is left to catch it.
                        DigestMode::ChildrenOnly => match re_execute(
                            query,
                            &resp.result,
                            &resp.vo.lower,
                            &resp.vo.upper,
                            signed.tree.template(),
                        ) {
                            Ok(true) => None,
                            Ok(false) => Some(RejectReason::ReExecutionMismatch),
                            Err(r) => Some(r),
                        },
                    }
                }
                _ => Some(RejectReason::ContainmentFail),
            }
        }
    };
    Ok(Tampered {
        response: resp,
        expected,
    })
}

/// Tampers an honest mesh response to `query`.
pub fn tamper_mesh(
    mesh: &Mesh,
    query: &Query,
    honest: &MeshResponse,
    mode: TamperMode,
    seed: u64,
) -> Result<Tampered<MeshResponse>, TamperError> {
    let mut rng = rng_for(mode, seed);
    let mut resp = honest.clone();
    let x = query.input();
    let expected = match mode {
        TamperMode::DropInterior => {
            drop_interior(&mut resp.result, &mut rng)?;
            RejectReason::SignatureMismatch
        }
        TamperMode::ModifyRecord => {
            modify_record(&mut resp.result, &mut rng)?;
            RejectReason::SignatureMismatch
        }
        TamperMode::ForgeBoundary => {
            forge_boundary(
                &resp.result,
                &mut resp.vo.lower,
                &mut resp.vo.upper,
                &mesh.template,
                x.values(),
                &mut rng,
            )?;
            RejectReason::SignatureMismatch
        }
        TamperMode::TruncateTail => {
            let keep = truncate_len(resp.result.len(), &mut rng)?;
            let (cell, _) = find_cell(mesh, x).map_err(MeshError::from)?;
            let first = resp.result[0].id;
            let start = mesh.cells[cell]
                .order
                .iter()
                .position(|&id| id == first)
                .expect("honest result is in the cell");
            resp = mesh_build_vo(mesh, cell, Window { start, len: keep });
            RejectReason::ReExecutionMismatch
        }
        TamperMode::SwapSubdomainProof => {
            let (own, _) = find_cell(mesh, x).map_err(MeshError::from)?;
            let mut others: Vec<usize> = (0..mesh.cells.len()).filter(|&c| c != own).collect();
            others.shuffle(&mut rng);
            let found = others.iter().find_map(|&c| {
                let p = FunctionInput::new(mesh.cells[c].region.interior_point()?);
                let (r, _) = mesh_answer(mesh, &retarget(query, p)).ok()?;
                let escapes =
                    r.vo.links
                        .iter()
                        .any(|(ri, _)| !region_contains(&r.vo.regions[*ri as usize], x));
                escapes.then_some(r)
            });
            let Some(r) = found else {
                return inapplicable(mode, "every other cell's chain also covers the input");
            };
            resp = r;
            RejectReason::ContainmentFail
        }
    };
    Ok(Tampered {
        response: resp,
        expected: Some(expected),
    })
}
