//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test -p ifmh-core --test acceptance`; the report lines are
//! printed even without `--nocapture`.

use std::collections::HashMap;
use std::io::Write;
use std::sync::OnceLock;

use ifmh_core::adversary::{tamper, tamper_mesh, TamperError, TamperMode};
use ifmh_core::authenticator::{
    audit, authenticate_tree, AuthOptions, DigestMode, SignMode, SignedTree,
};
use ifmh_core::bench::{run_bench, BenchConfig, BenchReport, Scheme};
use ifmh_core::dataset::{generate_dataset, sample_input, Dataset};
use ifmh_core::itree::build_itree;
use ifmh_core::mesh::{build_mesh_from_tree, mesh_answer, mesh_verify, MeshParams};
use ifmh_core::query::{Query, QueryKind};
use ifmh_core::ranking::{region_contains, FunctionInput, Record};
use ifmh_core::scalar::Scalar;
use ifmh_core::server::answer;
use ifmh_core::sign::{SignatureScheme, SigningKey};
use ifmh_core::verifier::{verify, ClientParams, RejectReason, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Writes to the stderr handle directly so the line survives test output capture.
fn report(n: u32, name: &str, ok: bool, detail: &str) {
    let line = format!(
        "criterion {n} [{name}]: {} ({detail})\n",
        if ok { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {n} failed: {detail}");
}

fn key() -> SigningKey {
    SigningKey::generate(SignatureScheme::Ed25519, 2024).unwrap()
}

/// Score computed without the library: `sum a_t x_t + a_{d}`.
fn oracle_score(r: &Record, x: &FunctionInput) -> Scalar {
    let d = x.dim();
    let mut s = r.attrs[d].clone();
    for t in 0..d {
        s = s + r.attrs[t].clone() * x.values()[t].clone();
    }
    s
}

/// Brute-force answer as ids in ascending list order (score asc, id desc).
fn oracle(records: &[Record], q: &Query) -> Vec<u64> {
    let mut all: Vec<(Scalar, u64)> = records
        .iter()
        .map(|r| (oracle_score(r, q.input()), r.id))
        .collect();
    all.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let picked: Vec<(Scalar, u64)> = match q {
        Query::TopK { k, .. } => all[all.len().saturating_sub(*k)..].to_vec(),
        Query::Range { lo, hi, .. } => all
            .into_iter()
            .filter(|(s, _)| lo <= s && s <= hi)
            .collect(),
        Query::Knn { k, y, .. } => {
            let mut by_dist = all.clone();
            by_dist.sort_by(|a, b| {
                (a.0.clone() - y.clone())
                    .abs()
                    .cmp(&(b.0.clone() - y.clone()).abs())
                    .then(a.0.cmp(&b.0))
            });
            by_dist.truncate(*k);
            by_dist.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
            by_dist
        }
    };
    picked.into_iter().map(|(_, id)| id).collect()
}

fn ids(rs: &[Record]) -> Vec<u64> {
    rs.iter().map(|r| r.id).collect()
}

fn random_query(ds: &Dataset, kind: QueryKind, rng: &mut ChaCha20Rng) -> Query {
    let x = sample_input(ds.d(), rng);
    let n = ds.n();
    let score = |rng: &mut ChaCha20Rng| oracle_score(&ds.records[rng.gen_range(0..n)], &x);
    let jitter = |rng: &mut ChaCha20Rng| Scalar::ratio(rng.gen_range(-20..=20), 8).unwrap();
    match kind {
        QueryKind::TopK => Query::top_k(x.clone(), rng.gen_range(1..=n + 2)).unwrap(),
        QueryKind::Range => {
            let a = score(rng) + jitter(rng);
            let b = score(rng) + jitter(rng);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            Query::range(x.clone(), lo, hi).unwrap()
        }
        QueryKind::Knn => {
            let y = score(rng) + jitter(rng);
            Query::knn(x.clone(), rng.gen_range(1..=n + 2), y).unwrap()
        }
    }
}

struct Schemes {
    one: SignedTree,
    multi: SignedTree,
    mesh: ifmh_core::mesh::Mesh,
}

fn build_schemes(ds: &Dataset, digest_mode: DigestMode) -> Schemes {
    let tree = build_itree(ds.records.clone(), ds.template, ds.domain.clone()).unwrap();
    let k = key();
    let sign =
        |mode| authenticate_tree(tree.clone(), AuthOptions { mode, digest_mode }, &k).unwrap();
    Schemes {
        one: sign(SignMode::OneSignature),
        multi: sign(SignMode::MultiSignature),
        mesh: build_mesh_from_tree(&tree, &k),
    }
}

#[test]
fn criterion_1_correctness_oracle() {
    let mut dbs: Vec<(usize, usize)> = (0..25).map(|i| (1, 8 * (i + 1))).collect();
    dbs.extend((0..25).map(|i| (2, 3 + i % 13)));
    let per_db = 20;
    let mut checked: HashMap<&str, usize> = HashMap::new();
    let mut mismatches = Vec::new();
    for (i, &(d, n)) in dbs.iter().enumerate() {
        let ds = generate_dataset(n, d, 1000 + i as u64).unwrap();
        let s = build_schemes(&ds, DigestMode::RoutingBound);
        let mut rng = ChaCha20Rng::seed_from_u64(i as u64);
        for kind in QueryKind::ALL {
            for _ in 0..per_db {
                let q = random_query(&ds, kind, &mut rng);
                let want = oracle(&ds.records, &q);
                let got = [
                    ("one", ids(&answer(&s.one, &q).unwrap().0.result)),
                    ("multi", ids(&answer(&s.multi, &q).unwrap().0.result)),
                    ("mesh", ids(&mesh_answer(&s.mesh, &q).unwrap().0.result)),
                ];
                for (scheme, g) in got {
                    *checked.entry(kind.name()).or_default() += 1;
                    if g != want {
                        mismatches.push(format!("db {i} {scheme} {q:?}: got {g:?} want {want:?}"));
                    }
                }
            }
        }
    }
    let per_type = dbs.len() * per_db;
    let detail = format!(
        "{} databases, {per_type} queries per type on each of 3 schemes, {} mismatches{}",
        dbs.len(),
        mismatches.len(),
        mismatches
            .first()
            .map(|m| format!("; first: {m}"))
            .unwrap_or_default()
    );
    report(
        1,
        "correctness oracle",
        mismatches.is_empty() && per_type >= 1000,
        &detail,
    );
}

#[test]
fn criterion_2_security_round_trip() {
    let dbs = [(1, 12, 1u64), (1, 30, 2), (2, 7, 3), (2, 10, 4)];
    let (mut trials, mut honest, mut skipped) = (0usize, 0usize, 0usize);
    let mut failures = Vec::new();
    for &(d, n, seed) in &dbs {
        let ds = generate_dataset(n, d, 500 + seed).unwrap();
        for digest_mode in [DigestMode::RoutingBound, DigestMode::ChildrenOnly] {
            let s = build_schemes(&ds, digest_mode);
            let vk = key().verifying_key();
            let params = |mode| ClientParams {
                template: ds.template,
                domain: ds.domain.clone(),
                mode,
                digest_mode,
                key: vk.clone(),
            };
            let mparams = MeshParams {
                template: ds.template,
                domain: ds.domain.clone(),
                key: vk.clone(),
            };
            let mut rng = ChaCha20Rng::seed_from_u64(seed * 31 + digest_mode as u64);
            for kind in QueryKind::ALL {
                for rep in 0..6u64 {
                    let x = sample_input(d, &mut rng);
                    let k = rng.gen_range(3..=n.min(6));
                    let q = match kind {
                        QueryKind::TopK => Query::top_k(x, k).unwrap(),
                        QueryKind::Knn => {
                            let y = oracle_score(&ds.records[rng.gen_range(0..n)], &x);
                            Query::knn(x, k, y).unwrap()
                        }
                        QueryKind::Range => {
                            let mut sc: Vec<Scalar> =
                                ds.records.iter().map(|r| oracle_score(r, &x)).collect();
                            sc.sort();
                            let a = rng.gen_range(0..=n - k);
                            Query::range(x, sc[a].clone(), sc[a + k - 1].clone()).unwrap()
                        }
                    };
                    let tseed = seed * 1000 + rep;
                    for (label, tree, mode) in [
                        ("one", &s.one, SignMode::OneSignature),
                        ("multi", &s.multi, SignMode::MultiSignature),
                    ] {
                        let p = params(mode);
                        let (resp, _) = answer(tree, &q).unwrap();
                        let v = verify(&q, &resp, &p).0;
                        honest += 1;
                        if !v.accepted {
                            failures.push(format!("honest {label} rejected: {v}"));
                        }
                        for m in TamperMode::ALL {
                            let strict_swap = digest_mode == DigestMode::ChildrenOnly
                                && mode == SignMode::OneSignature
                                && m == TamperMode::SwapSubdomainProof;
                            let t = match tamper(tree, &q, &resp, m, tseed) {
                                Ok(t) => t,
                                Err(TamperError::Inapplicable { .. }) => {
                                    skipped += 1;
                                    continue;
                                }
                                Err(e) => panic!("{e}"),
                            };
                            if strict_swap {
                                continue;
                            }
                            let want = match (m, mode) {
                                (TamperMode::DropInterior, _) => {
                                    let e = t.expected.unwrap();
                                    assert!(matches!(
                                        e,
                                        RejectReason::SignatureMismatch | RejectReason::MalformedVO
                                    ));
                                    e
                                }
                                (TamperMode::ForgeBoundary | TamperMode::ModifyRecord, _) => {
                                    RejectReason::SignatureMismatch
                                }
                                (TamperMode::TruncateTail, _) => RejectReason::ReExecutionMismatch,
                                (TamperMode::SwapSubdomainProof, SignMode::OneSignature) => {
                                    RejectReason::SignatureMismatch
                                }
                                (TamperMode::SwapSubdomainProof, SignMode::MultiSignature) => {
                                    RejectReason::ContainmentFail
                                }
                            };
                            trials += 1;
                            let v = verify(&q, &t.response, &p).0;
                            if v != Verdict::reject(want) {
                                failures.push(format!("{label} {m} {q:?}: {v}, want {want}"));
                            }
                        }
                    }
                    let (mresp, _) = mesh_answer(&s.mesh, &q).unwrap();
                    honest += 1;
                    let v = mesh_verify(&q, &mresp, &mparams).0;
                    if !v.accepted {
                        failures.push(format!("honest mesh rejected: {v}"));
                    }
                    for m in TamperMode::ALL {
                        let t = match tamper_mesh(&s.mesh, &q, &mresp, m, tseed) {
                            Ok(t) => t,
                            Err(TamperError::Inapplicable { .. }) => {
                                skipped += 1;
                                continue;
                            }
                            Err(e) => panic!("{e}"),
                        };
                        let want = match m {
                            TamperMode::DropInterior
                            | TamperMode::ForgeBoundary
                            | TamperMode::ModifyRecord => RejectReason::SignatureMismatch,
                            TamperMode::TruncateTail => RejectReason::ReExecutionMismatch,
                            TamperMode::SwapSubdomainProof => RejectReason::ContainmentFail,
                        };
                        trials += 1;
                        let v = mesh_verify(&q, &t.response, &mparams).0;
                        if v != Verdict::reject(want) {
                            failures.push(format!("mesh {m} {q:?}: {v}, want {want}"));
                        }
                    }
                }
            }
        }
    }
    let detail =
        format!(
        "{honest} honest responses, {trials} tamper trials, {skipped} inapplicable, {} failures{}",
        failures.len(),
        failures.first().map(|m| format!("; first: {m}")).unwrap_or_default()
    );
    report(
        2,
        "security round-trip",
        failures.is_empty() && trials >= 1000,
        &detail,
    );
}

fn signature_bench() -> &'static BenchReport {
    static REPORT: OnceLock<BenchReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let cfg = BenchConfig::from_toml(
            r#"
        seed = 7
        queries_per_row = 100
        query_types = ["topk"]
        [[grid]]
        d = 1
        n = [25, 50, 100, 200]
        q = [3]
        [[grid]]
        d = 2
        n = [8, 12, 15]
        q = [3]
        "#,
        )
        .unwrap();
        run_bench(&cfg).unwrap()
    })
}

#[test]
fn criterion_3_signature_counts() {
    let rep = signature_bench();
    let mut bad = Vec::new();
    for r in &rep.rows {
        let ok = match r.scheme.as_str() {
            "one" => r.signatures_total == 1,
            "multi" => r.signatures_total == r.leaf_count,
            _ => r.signatures_total >= r.leaf_count,
        };
        if !ok {
            bad.push(format!("{} n={} d={}", r.scheme, r.n, r.d));
        }
    }
    let ns = [25, 50, 100, 200];
    let ratio = |n, unmerged: bool| {
        let m = rep.find(Scheme::Mesh, n, 1, QueryKind::TopK, 3).unwrap();
        let s = rep
            .find(Scheme::MultiSignature, n, 1, QueryKind::TopK, 3)
            .unwrap();
        let total = if unmerged {
            m.signatures_unmerged
        } else {
            m.signatures_total
        };
        total as f64 / s.signatures_total as f64
    };
    let merged: Vec<f64> = ns.iter().map(|&n| ratio(n, false)).collect();
    let unmerged: Vec<f64> = ns.iter().map(|&n| ratio(n, true)).collect();
    let grows = merged.windows(2).all(|w| w[1] > w[0]);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|r| format!("{r:.3}"))
            .collect::<Vec<_>>()
            .join(" -> ")
    };
    let detail = format!(
        "count rules violated on {} rows; d=1 mesh/multi ratio over n={ns:?}: {} (unmerged upper bound {})",
        bad.len(),
        fmt(&merged),
        fmt(&unmerged)
    );
    report(3, "signature counts", bad.is_empty() && grows, &detail);
}

#[test]
fn criterion_4_server_cost_trend() {
    let rep = signature_bench();
    let ns = [25, 50, 100, 200];
    let nodes = |s, n| {
        rep.find(s, n, 1, QueryKind::TopK, 3)
            .unwrap()
            .server_nodes_visited
    };
    let mut lines = Vec::new();
    let mut ok = true;
    for w in ns.windows(2) {
        let mesh = nodes(Scheme::Mesh, w[1]) / nodes(Scheme::Mesh, w[0]);
        let one = nodes(Scheme::OneSignature, w[1]) / nodes(Scheme::OneSignature, w[0]);
        let multi = nodes(Scheme::MultiSignature, w[1]) / nodes(Scheme::MultiSignature, w[0]);
        ok &= mesh >= 3.0 && one <= 1.5 && multi <= 1.5;
        lines.push(format!(
            "n {}->{}: mesh x{mesh:.2}, one x{one:.2}, multi x{multi:.2}",
            w[0], w[1]
        ));
    }
    let mut order_bad = 0;
    for r in rep.rows_for(Scheme::Mesh) {
        let get = |s| {
            rep.find(s, r.n, r.d, QueryKind::TopK, r.q)
                .unwrap()
                .server_nodes_visited
        };
        let (m, o, s) = (
            r.server_nodes_visited,
            get(Scheme::OneSignature),
            get(Scheme::MultiSignature),
        );
        if !(m > o && o >= s) {
            order_bad += 1;
        }
    }
    ok &= order_bad == 0;
    report(
        4,
        "server-cost trend",
        ok,
        &format!(
            "{}; ordering violated on {order_bad} rows",
            lines.join("; ")
        ),
    );
}

fn vo_bench() -> &'static BenchReport {
    static REPORT: OnceLock<BenchReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let cfg = BenchConfig::from_toml(
            r#"
        seed = 9
        queries_per_row = 25
        signer = "rsa3072"
        [[grid]]
        d = 1
        n = [50]
        q = [5, 10, 20, 40]
        "#,
        )
        .unwrap();
        run_bench(&cfg).unwrap()
    })
}

#[test]
fn criterion_5_vo_size_trend() {
    let rep = vo_bench();
    let qs = [5, 10, 20, 40];
    let mut ok = true;
    let mut lines = Vec::new();
    for kind in QueryKind::ALL {
        let vo = |s, q| rep.find(s, 50, 1, kind, q).unwrap().vo_bytes;
        let mut parts = Vec::new();
        for w in qs.windows(2) {
            let mesh = vo(Scheme::Mesh, w[1]) / vo(Scheme::Mesh, w[0]);
            let one = vo(Scheme::OneSignature, w[1]) / vo(Scheme::OneSignature, w[0]);
            let multi = vo(Scheme::MultiSignature, w[1]) / vo(Scheme::MultiSignature, w[0]);
            ok &= mesh >= 1.8 && one <= 1.2 && multi <= 1.2;
            parts.push(format!(
                "{}->{} mesh x{mesh:.2} one x{one:.2} multi x{multi:.2}",
                w[0], w[1]
            ));
        }
        for &q in &qs {
            ok &= vo(Scheme::OneSignature, q) >= vo(Scheme::MultiSignature, q);
        }
        lines.push(format!("{}: {}", kind.name(), parts.join(", ")));
    }
    report(5, "VO-size trend", ok, &lines.join("; "));
}

#[test]
fn criterion_6_verifier_cost() {
    let mut bad = Vec::new();
    let mut rows = 0;
    for rep in [signature_bench(), vo_bench()] {
        for r in rep.rows.iter() {
            rows += 1;
            let want = if r.scheme == "mesh" {
                r.q as u64 + 1
            } else {
                1
            };
            if r.verifier_sig_ops_min != want
                || r.verifier_sig_ops_max != want
                || r.result_size != r.q as f64
            {
                bad.push(format!("{} n={} {} q={}", r.scheme, r.n, r.query_type, r.q));
            }
        }
    }
    let detail = format!(
        "{rows} rows, {} violations{}",
        bad.len(),
        bad.first()
            .map(|b| format!("; first: {b}"))
            .unwrap_or_default()
    );
    report(6, "verifier cost", bad.is_empty(), &detail);
}

#[test]
fn criterion_7_structural_invariants() {
    let mut dbs: Vec<(usize, usize)> = (0..10).map(|i| (1, 6 * (i + 1))).collect();
    dbs.extend((0..10).map(|i| (2, 3 + i % 8)));
    let mut problems = Vec::new();
    let k = key();
    for (i, &(d, n)) in dbs.iter().enumerate() {
        let ds = generate_dataset(n, d, 7000 + i as u64).unwrap();
        let tree = build_itree(ds.records.clone(), ds.template, ds.domain.clone()).unwrap();
        let again = build_itree(ds.records.clone(), ds.template, ds.domain.clone()).unwrap();
        if !tree.same_structure(&again) {
            problems.push(format!("db {i}: rebuild differs"));
        }
        for mode in [SignMode::OneSignature, SignMode::MultiSignature] {
            let a = authenticate_tree(tree.clone(), AuthOptions::new(mode), &k).unwrap();
            let b = authenticate_tree(again.clone(), AuthOptions::new(mode), &k).unwrap();
            if a.root_digest() != b.root_digest() {
                problems.push(format!(
                    "db {i} {mode:?}: root digest differs between builds"
                ));
            }
            if let Err(e) = audit(&a, Some(&k.verifying_key())) {
                problems.push(format!("db {i} {mode:?}: audit failed: {e}"));
            }
        }
        let mut rng = ChaCha20Rng::seed_from_u64(i as u64);
        let leaves = tree.leaves();
        for _ in 0..40 {
            let x = sample_input(d, &mut rng);
            let containing: Vec<_> = leaves
                .iter()
                .filter(|&&l| region_contains(&tree.leaf(l).region, &x))
                .copied()
                .collect();
            if containing.len() != 1 {
                problems.push(format!(
                    "db {i}: {} regions contain {x:?}",
                    containing.len()
                ));
                continue;
            }
            if tree.locate(&x).unwrap() != containing[0] {
                problems.push(format!("db {i}: search disagrees with partition"));
            }
            // Sortability: the brute-force order at x is the leaf's order.
            let mut by_score: Vec<(Scalar, u64)> = ds
                .records
                .iter()
                .map(|r| (oracle_score(r, &x), r.id))
                .collect();
            by_score.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            let want: Vec<u64> = by_score.into_iter().map(|(_, id)| id).collect();
            if tree.leaf(containing[0]).order != want {
                problems.push(format!("db {i}: leaf order differs from ranking at {x:?}"));
            }
        }
    }
    let detail = format!(
        "{} databases; {} problems{}",
        dbs.len(),
        problems.len(),
        problems
            .first()
            .map(|p| format!("; first: {p}"))
            .unwrap_or_default()
    );
    report(7, "structural invariants", problems.is_empty(), &detail);
}
