//! Counter-based benchmark over a grid of generated databases.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::authenticator::{
    authenticate_tree, AuthError, AuthOptions, DigestMode, SignMode, SignedTree,
};
use crate::dataset::{generate_dataset, sample_input, DatasetError};
use crate::itree::{build_itree, ITree};
use crate::mesh::{build_mesh_from_tree, mesh_answer, mesh_verify, Mesh, MeshError, MeshParams};
use crate::query::{Query, QueryKind};
use crate::ranking::{evaluate, RankingError, RankingTemplate, Record};
use crate::scalar::Scalar;
use crate::server::{answer, CostCounters, ServerError};
use crate::sign::{SignError, SignatureScheme, SigningKey};
use crate::verifier::{verify, ClientParams, Verdict, VerifyCost};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("honest response rejected: {scheme} n={n} d={d} {query:?}: {verdict}")]
    HonestRejected {
        scheme: Scheme,
        n: usize,
        d: usize,
        query: Box<Query>,
        verdict: Verdict,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Server(#[from] ServerError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Sign(#[from] SignError),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    OneSignature,
    MultiSignature,
    Mesh,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::OneSignature, Scheme::MultiSignature, Scheme::Mesh];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::OneSignature => "one",
            Scheme::MultiSignature => "multi",
            Scheme::Mesh => "mesh",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "one" | "one-signature" => Ok(Scheme::OneSignature),
            "multi" | "multi-signature" => Ok(Scheme::MultiSignature),
            "mesh" => Ok(Scheme::Mesh),
            _ => Err(format!("unknown scheme {s:?}")),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub d: usize,
    pub n: Vec<usize>,
    /// Target result sizes.
    pub q: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub seed: u64,
    #[serde(default = "default_queries")]
    pub queries_per_row: usize,
    #[serde(default = "default_signer")]
    pub signer: String,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<String>,
    #[serde(default = "default_query_types")]
    pub query_types: Vec<String>,
    #[serde(default)]
    pub strict_paper_digest: bool,
    pub grid: Vec<GridSpec>,
}

fn default_queries() -> usize {
    20
}

fn default_signer() -> String {
    "ed25519".into()
}

fn default_schemes() -> Vec<String> {
    Scheme::ALL.iter().map(|s| s.name().to_string()).collect()
}

fn default_query_types() -> Vec<String> {
    QueryKind::ALL
        .iter()
        .map(|k| k.name().to_string())
        .collect()
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        Ok(toml::from_str(text)?)
    }

    fn parsed(&self) -> Result<(SignatureScheme, Vec<Scheme>, Vec<QueryKind>), BenchError> {
        let signer = self
            .signer
            .parse()
            .map_err(|e| BenchError::Config(format!("{e}")))?;
        let schemes = self
            .schemes
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Scheme>, _>>();
        let kinds = self
            .query_types
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<QueryKind>, _>>();
        let schemes = schemes.map_err(BenchError::Config)?;
        let kinds = kinds.map_err(|e| BenchError::Config(e.to_string()))?;
        if self.queries_per_row == 0
            || self.grid.is_empty()
            || schemes.is_empty()
            || kinds.is_empty()
        {
            return Err(BenchError::Config("empty workload".into()));
        }
        for g in &self.grid {
            if g.d == 0 || g.n.contains(&0) || g.q.contains(&0) {
                return Err(BenchError::Config("d, n and q must be positive".into()));
            }
        }
        Ok((signer, schemes, kinds))
    }
}

/// Averages over the queries of one (scheme, n, d, query type, q) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub scheme: String,
    pub n: usize,
    pub d: usize,
    pub query_type: String,
    pub q: usize,
    pub queries: usize,
    pub signatures_total: usize,
    /// Mesh signatures without span merging; equals the total for the other schemes.
    pub signatures_unmerged: usize,
    pub leaf_count: usize,
    pub tree_depth: usize,
    pub build_hashes: u64,
    pub server_nodes_visited: f64,
    pub server_search_nodes: f64,
    pub result_size: f64,
    pub verifier_hashes: f64,
    pub verifier_sig_ops: f64,
    pub verifier_sig_ops_min: u64,
    pub verifier_sig_ops_max: u64,
    pub vo_bytes: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_csv(&self) -> Result<String, BenchError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn rows_for<'a>(&'a self, scheme: Scheme) -> impl Iterator<Item = &'a BenchRow> + 'a {
        self.rows.iter().filter(move |r| r.scheme == scheme.name())
    }

    pub fn find(
        &self,
        scheme: Scheme,
        n: usize,
        d: usize,
        kind: QueryKind,
        q: usize,
    ) -> Option<&BenchRow> {
        self.rows.iter().find(|r| {
            r.scheme == scheme.name()
                && r.n == n
                && r.d == d
                && r.query_type == kind.name()
                && r.q == q
        })
    }
}

/// Deterministic per-database seed.
fn db_seed(seed: u64, n: usize, d: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((n as u64) << 16) ^ d as u64
}

fn scores_at(records: &[Record], tpl: &RankingTemplate, q: &Query) -> Vec<Scalar> {
    let mut s: Vec<Scalar> = records
        .iter()
        .map(|r| evaluate(r, tpl, q.input()).expect("generated records fit the template"))
        .collect();
    s.sort();
    s
}

/// `count` queries of `kind` whose honest result has exactly `q` records.
pub fn workload(
    records: &[Record],
    tpl: &RankingTemplate,
    kind: QueryKind,
    q: usize,
    count: usize,
    rng: &mut impl Rng,
) -> Vec<Query> {
    let d = tpl.dim();
    (0..count)
        .map(|_| {
            let x = sample_input(d, rng);
            match kind {
                QueryKind::TopK => Query::top_k(x, q).expect("q > 0"),
                QueryKind::Range => {
                    let probe = Query::top_k(x.clone(), 1).expect("k > 0");
                    let s = scores_at(records, tpl, &probe);
                    let start = rng.gen_range(0..=s.len() - q);
                    Query::range(x, s[start].clone(), s[start + q - 1].clone()).expect("lo <= hi")
                }
                QueryKind::Knn => {
                    let probe = Query::top_k(x.clone(), 1).expect("k > 0");
                    let s = scores_at(records, tpl, &probe);
                    let centre = s[rng.gen_range(0..s.len())].clone();
                    let jitter =
                        Scalar::ratio(rng.gen_range(-7..=7), 7).expect("nonzero denominator");
                    Query::knn(x, q, centre + jitter).expect("k > 0")
                }
            }
        })
        .collect()
}

struct Built {
    tree: ITree,
    one: Option<SignedTree>,
    multi: Option<SignedTree>,
    mesh: Option<Mesh>,
    one_params: Option<ClientParams>,
    multi_params: Option<ClientParams>,
    mesh_params: Option<MeshParams>,
}

fn build_all(
    tree: ITree,
    schemes: &[Scheme],
    key: &SigningKey,
    digest_mode: DigestMode,
) -> Result<Built, BenchError> {
    let sign = |mode| -> Result<(SignedTree, ClientParams), BenchError> {
        let signed = authenticate_tree(tree.clone(), AuthOptions { mode, digest_mode }, key)?;
        let params = ClientParams {
            template: *tree.template(),
            domain: tree.domain().clone(),
            mode,
            digest_mode,
            key: key.verifying_key(),
        };
        Ok((signed, params))
    };
    let (one, one_params) = match schemes.contains(&Scheme::OneSignature) {
        true => sign(SignMode::OneSignature).map(|(t, p)| (Some(t), Some(p)))?,
        false => (None, None),
    };
    let (multi, multi_params) = match schemes.contains(&Scheme::MultiSignature) {
        true => sign(SignMode::MultiSignature).map(|(t, p)| (Some(t), Some(p)))?,
        false => (None, None),
    };
    let (mesh, mesh_params) = match schemes.contains(&Scheme::Mesh) {
        true => (
            Some(build_mesh_from_tree(&tree, key)),
            Some(MeshParams {
                template: *tree.template(),
                domain: tree.domain().clone(),
                key: key.verifying_key(),
            }),
        ),
        false => (None, None),
    };
    Ok(Built {
        tree,
        one,
        multi,
        mesh,
        one_params,
        multi_params,
        mesh_params,
    })
}

/// Runs one query against a scheme, returning server and client costs.
fn run_one(
    built: &Built,
    scheme: Scheme,
    q: &Query,
) -> Result<(CostCounters, VerifyCost, usize, Verdict), BenchError> {
    Ok(match scheme {
        Scheme::OneSignature | Scheme::MultiSignature => {
            let (t, p) = match scheme {
                Scheme::OneSignature => (built.one.as_ref(), built.one_params.as_ref()),
                _ => (built.multi.as_ref(), built.multi_params.as_ref()),
            };
            let (t, p) = (t.expect("scheme was built"), p.expect("scheme was built"));
            let (resp, cost) = answer(t, q)?;
            let (v, vc) = verify(q, &resp, p);
            (cost, vc, resp.result.len(), v)
        }
        Scheme::Mesh => {
            let m = built.mesh.as_ref().expect("scheme was built");
            let (resp, cost) = mesh_answer(m, q)?;
            let (v, vc) = mesh_verify(
                q,
                &resp,
                built.mesh_params.as_ref().expect("scheme was built"),
            );
            (cost, vc, resp.result.len(), v)
        }
    })
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport, BenchError> {
    let (signer, schemes, kinds) = config.parsed()?;
    let key = SigningKey::generate(signer, config.seed)?;
    let digest_mode = if config.strict_paper_digest {
        DigestMode::ChildrenOnly
    } else {
        DigestMode::RoutingBound
    };
    let mut report = BenchReport::default();
    for g in &config.grid {
        for &n in &g.n {
            let ds = generate_dataset(n, g.d, db_seed(config.seed, n, g.d))?;
            let tree = build_itree(ds.records.clone(), ds.template, ds.domain.clone())?;
            let built = build_all(tree, &schemes, &key, digest_mode)?;
            let mut rng = ChaCha20Rng::seed_from_u64(db_seed(config.seed, n, g.d) ^ 0xA5A5);
            for &kind in &kinds {
                for &q in g.q.iter().filter(|&&q| q <= n) {
                    let queries = workload(
                        &ds.records,
                        &ds.template,
                        kind,
                        q,
                        config.queries_per_row,
                        &mut rng,
                    );
                    for &scheme in &schemes {
                        report
                            .rows
                            .push(bench_row(&built, scheme, n, g.d, kind, q, &queries)?);
                    }
                }
            }
        }
    }
    Ok(report)
}

fn bench_row(
    built: &Built,
    scheme: Scheme,
    n: usize,
    d: usize,
    kind: QueryKind,
    q: usize,
    queries: &[Query],
) -> Result<BenchRow, BenchError> {
    let leaf_count = built.tree.leaf_count();
    let (signatures_total, signatures_unmerged, build_hashes) = match scheme {
        Scheme::OneSignature => {
            let t = built.one.as_ref().expect("scheme was built");
            (t.signature_count(), t.signature_count(), t.build_hashes)
        }
        Scheme::MultiSignature => {
            let t = built.multi.as_ref().expect("scheme was built");
            (t.signature_count(), t.signature_count(), t.build_hashes)
        }
        Scheme::Mesh => {
            let m = built.mesh.as_ref().expect("scheme was built");
            (
                m.signature_count(),
                m.cell_count() * (n + 1),
                m.build_hashes,
            )
        }
    };
    let (mut nodes, mut search, mut size, mut vh, mut sig, mut vo) =
        (0u64, 0u64, 0u64, 0u64, 0u64, 0u64);
    let (mut sig_min, mut sig_max) = (u64::MAX, 0u64);
    for query in queries {
        let (cost, vc, len, verdict) = run_one(built, scheme, query)?;
        if !verdict.accepted {
            return Err(BenchError::HonestRejected {
                scheme,
                n,
                d,
                query: Box::new(query.clone()),
                verdict,
            });
        }
        nodes += cost.nodes_visited;
        search += cost.search_nodes;
        size += len as u64;
        vh += vc.hashes;
        sig += vc.sig_ops;
        vo += cost.vo_bytes;
        sig_min = sig_min.min(vc.sig_ops);
        sig_max = sig_max.max(vc.sig_ops);
    }
    let mean = |v: u64| v as f64 / queries.len() as f64;
    Ok(BenchRow {
        scheme: scheme.name().into(),
        n,
        d,
        query_type: kind.name().into(),
        q,
        queries: queries.len(),
        signatures_total,
        signatures_unmerged,
        leaf_count,
        tree_depth: built.tree.depth(),
        build_hashes,
        server_nodes_visited: mean(nodes),
        server_search_nodes: mean(search),
        result_size: mean(size),
        verifier_hashes: mean(vh),
        verifier_sig_ops: mean(sig),
        verifier_sig_ops_min: sig_min,
        verifier_sig_ops_max: sig_max,
        vo_bytes: mean(vo),
    })
}
