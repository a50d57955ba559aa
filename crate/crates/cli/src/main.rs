//! `ifmh`: build, query, verify and tamper with authenticated ranking indexes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ifmh_core::adversary::{tamper, tamper_mesh, TamperMode};
use ifmh_core::authenticator::{authenticate, AuthOptions, DigestMode, SignMode, SignedTree};
use ifmh_core::bench::{run_bench, BenchConfig};
use ifmh_core::codec::{Decode, Encode, TAG_MESH, TAG_SIGNED_TREE};
use ifmh_core::dataset::{generate_dataset, read_dataset, write_dataset, Dataset};
use ifmh_core::mesh::{build_mesh, mesh_answer, mesh_verify, Mesh, MeshParams, MeshResponse};
use ifmh_core::query::{Query, QueryKind};
use ifmh_core::ranking::{FunctionInput, Record};
use ifmh_core::scalar::Scalar;
use ifmh_core::server::{answer, CostCounters, Response};
use ifmh_core::sign::{SignatureScheme, SigningKey, VerifyingKey};
use ifmh_core::verifier::{verify, ClientParams, Verdict};

#[derive(Parser)]
#[command(
    name = "ifmh",
    version,
    about = "Authenticated top-k, range and KNN queries over linear ranking functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a signing key pair as PEM files.
    Keygen {
        #[arg(long, default_value = "ed25519")]
        scheme: SignatureScheme,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Private key output.
        #[arg(long)]
        secret: PathBuf,
        /// Public key output.
        #[arg(long)]
        public: PathBuf,
    },
    /// Write a seeded synthetic dataset.
    GenDataset {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build and sign an index over a dataset.
    Build(BuildArgs),
    /// Answer a query against a built index.
    Query {
        #[arg(long)]
        tree: PathBuf,
        #[command(flatten)]
        query: QueryArgs,
        /// Response output.
        #[arg(long)]
        out: PathBuf,
        /// Also write the encoded query here.
        #[arg(long)]
        query_out: Option<PathBuf>,
    },
    /// Check a response; exits 0 when accepted and 1 when rejected.
    Verify {
        /// Client parameters written by `build`.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        response: PathBuf,
        /// Public key to use instead of the one in the parameters file.
        #[arg(long)]
        public_key: Option<PathBuf>,
        /// Encoded query; otherwise the query flags below are used.
        #[arg(long)]
        query: Option<PathBuf>,
        #[command(flatten)]
        flags: OptQueryArgs,
    },
    /// Tamper with a response the way a dishonest server might.
    Tamper {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        response: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        mode: TamperMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the counter benchmark from a TOML config and write a CSV report.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    One,
    Multi,
    Mesh,
}

#[derive(Args)]
struct BuildArgs {
    /// Dataset file; without it one is generated from --n, --d and --seed.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Private key PEM.
    #[arg(long)]
    key: PathBuf,
    #[arg(long, value_enum, default_value = "one")]
    mode: Mode,
    /// Hash internal nodes from their children only.
    #[arg(long)]
    strict_paper_digest: bool,
    /// Index output.
    #[arg(long)]
    out: PathBuf,
    /// Client parameters output.
    #[arg(long)]
    params: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long = "type", value_parser = parse_kind)]
    kind: QueryKind,
    /// Comma-separated input values, e.g. `1/3,2`.
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<Scalar>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<Scalar>,
    #[arg(long, allow_hyphen_values = true)]
    y: Option<Scalar>,
}

#[derive(Args)]
struct OptQueryArgs {
    #[arg(long = "type", value_parser = parse_kind)]
    kind: Option<QueryKind>,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<Scalar>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<Scalar>,
    #[arg(long, allow_hyphen_values = true)]
    y: Option<Scalar>,
}

fn parse_kind(s: &str) -> Result<QueryKind, String> {
    s.parse()
}

impl QueryArgs {
    fn to_query(&self) -> Result<Query> {
        let x = FunctionInput::new(
            self.x
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<Scalar>()
                        .map_err(|e| anyhow::anyhow!("bad input value {v:?}: {e}"))
                })
                .collect::<Result<_>>()?,
        );
        let need_k = || self.k.context("--k is required");
        Ok(match self.kind {
            QueryKind::TopK => Query::top_k(x, need_k()?)?,
            QueryKind::Range => Query::range(
                x,
                self.lo.clone().context("--lo is required")?,
                self.hi.clone().context("--hi is required")?,
            )?,
            QueryKind::Knn => Query::knn(x, need_k()?, self.y.clone().context("--y is required")?)?,
        })
    }
}

fn read<T: Decode>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    T::from_bytes(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn write(path: &Path, value: &impl Encode) -> Result<()> {
    fs::write(path, value.to_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn first_byte(path: &Path) -> Result<u8> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    bytes
        .first()
        .copied()
        .with_context(|| format!("{} is empty", path.display()))
}

enum Index {
    Tree(SignedTree),
    Mesh(Mesh),
}

fn load_index(path: &Path) -> Result<Index> {
    match first_byte(path)? {
        TAG_SIGNED_TREE => Ok(Index::Tree(read(path)?)),
        TAG_MESH => Ok(Index::Mesh(read(path)?)),
        t => bail!("{} is not an index file (tag {t:#04x})", path.display()),
    }
}

fn print_counters(c: &CostCounters) {
    println!("nodes_visited={}", c.nodes_visited);
    println!("search_nodes={}", c.search_nodes);
    println!("hashes_computed={}", c.hashes_computed);
    println!("signatures_included={}", c.signatures_included);
    println!("vo_bytes={}", c.vo_bytes);
}

fn print_result(result: &[Record]) {
    let ids: Vec<String> = result.iter().map(|r| r.id.to_string()).collect();
    println!("result={}", ids.join(","));
}

fn load_dataset(args: &BuildArgs) -> Result<Dataset> {
    match (&args.dataset, args.n) {
        (Some(path), _) => {
            let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Ok(read_dataset(std::io::BufReader::new(f))?)
        }
        (None, Some(n)) => Ok(generate_dataset(n, args.d, args.seed)?),
        (None, None) => bail!("either --dataset or --n is required"),
    }
}

fn build(args: BuildArgs) -> Result<()> {
    let ds = load_dataset(&args)?;
    let pem =
        fs::read_to_string(&args.key).with_context(|| format!("reading {}", args.key.display()))?;
    let key = SigningKey::from_pem(&pem)?;
    let digest_mode = if args.strict_paper_digest {
        DigestMode::ChildrenOnly
    } else {
        DigestMode::RoutingBound
    };
    let mode = match args.mode {
        Mode::One => SignMode::OneSignature,
        Mode::Multi => SignMode::MultiSignature,
        Mode::Mesh => {
            let mesh = build_mesh(ds.records, ds.template, ds.domain.clone(), &key)?;
            write(&args.out, &mesh)?;
            write(
                &args.params,
                &MeshParams {
                    template: ds.template,
                    domain: ds.domain,
                    key: key.verifying_key(),
                },
            )?;
            println!("cells={}", mesh.cell_count());
            println!("signatures={}", mesh.signature_count());
            println!("build_hashes={}", mesh.build_hashes);
            return Ok(());
        }
    };
    let signed = authenticate(
        ds.records,
        ds.template,
        ds.domain.clone(),
        AuthOptions { mode, digest_mode },
        &key,
    )?;
    write(&args.out, &signed)?;
    let params = ClientParams {
        template: ds.template,
        domain: ds.domain,
        mode,
        digest_mode,
        key: key.verifying_key(),
    };
    write(&args.params, &params)?;
    println!("leaves={}", signed.tree.leaf_count());
    println!("depth={}", signed.tree.depth());
    println!("signatures={}", signed.signature_count());
    println!("build_hashes={}", signed.build_hashes);
    Ok(())
}

fn resolve_query(file: Option<PathBuf>, flags: OptQueryArgs) -> Result<Query> {
    if let Some(path) = file {
        return read(&path);
    }
    let OptQueryArgs {
        kind,
        x,
        k,
        lo,
        hi,
        y,
    } = flags;
    let (Some(kind), Some(x)) = (kind, x) else {
        bail!("pass --query FILE or --type and --x");
    };
    QueryArgs {
        kind,
        x,
        k,
        lo,
        hi,
        y,
    }
    .to_query()
}

fn run_verify(
    params: PathBuf,
    response: PathBuf,
    public_key: Option<PathBuf>,
    query: Option<PathBuf>,
    flags: OptQueryArgs,
) -> Result<Verdict> {
    let query = resolve_query(query, flags)?;
    let key = match public_key {
        Some(p) => Some(VerifyingKey::from_pem(
            &fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?,
        )?),
        None => None,
    };
    let (verdict, cost) = match first_byte(&params)? {
        ifmh_core::mesh::TAG_MESH_PARAMS => {
            let mut p: MeshParams = read(&params)?;
            if let Some(k) = key {
                p.key = k;
            }
            let resp: MeshResponse = read(&response)?;
            mesh_verify(&query, &resp, &p)
        }
        _ => {
            let mut p: ClientParams = read(&params)?;
            if let Some(k) = key {
                p.key = k;
            }
            let resp: Response = read(&response)?;
            verify(&query, &resp, &p)
        }
    };
    println!("verdict={verdict}");
    println!("verifier_hashes={}", cost.hashes);
    println!("verifier_sig_ops={}", cost.sig_ops);
    Ok(verdict)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Keygen {
            scheme,
            seed,
            secret,
            public,
        } => {
            let key = SigningKey::generate(scheme, seed)?;
            fs::write(&secret, key.to_pem())
                .with_context(|| format!("writing {}", secret.display()))?;
            fs::write(&public, key.verifying_key().to_pem())
                .with_context(|| format!("writing {}", public.display()))?;
        }
        Command::GenDataset { n, d, seed, out } => {
            let ds = generate_dataset(n, d, seed)?;
            let f =
                fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_dataset(&ds, std::io::BufWriter::new(f))?;
        }
        Command::Build(args) => build(args)?,
        Command::Query {
            tree,
            query,
            out,
            query_out,
        } => {
            let q = query.to_query()?;
            match load_index(&tree)? {
                Index::Tree(t) => {
                    let (resp, cost) = answer(&t, &q)?;
                    write(&out, &resp)?;
                    print_result(&resp.result);
                    print_counters(&cost);
                }
                Index::Mesh(m) => {
                    let (resp, cost) = mesh_answer(&m, &q)?;
                    write(&out, &resp)?;
                    print_result(&resp.result);
                    print_counters(&cost);
                }
            }
            if let Some(path) = query_out {
                write(&path, &q)?;
            }
        }
        Command::Verify {
            params,
            response,
            public_key,
            query,
            flags,
        } => {
            let verdict = run_verify(params, response, public_key, query, flags)?;
            if !verdict.accepted {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Tamper {
            tree,
            response,
            query,
            mode,
            seed,
            out,
        } => {
            let q: Query = read(&query)?;
            let expected = match load_index(&tree)? {
                Index::Tree(t) => {
                    let honest: Response = read(&response)?;
                    let tampered = tamper(&t, &q, &honest, mode, seed)?;
                    write(&out, &tampered.response)?;
                    tampered.expected
                }
                Index::Mesh(m) => {
                    let honest: MeshResponse = read(&response)?;
                    let tampered = tamper_mesh(&m, &q, &honest, mode, seed)?;
                    write(&out, &tampered.response)?;
                    tampered.expected
                }
            };
            match expected {
                Some(r) => println!("expected={r}"),
                None => println!("expected=accepted (known miss)"),
            }
        }
        Command::Bench { config, out } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let report = run_bench(&BenchConfig::from_toml(&text)?)?;
            let csv = report.to_csv()?;
            match out {
                Some(path) => {
                    fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?
                }
                None => print!("{csv}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
