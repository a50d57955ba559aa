//! Seeded synthetic databases and their flat-file format.
//!
//! Attributes are multiples of 1/16 in [-10, 10]. Hyperplane coefficients
//! between two such records are then integers of magnitude at most 320 after
//! scaling by 16, which is what `sample_input` relies on to stay off every
//! hyperplane.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::ranking::{DomainBox, FunctionInput, RankingError, RankingTemplate, Record};
use crate::scalar::Scalar;

/// Largest attribute numerator over 16.
pub const ATTR_UNITS: i64 = 160;
pub const ATTR_DENOM: i64 = 16;
pub const DOMAIN_HALF_WIDTH: i64 = 10;

/// Denominators for sampled inputs, one prime per coordinate.
const INPUT_PRIMES: [i64; 8] = [1009, 1013, 1019, 1021, 1031, 1033, 1039, 1049];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("n and d must be at least 1")]
    Empty,
    #[error("at most {max} dimensions are supported, got {got}")]
    TooManyDimensions { max: usize, got: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub seed: u64,
    pub template: RankingTemplate,
    pub domain: DomainBox,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn d(&self) -> usize {
        self.template.dim()
    }
}

fn attr(rng: &mut ChaCha20Rng) -> Scalar {
    Scalar::ratio(rng.gen_range(-ATTR_UNITS..=ATTR_UNITS), ATTR_DENOM).expect("nonzero denominator")
}

/// `n` distinct affine records over `[-10, 10]^d`.
pub fn generate_dataset(n: usize, d: usize, seed: u64) -> Result<Dataset, DatasetError> {
    if n == 0 || d == 0 {
        return Err(DatasetError::Empty);
    }
    if d > INPUT_PRIMES.len() {
        return Err(DatasetError::TooManyDimensions {
            max: INPUT_PRIMES.len(),
            got: d,
        });
    }
    let template = RankingTemplate::affine(d)?;
    let half = Scalar::from_int(DOMAIN_HALF_WIDTH);
    let domain = DomainBox::cube(d, -half.clone(), half)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(n);
    let mut records = Vec::with_capacity(n);
    while records.len() < n {
        let attrs: Vec<Scalar> = (0..=d).map(|_| attr(&mut rng)).collect();
        if seen.insert(attrs.clone()) {
            records.push(Record::new(records.len() as u64 + 1, attrs));
        }
    }
    Ok(Dataset {
        seed,
        template,
        domain,
        records,
    })
}

/// A uniform input in `[-10, 10]^d` off every hyperplane between generated records.
pub fn sample_input(d: usize, rng: &mut impl Rng) -> FunctionInput {
    FunctionInput::new(
        INPUT_PRIMES[..d]
            .iter()
            .map(|&p| loop {
                let num = rng.gen_range(-DOMAIN_HALF_WIDTH * p..=DOMAIN_HALF_WIDTH * p);
                if num % p != 0 {
                    break Scalar::ratio(num, p).expect("prime denominator");
                }
            })
            .collect(),
    )
}

/// Writes `#key=value` headers followed by `id,a1,...` rows of exact rationals.
pub fn write_dataset(ds: &Dataset, out: impl Write) -> Result<(), DatasetError> {
    let mut out = out;
    writeln!(out, "#d={}", ds.d())?;
    writeln!(out, "#n={}", ds.n())?;
    writeln!(out, "#seed={}", ds.seed)?;
    writeln!(
        out,
        "#template={}",
        if ds.template.has_intercept() {
            "affine"
        } else {
            "linear"
        }
    )?;
    let bounds: Vec<String> = ds
        .domain
        .bounds()
        .iter()
        .map(|(lo, hi)| format!("{lo}:{hi}"))
        .collect();
    writeln!(out, "#domain={}", bounds.join(","))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend((1..=ds.template.arity()).map(|t| format!("a{t}")));
    w.write_record(&header)?;
    for r in &ds.records {
        let mut row = vec![r.id.to_string()];
        row.extend(r.attrs.iter().map(|a| a.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(input: impl BufRead) -> Result<Dataset, DatasetError> {
    let mut input = input;
    let mut headers = std::collections::HashMap::new();
    let mut body = String::new();
    let mut line_no = 0;
    let mut line = String::new();
    while input.read_line(&mut line)? > 0 {
        line_no += 1;
        if let Some(h) = line.trim_end().strip_prefix('#') {
            let (k, v) = h.split_once('=').ok_or_else(|| DatasetError::Parse {
                line: line_no,
                msg: "header without '='".into(),
            })?;
            headers.insert(k.trim().to_string(), v.trim().to_string());
        } else {
            body.push_str(&line);
        }
        line.clear();
    }
    let bad = |msg: String| DatasetError::Parse { line: 0, msg };
    let get = |k: &str| {
        headers
            .get(k)
            .ok_or_else(|| bad(format!("missing #{k} header")))
    };
    let d: usize = get("d")?.parse().map_err(|_| bad("bad #d".into()))?;
    let seed: u64 = headers
        .get("seed")
        .map_or(Ok(0), |s| s.parse())
        .map_err(|_| bad("bad #seed".into()))?;
    let template = match headers.get("template").map(String::as_str) {
        None | Some("affine") => RankingTemplate::affine(d)?,
        Some("linear") => RankingTemplate::linear(d)?,
        Some(t) => return Err(bad(format!("unknown template {t:?}"))),
    };
    let domain = match headers.get("domain") {
        None => {
            let half = Scalar::from_int(DOMAIN_HALF_WIDTH);
            DomainBox::cube(d, -half.clone(), half)?
        }
        Some(spec) => {
            let mut bounds = Vec::new();
            for part in spec.split(',') {
                let (lo, hi) = part
                    .split_once(':')
                    .ok_or_else(|| bad(format!("bad domain bound {part:?}")))?;
                let p = |s: &str| {
                    s.trim()
                        .parse::<Scalar>()
                        .map_err(|_| bad(format!("bad scalar {s:?}")))
                };
                bounds.push((p(lo)?, p(hi)?));
            }
            DomainBox::new(bounds)?
        }
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(body.as_bytes());
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let perr = |msg: String| DatasetError::Parse { line, msg };
        let id: u64 = row
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|_| perr("bad id".into()))?;
        let attrs = row
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<Scalar>()
                    .map_err(|_| perr(format!("bad scalar {s:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let r = Record::new(id, attrs);
        template.check_record(&r).map_err(|e| perr(e.to_string()))?;
        records.push(r);
    }
    Ok(Dataset {
        seed,
        template,
        domain,
        records,
    })
}
