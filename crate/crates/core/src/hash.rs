//! Digests and the pluggable one-way hash.

use std::cell::Cell;
use std::fmt;

use sha2::{Digest as _, Sha256};

pub const DIGEST_LEN: usize = 32;

/// A 32-byte digest. All-zero bytes mark a digest that has not been computed.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub const INVALID: Digest = Digest([0u8; DIGEST_LEN]);

    pub fn is_valid(&self) -> bool {
        *self != Digest::INVALID
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }
}

impl Default for Digest {
    fn default() -> Self {
        Digest::INVALID
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0[..6] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..")
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// A one-way hash over the concatenation of `parts`.
pub trait HashProvider: Send + Sync {
    /// Stable identifier written into serialized trees.
    fn name(&self) -> &'static str;
    fn hash_parts(&self, parts: &[&[u8]]) -> Digest;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Sha256Provider;

impl HashProvider for Sha256Provider {
    fn name(&self) -> &'static str {
        "sha256"
    }

    fn hash_parts(&self, parts: &[&[u8]]) -> Digest {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        let out = h.finalize();
        let mut d = [0u8; DIGEST_LEN];
        d.copy_from_slice(&out);
        if d == [0u8; DIGEST_LEN] {
            // Unreachable in practice; keeps INVALID distinguished.
            d[0] = 1;
        }
        Digest(d)
    }
}

pub fn provider_by_name(name: &str) -> Option<&'static dyn HashProvider> {
    match name {
        "sha256" => Some(&Sha256Provider),
        _ => None,
    }
}

/// Wraps a provider and counts invocations for cost accounting.
pub struct CountingHasher<'a> {
    inner: &'a dyn HashProvider,
    count: Cell<u64>,
}

impl<'a> CountingHasher<'a> {
    pub fn new(inner: &'a dyn HashProvider) -> Self {
        CountingHasher {
            inner,
            count: Cell::new(0),
        }
    }

    pub fn hash(&self, data: &[u8]) -> Digest {
        self.hash_parts(&[data])
    }

    pub fn hash_parts(&self, parts: &[&[u8]]) -> Digest {
        self.count.set(self.count.get() + 1);
        self.inner.hash_parts(parts)
    }

    /// `H(left || right)`.
    pub fn combine(&self, left: &Digest, right: &Digest) -> Digest {
        self.hash_parts(&[&left.0, &right.0])
    }

    pub fn count(&self) -> u64 {
        self.count.get()
    }

    pub fn provider(&self) -> &'a dyn HashProvider {
        self.inner
    }
}
