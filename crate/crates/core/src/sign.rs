//! Signature providers. Ed25519 is the default; RSA PKCS#1 v1.5 over
//! SHA-256 is available at 2048 and 3072 bits. Both are deterministic.

use std::fmt;
use std::str::FromStr;

use ed25519_dalek::pkcs8::spki::der::pem::LineEnding;
use ed25519_dalek::pkcs8::{DecodePrivateKey, DecodePublicKey, EncodePrivateKey, EncodePublicKey};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rsa::signature::{Keypair, SignatureEncoding, Signer, Verifier};
use rsa::traits::PublicKeyParts;
use sha2::Sha256;
use thiserror::Error;

use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};
use crate::hash::Digest;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SignatureScheme {
    Ed25519,
    Rsa2048,
    Rsa3072,
}

impl SignatureScheme {
    pub fn id(self) -> u8 {
        match self {
            SignatureScheme::Ed25519 => 1,
            SignatureScheme::Rsa2048 => 2,
            SignatureScheme::Rsa3072 => 3,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(SignatureScheme::Ed25519),
            2 => Some(SignatureScheme::Rsa2048),
            3 => Some(SignatureScheme::Rsa3072),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SignatureScheme::Ed25519 => "ed25519",
            SignatureScheme::Rsa2048 => "rsa2048",
            SignatureScheme::Rsa3072 => "rsa3072",
        }
    }

    /// Length of every signature the scheme produces.
    pub fn signature_len(self) -> usize {
        match self {
            SignatureScheme::Ed25519 => 64,
            SignatureScheme::Rsa2048 => 256,
            SignatureScheme::Rsa3072 => 384,
        }
    }

    fn rsa_bits(self) -> Option<usize> {
        match self {
            SignatureScheme::Ed25519 => None,
            SignatureScheme::Rsa2048 => Some(2048),
            SignatureScheme::Rsa3072 => Some(3072),
        }
    }
}

impl fmt::Display for SignatureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SignatureScheme {
    type Err = SignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ed25519" => Ok(SignatureScheme::Ed25519),
            "rsa2048" | "rsa" => Ok(SignatureScheme::Rsa2048),
            "rsa3072" => Ok(SignatureScheme::Rsa3072),
            other => Err(SignError::UnknownScheme(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum SignError {
    #[error("unknown signature scheme {0:?}")]
    UnknownScheme(String),
    #[error("key is not a supported PEM key")]
    Pem,
    #[error("unsupported RSA modulus of {0} bits")]
    RsaSize(usize),
    #[error("key generation failed: {0}")]
    KeyGen(String),
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    pub scheme: SignatureScheme,
    pub bytes: Vec<u8>,
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}, {} bytes)", self.scheme, self.bytes.len())
    }
}

impl Encode for Signature {
    fn encode(&self, w: &mut Writer) {
        w.u8(self.scheme.id()).bytes(&self.bytes);
    }
}

impl Decode for Signature {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let scheme =
            SignatureScheme::from_id(r.u8()?).ok_or_else(|| r.invalid("signature scheme"))?;
        Ok(Signature {
            scheme,
            bytes: r.bytes()?.to_vec(),
        })
    }
}

#[derive(Clone)]
pub enum SigningKey {
    Ed25519(ed25519_dalek::SigningKey),
    Rsa(SignatureScheme, rsa::pkcs1v15::SigningKey<Sha256>),
}

#[derive(Clone, Debug)]
pub enum VerifyingKey {
    Ed25519(ed25519_dalek::VerifyingKey),
    Rsa(SignatureScheme, rsa::pkcs1v15::VerifyingKey<Sha256>),
}

impl fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SigningKey({})", self.scheme())
    }
}

fn rsa_scheme(bits: usize) -> Result<SignatureScheme, SignError> {
    match bits {
        2048 => Ok(SignatureScheme::Rsa2048),
        3072 => Ok(SignatureScheme::Rsa3072),
        other => Err(SignError::RsaSize(other)),
    }
}

impl SigningKey {
    /// Deterministic key generation from a 64-bit seed.
    pub fn generate(scheme: SignatureScheme, seed: u64) -> Result<Self, SignError> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        match scheme.rsa_bits() {
            None => Ok(SigningKey::Ed25519(ed25519_dalek::SigningKey::generate(
                &mut rng,
            ))),
            Some(bits) => {
                let key = rsa::RsaPrivateKey::new(&mut rng, bits)
                    .map_err(|e| SignError::KeyGen(e.to_string()))?;
                Ok(SigningKey::Rsa(scheme, rsa::pkcs1v15::SigningKey::new(key)))
            }
        }
    }

    pub fn scheme(&self) -> SignatureScheme {
        match self {
            SigningKey::Ed25519(_) => SignatureScheme::Ed25519,
            SigningKey::Rsa(s, _) => *s,
        }
    }

    pub fn sign(&self, digest: &Digest) -> Signature {
        let bytes = match self {
            SigningKey::Ed25519(k) => k.sign(digest.as_bytes()).to_bytes().to_vec(),
            SigningKey::Rsa(_, k) => k.sign(digest.as_bytes()).to_vec(),
        };
        Signature {
            scheme: self.scheme(),
            bytes,
        }
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        match self {
            SigningKey::Ed25519(k) => VerifyingKey::Ed25519(k.verifying_key()),
            SigningKey::Rsa(s, k) => VerifyingKey::Rsa(*s, k.verifying_key()),
        }
    }

    /// PKCS#8 PEM.
    pub fn to_pem(&self) -> String {
        let doc = match self {
            SigningKey::Ed25519(k) => k.to_pkcs8_pem(LineEnding::LF),
            SigningKey::Rsa(_, k) => k.to_pkcs8_pem(LineEnding::LF),
        };
        doc.expect("in-memory key encodes").to_string()
    }

    pub fn from_pem(pem: &str) -> Result<Self, SignError> {
        if let Ok(k) = ed25519_dalek::SigningKey::from_pkcs8_pem(pem) {
            return Ok(SigningKey::Ed25519(k));
        }
        let key = rsa::RsaPrivateKey::from_pkcs8_pem(pem).map_err(|_| SignError::Pem)?;
        let scheme = rsa_scheme(key.size() * 8)?;
        Ok(SigningKey::Rsa(scheme, rsa::pkcs1v15::SigningKey::new(key)))
    }
}

impl VerifyingKey {
    pub fn scheme(&self) -> SignatureScheme {
        match self {
            VerifyingKey::Ed25519(_) => SignatureScheme::Ed25519,
            VerifyingKey::Rsa(s, _) => *s,
        }
    }

    /// True iff `sig` is this key's signature over exactly `digest`.
    pub fn verify(&self, digest: &Digest, sig: &Signature) -> bool {
        if sig.scheme != self.scheme() {
            return false;
        }
        match self {
            VerifyingKey::Ed25519(k) => match ed25519_dalek::Signature::from_slice(&sig.bytes) {
                Ok(s) => k.verify_strict(digest.as_bytes(), &s).is_ok(),
                Err(_) => false,
            },
            VerifyingKey::Rsa(_, k) => {
                match rsa::pkcs1v15::Signature::try_from(sig.bytes.as_slice()) {
                    Ok(s) => k.verify(digest.as_bytes(), &s).is_ok(),
                    Err(_) => false,
                }
            }
        }
    }

    /// SubjectPublicKeyInfo PEM.
    pub fn to_pem(&self) -> String {
        match self {
            VerifyingKey::Ed25519(k) => k.to_public_key_pem(LineEnding::LF),
            VerifyingKey::Rsa(_, k) => k.to_public_key_pem(LineEnding::LF),
        }
        .expect("in-memory key encodes")
    }

    pub fn from_pem(pem: &str) -> Result<Self, SignError> {
        if let Ok(k) = ed25519_dalek::VerifyingKey::from_public_key_pem(pem) {
            return Ok(VerifyingKey::Ed25519(k));
        }
        let key = rsa::RsaPublicKey::from_public_key_pem(pem).map_err(|_| SignError::Pem)?;
        let scheme = rsa_scheme(key.size() * 8)?;
        Ok(VerifyingKey::Rsa(
            scheme,
            rsa::pkcs1v15::VerifyingKey::new(key),
        ))
    }
}
