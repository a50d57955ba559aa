//! Canonical binary encoding shared by hash inputs and file formats.
//!
//! Integers are big-endian: ids and counters take 8 bytes, lengths 4.
//! Composite values start with a one-byte tag.

use num_bigint::{BigInt, BigUint, Sign};
use thiserror::Error;

use crate::hash::{Digest, DIGEST_LEN};
use crate::ranking::{
    Constraint, DomainBox, Intersection, LinearForm, Record, Side, SubdomainRegion,
};
use crate::scalar::Scalar;

pub const TAG_RECORD: u8 = 0x01;
pub const TAG_SENTINEL: u8 = 0x02;
pub const TAG_INTERSECTION: u8 = 0x03;
pub const TAG_CONSTRAINT: u8 = 0x04;
pub const TAG_REGION: u8 = 0x05;
pub const TAG_VO: u8 = 0x10;
pub const TAG_RESPONSE: u8 = 0x11;
pub const TAG_SIGNED_TREE: u8 = 0x12;
pub const TAG_MESH: u8 = 0x13;
pub const TAG_MESH_VO: u8 = 0x14;
pub const TAG_QUERY: u8 = 0x15;

pub const MIN_PAYLOAD: &[u8] = b"\x00AQV_MIN";
pub const MAX_PAYLOAD: &[u8] = b"\x00AQV_MAX";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unexpected end of input at byte {0}")]
    Truncated(usize),
    #[error("unexpected tag {found:#04x}, expected {expected:#04x}")]
    Tag { expected: u8, found: u8 },
    #[error("invalid {what} at byte {at}")]
    Invalid { what: &'static str, at: usize },
    #[error("{0} trailing bytes")]
    Trailing(usize),
}

#[derive(Default, Debug, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Writer::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn len_of(&mut self, n: usize) -> &mut Self {
        self.u32(u32::try_from(n).expect("length fits in 32 bits"))
    }

    /// Length-prefixed bytes.
    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.len_of(b.len());
        self.buf.extend_from_slice(b);
        self
    }

    pub fn raw(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }

    pub fn digest(&mut self, d: &Digest) -> &mut Self {
        self.raw(d.as_bytes())
    }

    pub fn put<T: Encode + ?Sized>(&mut self, v: &T) -> &mut Self {
        v.encode(self);
        self
    }

    pub fn seq<T: Encode>(&mut self, items: &[T]) -> &mut Self {
        self.len_of(items.len());
        for it in items {
            it.encode(self);
        }
        self
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn finish(&self) -> Result<(), DecodeError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(DecodeError::Trailing(n)),
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or(DecodeError::Truncated(self.pos))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn peek(&self) -> Result<u8, DecodeError> {
        self.buf
            .get(self.pos)
            .copied()
            .ok_or(DecodeError::Truncated(self.pos))
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A 4-byte length that must not exceed the remaining input.
    pub fn length(&mut self) -> Result<usize, DecodeError> {
        let at = self.pos;
        let n = self.u32()? as usize;
        if n > self.buf.len() - self.pos {
            return Err(DecodeError::Invalid { what: "length", at });
        }
        Ok(n)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let n = self.length()?;
        self.take(n)
    }

    pub fn digest(&mut self) -> Result<Digest, DecodeError> {
        let mut d = [0u8; DIGEST_LEN];
        d.copy_from_slice(self.take(DIGEST_LEN)?);
        Ok(Digest(d))
    }

    pub fn tag(&mut self, expected: u8) -> Result<(), DecodeError> {
        let found = self.u8()?;
        if found != expected {
            return Err(DecodeError::Tag { expected, found });
        }
        Ok(())
    }

    pub fn get<T: Decode>(&mut self) -> Result<T, DecodeError> {
        T::decode(self)
    }

    /// A count-prefixed sequence. Each element occupies at least one byte.
    pub fn seq<T: Decode>(&mut self) -> Result<Vec<T>, DecodeError> {
        let n = self.length()?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(T::decode(self)?);
        }
        Ok(out)
    }

    pub fn invalid(&self, what: &'static str) -> DecodeError {
        DecodeError::Invalid { what, at: self.pos }
    }
}

pub trait Encode {
    fn encode(&self, w: &mut Writer);

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.into_bytes()
    }
}

pub trait Decode: Sized {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError>;

    /// Decodes a value that must span the whole input.
    fn from_bytes(buf: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(buf);
        let v = Self::decode(&mut r)?;
        r.finish()?;
        Ok(v)
    }
}

impl Encode for Scalar {
    fn encode(&self, w: &mut Writer) {
        let sign = match self.signum() {
            0 => 0x00,
            1 => 0x01,
            _ => 0x02,
        };
        w.u8(sign);
        w.bytes(&self.numer().magnitude().to_bytes_be());
        w.bytes(&self.denom().magnitude().to_bytes_be());
    }
}

impl Decode for Scalar {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let sign = match r.u8()? {
            0x00 => Sign::NoSign,
            0x01 => Sign::Plus,
            0x02 => Sign::Minus,
            _ => return Err(r.invalid("scalar sign")),
        };
        let num = minimal_magnitude(r)?;
        let den = minimal_magnitude(r)?;
        if den == BigUint::from(0u8) || ((sign == Sign::NoSign) != (num == BigUint::from(0u8))) {
            return Err(r.invalid("scalar"));
        }
        let num = BigInt::from_biguint(sign, num);
        let den = BigInt::from_biguint(Sign::Plus, den);
        let v = Scalar::from_big(num.clone(), den.clone()).ok_or_else(|| r.invalid("scalar"))?;
        // Only normalized values have a canonical encoding.
        if *v.numer() != num || *v.denom() != den {
            return Err(r.invalid("unnormalized scalar"));
        }
        Ok(v)
    }
}

/// Big-endian magnitude without leading zero bytes (zero is the single byte 0).
fn minimal_magnitude(r: &mut Reader<'_>) -> Result<BigUint, DecodeError> {
    let b = r.bytes()?;
    if b.is_empty() || (b.len() > 1 && b[0] == 0) {
        return Err(r.invalid("scalar magnitude"));
    }
    Ok(BigUint::from_bytes_be(b))
}

impl Encode for Record {
    fn encode(&self, w: &mut Writer) {
        w.u8(TAG_RECORD).u64(self.id).seq(&self.attrs);
    }
}

impl Decode for Record {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.tag(TAG_RECORD)?;
        let id = r.u64()?;
        Ok(Record::new(id, r.seq()?))
    }
}

/// The MIN and MAX tokens bracketing every sorted list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sentinel {
    Min,
    Max,
}

impl Sentinel {
    pub fn payload(self) -> &'static [u8] {
        match self {
            Sentinel::Min => MIN_PAYLOAD,
            Sentinel::Max => MAX_PAYLOAD,
        }
    }
}

impl Encode for Sentinel {
    fn encode(&self, w: &mut Writer) {
        w.u8(TAG_SENTINEL).bytes(self.payload());
    }
}

impl Decode for Sentinel {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.tag(TAG_SENTINEL)?;
        match r.bytes()? {
            p if p == MIN_PAYLOAD => Ok(Sentinel::Min),
            p if p == MAX_PAYLOAD => Ok(Sentinel::Max),
            _ => Err(r.invalid("sentinel payload")),
        }
    }
}

impl Encode for LinearForm {
    fn encode(&self, w: &mut Writer) {
        w.seq(&self.weights).put(&self.offset);
    }
}

impl Decode for LinearForm {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let weights = r.seq()?;
        Ok(LinearForm {
            weights,
            offset: r.get()?,
        })
    }
}

impl Encode for Intersection {
    fn encode(&self, w: &mut Writer) {
        w.u8(TAG_INTERSECTION)
            .u64(self.i)
            .u64(self.j)
            .put(&self.plane);
    }
}

impl Decode for Intersection {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.tag(TAG_INTERSECTION)?;
        let i = r.u64()?;
        let j = r.u64()?;
        if i > j {
            return Err(r.invalid("intersection orientation"));
        }
        Ok(Intersection {
            i,
            j,
            plane: r.get()?,
        })
    }
}

impl Encode for Side {
    fn encode(&self, w: &mut Writer) {
        w.u8(match self {
            Side::Below => 0,
            Side::Above => 1,
        });
    }
}

impl Decode for Side {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(Side::Below),
            1 => Ok(Side::Above),
            _ => Err(r.invalid("side")),
        }
    }
}

impl Encode for Constraint {
    fn encode(&self, w: &mut Writer) {
        w.u8(TAG_CONSTRAINT).put(&self.intersection).put(&self.side);
    }
}

impl Decode for Constraint {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.tag(TAG_CONSTRAINT)?;
        let intersection = r.get()?;
        Ok(Constraint::new(intersection, r.get()?))
    }
}

impl Encode for DomainBox {
    fn encode(&self, w: &mut Writer) {
        w.len_of(self.dim());
        for (lo, hi) in self.bounds() {
            w.put(lo).put(hi);
        }
    }
}

impl Decode for DomainBox {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let n = r.length()?;
        let mut bounds = Vec::with_capacity(n);
        for _ in 0..n {
            let lo: Scalar = r.get()?;
            bounds.push((lo, r.get()?));
        }
        DomainBox::new(bounds).map_err(|_| r.invalid("domain box"))
    }
}

impl Encode for SubdomainRegion {
    fn encode(&self, w: &mut Writer) {
        let sorted = self.sorted_constraints();
        w.u8(TAG_REGION).put(&self.domain).len_of(sorted.len());
        for c in sorted {
            c.encode(w);
        }
    }
}

impl Decode for SubdomainRegion {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.tag(TAG_REGION)?;
        let domain = r.get()?;
        Ok(SubdomainRegion {
            domain,
            constraints: r.seq()?,
        })
    }
}

impl Encode for Digest {
    fn encode(&self, w: &mut Writer) {
        w.digest(self);
    }
}

impl Decode for Digest {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.digest()
    }
}

impl<T: Encode> Encode for Option<T> {
    fn encode(&self, w: &mut Writer) {
        match self {
            None => {
                w.u8(0);
            }
            Some(v) => {
                w.u8(1).put(v);
            }
        }
    }
}

impl<T: Decode> Decode for Option<T> {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(None),
            1 => Ok(Some(r.get()?)),
            _ => Err(r.invalid("option flag")),
        }
    }
}

impl Encode for u64 {
    fn encode(&self, w: &mut Writer) {
        w.u64(*self);
    }
}

impl Decode for u64 {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.u64()
    }
}
