//! Canonical byte encoding.
//!
//! Integers are fixed-width big-endian, variable-length fields carry a `u32`
//! big-endian length prefix, and composite values concatenate their fields in
//! declaration order. Every encoding produced here is injective, and every
//! decoder rejects trailing bytes.

use std::fmt;
use std::str::FromStr;

use crate::hash::{AccountId, ContractAddress, Hash};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("unexpected end of input at offset {0}")]
    UnexpectedEof(usize),
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("invalid tag {tag} for {what}")]
    BadTag { what: &'static str, tag: u8 },
    #[error("invalid utf-8 string")]
    BadUtf8,
    #[error("invalid value: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u16(&mut self, v: u16) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
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

    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn bool(&mut self, v: bool) -> &mut Self {
        self.u8(v as u8)
    }

    /// Length-prefixed bytes.
    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        let len = u32::try_from(b.len()).expect("field longer than u32::MAX");
        self.u32(len);
        self.buf.extend_from_slice(b);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    /// Fixed 32 bytes, no prefix.
    pub fn hash(&mut self, h: &Hash) -> &mut Self {
        self.buf.extend_from_slice(&h.0);
        self
    }

    pub fn raw(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }

    pub fn seq<T>(&mut self, items: &[T], mut each: impl FnMut(&mut Self, &T)) -> &mut Self {
        let len = u32::try_from(items.len()).expect("sequence longer than u32::MAX");
        self.u32(len);
        for item in items {
            each(self, item);
        }
        self
    }

    pub fn put<T: Canonical>(&mut self, v: &T) -> &mut Self {
        v.encode(self);
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug)]
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.remaining() < n {
            return Err(DecodeError::UnexpectedEof(self.pos));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, DecodeError> {
        self.array().map(u16::from_be_bytes)
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        self.array().map(u32::from_be_bytes)
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        self.array().map(u64::from_be_bytes)
    }

    pub fn i64(&mut self) -> Result<i64, DecodeError> {
        self.array().map(i64::from_be_bytes)
    }

    pub fn bool(&mut self) -> Result<bool, DecodeError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            tag => Err(DecodeError::BadTag { what: "bool", tag }),
        }
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>, DecodeError> {
        let len = self.u32()? as usize;
        Ok(self.take(len)?.to_vec())
    }

    pub fn str(&mut self) -> Result<String, DecodeError> {
        String::from_utf8(self.bytes()?).map_err(|_| DecodeError::BadUtf8)
    }

    pub fn hash(&mut self) -> Result<Hash, DecodeError> {
        self.array().map(Hash)
    }

    pub fn raw<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        self.array()
    }

    pub fn seq<T>(
        &mut self,
        mut each: impl FnMut(&mut Self) -> Result<T, DecodeError>,
    ) -> Result<Vec<T>, DecodeError> {
        let len = self.u32()? as usize;
        // Each element takes at least one byte, which bounds preallocation.
        let mut out = Vec::with_capacity(len.min(self.remaining()));
        for _ in 0..len {
            out.push(each(self)?);
        }
        Ok(out)
    }

    pub fn get<T: Canonical>(&mut self) -> Result<T, DecodeError> {
        T::decode(self)
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(DecodeError::TrailingBytes(n)),
        }
    }
}

/// Types with a canonical byte encoding.
pub trait Canonical: Sized {
    fn encode(&self, enc: &mut Encoder);
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError>;

    fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode(&mut enc);
        enc.finish()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::new(bytes);
        let v = Self::decode(&mut dec)?;
        dec.finish()?;
        Ok(v)
    }
}

impl Canonical for Hash {
    fn encode(&self, enc: &mut Encoder) {
        enc.hash(self);
    }
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        dec.hash()
    }
}

impl Canonical for AccountId {
    fn encode(&self, enc: &mut Encoder) {
        enc.hash(&self.0);
    }
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        dec.hash().map(AccountId)
    }
}

impl Canonical for ContractAddress {
    fn encode(&self, enc: &mut Encoder) {
        enc.hash(&self.0);
    }
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        dec.hash().map(ContractAddress)
    }
}

/// A dynamically typed value: method arguments, return values and contract
/// storage cells all use this encoding.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Unit,
    Bool(bool),
    U64(u64),
    I64(i64),
    Bytes(Vec<u8>),
    Str(String),
    Id(Hash),
    List(Vec<Value>),
}

impl Value {
    fn tag(&self) -> u8 {
        match self {
            Value::Unit => 0,
            Value::Bool(_) => 1,
            Value::U64(_) => 2,
            Value::I64(_) => 3,
            Value::Bytes(_) => 4,
            Value::Str(_) => 5,
            Value::Id(_) => 6,
            Value::List(_) => 7,
        }
    }

    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }

    pub fn account(id: AccountId) -> Value {
        Value::Id(id.0)
    }

    pub fn address(addr: ContractAddress) -> Value {
        Value::Id(addr.0)
    }

    pub fn as_u64(&self) -> Option<u64> {
        match self {
            Value::U64(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::I64(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            Value::Bytes(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_id(&self) -> Option<Hash> {
        match self {
            Value::Id(h) => Some(*h),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, Value::Unit)
    }
}

impl Canonical for Value {
    fn encode(&self, enc: &mut Encoder) {
        enc.u8(self.tag());
        match self {
            Value::Unit => {}
            Value::Bool(b) => {
                enc.bool(*b);
            }
            Value::U64(v) => {
                enc.u64(*v);
            }
            Value::I64(v) => {
                enc.i64(*v);
            }
            Value::Bytes(b) => {
                enc.bytes(b);
            }
            Value::Str(s) => {
                enc.str(s);
            }
            Value::Id(h) => {
                enc.hash(h);
            }
            Value::List(items) => {
                enc.seq(items, |e, v| v.encode(e));
            }
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(match dec.u8()? {
            0 => Value::Unit,
            1 => Value::Bool(dec.bool()?),
            2 => Value::U64(dec.u64()?),
            3 => Value::I64(dec.i64()?),
            4 => Value::Bytes(dec.bytes()?),
            5 => Value::Str(dec.str()?),
            6 => Value::Id(dec.hash()?),
            7 => Value::List(dec.seq(Value::decode)?),
            tag => return Err(DecodeError::BadTag { what: "value", tag }),
        })
    }
}

impl fmt::Display for Value {
    /// Renders in the same `type:literal` form accepted by [`Value::from_str`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => f.write_str("unit"),
            Value::Bool(b) => write!(f, "bool:{b}"),
            Value::U64(v) => write!(f, "u64:{v}"),
            Value::I64(v) => write!(f, "i64:{v}"),
            Value::Bytes(b) => match std::str::from_utf8(b) {
                Ok(s) if !s.is_empty() && s.chars().all(|c| c.is_ascii_graphic() || c == ' ') => {
                    write!(f, "text:{s:?}")
                }
                _ => write!(f, "hex:{}", hex::encode(b)),
            },
            Value::Str(s) => write!(f, "str:{s:?}"),
            Value::Id(h) => write!(f, "id:{h}"),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse value literal {0:?}")]
pub struct ParseValueError(pub String);

impl FromStr for Value {
    type Err = ParseValueError;

    /// Parses a scalar literal such as `u64:5`, `i64:-3`, `str:hello`,
    /// `text:hello` (bytes), `hex:00ff`, `id:<64 hex>` or `unit`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseValueError(s.to_string());
        if s == "unit" {
            return Ok(Value::Unit);
        }
        let (kind, lit) = s.split_once(':').ok_or_else(err)?;
        let lit = lit
            .strip_prefix('"')
            .and_then(|l| l.strip_suffix('"'))
            .unwrap_or(lit);
        Ok(match kind {
            "bool" => Value::Bool(lit.parse().map_err(|_| err())?),
            "u64" => Value::U64(lit.parse().map_err(|_| err())?),
            "i64" => Value::I64(lit.parse().map_err(|_| err())?),
            "str" => Value::Str(lit.to_string()),
            "text" => Value::Bytes(lit.as_bytes().to_vec()),
            "hex" => Value::Bytes(hex::decode(lit).map_err(|_| err())?),
            "id" => Value::Id(lit.parse().map_err(|_| err())?),
            _ => return Err(err()),
        })
    }
}

/// Positional method arguments.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Args(pub Vec<Value>);

impl Args {
    pub fn new(values: Vec<Value>) -> Self {
        Args(values)
    }

    pub fn empty() -> Self {
        Args(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Value> {
        self.0.get(i)
    }
}

impl From<Vec<Value>> for Args {
    fn from(v: Vec<Value>) -> Self {
        Args(v)
    }
}

impl Canonical for Args {
    fn encode(&self, enc: &mut Encoder) {
        enc.seq(&self.0, |e, v| v.encode(e));
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        dec.seq(Value::decode).map(Args)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn value_strategy() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Unit),
            any::<bool>().prop_map(Value::Bool),
            any::<u64>().prop_map(Value::U64),
            any::<i64>().prop_map(Value::I64),
            proptest::collection::vec(any::<u8>(), 0..16).prop_map(Value::Bytes),
            "[a-z/#+]{0,8}".prop_map(Value::Str),
            any::<[u8; 32]>().prop_map(|b| Value::Id(Hash(b))),
        ];
        leaf.prop_recursive(3, 24, 4, |inner| {
            proptest::collection::vec(inner, 0..4).prop_map(Value::List)
        })
    }

    proptest! {
        #[test]
        fn value_encoding_roundtrips(v in value_strategy()) {
            prop_assert_eq!(Value::from_bytes(&v.to_bytes()).unwrap(), v);
        }

        #[test]
        fn value_encoding_is_injective(a in value_strategy(), b in value_strategy()) {
            if a != b {
                prop_assert_ne!(a.to_bytes(), b.to_bytes());
            }
        }
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = Value::U64(7).to_bytes();
        bytes.push(0);
        assert_eq!(Value::from_bytes(&bytes), Err(DecodeError::TrailingBytes(1)));
    }

    #[test]
    fn truncated_input_rejected() {
        let bytes = Value::Str("hello".into()).to_bytes();
        assert!(matches!(
            Value::from_bytes(&bytes[..bytes.len() - 1]),
            Err(DecodeError::UnexpectedEof(_))
        ));
    }

    #[test]
    fn literal_parsing() {
        assert_eq!("u64:5".parse::<Value>().unwrap(), Value::U64(5));
        assert_eq!("i64:-3".parse::<Value>().unwrap(), Value::I64(-3));
        assert_eq!("str:\"a b\"".parse::<Value>().unwrap(), Value::str("a b"));
        assert_eq!("hex:00ff".parse::<Value>().unwrap(), Value::Bytes(vec![0, 255]));
        assert_eq!("unit".parse::<Value>().unwrap(), Value::Unit);
        assert!("float:1.0".parse::<Value>().is_err());
    }
}
