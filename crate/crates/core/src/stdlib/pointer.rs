//! Off-chain data pointers. The contract stores where an item lives and the
//! digest of its content; readers verify fetched bytes against the digest.
//! The owner may move an item (new uri) but never change its digest.

use super::named_key;
use crate::codec::{Args, Value};
use crate::hash::Hash;
use crate::runtime::{Behavior, ContractError, Ctx};

pub struct Pointer;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffChainPointer {
    pub uri: String,
    pub content_hash: Hash,
    pub producer_sig: Vec<u8>,
    pub description: Vec<u8>,
}

impl OffChainPointer {
    pub fn to_value(&self) -> Value {
        Value::List(vec![
            Value::Str(self.uri.clone()),
            Value::Id(self.content_hash),
            Value::Bytes(self.producer_sig.clone()),
            Value::Bytes(self.description.clone()),
        ])
    }

    pub fn from_value(v: &Value) -> Option<OffChainPointer> {
        let [uri, hash, sig, desc] = v.as_list()? else {
            return None;
        };
        Some(OffChainPointer {
            uri: uri.as_str()?.to_string(),
            content_hash: hash.as_id()?,
            producer_sig: sig.as_bytes()?.to_vec(),
            description: desc.as_bytes()?.to_vec(),
        })
    }
}

pub fn item_key(item_id: &str) -> Vec<u8> {
    named_key("item", item_id)
}

fn load(ctx: &Ctx<'_, '_>, item_id: &str) -> Option<OffChainPointer> {
    ctx.get_value(&item_key(item_id))
        .and_then(|v| OffChainPointer::from_value(&v))
}

impl Behavior for Pointer {
    fn code_id(&self) -> &'static str {
        "pointer"
    }

    fn methods(&self) -> &'static [&'static str] {
        &["announce", "verify", "get"]
    }

    fn call(&self, ctx: &mut Ctx<'_, '_>, method: &str, args: &Args) -> Result<Value, ContractError> {
        match method {
            // announce(item_id, uri, content_hash: id, producer_sig: bytes, description: bytes)
            "announce" => {
                ctx.require_owner()?;
                let item_id = args.str_at(0)?;
                if item_id.is_empty() {
                    return Err(ContractError::BadArgs);
                }
                let p = OffChainPointer {
                    uri: args.str_at(1)?.to_string(),
                    content_hash: args.id_at(2)?,
                    producer_sig: args.bytes_at(3)?.to_vec(),
                    description: args.bytes_at(4)?.to_vec(),
                };
                if let Some(existing) = load(ctx, item_id) {
                    if existing.content_hash != p.content_hash {
                        return Err(ContractError::AlreadyAnnounced);
                    }
                }
                ctx.set_value(&item_key(item_id), &p.to_value());
                Ok(Value::Unit)
            }
            // verify(item_id, data: bytes) -> bool
            "verify" => {
                let p = load(ctx, args.str_at(0)?).ok_or(ContractError::UnknownItem)?;
                Ok(Value::Bool(Hash::of(args.bytes_at(1)?) == p.content_hash))
            }
            "get" => load(ctx, args.str_at(0)?)
                .map(|p| p.to_value())
                .ok_or(ContractError::UnknownItem),
            _ => Err(ContractError::MethodNotFound),
        }
    }
}
