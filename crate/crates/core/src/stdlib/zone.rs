//! DNS-like zone contract. Each label maps to a record set that may hold a
//! delegation to a child zone contract, leaf records, or both. Only the zone
//! owner (the registrant) can change mappings, and every change stays in the
//! key's ledger history.
//!
//! The `uri` record locates data; it is not meant for host addressing, since
//! anything stored here can be enumerated by every reader of the chain.

use super::named_key;
use crate::codec::{Args, Value};
use crate::hash::ContractAddress;
use crate::runtime::{Behavior, ContractError, Ctx};

pub struct Zone;

pub const MAX_LABEL_LEN: usize = 63;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NameRecord {
    pub delegation: Option<ContractAddress>,
    pub service_key: Option<Vec<u8>>,
    pub uri: Option<String>,
    pub text: Option<Vec<u8>>,
}

impl NameRecord {
    pub fn leaf(service_key: Option<Vec<u8>>, uri: Option<String>, text: Option<Vec<u8>>) -> Self {
        NameRecord {
            delegation: None,
            service_key,
            uri,
            text,
        }
    }

    pub fn has_leaf(&self) -> bool {
        self.service_key.is_some() || self.uri.is_some() || self.text.is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.delegation.is_none() && !self.has_leaf()
    }

    pub fn to_value(&self) -> Value {
        fn opt<T>(v: &Option<T>, f: impl Fn(&T) -> Value) -> Value {
            v.as_ref().map_or(Value::Unit, f)
        }
        Value::List(vec![
            opt(&self.delegation, |a| Value::address(*a)),
            opt(&self.service_key, |k| Value::Bytes(k.clone())),
            opt(&self.uri, |u| Value::Str(u.clone())),
            opt(&self.text, |t| Value::Bytes(t.clone())),
        ])
    }

    pub fn from_value(v: &Value) -> Option<NameRecord> {
        let [d, k, u, t] = v.as_list()? else {
            return None;
        };
        Some(NameRecord {
            delegation: if d.is_unit() { None } else { Some(ContractAddress(d.as_id()?)) },
            service_key: if k.is_unit() { None } else { Some(k.as_bytes()?.to_vec()) },
            uri: if u.is_unit() { None } else { Some(u.as_str()?.to_string()) },
            text: if t.is_unit() { None } else { Some(t.as_bytes()?.to_vec()) },
        })
    }
}

/// Case-folds and validates a label: 1 to 63 ASCII letters, digits, `-` or `_`.
pub fn normalize_label(label: &str) -> Result<String, ContractError> {
    if label.is_empty()
        || label.len() > MAX_LABEL_LEN
        || !label
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
    {
        return Err(ContractError::BadLabel);
    }
    Ok(label.to_ascii_lowercase())
}

/// Storage key holding the record set for an already-normalized label.
pub fn label_key(label: &str) -> Vec<u8> {
    named_key("label", label)
}

fn load(ctx: &Ctx<'_, '_>, label: &str) -> NameRecord {
    ctx.get_value(&label_key(label))
        .and_then(|v| NameRecord::from_value(&v))
        .unwrap_or_default()
}

fn store(ctx: &mut Ctx<'_, '_>, label: &str, rec: &NameRecord) {
    if rec.is_empty() {
        ctx.remove(&label_key(label));
    } else {
        ctx.set_value(&label_key(label), &rec.to_value());
    }
}

impl Behavior for Zone {
    fn code_id(&self) -> &'static str {
        "zone"
    }

    fn methods(&self) -> &'static [&'static str] {
        &["set_mapping", "delegate", "remove", "lookup", "labels"]
    }

    fn call(&self, ctx: &mut Ctx<'_, '_>, method: &str, args: &Args) -> Result<Value, ContractError> {
        match method {
            // set_mapping(label, service_key: bytes|unit, uri: str|unit, text: bytes|unit)
            "set_mapping" => {
                ctx.require_owner()?;
                let label = normalize_label(args.str_at(0)?)?;
                let service_key = match args.opt_at(1) {
                    None => None,
                    Some(v) => Some(v.as_bytes().ok_or(ContractError::BadArgs)?.to_vec()),
                };
                let uri = match args.opt_at(2) {
                    None => None,
                    Some(v) => Some(v.as_str().ok_or(ContractError::BadArgs)?.to_string()),
                };
                let text = match args.opt_at(3) {
                    None => None,
                    Some(v) => Some(v.as_bytes().ok_or(ContractError::BadArgs)?.to_vec()),
                };
                let mut rec = load(ctx, &label);
                rec.service_key = service_key;
                rec.uri = uri;
                rec.text = text;
                store(ctx, &label, &rec);
                Ok(Value::Unit)
            }
            // delegate(label, zone: id)
            "delegate" => {
                ctx.require_owner()?;
                let label = normalize_label(args.str_at(0)?)?;
                let target = args.address_at(1)?;
                let mut rec = load(ctx, &label);
                rec.delegation = Some(target);
                store(ctx, &label, &rec);
                Ok(Value::Unit)
            }
            "remove" => {
                ctx.require_owner()?;
                let label = normalize_label(args.str_at(0)?)?;
                if !ctx.remove(&label_key(&label)) {
                    return Err(ContractError::UnknownItem);
                }
                Ok(Value::Unit)
            }
            "lookup" => {
                let label = normalize_label(args.str_at(0)?)?;
                Ok(ctx
                    .get_value(&label_key(&label))
                    .unwrap_or(Value::Unit))
            }
            "labels" => Ok(Value::List(
                ctx.scan_prefix(b"label/")
                    .into_iter()
                    .map(|(k, _)| Value::Str(String::from_utf8_lossy(&k[6..]).into_owned()))
                    .collect(),
            )),
            _ => Err(ContractError::MethodNotFound),
        }
    }
}
