//! Certificate-style identity contract: a subject verification key plus an
//! owner-maintained list of `(kind, value)` attributes such as a human
//! readable name, a QR payload or an application id.

use super::named_key;
use crate::codec::{Args, Value};
use crate::runtime::{Behavior, ContractError, Ctx};

pub struct Identity;

pub const SUBJECT_KEY: &[u8] = b"subject_key";

pub fn attribute_key(kind: &str) -> Vec<u8> {
    named_key("attr", kind)
}

impl Behavior for Identity {
    fn code_id(&self) -> &'static str {
        "identity"
    }

    fn methods(&self) -> &'static [&'static str] {
        &["set_attribute", "revoke", "attributes", "subject_key"]
    }

    /// `init(subject_key: bytes)`
    fn init(&self, ctx: &mut Ctx<'_, '_>, args: &Args) -> Result<(), ContractError> {
        let key = args.bytes_at(0)?.to_vec();
        ctx.set_value(SUBJECT_KEY, &Value::Bytes(key));
        Ok(())
    }

    fn call(&self, ctx: &mut Ctx<'_, '_>, method: &str, args: &Args) -> Result<Value, ContractError> {
        match method {
            "set_attribute" => {
                ctx.require_owner()?;
                let kind = args.str_at(0)?;
                if kind.is_empty() {
                    return Err(ContractError::BadArgs);
                }
                let value = args.bytes_at(1)?.to_vec();
                ctx.set_value(&attribute_key(kind), &Value::Bytes(value));
                Ok(Value::Unit)
            }
            "revoke" => {
                ctx.require_owner()?;
                if !ctx.remove(&attribute_key(args.str_at(0)?)) {
                    return Err(ContractError::UnknownItem);
                }
                Ok(Value::Unit)
            }
            "attributes" => Ok(Value::List(
                ctx.scan_prefix(b"attr/")
                    .into_iter()
                    .map(|(k, v)| {
                        let kind = String::from_utf8_lossy(&k[5..]).into_owned();
                        let value = crate::codec::Canonical::from_bytes(&v).unwrap_or(Value::Unit);
                        Value::List(vec![Value::Str(kind), value])
                    })
                    .collect(),
            )),
            "subject_key" => Ok(ctx.get_value(SUBJECT_KEY).unwrap_or(Value::Unit)),
            _ => Err(ContractError::MethodNotFound),
        }
    }
}
