//! Skeleton contract: a method table pointing at implementation contracts.
//!
//! Clients either `lookup` a method and call the implementation themselves
//! (the two-step flow) or let `forward` do the hop. Swapping a pointer is an
//! owner-only `update`, and every swap stays in the ledger history of the
//! `impl/<method>` cell.

use super::named_key;
use crate::codec::{Args, Value};
use crate::runtime::{Behavior, ContractError, Ctx};

pub struct Skeleton;

pub fn impl_key(method: &str) -> Vec<u8> {
    named_key("impl", method)
}

fn lookup(ctx: &Ctx<'_, '_>, method: &str) -> Result<Value, ContractError> {
    ctx.get_value(&impl_key(method)).ok_or(ContractError::MethodNotFound)
}

impl Behavior for Skeleton {
    fn code_id(&self) -> &'static str {
        "skeleton"
    }

    fn methods(&self) -> &'static [&'static str] {
        &["update", "lookup", "forward", "entries"]
    }

    fn call(&self, ctx: &mut Ctx<'_, '_>, method: &str, args: &Args) -> Result<Value, ContractError> {
        match method {
            // update(method: str, impl: id)
            "update" => {
                ctx.require_owner()?;
                let name = args.str_at(0)?;
                if name.is_empty() {
                    return Err(ContractError::BadArgs);
                }
                ctx.set_value(&impl_key(name), &Value::address(args.address_at(1)?));
                Ok(Value::Unit)
            }
            "lookup" => lookup(ctx, args.str_at(0)?),
            // forward(method: str, args: list)
            "forward" => {
                let name = args.str_at(0)?.to_string();
                let target = lookup(ctx, &name)?.as_id().ok_or(ContractError::BadArgs)?;
                let inner = Args::new(args.list_at(1)?.to_vec());
                ctx.call(crate::hash::ContractAddress(target), &name, &inner, 0)
            }
            "entries" => Ok(Value::List(
                ctx.scan_prefix(b"impl/")
                    .into_iter()
                    .filter_map(|(k, v)| {
                        let name = String::from_utf8_lossy(&k[5..]).into_owned();
                        let addr = crate::codec::Canonical::from_bytes(&v).ok()?;
                        Some(Value::List(vec![Value::Str(name), addr]))
                    })
                    .collect(),
            )),
            _ => Err(ContractError::MethodNotFound),
        }
    }
}
