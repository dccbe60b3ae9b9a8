//! Authorization tokens checked on-chain. The owner issues opaque token ids
//! bound to a holder, a scope string and an expiry height. Every `check` is
//! a transaction, so each decision is appended to the contract's log.

use super::{named_key, next_seq, seq_key};
use crate::codec::{Args, Canonical, Value};
use crate::hash::AccountId;
use crate::runtime::{Behavior, ContractError, Ctx};

pub struct Access;

const CHECKS: &[u8] = b"checks";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessToken {
    pub holder: AccountId,
    pub scope: String,
    pub expiry: u64,
}

impl AccessToken {
    pub fn to_value(&self) -> Value {
        Value::List(vec![
            Value::account(self.holder),
            Value::Str(self.scope.clone()),
            Value::U64(self.expiry),
        ])
    }

    pub fn from_value(v: &Value) -> Option<AccessToken> {
        let [holder, scope, expiry] = v.as_list()? else {
            return None;
        };
        Some(AccessToken {
            holder: AccountId(holder.as_id()?),
            scope: scope.as_str()?.to_string(),
            expiry: expiry.as_u64()?,
        })
    }

    pub fn permits(&self, holder: &AccountId, scope: &str, height: u64) -> bool {
        self.holder == *holder && self.scope == scope && height <= self.expiry
    }
}

fn token_key(id: &str) -> Vec<u8> {
    named_key("token", id)
}

impl Behavior for Access {
    fn code_id(&self) -> &'static str {
        "access"
    }

    fn methods(&self) -> &'static [&'static str] {
        &["issue", "check", "token", "checks"]
    }

    fn call(&self, ctx: &mut Ctx<'_, '_>, method: &str, args: &Args) -> Result<Value, ContractError> {
        match method {
            // issue(token_id, holder, scope, expiry)
            "issue" => {
                ctx.require_owner()?;
                let id = args.str_at(0)?;
                if id.is_empty() {
                    return Err(ContractError::BadArgs);
                }
                let token = AccessToken {
                    holder: args.account_at(1)?,
                    scope: args.str_at(2)?.to_string(),
                    expiry: args.u64_at(3)?,
                };
                ctx.set_value(&token_key(id), &token.to_value());
                Ok(Value::Unit)
            }
            // check(token_id, holder, scope) -> bool
            "check" => {
                let id = args.str_at(0)?;
                let holder = args.account_at(1)?;
                let scope = args.str_at(2)?;
                let ok = ctx
                    .get_value(&token_key(id))
                    .and_then(|v| AccessToken::from_value(&v))
                    .is_some_and(|t| t.permits(&holder, scope, ctx.height()));
                let entry = Value::List(vec![
                    Value::str(id),
                    Value::account(holder),
                    Value::str(scope),
                    Value::U64(ctx.height()),
                    Value::Bool(ok),
                ]);
                let n = next_seq(ctx, CHECKS);
                ctx.set_value(&seq_key("check", n), &entry);
                ctx.emit("AccessCheck", entry.to_bytes());
                Ok(Value::Bool(ok))
            }
            "token" => ctx.get_value(&token_key(args.str_at(0)?)).ok_or(ContractError::UnknownItem),
            "checks" => Ok(Value::List(
                ctx.scan_prefix(b"check/")
                    .into_iter()
                    .filter_map(|(_, v)| Value::from_bytes(&v).ok())
                    .collect(),
            )),
            _ => Err(ContractError::MethodNotFound),
        }
    }
}
