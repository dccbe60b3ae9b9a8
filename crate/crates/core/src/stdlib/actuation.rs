//! Event-driven actuation. Authorized actors call `request`, which emits an
//! `Actuate` event that the Thing (through its gateway) watches for.
//!
//! Every decision is logged. Grants are appended to the contract's `log/`
//! cells; a denial reverts the call, so it is recorded as a durable `Denied`
//! event in the transaction receipt instead.

use super::{next_seq, seq_key, MemberList};
use crate::codec::{Args, Canonical, Value};
use crate::hash::AccountId;
use crate::runtime::{Behavior, ContractError, Ctx};

pub struct Actuation;

const ACTORS: MemberList = MemberList("actor");
const LOG_LEN: &[u8] = b"log_len";
pub const ACTUATE_EVENT: &str = "Actuate";
pub const DENIED_EVENT: &str = "Denied";

/// Decoded payload of an `Actuate` event.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActuationRequest {
    pub action: String,
    pub args: Vec<u8>,
    pub caller: AccountId,
}

impl ActuationRequest {
    pub fn to_value(&self) -> Value {
        Value::List(vec![
            Value::Str(self.action.clone()),
            Value::Bytes(self.args.clone()),
            Value::account(self.caller),
        ])
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<ActuationRequest> {
        let v = Value::from_bytes(bytes).ok()?;
        let [action, args, caller] = v.as_list()? else {
            return None;
        };
        Some(ActuationRequest {
            action: action.as_str()?.to_string(),
            args: args.as_bytes()?.to_vec(),
            caller: AccountId(caller.as_id()?),
        })
    }
}

/// One access decision: `[decision, caller, action, height]`.
pub fn decision(granted: bool, caller: AccountId, action: &str, height: u64) -> Value {
    Value::List(vec![
        Value::str(if granted { "Granted" } else { "Denied" }),
        Value::account(caller),
        Value::str(action),
        Value::U64(height),
    ])
}

impl Behavior for Actuation {
    fn code_id(&self) -> &'static str {
        "actuation"
    }

    fn methods(&self) -> &'static [&'static str] {
        &["request", "add_actor", "remove_actor", "log", "log_len"]
    }

    fn call(&self, ctx: &mut Ctx<'_, '_>, method: &str, args: &Args) -> Result<Value, ContractError> {
        match method {
            // request(action: str, args: bytes)
            "request" => {
                let req = ActuationRequest {
                    action: args.str_at(0)?.to_string(),
                    args: args.opt_at(1).and_then(Value::as_bytes).unwrap_or_default().to_vec(),
                    caller: ctx.caller(),
                };
                if req.action.is_empty() {
                    return Err(ContractError::BadArgs);
                }
                if ACTORS.require(ctx).is_err() {
                    let entry = decision(false, req.caller, &req.action, ctx.height());
                    ctx.audit(DENIED_EVENT, entry.to_bytes());
                    return Err(ContractError::NotAuthorized);
                }
                let n = next_seq(ctx, LOG_LEN);
                ctx.set_value(&seq_key("log", n), &decision(true, req.caller, &req.action, ctx.height()));
                ctx.emit(ACTUATE_EVENT, req.to_value().to_bytes());
                Ok(Value::U64(n))
            }
            "add_actor" => ACTORS.add(ctx, &args.account_at(0)?),
            "remove_actor" => ACTORS.remove(ctx, &args.account_at(0)?),
            "log" => Ok(Value::List(
                ctx.scan_prefix(b"log/")
                    .into_iter()
                    .filter_map(|(_, v)| Value::from_bytes(&v).ok())
                    .collect(),
            )),
            "log_len" => Ok(Value::U64(
                ctx.get_value(LOG_LEN).and_then(|v| v.as_u64()).unwrap_or(0),
            )),
            _ => Err(ContractError::MethodNotFound),
        }
    }
}
