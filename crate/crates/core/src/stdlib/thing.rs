//! Device description contracts.
//!
//! `thing-stub` is what a manufacturer ships: a model name, a description, a
//! data location and a capability list. `thing-ext` is a third-party
//! extension that keeps every stub method with the same signature and
//! behavior and adds capability management and calibration, so any client
//! written against the stub works unchanged against the extension.

use super::named_key;
use crate::codec::{Args, Value};
use crate::runtime::{Behavior, ContractError, Ctx};

pub struct ThingStub;
pub struct ThingExt;

const MODEL: &[u8] = b"model";
const DESCRIPTION: &[u8] = b"description";
const URI: &[u8] = b"uri";
const CALIBRATION: &[u8] = b"calibration";
const BASE_CAPABILITIES: &[&str] = &["measure"];

const STUB_METHODS: &[&str] = &["describe", "get_uri", "set_uri", "capabilities"];

fn stub_init(ctx: &mut Ctx<'_, '_>, args: &Args) -> Result<(), ContractError> {
    ctx.set_value(MODEL, &Value::str(args.str_at(0)?));
    ctx.set_value(DESCRIPTION, &Value::str(args.str_at(1)?));
    Ok(())
}

fn capabilities(ctx: &Ctx<'_, '_>) -> Value {
    let mut caps: Vec<Value> = BASE_CAPABILITIES.iter().map(|c| Value::str(*c)).collect();
    for (k, _) in ctx.scan_prefix(b"cap/") {
        caps.push(Value::Str(String::from_utf8_lossy(&k[4..]).into_owned()));
    }
    Value::List(caps)
}

fn stub_call(ctx: &mut Ctx<'_, '_>, method: &str, args: &Args) -> Result<Value, ContractError> {
    match method {
        "describe" => Ok(Value::List(vec![
            ctx.get_value(MODEL).unwrap_or(Value::Unit),
            ctx.get_value(DESCRIPTION).unwrap_or(Value::Unit),
        ])),
        "get_uri" => Ok(ctx.get_value(URI).unwrap_or(Value::Unit)),
        "set_uri" => {
            ctx.require_owner()?;
            ctx.set_value(URI, &Value::str(args.str_at(0)?));
            Ok(Value::Unit)
        }
        "capabilities" => Ok(capabilities(ctx)),
        _ => Err(ContractError::MethodNotFound),
    }
}

impl Behavior for ThingStub {
    fn code_id(&self) -> &'static str {
        "thing-stub"
    }

    fn methods(&self) -> &'static [&'static str] {
        STUB_METHODS
    }

    /// `init(model: str, description: str)`
    fn init(&self, ctx: &mut Ctx<'_, '_>, args: &Args) -> Result<(), ContractError> {
        stub_init(ctx, args)
    }

    fn call(&self, ctx: &mut Ctx<'_, '_>, method: &str, args: &Args) -> Result<Value, ContractError> {
        stub_call(ctx, method, args)
    }
}

impl Behavior for ThingExt {
    fn code_id(&self) -> &'static str {
        "thing-ext"
    }

    fn methods(&self) -> &'static [&'static str] {
        &[
            "describe",
            "get_uri",
            "set_uri",
            "capabilities",
            "add_capability",
            "calibrate",
            "calibration",
        ]
    }

    fn init(&self, ctx: &mut Ctx<'_, '_>, args: &Args) -> Result<(), ContractError> {
        stub_init(ctx, args)
    }

    fn call(&self, ctx: &mut Ctx<'_, '_>, method: &str, args: &Args) -> Result<Value, ContractError> {
        match method {
            "add_capability" => {
                ctx.require_owner()?;
                let cap = args.str_at(0)?;
                if cap.is_empty() || BASE_CAPABILITIES.contains(&cap) {
                    return Err(ContractError::BadArgs);
                }
                ctx.set_value(&named_key("cap", cap), &Value::Bool(true));
                Ok(Value::Unit)
            }
            // calibrate(offset: i64 milli)
            "calibrate" => {
                ctx.require_owner()?;
                ctx.set_value(CALIBRATION, &Value::I64(args.i64_at(0)?));
                Ok(Value::Unit)
            }
            "calibration" => Ok(ctx.get_value(CALIBRATION).unwrap_or(Value::I64(0))),
            _ => stub_call(ctx, method, args),
        }
    }
}
