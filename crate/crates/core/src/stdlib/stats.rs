//! Pure statistics implementations used behind a skeleton.
//!
//! `stats-v1` truncates the mean toward zero; `stats-v2` rounds half-up like
//! the feed contract. Both take a list of milli-unit `i64` values.

use super::Milli;
use crate::codec::{Args, Value};
use crate::runtime::{Behavior, ContractError, Ctx};

pub struct StatsV1;
pub struct StatsV2;

fn values(args: &Args) -> Result<Vec<i64>, ContractError> {
    let list = args.list_at(0)?;
    if list.is_empty() {
        return Err(ContractError::EmptyWindow);
    }
    list.iter()
        .map(|v| v.as_i64().ok_or(ContractError::BadArgs))
        .collect()
}

/// Mean truncated toward zero.
pub fn mean_truncating(values: &[i64]) -> Option<i64> {
    if values.is_empty() {
        return None;
    }
    let sum: i128 = values.iter().map(|&v| v as i128).sum();
    Some((sum / values.len() as i128) as i64)
}

fn dispatch(
    version: u64,
    mean: fn(&[i64]) -> Option<i64>,
    method: &str,
    args: &Args,
) -> Result<Value, ContractError> {
    match method {
        "mean" => Ok(Value::I64(mean(&values(args)?).ok_or(ContractError::EmptyWindow)?)),
        "version" => Ok(Value::U64(version)),
        _ => Err(ContractError::MethodNotFound),
    }
}

impl Behavior for StatsV1 {
    fn code_id(&self) -> &'static str {
        "stats-v1"
    }

    fn methods(&self) -> &'static [&'static str] {
        &["mean", "version"]
    }

    fn call(&self, _: &mut Ctx<'_, '_>, method: &str, args: &Args) -> Result<Value, ContractError> {
        dispatch(1, mean_truncating, method, args)
    }
}

impl Behavior for StatsV2 {
    fn code_id(&self) -> &'static str {
        "stats-v2"
    }

    fn methods(&self) -> &'static [&'static str] {
        &["mean", "version"]
    }

    fn call(&self, _: &mut Ctx<'_, '_>, method: &str, args: &Args) -> Result<Value, ContractError> {
        dispatch(
            2,
            |v| Milli::mean_half_up(v.iter().map(|&x| Milli(x))).map(|m| m.0),
            method,
            args,
        )
    }
}
