//! Escrowed service payments. A customer commits tokens for a provider;
//! the contract holds them until the customer confirms delivery (tokens go
//! to the provider) or the deadline passes and the customer takes a refund.

use std::fmt;

use super::{next_seq, seq_key};
use crate::codec::{Args, Canonical, Value};
use crate::hash::AccountId;
use crate::runtime::{Behavior, ContractError, Ctx};

pub struct Escrow;

const NEXT_DEAL: &[u8] = b"next_deal";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DealState {
    Committed,
    Released,
    Refunded,
}

impl DealState {
    fn as_str(self) -> &'static str {
        match self {
            DealState::Committed => "Committed",
            DealState::Released => "Released",
            DealState::Refunded => "Refunded",
        }
    }

    fn parse(s: &str) -> Option<DealState> {
        Some(match s {
            "Committed" => DealState::Committed,
            "Released" => DealState::Released,
            "Refunded" => DealState::Refunded,
            _ => return None,
        })
    }
}

impl fmt::Display for DealState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EscrowDeal {
    pub customer: AccountId,
    pub provider: AccountId,
    pub amount: u64,
    /// Last height at which a refund is still refused.
    pub deadline: u64,
    pub state: DealState,
}

impl EscrowDeal {
    pub fn to_value(&self) -> Value {
        Value::List(vec![
            Value::account(self.customer),
            Value::account(self.provider),
            Value::U64(self.amount),
            Value::U64(self.deadline),
            Value::str(self.state.as_str()),
        ])
    }

    pub fn from_value(v: &Value) -> Option<EscrowDeal> {
        let [customer, provider, amount, deadline, state] = v.as_list()? else {
            return None;
        };
        Some(EscrowDeal {
            customer: AccountId(customer.as_id()?),
            provider: AccountId(provider.as_id()?),
            amount: amount.as_u64()?,
            deadline: deadline.as_u64()?,
            state: DealState::parse(state.as_str()?)?,
        })
    }
}

fn load(ctx: &Ctx<'_, '_>, id: u64) -> Result<EscrowDeal, ContractError> {
    ctx.get_value(&seq_key("deal", id))
        .and_then(|v| EscrowDeal::from_value(&v))
        .ok_or(ContractError::UnknownDeal)
}

fn settle(ctx: &mut Ctx<'_, '_>, id: u64, refund: bool) -> Result<Value, ContractError> {
    let mut deal = load(ctx, id)?;
    if ctx.caller() != deal.customer {
        return Err(ContractError::NotCustomer);
    }
    if deal.state != DealState::Committed {
        return Err(ContractError::AlreadySettled);
    }
    let (to, state, event) = if refund {
        if ctx.height() <= deal.deadline {
            return Err(ContractError::TooEarly);
        }
        (deal.customer, DealState::Refunded, "Refunded")
    } else {
        (deal.provider, DealState::Released, "Released")
    };
    ctx.pay(to, deal.amount)?;
    deal.state = state;
    ctx.set_value(&seq_key("deal", id), &deal.to_value());
    ctx.emit(event, Value::List(vec![Value::U64(id), Value::U64(deal.amount)]).to_bytes());
    Ok(Value::U64(deal.amount))
}

impl Behavior for Escrow {
    fn code_id(&self) -> &'static str {
        "escrow"
    }

    fn methods(&self) -> &'static [&'static str] {
        &["commit", "confirm", "refund", "deal"]
    }

    fn call(&self, ctx: &mut Ctx<'_, '_>, method: &str, args: &Args) -> Result<Value, ContractError> {
        match method {
            // commit(provider, amount, deadline) with `amount` tokens attached
            "commit" => {
                let provider = args.account_at(0)?;
                let amount = args.u64_at(1)?;
                let deadline = args.u64_at(2)?;
                if amount == 0 {
                    return Err(ContractError::BadArgs);
                }
                if ctx.attached_tokens() != amount {
                    return Err(ContractError::InsufficientTokens);
                }
                let id = next_seq(ctx, NEXT_DEAL);
                let deal = EscrowDeal {
                    customer: ctx.caller(),
                    provider,
                    amount,
                    deadline,
                    state: DealState::Committed,
                };
                ctx.set_value(&seq_key("deal", id), &deal.to_value());
                ctx.emit("Committed", Value::List(vec![Value::U64(id), Value::U64(amount)]).to_bytes());
                Ok(Value::U64(id))
            }
            "confirm" => settle(ctx, args.u64_at(0)?, false),
            "refund" => settle(ctx, args.u64_at(0)?, true),
            "deal" => Ok(load(ctx, args.u64_at(0)?)?.to_value()),
            _ => Err(ContractError::MethodNotFound),
        }
    }
}
