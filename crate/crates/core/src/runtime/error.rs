use std::fmt;
use std::str::FromStr;

macro_rules! contract_errors {
    ($($name:ident = $code:literal => $msg:literal,)*) => {
        /// Reason codes carried by reverted receipts.
        ///
        /// The numeric code is what goes on the wire and into blocks; the
        /// variant name is what the gateway and CLI print.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum ContractError {
            $($name,)*
        }

        impl ContractError {
            pub const ALL: &'static [ContractError] = &[$(ContractError::$name,)*];

            pub fn code(self) -> u16 {
                match self { $(ContractError::$name => $code,)* }
            }

            pub fn from_code(code: u16) -> Option<Self> {
                match code { $($code => Some(ContractError::$name),)* _ => None }
            }

            pub fn name(self) -> &'static str {
                match self { $(ContractError::$name => stringify!($name),)* }
            }

            fn message(self) -> &'static str {
                match self { $(ContractError::$name => $msg,)* }
            }
        }

        impl FromStr for ContractError {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $(stringify!($name) => Ok(ContractError::$name),)*
                    _ => Err(format!("unknown reason code {s:?}")),
                }
            }
        }
    };
}

contract_errors! {
    UnknownCode = 1 => "no behavior registered under this code id",
    UnknownContract = 2 => "no contract at this address",
    ContractKilled = 3 => "contract has been killed",
    MethodNotFound = 4 => "method not found",
    NotOwner = 5 => "caller is not the contract owner",
    AlreadyKilled = 6 => "contract already killed",
    ReentrancyLimit = 7 => "nested call depth limit reached",
    BadArgs = 8 => "malformed or missing arguments",
    InsufficientTokens = 9 => "insufficient tokens",
    UnknownAccount = 10 => "unknown account",
    NotAuthorized = 11 => "caller not authorized",
    BadLabel = 12 => "label must be 1-63 ASCII letters, digits, '-' or '_'",
    EmptyWindow = 13 => "no measurements in window",
    NonMonotonicTick = 14 => "measurement tick earlier than the previous one",
    UnknownItem = 15 => "unknown item",
    AlreadyAnnounced = 16 => "item already announced with a different content hash",
    BadPattern = 17 => "malformed topic pattern or path",
    UnknownSub = 18 => "unknown subscription",
    NotCustomer = 19 => "caller is not the deal's customer",
    TooEarly = 20 => "deadline has not passed",
    AlreadySettled = 21 => "deal already settled",
    UnknownDeal = 22 => "unknown deal",
}

impl fmt::Display for ContractError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.name(), self.message())
    }
}

impl std::error::Error for ContractError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_and_names_roundtrip() {
        for &e in ContractError::ALL {
            assert_eq!(ContractError::from_code(e.code()), Some(e));
            assert_eq!(e.name().parse::<ContractError>(), Ok(e));
        }
        assert_eq!(ContractError::from_code(0), None);
    }
}
