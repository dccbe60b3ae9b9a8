use std::fmt;
use std::str::FromStr;

/// Signed fixed-point number with three decimal places (scale 10^-3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Milli(pub i64);

impl Milli {
    pub const SCALE: i64 = 1000;

    pub fn from_units(units: i64) -> Milli {
        Milli(units * Self::SCALE)
    }

    /// Mean of `values`, rounded half-up (towards +inf on exact halves).
    pub fn mean_half_up(values: impl IntoIterator<Item = Milli>) -> Option<Milli> {
        let (sum, count) = values
            .into_iter()
            .fold((0i128, 0i128), |(s, c), v| (s + v.0 as i128, c + 1));
        if count == 0 {
            return None;
        }
        Some(Milli((2 * sum + count).div_euclid(2 * count) as i64))
    }
}

impl fmt::Display for Milli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:03}", abs / 1000, abs % 1000)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not a decimal with at most three fractional digits: {0:?}")]
pub struct ParseMilliError(pub String);

impl FromStr for Milli {
    type Err = ParseMilliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseMilliError(s.to_string());
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty()
            || frac_part.len() > 3
            || !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
            || (body.contains('.') && frac_part.is_empty())
        {
            return Err(err());
        }
        let int: i64 = int_part.parse().map_err(|_| err())?;
        let frac: i64 = format!("{frac_part:0<3}").parse().map_err(|_| err())?;
        let abs = int
            .checked_mul(Milli::SCALE)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(err)?;
        Ok(Milli(if neg { -abs } else { abs }))
    }
}
