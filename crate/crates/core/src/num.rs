use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{PrimInt, Unsigned};

/// Unsigned integer type used for occurrence counts and rule supports.
///
/// Implemented for every primitive unsigned integer; the crate-root aliases
/// pick `u64`.
pub trait Count:
    PrimInt + Unsigned + Integer + Hash + Debug + Display + FromStr + Send + Sync + 'static
{
}

impl<T> Count for T where
    T: PrimInt + Unsigned + Integer + Hash + Debug + Display + FromStr + Send + Sync + 'static
{
}

/// Parses `num/den` (or a bare integer) into a reduced ratio.
pub fn parse_ratio<C: Count>(s: &str) -> Option<Ratio<C>> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse().ok()?, d.trim().parse().ok()?),
        None => (s.trim().parse().ok()?, C::one()),
    };
    if den.is_zero() {
        return None;
    }
    Some(Ratio::new(num, den))
}

/// Converts a ratio to `f64` for display only; never used in comparisons.
pub fn ratio_to_f64<C: Count>(r: &Ratio<C>) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}
