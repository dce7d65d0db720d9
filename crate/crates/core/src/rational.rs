//! Exact rational scalars and the binomial coefficients used throughout.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact rational number of unbounded size. `BigRational` keeps values
/// reduced with a positive denominator, which is the canonical form every
/// coefficient in this crate relies on.
pub type Rat = BigRational;

/// Shorthand for `n/d`.
pub fn rat(n: i64, d: i64) -> Rat {
    assert!(d != 0, "zero denominator");
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Shorthand for the integer `n` as a rational.
pub fn rint(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Binomial coefficient `C(n, k)` for non-negative `n`.
pub fn binomial(n: u64, k: u64) -> Rat {
    generalized_binomial(n as i64, k as u32)
}

/// Generalized binomial coefficient `C(j, i) = j(j-1)...(j-i+1) / i!`,
/// defined for every integer `j`. This is what the divided-power action
/// needs on negative exponents.
pub fn generalized_binomial(j: i64, i: u32) -> Rat {
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for s in 0..i as i64 {
        num *= BigInt::from(j - s);
        den *= BigInt::from(s + 1);
    }
    Rat::new(num, den)
}

/// Renders a rational the way the text formats expect: `3`, `-1/2`, ...
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `3`, `-5/7`, ... back into a rational.
pub fn parse_rat(text: &str) -> Option<Rat> {
    let text = text.trim();
    match text.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rat::new(n, d))
        }
        None => {
            let n: BigInt = text.parse().ok()?;
            Some(Rat::from_integer(n))
        }
    }
}

/// Sign helper: `(-1)^k`.
pub fn neg_one_pow(k: u32) -> Rat {
    if k % 2 == 0 {
        Rat::one()
    } else {
        -Rat::one()
    }
}

pub fn is_negative(r: &Rat) -> bool {
    r.is_negative()
}
