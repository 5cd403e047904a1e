//! Compositeness proofs by algebraic form, checked before any big-integer work.

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use super::tower::{pow_square_multiply, tower_exponent};
use super::{smallest_odd_prime_factor, smallest_prime_factor, Triplet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum CompositeReason {
    /// `a` and `c` odd: `P(k)` is even and greater than 2.
    Parity,
    /// `c = 1` and the odd prime `odd_prime` divides `b^k`:
    /// `a^(b^k/p) + 1` divides `P(k)`.
    PlusOneForm { odd_prime: u64 },
    /// `c = -1`: `a^f - 1` divides `P(k)` for `f | b^k`, `f < b^k`.
    /// `f = 1` is the `a - 1` factor (needs `a > 2`).
    MinusOneForm { exponent_factor: u64 },
}

impl CompositeReason {
    pub fn name(&self) -> &'static str {
        match self {
            CompositeReason::Parity => "parity",
            CompositeReason::PlusOneForm { .. } => "plus_one_form",
            CompositeReason::MinusOneForm { .. } => "minus_one_form",
        }
    }

    /// The proper divisor the reason exhibits, computed exactly when its
    /// exponent stays below `max_bits` bits.
    pub fn divisor(&self, t: &Triplet, k: u32, max_bits: u64) -> Option<BigUint> {
        let a = BigUint::from(t.a);
        let small = |exp: u64| exp as f64 * (t.a as f64).log2() <= max_bits as f64;
        match *self {
            CompositeReason::Parity => Some(BigUint::from(2u32)),
            CompositeReason::PlusOneForm { odd_prime } => {
                let e = tower_exponent(t.b, k)? / odd_prime;
                small(e).then(|| pow_square_multiply(&a, e) + BigUint::one())
            }
            CompositeReason::MinusOneForm { exponent_factor } => small(exponent_factor)
                .then(|| pow_square_multiply(&a, exponent_factor) - BigUint::one()),
        }
    }
}

/// `a^(b^k)` as `u128`, or `None` on overflow.
fn small_power(a: u64, b: u64, k: u32) -> Option<u128> {
    let e = u32::try_from(tower_exponent(b, k)?).ok()?;
    (a as u128).checked_pow(e)
}

/// A reason `P(k)` is certainly composite, or `None` when no form applies.
///
/// The filter only fires when the proof is complete, including the
/// exceptional small cases (`P(k) = 2` under parity, `P(k) <= 1` for negative
/// `c`), which it settles exactly with machine arithmetic.
pub fn algebraic_filter(t: &Triplet, k: u32) -> Option<CompositeReason> {
    let (a, b, c) = (t.a, t.b, t.c);

    if a % 2 == 1 && c.rem_euclid(2) == 1 {
        let beyond_two = if c > 0 {
            true
        } else {
            // P(k) > 2  <=>  a^(b^k) > 2 - c
            let threshold = 2u128 + c.unsigned_abs() as u128;
            small_power(a, b, k).is_none_or(|p| p > threshold)
        };
        if beyond_two {
            return Some(CompositeReason::Parity);
        }
    }

    if c == 1 && k >= 1 {
        if let Some(p) = smallest_odd_prime_factor(b) {
            return Some(CompositeReason::PlusOneForm { odd_prime: p });
        }
    }

    if c == -1 {
        if a > 2 && k >= 1 {
            return Some(CompositeReason::MinusOneForm { exponent_factor: 1 });
        }
        // b^k composite: k >= 2, or k = 1 with b composite.
        let spf = smallest_prime_factor(b);
        if k >= 2 || (k == 1 && spf < b) {
            return Some(CompositeReason::MinusOneForm {
                exponent_factor: spf,
            });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermat::tower::{tower_value, Tower};
    use num_bigint::BigInt;
    use num_traits::Zero;

    fn t(a: u64, b: u64, c: i64) -> Triplet {
        Triplet { a, b, c }
    }

    #[test]
    fn examples() {
        for k in 0..10 {
            assert_eq!(
                algebraic_filter(&t(3, 2, 5), k),
                Some(CompositeReason::Parity)
            );
        }
        assert_eq!(
            algebraic_filter(&t(2, 3, 1), 1),
            Some(CompositeReason::PlusOneForm { odd_prime: 3 })
        );
        assert_eq!(algebraic_filter(&t(2, 3, 1), 0), None);
        assert_eq!(algebraic_filter(&t(2, 2, 1), 5), None);
    }

    #[test]
    fn parity_exceptions_are_left_to_exact_testing() {
        // 3^1 - 1 = 2 is prime; 3^1 - 3 = 0 and 3 - 5 = -2 are not candidates.
        assert_eq!(algebraic_filter(&t(3, 2, -1), 0), None);
        assert_eq!(algebraic_filter(&t(5, 2, -3), 0), None);
        assert_eq!(algebraic_filter(&t(3, 2, -5), 0), None);
        assert_eq!(
            algebraic_filter(&t(3, 2, -5), 1),
            Some(CompositeReason::Parity)
        );
    }

    #[test]
    fn mersenne_style() {
        let m = t(2, 3, -1);
        assert_eq!(algebraic_filter(&m, 0), None);
        assert_eq!(algebraic_filter(&m, 1), None); // 2^3 - 1 = 7
        assert_eq!(
            algebraic_filter(&m, 2),
            Some(CompositeReason::MinusOneForm { exponent_factor: 3 })
        );
        assert_eq!(
            algebraic_filter(&t(2, 4, -1), 1),
            Some(CompositeReason::MinusOneForm { exponent_factor: 2 })
        );
        assert_eq!(
            algebraic_filter(&t(4, 3, -1), 1),
            Some(CompositeReason::MinusOneForm { exponent_factor: 1 })
        );
    }

    /// Every firing filter exhibits a proper divisor of the exact value.
    #[test]
    fn filter_soundness_by_direct_division() {
        let mut fired = 0;
        for a in 2..=12u64 {
            for b in 2..=6u64 {
                for c in -12..=12i64 {
                    if num_integer::Integer::gcd(&(a as i64), &c) != 1 {
                        continue;
                    }
                    let tr = t(a, b, c);
                    for k in 0..=3 {
                        let Some(reason) = algebraic_filter(&tr, k) else {
                            continue;
                        };
                        let Tower::Value(v) = tower_value(&tr, k, 1 << 14) else {
                            continue;
                        };
                        fired += 1;
                        let d = BigInt::from(reason.divisor(&tr, k, 1 << 14).unwrap());
                        assert!(d > BigInt::from(1), "{tr} k={k} {reason:?}");
                        assert!(d < v.value, "{tr} k={k} {reason:?}");
                        assert!((&v.value % &d).is_zero(), "{tr} k={k} {reason:?}");
                    }
                }
            }
        }
        assert!(fired > 500);
    }
}
