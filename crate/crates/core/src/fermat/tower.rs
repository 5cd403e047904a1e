use num_bigint::{BigInt, BigUint};
use num_traits::One;
use serde::{Deserialize, Serialize};

use super::Triplet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TowerValue {
    pub k: u32,
    pub value: BigInt,
    pub bit_length: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum SkipReason {
    ExceedsBitLimit { predicted_bits: f64, max_bits: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tower {
    Value(TowerValue),
    Skipped(SkipReason),
}

/// `b^k`, or `None` when it overflows `u64`.
pub fn tower_exponent(b: u64, k: u32) -> Option<u64> {
    b.checked_pow(k)
}

/// `b^k · log₂ a + 1`, saturating at `f64::MAX` so it always serializes.
pub fn predicted_bits(t: &Triplet, k: u32) -> f64 {
    let e = match tower_exponent(t.b, k) {
        Some(e) => e as f64,
        None => (t.b as f64).powf(k as f64),
    };
    (e * (t.a as f64).log2() + 1.0).min(f64::MAX)
}

/// Left-to-right square-and-multiply.
pub fn pow_square_multiply(base: &BigUint, exp: u64) -> BigUint {
    let mut acc = BigUint::one();
    for bit in (0..u64::BITS - exp.leading_zeros()).rev() {
        acc = &acc * &acc;
        if exp >> bit & 1 == 1 {
            acc *= base;
        }
    }
    acc
}

/// Exact `a^(b^k) + c`, or `Skipped` without computing anything when the
/// predicted size exceeds `max_bits`.
pub fn tower_value(t: &Triplet, k: u32, max_bits: u64) -> Tower {
    let predicted = predicted_bits(t, k);
    let skip = Tower::Skipped(SkipReason::ExceedsBitLimit {
        predicted_bits: predicted,
        max_bits,
    });
    if predicted > max_bits as f64 {
        return skip;
    }
    let Some(e) = tower_exponent(t.b, k) else {
        return skip;
    };
    let power = pow_square_multiply(&BigUint::from(t.a), e);
    let value = BigInt::from(power) + t.c;
    let bit_length = value.bits();
    Tower::Value(TowerValue {
        k,
        value,
        bit_length,
    })
}
