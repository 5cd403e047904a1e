//! Generalized Fermat values `P(k) = a^(b^k) + c` with `a, b ≥ 2` and
//! `gcd(a, c) = 1`: exact evaluation, algebraic compositeness filters,
//! layered primality testing, and prime searches over `k`.

mod filter;
mod primality;
mod search;
mod tower;

pub use filter::{algebraic_filter, CompositeReason};
pub use primality::{
    primality, Evidence, PrimalityTester, PrimalityVerdict, Status, DETERMINISTIC_BASES,
    DETERMINISTIC_LIMIT,
};
pub use search::{
    find_k0, prime_positions, prime_streak, sweep, verdict_at, FilterHit, KVerdict, SearchRecord,
    SearchSink, SweepOptions, SweepSkip, SweepSummary, Timing,
};
pub use tower::{
    pow_square_multiply, predicted_bits, tower_exponent, tower_value, SkipReason, Tower, TowerValue,
};

use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum FermatError {
    #[error("base a must be >= 2, got {0}")]
    BadBase(i64),
    #[error("exponent base b must be >= 2, got {0}")]
    BadExponentBase(i64),
    #[error("a and c must be coprime: gcd({a}, {c}) = {gcd}")]
    NotCoprime { a: i64, c: i64, gcd: i64 },
    #[error("empty range {0}")]
    EmptyRange(String),
    #[error("record sink failed: {0}")]
    SinkFailure(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub a: u64,
    pub b: u64,
    pub c: i64,
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

pub fn validate_triplet(a: i64, b: i64, c: i64) -> Result<Triplet, FermatError> {
    if a < 2 {
        return Err(FermatError::BadBase(a));
    }
    if b < 2 {
        return Err(FermatError::BadExponentBase(b));
    }
    let gcd = a.gcd(&c);
    if gcd != 1 {
        return Err(FermatError::NotCoprime { a, c, gcd });
    }
    Ok(Triplet {
        a: a as u64,
        b: b as u64,
        c,
    })
}

/// Work limits for one search; echoed into every record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy {
    pub max_bits: u64,
    pub trial_bound: u64,
    pub mr_rounds: u32,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            max_bits: 65_536,
            trial_bound: 100_000,
            mr_rounds: 24,
        }
    }
}

impl Policy {
    /// Stable short hash of the policy; also seeds the probabilistic bases.
    pub fn fingerprint(&self) -> String {
        let digest = self.digest();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub(crate) fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"conjlab-policy-v1");
        h.update(self.max_bits.to_le_bytes());
        h.update(self.trial_bound.to_le_bytes());
        h.update(self.mr_rounds.to_le_bytes());
        h.finalize().into()
    }
}

/// Smallest prime factor of `n >= 2`.
pub(crate) fn smallest_prime_factor(n: u64) -> u64 {
    if n.is_multiple_of(2) {
        return 2;
    }
    let mut p = 3;
    while p * p <= n {
        if n.is_multiple_of(p) {
            return p;
        }
        p += 2;
    }
    n
}

/// Smallest odd prime factor of `n`, if any.
pub(crate) fn smallest_odd_prime_factor(mut n: u64) -> Option<u64> {
    while n > 0 && n.is_multiple_of(2) {
        n /= 2;
    }
    (n > 1).then(|| smallest_prime_factor(n))
}
