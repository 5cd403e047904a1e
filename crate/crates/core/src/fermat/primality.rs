//! Layered primality: trial division, deterministic Miller–Rabin below the
//! published bound for the first twelve prime bases, then policy-seeded
//! probabilistic rounds.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::filter::CompositeReason;
use super::tower::{SkipReason, TowerValue};
use super::Policy;

pub const DETERMINISTIC_BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
/// Every composite below this value fails Miller–Rabin for some base in
/// [`DETERMINISTIC_BASES`] (Sorenson & Webster, ψ₁₂).
pub const DETERMINISTIC_LIMIT: u128 = 318_665_857_834_031_151_167_461;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Prime,
    ProbablePrime,
    Composite,
    NonCandidate,
    Skipped,
}

impl Status {
    pub fn is_prime(self) -> bool {
        matches!(self, Status::Prime | Status::ProbablePrime)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    /// Smallest factor found by trial division.
    Factor(u64),
    /// Miller–Rabin base that witnessed compositeness.
    Witness(u64),
    Filter(CompositeReason),
    Skip(SkipReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimalityVerdict {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Evidence>,
    /// Miller–Rabin rounds performed.
    pub rounds: u32,
}

impl PrimalityVerdict {
    fn new(status: Status, evidence: Option<Evidence>, rounds: u32) -> Self {
        PrimalityVerdict {
            status,
            evidence,
            rounds,
        }
    }
}

fn sieve(limit: u64) -> Vec<u64> {
    let limit = limit as usize;
    if limit < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; limit + 1];
    let mut primes = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

/// `n mod p` via 64-bit limbs, most significant first.
fn rem_u64(limbs_be: &[u64], p: u64) -> u64 {
    limbs_be
        .iter()
        .fold(0u128, |r, &d| ((r << 64) | d as u128) % p as u128) as u64
}

/// Reusable pipeline for one policy: holds the trial-division primes.
#[derive(Debug, Clone)]
pub struct PrimalityTester {
    primes: Vec<u64>,
    trial_bound: u64,
    mr_rounds: u32,
    seed: [u8; 32],
}

impl PrimalityTester {
    pub fn new(policy: &Policy) -> Self {
        PrimalityTester {
            primes: sieve(policy.trial_bound),
            trial_bound: policy.trial_bound,
            mr_rounds: policy.mr_rounds,
            seed: policy.digest(),
        }
    }

    pub fn test_value(&self, v: &TowerValue) -> PrimalityVerdict {
        self.test(&v.value)
    }

    pub fn test(&self, value: &BigInt) -> PrimalityVerdict {
        if value.sign() != Sign::Plus || value.is_one() {
            return PrimalityVerdict::new(Status::NonCandidate, None, 0);
        }
        let n = value.magnitude();
        if let Some(v) = self.trial_division(n) {
            return v;
        }
        self.miller_rabin(n)
    }

    /// `Some` when trial division settles the question.
    fn trial_division(&self, n: &BigUint) -> Option<PrimalityVerdict> {
        if let Some(small) = n.to_u64() {
            for &p in &self.primes {
                if p.saturating_mul(p) > small || p == small {
                    return Some(PrimalityVerdict::new(Status::Prime, None, 0));
                }
                if small % p == 0 {
                    return Some(PrimalityVerdict::new(
                        Status::Composite,
                        Some(Evidence::Factor(p)),
                        0,
                    ));
                }
            }
            let covered = (self.trial_bound as u128).pow(2) >= small as u128;
            return (covered && self.trial_bound >= 2)
                .then(|| PrimalityVerdict::new(Status::Prime, None, 0));
        }
        let mut limbs: Vec<u64> = n.iter_u64_digits().collect();
        limbs.reverse();
        self.primes
            .iter()
            .find(|&&p| rem_u64(&limbs, p) == 0)
            .map(|&p| PrimalityVerdict::new(Status::Composite, Some(Evidence::Factor(p)), 0))
    }

    fn miller_rabin(&self, n: &BigUint) -> PrimalityVerdict {
        if let Some(small) = n.to_u64() {
            if small < 4 {
                return PrimalityVerdict::new(Status::Prime, None, 0);
            }
        }
        if n.is_even() {
            return PrimalityVerdict::new(Status::Composite, Some(Evidence::Factor(2)), 0);
        }
        let n_minus_1 = n - 1u32;
        let s = n_minus_1.trailing_zeros().expect("n > 1");
        let d = &n_minus_1 >> s;
        let strong_probable_prime = |base: u64| -> bool {
            let a = BigUint::from(base) % n;
            if a.bits() == 0 || a.is_one() || a == n_minus_1 {
                return true;
            }
            let mut x = a.modpow(&d, n);
            if x.is_one() || x == n_minus_1 {
                return true;
            }
            for _ in 1..s {
                x = (&x * &x) % n;
                if x == n_minus_1 {
                    return true;
                }
                if x.is_one() {
                    return false;
                }
            }
            false
        };

        let mut rounds = 0;
        for &base in &DETERMINISTIC_BASES {
            rounds += 1;
            if !strong_probable_prime(base) {
                return PrimalityVerdict::new(
                    Status::Composite,
                    Some(Evidence::Witness(base)),
                    rounds,
                );
            }
        }
        if n.to_u128().is_some_and(|v| v < DETERMINISTIC_LIMIT) {
            return PrimalityVerdict::new(Status::Prime, None, rounds);
        }

        let mut rng = self.base_rng(n);
        let upper = (&n_minus_1 - 1u32).to_u64().unwrap_or(u64::MAX);
        for _ in 0..self.mr_rounds {
            rounds += 1;
            let base = rng.random_range(2..=upper);
            if !strong_probable_prime(base) {
                return PrimalityVerdict::new(
                    Status::Composite,
                    Some(Evidence::Witness(base)),
                    rounds,
                );
            }
        }
        PrimalityVerdict::new(Status::ProbablePrime, None, rounds)
    }

    /// Bases depend only on the policy and the value, so verdicts replay exactly.
    fn base_rng(&self, n: &BigUint) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed);
        h.update(n.to_bytes_le());
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

/// One-shot pipeline under the default bit limit.
pub fn primality(v: &TowerValue, trial_bound: u64, mr_rounds: u32) -> PrimalityVerdict {
    let policy = Policy {
        trial_bound,
        mr_rounds,
        ..Policy::default()
    };
    PrimalityTester::new(&policy).test_value(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv(n: i64) -> TowerValue {
        let value = BigInt::from(n);
        TowerValue {
            k: 0,
            bit_length: value.bits(),
            value,
        }
    }

    #[test]
    fn pipeline_examples() {
        let v = primality(&tv(65_537), 100_000, 24);
        assert_eq!(v.status, Status::Prime);
        let v = primality(&tv(4_294_967_297), 100_000, 24);
        assert_eq!(v.status, Status::Composite);
        assert_eq!(v.evidence, Some(Evidence::Factor(641)));
        assert_eq!(primality(&tv(1), 100_000, 24).status, Status::NonCandidate);
        assert_eq!(primality(&tv(-5), 100_000, 24).status, Status::NonCandidate);
        assert_eq!(primality(&tv(0), 100_000, 24).status, Status::NonCandidate);
        assert_eq!(primality(&tv(2), 100_000, 24).status, Status::Prime);
    }

    #[test]
    fn miller_rabin_path_without_trial_division() {
        let tester = PrimalityTester::new(&Policy {
            trial_bound: 0,
            ..Policy::default()
        });
        assert_eq!(tester.test(&BigInt::from(65_537)).status, Status::Prime);
        let v = tester.test(&BigInt::from(4_294_967_297i64));
        assert_eq!(v.status, Status::Composite);
        assert!(matches!(v.evidence, Some(Evidence::Witness(_))));
        // Strong pseudoprime to bases 2, 3, 5, 7 (and 11): still caught.
        assert_eq!(
            tester.test(&BigInt::from(2_152_302_898_747i64)).status,
            Status::Composite
        );
        for p in [2i64, 3, 5, 7, 11, 13, 37, 41] {
            assert_eq!(tester.test(&BigInt::from(p)).status, Status::Prime, "{p}");
        }
        for c in [4i64, 9, 15, 25, 49, 561, 1_373_653] {
            assert_eq!(
                tester.test(&BigInt::from(c)).status,
                Status::Composite,
                "{c}"
            );
        }
    }

    #[test]
    fn large_values_become_probable_primes() {
        let tester = PrimalityTester::new(&Policy::default());
        // 2^127 - 1 is prime and above the deterministic bound.
        let m127 = (BigInt::one() << 127) - 1;
        let v = tester.test(&m127);
        assert_eq!(v.status, Status::ProbablePrime);
        assert_eq!(v.rounds, 12 + 24);
        assert_eq!(tester.test(&m127), v);
        // (2^61 - 1)(2^89 - 1): no factor below the trial bound.
        let semi = ((BigInt::one() << 61) - 1) * ((BigInt::one() << 89) - 1);
        let v = tester.test(&semi);
        assert_eq!(v.status, Status::Composite);
        assert!(matches!(v.evidence, Some(Evidence::Witness(_))));
    }

    #[test]
    fn trial_division_on_big_values() {
        let tester = PrimalityTester::new(&Policy::default());
        let big = ((BigInt::one() << 127) - 1) * 99_991;
        let v = tester.test(&big);
        assert_eq!(v.evidence, Some(Evidence::Factor(99_991)));
    }

    #[test]
    fn agrees_with_naive_oracle_on_small_range() {
        let naive = |n: u64| n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0);
        for policy in [
            Policy::default(),
            Policy {
                trial_bound: 3,
                ..Policy::default()
            },
        ] {
            let tester = PrimalityTester::new(&policy);
            for n in 0..20_000u64 {
                let got = tester.test(&BigInt::from(n)).status;
                assert_eq!(got == Status::Prime, naive(n), "n = {n}");
            }
        }
    }
}
