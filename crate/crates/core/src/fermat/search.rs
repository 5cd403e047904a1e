//! Scans over `k`, the resulting records, and multi-triplet sweeps.

use std::collections::HashSet;
use std::ops::RangeInclusive;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::filter::{algebraic_filter, CompositeReason};
use super::primality::{Evidence, PrimalityTester, PrimalityVerdict, Status};
use super::tower::{tower_value, Tower};
use super::{validate_triplet, FermatError, Policy, Triplet};
use crate::par::{self, Execution};
use crate::store::{Record, RecordFile, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KVerdict {
    pub k: u32,
    #[serde(flatten)]
    pub verdict: PrimalityVerdict,
    /// Bit length of `|P(k)|` when it was computed.
    pub bit_length: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterHit {
    pub k_from: u32,
    pub k_to: u32,
    pub reason: CompositeReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u64,
    pub elapsed_ms: u64,
}

/// Outcome of a scan over `k = 0..=k_scanned`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    #[serde(flatten)]
    pub triplet: Triplet,
    pub k_max: u32,
    /// Last `k` examined; below `k_max` when the scan stopped early.
    pub k_scanned: u32,
    pub k0: Option<u32>,
    pub streak_length: u32,
    /// The streak ended at a skipped value rather than a non-prime.
    pub streak_truncated: bool,
    pub prime_positions: Vec<u32>,
    pub skipped_count: u32,
    pub filter_hits: Vec<FilterHit>,
    pub verdicts: Vec<KVerdict>,
    pub policy: Policy,
    pub policy_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl Record for SearchRecord {
    const KIND: &'static str = "search";
    type Key = Triplet;
    fn key(&self) -> Triplet {
        self.triplet
    }
}

impl SearchRecord {
    pub fn verdict(&self, k: u32) -> Option<&KVerdict> {
        self.verdicts.iter().find(|v| v.k == k)
    }

    /// Checks that `k0`, the streak, and the positions agree with the verdicts.
    pub fn check_consistency(&self) -> Result<(), String> {
        let ks: Vec<u32> = self.verdicts.iter().map(|v| v.k).collect();
        if ks != (0..=self.k_scanned).collect::<Vec<_>>() {
            return Err(format!(
                "verdicts cover {ks:?}, expected 0..={}",
                self.k_scanned
            ));
        }
        let positions: Vec<u32> = self
            .verdicts
            .iter()
            .filter(|v| v.verdict.status.is_prime())
            .map(|v| v.k)
            .collect();
        if positions != self.prime_positions {
            return Err("prime_positions disagree with verdicts".into());
        }
        if self.k0 != positions.first().copied() {
            return Err("k0 is not the first prime position".into());
        }
        let prefix = positions
            .iter()
            .enumerate()
            .take_while(|&(i, &k)| i as u32 == k)
            .count() as u32;
        if self.streak_length != prefix {
            return Err(format!(
                "streak {} but prefix of positions is {prefix}",
                self.streak_length
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StopRule {
    FirstPrime,
    FirstNonPrime,
    Exhaustive,
}

/// Verdict for one `k`: filter, then exact value, then the primality pipeline.
pub fn verdict_at(t: &Triplet, k: u32, policy: &Policy, tester: &PrimalityTester) -> KVerdict {
    if let Some(reason) = algebraic_filter(t, k) {
        return KVerdict {
            k,
            verdict: PrimalityVerdict {
                status: Status::Composite,
                evidence: Some(Evidence::Filter(reason)),
                rounds: 0,
            },
            bit_length: None,
        };
    }
    match tower_value(t, k, policy.max_bits) {
        Tower::Skipped(reason) => KVerdict {
            k,
            verdict: PrimalityVerdict {
                status: Status::Skipped,
                evidence: Some(Evidence::Skip(reason)),
                rounds: 0,
            },
            bit_length: None,
        },
        Tower::Value(v) => KVerdict {
            k,
            verdict: tester.test_value(&v),
            bit_length: Some(v.bit_length),
        },
    }
}

fn scan(
    t: &Triplet,
    k_max: u32,
    policy: &Policy,
    tester: &PrimalityTester,
    stop: StopRule,
) -> SearchRecord {
    let mut verdicts = Vec::new();
    for k in 0..=k_max {
        let v = verdict_at(t, k, policy, tester);
        verdicts.push(v);
        let prime = v.verdict.status.is_prime();
        match stop {
            StopRule::FirstPrime if prime => break,
            StopRule::FirstNonPrime if !prime => break,
            _ => {}
        }
    }
    build_record(*t, k_max, policy, verdicts)
}

fn build_record(
    triplet: Triplet,
    k_max: u32,
    policy: &Policy,
    verdicts: Vec<KVerdict>,
) -> SearchRecord {
    let prime_positions: Vec<u32> = verdicts
        .iter()
        .filter(|v| v.verdict.status.is_prime())
        .map(|v| v.k)
        .collect();
    let streak_length = verdicts
        .iter()
        .take_while(|v| v.verdict.status.is_prime())
        .count() as u32;
    let streak_truncated = verdicts
        .get(streak_length as usize)
        .is_some_and(|v| v.verdict.status == Status::Skipped);
    let skipped_count = verdicts
        .iter()
        .filter(|v| v.verdict.status == Status::Skipped)
        .count() as u32;

    let mut filter_hits: Vec<FilterHit> = Vec::new();
    for v in &verdicts {
        let Some(Evidence::Filter(reason)) = v.verdict.evidence else {
            continue;
        };
        match filter_hits.last_mut() {
            Some(h) if h.reason == reason && h.k_to + 1 == v.k => h.k_to = v.k,
            _ => filter_hits.push(FilterHit {
                k_from: v.k,
                k_to: v.k,
                reason,
            }),
        }
    }

    SearchRecord {
        triplet,
        k_max,
        k_scanned: verdicts.last().map_or(0, |v| v.k),
        k0: prime_positions.first().copied(),
        streak_length,
        streak_truncated,
        prime_positions,
        skipped_count,
        filter_hits,
        verdicts,
        policy: *policy,
        policy_fingerprint: policy.fingerprint(),
        timing: None,
    }
}

/// Scans `k = 0, 1, …` and stops at the first prime (`k0`).
pub fn find_k0(t: &Triplet, k_max: u32, policy: &Policy) -> SearchRecord {
    scan(
        t,
        k_max,
        policy,
        &PrimalityTester::new(policy),
        StopRule::FirstPrime,
    )
}

/// Scans until the first non-prime; `streak_length` is the prime prefix.
pub fn prime_streak(t: &Triplet, k_max: u32, policy: &Policy) -> SearchRecord {
    scan(
        t,
        k_max,
        policy,
        &PrimalityTester::new(policy),
        StopRule::FirstNonPrime,
    )
}

/// Scans every `k <= k_max`.
pub fn prime_positions(t: &Triplet, k_max: u32, policy: &Policy) -> SearchRecord {
    scan(
        t,
        k_max,
        policy,
        &PrimalityTester::new(policy),
        StopRule::Exhaustive,
    )
}

/// Destination of sweep records. The sweep is the only writer.
pub trait SearchSink {
    fn completed(&self) -> HashSet<Triplet>;
    fn append(&mut self, record: SearchRecord) -> Result<(), StoreError>;
}

impl SearchSink for RecordFile<SearchRecord> {
    fn completed(&self) -> HashSet<Triplet> {
        self.completed_keys()
    }
    fn append(&mut self, record: SearchRecord) -> Result<(), StoreError> {
        RecordFile::append(self, record)
    }
}

impl SearchSink for Vec<SearchRecord> {
    fn completed(&self) -> HashSet<Triplet> {
        self.iter().map(|r| r.triplet).collect()
    }
    fn append(&mut self, record: SearchRecord) -> Result<(), StoreError> {
        self.push(record);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepOptions {
    pub timestamps: bool,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepSkip {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SweepSummary {
    pub candidates: usize,
    pub skipped: Vec<SweepSkip>,
    pub planned: usize,
    /// Plan index the run started from.
    pub resumed_at: usize,
    pub already_done: usize,
    pub emitted: usize,
}

fn now_unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Runs an exhaustive scan for every valid triplet in lexicographic `(a, b, c)`
/// order, skipping triplets that already have a record in `sink`.
///
/// Work units run in parallel batches; each batch is handed to the sink in
/// plan order, so output files are byte-identical across runs (without
/// timestamps) and a crash leaves a plan prefix on disk.
pub fn sweep<S: SearchSink>(
    a_range: RangeInclusive<i64>,
    b_range: RangeInclusive<i64>,
    c_range: RangeInclusive<i64>,
    k_max: u32,
    policy: &Policy,
    sink: &mut S,
    opts: SweepOptions,
) -> Result<SweepSummary, FermatError> {
    for (name, r) in [("a", &a_range), ("b", &b_range), ("c", &c_range)] {
        if r.is_empty() {
            return Err(FermatError::EmptyRange(format!("{name} = {r:?}")));
        }
    }
    let mut summary = SweepSummary::default();
    let mut plan = Vec::new();
    for a in a_range {
        for b in b_range.clone() {
            for c in c_range.clone() {
                summary.candidates += 1;
                match validate_triplet(a, b, c) {
                    Ok(t) => plan.push(t),
                    Err(e) => summary.skipped.push(SweepSkip {
                        a,
                        b,
                        c,
                        reason: e.to_string(),
                    }),
                }
            }
        }
    }
    summary.planned = plan.len();

    let done = sink.completed();
    summary.resumed_at = plan
        .iter()
        .position(|t| !done.contains(t))
        .unwrap_or(plan.len());
    let work: Vec<Triplet> = plan[summary.resumed_at..]
        .iter()
        .filter(|t| !done.contains(t))
        .copied()
        .collect();
    summary.already_done = summary.planned - work.len();

    let tester = PrimalityTester::new(policy);
    let batch = if opts.execution.is_parallel() {
        2 * par::worker_count()
    } else {
        1
    };
    for chunk in work.chunks(batch.max(1)) {
        let records = opts.execution.map_slice(chunk, |t| {
            let started = Instant::now();
            let started_unix_ms = now_unix_ms();
            let mut rec = scan(t, k_max, policy, &tester, StopRule::Exhaustive);
            if opts.timestamps {
                rec.timing = Some(Timing {
                    started_unix_ms,
                    elapsed_ms: started.elapsed().as_millis() as u64,
                });
            }
            rec
        });
        for rec in records {
            sink.append(rec)?;
            summary.emitted += 1;
        }
    }
    Ok(summary)
}
