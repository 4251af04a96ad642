//! Per-instance statistics of the PFR lottery.
//!
//! For each instance: how many candidates fall into the probability buckets
//! `= 1`, `>= 9/10`, `>= 4/5`, `>= 1/2` and `<= 1/10`; how many committees
//! satisfy PSC; how many committees the lottery puts positive mass on; and
//! how many of the most likely committees are needed to reach 75%, 90%, 95%
//! and 99% of the probability mass.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::coalitions::enumerate_psc_committees;
use crate::error::{Error, Result};
use crate::model::{int, ratio, Committee, FractionalCommittee, Instance, Rational};
use crate::phragmen::pfr;
use crate::rounding::{build_rounding_graph, exact_support, sample_from_graph};

pub const STATS_SCHEMA_VERSION: u32 = 1;

/// Mass thresholds as `(numerator, denominator)`.
pub const MASS_THRESHOLDS: [(i64, i64); 4] = [(3, 4), (9, 10), (19, 20), (99, 100)];

#[derive(Debug, Clone, Copy)]
pub struct StatsConfig {
    pub samples: usize,
    pub seed: u64,
    /// Cap on the number of committees for PSC enumeration.
    pub psc_cap: u64,
    /// Cap on the symbolic rounding tree; above it the sampled histogram is used.
    pub exact_cap: u64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { samples: 50_000, seed: 0, psc_cap: crate::DEFAULT_CAP, exact_cap: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionSource {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatsRow {
    pub schema_version: u32,
    pub instance: String,
    pub m: usize,
    pub k: usize,
    pub n: u64,
    pub prob_one: usize,
    pub prob_ge_90: usize,
    pub prob_ge_80: usize,
    pub prob_ge_50: usize,
    pub prob_le_10: usize,
    /// `None` when PSC enumeration exceeded its cap.
    pub psc_committees: Option<u64>,
    pub support: usize,
    pub mass_75: usize,
    pub mass_90: usize,
    pub mass_95: usize,
    pub mass_99: usize,
    pub source: DistributionSource,
}

impl StatsRow {
    pub fn mass_counts(&self) -> [usize; 4] {
        [self.mass_75, self.mass_90, self.mass_95, self.mass_99]
    }

    /// Checks the internal consistency of the row.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let buckets = [self.prob_one, self.prob_ge_90, self.prob_ge_80, self.prob_ge_50, self.prob_le_10];
        if buckets.iter().any(|&b| b > self.m) {
            return Err(format!("{}: bucket count above m", self.instance));
        }
        if !(self.prob_one <= self.prob_ge_90 && self.prob_ge_90 <= self.prob_ge_80 && self.prob_ge_80 <= self.prob_ge_50) {
            return Err(format!("{}: nested buckets out of order", self.instance));
        }
        let mass = self.mass_counts();
        if mass.windows(2).any(|w| w[0] > w[1]) || mass[3] > self.support {
            return Err(format!("{}: mass percentiles not monotone", self.instance));
        }
        if let Some(psc) = self.psc_committees {
            if self.support as u64 > psc {
                return Err(format!("{}: support exceeds PSC committee count", self.instance));
            }
        }
        Ok(())
    }
}

/// Counts of candidates with probability `= 1`, `>= 9/10`, `>= 4/5`,
/// `>= 1/2`, `<= 1/10`.
pub fn candidate_buckets(fractional: &FractionalCommittee) -> [usize; 5] {
    let count = |pred: &dyn Fn(&Rational) -> bool| fractional.probabilities().iter().filter(|p| pred(p)).count();
    [
        count(&|p| *p == int(1)),
        count(&|p| *p >= ratio(9, 10)),
        count(&|p| *p >= ratio(4, 5)),
        count(&|p| *p >= ratio(1, 2)),
        count(&|p| *p <= ratio(1, 10)),
    ]
}

/// Number of committees, taken in descending probability, needed to reach
/// each threshold of [`MASS_THRESHOLDS`]. `weights` need not be normalized.
pub fn mass_percentiles(weights: &[Rational]) -> [usize; 4] {
    let mut sorted: Vec<&Rational> = weights.iter().collect();
    sorted.sort_by(|a, b| b.cmp(a));
    let total = sorted.iter().fold(int(0), |acc, w| acc + *w);
    let mut out = [0; 4];
    for (slot, &(num, den)) in out.iter_mut().zip(MASS_THRESHOLDS.iter()) {
        let target = &total * ratio(num, den);
        let mut acc = int(0);
        let mut needed = 0;
        for w in &sorted {
            if acc >= target {
                break;
            }
            acc += *w;
            needed += 1;
        }
        *slot = needed;
    }
    out
}

/// Histogram of sampled committees.
pub fn histogram(samples: &[Committee]) -> BTreeMap<Committee, u64> {
    let mut out = BTreeMap::new();
    for w in samples {
        *out.entry(w.clone()).or_insert(0) += 1;
    }
    out
}

/// Computes one row. The exact lottery is used when the symbolic expansion
/// stays under `exact_cap`; otherwise the sampled histogram.
pub fn instance_stats(id: &str, inst: &Instance, config: &StatsConfig) -> Result<StatsRow> {
    let (fractional, ledger) = pfr(inst);
    let graph = build_rounding_graph(inst, &ledger)?;
    let psc_committees = match enumerate_psc_committees(inst, config.psc_cap) {
        Ok(all) => Some(all.len() as u64),
        Err(Error::CapExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    let (weights, source) = match exact_support(&graph, config.exact_cap) {
        Ok(dist) => (dist.into_values().collect::<Vec<_>>(), DistributionSource::Exact),
        Err(Error::CapExceeded { .. }) => {
            let samples = sample_from_graph(&graph, config.samples, config.seed);
            let counts = histogram(&samples).into_values().map(int).collect();
            (counts, DistributionSource::Sampled)
        }
        Err(e) => return Err(e),
    };
    let buckets = candidate_buckets(&fractional);
    let mass = mass_percentiles(&weights);
    Ok(StatsRow {
        schema_version: STATS_SCHEMA_VERSION,
        instance: id.to_string(),
        m: inst.candidate_count(),
        k: inst.committee_size(),
        n: inst.voter_count(),
        prob_one: buckets[0],
        prob_ge_90: buckets[1],
        prob_ge_80: buckets[2],
        prob_ge_50: buckets[3],
        prob_le_10: buckets[4],
        psc_committees,
        support: weights.len(),
        mass_75: mass[0],
        mass_90: mass[1],
        mass_95: mass[2],
        mass_99: mass[3],
        source,
    })
}

/// Averages of the numeric columns for one `(m, k)` group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub schema_version: u32,
    pub m: usize,
    pub k: usize,
    pub instances: usize,
    pub prob_one: f64,
    pub prob_ge_90: f64,
    pub prob_ge_80: f64,
    pub prob_ge_50: f64,
    pub prob_le_10: f64,
    /// Averaged over instances with a known PSC count only.
    pub psc_committees: Option<f64>,
    pub support: f64,
    pub mass_75: f64,
    pub mass_90: f64,
    pub mass_95: f64,
    pub mass_99: f64,
}

pub fn aggregate(rows: &[StatsRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(usize, usize), Vec<&StatsRow>> = BTreeMap::new();
    for row in rows {
        groups.entry((row.m, row.k)).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|((m, k), group)| {
            let len = group.len() as f64;
            let avg = |f: fn(&StatsRow) -> usize| group.iter().map(|r| f(r) as f64).sum::<f64>() / len;
            let known: Vec<u64> = group.iter().filter_map(|r| r.psc_committees).collect();
            AggregateRow {
                schema_version: STATS_SCHEMA_VERSION,
                m,
                k,
                instances: group.len(),
                prob_one: avg(|r| r.prob_one),
                prob_ge_90: avg(|r| r.prob_ge_90),
                prob_ge_80: avg(|r| r.prob_ge_80),
                prob_ge_50: avg(|r| r.prob_ge_50),
                prob_le_10: avg(|r| r.prob_le_10),
                psc_committees: (!known.is_empty())
                    .then(|| known.iter().sum::<u64>() as f64 / known.len() as f64),
                support: avg(|r| r.support),
                mass_75: avg(|r| r.mass_75),
                mass_90: avg(|r| r.mass_90),
                mass_95: avg(|r| r.mass_95),
                mass_99: avg(|r| r.mass_99),
            }
        })
        .collect()
}
