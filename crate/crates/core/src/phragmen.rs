//! Phragmén's eating process, simulated exactly event by event.
//!
//! Every candidate carries one unit of weight. Each voter eats their
//! highest-ranked candidate that is not yet fully eaten, at speed one. The
//! Ordered Rule elects candidates as they become fully eaten until `k` seats
//! are filled; the fractional rule (PFR) instead stops at time `k / n`, when
//! the total eaten weight is `k`, and reads the eaten fractions as selection
//! probabilities.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::coalitions::VoterId;
use crate::error::{Error, Result};
use crate::model::{int, serialize_rational, Committee, FractionalCommittee, Instance, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    FullyEaten,
    Elected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    #[serde(serialize_with = "serialize_rational")]
    pub time: Rational,
    #[serde(serialize_with = "one_based")]
    pub candidate: usize,
    pub kind: EventKind,
}

fn one_based<S: serde::Serializer>(c: &usize, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u64(*c as u64 + 1)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn elections(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::Elected)
    }
}

/// Amount of each candidate eaten by each voter during PFR.
///
/// Copies of one ballot line eat identically, so amounts are stored per line
/// and per copy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EatingLedger {
    per_copy: Vec<Vec<Rational>>,
    counts: Vec<u64>,
    stop_time: Rational,
}

impl EatingLedger {
    /// `p_c(i)` for one voter.
    pub fn entry(&self, voter: VoterId, candidate: usize) -> &Rational {
        &self.per_copy[voter.line][candidate]
    }

    /// Amount eaten by a single copy of `line`.
    pub fn per_copy(&self, line: usize, candidate: usize) -> &Rational {
        &self.per_copy[line][candidate]
    }

    /// Amount eaten by all copies of `line` together.
    pub fn line_total(&self, line: usize, candidate: usize) -> Rational {
        &self.per_copy[line][candidate] * int(self.counts[line])
    }

    pub fn candidate_total(&self, candidate: usize) -> Rational {
        (0..self.counts.len()).fold(Rational::zero(), |acc, line| acc + self.line_total(line, candidate))
    }

    pub fn total(&self) -> Rational {
        let m = self.per_copy.first().map_or(0, Vec::len);
        (0..m).fold(Rational::zero(), |acc, c| acc + self.candidate_total(c))
    }

    pub fn stop_time(&self) -> &Rational {
        &self.stop_time
    }

    pub fn lines(&self) -> usize {
        self.counts.len()
    }
}

struct EatingProcess<'a> {
    inst: &'a Instance,
    eaten: Vec<Rational>,
    full: Vec<bool>,
    /// Rank position each line is currently eating at; `None` once nothing is left.
    cursor: Vec<Option<usize>>,
    time: Rational,
    per_copy: Vec<Vec<Rational>>,
}

impl<'a> EatingProcess<'a> {
    fn new(inst: &'a Instance) -> Self {
        let m = inst.candidate_count();
        let lines = inst.ballots().len();
        Self {
            inst,
            eaten: vec![Rational::zero(); m],
            full: vec![false; m],
            cursor: vec![Some(0); lines],
            time: Rational::zero(),
            per_copy: vec![vec![Rational::zero(); m]; lines],
        }
    }

    fn current(&self, line: usize) -> Option<usize> {
        self.cursor[line].map(|pos| self.inst.ballots()[line].ranking[pos])
    }

    fn eaters(&self) -> Vec<u64> {
        let mut eaters = vec![0; self.inst.candidate_count()];
        for (line, ballot) in self.inst.ballots().iter().enumerate() {
            if let Some(c) = self.current(line) {
                eaters[c] += ballot.count;
            }
        }
        eaters
    }

    /// Time until the next candidate becomes fully eaten.
    fn next_completion(&self, eaters: &[u64]) -> Option<Rational> {
        eaters
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(c, &e)| (Rational::one() - &self.eaten[c]) / int(e))
            .min()
    }

    fn advance(&mut self, dt: &Rational, eaters: &[u64]) {
        for (c, &e) in eaters.iter().enumerate() {
            if e > 0 {
                self.eaten[c] += dt * int(e);
            }
        }
        for line in 0..self.cursor.len() {
            if let Some(c) = self.current(line) {
                self.per_copy[line][c] += dt;
            }
        }
        self.time += dt;
    }

    /// Marks newly completed candidates (ascending) and moves every voter to
    /// their best remaining candidate.
    fn settle(&mut self) -> Vec<usize> {
        let mut completed = Vec::new();
        for c in 0..self.eaten.len() {
            if !self.full[c] && self.eaten[c] >= Rational::one() {
                debug_assert!(self.eaten[c] == Rational::one(), "overshoot on candidate {c}");
                self.full[c] = true;
                completed.push(c);
            }
        }
        if !completed.is_empty() {
            for line in 0..self.cursor.len() {
                let ranking = &self.inst.ballots()[line].ranking;
                self.cursor[line] = self.cursor[line]
                    .and_then(|start| (start..ranking.len()).find(|&p| !self.full[ranking[p]]));
            }
        }
        completed
    }
}

/// Phragmén's Ordered Rule.
///
/// Candidates completed at the same instant are elected in ascending index
/// order; any beyond the `k`-th seat are dropped.
pub fn ordered_rule(inst: &Instance) -> (Committee, Trace) {
    let k = inst.committee_size();
    let mut process = EatingProcess::new(inst);
    let mut trace = Trace::default();
    let mut elected = Vec::with_capacity(k);
    while elected.len() < k {
        let eaters = process.eaters();
        let dt = process
            .next_completion(&eaters)
            .expect("candidates remain while seats are open");
        process.advance(&dt, &eaters);
        for c in process.settle() {
            trace.events.push(TraceEvent { time: process.time.clone(), candidate: c, kind: EventKind::FullyEaten });
            if elected.len() < k {
                elected.push(c);
                trace.events.push(TraceEvent { time: process.time.clone(), candidate: c, kind: EventKind::Elected });
            }
        }
    }
    (Committee::from_members(elected), trace)
}

/// Phragmén's fractional rule.
pub fn pfr(inst: &Instance) -> (FractionalCommittee, EatingLedger) {
    let (fractional, ledger, _) = pfr_with_trace(inst);
    (fractional, ledger)
}

/// PFR together with the completion events that happened before the stop.
pub fn pfr_with_trace(inst: &Instance) -> (FractionalCommittee, EatingLedger, Trace) {
    let stop = inst.quota_share(1);
    let mut process = EatingProcess::new(inst);
    let mut trace = Trace::default();
    while process.time < stop {
        let eaters = process.eaters();
        let remaining = &stop - &process.time;
        let dt = match process.next_completion(&eaters) {
            Some(next) if next < remaining => next,
            _ => remaining,
        };
        process.advance(&dt, &eaters);
        for c in process.settle() {
            trace.events.push(TraceEvent { time: process.time.clone(), candidate: c, kind: EventKind::FullyEaten });
        }
    }
    let ledger = EatingLedger {
        per_copy: process.per_copy,
        counts: inst.ballots().iter().map(|b| b.count).collect(),
        stop_time: stop,
    };
    (FractionalCommittee::new(process.eaten), ledger, trace)
}

/// Time-sliced approximation of PFR used as an independent check.
///
/// The time horizon `k / n` is cut into `steps` equal slices. In each slice
/// every voter holds a budget of one slice length; budgets go to the voter's
/// best candidate with capacity left, and when a candidate cannot absorb all
/// budgets aimed at it, every eater gets the same share and spills the rest
/// to their next choice.
pub fn pfr_discrete_oracle(inst: &Instance, steps: u64) -> Result<FractionalCommittee> {
    let n = inst.voter_count();
    let m = inst.candidate_count();
    if steps < n * m as u64 {
        return Err(Error::InvalidArgument(format!("steps must be at least n*m = {}", n * m as u64)));
    }
    let slice = Rational::new(BigInt::from(inst.committee_size()), BigInt::from(n) * BigInt::from(steps));
    let mut eaten = vec![Rational::zero(); m];
    let ballots = inst.ballots();
    for _ in 0..steps {
        let mut budget = vec![slice.clone(); ballots.len()];
        loop {
            let mut demand = vec![Rational::zero(); m];
            let mut target = vec![None; ballots.len()];
            for (line, ballot) in ballots.iter().enumerate() {
                if budget[line].is_zero() {
                    continue;
                }
                if let Some(&c) = ballot.ranking.iter().find(|&&c| eaten[c] < Rational::one()) {
                    target[line] = Some(c);
                    demand[c] += &budget[line] * int(ballot.count);
                }
            }
            if target.iter().all(Option::is_none) {
                break;
            }
            let share: Vec<Rational> = (0..m)
                .map(|c| {
                    let capacity = Rational::one() - &eaten[c];
                    if demand[c].is_zero() || demand[c] <= capacity {
                        Rational::one()
                    } else {
                        capacity / &demand[c]
                    }
                })
                .collect();
            for (line, ballot) in ballots.iter().enumerate() {
                if let Some(c) = target[line] {
                    let used = &budget[line] * &share[c];
                    eaten[c] += &used * int(ballot.count);
                    budget[line] -= used;
                }
            }
        }
    }
    Ok(FractionalCommittee::new(eaten))
}
