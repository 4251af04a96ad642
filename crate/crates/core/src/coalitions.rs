//! Solid coalitions and proportionality for solid coalitions (PSC).
//!
//! A group of voters is solid over a candidate set `C'` when every member
//! ranks all of `C'` above everything else. For the PSC axiom it suffices to
//! look at maximal groups: for each prefix length `r`, voters are grouped by
//! the set of their top-`r` candidates. A coalition of size `s` demands
//! `min(|C'|, floor(s * k / n))` committee members from `C'`.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use itertools::Itertools;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{serialize_rational, Committee, FractionalCommittee, Instance, Rational};

/// One voter: a ballot line and a copy within that line's multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoterId {
    pub line: usize,
    pub copy: u64,
}

/// Maximal group of voters sharing the same top-`|C'|` candidate set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolidCoalition {
    candidates: Vec<usize>,
    lines: Vec<usize>,
    size: u64,
}

impl SolidCoalition {
    /// The shared prefix set `C'`, sorted ascending.
    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    /// Ballot lines whose copies make up the coalition, ascending.
    pub fn lines(&self) -> &[usize] {
        &self.lines
    }

    /// Number of voters `|N'|`.
    pub fn size(&self) -> u64 {
        self.size
    }

    /// Prefix length `r = |C'|`.
    pub fn rank(&self) -> usize {
        self.candidates.len()
    }

    pub fn voters<'a>(&'a self, inst: &'a Instance) -> impl Iterator<Item = VoterId> + 'a {
        self.lines
            .iter()
            .flat_map(move |&line| (0..inst.ballots()[line].count).map(move |copy| VoterId { line, copy }))
    }

    /// Largest integral demand `floor(|N'| * k / n)`.
    pub fn integral_demand(&self, inst: &Instance) -> u64 {
        (self.size * inst.committee_size() as u64) / inst.voter_count()
    }

    /// Fractional demand `|N'| * k / n`.
    pub fn fractional_demand(&self, inst: &Instance) -> Rational {
        inst.quota_share(self.size)
    }

    fn achieved(&self, indicator: &[bool]) -> usize {
        self.candidates.iter().filter(|&&c| indicator[c]).count()
    }
}

/// All maximal solid coalitions, ordered by rank and then lexicographically
/// by their sorted candidate set.
pub fn enumerate_solid_coalitions(inst: &Instance) -> Vec<SolidCoalition> {
    let m = inst.candidate_count();
    let mut out = Vec::new();
    for r in 1..=m {
        let mut groups: BTreeMap<Vec<usize>, (Vec<usize>, u64)> = BTreeMap::new();
        for (line, ballot) in inst.ballots().iter().enumerate() {
            let mut prefix = ballot.ranking[..r].to_vec();
            prefix.sort_unstable();
            let entry = groups.entry(prefix).or_default();
            entry.0.push(line);
            entry.1 += ballot.count;
        }
        out.extend(
            groups
                .into_iter()
                .map(|(candidates, (lines, size))| SolidCoalition { candidates, lines, size }),
        );
    }
    out
}

/// A coalition receiving fewer than `min(|C'|, demand)` committee members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PscViolation {
    pub coalition: SolidCoalition,
    pub demand: u64,
    pub achieved: usize,
}

#[derive(Serialize)]
struct PscViolationJson {
    coalition_candidates: Vec<usize>,
    coalition_size: u64,
    demand: u64,
    achieved: usize,
}

impl Serialize for PscViolation {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PscViolationJson {
            coalition_candidates: self.coalition.candidates.iter().map(|c| c + 1).collect(),
            coalition_size: self.coalition.size,
            demand: self.demand,
            achieved: self.achieved,
        }
        .serialize(serializer)
    }
}

/// A coalition receiving less probability mass than `min(|C'|, |N'| k / n)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExAnteViolation {
    #[serde(serialize_with = "one_based_coalition")]
    pub coalition: SolidCoalition,
    #[serde(serialize_with = "serialize_rational")]
    pub demand: Rational,
    #[serde(serialize_with = "serialize_rational")]
    pub achieved: Rational,
}

fn one_based_coalition<S: serde::Serializer>(
    coalition: &SolidCoalition,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    serializer.collect_seq(coalition.candidates.iter().map(|c| c + 1))
}

/// Precomputed coalitions for checking many committees of one instance.
pub struct PscChecker<'a> {
    inst: &'a Instance,
    coalitions: Vec<(SolidCoalition, u64)>,
}

impl<'a> PscChecker<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let coalitions = enumerate_solid_coalitions(inst)
            .into_iter()
            .map(|c| {
                let demand = c.integral_demand(inst);
                (c, demand)
            })
            .filter(|(_, demand)| *demand > 0)
            .collect();
        Self { inst, coalitions }
    }

    /// Returns the violation with the largest demand, if any.
    pub fn check(&self, committee: &Committee) -> Option<PscViolation> {
        let indicator = committee.indicator(self.inst.candidate_count());
        self.check_indicator(&indicator)
    }

    fn check_indicator(&self, indicator: &[bool]) -> Option<PscViolation> {
        let mut worst: Option<PscViolation> = None;
        for (coalition, demand) in &self.coalitions {
            let achieved = coalition.achieved(indicator);
            let required = (*demand).min(coalition.rank() as u64);
            if (achieved as u64) < required && worst.as_ref().is_none_or(|w| *demand > w.demand) {
                worst = Some(PscViolation { coalition: coalition.clone(), demand: *demand, achieved });
            }
        }
        worst
    }

    /// First violated coalition of rank `r` against a partial committee.
    fn first_unmet_at_rank(&self, r: usize, indicator: &[bool]) -> Option<&SolidCoalition> {
        self.coalitions
            .iter()
            .filter(|(c, _)| c.rank() == r)
            .find(|(c, demand)| (c.achieved(indicator) as u64) < (*demand).min(r as u64))
            .map(|(c, _)| c)
    }

    pub fn is_psc(&self, committee: &Committee) -> bool {
        self.check(committee).is_none()
    }
}

/// Checks `committee` against every maximal solid coalition.
pub fn check_psc(inst: &Instance, committee: &Committee) -> Option<PscViolation> {
    PscChecker::new(inst).check(committee)
}

/// Checks the fractional (ex-ante) version of PSC exactly. Reports the
/// violation with the largest shortfall.
pub fn check_ex_ante_psc(inst: &Instance, fractional: &FractionalCommittee) -> Option<ExAnteViolation> {
    let mut worst: Option<(Rational, ExAnteViolation)> = None;
    for coalition in enumerate_solid_coalitions(inst) {
        let demand = coalition.fractional_demand(inst);
        let rank = Rational::from_integer(BigInt::from(coalition.rank()));
        let required = if demand < rank { demand.clone() } else { rank };
        let achieved = fractional.mass_on(coalition.candidates());
        if achieved < required {
            let shortfall = required - &achieved;
            if worst.as_ref().is_none_or(|(s, _)| shortfall > *s) {
                worst = Some((shortfall, ExAnteViolation { coalition, demand, achieved }));
            }
        }
    }
    worst.map(|(_, v)| v)
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn ensure_within_cap(inst: &Instance, cap: u64) -> Result<()> {
    if binomial(inst.candidate_count(), inst.committee_size()) > cap as u128 {
        return Err(Error::CapExceeded { cap });
    }
    Ok(())
}

/// Every committee satisfying PSC, in lexicographic order.
pub fn enumerate_psc_committees(inst: &Instance, cap: u64) -> Result<Vec<Committee>> {
    ensure_within_cap(inst, cap)?;
    let checker = PscChecker::new(inst);
    Ok((0..inst.candidate_count())
        .combinations(inst.committee_size())
        .map(Committee::from_members)
        .filter(|w| checker.is_psc(w))
        .collect())
}

/// Every committee reachable by some execution of the minimal demand rule.
///
/// Ranks are processed in increasing order; while a coalition of the current
/// rank is short of its demand, the search branches over each of its
/// candidates not yet selected. Seats left open after the last rank are
/// filled in every possible way.
pub fn minimal_demand_enumerate(inst: &Instance, cap: u64) -> Result<Vec<Committee>> {
    ensure_within_cap(inst, cap)?;
    let checker = PscChecker::new(inst);
    let mut search = DemandSearch {
        checker: &checker,
        m: inst.candidate_count(),
        k: inst.committee_size(),
        seen: HashSet::new(),
        found: BTreeSet::new(),
        cap,
    };
    search.expand(1, vec![false; inst.candidate_count()])?;
    Ok(search.found.into_iter().collect())
}

struct DemandSearch<'a, 'b> {
    checker: &'a PscChecker<'b>,
    m: usize,
    k: usize,
    seen: HashSet<(usize, Vec<bool>)>,
    found: BTreeSet<Committee>,
    cap: u64,
}

impl DemandSearch<'_, '_> {
    fn expand(&mut self, rank: usize, selected: Vec<bool>) -> Result<()> {
        if !self.seen.insert((rank, selected.clone())) {
            return Ok(());
        }
        if self.seen.len() as u64 > self.cap {
            return Err(Error::CapExceeded { cap: self.cap });
        }
        let size = selected.iter().filter(|&&s| s).count();
        if rank > self.m {
            let chosen: Vec<usize> = (0..self.m).filter(|&c| selected[c]).collect();
            let free: Vec<usize> = (0..self.m).filter(|&c| !selected[c]).collect();
            for fill in free.into_iter().combinations(self.k - size) {
                self.found.insert(Committee::from_members(chosen.iter().copied().chain(fill)));
            }
            return Ok(());
        }
        match self.checker.first_unmet_at_rank(rank, &selected) {
            None => self.expand(rank + 1, selected),
            Some(coalition) => {
                if size == self.k {
                    // full partial committee with an unmet demand: dead branch
                    return Ok(());
                }
                for &c in coalition.candidates() {
                    if !selected[c] {
                        let mut next = selected.clone();
                        next[c] = true;
                        self.expand(rank, next)?;
                    }
                }
                Ok(())
            }
        }
    }
}

/// One deterministic run of the minimal demand rule: coalitions in
/// lexicographic order, lowest-index candidate added, lowest-index fill.
pub fn minimal_demand_single(inst: &Instance) -> Committee {
    let checker = PscChecker::new(inst);
    let m = inst.candidate_count();
    let k = inst.committee_size();
    let mut selected = vec![false; m];
    let mut size = 0;
    for rank in 1..=m {
        while let Some(coalition) = checker.first_unmet_at_rank(rank, &selected) {
            if size == k {
                break;
            }
            let c = *coalition
                .candidates()
                .iter()
                .find(|&&c| !selected[c])
                .expect("unmet coalition has an unselected candidate");
            selected[c] = true;
            size += 1;
        }
    }
    for c in 0..m {
        if size == k {
            break;
        }
        if !selected[c] {
            selected[c] = true;
            size += 1;
        }
    }
    Committee::from_members((0..m).filter(|&c| selected[c]))
}

/// Brute-force PSC over every subgroup `N'` of voters (as copies), every
/// candidate set and every `ℓ`. Exponential; only for tiny instances.
pub fn check_psc_exhaustive(inst: &Instance, committee: &Committee) -> bool {
    let voters: Vec<&[usize]> = inst
        .ballots()
        .iter()
        .flat_map(|b| std::iter::repeat_n(b.ranking.as_slice(), b.count as usize))
        .collect();
    let n = voters.len();
    let m = inst.candidate_count();
    let k = inst.committee_size();
    let indicator = committee.indicator(m);
    for group in 1u64..(1 << n) {
        let members: Vec<&[usize]> = (0..n).filter(|i| group >> i & 1 == 1).map(|i| voters[i]).collect();
        for set in 1u64..(1 << m) {
            let size = set.count_ones() as usize;
            let solid = members.iter().all(|r| r[..size].iter().all(|&c| set >> c & 1 == 1));
            if !solid {
                continue;
            }
            let achieved = (0..m).filter(|&c| set >> c & 1 == 1 && indicator[c]).count();
            for ell in 1..=k {
                // |N'| >= ell * n / k  <=>  |N'| * k >= ell * n
                if members.len() * k >= ell * n && achieved < size.min(ell) {
                    return false;
                }
            }
        }
    }
    true
}

pub(crate) fn floor_to_u64(value: &Rational) -> u64 {
    value.numer().div_floor(value.denom()).to_u64().unwrap_or(0)
}
