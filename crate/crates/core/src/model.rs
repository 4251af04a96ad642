//! Instances, committees and the ballot file format.
//!
//! A ballot file starts with a header line `m k` followed by one line per
//! ballot group, `count: i1 i2 ... im`, listing 1-based candidate indices from
//! most to least preferred. Blank lines and lines starting with `#` are
//! ignored. Internally candidates are 0-based.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, ParseErrorKind, Result};

/// Exact rational number used for every probability, time and demand.
pub type Rational = num_rational::BigRational;

/// Builds the rational `num / den`.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Lifts an unsigned integer into [`Rational`].
pub fn int(value: u64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// A group of identical ballots.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ballot {
    pub count: u64,
    /// Complete strict ranking, most preferred first, 0-based candidates.
    pub ranking: Vec<usize>,
}

impl Ballot {
    pub fn new(count: u64, ranking: Vec<usize>) -> Self {
        Self { count, ranking }
    }

    /// Rank position (0 = top) of `candidate`, if present.
    pub fn position(&self, candidate: usize) -> Option<usize> {
        self.ranking.iter().position(|&c| c == candidate)
    }
}

/// Voters with complete strict rankings over `m` candidates, and a committee
/// size `k` with `1 <= k <= m`.
///
/// Instances are immutable once built; every operation returns a new value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    candidates: usize,
    committee_size: usize,
    ballots: Vec<Ballot>,
    voters: u64,
}

impl Instance {
    pub fn new(candidates: usize, committee_size: usize, ballots: Vec<Ballot>) -> Result<Self> {
        if candidates == 0 {
            return Err(Error::InvalidInstance("no candidates".into()));
        }
        if committee_size == 0 || committee_size > candidates {
            return Err(Error::InvalidInstance(format!(
                "committee size {committee_size} must lie in 1..={candidates}"
            )));
        }
        if ballots.is_empty() {
            return Err(Error::InvalidInstance("profile contains no ballots".into()));
        }
        for (line, ballot) in ballots.iter().enumerate() {
            if ballot.count == 0 {
                return Err(Error::InvalidInstance(format!("ballot {line} has zero multiplicity")));
            }
            check_permutation(&ballot.ranking, candidates)
                .map_err(|kind| Error::InvalidInstance(format!("ballot {line}: {kind}")))?;
        }
        let voters = ballots.iter().map(|b| b.count).sum();
        Ok(Self { candidates, committee_size, ballots, voters })
    }

    /// Number of candidates `m`.
    pub fn candidate_count(&self) -> usize {
        self.candidates
    }

    /// Committee size `k`.
    pub fn committee_size(&self) -> usize {
        self.committee_size
    }

    /// Number of voters `n`, counting multiplicities.
    pub fn voter_count(&self) -> u64 {
        self.voters
    }

    pub fn ballots(&self) -> &[Ballot] {
        &self.ballots
    }

    /// Moves `candidate` one rank up in `count` copies of ballot line `line`.
    ///
    /// When only part of a line is perturbed, the perturbed copies become a
    /// new line inserted directly after the original one.
    pub fn swap_up(&self, line: usize, count: u64, candidate: usize) -> Result<Instance> {
        let ballot = self
            .ballots
            .get(line)
            .ok_or_else(|| Error::InvalidSwap(format!("no ballot line {line}")))?;
        if count == 0 || count > ballot.count {
            return Err(Error::InvalidSwap(format!(
                "count {count} outside 1..={}",
                ballot.count
            )));
        }
        let pos = ballot
            .position(candidate)
            .ok_or_else(|| Error::InvalidSwap(format!("candidate {candidate} not ranked")))?;
        if pos == 0 {
            return Err(Error::InvalidSwap(format!(
                "{} is already top-ranked on line {line}",
                candidate_name(candidate)
            )));
        }
        let mut ranking = ballot.ranking.clone();
        ranking.swap(pos - 1, pos);
        let mut ballots = self.ballots.clone();
        if count == ballot.count {
            ballots[line].ranking = ranking;
        } else {
            ballots[line].count -= count;
            ballots.insert(line + 1, Ballot::new(count, ranking));
        }
        Ok(Instance { ballots, ..self.clone() })
    }

    /// Merges lines with identical rankings, keeping first-appearance order.
    pub fn normalized(&self) -> Instance {
        let mut merged: Vec<Ballot> = Vec::new();
        for ballot in &self.ballots {
            match merged.iter_mut().find(|b| b.ranking == ballot.ranking) {
                Some(existing) => existing.count += ballot.count,
                None => merged.push(ballot.clone()),
            }
        }
        Instance { ballots: merged, ..self.clone() }
    }

    /// `count * k / n` as an exact rational.
    pub fn quota_share(&self, count: u64) -> Rational {
        Rational::new(
            BigInt::from(count) * BigInt::from(self.committee_size),
            BigInt::from(self.voters),
        )
    }
}

fn check_permutation(ranking: &[usize], candidates: usize) -> std::result::Result<(), ParseErrorKind> {
    let mut seen = vec![false; candidates];
    for &c in ranking {
        if c >= candidates {
            return Err(ParseErrorKind::CandidateOutOfRange(c + 1));
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(ParseErrorKind::DuplicateCandidate(c + 1));
        }
    }
    match seen.iter().position(|s| !s) {
        Some(missing) => Err(ParseErrorKind::MissingCandidate(missing + 1)),
        None => Ok(()),
    }
}

/// Display name of a 0-based candidate, e.g. `c1` for candidate 0.
pub fn candidate_name(candidate: usize) -> String {
    format!("c{}", candidate + 1)
}

/// A set of candidates, kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Committee(Vec<usize>);

impl Committee {
    pub fn from_members(members: impl IntoIterator<Item = usize>) -> Self {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        Self(members)
    }

    /// Validates size and range against `inst`.
    pub fn for_instance(inst: &Instance, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let raw: Vec<usize> = members.into_iter().collect();
        let committee = Self::from_members(raw.iter().copied());
        if committee.0.len() != raw.len() {
            return Err(Error::InvalidCommittee("duplicate members".into()));
        }
        if let Some(&c) = committee.0.iter().find(|&&c| c >= inst.candidate_count()) {
            return Err(Error::InvalidCommittee(format!("candidate {} out of range", c + 1)));
        }
        if committee.0.len() != inst.committee_size() {
            return Err(Error::InvalidCommittee(format!(
                "expected {} members, got {}",
                inst.committee_size(),
                committee.0.len()
            )));
        }
        Ok(committee)
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, candidate: usize) -> bool {
        self.0.binary_search(&candidate).is_ok()
    }

    /// Membership vector over `m` candidates.
    pub fn indicator(&self, candidates: usize) -> Vec<bool> {
        let mut mask = vec![false; candidates];
        for &c in &self.0 {
            mask[c] = true;
        }
        mask
    }

    /// 1-based member indices, as written in files and JSON.
    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|c| c + 1).collect()
    }
}

impl fmt::Display for Committee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.0.iter().map(|&c| candidate_name(c)).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// Per-candidate selection probabilities summing to `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionalCommittee(Vec<Rational>);

impl FractionalCommittee {
    pub fn new(probabilities: Vec<Rational>) -> Self {
        Self(probabilities)
    }

    pub fn probabilities(&self) -> &[Rational] {
        &self.0
    }

    pub fn probability(&self, candidate: usize) -> &Rational {
        &self.0[candidate]
    }

    pub fn total(&self) -> Rational {
        self.0.iter().fold(Rational::zero(), |acc, p| acc + p)
    }

    /// Mass placed on a set of candidates.
    pub fn mass_on(&self, candidates: &[usize]) -> Rational {
        candidates.iter().fold(Rational::zero(), |acc, &c| acc + &self.0[c])
    }

    /// `c1=1, c2=1/6, ...`
    pub fn to_text(&self) -> String {
        self.0
            .iter()
            .enumerate()
            .map(|(c, p)| format!("{}={}", candidate_name(c), p))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl Serialize for FractionalCommittee {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (c, p) in self.0.iter().enumerate() {
            map.serialize_entry(&candidate_name(c), &p.to_string())?;
        }
        map.end()
    }
}

/// Serializes a rational as its exact fraction string.
pub fn serialize_rational<S: Serializer>(
    value: &Rational,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    serializer.serialize_str(&value.to_string())
}

/// Lossy decimal view, for display only.
pub fn to_f64(value: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    value.to_f64().unwrap_or(f64::NAN)
}

/// How to treat ballots that rank only some of the candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CompletionPolicy {
    #[default]
    Reject,
    /// Append the unranked candidates in ascending index order.
    AppendAscending,
    /// Append the unranked candidates in a seeded uniformly random order.
    ShuffleTail { seed: u64 },
}

pub(crate) struct BallotFile {
    pub alternatives: usize,
    pub size: usize,
    pub header_line: usize,
    pub ballots: Vec<Ballot>,
}

/// Reads the header and ballot lines without checking `k <= m`.
pub(crate) fn parse_ballot_file(text: &str, policy: CompletionPolicy) -> Result<BallotFile> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut ballots = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((alternatives, _, _)) = header else {
            header = Some(parse_header(line, line_no)?);
            continue;
        };
        let err = |kind| Error::Parse { line: line_no, kind };
        let (count, rest) = line.split_once(':').ok_or(err(ParseErrorKind::MalformedLine))?;
        let count: u64 = count.trim().parse().map_err(|_| err(ParseErrorKind::MalformedLine))?;
        if count == 0 {
            return Err(err(ParseErrorKind::ZeroMultiplicity));
        }
        let mut ranking = Vec::with_capacity(alternatives);
        for token in rest.split_whitespace() {
            let c: usize = token.parse().map_err(|_| err(ParseErrorKind::MalformedLine))?;
            if c == 0 || c > alternatives {
                return Err(err(ParseErrorKind::CandidateOutOfRange(c)));
            }
            ranking.push(c - 1);
        }
        if ranking.len() < alternatives && policy != CompletionPolicy::Reject {
            complete_ranking(&mut ranking, alternatives, policy, ballots.len() as u64)
                .map_err(err)?;
        }
        check_permutation(&ranking, alternatives).map_err(err)?;
        ballots.push(Ballot::new(count, ranking));
    }
    let (alternatives, size, header_line) = header.ok_or(Error::Parse {
        line: last_line.max(1),
        kind: ParseErrorKind::MissingHeader,
    })?;
    if ballots.is_empty() {
        return Err(Error::Parse { line: last_line.max(1), kind: ParseErrorKind::EmptyProfile });
    }
    Ok(BallotFile { alternatives, size, header_line, ballots })
}

fn parse_header(line: &str, line_no: usize) -> Result<(usize, usize, usize)> {
    let err = Error::Parse { line: line_no, kind: ParseErrorKind::MalformedHeader };
    let fields: Vec<&str> = line.split_whitespace().collect();
    let [a, b] = fields.as_slice() else {
        return Err(err);
    };
    let a: usize = a.parse().map_err(|_| err.clone())?;
    let b: usize = b.parse().map_err(|_| err.clone())?;
    if a == 0 || b == 0 {
        return Err(err);
    }
    Ok((a, b, line_no))
}

fn complete_ranking(
    ranking: &mut Vec<usize>,
    alternatives: usize,
    policy: CompletionPolicy,
    line: u64,
) -> std::result::Result<(), ParseErrorKind> {
    let mut seen = vec![false; alternatives];
    for &c in ranking.iter() {
        if std::mem::replace(&mut seen[c], true) {
            return Err(ParseErrorKind::DuplicateCandidate(c + 1));
        }
    }
    let mut tail: Vec<usize> = (0..alternatives).filter(|&c| !seen[c]).collect();
    if let CompletionPolicy::ShuffleTail { seed } = policy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(line);
        tail.shuffle(&mut rng);
    }
    ranking.extend(tail);
    Ok(())
}

/// Parses a ballot file, rejecting incomplete rankings.
pub fn parse_instance(text: &str) -> Result<Instance> {
    parse_instance_with(text, CompletionPolicy::Reject)
}

pub fn parse_instance_with(text: &str, policy: CompletionPolicy) -> Result<Instance> {
    let file = parse_ballot_file(text, policy)?;
    if file.size > file.alternatives {
        return Err(Error::Parse {
            line: file.header_line,
            kind: ParseErrorKind::CommitteeTooLarge {
                committee_size: file.size,
                candidates: file.alternatives,
            },
        });
    }
    Instance::new(file.alternatives, file.size, file.ballots)
}

pub(crate) fn write_ballots(header: (usize, usize), ballots: &[Ballot]) -> String {
    let mut out = format!("{} {}\n", header.0, header.1);
    for ballot in ballots {
        let ranking: Vec<String> = ballot.ranking.iter().map(|c| (c + 1).to_string()).collect();
        out.push_str(&format!("{}: {}\n", ballot.count, ranking.join(" ")));
    }
    out
}

/// Writes `inst` in the ballot file format; lines are kept as-is.
pub fn serialize_instance(inst: &Instance) -> String {
    write_ballots((inst.candidate_count(), inst.committee_size()), inst.ballots())
}

/// Draws `voters` independent uniformly random rankings, merged by ranking.
pub fn random_instance<R: Rng>(rng: &mut R, voters: u64, candidates: usize, committee_size: usize) -> Result<Instance> {
    let mut groups: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    let mut order = Vec::new();
    for _ in 0..voters {
        let mut ranking: Vec<usize> = (0..candidates).collect();
        ranking.shuffle(rng);
        let entry = groups.entry(ranking.clone()).or_insert(0);
        if *entry == 0 {
            order.push(ranking);
        }
        *entry += 1;
    }
    let ballots = order.into_iter().map(|r| Ballot::new(groups[&r], r)).collect();
    Instance::new(candidates, committee_size, ballots)
}

/// Unanimous profile: `voters` copies of the identity ranking.
pub fn unanimous_instance(voters: u64, candidates: usize, committee_size: usize) -> Result<Instance> {
    Instance::new(
        candidates,
        committee_size,
        vec![Ballot::new(voters, (0..candidates).collect())],
    )
}
