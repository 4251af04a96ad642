//! Randomized apportionment through the PFR pipeline.
//!
//! A party-list profile is expanded into a multiwinner instance with `h`
//! clones per party. PFR on the expansion gives every party exactly its quota
//! `v_i * h / n` in expectation, and dependent rounding realizes an
//! allocation that respects lower and upper quota.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;
use rand::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{parse_ballot_file, Ballot, Committee, CompletionPolicy, FractionalCommittee, Instance, Rational};
use crate::phragmen::pfr;
use crate::rounding::{build_rounding_graph, draw_rng, gkps_round_with, RoundingGraph};

/// Voters ranking parties, and a house size `h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartyProfile {
    parties: usize,
    seats: usize,
    ballots: Vec<Ballot>,
    voters: u64,
}

impl PartyProfile {
    pub fn new(parties: usize, seats: usize, ballots: Vec<Ballot>) -> Result<Self> {
        if parties == 0 || seats == 0 {
            return Err(Error::InvalidInstance("need at least one party and one seat".into()));
        }
        // validation of rankings is shared with ordinary instances
        Instance::new(parties, 1, ballots.clone())?;
        let voters = ballots.iter().map(|b| b.count).sum();
        Ok(Self { parties, seats, ballots, voters })
    }

    /// Single-party votes; each voter's remaining parties follow in index order.
    pub fn from_votes(votes: &[u64], seats: usize) -> Result<Self> {
        let parties = votes.len();
        let ballots = votes
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .map(|(party, &v)| {
                let ranking = std::iter::once(party).chain((0..parties).filter(|&p| p != party)).collect();
                Ballot::new(v, ranking)
            })
            .collect();
        Self::new(parties, seats, ballots)
    }

    /// Parses the ballot file format with header `P h` and parties as candidates.
    pub fn parse(text: &str) -> Result<Self> {
        let file = parse_ballot_file(text, CompletionPolicy::Reject)?;
        Self::new(file.alternatives, file.size, file.ballots)
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn seats(&self) -> usize {
        self.seats
    }

    pub fn ballots(&self) -> &[Ballot] {
        &self.ballots
    }

    pub fn voter_count(&self) -> u64 {
        self.voters
    }

    /// Votes `v_i` of voters ranking each party first.
    pub fn first_choice_votes(&self) -> Vec<u64> {
        let mut votes = vec![0; self.parties];
        for b in &self.ballots {
            votes[b.ranking[0]] += b.count;
        }
        votes
    }

    /// Exact quota `v_i * h / n` of every party.
    pub fn quotas(&self) -> Vec<Rational> {
        self.first_choice_votes()
            .into_iter()
            .map(|v| Rational::new(BigInt::from(v) * BigInt::from(self.seats), BigInt::from(self.voters)))
            .collect()
    }
}

/// Seats per party.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeatAllocation {
    pub seats: Vec<u64>,
}

impl SeatAllocation {
    pub fn total(&self) -> u64 {
        self.seats.iter().sum()
    }
}

/// Candidate index of clone `j` (0-based) of `party` with `h` clones per party.
pub fn clone_index(seats: usize, party: usize, clone: usize) -> usize {
    party * seats + clone
}

/// Expands a party profile into an instance with `h` clones per party and
/// committee size `h`. Voters list party blocks in their party order, clones
/// ascending within each block.
pub fn expand_party_list(profile: &PartyProfile) -> Instance {
    let h = profile.seats;
    let ballots = profile
        .ballots
        .iter()
        .map(|b| {
            let ranking = b
                .ranking
                .iter()
                .flat_map(|&party| (0..h).map(move |j| clone_index(h, party, j)))
                .collect();
            Ballot::new(b.count, ranking)
        })
        .collect();
    Instance::new(profile.parties * h, h, ballots).expect("expansion of a valid profile is valid")
}

/// Result of one randomized apportionment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Apportionment {
    pub allocation: SeatAllocation,
    #[serde(serialize_with = "rationals")]
    pub expected_seats: Vec<Rational>,
    #[serde(skip)]
    pub fractional: FractionalCommittee,
    #[serde(skip)]
    pub committee: Committee,
}

fn rationals<S: serde::Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|r| r.to_string()))
}

/// PFR and rounding graph of a profile, reusable across draws.
pub struct Apportioner {
    profile: PartyProfile,
    instance: Instance,
    fractional: FractionalCommittee,
    graph: RoundingGraph,
    expected_seats: Vec<Rational>,
}

impl Apportioner {
    pub fn new(profile: &PartyProfile) -> Result<Self> {
        let instance = expand_party_list(profile);
        let (fractional, ledger) = pfr(&instance);
        let graph = build_rounding_graph(&instance, &ledger)?;
        let h = profile.seats;
        let expected_seats = (0..profile.parties)
            .map(|party| {
                (0..h).fold(Rational::zero(), |acc, j| acc + fractional.probability(clone_index(h, party, j)))
            })
            .collect();
        Ok(Self { profile: profile.clone(), instance, fractional, graph, expected_seats })
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn expected_seats(&self) -> &[Rational] {
        &self.expected_seats
    }

    pub fn draw_with<R: RngCore>(&self, rng: &mut R) -> Apportionment {
        let committee = gkps_round_with(&self.graph, rng).committee;
        let mut seats = vec![0; self.profile.parties];
        for &c in committee.members() {
            seats[c / self.profile.seats] += 1;
        }
        Apportionment {
            allocation: SeatAllocation { seats },
            expected_seats: self.expected_seats.clone(),
            fractional: self.fractional.clone(),
            committee,
        }
    }

    /// Draw number `draw` of the stream seeded by `seed`.
    pub fn draw(&self, seed: u64, draw: u64) -> Apportionment {
        self.draw_with(&mut draw_rng(seed, draw))
    }
}

pub fn apportion(profile: &PartyProfile, seed: u64) -> Result<Apportionment> {
    Ok(Apportioner::new(profile)?.draw(seed, 0))
}

/// True iff every party gets the floor or ceiling of its quota and all `h`
/// seats are allocated.
pub fn check_quota(profile: &PartyProfile, allocation: &SeatAllocation) -> bool {
    if allocation.seats.len() != profile.parties || allocation.total() != profile.seats as u64 {
        return false;
    }
    profile.quotas().iter().zip(&allocation.seats).all(|(q, &s)| {
        let floor = q.numer().div_floor(q.denom());
        let ceil = q.numer().div_ceil(q.denom());
        let s = BigInt::from(s);
        s == floor || s == ceil
    })
}
