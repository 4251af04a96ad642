//! Dependent rounding of PFR outcomes into lotteries over PSC committees.
//!
//! The PFR ledger is turned into a bipartite graph whose left side holds
//! group vertices and whose right side holds candidates. Candidates with
//! probability one get a dedicated vertex. Then, rank by rank, every maximal
//! solid coalition with at least one unit of unassigned eaten mass on its
//! prefix set claims `floor(mass)` units as a coalition vertex. Rounding the
//! graph with GKPS pipage steps keeps every edge marginal and rounds each
//! vertex degree to the floor or ceiling of its fractional degree, which
//! yields committees of size `k` satisfying PSC.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coalitions::{enumerate_solid_coalitions, floor_to_u64};
use crate::error::{Error, Result};
use crate::model::{int, Committee, Instance, Rational};
use crate::phragmen::{pfr, EatingLedger};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupVertex {
    /// Stands in for a candidate with probability one.
    Dedicated { candidate: usize },
    /// Claims `demand` units of a coalition's eaten mass.
    Coalition { rank: usize, candidates: Vec<usize>, demand: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub left: usize,
    pub candidate: usize,
    pub weight: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundingGraph {
    pub left: Vec<GroupVertex>,
    pub candidates: usize,
    pub edges: Vec<Edge>,
}

impl RoundingGraph {
    /// Total incident weight of each candidate.
    pub fn candidate_weights(&self) -> Vec<Rational> {
        let mut weights = vec![Rational::zero(); self.candidates];
        for e in &self.edges {
            weights[e.candidate] += &e.weight;
        }
        weights
    }

    /// Fractional degree of each left vertex.
    pub fn left_degrees(&self) -> Vec<Rational> {
        let mut degrees = vec![Rational::zero(); self.left.len()];
        for e in &self.edges {
            degrees[e.left] += &e.weight;
        }
        degrees
    }

    pub fn total_weight(&self) -> Rational {
        self.edges.iter().fold(Rational::zero(), |acc, e| acc + &e.weight)
    }
}

/// Builds the rounding graph from a PFR ledger of `inst`.
///
/// Deductions inside a coalition are greedy: candidates in ascending index,
/// voters in ascending line order, each taking as much as is left.
pub fn build_rounding_graph(inst: &Instance, ledger: &EatingLedger) -> Result<RoundingGraph> {
    let m = inst.candidate_count();
    let lines = inst.ballots().len();
    let mut remaining: Vec<Vec<Rational>> = (0..lines)
        .map(|line| (0..m).map(|c| ledger.line_total(line, c)).collect())
        .collect();
    let mut graph = RoundingGraph { left: Vec::new(), candidates: m, edges: Vec::new() };

    for c in 0..m {
        if ledger.candidate_total(c).is_one() {
            let left = graph.left.len();
            graph.left.push(GroupVertex::Dedicated { candidate: c });
            graph.edges.push(Edge { left, candidate: c, weight: Rational::one() });
            for row in remaining.iter_mut() {
                row[c] = Rational::zero();
            }
        }
    }

    for coalition in enumerate_solid_coalitions(inst) {
        let mass = coalition
            .lines()
            .iter()
            .flat_map(|&line| coalition.candidates().iter().map(move |&c| (line, c)))
            .fold(Rational::zero(), |acc, (line, c)| acc + &remaining[line][c]);
        let demand = floor_to_u64(&mass);
        if demand == 0 {
            continue;
        }
        let left = graph.left.len();
        let mut still_needed = int(demand);
        for &c in coalition.candidates() {
            let mut weight = Rational::zero();
            for &line in coalition.lines() {
                if still_needed.is_zero() {
                    break;
                }
                let take = if remaining[line][c] < still_needed {
                    remaining[line][c].clone()
                } else {
                    still_needed.clone()
                };
                remaining[line][c] -= &take;
                still_needed -= &take;
                weight += take;
            }
            if !weight.is_zero() {
                graph.edges.push(Edge { left, candidate: c, weight });
            }
        }
        if !still_needed.is_zero() {
            return Err(Error::Inconsistent(format!(
                "coalition over {:?} could not cover its demand {demand}",
                coalition.candidates()
            )));
        }
        graph.left.push(GroupVertex::Coalition {
            rank: coalition.rank(),
            candidates: coalition.candidates().to_vec(),
            demand,
        });
    }

    let leftover = remaining.iter().flatten().fold(Rational::zero(), |acc, v| acc + v);
    if !leftover.is_zero() {
        return Err(Error::Inconsistent(format!("unassigned mass {leftover} after the last rank")));
    }
    Ok(graph)
}

/// Final selection of one rounding run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundedOutcome {
    pub selected_edges: Vec<usize>,
    pub committee: Committee,
}

impl RoundedOutcome {
    /// Number of selected edges at each left vertex.
    pub fn left_degrees(&self, graph: &RoundingGraph) -> Vec<u64> {
        let mut degrees = vec![0; graph.left.len()];
        for &e in &self.selected_edges {
            degrees[graph.edges[e].left] += 1;
        }
        degrees
    }
}

/// One pipage move: edges alternate between `plus` and `minus` sets.
struct Step {
    plus: Vec<usize>,
    minus: Vec<usize>,
    /// Shift applied with probability `beta / (alpha + beta)`.
    alpha: Rational,
    /// Opposite shift, applied otherwise.
    beta: Rational,
}

impl Step {
    fn up_probability(&self) -> Rational {
        &self.beta / (&self.alpha + &self.beta)
    }

    fn apply(&self, weights: &mut [Rational], up: bool) {
        let (grow, shrink, delta) = if up {
            (&self.plus, &self.minus, &self.alpha)
        } else {
            (&self.minus, &self.plus, &self.beta)
        };
        for &e in grow {
            weights[e] += delta;
        }
        for &e in shrink {
            weights[e] -= delta;
        }
    }
}

fn is_floating(w: &Rational) -> bool {
    !w.is_zero() && !w.is_one()
}

/// Vertex-edge incidence of the graph; left vertex `i` is vertex `i`,
/// candidate `c` is vertex `left.len() + c`.
struct Incidence {
    endpoints: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Incidence {
    fn new(graph: &RoundingGraph) -> Self {
        let offset = graph.left.len();
        let mut adjacency = vec![Vec::new(); offset + graph.candidates];
        let endpoints: Vec<(usize, usize)> =
            graph.edges.iter().map(|e| (e.left, offset + e.candidate)).collect();
        for (i, &(a, b)) in endpoints.iter().enumerate() {
            adjacency[a].push(i);
            adjacency[b].push(i);
        }
        Self { endpoints, adjacency }
    }

    fn other(&self, edge: usize, vertex: usize) -> usize {
        let (a, b) = self.endpoints[edge];
        if a == vertex {
            b
        } else {
            a
        }
    }

    /// Picks the next cycle or maximal path of floating edges, walking
    /// depth-first from the lowest-numbered vertex of floating degree one,
    /// or from the lowest-numbered floating vertex when none has degree one.
    fn next_step(&self, weights: &[Rational]) -> Option<Step> {
        let floating_degree: Vec<usize> = self
            .adjacency
            .iter()
            .map(|edges| edges.iter().filter(|&&e| is_floating(&weights[e])).count())
            .collect();
        let start = floating_degree
            .iter()
            .position(|&d| d == 1)
            .or_else(|| floating_degree.iter().position(|&d| d > 0))?;

        let mut position = vec![None; self.adjacency.len()];
        let mut walk: Vec<usize> = Vec::new();
        let mut current = start;
        position[current] = Some(0);
        let mut previous: Option<usize> = None;
        let edges = loop {
            let next = self.adjacency[current]
                .iter()
                .copied()
                .find(|&e| Some(e) != previous && is_floating(&weights[e]));
            let Some(edge) = next else {
                break walk;
            };
            walk.push(edge);
            let vertex = self.other(edge, current);
            if let Some(at) = position[vertex] {
                break walk.split_off(at);
            }
            position[vertex] = Some(walk.len());
            previous = Some(edge);
            current = vertex;
        };

        let (plus, minus): (Vec<(usize, usize)>, Vec<(usize, usize)>) =
            edges.into_iter().enumerate().partition(|(i, _)| i % 2 == 0);
        let plus: Vec<usize> = plus.into_iter().map(|(_, e)| e).collect();
        let minus: Vec<usize> = minus.into_iter().map(|(_, e)| e).collect();
        let room_up = |e: &usize| Rational::one() - &weights[*e];
        let room_down = |e: &usize| weights[*e].clone();
        let alpha = plus.iter().map(room_up).chain(minus.iter().map(room_down)).min()?;
        let beta = plus.iter().map(room_down).chain(minus.iter().map(room_up)).min()?;
        Some(Step { plus, minus, alpha, beta })
    }
}

fn outcome(graph: &RoundingGraph, weights: &[Rational]) -> RoundedOutcome {
    let selected_edges: Vec<usize> = (0..weights.len()).filter(|&e| weights[e].is_one()).collect();
    let committee = Committee::from_members(selected_edges.iter().map(|&e| graph.edges[e].candidate));
    RoundedOutcome { selected_edges, committee }
}

/// Exact Bernoulli draw with success probability `p`, resolved to 2^-64.
fn coin<R: RngCore>(rng: &mut R, p: &Rational) -> bool {
    let u = BigInt::from(rng.next_u64());
    // u / 2^64 < num / den
    u * p.denom() < p.numer() * (BigInt::one() << 64)
}

/// GKPS dependent rounding of `graph`, driven by `rng`.
pub fn gkps_round_with<R: RngCore>(graph: &RoundingGraph, rng: &mut R) -> RoundedOutcome {
    let incidence = Incidence::new(graph);
    let mut weights: Vec<Rational> = graph.edges.iter().map(|e| e.weight.clone()).collect();
    while let Some(step) = incidence.next_step(&weights) {
        let up = step.up_probability();
        // the expected shift of every edge vanishes
        assert!(
            &step.alpha * &up == &step.beta * (Rational::one() - &up),
            "rounding step is not mean-preserving"
        );
        step.apply(&mut weights, coin(rng, &up));
    }
    outcome(graph, &weights)
}

/// GKPS dependent rounding with a generator seeded from `seed`.
pub fn gkps_round(graph: &RoundingGraph, seed: u64) -> RoundedOutcome {
    gkps_round_with(graph, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Random stream for draw number `draw` under `seed`.
pub fn draw_rng(seed: u64, draw: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw);
    rng
}

/// Runs PFR and graph construction once, then `count` independent roundings.
pub fn sample_committees(inst: &Instance, count: usize, seed: u64) -> Result<Vec<Committee>> {
    let (_, ledger) = pfr(inst);
    let graph = build_rounding_graph(inst, &ledger)?;
    Ok(sample_from_graph(&graph, count, seed))
}

pub fn sample_from_graph(graph: &RoundingGraph, count: usize, seed: u64) -> Vec<Committee> {
    (0..count as u64)
        .into_par_iter()
        .map(|draw| gkps_round_with(graph, &mut draw_rng(seed, draw)).committee)
        .collect()
}

/// Exact output distribution of [`gkps_round`], obtained by expanding every
/// coin flip symbolically. Fails when more than `cap` steps would be visited.
pub fn exact_support(graph: &RoundingGraph, cap: u64) -> Result<BTreeMap<Committee, Rational>> {
    let incidence = Incidence::new(graph);
    let weights: Vec<Rational> = graph.edges.iter().map(|e| e.weight.clone()).collect();
    let mut out = BTreeMap::new();
    let mut visited = 0u64;
    let mut stack = vec![(weights, Rational::one())];
    while let Some((weights, probability)) = stack.pop() {
        visited += 1;
        if visited > cap {
            return Err(Error::CapExceeded { cap });
        }
        match incidence.next_step(&weights) {
            None => {
                *out.entry(outcome(graph, &weights).committee).or_insert_with(Rational::zero) += probability;
            }
            Some(step) => {
                let up = step.up_probability();
                let mut raised = weights.clone();
                step.apply(&mut raised, true);
                let mut lowered = weights;
                step.apply(&mut lowered, false);
                stack.push((lowered, &probability * (Rational::one() - &up)));
                stack.push((raised, probability * up));
            }
        }
    }
    Ok(out)
}

/// Per-candidate marginals of a committee distribution.
pub fn marginals(distribution: &BTreeMap<Committee, Rational>, candidates: usize) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); candidates];
    for (committee, p) in distribution {
        for &c in committee.members() {
            out[c] += p;
        }
    }
    out
}
