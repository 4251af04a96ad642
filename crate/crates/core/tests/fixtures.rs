mod common;

use std::collections::BTreeMap;

use common::fixture;
use monopsc::coalitions::{check_psc, enumerate_psc_committees, enumerate_solid_coalitions};
use monopsc::model::ratio;
use monopsc::phragmen::{ordered_rule, pfr, pfr_discrete_oracle};
use monopsc::rounding::{build_rounding_graph, exact_support, marginals, sample_committees};
use monopsc::{parse_instance, serialize_instance, Committee, DEFAULT_CAP};

fn w(members: &[usize]) -> Committee {
    Committee::from_members(members.iter().map(|c| c - 1))
}

#[test]
fn ordered_rule_elects_c1_then_c3() {
    let (committee, trace) = ordered_rule(&fixture("ordered_four_voters"));
    assert_eq!(committee, w(&[1, 3]));
    let elected: Vec<_> = trace.elections().map(|e| (e.candidate + 1, e.time.clone())).collect();
    assert_eq!(elected, vec![(1, ratio(1, 2)), (3, ratio(3, 4))]);
}

#[test]
fn fractional_rule_four_voters() {
    let (f, _) = pfr(&fixture("fractional_four_voters"));
    assert_eq!(f.probabilities(), &[ratio(1, 1), ratio(1, 6), ratio(2, 3), ratio(1, 6)]);
}

#[test]
fn fifteen_voters_ordered_rule_fails_psc() {
    let inst = fixture("fifteen_voters");
    let (f, _) = pfr(&inst);
    let mut expected = vec![ratio(2, 5); 5];
    expected.extend([ratio(1, 1), ratio(0, 1)]);
    assert_eq!(f.probabilities(), expected.as_slice());

    let (committee, trace) = ordered_rule(&inst);
    assert_eq!(committee, w(&[1, 6, 7]));
    let order: Vec<_> = trace.elections().map(|e| e.candidate + 1).collect();
    assert_eq!(order, vec![6, 7, 1]);
    let violation = check_psc(&inst, &committee).unwrap();
    assert_eq!(violation.demand, 2);
    assert_eq!(violation.achieved, 1);
    assert_eq!(violation.coalition.candidates(), &[0, 1, 2, 3, 4]);
    assert_eq!(violation.coalition.size(), 10);
}

#[test]
fn six_candidates_mass_and_rounding() {
    let inst = fixture("six_candidates");
    let (f, ledger) = pfr(&inst);
    let half = ratio(1, 2);
    let zero = ratio(0, 1);
    assert_eq!(f.probabilities(), &[half.clone(), zero.clone(), zero, half.clone(), half.clone(), half]);
    let graph = build_rounding_graph(&inst, &ledger).unwrap();
    let dist = exact_support(&graph, 10_000).unwrap();
    assert_eq!(marginals(&dist, 6), f.probabilities());
    for committee in dist.keys() {
        assert!(!committee.contains(1) && !committee.contains(2));
    }
    for committee in sample_committees(&inst, 500, 11).unwrap() {
        assert!(!committee.contains(1) && !committee.contains(2));
    }
}

#[test]
fn psc_set_of_four_voter_example() {
    let inst = fixture("psc_four_voters");
    let all = enumerate_psc_committees(&inst, DEFAULT_CAP).unwrap();
    assert_eq!(all, vec![w(&[1, 2]), w(&[1, 3]), w(&[1, 4]), w(&[2, 3]), w(&[2, 4])]);
    let swapped = inst.swap_up(2, 1, 3).unwrap();
    assert_eq!(swapped.ballots()[2].ranking, vec![3, 2, 0, 1]);
    assert_eq!(enumerate_psc_committees(&swapped, DEFAULT_CAP).unwrap(), vec![w(&[1, 4]), w(&[2, 4])]);
}

#[test]
fn fifteen_voter_coalition_over_first_five() {
    let inst = fixture("fifteen_voters");
    let at_five: Vec<_> = enumerate_solid_coalitions(&inst)
        .into_iter()
        .filter(|c| c.rank() == 5)
        .map(|c| (c.candidates().to_vec(), c.size()))
        .collect();
    assert!(at_five.contains(&(vec![0, 1, 2, 3, 4], 10)));
}

#[test]
fn round_trips_preserve_multiplicities() {
    for name in ["psc_four_voters", "fifteen_voters", "six_candidates"] {
        let inst = fixture(name);
        let text = serialize_instance(&inst);
        assert_eq!(parse_instance(&text).unwrap(), inst);
    }
    let text = serialize_instance(&fixture("fifteen_voters"));
    assert!(text.contains("2: 1 2 3 4 5 6 7\n"));
    assert!(text.contains("5: 6 7 1 2 3 4 5\n"));
    let single = parse_instance("3 2\n1: 2 3 1\n").unwrap();
    assert_eq!(parse_instance(&serialize_instance(&single)).unwrap(), single);
}

#[test]
fn rounding_lottery_of_four_voter_fractional_example() {
    let inst = fixture("fractional_four_voters");
    let (_, ledger) = pfr(&inst);
    let graph = build_rounding_graph(&inst, &ledger).unwrap();
    let dist = exact_support(&graph, 100).unwrap();
    let expected: BTreeMap<_, _> =
        [(w(&[1, 2]), ratio(1, 6)), (w(&[1, 3]), ratio(2, 3)), (w(&[1, 4]), ratio(1, 6))].into_iter().collect();
    assert_eq!(dist, expected);
    for committee in sample_committees(&inst, 200, 3).unwrap() {
        assert!(committee.contains(0));
        assert!(check_psc(&inst, &committee).is_none());
    }
}

#[test]
fn psc_failure_sampled_frequencies() {
    let inst = fixture("fifteen_voters");
    let samples = sample_committees(&inst, 10_000, 2024).unwrap();
    let n = samples.len() as f64;
    let p: f64 = 0.4;
    let band = 3.0 * (p * (1.0 - p) / n).sqrt();
    for c in 0..5 {
        let freq = samples.iter().filter(|w| w.contains(c)).count() as f64 / n;
        assert!((freq - p).abs() <= band, "c{} frequency {freq}", c + 1);
    }
    assert!(samples.iter().all(|w| w.contains(5) && check_psc(&inst, w).is_none()));
}

#[test]
fn discrete_oracle_on_fractional_example() {
    for steps in [24, 48, 96] {
        let f = pfr_discrete_oracle(&fixture("fractional_four_voters"), steps).unwrap();
        assert_eq!(f.probabilities(), &[ratio(1, 1), ratio(1, 6), ratio(2, 3), ratio(1, 6)]);
    }
}
