//! Candidate monotonicity audits.
//!
//! Each audit moves a candidate one rank up on a ballot and compares the
//! outcome before and after. For the set of all PSC committees the
//! strengthened candidate must stay in some PSC committee; for PFR its
//! probability must not drop. All comparisons are exact.

use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::coalitions::enumerate_psc_committees;
use crate::error::Result;
use crate::model::{int, serialize_instance, serialize_rational, Instance, Rational};
use crate::phragmen::pfr;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Which copies of a ballot line a perturbation moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerturbationMode {
    /// A single voter, as in the axiom.
    #[default]
    SingleCopy,
    /// Every copy of the line at once.
    WholeLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditKind {
    PscSet,
    Pfr,
}

/// A perturbation after which the audited quantity decreased.
///
/// For the PSC-set audit the values count PSC committees containing the
/// candidate; for PFR they are the candidate's probabilities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditViolation {
    #[serde(serialize_with = "one_based")]
    pub line: usize,
    #[serde(serialize_with = "one_based")]
    pub candidate: usize,
    #[serde(serialize_with = "serialize_rational")]
    pub before: Rational,
    #[serde(serialize_with = "serialize_rational")]
    pub after: Rational,
}

fn one_based<S: serde::Serializer>(v: &usize, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u64(*v as u64 + 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub kind: AuditKind,
    pub instance_digest: String,
    pub perturbations: u64,
    /// Perturbations where a candidate with positive probability dropped to zero.
    pub support_losses: u64,
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    /// Combines reports of the same kind, e.g. over a random sweep.
    pub fn merge(mut self, other: AuditReport) -> AuditReport {
        self.perturbations += other.perturbations;
        self.support_losses += other.support_losses;
        self.violations.extend(other.violations);
        self
    }
}

/// SHA-256 of the instance's ballot-file serialization, hex encoded.
pub fn instance_digest(inst: &Instance) -> String {
    Sha256::digest(serialize_instance(inst).as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Every (line, candidate) pair where the candidate is not top-ranked.
fn perturbation_sites(inst: &Instance) -> Vec<(usize, usize)> {
    inst.ballots()
        .iter()
        .enumerate()
        .flat_map(|(line, b)| b.ranking[1..].iter().map(move |&c| (line, c)))
        .collect()
}

fn perturb(inst: &Instance, line: usize, candidate: usize, mode: PerturbationMode) -> Instance {
    let count = match mode {
        PerturbationMode::SingleCopy => 1,
        PerturbationMode::WholeLine => inst.ballots()[line].count,
    };
    inst.swap_up(line, count, candidate)
        .expect("perturbation sites exclude top-ranked candidates")
}

pub fn audit_psc_set(inst: &Instance, cap: u64) -> Result<AuditReport> {
    audit_psc_set_with(inst, cap, PerturbationMode::SingleCopy)
}

/// Checks that the PSC committee set is candidate monotone at `inst`.
pub fn audit_psc_set_with(inst: &Instance, cap: u64, mode: PerturbationMode) -> Result<AuditReport> {
    let committees = enumerate_psc_committees(inst, cap)?;
    let mut containing = vec![0u64; inst.candidate_count()];
    for w in &committees {
        for &c in w.members() {
            containing[c] += 1;
        }
    }
    let sites: Vec<(usize, usize)> = perturbation_sites(inst)
        .into_iter()
        .filter(|&(_, c)| containing[c] > 0)
        .collect();
    let outcomes: Vec<Result<Option<AuditViolation>>> = sites
        .par_iter()
        .map(|&(line, c)| {
            let perturbed = perturb(inst, line, c, mode);
            let after = enumerate_psc_committees(&perturbed, cap)?
                .iter()
                .filter(|w| w.contains(c))
                .count() as u64;
            Ok((after == 0).then(|| AuditViolation {
                line,
                candidate: c,
                before: int(containing[c]),
                after: int(after),
            }))
        })
        .collect();
    let mut violations = Vec::new();
    for outcome in outcomes {
        violations.extend(outcome?);
    }
    Ok(AuditReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: AuditKind::PscSet,
        instance_digest: instance_digest(inst),
        perturbations: sites.len() as u64,
        support_losses: violations.len() as u64,
        violations,
    })
}

pub fn audit_pfr(inst: &Instance) -> AuditReport {
    audit_pfr_with(inst, PerturbationMode::SingleCopy)
}

/// Checks that no candidate's PFR probability drops when it moves up.
pub fn audit_pfr_with(inst: &Instance, mode: PerturbationMode) -> AuditReport {
    let (base, _) = pfr(inst);
    let sites = perturbation_sites(inst);
    let results: Vec<(Option<AuditViolation>, bool)> = sites
        .par_iter()
        .map(|&(line, c)| {
            let (after, _) = pfr(&perturb(inst, line, c, mode));
            let before = base.probability(c);
            let after = after.probability(c);
            let lost_support = !before.is_zero() && after.is_zero();
            let violation = (after < before).then(|| AuditViolation {
                line,
                candidate: c,
                before: before.clone(),
                after: after.clone(),
            });
            (violation, lost_support)
        })
        .collect();
    let support_losses = results.iter().filter(|(_, lost)| *lost).count() as u64;
    let violations: Vec<AuditViolation> = results.into_iter().filter_map(|(v, _)| v).collect();
    // positive probability cannot vanish without a recorded decrease
    assert!(support_losses <= violations.len() as u64);
    AuditReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: AuditKind::Pfr,
        instance_digest: instance_digest(inst),
        perturbations: sites.len() as u64,
        support_losses,
        violations,
    }
}
