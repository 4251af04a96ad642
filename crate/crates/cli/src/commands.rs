use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use monopsc::apportionment::{check_quota, Apportioner, PartyProfile};
use monopsc::coalitions::{check_psc, minimal_demand_single, PscChecker};
use monopsc::model::{candidate_name, random_instance, to_f64};
use monopsc::monotonicity::{
    audit_pfr_with, audit_psc_set_with, instance_digest, AuditKind, AuditReport, AuditViolation, PerturbationMode,
    REPORT_SCHEMA_VERSION,
};
use monopsc::phragmen::{ordered_rule, pfr_with_trace};
use monopsc::rounding::{build_rounding_graph, draw_rng, sample_from_graph};
use monopsc::stats::{aggregate, histogram, instance_stats, StatsConfig, StatsRow};
use monopsc::{parse_instance_with, Committee, CompletionPolicy, Error, Instance};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::{AuditMode, Cli, Command, Format, Incomplete, Rule};

pub const SCHEMA_VERSION: u32 = 1;

/// A checked property failed on the input (exit code 1).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct PropertyViolated(pub String);

pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<PropertyViolated>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::CapExceeded { .. }) => 3,
        Some(Error::Inconsistent(_)) => 1,
        _ => 2,
    }
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<u8> {
    match &cli.command {
        Command::Run { rule, file, decimals } => {
            let inst = load_instance(file, cli)?;
            run(&inst, *rule, *decimals, cli.format.unwrap_or(Format::Text), out)
        }
        Command::Check { file, committee } => {
            let inst = load_instance(file, cli)?;
            check(&inst, committee, cli.format.unwrap_or(Format::Text), out)
        }
        Command::Sample { file, count, histogram } => {
            let inst = load_instance(file, cli)?;
            sample(&inst, *count, cli.seed, histogram.as_deref(), cli.format.unwrap_or(Format::Json), out)
        }
        Command::Stats { dir, count, out: path, aggregate, exact_cap } => {
            let config = StatsConfig { samples: *count, seed: cli.seed, psc_cap: cli.cap, exact_cap: *exact_cap };
            let rows = stats_rows(dir, &config, policy(cli), &mut std::io::stderr())?;
            match path {
                Some(p) => write_csv(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?, &rows)?,
                None => write_csv(&mut *out, &rows)?,
            }
            if let Some(p) = aggregate {
                let file = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
                write_csv(file, &aggregate_rows(&rows))?;
            }
            Ok(0)
        }
        Command::Audit { mode, file, random, whole_line } => {
            let perturbation = if *whole_line { PerturbationMode::WholeLine } else { PerturbationMode::SingleCopy };
            let holds = match (file, random) {
                (Some(file), _) => {
                    let report = audit_one(&load_instance(file, cli)?, *mode, cli.cap, perturbation)?;
                    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
                    report.holds()
                }
                (None, Some(sweep)) => {
                    let [n, m, k, count] = sweep[..] else { unreachable!("clap enforces four values") };
                    let report = audit_sweep(*mode, n, m as usize, k as usize, count, cli.seed, cli.cap, perturbation)?;
                    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
                    report.violations.is_empty()
                }
                (None, None) => return Err(Error::InvalidArgument("give a ballot file or --random N M K COUNT".into()).into()),
            };
            Ok(if holds { 0 } else { 1 })
        }
        Command::Generate { voters, candidates, size } => {
            let inst = random_instance(&mut draw_rng(cli.seed, 0), *voters, *candidates, *size)?;
            write!(out, "{}", monopsc::serialize_instance(&inst))?;
            Ok(0)
        }
        Command::Apportion { file, votes, seats } => {
            let (names, profile) = match (file, votes) {
                (Some(file), _) => {
                    let profile = PartyProfile::parse(&read(file)?)?;
                    let names = (1..=profile.parties()).map(|p| p.to_string()).collect();
                    (names, profile)
                }
                (None, Some(votes)) => {
                    let (names, counts) = parse_votes(votes)?;
                    let seats = seats.ok_or_else(|| Error::InvalidArgument("--votes needs --seats".into()))?;
                    (names, PartyProfile::from_votes(&counts, seats)?)
                }
                (None, None) => return Err(Error::InvalidArgument("give a party file or --votes".into()).into()),
            };
            apportion(&names, &profile, cli.seed, cli.format.unwrap_or(Format::Json), out)
        }
    }
}

fn policy(cli: &Cli) -> CompletionPolicy {
    match cli.incomplete {
        Incomplete::Reject => CompletionPolicy::Reject,
        Incomplete::Append => CompletionPolicy::AppendAscending,
        Incomplete::Shuffle => CompletionPolicy::ShuffleTail { seed: cli.seed },
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_instance(path: &Path, cli: &Cli) -> anyhow::Result<Instance> {
    let text = read(path)?;
    parse_instance_with(&text, policy(cli)).with_context(|| format!("parsing {}", path.display()))
}

fn run(inst: &Instance, rule: Rule, decimals: bool, format: Format, out: &mut dyn Write) -> anyhow::Result<u8> {
    match rule {
        Rule::Ordered | Rule::MinimalDemand => {
            let (committee, trace, name) = match rule {
                Rule::Ordered => {
                    let (w, trace) = ordered_rule(inst);
                    (w, Some(trace), "ordered")
                }
                _ => (minimal_demand_single(inst), None, "minimal-demand"),
            };
            match format {
                Format::Text => writeln!(out, "{committee}")?,
                Format::Csv => {
                    writeln!(out, "candidate")?;
                    for c in committee.one_based() {
                        writeln!(out, "{c}")?;
                    }
                }
                Format::Json => {
                    let mut doc = json!({
                        "schema_version": SCHEMA_VERSION,
                        "rule": name,
                        "committee": committee.one_based(),
                    });
                    if let Some(trace) = trace {
                        doc["trace"] = serde_json::to_value(&trace.events)?;
                    }
                    writeln!(out, "{doc}")?;
                }
            }
        }
        Rule::Pfr => {
            let (f, _, trace) = pfr_with_trace(inst);
            match format {
                Format::Text => {
                    writeln!(out, "{}", f.to_text())?;
                    if decimals {
                        let parts: Vec<String> = f
                            .probabilities()
                            .iter()
                            .enumerate()
                            .map(|(c, p)| format!("{}={:.6}", candidate_name(c), to_f64(p)))
                            .collect();
                        writeln!(out, "{}", parts.join(", "))?;
                    }
                }
                Format::Csv => {
                    writeln!(out, "candidate,probability{}", if decimals { ",decimal" } else { "" })?;
                    for (c, p) in f.probabilities().iter().enumerate() {
                        if decimals {
                            writeln!(out, "{},{},{}", c + 1, p, to_f64(p))?;
                        } else {
                            writeln!(out, "{},{}", c + 1, p)?;
                        }
                    }
                }
                Format::Json => {
                    let mut doc = json!({
                        "schema_version": SCHEMA_VERSION,
                        "rule": "pfr",
                        "probabilities": f,
                        "trace": trace.events,
                    });
                    if decimals {
                        let map: Map<String, Value> = f
                            .probabilities()
                            .iter()
                            .enumerate()
                            .map(|(c, p)| (candidate_name(c), json!(to_f64(p))))
                            .collect();
                        doc["decimals"] = Value::Object(map);
                    }
                    writeln!(out, "{doc}")?;
                }
            }
        }
    }
    Ok(0)
}

fn parse_committee(inst: &Instance, text: &str) -> anyhow::Result<Committee> {
    let members = text
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| match s.trim_start_matches('c').parse::<usize>() {
            Ok(c) if c >= 1 => Ok(c - 1),
            _ => Err(Error::InvalidCommittee(format!("bad candidate `{s}`"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Committee::for_instance(inst, members)?)
}

fn check(inst: &Instance, committee: &str, format: Format, out: &mut dyn Write) -> anyhow::Result<u8> {
    let committee = parse_committee(inst, committee)?;
    let violation = check_psc(inst, &committee);
    match (&violation, format) {
        (None, Format::Json) => writeln!(out, "{}", json!({"schema_version": SCHEMA_VERSION, "psc": true}))?,
        (None, _) => writeln!(out, "PSC: yes")?,
        (Some(v), Format::Json) => {
            writeln!(out, "{}", json!({"schema_version": SCHEMA_VERSION, "psc": false, "violation": v}))?
        }
        (Some(v), _) => {
            writeln!(out, "PSC: no")?;
            writeln!(out, "{}", serde_json::to_string(v)?)?;
        }
    }
    Ok(if violation.is_none() { 0 } else { 1 })
}

/// Draws `count` committees, checks each for PSC and writes them out.
pub fn sample(
    inst: &Instance,
    count: usize,
    seed: u64,
    histogram_path: Option<&Path>,
    format: Format,
    out: &mut dyn Write,
) -> anyhow::Result<u8> {
    let (_, ledger, _) = pfr_with_trace(inst);
    let graph = build_rounding_graph(inst, &ledger)?;
    let samples = sample_from_graph(&graph, count, seed);
    let checker = PscChecker::new(inst);
    for w in &samples {
        if let Some(v) = checker.check(w) {
            return Err(PropertyViolated(format!("sampled committee {w} violates PSC: {}", serde_json::to_string(&v)?)).into());
        }
    }
    let counts = histogram(&samples);
    if let Some(path) = histogram_path {
        let mut file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_histogram(&mut file, &counts)?;
    }
    match format {
        Format::Csv => write_histogram(out, &counts)?,
        Format::Json => {
            for w in &samples {
                writeln!(out, "{}", json!({"schema_version": SCHEMA_VERSION, "committee": w.one_based()}))?;
            }
        }
        Format::Text => {
            for w in &samples {
                writeln!(out, "{w}")?;
            }
        }
    }
    Ok(0)
}

fn write_histogram(out: &mut dyn Write, counts: &BTreeMap<Committee, u64>) -> anyhow::Result<()> {
    writeln!(out, "schema_version,committee,count")?;
    for (w, n) in counts {
        let members: Vec<String> = w.one_based().iter().map(|c| c.to_string()).collect();
        writeln!(out, "{SCHEMA_VERSION},{},{n}", members.join(" "))?;
    }
    Ok(())
}

/// One stats row per readable ballot file in `dir`, sorted by file stem.
/// Files that fail to load are reported to `warnings` and skipped.
pub fn stats_rows(
    dir: &Path,
    config: &StatsConfig,
    policy: CompletionPolicy,
    warnings: &mut dyn Write,
) -> anyhow::Result<Vec<StatsRow>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let results: Vec<(PathBuf, anyhow::Result<StatsRow>)> = files
        .into_par_iter()
        .map(|path| {
            let row = (|| {
                let text = read(&path)?;
                let inst = parse_instance_with(&text, policy)?;
                let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                Ok(instance_stats(&id, &inst, config)?)
            })();
            (path, row)
        })
        .collect();
    let mut rows = Vec::new();
    for (path, row) in results {
        match row {
            Ok(row) => rows.push(row),
            Err(e) => writeln!(warnings, "warning: skipping {}: {e:#}", path.display())?,
        }
    }
    rows.sort_by(|a, b| a.instance.cmp(&b.instance));
    Ok(rows)
}

pub fn aggregate_rows(rows: &[StatsRow]) -> Vec<monopsc::stats::AggregateRow> {
    aggregate(rows)
}

fn write_csv<W: Write, T: Serialize>(writer: W, rows: &[T]) -> anyhow::Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for row in rows {
        csv.serialize(row)?;
    }
    csv.flush()?;
    Ok(())
}

fn audit_one(inst: &Instance, mode: AuditMode, cap: u64, perturbation: PerturbationMode) -> anyhow::Result<AuditReport> {
    Ok(match mode {
        AuditMode::PscSet => audit_psc_set_with(inst, cap, perturbation)?,
        AuditMode::Pfr => audit_pfr_with(inst, perturbation),
    })
}

#[derive(Debug, Serialize)]
pub struct SweepViolation {
    pub instance_digest: String,
    pub instance: String,
    #[serde(flatten)]
    pub violation: AuditViolation,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub kind: AuditKind,
    pub voters: u64,
    pub candidates: usize,
    pub committee_size: usize,
    pub seed: u64,
    pub instances: u64,
    pub perturbations: u64,
    pub support_losses: u64,
    pub violations: Vec<SweepViolation>,
}

/// Audits `count` random instances; instance `i` is generated from draw `i`
/// of the seed's stream.
#[allow(clippy::too_many_arguments)]
pub fn audit_sweep(
    mode: AuditMode,
    voters: u64,
    candidates: usize,
    committee_size: usize,
    count: u64,
    seed: u64,
    cap: u64,
    perturbation: PerturbationMode,
) -> anyhow::Result<SweepReport> {
    if voters == 0 || candidates == 0 || committee_size == 0 || committee_size > candidates {
        return Err(Error::InvalidArgument("need N, M >= 1 and 1 <= K <= M".into()).into());
    }
    let reports = (0..count)
        .into_par_iter()
        .map(|i| {
            let inst = random_instance(&mut draw_rng(seed, i), voters, candidates, committee_size)?;
            let report = audit_one(&inst, mode, cap, perturbation)?;
            Ok((inst, report))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut sweep = SweepReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: match mode {
            AuditMode::PscSet => AuditKind::PscSet,
            AuditMode::Pfr => AuditKind::Pfr,
        },
        voters,
        candidates,
        committee_size,
        seed,
        instances: count,
        perturbations: 0,
        support_losses: 0,
        violations: Vec::new(),
    };
    for (inst, report) in reports {
        sweep.perturbations += report.perturbations;
        sweep.support_losses += report.support_losses;
        for violation in report.violations {
            sweep.violations.push(SweepViolation {
                instance_digest: instance_digest(&inst),
                instance: monopsc::serialize_instance(&inst),
                violation,
            });
        }
    }
    Ok(sweep)
}

fn parse_votes(text: &str) -> anyhow::Result<(Vec<String>, Vec<u64>)> {
    let mut names = Vec::new();
    let mut counts = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, count) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected NAME=VOTES, got `{part}`")))?;
        let name = name.trim().to_string();
        if names.contains(&name) {
            return Err(Error::InvalidArgument(format!("party `{name}` listed twice")).into());
        }
        let count: u64 =
            count.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad vote count in `{part}`")))?;
        names.push(name);
        counts.push(count);
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::InvalidArgument("no votes given".into()).into());
    }
    Ok((names, counts))
}

fn apportion(
    names: &[String],
    profile: &PartyProfile,
    seed: u64,
    format: Format,
    out: &mut dyn Write,
) -> anyhow::Result<u8> {
    let apportioner = Apportioner::new(profile)?;
    let outcome = apportioner.draw(seed, 0);
    if !check_quota(profile, &outcome.allocation) {
        return Err(PropertyViolated(format!("allocation {:?} breaks quota", outcome.allocation.seats)).into());
    }
    match format {
        Format::Json => {
            let seats: Map<String, Value> =
                names.iter().zip(&outcome.allocation.seats).map(|(n, &s)| (n.clone(), json!(s))).collect();
            let expected: Map<String, Value> =
                names.iter().zip(apportioner.expected_seats()).map(|(n, q)| (n.clone(), json!(q.to_string()))).collect();
            writeln!(out, "{}", json!({"schema_version": SCHEMA_VERSION, "seats": seats, "expected": expected}))?;
        }
        Format::Csv => {
            writeln!(out, "schema_version,party,seats,expected")?;
            for ((n, s), q) in names.iter().zip(&outcome.allocation.seats).zip(apportioner.expected_seats()) {
                writeln!(out, "{SCHEMA_VERSION},{n},{s},{q}")?;
            }
        }
        Format::Text => {
            for ((n, s), q) in names.iter().zip(&outcome.allocation.seats).zip(apportioner.expected_seats()) {
                writeln!(out, "{n}: {s} (expected {q})")?;
            }
        }
    }
    Ok(0)
}
