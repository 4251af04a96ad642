//! Command-line front end for `monopsc`.
//!
//! Exit codes: 0 success or property holds, 1 property violated, 2 usage or
//! parse error, 3 enumeration cap exceeded.

pub mod commands;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "monopsc", version, about = "Proportional, candidate-monotone committee selection")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output format; each command picks a sensible default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Upper bound on enumerated committees.
    #[arg(long, global = true, default_value_t = monopsc::DEFAULT_CAP)]
    pub cap: u64,
    /// What to do with ballots that rank only some candidates.
    #[arg(long, global = true, value_enum, default_value_t = Incomplete::Reject)]
    pub incomplete: Incomplete,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Incomplete {
    Reject,
    /// Append unranked candidates in ascending order.
    Append,
    /// Append unranked candidates in a seeded random order.
    Shuffle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Ordered,
    Pfr,
    MinimalDemand,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AuditMode {
    PscSet,
    Pfr,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a rule on a ballot file.
    Run {
        #[arg(value_enum)]
        rule: Rule,
        file: PathBuf,
        /// Also print probabilities as decimals.
        #[arg(long)]
        decimals: bool,
    },
    /// Check whether a committee (1-based, comma separated) satisfies PSC.
    Check { file: PathBuf, committee: String },
    /// Sample committees from the rounded PFR lottery.
    Sample {
        file: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Also write the (committee, count) histogram CSV here.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Per-instance lottery statistics for a directory of ballot files.
    Stats {
        dir: PathBuf,
        #[arg(long, default_value_t = 50_000)]
        count: usize,
        /// Write per-instance rows here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-(m, k) averages here.
        #[arg(long)]
        aggregate: Option<PathBuf>,
        /// Largest symbolic rounding tree expanded exactly.
        #[arg(long, default_value_t = 10_000)]
        exact_cap: u64,
    },
    /// Audit candidate monotonicity on a file or a random sweep.
    Audit {
        #[arg(value_enum)]
        mode: AuditMode,
        file: Option<PathBuf>,
        /// Random sweep: voters, candidates, committee size, instance count.
        #[arg(long, num_args = 4, value_names = ["N", "M", "K", "COUNT"], conflicts_with = "file")]
        random: Option<Vec<u64>>,
        /// Move every copy of a ballot line instead of a single voter.
        #[arg(long)]
        whole_line: bool,
    },
    /// Print a random ballot file (uniform rankings) for the given seed.
    Generate {
        #[arg(long)]
        voters: u64,
        #[arg(long)]
        candidates: usize,
        #[arg(long)]
        size: usize,
    },
    /// Randomized apportionment with quota guarantees.
    Apportion {
        /// Party ballot file (header `parties seats`).
        file: Option<PathBuf>,
        /// Single-party votes, e.g. `A=2,B=1`.
        #[arg(long, conflicts_with = "file", requires = "seats")]
        votes: Option<String>,
        #[arg(long)]
        seats: Option<usize>,
    },
}
