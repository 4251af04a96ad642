use std::fmt;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// What went wrong on a particular line of a ballot file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    MalformedHeader,
    MissingHeader,
    MalformedLine,
    ZeroMultiplicity,
    CandidateOutOfRange(usize),
    DuplicateCandidate(usize),
    MissingCandidate(usize),
    CommitteeTooLarge { committee_size: usize, candidates: usize },
    EmptyProfile,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MalformedHeader => write!(f, "malformed header, expected `m k` with positive integers"),
            Self::MissingHeader => write!(f, "missing header"),
            Self::MalformedLine => write!(f, "malformed ballot line, expected `count: i1 i2 ... im`"),
            Self::ZeroMultiplicity => write!(f, "ballot multiplicity must be positive"),
            Self::CandidateOutOfRange(c) => write!(f, "candidate {c} out of range"),
            Self::DuplicateCandidate(c) => write!(f, "candidate {c} ranked twice"),
            Self::MissingCandidate(c) => write!(f, "ranking is missing candidate {c}"),
            Self::CommitteeTooLarge { committee_size, candidates } => write!(
                f,
                "committee size {committee_size} exceeds candidate count {candidates}"
            ),
            Self::EmptyProfile => write!(f, "profile contains no ballots"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {kind}")]
    Parse { line: usize, kind: ParseErrorKind },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid committee: {0}")]
    InvalidCommittee(String),
    #[error("invalid perturbation: {0}")]
    InvalidSwap(String),
    #[error("enumeration cap exceeded: more than {cap} items")]
    CapExceeded { cap: u64 },
    #[error("rounding graph inconsistency: {0}")]
    Inconsistent(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
