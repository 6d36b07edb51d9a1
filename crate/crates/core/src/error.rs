use alloc::vec::Vec;
use core::fmt;

use crate::network::{VarId, Violation};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// The network failed validation.
    InvalidNetwork(Vec<Violation>),
    UnknownVariable(VarId),
    /// A parent cycle was found while ordering the network.
    Cycle,
    /// Evidence assigns a value outside the variable's range.
    InvalidEvidence { var: VarId, value: usize },
    VariableNotInScope(VarId),
    ScopeMismatch,
    /// Division found a zero denominator under a nonzero numerator.
    SupportViolation { index: usize },
    /// A dense table would exceed [`crate::factor::MAX_FACTOR_ENTRIES`].
    ScopeTooLarge { scope_len: usize, entries: u128 },
    /// Units, e1 and e2 must mention pairwise disjoint variables.
    NotDisjoint(VarId),
    /// The elimination order does not put every unit variable last.
    PlanNotConstrained,
    /// Every unit instantiation has `Pr(u, e2) = 0`.
    InconsistentEvidence,
    /// The circuit is not certified for the requested unit set.
    CertificateMissing,
    BudgetExceeded { limit: u64 },
    Interrupted,
    /// The oracle needs functional (0/1) CPTs for internal variables.
    NonDeterministicCpt(VarId),
    NegativeWeight { component: usize },
    /// Negative weights can only be shifted when the components partition
    /// the outcome space.
    PartitionRequired,
    /// A unit variable also appears as an outcome, treatment or evidence.
    UnitConflict(VarId),
    /// Interventions on shared exogenous roots would decouple the worlds.
    TreatmentOnRoot(VarId),
    ContradictoryEvents(VarId),
    EmptyObjective,
    InvalidConfig(&'static str),
    /// Malformed circuit dump; `line` is 1-based.
    Parse { line: usize, message: &'static str },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidNetwork(v) => {
                write!(f, "invalid network: {} violation(s)", v.len())?;
                for violation in v {
                    write!(f, "; {violation}")?;
                }
                Ok(())
            }
            Error::UnknownVariable(v) => write!(f, "unknown variable {v}"),
            Error::Cycle => f.write_str("the parent relation has a cycle"),
            Error::InvalidEvidence { var, value } => {
                write!(f, "evidence value {value} out of range for variable {var}")
            }
            Error::VariableNotInScope(v) => write!(f, "variable {v} is not in the factor scope"),
            Error::ScopeMismatch => f.write_str("factor scopes differ"),
            Error::SupportViolation { index } => {
                write!(f, "support violation at entry {index}: nonzero numerator over zero denominator")
            }
            Error::ScopeTooLarge { scope_len, entries } => write!(
                f,
                "factor over {scope_len} variables needs {entries} entries, above the dense-table cap"
            ),
            Error::NotDisjoint(v) => write!(f, "variable {v} appears in more than one of units, e1, e2"),
            Error::PlanNotConstrained => {
                f.write_str("elimination order does not eliminate all non-unit variables first")
            }
            Error::InconsistentEvidence => f.write_str("e2 inconsistent: Pr(u, e2) = 0 for every u"),
            Error::CertificateMissing => {
                f.write_str("circuit is not certified for linear-time MAP over the given units")
            }
            Error::BudgetExceeded { limit } => write!(f, "enumeration budget of {limit} exceeded"),
            Error::Interrupted => f.write_str("interrupted"),
            Error::NonDeterministicCpt(v) => write!(f, "internal variable {v} has a non-functional CPT"),
            Error::NegativeWeight { component } => {
                write!(f, "component {component} has a negative weight")
            }
            Error::PartitionRequired => f.write_str(
                "negative weights need components that partition the outcome space under common treatments",
            ),
            Error::UnitConflict(v) => {
                write!(f, "unit variable {v} is also an outcome, treatment or evidence variable")
            }
            Error::TreatmentOnRoot(v) => write!(f, "treatment variable {v} is an exogenous root"),
            Error::ContradictoryEvents(v) => write!(f, "contradictory events on variable {v}"),
            Error::EmptyObjective => f.write_str("objective has no components"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Parse { line, message } => write!(f, "line {line}: {message}"),
        }
    }
}

impl core::error::Error for Error {}
