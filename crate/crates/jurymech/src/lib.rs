//! Optimal voting mechanisms for committees of biased experts.
//!
//! A principal aggregates binary signals from `n+1` agents who share a lower
//! threshold of doubt than the principal (the classic jury setting with a
//! conflict of interest). This crate computes the principal's optimal
//! incentive-compatible voting mechanism along two independent routes — a
//! bounded-variable simplex on the underlying linear program
//! ([`solver_lp`]) and a structural enumeration of candidate interval
//! mechanisms ([`solver_structured`]) — and provides incentive diagnostics,
//! a closed-form non-monotonicity certificate ([`theory`]), and an exact
//! game-layer evaluator with a seeded Monte Carlo simulator ([`game`]).
//!
//! Both solvers run in `f64` or in exact rational arithmetic (see
//! [`rational`]); the two routes cross-validate each other on every
//! instance.

pub mod game;
pub mod jsonfmt;
pub mod mechanisms;
pub mod model;
pub mod rational;
pub mod simplex;
pub mod solver_lp;
pub mod solver_structured;
pub mod theory;

#[cfg(test)]
pub(crate) mod testutil;

pub use game::{ReportingStrategy, SimConfig, SimReport};
pub use mechanisms::{ICReport, LpInstance, Shape, Verdict, VotingMechanism};
pub use model::{AssumptionReport, ModelParams, ParamsSpec, Payoffs, State};
pub use solver_lp::{ArithMode, ExactSolveResult, SolveResult, SolveStatus};
pub use theory::{LemmaCheck, LemmaStatus, TheoryReport};

/// Errors surfaced by the library.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("agent count must be at least 2, got {0}")]
    AgentCount(usize),
    #[error("{name} must lie strictly inside (0,1), got {value}")]
    ProbabilityRange { name: &'static str, value: f64 },
    #[error("signals must be informative: p_alpha ({p_alpha}) must exceed p_beta ({p_beta})")]
    UninformativeSignals { p_alpha: f64, p_beta: f64 },
    #[error("{name} must be a positive threshold of doubt, got {value}")]
    ThresholdRange { name: &'static str, value: f64 },
    #[error("payoff signs must satisfy V_alpha > 0 > V_beta and U_alpha > 0 > U_beta")]
    PayoffSign,
    #[error("exactly one of thresholds (t_P, t_J) or payoffs (V_alpha, V_beta, U_alpha, U_beta) must be given")]
    ParamsVariant,
    #[error("{0}")]
    AssumptionViolated(AssumptionReport),
    #[error("threshold {threshold} lies outside the informative likelihood range ({lo}, {hi})")]
    PartisanThreshold { threshold: f64, lo: f64, hi: f64 },
    #[error("mechanism has {got} entries but the instance needs {expected}")]
    MechanismLength { expected: usize, got: usize },
    #[error("choice probability at tally {index} is {value}, outside [0,1]")]
    ProbabilityEntry { index: usize, value: f64 },
    #[error("direct mechanism table has {got} profiles but {expected} are required")]
    ProfileTable { expected: usize, got: usize },
    #[error("direct mechanisms support at most {max} agents, got {got}")]
    TooManyAgents { max: usize, got: usize },
    #[error("profile key '{0}' is not a string over {{a,b}} of the expected length")]
    ProfileKey(String),
    #[error("operation requires a conflict of interest, but agents and principal share the same cutoff")]
    NoConflict,
    #[error("deviation step too large; maximal admissible delta is {max_delta}")]
    DeltaTooLarge { max_delta: f64 },
    #[error("trial count must be at least 1")]
    TrialCount,
    #[error("linear program: {0}")]
    Simplex(#[from] simplex::SimplexError),
    #[error("'{0}' is not a valid rational (expected an integer or 'p/q')")]
    RationalParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
