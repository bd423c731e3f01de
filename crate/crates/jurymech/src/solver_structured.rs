//! Structural solver: enumerates candidate interval mechanisms whose
//! b-signal constraint binds through one fractional boundary entry, plus
//! all-integral intervals and the zero mechanism, and picks the best
//! candidate that also passes the a-signal constraint. Exposes the
//! Lagrangian virtual utility for verification; the solve itself never
//! searches over multipliers.

use num_traits::Zero;

use crate::mechanisms::{self, LpInstance, VotingMechanism};
use crate::model::ModelParams;
use crate::rational::{build_lp_exact, ExactParams, Rat};
use crate::simplex::LpScalar;
use crate::solver_lp::{fractional_indices, ExactSolveResult, SolveResult, SolveStatus};

/// Which interval boundary carries the fractional probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Lower,
    Upper,
}

/// The Lagrangian objective `v(k) + mu * [b(k) - b(k-1)]`, its rescaled
/// form `phi` (divided through by the beta-state binomial mass, evaluated
/// via the closed-form algebra as an independent route), and the expected
/// tally counts per state.
#[derive(Clone, Debug)]
pub struct VirtualUtility {
    pub mu: f64,
    pub values: Vec<f64>,
    pub phi: Vec<f64>,
    pub m_alpha: f64,
    pub m_beta: f64,
}

/// Evaluates the virtual utility at multiplier `mu >= 0`.
pub fn virtual_utility(params: &ModelParams, mu: f64) -> VirtualUtility {
    assert!(mu >= 0.0, "multiplier must be nonnegative");
    let lp = mechanisms::build_lp(params);
    let n1 = params.n_plus_1();
    let m_alpha = params.p_alpha() * n1 as f64;
    let m_beta = params.p_beta() * n1 as f64;
    let values: Vec<f64> = (0..=n1).map(|k| lp.v[k] + mu * lp.db[k]).collect();
    let phi = (0..=n1 as i64)
        .map(|k| {
            let l = params.likelihood(k);
            (1.0 + mu * (1.0 - k as f64 / m_alpha)) * l
                - (params.t_p() + mu * params.t_j() * (1.0 - k as f64 / m_beta))
        })
        .collect();
    VirtualUtility {
        mu,
        values,
        phi,
        m_alpha,
        m_beta,
    }
}

/// True iff no strictly negative entry separates two strictly positive
/// ones, i.e. the nonnegative region is a contiguous tally range.
pub fn sign_pattern_is_interval(values: &[f64], tol: f64) -> bool {
    let first = values.iter().position(|&v| v > tol);
    let last = values.iter().rposition(|&v| v > tol);
    match (first, last) {
        (Some(first), Some(last)) => values[first..=last].iter().all(|&v| v >= -tol),
        _ => true,
    }
}

/// Solves the b-binding equation for one fractional boundary probability of
/// the interval `[k_lo, k_hi]`. Returns `None` when the equation has no
/// solution in `(0, 1]` or its divisor vanishes.
pub fn boundary_probability(
    params: &ModelParams,
    k_lo: usize,
    k_hi: usize,
    which: Boundary,
) -> Option<f64> {
    let lp = mechanisms::build_lp(params);
    boundary_generic(&normalized(&lp.b), k_lo, k_hi, which)
}

fn boundary_generic<S: LpScalar>(b: &[S], k_lo: usize, k_hi: usize, which: Boundary) -> Option<S> {
    debug_assert!(k_lo >= 1 && k_lo <= k_hi && k_hi < b.len());
    let (numerator, divisor) = match which {
        // b(k_hi) = x b(k_lo - 1) + (1 - x) b(k_lo)
        Boundary::Lower => (
            b[k_hi].clone() - b[k_lo].clone(),
            b[k_lo - 1].clone() - b[k_lo].clone(),
        ),
        // x b(k_hi) + (1 - x) b(k_hi - 1) = b(k_lo - 1)
        Boundary::Upper => (
            b[k_lo - 1].clone() - b[k_hi - 1].clone(),
            b[k_hi].clone() - b[k_hi - 1].clone(),
        ),
    };
    if divisor.abs() <= S::tiny() {
        return None;
    }
    let x = numerator / divisor;
    if x > S::tiny() && x <= S::one() {
        Some(x)
    } else {
        None
    }
}

struct Candidate<S> {
    x: Vec<S>,
    objective: S,
}

fn interval_candidate<S: LpScalar>(
    len: usize,
    k_lo: usize,
    k_hi: usize,
    lower_prob: S,
    upper_prob: S,
) -> Vec<S> {
    let mut x = vec![S::zero(); len];
    for (k, xk) in x.iter_mut().enumerate() {
        if k > k_lo && k < k_hi {
            *xk = S::one();
        }
    }
    x[k_lo] = lower_prob;
    if k_hi > k_lo {
        x[k_hi] = upper_prob;
    }
    x
}

fn dot<S: LpScalar>(c: &[S], x: &[S]) -> S {
    c.iter()
        .zip(x)
        .map(|(ci, xi)| ci.clone() * xi.clone())
        .fold(S::zero(), |acc, term| acc + term)
}

/// Rescales a vector to unit infinity norm so fixed tolerances act
/// relative to the row's magnitude. Exact in rational arithmetic.
fn normalized<S: LpScalar>(row: &[S]) -> Vec<S> {
    let norm = row
        .iter()
        .fold(S::zero(), |acc, v| if v.abs() > acc { v.abs() } else { acc });
    if norm.is_zero() {
        row.to_vec()
    } else {
        row.iter().map(|v| v.clone() / norm.clone()).collect()
    }
}

/// Candidate sweep under a conflict of interest. Lower boundaries range
/// over `[k_J, k_P]`, upper boundaries over `[k_P, n+1]`; for each pair the
/// two one-fractional b-binding variants and the all-integral interval are
/// tried, and anything violating a constraint or leaving the box is
/// dropped. Returns the winner, a tie flag, and a distinct co-optimal
/// mechanism when there is one.
fn enumerate_candidates<S: LpScalar>(
    lp: &LpInstance<S>,
    k_j: usize,
    k_p: usize,
) -> (Vec<S>, S, SolveStatus, Option<Vec<S>>) {
    let len = lp.v.len();
    let n1 = len - 1;
    let da = normalized(&lp.da);
    let db = normalized(&lp.db);
    let b = normalized(&lp.b);
    let mut candidates: Vec<Candidate<S>> = Vec::new();
    let mut push = |x: Vec<S>| {
        if dot(&da, &x) > S::feas_tol() {
            return;
        }
        if dot(&db, &x) < -S::feas_tol() {
            return;
        }
        let objective = dot(&lp.v, &x);
        candidates.push(Candidate { x, objective });
    };

    push(vec![S::zero(); len]);
    for k_lo in k_j..=k_p {
        for k_hi in k_p..=n1 {
            push(interval_candidate(len, k_lo, k_hi, S::one(), S::one()));
            if let Some(frac) = boundary_generic(&b, k_lo, k_hi, Boundary::Lower) {
                push(interval_candidate(len, k_lo, k_hi, frac, S::one()));
            }
            if k_hi > k_lo {
                if let Some(frac) = boundary_generic(&b, k_lo, k_hi, Boundary::Upper) {
                    push(interval_candidate(len, k_lo, k_hi, S::one(), frac));
                }
            }
        }
    }

    let best = candidates
        .iter()
        .map(|c| c.objective.clone())
        .fold(None::<S>, |acc, obj| match acc {
            Some(best) if best >= obj => Some(best),
            _ => Some(obj),
        })
        .expect("the zero mechanism is always a candidate");

    let tie_gap = if S::tiny() > S::zero() {
        // Float: treat gaps below 1e-10 as exact ties.
        S::opt_tol()
    } else {
        S::zero()
    };
    let mut winner: Option<Vec<S>> = None;
    let mut alternate: Option<Vec<S>> = None;
    for c in &candidates {
        if c.objective.clone() < best.clone() - tie_gap.clone() {
            continue;
        }
        match &winner {
            None => winner = Some(c.x.clone()),
            Some(w) => {
                let same = w
                    .iter()
                    .zip(&c.x)
                    .all(|(a, b)| (a.clone() - b.clone()).abs() <= S::feas_tol());
                if !same && alternate.is_none() {
                    alternate = Some(c.x.clone());
                }
            }
        }
    }
    let winner = winner.expect("a best candidate exists");
    let status = if alternate.is_some() {
        SolveStatus::DegenerateTie
    } else {
        SolveStatus::Optimal
    };
    (winner, best, status, alternate)
}

fn solve_generic<S: LpScalar>(
    lp: &LpInstance<S>,
    k_j: usize,
    k_p: usize,
) -> (Vec<S>, S, SolveStatus, Option<Vec<S>>) {
    if k_j == k_p {
        // First-best is incentive compatible without a conflict.
        let x = interval_candidate(lp.v.len(), k_p, lp.v.len() - 1, S::one(), S::one());
        let objective = dot(&lp.v, &x);
        return (x, objective, SolveStatus::Optimal, None);
    }
    enumerate_candidates(lp, k_j, k_p)
}

/// Structural solve in float arithmetic.
pub fn solve(params: &ModelParams) -> SolveResult {
    let lp = mechanisms::build_lp(params);
    let (x, objective, status, alternate) =
        solve_generic(&lp, params.agent_cutoff(), params.principal_cutoff());
    let x = VotingMechanism::new(x).expect("candidates live in the box");
    let report = mechanisms::ic_report_from_lp(&lp, x.probs());
    SolveResult {
        fractional_indices: fractional_indices(x.probs()),
        binding_a: report.verdict_a == mechanisms::Verdict::Binding,
        binding_b: report.verdict_b == mechanisms::Verdict::Binding,
        objective_v_units: objective,
        status,
        alternate: alternate
            .map(|alt| VotingMechanism::new(alt).expect("candidates live in the box")),
        x,
    }
}

/// Structural solve in exact rational arithmetic.
pub fn solve_exact(params: &ExactParams) -> ExactSolveResult {
    let lp = build_lp_exact(params);
    let (x, objective, status, alternate) =
        solve_generic(&lp, params.agent_cutoff(), params.principal_cutoff());
    let dot_exact = |c: &[Rat]| -> Rat { dot(c, &x) };
    ExactSolveResult {
        binding_a: dot_exact(&lp.da).is_zero(),
        binding_b: dot_exact(&lp.db).is_zero(),
        objective,
        status,
        alternate,
        x,
    }
}

/// Verifies, for a candidate interval mechanism with the b-signal
/// constraint binding and one boundary pinned at one, that the a-signal
/// constraint holds — the structural guarantee the solver leans on — and
/// cross-checks it by direct evaluation. Returns false when the candidate
/// does not match the guarded shape or the direct check disagrees.
pub fn lemma_interval_ic_a_check(params: &ModelParams, candidate: &VotingMechanism) -> bool {
    let Ok(report) = mechanisms::ic_report(params, candidate) else {
        return false;
    };
    if report.ic_b_lhs.abs() > 1e-9 {
        return false;
    }
    let shape = mechanisms::classify(candidate, 1e-9);
    let mechanisms::Shape::Interval {
        k_lo,
        k_hi: _,
        x_lo,
        x_hi,
    } = shape
    else {
        return false;
    };
    let k_j = params.agent_cutoff();
    let guarded = (x_lo == 1.0 && k_lo > k_j) || (x_hi == 1.0 && k_lo >= k_j);
    guarded && report.ic_a_lhs <= 1e-9
}
