//! Problem instances: agent count, prior, signal precisions and the two
//! thresholds of doubt, with validation of the three standing assumptions
//! (threshold ordering, no partisans, no indifferences).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative tolerance for the no-indifference check (assumption 3).
pub const INDIFFERENCE_TOL: f64 = 1e-9;

/// The two states of the world. Alternative `A` pays off in `Alpha`,
/// alternative `B` in `Beta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum State {
    Alpha,
    Beta,
}

/// Raw payoff quadruple for alternative `A`; payoffs from `B` are
/// normalized to zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Payoffs {
    pub v_alpha: f64,
    pub v_beta: f64,
    pub u_alpha: f64,
    pub u_beta: f64,
}

impl Payoffs {
    pub fn principal(&self, state: State) -> f64 {
        match state {
            State::Alpha => self.v_alpha,
            State::Beta => self.v_beta,
        }
    }

    pub fn agent(&self, state: State) -> f64 {
        match state {
            State::Alpha => self.u_alpha,
            State::Beta => self.u_beta,
        }
    }
}

/// A validated problem instance. Immutable after construction; cheap to
/// clone and safe to share across threads.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    n_plus_1: usize,
    prior_alpha: f64,
    p_alpha: f64,
    p_beta: f64,
    t_p: f64,
    t_j: f64,
    payoffs: Option<Payoffs>,
}

/// Outcome of checking the three standing assumptions on a candidate
/// instance. All three hold iff construction of [`ModelParams`] succeeds.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub a1_ordering: bool,
    pub a2_no_partisans: bool,
    pub a3_no_indifference: bool,
    pub messages: Vec<String>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.a1_ordering && self.a2_no_partisans && self.a3_no_indifference
    }
}

impl std::fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.all_pass() {
            write!(f, "all assumptions hold")
        } else {
            write!(f, "{}", self.messages.join("; "))
        }
    }
}

/// Unvalidated instance description, mirroring the JSON interface.
/// Exactly one of the threshold pair or the payoff quadruple must be
/// present.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub agents: usize,
    pub prior_alpha: f64,
    pub p_alpha: f64,
    pub p_beta: f64,
    #[serde(rename = "t_P", default, skip_serializing_if = "Option::is_none")]
    pub t_p: Option<f64>,
    #[serde(rename = "t_J", default, skip_serializing_if = "Option::is_none")]
    pub t_j: Option<f64>,
    #[serde(rename = "V_alpha", default, skip_serializing_if = "Option::is_none")]
    pub v_alpha: Option<f64>,
    #[serde(rename = "V_beta", default, skip_serializing_if = "Option::is_none")]
    pub v_beta: Option<f64>,
    #[serde(rename = "U_alpha", default, skip_serializing_if = "Option::is_none")]
    pub u_alpha: Option<f64>,
    #[serde(rename = "U_beta", default, skip_serializing_if = "Option::is_none")]
    pub u_beta: Option<f64>,
}

impl ParamsSpec {
    pub fn from_thresholds(
        agents: usize,
        prior_alpha: f64,
        p_alpha: f64,
        p_beta: f64,
        t_p: f64,
        t_j: f64,
    ) -> Self {
        ParamsSpec {
            agents,
            prior_alpha,
            p_alpha,
            p_beta,
            t_p: Some(t_p),
            t_j: Some(t_j),
            v_alpha: None,
            v_beta: None,
            u_alpha: None,
            u_beta: None,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_payoffs(
        agents: usize,
        prior_alpha: f64,
        p_alpha: f64,
        p_beta: f64,
        v_alpha: f64,
        v_beta: f64,
        u_alpha: f64,
        u_beta: f64,
    ) -> Self {
        ParamsSpec {
            agents,
            prior_alpha,
            p_alpha,
            p_beta,
            t_p: None,
            t_j: None,
            v_alpha: Some(v_alpha),
            v_beta: Some(v_beta),
            u_alpha: Some(u_alpha),
            u_beta: Some(u_beta),
        }
    }

    fn variant(&self) -> Result<(f64, f64, Option<Payoffs>)> {
        let thresholds = (self.t_p, self.t_j);
        let payoffs = (self.v_alpha, self.v_beta, self.u_alpha, self.u_beta);
        match (thresholds, payoffs) {
            ((Some(t_p), Some(t_j)), (None, None, None, None)) => Ok((t_p, t_j, None)),
            ((None, None), (Some(v_alpha), Some(v_beta), Some(u_alpha), Some(u_beta))) => {
                if !(v_alpha > 0.0 && 0.0 > v_beta && u_alpha > 0.0 && 0.0 > u_beta) {
                    return Err(Error::PayoffSign);
                }
                let payoffs = Payoffs {
                    v_alpha,
                    v_beta,
                    u_alpha,
                    u_beta,
                };
                Ok((-v_beta / v_alpha, -u_beta / u_alpha, Some(payoffs)))
            }
            _ => Err(Error::ParamsVariant),
        }
    }

    /// Builds a validated [`ModelParams`], rejecting domain and assumption
    /// violations.
    pub fn build(&self) -> Result<ModelParams> {
        let (t_p, t_j, payoffs) = self.variant()?;
        ModelParams::with_payoffs(
            self.agents,
            self.prior_alpha,
            self.p_alpha,
            self.p_beta,
            t_p,
            t_j,
            payoffs,
        )
    }
}

/// Checks the three standing assumptions on a candidate instance without
/// constructing it. Report-valued: never errors. Domain problems (bad
/// probabilities, payoff signs, ...) are reported with all flags false.
pub fn validate_assumptions(spec: &ParamsSpec) -> AssumptionReport {
    let (t_p, t_j) = match spec.variant() {
        Ok((t_p, t_j, _)) => (t_p, t_j),
        Err(e) => {
            return AssumptionReport {
                a1_ordering: false,
                a2_no_partisans: false,
                a3_no_indifference: false,
                messages: vec![e.to_string()],
            }
        }
    };
    if let Err(e) = check_domain(spec.agents, spec.prior_alpha, spec.p_alpha, spec.p_beta, t_p, t_j)
    {
        return AssumptionReport {
            a1_ordering: false,
            a2_no_partisans: false,
            a3_no_indifference: false,
            messages: vec![e.to_string()],
        };
    }
    assumption_report(spec.agents, spec.prior_alpha, spec.p_alpha, spec.p_beta, t_p, t_j)
}

fn check_domain(
    n_plus_1: usize,
    prior_alpha: f64,
    p_alpha: f64,
    p_beta: f64,
    t_p: f64,
    t_j: f64,
) -> Result<()> {
    if n_plus_1 < 2 {
        return Err(Error::AgentCount(n_plus_1));
    }
    for (name, value) in [
        ("prior_alpha", prior_alpha),
        ("p_alpha", p_alpha),
        ("p_beta", p_beta),
    ] {
        if !(value > 0.0 && value < 1.0) || !value.is_finite() {
            return Err(Error::ProbabilityRange { name, value });
        }
    }
    if p_alpha <= p_beta {
        return Err(Error::UninformativeSignals { p_alpha, p_beta });
    }
    for (name, value) in [("t_P", t_p), ("t_J", t_j)] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::ThresholdRange { name, value });
        }
    }
    Ok(())
}

fn log_likelihood_raw(
    n_plus_1: usize,
    prior_alpha: f64,
    p_alpha: f64,
    p_beta: f64,
    k: f64,
) -> f64 {
    let prior_term = (prior_alpha / (1.0 - prior_alpha)).ln();
    let ratio_a = (p_alpha / p_beta).ln();
    let ratio_b = ((1.0 - p_alpha) / (1.0 - p_beta)).ln();
    prior_term + k * ratio_a + (n_plus_1 as f64 - k) * ratio_b
}

fn preimage_raw(n_plus_1: usize, prior_alpha: f64, p_alpha: f64, p_beta: f64, t: f64) -> f64 {
    let prior_term = (prior_alpha / (1.0 - prior_alpha)).ln();
    let ratio_a = (p_alpha / p_beta).ln();
    let ratio_b = ((1.0 - p_alpha) / (1.0 - p_beta)).ln();
    (t.ln() - prior_term - n_plus_1 as f64 * ratio_b) / (ratio_a - ratio_b)
}

/// Indifference check for one threshold: rejects values within
/// [`INDIFFERENCE_TOL`] (relative) of some likelihood value `L(k)`, and
/// values whose real preimage under `L` sits within the same tolerance of
/// an integer.
fn indifferent_at(
    n_plus_1: usize,
    prior_alpha: f64,
    p_alpha: f64,
    p_beta: f64,
    t: f64,
) -> Option<String> {
    let log_t = t.ln();
    for k in 0..=n_plus_1 {
        let log_l = log_likelihood_raw(n_plus_1, prior_alpha, p_alpha, p_beta, k as f64);
        if (log_t - log_l).abs() <= INDIFFERENCE_TOL {
            return Some(format!("threshold {t} coincides with L({k})"));
        }
    }
    let xi = preimage_raw(n_plus_1, prior_alpha, p_alpha, p_beta, t);
    if (xi - xi.round()).abs() <= INDIFFERENCE_TOL {
        return Some(format!(
            "threshold {t} has likelihood preimage {xi} within tolerance of an integer"
        ));
    }
    None
}

fn assumption_report(
    n_plus_1: usize,
    prior_alpha: f64,
    p_alpha: f64,
    p_beta: f64,
    t_p: f64,
    t_j: f64,
) -> AssumptionReport {
    let mut messages = Vec::new();

    let a1 = t_p >= t_j;
    if !a1 {
        messages.push(format!(
            "assumption 1 violated: t_P ({t_p}) must be at least t_J ({t_j})"
        ));
    }

    let log_l0 = log_likelihood_raw(n_plus_1, prior_alpha, p_alpha, p_beta, 0.0);
    let log_ltop = log_likelihood_raw(n_plus_1, prior_alpha, p_alpha, p_beta, n_plus_1 as f64);
    let mut a2 = true;
    if !(t_j.ln() > log_l0) {
        a2 = false;
        messages.push(format!(
            "assumption 2 violated: t_J ({t_j}) must exceed L(0) ({})",
            log_l0.exp()
        ));
    }
    if !(t_p.ln() < log_ltop) {
        a2 = false;
        messages.push(format!(
            "assumption 2 violated: t_P ({t_p}) must be below L({n_plus_1}) ({})",
            log_ltop.exp()
        ));
    }

    let mut a3 = true;
    for (name, t) in [("t_J", t_j), ("t_P", t_p)] {
        if let Some(detail) = indifferent_at(n_plus_1, prior_alpha, p_alpha, p_beta, t) {
            a3 = false;
            messages.push(format!("assumption 3 violated for {name}: {detail}"));
        }
    }

    AssumptionReport {
        a1_ordering: a1,
        a2_no_partisans: a2,
        a3_no_indifference: a3,
        messages,
    }
}

impl ModelParams {
    /// Constructs a validated instance from thresholds of doubt.
    pub fn new(
        n_plus_1: usize,
        prior_alpha: f64,
        p_alpha: f64,
        p_beta: f64,
        t_p: f64,
        t_j: f64,
    ) -> Result<Self> {
        Self::with_payoffs(n_plus_1, prior_alpha, p_alpha, p_beta, t_p, t_j, None)
    }

    /// Constructs a validated instance from a payoff quadruple. The
    /// thresholds of doubt are the canonical internal form
    /// (`t_P = -V_beta/V_alpha`, `t_J = -U_beta/U_alpha`); the raw payoff
    /// scale is retained for payoff-unit reporting.
    #[allow(clippy::too_many_arguments)]
    pub fn from_payoffs(
        n_plus_1: usize,
        prior_alpha: f64,
        p_alpha: f64,
        p_beta: f64,
        v_alpha: f64,
        v_beta: f64,
        u_alpha: f64,
        u_beta: f64,
    ) -> Result<Self> {
        if !(v_alpha > 0.0 && 0.0 > v_beta && u_alpha > 0.0 && 0.0 > u_beta) {
            return Err(Error::PayoffSign);
        }
        let payoffs = Payoffs {
            v_alpha,
            v_beta,
            u_alpha,
            u_beta,
        };
        Self::with_payoffs(
            n_plus_1,
            prior_alpha,
            p_alpha,
            p_beta,
            -v_beta / v_alpha,
            -u_beta / u_alpha,
            Some(payoffs),
        )
    }

    fn with_payoffs(
        n_plus_1: usize,
        prior_alpha: f64,
        p_alpha: f64,
        p_beta: f64,
        t_p: f64,
        t_j: f64,
        payoffs: Option<Payoffs>,
    ) -> Result<Self> {
        check_domain(n_plus_1, prior_alpha, p_alpha, p_beta, t_p, t_j)?;
        let report = assumption_report(n_plus_1, prior_alpha, p_alpha, p_beta, t_p, t_j);
        if !report.all_pass() {
            return Err(Error::AssumptionViolated(report));
        }
        Ok(ModelParams {
            n_plus_1,
            prior_alpha,
            p_alpha,
            p_beta,
            t_p,
            t_j,
            payoffs,
        })
    }

    /// Number of agents (`n+1`).
    pub fn n_plus_1(&self) -> usize {
        self.n_plus_1
    }

    /// Number of *other* agents from one agent's perspective (`n`).
    pub fn n(&self) -> usize {
        self.n_plus_1 - 1
    }

    pub fn prior_alpha(&self) -> f64 {
        self.prior_alpha
    }

    pub fn prior(&self, state: State) -> f64 {
        match state {
            State::Alpha => self.prior_alpha,
            State::Beta => 1.0 - self.prior_alpha,
        }
    }

    pub fn p_alpha(&self) -> f64 {
        self.p_alpha
    }

    pub fn p_beta(&self) -> f64 {
        self.p_beta
    }

    /// Probability of an `a`-signal in the given state.
    pub fn signal_prob(&self, state: State) -> f64 {
        match state {
            State::Alpha => self.p_alpha,
            State::Beta => self.p_beta,
        }
    }

    pub fn t_p(&self) -> f64 {
        self.t_p
    }

    pub fn t_j(&self) -> f64 {
        self.t_j
    }

    pub fn payoffs(&self) -> Option<&Payoffs> {
        self.payoffs.as_ref()
    }

    /// The stored payoff quadruple, or the normalized one
    /// (`V_alpha = U_alpha = 1`) implied by the thresholds.
    pub fn effective_payoffs(&self) -> Payoffs {
        self.payoffs.unwrap_or(Payoffs {
            v_alpha: 1.0,
            v_beta: -self.t_p,
            u_alpha: 1.0,
            u_beta: -self.t_j,
        })
    }

    /// Natural log of the relative likelihood of state alpha after `k`
    /// `a`-signals. Defined for every integer `k`.
    pub fn log_likelihood(&self, k: i64) -> f64 {
        self.log_likelihood_real(k as f64)
    }

    /// `log L` extended to real arguments.
    pub fn log_likelihood_real(&self, k: f64) -> f64 {
        log_likelihood_raw(self.n_plus_1, self.prior_alpha, self.p_alpha, self.p_beta, k)
    }

    /// Relative likelihood `L(k)` of state alpha after `k` `a`-signals,
    /// computed in log space and exponentiated. Strictly increasing in `k`.
    pub fn likelihood(&self, k: i64) -> f64 {
        self.log_likelihood(k).exp()
    }

    /// The real `xi` with `L(xi) = t`.
    pub fn likelihood_preimage(&self, t: f64) -> f64 {
        preimage_raw(self.n_plus_1, self.prior_alpha, self.p_alpha, self.p_beta, t)
    }

    /// Minimal tally `k` with `L(k) > threshold`. The threshold must lie
    /// strictly between `L(0)` and `L(n+1)`; the result is in `1..=n+1`.
    pub fn cutoff(&self, threshold: f64) -> Result<usize> {
        let log_t = threshold.ln();
        let lo = self.log_likelihood(0);
        let hi = self.log_likelihood(self.n_plus_1 as i64);
        if !(threshold > 0.0) || !(log_t > lo) || !(log_t < hi) {
            return Err(Error::PartisanThreshold {
                threshold,
                lo: lo.exp(),
                hi: hi.exp(),
            });
        }
        for k in 1..=self.n_plus_1 {
            if self.log_likelihood(k as i64) > log_t {
                return Ok(k);
            }
        }
        unreachable!("log L(n+1) exceeds the threshold, so the scan terminates")
    }

    /// The agents' preferred cutoff (minimal tally at which agents prefer A).
    pub fn agent_cutoff(&self) -> usize {
        self.cutoff(self.t_j).expect("assumption 2 keeps t_J inside (L(0), L(n+1))")
    }

    /// The principal's preferred cutoff.
    pub fn principal_cutoff(&self) -> usize {
        self.cutoff(self.t_p).expect("assumption 2 keeps t_P inside (L(0), L(n+1))")
    }

    /// True iff agents and principal disagree over the preferred decision
    /// for some signal profile, i.e. the agents' cutoff is strictly below
    /// the principal's.
    pub fn conflict_of_interest(&self) -> bool {
        self.agent_cutoff() < self.principal_cutoff()
    }

    /// The equivalent threshold-form spec (payoff information dropped).
    pub fn to_spec(&self) -> ParamsSpec {
        match self.payoffs {
            Some(p) => ParamsSpec::from_payoffs(
                self.n_plus_1,
                self.prior_alpha,
                self.p_alpha,
                self.p_beta,
                p.v_alpha,
                p.v_beta,
                p.u_alpha,
                p.u_beta,
            ),
            None => ParamsSpec::from_thresholds(
                self.n_plus_1,
                self.prior_alpha,
                self.p_alpha,
                self.p_beta,
                self.t_p,
                self.t_j,
            ),
        }
    }
}
