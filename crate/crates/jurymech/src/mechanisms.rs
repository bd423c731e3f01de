//! Voting mechanisms, the linear-program coefficients they are judged by,
//! incentive diagnostics, structural classification, and symmetrization of
//! direct mechanisms into voting mechanisms.

use serde::{Deserialize, Serialize};

use crate::model::{ModelParams, State};
use crate::{Error, Result};

/// Absolute tolerance separating strict, binding and violated incentive
/// constraints, and the default snapping tolerance for structure checks.
pub const IC_TOL: f64 = 1e-9;

/// A voting mechanism: choice probabilities for alternative `A`, indexed by
/// the tally of `a`-votes (`0..=n+1`, so `n+2` entries).
#[derive(Clone, Debug, PartialEq)]
pub struct VotingMechanism {
    probs: Vec<f64>,
}

impl VotingMechanism {
    /// Wraps a probability vector; entries may stray outside `[0, 1]` by at
    /// most `1e-12` (solver round-off) and are clamped.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 3 {
            return Err(Error::MechanismLength {
                expected: 3,
                got: probs.len(),
            });
        }
        for (index, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() || *p < -1e-12 || *p > 1.0 + 1e-12 {
                return Err(Error::ProbabilityEntry {
                    index,
                    value: *p,
                });
            }
            *p = p.clamp(0.0, 1.0);
        }
        Ok(VotingMechanism { probs })
    }

    /// The all-zeros mechanism (never choose `A`).
    pub fn zeros(n_plus_1: usize) -> Self {
        VotingMechanism {
            probs: vec![0.0; n_plus_1 + 1],
        }
    }

    /// The all-ones mechanism (always choose `A`).
    pub fn ones(n_plus_1: usize) -> Self {
        VotingMechanism {
            probs: vec![1.0; n_plus_1 + 1],
        }
    }

    /// Single-cutoff rule: choose `A` iff the tally reaches `cutoff`.
    pub fn cutoff_rule(n_plus_1: usize, cutoff: usize) -> Self {
        let probs = (0..=n_plus_1).map(|k| f64::from(k >= cutoff)).collect();
        VotingMechanism { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_plus_1(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn get(&self, k: usize) -> f64 {
        self.probs[k]
    }

    fn check_len(&self, params: &ModelParams) -> Result<()> {
        if self.probs.len() != params.n_plus_1() + 1 {
            return Err(Error::MechanismLength {
                expected: params.n_plus_1() + 1,
                got: self.probs.len(),
            });
        }
        Ok(())
    }
}

/// JSON form of a voting mechanism: `{"agents": n+1, "x": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismJson {
    pub agents: usize,
    pub x: Vec<f64>,
}

impl MechanismJson {
    pub fn to_mechanism(&self) -> Result<VotingMechanism> {
        if self.x.len() != self.agents + 1 {
            return Err(Error::MechanismLength {
                expected: self.agents + 1,
                got: self.x.len(),
            });
        }
        VotingMechanism::new(self.x.clone())
    }

    pub fn from_mechanism(m: &VotingMechanism) -> Self {
        MechanismJson {
            agents: m.n_plus_1(),
            x: m.probs().to_vec(),
        }
    }
}

/// Structural classification of a voting mechanism after snapping entries
/// within a tolerance of 0 or 1.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Identically zero.
    Zero,
    /// Support is a consecutive tally range with probability one on the
    /// interior and positive probability on the two boundary tallies.
    Interval {
        k_lo: usize,
        k_hi: usize,
        x_lo: f64,
        x_hi: f64,
    },
    /// Anything else.
    NotInterval,
}

impl Shape {
    pub fn is_interval(&self) -> bool {
        matches!(self, Shape::Interval { .. })
    }
}

/// Coefficients of the instance's linear program: objective `v`, constraint
/// levels `a` and `b`, and their first differences `da`, `db` (index `k`
/// holds the coefficient of `x(k)`). Truthful reporting is worthwhile after
/// an `a`-signal iff `da . x <= 0` and after a `b`-signal iff `db . x >= 0`.
#[derive(Clone, Debug)]
pub struct LpInstance<S = f64> {
    pub v: Vec<S>,
    pub a: Vec<S>,
    pub b: Vec<S>,
    pub da: Vec<S>,
    pub db: Vec<S>,
}

/// Incentive-compatibility report for one mechanism: the two constraint
/// left-hand sides and their verdicts at tolerance [`IC_TOL`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ICReport {
    /// `sum_k [a(k) - a(k-1)] x(k)`; satisfied iff `<= 0`.
    pub ic_a_lhs: f64,
    /// `sum_k [b(k) - b(k-1)] x(k)`; satisfied iff `>= 0`.
    pub ic_b_lhs: f64,
    pub verdict_a: Verdict,
    pub verdict_b: Verdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Strict,
    Binding,
    Violated,
}

impl Verdict {
    pub fn satisfied(self) -> bool {
        self != Verdict::Violated
    }
}

impl ICReport {
    pub fn both_satisfied(&self) -> bool {
        self.verdict_a.satisfied() && self.verdict_b.satisfied()
    }
}

/// Principal's value of a mechanism, in objective units and (when the
/// instance was built from a payoff quadruple) in raw payoff units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrincipalPayoff {
    /// `sum_k v(k) x(k)`.
    pub v_units: f64,
    /// `Pr(beta) * V_alpha * v_units`, present iff payoffs were supplied.
    pub payoff_units: Option<f64>,
}

/// Binomial pmf `C(n,k) p^k (1-p)^(n-k)`, evaluated in log space, with the
/// convention that out-of-range tallies have zero mass. Degenerate `p`
/// (0 or 1) yields the corresponding point mass.
pub fn binom_pmf(p: f64, k: i64, n: usize) -> f64 {
    if k < 0 || k as usize > n {
        return 0.0;
    }
    if p <= 0.0 {
        return f64::from(k == 0);
    }
    if p >= 1.0 {
        return f64::from(k as usize == n);
    }
    let k = k as usize;
    (ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

fn ln_choose(n: usize, k: usize) -> f64 {
    let lnf = ln_factorials(n);
    lnf[n] - lnf[k] - lnf[n - k]
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut lnf = vec![0.0; n + 1];
    for i in 2..=n {
        lnf[i] = lnf[i - 1] + (i as f64).ln();
    }
    lnf
}

/// Builds the instance's LP coefficients. `v`, `a` and `b` are assembled
/// from log-space binomial masses under both states, which keeps every term
/// bounded by the prior ratio and the thresholds even when the likelihood
/// ratio itself would overflow; the difference vectors are formed afterward.
pub fn build_lp(params: &ModelParams) -> LpInstance {
    let n1 = params.n_plus_1();
    let n = n1 - 1;
    let pa = params.p_alpha();
    let pb = params.p_beta();
    let prior_ratio = params.prior_alpha() / (1.0 - params.prior_alpha());

    let mut v = Vec::with_capacity(n1 + 1);
    let mut a = Vec::with_capacity(n1 + 1);
    let mut b = Vec::with_capacity(n1 + 1);
    for k in 0..=n1 as i64 {
        // Bin_beta(k, m) * L(k+j) rewrites as a binomial mass under alpha,
        // e.g. Bin_beta(k, n) L(k) = prior_ratio * (1-p_a)/(1-p_b) * Bin_alpha(k, n).
        v.push(prior_ratio * binom_pmf(pa, k, n1) - params.t_p() * binom_pmf(pb, k, n1));
        a.push(prior_ratio * pa * binom_pmf(pa, k, n) - params.t_j() * pb * binom_pmf(pb, k, n));
        b.push(
            prior_ratio * (1.0 - pa) * binom_pmf(pa, k, n)
                - params.t_j() * (1.0 - pb) * binom_pmf(pb, k, n),
        );
    }
    let diff = |c: &[f64]| -> Vec<f64> {
        (0..c.len())
            .map(|k| if k == 0 { c[0] } else { c[k] - c[k - 1] })
            .collect()
    };
    let da = diff(&a);
    let db = diff(&b);
    LpInstance { v, a, b, da, db }
}

fn verdict(lhs: f64, tol: f64, satisfied_when_negative: bool) -> Verdict {
    if lhs.abs() <= tol {
        Verdict::Binding
    } else if (lhs < 0.0) == satisfied_when_negative {
        Verdict::Strict
    } else {
        Verdict::Violated
    }
}

pub(crate) fn row_scale(row: &[f64]) -> f64 {
    row.iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE)
}

/// Evaluates both incentive constraints for a mechanism. The verdict
/// tolerance is [`IC_TOL`] relative to the largest coefficient of each
/// constraint row, so binding detection tracks the row's magnitude.
pub fn ic_report(params: &ModelParams, x: &VotingMechanism) -> Result<ICReport> {
    x.check_len(params)?;
    let lp = build_lp(params);
    Ok(ic_report_from_lp(&lp, x.probs()))
}

pub(crate) fn ic_report_from_lp(lp: &LpInstance, probs: &[f64]) -> ICReport {
    let dot = |c: &[f64]| -> f64 { c.iter().zip(probs).map(|(ci, xi)| ci * xi).sum() };
    let ic_a_lhs = dot(&lp.da);
    let ic_b_lhs = dot(&lp.db);
    ICReport {
        ic_a_lhs,
        ic_b_lhs,
        verdict_a: verdict(ic_a_lhs, IC_TOL * row_scale(&lp.da), true),
        verdict_b: verdict(ic_b_lhs, IC_TOL * row_scale(&lp.db), false),
    }
}

/// Principal's expected value of a mechanism.
pub fn principal_payoff(params: &ModelParams, x: &VotingMechanism) -> Result<PrincipalPayoff> {
    x.check_len(params)?;
    let lp = build_lp(params);
    let v_units: f64 = lp.v.iter().zip(x.probs()).map(|(v, p)| v * p).sum();
    let payoff_units = params
        .payoffs()
        .map(|pay| params.prior(State::Beta) * pay.v_alpha * v_units);
    Ok(PrincipalPayoff {
        v_units,
        payoff_units,
    })
}

/// `Pr(beta) * V_alpha * v_units` using the effective payoffs (stored or
/// threshold-normalized). Comparable with the game layer's expectations.
pub fn principal_payoff_effective(params: &ModelParams, x: &VotingMechanism) -> Result<f64> {
    let payoff = principal_payoff(params, x)?;
    Ok(params.prior(State::Beta) * params.effective_payoffs().v_alpha * payoff.v_units)
}

/// The first-best rule: choose `A` iff the tally reaches the principal's
/// cutoff.
pub fn principal_preferred(params: &ModelParams) -> VotingMechanism {
    VotingMechanism::cutoff_rule(params.n_plus_1(), params.principal_cutoff())
}

/// The cutoff rule at the agents' preferred cutoff. Strictly incentive
/// compatible.
pub fn agent_preferred(params: &ModelParams) -> VotingMechanism {
    VotingMechanism::cutoff_rule(params.n_plus_1(), params.agent_cutoff())
}

/// The agent-preferred rule with the probability at the agents' cutoff
/// lowered exactly until the b-signal constraint binds.
pub fn agent_preferred_lowered(params: &ModelParams) -> VotingMechanism {
    let lp = build_lp(params);
    let k_j = params.agent_cutoff();
    let mut probs = VotingMechanism::cutoff_rule(params.n_plus_1(), k_j)
        .probs()
        .to_vec();
    probs[k_j] = lp.b[k_j] / (lp.b[k_j] - lp.b[k_j - 1]);
    VotingMechanism::new(probs).expect("boundary probability lies in (0,1)")
}

/// The agent-preferred rule with the support extended one tally below the
/// agents' cutoff, with probability chosen so the a-signal constraint
/// binds. When the agents' cutoff is 1 this is the all-ones mechanism.
pub fn agent_preferred_extended(params: &ModelParams) -> VotingMechanism {
    let k_j = params.agent_cutoff();
    if k_j == 1 {
        return VotingMechanism::ones(params.n_plus_1());
    }
    let lp = build_lp(params);
    let mut probs = VotingMechanism::cutoff_rule(params.n_plus_1(), k_j)
        .probs()
        .to_vec();
    probs[k_j - 1] = lp.a[k_j - 1] / (lp.a[k_j - 1] - lp.a[k_j - 2]);
    VotingMechanism::new(probs).expect("boundary probability lies in (0,1)")
}

/// Classifies a mechanism after snapping entries within `tol` of 0 or 1.
pub fn classify(x: &VotingMechanism, tol: f64) -> Shape {
    let snapped: Vec<f64> = x
        .probs()
        .iter()
        .map(|&p| {
            if p.abs() <= tol {
                0.0
            } else if (p - 1.0).abs() <= tol {
                1.0
            } else {
                p
            }
        })
        .collect();
    let support: Vec<usize> = (0..snapped.len()).filter(|&k| snapped[k] > 0.0).collect();
    let (Some(&k_lo), Some(&k_hi)) = (support.first(), support.last()) else {
        return Shape::Zero;
    };
    if support.len() != k_hi - k_lo + 1 {
        return Shape::NotInterval;
    }
    if ((k_lo + 1)..k_hi).any(|k| snapped[k] != 1.0) {
        return Shape::NotInterval;
    }
    Shape::Interval {
        k_lo,
        k_hi,
        x_lo: snapped[k_lo],
        x_hi: snapped[k_hi],
    }
}

/// Weakly increasing in the tally, up to [`IC_TOL`].
pub fn is_monotone(x: &VotingMechanism) -> bool {
    x.probs().windows(2).all(|w| w[1] >= w[0] - IC_TOL)
}

/// The choice probability actually varies with the tally.
pub fn is_responsive(x: &VotingMechanism) -> bool {
    let max = x.probs().iter().cloned().fold(f64::MIN, f64::max);
    let min = x.probs().iter().cloned().fold(f64::MAX, f64::min);
    max - min > IC_TOL
}

/// Ratio of successive threshold gaps `(L(k+1) - t_J) / (L(k) - t_J)`.
/// Positive on every integer tally except the one just below the agents'
/// cutoff, and strictly decreasing on the integer ranges on either side of
/// the agents' indifference point.
pub fn threshold_gap_ratio(params: &ModelParams, k: i64) -> f64 {
    (params.likelihood(k + 1) - params.t_j()) / (params.likelihood(k) - params.t_j())
}

/// A direct mechanism: a choice probability for every signal profile in
/// `{a,b}^(n+1)`, stored as a table indexed by bitmask (bit `j` set means
/// agent `j` received an `a`-signal).
#[derive(Clone, Debug, PartialEq)]
pub struct DirectMechanism {
    n_plus_1: usize,
    table: Vec<f64>,
}

/// Profile tables grow as `2^(n+1)`; larger committees must go through
/// voting mechanisms directly.
pub const MAX_DIRECT_AGENTS: usize = 20;

impl DirectMechanism {
    pub fn new(n_plus_1: usize, table: Vec<f64>) -> Result<Self> {
        if n_plus_1 > MAX_DIRECT_AGENTS {
            return Err(Error::TooManyAgents {
                max: MAX_DIRECT_AGENTS,
                got: n_plus_1,
            });
        }
        let expected = 1usize << n_plus_1;
        if table.len() != expected {
            return Err(Error::ProfileTable {
                expected,
                got: table.len(),
            });
        }
        for (index, &p) in table.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbabilityEntry { index, value: p });
            }
        }
        Ok(DirectMechanism { n_plus_1, table })
    }

    /// Embeds a voting mechanism as the direct mechanism that looks only at
    /// the tally.
    pub fn from_voting(x: &VotingMechanism) -> Result<Self> {
        let n_plus_1 = x.n_plus_1();
        if n_plus_1 > MAX_DIRECT_AGENTS {
            return Err(Error::TooManyAgents {
                max: MAX_DIRECT_AGENTS,
                got: n_plus_1,
            });
        }
        let table = (0..1usize << n_plus_1)
            .map(|mask| x.get(mask.count_ones() as usize))
            .collect();
        Ok(DirectMechanism { n_plus_1, table })
    }

    /// Parses the JSON map form: keys are strings over `{a,b}` of length
    /// `n+1` (position = agent), values are probabilities. All `2^(n+1)`
    /// profiles must be present.
    pub fn from_json_map(
        n_plus_1: usize,
        map: &std::collections::BTreeMap<String, f64>,
    ) -> Result<Self> {
        if n_plus_1 > MAX_DIRECT_AGENTS {
            return Err(Error::TooManyAgents {
                max: MAX_DIRECT_AGENTS,
                got: n_plus_1,
            });
        }
        let expected = 1usize << n_plus_1;
        if map.len() != expected {
            return Err(Error::ProfileTable {
                expected,
                got: map.len(),
            });
        }
        let mut table = vec![f64::NAN; expected];
        for (key, &value) in map {
            if key.len() != n_plus_1 || !key.chars().all(|c| c == 'a' || c == 'b') {
                return Err(Error::ProfileKey(key.clone()));
            }
            let mask = key
                .chars()
                .enumerate()
                .fold(0usize, |m, (j, c)| if c == 'a' { m | (1 << j) } else { m });
            table[mask] = value;
        }
        if table.iter().any(|p| p.is_nan()) {
            return Err(Error::ProfileTable {
                expected,
                got: map.len(),
            });
        }
        Self::new(n_plus_1, table)
    }

    pub fn n_plus_1(&self) -> usize {
        self.n_plus_1
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }
}

/// Averages a direct mechanism over all relabelings of the agents, which
/// collapses it to a voting mechanism: profiles with the same tally are
/// weighted equally by the permutation average, so `x(k)` is the plain mean
/// of `z` over the `C(n+1, k)` profiles with exactly `k` `a`-entries. The
/// principal's expected payoff is preserved because profile probabilities
/// depend only on the tally.
pub fn symmetrize(direct: &DirectMechanism, params: &ModelParams) -> Result<VotingMechanism> {
    let n_plus_1 = params.n_plus_1();
    if direct.n_plus_1() != n_plus_1 {
        return Err(Error::ProfileTable {
            expected: 1usize << n_plus_1,
            got: direct.table().len(),
        });
    }
    let mut sums = vec![0.0; n_plus_1 + 1];
    let mut counts = vec![0u64; n_plus_1 + 1];
    for (mask, &z) in direct.table().iter().enumerate() {
        let tally = mask.count_ones() as usize;
        sums[tally] += z;
        counts[tally] += 1;
    }
    let probs = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    VotingMechanism::new(probs)
}

/// Principal's expected payoff of a direct mechanism under truthful
/// reporting, in effective payoff units. Used to verify that symmetrization
/// is payoff-preserving.
pub fn direct_expected_payoff(params: &ModelParams, direct: &DirectMechanism) -> Result<f64> {
    let n_plus_1 = params.n_plus_1();
    if direct.n_plus_1() != n_plus_1 {
        return Err(Error::ProfileTable {
            expected: 1usize << n_plus_1,
            got: direct.table().len(),
        });
    }
    let pay = params.effective_payoffs();
    let mut total = 0.0;
    for state in [State::Alpha, State::Beta] {
        let p = params.signal_prob(state);
        let mut conditional = 0.0;
        for (mask, &z) in direct.table().iter().enumerate() {
            let tally = mask.count_ones() as i32;
            let prob = p.powi(tally) * (1.0 - p).powi(n_plus_1 as i32 - tally);
            conditional += prob * z;
        }
        total += params.prior(state) * pay.principal(state) * conditional;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{assert_close, f2, f2_with, f9, mech, naive_binom, naive_vab};

    #[test]
    fn binom_pmf_matches_hand_value_and_convention() {
        assert_close(binom_pmf(1.0 / 3.0, 2, 8), 1792.0 / 6561.0, 1e-12);
        assert_eq!(binom_pmf(1.0 / 3.0, -1, 8), 0.0);
        assert_eq!(binom_pmf(1.0 / 3.0, 9, 8), 0.0);
    }

    #[test]
    fn binom_rows_sum_to_one() {
        for n in [1usize, 4, 9, 40] {
            for p in [0.05, 1.0 / 3.0, 0.8] {
                let total: f64 = (0..=n as i64).map(|k| binom_pmf(p, k, n)).sum();
                assert_close(total, 1.0, 1e-12);
            }
        }
    }

    #[test]
    fn f2_lp_vectors_match_hand_fractions() {
        let lp = build_lp(&f2());
        let expect_v = [-5.0 / 9.0, -2.0 / 9.0, 2.5 / 9.0];
        let expect_a = [1.0 / 9.0, 3.5 / 9.0, 0.0];
        let expect_b = [-1.0 / 9.0, 1.0 / 9.0, 0.0];
        for k in 0..3 {
            assert_close(lp.v[k], expect_v[k], 1e-12);
            assert_close(lp.a[k], expect_a[k], 1e-12);
            assert_close(lp.b[k], expect_b[k], 1e-12);
        }
    }

    #[test]
    fn lp_vectors_match_definitional_route_on_fixtures() {
        for params in [f2(), f9()] {
            let lp = build_lp(&params);
            let (v, a, b) = naive_vab(&params);
            for k in 0..=params.n_plus_1() {
                assert_close(lp.v[k], v[k], 1e-12);
                assert_close(lp.a[k], a[k], 1e-12);
                assert_close(lp.b[k], b[k], 1e-12);
            }
        }
    }

    #[test]
    fn ic_report_f2_examples() {
        let params = f2();

        let xj = ic_report(&params, &mech(vec![0.0, 1.0, 1.0])).unwrap();
        assert_close(xj.ic_b_lhs, 1.0 / 9.0, 1e-12);
        assert_close(xj.ic_a_lhs, -1.0 / 9.0, 1e-12);
        assert_eq!(xj.verdict_a, Verdict::Strict);
        assert_eq!(xj.verdict_b, Verdict::Strict);

        let xp = ic_report(&params, &mech(vec![0.0, 0.0, 1.0])).unwrap();
        assert_close(xp.ic_b_lhs, -1.0 / 9.0, 1e-12);
        assert_eq!(xp.verdict_b, Verdict::Violated);

        let hat = ic_report(&params, &mech(vec![0.0, 0.5, 1.0])).unwrap();
        assert_close(hat.ic_b_lhs, 0.0, 1e-12);
        assert_close(hat.ic_a_lhs, -2.25 / 9.0, 1e-12);
        assert_eq!(hat.verdict_b, Verdict::Binding);
        assert_eq!(hat.verdict_a, Verdict::Strict);
    }

    #[test]
    fn ic_report_rejects_length_mismatch() {
        let err = ic_report(&f2(), &mech(vec![0.0, 0.5, 0.5, 1.0])).unwrap_err();
        assert!(matches!(err, crate::Error::MechanismLength { .. }));
    }

    #[test]
    fn principal_payoff_examples() {
        let params = f2();
        let pay = principal_payoff(&params, &mech(vec![0.0, 0.5, 1.0])).unwrap();
        assert_close(pay.v_units, 1.0 / 6.0, 1e-12);
        assert!(pay.payoff_units.is_none());

        let zero = principal_payoff(&params, &VotingMechanism::zeros(2)).unwrap();
        assert_eq!(zero.v_units, 0.0);

        let lp = build_lp(&params);
        let all: f64 = lp.v.iter().sum();
        let ones = principal_payoff(&params, &VotingMechanism::ones(2)).unwrap();
        assert_close(ones.v_units, all, 1e-12);
    }

    #[test]
    fn payoff_units_scale_with_supplied_payoffs() {
        let params =
            ModelParams::from_payoffs(2, 0.5, 2.0 / 3.0, 1.0 / 3.0, 1.0, -1.5, 1.0, -0.5).unwrap();
        let pay = principal_payoff(&params, &mech(vec![0.0, 0.5, 1.0])).unwrap();
        assert_close(pay.payoff_units.unwrap(), 0.5 * 1.0 / 6.0, 1e-12);
    }

    #[test]
    fn proportionality_identity_holds_per_tally() {
        // Pr(beta) V_alpha v(k) = Pr(alpha) V_alpha Bin_alpha + Pr(beta) V_beta Bin_beta.
        for params in [
            ModelParams::from_payoffs(2, 0.5, 2.0 / 3.0, 1.0 / 3.0, 2.0, -3.0, 1.0, -0.5).unwrap(),
            ModelParams::from_payoffs(9, 0.4, 0.7, 0.2, 1.3, -0.9, 2.0, -0.3).unwrap(),
        ] {
            let lp = build_lp(&params);
            let pay = params.payoffs().unwrap();
            let n1 = params.n_plus_1();
            for k in 0..=n1 as i64 {
                let lhs = params.prior(State::Beta) * pay.v_alpha * lp.v[k as usize];
                let rhs = params.prior(State::Alpha)
                    * pay.v_alpha
                    * binom_pmf(params.p_alpha(), k, n1)
                    + params.prior(State::Beta) * pay.v_beta * binom_pmf(params.p_beta(), k, n1);
                assert_close(lhs, rhs, 1e-12);
            }
        }
    }

    #[test]
    fn named_mechanisms_on_fixtures() {
        assert_eq!(principal_preferred(&f2()).probs(), &[0.0, 0.0, 1.0]);
        assert_eq!(agent_preferred(&f2()).probs(), &[0.0, 1.0, 1.0]);

        let p9 = principal_preferred(&f9());
        assert!(p9.probs()[..5].iter().all(|&x| x == 0.0));
        assert!(p9.probs()[5..].iter().all(|&x| x == 1.0));

        let a9 = agent_preferred(&f9());
        assert!(a9.probs()[..3].iter().all(|&x| x == 0.0));
        assert!(a9.probs()[3..].iter().all(|&x| x == 1.0));

        let no_conflict = f2_with(0.9, 0.5);
        assert_eq!(
            principal_preferred(&no_conflict).probs(),
            agent_preferred(&no_conflict).probs()
        );
    }

    #[test]
    fn lowered_mechanism_values_and_binding() {
        let hat2 = agent_preferred_lowered(&f2());
        assert_close(hat2.get(0), 0.0, 1e-15);
        assert_close(hat2.get(1), 0.5, 1e-12);
        assert_close(hat2.get(2), 1.0, 1e-15);

        let hat9 = agent_preferred_lowered(&f9());
        assert_close(hat9.get(3), 0.8, 1e-12);
        assert!(hat9.probs()[4..].iter().all(|&x| x == 1.0));
        assert!(hat9.probs()[..3].iter().all(|&x| x == 0.0));

        for params in [f2(), f9()] {
            let report = ic_report(&params, &agent_preferred_lowered(&params)).unwrap();
            assert_eq!(report.verdict_b, Verdict::Binding);
            assert_eq!(report.verdict_a, Verdict::Strict);
        }
    }

    #[test]
    fn extended_mechanism_values_and_binding() {
        // Agents' cutoff 1: the special case collapses to all-ones.
        assert_eq!(agent_preferred_extended(&f2()).probs(), &[1.0, 1.0, 1.0]);
        let rep = ic_report(&f2(), &agent_preferred_extended(&f2())).unwrap();
        assert_eq!(rep.verdict_a, Verdict::Binding);
        assert_eq!(rep.verdict_b, Verdict::Binding);

        // F9 has cutoff 3: fractional entry at tally 2, derived from the
        // a-coefficients evaluated independently.
        let check9 = agent_preferred_extended(&f9());
        let (_, a, _) = naive_vab(&f9());
        let expected = a[2] / (a[2] - a[1]);
        assert!(expected > 0.0 && expected < 1.0);
        assert_close(check9.get(2), expected, 1e-12);
        assert!(check9.probs()[3..].iter().all(|&x| x == 1.0));
        assert!(check9.probs()[..2].iter().all(|&x| x == 0.0));

        let rep9 = ic_report(&f9(), &check9).unwrap();
        assert_eq!(rep9.verdict_a, Verdict::Binding);
        assert_eq!(rep9.verdict_b, Verdict::Strict);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&VotingMechanism::zeros(2), 1e-9), Shape::Zero);
        assert_eq!(
            classify(&mech(vec![0.0, 0.5, 1.0]), 1e-9),
            Shape::Interval {
                k_lo: 1,
                k_hi: 2,
                x_lo: 0.5,
                x_hi: 1.0
            }
        );
        assert_eq!(classify(&mech(vec![1.0, 0.0, 1.0]), 1e-9), Shape::NotInterval);
        // Interior entries below one also break the interval pattern.
        assert_eq!(
            classify(&mech(vec![0.0, 1.0, 0.5, 1.0, 0.0]), 1e-9),
            Shape::NotInterval
        );
        // Snapping pulls solver round-off onto the pattern.
        assert_eq!(
            classify(&mech(vec![1e-12, 0.3, 1.0 - 1e-12, 0.7]), 1e-9),
            Shape::Interval {
                k_lo: 1,
                k_hi: 3,
                x_lo: 0.3,
                x_hi: 0.7
            }
        );
    }

    #[test]
    fn monotone_and_responsive_examples() {
        let m = mech(vec![0.0, 0.5, 1.0]);
        assert!(is_monotone(&m) && is_responsive(&m));
        let ones = VotingMechanism::ones(2);
        assert!(is_monotone(&ones) && !is_responsive(&ones));
        assert!(!is_monotone(&mech(vec![0.0, 1.0, 0.3])));
    }

    #[test]
    fn symmetrize_examples() {
        // Two agents: z(aa)=1, z(ab)=1, z(ba)=0, z(bb)=0. Keys read agent 0
        // first, so "ab" means agent 0 saw a.
        let mut map = std::collections::BTreeMap::new();
        map.insert("aa".to_string(), 1.0);
        map.insert("ab".to_string(), 1.0);
        map.insert("ba".to_string(), 0.0);
        map.insert("bb".to_string(), 0.0);
        let direct = DirectMechanism::from_json_map(2, &map).unwrap();
        let x = symmetrize(&direct, &f2()).unwrap();
        assert_eq!(x.probs(), &[0.0, 0.5, 1.0]);

        // A tally-measurable table is a fixed point.
        let voting = mech(vec![0.2, 0.7, 0.9]);
        let embedded = DirectMechanism::from_voting(&voting).unwrap();
        let back = symmetrize(&embedded, &f2()).unwrap();
        for k in 0..3 {
            assert_close(back.get(k), voting.get(k), 1e-15);
        }

        // Three agents, indicator of one specific tally-2 profile.
        let params3 = ModelParams::new(3, 0.5, 2.0 / 3.0, 1.0 / 3.0, 1.1, 0.9).unwrap();
        let mut table = vec![0.0; 8];
        // profile (a, b, a) -> bits 0 and 2 set
        table[0b101] = 1.0;
        let direct3 = DirectMechanism::new(3, table).unwrap();
        let x3 = symmetrize(&direct3, &params3).unwrap();
        assert_eq!(x3.probs()[0], 0.0);
        assert_eq!(x3.probs()[1], 0.0);
        assert_close(x3.probs()[2], 1.0 / 3.0, 1e-15);
        assert_eq!(x3.probs()[3], 0.0);
    }

    #[test]
    fn symmetrize_rejects_bad_tables() {
        let err = DirectMechanism::new(2, vec![0.0; 3]).unwrap_err();
        assert!(matches!(err, crate::Error::ProfileTable { .. }));
        let err = DirectMechanism::new(25, vec![0.0; 8]).unwrap_err();
        assert!(matches!(err, crate::Error::TooManyAgents { .. }));
    }

    #[test]
    fn symmetrize_preserves_principal_payoff_on_fixture() {
        let direct = DirectMechanism::new(2, vec![0.9, 0.1, 0.4, 0.8]).unwrap();
        let params = f2();
        let x = symmetrize(&direct, &params).unwrap();
        let direct_value = direct_expected_payoff(&params, &direct).unwrap();
        let voting_value = principal_payoff_effective(&params, &x).unwrap();
        assert_close(voting_value, direct_value, 1e-12);
    }

    #[test]
    fn gap_ratio_signs_on_f9() {
        let params = f9();
        let k_j = params.agent_cutoff() as i64;
        for k in 0..=params.n_plus_1() as i64 {
            let w = threshold_gap_ratio(&params, k);
            if k == k_j - 1 {
                assert!(w < 0.0);
            } else {
                assert!(w > 0.0);
            }
        }
    }

    mod properties {
        use super::*;
        use crate::testutil::{params_and_mech_strategy, params_strategy};
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            /// For a cutoff mechanism the constraint sums telescope to the
            /// coefficient just below the cutoff.
            #[test]
            fn telescoping_identity(p in params_strategy(), cut_frac in 0.0f64..1.0) {
                let n1 = p.n_plus_1();
                let cutoff = 1 + (cut_frac * n1 as f64) as usize;
                let x = VotingMechanism::cutoff_rule(n1, cutoff.min(n1));
                let lp = build_lp(&p);
                let rep = ic_report_from_lp(&lp, x.probs());
                let scale = 1f64.max(lp.b.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                prop_assert!((rep.ic_b_lhs + lp.b[cutoff.min(n1) - 1]).abs() <= 1e-12 * scale);
                let scale_a = 1f64.max(lp.a.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                prop_assert!((rep.ic_a_lhs + lp.a[cutoff.min(n1) - 1]).abs() <= 1e-12 * scale_a);
            }

            #[test]
            fn boundary_mechanism_verdict_patterns(p in params_strategy()) {
                let lowered = ic_report(&p, &agent_preferred_lowered(&p)).unwrap();
                prop_assert_eq!(lowered.verdict_a, Verdict::Strict);
                prop_assert_eq!(lowered.verdict_b, Verdict::Binding);

                let extended = ic_report(&p, &agent_preferred_extended(&p)).unwrap();
                if p.agent_cutoff() == 1 {
                    prop_assert_eq!(extended.verdict_a, Verdict::Binding);
                    prop_assert_eq!(extended.verdict_b, Verdict::Binding);
                } else {
                    prop_assert_eq!(extended.verdict_a, Verdict::Binding);
                    prop_assert_eq!(extended.verdict_b, Verdict::Strict);
                }
            }

            #[test]
            fn first_best_violates_icb_iff_conflict(p in params_strategy()) {
                let rep = ic_report(&p, &principal_preferred(&p)).unwrap();
                prop_assert_eq!(rep.verdict_b == Verdict::Violated, p.conflict_of_interest());
                prop_assert!(rep.verdict_a.satisfied());
            }

            #[test]
            fn agent_preferred_strictly_ic(p in params_strategy()) {
                let rep = ic_report(&p, &agent_preferred(&p)).unwrap();
                prop_assert_eq!(rep.verdict_a, Verdict::Strict);
                prop_assert_eq!(rep.verdict_b, Verdict::Strict);
            }

            #[test]
            fn lowered_mechanism_classifies_as_interval_from_cutoff(p in params_strategy()) {
                let shape = classify(&agent_preferred_lowered(&p), 1e-9);
                match shape {
                    Shape::Interval { k_lo, k_hi, x_hi, .. } => {
                        prop_assert_eq!(k_lo, p.agent_cutoff());
                        prop_assert_eq!(k_hi, p.n_plus_1());
                        prop_assert_eq!(x_hi, 1.0);
                    }
                    other => prop_assert!(false, "unexpected shape {:?}", other),
                }
            }

            /// Embedding a voting mechanism and symmetrizing returns it.
            #[test]
            fn symmetrize_is_idempotent((p, x) in params_and_mech_strategy()) {
                prop_assume!(p.n_plus_1() <= 12);
                let direct = DirectMechanism::from_voting(&x).unwrap();
                let back = symmetrize(&direct, &p).unwrap();
                for k in 0..=p.n_plus_1() {
                    prop_assert!((back.get(k) - x.get(k)).abs() <= 1e-12);
                }
            }

            /// Gap-ratio sign and monotonicity pattern.
            #[test]
            fn gap_ratio_pattern(p in params_strategy()) {
                let k_j = p.agent_cutoff() as i64;
                let top = p.n_plus_1() as i64;
                for k in 0..=top {
                    let w = threshold_gap_ratio(&p, k);
                    if k == k_j - 1 {
                        prop_assert!(w < 0.0);
                    } else {
                        prop_assert!(w > 0.0);
                    }
                }
                for k in 0..k_j - 2 {
                    prop_assert!(
                        threshold_gap_ratio(&p, k + 1) < threshold_gap_ratio(&p, k)
                    );
                }
                for k in k_j..top {
                    prop_assert!(
                        threshold_gap_ratio(&p, k + 1) < threshold_gap_ratio(&p, k)
                    );
                }
            }
        }
    }
}
