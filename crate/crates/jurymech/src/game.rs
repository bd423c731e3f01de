//! Exact evaluation of the induced reporting game — deviation gains, best
//! responses and expected payoffs under arbitrary common strategies — plus
//! a seeded Monte Carlo simulator as a sanity layer. The exact evaluators
//! work from posteriors and binomial tallies directly, independently of the
//! constraint coefficients used elsewhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::mechanisms::{binom_pmf, VotingMechanism};
use crate::model::{ModelParams, State};
use crate::{Error, Result};

/// Utility-unit tolerance at which a best-response comparison counts as a
/// tie (broken toward truthful reporting).
pub const TIE_TOL: f64 = 1e-12;

/// A common reporting strategy: probability of reporting `a` after each
/// signal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReportingStrategy {
    pub q_a: f64,
    pub q_b: f64,
}

impl ReportingStrategy {
    pub const TRUTHFUL: ReportingStrategy = ReportingStrategy { q_a: 1.0, q_b: 0.0 };

    /// Probability that one agent reports `a` in the given state.
    fn report_prob(&self, params: &ModelParams, state: State) -> f64 {
        let p = params.signal_prob(state);
        self.q_a * p + self.q_b * (1.0 - p)
    }
}

/// Monte Carlo configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
}

/// Sample means and standard errors from a simulation run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimReport {
    pub trials: u64,
    pub seed: u64,
    pub principal_mean: f64,
    pub principal_se: f64,
    pub agent_mean: f64,
    pub agent_se: f64,
}

impl SimReport {
    pub fn to_json_value(&self) -> serde_json::Value {
        json!({
            "trials": self.trials,
            "seed": self.seed,
            "principal_mean": self.principal_mean,
            "principal_se": self.principal_se,
            "agent_mean": self.agent_mean,
            "agent_se": self.agent_se,
        })
    }
}

fn check_len(params: &ModelParams, x: &VotingMechanism) -> Result<()> {
    if x.probs().len() != params.n_plus_1() + 1 {
        return Err(Error::MechanismLength {
            expected: params.n_plus_1() + 1,
            got: x.probs().len(),
        });
    }
    Ok(())
}

/// One agent's gain, in utility units, from reporting truthfully rather
/// than lying, conditional on each own signal, when everyone else reports
/// truthfully. Computed from the posterior over states and the binomial
/// tally of the `n` other agents.
pub fn deviation_gains(params: &ModelParams, x: &VotingMechanism) -> Result<(f64, f64)> {
    check_len(params, x)?;
    let n = params.n();
    let pay = params.effective_payoffs();
    let mut joint_a = 0.0;
    let mut joint_b = 0.0;
    let mut prob_a = 0.0;
    for state in [State::Alpha, State::Beta] {
        let p = params.signal_prob(state);
        let weight = params.prior(state) * pay.agent(state);
        let mut swing = 0.0;
        for j in 0..=n as i64 {
            swing += binom_pmf(p, j, n) * (x.get(j as usize + 1) - x.get(j as usize));
        }
        joint_a += weight * p * swing;
        joint_b += weight * (1.0 - p) * (-swing);
        prob_a += params.prior(state) * p;
    }
    Ok((joint_a / prob_a, joint_b / (1.0 - prob_a)))
}

/// Exact best response of a single agent when all others play `others`,
/// by enumerating the mixture-of-binomials tally of the others' reports in
/// each state. Ties within [`TIE_TOL`] break toward truthful reporting.
pub fn unilateral_best_response(
    params: &ModelParams,
    x: &VotingMechanism,
    others: ReportingStrategy,
) -> Result<ReportingStrategy> {
    check_len(params, x)?;
    let n = params.n();
    let pay = params.effective_payoffs();
    // Advantage of reporting a over b, jointly weighted by the own-signal
    // probability, per own signal.
    let mut adv = [0.0f64; 2]; // [after a, after b]
    for state in [State::Alpha, State::Beta] {
        let p_sig = params.signal_prob(state);
        let r = others.report_prob(params, state);
        let mut swing = 0.0;
        for j in 0..=n as i64 {
            swing += binom_pmf(r, j, n) * (x.get(j as usize + 1) - x.get(j as usize));
        }
        let weight = params.prior(state) * pay.agent(state);
        adv[0] += weight * p_sig * swing;
        adv[1] += weight * (1.0 - p_sig) * swing;
    }
    let q_a = if adv[0] > TIE_TOL {
        1.0
    } else if adv[0] < -TIE_TOL {
        0.0
    } else {
        1.0 // tie: report the signal
    };
    let q_b = if adv[1] > TIE_TOL {
        1.0
    } else if adv[1] < -TIE_TOL {
        0.0
    } else {
        0.0 // tie: report the signal
    };
    Ok(ReportingStrategy { q_a, q_b })
}

/// Exact expected payoffs (principal, agent) when every agent plays the
/// same reporting strategy, via the per-state binomial tally of reports.
/// Payoff units come from the stored quadruple or the threshold-normalized
/// one.
pub fn expected_payoffs(
    params: &ModelParams,
    x: &VotingMechanism,
    strategy: ReportingStrategy,
) -> Result<(f64, f64)> {
    check_len(params, x)?;
    let n1 = params.n_plus_1();
    let pay = params.effective_payoffs();
    let mut principal = 0.0;
    let mut agent = 0.0;
    for state in [State::Alpha, State::Beta] {
        let r = strategy.report_prob(params, state);
        let mut choose_a = 0.0;
        for k in 0..=n1 as i64 {
            choose_a += binom_pmf(r, k, n1) * x.get(k as usize);
        }
        principal += params.prior(state) * pay.principal(state) * choose_a;
        agent += params.prior(state) * pay.agent(state) * choose_a;
    }
    Ok((principal, agent))
}

/// Trials per worker chunk. The chunk grid is fixed by the trial count
/// alone, so results are identical for any worker pool.
const CHUNK: u64 = 1 << 16;

#[derive(Clone, Copy, Default)]
struct Partial {
    sum_p: f64,
    sumsq_p: f64,
    sum_a: f64,
    sumsq_a: f64,
}

/// Seeded Monte Carlo estimate of the expected payoffs. Each chunk of
/// trials draws from its own counter-derived stream; partial sums are
/// merged in chunk order, so the report is reproducible bit for bit
/// regardless of parallelism.
pub fn simulate(
    params: &ModelParams,
    x: &VotingMechanism,
    strategy: ReportingStrategy,
    config: SimConfig,
) -> Result<SimReport> {
    check_len(params, x)?;
    if config.trials == 0 {
        return Err(Error::TrialCount);
    }
    let n_chunks = config.trials.div_ceil(CHUNK);
    let partials: Vec<Partial> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(config.trials);
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(chunk);
            run_chunk(params, x, strategy, &mut rng, hi - lo)
        })
        .collect();

    let total = partials.iter().fold(Partial::default(), |acc, p| Partial {
        sum_p: acc.sum_p + p.sum_p,
        sumsq_p: acc.sumsq_p + p.sumsq_p,
        sum_a: acc.sum_a + p.sum_a,
        sumsq_a: acc.sumsq_a + p.sumsq_a,
    });
    let t = config.trials as f64;
    let mean_se = |sum: f64, sumsq: f64| -> (f64, f64) {
        let mean = sum / t;
        if config.trials < 2 {
            return (mean, 0.0);
        }
        let var = ((sumsq - t * mean * mean) / (t - 1.0)).max(0.0);
        (mean, (var / t).sqrt())
    };
    let (principal_mean, principal_se) = mean_se(total.sum_p, total.sumsq_p);
    let (agent_mean, agent_se) = mean_se(total.sum_a, total.sumsq_a);
    Ok(SimReport {
        trials: config.trials,
        seed: config.seed,
        principal_mean,
        principal_se,
        agent_mean,
        agent_se,
    })
}

fn run_chunk(
    params: &ModelParams,
    x: &VotingMechanism,
    strategy: ReportingStrategy,
    rng: &mut ChaCha8Rng,
    trials: u64,
) -> Partial {
    let pay = params.effective_payoffs();
    let mut acc = Partial::default();
    for _ in 0..trials {
        let state = if rng.gen::<f64>() < params.prior_alpha() {
            State::Alpha
        } else {
            State::Beta
        };
        let p = params.signal_prob(state);
        let mut tally = 0usize;
        for _ in 0..params.n_plus_1() {
            let signal_a = rng.gen::<f64>() < p;
            let q = if signal_a { strategy.q_a } else { strategy.q_b };
            let report_a = if q <= 0.0 {
                false
            } else if q >= 1.0 {
                true
            } else {
                rng.gen::<f64>() < q
            };
            tally += usize::from(report_a);
        }
        let prob = x.get(tally);
        let choose_a = if prob <= 0.0 {
            false
        } else if prob >= 1.0 {
            true
        } else {
            rng.gen::<f64>() < prob
        };
        if choose_a {
            let vp = pay.principal(state);
            let va = pay.agent(state);
            acc.sum_p += vp;
            acc.sumsq_p += vp * vp;
            acc.sum_a += va;
            acc.sumsq_a += va * va;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms;
    use crate::testutil::{assert_close, f2, f9, mech};

    #[test]
    fn gains_positive_for_agent_preferred_rule() {
        let (gain_a, gain_b) = deviation_gains(&f2(), &mech(vec![0.0, 1.0, 1.0])).unwrap();
        assert!(gain_a > 0.0);
        assert!(gain_b > 0.0);
    }

    #[test]
    fn first_best_tempts_b_signals_under_conflict() {
        let (gain_a, gain_b) = deviation_gains(&f2(), &mech(vec![0.0, 0.0, 1.0])).unwrap();
        assert!(gain_a > 0.0);
        assert!(gain_b < 0.0);
    }

    #[test]
    fn constant_mechanisms_make_reports_irrelevant() {
        for c in [0.0, 0.3, 1.0] {
            let (gain_a, gain_b) = deviation_gains(&f2(), &mech(vec![c, c, c])).unwrap();
            assert_close(gain_a, 0.0, 1e-15);
            assert_close(gain_b, 0.0, 1e-15);
        }
    }

    #[test]
    fn gains_are_rescaled_constraint_slacks() {
        // The game-layer gains and the LP-layer constraint sums measure the
        // same deviations in different units; the exact exchange rate is
        // U_alpha Pr(beta) / Pr(signal).
        for params in [f2(), f9()] {
            let pay = params.effective_payoffs();
            let pr_beta = 1.0 - params.prior_alpha();
            let prob_a = params.prior_alpha() * params.p_alpha() + pr_beta * params.p_beta();
            for probs in [
                vec![0.1; params.n_plus_1() + 1],
                mechanisms::agent_preferred(&params).probs().to_vec(),
                mechanisms::principal_preferred(&params).probs().to_vec(),
            ] {
                let x = mech(probs);
                let (gain_a, gain_b) = deviation_gains(&params, &x).unwrap();
                let rep = mechanisms::ic_report(&params, &x).unwrap();
                let expect_a = -pay.u_alpha * pr_beta / prob_a * rep.ic_a_lhs;
                let expect_b = pay.u_alpha * pr_beta / (1.0 - prob_a) * rep.ic_b_lhs;
                assert_close(gain_a, expect_a, 1e-10);
                assert_close(gain_b, expect_b, 1e-10);
            }
        }
    }

    #[test]
    fn best_response_examples() {
        let params = f2();
        let truthful = unilateral_best_response(
            &params,
            &mech(vec![0.0, 0.5, 1.0]),
            ReportingStrategy::TRUTHFUL,
        )
        .unwrap();
        assert_eq!(truthful, ReportingStrategy { q_a: 1.0, q_b: 0.0 });

        // Against the first-best rule a b-signal prefers to lie upward.
        let against_first_best = unilateral_best_response(
            &params,
            &mech(vec![0.0, 0.0, 1.0]),
            ReportingStrategy::TRUTHFUL,
        )
        .unwrap();
        assert_eq!(against_first_best.q_b, 1.0);
        assert_eq!(against_first_best.q_a, 1.0);

        // A constant mechanism ties everywhere; ties break truthful.
        let constant = unilateral_best_response(
            &params,
            &mech(vec![0.4, 0.4, 0.4]),
            ReportingStrategy { q_a: 0.3, q_b: 0.3 },
        )
        .unwrap();
        assert_eq!(constant, ReportingStrategy { q_a: 1.0, q_b: 0.0 });
    }

    #[test]
    fn expected_payoffs_match_lp_objective_at_truthful() {
        for params in [f2(), f9()] {
            for probs in [
                mechanisms::agent_preferred(&params).probs().to_vec(),
                vec![0.25; params.n_plus_1() + 1],
            ] {
                let x = mech(probs);
                let (principal, _) =
                    expected_payoffs(&params, &x, ReportingStrategy::TRUTHFUL).unwrap();
                let effective = mechanisms::principal_payoff_effective(&params, &x).unwrap();
                assert_close(principal, effective, 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_mechanisms_have_strategy_free_payoffs() {
        let params = f2();
        let zero = mech(vec![0.0, 0.0, 0.0]);
        let (p0, a0) =
            expected_payoffs(&params, &zero, ReportingStrategy { q_a: 0.2, q_b: 0.9 }).unwrap();
        assert_eq!((p0, a0), (0.0, 0.0));

        let ones = mech(vec![1.0, 1.0, 1.0]);
        let pay = params.effective_payoffs();
        let expect_p = params.prior_alpha() * pay.v_alpha + (1.0 - params.prior_alpha()) * pay.v_beta;
        for strategy in [
            ReportingStrategy::TRUTHFUL,
            ReportingStrategy { q_a: 0.5, q_b: 0.5 },
        ] {
            let (p1, _) = expected_payoffs(&params, &ones, strategy).unwrap();
            assert_close(p1, expect_p, 1e-12);
        }
    }

    #[test]
    fn simulation_is_reproducible_and_close_to_exact() {
        let params = f2();
        let x = mech(vec![0.0, 0.5, 1.0]);
        let config = SimConfig { trials: 200_000, seed: 42 };
        let a = simulate(&params, &x, ReportingStrategy::TRUTHFUL, config).unwrap();
        let b = simulate(&params, &x, ReportingStrategy::TRUTHFUL, config).unwrap();
        assert_eq!(a, b);

        let (exact, _) = expected_payoffs(&params, &x, ReportingStrategy::TRUTHFUL).unwrap();
        assert!(
            (a.principal_mean - exact).abs() <= 4.0 * a.principal_se,
            "mean {} vs exact {} (se {})",
            a.principal_mean,
            exact,
            a.principal_se
        );
    }

    #[test]
    fn single_trial_realizes_a_support_point() {
        let params = f2();
        let x = mech(vec![0.0, 0.5, 1.0]);
        let report = simulate(
            &params,
            &x,
            ReportingStrategy::TRUTHFUL,
            SimConfig { trials: 1, seed: 9 },
        )
        .unwrap();
        let pay = params.effective_payoffs();
        let support = [0.0, pay.v_alpha, pay.v_beta];
        assert!(support.iter().any(|s| (report.principal_mean - s).abs() < 1e-12));
        assert_eq!(report.principal_se, 0.0);
    }

    #[test]
    fn zero_trials_rejected_and_lengths_checked() {
        let params = f2();
        let x = mech(vec![0.0, 0.5, 1.0]);
        assert!(matches!(
            simulate(&params, &x, ReportingStrategy::TRUTHFUL, SimConfig { trials: 0, seed: 1 }),
            Err(Error::TrialCount)
        ));
        let long = mech(vec![0.0, 0.5, 0.5, 1.0]);
        assert!(matches!(
            deviation_gains(&params, &long),
            Err(Error::MechanismLength { .. })
        ));
    }

    mod properties {
        use super::*;
        use crate::testutil::params_and_mech_strategy;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            /// Gains and constraint sums must agree in sign (they are
            /// positive rescalings of each other).
            #[test]
            fn gain_signs_match_constraint_signs((p, x) in params_and_mech_strategy()) {
                let (gain_a, gain_b) = deviation_gains(&p, &x).unwrap();
                let rep = mechanisms::ic_report(&p, &x).unwrap();
                if rep.ic_a_lhs.abs() > 1e-9 {
                    prop_assert_eq!(gain_a > 0.0, rep.ic_a_lhs < 0.0);
                }
                if rep.ic_b_lhs.abs() > 1e-9 {
                    prop_assert_eq!(gain_b > 0.0, rep.ic_b_lhs > 0.0);
                }
            }

            /// Truthful reporting is a best response under any mechanism
            /// whose constraints are satisfied.
            #[test]
            fn truthful_is_best_response_under_ic((p, x) in params_and_mech_strategy()) {
                let rep = mechanisms::ic_report(&p, &x).unwrap();
                prop_assume!(rep.both_satisfied());
                let response =
                    unilateral_best_response(&p, &x, ReportingStrategy::TRUTHFUL).unwrap();
                prop_assert_eq!(response, ReportingStrategy::TRUTHFUL);
            }
        }
    }
}
