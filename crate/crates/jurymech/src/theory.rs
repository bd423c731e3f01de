//! Closed-form non-monotonicity certificate, the explicit payoff-improving
//! deviation it is built from, and a battery of numeric checks mirroring
//! the structural results the solvers rely on.

use std::collections::BTreeMap;

use serde_json::json;

use crate::mechanisms::{self, Verdict, VotingMechanism};
use crate::model::ModelParams;
use crate::solver_lp::{self, ArithMode, SolveResult};
use crate::solver_structured;
use crate::{Error, Result};

/// Outcome of one lemma check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LemmaStatus {
    Pass,
    Fail,
    /// The check's hypothesis does not apply to this instance.
    Vacuous,
}

#[derive(Clone, Debug)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub status: LemmaStatus,
    pub detail: String,
    pub values: BTreeMap<String, f64>,
}

impl LemmaCheck {
    fn pass(name: &'static str, detail: impl Into<String>) -> Self {
        LemmaCheck {
            name,
            status: LemmaStatus::Pass,
            detail: detail.into(),
            values: BTreeMap::new(),
        }
    }

    fn fail(name: &'static str, detail: impl Into<String>) -> Self {
        LemmaCheck {
            name,
            status: LemmaStatus::Fail,
            detail: detail.into(),
            values: BTreeMap::new(),
        }
    }

    fn vacuous(name: &'static str, detail: impl Into<String>) -> Self {
        LemmaCheck {
            name,
            status: LemmaStatus::Vacuous,
            detail: detail.into(),
            values: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }
}

/// Aggregate verification report for one instance.
#[derive(Clone, Debug)]
pub struct TheoryReport {
    pub conflict: bool,
    pub first_best_achievable: bool,
    pub t_bar_p: Option<f64>,
    pub c_prime: Option<f64>,
    pub lemma_results: Vec<LemmaCheck>,
}

impl TheoryReport {
    /// True iff every non-vacuous check passed.
    pub fn all_non_vacuous_pass(&self) -> bool {
        self.lemma_results
            .iter()
            .all(|c| c.status != LemmaStatus::Fail)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let mut lemmas = serde_json::Map::new();
        for check in &self.lemma_results {
            let detail = match check.status {
                LemmaStatus::Vacuous => format!("vacuous: {}", check.detail),
                _ => check.detail.clone(),
            };
            lemmas.insert(
                check.name.to_string(),
                json!({
                    "pass": check.status != LemmaStatus::Fail,
                    "detail": detail,
                    "values": check.values,
                }),
            );
        }
        let mut map = serde_json::Map::new();
        map.insert("conflict".into(), json!(self.conflict));
        map.insert(
            "first_best_achievable".into(),
            json!(self.first_best_achievable),
        );
        if let Some(t) = self.t_bar_p {
            map.insert("t_bar_P".into(), json!(t));
        }
        if let Some(c) = self.c_prime {
            map.insert("c_prime".into(), json!(c));
        }
        map.insert("lemma_results".into(), serde_json::Value::Object(lemmas));
        serde_json::Value::Object(map)
    }
}

/// Closed-form threshold above which any responsive optimal interval
/// mechanism must be non-monotone, together with the positive constant the
/// formula hinges on. Requires a conflict of interest.
pub fn nonmonotonicity_threshold(params: &ModelParams) -> Result<(f64, f64)> {
    if !params.conflict_of_interest() {
        return Err(Error::NoConflict);
    }
    let n1 = params.n_plus_1() as f64;
    let n = params.n_plus_1() as i64 - 1;
    let k_j = params.agent_cutoff() as f64;
    let t_j = params.t_j();
    let gap_n = params.likelihood(n) - t_j;
    let ratio = params.p_beta() / (1.0 - params.p_beta());
    let c_prime = ratio * (1.0 - k_j / n1) * (params.likelihood(k_j as i64) - t_j) / gap_n
        - (k_j / n1) * (params.likelihood(k_j as i64 - 1) - t_j) / gap_n;
    let l_top = params.likelihood(params.n_plus_1() as i64);
    let t_bar = l_top - (l_top - params.likelihood(k_j as i64)) / (1.0 + c_prime);
    Ok((t_bar, c_prime))
}

fn deviation_ingredients(params: &ModelParams) -> Result<(VotingMechanism, usize, Vec<f64>, Vec<f64>)> {
    if !params.conflict_of_interest() {
        return Err(Error::NoConflict);
    }
    let lp = mechanisms::build_lp(params);
    let hat = mechanisms::agent_preferred_lowered(params);
    let k_j = params.agent_cutoff();
    Ok((hat, k_j, lp.da, lp.db))
}

/// Largest step that keeps the deviated mechanism in the box with the
/// a-signal constraint strictly satisfied.
fn max_admissible_delta(params: &ModelParams) -> Result<f64> {
    let (hat, k_j, da, db) = deviation_ingredients(params)?;
    let top = params.n_plus_1();
    let mut max_delta = f64::INFINITY;
    max_delta = max_delta.min(hat.get(k_j) * db[k_j]);
    max_delta = max_delta.min(-db[top]);
    let ic_a_hat = mechanisms::ic_report(params, &hat)?.ic_a_lhs;
    let slope = da[k_j] / db[k_j] - da[top] / db[top];
    if slope < 0.0 {
        max_delta = max_delta.min(ic_a_hat / slope);
    }
    Ok(max_delta)
}

/// Shifts probability off both ends of the lowered agent-preferred
/// mechanism so the b-signal constraint stays exactly binding: the entry at
/// the agents' cutoff and the entry at the top tally both move down by
/// `delta` in constraint units. Errors when the step leaves the box or
/// breaks the a-signal constraint, reporting the maximal admissible step.
pub fn improving_deviation(params: &ModelParams, delta: f64) -> Result<VotingMechanism> {
    let (hat, k_j, _, db) = deviation_ingredients(params)?;
    let top = params.n_plus_1();
    let mut probs = hat.probs().to_vec();
    probs[k_j] -= delta / db[k_j];
    probs[top] += delta / db[top];
    let admissible = probs.iter().all(|p| (0.0..=1.0).contains(p));
    if admissible {
        let y = VotingMechanism::new(probs)?;
        if mechanisms::ic_report(params, &y)?.ic_a_lhs < 0.0 {
            return Ok(y);
        }
    }
    Err(Error::DeltaTooLarge {
        max_delta: max_admissible_delta(params)?,
    })
}

/// Default step rule: `1e-4` scaled by the smaller of the two constraint
/// slopes, halved until admissible (at most 60 halvings). Returns the
/// deviated mechanism and the step actually used.
pub fn improving_deviation_auto(params: &ModelParams) -> Result<(VotingMechanism, f64)> {
    let (_, k_j, _, db) = deviation_ingredients(params)?;
    let top = params.n_plus_1();
    let mut delta = 1e-4 * db[k_j].abs().min(db[top].abs());
    for _ in 0..=60 {
        match improving_deviation(params, delta) {
            Ok(y) => return Ok((y, delta)),
            Err(Error::DeltaTooLarge { .. }) => delta /= 2.0,
            Err(other) => return Err(other),
        }
    }
    Err(Error::DeltaTooLarge {
        max_delta: max_admissible_delta(params)?,
    })
}

fn optimal_representatives(result: &SolveResult) -> Vec<&VotingMechanism> {
    let mut reps = vec![&result.x];
    if let Some(alt) = &result.alternate {
        reps.push(alt);
    }
    reps
}

/// Runs the full lemma-verification suite on one instance.
pub fn verify_lemmas(params: &ModelParams) -> TheoryReport {
    let conflict = params.conflict_of_interest();
    let threshold = if conflict {
        Some(nonmonotonicity_threshold(params).expect("conflict checked"))
    } else {
        None
    };
    let lp = mechanisms::build_lp(params);
    let full = solver_lp::solve_full(params, ArithMode::Float);
    let relaxed = solver_lp::solve_relaxed(params, ArithMode::Float);
    let structured = solver_structured::solve(params);

    let mut checks = Vec::new();

    // (1) The agent-preferred cutoff rule is strictly incentive compatible.
    {
        let name = "01-agent-preferred-strictly-ic";
        let rep = mechanisms::ic_report(params, &mechanisms::agent_preferred(params))
            .expect("length matches");
        checks.push(
            if rep.verdict_a == Verdict::Strict && rep.verdict_b == Verdict::Strict {
                LemmaCheck::pass(name, "both constraints strictly satisfied")
            } else {
                LemmaCheck::fail(name, format!("verdicts {:?}/{:?}", rep.verdict_a, rep.verdict_b))
            }
            .with("ic_a_lhs", rep.ic_a_lhs)
            .with("ic_b_lhs", rep.ic_b_lhs),
        );
    }

    // (2) First-best violates the b-signal constraint exactly under conflict.
    {
        let name = "02-first-best-icb-iff-conflict";
        let rep = mechanisms::ic_report(params, &mechanisms::principal_preferred(params))
            .expect("length matches");
        let violated = rep.verdict_b == Verdict::Violated;
        checks.push(
            if violated == conflict && rep.verdict_a.satisfied() {
                LemmaCheck::pass(name, format!("b-constraint violated: {violated}"))
            } else {
                LemmaCheck::fail(
                    name,
                    format!("conflict {conflict} but verdicts {:?}/{:?}", rep.verdict_a, rep.verdict_b),
                )
            }
            .with("ic_b_lhs", rep.ic_b_lhs),
        );
    }

    // (3) The optimum reaches the first-best value exactly when there is no
    // conflict.
    {
        let name = "03-first-best-value-iff-no-conflict";
        let k_p = params.principal_cutoff();
        let first_best: f64 = lp.v[k_p..].iter().sum();
        let achieved = (full.objective_v_units - first_best).abs() <= 1e-9;
        checks.push(
            if achieved == !conflict {
                LemmaCheck::pass(name, format!("first-best achieved: {achieved}"))
            } else {
                LemmaCheck::fail(
                    name,
                    format!("conflict {conflict} but objective gap {}", first_best - full.objective_v_units),
                )
            }
            .with("objective", full.objective_v_units)
            .with("first_best", first_best),
        );
    }

    // (4) Verdict patterns of the two boundary-adjusted mechanisms.
    {
        let name = "04-boundary-mechanism-ic-patterns";
        let lowered = mechanisms::ic_report(params, &mechanisms::agent_preferred_lowered(params))
            .expect("length matches");
        let extended = mechanisms::ic_report(params, &mechanisms::agent_preferred_extended(params))
            .expect("length matches");
        let lowered_ok =
            lowered.verdict_a == Verdict::Strict && lowered.verdict_b == Verdict::Binding;
        let extended_ok = if params.agent_cutoff() == 1 {
            extended.verdict_a == Verdict::Binding && extended.verdict_b == Verdict::Binding
        } else {
            extended.verdict_a == Verdict::Binding && extended.verdict_b == Verdict::Strict
        };
        checks.push(if lowered_ok && extended_ok {
            LemmaCheck::pass(name, "lowered: (strict, binding); extended: (binding, *)")
        } else {
            LemmaCheck::fail(
                name,
                format!(
                    "lowered {:?}/{:?}, extended {:?}/{:?}",
                    lowered.verdict_a, lowered.verdict_b, extended.verdict_a, extended.verdict_b
                ),
            )
        });
    }

    // (5) Vertex solutions have few fractional entries: at most one without
    // the a-constraint, at most two with it.
    {
        let name = "05-extreme-point-fractional-counts";
        let relaxed_count = relaxed.fractional_indices.len();
        let full_count = full.fractional_indices.len();
        checks.push(
            if relaxed_count <= 1 && full_count <= 2 {
                LemmaCheck::pass(name, format!("relaxed {relaxed_count}, full {full_count}"))
            } else {
                LemmaCheck::fail(name, format!("relaxed {relaxed_count}, full {full_count}"))
            }
            .with("relaxed_fractional", relaxed_count as f64)
            .with("full_fractional", full_count as f64),
        );
    }

    // (6) Sign and monotonicity pattern of the threshold-gap ratio. The
    // ratio decreases strictly in exact arithmetic; in floats the
    // successive gaps can shrink below resolution far from the cutoff, so
    // only an inversion counts as a failure.
    {
        let name = "06-threshold-gap-ratio-pattern";
        let k_j = params.agent_cutoff() as i64;
        let top = params.n_plus_1() as i64;
        let mut ok = true;
        for k in 0..=top {
            let w = mechanisms::threshold_gap_ratio(params, k);
            if k == k_j - 1 {
                ok &= w < 0.0;
            } else {
                ok &= w > 0.0;
            }
        }
        for k in 0..k_j - 2 {
            ok &= mechanisms::threshold_gap_ratio(params, k + 1)
                <= mechanisms::threshold_gap_ratio(params, k);
        }
        for k in k_j..top {
            ok &= mechanisms::threshold_gap_ratio(params, k + 1)
                <= mechanisms::threshold_gap_ratio(params, k);
        }
        checks.push(if ok {
            LemmaCheck::pass(name, "negative only below the cutoff, decreasing on both sides")
        } else {
            LemmaCheck::fail(name, "pattern broken")
        });
    }

    // (7) The virtual utility's nonnegative region is a tally interval for
    // every multiplier on the grid.
    {
        let name = "07-virtual-utility-sign-pattern";
        let mut ok = true;
        let mut broken_at = f64::NAN;
        for i in 0..=1000 {
            let mu = i as f64 * 0.01;
            let vu = solver_structured::virtual_utility(params, mu);
            let scale = vu
                .values
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(1e-300);
            if !solver_structured::sign_pattern_is_interval(&vu.values, 1e-12 * scale) {
                ok = false;
                broken_at = mu;
                break;
            }
        }
        checks.push(if ok {
            LemmaCheck::pass(name, "interval pattern on the whole multiplier grid")
        } else {
            LemmaCheck::fail(name, format!("pattern broken at mu = {broken_at}"))
        });
    }

    // (8) Under conflict, a monotone responsive optimal interval mechanism
    // can only be the lowered agent-preferred one.
    {
        let name = "08-monotone-optimum-is-lowered-agent-preferred";
        let mut applied = false;
        let mut ok = true;
        if conflict {
            let hat = mechanisms::agent_preferred_lowered(params);
            for rep in optimal_representatives(&structured) {
                let shape = mechanisms::classify(rep, 1e-9);
                if shape.is_interval()
                    && mechanisms::is_monotone(rep)
                    && mechanisms::is_responsive(rep)
                {
                    applied = true;
                    ok &= rep
                        .probs()
                        .iter()
                        .zip(hat.probs())
                        .all(|(a, b)| (a - b).abs() <= 1e-8);
                }
            }
        }
        checks.push(match (applied, ok) {
            (false, _) => LemmaCheck::vacuous(name, "no monotone responsive optimum"),
            (true, true) => LemmaCheck::pass(name, "monotone optimum matches the lowered mechanism"),
            (true, false) => LemmaCheck::fail(name, "monotone optimum differs from the lowered mechanism"),
        });
    }

    // (9) Above the certificate threshold every responsive optimum is
    // non-monotone.
    {
        let name = "09-nonmonotone-above-certificate";
        let mut check = match threshold {
            Some((t_bar, _)) if params.t_p() >= t_bar => {
                let responsive: Vec<_> = optimal_representatives(&structured)
                    .into_iter()
                    .filter(|rep| mechanisms::is_responsive(rep))
                    .collect();
                if responsive.is_empty() {
                    LemmaCheck::vacuous(name, "zero mechanism is optimal")
                } else if responsive.iter().all(|rep| !mechanisms::is_monotone(rep)) {
                    LemmaCheck::pass(name, "all responsive optima are non-monotone")
                } else {
                    LemmaCheck::fail(name, "a monotone responsive optimum above the certificate")
                }
            }
            Some(_) => LemmaCheck::vacuous(name, "threshold below the certificate"),
            None => LemmaCheck::vacuous(name, "no conflict"),
        };
        if let Some((t_bar, _)) = threshold {
            check = check.with("t_bar_P", t_bar).with("t_P", params.t_p());
        }
        checks.push(check);
    }

    TheoryReport {
        conflict,
        first_best_achievable: !conflict,
        t_bar_p: threshold.map(|(t, _)| t),
        c_prime: threshold.map(|(_, c)| c),
        lemma_results: checks,
    }
}

/// Seeded random-instance generation over the assumption polytope.
pub mod generator {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::model::ModelParams;

    fn near_integer(x: f64) -> bool {
        (x - x.round()).abs() < 1e-6
    }

    /// Draws a valid instance: committee size 2..=15, informative signal
    /// precisions, and thresholds log-uniform over the informative
    /// likelihood range (equivalently, uniform in preimage space), with
    /// near-indifferent draws rejected.
    pub fn random_instance<R: Rng>(rng: &mut R) -> ModelParams {
        loop {
            let n_plus_1: usize = rng.gen_range(2..=15);
            let p_beta: f64 = rng.gen_range(0.05..0.6);
            let p_alpha: f64 = rng.gen_range(p_beta + 0.1..0.95);
            let prior: f64 = rng.gen_range(0.2..0.8);
            let xi1: f64 = rng.gen_range(0.0..n_plus_1 as f64);
            let xi2: f64 = rng.gen_range(0.0..n_plus_1 as f64);
            if near_integer(xi1) || near_integer(xi2) {
                continue;
            }
            let log_l = |xi: f64| -> f64 {
                (prior / (1.0 - prior)).ln()
                    + xi * (p_alpha / p_beta).ln()
                    + (n_plus_1 as f64 - xi) * ((1.0 - p_alpha) / (1.0 - p_beta)).ln()
            };
            let (t_j, t_p) = if xi1 <= xi2 {
                (log_l(xi1).exp(), log_l(xi2).exp())
            } else {
                (log_l(xi2).exp(), log_l(xi1).exp())
            };
            if let Ok(params) = ModelParams::new(n_plus_1, prior, p_alpha, p_beta, t_p, t_j) {
                return params;
            }
        }
    }

    pub fn random_instances(seed: u64, count: usize) -> Vec<ModelParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| random_instance(&mut rng)).collect()
    }

    /// Draws a conflicted instance and re-draws the principal's threshold
    /// log-uniformly above the non-monotonicity certificate.
    pub fn conflicted_above_threshold<R: Rng>(rng: &mut R) -> ModelParams {
        loop {
            let base = random_instance(rng);
            if !base.conflict_of_interest() {
                continue;
            }
            let (t_bar, _) =
                super::nonmonotonicity_threshold(&base).expect("conflict checked above");
            let xi_bar = base.likelihood_preimage(t_bar);
            let n1 = base.n_plus_1() as f64;
            if xi_bar >= n1 - 1e-3 {
                continue;
            }
            for _ in 0..32 {
                let xi_p: f64 = rng.gen_range(xi_bar..n1);
                if near_integer(xi_p) {
                    continue;
                }
                let t_p = base.log_likelihood_real(xi_p).exp();
                if t_p <= t_bar {
                    continue;
                }
                if let Ok(params) = ModelParams::new(
                    base.n_plus_1(),
                    base.prior_alpha(),
                    base.p_alpha(),
                    base.p_beta(),
                    t_p,
                    base.t_j(),
                ) {
                    if params.conflict_of_interest() {
                        return params;
                    }
                }
            }
        }
    }
}
