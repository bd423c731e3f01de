//! Shared test fixtures and independent brute-force oracles. Everything in
//! here deliberately avoids the library's log-space code paths so tests
//! cross-check two distinct computations.

use proptest::prelude::*;

use crate::mechanisms::VotingMechanism;
use crate::model::ModelParams;

/// Two agents, prior 1/2, precisions (2/3, 1/3), thresholds (1.5, 0.5).
pub(crate) fn f2() -> ModelParams {
    ModelParams::new(2, 0.5, 2.0 / 3.0, 1.0 / 3.0, 1.5, 0.5).unwrap()
}

/// F2 signal structure with custom thresholds.
pub(crate) fn f2_with(t_p: f64, t_j: f64) -> ModelParams {
    ModelParams::new(2, 0.5, 2.0 / 3.0, 1.0 / 3.0, t_p, t_j).unwrap()
}

/// Nine agents, prior 1/2, precisions (2/3, 1/3), thresholds (1.0, 0.05).
pub(crate) fn f9() -> ModelParams {
    ModelParams::new(9, 0.5, 2.0 / 3.0, 1.0 / 3.0, 1.0, 0.05).unwrap()
}

pub(crate) fn mech(probs: Vec<f64>) -> VotingMechanism {
    VotingMechanism::new(probs).unwrap()
}

pub(crate) fn assert_close(actual: f64, expected: f64, tol: f64) {
    let scale = 1f64.max(expected.abs());
    assert!(
        (actual - expected).abs() <= tol * scale,
        "expected {expected}, got {actual} (tol {tol})"
    );
}

/// Binomial pmf by direct multiplicative evaluation (no logs).
pub(crate) fn naive_binom(p: f64, k: i64, n: usize) -> f64 {
    if k < 0 || k as usize > n {
        return 0.0;
    }
    let k = k as usize;
    let mut choose = 1.0;
    for i in 1..=k {
        choose *= (n - k + i) as f64 / i as f64;
    }
    choose * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// Likelihood ratio by direct power evaluation (no logs).
pub(crate) fn naive_likelihood(params: &ModelParams, k: i64) -> f64 {
    let prior = params.prior_alpha() / (1.0 - params.prior_alpha());
    let ra = params.p_alpha() / params.p_beta();
    let rb = (1.0 - params.p_alpha()) / (1.0 - params.p_beta());
    prior * ra.powi(k as i32) * rb.powi(params.n_plus_1() as i32 - k as i32)
}

/// The definitional (v, a, b) coefficient vectors, evaluated directly from
/// binomial masses under the beta state. Independent of `build_lp`.
pub(crate) fn naive_vab(params: &ModelParams) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n1 = params.n_plus_1();
    let n = n1 - 1;
    let pb = params.p_beta();
    let mut v = Vec::with_capacity(n1 + 1);
    let mut a = Vec::with_capacity(n1 + 1);
    let mut b = Vec::with_capacity(n1 + 1);
    for k in 0..=n1 as i64 {
        let l_k = naive_likelihood(params, k);
        let l_k1 = naive_likelihood(params, k + 1);
        v.push(naive_binom(pb, k, n1) * (l_k - params.t_p()));
        a.push(naive_binom(pb, k, n) * pb * (l_k1 - params.t_j()));
        b.push(naive_binom(pb, k, n) * (1.0 - pb) * (l_k - params.t_j()));
    }
    (v, a, b)
}

/// Valid random instances, parameterized so the assumption polytope is hit
/// by construction: thresholds are placed via their likelihood preimage at
/// least 0.1 away from any integer. The ranges keep every binomial mass and
/// threshold gap resolvable at f64 precision, so strict-vs-binding verdicts
/// are well defined; the wide generator in the theory module covers the
/// full domain instead.
pub(crate) fn params_strategy() -> impl Strategy<Value = ModelParams> {
    (2usize..=12)
        .prop_flat_map(|n1| {
            (
                Just(n1),
                0.25f64..0.5,
                0.0f64..1.0,
                0.2f64..0.8,
                0..n1,
                0..n1,
                0.1f64..0.9,
                0.1f64..0.9,
            )
        })
        .prop_map(|(n1, p_beta, pa_frac, prior, cell1, cell2, f1, f2)| {
            let pa_lo = p_beta + 0.2;
            let p_alpha = pa_lo + pa_frac * (0.75 - pa_lo);
            let xi1 = cell1 as f64 + f1;
            let xi2 = cell2 as f64 + f2;
            let (xi_j, xi_p) = if xi1 <= xi2 { (xi1, xi2) } else { (xi2, xi1) };
            let log_l = |xi: f64| -> f64 {
                let prior_term = (prior / (1.0 - prior)).ln();
                let ra = (p_alpha / p_beta).ln();
                let rb = ((1.0 - p_alpha) / (1.0 - p_beta)).ln();
                prior_term + xi * ra + (n1 as f64 - xi) * rb
            };
            let t_j = log_l(xi_j).exp();
            let t_p = log_l(xi_p).exp();
            ModelParams::new(n1, prior, p_alpha, p_beta, t_p, t_j)
                .expect("preimages stay clear of integers, so all assumptions hold")
        })
}

/// A valid instance together with an arbitrary mechanism of matching length.
pub(crate) fn params_and_mech_strategy() -> impl Strategy<Value = (ModelParams, VotingMechanism)> {
    params_strategy().prop_flat_map(|p| {
        let len = p.n_plus_1() + 1;
        (
            Just(p),
            proptest::collection::vec(0.0f64..=1.0, len)
                .prop_map(|v| VotingMechanism::new(v).unwrap()),
        )
    })
}
