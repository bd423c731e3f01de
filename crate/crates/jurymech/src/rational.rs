//! Exact rational arithmetic mirror of the model and coefficient layer.
//! Used by the rational solver modes, where binding constraints and optimal
//! values come out exact rather than within a tolerance.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::mechanisms::LpInstance;
use crate::model::{AssumptionReport, ModelParams};
use crate::{Error, Result};

pub type Rat = BigRational;

pub fn rat(numer: i64, denom: i64) -> Rat {
    Rat::new(BigInt::from(numer), BigInt::from(denom))
}

/// Parses an integer, a decimal, or a `p/q` fraction into an exact rational.
pub fn parse_rat(text: &str) -> Result<Rat> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::RationalParse(text.to_string()))?;
        let den: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::RationalParse(text.to_string()))?;
        if den.is_zero() {
            return Err(Error::RationalParse(text.to_string()));
        }
        return Ok(Rat::new(num, den));
    }
    if let Ok(int) = text.parse::<BigInt>() {
        return Ok(Rat::from_integer(int));
    }
    let float: f64 = text
        .parse()
        .map_err(|_| Error::RationalParse(text.to_string()))?;
    Rat::from_float(float).ok_or_else(|| Error::RationalParse(text.to_string()))
}

/// An exactly represented problem instance. Validation mirrors
/// [`ModelParams`] but with exact comparisons: the no-indifference check
/// rejects thresholds exactly equal to some likelihood value.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactParams {
    n_plus_1: usize,
    prior_alpha: Rat,
    p_alpha: Rat,
    p_beta: Rat,
    t_p: Rat,
    t_j: Rat,
}

impl ExactParams {
    pub fn new(
        n_plus_1: usize,
        prior_alpha: Rat,
        p_alpha: Rat,
        p_beta: Rat,
        t_p: Rat,
        t_j: Rat,
    ) -> Result<Self> {
        if n_plus_1 < 2 {
            return Err(Error::AgentCount(n_plus_1));
        }
        for (name, value) in [
            ("prior_alpha", &prior_alpha),
            ("p_alpha", &p_alpha),
            ("p_beta", &p_beta),
        ] {
            if !(value > &Rat::zero() && value < &Rat::one()) {
                return Err(Error::ProbabilityRange {
                    name,
                    value: crate::simplex::LpScalar::to_f64(value),
                });
            }
        }
        if p_alpha <= p_beta {
            return Err(Error::UninformativeSignals {
                p_alpha: crate::simplex::LpScalar::to_f64(&p_alpha),
                p_beta: crate::simplex::LpScalar::to_f64(&p_beta),
            });
        }
        for (name, value) in [("t_P", &t_p), ("t_J", &t_j)] {
            if !value.is_positive() {
                return Err(Error::ThresholdRange {
                    name,
                    value: crate::simplex::LpScalar::to_f64(value),
                });
            }
        }
        let candidate = ExactParams {
            n_plus_1,
            prior_alpha,
            p_alpha,
            p_beta,
            t_p,
            t_j,
        };
        let report = candidate.assumption_report();
        if !report.all_pass() {
            return Err(Error::AssumptionViolated(report));
        }
        Ok(candidate)
    }

    /// Lifts validated float parameters exactly (every finite `f64` is a
    /// dyadic rational).
    pub fn from_model(params: &ModelParams) -> Self {
        let lift = |x: f64| Rat::from_float(x).expect("validated parameters are finite");
        ExactParams {
            n_plus_1: params.n_plus_1(),
            prior_alpha: lift(params.prior_alpha()),
            p_alpha: lift(params.p_alpha()),
            p_beta: lift(params.p_beta()),
            t_p: lift(params.t_p()),
            t_j: lift(params.t_j()),
        }
    }

    fn assumption_report(&self) -> AssumptionReport {
        let mut messages = Vec::new();
        let a1 = self.t_p >= self.t_j;
        if !a1 {
            messages.push(format!(
                "assumption 1 violated: t_P ({}) must be at least t_J ({})",
                self.t_p, self.t_j
            ));
        }
        let l0 = self.likelihood(0);
        let ltop = self.likelihood(self.n_plus_1 as i64);
        let mut a2 = true;
        if self.t_j <= l0 {
            a2 = false;
            messages.push(format!(
                "assumption 2 violated: t_J ({}) must exceed L(0) ({l0})",
                self.t_j
            ));
        }
        if self.t_p >= ltop {
            a2 = false;
            messages.push(format!(
                "assumption 2 violated: t_P ({}) must be below L({}) ({ltop})",
                self.t_p, self.n_plus_1
            ));
        }
        let mut a3 = true;
        for (name, t) in [("t_J", &self.t_j), ("t_P", &self.t_p)] {
            for k in 0..=self.n_plus_1 as i64 {
                if *t == self.likelihood(k) {
                    a3 = false;
                    messages.push(format!(
                        "assumption 3 violated for {name}: threshold equals L({k}) exactly"
                    ));
                }
            }
        }
        AssumptionReport {
            a1_ordering: a1,
            a2_no_partisans: a2,
            a3_no_indifference: a3,
            messages,
        }
    }

    pub fn n_plus_1(&self) -> usize {
        self.n_plus_1
    }

    pub fn t_p(&self) -> &Rat {
        &self.t_p
    }

    pub fn t_j(&self) -> &Rat {
        &self.t_j
    }

    /// Exact relative likelihood of state alpha after `k` a-signals.
    pub fn likelihood(&self, k: i64) -> Rat {
        let prior = self.prior_alpha.clone() / (Rat::one() - self.prior_alpha.clone());
        let ra = self.p_alpha.clone() / self.p_beta.clone();
        let rb = (Rat::one() - self.p_alpha.clone()) / (Rat::one() - self.p_beta.clone());
        prior * ra.pow(k as i32) * rb.pow(self.n_plus_1 as i32 - k as i32)
    }

    pub fn cutoff(&self, threshold: &Rat) -> usize {
        for k in 1..=self.n_plus_1 {
            if self.likelihood(k as i64) > *threshold {
                return k;
            }
        }
        unreachable!("assumption 2 keeps thresholds below L(n+1)")
    }

    pub fn agent_cutoff(&self) -> usize {
        self.cutoff(&self.t_j)
    }

    pub fn principal_cutoff(&self) -> usize {
        self.cutoff(&self.t_p)
    }

    pub fn conflict_of_interest(&self) -> bool {
        self.agent_cutoff() < self.principal_cutoff()
    }
}

/// Exact binomial pmf with the out-of-range-tally convention.
pub fn binom_pmf_exact(p: &Rat, k: i64, n: usize) -> Rat {
    if k < 0 || k as usize > n {
        return Rat::zero();
    }
    let k = k as usize;
    let choose = num_integer::binomial(BigInt::from(n), BigInt::from(k));
    Rat::from_integer(choose) * p.pow(k as i32) * (Rat::one() - p.clone()).pow((n - k) as i32)
}

/// Exact LP coefficients, straight from the defining expressions.
pub fn build_lp_exact(params: &ExactParams) -> LpInstance<Rat> {
    let n1 = params.n_plus_1();
    let n = n1 - 1;
    let pb = &params.p_beta;
    let one_minus_pb = Rat::one() - pb.clone();
    let mut v = Vec::with_capacity(n1 + 1);
    let mut a = Vec::with_capacity(n1 + 1);
    let mut b = Vec::with_capacity(n1 + 1);
    for k in 0..=n1 as i64 {
        let l_k = params.likelihood(k);
        v.push(binom_pmf_exact(pb, k, n1) * (l_k.clone() - params.t_p.clone()));
        let bin_n = binom_pmf_exact(pb, k, n);
        if bin_n.is_zero() {
            a.push(Rat::zero());
            b.push(Rat::zero());
        } else {
            let l_k1 = params.likelihood(k + 1);
            a.push(bin_n.clone() * pb.clone() * (l_k1 - params.t_j.clone()));
            b.push(bin_n * one_minus_pb.clone() * (l_k - params.t_j.clone()));
        }
    }
    let diff = |c: &[Rat]| -> Vec<Rat> {
        (0..c.len())
            .map(|k| {
                if k == 0 {
                    c[0].clone()
                } else {
                    c[k].clone() - c[k - 1].clone()
                }
            })
            .collect()
    };
    let da = diff(&a);
    let db = diff(&b);
    LpInstance { v, a, b, da, db }
}

/// Exact counterpart of the lowered agent-preferred mechanism; the
/// fractional entry comes out as an exact ratio of coefficient gaps.
pub fn agent_preferred_lowered_exact(params: &ExactParams) -> Vec<Rat> {
    let lp = build_lp_exact(params);
    let k_j = params.agent_cutoff();
    let mut probs = vec![Rat::zero(); params.n_plus_1() + 1];
    for (k, prob) in probs.iter_mut().enumerate() {
        if k > k_j {
            *prob = Rat::one();
        }
    }
    probs[k_j] = lp.b[k_j].clone() / (lp.b[k_j].clone() - lp.b[k_j - 1].clone());
    probs
}
