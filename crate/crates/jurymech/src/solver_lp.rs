//! Independent oracle: solves the instance's full linear program (box
//! constraints plus both incentive rows) with the generic bounded-variable
//! simplex, in float or exact rational arithmetic. Degenerate ties are
//! detected by re-solving over the optimal face with a secondary objective.

use num_traits::Zero;

use crate::mechanisms::{self, LpInstance, VotingMechanism};
use crate::model::ModelParams;
use crate::rational::{build_lp_exact, ExactParams, Rat};
use crate::simplex::{self, LpScalar, Row, RowOp};

/// Arithmetic backend for a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithMode {
    Float,
    Rational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Multiple optima: a second distinct optimal mechanism is reported in
    /// `alternate`.
    DegenerateTie,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::DegenerateTie => "Degenerate-tie",
        }
    }
}

/// Result of one solve, in float precision regardless of the backend.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x: VotingMechanism,
    pub objective_v_units: f64,
    pub binding_a: bool,
    pub binding_b: bool,
    /// Tallies with a strictly interior probability after snapping at 1e-9.
    pub fractional_indices: Vec<usize>,
    pub status: SolveStatus,
    pub alternate: Option<VotingMechanism>,
}

impl SolveResult {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "x": self.x.probs(),
            "objective": self.objective_v_units,
            "binding_a": self.binding_a,
            "binding_b": self.binding_b,
            "status": self.status.as_str(),
        })
    }
}

/// Exact counterpart kept by the rational backend; `binding` flags are
/// exact-zero tests.
#[derive(Clone, Debug)]
pub struct ExactSolveResult {
    pub x: Vec<Rat>,
    pub objective: Rat,
    pub binding_a: bool,
    pub binding_b: bool,
    pub status: SolveStatus,
    pub alternate: Option<Vec<Rat>>,
}

impl ExactSolveResult {
    pub fn to_solve_result(&self) -> SolveResult {
        let probs: Vec<f64> = self.x.iter().map(|r| r.to_f64()).collect();
        let x = VotingMechanism::new(probs).expect("exact solution lies in the box");
        let fractional_indices = fractional_indices(x.probs());
        SolveResult {
            x,
            objective_v_units: self.objective.to_f64(),
            binding_a: self.binding_a,
            binding_b: self.binding_b,
            fractional_indices,
            status: self.status,
            alternate: self.alternate.as_ref().map(|alt| {
                VotingMechanism::new(alt.iter().map(|r| r.to_f64()).collect())
                    .expect("exact solution lies in the box")
            }),
        }
    }
}

pub(crate) fn fractional_indices(probs: &[f64]) -> Vec<usize> {
    probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 1e-9 && p < 1.0 - 1e-9)
        .map(|(k, _)| k)
        .collect()
}

fn ic_rows<S: LpScalar>(lp: &LpInstance<S>, relaxed: bool) -> Vec<Row<S>> {
    let mut rows = Vec::new();
    if !relaxed {
        rows.push(Row {
            coeffs: lp.da.clone(),
            op: RowOp::Le,
            rhs: S::zero(),
        });
    }
    rows.push(Row {
        coeffs: lp.db.clone(),
        op: RowOp::Ge,
        rhs: S::zero(),
    });
    rows
}

fn unit_box<S: LpScalar>(len: usize) -> Vec<(S, S)> {
    (0..len).map(|_| (S::zero(), S::one())).collect()
}

/// Core driver: primal solve, then two lexicographic re-solves over the
/// optimal face (maximizing and minimizing total mass) to detect ties.
fn solve_generic<S: LpScalar>(
    lp: &LpInstance<S>,
    relaxed: bool,
    coord_tol: S,
) -> (Vec<S>, S, SolveStatus, Option<Vec<S>>) {
    let len = lp.v.len();
    let bounds = unit_box::<S>(len);
    let rows = ic_rows(lp, relaxed);
    let primary = simplex::maximize(&lp.v, &bounds, &rows)
        .expect("the zero mechanism is feasible and the box bounds the objective");

    let mut face_rows = rows.clone();
    face_rows.push(Row {
        coeffs: lp.v.clone(),
        op: RowOp::Ge,
        rhs: primary.objective.clone() - S::opt_tol(),
    });
    let ones: Vec<S> = (0..len).map(|_| S::one()).collect();
    let neg_ones: Vec<S> = (0..len).map(|_| -S::one()).collect();
    let heavy = simplex::maximize(&ones, &bounds, &face_rows)
        .expect("the optimal face is nonempty");
    let light = simplex::maximize(&neg_ones, &bounds, &face_rows)
        .expect("the optimal face is nonempty");

    let differs = |a: &[S], b: &[S]| -> bool {
        a.iter()
            .zip(b)
            .any(|(ai, bi)| (ai.clone() - bi.clone()).abs() > coord_tol)
    };
    let mut status = SolveStatus::Optimal;
    let mut alternate = None;
    if differs(&heavy.x, &light.x) {
        status = SolveStatus::DegenerateTie;
        alternate = if differs(&heavy.x, &primary.x) {
            Some(heavy.x)
        } else {
            Some(light.x)
        };
    }
    (primary.x, primary.objective, status, alternate)
}

fn float_result(lp: &LpInstance, x: Vec<f64>, objective: f64, status: SolveStatus, alternate: Option<Vec<f64>>) -> SolveResult {
    let x = VotingMechanism::new(x).expect("simplex keeps iterates inside the box");
    let report = mechanisms::ic_report_from_lp(lp, x.probs());
    SolveResult {
        fractional_indices: fractional_indices(x.probs()),
        binding_a: report.verdict_a == mechanisms::Verdict::Binding,
        binding_b: report.verdict_b == mechanisms::Verdict::Binding,
        objective_v_units: objective,
        status,
        alternate: alternate
            .map(|alt| VotingMechanism::new(alt).expect("simplex keeps iterates inside the box")),
        x,
    }
}

fn solve_float(params: &ModelParams, relaxed: bool) -> SolveResult {
    let lp = mechanisms::build_lp(params);
    let (x, objective, status, alternate) = solve_generic(&lp, relaxed, 1e-6);
    float_result(&lp, x, objective, status, alternate)
}

fn exact_result(lp: &LpInstance<Rat>, x: Vec<Rat>, objective: Rat, status: SolveStatus, alternate: Option<Vec<Rat>>) -> ExactSolveResult {
    let dot = |c: &[Rat]| -> Rat {
        c.iter()
            .zip(&x)
            .map(|(ci, xi)| ci.clone() * xi.clone())
            .fold(Rat::zero(), |acc, term| acc + term)
    };
    ExactSolveResult {
        binding_a: dot(&lp.da).is_zero(),
        binding_b: dot(&lp.db).is_zero(),
        objective,
        status,
        alternate,
        x,
    }
}

fn solve_exact_params(params: &ExactParams, relaxed: bool) -> ExactSolveResult {
    let lp = build_lp_exact(params);
    let (x, objective, status, alternate) = solve_generic(&lp, relaxed, Rat::zero());
    exact_result(&lp, x, objective, status, alternate)
}

/// Maximizes the principal's objective subject to both incentive rows and
/// the box.
pub fn solve_full(params: &ModelParams, mode: ArithMode) -> SolveResult {
    match mode {
        ArithMode::Float => solve_float(params, false),
        ArithMode::Rational => solve_full_exact(&ExactParams::from_model(params)).to_solve_result(),
    }
}

/// Same, but with the a-signal constraint dropped.
pub fn solve_relaxed(params: &ModelParams, mode: ArithMode) -> SolveResult {
    match mode {
        ArithMode::Float => solve_float(params, true),
        ArithMode::Rational => {
            solve_relaxed_exact(&ExactParams::from_model(params)).to_solve_result()
        }
    }
}

pub fn solve_full_exact(params: &ExactParams) -> ExactSolveResult {
    solve_exact_params(params, false)
}

pub fn solve_relaxed_exact(params: &ExactParams) -> ExactSolveResult {
    solve_exact_params(params, true)
}

/// Checks a mechanism against the instance's constraints at the stated
/// feasibility tolerance: absolute on the box, relative to each row's
/// largest coefficient on the incentive rows.
pub fn is_feasible(params: &ModelParams, x: &VotingMechanism, tol: f64) -> bool {
    if x.probs().len() != params.n_plus_1() + 1 {
        return false;
    }
    if x.probs().iter().any(|&p| p < -tol || p > 1.0 + tol) {
        return false;
    }
    let lp = mechanisms::build_lp(params);
    let report = mechanisms::ic_report_from_lp(&lp, x.probs());
    report.ic_a_lhs <= tol * mechanisms::row_scale(&lp.da)
        && report.ic_b_lhs >= -tol * mechanisms::row_scale(&lp.db)
}
