//! Certified lower bounds on `‖A‖_{2→p} = max_{x≠0} ‖Ax‖_p / ‖x‖₂`, `p > 2`.
//!
//! The rows `v_i` of `A` (scaled into the unit ball) become a unit-weight τ-TC
//! instance. Sweeping τ over the levels `2^{-j}` and keeping the best witness
//! found by the bi-criteria solver gives a vector whose `‖Ax‖_p` is within a
//! level-dependent factor of the optimum; every value reported is the exact
//! objective of the returned witness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, norm};
use crate::tc::{solve_bicriteria, BicriteriaSolver, CandidateScan, TcInstance, MIN_CANDIDATE_NORM};

/// Smallest correlation scale the level grid resolves.
pub const LEVEL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct NormInstance {
    rows: Vec<Vec<f64>>,
    dim: usize,
    p: f64,
    row_scale: f64,
}

impl NormInstance {
    /// `rows` are the rows of the `n × d` matrix `A`.
    pub fn new(rows: Vec<Vec<f64>>, p: f64) -> Result<Self> {
        if !(p > 2.0 && p.is_finite()) {
            return Err(Error::Contract(format!("p must be a finite value > 2, got {p}")));
        }
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::Input("matrix must have at least one row and column".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Input(format!(
                    "row {i} has {} entries, expected {dim}",
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("row {i} has a non-finite entry")));
            }
        }
        let row_scale = rows.iter().map(|r| norm(r)).fold(0.0, f64::max);
        Ok(Self {
            rows,
            dim,
            p,
            row_scale,
        })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `max_i ‖v_i‖`, the factor divided out of every row.
    pub fn row_scale(&self) -> f64 {
        self.row_scale
    }
}

/// `‖y‖_p`, computed relative to `max |y_i|` to stay in range.
fn p_norm(y: &[f64], p: f64) -> f64 {
    let top = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if top == 0.0 {
        return 0.0;
    }
    let s: f64 = y.iter().map(|v| (v.abs() / top).powf(p)).sum();
    top * s.powf(1.0 / p)
}

/// `‖Ax‖_p / ‖x‖₂` for the matrix with the given rows.
pub fn eval_2_to_p(rows: &[Vec<f64>], p: f64, x: &[f64]) -> Result<f64> {
    let xn = norm(x);
    if xn == 0.0 || !xn.is_finite() {
        return Err(Error::Contract("x must be a nonzero finite vector".into()));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != x.len()) {
        return Err(Error::Dimension {
            expected: r.len(),
            got: x.len(),
        });
    }
    let y: Vec<f64> = rows.iter().map(|r| dot(r, x)).collect();
    Ok(p_norm(&y, p) / xn)
}

/// Number of τ levels: `j = 0..=J` with `J = ⌈log₂(4n)⌉ + ⌈p·log₂(1/η)⌉`.
pub fn level_count(n: usize, p: f64) -> usize {
    let j = (4.0 * n as f64).log2().ceil() + (p * (1.0 / LEVEL_FLOOR).log2()).ceil();
    j as usize + 1
}

/// Guarantee factor of a level: with an `(α, β)` solver the witness satisfies
/// `‖Ax‖_p ≥ factor · ‖A‖_{2→p}`, where
/// `factor = (α^{(p−2)/2} β / (2^{p/2+1} (log₂ n + 1)))^{1/p}`.
pub fn level_guarantee(alpha: f64, beta: f64, p: f64, n: usize) -> f64 {
    let log_n = (n.max(1) as f64).log2();
    (alpha.powf((p - 2.0) / 2.0) * beta / (2f64.powf(p / 2.0 + 1.0) * (log_n + 1.0))).powf(1.0 / p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBound {
    /// `‖A·witness‖_p`; the witness is a unit vector.
    pub value: f64,
    pub witness: Vec<f64>,
    /// τ of the winning level; `None` when a direct row witness won outright
    /// or the matrix is zero.
    pub level: Option<f64>,
    pub row_scale: f64,
}

pub fn lower_bound_2_to_p(inst: &NormInstance) -> NormBound {
    let mut e1 = vec![0.0; inst.dim];
    e1[0] = 1.0;
    if inst.row_scale == 0.0 {
        return NormBound {
            value: 0.0,
            witness: e1,
            level: None,
            row_scale: 0.0,
        };
    }
    let scaled: Vec<Vec<f64>> = inst
        .rows
        .iter()
        .map(|r| r.iter().map(|v| v / inst.row_scale).collect())
        .collect();
    let weights = vec![1.0; scaled.len()];
    let value_of = |x: &[f64]| eval_2_to_p(&inst.rows, inst.p, x).unwrap_or(0.0);

    let mut best: Option<(f64, Vec<f64>, Option<f64>)> = None;
    let mut offer = |value: f64, x: Vec<f64>, level: Option<f64>| {
        if best.as_ref().is_none_or(|(b, _, _)| value > *b) {
            best = Some((value, x, level));
        }
    };

    for j in 0..level_count(scaled.len(), inst.p) {
        let tau = 0.5f64.powi(j as i32);
        let tc = TcInstance::new(&scaled, weights.clone(), tau)
            .expect("scaled rows lie in the unit ball");
        let sol = solve_bicriteria(&tc);
        if !sol.degenerate {
            offer(value_of(&sol.x), sol.x, Some(tau));
        }
    }
    for r in &inst.rows {
        let n = norm(r);
        if n >= MIN_CANDIDATE_NORM {
            let x: Vec<f64> = r.iter().map(|v| v / n).collect();
            offer(value_of(&x), x, None);
        }
    }

    let (value, witness, level) = best.unwrap_or((value_of(&e1), e1, None));
    NormBound {
        value,
        witness,
        level,
        row_scale: inst.row_scale,
    }
}

/// Guarantee factor of the level a bound came from, using the candidate-scan
/// `(α, β) = (τ/4, τ²/32)` at that level.
pub fn achieved_guarantee(bound: &NormBound, p: f64, n: usize) -> Option<f64> {
    bound
        .level
        .map(|tau| level_guarantee(CandidateScan.alpha(tau), CandidateScan.beta(tau), p, n))
}
