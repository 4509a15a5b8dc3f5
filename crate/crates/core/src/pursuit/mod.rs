//! Greedy dictionary learning by threshold-correlation pursuit.
//!
//! Every iteration solves one τ-TC instance over the normalized residuals
//! `z_i / ‖x_i‖` with weights `‖x_i‖²`, appends the returned unit vector as a
//! new atom, and projects it out of every residual with
//! `⟨z_i, v⟩² ≥ ατ‖x_i‖²`.
//!
//! With `τ = ε²/(16kΛ)` and an `(α, β)` solver, after `t` iterations
//! `ψ⁽ᵗ⁾ ≤ γ* + 16mΛ/(βt)` for any feasible `(A*, Y*)`, and no code has more
//! than `⌈1/(ατ)⌉` entries.

mod analysis;

pub use analysis::{
    verify_analysis_inequalities, verify_convexity, verify_increment, AnalysisReport,
    ColumnPotentials, ConvexityReport, IncrementCase, IncrementReport,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{
    dot, norm_sq, ColumnUpdate, DictModel, ResidualState, SignalMatrix,
};
use crate::tc::{BicriteriaSolver, CandidateScan, TcInstance, TcSolution};

/// Iteration stops once the TC objective falls to this fraction of `‖X‖_F²`.
pub const MIN_PROGRESS: f64 = 1e-15;

/// Iteration stops once `ψ` reaches this level: below it the residual mass is
/// at the rounding floor of the reconstruction identity.
pub const PSI_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    /// Promised sparsity `k`.
    pub k: usize,
    /// Promised dictionary size `m`.
    pub m: usize,
    /// Norm bound `Λ ≥ 1` on `‖Y*_i‖² / ‖x_i‖²`.
    pub lambda: f64,
    /// Accuracy `ε ∈ (0, 1]`.
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters_override: Option<u64>,
}

impl LearnConfig {
    pub fn new(k: usize, m: usize, lambda: f64, epsilon: f64) -> Result<Self> {
        let c = Self {
            k,
            m,
            lambda,
            epsilon,
            max_iters_override: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_max_iters(mut self, iters: u64) -> Self {
        self.max_iters_override = Some(iters);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(Error::Config("k and m must be positive".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 1.0) {
            return Err(Error::Config(format!("lambda must be >= 1, got {}", self.lambda)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Config(format!(
                "epsilon must lie in (0, 1], got {}",
                self.epsilon
            )));
        }
        if self.max_iters_override == Some(0) {
            return Err(Error::Config("max iterations must be positive".into()));
        }
        Ok(())
    }

    /// `τ = ε² / (16kΛ)`.
    pub fn tau(&self) -> f64 {
        self.epsilon * self.epsilon / (16.0 * self.k as f64 * self.lambda)
    }

    /// `α = τ/4` of the candidate-scan solver.
    pub fn alpha(&self) -> f64 {
        CandidateScan.alpha(self.tau())
    }

    /// `β = τ²/32` of the candidate-scan solver.
    pub fn beta(&self) -> f64 {
        CandidateScan.beta(self.tau())
    }

    /// `⌈16mΛ/(βε)⌉` for a solver with parameter `beta`.
    pub fn iteration_budget_for(&self, beta: f64) -> u64 {
        ceil_u64(16.0 * self.m as f64 * self.lambda / (beta * self.epsilon))
    }

    /// `M = ⌈16mΛ/(βε)⌉`.
    pub fn iteration_budget(&self) -> u64 {
        self.iteration_budget_for(self.beta())
    }

    /// `⌈1/(ατ)⌉`, the most entries any code can receive.
    pub fn sparsity_cap_for(&self, alpha: f64) -> u64 {
        ceil_u64(1.0 / (alpha * self.tau()))
    }

    pub fn sparsity_cap(&self) -> u64 {
        self.sparsity_cap_for(self.alpha())
    }

    /// Iterations actually run: the override if set, else `M`.
    pub fn max_iters(&self) -> u64 {
        self.max_iters_override.unwrap_or_else(|| self.iteration_budget())
    }
}

pub(crate) fn ceil_u64(v: f64) -> u64 {
    if v >= u64::MAX as f64 {
        u64::MAX
    } else {
        v.ceil() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    MaxIters,
    DegenerateTc,
    PsiFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// `ψ⁽ᵗ⁾` after the iteration.
    pub psi: f64,
    /// `Φ⁽ᵗ⁾` after the iteration.
    pub phi: f64,
    /// TC objective of the atom chosen in this iteration; it equals the
    /// residual mass removed, `Φ⁽ᵗ⁻¹⁾ − Φ⁽ᵗ⁾`, up to rounding.
    pub tc_objective: f64,
    pub atoms: usize,
    pub max_support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnTrace {
    pub records: Vec<IterationRecord>,
    pub termination: TerminationReason,
    /// `ψ⁽⁰⁾`: 1 unless `X = 0`.
    pub initial_psi: f64,
    pub frob_sq: f64,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub iteration_budget: u64,
    pub sparsity_cap: u64,
}

impl LearnTrace {
    pub fn final_psi(&self) -> f64 {
        self.records.last().map_or(self.initial_psi, |r| r.psi)
    }

    /// `ψ` before iteration `t` (1-based).
    pub fn psi_before(&self, t: usize) -> f64 {
        if t <= 1 {
            self.initial_psi
        } else {
            self.records[t - 2].psi
        }
    }
}

/// Indices of columns with nonzero norm; the others never enter a TC instance.
pub(crate) fn active_columns(x: &SignalMatrix) -> Vec<usize> {
    (0..x.len()).filter(|&i| x.col_norm(i) > 0.0).collect()
}

/// TC instance over `z_i / ‖x_i‖` with weights `‖x_i‖²` for the active columns.
pub(crate) fn residual_instance(
    x: &SignalMatrix,
    state: &ResidualState,
    active: &[usize],
    tau: f64,
) -> Result<TcInstance> {
    let d = x.dim();
    let mut data = Vec::with_capacity(d * active.len());
    let mut weights = Vec::with_capacity(active.len());
    for &i in active {
        let n = x.col_norm(i);
        data.extend(state.residual(i).iter().map(|z| z / n));
        weights.push(n * n);
    }
    TcInstance::from_flat(d, data, weights, tau)
}

/// Projects `v` out of every active residual with `⟨z_i, v⟩² ≥ accept·‖x_i‖²`.
pub(crate) fn propose_updates(
    x: &SignalMatrix,
    state: &ResidualState,
    active: &[usize],
    v: &[f64],
    accept: f64,
) -> Vec<ColumnUpdate> {
    active
        .par_iter()
        .filter_map(|&i| {
            let z = state.residual(i);
            let c = dot(z, v);
            let xn = x.col_norm(i);
            if c * c >= accept * xn * xn {
                let residual: Vec<f64> = z.iter().zip(v).map(|(zi, vi)| zi - c * vi).collect();
                let sq_norm = norm_sq(&residual);
                Some(ColumnUpdate {
                    column: i,
                    coeff: c,
                    residual,
                    sq_norm,
                })
            } else {
                None
            }
        })
        .collect()
}

/// Appends `atom` and records its coefficients in the codes.
pub(crate) fn commit_atom(
    model: &mut DictModel,
    state: &mut ResidualState,
    atom: Vec<f64>,
    updates: Vec<ColumnUpdate>,
) {
    let j = model.atoms.len();
    model.atoms.push(atom);
    for u in &updates {
        model.codes[u.column].push((j, u.coeff));
    }
    state.commit(updates);
}

pub(crate) fn no_progress(sol: &TcSolution, frob_sq: f64) -> bool {
    sol.degenerate || sol.objective <= MIN_PROGRESS * frob_sq
}

/// Learns `(A', Y')` with the candidate-scan τ-TC solver.
pub fn dict_approx(x: &SignalMatrix, config: &LearnConfig) -> Result<(DictModel, LearnTrace)> {
    dict_approx_with(&CandidateScan, x, config)
}

/// Learns `(A', Y')` with any bi-criteria τ-TC solver.
pub fn dict_approx_with<S: BicriteriaSolver>(
    solver: &S,
    x: &SignalMatrix,
    config: &LearnConfig,
) -> Result<(DictModel, LearnTrace)> {
    config.validate()?;
    let tau = config.tau();
    let alpha = solver.alpha(tau);
    let beta = solver.beta(tau);
    let budget = config.iteration_budget_for(beta);
    let max_iters = config.max_iters_override.unwrap_or(budget);

    let mut state = ResidualState::new(x);
    let mut model = DictModel::empty(x.len());
    let mut trace = LearnTrace {
        records: Vec::new(),
        termination: TerminationReason::MaxIters,
        initial_psi: state.psi(),
        frob_sq: x.frob_sq(),
        tau,
        alpha,
        beta,
        iteration_budget: budget,
        sparsity_cap: config.sparsity_cap_for(alpha),
    };
    if x.frob_sq() == 0.0 {
        trace.termination = TerminationReason::PsiFloor;
        return Ok((model, trace));
    }

    let active = active_columns(x);
    let accept = alpha * tau;
    let mut t: u64 = 0;
    while t < max_iters {
        if state.psi() <= PSI_FLOOR {
            trace.termination = TerminationReason::PsiFloor;
            break;
        }
        let inst = residual_instance(x, &state, &active, tau)?;
        let sol = solver.solve(&inst);
        if no_progress(&sol, x.frob_sq()) {
            trace.termination = TerminationReason::DegenerateTc;
            break;
        }
        let updates = propose_updates(x, &state, &active, &sol.x, accept);
        commit_atom(&mut model, &mut state, sol.x, updates);
        t += 1;
        trace.records.push(IterationRecord {
            t: t as usize,
            psi: state.psi(),
            phi: state.phi(),
            tc_objective: sol.objective,
            atoms: model.atom_count(),
            max_support: state.max_support(),
        });
    }
    Ok((model, trace))
}

/// `γ*` of a reference decomposition, with the per-column fractions `γ_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaStar {
    pub value: f64,
    pub per_column: Vec<f64>,
}

/// `γ* = ‖X − A*Y*‖_F² / ‖X‖_F²` and `γ_i = ‖(X − A*Y*)_i‖² / ‖x_i‖²`.
///
/// Zero columns get `γ_i = 0`; an all-zero `X` gives `γ* = 0`.
pub fn compute_gamma_star(x: &SignalMatrix, truth: &DictModel) -> Result<GammaStar> {
    gamma_star_over(x, truth, &(0..x.len()).collect::<Vec<_>>())
}

/// [`compute_gamma_star`] restricted to the listed columns (e.g. the inliers);
/// `per_column` still covers every column of `X`.
pub fn gamma_star_over(x: &SignalMatrix, truth: &DictModel, columns: &[usize]) -> Result<GammaStar> {
    let errs = truth.residual_sq_norms(x)?;
    let per_column: Vec<f64> = errs
        .iter()
        .zip(x.col_norms())
        .map(|(e, n)| if *n > 0.0 { e / (n * n) } else { 0.0 })
        .collect();
    let mass: f64 = columns.iter().map(|&i| x.col_norm(i) * x.col_norm(i)).sum();
    let err: f64 = columns.iter().map(|&i| errs[i]).sum();
    let value = if mass > 0.0 { err / mass } else { 0.0 };
    Ok(GammaStar { value, per_column })
}
