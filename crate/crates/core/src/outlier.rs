//! Dictionary learning when up to `⌊ρn⌋` columns are arbitrary outliers.
//!
//! The iteration is the same as [`crate::pursuit`] and touches every column,
//! but the run continues only while each step removes at least
//! `δ = βε³/(16mΛ)` of `‖X‖_F²` from `Φ = Σ_i ‖z_i‖²`. At the end the `⌊ρn⌋`
//! columns with the largest residuals are declared outliers, and the error on
//! the rest is `ψ̂ = min_{|T| = n − ⌊ρn⌋} Σ_{i∈T} ‖z_i‖²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DictModel, ResidualState, SignalMatrix};
use crate::pursuit::{
    active_columns, ceil_u64, commit_atom, no_progress, propose_updates, residual_instance,
    LearnConfig,
};
use crate::tc::{BicriteriaSolver, CandidateScan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierConfig {
    #[serde(flatten)]
    pub learn: LearnConfig,
    /// Outlier fraction `ρ ∈ [0, 1)`.
    pub rho: f64,
}

impl OutlierConfig {
    pub fn new(learn: LearnConfig, rho: f64) -> Result<Self> {
        let c = Self { learn, rho };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.learn.validate()?;
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        Ok(())
    }

    /// `⌊ρn⌋`, never more than `n − 1`.
    pub fn outlier_count(&self, n: usize) -> usize {
        outlier_count(self.rho, n)
    }

    /// `δ = βε³/(16mΛ)` for a solver with parameter `beta`.
    pub fn stop_threshold_for(&self, beta: f64) -> f64 {
        let l = &self.learn;
        beta * l.epsilon.powi(3) / (16.0 * l.m as f64 * l.lambda)
    }

    pub fn stop_threshold(&self) -> f64 {
        self.stop_threshold_for(self.learn.beta())
    }

    /// `⌈16mΛ/(ε³β)⌉`.
    pub fn iteration_cap_for(&self, beta: f64) -> u64 {
        let l = &self.learn;
        ceil_u64(16.0 * l.m as f64 * l.lambda / (l.epsilon.powi(3) * beta))
    }

    pub fn iteration_cap(&self) -> u64 {
        self.iteration_cap_for(self.learn.beta())
    }
}

pub(crate) fn outlier_count(rho: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    // 1e-9 absorbs representation error in products such as 0.1 * 30.
    let r = (rho * n as f64 + 1e-9).floor() as usize;
    r.min(n - 1)
}

/// Sum of the `n − ⌊ρn⌋` smallest entries of `sq_norms`.
pub fn psi_hat_from_sq_norms(sq_norms: &[f64], rho: f64) -> f64 {
    if outlier_count(rho, sq_norms.len()) == 0 {
        // Same summation order as Φ, so ρ = 0 reproduces it bit for bit.
        return sq_norms.iter().sum();
    }
    let mut sorted = sq_norms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let keep = sorted.len() - outlier_count(rho, sq_norms.len());
    sorted[..keep].iter().sum()
}

/// `ψ̂⁽ᵗ⁾` of a residual state.
pub fn psi_hat(residuals: &ResidualState, rho: f64) -> f64 {
    psi_hat_from_sq_norms(residuals.sq_norms(), rho)
}

/// The `count` columns with the largest residual norm, lower index first among
/// equals; returned in ascending index order.
pub fn declare_outliers(sq_norms: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sq_norms.len()).collect();
    order.sort_by(|&a, &b| sq_norms[b].total_cmp(&sq_norms[a]).then(a.cmp(&b)));
    let mut out: Vec<usize> = order.into_iter().take(count).collect();
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierTermination {
    /// `ψ̂⁽⁰⁾ < ε‖X‖_F²`: nothing to learn.
    EarlyReturn,
    /// The next step would have removed less than `δ‖X‖_F²`.
    PhiStall,
    DegenerateTc,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierRecord {
    pub t: usize,
    pub phi: f64,
    pub psi_hat: f64,
    /// `(Φ⁽ᵗ⁻¹⁾ − Φ⁽ᵗ⁾) / ‖X‖_F²`.
    pub phi_drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierResult {
    pub model: DictModel,
    pub outlier_indices: Vec<usize>,
    pub psi_hat_final: f64,
    pub initial_psi_hat: f64,
    pub trace: Vec<OutlierRecord>,
    pub termination: OutlierTermination,
    /// Normalized drop of the step that ended the run (not applied).
    pub rejected_drop: Option<f64>,
    /// Final `‖z_i‖²` per column.
    pub residual_sq_norms: Vec<f64>,
    pub stop_threshold: f64,
    pub iteration_cap: u64,
}

impl OutlierResult {
    /// `N'`: for each declared outlier, the part of `x_i` left unexplained by
    /// `A'Y'`.
    pub fn outlier_columns(&self, x: &SignalMatrix) -> Vec<(usize, Vec<f64>)> {
        self.outlier_indices
            .iter()
            .map(|&i| (i, self.model.residual_column(x, i)))
            .collect()
    }

    /// `‖X − A'Y' − N'‖_F²`.
    pub fn decomposition_error(&self, x: &SignalMatrix) -> Result<f64> {
        let errs = self.model.residual_sq_norms(x)?;
        let mut is_outlier = vec![false; x.len()];
        for &i in &self.outlier_indices {
            is_outlier[i] = true;
        }
        Ok(errs
            .iter()
            .zip(&is_outlier)
            .filter(|(_, &o)| !o)
            .map(|(e, _)| e)
            .sum())
    }
}

pub fn outlier_dict_approx(x: &SignalMatrix, config: &OutlierConfig) -> Result<OutlierResult> {
    outlier_dict_approx_with(&CandidateScan, x, config)
}

pub fn outlier_dict_approx_with<S: BicriteriaSolver>(
    solver: &S,
    x: &SignalMatrix,
    config: &OutlierConfig,
) -> Result<OutlierResult> {
    config.validate()?;
    let learn = &config.learn;
    let tau = learn.tau();
    let alpha = solver.alpha(tau);
    let beta = solver.beta(tau);
    let delta = config.stop_threshold_for(beta);
    let cap = config.iteration_cap_for(beta);
    let max_iters = learn.max_iters_override.map_or(cap, |o| o.min(cap));
    let n_out = config.outlier_count(x.len());
    let frob = x.frob_sq();

    let mut state = ResidualState::new(x);
    let mut model = DictModel::empty(x.len());
    let initial_psi_hat = psi_hat(&state, config.rho);
    let mut result = OutlierResult {
        model: DictModel::empty(0),
        outlier_indices: Vec::new(),
        psi_hat_final: initial_psi_hat,
        initial_psi_hat,
        trace: Vec::new(),
        termination: OutlierTermination::MaxIters,
        rejected_drop: None,
        residual_sq_norms: Vec::new(),
        stop_threshold: delta,
        iteration_cap: cap,
    };

    if initial_psi_hat < learn.epsilon * frob || frob == 0.0 {
        result.termination = OutlierTermination::EarlyReturn;
    } else {
        let active = active_columns(x);
        let accept = alpha * tau;
        let mut t: u64 = 0;
        while t < max_iters {
            let inst = residual_instance(x, &state, &active, tau)?;
            let sol = solver.solve(&inst);
            if no_progress(&sol, frob) {
                result.termination = OutlierTermination::DegenerateTc;
                break;
            }
            let updates = propose_updates(x, &state, &active, &sol.x, accept);
            let removed: f64 = updates
                .iter()
                .map(|u| state.sq_norms()[u.column] - u.sq_norm)
                .sum();
            let drop = removed / frob;
            if drop < delta {
                result.termination = OutlierTermination::PhiStall;
                result.rejected_drop = Some(drop);
                break;
            }
            let phi_before = state.phi();
            commit_atom(&mut model, &mut state, sol.x, updates);
            t += 1;
            result.trace.push(OutlierRecord {
                t: t as usize,
                phi: state.phi(),
                psi_hat: psi_hat(&state, config.rho),
                phi_drop: (phi_before - state.phi()) / frob,
            });
        }
    }

    result.psi_hat_final = psi_hat(&state, config.rho);
    result.outlier_indices = declare_outliers(state.sq_norms(), n_out);
    result.residual_sq_norms = state.sq_norms().to_vec();
    result.model = model;
    Ok(result)
}
