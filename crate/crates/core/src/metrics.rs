//! Scoring a learned model against planted ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DictModel, SignalMatrix};
use crate::outlier::psi_hat_from_sq_norms;
use crate::pursuit::LearnConfig;
use crate::synth::TruthRecord;

/// What the caller knows about the run being scored.
#[derive(Debug, Clone, Default)]
pub struct EvalContext {
    pub config: Option<LearnConfig>,
    /// Set for outlier runs.
    pub rho: Option<f64>,
    /// `ψ⁽ᵗ⁾` for `t = 1, 2, …`.
    pub psi_trace: Vec<f64>,
    /// Declared outliers of an outlier run.
    pub declared_outliers: Vec<usize>,
    pub wall_time_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierScores {
    pub psi_hat_final: f64,
    /// `ψ̂ / (‖X − A*Y* − N*‖_F² + ε‖X_ℐ‖_F²)`.
    pub ratio_inlier_form: Option<f64>,
    /// `ψ̂ / ((γ* + ε)‖X‖_F²)`.
    pub ratio_total_form: Option<f64>,
    pub planted: usize,
    pub declared: usize,
    /// Declared outliers that were planted outliers.
    pub overlap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub config: Option<LearnConfig>,
    pub rho: Option<f64>,
    pub psi_final: f64,
    pub atom_count: usize,
    pub max_sparsity: usize,
    /// `histogram[s]` counts the signals whose code has `s` entries.
    pub sparsity_histogram: Vec<usize>,
    pub wall_time_ms: Option<u64>,
    pub gamma_star: f64,
    pub lambda: f64,
    /// `(ψ⁽ᵗ⁾ − γ*)·βt / (16mΛ)` per trace row.
    pub bound_ratio_per_t: Vec<f64>,
    pub max_bound_ratio: Option<f64>,
    pub outlier: Option<OutlierScores>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

pub fn eval_against_truth(
    model: &DictModel,
    x: &SignalMatrix,
    truth: &TruthRecord,
    ctx: &EvalContext,
) -> Result<RunMetrics> {
    let n = x.len();
    if model.codes.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: model.codes.len(),
        });
    }
    if let Some(a) = truth.a_star.iter().find(|a| a.len() != x.dim()) {
        return Err(Error::Dimension {
            expected: x.dim(),
            got: a.len(),
        });
    }
    let sq = model.residual_sq_norms(x)?;
    let frob = x.frob_sq();
    let psi_final = if frob > 0.0 { sq.iter().sum::<f64>() / frob } else { 0.0 };

    let max_sparsity = model.max_code_len();
    let mut sparsity_histogram = vec![0; max_sparsity + 1];
    for c in &model.codes {
        sparsity_histogram[c.len()] += 1;
    }

    let lambda = truth.lambda.max(1.0);
    let bound_ratio_per_t: Vec<f64> = match ctx.config {
        Some(cfg) => {
            let scale = cfg.beta() / (16.0 * cfg.m as f64 * lambda);
            ctx.psi_trace
                .iter()
                .enumerate()
                .map(|(i, psi)| (psi - truth.gamma_star) * scale * (i + 1) as f64)
                .collect()
        }
        None => Vec::new(),
    };
    let max_bound_ratio = bound_ratio_per_t.iter().copied().reduce(f64::max);

    let outlier = match ctx.rho {
        Some(rho) => {
            let psi_hat_final = psi_hat_from_sq_norms(&sq, rho);
            let truth_model = truth.model(n)?;
            let truth_err = truth_model.residual_sq_norms(x)?;
            let inlier_cols = truth.inliers(n);
            let planted_err: f64 = inlier_cols.iter().map(|&i| truth_err[i]).sum();
            let inlier_mass: f64 = inlier_cols.iter().map(|&i| x.col_norm(i).powi(2)).sum();
            let eps = ctx.config.map(|c| c.epsilon);
            let overlap = ctx
                .declared_outliers
                .iter()
                .filter(|i| truth.outliers.binary_search(i).is_ok())
                .count();
            Some(OutlierScores {
                psi_hat_final,
                ratio_inlier_form: eps.and_then(|e| ratio(psi_hat_final, planted_err + e * inlier_mass)),
                ratio_total_form: eps.and_then(|e| ratio(psi_hat_final, (truth.gamma_star + e) * frob)),
                planted: truth.outliers.len(),
                declared: ctx.declared_outliers.len(),
                overlap,
            })
        }
        None => None,
    };

    Ok(RunMetrics {
        config: ctx.config,
        rho: ctx.rho,
        psi_final,
        atom_count: model.atom_count(),
        max_sparsity,
        sparsity_histogram,
        wall_time_ms: ctx.wall_time_ms,
        gamma_star: truth.gamma_star,
        lambda: truth.lambda,
        bound_ratio_per_t,
        max_bound_ratio,
        outlier,
    })
}
