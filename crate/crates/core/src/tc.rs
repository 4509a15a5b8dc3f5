//! The threshold-correlation (τ-TC) problem.
//!
//! Given vectors `v_i` in the unit ball, weights `w_i ≥ 0` and a threshold
//! `τ ∈ [0, 1]`, find a unit `x` maximizing
//! `Σ_i [⟨x, v_i⟩² ≥ τ] · w_i ⟨x, v_i⟩²`.
//!
//! [`CandidateScan`] is an `(α, β) = (τ/4, τ²/32)` bi-criteria solver: some
//! normalized input vector always scores at least `τ²/32 · Opt(τ)` when judged
//! at the relaxed threshold `τ²/4`, so scanning all of them suffices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_unit, dot, norm, UNIT_TOL};

/// Candidates shorter than this cannot be normalized and are skipped.
pub const MIN_CANDIDATE_NORM: f64 = 1e-12;

/// Default angular step of [`oracle_grid`], in radians.
pub const DEFAULT_GRID_RESOLUTION: f64 = 1e-3;

/// Input of one τ-TC problem; vectors are stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct TcInstance {
    dim: usize,
    data: Vec<f64>,
    weights: Vec<f64>,
    tau: f64,
}

impl TcInstance {
    pub fn new(vectors: &[Vec<f64>], weights: Vec<f64>, tau: f64) -> Result<Self> {
        let dim = vectors.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(dim * vectors.len());
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Input(format!(
                    "vector {i} has dimension {}, expected {dim}",
                    v.len()
                )));
            }
            data.extend_from_slice(v);
        }
        Self::from_flat(dim, data, weights, tau)
    }

    /// `data` holds `weights.len()` vectors of length `dim`, back to back.
    pub fn from_flat(dim: usize, data: Vec<f64>, weights: Vec<f64>, tau: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("vectors must have dimension >= 1".into()));
        }
        if weights.is_empty() {
            return Err(Error::Input("instance has no vectors".into()));
        }
        if data.len() != dim * weights.len() {
            return Err(Error::Dimension {
                expected: dim * weights.len(),
                got: data.len(),
            });
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Contract(format!("tau must lie in [0, 1], got {tau}")));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Contract(format!(
                "weight {i} must be finite and non-negative"
            )));
        }
        for (i, v) in data.chunks_exact(dim).enumerate() {
            let n = norm(v);
            if !n.is_finite() || n > 1.0 + UNIT_TOL {
                return Err(Error::Contract(format!(
                    "vector {i} lies outside the unit ball (norm {n})"
                )));
            }
        }
        Ok(Self {
            dim,
            data,
            weights,
            tau,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same instance with every weight multiplied by `c`.
    pub fn scaled_weights(&self, c: f64) -> Result<Self> {
        Self::from_flat(
            self.dim,
            self.data.clone(),
            self.weights.iter().map(|w| w * c).collect(),
            self.tau,
        )
    }
}

/// Value of the thresholded objective at one unit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub hit_set: Vec<usize>,
}

/// Output of a bi-criteria solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcSolution {
    pub x: Vec<f64>,
    /// Objective evaluated at `effective_threshold`.
    pub objective: f64,
    pub effective_threshold: f64,
    pub hit_set: Vec<usize>,
    pub degenerate: bool,
    /// Input index the solution was normalized from, if any.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub candidate: Option<usize>,
}

#[inline]
fn thresholded_score(inst: &TcInstance, x: &[f64], threshold: f64) -> f64 {
    inst.vectors()
        .zip(&inst.weights)
        .map(|(v, &w)| {
            let c = dot(x, v);
            let c2 = c * c;
            if c2 >= threshold {
                w * c2
            } else {
                0.0
            }
        })
        .sum()
}

fn evaluate_unchecked(inst: &TcInstance, x: &[f64], threshold: f64) -> Evaluation {
    let mut value = 0.0;
    let mut hit_set = Vec::new();
    for (i, (v, &w)) in inst.vectors().zip(&inst.weights).enumerate() {
        let c = dot(x, v);
        let c2 = c * c;
        if c2 >= threshold {
            value += w * c2;
            hit_set.push(i);
        }
    }
    Evaluation { value, hit_set }
}

/// `Σ_{i : ⟨x,v_i⟩² ≥ threshold} w_i ⟨x,v_i⟩²` and the indices that count.
///
/// The comparison is a plain `≥` with no slack.
pub fn evaluate(inst: &TcInstance, x: &[f64], threshold: f64) -> Result<Evaluation> {
    if x.len() != inst.dim {
        return Err(Error::Dimension {
            expected: inst.dim,
            got: x.len(),
        });
    }
    check_unit(x, "x")?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Contract(format!(
            "threshold must lie in [0, 1], got {threshold}"
        )));
    }
    Ok(evaluate_unchecked(inst, x, threshold))
}

/// An `(α, β)`-approximation algorithm for τ-TC: the returned unit vector,
/// judged at threshold `α·τ`, attains at least `β·Opt(τ)`.
pub trait BicriteriaSolver: Sync {
    fn alpha(&self, tau: f64) -> f64;
    fn beta(&self, tau: f64) -> f64;
    fn solve(&self, inst: &TcInstance) -> TcSolution;
}

/// Scans every normalized input vector and keeps the best one at threshold
/// `τ²/4`. Ties go to the lowest index; the scan may run on the rayon pool
/// but the result does not depend on the number of threads.
#[derive(Debug, Clone, Copy, Default)]
pub struct CandidateScan;

impl BicriteriaSolver for CandidateScan {
    fn alpha(&self, tau: f64) -> f64 {
        tau / 4.0
    }

    fn beta(&self, tau: f64) -> f64 {
        tau * tau / 32.0
    }

    fn solve(&self, inst: &TcInstance) -> TcSolution {
        let threshold = self.alpha(inst.tau) * inst.tau;
        let degenerate = || {
            let mut x = vec![0.0; inst.dim];
            x[0] = 1.0;
            TcSolution {
                x,
                objective: 0.0,
                effective_threshold: threshold,
                hit_set: Vec::new(),
                degenerate: true,
                candidate: None,
            }
        };
        if inst.weights.iter().all(|&w| w == 0.0) {
            return degenerate();
        }

        let candidates: Vec<Option<Vec<f64>>> = inst
            .vectors()
            .map(|v| {
                let n = norm(v);
                (n >= MIN_CANDIDATE_NORM).then(|| v.iter().map(|c| c / n).collect())
            })
            .collect();

        let scores: Vec<Option<f64>> = candidates
            .par_iter()
            .map(|c| c.as_deref().map(|x| thresholded_score(inst, x, threshold)))
            .collect();

        let mut best: Option<(usize, f64)> = None;
        for (i, s) in scores.into_iter().enumerate() {
            if let Some(s) = s {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((i, s));
                }
            }
        }
        let Some((idx, _)) = best else {
            return degenerate();
        };
        let x = candidates[idx].clone().expect("scored candidate exists");
        let eval = evaluate_unchecked(inst, &x, threshold);
        TcSolution {
            x,
            objective: eval.value,
            effective_threshold: threshold,
            hit_set: eval.hit_set,
            degenerate: false,
            candidate: Some(idx),
        }
    }
}

/// Runs [`CandidateScan`] on `inst`.
pub fn solve_bicriteria(inst: &TcInstance) -> TcSolution {
    CandidateScan.solve(inst)
}

/// Best point found by an oracle search.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub x: Vec<f64>,
}

fn consider(best: &mut OracleResult, inst: &TcInstance, x: &[f64]) {
    let v = thresholded_score(inst, x, inst.tau);
    if v > best.value {
        best.value = v;
        best.x.clear();
        best.x.extend_from_slice(x);
    }
}

/// Exhaustive search of the τ-TC objective (at threshold τ) over a uniform
/// angular grid of the unit sphere, for `d ≤ 3`.
///
/// `d = 1` checks both unit vectors, `d = 2` a half circle and `d = 3` a
/// latitude/longitude grid of the upper hemisphere (`x` and `−x` score
/// identically). The result is a lower bound on the true optimum.
pub fn oracle_grid(inst: &TcInstance, angular_resolution: f64) -> Result<OracleResult> {
    if !(angular_resolution > 0.0 && angular_resolution <= 0.1) {
        return Err(Error::Contract(format!(
            "angular resolution must lie in (0, 0.1], got {angular_resolution}"
        )));
    }
    let mut first = vec![0.0; inst.dim];
    first[0] = 1.0;
    let mut best = OracleResult {
        value: thresholded_score(inst, &first, inst.tau),
        x: first,
    };
    match inst.dim {
        1 => consider(&mut best, inst, &[-1.0]),
        2 => {
            let steps = (std::f64::consts::PI / angular_resolution).ceil() as usize;
            for s in 0..steps {
                let th = s as f64 * angular_resolution;
                consider(&mut best, inst, &[th.cos(), th.sin()]);
            }
        }
        3 => {
            let lat_steps = (std::f64::consts::FRAC_PI_2 / angular_resolution).ceil() as usize;
            for a in 0..=lat_steps {
                let polar = (a as f64 * angular_resolution).min(std::f64::consts::FRAC_PI_2);
                let (sp, cp) = polar.sin_cos();
                let lon_steps = if sp * std::f64::consts::TAU < angular_resolution {
                    1
                } else {
                    (std::f64::consts::TAU * sp / angular_resolution).ceil() as usize
                };
                let lon_step = std::f64::consts::TAU / lon_steps as f64;
                for b in 0..lon_steps {
                    let (sa, ca) = (b as f64 * lon_step).sin_cos();
                    consider(&mut best, inst, &[sp * ca, sp * sa, cp]);
                }
            }
        }
        d => return Err(Error::UnsupportedDimension(d)),
    }
    Ok(best)
}

/// Randomized lower bound on `Opt(τ)`: the best of `num_samples` uniform unit
/// vectors (seeded) and every normalized input vector.
pub fn oracle_sample(inst: &TcInstance, num_samples: usize, seed: u64) -> OracleResult {
    let mut first = vec![0.0; inst.dim];
    first[0] = 1.0;
    let mut best = OracleResult {
        value: thresholded_score(inst, &first, inst.tau),
        x: first,
    };
    for v in inst.vectors() {
        let n = norm(v);
        if n >= MIN_CANDIDATE_NORM {
            let x: Vec<f64> = v.iter().map(|c| c / n).collect();
            consider(&mut best, inst, &x);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; inst.dim];
    let mut drawn = 0;
    while drawn < num_samples {
        for c in x.iter_mut() {
            *c = StandardNormal.sample(&mut rng);
        }
        let n = norm(&x);
        if n < MIN_CANDIDATE_NORM {
            continue;
        }
        x.iter_mut().for_each(|c| *c /= n);
        consider(&mut best, inst, &x);
        drawn += 1;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn inst(vs: &[Vec<f64>], w: &[f64], tau: f64) -> TcInstance {
        TcInstance::new(vs, w.to_vec(), tau).unwrap()
    }

    fn random_instance(rng: &mut ChaCha8Rng, dim: usize, n: usize, tau: f64) -> TcInstance {
        let vs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let r = rng.random_range(0.2..1.0) / norm(&v);
                v.into_iter().map(|c| c * r).collect()
            })
            .collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        inst(&vs, &w, tau)
    }

    #[test]
    fn evaluate_examples() {
        let i = inst(&[vec![0.0, 1.0]], &[1.0], 0.5);
        let e = evaluate(&i, &[1.0, 0.0], 0.5).unwrap();
        assert_eq!((e.value, e.hit_set.len()), (0.0, 0));

        let i = inst(&[vec![1.0, 0.0]], &[1.0], 1.0);
        let e = evaluate(&i, &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.hit_set, vec![0]);

        let i = inst(&[vec![0.8, 0.6]], &[2.0], 0.5);
        let e = evaluate(&i, &[1.0, 0.0], 0.7).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.hit_set.is_empty());
        let e = evaluate(&i, &[1.0, 0.0], 0.5).unwrap();
        assert_abs_diff_eq!(e.value, 1.28, epsilon = 1e-12);
        assert_eq!(e.hit_set, vec![0]);
    }

    #[test]
    fn evaluate_contracts() {
        let i = inst(&[vec![1.0, 0.0]], &[1.0], 0.5);
        assert!(matches!(evaluate(&i, &[2.0, 0.0], 0.5), Err(Error::Contract(_))));
        assert!(evaluate(&i, &[1.0, 0.0], 1.5).is_err());
        assert!(evaluate(&i, &[1.0], 0.5).is_err());
    }

    #[test]
    fn instance_validation() {
        assert!(TcInstance::new(&[vec![2.0]], vec![1.0], 0.5).is_err());
        assert!(TcInstance::new(&[vec![1.0]], vec![-1.0], 0.5).is_err());
        assert!(TcInstance::new(&[vec![1.0]], vec![1.0], 1.5).is_err());
        assert!(TcInstance::new(&[vec![1.0], vec![1.0, 0.0]], vec![1.0, 1.0], 0.5).is_err());
    }

    #[test]
    fn identical_vectors() {
        let n = 7;
        let i = inst(&vec![vec![1.0, 0.0, 0.0]; n], &vec![1.0; n], 1.0);
        let s = solve_bicriteria(&i);
        assert_eq!(s.x, vec![1.0, 0.0, 0.0]);
        assert_eq!(s.objective, n as f64);
        assert_eq!(s.effective_threshold, 0.25);
        assert!(!s.degenerate);
        assert_eq!(s.candidate, Some(0));
    }

    #[test]
    fn approximation_parameters() {
        let tau = 0.4;
        assert_abs_diff_eq!(CandidateScan.alpha(tau), tau / 4.0);
        assert_abs_diff_eq!(CandidateScan.beta(tau), tau * tau / 32.0);
    }

    #[test]
    fn degenerate_inputs() {
        let s = solve_bicriteria(&inst(&[vec![0.0, 0.0], vec![1e-13, 0.0]], &[1.0, 1.0], 0.5));
        assert!(s.degenerate);
        assert_eq!(s.x, vec![1.0, 0.0]);
        assert_eq!(s.objective, 0.0);
        let s = solve_bicriteria(&inst(&[vec![1.0, 0.0]], &[0.0], 0.5));
        assert!(s.degenerate);
    }

    #[test]
    fn skips_short_candidates() {
        let s = solve_bicriteria(&inst(&[vec![1e-13, 0.0], vec![0.0, 0.5]], &[5.0, 1.0], 0.5));
        assert_eq!(s.candidate, Some(1));
        assert_eq!(s.x, vec![0.0, 1.0]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let s = solve_bicriteria(&inst(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[1.0, 1.0], 0.5));
        assert_eq!(s.candidate, Some(0));
    }

    #[test]
    fn grid_oracle_examples() {
        let r = oracle_grid(&inst(&[vec![0.9]], &[1.0], 0.5), 1e-3).unwrap();
        assert_abs_diff_eq!(r.value, 0.81, epsilon = 1e-12);
        assert_eq!(r.x, vec![1.0]);

        let r = oracle_grid(&inst(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0], 0.6), 1e-3)
            .unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
        assert!((r.x[0].abs() - 1.0).abs() < 1e-6 || (r.x[1].abs() - 1.0).abs() < 1e-6);

        let i = inst(&[vec![0.0, 0.0, 1.0]], &[1.0], 0.5);
        assert_abs_diff_eq!(oracle_grid(&i, 1e-2).unwrap().value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_oracle_contracts() {
        let i = inst(&[vec![0.5; 4]], &[1.0], 0.5);
        assert!(matches!(oracle_grid(&i, 1e-3), Err(Error::UnsupportedDimension(4))));
        let i = inst(&[vec![0.5]], &[1.0], 0.5);
        assert!(oracle_grid(&i, 0.0).is_err());
        assert!(oracle_grid(&i, 0.2).is_err());
    }

    /// A second circle scan, parametrized by full turns with its own
    /// accumulation, compared against `oracle_grid`.
    #[test]
    fn grid_oracle_matches_independent_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let i = random_instance(&mut rng, 2, 10, 0.3);
            let steps = 2 * (std::f64::consts::PI / 1e-3).ceil() as usize;
            let mut best = 0.0f64;
            for s in 0..steps {
                let th = std::f64::consts::TAU * s as f64 / steps as f64;
                let (y, x) = th.sin_cos();
                let mut val = 0.0;
                for j in 0..i.len() {
                    let v = i.vector(j);
                    let c = x * v[0] + y * v[1];
                    if c * c >= i.tau() {
                        val += i.weights()[j] * c * c;
                    }
                }
                best = best.max(val);
            }
            let r = oracle_grid(&i, 1e-3).unwrap();
            // Both are 1e-3 grids of the same Lipschitz objective.
            assert!((r.value - best).abs() <= 0.05 * best.max(1e-3), "{} vs {}", r.value, best);
        }
    }

    #[test]
    fn bicriteria_beats_grid_oracle_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tau = 0.3;
        let i = random_instance(&mut rng, 2, 8, tau);
        let opt = oracle_grid(&i, 1e-3).unwrap().value;
        let s = solve_bicriteria(&i);
        assert_eq!(s.effective_threshold, tau * tau / 4.0);
        assert!(s.objective >= tau * tau / 32.0 * opt - 1e-9);
    }

    #[test]
    fn sample_oracle_examples() {
        let i = inst(&vec![vec![1.0, 0.0, 0.0, 0.0, 0.0]; 4], &[1.0; 4], 0.9);
        let r = oracle_sample(&i, 0, 1);
        assert_eq!(r.value, 4.0);
        let r = oracle_sample(&i, 50, 1);
        assert_eq!(r.value, 4.0);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let i = random_instance(&mut rng, 4, 9, 0.2);
        let a = oracle_sample(&i, 500, 42);
        let b = oracle_sample(&i, 500, 42);
        assert_eq!(a, b);
        assert!(a.value >= oracle_sample(&i, 0, 42).value);
    }

    #[test]
    fn weight_scaling_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let i = random_instance(&mut rng, 3, 12, 0.4);
            let s = solve_bicriteria(&i);
            let scaled = solve_bicriteria(&i.scaled_weights(3.5).unwrap());
            assert_eq!(s.candidate, scaled.candidate);
            assert_abs_diff_eq!(scaled.objective, 3.5 * s.objective, epsilon = 1e-12);
        }
    }

    #[test]
    fn tau_zero_matches_top_singular_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let i = random_instance(&mut rng, 3, 10, 0.0);
        // Columns sqrt(w_i) v_i; at threshold 0 the objective is ‖Mᵀx‖².
        let m = nalgebra::DMatrix::from_fn(3, i.len(), |r, c| i.weights()[c].sqrt() * i.vector(c)[r]);
        let svd = m.clone().svd(true, false);
        let (k, &sigma) = svd
            .singular_values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let u: Vec<f64> = svd.u.unwrap().column(k).iter().copied().collect();
        let e = evaluate(&i, &u, 0.0).unwrap();
        assert_abs_diff_eq!(e.value, sigma * sigma, epsilon = 1e-10);

        let s = solve_bicriteria(&i);
        let best_single = (0..i.len())
            .map(|j| i.weights()[j] * crate::matrix::norm_sq(i.vector(j)))
            .fold(0.0, f64::max);
        assert!(s.objective >= best_single - 1e-12);
    }
}
