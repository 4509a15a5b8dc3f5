//! Planted instances `X = A*Y* + E` with a known dictionary, sparse codes,
//! exactly rescaled noise and optional outlier columns.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{norm, norm_sq, DictModel, SignalMatrix};
use crate::outlier::outlier_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictKind {
    Orthonormal,
    RandomUnit,
}

impl std::str::FromStr for DictKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthonormal" => Ok(Self::Orthonormal),
            "random_unit" | "random-unit" => Ok(Self::RandomUnit),
            _ => Err(Error::Parse(format!("unknown dictionary kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub noise_ratio: f64,
    pub rho: f64,
    pub dict_kind: DictKind,
    pub seed: u64,
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.d == 0 || self.n == 0 || self.m == 0 || self.k == 0 {
            return bad("d, n, m and k must be positive".into());
        }
        if self.k > self.m {
            return bad(format!("k = {} exceeds m = {}", self.k, self.m));
        }
        if self.dict_kind == DictKind::Orthonormal && self.m > self.d {
            return bad(format!("orthonormal dictionary needs m ≤ d, got m = {} > d = {}", self.m, self.d));
        }
        if !(0.0..=0.5).contains(&self.noise_ratio) {
            return bad(format!("noise_ratio must lie in [0, 0.5], got {}", self.noise_ratio));
        }
        if !(0.0..0.5).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 0.5), got {}", self.rho));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub params: SynthParams,
    pub x: SignalMatrix,
    /// Unit columns of `A*`.
    pub a_star: Vec<Vec<f64>>,
    /// Sparse columns of `Y*`; outlier columns have empty codes.
    pub y_star: Vec<Vec<(usize, f64)>>,
    /// Planted noise `E`, zero on outlier columns.
    pub noise: Vec<Vec<f64>>,
    /// Sorted outlier indices.
    pub outliers: Vec<usize>,
    /// Sorted inlier indices.
    pub inliers: Vec<usize>,
    /// `‖X_ℐ − A*Y*_ℐ‖_F² / ‖X_ℐ‖_F²`.
    pub gamma_star: f64,
    /// `max_{i∈ℐ} ‖Y*_i‖² / ‖x_i‖²`.
    pub lambda: f64,
    pub seed: u64,
}

impl PlantedInstance {
    pub fn truth_model(&self) -> DictModel {
        DictModel {
            atoms: self.a_star.clone(),
            codes: self.y_star.clone(),
        }
    }

    /// Λ to hand to a learner config: the measured value, floored at 1.
    pub fn config_lambda(&self) -> f64 {
        self.lambda.max(1.0)
    }

    pub fn truth_record(&self) -> TruthRecord {
        let y_star = self
            .y_star
            .iter()
            .enumerate()
            .flat_map(|(i, code)| code.iter().map(move |&(j, c)| (i, j, c)))
            .collect();
        TruthRecord {
            a_star: self.a_star.clone(),
            y_star,
            outliers: self.outliers.clone(),
            gamma_star: self.gamma_star,
            lambda: self.lambda,
            seed: self.seed,
        }
    }
}

/// Serialized ground truth. `Y_star` holds `(column, atom, coefficient)`
/// triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    #[serde(rename = "A_star")]
    pub a_star: Vec<Vec<f64>>,
    #[serde(rename = "Y_star")]
    pub y_star: Vec<(usize, usize, f64)>,
    pub outliers: Vec<usize>,
    pub gamma_star: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl TruthRecord {
    /// `(A*, Y*)` as a model over `n` signals.
    pub fn model(&self, n: usize) -> Result<DictModel> {
        let mut codes = vec![Vec::new(); n];
        for &(i, j, c) in &self.y_star {
            if i >= n {
                return Err(Error::Input(format!("Y_star references column {i} of {n}")));
            }
            codes[i].push((j, c));
        }
        Ok(DictModel {
            atoms: self.a_star.clone(),
            codes,
        })
    }

    pub fn inliers(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|i| self.outliers.binary_search(i).is_err()).collect()
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let g = gaussian_vec(rng, d);
        let n = norm(&g);
        if n > 1e-6 {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

fn draw_dictionary(rng: &mut ChaCha8Rng, p: &SynthParams) -> Vec<Vec<f64>> {
    match p.dict_kind {
        DictKind::RandomUnit => (0..p.m).map(|_| random_unit(rng, p.d)).collect(),
        DictKind::Orthonormal => {
            let fill: Vec<f64> = (0..p.d * p.m).map(|_| rng.sample(StandardNormal)).collect();
            let q = DMatrix::from_column_slice(p.d, p.m, &fill).qr().q();
            (0..p.m)
                .map(|j| {
                    let c: Vec<f64> = q.column(j).iter().copied().collect();
                    // Renormalize so the unit check holds to the last bit we can get.
                    let n = norm(&c);
                    c.into_iter().map(|v| v / n).collect()
                })
                .collect()
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn generate(params: &SynthParams) -> Result<PlantedInstance> {
    params.validate()?;
    let SynthParams { d, n, m, k, .. } = *params;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let a_star = draw_dictionary(&mut rng, params);

    let n_out = outlier_count(params.rho, n);
    let mut outliers: Vec<usize> = sample(&mut rng, n, n_out).into_vec();
    outliers.sort_unstable();
    let inliers: Vec<usize> = (0..n).filter(|i| outliers.binary_search(i).is_err()).collect();

    let mut y_star = vec![Vec::new(); n];
    let mut clean = vec![vec![0.0; d]; n];
    for &i in &inliers {
        let mut support = sample(&mut rng, m, k).into_vec();
        support.sort_unstable();
        for j in support {
            let c: f64 = rng.sample(StandardNormal);
            y_star[i].push((j, c));
            for (r, a) in clean[i].iter_mut().zip(&a_star[j]) {
                *r += c * a;
            }
        }
    }

    let mut noise = vec![vec![0.0; d]; n];
    if params.noise_ratio > 0.0 {
        for &i in &inliers {
            noise[i] = gaussian_vec(&mut rng, d);
        }
        let clean_mass: f64 = inliers.iter().map(|&i| norm_sq(&clean[i])).sum();
        let noise_mass: f64 = inliers.iter().map(|&i| norm_sq(&noise[i])).sum();
        if noise_mass > 0.0 {
            let s = (params.noise_ratio * clean_mass / noise_mass).sqrt();
            for &i in &inliers {
                noise[i].iter_mut().for_each(|v| *v *= s);
            }
        }
    }

    let mut columns: Vec<Vec<f64>> = clean
        .iter()
        .zip(&noise)
        .map(|(c, e)| c.iter().zip(e).map(|(a, b)| a + b).collect())
        .collect();

    if !outliers.is_empty() {
        let mut norms: Vec<f64> = inliers.iter().map(|&i| norm(&columns[i])).collect();
        let med = if norms.is_empty() { 1.0 } else { median(&mut norms) };
        let med = if med > 0.0 { med } else { 1.0 };
        for &i in &outliers {
            let scale = rng.random_range(2.0..=10.0) * med;
            columns[i] = random_unit(&mut rng, d).into_iter().map(|v| v * scale).collect();
        }
    }

    let x = SignalMatrix::from_columns(&columns)?;
    let (gamma_star, lambda) = measure(&x, &y_star, &noise, &inliers);

    Ok(PlantedInstance {
        params: *params,
        x,
        a_star,
        y_star,
        noise,
        outliers,
        inliers,
        gamma_star,
        lambda,
        seed: params.seed,
    })
}

/// `(γ*, Λ)` over the inliers, from the stored parts.
fn measure(
    x: &SignalMatrix,
    y_star: &[Vec<(usize, f64)>],
    noise: &[Vec<f64>],
    inliers: &[usize],
) -> (f64, f64) {
    let mass: f64 = inliers.iter().map(|&i| x.col_norm(i).powi(2)).sum();
    let err: f64 = inliers.iter().map(|&i| norm_sq(&noise[i])).sum();
    let gamma = if mass > 0.0 { err / mass } else { 0.0 };
    let lambda = inliers
        .iter()
        .filter(|&&i| x.col_norm(i) > 0.0)
        .map(|&i| {
            let y: f64 = y_star[i].iter().map(|(_, c)| c * c).sum();
            y / x.col_norm(i).powi(2)
        })
        .fold(0.0, f64::max);
    (gamma, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::dot;
    use crate::pursuit::gamma_star_over;

    fn params(noise_ratio: f64, rho: f64, kind: DictKind, seed: u64) -> SynthParams {
        SynthParams {
            d: 12,
            n: 40,
            m: 5,
            k: 2,
            noise_ratio,
            rho,
            dict_kind: kind,
            seed,
        }
    }

    #[test]
    fn noiseless_is_exact() {
        let inst = generate(&params(0.0, 0.0, DictKind::Orthonormal, 1)).unwrap();
        assert_eq!(inst.gamma_star, 0.0);
        let model = inst.truth_model();
        for i in 0..inst.x.len() {
            assert_eq!(inst.x.col(i), model.reconstruct_column(i, 12).as_slice());
        }
        assert!((inst.lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_atoms() {
        let inst = generate(&params(0.0, 0.0, DictKind::Orthonormal, 2)).unwrap();
        for (a, u) in inst.a_star.iter().enumerate() {
            for (b, v) in inst.a_star.iter().enumerate() {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot(u, v) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_unit_atoms() {
        let inst = generate(&params(0.1, 0.0, DictKind::RandomUnit, 3)).unwrap();
        assert!(inst.a_star.iter().all(|a| (norm(a) - 1.0).abs() < 1e-12));
    }

    #[test]
    fn noise_ratio_is_hit_exactly() {
        let inst = generate(&params(0.05, 0.1, DictKind::Orthonormal, 4)).unwrap();
        let clean: f64 = inst
            .inliers
            .iter()
            .map(|&i| norm_sq(&inst.truth_model().reconstruct_column(i, 12)))
            .sum();
        let noise: f64 = inst.noise.iter().map(|e| norm_sq(e)).sum();
        assert!((noise / clean - 0.05).abs() < 1e-12);
        let recomputed = gamma_star_over(&inst.x, &inst.truth_model(), &inst.inliers).unwrap();
        assert!((recomputed.value - inst.gamma_star).abs() < 1e-10);
    }

    #[test]
    fn lambda_recomputes() {
        let inst = generate(&params(0.2, 0.2, DictKind::RandomUnit, 5)).unwrap();
        let mut lam = 0.0f64;
        for &i in &inst.inliers {
            let y: f64 = inst.y_star[i].iter().map(|(_, c)| c * c).sum();
            lam = lam.max(y / norm_sq(inst.x.col(i)));
        }
        assert!((lam - inst.lambda).abs() <= 1e-12 * lam);
    }

    #[test]
    fn supports_and_outliers() {
        let p = params(0.0, 0.25, DictKind::Orthonormal, 6);
        let inst = generate(&p).unwrap();
        assert_eq!(inst.outliers.len(), 10);
        assert_eq!(inst.inliers.len() + inst.outliers.len(), 40);
        let mut inlier_norms: Vec<f64> = inst.inliers.iter().map(|&i| inst.x.col_norm(i)).collect();
        let med = median(&mut inlier_norms);
        for &i in &inst.outliers {
            assert!(inst.y_star[i].is_empty());
            let r = inst.x.col_norm(i) / med;
            assert!((2.0 - 1e-12..=10.0 + 1e-12).contains(&r), "{r}");
        }
        for &i in &inst.inliers {
            assert_eq!(inst.y_star[i].len(), 2);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let p = params(0.05, 0.1, DictKind::RandomUnit, 9);
        assert_eq!(generate(&p).unwrap(), generate(&p).unwrap());
        let q = SynthParams { seed: 10, ..p };
        assert_ne!(generate(&p).unwrap().x, generate(&q).unwrap().x);
    }

    #[test]
    fn truth_record_round_trip() {
        let inst = generate(&params(0.05, 0.1, DictKind::Orthonormal, 11)).unwrap();
        let rec = inst.truth_record();
        assert_eq!(rec.model(40).unwrap(), inst.truth_model());
        assert_eq!(rec.inliers(40), inst.inliers);
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains("\"A_star\"") && json.contains("\"Y_star\""));
        let back: TruthRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn rejects_bad_params() {
        let ok = params(0.0, 0.0, DictKind::Orthonormal, 0);
        for bad in [
            SynthParams { k: 6, ..ok },
            SynthParams { m: 13, ..ok },
            SynthParams { noise_ratio: 0.6, ..ok },
            SynthParams { rho: 0.5, ..ok },
            SynthParams { n: 0, ..ok },
        ] {
            assert!(generate(&bad).is_err());
        }
        assert!(generate(&SynthParams { m: 13, dict_kind: DictKind::RandomUnit, ..ok }).is_ok());
    }
}
