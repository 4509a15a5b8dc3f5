//! Executable forms of the inequalities behind the convergence bound.
//!
//! * Increment: for unit `u, s_1..s_k` with `u = Σ α_i s_i + z` and any
//!   subspace `T`, `Σ ⟨u − Π_T u, s_i⟩² ≥ (θ² − ‖z‖²)₊² / (4 Σ α_i²)` where
//!   `θ = ‖u − Π_T u‖`.
//! * Convexity: `Σ_i (θ_i − γ_i)₊² ‖x_i‖² ≥ (ψ − γ*)₊² ‖X‖_F²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_unit, dot, norm, norm_sq, positive_part, UNIT_TOL};

/// Absolute slack applied to every `lhs ≥ rhs` comparison.
pub const ANALYSIS_SLACK: f64 = 1e-10;

/// Tolerance on the decomposition `u = Σ α_i s_i + z`.
pub const DECOMPOSITION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementCase {
    pub u: Vec<f64>,
    pub atoms: Vec<Vec<f64>>,
    pub coeffs: Vec<f64>,
    pub z: Vec<f64>,
    /// Orthonormal basis of `T`; empty for `T = {0}`.
    pub subspace_basis: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementReport {
    pub theta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Per-column data for the convexity check: `‖x_i‖²`, `θ_i` and `γ_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnPotentials {
    pub col_sq_norms: Vec<f64>,
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub psi: f64,
    pub gamma_star: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub increment: IncrementReport,
    pub convexity: Option<ConvexityReport>,
    pub pass: bool,
}

fn check_dim(v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: v.len(),
        });
    }
    Ok(())
}

pub fn verify_increment(case: &IncrementCase) -> Result<IncrementReport> {
    let dim = case.u.len();
    check_unit(&case.u, "u")?;
    check_dim(&case.z, dim)?;
    if case.atoms.len() != case.coeffs.len() {
        return Err(Error::Dimension {
            expected: case.atoms.len(),
            got: case.coeffs.len(),
        });
    }
    for (i, s) in case.atoms.iter().enumerate() {
        check_dim(s, dim)?;
        check_unit(s, &format!("s_{i}"))?;
    }
    for (a, b) in case.subspace_basis.iter().enumerate() {
        check_dim(b, dim)?;
        for (c, other) in case.subspace_basis.iter().enumerate().take(a + 1) {
            let expect = if a == c { 1.0 } else { 0.0 };
            if (dot(b, other) - expect).abs() > UNIT_TOL {
                return Err(Error::Contract("subspace basis is not orthonormal".into()));
            }
        }
    }

    let mut gap = case.u.clone();
    for (s, &a) in case.atoms.iter().zip(&case.coeffs) {
        for (g, si) in gap.iter_mut().zip(s) {
            *g -= a * si;
        }
    }
    for (g, zi) in gap.iter_mut().zip(&case.z) {
        *g -= zi;
    }
    let gap = norm(&gap);
    if gap > DECOMPOSITION_TOL {
        return Err(Error::Input(format!(
            "u differs from Σ α_i s_i + z by {gap:e}"
        )));
    }

    let mut perp = case.u.clone();
    for b in &case.subspace_basis {
        let c = dot(&case.u, b);
        for (p, bi) in perp.iter_mut().zip(b) {
            *p -= c * bi;
        }
    }
    let theta = norm(&perp);
    let lhs: f64 = case.atoms.iter().map(|s| dot(&perp, s).powi(2)).sum();
    let num = positive_part(theta * theta - norm_sq(&case.z)).powi(2);
    let coeff_sq: f64 = case.coeffs.iter().map(|a| a * a).sum();
    let rhs = if num == 0.0 { 0.0 } else { num / (4.0 * coeff_sq) };
    Ok(IncrementReport {
        theta,
        lhs,
        rhs,
        pass: lhs >= rhs - ANALYSIS_SLACK,
    })
}

/// Checks the convexity inequality, deriving `ψ`, `γ*` and `‖X‖_F²` from the
/// supplied columns. The slack is scaled by `‖X‖_F²`.
pub fn verify_convexity(cols: &ColumnPotentials) -> Result<ConvexityReport> {
    let n = cols.col_sq_norms.len();
    if cols.theta.len() != n || cols.gamma.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: cols.theta.len().min(cols.gamma.len()),
        });
    }
    let frob: f64 = cols.col_sq_norms.iter().sum();
    if frob <= 0.0 {
        return Ok(ConvexityReport {
            psi: 0.0,
            gamma_star: 0.0,
            lhs: 0.0,
            rhs: 0.0,
            pass: true,
        });
    }
    let psi = cols.col_sq_norms.iter().zip(&cols.theta).map(|(w, t)| w * t).sum::<f64>() / frob;
    let gamma_star =
        cols.col_sq_norms.iter().zip(&cols.gamma).map(|(w, g)| w * g).sum::<f64>() / frob;
    let lhs: f64 = (0..n)
        .map(|i| positive_part(cols.theta[i] - cols.gamma[i]).powi(2) * cols.col_sq_norms[i])
        .sum();
    let rhs = positive_part(psi - gamma_star).powi(2) * frob;
    Ok(ConvexityReport {
        psi,
        gamma_star,
        lhs,
        rhs,
        pass: lhs >= rhs - ANALYSIS_SLACK * frob,
    })
}

pub fn verify_analysis_inequalities(
    case: &IncrementCase,
    columns: Option<&ColumnPotentials>,
) -> Result<AnalysisReport> {
    let increment = verify_increment(case)?;
    let convexity = columns.map(verify_convexity).transpose()?;
    let pass = increment.pass && convexity.is_none_or(|c| c.pass);
    Ok(AnalysisReport {
        increment,
        convexity,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = norm(&v);
        v.into_iter().map(|c| c / n).collect()
    }

    #[test]
    fn single_atom_identity() {
        let u = vec![1.0, 0.0, 0.0];
        let r = verify_increment(&IncrementCase {
            u: u.clone(),
            atoms: vec![u.clone()],
            coeffs: vec![1.0],
            z: vec![0.0; 3],
            subspace_basis: vec![],
        })
        .unwrap();
        assert_eq!(r.theta, 1.0);
        assert_eq!(r.lhs, 1.0);
        assert_eq!(r.rhs, 0.25);
        assert!(r.pass);
    }

    #[test]
    fn large_z_kills_bound() {
        let u = unit(vec![1.0, 1.0]);
        let s = vec![1.0, 0.0];
        let z = vec![u[0] + 0.5, u[1]];
        assert!(norm_sq(&z) >= 1.0);
        let r = verify_increment(&IncrementCase {
            u,
            atoms: vec![s],
            coeffs: vec![-0.5],
            z,
            subspace_basis: vec![],
        })
        .unwrap();
        assert_eq!(r.rhs, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn rejects_broken_decomposition() {
        let r = verify_increment(&IncrementCase {
            u: vec![1.0, 0.0],
            atoms: vec![vec![1.0, 0.0]],
            coeffs: vec![0.5],
            z: vec![0.0, 0.0],
            subspace_basis: vec![],
        });
        assert!(matches!(r, Err(Error::Input(_))));
    }

    #[test]
    fn rejects_bad_basis_and_units() {
        let base = IncrementCase {
            u: vec![1.0, 0.0],
            atoms: vec![vec![1.0, 0.0]],
            coeffs: vec![1.0],
            z: vec![0.0, 0.0],
            subspace_basis: vec![vec![1.0, 1.0]],
        };
        assert!(matches!(verify_increment(&base), Err(Error::Contract(_))));
        let mut c = base.clone();
        c.subspace_basis.clear();
        c.atoms[0] = vec![2.0, 0.0];
        c.coeffs[0] = 0.5;
        assert!(verify_increment(&c).is_err());
    }

    #[test]
    fn projection_shrinks_theta() {
        let u = unit(vec![1.0, 2.0, 2.0]);
        let r = verify_increment(&IncrementCase {
            u: u.clone(),
            atoms: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            coeffs: u.clone(),
            z: vec![0.0; 3],
            subspace_basis: vec![vec![1.0, 0.0, 0.0]],
        })
        .unwrap();
        assert_abs_diff_eq!(r.theta * r.theta, 8.0 / 9.0, epsilon = 1e-14);
        assert!(r.pass);
    }

    #[test]
    fn convexity_examples() {
        let r = verify_convexity(&ColumnPotentials {
            col_sq_norms: vec![1.0, 3.0],
            theta: vec![0.5, 0.2],
            gamma: vec![0.1, 0.4],
        })
        .unwrap();
        assert_abs_diff_eq!(r.psi, (0.5 + 0.6) / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.gamma_star, (0.1 + 1.2) / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.lhs, 0.16, epsilon = 1e-15);
        assert_eq!(r.rhs, 0.0);
        assert!(r.pass);
        assert!(verify_convexity(&ColumnPotentials {
            col_sq_norms: vec![1.0],
            theta: vec![],
            gamma: vec![0.0],
        })
        .is_err());
    }

    fn case_strategy() -> impl Strategy<Value = IncrementCase> {
        (1usize..=10, 1usize..=5, any::<u64>()).prop_map(|(dim, k, seed)| {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut gauss = |d: usize| -> Vec<f64> {
                (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
            };
            let atoms: Vec<Vec<f64>> = (0..k).map(|_| unit(gauss(dim))).collect();
            let raw: Vec<f64> = gauss(k);
            let noise = gauss(dim);
            let mut u = vec![0.0; dim];
            for (s, a) in atoms.iter().zip(&raw) {
                for (ui, si) in u.iter_mut().zip(s) {
                    *ui += a * si;
                }
            }
            for (ui, e) in u.iter_mut().zip(&noise) {
                *ui += 0.1 * e;
            }
            let scale = norm(&u);
            let u: Vec<f64> = u.iter().map(|c| c / scale).collect();
            let coeffs: Vec<f64> = raw.iter().map(|a| a / scale).collect();
            let mut z = u.clone();
            for (s, a) in atoms.iter().zip(&coeffs) {
                for (zi, si) in z.iter_mut().zip(s) {
                    *zi -= a * si;
                }
            }
            let t_dim = seed as usize % dim;
            let mut basis: Vec<Vec<f64>> = Vec::new();
            for _ in 0..t_dim {
                let mut b = gauss(dim);
                for q in &basis {
                    let c = dot(&b, q);
                    b.iter_mut().zip(q).for_each(|(bi, qi)| *bi -= c * qi);
                }
                basis.push(unit(b));
            }
            IncrementCase {
                u,
                atoms,
                coeffs,
                z,
                subspace_basis: basis,
            }
        })
    }

    proptest! {
        #[test]
        fn increment_inequality_holds(case in case_strategy()) {
            let r = verify_increment(&case).unwrap();
            prop_assert!(r.pass, "lhs {} rhs {}", r.lhs, r.rhs);
        }

        #[test]
        fn convexity_inequality_holds(
            data in prop::collection::vec((0.0f64..10.0, 0.0f64..=1.0, 0.0f64..=1.0), 1..40)
        ) {
            let cols = ColumnPotentials {
                col_sq_norms: data.iter().map(|d| d.0).collect(),
                theta: data.iter().map(|d| d.1).collect(),
                gamma: data.iter().map(|d| d.2).collect(),
            };
            prop_assert!(verify_convexity(&cols).unwrap().pass);
        }
    }
}
