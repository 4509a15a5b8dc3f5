//! Dense column storage, the learned model and residual bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `‖v‖ = 1` for anything treated as a unit vector.
pub const UNIT_TOL: f64 = 1e-9;

/// Relative tolerance of the reconstruction identity `x_i = (A'Y')_i + z_i`.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `(ξ)₊ = max{0, ξ}`.
#[inline]
pub fn positive_part(xi: f64) -> f64 {
    if xi > 0.0 {
        xi
    } else {
        0.0
    }
}

pub(crate) fn check_unit(v: &[f64], what: &str) -> Result<()> {
    let n = norm(v);
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::Contract(format!(
            "{what} must be a unit vector (norm {n})"
        )));
    }
    Ok(())
}

/// Observation matrix `X ∈ ℝ^{d×n}`, stored column-contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    dim: usize,
    len: usize,
    data: Vec<f64>,
    col_norms: Vec<f64>,
    frob_sq: f64,
}

impl SignalMatrix {
    /// Builds from column-major data: column `i` occupies `data[i*d..(i+1)*d]`.
    pub fn new(dim: usize, len: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || len == 0 {
            return Err(Error::Input(format!(
                "signal matrix must be at least 1x1 (got {dim}x{len})"
            )));
        }
        if data.len() != dim * len {
            return Err(Error::Dimension {
                expected: dim * len,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite entry at row {}, column {}",
                pos % dim,
                pos / dim
            )));
        }
        let col_sq: Vec<f64> = data.chunks_exact(dim).map(norm_sq).collect();
        let frob_sq = col_sq.iter().sum();
        let col_norms = col_sq.into_iter().map(f64::sqrt).collect();
        Ok(Self {
            dim,
            len,
            data,
            col_norms,
            frob_sq,
        })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let dim = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(dim * columns.len());
        for (i, c) in columns.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::Input(format!(
                    "column {i} has {} entries, expected {dim}",
                    c.len()
                )));
            }
            data.extend_from_slice(c);
        }
        Self::new(dim, columns.len(), data)
    }

    /// Builds from matrix rows (the on-disk CSV orientation).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let len = rows.first().map_or(0, Vec::len);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != len {
                return Err(Error::Input(format!(
                    "row {r} has {} entries, expected {len}",
                    row.len()
                )));
            }
        }
        let mut data = vec![0.0; dim * len];
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                data[c * dim + r] = v;
            }
        }
        Self::new(dim, len, data)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|r| (0..self.len).map(|c| self.data[c * self.dim + r]).collect())
            .collect()
    }

    /// Ambient dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of signals `n`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn col(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn col_norm(&self, i: usize) -> f64 {
        self.col_norms[i]
    }

    pub fn col_norms(&self) -> &[f64] {
        &self.col_norms
    }

    /// `‖X‖_F²`.
    pub fn frob_sq(&self) -> f64 {
        self.frob_sq
    }

    pub fn as_column_major(&self) -> &[f64] {
        &self.data
    }
}

/// A learned dictionary `A'` (unit atoms) with column-sparse codes `Y'`.
///
/// `codes[i]` lists `(atom_index, coefficient)` pairs for signal `i` in the
/// order the atoms were applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictModel {
    pub atoms: Vec<Vec<f64>>,
    pub codes: Vec<Vec<(usize, f64)>>,
}

impl DictModel {
    pub fn empty(num_signals: usize) -> Self {
        Self {
            atoms: Vec::new(),
            codes: vec![Vec::new(); num_signals],
        }
    }

    /// `m'`, the number of atoms.
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// `k'`, the longest code.
    pub fn max_code_len(&self) -> usize {
        self.codes.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Checks unit atoms of dimension `dim` and well-formed codes.
    pub fn validate(&self, dim: usize) -> Result<()> {
        for (j, a) in self.atoms.iter().enumerate() {
            if a.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: a.len(),
                });
            }
            check_unit(a, &format!("atom {j}"))?;
        }
        let mut seen = vec![usize::MAX; self.atoms.len()];
        for (i, code) in self.codes.iter().enumerate() {
            for &(j, c) in code {
                if j >= self.atoms.len() {
                    return Err(Error::Input(format!(
                        "code {i} references atom {j} but only {} exist",
                        self.atoms.len()
                    )));
                }
                if seen[j] == i {
                    return Err(Error::Input(format!(
                        "code {i} references atom {j} twice"
                    )));
                }
                if !c.is_finite() {
                    return Err(Error::Input(format!("code {i} has a non-finite value")));
                }
                seen[j] = i;
            }
        }
        Ok(())
    }

    /// Column `i` of `A'Y'`.
    pub fn reconstruct_column(&self, i: usize, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(j, c) in &self.codes[i] {
            for (o, a) in out.iter_mut().zip(&self.atoms[j]) {
                *o += c * a;
            }
        }
        out
    }

    /// Column `i` of `X − A'Y'`.
    pub fn residual_column(&self, x: &SignalMatrix, i: usize) -> Vec<f64> {
        let mut r = x.col(i).to_vec();
        for &(j, c) in &self.codes[i] {
            for (o, a) in r.iter_mut().zip(&self.atoms[j]) {
                *o -= c * a;
            }
        }
        r
    }

    /// Per-column `‖x_i − (A'Y')_i‖²`.
    pub fn residual_sq_norms(&self, x: &SignalMatrix) -> Result<Vec<f64>> {
        if self.codes.len() != x.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                got: self.codes.len(),
            });
        }
        if let Some(a) = self.atoms.iter().find(|a| a.len() != x.dim()) {
            return Err(Error::Dimension {
                expected: x.dim(),
                got: a.len(),
            });
        }
        Ok((0..x.len())
            .map(|i| norm_sq(&self.residual_column(x, i)))
            .collect())
    }

    /// `‖X − A'Y'‖_F²`.
    pub fn residual_frob_sq(&self, x: &SignalMatrix) -> Result<f64> {
        Ok(self.residual_sq_norms(x)?.iter().sum())
    }
}

/// Per-column residuals `z_i⁽ᵗ⁾` of a learning run and the potentials built on them.
#[derive(Debug, Clone)]
pub struct ResidualState {
    residuals: Vec<Vec<f64>>,
    sq_norms: Vec<f64>,
    support_counts: Vec<usize>,
    phi: f64,
    frob_sq: f64,
    t: usize,
}

impl ResidualState {
    /// `z_i⁽⁰⁾ = x_i`.
    pub fn new(x: &SignalMatrix) -> Self {
        let residuals: Vec<Vec<f64>> = x.columns().map(<[f64]>::to_vec).collect();
        let sq_norms: Vec<f64> = residuals.iter().map(|z| norm_sq(z)).collect();
        let phi = sq_norms.iter().sum();
        Self {
            residuals,
            support_counts: vec![0; x.len()],
            sq_norms,
            phi,
            frob_sq: x.frob_sq(),
            t: 0,
        }
    }

    pub fn residual(&self, i: usize) -> &[f64] {
        &self.residuals[i]
    }

    pub fn residuals(&self) -> &[Vec<f64>] {
        &self.residuals
    }

    /// Cached `‖z_i⁽ᵗ⁾‖²` per column.
    pub fn sq_norms(&self) -> &[f64] {
        &self.sq_norms
    }

    pub fn support_counts(&self) -> &[usize] {
        &self.support_counts
    }

    pub fn max_support(&self) -> usize {
        self.support_counts.iter().copied().max().unwrap_or(0)
    }

    /// `Φ⁽ᵗ⁾ = Σ_i ‖z_i⁽ᵗ⁾‖²`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `ψ⁽ᵗ⁾ = Φ⁽ᵗ⁾ / ‖X‖_F²`, zero for an all-zero `X`.
    pub fn psi(&self) -> f64 {
        if self.frob_sq > 0.0 {
            self.phi / self.frob_sq
        } else {
            0.0
        }
    }

    /// `θ_i⁽ᵗ⁾ = ‖z_i⁽ᵗ⁾‖² / ‖x_i‖²`; zero-norm columns report 0.
    pub fn theta(&self, x: &SignalMatrix, i: usize) -> f64 {
        let xs = x.col_norm(i) * x.col_norm(i);
        if xs > 0.0 {
            self.sq_norms[i] / xs
        } else {
            0.0
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Installs the updated residuals of one iteration and advances `t`.
    pub(crate) fn commit(&mut self, updates: Vec<ColumnUpdate>) {
        for u in updates {
            self.residuals[u.column] = u.residual;
            self.sq_norms[u.column] = u.sq_norm;
            self.support_counts[u.column] += 1;
        }
        self.phi = self.sq_norms.iter().sum();
        self.t += 1;
    }
}

/// One accepted projection in an iteration.
#[derive(Debug, Clone)]
pub(crate) struct ColumnUpdate {
    pub column: usize,
    pub coeff: f64,
    pub residual: Vec<f64>,
    pub sq_norm: f64,
}

/// In-place `z ← z − ⟨z, v⟩ v`; returns the coefficient. `v` is assumed unit.
#[inline]
pub(crate) fn project_out(z: &mut [f64], v: &[f64]) -> f64 {
    let c = dot(z, v);
    for (zi, vi) in z.iter_mut().zip(v) {
        *zi -= c * vi;
    }
    c
}

/// `z − ⟨z, v⟩ v` together with the coefficient `⟨z, v⟩`.
pub fn residual_update(z: &[f64], v: &[f64]) -> Result<(Vec<f64>, f64)> {
    if z.len() != v.len() {
        return Err(Error::Dimension {
            expected: z.len(),
            got: v.len(),
        });
    }
    check_unit(v, "update direction")?;
    let mut out = z.to_vec();
    let c = project_out(&mut out, v);
    Ok((out, c))
}
