//! Dense matrix oracle for `L = -Δ_h + diag(V)`.
//!
//! The Laplacian columns are produced by the same multiplier code the
//! transform path uses, so both paths share one discrete operator.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::spectral::Spectral;

pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Largest `n^d` for which dense operators may be built; `RZLAB_DENSE_CAP` overrides.
pub fn dense_cap() -> usize {
    std::env::var("RZLAB_DENSE_CAP")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_DENSE_CAP)
}

/// How `φ` treats eigenvalues that are zero up to round-off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroMode {
    /// Force `φ(0) = 0` (pseudo-inverse convention for `V ≡ 0`).
    Zero,
    /// Evaluate `φ` everywhere.
    Apply,
}

pub struct DenseOperator {
    grid: GridSpec,
    matrix: Mat<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<f64>,
}

impl std::fmt::Debug for DenseOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenseOperator")
            .field("grid", &self.grid)
            .field("lambda_min", &self.eigenvalues.first())
            .field("lambda_max", &self.eigenvalues.last())
            .finish()
    }
}

fn check_cap(grid: &GridSpec) -> Result<()> {
    let cap = dense_cap();
    if grid.len() > cap {
        return Err(Error::DenseCap { points: grid.len(), cap });
    }
    Ok(())
}

/// Dense matrix of `-Δ_h`, column `j` being `-Δ_h e_j`.
pub fn laplacian_matrix(spectral: &Spectral) -> Result<Mat<f64>> {
    let grid = *spectral.grid();
    check_cap(&grid)?;
    let n = grid.len();
    let mut m = Mat::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        spectral.apply_real_symbol(&mut e, spectral.lap_symbols());
        m.col_as_slice_mut(j).copy_from_slice(&e);
    }
    symmetrize(&mut m);
    Ok(m)
}

fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
}

/// Builds `L = -Δ_h + diag(V)` and its eigendecomposition.
pub fn dense_schrodinger(spectral: &Spectral, v: &Field) -> Result<DenseOperator> {
    if v.spec() != spectral.grid() {
        return Err(Error::GridMismatch);
    }
    if let Some(k) = v.values().iter().position(|&x| x < 0.0) {
        return Err(Error::NegativePotential { index: k, value: v.values()[k] });
    }
    let mut matrix = laplacian_matrix(spectral)?;
    for (j, &vj) in v.values().iter().enumerate() {
        matrix[(j, j)] += vj;
    }
    DenseOperator::from_symmetric(*spectral.grid(), matrix)
}

impl DenseOperator {
    pub fn from_symmetric(grid: GridSpec, matrix: Mat<f64>) -> Result<Self> {
        let evd = matrix
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let s = evd.S().column_vector();
        let eigenvalues: Vec<f64> = (0..matrix.nrows()).map(|i| s[i]).collect();
        let eigenvectors = evd.U().to_owned();
        Ok(Self { grid, matrix, eigenvalues, eigenvectors })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Mat<f64> {
        &self.eigenvectors
    }

    /// Threshold below which an eigenvalue counts as zero.
    pub fn zero_tol(&self) -> f64 {
        let scale = self.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        1e-9 * scale.max(1.0)
    }

    /// Smallest and largest eigenvalue above the zero threshold.
    pub fn positive_range(&self) -> Result<(f64, f64)> {
        let tol = self.zero_tol();
        let lo = self.eigenvalues.iter().copied().find(|&l| l > tol);
        match (lo, self.eigenvalues.last()) {
            (Some(lo), Some(&hi)) => Ok((lo, hi)),
            _ => Err(Error::SingularOperator("no positive eigenvalues".into())),
        }
    }

    pub fn has_zero_mode(&self) -> bool {
        self.eigenvalues.first().is_some_and(|&l| l.abs() <= self.zero_tol())
    }

    /// `φ(λ_i)` per eigenvalue under the zero-mode rule.
    pub fn function_values(&self, phi: impl Fn(f64) -> f64, zero: ZeroMode) -> Result<Vec<f64>> {
        let tol = self.zero_tol();
        self.eigenvalues
            .iter()
            .map(|&l| {
                if zero == ZeroMode::Zero && l.abs() <= tol {
                    return Ok(0.0);
                }
                let v = phi(l);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteFunction(l))
                }
            })
            .collect()
    }

    /// `Q φ(Λ) Qᵀ`.
    pub fn matrix_function(&self, phi: impl Fn(f64) -> f64, zero: ZeroMode) -> Result<Mat<f64>> {
        let w = self.function_values(phi, zero)?;
        Ok(self.combine(&w))
    }

    pub(crate) fn combine(&self, w: &[f64]) -> Mat<f64> {
        let q = &self.eigenvectors;
        let scaled = Mat::<f64>::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * w[j]);
        let mut out = &scaled * q.transpose();
        symmetrize(&mut out);
        out
    }

    /// `Q φ(Λ) Qᵀ f` without forming the matrix.
    pub fn apply_function(&self, phi: impl Fn(f64) -> f64, zero: ZeroMode, f: &Field) -> Result<Field> {
        if f.spec() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let w = self.function_values(phi, zero)?;
        Ok(Field::from_raw(self.grid, self.apply_weights(&w, f.values())))
    }

    pub(crate) fn apply_weights(&self, w: &[f64], f: &[f64]) -> Vec<f64> {
        let q = &self.eigenvectors;
        let n = self.dim();
        let mut out = vec![0.0; n];
        for j in 0..n {
            if w[j] == 0.0 {
                continue;
            }
            let col = q.col_as_slice(j);
            let c: f64 = col.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() * w[j];
            for (o, a) in out.iter_mut().zip(col) {
                *o += c * a;
            }
        }
        out
    }

    /// Frobenius-norm relative distance `‖QΛQᵀ − M‖ / ‖M‖`.
    pub fn reconstruction_error(&self) -> f64 {
        let rec = self.combine(&self.eigenvalues);
        frobenius_diff(&rec, &self.matrix) / frobenius(&self.matrix)
    }

    pub fn symmetry_error(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for j in 0..m.ncols() {
            for i in 0..j {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        worst / frobenius(m).max(f64::MIN_POSITIVE)
    }
}

pub fn matrix_function(
    op: &DenseOperator,
    phi: impl Fn(f64) -> f64,
    zero: ZeroMode,
) -> Result<Mat<f64>> {
    op.matrix_function(phi, zero)
}

pub fn frobenius(m: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        s += m.col_as_slice(j).iter().map(|v| v * v).sum::<f64>();
    }
    s.sqrt()
}

pub fn frobenius_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        s += a.col_as_slice(j).iter().zip(b.col_as_slice(j)).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    }
    s.sqrt()
}

pub fn max_abs(m: &Mat<f64>) -> f64 {
    (0..m.ncols()).fold(0.0, |acc, j| m.col_as_slice(j).iter().fold(acc, |a, v| a.max(v.abs())))
}

/// Matrix-vector product with a field.
pub fn mat_apply(m: &Mat<f64>, f: &Field) -> Field {
    let n = m.nrows();
    let mut out = vec![0.0; n];
    for (j, &fj) in f.values().iter().enumerate() {
        if fj == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(m.col_as_slice(j)) {
            *o += a * fj;
        }
    }
    Field::from_raw(*f.spec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample;
    use crate::potentials::{discretize_potential, Cap, PotentialSpec};
    use crate::spectral::Multiplier;
    use std::f64::consts::PI;

    fn lattice_eigenvalues(g: &GridSpec) -> Vec<f64> {
        let h = g.spacing();
        let n = g.n as i64;
        let mut out: Vec<f64> = (-n / 2..n / 2)
            .map(|k| (2.0 / h * (PI * k as f64 / n as f64).sin()).powi(2))
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }

    #[test]
    fn free_spectrum_is_lattice_symbol() {
        let g = GridSpec::new(1, 16, 2.0).unwrap();
        let sp = Spectral::new(g);
        let op = dense_schrodinger(&sp, &Field::zeros(g)).unwrap();
        for (a, b) in op.eigenvalues().iter().zip(lattice_eigenvalues(&g)) {
            assert!((a - b).abs() < 1e-10 * b.max(1.0), "{a} vs {b}");
        }
        // Same matrix as the three-point stencil.
        let h2 = g.spacing().powi(2);
        for i in 0..g.n {
            for j in 0..g.n {
                let stencil = match (i as i64 - j as i64).rem_euclid(g.n as i64) {
                    0 => 2.0 / h2,
                    1 => -1.0 / h2,
                    k if k == g.n as i64 - 1 => -1.0 / h2,
                    _ => 0.0,
                };
                assert!((op.matrix()[(i, j)] - stencil).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constant_shift_and_positivity() {
        let g = GridSpec::new(2, 8, 2.0).unwrap();
        let sp = Spectral::new(g);
        let free = dense_schrodinger(&sp, &Field::zeros(g)).unwrap();
        let shifted = dense_schrodinger(&sp, &Field::constant(g, 1.5)).unwrap();
        for (a, b) in free.eigenvalues().iter().zip(shifted.eigenvalues()) {
            assert!((a + 1.5 - b).abs() < 1e-10);
        }
        let v = discretize_potential(&PotentialSpec::Ce1 { eps: 0.3 }, g, Cap::Auto).unwrap();
        let op = dense_schrodinger(&sp, &v).unwrap();
        assert!(op.eigenvalues()[0] >= -1e-8);
        assert!(op.symmetry_error() <= 1e-10);
        assert!(op.reconstruction_error() <= 1e-8);
    }

    #[test]
    fn identity_function_reconstructs() {
        let g = GridSpec::new(1, 32, 4.0).unwrap();
        let sp = Spectral::new(g);
        let v = discretize_potential(&PotentialSpec::Harmonic, g, Cap::Auto).unwrap();
        let op = dense_schrodinger(&sp, &v).unwrap();
        let m = op.matrix_function(|l| l, ZeroMode::Apply).unwrap();
        assert!(frobenius_diff(&m, op.matrix()) <= 1e-8 * frobenius(op.matrix()));
    }

    #[test]
    fn inverse_sqrt_matches_multiplier() {
        let g = GridSpec::new(2, 8, 1.5).unwrap();
        let sp = Spectral::new(g);
        let op = dense_schrodinger(&sp, &Field::zeros(g)).unwrap();
        let f = sample(g, |x| (x[0] - 0.2).exp() * x[1].sin()).unwrap();
        let dense = op.apply_function(|l| l.powf(-0.5), ZeroMode::Zero, &f).unwrap();
        let spectral = sp.apply(&f, Multiplier::InvSqrtLap).unwrap();
        let err = dense.sub(&spectral).unwrap().max_abs();
        assert!(err <= 1e-8 * spectral.max_abs(), "{err}");
        assert!(matches!(
            op.apply_function(|l| if l < 1.0 { f64::NAN } else { l }, ZeroMode::Apply, &f),
            Err(Error::NonFiniteFunction(_))
        ));
    }

    #[test]
    fn cap_is_enforced() {
        let g = GridSpec::new(3, 18, 1.0).unwrap();
        let sp = Spectral::new(g);
        assert!(matches!(dense_schrodinger(&sp, &Field::zeros(g)), Err(Error::DenseCap { .. })));
    }
}
