//! Fractional powers of `L` by time quadrature over the semigroup, and the
//! dense Green matrices, Green mass and perturbation kernel `W`.

use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::dense::{DenseOperator, ZeroMode};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::quadrature::{build_quadrature, Power, TimeQuadrature};
use crate::semigroup::{check_potential, splitting_step, Strang, TAU0};
use crate::spectral::Spectral;

pub use crate::quadrature::{C1, C2};

/// `Γ((d-1)/2) / (2π^{(d+1)/2})`, the constant in `Γ̃₀(x) = c_d |x|^{1-d}`.
pub fn c_d(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("c_d needs d >= 2, got {d}")));
    }
    let d = d as f64;
    Ok(libm::tgamma((d - 1.0) / 2.0) / (2.0 * PI.powf((d + 1.0) / 2.0)))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FracSettings {
    /// Relative tolerance of the scalar identity.
    pub tol: f64,
    /// Largest splitting step.
    pub tau0: f64,
}

impl Default for FracSettings {
    fn default() -> Self {
        Self { tol: 1e-6, tau0: TAU0 }
    }
}

fn negative(power: Power) -> bool {
    power != Power::PosHalf
}

/// `Σ_i w_i φ(t_i) K_{t_i} f` (with `K_t - I` for the positive power),
/// evolving through the sorted nodes with steps of at most
/// [`splitting_step`]`(tau0, v)` and Richardson extrapolation in the step.
pub fn frac_power_apply(
    spectral: &Spectral,
    f: &Field,
    v: &Field,
    quad: &TimeQuadrature,
    tau0: f64,
) -> Result<Field> {
    f.check_same_grid(v)?;
    if f.spec() != spectral.grid() {
        return Err(Error::GridMismatch);
    }
    check_potential(v)?;
    if !(tau0 > 0.0) {
        return Err(Error::InvalidParameter(format!("tau0 must be positive, got {tau0}")));
    }
    let power = quad.power;
    let f = if v.is_zero() && negative(power) {
        if f.mean().abs() > 1e-12 * f.max_abs() {
            return Err(Error::SpectralRange(0.0, quad.range.1));
        }
        f.mean_zero()
    } else {
        f.clone()
    };
    let prop = Strang::new(spectral, v)?;
    let times: Vec<f64> = quad.nodes.iter().map(|n| n.0).collect();
    let f0 = f.values();
    let mut acc = prop.extrapolated_sum(f0, &times, splitting_step(tau0, v), |i, u, acc| {
        let (t, w) = quad.nodes[i];
        let c = w * power.time_weight(t);
        if power == Power::PosHalf {
            for ((a, x), y) in acc.iter_mut().zip(u).zip(f0) {
                *a += c * (x - y);
            }
        } else {
            for (a, x) in acc.iter_mut().zip(u) {
                *a += c * x;
            }
        }
    })?;
    if quad.tail != 0.0 {
        for (a, f0) in acc.iter_mut().zip(f.values()) {
            *a += quad.tail * f0;
        }
    }
    Field::new(*f.spec(), acc)
}

/// Spectral interval `[λ_min, λ_max]` of the restricted operator used to size
/// the quadrature. With a dense operator this is exact; otherwise the upper
/// end is `max|ξ|² + max V` and the lower end is half the power-iteration
/// estimate of the ground state of `e^{-L}`.
pub fn estimate_range(spectral: &Spectral, v: &Field, dense: Option<&DenseOperator>) -> Result<(f64, f64)> {
    check_potential(v)?;
    if let Some(op) = dense {
        return op.positive_range();
    }
    let hi = spectral.lap_max() + v.max();
    if v.is_zero() {
        return Ok((spectral.lap_gap(), hi));
    }
    let prop = Strang::new(spectral, v)?;
    let mut u = vec![1.0; v.values().len()];
    let mut est = f64::NAN;
    for _ in 0..500 {
        let norm0 = l2(&u);
        prop.evolve(&mut u, 1.0, (1.0 / TAU0) as usize)?;
        let norm1 = l2(&u);
        if norm1 <= 0.0 {
            return Err(Error::SpectralRange(f64::INFINITY, hi));
        }
        let next = -(norm1 / norm0).ln();
        u.iter_mut().for_each(|x| *x /= norm1);
        let done = (next - est).abs() <= 1e-6 * next.abs();
        est = next;
        if done {
            break;
        }
    }
    let lo = 0.5 * est;
    if !(lo > 0.0) {
        return Err(Error::SpectralRange(lo, hi));
    }
    Ok((lo.min(hi), hi))
}

fn l2(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Range estimate, quadrature construction and application in one call.
pub fn frac_power(
    spectral: &Spectral,
    f: &Field,
    v: &Field,
    power: Power,
    dense: Option<&DenseOperator>,
    settings: &FracSettings,
) -> Result<Field> {
    let range = estimate_range(spectral, v, dense)?;
    let quad = build_quadrature(power, range, settings.tol)?;
    frac_power_apply(spectral, f, v, &quad, settings.tau0)
}

fn zero_rule(op: &DenseOperator, power: Power) -> ZeroMode {
    if negative(power) && op.has_zero_mode() {
        ZeroMode::Zero
    } else {
        ZeroMode::Apply
    }
}

/// Matrix of `L^{power}` acting on grid values, the zero mode dropped for
/// negative powers of a singular operator.
pub fn dense_power(op: &DenseOperator, power: Power) -> Result<Mat<f64>> {
    let p = power.exponent();
    op.matrix_function(|l| l.max(0.0).powf(p), zero_rule(op, power))
}

/// `L^{power} f` through the eigendecomposition.
pub fn dense_power_apply(op: &DenseOperator, power: Power, f: &Field) -> Result<Field> {
    let p = power.exponent();
    op.apply_function(|l| l.max(0.0).powf(p), zero_rule(op, power), f)
}

fn green_power(power: Power) -> Result<f64> {
    match power {
        Power::NegOne | Power::NegHalf => Ok(power.exponent()),
        Power::PosHalf => Err(Error::InvalidParameter("Green matrices are for powers -1 and -1/2".into())),
    }
}

/// Integral kernel of `L^{power}` for `power ∈ {-1, -1/2}`: `Γ` or `Γ̃`, so
/// that `Σ_y G(x, y) f(y) h^d` realizes the operator.
///
/// A singular operator is accepted only with `mean_zero`, which restricts to
/// the complement of its null space.
pub fn dense_green(op: &DenseOperator, power: Power, mean_zero: bool) -> Result<Mat<f64>> {
    let p = green_power(power)?;
    if op.has_zero_mode() && !mean_zero {
        return Err(Error::SingularOperator("L has a zero eigenvalue; restrict to mean-zero".into()));
    }
    let hd = op.grid().cell_volume();
    op.matrix_function(|l| l.powf(p) / hd, ZeroMode::Zero)
}

/// Column `y` of [`dense_green`].
pub fn green_column(op: &DenseOperator, power: Power, y: usize, mean_zero: bool) -> Result<Vec<f64>> {
    let p = green_power(power)?;
    if op.has_zero_mode() && !mean_zero {
        return Err(Error::SingularOperator("L has a zero eigenvalue; restrict to mean-zero".into()));
    }
    let hd = op.grid().cell_volume();
    let w = op.function_values(|l| l.powf(p) / hd, ZeroMode::Zero)?;
    let mut e = vec![0.0; op.dim()];
    e[y] = 1.0;
    Ok(op.apply_weights(&w, &e))
}

/// `Σ_z V(z) Γ(z, y) h^d`.
pub fn green_mass(op: &DenseOperator, v: &Field, y: usize) -> Result<f64> {
    if v.spec() != op.grid() {
        return Err(Error::GridMismatch);
    }
    if v.is_zero() {
        return Ok(0.0);
    }
    let col = green_column(op, Power::NegOne, y, false)?;
    let hd = op.grid().cell_volume();
    Ok(v.values().iter().zip(&col).map(|(a, b)| a * b).sum::<f64>() * hd)
}

/// `(-Δ)^{1/2}` applied to every column of `m`.
pub fn sqrt_lap_columns(spectral: &Spectral, m: &Mat<f64>) -> Mat<f64> {
    let sym: Vec<f64> = spectral.lap_symbols().iter().map(|s| s.sqrt()).collect();
    let mut out = m.clone();
    for j in 0..out.ncols() {
        spectral.apply_real_symbol(out.col_as_slice_mut(j), &sym);
    }
    out
}

/// Matrix of `A = (-Δ)^{1/2} L^{-1/2}` on grid values.
pub fn a_matrix(spectral: &Spectral, op: &DenseOperator) -> Result<Mat<f64>> {
    if spectral.grid() != op.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(sqrt_lap_columns(spectral, &dense_power(op, Power::NegHalf)?))
}

/// The kernel `W` with `A = I + c₂ W` in the integral convention.
#[derive(Debug, Clone)]
pub struct PerturbationKernel {
    pub grid: crate::grid::GridSpec,
    pub matrix: Mat<f64>,
}

impl PerturbationKernel {
    pub fn max_abs(&self) -> f64 {
        crate::dense::max_abs(&self.matrix)
    }

    pub fn min_entry(&self) -> f64 {
        let m = &self.matrix;
        (0..m.ncols()).fold(f64::INFINITY, |acc, j| m.col_as_slice(j).iter().fold(acc, |a, &v| a.min(v)))
    }

    /// `Σ_x W(x, u) h^d` for every `u`.
    pub fn column_masses(&self) -> Vec<f64> {
        let hd = self.grid.cell_volume();
        (0..self.matrix.ncols()).map(|j| self.matrix.col_as_slice(j).iter().sum::<f64>() * hd).collect()
    }
}

/// `W = c₂^{-1}(A - I) / h^d`. When `V ≡ 0` the identity is replaced by the
/// projection onto mean-zero fields, the range of `A`.
pub fn perturbation_w(spectral: &Spectral, op: &DenseOperator) -> Result<PerturbationKernel> {
    let a = a_matrix(spectral, op)?;
    let n = a.nrows();
    let p0 = if op.has_zero_mode() { 1.0 / n as f64 } else { 0.0 };
    let scale = 1.0 / (C2 * op.grid().cell_volume());
    let matrix = Mat::<f64>::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 } - p0;
        (a[(i, j)] - id) * scale
    });
    Ok(PerturbationKernel { grid: *op.grid(), matrix })
}
