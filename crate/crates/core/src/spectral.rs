//! Fourier-multiplier calculus on the periodic grid.
//!
//! The Laplacian is the second-order lattice Laplacian, diagonal in the
//! discrete Fourier basis with symbol `-|ξ|_h^2`,
//! `|ξ|_h^2 = Σ_a (4/h²) sin²(ξ_a h / 2)`, `ξ_a = (π/R) k_a`,
//! `k_a ∈ [-n/2, n/2)`. Its heat kernel is entrywise positive, which is what
//! makes the semigroup domination and kernel positivity statements exact in
//! the discrete model. Derivatives are forward differences, so
//! `Σ_j |Riesz_j|² = 1` on every nonzero mode.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

const IMAG_RESIDUE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Multiplier {
    /// `e^{-t|ξ|²}`
    Heat(f64),
    /// `-|ξ|²`
    Lap,
    /// `|ξ|`
    SqrtLap,
    /// `|ξ|^{-1}`, zero on the mean mode.
    InvSqrtLap,
    /// `|ξ|^{-2}`, zero on the mean mode.
    InvLap,
    /// Forward difference along a 0-based axis.
    Deriv(usize),
    /// `Deriv(j) / |ξ|`, zero on the mean mode.
    Riesz(usize),
}

/// FFT plans and per-mode symbols for one grid. Cheap to share across threads.
pub struct Spectral {
    grid: GridSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `|ξ|_h²` per flat index in FFT order.
    lap: Vec<f64>,
    /// Forward-difference symbol per axis and 1D frequency index.
    diff: Vec<Complex64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        let n = grid.n;
        let h = grid.spacing();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let axis_sq: Vec<f64> =
            (0..n).map(|i| (2.0 / h * (PI * i as f64 / n as f64).sin()).powi(2)).collect();
        let diff: Vec<Complex64> = (0..n)
            .map(|i| (Complex64::from_polar(1.0, 2.0 * PI * i as f64 / n as f64) - 1.0) / h)
            .collect();
        let mut idx = vec![0; grid.d];
        let lap = (0..grid.len())
            .map(|k| {
                grid.multi_index(k, &mut idx);
                idx.iter().map(|&i| axis_sq[i]).sum()
            })
            .collect();
        Self { grid, fwd, inv, lap, diff }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `|ξ|_h²` for every mode in FFT order; entry 0 is the mean mode.
    pub fn lap_symbols(&self) -> &[f64] {
        &self.lap
    }

    /// Largest eigenvalue of `-Δ_h`, `4d/h²`.
    pub fn lap_max(&self) -> f64 {
        4.0 * self.grid.d as f64 / self.grid.spacing().powi(2)
    }

    /// Smallest nonzero eigenvalue of `-Δ_h`.
    pub fn lap_gap(&self) -> f64 {
        (2.0 / self.grid.spacing() * (PI / self.grid.n as f64).sin()).powi(2)
    }

    fn axis_frequency(&self, flat: usize, axis: usize) -> usize {
        (flat / self.grid.stride(axis)) % self.grid.n
    }

    pub fn symbol(&self, m: Multiplier, flat: usize) -> Complex64 {
        let s = self.lap[flat];
        let inv_or_zero = |v: f64| if flat == 0 { 0.0 } else { v };
        match m {
            Multiplier::Heat(t) => Complex64::new((-t * s).exp(), 0.0),
            Multiplier::Lap => Complex64::new(-s, 0.0),
            Multiplier::SqrtLap => Complex64::new(s.sqrt(), 0.0),
            Multiplier::InvSqrtLap => Complex64::new(inv_or_zero(1.0 / s.sqrt()), 0.0),
            Multiplier::InvLap => Complex64::new(inv_or_zero(1.0 / s), 0.0),
            Multiplier::Deriv(j) => self.diff[self.axis_frequency(flat, j)],
            Multiplier::Riesz(j) => {
                if flat == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    self.diff[self.axis_frequency(flat, j)] / s.sqrt()
                }
            }
        }
    }

    fn check_multiplier(&self, m: Multiplier) -> Result<()> {
        match m {
            Multiplier::Heat(t) if t < 0.0 => Err(Error::NegativeTime(t)),
            Multiplier::Heat(t) if !t.is_finite() => {
                Err(Error::InvalidParameter(format!("heat time {t}")))
            }
            Multiplier::Deriv(j) | Multiplier::Riesz(j) if j >= self.grid.d => Err(
                Error::InvalidParameter(format!("axis {j} out of range for d = {}", self.grid.d)),
            ),
            _ => Ok(()),
        }
    }

    /// In-place n-dimensional transform over all axes. The inverse is unnormalized.
    pub fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        let n = self.grid.n;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.grid.d {
            let s = self.grid.stride(axis);
            if s == 1 {
                plan.process_with_scratch(buf, &mut scratch);
                continue;
            }
            let outer = buf.len() / (n * s);
            for o in 0..outer {
                for inner in 0..s {
                    let base = o * n * s + inner;
                    for (j, c) in line.iter_mut().enumerate() {
                        *c = buf[base + j * s];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, c) in line.iter().enumerate() {
                        buf[base + j * s] = *c;
                    }
                }
            }
        }
    }

    /// Applies a real symbol given per mode, in place on real values.
    pub(crate) fn apply_real_symbol(&self, values: &mut [f64], symbol: &[f64]) {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, false);
        for (c, &m) in buf.iter_mut().zip(symbol) {
            *c *= m;
        }
        self.transform(&mut buf, true);
        let scale = 1.0 / values.len() as f64;
        for (v, c) in values.iter_mut().zip(&buf) {
            *v = c.re * scale;
        }
    }

    pub fn heat_symbols(&self, t: f64) -> Vec<f64> {
        self.lap.iter().map(|s| (-t * s).exp()).collect()
    }

    pub fn apply(&self, f: &Field, m: Multiplier) -> Result<Field> {
        if f.spec() != &self.grid {
            return Err(Error::GridMismatch);
        }
        self.check_multiplier(m)?;
        let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, false);
        let mut sym_max: f64 = 0.0;
        for (k, c) in buf.iter_mut().enumerate() {
            let s = self.symbol(m, k);
            sym_max = sym_max.max(s.norm());
            *c *= s;
        }
        self.transform(&mut buf, true);
        let scale = 1.0 / buf.len() as f64;
        let mut re_max: f64 = 0.0;
        let mut im_max: f64 = 0.0;
        let values: Vec<f64> = buf
            .iter()
            .map(|c| {
                re_max = re_max.max((c.re * scale).abs());
                im_max = im_max.max((c.im * scale).abs());
                c.re * scale
            })
            .collect();
        let reference = re_max.max(f.max_abs() * sym_max);
        if im_max > IMAG_RESIDUE_TOL * reference && im_max > f64::MIN_POSITIVE {
            return Err(Error::ImaginaryResidue { residue: im_max, scale: reference });
        }
        Ok(Field::from_raw(self.grid, values))
    }

    pub fn heat(&self, f: &Field, t: f64) -> Result<Field> {
        self.apply(f, Multiplier::Heat(t))
    }
}

/// Heat semigroup `e^{tΔ_h} f`.
pub fn heat_apply(spectral: &Spectral, f: &Field, t: f64) -> Result<Field> {
    spectral.heat(f, t)
}

pub fn apply_multiplier(spectral: &Spectral, f: &Field, m: Multiplier) -> Result<Field> {
    spectral.apply(f, m)
}
