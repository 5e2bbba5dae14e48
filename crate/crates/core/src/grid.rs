//! Periodic box discretization and sampled fields.
//!
//! The torus `[-R, R)^d` is sampled at `n` points per axis with spacing
//! `h = 2R/n`. Values are stored row-major with axis 0 slowest, so the flat
//! index of a multi-index `(i_0, ..., i_{d-1})` is `sum_a i_a * n^(d-1-a)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    /// Half-width of the box.
    pub r: f64,
}

impl GridSpec {
    pub fn new(d: usize, n: usize, r: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "samples per axis must be even and >= 4, got {n}"
            )));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidGrid(format!("half-width must be positive, got {r}")));
        }
        if n.checked_pow(d as u32).is_none() {
            return Err(Error::InvalidGrid(format!("{n}^{d} points overflow")));
        }
        Ok(Self { d, n, r })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.r / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Stride of `axis` in the flat layout.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.d - 1 - axis) as u32)
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.d).rev() {
            out[a] = flat % self.n;
            flat /= self.n;
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Coordinate of sample `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.r + i as f64 * self.spacing()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.d];
        self.multi_index(flat, &mut idx);
        idx.iter().map(|&i| self.coord(i)).collect()
    }

    /// Index of the grid point nearest to `x`, wrapping periodically.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let h = self.spacing();
        let n = self.n as i64;
        let idx: Vec<usize> = x
            .iter()
            .map(|&c| (((c + self.r) / h).round() as i64).rem_euclid(n) as usize)
            .collect();
        self.flat_index(&idx)
    }

    /// Flat index of the grid point at the origin (always on the grid since `n` is even).
    pub fn origin(&self) -> usize {
        self.flat_index(&vec![self.n / 2; self.d])
    }

    /// Torus volume `(2R)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.r).powi(self.d as i32)
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.d, n, self.r)
    }

    pub fn with_d(&self, d: usize) -> Result<Self> {
        Self::new(d, self.n, self.r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    spec: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::LengthMismatch { expected: spec.len(), got: values.len() });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { point: spec.point(k), value: values[k] });
        }
        Ok(Self { spec, values })
    }

    /// Constructor for internal paths whose values are finite by construction.
    pub(crate) fn from_raw(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, values }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, values: vec![0.0; spec.len()] }
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        Self { spec, values: vec![c; spec.len()] }
    }

    /// Discrete delta of unit mass at `flat`.
    pub fn delta(spec: GridSpec, flat: usize) -> Self {
        let mut f = Self::zeros(spec);
        f.values[flat] = 1.0 / spec.cell_volume();
        f
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { spec: self.spec, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            spec: self.spec,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }

    pub fn sub(&self, other: &Field) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Field) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn mean_zero(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Samples `func` at every grid point.
pub fn sample(spec: GridSpec, func: impl Fn(&[f64]) -> f64) -> Result<Field> {
    let mut idx = vec![0usize; spec.d];
    let mut x = vec![0.0; spec.d];
    let mut values = Vec::with_capacity(spec.len());
    for k in 0..spec.len() {
        spec.multi_index(k, &mut idx);
        for (xa, &ia) in x.iter_mut().zip(&idx) {
            *xa = spec.coord(ia);
        }
        let v = func(&x);
        if !v.is_finite() {
            return Err(Error::NonFinite { point: x, value: v });
        }
        values.push(v);
    }
    Ok(Field { spec, values })
}

/// Riemann-sum `L^p` norm, optionally restricted to the grid points where
/// `region` holds. An empty region yields zero and logs a warning.
pub fn lp_norm(f: &Field, p: f64, region: Option<&dyn Fn(&[f64]) -> bool>) -> f64 {
    assert!(p >= 1.0, "lp_norm needs p >= 1, got {p}");
    let spec = f.spec;
    let sum = match region {
        None => f.values.iter().map(|v| v.abs().powf(p)).sum::<f64>(),
        Some(pred) => {
            let mut idx = vec![0usize; spec.d];
            let mut x = vec![0.0; spec.d];
            let mut count = 0usize;
            let mut s = 0.0;
            for (k, v) in f.values.iter().enumerate() {
                spec.multi_index(k, &mut idx);
                for (xa, &ia) in x.iter_mut().zip(&idx) {
                    *xa = spec.coord(ia);
                }
                if pred(&x) {
                    count += 1;
                    s += v.abs().powf(p);
                }
            }
            if count == 0 {
                log::warn!("lp_norm: region selects no grid points");
            }
            s
        }
    };
    (sum * spec.cell_volume()).powf(1.0 / p)
}

/// Discrete weak-`L^1` functional `sup_λ λ |{|f| > λ}|`.
///
/// The distribution function is a step function, so the supremum is attained
/// at a sample value: with `v_(1) >= v_(2) >= ...` the sorted magnitudes it is
/// `max_k v_(k) * k * h^d`.
pub fn weak_l1(f: &Field) -> f64 {
    let mut mags: Vec<f64> = f.values.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let cell = f.spec.cell_volume();
    mags.iter()
        .enumerate()
        .map(|(k, &v)| v * (k + 1) as f64 * cell)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(0, 4, 1.0).is_err());
        assert!(GridSpec::new(1, 5, 1.0).is_err());
        assert!(GridSpec::new(1, 2, 1.0).is_err());
        assert!(GridSpec::new(1, 4, 0.0).is_err());
        assert!(GridSpec::new(1, 4, -1.0).is_err());
    }

    #[test]
    fn sample_constant_and_coordinates() {
        let g = GridSpec::new(1, 4, 1.0).unwrap();
        assert_eq!(sample(g, |_| 1.0).unwrap().values(), &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(sample(g, |x| x[0]).unwrap().values(), &[-1.0, -0.5, 0.0, 0.5]);
        let g2 = GridSpec::new(2, 4, 2.0).unwrap();
        let f = sample(g2, |x| x[0] * x[0] + x[1] * x[1]).unwrap();
        assert_eq!(f.values()[0], 8.0);
    }

    #[test]
    fn sample_rejects_non_finite() {
        let g = GridSpec::new(1, 4, 1.0).unwrap();
        let err = sample(g, |x| 1.0 / x[0]).unwrap_err();
        match err {
            Error::NonFinite { point, .. } => assert_eq!(point, vec![0.0]),
            e => panic!("unexpected {e}"),
        }
    }

    // n = 2 is below the grid minimum, so these build the field directly.
    fn tiny(values: Vec<f64>) -> Field {
        Field::from_raw(GridSpec { d: 1, n: values.len(), r: values.len() as f64 / 2.0 }, values)
    }

    #[test]
    fn lp_norm_examples() {
        let f = tiny(vec![3.0, 4.0]);
        assert_relative_eq!(lp_norm(&f, 2.0, None), 5.0);
        assert_relative_eq!(lp_norm(&f, 1.0, None), 7.0);
        let first = |x: &[f64]| x[0] < 0.0;
        assert_relative_eq!(lp_norm(&f, 2.0, Some(&first)), 3.0);
        let nothing = |_: &[f64]| false;
        assert_eq!(lp_norm(&f, 2.0, Some(&nothing)), 0.0);
    }

    #[test]
    fn weak_l1_examples() {
        assert_eq!(weak_l1(&tiny(vec![3.0, 1.0])), 3.0);
        assert_eq!(weak_l1(&tiny(vec![0.0, 0.0])), 0.0);
        let g = GridSpec::new(1, 4, 2.0).unwrap();
        assert_eq!(weak_l1(&Field::constant(g, 2.0)), 8.0);
    }

    #[test]
    fn index_roundtrip() {
        let g = GridSpec::new(3, 6, 1.5).unwrap();
        let mut idx = [0; 3];
        for k in 0..g.len() {
            g.multi_index(k, &mut idx);
            assert_eq!(g.flat_index(&idx), k);
        }
        assert_eq!(g.point(g.origin()), vec![0.0; 3]);
        assert_eq!(g.nearest(&[0.01, -1.5, 1.49]), g.flat_index(&[3, 0, 0]));
    }

    #[test]
    fn field_rejects_nan() {
        let g = GridSpec::new(1, 4, 1.0).unwrap();
        assert!(Field::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(Field::new(g, vec![0.0; 3]).is_err());
    }
}
