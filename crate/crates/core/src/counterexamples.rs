//! The three counterexample potentials: grid data for the first, and scans
//! that track how the relevant norms or masses grow as a cutoff is removed.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dense::{dense_schrodinger, ZeroMode};
use crate::error::{Error, Result};
use crate::grid::{sample, Field, GridSpec};
use crate::potentials::{discretize_potential, Cap, PotentialSpec};
use crate::quadrature::{composite_gauss, gauss_legendre};
use crate::spectral::{Multiplier, Spectral};

/// Fits below this coefficient of determination are inconclusive.
pub const MIN_R2: f64 = 0.99;

/// Surface area of the unit sphere in `ℝ^d`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / libm::tgamma(d as f64 / 2.0)
}

/// Volume of the unit ball in `ℝ^k`.
pub fn ball_volume(k: usize) -> f64 {
    PI.powf(k as f64 / 2.0) / libm::tgamma(k as f64 / 2.0 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(x_i, y_i)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    LinearFit { slope, intercept: my - slope * mx, r2 }
}

// ---------------------------------------------------------------- CE1 ----

pub fn ce1_admissible(eps: f64, p: f64) -> Result<()> {
    if !(p > 2.0) || !(eps > 0.0 && eps < 1.0 - 2.0 / p) {
        return Err(Error::InvalidParameter(format!(
            "CE1 needs p > 2 and 0 < eps < 1 - 2/p, got eps = {eps}, p = {p}"
        )));
    }
    Ok(())
}

/// `(Σ z^m/(m!)², Σ m z^m/(m!)², terms)` summed until the next term is below
/// `1e-14` of the running sum.
pub fn ce1_series(z: f64) -> (f64, f64, usize) {
    let mut term = 1.0;
    let mut v = 1.0;
    let mut s1 = 0.0;
    let mut m = 0usize;
    loop {
        m += 1;
        term *= z / (m * m) as f64;
        v += term;
        s1 += m as f64 * term;
        if term < 1e-14 * v || term == 0.0 {
            return (v, s1, m + 1);
        }
    }
}

fn ce1_z(eps: f64, rho: f64) -> f64 {
    rho.powf(eps) / (eps * eps)
}

/// `v(x) = Σ_m ρ^{εm} / (ε^{2m} (m!)²)` with `ρ² = x₁² + x₂²`.
pub fn ce1_v(eps: f64, x: &[f64]) -> f64 {
    ce1_series(ce1_z(eps, x[0].hypot(x[1]))).0
}

/// `(∂₁v, ∂₂v)`; zero on the axis, where both vanish by symmetry.
pub fn ce1_grad_v(eps: f64, x: &[f64]) -> [f64; 2] {
    let rho2 = x[0] * x[0] + x[1] * x[1];
    if rho2 == 0.0 {
        return [0.0, 0.0];
    }
    let (_, s1, _) = ce1_series(ce1_z(eps, rho2.sqrt()));
    let c = eps * s1 / rho2;
    [c * x[0], c * x[1]]
}

/// Quintic smoothstep cutoff in `|x|`: `1` for `r ≤ 1`, `0` for `r ≥ 2`.
/// Returns `(φ, φ', φ'')` as functions of `r`.
pub fn cutoff(r: f64) -> (f64, f64, f64) {
    if r <= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    if r >= 2.0 {
        return (0.0, 0.0, 0.0);
    }
    let s = r - 1.0;
    let smooth = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    let d1 = 30.0 * s * s * (1.0 - s) * (1.0 - s);
    let d2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
    (1.0 - smooth, -d1, -d2)
}

#[derive(Debug, Clone)]
pub struct Ce1Data {
    pub eps: f64,
    pub p: f64,
    /// Capped potential on the grid.
    pub potential: Field,
    pub v: Field,
    pub dv: Field,
    pub phi: Field,
    pub u: Field,
    pub du: Field,
    pub g: Field,
    /// Largest series length used on the grid.
    pub terms: usize,
}

pub fn ce1_build(grid: GridSpec, eps: f64, p: f64) -> Result<Ce1Data> {
    ce1_admissible(eps, p)?;
    if grid.d < 3 {
        return Err(Error::InvalidParameter(format!("CE1 data needs d >= 3, got {}", grid.d)));
    }
    let potential = discretize_potential(&PotentialSpec::Ce1 { eps }, grid, Cap::Auto)?;
    let mut terms = 0;
    let n = grid.len();
    let (mut v, mut dv, mut phi, mut u, mut du, mut g) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let d = grid.d as f64;
    for k in 0..n {
        let x = grid.point(k);
        let rho = x[0].hypot(x[1]);
        let (vk, _, m) = ce1_series(ce1_z(eps, rho));
        terms = terms.max(m);
        let grad = ce1_grad_v(eps, &x);
        let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        let (ph, ph1, ph2) = cutoff(r);
        let (lap_phi, dphi_dr_over_r) = if r > 0.0 { (ph2 + (d - 1.0) / r * ph1, ph1 / r) } else { (0.0, 0.0) };
        v[k] = vk;
        dv[k] = grad[0];
        phi[k] = ph;
        u[k] = ph * vk;
        du[k] = dphi_dr_over_r * x[0] * vk + ph * grad[0];
        g[k] = -vk * lap_phi - 2.0 * dphi_dr_over_r * (grad[0] * x[0] + grad[1] * x[1]);
    }
    Ok(Ce1Data {
        eps,
        p,
        potential,
        v: Field::new(grid, v)?,
        dv: Field::new(grid, dv)?,
        phi: Field::new(grid, phi)?,
        u: Field::new(grid, u)?,
        du: Field::new(grid, du)?,
        g: Field::new(grid, g)?,
        terms,
    })
}

impl Ce1Data {
    /// `max |(-Δ_h + V) v|` over interior points at axis distance above
    /// `tube` cells, relative to `max(V v)` over the grid. Points on the outer
    /// layer, whose stencil wraps around the box, are excluded.
    pub fn residual(&self, spectral: &Spectral, tube: f64) -> Result<f64> {
        let grid = *self.v.spec();
        let lap = spectral.apply(&self.v, Multiplier::Lap)?;
        let vv = self.potential.zip_map(&self.v, |a, b| a * b)?;
        let scale = vv.max();
        let h = grid.spacing();
        let mut idx = vec![0; grid.d];
        let mut worst: f64 = 0.0;
        for k in 0..grid.len() {
            grid.multi_index(k, &mut idx);
            if idx.iter().any(|&i| i == 0 || i == grid.n - 1) {
                continue;
            }
            let x = grid.point(k);
            if x[0].hypot(x[1]) <= tube * h {
                continue;
            }
            worst = worst.max((-lap.values()[k] + vv.values()[k]).abs());
        }
        Ok(worst / scale)
    }

    /// Largest `|g|` outside the shell `1 ≤ |x| ≤ 2`.
    pub fn g_outside_shell(&self) -> f64 {
        let grid = *self.g.spec();
        (0..grid.len())
            .filter(|&k| {
                let r = grid.point(k).iter().map(|a| a * a).sum::<f64>().sqrt();
                !(1.0..=2.0).contains(&r)
            })
            .map(|k| self.g.values()[k].abs())
            .fold(0.0, f64::max)
    }
}

/// `∫_0^{2π} |cos θ|^p dθ`.
fn cos_moment(p: f64) -> f64 {
    2.0 * PI.sqrt() * libm::tgamma((p + 1.0) / 2.0) / libm::tgamma(p / 2.0 + 1.0)
}

/// `‖∂₁v‖_{L^p}` over `δ < ρ < 1/2`, `x' ∈ [-1/2, 1/2)^{d-2}`, where the
/// cutoff is identically one so `∂₁u = ∂₁v`. Polar coordinates in `(x₁, x₂)`
/// with Gauss–Legendre panels in `ln ρ`.
pub fn ce1_region_norm(eps: f64, p: f64, delta: f64) -> f64 {
    let (a, b) = (delta.ln(), 0.5f64.ln());
    let panels = ((b - a) / 0.25).ceil().max(1.0) as usize;
    let radial = composite_gauss(
        |s| {
            let rho = s.exp();
            let (_, s1, _) = ce1_series(ce1_z(eps, rho));
            (eps * s1).powf(p) * rho.powf(2.0 - p)
        },
        a,
        b,
        panels,
        16,
    );
    (cos_moment(p) * radial).powf(1.0 / p)
}

/// Largest `δ` with `z(δ) ≤ 0.05`, where the series is within a few percent
/// of its leading term.
pub fn ce1_delta_max(eps: f64) -> f64 {
    (0.05 * eps * eps).powf(1.0 / eps)
}

// ---------------------------------------------------------------- CE2 ----

/// `M(δ) = ∫_{δ<|x₁|, |x|<1} |x₁|^{-1} dx` in `ℝ^d`.
pub fn ce2_mass(d: usize, delta: f64) -> f64 {
    let k = d - 1;
    let vol = ball_volume(k);
    let (a, b) = (delta.ln(), 0.0);
    let panels = ((b - a) / 0.25).ceil().max(1.0) as usize;
    2.0 * vol * composite_gauss(|s| (1.0 - (2.0 * s).exp()).max(0.0).powf(k as f64 / 2.0), a, b, panels, 16)
}

/// The lower-bound profile `|x₁|^{-1/p} 𝟙_{|x|<1}`, the hyperplane `x₁ = 0`
/// taking its value at `|x₁| = h/2`.
pub fn ce2_lower_bound(grid: GridSpec, p: f64) -> Result<Field> {
    let cap = (grid.spacing() / 2.0).powf(-1.0 / p);
    sample(grid, |x| {
        if x.iter().map(|a| a * a).sum::<f64>() >= 1.0 {
            0.0
        } else if x[0] == 0.0 {
            cap
        } else {
            x[0].abs().powf(-1.0 / p).min(cap)
        }
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianSpotCheck {
    pub t: f64,
    /// `max (k_t - p_t) / max p_t`.
    pub upper_violation: f64,
    /// Fitted `a ∈ (0, 1]` and `s ≥ t` with `a p_s ≤ k_t`.
    pub a: f64,
    pub s: f64,
}

/// Compares the dense kernel of `-Δ_h + V_CE2` with the lattice heat kernel
/// `p` at all pairs of grid points.
pub fn ce2_gaussian_spot_check(grid: GridSpec, p: f64, t: f64) -> Result<GaussianSpotCheck> {
    let spectral = Spectral::new(grid);
    let v = discretize_potential(&PotentialSpec::Ce2 { p }, grid, Cap::Auto)?;
    let op = dense_schrodinger(&spectral, &v)?;
    let hd = grid.cell_volume();
    let k = op.matrix_function(|l| (-t * l).exp() / hd, ZeroMode::Apply)?;
    let origin = grid.origin();
    let delta = Field::delta(grid, origin);
    let heat = |s: f64| spectral.heat(&delta, s).map(Field::into_values);
    let n = grid.n;
    let mut oidx = vec![0; grid.d];
    grid.multi_index(origin, &mut oidx);
    let diff_index = |x: usize, y: usize, ix: &mut [usize], iy: &mut [usize], iz: &mut [usize]| {
        grid.multi_index(x, ix);
        grid.multi_index(y, iy);
        for a in 0..grid.d {
            iz[a] = (ix[a] + n - iy[a] + oidx[a]) % n;
        }
        grid.flat_index(iz)
    };
    let (mut ix, mut iy, mut iz) = (vec![0; grid.d], vec![0; grid.d], vec![0; grid.d]);
    let len = grid.len();
    let mut offsets = vec![0usize; len * len];
    for y in 0..len {
        for x in 0..len {
            offsets[y * len + x] = diff_index(x, y, &mut ix, &mut iy, &mut iz);
        }
    }
    let pt = heat(t)?;
    let pmax = pt.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut upper: f64 = f64::NEG_INFINITY;
    for y in 0..len {
        let col = k.col_as_slice(y);
        for x in 0..len {
            upper = upper.max(col[x] - pt[offsets[y * len + x]]);
        }
    }
    let mut best = (0.0, t);
    for j in 0..=60 {
        let s = t * (1.0 + 0.05 * j as f64);
        let ps = heat(s)?;
        let mut ratio = f64::INFINITY;
        for y in 0..len {
            let col = k.col_as_slice(y);
            for x in 0..len {
                ratio = ratio.min(col[x] / ps[offsets[y * len + x]]);
            }
        }
        let a = ratio.min(1.0);
        if a > best.0 {
            best = (a, s);
        }
    }
    Ok(GaussianSpotCheck { t, upper_violation: upper / pmax, a: best.0, s: best.1 })
}

// ---------------------------------------------------------------- CE3 ----

/// `ω_{d-1} ∫_{100}^{ρ} dr / ((1 + r) ln(4 + r))`, the radial mass of the
/// pointwise lower bound `(1+|x|)^{-1} ln(4+|x|)^{-1} |x|^{1-d}`.
pub fn ce3_tail(d: usize, rho: f64) -> f64 {
    let (a, b) = (100f64.ln(), rho.ln());
    if b <= a {
        return 0.0;
    }
    let panels = ((b - a) / 0.5).ceil() as usize;
    sphere_area(d)
        * composite_gauss(
            |s| {
                let r = s.exp();
                r / ((1.0 + r) * (4.0 + r).ln())
            },
            a,
            b,
            panels,
            16,
        )
}

// --------------------------------------------------------------- scans ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanKind {
    Ce1,
    Ce2,
    Ce3,
}

impl std::str::FromStr for ScanKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CE1" => Ok(ScanKind::Ce1),
            "CE2" => Ok(ScanKind::Ce2),
            "CE3" => Ok(ScanKind::Ce3),
            _ => Err(Error::Unknown { kind: "scan", name: s.into() }),
        }
    }
}

impl std::fmt::Display for ScanKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScanKind::Ce1 => "CE1",
            ScanKind::Ce2 => "CE2",
            ScanKind::Ce3 => "CE3",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanParams {
    pub d: usize,
    pub eps: f64,
    pub p: f64,
    /// Decreasing cutoffs `δ` (CE1, CE2) or increasing radii `ρ` (CE3);
    /// `None` selects the defaults.
    pub points: Option<Vec<f64>>,
}

impl ScanParams {
    pub fn defaults(kind: ScanKind) -> Self {
        match kind {
            ScanKind::Ce1 => Self { d: 3, eps: 0.25, p: 4.0, points: None },
            ScanKind::Ce2 => Self { d: 3, eps: 0.0, p: 4.0, points: None },
            ScanKind::Ce3 => Self { d: 3, eps: 0.0, p: 0.0, points: None },
        }
    }

    pub fn default_points(&self, kind: ScanKind) -> Vec<f64> {
        match kind {
            ScanKind::Ce1 => {
                let top = ce1_delta_max(self.eps).min(0.05);
                (0..8).map(|k| top * 10f64.powi(-k)).collect()
            }
            ScanKind::Ce2 => (3..=10).map(|k| 2f64.powi(-k)).collect(),
            ScanKind::Ce3 => vec![1e3, 1e6, 1e12],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanReport {
    pub kind: ScanKind,
    pub params: ScanParams,
    pub abscissa: Vec<f64>,
    pub values: Vec<f64>,
    /// CE1: `ln A` against `ln δ`; CE2: `M` against `ln(1/δ)`; CE3: `T` against `ln ln ρ`.
    pub fit: LinearFit,
    pub expected_slope: f64,
    /// CE3: worst relative mismatch of `T` increments against `ω Δ ln ln ρ`.
    pub increment_error: Option<f64>,
    pub monotone: bool,
    pub conclusive: bool,
}

pub fn divergence_scan(kind: ScanKind, params: &ScanParams) -> Result<ScanReport> {
    let pts = params.points.clone().unwrap_or_else(|| params.default_points(kind));
    if pts.len() < 2 {
        return Err(Error::InvalidParameter("a scan needs at least two points".into()));
    }
    if pts.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidParameter("scan points must be positive".into()));
    }
    let strictly = |dec: bool| pts.windows(2).all(|w| if dec { w[1] < w[0] } else { w[1] > w[0] });
    match kind {
        ScanKind::Ce1 | ScanKind::Ce2 if !strictly(true) => {
            return Err(Error::InvalidParameter("deltas must be strictly decreasing".into()))
        }
        ScanKind::Ce3 if !strictly(false) => {
            return Err(Error::InvalidParameter("radii must be strictly increasing".into()))
        }
        _ => {}
    }
    if params.d < 3 && kind != ScanKind::Ce1 {
        return Err(Error::InvalidParameter(format!("{kind} scans need d >= 3")));
    }
    let (values, xs, expected): (Vec<f64>, Vec<f64>, f64) = match kind {
        ScanKind::Ce1 => {
            if !(params.p > 1.0 && params.eps > 0.0 && params.eps < 1.0) {
                return Err(Error::InvalidParameter("CE1 scan needs p > 1 and 0 < eps < 1".into()));
            }
            let vals: Vec<f64> = pts.iter().map(|&dl| ce1_region_norm(params.eps, params.p, dl)).collect();
            let xs = pts.iter().map(|d| d.ln()).collect();
            (vals, xs, params.eps - 1.0 + 2.0 / params.p)
        }
        ScanKind::Ce2 => {
            if pts[0] >= 1.0 {
                return Err(Error::InvalidParameter("CE2 deltas must lie in (0, 1)".into()));
            }
            let vals = pts.iter().map(|&dl| ce2_mass(params.d, dl)).collect();
            let xs = pts.iter().map(|d| -d.ln()).collect();
            (vals, xs, 2.0 * ball_volume(params.d - 1))
        }
        ScanKind::Ce3 => {
            if pts[0] <= 100.0 {
                return Err(Error::InvalidParameter("CE3 radii must exceed 100".into()));
            }
            let vals = pts.iter().map(|&r| ce3_tail(params.d, r)).collect();
            let xs = pts.iter().map(|r| r.ln().ln()).collect();
            (vals, xs, sphere_area(params.d))
        }
    };
    let ys: Vec<f64> = match kind {
        ScanKind::Ce1 => values.iter().map(|a| a.ln()).collect(),
        _ => values.clone(),
    };
    let fit = linear_fit(&xs, &ys);
    let monotone = values.windows(2).all(|w| w[1] >= w[0]);
    let increment_error = (kind == ScanKind::Ce3).then(|| {
        values
            .windows(2)
            .zip(xs.windows(2))
            .map(|(v, x)| {
                let want = expected * (x[1] - x[0]);
                ((v[1] - v[0]) - want).abs() / want
            })
            .fold(0.0, f64::max)
    });
    Ok(ScanReport {
        kind,
        params: ScanParams { points: Some(pts.clone()), ..params.clone() },
        abscissa: pts,
        values,
        fit,
        expected_slope: expected,
        increment_error,
        monotone,
        conclusive: fit.r2 >= MIN_R2,
    })
}

// ------------------------------------------------------- Green bounded ----

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreenBounded {
    /// Largest truncated integral over the sample points.
    pub truncated: f64,
    /// Bound on the part beyond the radius cap; infinite when divergent.
    pub tail_bound: f64,
    pub estimate: f64,
    pub divergent: bool,
    pub argmax: Vec<f64>,
}

/// `sup_x ∫_{|y-x| < cap} V(y) |x - y|^{2-d} dy` over `points`, plus a bound
/// on the rest.
pub fn green_bounded_check(v: &PotentialSpec, d: usize, points: &[Vec<f64>], radius_cap: f64) -> Result<GreenBounded> {
    if d < 3 {
        return Err(Error::InvalidParameter(format!("green_bounded_check needs d >= 3, got {d}")));
    }
    if points.is_empty() || points.iter().any(|x| x.len() != d) {
        return Err(Error::InvalidParameter(format!("sample points must be nonempty {d}-vectors")));
    }
    if !(radius_cap > 1.0) {
        return Err(Error::InvalidParameter("radius cap must exceed 1".into()));
    }
    v.validate()?;
    if v.is_zero() {
        return Ok(GreenBounded {
            truncated: 0.0,
            tail_bound: 0.0,
            estimate: 0.0,
            divergent: false,
            argmax: points[0].clone(),
        });
    }
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, x) in points.iter().enumerate() {
        let val = if v.is_radial() {
            newton_integral(v, d, x, radius_cap)
        } else if d == 3 {
            angular_integral(v, x, radius_cap)?
        } else {
            return Err(Error::InvalidParameter(format!("non-radial {v} is integrated only in d = 3")));
        };
        if val > best.0 {
            best = (val, i);
        }
    }
    let x = &points[best.1];
    let xnorm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let tail_bound = match v {
        PotentialSpec::Ce3 if radius_cap > xnorm.max(std::f64::consts::E) => sphere_area(d) / radius_cap.ln(),
        PotentialSpec::Ce2 { .. } if radius_cap >= xnorm + 1.0 => 0.0,
        _ => f64::INFINITY,
    };
    Ok(GreenBounded {
        truncated: best.0,
        tail_bound,
        estimate: best.0 + tail_bound,
        divergent: tail_bound.is_infinite(),
        argmax: x.clone(),
    })
}

/// For radial `V`, the sphere average of `|x - y|^{2-d}` over `|y| = r` is
/// `max(|x|, r)^{2-d}`.
fn newton_integral(v: &PotentialSpec, d: usize, x: &[f64], cap: f64) -> f64 {
    let a = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    let prof = |r: f64| v.radial_profile(r).unwrap_or(0.0);
    let dd = d as f64;
    let integrand = |r: f64| prof(r) * r.max(a).powf(2.0 - dd) * r.powf(dd - 1.0);
    let mut breaks = vec![0.0, 1.0, cap];
    if a > 0.0 && a < cap {
        breaks.push(a);
    }
    breaks.retain(|&b| b <= cap);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if lo == 0.0 || hi / lo < 4.0 {
            total += composite_gauss(integrand, lo, hi, 32, 16);
        } else {
            let panels = ((hi / lo).ln() * 4.0).ceil() as usize;
            total += composite_gauss(|s| integrand(s.exp()) * s.exp(), lo.ln(), hi.ln(), panels, 16);
        }
    }
    sphere_area(d) * total
}

/// `∫_0^{cap} s ∫_{S²} V(x + sω) dω ds` in `d = 3`, with the polar axis
/// along `x₁`. The cosine integral is split where `y₁ = 0` and each side uses
/// `c = c₀ ± w²`, which absorbs a `|y₁|^{-α}` singularity with `α < 1`.
fn angular_integral(v: &PotentialSpec, x: &[f64], cap: f64) -> Result<f64> {
    let (gx, gw) = gauss_legendre(32);
    let nphi = 96;
    let ring = |s: f64, c: f64| -> Result<f64> {
        let st = (1.0 - c * c).max(0.0).sqrt();
        let mut acc = 0.0;
        for j in 0..nphi {
            let ph = 2.0 * PI * (j as f64 + 0.5) / nphi as f64;
            let y = [x[0] + s * c, x[1] + s * st * ph.cos(), x[2] + s * st * ph.sin()];
            acc += v.eval_capped(&y, f64::INFINITY)?;
        }
        Ok(acc * 2.0 * PI / nphi as f64)
    };
    // ∫_{c0}^{end} F(c) dc with c = c0 + sign·w², w ∈ [0, √|end − c0|].
    let side = |s: f64, c0: f64, end: f64| -> Result<f64> {
        let len = (end - c0).abs();
        if len == 0.0 {
            return Ok(0.0);
        }
        let sign = (end - c0).signum();
        let wmax = len.sqrt();
        let mut acc = 0.0;
        for (g, w) in gx.iter().zip(&gw) {
            let wv = 0.5 * wmax * (g + 1.0);
            let c = c0 + sign * wv * wv;
            acc += w * 0.5 * wmax * 2.0 * wv * ring(s, c)?;
        }
        Ok(acc)
    };
    let sphere = |s: f64| -> Result<f64> {
        let c0 = (-x[0] / s).clamp(-1.0, 1.0);
        Ok(side(s, c0, -1.0)? + side(s, c0, 1.0)?)
    };
    let (sx, sw) = gauss_legendre(16);
    let mut edges = vec![0.0];
    let mut e = 0.05;
    while e < cap {
        edges.push(e);
        e *= 1.25;
    }
    edges.push(cap);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        for (g, gwt) in sx.iter().zip(&sw) {
            let s = 0.5 * (a + b) + 0.5 * (b - a) * g;
            total += 0.5 * (b - a) * gwt * s * sphere(s)?;
        }
    }
    Ok(total)
}
