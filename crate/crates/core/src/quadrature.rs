//! Time quadratures for `λ^{-1/2}`, `λ^{-1}` and `λ^{1/2}` as integrals of
//! `e^{-tλ}` over `t ∈ (0, ∞)`.
//!
//! The substitution `t = u²` makes all three integrands bounded in `u`. The
//! `u` axis is covered by one Gauss–Legendre panel on `[0, u_min]` followed by
//! panels whose endpoints grow geometrically by a factor of 2 up to `u_max`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `Γ(1/2)^{-1}`.
pub const C1: f64 = 0.564_189_583_547_756_3;
/// `Γ(-1/2)^{-1}`.
pub const C2: f64 = -0.282_094_791_773_878_14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Power {
    NegHalf,
    NegOne,
    PosHalf,
}

impl Power {
    pub fn exponent(self) -> f64 {
        match self {
            Power::NegHalf => -0.5,
            Power::NegOne => -1.0,
            Power::PosHalf => 0.5,
        }
    }

    /// Weight multiplying the semigroup term at time `t`.
    pub fn time_weight(self, t: f64) -> f64 {
        match self {
            Power::NegHalf => C1 / t.sqrt(),
            Power::NegOne => 1.0,
            Power::PosHalf => C2 / (t * t.sqrt()),
        }
    }

    /// The scalar integrand `φ(t, λ)`.
    pub fn integrand(self, t: f64, lambda: f64) -> f64 {
        match self {
            Power::PosHalf => self.time_weight(t) * (-t * lambda).exp_m1(),
            _ => self.time_weight(t) * (-t * lambda).exp(),
        }
    }
}

impl fmt::Display for Power {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Power::NegHalf => "-1/2",
            Power::NegOne => "-1",
            Power::PosHalf => "+1/2",
        })
    }
}

impl std::str::FromStr for Power {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "-1/2" | "-0.5" => Ok(Power::NegHalf),
            "-1" => Ok(Power::NegOne),
            "1/2" | "+1/2" | "0.5" => Ok(Power::PosHalf),
            other => Err(Error::Unknown { kind: "power", name: other.into() }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeQuadrature {
    pub power: Power,
    pub u_min: f64,
    pub u_max: f64,
    pub panels: usize,
    pub order: usize,
    /// `(t_i, w_i)` with `w_i` the `dt` weight, increasing in `t`.
    pub nodes: Vec<(f64, f64)>,
    /// Coefficient of the identity from the analytic tail beyond `u_max`
    /// (nonzero only for `+1/2`).
    pub tail: f64,
    pub tol: f64,
    pub range: (f64, f64),
}

impl TimeQuadrature {
    /// Quadrature value of the scalar identity at `λ`.
    pub fn scalar(&self, lambda: f64) -> f64 {
        let body: f64 = self.nodes.iter().map(|&(t, w)| w * self.power.integrand(t, lambda)).sum();
        body + self.tail
    }

    /// Worst relative error of the scalar identity over `count` log-spaced values in `[lo, hi]`.
    pub fn worst_relative_error(&self, lo: f64, hi: f64, count: usize) -> f64 {
        log_space(lo, hi, count)
            .into_iter()
            .map(|l| {
                let exact = l.powf(self.power.exponent());
                ((self.scalar(l) - exact) / exact).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 || hi <= lo {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; order];
    let mut w = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..order {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[order - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[order - 1 - i] = w[i];
    }
    (x, w)
}

/// `∫_a^b f` by `panels` equal Gauss–Legendre panels of the given order.
pub fn composite_gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (gx, gw) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let mid = a + (k as f64 + 0.5) * width;
            gx.iter().zip(&gw).map(|(x, w)| w * f(mid + 0.5 * width * x)).sum::<f64>() * 0.5 * width
        })
        .sum()
}

const ORDERS: [usize; 5] = [16, 24, 32, 48, 64];
pub const MAX_PANELS: usize = 256;
const IDENTITY_SAMPLES: usize = 20;

/// Builds a quadrature meeting `tol` relative error on the scalar identity
/// over `range = [λ_min, λ_max]`.
pub fn build_quadrature(power: Power, range: (f64, f64), tol: f64) -> Result<TimeQuadrature> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::SpectralRange(lo, hi));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!("quadrature tolerance {tol}")));
    }
    let u_min = 0.1 / hi.sqrt();
    let u_max = (((1.0 / tol).ln() + 4.0) / lo).sqrt().max(2.0 * u_min);
    let mut edges = vec![0.0, u_min];
    while *edges.last().unwrap() < u_max {
        let next = (edges.last().unwrap() * 2.0).min(u_max);
        edges.push(next);
    }
    let panels = edges.len() - 1;
    if panels > MAX_PANELS {
        return Err(Error::QuadratureUnreachable { tol, max_panels: MAX_PANELS, worst: f64::NAN });
    }
    let tail = match power {
        Power::PosHalf => -2.0 * C2 / u_max,
        _ => 0.0,
    };
    let mut worst = f64::INFINITY;
    for order in ORDERS {
        let (gx, gw) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(panels * order);
        for e in edges.windows(2) {
            let (a, b) = (e[0], e[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in gx.iter().zip(&gw) {
                let u = mid + half * x;
                nodes.push((u * u, 2.0 * u * half * w));
            }
        }
        let quad = TimeQuadrature {
            power,
            u_min,
            u_max,
            panels,
            order,
            nodes,
            tail,
            tol,
            range,
        };
        worst = quad.worst_relative_error(lo, hi, IDENTITY_SAMPLES);
        if worst <= tol {
            return Ok(quad);
        }
    }
    Err(Error::QuadratureUnreachable { tol, max_panels: MAX_PANELS, worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constants() {
        assert!((C1 - PI.powf(-0.5)).abs() < 1e-16);
        assert!((C2 + 0.5 / PI.sqrt()).abs() < 1e-16);
        assert!((C1 + 2.0 * C2).abs() < 1e-16);
        assert!((C1 - 1.0 / libm::tgamma(0.5)).abs() < 1e-15);
        assert!((C2 - 1.0 / libm::tgamma(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for order in [1, 2, 5, 16, 33, 64] {
            let (x, w) = gauss_legendre(order);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for k in 0..(2 * order) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k + 1) as f64 };
                assert!((q - exact).abs() < 1e-12, "order {order} k {k}");
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn composite_gauss_known_integrals() {
        assert!((composite_gauss(f64::exp, 0.0, 1.0, 3, 8) - (1f64.exp() - 1.0)).abs() < 1e-14);
        assert!((composite_gauss(f64::sin, 0.0, PI, 4, 16) - 2.0).abs() < 1e-14);
        assert!((composite_gauss(|s| s.exp() * (1.0 / s.exp()), 1e6f64.ln(), 0.0, 10, 16) + 1e6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn examples() {
        let q = build_quadrature(Power::NegOne, (1.0, 1.0), 1e-6).unwrap();
        assert!((q.scalar(1.0) - 1.0).abs() <= 1e-6);
        let q = build_quadrature(Power::NegHalf, (4.0, 4.0), 1e-6).unwrap();
        assert!((q.scalar(4.0) - 0.5).abs() <= 1e-6);
        let q = build_quadrature(Power::PosHalf, (9.0, 9.0), 1e-6).unwrap();
        assert!((q.scalar(9.0) - 3.0).abs() <= 1e-5);
    }

    #[test]
    fn nodes_increasing_weights_positive() {
        for p in [Power::NegHalf, Power::NegOne, Power::PosHalf] {
            let q = build_quadrature(p, (1e-2, 1e4), 1e-8).unwrap();
            assert!(q.nodes.windows(2).all(|w| w[0].0 < w[1].0));
            assert!(q.nodes.iter().all(|&(t, w)| t > 0.0 && w > 0.0));
        }
    }

    #[test]
    fn rejects_bad_range() {
        assert!(matches!(build_quadrature(Power::NegHalf, (0.0, 1.0), 1e-6), Err(Error::SpectralRange(..))));
        assert!(build_quadrature(Power::NegHalf, (2.0, 1.0), 1e-6).is_err());
    }

    proptest! {
        #[test]
        fn identity_holds_across_range(lo_exp in -3.0f64..1.0, span in 0.0f64..6.0, p in 0usize..3) {
            let power = [Power::NegHalf, Power::NegOne, Power::PosHalf][p];
            let lo = 10f64.powf(lo_exp);
            let hi = lo * 10f64.powf(span);
            let q = build_quadrature(power, (lo, hi), 1e-6).unwrap();
            for l in log_space(lo, hi, 37) {
                let exact = l.powf(power.exponent());
                prop_assert!(((q.scalar(l) - exact) / exact).abs() <= 1e-6);
            }
        }
    }
}
