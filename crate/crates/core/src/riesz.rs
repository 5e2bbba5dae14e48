//! Riesz transforms `∂_j L^{-1/2}` of the Schrödinger operator.

use serde::{Deserialize, Serialize};

use crate::dense::DenseOperator;
use crate::error::{Error, Result};
use crate::fracpow::{dense_power_apply, frac_power_apply};
use crate::grid::Field;
use crate::quadrature::{build_quadrature, Power, TimeQuadrature};
use crate::semigroup::{check_potential, splitting_step, Strang};
use crate::spectral::{Multiplier, Spectral};

/// How `L^{-1/2}` is evaluated.
#[derive(Clone, Copy)]
pub enum Backend<'a> {
    Dense(&'a DenseOperator),
    Quadrature { quad: &'a TimeQuadrature, tau0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Route {
    /// `∂_j` applied to `L^{-1/2} f`.
    Direct,
    /// Classical `R_j` applied to `g = (-Δ)^{1/2} L^{-1/2} f`.
    Factored,
}

#[derive(Debug, Clone)]
pub struct RieszResult {
    pub axes: Vec<Field>,
    pub magnitude: Field,
    pub route: Route,
    /// `(-Δ)^{1/2} L^{-1/2} f` on the factored route.
    pub companion: Option<Field>,
}

pub fn inv_sqrt_l(spectral: &Spectral, f: &Field, v: &Field, backend: Backend<'_>) -> Result<Field> {
    f.check_same_grid(v)?;
    check_potential(v)?;
    match backend {
        Backend::Dense(op) => {
            if op.grid() != f.spec() {
                return Err(Error::GridMismatch);
            }
            dense_power_apply(op, Power::NegHalf, f)
        }
        Backend::Quadrature { quad, tau0 } => {
            if quad.power != Power::NegHalf {
                return Err(Error::InvalidParameter(format!("expected a -1/2 quadrature, got {}", quad.power)));
            }
            frac_power_apply(spectral, f, v, quad, tau0)
        }
    }
}

pub fn schrodinger_riesz(
    spectral: &Spectral,
    f: &Field,
    v: &Field,
    backend: Backend<'_>,
    route: Route,
) -> Result<RieszResult> {
    let u = inv_sqrt_l(spectral, f, v, backend)?;
    let d = f.spec().d;
    let (axes, companion) = match route {
        Route::Direct => {
            let axes = (0..d).map(|j| spectral.apply(&u, Multiplier::Deriv(j))).collect::<Result<Vec<_>>>()?;
            (axes, None)
        }
        Route::Factored => {
            let g = match backend {
                Backend::Dense(_) => spectral.apply(&u, Multiplier::SqrtLap)?,
                Backend::Quadrature { quad, tau0 } => perturbation_companion(spectral, f, &u, v, quad, tau0)?,
            };
            let axes = (0..d).map(|j| spectral.apply(&g, Multiplier::Riesz(j))).collect::<Result<Vec<_>>>()?;
            (axes, Some(g))
        }
    };
    let magnitude = magnitude(&axes)?;
    Ok(RieszResult { axes, magnitude, route, companion })
}

/// `g = f + c₂ ∫ (H_t − K_t) w t^{-3/2} dt` with `w = L^{-1/2} f`, which equals
/// `(-Δ)^{1/2} w` because `L^{1/2} w = f`. The `+1/2` quadrature is sized for
/// the spectra of both `-Δ` and `L`.
pub fn perturbation_companion(
    spectral: &Spectral,
    f: &Field,
    w: &Field,
    v: &Field,
    neg_quad: &TimeQuadrature,
    tau0: f64,
) -> Result<Field> {
    let (lo, hi) = neg_quad.range;
    let range = (lo.min(spectral.lap_gap()), hi.max(spectral.lap_max()));
    let quad = build_quadrature(Power::PosHalf, range, neg_quad.tol)?;
    let prop = Strang::new(spectral, v)?;
    let times: Vec<f64> = quad.nodes.iter().map(|n| n.0).collect();
    let acc = prop.extrapolated_sum(w.values(), &times, splitting_step(tau0, v), |i, k, acc| {
        let (t, wt) = quad.nodes[i];
        let mut h = w.values().to_vec();
        spectral.apply_real_symbol(&mut h, &spectral.heat_symbols(t));
        let c = wt * Power::PosHalf.time_weight(t);
        for ((a, x), y) in acc.iter_mut().zip(&h).zip(k) {
            *a += c * (x - y);
        }
    })?;
    // Beyond the last node H_t w is its mean and K_t w has decayed.
    let tail = -quad.tail * w.mean();
    Field::new(*f.spec(), acc.iter().zip(f.values()).map(|(a, f0)| f0 + a + tail).collect())
}

/// `(Σ_j |F_j|²)^{1/2}` pointwise.
pub fn magnitude(axes: &[Field]) -> Result<Field> {
    let first = axes.first().ok_or_else(|| Error::InvalidParameter("no components".into()))?;
    let mut sq = vec![0.0; first.values().len()];
    for a in axes {
        first.check_same_grid(a)?;
        for (s, x) in sq.iter_mut().zip(a.values()) {
            *s += x * x;
        }
    }
    Field::new(*first.spec(), sq.into_iter().map(f64::sqrt).collect())
}

/// `V^{1/2} L^{-1/2} f`.
pub fn sqrt_v_inv_sqrt_l(spectral: &Spectral, f: &Field, v: &Field, backend: Backend<'_>) -> Result<Field> {
    if v.is_zero() {
        return Ok(Field::zeros(*f.spec()));
    }
    let u = inv_sqrt_l(spectral, f, v, backend)?;
    u.zip_map(v, |a, b| a * b.sqrt())
}
