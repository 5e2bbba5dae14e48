//! The Schrödinger semigroup `e^{-tL}`: Strang splitting on the grid, dense
//! kernel entries, and a Feynman–Kac Monte Carlo estimate in free space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::DenseOperator;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::potentials::PotentialSpec;
use crate::spectral::Spectral;

/// Default splitting step.
pub const TAU0: f64 = 0.01;

pub fn default_steps(t: f64) -> usize {
    ((t / TAU0).ceil() as usize).max(1)
}

/// Largest `τ · max V` allowed in verification runs.
pub const STIFF_STEP: f64 = 0.1;

/// Splitting step used along quadrature nodes: `tau0`, shortened so that
/// `τ · max V ≤ STIFF_STEP`.
pub fn splitting_step(tau0: f64, v: &Field) -> f64 {
    let m = v.max();
    if m > 0.0 {
        tau0.min(STIFF_STEP / m)
    } else {
        tau0
    }
}

pub(crate) fn check_potential(v: &Field) -> Result<()> {
    if let Some(k) = v.values().iter().position(|&x| x < 0.0) {
        return Err(Error::NegativePotential { index: k, value: v.values()[k] });
    }
    Ok(())
}

/// Reusable Strang propagator for one potential.
pub struct Strang<'a> {
    spectral: &'a Spectral,
    v: &'a [f64],
    zero: bool,
}

impl<'a> Strang<'a> {
    pub fn new(spectral: &'a Spectral, v: &'a Field) -> Result<Self> {
        if v.spec() != spectral.grid() {
            return Err(Error::GridMismatch);
        }
        check_potential(v)?;
        Ok(Self { spectral, v: v.values(), zero: v.is_zero() })
    }

    /// Advances `u` by time `t` in `steps` steps of `e^{-τV/2} e^{τΔ} e^{-τV/2}`.
    pub fn evolve(&self, u: &mut [f64], t: f64, steps: usize) -> Result<()> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::NegativeTime(t));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("steps must be positive".into()));
        }
        if t == 0.0 {
            return Ok(());
        }
        if self.zero {
            self.spectral.apply_real_symbol(u, &self.spectral.heat_symbols(t));
            return Ok(());
        }
        let tau = t / steps as f64;
        let half: Vec<f64> = self.v.iter().map(|v| (-0.5 * tau * v).exp()).collect();
        let full: Vec<f64> = half.iter().map(|e| e * e).collect();
        let heat = self.spectral.heat_symbols(tau);
        mul_in_place(u, &half);
        for s in 0..steps {
            self.spectral.apply_real_symbol(u, &heat);
            mul_in_place(u, if s + 1 == steps { &half } else { &full });
        }
        Ok(())
    }

    /// Accumulates `visit(i, e^{-t_i L} u0, acc)` over increasing `times`.
    ///
    /// The pass is made with steps of at most `tau` and again with exactly
    /// twice as many steps per interval; the two accumulators are combined as
    /// `(4 fine - coarse) / 3`, cancelling the `τ²` term of the splitting error.
    pub fn extrapolated_sum(
        &self,
        u0: &[f64],
        times: &[f64],
        tau: f64,
        mut visit: impl FnMut(usize, &[f64], &mut [f64]),
    ) -> Result<Vec<f64>> {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("splitting step must be positive, got {tau}")));
        }
        let mut pass = |refine: usize| -> Result<Vec<f64>> {
            let mut u = u0.to_vec();
            let mut acc = vec![0.0; u0.len()];
            let mut t_prev = 0.0;
            for (i, &t) in times.iter().enumerate() {
                let dt = t - t_prev;
                self.evolve(&mut u, dt, refine * ((dt / tau).ceil() as usize).max(1))?;
                t_prev = t;
                visit(i, &u, &mut acc);
            }
            Ok(acc)
        };
        let coarse = pass(1)?;
        if self.zero {
            return Ok(coarse);
        }
        let fine = pass(2)?;
        Ok(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
    }
}

fn mul_in_place(u: &mut [f64], w: &[f64]) {
    for (a, b) in u.iter_mut().zip(w) {
        *a *= b;
    }
}

/// Strang approximation of `e^{-tL} f`.
pub fn strang_evolve(spectral: &Spectral, f: &Field, v: &Field, t: f64, steps: usize) -> Result<Field> {
    f.check_same_grid(v)?;
    let prop = Strang::new(spectral, v)?;
    let mut u = f.values().to_vec();
    prop.evolve(&mut u, t, steps)?;
    Ok(Field::new(*f.spec(), u)?)
}

/// Kernel entry `k_t(x, y)` of the dense operator, in the integral convention.
pub fn dense_kernel(op: &DenseOperator, t: f64, x: usize, y: usize) -> f64 {
    let q = op.eigenvectors();
    let hd = op.grid().cell_volume();
    op.eigenvalues()
        .iter()
        .enumerate()
        .map(|(i, l)| (-t * l).exp() * q[(x, i)] * q[(y, i)])
        .sum::<f64>()
        / hd
}

/// Free-space heat kernel `h_t(x) = (4πt)^{-d/2} e^{-|x|²/4t}`.
pub fn gaussian_kernel(x: &[f64], t: f64) -> f64 {
    let d = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (4.0 * std::f64::consts::PI * t).powf(-d / 2.0) * (-r2 / (4.0 * t)).exp()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FkSettings {
    pub paths: usize,
    pub slices: usize,
    pub seed: u64,
    /// Clip for singular potentials; `None` evaluates uncapped.
    pub cap: Option<f64>,
}

impl Default for FkSettings {
    fn default() -> Self {
        Self { paths: 100_000, slices: 64, seed: 0, cap: None }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FkEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Mean of the path weights, `estimate / h_t(x - y)`.
    pub weight: f64,
    pub weight_stderr: f64,
}

const FK_CHUNK: usize = 1024;

/// Feynman–Kac estimate of `k_t(x, y)` over Brownian bridges with generator `Δ`.
///
/// Paths are generated in fixed-size chunks, chunk `c` drawing from stream `c`
/// of a ChaCha8 generator keyed by `seed`, so the result does not depend on
/// the number of worker threads.
pub fn fk_kernel_estimate(
    v: &PotentialSpec,
    x: &[f64],
    y: &[f64],
    t: f64,
    settings: &FkSettings,
) -> Result<FkEstimate> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("FK time must be positive, got {t}")));
    }
    if settings.paths == 0 || settings.slices == 0 {
        return Err(Error::InvalidParameter("FK needs at least one path and one slice".into()));
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: y.len() });
    }
    v.validate()?;
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let prefactor = gaussian_kernel(&diff, t);
    let cap = settings.cap.unwrap_or(f64::INFINITY);

    let chunks = settings.paths.div_ceil(FK_CHUNK);
    let weights: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = FK_CHUNK.min(settings.paths - c * FK_CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(c as u64);
            (0..count).map(|_| bridge_weight(v, x, y, t, settings.slices, cap, &mut rng)).collect()
        })
        .collect::<Result<_>>()?;

    let all: Vec<f64> = weights.into_iter().flatten().collect();
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let var = if all.len() > 1 {
        all.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let weight_stderr = (var / n).sqrt();
    Ok(FkEstimate {
        estimate: prefactor * mean,
        stderr: prefactor * weight_stderr,
        weight: mean,
        weight_stderr,
    })
}

fn bridge_weight(
    v: &PotentialSpec,
    x: &[f64],
    y: &[f64],
    t: f64,
    slices: usize,
    cap: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let d = x.len();
    let dt = t / slices as f64;
    let sd = (2.0 * dt).sqrt();
    // Free path W with W(0) = 0, Var W(s) = 2s per axis.
    let mut w = vec![0.0; d * (slices + 1)];
    for k in 1..=slices {
        for a in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            w[k * d + a] = w[(k - 1) * d + a] + sd * z;
        }
    }
    let mut point = vec![0.0; d];
    let mut integral = 0.0;
    for k in 0..=slices {
        let s = k as f64 / slices as f64;
        for a in 0..d {
            point[a] = x[a] + w[k * d + a] - s * w[slices * d + a] + s * (y[a] - x[a]);
        }
        let val = v.eval_capped(&point, cap)?;
        let trap = if k == 0 || k == slices { 0.5 } else { 1.0 };
        integral += trap * val;
    }
    Ok((-dt * integral).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::dense_schrodinger;
    use crate::grid::{lp_norm, sample, GridSpec};
    use crate::potentials::{catalog, discretize_potential, Cap};

    fn bump(g: GridSpec) -> Field {
        sample(g, |x| (-x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum::<f64>()).exp()).unwrap()
    }

    #[test]
    fn zero_potential_is_heat() {
        let g = GridSpec::new(2, 16, 3.0).unwrap();
        let sp = Spectral::new(g);
        let f = bump(g);
        let a = strang_evolve(&sp, &f, &Field::zeros(g), 0.7, 13).unwrap();
        let b = sp.heat(&f, 0.7).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn constant_potential_is_damped_heat() {
        let g = GridSpec::new(1, 64, 4.0).unwrap();
        let sp = Spectral::new(g);
        let f = bump(g);
        let a = strang_evolve(&sp, &f, &Field::constant(g, 2.0), 0.5, default_steps(0.5)).unwrap();
        let b = sp.heat(&f, 0.5).unwrap().scale((-1.0f64).exp());
        assert!(a.sub(&b).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn harmonic_step_halving_and_domination() {
        let g = GridSpec::new(1, 64, 4.0).unwrap();
        let sp = Spectral::new(g);
        let v = discretize_potential(&PotentialSpec::Harmonic, g, Cap::Auto).unwrap();
        let f = bump(g);
        let a = strang_evolve(&sp, &f, &v, 0.5, 64).unwrap();
        let b = strang_evolve(&sp, &f, &v, 0.5, 128).unwrap();
        let rel = lp_norm(&a.sub(&b).unwrap(), 2.0, None) / lp_norm(&b, 2.0, None);
        assert!(rel <= 1e-4, "{rel}");
        let heat = sp.heat(&f, 0.5).unwrap();
        for out in [&a, &b] {
            for (k, h) in out.values().iter().zip(heat.values()) {
                assert!(*k <= h + 1e-8);
            }
        }
    }

    #[test]
    fn catalog_domination_positivity_and_mass() {
        let g = GridSpec::new(2, 16, 2.0).unwrap();
        let sp = Spectral::new(g);
        let f = sample(g, |x| 1.0 + (2.0 * x[0]).cos() * (x[1]).sin()).unwrap();
        for pot in catalog(2) {
            let v = discretize_potential(&pot, g, Cap::Auto).unwrap();
            for t in [0.1, 0.5, 1.0] {
                let k = strang_evolve(&sp, &f, &v, t, default_steps(t)).unwrap();
                let h = sp.heat(&f, t).unwrap();
                for (a, b) in k.values().iter().zip(h.values()) {
                    assert!(*a <= b + 1e-8, "{pot} t={t}");
                    assert!(*a >= -1e-10 * f.max(), "{pot} t={t}");
                }
                assert!(lp_norm(&k, 1.0, None) <= lp_norm(&f, 1.0, None) * (1.0 + 1e-8));
            }
        }
    }

    #[test]
    fn semigroup_property() {
        let g = GridSpec::new(2, 16, 2.0).unwrap();
        let sp = Spectral::new(g);
        let v = discretize_potential(&PotentialSpec::Harmonic, g, Cap::Auto).unwrap();
        let f = bump(g);
        let once = strang_evolve(&sp, &f, &v, 0.4, 40).unwrap();
        let half = strang_evolve(&sp, &f, &v, 0.2, 20).unwrap();
        let twice = strang_evolve(&sp, &half, &v, 0.2, 20).unwrap();
        assert!(once.sub(&twice).unwrap().max_abs() <= 1e-12 * once.max_abs().max(1.0));
    }

    #[test]
    fn second_order_convergence() {
        let g = GridSpec::new(1, 64, 4.0).unwrap();
        let sp = Spectral::new(g);
        let v = sample(g, |x| 1.0 + (std::f64::consts::PI * x[0] / 4.0).cos()).unwrap();
        let f = bump(g);
        let op = dense_schrodinger(&sp, &v).unwrap();
        let exact = op.apply_function(|l| (-l).exp(), crate::dense::ZeroMode::Apply, &f).unwrap();
        let errs: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&s| lp_norm(&strang_evolve(&sp, &f, &v, 1.0, s).unwrap().sub(&exact).unwrap(), 2.0, None))
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "{errs:?}");
        }
    }

    #[test]
    fn dense_semigroup_matches_splitting() {
        let g = GridSpec::new(1, 32, 3.0).unwrap();
        let sp = Spectral::new(g);
        let v = discretize_potential(&PotentialSpec::Harmonic, g, Cap::Auto).unwrap();
        let f = bump(g);
        let op = dense_schrodinger(&sp, &v).unwrap();
        let exact = op.apply_function(|l| (-0.5 * l).exp(), crate::dense::ZeroMode::Apply, &f).unwrap();
        let split = strang_evolve(&sp, &f, &v, 0.5, 2000).unwrap();
        let rel = lp_norm(&split.sub(&exact).unwrap(), 2.0, None) / lp_norm(&exact, 2.0, None);
        assert!(rel <= 1e-4, "{rel}");
        let k = dense_kernel(&op, 0.5, 3, 7);
        let col = op.apply_function(|l| (-0.5 * l).exp(), crate::dense::ZeroMode::Apply, &Field::delta(g, 7)).unwrap();
        assert!((k - col.values()[3]).abs() <= 1e-10 * k.abs().max(1e-300));
    }

    #[test]
    fn rejects_bad_input() {
        let g = GridSpec::new(1, 8, 1.0).unwrap();
        let sp = Spectral::new(g);
        let mut v = Field::zeros(g);
        v.values_mut()[2] = -1.0;
        assert!(matches!(
            strang_evolve(&sp, &Field::zeros(g), &v, 1.0, 4),
            Err(Error::NegativePotential { index: 2, .. })
        ));
        assert!(strang_evolve(&sp, &Field::zeros(g), &Field::zeros(g), -1.0, 4).is_err());
    }

    #[test]
    fn fk_trivial_cases() {
        let s = FkSettings { paths: 500, seed: 7, ..Default::default() };
        let z = fk_kernel_estimate(&PotentialSpec::Zero, &[0.1, 0.0], &[0.3, -0.2], 0.4, &s).unwrap();
        assert_eq!(z.estimate, gaussian_kernel(&[-0.2, 0.2], 0.4));
        assert_eq!(z.stderr, 0.0);
        let c = fk_kernel_estimate(&PotentialSpec::Const(2.0), &[0.0], &[0.5], 0.25, &s).unwrap();
        let expected = (-0.5f64).exp() * gaussian_kernel(&[0.5], 0.25);
        assert!((c.estimate - expected).abs() <= 1e-12 * expected);
        assert!(c.stderr <= 1e-12 * expected);
    }

    #[test]
    fn fk_independent_of_thread_count() {
        let s = FkSettings { paths: 5000, seed: 3, ..Default::default() };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| fk_kernel_estimate(&PotentialSpec::Harmonic, &[0.0], &[0.2], 0.3, &s).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }
}
