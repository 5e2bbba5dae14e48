//! Trial functions for the inequality checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use crate::error::Result;
use crate::grid::{sample, Field, GridSpec};
use crate::spectral::Spectral;

/// Number of structured fields appended to every trial family.
pub const STRUCTURED: usize = 8;

/// Generator for one check: keyed by the suite seed, stream chosen by the check.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random real field whose spectrum is supported on `|k_a| ≤ n/4` for every
/// axis, mean removed, scaled to unit sup norm.
pub fn band_limited(spectral: &Spectral, rng: &mut ChaCha8Rng) -> Result<Field> {
    let grid = *spectral.grid();
    let n = grid.n;
    let band = n / 4;
    let mut idx = vec![0usize; grid.d];
    let mut buf = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (k, c) in buf.iter_mut().enumerate() {
        grid.multi_index(k, &mut idx);
        let inside = idx.iter().all(|&i| i.min(n - i) <= band);
        // Draw for every mode so the stream position does not depend on `n/4`.
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        if inside && k != 0 {
            *c = Complex64::new(re, im);
        }
    }
    spectral.transform(&mut buf, true);
    let f = Field::new(grid, buf.iter().map(|c| c.re).collect())?.mean_zero();
    let m = f.max_abs();
    Ok(if m > 0.0 { f.scale(1.0 / m) } else { f })
}

fn gauss(x: &[f64], widths: &[f64]) -> f64 {
    x.iter().zip(widths).map(|(a, s)| (-0.5 * (a / s).powi(2)).exp()).product()
}

/// Near-deltas, indicators and tensor Gaussians, each with its mean removed.
pub fn structured(grid: GridSpec) -> Result<Vec<Field>> {
    let r = grid.r;
    let h = grid.spacing();
    let d = grid.d;
    let off: Vec<f64> = (0..d).map(|a| if a == 0 { 0.5 * r } else { -0.25 * r }).collect();
    let wide = vec![0.25 * r; d];
    let narrow = vec![2.0 * h; d];
    let mixed: Vec<f64> = (0..d).map(|a| r / (3.0 + 2.0 * a as f64)).collect();
    let fields = vec![
        Field::delta(grid, grid.origin()),
        Field::delta(grid, grid.nearest(&off)),
        sample(grid, |x| if x.iter().map(|v| v * v).sum::<f64>() < 0.25 * r * r { 1.0 } else { 0.0 })?,
        sample(grid, |x| if x[0] < 0.0 { 1.0 } else { 0.0 })?,
        sample(grid, |x| gauss(x, &wide))?,
        sample(grid, |x| gauss(x, &narrow))?,
        sample(grid, |x| gauss(x, &mixed))?,
        sample(grid, |x| x[0] * gauss(x, &wide))?,
    ];
    Ok(fields.into_iter().map(|f| f.mean_zero()).collect())
}

/// `random` band-limited fields followed by the structured ones.
pub fn trial_family(spectral: &Spectral, rng: &mut ChaCha8Rng, random: usize) -> Result<Vec<Field>> {
    let mut out = (0..random).map(|_| band_limited(spectral, rng)).collect::<Result<Vec<_>>>()?;
    out.extend(structured(*spectral.grid())?);
    Ok(out)
}

/// Nonnegative fields: alternately i.i.d. uniform values and Gaussian bumps
/// at random centres.
pub fn nonneg_family(grid: GridSpec, rng: &mut ChaCha8Rng, count: usize) -> Result<Vec<Field>> {
    let h = grid.spacing();
    (0..count)
        .map(|k| {
            if k % 2 == 0 {
                Field::new(grid, (0..grid.len()).map(|_| rng.random::<f64>()).collect())
            } else {
                let centre: Vec<f64> = (0..grid.d).map(|_| rng.random_range(-grid.r..grid.r)).collect();
                let width = rng.random_range(h..0.5 * grid.r);
                sample(grid, |x| {
                    let r2: f64 = x.iter().zip(&centre).map(|(a, c)| (a - c).powi(2)).sum();
                    (-0.5 * r2 / (width * width)).exp()
                })
            }
        })
        .collect()
}

/// Random nonnegative potential: each point is active with probability 0.6
/// and then uniform in `[0, scale)` with a per-field scale in `[0.01, 50)`.
pub fn random_potential(grid: GridSpec, rng: &mut ChaCha8Rng) -> Result<Field> {
    let scale = rng.random_range(0.01..50.0);
    let mut vals: Vec<f64> =
        (0..grid.len()).map(|_| if rng.random::<f64>() < 0.6 { scale * rng.random::<f64>() } else { 0.0 }).collect();
    if vals.iter().all(|&v| v == 0.0) {
        vals[0] = scale;
    }
    Field::new(grid, vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_limited_is_mean_zero_and_in_band() {
        let g = GridSpec::new(2, 16, 2.0).unwrap();
        let s = Spectral::new(g);
        let mut rng = rng_for(3, 0);
        let f = band_limited(&s, &mut rng).unwrap();
        assert!(f.mean().abs() < 1e-14);
        assert!((f.max_abs() - 1.0).abs() < 1e-14);
        let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        s.transform(&mut buf, false);
        let mut idx = [0usize; 2];
        for (k, c) in buf.iter().enumerate() {
            g.multi_index(k, &mut idx);
            if idx.iter().any(|&i| i.min(16 - i) > 4) {
                assert!(c.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn families_are_reproducible() {
        let g = GridSpec::new(1, 32, 3.0).unwrap();
        let s = Spectral::new(g);
        let a = trial_family(&s, &mut rng_for(7, 2), 5).unwrap();
        let b = trial_family(&s, &mut rng_for(7, 2), 5).unwrap();
        let c = trial_family(&s, &mut rng_for(7, 3), 5).unwrap();
        assert_eq!(a.len(), 5 + STRUCTURED);
        assert!(a.iter().zip(&b).all(|(x, y)| x.values() == y.values()));
        assert_ne!(a[0].values(), c[0].values());
        assert!(a.iter().all(|f| f.mean().abs() < 1e-12 * f.max_abs().max(1.0)));
    }

    #[test]
    fn nonneg_fields_and_potentials() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let mut rng = rng_for(1, 1);
        for f in nonneg_family(g, &mut rng, 6).unwrap() {
            assert!(f.min() >= 0.0 && f.max() > 0.0);
        }
        for _ in 0..10 {
            let v = random_potential(g, &mut rng).unwrap();
            assert!(v.min() >= 0.0 && v.max() > 0.0);
        }
    }
}
