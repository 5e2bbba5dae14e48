//! Bodies of the individual checks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::counterexamples::{
    ce1_build, ce2_gaussian_spot_check, divergence_scan, green_bounded_check, ScanKind, ScanParams, MIN_R2,
};
use crate::dense::{dense_cap, dense_schrodinger, frobenius, frobenius_diff, DenseOperator, ZeroMode};
use crate::error::{Error, Result};
use crate::fracpow::{dense_green, dense_power_apply, estimate_range, frac_power_apply, green_mass, perturbation_w};
use crate::grid::{lp_norm, weak_l1, Field, GridSpec};
use crate::potentials::{catalog, PotentialSpec};
use crate::quadrature::{build_quadrature, Power};
use crate::riesz::{magnitude, schrodinger_riesz, sqrt_v_inv_sqrt_l, Backend, Route};
use crate::semigroup::{dense_kernel, fk_kernel_estimate, splitting_step, strang_evolve, FkSettings};
use crate::spectral::{Multiplier, Spectral};

use super::trials::{nonneg_family, random_potential, trial_family, STRUCTURED};
use super::{CheckId, Context, Measurement, OperatorCache, RunConfig, Slack};

type Out = Result<(Vec<Measurement>, Vec<String>)>;

const ABS: Slack = Slack::Absolute;
const REL: Slack = Slack::Relative;

/// Trials for the L² and L¹ checks.
const NORM_TRIALS: usize = 100;
/// Relative `L²` agreement required between quadrature and dense powers.
const QUAD_DENSE_TOL: f64 = 1e-4;
/// Fields pushed through the quadrature route in THEOREM, per dimension.
const QUAD_ROUTE_TRIALS: usize = 2;
const CHAT_SAFETY: f64 = 1.05;

pub(super) fn run(id: CheckId, cfg: &RunConfig, cache: &OperatorCache, rng: &mut ChaCha8Rng) -> Out {
    match id {
        CheckId::Domination => domination(cfg, rng),
        CheckId::Composition => composition(cfg, cache),
        CheckId::GreenMass => green_mass_check(cfg, cache, rng),
        CheckId::L2Contract => norm_ratio(cfg, cache, rng, 2.0),
        CheckId::L1Bound => norm_ratio(cfg, cache, rng, 1.0),
        CheckId::WKernel => w_kernel(cfg, cache),
        CheckId::Interp => interp(cfg, cache, rng),
        CheckId::Theorem => theorem(cfg, cache, rng),
        CheckId::Weak11 => weak11(cfg, cache),
        CheckId::VHalf => vhalf(cfg, cache, rng),
        CheckId::Ce1 => ce1(cfg),
        CheckId::Ce2 => ce2(cfg),
        CheckId::Ce3 => ce3(),
        CheckId::FkOracle => fk_oracle(cfg, cache, rng),
        CheckId::QuadDense => quad_dense(cfg, cache, rng),
    }
}

/// `2^{(2-p)/p}`, the interpolated bound between 2 on `L¹` and 1 on `L²`.
pub fn interp_constant(p: f64) -> f64 {
    2f64.powf((2.0 - p) / p)
}

fn lp(f: &Field, p: f64) -> f64 {
    lp_norm(f, p, None)
}

fn rel_l2(a: &Field, b: &Field) -> Result<f64> {
    Ok(lp(&a.sub(b)?, 2.0) / lp(b, 2.0).max(f64::MIN_POSITIVE))
}

/// Largest even `m ≤ n` with `m^d` within the dense cap.
fn dense_n(n: usize, d: usize) -> Result<usize> {
    let cap = dense_cap();
    let mut m = n - n % 2;
    while m >= 4 && m.pow(d as u32) > cap {
        m -= 2;
    }
    if m < 4 {
        return Err(Error::DenseCap { points: n.pow(d as u32), cap });
    }
    Ok(m)
}

/// `A f = (-Δ)^{1/2} L^{-1/2} f` through the dense operator.
fn a_apply(spectral: &Spectral, op: &DenseOperator, f: &Field) -> Result<Field> {
    let u = dense_power_apply(op, Power::NegHalf, f)?;
    spectral.apply(&u, Multiplier::SqrtLap)
}

fn domination(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Out {
    let grid = cfg.grid()?;
    let spec = cfg.potential_spec()?;
    let spectral = Spectral::new(grid);
    let v = crate::potentials::discretize_potential(&spec, grid, crate::potentials::Cap::Auto)?;
    let fs = nonneg_family(grid, rng, 20)?;
    let ctx = Context::new(grid, &spec);
    let tau = splitting_step(cfg.tau0, &v);
    let mut out = Vec::new();
    for t in [0.1, 0.5, 1.0] {
        let steps = ((t / tau).ceil() as usize).max(1);
        let (mut excess, mut low, mut drift, mut mass) = (f64::NEG_INFINITY, f64::INFINITY, 0f64, f64::NEG_INFINITY);
        for f in &fs {
            let k = strang_evolve(&spectral, f, &v, t, steps)?;
            let k2 = strang_evolve(&spectral, f, &v, t, 2 * steps)?;
            let h = spectral.heat(f, t)?;
            excess = excess.max(k.sub(&h)?.max());
            low = low.min(k.min() / f.max());
            drift = drift.max(rel_l2(&k, &k2)?);
            mass = mass.max(k.mean() / f.mean() - 1.0);
        }
        out.push(Measurement::at_most(format!("max(K_t f - H_t f) t={t}"), ctx.clone(), excess, 0.0, 1e-8, ABS));
        out.push(Measurement::at_least(format!("min K_t f / max f t={t}"), ctx.clone(), low, 0.0, 1e-12, ABS));
        out.push(Measurement::at_most(format!("mass growth t={t}"), ctx.clone(), mass, 0.0, 1e-12, ABS));
        out.push(Measurement::at_most(format!("step doubling t={t}"), ctx.clone(), drift, 0.0, 1e-4, ABS));
    }
    Ok((out, vec![format!("20 nonnegative fields, splitting step {tau}")]))
}

fn composition(cfg: &RunConfig, cache: &OperatorCache) -> Out {
    let grid = cfg.grid()?;
    let spec = cfg.potential_spec()?;
    let spectral = Spectral::new(grid);
    let (v, op) = cache.operator(&spectral, &spec)?;
    let ctx = Context::new(grid, &spec);
    let mean_zero = v.is_zero();
    let half = dense_green(&op, Power::NegHalf, mean_zero)?;
    let full = dense_green(&op, Power::NegOne, mean_zero)?;
    let prod = &half * &half * grid.cell_volume();
    let mut out = vec![Measurement::at_most(
        "|G~ h^d G~ - G| / |G|",
        ctx.clone(),
        frobenius_diff(&prod, &full) / frobenius(&full),
        0.0,
        cfg.route_tol,
        ABS,
    )];
    if !mean_zero {
        let (lo, hi) = (0..full.ncols()).fold((f64::INFINITY, 0f64), |(lo, hi), j| {
            full.col_as_slice(j).iter().fold((lo, hi), |(a, b), &x| (a.min(x), b.max(x)))
        });
        out.push(Measurement::at_least("min G / max G", ctx.clone(), lo / hi, 0.0, cfg.route_tol, ABS));
    }
    // Truncated Green matrices ∫_0^T K_t dt against the free ones.
    let (_, free) = cache.operator(&spectral, &PotentialSpec::Zero)?;
    for big_t in [1.0, 10.0, 100.0] {
        let phi = |l: f64| if l * big_t < 1e-12 { big_t } else { -(-big_t * l).exp_m1() / l };
        let gl = op.matrix_function(phi, ZeroMode::Apply)?;
        let g0 = free.matrix_function(phi, ZeroMode::Apply)?;
        let mut excess = f64::NEG_INFINITY;
        let mut top = 0f64;
        for j in 0..gl.ncols() {
            for (a, b) in gl.col_as_slice(j).iter().zip(g0.col_as_slice(j)) {
                excess = excess.max(a - b);
                top = top.max(*b);
            }
        }
        out.push(Measurement::at_most(
            format!("max(G_T - G0_T) / max G0_T T={big_t}"),
            ctx.clone(),
            excess / top,
            0.0,
            cfg.route_tol,
            ABS,
        ));
    }
    Ok((out, Vec::new()))
}

fn green_mass_check(cfg: &RunConfig, cache: &OperatorCache, rng: &mut ChaCha8Rng) -> Out {
    let grid = cfg.grid()?;
    let spec = cfg.potential_spec()?;
    let spectral = Spectral::new(grid);
    let len = grid.len();
    let ys: Vec<usize> = if len <= 1024 {
        (0..len).collect()
    } else {
        std::iter::once(grid.origin()).chain((0..63).map(|_| rng.random_range(0..len))).collect()
    };
    let sup = |op: &DenseOperator, v: &Field, ys: &[usize]| -> Result<f64> {
        ys.iter().try_fold(f64::NEG_INFINITY, |m, &y| Ok(m.max(green_mass(op, v, y)?)))
    };
    let mut out = Vec::new();

    let (v, op) = cache.operator(&spectral, &spec)?;
    out.push(Measurement::at_most("max_y green mass", Context::new(grid, &spec), sup(&op, &v, &ys)?, 1.0, 1e-8, ABS));

    let cspec = PotentialSpec::Const(2.0);
    let (cv, cop) = cache.operator(&spectral, &cspec)?;
    let dev = ys.iter().try_fold(0f64, |m, &y| Ok::<_, Error>(m.max((green_mass(&cop, &cv, y)? - 1.0).abs())))?;
    out.push(Measurement::at_most("max_y |green mass - 1|", Context::new(grid, &cspec), dev, 0.0, 1e-10, ABS));

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let rv = random_potential(grid, rng)?;
        let rop = dense_schrodinger(&spectral, &rv)?;
        let picks: Vec<usize> = (0..5).map(|_| rng.random_range(0..len)).collect();
        worst = worst.max(sup(&rop, &rv, &picks)?);
    }
    out.push(Measurement::at_most("random V: max green mass", Context::new(grid, "random"), worst, 1.0, 1e-8, ABS));
    Ok((out, vec!["50 random potentials, 5 random columns each".into()]))
}

/// L2_CONTRACT (`p = 2`, bound 1) and L1_BOUND (`p = 1`, bound 2).
fn norm_ratio(cfg: &RunConfig, cache: &OperatorCache, rng: &mut ChaCha8Rng, p: f64) -> Out {
    let grid = cfg.grid()?;
    let spectral = Spectral::new(grid);
    let fs = trial_family(&spectral, rng, NORM_TRIALS - STRUCTURED)?;
    let bound = interp_constant(p);
    let mut out = Vec::new();
    for spec in catalog(grid.d) {
        let (_, op) = cache.operator(&spectral, &spec)?;
        let mut worst = 0f64;
        for f in &fs {
            worst = worst.max(lp(&a_apply(&spectral, &op, f)?, p) / lp(f, p));
        }
        out.push(Measurement::at_most(
            format!("max |Af|_{p} / |f|_{p}"),
            Context::new(grid, &spec).with_p(p),
            worst,
            bound,
            cfg.dense_tol,
            REL,
        ));
    }
    Ok((out, vec![format!("{} mean-zero trial fields per potential", fs.len())]))
}

fn w_kernel(cfg: &RunConfig, cache: &OperatorCache) -> Out {
    let grid = cfg.grid()?;
    let spectral = Spectral::new(grid);
    let two_sqrt_pi = 2.0 * std::f64::consts::PI.sqrt();
    let mut out = Vec::new();
    for spec in catalog(grid.d) {
        let (_, op) = cache.operator(&spectral, &spec)?;
        let w = perturbation_w(&spectral, &op)?;
        let ctx = Context::new(grid, &spec);
        if spec.is_zero() {
            // W vanishes identically; only round-off remains.
            let size = w.max_abs() * grid.cell_volume();
            out.push(Measurement::at_most("max |W| h^d (V = 0)", ctx, size, 0.0, 1e-10, ABS));
            continue;
        }
        let top = w.max_abs();
        out.push(Measurement::at_least("min W / max |W|", ctx.clone(), w.min_entry() / top, 0.0, 1e-8, ABS));
        let mass = w.column_masses().into_iter().fold(f64::NEG_INFINITY, f64::max);
        out.push(Measurement::at_most("max column mass of W", ctx, mass, two_sqrt_pi, 1e-6, ABS));
    }
    Ok((out, Vec::new()))
}

fn interp(cfg: &RunConfig, cache: &OperatorCache, rng: &mut ChaCha8Rng) -> Out {
    let mut out = Vec::new();
    for d in [1, 2] {
        let grid = GridSpec::new(d, dense_n(cfg.n, d)?, cfg.r)?;
        let spectral = Spectral::new(grid);
        let fs = trial_family(&spectral, rng, cfg.trials)?;
        for spec in catalog(d) {
            let (_, op) = cache.operator(&spectral, &spec)?;
            let gs = fs.iter().map(|f| a_apply(&spectral, &op, f)).collect::<Result<Vec<_>>>()?;
            for &p in &cfg.p {
                let worst = fs.iter().zip(&gs).map(|(f, g)| lp(g, p) / lp(f, p)).fold(0.0, f64::max);
                out.push(Measurement::at_most(
                    format!("max |Af|_p / |f|_p d={d}"),
                    Context::new(grid, &spec).with_p(p),
                    worst,
                    interp_constant(p),
                    cfg.quad_tol,
                    REL,
                ));
            }
        }
    }
    Ok((out, vec![format!("{} random + {STRUCTURED} structured trial fields", cfg.trials)]))
}

fn axes(spectral: &Spectral, f: &Field, m: impl Fn(usize) -> Multiplier) -> Result<Vec<Field>> {
    (0..f.spec().d).map(|j| spectral.apply(f, m(j))).collect()
}

fn axes_rel_diff(a: &[Field], b: &[Field]) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        num += lp(&x.sub(y)?, 2.0).powi(2);
        den += lp(y, 2.0).powi(2);
    }
    Ok((num / den.max(f64::MIN_POSITIVE)).sqrt())
}

fn theorem(cfg: &RunConfig, cache: &OperatorCache, rng: &mut ChaCha8Rng) -> Out {
    let spec = cfg.potential_spec()?;
    let ps: Vec<f64> = cfg.p.iter().copied().filter(|&p| p > 1.0).collect();
    if ps.is_empty() {
        return Err(Error::InvalidParameter("THEOREM needs some p > 1".into()));
    }
    let mut out = Vec::new();
    // Per dimension: context, classical and Schrödinger maxima per p.
    let mut per_d: Vec<(Context, Vec<f64>, Vec<f64>)> = Vec::new();
    for d in [1, 2, 3] {
        let grid = GridSpec::new(d, dense_n(cfg.n, d)?, cfg.r)?;
        let spectral = Spectral::new(grid);
        let (v, op) = cache.operator(&spectral, &spec)?;
        let ctx = Context::new(grid, &spec);
        let fs = trial_family(&spectral, rng, cfg.trials)?;
        let mut classical = vec![0f64; ps.len()];
        let mut schr = vec![0f64; ps.len()];
        let mut comp = vec![0f64; ps.len()];
        let mut route = 0f64;
        let mut direct_axes = Vec::new();
        for f in &fs {
            let u = dense_power_apply(&op, Power::NegHalf, f)?;
            let direct = axes(&spectral, &u, Multiplier::Deriv)?;
            let g = spectral.apply(&u, Multiplier::SqrtLap)?;
            let factored = axes(&spectral, &g, Multiplier::Riesz)?;
            route = route.max(axes_rel_diff(&factored, &direct)?);
            let smag = magnitude(&factored)?;
            let cmag = magnitude(&axes(&spectral, f, Multiplier::Riesz)?)?;
            for (k, &p) in ps.iter().enumerate() {
                let nf = lp(f, p);
                classical[k] = classical[k].max(lp(&cmag, p) / nf);
                schr[k] = schr[k].max(lp(&smag, p) / nf);
                comp[k] = comp[k].max(lp(&g, p) / nf);
            }
            if direct_axes.len() < QUAD_ROUTE_TRIALS {
                direct_axes.push(direct);
            }
        }
        out.push(Measurement::at_most("dense routes: rel diff", ctx.clone(), route, 0.0, cfg.route_tol, ABS));

        let range = estimate_range(&spectral, &v, None)?;
        let quad = build_quadrature(Power::NegHalf, range, cfg.quad_accuracy)?;
        let backend = Backend::Quadrature { quad: &quad, tau0: cfg.tau0 };
        let mut qroute = 0f64;
        for (f, direct) in fs.iter().zip(&direct_axes) {
            let res = schrodinger_riesz(&spectral, f, &v, backend, Route::Factored)?;
            qroute = qroute.max(axes_rel_diff(&res.axes, direct)?);
        }
        out.push(Measurement::at_most("quadrature factored vs dense direct", ctx.clone(), qroute, 0.0, cfg.quad_tol, ABS));

        for (k, &p) in ps.iter().enumerate() {
            let c = ctx.with_p(p);
            let chat = CHAT_SAFETY * classical[k];
            out.push(Measurement::at_most("max |Af|_p / |f|_p", c.clone(), comp[k], interp_constant(p), cfg.quad_tol, REL));
            out.push(Measurement::info("C_p (classical, x1.05)", c.clone(), chat));
            out.push(Measurement::at_most(
                "max |Rf|_p / |f|_p vs own C_p",
                c,
                schr[k],
                interp_constant(p) * chat,
                cfg.quad_tol,
                REL,
            ));
        }
        per_d.push((ctx, classical, schr));
    }
    let mut notes = Vec::new();
    for (k, &p) in ps.iter().enumerate() {
        let chat = CHAT_SAFETY * per_d.iter().map(|(_, c, _)| c[k]).fold(0.0, f64::max);
        notes.push(format!("p={p}: common C_p = {chat}"));
        for (ctx, _, schr) in &per_d {
            out.push(Measurement::at_most(
                "max |Rf|_p / |f|_p vs common C_p",
                ctx.with_p(p),
                schr[k],
                interp_constant(p) * chat,
                cfg.quad_tol,
                REL,
            ));
        }
    }
    Ok((out, notes))
}

fn weak11(cfg: &RunConfig, cache: &OperatorCache) -> Out {
    let spec = cfg.potential_spec()?;
    let d = cfg.d;
    let coarse = GridSpec::new(d, cfg.n, cfg.r)?;
    let fine = coarse.with_n(2 * cfg.n)?;
    if fine.len() > dense_cap() {
        return Err(Error::DenseCap { points: fine.len(), cap: dense_cap() });
    }
    let centres: Vec<Vec<f64>> = vec![vec![0.0; d], (0..d).map(|a| if a == 0 { 0.5 * cfg.r } else { 0.0 }).collect()];
    // functional[grid][centre][component], the last component being |𝓡f|.
    let mut functional = Vec::new();
    for grid in [coarse, fine] {
        let spectral = Spectral::new(grid);
        let (v, op) = cache.operator(&spectral, &spec)?;
        let mut per_centre = Vec::new();
        for x in &centres {
            let mut f = Field::delta(grid, grid.nearest(x));
            if v.is_zero() {
                f = f.mean_zero();
            }
            let u = dense_power_apply(&op, Power::NegHalf, &f)?;
            let comps = axes(&spectral, &u, Multiplier::Deriv)?;
            let norm1 = lp(&f, 1.0);
            let mut vals: Vec<f64> = comps.iter().map(|c| weak_l1(c) / norm1).collect();
            vals.push(weak_l1(&magnitude(&comps)?) / norm1);
            per_centre.push(vals);
        }
        functional.push(per_centre);
    }
    let mut out = Vec::new();
    for (c, x) in centres.iter().enumerate() {
        for k in 0..=d {
            let (a, b) = (functional[0][c][k], functional[1][c][k]);
            let name = if k < d { format!("R_{} at {x:?}", k + 1) } else { format!("|R| at {x:?}") };
            out.push(Measurement::info(format!("{name}: n={}", cfg.n), Context::new(coarse, &spec), a));
            out.push(Measurement::at_most(
                format!("{name}: relative change n={}->{}", cfg.n, 2 * cfg.n),
                Context::new(fine, &spec),
                (b - a).abs() / a,
                0.0,
                0.1,
                ABS,
            ));
        }
    }
    Ok((out, vec!["unit-mass discrete deltas; sup_t t|{|R_j f| > t}| / |f|_1".into()]))
}

fn vhalf(cfg: &RunConfig, cache: &OperatorCache, rng: &mut ChaCha8Rng) -> Out {
    let spec = cfg.potential_spec()?;
    let ps: Vec<f64> = cfg.p.iter().copied().filter(|&p| p > 1.0).collect();
    let mut out = Vec::new();
    for d in [1, 2, 3] {
        let grid = GridSpec::new(d, dense_n(cfg.n, d)?, cfg.r)?;
        let spectral = Spectral::new(grid);
        let (v, op) = cache.operator(&spectral, &spec)?;
        let fs = trial_family(&spectral, rng, cfg.trials)?;
        let mut worst = vec![0f64; ps.len()];
        for f in &fs {
            let out_f = sqrt_v_inv_sqrt_l(&spectral, f, &v, Backend::Dense(&op))?;
            for (k, &p) in ps.iter().enumerate() {
                worst[k] = worst[k].max(lp(&out_f, p) / lp(f, p));
            }
        }
        for (k, &p) in ps.iter().enumerate() {
            let ctx = Context::new(grid, &spec).with_p(p);
            let name = "max |V^1/2 L^-1/2 f|_p / |f|_p";
            out.push(if p == 2.0 {
                Measurement::at_most(name, ctx, worst[k], 1.0, cfg.dense_tol, REL)
            } else {
                Measurement::info(name, ctx, worst[k])
            });
        }
    }
    Ok((out, vec!["p < 2 ratios are recorded without a bound".into()]))
}

fn ce1(cfg: &RunConfig) -> Out {
    let mut cases = vec![(cfg.ce1_eps, cfg.ce1_p)];
    for c in [(0.25, 4.0), (0.1, 3.0), (0.4, 8.0)] {
        if !cases.contains(&c) {
            cases.push(c);
        }
    }
    let mut out = Vec::new();
    for (eps, p) in cases {
        let scan = divergence_scan(ScanKind::Ce1, &ScanParams { d: 3, eps, p, points: None })?;
        let ctx = Context::continuum(3, PotentialSpec::Ce1 { eps }).with_p(p);
        let slope = Measurement::new(
            format!("slope of ln A vs ln delta (eps={eps})"),
            ctx.clone(),
            scan.fit.slope,
            super::Limit::Near,
            scan.expected_slope,
            0.05,
            ABS,
        );
        out.push(if scan.conclusive { slope } else { slope.inconclusive() });
        out.push(Measurement::info(format!("fit R^2 (eps={eps})"), ctx.clone(), scan.fit.r2));
        out.push(Measurement::at_least(
            format!("A increasing as delta shrinks (eps={eps})"),
            ctx,
            f64::from(u8::from(scan.monotone)),
            1.0,
            0.0,
            ABS,
        ));
    }
    let control = divergence_scan(ScanKind::Ce1, &ScanParams { d: 3, eps: 0.9, p: 4.0, points: None })?;
    out.push(Measurement::at_least(
        "control slope (eps=0.9)",
        Context::continuum(3, PotentialSpec::Ce1 { eps: 0.9 }).with_p(4.0),
        control.fit.slope,
        -0.02,
        0.0,
        ABS,
    ));

    let grid = GridSpec::new(3, 32, 2.5)?;
    let spectral = Spectral::new(grid);
    let data = ce1_build(grid, cfg.ce1_eps, cfg.ce1_p)?;
    let ctx = Context::new(grid, PotentialSpec::Ce1 { eps: cfg.ce1_eps }).with_p(cfg.ce1_p);
    out.push(Measurement::at_least("min v", ctx.clone(), data.v.min(), 1.0, 1e-12, ABS));
    out.push(Measurement::at_most("max |g| outside the cutoff shell", ctx.clone(), data.g_outside_shell(), 0.0, 0.0, ABS));
    out.push(Measurement::at_most(
        "harmonicity residual beyond 4h / max(Vv)",
        ctx.clone(),
        data.residual(&spectral, 4.0)?,
        0.0,
        1e-3,
        ABS,
    ));
    out.push(Measurement::info("harmonicity residual beyond 8h / max(Vv)", ctx, data.residual(&spectral, 8.0)?));
    Ok((out, vec!["grid data for v = I0(2 sqrt z) on d=3, n=32, R=2.5".into()]))
}

fn ce2(cfg: &RunConfig) -> Out {
    let p = cfg.ce2_p;
    let spec = PotentialSpec::Ce2 { p };
    let scan = divergence_scan(ScanKind::Ce2, &ScanParams { d: 3, eps: 0.0, p, points: None })?;
    let ctx = Context::continuum(3, &spec).with_p(p);
    let mut out = vec![
        Measurement::at_least("R^2 of M vs ln(1/delta)", ctx.clone(), scan.fit.r2, MIN_R2, 0.0, ABS),
        Measurement::new(
            "slope of M vs ln(1/delta)",
            ctx.clone(),
            scan.fit.slope,
            super::Limit::Near,
            scan.expected_slope,
            0.05,
            REL,
        ),
        Measurement::at_least("M increasing as delta shrinks", ctx, f64::from(u8::from(scan.monotone)), 1.0, 0.0, ABS),
    ];
    let grid = GridSpec::new(3, 12, 2.0)?;
    let t = 0.25;
    let spot = ce2_gaussian_spot_check(grid, p, t)?;
    let ctx = Context::new(grid, &spec).with_p(p);
    out.push(Measurement::at_most("max(k_t - p_t) / max p_t", ctx.clone(), spot.upper_violation, 0.0, 1e-10, ABS));
    out.push(Measurement::at_least("fitted a > 0", ctx.clone(), spot.a, f64::MIN_POSITIVE, 0.0, ABS));
    out.push(Measurement::at_most("fitted a <= 1", ctx.clone(), spot.a, 1.0, 0.0, ABS));
    out.push(Measurement::at_least("fitted s >= t", ctx, spot.s, t, 0.0, ABS));
    Ok((out, vec![format!("spot check at t={t}: a={}, s={}", spot.a, spot.s)]))
}

fn ce3() -> Out {
    let spec = PotentialSpec::Ce3;
    let scan = divergence_scan(ScanKind::Ce3, &ScanParams::defaults(ScanKind::Ce3))?;
    let ctx = Context::continuum(3, &spec);
    let inc = scan.increment_error.unwrap_or(f64::NAN);
    let mut out = vec![
        Measurement::at_most("T increments vs ln ln rho", ctx.clone(), inc, 0.0, 0.05, ABS),
        Measurement::at_least("T increasing", ctx.clone(), f64::from(u8::from(scan.monotone)), 1.0, 0.0, ABS),
    ];
    let points = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![10.0, 0.0, 0.0]];
    let a = green_bounded_check(&spec, 3, &points, 1e3)?;
    let b = green_bounded_check(&spec, 3, &points, 2e3)?;
    out.push(Measurement::info("green bounded estimate (cap 1e3)", ctx.clone(), a.estimate));
    out.push(Measurement::at_most(
        "green bounded change under cap doubling",
        ctx.clone(),
        (b.estimate - a.estimate).abs() / a.estimate,
        0.0,
        0.02,
        ABS,
    ));
    out.push(Measurement::info("truncated integral change under cap doubling", ctx.clone(), (b.truncated - a.truncated).abs() / a.truncated));
    out.push(Measurement::at_most("divergent", ctx, f64::from(u8::from(a.divergent || b.divergent)), 0.0, 0.0, ABS));
    Ok((out, Vec::new()))
}

fn fk_oracle(cfg: &RunConfig, cache: &OperatorCache, rng: &mut ChaCha8Rng) -> Out {
    let grid = GridSpec::new(1, 256, 4.0)?;
    let spectral = Spectral::new(grid);
    let (_, free) = cache.operator(&spectral, &PotentialSpec::Zero)?;
    let triples = [(0.0, 0.0, 0.25), (0.5, -0.5, 0.25), (1.0, 1.25, 0.1)];
    let mut out = Vec::new();
    for spec in [PotentialSpec::Zero, PotentialSpec::Const(2.0), PotentialSpec::Harmonic] {
        let (_, op) = cache.operator(&spectral, &spec)?;
        for &(x, y, t) in &triples {
            let (xi, yi) = (grid.nearest(&[x]), grid.nearest(&[y]));
            let w_dense = dense_kernel(&op, t, xi, yi) / dense_kernel(&free, t, xi, yi);
            let settings = FkSettings { paths: cfg.fk_paths, slices: cfg.fk_slices, seed: rng.random(), cap: None };
            let est = fk_kernel_estimate(&spec, &grid.point(xi), &grid.point(yi), t, &settings)?;
            out.push(Measurement::at_most(
                format!("|FK weight - dense weight| x={x} y={y} t={t}"),
                Context::new(grid, &spec),
                (est.weight - w_dense).abs(),
                3.0 * est.weight_stderr + 1e-9 * w_dense,
                0.0,
                ABS,
            ));
        }
    }
    Ok((out, vec![format!("{} paths, {} slices; bound is 3 standard errors", cfg.fk_paths, cfg.fk_slices)]))
}

fn quad_dense(cfg: &RunConfig, cache: &OperatorCache, rng: &mut ChaCha8Rng) -> Out {
    let mut out = Vec::new();
    for d in [1, 2] {
        let grid = GridSpec::new(d, dense_n(cfg.n.min(32), d)?, cfg.r)?;
        let spectral = Spectral::new(grid);
        let fs = trial_family(&spectral, rng, 3)?;
        let fs = &fs[..3];
        for spec in catalog(d) {
            let (v, op) = cache.operator(&spectral, &spec)?;
            let range = estimate_range(&spectral, &v, None)?;
            for power in [Power::NegHalf, Power::NegOne, Power::PosHalf] {
                let quad = build_quadrature(power, range, cfg.quad_accuracy)?;
                let mut worst = 0f64;
                for f in fs {
                    let q = frac_power_apply(&spectral, f, &v, &quad, cfg.tau0)?;
                    worst = worst.max(rel_l2(&q, &dense_power_apply(&op, power, f)?)?);
                }
                out.push(Measurement::at_most(
                    format!("L^{power}: quadrature vs dense rel L2"),
                    Context::new(grid, &spec),
                    worst,
                    0.0,
                    QUAD_DENSE_TOL,
                    ABS,
                ));
            }
        }
    }
    Ok((out, Vec::new()))
}
