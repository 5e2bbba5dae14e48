//! One PASS/FAIL line per acceptance criterion. Runs as a plain binary so the
//! lines show up in `cargo test` output; exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rzlab::verify::{run_check_with, run_suite, write_csv, CheckId, CheckReport, Limit, OperatorCache, RunConfig, Verdict};

struct Outcome {
    pass: bool,
    detail: String,
}

fn asserted(r: &CheckReport, keep: impl Fn(&str) -> bool) -> Outcome {
    let ms: Vec<_> = r.measurements.iter().filter(|m| m.limit != Limit::Info && keep(&m.name)).collect();
    let bad: Vec<_> = ms.iter().filter(|m| m.verdict != Verdict::Pass).collect();
    let worst = bad.first().copied().or_else(|| ms.iter().min_by(|a, b| a.margin().total_cmp(&b.margin())));
    let detail = match worst {
        Some(m) => format!("{} = {:.6e} (bound {:.6e}, tol {:.1e})", m.name, m.value, m.bound, m.tolerance),
        None => "no measurements".into(),
    };
    Outcome { pass: !ms.is_empty() && bad.is_empty() && r.error.is_none(), detail }
}

fn check(cache: &OperatorCache, id: CheckId, cfg: &RunConfig) -> CheckReport {
    run_check_with(id, cfg, cache).unwrap_or_else(|e| panic!("{id}: {e}"))
}

fn timed(limit: Option<f64>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let secs = start.elapsed().as_secs_f64();
    match limit {
        Some(l) => {
            o.pass &= secs < l;
            o.detail.push_str(&format!("; {secs:.2} s (limit {l} s)"));
        }
        None => o.detail.push_str(&format!("; {secs:.2} s")),
    }
    o
}

fn all(outcomes: Vec<Outcome>) -> Outcome {
    let pass = outcomes.iter().all(|o| o.pass);
    let pick = outcomes.iter().find(|o| !o.pass).unwrap_or(&outcomes[0]);
    Outcome { pass, detail: pick.detail.clone() }
}

fn oracle_csv(cfg: &RunConfig) -> String {
    let reports = run_suite(cfg).expect("oracles suite");
    let mut buf = Vec::new();
    write_csv(&mut buf, &reports).expect("csv");
    // Drop runtime_s, the last column.
    String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

fn main() -> ExitCode {
    let cache = OperatorCache::new();
    let base = RunConfig::default();
    let wide = RunConfig { d: 2, n: 32, r: 4.0, ..base.clone() };
    let mut rows: Vec<(u32, &str, Outcome)> = Vec::new();

    rows.push((1, "kernel domination", timed(Some(10.0), || {
        all(["harmonic", "ce1:0.25"]
            .iter()
            .map(|v| asserted(&check(&cache, CheckId::Domination, &RunConfig { potential: (*v).into(), ..wide.clone() }), |_| true))
            .collect())
    })));

    rows.push((2, "composition identity", timed(Some(5.0), || {
        let cfg = RunConfig { d: 1, n: 64, ..base.clone() };
        asserted(&check(&cache, CheckId::Composition, &cfg), |n| n.starts_with("|G~"))
    })));

    rows.push((3, "green mass", timed(Some(30.0), || {
        let cfg = RunConfig { d: 1, n: 32, ..base.clone() };
        asserted(&check(&cache, CheckId::GreenMass, &cfg), |_| true)
    })));

    rows.push((4, "L2 contraction", timed(None, || asserted(&check(&cache, CheckId::L2Contract, &wide), |_| true))));

    rows.push((5, "L1 bound and W kernel", timed(None, || {
        all(vec![
            asserted(&check(&cache, CheckId::L1Bound, &wide), |_| true),
            asserted(&check(&cache, CheckId::WKernel, &wide), |_| true),
        ])
    })));

    rows.push((6, "interpolation", timed(None, || asserted(&check(&cache, CheckId::Interp, &wide), |_| true))));

    rows.push((7, "theorem chain, d = 1, 2, 3", timed(Some(300.0), || {
        let cfg = RunConfig { n: 16, p: vec![1.25, 1.5, 2.0], ..base.clone() };
        asserted(&check(&cache, CheckId::Theorem, &cfg), |_| true)
    })));

    rows.push((8, "weak (1,1) surrogate", timed(None, || {
        let cfg = RunConfig { d: 2, n: 16, ..base.clone() };
        asserted(&check(&cache, CheckId::Weak11, &cfg), |_| true)
    })));

    rows.push((9, "counterexample 1 slopes", timed(None, || {
        let r = check(&cache, CheckId::Ce1, &base);
        asserted(&r, |n| n.starts_with("slope") || n.starts_with("control"))
    })));

    rows.push((10, "counterexample 2", timed(None, || asserted(&check(&cache, CheckId::Ce2, &base), |_| true))));

    rows.push((11, "counterexample 3", timed(None, || asserted(&check(&cache, CheckId::Ce3, &base), |_| true))));

    rows.push((12, "oracles and determinism", timed(None, || {
        let mut parts = vec![asserted(&check(&cache, CheckId::FkOracle, &base), |_| true)];
        for n in [16, 32] {
            parts.push(asserted(&check(&cache, CheckId::QuadDense, &RunConfig { n, ..base.clone() }), |_| true));
        }
        let cfg = RunConfig { suite: "oracles".into(), ..base.clone() };
        let (a, b) = (oracle_csv(&cfg), oracle_csv(&cfg));
        parts.push(Outcome { pass: a == b, detail: format!("re-run identical: {}", a == b) });
        all(parts)
    })));

    let mut failed = 0;
    for (k, name, o) in &rows {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {k:>2} {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", rows.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
