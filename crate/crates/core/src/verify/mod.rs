//! Named checks: each inequality bound to a configured, reportable test.

mod checks;
mod report;
pub mod trials;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dense::{dense_schrodinger, DenseOperator};
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::potentials::{discretize_potential, Cap, PotentialSpec};
use crate::spectral::Spectral;

pub use report::{read_config, write_csv, write_json, CSV_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CheckId {
    #[serde(rename = "DOMINATION")]
    Domination,
    #[serde(rename = "COMPOSITION")]
    Composition,
    #[serde(rename = "GREEN_MASS")]
    GreenMass,
    #[serde(rename = "L2_CONTRACT")]
    L2Contract,
    #[serde(rename = "L1_BOUND")]
    L1Bound,
    #[serde(rename = "W_KERNEL")]
    WKernel,
    #[serde(rename = "INTERP")]
    Interp,
    #[serde(rename = "THEOREM")]
    Theorem,
    #[serde(rename = "WEAK11")]
    Weak11,
    #[serde(rename = "VHALF")]
    VHalf,
    #[serde(rename = "CE1")]
    Ce1,
    #[serde(rename = "CE2")]
    Ce2,
    #[serde(rename = "CE3")]
    Ce3,
    #[serde(rename = "FK_ORACLE")]
    FkOracle,
    #[serde(rename = "QUAD_DENSE")]
    QuadDense,
}

impl CheckId {
    pub const ALL: [CheckId; 15] = [
        CheckId::Domination,
        CheckId::Composition,
        CheckId::GreenMass,
        CheckId::L2Contract,
        CheckId::L1Bound,
        CheckId::WKernel,
        CheckId::Interp,
        CheckId::Theorem,
        CheckId::Weak11,
        CheckId::VHalf,
        CheckId::Ce1,
        CheckId::Ce2,
        CheckId::Ce3,
        CheckId::FkOracle,
        CheckId::QuadDense,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::Domination => "DOMINATION",
            CheckId::Composition => "COMPOSITION",
            CheckId::GreenMass => "GREEN_MASS",
            CheckId::L2Contract => "L2_CONTRACT",
            CheckId::L1Bound => "L1_BOUND",
            CheckId::WKernel => "W_KERNEL",
            CheckId::Interp => "INTERP",
            CheckId::Theorem => "THEOREM",
            CheckId::Weak11 => "WEAK11",
            CheckId::VHalf => "VHALF",
            CheckId::Ce1 => "CE1",
            CheckId::Ce2 => "CE2",
            CheckId::Ce3 => "CE3",
            CheckId::FkOracle => "FK_ORACLE",
            CheckId::QuadDense => "QUAD_DENSE",
        }
    }

    /// Random stream used by this check.
    fn stream(self) -> u64 {
        CheckId::ALL.iter().position(|&c| c == self).unwrap() as u64 + 1
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase().replace('-', "_");
        CheckId::ALL
            .into_iter()
            .find(|c| c.as_str() == up || (up == "QUADRATURE_VS_DENSE" && *c == CheckId::QuadDense))
            .ok_or_else(|| Error::Unknown { kind: "check", name: s.into() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Core,
    Counterexamples,
    Oracles,
    All,
}

impl Suite {
    pub fn checks(self) -> Vec<CheckId> {
        let all = CheckId::ALL;
        match self {
            Suite::Core => all[..10].to_vec(),
            Suite::Counterexamples => all[10..13].to_vec(),
            Suite::Oracles => all[13..].to_vec(),
            Suite::All => all.to_vec(),
        }
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "core" => Ok(Suite::Core),
            "counterexamples" => Ok(Suite::Counterexamples),
            "oracles" => Ok(Suite::Oracles),
            "all" => Ok(Suite::All),
            _ => Err(Error::Unknown { kind: "suite", name: s.into() }),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Core => "core",
            Suite::Counterexamples => "counterexamples",
            Suite::Oracles => "oracles",
            Suite::All => "all",
        })
    }
}

/// Run configuration. Serialized as flat JSON; every field is optional in the
/// file and falls back to the default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub suite: String,
    /// Explicit check ids; when nonempty they replace the suite.
    pub checks: Vec<String>,
    pub d: usize,
    pub n: usize,
    #[serde(rename = "R")]
    pub r: f64,
    /// Potential tag as accepted by `PotentialSpec::from_str`.
    pub potential: String,
    pub p: Vec<f64>,
    pub seed: u64,
    /// Random band-limited fields per trial family.
    pub trials: usize,
    /// Tolerance of the subordination quadratures.
    pub quad_accuracy: f64,
    pub tau0: f64,
    /// Inequality tolerance on dense-route checks.
    pub dense_tol: f64,
    /// Inequality tolerance on quadrature-route and interpolation checks.
    pub quad_tol: f64,
    /// Agreement required between the two dense Riesz routes.
    pub route_tol: f64,
    pub fk_paths: usize,
    pub fk_slices: usize,
    pub ce1_eps: f64,
    pub ce1_p: f64,
    pub ce2_p: f64,
    pub out_dir: Option<String>,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            suite: "core".into(),
            checks: Vec::new(),
            d: 2,
            n: 16,
            r: 2.0,
            potential: "harmonic".into(),
            p: vec![1.0, 1.25, 1.5, 2.0],
            seed: 1,
            trials: 64,
            quad_accuracy: 1e-6,
            tau0: crate::semigroup::TAU0,
            dense_tol: 1e-6,
            quad_tol: 1e-3,
            route_tol: 1e-10,
            fk_paths: 20_000,
            fk_slices: 64,
            ce1_eps: 0.25,
            ce1_p: 4.0,
            ce2_p: 4.0,
            out_dir: None,
            jobs: 1,
        }
    }
}

impl RunConfig {
    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        self.potential.parse()
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.d, self.n, self.r)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.potential_spec()?;
        if self.p.is_empty() || self.p.iter().any(|&p| !(p >= 1.0 && p.is_finite())) {
            return Err(Error::InvalidParameter(format!("p values must be finite and >= 1, got {:?}", self.p)));
        }
        let positive = [
            ("quad_accuracy", self.quad_accuracy),
            ("tau0", self.tau0),
            ("dense_tol", self.dense_tol),
            ("quad_tol", self.quad_tol),
            ("route_tol", self.route_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.fk_paths == 0 || self.fk_slices == 0 {
            return Err(Error::InvalidParameter("fk_paths and fk_slices must be positive".into()));
        }
        Ok(())
    }

    /// Checks selected by `checks`, or by `suite` when that is empty.
    pub fn selection(&self) -> Result<Vec<CheckId>> {
        if self.checks.is_empty() {
            Ok(self.suite.parse::<Suite>()?.checks())
        } else {
            self.checks.iter().map(|c| c.parse()).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// How a measured value is compared with its bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    AtMost,
    AtLeast,
    /// `|value - bound|` within the slack.
    Near,
    /// Recorded only.
    Info,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slack {
    Absolute,
    /// Tolerance scaled by `|bound|`.
    Relative,
}

/// Where a measurement was taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub d: usize,
    /// `None` for continuum computations.
    pub n: Option<usize>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub potential: String,
    pub p: Option<f64>,
}

impl Context {
    pub fn new(grid: GridSpec, potential: impl fmt::Display) -> Self {
        Self { d: grid.d, n: Some(grid.n), r: Some(grid.r), potential: potential.to_string(), p: None }
    }

    pub fn continuum(d: usize, potential: impl fmt::Display) -> Self {
        Self { d, n: None, r: None, potential: potential.to_string(), p: None }
    }

    pub fn with_p(&self, p: f64) -> Self {
        Self { p: Some(p), ..self.clone() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub context: Context,
    pub value: f64,
    pub limit: Limit,
    pub bound: f64,
    pub tolerance: f64,
    pub slack: Slack,
    pub verdict: Verdict,
}

impl Measurement {
    pub fn new(name: impl Into<String>, context: Context, value: f64, limit: Limit, bound: f64, tolerance: f64, slack: Slack) -> Self {
        let mut m = Self { name: name.into(), context, value, limit, bound, tolerance, slack, verdict: Verdict::Pass };
        m.verdict = if m.margin() >= 0.0 { Verdict::Pass } else { Verdict::Fail };
        m
    }

    pub fn at_most(name: impl Into<String>, context: Context, value: f64, bound: f64, tolerance: f64, slack: Slack) -> Self {
        Self::new(name, context, value, Limit::AtMost, bound, tolerance, slack)
    }

    pub fn at_least(name: impl Into<String>, context: Context, value: f64, bound: f64, tolerance: f64, slack: Slack) -> Self {
        Self::new(name, context, value, Limit::AtLeast, bound, tolerance, slack)
    }

    pub fn info(name: impl Into<String>, context: Context, value: f64) -> Self {
        Self::new(name, context, value, Limit::Info, f64::NAN, 0.0, Slack::Absolute)
    }

    /// Downgrades a pass to inconclusive.
    pub fn inconclusive(mut self) -> Self {
        if self.verdict == Verdict::Pass {
            self.verdict = Verdict::Inconclusive;
        }
        self
    }

    fn slack_amount(&self) -> f64 {
        match self.slack {
            Slack::Absolute => self.tolerance,
            Slack::Relative => self.tolerance * self.bound.abs(),
        }
    }

    /// Normalized distance to violation; negative when the bound is violated
    /// and NaN values always count as violations.
    pub fn margin(&self) -> f64 {
        let s = self.slack_amount();
        let raw = match self.limit {
            Limit::AtMost => self.bound + s - self.value,
            Limit::AtLeast => self.value - (self.bound - s),
            Limit::Near => s - (self.value - self.bound).abs(),
            Limit::Info => return f64::INFINITY,
        };
        if raw.is_nan() {
            return f64::NEG_INFINITY;
        }
        raw / (self.bound.abs() + s).max(f64::MIN_POSITIVE)
    }
}

/// Configuration recorded with every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportConfig {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "R")]
    pub r: f64,
    pub potential: String,
    pub p: Vec<f64>,
    pub seed: u64,
    pub trials: usize,
    pub quad_accuracy: f64,
    pub tau0: f64,
    pub dense_tol: f64,
    pub quad_tol: f64,
    pub route_tol: f64,
}

impl From<&RunConfig> for ReportConfig {
    fn from(c: &RunConfig) -> Self {
        Self {
            d: c.d,
            n: c.n,
            r: c.r,
            potential: c.potential.clone(),
            p: c.p.clone(),
            seed: c.seed,
            trials: c.trials,
            quad_accuracy: c.quad_accuracy,
            tau0: c.tau0,
            dense_tol: c.dense_tol,
            quad_tol: c.quad_tol,
            route_tol: c.route_tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_id: CheckId,
    pub config: ReportConfig,
    pub measurements: Vec<Measurement>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    /// Set when the check could not run; the verdict is then a failure.
    pub error: Option<String>,
    pub runtime_s: f64,
}

impl CheckReport {
    fn new(check_id: CheckId, config: &RunConfig, measurements: Vec<Measurement>, notes: Vec<String>) -> Self {
        let verdict = if measurements.iter().any(|m| m.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if measurements.iter().any(|m| m.verdict == Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        };
        Self { check_id, config: config.into(), measurements, verdict, notes, error: None, runtime_s: 0.0 }
    }

    fn failed(check_id: CheckId, config: &RunConfig, err: &Error) -> Self {
        Self {
            check_id,
            config: config.into(),
            measurements: Vec::new(),
            verdict: Verdict::Fail,
            notes: Vec::new(),
            error: Some(err.to_string()),
            runtime_s: 0.0,
        }
    }

    /// The measurement summarizing the report: the worst failure, otherwise
    /// the asserted measurement with the smallest margin.
    pub fn headline(&self) -> Option<&Measurement> {
        let pick = |v: Verdict| {
            self.measurements
                .iter()
                .filter(|m| m.verdict == v && m.limit != Limit::Info)
                .min_by(|a, b| a.margin().total_cmp(&b.margin()))
        };
        pick(Verdict::Fail)
            .or_else(|| pick(Verdict::Inconclusive))
            .or_else(|| pick(Verdict::Pass))
            .or_else(|| self.measurements.first())
    }

    pub fn measurement(&self, name: &str) -> Option<&Measurement> {
        self.measurements.iter().find(|m| m.name == name)
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

type CacheKey = (usize, usize, u64, String);

/// Dense operators shared between the checks of one run, keyed by grid and
/// potential. Each operator is built once even when checks run concurrently.
#[derive(Default)]
pub struct OperatorCache {
    slots: Mutex<HashMap<CacheKey, Arc<OnceLock<Arc<DenseOperator>>>>>,
}

impl OperatorCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Discretizes `spec` (auto cap) and returns it with its dense operator.
    pub fn operator(&self, spectral: &Spectral, spec: &PotentialSpec) -> Result<(Field, Arc<DenseOperator>)> {
        let grid = *spectral.grid();
        let v = discretize_potential(spec, grid, Cap::Auto)?;
        if matches!(spec, PotentialSpec::Custom(_)) {
            return Ok((v.clone(), Arc::new(dense_schrodinger(spectral, &v)?)));
        }
        let key = (grid.d, grid.n, grid.r.to_bits(), spec.tag());
        let slot = self.slots.lock().unwrap().entry(key).or_default().clone();
        if let Some(op) = slot.get() {
            return Ok((v, op.clone()));
        }
        let op = Arc::new(dense_schrodinger(spectral, &v)?);
        Ok((v, slot.get_or_init(|| op).clone()))
    }
}

/// Runs one check. Errors (an infeasible dense size, an invalid config) are
/// returned rather than folded into the report.
pub fn run_check(id: CheckId, config: &RunConfig) -> Result<CheckReport> {
    run_check_with(id, config, &OperatorCache::new())
}

pub fn run_check_with(id: CheckId, config: &RunConfig, cache: &OperatorCache) -> Result<CheckReport> {
    config.validate()?;
    let start = Instant::now();
    let mut rng = trials::rng_for(config.seed, id.stream());
    let (measurements, notes) = checks::run(id, config, cache, &mut rng)?;
    let mut report = CheckReport::new(id, config, measurements, notes);
    report.runtime_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Runs the selected checks on at most `jobs` threads. Reports come back in
/// suite order; a check that errors yields a failed report carrying the error.
pub fn run_suite(config: &RunConfig) -> Result<Vec<CheckReport>> {
    config.validate()?;
    let ids = config.selection()?;
    let cache = OperatorCache::new();
    let run_one = |id: CheckId| {
        let start = Instant::now();
        run_check_with(id, config, &cache).unwrap_or_else(|e| {
            log::error!("{id}: {e}");
            let mut r = CheckReport::failed(id, config, &e);
            r.runtime_s = start.elapsed().as_secs_f64();
            r
        })
    };
    let jobs = config.jobs.max(1);
    if jobs == 1 {
        return Ok(ids.into_iter().map(run_one).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    use rayon::prelude::*;
    Ok(pool.install(|| ids.into_par_iter().map(run_one).collect()))
}

/// Ids of the reports that did not pass.
pub fn failing_ids(reports: &[CheckReport]) -> Vec<CheckId> {
    reports.iter().filter(|r| !r.passed()).map(|r| r.check_id).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig { n: 8, trials: 4, ..RunConfig::default() }
    }

    #[test]
    fn ids_roundtrip_and_suites_partition() {
        for id in CheckId::ALL {
            assert_eq!(id.as_str().parse::<CheckId>().unwrap(), id);
        }
        assert_eq!("QUADRATURE_VS_DENSE".parse::<CheckId>().unwrap(), CheckId::QuadDense);
        assert!("NOPE".parse::<CheckId>().is_err());
        let sizes: Vec<usize> =
            [Suite::Core, Suite::Counterexamples, Suite::Oracles].iter().map(|s| s.checks().len()).collect();
        assert_eq!(sizes, [10, 3, 2]);
        assert_eq!(Suite::All.checks().len(), 15);
        assert!("everything".parse::<Suite>().is_err());
        let cfg = RunConfig { suite: "bogus".into(), ..RunConfig::default() };
        assert!(cfg.selection().is_err());
    }

    #[test]
    fn config_json_roundtrip_and_strictness() {
        let cfg = RunConfig { d: 3, seed: 9, p: vec![1.5], ..RunConfig::default() };
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back.d, 3);
        assert_eq!(back.seed, 9);
        assert_eq!(back.p, vec![1.5]);
        let partial: RunConfig = serde_json::from_str(r#"{"n": 24, "R": 3.0}"#).unwrap();
        assert_eq!((partial.n, partial.r, partial.d), (24, 3.0, 2));
        assert!(serde_json::from_str::<RunConfig>(r#"{"nn": 24}"#).is_err());
        assert!(RunConfig { p: vec![0.5], ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { n: 7, ..RunConfig::default() }.validate().is_err());
    }

    #[test]
    fn margins_and_verdicts() {
        let c = Context::continuum(1, "zero");
        let m = Measurement::at_most("a", c.clone(), 1.0 + 5e-9, 1.0, 1e-8, Slack::Absolute);
        assert_eq!(m.verdict, Verdict::Pass);
        let m = Measurement::at_most("a", c.clone(), 1.1, 1.0, 0.05, Slack::Relative);
        assert_eq!(m.verdict, Verdict::Fail);
        assert!(m.margin() < 0.0);
        let m = Measurement::at_least("a", c.clone(), f64::NAN, 0.0, 0.0, Slack::Absolute);
        assert_eq!(m.verdict, Verdict::Fail);
        assert_eq!(Measurement::info("a", c, 3.0).verdict, Verdict::Pass);
    }

    #[test]
    fn interp_bound_at_the_endpoints() {
        let cfg = RunConfig { p: vec![1.0, 2.0], ..small() };
        let r = run_check(CheckId::Interp, &cfg).unwrap();
        assert!(r.passed());
        for m in r.measurements.iter().filter(|m| m.limit != Limit::Info) {
            let expected = if m.context.p == Some(1.0) { 2.0 } else { 1.0 };
            assert_eq!(m.bound, expected, "{}", m.name);
        }
    }

    #[test]
    fn green_mass_is_one_for_constant_potential() {
        let cfg = RunConfig { d: 1, n: 32, potential: "const:2".into(), ..small() };
        let r = run_check(CheckId::GreenMass, &cfg).unwrap();
        assert!(r.passed());
        let m = r.measurement("max_y green mass").unwrap();
        assert!((m.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn suite_reports_are_seeded_and_ordered() {
        let cfg = RunConfig { checks: vec!["L1_BOUND".into(), "W_KERNEL".into()], jobs: 2, ..small() };
        let a = run_suite(&cfg).unwrap();
        let b = run_suite(&RunConfig { jobs: 1, ..cfg.clone() }).unwrap();
        assert_eq!(a.iter().map(|r| r.check_id).collect::<Vec<_>>(), [CheckId::L1Bound, CheckId::WKernel]);
        for (x, y) in a.iter().zip(&b) {
            let vx: Vec<f64> = x.measurements.iter().map(|m| m.value).collect();
            let vy: Vec<f64> = y.measurements.iter().map(|m| m.value).collect();
            assert_eq!(vx, vy);
        }
        let other = run_suite(&RunConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(
            a[0].measurements.iter().map(|m| m.value).collect::<Vec<_>>(),
            other[0].measurements.iter().map(|m| m.value).collect::<Vec<_>>()
        );
    }

    #[test]
    fn invalid_config_is_rejected_and_operators_are_shared() {
        let cfg = RunConfig { checks: vec!["INTERP".into()], r: -1.0, ..small() };
        assert!(run_suite(&cfg).is_err());
        let cache = OperatorCache::new();
        let grid = GridSpec::new(1, 8, 1.0).unwrap();
        let s = Spectral::new(grid);
        let (_, a) = cache.operator(&s, &PotentialSpec::Harmonic).unwrap();
        let (_, b) = cache.operator(&s, &PotentialSpec::Harmonic).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }
}
