use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};

use rzlab::counterexamples::{divergence_scan, ScanKind, ScanParams};
use rzlab::dense::dense_schrodinger;
use rzlab::grid::GridSpec;
use rzlab::potentials::{discretize_potential, Cap, PotentialSpec};
use rzlab::semigroup::{dense_kernel, fk_kernel_estimate, gaussian_kernel, FkSettings};
use rzlab::spectral::Spectral;
use rzlab::verify::{self, CheckId, CheckReport, RunConfig};
use rzlab::rzf;

#[derive(Parser)]
#[command(name = "rzlab", version, about = "Riesz transforms of Schrödinger operators on a periodic grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite of checks and write the report.
    Verify {
        /// core, counterexamples, oracles or all.
        #[arg(long)]
        suite: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a single check.
    Check {
        /// Check id, e.g. INTERP or GREEN_MASS.
        id: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Counterexample divergence scan, written as tidy CSV.
    Scan {
        /// CE1, CE2 or CE3.
        kind: String,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        /// Comma-separated cutoffs (CE1, CE2) or radii (CE3).
        #[arg(long, value_delimiter = ',')]
        points: Option<Vec<f64>>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Heat kernel of L = -Δ + V at a pair of points.
    Kernel {
        /// Feynman–Kac Monte Carlo estimate.
        #[arg(long)]
        fk: bool,
        #[arg(long, default_value = "zero")]
        potential: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Vec<f64>,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 64)]
        slices: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also evaluate the dense lattice kernel on an n-point-per-axis grid.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "R", default_value_t = 4.0)]
        r: f64,
    },
    /// Convert fields between RZF1 and CSV.
    Field {
        #[command(subcommand)]
        action: FieldAction,
    },
}

#[derive(Subcommand)]
enum FieldAction {
    /// RZF1 file to CSV.
    Dump {
        path: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV file to RZF1.
    Load {
        path: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Concurrent checks.
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory receiving report.csv and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "R")]
    r: Option<f64>,
    #[arg(long)]
    potential: Option<String>,
    /// Comma-separated exponents.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long)]
    quad_accuracy: Option<f64>,
    #[arg(long)]
    fk_paths: Option<usize>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => verify::read_config(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = &self.$field { c.$field = v.clone(); } )* };
        }
        set!(jobs, d, n, r, potential, p, seed, trials, tau0, quad_accuracy, fk_paths);
        if let Some(o) = &self.out {
            c.out_dir = Some(o.display().to_string());
        }
        Ok(c)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Verify { suite, run } => {
            let mut cfg = run.config()?;
            if let Some(s) = suite {
                cfg.suite = s;
                cfg.checks.clear();
            }
            report(&cfg, verify::run_suite(&cfg)?)
        }
        Command::Check { id, run } => {
            let mut cfg = run.config()?;
            let id: CheckId = id.parse()?;
            cfg.checks = vec![id.to_string()];
            report(&cfg, verify::run_suite(&cfg)?)
        }
        Command::Scan { kind, d, eps, p, points, out } => {
            let kind: ScanKind = kind.parse()?;
            let mut params = ScanParams::defaults(kind);
            params.d = d.unwrap_or(params.d);
            params.eps = eps.unwrap_or(params.eps);
            params.p = p.unwrap_or(params.p);
            params.points = points;
            let scan = divergence_scan(kind, &params)?;
            let sink: Box<dyn Write> = match &out {
                Some(path) => Box::new(create(path)?),
                None => Box::new(io::stdout().lock()),
            };
            let mut w = csv::Writer::from_writer(sink);
            let (xname, yname) = match kind {
                ScanKind::Ce1 => ("delta", "A"),
                ScanKind::Ce2 => ("delta", "M"),
                ScanKind::Ce3 => ("rho", "T"),
            };
            w.write_record(["scan", "d", "eps", "p", "x_name", "x", "y_name", "y"])?;
            for (x, y) in scan.abscissa.iter().zip(&scan.values) {
                w.write_record([
                    kind.to_string(),
                    params.d.to_string(),
                    params.eps.to_string(),
                    params.p.to_string(),
                    xname.into(),
                    x.to_string(),
                    yname.into(),
                    y.to_string(),
                ])?;
            }
            w.flush()?;
            eprintln!(
                "{kind}: slope {} (expected {}), R^2 {}{}",
                scan.fit.slope,
                scan.expected_slope,
                scan.fit.r2,
                scan.increment_error.map(|e| format!(", increment error {e}")).unwrap_or_default()
            );
            if !scan.conclusive {
                eprintln!("{kind}: fit inconclusive (R^2 below {})", rzlab::counterexamples::MIN_R2);
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Kernel { fk, potential, x, y, t, paths, slices, seed, n, r } => {
            let spec: PotentialSpec = potential.parse()?;
            if x.is_empty() || x.len() != y.len() {
                bail!("--x and --y must have the same nonzero length");
            }
            let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            println!("gaussian {}", gaussian_kernel(&diff, t));
            if fk {
                let settings = FkSettings { paths, slices, seed, cap: None };
                let est = fk_kernel_estimate(&spec, &x, &y, t, &settings)?;
                println!("fk {} stderr {}", est.estimate, est.stderr);
                println!("fk_weight {} stderr {}", est.weight, est.weight_stderr);
            }
            if let Some(n) = n {
                let grid = GridSpec::new(x.len(), n, r)?;
                let spectral = Spectral::new(grid);
                let v = discretize_potential(&spec, grid, Cap::Auto)?;
                let op = dense_schrodinger(&spectral, &v)?;
                let free = dense_schrodinger(&spectral, &discretize_potential(&PotentialSpec::Zero, grid, Cap::Auto)?)?;
                let (xi, yi) = (grid.nearest(&x), grid.nearest(&y));
                let k = dense_kernel(&op, t, xi, yi);
                println!("dense {k} at x={:?} y={:?}", grid.point(xi), grid.point(yi));
                println!("dense_weight {}", k / dense_kernel(&free, t, xi, yi));
            }
            if !fk && n.is_none() {
                bail!("nothing to do: pass --fk and/or --n");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Field { action } => {
            match action {
                FieldAction::Dump { path, out } => {
                    let f = rzf::load(&path)?;
                    match out {
                        Some(o) => rzf::write_csv(create(&o)?, &f)?,
                        None => rzf::write_csv(io::stdout().lock(), &f)?,
                    }
                }
                FieldAction::Load { path, out } => {
                    let file = File::open(&path).with_context(|| format!("{}", path.display()))?;
                    let f = rzf::read_csv(file).with_context(|| format!("{}", path.display()))?;
                    rzf::save(&out, &f)?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("{}", path.display()))?))
}

/// Prints the CSV, writes report files when an output directory is set and
/// maps the verdicts to the exit status.
fn report(cfg: &RunConfig, reports: Vec<CheckReport>) -> Result<ExitCode> {
    verify::write_csv(io::stdout().lock(), &reports)?;
    if let Some(dir) = &cfg.out_dir {
        let dir = PathBuf::from(dir);
        std::fs::create_dir_all(&dir).with_context(|| format!("{}", dir.display()))?;
        verify::write_csv(create(&dir.join("report.csv"))?, &reports)?;
        verify::write_json(create(&dir.join("report.json"))?, &reports)?;
    }
    for r in &reports {
        if let Some(e) = &r.error {
            eprintln!("{}: error: {e}", r.check_id);
        }
    }
    let failing = verify::failing_ids(&reports);
    if failing.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        let ids: Vec<String> = failing.iter().map(|i| i.to_string()).collect();
        eprintln!("failing checks: {}", ids.join(", "));
        Ok(ExitCode::from(1))
    }
}
