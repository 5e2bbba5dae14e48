//! Report CSV/JSON and config files.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::{CheckReport, RunConfig};

pub const CSV_COLUMNS: [&str; 12] =
    ["check_id", "d", "n", "R", "potential", "p", "measured", "bound", "tolerance", "verdict", "seed", "runtime_s"];

/// One row per report, summarized by its headline measurement.
pub fn write_csv<W: Write>(w: W, reports: &[CheckReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_COLUMNS)?;
    for r in reports {
        let head = r.headline();
        let (d, n, rr, pot, p) = match head {
            Some(m) => (m.context.d, m.context.n, m.context.r, m.context.potential.clone(), m.context.p),
            None => (r.config.d, Some(r.config.n), Some(r.config.r), r.config.potential.clone(), None),
        };
        let num = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_default();
        out.write_record([
            r.check_id.to_string(),
            d.to_string(),
            n.map(|v| v.to_string()).unwrap_or_default(),
            num(rr),
            pot,
            num(p),
            num(head.map(|m| m.value)),
            num(head.map(|m| m.bound)),
            num(head.map(|m| m.tolerance)),
            r.verdict.to_string(),
            r.config.seed.to_string(),
            format!("{:.3}", r.runtime_s),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(w: W, reports: &[CheckReport]) -> Result<()> {
    serde_json::to_writer_pretty(w, reports)?;
    Ok(())
}

pub fn read_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Path { path: path.display().to_string(), source: e })?;
    Ok(serde_json::from_str(&text)?)
}
