//! Differences between two run directories.

use std::path::Path;

use crate::error::CliError;
use crate::output::{num, HISTORY, MANIFEST, POSTERIOR_PDF};

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    /// `(component, ∫|p_a - p_b| dx)` for the prior columns.
    pub l1_prior: Vec<(usize, f64)>,
    pub l1_posterior: Vec<(usize, f64)>,
    /// `(step, ‖mean_a - mean_b‖)` of the assimilated means.
    pub mean_diff: Vec<(usize, f64)>,
    pub forecast_mean_diff: Vec<(usize, f64)>,
}

impl CompareReport {
    pub fn total_l1_posterior(&self) -> f64 {
        self.l1_posterior.iter().map(|(_, v)| v).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,component,step,value\n");
        for (name, rows) in [("l1_prior", &self.l1_prior), ("l1_posterior", &self.l1_posterior)] {
            for (c, v) in rows {
                out.push_str(&format!("{name},{c},,{}\n", num(*v)));
            }
        }
        for (name, rows) in [("mean_diff", &self.mean_diff), ("forecast_mean_diff", &self.forecast_mean_diff)] {
            for (k, v) in rows {
                out.push_str(&format!("{name},,{k},{}\n", num(*v)));
            }
        }
        out
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Incompatible(format!("{}: {e}", path.display())))?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CliError::Incompatible(format!("{}: empty file", path.display())))?
            .split(',')
            .map(String::from)
            .collect();
        let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
        Ok(Self { header, rows })
    }

    fn col(&self, name: &str, path: &Path) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Incompatible(format!("{}: no column `{name}`", path.display())))
    }

    fn value(&self, r: usize, c: usize) -> Result<f64, CliError> {
        self.rows[r][c]
            .parse()
            .map_err(|_| CliError::Incompatible(format!("unparseable value `{}`", self.rows[r][c])))
    }
}

fn kind_of(dir: &Path) -> Result<String, CliError> {
    let p = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&p).map_err(|e| CliError::Incompatible(format!("{}: {e}", p.display())))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Incompatible(format!("{}: {e}", p.display())))?;
    Ok(v["config"]["kind"].as_str().unwrap_or_default().to_string())
}

fn l1(a: &Table, b: &Table, col: &str, pa: &Path, pb: &Path) -> Result<Vec<(usize, f64)>, CliError> {
    let (ca, cb) = (a.col(col, pa)?, b.col(col, pb)?);
    let (xa, comp) = (a.col("x", pa)?, a.col("component", pa)?);
    let mut out: Vec<(usize, f64)> = Vec::new();
    let mut prev: Option<(String, f64, f64)> = None;
    for r in 0..a.rows.len() {
        let c = a.rows[r][comp].clone();
        let x = a.value(r, xa)?;
        let d = (a.value(r, ca)? - b.value(r, cb)?).abs();
        let ci: usize = c.parse().map_err(|_| CliError::Incompatible(format!("bad component `{c}`")))?;
        match &prev {
            Some((pc, px, pd)) if *pc == c => {
                out.last_mut().expect("started").1 += 0.5 * (x - px) * (d + pd);
            }
            _ => out.push((ci, 0.0)),
        }
        prev = Some((c, x, d));
    }
    Ok(out)
}

fn mean_diffs(a: &Table, b: &Table, prefix: &str, pa: &Path) -> Result<Vec<(usize, f64)>, CliError> {
    let cols: Vec<usize> = a
        .header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with(prefix))
        .map(|(i, _)| i)
        .collect();
    let step = a.col("step", pa)?;
    (0..a.rows.len())
        .map(|r| {
            let s: f64 = cols
                .iter()
                .map(|&c| Ok((a.value(r, c)? - b.value(r, c)?).powi(2)))
                .sum::<Result<f64, CliError>>()?;
            let k = a.rows[r][step].parse().unwrap_or(r + 1);
            Ok((k, s.sqrt()))
        })
        .collect()
}

/// Compares two run directories of the same experiment kind on the same
/// density grid.
pub fn compare_runs(a: &Path, b: &Path) -> Result<CompareReport, CliError> {
    let (ka, kb) = (kind_of(a)?, kind_of(b)?);
    if ka != kb {
        return Err(CliError::Incompatible(format!("experiment kinds differ: {ka} vs {kb}")));
    }
    let (pa, pb) = (a.join(POSTERIOR_PDF), b.join(POSTERIOR_PDF));
    let (ta, tb) = (Table::read(&pa)?, Table::read(&pb)?);
    let (xa, xb) = (ta.col("x", &pa)?, tb.col("x", &pb)?);
    let (ca, cb) = (ta.col("component", &pa)?, tb.col("component", &pb)?);
    let same_grid = ta.rows.len() == tb.rows.len()
        && ta.rows.iter().zip(&tb.rows).all(|(ra, rb)| ra[xa] == rb[xb] && ra[ca] == rb[cb]);
    if !same_grid {
        return Err(CliError::Incompatible("density grids differ".into()));
    }
    let (ha, hb) = (a.join(HISTORY), b.join(HISTORY));
    let (sa, sb) = (Table::read(&ha)?, Table::read(&hb)?);
    if sa.header != sb.header || sa.rows.len() != sb.rows.len() {
        return Err(CliError::Incompatible("histories have different steps or state dimensions".into()));
    }
    Ok(CompareReport {
        l1_prior: l1(&ta, &tb, "prior", &pa, &pb)?,
        l1_posterior: l1(&ta, &tb, "posterior", &pa, &pb)?,
        mean_diff: mean_diffs(&sa, &sb, "assim_mean_", &ha)?,
        forecast_mean_diff: mean_diffs(&sa, &sb, "forecast_mean_", &ha)?,
    })
}
