//! Artifact files. Numbers are written with 17 significant digits, `.` as
//! the decimal separator, and LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;
use crate::experiment::RunResult;

pub const MANIFEST: &str = "manifest.json";
pub const HISTORY: &str = "history.csv";
pub const POSTERIOR_PDF: &str = "posterior_pdf.csv";
pub const ERROR: &str = "error.csv";
pub const OBSERVATIONS: &str = "observations.csv";
pub const PRIOR_PCE: &str = "prior_pce.txt";
pub const POSTERIOR_PCE: &str = "posterior_pce.txt";
pub const FINAL_MAP: &str = "final_map.txt";

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn row<I: IntoIterator<Item = String>>(out: &mut String, cells: I) {
    let cells: Vec<String> = cells.into_iter().collect();
    out.push_str(&cells.join(","));
    out.push('\n');
}

pub fn history_csv(r: &RunResult) -> String {
    let n = r.initial.value_dim();
    let nq = r.history.first().map_or(0, |h| h.quantiles.len());
    let mut out = String::new();
    let mut head: Vec<String> = ["step", "time", "degree", "cov_trace"].map(String::from).to_vec();
    head.extend((0..n).map(|i| format!("forecast_mean_{i}")));
    head.extend((0..n).map(|i| format!("assim_mean_{i}")));
    for i in 0..nq {
        head.extend(["q05", "q25", "q50", "q75", "q95"].iter().map(|q| format!("{q}_{i}")));
    }
    row(&mut out, head);
    for h in &r.history {
        let mut cells = vec![h.step.to_string(), num(h.time), h.degree.to_string(), num(h.cov_trace)];
        cells.extend(h.forecast_mean.iter().map(|&v| num(v)));
        cells.extend(h.assim_mean.iter().map(|&v| num(v)));
        for q in &h.quantiles {
            cells.extend(q.iter().map(|&v| num(v)));
        }
        row(&mut out, cells);
    }
    out
}

pub fn pdf_csv(r: &RunResult) -> String {
    let p = &r.pdf;
    let mut out = String::new();
    let mut head = vec!["component".to_string(), "x".into(), "prior".into(), "posterior".into()];
    if p.truth.is_some() {
        head.push("truth".into());
    }
    row(&mut out, head);
    for (k, &c) in p.components.iter().enumerate() {
        for (j, &x) in p.grids[k].iter().enumerate() {
            let mut cells = vec![c.to_string(), num(x), num(p.prior[k][j]), num(p.posterior[k][j])];
            if let Some(t) = &p.truth {
                cells.push(num(t[k][j]));
            }
            row(&mut out, cells);
        }
    }
    out
}

pub fn error_csv(r: &RunResult) -> Option<String> {
    let rows = r.errors.as_ref()?;
    let mut out = String::from("step,time,rmse,mean_error\n");
    for e in rows {
        row(&mut out, [e.step.to_string(), num(e.time), num(e.rmse), num(e.mean_error)]);
    }
    Some(out)
}

pub fn observations_csv(r: &RunResult) -> String {
    let mut out = String::new();
    let dim = r.observations.first().map_or(0, Vec::len);
    row(&mut out, std::iter::once("step".to_string()).chain((0..dim).map(|i| format!("y_{i}"))));
    for (k, y) in r.observations.iter().enumerate() {
        row(&mut out, std::iter::once((k + 1).to_string()).chain(y.iter().map(|&v| num(v))));
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    config: &'a crate::config::Config,
    derived: &'a std::collections::BTreeMap<String, Value>,
    warnings: &'a [String],
    files: Vec<&'static str>,
}

/// All artifacts as `(file name, contents)`, in a fixed order.
pub fn render(r: &RunResult) -> Result<Vec<(&'static str, String)>, CliError> {
    let mut files = vec![
        (HISTORY, history_csv(r)),
        (POSTERIOR_PDF, pdf_csv(r)),
        (OBSERVATIONS, observations_csv(r)),
        (PRIOR_PCE, r.initial.to_text()),
        (POSTERIOR_PCE, r.posterior.to_text()),
    ];
    if let Some(e) = error_csv(r) {
        files.push((ERROR, e));
    }
    if let Some(m) = &r.last_map {
        let mut buf = Vec::new();
        m.write_text(&mut buf)?;
        files.push((FINAL_MAP, String::from_utf8(buf).expect("ascii output")));
    }
    let mut names: Vec<&'static str> = files.iter().map(|(n, _)| *n).collect();
    names.insert(0, MANIFEST);
    let manifest = Manifest {
        tool: "bayes-pce-cli",
        version: env!("CARGO_PKG_VERSION"),
        core_version: bayes_pce::VERSION,
        config: &r.config,
        derived: &r.derived,
        warnings: &r.warnings,
        files: names,
    };
    let mut json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.into()))?;
    json.push('\n');
    files.insert(0, (MANIFEST, json));
    Ok(files)
}

/// Writes all artifacts into `dir`, replacing it. Files go to a staging
/// directory first so that a failure never leaves partial output behind.
pub fn write_run(r: &RunResult, dir: &Path) -> Result<PathBuf, CliError> {
    let files = render(r)?;
    let name = dir
        .file_name()
        .ok_or_else(|| CliError::Validation(format!("output.dir: `{}` has no final component", dir.display())))?;
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let mut staging_name = std::ffi::OsString::from(".");
    staging_name.push(name);
    staging_name.push(".partial");
    let staging = parent.join(staging_name);
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir(&staging)?;
    let result = (|| {
        for (n, text) in &files {
            fs::write(staging.join(n), text)?;
        }
        if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        fs::rename(&staging, dir)
    })();
    if let Err(e) = result {
        let _ = fs::remove_dir_all(&staging);
        return Err(e.into());
    }
    Ok(dir.to_path_buf())
}

/// Summary line for the terminal.
pub fn summary(r: &RunResult, dir: &Path) -> String {
    let mut s = String::new();
    let _ = write!(s, "{} steps -> {}", r.history.len(), dir.display());
    if let Some(e) = r.errors.as_ref().and_then(|e| e.last()) {
        let _ = write!(s, " (final rmse {:.4e})", e.rmse);
    }
    if !r.warnings.is_empty() {
        let _ = write!(s, ", {} warnings in manifest", r.warnings.len());
    }
    s
}
