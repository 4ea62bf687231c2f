//! Builds the filter problem for each experiment kind and runs it.

use std::collections::BTreeMap;
use std::path::Path;

use bayes_pce::filter::{
    assimilate_with, FilterOptions, FittedMap, HistoryRow, MeasurementModel, StateModel, TrackingState, UpdateRule,
    VectorMap,
};
use bayes_pce::models::diffusion::{diffusion1d_observe, Diffusion1DSetup};
use bayes_pce::models::lorenz::{lorenz84_step, Lorenz84Params};
use bayes_pce::models::scalar::{batch_observations, TruthShape};
use bayes_pce::moments::mean;
use bayes_pce::oracle::{kde_pdf, Bandwidth};
use bayes_pce::pce::GermSampler;
use bayes_pce::{BasisDictionary, PceVector};
use nalgebra::{DMatrix, DVector};
use serde_json::Value;

use crate::config::{AutoOr, BasisKind, Config, HKind, Kind};
use crate::error::CliError;

/// Density estimates on a per-component grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PdfTable {
    pub components: Vec<usize>,
    pub grids: Vec<Vec<f64>>,
    pub prior: Vec<Vec<f64>>,
    pub posterior: Vec<Vec<f64>>,
    pub truth: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub step: usize,
    pub time: f64,
    /// `sqrt((‖mean - truth‖² + tr C) / n)`.
    pub rmse: f64,
    /// `‖mean - truth‖ / sqrt(n)`.
    pub mean_error: f64,
}

/// Everything a run produces, before it is written out.
#[derive(Debug, Clone)]
pub struct RunResult {
    /// Resolved configuration, including derived grid ranges.
    pub config: Config,
    pub history: Vec<HistoryRow<f64>>,
    pub initial: PceVector<f64>,
    pub posterior: PceVector<f64>,
    pub last_map: Option<FittedMap<f64>>,
    pub pdf: PdfTable,
    pub errors: Option<Vec<ErrorRow>>,
    pub observations: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
    pub derived: BTreeMap<String, Value>,
}

struct Problem {
    z0: PceVector<f64>,
    model: StateModel<f64>,
    mm: MeasurementModel<f64>,
    observations: Vec<Vec<f64>>,
    /// True state at steps `0..=steps`, when known.
    truth: Option<Vec<DVector<f64>>>,
    truth_shape: Option<TruthShape>,
    time_per_step: f64,
    default_range: Vec<[f64; 2]>,
    derived: BTreeMap<String, Value>,
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(v))
}

fn gaussian_state(mean: &[f64], sd: &[f64]) -> Result<PceVector<f64>, CliError> {
    let n = mean.len();
    let dims: Vec<usize> = (0..n).collect();
    Ok(PceVector::gaussian(&DVector::from_column_slice(mean), &diag(sd), &dims, n)?)
}

fn read_observations(path: &Path, steps: usize, meas_dim: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let bad = |line: usize, msg: String| CliError::Validation(format!("{}:{line}: {msg}", path.display()));
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| bad(i + 1, format!("`{s}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != meas_dim {
            return Err(bad(i + 1, format!("expected {meas_dim} values, got {}", row.len())));
        }
        rows.push(row);
    }
    if rows.len() < steps {
        return Err(bad(rows.len(), format!("{steps} observation rows needed, found {}", rows.len())));
    }
    rows.truncate(steps);
    Ok(rows)
}

/// Noisy synthetic observations `h(truth_k) + eps v_k`, `k = 1..=steps`.
fn synthesize(truth: &[DVector<f64>], h: &VectorMap<f64>, eps: f64, seed: u64) -> Vec<Vec<f64>> {
    let r = h.out_dim();
    truth[1..]
        .iter()
        .zip(GermSampler::<f64>::new(r, seed))
        .map(|(x, v)| h.eval(x.as_slice()).iter().zip(&v).map(|(a, b)| a + eps * b).collect())
        .collect()
}

fn cubic(components: Vec<usize>) -> VectorMap<f64> {
    let r = components.len();
    VectorMap::nonlinear(r, Some(3), move |x: &[f64]| components.iter().map(|&i| x[i].powi(3)).collect())
}

fn selection(components: &[usize], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(components.len(), n, |r, c| if components[r] == c { 1.0 } else { 0.0 })
}

fn build_scalar(c: &Config, base: &Path) -> Result<Problem, CliError> {
    let s = c.scalar.as_ref().expect("validated");
    let seeds = c.seeds.as_ref().expect("resolved");
    let steps = c.steps();
    let shape = TruthShape::named(s.truth_shape.as_deref().unwrap_or("gaussian"), s.truth_mean, s.truth_sd)?;
    let theta = GermSampler::<f64>::new(1, seeds.truth).next().expect("infinite stream")[0];
    let x_true = shape.transport(theta);
    let h = match c.h() {
        HKind::Cubic => cubic(vec![0]),
        _ => VectorMap::identity(1),
    };
    let batch = s.batch.unwrap_or(1);
    let eps_eff = c.measurement.eps / (batch as f64).sqrt();
    let observations = match &c.measurement.observations {
        Some(p) => read_observations(&Config::resolve_path(base, p), steps, 1)?,
        None => batch_observations(h.eval(&[x_true])[0], c.measurement.eps, batch, steps, seeds.observations)
            .into_iter()
            .map(|v| vec![v])
            .collect(),
    };
    let (pm, psd) = (c.prior.mean[0], c.prior.sd[0]);
    let (tlo, thi) = shape
        .components
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, m, sd)| (lo.min(m - 5.0 * sd), hi.max(m + 5.0 * sd)));
    let mut derived = BTreeMap::new();
    derived.insert("truth_value".into(), Value::from(x_true));
    derived.insert("effective_noise_sd".into(), Value::from(eps_eff));
    Ok(Problem {
        z0: gaussian_state(&c.prior.mean, &c.prior.sd)?,
        model: StateModel::new(VectorMap::identity(1)),
        mm: MeasurementModel::new(h, eps_eff)?,
        observations,
        truth: Some(vec![DVector::from_element(1, x_true); steps + 1]),
        truth_shape: Some(shape),
        time_per_step: 1.0,
        default_range: vec![[tlo.min(pm - 5.0 * psd), thi.max(pm + 5.0 * psd)]],
        derived,
    })
}

fn build_lorenz(c: &Config, base: &Path) -> Result<Problem, CliError> {
    let l = c.lorenz84.as_ref().expect("validated");
    let seeds = c.seeds.as_ref().expect("resolved");
    let steps = c.steps();
    let d = Lorenz84Params::default();
    let p = Lorenz84Params {
        a: l.a.unwrap_or(d.a),
        b: l.b.unwrap_or(d.b),
        f: l.f.unwrap_or(d.f),
        g: l.g.unwrap_or(d.g),
        dt_inner: l.dt_inner.unwrap_or(d.dt_inner),
        days_per_update: l.days_per_update.unwrap_or(d.days_per_update),
    };
    let observed = c.measurement.observed.clone().unwrap_or_else(|| (0..3).collect());
    let h = match c.h() {
        HKind::Cubic => cubic(observed.clone()),
        _ => VectorMap::linear(selection(&observed, 3)),
    };
    let truth: Option<Vec<DVector<f64>>> = l.truth_initial.as_ref().map(|x0| {
        let mut path = vec![DVector::from_column_slice(x0)];
        for _ in 0..steps {
            let next: Vec<f64> = lorenz84_step(path.last().expect("nonempty").as_slice(), &p);
            path.push(DVector::from_vec(next));
        }
        path
    });
    let observations = match (&c.measurement.observations, &truth) {
        (Some(f), _) => read_observations(&Config::resolve_path(base, f), steps, observed.len())?,
        (None, Some(t)) => synthesize(t, &h, c.measurement.eps, seeds.observations),
        (None, None) => unreachable!("validated"),
    };
    let mut model = StateModel::new(VectorMap::nonlinear(3, None, move |x: &[f64]| lorenz84_step(x, &p)));
    let sx = l.process_noise.unwrap_or(0.0);
    if sx > 0.0 {
        model = model.with_process_noise(DMatrix::identity(3, 3) * sx);
    }
    let centre = truth.as_ref().map_or_else(|| c.prior.mean.clone(), |t| t[steps].iter().copied().collect());
    let half = 6.0 * c.prior.sd.iter().copied().fold(0.0, f64::max);
    Ok(Problem {
        z0: gaussian_state(&c.prior.mean, &c.prior.sd)?,
        model,
        mm: MeasurementModel::new(h, c.measurement.eps)?,
        observations,
        truth,
        truth_shape: None,
        time_per_step: p.days_per_update,
        default_range: centre.iter().map(|&m| [m - half, m + half]).collect(),
        derived: BTreeMap::new(),
    })
}

fn build_diffusion(c: &Config, base: &Path) -> Result<Problem, CliError> {
    let d = c.diffusion1d.as_ref().expect("validated");
    let seeds = c.seeds.as_ref().expect("resolved");
    let steps = c.steps();
    let setup = Diffusion1DSetup::standard(d.n_el.unwrap_or(32), d.q_true.clone(), d.n_obs.unwrap_or(3));
    setup.validate()?;
    let r = setup.meas_dim();
    let p = setup.n_params;
    let hdeg = c.measurement.h_degree.unwrap_or(2);
    let s2 = setup.clone();
    let h = VectorMap::nonlinear(r, Some(hdeg), move |q: &[f64]| diffusion1d_observe(q, &s2));
    let q_true = DVector::from_column_slice(&d.q_true);
    let truth = vec![q_true; steps + 1];
    let observations = match &c.measurement.observations {
        Some(f) => read_observations(&Config::resolve_path(base, f), steps, r)?,
        None => synthesize(&truth, &h, c.measurement.eps, seeds.observations),
    };
    let mut derived = BTreeMap::new();
    derived.insert("meas_dim".into(), Value::from(r));
    derived.insert("observation_nodes".into(), Value::from(setup.obs.clone()));
    Ok(Problem {
        z0: gaussian_state(&c.prior.mean, &c.prior.sd)?,
        model: StateModel::new(VectorMap::identity(p)),
        mm: MeasurementModel::new(h, c.measurement.eps)?,
        observations,
        truth: Some(truth),
        truth_shape: None,
        time_per_step: 1.0,
        default_range: (0..p)
            .map(|i| [c.prior.mean[i] - 5.0 * c.prior.sd[i], c.prior.mean[i] + 5.0 * c.prior.sd[i]])
            .collect(),
        derived,
    })
}

/// Reads a dictionary file: one monomial per line given by its exponents in
/// each measurement component.
pub fn load_dictionary(path: &Path, meas_dim: usize) -> Result<BasisDictionary<f64>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let bad = |line: usize, msg: String| CliError::Validation(format!("{}:{line}: {msg}", path.display()));
    let mut dict = BasisDictionary::new(meas_dim);
    let mut max_deg = 0u32;
    let mut rows: Vec<Vec<u32>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let e = t
            .split_whitespace()
            .map(|s| s.parse::<u32>().map_err(|err| bad(i + 1, format!("`{s}`: {err}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if e.len() != meas_dim {
            return Err(bad(i + 1, format!("expected {meas_dim} exponents, got {}", e.len())));
        }
        if rows.contains(&e) {
            return Err(bad(i + 1, "duplicate monomial".into()));
        }
        max_deg = max_deg.max(e.iter().sum());
        let name = if e.iter().all(|&k| k == 0) {
            "1".to_string()
        } else {
            e.iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(j, &k)| if k == 1 { format!("y{j}") } else { format!("y{j}^{k}") })
                .collect::<Vec<_>>()
                .join("*")
        };
        let ex = e.clone();
        dict = dict.push(name, move |y: &[f64]| ex.iter().zip(y).map(|(&k, v)| v.powi(k as i32)).product());
        rows.push(e);
    }
    if rows.is_empty() {
        return Err(bad(0, "empty dictionary".into()));
    }
    if max_deg as usize > crate::config::MAX_DEGREE {
        return Err(bad(0, format!("degree {max_deg} exceeds {}", crate::config::MAX_DEGREE)));
    }
    let linear = (0..meas_dim).all(|j| rows.iter().any(|e| e.iter().enumerate().all(|(i, &k)| k == u32::from(i == j))))
        && rows.iter().any(|e| e.iter().all(|&k| k == 0));
    Ok(dict.with_degree(max_deg).with_spans_linear(linear))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Kernel density settings shared by the prior and posterior columns.
struct DensityGrid<'a> {
    components: &'a [usize],
    grids: &'a [Vec<f64>],
    samples: usize,
    seed: u64,
    bandwidth: Bandwidth,
}

impl DensityGrid<'_> {
    fn pdfs(&self, z: &PceVector<f64>, label: &str, warnings: &mut Vec<String>) -> Result<Vec<Vec<f64>>, CliError> {
        let samples = z.sample_paths(self.samples, self.seed);
        self.components
            .iter()
            .zip(self.grids)
            .map(|(&c, g)| {
                let col: Vec<f64> = samples.iter().map(|s| s[c]).collect();
                let (p, w) = kde_pdf(&col, g, self.bandwidth)?;
                if let Some(w) = w {
                    warnings.push(format!("{label} pdf component {c}: {w}"));
                }
                Ok(p)
            })
            .collect()
    }
}

/// Runs a validated configuration in memory. `base` resolves relative file
/// references in the config.
pub fn run_experiment(config: &Config, base: &Path) -> Result<RunResult, CliError> {
    let mut cfg = config.resolve();
    let problem = match cfg.kind {
        Kind::ScalarIdentify => build_scalar(&cfg, base)?,
        Kind::Lorenz84Track => build_lorenz(&cfg, base)?,
        Kind::Diffusion1dIdentify => build_diffusion(&cfg, base)?,
    };
    let rule = match cfg.basis.unwrap_or(BasisKind::Monomial) {
        BasisKind::Monomial => UpdateRule::Degree(cfg.m()),
        BasisKind::Dictionary => {
            let path = Config::resolve_path(base, cfg.dictionary.as_ref().expect("validated"));
            let dict = load_dictionary(&path, problem.mm.meas_dim())?;
            cfg.m = dict.degree().map(|d| d as usize);
            UpdateRule::Dictionary(dict, None)
        }
    };
    let f = &cfg.filter;
    let seeds = cfg.seeds.clone().expect("resolved");
    let opts = FilterOptions {
        model_level: f.model_level.and_then(|l| l.value()),
        measurement_level: f.measurement_level.and_then(|l| l.value()),
        state_degree: f.state_degree,
        composition_degree: f.composition_degree.expect("resolved"),
        recompress: f.recompress.expect("resolved"),
        quantile_samples: f.quantile_samples.expect("resolved"),
        seed: seeds.quantiles,
        time_per_step: problem.time_per_step,
    };

    let mut warnings = Vec::new();
    let mut ts = TrackingState::new(problem.z0.clone());
    let mut last_forecast = problem.z0.clone();
    let mut last_map = None;
    for y in &problem.observations {
        let out = assimilate_with(&ts, &problem.model, &problem.mm, y, &rule, &opts)?;
        warnings.extend(out.warnings.iter().map(|w| format!("step {}: {w}", out.state.step)));
        ts = out.state;
        last_forecast = out.forecast;
        last_map = Some(out.map);
    }

    let errors = problem.truth.as_ref().map(|truth| {
        let n = problem.z0.value_dim() as f64;
        let c0 = bayes_pce::moments::covariance(&problem.z0, &problem.z0).map(|c| c.trace()).unwrap_or(f64::NAN);
        std::iter::once((0, 0.0, mean(&problem.z0), c0))
            .chain(ts.history.iter().map(|r| (r.step, r.time, r.assim_mean.clone(), r.cov_trace)))
            .map(|(step, time, m, tr)| {
                let e2 = (m - &truth[step]).norm_squared();
                ErrorRow {
                    step,
                    time,
                    rmse: ((e2 + tr) / n).sqrt(),
                    mean_error: (e2 / n).sqrt(),
                }
            })
            .collect()
    });

    let comps = cfg.output.components.clone().expect("resolved");
    let ranges = match &cfg.output.pdf_range {
        Some(r) => r.clone(),
        None => comps.iter().map(|&i| problem.default_range[i]).collect(),
    };
    cfg.output.pdf_range = Some(ranges.clone());
    let points = cfg.output.pdf_points.expect("resolved");
    let grids: Vec<Vec<f64>> = ranges.iter().map(|[lo, hi]| linspace(*lo, *hi, points)).collect();
    let bw = match cfg.output.bandwidth.expect("resolved") {
        AutoOr::Value(b) => Bandwidth::Fixed(b),
        AutoOr::Keyword(_) => Bandwidth::Silverman,
    };
    let nsamp = cfg.output.pdf_samples.expect("resolved");
    // identification compares against the initial prior, tracking against
    // the forecast of the last cycle
    let (prior_ref, prior_label) = match cfg.kind {
        Kind::Lorenz84Track => (&last_forecast, "last forecast"),
        _ => (&problem.z0, "initial prior"),
    };
    let density = DensityGrid {
        components: &comps,
        grids: &grids,
        samples: nsamp,
        seed: seeds.pdf,
        bandwidth: bw,
    };
    let prior = density.pdfs(prior_ref, "prior", &mut warnings)?;
    let posterior = density.pdfs(&ts.z, "posterior", &mut warnings)?;
    let truth_pdf = problem
        .truth_shape
        .as_ref()
        .map(|s| grids.iter().map(|g| g.iter().map(|&x| s.pdf(x)).collect()).collect());

    let mut derived = problem.derived;
    derived.insert("pdf_prior".into(), Value::from(prior_label));
    derived.insert("final_germ_dim".into(), Value::from(ts.z.germ_dim()));
    Ok(RunResult {
        config: cfg,
        history: ts.history,
        initial: problem.z0,
        posterior: ts.z,
        last_map,
        pdf: PdfTable {
            components: comps,
            grids,
            prior,
            posterior,
            truth: truth_pdf,
        },
        errors,
        observations: problem.observations,
        warnings,
        derived,
    })
}
