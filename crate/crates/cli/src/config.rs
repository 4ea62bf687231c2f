//! Experiment configuration (TOML). Unknown keys are rejected everywhere.
//!
//! A parsed [`Config`] has optional fields; [`Config::resolve`] fills every
//! default so that the serialized form written to `manifest.json` lists all
//! parameters explicitly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::CliError;

pub const MAX_DEGREE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    ScalarIdentify,
    Lorenz84Track,
    Diffusion1dIdentify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HKind {
    Linear,
    Cubic,
    /// The model's own observation operator (diffusion1d).
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Monomial,
    Dictionary,
}

/// A number or the keyword `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr<T> {
    Value(T),
    Keyword(Auto),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Auto {
    Auto,
    Silverman,
}

impl<T: Copy> AutoOr<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            AutoOr::Value(v) => Some(*v),
            AutoOr::Keyword(_) => None,
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum V {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match V::deserialize(d)? {
        V::One(x) => vec![x],
        V::Many(v) => v,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub kind: Kind,
    pub seed: u64,
    /// Update degree.
    pub m: Option<usize>,
    pub steps: Option<usize>,
    pub basis: Option<BasisKind>,
    /// Monomial exponent rows, one dictionary function per line.
    pub dictionary: Option<PathBuf>,
    pub prior: PriorSpec,
    pub measurement: MeasurementSpec,
    #[serde(default)]
    pub filter: FilterSpec,
    pub output: OutputSpec,
    pub scalar: Option<ScalarSpec>,
    pub lorenz84: Option<LorenzSpec>,
    pub diffusion1d: Option<DiffusionSpec>,
    /// Derived seeds, filled by `resolve`.
    pub seeds: Option<Seeds>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    #[serde(deserialize_with = "one_or_many")]
    pub mean: Vec<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub sd: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    pub h: Option<HKind>,
    pub eps: f64,
    /// Observed state components (lorenz84).
    pub observed: Option<Vec<usize>>,
    /// CSV file of observations (one row per step); synthesized if absent.
    pub observations: Option<PathBuf>,
    /// Output degree when projecting a non-polynomial `h`.
    pub h_degree: Option<u32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub state_degree: Option<u32>,
    pub model_level: Option<AutoOr<usize>>,
    pub measurement_level: Option<AutoOr<usize>>,
    pub composition_degree: Option<u32>,
    pub recompress: Option<bool>,
    pub quantile_samples: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub components: Option<Vec<usize>>,
    pub pdf_points: Option<usize>,
    pub pdf_samples: Option<usize>,
    pub pdf_range: Option<Vec<[f64; 2]>>,
    pub bandwidth: Option<AutoOr<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarSpec {
    pub truth_shape: Option<String>,
    pub truth_mean: f64,
    pub truth_sd: f64,
    /// Readings averaged per observation.
    pub batch: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorenzSpec {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub f: Option<f64>,
    pub g: Option<f64>,
    pub dt_inner: Option<f64>,
    pub days_per_update: Option<f64>,
    pub truth_initial: Option<Vec<f64>>,
    /// Standard deviation of additive process noise per component.
    pub process_noise: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSpec {
    pub n_el: Option<usize>,
    pub q_true: Vec<f64>,
    pub n_obs: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub truth: u64,
    pub observations: u64,
    pub quantiles: u64,
    pub pdf: u64,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {msg}"))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn m(&self) -> usize {
        self.m.unwrap_or(1)
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or(10)
    }

    pub fn h(&self) -> HKind {
        self.measurement.h.unwrap_or(match self.kind {
            Kind::Diffusion1dIdentify => HKind::Model,
            _ => HKind::Linear,
        })
    }

    /// Dimension of the state vector.
    pub fn state_dim(&self) -> usize {
        match self.kind {
            Kind::ScalarIdentify => 1,
            Kind::Lorenz84Track => 3,
            Kind::Diffusion1dIdentify => self.diffusion1d.as_ref().map_or(0, |d| d.q_true.len()),
        }
    }

    /// Relative paths in the config are taken relative to `base`.
    pub fn resolve_path(base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    /// Semantic checks that parsing cannot express. `base` is the config
    /// file's directory.
    pub fn validate(&self, base: &Path) -> Result<(), CliError> {
        let m = self.m();
        if m > MAX_DEGREE {
            return Err(invalid("m", format!("{m} is outside the supported range 0..={MAX_DEGREE}")));
        }
        if self.steps() == 0 {
            return Err(invalid("steps", "must be at least 1"));
        }
        let n = self.state_dim();
        let section_ok = match self.kind {
            Kind::ScalarIdentify => self.scalar.is_some() && self.lorenz84.is_none() && self.diffusion1d.is_none(),
            Kind::Lorenz84Track => self.lorenz84.is_some() && self.scalar.is_none() && self.diffusion1d.is_none(),
            Kind::Diffusion1dIdentify => {
                self.diffusion1d.is_some() && self.scalar.is_none() && self.lorenz84.is_none()
            }
        };
        if !section_ok {
            let want = match self.kind {
                Kind::ScalarIdentify => "[scalar]",
                Kind::Lorenz84Track => "[lorenz84]",
                Kind::Diffusion1dIdentify => "[diffusion1d]",
            };
            return Err(invalid("kind", format!("needs exactly the {want} model section")));
        }
        if n == 0 {
            return Err(invalid("diffusion1d.q_true", "must not be empty"));
        }
        for (name, v) in [("prior.mean", &self.prior.mean), ("prior.sd", &self.prior.sd)] {
            if v.len() != 1 && v.len() != n {
                return Err(invalid(name, format!("needs 1 or {n} values, got {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid(name, "values must be finite"));
            }
        }
        if self.prior.sd.iter().any(|&s| s <= 0.0) {
            return Err(invalid("prior.sd", "must be positive"));
        }
        if !(self.measurement.eps > 0.0) || !self.measurement.eps.is_finite() {
            return Err(invalid("measurement.eps", "must be positive"));
        }
        let h = self.h();
        match (self.kind, h) {
            (Kind::Diffusion1dIdentify, HKind::Model) => {}
            (Kind::Diffusion1dIdentify, _) => return Err(invalid("measurement.h", "diffusion1d supports only \"model\"")),
            (_, HKind::Model) => return Err(invalid("measurement.h", "\"model\" is only defined for diffusion1d")),
            _ => {}
        }
        if let Some(obs) = &self.measurement.observed {
            if self.kind != Kind::Lorenz84Track {
                return Err(invalid("measurement.observed", "only used by lorenz84-track"));
            }
            if obs.is_empty() || obs.iter().any(|&i| i >= n) {
                return Err(invalid("measurement.observed", format!("components must be in 0..{n}")));
            }
            let mut s = obs.clone();
            s.sort_unstable();
            s.dedup();
            if s.len() != obs.len() {
                return Err(invalid("measurement.observed", "duplicate component"));
            }
        }
        if self.measurement.h_degree.is_some() && self.kind != Kind::Diffusion1dIdentify {
            return Err(invalid("measurement.h_degree", "only used for the diffusion1d model operator"));
        }
        if let Some(p) = &self.measurement.observations {
            let full = Self::resolve_path(base, p);
            if !full.is_file() {
                return Err(invalid("measurement.observations", format!("{} does not exist", full.display())));
            }
        }
        match (self.basis.unwrap_or(BasisKind::Monomial), &self.dictionary) {
            (BasisKind::Dictionary, None) => return Err(invalid("dictionary", "required when basis = \"dictionary\"")),
            (BasisKind::Monomial, Some(_)) => return Err(invalid("dictionary", "only used with basis = \"dictionary\"")),
            (BasisKind::Dictionary, Some(p)) => {
                if self.m.is_some() {
                    return Err(invalid("m", "implied by the dictionary; leave it unset"));
                }
                let full = Self::resolve_path(base, p);
                if !full.is_file() {
                    return Err(invalid("dictionary", format!("{} does not exist", full.display())));
                }
            }
            _ => {}
        }
        if let Some(c) = &self.output.components {
            if c.is_empty() || c.iter().any(|&i| i >= n) {
                return Err(invalid("output.components", format!("components must be in 0..{n}")));
            }
        }
        if let Some(r) = &self.output.pdf_range {
            let k = self.output.components.as_ref().map_or(n, Vec::len);
            if r.len() != k {
                return Err(invalid("output.pdf_range", format!("needs one [lo, hi] per component ({k})")));
            }
            if r.iter().any(|[lo, hi]| !(lo < hi)) {
                return Err(invalid("output.pdf_range", "each range needs lo < hi"));
            }
        }
        if self.output.pdf_points.is_some_and(|p| p < 2) {
            return Err(invalid("output.pdf_points", "must be at least 2"));
        }
        if self.output.pdf_samples.is_some_and(|p| p < 100) {
            return Err(invalid("output.pdf_samples", "must be at least 100"));
        }
        if let Some(AutoOr::Value(b)) = self.output.bandwidth {
            if !(b > 0.0) {
                return Err(invalid("output.bandwidth", "must be positive or \"silverman\""));
            }
        }
        if let Some(AutoOr::Keyword(Auto::Silverman)) = self.filter.model_level {
            return Err(invalid("filter.model_level", "expected a number or \"auto\""));
        }
        if let Some(AutoOr::Keyword(Auto::Silverman)) = self.filter.measurement_level {
            return Err(invalid("filter.measurement_level", "expected a number or \"auto\""));
        }
        if let Some(AutoOr::Keyword(Auto::Auto)) = self.output.bandwidth {
            return Err(invalid("output.bandwidth", "expected a number or \"silverman\""));
        }
        for (name, l) in [("filter.model_level", self.filter.model_level), ("filter.measurement_level", self.filter.measurement_level)] {
            if let Some(AutoOr::Value(v)) = l {
                if v == 0 || v > 40 {
                    return Err(invalid(name, "must be in 1..=40"));
                }
            }
        }
        if self.filter.state_degree == Some(0) {
            return Err(invalid("filter.state_degree", "must be at least 1"));
        }
        match self.kind {
            Kind::ScalarIdentify => {
                let s = self.scalar.as_ref().expect("checked above");
                let shape = s.truth_shape.as_deref().unwrap_or("gaussian");
                if shape != "gaussian" && shape != "bimodal" {
                    return Err(invalid("scalar.truth_shape", format!("unknown shape `{shape}` (gaussian | bimodal)")));
                }
                if !(s.truth_sd > 0.0) {
                    return Err(invalid("scalar.truth_sd", "must be positive"));
                }
                if s.batch == Some(0) {
                    return Err(invalid("scalar.batch", "must be at least 1"));
                }
            }
            Kind::Lorenz84Track => {
                let l = self.lorenz84.as_ref().expect("checked above");
                if l.truth_initial.is_none() && self.measurement.observations.is_none() {
                    return Err(invalid("lorenz84.truth_initial", "required unless observations are read from a file"));
                }
                if l.truth_initial.as_ref().is_some_and(|t| t.len() != 3) {
                    return Err(invalid("lorenz84.truth_initial", "needs 3 values"));
                }
                if l.dt_inner.is_some_and(|d| !(d > 0.0)) || l.days_per_update.is_some_and(|d| !(d > 0.0)) {
                    return Err(invalid("lorenz84", "time steps must be positive"));
                }
                if l.process_noise.is_some_and(|s| s < 0.0) {
                    return Err(invalid("lorenz84.process_noise", "must be nonnegative"));
                }
            }
            Kind::Diffusion1dIdentify => {
                let d = self.diffusion1d.as_ref().expect("checked above");
                let n_el = d.n_el.unwrap_or(32);
                let n_obs = d.n_obs.unwrap_or(3);
                if n_el < 2 || d.q_true.len() > n_el {
                    return Err(invalid("diffusion1d.n_el", "needs at least 2 elements and one per parameter"));
                }
                if n_obs == 0 || n_obs >= n_el {
                    return Err(invalid("diffusion1d.n_obs", format!("must be in 1..{n_el}")));
                }
                if d.q_true.len() > bayes_pce::quadrature::MAX_TENSOR_DIMS {
                    return Err(invalid(
                        "diffusion1d.q_true",
                        format!("at most {} parameters (tensor quadrature limit)", bayes_pce::quadrature::MAX_TENSOR_DIMS),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Fills every default. Call after [`Config::validate`].
    pub fn resolve(&self) -> Config {
        let mut c = self.clone();
        let n = c.state_dim();
        c.m = Some(c.m());
        c.steps = Some(c.steps());
        c.basis = Some(c.basis.unwrap_or(BasisKind::Monomial));
        c.measurement.h = Some(c.h());
        if c.prior.mean.len() == 1 {
            c.prior.mean = vec![c.prior.mean[0]; n];
        }
        if c.prior.sd.len() == 1 {
            c.prior.sd = vec![c.prior.sd[0]; n];
        }
        let nonlinear_h = c.h() != HKind::Linear;
        let f = &mut c.filter;
        match c.kind {
            Kind::ScalarIdentify => {
                let s = c.scalar.as_mut().expect("validated");
                s.truth_shape.get_or_insert_with(|| "gaussian".into());
                s.batch.get_or_insert(1);
                f.state_degree.get_or_insert(1);
                f.model_level.get_or_insert(AutoOr::Keyword(Auto::Auto));
                f.measurement_level.get_or_insert(AutoOr::Keyword(Auto::Auto));
                // exact germ growth is only affordable for affine updates
                f.recompress.get_or_insert(nonlinear_h);
            }
            Kind::Lorenz84Track => {
                let l = c.lorenz84.as_mut().expect("validated");
                let d = bayes_pce::models::lorenz::Lorenz84Params::default();
                l.a.get_or_insert(d.a);
                l.b.get_or_insert(d.b);
                l.f.get_or_insert(d.f);
                l.g.get_or_insert(d.g);
                l.dt_inner.get_or_insert(d.dt_inner);
                l.days_per_update.get_or_insert(d.days_per_update);
                l.process_noise.get_or_insert(0.0);
                c.measurement.observed.get_or_insert_with(|| (0..3).collect());
                let p = *f.state_degree.get_or_insert(2);
                f.model_level.get_or_insert(AutoOr::Value(p as usize + 3));
                f.measurement_level.get_or_insert(AutoOr::Keyword(Auto::Auto));
                f.recompress.get_or_insert(true);
            }
            Kind::Diffusion1dIdentify => {
                let d = c.diffusion1d.as_mut().expect("validated");
                d.n_el.get_or_insert(32);
                d.n_obs.get_or_insert(3);
                c.measurement.h_degree.get_or_insert(2);
                f.state_degree.get_or_insert(1);
                f.model_level.get_or_insert(AutoOr::Keyword(Auto::Auto));
                f.measurement_level.get_or_insert(AutoOr::Value(5));
                f.recompress.get_or_insert(true);
            }
        }
        f.composition_degree.get_or_insert(bayes_pce::update::MAX_COMPOSITION_DEGREE);
        f.quantile_samples.get_or_insert(2000);
        let o = &mut c.output;
        o.components.get_or_insert_with(|| (0..n).collect());
        o.pdf_points.get_or_insert(401);
        o.pdf_samples.get_or_insert(20_000);
        o.bandwidth.get_or_insert(AutoOr::Keyword(Auto::Silverman));
        let s = c.seed;
        c.seeds.get_or_insert(Seeds {
            truth: s,
            observations: s.wrapping_add(1),
            quantiles: s.wrapping_add(2),
            pdf: s.wrapping_add(3),
        });
        c
    }
}
