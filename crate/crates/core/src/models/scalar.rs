//! Scalar identification: a non-Gaussian "truth" expanded to degree 12 and a
//! broad Gaussian prior.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::pce::PceVector;
use crate::hermite::{factorial, hermite_table};

pub const TRUTH_DEGREE: u32 = 12;
const TRUTH_STEP: f64 = 0.01;
const TRUTH_HALF_WIDTH: f64 = 12.0;

/// Mixture of normals `(weight, mean, sd)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthShape {
    pub components: Vec<(f64, f64, f64)>,
}

impl TruthShape {
    /// `gaussian`: `N(mean, sd²)`; `bimodal`: weights 0.4/0.6 at
    /// `mean - 1.2 sd` and `mean + 0.8 sd`, each with spread `0.6 sd`.
    pub fn named(name: &str, mean: f64, sd: f64) -> Result<Self> {
        if sd.is_nan() || sd <= 0.0 {
            return Err(Error::InvalidArgument(format!("truth sd must be positive, got {sd}")));
        }
        let components = match name {
            "gaussian" => vec![(1.0, mean, sd)],
            "bimodal" => vec![(0.4, mean - 1.2 * sd, 0.6 * sd), (0.6, mean + 0.8 * sd, 0.6 * sd)],
            other => return Err(Error::InvalidArgument(format!("unknown truth shape `{other}`"))),
        };
        Ok(Self { components })
    }

    fn normals(&self) -> Vec<(f64, Normal)> {
        self.components
            .iter()
            .map(|&(w, m, s)| (w, Normal::new(m, s).expect("positive sd")))
            .collect()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        use statrs::distribution::Continuous;
        self.normals().iter().map(|(w, n)| w * n.pdf(x)).sum()
    }

    /// Solves `F(x) = p` for `p ≤ 1/2` or `1 - F(x) = 1 - p` otherwise,
    /// given as `(p, upper_tail)`, by bisection.
    fn quantile(&self, tail: f64, upper: bool) -> f64 {
        let normals = self.normals();
        let total: f64 = normals.iter().map(|(w, _)| w).sum();
        let mass = |x: f64| -> f64 {
            let s: f64 = normals
                .iter()
                .map(|(w, n)| w * if upper { n.sf(x) } else { n.cdf(x) })
                .sum();
            s / total
        };
        let lo0 = self.components.iter().map(|c| c.1 - 60.0 * c.2).fold(f64::INFINITY, f64::min);
        let hi0 = self.components.iter().map(|c| c.1 + 60.0 * c.2).fold(f64::NEG_INFINITY, f64::max);
        let (mut lo, mut hi) = (lo0, hi0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            // lower-tail mass increases with x, upper-tail mass decreases
            let below = if upper { mass(mid) > tail } else { mass(mid) < tail };
            if below {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `x = F⁻¹(Φ(θ))`, the monotone transport from the germ.
    pub fn transport(&self, theta: f64) -> f64 {
        let std = Normal::new(0.0, 1.0).expect("standard normal");
        if theta <= 0.0 {
            self.quantile(std.cdf(theta), false)
        } else {
            self.quantile(std.sf(theta), true)
        }
    }

    /// Degree-12 expansion on germ dimension 0 of a `germ_dim` germ.
    pub fn pce(&self, germ_dim: usize) -> Result<PceVector<f64>> {
        if let [(_, m, s)] = self.components[..] {
            let terms = [
                (crate::index::MultiIndex::zero(), vec![m]),
                (crate::index::MultiIndex::unit(0, 1), vec![s]),
            ];
            return PceVector::from_terms(germ_dim, 1, &terms);
        }
        // The transport is steep between the modes, where Gauss-Hermite
        // converges slowly; a fine trapezoid rule on the Gaussian-weighted
        // integrand converges geometrically instead.
        let set = IndexSet::total_degree_on(&[0], TRUTH_DEGREE, germ_dim).into_arc();
        let p = TRUTH_DEGREE as usize;
        let mut acc = vec![0.0; p + 1];
        let mut h = vec![0.0; p + 1];
        let n = (2.0 * TRUTH_HALF_WIDTH / TRUTH_STEP).round() as usize;
        for i in 0..=n {
            let t = -TRUTH_HALF_WIDTH + i as f64 * TRUTH_STEP;
            let w = TRUTH_STEP * (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let x = self.transport(t);
            hermite_table(t, &mut h);
            for (a, hk) in acc.iter_mut().zip(&h) {
                *a += w * x * hk;
            }
        }
        // members of a univariate total-degree set are ordered by degree
        let coeffs = nalgebra::DMatrix::from_fn(p + 1, 1, |k, _| acc[k] / factorial(k as u32).unwrap_or(f64::INFINITY));
        PceVector::new(set, coeffs)
    }
}

/// Degree-1 Gaussian `μ + σ θ_0`.
pub fn gaussian_prior(mean: f64, sd: f64, germ_dim: usize) -> Result<PceVector<f64>> {
    PceVector::gaussian(
        &DVector::from_element(1, mean),
        &nalgebra::DMatrix::from_element(1, 1, sd),
        &[0],
        germ_dim,
    )
}

/// Truth expansion and prior, both on a one-dimensional germ.
pub fn scalar_truth_prior(
    shape: &str,
    truth_mean: f64,
    truth_sd: f64,
    prior_mean: f64,
    prior_sd: f64,
) -> Result<(PceVector<f64>, PceVector<f64>)> {
    let truth = TruthShape::named(shape, truth_mean, truth_sd)?.pce(1)?;
    Ok((truth, gaussian_prior(prior_mean, prior_sd, 1)?))
}

/// Batch-mean observations of one hidden truth value: `ŷ_k` is the mean of
/// `n` noisy readings `x* + ε v`, drawn from a seeded stream.
pub fn batch_observations(truth_value: f64, eps: f64, n: usize, steps: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps)
        .map(|_| {
            let s: f64 = (0..n).map(|_| -> f64 { StandardNormal.sample(&mut rng) }).sum::<f64>();
            truth_value + eps * s / n as f64
        })
        .collect()
}
