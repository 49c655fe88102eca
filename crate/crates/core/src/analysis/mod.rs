//! Estimators over count data: tomography, CHSH, fringe and decay fits, and
//! Poisson Monte Carlo error bars.

pub mod chsh;
pub mod fit;
pub mod optimize;
pub mod tomography;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::source::window_rng;

pub use chsh::{chsh_E, chsh_S, expected_chsh_counts, ChshAngles, ChshCounts};
pub use fit::{
    expected_fringe, fit_exponential, fringe_grid, parse_efficiency_samples, visibility_fit, ExponentialFit, VisibilityFit,
    VisibilityScan,
};
pub use tomography::{
    expected_counts, expected_counts_for, tomo_linear, tomo_mle, CountTable16, TomographyMethod, TomographyResult,
};

const MONTE_CARLO_STREAM: u64 = 3;

/// One Poisson draw with the given mean (zero for non-positive means).
pub fn poisson_sample<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean > 0.0 {
        Poisson::new(mean).expect("finite positive mean").sample(rng)
    } else {
        0.0
    }
}

/// Sample standard deviation of `estimator` over `n_resamples` draws. Draw `i`
/// receives its own generator, so the result does not depend on scheduling.
pub fn montecarlo_std<F>(n_resamples: usize, seed: u64, estimator: F) -> Result<f64>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<f64> + Sync,
{
    if n_resamples < 2 {
        return Err(Error::invalid("need at least two resamples"));
    }
    let values: Vec<f64> = (0..n_resamples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = window_rng(seed, MONTE_CARLO_STREAM, i);
            estimator(&mut rng)
        })
        .collect::<Result<_>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt())
}

/// Which scalar the Monte Carlo resampling re-estimates.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum McEstimator {
    /// Fidelity to `|LL⟩ + |RR⟩` of the reconstruction.
    Fidelity(TomographyMethod),
    S,
    Visibility,
}

pub fn fidelity_std(table: &CountTable16, method: TomographyMethod, n_resamples: usize, seed: u64) -> Result<f64> {
    montecarlo_std(n_resamples, seed, |rng| {
        let t = table.poisson_resample(rng);
        let r = match method {
            TomographyMethod::Linear => tomo_linear(&t)?,
            TomographyMethod::Mle => tomo_mle(&t, None)?,
        };
        Ok(r.fidelity_to_ideal)
    })
}

pub fn s_std(counts: &ChshCounts, n_resamples: usize, seed: u64) -> Result<f64> {
    montecarlo_std(n_resamples, seed, |rng| counts.poisson_resample(rng).S())
}

pub fn visibility_std(samples: &[(f64, f64)], n_resamples: usize, seed: u64) -> Result<f64> {
    montecarlo_std(n_resamples, seed, |rng| {
        let resampled: Vec<(f64, f64)> = samples.iter().map(|&(t, y)| (t, poisson_sample(y, rng))).collect();
        Ok(visibility_fit(&resampled)?.visibility)
    })
}
