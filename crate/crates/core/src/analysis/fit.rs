//! Two-photon interference fringe fits and memory-efficiency decay fits.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;
use crate::memory::EfficiencyFit;
use crate::oam_optics::{sector_setting, ArmPaths};

/// `offset·[1 + V·cos 2(θ_B − phase)]`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct VisibilityFit {
    pub visibility: f64,
    pub phase: f64,
    pub offset: f64,
    pub visibility_std: f64,
}

/// Linear least squares in `(o, o·V·cos 2φ, o·V·sin 2φ)`; `V` is clipped to `[0, 1]`.
pub fn visibility_fit(samples: &[(f64, f64)]) -> Result<VisibilityFit> {
    let mut distinct: Vec<f64> = samples.iter().map(|(t, _)| t.rem_euclid(std::f64::consts::PI)).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if distinct.len() < 4 {
        return Err(Error::estimator("visibility fit needs at least 4 distinct θ_B (mod π)"));
    }
    let n = samples.len();
    let x = DMatrix::from_fn(n, 3, |i, j| {
        let t = 2.0 * samples[i].0;
        match j {
            0 => 1.0,
            1 => t.cos(),
            _ => t.sin(),
        }
    });
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.1));
    let xtx = x.transpose() * &x;
    let inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::estimator("degenerate θ_B sampling"))?;
    let beta = &inv * x.transpose() * &y;
    let (o, cc, ss) = (beta[0], beta[1], beta[2]);
    if !(o > 0.0) {
        return Err(Error::estimator("fitted offset is not positive"));
    }
    let amp = cc.hypot(ss);
    let visibility = (amp / o).clamp(0.0, 1.0);
    let phase = 0.5 * ss.atan2(cc);

    let resid = &y - &x * &beta;
    let dof = n.saturating_sub(3);
    let sigma2 = if dof > 0 { resid.norm_squared() / dof as f64 } else { 0.0 };
    let cov = inv * sigma2;
    let grad = if amp > 0.0 {
        DVector::from_vec(vec![-amp / (o * o), cc / (amp * o), ss / (amp * o)])
    } else {
        DVector::from_vec(vec![0.0, 1.0 / o, 1.0 / o])
    };
    let var = (grad.transpose() * cov * &grad)[(0, 0)].max(0.0);
    Ok(VisibilityFit {
        visibility,
        phase,
        offset: o,
        visibility_std: var.sqrt(),
    })
}

/// Born-rule coincidence rates at fixed `θ_A` over a grid of `θ_B`.
pub fn expected_fringe(
    rho: &DensityMatrix,
    theta_a: f64,
    thetas_b: &[f64],
    paths: &ArmPaths,
    scale: f64,
) -> Vec<(f64, f64)> {
    thetas_b
        .iter()
        .map(|&tb| {
            let s = sector_setting(theta_a, tb, paths);
            (tb, (scale * rho.expectation(&s.projector())).max(0.0))
        })
        .collect()
}

/// `n` evenly spaced `θ_B` over one fringe period `[0, π)`.
pub fn fringe_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * 2.0 * FRAC_PI_2 / n as f64).collect()
}

/// Coincidence rates over `θ_B` at one fixed `θ_A`.
#[derive(Clone, Debug, PartialEq)]
pub struct VisibilityScan {
    pub theta_a_rad: f64,
    pub samples: Vec<(f64, f64)>,
}

impl VisibilityScan {
    pub fn to_csv(&self) -> String {
        let mut out = format!("#theta_a_rad={:?}\ntheta_b_rad,count\n", self.theta_a_rad);
        for (t, c) in &self.samples {
            writeln!(out, "{t:?},{c:?}").unwrap();
        }
        out
    }

    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let mut theta_a = None;
        let mut samples = Vec::new();
        let mut saw_header = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                match h.split_once('=') {
                    Some(("theta_a_rad", v)) => {
                        theta_a = Some(v.trim().parse::<f64>().map_err(|e| Error::parse(origin, line_no, e.to_string()))?);
                    }
                    _ => return Err(Error::parse(origin, line_no, format!("unknown header `{line}`"))),
                }
                continue;
            }
            if !saw_header {
                if line != "theta_b_rad,count" {
                    return Err(Error::parse(origin, line_no, "expected header `theta_b_rad,count`"));
                }
                saw_header = true;
                continue;
            }
            let (t, c) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(origin, line_no, "row must be `theta_b_rad,count`"))?;
            let t: f64 = t.trim().parse().map_err(|e| Error::parse(origin, line_no, format!("bad angle: {e}")))?;
            let c: f64 = c.trim().parse().map_err(|e| Error::parse(origin, line_no, format!("bad count: {e}")))?;
            if !(c >= 0.0) || !c.is_finite() || !t.is_finite() {
                return Err(Error::parse(origin, line_no, "angle and count must be finite, count non-negative"));
            }
            samples.push((t, c));
        }
        let theta_a_rad = theta_a.ok_or_else(|| Error::parse(origin, 0, "missing header `#theta_a_rad=`"))?;
        Ok(VisibilityScan { theta_a_rad, samples })
    }

    pub fn subtract_background(&self, background: &VisibilityScan) -> Result<Self> {
        if background.samples.len() != self.samples.len() {
            return Err(Error::invalid("background scan has a different θ_B grid"));
        }
        let samples = self
            .samples
            .iter()
            .zip(&background.samples)
            .map(|(&(t, c), &(_, b))| (t, (c - b).max(0.0)))
            .collect();
        Ok(VisibilityScan {
            theta_a_rad: self.theta_a_rad,
            samples,
        })
    }
}

/// Reads `tau_ns,efficiency` rows.
pub fn parse_efficiency_samples(text: &str, origin: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut saw_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "tau_ns,efficiency" {
                return Err(Error::parse(origin, line_no, "expected header `tau_ns,efficiency`"));
            }
            saw_header = true;
            continue;
        }
        let (t, e) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(origin, line_no, "row must be `tau_ns,efficiency`"))?;
        let t: f64 = t.trim().parse().map_err(|e| Error::parse(origin, line_no, format!("bad tau: {e}")))?;
        let e: f64 = e.trim().parse().map_err(|e| Error::parse(origin, line_no, format!("bad efficiency: {e}")))?;
        out.push((t, e));
    }
    Ok(out)
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ExponentialFit {
    pub fit: EfficiencyFit,
    pub residual_norm: f64,
}

fn linear_part(samples: &[(f64, f64)], tau0: f64, decay: f64) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let e: Vec<f64> = samples.iter().map(|(t, _)| (-(t - tau0) / decay).exp()).collect();
    let (se, see) = (e.iter().sum::<f64>(), e.iter().map(|v| v * v).sum::<f64>());
    let sy: f64 = samples.iter().map(|s| s.1).sum();
    let sey: f64 = e.iter().zip(samples).map(|(v, s)| v * s.1).sum();
    let det = n * see - se * se;
    let (mut g0, mut a) = if det.abs() > 1e-300 {
        ((see * sy - se * sey) / det, (n * sey - se * sy) / det)
    } else {
        (sy / n, 0.0)
    };
    if a < 0.0 {
        a = 0.0;
        g0 = sy / n;
    }
    let rss = e.iter().zip(samples).map(|(v, s)| (g0 + a * v - s.1).powi(2)).sum();
    (g0, a, rss)
}

/// Least squares `g0 + A·exp(−(τ − τ0)/T)` with `τ0` fixed at the earliest sample.
///
/// `g0` and `A` are solved exactly for every `T`; `T` is found by a log-spaced
/// scan followed by golden-section refinement.
pub fn fit_exponential(samples: &[(f64, f64)]) -> Result<ExponentialFit> {
    if samples.len() < 4 {
        return Err(Error::estimator("exponential fit needs at least 4 samples"));
    }
    if samples.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let tau0 = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let tmax = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let span = tmax - tau0;
    if !(span > 0.0) {
        return Err(Error::estimator("samples must span distinct storage times"));
    }
    let (lo, hi) = ((span * 1e-3).ln(), (span * 1e3).ln());
    let rss_at = |log_t: f64| linear_part(samples, tau0, log_t.exp()).2;

    const GRID: usize = 400;
    let mut best = 0;
    let mut best_rss = f64::INFINITY;
    for k in 0..=GRID {
        let r = rss_at(lo + (hi - lo) * k as f64 / GRID as f64);
        if r < best_rss {
            best_rss = r;
            best = k;
        }
    }
    let step = (hi - lo) / GRID as f64;
    let (mut a, mut b) = (lo + step * best.saturating_sub(1) as f64, lo + step * (best + 1).min(GRID) as f64);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (rss_at(c), rss_at(d));
    let mut iterations = 0;
    while (b - a) > 1e-13 * (1.0 + a.abs()) {
        iterations += 1;
        if iterations > 500 {
            return Err(Error::NonConvergence {
                iterations,
                gradient_norm: (fc - fd).abs(),
            });
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = rss_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = rss_at(d);
        }
    }
    let log_t = 0.5 * (a + b);
    let decay = log_t.exp();
    let (g0, amp, rss) = linear_part(samples, tau0, decay);
    Ok(ExponentialFit {
        fit: EfficiencyFit::new(g0, amp, tau0, decay)?,
        residual_norm: rss.sqrt(),
    })
}
