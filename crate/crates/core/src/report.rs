//! Estimator drivers shared by the `analyze` and `report` commands.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{
    fidelity_std, fit_exponential, s_std, tomo_linear, tomo_mle, visibility_fit, visibility_std, ChshCounts,
    CountTable16, ExponentialFit, TomographyMethod, TomographyResult, VisibilityFit, VisibilityScan,
};
use crate::config::{RunConfig, Stage};
use crate::counts::{
    alpha, cauchy_schwarz_R_estimate, g12_comb_normalized, histogram, CoincidenceHistogram, Estimate, HbtCounts,
    TimestampStream, CH_SIGNAL1, CH_SIGNAL1_SPLIT, CH_SIGNAL2, CH_SIGNAL2_SPLIT,
};
use crate::error::{Error, Result};
use crate::hilbert::fidelity;
use crate::memory::efficiency;
use crate::pipeline::{
    visibility_background_file, visibility_file, CHSH_BACKGROUND_FILE, CHSH_FILE, MANIFEST, TIMESTAMPS_FILE,
    TOMO_BACKGROUND_FILE, TOMO_FILE,
};

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct AnalysisOptions {
    pub subtract_background: bool,
    /// Poisson resamples for error bars; below 2 disables them.
    pub resamples: usize,
    pub seed: u64,
    pub method: TomographyMethod,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            subtract_background: true,
            resamples: 200,
            seed: 0,
            method: TomographyMethod::Mle,
        }
    }
}

pub fn analyze_tomo(
    table: &CountTable16,
    background: Option<&CountTable16>,
    opts: &AnalysisOptions,
) -> Result<TomographyResult> {
    let table = match background {
        Some(b) if opts.subtract_background => table.subtract_background(b),
        _ => table.clone(),
    };
    let mut result = match opts.method {
        TomographyMethod::Linear => tomo_linear(&table)?,
        TomographyMethod::Mle => tomo_mle(&table, None)?,
    };
    if opts.resamples >= 2 {
        result.fidelity_std = Some(fidelity_std(&table, opts.method, opts.resamples, opts.seed)?);
    }
    Ok(result)
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ChshReport {
    pub correlations: [f64; 4],
    pub s: f64,
    pub s_std: Option<f64>,
}

pub fn analyze_chsh(counts: &ChshCounts, background: Option<&ChshCounts>, opts: &AnalysisOptions) -> Result<ChshReport> {
    let counts = match background {
        Some(b) if opts.subtract_background => counts.subtract_background(b),
        _ => counts.clone(),
    };
    let correlations = counts.correlations()?;
    let s_std = if opts.resamples >= 2 {
        Some(s_std(&counts, opts.resamples, opts.seed)?)
    } else {
        None
    };
    Ok(ChshReport {
        correlations,
        s: crate::analysis::chsh_S(correlations),
        s_std,
    })
}

/// Fringe fit; with resampling enabled, `visibility_std` is the Monte Carlo spread.
pub fn analyze_visibility(
    scan: &VisibilityScan,
    background: Option<&VisibilityScan>,
    opts: &AnalysisOptions,
) -> Result<VisibilityFit> {
    let scan = match background {
        Some(b) if opts.subtract_background => scan.subtract_background(b)?,
        _ => scan.clone(),
    };
    let mut fit = visibility_fit(&scan.samples)?;
    if opts.resamples >= 2 {
        fit.visibility_std = visibility_std(&scan.samples, opts.resamples, opts.seed)?;
    }
    Ok(fit)
}

/// `α` with the signal-2 click as herald and the split signal-1 arm as HBT pair.
pub fn analyze_hbt(stream: &TimestampStream) -> Result<(HbtCounts, Estimate)> {
    for ch in [CH_SIGNAL2, CH_SIGNAL1, CH_SIGNAL1_SPLIT] {
        if !stream.has_channel(ch) {
            return Err(Error::estimator(format!("HBT analysis needs clicks on channel {ch}")));
        }
    }
    let c = HbtCounts::from_stream(stream, CH_SIGNAL2, CH_SIGNAL1, CH_SIGNAL1_SPLIT);
    Ok((c, alpha(&c)?))
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CorrelateOptions {
    pub span_ns: u64,
    pub peak_window_ns: u64,
    /// Delay of the correlated signal-1 → signal-2 peak.
    pub cross_delay_ns: i64,
}

impl CorrelateOptions {
    pub fn for_config(cfg: &RunConfig) -> Self {
        CorrelateOptions {
            cross_delay_ns: cfg.source.signal2_offset_ns as i64 - cfg.source.signal1_offset_ns as i64,
            ..Self::default()
        }
    }
}

impl Default for CorrelateOptions {
    fn default() -> Self {
        CorrelateOptions {
            span_ns: 1500,
            peak_window_ns: 200,
            cross_delay_ns: 380,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport {
    /// Signal 1 (trigger) against signal 2 (stop).
    pub cross: CoincidenceHistogram,
    pub g12: Estimate,
    pub g11: Option<Estimate>,
    pub g22: Option<Estimate>,
    pub r: Option<Estimate>,
}

/// Cross-correlation always; auto-correlations and `R` when both arms were split.
pub fn analyze_correlate(stream: &TimestampStream, opts: &CorrelateOptions) -> Result<CorrelationReport> {
    let cross = histogram(stream, CH_SIGNAL1, CH_SIGNAL2, opts.span_ns)?;
    let g12 = g12_comb_normalized(&cross, opts.peak_window_ns, Some(opts.cross_delay_ns))?;
    let auto = |a: u8, b: u8| -> Result<Option<Estimate>> {
        if !(stream.has_channel(a) && stream.has_channel(b)) {
            return Ok(None);
        }
        let h = histogram(stream, a, b, opts.span_ns)?;
        g12_comb_normalized(&h, opts.peak_window_ns, Some(0)).map(Some)
    };
    let g11 = auto(CH_SIGNAL1, CH_SIGNAL1_SPLIT)?;
    let g22 = auto(CH_SIGNAL2, CH_SIGNAL2_SPLIT)?;
    let r = match (g11, g22) {
        (Some(a), Some(b)) => Some(cauchy_schwarz_R_estimate(g12, a, b)?),
        _ => None,
    };
    Ok(CorrelationReport { cross, g12, g11, g22, r })
}

/// Fits samples; with `tau0_ns`, also reports the curve re-expressed about that origin.
pub fn analyze_fit_memory(samples: &[(f64, f64)], tau0_ns: Option<f64>) -> Result<(ExponentialFit, Option<ExponentialFit>)> {
    let fit = fit_exponential(samples)?;
    let rebased = tau0_ns.map(|t| ExponentialFit {
        fit: fit.fit.rebased(t),
        residual_norm: fit.residual_norm,
    });
    Ok((fit, rebased))
}

fn pm(value: f64, std: Option<f64>) -> String {
    match std {
        Some(s) => format!("{value:.4} ± {s:.4}"),
        None => format!("{value:.4}"),
    }
}

fn est(e: &Estimate) -> String {
    format!("{:.4} ± {:.4}", e.value, e.std_error)
}

pub fn format_tomo(r: &TomographyResult) -> String {
    let mut out = String::new();
    writeln!(out, "method: {}", r.method).unwrap();
    writeln!(out, "fidelity to (|LL> + |RR>)/sqrt2: {}", pm(r.fidelity_to_ideal, r.fidelity_std)).unwrap();
    if let Some(l) = r.log_likelihood {
        writeln!(out, "log-likelihood: {l:.6}").unwrap();
        writeln!(
            out,
            "optimizer: {} iterations, gradient norm {:.3e}, converged {}",
            r.iterations, r.gradient_norm, r.converged
        )
        .unwrap();
    }
    out
}

pub fn format_chsh(r: &ChshReport) -> String {
    let mut out = String::new();
    let names = ["E(a,b)", "E(a,b')", "E(a',b)", "E(a',b')"];
    for (n, e) in names.iter().zip(&r.correlations) {
        writeln!(out, "{n}: {e:.4}").unwrap();
    }
    writeln!(out, "S: {}", pm(r.s, r.s_std)).unwrap();
    out
}

pub fn format_visibility(theta_a_rad: f64, v: &VisibilityFit) -> String {
    format!(
        "theta_A {:.2} deg: V = {:.4} ± {:.4}, phase {:.2} deg, offset {:.2}\n",
        theta_a_rad.to_degrees(),
        v.visibility,
        v.visibility_std,
        v.phase.to_degrees(),
        v.offset
    )
}

pub fn format_hbt(c: &HbtCounts, a: &Estimate) -> String {
    format!(
        "P1 {}  P12 {}  P13 {}  P123 {}\nalpha: {}\n",
        c.p1,
        c.p12,
        c.p13,
        c.p123,
        est(a)
    )
}

pub fn format_correlate(r: &CorrelationReport) -> String {
    let mut out = format!("g12: {}\n", est(&r.g12));
    if let Some(g) = &r.g11 {
        writeln!(out, "g11 (signal 1): {}", est(g)).unwrap();
    }
    if let Some(g) = &r.g22 {
        writeln!(out, "g22 (signal 2): {}", est(g)).unwrap();
    }
    if let Some(g) = &r.r {
        writeln!(out, "R = g12^2/(g11 g22): {}", est(g)).unwrap();
    }
    out
}

pub fn format_fit(f: &ExponentialFit) -> String {
    format!(
        "g0 {:.5}  A {:.5}  tau0 {:.2} ns  T {:.2} ns  (residual norm {:.3e})\n",
        f.fit.g0, f.fit.a, f.fit.tau0_ns, f.fit.decay_ns, f.residual_norm
    )
}

/// Everything `report` computes for one stage directory.
#[derive(Clone, Debug, Default)]
pub struct StageReport {
    pub tomo: Option<TomographyResult>,
    pub chsh: Option<ChshReport>,
    pub visibility: Vec<(f64, VisibilityFit)>,
    pub hbt: Option<(HbtCounts, Estimate)>,
    pub correlate: Option<CorrelationReport>,
    /// Estimators that were undefined on this stage's data.
    pub notes: Vec<String>,
}

fn soft<T>(what: &str, r: Result<T>, notes: &mut Vec<String>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Estimator(m)) => {
            notes.push(format!("{what}: {m}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn read_opt<T>(path: &Path, read: impl Fn(&Path) -> Result<T>) -> Result<Option<T>> {
    if path.exists() {
        read(path).map(Some)
    } else {
        Ok(None)
    }
}

pub fn analyze_stage_dir(dir: &Path, cfg: &RunConfig, opts: &AnalysisOptions) -> Result<StageReport> {
    let mut rep = StageReport::default();
    if let Some(t) = read_opt(&dir.join(TOMO_FILE), CountTable16::read)? {
        let bg = read_opt(&dir.join(TOMO_BACKGROUND_FILE), CountTable16::read)?;
        rep.tomo = Some(analyze_tomo(&t, bg.as_ref(), opts)?);
    }
    if let Some(c) = read_opt(&dir.join(CHSH_FILE), ChshCounts::read)? {
        let bg = read_opt(&dir.join(CHSH_BACKGROUND_FILE), ChshCounts::read)?;
        rep.chsh = Some(analyze_chsh(&c, bg.as_ref(), opts)?);
    }
    let read_scan = |p: &Path| -> Result<VisibilityScan> {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        VisibilityScan::from_csv(&text, &p.display().to_string())
    };
    for k in 0.. {
        let Some(scan) = read_opt(&dir.join(visibility_file(k)), read_scan)? else {
            break;
        };
        let bg = read_opt(&dir.join(visibility_background_file(k)), read_scan)?;
        rep.visibility.push((scan.theta_a_rad, analyze_visibility(&scan, bg.as_ref(), opts)?));
    }
    if let Some(s) = read_opt(&dir.join(TIMESTAMPS_FILE), TimestampStream::read)? {
        if cfg.plan.hbt {
            rep.hbt = soft("hbt", analyze_hbt(&s), &mut rep.notes)?;
        }
        if cfg.plan.correlate {
            rep.correlate = soft("correlate", analyze_correlate(&s, &CorrelateOptions::for_config(cfg)), &mut rep.notes)?;
        }
    }
    Ok(rep)
}

/// Pre/post stage reports plus `F₂`, the fidelity between the two reconstructions.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: RunConfig,
    pub stages: Vec<(Stage, StageReport)>,
    pub storage_fidelity: Option<f64>,
}

pub fn analyze_run(dir: &Path, opts: &AnalysisOptions) -> Result<RunReport> {
    let config = RunConfig::load(&dir.join(MANIFEST), None)?;
    let mut stages = Vec::new();
    for &stage in &config.plan.stages {
        let sub = dir.join(stage.name());
        stages.push((stage, analyze_stage_dir(&sub, &config, opts)?));
    }
    let rho_of = |s: Stage| {
        stages
            .iter()
            .find(|(st, _)| *st == s)
            .and_then(|(_, r)| r.tomo.as_ref())
            .map(|t| &t.rho)
    };
    let storage_fidelity = match (rho_of(Stage::Pre), rho_of(Stage::Post)) {
        (Some(pre), Some(post)) => Some(fidelity(post, pre)?),
        _ => None,
    };
    Ok(RunReport {
        config,
        stages,
        storage_fidelity,
    })
}

pub fn format_run(r: &RunReport) -> Result<String> {
    let cfg = &r.config;
    let mut out = String::new();
    writeln!(out, "# oamsim run report (calibration: simulated data, not an independent measurement)").unwrap();
    writeln!(out, "seed: {}", cfg.seed).unwrap();
    writeln!(
        out,
        "storage time: {} ns, memory efficiency model: {:.4}",
        cfg.storage_time_ns,
        efficiency(&cfg.memory.efficiency, cfg.storage_time_ns)?
    )
    .unwrap();
    for (stage, s) in &r.stages {
        writeln!(out, "\n## {}-storage", stage.name()).unwrap();
        if let Some(t) = &s.tomo {
            out.push_str(&format_tomo(t));
        }
        if let Some(c) = &s.chsh {
            out.push_str(&format_chsh(c));
        }
        for (theta, v) in &s.visibility {
            out.push_str(&format_visibility(*theta, v));
        }
        if let Some((c, a)) = &s.hbt {
            out.push_str(&format_hbt(c, a));
        }
        if let Some(c) = &s.correlate {
            out.push_str(&format_correlate(c));
        }
        for n in &s.notes {
            writeln!(out, "not estimated, {n}").unwrap();
        }
    }
    if let Some(f) = r.storage_fidelity {
        writeln!(out, "\nF2 (post vs pre reconstruction): {f:.4}").unwrap();
    }
    Ok(out)
}
