//! Raman pair source: the OAM-entangled state it emits and event-level
//! photon-number statistics per experimental window.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{c, werner_state, Basis, CVector, DensityMatrix, Ket, OamLabel, C64};
use crate::oam_optics::ArmPaths;

const NORM_TOL: f64 = 1e-12;

/// Schmidt coefficients `c_l` of `Σ c_l |−l⟩_{s2} ⊗ |l⟩_{s1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtSpectrum {
    terms: Vec<(OamLabel, C64)>,
}

impl SchmidtSpectrum {
    pub fn new(terms: Vec<(OamLabel, C64)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("Schmidt spectrum is empty"));
        }
        let mut sorted = terms;
        sorted.sort_by(|a, b| b.0.cmp(&a.0));
        if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("Schmidt spectrum repeats an OAM label"));
        }
        let norm: f64 = sorted.iter().map(|(_, z)| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(format!("Schmidt weights sum to {norm}, expected 1")));
        }
        Ok(SchmidtSpectrum { terms: sorted })
    }

    /// Equal real weights over `labels`.
    pub fn uniform(labels: &[i32]) -> Result<Self> {
        let w = 1.0 / (labels.len() as f64).sqrt();
        Self::new(labels.iter().map(|&l| (OamLabel(l), c(w, 0.0))).collect())
    }

    /// Terms ordered by descending `l`.
    pub fn terms(&self) -> &[(OamLabel, C64)] {
        &self.terms
    }

    pub fn coefficient(&self, l: OamLabel) -> C64 {
        self.terms.iter().find(|(k, _)| *k == l).map_or(c(0.0, 0.0), |(_, z)| *z)
    }
}

impl Default for SchmidtSpectrum {
    fn default() -> Self {
        SchmidtSpectrum {
            terms: vec![(OamLabel::L, c(FRAC_1_SQRT_2, 0.0)), (OamLabel::R, c(FRAC_1_SQRT_2, 0.0))],
        }
    }
}

/// One spectrum entry in configuration files.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumTerm {
    pub l: i32,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl SpectrumTerm {
    pub fn to_spectrum(terms: &[SpectrumTerm]) -> Result<SchmidtSpectrum> {
        SchmidtSpectrum::new(terms.iter().map(|t| (OamLabel(t.l), c(t.re, t.im))).collect())
    }
}

/// The full bipartite emission state on the product basis of every label that
/// appears (with either sign) in the spectrum.
pub fn srs_state(spectrum: &SchmidtSpectrum) -> Result<Ket> {
    let mut labels: Vec<OamLabel> = spectrum
        .terms()
        .iter()
        .flat_map(|(l, _)| [*l, l.flipped()])
        .collect();
    labels.sort_by(|a, b| b.cmp(a));
    labels.dedup();
    let arm = Basis::single_arm(&labels)?;
    let basis = arm.tensor(&arm);
    let mut amps = CVector::zeros(basis.len());
    for (l, z) in spectrum.terms() {
        let idx = basis
            .index_of(&[l.flipped(), *l])
            .ok_or_else(|| Error::invalid("label missing from emission basis"))?;
        amps[idx] = *z;
    }
    Ket::new(basis, amps)
}

/// Projects onto `{±l} ⊗ {±l}`, relabels `+l → L`, `−l → R`, applies each
/// arm's path parity and renormalizes.
pub fn postselect_2d(state: &Ket, l: u32, paths: &ArmPaths) -> Result<DensityMatrix> {
    if l == 0 {
        return Err(Error::invalid("postselection needs l ≥ 1"));
    }
    if state.basis().arms() != 2 {
        return Err(Error::invalid("postselection needs a bipartite state"));
    }
    let l = l as i32;
    let (ta, tb) = paths.transforms();
    let plus_minus = [OamLabel(l), OamLabel(-l)];
    let target = Basis::two_qubit();
    let mut amps = CVector::zeros(4);
    for a in plus_minus {
        for b in plus_minus {
            let Some(src) = state.basis().index_of(&[a, b]) else {
                continue;
            };
            let qa = relabel(ta.apply_label(a), l);
            let qb = relabel(tb.apply_label(b), l);
            let dst = target.index_of(&[qa, qb]).expect("qubit labels");
            amps[dst] += state.amplitudes()[src];
        }
    }
    if amps.norm() == 0.0 {
        return Err(Error::invalid(format!("state has no support on the l = ±{l} subspace")));
    }
    Ok(Ket::normalized(target, amps)?.density())
}

fn relabel(label: OamLabel, l: i32) -> OamLabel {
    if label.value() == l {
        OamLabel::L
    } else {
        OamLabel::R
    }
}

/// Two-qubit state at the detectors before storage: the postselected emission
/// state mixed with white noise, `v·|ψ⟩⟨ψ| + (1 − v)·I/4`.
pub fn prepared_state(spectrum: &SchmidtSpectrum, paths: &ArmPaths, visibility: f64) -> Result<DensityMatrix> {
    let pure = postselect_2d(&srs_state(spectrum)?, 1, paths)?;
    let (values, vectors) = crate::hilbert::eigh(pure.matrix());
    let top = values.len() - 1;
    let ket = Ket::normalized(Basis::two_qubit(), vectors.column(top).into_owned())?;
    werner_state(visibility, &ket)
}

/// Photon-number statistics of the emitted field.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhotonStatistics {
    /// Multimode thermal pairs with single-arm `g(2)(0)` = `thermal_auto_g2`.
    #[default]
    Thermal,
    /// Poisson-distributed pair number.
    Poisson,
    /// At most one pair per window.
    SinglePair,
    /// Exactly two pairs in a window (with probability `pair_rate/2`), else none.
    TwoPair,
    /// Independent Poissonian fields on each arm; no pairs.
    Coherent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    /// Mean number of pairs per window.
    pub pair_rate_per_window: f64,
    pub statistics: PhotonStatistics,
    pub thermal_auto_g2: f64,
    pub accidental_rate_signal1_per_window: f64,
    pub accidental_rate_signal2_per_window: f64,
    /// Total transmission of the signal-1 route, detector included.
    pub transmission_signal1: f64,
    pub transmission_signal2: f64,
    pub pulse_period_ns: u64,
    pub window_count: u64,
    /// Arrival time of signal 1 within its window.
    pub signal1_offset_ns: u64,
    pub signal2_offset_ns: u64,
    /// Weight of the entangled component in the postselected two-qubit state.
    pub source_visibility: f64,
    pub spectrum: Vec<SpectrumTerm>,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            pair_rate_per_window: 0.05,
            statistics: PhotonStatistics::Thermal,
            thermal_auto_g2: 2.0,
            accidental_rate_signal1_per_window: 0.0,
            accidental_rate_signal2_per_window: 0.0,
            // fibre coupling, etalons, detector
            transmission_signal1: transmission_chain(&[0.30, 0.50, 0.60]),
            // fibre coupling, etalons, detector
            transmission_signal2: transmission_chain(&[0.80, 0.60, 0.60]),
            pulse_period_ns: 1000,
            window_count: 100_000,
            signal1_offset_ns: 0,
            signal2_offset_ns: 380,
            source_visibility: 0.885,
            spectrum: vec![
                SpectrumTerm {
                    l: 1,
                    re: FRAC_1_SQRT_2,
                    im: 0.0,
                },
                SpectrumTerm {
                    l: -1,
                    re: FRAC_1_SQRT_2,
                    im: 0.0,
                },
            ],
        }
    }
}

/// Product of independent stage transmissions.
pub fn transmission_chain(stages: &[f64]) -> f64 {
    stages.iter().product()
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |field: &str, msg: &str| Error::Config {
            field: format!("source.{field}"),
            msg: msg.to_string(),
        };
        let rates = [
            ("pair_rate_per_window", self.pair_rate_per_window),
            ("accidental_rate_signal1_per_window", self.accidental_rate_signal1_per_window),
            ("accidental_rate_signal2_per_window", self.accidental_rate_signal2_per_window),
        ];
        for (name, v) in rates {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(cfg(name, "must be finite and non-negative"));
            }
        }
        for (name, v) in [
            ("transmission_signal1", self.transmission_signal1),
            ("transmission_signal2", self.transmission_signal2),
            ("source_visibility", self.source_visibility),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(cfg(name, "must lie in [0, 1]"));
            }
        }
        if !(self.thermal_auto_g2 >= 1.0) || !self.thermal_auto_g2.is_finite() {
            return Err(cfg("thermal_auto_g2", "must be finite and at least 1"));
        }
        match self.statistics {
            PhotonStatistics::SinglePair if self.pair_rate_per_window > 1.0 => {
                return Err(cfg("pair_rate_per_window", "single-pair emission needs a rate ≤ 1"));
            }
            PhotonStatistics::TwoPair if self.pair_rate_per_window > 2.0 => {
                return Err(cfg("pair_rate_per_window", "two-pair emission needs a rate ≤ 2"));
            }
            _ => {}
        }
        if self.pulse_period_ns == 0 {
            return Err(cfg("pulse_period_ns", "must be positive"));
        }
        if self.signal1_offset_ns >= self.pulse_period_ns || self.signal2_offset_ns >= self.pulse_period_ns {
            return Err(cfg("signal*_offset_ns", "arrival offsets must fall inside one pulse period"));
        }
        SpectrumTerm::to_spectrum(&self.spectrum).map_err(|e| cfg("spectrum", &e.to_string()))?;
        Ok(())
    }

    pub fn spectrum(&self) -> Result<SchmidtSpectrum> {
        SpectrumTerm::to_spectrum(&self.spectrum)
    }
}

/// Photons emitted in one window. Windows with nothing emitted are omitted.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct WindowEmission {
    pub window: u64,
    /// Correlated pairs (one photon in each arm per pair).
    pub pairs: u32,
    /// Uncorrelated photons on signal 1 (coherent field or accidentals).
    pub signal1_only: u32,
    pub signal2_only: u32,
}

impl WindowEmission {
    pub fn is_empty(&self) -> bool {
        self.pairs == 0 && self.signal1_only == 0 && self.signal2_only == 0
    }
}

const CHUNK: u64 = 1 << 14;

/// Random generator of window `index` under `seed`: ChaCha8 keyed by the seed,
/// with the window index selecting the stream.
pub fn window_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

/// Stream tag for emission sampling; detection uses a different tag.
pub(crate) const EMISSION_STREAM: u64 = 1;

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u32
}

fn sample_window<R: Rng + ?Sized>(cfg: &SourceConfig, rng: &mut R) -> (u32, u32, u32) {
    let mu = cfg.pair_rate_per_window;
    let (pairs, mut s1, mut s2) = match cfg.statistics {
        PhotonStatistics::Thermal => {
            let excess = cfg.thermal_auto_g2 - 1.0;
            let n = if mu <= 0.0 {
                0
            } else if excess <= 0.0 {
                poisson(mu, rng)
            } else {
                // negative binomial with 1/excess modes: Gamma-mixed Poisson
                let k = 1.0 / excess;
                let lambda = Gamma::new(k, mu / k).expect("positive shape and scale").sample(rng);
                poisson(lambda, rng)
            };
            (n, 0, 0)
        }
        PhotonStatistics::Poisson => (poisson(mu, rng), 0, 0),
        PhotonStatistics::SinglePair => (u32::from(rng.random_bool(mu.min(1.0))), 0, 0),
        PhotonStatistics::TwoPair => (2 * u32::from(rng.random_bool((mu / 2.0).min(1.0))), 0, 0),
        PhotonStatistics::Coherent => (0, poisson(mu, rng), poisson(mu, rng)),
    };
    s1 += poisson(cfg.accidental_rate_signal1_per_window, rng);
    s2 += poisson(cfg.accidental_rate_signal2_per_window, rng);
    (pairs, s1, s2)
}

/// Samples every window of a run. Deterministic in `(config, seed)` and
/// independent of the thread count.
pub fn sample_emissions(config: &SourceConfig, seed: u64) -> Result<Vec<WindowEmission>> {
    config.validate()?;
    let n = config.window_count;
    let chunks: Vec<u64> = (0..n.div_ceil(CHUNK)).collect();
    let parts: Vec<Vec<WindowEmission>> = chunks
        .par_iter()
        .map(|&chunk| {
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(n);
            (start..end)
                .filter_map(|window| {
                    let mut rng = window_rng(seed, EMISSION_STREAM, window);
                    let (pairs, s1, s2) = sample_window(config, &mut rng);
                    let e = WindowEmission {
                        window,
                        pairs,
                        signal1_only: s1,
                        signal2_only: s2,
                    };
                    (!e.is_empty()).then_some(e)
                })
                .collect()
        })
        .collect();
    Ok(parts.concat())
}
