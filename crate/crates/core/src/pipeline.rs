//! End-to-end simulation: source state, memory, projections, counting, files.
//!
//! Count tables are drawn directly as Poisson variates around the Born-rule
//! rates. Timestamp streams go through the window-level source and detector.
//! Every draw comes from a generator keyed by `(seed, tag, index)`, so a
//! configuration and seed fix every output byte.

use std::fs;
use std::path::{Path, PathBuf};

use rand::RngCore;

use crate::analysis::{
    expected_chsh_counts, expected_counts, expected_fringe, poisson_sample, ChshCounts, CountTable16, VisibilityScan,
};
use crate::config::{RunConfig, Stage};
use crate::counts::{detect, TimestampStream, Transmissions};
use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;
use crate::memory::{apply_channel, StoredArm};
use crate::source::{prepared_state, sample_emissions, window_rng};

const TABLE_STREAM: u64 = 4;
const STAGE_STREAM: u64 = 5;

pub const MANIFEST: &str = "manifest.toml";
pub const TOMO_FILE: &str = "tomo16.csv";
pub const TOMO_BACKGROUND_FILE: &str = "tomo16_background.csv";
pub const CHSH_FILE: &str = "chsh.csv";
pub const CHSH_BACKGROUND_FILE: &str = "chsh_background.csv";
pub const TIMESTAMPS_FILE: &str = "timestamps.txt";

pub fn visibility_file(k: usize) -> String {
    format!("visibility_{k:02}.csv")
}

pub fn visibility_background_file(k: usize) -> String {
    format!("visibility_{k:02}_background.csv")
}

/// Two-qubit states on either side of the memory.
#[derive(Clone, Debug)]
pub struct StageStates {
    pub pre: DensityMatrix,
    pub post: DensityMatrix,
    /// Retrieval efficiency at the configured storage time.
    pub efficiency: f64,
}

impl StageStates {
    pub fn state(&self, stage: Stage) -> &DensityMatrix {
        match stage {
            Stage::Pre => &self.pre,
            Stage::Post => &self.post,
        }
    }

    /// Multiplier on coincidence rates: the memory passes a fraction `efficiency`.
    pub fn rate_factor(&self, stage: Stage) -> f64 {
        match stage {
            Stage::Pre => 1.0,
            Stage::Post => self.efficiency,
        }
    }
}

pub fn stage_states(cfg: &RunConfig) -> Result<StageStates> {
    let spectrum = cfg.source.spectrum()?;
    let pre = prepared_state(&spectrum, &cfg.optics, cfg.source.source_visibility)?;
    let (post, efficiency) = apply_channel(
        &pre,
        cfg.memory.stored_arm,
        cfg.storage_time_ns,
        &cfg.memory.efficiency,
        &cfg.memory.noise,
    )?;
    Ok(StageStates { pre, post, efficiency })
}

/// A sampled measurement and, when backgrounds are simulated, its signal-free repeat.
#[derive(Clone, Debug, PartialEq)]
pub struct WithBackground<T> {
    pub signal: T,
    pub background: Option<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageOutputs {
    pub stage: Stage,
    pub tomo16: Option<WithBackground<CountTable16>>,
    pub chsh: Option<WithBackground<ChshCounts>>,
    pub visibility: Vec<WithBackground<VisibilityScan>>,
    pub timestamps: Option<TimestampStream>,
}

fn table_rng(seed: u64, stage: Stage, kind: u64) -> rand_chacha::ChaCha8Rng {
    window_rng(seed, TABLE_STREAM, stage.index() * 64 + kind)
}

fn noisy(mean: f64, background: f64, rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    poisson_sample(mean + background, rng)
}

pub fn simulate_stage(cfg: &RunConfig, states: &StageStates, stage: Stage) -> Result<StageOutputs> {
    let plan = &cfg.plan;
    let rho = states.state(stage);
    let scale = plan.counts_per_setting * states.rate_factor(stage);
    let bg = plan.background_per_setting;
    let with_bg = bg > 0.0;

    let tomo16 = if plan.tomo16 {
        let ideal = expected_counts(rho, scale)?;
        let mut rng = table_rng(cfg.seed, stage, 0);
        let signal = ideal.counts().map(|r| r.map(|m| noisy(m, bg, &mut rng)));
        let background = with_bg.then(|| {
            let mut rng = table_rng(cfg.seed, stage, 1);
            [[0.0; 4]; 4].map(|r| r.map(|_| noisy(0.0, bg, &mut rng)))
        });
        Some(WithBackground {
            signal: CountTable16::new(signal, 1.0)?,
            background: background.map(|b| CountTable16::new(b, 1.0)).transpose()?,
        })
    } else {
        None
    };

    let chsh = if plan.chsh {
        let ideal = expected_chsh_counts(rho, plan.chsh_angles, &cfg.optics, scale)?;
        let mut rng = table_rng(cfg.seed, stage, 2);
        let signal = ideal.rates.map(|r| r.map(|m| noisy(m, bg, &mut rng)));
        let background = with_bg.then(|| {
            let mut rng = table_rng(cfg.seed, stage, 3);
            [[0.0; 4]; 4].map(|r| r.map(|_| noisy(0.0, bg, &mut rng)))
        });
        Some(WithBackground {
            signal: ChshCounts::new(plan.chsh_angles, signal)?,
            background: background.map(|b| ChshCounts::new(plan.chsh_angles, b)).transpose()?,
        })
    } else {
        None
    };

    let mut visibility = Vec::new();
    if plan.visibility {
        let grid: Vec<f64> = (0..plan.visibility_points)
            .map(|k| std::f64::consts::PI * k as f64 / plan.visibility_points as f64)
            .collect();
        for (k, deg) in plan.visibility_theta_a_deg.iter().enumerate() {
            let theta_a = deg.to_radians();
            let ideal = expected_fringe(rho, theta_a, &grid, &cfg.optics, scale);
            let kind = 8 + 2 * k as u64;
            let mut rng = table_rng(cfg.seed, stage, kind);
            let samples = ideal.iter().map(|&(t, m)| (t, noisy(m, bg, &mut rng))).collect();
            let background = with_bg.then(|| {
                let mut rng = table_rng(cfg.seed, stage, kind + 1);
                VisibilityScan {
                    theta_a_rad: theta_a,
                    samples: grid.iter().map(|&t| (t, noisy(0.0, bg, &mut rng))).collect(),
                }
            });
            visibility.push(WithBackground {
                signal: VisibilityScan {
                    theta_a_rad: theta_a,
                    samples,
                },
                background,
            });
        }
    }

    let timestamps = if plan.hbt || plan.correlate {
        let stage_seed = window_rng(cfg.seed, STAGE_STREAM, stage.index()).next_u64();
        let emissions = sample_emissions(&cfg.source, stage_seed)?;
        let mut t = Transmissions::from_source(&cfg.source);
        let f = states.rate_factor(stage);
        match cfg.memory.stored_arm {
            StoredArm::Signal1 => t.signal1 *= f,
            StoredArm::Signal2 => t.signal2 *= f,
        }
        Some(detect(&emissions, &cfg.source, t, &cfg.detector, stage_seed)?)
    } else {
        None
    };

    Ok(StageOutputs {
        stage,
        tomo16,
        chsh,
        visibility,
        timestamps,
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<Vec<StageOutputs>> {
    cfg.validate()?;
    let states = stage_states(cfg)?;
    cfg.plan.stages.iter().map(|&s| simulate_stage(cfg, &states, s)).collect()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes every stage under `dir/<stage>/` and the manifest; returns the
/// written paths relative to `dir`.
pub fn write_outputs(cfg: &RunConfig, outputs: &[StageOutputs], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for out in outputs {
        let sub = PathBuf::from(out.stage.name());
        let stage_dir = dir.join(&sub);
        fs::create_dir_all(&stage_dir).map_err(|e| Error::io(&stage_dir, e))?;
        let mut put = |name: &str, text: String| -> Result<()> {
            write_file(&stage_dir.join(name), &text)?;
            written.push(sub.join(name));
            Ok(())
        };
        if let Some(t) = &out.tomo16 {
            put(TOMO_FILE, t.signal.to_csv())?;
            if let Some(b) = &t.background {
                put(TOMO_BACKGROUND_FILE, b.to_csv())?;
            }
        }
        if let Some(c) = &out.chsh {
            put(CHSH_FILE, c.signal.to_csv())?;
            if let Some(b) = &c.background {
                put(CHSH_BACKGROUND_FILE, b.to_csv())?;
            }
        }
        for (k, v) in out.visibility.iter().enumerate() {
            put(&visibility_file(k), v.signal.to_csv())?;
            if let Some(b) = &v.background {
                put(&visibility_background_file(k), b.to_csv())?;
            }
        }
        if let Some(s) = &out.timestamps {
            put(TIMESTAMPS_FILE, s.to_text())?;
        }
    }

    let mut manifest = format!("# oamsim {}\n# outputs:\n", env!("CARGO_PKG_VERSION"));
    for p in &written {
        manifest.push_str(&format!("#   {}\n", p.display()));
    }
    manifest.push_str(&cfg.to_toml()?);
    write_file(&dir.join(MANIFEST), &manifest)?;
    written.push(PathBuf::from(MANIFEST));
    Ok(written)
}

/// [`simulate`] followed by [`write_outputs`] into `cfg.output_dir`.
pub fn run_simulation(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let outputs = simulate(cfg)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_outputs(cfg, &outputs, dir)
}
