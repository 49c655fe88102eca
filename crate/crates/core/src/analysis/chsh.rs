//! CHSH correlation and Bell parameter from sector-mask coincidence rates.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::poisson_sample;
use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;
use crate::oam_optics::{sector_setting, ArmPaths};

/// Mask orientations `θ_A, θ_A′, θ_B, θ_B′` in radians.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChshAngles {
    #[serde(rename = "theta_a_rad")]
    pub a: f64,
    #[serde(rename = "theta_a_prime_rad")]
    pub a_prime: f64,
    #[serde(rename = "theta_b_rad")]
    pub b: f64,
    #[serde(rename = "theta_b_prime_rad")]
    pub b_prime: f64,
}

impl Default for ChshAngles {
    /// `0, π/4, π/8, 3π/8`: maximal violation for `|LL⟩ + |RR⟩`.
    fn default() -> Self {
        ChshAngles {
            a: 0.0,
            a_prime: FRAC_PI_4,
            b: FRAC_PI_8,
            b_prime: 3.0 * FRAC_PI_8,
        }
    }
}

impl ChshAngles {
    /// `(a,b), (a,b′), (a′,b), (a′,b′)`.
    pub fn pairs(&self) -> [(f64, f64); 4] {
        [
            (self.a, self.b),
            (self.a, self.b_prime),
            (self.a_prime, self.b),
            (self.a_prime, self.b_prime),
        ]
    }
}

/// For each angle pair, the rates `C(a,b), C(a⊥,b⊥), C(a⊥,b), C(a,b⊥)` with `⊥ = +π/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChshCounts {
    pub angles: ChshAngles,
    pub rates: [[f64; 4]; 4],
}

const CSV_HEADER: &str = "theta_a,theta_b,c_ab,c_aperp_bperp,c_aperp_b,c_a_bperp";

impl ChshCounts {
    pub fn new(angles: ChshAngles, rates: [[f64; 4]; 4]) -> Result<Self> {
        if rates.iter().flatten().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("coincidence rates must be finite and non-negative"));
        }
        Ok(ChshCounts { angles, rates })
    }

    pub fn correlations(&self) -> Result<[f64; 4]> {
        let mut e = [0.0; 4];
        for (k, r) in self.rates.iter().enumerate() {
            e[k] = chsh_E(*r)?;
        }
        Ok(e)
    }

    #[allow(non_snake_case)]
    pub fn S(&self) -> Result<f64> {
        Ok(chsh_S(self.correlations()?))
    }

    pub fn scaled(&self, k: f64) -> Self {
        ChshCounts {
            angles: self.angles,
            rates: self.rates.map(|r| r.map(|v| v * k)),
        }
    }

    pub fn subtract_background(&self, background: &ChshCounts) -> Self {
        let mut rates = self.rates;
        for (i, row) in rates.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - background.rates[i][j]).max(0.0);
            }
        }
        ChshCounts {
            angles: self.angles,
            rates,
        }
    }

    pub fn poisson_resample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        ChshCounts {
            angles: self.angles,
            rates: self.rates.map(|r| r.map(|v| poisson_sample(v, rng))),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for ((a, b), r) in self.angles.pairs().iter().zip(&self.rates) {
            writeln!(out, "{a:?},{b:?},{:?},{:?},{:?},{:?}", r[0], r[1], r[2], r[3]).unwrap();
        }
        out
    }

    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let mut rows: Vec<(f64, f64, [f64; 4])> = Vec::new();
        let mut saw_header = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                if line != CSV_HEADER {
                    return Err(Error::parse(origin, line_no, format!("expected header `{CSV_HEADER}`")));
                }
                saw_header = true;
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .enumerate()
                .map(|(k, f)| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::parse(origin, line_no, format!("column {}: {e}", k + 1)))
                })
                .collect::<Result<_>>()?;
            if vals.len() != 6 {
                return Err(Error::parse(origin, line_no, format!("expected 6 fields, found {}", vals.len())));
            }
            if vals[2..].iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::parse(origin, line_no, "rates must be finite and non-negative"));
            }
            rows.push((vals[0], vals[1], [vals[2], vals[3], vals[4], vals[5]]));
        }
        if rows.len() != 4 {
            return Err(Error::parse(origin, 0, format!("expected 4 angle pairs, found {}", rows.len())));
        }
        let angles = ChshAngles {
            a: rows[0].0,
            b: rows[0].1,
            b_prime: rows[1].1,
            a_prime: rows[2].0,
        };
        let expected = angles.pairs();
        for (k, (a, b, _)) in rows.iter().enumerate() {
            if (*a, *b) != expected[k] {
                return Err(Error::parse(
                    origin,
                    0,
                    format!("row {} angles must follow (a,b), (a,b'), (a',b), (a',b')", k + 1),
                ));
            }
        }
        ChshCounts::new(angles, [rows[0].2, rows[1].2, rows[2].2, rows[3].2])
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, &path.display().to_string())
    }
}

/// `[C(a,b) + C(a⊥,b⊥) − C(a⊥,b) − C(a,b⊥)] / Σ`.
#[allow(non_snake_case)]
pub fn chsh_E(rates: [f64; 4]) -> Result<f64> {
    let sum: f64 = rates.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::estimator("all four coincidence rates are zero; E undefined"));
    }
    Ok(((rates[0] + rates[1] - rates[2] - rates[3]) / sum).clamp(-1.0, 1.0))
}

/// `E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)`.
#[allow(non_snake_case)]
pub fn chsh_S(e: [f64; 4]) -> f64 {
    e[0] - e[1] + e[2] + e[3]
}

/// Born-rule rates for the CHSH settings, with arm conjugation from `paths`.
pub fn expected_chsh_counts(rho: &DensityMatrix, angles: ChshAngles, paths: &ArmPaths, scale: f64) -> Result<ChshCounts> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: rho.dim(),
        });
    }
    let mut rates = [[0.0; 4]; 4];
    for (k, (a, b)) in angles.pairs().iter().enumerate() {
        let orient = [(*a, *b), (a + FRAC_PI_2, b + FRAC_PI_2), (a + FRAC_PI_2, *b), (*a, b + FRAC_PI_2)];
        for (j, (ta, tb)) in orient.iter().enumerate() {
            let s = sector_setting(*ta, *tb, paths);
            rates[k][j] = (scale * rho.expectation(&s.projector())).max(0.0);
        }
    }
    ChshCounts::new(angles, rates)
}
