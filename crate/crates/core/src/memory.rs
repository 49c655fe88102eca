//! Storage channel of the far off-resonant memory: retrieval efficiency versus
//! storage time and the decoherence seen by the stored photon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{c, CMatrix, DensityMatrix};

/// `g0 + A·exp(−(τ − τ0)/T)`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyFit {
    pub g0: f64,
    #[serde(rename = "amplitude")]
    pub a: f64,
    pub tau0_ns: f64,
    pub decay_ns: f64,
}

impl Default for EfficiencyFit {
    /// Fit to the weak-coherent-light storage curve: g0 = −0.08, A = 0.38,
    /// τ0 = 67 ns, T = 1434 ns.
    fn default() -> Self {
        EfficiencyFit {
            g0: -0.08,
            a: 0.38,
            tau0_ns: 67.0,
            decay_ns: 1434.0,
        }
    }
}

impl EfficiencyFit {
    pub fn new(g0: f64, a: f64, tau0_ns: f64, decay_ns: f64) -> Result<Self> {
        let fit = EfficiencyFit {
            g0,
            a,
            tau0_ns,
            decay_ns,
        };
        fit.validate()?;
        Ok(fit)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.g0, self.a, self.tau0_ns, self.decay_ns].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("efficiency fit parameters must be finite"));
        }
        if !(self.decay_ns > 0.0) {
            return Err(Error::invalid(format!("decay time {} ns must be positive", self.decay_ns)));
        }
        if self.a < 0.0 {
            return Err(Error::invalid(format!("amplitude {} must be non-negative", self.a)));
        }
        Ok(())
    }

    /// Unclamped model value.
    pub fn model(&self, tau_ns: f64) -> f64 {
        self.g0 + self.a * (-(tau_ns - self.tau0_ns) / self.decay_ns).exp()
    }

    /// Same curve expressed with reference time `tau0_ns`.
    pub fn rebased(&self, tau0_ns: f64) -> Self {
        EfficiencyFit {
            a: self.a * (-(tau0_ns - self.tau0_ns) / self.decay_ns).exp(),
            tau0_ns,
            ..*self
        }
    }
}

/// Retrieval probability after storing for `tau_ns`, clamped to `[0, 1]`.
pub fn efficiency(fit: &EfficiencyFit, tau_ns: f64) -> Result<f64> {
    if !(tau_ns >= 0.0) || !tau_ns.is_finite() {
        return Err(Error::invalid(format!("storage time {tau_ns} ns must be finite and non-negative")));
    }
    Ok(fit.model(tau_ns).clamp(0.0, 1.0))
}

/// Decoherence acting on the stored qubit.
///
/// Applied in order: OAM crosstalk (the stored mode is scattered into the
/// opposite-sign mode with a random relative phase, i.e. `X` and `Y` each with
/// probability `crosstalk/2`), phase damping of the `L/R` coherence by
/// `exp(−dephasing_rate·τ)`, then mixing with `I/4` by `depolarizing_floor`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryNoise {
    pub dephasing_rate_per_ns: f64,
    pub depolarizing_floor: f64,
    #[serde(default)]
    pub crosstalk: f64,
}

impl Default for MemoryNoise {
    /// Calibrated against the 150 ns storage results.
    fn default() -> Self {
        MemoryNoise {
            dephasing_rate_per_ns: 1.0e-5,
            depolarizing_floor: 0.0,
            crosstalk: 0.052,
        }
    }
}

impl MemoryNoise {
    pub const NONE: MemoryNoise = MemoryNoise {
        dephasing_rate_per_ns: 0.0,
        depolarizing_floor: 0.0,
        crosstalk: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.dephasing_rate_per_ns >= 0.0) || !self.dephasing_rate_per_ns.is_finite() {
            return Err(Error::invalid("dephasing rate must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.depolarizing_floor) {
            return Err(Error::invalid("depolarizing floor must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.crosstalk) {
            return Err(Error::invalid("crosstalk probability must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Coherence factor `λ = exp(−rτ)`.
    pub fn coherence_factor(&self, tau_ns: f64) -> f64 {
        (-self.dephasing_rate_per_ns * tau_ns).exp()
    }
}

/// Which photon is written into the memory.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoredArm {
    /// Second tensor factor (arm B).
    Signal1,
    /// First tensor factor (arm A).
    Signal2,
}

impl StoredArm {
    /// Bit of a two-qubit basis index that belongs to this arm.
    fn bit(self, index: usize) -> usize {
        match self {
            StoredArm::Signal1 => index & 1,
            StoredArm::Signal2 => (index >> 1) & 1,
        }
    }

    fn embed(self, op: &CMatrix) -> CMatrix {
        let id = CMatrix::identity(2, 2);
        match self {
            StoredArm::Signal1 => id.kronecker(op),
            StoredArm::Signal2 => op.kronecker(&id),
        }
    }
}

impl TryFrom<u8> for StoredArm {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(StoredArm::Signal1),
            2 => Ok(StoredArm::Signal2),
            _ => Err(Error::invalid(format!("stored arm must be 1 or 2, got {v}"))),
        }
    }
}

/// Conditional state after retrieval and the retrieval probability.
pub fn apply_channel(
    rho: &DensityMatrix,
    arm: StoredArm,
    tau_ns: f64,
    fit: &EfficiencyFit,
    noise: &MemoryNoise,
) -> Result<(DensityMatrix, f64)> {
    if rho.dim() != 4 || rho.basis().arms() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: rho.dim(),
        });
    }
    noise.validate()?;
    let eta = efficiency(fit, tau_ns)?;

    let mut state = rho.clone();
    if noise.crosstalk > 0.0 {
        let x = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let y = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let keep = (1.0 - noise.crosstalk).sqrt();
        let flip = (noise.crosstalk / 2.0).sqrt();
        let kraus = [
            CMatrix::identity(4, 4) * c(keep, 0.0),
            arm.embed(&x) * c(flip, 0.0),
            arm.embed(&y) * c(flip, 0.0),
        ];
        state = state.apply_kraus(&kraus);
    }

    let lambda = noise.coherence_factor(tau_ns);
    let mut m = state.into_matrix();
    for i in 0..4 {
        for j in 0..4 {
            if arm.bit(i) != arm.bit(j) {
                m[(i, j)] *= lambda;
            }
        }
    }
    let mut out = DensityMatrix::new(rho.basis().clone(), m)?;

    if noise.depolarizing_floor > 0.0 {
        out = out.mix(&DensityMatrix::maximally_mixed(rho.basis().clone()), noise.depolarizing_floor)?;
    }
    Ok((out, eta))
}
