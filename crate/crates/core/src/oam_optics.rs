//! SLM measurement states, optical-path parity and the memory capacity bound.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{c, Basis, CMatrix, CVector, Ket, OamLabel};

/// Names of the four single-arm tomography states, in [`tomography_basis`] order.
pub const TOMOGRAPHY_LABELS: [&str; 4] = ["L", "R", "L+R", "L-iR"];

/// `[|L⟩, |R⟩, (|L⟩+|R⟩)/√2, (|L⟩−i|R⟩)/√2]`.
pub fn tomography_basis() -> [Ket; 4] {
    let h = FRAC_1_SQRT_2;
    let amps = [
        [c(1.0, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(1.0, 0.0)],
        [c(h, 0.0), c(h, 0.0)],
        [c(h, 0.0), c(0.0, -h)],
    ];
    amps.map(|a| Ket::new(Basis::qubit(), CVector::from_row_slice(&a)).expect("unit-norm literal"))
}

/// Orientation of an angular sector mask, canonicalized into `[0, π)`.
#[derive(Copy, Clone, Debug, PartialEq, PartialOrd)]
pub struct SectorAngle(f64);

impl SectorAngle {
    pub fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(PI);
        if t >= PI {
            t = 0.0;
        }
        SectorAngle(t)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// The orthogonal orientation `θ + π/2`.
    pub fn orthogonal(self) -> Self {
        SectorAngle::new(self.0 + PI / 2.0)
    }
}

/// `(|L⟩ + e^{i2θ}|R⟩)/√2`.
pub fn sector_state(theta: SectorAngle) -> Ket {
    let phase = 2.0 * theta.radians();
    let h = FRAC_1_SQRT_2;
    let amps = CVector::from_row_slice(&[c(h, 0.0), c(h * phase.cos(), h * phase.sin())]);
    Ket::new(Basis::qubit(), amps).expect("unit-norm sector state")
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpticalPath {
    pub mirror_count: u32,
    #[serde(default)]
    pub has_4f_inversion: bool,
}

impl OpticalPath {
    pub fn new(mirror_count: u32, has_4f_inversion: bool) -> Self {
        OpticalPath {
            mirror_count,
            has_4f_inversion,
        }
    }

    fn flips(&self) -> u32 {
        self.mirror_count + u32::from(self.has_4f_inversion)
    }
}

/// Net OAM transformation of an optical path.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PathTransform {
    Identity,
    /// `l → −l`
    Conjugate,
}

impl PathTransform {
    pub fn apply_label(self, l: OamLabel) -> OamLabel {
        match self {
            PathTransform::Identity => l,
            PathTransform::Conjugate => l.flipped(),
        }
    }

    /// Effective measurement ket behind this path: conjugation swaps `L ↔ R`,
    /// which for an equal-weight superposition conjugates the relative phase.
    pub fn apply_ket(self, ket: &Ket) -> Ket {
        match self {
            PathTransform::Identity => ket.clone(),
            PathTransform::Conjugate => {
                let a = ket.amplitudes();
                let swapped = CVector::from_row_slice(&[a[1], a[0]]);
                let global = if a[1].norm() > 0.0 { a[1].conj() / a[1].norm() } else { c(1.0, 0.0) };
                Ket::new(ket.basis().clone(), swapped.map(|z| z * global)).expect("permutation keeps norm")
            }
        }
    }
}

/// Each mirror and each 4-f inversion flips the sign of `l`.
pub fn path_conjugation(path: &OpticalPath) -> PathTransform {
    if path.flips() % 2 == 1 {
        PathTransform::Conjugate
    } else {
        PathTransform::Identity
    }
}

/// Optical routes from the source to each detection SLM.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmPaths {
    /// Route of the photon read out from the source ensemble (arm A).
    pub signal2: OpticalPath,
    /// Route of the stored photon through the memory (arm B).
    pub signal1: OpticalPath,
}

impl Default for ArmPaths {
    /// One mirror on the signal-2 route; four mirrors, a PBS and a 4-f relay on
    /// the signal-1 route.
    fn default() -> Self {
        ArmPaths {
            signal2: OpticalPath::new(1, false),
            signal1: OpticalPath::new(5, true),
        }
    }
}

impl ArmPaths {
    pub fn transforms(&self) -> (PathTransform, PathTransform) {
        (path_conjugation(&self.signal2), path_conjugation(&self.signal1))
    }
}

/// Sector-state measurement ket seen through a path.
pub fn measurement_ket(theta: SectorAngle, transform: PathTransform) -> Ket {
    transform.apply_ket(&sector_state(theta))
}

/// A pair of single-photon projectors, one per arm.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSetting {
    pub label: String,
    pub arm_a: Ket,
    pub arm_b: Ket,
}

impl MeasurementSetting {
    pub fn new(label: impl Into<String>, arm_a: Ket, arm_b: Ket) -> Result<Self> {
        if arm_a.dim() != 2 || arm_b.dim() != 2 {
            return Err(Error::invalid("measurement kets must be single-arm qubit states"));
        }
        Ok(MeasurementSetting {
            label: label.into(),
            arm_a,
            arm_b,
        })
    }

    /// `|a⟩⟨a| ⊗ |b⟩⟨b|`.
    pub fn projector(&self) -> CMatrix {
        self.arm_a.outer().kronecker(&self.arm_b.outer())
    }

    pub fn projector_a(&self) -> CMatrix {
        self.arm_a.outer()
    }

    pub fn projector_b(&self) -> CMatrix {
        self.arm_b.outer()
    }
}

/// The 16 tomography settings, row-major over (arm A state, arm B state).
pub fn tomography_settings() -> Vec<MeasurementSetting> {
    let basis = tomography_basis();
    let mut out = Vec::with_capacity(16);
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            out.push(
                MeasurementSetting::new(
                    format!("{}|{}", TOMOGRAPHY_LABELS[i], TOMOGRAPHY_LABELS[j]),
                    a.clone(),
                    b.clone(),
                )
                .expect("qubit kets"),
            );
        }
    }
    out
}

/// Sector-mask setting at `(θ_A, θ_B)` with path conjugation applied per arm.
pub fn sector_setting(theta_a: f64, theta_b: f64, paths: &ArmPaths) -> MeasurementSetting {
    let (ta, tb) = paths.transforms();
    MeasurementSetting::new(
        format!("{theta_a}|{theta_b}"),
        measurement_ket(SectorAngle::new(theta_a), ta),
        measurement_ket(SectorAngle::new(theta_b), tb),
    )
    .expect("qubit kets")
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct OamCapacity {
    pub l_max: u32,
    /// Labels `−l_max..−1` and `1..l_max`.
    pub dimension: u32,
}

/// Largest `l` whose beam `√(l+1)·w0` still fits inside the ensemble radius.
pub fn max_oam_quantum(w0_um: f64, ensemble_radius_um: f64) -> Result<OamCapacity> {
    if !(w0_um > 0.0) || !(ensemble_radius_um > 0.0) {
        return Err(Error::invalid("beam waist and ensemble radius must be positive"));
    }
    let ratio_sq = (ensemble_radius_um / w0_um).powi(2);
    if ratio_sq < 1.0 - 1e-12 {
        return Err(Error::invalid(format!(
            "waist {w0_um} μm exceeds the ensemble radius {ensemble_radius_um} μm"
        )));
    }
    // 1e-12 relative slack keeps exact squares (e.g. 0.3/0.1) from flooring down
    let l_max = (ratio_sq * (1.0 + 1e-12)).floor() as u32 - 1;
    Ok(OamCapacity {
        l_max,
        dimension: 2 * l_max,
    })
}
