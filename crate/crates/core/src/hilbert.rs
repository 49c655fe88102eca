//! States and operators over small OAM-labelled Hilbert spaces.
//!
//! Basis ordering is fixed crate-wide: a single arm is ordered `(L, R)` where
//! `L` carries `l = +1` and `R` carries `l = -1`, and a bipartite space is the
//! tensor product `signal 2 ⊗ signal 1`. The first tensor factor (arm A) is the
//! photon read out from the source ensemble; the second (arm B) is the photon
//! that passes through the memory. Every module builds its bases through
//! [`Basis::qubit`] and [`Basis::two_qubit`] so that ordering lives here only.

use std::collections::HashSet;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest per-arm dimension supported.
pub const MAX_ARM_DIM: usize = 8;

pub const KET_NORM_TOL: f64 = 1e-12;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const EIGEN_FLOOR: f64 = -1e-9;
const FIDELITY_NOISE_FLOOR: f64 = 1e-14;

pub(crate) fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Quanta of orbital angular momentum, in units of ħ.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OamLabel(pub i32);

impl OamLabel {
    /// `|L⟩`, one quantum of OAM.
    pub const L: OamLabel = OamLabel(1);
    /// `|R⟩`, minus one quantum of OAM.
    pub const R: OamLabel = OamLabel(-1);

    pub fn new(l: i32, l_max: u32) -> Result<Self> {
        if l.unsigned_abs() > l_max {
            return Err(Error::invalid(format!("|l| = {} exceeds l_max = {l_max}", l.abs())));
        }
        Ok(OamLabel(l))
    }

    pub fn value(self) -> i32 {
        self.0
    }

    pub fn flipped(self) -> Self {
        OamLabel(-self.0)
    }
}

impl fmt::Display for OamLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Ordered list of basis states; each state carries one label per arm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    arms: usize,
    states: Vec<Vec<OamLabel>>,
}

impl Basis {
    pub fn new(states: Vec<Vec<OamLabel>>) -> Result<Self> {
        let arms = states.first().map(Vec::len).unwrap_or(0);
        if arms == 0 {
            return Err(Error::invalid("basis must contain at least one state with one arm"));
        }
        if states.iter().any(|s| s.len() != arms) {
            return Err(Error::invalid("all basis states must have the same number of arms"));
        }
        let mut seen = HashSet::new();
        for s in &states {
            if !seen.insert(s.clone()) {
                return Err(Error::invalid(format!("duplicate basis label {s:?}")));
            }
        }
        Ok(Basis { arms, states })
    }

    pub fn single_arm(labels: &[OamLabel]) -> Result<Self> {
        if labels.len() > MAX_ARM_DIM {
            return Err(Error::invalid(format!(
                "arm dimension {} exceeds {MAX_ARM_DIM}",
                labels.len()
            )));
        }
        Basis::new(labels.iter().map(|&l| vec![l]).collect())
    }

    /// `(L, R)`.
    pub fn qubit() -> Self {
        Basis {
            arms: 1,
            states: vec![vec![OamLabel::L], vec![OamLabel::R]],
        }
    }

    /// `(LL, LR, RL, RR)` with arm A (signal 2) first.
    pub fn two_qubit() -> Self {
        Basis::qubit().tensor(&Basis::qubit())
    }

    pub fn tensor(&self, other: &Basis) -> Basis {
        let mut states = Vec::with_capacity(self.len() * other.len());
        for a in &self.states {
            for b in &other.states {
                let mut s = a.clone();
                s.extend_from_slice(b);
                states.push(s);
            }
        }
        Basis {
            arms: self.arms + other.arms,
            states,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn states(&self) -> &[Vec<OamLabel>] {
        &self.states
    }

    pub fn index_of(&self, state: &[OamLabel]) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    /// Splits a two-arm basis into its factor bases, if it is a full product
    /// basis listed in row-major order.
    pub fn factors(&self) -> Result<(Basis, Basis)> {
        if self.arms != 2 {
            return Err(Error::invalid("partial trace needs a two-arm basis"));
        }
        let mut first: Vec<OamLabel> = Vec::new();
        let mut second: Vec<OamLabel> = Vec::new();
        for s in &self.states {
            if !first.contains(&s[0]) {
                first.push(s[0]);
            }
            if !second.contains(&s[1]) {
                second.push(s[1]);
            }
        }
        let a = Basis::single_arm(&first)?;
        let b = Basis::single_arm(&second)?;
        if a.tensor(&b) != *self {
            return Err(Error::invalid("basis is not a row-major product basis"));
        }
        Ok((a, b))
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .states
            .iter()
            .map(|s| s.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(":"))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let states = s
            .split(',')
            .map(|state| {
                state
                    .split(':')
                    .map(|l| {
                        l.trim()
                            .parse::<i32>()
                            .map(OamLabel)
                            .map_err(|e| Error::invalid(format!("bad OAM label `{l}`: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Basis::new(states)
    }
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    basis: Basis,
    amplitudes: CVector,
}

impl Ket {
    pub fn new(basis: Basis, amplitudes: CVector) -> Result<Self> {
        if basis.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: amplitudes.len(),
            });
        }
        let norm_sq = amplitudes.norm_squared();
        if (norm_sq - 1.0).abs() > KET_NORM_TOL {
            return Err(Error::invalid(format!("ket norm² = {norm_sq}, expected 1")));
        }
        Ok(Ket { basis, amplitudes })
    }

    /// Builds a ket after rescaling the amplitudes to unit norm.
    pub fn normalized(basis: Basis, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        Ket::new(basis, amplitudes.unscale(norm))
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> Result<C64> {
        if self.basis != other.basis {
            return Err(Error::invalid("inner product of kets in different bases"));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        Ket {
            basis: self.basis.tensor(&other.basis),
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        }
    }

    pub fn conjugate(&self) -> Ket {
        Ket {
            basis: self.basis.clone(),
            amplitudes: self.amplitudes.map(|z| z.conj()),
        }
    }

    /// `|ψ⟩⟨ψ|` as a raw matrix.
    pub fn outer(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            basis: self.basis.clone(),
            matrix: self.outer(),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BellKind {
    /// `(|LL⟩ + |RR⟩)/√2`
    PhiPlus,
    /// `(|LR⟩ + |RL⟩)/√2`
    PsiPlus,
}

pub fn bell_state(kind: BellKind) -> Ket {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amps = match kind {
        BellKind::PhiPlus => [h, 0.0, 0.0, h],
        BellKind::PsiPlus => [0.0, h, h, 0.0],
    };
    Ket {
        basis: Basis::two_qubit(),
        amplitudes: CVector::from_iterator(4, amps.iter().map(|&a| c(a, 0.0))),
    }
}

/// Complex Hermitian positive semidefinite unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    basis: Basis,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(basis: Basis, matrix: CMatrix) -> Result<Self> {
        check_square(&basis, &matrix)?;
        let herm = hermitian_deviation(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::NotPhysical(format!("trace = {tr}")));
        }
        let (evals, _) = eigh(&matrix);
        let min = evals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < EIGEN_FLOOR {
            return Err(Error::NotPhysical(format!("minimum eigenvalue {min:e}")));
        }
        Ok(DensityMatrix { basis, matrix })
    }

    pub fn maximally_mixed(basis: Basis) -> Self {
        let n = basis.len();
        DensityMatrix {
            basis,
            matrix: CMatrix::identity(n, n).unscale(n as f64),
        }
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.matrix).0.iter().cloned().collect()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `Tr(ρ P)` for a Hermitian operator `P`.
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        (&self.matrix * op).trace().re
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn overlap(&self, ket: &Ket) -> f64 {
        let a = ket.amplitudes();
        (a.adjoint() * &self.matrix * a)[(0, 0)].re
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            basis: self.basis.tensor(&other.basis),
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    /// Convex mixture `(1 - w)·self + w·other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<DensityMatrix> {
        if self.basis != other.basis {
            return Err(Error::invalid("mixing states in different bases"));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::invalid(format!("mixing weight {w} outside [0, 1]")));
        }
        Ok(DensityMatrix {
            basis: self.basis.clone(),
            matrix: self.matrix.scale(1.0 - w) + other.matrix.scale(w),
        })
    }

    /// `K ρ K†` summed over Kraus operators; the caller guarantees trace preservation.
    pub(crate) fn apply_kraus(&self, kraus: &[CMatrix]) -> DensityMatrix {
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for k in kraus {
            out += k * &self.matrix * k.adjoint();
        }
        DensityMatrix {
            basis: self.basis.clone(),
            matrix: hermitize(&out),
        }
    }

    /// Traces out one arm of a two-arm product basis; `keep` is 0 for arm A and 1 for arm B.
    pub fn partial_trace(&self, keep: usize) -> Result<DensityMatrix> {
        let (a, b) = self.basis.factors()?;
        let (da, db) = (a.len(), b.len());
        let matrix = match keep {
            0 => CMatrix::from_fn(da, da, |i, j| {
                (0..db).map(|k| self.matrix[(i * db + k, j * db + k)]).sum()
            }),
            1 => CMatrix::from_fn(db, db, |i, j| {
                (0..da).map(|k| self.matrix[(k * db + i, k * db + j)]).sum()
            }),
            _ => return Err(Error::invalid(format!("arm index {keep} out of range"))),
        };
        Ok(DensityMatrix {
            basis: if keep == 0 { a } else { b },
            matrix,
        })
    }

    /// Serializes to the plain-text matrix format.
    pub fn to_text(&self) -> String {
        let mut out = format!("#basis={}\n", self.basis);
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim()).map(|j| format_complex(self.matrix[(i, j)])).collect();
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }

    /// Parses the text format and validates physicality.
    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let (basis, matrix) = parse_matrix_text(text, origin)?;
        DensityMatrix::new(basis, matrix)
    }
}

fn check_square(basis: &Basis, m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: m.nrows(),
        });
    }
    Ok(())
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let mut max: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            max = max.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    max
}

pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).unscale(2.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitize(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

fn from_eigen(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let n = values.len();
    let mut scaled = vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        for r in 0..n {
            scaled[(r, k)] *= v;
        }
    }
    hermitize(&(scaled * vectors.adjoint()))
}

/// Square root of a (nearly) positive semidefinite Hermitian matrix; eigenvalues
/// below zero are clipped before the root is taken.
pub fn sqrt_psd(m: &CMatrix) -> CMatrix {
    let (values, vectors) = eigh(m);
    let roots: Vec<f64> = values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    from_eigen(&roots, &vectors)
}

/// Uhlmann fidelity `(Tr √(√a · b · √a))²`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let s = sqrt_psd(a.matrix());
    let inner = &s * b.matrix() * &s;
    let (values, _) = eigh(&inner);
    // rounding noise on null directions would otherwise enter through its square root
    let floor = FIDELITY_NOISE_FLOOR * values.iter().cloned().fold(1.0, f64::max);
    let root_sum: f64 = values.iter().filter(|&&v| v > floor).map(|&v| v.sqrt()).sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0))
}

pub fn werner_state(p: f64, base: &Ket) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("Werner weight p = {p} outside [0, 1]")));
    }
    if base.dim() != 4 || base.basis().arms() != 2 {
        return Err(Error::invalid("Werner base must be a two-qubit ket"));
    }
    base.density().mix(&DensityMatrix::maximally_mixed(base.basis().clone()), 1.0 - p)
}

/// Haar-random pure state on `basis` (normalized complex Gaussian vector).
pub fn random_pure_state<R: Rng + ?Sized>(basis: Basis, rng: &mut R) -> Ket {
    let n = basis.len();
    let amps = CVector::from_fn(n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    Ket::normalized(basis, amps).expect("Gaussian vector is nonzero with probability one")
}

/// Random density matrix `G G† / Tr(G G†)` from an `n × rank` complex Gaussian `G`.
pub fn random_density_matrix<R: Rng + ?Sized>(basis: Basis, rank: usize, rng: &mut R) -> DensityMatrix {
    let n = basis.len();
    let rank = rank.clamp(1, n);
    let g = CMatrix::from_fn(n, rank, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let mut m = &g * g.adjoint();
    let tr = m.trace().re;
    m /= c(tr, 0.0);
    DensityMatrix::new(basis, hermitize(&m)).expect("Wishart matrix is physical")
}

/// Closest unit-trace positive semidefinite matrix in Frobenius norm.
///
/// Eigenvalues are projected onto the probability simplex (shift, then clip at
/// zero); eigenvectors are kept.
pub fn nearest_physical(basis: Basis, matrix: &CMatrix) -> Result<DensityMatrix> {
    check_square(&basis, matrix)?;
    let herm = hermitian_deviation(matrix);
    let scale = matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if herm > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(herm));
    }
    let (values, vectors) = eigh(matrix);
    let projected = project_to_simplex(values.as_slice());
    DensityMatrix::new(basis, from_eigen(&projected, &vectors))
}

/// Euclidean projection of `v` onto `{x : x ≥ 0, Σx = 1}`.
pub(crate) fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        cumulative += x;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if x - candidate > 0.0 {
            shift = candidate;
        }
    }
    v.iter().map(|&x| (x - shift).max(0.0)).collect()
}

pub(crate) fn format_complex(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:?}{}{:?}i", z.re, sign, z.im.abs())
}

pub(crate) fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let body = s
        .trim()
        .strip_suffix('i')
        .ok_or_else(|| format!("complex entry `{s}` must end in `i`"))?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'))
        .ok_or_else(|| format!("complex entry `{s}` has no imaginary part"))?;
    let re: f64 = body[..split].parse().map_err(|e| format!("real part of `{s}`: {e}"))?;
    let im: f64 = body[split..].parse().map_err(|e| format!("imaginary part of `{s}`: {e}"))?;
    Ok(c(re, im))
}

/// Parses the text matrix format without physicality checks.
pub fn parse_matrix_text(text: &str, origin: &str) -> Result<(Basis, CMatrix)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| Error::parse(origin, 1, "empty matrix file"))?;
    let basis_str = header
        .trim()
        .strip_prefix("#basis=")
        .ok_or_else(|| Error::parse(origin, hline + 1, "expected `#basis=` header"))?;
    let basis: Basis = basis_str
        .parse()
        .map_err(|e: Error| Error::parse(origin, hline + 1, e.to_string()))?;
    let n = basis.len();
    let mut matrix = CMatrix::zeros(n, n);
    let mut row = 0;
    for (ln, line) in lines {
        if row >= n {
            return Err(Error::parse(origin, ln + 1, format!("more than {n} rows")));
        }
        let entries: Vec<&str> = line.split(',').collect();
        if entries.len() != n {
            return Err(Error::parse(
                origin,
                ln + 1,
                format!("expected {n} entries, found {}", entries.len()),
            ));
        }
        for (j, e) in entries.iter().enumerate() {
            matrix[(row, j)] = parse_complex(e).map_err(|m| Error::parse(origin, ln + 1, m))?;
        }
        row += 1;
    }
    if row != n {
        return Err(Error::parse(origin, 0, format!("expected {n} rows, found {row}")));
    }
    Ok((basis, matrix))
}
