//! Two-qubit state reconstruction from the 16 product-projector coincidence counts.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::optimize::{minimize, BfgsOptions};
use super::poisson_sample;
use crate::error::{Error, Result};
use crate::hilbert::{
    bell_state, c, eigh, fidelity, hermitize, nearest_physical, Basis, BellKind, CMatrix,
    DensityMatrix,
};
use crate::oam_optics::{tomography_settings, MeasurementSetting, TOMOGRAPHY_LABELS};

/// Expected counts below this floor are clamped before taking logarithms.
const LIKELIHOOD_FLOOR: f64 = 1e-12;

/// Coincidence counts indexed by (arm-A state, arm-B state) in tomography-basis order.
#[derive(Clone, Debug, PartialEq)]
pub struct CountTable16 {
    counts: [[f64; 4]; 4],
    pub integration_time_s: f64,
}

impl CountTable16 {
    pub fn new(counts: [[f64; 4]; 4], integration_time_s: f64) -> Result<Self> {
        if counts.iter().flatten().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("counts must be finite and non-negative"));
        }
        if !(integration_time_s >= 0.0) {
            return Err(Error::invalid("integration time must be non-negative"));
        }
        Ok(CountTable16 {
            counts,
            integration_time_s,
        })
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.counts[a][b]
    }

    pub fn counts(&self) -> &[[f64; 4]; 4] {
        &self.counts
    }

    /// Row-major, matching [`tomography_settings`].
    pub fn flat(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for a in 0..4 {
            for b in 0..4 {
                out[4 * a + b] = self.counts[a][b];
            }
        }
        out
    }

    pub fn total(&self) -> f64 {
        self.flat().iter().sum()
    }

    pub fn scaled(&self, k: f64) -> Self {
        CountTable16 {
            counts: self.counts.map(|row| row.map(|v| v * k)),
            integration_time_s: self.integration_time_s,
        }
    }

    /// Per-setting subtraction of a background run, clipped at zero.
    pub fn subtract_background(&self, background: &CountTable16) -> Self {
        let mut counts = self.counts;
        for (a, row) in counts.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = (*v - background.counts[a][b]).max(0.0);
            }
        }
        CountTable16 {
            counts,
            integration_time_s: self.integration_time_s,
        }
    }

    /// Independent Poisson draw around every entry.
    pub fn poisson_resample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        CountTable16 {
            counts: self.counts.map(|row| row.map(|v| poisson_sample(v, rng))),
            integration_time_s: self.integration_time_s,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("#integration_time_s={:?}\n", self.integration_time_s);
        out.push_str("arm_a\\arm_b");
        for l in TOMOGRAPHY_LABELS {
            write!(out, ",{l}").unwrap();
        }
        out.push('\n');
        for (a, row) in self.counts.iter().enumerate() {
            out.push_str(TOMOGRAPHY_LABELS[a]);
            for v in row {
                write!(out, ",{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let mut time = 0.0;
        let mut rows: Vec<[f64; 4]> = Vec::new();
        let mut saw_header = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                match h.split_once('=') {
                    Some(("integration_time_s", v)) => {
                        time = v
                            .trim()
                            .parse()
                            .map_err(|e| Error::parse(origin, line_no, format!("bad integration time: {e}")))?;
                    }
                    _ => return Err(Error::parse(origin, line_no, format!("unknown header `{line}`"))),
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if !saw_header {
                if fields.len() != 5 || fields[1..] != TOMOGRAPHY_LABELS {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        format!("header must name the columns {}", TOMOGRAPHY_LABELS.join(",")),
                    ));
                }
                saw_header = true;
                continue;
            }
            let a = rows.len();
            if a >= 4 {
                return Err(Error::parse(origin, line_no, "more than four data rows"));
            }
            if fields.len() != 5 {
                return Err(Error::parse(origin, line_no, format!("expected 5 fields, found {}", fields.len())));
            }
            if fields[0] != TOMOGRAPHY_LABELS[a] {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!("row label `{}` should be `{}`", fields[0], TOMOGRAPHY_LABELS[a]),
                ));
            }
            let mut row = [0.0; 4];
            for (k, f) in fields[1..].iter().enumerate() {
                let v: f64 = f
                    .parse()
                    .map_err(|e| Error::parse(origin, line_no, format!("column {}: {e}", k + 2)))?;
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::parse(origin, line_no, format!("column {}: negative or non-finite count", k + 2)));
                }
                row[k] = v;
            }
            rows.push(row);
        }
        if rows.len() != 4 {
            return Err(Error::parse(origin, 0, format!("expected 4 data rows, found {}", rows.len())));
        }
        CountTable16::new([rows[0], rows[1], rows[2], rows[3]], time)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, &path.display().to_string())
    }
}

/// Born-rule forward model `scale · Tr(ρ · P_a ⊗ P_b)` for 16 settings in row-major order.
pub fn expected_counts_for(rho: &DensityMatrix, settings: &[MeasurementSetting], scale: f64) -> Result<CountTable16> {
    if settings.len() != 16 {
        return Err(Error::invalid(format!("need 16 settings, got {}", settings.len())));
    }
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: rho.dim(),
        });
    }
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::invalid("scale must be finite and non-negative"));
    }
    let mut counts = [[0.0; 4]; 4];
    for (k, s) in settings.iter().enumerate() {
        counts[k / 4][k % 4] = (scale * rho.expectation(&s.projector())).max(0.0);
    }
    CountTable16::new(counts, 0.0)
}

/// [`expected_counts_for`] with the standard tomography settings.
pub fn expected_counts(rho: &DensityMatrix, scale: f64) -> Result<CountTable16> {
    expected_counts_for(rho, &tomography_settings(), scale)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TomographyMethod {
    Linear,
    Mle,
}

impl std::fmt::Display for TomographyMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TomographyMethod::Linear => "linear",
            TomographyMethod::Mle => "mle",
        })
    }
}

#[derive(Clone, Debug)]
pub struct TomographyResult {
    /// Physical estimate (repaired for the linear method).
    pub rho: DensityMatrix,
    pub method: TomographyMethod,
    /// Unrepaired linear-inversion matrix.
    pub raw: Option<CMatrix>,
    pub log_likelihood: Option<f64>,
    pub fidelity_to_ideal: f64,
    pub fidelity_std: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Log-likelihood after each accepted optimizer step.
    pub likelihood_trace: Vec<f64>,
}

pub const SUMMARY_HEADER: &str = "fidelity,std,loglik";

impl TomographyResult {
    pub fn to_text(&self) -> String {
        let mut out = format!("#method={}\n", self.method);
        out.push_str(&self.rho.to_text());
        out.push_str(SUMMARY_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{x:?}"));
        writeln!(out, "{:?},{},{}", self.fidelity_to_ideal, opt(self.fidelity_std), opt(self.log_likelihood)).unwrap();
        out
    }

    /// Reads back the matrix and summary written by [`TomographyResult::to_text`].
    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().unwrap_or("");
        let method = match first.trim() {
            "#method=linear" => TomographyMethod::Linear,
            "#method=mle" => TomographyMethod::Mle,
            other => return Err(Error::parse(origin, 1, format!("expected `#method=...`, found `{other}`"))),
        };
        let rest: Vec<&str> = lines.collect();
        let split = rest
            .iter()
            .position(|l| l.trim() == SUMMARY_HEADER)
            .ok_or_else(|| Error::parse(origin, 0, "missing summary header"))?;
        let matrix_text = rest[..split].join("\n");
        let rho = DensityMatrix::from_text(&matrix_text, origin)?;
        let summary_line = split + 3;
        let fields: Vec<&str> = rest
            .get(split + 1)
            .ok_or_else(|| Error::parse(origin, summary_line, "missing summary values"))?
            .split(',')
            .map(str::trim)
            .collect();
        if fields.len() != 3 {
            return Err(Error::parse(origin, summary_line, "summary needs three fields"));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s == "nan" {
                return Ok(None);
            }
            s.parse::<f64>()
                .map(Some)
                .map_err(|e| Error::parse(origin, summary_line, e.to_string()))
        };
        Ok(TomographyResult {
            rho,
            method,
            raw: None,
            log_likelihood: num(fields[2])?,
            fidelity_to_ideal: num(fields[0])?.unwrap_or(f64::NAN),
            fidelity_std: num(fields[1])?,
            iterations: 0,
            converged: true,
            gradient_norm: 0.0,
            likelihood_trace: Vec::new(),
        })
    }
}

fn ideal() -> DensityMatrix {
    bell_state(BellKind::PhiPlus).density()
}

/// Pauli-product operator basis `σ_i ⊗ σ_j / 4`, with `i, j` over `I, X, Y, Z`.
fn pauli_basis() -> Vec<CMatrix> {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let paulis = [
        CMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        CMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ];
    let mut out = Vec::with_capacity(16);
    for a in &paulis {
        for b in &paulis {
            out.push(a.kronecker(b) * c(0.25, 0.0));
        }
    }
    out
}

/// Direct inversion of the 16×16 real system relating Pauli coefficients to counts.
pub fn tomo_linear(table: &CountTable16) -> Result<TomographyResult> {
    let settings = tomography_settings();
    let ops = pauli_basis();
    let projectors: Vec<CMatrix> = settings.iter().map(|s| s.projector()).collect();
    let system = DMatrix::<f64>::from_fn(16, 16, |s, k| (&ops[k] * &projectors[s]).trace().re);
    let rhs = DVector::from_row_slice(&table.flat());
    let x = system
        .lu()
        .solve(&rhs)
        .expect("tomography projectors are informationally complete");
    if !(x[0] > 0.0) {
        return Err(Error::estimator("count table has no positive total; cannot normalize"));
    }
    let mut raw = CMatrix::zeros(4, 4);
    for (k, op) in ops.iter().enumerate() {
        raw += op * c(x[k] / x[0], 0.0);
    }
    let raw = hermitize(&raw);
    let rho = nearest_physical(Basis::two_qubit(), &raw)?;
    let fidelity_to_ideal = fidelity(&rho, &ideal())?;
    Ok(TomographyResult {
        rho,
        method: TomographyMethod::Linear,
        raw: Some(raw),
        log_likelihood: None,
        fidelity_to_ideal,
        fidelity_std: None,
        iterations: 0,
        converged: true,
        gradient_norm: 0.0,
        likelihood_trace: Vec::new(),
    })
}

/// Lower-triangular `T` from its 16 real parameters: 4 real diagonal entries,
/// then real and imaginary parts of the 6 entries below the diagonal.
fn t_from_params(p: &DVector<f64>) -> CMatrix {
    let mut t = CMatrix::zeros(4, 4);
    let mut k = 4;
    for i in 0..4 {
        t[(i, i)] = c(p[i], 0.0);
        for j in 0..i {
            t[(i, j)] = c(p[k], p[k + 1]);
            k += 2;
        }
    }
    t
}

fn params_from_t(t: &CMatrix) -> DVector<f64> {
    let mut p = DVector::zeros(16);
    let mut k = 4;
    for i in 0..4 {
        p[i] = t[(i, i)].re;
        for j in 0..i {
            p[k] = t[(i, j)].re;
            p[k + 1] = t[(i, j)].im;
            k += 2;
        }
    }
    p
}

/// Weight of `I/4` blended into a start point so its Cholesky factor exists.
const START_MIXING: f64 = 1e-4;

/// Lower-triangular `T` with `T†T ∝ ρ`, via Cholesky of the index-reversed matrix.
fn t_from_density(rho: &CMatrix) -> CMatrix {
    let n = rho.nrows();
    let mixed = rho * c(1.0 - START_MIXING, 0.0) + CMatrix::identity(n, n) * c(START_MIXING / n as f64, 0.0);
    let rev = CMatrix::from_fn(n, n, |i, j| mixed[(n - 1 - i, n - 1 - j)]);
    let l = rev.cholesky().expect("full-rank start point").l();
    // T = J L† J is lower triangular and T†T = J L L† J = ρ
    let lh = l.adjoint();
    CMatrix::from_fn(n, n, |i, j| lh[(n - 1 - i, n - 1 - j)])
}

struct Likelihood {
    projectors: Vec<CMatrix>,
    counts: [f64; 16],
    total: f64,
}

impl Likelihood {
    /// Profiled Poisson log-likelihood (overall rate at its optimum) and its
    /// gradient with respect to `ρ`.
    fn eval(&self, rho: &CMatrix) -> (f64, CMatrix) {
        let probs: Vec<f64> = self
            .projectors
            .iter()
            .map(|p| (rho * p).trace().re.max(LIKELIHOOD_FLOOR))
            .collect();
        let sum_p: f64 = probs.iter().sum();
        let mut ll = -self.total * sum_p.ln();
        let mut grad = CMatrix::zeros(4, 4);
        for (s, p) in self.projectors.iter().enumerate() {
            let n = self.counts[s];
            if n > 0.0 {
                ll += n * probs[s].ln();
            }
            grad += p * c(n / probs[s] - self.total / sum_p, 0.0);
        }
        (ll, grad)
    }
}

/// Maximum-likelihood reconstruction over physical states `ρ = T†T / Tr(T†T)`.
///
/// Without `init`, the search starts from the linear-inversion estimate. A run
/// that misses the gradient tolerance is repeated from the maximally mixed state.
///
/// The result carries `converged = false` with the best iterate if the gradient
/// tolerance is not met within the iteration budget.
pub fn tomo_mle(table: &CountTable16, init: Option<&DensityMatrix>) -> Result<TomographyResult> {
    let total = table.total();
    if !(total > 0.0) {
        return Err(Error::estimator("count table has no positive entries"));
    }
    let like = Likelihood {
        projectors: tomography_settings().iter().map(|s| s.projector()).collect(),
        counts: table.flat(),
        total,
    };
    // the T†T parametrisation is nearly flat close to rank-deficient states,
    // so a start from the maximally mixed state can stall on a plateau
    let start = match init {
        Some(r) => {
            if r.dim() != 4 {
                return Err(Error::DimensionMismatch {
                    expected: 4,
                    got: r.dim(),
                });
            }
            t_from_density(r.matrix())
        }
        None => t_from_density(tomo_linear(table)?.rho.matrix()),
    };

    // objective scaled by 1/total so the gradient tolerance is count-independent
    let objective = |p: &DVector<f64>| -> (f64, DVector<f64>) {
        let t = t_from_params(p);
        let a = t.adjoint() * &t;
        let tr = a.trace().re;
        if !(tr > 0.0) {
            return (f64::INFINITY, DVector::zeros(16));
        }
        let rho = &a / c(tr, 0.0);
        let (ll, m) = like.eval(&rho);
        let mr = (&m * &rho).trace().re;
        let g = (m - CMatrix::identity(4, 4) * c(mr, 0.0)) / c(tr, 0.0);
        let gt = g * t.adjoint();
        let mut grad = DVector::zeros(16);
        let mut k = 4;
        for i in 0..4 {
            grad[i] = 2.0 * gt[(i, i)].re;
            for j in 0..i {
                grad[k] = 2.0 * gt[(j, i)].re;
                grad[k + 1] = -2.0 * gt[(j, i)].im;
                k += 2;
            }
        }
        (-ll / total, -grad / total)
    };

    let mut outcome = minimize(objective, params_from_t(&start), BfgsOptions::default());
    if !outcome.converged {
        let retry = minimize(
            objective,
            params_from_t(&(CMatrix::identity(4, 4) * c(0.5, 0.0))),
            BfgsOptions::default(),
        );
        if retry.value < outcome.value || retry.converged {
            outcome = retry;
        }
    }

    let t = t_from_params(&outcome.x);
    let a = t.adjoint() * &t;
    let m = hermitize(&(&a / c(a.trace().re, 0.0)));
    let rho = DensityMatrix::new(Basis::two_qubit(), m)?;
    let (ll, _) = like.eval(rho.matrix());
    let fidelity_to_ideal = fidelity(&rho, &ideal())?;
    Ok(TomographyResult {
        rho,
        method: TomographyMethod::Mle,
        raw: None,
        log_likelihood: Some(ll),
        fidelity_to_ideal,
        fidelity_std: None,
        iterations: outcome.iterations,
        converged: outcome.converged,
        gradient_norm: outcome.gradient_norm,
        likelihood_trace: outcome.trace.iter().map(|f| -f * total).collect(),
    })
}

/// Rank of the real 16-dimensional span of the settings' projectors.
pub fn projector_rank(settings: &[MeasurementSetting]) -> usize {
    let ops = pauli_basis();
    let m = DMatrix::<f64>::from_fn(settings.len(), 16, |s, k| (&ops[k] * settings[s].projector()).trace().re);
    let sv = m.svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&v| v > 1e-10 * top).count()
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigh(m).0[0]
}
