//! The DCT neuron: an amplitude curve written as a short cosine expansion
//!
//! ```text
//! f̂(r) = Σ_{q=1..Q} F_q cos(π (2q-1) (2z+1) / (4 N)),   z = (1 - r) (N - 1)
//! ```
//!
//! with `r ∈ [0, 1]` the input magnitude and `N` the grid resolution. On the
//! integer grid `z = 0..N-1` the `N` basis functions are mutually orthogonal
//! and each has mean power exactly 1/2, so `Q = N` is the complete basis.
//!
//! The magnitude axis runs backwards over the index grid: `r = 1` sits at
//! `z = 0` and `r = 0` at `z = N - 1`. In `r` the basis is then close to the
//! odd quarter-wave sines `±sin((2q-1) π r / 2)`, which vanish at zero input
//! like every AM-AM curve does.
//!
//! Complex inputs keep their phase: `f̂(x) = f̂(|x|) e^{j arg x}`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use num_complex::Complex64;

use crate::channel::DOMAIN_TOLERANCE;
use crate::csv_io;
use crate::error::{Error, Result};

pub const DEFAULT_Q: usize = 6;
pub const DEFAULT_N_DCT: usize = 512;

/// Basis function `q` (1-based) at continuous grid position `z`.
pub fn basis_at_index(q: usize, z: f64, n_dct: usize) -> f64 {
    (PI * (2 * q - 1) as f64 * (2.0 * z + 1.0) / (4.0 * n_dct as f64)).cos()
}

/// Continuous grid position of magnitude `r`.
pub fn grid_position(r: f64, n_dct: usize) -> f64 {
    (1.0 - r) * (n_dct - 1) as f64
}

/// Magnitude represented by integer grid point `z`.
pub fn grid_magnitude(z: usize, n_dct: usize) -> f64 {
    if n_dct == 1 {
        return 0.0;
    }
    1.0 - z as f64 / (n_dct - 1) as f64
}

fn check_magnitude(r: f64) -> Result<f64> {
    if !(-DOMAIN_TOLERANCE..=1.0 + DOMAIN_TOLERANCE).contains(&r) {
        return Err(Error::Domain(format!("magnitude {r} outside [0, 1]")));
    }
    Ok(r.clamp(0.0, 1.0))
}

/// Cosines `c_1..c_Q` evaluated at one magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineFeatures {
    pub values: Vec<f64>,
}

impl CosineFeatures {
    pub fn zeros(q: usize) -> Self {
        Self { values: vec![0.0; q] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dot(&self, coeffs: &[f64]) -> f64 {
        self.values.iter().zip(coeffs).map(|(c, f)| c * f).sum()
    }
}

pub fn cosine_features(r: f64, q: usize, n_dct: usize) -> Result<CosineFeatures> {
    let r = check_magnitude(r)?;
    let mut values = vec![0.0; q];
    fill_features(r, n_dct, &mut values);
    Ok(CosineFeatures { values })
}

// cos((2q-1)θ) by rotating e^{jθ} in steps of e^{j2θ}; rounding error grows
// linearly with q, far below 1e-12 for q <= 4096.
fn fill_features(r: f64, n_dct: usize, out: &mut [f64]) {
    let z = grid_position(r, n_dct);
    let theta = PI * (2.0 * z + 1.0) / (4.0 * n_dct as f64);
    let step = Complex64::from_polar(1.0, 2.0 * theta);
    let mut phasor = Complex64::from_polar(1.0, theta);
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 && k % 64 == 0 {
            phasor = Complex64::from_polar(1.0, (2 * k + 1) as f64 * theta);
        }
        *slot = phasor.re;
        phasor *= step;
    }
}

/// Feature columns for lags `0..L` at one time index. A lag that falls
/// before the start of the signal has an all-zero column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<CosineFeatures>,
}

impl FeatureMatrix {
    pub fn q_count(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    pub fn lags(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DctNeuron {
    q_count: usize,
    n_dct: usize,
    coeffs: Vec<f64>,
}

impl DctNeuron {
    pub fn new(q_count: usize, n_dct: usize, coeffs: Vec<f64>) -> Result<Self> {
        if q_count == 0 || n_dct == 0 {
            return Err(Error::Parameter("Q and N_DCT must be positive".into()));
        }
        if q_count > n_dct {
            return Err(Error::Parameter(format!("Q = {q_count} exceeds N_DCT = {n_dct}")));
        }
        if coeffs.len() != q_count {
            return Err(Error::InputLength {
                expected: q_count,
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parameter("non-finite DCT coefficient".into()));
        }
        Ok(Self { q_count, n_dct, coeffs })
    }

    pub fn zeros(q_count: usize, n_dct: usize) -> Result<Self> {
        Self::new(q_count, n_dct, vec![0.0; q_count])
    }

    /// Least-squares fit of `target` over the integer grid. Orthogonality
    /// makes this a plain analysis sum scaled by `2 / N`.
    pub fn project_function<F: Fn(f64) -> f64>(target: F, q_count: usize, n_dct: usize) -> Result<Self> {
        let mut neuron = Self::zeros(q_count, n_dct)?;
        let samples: Vec<f64> = (0..n_dct).map(|z| target(grid_magnitude(z, n_dct))).collect();
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("projection target is not finite on the grid".into()));
        }
        let scale = 2.0 / n_dct as f64;
        for (q, coeff) in neuron.coeffs.iter_mut().enumerate() {
            *coeff = scale
                * samples
                    .iter()
                    .enumerate()
                    .map(|(z, t)| t * basis_at_index(q + 1, z as f64, n_dct))
                    .sum::<f64>();
        }
        Ok(neuron)
    }

    /// Projection of `f(r) = r`, the default starting point for estimation.
    pub fn identity(q_count: usize, n_dct: usize) -> Result<Self> {
        Self::project_function(|r| r, q_count, n_dct)
    }

    pub fn q_count(&self) -> usize {
        self.q_count
    }

    pub fn n_dct(&self) -> usize {
        self.n_dct
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn features(&self, r: f64) -> Result<CosineFeatures> {
        cosine_features(r, self.q_count, self.n_dct)
    }

    pub fn evaluate(&self, r: f64) -> Result<f64> {
        let r = check_magnitude(r)?;
        Ok(self.evaluate_unchecked(r))
    }

    pub(crate) fn evaluate_unchecked(&self, r: f64) -> f64 {
        // Fused feature generation and dot product, no allocation.
        let z = grid_position(r, self.n_dct);
        let theta = PI * (2.0 * z + 1.0) / (4.0 * self.n_dct as f64);
        let step = Complex64::from_polar(1.0, 2.0 * theta);
        let mut phasor = Complex64::from_polar(1.0, theta);
        let mut acc = 0.0;
        for (k, f) in self.coeffs.iter().enumerate() {
            if k > 0 && k % 64 == 0 {
                phasor = Complex64::from_polar(1.0, (2 * k + 1) as f64 * theta);
            }
            acc += f * phasor.re;
            phasor *= step;
        }
        acc
    }

    /// `f̂(|x|) e^{j arg x}` as a signed real scaling of the unit phasor.
    pub fn evaluate_complex(&self, x: Complex64) -> Result<Complex64> {
        let r = x.norm();
        let a = self.evaluate(r)?;
        if r == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        Ok(x * (a / r))
    }

    /// Evaluates on `points` uniformly spaced magnitudes covering `[0, 1]`.
    pub fn sample_grid(&self, points: usize) -> Vec<(f64, f64)> {
        uniform_grid(points)
            .map(|r| (r, self.evaluate_unchecked(r)))
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            q_count: self.q_count,
            n_dct: self.n_dct,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// `Σ_ℓ conj(ĥ_ℓ) f̂(x_{n-ℓ})` from the feature columns and the unit phasors.
    pub fn replica(&self, features: &FeatureMatrix, h_hat: &[Complex64], phases: &[Complex64]) -> Complex64 {
        features
            .columns
            .iter()
            .zip(h_hat)
            .zip(phases)
            .map(|((col, h), p)| h.conj() * p * col.dot(&self.coeffs))
            .sum()
    }

    /// Real-projected normalized LMS step:
    /// `F ← F + 4α/(QL) · Re(C (ĥ* ⊙ e^{jφ}) ε*)`.
    pub fn lms_update(
        &mut self,
        features: &FeatureMatrix,
        h_hat: &[Complex64],
        phases: &[Complex64],
        err: Complex64,
        alpha: f64,
    ) -> Result<()> {
        let lags = features.lags();
        if lags == 0 || h_hat.len() != lags || phases.len() != lags {
            return Err(Error::Parameter(format!(
                "lag mismatch: {lags} feature columns, {} taps, {} phases",
                h_hat.len(),
                phases.len()
            )));
        }
        if features.columns.iter().any(|c| c.len() != self.q_count) {
            return Err(Error::Parameter(format!(
                "feature columns must have Q = {} entries",
                self.q_count
            )));
        }
        if !(alpha > 0.0) {
            return Err(Error::Parameter(format!("step parameter {alpha} must be positive")));
        }
        let mu = lms_step(alpha, self.q_count, lags);
        let weights: Vec<Complex64> = h_hat
            .iter()
            .zip(phases)
            .map(|(h, p)| h.conj() * p * err.conj())
            .collect();
        for (q, coeff) in self.coeffs.iter_mut().enumerate() {
            let g: f64 = features
                .columns
                .iter()
                .zip(&weights)
                .map(|(col, w)| col.values[q] * w.re)
                .sum();
            *coeff += mu * g;
        }
        Ok(())
    }

    /// Writes the neuron as CSV: a `q_count,n_dct` header, its values, then one
    /// coefficient per row.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        writeln!(out, "q_count,n_dct").unwrap();
        writeln!(out, "{},{}", self.q_count, self.n_dct).unwrap();
        for c in &self.coeffs {
            writeln!(out, "{c}").unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        csv_io::write_file(path, self.to_csv_string().as_bytes())
    }

    pub fn from_csv_reader<R: Read>(mut reader: R, source_name: &str) -> Result<Self> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| Error::io(source_name, e))?;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(source_name, 1, "empty neuron file"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["q_count", "n_dct"] {
            return Err(Error::parse(source_name, 1, "expected header `q_count,n_dct`"));
        }
        let (idx, dims) = lines
            .next()
            .ok_or_else(|| Error::parse(source_name, 2, "missing dimensions row"))?;
        let dims: Vec<usize> = dims
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(source_name, idx + 1, e.to_string()))?;
        if dims.len() != 2 {
            return Err(Error::parse(source_name, idx + 1, "expected `q_count,n_dct` values"));
        }
        let coeffs = lines
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(source_name, i + 1, format!("not a number: {l:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        Self::new(dims[0], dims[1], coeffs)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, &path.display().to_string())
    }
}

/// `4α / (Q L)`: the LMS step normalized by the regressor power `QL/2`.
pub fn lms_step(alpha: f64, q_count: usize, lags: usize) -> f64 {
    4.0 * alpha / (q_count * lags) as f64
}

pub(crate) fn uniform_grid(points: usize) -> impl Iterator<Item = f64> {
    let denom = points.saturating_sub(1).max(1) as f64;
    (0..points).map(move |i| i as f64 / denom)
}
