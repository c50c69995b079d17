//! Nonlinear channel identification.
//!
//! The receiver holds the transmitted reference `x` and the received `y` and
//! fits the replica `ŷ_n = Σ_ℓ conj(ĥ_ℓ) f̂(x_{n-ℓ})` by alternating:
//!
//! 1. a closed-form Wiener solve for `ĥ` with the neuron fixed, normalized to
//!    `‖ĥ‖ = 1`;
//! 2. one normalized-LMS sweep over the block for the neuron with `ĥ` fixed.
//!
//! The same block is reused on every iteration. The factorization is only
//! identifiable up to a real scale shared between `f̂` and `ĥ`; the unit-norm
//! constraint pins the magnitude and [`estimate_channel`] pins the sign so
//! that `f̂` is positive on average.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::channel::{fir_conj, AmplitudeNonlinearity, FirChannel};
use crate::csv_io;
use crate::dct_neuron::{self, CosineFeatures, DctNeuron, FeatureMatrix};
use crate::error::{Error, Result};
use crate::signal::TimeSignal;

/// Reported in place of `-inf` dB for an exact match.
pub const NMSE_FLOOR_DB: f64 = -300.0;
/// Largest accepted condition number of the regressor autocorrelation.
pub const MAX_CONDITION: f64 = 1e12;
/// Minimum samples per tap accepted by the Wiener solve.
pub const MIN_SAMPLES_PER_TAP: usize = 10;

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_N_ITER: usize = 30;
pub const DEFAULT_TAPS: usize = 3;

/// Unit-norm estimate of the FIR taps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub taps: Vec<Complex64>,
}

impl ChannelEstimate {
    /// `[1, 0, ..., 0]`.
    pub fn delta(taps: usize) -> Self {
        let mut v = vec![Complex64::new(0.0, 0.0); taps.max(1)];
        v[0] = Complex64::new(1.0, 0.0);
        Self { taps: v }
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            taps: self.taps.iter().map(|t| t * factor).collect(),
        }
    }

    pub fn frequency_response(&self, n: usize) -> Vec<Complex64> {
        crate::channel::frequency_response(&self.taps, n)
    }

    pub fn to_fir(&self) -> FirChannel {
        FirChannel {
            taps: self.taps.clone(),
        }
    }

    /// CSV with columns `tap,re,im`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("tap,re,im\n");
        for (l, t) in self.taps.iter().enumerate() {
            writeln!(out, "{l},{},{}", t.re, t.im).unwrap();
        }
        out
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R, source_name: &str) -> Result<Self> {
        let table = csv_io::read_numeric(reader, source_name, 3)?;
        let mut taps = Vec::with_capacity(table.rows.len());
        for (line, row) in table.rows {
            if row[0] != taps.len() as f64 {
                return Err(Error::parse(source_name, line, "tap indices must run 0, 1, 2, ..."));
            }
            taps.push(Complex64::new(row[1], row[2]));
        }
        if taps.is_empty() {
            return Err(Error::parse(source_name, 1, "no taps"));
        }
        Ok(Self { taps })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub alpha: f64,
    pub n_iter: usize,
    pub q_count: usize,
    pub n_dct: usize,
    pub taps: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            n_iter: DEFAULT_N_ITER,
            q_count: dct_neuron::DEFAULT_Q,
            n_dct: dct_neuron::DEFAULT_N_DCT,
            taps: DEFAULT_TAPS,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha {} must be positive", self.alpha)));
        }
        if self.n_iter == 0 || self.taps == 0 {
            return Err(Error::Parameter("n_iter and taps must be positive".into()));
        }
        DctNeuron::zeros(self.q_count, self.n_dct)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub neuron: DctNeuron,
    pub channel: ChannelEstimate,
    /// Mean `|ε_n|²` of each iteration's LMS sweep.
    pub mse_trace: Vec<f64>,
    pub samples_used: usize,
}

impl EstimationResult {
    pub fn mse_trace_csv(&self) -> String {
        let mut out = String::from("iteration,mse\n");
        for (i, m) in self.mse_trace.iter().enumerate() {
            writeln!(out, "{},{m}", i + 1).unwrap();
        }
        out
    }

    /// Writes `<prefix>_neuron.csv`, `<prefix>_channel.csv` and `<prefix>_mse.csv`.
    pub fn write_csv_files(&self, dir: &Path, prefix: &str) -> Result<()> {
        csv_io::write_file(
            &dir.join(format!("{prefix}_neuron.csv")),
            self.neuron.to_csv_string().as_bytes(),
        )?;
        csv_io::write_file(
            &dir.join(format!("{prefix}_channel.csv")),
            self.channel.to_csv_string().as_bytes(),
        )?;
        csv_io::write_file(&dir.join(format!("{prefix}_mse.csv")), self.mse_trace_csv().as_bytes())
    }
}

/// Magnitude features and unit phasors of the reference, computed once.
struct Reference {
    features: Vec<CosineFeatures>,
    phases: Vec<Complex64>,
}

impl Reference {
    fn new(reference: &TimeSignal, q_count: usize, n_dct: usize) -> Result<Self> {
        let mut features = Vec::with_capacity(reference.len());
        let mut phases = Vec::with_capacity(reference.len());
        for &x in &reference.samples {
            let r = x.norm();
            features.push(dct_neuron::cosine_features(r, q_count, n_dct)?);
            phases.push(if r > 0.0 { x / r } else { Complex64::new(1.0, 0.0) });
        }
        Ok(Self { features, phases })
    }

    /// `f̂(x_n)`.
    fn neuron_output(&self, neuron: &DctNeuron) -> Vec<Complex64> {
        self.features
            .iter()
            .zip(&self.phases)
            .map(|(c, p)| p * c.dot(neuron.coeffs()))
            .collect()
    }
}

fn check_aligned(reference: &TimeSignal, received: &TimeSignal, min: usize) -> Result<()> {
    if received.len() != reference.len() {
        return Err(Error::InputLength {
            expected: reference.len(),
            got: received.len(),
        });
    }
    if reference.len() < min {
        return Err(Error::InputLength {
            expected: min,
            got: reference.len(),
        });
    }
    Ok(())
}

/// Closed-form `ĥ = R⁻¹ r` with `R = mean(u uᴴ)`, `r = mean(u y*)` and
/// `u_n = [f̂(x_n), ..., f̂(x_{n-L+1})]`, rescaled to unit norm.
pub fn wiener_solve(
    reference: &TimeSignal,
    received: &TimeSignal,
    neuron: &DctNeuron,
    taps: usize,
) -> Result<ChannelEstimate> {
    if taps == 0 {
        return Err(Error::Parameter("channel length must be at least 1".into()));
    }
    check_aligned(reference, received, MIN_SAMPLES_PER_TAP * taps)?;
    let refs = Reference::new(reference, neuron.q_count(), neuron.n_dct())?;
    wiener_from_output(&refs.neuron_output(neuron), &received.samples, taps)
}

fn wiener_from_output(fx: &[Complex64], y: &[Complex64], taps: usize) -> Result<ChannelEstimate> {
    let n = fx.len();
    let mut r_mat = DMatrix::<Complex64>::zeros(taps, taps);
    let mut r_vec = DVector::<Complex64>::zeros(taps);
    let lagged = |t: usize, l: usize| if t >= l { fx[t - l] } else { Complex64::new(0.0, 0.0) };
    for t in 0..n {
        for i in 0..taps {
            let ui = lagged(t, i);
            r_vec[i] += ui * y[t].conj();
            for j in i..taps {
                r_mat[(i, j)] += ui * lagged(t, j).conj();
            }
        }
    }
    for i in 0..taps {
        for j in 0..i {
            r_mat[(i, j)] = r_mat[(j, i)].conj();
        }
    }
    let inv_n = 1.0 / n as f64;
    r_mat *= Complex64::new(inv_n, 0.0);
    r_vec *= Complex64::new(inv_n, 0.0);

    let eig = SymmetricEigen::new(r_mat.clone()).eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(max > 0.0) || condition > MAX_CONDITION {
        return Err(Error::DegenerateEstimate { condition });
    }
    let chol = Cholesky::new(r_mat).ok_or(Error::DegenerateEstimate { condition })?;
    let h = chol.solve(&r_vec);
    let norm = h.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::DegenerateEstimate { condition });
    }
    Ok(ChannelEstimate {
        taps: h.iter().map(|v| v / norm).collect(),
    })
}

/// One sequential LMS sweep over the block. Returns the updated neuron and
/// the sweep's mean `|ε_n|²` (a-priori errors).
pub fn lms_pass(
    reference: &TimeSignal,
    received: &TimeSignal,
    channel: &ChannelEstimate,
    neuron: &DctNeuron,
    alpha: f64,
) -> Result<(DctNeuron, f64)> {
    check_aligned(reference, received, 1)?;
    if channel.is_empty() {
        return Err(Error::Parameter("empty channel estimate".into()));
    }
    let refs = Reference::new(reference, neuron.q_count(), neuron.n_dct())?;
    let mut neuron = neuron.clone();
    let mse = sweep(&refs, &received.samples, channel, &mut neuron, alpha)?;
    Ok((neuron, mse))
}

fn sweep(
    refs: &Reference,
    y: &[Complex64],
    channel: &ChannelEstimate,
    neuron: &mut DctNeuron,
    alpha: f64,
) -> Result<f64> {
    let lags = channel.len();
    let q = neuron.q_count();
    let mut fm = FeatureMatrix {
        columns: vec![CosineFeatures::zeros(q); lags],
    };
    let mut phases = vec![Complex64::new(0.0, 0.0); lags];
    let mut total = 0.0;
    for (n, &yn) in y.iter().enumerate() {
        for l in 0..lags {
            if n >= l {
                fm.columns[l].values.copy_from_slice(&refs.features[n - l].values);
                phases[l] = refs.phases[n - l];
            } else {
                fm.columns[l].values.iter_mut().for_each(|v| *v = 0.0);
                phases[l] = Complex64::new(0.0, 0.0);
            }
        }
        let err = yn - neuron.replica(&fm, &channel.taps, &phases);
        total += err.norm_sqr();
        neuron.lms_update(&fm, &channel.taps, &phases, err, alpha)?;
    }
    Ok(total / y.len() as f64)
}

/// Alternating Wiener / LMS identification over one block.
pub fn estimate_channel(
    reference: &TimeSignal,
    received: &TimeSignal,
    cfg: &EstimatorConfig,
) -> Result<EstimationResult> {
    cfg.validate()?;
    check_aligned(reference, received, MIN_SAMPLES_PER_TAP * cfg.taps)?;
    let refs = Reference::new(reference, cfg.q_count, cfg.n_dct)?;
    let mut neuron = DctNeuron::identity(cfg.q_count, cfg.n_dct)?;
    let mut channel = ChannelEstimate::delta(cfg.taps);
    let mut mse_trace = Vec::with_capacity(cfg.n_iter);
    for _ in 0..cfg.n_iter {
        channel = wiener_from_output(&refs.neuron_output(&neuron), &received.samples, cfg.taps)?;
        mse_trace.push(sweep(&refs, &received.samples, &channel, &mut neuron, cfg.alpha)?);
    }
    let (neuron, channel) = canonical_sign(neuron, channel);
    Ok(EstimationResult {
        neuron,
        channel,
        mse_trace,
        samples_used: reference.len(),
    })
}

/// Flips `(f̂, ĥ)` to `(-f̂, -ĥ)` when `f̂` is negative on average over
/// `[0, 1]`. The composite response is unchanged.
pub fn canonical_sign(neuron: DctNeuron, channel: ChannelEstimate) -> (DctNeuron, ChannelEstimate) {
    let mean: f64 = neuron.sample_grid(256).iter().map(|(_, v)| v).sum();
    if mean < 0.0 {
        (neuron.scaled(-1.0), channel.scaled(-1.0))
    } else {
        (neuron, channel)
    }
}

fn to_db(ratio: f64) -> f64 {
    if ratio <= 0.0 {
        NMSE_FLOOR_DB
    } else {
        (10.0 * ratio.log10()).max(NMSE_FLOOR_DB)
    }
}

/// NMSE of `f̂` against `f` on a uniform grid, folded over the sign.
pub fn nmse_nonlinearity(neuron: &DctNeuron, truth: &AmplitudeNonlinearity, grid_points: usize) -> Result<f64> {
    if grid_points < 2 {
        return Err(Error::Parameter("need at least two grid points".into()));
    }
    let mut err_pos = 0.0;
    let mut err_neg = 0.0;
    let mut energy = 0.0;
    for r in dct_neuron::uniform_grid(grid_points) {
        let f = truth.amplitude(r)?;
        let g = neuron.evaluate_unchecked(r);
        err_pos += (g - f).powi(2);
        err_neg += (-g - f).powi(2);
        energy += f * f;
    }
    if energy == 0.0 {
        return Err(Error::UndefinedMetric("reference nonlinearity is identically zero"));
    }
    Ok(to_db(err_pos.min(err_neg) / energy))
}

/// NMSE between the estimated composite `ĥᴴ f̂(x)` and the true `hᴴ f(x)`
/// over `probe`.
pub fn combined_nmse(
    neuron: &DctNeuron,
    channel_est: &ChannelEstimate,
    truth_f: &AmplitudeNonlinearity,
    truth_h: &FirChannel,
    probe: &TimeSignal,
) -> Result<f64> {
    let est_in = probe
        .samples
        .iter()
        .map(|&x| neuron.evaluate_complex(x))
        .collect::<Result<Vec<_>>>()?;
    let true_in = probe
        .samples
        .iter()
        .map(|&x| crate::channel::apply_nonlinearity(truth_f, x))
        .collect::<Result<Vec<_>>>()?;
    let a = fir_conj(&channel_est.taps, &est_in);
    let b = fir_conj(&truth_h.taps, &true_in);
    let energy: f64 = b.iter().map(|v| v.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::UndefinedMetric("probe produces no received energy"));
    }
    let err: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum();
    Ok(to_db(err / energy))
}
