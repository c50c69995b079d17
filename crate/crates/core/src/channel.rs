//! Ground-truth nonlinear frequency-selective channel.
//!
//! A sample `x = |x| e^{jφ}` first goes through a memoryless amplitude map
//! `f(|x|) e^{jφ}`, then through an FIR channel applied in conjugate form,
//! `y_n = Σ_ℓ conj(h_ℓ) f(x_{n-ℓ}) + w_n`, with zero history before the first
//! sample.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Read;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::csv_io;
use crate::error::{Error, Result};
use crate::signal::TimeSignal;

/// Slack allowed on the `|x| <= 1` domain before a sample is rejected.
pub const DOMAIN_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_HARD_CLIP_SATURATION: f64 = 0.5;

/// Memoryless AM-AM curve `f: [0, 1] -> [0, 1]` with `f(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum AmplitudeNonlinearity {
    Identity,
    /// `f(r) = sin(π r / 2)`.
    SoftSine,
    /// Ideal limiter `f(r) = min(r / ρ, 1)`.
    HardClip { saturation_input: f64 },
    /// Piecewise-linear interpolation of `(r, f(r))` knots.
    Tabulated(Tabulated),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    r: Vec<f64>,
    f: Vec<f64>,
}

impl Tabulated {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Parameter("tabulated curve needs at least two knots".into()));
        }
        let (r, f): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        if r.iter().chain(f.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("tabulated curve has non-finite values".into()));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("tabulated r values must be strictly increasing".into()));
        }
        if r[0] > 0.0 || *r.last().unwrap() < 1.0 {
            return Err(Error::Parameter("tabulated r values must cover [0, 1]".into()));
        }
        let table = Self { r, f };
        let samples = table
            .r
            .iter()
            .zip(&table.f)
            .filter(|(r, _)| (0.0..=1.0).contains(*r))
            .map(|(_, f)| *f);
        if samples.into_iter().any(|v| !(-DOMAIN_TOLERANCE..=1.0 + DOMAIN_TOLERANCE).contains(&v)) {
            return Err(Error::Parameter("tabulated f values must lie in [0, 1]".into()));
        }
        if table.eval(0.0).abs() > DOMAIN_TOLERANCE {
            return Err(Error::Parameter("tabulated curve must satisfy f(0) = 0".into()));
        }
        Ok(table)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.r.iter().copied().zip(self.f.iter().copied())
    }

    fn eval(&self, r: f64) -> f64 {
        let idx = self.r.partition_point(|&knot| knot <= r);
        let hi = idx.clamp(1, self.r.len() - 1);
        let lo = hi - 1;
        let t = (r - self.r[lo]) / (self.r[hi] - self.r[lo]);
        self.f[lo] + t * (self.f[hi] - self.f[lo])
    }

    /// Two-column CSV `r,f` with a header row.
    pub fn from_csv_reader<R: Read>(reader: R, source_name: &str) -> Result<Self> {
        let table = csv_io::read_numeric(reader, source_name, 2)?;
        Self::new(table.rows.into_iter().map(|(_, v)| (v[0], v[1])).collect())
    }

    pub fn from_csv_file(path: &Path) -> Result<Self> {
        let table = csv_io::read_numeric_file(path, 2)?;
        Self::new(table.rows.into_iter().map(|(_, v)| (v[0], v[1])).collect())
    }
}

impl AmplitudeNonlinearity {
    pub fn hard_clip(saturation_input: f64) -> Result<Self> {
        if !(saturation_input > 0.0 && saturation_input <= 1.0) {
            return Err(Error::Parameter(format!(
                "hard-clip saturation {saturation_input} outside (0, 1]"
            )));
        }
        Ok(Self::HardClip { saturation_input })
    }

    /// Amplitude response at magnitude `r`.
    pub fn amplitude(&self, r: f64) -> Result<f64> {
        let r = check_magnitude(r)?;
        Ok(match self {
            Self::Identity => r,
            Self::SoftSine => (FRAC_PI_2 * r).sin(),
            Self::HardClip { saturation_input } => (r / saturation_input).min(1.0),
            Self::Tabulated(t) => t.eval(r),
        })
    }

    /// Short selector name used in CSV output.
    pub fn label(&self) -> String {
        match self {
            Self::Identity => "identity".into(),
            Self::SoftSine => "soft".into(),
            Self::HardClip { saturation_input } if *saturation_input == DEFAULT_HARD_CLIP_SATURATION => {
                "hard".into()
            }
            Self::HardClip { saturation_input } => format!("hard:{saturation_input}"),
            Self::Tabulated(_) => "tabulated".into(),
        }
    }
}

fn check_magnitude(r: f64) -> Result<f64> {
    if !(0.0..=1.0 + DOMAIN_TOLERANCE).contains(&r) {
        return Err(Error::Domain(format!("amplitude {r} outside [0, 1]")));
    }
    Ok(r.min(1.0))
}

/// `f(|x|) e^{j arg x}`; zero maps to zero.
pub fn apply_nonlinearity(f: &AmplitudeNonlinearity, x: Complex64) -> Result<Complex64> {
    let r = x.norm();
    let a = f.amplitude(r)?;
    if r == 0.0 {
        return Ok(Complex64::new(a, 0.0));
    }
    Ok(x * (a / r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirChannel {
    pub taps: Vec<Complex64>,
}

impl FirChannel {
    pub fn new(taps: Vec<Complex64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Parameter("channel needs at least one tap".into()));
        }
        Ok(Self { taps })
    }

    /// Single unit tap.
    pub fn identity() -> Self {
        Self {
            taps: vec![Complex64::new(1.0, 0.0)],
        }
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum()
    }

    /// `y_n = Σ_ℓ conj(h_ℓ) s_{n-ℓ}`, zero history.
    pub fn filter(&self, input: &[Complex64]) -> Vec<Complex64> {
        fir_conj(&self.taps, input)
    }

    /// Per-subcarrier gains `H_k = Σ_ℓ conj(h_ℓ) e^{-j2πkℓ/N}` matching [`filter`](Self::filter).
    pub fn frequency_response(&self, n: usize) -> Vec<Complex64> {
        frequency_response(&self.taps, n)
    }
}

pub(crate) fn fir_conj(taps: &[Complex64], input: &[Complex64]) -> Vec<Complex64> {
    (0..input.len())
        .map(|n| {
            taps.iter()
                .enumerate()
                .take(n + 1)
                .map(|(l, h)| h.conj() * input[n - l])
                .sum()
        })
        .collect()
}

pub(crate) fn frequency_response(taps: &[Complex64], n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            taps.iter()
                .enumerate()
                .map(|(l, h)| h.conj() * Complex64::from_polar(1.0, -2.0 * PI * (k * l % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// i.i.d. `CN(0, 1/L)` taps.
pub fn draw_channel<R: Rng + ?Sized>(taps: usize, rng: &mut R) -> Result<FirChannel> {
    if taps == 0 {
        return Err(Error::Parameter("channel length must be at least 1".into()));
    }
    let sigma = (0.5 / taps as f64).sqrt();
    let taps = (0..taps).map(|_| complex_gaussian(rng) * sigma).collect();
    FirChannel::new(taps)
}

/// Unit-variance-per-dimension complex normal sample.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Noise level of one realization. `sigma2` is derived from the measured
/// noiseless received power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisySnr {
    pub snr_db: f64,
    pub measured_signal_power: f64,
    pub sigma2: f64,
}

impl NoisySnr {
    pub fn from_power(snr_db: f64, measured_signal_power: f64) -> Self {
        let sigma2 = if snr_db.is_infinite() && snr_db > 0.0 {
            0.0
        } else {
            measured_signal_power / 10f64.powf(snr_db / 10.0)
        };
        Self {
            snr_db,
            measured_signal_power,
            sigma2,
        }
    }

    pub fn noiseless(measured_signal_power: f64) -> Self {
        Self::from_power(f64::INFINITY, measured_signal_power)
    }
}

/// Adds circular complex white noise of total variance `sigma2`.
pub fn add_awgn<R: Rng + ?Sized>(samples: &mut [Complex64], sigma2: f64, rng: &mut R) {
    if sigma2 <= 0.0 {
        return;
    }
    let sigma = (sigma2 / 2.0).sqrt();
    for s in samples.iter_mut() {
        *s += complex_gaussian(rng) * sigma;
    }
}

/// Applies the nonlinearity and the FIR channel without noise.
pub fn distort_and_filter(x: &TimeSignal, f: &AmplitudeNonlinearity, h: &FirChannel) -> Result<Vec<Complex64>> {
    let distorted = x
        .samples
        .iter()
        .map(|&s| apply_nonlinearity(f, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(h.filter(&distorted))
}

/// Full channel: AM-AM, FIR and AWGN at `snr_db` relative to the measured
/// power of the noiseless output. `None` means noiseless.
pub fn propagate<R: Rng + ?Sized>(
    x: &TimeSignal,
    f: &AmplitudeNonlinearity,
    h: &FirChannel,
    snr_db: Option<f64>,
    rng: &mut R,
) -> Result<(TimeSignal, NoisySnr)> {
    let mut y = distort_and_filter(x, f, h)?;
    let power = if y.is_empty() {
        0.0
    } else {
        y.iter().map(|s| s.norm_sqr()).sum::<f64>() / y.len() as f64
    };
    let noise = match snr_db {
        Some(db) => NoisySnr::from_power(db, power),
        None => NoisySnr::noiseless(power),
    };
    add_awgn(&mut y, noise.sigma2, rng);
    Ok((TimeSignal::new(y), noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_passes_through() {
        let x = Complex64::from_polar(0.7, 1.1);
        assert_eq!(apply_nonlinearity(&AmplitudeNonlinearity::Identity, x).unwrap(), x);
    }

    #[test]
    fn soft_sine_endpoint() {
        let y = apply_nonlinearity(&AmplitudeNonlinearity::SoftSine, c(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(y.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn hard_clip_values() {
        let f = AmplitudeNonlinearity::hard_clip(0.5).unwrap();
        let y = apply_nonlinearity(&f, Complex64::from_polar(0.25, FRAC_PI_4)).unwrap();
        assert_abs_diff_eq!(y.norm(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(y.arg(), FRAC_PI_4, epsilon = 1e-15);
        let y = apply_nonlinearity(&f, Complex64::from_polar(0.8, FRAC_PI_4)).unwrap();
        assert_abs_diff_eq!(y.norm(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y.arg(), FRAC_PI_4, epsilon = 1e-15);
    }

    #[test]
    fn zero_maps_to_zero() {
        for f in [
            AmplitudeNonlinearity::Identity,
            AmplitudeNonlinearity::SoftSine,
            AmplitudeNonlinearity::hard_clip(0.3).unwrap(),
        ] {
            assert_eq!(apply_nonlinearity(&f, c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        }
    }

    #[test]
    fn domain_error_above_one() {
        let err = apply_nonlinearity(&AmplitudeNonlinearity::SoftSine, c(1.0 + 1e-9, 0.0));
        assert!(matches!(err, Err(Error::Domain(_))));
        assert!(apply_nonlinearity(&AmplitudeNonlinearity::SoftSine, c(1.0 + 1e-13, 0.0)).is_ok());
    }

    #[test]
    fn hard_clip_parameter_checked() {
        assert!(AmplitudeNonlinearity::hard_clip(0.0).is_err());
        assert!(AmplitudeNonlinearity::hard_clip(1.5).is_err());
    }

    #[test]
    fn tabulated_interpolates() {
        let t = Tabulated::new(vec![(0.0, 0.0), (0.5, 0.8), (1.0, 1.0)]).unwrap();
        let f = AmplitudeNonlinearity::Tabulated(t);
        assert_abs_diff_eq!(f.amplitude(0.25).unwrap(), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(f.amplitude(0.75).unwrap(), 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(f.amplitude(1.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tabulated_validation() {
        assert!(Tabulated::new(vec![(0.0, 0.0), (0.0, 0.5), (1.0, 1.0)]).is_err());
        assert!(Tabulated::new(vec![(0.1, 0.0), (1.0, 1.0)]).is_err());
        assert!(Tabulated::new(vec![(0.0, 0.0), (0.9, 1.0)]).is_err());
        assert!(Tabulated::new(vec![(0.0, 0.1), (1.0, 1.0)]).is_err());
        assert!(Tabulated::new(vec![(0.0, 0.0), (1.0, 1.2)]).is_err());
    }

    #[test]
    fn tabulated_csv() {
        let text = "r,f\n0,0\n0.5,0.9\n1,1\n";
        let t = Tabulated::from_csv_reader(text.as_bytes(), "inline").unwrap();
        assert_eq!(t.points().count(), 3);
        let missing_header = "0,0\n1,1\n";
        assert!(matches!(
            Tabulated::from_csv_reader(missing_header.as_bytes(), "inline"),
            Err(Error::Parse { .. })
        ));
        let bad = "r,f\n0,0\n0.5,abc\n1,1\n";
        assert!(matches!(
            Tabulated::from_csv_reader(bad.as_bytes(), "inline"),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn draw_channel_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(draw_channel(1, &mut rng).unwrap().len(), 1);
        assert_eq!(draw_channel(3, &mut rng).unwrap().len(), 3);
        assert!(matches!(draw_channel(0, &mut rng), Err(Error::Parameter(_))));
    }

    #[test]
    fn drawn_channel_power_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 100_000;
        let mean = (0..draws)
            .map(|_| draw_channel(3, &mut rng).unwrap().energy())
            .sum::<f64>()
            / draws as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean power {mean}");
    }

    #[test]
    fn transparent_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = TimeSignal::new((0..32).map(|k| Complex64::from_polar(0.03 * k as f64, k as f64)).collect());
        let (y, noise) = propagate(
            &x,
            &AmplitudeNonlinearity::Identity,
            &FirChannel::identity(),
            None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(noise.sigma2, 0.0);
        assert_eq!(y.samples, x.samples);
    }

    #[test]
    fn matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x: Vec<Complex64> = (0..8)
            .map(|_| Complex64::from_polar(rng.random::<f64>(), rng.random_range(0.0..6.28)))
            .collect();
        let h = FirChannel::new(vec![c(0.6, -0.2), c(-0.3, 0.5)]).unwrap();
        let f = AmplitudeNonlinearity::SoftSine;
        let (y, _) = propagate(&TimeSignal::new(x.clone()), &f, &h, None, &mut rng).unwrap();
        for n in 0..8 {
            let mut expect = Complex64::new(0.0, 0.0);
            for l in 0..2 {
                if n >= l {
                    let s = x[n - l];
                    let fs = if s.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        s / s.norm() * (FRAC_PI_2 * s.norm()).sin()
                    };
                    expect += h.taps[l].conj() * fs;
                }
            }
            assert_abs_diff_eq!((y.samples[n] - expect).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn output_length_matches_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = draw_channel(3, &mut rng).unwrap();
        let x = TimeSignal::new(vec![c(0.3, 0.1); 100]);
        let (y, _) = propagate(&x, &AmplitudeNonlinearity::SoftSine, &h, Some(10.0), &mut rng).unwrap();
        assert_eq!(y.len(), 100);
    }

    #[test]
    fn sigma2_from_measured_power() {
        let n = NoisySnr::from_power(10.0, 0.5);
        assert_abs_diff_eq!(n.sigma2, 0.05, epsilon = 1e-15);
        let n = NoisySnr::from_power(-10.0, 2.0);
        assert_abs_diff_eq!(n.sigma2, 20.0, epsilon = 1e-12);
    }

    #[test]
    fn noise_power_calibrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 1_000_000;
        let mut samples = vec![Complex64::new(0.0, 0.0); n];
        add_awgn(&mut samples, 0.37, &mut rng);
        let measured = samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;
        assert!((measured / 0.37 - 1.0).abs() < 0.01, "measured {measured}");
        let re = samples.iter().map(|s| s.re * s.re).sum::<f64>() / n as f64;
        assert!((re / 0.185 - 1.0).abs() < 0.01);
    }

    #[test]
    fn frequency_response_single_tap() {
        let h = FirChannel::new(vec![c(0.0, 1.0)]).unwrap();
        for v in h.frequency_response(8) {
            assert_abs_diff_eq!(v.re, 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(v.im, -1.0, epsilon = 1e-15);
        }
    }
}
