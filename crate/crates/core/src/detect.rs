//! Compensation with an identified model.
//!
//! Two receivers are provided. The predistortion path learns an inverse
//! amplitude curve `g ≈ f̂⁻¹` that the transmitter applies before the power
//! amplifier, after which the link is linear and plain ZF equalization
//! suffices. The iterative path keeps the transmitter untouched and cancels
//! the distortion `d = f(x) - x` at the receiver by alternating hard
//! decisions with re-synthesis of the distortion from those decisions.

use num_complex::Complex64;
use rand::Rng;
use statrs::function::erf::erfc;

use crate::channel::{AmplitudeNonlinearity, FirChannel};
use crate::dct_neuron::{self, CosineFeatures, DctNeuron};
use crate::error::{Error, Result};
use crate::estimator::ChannelEstimate;
use crate::signal::{Constellation, Dft, OfdmConfig, SymbolGrid, TimeSignal};

pub const DEFAULT_DECODER_ITERATIONS: usize = 5;
pub const DEFAULT_INVERSE_Q: usize = 512;
pub const DEFAULT_INVERSE_N_DCT: usize = 512;
pub const DEFAULT_INVERSE_SAMPLES: usize = 10_000;
pub const DEFAULT_INVERSE_ALPHA: f64 = 0.01;
/// Passes over the training set. A single pass at the default step size
/// moves the high-order coefficients by well under one time constant.
pub const DEFAULT_INVERSE_SWEEPS: usize = 50;
/// Subcarriers whose response magnitude falls below this are erased.
pub const ERASURE_THRESHOLD: f64 = 1e-9;

/// A memoryless amplitude curve on `[0, 1]`. Inputs are clamped to the
/// domain so that decisions drifting slightly outside it stay usable.
pub trait AmplitudeMap {
    fn map_amplitude(&self, r: f64) -> f64;

    fn map_sample(&self, x: Complex64) -> Complex64 {
        let r = x.norm();
        if r == 0.0 {
            return x;
        }
        x * (self.map_amplitude(r.min(1.0)) / r)
    }
}

impl AmplitudeMap for DctNeuron {
    fn map_amplitude(&self, r: f64) -> f64 {
        self.evaluate_unchecked(r.clamp(0.0, 1.0))
    }
}

impl AmplitudeMap for AmplitudeNonlinearity {
    fn map_amplitude(&self, r: f64) -> f64 {
        self.amplitude(r.clamp(0.0, 1.0))
            .expect("clamped amplitude is always in range")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseConfig {
    pub q: usize,
    pub n_dct: usize,
    pub samples: usize,
    pub alpha: f64,
    pub sweeps: usize,
}

impl Default for InverseConfig {
    fn default() -> Self {
        Self {
            q: DEFAULT_INVERSE_Q,
            n_dct: DEFAULT_INVERSE_N_DCT,
            samples: DEFAULT_INVERSE_SAMPLES,
            alpha: DEFAULT_INVERSE_ALPHA,
            sweeps: DEFAULT_INVERSE_SWEEPS,
        }
    }
}

/// Transmit-side inverse of the amplitude curve. `None` passes samples
/// through untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct Predistorter {
    pub inverse: Option<DctNeuron>,
}

impl Predistorter {
    pub fn passthrough() -> Self {
        Self { inverse: None }
    }

    pub fn from_neuron(inverse: DctNeuron) -> Self {
        Self { inverse: Some(inverse) }
    }

    /// Magnitude the transmitter should emit for a desired output `r`.
    pub fn drive(&self, r: f64) -> f64 {
        match &self.inverse {
            None => r,
            Some(g) => g.map_amplitude(r).clamp(0.0, 1.0),
        }
    }

    /// Composition error `max |f(g(r)) - r|` on `points` uniform magnitudes
    /// in `[0, r_max]`.
    pub fn composition_profile<F: AmplitudeMap + ?Sized>(&self, f: &F, points: usize, r_max: f64) -> Vec<(f64, f64)> {
        dct_neuron::uniform_grid(points)
            .map(|u| {
                let r = u * r_max;
                (r, f.map_amplitude(self.drive(r)) - r)
            })
            .collect()
    }
}

/// Learns `g` with `g(f̂(r)) ≈ r` from `n_samples` uniform magnitudes using
/// the default sweep count.
pub fn learn_inverse<R: Rng + ?Sized>(
    f_hat: &DctNeuron,
    q_prime: usize,
    n_dct_prime: usize,
    n_samples: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<Predistorter> {
    learn_inverse_with(
        f_hat,
        &InverseConfig {
            q: q_prime,
            n_dct: n_dct_prime,
            samples: n_samples,
            alpha,
            sweeps: DEFAULT_INVERSE_SWEEPS,
        },
        rng,
    )
}

/// Self-supervised scalar LMS: the input feature is `c(clamp(f̂(r)))`, the
/// target is `r`, and the step is `4α/Q'`. The training set is drawn once and
/// replayed `cfg.sweeps` times in the same order. `g` starts from the
/// projection of the identity.
pub fn learn_inverse_with<R: Rng + ?Sized, F: AmplitudeMap + ?Sized>(
    f_hat: &F,
    cfg: &InverseConfig,
    rng: &mut R,
) -> Result<Predistorter> {
    if cfg.samples < cfg.q {
        return Err(Error::Parameter(format!(
            "inverse training needs at least Q' = {} samples, got {}",
            cfg.q, cfg.samples
        )));
    }
    if cfg.sweeps == 0 {
        return Err(Error::Parameter("inverse training needs at least one sweep".into()));
    }
    if !(cfg.alpha > 0.0) {
        return Err(Error::Parameter(format!("step parameter {} must be positive", cfg.alpha)));
    }
    let mut g = DctNeuron::identity(cfg.q, cfg.n_dct)?;
    let mu = dct_neuron::lms_step(cfg.alpha, cfg.q, 1);
    let mut targets = Vec::with_capacity(cfg.samples);
    let mut features: Vec<CosineFeatures> = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        let r: f64 = rng.random();
        let input = f_hat.map_amplitude(r).clamp(0.0, 1.0);
        targets.push(r);
        features.push(dct_neuron::cosine_features(input, cfg.q, cfg.n_dct)?);
    }
    let mut coeffs = g.coeffs().to_vec();
    for _ in 0..cfg.sweeps {
        for (c, &r) in features.iter().zip(&targets) {
            let err = r - c.dot(&coeffs);
            for (w, v) in coeffs.iter_mut().zip(&c.values) {
                *w += mu * err * v;
            }
        }
    }
    g = DctNeuron::new(cfg.q, cfg.n_dct, coeffs)?;
    Ok(Predistorter::from_neuron(g))
}

/// Maps every magnitude through the inverse, keeping phases and the
/// signal's `norm_scale`.
pub fn predistort(x: &TimeSignal, p: &Predistorter) -> Result<TimeSignal> {
    let mut samples = Vec::with_capacity(x.len());
    for &s in &x.samples {
        let r = s.norm();
        if r > 1.0 + crate::channel::DOMAIN_TOLERANCE {
            return Err(Error::Domain(format!("sample magnitude {r} exceeds 1")));
        }
        samples.push(if r == 0.0 { s } else { s * (p.drive(r.min(1.0)) / r) });
    }
    Ok(TimeSignal {
        samples,
        norm_scale: x.norm_scale,
    })
}

impl From<&FirChannel> for ChannelEstimate {
    fn from(h: &FirChannel) -> Self {
        ChannelEstimate { taps: h.taps.clone() }
    }
}

/// Per-subcarrier division `Y_k / H_k`. Subcarriers with `|H_k|` below
/// [`ERASURE_THRESHOLD`] come out as 0.
pub fn zf_equalize(received_grid: &SymbolGrid, channel: &ChannelEstimate, n: usize) -> Result<SymbolGrid> {
    if received_grid.len() != n {
        return Err(Error::InputLength {
            expected: n,
            got: received_grid.len(),
        });
    }
    let response = channel.frequency_response(n);
    Ok(SymbolGrid::new(
        received_grid
            .values
            .iter()
            .zip(&response)
            .map(|(y, h)| if h.norm() < ERASURE_THRESHOLD { Complex64::new(0.0, 0.0) } else { y / h })
            .collect(),
    ))
}

/// Indices of subcarriers that [`zf_equalize`] erases.
pub fn erased_subcarriers(channel: &ChannelEstimate, n: usize) -> Vec<usize> {
    channel
        .frequency_response(n)
        .iter()
        .enumerate()
        .filter(|(_, h)| h.norm() < ERASURE_THRESHOLD)
        .map(|(k, _)| k)
        .collect()
}

/// CP removal, DFT, ZF and the `norm_scale` correction. The result lives on
/// the constellation's scale.
pub fn equalized_symbols(
    y: &TimeSignal,
    channel: &ChannelEstimate,
    cfg: &OfdmConfig,
    dft: &Dft,
    norm_scale: f64,
) -> Result<SymbolGrid> {
    let grid = crate::signal::ofdm_demodulate_with(y, cfg, dft)?;
    let mut eq = zf_equalize(&grid, channel, cfg.n_subcarriers)?;
    eq.values.iter_mut().for_each(|v| *v *= norm_scale);
    Ok(eq)
}

/// Plain ZF hard decoding of one CP-bearing block.
pub fn zf_decode(
    y: &TimeSignal,
    channel: &ChannelEstimate,
    cfg: &OfdmConfig,
    norm_scale: f64,
) -> Result<Vec<u8>> {
    zf_decode_with(y, channel, cfg, norm_scale, &Dft::new(cfg.n_subcarriers))
}

pub fn zf_decode_with(
    y: &TimeSignal,
    channel: &ChannelEstimate,
    cfg: &OfdmConfig,
    norm_scale: f64,
    dft: &Dft,
) -> Result<Vec<u8>> {
    let eq = equalized_symbols(y, channel, cfg, dft, norm_scale)?;
    let cons = Constellation::new(cfg.qam_order)?;
    let mut bits = Vec::with_capacity(cfg.bits_per_block());
    for &v in &eq.values {
        cons.demap_into(v, &mut bits);
    }
    Ok(bits)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub bits: Vec<u8>,
    pub symbols: SymbolGrid,
    /// Fraction of subcarriers whose hard decision changed in each correction
    /// round.
    pub per_iteration_symbol_error: Vec<f64>,
    pub iterations_run: usize,
}

/// Iterative distortion cancellation on one CP-bearing block.
///
/// With `Z = DFT(y)·s/Ĥ` (`s` the transmitter's `norm_scale`), each round
/// decides `X̄ = hard(Z - s·D̂)`, rebuilds `x̄ = IDFT(X̄)/s`, and sets
/// `D̂ = DFT(f̂(x̄) - x̄)`. The first decision uses `D̂ = 0`, so it equals plain
/// ZF; the returned decision follows the last of `n_iter` corrections.
pub fn iterative_decode<F: AmplitudeMap + ?Sized>(
    y: &TimeSignal,
    f_hat: &F,
    h_hat: &ChannelEstimate,
    cfg: &OfdmConfig,
    n_iter: usize,
    norm_scale: f64,
) -> Result<DecodeResult> {
    iterative_decode_with(y, f_hat, h_hat, cfg, n_iter, norm_scale, &Dft::new(cfg.n_subcarriers))
}

pub fn iterative_decode_with<F: AmplitudeMap + ?Sized>(
    y: &TimeSignal,
    f_hat: &F,
    h_hat: &ChannelEstimate,
    cfg: &OfdmConfig,
    n_iter: usize,
    norm_scale: f64,
    dft: &Dft,
) -> Result<DecodeResult> {
    if n_iter == 0 {
        return Err(Error::Parameter("iterative decoder needs n_iter >= 1".into()));
    }
    if !(norm_scale > 0.0 && norm_scale.is_finite()) {
        return Err(Error::Parameter(format!("norm_scale {norm_scale} must be positive")));
    }
    let cons = Constellation::new(cfg.qam_order)?;
    let z = equalized_symbols(y, h_hat, cfg, dft, norm_scale)?;
    let erased = erased_subcarriers(h_hat, cfg.n_subcarriers);
    let n = cfg.n_subcarriers;

    let mut decisions: Vec<Complex64> = z.values.iter().map(|&v| cons.decide(v)).collect();
    let mut changes = Vec::with_capacity(n_iter);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..n_iter {
        buf.copy_from_slice(&decisions);
        dft.inverse(&mut buf);
        for v in buf.iter_mut() {
            let x_bar = *v / norm_scale;
            let r = x_bar.norm();
            let x_bar = if r > 1.0 { x_bar / r } else { x_bar };
            *v = f_hat.map_sample(x_bar) - x_bar;
        }
        dft.forward(&mut buf);
        let mut changed = 0usize;
        for k in 0..n {
            let corrected = z.values[k] - norm_scale * buf[k];
            let d = cons.decide(corrected);
            if d != decisions[k] {
                changed += 1;
            }
            decisions[k] = d;
        }
        // Erased subcarriers carry no information; keep them at the nearest
        // point to 0 as the plain ZF path does.
        for &k in &erased {
            decisions[k] = cons.decide(Complex64::new(0.0, 0.0));
        }
        changes.push(changed as f64 / n as f64);
    }
    let mut bits = Vec::with_capacity(cfg.bits_per_block());
    for &d in &decisions {
        cons.demap_into(d, &mut bits);
    }
    Ok(DecodeResult {
        bits,
        symbols: SymbolGrid::new(decisions),
        per_iteration_symbol_error: changes,
        iterations_run: n_iter,
    })
}

/// Fraction of differing bits.
pub fn ber(tx_bits: &[u8], rx_bits: &[u8]) -> Result<f64> {
    if tx_bits.len() != rx_bits.len() {
        return Err(Error::InputLength {
            expected: tx_bits.len(),
            got: rx_bits.len(),
        });
    }
    if tx_bits.is_empty() {
        return Err(Error::UndefinedMetric("bit error rate of an empty stream"));
    }
    Ok(bit_errors(tx_bits, rx_bits) as f64 / tx_bits.len() as f64)
}

pub(crate) fn bit_errors(tx_bits: &[u8], rx_bits: &[u8]) -> usize {
    tx_bits.iter().zip(rx_bits).filter(|(a, b)| a != b).count()
}

/// Exact bit error probability of Gray-coded square M-QAM in AWGN at symbol
/// SNR `gamma` (linear).
pub fn qam_awgn_ber(order: usize, gamma: f64) -> Result<f64> {
    let side = match order {
        4 => 2usize,
        16 => 4,
        64 => 8,
        _ => return Err(Error::Parameter(format!("unsupported QAM order {order}"))),
    };
    let m = order as f64;
    let bits_per_axis = side.trailing_zeros() as usize;
    let arg = (3.0 * gamma.max(0.0) / (2.0 * (m - 1.0))).sqrt();
    let mut total = 0.0;
    for k in 1..=bits_per_axis {
        let p = 1usize << (k - 1);
        let upper = side - side / (1 << k);
        let mut pk = 0.0;
        for i in 0..upper {
            let sign = if (i * p / side).is_multiple_of(2) { 1.0 } else { -1.0 };
            let weight = p as f64 - ((i * p) as f64 / side as f64 + 0.5).floor();
            pk += sign * weight * erfc((2 * i + 1) as f64 * arg);
        }
        total += pk / side as f64;
    }
    Ok(total / bits_per_axis as f64)
}

/// Mean over subcarriers of the Gray QAM bit error probability at
/// `γ_k = γ·|H_k|²/‖h‖²`. The normalization matches the simulator, which sets
/// the noise level from the measured received power.
pub fn theoretical_ber(h: &FirChannel, snr_db: f64, cfg: &OfdmConfig) -> Result<f64> {
    cfg.validate()?;
    let energy = h.energy();
    if !(energy > 0.0) {
        return Err(Error::Parameter("channel has no energy".into()));
    }
    if snr_db.is_infinite() && snr_db > 0.0 {
        return Ok(0.0);
    }
    let gamma = 10f64.powf(snr_db / 10.0);
    let response = h.frequency_response(cfg.n_subcarriers);
    let mut acc = 0.0;
    for hk in &response {
        acc += qam_awgn_ber(cfg.qam_order, gamma * hk.norm_sqr() / energy)?;
    }
    Ok(acc / response.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel;
    use crate::signal::{map_block, ofdm_modulate};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(x: f64) -> f64 {
        0.5 * erfc(x / std::f64::consts::SQRT_2)
    }

    #[test]
    fn qam_closed_forms() {
        for gamma in [0.1, 1.0, 10.0, 50.0] {
            assert_relative_eq!(qam_awgn_ber(4, gamma).unwrap(), q(gamma.sqrt()), max_relative = 1e-9);
            let a = (gamma / 5.0).sqrt();
            let expect = 0.25 * (3.0 * q(a) + 2.0 * q(3.0 * a) - q(5.0 * a));
            assert_relative_eq!(qam_awgn_ber(16, gamma).unwrap(), expect, max_relative = 1e-9);
        }
        assert_abs_diff_eq!(qam_awgn_ber(16, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(qam_awgn_ber(64, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(qam_awgn_ber(16, 1e4).unwrap() < 1e-100);
        assert!(matches!(qam_awgn_ber(8, 1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn flat_channel_limits() {
        let cfg = OfdmConfig::default();
        let h = FirChannel::identity();
        assert_eq!(theoretical_ber(&h, f64::INFINITY, &cfg).unwrap(), 0.0);
        assert!(theoretical_ber(&h, 60.0, &cfg).unwrap() < 1e-100);
        assert_abs_diff_eq!(theoretical_ber(&h, -200.0, &cfg).unwrap(), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn ber_counting() {
        let a = vec![0u8; 1000];
        let mut b = a.clone();
        assert_eq!(ber(&a, &b).unwrap(), 0.0);
        b[3] = 1;
        b[500] = 1;
        b[999] = 1;
        assert_abs_diff_eq!(ber(&a, &b).unwrap(), 0.003, epsilon = 1e-15);
        let c: Vec<u8> = a.iter().map(|v| 1 - v).collect();
        assert_eq!(ber(&a, &c).unwrap(), 1.0);
        assert!(matches!(ber(&a, &c[..10]), Err(Error::InputLength { .. })));
        assert!(matches!(ber(&[], &[]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn zf_flat_channel_is_identity() {
        let g = SymbolGrid::new(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.1)]);
        let out = zf_equalize(&g, &ChannelEstimate::delta(1), 2).unwrap();
        assert_eq!(out, g);
    }

    #[test]
    fn zf_erases_spectral_nulls() {
        // h = [1, 1] has H_k = 1 + e^{-jπk/2·...}; at N = 2, k = 1 is a null.
        let est = ChannelEstimate {
            taps: vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
        };
        let g = SymbolGrid::new(vec![Complex64::new(2.0, 0.0), Complex64::new(0.3, 0.3)]);
        let out = zf_equalize(&g, &est, 2).unwrap();
        assert_abs_diff_eq!(out.values[0].re, 1.0, epsilon = 1e-15);
        assert_eq!(out.values[1], Complex64::new(0.0, 0.0));
        assert_eq!(erased_subcarriers(&est, 2), vec![1]);
    }

    #[test]
    fn linear_ofdm_round_trip() {
        let cfg = OfdmConfig::new(64, 4, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bits: Vec<u8> = (0..cfg.bits_per_block()).map(|_| rng.random_range(0..2)).collect();
        let grid = map_block(&bits, &cfg).unwrap();
        let x = ofdm_modulate(&grid, &cfg).unwrap();
        let h = channel::draw_channel(3, &mut rng).unwrap();
        let (y, _) = channel::propagate(&x, &AmplitudeNonlinearity::Identity, &h, None, &mut rng).unwrap();
        let est = ChannelEstimate::from(&h);
        let eq = equalized_symbols(&y, &est, &cfg, &Dft::new(64), x.norm_scale).unwrap();
        for (a, b) in eq.values.iter().zip(&grid.values) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-9);
        }
        assert_eq!(zf_decode(&y, &est, &cfg, x.norm_scale).unwrap(), bits);
    }

    #[test]
    fn passthrough_and_zero_signal() {
        let x = TimeSignal::new(vec![Complex64::new(0.3, -0.4), Complex64::new(0.0, 0.0)]);
        let p = predistort(&x, &Predistorter::passthrough()).unwrap();
        assert_eq!(p, x);
        let g = Predistorter::from_neuron(DctNeuron::identity(8, 64).unwrap());
        let zero = TimeSignal::new(vec![Complex64::new(0.0, 0.0); 4]);
        assert_eq!(predistort(&zero, &g).unwrap(), zero);
        let big = TimeSignal::new(vec![Complex64::new(1.5, 0.0)]);
        assert!(matches!(predistort(&big, &g), Err(Error::Domain(_))));
    }

    #[test]
    fn predistortion_keeps_phase() {
        let g = Predistorter::from_neuron(DctNeuron::project_function(|r| r.sqrt(), 16, 64).unwrap());
        let x = TimeSignal::new(vec![Complex64::from_polar(0.4, 2.1)]);
        let y = predistort(&x, &g).unwrap();
        assert_abs_diff_eq!(y.samples[0].arg(), 2.1, epsilon = 1e-12);
    }

    #[test]
    fn identity_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = InverseConfig {
            q: 64,
            n_dct: 64,
            samples: 2000,
            sweeps: 5,
            ..Default::default()
        };
        let p = learn_inverse_with(&AmplitudeNonlinearity::Identity, &cfg, &mut rng).unwrap();
        for (r, e) in p.composition_profile(&AmplitudeNonlinearity::Identity, 101, 1.0) {
            assert!(e.abs() < 1e-2, "r = {r}: {e}");
        }
    }

    #[test]
    fn inverse_rejects_bad_config() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = DctNeuron::identity(6, 512).unwrap();
        assert!(learn_inverse(&f, 512, 512, 100, 0.01, &mut rng).is_err());
        assert!(learn_inverse(&f, 8, 64, 100, 0.0, &mut rng).is_err());
    }

    #[test]
    fn decoder_rejects_zero_iterations() {
        let cfg = OfdmConfig::new(8, 2, 4).unwrap();
        let y = TimeSignal::new(vec![Complex64::new(0.0, 0.0); 10]);
        let r = iterative_decode(&y, &AmplitudeNonlinearity::Identity, &ChannelEstimate::delta(1), &cfg, 0, 1.0);
        assert!(matches!(r, Err(Error::Parameter(_))));
    }

    #[test]
    fn identity_model_equals_zf() {
        let cfg = OfdmConfig::new(64, 4, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let bits: Vec<u8> = (0..cfg.bits_per_block()).map(|_| rng.random_range(0..2)).collect();
        let x = ofdm_modulate(&map_block(&bits, &cfg).unwrap(), &cfg).unwrap();
        let h = channel::draw_channel(3, &mut rng).unwrap();
        let (y, _) = channel::propagate(&x, &AmplitudeNonlinearity::Identity, &h, Some(8.0), &mut rng).unwrap();
        let est = ChannelEstimate::from(&h);
        let it = iterative_decode(&y, &AmplitudeNonlinearity::Identity, &est, &cfg, 5, x.norm_scale).unwrap();
        assert_eq!(it.bits, zf_decode(&y, &est, &cfg, x.norm_scale).unwrap());
        assert!(it.per_iteration_symbol_error.iter().all(|&c| c == 0.0));
        assert_eq!(it.iterations_run, 5);
    }
}
