//! OFDM transmit/receive chain: Gray-coded square QAM, orthonormal DFT and
//! cyclic prefix handling.
//!
//! Gray table: each axis carries `log2(M)/2` bits, in-phase bits first. Within
//! an axis the bits are read MSB-first as a reflected Gray code `g`, decoded to
//! a level index `i`, and placed at amplitude `(sqrt(M) - 1 - 2i) * scale`.
//! All-zero bits therefore sit in the first quadrant, e.g. QPSK `00` maps to
//! `(1 + j) / sqrt(2)`. `scale` gives unit average symbol energy.
//!
//! Both DFT directions use `1/sqrt(N)` scaling.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const DEFAULT_SUBCARRIERS: usize = 1024;
pub const DEFAULT_CP_LEN: usize = 8;
pub const DEFAULT_QAM_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    pub cp_len: usize,
    pub qam_order: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: DEFAULT_SUBCARRIERS,
            cp_len: DEFAULT_CP_LEN,
            qam_order: DEFAULT_QAM_ORDER,
        }
    }
}

impl OfdmConfig {
    pub fn new(n_subcarriers: usize, cp_len: usize, qam_order: usize) -> Result<Self> {
        let cfg = Self {
            n_subcarriers,
            cp_len,
            qam_order,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers == 0 || !self.n_subcarriers.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "subcarrier count {} is not a power of two",
                self.n_subcarriers
            )));
        }
        if self.cp_len >= self.n_subcarriers {
            return Err(Error::Parameter(format!(
                "cyclic prefix {} must be shorter than the block ({})",
                self.cp_len, self.n_subcarriers
            )));
        }
        Constellation::new(self.qam_order)?;
        Ok(())
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.qam_order.trailing_zeros() as usize
    }

    pub fn bits_per_block(&self) -> usize {
        self.n_subcarriers * self.bits_per_symbol()
    }

    /// Samples per transmitted block, cyclic prefix included.
    pub fn block_len(&self) -> usize {
        self.n_subcarriers + self.cp_len
    }
}

/// Frequency-domain symbols of one OFDM block.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    pub values: Vec<Complex64>,
}

impl SymbolGrid {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Time-domain samples.
///
/// For transmitter output `norm_scale` is the peak magnitude of the raw IDFT
/// block, so `samples = raw / norm_scale` and every sample has magnitude at
/// most one. Signals that did not come out of [`ofdm_modulate`] carry
/// `norm_scale = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub samples: Vec<Complex64>,
    pub norm_scale: f64,
}

impl TimeSignal {
    pub fn new(samples: Vec<Complex64>) -> Self {
        Self {
            samples,
            norm_scale: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// Square Gray-coded QAM constellation.
#[derive(Debug, Clone)]
pub struct Constellation {
    order: usize,
    side: usize,
    bits_per_axis: usize,
    scale: f64,
}

impl Constellation {
    pub fn new(order: usize) -> Result<Self> {
        if !matches!(order, 4 | 16 | 64) {
            return Err(Error::Parameter(format!(
                "QAM order {order} is not one of 4, 16, 64"
            )));
        }
        let side = (order as f64).sqrt().round() as usize;
        let bits_per_axis = side.trailing_zeros() as usize;
        let scale = (1.5 / (order as f64 - 1.0)).sqrt();
        Ok(Self {
            order,
            side,
            bits_per_axis,
            scale,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    /// Half the distance between adjacent levels on one axis.
    pub fn half_min_distance(&self) -> f64 {
        self.scale
    }

    fn level(&self, index: usize) -> f64 {
        (self.side as f64 - 1.0 - 2.0 * index as f64) * self.scale
    }

    fn axis_amplitude(&self, bits: &[u8]) -> f64 {
        let gray = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
        self.level(gray_decode(gray))
    }

    fn axis_bits(&self, amplitude: f64, out: &mut Vec<u8>) {
        let max = (self.side - 1) as f64;
        let raw = ((max - amplitude / self.scale) / 2.0).round();
        let index = raw.clamp(0.0, max) as usize;
        let gray = index ^ (index >> 1);
        for k in (0..self.bits_per_axis).rev() {
            out.push(((gray >> k) & 1) as u8);
        }
    }

    /// Maps one symbol's worth of bits.
    pub fn map(&self, bits: &[u8]) -> Complex64 {
        debug_assert_eq!(bits.len(), self.bits_per_symbol());
        let (i_bits, q_bits) = bits.split_at(self.bits_per_axis);
        Complex64::new(self.axis_amplitude(i_bits), self.axis_amplitude(q_bits))
    }

    /// Nearest point of the constellation (per-axis decision).
    pub fn decide(&self, value: Complex64) -> Complex64 {
        let mut bits = Vec::with_capacity(self.bits_per_symbol());
        self.demap_into(value, &mut bits);
        self.map(&bits)
    }

    pub fn demap_into(&self, value: Complex64, out: &mut Vec<u8>) {
        self.axis_bits(value.re, out);
        self.axis_bits(value.im, out);
    }

    /// Every constellation point, indexed by its bit pattern read as an integer
    /// (first bit most significant).
    pub fn points(&self) -> Vec<Complex64> {
        let k = self.bits_per_symbol();
        (0..self.order)
            .map(|label| {
                let bits: Vec<u8> = (0..k).rev().map(|s| ((label >> s) & 1) as u8).collect();
                self.map(&bits)
            })
            .collect()
    }
}

fn gray_decode(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

pub fn map_bits(bits: &[u8], order: usize) -> Result<SymbolGrid> {
    let c = Constellation::new(order)?;
    let k = c.bits_per_symbol();
    if bits.len() % k != 0 {
        return Err(Error::InputLength {
            expected: bits.len().div_ceil(k) * k,
            got: bits.len(),
        });
    }
    Ok(SymbolGrid::new(bits.chunks_exact(k).map(|b| c.map(b)).collect()))
}

/// Maps exactly one block's worth of bits for `cfg`.
pub fn map_block(bits: &[u8], cfg: &OfdmConfig) -> Result<SymbolGrid> {
    if bits.len() != cfg.bits_per_block() {
        return Err(Error::InputLength {
            expected: cfg.bits_per_block(),
            got: bits.len(),
        });
    }
    map_bits(bits, cfg.qam_order)
}

pub fn demap(symbols: &SymbolGrid, order: usize) -> Result<Vec<u8>> {
    let c = Constellation::new(order)?;
    let mut out = Vec::with_capacity(symbols.len() * c.bits_per_symbol());
    for &s in &symbols.values {
        c.demap_into(s, &mut out);
    }
    Ok(out)
}

/// Orthonormal forward and inverse DFT of a fixed size.
#[derive(Clone)]
pub struct Dft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft").field("n", &self.n).finish()
    }
}

impl Dft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.forward.process(data);
        data.iter_mut().for_each(|v| *v *= self.scale);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        data.iter_mut().for_each(|v| *v *= self.scale);
    }
}

/// IDFT of the grid, then the cyclic prefix, without peak normalization.
pub fn ofdm_modulate_raw(grid: &SymbolGrid, cfg: &OfdmConfig, dft: &Dft) -> Result<Vec<Complex64>> {
    let n = cfg.n_subcarriers;
    if grid.len() != n {
        return Err(Error::InputLength {
            expected: n,
            got: grid.len(),
        });
    }
    let mut body = grid.values.clone();
    dft.inverse(&mut body);
    let mut out = Vec::with_capacity(n + cfg.cp_len);
    out.extend_from_slice(&body[n - cfg.cp_len..]);
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn ofdm_modulate(grid: &SymbolGrid, cfg: &OfdmConfig) -> Result<TimeSignal> {
    ofdm_modulate_with(grid, cfg, &Dft::new(cfg.n_subcarriers))
}

pub fn ofdm_modulate_with(grid: &SymbolGrid, cfg: &OfdmConfig, dft: &Dft) -> Result<TimeSignal> {
    let mut samples = ofdm_modulate_raw(grid, cfg, dft)?;
    let peak = samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
    let norm_scale = if peak > 0.0 { peak } else { 1.0 };
    samples.iter_mut().for_each(|s| *s /= norm_scale);
    Ok(TimeSignal {
        samples,
        norm_scale,
    })
}

/// Removes the cyclic prefix and applies the forward DFT. The result is the
/// transmitted grid divided by the signal's `norm_scale`.
pub fn ofdm_demodulate(signal: &TimeSignal, cfg: &OfdmConfig) -> Result<SymbolGrid> {
    ofdm_demodulate_with(signal, cfg, &Dft::new(cfg.n_subcarriers))
}

pub fn ofdm_demodulate_with(signal: &TimeSignal, cfg: &OfdmConfig, dft: &Dft) -> Result<SymbolGrid> {
    if signal.len() != cfg.block_len() {
        return Err(Error::InputLength {
            expected: cfg.block_len(),
            got: signal.len(),
        });
    }
    let mut body = signal.samples[cfg.cp_len..].to_vec();
    dft.forward(&mut body);
    Ok(SymbolGrid::new(body))
}
