//! Experiment configuration and its flat `key = value` file format.
//!
//! ```text
//! # comment
//! scenario = ber
//! nonlinearity = soft
//! det_snr_grid_db = 0, 5, 10
//! detector.method = iterative
//! ```

use std::path::Path;

use crate::channel::AmplitudeNonlinearity;
use crate::detect::{self, InverseConfig};
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::signal::OfdmConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Estimate,
    Ber,
    Inverse,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Estimate => "estimate",
            Scenario::Ber => "ber",
            Scenario::Inverse => "inverse",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "estimate" => Ok(Scenario::Estimate),
            "ber" => Ok(Scenario::Ber),
            "inverse" => Ok(Scenario::Inverse),
            _ => Err(Error::Parameter(format!("unknown scenario {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Predistortion,
    Iterative,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Predistortion => "predistortion",
            Method::Iterative => "iterative",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "predistortion" => Ok(Method::Predistortion),
            "iterative" => Ok(Method::Iterative),
            _ => Err(Error::Parameter(format!("unknown detection method {s:?}"))),
        }
    }
}

/// Channel knowledge used by the ZF stage of both receivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Csi {
    /// The true taps.
    Genie,
    /// The identified taps, rescaled to match the unit-peak neuron.
    Estimated,
}

impl Csi {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "genie" => Ok(Csi::Genie),
            "estimated" => Ok(Csi::Estimated),
            _ => Err(Error::Parameter(format!("unknown csi mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    /// `taps` i.i.d. CN(0, 1/taps) coefficients per trial.
    Random { taps: usize },
    /// `h = [1]`.
    Identity,
}

/// Which amplitude curve the `inverse` scenario inverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseSource {
    Truth,
    Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub method: Method,
    pub n_iter: usize,
    pub csi: Csi,
    pub inverse: InverseConfig,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            method: Method::Predistortion,
            n_iter: detect::DEFAULT_DECODER_ITERATIONS,
            csi: Csi::Estimated,
            inverse: InverseConfig::default(),
        }
    }
}

/// Bits simulated per trial and SNR point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitBudget {
    pub min_bits: usize,
    pub low_ber_bits: usize,
    /// Points whose theoretical BER falls below this get `low_ber_bits`.
    pub low_ber_threshold: f64,
}

impl Default for BitBudget {
    fn default() -> Self {
        Self {
            min_bits: 100_000,
            low_ber_bits: 1_000_000,
            low_ber_threshold: 1e-3,
        }
    }
}

impl BitBudget {
    pub fn bits_for(&self, theory: f64) -> usize {
        if theory < self.low_ber_threshold {
            self.low_ber_bits.max(self.min_bits)
        } else {
            self.min_bits
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub nonlinearity: AmplitudeNonlinearity,
    pub est_snr_db: f64,
    /// Estimation SNRs swept by the `estimate` scenario; empty means
    /// `[est_snr_db]`.
    pub est_snr_grid_db: Vec<f64>,
    pub det_snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    /// Worker threads; 0 picks the machine's parallelism.
    pub workers: usize,
    /// OFDM blocks in the identification sequence.
    pub ident_blocks: usize,
    pub ofdm: OfdmConfig,
    pub estimator: EstimatorConfig,
    pub channel: ChannelModel,
    pub detector: DetectorConfig,
    pub budget: BitBudget,
    pub inverse_source: InverseSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Estimate,
            nonlinearity: AmplitudeNonlinearity::SoftSine,
            est_snr_db: 0.0,
            est_snr_grid_db: Vec::new(),
            det_snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
            trials: 10,
            master_seed: 1,
            workers: 0,
            ident_blocks: 2,
            ofdm: OfdmConfig::default(),
            estimator: EstimatorConfig::default(),
            channel: ChannelModel::Random { taps: 3 },
            detector: DetectorConfig::default(),
            budget: BitBudget::default(),
            inverse_source: InverseSource::Truth,
        }
    }
}

/// Parses `identity`, `soft`, `hard`, `hard:<saturation>` or `file:<csv>`.
pub fn parse_nonlinearity(s: &str) -> Result<AmplitudeNonlinearity> {
    match s {
        "identity" => Ok(AmplitudeNonlinearity::Identity),
        "soft" => Ok(AmplitudeNonlinearity::SoftSine),
        "hard" => AmplitudeNonlinearity::hard_clip(crate::channel::DEFAULT_HARD_CLIP_SATURATION),
        _ => {
            if let Some(rho) = s.strip_prefix("hard:") {
                AmplitudeNonlinearity::hard_clip(parse_f64("nonlinearity", rho)?)
            } else if let Some(path) = s.strip_prefix("file:") {
                Ok(AmplitudeNonlinearity::Tabulated(
                    crate::channel::Tabulated::from_csv_file(Path::new(path))?,
                ))
            } else {
                Err(Error::Parameter(format!("unknown nonlinearity {s:?}")))
            }
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| !x.is_nan())
        .ok_or_else(|| Error::Parameter(format!("{key}: expected a number, got {v:?}")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    let t = v.trim().replace('_', "");
    if let Ok(n) = t.parse::<usize>() {
        return Ok(n);
    }
    // Accept integral scientific notation such as 1e6.
    match t.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(53) => Ok(x as usize),
        _ => Err(Error::Parameter(format!("{key}: expected a non-negative integer, got {v:?}"))),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(key, s))
        .collect()
}

impl ExperimentConfig {
    /// Sets one dotted key. Used by both the file parser and CLI overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "scenario" => self.scenario = Scenario::parse(v)?,
            "nonlinearity" => self.nonlinearity = parse_nonlinearity(v)?,
            "est_snr_db" => self.est_snr_db = parse_f64(key, v)?,
            "est_snr_grid_db" => self.est_snr_grid_db = parse_list(key, v)?,
            "det_snr_grid_db" => self.det_snr_grid_db = parse_list(key, v)?,
            "trials" => self.trials = parse_usize(key, v)?,
            "master_seed" => {
                self.master_seed = v
                    .parse()
                    .map_err(|_| Error::Parameter(format!("master_seed: expected a u64, got {v:?}")))?
            }
            "workers" => self.workers = parse_usize(key, v)?,
            "ident_blocks" => self.ident_blocks = parse_usize(key, v)?,
            "ofdm.n_subcarriers" => self.ofdm.n_subcarriers = parse_usize(key, v)?,
            "ofdm.cp_len" => self.ofdm.cp_len = parse_usize(key, v)?,
            "ofdm.qam_order" => self.ofdm.qam_order = parse_usize(key, v)?,
            "estimator.alpha" => self.estimator.alpha = parse_f64(key, v)?,
            "estimator.n_iter" => self.estimator.n_iter = parse_usize(key, v)?,
            "estimator.q" => self.estimator.q_count = parse_usize(key, v)?,
            "estimator.n_dct" => self.estimator.n_dct = parse_usize(key, v)?,
            "estimator.taps" => self.estimator.taps = parse_usize(key, v)?,
            "channel.model" => {
                self.channel = match v {
                    "identity" => ChannelModel::Identity,
                    "random" => ChannelModel::Random {
                        taps: self.channel_taps(),
                    },
                    _ => return Err(Error::Parameter(format!("unknown channel model {v:?}"))),
                }
            }
            "channel.taps" => {
                self.channel = ChannelModel::Random {
                    taps: parse_usize(key, v)?,
                }
            }
            "detector.method" => self.detector.method = Method::parse(v)?,
            "detector.n_iter" => self.detector.n_iter = parse_usize(key, v)?,
            "detector.csi" => self.detector.csi = Csi::parse(v)?,
            "detector.inverse.q" => self.detector.inverse.q = parse_usize(key, v)?,
            "detector.inverse.n_dct" => self.detector.inverse.n_dct = parse_usize(key, v)?,
            "detector.inverse.samples" => self.detector.inverse.samples = parse_usize(key, v)?,
            "detector.inverse.alpha" => self.detector.inverse.alpha = parse_f64(key, v)?,
            "detector.inverse.sweeps" => self.detector.inverse.sweeps = parse_usize(key, v)?,
            "ber.min_bits" => self.budget.min_bits = parse_usize(key, v)?,
            "ber.low_ber_bits" => self.budget.low_ber_bits = parse_usize(key, v)?,
            "ber.low_ber_threshold" => self.budget.low_ber_threshold = parse_f64(key, v)?,
            "inverse.source" => {
                self.inverse_source = match v {
                    "truth" => InverseSource::Truth,
                    "estimate" => InverseSource::Estimate,
                    _ => return Err(Error::Parameter(format!("unknown inverse source {v:?}"))),
                }
            }
            _ => return Err(Error::Parameter(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    fn channel_taps(&self) -> usize {
        match self.channel {
            ChannelModel::Random { taps } => taps,
            ChannelModel::Identity => 3,
        }
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_str(&mut self, text: &str, source_name: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source_name, i + 1, "expected `key = value`"))?;
            self.set(key.trim(), value).map_err(|e| match e {
                Error::Parameter(m) => Error::parse(source_name, i + 1, m),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn parse_text(text: &str, source_name: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_str(text, source_name)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text, &path.display().to_string())
    }

    /// Estimation SNRs the `estimate` scenario sweeps.
    pub fn estimation_grid(&self) -> Vec<f64> {
        if self.est_snr_grid_db.is_empty() {
            vec![self.est_snr_db]
        } else {
            self.est_snr_grid_db.clone()
        }
    }

    pub fn true_taps(&self) -> usize {
        match self.channel {
            ChannelModel::Random { taps } => taps,
            ChannelModel::Identity => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        self.estimator.validate()?;
        if self.trials == 0 {
            return Err(Error::Parameter("trials must be at least 1".into()));
        }
        if self.ident_blocks == 0 {
            return Err(Error::Parameter("ident_blocks must be at least 1".into()));
        }
        if let ChannelModel::Random { taps } = self.channel {
            if taps == 0 {
                return Err(Error::Parameter("channel.taps must be at least 1".into()));
            }
        }
        if self.true_taps() > self.ofdm.cp_len + 1 {
            return Err(Error::Parameter(format!(
                "channel length {} exceeds cyclic prefix {} + 1",
                self.true_taps(),
                self.ofdm.cp_len
            )));
        }
        if self.detector.n_iter == 0 {
            return Err(Error::Parameter("detector.n_iter must be at least 1".into()));
        }
        let inv = &self.detector.inverse;
        if inv.q == 0 || inv.q > inv.n_dct || inv.samples < inv.q || inv.sweeps == 0 || !(inv.alpha > 0.0) {
            return Err(Error::Parameter(format!("invalid inverse configuration {inv:?}")));
        }
        if self.scenario == Scenario::Ber && self.det_snr_grid_db.is_empty() {
            return Err(Error::Parameter("det_snr_grid_db is empty".into()));
        }
        if self.budget.min_bits == 0 {
            return Err(Error::Parameter("ber.min_bits must be positive".into()));
        }
        Ok(())
    }
}
