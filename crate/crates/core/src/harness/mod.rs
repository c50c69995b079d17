//! Seeded Monte Carlo experiments.
//!
//! Every trial owns independent random streams derived from the master seed
//! (see [`seed`]), so the emitted rows are a pure function of the
//! configuration regardless of how many workers execute the trials.

pub mod config;
pub mod record;
pub mod seed;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{self, AmplitudeNonlinearity, FirChannel};
use crate::dct_neuron::DctNeuron;
use crate::detect::{self, AmplitudeMap, Predistorter};
use crate::error::{Error, Result};
use crate::estimator::{self, ChannelEstimate, EstimationResult};
use crate::signal::{self, Dft, OfdmConfig, TimeSignal};

pub use config::{BitBudget, ChannelModel, Csi, DetectorConfig, ExperimentConfig, InverseSource, Method, Scenario};
pub use record::{read_records, records_to_string, write_records, ResultRecord, CSV_HEADER};
pub use seed::derive_trial_seed;

/// Grid used for amplitude-curve metrics and peak normalization.
pub const METRIC_GRID_POINTS: usize = 256;
/// Upper end of the magnitude range checked by `composition_error_max`.
pub const COMPOSITION_RANGE: f64 = 0.95;

pub fn random_bits<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

/// Random bits and the peak-normalized CP-bearing block that carries them.
pub fn random_block<R: Rng + ?Sized>(cfg: &OfdmConfig, rng: &mut R, dft: &Dft) -> Result<(Vec<u8>, TimeSignal)> {
    let bits = random_bits(cfg.bits_per_block(), rng);
    let grid = signal::map_block(&bits, cfg)?;
    let x = signal::ofdm_modulate_with(&grid, cfg, dft)?;
    Ok((bits, x))
}

/// `blocks` consecutive CP-bearing blocks as one stream.
pub fn identification_sequence<R: Rng + ?Sized>(
    cfg: &OfdmConfig,
    blocks: usize,
    rng: &mut R,
    dft: &Dft,
) -> Result<TimeSignal> {
    let mut samples = Vec::with_capacity(blocks * cfg.block_len());
    for _ in 0..blocks {
        samples.extend(random_block(cfg, rng, dft)?.1.samples);
    }
    Ok(TimeSignal::new(samples))
}

/// Drops the cyclic prefix of every block in a concatenated stream.
pub fn strip_prefixes(stream: &TimeSignal, cfg: &OfdmConfig) -> Result<TimeSignal> {
    let len = cfg.block_len();
    if stream.len() % len != 0 {
        return Err(Error::InputLength {
            expected: len * (stream.len() / len + 1),
            got: stream.len(),
        });
    }
    Ok(TimeSignal::new(
        stream
            .samples
            .chunks(len)
            .flat_map(|b| b[cfg.cp_len..].iter().copied())
            .collect(),
    ))
}

/// Rescales an estimate so that the neuron peaks at 1 on the metric grid.
/// The composite `ĥᴴ f̂` is unchanged. Returns the neuron, the taps and the
/// applied peak.
pub fn unit_peak(result: &EstimationResult) -> Result<(DctNeuron, ChannelEstimate, f64)> {
    let peak = result
        .neuron
        .sample_grid(METRIC_GRID_POINTS)
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::UndefinedMetric("estimated amplitude curve has no positive peak"));
    }
    Ok((result.neuron.scaled(1.0 / peak), result.channel.scaled(peak), peak))
}

fn draw_true_channel<R: Rng + ?Sized>(cfg: &ExperimentConfig, rng: &mut R) -> Result<FirChannel> {
    match cfg.channel {
        ChannelModel::Identity => Ok(FirChannel::identity()),
        ChannelModel::Random { taps } => channel::draw_channel(taps, rng),
    }
}

/// Row fields shared by every metric of one trial and SNR point.
struct Row<'a> {
    cfg: &'a ExperimentConfig,
    est_snr_db: Option<f64>,
    det_snr_db: Option<f64>,
    method: &'a str,
    trial: usize,
    seed: u64,
}

impl Row<'_> {
    fn emit(&self, name: &str, value: f64) -> ResultRecord {
        ResultRecord {
            scenario: self.cfg.scenario.as_str().to_string(),
            nonlinearity: self.cfg.nonlinearity.label(),
            est_snr_db: self.est_snr_db,
            det_snr_db: self.det_snr_db,
            method: self.method.to_string(),
            trial: self.trial,
            seed: self.seed,
            metric_name: name.to_string(),
            metric_value: value,
        }
    }

    fn emit_or_fail(&self, names: &[&str], values: Result<Vec<f64>>) -> Vec<ResultRecord> {
        match values {
            Ok(v) => names.iter().zip(v).map(|(n, x)| self.emit(n, x)).collect(),
            Err(e) => {
                eprintln!(
                    "warning: {} trial {} (est {:?} dB, det {:?} dB) failed: {e}",
                    self.cfg.scenario.as_str(),
                    self.trial,
                    self.est_snr_db,
                    self.det_snr_db
                );
                names.iter().map(|n| self.emit(n, f64::NAN)).collect()
            }
        }
    }
}

fn run_trials<F>(cfg: &ExperimentConfig, trial: F) -> Result<Vec<ResultRecord>>
where
    F: Fn(usize) -> Vec<ResultRecord> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))?;
    let per_trial: Vec<Vec<ResultRecord>> = pool.install(|| (0..cfg.trials).into_par_iter().map(&trial).collect());
    Ok(per_trial.into_iter().flatten().collect())
}

fn check_scenario(cfg: &ExperimentConfig, expected: Scenario) -> Result<()> {
    cfg.validate()?;
    if cfg.scenario != expected {
        return Err(Error::Parameter(format!(
            "configuration is for scenario {}, not {}",
            cfg.scenario.as_str(),
            expected.as_str()
        )));
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    match cfg.scenario {
        Scenario::Estimate => run_estimation(cfg),
        Scenario::Ber => run_ber(cfg),
        Scenario::Inverse => run_inverse(cfg),
    }
}

pub fn run_to_writer<W: Write>(cfg: &ExperimentConfig, out: W) -> Result<()> {
    write_records(&run(cfg)?, out)
}

/// Per trial: one channel, one identification sequence and one probe, then
/// an independent noise draw and estimation at every estimation SNR.
/// Emits `nmse_f_db`, `nmse_combined_db` and `mse_trace_final`.
pub fn run_estimation(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    check_scenario(cfg, Scenario::Estimate)?;
    let grid = cfg.estimation_grid();
    let names = [record::NMSE_F_DB, record::NMSE_COMBINED_DB, record::MSE_TRACE_FINAL];
    run_trials(cfg, |t| {
        let seed = derive_trial_seed(cfg.master_seed, t as u64, seed::TAG_TRIAL);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dft = Dft::new(cfg.ofdm.n_subcarriers);
        let setup = (|| -> Result<_> {
            let h = draw_true_channel(cfg, &mut rng)?;
            let stream = identification_sequence(&cfg.ofdm, cfg.ident_blocks, &mut rng, &dft)?;
            let probe = strip_prefixes(
                &identification_sequence(&cfg.ofdm, cfg.ident_blocks, &mut rng, &dft)?,
                &cfg.ofdm,
            )?;
            Ok((h, stream, probe))
        })();
        let mut rows = Vec::new();
        for (j, &snr) in grid.iter().enumerate() {
            let row = Row {
                cfg,
                est_snr_db: Some(snr),
                det_snr_db: None,
                method: "",
                trial: t,
                seed,
            };
            let values = setup.as_ref().map_err(clone_err).and_then(|(h, stream, probe)| {
                let mut noise = seed::stream(cfg.master_seed, t as u64, seed::TAG_POINT + j as u64);
                let (rx, _) = channel::propagate(stream, &cfg.nonlinearity, h, Some(snr), &mut noise)?;
                let reference = strip_prefixes(stream, &cfg.ofdm)?;
                let rx = strip_prefixes(&rx, &cfg.ofdm)?;
                let est = estimator::estimate_channel(&reference, &rx, &cfg.estimator)?;
                let (f_unit, _, _) = unit_peak(&est)?;
                Ok(vec![
                    estimator::nmse_nonlinearity(&f_unit, &cfg.nonlinearity, METRIC_GRID_POINTS)?,
                    estimator::combined_nmse(&est.neuron, &est.channel, &cfg.nonlinearity, h, probe)?,
                    *est.mse_trace.last().expect("n_iter >= 1"),
                ])
            });
            rows.extend(row.emit_or_fail(&names, values));
        }
        rows
    })
}

fn clone_err(e: &Error) -> Error {
    Error::Parameter(e.to_string())
}

/// Identification shared by the `ber` and `inverse` scenarios: returns the
/// unit-peak neuron and the matching taps.
fn identify<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    h: &FirChannel,
    rng: &mut R,
    dft: &Dft,
) -> Result<(DctNeuron, ChannelEstimate)> {
    let stream = identification_sequence(&cfg.ofdm, cfg.ident_blocks, rng, dft)?;
    let (rx, _) = channel::propagate(&stream, &cfg.nonlinearity, h, Some(cfg.est_snr_db), rng)?;
    let est = estimator::estimate_channel(
        &strip_prefixes(&stream, &cfg.ofdm)?,
        &strip_prefixes(&rx, &cfg.ofdm)?,
        &cfg.estimator,
    )?;
    let (f_unit, h_unit, _) = unit_peak(&est)?;
    Ok((f_unit, h_unit))
}

/// Simulates one detection SNR point and returns `(bit errors, bits)`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_point<R: Rng + ?Sized>(
    ofdm: &OfdmConfig,
    truth: &AmplitudeNonlinearity,
    h: &FirChannel,
    snr_db: f64,
    method: Method,
    predistorter: &Predistorter,
    f_model: &DctNeuron,
    csi: &ChannelEstimate,
    n_iter: usize,
    bits: usize,
    rng: &mut R,
    dft: &Dft,
) -> Result<(usize, usize)> {
    let blocks = bits.div_ceil(ofdm.bits_per_block()).max(1);
    let mut errors = 0;
    let mut total = 0;
    for _ in 0..blocks {
        let (tx_bits, x) = random_block(ofdm, rng, dft)?;
        let rx_bits = match method {
            Method::Predistortion => {
                let tx = detect::predistort(&x, predistorter)?;
                let (y, _) = channel::propagate(&tx, truth, h, Some(snr_db), rng)?;
                detect::zf_decode_with(&y, csi, ofdm, x.norm_scale, dft)?
            }
            Method::Iterative => {
                let (y, _) = channel::propagate(&x, truth, h, Some(snr_db), rng)?;
                detect::iterative_decode_with(&y, f_model, csi, ofdm, n_iter, x.norm_scale, dft)?.bits
            }
        };
        errors += detect::bit_errors(&tx_bits, &rx_bits);
        total += tx_bits.len();
    }
    Ok((errors, total))
}

/// Per trial: one channel, identification at `est_snr_db`, then every
/// detection SNR through the same channel with fresh data blocks. Emits
/// `ber` and `theory_ber` per point.
pub fn run_ber(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    check_scenario(cfg, Scenario::Ber)?;
    let names = [record::BER, record::THEORY_BER];
    let method = cfg.detector.method;
    run_trials(cfg, |t| {
        let seed = derive_trial_seed(cfg.master_seed, t as u64, seed::TAG_TRIAL);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dft = Dft::new(cfg.ofdm.n_subcarriers);
        let setup = (|| -> Result<_> {
            let h = draw_true_channel(cfg, &mut rng)?;
            let (f_unit, h_unit) = identify(cfg, &h, &mut rng, &dft)?;
            let csi = match cfg.detector.csi {
                Csi::Genie => ChannelEstimate::from(&h),
                Csi::Estimated => h_unit,
            };
            let predistorter = match method {
                Method::Predistortion => {
                    let mut inv_rng = seed::stream(cfg.master_seed, t as u64, seed::TAG_INVERSE);
                    detect::learn_inverse_with(&f_unit, &cfg.detector.inverse, &mut inv_rng)?
                }
                Method::Iterative => Predistorter::passthrough(),
            };
            Ok((h, f_unit, csi, predistorter))
        })();
        let mut rows = Vec::new();
        for (j, &snr) in cfg.det_snr_grid_db.iter().enumerate() {
            let row = Row {
                cfg,
                est_snr_db: Some(cfg.est_snr_db),
                det_snr_db: Some(snr),
                method: method.as_str(),
                trial: t,
                seed,
            };
            let values = setup.as_ref().map_err(clone_err).and_then(|(h, f_unit, csi, pre)| {
                let theory = detect::theoretical_ber(h, snr, &cfg.ofdm)?;
                let mut point_rng = seed::stream(cfg.master_seed, t as u64, seed::TAG_POINT + j as u64);
                let (errors, total) = simulate_point(
                    &cfg.ofdm,
                    &cfg.nonlinearity,
                    h,
                    snr,
                    method,
                    pre,
                    f_unit,
                    csi,
                    cfg.detector.n_iter,
                    cfg.budget.bits_for(theory),
                    &mut point_rng,
                    &dft,
                )?;
                Ok(vec![errors as f64 / total as f64, theory])
            });
            rows.extend(row.emit_or_fail(&names, values));
        }
        rows
    })
}

/// Per trial: learns the inverse of the true curve (or of an identified
/// one), then emits `composition_error@<r>` on a uniform grid over `[0, 1]`
/// and `composition_error_max` over `[0, 0.95]`.
pub fn run_inverse(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    check_scenario(cfg, Scenario::Inverse)?;
    let est_snr = match cfg.inverse_source {
        InverseSource::Truth => None,
        InverseSource::Estimate => Some(cfg.est_snr_db),
    };
    run_trials(cfg, |t| {
        let seed = derive_trial_seed(cfg.master_seed, t as u64, seed::TAG_TRIAL);
        let row = Row {
            cfg,
            est_snr_db: est_snr,
            det_snr_db: None,
            method: "",
            trial: t,
            seed,
        };
        let result = (|| -> Result<Vec<(f64, f64)>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let curve: Box<dyn AmplitudeMap> = match cfg.inverse_source {
                InverseSource::Truth => Box::new(cfg.nonlinearity.clone()),
                InverseSource::Estimate => {
                    let dft = Dft::new(cfg.ofdm.n_subcarriers);
                    let h = draw_true_channel(cfg, &mut rng)?;
                    Box::new(identify(cfg, &h, &mut rng, &dft)?.0)
                }
            };
            let mut inv_rng = seed::stream(cfg.master_seed, t as u64, seed::TAG_INVERSE);
            let p = detect::learn_inverse_with(curve.as_ref(), &cfg.detector.inverse, &mut inv_rng)?;
            Ok(p.composition_profile(curve.as_ref(), METRIC_GRID_POINTS, 1.0))
        })();
        match result {
            Ok(profile) => {
                let max = profile
                    .iter()
                    .filter(|(r, _)| *r <= COMPOSITION_RANGE)
                    .map(|(_, e)| e.abs())
                    .fold(0.0, f64::max);
                let mut rows: Vec<ResultRecord> = profile
                    .iter()
                    .map(|(r, e)| row.emit(&format!("{}{r:.6}", record::COMPOSITION_ERROR_AT), *e))
                    .collect();
                rows.push(row.emit(record::COMPOSITION_ERROR_MAX, max));
                rows
            }
            Err(e) => row.emit_or_fail(&[record::COMPOSITION_ERROR_MAX], Err(e)),
        }
    })
}
