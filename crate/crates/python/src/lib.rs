//! Python bindings. Complex samples cross the boundary as Python `complex`
//! lists; every library error surfaces as `ValueError`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dctneuron::channel::{self, AmplitudeNonlinearity, FirChannel};
use dctneuron::dct_neuron::DctNeuron;
use dctneuron::detect::{self, InverseConfig};
use dctneuron::estimator::{self, ChannelEstimate, EstimatorConfig};
use dctneuron::harness::{self, ExperimentConfig};
use dctneuron::signal::{self, OfdmConfig, TimeSignal};
use dctneuron::Complex64;

fn err(e: dctneuron::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn nonlinearity(name: &str) -> PyResult<AmplitudeNonlinearity> {
    harness::config::parse_nonlinearity(name).map_err(err)
}

/// Cosine-expansion model of an amplitude curve on `[0, 1]`.
#[pyclass(name = "DctNeuron", module = "dctneuron_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyDctNeuron {
    pub inner: DctNeuron,
}

#[pymethods]
impl PyDctNeuron {
    #[new]
    fn new(q_count: usize, n_dct: usize, coeffs: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: DctNeuron::new(q_count, n_dct, coeffs).map_err(err)?,
        })
    }

    /// Projection of `f(r) = r` onto the first `q_count` basis functions.
    #[staticmethod]
    fn identity(q_count: usize, n_dct: usize) -> PyResult<Self> {
        Ok(Self {
            inner: DctNeuron::identity(q_count, n_dct).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: DctNeuron::from_csv_reader(text.as_bytes(), "<python>").map_err(err)?,
        })
    }

    #[getter]
    fn q_count(&self) -> usize {
        self.inner.q_count()
    }

    #[getter]
    fn n_dct(&self) -> usize {
        self.inner.n_dct()
    }

    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs().to_vec()
    }

    fn evaluate(&self, r: f64) -> PyResult<f64> {
        self.inner.evaluate(r).map_err(err)
    }

    fn evaluate_many(&self, rs: Vec<f64>) -> PyResult<Vec<f64>> {
        rs.into_iter().map(|r| self.inner.evaluate(r).map_err(err)).collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }

    fn __repr__(&self) -> String {
        format!("DctNeuron(q_count={}, n_dct={})", self.inner.q_count(), self.inner.n_dct())
    }
}

/// Output of [`estimate_channel`].
#[pyclass(name = "Estimate", module = "dctneuron_py")]
pub struct PyEstimate {
    #[pyo3(get)]
    pub neuron: PyDctNeuron,
    #[pyo3(get)]
    pub channel: Vec<Complex64>,
    #[pyo3(get)]
    pub mse_trace: Vec<f64>,
    #[pyo3(get)]
    pub samples_used: usize,
}

/// Alternating Wiener/LMS identification of one aligned block.
#[pyfunction]
#[pyo3(signature = (reference, received, alpha=0.01, n_iter=30, q=6, n_dct=512, taps=3))]
pub fn estimate_channel(
    reference: Vec<Complex64>,
    received: Vec<Complex64>,
    alpha: f64,
    n_iter: usize,
    q: usize,
    n_dct: usize,
    taps: usize,
) -> PyResult<PyEstimate> {
    let cfg = EstimatorConfig {
        alpha,
        n_iter,
        q_count: q,
        n_dct,
        taps,
    };
    let r = estimator::estimate_channel(&TimeSignal::new(reference), &TimeSignal::new(received), &cfg).map_err(err)?;
    Ok(PyEstimate {
        neuron: PyDctNeuron { inner: r.neuron },
        channel: r.channel.taps,
        mse_trace: r.mse_trace,
        samples_used: r.samples_used,
    })
}

/// AM-AM response of a named curve (`identity`, `soft`, `hard`, `hard:<s>`,
/// `file:<csv>`).
#[pyfunction]
pub fn amplitude(name: &str, r: f64) -> PyResult<f64> {
    nonlinearity(name)?.amplitude(r).map_err(err)
}

/// Nonlinearity, FIR channel and AWGN. `snr_db=None` is noiseless.
#[pyfunction]
#[pyo3(signature = (x, nonlinearity_name, taps, snr_db=None, seed=0))]
pub fn propagate(
    x: Vec<Complex64>,
    nonlinearity_name: &str,
    taps: Vec<Complex64>,
    snr_db: Option<f64>,
    seed: u64,
) -> PyResult<Vec<Complex64>> {
    let f = nonlinearity(nonlinearity_name)?;
    let h = FirChannel::new(taps).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (y, _) = channel::propagate(&TimeSignal::new(x), &f, &h, snr_db, &mut rng).map_err(err)?;
    Ok(y.samples)
}

/// Random bits and their peak-normalized CP-bearing OFDM block:
/// `(bits, samples, norm_scale)`.
#[pyfunction]
#[pyo3(signature = (n_subcarriers=1024, cp_len=8, qam_order=16, seed=0))]
pub fn ofdm_block(
    n_subcarriers: usize,
    cp_len: usize,
    qam_order: usize,
    seed: u64,
) -> PyResult<(Vec<u8>, Vec<Complex64>, f64)> {
    let cfg = OfdmConfig::new(n_subcarriers, cp_len, qam_order).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (bits, x) = harness::random_block(&cfg, &mut rng, &signal::Dft::new(n_subcarriers)).map_err(err)?;
    Ok((bits, x.samples, x.norm_scale))
}

#[pyfunction]
#[pyo3(signature = (neuron, nonlinearity_name, grid_points=256))]
pub fn nmse_nonlinearity(neuron: PyRef<'_, PyDctNeuron>, nonlinearity_name: &str, grid_points: usize) -> PyResult<f64> {
    estimator::nmse_nonlinearity(&neuron.inner, &nonlinearity(nonlinearity_name)?, grid_points).map_err(err)
}

#[pyfunction]
pub fn combined_nmse(
    neuron: PyRef<'_, PyDctNeuron>,
    channel_estimate: Vec<Complex64>,
    nonlinearity_name: &str,
    true_taps: Vec<Complex64>,
    probe: Vec<Complex64>,
) -> PyResult<f64> {
    estimator::combined_nmse(
        &neuron.inner,
        &ChannelEstimate { taps: channel_estimate },
        &nonlinearity(nonlinearity_name)?,
        &FirChannel::new(true_taps).map_err(err)?,
        &TimeSignal::new(probe),
    )
    .map_err(err)
}

/// Learns `g ≈ f̂⁻¹` and returns it as a neuron.
#[pyfunction]
#[pyo3(signature = (neuron, q=512, n_dct=512, samples=10_000, alpha=0.01, sweeps=detect::DEFAULT_INVERSE_SWEEPS, seed=0))]
pub fn learn_inverse(
    neuron: PyRef<'_, PyDctNeuron>,
    q: usize,
    n_dct: usize,
    samples: usize,
    alpha: f64,
    sweeps: usize,
    seed: u64,
) -> PyResult<PyDctNeuron> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = InverseConfig {
        q,
        n_dct,
        samples,
        alpha,
        sweeps,
    };
    let p = detect::learn_inverse_with(&neuron.inner, &cfg, &mut rng).map_err(err)?;
    Ok(PyDctNeuron {
        inner: p.inverse.expect("learned predistorter always holds a neuron"),
    })
}

#[pyfunction]
#[pyo3(signature = (taps, snr_db, n_subcarriers=1024, qam_order=16))]
pub fn theoretical_ber(taps: Vec<Complex64>, snr_db: f64, n_subcarriers: usize, qam_order: usize) -> PyResult<f64> {
    let cfg = OfdmConfig::new(n_subcarriers, 0, qam_order).map_err(err)?;
    detect::theoretical_ber(&FirChannel::new(taps).map_err(err)?, snr_db, &cfg).map_err(err)
}

#[pyfunction]
pub fn derive_trial_seed(master_seed: u64, trial: u64, stream_tag: u64) -> u64 {
    harness::derive_trial_seed(master_seed, trial, stream_tag)
}

/// Runs an experiment described in the `key = value` configuration format
/// and returns the result CSV.
#[pyfunction]
pub fn run_experiment(config_text: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::parse_text(config_text, "<python>").map_err(err)?;
    let records = harness::run(&cfg).map_err(err)?;
    Ok(harness::records_to_string(&records))
}

#[pymodule]
fn dctneuron_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDctNeuron>()?;
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(estimate_channel, m)?)?;
    m.add_function(wrap_pyfunction!(amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(propagate, m)?)?;
    m.add_function(wrap_pyfunction!(ofdm_block, m)?)?;
    m.add_function(wrap_pyfunction!(nmse_nonlinearity, m)?)?;
    m.add_function(wrap_pyfunction!(combined_nmse, m)?)?;
    m.add_function(wrap_pyfunction!(learn_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_ber, m)?)?;
    m.add_function(wrap_pyfunction!(derive_trial_seed, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("CSV_HEADER", harness::CSV_HEADER.join(","))?;
    Ok(())
}
