#![allow(dead_code)]

use dctneuron::channel::{self, AmplitudeNonlinearity, FirChannel};
use dctneuron::dct_neuron::DctNeuron;
use dctneuron::estimator::ChannelEstimate;
use dctneuron::signal::TimeSignal;
use dctneuron::Complex64;
use rand::Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Samples with magnitude uniform in `[0, 1]` and uniform phase.
pub fn random_signal<R: Rng>(n: usize, rng: &mut R) -> TimeSignal {
    TimeSignal::new(
        (0..n)
            .map(|_| Complex64::from_polar(rng.random::<f64>(), rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)))
            .collect(),
    )
}

pub fn random_neuron<R: Rng>(q: usize, n: usize, rng: &mut R) -> DctNeuron {
    DctNeuron::new(q, n, (0..q).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_taps<R: Rng>(l: usize, rng: &mut R) -> Vec<Complex64> {
    (0..l)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Complex Householder QR least squares: `argmin ‖A x - b‖`, `A` row-major
/// with `cols` columns.
pub fn qr_least_squares(a: &[Vec<Complex64>], b: &[Complex64], cols: usize) -> Vec<Complex64> {
    let rows = a.len();
    let mut m: Vec<Vec<Complex64>> = a.to_vec();
    let mut rhs = b.to_vec();
    for k in 0..cols {
        let norm: f64 = (k..rows).map(|i| m[i][k].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = m[k][k];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { c(1.0, 0.0) };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = (k..rows).map(|i| m[i][k]).collect();
        v[0] -= alpha;
        let vn: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= vn);
        for j in k..cols {
            let dot: Complex64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * m[k + i][j]).sum();
            for (i, vi) in v.iter().enumerate() {
                m[k + i][j] -= vi * dot * 2.0;
            }
        }
        let dot: Complex64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * rhs[k + i]).sum();
        for (i, vi) in v.iter().enumerate() {
            rhs[k + i] -= vi * dot * 2.0;
        }
    }
    let mut x = vec![c(0.0, 0.0); cols];
    for k in (0..cols).rev() {
        let mut s = rhs[k];
        for j in k + 1..cols {
            s -= m[k][j] * x[j];
        }
        x[k] = s / m[k][k];
    }
    x
}

/// Least-squares oracle for the tap solve: rows `u_nᴴ`, right side `y_n*`,
/// normalized to unit norm.
pub fn oracle_taps(x: &TimeSignal, y: &TimeSignal, neuron: &DctNeuron, taps: usize) -> Vec<Complex64> {
    let fx: Vec<Complex64> = x.samples.iter().map(|&s| neuron.evaluate_complex(s).unwrap()).collect();
    let rows: Vec<Vec<Complex64>> = (0..fx.len())
        .map(|n| {
            (0..taps)
                .map(|l| if n >= l { fx[n - l].conj() } else { c(0.0, 0.0) })
                .collect()
        })
        .collect();
    let rhs: Vec<Complex64> = y.samples.iter().map(|v| v.conj()).collect();
    let h = qr_least_squares(&rows, &rhs, taps);
    let norm = h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    h.into_iter().map(|v| v / norm).collect()
}

pub fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
    num / den
}

/// Replica `Σ_ℓ conj(h_ℓ) f(x_{n-ℓ})` computed directly.
pub fn composite(neuron: &DctNeuron, h: &ChannelEstimate, x: &TimeSignal) -> Vec<Complex64> {
    let fx: Vec<Complex64> = x.samples.iter().map(|&s| neuron.evaluate_complex(s).unwrap()).collect();
    (0..fx.len())
        .map(|n| {
            (0..h.taps.len())
                .filter(|&l| n >= l)
                .map(|l| h.taps[l].conj() * fx[n - l])
                .sum()
        })
        .collect()
}

pub fn noiseless(x: &TimeSignal, f: &AmplitudeNonlinearity, h: &FirChannel) -> TimeSignal {
    TimeSignal::new(channel::distort_and_filter(x, f, h).unwrap())
}
