"""Smoke test for the compiled extension.

Build and run from the repository root:

    cargo build -p dctneuron-py --release --features extension-module
    cp target/release/libdctneuron_py.so python/dctneuron_py.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import dctneuron_py as m  # noqa: E402


def main():
    assert m.CSV_HEADER == (
        "scenario,nonlinearity,est_snr_db,det_snr_db,method,trial,seed,metric_name,metric_value"
    )

    ident = m.DctNeuron.identity(6, 512)
    assert ident.q_count == 6 and len(ident.coeffs) == 6
    assert abs(ident.evaluate(0.5) - 0.5) < 0.05
    back = m.DctNeuron.from_csv(ident.to_csv())
    assert back.coeffs == ident.coeffs

    # Two CP-free blocks give the 2048 identification samples.
    _, x1, _ = m.ofdm_block(1024, 0, 16, seed=1)
    _, x2, _ = m.ofdm_block(1024, 0, 16, seed=2)
    x = x1 + x2
    taps = [0.8 + 0.1j, 0.4 - 0.3j, 0.2 + 0.2j]
    norm = math.sqrt(sum(abs(t) ** 2 for t in taps))
    taps = [t / norm for t in taps]
    y = m.propagate(x, "soft", taps, snr_db=20.0, seed=3)
    est = m.estimate_channel(x, y)
    assert est.samples_used == 2048
    assert len(est.mse_trace) == 30
    nmse = m.combined_nmse(est.neuron, est.channel, "soft", taps, x2)
    print(f"combined NMSE at 20 dB: {nmse:.1f} dB")
    assert nmse < -25.0

    g = m.learn_inverse(m.DctNeuron.identity(6, 512), samples=2000, sweeps=5, seed=4)
    assert g.q_count == 512

    ber = m.theoretical_ber(taps, 15.0)
    assert 1e-3 < ber < 0.1

    csv = m.run_experiment("scenario = estimate\ntrials = 1\nworkers = 1\n")
    lines = csv.splitlines()
    assert lines[0] == m.CSV_HEADER and len(lines) == 4

    try:
        m.amplitude("cubic", 0.5)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown nonlinearity accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
