"""Regenerate the sample analyzer traces under scenarios/traces/.

For each pump power the traces hold the optimal-quadrature spectrum of the
reference scenario as the fit model describes it, with 0.03 dB analyzer
scatter (seed 7), three repeats per role.
"""

from pathlib import Path

import numpy as np

from kerrsqueeze.calibration import reference_calibration
from kerrsqueeze.fitting import model_squeezing_dB
from kerrsqueeze.synthetic import analyzer_traces
from kerrsqueeze.traces import serialize_trace

OUT = Path(__file__).resolve().parent.parent / "scenarios" / "traces"
POWERS_MW = (26, 39, 52)


def main():
    cal = reference_calibration()
    f = np.linspace(5e6, 2e9, 400)
    rng = np.random.default_rng(7)
    OUT.mkdir(parents=True, exist_ok=True)
    for mw in POWERS_MW:
        y = model_squeezing_dB(cal.device, mw * 1e-3, f, cal.pump.detuning_rad_per_s,
                               cal.noise.chain.total_efficiency, thermo=cal.noise.thermo)
        traces = analyzer_traces(f, y, n_traces=3, noise_dB=0.03, shot_level_dBm=-72.0,
                                 clearance_dB=15.0, detector_bandwidth_Hz=800e6, rng=rng)
        for label, items in traces.items():
            for i, tr in enumerate(items):
                (OUT / f"p{mw}mW_{label}_{i}.csv").write_text(serialize_trace(tr))


if __name__ == "__main__":
    main()
