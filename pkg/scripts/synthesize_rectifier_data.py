"""Regenerate the bundled synthetic rectifier measurements and their fit.

The published measurement points are not available in machine-readable form,
so the bundled dataset is drawn from a logistic curve whose knee, saturation
level and input range were chosen by hand, with 1% multiplicative noise.

Usage: python3 scripts/synthesize_rectifier_data.py
"""

from pathlib import Path

import numpy as np

from ssris.rectifier import RectifierModel, fit, load_measurements, save_fit

DATA = Path(__file__).resolve().parents[1] / "src" / "ssris" / "data"
GENERATOR = RectifierModel(c=2.5e4, d=8.0e-5, p_sat=9.6e-5)
INPUTS_MW = [0.005, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.1, 0.12, 0.15, 0.2,
             0.25, 0.3, 0.4, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0]
SEED = 2024


def main():
    rng = np.random.default_rng(SEED)
    x = np.array(INPUTS_MW) * 1e-3
    y = GENERATOR.psi(x) * (1.0 + 0.01 * rng.standard_normal(x.size))
    csv_path = DATA / "rectifier_measurements.csv"
    lines = ["# synthetic: logistic c=2.5e4 /W, d=80 uW, P_sat=96 uW, 1% noise, seed 2024",
             "rf_input_mw,dc_output_uw"]
    lines += [f"{a:g},{b * 1e6:.4f}" for a, b in zip(INPUTS_MW, y)]
    csv_path.write_text("\n".join(lines) + "\n")
    result = fit(load_measurements(csv_path))
    save_fit(result, DATA / "rectifier_fit.json", source="rectifier_measurements.csv")
    print(result.model, result.rms)


if __name__ == "__main__":
    main()
