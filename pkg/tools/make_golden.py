"""Rewrite tests/golden/reference_calibration.json from the current model."""

from pathlib import Path

from kerrsqueeze.artifacts import write_json
from kerrsqueeze.calibration import golden_record

OUT = Path(__file__).resolve().parent.parent / "tests" / "golden" / "reference_calibration.json"

if __name__ == "__main__":
    write_json(OUT, golden_record())
