"""Monte Carlo toolkit for randomly biased walks on Galton-Watson trees.

Simulates the recurrent (critically tilted) biased walk on random marked
trees, computes exact excursion/hitting formulas for verification, and runs
the local-time, favorite-site, and spine diagnostics exposed by the
``branchwalk`` CLI.
"""

__version__ = "0.1.0"

from .families import (
    CalibrationError,
    DegenerateLawError,
    DisplacementLaw,
    PRESET_NAMES,
    calibrate_law,
    preset,
)
from .rng import make_generator, seed_sequence

__all__ = [
    "CalibrationError",
    "DegenerateLawError",
    "DisplacementLaw",
    "PRESET_NAMES",
    "calibrate_law",
    "preset",
    "make_generator",
    "seed_sequence",
    "__version__",
]
