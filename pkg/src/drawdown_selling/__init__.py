"""Optimal selling of an asset whose owner discounts faster while in drawdown.

Log prices follow a spectrally negative Levy process (Brownian motion with
drift plus hyper-exponential downward jumps).  The owner discounts at rate
``r`` and at ``r + q`` whenever the price sits more than ``c`` below its
running maximum.  The package classifies the owner's anxiety regime, solves
for the take-profit, stop-loss and trailing-stop thresholds, evaluates the
value function, and checks everything by Monte Carlo.
"""

from .levy_model import (
    JumpSpec,
    LevyModel,
    ModelError,
    NumericError,
    Preferences,
    hyper_exponential,
    phi,
    psi,
    validate,
)
from .regime import MILD, SEVERE, RegimeReport
from .scale_functions import OccupationKernel, ScaleFn, w_two_rate
from .thresholds import SEVERE_HIGH, SEVERE_LOW, Problem, ThresholdSet, solve
from .value_function import Action, Region, StateLabel, ValueSurface

__all__ = [
    "JumpSpec", "LevyModel", "ModelError", "NumericError", "Preferences", "hyper_exponential",
    "phi", "psi", "validate", "MILD", "SEVERE", "RegimeReport", "OccupationKernel", "ScaleFn",
    "w_two_rate", "SEVERE_HIGH", "SEVERE_LOW", "Problem", "ThresholdSet", "solve", "Action",
    "Region", "StateLabel", "ValueSurface",
]
