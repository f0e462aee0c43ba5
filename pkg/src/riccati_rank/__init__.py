"""
Kalman filtering for perfect-model linear systems, with QR-method Lyapunov
analysis and numerical checks of error-covariance rank collapse onto the
unstable-neutral backward Lyapunov subspace.
"""

__version__ = "0.1.0"

from . import diagnostics, gramian, kalman, linalg, lyapunov, spectral, system
from .errors import (
    DegenerateInnovation,
    GenerationFailure,
    HypothesisFailed,
    IllConditioned,
    InvalidInput,
    NumericalBlowup,
    OutOfValidatedRange,
    RankDeficient,
    RiccatiRankError,
    SpectralGapViolation,
)
from .kalman import ClosureAccumulator, FilterState, run_filter
from .lyapunov import LyapunovResult, qr_exponents

from .system import SystemSpec, StepOperators, Trajectory, operators_at, simulate_truth

