"""
Autonomous systems: singular values of matrix powers, Jordan-block limits,
stable invariant subspaces of ``A^T`` and the asymptotic null space of the
filter covariance.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linalg
from .diagnostics import restriction_norm
from .errors import InvalidInput, OutOfValidatedRange, SpectralGapViolation
from .kalman import run_filter
from .linalg import principal_angles
from .system import operator_stream, random_orthogonal, rng_for

THETA_GAP = 1e-6
N_POW_MAX = 5000
JORDAN_N_MAX = 100_000
CONVERGENCE_TOL = 1e-10
_FRAME_SEED = 20170101
_ON_CIRCLE = 1e-12


@dataclass(frozen=True, eq=False)
class AutonomousAnalysis:
    A: np.ndarray
    eig_mags: np.ndarray
    stable_space_AT: np.ndarray
    d0: int


@dataclass(frozen=True, eq=False)
class PowerConvergence:
    """``values[i, j] = sigma_j(A^n_i)^(1/n_i)`` next to the target ``|lambda_j(A)|``."""

    n_values: np.ndarray
    values: np.ndarray
    eig_mags: np.ndarray

    @property
    def rel_error(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(self.values - self.eig_mags) / self.eig_mags

    @property
    def final_rel_error(self):
        return float(np.max(self.rel_error[-1]))


@dataclass(frozen=True, eq=False)
class JordanBlockProbe:
    lam: complex
    k: int
    n_values: np.ndarray
    measured: np.ndarray  # shape (k, len(n_values))

    @property
    def modulus(self):
        return abs(self.lam)


@dataclass(frozen=True, eq=False)
class AutonomousNullspace:
    restriction_delta: float
    restriction_sigma: float
    direction_norms: np.ndarray
    eig_mags: np.ndarray
    d0: int
    converged: bool
    last_change: float


def _check_gap(eigs, alpha):
    # on the circle to roundoff counts as neutral (not stable); only the
    # ambiguous band next to it is refused
    dist = np.abs(np.abs(eigs) - alpha)
    close = (dist < THETA_GAP) & (dist > _ON_CIRCLE * max(alpha, 1.0))
    if np.any(close):
        raise SpectralGapViolation(
            f"eigenvalue {eigs[np.argmax(close)]} lies within {THETA_GAP:g} of |z| = {alpha:g}"
        )


def stable_space(A, alpha=1.0):
    """
    Orthonormal basis of ``E^alpha(A^T)``: the real invariant subspace of
    ``A^T`` for eigenvalues with ``|lambda| < alpha``, from an ordered real
    Schur form (complex pairs stay together).
    """
    A = linalg.as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise InvalidInput("A must be square")
    if not alpha > 0:
        raise InvalidInput("alpha must be positive")
    _check_gap(np.linalg.eigvals(A), alpha)
    cut = alpha * (1 - _ON_CIRCLE)
    _, Z, sdim = scipy.linalg.schur(A.T, output="real", sort=lambda x, y: np.hypot(x, y) < cut)
    return Z[:, :sdim].copy()


def analyze_autonomous(A, alpha=1.0):
    A = linalg.as_matrix(A, "A")
    mags = np.sort(np.abs(np.linalg.eigvals(A)))[::-1]
    basis = stable_space(A, alpha)
    return AutonomousAnalysis(A, mags, basis, A.shape[0] - basis.shape[1])


def _generic_frame(d):
    return random_orthogonal(rng_for(_FRAME_SEED, 0, d), d)


def power_log_singular_values(A, n_values, n_max=N_POW_MAX):
    """
    ``log sigma_j(A^n)`` for each ``n`` in `n_values`, shape ``(len(n), d)``.

    Powers are carried as a log-scaled QR product started from a fixed generic
    orthogonal frame, so ``n`` up to ``N_POW_MAX`` never overflows.
    """
    A = linalg.as_matrix(A, "A")
    n_values = np.asarray(n_values, dtype=int)
    if n_values.size == 0:
        return np.zeros((0, A.shape[0]))
    if n_values.min() < 1 or n_values.max() > n_max:
        raise OutOfValidatedRange(f"powers validated for 1 <= n <= {n_max}")
    d = A.shape[0]
    # normalize so the factor stays O(1) per step; add the scale back in logs
    scale = linalg.norm(A)
    As = A / scale
    Q, logr, U = _generic_frame(d), np.zeros(d), np.eye(d)
    wanted = set(n_values.tolist())
    found = {}
    for n in range(1, n_values.max() + 1):
        Q, logr, U = linalg.accumulate_qr(As, Q, logr, U)
        if n in wanted:
            found[n] = linalg.graded_log_singular_values(logr, U) + n * np.log(scale)
    return np.array([found[n] for n in n_values.tolist()])


def ef_eigenvalue_convergence(A, n_values):
    """``[sigma_j(A^n)]^(1/n)`` per n, to be compared with ``|lambda_j(A)|``."""
    n_values = np.asarray(n_values, dtype=int)
    logs = power_log_singular_values(A, n_values)
    mags = np.sort(np.abs(np.linalg.eigvals(linalg.as_matrix(A))))[::-1]
    return PowerConvergence(n_values, np.exp(logs / n_values[:, None]), mags)


def jordan_block(lam, k):
    """``k x k`` Jordan block with eigenvalue `lam` (complex allowed)."""
    dtype = complex if np.iscomplexobj(lam) else float
    return lam * np.eye(k, dtype=dtype) + np.eye(k, k, 1, dtype=dtype)


def _realify(C):
    return np.block([[C.real, -C.imag], [C.imag, C.real]])


def jordan_probe(lam, k, n_values):
    """
    ``[sigma_j(J_lam^n)]^(1/n)`` for ``j = 1..k`` and each ``n``.

    A complex block is handled through its real ``2k x 2k`` form, whose
    singular values are those of the block, each repeated twice.
    """
    n_values = np.asarray(n_values, dtype=int)
    if not 1 <= k <= 6:
        raise InvalidInput("block size must be in 1..6")
    if np.any(n_values < 1):
        raise InvalidInput("powers must be positive")
    r = abs(lam)
    if lam == 0:
        # nilpotent shift: J^n has min(n, k) zero rows -> exact singular values
        sv = np.array([[1.0 if j < k - n else 0.0 for j in range(k)] for n in n_values])
        return JordanBlockProbe(lam, k, n_values, sv.T ** (1.0 / n_values))
    if not 1e-3 <= r <= 1e3:
        raise InvalidInput("|lambda| must lie in [1e-3, 1e3]")
    if np.iscomplexobj(lam) and complex(lam).imag != 0:
        J = _realify(jordan_block(complex(lam), k))
        logs = power_log_singular_values(J, n_values, JORDAN_N_MAX)[:, ::2]
    else:
        J = jordan_block(float(np.real(lam)), k)
        logs = power_log_singular_values(J, n_values, JORDAN_N_MAX)
    return JordanBlockProbe(lam, k, n_values, np.exp(logs / n_values[:, None]).T)


def backward_stable_frame(A, n, d0):
    """Stable columns of the QR backward frame of ``A^n`` from a generic start."""
    A = linalg.as_matrix(A, "A")
    if not 1 <= n <= N_POW_MAX:
        raise OutOfValidatedRange(f"n must be in 1..{N_POW_MAX}")
    scale = linalg.norm(A)
    Q = _generic_frame(A.shape[0])
    for _ in range(n):
        Q, _ = linalg.qr_positive((A / scale) @ Q)
    return Q[:, d0:]


def eigenspace_equality_check(A, alpha=1.0, n=400):
    """
    Largest principal angle between the backward stable Lyapunov proxy after
    `n` steps and ``E^alpha(A^T)``.
    """
    basis = stable_space(A, alpha)
    d0 = basis.shape[0] - basis.shape[1]
    if basis.shape[1] == 0:
        return 0.0
    angles = principal_angles(backward_stable_frame(A, n, d0), basis)
    return float(angles[-1])


def sorted_eig_AT(A):
    """Eigenvalues of ``A`` and unit eigenvectors of ``A^T``, by decreasing ``|lambda|``."""
    w, V = np.linalg.eig(np.asarray(A, dtype=float).T)
    order = np.argsort(-np.abs(w), kind="stable")
    V = V[:, order]
    return w[order], V / np.linalg.norm(V, axis=0)


def nullspace_from_run(A, run, alpha=1.0):
    """Measure the last covariances of a finished FilterRun against ``A^T``."""
    A = linalg.as_matrix(A, "A")
    last = run.states[-1]
    basis = stable_space(A, alpha)
    w, V = sorted_eig_AT(A)
    norms = np.linalg.norm(last.Delta @ V, axis=0)
    change = linalg.norm(last.Delta - run.states[-2].Delta) if len(run.states) > 2 else np.inf
    return AutonomousNullspace(
        restriction_delta=restriction_norm(last.Delta, basis),
        restriction_sigma=restriction_norm(last.Sigma, basis),
        direction_norms=norms,
        eig_mags=np.abs(w),
        d0=A.shape[0] - basis.shape[1],
        converged=bool(change <= CONVERGENCE_TOL),
        last_change=float(change),
    )


def constant_dynamics(spec, ops=None):
    """The single ``A`` of a time-invariant spec."""
    if spec.generator not in ("Autonomous", "ExplicitSequence"):
        raise InvalidInput("a time-invariant A needs an Autonomous or ExplicitSequence spec")
    if spec.generator == "ExplicitSequence" and len(spec.explicit["A"]) != 1:
        raise InvalidInput("explicit A must be a single constant matrix")
    return (ops or operator_stream(spec))(1).A


def autonomous_nullspace_check(spec, alpha=1.0):
    """
    Run the filter for an autonomous spec and measure the covariance on
    ``E^alpha(A^T)`` and on each eigenvector of ``A^T``.
    """
    ops = operator_stream(spec)
    A = constant_dynamics(spec, ops)
    return nullspace_from_run(A, run_filter(spec, ops=ops, checkpoints=()), alpha)
