"""
Lyapunov exponents and backward/forward Lyapunov vectors by the QR method,
and direct finite-window Oseledets matrices for convergence studies.

Operator streams are callables ``n -> StepOperators`` (or ``n -> A_n``), as
produced by :func:`riccati_rank.system.operator_stream`.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import InvalidInput, OutOfValidatedRange
from .kalman import N_FACTOR_MAX
from .linalg import SortedSpectrum, principal_angles, qr_positive
from .system import dynamics

THETA_NEUTRAL = 1e-3


@dataclass(frozen=True, eq=False)
class LyapunovResult:
    """
    Attributes
    ----------
    exponents : ndarray, shape (d,)
        Lyapunov exponents, nonincreasing, in log-magnitude per step.
    backward_basis : ndarray, shape (d, d)
        QR frame at the final step, proxy for ``L^b(N)``.
    forward_basis : ndarray, shape (d, d)
        Final frame of the transposed reversed recursion, proxy for ``L^f(0)``.
    d0 : int
        Number of exponents ``>= -THETA_NEUTRAL``.
    history : ndarray, shape (N, d)
        Cumulative running exponent estimates after each step.
    tail_exponents : ndarray, shape (d,)
        Averages of the log-diagonals over the second half of the run.
    log_det_mean : float
        ``(1/N) sum_n log|det A_n|``, the exponent sum the estimates must match.
    """

    exponents: np.ndarray
    backward_basis: np.ndarray
    forward_basis: np.ndarray
    d0: int
    history: np.ndarray
    tail_exponents: np.ndarray
    log_det_mean: float


@dataclass(frozen=True, eq=False)
class OseledetsSnapshot:
    n: int
    Ef_spectrum: SortedSpectrum
    Eb_spectrum: SortedSpectrum


def count_nonnegative(exponents, theta=THETA_NEUTRAL):
    return int(np.sum(np.asarray(exponents) >= -theta))


def qr_iteration(ops_stream, N, Q0=None):
    """
    Run ``Q_n R_n = A_n Q_{n-1}`` for ``n = 1..N``.

    Returns the final frame and the ``(N, d)`` array of ``log diag(R_n)``.
    """
    Q = None if Q0 is None else np.array(Q0, dtype=float)
    logs = []
    for n in range(1, N + 1):
        A = dynamics(ops_stream(n))
        if Q is None:
            Q = np.eye(A.shape[0])
        Q, R = qr_positive(A @ Q)
        logs.append(np.log(np.diag(R)))
    return Q, np.array(logs)


def forward_frame(ops_stream, N):
    """QR recursion on ``A_N^T, ..., A_1^T``; its final frame approximates ``L^f(0)``."""
    Q = None
    for n in range(N, 0, -1):
        A = dynamics(ops_stream(n))
        if Q is None:
            Q = np.eye(A.shape[0])
        Q, _ = qr_positive(A.T @ Q)
    return Q


def qr_exponents(ops_stream, N, theta=THETA_NEUTRAL):
    """
    Lyapunov exponents and vectors of the cocycle ``A_N ... A_1``.

    Parameters
    ----------
    ops_stream : callable
        ``n -> StepOperators`` or ``n -> A_n`` for ``n = 1..N``.
    N : int
        Number of steps, at least the state dimension.
    theta : float
        Neutral band: exponents ``>= -theta`` count as non-negative.
    """
    d = dynamics(ops_stream(1)).shape[0]
    if N < d:
        raise InvalidInput(f"need N >= d ({d}), got N = {N}")
    Qb, logs = qr_iteration(ops_stream, N)
    cumulative = np.cumsum(logs, axis=0) / np.arange(1, N + 1)[:, None]
    exps = cumulative[-1]
    log_det = np.mean([np.linalg.slogdet(dynamics(ops_stream(n)))[1] for n in range(1, N + 1)])
    return LyapunovResult(
        exponents=exps,
        backward_basis=Qb,
        forward_basis=forward_frame(ops_stream, N),
        d0=count_nonnegative(exps, theta),
        history=cumulative,
        tail_exponents=logs[N // 2:].mean(axis=0),
        log_det_mean=float(log_det),
    )


def dense_propagator(ops_stream, n, start=0):
    """``B_{start:start+n} = A_{start+n} ... A_{start+1}`` formed densely."""
    B = None
    for k in range(start + 1, start + n + 1):
        A = dynamics(ops_stream(k))
        B = A.copy() if B is None else A @ B
    if B is None:
        B = np.eye(dynamics(ops_stream(start + 1)).shape[0])
    return B


def oseledets_direct(ops_stream, n):
    """
    Spectra of ``E^f_n(0)`` and ``E^b_n(n)`` from one SVD of ``B_{0:n}``.

    Both spectra equal ``sigma_j(B_{0:n})^(1/n)``; eigenvectors are the
    right (forward) and left (backward) singular vectors.
    """
    if not 1 <= n <= N_FACTOR_MAX:
        raise OutOfValidatedRange(f"direct Oseledets matrices only for 1 <= n <= {N_FACTOR_MAX}")
    U, s, V = linalg.svd(dense_propagator(ops_stream, n))
    vals = s ** (1.0 / n)
    return OseledetsSnapshot(n, SortedSpectrum(vals, V), SortedSpectrum(vals.copy(), U))


def backward_convergence(ops_stream, N, checkpoints):
    """
    Angle between each QR-frame column and the matching left singular vector
    of ``B_{0:n}`` at every checkpoint.

    Returns an array of shape ``(len(checkpoints), d)``.
    """
    checkpoints = sorted(checkpoints)
    if checkpoints and checkpoints[-1] > min(N, N_FACTOR_MAX):
        raise OutOfValidatedRange(f"checkpoints must be <= {min(N, N_FACTOR_MAX)}")
    rows = []
    Q = None
    done = 0
    for c in checkpoints:
        for n in range(done + 1, c + 1):
            A = dynamics(ops_stream(n))
            Q = np.eye(A.shape[0]) if Q is None else Q
            Q, _ = qr_positive(A @ Q)
        done = c
        U = oseledets_direct(ops_stream, c).Eb_spectrum.vectors
        rows.append([principal_angles(Q[:, [j]], U[:, [j]])[0] for j in range(U.shape[1])])
    return np.array(rows)
