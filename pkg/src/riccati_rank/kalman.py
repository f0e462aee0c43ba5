"""
Kalman filter recursions for perfect-model systems, plus the closure
products ``M_n = (I - K_n H_n) A_n M_{n-1}`` and ``B_{0:n} = A_n ... A_1``
that factor the analysis covariance as ``Delta_n = M_n Delta_0 B_{0:n}^T``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import DegenerateInnovation, InvalidInput, NumericalBlowup, OutOfValidatedRange
from .linalg import norm, solve, symmetrize
from .system import initial_covariance, operator_stream

logger = logging.getLogger(__name__)

N_FACTOR_MAX = 20
M_NORM_GUARD = 1e8
TAU_PSD = 1e-10
GAIN_IDENTITY_TOL = 1e-9
JOSEPH_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class FilterState:
    n: int
    x_f: np.ndarray
    Sigma: np.ndarray
    x_a: np.ndarray
    Delta: np.ndarray
    K: np.ndarray


@dataclass(frozen=True, eq=False)
class ClosureAccumulator:
    """
    Running products ``M_n`` (dense) and ``B_{0:n}`` (factored).

    ``B_{0:n} = B_q @ diag(exp(B_logr)) @ B_r`` with `B_q` orthonormal and
    `B_r` unit upper triangular, so the factor survives long horizons while
    `B_q` is the QR backward basis at step `n`.
    """

    n: int
    M: np.ndarray
    B_q: np.ndarray
    B_logr: np.ndarray
    B_r: np.ndarray

    @classmethod
    def initial(cls, d):
        return cls(0, np.eye(d), np.eye(d), np.zeros(d), np.eye(d))

    def propagator(self):
        """Dense ``B_{0:n}``; only meaningful for ``n <= N_FACTOR_MAX``."""
        return linalg.dense_from_factors(self.B_q, self.B_logr, self.B_r)


def initial_state(Delta0, x0=None):
    Delta0 = symmetrize(linalg.as_matrix(Delta0, "Delta0"))
    d = Delta0.shape[0]
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
    return FilterState(0, x0.copy(), Delta0.copy(), x0.copy(), Delta0, np.zeros((d, 0)))


def forecast(prev, ops):
    """Return ``(x_f, Sigma)`` with ``Sigma = A Delta_prev A^T``."""
    A = ops.A
    Sigma = symmetrize(A @ prev.Delta @ A.T)
    x_f = A @ prev.x_a
    if not (np.all(np.isfinite(Sigma)) and np.all(np.isfinite(x_f))):
        raise NumericalBlowup(ops.step_index)
    return x_f, Sigma


def analyze(x_f, Sigma, ops, y):
    """Gain, Joseph-form analysis covariance and mean update."""
    H, Q = ops.H, ops.Q
    S = symmetrize(H @ Sigma @ H.T + Q)
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise DegenerateInnovation(f"innovation covariance not SPD at step {ops.step_index}")
    K = solve(S, H @ Sigma).T
    I_KH = np.eye(Sigma.shape[0]) - K @ H
    Delta = symmetrize(I_KH @ Sigma @ I_KH.T + K @ Q @ K.T)
    x_a = x_f + K @ (np.asarray(y, dtype=float) - H @ x_f)
    return FilterState(ops.step_index, x_f, Sigma, x_a, Delta, K)


def step(prev, ops, y):
    x_f, Sigma = forecast(prev, ops)
    return analyze(x_f, Sigma, ops, y)


def gain_identity_residual(state, ops):
    """Relative residual of ``K = Delta H^T Q^-1``."""
    rhs = solve(ops.Q, ops.H @ state.Delta).T
    return norm(state.K - rhs) / max(norm(state.K), np.finfo(float).tiny)


def joseph_residual(state, ops):
    """Relative gap between the Joseph form and ``(I - K H) Sigma``."""
    plain = (np.eye(state.Sigma.shape[0]) - state.K @ ops.H) @ state.Sigma
    return norm(state.Delta - plain) / max(norm(state.Delta), np.finfo(float).tiny)


def min_psd_margin(Z):
    """Smallest eigenvalue of `Z` scaled by ``||Z||`` (``>= -TAU_PSD`` means PSD)."""
    scale = norm(Z)
    if scale == 0:
        return 0.0
    return float(np.linalg.eigvalsh(Z)[0] / scale)


def step_closure(acc, ops, K):
    """Advance ``M`` and the factored ``B`` by one step."""
    A, H = ops.A, ops.H
    d = A.shape[0]
    M = (np.eye(d) - K @ H) @ A @ acc.M
    m = norm(M)
    if not np.isfinite(m) or m > M_NORM_GUARD:
        raise NumericalBlowup(ops.step_index, f"||M_n|| = {m:.3e} at step {ops.step_index}; "
                              "system is likely not observable")
    B_q, B_logr, B_r = linalg.accumulate_qr(A, acc.B_q, acc.B_logr, acc.B_r)
    return ClosureAccumulator(acc.n + 1, M, B_q, B_logr, B_r)


def factorized_delta(acc, Delta0, n=None):
    """``M_n Delta_0 B_{0:n}^T`` from the accumulator (``n <= N_FACTOR_MAX``)."""
    if n is not None and n != acc.n:
        raise InvalidInput(f"accumulator is at step {acc.n}, not {n}")
    if acc.n > N_FACTOR_MAX:
        raise OutOfValidatedRange(f"dense B_0:n only validated for n <= {N_FACTOR_MAX}")
    return acc.M @ np.asarray(Delta0, dtype=float) @ acc.propagator().T


@dataclass(eq=False)
class FilterRun:
    """
    Output of :func:`run_filter`.

    ``states[n]`` is the FilterState at step ``n`` (``states[0]`` holds the
    prior). ``closures`` maps requested steps to ClosureAccumulator
    snapshots. The per-step arrays are indexed by ``n - 1``.
    """

    states: list
    closures: dict
    gain_residual: np.ndarray
    joseph_residual: np.ndarray
    psd_margin: np.ndarray
    M_norm: np.ndarray
    final_closure: ClosureAccumulator = field(repr=False, default=None)

    @property
    def Delta0(self):
        return self.states[0].Delta

    def norms(self, attr):
        return np.array([norm(getattr(s, attr)) for s in self.states[1:]])


def run_filter(spec, traj=None, ops=None, checkpoints=None, x00=None, strict=True):
    """
    Run the filter over the spec's horizon.

    Parameters
    ----------
    spec : SystemSpec
    traj : Trajectory, optional
        Supplies observations; without it every ``y_n`` is zero, which leaves
        every covariance quantity unchanged.
    ops : callable, optional
        Operator stream; defaults to ``operator_stream(spec)``.
    checkpoints : iterable of int, optional
        Steps at which to keep ClosureAccumulator snapshots (default: all).
    x00 : array, optional
        Prior mean ``x_{0|0}``; zero by default.
    strict : bool
        Raise NumericalBlowup when a per-step invariant (gain identity,
        Joseph agreement, PSD) is violated.
    """
    ops = ops or operator_stream(spec)
    N, d = spec.horizon, spec.d
    keep = set(range(N + 1)) if checkpoints is None else set(checkpoints) | {0}
    Delta0 = initial_covariance(spec)
    state = initial_state(Delta0, x00)
    acc = ClosureAccumulator.initial(d)
    states, closures = [state], {0: acc} if 0 in keep else {}
    gain_res = np.empty(N)
    jos_res = np.empty(N)
    psd = np.empty(N)
    m_norm = np.empty(N)
    zero_y = np.zeros(spec.q)
    for n in range(1, N + 1):
        op = ops(n)
        y = traj.y(n) if traj is not None else zero_y
        try:
            state = step(state, op, y)
            acc = step_closure(acc, op, state.K)
        except NumericalBlowup as exc:
            exc.step = n
            raise
        gain_res[n - 1] = gain_identity_residual(state, op)
        jos_res[n - 1] = joseph_residual(state, op)
        psd[n - 1] = min(min_psd_margin(state.Delta), min_psd_margin(state.Sigma))
        m_norm[n - 1] = norm(acc.M)
        if strict:
            _enforce(n, gain_res[n - 1], jos_res[n - 1], psd[n - 1])
        states.append(state)
        if n in keep:
            closures[n] = acc
    return FilterRun(states, closures, gain_res, jos_res, psd, m_norm, acc)


def _enforce(n, gain, joseph, psd):
    if gain > GAIN_IDENTITY_TOL:
        raise NumericalBlowup(n, f"gain identity residual {gain:.2e} at step {n}")
    if joseph > JOSEPH_TOL:
        raise NumericalBlowup(n, f"Joseph/plain covariance mismatch {joseph:.2e} at step {n}")
    if psd < -TAU_PSD:
        raise NumericalBlowup(n, f"covariance lost positive semidefiniteness at step {n}")


def trend_slope(values):
    """Least-squares slope of `values` against their index."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(np.polyfit(np.arange(values.size), values, 1)[0])


def bounded_tail(values, max_slope=1e-3):
    """True if the second half of `values` shows no growth trend above `max_slope`."""
    values = np.asarray(values, dtype=float)
    return bool(np.all(np.isfinite(values)) and trend_slope(values[values.size // 2:]) <= max_slope)
