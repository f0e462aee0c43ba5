"""Observability and controllability Gramians for time-varying linear systems."""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalBlowup
from .linalg import symmetrize
from .system import dynamics

THETA_OBS = 1e-8


class ObservabilityWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class GramianReport:
    n: int
    gramian: np.ndarray
    det: float
    logdet: float
    min_eig: float
    kind: str

    @property
    def observable(self):
        return self.kind == "Observability" and self.min_eig > THETA_OBS


def _report(n, factor, kind):
    """
    Gramian ``F F^T`` from its square-root factor `F`. The spectrum comes from
    the singular values of `F`, which keeps the smallest eigenvalue accurate
    even when ``||F||^2`` is far beyond ``1/machine-eps``.
    """
    if not np.all(np.isfinite(factor)):
        raise NumericalBlowup(n, f"{kind} Gramian overflowed at base step {n}")
    d = factor.shape[0]
    G = symmetrize(factor @ factor.T)
    sv = np.zeros(d)
    if factor.shape[1]:
        s = np.linalg.svd(factor, compute_uv=False)
        sv[: min(d, s.size)] = s[:d]
    w = sv ** 2
    with np.errstate(divide="ignore"):
        logdet = float(np.sum(np.log(w)))
    det = float(np.exp(logdet)) if np.isfinite(logdet) else 0.0
    return GramianReport(n, G, det, logdet, float(w.min()), kind)


def observability_gramian(ops_stream, n, d=None):
    """
    ``sum_{m=0}^{d-1} B_{n:n+m}^T H_{n+m}^T Q_{n+m}^{-1} H_{n+m} B_{n:n+m}``.

    ``B_{n:n}`` is the identity and ``B_{n:n+m} = A_{n+m} ... A_{n+1}``.
    """
    first = ops_stream(n)
    d = d or first.A.shape[0]
    rows = []
    B = np.eye(d)
    for m in range(d):
        op = first if m == 0 else ops_stream(n + m)
        if m > 0:
            B = op.A @ B
        L = np.linalg.cholesky(op.Q)
        rows.append(scipy.linalg.solve_triangular(L, op.H @ B, lower=True))
    return _report(n, np.vstack(rows).T, "Observability")


def controllability_gramian(ops_stream, F_stream, n, d=None):
    """
    ``sum_{m=1}^{d} B_{n+m:n+d} F_{n+m} F_{n+m}^T B_{n+m:n+d}^T``.

    `F_stream` maps a step to its noise loading ``F``; ``None`` (or a stream
    returning ``None``) is the perfect model ``F = 0``.
    """
    d = d or dynamics(ops_stream(n + 1)).shape[0]
    cols = [np.zeros((d, 0))]
    if F_stream is not None:
        # suffix products B_{n+m:n+d} built backwards from B_{n+d:n+d} = I
        B = np.eye(d)
        for m in range(d, 0, -1):
            F = F_stream(n + m)
            if F is not None:
                cols.append(B @ np.asarray(F, dtype=float).reshape(d, -1))
            B = B @ dynamics(ops_stream(n + m))
    return _report(n, np.hstack(cols), "Controllability")


@dataclass(frozen=True)
class ObservabilityScan:
    steps: tuple
    min_eigs: tuple
    min_eig: float
    warn: bool


def uniform_observability_scan(ops_stream, steps, d=None):
    """Smallest Gramian eigenvalue over the base steps; warns below ``THETA_OBS``."""
    steps = tuple(int(s) for s in steps)
    mins = tuple(observability_gramian(ops_stream, s, d).min_eig for s in steps)
    lowest = min(mins)
    warn = lowest <= THETA_OBS
    if warn:
        warnings.warn(
            f"observability Gramian min eigenvalue {lowest:.3e} <= {THETA_OBS:g}",
            ObservabilityWarning,
            stacklevel=2,
        )
    return ObservabilityScan(steps, mins, lowest, warn)
