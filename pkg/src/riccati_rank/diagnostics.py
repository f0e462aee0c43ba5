"""
Per-step metrics of covariance collapse: eps-eigenspace dimensions,
projections onto backward Lyapunov directions, and restriction norms onto the
stable backward subspace.
"""

from dataclasses import dataclass

import numpy as np

from .errors import HypothesisFailed, InvalidInput
from .linalg import (
    as_matrix,
    check_orthonormal,
    norm,
    orthonormal_basis,
    principal_angles,
    solve,
    sym_eig,
    symmetrize,
)

DEFAULT_EPS = 1e-6


@dataclass(frozen=True, eq=False)
class DiagnosticsFrame:
    n: int
    delta_eigs: np.ndarray
    sigma_eigs: np.ndarray
    proj_norms: np.ndarray
    restriction_delta: float
    restriction_sigma: float
    eps_rank_delta: int
    eps_rank_sigma: int


def abs_eigs(Z):
    """``|eigenvalues|`` of a symmetric matrix, descending."""
    return np.abs(sym_eig(Z).values)


def eps_eigenspace_dim(Z, eps):
    """Number of eigenvalues of symmetric `Z` with ``|lambda| < eps``."""
    if not eps > 0:
        raise InvalidInput("eps must be positive")
    return int(np.sum(abs_eigs(Z) < eps))


def lemma_subspace_bound_check(Z, W, eps):
    """
    Oracle for the subspace bound: if ``||Z u|| < eps`` for every unit `u` in
    ``span(W)`` then ``dim E^eps(Z) >= rank(W)``.

    Raises HypothesisFailed when the premise does not hold.
    """
    Z = symmetrize(as_matrix(Z, "Z"))
    W = check_orthonormal(W, "W")
    sup = norm(Z @ W)
    if not sup < eps:
        raise HypothesisFailed(f"sup ||Z u|| over span(W) is {sup:.3e} >= eps = {eps:.3e}")
    return eps_eigenspace_dim(Z, eps) >= W.shape[1]


def projection_profile(Delta, U):
    """Column norms of ``Delta @ U`` in column order (unsorted)."""
    U = check_orthonormal(U, "U")
    return np.linalg.norm(np.asarray(Delta, dtype=float) @ U, axis=0)


def restriction_norm(Cov, Lbs):
    """``||Cov Lbs Lbs^T||``, computed as the largest singular value of ``Cov Lbs``."""
    Lbs = check_orthonormal(Lbs, "Lbs")
    if Lbs.shape[1] == 0:
        return 0.0
    return norm(np.asarray(Cov, dtype=float) @ Lbs)


def stable_map_check(M, Delta0, Lf_stable, Lb_stable):
    """
    Largest principal angle between ``span(M^-T Delta0^-1 Lf_stable)`` and
    ``span(Lb_stable)``.
    """
    Lf_stable = check_orthonormal(Lf_stable, "Lf_stable")
    Lb_stable = check_orthonormal(Lb_stable, "Lb_stable")
    if Lf_stable.shape[1] == 0:
        return 0.0
    w = solve(np.asarray(M, dtype=float).T, solve(Delta0, Lf_stable))
    return float(principal_angles(orthonormal_basis(w), Lb_stable)[-1])


def frame(state, basis, d0, eps=DEFAULT_EPS):
    """All metrics for one FilterState, given the backward basis at its step."""
    basis = np.asarray(basis, dtype=float)
    de = abs_eigs(state.Delta)
    se = abs_eigs(state.Sigma)
    Lbs = basis[:, d0:]
    return DiagnosticsFrame(
        n=state.n,
        delta_eigs=de,
        sigma_eigs=se,
        proj_norms=projection_profile(state.Delta, basis),
        restriction_delta=restriction_norm(state.Delta, Lbs),
        restriction_sigma=restriction_norm(state.Sigma, Lbs),
        eps_rank_delta=int(np.sum(de < eps)),
        eps_rank_sigma=int(np.sum(se < eps)),
    )


def frames_for_run(run, d0, eps=DEFAULT_EPS, steps=None):
    """Frames at every step of a FilterRun that has a closure snapshot."""
    steps = sorted(run.closures) if steps is None else sorted(steps)
    return [frame(run.states[n], run.closures[n].B_q, d0, eps) for n in steps if n >= 1]


def collapse_onset(frames, target, attr="eps_rank_delta"):
    """
    First step from which ``getattr(frame, attr) >= target`` holds for every
    later frame, or None.
    """
    onset = None
    for f in frames:
        if getattr(f, attr) >= target:
            onset = f.n if onset is None else onset
        else:
            onset = None
    return onset
