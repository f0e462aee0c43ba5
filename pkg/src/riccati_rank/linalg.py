"""
Dense linear-algebra kernels and conventions used throughout the package.

Matrices are plain ``numpy.ndarray`` objects in row-major (C) order. All
routines are pure: inputs are never modified and results are fresh arrays.

Conventions
-----------
* Eigenvalues are ordered by decreasing absolute value, and each eigenvector
  is signed so that its largest-magnitude entry is positive.
* Singular values are nonincreasing.
* QR factors always carry a strictly positive ``R`` diagonal.
* Explicit inverses are never formed; use :func:`solve`.
"""

from typing import NamedTuple

import numpy as np

from .errors import IllConditioned, InvalidInput, NumericalBlowup, RankDeficient

TAU_SYM = 1e-10
TAU_EIG = 1e-10
TAU_SVD = 1e-10
TAU_ORTH = 1e-10
TAU_SOLVE = 1e-9
TAU_RANK = 1e-13
KAPPA_MAX = 1e12

# cut width (in natural-log units) between singular-value clusters of a graded factor
_CLUSTER_GAP = 40.0


class SortedSpectrum(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


class SvdFactors(NamedTuple):
    left: np.ndarray
    singulars: np.ndarray
    right: np.ndarray


def as_matrix(Z, name="matrix"):
    """Return `Z` as a finite 2-D float array, raising InvalidInput otherwise."""
    Z = np.array(Z, dtype=float, copy=True)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.ndim != 2:
        raise InvalidInput(f"{name} must be 2-D, got shape {Z.shape}")
    if not np.all(np.isfinite(Z)):
        raise InvalidInput(f"{name} has non-finite entries")
    return Z


def norm(Z):
    """Operator 2-norm (largest singular value)."""
    Z = np.asarray(Z, dtype=float)
    if Z.size == 0:
        return 0.0
    return float(np.linalg.norm(Z, 2))


def symmetrize(Z):
    return 0.5 * (Z + Z.T)


def _sign_fix_columns(V):
    """Flip columns so that the largest-magnitude entry of each is positive."""
    if V.size == 0:
        return V, np.ones(V.shape[1])
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs, signs


def sym_eig(Z):
    """
    Eigen-decomposition of a symmetric matrix, sorted by decreasing ``|value|``.

    The input is symmetrized as ``(Z + Z.T) / 2`` before decomposition.
    """
    Z = as_matrix(Z, "Z")
    if Z.shape[0] != Z.shape[1]:
        raise InvalidInput(f"sym_eig needs a square matrix, got {Z.shape}")
    w, V = np.linalg.eigh(symmetrize(Z))
    order = np.argsort(-np.abs(w), kind="stable")
    V, _ = _sign_fix_columns(V[:, order])
    return SortedSpectrum(w[order], V)


def svd(Z):
    """Thin SVD with nonincreasing singular values and deterministic signs."""
    Z = as_matrix(Z, "Z")
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    U, signs = _sign_fix_columns(U)
    V = Vt.T * signs
    return SvdFactors(U, s, V)


def check_orthonormal(W, name="basis", tol=TAU_ORTH):
    W = as_matrix(W, name)
    if W.shape[1] == 0:
        return W
    err = np.max(np.abs(W.T @ W - np.eye(W.shape[1])))
    if err > tol * max(1, W.shape[1]):
        raise InvalidInput(f"{name} columns are not orthonormal (error {err:.2e})")
    return W


def principal_angles(Wa, Wb):
    """
    Principal angles between ``span(Wa)`` and ``span(Wb)``.

    Both inputs must have orthonormal columns and the same number of rows.
    Returns ``min(ka, kb)`` angles in radians, nondecreasing.
    """
    Wa = check_orthonormal(Wa, "Wa")
    Wb = check_orthonormal(Wb, "Wb")
    if Wa.shape[0] != Wb.shape[0]:
        raise InvalidInput(f"row mismatch: {Wa.shape[0]} vs {Wb.shape[0]}")
    k = min(Wa.shape[1], Wb.shape[1])
    if k == 0:
        return np.zeros(0)
    if Wa.shape[1] < Wb.shape[1]:
        Wa, Wb = Wb, Wa
    cos = np.clip(np.linalg.svd(Wa.T @ Wb, compute_uv=False)[:k], 0.0, 1.0)
    # arccos loses half the digits near 0; take small angles from the sines
    sin = np.clip(np.sort(np.linalg.svd(Wb - Wa @ (Wa.T @ Wb), compute_uv=False))[:k], 0.0, 1.0)
    angles = np.where(cos ** 2 >= 0.5, np.arcsin(sin), np.arccos(cos))
    return np.sort(angles)


def qr_positive(Z):
    """
    QR factorization with a strictly positive ``R`` diagonal.

    Raises
    ------
    RankDeficient
        If some ``|R[j, j]|`` is below ``TAU_RANK * ||Z||``.
    """
    Z = as_matrix(Z, "Z")
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    scale = max(norm(Z), np.finfo(float).tiny)
    bad = np.flatnonzero(np.abs(d) <= TAU_RANK * scale)
    if bad.size:
        raise RankDeficient(int(bad[0]))
    signs = np.sign(d)
    return Q * signs, R * signs[:, None]


def condition_estimate(Z):
    s = np.linalg.svd(Z, compute_uv=False)
    if s[-1] == 0:
        return np.inf
    return float(s[0] / s[-1])


def solve(Z, B):
    """Solve ``Z X = B`` after checking the condition number of ``Z``."""
    Z = as_matrix(Z, "Z")
    B = np.asarray(B, dtype=float)
    if Z.shape[0] != Z.shape[1]:
        raise InvalidInput(f"solve needs a square matrix, got {Z.shape}")
    if not np.all(np.isfinite(B)):
        raise InvalidInput("right-hand side has non-finite entries")
    kappa = condition_estimate(Z)
    if kappa > KAPPA_MAX:
        raise IllConditioned(kappa)
    return np.linalg.solve(Z, B)


def orthonormal_basis(W):
    """Orthonormal basis for the column span of a full-column-rank `W`."""
    W = as_matrix(W, "W")
    if W.shape[1] == 0:
        return W
    Q, _ = qr_positive(W)
    return Q


# --- log-scaled products ---------------------------------------------------
#
# A product P = A_n ... A_1 Q0 is held as P = Q diag(exp(logr)) U with Q
# orthonormal and U upper triangular with unit diagonal. This lets products
# with singular values far outside the double range be carried exactly.


def accumulate_qr(A, Q, logr, U):
    """Advance the factored product by one left factor ``A``."""
    Qn, Rn = qr_positive(A @ Q)
    r = np.diag(Rn)
    logr_new = logr + np.log(r)
    # U' = diag(e^-L') R' diag(e^L) U, written to avoid forming e^L
    expo = logr[None, :] - logr[:, None]
    with np.errstate(over="ignore"):
        middle = np.triu(Rn * np.exp(np.minimum(expo, 700.0)))
    U_new = (middle / r[:, None]) @ U
    if not np.all(np.isfinite(U_new)):
        raise NumericalBlowup(-1, "triangular remainder overflowed; exponents unsorted")
    return Qn, logr_new, np.triu(U_new)


def dense_from_factors(Q, logr, U):
    """Rebuild ``Q diag(exp(logr)) U`` densely (only for moderate products)."""
    with np.errstate(over="raise"):
        try:
            scale = np.exp(logr)
        except FloatingPointError:
            raise NumericalBlowup(-1, "dense product overflows double precision")
    return Q @ (scale[:, None] * U)


def graded_log_singular_values(logr, U):
    """
    Natural logs of the singular values of ``diag(exp(logr)) U``.

    `U` is upper triangular. One orthogonal step turns the factor into a
    row-graded lower-triangular one; it then splits into diagonal blocks wherever
    the grading drops by more than ``_CLUSTER_GAP``, and each block is
    decomposed with its own scale. Coupling between blocks perturbs singular
    values by less than ``exp(-2 * _CLUSTER_GAP)`` relative.
    """
    logr = np.asarray(logr, dtype=float)
    d = logr.size
    # QR(U^T diag(e^L)) = Q(U^T) . R(U^T) diag(e^L)
    _, R0 = np.linalg.qr(np.asarray(U, dtype=float).T)
    lower = R0.T
    cuts = [0]
    for j in range(d - 1):
        if logr[: j + 1].min() - logr[j + 1:].max() >= _CLUSTER_GAP:
            cuts.append(j + 1)
    cuts.append(d)
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        top = logr[a:b].max()
        block = np.exp(logr[a:b] - top)[:, None] * lower[a:b, a:b]
        s = np.linalg.svd(block, compute_uv=False)
        with np.errstate(divide="ignore"):
            out.append(np.log(s) + top)
    return np.sort(np.concatenate(out))[::-1]
