"""
Perfect-model linear-Gaussian systems ``x_{n+1} = A_{n+1} x_n``,
``y_n = H_n x_n + q_n`` with ``q_n ~ N(0, Q_n)``.

Every random draw comes from a ``numpy`` PCG64 generator seeded by
``SeedSequence([seed, stream, n])``, so operators at step ``n`` are a pure
function of ``(spec, n)`` and can be generated in any order.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import GenerationFailure, InvalidInput
from .linalg import TAU_RANK, as_matrix, norm, qr_positive, solve, symmetrize

RNG_NAME = "numpy.PCG64"

GENERATORS = ("RandomBounded", "RotatedDiagonal", "Autonomous", "ExplicitSequence")
DELTA0_KINDS = ("Identity", "RandomSPD", "Explicit")

# independent random streams
_STREAM_A = 1
_STREAM_H = 2
_STREAM_Q = 3
_STREAM_ROT = 4
_STREAM_DELTA0 = 5
_STREAM_AUT = 6
_STREAM_NOISE = 7
_STREAM_X0 = 8

SINGULAR_RATIO_MIN = 1e-6
MAX_RESAMPLES = 50
AUTONOMOUS_COND_V = 2.0
_BOUND_SLACK = 1e-12


def rng_for(seed, stream, n=0):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), stream, int(n)])))


@dataclass(frozen=True)
class Bounds:
    c_A: float = 2.0
    c_H: float = 1.0
    c_Q: float = 1.0


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """
    Full description of a perfect-model experiment.

    Parameters
    ----------
    d, q : int
        State and observation dimensions, ``1 <= q <= d``.
    horizon : int
        Number of assimilation steps ``N``.
    seed : int
        Master seed for every operator draw.
    generator : str
        One of ``GENERATORS``.
    bounds : Bounds
        Norm bounds ``c_A, c_H, c_Q``.
    delta0 : str
        Initial covariance kind, one of ``DELTA0_KINDS``.
    delta0_matrix : array, optional
        Required when ``delta0 == "Explicit"``.
    spectrum : sequence of float, optional
        Target diagonal (RotatedDiagonal) or eigenvalue magnitudes
        (Autonomous); length ``d``, no zeros.
    explicit : dict, optional
        For ExplicitSequence: keys ``"A"``, ``"H"``, ``"Q"``, each a list of
        matrices. A list of length one is reused at every step, otherwise it
        must cover the horizon.
    """

    d: int
    q: int
    horizon: int
    seed: int = 0
    generator: str = "RandomBounded"
    bounds: Bounds = field(default_factory=Bounds)
    delta0: str = "Identity"
    delta0_matrix: Optional[np.ndarray] = None
    spectrum: Optional[tuple] = None
    explicit: Optional[dict] = None

    def __post_init__(self):
        if self.d < 1 or self.q < 1 or self.q > self.d:
            raise InvalidInput(f"need d >= 1 and 1 <= q <= d, got d={self.d}, q={self.q}")
        if self.horizon < 1:
            raise InvalidInput("horizon must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidInput("seed must be a 64-bit unsigned integer")
        if self.generator not in GENERATORS:
            raise InvalidInput(f"unknown generator {self.generator!r}")
        b = self.bounds
        if min(b.c_A, b.c_H, b.c_Q) <= 0:
            raise InvalidInput("bounds must be strictly positive")
        if self.delta0 not in DELTA0_KINDS:
            raise InvalidInput(f"unknown delta0 kind {self.delta0!r}")
        if self.delta0 == "Explicit":
            if self.delta0_matrix is None:
                raise InvalidInput("delta0 'Explicit' needs delta0_matrix")
            D0 = as_matrix(self.delta0_matrix, "delta0_matrix")
            if D0.shape != (self.d, self.d):
                raise InvalidInput("delta0_matrix has the wrong shape")
            if np.max(np.abs(D0 - D0.T)) > 1e-10 * max(norm(D0), 1.0):
                raise InvalidInput("delta0_matrix is not symmetric")
            if np.linalg.eigvalsh(symmetrize(D0))[0] <= 0:
                raise InvalidInput("delta0_matrix must be positive definite")
            object.__setattr__(self, "delta0_matrix", symmetrize(D0))
        if self.spectrum is not None:
            spec = tuple(float(s) for s in self.spectrum)
            if len(spec) != self.d:
                raise InvalidInput(f"spectrum needs {self.d} entries, got {len(spec)}")
            if any(s == 0 for s in spec):
                raise InvalidInput("spectrum entries must be nonzero")
            object.__setattr__(self, "spectrum", spec)
        if self.generator in ("RotatedDiagonal", "Autonomous") and self.spectrum is None:
            raise InvalidInput(f"{self.generator} requires a spectrum")
        if self.generator == "ExplicitSequence":
            self._check_explicit()

    def _check_explicit(self):
        ex = self.explicit or {}
        shapes = {"A": (self.d, self.d), "H": (self.q, self.d), "Q": (self.q, self.q)}
        clean = {}
        for key, shape in shapes.items():
            mats = ex.get(key)
            if mats is None:
                raise InvalidInput(f"ExplicitSequence needs matrices for {key!r}")
            mats = [as_matrix(m, key) for m in mats]
            if len(mats) != 1 and len(mats) < self.horizon:
                raise InvalidInput(f"{key!r} has {len(mats)} matrices for horizon {self.horizon}")
            for m in mats:
                if m.shape != shape:
                    raise InvalidInput(f"{key!r} matrix has shape {m.shape}, expected {shape}")
            clean[key] = tuple(mats)
        object.__setattr__(self, "explicit", clean)

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class StepOperators:
    step_index: int
    A: np.ndarray
    H: np.ndarray
    Q: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Truth states ``x_0..x_N`` (rows of `states`) and observations ``y_1..y_N``."""

    states: np.ndarray
    observations: np.ndarray

    def y(self, n):
        return self.observations[n - 1]


def split_spectrum(d, d0, unstable=(2.0, 1.1), stable=(0.9, 0.5)):
    """Magnitudes with ``d0`` entries spaced over `unstable` and the rest over `stable`."""
    if not 0 <= d0 <= d:
        raise InvalidInput("need 0 <= d0 <= d")
    return tuple(np.linspace(*unstable, d0)) + tuple(np.linspace(*stable, d - d0))


def random_orthogonal(rng, d, rotation=False):
    """Haar-distributed orthogonal matrix; with ``rotation=True`` det is +1."""
    Q, _ = qr_positive(rng.standard_normal((d, d)))
    if rotation and np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def _bounded_spd(rng, k, c):
    W = rng.standard_normal((k, k))
    S = W @ W.T / k + 0.1 * np.eye(k)
    return symmetrize(c * S / norm(S))


def _random_H(spec, rng):
    H = rng.standard_normal((spec.q, spec.d))
    return spec.bounds.c_H * H / norm(H)


def _random_A(spec, n):
    rng = rng_for(spec.seed, _STREAM_A, n)
    for _ in range(MAX_RESAMPLES):
        A = rng.standard_normal((spec.d, spec.d))
        s = np.linalg.svd(A, compute_uv=False)
        if s[-1] >= SINGULAR_RATIO_MIN * s[0]:
            return A * (spec.bounds.c_A * rng.uniform(0.5, 1.0) / s[0])
    raise GenerationFailure(f"{MAX_RESAMPLES} consecutive near-singular draws at step {n}")


def rotation(spec, n):
    """Frame ``R_n`` of the RotatedDiagonal construction; ``R_0`` is the identity."""
    if n == 0:
        return np.eye(spec.d)
    return random_orthogonal(rng_for(spec.seed, _STREAM_ROT, n), spec.d, rotation=True)


def diagonal_factor(spec):
    """``diag(spectrum)`` reordered by decreasing magnitude."""
    s = np.asarray(spec.spectrum, dtype=float)
    return np.diag(s[np.argsort(-np.abs(s), kind="stable")])


def autonomous_factors(spec):
    """
    Eigen-factors ``(V, eigenvalues)`` of the Autonomous operator ``A = V diag(e) V^-1``.

    Eigenvalues are the spectrum magnitudes with seeded random signs, sorted by
    decreasing magnitude; `V` has condition number ``AUTONOMOUS_COND_V``.
    """
    rng = rng_for(spec.seed, _STREAM_AUT)
    mags = np.sort(np.abs(np.asarray(spec.spectrum, dtype=float)))[::-1]
    signs = rng.choice([-1.0, 1.0], size=spec.d)
    U = random_orthogonal(rng, spec.d)
    W = random_orthogonal(rng, spec.d)
    sv = np.exp(rng.uniform(0.0, np.log(AUTONOMOUS_COND_V), spec.d))
    sv[0], sv[-1] = AUTONOMOUS_COND_V, 1.0
    V = (U * sv) @ W.T
    V = V / np.linalg.norm(V, axis=0)
    return V, signs * mags


def autonomous_matrix(spec):
    V, e = autonomous_factors(spec)
    # A = V diag(e) V^-1  <=>  A^T = V^-T diag(e) V^T
    return solve(V.T, (V * e).T).T


def _fixed_HQ(spec):
    rng = rng_for(spec.seed, _STREAM_H, 0)
    H = _random_H(spec, rng)
    Q = _bounded_spd(rng_for(spec.seed, _STREAM_Q, 0), spec.q, spec.bounds.c_Q)
    return H, Q


def _pick(mats, n):
    return mats[0] if len(mats) == 1 else mats[n - 1]


def initial_covariance(spec):
    if spec.delta0 == "Identity":
        return np.eye(spec.d)
    if spec.delta0 == "RandomSPD":
        return _bounded_spd(rng_for(spec.seed, _STREAM_DELTA0), spec.d, 1.0)
    return spec.delta0_matrix.copy()


def validate_operators(ops, spec=None):
    """Check the StepOperators invariants, raising InvalidInput on violation."""
    A, H, Q = ops.A, ops.H, ops.Q
    sA = np.linalg.svd(A, compute_uv=False)
    if sA[-1] <= TAU_RANK * max(sA[0], 1.0):
        raise InvalidInput(f"A_{ops.step_index} is singular")
    if np.max(np.abs(Q - Q.T)) > 1e-12 * max(norm(Q), 1.0) or np.linalg.eigvalsh(Q)[0] <= 0:
        raise InvalidInput(f"Q_{ops.step_index} is not symmetric positive definite")
    if spec is not None:
        b = spec.bounds
        for name, M, c in (("A", A, b.c_A), ("H", H, b.c_H), ("Q", Q, b.c_Q)):
            if norm(M) > c * (1 + _BOUND_SLACK):
                raise InvalidInput(
                    f"||{name}_{ops.step_index}|| = {norm(M):.4g} exceeds bound {c:g}"
                )
    return ops


def operators_at(spec, n):
    """Operators ``(A_n, H_n, Q_n)`` at step ``1 <= n <= horizon``."""
    if not 1 <= n <= spec.horizon:
        raise InvalidInput(f"step {n} outside 1..{spec.horizon}")
    g = spec.generator
    if g == "RandomBounded":
        A = _random_A(spec, n)
        H = _random_H(spec, rng_for(spec.seed, _STREAM_H, n))
        Q = _bounded_spd(rng_for(spec.seed, _STREAM_Q, n), spec.q, spec.bounds.c_Q)
    elif g == "RotatedDiagonal":
        A = rotation(spec, n) @ diagonal_factor(spec) @ rotation(spec, n - 1).T
        H = _random_H(spec, rng_for(spec.seed, _STREAM_H, n))
        Q = _bounded_spd(rng_for(spec.seed, _STREAM_Q, n), spec.q, spec.bounds.c_Q)
    elif g == "Autonomous":
        A = autonomous_matrix(spec)
        H, Q = _fixed_HQ(spec)
        if norm(A) > spec.bounds.c_A * (1 + _BOUND_SLACK):
            raise GenerationFailure(
                f"autonomous A has norm {norm(A):.4g} > c_A = {spec.bounds.c_A:g}; raise c_A"
            )
    else:
        ex = spec.explicit
        A, H, Q = (_pick(ex[k], n).copy() for k in ("A", "H", "Q"))
    return validate_operators(StepOperators(n, A, H, symmetrize(Q)), spec)


def operator_stream(spec):
    """Memoized ``n -> operators_at(spec, n)``; the form every module consumes."""
    cache = {}

    def ops(n):
        if n not in cache:
            cache[n] = operators_at(spec, n)
        return cache[n]

    ops.spec = spec
    return ops


def stream_from_list(items):
    """Wrap a list (element ``k`` is step ``k + 1``) of StepOperators or matrices."""
    items = list(items)

    def ops(n):
        if not 1 <= n <= len(items):
            raise InvalidInput(f"step {n} outside 1..{len(items)}")
        return items[n - 1]

    return ops


def constant_stream(A, H=None, Q=None):
    """Time-invariant stream; only `A` is required for dynamics-only consumers."""
    A = as_matrix(A, "A")
    H = np.zeros((1, A.shape[0])) if H is None else as_matrix(H, "H")
    Q = np.eye(H.shape[0]) if Q is None else as_matrix(Q, "Q")

    def ops(n):
        return StepOperators(n, A, H, Q)

    return ops


def dynamics(item):
    """The ``A`` matrix of a stream element (StepOperators or bare matrix)."""
    return item.A if isinstance(item, StepOperators) else np.asarray(item, dtype=float)


def initial_state(spec, mean=None):
    """Draw ``x_0 ~ N(mean, Delta_0)`` from the seeded x0 stream."""
    mean = np.zeros(spec.d) if mean is None else np.asarray(mean, dtype=float)
    L = np.linalg.cholesky(initial_covariance(spec))
    return mean + L @ rng_for(spec.seed, _STREAM_X0).standard_normal(spec.d)


def simulate_truth(spec, x0, noise_seed, ops=None):
    """Run the deterministic truth and draw noisy observations."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.d,) or not np.all(np.isfinite(x0)):
        raise InvalidInput("x0 must be a finite vector of length d")
    ops = ops or operator_stream(spec)
    N = spec.horizon
    xs = np.empty((N + 1, spec.d))
    ys = np.empty((N, spec.q))
    xs[0] = x0
    for n in range(1, N + 1):
        op = ops(n)
        xs[n] = op.A @ xs[n - 1]
        z = rng_for(noise_seed, _STREAM_NOISE, n).standard_normal(spec.q)
        ys[n - 1] = op.H @ xs[n] + np.linalg.cholesky(op.Q) @ z
    return Trajectory(xs, ys)
