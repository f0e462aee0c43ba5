import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_orthonormal
from riccati_rank import system
from riccati_rank.diagnostics import (
    collapse_onset,
    eps_eigenspace_dim,
    frames_for_run,
    lemma_subspace_bound_check,
    projection_profile,
    restriction_norm,
    stable_map_check,
)
from riccati_rank.errors import HypothesisFailed, InvalidInput
from riccati_rank.kalman import run_filter
from riccati_rank.lyapunov import qr_exponents
from riccati_rank.system import SystemSpec, operator_stream, split_spectrum


def diag_pair(horizon=100):
    return SystemSpec(d=2, q=2, horizon=horizon, generator="ExplicitSequence",
                      explicit={"A": [np.diag([2.0, 0.5])], "H": [np.eye(2)], "Q": [np.eye(2)]})


# --- eps_eigenspace_dim ----------------------------------------------------------------

def test_eps_dim_diagonal():
    assert eps_eigenspace_dim(np.diag([3.0, 0.1, 0.01]), 0.5) == 2


def test_eps_dim_identity():
    assert eps_eigenspace_dim(np.eye(4), 0.5) == 0


def test_eps_dim_rotated_known_spectrum():
    V = random_orthonormal(np.random.default_rng(3), 3, 3)
    Z = V @ np.diag([2.0, 1.0, 1e-9]) @ V.T
    assert eps_eigenspace_dim(Z, 1e-6) == 1


def test_eps_dim_rejects_nonpositive_eps():
    with pytest.raises(InvalidInput):
        eps_eigenspace_dim(np.eye(2), 0.0)


# --- subspace bound -------------------------------------------------------------------------

def test_subspace_bound_on_null_direction():
    W = np.array([[0.0], [1.0]])
    assert lemma_subspace_bound_check(np.diag([1.0, 0.0]), W, 1e-3)


def test_subspace_bound_premise_fails():
    with pytest.raises(HypothesisFailed):
        lemma_subspace_bound_check(np.eye(2), np.array([[1.0], [0.0]]), 0.5)


def _small_on_subspace(seed, d, k, eps):
    # Z = V diag(big..., tiny...) V^T, then W spans the tiny block; premise holds
    rng = np.random.default_rng(seed)
    V = random_orthonormal(rng, d, d)
    vals = np.r_[rng.uniform(1.0, 5.0, d - k), rng.uniform(0.0, 0.5, k) * eps]
    Z = V @ np.diag(vals) @ V.T
    W = V[:, d - k:] @ random_orthonormal(rng, k, k)
    return Z, W


def test_subspace_bound_50_constructed_instances():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 9))
        k = int(rng.integers(1, d + 1))
        eps = 10.0 ** rng.uniform(-8, -1)
        Z, W = _small_on_subspace(seed, d, k, eps)
        assert np.linalg.norm(Z @ W, 2) < eps
        assert lemma_subspace_bound_check(Z, W, eps)
        assert sum(abs(np.linalg.eigvalsh(Z)) < eps) >= k  # brute force


@given(st.integers(0, 2**32), st.integers(1, 10), st.floats(1e-9, 1e-1))
def test_subspace_bound_property(seed, d, eps):
    k = 1 + seed % d
    Z, W = _small_on_subspace(seed, d, k, eps)
    assert lemma_subspace_bound_check(Z, W, eps)


# --- projection_profile -----------------------------------------------------------------------

def test_projection_identity():
    np.testing.assert_allclose(projection_profile(np.eye(3), random_orthonormal(np.random.default_rng(0), 3, 3)), 1.0)


def test_projection_keeps_column_order():
    np.testing.assert_array_equal(projection_profile(np.diag([1.0, 0.0]), np.eye(2)), [1.0, 0.0])


def test_projection_long_run_fixed_points():
    run = run_filter(diag_pair(), checkpoints=())
    p = projection_profile(run.states[-1].Delta, np.eye(2))
    # per-direction fixed points of D = a^2 D / (a^2 D + 1): 3/4 for a=2, 0 for a=1/2
    assert abs(p[0] - 0.75) <= 1e-12 and p[1] <= 1e-50


# --- restriction_norm ------------------------------------------------------------------------------

def test_restriction_on_null_space_is_zero():
    assert restriction_norm(np.diag([1.0, 0.0]), np.array([[0.0], [1.0]])) == 0.0


def test_restriction_identity_single_column():
    u = random_orthonormal(np.random.default_rng(5), 4, 1)
    assert restriction_norm(np.eye(4), u) == pytest.approx(1.0, abs=1e-15)


def test_restriction_empty_basis():
    assert restriction_norm(np.eye(3), np.zeros((3, 0))) == 0.0


def test_restriction_collapses_on_stable_direction():
    run = run_filter(diag_pair(), checkpoints=())
    assert restriction_norm(run.states[100].Delta, np.array([[0.0], [1.0]])) <= 1e-8


# --- stable_map_check ---------------------------------------------------------------------------------

def test_stable_map_diagonal_pair():
    run = run_filter(diag_pair(40), checkpoints=[40])
    e2 = np.array([[0.0], [1.0]])
    assert stable_map_check(run.closures[40].M, run.Delta0, e2, e2) <= 1e-6


def test_stable_map_at_zero_is_plain_angle():
    Lf = np.array([[1.0], [0.0]])
    Lb = np.array([[1.0], [1.0]]) / np.sqrt(2)
    assert stable_map_check(np.eye(2), np.eye(2), Lf, Lb) == pytest.approx(np.pi / 4)


def test_stable_map_angle_decreases_for_rotated_diagonal():
    spec = SystemSpec(d=5, q=2, horizon=20, seed=4, generator="RotatedDiagonal",
                      spectrum=(1.8, 1.4, 1.1, 0.7, 0.5))
    run = run_filter(spec, checkpoints=[5, 20])
    Lf = system.rotation(spec, 0)[:, 3:]  # forward stable directions at time 0

    def angle(n):
        Lb = system.rotation(spec, n)[:, 3:]
        return stable_map_check(run.closures[n].M, run.Delta0, Lf, Lb)

    assert angle(20) < angle(5)


# --- frames and onset ---------------------------------------------------------------------------------

def test_collapse_onset():
    class F:
        def __init__(self, n, r):
            self.n, self.eps_rank_delta = n, r

    frames = [F(1, 0), F(2, 2), F(3, 1), F(4, 2), F(5, 3)]
    assert collapse_onset(frames, 2) == 4
    assert collapse_onset(frames, 4) is None


def _constructed_run(seed):
    spec = SystemSpec(d=8, q=3, horizon=300, seed=seed, generator="RotatedDiagonal",
                      spectrum=split_spectrum(8, 3, (1.6, 1.1), (0.9, 0.5)), delta0="RandomSPD")
    ops = operator_stream(spec)
    d0 = qr_exponents(ops, 300).d0
    run = run_filter(spec, ops=ops)
    return spec, d0, frames_for_run(run, d0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_rank_deficiency_and_restriction_on_constructed_systems(seed):
    spec, d0, frames = _constructed_run(seed)
    assert d0 == 3
    target = spec.d - d0
    onset = collapse_onset(frames, target)
    assert onset is not None and onset < spec.horizon
    assert collapse_onset(frames, target, "eps_rank_sigma") is not None
    tail = frames[-len(frames) // 4:]
    assert max(f.restriction_delta for f in tail) < 1e-6
    assert max(f.restriction_sigma for f in tail) < 1e-6
    # rank never drops below d - d0 by more than it should: unstable part stays visible
    assert all(f.eps_rank_delta <= target for f in tail)


def test_eps_rank_saturates_with_tolerance():
    _, _, frames = _constructed_run(0)
    last = frames[-1]
    assert eps_eigenspace_dim(np.diag(last.delta_eigs), 1e-6) == last.eps_rank_delta
    assert eps_eigenspace_dim(np.diag(last.delta_eigs), 1e3) == 8
