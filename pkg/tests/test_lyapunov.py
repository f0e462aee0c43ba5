import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riccati_rank import linalg
from riccati_rank.errors import InvalidInput, OutOfValidatedRange
from riccati_rank.lyapunov import (
    backward_convergence,
    dense_propagator,
    oseledets_direct,
    qr_exponents,
)
from riccati_rank.system import Bounds, SystemSpec, constant_stream, operator_stream, split_spectrum


def rotated(spectrum, horizon=500, seed=0):
    return SystemSpec(d=len(spectrum), q=1, horizon=horizon, seed=seed,
                      generator="RotatedDiagonal", spectrum=tuple(spectrum))


def test_diagonal_autonomous():
    lyap = qr_exponents(constant_stream(np.diag([2.0, 0.5])), 50)
    np.testing.assert_allclose(lyap.exponents, [np.log(2), -np.log(2)], rtol=1e-15)
    np.testing.assert_array_equal(lyap.backward_basis, np.eye(2))
    np.testing.assert_array_equal(lyap.forward_basis, np.eye(2))
    assert lyap.d0 == 1


def test_rotated_diagonal_with_neutral_direction():
    lyap = qr_exponents(operator_stream(rotated((2.0, 1.0, 0.5))), 500)
    np.testing.assert_allclose(lyap.exponents, [np.log(2), 0.0, -np.log(2)], atol=1e-8)
    assert lyap.d0 == 2


def autonomous_family(d=5, seeds=range(10)):
    mags = np.exp(np.linspace(0.5, -0.7, d))
    for seed in seeds:
        spec = SystemSpec(d=d, q=1, horizon=4000, seed=seed, generator="Autonomous",
                          spectrum=tuple(mags), bounds=Bounds(c_A=10.0))
        yield operator_stream(spec), np.log(mags)


@pytest.mark.xfail(strict=True, reason="cumulative QR estimate carries an O(1/N) start-up bias "
                                       "of a few 1e-3 at N=2000; see the decisions ledger")
def test_autonomous_exponents_within_1e3_at_2000():
    worst = max(np.max(np.abs(qr_exponents(ops, 2000).exponents - truth))
                for ops, truth in autonomous_family())
    assert worst <= 1e-3


def test_autonomous_bias_is_transient():
    for ops, truth in autonomous_family(seeds=range(3)):
        short = qr_exponents(ops, 2000)
        e2 = np.max(np.abs(short.exponents - truth))
        e4 = np.max(np.abs(qr_exponents(ops, 4000).exponents - truth))
        tail = np.max(np.abs(short.tail_exponents - truth))
        # a fixed start-up offset divided by N halves when N doubles
        assert e4 == pytest.approx(e2 / 2, rel=0.05)
        assert tail <= 1e-8


def test_sum_rule_and_history():
    spec = SystemSpec(d=6, q=2, horizon=300, seed=9)
    lyap = qr_exponents(operator_stream(spec), 300)
    assert abs(lyap.exponents.sum() - lyap.log_det_mean) <= 1e-8
    assert lyap.history.shape == (300, 6)
    np.testing.assert_array_equal(lyap.history[-1], lyap.exponents)


@given(st.integers(0, 2**32), st.integers(2, 10))
def test_sum_rule_property(seed, d):
    spec = SystemSpec(d=d, q=1, horizon=60, seed=seed)
    lyap = qr_exponents(operator_stream(spec), 60)
    assert abs(lyap.exponents.sum() - lyap.log_det_mean) <= 1e-8


def test_exponents_ignore_observation_operators():
    base = SystemSpec(d=5, q=2, horizon=100, seed=4)
    other = base.with_(q=4, bounds=Bounds(c_A=2.0, c_H=0.3, c_Q=0.5), delta0="RandomSPD")
    a = qr_exponents(operator_stream(base), 100)
    b = qr_exponents(operator_stream(other), 100)
    assert np.array_equal(a.exponents, b.exponents)
    assert np.array_equal(a.backward_basis, b.backward_basis)


@pytest.mark.parametrize("N", [450, 500, 550])
def test_d0_stable_under_horizon_change(N):
    spec = rotated(split_spectrum(8, 3, (1.8, 1.2), (0.9, 0.5)), horizon=N)
    assert qr_exponents(operator_stream(spec), N).d0 == 3


def test_short_horizon_rejected():
    with pytest.raises(InvalidInput):
        qr_exponents(operator_stream(SystemSpec(d=5, q=1, horizon=3)), 3)


def test_oseledets_orthogonal_step():
    Q = linalg.qr_positive(np.random.default_rng(0).standard_normal((4, 4)))[0]
    snap = oseledets_direct(constant_stream(Q), 1)
    np.testing.assert_allclose(snap.Ef_spectrum.values, 1.0, atol=1e-14)
    np.testing.assert_allclose(snap.Eb_spectrum.values, 1.0, atol=1e-14)


def test_oseledets_diagonal():
    snap = oseledets_direct(constant_stream(np.diag([2.0, 0.5])), 10)
    np.testing.assert_allclose(snap.Ef_spectrum.values, [2.0, 0.5], rtol=1e-15)
    np.testing.assert_allclose(snap.Eb_spectrum.values, [2.0, 0.5], rtol=1e-15)


def _mp_spectrum(G, n):
    w = mpmath.eigsy(G, eigvals_only=True)
    return np.sort([float(v ** (mpmath.mpf(1) / (2 * n))) for v in w])[::-1]


@pytest.mark.parametrize("n", [1, 4, 10])
def test_oseledets_forward_backward_spectra_agree(n):
    ops = operator_stream(SystemSpec(d=5, q=1, horizon=20, seed=12))
    B = dense_propagator(ops, n)
    snap = oseledets_direct(ops, n)
    # independent oracle: eigenvalues of B^T B and B B^T in 50-digit arithmetic,
    # so squaring the condition number costs no accuracy
    with mpmath.workdps(50):
        Bm = mpmath.matrix(B.tolist())
        ef = _mp_spectrum(Bm.T * Bm, n)
        eb = _mp_spectrum(Bm * Bm.T, n)
    np.testing.assert_allclose(snap.Ef_spectrum.values, ef, rtol=1e-10)
    np.testing.assert_allclose(snap.Eb_spectrum.values, eb, rtol=1e-10)
    np.testing.assert_allclose(snap.Ef_spectrum.values, snap.Eb_spectrum.values, rtol=1e-10)


def test_oseledets_window_limit():
    with pytest.raises(OutOfValidatedRange):
        oseledets_direct(constant_stream(np.eye(2)), 21)


def test_backward_convergence_diagonal():
    angles = backward_convergence(constant_stream(np.diag([3.0, 1.0, 0.2])), 10, [1, 5, 10])
    np.testing.assert_allclose(angles, 0.0, atol=1e-12)


def test_backward_convergence_rotated_diagonal():
    ops = operator_stream(rotated((2.0, 1.2, 0.7, 0.4), horizon=20, seed=3))
    angles = backward_convergence(ops, 20, [10, 15, 20])
    assert angles.max() <= 1e-6


def test_backward_convergence_random_trend():
    ops = operator_stream(SystemSpec(d=5, q=1, horizon=20, seed=21))
    angles = backward_convergence(ops, 20, [3, 15])
    assert angles[1, 0] < angles[0, 0]
