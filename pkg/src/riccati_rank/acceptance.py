"""
The acceptance suite: each criterion is a function returning a
CriterionResult. Shared by ``riccati-rank verify`` and the test-suite.
"""

import filecmp
import tempfile
import time
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import experiment
from .config import preset
from .diagnostics import lemma_subspace_bound_check
from .errors import HypothesisFailed
from .gramian import THETA_OBS, controllability_gramian, observability_gramian, uniform_observability_scan
from .kalman import factorized_delta, run_filter
from .lyapunov import qr_exponents
from .spectral import (
    N_POW_MAX,
    ef_eigenvalue_convergence,
    eigenspace_equality_check,
    jordan_block,
    jordan_probe,
)
from .system import Bounds, SystemSpec, split_spectrum, constant_stream, operator_stream, random_orthogonal, rng_for

SUITE_SEED = 20170427
FACTOR_DIMS = (2, 5, 10, 30)
FACTOR_SEEDS = 20


@dataclass(frozen=True)
class CriterionResult:
    id: str
    title: str
    passed: bool
    detail: str
    seconds: float

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.id:<3} {self.title}: {self.detail} ({self.seconds:.2f} s)"


def _scalar_spec(a, horizon):
    one = [np.array([[1.0]])]
    return SystemSpec(d=1, q=1, horizon=horizon, generator="ExplicitSequence",
                      explicit={"A": [np.array([[float(a)]])], "H": one, "Q": one})


# --- cached runs shared between criteria -----------------------------------

@lru_cache(maxsize=None)
def scalar_runs():
    return run_filter(_scalar_spec(1.0, 100)), run_filter(_scalar_spec(2.0, 60))


@lru_cache(maxsize=None)
def factorization_runs():
    """``(d, seed, max relative error, max gain residual)`` per run, plus wall time."""
    t0 = time.perf_counter()
    rows = []
    for d in FACTOR_DIMS:
        for seed in range(FACTOR_SEEDS):
            spec = SystemSpec(d=d, q=max(1, d // 3), horizon=20, seed=seed, delta0="RandomSPD")
            run = run_filter(spec)
            errs = []
            for n in range(1, 21):
                recursive = run.states[n].Delta
                fact = factorized_delta(run.closures[n], run.Delta0)
                errs.append(np.linalg.norm(fact - recursive, 2) / np.linalg.norm(recursive, 2))
            rows.append((d, seed, max(errs), float(run.gain_residual.max())))
    return tuple(rows), time.perf_counter() - t0


@lru_cache(maxsize=None)
def nonaut30():
    t0 = time.perf_counter()
    res = experiment.evaluate(preset("nonaut30", emit_svg=False))
    return res, time.perf_counter() - t0


@lru_cache(maxsize=None)
def aut30():
    t0 = time.perf_counter()
    res = experiment.evaluate(preset("aut30", emit_svg=False))
    return res, time.perf_counter() - t0


def _timed(cid, title, fn):
    t0 = time.perf_counter()
    passed, detail = fn()
    return CriterionResult(cid, title, bool(passed), detail, time.perf_counter() - t0)


# --- criteria ----------------------------------------------------------------

def criterion_1():
    def body():
        t0 = time.perf_counter()
        unit, double = scalar_runs.__wrapped__()
        elapsed = time.perf_counter() - t0
        err1 = max(abs(unit.states[n].Delta[0, 0] - 1.0 / (n + 1)) for n in range(101))
        err2 = abs(double.states[60].Delta[0, 0] - 0.75)
        ok = err1 <= 1e-12 and err2 <= 1e-10 and elapsed < 1.0
        return ok, f"max|Delta_n - 1/(n+1)| = {err1:.1e}, |Delta_60 - 3/4| = {err2:.1e}, {elapsed:.3f} s"
    return _timed("1", "scalar Riccati oracle", body)


def criterion_2():
    def body():
        rows, elapsed = factorization_runs()
        worst = max(r[2] for r in rows)
        ok = worst <= 1e-8 and elapsed < 30.0
        return ok, f"max relative error {worst:.1e} over {len(rows)} runs (n <= 20), {elapsed:.1f} s"
    return _timed("2", "factorization identity", body)


def criterion_3():
    def body():
        residuals = [r.gain_residual.max() for r in scalar_runs()]
        residuals += [r[3] for r in factorization_runs()[0]]
        residuals += [nonaut30()[0].run.gain_residual.max(), aut30()[0].run.gain_residual.max()]
        worst = max(residuals)
        return worst <= 1e-9, f"max relative residual {worst:.1e} over {len(residuals)} runs"
    return _timed("3", "gain identity", body)


def criterion_4():
    def body():
        res, elapsed = nonaut30()
        last = res.frames[-1]
        d0 = res.d0_target
        parts, ok = [], elapsed < 60.0
        for label, eigs in (("Delta", last.delta_eigs), ("Sigma", last.sigma_eigs)):
            top, bottom = eigs[:d0], eigs[d0:]
            ok &= bool(np.all(bottom < 1e-6) and np.all(top > 1e-3))
            parts.append(f"{label}: max bottom-{bottom.size} {bottom.max():.1e}, min top-{d0} {top.min():.1e}")
        return ok, "; ".join(parts) + f", {elapsed:.1f} s"
    return _timed("4", "rank collapse d=30, d0=14", body)


def criterion_5():
    def body():
        res, _ = nonaut30()
        d0 = res.d0_target
        tail = res.frames[len(res.frames) - len(res.frames) // 4:]
        rd = max(f.restriction_delta for f in tail)
        rs = max(f.restriction_sigma for f in tail)
        proj = max(f.proj_norms[d0:].max() for f in tail)
        ok = rd <= 1e-6 and rs <= 1e-6 and proj <= 1e-6
        return ok, f"restriction Delta {rd:.1e}, Sigma {rs:.1e}, max proj_norm j > {d0}: {proj:.1e}"
    return _timed("5", "restriction to stable backward subspace", body)


def criterion_6a():
    def body():
        spec = preset("nonaut30").system.with_(horizon=500)
        lyap = qr_exponents(operator_stream(spec), 500)
        truth = np.sort(np.log(np.abs(spec.spectrum)))[::-1]
        err = float(np.max(np.abs(lyap.exponents - truth)))
        return err <= 1e-8, f"max |mu_j - log|D_jj|| = {err:.1e} at N = 500"
    return _timed("6a", "Lyapunov exponents, rotated diagonal", body)


def criterion_6b():
    def body():
        spec = preset("aut30").system.with_(horizon=2000)
        ops = operator_stream(spec)
        lyap = qr_exponents(ops, 2000)
        truth = np.sort(np.log(np.abs(np.linalg.eigvals(ops(1).A))))[::-1]
        err = float(np.max(np.abs(lyap.exponents - truth)))
        tail = float(np.max(np.abs(lyap.tail_exponents - truth)))
        return err <= 1e-3, f"max |mu_j - log|lambda_j|| = {err:.1e} at N = 2000 (tail-half estimate {tail:.1e})"
    return _timed("6b", "Lyapunov exponents, autonomous", body)


def criterion_7():
    def body():
        res, elapsed = aut30()
        ns = res.nullspace
        stable, unstable = ns.direction_norms[12:], ns.direction_norms[:12]
        ok = ns.d0 == 12 and stable.max() <= 1e-6 and unstable.min() >= 1e-3 and elapsed < 60.0
        return ok, (f"d0 = {ns.d0}, max j > 12: {stable.max():.1e}, min j <= 12: {unstable.min():.1e}, "
                    f"{elapsed:.1f} s")
    return _timed("7", "autonomous null space d=30, d0=12", body)


def random_power_matrices(count=20, seed=SUITE_SEED):
    """
    `count` test matrices (d <= 10) with reference ``|lambda_j|`` sorted
    descending: Gaussian matrices alternate with Jordan forms in a random basis
    whose eigenvalue magnitudes are known exactly.
    """
    rng = rng_for(seed, 101)
    out = []
    for i in range(count):
        d = int(rng.integers(2, 11))
        if i % 2 == 0:
            A = rng.standard_normal((d, d)) / np.sqrt(d)
            mags = np.sort(np.abs(np.linalg.eigvals(A)))[::-1]
        else:
            J, j, lams = np.zeros((d, d)), 0, []
            while j < d:
                k = min(int(rng.integers(1, 4)), d - j)
                lam = rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 2.0)
                J[j:j + k, j:j + k] = jordan_block(lam, k)
                lams += [abs(lam)] * k
                j += k
            V = rng.standard_normal((d, d))
            A = V @ J @ np.linalg.inv(V)
            mags = np.sort(lams)[::-1]
        out.append((A, mags))
    return out


def criterion_8a():
    def body():
        worst = 0.0
        for A, mags in random_power_matrices():
            pc = ef_eigenvalue_convergence(A, [2000])
            worst = max(worst, float(np.max(np.abs(pc.values[-1] - mags) / mags)))
        return worst <= 2e-2, f"max relative error {worst:.1e} over 20 matrices at n = 2000"
    return _timed("8a", "power singular values vs eigenvalues", body)


def criterion_8b():
    def body():
        p = jordan_probe(0.5, 2, [1000])
        err = float(np.max(np.abs(p.measured[:, 0] - 0.5) / 0.5))
        return err <= 2e-2, f"sigma_j^(1/n) = {np.round(p.measured[:, 0], 4).tolist()}, relative error {err:.1e}"
    return _timed("8b", "Jordan block lambda=0.5, k=2, n=1000", body)


def criterion_8c():
    def body():
        bad = []
        for k in range(1, 7):
            ns = np.arange(max(1, k - 1), k + 4)
            p = jordan_probe(0.0, k, ns)
            for col, n in enumerate(ns):
                if np.any(p.measured[:, col] != 0.0):
                    bad.append(f"k={k}, n={n}")
        detail = "all zero" if not bad else f"nonzero at {len(bad)} (k, n) pairs, e.g. {bad[:3]}"
        return not bad, detail
    return _timed("8c", "nilpotent block exact zero for n >= k-1", body)


def eigenspace_test_matrices(seed=SUITE_SEED):
    """Matrices whose eigenvalue moduli all stay at least 0.2 away from 1."""
    def rot(theta):
        return np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])

    mats = [np.diag([2.0, 0.5]), np.array([[2.0, 5.0], [0.0, 0.5]])]
    rng = rng_for(seed, 102)
    blocks = np.zeros((4, 4))
    blocks[:2, :2], blocks[2:, 2:] = jordan_block(1.5, 2), jordan_block(0.5, 2)
    V = rng.standard_normal((4, 4))
    mats.append(V @ blocks @ np.linalg.inv(V))
    pair = np.zeros((4, 4))
    pair[:2, :2], pair[2:, 2:] = 1.3 * rot(0.7), 0.6 * rot(2.1)
    V = rng.standard_normal((4, 4))
    mats.append(V @ pair @ np.linalg.inv(V))
    for _ in range(4):
        d = int(rng.integers(3, 11))
        mags = np.concatenate([rng.uniform(1.2, 2.0, d // 2), rng.uniform(0.1, 0.8, d - d // 2)])
        signs = rng.choice([-1.0, 1.0], d)
        V = rng.standard_normal((d, d))
        mats.append(V @ np.diag(signs * mags) @ np.linalg.inv(V))
    Q = random_orthogonal(rng, 6)
    mats.append(Q @ np.diag([1.8, 1.4, 1.2, 0.8, 0.5, 0.2]) @ Q.T)
    spec = SystemSpec(d=20, q=5, horizon=1, seed=seed, generator="Autonomous",
                      bounds=Bounds(c_A=4.0), spectrum=split_spectrum(20, 8, (1.8, 1.2), (0.8, 0.3)))
    mats.append(operator_stream(spec)(1).A)
    for A in mats:
        gap = np.min(np.abs(np.abs(np.linalg.eigvals(A)) - 1.0))
        assert gap >= 0.2 - 1e-9, gap
    return mats


def criterion_9():
    def body():
        angles = [eigenspace_equality_check(A, 1.0, N_POW_MAX) for A in eigenspace_test_matrices()]
        worst = max(angles)
        return worst <= 1e-4, f"max principal angle {worst:.1e} over {len(angles)} matrices at n = {N_POW_MAX}"
    return _timed("9", "stable backward space equals E^1(A^T)", body)


def subspace_lemma_instance(rng):
    """A random ``(Z, W, eps)`` with ``||Z u|| < eps`` on ``span(W)`` by construction."""
    d = int(rng.integers(3, 11))
    k = int(rng.integers(1, d))
    eps = 10.0 ** rng.uniform(-8, -1)
    basis = random_orthogonal(rng, d)
    W, Wp = basis[:, :k], basis[:, k:]
    # block form in (W, W-perp) coordinates; [E; C] acts on span(W)
    E = rng.standard_normal((k, k))
    E = (E + E.T) / 2
    C = rng.standard_normal((d - k, k))
    EC = np.vstack([E, C])
    EC *= rng.uniform(0.05, 0.95) * eps / np.linalg.norm(EC, 2)
    F = rng.standard_normal((d - k, d - k)) * 10.0 ** rng.uniform(-3, 1)
    F = (F + F.T) / 2
    Z = np.block([[EC[:k], EC[k:].T], [EC[k:], F]])
    Z = basis @ Z @ basis.T
    return (Z + Z.T) / 2, W, eps


def criterion_10():
    def body():
        rng = rng_for(SUITE_SEED, 103)
        violations = premise = 0
        for _ in range(500):
            Z, W, eps = subspace_lemma_instance(rng)
            try:
                violations += not lemma_subspace_bound_check(Z, W, eps)
            except HypothesisFailed:
                premise += 1
        ok = violations == 0 and premise == 0
        return ok, f"{violations} violations, {premise} premise failures in 500 instances"
    return _timed("10", "subspace eigenvalue lemma", body)


GRAMIAN_EXAMPLES = (
    # (A, H, Q, expected observability Gramian at n = 1)
    (np.diag([2.0, 0.5]), np.array([[1.0, 0.0]]), np.eye(1), np.array([[5.0, 0.0], [0.0, 0.0]])),
    (np.array([[1.0, 1.0], [0.0, 1.0]]), np.array([[1.0, 0.0]]), np.eye(1),
     np.array([[2.0, 1.0], [1.0, 1.0]])),
    (np.array([[1.0, 1.0], [0.0, 1.0]]), np.array([[1.0, 0.0]]), 4.0 * np.eye(1),
     np.array([[0.5, 0.25], [0.25, 0.25]])),
    (np.eye(2), np.eye(2), np.eye(2), 2.0 * np.eye(2)),
)


def gramian_test_specs():
    return {
        "nonaut30": preset("nonaut30").system,
        "aut30": preset("aut30").system,
        "scalar-pair": preset("scalar-pair").system,
        "random d=30": SystemSpec(d=30, q=10, horizon=200, seed=SUITE_SEED),
    }


def criterion_11():
    def body():
        nonzero = 0
        specs = gramian_test_specs()
        for spec in specs.values():
            ops = operator_stream(spec)
            for n in (0, 5):
                G0 = controllability_gramian(ops, None, n).gramian
                G1 = controllability_gramian(ops, lambda m: np.zeros((spec.d, 1)), n).gramian
                nonzero += int(np.any(G0 != 0) or np.any(G1 != 0))
        mismatches = sum(not np.array_equal(observability_gramian(constant_stream(A, H, Q), 1).gramian, G)
                         for A, H, Q, G in GRAMIAN_EXAMPLES)
        ctrl = controllability_gramian(constant_stream(np.diag([2.0, 1.0])), lambda m: np.eye(2), 0)
        mismatches += not np.array_equal(ctrl.gramian, np.diag([5.0, 2.0]))
        lows = {}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for name, spec in specs.items():
                lows[name] = uniform_observability_scan(operator_stream(spec),
                                                        experiment.scan_steps(spec)).min_eig
        low = min(lows.values())
        ok = nonzero == 0 and mismatches == 0 and low > THETA_OBS
        return ok, (f"nonzero controllability Gramians: {nonzero}, hand-example mismatches: {mismatches}, "
                    f"lowest observability eigenvalue {low:.2e}")
    return _timed("11", "Gramian checks", body)


def criterion_12():
    def body():
        cfg = preset("nonaut30", emit_svg=False)
        with tempfile.TemporaryDirectory() as tmp:
            a, b = Path(tmp, "a"), Path(tmp, "b")
            experiment.run(cfg, a)
            experiment.run(cfg, b)
            names = sorted(p.name for p in a.glob("*.csv"))
            _, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
        ok = bool(names) and not mismatch and not errors
        return ok, f"{len(names)} CSV files compared, differing: {mismatch + errors or 'none'}"
    return _timed("12", "byte-identical reruns", body)


CRITERIA = {
    "1": criterion_1, "2": criterion_2, "3": criterion_3, "4": criterion_4, "5": criterion_5,
    "6a": criterion_6a, "6b": criterion_6b, "7": criterion_7, "8a": criterion_8a,
    "8b": criterion_8b, "8c": criterion_8c, "9": criterion_9, "10": criterion_10,
    "11": criterion_11, "12": criterion_12,
}


def run_all(ids=None):
    ids = list(CRITERIA) if ids is None else list(ids)
    return [CRITERIA[i]() for i in ids]
