"""
Experiment runner: one filter run plus Lyapunov analysis for a RunConfig,
the run-level checks, and CSV / SVG / metadata output.
"""

import csv
import hashlib
import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import config_to_dict
from .diagnostics import collapse_onset, frames_for_run
from .errors import RiccatiRankError
from .gramian import THETA_OBS, uniform_observability_scan
from .kalman import GAIN_IDENTITY_TOL, JOSEPH_TOL, bounded_tail, run_filter, trend_slope
from .linalg import norm
from .lyapunov import THETA_NEUTRAL, count_nonnegative, qr_exponents
from .spectral import constant_dynamics, nullspace_from_run
from .svg import line_plot
from .system import RNG_NAME, initial_state, operator_stream, simulate_truth

SCAN_POINTS = 50
DIRECTION_FLOOR = 1e-3
BOUNDED_SLOPE = 1e-3
SUM_RULE_TOL = 1e-8


@dataclass
class Check:
    name: str
    passed: bool
    value: float = float("nan")
    threshold: float = float("nan")
    detail: str = ""

    def as_dict(self):
        return {"passed": self.passed, "value": _num(self.value),
                "threshold": _num(self.threshold), "detail": self.detail}


@dataclass(eq=False)
class ExperimentResult:
    config: object
    run: object = None
    lyapunov: object = None
    frames: list = field(default_factory=list)
    scan: object = None
    nullspace: object = None
    d0_target: int = None
    checks: list = field(default_factory=list)
    error: str = None

    @property
    def d0(self):
        return None if self.lyapunov is None else self.lyapunov.d0

    @property
    def passed(self):
        return self.error is None and all(c.passed for c in self.checks)


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else str(x)


def fmt(x):
    """17 significant digits, enough to round-trip a double."""
    return format(float(x), ".17g")


def target_d0(spec):
    """Number of non-negative exponents implied by the construction, if known."""
    if spec.generator in ("RotatedDiagonal", "Autonomous") and spec.spectrum is not None:
        return count_nonnegative(np.log(np.abs(spec.spectrum)), THETA_NEUTRAL)
    if spec.generator == "ExplicitSequence" and len(spec.explicit["A"]) == 1:
        mags = np.abs(np.linalg.eigvals(spec.explicit["A"][0]))
        with np.errstate(divide="ignore"):
            return count_nonnegative(np.log(mags), THETA_NEUTRAL)
    return None


def scan_steps(spec):
    last = spec.horizon - spec.d + 1
    if last < 1:
        return ()
    return tuple(np.unique(np.linspace(1, last, min(SCAN_POINTS, last)).round().astype(int)))


def _is_time_invariant(spec):
    return spec.generator == "Autonomous" or (
        spec.generator == "ExplicitSequence" and len(spec.explicit["A"]) == 1)


def evaluate(cfg, strict=True):
    """
    Compute everything for `cfg`. With ``strict=False`` library errors are
    recorded on the result (as a failed check) instead of propagating.
    """
    spec = cfg.system
    res = ExperimentResult(cfg, d0_target=target_d0(spec))
    ops = operator_stream(spec)
    try:
        steps = scan_steps(spec)
        if steps:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res.scan = uniform_observability_scan(ops, steps, spec.d)
        traj = simulate_truth(spec, initial_state(spec), cfg.noise_seed, ops=ops)
        res.run = run_filter(spec, traj=traj, ops=ops, checkpoints=cfg.checkpoints)
        res.lyapunov = qr_exponents(ops, spec.horizon)
        res.frames = frames_for_run(res.run, res.lyapunov.d0, cfg.eps, cfg.checkpoints)
        if _is_time_invariant(spec):
            res.nullspace = nullspace_from_run(constant_dynamics(spec, ops), res.run)
    except RiccatiRankError as exc:
        if strict:
            raise
        step = getattr(exc, "step", None)
        res.error = f"{type(exc).__name__}" + (f" at step {step}" if step else "") + f": {exc}"
        res.checks = [Check("boundedness", False, detail=res.error)]
        return res
    res.checks = run_checks(res)
    return res


def run_checks(res):
    cfg, run, lyap = res.config, res.run, res.lyapunov
    d, eps = cfg.system.d, cfg.eps
    checks = []
    g = float(run.gain_residual.max())
    checks.append(Check("gain_identity", g <= GAIN_IDENTITY_TOL, g, GAIN_IDENTITY_TOL))
    j = float(run.joseph_residual.max())
    checks.append(Check("joseph_agreement", j <= JOSEPH_TOL, j, JOSEPH_TOL))
    delta_norms = run.norms("Delta")
    slope = trend_slope(delta_norms[delta_norms.size // 2:])
    checks.append(Check("boundedness", bounded_tail(delta_norms, BOUNDED_SLOPE), slope,
                        BOUNDED_SLOPE,
                        detail=f"fit slope of ||Delta_n|| over the second half; "
                               f"max ||Delta_n|| = {fmt(delta_norms.max())}, "
                               f"max ||M_n|| = {fmt(run.M_norm.max())}"))
    gap = abs(float(lyap.exponents.sum()) - lyap.log_det_mean)
    checks.append(Check("exponent_sum_rule", gap <= SUM_RULE_TOL, gap, SUM_RULE_TOL))
    if res.scan is not None:
        checks.append(Check("observability", not res.scan.warn, res.scan.min_eig, THETA_OBS))
    if res.d0_target is not None:
        checks.append(Check("d0_matches_construction", lyap.d0 == res.d0_target, lyap.d0,
                            res.d0_target))
    if res.frames:
        target = d - lyap.d0
        last = res.frames[-1]
        onset = collapse_onset(res.frames, target)
        checks.append(Check("collapse", last.eps_rank_delta >= target, last.eps_rank_delta, target,
                            detail=f"N* = {onset}"))
        tail = res.frames[len(res.frames) - max(1, len(res.frames) // 4):]
        r = max(max(f.restriction_delta, f.restriction_sigma) for f in tail)
        checks.append(Check("restriction", r <= eps, r, eps,
                            detail="max over the final quarter of checkpoints"))
    if res.nullspace is not None:
        ns = res.nullspace
        stable = ns.direction_norms[ns.d0:]
        unstable = ns.direction_norms[:ns.d0]
        worst = float(stable.max()) if stable.size else 0.0
        ok = worst <= eps and (unstable.size == 0 or unstable.min() >= DIRECTION_FLOOR)
        checks.append(Check("stable_eigendirections", bool(ok), worst, eps,
                            detail=f"d0 = {ns.d0}, unstable minimum "
                                   f"{fmt(unstable.min()) if unstable.size else 'n/a'}"))
    return checks


def collapse_step(res):
    if not res.frames:
        return None
    return collapse_onset(res.frames, res.config.system.d - res.lyapunov.d0)


# --- output -----------------------------------------------------------------

def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, np.integer, str)) else fmt(v) for v in row])


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_csvs(res, out):
    d = res.config.system.d
    files = []
    path = out / "diagnostics.csv"
    header = (["n"] + [f"delta_eig_{j}" for j in range(1, d + 1)]
              + [f"proj_norm_{j}" for j in range(1, d + 1)]
              + ["restriction_delta", "restriction_sigma", "eps_rank_delta"])
    write_csv(path, header, (
        [f.n, *f.delta_eigs, *f.proj_norms, f.restriction_delta, f.restriction_sigma,
         f.eps_rank_delta] for f in res.frames))
    files.append(path)

    path = out / "exponents.csv"
    hist = res.lyapunov.history
    write_csv(path, ["n"] + [f"mu_{j}" for j in range(1, d + 1)],
               ([n, *row] for n, row in enumerate(hist, start=1)))
    files.append(path)

    path = out / "filter_steps.csv"
    run = res.run
    write_csv(path, ["n", "sigma_norm", "delta_norm", "gain_norm", "M_norm", "gain_residual"], (
        [n, norm(s.Sigma), norm(s.Delta), norm(s.K), run.M_norm[n - 1], run.gain_residual[n - 1]]
        for n, s in enumerate(run.states[1:], start=1)))
    files.append(path)

    if res.nullspace is not None:
        path = out / "autonomous.csv"
        ns = res.nullspace
        write_csv(path, ["j", "eig_mag", "norm"],
                   ([j, m, v] for j, (m, v) in enumerate(zip(ns.eig_mags, ns.direction_norms), 1)))
        files.append(path)
    return files


def write_svgs(res, out):
    d = res.config.system.d
    ns = [f.n for f in res.frames]
    files = []
    if res.frames:
        path = out / "fig1_eigenvalues.svg"
        line_plot(path, [(f"lambda_{j + 1}", ns, [f.delta_eigs[j] for f in res.frames])
                         for j in range(d)],
                  title="Eigenvalues of the analysis covariance", xlabel="n", ylabel="|lambda_j|")
        files.append(path)
        path = out / "fig2_projections.svg"
        line_plot(path, [(f"j={j + 1}", ns, [f.proj_norms[j] for f in res.frames])
                         for j in range(d)],
                  title="Projection onto backward Lyapunov vectors", xlabel="n",
                  ylabel="||Delta_n u_j||")
        files.append(path)
    hist = res.lyapunov.history
    steps = list(range(1, hist.shape[0] + 1))
    path = out / "fig3_exponents.svg"
    line_plot(path, [(f"mu_{j + 1}", steps, hist[:, j]) for j in range(d)], logy=False,
              title="Running Lyapunov exponents", xlabel="N", ylabel="mu_j")
    files.append(path)
    if res.nullspace is not None:
        path = out / "fig4_autonomous.svg"
        js = list(range(1, d + 1))
        line_plot(path, [("||Delta v_j||", js, res.nullspace.direction_norms)],
                  title="Covariance along eigenvectors of A^T", xlabel="j",
                  ylabel="||Delta_N v_j(A^T)||")
        files.append(path)
    return files


def metadata(res, files, wall):
    cfg, lyap = res.config, res.lyapunov
    scan = res.scan
    return {
        "version": __version__,
        "config": config_to_dict(cfg),
        "rng": {"name": RNG_NAME, "seed": int(cfg.system.seed), "noise_seed": int(cfg.noise_seed)},
        "d0": {"measured": lyap.d0, "target": res.d0_target},
        "exponents": {
            "cumulative": [_num(v) for v in lyap.exponents],
            "tail_half": [_num(v) for v in lyap.tail_exponents],
            "log_det_mean": _num(lyap.log_det_mean),
        },
        "gramian_scan": None if scan is None else {
            "steps": [int(s) for s in scan.steps],
            "min_eigs": [_num(v) for v in scan.min_eigs],
            "min_eig": _num(scan.min_eig),
            "warn": bool(scan.warn),
        },
        "collapse_onset": collapse_step(res),
        # observed, not asserted: reported only
        "autonomous_convergence": None if res.nullspace is None else {
            "converged": res.nullspace.converged,
            "last_change": _num(res.nullspace.last_change),
        },
        "checks": {c.name: c.as_dict() for c in res.checks},
        "passed": res.passed,
        "wall_time_s": wall,
        "artifacts": [{"file": p.name, "sha256": _sha256(p), "bytes": p.stat().st_size}
                      for p in files],
    }


def run(cfg, out=None):
    """
    Run the experiment and write all artifacts into `out` (default
    ``cfg.output_dir``). Returns the metadata document. On any error the
    files written so far are removed and the error propagates.
    """
    out = Path(out or cfg.output_dir)
    t0 = time.perf_counter()
    created_dir = not out.exists()
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        res = evaluate(cfg)
        written += write_csvs(res, out)
        if cfg.emit_svg:
            written += write_svgs(res, out)
        meta = metadata(res, written, time.perf_counter() - t0)
        meta_path = out / "metadata.json"
        written.append(meta_path)
        meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        if created_dir and not any(out.iterdir()):
            out.rmdir()
        raise
    return meta
