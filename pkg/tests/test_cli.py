import csv
import hashlib
import json
import os
import subprocess
import sys

import pytest

from riccati_rank.cli import main
from riccati_rank.config import config_to_dict, preset


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def scalar_doc(**system):
    doc = config_to_dict(preset("scalar-pair"))
    doc.pop("checkpoints")
    doc["system"].update(system)
    return doc


@pytest.fixture(scope="module")
def nonaut_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("nonaut30")
    assert main(["run", "--preset", "nonaut30", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def aut_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("aut30")
    assert main(["run", "--preset", "aut30", "--out", str(out), "--no-svg"]) == 0
    return out


def test_nonaut30_bottom_eigenvalues_collapse(nonaut_dir):
    header, rows = read_csv(nonaut_dir / "diagnostics.csv")
    last = dict(zip(header, rows[-1]))
    eigs = [float(last[f"delta_eig_{j}"]) for j in range(1, 31)]
    assert max(eigs[14:]) < 1e-6 and min(eigs[:14]) > 1e-3


def test_nonaut30_artifacts_and_metadata(nonaut_dir):
    meta = json.loads((nonaut_dir / "metadata.json").read_text())
    names = {a["file"] for a in meta["artifacts"]}
    assert {"diagnostics.csv", "exponents.csv", "filter_steps.csv",
            "fig1_eigenvalues.svg", "fig2_projections.svg", "fig3_exponents.svg"} <= names
    for a in meta["artifacts"]:
        data = (nonaut_dir / a["file"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == a["sha256"] and len(data) == a["bytes"]
    assert meta["d0"] == {"measured": 14, "target": 14}
    assert meta["rng"]["seed"] == 1 and meta["config"]["schema_version"] == 1


def test_csv_headers_and_full_precision(nonaut_dir):
    header, rows = read_csv(nonaut_dir / "filter_steps.csv")
    assert header == ["n", "sigma_norm", "delta_norm", "gain_norm", "M_norm", "gain_residual"]
    assert len(rows) == 400
    value = rows[10][1]
    assert float(value) == float(repr(float(value)))  # round-trips exactly
    header, _ = read_csv(nonaut_dir / "exponents.csv")
    assert header == ["n"] + [f"mu_{j}" for j in range(1, 31)]


def test_rerun_is_byte_identical(nonaut_dir, tmp_path):
    assert main(["run", "--preset", "nonaut30", "--out", str(tmp_path), "--no-svg"]) == 0
    for name in ("diagnostics.csv", "exponents.csv", "filter_steps.csv"):
        assert (tmp_path / name).read_bytes() == (nonaut_dir / name).read_bytes()


def test_aut30_null_directions(aut_dir):
    _, rows = read_csv(aut_dir / "autonomous.csv")
    norms = [float(r[2]) for r in rows]
    assert len(norms) == 30 and max(norms[12:]) <= 1e-6
    assert not (aut_dir / "fig4_autonomous.svg").exists()


def test_scalar_pair_fixed_points(tmp_path, capsys):
    assert main(["run", "--preset", "scalar-pair", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "diagnostics.csv")
    last = dict(zip(header, rows[-1]))
    assert abs(float(last["proj_norm_1"]) - 0.75) <= 1e-12
    assert float(last["proj_norm_2"]) <= 1e-8
    assert "d0 measured 1" in capsys.readouterr().out


def test_schema_version_error_exits_2(tmp_path, capsys):
    doc = scalar_doc()
    doc["schema_version"] = 99
    assert main(["run", "--config", write_config(tmp_path, doc), "--out", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err


def test_unknown_key_exits_2(tmp_path):
    doc = scalar_doc()
    doc["colour"] = "blue"
    assert main(["verify", "--config", write_config(tmp_path, doc)]) == 2


def test_blowup_exits_3_and_leaves_nothing(tmp_path, capsys):
    doc = scalar_doc(explicit={"A": [[[2.0, 0.0], [0.0, 0.5]]], "H": [[[0.0, 0.0]]], "Q": [[[1.0]]]},
                     q=1)
    out = tmp_path / "blown"
    assert main(["run", "--config", write_config(tmp_path, doc), "--out", str(out)]) == 3
    assert "step 27" in capsys.readouterr().err
    assert not out.exists()


def test_verify_reports_failed_boundedness(tmp_path, capsys):
    doc = scalar_doc(explicit={"A": [[[2.0, 0.0], [0.0, 0.5]]], "H": [[[0.0, 0.0]]], "Q": [[[1.0]]]},
                     q=1)
    out = tmp_path / "v"
    assert main(["verify", "--config", write_config(tmp_path, doc), "--out", str(out)]) == 4
    text = capsys.readouterr().out
    assert "[FAIL] boundedness" in text and "27" in text
    assert json.loads((out / "verify.json").read_text())["passed"] is False


def test_verify_scalar_pair_passes(capsys):
    assert main(["verify", "--preset", "scalar-pair"]) == 0
    assert "[FAIL]" not in capsys.readouterr().out


def test_larger_eps_collapses_earlier(tmp_path):
    onsets = {}
    for eps in (1e-6, 1e-1):
        out = tmp_path / str(eps)
        assert main(["verify", "--preset", "scalar-pair", "--eps", str(eps), "--out", str(out)]) == 0
        onsets[eps] = json.loads((out / "verify.json").read_text())["collapse_onset"]
    assert onsets[1e-1] < onsets[1e-6]


def test_verify_acceptance_subset(capsys):
    assert main(["verify", "--criteria", "1,3"]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("[")]
    assert len(lines) == 2 and all(l.startswith("[PASS]") for l in lines)


def test_verify_unknown_criterion_exits_2():
    assert main(["verify", "--criteria", "99"]) == 2


def test_probe_jordan_csv(tmp_path, capsys):
    assert main(["probe-jordan", "--lam", "0.5", "--k", "2", "--n", "10,1000",
                 "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "jordan_probe.csv")
    assert header == ["lambda", "k", "j", "n", "measured"] and len(rows) == 4
    final = [float(r[4]) for r in rows if r[3] == "1000"]
    assert all(abs(v - 0.5) <= 0.01 for v in final)


def test_probe_jordan_complex(capsys):
    assert main(["probe-jordan", "--lam", "0.3+0.4j", "--k", "2", "--n", "5"]) == 0
    assert "|lambda| = 0.5000000000" in capsys.readouterr().out


def test_probe_jordan_bad_lambda_exits_2():
    assert main(["probe-jordan", "--lam", "abc"]) == 2


def test_gramian_command(tmp_path, capsys):
    assert main(["gramian", "--preset", "scalar-pair", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "gramian.csv")
    assert header == ["n", "min_eig"] and rows
    assert "above" in capsys.readouterr().out


def test_lyapunov_command(tmp_path, capsys):
    assert main(["lyapunov", "--preset", "scalar-pair", "--horizon", "40", "--out", str(tmp_path)]) == 0
    assert "d0 = 1" in capsys.readouterr().out
    _, rows = read_csv(tmp_path / "exponents.csv")
    assert len(rows) == 40


def test_seed_sweep_respects_thread_cap(tmp_path, monkeypatch):
    monkeypatch.setenv("RICCATI_RANK_THREADS", "1")
    assert main(["run", "--preset", "scalar-pair", "--seeds", "3,4", "--out", str(tmp_path),
                 "--no-svg"]) == 0
    for s in (3, 4):
        meta = json.loads((tmp_path / f"seed_{s}" / "metadata.json").read_text())
        assert meta["rng"]["seed"] == s


def test_bad_thread_cap_exits_2(tmp_path, monkeypatch):
    monkeypatch.setenv("RICCATI_RANK_THREADS", "many")
    assert main(["run", "--preset", "scalar-pair", "--seeds", "1,2", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    env = {**os.environ, "RICCATI_RANK_THREADS": "1"}
    proc = subprocess.run([sys.executable, "-m", "riccati_rank", "probe-jordan", "--lam", "0",
                           "--k", "3", "--n", "5"], capture_output=True, text=True, env=env)
    assert proc.returncode == 0 and "sigma^(1/n) = 0.0000000000" in proc.stdout
