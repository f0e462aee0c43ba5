"""Run configuration documents (JSON) and the named experiment presets."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .system import Bounds, SystemSpec, split_spectrum

SCHEMA_VERSION = 1
EXPERIMENTS = ("nonaut30", "aut30", "custom")


@dataclass(frozen=True, eq=False)
class RunConfig:
    experiment: str
    system: SystemSpec
    checkpoints: tuple
    eps: float = 1e-6
    output_dir: str = "out"
    emit_svg: bool = True
    noise_seed: int = 0

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InvalidInput(f"experiment must be one of {EXPERIMENTS}")
        cps = tuple(int(c) for c in self.checkpoints)
        if list(cps) != sorted(set(cps)):
            raise InvalidInput("checkpoints must be strictly increasing")
        if cps and (cps[0] < 1 or cps[-1] > self.system.horizon):
            raise InvalidInput(f"checkpoints must lie in 1..{self.system.horizon}")
        if not self.eps > 0:
            raise InvalidInput("eps must be positive")
        object.__setattr__(self, "checkpoints", cps)


def _matrix_list(value):
    return [np.asarray(m, dtype=float) for m in value]


def system_from_dict(doc):
    doc = dict(doc)
    bounds = Bounds(**doc.pop("bounds", {}))
    explicit = doc.pop("explicit", None)
    if explicit is not None:
        explicit = {k: _matrix_list(v) for k, v in explicit.items()}
    delta0_matrix = doc.pop("delta0_matrix", None)
    if delta0_matrix is not None:
        delta0_matrix = np.asarray(delta0_matrix, dtype=float)
    known = {"d", "q", "horizon", "seed", "generator", "delta0", "spectrum"}
    unknown = set(doc) - known
    if unknown:
        raise InvalidInput(f"unknown system keys: {sorted(unknown)}")
    try:
        return SystemSpec(bounds=bounds, explicit=explicit, delta0_matrix=delta0_matrix, **doc)
    except TypeError as exc:
        raise InvalidInput(str(exc)) from exc


def system_to_dict(spec):
    doc = {
        "d": spec.d,
        "q": spec.q,
        "horizon": spec.horizon,
        "seed": int(spec.seed),
        "generator": spec.generator,
        "bounds": {"c_A": spec.bounds.c_A, "c_H": spec.bounds.c_H, "c_Q": spec.bounds.c_Q},
        "delta0": spec.delta0,
    }
    if spec.delta0_matrix is not None:
        doc["delta0_matrix"] = spec.delta0_matrix.tolist()
    if spec.spectrum is not None:
        doc["spectrum"] = list(spec.spectrum)
    if spec.explicit is not None:
        doc["explicit"] = {k: [m.tolist() for m in v] for k, v in spec.explicit.items()}
    return doc


def _checkpoints(value, horizon):
    if value is None:
        return tuple(range(1, horizon + 1))
    if isinstance(value, dict):
        every = int(value.get("every", 1))
        if every < 1:
            raise InvalidInput("checkpoints.every must be >= 1")
        steps = list(range(every, horizon + 1, every))
        if not steps or steps[-1] != horizon:
            steps.append(horizon)
        return tuple(steps)
    return tuple(int(v) for v in value)


def config_from_dict(doc, seed=None, output_dir=None, emit_svg=None):
    doc = dict(doc)
    version = doc.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise InvalidInput(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    if "system" not in doc:
        raise InvalidInput("config needs a 'system' section")
    sysdoc = dict(doc.pop("system"))
    if seed is not None:
        sysdoc["seed"] = int(seed)
    system = system_from_dict(sysdoc)
    known = {"experiment", "checkpoints", "eps", "output_dir", "emit_svg", "noise_seed"}
    unknown = set(doc) - known
    if unknown:
        raise InvalidInput(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(
        experiment=doc.get("experiment", "custom"),
        system=system,
        checkpoints=_checkpoints(doc.get("checkpoints"), system.horizon),
        eps=float(doc.get("eps", 1e-6)),
        output_dir=output_dir or doc.get("output_dir", "out"),
        emit_svg=doc.get("emit_svg", True) if emit_svg is None else emit_svg,
        noise_seed=int(doc.get("noise_seed", system.seed)),
    )


def config_to_dict(cfg):
    return {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "system": system_to_dict(cfg.system),
        "checkpoints": list(cfg.checkpoints),
        "eps": cfg.eps,
        "output_dir": str(cfg.output_dir),
        "emit_svg": cfg.emit_svg,
        "noise_seed": cfg.noise_seed,
    }


def load_config(path, **overrides):
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc, **overrides)


# --- presets ---------------------------------------------------------------

NONAUT30_SPECTRUM = split_spectrum(30, 14, unstable=(2.0, 1.1), stable=(0.9, 0.5))
AUT30_SPECTRUM = split_spectrum(30, 12, unstable=(1.8, 1.1), stable=(0.9, 0.3))


def preset_document(name):
    """The JSON document of a named preset."""
    if name == "nonaut30":
        system = {
            "d": 30, "q": 10, "horizon": 400, "seed": 1,
            "generator": "RotatedDiagonal", "delta0": "RandomSPD",
            "spectrum": list(NONAUT30_SPECTRUM),
        }
        experiment = "nonaut30"
    elif name == "aut30":
        system = {
            "d": 30, "q": 10, "horizon": 500, "seed": 3,
            "generator": "Autonomous", "delta0": "RandomSPD",
            "bounds": {"c_A": 3.0, "c_H": 1.0, "c_Q": 1.0},
            "spectrum": list(AUT30_SPECTRUM),
        }
        experiment = "aut30"
    elif name == "scalar-pair":
        system = {
            "d": 2, "q": 2, "horizon": 100, "seed": 0,
            "generator": "ExplicitSequence", "delta0": "Identity",
            "explicit": {"A": [[[2.0, 0.0], [0.0, 0.5]]],
                         "H": [[[1.0, 0.0], [0.0, 1.0]]],
                         "Q": [[[1.0, 0.0], [0.0, 1.0]]]},
        }
        experiment = "custom"
    else:
        raise InvalidInput(f"unknown preset {name!r}; choose from {PRESETS}")
    return {"schema_version": SCHEMA_VERSION, "experiment": experiment, "system": system,
            "eps": 1e-6}


PRESETS = ("nonaut30", "aut30", "scalar-pair")


def preset(name, **overrides):
    return config_from_dict(preset_document(name), **overrides)
