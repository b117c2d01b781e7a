"""Experiment configuration: defaults, validation and (de)serialisation."""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

from .errors import ConfigError
from .rand import RNG_ALGORITHM
from .samplers import KERNEL_KINDS, ProposalKernel
from .targets import make_target

TARGETS = ("gaussian", "student_t", "perturbed_t")
INITS = ("std_normal", "exact_target")
DEFAULT_RHO = 0.8


@dataclass
class ExperimentConfig:
    algorithm: dict = field(default_factory=lambda: {"kind": "mpcn"})
    target: dict = field(default_factory=lambda: {"name": "student_t", "nu": 2.0, "sigma": 5.0})
    d: int = 20
    M: int = 100_000
    seed: int = 0
    stream_id: int = 0
    init: Union[str, list] = "std_normal"
    record: dict = field(default_factory=lambda: {"radial": True, "coord1": True, "path": False})
    xi: Optional[float] = None
    peak_estimation: Optional[dict] = None
    max_lag: int = 500
    thin: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        self.validate()

    # -- validation -------------------------------------------------------------
    def validate(self):
        alg = self.algorithm
        if not isinstance(alg, dict) or alg.get("kind") not in KERNEL_KINDS:
            raise ConfigError("algorithm.kind", f"must be one of {KERNEL_KINDS}")
        tgt = self.target
        if not isinstance(tgt, dict) or tgt.get("name") not in TARGETS:
            raise ConfigError("target.name", f"must be one of {TARGETS}")
        for name in ("d", "M", "seed", "stream_id", "max_lag", "thin"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigError(name, f"must be an integer, got {v!r}")
        if self.d < 1:
            raise ConfigError("d", "must be >= 1")
        if self.M < 0:
            raise ConfigError("M", "must be >= 0")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed", "must fit in 64 unsigned bits")
        if self.thin < 1:
            raise ConfigError("thin", "must be >= 1")
        if self.target["name"] == "perturbed_t" and self.d < 2:
            raise ConfigError("d", "perturbed_t needs d >= 2")
        if isinstance(self.init, str):
            if self.init not in INITS:
                raise ConfigError("init", f"must be one of {INITS} or an explicit vector")
            if self.init == "exact_target" and self.target["name"] == "perturbed_t":
                raise ConfigError("init", "perturbed_t has no exact sampler")
        elif len(self.init) != self.d:
            raise ConfigError("init", f"explicit vector must have length d={self.d}")
        if self.xi is not None and self.target["name"] not in ("gaussian", "student_t"):
            raise ConfigError("xi", "shifts are defined for gaussian and student_t targets only")
        if self.peak_estimation is not None:
            pm = self.peak_estimation.get("pilot_M")
            if not isinstance(pm, int) or pm < 1:
                raise ConfigError("peak_estimation.pilot_M", "must be a positive integer")
        try:
            self.kernel()
        except ValueError as exc:
            raise ConfigError("algorithm", str(exc)) from None
        try:
            self.base_target()
        except (ValueError, TypeError) as exc:
            raise ConfigError("target", str(exc)) from None

    # -- builders ---------------------------------------------------------------
    def kernel(self) -> ProposalKernel:
        return kernel_from_spec(self.algorithm, self.d)

    def base_target(self):
        params = {k: v for k, v in self.target.items() if k != "name"}
        return make_target(self.target["name"], self.d, **params)

    # -- serialisation ----------------------------------------------------------
    def to_dict(self) -> dict:
        out = asdict(self)
        out["rng"] = RNG_ALGORITHM
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        data.pop("rng", None)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration key")
        return cls(**copy.deepcopy(data))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def replace(self, **changes) -> "ExperimentConfig":
        data = asdict(self)
        data.update(copy.deepcopy(changes))
        return ExperimentConfig(**data)


def kernel_from_spec(spec: dict, d: int) -> ProposalKernel:
    """Kernel from ``{'kind': ..., params...}``, filling the paper's defaults."""
    kind = spec["kind"]
    params = {k: v for k, v in spec.items() if k != "kind"}
    if kind in ("rwm_gauss", "rwm_t"):
        params.setdefault("sigma_d", float(d) ** -0.5)
        if kind == "rwm_t":
            params.setdefault("df", 2.0)
    else:
        params.setdefault("rho", DEFAULT_RHO)
        if kind == "mpcn_general":
            params.setdefault("nu_bar", 1.0)
    return ProposalKernel(kind, **params)


def load_config_file(path) -> dict:
    """Read a YAML (or JSON) config file into a plain dict."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    return data


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; ``override`` wins, ``None`` values are ignored."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if v is None:
            continue
        if isinstance(v, dict):
            out[k] = merge(out.get(k) if isinstance(out.get(k), dict) else {}, v)
        else:
            out[k] = copy.deepcopy(v)
    return out
