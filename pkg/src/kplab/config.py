"""Experiment configuration: strict JSON schema plus cross-field rules.

Every violation is collected before reporting, so one run of the validator
lists everything that is wrong with a file.
"""

from __future__ import annotations

import json
import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigurationError

EXPERIMENTS = ("hum", "scan-lambda", "ingham", "counterexample", "nonlinear-steer", "transit", "selftest")

# sweep keys each experiment understands
SWEEP_KEYS = {
    "hum": {"n_pairs"},
    "scan-lambda": {"lambdas", "include_resonant", "weak_kappa"},
    "ingham": {"freqs", "n_vectors"},
    "counterexample": {"n_list", "alpha", "B", "b_small"},
    "nonlinear-steer": {"data_norm", "snapshots"},
    "transit": {"lambdas"},
    "selftest": set(),
}
VERTICAL_ONLY = {"hum", "scan-lambda", "nonlinear-steer"}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridConfig(_Strict):
    K: int = Field(8, ge=1, le=256)
    L: int = Field(4, ge=0, le=256)


class StripConfig(_Strict):
    a: float = Field(-math.pi / 2, ge=-math.pi, le=math.pi)
    b: float = Field(math.pi / 2, ge=-math.pi, le=math.pi)
    orientation: Literal["vertical", "horizontal"] = "vertical"


class BumpConfig(_Strict):
    n_quad: int = Field(4096, ge=64, le=1 << 20)


class SolverConfig(_Strict):
    dt: float = Field(1e-3, gt=0, le=1)
    dealias: float = Field(2.0 / 3.0, gt=0, le=1)
    max_picard: int = Field(20, ge=1, le=1000)
    picard_tol: float = Field(1e-10, gt=0)
    R: float = Field(1.0, gt=0)


class SweepConfig(_Strict):
    lambdas: Optional[List[float]] = None
    include_resonant: Optional[bool] = None
    weak_kappa: Optional[float] = Field(None, ge=0)
    freqs: Optional[List[float]] = None
    n_vectors: Optional[int] = Field(None, ge=1)
    n_list: Optional[List[int]] = None
    alpha: Optional[float] = Field(None, gt=0, lt=math.pi)
    B: Optional[float] = Field(None, gt=0)
    b_small: Optional[float] = Field(None, gt=0)
    n_pairs: Optional[int] = Field(None, ge=1, le=10000)
    data_norm: Optional[float] = Field(None, gt=0)
    snapshots: Optional[List[float]] = None


class ExperimentConfig(_Strict):
    experiment: Literal["hum", "scan-lambda", "ingham", "counterexample", "nonlinear-steer", "transit", "selftest"]
    grid: GridConfig = GridConfig()
    T: float = Field(1.0, gt=0, le=1000)
    strip: StripConfig = StripConfig()
    bump: BumpConfig = BumpConfig()
    solver: SolverConfig = SolverConfig()
    sweep: SweepConfig = SweepConfig()
    seed: int = Field(0, ge=0, le=2 ** 63 - 1)
    output_dir: str = "kplab-out"

    def to_json(self):
        return self.model_dump_json(indent=2)

    def replace(self, **changes):
        return self.model_copy(update=changes)


class ConfigErrors(ConfigurationError):
    """Configuration rejected; ``violations`` lists ``(path, message)`` pairs."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "\n".join(f"  {p}: {m}" for p, m in self.violations)
        super().__init__(f"{len(self.violations)} configuration error(s):\n{lines}")


def _get(obj, *path):
    for key in path:
        if not isinstance(obj, dict) or key not in obj:
            return None
        obj = obj[key]
    return obj


def _num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _cross_field(raw):
    out = []
    exp = raw.get("experiment")
    a, b = _get(raw, "strip", "a"), _get(raw, "strip", "b")
    if _num(a) and _num(b) and not a < b:
        out.append(("strip.a", f"must be smaller than strip.b (a={a}, b={b})"))
        out.append(("strip.b", f"must be larger than strip.a (a={a}, b={b})"))
    orient = _get(raw, "strip", "orientation") or "vertical"
    if exp == "counterexample" and orient != "horizontal":
        out.append(("strip.orientation", "counterexample requires horizontal orientation"))
    if exp in VERTICAL_ONLY and orient != "vertical":
        out.append(("strip.orientation", f"{exp} requires vertical orientation"))
    sweep = raw.get("sweep") if isinstance(raw.get("sweep"), dict) else {}
    if exp in SWEEP_KEYS:
        for key in sorted({k for k, v in sweep.items() if v is not None} - SWEEP_KEYS[exp]):
            if key in SweepConfig.model_fields:
                out.append((f"sweep.{key}", f"not used by experiment {exp}"))
    for key in ("lambdas",):
        vals = sweep.get(key)
        if isinstance(vals, list):
            if not vals:
                out.append((f"sweep.{key}", "must not be empty"))
            for i, v in enumerate(vals):
                if _num(v) and v < 0:
                    out.append((f"sweep.{key}.{i}", "must be >= 0"))
    freqs = sweep.get("freqs")
    if isinstance(freqs, list) and all(_num(f) for f in freqs):
        if len(freqs) < 1:
            out.append(("sweep.freqs", "must not be empty"))
        elif len(set(freqs)) != len(freqs):
            out.append(("sweep.freqs", "frequencies must be distinct"))
    n_list = sweep.get("n_list")
    if isinstance(n_list, list):
        if not n_list:
            out.append(("sweep.n_list", "must not be empty"))
        for i, n in enumerate(n_list):
            if isinstance(n, int) and n < 2:
                out.append((f"sweep.n_list.{i}", "must be >= 2"))
    B, bs = sweep.get("B"), sweep.get("b_small")
    if _num(B) and _num(bs) and not bs < B:
        out.append(("sweep.b_small", "must be smaller than sweep.B"))
    snaps = sweep.get("snapshots")
    T = raw.get("T", 1.0)
    if isinstance(snaps, list) and _num(T):
        for i, s in enumerate(snaps):
            if _num(s) and not 0 <= s <= T:
                out.append((f"sweep.snapshots.{i}", f"must lie in [0, T={T}]"))
    dn, R = sweep.get("data_norm"), _get(raw, "solver", "R")
    if _num(dn) and _num(R) and dn > R:
        out.append(("sweep.data_norm", f"exceeds solver.R = {R}"))
    return out


def _loc(err):
    return ".".join(str(p) for p in err["loc"]) or "<root>"


def validate(raw):
    """Validated :class:`ExperimentConfig` from a decoded JSON object."""
    if not isinstance(raw, dict):
        raise ConfigErrors([("<root>", "configuration must be a JSON object")])
    violations = []
    cfg = None
    try:
        cfg = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        for err in exc.errors():
            msg = err["msg"]
            if err["loc"] and err["loc"][0] == "experiment":
                msg = f"{msg}; valid experiments: {', '.join(EXPERIMENTS)}"
            violations.append((_loc(err), msg))
    violations.extend(_cross_field(raw))
    if violations:
        raise ConfigErrors(violations)
    return cfg


def parse_config(text):
    """Parse a JSON document into a validated configuration."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigErrors([("<root>", f"malformed JSON: {exc}")]) from exc
    return validate(raw)


def serialize_config(cfg):
    return cfg.to_json()
