"""Experiment configuration as flat ``section.key = value`` text."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ..anisotropy import (AnisotropyModel, Ellipsoidal, FourFold, Isotropic, KFold,
                          Riemannian)
from ..dys import StepPolicy, StopRule
from ..energy import SplittingParams
from ..errors import ConfigurationError
from ..gradient_flow import CahnHilliardParams
from ..grid import GridSpec

MODEL_KINDS = ("isotropic", "fourfold", "kfold", "riemannian", "ellipsoidal")
INIT_KINDS = ("circle", "two_circles", "random", "ball")


@dataclass(frozen=True)
class GridConfig:
    dim: int = 2
    m: int = 256


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "fourfold"
    alpha: float = 0.2
    k: int = 4
    psis: tuple = (0.0, float(np.pi / 2))
    deltas: tuple = (0.1, 0.1)
    R: tuple = (2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)


@dataclass(frozen=True)
class SplittingConfig:
    a: float = 10.0
    b: float = 2.0
    eps: float = 0.02
    M: float = 1.0
    use_truncated: bool = True


@dataclass(frozen=True)
class StepConfig:
    tau0: float = 1.0
    c0: float = 1.0
    c1: float = 10.0
    norm_mode: str = "grid_weighted"
    rescale_x: bool = True


@dataclass(frozen=True)
class StopConfig:
    tol: float = 1e-8
    max_iter: int = 200_000
    norm_mode: str = "raw_l2"


@dataclass(frozen=True)
class InitConfig:
    kind: str = "circle"
    seed: int = 0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    record_every: int = 1
    kkt_every: int = 100
    snapshot_every: int = 0
    wall_clock: bool = False


@dataclass(frozen=True)
class GradFlowConfig:
    beta: float = 1e-4
    dt: float = 1e-3
    a_s: float = 10.0
    b_s: float = 2.0
    tol: float = 1e-8
    max_steps: int = 200_000
    use_truncated: bool = False
    norm_mode: str = "grid_weighted"
    record_every: int = 10
    kkt_every: int = 100


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    splitting: SplittingConfig = field(default_factory=SplittingConfig)
    step: StepConfig = field(default_factory=StepConfig)
    stop: StopConfig = field(default_factory=StopConfig)
    init: InitConfig = field(default_factory=InitConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    gradflow: GradFlowConfig = field(default_factory=GradFlowConfig)

    def __post_init__(self):
        if self.model.kind not in MODEL_KINDS:
            raise ConfigurationError(f"model.kind must be one of {MODEL_KINDS}, got {self.model.kind!r}")
        if self.init.kind not in INIT_KINDS:
            raise ConfigurationError(f"init.kind must be one of {INIT_KINDS}, got {self.init.kind!r}")
        if not 0 <= self.init.seed < 2 ** 64:
            raise ConfigurationError("init.seed must be an unsigned 64-bit integer")
        for name in ("record_every", "kkt_every", "snapshot_every"):
            if getattr(self.output, name) < 0:
                raise ConfigurationError(f"output.{name} must be non-negative")
        if self.output.record_every == 0:
            raise ConfigurationError("output.record_every must be at least 1")

    # ------------------------------------------------------------ builders

    def grid_spec(self) -> GridSpec:
        return GridSpec(self.grid.dim, self.grid.m)

    def build_model(self) -> AnisotropyModel:
        mc, dim = self.model, self.grid.dim
        try:
            if mc.kind == "isotropic":
                return Isotropic(dim)
            if mc.kind == "fourfold":
                return FourFold(mc.alpha, dim)
            if dim != 2 and mc.kind in ("kfold", "riemannian"):
                raise ConfigurationError(f"{mc.kind} anisotropy is 2D only")
            if mc.kind == "kfold":
                return KFold(mc.alpha, mc.k)
            if mc.kind == "riemannian":
                return Riemannian(mc.psis, mc.deltas)
            R = np.asarray(mc.R, dtype=float)
            if R.size != dim * dim:
                raise ConfigurationError(f"model.R needs {dim * dim} entries for dim={dim}")
            return Ellipsoidal(R.reshape(dim, dim))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    def splitting_params(self) -> SplittingParams:
        s = self.splitting
        return SplittingParams(a=s.a, b=s.b, eps=s.eps, M=s.M, use_truncated=s.use_truncated)

    def step_policy(self) -> StepPolicy:
        s = self.step
        return StepPolicy(tau0=s.tau0, c0=s.c0, c1=s.c1, norm_mode=s.norm_mode, rescale_x=s.rescale_x)

    def stop_rule(self) -> StopRule:
        return StopRule(tol=self.stop.tol, max_iter=self.stop.max_iter, norm_mode=self.stop.norm_mode)

    def flow_params(self) -> CahnHilliardParams:
        g = self.gradflow
        return CahnHilliardParams(eps=self.splitting.eps, beta=g.beta, dt=g.dt, a_s=g.a_s,
                                  b_s=g.b_s, tol=g.tol, max_steps=g.max_steps,
                                  use_truncated=g.use_truncated, M=self.splitting.M)


# ---------------------------------------------------------------- text format

def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(float(v)) for v in value)
    return str(value)


def _convert(text: str, default, key: str):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {text!r}") from exc
    return text


def emit(config: ExperimentConfig) -> str:
    lines = []
    for sec in dataclasses.fields(config):
        section = getattr(config, sec.name)
        for f in dataclasses.fields(section):
            lines.append(f"{sec.name}.{f.name} = {_format(getattr(section, f.name))}")
    return "\n".join(lines) + "\n"


def parse(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read ``section.key = value`` lines on top of ``base`` (defaults if omitted).

    Blank lines and ``#`` comments are ignored; unknown keys are errors.
    """
    base = base or ExperimentConfig()
    updates: dict[str, dict] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'section.key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.count(".") != 1:
            raise ConfigurationError(f"line {lineno}: key {key!r} is not of the form section.key")
        sec_name, name = key.split(".")
        if not hasattr(base, sec_name) or sec_name.startswith("_"):
            raise ConfigurationError(f"line {lineno}: unknown section {sec_name!r}")
        section = getattr(base, sec_name)
        known = {f.name for f in dataclasses.fields(section)}
        if name not in known:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        updates.setdefault(sec_name, {})[name] = _convert(value, getattr(section, name), key)
    sections = {sec: dataclasses.replace(getattr(base, sec), **vals) for sec, vals in updates.items()}
    return dataclasses.replace(base, **sections)


def load(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse(fh.read())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc


def with_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    return dataclasses.replace(config, init=dataclasses.replace(config.init, seed=int(seed)))


def with_output(config: ExperimentConfig, directory: str) -> ExperimentConfig:
    return dataclasses.replace(config, output=dataclasses.replace(config.output, directory=str(directory)))
