"""Experiment configuration read from INI-style files.

Every field of :class:`ExperimentConfig` lives in exactly one section; keys
not listed there are rejected so typos never pass silently. Example::

    [model]
    kind = toy_l21
    n = 100
    p = 16
    tau = 1.0
    lam = 1.0

    [sampler]
    kind = block_stmala
    block_size = 4
    gamma = 0.07
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..operators import OperatorKind

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "dump_config"]

MODELS = ("toy_l21", "spike_slab", "ridged", "external_csv")
DESIGNS = ("iid", "correlated")
TRUTHS = ("step", "breiman", "external_csv")
SAMPLERS = ("stmala", "block_stmala", "rjmcmc")


class ConfigError(ValueError):
    pass


def _f(section, default, **kw):
    return field(default=default, metadata={"section": section}, **kw)


@dataclass
class ExperimentConfig:
    # [model]
    model: str = _f("model", "toy_l21")
    n: int = _f("model", 100)
    p: int = _f("model", 16)
    t: int = _f("model", 1)
    tau: float = _f("model", 1.0)
    theta: float = _f("model", 1.0)
    lam: float = _f("model", 1.0)
    omega: float = _f("model", 0.1)
    omega_star: float = _f("model", 0.1)
    a: float = _f("model", 2.0)
    k: float = _f("model", 0.08)
    v: float = _f("model", 1.0)
    slab_constant: bool = _f("model", False)
    y_csv: str = _f("model", "")
    g_csv: str = _f("model", "")
    # [data]
    design: str = _f("data", "iid")
    rho: float = _f("data", 0.0)
    truth: str = _f("data", "step")
    support: int = _f("data", 8)
    x_csv: str = _f("data", "")
    n_test: int = _f("data", 0)
    # [sampler]
    sampler: str = _f("sampler", "block_stmala")
    block_size: int = _f("sampler", 4)
    operator: str = _f("sampler", "stvs")
    gamma: float = _f("sampler", 0.1)
    sigma: Optional[float] = _f("sampler", None)
    truncation: Optional[float] = _f("sampler", None)
    atom_method: str = _f("sampler", "exact")
    sigma_rj: float = _f("sampler", 0.02)
    backend: str = _f("sampler", "auto")
    # [chain]
    n_iter: int = _f("chain", 10_000)
    burn_in: int = _f("chain", 0)
    thin: int = _f("chain", 1)
    seed: int = _f("chain", 0)
    # [run]
    replicates: int = _f("run", 1)
    workers: int = _f("run", 1)
    out: str = _f("run", "out")
    oracle: bool = _f("run", True)
    oracle_mc_samples: int = _f("run", 2000)
    oracle_prune_nats: Optional[float] = _f("run", 40.0)
    save_traces: bool = _f("run", True)

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.model in MODELS, f"model must be one of {MODELS}")
        need(self.design in DESIGNS, f"design must be one of {DESIGNS}")
        need(self.truth in TRUTHS, f"truth must be one of {TRUTHS}")
        need(self.sampler in SAMPLERS, f"sampler must be one of {SAMPLERS}")
        need(self.backend in ("auto", "numba", "numpy"), "backend must be auto, numba or numpy")
        need(self.atom_method in ("exact", "johnson"), "atom_method must be exact or johnson")
        try:
            OperatorKind.parse(self.operator)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.model != "external_csv":
            need(self.n >= 1 and self.p >= 1 and self.t >= 1, "dimensions must be positive")
        need(-1.0 < self.rho < 1.0, "rho must lie in (-1, 1)")
        need(self.tau > 0 and self.theta > 0, "noise parameters must be positive")
        need(self.lam >= 0, "lam must be nonnegative")
        need(0 < self.omega < 1 and 0 < self.omega_star < 1, "prior weights must lie in (0, 1)")
        need(self.a > 0 and self.k > 0 and self.v > 0, "a, k and v must be positive")
        need(self.gamma > 0, "gamma must be positive")
        need(self.sigma is None or self.sigma > 0, "sigma must be positive")
        need(self.truncation is None or self.truncation > 0, "truncation must be positive")
        need(self.sigma_rj > 0, "sigma_rj must be positive")
        need(self.block_size >= 1, "block_size must be positive")
        need(self.n_iter >= 1, "n_iter must be positive")
        need(0 <= self.burn_in < self.n_iter, "burn_in must satisfy 0 <= burn_in < n_iter")
        need(self.thin >= 1, "thin must be positive")
        need(self.seed >= 0, "seed must be nonnegative")
        need(self.replicates >= 1, "replicates must be positive")
        need(self.workers >= 1, "workers must be positive")
        need(self.n_test >= 0, "n_test must be nonnegative")
        need(self.support >= 0, "support must be nonnegative")
        if self.model == "external_csv":
            need(bool(self.y_csv and self.g_csv), "external_csv model needs y_csv and g_csv")
        if self.truth == "external_csv":
            need(bool(self.x_csv), "external_csv truth needs x_csv")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
# section-qualified aliases so both `[model] kind` and `[sampler] kind` work
_ALIASES = {("model", "kind"): "model", ("sampler", "kind"): "sampler"}


def _convert(f, raw: str):
    typ = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    raw = raw.strip()
    optional = "Optional" in typ
    if optional and raw.lower() in ("", "none", "default"):
        return None
    base = typ.replace("Optional[", "").rstrip("]")
    if base == "int":
        return int(raw)
    if base == "float":
        return float(raw)
    if base == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return raw.lower() if f.name in ("model", "design", "truth", "sampler", "operator",
                                     "atom_method", "backend") else raw


def parse_config(text: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    values = {}
    known = {f.metadata["section"] for f in _FIELDS.values()}
    for section in cp.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            name = _ALIASES.get((section, key), key)
            f = _FIELDS.get(name)
            if f is None or f.metadata["section"] != section:
                raise ConfigError(f"unknown key [{section}] {key}")
            try:
                values[name] = _convert(f, raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from None
    start = dataclasses.asdict(base) if base is not None else {}
    start.update(values)
    return ExperimentConfig(**start)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def dump_config(cfg: ExperimentConfig) -> str:
    """Render ``cfg`` back into the file format; ``parse_config`` inverts it."""
    sections: dict[str, list[str]] = {}
    for f in dataclasses.fields(cfg):
        val = getattr(cfg, f.name)
        key = "kind" if f.name in ("model", "sampler") else f.name
        txt = "none" if val is None else (repr(val) if isinstance(val, float) else str(val))
        sections.setdefault(f.metadata["section"], []).append(f"{key} = {txt}")
    return "\n".join(f"[{s}]\n" + "\n".join(lines) + "\n" for s, lines in sections.items())
