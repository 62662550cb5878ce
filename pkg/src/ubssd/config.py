"""Key-value experiment configuration.

One ``key = value`` pair per line; ``#`` starts a comment. Lists are
comma separated. Example::

    database = letters
    d = 2
    M = 2
    Dx = 2*Ds
    L = 1, 5, 10
    T = logspace(1000, 75000, 10)
    seeds = 10
    master_seed = 0
    methods = lpa, tcc
    out = runs/letters
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import ModelDims
from .datagen import KINDS, SourceSpec
from .pipelines import METHODS

_DX_RULES = [
    (re.compile(r"^(\d+)$"), lambda m, Ds: int(m[1])),
    (re.compile(r"^(\d+)\s*\*\s*Ds$"), lambda m, Ds: int(m[1]) * Ds),
    (re.compile(r"^Ds\s*\*\s*(\d+)$"), lambda m, Ds: int(m[1]) * Ds),
    (re.compile(r"^Ds\s*\+\s*(\d+)$"), lambda m, Ds: Ds + int(m[1])),
]
_LOGSPACE = re.compile(r"^logspace\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)$")


class ConfigError(ValueError):
    pass


def eval_dx_rule(rule: str, D_s: int) -> int:
    rule = rule.strip()
    for pattern, fn in _DX_RULES:
        m = pattern.match(rule)
        if m:
            return fn(m, D_s)
    raise ConfigError(f"cannot parse D_x rule {rule!r}; use e.g. '2*Ds', 'Ds+4' or '36'")


def parse_int_list(text: str) -> list[int]:
    """Comma list of integers, or ``logspace(a, b, n)`` rounded to integers."""
    text = text.strip()
    m = _LOGSPACE.match(text)
    if m:
        a, b, n = int(m[1]), int(m[2]), int(m[3])
        vals = np.round(np.logspace(np.log10(a), np.log10(b), n)).astype(int)
        return sorted(set(int(v) for v in vals))
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}") from exc


def _str_list(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def parse_methods(text) -> tuple:
    items = _str_list(text) if isinstance(text, str) else tuple(text)
    methods = tuple(m.upper() for m in items)
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
    return tuple(m for m in METHODS if m in methods)


@dataclass(frozen=True)
class ExperimentConfig:
    database: str
    d: int
    M: int
    dx_rule: str = "2*Ds"
    L_list: tuple = (1,)
    T_list: tuple = (10_000,)
    seeds: int = 10
    master_seed: int = 0
    methods: tuple = ("LPA",)
    out: str = "runs"
    geometries: tuple = ()
    images: tuple = ()
    audio: tuple = ()
    audio_offset: int = 0
    restarts: int = 5

    def __post_init__(self):
        if self.database not in KINDS:
            raise ConfigError(f"database must be one of {KINDS}")
        if list(self.T_list) != sorted(set(self.T_list)) or not self.T_list:
            raise ConfigError(f"T list must be strictly ascending: {self.T_list}")
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        if any(L < 0 for L in self.L_list) or not self.L_list:
            raise ConfigError("L list must be non-empty and non-negative")
        eval_dx_rule(self.dx_rule, self.D_s)
        self.source_spec()

    @property
    def D_s(self) -> int:
        return self.d * self.M

    @property
    def D_x(self) -> int:
        return eval_dx_rule(self.dx_rule, self.D_s)

    def dims(self, T: int, L: int) -> ModelDims:
        return ModelDims(self.d, self.M, self.D_x, L, T)

    def source_spec(self) -> SourceSpec:
        return SourceSpec(self.database, self.M, self.d, seed=self.master_seed,
                          geometries=self.geometries, images=self.images, audio=self.audio,
                          audio_offset=self.audio_offset)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "methods" in kw:
            kw["methods"] = parse_methods(kw["methods"])
        return replace(self, **kw)

    def echo(self) -> dict:
        return {
            "database": self.database, "d": self.d, "M": self.M, "Dx": self.dx_rule,
            "D_x": self.D_x, "L": list(self.L_list), "T": list(self.T_list),
            "seeds": self.seeds, "master_seed": self.master_seed,
            "methods": list(self.methods), "restarts": self.restarts,
            "geometries": list(self.geometries), "images": list(self.images),
            "audio": list(self.audio), "audio_offset": self.audio_offset,
        }


_KEYS = {
    "database": ("database", str),
    "d": ("d", int),
    "m": ("M", int),
    "dx": ("dx_rule", str),
    "l": ("L_list", lambda v: tuple(parse_int_list(v))),
    "t": ("T_list", lambda v: tuple(parse_int_list(v))),
    "seeds": ("seeds", int),
    "master_seed": ("master_seed", int),
    "methods": ("methods", parse_methods),
    "out": ("out", str),
    "geometries": ("geometries", _str_list),
    "images": ("images", _str_list),
    "audio": ("audio", _str_list),
    "audio_offset": ("audio_offset", int),
    "restarts": ("restarts", int),
}

_DEFAULT_DIMS = {"geom3d": (3, 6), "letters": (2, 2), "image_density": (2, 10), "audio": (2, 2)}


def parse_config(text: str, base_dir=None) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key.lower() not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        name, conv = _KEYS[key.lower()]
        try:
            values[name] = conv(value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    if "database" not in values:
        raise ConfigError("config needs a 'database' key")
    d, M = _DEFAULT_DIMS.get(values["database"], (None, None))
    values.setdefault("d", d)
    values.setdefault("M", M)
    if base_dir is not None:
        for k in ("images", "audio"):
            if k in values:
                values[k] = tuple(str((Path(base_dir) / p)) if not Path(p).is_absolute() else p
                                  for p in values[k])
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)
