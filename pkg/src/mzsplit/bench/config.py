"""Run configuration and the flat ``key = value`` config file format."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from ..krylov import LanczosConfig
from ..propagators import SCHEMES, StepContext


class ConfigError(ValueError):
    """Invalid configuration; reported as a usage error."""


def parse_lanczos(value) -> LanczosConfig | None:
    """``None``/``"auto"`` -> scheme default, ``"adaptive"`` or an iteration count."""
    if value is None or isinstance(value, LanczosConfig):
        return value
    text = str(value).strip().lower()
    if text in ("", "auto", "default"):
        return None
    if text == "adaptive":
        return LanczosConfig(max_iters=30, mode="adaptive")
    try:
        iters = int(text)
    except ValueError:
        raise ConfigError(f"Lanczos setting must be an integer or 'adaptive', got {value!r}") from None
    if iters < 1:
        raise ConfigError("Lanczos iteration count must be positive")
    return LanczosConfig(max_iters=iters)


@dataclass(frozen=True)
class RunConfig:
    """One experiment point.

    When ``sigma`` is set the step count follows from ``h = eps**sigma / sigma_mult``
    (rounded up to a whole number of steps) and ``n_steps`` is ignored.
    ``prune`` additionally applies the sigma policy to the optional exponent
    terms.
    """

    scheme: str = "mz6"
    eps: float = 1e-2
    n_grid: int = 1000
    n_steps: int = 100
    t0: float = 0.0
    t_final: float = 2.5
    gl_nodes: int = 11
    lanczos_w2: str | None = None
    lanczos_w3: str | None = "2"
    sigma: float | None = None
    sigma_mult: float = 1.0
    prune: bool = False
    preset: str = "double_well_chirp"
    snapshots: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {', '.join(SCHEMES)}")
        if not 0 < self.eps <= 1:
            raise ConfigError("eps must lie in (0, 1]")
        if self.n_grid < 4 or self.n_grid % 2:
            raise ConfigError("grid points must be an even number >= 4")
        if self.n_steps < 1:
            raise ConfigError("steps must be at least 1")
        if not self.t_final > self.t0:
            raise ConfigError("t_final must exceed t0")
        if self.gl_nodes < 1:
            raise ConfigError("gl_nodes must be positive")
        if self.sigma is not None and (self.sigma <= 0 or self.sigma_mult <= 0):
            raise ConfigError("sigma and sigma_mult must be positive")
        if self.snapshots < 0:
            raise ConfigError("snapshots must be non-negative")
        parse_lanczos(self.lanczos_w2)
        parse_lanczos(self.lanczos_w3)

    @property
    def steps(self) -> int:
        if self.sigma is None:
            return self.n_steps
        h_target = self.eps**self.sigma / self.sigma_mult
        return max(1, math.ceil((self.t_final - self.t0) / h_target - 1e-9))

    @property
    def h(self) -> float:
        return (self.t_final - self.t0) / self.steps

    def step_context(self) -> StepContext:
        w3 = parse_lanczos(self.lanczos_w3) or LanczosConfig(max_iters=2)
        return StepContext(
            eps=self.eps, h=self.h, scheme=self.scheme, gl_nodes=self.gl_nodes,
            lanczos_w2=parse_lanczos(self.lanczos_w2), lanczos_w3=w3,
            sigma=self.sigma if self.prune else None,
        )

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    def echo(self) -> dict:
        d = asdict(self)
        d["n_steps"] = self.steps
        return d


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}

# keys accepted in config files besides the RunConfig fields; list-valued
# entries drive the sweeps of ``table`` and ``converge``
EXTRA_KEYS = {"out", "cache_dir", "jobs", "verbose", "steps_list", "schemes", "ref_factor"}

# config keys written like the command-line flags
ALIASES = {"grid_points": "n_grid", "steps": "n_steps"}


def _normalise_key(key: str) -> str:
    key = key.strip().lower().replace("-", "_")
    return ALIASES.get(key, key)


def read_config_file(path) -> dict[str, str]:
    """Parse UTF-8 ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = _normalise_key(key)
        if key not in FIELD_TYPES and key not in EXTRA_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key.strip()!r}")
        out[key] = value.strip()
    return out


def _convert(name: str, value):
    if value is None or not isinstance(value, str):
        return value
    kind = str(FIELD_TYPES[name])
    try:
        if name in ("lanczos_w2", "lanczos_w3", "scheme", "preset"):
            return value
        if kind.startswith("int"):
            return int(value)
        if kind.startswith("bool"):
            return value.lower() in ("1", "true", "yes", "on")
        if value.lower() in ("none", ""):
            return None
        return float(value)
    except ValueError:
        raise ConfigError(f"bad value {value!r} for {name}") from None


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """File values first, then non-``None`` command-line overrides."""
    merged: dict = {}
    for src in (file_values or {}, overrides or {}):
        for key, value in src.items():
            if key in FIELD_TYPES and value is not None:
                merged[key] = _convert(key, value)
    return RunConfig(**merged)


def parse_int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"expected a list of integers, got {text!r}") from None


def parse_scheme_list(text) -> list[str]:
    items = text if isinstance(text, (list, tuple)) else str(text).replace(",", " ").split()
    for s in items:
        if s not in SCHEMES:
            raise ConfigError(f"unknown scheme {s!r}")
    return list(items)
