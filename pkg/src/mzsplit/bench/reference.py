"""Fine-step reference solutions with an on-disk cache."""
from __future__ import annotations

import hashlib
import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from ..grid import Wavefunction, l2_error, read_mzwf, write_mzwf
from ..propagators import StepContext, evolve
from .presets import make_problem

log = logging.getLogger(__name__)

REF_FACTOR = 50
REF_GL_NODES = 21
CACHE_VERSION = 1


@dataclass(frozen=True)
class ReferenceSpec:
    preset: str
    eps: float
    n_grid: int
    t_final: float
    n_steps: int
    gl_nodes: int = REF_GL_NODES
    scheme: str = "mz6"
    t0: float = 0.0

    def key(self) -> str:
        payload = json.dumps({"v": CACHE_VERSION, **self.__dict__}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:32]


@dataclass
class Reference:
    u: Wavefunction
    spec: ReferenceSpec
    from_cache: bool = False
    doubling_change: float | None = None


def compute_reference(spec: ReferenceSpec) -> Wavefunction:
    pb = make_problem(spec.preset, spec.eps, spec.n_grid, spec.t_final)
    ctx = StepContext(eps=spec.eps, h=(spec.t_final - spec.t0) / spec.n_steps,
                      scheme=spec.scheme, gl_nodes=spec.gl_nodes)
    return evolve(pb.u0, pb.potential, spec.t0, spec.t_final, spec.n_steps, ctx).u


class ReferenceCache:
    """Directory of ``<key>.mzwf`` files with ``<key>.json`` sidecars holding their SHA-256."""

    def __init__(self, root):
        self.root = Path(root)

    def paths(self, spec: ReferenceSpec) -> tuple[Path, Path]:
        key = spec.key()
        return self.root / f"{key}.mzwf", self.root / f"{key}.json"

    def load(self, spec: ReferenceSpec) -> Reference | None:
        data_path, meta_path = self.paths(spec)
        if not data_path.exists() or not meta_path.exists():
            return None
        try:
            raw = data_path.read_bytes()
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            if hashlib.sha256(raw).hexdigest() != meta.get("sha256"):
                raise ValueError("hash mismatch")
            u, _, _ = read_mzwf(io.BytesIO(raw))
        except (OSError, ValueError, json.JSONDecodeError) as exc:
            log.warning("discarding corrupt reference %s (%s); recomputing", data_path, exc)
            return None
        return Reference(u, spec, True, meta.get("doubling_change"))

    def store(self, ref: Reference) -> Path:
        data_path, meta_path = self.paths(ref.spec)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            buf = io.BytesIO()
            write_mzwf(buf, ref.u, ref.spec.eps, ref.spec.t_final)
            raw = buf.getvalue()
            data_path.write_bytes(raw)
            meta = {"sha256": hashlib.sha256(raw).hexdigest(), "spec": ref.spec.__dict__,
                    "doubling_change": ref.doubling_change}
            meta_path.write_text(json.dumps(meta, indent=1), encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write reference cache {data_path}: {exc}") from exc
        return data_path


def make_reference(preset: str, eps: float, n_grid: int, t_final: float, max_steps: int,
                   cache_dir=None, factor: int = REF_FACTOR, gl_nodes: int = REF_GL_NODES,
                   check_doubling: bool = False, t0: float = 0.0) -> Reference:
    """MZ6 solution with ``factor * max_steps`` steps, cached when ``cache_dir`` is given.

    With ``check_doubling`` a second run at twice the steps is made once per
    cache entry and the L2 change is recorded; a change above 1e-9 is logged.
    """
    spec = ReferenceSpec(preset, float(eps), int(n_grid), float(t_final),
                         int(factor * max_steps), gl_nodes, t0=float(t0))
    cache = ReferenceCache(cache_dir) if cache_dir is not None else None
    if cache is not None:
        hit = cache.load(spec)
        if hit is not None and (hit.doubling_change is not None or not check_doubling):
            return hit
    log.info("computing reference: %d MZ6 steps on %d points", spec.n_steps, spec.n_grid)
    ref = Reference(compute_reference(spec), spec)
    if check_doubling:
        finer = compute_reference(ReferenceSpec(**{**spec.__dict__, "n_steps": 2 * spec.n_steps}))
        ref.doubling_change = float(l2_error(ref.u, Wavefunction(ref.u.grid, finer.values)))
        if ref.doubling_change > 1e-9:
            log.warning("reference changes by %.2e when the step count is doubled",
                        ref.doubling_change)
    if cache is not None:
        cache.store(ref)
    return ref
