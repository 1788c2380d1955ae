"""Experiment configuration files (YAML).

Complex matrices are written row-major with each entry either a real number
or an ``[re, im]`` pair, e.g. ``b: [[[1, 0]]]`` or ``S: [[0.1]]``.

Example::

    domain: {n: 1, b: [[1]], Nx: 64, Ny: 8, Nt: 63, y_invariant: true}
    boundary:
      t0: {kind: cosine_x, amplitudes: [0.01], shift: 0.0}
      t1: {kind: cosine_x, amplitudes: [0.01], shift: 0.25}
    convexity: {S: [[0]], mu: 0.8, delta: 0.5, p: [4]}
    solver: {epsilon: 0.05}
    sweep: {epsilons: [0.2, 0.1, 0.05]}
    output: {directory: out, formats: [csv]}
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .solver import Boundary, SolverConfig
from .torus import ConstantSection, PotentialKind, TorusDomain, sample_potential

__all__ = ["ExperimentConfig", "PotentialSpec", "load_config", "parse_config", "parse_complex_matrix"]

_FORMATS = {"csv", "binary"}


def parse_complex_matrix(raw, n: int, name: str) -> np.ndarray:
    """Parse a row-major matrix whose entries are reals or ``[re, im]`` pairs."""
    try:
        rows = list(raw)
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ConfigError(f"{name} must be {n}x{n}")
        out = np.zeros((n, n), dtype=complex)
        for i, row in enumerate(rows):
            for j, e in enumerate(row):
                if isinstance(e, (list, tuple)):
                    if len(e) != 2:
                        raise ConfigError(f"{name}[{i}][{j}] must be [re, im]")
                    out[i, j] = complex(float(e[0]), float(e[1]))
                else:
                    out[i, j] = float(e)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse {name}: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise ConfigError(f"{name} has non-finite entries")
    return out


@dataclass(frozen=True)
class PotentialSpec:
    kind: str = "cosine_x"
    amplitudes: tuple = (0.0,)
    shift: float = 0.0

    def sample(self, domain: TorusDomain) -> np.ndarray:
        return sample_potential(self.kind, self.amplitudes, domain, self.shift).values[0]


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    domain: TorusDomain
    t0: PotentialSpec
    t1: PotentialSpec
    S: ConstantSection
    mu: float | None
    delta: float
    p_list: tuple
    solver: SolverConfig
    epsilons: tuple
    out_dir: Path
    formats: tuple
    seed: int = 0
    source: Path | None = field(default=None)

    def boundary(self) -> Boundary:
        return Boundary(self.t0.sample(self.domain), self.t1.sample(self.domain))


def _block(data, key, required=True):
    blk = data.get(key)
    if blk is None:
        if required:
            raise ConfigError(f"missing '{key}' block")
        return {}
    if not isinstance(blk, dict):
        raise ConfigError(f"'{key}' must be a mapping")
    return blk


def _unknown(blk, allowed, name):
    extra = set(blk) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in '{name}': {sorted(extra)}")


def _potential(raw, name) -> PotentialSpec:
    if not isinstance(raw, dict):
        raise ConfigError(f"boundary.{name} must be a mapping")
    _unknown(raw, {"kind", "amplitudes", "shift"}, f"boundary.{name}")
    kind = raw.get("kind", "cosine_x")
    try:
        PotentialKind(kind)
    except ValueError:
        raise ConfigError(f"boundary.{name}.kind '{kind}' is not one of {[k.value for k in PotentialKind]}")
    amps = raw.get("amplitudes", [0.0])
    if not isinstance(amps, (list, tuple)):
        amps = [amps]
    try:
        amps = tuple(float(a) for a in amps)
        shift = float(raw.get("shift", 0.0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"boundary.{name}: {exc}") from exc
    if not all(np.isfinite(amps)) or not np.isfinite(shift):
        raise ConfigError(f"boundary.{name} has non-finite values")
    return PotentialSpec(kind, amps, shift)


def parse_config(data: dict, base: Path | None = None) -> ExperimentConfig:
    """Validate a parsed YAML mapping and build typed values."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    _unknown(data, {"domain", "boundary", "convexity", "solver", "sweep", "output", "seed"}, "top level")

    d = _block(data, "domain")
    _unknown(d, {"n", "b", "Nx", "Ny", "Nt", "y_invariant"}, "domain")
    try:
        n = int(d.get("n", 1))
        b = parse_complex_matrix(d.get("b", np.eye(n).tolist()), n, "domain.b")
        domain = TorusDomain(
            n=n,
            metric_b=b,
            Nx=int(d.get("Nx", 32)),
            Ny=int(d.get("Ny", 32)),
            Nt=int(d.get("Nt", 31)),
            y_invariant=bool(d.get("y_invariant", False)),
        )
    except ValueError as exc:
        raise ConfigError(f"domain: {exc}") from exc

    bd = _block(data, "boundary", required=False)
    _unknown(bd, {"t0", "t1"}, "boundary")
    t0 = _potential(bd.get("t0", {}), "t0")
    t1 = _potential(bd.get("t1", {}), "t1")
    for pot, name in ((t0, "t0"), (t1, "t1")):
        if pot.kind == "cosine_y" and domain.y_invariant:
            raise ConfigError(f"boundary.{name}: cosine_y needs y-directions")
        if pot.kind == "cosine_mix" and len(pot.amplitudes) > 3:
            raise ConfigError(f"boundary.{name}: cosine_mix takes at most 3 amplitudes")

    cv = _block(data, "convexity", required=False)
    _unknown(cv, {"S", "mu", "delta", "p"}, "convexity")
    S = parse_complex_matrix(cv.get("S", np.zeros((n, n)).tolist()), n, "convexity.S")
    if not np.array_equal(S, S.T):
        raise ConfigError("convexity.S must be symmetric")
    mu = cv.get("mu")
    mu = None if mu is None else float(mu)
    delta = float(cv.get("delta", 0.0))
    if delta < 0:
        raise ConfigError("convexity.delta must be >= 0")
    p_raw = cv.get("p", [4])
    p_list = tuple(int(p) for p in (p_raw if isinstance(p_raw, (list, tuple)) else [p_raw]))
    if not p_list or any(p < 1 for p in p_list):
        raise ConfigError("convexity.p must be a nonempty list of positive integers")

    sv = _block(data, "solver", required=False)
    names = {f.name for f in fields(SolverConfig)}
    _unknown(sv, names, "solver")
    try:
        solver = SolverConfig(**{k: (int(v) if k in ("max_newton", "max_halvings") else float(v)) for k, v in sv.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from exc

    sw = _block(data, "sweep", required=False)
    _unknown(sw, {"epsilons"}, "sweep")
    eps = tuple(float(e) for e in sw.get("epsilons", [solver.epsilon]))
    if not eps or any(e <= 0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
        raise ConfigError("sweep.epsilons must be positive and strictly descending")

    out = _block(data, "output", required=False)
    _unknown(out, {"directory", "formats"}, "output")
    out_dir = Path(out.get("directory", "out"))
    if base is not None and not out_dir.is_absolute():
        out_dir = base / out_dir
    formats = tuple(out.get("formats", ["csv"]))
    if not formats or not set(formats) <= _FORMATS:
        raise ConfigError(f"output.formats must be a subset of {sorted(_FORMATS)}")

    try:
        seed = int(data.get("seed", 0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seed: {exc}") from exc

    return ExperimentConfig(
        domain=domain,
        t0=t0,
        t1=t1,
        S=ConstantSection(S),
        mu=mu,
        delta=delta,
        p_list=p_list,
        solver=solver,
        epsilons=eps,
        out_dir=out_dir,
        formats=formats,
        seed=seed,
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a YAML configuration file.

    Relative output directories resolve against the working directory.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    cfg = parse_config(data)
    object.__setattr__(cfg, "source", path)
    return cfg
