"""Pipeline configuration: TOML sections per stage, validated into dataclasses."""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field

from .errors import ConfigError
from .expr import compile_expression
from .metrics import CATALOG

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PROBES = ("holder", "catenoid", "boundary-quotient", "second-difference")
GEODESIC_KINDS = ("vertical", "horizontal")


@dataclass(frozen=True)
class ManifoldSection:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GeodesicSection:
    kind: str = "vertical"
    point: tuple = (0.0, 0.0, 0.0)
    theta: float = 0.0


@dataclass(frozen=True)
class FermiSection:
    eps: float | None = None
    resolution: int = 17
    steps: int = 24


@dataclass(frozen=True)
class SolveSection:
    grid: int = 65
    boundary: str = "0"
    extent: float = 0.9
    tol: float = 1e-10
    max_iter: int = 40


@dataclass(frozen=True)
class VerifySection:
    isometry_tol: float = 1e-8
    isometry_samples: int = 200
    c1: float = 1e-8
    u22: float = 1e-4
    residual_factor: float = 10.0
    full_square: bool = True
    glue_factor: float = 5.0
    min_order: float = 1.8


@dataclass(frozen=True)
class ProbeSection:
    enabled: tuple = ()
    taus: tuple = (0.1, 0.25, 0.5, 0.75, 0.9)
    pair_budget: int = 3000
    catenoid_grid: int = 128


@dataclass(frozen=True)
class PipelineConfig:
    manifold: ManifoldSection
    geodesic: GeodesicSection
    fermi: FermiSection
    solve: SolveSection
    verify: VerifySection
    probes: ProbeSection
    output: str = "out"
    seed: int = 0
    sha256: str = ""


def _section(raw, name, cls, fields_spec):
    data = raw.get(name, {})
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table", field=name)
    unknown = set(data) - set(fields_spec)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {name}.{key}", field=f"{name}.{key}")
    kwargs = {}
    for key, conv in fields_spec.items():
        if key in data:
            try:
                kwargs[key] = conv(data[key])
            except (TypeError, ValueError, ConfigError) as exc:
                raise ConfigError(f"{name}.{key}: {exc}", field=f"{name}.{key}") from None
    return cls(**kwargs)


def _positive(conv):
    def check(v):
        x = conv(v)
        if not x > 0:
            raise ValueError(f"must be positive, got {v!r}")
        return x
    return check


def _triple(v):
    t = tuple(float(x) for x in v)
    if len(t) != 3:
        raise ValueError("expected three numbers")
    return t


def _flag(v):
    if not isinstance(v, bool):
        raise ValueError("expected true or false")
    return v


def parse_config(text, sha256=""):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None

    top_unknown = set(raw) - {"manifold", "geodesic", "fermi", "solve", "verify", "probes", "output"}
    if top_unknown:
        key = sorted(top_unknown)[0]
        raise ConfigError(f"unknown section [{key}]", field=key)

    man = raw.get("manifold")
    if not isinstance(man, dict) or "name" not in man:
        raise ConfigError("manifold.name is required", field="manifold.name")
    if man["name"] not in CATALOG:
        raise ConfigError(f"unknown manifold {man['name']!r}", field="manifold.name")
    params = man.get("params", {})
    if not isinstance(params, dict) or not all(isinstance(v, (int, float)) for v in params.values()):
        raise ConfigError("manifold.params must map names to numbers", field="manifold.params")
    extra = set(man) - {"name", "params"}
    if extra:
        raise ConfigError(f"unknown key manifold.{sorted(extra)[0]}", field=f"manifold.{sorted(extra)[0]}")
    manifold = ManifoldSection(man["name"], {k: float(v) for k, v in params.items()})

    def kind(v):
        if v not in GEODESIC_KINDS:
            raise ValueError(f"expected one of {GEODESIC_KINDS}")
        return v

    geodesic = _section(raw, "geodesic", GeodesicSection, {"kind": kind, "point": _triple, "theta": float})

    def resolution(v):
        n = int(v)
        if n < 17:
            raise ValueError("resolution must be at least 17")
        return n

    fermi = _section(
        raw, "fermi", FermiSection,
        {"eps": _positive(float), "resolution": resolution, "steps": _positive(int)},
    )

    def grid(v):
        n = int(v)
        if n < 17 or (n - 1) % 4:
            raise ValueError("grid must be at least 17 with grid - 1 divisible by 4")
        return n

    def extent(v):
        x = float(v)
        if not 0 < x < 1:
            raise ValueError("extent must lie in (0, 1)")
        return x

    def boundary(v):
        compile_expression(v, ("x1", "x2", "eps", "L"))
        return str(v)

    solve = _section(
        raw, "solve", SolveSection,
        {"grid": grid, "boundary": boundary, "extent": extent, "tol": _positive(float), "max_iter": _positive(int)},
    )
    verify = _section(
        raw, "verify", VerifySection,
        {
            "isometry_tol": _positive(float),
            "isometry_samples": _positive(int),
            "c1": _positive(float),
            "u22": _positive(float),
            "residual_factor": _positive(float),
            "full_square": _flag,
            "glue_factor": _positive(float),
            "min_order": _positive(float),
        },
    )

    def enabled(v):
        items = tuple(str(x) for x in v)
        bad = [x for x in items if x not in PROBES]
        if bad:
            raise ValueError(f"unknown probe {bad[0]!r}; expected some of {PROBES}")
        return items

    def taus(v):
        t = tuple(float(x) for x in v)
        if not t or not all(0 < x < 1 for x in t):
            raise ValueError("taus must lie in (0, 1)")
        return t

    def cat_grid(v):
        n = int(v)
        if n < 8:
            raise ValueError("catenoid_grid must be at least 8")
        return n

    probes = _section(
        raw, "probes", ProbeSection,
        {"enabled": enabled, "taus": taus, "pair_budget": _positive(int), "catenoid_grid": cat_grid},
    )
    out = raw.get("output", {})
    if not isinstance(out, dict) or set(out) - {"directory", "seed"}:
        raise ConfigError("output accepts only 'directory' and 'seed'", field="output")
    return PipelineConfig(
        manifold, geodesic, fermi, solve, verify, probes,
        output=str(out.get("directory", "out")), seed=int(out.get("seed", 0)), sha256=sha256,
    )


def load_config(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise ConfigError("config must be UTF-8 text") from None
    return parse_config(text, hashlib.sha256(data).hexdigest())
