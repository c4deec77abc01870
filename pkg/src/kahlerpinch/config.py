"""JSON run configuration: domains, metric specs and sample regions."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import zoo
from .combiner import _clean
from .curvature import OptimizerConfig
from .domains import (Domain, DomainError, SampleSet, decode_complex_vector, domain_from_dict, sample_collar,
                      sample_compact, sample_global)
from .jets import MetricField


class ConfigError(ValueError):
    pass


def metric_from_dict(spec: dict, domain: Domain | None = None) -> MetricField:
    """Build a metric field from ``{"kind": ..., parameters}``.

    Kinds: ``euclidean``, ``ball_bergman``, ``disc_bergman``, ``polydisc_bergman``,
    ``quartic``, ``scale``, ``sum``, ``bump``, ``reinhardt_bergman``.
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"metric spec needs a 'kind': {spec!r}")
    kind = spec["kind"]
    try:
        if kind == "euclidean":
            return zoo.euclidean(int(spec["n"]))
        if kind == "ball_bergman":
            center = decode_complex_vector(spec["center"]) if "center" in spec else None
            return zoo.ball_bergman(float(spec.get("R", 1.0)), int(spec["n"]), center)
        if kind == "disc_bergman":
            return zoo.ball_bergman(float(spec.get("R", 1.0)), 1)
        if kind == "polydisc_bergman":
            center = decode_complex_vector(spec["center"]) if "center" in spec else None
            return zoo.polydisc_bergman(spec["radii"], center)
        if kind == "quartic":
            return zoo.quartic_potential(int(spec["n"]), float(spec.get("a", 0.5)))
        if kind == "scale":
            return zoo.scale(float(spec["lambda"]), metric_from_dict(spec["base"], domain))
        if kind == "sum":
            terms = spec["terms"]
            if len(terms) != 2:
                raise ConfigError("a sum metric takes exactly two terms")
            return zoo.metric_sum(metric_from_dict(terms[0], domain), metric_from_dict(terms[1], domain))
        if kind == "bump":
            base = metric_from_dict(spec["base"], domain)
            return zoo.bump_perturbation(base, float(spec["epsilon"]), decode_complex_vector(spec["center"]),
                                         float(spec["radius"]), domain=domain)
        if kind == "reinhardt_bergman":
            if domain is None:
                raise ConfigError("reinhardt_bergman needs a domain")
            return zoo.reinhardt_bergman(domain, int(spec.get("N", 20)), float(spec.get("tol", 1e-8)))
    except KeyError as exc:
        raise ConfigError(f"metric kind {kind!r} is missing parameter {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad parameters for metric {kind!r}: {exc}") from exc
    raise ConfigError(f"unknown metric kind {kind!r}")


@dataclass
class RegionSpec:
    kind: str = "global"
    density: int = 64
    delta: float | None = None
    delta_out: float | None = None
    delta_in: float | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RegionSpec":
        kind = d.get("kind", "global")
        if kind not in ("global", "compact", "collar"):
            raise ConfigError(f"unknown region kind {kind!r}")
        r = cls(kind, int(d.get("density", 64)), d.get("delta"), d.get("delta_out"), d.get("delta_in"))
        if r.density <= 0:
            raise ConfigError("region density must be positive")
        if kind == "compact" and r.delta is None:
            raise ConfigError("compact region needs 'delta'")
        if kind == "collar" and (r.delta_out is None or r.delta_in is None):
            raise ConfigError("collar region needs 'delta_out' and 'delta_in'")
        return r

    def sample(self, domain: Domain, seed: int) -> SampleSet:
        if self.kind == "compact":
            return sample_compact(domain, float(self.delta), self.density, seed)
        if self.kind == "collar":
            return sample_collar(domain, float(self.delta_out), float(self.delta_in), self.density, seed)
        return sample_global(domain, self.density, seed)


@dataclass
class RunConfig:
    """Parsed configuration; ``raw`` is echoed into every output."""

    raw: dict
    seed: int = 0
    domain: Domain | None = None
    metrics: dict = field(default_factory=dict)
    region: RegionSpec = field(default_factory=RegionSpec)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    tol_curv: float = 1e-6

    def metric(self, name: str) -> MetricField:
        if name not in self.metrics:
            raise ConfigError(f"config defines no metric {name!r}")
        return self.metrics[name]

    def echo(self) -> dict:
        return {**self.raw, "seed": self.seed}


def load_config(path: str | Path | None, seed: int | None = None, defaults: dict | None = None) -> RunConfig:
    """Read and validate a JSON config; every error surfaces as :class:`ConfigError`."""
    raw = dict(defaults or {})
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON config: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        raw.update(data)
    return parse_config(raw, seed)


def parse_config(raw: dict, seed: int | None = None) -> RunConfig:
    raw = dict(raw)
    if seed is not None:
        raw["seed"] = int(seed)
    try:
        s = int(raw.get("seed", 0))
        dom = domain_from_dict(raw["domain"]) if "domain" in raw else None
        metrics = {k: metric_from_dict(v, dom) for k, v in sorted(raw.get("metrics", {}).items())}
        region = RegionSpec.from_dict(raw.get("region", {}))
        opt = OptimizerConfig(**{**raw.get("optimizer", {}), "seed": s})
        tol = float(raw.get("tolerances", {}).get("tol_curv", 1e-6))
    except ConfigError:
        raise
    except (DomainError, zoo.ZooError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    return RunConfig(raw, s, dom, metrics, region, opt, tol)


def dump_json(obj) -> str:
    """Stable JSON text (sorted keys, no NaN)."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def complex_pairs(z) -> list:
    return [[float(c.real), float(c.imag)] for c in np.asarray(z, dtype=complex)]
