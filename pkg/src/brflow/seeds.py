"""Curated initial data per class and sub-case with their expected end behavior."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from . import catalog as cat
from .analysis import AnalysisReport, analyze, classify_basin_a9i
from .integrator import IntegratorOptions, Trajectory, integrate

IMMORTAL_HORIZON = 1e6


@dataclass(frozen=True)
class Expectation:
    """Expected outcome; ``None`` fields carry no claim.

    ``fates`` and ``curvature`` use the tokens of
    :attr:`brflow.analysis.CoefficientFate.token` and snapped exponents such
    as ``"-1/3"``.
    """

    label: str
    fates: Optional[tuple[str, ...]] = None
    curvature: Optional[tuple[str, ...]] = None
    limit: Optional[str] = None
    basin: Optional[str] = None


@dataclass(frozen=True)
class Seed:
    id: str
    class_name: str
    lambdas: Optional[tuple[float, ...]]
    params: dict
    case: str
    expected: Expectation
    note: str = ""
    basin_budget: Optional[float] = None

    @property
    def family(self) -> str:
        return cat.ClassId(self.class_name).family

    def resolve(self) -> cat.Resolved:
        return cat.resolve_class(self.class_name, self.lambdas, cat.ClassParams(**self.params))

    def horizon(self) -> float:
        return default_horizon(self.resolve())

    def run(self, opts: IntegratorOptions | None = None) -> Trajectory:
        r = self.resolve()
        return integrate(r.id, r.init, r.params, opts, horizon=self.horizon())

    def analyze(self, opts: IntegratorOptions | None = None) -> tuple[Trajectory, AnalysisReport]:
        return run_and_analyze(self.resolve(), opts, basin_budget=self.basin_budget)


def default_horizon(r: cat.Resolved) -> float:
    """Twice the exact singular time when one is known, otherwise a long run
    (``IMMORTAL_HORIZON`` times the largest initial coefficient)."""
    t0 = cat.t0_exact_eval(r.id, r.init, r.params)
    if t0 is not None:
        return 2.0 * t0
    lam = cat.initial_metric(r.id, r.init, r.params)
    return IMMORTAL_HORIZON * max(lam)


def run_and_analyze(
    r: cat.Resolved,
    opts: IntegratorOptions | None = None,
    horizon: float | None = None,
    basin_budget: float | None = None,
) -> tuple[Trajectory, AnalysisReport]:
    """Integrate resolved data and run the analysis pipeline; A9i runs also
    get a basin decision."""
    traj = integrate(r.id, r.init, r.params, opts, horizon=horizon if horizon is not None else default_horizon(r))
    basin = classify_basin_a9i(r.init, opts, basin_budget) if r.id is cat.ClassId.A9i else None
    return traj, analyze(traj, r.init, basin)


def _seed_from_dict(d: dict) -> Seed:
    e = d["expected"]
    exp = Expectation(
        label=e["label"],
        fates=None if e.get("fates") is None else tuple(e["fates"]),
        curvature=None if e.get("curvature") is None else tuple(e["curvature"]),
        limit=e.get("limit"),
        basin=e.get("basin"),
    )
    lam = d.get("lambdas")
    return Seed(
        id=d["id"],
        class_name=d["class"],
        lambdas=None if lam is None else tuple(float(x) for x in lam),
        params={k: float(v) for k, v in d.get("params", {}).items()},
        case=d.get("case", ""),
        expected=exp,
        note=d.get("note", ""),
        basin_budget=d.get("basin_budget"),
    )


def load_seeds(path=None) -> list[Seed]:
    """Seeds shipped with the package, or read from ``path``."""
    if path is None:
        text = resources.files("brflow").joinpath("data").joinpath("seeds.json").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    doc = json.loads(text)
    seeds = [_seed_from_dict(d) for d in doc["seeds"]]
    ids = [s.id for s in seeds]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate seed ids")
    for s in seeds:
        if s.lambdas is not None and any(not (x > 0.0 and math.isfinite(x)) for x in s.lambdas):
            raise ValueError(f"seed {s.id}: lambdas must be positive")
    return seeds


def seeds_for(class_name: str, seeds: list[Seed] | None = None) -> list[Seed]:
    return [s for s in (seeds if seeds is not None else load_seeds()) if s.class_name == class_name]
