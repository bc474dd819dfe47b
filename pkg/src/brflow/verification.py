"""Randomized cross-check suites run by ``brflow verify``.

Each suite draws data from a fixed RNG (``BRFLOW_SEED`` overrides the default
seed), checks one relation per class and records the worst residual seen.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from . import catalog as cat
from .analysis import estimate_t0
from .catalog import ClassId, ClassParams, InitialData
from .errors import BrflowError
from .integrator import IntegratorOptions, Termination, integrate
from .lie_curvature import ricci

DEFAULT_SEED = 0xB1A2C41
SUITES = ("oracle", "curvature", "closed-form", "conserved", "t0", "implicit")

ORACLE_SAMPLES = 100
CURVATURE_SAMPLES = 20
T0_SAMPLES = 10
CONSERVED_SAMPLES = 5
IMPLICIT_TIMES = 50
TRACK_TIMES = 200

RHS_TOL = 1e-10
OFF_DIAGONAL_TOL = 1e-12
CURVATURE_TOL = 1e-10
TRACK_TOL = 1e-7
CONSERVED_TOL = 1e-8
T0_TOL = 1e-4
IMPLICIT_TOL = 1e-10

IMMORTAL_SPAN = 10.0
# a singular run is capped at this multiple of the initial coefficient scale;
# every finite singular time in the catalog is well inside it
SINGULAR_HORIZON = 1e4

_LIE = tuple(c for c in ClassId if c.is_lie_group)
_B = tuple(c for c in ClassId if not c.is_lie_group)


def default_seed() -> int:
    """``BRFLOW_SEED`` (decimal or ``0x`` hex) or the built-in seed."""
    raw = os.environ.get("BRFLOW_SEED")
    return DEFAULT_SEED if raw is None or not raw.strip() else int(raw.strip(), 0)


@dataclass
class ClassResult:
    class_id: str
    max_residual: float
    tolerance: float
    n_cases: int
    detail: str = ""
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and self.max_residual <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "class": self.class_id,
            "passed": self.passed,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "n_cases": self.n_cases,
            "detail": self.detail,
            "error": self.error,
        }


@dataclass
class SuiteReport:
    suite: str
    seed: int
    results: list[ClassResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def max_residual(self) -> float:
        return max((r.max_residual for r in self.results), default=0.0)

    def lines(self) -> list[str]:
        out = []
        for r in self.results:
            status = "PASS" if r.passed else "FAIL"
            msg = f"[{self.suite}] {r.class_id:<12} {status}  max residual {r.max_residual:.3e} (tol {r.tolerance:.0e}, n={r.n_cases})"
            if r.detail:
                msg += f"  {r.detail}"
            if r.error:
                msg += f"  error: {r.error}"
            out.append(msg)
        return out

    def to_dict(self) -> dict:
        return {"suite": self.suite, "seed": self.seed, "passed": self.passed, "results": [r.to_dict() for r in self.results]}


# ---------------------------------------------------------------------------
# Random data
# ---------------------------------------------------------------------------

def project_to_invariant_set(cid: ClassId, params: ClassParams, g: np.ndarray) -> np.ndarray:
    """Impose the equalities under which the class's flow stays diagonal."""
    g = np.array(g, dtype=float)
    if cid is ClassId.A7ii:
        g[1] = (1.0 - params.alpha**2) * g[2]
    elif cid is ClassId.A9ii:
        g[1] = g[0]
    elif cid is ClassId.A10i:
        g[1] = g[2] = g[0]
    elif cid is ClassId.A10ii_ABgtC:
        g[1] = g[0]
    elif cid is ClassId.A10ii_AgtBC:
        g[2] = g[1]
    return g


def random_params(cid: ClassId, rng: np.random.Generator) -> ClassParams:
    spec = cat.get_spec(cid)
    draw = {
        "k": lambda: float(rng.uniform(0.2, 2.0)),
        "alpha": lambda: float(rng.uniform(-0.8, 0.8)),
        "a3": lambda: float(rng.uniform(0.3, 2.0)),
        "r1": lambda: float(rng.uniform(0.5, 2.0)),
    }
    values = {name: draw[name]() for name in spec.param_names if name != "r2"}
    if "r2" in spec.param_names:
        r2 = float(rng.uniform(0.5, 2.0))
        while abs(r2 - values["r1"]) < 0.05:
            r2 = float(rng.uniform(0.5, 2.0))
        values["r2"] = r2
    return ClassParams(**values)


def random_metric(cid: ClassId, params: ClassParams, rng: np.random.Generator, lo: float = 1e-2, hi: float = 1e2) -> np.ndarray:
    """Log-uniform coefficients in ``[lo, hi]`` on the class's invariant set."""
    g = np.exp(rng.uniform(math.log(lo), math.log(hi), 4))
    return project_to_invariant_set(cid, params, g)


def random_initial(
    cid: ClassId, params: ClassParams, rng: np.random.Generator, equal_ab: bool = False
) -> Optional[InitialData]:
    """Admissible initial data; ``None`` for classes built from radii.

    ``equal_ab`` forces ``lambda1 = lambda2`` (the A3 closed-form case).
    """
    if not cid.is_lie_group:
        return None
    lam = np.exp(rng.uniform(math.log(0.5), math.log(2.0), 4))
    if cid in (ClassId.A10ii_ABgtC, ClassId.A10ii_AgtBC, ClassId.A10iii):
        top = np.sort(lam[:3])[::-1]
        # keep the strict inequalities away from the equality thresholds
        top[1] = top[0] / (1.2 + rng.uniform(0.0, 0.8)) if cid is not ClassId.A10ii_ABgtC else top[0]
        top[2] = top[1] / (1.2 + rng.uniform(0.0, 0.8)) if cid is not ClassId.A10ii_AgtBC else top[1]
        lam[:3] = top
    else:
        lam = project_to_invariant_set(cid, params, lam)
    if equal_ab:
        lam[1] = lam[0]
    return InitialData(tuple(float(x) for x in lam))


def _singular_horizon(init: Optional[InitialData], params: ClassParams) -> float:
    scale = max(init.lambdas) if init is not None else max(v for v in params.as_dict().values()) ** 2
    return SINGULAR_HORIZON * scale


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

def _guard(cid: ClassId, tol: float, body: Callable[[], tuple[float, int, str]]) -> ClassResult:
    try:
        worst, n, detail = body()
    except (BrflowError, ArithmeticError, ValueError) as exc:
        return ClassResult(cid.value, math.inf, tol, 0, error=f"{type(exc).__name__}: {exc}")
    return ClassResult(cid.value, worst, tol, n, detail)


def suite_oracle(seed: int, n: int = ORACLE_SAMPLES) -> SuiteReport:
    """Hand-coded right-hand sides against twice the oracle Ricci diagonal."""
    report = SuiteReport("oracle", seed)
    for cid in _LIE:
        rng = np.random.default_rng([seed, list(ClassId).index(cid), 1])

        def body(cid=cid, rng=rng):
            params = random_params(cid, rng)
            sc = cat.get_spec(cid).structure_constants(params)
            worst = worst_off = 0.0
            for _ in range(n):
                g = random_metric(cid, params, rng)
                rep = ricci(sc, g)
                oracle = 2.0 * np.diag(rep.ricci)
                table = np.array(cat.rhs_eval(cid, params, g))
                scale = float(np.max(np.abs(oracle)))
                if scale == 0.0:
                    err = float(np.max(np.abs(table)))
                else:
                    err = float(np.max(np.abs(oracle - table))) / scale
                worst = max(worst, err)
                ric_scale = float(np.max(np.abs(rep.ricci)))
                worst_off = max(worst_off, rep.off_diagonal_norm / ric_scale if ric_scale else rep.off_diagonal_norm)
            # both thresholds fold into one residual normalized by its tolerance
            combined = max(worst / RHS_TOL, worst_off / OFF_DIAGONAL_TOL) * RHS_TOL
            return combined, n, f"rhs {worst:.2e}, off-diagonal {worst_off:.2e}"

        report.results.append(_guard(cid, RHS_TOL, body))
    return report


def suite_curvature(seed: int, n: int = CURVATURE_SAMPLES) -> SuiteReport:
    """Symbolic sectional-curvature tables against the oracle."""
    report = SuiteReport("curvature", seed)
    for cid in _LIE:
        rng = np.random.default_rng([seed, list(ClassId).index(cid), 2])

        def body(cid=cid, rng=rng):
            params = random_params(cid, rng)
            sc = cat.get_spec(cid).structure_constants(params)
            worst = 0.0
            for _ in range(n):
                g = random_metric(cid, params, rng)
                oracle = ricci(sc, g).sectional
                table = np.array(cat.curvature_table_eval(cid, params, g))
                scale = float(np.max(np.abs(oracle)))
                err = float(np.max(np.abs(oracle - table))) / scale if scale else float(np.max(np.abs(table)))
                worst = max(worst, err)
            return worst, n, ""

        report.results.append(_guard(cid, CURVATURE_TOL, body))
    return report


def _closed_form_cases(rng: np.random.Generator) -> Iterable[tuple[ClassId, ClassParams, Optional[InitialData]]]:
    for cid in (ClassId.A1, ClassId.A2, ClassId.A3, ClassId.A4, ClassId.A6, ClassId.A7ii, ClassId.A10i, *_B):
        params = cat.get_spec(cid).resolve_params(random_params(cid, rng))
        yield cid, params, random_initial(cid, params, rng, equal_ab=cid is ClassId.A3)


def _track(cid: ClassId, params: ClassParams, init: Optional[InitialData], exact: Callable[[float], np.ndarray]) -> float:
    t0 = cat.t0_exact_eval(cid, init, params)
    end = 0.9 * t0 if t0 is not None else IMMORTAL_SPAN
    traj = integrate(cid, init, params, horizon=end)
    if traj.termination is not Termination.TimeHorizonReached:
        raise ValueError(f"run stopped early ({traj.termination.value}) at t = {traj.t_end}")
    ts = np.linspace(0.0, end, TRACK_TIMES)
    num = traj.sample(ts)
    ref = np.array([exact(t) for t in ts])
    return float(np.max(np.abs(num - ref) / np.abs(ref)))


def suite_closed_form(seed: int) -> SuiteReport:
    """Numeric trajectories against explicit solutions up to ``0.9 T0``."""
    report = SuiteReport("closed-form", seed)
    rng = np.random.default_rng([seed, 3])
    for cid, params, init in _closed_form_cases(rng):
        def body(cid=cid, params=params, init=init):
            err = _track(cid, params, init, lambda t: np.array(list(cat.closed_form_eval(cid, init, params, t))))
            return err, 1, ""

        report.results.append(_guard(cid, TRACK_TOL, body))
    return report


def suite_conserved(seed: int, n: int = CONSERVED_SAMPLES) -> SuiteReport:
    """Relative drift of every catalogued conserved quantity along numeric runs."""
    report = SuiteReport("conserved", seed)
    for cid in _LIE:
        spec = cat.get_spec(cid)
        if not spec.conserved:
            continue
        rng = np.random.default_rng([seed, list(ClassId).index(cid), 4])

        def body(cid=cid, rng=rng):
            worst = 0.0
            names: dict[str, float] = {}
            for _ in range(n):
                params = random_params(cid, rng)
                init = random_initial(cid, params, rng)
                traj = integrate(cid, init, params, horizon=_singular_horizon(init, params))
                for name, d in traj.conserved_drift.items():
                    names[name] = max(names.get(name, 0.0), d)
                    worst = max(worst, d)
            return worst, n, ", ".join(f"{k} {v:.1e}" for k, v in names.items())

        report.results.append(_guard(cid, CONSERVED_TOL, body))
    return report


def _t0_classes() -> tuple[ClassId, ...]:
    return (
        ClassId.A2, ClassId.A3, ClassId.A4, ClassId.A6, ClassId.A7i, ClassId.A7ii, ClassId.A8,
        ClassId.A9ii, ClassId.A10ii_AgtBC, ClassId.B1, ClassId.B3, ClassId.B5, ClassId.B6, ClassId.B8, ClassId.B10,
    )


def suite_t0(seed: int, n: int = T0_SAMPLES) -> SuiteReport:
    """Fitted singular times against the exact formulas."""
    report = SuiteReport("t0", seed)
    for cid in _t0_classes():
        rng = np.random.default_rng([seed, list(ClassId).index(cid), 5])

        def body(cid=cid, rng=rng):
            worst = 0.0
            for _ in range(n):
                params = cat.get_spec(cid).resolve_params(random_params(cid, rng))
                init = random_initial(cid, params, rng, equal_ab=cid is ClassId.A3)
                exact = cat.t0_exact_eval(cid, init, params)
                traj = integrate(cid, init, params, horizon=_singular_horizon(init, params))
                est = estimate_t0(traj)
                worst = max(worst, abs(est.value - exact) / exact)
            return worst, n, ""

        report.results.append(_guard(cid, T0_TOL, body))
    return report


def suite_implicit(seed: int, n_times: int = IMPLICIT_TIMES) -> SuiteReport:
    """Implicit time relations: residual of the inverted relation, and the
    numeric trajectory tracked against the inverted solution."""
    report = SuiteReport("implicit", seed)
    rng = np.random.default_rng([seed, 6])
    for cid in (ClassId.A7i, ClassId.A8, ClassId.A9ii, ClassId.A10ii_ABgtC, ClassId.A10ii_AgtBC):
        params = cat.get_spec(cid).resolve_params(random_params(cid, rng))
        init = random_initial(cid, params, rng)

        def body(cid=cid, params=params, init=init):
            t0 = cat.t0_exact_eval(cid, init, params)
            end = 0.9 * t0 if t0 is not None else IMMORTAL_SPAN
            worst = 0.0
            for t in np.linspace(0.0, end, n_times):
                g = cat.implicit_solve(cid, init, params, float(t))
                worst = max(worst, abs(cat.implicit_residual(cid, init, params, float(t), g)))
            track = _track(cid, params, init, lambda t: np.array(list(cat.implicit_solve(cid, init, params, t))))
            residual = worst if track <= TRACK_TOL else math.inf
            return residual, n_times, f"relation {worst:.2e}, tracking {track:.2e} (tol {TRACK_TOL:.0e})"

        report.results.append(_guard(cid, IMPLICIT_TOL, body))
    return report


_RUNNERS: dict[str, Callable[[int], SuiteReport]] = {
    "oracle": suite_oracle,
    "curvature": suite_curvature,
    "closed-form": suite_closed_form,
    "conserved": suite_conserved,
    "t0": suite_t0,
    "implicit": suite_implicit,
}


def run_suite(name: str, seed: Optional[int] = None) -> SuiteReport:
    if name not in _RUNNERS:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return _RUNNERS[name](default_seed() if seed is None else seed)


def run(scope: str = "all", seed: Optional[int] = None) -> list[SuiteReport]:
    names = SUITES if scope == "all" else (scope,)
    return [run_suite(name, seed) for name in names]
