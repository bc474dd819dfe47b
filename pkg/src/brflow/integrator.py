"""
Adaptive Dormand-Prince 5(4) integration of the backward flow with
finite-time singularity detection.

The state is integrated in logarithmic coordinates ``u = ln g``.  Every
coefficient stays positive by construction, local error control acts on the
relative error of each coefficient, and power-law collapse ``g ~ (T0 - t)^p``
becomes ``u' = -p / (T0 - t)``, which the step controller resolves uniformly
in ``log(T0 - t)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import catalog as cat
from .errors import MaxStepsExceeded, NonDiagonalFlow, NonFiniteState, WrongParams
from .lie_curvature import PLANE_LABELS, DiagonalMetric, StructureConstants, ricci_matrix, sectional_all

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [np.array(row) for row in [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_HAT = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B_HAT

# Quartic continuous extension (Shampine): u(t + th*h) = u + h * sum_j k_j * sum_m P[j, m] th^(m+1)
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_ORDER = 5


class Termination(str, Enum):
    SingularityDetected = "SingularityDetected"
    TimeHorizonReached = "TimeHorizonReached"
    StepUnderflow = "StepUnderflow"
    MaxSteps = "MaxSteps"
    StopConditionMet = "StopConditionMet"


@dataclass(frozen=True)
class IntegratorOptions:
    """Step control and termination thresholds.

    ``vanish_floor`` and ``blow_up_cap`` bound each coefficient relative to
    its initial value.  ``rate_cap`` bounds the logarithmic rate
    ``|d ln g / dt|`` in units of the initial rate: a coefficient that
    collapses like ``(T0 - t)^(1/3)`` cannot reach ``1e-8`` of its initial
    value in double precision (that needs ``T0 - t ~ 1e-24 T0``), but its
    rate diverges like ``1 / (T0 - t)`` and trips this cap instead.
    ``h_min`` of ``None`` means ``1e-14`` times the problem's time scale.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    h_min: Optional[float] = None
    blow_up_cap: float = 1e8
    vanish_floor: float = 1e-8
    rate_cap: float = 1e8
    max_steps: int = 10_000_000
    dense_output: bool = True
    off_diagonal_tol: float = 1e-10

    def __post_init__(self):
        if not (0.0 < self.vanish_floor < 1.0 < self.blow_up_cap):
            raise WrongParams("need 0 < vanish_floor < 1 < blow_up_cap")
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise WrongParams("tolerances must be positive")
        if self.rate_cap <= 1.0:
            raise WrongParams("rate_cap must exceed 1")
        if self.max_steps < 1:
            raise WrongParams("max_steps must be at least 1")
        if self.h_min is not None and self.h_min <= 0.0:
            raise WrongParams("h_min must be positive")

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> IntegratorOptions:
        known = set(cls.__dataclass_fields__)
        unknown = set(values) - known
        if unknown:
            raise WrongParams(f"unknown integrator option(s): {sorted(unknown)}")
        return cls(**values)


@dataclass(frozen=True)
class _Segment:
    t: float
    h: float
    u: np.ndarray
    coef: np.ndarray  # (4, 4): polynomial coefficients in theta, powers 1..4


@dataclass(frozen=True)
class Trajectory:
    """Accepted steps of one integration run.

    ``coeffs`` holds the metric coefficients and ``rates`` the logarithmic
    derivatives ``d ln g / dt`` at each sample.  ``conserved`` stores the
    catalogued functionals sampled at every step.
    """

    times: np.ndarray
    coeffs: np.ndarray
    rates: np.ndarray
    termination: Termination
    t_end: float
    horizon: float
    conserved_names: tuple[str, ...] = ()
    conserved: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    conserved_drift: dict[str, float] = field(default_factory=dict)
    class_id: Optional[cat.ClassId] = None
    params: Optional[cat.ClassParams] = None
    structure: Optional[StructureConstants] = None
    segments: tuple[_Segment, ...] = ()
    n_rejected: int = 0
    n_rhs: int = 0
    time_scale: float = 1.0

    @classmethod
    def from_samples(
        cls,
        times: Sequence[float],
        coeffs,
        termination: Termination = Termination.SingularityDetected,
        **meta,
    ) -> Trajectory:
        """Wrap externally produced samples, e.g. a synthetic test flow.

        Rates are estimated by finite differences of ``ln g`` and no dense
        output is available.
        """
        times = np.asarray(times, dtype=float)
        coeffs = np.asarray(coeffs, dtype=float)
        if times.ndim != 1 or coeffs.shape != (times.size, 4):
            raise ValueError("need times of shape (n,) and coeffs of shape (n, 4)")
        if times.size < 2 or np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be strictly increasing with at least two samples")
        if np.any(~np.isfinite(coeffs)) or np.any(coeffs <= 0.0):
            raise ValueError("coefficients must be positive and finite")
        rates = np.gradient(np.log(coeffs), times, axis=0)
        return cls(
            times=times,
            coeffs=coeffs,
            rates=rates,
            termination=termination,
            t_end=float(times[-1]),
            horizon=float(meta.pop("horizon", times[-1])),
            **meta,
        )

    @property
    def n_samples(self) -> int:
        return int(self.times.size)

    @property
    def singular_interval(self) -> Optional[tuple[float, float]]:
        """``[t_last_accepted, t_end]``: the last accepted step before the
        detector fired (``T0`` itself lies beyond ``t_end``)."""
        if self.termination is not Termination.SingularityDetected or self.times.size < 2:
            return None
        return float(self.times[-2]), float(self.t_end)

    def metric_at(self, t: float) -> DiagonalMetric:
        return DiagonalMetric(self.sample(np.array([t]))[0])

    def sample(self, ts: Sequence[float]) -> np.ndarray:
        """Dense-output coefficients at the given times, shape ``(n, 4)``."""
        if not self.segments:
            raise ValueError("trajectory was integrated without dense output")
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if np.any(ts < self.times[0]) or np.any(ts > self.t_end):
            raise ValueError(f"requested times outside [{self.times[0]}, {self.t_end}]")
        starts = self.times[:-1]
        idx = np.clip(np.searchsorted(starts, ts, side="right") - 1, 0, len(self.segments) - 1)
        out = np.empty((ts.size, 4))
        for n, (t, i) in enumerate(zip(ts, idx)):
            seg = self.segments[i]
            th = (t - seg.t) / seg.h
            powers = np.array([th, th * th, th**3, th**4])
            out[n] = np.exp(seg.u + seg.coef @ powers)
        return out

    def curvatures(self) -> np.ndarray:
        """Sectional curvatures at every sample, shape ``(n, 6)``."""
        if self.class_id is not None:
            return np.array([cat.curvature_table_eval(self.class_id, self.params, g) for g in self.coeffs])
        if self.structure is not None:
            return np.array([sectional_all(self.structure, g) for g in self.coeffs])
        raise ValueError("trajectory carries neither a class nor structure constants")

    def to_csv(self, path) -> None:
        """Write ``t, A, B, C, D``, the conserved columns, then ``K12..K34``."""
        header = ["t", "A", "B", "C", "D", *self.conserved_names, *PLANE_LABELS]
        curv = self.curvatures()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for n in range(self.times.size):
                row = [self.times[n], *self.coeffs[n]]
                if self.conserved_names:
                    row += list(self.conserved[n])
                row += list(curv[n])
                w.writerow([f"{float(x):.17g}" for x in row])


StopCondition = Callable[[float, np.ndarray], bool]


def _error_norm(err: np.ndarray, u0: np.ndarray, u1: np.ndarray, opts: IntegratorOptions) -> float:
    scale = opts.abs_tol + opts.rel_tol * np.maximum(1.0, np.maximum(np.abs(u0), np.abs(u1)))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _log_rhs(rhs: Callable[[np.ndarray], np.ndarray]):
    def f(u: np.ndarray) -> np.ndarray:
        g = np.exp(u)
        return np.asarray(rhs(g), dtype=float) / g
    return f


def _run(
    rhs: Callable[[np.ndarray], np.ndarray],
    g0: np.ndarray,
    opts: IntegratorOptions,
    horizon: float,
    conserved: Mapping[str, Callable[[np.ndarray], float]],
    stop: Optional[StopCondition],
    accept_check: Optional[Callable[[np.ndarray], None]],
    meta: dict,
) -> Trajectory:
    if not (horizon > 0.0 and math.isfinite(horizon)):
        raise WrongParams(f"horizon must be positive and finite, got {horizon}")
    f = _log_rhs(rhs)
    u = np.log(np.asarray(g0, dtype=float))
    u_init = u.copy()
    k1 = f(u)
    n_rhs = 1
    if not np.all(np.isfinite(k1)):
        raise NonFiniteState(f"right-hand side is not finite at the initial metric {np.exp(u)}")
    if accept_check is not None:
        accept_check(np.exp(u))
    rate0 = float(np.max(np.abs(k1)))
    tau0 = 1.0 / rate0 if rate0 > 0.0 else math.inf
    time_scale = min(horizon, tau0)
    h_min = opts.h_min if opts.h_min is not None else 1e-14 * time_scale
    rate_limit = opts.rate_cap / tau0 if math.isfinite(tau0) else math.inf
    lo, hi = math.log(opts.vanish_floor), math.log(opts.blow_up_cap)

    names = tuple(conserved)
    cons_fns = [conserved[n] for n in names]

    def cons_row(uu):
        g = np.exp(uu)
        return [fn(g) for fn in cons_fns]

    times = [0.0]
    states = [u.copy()]
    rates = [k1.copy()]
    cons = [cons_row(u)]
    segments: list[_Segment] = []
    t = 0.0
    h = min(horizon, 1e-3 * time_scale) if math.isfinite(time_scale) else horizon
    n_rej = 0
    termination = Termination.TimeHorizonReached
    k = np.empty((7, u.size))

    steps = 0
    while True:
        if steps >= opts.max_steps:
            termination = Termination.MaxSteps
            break
        h = min(h, horizon - t)
        if h < h_min and horizon - t > h_min:
            termination = Termination.StepUnderflow
            break
        k[0] = k1
        ok = True
        for s in range(1, 7):
            y = u + h * (_A[s] @ k[:s])
            val = f(y)
            n_rhs += 1
            if not np.all(np.isfinite(val)):
                ok = False
                break
            k[s] = val
        if not ok:
            n_rej += 1
            h *= _MIN_FACTOR
            continue
        u_new = u + h * (_B[:6] @ k[:6])
        err = _error_norm(h * (_E @ k), u, u_new, opts)
        if err > 1.0:
            n_rej += 1
            h *= max(_MIN_FACTOR, _SAFETY * err ** (-1.0 / _ORDER))
            continue

        # accepted
        steps += 1
        if opts.dense_output:
            segments.append(_Segment(t, h, u.copy(), h * (k.T @ _P)))
        t_new = t + h if horizon - (t + h) > 1e-15 * horizon else horizon
        u, t, k1 = u_new, t_new, k[6].copy()
        times.append(t)
        states.append(u.copy())
        rates.append(k1.copy())
        cons.append(cons_row(u))
        if accept_check is not None:
            accept_check(np.exp(u))

        rel = u - u_init
        if np.any(rel < lo) or np.any(rel > hi) or float(np.max(np.abs(k1))) >= rate_limit:
            termination = Termination.SingularityDetected
            break
        if t >= horizon:
            termination = Termination.TimeHorizonReached
            break
        if stop is not None and stop(t, np.exp(u)):
            termination = Termination.StopConditionMet
            break
        factor = _MAX_FACTOR if err == 0.0 else min(_MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** (-1.0 / _ORDER)))
        h *= factor

    times_a = np.array(times)
    coeffs = np.exp(np.array(states))
    cons_a = np.array(cons, dtype=float).reshape(len(times), len(names))
    drift = {}
    for j, name in enumerate(names):
        ref = cons_a[0, j]
        dev = np.max(np.abs(cons_a[:, j] - ref))
        drift[name] = float(dev / abs(ref)) if ref != 0.0 else float(dev)
    traj = Trajectory(
        times=times_a,
        coeffs=coeffs,
        rates=np.array(rates),
        termination=termination,
        t_end=float(times_a[-1]),
        horizon=float(horizon),
        conserved_names=names,
        conserved=cons_a,
        conserved_drift=drift,
        segments=tuple(segments),
        n_rejected=n_rej,
        n_rhs=n_rhs,
        time_scale=float(time_scale),
        **meta,
    )
    if termination is Termination.MaxSteps:
        raise MaxStepsExceeded(f"step budget of {opts.max_steps} exhausted at t = {t}", traj)
    return traj


def integrate(
    cid: cat.ClassId | str,
    init: Optional[cat.InitialData],
    params: Optional[cat.ClassParams] = None,
    opts: Optional[IntegratorOptions] = None,
    horizon: float = 1.0,
    stop: Optional[StopCondition] = None,
) -> Trajectory:
    """Integrate a catalogued class from its initial data.

    Raises
    ------
    MaxStepsExceeded
        When ``opts.max_steps`` accepted steps do not reach a termination
        event; the partial trajectory is attached as ``args[1]``.
    NonFiniteState
        If the right-hand side is not finite at an accepted state.
    """
    spec = cat.get_spec(cid)
    p = spec.resolve_params(params)
    g0 = np.array(cat.initial_metric(spec.id, init, p))
    opts = opts or IntegratorOptions()
    rhs_fn = spec.rhs
    cons = {name: (lambda g, fn=fn: float(fn(*g, p))) for name, fn in spec.conserved.items()}

    def rhs(g):
        return rhs_fn(g[0], g[1], g[2], g[3], p)

    return _run(rhs, g0, opts, horizon, cons, stop, None, {"class_id": spec.id, "params": p})


def integrate_general(
    sc: StructureConstants,
    g0,
    opts: Optional[IntegratorOptions] = None,
    horizon: float = 1.0,
    stop: Optional[StopCondition] = None,
) -> Trajectory:
    """Integrate ``dg/dt = 2 Ric`` with the Ricci tensor taken from the oracle.

    Raises
    ------
    NonDiagonalFlow
        If an off-diagonal Ricci entry exceeds ``opts.off_diagonal_tol``
        (relative to ``1 + max |Ric_ii|``) at an accepted step.
    """
    opts = opts or IntegratorOptions()
    g0 = np.asarray(list(g0), dtype=float)
    DiagonalMetric(g0)
    iu = np.triu_indices(4, 1)

    def rhs(g):
        return 2.0 * np.diag(ricci_matrix(sc, g))

    def check(g):
        ric = ricci_matrix(sc, g)
        off = float(np.max(np.abs(ric[iu])))
        if off > opts.off_diagonal_tol * (1.0 + float(np.max(np.abs(np.diag(ric))))):
            raise NonDiagonalFlow(f"off-diagonal Ricci entry {off:.3e} at metric {g.tolist()}")

    return _run(rhs, g0, opts, horizon, {}, stop, check, {"structure": sc})
