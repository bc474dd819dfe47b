"""
Singularity analysis of flow trajectories.

Estimates the singular time, fits power-law fates of the metric coefficients
and blow-up rates of the sectional curvatures, maps fates onto the
end-behavior taxonomy, reports which directions collapse after volume
normalization, and decides the basin of an A9i initial datum.

Exponents are stated for ``g ~ (T0 - t)^p`` on singular flows, so ``p > 0``
means the coefficient collapses, and for ``g ~ t^q`` on immortal flows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import catalog as cat
from .catalog import ClassId, ClassParams, EndBehavior, InitialData
from .errors import InsufficientData, InvalidMetric, WrongParams
from .integrator import IntegratorOptions, Termination, Trajectory, integrate
from .lie_curvature import PLANE_LABELS, DiagonalMetric

SNAP_TOL = 0.05
MIN_R2 = 0.999
MIN_T0_SAMPLES = 50
MIN_FIT_SAMPLES = 8
T0_DECADES = 3.0
N_BOOTSTRAP = 30
LINEAR_CURVATURE_TOL = 1e-3
WINDOW_TOP = 1e-3
ZERO_CURVATURE_RTOL = 1e-6

FATE_EXPONENTS = (Fraction(-1), Fraction(-1, 3), Fraction(1, 3), Fraction(2, 3), Fraction(1))
CURVATURE_EXPONENTS = (Fraction(-1), Fraction(-1, 3), Fraction(0))
IMMORTAL_CURVATURE_EXPONENTS = (Fraction(-2), Fraction(-1), Fraction(0))


class FateKind(str, Enum):
    ConstantLimit = "ConstantLimit"
    LinearToZero = "LinearToZero"
    PowerLaw = "PowerLaw"
    LinearGrowth = "LinearGrowth"
    ConstantZeroCurvature = "ConstantZeroCurvature"
    Unresolved = "Unresolved"


@dataclass(frozen=True)
class CoefficientFate:
    """Asymptotic fate of one metric coefficient.

    ``slope`` is the raw fitted exponent, ``p`` the snapped one (``None``
    when nothing snapped).  ``limit`` is the last sampled value for the
    constant kinds.
    """

    kind: FateKind
    p: Optional[Fraction] = None
    slope: float = math.nan
    stderr: float = math.nan
    r2: float = math.nan
    limit: Optional[float] = None

    @property
    def token(self) -> str:
        """Short symbol used by the taxonomy: ``C``, ``Z1``, ``G``, an
        exponent such as ``1/3``, or ``?``."""
        if self.kind in (FateKind.ConstantLimit, FateKind.ConstantZeroCurvature):
            return "C"
        if self.kind is FateKind.LinearToZero or (self.kind is FateKind.PowerLaw and self.p == 1):
            return "Z1"
        if self.kind is FateKind.LinearGrowth:
            return "G"
        if self.kind is FateKind.PowerLaw:
            return str(self.p)
        return "?"

    @property
    def exponent(self) -> Optional[Fraction]:
        """Snapped exponent with constants mapped to 0."""
        if self.kind in (FateKind.ConstantLimit, FateKind.ConstantZeroCurvature):
            return Fraction(0)
        if self.kind is FateKind.LinearToZero or self.kind is FateKind.LinearGrowth:
            return Fraction(1)
        return self.p

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "token": self.token,
            "p": None if self.p is None else str(self.p),
            "slope": _json_float(self.slope),
            "stderr": _json_float(self.stderr),
            "r2": _json_float(self.r2),
            "limit": self.limit,
        }


@dataclass(frozen=True)
class T0Estimate:
    """Fitted singular time; unpacks as ``(value, uncertainty)``."""

    value: float
    uncertainty: float
    exponent: float
    coefficient: int
    n_window: int

    def __iter__(self):
        yield self.value
        yield self.uncertainty


@dataclass(frozen=True)
class CurvatureRate:
    plane: str
    slope: float
    snapped: Optional[Fraction]
    identically_zero: bool = False

    def to_dict(self) -> dict:
        return {
            "plane": self.plane,
            "slope": _json_float(self.slope),
            "snapped": None if self.snapped is None else str(self.snapped),
            "identically_zero": self.identically_zero,
        }


class BasinLabel(str, Enum):
    Q1 = "Q1"
    Q2 = "Q2"
    S0_candidate = "S0_candidate"


@dataclass(frozen=True)
class BasinResult:
    label: BasinLabel
    decision_time: Optional[float]
    budget: float
    lambdas: tuple[float, float, float, float]

    def to_dict(self) -> dict:
        return {
            "label": self.label.value,
            "decision_time": self.decision_time,
            "budget": _json_float(self.budget),
            "lambdas": list(self.lambdas),
        }


@dataclass(frozen=True)
class LimitReport:
    """Directions that collapse, stay bounded or expand after volume
    normalization, and the model space they describe (``R^3``, ``M^2 x R``,
    ``constant``)."""

    collapsed: tuple[int, ...]
    bounded: tuple[int, ...]
    expanding: tuple[int, ...]
    label: str

    def to_dict(self) -> dict:
        return {
            "collapsed": [i + 1 for i in self.collapsed],
            "bounded": [i + 1 for i in self.bounded],
            "expanding": [i + 1 for i in self.expanding],
            "limit": self.label,
        }


def _json_float(x: float) -> Optional[float]:
    return None if x is None or not math.isfinite(x) else float(x)


def _snap(value: float, grid: Sequence[Fraction], tol: float = SNAP_TOL) -> Optional[Fraction]:
    best = min(grid, key=lambda q: abs(value - float(q)))
    return best if abs(value - float(best)) <= tol else None


def _linfit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """Least-squares line; returns (slope, intercept, slope stderr, R^2)."""
    n = x.size
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ym) ** 2))
    stderr = math.sqrt(ss_res / (n - 2) / sxx) if n > 2 else math.inf
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return slope, intercept, stderr, r2


# ---------------------------------------------------------------------------
# Singular time
# ---------------------------------------------------------------------------

def _require_singular(traj: Trajectory) -> None:
    if traj.termination is not Termination.SingularityDetected:
        raise InsufficientData(f"trajectory ended with {traj.termination.value}, not at a singularity")


def _t0_guess(traj: Trajectory, i: int) -> float:
    # 1/u' is linear in t for a pure power law and vanishes at T0
    r = traj.rates[-10:, i]
    t = traj.times[-10:]
    slope, icpt, _, _ = _linfit(t, 1.0 / r)
    root = -icpt / slope if slope != 0.0 else math.nan
    if not (math.isfinite(root) and root > traj.t_end):
        root = traj.t_end + 1.0 / abs(traj.rates[-1, i])
    return root


def _power_fit(t: np.ndarray, y: np.ndarray, t_end: float, t0_guess: float) -> np.ndarray:
    def resid(x):
        logc, p, s = x
        return y - (logc + p * np.log(t_end + math.exp(s) - t))

    gap = max(t0_guess - t_end, 1e-300)
    tau = np.log(t0_guess - t)
    p0, c0, _, _ = _linfit(tau, y)
    sol = least_squares(resid, x0=[c0, p0, math.log(gap)], method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return sol.x


def estimate_t0(traj: Trajectory, seed: int = 0) -> T0Estimate:
    """Singular time from a power-law fit ``c (T0 - t)^p`` of the fastest
    coefficient.

    The window covers the last three decades of the approach, i.e. the
    samples with ``T0 - t <= 1e3 (T0 - t_end)`` for a first guess of ``T0``
    extrapolated from the logarithmic rates.  ``(log c, p, log(T0 - t_end))``
    are fitted by Levenberg-Marquardt, and the uncertainty is the spread of 30
    bootstrap refits.

    Raises
    ------
    InsufficientData
        If the run did not end at a singularity or the window holds fewer
        than 50 samples.
    """
    _require_singular(traj)
    i = int(np.argmax(np.abs(traj.rates[-1])))
    u = np.log(traj.coeffs[:, i])
    guess = _t0_guess(traj, i)
    mask = guess - traj.times <= 10.0**T0_DECADES * (guess - traj.t_end)
    t, y = traj.times[mask], u[mask]
    if t.size < MIN_T0_SAMPLES:
        raise InsufficientData(f"only {t.size} samples in the last {T0_DECADES:g} decades before the singularity")
    logc, p, s = _power_fit(t, y, traj.t_end, guess)
    t0 = traj.t_end + math.exp(s)

    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(N_BOOTSTRAP):
        idx = np.sort(rng.integers(0, t.size, t.size))
        idx[-1] = t.size - 1  # keep the sample closest to the singularity
        _, _, sb = _power_fit(t[idx], y[idx], traj.t_end, t0)
        boots.append(traj.t_end + math.exp(sb))
    unc = float(np.std(boots, ddof=1))
    return T0Estimate(float(t0), unc, float(p), i, int(t.size))


# ---------------------------------------------------------------------------
# Coefficient fates
# ---------------------------------------------------------------------------

def _stationary(traj: Trajectory, i: int) -> bool:
    col = traj.coeffs[:, i]
    return bool(np.all(col == col[0]) or np.max(np.abs(traj.rates[:, i])) * max(traj.t_end, 1e-300) < 1e-13)


def _singular_window(traj: Trajectory, t0: float, top: float = WINDOW_TOP) -> np.ndarray:
    # corrections to the leading power law decay like (T0 - t)^(2/3) in the
    # slowest classes, so the window stops well short of T0 - t = 0.1 T0
    tau = t0 - traj.times
    lo = 10.0 * (t0 - traj.t_end)
    return (tau >= lo) & (tau <= top * t0)


def _immortal_window(traj: Trajectory) -> np.ndarray:
    return (traj.times >= 1e-2 * traj.t_end) & (traj.times > 0.0)


def _fate_from_fit(x: np.ndarray, y: np.ndarray, immortal: bool, last: float) -> CoefficientFate:
    slope, _, stderr, r2 = _linfit(x, y)
    if abs(slope) <= SNAP_TOL:
        return CoefficientFate(FateKind.ConstantLimit, Fraction(0), slope, stderr, r2, last)
    p = _snap(slope, FATE_EXPONENTS)
    if p is None or r2 < MIN_R2:
        return CoefficientFate(FateKind.Unresolved, None, slope, stderr, r2)
    if p == 1:
        quad = np.polyfit(x - x.mean(), y, 2)[0]
        if abs(quad) < LINEAR_CURVATURE_TOL:
            kind = FateKind.LinearGrowth if immortal else FateKind.LinearToZero
            return CoefficientFate(kind, p, slope, stderr, r2)
    return CoefficientFate(FateKind.PowerLaw, p, slope, stderr, r2)


def fit_fates(traj: Trajectory, t0: Optional[float]) -> tuple[CoefficientFate, ...]:
    """Fit each coefficient to a power law near the end of the flow.

    Singular flows (``t0`` given) regress ``log g`` on ``log(T0 - t)`` over
    ``10 (T0 - t_end) <= T0 - t <= 0.1 T0``.  Immortal flows (``t0`` None)
    regress ``log g`` on ``log t`` over ``[1e-2 t_end, t_end]``.  Slopes within
    0.05 of zero are constant limits, otherwise they snap to
    ``{-1, -1/3, 1/3, 2/3, 1}`` within 0.05 provided ``R^2 >= 0.999``.

    Raises
    ------
    InsufficientData
        If the window holds too few samples to fit.
    """
    immortal = t0 is None
    if immortal:
        if traj.termination is Termination.SingularityDetected:
            raise InsufficientData("singular trajectory needs a singular time")
        mask = _immortal_window(traj)
        x = np.log(traj.times[mask]) if mask.any() else np.empty(0)
    else:
        if not t0 > traj.t_end:
            raise InsufficientData(f"singular time {t0!r} does not lie beyond the last sample {traj.t_end!r}")
        mask = _singular_window(traj, t0)
        x = np.log(t0 - traj.times[mask])
    fates = []
    for i in range(4):
        if _stationary(traj, i):
            fates.append(CoefficientFate(FateKind.ConstantZeroCurvature, Fraction(0), 0.0, 0.0, 1.0, float(traj.coeffs[-1, i])))
            continue
        if x.size < MIN_FIT_SAMPLES:
            raise InsufficientData(f"only {x.size} samples in the fitting window")
        y = np.log(traj.coeffs[mask, i])
        fates.append(_fate_from_fit(x, y, immortal, float(traj.coeffs[-1, i])))
    return tuple(fates)


# ---------------------------------------------------------------------------
# Taxonomy
# ---------------------------------------------------------------------------

def _key(*tokens: str) -> tuple[str, ...]:
    return tuple(sorted(tokens))


_SINGULAR_PATTERNS = {
    _key("C", "C", "C", "Z1"): EndBehavior.Pancake1,
    _key("C", "C", "C", "1/3"): EndBehavior.Pancake1,
    _key("C", "1/3", "1/3", "-1/3"): EndBehavior.Pancake2,
    _key("C", "-1/3", "1/3", "2/3"): EndBehavior.Pancake3,
    _key("C", "C", "Z1", "Z1"): EndBehavior.Pancake4,
    _key("Z1", "1/3", "1/3", "-1/3"): EndBehavior.Tube,
    _key("1/3", "1/3", "1/3", "-1/3"): EndBehavior.Line1,
    _key("C", "Z1", "Z1", "Z1"): EndBehavior.Line2,
    _key("Z1", "Z1", "Z1", "Z1"): EndBehavior.Point,
}

_IMMORTAL_PATTERNS = {
    _key("C", "C", "C", "C"): EndBehavior.Trivial,
    _key("C", "G", "G", "G"): EndBehavior.Expanding1,
    _key("C", "C", "G", "G"): EndBehavior.Expanding2,
    _key("G", "G", "G", "G"): EndBehavior.Expanding3,
}


def classify(fates: Sequence[CoefficientFate], terminated: bool) -> EndBehavior:
    """Map a multiset of fates onto the end-behavior taxonomy.

    The result does not depend on the order of ``fates``.  Immortal flows
    whose coefficients all grow count as Expanding-3 even when the growth is
    not linear.
    """
    if len(fates) != 4:
        raise ValueError("classify needs exactly four fates")
    key = _key(*(f.token for f in fates))
    if terminated:
        return _SINGULAR_PATTERNS.get(key, EndBehavior.Unresolved)
    label = _IMMORTAL_PATTERNS.get(key)
    if label is not None:
        return label
    if all(math.isfinite(f.slope) and f.slope > SNAP_TOL for f in fates):
        return EndBehavior.Expanding3
    return EndBehavior.Unresolved


def volume_normalize(g) -> DiagonalMetric:
    """Scale ``g`` by ``(ABCD)^(-1/4)`` so the coefficient product is 1."""
    m = g if isinstance(g, DiagonalMetric) else DiagonalMetric(g)
    c = np.asarray(m.coeffs, dtype=float)
    logs = np.log(c)
    return DiagonalMetric(np.exp(logs - logs.mean()))


def _euclidean(n: int) -> str:
    return "R" if n == 1 else f"R^{n}"


def normalized_limit(fates: Sequence[CoefficientFate], terminated: bool) -> Optional[LimitReport]:
    """Collapsed, bounded and expanding directions of the volume-normalized
    flow, read off from the snapped exponents.

    Returns ``None`` when a fate is unresolved.
    """
    exps = [f.exponent for f in fates]
    if any(e is None for e in exps):
        return None
    mean = sum(exps, Fraction(0)) / 4
    # singular: g/vol^(1/4) ~ (T0-t)^(p - mean), positive means collapse.
    # immortal: g/vol^(1/4) ~ t^(q - mean), positive means expansion.
    sign = 1 if terminated else -1
    e = [sign * (x - mean) for x in exps]
    collapsed = tuple(i for i in range(4) if e[i] > 0)
    bounded = tuple(i for i in range(4) if e[i] == 0)
    expanding = tuple(i for i in range(4) if e[i] < 0)
    if len(bounded) == 4:
        label = "constant"
    elif not bounded:
        label = _euclidean(len(expanding)) if expanding else "point"
    elif expanding:
        label = f"M^{len(bounded)} x {_euclidean(len(expanding))}"
    else:
        label = f"M^{len(bounded)}"
    return LimitReport(collapsed, bounded, expanding, label)


# ---------------------------------------------------------------------------
# Curvature rates
# ---------------------------------------------------------------------------

def curvature_rates(
    traj: Trajectory,
    cid: ClassId | str | None = None,
    params: ClassParams | None = None,
    t0: Optional[float] = None,
) -> tuple[CurvatureRate, ...]:
    """Power-law rates of the six sectional curvatures.

    Singular flows fit ``log |K|`` on ``log(T0 - t)`` over the fate window
    and snap to ``{-1, -1/3, 0}``.  Immortal flows fit on ``log t`` and snap
    to ``{-2, -1, 0}``.  A curvature that vanishes along the whole run gets
    rate 0.  If ``K`` changes sign inside the window, only the stretch after
    the last sign change is used.

    Raises
    ------
    InsufficientData
        If a window holds too few samples to fit.
    """
    if cid is not None:
        spec = cat.get_spec(cid)
        p = spec.resolve_params(params)
        curv = np.array([cat.curvature_table_eval(spec.id, p, g) for g in traj.coeffs])
    else:
        curv = traj.curvatures()
    if t0 is None:
        mask = _immortal_window(traj)
        x_all = np.log(np.where(mask, traj.times, 1.0))
        grid = IMMORTAL_CURVATURE_EXPONENTS
    else:
        mask = _singular_window(traj, t0)
        x_all = np.log(np.maximum(t0 - traj.times, 1e-300))
        grid = CURVATURE_EXPONENTS
    # a plane is identically flat when it stays at rounding level relative to
    # the largest curvature at every sample (cancellations such as 4BC = 3AD
    # on an invariant set leave residues that grow with the other planes)
    scale = np.maximum(np.max(np.abs(curv), axis=1), 1e-300)
    out = []
    for j, label in enumerate(PLANE_LABELS):
        k = curv[:, j]
        if np.all(k == 0.0) or np.all(np.abs(k) <= ZERO_CURVATURE_RTOL * scale):
            out.append(CurvatureRate(label, 0.0, Fraction(0), True))
            continue
        idx = np.flatnonzero(mask)
        kw = k[idx]
        flips = np.flatnonzero(np.sign(kw[1:]) != np.sign(kw[:-1]))
        if flips.size:
            idx = idx[flips[-1] + 1:]
        idx = idx[k[idx] != 0.0]
        if idx.size < MIN_FIT_SAMPLES:
            raise InsufficientData(f"only {idx.size} usable samples for {label}")
        slope, _, _, _ = _linfit(x_all[idx], np.log(np.abs(k[idx])))
        out.append(CurvatureRate(label, slope, _snap(slope, grid)))
    return tuple(out)


# ---------------------------------------------------------------------------
# A9i basins
# ---------------------------------------------------------------------------

def _basin_of(g) -> Optional[BasinLabel]:
    A, B, C = g[0], g[1], g[2]
    if C >= A:
        return BasinLabel.Q1
    if C <= A - B:
        return BasinLabel.Q2
    return None


def classify_basin_a9i(
    init: InitialData | Sequence[float],
    opts: IntegratorOptions | None = None,
    time_budget: Optional[float] = None,
) -> BasinResult:
    """Decide which preserved inequality an A9i flow reaches first.

    Q1 once ``C >= A`` holds at an accepted step, Q2 once ``C <= A - B``
    holds.  Both conditions are preserved, so the first occurrence decides.
    The data are reordered so that ``lambda1 >= lambda2``.  Without a budget
    the flow runs until it hits a singularity; an undecided run is only an
    S0 candidate.
    """
    lam = tuple(float(x) for x in (init.lambdas if isinstance(init, InitialData) else init))
    if len(lam) != 4 or any(not (x > 0.0 and math.isfinite(x)) for x in lam):
        raise WrongParams(f"need four positive lambdas, got {lam}")
    if lam[0] < lam[1]:
        lam = (lam[1], lam[0], lam[2], lam[3])
    label = _basin_of(lam)
    if label is not None:
        return BasinResult(label, 0.0, _budget_value(time_budget), lam)
    A, B, C, _ = lam
    # the flow commutes with scaling g -> s g, t -> s t; the horizon scales with g
    horizon = time_budget if time_budget is not None else 1e3 * max(A, B, C)
    traj = integrate(ClassId.A9i, InitialData(lam), None, opts, horizon=horizon, stop=lambda t, g: _basin_of(g) is not None)
    last = _basin_of(traj.coeffs[-1])
    if last is not None:
        return BasinResult(last, float(traj.t_end), _budget_value(time_budget), lam)
    return BasinResult(BasinLabel.S0_candidate, None, _budget_value(time_budget, traj.t_end), lam)


def _budget_value(budget: Optional[float], fallback: float = math.inf) -> float:
    return float(budget) if budget is not None else float(fallback)


# ---------------------------------------------------------------------------
# Full report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalysisReport:
    class_id: ClassId
    params: ClassParams
    lambdas: Optional[tuple[float, ...]]
    termination: Termination
    t_end: float
    t0_estimate: Optional[T0Estimate]
    t0_exact: Optional[float]
    fates: tuple[CoefficientFate, ...]
    curvature: tuple[CurvatureRate, ...]
    label: EndBehavior
    predicted: tuple[EndBehavior, ...]
    limit: Optional[LimitReport]
    basin: Optional[BasinResult] = None
    extra: dict = field(default_factory=dict)

    @property
    def label_predicted(self) -> bool:
        return self.label in self.predicted

    def to_dict(self) -> dict:
        return {
            "class": self.class_id.value,
            "params": self.params.as_dict(),
            "lambdas": None if self.lambdas is None else list(self.lambdas),
            "termination": self.termination.value,
            "t_end": self.t_end,
            "t0_estimate": None if self.t0_estimate is None else self.t0_estimate.value,
            "t0_uncertainty": None if self.t0_estimate is None else _json_float(self.t0_estimate.uncertainty),
            "t0_exact": self.t0_exact,
            "fates": [f.to_dict() for f in self.fates],
            "curvature_exponents": [c.to_dict() for c in self.curvature],
            "label": self.label.value,
            "predicted_labels": [b.value for b in self.predicted],
            "normalized_limit": None if self.limit is None else self.limit.to_dict(),
            "basin": None if self.basin is None else self.basin.to_dict(),
            **self.extra,
        }


def analyze(traj: Trajectory, init: Optional[InitialData] = None, basin: Optional[BasinResult] = None) -> AnalysisReport:
    """Run the whole pipeline on a catalogued trajectory."""
    if traj.class_id is None:
        raise ValueError("analyze needs a trajectory of a catalogued class")
    spec = cat.get_spec(traj.class_id)
    p = spec.resolve_params(traj.params)
    terminated = traj.termination is Termination.SingularityDetected
    est = estimate_t0(traj) if terminated else None
    t0 = est.value if est is not None else None
    fates = fit_fates(traj, t0)
    curv = curvature_rates(traj, spec.id, p, t0)
    label = classify(fates, terminated)
    t0_exact = None
    if init is not None or not spec.id.is_lie_group:
        try:
            t0_exact = cat.t0_exact_eval(spec.id, init, p)
        except (WrongParams, InvalidMetric):
            t0_exact = None
    return AnalysisReport(
        class_id=spec.id,
        params=p,
        lambdas=None if init is None else tuple(init.lambdas),
        termination=traj.termination,
        t_end=traj.t_end,
        t0_estimate=est,
        t0_exact=t0_exact,
        fates=fates,
        curvature=curv,
        label=label,
        predicted=spec.predicted_behaviors,
        limit=normalized_limit(fates, terminated),
        basin=basin,
    )
