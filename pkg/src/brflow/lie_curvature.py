"""
Curvature of left-invariant diagonal metrics on 4-dimensional Lie groups.

Everything here works from the structure constants alone, so it serves as an
independent check on the hand-written per-class formulas in
:mod:`brflow.catalog`.  Inputs and outputs live in the frame ``Y_1..Y_4``
in which the metric is diagonal; the orthonormal frame
``e_i = Y_i / sqrt(g_i)`` is only used internally.

Index convention: ``c[i, j, k]`` is the coefficient of ``Y_k`` in
``[Y_i, Y_j]`` (0-based).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping

import numpy as np

from .errors import InvalidMetric, NonUnimodular

DIM = 4
#: The six coordinate planes (i < j), 0-based, in table order K12, K13, ..., K34.
PLANES: tuple[tuple[int, int], ...] = tuple(combinations(range(DIM), 2))
PLANE_LABELS: tuple[str, ...] = tuple(f"K{i + 1}{j + 1}" for i, j in PLANES)

ALGEBRA_ATOL = 1e-12


@dataclass(frozen=True)
class StructureConstants:
    """Bracket tensor of a 4-dimensional real Lie algebra.

    ``c[i, j, k]`` is the ``Y_k`` component of ``[Y_i, Y_j]``.
    """

    c: np.ndarray
    unimodular: bool = field(init=False)

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        if c.shape != (DIM, DIM, DIM):
            raise ValueError(f"structure constants must have shape (4, 4, 4), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "unimodular", _unimodular_residual(c) <= ALGEBRA_ATOL)

    @classmethod
    def from_brackets(cls, brackets: Mapping[tuple[int, int], Mapping[int, float]]) -> StructureConstants:
        """Build from 1-based bracket relations.

        ``{(1, 4): {2: 1.0}}`` encodes ``[Y_1, Y_4] = Y_2``; the antisymmetric
        partner ``[Y_4, Y_1]`` is filled in automatically.
        """
        c = np.zeros((DIM, DIM, DIM))
        for (i, j), rhs in brackets.items():
            for k, coeff in rhs.items():
                c[i - 1, j - 1, k - 1] += coeff
                c[j - 1, i - 1, k - 1] -= coeff
        return cls(c)

    @classmethod
    def abelian(cls) -> StructureConstants:
        return cls(np.zeros((DIM, DIM, DIM)))


@dataclass(frozen=True)
class DiagonalMetric:
    """Metric ``A th1^2 + B th2^2 + C th3^2 + D th4^2`` in the dual coframe."""

    coeffs: np.ndarray

    def __post_init__(self):
        g = np.array(self.coeffs, dtype=float).reshape(-1)
        if g.shape != (DIM,):
            raise InvalidMetric(f"expected 4 metric coefficients, got {g.size}")
        if not np.all(np.isfinite(g)) or np.any(g <= 0.0):
            raise InvalidMetric(f"metric coefficients must be positive and finite, got {g.tolist()}")
        g.setflags(write=False)
        object.__setattr__(self, "coeffs", g)

    @property
    def A(self) -> float:
        return float(self.coeffs[0])

    @property
    def B(self) -> float:
        return float(self.coeffs[1])

    @property
    def C(self) -> float:
        return float(self.coeffs[2])

    @property
    def D(self) -> float:
        return float(self.coeffs[3])

    def scaled(self, factor: float) -> DiagonalMetric:
        return DiagonalMetric(self.coeffs * factor)

    def __iter__(self):
        return iter(self.coeffs.tolist())


@dataclass(frozen=True)
class CurvatureReport:
    """Ricci tensor (Y-frame), the six coordinate sectional curvatures, and
    the largest off-diagonal Ricci entry."""

    ricci: np.ndarray
    sectional: np.ndarray
    off_diagonal_norm: float

    def sectional_map(self) -> dict[str, float]:
        return dict(zip(PLANE_LABELS, self.sectional.tolist()))


@dataclass(frozen=True)
class Diagnostic:
    invariant: str
    max_violation: float

    def __str__(self):
        return f"{self.invariant}: max violation {self.max_violation:.3e}"


def _as_metric(g) -> DiagonalMetric:
    return g if isinstance(g, DiagonalMetric) else DiagonalMetric(g)


def _antisymmetry_residual(c: np.ndarray) -> float:
    return float(np.max(np.abs(c + c.transpose(1, 0, 2))))


def _jacobi_residual(c: np.ndarray) -> float:
    # [[Y_i,Y_j],Y_k] + cyclic, component l
    t = np.einsum("ijm,mkl->ijkl", c, c)
    cyc = t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)
    return float(np.max(np.abs(cyc)))


def _unimodular_residual(c: np.ndarray) -> float:
    # tr ad(Y_i) = sum_j c[i, j, j]
    return float(np.max(np.abs(np.einsum("ijj->i", c))))


def validate_algebra(sc: StructureConstants | np.ndarray, atol: float = ALGEBRA_ATOL) -> list[Diagnostic]:
    """Return the violated Lie-algebra invariants; an empty list means valid."""
    c = sc.c if isinstance(sc, StructureConstants) else np.asarray(sc, dtype=float)
    out = []
    for name, residual in (
        ("antisymmetry", _antisymmetry_residual(c)),
        ("jacobi", _jacobi_residual(c)),
        ("unimodularity", _unimodular_residual(c)),
    ):
        if residual > atol:
            out.append(Diagnostic(name, residual))
    return out


def orthonormal_constants(sc: StructureConstants, g: DiagonalMetric) -> np.ndarray:
    """Structure constants of the orthonormal frame ``e_i = Y_i / sqrt(g_i)``."""
    s = np.sqrt(g.coeffs)
    return sc.c * s[None, None, :] / (s[:, None, None] * s[None, :, None])


def _ricci_quadratic(cn: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Ric(W, W) for a batch of vectors ``w`` (rows, orthonormal components).

    Unimodular formula: -1/2 sum |[W,e_i]|^2 - 1/2 sum <[W,[W,e_i]],e_i>
    + 1/4 sum_{i,j} <[e_i,e_j],W>^2.
    """
    ad = np.einsum("nj,jik->nki", w, cn)
    t1 = -0.5 * np.einsum("nki,nki->n", ad, ad)
    t2 = -0.5 * np.einsum("nki,nik->n", ad, ad)
    proj = np.einsum("ijk,nk->nij", cn, w)
    t3 = 0.25 * np.einsum("nij,nij->n", proj, proj)
    return t1 + t2 + t3


_EYE = np.eye(DIM)
_PLANE_I = np.array([p[0] for p in PLANES])
_PLANE_J = np.array([p[1] for p in PLANES])
_POLAR_PLUS = _EYE[_PLANE_I] + _EYE[_PLANE_J]
_POLAR_MINUS = _EYE[_PLANE_I] - _EYE[_PLANE_J]
_POLAR_BATCH = np.vstack([_EYE, _POLAR_PLUS, _POLAR_MINUS])


def _ricci_orthonormal(cn: np.ndarray) -> np.ndarray:
    q = _ricci_quadratic(cn, _POLAR_BATCH)
    ric = np.diag(q[:DIM])
    off = 0.25 * (q[DIM:DIM + 6] - q[DIM + 6:])
    ric[_PLANE_I, _PLANE_J] = off
    ric[_PLANE_J, _PLANE_I] = off
    return ric


def _sectional_orthonormal(cn: np.ndarray) -> np.ndarray:
    i, j = _PLANE_I, _PLANE_J
    xy = cn[i, j, :]                                  # [X, Y]
    t1 = -0.75 * np.sum(xy**2, axis=1)
    t2 = -0.5 * np.einsum("pk,pk->p", xy, cn[i, :, j])  # <[X,[X,Y]],Y>
    t3 = -0.5 * np.einsum("pk,pk->p", cn[j, i, :], cn[j, :, i])
    u_xy = 0.5 * (cn[:, i, j] + cn[:, j, i])          # <U(X,Y), e_m>, shape (m, p)
    t4 = np.sum(u_xy**2, axis=0)
    t5 = -np.einsum("mp,mp->p", cn[:, i, i], cn[:, j, j])
    return t1 + t2 + t3 + t4 + t5


def ricci_matrix(sc: StructureConstants, g) -> np.ndarray:
    """Ricci tensor in the Y-frame, without the sectional curvatures."""
    g = _as_metric(g)
    if not sc.unimodular:
        raise NonUnimodular("Ricci formula requires a unimodular algebra")
    ric = _ricci_orthonormal(orthonormal_constants(sc, g))
    s = np.sqrt(g.coeffs)
    return ric * np.outer(s, s)


def ricci(sc: StructureConstants, g) -> CurvatureReport:
    """Ricci and sectional curvatures of ``g`` computed from ``sc``.

    Raises
    ------
    NonUnimodular
        If the algebra is not unimodular.
    InvalidMetric
        If a coefficient is not positive.
    """
    g = _as_metric(g)
    if not sc.unimodular:
        raise NonUnimodular("Ricci formula requires a unimodular algebra")
    cn = orthonormal_constants(sc, g)
    s = np.sqrt(g.coeffs)
    ric = _ricci_orthonormal(cn) * np.outer(s, s)
    off = float(np.max(np.abs(ric[_PLANE_I, _PLANE_J])))
    return CurvatureReport(ricci=ric, sectional=_sectional_orthonormal(cn), off_diagonal_norm=off)


def sectional(sc: StructureConstants, g, i: int, j: int) -> float:
    """Sectional curvature of the plane spanned by ``Y_i`` and ``Y_j`` (1-based)."""
    g = _as_metric(g)
    if i == j:
        raise IndexError("a plane needs two distinct frame vectors")
    if not (1 <= i <= DIM and 1 <= j <= DIM):
        raise IndexError(f"frame indices must lie in 1..4, got ({i}, {j})")
    lo, hi = sorted((i - 1, j - 1))
    return float(_sectional_orthonormal(orthonormal_constants(sc, g))[PLANES.index((lo, hi))])


def sectional_all(sc: StructureConstants, g) -> np.ndarray:
    """All six coordinate sectional curvatures in :data:`PLANES` order."""
    return _sectional_orthonormal(orthonormal_constants(sc, _as_metric(g)))


def flow_rhs(sc: StructureConstants, g) -> tuple[np.ndarray, float]:
    """``2 Ric_ii`` for each coefficient, and the largest off-diagonal entry."""
    ric = ricci_matrix(sc, g)
    return 2.0 * np.diag(ric).copy(), float(np.max(np.abs(ric[_PLANE_I, _PLANE_J])))
