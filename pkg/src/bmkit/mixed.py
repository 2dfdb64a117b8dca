"""Order-sensitive mixed Lebesgue norms, exact on piecewise-constant fields.

The norm iterates one-dimensional L^{p_i} norms coordinate by coordinate,
x_1 innermost and x_n outermost, with the sup replacing the integral when
p_i is infinite.  On a cell grid every inner integral is a weighted power
sum, so the value is exact up to floating-point rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve as _direct_convolve

from .cubes import DyadicCube
from .errors import PreconditionError
from .grids import GridFunction, common_grid, refine, restrict

__all__ = [
    "ExponentVector",
    "mixed_norm",
    "mixed_norm_on_cube",
    "constant_box_norm",
    "blocked_mixed_norms",
    "holder_check",
    "young_check",
    "convolve_projected",
    "RatioReport",
]

INF = math.inf


@dataclass(frozen=True)
class ExponentVector:
    """Exponent tuple p = (p_1, ..., p_n), entries in (0, inf]."""

    entries: tuple

    def __post_init__(self):
        ent = tuple(float(p) for p in self.entries)
        if not ent:
            raise PreconditionError("empty exponent vector")
        if any(p <= 0 for p in ent):
            raise PreconditionError("exponents must be positive")
        object.__setattr__(self, "entries", ent)

    @classmethod
    def of(cls, *ps) -> "ExponentVector":
        if len(ps) == 1 and isinstance(ps[0], (tuple, list, ExponentVector)):
            ps = tuple(ps[0].entries) if isinstance(ps[0], ExponentVector) else tuple(ps[0])
        return cls(tuple(ps))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def inv(self) -> tuple:
        return tuple(0.0 if p == INF else 1.0 / p for p in self.entries)

    @property
    def inv_sum(self) -> float:
        """sum_i 1/p_i (with 1/inf = 0)."""
        return float(sum(self.inv))

    @property
    def min(self) -> float:
        return min(self.entries)

    @property
    def max(self) -> float:
        return max(self.entries)

    def conjugate(self) -> "ExponentVector":
        if any(p < 1 for p in self.entries):
            raise PreconditionError("conjugate requires all exponents >= 1")
        out = []
        for p in self.entries:
            if p == INF:
                out.append(1.0)
            elif p == 1.0:
                out.append(INF)
            else:
                out.append(p / (p - 1.0))
        return ExponentVector(tuple(out))

    def scaled(self, a: float) -> "ExponentVector":
        return ExponentVector(tuple(p * a if p != INF else INF for p in self.entries))

    def to_json(self):
        return ["inf" if p == INF else p for p in self.entries]

    @classmethod
    def from_json(cls, obj) -> "ExponentVector":
        return cls(tuple(INF if v == "inf" else float(v) for v in obj))


def _as_exponents(p, dim: int) -> ExponentVector:
    p = p if isinstance(p, ExponentVector) else ExponentVector.of(p)
    if len(p) != dim:
        raise PreconditionError(f"exponent vector has {len(p)} entries for dimension {dim}")
    return p


def _reduce_axis(A: np.ndarray, p: float, weight) -> np.ndarray:
    """One norm stage: collapse axis 0 of A with exponent p and cell weight."""
    if p == INF:
        return A.max(axis=0)
    return (np.sum(A ** p * weight, axis=0)) ** (1.0 / p)


def mixed_norm(f: GridFunction, p) -> float:
    """The iterated norm, x_1 first, exact for piecewise-constant f."""
    p = _as_exponents(p, f.dim)
    h = f.cell
    A = np.abs(f.values)
    for pi in p:
        A = _reduce_axis(A, pi, h)
    return float(A)


def mixed_norm_weighted(values_abs: np.ndarray, p: ExponentVector, axis_weights) -> float:
    """Iterated norm with a per-axis weight vector replacing the cell width.

    ``axis_weights[i]`` is broadcast along the current axis-0 reduction and
    stands for the measure (or the integral of a weight function) of each
    cell along coordinate x_{i+1}.  Infinite exponents take an unweighted
    sup; callers that need a weighted sup must fold the weight into the
    values first.
    """
    A = values_abs
    for i, pi in enumerate(p):
        w = axis_weights[i]
        if pi == INF:
            A = A.max(axis=0)
        else:
            w = np.asarray(w, dtype=float)
            if w.ndim == 1:
                w = w.reshape((-1,) + (1,) * (A.ndim - 1))
            A = (np.sum(A ** pi * w, axis=0)) ** (1.0 / pi)
    return float(A)


def constant_box_norm(v_abs: float, sides, p: ExponentVector) -> float:
    """Norm of a constant |v| on a box with the given side lengths."""
    out = float(v_abs)
    for s, pi in zip(sides, p):
        s = float(s)
        if s <= 0.0:
            return 0.0
        if pi != INF:
            out *= s ** (1.0 / pi)
    return out


def mixed_norm_on_cube(f: GridFunction, p, c: DyadicCube) -> float:
    """Norm of f * chi_c.

    Cell-aligned cubes restrict exactly; a cube strictly finer than the
    resolution must lie inside a single cell, where the constant-value
    closed form |v| * |c|^{(1/n) sum 1/p_i} applies.
    """
    p = _as_exponents(p, f.dim)
    if c.scale <= f.resolution:
        return mixed_norm(restrict(f, c), p)
    # sub-cell cube: locate the containing cell
    h_inv = 2 ** f.resolution
    lo = c.lower()
    idx = []
    for x, o, s in zip(lo, f.box_lower(), f.shape):
        i = (x * h_inv).__floor__()
        if not o <= i < o + s:
            return 0.0
        idx.append(i - o)
    v = abs(f.values[tuple(idx)])
    return constant_box_norm(v, [c.side] * f.dim, p)


def blocked_mixed_norms(values_abs: np.ndarray, p: ExponentVector, h: float, block: int) -> np.ndarray:
    """Mixed norms of every aligned block of ``block`` cells per axis.

    The array must already be padded so each axis length is a multiple of
    ``block``; the result has one entry per block, reductions taken in
    coordinate order so each value equals ``mixed_norm`` of the restriction.
    """
    A = values_abs
    n = A.ndim
    for ax in range(n):
        shp = A.shape
        A = A.reshape(shp[:ax] + (shp[ax] // block, block) + shp[ax + 1:])
        pi = p[ax]
        if pi == INF:
            A = A.max(axis=ax + 1)
        else:
            A = (np.sum(A ** pi * h, axis=ax + 1)) ** (1.0 / pi)
    return A


# ---------------------------------------------------------------------------
# inequality checks


@dataclass(frozen=True)
class RatioReport:
    """Outcome of a measured-inequality check: lhs <= rhs * (1 + tol)."""

    name: str
    lhs: float
    rhs: float
    tol: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else INF
        return self.lhs / self.rhs

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + self.tol) + 1e-300


def holder_check(f: GridFunction, g: GridFunction, p, q, tol: float = 1e-12) -> RatioReport:
    """||f g||_{L^r} <= ||f||_{L^p} ||g||_{L^q} with 1/r = 1/p + 1/q."""
    p = _as_exponents(p, f.dim)
    q = _as_exponents(q, g.dim)
    if any(pi <= 1 or pi == INF for pi in p) or any(qi <= 1 or qi == INF for qi in q):
        raise PreconditionError("Hoelder check requires 1 < p, q < inf")
    r = ExponentVector(tuple(1.0 / (ip + iq) for ip, iq in zip(p.inv, q.inv)))
    F, G = common_grid(f, g)
    prod = F.with_values(F.values * G.values)
    lhs = mixed_norm(prod, r)
    rhs = mixed_norm(f, p) * mixed_norm(g, q)
    return RatioReport("holder", lhs, rhs, tol)


def _triangle_stencil(h: float, refine_k: int) -> np.ndarray:
    """Cell averages on the 2**-refine_k subgrid of the unit-cell triangle
    chi_[0,h) * chi_[0,h); exact because the triangle is linear on subcells."""
    m = 2 ** refine_k
    knots = np.arange(2 * m + 1) / m  # in units of h, over [0, 2]
    tri = np.where(knots <= 1.0, knots, 2.0 - knots)
    return h * 0.5 * (tri[:-1] + tri[1:])


def convolve_projected(f: GridFunction, g: GridFunction, refine_k: int = 3) -> GridFunction:
    """Conditional expectation of f*g onto the grid refined by ``refine_k``.

    The convolution of two piecewise-constant fields is a lattice sum of
    translated tensor triangles; averaging those over refined cells is a
    closed form, so the returned projection E_{J+k}(f*g) is exact.  The
    projection never increases an L^p norm (p >= 1), which keeps upper
    bounds like Young's inequality one-sided.
    """
    J = max(f.resolution, g.resolution)
    F, G = refine(f, J), refine(g, J)
    c = _direct_convolve(F.values, G.values, mode="full", method="direct")
    m = 2 ** refine_k
    up_shape = tuple((s - 1) * m + 1 for s in c.shape)
    up = np.zeros(up_shape, dtype=np.complex128)
    up[tuple(slice(None, None, m) for _ in range(c.ndim))] = c
    stencil = _triangle_stencil(2.0 ** (-J), refine_k)
    out = up
    for ax in range(c.ndim):
        shape1 = [1] * c.ndim
        shape1[ax] = stencil.size
        out = _direct_convolve(out, stencil.reshape(shape1), mode="full", method="direct")
    origin = tuple((of + og) * m for of, og in zip(F.origin, G.origin))
    return GridFunction(J + refine_k, origin, out)


def young_check(f: GridFunction, g: GridFunction, p, q, s, refine_k: int = 3, tol: float = 1e-9) -> RatioReport:
    """||f*g||_{L^s} <= ||f||_{L^p} ||g||_{L^q} with 1/p + 1/q = 1 + 1/s.

    The left side is evaluated on the exact refined projection of f*g,
    which can only shrink it; ``tol`` covers floating-point rounding.
    """
    p = _as_exponents(p, f.dim)
    q = _as_exponents(q, g.dim)
    s = _as_exponents(s, f.dim)
    for ip, iq, is_ in zip(p.inv, q.inv, s.inv):
        if abs(ip + iq - 1.0 - is_) > 1e-12:
            raise PreconditionError("Young exponents must satisfy 1/p + 1/q = 1 + 1/s")
    if any(pi < 1 for pi in p) or any(qi < 1 for qi in q):
        raise PreconditionError("Young check requires p, q >= 1")
    conv = convolve_projected(f, g, refine_k)
    lhs = mixed_norm(conv, s)
    rhs = mixed_norm(f, p) * mixed_norm(g, q)
    return RatioReport("young", lhs, rhs, tol)
