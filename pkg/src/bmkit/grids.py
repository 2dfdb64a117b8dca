"""Piecewise-constant complex fields on uniform dyadic lattices.

A ``GridFunction`` stores a dense block of complex cell values at
resolution ``2**-J`` together with the integer lattice position of its
lowest cell; the function is identically zero outside the stored box.
Every operation here (restriction, dyadic dilation, lattice translation,
conditional expectation) is closed on this representation, so norm
identities downstream can be tested without interpolation error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cubes import DyadicCube
from .errors import PreconditionError

__all__ = [
    "GridFunction",
    "FunctionCorpus",
    "indicator",
    "restrict",
    "refine",
    "dilate_dyadic",
    "translate_lattice",
    "conditional_expectation",
    "generate_corpus",
    "common_grid",
]


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A compactly supported function, constant on cells of side ``2**-J``.

    Parameters
    ----------
    resolution : int
        J >= 0; cells have side ``2**-J``.
    origin : tuple of int
        Index of the lowest cell in units of ``2**-J``.
    values : ndarray
        Complex array, one entry per cell, axis ``i`` along coordinate
        ``x_{i+1}`` (row-major as serialized).
    """

    resolution: int
    origin: tuple
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.ndim < 1 or vals.ndim > 3:
            raise PreconditionError(f"dimension {vals.ndim} outside 1..3")
        if self.resolution < 0:
            raise PreconditionError("resolution J must be >= 0")
        if any(s < 1 for s in vals.shape):
            raise PreconditionError("empty value box")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin", tuple(int(o) for o in self.origin))
        if len(self.origin) != vals.ndim:
            raise PreconditionError("origin/shape dimension mismatch")

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def cell(self) -> float:
        """Cell side length 2**-J (exact as a float)."""
        return 2.0 ** (-self.resolution)

    def box_lower(self) -> tuple:
        """Lower corner of the stored box, in cell units."""
        return self.origin

    def box_upper(self) -> tuple:
        """Upper corner (exclusive) in cell units."""
        return tuple(o + s for o, s in zip(self.origin, self.shape))

    def support_radius(self) -> float:
        """max_i max(|lo_i|, |hi_i|) of the box, in real coordinates."""
        h = self.cell
        lo = self.box_lower()
        hi = self.box_upper()
        return max(max(abs(a), abs(b)) for a, b in zip(lo, hi)) * h

    def integral(self) -> complex:
        return complex(self.values.sum() * self.cell ** self.dim)

    def l1_mass(self) -> float:
        return float(np.abs(self.values).sum() * self.cell ** self.dim)

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.resolution, self.origin, values)

    def __abs__(self) -> "GridFunction":
        return self.with_values(np.abs(self.values))

    def scaled(self, c) -> "GridFunction":
        return self.with_values(self.values * c)

    def cell_centers(self):
        """Arrays of per-axis cell-center coordinates."""
        h = self.cell
        return [
            (np.arange(o, o + s) + 0.5) * h
            for o, s in zip(self.origin, self.shape)
        ]

    def to_json(self) -> dict:
        flat = self.values.ravel()
        return {
            "dim": self.dim,
            "J": self.resolution,
            "origin": list(self.origin),
            "shape": list(self.shape),
            "values": [[float(v.real), float(v.imag)] for v in flat],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GridFunction":
        shape = tuple(int(s) for s in obj["shape"])
        vals = np.array([complex(re, im) for re, im in obj["values"]])
        if vals.size != int(np.prod(shape)):
            raise PreconditionError("value count does not match shape")
        return cls(int(obj["J"]), tuple(obj["origin"]), vals.reshape(shape))


def _cube_cell_range(c: DyadicCube, J: int):
    """Per-axis half-open cell-index ranges of a standard cube at resolution J."""
    if not c.is_standard():
        raise PreconditionError("cell-aligned operations require a standard-grid cube")
    if J < c.scale:
        raise PreconditionError("cube not resolvable at this resolution")
    w = 2 ** (J - c.scale)
    return [(m * w, (m + 1) * w) for m in c.position]


def indicator(c: DyadicCube, J: int) -> GridFunction:
    """Characteristic function of a standard-grid cube, sampled exactly."""
    ranges = _cube_cell_range(c, J)
    shape = tuple(b - a for a, b in ranges)
    origin = tuple(a for a, _ in ranges)
    return GridFunction(J, origin, np.ones(shape, dtype=np.complex128))


def restrict(f: GridFunction, c: DyadicCube) -> GridFunction:
    """f * chi_c for a cell-aligned cube; exact."""
    ranges = _cube_cell_range(c, f.resolution)
    lo = f.box_lower()
    hi = f.box_upper()
    slices = []
    out_origin = []
    for (a, b), o, u in zip(ranges, lo, hi):
        aa, bb = max(a, o), min(b, u)
        if aa >= bb:
            return GridFunction(f.resolution, f.origin, np.zeros((1,) * f.dim))
        slices.append(slice(aa - o, bb - o))
        out_origin.append(aa)
    return GridFunction(f.resolution, tuple(out_origin), f.values[tuple(slices)])


def refine(f: GridFunction, J: int) -> GridFunction:
    """The same function represented at a finer resolution J >= f.resolution."""
    if J < f.resolution:
        raise PreconditionError("refine only goes to finer resolutions")
    k = J - f.resolution
    if k == 0:
        return f
    vals = f.values
    for ax in range(f.dim):
        vals = np.repeat(vals, 2 ** k, axis=ax)
    origin = tuple(o * 2 ** k for o in f.origin)
    return GridFunction(J, origin, vals)


def dilate_dyadic(f: GridFunction, m: int) -> GridFunction:
    """x -> f(2**m x), exactly.

    For m > 0 the support shrinks and the resolution index grows to J+m;
    for m < 0 cells coarsen to scale J+m, replicated back onto resolution 0
    when J+m would be negative.  Either way the cell values are reused
    unchanged, so the operation is exact for every grid function.
    """
    J2 = f.resolution + m
    if J2 >= 0:
        return GridFunction(J2, f.origin, f.values)
    # coarse cells (side 2**-J2 > 1): replicate onto the unit grid
    k = -J2
    vals = f.values
    for ax in range(f.dim):
        vals = np.repeat(vals, 2 ** k, axis=ax)
    origin = tuple(o * 2 ** k for o in f.origin)
    return GridFunction(0, origin, vals)


def translate_lattice(f: GridFunction, k, scale: int = 0) -> GridFunction:
    """x -> f(x - 2**-scale * k); the shift must be cell-aligned (scale <= J)."""
    if scale > f.resolution:
        raise PreconditionError("shift finer than the resolution is not cell-aligned")
    k = np.atleast_1d(np.asarray(k, dtype=int))
    if k.size != f.dim:
        raise PreconditionError("shift vector dimension mismatch")
    step = 2 ** (f.resolution - scale)
    origin = tuple(o + int(ki) * step for o, ki in zip(f.origin, k))
    return GridFunction(f.resolution, origin, f.values)


def _pad_to_alignment(values: np.ndarray, origin, block: int):
    """Zero-pad so the box starts and ends on multiples of ``block`` cells."""
    pads = []
    new_origin = []
    for o, s in zip(origin, values.shape):
        left = o % block
        right = (-(o + s)) % block
        pads.append((left, right))
        new_origin.append(o - left)
    return np.pad(values, pads), tuple(new_origin)


def conditional_expectation(f: GridFunction, k: int) -> GridFunction:
    """Average of f over each scale-k dyadic cube meeting the support.

    The result is piecewise constant at scale k but returned on the original
    resolution-J grid (cells replicated) so that differences like
    ``f - E_k f`` live on a common lattice.  Requires k <= J.
    """
    J = f.resolution
    if k > J:
        raise PreconditionError("refinement is not expectation: need k <= J")
    block = 2 ** (J - k)
    vals, origin = _pad_to_alignment(f.values, f.origin, block)
    A = vals
    for ax in range(f.dim):
        shp = A.shape
        A = A.reshape(shp[:ax] + (shp[ax] // block, block) + shp[ax + 1:])
        A = A.mean(axis=ax + 1)
    for ax in range(f.dim):
        A = np.repeat(A, block, axis=ax)
    return GridFunction(J, origin, A)


def pointwise_dominates(f: GridFunction, g: GridFunction) -> bool:
    """Whether |g| <= |f| cellwise (decidable exactly on a common grid)."""
    F, G = common_grid(f, g)
    return bool(np.all(np.abs(G.values) <= np.abs(F.values)))


def common_grid(f: GridFunction, g: GridFunction):
    """Represent two functions on one resolution and one bounding box."""
    J = max(f.resolution, g.resolution)
    f2, g2 = refine(f, J), refine(g, J)
    lo = tuple(min(a, b) for a, b in zip(f2.box_lower(), g2.box_lower()))
    hi = tuple(max(a, b) for a, b in zip(f2.box_upper(), g2.box_upper()))
    shape = tuple(b - a for a, b in zip(lo, hi))

    def embed(u):
        out = np.zeros(shape, dtype=np.complex128)
        sl = tuple(
            slice(o - a, o - a + s) for o, a, s in zip(u.origin, lo, u.shape)
        )
        out[sl] = u.values
        return GridFunction(J, lo, out)

    return embed(f2), embed(g2)


# ---------------------------------------------------------------------------
# reproducible corpora


@dataclass(frozen=True)
class FunctionCorpus:
    """Seeded generator spec; same seed and spec reproduce identical corpora.

    family is one of ``random-cells``, ``blocks``, ``cosines``,
    ``gaussians``.  ``params`` carries family-specific knobs; see
    ``generate_corpus``.
    """

    seed: int
    count: int
    family: str
    dim: int = 1
    resolution: int = 4
    params: dict = field(default_factory=dict)


def _rng(spec: FunctionCorpus) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=spec.seed))


def generate_corpus(spec: FunctionCorpus):
    """Deterministic list of grid functions for the requested family.

    random-cells : independent complex values on a box inside [0,1)^n
    blocks       : normalized predual blocks; params may carry ``space``
                   (a SpaceParams) fixing the normalization exponent
    cosines      : band-limited real fields built in frequency space
    gaussians    : gaussian bumps sampled at cell centers
    """
    gen = _rng(spec)
    fam = spec.family
    if fam == "random-cells":
        return [_random_cells(spec, gen) for _ in range(spec.count)]
    if fam == "blocks":
        return [_random_block(spec, gen) for _ in range(spec.count)]
    if fam == "cosines":
        return [_band_limited(spec, gen) for _ in range(spec.count)]
    if fam == "gaussians":
        return [_gaussian(spec, gen) for _ in range(spec.count)]
    raise PreconditionError(f"unknown corpus family {fam!r}")


def _box_inside_unit(spec: FunctionCorpus, gen: np.random.Generator):
    J, n = spec.resolution, spec.dim
    full = 2 ** J
    shape = []
    origin = []
    for _ in range(n):
        s = int(gen.integers(max(1, full // 2), full + 1))
        o = int(gen.integers(0, full - s + 1))
        shape.append(s)
        origin.append(o)
    return tuple(origin), tuple(shape)


def _random_cells(spec, gen):
    origin, shape = _box_inside_unit(spec, gen)
    re = gen.uniform(-1.0, 1.0, size=shape)
    if spec.params.get("complex", True):
        im = gen.uniform(-1.0, 1.0, size=shape)
        vals = re + 1j * im
    else:
        vals = re.astype(np.complex128)
    if spec.params.get("nonnegative", False):
        vals = np.abs(vals).astype(np.complex128)
    return GridFunction(spec.resolution, origin, vals)


def _random_block(spec, gen):
    from .mixed import mixed_norm  # local import to avoid a cycle

    J, n = spec.resolution, spec.dim
    space = spec.params.get("space")
    j = int(gen.integers(0, J))
    pos = tuple(int(gen.integers(0, 2 ** j)) for _ in range(n))
    cube = DyadicCube(j, pos)
    w = 2 ** (J - j)
    vals = gen.uniform(0.1, 1.0, size=(w,) * n).astype(np.complex128)
    f = GridFunction(J, tuple(m * w for m in pos), vals)
    if space is not None:
        p_conj = space.p.conjugate()
        target = float(cube.volume) ** (1.0 / space.t - space.inv_sum / n)
        f = f.scaled(target / mixed_norm(f, p_conj))
    return f


def _band_limited(spec, gen):
    J, n = spec.resolution, spec.dim
    box_scale = int(spec.params.get("box_scale", 2))  # box side 2**box_scale
    N = 2 ** (J + box_scale)
    freqs = np.fft.fftfreq(N, d=2.0 ** (-J))
    j_lo = int(spec.params.get("j_lo", 0))
    j_hi = int(spec.params.get("j_hi", max(j_lo, J - 4)))
    spec_hat = np.zeros((N,) * n, dtype=np.complex128)
    n_modes = int(spec.params.get("modes", 4))
    grids = np.meshgrid(*([freqs] * n), indexing="ij")
    rad = np.sqrt(sum(g ** 2 for g in grids))
    band = (rad >= 2.0 ** j_lo) & (rad <= 2.0 ** (j_hi + 1))
    idx = np.argwhere(band)
    take = idx[gen.integers(0, len(idx), size=n_modes)]
    for t in take:
        amp = gen.uniform(0.5, 1.5) * np.exp(2j * np.pi * gen.uniform())
        spec_hat[tuple(t)] += amp
        # mirror to keep the field real
        mirror = tuple((-i) % N for i in t)
        spec_hat[mirror] += np.conj(amp)
    vals = np.fft.ifftn(spec_hat).real.astype(np.complex128)
    origin = (-(N // 2),) * n
    return GridFunction(J, origin, vals)


def _gaussian(spec, gen):
    J, n = spec.resolution, spec.dim
    half = int(spec.params.get("half_width", 2 ** J))  # cells on each side of 0
    origin = (-half,) * n
    shape = (2 * half,) * n
    center = gen.uniform(-0.3, 0.3, size=n)
    width = gen.uniform(0.5, 1.5)
    g = GridFunction(J, origin, np.zeros(shape))
    axes = g.cell_centers()
    grids = np.meshgrid(*axes, indexing="ij")
    r2 = sum((gr - c) ** 2 for gr, c in zip(grids, center))
    vals = np.exp(-np.pi * r2 / width ** 2).astype(np.complex128)
    return GridFunction(J, origin, vals)
