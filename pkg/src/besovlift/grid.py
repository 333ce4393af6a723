"""Dyadic grids on the torus and the unit cube, and the operations on them.

Samples are cell averages: the value stored at multi-index ``m`` is the mean of
the function over ``2**-J * prod([m_k, m_k + 1))``.  Arrays are stored with
shape ``(2**J,) * dim`` in C order, so the flat order is lexicographic with the
last coordinate fastest.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    BadAxisSet,
    DimensionUnsupported,
    EpsOutOfRange,
    GridTooLarge,
    LevelOutOfRange,
    NonFiniteSample,
    ValidationError,
)

MAX_LEVEL = 20
MAX_SAMPLES = 2**24
UNIT_MODULUS_TOL = 1e-12


class Domain(enum.IntEnum):
    TORUS = 0
    CUBE = 1

    @classmethod
    def parse(cls, value) -> "Domain":
        if isinstance(value, Domain):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ValidationError(f"unknown domain {value!r}") from None
        return cls(int(value))


@dataclass(frozen=True)
class DyadicGrid:
    dim: int
    level: int
    domain: Domain = Domain.TORUS

    @property
    def n(self) -> int:
        """Cells per axis."""
        return 1 << self.level

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def mesh(self) -> float:
        return 2.0**-self.level

    @property
    def cell_volume(self) -> float:
        return 2.0 ** (-self.level * self.dim)

    @property
    def periodic(self) -> bool:
        return self.domain == Domain.TORUS

    def with_level(self, level: int) -> "DyadicGrid":
        return make_grid(self.dim, level, self.domain)

    def centers(self) -> list[np.ndarray]:
        """Open-mesh cell-center coordinates, one broadcastable array per axis."""
        c = (np.arange(self.n) + 0.5) * self.mesh
        out = []
        for a in range(self.dim):
            shp = [1] * self.dim
            shp[a] = self.n
            out.append(c.reshape(shp))
        return out


def make_grid(dim: int, level: int, domain=Domain.TORUS) -> DyadicGrid:
    if dim not in (1, 2, 3):
        raise DimensionUnsupported(f"dimension {dim} not in {{1, 2, 3}}")
    if level < 0:
        raise LevelOutOfRange(f"level {level} is negative")
    if level > MAX_LEVEL or 2 ** (dim * level) > MAX_SAMPLES:
        raise GridTooLarge(f"2^({dim}*{level}) samples exceed the cap of 2^24")
    return DyadicGrid(dim, level, Domain.parse(domain))


@dataclass(frozen=True)
class BesovParams:
    """Smoothness ``s``, integrability ``p`` and summability ``q``.

    ``q = inf`` is carried by the ``q_infinite`` flag; ``q`` itself is then ``None``.
    Use :meth:`of` to build from user input such as ``"inf"``.
    """

    s: float
    p: float
    q: float | None = 2.0
    q_infinite: bool = False
    dim: int | None = None

    def __post_init__(self):
        if not (self.s > 0 and math.isfinite(self.s)):
            raise ValidationError(f"s must be positive, got {self.s}")
        if not (self.p >= 1 and math.isfinite(self.p)):
            raise ValidationError(f"p must lie in [1, inf), got {self.p}")
        if self.q_infinite:
            if self.q is not None:
                raise ValidationError("q must be None when q_infinite is set")
        elif self.q is None or not (self.q >= 1 and math.isfinite(self.q)):
            raise ValidationError(f"q must lie in [1, inf) or be infinite, got {self.q}")

    @classmethod
    def of(cls, s, p, q=2.0, dim=None) -> "BesovParams":
        if isinstance(q, str) and q.strip().lower() in ("inf", "infinity", "oo"):
            return cls(float(s), float(p), None, True, dim)
        if q is None or (isinstance(q, float) and math.isinf(q)):
            return cls(float(s), float(p), None, True, dim)
        return cls(float(s), float(p), float(q), False, dim)

    @property
    def sp(self) -> float:
        return self.s * self.p

    def q_label(self) -> str:
        return "inf" if self.q_infinite else repr(float(self.q))

    def with_q(self, q) -> "BesovParams":
        return BesovParams.of(self.s, self.p, q, self.dim)

    def to_dict(self) -> dict:
        return {"s": self.s, "p": self.p, "q": "inf" if self.q_infinite else self.q, "dim": self.dim}

    @classmethod
    def from_dict(cls, d: dict) -> "BesovParams":
        return cls.of(d["s"], d["p"], d["q"], d.get("dim"))


def lq_aggregate(values: Iterable[float], q: float | None, q_infinite: bool) -> float:
    """ℓ^q norm of non-negative terms, scaled by the max to avoid overflow.

    Scaling makes a single nonzero term come back bit-exact.
    """
    v = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if v.size == 0:
        return 0.0
    vmax = float(np.max(v))
    if vmax == 0.0 or q_infinite:
        return vmax
    return vmax * float(np.sum((v / vmax) ** q)) ** (1.0 / q)


class GridFunction:
    """Samples (cell averages) of a real or complex function on a dyadic grid."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: DyadicGrid, values):
        arr = np.array(values, copy=True)
        if arr.size != grid.size:
            raise ValidationError(f"expected {grid.size} values, got {arr.size}")
        arr = arr.reshape(grid.shape)
        if np.iscomplexobj(arr):
            arr = arr.astype(np.complex128)
        else:
            arr = arr.astype(np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteSample("grid function contains non-finite values")
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def level(self) -> int:
        return self.grid.level

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def replace(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def mean(self):
        """Global mean, computed by the same pairwise halving as :func:`dyadic_average`."""
        return coarsen(self.values, 0).reshape(()).item()

    def __repr__(self) -> str:
        kind = "complex" if self.is_complex else "real"
        return f"GridFunction(dim={self.dim}, level={self.level}, {self.grid.domain.name}, {kind})"


class CircleMap(GridFunction):
    """A grid function with unit-modulus values."""

    __slots__ = ()

    def __init__(self, grid: DyadicGrid, values):
        super().__init__(grid, np.asarray(values, dtype=np.complex128))
        dev = np.max(np.abs(np.abs(self.values) - 1.0)) if self.values.size else 0.0
        if dev > UNIT_MODULUS_TOL:
            raise ValidationError(f"values deviate from unit modulus by {dev:.3g}")

    @classmethod
    def from_phase(cls, phase: GridFunction) -> "CircleMap":
        return cls(phase.grid, np.exp(1j * np.real(phase.values)))

    @classmethod
    def of(cls, f: GridFunction) -> "CircleMap":
        if isinstance(f, CircleMap):
            return f
        return cls(f.grid, f.values)


# ---------------------------------------------------------------- sampling


def sample(fn: Callable[..., np.ndarray], grid: DyadicGrid, quadrature_order: int = 4) -> GridFunction:
    """Approximate cell averages of ``fn`` with a tensor Gauss-Legendre rule.

    ``fn`` is called as ``fn(x_1, ..., x_dim)`` with broadcastable coordinate
    arrays and must be vectorized.
    """
    if quadrature_order < 1:
        raise ValidationError("quadrature_order must be >= 1")
    nodes, weights = np.polynomial.legendre.leggauss(quadrature_order)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    base = np.arange(grid.n, dtype=float)
    acc = None
    for idx in product(range(quadrature_order), repeat=grid.dim):
        coords = []
        w = 1.0
        for a, i in enumerate(idx):
            shp = [1] * grid.dim
            shp[a] = grid.n
            coords.append(((base + nodes[i]) * grid.mesh).reshape(shp))
            w *= weights[i]
        val = np.broadcast_to(np.asarray(fn(*coords)), grid.shape)
        term = w * val
        acc = term.astype(np.result_type(term, float)) if acc is None else acc + term
    if not np.all(np.isfinite(acc)):
        raise NonFiniteSample("sampled closure returned non-finite values")
    return GridFunction(grid, acc)


def sample_points(fn: Callable[..., np.ndarray], grid: DyadicGrid) -> GridFunction:
    """Point values at cell centers (for integrands that cannot be averaged exactly)."""
    val = np.broadcast_to(np.asarray(fn(*grid.centers())), grid.shape)
    if not np.all(np.isfinite(val)):
        raise NonFiniteSample("sampled closure returned non-finite values")
    return GridFunction(grid, val)


# ---------------------------------------------------------------- differences


def shift(values: np.ndarray, offset: Sequence[int], periodic: bool, fill=0.0) -> np.ndarray:
    """``out[x] = values[x + offset]``; wraps on the torus, ``fill`` outside the cube."""
    if periodic:
        return np.roll(values, tuple(-int(o) for o in offset), axis=tuple(range(values.ndim)))
    out = np.full_like(values, fill)
    src, dst = [], []
    for o, n in zip(offset, values.shape):
        o = int(o)
        if abs(o) >= n:
            return out
        if o >= 0:
            src.append(slice(o, n))
            dst.append(slice(0, n - o))
        else:
            src.append(slice(0, n + o))
            dst.append(slice(-o, n))
    out[tuple(dst)] = values[tuple(src)]
    return out


def admissible_mask(shape: Sequence[int], offset: Sequence[int]) -> np.ndarray:
    """Cells ``x`` of the cube with ``x + offset`` still inside."""
    mask = np.ones(shape, dtype=bool)
    for a, (o, n) in enumerate(zip(offset, shape)):
        idx = np.arange(n)
        ok = (idx + int(o) >= 0) & (idx + int(o) < n)
        shp = [1] * len(shape)
        shp[a] = n
        mask &= ok.reshape(shp)
    return mask


def diff_values(values: np.ndarray, M: int, h: Sequence[int], periodic: bool) -> np.ndarray:
    out = np.zeros_like(values)
    for l in range(M + 1):
        coeff = math.comb(M, l) * (-1) ** (M - l)
        out = out + coeff * shift(values, [l * hi for hi in h], periodic)
    if not periodic:
        # x, x+h, ..., x+Mh inside <=> x and x+Mh inside
        out = np.where(admissible_mask(values.shape, [M * hi for hi in h]), out, 0)
    return out


def diff(f: GridFunction, M: int, h: Sequence[int] | int) -> GridFunction:
    """``M``-th order finite difference with offset ``h`` (in cells)."""
    if isinstance(h, (int, np.integer)):
        h = [int(h)] + [0] * (f.dim - 1)
    h = [int(x) for x in h]
    if len(h) != f.dim:
        raise ValidationError(f"offset has {len(h)} components, grid has dim {f.dim}")
    if not 1 <= M <= 8:
        raise ValidationError(f"difference order {M} outside [1, 8]")
    if all(x == 0 for x in h):
        raise ValidationError("offset must be nonzero")
    return f.replace(diff_values(f.values, M, h, f.grid.periodic))


# ---------------------------------------------------------------- dyadic averages


def coarsen(values: np.ndarray, j: int) -> np.ndarray:
    """Means over the dyadic cells of side ``2**-j``, shape ``(2**j,) * dim``.

    Averages pairs repeatedly so that constant blocks are reproduced bit-exactly.
    """
    out = values
    n = values.shape[0] if values.ndim else 1
    while n > (1 << j):
        for a in range(values.ndim):
            shp = out.shape[:a] + (n // 2, 2) + out.shape[a + 1 :]
            r = out.reshape(shp)
            first = np.take(r, 0, axis=a + 1)
            second = np.take(r, 1, axis=a + 1)
            out = (first + second) * 0.5
        n //= 2
    return out


def refine(coarse: np.ndarray, level: int) -> np.ndarray:
    """Piecewise-constant upsampling of a level-``j`` array to ``level``."""
    n = coarse.shape[0] if coarse.ndim else 1
    factor = (1 << level) // n
    out = coarse
    for a in range(coarse.ndim):
        out = np.repeat(out, factor, axis=a)
    return out


def dyadic_average(f: GridFunction, j: int) -> GridFunction:
    if not 0 <= j <= f.level:
        raise LevelOutOfRange(f"averaging level {j} outside [0, {f.level}]")
    if j == f.level:
        return f.replace(f.values)
    return f.replace(refine(coarsen(f.values, j), f.level))


# ---------------------------------------------------------------- mollification


@dataclass(frozen=True)
class _KernelKey:
    dim: int
    level: int
    eps: float


_KERNEL_CACHE: dict[_KernelKey, np.ndarray] = {}


def mollifier_kernel(dim: int, level: int, eps: float) -> np.ndarray:
    """Periodic kernel on the level-``level`` grid, normalized to unit discrete mass.

    ``rho(x) = exp(-1 / (1 - |x/eps|_inf**2))`` on ``|x|_inf < eps``.
    """
    key = _KernelKey(dim, level, float(eps))
    hit = _KERNEL_CACHE.get(key)
    if hit is not None:
        return hit
    n = 1 << level
    k = np.arange(n)
    k = np.minimum(k, n - k).astype(float) * 2.0**-level / eps  # wrapped |offset| / eps
    r = np.zeros((n,) * dim)
    sup = np.zeros((n,) * dim)
    for a in range(dim):
        shp = [1] * dim
        shp[a] = n
        sup = np.maximum(sup, k.reshape(shp))
    inside = sup < 1.0
    r[inside] = np.exp(-1.0 / (1.0 - sup[inside] ** 2))
    r /= r.sum()
    kf = np.fft.fftn(r)
    kf.setflags(write=False)
    if len(_KERNEL_CACHE) > 64:
        _KERNEL_CACHE.clear()
    _KERNEL_CACHE[key] = kf
    return kf


def mollify(f: GridFunction, eps: float) -> GridFunction:
    """Periodic convolution with the sup-norm bump of radius ``eps``."""
    if not f.grid.periodic:
        raise ValidationError("mollify requires a torus grid")
    if not (f.grid.mesh <= eps <= 0.25):
        raise EpsOutOfRange(f"eps={eps} outside [{f.grid.mesh}, 1/4]")
    kf = mollifier_kernel(f.dim, f.level, eps)
    out = np.fft.ifftn(np.fft.fftn(f.values) * kf)
    if not f.is_complex:
        out = out.real
    return f.replace(out)


# ---------------------------------------------------------------- slicing


def slice_at(f: GridFunction, fixed_axes: Sequence[int], cell_index: Sequence[int]) -> GridFunction:
    """Partial map obtained by freezing the axes in ``fixed_axes`` at ``cell_index``."""
    axes = [int(a) for a in fixed_axes]
    idx = [int(i) for i in cell_index]
    if not axes or len(set(axes)) != len(axes) or len(axes) >= f.dim:
        raise BadAxisSet(f"axes {axes} must be a proper nonempty subset of range({f.dim})")
    if any(a < 0 or a >= f.dim for a in axes) or len(idx) != len(axes):
        raise BadAxisSet(f"axes {axes} / indices {idx} do not match dim {f.dim}")
    if any(i < 0 or i >= f.grid.n for i in idx):
        raise BadAxisSet(f"cell index {idx} out of range")
    sl = [slice(None)] * f.dim
    for a, i in zip(axes, idx):
        sl[a] = i
    grid = make_grid(f.dim - len(axes), f.level, f.grid.domain)
    cls = CircleMap if isinstance(f, CircleMap) else GridFunction
    return cls(grid, np.array(f.values[tuple(sl)], copy=True))


def subcube(f: GridFunction, j: int, m: Sequence[int]) -> GridFunction:
    """The dyadic subcube ``2**-j * (m + [0,1)^n)``, rescaled to the unit cube."""
    if not 0 <= j <= f.level:
        raise LevelOutOfRange(f"subcube level {j} outside [0, {f.level}]")
    w = 1 << (f.level - j)
    sl = tuple(slice(int(mi) * w, (int(mi) + 1) * w) for mi in m)
    grid = make_grid(f.dim, f.level - j, Domain.CUBE)
    cls = CircleMap if isinstance(f, CircleMap) else GridFunction
    return cls(grid, np.array(f.values[sl], copy=True))


# ---------------------------------------------------------------- norms


def lp_norm(values: np.ndarray, p: float, grid: DyadicGrid) -> float:
    """``(sum |v|^p * cell_volume)^(1/p)`` on the grid."""
    a = np.abs(values)
    amax = float(a.max()) if a.size else 0.0
    if amax == 0.0:
        return 0.0
    return amax * (float(np.sum((a / amax) ** p)) * grid.cell_volume) ** (1.0 / p)
