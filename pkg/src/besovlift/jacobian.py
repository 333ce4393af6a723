"""Discrete distributional Jacobian of circle-valued grid maps.

Edge increments are principal values, so the circulation around each
plaquette is an integer multiple of 2 pi and the Jacobian is a sum of point
masses ``pi * winding`` at plaquette centers.  Orientation: the plaquette in the
``(a, b)`` plane (``a < b``) spanned by cells ``x, x+e_a, x+e_a+e_b, x+e_b`` is
traversed in that order.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from .errors import BadAxisSet, SupportViolation, ValidationError
from .grid import CircleMap, DyadicGrid, GridFunction, slice_at
from .phase import check_degenerate, increments, to_winding

# sign of dx^j ^ dx^k ^ dx^alpha relative to dx^1 ^ dx^2 ^ dx^3, {j, k} the complement of alpha
EPSILON = {(0,): 1, (1,): -1, (2,): 1}


def _as_circle(u) -> CircleMap:
    return u if isinstance(u, CircleMap) else CircleMap.of(u)


def _edge_field(u: CircleMap, a: int) -> np.ndarray:
    """Grid-shaped principal increments along axis ``a`` (zero past the cube boundary)."""
    inc = increments(u.values, a, u.grid.periodic)
    check_degenerate(inc, a, u.values.shape)
    if u.grid.periodic:
        return inc
    pad = [(0, 0)] * u.dim
    pad[a] = (0, 1)
    return np.pad(inc, pad)


def uwedge_grad(u: CircleMap) -> list[GridFunction]:
    """Edge-based ``u ^ grad u``: component ``a`` at cell ``x`` is the increment to ``x + e_a`` over ``h``."""
    u = _as_circle(u)
    inv_h = float(1 << u.level)
    return [GridFunction(u.grid, _edge_field(u, a) * inv_h) for a in range(u.dim)]


# ---------------------------------------------------------------- windings


@dataclass(frozen=True)
class WindingField:
    """Integer winding per plaquette, one lattice per axis pair ``(a, b)``."""

    grid: DyadicGrid
    pairs: dict

    def __getitem__(self, pair) -> np.ndarray:
        return self.pairs[tuple(pair)]

    def is_zero(self) -> bool:
        return all(not np.any(w) for w in self.pairs.values())

    def total(self) -> int:
        return int(sum(int(np.abs(w).sum()) for w in self.pairs.values()))

    def nonzero(self):
        """``(pair, index, winding)`` for every nonzero plaquette."""
        for pair in sorted(self.pairs):
            w = self.pairs[pair]
            for idx in zip(*np.nonzero(w)):
                yield pair, tuple(int(i) for i in idx), int(w[idx])

    def to_csv(self, nonzero_only: bool = False) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["pair"] + [f"i{k}" for k in range(self.grid.dim)] + ["winding"])
        for pair in sorted(self.pairs):
            w = self.pairs[pair]
            label = "".join(str(a) for a in pair)
            if nonzero_only:
                it = zip(*np.nonzero(w))
            else:
                it = np.ndindex(w.shape)
            for idx in it:
                wr.writerow([label, *(int(i) for i in idx), int(w[idx])])
        return buf.getvalue()


def _plaquette_sum(u: CircleMap, a: int, b: int) -> np.ndarray:
    """Counterclockwise sum of principal increments around each ``(a, b)`` plaquette."""
    per = u.grid.periodic
    da = increments(u.values, a, per)
    db = increments(u.values, b, per)
    check_degenerate(da, a, u.values.shape)
    check_degenerate(db, b, u.values.shape)
    if per:
        return da + np.roll(db, -1, axis=a) - np.roll(da, -1, axis=b) - db
    na, nb = u.values.shape[a], u.values.shape[b]
    # da has n-1 entries along a; db has n-1 entries along b
    da_lo = da.take(np.arange(0, nb - 1), axis=b)
    da_hi = da.take(np.arange(1, nb), axis=b)
    db_lo = db.take(np.arange(0, na - 1), axis=a)
    db_hi = db.take(np.arange(1, na), axis=a)
    return da_lo + db_hi - da_hi - db_lo


def plaquette_winding(u: CircleMap) -> WindingField:
    u = _as_circle(u)
    pairs = {}
    for a, b in combinations(range(u.dim), 2):
        pairs[(a, b)] = np.asarray(to_winding(_plaquette_sum(u, a, b)), dtype=np.int64)
    return WindingField(u.grid, pairs)


# ---------------------------------------------------------------- test forms


@dataclass(frozen=True)
class TestForm:
    """Form of degree ``n - 2``: one coefficient per increasing multi-index ``alpha``.

    For ``n = 2`` the single key is ``()``; for ``n = 3`` the keys are ``(0,)``,
    ``(1,)`` and ``(2,)``.
    """

    __test__ = False  # not a pytest class

    grid: DyadicGrid
    coeffs: dict

    @classmethod
    def scalar(cls, zeta: GridFunction) -> "TestForm":
        if zeta.dim != 2:
            raise ValidationError("a scalar test form needs a 2D grid")
        return cls(zeta.grid, {(): zeta})

    @classmethod
    def pure(cls, alpha, zeta: GridFunction) -> "TestForm":
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != zeta.dim - 2 or list(alpha) != sorted(set(alpha)) or any(not 0 <= a < zeta.dim for a in alpha):
            raise BadAxisSet(f"alpha={alpha} is not an increasing index set of size {zeta.dim - 2}")
        return cls(zeta.grid, {alpha: zeta})

    @classmethod
    def from_function(cls, fn, grid: DyadicGrid, alpha=None) -> "TestForm":
        """Sample ``fn`` at cell centers."""
        vals = fn(*grid.centers())
        g = GridFunction(grid, np.broadcast_to(vals, grid.shape))
        if grid.dim == 2:
            return cls.scalar(g)
        return cls.pure(alpha, g)

    def combine(self, a: float, other: "TestForm", b: float) -> "TestForm":
        keys = set(self.coeffs) | set(other.coeffs)
        out = {}
        for k in keys:
            v = np.zeros(self.grid.shape)
            if k in self.coeffs:
                v = v + a * self.coeffs[k].values
            if k in other.coeffs:
                v = v + b * other.coeffs[k].values
            out[k] = GridFunction(self.grid, v)
        return TestForm(self.grid, out)


def _check_support(zeta: TestForm) -> None:
    if zeta.grid.periodic:
        return
    for alpha, g in zeta.coeffs.items():
        v = g.values
        for a in range(v.ndim):
            if np.any(v.take(0, axis=a)) or np.any(v.take(-1, axis=a)):
                raise SupportViolation(f"test form component {alpha} is nonzero on boundary cells")


def _plaquette_center_values(z: np.ndarray, a: int, b: int, periodic: bool) -> np.ndarray:
    """Average of the four cells around each ``(a, b)`` plaquette."""
    if periodic:
        za = np.roll(z, -1, axis=a)
        return 0.25 * (z + za + np.roll(z, -1, axis=b) + np.roll(za, -1, axis=b))
    na, nb = z.shape[a], z.shape[b]
    z0 = z.take(np.arange(0, na - 1), axis=a)
    z1 = z.take(np.arange(1, na), axis=a)
    lo_b, hi_b = np.arange(0, nb - 1), np.arange(1, nb)
    return 0.25 * (z0.take(lo_b, axis=b) + z1.take(lo_b, axis=b) + z0.take(hi_b, axis=b) + z1.take(hi_b, axis=b))


def _exact_weighted(w: np.ndarray, zc: np.ndarray) -> Fraction:
    """``sum w * zc`` in exact arithmetic over the nonzero windings."""
    idx = np.nonzero(w)
    tot = Fraction(0)
    for wi, zi in zip(w[idx].tolist(), zc[idx].tolist()):
        tot += wi * Fraction(zi)
    return tot


def _singular_2d(wf: WindingField, z: np.ndarray) -> Fraction:
    return _exact_weighted(wf[(0, 1)], _plaquette_center_values(z, 0, 1, wf.grid.periodic))


def _centered(z: np.ndarray, a: int, periodic: bool, h: float) -> np.ndarray:
    if periodic:
        return (np.roll(z, -1, axis=a) - np.roll(z, 1, axis=a)) / (2 * h)
    pad = [(0, 0)] * z.ndim
    pad[a] = (1, 1)
    zp = np.pad(z, pad)
    n = z.shape[a]
    return (zp.take(np.arange(2, n + 2), axis=a) - zp.take(np.arange(0, n), axis=a)) / (2 * h)


def _direct_2d(u: CircleMap, z: np.ndarray) -> float:
    """``-(1/2) sum h^2 (d_1 zeta F_2 - d_2 zeta F_1)``.

    ``zeta`` is differentiated by centered differences at cell centers and each
    ``F_a`` is the edge increment leaving the cell, so the two evaluators differ
    by a staggering error of order ``h``.
    """
    h = u.grid.mesh
    per = u.grid.periodic
    F1 = _edge_field(u, 0) / h
    F2 = _edge_field(u, 1) / h
    z1 = _centered(z, 0, per, h)
    z2 = _centered(z, 1, per, h)
    return -0.5 * h * h * math.fsum((z1 * F2 - z2 * F1).ravel().tolist())


@dataclass(frozen=True)
class Pairing:
    direct: float
    singular: float

    def to_json(self) -> dict:
        return {"direct": self.direct, "singular": self.singular, "gap": abs(self.direct - self.singular)}


def _slices(u: GridFunction, axis: int):
    for i in range(u.grid.n):
        yield i, slice_at(u, (axis,), (i,))


def pair_jacobian(u: CircleMap, zeta: TestForm) -> Pairing:
    """``<Ju, zeta>`` by two evaluators.

    ``direct`` discretizes ``-(1/2) int grad zeta ^ (u ^ grad u)`` with centered
    differences of ``zeta`` and the edge increments leaving each cell; ``singular`` is
    ``pi * sum winding * zeta(plaquette center)``.  In 3D each pure component
    ``zeta^alpha dx^alpha`` contributes ``eps(alpha) * h`` times the planar
    pairing of every slice transverse to ``alpha``.
    """
    u = _as_circle(u)
    if zeta.grid.shape != u.grid.shape or zeta.grid.domain != u.grid.domain:
        raise ValidationError("test form and map live on different grids")
    _check_support(zeta)
    if u.dim == 2:
        z = zeta.coeffs[()].values
        wf = plaquette_winding(u)
        return Pairing(_direct_2d(u, z), math.pi * float(_singular_2d(wf, z)))
    if u.dim != 3:
        raise ValidationError("pairing is implemented for n = 2 and n = 3")
    h = u.grid.mesh
    wf = plaquette_winding(u)
    direct = 0.0
    exact = Fraction(0)
    for alpha, g in sorted(zeta.coeffs.items()):
        (ax,) = alpha
        j, k = [a for a in range(3) if a != ax]
        zc = _plaquette_center_values(g.values, j, k, u.grid.periodic)
        exact += EPSILON[alpha] * _exact_weighted(wf[(j, k)], zc)
        part = 0.0
        for i, us in _slices(u, ax):
            zs = slice_at(g, (ax,), (i,)).values
            part += _direct_2d(us, zs)
        direct += EPSILON[alpha] * h * part
    return Pairing(direct, math.pi * h * float(exact))


def disintegrate_check(u: CircleMap, zeta: TestForm, alpha=None) -> tuple[float, float]:
    """Compare the 3D singular pairing with the slice-by-slice planar pairings.

    ``lhs`` uses the plaquettes of the 3D winding field transverse to
    ``alpha``; ``rhs`` slices ``u`` and ``zeta^alpha`` along ``alpha``, recomputes
    the planar windings on each slice and sums ``eps(alpha) 2^-J`` times the
    planar pairings.  Both are exact rational sums rounded once.
    """
    u = _as_circle(u)
    if u.dim != 3:
        raise ValidationError("disintegration needs a 3D map")
    if alpha is None:
        if len(zeta.coeffs) != 1:
            raise ValidationError("test form is not pure; pass alpha")
        (alpha,) = zeta.coeffs
    alpha = tuple(alpha)
    if alpha not in EPSILON or alpha not in zeta.coeffs:
        raise BadAxisSet(f"alpha={alpha} is not a component of the test form")
    _check_support(zeta)
    g = zeta.coeffs[alpha]
    (ax,) = alpha
    j, k = [a for a in range(3) if a != ax]
    h = u.grid.mesh
    wf = plaquette_winding(u)
    zc = _plaquette_center_values(g.values, j, k, u.grid.periodic)
    lhs = math.pi * h * float(EPSILON[alpha] * _exact_weighted(wf[(j, k)], zc))
    acc = Fraction(0)
    for i, us in _slices(u, ax):
        zs = slice_at(g, (ax,), (i,)).values
        acc += _singular_2d(plaquette_winding(us), zs)
    rhs = math.pi * h * float(EPSILON[alpha] * acc)
    return lhs, rhs
