"""Discrete Besov norms: finite differences, dyadic averages and Haar coefficients."""

from __future__ import annotations

import csv
import enum
import io
import math
import warnings
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable

import numpy as np

from .errors import (
    DeltaOutOfRange,
    DivisionByZeroSeminorm,
    MTooSmall,
    OutOfValidityRange,
    ValidationError,
)
from .grid import BesovParams, GridFunction, coarsen, lp_norm, lq_aggregate, refine


class Method(str, enum.Enum):
    DIFF = "diff"
    HAAR_AVG = "haar-avg"
    HAAR_COEFF = "haar-coeff"


@dataclass(frozen=True)
class LevelTerm:
    j: int
    term: float
    axis: int | None = None


@dataclass(frozen=True)
class NormReport:
    params: BesovParams
    levels: tuple[LevelTerm, ...]
    total: float
    method: Method
    equivalent: bool = True

    def aggregate(self) -> float:
        """Recompute the total from the level terms (ℓ^q per axis, summed over axes)."""
        groups: dict[int | None, list[float]] = {}
        for t in self.levels:
            groups.setdefault(t.axis, []).append(t.term)
        return sum(lq_aggregate(v, self.params.q, self.params.q_infinite) for v in groups.values())

    def to_json(self) -> dict:
        return {
            "method": self.method.value,
            "s": self.params.s,
            "p": self.params.p,
            "q": "inf" if self.params.q_infinite else self.params.q,
            "total": self.total,
            "equivalent": self.equivalent,
            "levels": [
                {"j": t.j, "term": t.term, **({} if t.axis is None else {"axis": t.axis})}
                for t in self.levels
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "term", "method", "s", "p", "q"])
        for t in self.levels:
            w.writerow(
                [t.j, _g17(t.term), self.method.value, _g17(self.params.s), _g17(self.params.p), self.params.q_label() if self.params.q_infinite else _g17(self.params.q)]
            )
        return buf.getvalue()


def _g17(x: float) -> str:
    return f"{x:.17g}"


def _check_validity(params: BesovParams, what: str) -> bool:
    if params.sp >= 1:
        warnings.warn(
            f"{what}: s*p = {params.sp:g} >= 1, the Haar characterization is not an equivalent norm",
            OutOfValidityRange,
            stacklevel=3,
        )
        return False
    return True


# ---------------------------------------------------------------- differences


def _axis_diff_power_sum(values: np.ndarray, M: int, k: int, axis: int, periodic: bool, p: float) -> float:
    """``sum_x |Delta^M_{k e_axis} f(x)|^p`` over admissible x (cube) or all x (torus)."""
    n = values.shape[axis]
    coeffs = [math.comb(M, l) * (-1) ** (M - l) for l in range(M + 1)]
    if periodic:
        acc = coeffs[0] * values
        for l in range(1, M + 1):
            acc = acc + coeffs[l] * np.roll(values, -l * k, axis=axis)
    else:
        span = n - M * k
        if span <= 0:
            return 0.0
        acc = None
        for l in range(M + 1):
            part = coeffs[l] * values.take(np.arange(l * k, l * k + span), axis=axis)
            acc = part if acc is None else acc + part
    if p == 2:
        a2 = acc.real**2 + acc.imag**2 if np.iscomplexobj(acc) else acc * acc
        return float(np.sum(a2))
    return float(np.sum(np.abs(acc) ** p))


def diff_seminorm(f: GridFunction, params: BesovParams, M: int = 1, delta: float = 1.0) -> NormReport:
    """Axis-wise finite-difference seminorm restricted to ``|h| <= delta``.

    Offsets are ``h = +-k 2^-J`` with ``k 2^-J <= delta``; the measure ``dh/|h|``
    becomes the weight ``1/k``.  Level terms group the offsets in dyadic bands
    ``2^m <= k < 2^(m+1)``, reported at level ``j = J - m``.
    """
    if not (M > params.s):
        raise MTooSmall(f"difference order M={M} must exceed s={params.s}")
    if not (0 < delta <= 1) or delta < f.grid.mesh:
        raise DeltaOutOfRange(f"delta={delta} outside [2^-J, 1]")
    J = f.level
    K = int(math.floor(delta * (1 << J)))
    vol = f.grid.cell_volume
    s, p = params.s, params.p
    levels: list[LevelTerm] = []
    total = 0.0
    for axis in range(f.dim):
        bands: dict[int, list[float]] = {}
        for k in range(1, K + 1):
            h = k * f.grid.mesh
            norm = (_axis_diff_power_sum(f.values, M, k, axis, f.grid.periodic, p) * vol) ** (1.0 / p)
            if params.q_infinite:
                val = h**-s * norm
            else:
                # both signs of h contribute the same norm; fold them into one term
                val = (2.0 / k) ** (1.0 / params.q) * h**-s * norm
            bands.setdefault(k.bit_length() - 1, []).append(val)
        terms = []
        for m in sorted(bands):
            t = lq_aggregate(bands[m], params.q, params.q_infinite)
            terms.append(t)
            levels.append(LevelTerm(J - m, t, axis))
        total += lq_aggregate(terms, params.q, params.q_infinite)
    return NormReport(params, tuple(levels), total, Method.DIFF)


# ---------------------------------------------------------------- dyadic averages


def pyramid(values: np.ndarray) -> list[np.ndarray]:
    """Coarse arrays ``E_0 f, ..., E_J f`` (each at its own resolution)."""
    J = int(round(math.log2(values.shape[0]))) if values.ndim else 0
    out = [values]
    cur = values
    for j in range(J - 1, -1, -1):
        cur = coarsen(cur, j)
        out.append(cur)
    return out[::-1]


def _level_lp(d: np.ndarray, p: float, j: int, dim: int) -> float:
    a = np.abs(d)
    amax = float(a.max()) if a.size else 0.0
    if amax == 0.0:
        return 0.0
    return amax * (float(np.sum((a / amax) ** p)) * 2.0 ** (-j * dim)) ** (1.0 / p)


def haar_average_terms(f: GridFunction, params: BesovParams) -> list[float]:
    """``2^{sj} ||E_j f - E_{j-1} f||_p`` for ``j = 0..J`` with ``E_{-1} = 0``."""
    pyr = pyramid(f.values)
    terms = []
    prev = None
    for j, c in enumerate(pyr):
        d = c if prev is None else c - refine(prev, j)
        terms.append(2.0 ** (params.s * j) * _level_lp(d, params.p, j, f.dim))
        prev = c
    return terms


def haar_average_norm(f: GridFunction, params: BesovParams) -> NormReport:
    ok = _check_validity(params, "haar_average_norm")
    terms = haar_average_terms(f, params)
    levels = tuple(LevelTerm(j, t) for j, t in enumerate(terms))
    total = lq_aggregate(terms, params.q, params.q_infinite)
    return NormReport(params, levels, total, Method.HAAR_AVG, equivalent=ok)


def haar_tail_norm(f: GridFunction, params: BesovParams) -> float:
    """Telescoping form ``(||f||_p^q + sum_j 2^{sjq} ||f - E_j f||_p^q)^{1/q}``.

    The leading ``||f||_p`` is the ``j = -1`` term under ``E_{-1} = 0``; without
    it constants would have zero norm on a bounded domain.
    """
    pyr = pyramid(f.values)
    J = f.level
    terms = [lp_norm(f.values, params.p, f.grid)]
    for j, c in enumerate(pyr):
        d = f.values - refine(c, J)
        terms.append(2.0 ** (params.s * j) * lp_norm(d, params.p, f.grid))
    return lq_aggregate(terms, params.q, params.q_infinite)


# ---------------------------------------------------------------- Haar coefficients


def _labels(dim: int, j: int) -> list[str]:
    labels = ["".join(g) for g in product("FM", repeat=dim)]
    if j > 0:
        labels.remove("F" * dim)
    return labels


def _butterfly(arr: np.ndarray) -> dict[str, np.ndarray]:
    bands = {"": arr}
    for axis in range(arr.ndim):
        nxt = {}
        for key, a in bands.items():
            even = a.take(np.arange(0, a.shape[axis], 2), axis=axis)
            odd = a.take(np.arange(1, a.shape[axis], 2), axis=axis)
            nxt[key + "F"] = even + odd
            nxt[key + "M"] = even - odd
        bands = nxt
    return bands


def _inverse_butterfly(bands: dict[str, np.ndarray], dim: int) -> np.ndarray:
    cur = dict(bands)
    for axis in range(dim - 1, -1, -1):
        nxt = {}
        for key in {k[:axis] for k in cur}:
            F, Mb = cur[key + "F"], cur[key + "M"]
            even = (F + Mb) * 0.5
            odd = (F - Mb) * 0.5
            shp = list(F.shape)
            shp[axis] *= 2
            out = np.empty(shp, dtype=np.result_type(even, odd))
            idx = [slice(None)] * F.ndim
            idx[axis] = slice(0, None, 2)
            out[tuple(idx)] = even
            idx[axis] = slice(1, None, 2)
            out[tuple(idx)] = odd
            nxt[key] = out
        cur = nxt
    return cur[""]


@dataclass(frozen=True)
class HaarCoefficients:
    """Haar expansion of a grid function.

    ``inner[(j, G)]`` holds the orthonormal coefficients ``<f, Psi^{j,G}_m>``
    indexed by position ``m``; :meth:`mu` applies the ``2^{j(s - n/p + n/2)}``
    weight for given ``(s, p)``.
    """

    dim: int
    level: int
    params: BesovParams
    inner: dict = field(repr=False)

    @property
    def level_max(self) -> int:
        return self.level

    def keys(self) -> list[tuple[int, str]]:
        return sorted(self.inner, key=lambda k: (k[0], k[1]))

    def weight(self, j: int, params: BesovParams | None = None) -> float:
        params = params or self.params
        n = self.dim
        return 2.0 ** (j * (params.s - n / params.p + n / 2))

    def mu(self, j: int, G: str, params: BesovParams | None = None) -> np.ndarray:
        return self.weight(j, params) * self.inner[(j, G)]

    def count(self, j: int) -> int:
        return sum(self.inner[(j, G)].size for G in _labels(self.dim, j) if (j, G) in self.inner)


def haar_coeff_decompose(f: GridFunction, params: BesovParams) -> HaarCoefficients:
    """Exact Haar transform up to level ``J - 1``."""
    n = f.dim
    integrals = f.values * f.grid.cell_volume
    inner: dict[tuple[int, str], np.ndarray] = {}
    for j in range(f.level - 1, -1, -1):
        bands = _butterfly(integrals)
        scale = 2.0 ** (n * j / 2)
        for G in _labels(n, j):
            inner[(j, G)] = scale * bands[G]
        integrals = bands["F" * n]
    if f.level == 0:
        inner[(0, "F" * n)] = integrals
    return HaarCoefficients(n, f.level, params, inner)


def haar_coeff_synthesize(c: HaarCoefficients, grid) -> GridFunction:
    n = c.dim
    integrals = c.inner[(0, "F" * n)]
    for j in range(0, c.level):
        scale = 2.0 ** (-n * j / 2)
        bands = {G: scale * c.inner[(j, G)] for G in _labels(n, j) if G != "F" * n}
        bands["F" * n] = integrals
        integrals = _inverse_butterfly(bands, n)
    return GridFunction(grid, integrals / grid.cell_volume)


def haar_coeff_norm(c: HaarCoefficients, params: BesovParams | None = None) -> NormReport:
    """``(sum_j sum_G (sum_m |mu|^p)^{q/p})^{1/q}`` (sup over ``j, G`` when q is infinite)."""
    params = params or c.params
    ok = _check_validity(params, "haar_coeff_norm")
    per_level: dict[int, list[float]] = {}
    flat: list[float] = []
    for j, G in c.keys():
        a = np.abs(c.mu(j, G, params))
        amax = float(a.max()) if a.size else 0.0
        val = 0.0 if amax == 0.0 else amax * float(np.sum((a / amax) ** params.p)) ** (1.0 / params.p)
        per_level.setdefault(j, []).append(val)
        flat.append(val)
    levels = tuple(
        LevelTerm(j, lq_aggregate(v, params.q, params.q_infinite)) for j, v in sorted(per_level.items())
    )
    total = lq_aggregate(flat, params.q, params.q_infinite)
    return NormReport(params, levels, total, Method.HAAR_COEFF, equivalent=ok)


# ---------------------------------------------------------------- diagnostics


def vmo_modulus(f: GridFunction, eps: float) -> float:
    """Largest mean oscillation over dyadic cubes of side ``<= eps``."""
    if eps < f.grid.mesh:
        raise ValidationError(f"eps={eps} below the mesh {f.grid.mesh}")
    J, n = f.level, f.dim
    jmin = max(0, int(math.ceil(-math.log2(eps) - 1e-12)))
    best = 0.0
    for j in range(jmin, J):
        w = 1 << (J - j)
        shp = []
        for _ in range(n):
            shp += [1 << j, w]
        blocks = f.values.reshape(shp)
        inner_axes = tuple(range(1, 2 * n, 2))
        means = blocks.mean(axis=inner_axes, keepdims=True)
        osc = np.abs(blocks - means).mean(axis=inner_axes)
        best = max(best, float(osc.max()))
    return best


def poincare_ratio(f: GridFunction, params: BesovParams, M: int = 1, delta: float = 1.0) -> float:
    """``||f - mean f||_p`` divided by :func:`diff_seminorm`."""
    semi = diff_seminorm(f, params, M, delta).total
    if semi == 0.0:
        raise DivisionByZeroSeminorm("seminorm vanishes (constant function)")
    return lp_norm(f.values - f.mean(), params.p, f.grid) / semi
