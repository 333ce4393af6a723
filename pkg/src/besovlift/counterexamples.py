"""Explicit constructions: the vortex, a greedy dyadic covering, a 2D function
whose rows leave the Besov space, and integer-valued step functions."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .besov import haar_average_norm
from .errors import CenterOnNode, LevelOutOfRange, SpecInvalid, SupportViolation, ValidationError
from .grid import (
    BesovParams,
    CircleMap,
    Domain,
    DyadicGrid,
    GridFunction,
    admissible_mask,
    make_grid,
    refine,
    shift,
    slice_at,
)

# ---------------------------------------------------------------- vortex


def default_vortex_center(grid: DyadicGrid) -> tuple[float, ...]:
    """Slightly off the middle node so that the core sits inside one plaquette."""
    return tuple(0.5 + grid.mesh / 4 for _ in range(grid.dim))


def vortex(grid: DyadicGrid, center: Sequence[float] | None = None) -> CircleMap:
    """``(x - c) / |x - c|`` sampled at cell centers."""
    if grid.dim != 2:
        raise ValidationError("the vortex is a 2D map")
    c = default_vortex_center(grid) if center is None else tuple(float(v) for v in center)
    if len(c) != 2:
        raise ValidationError("center needs two coordinates")
    h = grid.mesh
    tol = h / 4
    for ci in c:
        if not 0.0 < ci < 1.0:
            raise CenterOnNode(f"center coordinate {ci} not strictly inside (0, 1)")
        # distance to the nearest cell-center coordinate (k + 1/2) h
        frac = ci / h - 0.5
        dist = abs(frac - round(frac)) * h
        if dist < tol * (1 - 1e-12):
            raise CenterOnNode(f"center coordinate {ci} is {dist:.3g} from a sample line (< 2^-(J+2))")
    x, y = grid.centers()
    z = (x - c[0]) + 1j * (y - c[1])
    return CircleMap(grid, np.broadcast_to(z / np.abs(z), grid.shape))


def vortex_core_cell(grid: DyadicGrid, center: Sequence[float] | None = None) -> tuple[int, int]:
    """Index of the plaquette (lower-left cell) containing the core."""
    c = default_vortex_center(grid) if center is None else center
    return tuple(int(math.floor(ci / grid.mesh - 0.5)) for ci in c)


# ---------------------------------------------------------------- dyadic covering


@dataclass(frozen=True)
class DyadicInterval:
    """``[s / 2^j, t / 2^j]``; cells ``s..t`` carry the construction at level ``j``."""

    j: int
    s: int
    t: int
    degenerate: bool = False

    @property
    def left(self) -> float:
        return self.s / 2.0**self.j

    @property
    def right(self) -> float:
        return self.t / 2.0**self.j

    @property
    def length(self) -> float:
        return (self.t - self.s) / 2.0**self.j

    def covers(self, x: float) -> bool:
        return self.left <= x <= self.right

    def cells(self) -> range:
        """Integer translates inside ``[s, min(t, 2^j)]``."""
        return range(self.s, min(self.t, 1 << self.j) + 1)

    def to_json(self) -> dict:
        return {"j": self.j, "s": self.s, "t": self.t, "degenerate": self.degenerate}


def default_u(t: float) -> Callable[[int], float]:
    return lambda j: 1.0 / (j ** (1.0 / t) * math.log(j))


def default_v(j: int) -> float:
    return 1.0 / math.log(math.log(j + 16))


def tempseq(u_seq, v_seq, J: int, j0: int = 4) -> list[DyadicInterval]:
    """Greedy chain of dyadic intervals with lengths at most ``v_j u_j``.

    ``u_seq`` and ``v_seq`` are callables of ``j`` or sequences indexed from
    ``j0``.  Each interval starts where the previous one ended (same point,
    refined to the next level) unless that endpoint reached 1, in which case
    it restarts at 0.
    """

    def at(seq, j):
        return float(seq(j)) if callable(seq) else float(seq[j - j0])

    if J < j0:
        raise LevelOutOfRange(f"J={J} < j0={j0}")
    out: list[DyadicInterval] = []
    s = 0
    for j in range(j0, J + 1):
        budget = at(v_seq, j) * at(u_seq, j)
        if not budget > 0:
            raise ValidationError(f"budget at level {j} must be positive")
        width = int(math.floor(budget * 2.0**j))
        t = s + width
        out.append(DyadicInterval(j, s, t, degenerate=width == 0))
        s = 0 if t >= (1 << j) else 2 * t
    return out


def coverage_counts(intervals: Iterable[DyadicInterval], points: Sequence[float]) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    cnt = np.zeros(pts.shape, dtype=np.int64)
    for L in intervals:
        cnt += (pts >= L.left) & (pts <= L.right)
    return cnt


# ---------------------------------------------------------------- non-restriction


# Haar instantiation: psi_M >= gamma = 1 on [alpha, beta] = [0, 1/2]
A_STRIP = 1
DELTA = 0.5
N_BLOCKS = 1
GAMMA = 1.0
# the construction is shrunk by 4 into the unit square; block l sits at
# x = X/4 + 3/8 and y = Y/4 + Y_OFFSET[l]/4
SCALE_LEVELS = 2
X_OFFSET = 1.5
Y_OFFSET = {-1: 0.25, 0: 1.5, 1: 2.75}
EXTRA_LEVELS = 3


@dataclass(frozen=True)
class NonrestrictionSpec:
    """Parameters of the non-restriction construction.

    ``log_power`` is the exponent of ``ln j`` in the amplitude; the default 1
    gives a convergent global series only for ``q > p``, while ``q = p`` needs
    ``log_power > 1`` (the contrast instance).
    """

    params: BesovParams
    J: int
    j0: int = 4
    log_power: float = 1.0

    def __post_init__(self):
        p, s = self.params.p, self.params.s
        if self.params.q_infinite:
            raise SpecInvalid("q must be finite")
        q = self.params.q
        if q < p or (q == p and not self.log_power > 1):
            raise SpecInvalid(f"need p < q (or q = p with log_power > 1), got p={p}, q={q}")
        if self.params.sp >= 1:
            raise SpecInvalid(f"need s*p < 1, got {self.params.sp}")
        if self.j0 < 4:
            raise SpecInvalid("j0 must be at least 4 for the strips to stay disjoint")
        if self.J < self.j0:
            raise SpecInvalid(f"J={self.J} < j0={self.j0}")

    @property
    def t(self) -> float:
        return self.params.q / self.params.p

    @property
    def grid_level(self) -> int:
        """Finest level on which the construction is exactly piecewise constant."""
        return self.J + SCALE_LEVELS + 1

    def u(self, j: int) -> float:
        return 1.0 / (j ** (1.0 / self.t) * math.log(j))

    def v(self, j: int) -> float:
        return default_v(j)

    def intervals(self) -> list[DyadicInterval]:
        return tempseq(self.u, self.v, self.J, self.j0)

    def mu(self, j: int, count: int) -> float:
        return (count * j ** (1.0 / self.t) * math.log(j) ** self.log_power) ** (-1.0 / self.params.p)

    def levels(self) -> list[tuple[DyadicInterval, float]]:
        return [(L, self.mu(L.j, len(L.cells()))) for L in self.intervals()]

    def amplitude(self, j: int, mu: float) -> float:
        """Height of the level-``j`` wavelets after the shrink by ``2^-SCALE_LEVELS``."""
        s, p = self.params.s, self.params.p
        return mu * 2.0 ** (-(j + SCALE_LEVELS) * (s - 2.0 / p))

    def strips(self) -> dict[int, tuple[tuple[float, float], tuple[float, float]]]:
        """Bounding box ``((x0, x1), (y0, y1))`` of each block."""
        out = {}
        for l in range(-N_BLOCKS, N_BLOCKS + 1):
            lo, hi = math.inf, -math.inf
            for L in self.intervals():
                cells = L.cells()
                if not cells:
                    continue
                lo = min(lo, (cells[0] + l * DELTA) / 2.0**L.j)
                hi = max(hi, (cells[-1] + 1 + l * DELTA) / 2.0**L.j)
            out[l] = ((lo + X_OFFSET) / 4, (hi + X_OFFSET) / 4), ((lo + Y_OFFSET[l]) / 4, (hi + Y_OFFSET[l]) / 4)
        return out

    def check_support(self) -> None:
        boxes = self.strips()
        for l, ((x0, x1), (y0, y1)) in boxes.items():
            if not (0 <= x0 and x1 <= 1 and 0 <= y0 and y1 <= 1):
                raise SupportViolation(f"block {l} leaves the unit square")
        ys = sorted(b[1] for b in boxes.values())
        for (a0, a1), (b0, b1) in zip(ys, ys[1:]):
            if b0 < a1:
                raise SupportViolation("block strips overlap")

    def global_terms(self) -> list[float]:
        """``(#I_j mu_j^p)^{q/p}`` per level."""
        p, r = self.params.p, self.t
        return [(len(L.cells()) * mu**p) ** r for L, mu in self.levels()]

    def to_json(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "J": self.J,
            "j0": self.j0,
            "log_power": self.log_power,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, d) -> "NonrestrictionSpec":
        if isinstance(d, str):
            d = json.loads(d)
        try:
            return cls(BesovParams.from_dict(d["params"]), int(d["J"]), int(d.get("j0", 4)), float(d.get("log_power", 1.0)))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SpecInvalid):
                raise
            raise SpecInvalid(f"malformed spec: {exc}") from exc

    def with_J(self, J: int) -> "NonrestrictionSpec":
        return NonrestrictionSpec(self.params, J, self.j0, self.log_power)


def nonrestriction(spec: NonrestrictionSpec, grid: DyadicGrid | None = None, blocks: Sequence[int] = (-1, 0, 1)) -> GridFunction:
    """Sum of diagonal wavelet chains, one chain per level ``j0..J`` and per block.

    Block ``l`` holds ``A_j * sum_{m in I_j} psi(2^j X - m - l delta) psi(2^j Y - m - l delta)``
    in its local coordinates; only the ``l = 0`` block is aligned with the
    dyadic grid at level ``j + 2``.
    """
    if grid is None:
        grid = make_grid(2, spec.grid_level, Domain.CUBE)
    if grid.dim != 2:
        raise ValidationError("nonrestriction lives on a 2D grid")
    if grid.level < spec.grid_level:
        raise LevelOutOfRange(f"grid level {grid.level} < {spec.grid_level} needed for exact representation")
    spec.check_support()
    L = grid.level
    out = np.zeros(grid.shape)
    for I, mu in spec.levels():
        j = I.j
        A = spec.amplitude(j, mu)
        # offsets in units of 2^-(j+3) so that the half shift delta is an integer
        unit = 1 << (L - j - SCALE_LEVELS - 1)
        for l in blocks:
            for m in I.cells():
                x0 = (2 * m + l) * unit + int(X_OFFSET * (1 << (L - 2)))
                y0 = (2 * m + l) * unit + int(Y_OFFSET[l] * (1 << (L - 2)))
                xp, xm = slice(x0, x0 + unit), slice(x0 + unit, x0 + 2 * unit)
                yp, ym = slice(y0, y0 + unit), slice(y0 + unit, y0 + 2 * unit)
                out[xp, yp] += A
                out[xm, ym] += A
                out[xp, ym] -= A
                out[xm, yp] -= A
    return GridFunction(grid, out)


def _psi(t: np.ndarray) -> np.ndarray:
    return np.where((t >= 0) & (t < 0.5), 1.0, np.where((t >= 0.5) & (t < 1), -1.0, 0.0))


def nonrestriction_row(spec: NonrestrictionSpec, x: float, level: int, blocks: Sequence[int] = (-1, 0, 1)) -> GridFunction:
    """The row ``y -> f(x, y)`` on a 1D grid of the given level."""
    if level < spec.grid_level:
        raise LevelOutOfRange(f"row level {level} < {spec.grid_level} needed for exact representation")
    grid = make_grid(1, level, Domain.CUBE)
    X = 4.0 * x - X_OFFSET
    out = np.zeros(grid.shape)
    for I, mu in spec.levels():
        j = I.j
        A = spec.amplitude(j, mu)
        unit = 1 << (level - j - SCALE_LEVELS - 1)
        for l in blocks:
            tx = 2.0**j * X - l * DELTA
            m = int(math.floor(tx))
            if m not in I.cells():
                continue
            sx = float(_psi(np.array(tx - m)))
            if sx == 0.0:
                continue
            y0 = (2 * m + l) * unit + int(Y_OFFSET[l] * (1 << (level - 2)))
            out[y0 : y0 + unit] += A * sx
            out[y0 + unit : y0 + 2 * unit] -= A * sx
    return GridFunction(grid, out)


def global_series_terms(spec: NonrestrictionSpec) -> list[float]:
    """Closed form of the per-level terms: ``1 / (j (ln j)^{kappa t})``."""
    c = spec.log_power * spec.t
    return [1.0 / (j * math.log(j) ** c) for j in range(spec.j0, spec.J + 1)]


def global_series_total(spec: NonrestrictionSpec, cutoff: int = 10**6) -> float:
    """Infinite sum of :func:`global_series_terms` (partial sum plus Euler-Maclaurin tail)."""
    c = spec.log_power * spec.t
    if not c > 1:
        return math.inf
    j = np.arange(spec.j0, cutoff + 1, dtype=float)
    head = math.fsum((1.0 / (j * np.log(j) ** c)).tolist())
    N = float(cutoff)
    f = lambda x: 1.0 / (x * math.log(x) ** c)
    df = -(math.log(N) + c) / (N * N * math.log(N) ** (c + 1))
    tail = math.log(N) ** (1 - c) / (c - 1) - f(N) / 2 - df / 12
    return head + tail


def global_tail_fraction(spec: NonrestrictionSpec) -> float:
    """Share of the infinite series lying beyond level ``spec.J``."""
    total = global_series_total(spec)
    return 1.0 - math.fsum(global_series_terms(spec)) / total


# ---------------------------------------------------------------- restriction scan


@dataclass(frozen=True)
class ScanRow:
    row: float
    J: int
    running_sup: float


def row_statistic(row: GridFunction, params: BesovParams) -> float:
    """``sup_j 2^{js} ||E_j - E_{j-1}||_p`` of a 1D function."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return haar_average_norm(row, params.with_q("inf")).total


def restriction_scan(f, params: BesovParams, rows: Sequence, J: int | None = None) -> list[ScanRow]:
    """Row statistics of a 2D function.

    ``f`` is either a 2D :class:`GridFunction` (``rows`` are x cell indices) or
    a callable returning the 1D row for each entry of ``rows``.
    """
    out = []
    if isinstance(f, GridFunction):
        if f.dim != 2:
            raise ValidationError("restriction_scan needs a 2D function")
        for r in rows:
            if not 0 <= int(r) < f.grid.n:
                raise ValidationError(f"row {r} outside the grid")
            row = slice_at(f, (0,), (int(r),))
            out.append(ScanRow(int(r), f.level if J is None else J, row_statistic(row, params)))
        return out
    for r in rows:
        row = f(r)
        out.append(ScanRow(r, row.level if J is None else J, row_statistic(row, params)))
    return out


def scan_rows_x(count: int) -> list[float]:
    """Physical abscissae spread over the construction window, away from dyadic points."""
    phi = (math.sqrt(5) - 1) / 2
    return [X_OFFSET / 4 + (k + phi) / (4 * count) for k in range(count)]


def nonrestriction_scan(spec: NonrestrictionSpec, Js: Sequence[int], rows_x: Sequence[float]) -> list[ScanRow]:
    """Row statistics of the construction truncated at each ``J`` in ``Js``."""
    out = []
    for J in Js:
        sj = spec.with_J(J)
        src = lambda x, sj=sj: nonrestriction_row(sj, x, sj.grid_level)
        out.extend(restriction_scan(src, spec.params, rows_x, J))
    return out


def median_by_J(table: Iterable[ScanRow]) -> dict[int, float]:
    groups: dict[int, list[float]] = {}
    for r in table:
        groups.setdefault(r.J, []).append(r.running_sup)
    return {J: float(np.median(v)) for J, v in sorted(groups.items())}


def scan_to_csv(table: Iterable[ScanRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "J", "running_sup"])
    for r in table:
        w.writerow([r.row if isinstance(r.row, int) else f"{r.row:.17g}", r.J, f"{r.running_sup:.17g}"])
    return buf.getvalue()


# ---------------------------------------------------------------- step functions


def step_function(grid: DyadicGrid, coarse) -> GridFunction:
    """Integer-valued function constant on the cells of a coarse dyadic grid.

    ``coarse`` is an integer array of shape ``(2^j,) * dim`` with ``j <= level``.
    """
    arr = np.asarray(coarse)
    if arr.ndim != grid.dim or len(set(arr.shape)) != 1:
        raise ValidationError(f"coarse values must be a cube array of dimension {grid.dim}")
    n = arr.shape[0]
    j = n.bit_length() - 1
    if n != 1 << j or j > grid.level:
        raise ValidationError(f"coarse side {n} is not a power of two <= 2^{grid.level}")
    if not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValidationError("step function values must be integers")
    return GridFunction(grid, refine(arr.astype(np.float64), grid.level))


def half_indicator(grid: DyadicGrid) -> GridFunction:
    """``1_{[0, 1/2)}`` in the first coordinate."""
    shape = (2,) + (1,) * (grid.dim - 1)
    coarse = np.broadcast_to(np.array([1, 0]).reshape(shape), (2,) * grid.dim)
    return step_function(grid, coarse)


def random_step_function(grid: DyadicGrid, rng: np.random.Generator, coarse_level: int, low: int = -3, high: int = 3) -> GridFunction:
    coarse = rng.integers(low, high + 1, size=(1 << coarse_level,) * grid.dim)
    return step_function(grid, coarse)


@dataclass(frozen=True)
class DominationResult:
    passed: bool
    violation: tuple[int, ...] | None = None
    lhs: float | None = None
    rhs: float | None = None


def second_diff_domination_check(g: GridFunction, h: int) -> DominationResult:
    """Check ``|Delta^2_h g(x)| >= |Delta_{2h} 1_{g in 2Z}(x)|`` at every admissible ``x``."""
    if g.dim != 1:
        raise ValidationError("domination check is one-dimensional")
    v = g.values
    if g.is_complex or not np.all(np.equal(np.mod(v, 1), 0)):
        raise ValidationError("g must be integer-valued")
    h = int(h)
    if h == 0:
        raise ValidationError("offset must be nonzero")
    per = g.grid.periodic
    ev = (np.mod(v, 2) == 0).astype(np.float64)
    lhs = np.abs(v - 2 * shift(v, [h], per) + shift(v, [2 * h], per))
    rhs = np.abs(shift(ev, [2 * h], per) - ev)
    mask = np.ones(v.shape, bool) if per else admissible_mask(v.shape, [2 * h])
    bad = mask & (lhs < rhs)
    if bad.any():
        i = int(np.argmax(bad))
        return DominationResult(False, (i,), float(lhs[i]), float(rhs[i]))
    return DominationResult(True)
