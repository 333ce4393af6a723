"""Lifting circle-valued grid maps to real phases.

Three constructions are provided:

* :func:`lift_dyadic` walks the dyadic average pyramid and normalizes each
  level, choosing at each level the phase closest to the coarser one.
* :func:`lift_mollifier` mollifies at a ladder of scales where the modulus of
  the average stays above 1/2 and follows the phase continuously in the scale.
* :func:`lift_continuous` integrates principal increments along a spanning
  tree of the cell graph and reports a loop of nonzero winding if one exists.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order

from .besov import haar_average_norm, pyramid
from .errors import DegenerateEdge, EpsOutOfRange, ModulusCollapse, ObstructionDetected, ValidationError
from .grid import BesovParams, CircleMap, GridFunction, mollify, refine
from .phase import (
    DEGENERATE_GAP,
    TWO_PI,
    check_degenerate,
    checked_increments,
    increments,
    nearest_phase,
    principal_angle,
    to_winding,
)

__all__ = [
    "LiftResult",
    "ObstructionWitness",
    "nearest_phase",
    "axis_windings",
    "lift_dyadic",
    "lift_mollifier",
    "lift_continuous",
    "residual",
]


@dataclass(frozen=True)
class ObstructionWitness:
    """Closed loop of cells (last cell adjacent to the first) and its winding."""

    loop: tuple[tuple[int, ...], ...]
    winding: int

    def to_json(self) -> dict:
        return {"loop": [list(c) for c in self.loop], "winding": self.winding}


@dataclass(frozen=True)
class LadderStep:
    eps: float
    min_modulus: float
    used: bool


@dataclass(frozen=True)
class LiftResult:
    phase: GridFunction
    axis_windings: tuple[int, ...] | None
    residual: float
    method: str
    level_increments: tuple[float, ...] = ()
    norm_ratio: float | None = None
    ladder: tuple[LadderStep, ...] = ()
    delta: float | None = None
    flags: tuple[str, ...] = field(default_factory=tuple)

    def to_json(self) -> dict:
        out = {
            "method": self.method,
            "residual": self.residual,
            "axis_windings": None if self.axis_windings is None else list(self.axis_windings),
            "norm_ratio": self.norm_ratio,
            "increments": list(self.level_increments),
        }
        if self.ladder:
            out["ladder"] = [
                {"eps": st.eps, "min_modulus": st.min_modulus, "used": st.used} for st in self.ladder
            ]
            out["delta"] = self.delta
        if self.flags:
            out["flags"] = list(self.flags)
        return out


def residual(phase: np.ndarray, u: np.ndarray) -> float:
    """``max |e^{i phi} conj(u) - 1|``."""
    return float(np.max(np.abs(np.exp(1j * phase) * np.conj(u) - 1.0)))


def _as_circle(u) -> CircleMap:
    if isinstance(u, CircleMap):
        return u
    if isinstance(u, GridFunction):
        return CircleMap.of(u)
    raise ValidationError("expected a CircleMap")


# ---------------------------------------------------------------- windings


def axis_windings(u: CircleMap) -> tuple[int, ...]:
    """Degree of ``u`` along each coordinate loop through cell 0 (torus only)."""
    u = _as_circle(u)
    if not u.grid.periodic:
        raise ValidationError("axis windings are defined on the torus only")
    out = []
    for a in range(u.dim):
        idx = [0] * u.dim
        idx[a] = slice(None)
        line = u.values[tuple(idx)]
        inc = checked_increments(line, 0, True)
        out.append(to_winding(math.fsum(inc.tolist())))
    return tuple(out)


def _try_axis_windings(u: CircleMap) -> tuple[int, ...] | None:
    if not u.grid.periodic:
        return None
    try:
        return axis_windings(u)
    except DegenerateEdge:
        return None


# ---------------------------------------------------------------- dyadic


def _normalize(e: np.ndarray) -> np.ndarray:
    mod = np.abs(e)
    out = np.ones_like(e)
    nz = mod > 0
    out[nz] = e[nz] / mod[nz]
    return out


def lift_dyadic(u: CircleMap, params: BesovParams | None = None) -> LiftResult:
    """Phase built level by level from normalized dyadic averages.

    ``U_j = E_j u / |E_j u|`` (or 1 where the average vanishes).  The level-0
    phase is the principal one; each finer level takes the phase of ``U_j``
    nearest to the refined coarser phase, written as the principal angle of
    ``U_j conj(U_{j-1})`` so that identical cells keep their phase bit for bit.
    """
    u = _as_circle(u)
    levels = dyadic_phase_levels(u)
    incs = [
        float(np.max(np.abs(phi - refine(prev, j))))
        for j, ((_, prev), (_, phi)) in enumerate(zip(levels, levels[1:]), start=1)
    ]
    phi = levels[-1][1]
    phase = GridFunction(u.grid, phi)
    ratio = None
    if params is not None and params.sp < 1:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            den = haar_average_norm(u, params).total
            if den > 0:
                ratio = haar_average_norm(phase, params).total / den
    return LiftResult(
        phase=phase,
        axis_windings=_try_axis_windings(u),
        residual=residual(phi, u.values),
        method="dyadic",
        level_increments=tuple(incs),
        norm_ratio=ratio,
    )


def dyadic_phase_levels(u: CircleMap) -> list[tuple[np.ndarray, np.ndarray]]:
    """``(U_j, phi_j)`` at every level, each at its own resolution."""
    u = _as_circle(u)
    pyr = [_normalize(e) for e in pyramid(u.values)]
    phi = principal_angle(pyr[0])
    out = [(pyr[0], phi)]
    for j in range(1, len(pyr)):
        prev_phi = refine(phi, j)
        prev_u = refine(pyr[j - 1], j)
        r = np.where(pyr[j] == prev_u, 0.0, principal_angle(pyr[j] * np.conj(prev_u)))
        phi = prev_phi + r
        out.append((pyr[j], phi))
    return out


# ---------------------------------------------------------------- mollifier


def default_ladder(level: int) -> list[float]:
    return [2.0**-k for k in range(2, level)]


def _linear_phase(grid, w) -> np.ndarray:
    xs = grid.centers()
    lin = np.zeros(grid.shape)
    for a, wa in enumerate(w):
        if wa:
            lin = lin + TWO_PI * wa * xs[a]
    return lin


def lift_mollifier(u: CircleMap, eps_ladder=None, params: BesovParams | None = None) -> LiftResult:
    """Phase obtained by following ``F / |F|`` with ``F = u * rho_eps`` down a ladder.

    Nonzero axis degrees ``w`` are removed first by dividing by ``e^{2 pi i w.x}``
    and added back to the final phase, which is then not periodic.  After the
    smallest scale a last nearest-phase step snaps the smooth phase onto the
    grid samples themselves.
    """
    u = _as_circle(u)
    if not u.grid.periodic:
        raise ValidationError("lift_mollifier requires a torus grid")
    J = u.level
    ladder = default_ladder(J) if eps_ladder is None else [float(e) for e in eps_ladder]
    if not ladder:
        raise EpsOutOfRange(f"empty eps ladder at level {J}")
    for e in ladder:
        if not (u.grid.mesh <= e <= 0.25):
            raise EpsOutOfRange(f"eps={e} outside [2^-{J}, 1/4]")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise EpsOutOfRange("eps ladder must be strictly decreasing")

    w = axis_windings(u)
    lin = _linear_phase(u.grid, w)
    rem = u.values * np.exp(-1j * lin)
    rem_map = GridFunction(u.grid, rem)

    fields = []
    mins = []
    for e in ladder:
        F = mollify(rem_map, e).values
        mod = np.abs(F)
        fields.append(F)
        mins.append(float(mod.min()))
    if mins[-1] <= 0.5:
        F = fields[-1]
        cell = np.unravel_index(int(np.argmin(np.abs(F))), F.shape)
        raise ModulusCollapse(ladder[-1], cell, mins[-1])
    start = len(ladder) - 1
    while start > 0 and mins[start - 1] > 0.5:
        start -= 1

    w0 = CircleMap(u.grid, fields[start] / np.abs(fields[start]))
    psi = lift_dyadic(w0).phase.values
    for k in range(start + 1, len(ladder)):
        psi = nearest_phase(fields[k] / np.abs(fields[k]), psi)
    psi = nearest_phase(rem, psi)
    phi = psi + lin
    phase = GridFunction(u.grid, phi)
    steps = tuple(LadderStep(e, m, i >= start) for i, (e, m) in enumerate(zip(ladder, mins)))
    ratio = None
    if params is not None and params.sp < 1:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            den = haar_average_norm(u, params).total
            if den > 0:
                ratio = haar_average_norm(phase, params).total / den
    return LiftResult(
        phase=phase,
        axis_windings=w,
        residual=residual(phi, u.values),
        method="mollifier",
        norm_ratio=ratio,
        ladder=steps,
        delta=ladder[start],
        flags=("de-periodized",) if any(w) else (),
    )


# ---------------------------------------------------------------- continuous


def _edge_list(shape, periodic: bool):
    """Edges ``(a, b)`` as flat indices, ordered by axis then by cell ``a``."""
    ids = np.arange(int(np.prod(shape))).reshape(shape)
    src, dst, axes = [], [], []
    for a in range(len(shape)):
        if periodic:
            if shape[a] < 2:
                continue
            nb = np.roll(ids, -1, axis=a)
            s, d = ids, nb
            if shape[a] == 2:
                # the wrap edge duplicates the direct one
                keep = [slice(None)] * len(shape)
                keep[a] = slice(0, 1)
                s, d = ids[tuple(keep)], nb[tuple(keep)]
        else:
            n = shape[a]
            s = ids.take(np.arange(0, n - 1), axis=a)
            d = ids.take(np.arange(1, n), axis=a)
        src.append(s.ravel())
        dst.append(d.ravel())
        axes.append(np.full(s.size, a))
    if not src:
        return np.zeros(0, int), np.zeros(0, int), np.zeros(0, int)
    return np.concatenate(src), np.concatenate(dst), np.concatenate(axes)


def _path_to_root(node: int, pred: np.ndarray) -> list[int]:
    out = [node]
    while pred[out[-1]] >= 0:
        out.append(int(pred[out[-1]]))
    return out


def _unwrapped(loop_cells: list[tuple[int, ...]], shape) -> np.ndarray:
    pts = [np.array(loop_cells[0], dtype=float)]
    for prev, cur in zip(loop_cells, loop_cells[1:]):
        step = np.array(cur) - np.array(prev)
        for a, n in enumerate(shape):
            if step[a] > 1:
                step[a] -= n
            elif step[a] < -1:
                step[a] += n
        pts.append(pts[-1] + step)
    return np.array(pts)


def _loop_winding(values_flat: np.ndarray, loop: list[int]) -> int:
    z = values_flat[loop + loop[:1]]
    inc = principal_angle(z[1:] * np.conj(z[:-1]))
    return to_winding(math.fsum(inc.tolist()))


def lift_continuous(u: CircleMap) -> LiftResult:
    """Integrate principal increments along a breadth-first spanning tree.

    Raises :class:`DegenerateEdge` if some neighbouring samples are nearly
    antipodal and :class:`ObstructionDetected` if a non-tree edge disagrees
    with the propagated phase; the witness loop runs through the tree from
    one end of that edge to the other, counterclockwise in 2D.
    """
    u = _as_circle(u)
    shape = u.grid.shape
    periodic = u.grid.periodic
    for a in range(u.dim):
        check_degenerate(increments(u.values, a, periodic), a, shape)

    N = u.grid.size
    flat = u.values.reshape(-1)
    src, dst, _ = _edge_list(shape, periodic)
    if N == 1:
        phi = principal_angle(flat)
        phase = GridFunction(u.grid, phi)
        return LiftResult(phase, _try_axis_windings(u), residual(phi, flat), "continuous")

    graph = coo_matrix((np.ones(src.size), (src, dst)), shape=(N, N)).tocsr()
    order, pred = breadth_first_order(graph, 0, directed=False, return_predecessors=True)
    depth = np.zeros(N, dtype=np.int64)
    pl = pred.tolist()
    dl = depth.tolist()
    for i in order[1:].tolist():
        dl[i] = dl[pl[i]] + 1
    depth = np.asarray(dl)

    phi = np.empty(N)
    phi[0] = float(principal_angle(flat[0]))
    d_order = depth[order]
    bounds = np.flatnonzero(np.diff(d_order)) + 1
    for layer in np.split(order, bounds)[1:]:
        phi[layer] = nearest_phase(flat[layer], phi[pred[layer]])

    tree = (pred[dst] == src) | (pred[src] == dst)
    gap = np.abs(phi[dst] - phi[src])
    bad = (~tree) & (gap >= DEGENERATE_GAP)
    if bad.any():
        e = int(np.argmax(bad))
        a, b = int(src[e]), int(dst[e])
        pa, pb = _path_to_root(a, pred), _path_to_root(b, pred)
        in_b = {n: i for i, n in enumerate(pb)}
        ia = next(i for i, n in enumerate(pa) if n in in_b)
        lca_b = in_b[pa[ia]]
        loop = pa[: ia + 1] + pb[:lca_b][::-1]
        cells = [tuple(int(c) for c in np.unravel_index(n, shape)) for n in loop]
        if u.dim == 2:
            pts = _unwrapped(cells + cells[:1], shape)
            if np.allclose(pts[0], pts[-1]):
                x, y = pts[:, 0], pts[:, 1]
                area = float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))
                if area < 0:
                    loop = loop[::-1]
                    cells = cells[::-1]
        wind = _loop_winding(flat, loop)
        raise ObstructionDetected(ObstructionWitness(tuple(cells), wind))

    phase = GridFunction(u.grid, phi.reshape(shape))
    return LiftResult(
        phase=phase,
        axis_windings=_try_axis_windings(u),
        residual=residual(phase.values, u.values),
        method="continuous",
    )
