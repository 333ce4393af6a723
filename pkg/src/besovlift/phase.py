"""Principal-value phase arithmetic on grids."""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateEdge

TWO_PI = 2.0 * math.pi
# principal increments are ill-defined at an angular gap of exactly pi
DEGENERATE_GAP = math.pi - 1e-6


def principal_angle(z) -> np.ndarray:
    """Argument in ``(-pi, pi]`` (``np.angle`` may return ``-pi`` for ``-1 - 0j``)."""
    a = np.angle(z)
    return np.where(a <= -math.pi, math.pi, a)


def nearest_phase(z, prev):
    """The phase of ``z`` in ``(prev - pi, prev + pi]``; a tie at distance pi goes up."""
    theta0 = np.angle(z)
    r = math.pi - np.mod(math.pi - (theta0 - prev), TWO_PI)
    out = prev + r
    return float(out) if np.ndim(out) == 0 else out


def increments(values: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    """Principal increments ``Arg(u(x + e_axis) conj(u(x)))``.

    On the torus the result has the grid shape; on the cube the last slab along
    ``axis`` is dropped.
    """
    if periodic:
        nxt = np.roll(values, -1, axis=axis)
        cur = values
    else:
        n = values.shape[axis]
        nxt = values.take(np.arange(1, n), axis=axis)
        cur = values.take(np.arange(0, n - 1), axis=axis)
    # equal neighbours give an exact zero even when the product rounds off the real axis
    return np.where(nxt == cur, 0.0, principal_angle(nxt * np.conj(cur)))


def check_degenerate(inc: np.ndarray, axis: int, shape) -> None:
    bad = np.abs(inc) >= DEGENERATE_GAP
    if bad.any():
        idx = np.unravel_index(int(np.argmax(bad)), inc.shape)
        nb = list(idx)
        nb[axis] = (nb[axis] + 1) % shape[axis]
        raise DegenerateEdge(idx, nb, float(abs(inc[idx])))


def checked_increments(values: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    inc = increments(values, axis, periodic)
    check_degenerate(inc, axis, values.shape)
    return inc


def to_winding(total_angle, tol: float = 1e-9):
    """Convert an accumulated angle (a multiple of 2 pi up to rounding) to an integer."""
    w = np.asarray(total_angle) / TWO_PI
    r = np.rint(w)
    if np.any(np.abs(w - r) > tol):
        raise ArithmeticError(f"winding sum is not an integer multiple of 2 pi: {w}")
    r = r.astype(np.int64)
    return int(r) if r.ndim == 0 else r
