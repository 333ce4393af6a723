import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from besovlift.counterexamples import vortex
from besovlift.errors import DegenerateEdge, EpsOutOfRange, ModulusCollapse, ObstructionDetected
from besovlift.grid import CircleMap, Domain, GridFunction, dyadic_average, make_grid, sample, subcube
from besovlift.jacobian import plaquette_winding
from besovlift.lifting import (
    axis_windings,
    default_ladder,
    dyadic_phase_levels,
    lift_continuous,
    lift_dyadic,
    lift_mollifier,
)
from besovlift.phase import nearest_phase, principal_angle

TWO_PI = 2 * math.pi


def circle(grid, phase):
    return CircleMap(grid, np.exp(1j * np.asarray(phase)))


def linear(grid, w):
    xs = grid.centers()
    return circle(grid, TWO_PI * sum(wa * x for wa, x in zip(w, xs)) * np.ones(grid.shape))


def smooth_u(rng, J, amp=0.4):
    g = make_grid(2, J)
    x, y = g.centers()
    a, b = rng.uniform(0, TWO_PI, size=2)
    phi = amp * (np.sin(TWO_PI * x + a) + np.cos(TWO_PI * (x + 2 * y) + b))
    return circle(g, np.broadcast_to(phi, g.shape)), np.broadcast_to(phi, g.shape)


# ---------------------------------------------------------------- nearest_phase


def test_nearest_phase_examples():
    assert nearest_phase(1j, 0.0) == pytest.approx(math.pi / 2, abs=1e-15)
    assert nearest_phase(1.0, 7.0) == pytest.approx(TWO_PI, abs=1e-15)
    assert nearest_phase(-1.0, 0.0) == math.pi


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_nearest_phase_window(theta, prev):
    r = nearest_phase(np.exp(1j * theta), prev)
    assert prev - math.pi < r <= prev + math.pi + 1e-12
    assert abs(np.exp(1j * r) - np.exp(1j * theta)) < 1e-12


def test_principal_angle_range():
    assert principal_angle(-1 + 0j) == math.pi
    assert principal_angle(complex(-1, -0.0)) == math.pi


# ---------------------------------------------------------------- axis windings


def test_axis_windings_examples():
    g = make_grid(2, 5)
    assert axis_windings(circle(g, np.zeros(g.shape))) == (0, 0)
    assert axis_windings(linear(g, (1, 0))) == (1, 0)
    assert axis_windings(linear(g, (3, -2))) == (3, -2)


def test_axis_windings_degenerate():
    g = make_grid(1, 1)
    with pytest.raises(DegenerateEdge):
        axis_windings(CircleMap(g, [1, -1]))


# ---------------------------------------------------------------- dyadic


def test_dyadic_constant():
    g = make_grid(2, 4)
    r = lift_dyadic(CircleMap(g, np.full(g.shape, 1j)))
    assert np.all(r.phase.values == math.pi / 2)
    assert r.residual < 1e-15 and all(v == 0 for v in r.level_increments)


def test_dyadic_recovers_small_phase():
    g = make_grid(1, 8)
    phi = sample(lambda x: 0.1 * np.sin(TWO_PI * x), g, 8).values
    r = lift_dyadic(circle(g, phi))
    d = r.phase.values - phi
    k = round(float(d[0]) / TWO_PI)
    assert np.max(np.abs(d - TWO_PI * k)) < 1e-6


def test_dyadic_exact_on_top_and_increment_bound(rng):
    for _ in range(5):
        g = make_grid(2, 5)
        u = CircleMap(g, np.exp(1j * rng.uniform(-math.pi, math.pi, size=g.shape)))
        r = lift_dyadic(u)
        assert r.residual <= 1e-9
        levels = dyadic_phase_levels(u)
        for (U1, p1), (U0, p0) in zip(levels[1:], levels[:-1]):
            scale = U1.shape[0] // U0.shape[0]
            rU0 = np.kron(U0, np.ones((scale, scale)))
            rp0 = np.kron(p0, np.ones((scale, scale)))
            assert np.all(np.abs(p1 - rp0) <= math.pi * np.abs(U1 - rU0) + 1e-12)


@pytest.mark.parametrize("method", ["dyadic", "mollifier"])
def test_unimodular_equivariance(method, rng):
    u, _ = smooth_u(rng, 6)
    c = np.exp(0.7j)
    lift = lift_dyadic if method == "dyadic" else lift_mollifier
    a = lift(u).phase.values
    b = lift(CircleMap(u.grid, c * u.values)).phase.values
    assert np.max(np.abs(np.exp(1j * b) - c * np.exp(1j * a))) < 1e-9


def test_zero_average_fallback():
    g = make_grid(1, 1)
    r = lift_dyadic(CircleMap(g, [1, -1 + 0j]))
    # E_0 u = 0 so U_0 = 1 and phi_0 = 0
    assert r.residual <= 1e-12


# ---------------------------------------------------------------- mollifier


def test_mollifier_examples():
    g = make_grid(2, 6)
    r = lift_mollifier(circle(g, np.zeros(g.shape)))
    assert np.max(np.abs(r.phase.values)) < 1e-12
    r = lift_mollifier(linear(g, (1, 0)))
    x = g.centers()[0]
    assert r.axis_windings == (1, 0)
    assert np.max(np.abs(r.phase.values - TWO_PI * x)) < 1e-9
    assert "de-periodized" in r.flags


def test_mollifier_vortex_collapse():
    with pytest.raises(ModulusCollapse) as exc:
        lift_mollifier(vortex(make_grid(2, 8)))
    assert exc.value.modulus <= 0.5


def test_mollifier_agrees_with_dyadic(rng):
    u, phi = smooth_u(rng, 7)
    rm, rd = lift_mollifier(u), lift_dyadic(u)
    assert rm.residual <= 1e-9
    d = rm.phase.values - rd.phase.values
    assert np.ptp(d) < 1e-9 and abs(d.flat[0] / TWO_PI - round(d.flat[0] / TWO_PI)) < 1e-9


def test_mollifier_ladder_validation():
    g = make_grid(1, 5)
    u = circle(g, np.zeros(32))
    with pytest.raises(EpsOutOfRange):
        lift_mollifier(u, [0.5, 0.25])
    with pytest.raises(EpsOutOfRange):
        lift_mollifier(u, [0.125, 0.25])
    assert default_ladder(6) == [2.0**-k for k in range(2, 6)]


# ---------------------------------------------------------------- continuous


def test_continuous_constant():
    g = make_grid(2, 3, Domain.CUBE)
    r = lift_continuous(CircleMap(g, np.full(g.shape, np.exp(1j * math.pi / 4))))
    assert np.allclose(r.phase.values, math.pi / 4, atol=1e-15)


def test_continuous_vortex_obstruction():
    for J in (4, 6):
        with pytest.raises(ObstructionDetected) as exc:
            lift_continuous(vortex(make_grid(2, J, Domain.CUBE)))
        w = exc.value.witness
        assert abs(w.winding) == 1
        assert len(w.loop) >= 4 and len(set(w.loop)) == len(w.loop)


def test_continuous_vortex_core_outside():
    u = vortex(make_grid(2, 6, Domain.CUBE))
    sub = CircleMap(*_sub(u, 1, (0, 0)))
    r = lift_continuous(sub)
    assert r.residual <= 1e-9


def _sub(u, j, idx):
    s = subcube(u, j, idx)
    return s.grid, s.values


def test_continuous_torus_linear_obstruction():
    with pytest.raises(ObstructionDetected) as exc:
        lift_continuous(linear(make_grid(2, 4), (1, 0)))
    assert abs(exc.value.witness.winding) == 1


def test_continuous_degenerate():
    g = make_grid(1, 2, Domain.CUBE)
    with pytest.raises(DegenerateEdge):
        lift_continuous(CircleMap(g, [1, 1, -1, -1]))


@given(st.integers(0, 2**31))
def test_continuous_iff_no_windings(seed):
    rng = np.random.default_rng(seed)
    g = make_grid(2, 3)
    vals = np.exp(1j * rng.uniform(-math.pi, math.pi, size=g.shape) * 0.9)
    u = CircleMap(g, vals)
    try:
        pw = plaquette_winding(u)
        aw = axis_windings(u)
    except DegenerateEdge:
        return
    try:
        lift_continuous(u)
        ok = True
    except ObstructionDetected:
        ok = False
    assert ok == (pw.is_zero() and not any(aw))


def test_lifts_differ_by_constant(rng):
    g = make_grid(2, 6, Domain.TORUS)
    u, _ = smooth_u(rng, 6, amp=0.3)
    phases = [lift_dyadic(u).phase.values, lift_mollifier(u).phase.values, lift_continuous(u).phase.values]
    for a in phases:
        for b in phases:
            d = a - b
            k = round(float(d.flat[0]) / TWO_PI)
            assert np.max(np.abs(d - TWO_PI * k)) < 1e-9


def test_lift_result_json(rng):
    u, _ = smooth_u(rng, 5)
    js = lift_dyadic(u).to_json()
    assert js["method"] == "dyadic" and len(js["increments"]) == 5
    assert js["axis_windings"] == [0, 0]
