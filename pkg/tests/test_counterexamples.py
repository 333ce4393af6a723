import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from besovlift.besov import diff_seminorm, haar_coeff_decompose, haar_coeff_norm
from besovlift.counterexamples import (
    NonrestrictionSpec,
    coverage_counts,
    default_u,
    default_v,
    global_series_terms,
    global_series_total,
    half_indicator,
    median_by_J,
    nonrestriction,
    nonrestriction_row,
    random_step_function,
    restriction_scan,
    scan_to_csv,
    second_diff_domination_check,
    step_function,
    tempseq,
    vortex,
)
from besovlift.errors import CenterOnNode, LevelOutOfRange, SpecInvalid, ValidationError
from besovlift.grid import BesovParams, Domain, GridFunction, diff, make_grid, refine, sample, slice_at
from besovlift.jacobian import plaquette_winding

SPEC = NonrestrictionSpec(BesovParams.of(0.4, 2, 6), J=8)


# ---------------------------------------------------------------- vortex


def test_vortex_unit_and_degree():
    g = make_grid(2, 6, Domain.CUBE)
    u = vortex(g)
    assert np.allclose(np.abs(u.values), 1, atol=1e-15)
    wf = plaquette_winding(u)
    assert int(wf[(0, 1)].sum()) == 1


def test_vortex_center_on_node():
    g = make_grid(2, 4, Domain.CUBE)
    with pytest.raises(CenterOnNode):
        vortex(g, (0.5 + 1 / 32, 0.5 + 1 / 64))  # first coordinate is a cell center
    with pytest.raises(CenterOnNode):
        vortex(g, (1.2, 0.5 + 1 / 64))


def test_vortex_third_difference():
    # ||Delta^3_h u||_{L^1} <= C h^2 with C stable in h
    g = make_grid(2, 10, Domain.CUBE)
    u = vortex(g)
    consts = []
    for k in range(4, 9):
        steps = 1 << (10 - k)
        d = diff(u, 3, steps).values  # inadmissible x are zero on the cube
        l1 = float(np.abs(d).sum()) * g.cell_volume
        consts.append(l1 / 2.0 ** (-2 * k))
    assert max(consts) / min(consts) < 2


def test_vortex_besov_regimes():
    small = BesovParams.of(0.75, 2, 2)  # sp = 1.5 < 2
    big = BesovParams.of(1.5, 2, 2)  # sp = 3 > 2
    t_small = [diff_seminorm(vortex(make_grid(2, J, Domain.CUBE)), small, M=1, delta=0.25).total for J in (6, 7, 8)]
    t_big = [diff_seminorm(vortex(make_grid(2, J, Domain.CUBE)), big, M=2, delta=0.25).total for J in (6, 7, 8)]
    assert t_small[-1] / t_small[-2] < 1.2
    rate = math.log2(t_big[-1] / t_big[-2])
    assert abs(rate - 0.5) < 0.15


# ---------------------------------------------------------------- tempseq


def test_tempseq_full_budget():
    Ls = tempseq(lambda j: 1.0, lambda j: 1.0, 8, j0=4)
    assert all(L.s == 0 and L.t == 1 << L.j for L in Ls)
    pts = np.arange(64) / 64
    assert np.all(coverage_counts(Ls, pts) == len(Ls))


def test_tempseq_hand_example():
    Ls = tempseq(lambda j: 3 / 8, lambda j: 1.0, 6, j0=3)
    assert [(L.j, L.s, L.t) for L in Ls] == [(3, 0, 3), (4, 6, 12), (5, 24, 36), (6, 0, 24)]


def test_tempseq_degenerate():
    Ls = tempseq(lambda j: 1e-4, lambda j: 1.0, 6, j0=4)
    assert all(L.degenerate and L.s == L.t for L in Ls)


def test_tempseq_budget_and_maximality():
    t = 3.0
    u = default_u(t)
    for L in tempseq(u, default_v, 40, j0=4):
        b = u(L.j) * default_v(L.j)
        assert L.length <= b
        assert (L.t - L.s + 1) / 2.0**L.j > b
        assert 0 <= L.s < 1 << L.j


def test_tempseq_coverage():
    Ls = tempseq(default_u(3.0), default_v, 60, j0=4)
    cnt = coverage_counts(Ls, np.arange(65) / 64)
    assert cnt.min() >= 3


def test_tempseq_sequence_input():
    Ls = tempseq([0.5] * 3, [1.0] * 3, 6, j0=4)
    assert [(L.s, L.t) for L in Ls] == [(0, 8), (16, 32), (0, 32)]


# ---------------------------------------------------------------- non-restriction


def test_mu_example():
    assert abs(SPEC.mu(8, 64) - (64 * 8 ** (1 / 3) * math.log(8)) ** -0.5) < 1e-15
    assert abs(SPEC.mu(8, 64) - 0.0613) < 5e-5


def test_spec_validation_and_json():
    with pytest.raises(SpecInvalid):
        NonrestrictionSpec(BesovParams.of(0.4, 2, 2), J=8)
    with pytest.raises(SpecInvalid):
        NonrestrictionSpec(BesovParams.of(0.4, 2, 1), J=8)
    with pytest.raises(SpecInvalid):
        NonrestrictionSpec(BesovParams.of(0.6, 2, 6), J=8)
    NonrestrictionSpec(BesovParams.of(0.4, 2, 2), J=8, log_power=2.0)
    assert NonrestrictionSpec.from_json(SPEC.dumps()) == SPEC
    with pytest.raises(SpecInvalid):
        NonrestrictionSpec.from_json("{}")


def test_nonrestriction_support_and_level():
    SPEC.check_support()
    boxes = SPEC.strips()
    assert len(boxes) == 3
    with pytest.raises(LevelOutOfRange):
        nonrestriction(SPEC, make_grid(2, SPEC.grid_level - 1, Domain.CUBE))


def test_nonrestriction_refinement_invariant():
    f = nonrestriction(SPEC)
    g = nonrestriction(SPEC, make_grid(2, SPEC.grid_level + 1, Domain.CUBE))
    assert np.array_equal(refine(f.values, SPEC.grid_level + 1), g.values)


def test_nonrestriction_rows_match_slices():
    f = nonrestriction(SPEC)
    n = f.grid.n
    for i in range(0, n, 37):
        x = (i + 0.5) / n
        row = nonrestriction_row(SPEC, x, SPEC.grid_level)
        assert np.array_equal(row.values, slice_at(f, (0,), (i,)).values)


def test_nonrestriction_coefficient_series():
    q = SPEC.params.q
    for J in (6, 7, 8):
        sp = SPEC.with_J(J)
        f = nonrestriction(sp, blocks=(0,))
        got = haar_coeff_norm(haar_coeff_decompose(f, sp.params)).total ** q
        want = math.fsum(global_series_terms(sp))
        assert abs(got - want) <= 1e-9 * want
        assert abs(math.fsum(sp.global_terms()) - want) <= 1e-12 * want


def test_global_series_total():
    sp = NonrestrictionSpec(BesovParams.of(0.4, 2, 6), J=14)
    tot = global_series_total(sp)
    part = math.fsum(global_series_terms(sp))
    assert part < tot < 1.0
    # independent oracle: direct sum to 1e7 plus a midpoint integral tail
    N = 10**7
    j = np.arange(4, N + 1, dtype=float)
    head = math.fsum((1.0 / (j * np.log(j) ** 3)).tolist())
    ref = head + 0.5 * math.log(N + 0.5) ** -2
    assert abs(tot - ref) <= 1e-9 * ref


# ---------------------------------------------------------------- scans


def test_scan_smooth_rows_bounded():
    params = BesovParams.of(0.4, 2, 6)
    stats = []
    for J in (6, 8, 10):
        g = make_grid(2, J, Domain.CUBE)
        f = sample(lambda x, y: np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y), g, 4)
        rows = [g.n // 3, g.n // 2]
        stats.append(max(r.running_sup for r in restriction_scan(f, params, rows)))
    assert max(stats) / min(stats) < 1.05


def test_scan_rows_validation_and_csv():
    g = make_grid(2, 3, Domain.CUBE)
    f = GridFunction(g, np.zeros(g.shape))
    with pytest.raises(ValidationError):
        restriction_scan(f, BesovParams.of(0.4, 2, 6), [8])
    table = restriction_scan(f, BesovParams.of(0.4, 2, 6), [0, 7])
    assert scan_to_csv(table).splitlines() == ["row,J,running_sup", "0,3,0", "7,3,0"]
    assert median_by_J(table) == {3: 0.0}


# ---------------------------------------------------------------- step functions


def test_step_function():
    g = make_grid(1, 4, Domain.CUBE)
    f = step_function(g, [2, -1])
    assert f.values.tolist() == [2.0] * 8 + [-1.0] * 8
    with pytest.raises(ValidationError):
        step_function(g, [0.5, 1])
    with pytest.raises(ValidationError):
        step_function(g, [1, 2, 3])


def test_half_indicator_slope():
    params = BesovParams.of(0.5, 2, 2)
    tot = {J: diff_seminorm(half_indicator(make_grid(1, J, Domain.CUBE)), params).total for J in (10, 12)}
    slope = math.log(tot[12] / tot[10]) / math.log(12 / 10)
    assert abs(slope - 0.5) < 0.15


def test_domination_examples():
    g = make_grid(1, 4, Domain.CUBE)
    r = second_diff_domination_check(half_indicator(g), 4)
    assert r.passed
    assert second_diff_domination_check(step_function(g, [3]), 2).passed
    with pytest.raises(ValidationError):
        second_diff_domination_check(GridFunction(g, np.full(16, 0.5)), 1)


@given(st.integers(0, 2**31), st.integers(0, 5))
def test_domination_property(seed, coarse):
    rng = np.random.default_rng(seed)
    g = make_grid(1, 6, Domain.CUBE)
    f = random_step_function(g, rng, coarse)
    for h in range(1, 33):
        assert second_diff_domination_check(f, h).passed
