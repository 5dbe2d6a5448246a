"""Maximal operators: sup sweeps, dyadic variants, splits, shifted grids."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rhomix import (
    ALL_CELL_ALIGNED,
    DYADIC_GRID_OF,
    DYADIC_SIDES,
    Cube,
    Domain,
    GridFunction,
    GridShiftSet,
    RhoSpec,
    default_family,
    enumerate_cubes,
    integrate,
    loc_glob_split,
    m_dyadic,
    m_localized,
    m_rho_sigma,
    rho_values,
    shifted_grid_domination_audit,
)

CL = RhoSpec.classical()


def brute_m_dim1(f, rho, sigma, q=1.0):
    """All cell-aligned intervals, direct per-cell sup with numpy means."""
    n = f.domain.n
    h = f.domain.cell_width
    vals = np.abs(f.values) ** q
    out = np.zeros(n)
    for lo in range(n):
        for hi in range(lo + 1, n + 1):
            avg = float(np.mean(vals[lo:hi]))
            if sigma > 0 and not rho.is_classical:
                center = np.array([(lo + hi) / 2.0 * h])
                r = (hi - lo) * h / 2.0
                fac = 1.0 + r / rho_values(rho, center[None, :])[0]
                avg *= fac ** (-sigma * q)
            out[lo:hi] = np.maximum(out[lo:hi], avg)
    return out ** (1.0 / q)


def test_matches_brute_force_dim1():
    rng = np.random.default_rng(41)
    dom = Domain(1, 8.0, 5)
    f = GridFunction(dom, rng.normal(0, 1, dom.shape))
    got = m_rho_sigma(f, CL).values
    want = brute_m_dim1(f, CL, 0.0)
    assert np.allclose(got, want, rtol=1e-12, atol=1e-12)


def test_matches_brute_force_dim1_with_sigma():
    rng = np.random.default_rng(42)
    dom = Domain(1, 8.0, 5)
    rho = RhoSpec.constant(1.5)
    f = GridFunction(dom, rng.normal(0, 1, dom.shape))
    for sigma in (0.5, 2.0):
        got = m_rho_sigma(f, rho, sigma).values
        want = brute_m_dim1(f, rho, sigma)
        assert np.allclose(got, want, rtol=1e-10, atol=1e-12), sigma


def test_power_mean_variant_matches_brute_force():
    rng = np.random.default_rng(43)
    dom = Domain(1, 8.0, 4)
    f = GridFunction(dom, rng.normal(0, 1, dom.shape))
    got = m_rho_sigma(f, CL, 0.0, 2.0).values
    want = brute_m_dim1(f, CL, 0.0, q=2.0)
    assert np.allclose(got, want, rtol=1e-12)


def test_dim2_matches_brute_force_tiles():
    rng = np.random.default_rng(44)
    dom = Domain(2, 4.0, 3)
    f = GridFunction(dom, rng.normal(0, 1, dom.shape))
    got = m_rho_sigma(f, CL).values
    vals = np.abs(f.values)
    want = np.zeros(dom.shape)
    for s in (1, 2, 4, 8):
        for i in range(0, dom.n, s):
            for j in range(0, dom.n, s):
                avg = vals[i : i + s, j : j + s].mean()
                want[i : i + s, j : j + s] = np.maximum(want[i : i + s, j : j + s], avg)
    assert np.allclose(got, want, rtol=1e-12)


def test_dominates_absolute_value_at_sigma_zero():
    rng = np.random.default_rng(45)
    dom = Domain(1, 8.0, 6)
    f = GridFunction(dom, rng.normal(0, 1, dom.shape))
    m = m_rho_sigma(f, CL).values
    assert np.all(m >= np.abs(f.values) - 1e-14)


def test_monotone_decreasing_in_sigma():
    rng = np.random.default_rng(46)
    dom = Domain(1, 8.0, 6)
    rho = RhoSpec.constant(0.75)
    f = GridFunction(dom, rng.normal(0, 1, dom.shape))
    prev = None
    for sigma in (0.0, 0.5, 1.0, 2.0):
        cur = m_rho_sigma(f, rho, sigma).values
        if prev is not None:
            assert np.all(cur <= prev + 1e-14)
        prev = cur


def test_sigma_inert_for_classical():
    rng = np.random.default_rng(47)
    dom = Domain(1, 8.0, 5)
    f = GridFunction(dom, rng.normal(0, 1, dom.shape))
    a = m_rho_sigma(f, CL, 0.0).values
    b = m_rho_sigma(f, CL, 3.0).values
    assert np.array_equal(a, b)


def test_parameter_validation():
    dom = Domain(1, 4.0, 3)
    f = GridFunction.constant(dom, 1.0)
    with pytest.raises(ValueError):
        m_rho_sigma(f, CL, -1.0)
    with pytest.raises(ValueError):
        m_rho_sigma(f, CL, 0.0, 0.5)


def brute_m_dyadic(f, R):
    """Independent oracle: walk the explicit bisection tree with plain means."""
    out = np.zeros(f.domain.shape)
    vals = np.abs(f.values)

    def visit(Q):
        avg = float(np.mean(vals[Q.slices()]))
        sl = Q.slices()
        out[sl] = np.maximum(out[sl], avg)
        if Q.side_cells > 1:
            for k in Q.children():
                visit(k)

    visit(R)
    return out


def test_dyadic_matches_recursive_oracle():
    rng = np.random.default_rng(48)
    for dim in (1, 2):
        dom = Domain(dim, 8.0, 3)
        f = GridFunction(dom, rng.normal(0, 1, dom.shape))
        R = Cube(dom, (0,) * dim, dom.n)
        got = m_dyadic(f, R).values
        want = brute_m_dyadic(f, R)
        assert np.allclose(got, want, rtol=1e-12)


def test_dyadic_on_subcube_zero_outside():
    rng = np.random.default_rng(49)
    dom = Domain(1, 8.0, 4)
    f = GridFunction(dom, rng.normal(0, 1, dom.shape))
    R = Cube(dom, (8,), 4)
    got = m_dyadic(f, R).values
    assert np.all(got[:8] == 0) and np.all(got[12:] == 0)
    assert np.allclose(got, brute_m_dyadic(f, R), rtol=1e-12)


def test_dyadic_weak_one_one_constant_one():
    rng = np.random.default_rng(50)
    dom = Domain(1, 8.0, 8)
    R = Cube(dom, (0,), dom.n)
    for _ in range(20):
        f = GridFunction(dom, rng.normal(0, 1, dom.shape))
        m = m_dyadic(f, R).values
        total = integrate(f.abs())
        for t in np.linspace(1e-3, m.max() * 1.2, 32):
            measure = float((m > t).sum()) * dom.cell_volume
            assert t * measure <= total * (1 + 1e-12)


def test_localized_between_dyadic_and_global():
    rng = np.random.default_rng(51)
    dom = Domain(1, 8.0, 5)
    f = GridFunction(dom, rng.normal(0, 1, dom.shape))
    R = Cube(dom, (8,), 16)
    dy = m_dyadic(f, R).values
    loc = m_localized(f, R).values
    glob = m_rho_sigma(f, CL).values
    inside = R.mask()
    assert np.all(loc[inside] >= dy[inside] - 1e-14)
    assert np.all(loc[inside] <= glob[inside] + 1e-14)
    assert np.all(loc[~inside] == 0)


def test_localized_full_box_equals_global_dim1():
    rng = np.random.default_rng(52)
    dom = Domain(1, 8.0, 5)
    f = GridFunction(dom, rng.normal(0, 1, dom.shape))
    R = Cube(dom, (0,), dom.n)
    assert np.allclose(m_localized(f, R).values, m_rho_sigma(f, CL).values, rtol=1e-12)


def test_loc_glob_sandwich():
    rng = np.random.default_rng(53)
    dom = Domain(1, 8.0, 6)
    rho = RhoSpec.constant(1.0)
    f = GridFunction(dom, rng.normal(0, 1, dom.shape))
    for sigma in (0.5, 1.0, 3.0):
        rep = loc_glob_split(f, rho, sigma)
        assert rep.max_upper_violation <= 1e-12
        assert rep.max_lower_violation <= 1e-12
        assert rep.subcritical_cubes > 0 and rep.supercritical_cubes > 0
        m = m_rho_sigma(f, rho, sigma).values
        assert np.all(m <= rep.loc.values + rep.glob.values + 1e-12)
        assert np.all(
            m >= (2.0 ** -sigma) * np.maximum(rep.loc.values, rep.glob.values) - 1e-12
        )


def test_shift_set_parents_contain_their_cube():
    dom = Domain(1, 8.0, 5)
    shifts = GridShiftSet(dom)
    Q = Cube(dom, (11,), 3)
    for gid in shifts.grid_ids():
        found = shifts.locate_parent(gid, Q)
        assert found is not None
        anchor, s = found
        assert s >= Q.side_cells
        for ax in range(dom.dim):
            assert anchor[ax] <= Q.anchor[ax]
            assert Q.anchor[ax] + Q.side_cells <= anchor[ax] + s


def test_shifted_grid_domination_no_violations():
    rng = np.random.default_rng(54)
    for dim, level in ((1, 6), (2, 4)):
        dom = Domain(dim, 8.0, level)
        shifts = GridShiftSet(dom)
        for _ in range(10):
            f = GridFunction(dom, rng.normal(0, 1, dom.shape))
            side = int(rng.integers(1, dom.n // 2 + 1))
            anchor = tuple(int(a) for a in rng.integers(0, dom.n - side + 1, dim))
            rep = shifted_grid_domination_audit(f, Cube(dom, anchor, side), shifts)
            assert rep.located_all
            assert rep.violations == 0
            assert rep.lam_best_side_ratio >= 1.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_maximal_is_sublinear(seed):
    """M(f + g) <= M f + M g cellwise, and M(cf) = |c| M f."""
    rng = np.random.default_rng(seed)
    dom = Domain(1, 4.0, 4)
    f = GridFunction(dom, rng.normal(0, 1, dom.shape))
    g = GridFunction(dom, rng.normal(0, 1, dom.shape))
    mf = m_rho_sigma(f, CL).values
    mg = m_rho_sigma(g, CL).values
    mfg = m_rho_sigma(GridFunction(dom, f.values + g.values), CL).values
    assert np.all(mfg <= mf + mg + 1e-12)
    mcf = m_rho_sigma(GridFunction(dom, -2.5 * f.values), CL).values
    assert np.allclose(mcf, 2.5 * mf, rtol=1e-12)
