"""Weight classes: A_p / RH_s characteristics, epsilon forms, factor weights."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rhomix import (
    ALL_CELL_ALIGNED,
    DYADIC_SIDES,
    Domain,
    GridFunction,
    InvalidWeightError,
    RhoSpec,
    ainf_epsilon_form,
    ap_characteristic,
    enumerate_cubes,
    epsilon_power_audit,
    factor_build,
    rh_characteristic,
    weighted_measure,
)

from conftest import cubes_of

CL = RhoSpec.classical()


def _fam(dom):
    return enumerate_cubes(dom, ALL_CELL_ALIGNED if dom.dim == 1 else DYADIC_SIDES)


def brute_ap(w, p, fam, dom):
    """Direct per-cube characteristic with plain numpy means (theta = 0)."""
    best = 0.0
    for Q in cubes_of(dom, fam):
        cell = w.values[Q.slices()]
        if p == 1:
            best = max(best, cell.mean() / cell.min())
        elif p == math.inf:
            best = max(best, cell.mean() * math.exp(np.mean(np.log(1.0 / cell))))
        else:
            pp = p / (p - 1.0)
            best = max(best, cell.mean() ** (1 / p) * np.mean(cell ** (1 - pp)) ** (1 / pp))
    return best


def test_constant_weight_has_unit_characteristic():
    dom = Domain(1, 8.0, 5)
    w = GridFunction.constant(dom, 3.7)
    fam = _fam(dom)
    for p in (1.0, 1.5, 2.0, 4.0, math.inf):
        c = ap_characteristic(w, p, 0.0, CL, fam)
        assert c.value == pytest.approx(1.0, rel=1e-12)
    for s in (2.0, 4.0):
        c = rh_characteristic(w, s, 0.0, CL, fam)
        assert c.value == pytest.approx(1.0, rel=1e-12)


def test_ap_matches_brute_force_oracle():
    rng = np.random.default_rng(31)
    dom = Domain(1, 4.0, 4)
    fam = _fam(dom)
    w = GridFunction(dom, np.exp(rng.normal(0, 0.8, dom.shape)))
    for p in (1.0, 2.0, 3.0, math.inf):
        got = ap_characteristic(w, p, 0.0, CL, fam).value
        want = brute_ap(w, p, fam, dom)
        assert got == pytest.approx(want, rel=1e-10), p


def test_ap_dim2_matches_brute_force_oracle():
    rng = np.random.default_rng(32)
    dom = Domain(2, 4.0, 3)
    fam = _fam(dom)
    w = GridFunction(dom, np.exp(rng.normal(0, 0.5, dom.shape)))
    got = ap_characteristic(w, 2.0, 0.0, CL, fam).value
    assert got == pytest.approx(brute_ap(w, 2.0, fam, dom), rel=1e-10)


def test_two_valued_weight_closed_form():
    # the interval straddling the jump half-and-half maximizes the p=2 ratio;
    # in the (1/p, 1/p') normalization that is sqrt(avg(w) avg(1/w)),
    # which for a half-c half-1 interval equals (c+1) / (2 sqrt(c))
    dom = Domain(1, 8.0, 5)
    c = 9.0
    vals = np.where(np.arange(dom.n) < dom.n // 2, c, 1.0)
    w = GridFunction(dom, vals)
    got = ap_characteristic(w, 2.0, 0.0, CL, _fam(dom)).value
    assert got == pytest.approx((c + 1.0) / (2.0 * math.sqrt(c)), rel=1e-12)


def test_witness_attains_the_characteristic():
    rng = np.random.default_rng(33)
    dom = Domain(1, 4.0, 4)
    fam = _fam(dom)
    w = GridFunction(dom, np.exp(rng.normal(0, 1.0, dom.shape)))
    c = ap_characteristic(w, 2.0, 0.0, CL, fam)
    Q = c.witness
    cell = w.values[Q.slices()]
    attained = cell.mean() ** 0.5 * np.mean(1.0 / cell) ** 0.5
    assert attained == pytest.approx(c.value, rel=1e-10)


def test_characteristic_nonincreasing_in_theta():
    rng = np.random.default_rng(34)
    dom = Domain(1, 8.0, 5)
    fam = _fam(dom)
    w = GridFunction(dom, np.exp(rng.normal(0, 1.0, dom.shape)))
    rho = RhoSpec.constant(0.5)
    vals = [ap_characteristic(w, 2.0, t, rho, fam).value for t in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


def test_theta_inert_for_classical_rho():
    rng = np.random.default_rng(35)
    dom = Domain(1, 8.0, 4)
    fam = _fam(dom)
    w = GridFunction(dom, np.exp(rng.normal(0, 1.0, dom.shape)))
    a = ap_characteristic(w, 2.0, 0.0, CL, fam).value
    b = ap_characteristic(w, 2.0, 4.0, CL, fam).value
    assert a == b


def test_characteristic_cross_exponent_bounds():
    # per-cube: avg(1/w) <= 1/min(w) gives the root-normalized A_2 value
    # <= sqrt(A_1 value); Jensen gives the exp-log A_inf value <= A_2^2
    rng = np.random.default_rng(36)
    dom = Domain(1, 8.0, 5)
    fam = _fam(dom)
    w = GridFunction(dom, np.exp(rng.normal(0, 1.0, dom.shape)))
    c1 = ap_characteristic(w, 1.0, 0.0, CL, fam).value
    c2 = ap_characteristic(w, 2.0, 0.0, CL, fam).value
    cinf = ap_characteristic(w, math.inf, 0.0, CL, fam).value
    assert 1.0 <= c2 <= math.sqrt(c1) * (1 + 1e-12)
    assert cinf <= c2 ** 2 * (1 + 1e-12)


def test_rh_matches_brute_force():
    rng = np.random.default_rng(37)
    dom = Domain(1, 4.0, 4)
    fam = _fam(dom)
    w = GridFunction(dom, np.exp(rng.normal(0, 0.7, dom.shape)))
    for s in (2.0, 4.0):
        got = rh_characteristic(w, s, 0.0, CL, fam).value
        want = max(
            np.mean(w.values[Q.slices()] ** s) ** (1 / s) / np.mean(w.values[Q.slices()])
            for Q in cubes_of(dom, fam)
        )
        assert got == pytest.approx(want, rel=1e-10)
    ginf = rh_characteristic(w, math.inf, 0.0, CL, fam).value
    winf = max(
        w.values[Q.slices()].max() / np.mean(w.values[Q.slices()])
        for Q in cubes_of(dom, fam)
    )
    assert ginf == pytest.approx(winf, rel=1e-12)


def test_parameter_validation():
    dom = Domain(1, 4.0, 3)
    w = GridFunction.constant(dom, 1.0)
    fam = _fam(dom)
    with pytest.raises(ValueError):
        ap_characteristic(w, 0.5, 0.0, CL, fam)
    with pytest.raises(ValueError):
        rh_characteristic(w, 1.0, 0.0, CL, fam)
    with pytest.raises(InvalidWeightError):
        ap_characteristic(GridFunction(dom, np.array([1.0, 0.0, 1, 1, 1, 1, 1, 1])), 2.0, 0.0, CL, fam)


def test_epsilon_form_certifies_its_samples():
    rng = np.random.default_rng(38)
    dom = Domain(1, 8.0, 5)
    fam = _fam(dom)
    w = GridFunction(dom, np.exp(rng.normal(0, 0.6, dom.shape)))
    form = ainf_epsilon_form(w, 0.0, CL, fam)
    assert form.eps > 0
    assert form.C <= 8.0 + 1e-12
    assert form.residual <= 1e-9
    # spot-check the inequality on random sub-packs the fit never sampled
    for _ in range(200):
        Q = list(cubes_of(dom, fam))[rng.integers(0, fam.count())]
        cell = w.values[Q.slices()].ravel()
        k = rng.integers(1, cell.size + 1)
        idx = rng.choice(cell.size, size=k, replace=False)
        lhs = cell[idx].sum() / cell.sum()
        rhs = form.C * (k / cell.size) ** form.eps
        assert lhs <= rhs * (1 + 1e-9)


def test_factor_build_formula_and_validation():
    dom = Domain(1, 4.0, 3)
    u = GridFunction(dom, np.full(dom.shape, 2.0))
    v = GridFunction(dom, np.full(dom.shape, 4.0))
    w = factor_build(u, v, 2.0)
    assert np.allclose(w.values, 2.0 * 4.0 ** (1 - 2.0))
    with pytest.raises(ValueError):
        factor_build(u, v, 1.0)
    with pytest.raises(ValueError):
        factor_build(u, v, math.inf)


def test_epsilon_power_audit_shape():
    rng = np.random.default_rng(39)
    dom = Domain(1, 8.0, 5)
    fam = _fam(dom)
    u = GridFunction(dom, np.exp(rng.normal(0, 0.4, dom.shape)))
    v = GridFunction(dom, np.exp(rng.normal(0, 0.4, dom.shape)))
    rep = epsilon_power_audit(u, v, 2.0, CL, fam)
    assert rep.s0 in (2.0, 4.0, 8.0)
    assert rep.eps0 == pytest.approx(1.0 / (rep.s0 / (rep.s0 - 1.0)))
    assert rep.refined_drift is None
    fine = dom.refine()
    famf = _fam(fine)
    uf = GridFunction(fine, np.repeat(u.values, 2))
    vf = GridFunction(fine, np.repeat(v.values, 2))
    rep2 = epsilon_power_audit(u, v, 2.0, CL, fam, refined=(uf, vf, famf))
    assert rep2.refined_drift is not None
    assert all(d >= 0 for d in rep2.refined_drift.values())
    assert set(rep2.refined_drift) == set(rep2.ap_values)


def test_weighted_measure_helper():
    dom = Domain(1, 4.0, 3)
    w = GridFunction(dom, np.arange(1.0, 9.0))
    cells = np.zeros(dom.shape, dtype=bool)
    cells[2:5] = True
    assert weighted_measure(w, cells) == pytest.approx((3 + 4 + 5) * dom.cell_volume)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31 - 1), p=st.sampled_from([1.0, 2.0, 4.0]))
def test_characteristic_scale_invariance(seed, p):
    """[c w]_{A_p} = [w]_{A_p}: the ratio is homogeneous of degree zero."""
    rng = np.random.default_rng(seed)
    dom = Domain(1, 4.0, 4)
    fam = _fam(dom)
    w = GridFunction(dom, np.exp(rng.normal(0, 0.8, dom.shape)))
    a = ap_characteristic(w, p, 0.0, CL, fam).value
    b = ap_characteristic(GridFunction(dom, 7.5 * w.values), p, 0.0, CL, fam).value
    assert a == pytest.approx(b, rel=1e-10)
