"""Scale-adapted Muckenhoupt and reverse-Holder characteristics.

A weight w is a strictly positive grid function.  All classes here are the
rho-adapted ones: the defining ratio of each cube Q = Q(x, r) is discounted
by the growth factor (1 + r/rho(x))^theta, so membership is monotone in
theta and theta = 0 (or a CLASSICAL rho) recovers the classical classes.

Characteristics are exact suprema over the requested cube family, computed
with prefix-sum tables (O(1) per cube average) and sliding-window extrema,
so a full dim-1 sweep over all n(n+1)/2 intervals costs O(n^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .critical import RhoSpec, growth_factor
from .grid import (
    ALL_CELL_ALIGNED,
    BoxSums,
    Cube,
    CubeFamily,
    GridFunction,
    require_weight,
)

__all__ = [
    "EpsilonForm",
    "EpsilonPowerReport",
    "WeightCharacteristic",
    "ainf_epsilon_form",
    "ap_characteristic",
    "epsilon_power_audit",
    "factor_build",
    "rh_characteristic",
]

#: growth exponent ladder used by the audits
THETA_LADDER = (0.0, 0.5, 1.0, 2.0, 4.0)

#: reverse-Holder exponent ladder for the epsilon-power audit
RH_LADDER = (2.0, 4.0, 8.0)

_FINITE_CAP = 1e8


@dataclass(frozen=True)
class WeightCharacteristic:
    value: float
    witness: Cube
    p: float
    theta: float
    policy: str


def _window_extreme(vals: np.ndarray, size: int, kind: str) -> np.ndarray:
    """Per-anchor min/max of vals over forward windows [a, a + size)."""
    if size == 1:
        return vals
    filt = minimum_filter1d if kind == "min" else maximum_filter1d
    out = filt(vals, size=size, mode="nearest")
    n = vals.shape[0]
    return out[size // 2 : size // 2 + (n - size + 1)]


def _tile_extreme(vals: np.ndarray, size: int, kind: str) -> np.ndarray:
    """Min/max over the disjoint size^dim tiles of a dim-2 grid, flattened."""
    n = vals.shape[0]
    blocks = vals.reshape(n // size, size, n // size, size)
    op = np.min if kind == "min" else np.max
    return op(blocks, axis=(1, 3)).ravel()


def _cube_extremes(w: np.ndarray, family: CubeFamily, s: int, kind: str) -> np.ndarray:
    if family.domain.dim == 1:
        if family.policy == ALL_CELL_ALIGNED:
            return _window_extreme(w, s, kind)
        n = w.shape[0]
        op = np.min if kind == "min" else np.max
        return op(w.reshape(n // s, s), axis=1)
    if family.policy != "dyadic_sides":
        raise ValueError("extreme sweep supports ALL_CELL_ALIGNED or DYADIC_SIDES")
    return _tile_extreme(w, s, kind)


def _sweep(
    family: CubeFamily,
    tables: dict[str, BoxSums],
    extremes: tuple[str, str] | None,
    rho: RhoSpec,
    theta: float,
    numer,
):
    """Generic sup over the family of numer(avgs, extreme) / factor^theta.

    numer receives dict side -> per-cube averages for each table plus the
    per-cube extreme array (or None) and returns the raw ratio array.
    """
    domain = family.domain
    h = domain.cell_width
    best = -math.inf
    witness = None
    for s in family.side_cells_list():
        anchors = family.anchors(s)
        cells = s**domain.dim
        avgs = {k: t.box_sum(anchors, s) / cells for k, t in tables.items()}
        ext = None
        if extremes is not None:
            key, kind = extremes
            ext = _cube_extremes(tables[key].source, family, s, kind)
        raw = numer(avgs, ext)
        centers = (anchors + s / 2.0) * h
        radius = math.sqrt(domain.dim) * s * h / 2.0
        ratio = raw / growth_factor(rho, centers, radius) ** theta
        i = int(np.argmax(ratio))
        if ratio[i] > best:
            best = float(ratio[i])
            witness = Cube(domain, tuple(int(a) for a in anchors[i]), s)
    return best, witness


class _SourceSums(BoxSums):
    """BoxSums that keeps the raw value array around for extreme sweeps."""

    def __init__(self, values: np.ndarray):
        super().__init__(values)
        self.source = np.asarray(values, dtype=np.float64)


def ap_characteristic(
    w: GridFunction,
    p: float,
    theta: float,
    rho: RhoSpec,
    cubes: CubeFamily,
) -> WeightCharacteristic:
    """Muckenhoupt characteristic over the family.

    p in (1, inf): sup_Q avg(w)^(1/p) avg(w^(1-p'))^(1/p') / factor^theta.
    p = 1:         sup_Q avg(w) / (factor^theta * min_Q w).
    p = inf:       sup_Q avg(w) * exp(avg(log(1/w))) / factor^theta
                   (the geometric-mean form; means of logs, never products).
    """
    require_weight(w)
    if not (p == math.inf or p >= 1):
        raise ValueError(f"p must be in [1, inf], got {p}")
    vals = w.values

    if p == math.inf:
        tables = {"w": _SourceSums(vals), "logw": _SourceSums(np.log(vals))}

        def numer(avgs, _ext):
            return avgs["w"] * np.exp(-avgs["logw"])

        value, witness = _sweep(cubes, tables, None, rho, theta, numer)
    elif p == 1:
        tables = {"w": _SourceSums(vals)}

        def numer(avgs, ext):
            return avgs["w"] / ext

        value, witness = _sweep(cubes, tables, ("w", "min"), rho, theta, numer)
    else:
        pprime = p / (p - 1.0)
        tables = {
            "w": _SourceSums(vals),
            "dual": _SourceSums(vals ** (1.0 - pprime)),
        }

        def numer(avgs, _ext):
            return avgs["w"] ** (1.0 / p) * avgs["dual"] ** (1.0 / pprime)

        value, witness = _sweep(cubes, tables, None, rho, theta, numer)
    return WeightCharacteristic(value, witness, p, theta, cubes.policy)


def rh_characteristic(
    w: GridFunction,
    s: float,
    theta: float,
    rho: RhoSpec,
    cubes: CubeFamily,
) -> WeightCharacteristic:
    """Reverse-Holder characteristic sup_Q avg(w^s)^(1/s) / (factor^theta avg w);
    s = inf uses max_Q w in the numerator."""
    require_weight(w)
    if not (s == math.inf or s > 1):
        raise ValueError(f"s must be > 1 or inf, got {s}")
    vals = w.values

    if s == math.inf:
        tables = {"w": _SourceSums(vals)}

        def numer(avgs, ext):
            return ext / avgs["w"]

        value, witness = _sweep(cubes, tables, ("w", "max"), rho, theta, numer)
    else:
        tables = {"w": _SourceSums(vals), "ws": _SourceSums(vals**s)}

        def numer(avgs, _ext):
            return avgs["ws"] ** (1.0 / s) / avgs["w"]

        value, witness = _sweep(cubes, tables, None, rho, theta, numer)
    return WeightCharacteristic(value, witness, s, theta, cubes.policy)


# ---------------------------------------------------------------------------
# A_infty epsilon form

@dataclass(frozen=True)
class EpsilonForm:
    C: float
    eps: float
    residual: float
    sample_count: int


def _subset_samples(w_cells: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Fraction/mass-ratio pairs for the extremal subsets of one cube.

    For fixed cardinality k the subset maximizing w(E) is the k largest-w
    cells, so the top-k packs dominate every subset of the same size; the
    bottom-k packs (equivalently complements of top packs) pin the small-y
    side.  Dyadic halves are covered by the packs up to ordering, so value
    packs are the whole sample.
    """
    flat = np.sort(w_cells.ravel())
    m = flat.size
    total = flat.sum()
    ks: set[int] = set()
    k = 1
    while k < m:
        ks.add(k)
        ks.add(m - k)
        k *= 2
    ks.add(m)
    karr = np.array(sorted(ks))
    csum = np.concatenate([[0.0], np.cumsum(flat)])
    bottom = csum[karr]
    top = total - csum[m - karr]
    x = np.concatenate([karr, karr]) / m
    y = np.concatenate([bottom, top]) / total
    return x, y


def ainf_epsilon_form(
    w: GridFunction,
    theta: float,
    rho: RhoSpec,
    cubes: CubeFamily,
    eps_grid: np.ndarray | None = None,
    C_cap: float = 8.0,
) -> EpsilonForm:
    """Fit (C, eps) with w(E)/w(Q) <= C factor^theta (|E|/|Q|)^eps on samples.

    Samples are the extremal cell packs of every cube in the family.  The
    fit walks an eps grid downward and takes the largest eps whose implied
    C = max y / x^eps stays below C_cap (Pareto point: max eps, then min C);
    zero sample violations hold by construction and residual reports the
    recomputed max violation.
    """
    require_weight(w)
    if eps_grid is None:
        eps_grid = np.linspace(1.0, 0.05, 39)
    xs: list[np.ndarray] = []
    ys: list[np.ndarray] = []
    for cube in cubes:
        if cube.cell_count == 1:
            continue
        x, y = _subset_samples(w.values[cube.slices()], w.domain.dim)
        fac = float(
            growth_factor(rho, cube.center()[None, :], cube.radius)[0]
        )
        xs.append(x)
        ys.append(y / fac**theta)
    if not xs:
        return EpsilonForm(1.0, 1.0, 0.0, 0)
    x = np.concatenate(xs)
    y = np.concatenate(ys)

    chosen = None
    for eps in eps_grid:
        C = float(np.max(y / x**eps))
        if C <= C_cap:
            chosen = (max(C, 1.0), float(eps))
            break
    if chosen is None:
        eps = float(eps_grid[-1])
        chosen = (max(float(np.max(y / x**eps)), 1.0), eps)
    C, eps = chosen
    residual = max(0.0, float(np.max(y - C * x**eps)))
    return EpsilonForm(C, eps, residual, int(x.size))


def factor_build(u: GridFunction, v: GridFunction, p: float) -> GridFunction:
    """Cellwise product weight u * v^(1-p)."""
    require_weight(u)
    require_weight(v)
    if not (p > 1 and math.isfinite(p)):
        raise ValueError(f"factor_build needs p in (1, inf), got {p}")
    return GridFunction(u.domain, u.values * v.values ** (1.0 - p))


# ---------------------------------------------------------------------------
# epsilon-power audit

@dataclass(frozen=True)
class EpsilonPowerReport:
    s0: float
    eps0: float
    rh_values: dict[float, float]
    ap_values: dict[float, dict[float, float]]   # eps -> theta -> characteristic
    refined_drift: dict[float, float] | None     # eps -> relative change


def epsilon_power_audit(
    u: GridFunction,
    v: GridFunction,
    p: float,
    rho: RhoSpec,
    cubes: CubeFamily,
    theta_ladder: tuple[float, ...] = THETA_LADDER,
    refined: tuple[GridFunction, GridFunction, CubeFamily] | None = None,
) -> EpsilonPowerReport:
    """Power eps0 = 1/s0' from u's reverse-Holder ladder, then the A_p
    characteristics of u * v^eps for eps below eps0.

    s0 is the largest ladder exponent whose characteristic stays below a
    finiteness cap.  When a refined (u, v, cubes) triple at level J+1 is
    supplied, the relative drift of the minimal characteristic is reported.
    """
    rh_vals: dict[float, float] = {}
    s0 = None
    for s in RH_LADDER:
        with np.errstate(over="ignore"):
            val = rh_characteristic(u, s, 0.0, rho, cubes).value
        rh_vals[s] = val
        if math.isfinite(val) and val <= _FINITE_CAP:
            s0 = s
    if s0 is None:
        s0 = RH_LADDER[0]
    eps0 = 1.0 - 1.0 / s0

    def chars(uu: GridFunction, vv: GridFunction, fam: CubeFamily):
        out: dict[float, dict[float, float]] = {}
        for frac in (0.25, 0.5, 0.75):
            eps = frac * eps0
            w_eps = GridFunction(uu.domain, uu.values * vv.values**eps)
            out[eps] = {
                th: ap_characteristic(w_eps, p, th, rho, fam).value
                for th in theta_ladder
            }
        return out

    ap_vals = chars(u, v, cubes)
    drift = None
    if refined is not None:
        u2, v2, fam2 = refined
        ap2 = chars(u2, v2, fam2)
        drift = {}
        for eps, by_theta in ap_vals.items():
            a = min(by_theta.values())
            b = min(ap2[eps].values())
            drift[eps] = abs(b - a) / a
    return EpsilonPowerReport(s0, eps0, rh_vals, ap_vals, drift)
