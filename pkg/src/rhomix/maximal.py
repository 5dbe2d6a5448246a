"""Scale-suppressed maximal operators on the grid.

The central object is

    M[sigma] f(x) = sup over cubes Q = Q(x0, r0) containing x of
                    (1 + r0/rho(x0))^(-sigma) * avg_Q |f|,

with the sup running over a cube family: every cell-aligned interval in
dim 1 (exact within the discretization), dyadic-side tiles in dim 2 (the
fixed dimensional gap to the full sup cancels in like-vs-like audits).
Localized and dyadic variants restrict the family to one root cube, and the
local/global split separates subcritical cubes (r <= rho) from the rest.

Sweeps cost O(n log n) to O(n^2): one prefix-sum table gives every cube
average in O(1) and a sliding max-filter turns per-anchor values into
per-cell suprema.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d

from .critical import RhoSpec, growth_factor, rho_values
from .grid import (
    ALL_CELL_ALIGNED,
    BoxSums,
    Cube,
    CubeFamily,
    DYADIC_SIDES,
    Domain,
    GridFunction,
    dyadic_sum_pyramid,
    enumerate_cubes,
)

__all__ = [
    "GridShiftSet",
    "LocGlobReport",
    "ShiftDominationReport",
    "default_family",
    "loc_glob_split",
    "m_dyadic",
    "m_localized",
    "m_rho_sigma",
    "shifted_grid_domination_audit",
]


def default_family(domain: Domain) -> CubeFamily:
    policy = ALL_CELL_ALIGNED if domain.dim == 1 else DYADIC_SIDES
    return enumerate_cubes(domain, policy)


def _anchor_max_to_cells(vals: np.ndarray, s: int, n: int) -> np.ndarray:
    """out[c] = max over anchors a in [c-s+1, c] of vals[a] (dim 1).

    vals has one entry per valid anchor (n - s + 1 of them); invalid anchor
    slots are padded with -inf so the filter window never sees them.
    """
    if s == 1:
        return vals
    padded = np.full(n, -np.inf)
    padded[: n - s + 1] = vals
    # origin (s-1)//2 ends the length-s window at the output cell for both
    # parities, so anchor a reaches exactly the cells [a, a+s-1]
    return maximum_filter1d(
        padded, size=s, mode="constant", cval=-np.inf, origin=(s - 1) // 2
    )


def _tile_to_cells(vals: np.ndarray, s: int) -> np.ndarray:
    """Upsample per-tile values back to cells (dim 2 disjoint tiles)."""
    return np.repeat(np.repeat(vals, s, axis=0), s, axis=1)


def _sweep_max(
    family: CubeFamily,
    per_cube,
) -> np.ndarray:
    """Cellwise sup over the family of a per-cube score.

    per_cube(side, anchors) returns one score per anchor; the sweep spreads
    each cube's score onto the cells it covers and keeps the running max.
    """
    domain = family.domain
    n = domain.n
    out = np.full(domain.shape, -np.inf)
    for s in family.side_cells_list():
        anchors = family.anchors(s)
        scores = per_cube(s, anchors)
        if domain.dim == 1:
            if family.policy == ALL_CELL_ALIGNED:
                layer = _anchor_max_to_cells(scores, s, n)
            else:
                layer = np.repeat(scores, s)
            np.maximum(out, layer, out=out)
        else:
            m = n // s
            np.maximum(out, _tile_to_cells(scores.reshape(m, m), s), out=out)
    return out


def m_rho_sigma(
    f: GridFunction,
    rho: RhoSpec,
    sigma: float = 0.0,
    q: float = 1.0,
    cubes: CubeFamily | None = None,
) -> GridFunction:
    """Scale-suppressed maximal function (power-mean variant for q > 1).

    With q > 1 this is (M[sigma](|f|^q))^(1/q).  Monotone decreasing in
    sigma cellwise; sigma = 0 over ALL_CELL_ALIGNED in dim 1 is the exact
    discrete uncentered maximal function.
    """
    if sigma < 0 or q < 1:
        raise ValueError("need sigma >= 0 and q >= 1")
    family = cubes if cubes is not None else default_family(f.domain)
    domain = f.domain
    h = domain.cell_width
    table = BoxSums(np.abs(f.values) ** q)

    def per_cube(s: int, anchors: np.ndarray) -> np.ndarray:
        avg = table.box_sum(anchors, s) / s**domain.dim
        if sigma == 0.0 or rho.is_classical:
            return avg
        centers = (anchors + s / 2.0) * h
        radius = math.sqrt(domain.dim) * s * h / 2.0
        return avg * growth_factor(rho, centers, radius) ** (-sigma)

    out = _sweep_max(family, per_cube)
    return GridFunction(domain, out ** (1.0 / q) if q != 1.0 else out)


def m_dyadic(f: GridFunction, R: Cube) -> GridFunction:
    """Dyadic maximal function over the bisection tree of R (zero off R).

    Averages are read from the pairwise child-sum pyramid, so a stopping
    time built on the same pyramid sees bit-identical floats.
    """
    if R.domain != f.domain:
        raise ValueError("root cube on a different domain")
    if R.side_cells & (R.side_cells - 1):
        raise ValueError("dyadic root needs a power-of-two side")
    dim = f.domain.dim
    block = np.abs(f.values[R.slices()])
    levels = dyadic_sum_pyramid(block)
    out = np.zeros_like(block)
    for j, sums in enumerate(levels):
        avg = sums / float((1 << j) ** dim)
        for ax in range(dim):
            avg = np.repeat(avg, 1 << j, axis=ax)
        np.maximum(out, avg, out=out)
    full = np.zeros(f.domain.shape)
    full[R.slices()] = out
    return GridFunction(f.domain, full)


def m_localized(f: GridFunction, R: Cube) -> GridFunction:
    """Maximal function over cubes contained in R (zero off R).

    Dim 1 scans every cell-aligned interval inside R; dim 2 takes the
    dyadic-sides tiles contained in R together with the bisection tree of
    R (R's own average when an odd side leaves no tree), so the localized
    sup always dominates the dyadic one.
    """
    if R.domain != f.domain:
        raise ValueError("root cube on a different domain")
    domain = f.domain
    if domain.dim == 1:
        sub = np.abs(f.values[R.slices()])
        m = sub.shape[0]
        table = BoxSums(sub)
        out = np.full(m, -np.inf)
        for s in range(1, m + 1):
            anchors = np.arange(m - s + 1)[:, None]
            avg = table.box_sum(anchors, s) / s
            np.maximum(out, _anchor_max_to_cells(avg, s, m), out=out)
        full = np.zeros(domain.shape)
        full[R.slices()] = out
        return GridFunction(domain, full)

    if R.side_cells & (R.side_cells - 1) == 0:
        out = m_dyadic(f, R).values.copy()
    else:
        # no bisection tree for an odd-sided cube; R itself still competes
        out = np.zeros(domain.shape)
        out[R.slices()] = np.mean(np.abs(f.values[R.slices()]))
    table = BoxSums(np.abs(f.values))
    n = domain.n
    s = 1
    while s <= R.side_cells:
        # dyadic-sides tiles of the full grid that fit inside R
        lo = [-(-a // s) * s for a in R.anchor]          # first tile anchor >= a
        hi = [((a + R.side_cells) // s) * s for a in R.anchor]
        if all(l + s <= h for l, h in zip(lo, hi)):
            per_axis = [np.arange(l, h - s + 1, s) for l, h in zip(lo, hi)]
            mesh = np.meshgrid(*per_axis, indexing="ij")
            anchors = np.stack([g.ravel() for g in mesh], axis=-1)
            avg = table.box_sum(anchors, s) / s**domain.dim
            for a_row, val in zip(anchors, avg):
                sl = tuple(slice(a, a + s) for a in a_row)
                region = out[sl]
                np.maximum(region, val, out=region)
        s *= 2
    return GridFunction(domain, out)


# ---------------------------------------------------------------------------
# local / global split

@dataclass(frozen=True)
class LocGlobReport:
    loc: GridFunction
    glob: GridFunction
    sigma: float
    max_upper_violation: float   # M - (loc + glob), positive means broken
    max_lower_violation: float   # 2^-sigma max(loc, glob) - M
    subcritical_cubes: int
    supercritical_cubes: int


def loc_glob_split(
    f: GridFunction,
    rho: RhoSpec,
    sigma: float,
    cubes: CubeFamily | None = None,
) -> LocGlobReport:
    """Split the sup into subcritical cubes (r <= rho(center), no factor)
    and supercritical ones carrying (rho/r)^sigma; audits the sandwich

        M[sigma] f <= loc + glob,   M[sigma] f >= 2^-sigma max(loc, glob).

    Empty pieces are zero by the zero-extension convention.
    """
    family = cubes if cubes is not None else default_family(f.domain)
    domain = f.domain
    h = domain.cell_width
    table = BoxSums(np.abs(f.values))
    counts = [0, 0]

    def split_scores(s, anchors, want_loc):
        avg = table.box_sum(anchors, s) / s**domain.dim
        radius = math.sqrt(domain.dim) * s * h / 2.0
        if rho.is_classical:
            sub = np.ones(len(anchors), dtype=bool)
            rv = None
        else:
            rv = rho_values(rho, (anchors + s / 2.0) * h)
            sub = radius <= rv
        if want_loc:
            return np.where(sub, avg, -np.inf)
        if rv is None:
            return np.full(len(anchors), -np.inf)
        ratio = rv / radius
        ratio[sub] = 1.0  # discarded below; keeps the power from overflowing
        scores = avg * ratio**sigma
        scores[sub] = -np.inf
        return scores

    def loc_cube(s, anchors):
        scores = split_scores(s, anchors, True)
        counts[0] += int(np.sum(scores > -np.inf))
        return scores

    def glob_cube(s, anchors):
        scores = split_scores(s, anchors, False)
        counts[1] += int(np.sum(scores > -np.inf))
        return scores

    loc_vals = np.maximum(_sweep_max(family, loc_cube), 0.0)
    glob_vals = np.maximum(_sweep_max(family, glob_cube), 0.0)
    m_vals = m_rho_sigma(f, rho, sigma, 1.0, family).values
    upper = float(np.max(m_vals - (loc_vals + glob_vals)))
    lower = float(np.max(2.0**-sigma * np.maximum(loc_vals, glob_vals) - m_vals))
    return LocGlobReport(
        loc=GridFunction(domain, loc_vals),
        glob=GridFunction(domain, glob_vals),
        sigma=sigma,
        max_upper_violation=upper,
        max_lower_violation=lower,
        subcritical_cubes=counts[0],
        supercritical_cubes=counts[1],
    )


# ---------------------------------------------------------------------------
# shifted dyadic grids (the one-third trick)

class GridShiftSet:
    """3^dim dyadic grids whose per-scale offsets walk the one-third shifts.

    Per axis, grid i in {0, 1, 2} uses offset o_i(k) at scale 2^k cells,
    chosen by the nested recursion o_i(k+1) in {o_i(k), o_i(k) + 2^k} that
    tracks the alternating ideal shift frac((-1)^k i/3) * 2^k.  At the top
    scale the offsets land near 0, n/3, 2n/3.  No point of the box stays on
    a grid-i boundary across all scales, so every cell-aligned cube has a
    containing cube in every grid at some finite scale.
    """

    def __init__(self, domain: Domain, extra_scales: int = 3):
        self.domain = domain
        self.k_max = domain.level + extra_scales
        self.offsets = [self._axis_offsets(i) for i in range(3)]

    def _axis_offsets(self, i: int) -> list[int]:
        offs = [0]
        for k in range(self.k_max):
            target = ((i if k % 2 == 1 else (3 - i) % 3) / 3.0) * (1 << (k + 1))
            stay, move = offs[k], offs[k] + (1 << k)
            offs.append(stay if abs(stay - target) <= abs(move - target) else move)
        return offs

    def grid_ids(self) -> list[tuple[int, ...]]:
        return [ids for ids in np.ndindex(*(3,) * self.domain.dim)]

    def locate_parent(self, grid_id: tuple[int, ...], Q: Cube):
        """Minimal grid cube containing Q: (anchor vector, side) in cells,
        anchor possibly outside the box; None when no scale <= 2^k_max works."""
        q = Q.side_cells
        k_lo = max(0, (q - 1).bit_length())
        for k in range(k_lo, self.k_max + 1):
            s = 1 << k
            anchor = []
            ok = True
            for ax, i in enumerate(grid_id):
                off = self.offsets[i][k]
                a = Q.anchor[ax]
                b = off + ((a - off) // s) * s
                if a + q > b + s:
                    ok = False
                    break
                anchor.append(b)
            if ok:
                return tuple(anchor), s
        return None


def _dyadic_max_on_window(
    fq: np.ndarray, Q: Cube, anchor: tuple[int, ...], s: int
) -> np.ndarray:
    """M over the bisection tree of the (possibly box-escaping) window
    [anchor, anchor+s), input f restricted to Q and extended by zero,
    returned on the cells of Q."""
    dim = len(anchor)
    pad = np.zeros((s,) * dim)
    sl = tuple(
        slice(Q.anchor[ax] - anchor[ax], Q.anchor[ax] - anchor[ax] + Q.side_cells)
        for ax in range(dim)
    )
    pad[sl] = fq
    levels = dyadic_sum_pyramid(pad)
    out = np.zeros_like(pad)
    for j, sums in enumerate(levels):
        avg = sums / float((1 << j) ** dim)
        for ax in range(dim):
            avg = np.repeat(avg, 1 << j, axis=ax)
        np.maximum(out, avg, out=out)
    return out[sl]


@dataclass(frozen=True)
class ShiftDominationReport:
    violations: int
    max_violation: float          # max of lhs - 3^dim * sum, <= 0 when clean
    lam_best_side_ratio: float    # best-aligned grid: parent side / cube side
    lam_max_dilation: float       # concentric dilation covering every parent
    located_all: bool
    escaped_box: bool             # some parent had to leave the box


def shifted_grid_domination_audit(
    f: GridFunction, Q: Cube, shifts: GridShiftSet | None = None
) -> ShiftDominationReport:
    """Check M_Q f <= 3^dim * sum over grids of M_dyadic over the located
    parent of (f restricted to Q), cellwise on Q.

    Each of the 3^dim shifted grids contributes its minimal cube containing
    Q; parents may stick out of the box (zero extension, flagged).  The
    best-aligned side ratio tracks the classical bound of 6; the max
    dilation over all parents is reported as well.
    """
    domain = f.domain
    if shifts is None:
        shifts = GridShiftSet(domain)
    lhs = m_localized(f, Q).values[Q.slices()]
    fq = np.abs(f.values[Q.slices()])
    total = np.zeros_like(fq)
    located_all = True
    escaped = False
    best_ratio = math.inf
    max_dil = 0.0
    q = Q.side_cells
    for gid in shifts.grid_ids():
        found = shifts.locate_parent(gid, Q)
        if found is None:
            located_all = False
            continue
        anchor, s = found
        if any(b < 0 or b + s > domain.n for b in anchor):
            escaped = True
        total += _dyadic_max_on_window(fq, Q, anchor, s)
        best_ratio = min(best_ratio, s / q)
        ext = max(
            max(Q.anchor[ax] - anchor[ax], (anchor[ax] + s) - (Q.anchor[ax] + q))
            for ax in range(domain.dim)
        )
        max_dil = max(max_dil, (2.0 * ext + q) / q)
    rhs = 3.0**domain.dim * total
    diff = lhs - rhs
    tol = 1e-12 * max(1.0, float(np.max(np.abs(lhs))))
    return ShiftDominationReport(
        violations=int(np.sum(diff > tol)),
        max_violation=float(np.max(diff)),
        lam_best_side_ratio=float(best_ratio),
        lam_max_dilation=float(max_dil),
        located_all=located_all,
        escaped_box=escaped,
    )
