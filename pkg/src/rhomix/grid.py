"""Uniform dyadic grids, cell-aligned cubes, and exact cell-sum integration.

Everything downstream works on piecewise-constant functions over a uniform
grid of 2^level cells per axis on the box [0, side)^dim.  Integrals are then
exact finite sums, so inequality audits are exact up to float roundoff and
never owe anything to quadrature error.  Functions are extended by zero
outside the box; cube suprema are restricted to cubes inside the box.

Conventions used throughout the package:
  * a cube is anchored at integer cell coordinates and spans side_cells
    cells per axis, so anchor + side_cells <= n on every axis;
  * the radius of a cube is half its diagonal, sqrt(dim) * side_length / 2;
  * cube enumeration order is lexicographic by side_cells then anchor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "ALL_CELL_ALIGNED",
    "BoxSums",
    "Cube",
    "CubeFamily",
    "DYADIC_GRID_OF",
    "DYADIC_SIDES",
    "Domain",
    "DomainMismatchError",
    "GridFunction",
    "InvalidWeightError",
    "average",
    "dyadic_sum_pyramid",
    "enumerate_cubes",
    "integrate",
    "load_grid_function",
    "require_weight",
    "save_grid_function",
    "weighted_measure",
]


class DomainMismatchError(ValueError):
    """Two grid objects do not live on the same domain."""


class InvalidWeightError(ValueError):
    """A weight must be strictly positive and finite on every cell."""


@dataclass(frozen=True)
class Domain:
    """Box [0, side)^dim split into 2^level cells per axis."""

    dim: int
    side: float
    level: int

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not (self.side > 0 and math.isfinite(self.side)):
            raise ValueError(f"side must be positive and finite, got {self.side}")
        if not (isinstance(self.level, int) and self.level >= 1):
            raise ValueError(f"level must be an integer >= 1, got {self.level}")

    @property
    def n(self) -> int:
        """Cells per axis."""
        return 1 << self.level

    @property
    def cell_width(self) -> float:
        return self.side / self.n

    @property
    def cell_volume(self) -> float:
        return self.cell_width**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    def axis_centers(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        return (np.arange(self.n) + 0.5) * self.cell_width

    def cell_centers(self) -> np.ndarray:
        """(n^dim, dim) array of all cell centers, row-major cell order."""
        axes = [self.axis_centers() for _ in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def refine(self) -> "Domain":
        return Domain(self.dim, self.side, self.level + 1)


@dataclass(frozen=True)
class Cube:
    """Cell-aligned cube: anchor in cells, side_cells cells per axis."""

    domain: Domain
    anchor: tuple[int, ...]
    side_cells: int

    def __post_init__(self) -> None:
        if len(self.anchor) != self.domain.dim:
            raise ValueError("anchor length must equal domain dim")
        if self.side_cells < 1:
            raise ValueError("side_cells must be >= 1")
        for a in self.anchor:
            if a < 0 or a + self.side_cells > self.domain.n:
                raise ValueError(
                    f"cube [{self.anchor}, +{self.side_cells}) leaves the box"
                )

    @property
    def side_length(self) -> float:
        return self.side_cells * self.domain.cell_width

    @property
    def radius(self) -> float:
        """Half diagonal, sqrt(dim) * side_length / 2."""
        return math.sqrt(self.domain.dim) * self.side_length / 2.0

    @property
    def volume(self) -> float:
        return self.side_length**self.domain.dim

    @property
    def cell_count(self) -> int:
        return self.side_cells**self.domain.dim

    def center(self) -> np.ndarray:
        h = self.domain.cell_width
        return (np.asarray(self.anchor, dtype=float) + self.side_cells / 2.0) * h

    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(a, a + self.side_cells) for a in self.anchor)

    def contains_cube(self, other: "Cube") -> bool:
        if self.domain != other.domain:
            raise DomainMismatchError("cubes on different domains")
        return all(
            sa <= oa and oa + other.side_cells <= sa + self.side_cells
            for sa, oa in zip(self.anchor, other.anchor)
        )

    def contains_cell(self, cell: Sequence[int]) -> bool:
        return all(a <= c < a + self.side_cells for a, c in zip(self.anchor, cell))

    def mask(self) -> np.ndarray:
        m = np.zeros(self.domain.shape, dtype=bool)
        m[self.slices()] = True
        return m

    def children(self) -> list["Cube"]:
        """The 2^dim halves; only for even side_cells."""
        if self.side_cells % 2 != 0:
            raise ValueError("cannot bisect a cube with odd side_cells")
        half = self.side_cells // 2
        kids = []
        for offsets in np.ndindex(*(2,) * self.domain.dim):
            anchor = tuple(a + o * half for a, o in zip(self.anchor, offsets))
            kids.append(Cube(self.domain, anchor, half))
        return kids


@dataclass(frozen=True)
class GridFunction:
    """Piecewise-constant function: one float64 value per cell."""

    domain: Domain
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64).reshape(self.domain.shape)
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", arr)

    @classmethod
    def constant(cls, domain: Domain, value: float) -> "GridFunction":
        return cls(domain, np.full(domain.shape, float(value)))

    @classmethod
    def from_callable(
        cls, domain: Domain, fn: Callable[[np.ndarray], np.ndarray]
    ) -> "GridFunction":
        """Sample fn at cell centers; fn maps (m, dim) points to (m,) values."""
        vals = np.asarray(fn(domain.cell_centers()), dtype=np.float64)
        return cls(domain, vals.reshape(domain.shape))

    @classmethod
    def indicator(cls, domain: Domain, cube: Cube) -> "GridFunction":
        if cube.domain != domain:
            raise DomainMismatchError("indicator cube on a different domain")
        vals = np.zeros(domain.shape)
        vals[cube.slices()] = 1.0
        return cls(domain, vals)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.domain, self.values + other.values)

    def __mul__(self, other) -> "GridFunction":
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.domain, self.values * other.values)
        return GridFunction(self.domain, self.values * float(other))

    __rmul__ = __mul__

    def abs(self) -> "GridFunction":
        return GridFunction(self.domain, np.abs(self.values))

    def power(self, exponent: float) -> "GridFunction":
        return GridFunction(self.domain, self.values**exponent)

    def _check(self, other: "GridFunction") -> None:
        if self.domain != other.domain:
            raise DomainMismatchError("grid functions on different domains")


def integrate(f: GridFunction, cube: Cube | None = None) -> float:
    """Exact integral: cell volume times the sum of cell values."""
    if cube is None:
        return float(f.values.sum()) * f.domain.cell_volume
    if cube.domain != f.domain:
        raise DomainMismatchError("cube on a different domain")
    return float(f.values[cube.slices()].sum()) * f.domain.cell_volume


def average(f: GridFunction, cube: Cube) -> float:
    if cube.domain != f.domain:
        raise DomainMismatchError("cube on a different domain")
    return float(f.values[cube.slices()].sum()) / cube.cell_count


def weighted_measure(w: GridFunction, cells: np.ndarray) -> float:
    """w-measure of a cell set given as a boolean mask over the grid."""
    mask = np.asarray(cells, dtype=bool)
    if mask.shape != w.domain.shape:
        raise DomainMismatchError("cell mask shape does not match the grid")
    return float(w.values[mask].sum()) * w.domain.cell_volume


def require_weight(w: GridFunction) -> GridFunction:
    if not np.all(w.values > 0):
        raise InvalidWeightError("weight has non-positive cells")
    return w


# ---------------------------------------------------------------------------
# cube families

ALL_CELL_ALIGNED = "all_cell_aligned"
DYADIC_SIDES = "dyadic_sides"
DYADIC_GRID_OF = "dyadic_grid_of"


@dataclass(frozen=True)
class CubeFamily:
    """Deterministic enumeration of cubes, grouped by side for vector sweeps.

    Policies:
      * ALL_CELL_ALIGNED (dim 1 only): every anchored interval, n(n+1)/2 total.
      * DYADIC_SIDES: side_cells in {1, 2, 4, ..., n}, anchors on the stride
        lattice of the same granularity (disjoint tiles per side).
      * DYADIC_GRID_OF: recursive bisection tree of a root cube.
    """

    domain: Domain
    policy: str
    root: Cube | None = None

    def __post_init__(self) -> None:
        if self.policy not in (ALL_CELL_ALIGNED, DYADIC_SIDES, DYADIC_GRID_OF):
            raise ValueError(f"unknown cube family policy {self.policy!r}")
        if self.policy == ALL_CELL_ALIGNED and self.domain.dim != 1:
            raise ValueError("ALL_CELL_ALIGNED is only supported in dim 1")
        if self.policy == DYADIC_GRID_OF:
            if self.root is None:
                raise ValueError("DYADIC_GRID_OF needs a root cube")
            if self.root.domain != self.domain:
                raise DomainMismatchError("root cube on a different domain")
            if self.root.side_cells & (self.root.side_cells - 1):
                raise ValueError("DYADIC_GRID_OF root side_cells must be a power of 2")
        elif self.root is not None:
            raise ValueError("root is only meaningful for DYADIC_GRID_OF")

    def side_cells_list(self) -> list[int]:
        n = self.domain.n
        if self.policy == ALL_CELL_ALIGNED:
            return list(range(1, n + 1))
        if self.policy == DYADIC_SIDES:
            return [1 << k for k in range(self.domain.level + 1)]
        sides = []
        s = 1
        while s <= self.root.side_cells:
            sides.append(s)
            s *= 2
        return sides

    def anchors(self, side_cells: int) -> np.ndarray:
        """(m, dim) int array of anchors for this side, lexicographic order."""
        if self.policy == ALL_CELL_ALIGNED:
            starts = np.arange(self.domain.n - side_cells + 1)
            return starts[:, None]
        if self.policy == DYADIC_SIDES:
            starts = np.arange(0, self.domain.n, side_cells)
        else:
            root = self.root
            starts = None  # per-axis below
            per_axis = [
                np.arange(a, a + root.side_cells, side_cells) for a in root.anchor
            ]
            mesh = np.meshgrid(*per_axis, indexing="ij")
            return np.stack([m.ravel() for m in mesh], axis=-1)
        mesh = np.meshgrid(*([starts] * self.domain.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def count(self) -> int:
        return sum(len(self.anchors(s)) for s in self.side_cells_list())

    def __iter__(self) -> Iterator[Cube]:
        for s in self.side_cells_list():
            for anchor in self.anchors(s):
                yield Cube(self.domain, tuple(int(a) for a in anchor), s)


def enumerate_cubes(
    domain: Domain, policy: str, root: Cube | None = None
) -> CubeFamily:
    return CubeFamily(domain, policy, root)


# ---------------------------------------------------------------------------
# fast cube sums

class BoxSums:
    """O(1) sums over cell boxes after one cumulative-sum pass.

    The padded prefix table P satisfies P[i1,...,id] = sum of values over
    cells [0,i1) x ... x [0,id); a box sum is the usual 2^dim-corner
    inclusion-exclusion.
    """

    def __init__(self, values: np.ndarray):
        arr = np.asarray(values, dtype=np.float64)
        self.dim = arr.ndim
        p = arr
        for ax in range(self.dim):
            p = np.cumsum(p, axis=ax)
        self.table = np.pad(p, [(1, 0)] * self.dim)

    def box_sum(self, anchors: np.ndarray, side_cells: int) -> np.ndarray:
        """Sums over [anchor, anchor + side_cells) for each row of anchors."""
        a = np.atleast_2d(np.asarray(anchors, dtype=np.int64))
        total = np.zeros(a.shape[0])
        for corner in np.ndindex(*(2,) * self.dim):
            idx = tuple(
                a[:, ax] + (side_cells if corner[ax] else 0) for ax in range(self.dim)
            )
            sign = (-1) ** (self.dim - sum(corner))
            total += sign * self.table[idx]
        return total


def dyadic_sum_pyramid(values: np.ndarray) -> list[np.ndarray]:
    """Cell sums of every dyadic block, built by pairwise child sums.

    levels[j] has shape (m/2^j,)*dim and entry = sum over the corresponding
    2^j-wide block.  Both the dyadic maximal operator and the stopping-time
    decomposition read their averages from this one pyramid, so their
    comparisons see bit-identical floats.
    """
    arr = np.asarray(values, dtype=np.float64)
    m = arr.shape[0]
    if any(s != m for s in arr.shape) or m & (m - 1):
        raise ValueError("pyramid needs a cubical power-of-two array")
    levels = [arr]
    while m > 1:
        cur = levels[-1]
        nxt = cur
        for ax in range(arr.ndim):
            shape = list(nxt.shape)
            shape[ax] = shape[ax] // 2
            shape.insert(ax + 1, 2)
            nxt = nxt.reshape(shape).sum(axis=ax + 1)
        levels.append(nxt)
        m //= 2
    return levels


# ---------------------------------------------------------------------------
# serialization: CSV values (one per line, row-major) + JSON header

def save_grid_function(f: GridFunction, basepath: str | Path) -> Path:
    """Write <base>.csv (one value per line, row-major) and <base>.json."""
    base = Path(basepath)
    csv_path = base.with_suffix(".csv")
    np.savetxt(csv_path, f.values.ravel(), fmt="%.17g")
    header = {
        "dim": f.domain.dim,
        "side": f.domain.side,
        "level": f.domain.level,
        "values_file": csv_path.name,
    }
    json_path = base.with_suffix(".json")
    json_path.write_text(json.dumps(header, sort_keys=True, indent=1))
    return json_path


def load_grid_function(path: str | Path) -> GridFunction:
    json_path = Path(path)
    if json_path.suffix != ".json":
        json_path = json_path.with_suffix(".json")
    header = json.loads(json_path.read_text())
    for key in ("dim", "side", "level"):
        if key not in header:
            raise ValueError(f"grid function header missing {key!r}")
    domain = Domain(int(header["dim"]), float(header["side"]), int(header["level"]))
    values_file = json_path.parent / header.get("values_file", json_path.stem + ".csv")
    vals = np.loadtxt(values_file)
    if vals.size != domain.n**domain.dim:
        raise ValueError(
            f"value count {vals.size} does not match header "
            f"(expected {domain.n ** domain.dim})"
        )
    return GridFunction(domain, vals.reshape(domain.shape))
