"""Shared helpers for the test suite."""

import numpy as np
import pytest

from rhomix import Cube, GridFunction


def iter_cubes(fam):
    """Yield every Cube in a family, smallest side first."""
    for s in fam.side_cells_list():
        for anchor in fam.anchors(s):
            yield Cube(fam.root.domain if fam.root else fam_domain(fam), tuple(int(a) for a in anchor), s)


def fam_domain(fam):
    # families built by enumerate_cubes always carry a domain via some anchor
    raise AssertionError("family without root needs an explicit domain")


def cubes_of(domain, fam):
    """Materialize a family as a list of Cubes on a known domain."""
    out = []
    for s in fam.side_cells_list():
        for anchor in fam.anchors(s):
            out.append(Cube(domain, tuple(int(a) for a in anchor), s))
    return out


def brute_average(f: GridFunction, cube: Cube) -> float:
    """Independent cube average: plain numpy mean over the cube's cells."""
    return float(np.mean(f.values[cube.slices()]))


@pytest.fixture
def rng():
    return np.random.default_rng(20260817)
