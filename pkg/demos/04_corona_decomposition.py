"""Corona-style stopping time and the mixed weak-type ledger.

Walks the whole chain on one example: Calderon-Zygmund stopping cubes,
the tower of level sets, banding by the v average, principal forests with
their pointwise claims, and the two mixed verifications (dyadic ledger
and global constant).
"""

import numpy as np

from rhomix import (
    Cube,
    Domain,
    RhoSpec,
    build_forests,
    claim_audits,
    classify,
    cz_on_cube,
    level_decomposition,
    make_function,
    make_weight,
    m_dyadic,
    mixed_verify_dyadic,
    mixed_verify_global,
)


def stopping_time():
    dom = Domain(1, 8.0, 8)
    R = Cube(dom, (0,), dom.n)
    rng = np.random.default_rng(11)
    g = make_function(dom, {"kind": "random"}, rng).abs()

    lam = float(np.mean(g.values)) * 1.5
    cubes = cz_on_cube(g, R, lam)
    avgs = [float(g.values[Q.slices()].mean()) for Q in cubes]
    print(len(cubes), "stopping cubes at lam =", round(lam, 4))
    print("averages live in (lam, 2^d lam]:",
          round(min(avgs), 4), "..", round(max(avgs), 4),
          "cap", round(2 * lam, 4))

    covered = np.zeros(dom.shape, dtype=bool)
    for Q in cubes:
        covered[Q.slices()] = True
    level_set = m_dyadic(g, R).values > lam
    print("union of stopping cubes equals {M_dyadic g > lam}:",
          bool(np.array_equal(covered, level_set)))
    return dom, R, rng


def corona_chain(dom, R, rng):
    f = make_function(dom, {"kind": "spike", "count": 4}, rng).abs()
    u = make_weight(dom, {"kind": "smooth_random", "amp": 0.5}, rng)
    v = make_weight(dom, {"kind": "power", "alpha": 0.5}, rng)
    g = f * v

    decomp = level_decomposition(g, R)
    print("level tower: base a =", decomp.a, "k0 =", decomp.k0,
          "levels", sorted(decomp.levels))

    classified = classify(decomp, v)
    n_banded = sum(len(c) for c in classified.bands.values())
    n_low = sum(len(c) for c in classified.minus1.values())
    print("banded cubes:", n_banded, " low-average (band -1):", n_low)

    forests = build_forests(classified, u)
    rep = claim_audits(forests, classified, u)
    print("principal cubes per band:", rep.principal_counts)
    print("h1 <= 2^(1+theta) [u] u: violations =", rep.h1_violations,
          " max ratio =", round(rep.h1_max_ratio, 4))
    if rep.h2_sup_ratio is not None:
        print("h2 / u sup on the -1 branch:", round(rep.h2_sup_ratio, 4))

    dy = mixed_verify_dyadic(f, u, v, R)
    print("dyadic ledger: uv(level set) =", round(dy.uv_levelset, 4),
          " I + II =", round(dy.term_I + dy.term_II, 4),
          " tail ok =", dy.tail_ok, " chain ok =", dy.upper_le_terms)

    glob = mixed_verify_global(f, u, v, RhoSpec.classical(), sigma=0.0)
    print("global constant sup_t t uv({M(fv)/v > t}) / int |f|uv =",
          round(glob.constant_exact, 4))


if __name__ == "__main__":
    corona_chain(*stopping_time())
