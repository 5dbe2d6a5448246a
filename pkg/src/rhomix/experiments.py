"""Experiment registry: one named probe per verified claim.

Each experiment maps a JSON-friendly config to a Report whose canonical
payload (config echo, measured constants, ladder values, pass flags,
tables) is a pure function of (config, seed).  Wall-clock time is kept on
the report object and written to a sidecar file, never into the canonical
bytes, so identical runs emit identical reports.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .corona import (
    build_forests,
    claim_audits,
    classify,
    level_decomposition,
    mixed_verify_dyadic,
    mixed_verify_global,
)
from .critical import RhoSpec, audit_admissibility, critical_covering
from .extrapolation import (
    SCZOKernel,
    coifman_check,
    estimate_K0,
    ladder_exponent,
    mixed_for_T,
    rdf_audit,
)
from .grid import Cube, GridFunction, integrate
from .lorentz import (
    WeightedMeasure,
    distribution,
    interpolation_audit,
    lorentz_norm,
    rearrangement,
    weak_norm,
)
from .maximal import default_family, loc_glob_split, m_rho_sigma
from .suite import (
    SuiteBundle,
    domain_from_json,
    generate_suite,
    make_function,
    make_weight,
    rho_from_json,
    standard_suite_spec,
)
from .weights import RH_LADDER, THETA_LADDER, ap_characteristic, rh_characteristic

__all__ = [
    "EXPERIMENT_KINDS",
    "Report",
    "UsageError",
    "default_config",
    "run_experiment",
    "run_many",
    "write_report",
]


class UsageError(ValueError):
    """Config schema violation; the message carries the field path."""


def _plain(x):
    """Recursively coerce numpy scalars/arrays for JSON emission."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    return x


@dataclass
class Report:
    experiment: str
    config: dict
    measured: dict
    passes: dict
    deltas: dict = field(default_factory=dict)
    tables: list = field(default_factory=list)
    wall_clock_s: float = 0.0

    @property
    def ok(self) -> bool:
        return all(bool(v) for v in self.passes.values())

    def canonical_json(self) -> str:
        payload = {
            "experiment": self.experiment,
            "config": _plain(self.config),
            "measured": _plain(self.measured),
            "passes": _plain(self.passes),
            "deltas": _plain(self.deltas),
            "tables": _plain(self.tables),
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def csv_text(self) -> str:
        if not self.tables:
            return ""
        fields = sorted({k for row in self.tables for k in row})
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in self.tables:
            writer.writerow(_plain(row))
        return buf.getvalue()


def write_report(report: Report, outdir: str) -> list[str]:
    """Atomic emission: <id>.json, <id>.csv (when tabled), <id>.time.txt."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    base = os.path.join(outdir, report.experiment)
    for suffix, text in (
        (".json", report.canonical_json()),
        (".csv", report.csv_text()),
        (".time.txt", f"{report.wall_clock_s:.3f}\n"),
    ):
        if not text:
            continue
        tmp = base + suffix + ".tmp"
        with open(tmp, "w") as fh:
            fh.write(text)
        os.replace(tmp, base + suffix)
        written.append(base + suffix)
    return written


# ---------------------------------------------------------------------------
# config plumbing

def _require(config: dict, path: str, typ=None):
    node = config
    walked = []
    for part in path.split("."):
        walked.append(part)
        if not isinstance(node, dict) or part not in node:
            raise UsageError(f"config.{'.'.join(walked)} is required")
        node = node[part]
    if typ is not None and not isinstance(node, typ):
        raise UsageError(f"config.{path} must be {typ}")
    return node


def default_config(kind: str, dim: int = 1, level: int = 8, seed: int = 7) -> dict:
    base = standard_suite_spec(dim=dim, level=level, seed=seed)
    cfg = {"kind": kind, "suite": base, "seed": seed, "tolerances": {}}
    if kind in ("rho-audit",):
        cfg["rho"] = {"kind": "analytic", "name": "inv_one_plus_dist"}
        cfg["pairs"] = 2000
        cfg["sigmas"] = [1.0, 2.0, 4.0]
    if kind in ("mixed-T", "coifman"):
        cfg["kernel"] = {"profile": "odd_inverse", "N": 0.0, "delta": 1.0,
                         "rho": {"kind": "classical"}}
    if kind == "rdf":
        cfg["depth"] = 12
    if kind == "maximal-eval":
        cfg["sigma"] = 0.0
        cfg["q"] = 1.0
    return cfg


def _kernel_from_json(obj: dict) -> SCZOKernel:
    return SCZOKernel(
        profile=_require(obj, "profile", str),
        N=float(obj.get("N", 0.0)),
        delta=float(obj.get("delta", 1.0)),
        rho=rho_from_json(obj.get("rho", {"kind": "classical"})),
    )


def _suite(config: dict) -> SuiteBundle:
    spec = _require(config, "suite", dict)
    return generate_suite(spec, int(config.get("seed", spec.get("seed", 0))))


# ---------------------------------------------------------------------------
# the experiments

def _exp_rho_audit(config):
    rho = rho_from_json(_require(config, "rho", dict))
    domain = domain_from_json(_require(config, "suite.domain", dict))
    tol = config.get("tolerances", {}).get("cover_residual", 0.10)
    measured, passes, tables = {}, {}, []
    adm = audit_admissibility(
        rho, domain, pair_sample_size=int(config.get("pairs", 2000)),
        seed=int(config.get("seed", 0)),
    )
    measured.update(
        C0=adm.C0, N0=adm.N0, max_violation=adm.max_violation,
        implied_C0_by_N0=adm.implied_C0_by_N0,
    )
    passes["admissible"] = adm.max_violation == 0.0
    if not rho.is_classical:
        sigmas = tuple(float(s) for s in config.get("sigmas", (1.0, 2.0, 4.0)))
        cover = critical_covering(rho, domain, sigmas=sigmas)
        measured.update(
            N1=cover.N1, C_fit=cover.C_fit, fit_residual=cover.fit_residual,
            cover_count=len(cover.centers), capped=cover.capped,
        )
        passes["cover_fit"] = cover.fit_residual <= tol
        for s, count in cover.overlap.items():
            tables.append({"sigma": s, "overlap": count})
    return measured, passes, {}, tables


def _exp_weights_char(config):
    bundle = _suite(config)
    fam = default_family(bundle.domain)
    measured, passes, tables = {}, {}, []
    worst = 0.0
    for i, pair in enumerate(bundle.pairs):
        for name, w in (("u", pair.u), ("v", pair.v)):
            for theta in THETA_LADDER:
                c = ap_characteristic(w, 2.0, theta, bundle.rho, fam)
                tables.append({
                    "pair": i, "label": pair.label, "weight": name,
                    "theta": theta, "p": 2.0, "ap": c.value,
                })
                worst = max(worst, c.value)
            for s in RH_LADDER:
                c = rh_characteristic(w, s, 0.0, bundle.rho, fam)
                tables.append({
                    "pair": i, "label": pair.label, "weight": name,
                    "theta": 0.0, "s": s, "rh": c.value,
                })
    measured["max_ap_char"] = worst
    measured["retries"] = bundle.retries_total
    passes["all_finite"] = math.isfinite(worst)
    return measured, passes, {}, tables


def _exp_maximal_eval(config):
    bundle = _suite(config)
    fam = default_family(bundle.domain)
    sigma = float(config.get("sigma", 0.0))
    q = float(config.get("q", 1.0))
    measured, passes, tables = {}, {}, []
    bad = 0
    for i, f in enumerate(bundle.fs):
        m = m_rho_sigma(f, bundle.rho, sigma, q, fam)
        arg = int(np.argmax(m.values))
        tables.append({
            "f": i, "max": float(m.values.max()), "argmax_cell": arg,
        })
        split = loc_glob_split(f, bundle.rho, sigma, fam)
        bad += int(split.max_upper_violation > 1e-12)
        bad += int(split.max_lower_violation > 1e-12)
    measured["sandwich_violations"] = bad
    passes["loc_glob_sandwich"] = bad == 0
    return measured, passes, {}, tables


def _box_root(domain) -> Cube:
    return Cube(domain, (0,) * domain.dim, domain.n)


def _exp_corona_run(config):
    bundle = _suite(config)
    R = _box_root(bundle.domain)
    a = float(config.get("a", 2 ** (bundle.domain.dim + 1)))
    measured, passes, tables = {}, {}, []
    all_chain = True
    all_tail = True
    h1_bad = 0
    worst_ratio = 0.0
    for i, pair in enumerate(bundle.pairs):
        for j, f in enumerate(bundle.fs[:4]):
            rep = mixed_verify_dyadic(f, pair.u, pair.v, R, a)
            all_chain &= rep.upper_le_terms
            all_tail &= rep.tail_ok
            if math.isfinite(rep.ratio):
                worst_ratio = max(worst_ratio, rep.ratio)
            tables.append({
                "pair": i, "f": j, "ratio": rep.ratio, "k0": rep.k0,
                "I": rep.term_I, "II": rep.term_II,
                "sum_upper": rep.sum_upper, "tail": rep.tail_sum,
            })
            if rep.empty:
                continue
            g = GridFunction(f.domain, np.abs(f.values) * pair.v.values)
            decomp = level_decomposition(g, R, a)
            if decomp.empty:
                continue
            cls = classify(decomp, pair.v)
            forests = build_forests(cls, pair.u)
            claims = claim_audits(forests, cls, pair.u)
            h1_bad += sum(claims.h1_violations.values())
    measured["worst_ratio"] = worst_ratio
    measured["h1_violations"] = h1_bad
    passes["exact_chain"] = all_chain
    passes["tail_bound"] = all_tail
    passes["claim_h1"] = h1_bad == 0
    return measured, passes, {}, tables


def _exp_mixed_m(config):
    bundle = _suite(config)
    tol = config.get("tolerances", {}).get("refinement", 0.25)
    measured, passes, tables = {}, {}, []
    deltas = {}
    finite = True
    first = None
    for i, pair in enumerate(bundle.pairs):
        for j, f in enumerate(bundle.fs[:4]):
            rep = mixed_verify_global(f, pair.u, pair.v, bundle.rho)
            finite &= math.isfinite(rep.constant_exact)
            tables.append({
                "pair": i, "f": j, "constant": rep.constant_exact,
                "sigma": rep.sigma, "theta": rep.theta,
                "loc": rep.loc_constant, "glob": rep.glob_constant,
            })
            if first is None:
                first = (pair, f, rep)
    measured["sigma"] = first[2].sigma if first else 0.0
    measured["theta"] = first[2].theta if first else 0.0
    if first is not None:
        pair, f, rep = first
        fine = bundle.domain.refine()
        up = lambda w: GridFunction(fine, np.repeat(
            np.repeat(w.values, 2, axis=0), 2, axis=1
        ) if fine.dim == 2 else np.repeat(w.values, 2, axis=0))
        rep2 = mixed_verify_global(
            up(f), up(pair.u), up(pair.v), bundle.rho,
            sigma=rep.sigma, theta=rep.theta,
        )
        drift = abs(rep2.constant_exact - rep.constant_exact) / rep.constant_exact
        deltas["refinement"] = drift
        passes["refinement_stable"] = drift <= tol
    passes["all_finite"] = finite
    return measured, passes, deltas, tables


def _exp_mixed_t(config):
    bundle = _suite(config)
    kernel = _kernel_from_json(_require(config, "kernel", dict))
    measured, passes, tables = {}, {}, []
    finite = True
    for i, pair in enumerate(bundle.pairs):
        for j, f in enumerate(bundle.fs[:3]):
            rep = mixed_for_T(f, pair.u, pair.v, kernel)
            finite &= math.isfinite(rep.constant)
            tables.append({
                "pair": i, "f": j, "constant": rep.constant,
                "weak_T": rep.weak_T, "weak_M": rep.weak_M,
                "comparison_C": rep.comparison_C, "sigma": rep.sigma,
            })
    passes["all_finite"] = finite
    measured["worst"] = max((r["constant"] for r in tables), default=0.0)
    return measured, passes, {}, tables


def _exp_coifman(config):
    bundle = _suite(config)
    kernel = _kernel_from_json(_require(config, "kernel", dict))
    theta = float(config.get("theta", 1.0))
    p = float(config.get("p", 2.0))
    tol = config.get("tolerances", {}).get("refinement", 0.5)
    w = bundle.pairs[0].u
    rep = coifman_check(kernel, w, p, theta, list(bundle.fs))
    fine = bundle.domain.refine()

    def up(g):
        vals = g.values
        for ax in range(fine.dim):
            vals = np.repeat(vals, 2, axis=ax)
        return GridFunction(fine, vals)

    rep2 = coifman_check(kernel, up(w), p, theta, [up(f) for f in bundle.fs])
    drift = (
        abs(rep2.ratio_max - rep.ratio_max) / rep.ratio_max
        if rep.ratio_max > 0
        else 0.0
    )
    measured = {"ratio_max": rep.ratio_max, "ratio_max_fine": rep2.ratio_max,
                "p": p, "theta": theta, "w_ainf": rep.w_ainf}
    passes = {"finite": math.isfinite(rep.ratio_max),
              "refinement_stable": drift <= tol}
    tables = [{"f": i, "ratio": r} for i, r in enumerate(rep.ratios)]
    return measured, passes, {"refinement": drift}, tables


def _exp_rdf(config):
    bundle = _suite(config)
    fam = default_family(bundle.domain)
    depth = int(config.get("depth", 12))
    pair = bundle.pairs[0]
    sigma = ladder_exponent(pair.u, bundle.rho, fam)
    fs = [f.abs() for f in bundle.fs if float(np.max(np.abs(f.values))) > 0]
    state = estimate_K0(pair.u, pair.v, bundle.rho, sigma, None, fs, fam, depth)
    audit = rdf_audit(fs[0], pair.u, bundle.rho, sigma, state.K0, depth, fam)
    measured = {
        "K0": state.K0, "p0": state.p0, "q": state.q, "t": state.t,
        "eps": state.eps, "sigma": sigma, "tail_bound": audit.tail_bound,
        "char_value": audit.char_value, "char_bound": audit.char_bound,
    }
    passes = {
        "minorant_exact": audit.minorant_exact,
        "sandwich": audit.sandwich_violations == 0,
        "char_le_2K0": audit.char_ok,
    }
    return measured, passes, {}, []


def _exp_lorentz(config):
    bundle = _suite(config)
    rng = np.random.default_rng(int(config.get("seed", 0)) + 101)
    domain = bundle.domain
    count = int(config.get("instances", 200))
    bad = 0
    for _ in range(count):
        f = make_function(domain, {"kind": "random"}, rng)
        g = make_function(domain, {"kind": "random"}, rng)
        mu = WeightedMeasure(make_weight(domain, {"kind": "smooth_random"}, rng))
        table_f = rearrangement(f, mu)
        table_g = rearrangement(g, mu)
        t = float(rng.uniform(0, mu.total()))
        s = float(rng.uniform(0, f.values.max() or 1.0))
        fstar_t = table_f.f_star(t)
        bad += int(distribution(f, mu, fstar_t) > t + 1e-12)
        lam = distribution(f, mu, s)
        bad += int((fstar_t > s) != (t < lam)) if abs(t - lam) > 1e-12 else 0
        t1, t2 = t / 2, t / 3
        fg = GridFunction(domain, f.values + g.values)
        bad += int(
            rearrangement(fg, mu).f_star(t1 + t2)
            > table_f.f_star(t1) + table_g.f_star(t2) + 1e-12
        )
        bad += int(abs(table_f.f_star(0.0) - float(np.abs(f.values).max())) > 1e-12)
    measured = {"violations": bad, "instances": count}
    passes = {"properties": bad == 0}
    return measured, passes, {}, []


def _exp_interpolation(config):
    bundle = _suite(config)
    fam = default_family(bundle.domain)
    mu = WeightedMeasure(bundle.pairs[0].u)

    def T(g):
        return m_rho_sigma(g, RhoSpec.classical(), 0.0, 1.0, fam)

    p0 = 1.0
    p = 2.0
    rep = interpolation_audit(T, p0, p, mu, list(bundle.fs))
    measured = {
        "C0": rep.C0, "C1": rep.C1, "bound_constant": rep.bound_constant,
        "max_ratio": rep.max_ratio, "hyp_max_ratio": rep.hyp_max_ratio,
        "checked": rep.checked,
    }
    passes = {"no_violations": rep.total_violations == 0}
    return measured, passes, {}, []


EXPERIMENT_KINDS = {
    "rho-audit": _exp_rho_audit,
    "weights-char": _exp_weights_char,
    "maximal-eval": _exp_maximal_eval,
    "corona-run": _exp_corona_run,
    "mixed-M": _exp_mixed_m,
    "mixed-T": _exp_mixed_t,
    "coifman": _exp_coifman,
    "rdf": _exp_rdf,
    "lorentz": _exp_lorentz,
    "interpolation": _exp_interpolation,
}


def run_experiment(config: dict) -> Report:
    """Dispatch one experiment; deterministic given (config, seed)."""
    if not isinstance(config, dict):
        raise UsageError("config must be a JSON object")
    kind = _require(config, "kind", str)
    if kind not in EXPERIMENT_KINDS:
        raise UsageError(
            f"config.kind must be one of {sorted(EXPERIMENT_KINDS)}"
        )
    start = time.perf_counter()
    measured, passes, deltas, tables = EXPERIMENT_KINDS[kind](config)
    elapsed = time.perf_counter() - start
    return Report(
        experiment=kind,
        config=config,
        measured=measured,
        passes=passes,
        deltas=deltas,
        tables=tables,
        wall_clock_s=elapsed,
    )


def run_many(configs: list[dict], outdir: str | None = None) -> list[Report]:
    """Run independent experiments, honoring RHOMIX_THREADS."""
    threads = max(1, int(os.environ.get("RHOMIX_THREADS", "1")))
    if threads == 1:
        reports = [run_experiment(c) for c in configs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(run_experiment, configs))
    if outdir:
        for rep in reports:
            write_report(rep, outdir)
    return reports
