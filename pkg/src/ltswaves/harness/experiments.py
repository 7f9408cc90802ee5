"""Experiment drivers: coefficient tables, convergence and stability
studies, and single simulations, all emitting plain CSV."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .. import __version__
from ..coeffs import ab_coefficients, coefficient_set, lts_beta, verify_identities
from ..mesh import build_mesh, fine_dof_mask
from ..spacedisc import assemble, to_first_order
from ..stability import CflResult, NoStableStepError, ab_max_dt, cfl_ratio_table, max_stable_dt
from ..stepping import InstabilityError, SchemeConfig, run
from .config import config_hash
from .exact import exact_solution, primary_field, state_sampler

log = logging.getLogger(__name__)

REFERENCE_MAX_ELEMENTS = 256
DEFAULT_H_FOR_K = {2: 0.1, 3: 0.2, 4: 0.2}


@dataclass
class ExperimentResult:
    columns: list
    rows: list
    provenance: dict

    def to_csv(self):
        out = io.StringIO()
        for key, val in sorted(self.provenance.items()):
            out.write(f"# {key}={val}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(row.get(c)) for c in self.columns])
        return out.getvalue()

    def write(self, path):
        with open(path, "w") as f:
            f.write(self.to_csv())


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _provenance(cfg):
    return {"config": config_hash(cfg), "version": __version__}


def build_system(cfg, family, l, h, p, sigma):
    mesh = build_mesh(cfg.domain, cfg.fine_region, h, p)
    asm = assemble(
        family,
        mesh,
        l,
        c=cfg.c,
        sigma=sigma,
        bc=cfg.bc,
        alpha=cfg.alpha_or_none(),
        flux=cfg.flux,
    )
    partition = fine_dof_mask(mesh, family, l, cfg.bc, cfg.interface)
    return to_first_order(asm, partition)


def reference_dt(cfg, family, l, k, h, sigma, cache=None, tol_rel=None):
    """Maximal step of the plain AB scheme on an equidistant mesh of size h.

    The reference is intensive in the mesh, so for fine meshes it is
    computed on a truncated domain of at most REFERENCE_MAX_ELEMENTS
    elements, which keeps the eigenvalue solve dense-friendly while the
    spectral envelope is already saturated.
    """
    key = (family, l, k, h, sigma, cfg.alpha, cfg.bc)
    if cache is not None and key in cache:
        return cache[key]
    x0, x1 = cfg.domain
    n_full = int(round((x1 - x0) / h))
    n_ref = min(n_full, REFERENCE_MAX_ELEMENTS)
    mesh = build_mesh((x0, x0 + n_ref * h), (x0, x0), h, 1)
    asm = assemble(
        family, mesh, l, c=cfg.c, sigma=sigma, bc=cfg.bc,
        alpha=cfg.alpha_or_none(), flux=cfg.flux,
    )
    system = to_first_order(asm)
    dt = ab_max_dt(system, k, tol_rel=tol_rel or cfg.tol_rel)
    if cache is not None:
        cache[key] = dt
    return dt


def resolve_dt(cfg, family, l, k, h, sigma, cache=None):
    rule, value = cfg.dt_rule
    if rule == "fixed":
        return value
    return value * reference_dt(cfg, family, l, k, h, sigma, cache)


# ----- coefficient tables -------------------------------------------------


def coeffs_output(k, p, fmt="table"):
    cs = coefficient_set(k, p)
    if fmt == "table":
        lines = [f"k = {k}, p = {p}"]
        lines.append("alpha: " + "  ".join(f"{a} ({float(a):.12g})" for a in cs.alpha))
        for m, row in enumerate(cs.beta):
            lines.append(
                f"beta[m={m}]: " + "  ".join(f"{b} ({float(b):.12g})" for b in row)
            )
        rep = verify_identities(k, p)
        lines.append(f"identities: {'pass' if rep['ok'] else 'FAIL'} {rep}")
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["coefficient", "k", "p", "m", "l", "numerator", "denominator", "value"])
        for l, a in enumerate(cs.alpha):
            w.writerow(["alpha", k, p, "", l, a.numerator, a.denominator, repr(float(a))])
        for m, row in enumerate(cs.beta):
            for l, b in enumerate(row):
                w.writerow(["beta", k, p, m, l, b.numerator, b.denominator, repr(float(b))])
        return out.getvalue()
    if fmt == "json":
        blob = {
            "k": k,
            "p": p,
            "alpha": [{"fraction": str(a), "value": float(a)} for a in cs.alpha],
            "beta": [
                [{"fraction": str(b), "value": float(b)} for b in row]
                for row in cs.beta
            ],
            "identities": {k_: bool(v) for k_, v in verify_identities(k, p).items()},
        }
        return json.dumps(blob, indent=2) + "\n"
    raise ValueError(f"unknown coefficient format {fmt!r}")


# ----- convergence study ----------------------------------------------------


def _converge_row(cfg, family, l, k, p, h, sigma, cache):
    dt = resolve_dt(cfg, family, l, k, h, sigma, cache)
    system = build_system(cfg, family, l, h, p, sigma)
    exact = state_sampler(system, sigma)
    scheme = SchemeConfig(k, p, dt, startup=cfg.startup)
    n_steps = int(round(cfg.T / dt))
    t_end = n_steps * dt
    try:
        y = run(system, scheme, cfg.T, exact=exact)
    except InstabilityError as exc:
        log.warning("row (family=%s k=%d p=%d h=%g) aborted: %s", family, k, p, h, exc)
        return {"family": family, "l": l, "k": k, "p": p, "sigma": sigma,
                "h": h, "dt": dt, "T": t_end, "l2_error": float("nan"), "rate": None}
    field = primary_field(system)
    g = system.fields_from_state(y, t_end)[field]
    err = g.space.l2_error(
        g.values, lambda x: exact_solution(x, t_end, sigma)[0 if field == "u" else 1]
    )
    return {"family": family, "l": l, "k": k, "p": p, "sigma": sigma,
            "h": h, "dt": dt, "T": t_end, "l2_error": err, "rate": None}


def converge_experiment(cfg):
    """L2 errors against the closed-form solution over a mesh sequence,
    with observed rates between consecutive sizes."""
    cache = {}
    tasks = []
    for family in cfg.family:
        for k in cfg.k:
            l = cfg.l_for(k)
            for sigma in cfg.sigma:
                for p in cfg.p:
                    for h in sorted(cfg.h, reverse=True):
                        tasks.append((family, l, k, p, h, sigma))
    # resolve the dt references serially: they are cached and cheap
    for family, l, k, p, h, sigma in tasks:
        if cfg.dt_rule[0] == "frac_of_ab":
            reference_dt(cfg, family, l, k, h, sigma, cache)

    def work(task):
        return _converge_row(cfg, *task, cache)

    if cfg.max_workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.max_workers) as pool:
            rows = list(pool.map(work, tasks))
    else:
        rows = [work(t) for t in tasks]
    by_seq = {}
    for row in rows:
        key = (row["family"], row["k"], row["p"], row["sigma"])
        by_seq.setdefault(key, []).append(row)
    for seq in by_seq.values():
        seq.sort(key=lambda r: -r["h"])
        for prev, cur in zip(seq, seq[1:]):
            if np.isfinite(prev["l2_error"]) and np.isfinite(cur["l2_error"]):
                cur["rate"] = float(
                    np.log(prev["l2_error"] / cur["l2_error"])
                    / np.log(prev["h"] / cur["h"])
                )
    columns = ["family", "l", "k", "p", "sigma", "h", "dt", "T", "l2_error", "rate"]
    return ExperimentResult(columns, rows, _provenance(cfg))


# ----- stability table ------------------------------------------------------


def _h_for_k(cfg):
    if len(cfg.h) == len(cfg.k):
        return dict(zip(cfg.k, cfg.h))
    if len(cfg.h) == 1:
        return {k: cfg.h[0] for k in cfg.k}
    if not cfg.h:
        missing = [k for k in cfg.k if k not in DEFAULT_H_FOR_K]
        if missing:
            from .config import ConfigError

            raise ConfigError(f"field 'h': no default mesh size for k={missing}")
        return {k: DEFAULT_H_FOR_K[k] for k in cfg.k}
    from .config import ConfigError

    raise ConfigError("field 'h': give one size, one per k, or none for defaults")


def stability_experiment(cfg):
    """Reference and maximal LTS steps over the requested grid; cells whose
    reference or LTS search finds no stable step are marked nan."""
    h_of = _h_for_k(cfg)
    grid = [
        (family, k, p, sigma)
        for family in cfg.family
        for k in cfg.k
        for p in cfg.p
        for sigma in cfg.sigma
    ]
    rng = np.random.default_rng(cfg.seed)

    def make_cell(family, k, p, sigma):
        l = cfg.l_for(k)
        h = h_of[k]

        def cell():
            try:
                ref = build_system(cfg, family, l, h, 1, sigma)
                dt_ref = ab_max_dt(ref, k, tol_rel=cfg.tol_rel)
            except NoStableStepError:
                return CflResult(float("nan"), float("nan"), float("nan"), "eig", False)
            if p == 1:
                return CflResult(dt_ref, dt_ref, 1.0, "eig")
            try:
                lts = build_system(cfg, family, l, h, p, sigma)
                return max_stable_dt(
                    lts, k, p, dt_ref=dt_ref, tol_rel=cfg.tol_rel,
                    rng=np.random.default_rng(cfg.seed),
                )
            except NoStableStepError:
                return CflResult(float("nan"), dt_ref, float("nan"), "eig", False)

        return cell

    cells = [make_cell(*g) for g in grid]
    results = cfl_ratio_table(cells, max_workers=cfg.max_workers)
    rows = []
    for (family, k, p, sigma), res in zip(grid, results):
        rows.append({
            "family": family, "l": cfg.l_for(k), "k": k, "p": p, "sigma": sigma,
            "h_coarse": h_of[k], "dt_ref": res.dt_ref, "dt_max": res.dt_max,
            "ratio": res.ratio, "method": res.method,
        })
    columns = ["family", "l", "k", "p", "sigma", "h_coarse", "dt_ref", "dt_max", "ratio", "method"]
    return ExperimentResult(columns, rows, _provenance(cfg))


# ----- single run -----------------------------------------------------------


def run_experiment(cfg, out_dir=None):
    """One simulation with time-series and snapshot CSVs for plotting."""
    family = cfg.family[0]
    k = cfg.k[0]
    p = cfg.p[0]
    sigma = cfg.sigma[0]
    l = cfg.l_for(k)
    h = cfg.h[0]
    cache = {}
    dt = resolve_dt(cfg, family, l, k, h, sigma, cache)
    system = build_system(cfg, family, l, h, p, sigma)
    exact = state_sampler(system, sigma)
    field = primary_field(system)
    field_idx = 0 if field == "u" else 1
    series = []

    if cfg.series == "state":
        columns = ["t"] + [f"dof_{i}" for i in range(system.dim)]

        def observer(step, t, y):
            row = {"t": t}
            row.update({f"dof_{i}": float(v) for i, v in enumerate(y)})
            series.append(row)

    else:
        columns = ["step", "t", "l2_error", "norm"]

        def observer(step, t, y):
            g = system.fields_from_state(y, t)[field]
            err = g.space.l2_error(
                g.values, lambda x: exact_solution(x, t, sigma)[field_idx]
            )
            series.append({"step": step, "t": t, "l2_error": err,
                           "norm": float(np.linalg.norm(y))})

    scheme = SchemeConfig(k, p, dt, startup=cfg.startup)
    y_final = run(system, scheme, cfg.T, observer=observer, exact=exact)
    result = ExperimentResult(columns, series, _provenance(cfg))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        result.write(os.path.join(out_dir, "timeseries.csv"))
        for tag, state, t in (("initial", exact(0.0), 0.0),
                              ("final", y_final, series[-1]["t"] if series else cfg.T)):
            fieldmap = system.fields_from_state(state, t)
            g = fieldmap[field]
            snap = ExperimentResult(
                ["x", field],
                [{"x": float(x), field: float(v)}
                 for x, v in zip(g.space.node_coords, g.values)],
                _provenance(cfg),
            )
            snap.write(os.path.join(out_dir, f"snapshot_{tag}.csv"))
    return result
