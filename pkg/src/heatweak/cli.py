"""Batch experiment front end.

Each command evaluates a sweep over the configured p and N values and writes a
plot-ready table (CSV with a header row, or a JSON array of row objects).
Every row carries a ``status`` column ("ok" or "failed: <reason>") and a
``schema`` column naming the table layout version.  The exit status is 0 iff
every row passed its internal checks, 1 if any check failed and 2 on a usage
error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bounds, montecarlo as mc
from .config import COMMANDS, ConfigError, ExperimentConfig, config_from_dict, parse_config
from .scheme import GridSpec, interp_moments, scheme_second_moment, strong_error_closed_form
from .series import TruncationError
from .spectral import eigenvalue, eigenvalues
from .weak_error import (
    QuadratureError,
    decompose,
    decomposition_tolerance,
    per_mode_weak_error,
    rate_fit,
    strong_error,
    weak_error,
)

SCHEMA_VERSION = 1

COLUMNS = {
    "weak-error": ["p", "T", "N", "h", "modes_used", "value", "tail_bound"],
    "strong-error": ["p", "T", "N", "h", "modes_used", "value", "tail_bound"],
    "rate": ["p", "slope", "intercept", "r_squared", "n_points"],
    "rate-points": ["p", "T", "N", "h", "modes_used", "value", "tail_bound"],
    "decompose": ["p", "N", "direct", "delta_total", "i_total", "j_total", "residual"],
    "mc-validate": ["test_name", "estimate", "std_error", "reference", "z_score", "pass"],
    "bounds": ["lemma", "param_desc", "worst_ratio", "constant", "pass"],
}

MC_Z_LIMIT = 3.0
MC_FIELD_MODES = 64
NUMERIC_FAILURES = (TruncationError, QuadratureError, FloatingPointError)


def schema_name(table: str) -> str:
    return f"heatweak.{table}.v{SCHEMA_VERSION}"


def _ok(row: dict) -> dict:
    return {**row, "status": "ok"}


def _failed(row: dict, exc: Exception) -> dict:
    return {**row, "status": f"failed: {type(exc).__name__}: {exc}"}


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- commands

def _series_row(cfg, p, N, fn):
    grid = GridSpec(cfg.T, N)
    base = {"p": p, "T": cfg.T, "N": N, "h": grid.h}
    try:
        res = fn(p, grid)
    except NUMERIC_FAILURES as exc:
        return _failed({**base, "modes_used": getattr(exc, "modes_used", math.nan),
                        "value": getattr(exc, "value", math.nan),
                        "tail_bound": getattr(exc, "tail_bound", math.nan)}, exc)
    return _ok({**base, "modes_used": res.modes_used, "value": res.value, "tail_bound": res.tail_bound})


def _sweep(cfg, fn):
    jobs = [(p, N) for p in cfg.p for N in cfg.N]
    return _map(lambda job: _series_row(cfg, *job, fn), jobs, cfg.workers)


def run_weak_error(cfg: ExperimentConfig):
    ctrl = cfg.series_control()
    return {"weak-error": _sweep(cfg, lambda p, g: weak_error(p, g, ctrl))}


def run_strong_error(cfg: ExperimentConfig):
    ctrl = cfg.series_control()
    return {"strong-error": _sweep(cfg, lambda p, g: strong_error(g, ctrl, p))}


def run_rate(cfg: ExperimentConfig):
    ctrl = cfg.series_control()
    points = _sweep(cfg, lambda p, g: weak_error(p, g, ctrl))
    slopes = []
    for p in cfg.p:
        mine = [r for r in points if r["p"] == p]
        row = {"p": p, "n_points": len(mine)}
        bad = [r for r in mine if r["status"] != "ok"]
        if bad:
            slopes.append({**row, "slope": math.nan, "intercept": math.nan, "r_squared": math.nan,
                           "status": f"failed: {len(bad)} sweep point(s) failed"})
            continue
        try:
            fit = rate_fit([(r["h"], abs(r["value"])) for r in mine])
        except ValueError as exc:
            slopes.append(_failed({**row, "slope": math.nan, "intercept": math.nan,
                                   "r_squared": math.nan}, exc))
            continue
        slopes.append(_ok({**row, "slope": fit.slope, "intercept": fit.intercept,
                           "r_squared": fit.r_squared}))
    return {"rate": slopes, "rate-points": points}


def run_decompose(cfg: ExperimentConfig):
    ctrl = cfg.series_control()

    def one(job):
        p, N = job
        row = {"p": p, "N": N}
        try:
            rep = decompose(p, GridSpec(cfg.T, N), ctrl)
        except NUMERIC_FAILURES as exc:
            return _failed({**row, "direct": math.nan, "delta_total": math.nan, "i_total": math.nan,
                            "j_total": math.nan, "residual": math.nan}, exc)
        row.update(direct=rep.direct, delta_total=rep.last_step_total, i_total=rep.i_total,
                   j_total=rep.j_total, residual=rep.residual)
        tol = decomposition_tolerance(rep.direct)
        if abs(rep.residual) > tol:
            return {**row, "status": f"failed: residual {abs(rep.residual):.3e} > {tol:.3e}"}
        return _ok(row)

    return {"decompose": _map(one, [(p, N) for p in cfg.p for N in cfg.N], cfg.workers)}


def _mc_row(name, est: mc.MCEstimate, reference: float):
    z = est.z_score(reference)
    row = {"test_name": name, "estimate": est.mean, "std_error": est.std_error,
           "reference": reference, "z_score": z, "pass": abs(z) <= MC_Z_LIMIT}
    row["status"] = "ok" if row["pass"] else f"failed: |z| > {MC_Z_LIMIT:g}"
    if est.degenerate_covariance:
        row["status"] += " (degenerate covariance clamped)"
    return row


def run_mc_validate(cfg: ExperimentConfig):
    """Closed-form oracle suite: every estimate is compared with its exact value by z-score."""
    n, seed, w = cfg.samples, mc.SeedSpec(cfg.seed), cfg.workers
    rows = []

    g16 = GridSpec(1.0, 16)
    lam1, lam2 = eigenvalue(1), eigenvalue(2)
    mean, second = mc.mc_mode_terminal(1, g16, n, seed, w)
    rows.append(_mc_row("mode1_terminal_mean[N=16]", mean, 0.0))
    rows.append(_mc_row("mode1_terminal_second_moment[N=16]", second,
                        scheme_second_moment(lam1, g16.h, g16.N)))

    k, tau = 5, g16.h / 3.0
    ref = interp_moments(lam2, g16.h, scheme_second_moment(lam2, g16.h, k), tau)
    ex2, ebx, eb2 = mc.mc_interp_moments(lam2, g16, k, tau, n, seed, w, m=2)
    rows.append(_mc_row("interp_ex2[m=2,N=16,k=5,tau=h/3]", ex2, ref.ex2))
    rows.append(_mc_row("interp_ebx[m=2,N=16,k=5,tau=h/3]", ebx, ref.ebx))
    rows.append(_mc_row("interp_eb2[m=2,N=16,k=5,tau=h/3]", eb2, ref.eb2))

    for m, N in ((1, 16), (3, 8)):
        g = GridSpec(1.0, N)
        lam = eigenvalue(m)
        est = mc.coupled_strong_error(lam, g, n, seed, w, m=m)
        rows.append(_mc_row(f"coupled_strong_error[m={m},N={N}]", est, strong_error_closed_form(lam, g)))
        diff, _, _ = mc.mc_per_mode_weak_error(lam, g, n, seed, w, m=m)
        rows.append(_mc_row(f"per_mode_weak_error[m={m},N={N}]", diff, per_mode_weak_error(lam, g)))

    lam = eigenvalues(MC_FIELD_MODES)
    for p in cfg.p:
        for N in cfg.N:
            g = GridSpec(cfg.T, N)
            est = mc.mc_field_norm_sq(p, g, MC_FIELD_MODES, n, seed, w)
            ref = math.fsum(lam**-p * scheme_second_moment(lam, g.h, g.N))
            rows.append(_mc_row(f"field_norm_sq[p={p:g},T={cfg.T:g},N={N},M={MC_FIELD_MODES}]", est, ref))
    return {"mc-validate": rows}


def _bound_row(rep: bounds.BoundCheckReport):
    desc = rep.param_desc
    if rep.slope is not None:
        desc += f"; slope={rep.slope:.6g}"
    row = {"lemma": rep.lemma, "param_desc": desc, "worst_ratio": rep.worst_ratio,
           "constant": rep.constant, "pass": rep.passed}
    return {**row, "status": "ok" if rep.passed else "failed: bound check"}


def run_bounds(cfg: ExperimentConfig):
    """Lemma checks over their standard grids; uses the configured p and T."""
    ctrl = cfg.series_control()
    rows = []
    for p in cfg.p:
        rows.append(_bound_row(bounds.check_a1(p, ctrl=ctrl)))
    rows.append(_bound_row(bounds.check_ad(ctrl=ctrl)))
    for p in cfg.p:
        rows.append(_bound_row(bounds.lem_at_check(1, p, cfg.T, ctrl=ctrl)))
    return {"bounds": rows}


RUNNERS = {
    "weak-error": run_weak_error,
    "rate": run_rate,
    "decompose": run_decompose,
    "mc-validate": run_mc_validate,
    "bounds": run_bounds,
    "strong-error": run_strong_error,
}


# ---------------------------------------------------------------- output

def _plain(v):
    return v.item() if isinstance(v, np.generic) else v


def format_value(v) -> str:
    v = _plain(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _json_value(v):
    v = _plain(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def render(table: str, rows: list[dict], fmt: str) -> str:
    cols = COLUMNS[table] + ["status", "schema"]
    full = [{**{c: r[c] for c in cols if c != "schema"}, "schema": schema_name(table)} for r in rows]
    if fmt == "json":
        return json.dumps([{k: _json_value(v) for k, v in r.items()} for r in full], indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for r in full:
        writer.writerow([format_value(r[c]) for c in cols])
    return buf.getvalue()


def _companion_path(out: Path, table: str, main: str) -> Path:
    suffix = table[len(main) + 1:] if table.startswith(main + "-") else table
    return out.with_name(f"{out.stem}_{suffix}{out.suffix}")


def run(cfg: ExperimentConfig, stdout=None) -> int:
    """Execute the configured sweep, write its tables and return the exit status."""
    stdout = stdout or sys.stdout
    tables = RUNNERS[cfg.command](cfg)
    ok = all(r["status"].startswith("ok") for rows in tables.values() for r in rows)
    for table, rows in tables.items():
        text = render(table, rows, cfg.format)
        if cfg.out is None:
            if table == cfg.command:
                stdout.write(text)
            continue
        path = Path(cfg.out) if table == cfg.command else _companion_path(Path(cfg.out), table, cfg.command)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return 0 if ok else 1


# ---------------------------------------------------------------- argument parsing

def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heatweak", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="JSON configuration document")
    ap.add_argument("--p", type=_float_list, help="comma-separated Sobolev orders in [0, 1/2)")
    ap.add_argument("--N", type=_int_list, help="comma-separated step counts")
    ap.add_argument("--T", type=float, help="final time (default 1)")
    ap.add_argument("--seed", type=int, help="root seed for Monte Carlo streams")
    ap.add_argument("--samples", type=int, help="Monte Carlo sample count")
    ap.add_argument("--workers", type=int, help="worker threads")
    ap.add_argument("--out", help="output path (default: standard output)")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--rel-tol", dest="rel_tol", type=float, help="series relative tolerance")
    ap.add_argument("--m-max", dest="m_max", type=int, help="mode cap for series summation")
    ap.add_argument("--quad-order", dest="quad_order", type=int, help="Gauss-Legendre order")
    ap.add_argument("--no-tail-correction", dest="tail_correction", action="store_const", const=False,
                    help="plain truncation instead of the analytic tail estimate")
    ap.add_argument("--dump-config", action="store_true", help="print the resolved configuration and exit")
    return ap


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {k: getattr(args, k) for k in
                 ("p", "N", "T", "seed", "samples", "workers", "out", "format",
                  "rel_tol", "m_max", "quad_order", "tail_correction")}
    overrides["command"] = args.command
    if args.config is not None:
        return parse_config(args.config.read_text(), overrides)
    return config_from_dict({}, overrides)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.N == []:
        ap.error("N must be a non-empty list of step counts")
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError) as exc:
        ap.error(str(exc))
    if args.dump_config:
        print(cfg.to_json())
        return 0
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
