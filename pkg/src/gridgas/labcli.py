"""Experiment orchestration: config parsing, statistics utilities, and
the ``gridgas`` command line tool.

Every output is deterministic in (config, seed): sampling runs on
counter-based streams, files are written atomically, and floats are
emitted in shortest round-trip form, so a rerun with the same seed is
byte-identical.  Exit codes: 0 success, 2 a statistical comparison
failed, 3 configuration error, 4 numerical or orbit-cap error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from typing import Optional, Sequence, Tuple

import numpy as np

from .exactfield import (
    FieldError,
    an_to_json,
    field_from_json,
    field_to_json,
    fraction_to_str,
)
from .gridalg import (
    Grid,
    GridError,
    OrbitCapError,
    Presentation,
    canonical_presentation,
    generic_subspace,
    mark_subspace,
    torus_components,
)
from .latticescan import NumericalError
from .homspace import TailEstimate, product_tail, siegel_check, tail_estimate
from .flight import run_trajectories
from .scene import sample_path_lengths

__all__ = [
    "ConfigError",
    "SCHEMA_VERSION",
    "ecdf",
    "ks_two_sample",
    "ks_uniform",
    "loglog_slope",
    "parse_xi_grid",
    "parse_config",
    "load_presentation",
    "main",
]

SCHEMA_VERSION = "gridgas-1"

EXIT_OK = 0
EXIT_COMPARE = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4

log = logging.getLogger("gridgas")


class ConfigError(ValueError):
    """A configuration file or command line option is invalid."""


# ----------------------------------------------------------------------
# Statistics utilities.

def ecdf(samples):
    """Sorted sample values and the empirical CDF evaluated at them."""
    x = np.sort(np.asarray(samples, dtype=float))
    if len(x) == 0:
        raise ValueError("empty sample")
    return x, np.arange(1, len(x) + 1) / len(x)


def _ks_constant(alpha: float) -> float:
    # Asymptotic Kolmogorov quantile: P(sup > c) = alpha for
    # 2 exp(-2 c^2) = alpha, i.e. c = sqrt(-ln(alpha/2)/2).
    return math.sqrt(-0.5 * math.log(alpha / 2.0))


def ks_two_sample(a, b, alpha: float = 1e-3) -> Tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and its alpha threshold.

    >>> stat, thr = ks_two_sample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    >>> stat
    0.0
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    stat = float(np.max(np.abs(fa - fb)))
    m, n = len(a), len(b)
    return stat, _ks_constant(alpha) * math.sqrt((m + n) / (m * n))


def ks_uniform(a, lo: float = 0.0, hi: float = 1.0, alpha: float = 1e-3):
    """One-sample KS statistic of ``a`` against Uniform(lo, hi)."""
    x = np.sort(np.asarray(a, dtype=float))
    n = len(x)
    if n == 0:
        raise ValueError("empty sample")
    F = (x - lo) / (hi - lo)
    up = np.arange(1, n + 1) / n - F
    dn = F - np.arange(0, n) / n
    stat = float(max(up.max(), dn.max()))
    return stat, _ks_constant(alpha) / math.sqrt(n)


def loglog_slope(tail: TailEstimate, xi_range) -> Tuple[float, float]:
    """Weighted least-squares slope of log F against log xi.

    Uses the isotonic-corrected tail at grid points inside xi_range
    whose estimate exceeds 10 standard errors; requires at least four
    such points.  Returns (slope, slope standard error).
    """
    lo, hi = float(xi_range[0]), float(xi_range[1])
    xi = np.asarray(tail.xi, dtype=float)
    F = np.asarray(tail.F_iso, dtype=float)
    se = np.asarray(tail.stderr, dtype=float)
    use = (xi >= lo) & (xi <= hi) & (F > 0.0) & (F > 10.0 * se)
    if int(use.sum()) < 4:
        raise ValueError(
            f"only {int(use.sum())} usable grid points in [{lo}, {hi}]; "
            "need at least 4 with F > 10*stderr"
        )
    x = np.log(xi[use])
    y = np.log(F[use])
    # Delta method: var(log F) = (stderr / F)^2.
    sigma = np.maximum(se[use], 1e-12) / F[use]
    wgt = 1.0 / sigma**2
    xbar = float(wgt @ x / wgt.sum())
    ybar = float(wgt @ y / wgt.sum())
    sxx = float(wgt @ (x - xbar) ** 2)
    slope = float(wgt @ ((x - xbar) * (y - ybar))) / sxx
    return slope, math.sqrt(1.0 / sxx)


def parse_xi_grid(spec: str) -> np.ndarray:
    """Parse a xi grid: "lo:hi:log[:count]", "lo:hi:lin[:count]", or a
    comma list.  Log grids default to 16 points per decade."""
    s = spec.strip()
    try:
        if ":" in s:
            parts = s.split(":")
            if len(parts) not in (3, 4):
                raise ValueError("expected lo:hi:log[:count] or lo:hi:lin[:count]")
            lo, hi = float(parts[0]), float(parts[1])
            if not (0.0 < lo < hi):
                raise ValueError("need 0 < lo < hi")
            kind = parts[2]
            count = int(parts[3]) if len(parts) == 4 else None
            if kind == "log":
                if count is None:
                    count = max(2, round(16 * math.log10(hi / lo)) + 1)
                grid = np.geomspace(lo, hi, count)
            elif kind == "lin":
                if count is None:
                    count = 33
                grid = np.linspace(lo, hi, count)
            else:
                raise ValueError(f"unknown grid kind {kind!r}")
        else:
            grid = np.array([float(t) for t in s.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad xi grid {spec!r}: {exc}") from None
    if len(grid) == 0 or grid[0] <= 0.0 or np.any(np.diff(grid) <= 0.0):
        raise ConfigError(f"xi grid {spec!r} must be positive and increasing")
    return grid


# ----------------------------------------------------------------------
# Configuration files.
#
# A config is a JSON object that defines the point set, either as a
# prebuilt presentation or as a raw list of grids:
#
#   {"field": {"minpoly": ["-2","0","1"], "root_interval": ["1","2"]},
#    "grids": [{"c": "1", "w": ["0","0"], "M": [["1","0"],["0","1"]]},
#              {"c": "1", "w": ["0","0"],
#               "M": [["1",["0","1"]], ["1",["1","1"]]]}]}
#
# Field elements are arrays of "p/q" coefficient strings (constant term
# first); a bare string or integer means a rational.

def _wrap(path_str, exc):
    return ConfigError(f"{path_str}: {exc}")


def _parse_grids(field, grids_json):
    if not isinstance(grids_json, list) or not grids_json:
        raise ConfigError("grids: must be a nonempty array")
    grids = []
    for k, gj in enumerate(grids_json):
        at = f"grids[{k}]"
        if not isinstance(gj, dict):
            raise ConfigError(f"{at}: must be an object")
        unknown = set(gj) - {"c", "w", "M"}
        if unknown:
            raise ConfigError(f"{at}: unknown keys {sorted(unknown)}")
        for key in ("c", "w", "M"):
            if key not in gj:
                raise ConfigError(f"{at}: missing key {key!r}")
        try:
            c = field.element(gj["c"] if isinstance(gj["c"], list) else [gj["c"]])
        except (FieldError, TypeError) as exc:
            raise _wrap(f"{at}.c", exc) from None
        w = []
        for t, x in enumerate(gj["w"]):
            try:
                w.append(field.element(x if isinstance(x, list) else [x]))
            except (FieldError, TypeError) as exc:
                raise _wrap(f"{at}.w[{t}]", exc) from None
        M = []
        for r, row in enumerate(gj["M"]):
            out = []
            for t, x in enumerate(row):
                try:
                    out.append(field.element(x if isinstance(x, list) else [x]))
                except (FieldError, TypeError) as exc:
                    raise _wrap(f"{at}.M[{r}][{t}]", exc) from None
            M.append(tuple(out))
        try:
            grids.append(Grid(field, c, tuple(w), tuple(M)))
        except (FieldError, GridError) as exc:
            raise _wrap(at, exc) from None
    return grids


def parse_config(path: str) -> dict:
    """Read and validate a config file; returns the raw JSON object."""
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}"
        ) from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = set(obj) - {"presentation", "field", "grids"}
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    has_pres = "presentation" in obj
    has_grids = "field" in obj or "grids" in obj
    if has_pres == has_grids:
        raise ConfigError(
            f"{path}: provide either 'presentation' or 'field' plus 'grids'"
        )
    if has_grids and ("field" not in obj or "grids" not in obj):
        raise ConfigError(f"{path}: 'field' and 'grids' are required together")
    return obj


def load_presentation(path: str) -> Presentation:
    """Parse a config file into a canonical presentation."""
    obj = parse_config(path)
    if "presentation" in obj:
        try:
            return Presentation.from_json(obj["presentation"])
        except (FieldError, GridError) as exc:
            raise _wrap("presentation", exc) from None
    try:
        field = field_from_json(obj["field"])
    except FieldError as exc:
        raise _wrap("field", exc) from None
    return canonical_presentation(_parse_grids(field, obj["grids"]))


# ----------------------------------------------------------------------
# Deterministic output files.

def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit(path: Optional[str], text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        _atomic_write(path, text)
        log.info("wrote %s", path)


def _csv_text(kind: str, columns, rows, meta: dict) -> str:
    buf = io.StringIO()
    stamp = {"schema": SCHEMA_VERSION, "kind": kind}
    stamp.update(meta)
    buf.write("# " + json.dumps(stamp, sort_keys=True) + "\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    wr.writerows(rows)
    return buf.getvalue()


def _json_text(kind: str, obj: dict) -> str:
    out = {"schema": SCHEMA_VERSION, "kind": kind}
    out.update(obj)
    return json.dumps(out, indent=2) + "\n"


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


# ----------------------------------------------------------------------
# Subcommands.

def _subspace_json(L):
    return {
        "dim": L.dim,
        "basis": [[fraction_to_str(x) for x in row] for row in L.basis],
    }


def cmd_analyze(args) -> int:
    p = load_presentation(args.config)
    admissible, failing = p.admissibility()
    classes = []
    for j, cls in enumerate(p.classes):
        gen_L = generic_subspace(p, j)
        gen_comp = torus_components(p, j, ("generic",), cap=args.orbit_cap)
        marks = []
        for i in range(len(cls.members)):
            psi = (j, i)
            entry = {
                "psi": [j, i],
                "c": an_to_json(cls.members[i][0]),
                "w": [an_to_json(x) for x in cls.members[i][1]],
                "density": p.density(psi),
                "weight": p.weight(psi),
                "mark_subspace": _subspace_json(mark_subspace(p, psi, j)),
            }
            if admissible:
                tcs = torus_components(p, j, ("mark", psi), cap=args.orbit_cap)
                entry["mark_components"] = tcs.n_components
            marks.append(entry)
        classes.append(
            {
                "index": j,
                "size": len(cls.members),
                "M": [[an_to_json(x) for x in row] for row in cls.M],
                "generic_subspace": _subspace_json(gen_L),
                "generic_components": gen_comp.n_components,
                "marks": marks,
            }
        )
    out = {
        "dim": p.dim,
        "field": field_to_json(p.field),
        "n_classes": p.n_classes,
        "class_sizes": [len(cls.members) for cls in p.classes],
        "admissible": admissible,
        "failing_mark": list(failing) if failing is not None else None,
        "total_density": p.total_density(),
        "classes": classes,
        "overlap_policy": "points on several grids take the lowest mark index",
    }
    _emit(args.out, _json_text("analyze", out))
    return EXIT_OK


def _parse_start(spec: str):
    s = spec.strip()
    if s == "uniform-cell":
        return ("uniform-cell",)
    kind, _, rest = s.partition(":")
    try:
        if kind == "fixed":
            x, y = (float(t) for t in rest.split(","))
            return ("fixed", (x, y))
        if kind == "at-scatterer":
            j, i = (int(t) for t in rest.split(","))
            return ("at-scatterer", (j, i))
    except ValueError:
        pass
    raise ConfigError(
        f"bad start spec {spec!r}; use uniform-cell, fixed:X,Y or at-scatterer:J,I"
    )


def _parse_direction(spec: str):
    s = spec.strip()
    if s == "uniform":
        return ("uniform",)
    kind, _, rest = s.partition(":")
    if kind == "table":
        try:
            edges_s, weights_s = rest.split(":")
            edges = tuple(float(t) for t in edges_s.split(","))
            weights = tuple(float(t) for t in weights_s.split(","))
        except ValueError:
            raise ConfigError(
                f"bad direction spec {spec!r}; use table:e0,..,ek:w1,..,wk"
            ) from None
        if len(edges) != len(weights) + 1 or any(
            b <= a for a, b in zip(edges, edges[1:])
        ):
            raise ConfigError(f"direction table {spec!r} needs increasing edges")
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ConfigError(f"direction table {spec!r} needs nonnegative weights")
        return ("table", edges, weights)
    raise ConfigError(f"bad direction spec {spec!r}; use uniform or table:...")


def cmd_simulate(args) -> int:
    p = load_presentation(args.config)
    start = _parse_start(args.start)
    direction = _parse_direction(args.direction)
    samples, resampled = sample_path_lengths(
        p,
        args.rho,
        args.samples,
        args.seed,
        start=start,
        direction=direction,
        xi_max=args.xi_max,
        workers=args.workers,
    )
    rows = [
        (
            _fmt(float(s["xi"])),
            int(s["mark_j"]),
            int(s["mark_i"]),
            "" if s["censored"] else _fmt(float(s["w"])),
            int(s["censored"]),
        )
        for s in samples
    ]
    meta = {
        "rho": args.rho,
        "samples": args.samples,
        "seed": args.seed,
        "start": args.start,
        "direction": args.direction,
        "xi_max": args.xi_max,
        "resampled": resampled,
    }
    _emit(args.out, _csv_text(
        "simulate", ("xi", "mark_j", "mark_i", "impact_w", "censored"), rows, meta
    ))
    return EXIT_OK


def _parse_mode(spec: str):
    s = spec.strip()
    if s == "generic":
        return ("generic",)
    kind, _, rest = s.partition(":")
    if kind == "mark":
        try:
            j, i = (int(t) for t in rest.split(","))
        except ValueError:
            raise ConfigError(f"bad mode {spec!r}; use generic or mark:J,I") from None
        return ("mark", (j, i))
    raise ConfigError(f"bad mode {spec!r}; use generic or mark:J,I")


def cmd_limit_tail(args) -> int:
    p = load_presentation(args.config)
    mode = _parse_mode(args.mode)
    scope = None
    if args.scope != "whole":
        kind, _, rest = args.scope.partition(":")
        if kind != "class" or not rest.isdigit():
            raise ConfigError(f"bad scope {args.scope!r}; use whole or class:J")
        scope = int(rest)
    grid = parse_xi_grid(args.xi)
    tail = tail_estimate(
        p,
        grid,
        args.samples,
        mode=mode,
        scope=scope,
        shift=args.shift,
        seed=args.seed,
        workers=args.workers,
    )
    rows = [
        (_fmt(xi), _fmt(fr), _fmt(fi), _fmt(se), n)
        for xi, fr, fi, se, n in tail.rows()
    ]
    meta = {
        "mode": args.mode,
        "scope": args.scope,
        "shift": args.shift,
        "samples": args.samples,
        "seed": args.seed,
    }
    _emit(args.out, _csv_text(
        "limit-tail", ("xi", "F_raw", "F_iso", "stderr", "n"), rows, meta
    ))
    return EXIT_OK


def cmd_flight(args) -> int:
    p = load_presentation(args.config)
    trajectories = run_trajectories(
        p,
        args.trajectories,
        args.events,
        args.seed,
        xi_max=args.xi_max,
        workers=args.workers,
    )
    rows = []
    for tid, (events, positions) in enumerate(trajectories):
        for step, ev in enumerate(events, start=1):
            q = positions[step]
            rows.append(
                (
                    tid,
                    step,
                    _fmt(ev.xi),
                    -1 if ev.psi is None else ev.psi[0],
                    -1 if ev.psi is None else ev.psi[1],
                    "" if ev.censored else _fmt(ev.w),
                    _fmt(float(ev.v[0])),
                    _fmt(float(ev.v[1])),
                    _fmt(float(q[0])),
                    _fmt(float(q[1])),
                    int(ev.censored),
                )
            )
    meta = {
        "trajectories": args.trajectories,
        "events": args.events,
        "seed": args.seed,
        "xi_max": args.xi_max,
    }
    _emit(args.out, _csv_text(
        "flight",
        ("traj_id", "step", "xi", "mark_j", "mark_i", "w",
         "vx", "vy", "qx", "qy", "censored"),
        rows,
        meta,
    ))
    return EXIT_OK


def _parse_region(spec: str):
    s = spec.strip()
    kind, _, rest = s.partition(":")
    try:
        vals = [float(t) for t in rest.split(",")]
        if kind == "box" and len(vals) == 4:
            return ("box", vals[0], vals[1], vals[2], vals[3])
        if kind == "ball" and len(vals) == 3:
            return ("ball", vals[0], vals[1], vals[2])
    except ValueError:
        pass
    raise ConfigError(
        f"bad region {spec!r}; use box:x0,x1,y0,y1 or ball:cx,cy,r"
    )


def cmd_siegel_check(args) -> int:
    p = load_presentation(args.config)
    psi = tuple(int(t) for t in args.mark.split(","))
    if len(psi) != 2:
        raise ConfigError(f"bad mark {args.mark!r}; use J,I")
    report = siegel_check(
        p,
        psi,
        _parse_region(args.region),
        args.samples,
        mode=_parse_mode(args.mode),
        seed=args.seed,
        workers=args.workers,
    )
    passed = abs(report.z) <= 3.0
    out = {
        "psi": list(report.psi),
        "mode": report.mode,
        "region": args.region,
        "volume": report.volume,
        "n": report.n,
        "mean": report.mean,
        "stderr": report.stderr,
        "predicted": report.predicted,
        "predicted_continuous": report.predicted_continuous,
        "atom": report.atom,
        "z": report.z,
        "pass": passed,
    }
    _emit(args.out, _json_text("siegel-check", out))
    if not passed:
        log.warning("siegel check failed: z = %.3f", report.z)
        return EXIT_COMPARE
    return EXIT_OK


def cmd_compare(args) -> int:
    p = load_presentation(args.config)
    grid = parse_xi_grid(args.xi)
    log.info("compare: scene sampling at rho = %g", args.rho)
    samples, resampled = sample_path_lengths(
        p,
        args.rho,
        args.scene_samples,
        args.seed,
        start=("uniform-cell",),
        direction=("uniform",),
        xi_max=args.xi_max,
        workers=args.workers,
    )
    xi_scene = samples["xi"]
    n_s = len(xi_scene)
    log.info("compare: limit tail, %d samples", args.limit_samples)
    tail = tail_estimate(
        p, grid, args.limit_samples, mode=("generic",),
        seed=args.seed, workers=args.workers,
    )
    per_class = [
        tail_estimate(
            p, grid, args.limit_samples, mode=("generic",), scope=j,
            seed=args.seed, workers=args.workers,
        )
        for j in range(p.n_classes)
    ]
    prod = product_tail(per_class)
    rows = []
    all_pass = True
    for k, x in enumerate(grid):
        # Censored scene samples survive past every x below the horizon.
        f_scene = float(np.mean(xi_scene > x))
        se_scene = math.sqrt(f_scene * (1.0 - f_scene) / n_s)
        f_hom = float(tail.F_iso[k])
        se_hom = float(tail.stderr[k])
        tol_scene = 3.0 * math.hypot(se_scene, se_hom) + 0.01
        ok_scene = abs(f_scene - f_hom) <= tol_scene
        f_prod = float(prod.F_iso[k])
        se_prod = float(prod.stderr[k])
        tol_prod = 3.0 * math.hypot(se_prod, se_hom)
        ok_prod = abs(f_prod - f_hom) <= tol_prod
        all_pass = all_pass and ok_scene and ok_prod
        rows.append(
            {
                "xi": float(x),
                "F_scene": f_scene,
                "stderr_scene": se_scene,
                "F_homspace": f_hom,
                "stderr_homspace": se_hom,
                "scene_tolerance": tol_scene,
                "scene_pass": ok_scene,
                "F_product": f_prod,
                "stderr_product": se_prod,
                "product_tolerance": tol_prod,
                "product_pass": ok_prod,
            }
        )
    out = {
        "rho": args.rho,
        "scene_samples": n_s,
        "scene_resampled": resampled,
        "limit_samples": args.limit_samples,
        "seed": args.seed,
        "rows": rows,
        "pass": all_pass,
    }
    _emit(args.out, _json_text("compare", out))
    return EXIT_OK if all_pass else EXIT_COMPARE


# ----------------------------------------------------------------------
# Argument parsing and dispatch.

class _Parser(argparse.ArgumentParser):
    # Route usage errors through ConfigError so the process exits 3.
    def error(self, message):
        raise ConfigError(message)


def _count(text: str) -> int:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if value <= 0 or value != int(value):
        raise argparse.ArgumentTypeError(f"need a positive integer, got {text!r}")
    return int(value)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="gridgas",
        description=(
            "Exact grid algebra and Monte Carlo estimators for the "
            "Boltzmann-Grad limit of Lorentz gases on unions of grids."
        ),
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="config JSON path")
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument(
        "--json-logs", action="store_true", help="emit log lines as JSON"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser(
        "analyze",
        parents=[common],
        help="exact structure report",
        description=(
            "Print the class structure, admissibility verdict, rational "
            "subspace bases, torus component counts, densities, and weights "
            "as JSON."
        ),
    )
    pa.add_argument(
        "--orbit-cap", type=_count, default=10_000,
        help="abort component enumeration beyond this many states",
    )
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser(
        "simulate",
        parents=[common],
        help="finite-radius free path sampling",
        description=(
            "Sample rescaled free path lengths in the finite-radius gas. "
            "CSV columns: xi (rescaled length rho^(d-1)*t), mark_j/mark_i "
            "(grid hit; -1 when censored), impact_w (transverse offset of "
            "the incoming ray in (-1,1); empty when censored), censored "
            "(1 when no hit before the horizon)."
        ),
    )
    ps.add_argument("--rho", type=float, required=True, help="scatterer radius")
    ps.add_argument("--samples", type=_count, default=10_000)
    ps.add_argument(
        "--start", default="uniform-cell",
        help="uniform-cell | fixed:X,Y | at-scatterer:J,I",
    )
    ps.add_argument(
        "--direction", default="uniform",
        help="uniform | table:e0,..,ek:w1,..,wk (piecewise-constant angle law)",
    )
    ps.add_argument("--xi-max", type=float, default=1e4, help="censoring horizon")
    ps.set_defaults(func=cmd_simulate)

    pt = sub.add_parser(
        "limit-tail",
        parents=[common],
        help="limit free path tail estimate",
        description=(
            "Estimate the limiting free path tail F(xi) by homogeneous-space "
            "Monte Carlo. CSV columns: xi (grid point), F_raw (raw estimate "
            "of P(path > xi)), F_iso (isotonic nonincreasing correction), "
            "stderr (binomial), n (sample count)."
        ),
    )
    pt.add_argument("--mode", default="generic", help="generic | mark:J,I")
    pt.add_argument(
        "--shift", type=float, default=0.0,
        help="transverse strip offset w' (mark modes)",
    )
    pt.add_argument("--scope", default="whole", help="whole | class:J")
    pt.add_argument(
        "--xi", default="0.25:64:log",
        help="xi grid: lo:hi:log[:count] | lo:hi:lin[:count] | comma list",
    )
    pt.add_argument("--samples", type=_count, default=100_000)
    pt.set_defaults(func=cmd_limit_tail)

    pf = sub.add_parser(
        "flight",
        parents=[common],
        help="limiting random flight chains",
        description=(
            "Run flight chains of the limiting process. CSV columns: "
            "traj_id, step (1-based), xi (path length of the step), "
            "mark_j/mark_i (scatterer mark; -1 when censored), w (impact "
            "parameter; empty when censored), vx/vy (outgoing velocity), "
            "qx/qy (collision position), censored."
        ),
    )
    pf.add_argument("--events", type=_count, default=100, help="events per chain")
    pf.add_argument("--trajectories", type=_count, default=10)
    pf.add_argument("--xi-max", type=float, default=1e6, help="censoring horizon")
    pf.set_defaults(func=cmd_flight)

    pg = sub.add_parser(
        "siegel-check",
        parents=[common],
        help="mean point count vs prediction",
        description=(
            "Monte Carlo mean count of one grid's points in a region, "
            "against density*volume (+ origin atom in mark mode). JSON "
            "report; exits 2 when |z| > 3."
        ),
    )
    pg.add_argument("--mark", required=True, help="counted grid J,I")
    pg.add_argument(
        "--region", required=True, help="box:x0,x1,y0,y1 | ball:cx,cy,r"
    )
    pg.add_argument("--mode", default="generic", help="generic | mark:J,I")
    pg.add_argument("--samples", type=_count, default=100_000)
    pg.set_defaults(func=cmd_siegel_check)

    pc = sub.add_parser(
        "compare",
        parents=[common],
        help="finite-radius vs limit cross-validation",
        description=(
            "Compare the finite-radius free path tail against the "
            "homogeneous-space estimate and the per-class product formula "
            "at the given xi points. JSON report; exits 2 on failure."
        ),
    )
    pc.add_argument("--rho", type=float, default=0.01)
    pc.add_argument("--xi", default="0.5,1,2,4")
    pc.add_argument("--scene-samples", type=_count, default=100_000)
    pc.add_argument("--limit-samples", type=_count, default=100_000)
    pc.add_argument("--xi-max", type=float, default=1e4)
    pc.set_defaults(func=cmd_compare)
    return parser


class _JsonLogFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps(
            {
                "level": record.levelname.lower(),
                "logger": record.name,
                "message": record.getMessage(),
            }
        )


def _setup_logging(json_logs: bool):
    handler = logging.StreamHandler(sys.stderr)
    if json_logs:
        handler.setFormatter(_JsonLogFormatter())
    else:
        handler.setFormatter(logging.Formatter("[%(name)s] %(message)s"))
    root = logging.getLogger("gridgas")
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        _setup_logging(getattr(args, "json_logs", False))
        return args.func(args)
    except ConfigError as exc:
        print(f"gridgas: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FieldError, GridError) as exc:
        print(f"gridgas: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OrbitCapError, NumericalError) as exc:
        print(f"gridgas: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
