"""Command-line front end.

Every command writes ``report.json`` into ``--out`` (sorted keys, no
timestamps), so identical inputs give byte-identical files whatever the
thread count.  Exit codes: 0 success, 2 properness failure, 3 budget or
numerical guard abort, 4 malformed representation file.
"""

from __future__ import annotations

import csv
import functools
import json
import logging
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .affine_group import (
    DRIFT_LIMIT,
    MEMBERSHIP_TOL,
    DriftError,
    Representation,
    TangentCocycle,
    load_representation,
    proximality_scan,
    same_linear_parts,
    save_representation,
)
from .families import FAMILIES, SeededFamily, build_family
from .linalg_core import CONDITION_LIMIT, KERNEL_ATOL, KERNEL_RTOL, ConditionGuardError
from .margulis import ADJUGATE_TOL, COBOUNDARY_TOL, solve_coboundary
from .spectrum import (
    DEFAULT_SMOOTHING,
    MIN_COUNT,
    POSITIVE,
    SECOND_DIFF_FLOOR,
    ImproperError,
    InsufficientDataError,
    build_table,
    constant_entropy_project,
    convexity_scan,
    entropy_estimate,
    pressure_quadratic,
    properness_scan,
)
from .words import DEFAULT_CLASS_CAP, BudgetExceededError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

EXIT_OK, EXIT_IMPROPER, EXIT_GUARD, EXIT_MALFORMED = 0, 2, 3, 4

COMMANDS = ("spectrum", "properness", "entropy", "pressure", "rigidity", "convexity", "make-family")

# config-file spellings that differ from the option names
_ALIASES = {
    "rep_path": "rep",
    "output_dir": "out",
    "T_grid": "t_grid",
    "T-grid": "t_grid",
    "max-len": "max_len",
    "class-mode": "class_mode",
    "translation-scale": "translation_scale",
}


class MalformedRepError(ValueError):
    """A representation file could not be parsed or validated."""


def _tolerances() -> dict:
    return {
        "adjugate_rel": ADJUGATE_TOL,
        "coboundary_rel": COBOUNDARY_TOL,
        "condition_limit": CONDITION_LIMIT,
        "form_drift": DRIFT_LIMIT,
        "kernel_atol": KERNEL_ATOL,
        "kernel_rtol": KERNEL_RTOL,
        "membership": MEMBERSHIP_TOL,
        "min_count": MIN_COUNT,
        "second_diff_floor": SECOND_DIFF_FLOOR,
        "smoothing": DEFAULT_SMOOTHING,
    }


def load_config(path) -> dict:
    """Read a JSON or TOML experiment config and normalise key spellings."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        data = tomllib.loads(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise click.BadParameter("config must be a table/object", param_hint="--config")
    out = {}
    for key, value in data.items():
        key = _ALIASES.get(key, key)
        if key == "rep_paths":
            paths = list(value)
            out["rep"] = paths[0] if paths else None
            if len(paths) > 1:
                out["rep2"] = paths[1]
            continue
        out[key.replace("-", "_")] = value
    for key in ("t_grid", "t_values", "targets", "directions"):
        if isinstance(out.get(key), list):
            out[key] = ",".join(str(x) for x in out[key])
    return out


def parse_t_grid(text: str | None) -> np.ndarray | None:
    """"lo:hi:n" for a geometric grid, or a comma-separated increasing list."""
    if text is None or text == "":
        return None
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            grid = np.geomspace(float(lo), float(hi), int(n))
        else:
            grid = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise click.BadParameter(f"cannot parse {text!r}", param_hint="--T-grid") from None
    if grid.size < 3 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise click.BadParameter("need at least 3 positive increasing values", param_hint="--T-grid")
    return grid


def _floats(text: str, hint: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter(f"cannot parse {text!r}", param_hint=hint) from None


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_report(out: Path, payload: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(json.dumps(_clean(payload), sort_keys=True, indent=2) + "\n")
    return path


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def write_spectrum_csv(path: Path, table) -> None:
    a, sq, mm = table.alphas, table.alpha_sq_adjugate, table.mismatch
    rows = ((c.text, c.length, a[i], sq[i], mm[i]) for i, c in enumerate(table.classes))
    _write_csv(path, ["word", "length", "alpha", "alpha_sq_adjugate", "mismatch"], rows)


def write_counts_csv(path: Path, est) -> None:
    rows = zip(est.T_grid, est.counts, est.smoothed_counts)
    _write_csv(path, ["T", "count", "smoothed"], rows)


def load_rep(path) -> Representation:
    """Load a representation, turning every failure into MalformedRepError."""
    if path is None:
        raise click.UsageError("--rep is required")
    try:
        return load_representation(path)
    except FileNotFoundError:
        raise MalformedRepError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise MalformedRepError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except ValueError as exc:
        raise MalformedRepError(f"{path}: {exc}") from None


def _config_section(command: str, params: dict) -> dict:
    # the worker count is not part of the experiment: leaving it out keeps
    # reports identical across thread settings
    return {"command": command, **{k: v for k, v in params.items() if k not in ("threads", "config")}}


def _command(name: str):
    """Register a subcommand whose body returns (exit code, payload)."""

    def deco(fn):
        @functools.wraps(fn)
        def wrapper(**params):
            out = Path(params["out"])
            report = {
                "config": _config_section(name, params),
                "seed": params.get("seed"),
                "tolerances": _tolerances(),
                "version": __version__,
            }
            try:
                code, payload = fn(**params)
                report.update(status="ok" if code == EXIT_OK else "failed", **payload)
            except MalformedRepError as exc:
                code = EXIT_MALFORMED
                report.update(status="error", error={"type": "MalformedRep", "message": str(exc)})
            except ImproperError as exc:
                code = EXIT_IMPROPER
                report.update(status="error", error={"type": "Improper", "message": str(exc)})
            except (InsufficientDataError, BudgetExceededError, ConditionGuardError, DriftError) as exc:
                code = EXIT_GUARD
                report.update(status="error", error={"type": type(exc).__name__, "message": str(exc)})
            report["exit_code"] = code
            write_report(out, report)
            if code != EXIT_OK:
                click.echo(f"{name}: {report.get('error', {}).get('message', report['status'])}", err=True)
            else:
                click.echo(f"{name}: wrote {out / 'report.json'}")
            click.get_current_context().exit(code)

        return main.command(name)(wrapper)

    return deco


def _opt_rep(f):
    return click.option("--rep", type=click.Path(dir_okay=False), help="Representation JSON file.")(f)


def _opt_rep2(f):
    return click.option("--rep2", type=click.Path(dir_okay=False), help="Second representation (same linear parts).")(f)


def _opt_common(max_len: int):
    def deco(f):
        for opt in reversed(
            [
                click.option("--max-len", type=click.IntRange(min=1), default=max_len, show_default=True),
                click.option("--class-mode", type=click.Choice(["all", "primitive"]), default="all", show_default=True),
                click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True),
                click.option("--cap", type=click.IntRange(min=1), default=DEFAULT_CLASS_CAP, help="Refuse enumerations projected above this many classes."),
                click.option("--out", type=click.Path(file_okay=False), default="out", show_default=True),
                click.option("--seed", type=int, default=0, show_default=True),
            ]
        ):
            f = opt(f)
        return f

    return deco


def _ensure(out) -> None:
    Path(out).mkdir(parents=True, exist_ok=True)


def _table(rep, max_len, class_mode, threads, cap):
    table = build_table(rep, max_len, class_mode=class_mode, threads=threads, cap=cap)
    if table.skipped:
        log.warning("%d classes skipped as non-regular", table.skipped)
    return table


def _table_summary(table) -> dict:
    ok = table.adjugate_ok
    return {
        "n_classes": len(table),
        "skipped": table.skipped,
        "skipped_words": [f"{c.text}: {why}" for c, why in table.linear.skipped[:50]],
        "adjugate_form": "corrected",
        "adjugate_ok_fraction": float(ok.mean()) if len(table) else 1.0,
        "adjugate_failures": int((~ok).sum()),
        "max_rel_mismatch": float(np.max(table.mismatch / (1.0 + table.alphas**2))) if len(table) else 0.0,
        "max_len": table.max_len,
    }


def _verdict_dict(v) -> dict:
    return {
        "verdict": v.verdict,
        "proper": v.proper,
        "c_proxy": v.c_proxy,
        "C_proxy": v.C_proxy,
        "min_alpha": v.min_alpha,
        "max_alpha": v.max_alpha,
        "zero_tol": v.zero_tol,
        "witness": v.witness,
    }


def _entropy_dict(e) -> dict:
    return {
        "h_hat": e.h_hat,
        "stderr": e.stderr,
        "r_squared": e.r_squared,
        "intercept": e.intercept,
        "T_grid": e.T_grid,
        "counts": e.counts,
        "smoothing": e.smoothing,
        "prefactor": e.prefactor,
    }


@click.group()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), help="JSON or TOML file of option defaults; flags override it.")
@click.option("-v", "--verbose", count=True)
@click.version_option(__version__, prog_name="margulis-spectra")
@click.pass_context
def main(ctx, config, verbose):
    """Margulis invariants, properness, entropy and pressure of affine free groups."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    if config:
        cfg = load_config(config)
        ctx.default_map = {name: cfg for name in COMMANDS}


@_command("spectrum")
@_opt_rep
@_opt_common(8)
def spectrum_cmd(rep, max_len, class_mode, threads, cap, out, seed):
    """Tabulate alpha for every conjugacy class up to --max-len."""
    r = load_rep(rep)
    table = _table(r, max_len, class_mode, threads, cap)
    _ensure(out)
    write_spectrum_csv(Path(out) / "spectrum.csv", table)
    return EXIT_OK, {"label": r.label, "table": _table_summary(table)}


@_command("properness")
@_opt_rep
@_opt_common(8)
def properness_cmd(rep, max_len, class_mode, threads, cap, out, seed):
    """Sign-uniformity scan of the spectrum; exit 2 when signs are mixed."""
    r = load_rep(rep)
    table = _table(r, max_len, class_mode, threads, cap)
    v = properness_scan(table)
    return (EXIT_OK if v.proper else EXIT_IMPROPER), {
        "label": r.label,
        "table": _table_summary(table),
        "properness": _verdict_dict(v),
    }


@_command("entropy")
@_opt_rep
@click.option("--T-grid", "t_grid", help='Either "lo:hi:n" (geometric) or a comma list.')
@click.option("--smoothing", type=click.FloatRange(min=0), default=DEFAULT_SMOOTHING, show_default=True)
@_opt_common(8)
def entropy_cmd(rep, t_grid, smoothing, max_len, class_mode, threads, cap, out, seed):
    """Orbit-count growth rate with its fit diagnostics."""
    r = load_rep(rep)
    table = _table(r, max_len, class_mode, threads, cap)
    v = properness_scan(table)
    if v.verdict != POSITIVE:
        raise ImproperError(f"spectrum is {v.verdict}; entropy needs a positive spectrum")
    est = entropy_estimate(table, parse_t_grid(t_grid), smoothing=smoothing)
    _ensure(out)
    write_counts_csv(Path(out) / "counts.csv", est)
    payload = {"label": r.label, "table": _table_summary(table), "entropy": _entropy_dict(est)}
    if max_len >= 3:
        try:
            coarse = entropy_estimate(table.restrict(max_len - 2), smoothing=smoothing)
            payload["stabilization"] = {
                "max_len": max_len - 2,
                "h_hat": coarse.h_hat,
                "relative_change": abs(est.h_hat - coarse.h_hat) / est.h_hat,
            }
        except InsufficientDataError as exc:
            payload["stabilization"] = {"max_len": max_len - 2, "unavailable": str(exc)}
    return EXIT_OK, payload


def _directions(spec: str, rep: Representation, rep2: Representation | None, seed: int) -> list[tuple[str, TangentCocycle]]:
    """Parse "radial,random:K,coboundary:K,rep2" into named tangent cocycles."""
    rng = np.random.default_rng([seed, 2])
    scale = float(np.linalg.norm(rep.translations)) or 1.0
    d = rep.space.dim
    out = []
    for item in (s.strip() for s in spec.split(",") if s.strip()):
        kind, _, count = item.partition(":")
        k = int(count) if count else 1
        if kind == "radial":
            out.append(("radial", TangentCocycle.radial(rep)))
        elif kind == "random":
            for i in range(k):
                x = rng.standard_normal(rep.rank * d)
                out.append((f"random{i}", TangentCocycle(rep, scale * x / np.linalg.norm(x))))
        elif kind == "coboundary":
            for i in range(k):
                out.append((f"coboundary{i}", TangentCocycle.coboundary(rep, rng.standard_normal(d))))
        elif kind == "rep2":
            if rep2 is None:
                raise click.UsageError("direction rep2 needs --rep2")
            out.append(("rep2", TangentCocycle(rep, rep2.translations - rep.translations)))
        else:
            raise click.BadParameter(f"unknown direction {item!r}", param_hint="--directions")
    return out


@_command("pressure")
@_opt_rep
@_opt_rep2
@click.option("--directions", default="radial,random:4", show_default=True, help="radial, random:K, coboundary:K, rep2.")
@click.option("--step", type=click.FloatRange(min=0, min_open=True), default=0.02, show_default=True)
@click.option("--T-grid", "t_grid", help="Entropy grid; its largest point sets the intersection window.")
@click.option("--bootstrap", type=click.IntRange(min=0), default=200, show_default=True)
@click.option("--project/--no-project", default=True, show_default=True, help="Project non-radial directions to constant entropy.")
@_opt_common(12)
def pressure_cmd(rep, rep2, directions, step, t_grid, bootstrap, project, max_len, class_mode, threads, cap, out, seed):
    """Second difference of the renormalised intersection along directions."""
    r = load_rep(rep)
    r2 = load_rep(rep2) if rep2 else None
    if r2 is not None and not same_linear_parts(r, r2):
        raise click.UsageError("--rep2 must share the linear parts of --rep")
    table = _table(r, max_len, class_mode, threads, cap)
    v = properness_scan(table)
    if v.verdict != POSITIVE:
        raise ImproperError(f"spectrum is {v.verdict}; pressure needs a positive spectrum")
    grid = parse_t_grid(t_grid)
    base = entropy_estimate(table, grid)
    _ensure(out)
    write_counts_csv(Path(out) / "counts.csv", base)
    T = None if grid is None else float(grid[-1])
    samples = {}
    for name, tc in _directions(directions, r, r2, seed):
        if project and name != "radial":
            tc = constant_entropy_project(r, tc, table)
        if not np.any(tc.stacked):
            samples[name] = {"zero_direction": True, "second_diff": 0.0}
            continue
        try:
            ps = pressure_quadratic(
                r, tc, step=step, max_len=max_len, T=T, table=table,
                bootstrap=bootstrap, seed=seed, threads=threads,
            )
        except ImproperError as exc:
            samples[name] = {"improper_stencil": str(exc)}
            continue
        samples[name] = {
            "direction": tc.stacked,
            "second_diff": ps.second_diff,
            "second_diff_half_step": ps.second_diff_half_step,
            "richardson_ok": ps.richardson_ok,
            "eps_est": ps.eps_est,
            "noise": ps.noise,
            "psd_ok": ps.psd_ok,
            "significant": ps.significant,
            "t_values": ps.t_values,
            "j_values": ps.j_values,
            "h_values": ps.h_values,
            "i_values": ps.i_values,
            "T_grid": ps.T_grid,
        }
    return EXIT_OK, {
        "label": r.label,
        "table": _table_summary(table),
        "entropy": _entropy_dict(base),
        "step": step,
        "bootstrap": bootstrap,
        "samples": samples,
        "all_psd": all(s.get("psd_ok", True) for s in samples.values()),
        "significant_count": sum(bool(s.get("significant")) for s in samples.values()),
    }


@_command("rigidity")
@_opt_rep
@_opt_rep2
@click.option(
    "--direction",
    type=click.Choice(["rep2", "radial", "coboundary", "random"]),
    default="rep2",
    show_default=True,
    help="rep2 uses the translation difference of the two files.",
)
@click.option("--tol", type=click.FloatRange(min=0), default=1e-8, show_default=True, help="Threshold for a vanishing derivative.")
@_opt_common(6)
def rigidity_cmd(rep, rep2, direction, tol, max_len, class_mode, threads, cap, out, seed):
    """Derivative spectrum of a translation direction and its coboundary test."""
    r = load_rep(rep)
    r2 = load_rep(rep2) if rep2 else None
    if direction == "rep2":
        if r2 is None:
            raise click.UsageError("--direction rep2 needs --rep2")
        if not same_linear_parts(r, r2):
            raise click.UsageError("--rep2 must share the linear parts of --rep")
    (_, tc), = _directions(direction if direction != "random" else "random:1", r, r2, seed)
    table = _table(r, max_len, class_mode, threads, cap)
    adot = table.linear.covectors @ tc.stacked
    cob = solve_coboundary(r, tc)
    rigid = bool(np.all(np.abs(adot) <= tol))
    _ensure(out)
    rows = ((c.text, c.length, table.alphas[i], adot[i]) for i, c in enumerate(table.classes))
    _write_csv(Path(out) / "derivative.csv", ["word", "length", "alpha", "alpha_dot"], rows)
    return EXIT_OK, {
        "label": r.label,
        "table": _table_summary(table),
        "direction": {"kind": direction, "stacked": tc.stacked},
        "coboundary": {
            "feasible": cob.feasible,
            "v": cob.v,
            "residuals": cob.residuals,
            "null_dim": cob.null_dim,
            "tolerance": cob.tolerance,
        },
        "max_abs_alpha_dot": float(np.abs(adot).max()) if adot.size else 0.0,
        "derivative_vanishes": rigid,
        "consistent": (not cob.feasible) or rigid,
    }


@_command("convexity")
@_opt_rep
@_opt_rep2
@click.option("--k", "k", type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True, help="Common endpoint entropy.")
@click.option("--t-values", default="0.25,0.5,0.75", show_default=True)
@_opt_common(12)
def convexity_cmd(rep, rep2, k, t_values, max_len, class_mode, threads, cap, out, seed):
    """Entropy along the segment between two endpoints scaled to entropy k."""
    r = load_rep(rep)
    if rep2 is None:
        raise click.UsageError("convexity needs --rep2")
    r2 = load_rep(rep2)
    if not same_linear_parts(r, r2):
        raise click.UsageError("--rep2 must share the linear parts of --rep")
    ts = _floats(t_values, "--t-values")
    if not ts or any(not 0 < t < 1 for t in ts):
        raise click.BadParameter("interior parameters must lie in (0, 1)", param_hint="--t-values")
    table = _table(r, max_len, class_mode, threads, cap)
    rep_ = convexity_scan(r, r2, k, ts, max_len, table=table, normalize=True, threads=threads)
    below = [h < k for h in rep_.h_values]
    return (EXIT_OK if rep_.cone_convex else EXIT_IMPROPER), {
        "label": r.label,
        "label2": r2.label,
        "table": _table_summary(table),
        "k": k,
        "t_values": rep_.t_values,
        "h_values": rep_.h_values,
        "stderrs": rep_.stderrs,
        "verdicts": rep_.verdicts,
        "endpoint_h": rep_.endpoint_h,
        "max_interior_h": rep_.max_interior_h,
        "margin": rep_.margin,
        "margins_in_stderr": rep_.margins_in_stderr,
        "cone_convex": rep_.cone_convex,
        "strictly_below_k": all(below),
        "below_by_3_stderr": all(m > 3 for m in rep_.margins_in_stderr),
    }


@_command("make-family")
@click.option("--family", type=click.Choice(list(FAMILIES)), default="schottky_so21", show_default=True)
@click.option("--n", "n", type=int, default=1, show_default=True)
@click.option("--strength", type=float, default=0.8, show_default=True)
@click.option("--translation-scale", type=float, default=1.0, show_default=True)
@click.option("--perturbation", type=float, default=0.0, show_default=True)
@click.option("--targets", default="1,1,1", show_default=True, help="Invariants of a, b and ab before scaling.")
@click.option("--max-len", type=click.IntRange(min=1), default=4, show_default=True, help="Proximality check length.")
@click.option("--out", type=click.Path(file_okay=False), default="out", show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
def make_family_cmd(family, n, strength, translation_scale, perturbation, targets, max_len, out, seed):
    """Write a seeded representation to OUT/rep.json."""
    try:
        spec = SeededFamily(
            family=family, n=n, strength=strength, translation_scale=translation_scale,
            seed=seed, perturbation=perturbation, targets=tuple(_floats(targets, "--targets")),
        )
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None
    rep = build_family(spec)
    _ensure(out)
    save_representation(rep, Path(out) / "rep.json")
    prox = proximality_scan(rep, max_len)
    return (EXIT_OK if prox.passed else EXIT_GUARD), {
        "label": rep.label,
        "rep_file": "rep.json",
        "proximality": {
            "max_len": prox.max_len,
            "words_checked": prox.words_checked,
            "min_log_gap": prox.min_log_gap,
            "threshold": prox.threshold,
            "flagged": [list(w) for w in prox.flagged],
            "passed": prox.passed,
        },
    }


@main.command("run")
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--threads", type=click.IntRange(min=1), default=None)
@click.pass_context
def run_cmd(ctx, config_file, threads):
    """Run the experiment described by a JSON or TOML config file."""
    cfg = load_config(config_file)
    name = cfg.pop("command", None)
    if name not in COMMANDS:
        raise click.UsageError(f"config 'command' must be one of {', '.join(COMMANDS)}")
    cmd = main.get_command(ctx, name)
    known = {p.name for p in cmd.params}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise click.UsageError(f"config keys not understood by {name}: {', '.join(unknown)}")
    if threads is not None and "threads" in known:
        cfg["threads"] = threads
    params = {}
    for p in cmd.params:
        if p.name in cfg:
            params[p.name] = p.type_cast_value(ctx, cfg[p.name])
        else:
            params[p.name] = p.get_default(ctx)
    ctx.invoke(cmd, **params)


if __name__ == "__main__":
    main()
