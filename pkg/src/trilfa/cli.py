"""Command-line front end."""
from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from . import lfa
from .discretizations import (GOLDEN_FILES, ProblemSpec, golden_path, golden_reference, parse_golden,
                              read_golden, render_golden)
from .smoother import preset
from .tables import DEFAULT_LEVELS, TABLE_IDS, as_grid, curlcurl_problem, run_table

PROBLEMS = {"stokes": "Stokes", "curlcurl": "CurlCurl"}
SMOOTHERS = {"full": "stokes-full", "diag": "stokes-diag", "vertex": "nedelec-vertex"}
DEFAULT_SMOOTHER = {"stokes": "diag", "curlcurl": "vertex"}
VALID_SMOOTHERS = {"stokes": ("full", "diag"), "curlcurl": ("vertex",)}
MAX_LEVELS = 10


# --------------------------------------------------------------------------
# config files


def _load_config(ctx, param, value):
    """Flat JSON whose keys mirror the flag names; becomes the defaults of the command."""
    if value is None:
        return None
    try:
        data = json.loads(Path(value).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise click.BadParameter(f"cannot read config: {exc}", ctx=ctx, param=param)
    if not isinstance(data, dict):
        raise click.BadParameter("config must be a flat JSON object", ctx=ctx, param=param)
    known = {p.name for p in ctx.command.params if p.name != "config"}
    # keys may use the flag spelling (``format``, ``cycle``) or the parameter name
    alias = {o.lstrip("-").replace("-", "_"): p.name for p in ctx.command.params
             if p.name != "config" for o in getattr(p, "opts", ()) if o.startswith("--")}
    out = {}
    for key, val in data.items():
        name = key.lstrip("-").replace("-", "_")
        name = alias.get(name, name)
        if name == "command":
            if val != ctx.command.name:
                raise click.BadParameter(f"config is for command {val!r}", ctx=ctx, param=param)
            continue
        if name not in known:
            raise click.BadParameter(f"unknown config key {key!r}", ctx=ctx, param=param)
        if isinstance(val, (dict, list)):
            raise click.BadParameter(f"config value for {key!r} must be a scalar", ctx=ctx, param=param)
        out[name] = val
    ctx.default_map = {**(ctx.default_map or {}), **out}
    return value


config_option = click.option("--config", type=click.Path(dir_okay=False), callback=_load_config,
                             is_eager=True, expose_value=False, help="Flat JSON config; flags override.")
format_option = click.option("--format", "fmt", type=click.Choice(["md", "csv", "json"]), default="md",
                             show_default=True)
out_option = click.option("--out", type=click.Path(dir_okay=False), default=None,
                          help="Write output to this file instead of stdout.")


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


# --------------------------------------------------------------------------
# rendering


def fmt3(x) -> str:
    """Three significant digits; integers and markers pass through."""
    if x is None:
        return "-"
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):#.3g}"


def markdown(header, rows) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(str(c) for c in r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


# --------------------------------------------------------------------------
# shared option validation


def _check_range(name, value, lo=None, hi=None):
    if value is None:
        return
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        bounds = f"[{lo if lo is not None else '-inf'}, {hi if hi is not None else 'inf'}]"
        raise click.UsageError(f"--{name} must lie in {bounds}, got {value}")


def _smoother_name(problem: str, smoother: str | None) -> str:
    smoother = smoother or DEFAULT_SMOOTHER[problem]
    if smoother not in VALID_SMOOTHERS[problem]:
        raise click.UsageError(f"smoother {smoother!r} is not available for problem {problem!r}")
    return SMOOTHERS[smoother]


def _nu_split(nu, nu1, nu2):
    if nu is not None:
        if nu1 is not None or nu2 is not None:
            raise click.UsageError("--nu cannot be combined with --nu1/--nu2")
        return nu, 0
    return (1 if nu1 is None else nu1), (0 if nu2 is None else nu2)


def _omega(problem, omega_u, omega_p):
    if problem == "stokes":
        return (omega_u, omega_u, omega_p)
    return (omega_u,) * 3


def _problem_spec(problem, levels, kappa):
    if problem == "stokes":
        return ProblemSpec("Stokes")
    return curlcurl_problem(levels, kappa)


# --------------------------------------------------------------------------
# commands


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Local Fourier analysis and multigrid experiments for block smoothers on triangles.

    Set TRILFA_THREADS to cap the worker threads of frequency sweeps.
    """


@main.command()
@config_option
@click.option("--problem", type=click.Choice(sorted(PROBLEMS)), default="stokes", show_default=True)
@click.option("--smoother", type=click.Choice(sorted(SMOOTHERS)), default=None,
              help="Default: diag for stokes, vertex for curlcurl.")
@click.option("--mode", type=click.Choice(["smooth", "twogrid", "threegrid"]), default="twogrid", show_default=True)
@click.option("--cycle", "cycle_kind", type=click.Choice(["V", "W"]), default="V", show_default=True)
@click.option("--nu", type=int, default=None, help="Total smoothing steps, all pre-smoothing.")
@click.option("--nu1", type=int, default=None)
@click.option("--nu2", type=int, default=None)
@click.option("--omega-u", type=float, default=1.0, show_default=True)
@click.option("--omega-p", type=float, default=1.0, show_default=True)
@click.option("--freq-n", type=int, default=33, show_default=True)
@click.option("--levels", type=int, default=None, help="Curl-curl mesh size 2^-levels (default 9).")
@click.option("--kappa", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True, help="Unused by the analysis; accepted for config symmetry.")
@format_option
@out_option
def analyze(problem, smoother, mode, cycle_kind, nu, nu1, nu2, omega_u, omega_p, freq_n, levels, kappa,
            seed, fmt, out):
    """Smoothing, two-grid or three-grid factor of one configuration."""
    name = _smoother_name(problem, smoother)
    nu1, nu2 = _nu_split(nu, nu1, nu2)
    levels = DEFAULT_LEVELS["T7"] if levels is None else levels
    for flag, val, lo, hi in (("nu1", nu1, 0, None), ("nu2", nu2, 0, None), ("freq-n", freq_n, 8, None),
                              ("levels", levels, 1, MAX_LEVELS), ("kappa", kappa, 0, None)):
        _check_range(flag, val, lo, hi)
    if not (omega_u > 0 and omega_p > 0):
        raise click.UsageError("relaxation parameters must be positive")
    spec = preset(name, _omega(problem, omega_u, omega_p))
    cfg = lfa.KGridConfig(nu1=nu1, nu2=nu2, gamma=1 if cycle_kind == "V" else 2, freq_n=freq_n)
    try:
        rep = lfa.analyze(_problem_spec(problem, levels, kappa), spec, cfg, mode)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        click.echo(f"error: analysis failed: {exc}", err=True)
        sys.exit(1)
    d = _jsonable(rep.to_dict())
    if fmt == "json":
        _emit(json_text({"kind": "analyze", "mode": mode, "report": d}), out)
        return
    header = ["problem", "smoother", "mode", "cycle", "nu1", "nu2", "mu", "rho2g", "rho3g",
              "argmax_theta", "skipped", "evaluated"]
    arg = rep.argmax_theta
    argtxt = "-" if arg is None else f"({arg[0]:.4f}, {arg[1]:.4f})"
    row = [problem, smoother or DEFAULT_SMOOTHER[problem], mode, cycle_kind, nu1, nu2,
           fmt3(rep.mu), fmt3(rep.rho2g), fmt3(rep.rho3g), argtxt, rep.skipped, rep.evaluated]
    _emit(markdown(header, [row]) if fmt == "md" else csv_text(header, [row]), out)


@main.command()
@config_option
@click.argument("table_id", type=click.Choice(TABLE_IDS))
@click.option("--levels", type=int, default=None,
              help="Finest level (default 8 for T2, 9 otherwise).")
@click.option("--freq-n", type=int, default=33, show_default=True)
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--measure/--no-measure", default=True, show_default=True,
              help="Run the solver cells; without it only predicted cells are computed and checked.")
@format_option
@out_option
def table(table_id, levels, freq_n, tol, seed, measure, fmt, out):
    """Reproduce one table with reference values; exit 0 only if every cell passes."""
    lo = 6 if table_id == "T8" else 4 if table_id == "T4" else 2
    _check_range("levels", levels, lo, MAX_LEVELS)
    _check_range("freq-n", freq_n, 8, None)
    _check_range("tol", tol, 0.0, 1.0)
    try:
        res = run_table(table_id, levels, freq_n=freq_n, tol=tol, seed=seed, measure=measure)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError, MemoryError) as exc:
        click.echo(f"error: {table_id} failed: {exc}", err=True)
        sys.exit(1)
    if fmt == "json":
        _emit(json_text(_jsonable(res.to_dict())), out)
    elif fmt == "csv":
        rows = [[c.row, c.column, fmt3(c.value), fmt3(c.reference), fmt3(c.tolerance), "pass" if c.passed else "FAIL"]
                for c in res.cells]
        _emit(csv_text(["row", "column", "value", "reference", "tolerance", "status"], rows), out)
    else:
        grid = []
        for r in as_grid(res):
            grid.append([r[0]] + ["" if c is None else
                                  f"{fmt3(c.value)} ({fmt3(c.reference)})" + ("" if c.passed else " !")
                                  for c in r[1:]])
        fails = [c for c in res.cells if not c.passed]
        text = f"{table_id}: computed (reference); '!' marks cells outside tolerance\n\n"
        text += markdown([""] + res.columns, grid)
        text += f"\n{len(res.cells) - len(fails)}/{len(res.cells)} cells pass\n"
        for c in fails:
            text += f"FAIL {c.row} / {c.column}: {fmt3(c.value)} vs {fmt3(c.reference)} (tol {fmt3(c.tolerance)})\n"
        _emit(text, out)
    sys.exit(0 if res.passed else 1)


def _grid_values(text: str, name: str) -> np.ndarray:
    """``x`` or ``lo:hi:step`` (inclusive) to an array of values."""
    try:
        parts = [float(p) for p in str(text).split(":")]
    except ValueError:
        raise click.UsageError(f"--{name}: expected a number or lo:hi:step, got {text!r}")
    if len(parts) == 1:
        return np.array(parts)
    if len(parts) != 3 or parts[2] <= 0:
        raise click.UsageError(f"--{name}: expected lo:hi:step with a positive step")
    lo, hi, step = parts
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    if n <= 0:
        raise click.UsageError(f"--{name}: empty range {text!r}")
    return np.round(lo + step * np.arange(n), 12)


@main.command("sweep-omega")
@config_option
@click.option("--problem", type=click.Choice(sorted(PROBLEMS)), default="stokes", show_default=True)
@click.option("--smoother", type=click.Choice(sorted(SMOOTHERS)), default=None)
@click.option("--mode", type=click.Choice(["twogrid", "threegrid"]), default="twogrid", show_default=True,
              help="Objective: two-grid or three-grid factor.")
@click.option("--cycle", "cycle_kind", type=click.Choice(["V", "W"]), default="V", show_default=True)
@click.option("--nu", type=int, default=None)
@click.option("--nu1", type=int, default=None)
@click.option("--nu2", type=int, default=None)
@click.option("--omega-u", default="0.8:1.2:0.05", show_default=True, help="Value or lo:hi:step.")
@click.option("--omega-p", default="0.4:0.8:0.05", show_default=True, help="Value or lo:hi:step.")
@click.option("--freq-n", type=int, default=33, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["md", "csv", "json"]), default="csv", show_default=True)
@out_option
def sweep_omega(problem, smoother, mode, cycle_kind, nu, nu1, nu2, omega_u, omega_p, freq_n, fmt, out):
    """Grid search for the relaxation parameters minimizing a convergence factor."""
    if problem != "stokes":
        raise click.UsageError("sweep-omega needs a Stokes preset")
    name = _smoother_name(problem, smoother)
    nu1, nu2 = _nu_split(nu, nu1, nu2)
    _check_range("nu1", nu1, 0, None)
    _check_range("nu2", nu2, 0, None)
    _check_range("freq-n", freq_n, 8, None)
    wu, wp = _grid_values(omega_u, "omega-u"), _grid_values(omega_p, "omega-p")
    if (wu <= 0).any() or (wp <= 0).any():
        raise click.UsageError("relaxation parameters must be positive")
    objective = "rho2g" if mode == "twogrid" else "rho3g"
    cfg = lfa.KGridConfig(nu1=nu1, nu2=nu2, gamma=1 if cycle_kind == "V" else 2, freq_n=freq_n)
    problem_spec = ProblemSpec("Stokes")
    try:
        grid = lfa.omega_grid(problem_spec, preset(name), cfg, wu, wp, objective)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        click.echo(f"error: sweep failed: {exc}", err=True)
        sys.exit(1)
    order = np.lexsort((grid[:, 1], grid[:, 0], grid[:, 2]))
    best = grid[order[0]]
    if fmt == "json":
        obj = {"kind": "sweep-omega", "objective": objective,
               "grid": [{"omega_u": float(a), "omega_p": float(b), "rho": float(c)} for a, b, c in grid],
               "argmin": {"omega_u": float(best[0]), "omega_p": float(best[1]), "rho": float(best[2])},
               "config": _jsonable({"smoother": name, **asdict(cfg)})}
        _emit(json_text(obj), out)
        return
    header = ["omega_u", "omega_p", objective]
    if fmt == "csv":
        rows = [[repr(float(a)), repr(float(b)), repr(float(c))] for a, b, c in grid]
        text = csv_text(header, rows)
        text += f"argmin,{float(best[0])!r},{float(best[1])!r},{float(best[2])!r}\n"
    else:
        rows = [[fmt3(a), fmt3(b), fmt3(c)] for a, b, c in grid]
        text = markdown(header, rows)
        text += f"\nargmin: omega_u={fmt3(best[0])} omega_p={fmt3(best[1])} {objective}={fmt3(best[2])}\n"
    _emit(text, out)


def _golden_diff(old: dict, new: dict) -> list:
    diffs = []
    for key in sorted(set(old) | set(new)):
        a, b = old.get(key), new.get(key)
        if a != b:
            label = " ".join(str(k) for k in key)
            diffs.append(f"{label}: committed {a!r} oracle {b!r}")
    return diffs


@main.command("regenerate-stencils")
@config_option
@click.option("--force", is_flag=True, help="Overwrite golden files that differ from the oracle.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Directory holding the golden files (default: the installed package data).")
@click.option("--format", "fmt", type=click.Choice(["md", "csv", "json"]), default="md", show_default=True)
def regenerate_stencils(force, out_dir, fmt):
    """Recompute golden stencils with the patch oracle and compare with the stored files."""
    report, mismatch = [], False
    for name, fname in GOLDEN_FILES.items():
        path = Path(out_dir) / fname if out_dir else golden_path(name)
        text = render_golden(name, golden_reference(name))
        if path.exists():
            stored = path.read_text()
            diffs = [] if stored == text else _golden_diff(read_golden(name, path),
                                                            parse_golden(text))
            if stored != text and not diffs:
                diffs = ["header or formatting differs"]
        else:
            diffs = ["file missing"]
        written = False
        if diffs and (force or not path.exists()):
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
            written = True
        elif diffs:
            mismatch = True
        report.append({"name": name, "path": str(path), "differences": diffs, "written": written})
    if fmt == "json":
        click.echo(json_text({"kind": "regenerate-stencils", "forced": bool(force), "files": report}), nl=False)
    elif fmt == "csv":
        rows = [[r["name"], r["path"], len(r["differences"]), r["written"]] for r in report]
        click.echo(csv_text(["name", "path", "differences", "written"], rows), nl=False)
    else:
        for r in report:
            if not r["differences"]:
                click.echo(f"{r['name']}: no differences ({r['path']})")
                continue
            state = "rewritten" if r["written"] else "MISMATCH"
            click.echo(f"{r['name']}: {state}, {len(r['differences'])} differing entries ({r['path']})")
            for d in r["differences"]:
                click.echo(f"  {d}")
    sys.exit(1 if mismatch else 0)


@main.command()
@config_option
@click.option("--problem", type=click.Choice(sorted(PROBLEMS)), default="stokes", show_default=True)
@click.option("--smoother", type=click.Choice(sorted(SMOOTHERS)), default=None)
@click.option("--experiment", type=click.Choice(["asymptotic", "cavity"]), default="asymptotic", show_default=True,
              help="asymptotic: zero rhs and random start; cavity: lid-driven cavity to --tol.")
@click.option("--cycle", "cycle_kind", type=click.Choice(["V", "W"]), default="V", show_default=True)
@click.option("--nu", type=int, default=None)
@click.option("--nu1", type=int, default=None)
@click.option("--nu2", type=int, default=None)
@click.option("--omega-u", type=float, default=1.0, show_default=True)
@click.option("--omega-p", type=float, default=1.0, show_default=True)
@click.option("--levels", type=int, default=None, help="Default 8 for stokes, 9 for curlcurl.")
@click.option("--kappa", type=float, default=1.0, show_default=True)
@click.option("--two-level", is_flag=True, help="Solve the next-coarser level exactly.")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@format_option
@out_option
def measure(problem, smoother, experiment, cycle_kind, nu, nu1, nu2, omega_u, omega_p, levels, kappa,
            two_level, tol, seed, fmt, out):
    """Run the multigrid solver and report rho_h and the residual history."""
    from .mgsolve import CycleSpec, cavity_benchmark, measure_factor

    name = _smoother_name(problem, smoother)
    nu1, nu2 = _nu_split(nu, nu1, nu2)
    levels = (DEFAULT_LEVELS["T2"] if problem == "stokes" else DEFAULT_LEVELS["T7"]) if levels is None else levels
    _check_range("levels", levels, 2, MAX_LEVELS)
    _check_range("tol", tol, 0.0, 1.0)
    if experiment == "cavity" and problem != "stokes":
        raise click.UsageError("the cavity experiment is a Stokes problem")
    spec = CycleSpec(cycle_kind, nu1, nu2, name, _omega(problem, omega_u, omega_p))
    try:
        if experiment == "cavity":
            rep = cavity_benchmark(levels, spec, tol=tol)
        else:
            rep = measure_factor(ProblemSpec(PROBLEMS[problem], kappa=kappa), spec, levels,
                                 two_level=two_level, seed=seed)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError, MemoryError) as exc:
        click.echo(f"error: solver failed: {exc}", err=True)
        sys.exit(1)
    hist = rep.csv_rows()
    if fmt == "csv":
        _emit(csv_text(["iter", "resnorm"], [[i, repr(r)] for i, r in hist]), out)
    elif fmt == "json":
        obj = {"kind": "measure", "experiment": experiment, "rho_h": _jsonable(float(rep.rho_h)),
               "diverged": bool(rep.diverged), "iterations_to_tol": rep.iterations_to_tol,
               "history": [{"iter": i, "resnorm": r} for i, r in hist],
               "config": {"problem": problem, "smoother": name, "cycle": cycle_kind, "nu1": nu1, "nu2": nu2,
                          "omega": list(spec.omega), "levels": levels, "seed": seed, "tol": tol}}
        _emit(json_text(_jsonable(obj)), out)
    else:
        header = ["experiment", "levels", "cycle", "nu1", "nu2", "rho_h", "iterations"]
        rho = "div" if rep.diverged and experiment == "asymptotic" else fmt3(rep.rho_h)
        its = "-" if rep.iterations_to_tol is None else rep.iterations_to_tol
        _emit(markdown(header, [[experiment, levels, cycle_kind, nu1, nu2, rho, its]]), out)


@main.command("export-mesh")
@click.option("--levels", type=int, required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def export_mesh(levels, out):
    """Write the refined mesh in the plain-text debugging format."""
    from .mgsolve import build_mesh, write_mesh

    _check_range("levels", levels, 0, MAX_LEVELS)
    write_mesh(build_mesh(levels), out)
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
