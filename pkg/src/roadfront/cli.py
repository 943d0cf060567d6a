"""Command-line entry point: dispersion predictions, simulations and sweeps.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 tolerance breach under ``--check``.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import subprocess
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dispersion as disp
from .config import COMMANDS, RunConfig, check_simulation, dump_config, load_config, with_overrides
from .errors import ConfigError, RoadfrontError
from .fronts import estimate_decay, estimate_speed, trajectory_fronts
from .nonlinearity import SirCumulative
from .simulator import init_invasion, init_sirt, run, steady_state

OUT_ENV = "ROADFRONT_OUT"
DEFAULT_OUT_ROOT = "runs"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4

RESIDUAL_TOL = 1e-6
DECAY_RESIDUAL_TOL = 1e-10
TAIL_TOL = 1e-3


def _version() -> str:
    """git-describe string of the source tree, falling back to the package version."""
    try:
        out = subprocess.run(["git", "describe", "--tags", "--always"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    from importlib.metadata import PackageNotFoundError, version
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _cell(val) -> str:
    if isinstance(val, (float, np.floating)):
        return repr(float(val))
    if isinstance(val, bool):
        return "true" if val else "false"
    return str(val)


def rows_to_csv(rows: list[dict]) -> str:
    """CSV text with the union of row keys as header, in first-seen order."""
    header: list[str] = []
    for row in rows:
        header.extend(k for k in row if k not in header)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(row.get(k, "")) for k in header])
    return buf.getvalue()


def write_atomic(path: Path, data: str | bytes) -> None:
    """Write to a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require_sir(cfg: RunConfig, what: str) -> SirCumulative:
    f = cfg.nonlinearity
    if not isinstance(f, SirCumulative):
        raise ConfigError(f"{cfg.source}: [nonlinearity] kind: {what} needs the 'sir' nonlinearity")
    return f


# ---- dispersion-side commands: each returns a list of output rows -----------

def cmd_speed(cfg: RunConfig) -> list[dict]:
    p = cfg.params.with_(q=0.0)
    res = disp.c_star(p)
    row = cfg.param_row()
    row.update(c_K=disp.c_field(p), D_star=disp.D_threshold(p), c_star=res.c_star,
               regime=res.regime, a=res.a, b=res.b, gamma=res.gamma,
               residual_line=res.residual_line, residual_field=res.residual_field,
               residual_radius=res.residual_radius)
    worst = max(res.residual_line, res.residual_field, res.residual_radius)
    row["check"] = "pass" if worst <= RESIDUAL_TOL else "fail"
    return [row]


def cmd_dstar(cfg: RunConfig) -> list[dict]:
    p = cfg.params
    cK = disp.c_field(p)
    row = cfg.param_row()
    row.update(c_K=cK, D_star=disp.D_threshold(p), a_K=cK / (2 * p.d),
               phi_at_a_K=p.kernel.phi(cK / (2 * p.d)), second_moment=p.kernel.second_moment())
    if p.D > 0:
        c_b, a_min = disp.c_benchmark(p)
        row.update(c_benchmark=c_b, a_benchmark=a_min,
                   residual_benchmark=disp.benchmark_stationarity_residual(p, a_min))
    row["regime"] = disp.FIELD_DOMINATED if p.D <= row["D_star"] else disp.LINE_BOOSTED
    row["check"] = "pass"
    return [row]


def cmd_decay(cfg: RunConfig) -> list[dict]:
    f = _require_sir(cfg, "decay")
    p = cfg.params.with_(q=0.0)
    res = disp.decay_rates(p)
    row = cfg.param_row()
    row.update(R0=f.R0, a_star=res.a_star, b_star=res.b_star, gamma_star=res.gamma_star,
               baseline_v=res.baseline, baseline_u=res.baseline_u, a_inf=res.a_inf,
               radius=res.radius, thick_tail_bound=math.sqrt(p.mu / (p.kernel.second_moment() * p.D * p.L**2)),
               residual_graph=res.residual_graph, residual_circle=res.residual_circle)
    ok = (max(res.residual_graph, res.residual_circle) <= DECAY_RESIDUAL_TOL
          and res.a_star <= row["thick_tail_bound"])
    row["check"] = "pass" if ok else "fail"
    return [row]


def cmd_transport(cfg: RunConfig) -> list[dict]:
    p = cfg.params
    if p.q == 0:
        raise ConfigError(f"{cfg.source}: [params] q: transport needs q != 0")
    speeds = disp.transport_speeds(p)
    cK = disp.c_field(p)
    kappa = disp.kappa_star(p)
    row = cfg.param_row()
    row.update(c_K=cK, c_plus=speeds.c_plus, c_minus=speeds.c_minus,
               c_plus_over_q=speeds.c_plus / abs(p.q), kappa_star=kappa)
    ok = speeds.c_plus >= cK and speeds.c_minus >= cK and (abs(p.q) <= cK or speeds.c_plus < abs(p.q))
    row["check"] = "pass" if ok else "fail"
    return [row]


def cmd_reduced(cfg: RunConfig) -> list[dict]:
    p = cfg.params.with_(q=0.0)
    fp = p.fprime0
    row = cfg.param_row()
    w = disp.w_star_reduced(p.mu, p.nu, p.d, fp)
    row.update(w_star=w, limit_speed_factor=disp.w_star_limit_speed(p))
    if p.D > 0:
        row["c_star_over_sqrt_DL2"] = disp.c_star(p).c_star / math.sqrt(p.D * p.L**2)
    if isinstance(p.f, SirCumulative) and p.f.R0 > 1:
        nd = disp.sir_nondimensional(p)
        w_sirt = disp.omega_sirt_reduced(nd["D_nd"], nd["Lambda"], nd["R0"], nd["mu_bar"],
                                         nd["nu_bar"], p.kernel.profile)
        row.update({f"nd_{k}": v for k, v in nd.items()})
        row.update(w_sirt=w_sirt, c_sirt=math.sqrt(p.d * p.f.alpha) * w_sirt)
    row["check"] = "pass" if 0 < w <= 0.5 else "fail"
    return [row]


# ---- simulation ----------------------------------------------------------------

def _profiles_csv(t, x, values) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [_cell(float(xi)) for xi in x])
    for ti, row in zip(t, values):
        w.writerow([_cell(float(ti))] + [_cell(float(v)) for v in row])
    return buf.getvalue()


def _speed_rows(cfg, traj, predicted: dict, limit_u: float, limit_v: float) -> list[dict]:
    """Measured speeds at every (level, probe) against the predictions per side."""
    rows, tol = [], cfg.values["run"]["speed_tolerance"]
    fit_window = cfg.values["run"]["fit_window"]
    bump = cfg.initial
    clear = 3 * bump.radius
    probes = [("line", None, limit_u)] + [(f"y={y!r}", y, limit_v) for y in cfg.probes]
    for level in cfg.levels:
        for name, y, limit in probes:
            trace = trajectory_fronts(traj, level, limit, y)
            for side, (c_pred, tol_side, bounds) in predicted.items():
                row = cfg.param_row()
                row.update(quantity=f"speed_{side}", level=level, probe=name, predicted=c_pred)
                try:
                    c_hat, err = estimate_speed(trace, fit_window, side, clear_distance=clear)
                except RoadfrontError as exc:
                    row.update(measured="", stderr="", rel_error="", check="fail", note=str(exc))
                    rows.append(row)
                    continue
                rel = (c_hat - c_pred) / c_pred
                ok = abs(rel) <= (tol if tol_side is None else tol_side)
                if bounds is not None:
                    ok = ok and bounds[0] < c_hat < bounds[1]
                row.update(measured=c_hat, stderr=err, rel_error=rel, check="pass" if ok else "fail",
                           note="")
                rows.append(row)
    return rows


def cmd_simulate(cfg: RunConfig, out_dir: Path) -> list[dict]:
    """Run the configured model, write traces and a predicted-vs-measured summary."""
    check_simulation(cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"version": _version(), "model": cfg.model, "params": cfg.param_row(),
                "grid": dict(cfg.values["grid"]), "status": "running", "files": []}
    write_atomic(out_dir / "config.ini", dump_config(cfg))
    manifest["files"].append("config.ini")

    def put(name, data):
        write_atomic(out_dir / name, data)
        manifest["files"].append(name)

    def flush():
        write_atomic(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    try:
        rows = _simulate(cfg, put, manifest)
    except BaseException as exc:
        manifest["status"] = "partial"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        flush()
        raise
    put("summary.csv", rows_to_csv(rows))
    manifest["status"] = "complete"
    flush()
    return rows


def _simulate(cfg: RunConfig, put, manifest) -> list[dict]:
    p, g, run_cfg = cfg.params, cfg.grid, cfg.values["run"]
    probes = cfg.probes
    f = p.f
    sir = isinstance(f, SirCumulative)
    subcritical = sir and f.R0 < 1

    if cfg.model == "invasion":
        state = init_invasion(g, p, cfg.initial)
    else:
        state = init_sirt(g, p, cfg.initial, model=cfg.model)
    manifest["dt"] = state.dt

    if subcritical:
        return _simulate_decay(cfg, state, put, manifest)

    traj = run(state, run_cfg["t_end"], run_cfg["snapshot_every"], probe_y=probes)
    put("line_u.csv", _profiles_csv(traj.times, traj.x, traj.line()))
    for y in probes:
        put(f"trace_y{y!r}.csv", _profiles_csv(traj.times, traj.x, traj.trace(y)))
    v = np.ascontiguousarray(state.v, dtype="<f8")
    put("field_v.bin", v.tobytes(order="C"))
    manifest["field_v.bin"] = {"dtype": "float64 little-endian", "order": "row-major",
                               "shape": list(v.shape), "rows": "y_j = j*dy", "cols": "x_i = -X + i*dx"}

    limit_v = f.v_star()
    limit_u = p.nu / p.mu * limit_v
    fronts = []
    for level in cfg.levels:
        for name, y, limit in [("line", None, limit_u)] + [(f"y={y!r}", y, limit_v) for y in probes]:
            tr = trajectory_fronts(traj, level, limit, y)
            fronts.extend({"level": level, "probe": name, "t": t, "x_left": xl, "x_right": xr}
                          for t, xl, xr in zip(tr.times, tr.positions_left, tr.positions_right))
    put("fronts.csv", rows_to_csv(fronts))

    if cfg.model == "transport":
        speeds = disp.transport_speeds(p)
        cK = disp.c_field(p)
        q = abs(p.q)
        fast, slow = ("right", "left") if p.q > 0 else ("left", "right")
        c_fast = speeds.c_plus
        # the upstream speed is never slowed by transport: tighter tolerance
        predicted = {fast: (c_fast, None, (1.05 * cK, 0.99 * q) if q > cK else None),
                     slow: (speeds.c_minus, min(0.08, run_cfg["speed_tolerance"]), None)}
    else:
        res = disp.c_star(p)
        predicted = {"right": (res.c_star, None, None), "left": (res.c_star, None, None)}
        manifest["regime"] = res.regime
    rows = _speed_rows(cfg, traj, predicted, limit_u, limit_v)
    return rows


def _simulate_decay(cfg: RunConfig, state, put, manifest) -> list[dict]:
    """R0 < 1: steady state, tail decay fit against a_*, tail smallness at X/2."""
    p, g, run_cfg = cfg.params, cfg.grid, cfg.values["run"]
    ss = steady_state(state, tol=run_cfg["tol"], t_max=run_cfg["t_max"], strict=True)
    manifest["steady"] = {"t": ss.t, "exit": ss.exit}
    x = g.x
    put("steady_line_u.csv", _profiles_csv([ss.t], x, [ss.u]))
    put("steady_trace_v0.csv", _profiles_csv([ss.t], x, [ss.v[0]]))
    v = np.ascontiguousarray(ss.v, dtype="<f8")
    put("field_v.bin", v.tobytes(order="C"))
    manifest["field_v.bin"] = {"dtype": "float64 little-endian", "order": "row-major",
                               "shape": list(v.shape), "rows": "y_j = j*dy", "cols": "x_i = -X + i*dx"}

    pred = disp.decay_rates(p)
    window = run_cfg["decay_window"] or (g.X / 4, g.X / 2)
    tol = run_cfg["decay_tolerance"]
    rows = []
    for name, values, base in (("line", ss.u, pred.baseline_u), ("y=0.0", ss.v[0], pred.baseline)):
        row = cfg.param_row()
        row.update(quantity="decay_rate", level="", probe=name, predicted=pred.a_star)
        try:
            rate, err = estimate_decay(x, values, window, base)
        except RoadfrontError as exc:
            row.update(measured="", stderr="", rel_error="", check="fail", note=str(exc))
        else:
            rel = (rate - pred.a_star) / pred.a_star
            row.update(measured=rate, stderr=err, rel_error=rel,
                       check="pass" if abs(rel) <= tol else "fail", note="")
        rows.append(row)
    i_half = int(np.argmin(np.abs(x - g.X / 2)))
    tail = float(max(ss.u[i_half], ss.u[int(np.argmin(np.abs(x + g.X / 2)))]))
    row = cfg.param_row()
    row.update(quantity="tail_at_half_X", level="", probe="line", predicted=0.0, measured=tail,
               stderr="", rel_error="", check="pass" if tail <= TAIL_TOL else "fail", note="")
    rows.append(row)
    return rows


# ---- sweeps ----------------------------------------------------------------------

SIMPLE = {"speed": cmd_speed, "dstar": cmd_dstar, "decay": cmd_decay,
          "transport": cmd_transport, "reduced": cmd_reduced}


def sweep_points(cfg: RunConfig) -> list[list[str]]:
    """Cartesian product of the sweep axes as lists of overrides."""
    if not cfg.sweep_axes:
        return [[]]
    names = [k for k, _ in cfg.sweep_axes]
    grids = [pts for _, pts in cfg.sweep_axes]
    return [[f"{n}={v!r}" if isinstance(v, float) else f"{n}={v}" for n, v in zip(names, combo)]
            for combo in itertools.product(*grids)]


def _run_point(args) -> list[dict]:
    text, source, overrides, command, index, out_root = args
    base = load_config(text=text, path=source, locate=False)
    tag = {"point": index}
    tag.update(dict(o.split("=", 1) for o in overrides))
    cfg = base
    try:
        cfg = with_overrides(base, overrides)
        cfg.sweep_axes = []
        if command == "simulate":
            rows = cmd_simulate(cfg, Path(out_root) / f"point_{index:04d}")
        else:
            rows = SIMPLE[command](cfg)
        status, message = "ok", ""
    except (RoadfrontError, ValueError, ArithmeticError, RuntimeError) as exc:
        rows, status, message = [cfg.param_row()], "error", f"{type(exc).__name__}: {exc}"
    out = []
    for row in rows:
        r = dict(tag)
        r.update(row)
        r.update(status=status, error=message)
        out.append(r)
    write_atomic(Path(out_root) / "points" / f"point_{index:04d}.csv", rows_to_csv(out))
    return out


def cmd_sweep(cfg: RunConfig, out_dir: Path, jobs: int = 1) -> list[dict]:
    """Run ``cfg.sweep_command`` at every sweep point; failures are recorded per point."""
    out_dir = Path(out_dir)
    text = dump_config(cfg)
    tasks = [(text, cfg.source, ov, cfg.sweep_command, i, str(out_dir))
             for i, ov in enumerate(sweep_points(cfg))]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_point, tasks))
    else:
        results = [_run_point(t) for t in tasks]
    rows = [r for point in results for r in point]
    write_atomic(out_dir / "sweep.csv", rows_to_csv(rows))
    manifest = {"version": _version(), "command": cfg.sweep_command,
                "axes": {k: list(v) for k, v in cfg.sweep_axes}, "points": len(tasks),
                "failed": sum(1 for point in results if point and point[0].get("status") == "error"),
                "files": ["sweep.csv", "points/", "config.ini"]}
    write_atomic(out_dir / "config.ini", text)
    write_atomic(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return rows


# ---- entry point -----------------------------------------------------------------

def _out_dir(args, cfg: RunConfig, command: str) -> Path | None:
    if args.out:
        return Path(args.out)
    if cfg.values["output"]["dir"]:
        return Path(cfg.values["output"]["dir"])
    if command in ("simulate", "sweep"):
        stem = Path(args.config).stem if args.config else "defaults"
        return Path(os.environ.get(OUT_ENV, DEFAULT_OUT_ROOT)) / f"{command}-{stem}"
    return None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="roadfront", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT_ROOT})")
    common.add_argument("--check", action="store_true",
                        help="exit 4 if any predicted-vs-measured comparison fails")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override a configuration key")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {"speed": "spreading speed c_* and regime", "dstar": "threshold D_* and benchmark speed",
             "decay": "steady tail decay rates", "transport": "speeds with transport on the line",
             "reduced": "reduced asymptotic factors", "simulate": "direct simulation with summary",
             "sweep": "cartesian sweep over up to two configuration keys"}
    for name in COMMANDS + ("sweep",):
        sub.add_parser(name, parents=[common], help=helps[name])
    sub.add_parser("show-config", parents=[common], help="print the normalized configuration")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if args.command == "show-config":
            sys.stdout.write(dump_config(cfg))
            return EXIT_OK
        out = _out_dir(args, cfg, args.command)
        if args.command == "simulate":
            rows = cmd_simulate(cfg, out)
        elif args.command == "sweep":
            rows = cmd_sweep(cfg, out, args.jobs)
        else:
            rows = SIMPLE[args.command](cfg)
            if out is not None:
                write_atomic(out / f"{args.command}.csv", rows_to_csv(rows))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RoadfrontError, ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    sys.stdout.write(rows_to_csv(rows))
    if args.command == "simulate" or args.command == "sweep":
        print(f"# outputs in {out}", file=sys.stderr)
    if args.check and any(r.get("check") == "fail" or r.get("status") == "error" for r in rows):
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
