"""Command-line interface: critical-value solves, sweeps, and CSV output.

Commands: critical, lplot, contour, window, simulate, poles.  All real
numbers are emitted with 17 significant digits so CSV round-trips the
underlying 64-bit floats; files are written atomically (temp + rename)
and identical configs produce byte-identical output.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .config import RunConfig, SweepSpec, load_config, parse_sweep
from .errors import (
    ConfigError,
    DegenerateOrbit,
    Divergence,
    DomainError,
    MissingParameter,
    NoConvergence,
    NoRoot,
    NumericalFailure,
    SubharmonicError,
    UnsupportedStructure,
)
from .sampled import pole_trajectory
from .schemes import (
    ACMC,
    VMC3,
    acmc_gain,
    acmc_window_estimate,
    closed_form_lvalue,
    contour_data,
    duty_ratio,
    loop_gain_hf,
    lplot,
    solve_critical,
    vmc3_gain,
)
from .simulation import build_closed_loop, simulate
from .transform import f_transform_series

__all__ = ["main"]

_DOMAIN_ERRORS = (
    DomainError,
    NoRoot,
    NoConvergence,
    DegenerateOrbit,
    UnsupportedStructure,
    NumericalFailure,
    MissingParameter,
)


def _fmt(x) -> str:
    """17-significant-digit decimal, the round-trip form for doubles."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return f"{x:.17g}"


def _workers() -> int:
    env = os.environ.get("SUBHARMONIC_THREADS", "")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(
                f"SUBHARMONIC_THREADS must be an integer, got {env!r}"
            ) from None
        return max(1, n)
    return 1


def _thread_map(fn, items: Sequence):
    """Map preserving order; parallel only when SUBHARMONIC_THREADS > 1."""
    n = _workers()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[str]]):
    """Atomic CSV write: header + rows, comma separated, LF endings."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(prefix=".subharmonic_", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_str(text: str) -> str:
    """Sanitize a free-text CSV cell: no separators or line breaks."""
    return text.replace(",", ";").replace("\n", " ").replace("\r", " ")


def _resolve_duty(cfg: RunConfig) -> float:
    return cfg.duty if cfg.duty is not None else duty_ratio(cfg.params, cfg.scheme)


def _series_lvalue(params, scheme, D: float, terms: int) -> float:
    tf = loop_gain_hf(params, scheme)
    return f_transform_series(tf, D, params.omega_s, K=terms)


def _sweep_or_fail(cfg: RunConfig, allowed: Sequence[str]) -> SweepSpec:
    if cfg.sweep is None:
        raise ConfigError("this command needs a sweep "
                          "(config key 'sweep' or flag --sweep)")
    if cfg.sweep.variable not in allowed:
        raise ConfigError(
            f"sweep variable {cfg.sweep.variable!r} not supported here; "
            f"one of {', '.join(allowed)}"
        )
    return cfg.sweep


def _default_out(cfg: RunConfig, command: str) -> str:
    return cfg.out if cfg.out else f"{command}.csv"


# ---------------------------------------------------------------------------
# Commands.


def cmd_critical(cfg: RunConfig) -> int:
    D = _resolve_duty(cfg)
    if cfg.terms > 0:
        lvalue = _series_lvalue(cfg.params, cfg.scheme, D, cfg.terms)
    else:
        lvalue = closed_form_lvalue(cfg.params, cfg.scheme, D)
    print(f"L = {_fmt(lvalue)}")
    print(f"duty = {_fmt(D)}")
    print(f"verdict = {'stable' if lvalue < 1.0 else 'unstable'}")
    value = float("nan")
    if cfg.solve_for:
        res = solve_critical(cfg.params, cfg.scheme, cfg.solve_for,
                             duty=cfg.duty)
        value = res.critical_value
        if value is None:
            raise NoRoot(f"no finite critical {cfg.solve_for}")
        print(f"critical {cfg.solve_for} = {_fmt(value)}")
    out = _default_out(cfg, "critical")
    _write_csv(
        out,
        ("lvalue", "duty", "stable", "solve_for", "critical_value"),
        [(_fmt(lvalue), _fmt(D), "1" if lvalue < 1.0 else "0",
          _csv_str(cfg.solve_for or ""), _fmt(value))],
    )
    return 0


def cmd_lplot(cfg: RunConfig) -> int:
    sweep = _sweep_or_fail(cfg, ("D", "p", "v_s", "k_p"))
    grid = sweep.grid()
    if cfg.terms > 0:
        lvalues = np.array(_thread_map(
            lambda v: _lvalue_series_at(cfg, sweep.variable, v), grid
        ))
        crossings = _grid_crossings(grid, lvalues)
    else:
        curve = lplot(cfg.params, cfg.scheme, sweep.variable, grid,
                      duty=cfg.duty)
        lvalues = curve.lvalues
        crossings = curve.crossings
    out = _default_out(cfg, "lplot")
    _write_csv(
        out,
        (sweep.variable, "lvalue"),
        ((_fmt(v), _fmt(l)) for v, l in zip(grid, lvalues)),
    )
    finite = np.isfinite(lvalues)
    print(f"lplot: {len(grid)} points over {sweep.variable}, wrote {out}")
    if np.any(finite):
        imax = int(np.nanargmax(np.where(finite, lvalues, -np.inf)))
        print(f"max L = {_fmt(lvalues[imax])} "
              f"at {sweep.variable} = {_fmt(grid[imax])}")
    for c in crossings:
        print(f"crossing at {sweep.variable} = {_fmt(c)}")
    if not crossings:
        print("no L = 1 crossings")
    return 0


def _lvalue_series_at(cfg: RunConfig, variable: str, value: float) -> float:
    params, scheme = cfg.params, cfg.scheme
    D = cfg.duty
    if variable == "D":
        D = float(value)
    elif variable == "v_s":
        params = dataclasses.replace(params, v_s=float(value))
    elif variable == "k_p":
        scheme = dataclasses.replace(scheme, k_p=float(value))
    elif variable == "p":
        if not isinstance(scheme, (ACMC, VMC3)):
            raise DomainError(
                "series evaluation over p needs a pole-bearing compensator"
            )
        scheme = dataclasses.replace(scheme, omega_p=float(value) * params.omega_s)
    if D is None:
        D = duty_ratio(params, scheme)
    try:
        return _series_lvalue(params, scheme, D, cfg.terms)
    except _DOMAIN_ERRORS:
        return float("nan")


def _grid_crossings(grid: np.ndarray, lvalues: np.ndarray) -> List[float]:
    g = lvalues - 1.0
    out = []
    for i in range(len(grid) - 1):
        a, b = g[i], g[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if a == 0.0:
            out.append(float(grid[i]))
        elif a * b < 0.0:
            # linear interpolation is enough for a summary on a dense grid
            t = a / (a - b)
            out.append(float(grid[i] + t * (grid[i + 1] - grid[i])))
    if np.isfinite(g[-1]) and g[-1] == 0.0:
        out.append(float(grid[-1]))
    return out


def cmd_contour(cfg: RunConfig) -> int:
    sweep_d = cfg.sweep_d or SweepSpec("D", 0.05, 0.95, 46)
    sweep_p = cfg.sweep_p or SweepSpec("p", 0.05, 2.0, 40)
    D_grid = sweep_d.grid()
    p_grid = sweep_p.grid()
    surface = contour_data(D_grid, p_grid)
    out = _default_out(cfg, "contour")

    def rows():
        for i, d in enumerate(D_grid):
            for j, p in enumerate(p_grid):
                yield (_fmt(d), _fmt(p), _fmt(surface[i, j]))

    _write_csv(out, ("D", "p", "gap"), rows())
    imax = np.unravel_index(int(np.argmax(surface)), surface.shape)
    print(f"contour: {surface.size} points, wrote {out}")
    print(f"max gap = {_fmt(surface[imax])} at D = {_fmt(D_grid[imax[0]])}, "
          f"p = {_fmt(p_grid[imax[1]])}")
    return 0


def cmd_window(cfg: RunConfig) -> int:
    if isinstance(cfg.scheme, ACMC):
        K = acmc_gain(cfg.params, cfg.scheme)
    elif isinstance(cfg.scheme, VMC3):
        K = vmc3_gain(cfg.params, cfg.scheme)
    else:
        raise ConfigError("window needs an acmc or vmc3 scheme")
    D = _resolve_duty(cfg)
    est_lo, est_hi = acmc_window_estimate(K, D)
    sweep_p = cfg.sweep_p or SweepSpec("p", 0.02, 0.98, 481)
    curve = lplot(cfg.params, cfg.scheme, "p", sweep_p.grid(), duty=D)
    closed = list(curve.crossings)
    closed_lo = closed[0] if len(closed) >= 1 else float("nan")
    closed_hi = closed[1] if len(closed) >= 2 else float("nan")
    out = _default_out(cfg, "window")
    _write_csv(
        out,
        ("K", "D", "est_lo", "est_hi", "closed_lo", "closed_hi"),
        [tuple(_fmt(x) for x in (K, D, est_lo, est_hi, closed_lo, closed_hi))],
    )
    print(f"window: wrote {out}")
    print(f"K = {_fmt(K)}, duty = {_fmt(D)}")
    print(f"estimated window: [{_fmt(est_lo)}, {_fmt(est_hi)}]")
    print(f"closed-form window: [{_fmt(closed_lo)}, {_fmt(closed_hi)}]")
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    cycles = cfg.cycles if cfg.cycles is not None else 576
    out = _default_out(cfg, "simulate")
    root, ext = os.path.splitext(out)
    dense_out = f"{root}_dense{ext or '.csv'}"
    loop = build_closed_loop(cfg.params, cfg.scheme)

    def write_strobe(trace):
        labels = trace.labels
        header = ("cycle", "duty") + labels

        def rows():
            for n in range(trace.strobe.shape[0]):
                duty = trace.duties[n - 1] if n >= 1 else float("nan")
                yield (str(n), _fmt(duty)) + tuple(
                    _fmt(x) for x in trace.strobe[n]
                )

        _write_csv(out, header, rows())

    try:
        trace = simulate(
            cfg.params,
            cfg.scheme,
            cycles=cycles,
            dense=True,
            divergence_bound=cfg.divergence_bound,
        )
    except Divergence as exc:
        if exc.trace is not None:
            write_strobe(exc.trace)
            print(f"simulate: wrote partial strobe trace {out}")
        print("diverged")
        raise
    write_strobe(trace)
    d = trace.dense
    header = ("t",) + trace.labels + ("y", "h", "v_d")
    vo = None
    if d is not None:
        _write_csv(
            dense_out,
            header,
            (
                (_fmt(d.t[i]),)
                + tuple(_fmt(x) for x in d.x[i])
                + (_fmt(d.y[i]), _fmt(d.h[i]), _fmt(d.v_d[i]))
                for i in range(d.t.shape[0])
            ),
        )
        vo = d.x @ loop.vo_row
    print(f"simulate: {cycles} cycles, wrote {out} and {dense_out}")
    if vo is not None and vo.size:
        print(f"output ripple (last {min(trace.window, cycles)} cycles): "
              f"{_fmt(vo.max() - vo.min())}")
    print(trace.classification)
    return 0


def cmd_poles(cfg: RunConfig) -> int:
    sweep = _sweep_or_fail(cfg, ("k_p", "v_s", "omega_p", "p", "K_c", "v_r"))
    grid = sweep.grid()
    traj = pole_trajectory(cfg.params, cfg.scheme, sweep.variable, grid)
    dim = build_closed_loop(cfg.params, cfg.scheme).dim
    err_by_value = {}
    for v, msg in traj.errors:
        err_by_value.setdefault(v, msg)
    out = _default_out(cfg, "poles")
    header = [sweep.variable]
    for i in range(1, dim + 1):
        header += [f"re_{i}", f"im_{i}"]
    header.append("error")

    def rows():
        for k, v in enumerate(grid):
            ps = traj.pole_sets[k]
            row = [_fmt(v)]
            if ps is None:
                row += ["nan", "nan"] * dim
                row.append(_csv_str(err_by_value.get(float(v), "failed")))
            else:
                for z in ps.eigenvalues:
                    row += [_fmt(z.real), _fmt(z.imag)]
                row.append("")
            yield row

    _write_csv(out, header, rows())
    print(f"poles: {len(grid)} points over {sweep.variable}, wrote {out}")
    for c in traj.crossings:
        print(f"crossing: {c.direction} at {sweep.variable} = {_fmt(c.value)} "
              f"(eigenvalue {_fmt(c.eigenvalue.real)})")
    if not traj.crossings:
        print("no -1 crossings")
    n_fail = sum(1 for ps in traj.pole_sets if ps is None)
    if n_fail:
        print(f"{n_fail} point(s) failed; see the error column")
    return 0


# ---------------------------------------------------------------------------
# Entry point.


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subharmonic",
        description="Subharmonic-oscillation analysis for PWM DC-DC converters",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("critical", "closed-form L value and critical-parameter solve"),
        ("lplot", "L versus a swept parameter, CSV + crossing summary"),
        ("contour", "alpha0 - alpha surface over (D, p)"),
        ("window", "instability-window estimate for pole-bearing schemes"),
        ("simulate", "exact switched simulation, CSV traces + classification"),
        ("poles", "sampled-data pole trajectory along a sweep"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="path to key=value config")
        p.add_argument("--out", help="output CSV path")
        p.add_argument("--sweep", help="var:start:stop:n[:log]")
        p.add_argument("--solve-for", dest="solve_for",
                       help="parameter to solve critically (critical command)")
        p.add_argument("--cycles", type=int, help="simulation cycle count")
        p.add_argument("--terms", type=int,
                       help="series term count (0 = closed forms)")
    return parser


_COMMANDS = {
    "critical": cmd_critical,
    "lplot": cmd_lplot,
    "contour": cmd_contour,
    "window": cmd_window,
    "simulate": cmd_simulate,
    "poles": cmd_poles,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        _workers()
        cfg = load_config(args.config)
        if args.sweep:
            cfg = dataclasses.replace(cfg, sweep=parse_sweep(args.sweep))
        if args.out:
            cfg = dataclasses.replace(cfg, out=args.out)
        if args.solve_for:
            cfg = dataclasses.replace(cfg, solve_for=args.solve_for)
        if args.cycles is not None:
            if args.cycles < 2:
                raise ConfigError("cycles must be at least 2")
            cfg = dataclasses.replace(cfg, cycles=args.cycles)
        if args.terms is not None:
            if args.terms < 0:
                raise ConfigError("terms must be non-negative")
            cfg = dataclasses.replace(cfg, terms=args.terms)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _DOMAIN_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except Divergence as exc:
        print(f"error: divergence: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
