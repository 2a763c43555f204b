"""Command-line front end: ``tmres <quasifreq|scatter|energy|converge>``.

Every run writes CSV data files, optional JSON results and one
``<command>_manifest.json`` into ``--out``. CSV floats use 17 significant
digits and rows are emitted in a fixed order, so identical inputs give
byte-identical CSV files.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 partial sweep (some points failed).
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .energy import _config_at, _threads, energy_sweep, mode_table
from .interior import EigensolverError
from .model import ConfigError, SimulationConfig, load_config, parse_complex
from .quasifreq import (
    FloquetError,
    closed_form_single,
    det_root_quasifrequencies,
    floquet_quasifrequencies,
    match_sets,
)
from .scattering import (
    SingularSystemError,
    evaluate_field,
    pole_pencil,
    scattered_field_approx,
    solve,
)

log = logging.getLogger("tmres")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 1, 2, 3

NUMERIC_ERRORS = (np.linalg.LinAlgError, FloquetError, EigensolverError, ArithmeticError,
                  FloatingPointError)


# --- formatting ----------------------------------------------------------------

def fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x) + 0.0  # folds -0.0 into 0.0
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def write_csv(path: Path, digest: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config sha256 {digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def cjson(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def carr(a) -> list[list[float]]:
    return [cjson(z) for z in np.ravel(a)]


def parse_grid(text: str) -> list[float]:
    """``a:b:n`` (inclusive linspace) or a comma-separated list."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            n = int(n)
            if n < 1:
                raise ValueError
            return [float(v) for v in np.linspace(float(a), float(b), n)]
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}; expected a:b:n or v1,v2,...") from exc
    if not vals:
        raise ConfigError("empty grid")
    return vals


def parse_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}") from exc


class Stages:
    def __init__(self) -> None:
        self.times: dict[str, float] = {}

    @contextlib.contextmanager
    def __call__(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.times[name] = self.times.get(name, 0.0) + time.perf_counter() - t0


def write_manifest(out: Path, command: str, argv: Sequence[str], cfg_path: str, digest: str,
                   grid: dict, outputs: list[str], stages: Stages, status: int) -> Path:
    path = out / f"{command}_manifest.json"
    doc = {
        "tool": "tmres",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "config": str(cfg_path),
        "config_sha256": digest,
        "grid": grid,
        "outputs": outputs,
        "wall_clock_s": stages.times,
        "exit_code": status,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _operating_omega(cfg: SimulationConfig, arg: str | None) -> complex:
    return parse_complex(arg, "--omega") if arg is not None else complex(cfg.incident.omega)


def _parallel(fn: Callable, items: Sequence) -> list:
    n = _threads()
    if n > 1 and len(items) > 1:
        with ThreadPoolExecutor(n) as pool:
            return list(pool.map(fn, items))
    return [fn(v) for v in items]


# --- quasifreq --------------------------------------------------------------------

METHODS = ("floquet", "closed", "detroot")


def _quasifreq_point(cfg: SimulationConfig, methods: Sequence[str]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    floq = None
    for m in methods:
        try:
            if m == "floquet" or (m == "detroot" and floq is None):
                floq = floquet_quasifrequencies(cfg)
            if m == "floquet":
                out[m] = floq
            elif m == "closed":
                out[m] = closed_form_single(cfg)
            else:
                out[m] = det_root_quasifrequencies(cfg, floq.values)
        except (ValueError, *NUMERIC_ERRORS) as exc:
            out[m] = f"{type(exc).__name__}: {exc}"
    return out


def _max_deviation(results: dict[str, Any]) -> float:
    sets = [r.values for r in results.values() if not isinstance(r, str) and len(r.values)]
    dev = 0.0
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            dev = max(dev, float(np.max(match_sets(sets[i], sets[j]))),
                      float(np.max(match_sets(sets[j], sets[i]))))
    return dev if len(sets) > 1 else float("nan")


def cmd_quasifreq(args, cfg: SimulationConfig, out: Path, st: Stages) -> tuple[int, list[str], dict]:
    if args.method == "all":
        # the closed form exists only for a single resonator
        methods = METHODS if cfg.array.n == 1 else ("floquet", "detroot")
    else:
        methods = (args.method,)
    if args.axis not in (None, "eps", "length"):
        raise ConfigError("quasifreq sweeps support --axis eps or length")
    if args.axis and not args.grid:
        raise ConfigError("--axis needs --grid")
    grid = parse_grid(args.grid) if args.axis else [None]

    def point(v):
        try:
            c = cfg if v is None else _config_at(cfg, args.axis, v)
        except ValueError as exc:
            return {m: f"{type(exc).__name__}: {exc}" for m in methods}
        return _quasifreq_point(c, methods)

    with st("solve"):
        results = _parallel(point, grid)

    rows = []
    failed = 0
    for v, res in zip(grid, results):
        dev = _max_deviation(res) if args.method == "all" else None
        for m in methods:
            r = res[m]
            if isinstance(r, str):
                failed += 1
                log.warning("quasifreq %s at %s=%s failed: %s", m, args.axis, v, r)
                rows.append([args.axis or "none", v, m, "", "", "", "", dev, r])
                continue
            for b, (z, resid) in enumerate(zip(r.values, r.residuals)):
                rows.append([args.axis or "none", v, m, b, z.real, z.imag, resid, dev, ""])
    with st("write"):
        name = "quasifreq.csv"
        write_csv(out / name, cfg.digest(), ["axis", "value", "method", "branch", "re_omega",
                                             "im_omega", "residual", "max_dev", "error"], rows)
    status = EXIT_PARTIAL if failed else EXIT_OK
    return status, [name], {"axis": args.axis, "values": grid if args.axis else [], "methods": list(methods)}


# --- scatter ----------------------------------------------------------------------

def _default_x(cfg: SimulationConfig, n: int = 401) -> list[float]:
    arr = cfg.array
    margin = float(np.max(arr.gaps)) if arr.n > 1 else 5.0 * float(arr.lengths[0])
    return [float(v) for v in np.linspace(arr.left[0] - margin, arr.right[-1] + margin, n)]


def cmd_scatter(args, cfg: SimulationConfig, out: Path, st: Stages) -> tuple[int, list[str], dict]:
    omega = _operating_omega(cfg, args.omega)
    xs = parse_grid(args.grid) if args.grid else _default_x(cfg)
    times = parse_grid(args.times)
    x = np.asarray(xs)

    sol = None
    with st("solve"):
        try:
            sol = solve(cfg, omega)
        except SingularSystemError:
            if not args.pole_pencil:
                raise
            log.warning("direct solve singular at omega=%s; emitting the pole approximation only", omega)

    poles = pencils = None
    if args.pole_pencil:
        with st("pole_pencil"):
            poles = det_root_quasifrequencies(cfg).values
            pencils = [pole_pencil(cfg, p) for p in poles]

    rows = []
    with st("field"):
        for t in times:
            ud = evaluate_field(sol, x, t, total=args.total) if sol is not None else np.full(x.size, np.nan + 0j)
            if pencils is not None:
                ua = scattered_field_approx(cfg, omega, poles, x, t, pencils=pencils,
                                            time_phase=args.time_phase)
                with np.errstate(divide="ignore", invalid="ignore"):
                    rel = np.abs(ua - ud) / np.abs(ud)
                for xi, a, b, r in zip(x, ud, ua, rel):
                    rows.append([t, xi, a.real, a.imag, b.real, b.imag, r])
            else:
                for xi, a in zip(x, ud):
                    rows.append([t, xi, a.real, a.imag])

    header = ["t", "x", "re_u", "im_u"]
    if pencils is not None:
        header += ["re_u_pole", "im_u_pole", "rel_diff"]
    doc: dict[str, Any] = {"omega": cjson(omega), "config_sha256": cfg.digest(),
                           "field": "total" if args.total else "scattered"}
    if sol is not None:
        tab = mode_table(sol, cfg.incident.theta1)
        ext = sol.exterior
        doc.update({
            "modes": [int(n) for n in tab.modes],
            "R": carr(tab.R),
            "T": carr(tab.T),
            "cross_section": [float(c) for c in tab.cross_section],
            "E": tab.E,
            "regime": tab.regime,
            "negative_frequency_modes": [int(n) for n, f in zip(tab.modes, tab.negative_frequency) if f],
            "interior": {
                "layout": "coefficients[j][i] = [a, b] for eigenmode j of resonator i",
                "coefficients": [[carr(sol.interior.coeffs[j, i]) for i in range(cfg.n)]
                                 for j in range(sol.interior.coeffs.shape[0])],
                "residual": sol.interior.residual,
                "rcond": sol.interior.rcond,
            },
            "exterior": {
                "layout": "alpha/beta[n][gap], gap 0 = left of the array",
                "alpha": [carr(row) for row in ext.alpha],
                "beta": [carr(row) for row in ext.beta],
            },
        })
    if pencils is not None:
        doc["poles"] = [{"omega": cjson(p.pole), "residual_right": p.residual_right,
                         "residual_left": p.residual_left} for p in pencils]
        doc["time_phase"] = args.time_phase
    with st("write"):
        write_csv(out / "scatter_field.csv", cfg.digest(), header, rows)
        (out / "scatter.json").write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")
    grid = {"x": [xs[0], xs[-1], len(xs)], "t": times, "omega": cjson(omega)}
    return EXIT_OK, ["scatter_field.csv", "scatter.json"], grid


# --- energy ------------------------------------------------------------------------

def cmd_energy(args, cfg: SimulationConfig, out: Path, st: Stages) -> tuple[int, list[str], dict]:
    if args.omega is not None:
        cfg = cfg.with_omega(_operating_omega(cfg, args.omega))
    modes = cfg.truncation.modes
    if args.axis is None:
        with st("solve"):
            tab = mode_table(solve(cfg), cfg.incident.theta1)
        rows = [[n, r.real, r.imag, t.real, t.imag, c, f]
                for n, r, t, c, f in zip(tab.modes, tab.R, tab.T, tab.cross_section, tab.negative_frequency)]
        with st("write"):
            write_csv(out / "energy_modes.csv", cfg.digest(),
                      ["n", "re_R", "im_R", "re_T", "im_T", "cross_section", "negative_frequency"], rows)
            doc = {"omega": cjson(cfg.incident.omega), "E": tab.E, "reference": tab.reference,
                   "regime": tab.regime, "config_sha256": cfg.digest()}
            (out / "energy.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return EXIT_OK, ["energy_modes.csv", "energy.json"], {"omega": cjson(cfg.incident.omega)}

    if not args.grid:
        raise ConfigError("--axis needs --grid")
    grid = parse_grid(args.grid)
    with st("sweep"):
        sweep = energy_sweep(cfg, args.axis, grid)
    rows = []
    for r in sweep:
        cs = list(r.cross_section) if r.cross_section is not None else [float("nan")] * len(modes)
        if r.error:
            log.warning("energy at %s=%s failed: %s", args.axis, r.value, r.error)
        rows.append([r.value, r.E, r.regime, r.nearest_marker, *cs, r.error])
    header = ["value", "E", "regime", "nearest_re_marker", *[f"cs_{n}" for n in modes], "error"]
    with st("write"):
        write_csv(out / "energy.csv", cfg.digest(), header, rows)
    status = EXIT_PARTIAL if any(r.error for r in sweep) else EXIT_OK
    return status, ["energy.csv"], {"axis": args.axis, "values": grid}


# --- converge ---------------------------------------------------------------------

def _pick_omega1(values: np.ndarray) -> complex:
    """Branch with the largest real part; ties go to the largest ``|Im|``."""
    v = np.asarray(values)
    key = np.lexsort((-np.abs(v.imag), -np.round(v.real, 12)))
    return complex(v[key[0]])


def cmd_converge(args, cfg: SimulationConfig, out: Path, st: Stages) -> tuple[int, list[str], dict]:
    klist = parse_ints(args.klist)
    if not klist or any(b <= a for a, b in zip(klist, klist[1:])):
        raise ConfigError("--klist must be strictly ascending")
    if args.omega is not None:
        cfg = cfg.with_omega(_operating_omega(cfg, args.omega))
    with st("floquet"):
        target = _pick_omega1(floquet_quasifrequencies(cfg).values)
    rows = []
    prev = None
    nshow = range(-2, 3)
    for K in klist:
        try:
            c = cfg.with_K(K)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        with st(f"K={K}"):
            roots = det_root_quasifrequencies(c, [target]).values
            w1 = complex(roots[0]) if len(roots) else complex(np.nan, np.nan)
            tab = mode_table(solve(c), c.incident.theta1)
        R = np.array([tab.R[n + K] if abs(n) <= K else np.nan for n in nshow], dtype=complex)
        if prev is None:
            diffs = [float("nan")] * 3
        else:
            with np.errstate(invalid="ignore"):
                dR = np.abs(R - prev[2])
            diffs = [abs(w1 - prev[0]), abs(tab.E - prev[1]),
                     float(np.nanmax(dR)) if np.any(np.isfinite(dR)) else float("nan")]
        rows.append([K, w1.real, w1.imag, tab.E, *np.abs(R), *diffs])
        prev = (w1, tab.E, R)
    header = ["K", "re_omega1", "im_omega1", "E", *[f"abs_R_{n}" for n in nshow],
              "d_omega1", "d_E", "d_R"]
    with st("write"):
        write_csv(out / "converge.csv", cfg.digest(), header, rows)
    return EXIT_OK, ["converge.csv"], {"K": klist, "omega": cjson(cfg.incident.omega)}


# --- entry point ------------------------------------------------------------------

COMMANDS = {"quasifreq": cmd_quasifreq, "scatter": cmd_scatter, "energy": cmd_energy,
            "converge": cmd_converge}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tmres", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"tmres {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON configuration file")
        sp.add_argument("--out", default=".", help="output directory (created if missing)")
        sp.add_argument("-v", "--verbose", action="store_true")

    q = sub.add_parser("quasifreq", help="subwavelength quasifrequencies")
    common(q)
    q.add_argument("--method", choices=[*METHODS, "all"], default="floquet")
    q.add_argument("--axis", choices=["eps", "length"])
    q.add_argument("--grid", help="a:b:n or comma list of axis values")

    s = sub.add_parser("scatter", help="scattered field at one operating frequency")
    common(s)
    s.add_argument("--omega", help="operating frequency, e.g. 0.0048 or 0.0048-1e-6i")
    s.add_argument("--grid", help="x sample points, a:b:n or comma list")
    s.add_argument("--times", default="0", help="time samples, a:b:n or comma list")
    s.add_argument("--total", action="store_true", help="add the incident field")
    s.add_argument("--pole-pencil", action="store_true",
                   help="also emit the pole approximation and its relative difference")
    s.add_argument("--time-phase", choices=["pole", "operating"], default="pole")

    e = sub.add_parser("energy", help="mode spectrum or energy sweep")
    common(e)
    e.add_argument("--axis", choices=["eps", "omega", "length"])
    e.add_argument("--grid")
    e.add_argument("--omega")

    c = sub.add_parser("converge", help="truncation convergence in K")
    common(c)
    c.add_argument("--klist", default="2,4,6,8")
    c.add_argument("--omega")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    st = Stages()
    out = Path(args.out)
    try:
        with st("load"):
            cfg = load_config(args.config)
        out.mkdir(parents=True, exist_ok=True)
        status, outputs, grid = COMMANDS[args.command](args, cfg, out, st)
    except (ConfigError, FileNotFoundError, IsADirectoryError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (*NUMERIC_ERRORS, RuntimeError) as exc:
        log.error("numerical failure: %s: %s", type(exc).__name__, exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    write_manifest(out, args.command, argv, args.config, cfg.digest(), grid, outputs, st, status)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
