"""Per-mode reflection/transmission and the scattered energy flux."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import SimulationConfig
from .scattering import ExteriorCoefficients, ScatteringSolution, solve

REGIME_TOL = 1e-6


@dataclass(frozen=True)
class ModeScatteringTable:
    modes: np.ndarray
    R: np.ndarray
    T: np.ndarray
    cross_section: np.ndarray
    E: float
    reference: float
    regime: str
    negative_frequency: np.ndarray = field(repr=False)

    def cross_section_of(self, n: int) -> float:
        return float(self.cross_section[n - self.modes[0]])


def classify(E: float, reference: float = 1.0, tol: float = REGIME_TOL) -> str:
    if E > reference * (1 + tol):
        return "gain"
    if E < reference * (1 - tol):
        return "loss"
    return "conserve"


def mode_table(ext: ExteriorCoefficients | ScatteringSolution, theta: complex = 1.0, *,
               omega: complex | None = None, omega_mod: float | None = None,
               tol: float = REGIME_TOL) -> ModeScatteringTable:
    """``R_n = beta_n^0``, ``T_n = alpha_n^N`` and ``E = sum |R_n|^2 + |T_n|^2``.

    The regime is judged against the incident flux ``|theta|^2``. Modes with
    ``Re(omega + n Omega) < 0`` are flagged in ``negative_frequency``; they
    enter ``E`` like every other mode.
    """
    if isinstance(ext, ScatteringSolution):
        omega = ext.omega if omega is None else omega
        omega_mod = ext.cfg.omega_mod if omega_mod is None else omega_mod
        ext = ext.exterior
    R = ext.beta0.copy()
    T = ext.alphaN.copy()
    cs = np.abs(R) ** 2 + np.abs(T) ** 2
    E = float(np.sum(cs))
    ref = abs(theta) ** 2
    if omega is not None and omega_mod is not None:
        neg = (np.real(omega) + ext.modes * omega_mod) < 0
    else:
        neg = np.real(ext.k) < 0
    return ModeScatteringTable(ext.modes.copy(), R, T, cs, E, ref, classify(E, ref, tol), neg)


@dataclass
class SweepRow:
    value: float
    E: float
    cross_section: np.ndarray | None
    regime: str
    error: str = ""
    nearest_marker: float | None = None


def _config_at(cfg: SimulationConfig, axis: str, value: float) -> SimulationConfig:
    if axis == "eps":
        if not (0.0 <= value < 1.0):
            raise ValueError(f"eps={value} outside [0, 1)")
        return cfg.with_eps(value)
    if axis == "omega":
        return cfg.with_omega(value)
    if axis == "length":
        from .model import ResonatorArray
        # every resonator gets the new length; gaps are kept
        gaps = cfg.array.gaps
        x = cfg.array.boundaries[0]
        pts = []
        for i in range(cfg.n):
            pts.extend((x, x + value))
            if i < cfg.n - 1:
                x += value + gaps[i]
        return cfg.with_array(ResonatorArray(tuple(pts)))
    raise ValueError(f"unknown sweep axis {axis!r}")


def _threads() -> int:
    import os

    raw = os.environ.get("TMRES_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def _one(cfg: SimulationConfig, axis: str, value: float) -> SweepRow:
    try:
        c = _config_at(cfg, axis, value)
        sol = solve(c)
        tab = mode_table(sol, cfg.incident.theta1 if cfg.incident.direction != "right" else cfg.incident.theta2)
        return SweepRow(value, tab.E, tab.cross_section, tab.regime)
    except Exception as exc:  # noqa: BLE001 - recorded per row, sweep continues
        return SweepRow(value, float("nan"), None, "error", f"{type(exc).__name__}: {exc}")


def energy_sweep(cfg: SimulationConfig, axis: str, grid: Sequence[float], *,
                 markers: Sequence[complex] | None = None, threads: int | None = None) -> list[SweepRow]:
    """One scattering solve per grid point, rows in grid order.

    For ``axis="omega"`` each row is annotated with the nearest real part of
    ``markers`` (default: Floquet quasifrequencies of ``cfg``).
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty sweep grid")
    if axis not in ("eps", "omega", "length"):
        raise ValueError(f"unknown sweep axis {axis!r}")
    threads = threads or _threads()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(lambda v: _one(cfg, axis, v), grid))
    else:
        rows = [_one(cfg, axis, v) for v in grid]
    if axis == "omega":
        if markers is None:
            from .quasifreq import floquet_quasifrequencies
            markers = floquet_quasifrequencies(cfg).values
        re = np.real(np.asarray(markers))
        for r in rows:
            r.nearest_marker = float(re[np.argmin(np.abs(re - r.value))])
    return rows
