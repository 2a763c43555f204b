"""Subwavelength quasifrequencies.

Three routes: Floquet exponents of the capacitance ODE, the single-resonator
closed form, and Muller iteration on the scaled determinant of the
truncated scattering matrix.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import kernels
from .model import ResonatorArray, SimulationConfig
from .scattering import GapSingularityError, assemble_system


class FloquetError(RuntimeError):
    pass


def fold(omega, omega_mod: float):
    """Fold real parts into ``[-Omega/2, Omega/2)``."""
    omega = np.asarray(omega, dtype=complex)
    re = omega.real - omega_mod * np.floor((omega.real + 0.5 * omega_mod) / omega_mod)
    out = re + 1j * omega.imag
    return out if out.ndim else complex(out)


@dataclass(frozen=True)
class QuasifrequencySet:
    values: np.ndarray
    method: str
    residuals: np.ndarray
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.values)

    def nonzero(self, tol: float = 1e-12) -> np.ndarray:
        return self.values[np.abs(self.values) > tol]


# --- capacitance ------------------------------------------------------------------

def capacitance_matrix(array: ResonatorArray) -> np.ndarray:
    """Closed-form 1D capacitance matrix (tridiagonal, ``1/gap`` couplings)."""
    N = array.n
    C = np.zeros((N, N))
    for g, length in enumerate(array.gaps):
        c = 1.0 / length
        C[g, g] += c
        C[g + 1, g + 1] += c
        C[g, g + 1] -= c
        C[g + 1, g] -= c
    return C


def capacitance_oracle(array: ResonatorArray, h: float = 0.01) -> np.ndarray:
    """Capacitance matrix from a finite-difference solve of the harmonic profiles.

    Each gap is discretised with the second-order Laplacian, Dirichlet data 1
    on resonator ``j`` and 0 elsewhere; the outer half-lines carry the bounded
    (constant) extension. Boundary fluxes use one-sided second-order stencils.
    """
    N = array.n
    C = np.zeros((N, N))
    gaps = array.gaps
    for length in gaps:
        if length / h < 10:
            raise ValueError(f"grid step {h} leaves fewer than 10 cells in a gap of length {length}")
    for j in range(N):
        # dV/dx at both ends of every gap
        d_left = np.zeros(max(N - 1, 0))   # at x_g^+
        d_right = np.zeros(max(N - 1, 0))  # at x_{g+1}^-
        for g, length in enumerate(gaps):
            m = int(round(length / h))
            hh = length / m
            ua = 1.0 if j == g else 0.0
            ub = 1.0 if j == g + 1 else 0.0
            # tridiagonal solve of -V'' = 0 on interior nodes
            n_int = m - 1
            main = np.full(n_int, 2.0)
            off = np.full(n_int - 1, -1.0)
            rhs = np.zeros(n_int)
            rhs[0] += ua
            rhs[-1] += ub
            A = np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
            inner = np.linalg.solve(A, rhs)
            V = np.concatenate([[ua], inner, [ub]])
            d_left[g] = (-3 * V[0] + 4 * V[1] - V[2]) / (2 * hh)
            d_right[g] = (3 * V[-1] - 4 * V[-2] + V[-3]) / (2 * hh)
        for i in range(N):
            # derivative from the left at x_i^- minus from the right at x_i^+
            dm = d_right[i - 1] if i > 0 else 0.0
            dp = d_left[i] if i < N - 1 else 0.0
            C[i, j] = dm - dp
    return C


def d_matrix(n: int) -> np.ndarray:
    D = np.zeros((n, n))
    if n == 1:
        D[0, 0] = 2.0
    else:
        D[0, 0] = D[-1, -1] = 1.0
    return D


# --- Floquet ------------------------------------------------------------------------

def monodromy(cfg: SimulationConfig, *, rtol: float = 1e-12, atol: float = 1e-14) -> np.ndarray:
    """Period map of ``y' = M(t) y`` with ``y = (c, dc/dt)``."""
    N = cfg.n
    p = cfg.params
    C = capacitance_matrix(cfg.array)
    Linv = 1.0 / cfg.array.lengths
    scale = p.delta * p.v_in**2
    stiff = scale * Linv[:, None] * C
    damp = scale * Linv * np.diag(d_matrix(N)) / p.v_out
    M = cfg.modulation.order
    coeffs = cfg.modulation.fourier_table(M)
    orders = np.arange(-M, M + 1).astype(np.float64)
    T = cfg.modulation.period
    y0 = np.eye(2 * N).reshape(-1)
    sol = solve_ivp(kernels.floquet_rhs, (0.0, T), y0, method="DOP853", rtol=rtol, atol=atol,
                    args=(coeffs, orders, cfg.omega_mod, stiff, damp))
    if not sol.success:
        raise FloquetError(f"monodromy integration failed: {sol.message}")
    return sol.y[:, -1].reshape(2 * N, 2 * N)


def floquet_quasifrequencies(cfg: SimulationConfig, **kw) -> QuasifrequencySet:
    """Floquet exponents ``omega = i log(mu) / T`` of the capacitance ODE."""
    Phi = monodromy(cfg, **kw)
    try:
        mu, vecs = np.linalg.eig(Phi)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise FloquetError("monodromy eigen-solve failed") from exc
    T = cfg.modulation.period
    omega = fold(1j * np.log(mu.astype(complex)) / T, cfg.omega_mod)
    res = np.linalg.norm(Phi @ vecs - vecs * mu[None, :], axis=0) / np.linalg.norm(Phi, 2)
    order = np.lexsort((omega.real, omega.imag))
    # Liouville: det Phi = exp(int_0^T tr M) = exp(-sum_i damp_i * T * mean(kappa_i))
    p = cfg.params
    damp = p.delta * p.v_in**2 * np.diag(d_matrix(cfg.n)) / (cfg.array.lengths * p.v_out)
    mean_k = np.array([cfg.modulation.mean_kappa(i) for i in range(cfg.n)])
    liouville = float(np.linalg.det(Phi) / math.exp(-T * np.sum(damp * mean_k)) - 1.0)
    return QuasifrequencySet(omega[order], "floquet", res[order],
                             {"multipliers": mu[order], "liouville_defect": liouville})


# --- closed form ------------------------------------------------------------------

def leading_constant(cfg: SimulationConfig, i: int = 0) -> complex:
    """``-2 i v_r^2 delta / (l v_0)`` for resonator ``i``."""
    p = cfg.params
    return -2j * p.v_in**2 * p.delta / (cfg.array.lengths[i] * p.v_out)


def static_single_exact(cfg: SimulationConfig) -> complex:
    """Exact static single-resonator frequency (log form)."""
    p = cfg.params
    ell = cfg.array.lengths[0]
    return -1j * p.v_in / ell * cmath.log(1 + 2 * p.v_in * p.delta / (p.v_out - p.v_in * p.delta))


def closed_form_single(cfg: SimulationConfig) -> QuasifrequencySet:
    """``{0, K * mean(kappa)}`` for one resonator."""
    if cfg.n != 1:
        raise ValueError(f"closed form needs exactly one resonator, got N={cfg.n}")
    w1 = leading_constant(cfg) * cfg.modulation.mean_kappa(0)
    extra = {}
    entry = cfg.modulation.entries[0]
    if entry.is_cosine and entry.eps == 0.0 or (not entry.is_cosine and entry.order == 0
                                                and entry.coefficients.get(0) == 1):
        extra["exact_static"] = static_single_exact(cfg)
    values = fold(np.array([0.0, w1], dtype=complex), cfg.omega_mod)
    return QuasifrequencySet(values, "closed_form", np.zeros(2), extra)


# --- determinant root finding --------------------------------------------------------

def scaled_determinant(cfg: SimulationConfig, omega: complex) -> tuple[complex, int]:
    """``det A(omega)`` of the smooth-basis system as ``(mantissa, exponent)``."""
    A = assemble_system(cfg, omega, basis="smooth").matrix
    return kernels.lu_logdet(A)


@dataclass
class MullerResult:
    seed: complex
    root: complex | None
    converged: bool
    iterations: int
    message: str = ""


def _combine(vals):
    emax = max(e for m, e in vals if m != 0) if any(m != 0 for m, _ in vals) else 0
    return [complex(math.ldexp(m.real, e - emax), math.ldexp(m.imag, e - emax)) for m, e in vals]


def muller(f, x0: complex, x1: complex, x2: complex, *, tol: float, scale: float,
           max_iter: int = 50, max_drift: float | None = None) -> MullerResult:
    """Muller's method on ``f`` returning ``(mantissa, exponent)`` pairs.

    The three current values are rescaled by a common power of two before
    every step, so the iteration never touches raw determinant magnitudes.
    """
    seed = x2
    pts = [complex(x0), complex(x1), complex(x2)]
    vals = [f(p) for p in pts]
    for it in range(1, max_iter + 1):
        if vals[2][0] == 0:
            return MullerResult(seed, pts[2], True, it - 1, "exact zero")
        f0, f1, f2 = _combine(vals)
        h1 = pts[1] - pts[0]
        h2 = pts[2] - pts[1]
        if h1 == 0 or h2 == 0 or h1 + h2 == 0:
            return MullerResult(seed, None, False, it, "collapsed interpolation points")
        d1 = (f1 - f0) / h1
        d2 = (f2 - f1) / h2
        a = (d2 - d1) / (h2 + h1)
        b = a * h2 + d2
        disc = cmath.sqrt(b * b - 4 * f2 * a)
        den = b + disc if abs(b + disc) >= abs(b - disc) else b - disc
        if den == 0:
            step = (abs(h2) or tol) * (1 + 1j)
        else:
            step = -2 * f2 / den
        x3 = pts[2] + step
        if not (math.isfinite(x3.real) and math.isfinite(x3.imag)):
            return MullerResult(seed, None, False, it, "non-finite iterate")
        if max_drift is not None and abs(x3 - seed) > max_drift:
            return MullerResult(seed, None, False, it, f"left the seed neighbourhood (|dx|>{max_drift:.3g})")
        if abs(step) < tol * max(abs(x3), scale):
            return MullerResult(seed, x3, True, it)
        try:
            f3 = f(x3)
        except (GapSingularityError, np.linalg.LinAlgError, FloatingPointError):
            x3 = x3 + tol * scale * (1 + 1j) * 7.3
            f3 = f(x3)
        pts = [pts[1], pts[2], x3]
        vals = [vals[1], vals[2], f3]
    return MullerResult(seed, None, False, max_iter, f"no convergence in {max_iter} iterations")


def det_root_quasifrequencies(cfg: SimulationConfig, seeds=None, *, tol: float = 1e-12,
                              max_iter: int = 50, max_drift: float | None = None,
                              dedup: float = 1e-10) -> QuasifrequencySet:
    """Roots of the truncated scattering determinant by Muller iteration.

    ``seeds`` defaults to the Floquet exponents; each seed ``s`` starts the
    iteration from ``(s - d, s + d, s)`` with ``d = (1 + i) delta``. A seed whose
    iterate wanders further than ``max_drift`` (default ``Omega/4``) is reported
    as not converged.
    """
    delta = cfg.params.delta
    Om = cfg.omega_mod
    if seeds is None:
        seeds = floquet_quasifrequencies(cfg).values
    seeds = [complex(s) for s in np.atleast_1d(seeds)]
    if not seeds:
        raise ValueError("need at least one seed")
    if max_drift is None:
        max_drift = 0.25 * Om
    d = (1 + 1j) * delta

    def f(w):
        return scaled_determinant(cfg, w)

    runs = []
    for s in seeds:
        try:
            r = muller(f, s - d, s + d, s, tol=tol, scale=Om, max_iter=max_iter, max_drift=max_drift)
        except (GapSingularityError, np.linalg.LinAlgError) as exc:
            r = MullerResult(s, None, False, 0, f"evaluation failed: {exc}")
        runs.append(r)

    roots: list[complex] = []
    for r in runs:
        if r.converged:
            z = fold(r.root, Om)
            if all(abs(z - q) >= dedup for q in roots):
                roots.append(z)
    values = np.array(roots, dtype=complex)
    residuals = np.array([_null_ratio(cfg, z) for z in values])
    return QuasifrequencySet(values, "det_root", residuals, {"runs": runs})


def _null_ratio(cfg: SimulationConfig, omega: complex) -> float:
    s = np.linalg.svd(assemble_system(cfg, omega, basis="smooth").matrix, compute_uv=False)
    return float(s[-1] / s[0])


def match_sets(a, b) -> np.ndarray:
    """Distance from each value of ``a`` to its nearest neighbour in ``b``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if not b.size:
        return np.full(a.shape, np.inf)
    return np.min(np.abs(a[:, None] - b[None, :]), axis=1)
