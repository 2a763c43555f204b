"""Truncated scattering problem for the time-modulated resonator array.

For every mode ``n`` and boundary point ``p`` the system carries one row::

    s_p v_n'(p)|int - delta * sum_q G^(n)_{pq} v_n(q)|int
        = delta * (s_p d/dx v_n^in(p) - sum_q G^(n)_{pq} v_n^in(q))

with ``s_p = -1`` on left endpoints ``x_i^-`` and ``+1`` on right endpoints
``x_i^+``, and ``G^(n)`` the outward Dirichlet-to-Neumann map of the exterior
(``i k`` at the two outer points, the gap propagator in between). The value
jumps have been used to eliminate the exterior: the exterior scattered trace
equals the interior trace minus the incident trace.

Two column bases are available. ``"exp"`` uses the coefficients
``(a_j^i, b_j^i)`` of ``e^{+-i lam_j x} f^j``. ``"smooth"`` uses Fourier-mode
coordinates ``(alpha_i, beta_i)`` with interior solution
``cos(sqrt(C_i) s) alpha_i + sin(sqrt(C_i) s)/sqrt(C_i) beta_i`` about the
resonator centre; it does not depend on eigenvector phases, ordering or the
square-root branch, so it is analytic in ``omega`` and is what the
determinant and the pole pencil are built on.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import kernels
from .interior import InteriorBasis, interior_bases, wavenumbers
from .model import IncidentSpec, SimulationConfig

__all__ = [
    "GapSingularityError",
    "SingularSystemError",
    "DegeneratePoleError",
    "IncidentSpec",
    "BlockSystem",
    "InteriorCoefficients",
    "ExteriorCoefficients",
    "ScatteringSolution",
    "PolePencilData",
    "dtn_block",
    "assemble_system",
    "solve_interior",
    "exterior_from_interior",
    "solve",
    "evaluate_field",
    "pole_pencil",
    "scattered_field_approx",
]

SMALL_K = 1e-8
SIN_GUARD = 1e-12


class GapSingularityError(ArithmeticError):
    """A gap is resonant for some mode: ``sin(k l) = 0`` with ``k l != 0``."""


class SingularSystemError(np.linalg.LinAlgError):
    """The block system is (numerically) singular: omega sits on a resonance."""


class DegeneratePoleError(ArithmeticError):
    pass


def dtn_block(k: complex, gap: float) -> np.ndarray:
    """Gap propagator ``N^k(l)``.

    Maps the end values ``(u(a), u(b))`` of a Helmholtz solution on a gap of
    length ``l`` to ``(-u'(a), -u'(b))``. The ``k -> 0`` limit is returned for
    ``|k l| < 1e-8``.
    """
    kl = k * gap
    if abs(kl) < SMALL_K:
        g = 1.0 / gap
        return np.array([[g, -g], [g, -g]], dtype=complex)
    s = np.sin(kl)
    if abs(s) < SIN_GUARD:
        raise GapSingularityError(f"sin(k*l) vanishes for k={k!r}, l={gap!r}")
    c = np.cos(kl)
    return np.array([[k * c / s, -k / s], [k / s, -k * c / s]], dtype=complex)


def _outward_dtn(cfg: SimulationConfig, omega: complex) -> np.ndarray:
    """``G[n]``: outward exterior derivative from exterior traces, shape ``(P, 2N, 2N)``."""
    K = cfg.truncation.K
    modes = np.arange(-K, K + 1)
    k, _ = wavenumbers(omega, modes, cfg.omega_mod, cfg.params.v_out, cfg.params.v_in)
    N = cfg.n
    gaps = cfg.array.gaps
    G = np.zeros((2 * K + 1, 2 * N, 2 * N), dtype=complex)
    for r, kn in enumerate(k):
        G[r, 0, 0] += 1j * kn
        G[r, 2 * N - 1, 2 * N - 1] += 1j * kn
        for g, length in enumerate(gaps):
            try:
                blk = dtn_block(kn, length)
            except GapSingularityError as exc:
                raise GapSingularityError(f"mode n={modes[r]}, gap {g + 1}: {exc}") from None
            a, b = 2 * g + 1, 2 * g + 2
            # N returns -u' at both ends; outward normal is +x at a, -x at b
            G[r, a, a] = -blk[0, 0]
            G[r, a, b] = -blk[0, 1]
            G[r, b, a] = blk[1, 0]
            G[r, b, b] = blk[1, 1]
    return G


def _boundary_signs(n: int) -> np.ndarray:
    return np.tile(np.array([-1.0, 1.0]), n)


def _exp_traces(basis: InteriorBasis, x: float):
    """Interior values/derivatives at ``x`` per unknown, columns ``2j + (a|b)``."""
    lam, F = basis.lam, basis.vectors
    ep = np.exp(1j * lam * x)
    em = np.exp(-1j * lam * x)
    P = lam.shape[0]
    val = np.empty((P, 2 * P), dtype=complex)
    der = np.empty((P, 2 * P), dtype=complex)
    val[:, 0::2] = F * ep
    val[:, 1::2] = F * em
    der[:, 0::2] = F * (1j * lam * ep)
    der[:, 1::2] = F * (-1j * lam * em)
    return val, der


def _sinc_lam(lam, s):
    """``sin(lam s)/lam`` including ``lam = 0``."""
    return s * np.sinc(lam * s / np.pi)


def _smooth_traces(basis: InteriorBasis, s: float):
    """Interior values/derivatives at offset ``s`` from the centre in mode coordinates."""
    lam, F = basis.lam, basis.vectors
    Finv = np.linalg.inv(F)
    cos_ = np.cos(lam * s)
    snc = _sinc_lam(lam, s)
    P = lam.shape[0]

    def fn(d):
        return (F * d[None, :]) @ Finv

    val = np.empty((P, 2 * P), dtype=complex)
    der = np.empty((P, 2 * P), dtype=complex)
    c_mat = fn(cos_)
    val[:, 0::2] = c_mat
    val[:, 1::2] = fn(snc)
    der[:, 0::2] = fn(-(lam**2) * snc)
    der[:, 1::2] = c_mat
    return val, der


def _incident_traces(cfg: SimulationConfig, omega: complex, incident: IncidentSpec):
    """Incident values and derivatives ``(vin, dvin)`` of shape ``(P, 2N)``."""
    K = cfg.truncation.K
    N = cfg.n
    P = 2 * K + 1
    vin = np.zeros((P, 2 * N), dtype=complex)
    dvin = np.zeros((P, 2 * N), dtype=complex)
    k0 = omega / cfg.params.v_out
    x1, xN = cfg.array.boundaries[0], cfg.array.boundaries[-1]
    if incident.theta1 != 0:
        v = incident.theta1 * np.exp(1j * k0 * x1)
        vin[K, 0] += v
        dvin[K, 0] += 1j * k0 * v
    if incident.theta2 != 0:
        v = incident.theta2 * np.exp(-1j * k0 * xN)
        vin[K, 2 * N - 1] += v
        dvin[K, 2 * N - 1] += -1j * k0 * v
    return vin, dvin


@dataclass
class BlockSystem:
    """``matrix @ w = rhs`` for one operating frequency.

    Rows are ordered ``(n, p)`` with ``n = -K..K`` and ``p`` running over
    ``x_1^-, x_1^+, ..., x_N^+``; columns ``(j, i, a|b)``.
    """

    cfg: SimulationConfig
    omega: complex
    basis_kind: str
    bases: list[InteriorBasis]
    matrix: np.ndarray
    rhs: np.ndarray
    val: np.ndarray = field(repr=False)
    der: np.ndarray = field(repr=False)
    gmat: np.ndarray = field(repr=False)
    vin: np.ndarray = field(repr=False)
    dvin: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def row(self, n: int, point: int) -> int:
        """Row of mode ``n`` at boundary point ``point`` (0-based over 2N points)."""
        K = self.cfg.truncation.K
        return (n + K) * 2 * self.cfg.n + point

    def column(self, j: int, i: int, which: int) -> int:
        """Column of mode-basis index ``j``, resonator ``i`` (0-based), ``which`` 0=a 1=b."""
        K = self.cfg.truncation.K
        return (j + K) * 2 * self.cfg.n + 2 * i + which


def assemble_system(cfg: SimulationConfig, omega: complex | None = None, *,
                    incident: IncidentSpec | None = None, basis: str = "exp",
                    bases: list[InteriorBasis] | None = None) -> BlockSystem:
    """Assemble the truncated block system at ``omega`` (default: the incident frequency)."""
    if omega is None:
        omega = cfg.incident.omega
    omega = complex(omega)
    if incident is None:
        incident = cfg.incident
    if basis not in ("exp", "smooth"):
        raise ValueError(f"basis must be 'exp' or 'smooth', got {basis!r}")
    if bases is None:
        bases = interior_bases(cfg, omega)
    N = cfg.n
    P = 2 * cfg.truncation.K + 1
    pts = np.asarray(cfg.array.boundaries)
    centres = 0.5 * (cfg.array.left + cfg.array.right)

    val = np.empty((2 * N, P, 2 * P), dtype=complex)
    der = np.empty((2 * N, P, 2 * P), dtype=complex)
    for p, x in enumerate(pts):
        b = bases[p // 2]
        if basis == "exp":
            val[p], der[p] = _exp_traces(b, x)
        else:
            val[p], der[p] = _smooth_traces(b, x - centres[p // 2])

    G = _outward_dtn(cfg, omega)
    sign = _boundary_signs(N)
    A = kernels.fill_system(val, der, G, sign, cfg.params.delta)
    assert A.shape == (2 * N * P, 2 * N * P)

    vin, dvin = _incident_traces(cfg, omega, incident)
    rhs = cfg.params.delta * (sign[None, :] * dvin - np.einsum("npq,nq->np", G, vin))
    return BlockSystem(cfg, omega, basis, bases, A, rhs.reshape(-1), val, der, G, vin, dvin)


@dataclass
class InteriorCoefficients:
    """Solution vector and diagnostics.

    ``coeffs[j + K, i, 0|1]`` are ``a_j^i``/``b_j^i`` (exp basis) or the mode
    coordinates (smooth basis).
    """

    w: np.ndarray
    coeffs: np.ndarray
    residual: float
    rcond: float


def solve_interior(sys: BlockSystem, *, rcond_min: float = 1e-15) -> InteriorCoefficients:
    """Dense LU solve with a componentwise backward-error check."""
    A, b = sys.matrix, sys.rhs
    with warnings.catch_warnings():
        # exact singularity is reported below with more context
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    if np.any(np.diag(lu) == 0):
        raise SingularSystemError(f"singular block system at omega={sys.omega!r}")
    anorm = np.linalg.norm(A, 1)
    rcond = _rcond_1(lu, piv, anorm)
    if rcond < rcond_min:
        raise SingularSystemError(
            f"numerically singular block system at omega={sys.omega!r} (rcond={rcond:.2e}); "
            "use the pole-pencil approximation near a quasifrequency"
        )
    w = sla.lu_solve((lu, piv), b, check_finite=False)
    # one step of iterative refinement
    w = w + sla.lu_solve((lu, piv), b - A @ w, check_finite=False)
    res = componentwise_residual(A, w, b)
    P = 2 * sys.cfg.truncation.K + 1
    return InteriorCoefficients(w, w.reshape(P, sys.cfg.n, 2), res, rcond)


def _rcond_1(lu, piv, anorm):
    from scipy.linalg.lapack import zgecon

    rc, info = zgecon(lu, anorm, norm="1")
    return float(rc) if info == 0 else 0.0


def componentwise_residual(A, w, b) -> float:
    """``max_i |A w - b|_i / (|A| |w| + |b|)_i``."""
    r = np.abs(A @ w - b)
    scale = np.abs(A) @ np.abs(w) + np.abs(b)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(scale > 0, r / scale, 0.0)
    return float(np.max(ratio)) if ratio.size else 0.0


@dataclass
class ExteriorCoefficients:
    """Exterior representation per mode.

    ``beta0[n]``/``alphaN[n]`` are the outgoing edge amplitudes (the
    reflection/transmission coefficients); ``alpha[n, g]``/``beta[n, g]`` the
    gap amplitudes (NaN for modes with ``|k l| < 1e-8`` where the exponential
    form degenerates). ``traces[n, p]`` are exterior scattered values at the
    boundary points.
    """

    modes: np.ndarray
    k: np.ndarray
    beta0: np.ndarray
    alphaN: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    traces: np.ndarray
    interior_traces: np.ndarray


def _interior_boundary_values(sys: BlockSystem, coeffs: np.ndarray) -> np.ndarray:
    """Interior traces ``V[n, p]``."""
    N = sys.cfg.n
    P = coeffs.shape[0]
    V = np.empty((P, 2 * N), dtype=complex)
    for p in range(2 * N):
        V[:, p] = sys.val[p] @ coeffs[:, p // 2, :].reshape(-1)
    return V


def exterior_from_interior(coeffs: InteriorCoefficients, sys: BlockSystem,
                           *, subtract_incident: bool = True) -> ExteriorCoefficients:
    """Exterior amplitudes from interior traces minus incident traces."""
    cfg = sys.cfg
    N = cfg.n
    K = cfg.truncation.K
    modes = np.arange(-K, K + 1)
    k, _ = wavenumbers(sys.omega, modes, cfg.omega_mod, cfg.params.v_out, cfg.params.v_in)
    V = _interior_boundary_values(sys, coeffs.coeffs)
    E = V - sys.vin if subtract_incident else V.copy()
    x = np.asarray(cfg.array.boundaries)
    beta0 = np.exp(1j * k * x[0]) * E[:, 0]
    alphaN = np.exp(-1j * k * x[-1]) * E[:, -1]
    alpha = np.full((2 * K + 1, max(N - 1, 0)), np.nan + 0j)
    beta = np.full_like(alpha, np.nan + 0j)
    for g, length in enumerate(cfg.array.gaps):
        xa, xb = x[2 * g + 1], x[2 * g + 2]
        for r, kn in enumerate(k):
            if abs(kn * length) < SMALL_K:
                continue
            s = np.sin(kn * length)
            if abs(s) < SIN_GUARD:
                raise GapSingularityError(f"mode n={modes[r]}, gap {g + 1}: sin(k l) vanishes")
            ea, eb = E[r, 2 * g + 1], E[r, 2 * g + 2]
            pre = -1.0 / (2j * s)
            alpha[r, g] = pre * (np.exp(-1j * kn * xb) * ea - np.exp(-1j * kn * xa) * eb)
            beta[r, g] = pre * (-np.exp(1j * kn * xb) * ea + np.exp(1j * kn * xa) * eb)
    return ExteriorCoefficients(modes, k, beta0, alphaN, alpha, beta, E, V)


@dataclass
class ScatteringSolution:
    cfg: SimulationConfig
    omega: complex
    incident: IncidentSpec
    system: BlockSystem
    interior: InteriorCoefficients
    exterior: ExteriorCoefficients

    @property
    def R(self) -> np.ndarray:
        return self.exterior.beta0

    @property
    def T(self) -> np.ndarray:
        return self.exterior.alphaN

    @property
    def modes(self) -> np.ndarray:
        return self.exterior.modes


def solve(cfg: SimulationConfig, omega: complex | None = None, *,
          incident: IncidentSpec | None = None) -> ScatteringSolution:
    """Full scattering solve at ``omega`` (default: the incident frequency)."""
    if omega is None:
        omega = cfg.incident.omega
    if incident is None:
        incident = cfg.incident
    sys = assemble_system(cfg, omega, incident=incident)
    coeffs = solve_interior(sys)
    ext = exterior_from_interior(coeffs, sys)
    return ScatteringSolution(cfg, complex(omega), incident, sys, coeffs, ext)


# --- field evaluation ---------------------------------------------------------

def _interior_modes_at(sys: BlockSystem, coeffs: np.ndarray, i: int, x: np.ndarray) -> np.ndarray:
    b = sys.bases[i]
    if sys.basis_kind == "exp":
        return kernels.interior_modes(x, b.lam, b.vectors, coeffs[:, i, 0], coeffs[:, i, 1])
    centre = 0.5 * (sys.cfg.array.left[i] + sys.cfg.array.right[i])
    s = x - centre
    lam, F = b.lam, b.vectors
    Finv = np.linalg.inv(F)
    ca = Finv @ coeffs[:, i, 0]
    cb = Finv @ coeffs[:, i, 1]
    amp = np.cos(np.outer(s, lam)) * ca[None, :] + _sinc_lam(lam[None, :], s[:, None]) * cb[None, :]
    return amp @ F.T


def mode_profile(sol: ScatteringSolution, x) -> np.ndarray:
    """Scattered mode values ``v_n(x)``, shape ``(len(x), 2K+1)``.

    Boundary points are assigned to the exterior side.
    """
    return _mode_profile(sol.system, sol.interior.coeffs, sol.exterior, x)


def _mode_profile(sys: BlockSystem, coeffs: np.ndarray, ext: ExteriorCoefficients, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cfg = sys.cfg
    left, right = cfg.array.left, cfg.array.right
    k = ext.k
    out = np.zeros((x.size, k.size), dtype=complex)

    m = x <= left[0]
    out[m] = ext.beta0[None, :] * np.exp(-1j * np.outer(x[m], k))
    m = x >= right[-1]
    out[m] = ext.alphaN[None, :] * np.exp(1j * np.outer(x[m], k))
    for i in range(cfg.n):
        m = (x > left[i]) & (x < right[i])
        if np.any(m):
            out[m] = _interior_modes_at(sys, coeffs, i, x[m])
    for g, length in enumerate(cfg.array.gaps):
        xa, xb = right[g], left[g + 1]
        m = (x >= xa) & (x <= xb)
        if not np.any(m):
            continue
        ua = ext.traces[:, 2 * g + 1]
        ub = ext.traces[:, 2 * g + 2]
        xs = x[m][:, None]
        kl = k * length
        small = np.abs(kl) < SMALL_K
        s = np.where(small, 1.0, np.sin(kl))
        prof = (ua * np.sin(k * (xb - xs)) + ub * np.sin(k * (xs - xa))) / s
        lin = (ua * (xb - xs) + ub * (xs - xa)) / length
        out[m] = np.where(small[None, :], lin, prof)
    return out


def _synthesise(modes_vals: np.ndarray, omega: complex, modes: np.ndarray,
                omega_mod: float, t: float) -> np.ndarray:
    phase = np.exp(-1j * (omega + modes * omega_mod) * t)
    return modes_vals @ phase


def evaluate_field(sol: ScatteringSolution, x, t: float = 0.0, *, total: bool = False) -> np.ndarray:
    """``u^sc(x, t) = sum_n v_n(x) exp(-i (omega + n Omega) t)``.

    With ``total=True`` the incident wave is added on its support
    (``x < x_1^-`` for the left wave, ``x > x_N^+`` for the right one).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cfg = sol.cfg
    u = _synthesise(mode_profile(sol, x), sol.omega, sol.modes, cfg.omega_mod, t)
    if total:
        k0 = sol.omega / cfg.params.v_out
        tphase = np.exp(-1j * sol.omega * t)
        lmask = x < cfg.array.boundaries[0]
        rmask = x > cfg.array.boundaries[-1]
        u = u + np.where(lmask, sol.incident.theta1 * np.exp(1j * k0 * x) * tphase, 0.0)
        u = u + np.where(rmask, sol.incident.theta2 * np.exp(-1j * k0 * x) * tphase, 0.0)
    return u


def interior_trace(sol: ScatteringSolution, i: int, side: str) -> np.ndarray:
    """Interior mode values at ``x_i^-`` (``side='-'``) or ``x_i^+`` (``'+'``)."""
    p = 2 * i + (0 if side == "-" else 1)
    return sol.exterior.interior_traces[:, p]


# --- pole pencil ---------------------------------------------------------------

def smooth_matrix(cfg: SimulationConfig, omega: complex) -> np.ndarray:
    return assemble_system(cfg, omega, basis="smooth").matrix


def _exp_from_smooth(bases: list[InteriorBasis], centres: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Convert smooth-basis coordinates to ``(a, b)`` coefficients."""
    out = np.empty_like(coeffs)
    for i, b in enumerate(bases):
        lam, F = b.lam, b.vectors
        al = np.linalg.solve(F, coeffs[:, i, 0])
        be = np.linalg.solve(F, coeffs[:, i, 1])
        c = centres[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(lam != 0, be / (1j * lam), np.nan)
        out[:, i, 0] = 0.5 * np.exp(-1j * lam * c) * (al + q)
        out[:, i, 1] = 0.5 * np.exp(1j * lam * c) * (al - q)
    return out


@dataclass
class PolePencilData:
    """Rank-one residue data of the inverse system at a quasifrequency.

    ``right``/``left`` are null vectors of the smooth-basis matrix (rows are
    identical in both bases, so ``left`` is also the left null vector of the
    exp-basis matrix); ``right_exp`` is ``right`` in ``(a, b)`` coefficients.
    """

    pole: complex
    right: np.ndarray
    left: np.ndarray
    right_exp: np.ndarray
    denominator: complex
    residual_right: float
    residual_left: float
    step: float

    def apply(self, rhs: np.ndarray) -> np.ndarray:
        """``L_j rhs`` in smooth coordinates."""
        return self.right * (np.vdot(self.left, rhs) / self.denominator)


def pole_pencil(cfg: SimulationConfig, omega_j: complex, *, tol: float = 1e-8) -> PolePencilData:
    """Null vectors and ``<w*, A'(omega_j) w>`` at the quasifrequency ``omega_j``."""
    omega_j = complex(omega_j)
    sys = assemble_system(cfg, omega_j, basis="smooth")
    A = sys.matrix
    U, s, Vh = np.linalg.svd(A)
    w = Vh[-1].conj()
    ws = U[:, -1]
    anorm = s[0]
    res_r = float(np.linalg.norm(A @ w) / (anorm * np.linalg.norm(w)))
    res_l = float(np.linalg.norm(ws.conj() @ A) / (anorm * np.linalg.norm(ws)))
    if res_r > tol or res_l > tol:
        raise DegeneratePoleError(
            f"omega_j={omega_j!r} is not an accurate quasifrequency "
            f"(null residuals {res_r:.2e}, {res_l:.2e} > {tol:.0e})"
        )
    h = 1e-6 * max(abs(omega_j), cfg.omega_mod)
    dA = (smooth_matrix(cfg, omega_j + h) - smooth_matrix(cfg, omega_j - h)) / (2 * h)
    den = complex(np.vdot(ws, dA @ w))
    if abs(den) < 1e-12 * np.linalg.norm(ws) * np.linalg.norm(w) * np.linalg.norm(dA, 2):
        raise DegeneratePoleError(f"vanishing pencil denominator at omega_j={omega_j!r}")
    P = 2 * cfg.truncation.K + 1
    centres = 0.5 * (cfg.array.left + cfg.array.right)
    w_exp = _exp_from_smooth(sys.bases, centres, w.reshape(P, cfg.n, 2)).reshape(-1)
    return PolePencilData(omega_j, w, ws, w_exp, den, res_r, res_l, h)


def pole_terms(cfg: SimulationConfig, omega: complex, pencils: list[PolePencilData],
               x, *, incident: IncidentSpec | None = None) -> np.ndarray:
    """``gamma_n^j(x)`` for every pole, shape ``(J, len(x), 2K+1)``.

    The residue of each pole is mapped to the field with the operating
    frequency's interior basis and wavenumbers; the incident-trace
    subtraction (holomorphic in omega) belongs to the neglected remainder.
    """
    if incident is None:
        incident = cfg.incident
    sys = assemble_system(cfg, omega, incident=incident, basis="smooth")
    P = 2 * cfg.truncation.K + 1
    out = []
    for pen in pencils:
        coeffs = pen.apply(sys.rhs).reshape(P, cfg.n, 2)
        ic = InteriorCoefficients(coeffs.reshape(-1), coeffs, np.nan, np.nan)
        ext = exterior_from_interior(ic, sys, subtract_incident=False)
        out.append(_mode_profile(sys, coeffs, ext, x))
    return np.asarray(out)


def scattered_field_approx(cfg: SimulationConfig, omega: complex, poles, x, t: float = 0.0, *,
                           pencils: list[PolePencilData] | None = None,
                           incident: IncidentSpec | None = None,
                           time_phase: str = "pole") -> np.ndarray:
    """Pole-pencil approximation of the scattered field near the quasifrequencies.

    ``time_phase="pole"`` multiplies each term by ``exp(-i(omega_j + n Omega) t)``
    as in the pole expansion; ``"operating"`` uses ``exp(-i(omega + n Omega) t)``.
    """
    omega = complex(omega)
    if pencils is None:
        pencils = [pole_pencil(cfg, p) for p in poles]
    if incident is None:
        incident = cfg.incident
    if time_phase not in ("pole", "operating"):
        raise ValueError("time_phase must be 'pole' or 'operating'")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    modes = np.arange(-cfg.truncation.K, cfg.truncation.K + 1)
    gam = pole_terms(cfg, omega, pencils, x, incident=incident)
    u = np.zeros(x.size, dtype=complex)
    for pen, g in zip(pencils, gam):
        d = omega - pen.pole
        if abs(d) < 1e-14:
            raise DegeneratePoleError(f"operating frequency coincides with pole {pen.pole!r}")
        w0 = pen.pole if time_phase == "pole" else omega
        u += _synthesise(g, w0, modes, cfg.omega_mod, t) / d
    return u
