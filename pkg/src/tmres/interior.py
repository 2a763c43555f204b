"""Interior coupling matrices ``C_i`` and their eigenbases.

Inside resonator ``i`` the modes ``v_n`` (``n = -K..K``) satisfy
``v'' + C_i v = 0`` with ``C_i[n, n-m] = k_{i,m} k_r^(n) k_r^(n-m)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .model import SimulationConfig


class EigensolverError(RuntimeError):
    pass


def wavenumbers(omega: complex, n, omega_mod: float, v_out: float, v_in: float):
    """Exterior and interior wavenumbers ``(k^(n), k_r^(n))`` of mode ``n``."""
    w = omega + np.asarray(n) * omega_mod
    return w / v_out, w / v_in


@dataclass(frozen=True)
class InteriorCouplingMatrix:
    resonator: int
    omega: complex
    entries: np.ndarray
    bandwidth: int

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class InteriorBasis:
    """Eigenpairs of ``C_i``: ``lam[j]**2 = eigenvalues[j]``, ``vectors[:, j] = f^j``."""

    resonator: int
    omega: complex
    eigenvalues: np.ndarray
    lam: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    @property
    def dim(self) -> int:
        return self.lam.shape[0]


def build_interior_matrix(i: int, omega: complex, cfg: SimulationConfig) -> InteriorCouplingMatrix:
    """``C_i`` truncated to modes ``-K..K``; ``i`` is zero-based.

    Couplings that would reach outside ``[-K, K]`` are dropped.
    """
    K, M = cfg.truncation.K, cfg.truncation.M
    modes = np.arange(-K, K + 1)
    _, kr = wavenumbers(omega, modes, cfg.omega_mod, cfg.params.v_out, cfg.params.v_in)
    table = cfg.modulation.fourier_table(M)[i]
    P = 2 * K + 1
    C = np.zeros((P, P), dtype=complex)
    for m in range(-M, M + 1):
        k = table[m + M]
        if k == 0:
            continue
        rows = np.arange(max(0, m), min(P, P + m))
        C[rows, rows - m] = k * kr[rows] * kr[rows - m]
    return InteriorCouplingMatrix(i, complex(omega), C, M)


def principal_sqrt(z):
    """Square root with ``Re >= 0``; on the imaginary axis ``Im >= 0``."""
    r = np.sqrt(np.asarray(z, dtype=complex))
    flip = (r.real == 0.0) & (r.imag < 0.0)
    return np.where(flip, -r, r)


def interior_eigenbasis(mat: InteriorCouplingMatrix) -> InteriorBasis:
    """Eigen-decompose ``C_i``.

    Modes are ordered so that mode ``j`` is dominated by Fourier row ``j``
    (an assignment on the eigenvector magnitudes), which reduces to the
    identity ordering when the modulation vanishes. Each eigenvector has unit
    norm and its dominant component real positive.
    """
    C = mat.entries
    P = C.shape[0]
    if not np.all(np.isfinite(C)):
        raise EigensolverError(f"non-finite coupling matrix at omega={mat.omega!r}")

    off = C - np.diag(np.diag(C))
    if not np.any(off):
        evals = np.diag(C).copy()
        vecs = np.eye(P, dtype=complex)
    else:
        try:
            evals, vecs = sla.eig(C, check_finite=False)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
            raise EigensolverError(f"eigensolver failed at omega={mat.omega!r}") from exc
        vecs = _orthonormalise_clusters(evals, vecs)
        mags = np.abs(vecs)
        with np.errstate(divide="ignore"):
            cost = -np.log(mags + 1e-300)
        rows, cols = linear_sum_assignment(cost)
        order = cols[np.argsort(rows)]
        evals, vecs = evals[order], vecs[:, order]

    vecs = vecs / np.linalg.norm(vecs, axis=0)
    lead = vecs[np.argmax(np.abs(vecs), axis=0), np.arange(P)]
    vecs = vecs * (np.abs(lead) / lead)[None, :]

    lam = principal_sqrt(evals)
    scale = max(np.linalg.norm(C, 2), np.finfo(float).tiny)
    res = np.linalg.norm(C @ vecs - vecs * evals[None, :], axis=0) / scale
    return InteriorBasis(mat.resonator, mat.omega, evals, lam, vecs, res)


def _orthonormalise_clusters(evals: np.ndarray, vecs: np.ndarray, gap: float = 1e-12) -> np.ndarray:
    """Orthonormalise eigenvectors of numerically coincident eigenvalues."""
    P = len(evals)
    scale = max(np.max(np.abs(evals)), np.finfo(float).tiny)
    order = np.lexsort((evals.imag, evals.real))
    out = vecs.copy()
    k = 0
    while k < P:
        group = [order[k]]
        while k + 1 < P and abs(evals[order[k + 1]] - evals[group[-1]]) < gap * scale:
            k += 1
            group.append(order[k])
        if len(group) > 1:
            group.sort(key=lambda g: evals[g].imag)
            q, _ = np.linalg.qr(out[:, group])
            out[:, group] = q
        k += 1
    return out


def interior_bases(cfg: SimulationConfig, omega: complex) -> list[InteriorBasis]:
    return [interior_eigenbasis(build_interior_matrix(i, omega, cfg)) for i in range(cfg.n)]
