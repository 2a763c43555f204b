"""Time-periodic modulation of the bulk modulus inside each resonator.

The canonical representation is the Fourier table of ``1/kappa_i(t)``::

    1/kappa_i(t) = sum_m k_{i,m} exp(-i m Omega t),   m = -M..M

The cosine family ``kappa_i(t) = 1/(1 + eps_i cos(Omega t + phi_i))`` is the
built-in profile; arbitrary trigonometric polynomials can be given through
their coefficients directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


def fourier_coefficients(eps: float, phi: float) -> dict[int, complex]:
    """Fourier coefficients of ``1 + eps*cos(Omega t + phi)``.

    Only the nonzero entries are returned, so ``eps == 0`` gives ``{0: 1}``.
    """
    if not (0.0 <= eps < 1.0):
        raise ValueError(f"modulation amplitude must lie in [0, 1), got {eps!r}")
    if eps == 0.0:
        return {0: 1.0 + 0.0j}
    half = 0.5 * eps
    return {
        -1: half * complex(np.cos(phi), np.sin(phi)),
        0: 1.0 + 0.0j,
        1: half * complex(np.cos(phi), -np.sin(phi)),
    }


def default_phases(n: int) -> list[float]:
    """Phase shifts ``pi/i`` for ``i = 1..n``."""
    return [np.pi / i for i in range(1, n + 1)]


@dataclass(frozen=True)
class ModulationEntry:
    """One resonator's modulation.

    ``eps``/``phi`` are set for the cosine family; for a directly entered
    profile they are ``None`` and ``coefficients`` carries the table.
    """

    coefficients: Mapping[int, complex]
    eps: float | None = None
    phi: float | None = None

    @classmethod
    def cosine(cls, eps: float, phi: float) -> "ModulationEntry":
        return cls(coefficients=fourier_coefficients(eps, phi), eps=float(eps), phi=float(phi))

    @classmethod
    def from_coefficients(cls, coefficients: Mapping[int, complex]) -> "ModulationEntry":
        coeffs = {int(m): complex(c) for m, c in coefficients.items()}
        if abs(coeffs.get(0, 0.0).imag) > 1e-14:
            raise ValueError("k_0 must be real for a real-valued 1/kappa")
        for m, c in coeffs.items():
            partner = coeffs.get(-m, 0.0)
            if abs(partner - np.conj(c)) > 1e-12 * max(1.0, abs(c)):
                raise ValueError(f"coefficients violate k_{{-m}} = conj(k_m) at m={m}")
        entry = cls(coefficients=coeffs)
        # 1/kappa must stay positive over a period.
        t = np.linspace(0.0, 2.0 * np.pi, 512, endpoint=False)
        if np.min(entry._inv_kappa_phase(t)) <= 0.0:
            raise ValueError("1/kappa(t) must be strictly positive")
        return entry

    @property
    def is_cosine(self) -> bool:
        return self.eps is not None

    @property
    def order(self) -> int:
        nz = [abs(m) for m, c in self.coefficients.items() if c != 0]
        return max(nz, default=0)

    def _inv_kappa_phase(self, theta: np.ndarray) -> np.ndarray:
        # theta = Omega * t
        out = np.zeros_like(np.asarray(theta, dtype=float), dtype=complex)
        for m, c in self.coefficients.items():
            out = out + c * np.exp(-1j * m * theta)
        return out.real


@dataclass(frozen=True)
class ModulationProfile:
    """Modulation frequency and per-resonator profiles."""

    omega_mod: float
    entries: tuple[ModulationEntry, ...]
    period: float = field(init=False)

    def __post_init__(self) -> None:
        if not (self.omega_mod > 0.0):
            raise ValueError(f"modulation frequency must be positive, got {self.omega_mod!r}")
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "period", 2.0 * np.pi / self.omega_mod)

    @classmethod
    def cosine(cls, omega_mod: float, eps: Sequence[float], phi: Sequence[float] | None = None):
        if phi is None:
            phi = default_phases(len(eps))
        if len(phi) != len(eps):
            raise ValueError("eps and phi lists differ in length")
        return cls(omega_mod, tuple(ModulationEntry.cosine(e, p) for e, p in zip(eps, phi)))

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def order(self) -> int:
        return max((e.order for e in self.entries), default=0)

    def fourier_table(self, M: int | None = None) -> np.ndarray:
        """Array ``k[i, m + M]`` of shape ``(N, 2M+1)``."""
        if M is None:
            M = self.order
        if M < self.order:
            raise ValueError(f"modulation order {self.order} exceeds M={M}")
        table = np.zeros((self.n, 2 * M + 1), dtype=complex)
        for i, entry in enumerate(self.entries):
            for m, c in entry.coefficients.items():
                table[i, m + M] = c
        return table

    def inv_kappa_at(self, i: int, t):
        """``1/kappa_i(t)``; ``i`` is zero-based."""
        entry = self.entries[i]
        theta = self.omega_mod * np.asarray(t, dtype=float)
        if entry.is_cosine:
            return 1.0 + entry.eps * np.cos(theta + entry.phi)
        return entry._inv_kappa_phase(theta)

    def kappa_at(self, i: int, t):
        return 1.0 / self.inv_kappa_at(i, t)

    def inv_kappa_derivative_at(self, i: int, t):
        """Exact time derivative of ``1/kappa_i``."""
        entry = self.entries[i]
        theta = self.omega_mod * np.asarray(t, dtype=float)
        if entry.is_cosine:
            return -entry.eps * self.omega_mod * np.sin(theta + entry.phi)
        out = np.zeros_like(theta, dtype=complex)
        for m, c in entry.coefficients.items():
            out = out + (-1j * m * self.omega_mod) * c * np.exp(-1j * m * theta)
        return out.real

    def mean_kappa(self, i: int, points: int = 1024) -> float:
        """Period average of ``kappa_i``.

        Analytic ``1/sqrt(1 - eps^2)`` for the cosine family, trapezoid
        quadrature (periodic, so the rectangle sum) otherwise.
        """
        entry = self.entries[i]
        if entry.is_cosine:
            return 1.0 / np.sqrt(1.0 - entry.eps**2)
        t = np.linspace(0.0, self.period, points, endpoint=False)
        return float(np.mean(self.kappa_at(i, t)))
