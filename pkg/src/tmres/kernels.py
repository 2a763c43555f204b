"""Hot numeric kernels.

Each kernel exists twice: a numba-compiled loop (``*_nb``) and a vectorised
numpy/scipy version (``*_np``). The public name dispatches on
``TMRES_DISABLE_NUMBA`` (see ``_accel``); both variants stay importable so the
benchmark and the tests can compare them in one process.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
import scipy.linalg as sla

from ._accel import USE_NUMBA, njit


# --- scaled determinant ------------------------------------------------------

@njit(cache=True)
def lu_logdet_nb(a):
    """Determinant of a complex square matrix as ``(mantissa, exponent)``.

    ``det = mantissa * 2**exponent`` with ``0.5 <= |mantissa| < 1`` (or
    mantissa 0 for an exactly singular matrix). Gaussian elimination with
    partial pivoting; the running product is renormalised after every pivot
    so nothing under- or overflows.
    """
    n = a.shape[0]
    lu = a.copy()
    mant = 1.0 + 0.0j
    expo = 0
    for k in range(n):
        p = k
        best = abs(lu[k, k])
        for r in range(k + 1, n):
            v = abs(lu[r, k])
            if v > best:
                best = v
                p = r
        if best == 0.0:
            return 0.0 + 0.0j, 0
        if p != k:
            for c in range(n):
                tmp = lu[k, c]
                lu[k, c] = lu[p, c]
                lu[p, c] = tmp
            mant = -mant
        piv = lu[k, k]
        m, e = math.frexp(abs(piv))
        mant = mant * (piv / abs(piv)) * m
        expo += e
        m2, e2 = math.frexp(abs(mant))
        mant = mant / abs(mant) * m2
        expo += e2
        inv = 1.0 / piv
        for r in range(k + 1, n):
            f = lu[r, k] * inv
            if f != 0.0:
                for c in range(k + 1, n):
                    lu[r, c] -= f * lu[k, c]
    return mant, expo


def lu_logdet_np(a):
    a = np.asarray(a, dtype=complex)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=False)
    d = np.diag(lu)
    if np.any(d == 0):
        return 0j, 0
    mags, exps = np.frexp(np.abs(d))
    swaps = int(np.count_nonzero(piv != np.arange(len(piv))))
    phase = np.prod(d / np.abs(d)) * (-1.0 if swaps % 2 else 1.0)
    # product of mantissas in [0.5, 1): renormalise in chunks to stay in range
    mant = complex(phase)
    expo = int(np.sum(exps))
    for chunk in np.array_split(mags, max(1, len(mags) // 64)):
        mant *= float(np.prod(chunk))
        m2, e2 = math.frexp(abs(mant))
        mant = mant / abs(mant) * m2
        expo += e2
    return mant, expo


# unblocked elimination loses to LAPACK above roughly this size
LU_NUMBA_MAX = 40


def lu_logdet(a):
    if USE_NUMBA and a.shape[0] <= LU_NUMBA_MAX:
        return lu_logdet_nb(np.ascontiguousarray(a, dtype=np.complex128))
    return lu_logdet_np(a)


# --- Floquet right-hand side ---------------------------------------------------

@njit(cache=True)
def floquet_rhs_nb(t, phi, coeffs, orders, omega_mod, stiff, damp):
    """Flattened matrix ODE ``Phi' = M(t) Phi`` for the capacitance system.

    ``stiff`` is ``delta v_r^2 L^{-1} C`` and ``damp`` is the diagonal of
    ``delta v_r^2 L^{-1} D / v_0``. ``coeffs[i, :]`` holds the Fourier table of
    ``1/kappa_i`` at integer orders ``orders``.
    """
    n = stiff.shape[0]
    dim = 2 * n
    y = phi.reshape((dim, dim))
    out = np.empty((dim, dim))
    kap = np.empty(n)
    dinv = np.empty(n)
    for i in range(n):
        s = 0.0
        ds = 0.0
        for q in range(orders.shape[0]):
            m = orders[q]
            c = coeffs[i, q]
            th = -m * omega_mod * t
            cr = math.cos(th)
            sr = math.sin(th)
            s += c.real * cr - c.imag * sr
            # d/dt of Re(c e^{i th}) with dth/dt = -m Omega
            ds += -m * omega_mod * (-(c.real * sr) - c.imag * cr)
        kap[i] = 1.0 / s
        dinv[i] = ds
    for c in range(dim):
        for i in range(n):
            out[i, c] = y[n + i, c]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += stiff[i, j] * y[j, c]
            acc += (damp[i] + dinv[i]) * y[n + i, c]
            out[n + i, c] = -kap[i] * acc
    return out.reshape(dim * dim)


def floquet_rhs_np(t, phi, coeffs, orders, omega_mod, stiff, damp):
    n = stiff.shape[0]
    dim = 2 * n
    y = phi.reshape(dim, dim)
    ph = np.exp(-1j * orders * omega_mod * t)
    inv_kappa = (coeffs @ ph).real
    dinv = (coeffs @ (-1j * orders * omega_mod * ph)).real
    kap = 1.0 / inv_kappa
    top, bot = y[:n], y[n:]
    lower = -kap[:, None] * (stiff @ top + (damp + dinv)[:, None] * bot)
    return np.concatenate([bot, lower]).reshape(-1)


def floquet_rhs(t, phi, coeffs, orders, omega_mod, stiff, damp):
    if USE_NUMBA:
        return floquet_rhs_nb(t, phi, coeffs, orders, omega_mod, stiff, damp)
    return floquet_rhs_np(t, phi, coeffs, orders, omega_mod, stiff, damp)


# --- block assembly -------------------------------------------------------------

@njit(cache=True)
def fill_system_nb(val, der, gmat, sign, delta):
    """Scatter per-boundary interior traces into the block matrix.

    ``val[p]``/``der[p]`` (shape ``(P, 2P)``) are interior values and
    derivatives at boundary point ``p`` for the unknowns of the resonator
    owning ``p``; ``gmat[n]`` (``2N x 2N``) is the outward exterior DtN map of
    mode ``n``. Row ``(n, p)``; column ``(j, i, a/b)``.
    """
    npts = val.shape[0]
    P = val.shape[1]
    dim = npts * P
    A = np.zeros((dim, dim), dtype=np.complex128)
    for n in range(P):
        for p in range(npts):
            row = n * npts + p
            ip = p // 2
            for j in range(P):
                for ab in range(2):
                    col = j * npts + 2 * ip + ab
                    A[row, col] += sign[p] * der[p, n, 2 * j + ab]
            for q in range(npts):
                g = gmat[n, p, q]
                if g != 0.0:
                    iq = q // 2
                    for j in range(P):
                        for ab in range(2):
                            col = j * npts + 2 * iq + ab
                            A[row, col] -= delta * g * val[q, n, 2 * j + ab]
    return A


def fill_system_np(val, der, gmat, sign, delta):
    npts, P, _ = val.shape
    nres = npts // 2
    owner = np.arange(npts) // 2
    # interior derivative term: block-diagonal over resonators
    # A4[n, p, j, i, ab]
    A4 = np.zeros((P, npts, P, nres, 2), dtype=complex)
    d = (sign[:, None, None] * der).reshape(npts, P, P, 2)  # [p, n, j, ab]
    # mixed advanced indexing puts the p axis first: target is [p, n, j, ab]
    A4[:, np.arange(npts), :, owner, :] += d
    v = val.reshape(npts, P, P, 2)  # [q, n, j, ab]
    contrib = np.einsum("npq,qnja->npqja", gmat, v)  # [n, p, q, j, ab]
    for q in range(npts):
        A4[:, :, :, owner[q], :] -= delta * contrib[:, :, q]
    return A4.reshape(P * npts, P * npts)


def fill_system(val, der, gmat, sign, delta):
    if USE_NUMBA:
        return fill_system_nb(val, der, gmat, sign, float(delta))
    return fill_system_np(val, der, gmat, sign, delta)


# --- field synthesis ---------------------------------------------------------------

@njit(cache=True)
def interior_modes_nb(x, lam, fmat, coef_a, coef_b):
    """Mode values ``v_n(x)`` inside one resonator for many ``x``.

    ``v(x) = sum_j (a_j e^{i lam_j x} + b_j e^{-i lam_j x}) f^j``.
    """
    P = lam.shape[0]
    out = np.zeros((x.shape[0], P), dtype=np.complex128)
    for r in range(x.shape[0]):
        for j in range(P):
            amp = coef_a[j] * np.exp(1j * lam[j] * x[r]) + coef_b[j] * np.exp(-1j * lam[j] * x[r])
            for n in range(P):
                out[r, n] += amp * fmat[n, j]
    return out


def interior_modes_np(x, lam, fmat, coef_a, coef_b):
    ph = np.exp(1j * np.outer(x, lam))
    amp = coef_a[None, :] * ph + coef_b[None, :] / ph
    return amp @ fmat.T


def interior_modes(x, lam, fmat, coef_a, coef_b):
    x = np.ascontiguousarray(x, dtype=float)
    if USE_NUMBA:
        return interior_modes_nb(x, lam, np.ascontiguousarray(fmat),
                                 np.ascontiguousarray(coef_a), np.ascontiguousarray(coef_b))
    return interior_modes_np(x, lam, fmat, coef_a, coef_b)
