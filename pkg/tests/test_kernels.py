"""The compiled and numpy kernel variants must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from tmres import _accel, kernels
from tmres.model import paper_config
from tmres.quasifreq import capacitance_matrix, d_matrix, match_sets
from tmres.scattering import _boundary_signs, assemble_system

rng = np.random.default_rng(7)


def cmat(n):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def det_from(pair):
    m, e = pair
    return m * 2.0**e


@pytest.mark.parametrize("n", [1, 5, 18, 36, 60])
def test_lu_logdet_variants(n):
    a = cmat(n)
    ref = np.linalg.det(a)
    for f in (kernels.lu_logdet_nb, kernels.lu_logdet_np, kernels.lu_logdet):
        m, e = f(a)
        assert 0.5 <= abs(m) < 1.0
        assert det_from((m, e)) == pytest.approx(ref, rel=1e-10)


def test_lu_logdet_extreme_scale():
    a = np.diag(np.full(200, 1e-5 + 0j))
    for f in (kernels.lu_logdet_nb, kernels.lu_logdet_np):
        m, e = f(a)
        assert 0.5 <= abs(m) < 1.0
        # log2 |det| = 200 log2(1e-5)
        assert np.log2(abs(m)) + e == pytest.approx(200 * np.log2(1e-5), rel=1e-12)


def test_lu_logdet_singular():
    a = np.zeros((4, 4), dtype=complex)
    assert kernels.lu_logdet_nb(a) == (0j, 0)
    assert kernels.lu_logdet_np(a) == (0j, 0)


def test_floquet_rhs_variants():
    n = 6
    cfg = paper_config(n, 0.7)
    p = cfg.params
    Linv = 1.0 / cfg.array.lengths
    stiff = p.delta * Linv[:, None] * capacitance_matrix(cfg.array)
    damp = p.delta * Linv * np.diag(d_matrix(n))
    table = cfg.modulation.fourier_table(1)
    orders = np.arange(-1, 2)
    phi = rng.standard_normal(4 * n * n)
    for t in (0.0, 17.3, 150.0):
        a = kernels.floquet_rhs_nb(t, phi, table, orders, cfg.omega_mod, stiff, damp)
        b = kernels.floquet_rhs_np(t, phi, table, orders, cfg.omega_mod, stiff, damp)
        assert np.allclose(a, b, rtol=1e-13, atol=1e-18)


@pytest.mark.parametrize("n,eps", [(1, 0.0), (2, 0.4), (6, 0.9)])
def test_fill_system_variants(n, eps):
    cfg = paper_config(n, eps)
    s = assemble_system(cfg, 0.0041 - 3e-6j)
    sign = _boundary_signs(n)
    a = kernels.fill_system_nb(s.val, s.der, s.gmat, sign, cfg.params.delta)
    b = kernels.fill_system_np(s.val, s.der, s.gmat, sign, cfg.params.delta)
    assert np.allclose(a, b, rtol=1e-14, atol=0)
    assert np.allclose(s.matrix, a, rtol=1e-14, atol=0)


def test_interior_modes_variants():
    lam = rng.standard_normal(9) + 0.1j * rng.standard_normal(9)
    F = cmat(9)
    a = cmat(9)[0]
    b = cmat(9)[1]
    x = np.linspace(0, 2, 33)
    u = kernels.interior_modes_nb(x, lam, F, a, b)
    v = kernels.interior_modes_np(x, lam, F, a, b)
    assert np.allclose(u, v, rtol=1e-13, atol=1e-14)


def test_njit_fallback_is_identity(monkeypatch):
    monkeypatch.setattr(_accel, "HAVE_NUMBA", False)

    def f(x):
        return x + 1

    assert _accel.njit(f) is f
    assert _accel.njit(cache=True)(f) is f


@pytest.mark.parametrize("value,expected", [("1", False), ("true", False), ("0", True), ("", True)])
def test_env_flag(value, expected):
    env = dict(os.environ, TMRES_DISABLE_NUMBA=value)
    code = "from tmres import _accel; print(_accel.USE_NUMBA)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == str(expected and _accel.HAVE_NUMBA)


def test_numpy_path_end_to_end():
    code = (
        "import numpy as np;"
        "from tmres.model import paper_config;"
        "from tmres.quasifreq import floquet_quasifrequencies, det_root_quasifrequencies;"
        "from tmres.scattering import solve;"
        "cfg = paper_config(2, 0.4);"
        "f = floquet_quasifrequencies(cfg).values;"
        "d = det_root_quasifrequencies(cfg, f).values;"
        "s = solve(cfg, 0.0033);"
        "print(repr(f.tolist()));"
        "print(repr(d.tolist()));"
        "print(repr(s.R.tolist()))"
    )
    runs = []
    for flag in ("0", "1"):
        env = dict(os.environ, TMRES_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        runs.append([np.array(eval(line)) for line in out.stdout.strip().splitlines()])
    (fa, da, ra), (fb, db, rb) = runs
    # +/- pairs tie in Im, so compare quasifrequencies as sets
    assert np.max(match_sets(fa, fb)) < 1e-12 and np.max(match_sets(da, db)) < 1e-12
    assert len(fa) == len(fb) and len(da) == len(db)
    assert np.allclose(ra, rb, rtol=1e-9, atol=1e-14)
