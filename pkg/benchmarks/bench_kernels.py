"""Numba vs numpy kernel timings.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

Kernel inputs are taken from a real N=6, K=4 system, so the sizes match
what the solvers see. ``--end-to-end`` also times a Floquet + det-root run
in two subprocesses, one with ``TMRES_DISABLE_NUMBA=1``.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from tmres import kernels
from tmres.model import paper_config
from tmres.quasifreq import d_matrix, capacitance_matrix
from tmres.scattering import assemble_system, _boundary_signs


def _inputs(n: int, K: int):
    cfg = paper_config(n, 0.6, K=K)
    sys_ = assemble_system(cfg, 0.0048 - 1e-6j)
    A = sys_.matrix
    p = cfg.params
    Linv = np.diag(1.0 / cfg.array.lengths)
    stiff = p.delta * p.v_in**2 * Linv @ capacitance_matrix(cfg.array)
    damp = p.delta * p.v_in**2 * np.diag(Linv @ d_matrix(n)) / p.v_out
    table = cfg.modulation.fourier_table(1)
    orders = np.arange(-1, 2)
    phi = np.eye(2 * n).reshape(-1)
    sign = _boundary_signs(n).astype(float)
    basis = sys_.bases[0]
    x = np.linspace(0.0, 2.0, 256)
    a = np.ones(basis.dim, dtype=complex)
    return {
        "lu_logdet": ((A,), {}),
        "floquet_rhs": ((0.3, phi, table, orders, cfg.omega_mod, stiff, damp), {}),
        "fill_system": ((sys_.val, sys_.der, sys_.gmat, sign, p.delta), {}),
        "interior_modes": ((x, basis.lam, np.ascontiguousarray(basis.vectors), a, 0.5 * a), {}),
    }


def _prep(name, args):
    if name == "lu_logdet":
        return (np.ascontiguousarray(args[0]),)
    if name == "fill_system":
        return args[:4] + (float(args[4]),)
    return args


def bench(repeat: int, n: int, K: int) -> list[tuple[str, float, float, float]]:
    rows = []
    for name, (args, _) in _inputs(n, K).items():
        args = _prep(name, args)
        nb = getattr(kernels, f"{name}_nb")
        npf = getattr(kernels, f"{name}_np")
        r_nb = nb(*args)  # compile
        r_np = npf(*args)
        if name == "lu_logdet":
            err = abs(r_nb[0] * 2.0 ** r_nb[1] - r_np[0] * 2.0 ** r_np[1]) / abs(r_np[0] * 2.0 ** r_np[1])
        else:
            err = float(np.max(np.abs(np.asarray(r_nb) - np.asarray(r_np))) / max(np.max(np.abs(r_np)), 1e-300))
        number = 50
        t_nb = min(timeit.repeat(lambda: nb(*args), number=number, repeat=repeat)) / number
        t_np = min(timeit.repeat(lambda: npf(*args), number=number, repeat=repeat)) / number
        rows.append((name, t_nb, t_np, err))
    return rows


_E2E = (
    "import time; from tmres.model import paper_config;"
    "from tmres.quasifreq import floquet_quasifrequencies, det_root_quasifrequencies;"
    "cfg = paper_config(6, 0.6); floquet_quasifrequencies(paper_config(1, 0.1));"
    "t = time.perf_counter(); v = floquet_quasifrequencies(cfg).values;"
    "det_root_quasifrequencies(cfg, v); print(time.perf_counter() - t)"
)


def end_to_end() -> dict[str, float]:
    out = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, TMRES_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", _E2E], env=env, capture_output=True, text=True, check=True)
        out[label] = float(res.stdout.strip().splitlines()[-1])
    return out


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--K", type=int, default=4)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()

    print(f"kernels at N={args.n}, K={args.K} (seconds per call)")
    print(f"{'kernel':<16}{'numba':>12}{'numpy':>12}{'speedup':>10}{'rel diff':>12}")
    for name, t_nb, t_np, err in bench(args.repeat, args.n, args.K):
        print(f"{name:<16}{t_nb:>12.3e}{t_np:>12.3e}{t_np / t_nb:>10.2f}{err:>12.2e}")
    if args.end_to_end:
        t = end_to_end()
        print(f"floquet + det-root, N={args.n} eps=0.6: numba {t['numba']:.3f} s, numpy {t['numpy']:.3f} s")


if __name__ == "__main__":
    main()
