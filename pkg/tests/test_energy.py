import numpy as np
import pytest

from tmres.energy import REGIME_TOL, classify, energy_sweep, mode_table
from tmres.model import IncidentSpec, paper_config
from tmres.quasifreq import floquet_quasifrequencies
from tmres.scattering import solve

# largest real Floquet exponent of the six-resonator array at eps = 0.9 and 0.6
W_090 = 0.006702281478974818
W_060 = 0.00484463


def test_classify_band():
    assert classify(1.0) == "conserve"
    assert classify(1 + 0.5 * REGIME_TOL) == "conserve"
    assert classify(1 + 2 * REGIME_TOL) == "gain"
    assert classify(1 - 2 * REGIME_TOL) == "loss"
    assert classify(4.0, reference=4.0) == "conserve"


def test_static_single_conserves():
    tab = mode_table(solve(paper_config(1, 0.0), 0.002))
    assert abs(tab.E - 1.0) < 1e-8
    assert tab.regime == "conserve"
    K = 4
    assert abs(tab.cross_section[K] - 1.0) < 1e-8
    assert np.sum(np.delete(tab.cross_section, K)) < 1e-16


def test_table_consistency():
    tab = mode_table(solve(paper_config(6, 0.6), W_060))
    assert np.all(tab.cross_section >= 0) and tab.E >= 0
    assert tab.E == pytest.approx(np.sum(np.abs(tab.R) ** 2 + np.abs(tab.T) ** 2), rel=1e-15)
    assert tab.cross_section_of(0) == tab.cross_section[4]
    assert tab.modes.tolist() == list(range(-4, 5))


def test_amplitude_scaling():
    cfg = paper_config(2, 0.4)
    a = mode_table(solve(cfg, 0.0033))
    b = mode_table(solve(cfg, 0.0033, incident=IncidentSpec("left", 2.0, 0.0, 0.0033)), theta=2.0)
    assert b.E == pytest.approx(4 * a.E, rel=1e-12)
    assert b.reference == 4.0
    assert b.regime == a.regime


def test_negative_frequency_flags():
    tab = mode_table(solve(paper_config(2, 0.4), 0.0033))
    assert tab.negative_frequency.tolist() == [n < 0 for n in range(-4, 5)]


def test_mode_spectrum_decays():
    tab = mode_table(solve(paper_config(6, 0.9), W_090))
    cs = tab.cross_section
    K = 4
    left = cs[K - 1::-1]   # n = -1, -2, ...
    right = cs[K + 1:]     # n = 1, 2, ...
    assert np.all(np.diff(left) < 0) and np.all(np.diff(right) < 0)
    assert max(cs[0], cs[-1]) < 1e-4 * cs[K]


def test_eps_sweep_static_point_and_variation():
    cfg = paper_config(6, 0.0).with_omega(W_060)
    rows = energy_sweep(cfg, "eps", [0.0, 0.3, 0.6, 0.9], threads=1)
    assert [r.value for r in rows] == [0.0, 0.3, 0.6, 0.9]
    assert abs(rows[0].E - 1.0) < 1e-8
    assert rows[0].regime == "conserve"
    assert max(abs(r.E - 1) for r in rows[1:]) > 1e-3


def test_sweep_records_failures_and_continues():
    cfg = paper_config(1, 0.0).with_omega(0.002)
    rows = energy_sweep(cfg, "eps", [0.2, 1.3, 0.4], threads=1)
    assert [r.regime == "error" for r in rows] == [False, True, False]
    assert "eps" in rows[1].error and np.isnan(rows[1].E)


def test_threaded_sweep_matches_serial():
    cfg = paper_config(2, 0.4)
    grid = list(np.linspace(0.001, 0.006, 6))
    a = energy_sweep(cfg, "omega", grid, threads=1)
    b = energy_sweep(cfg, "omega", grid, threads=3)
    assert [r.E for r in a] == [r.E for r in b]
    assert [r.nearest_marker for r in a] == [r.nearest_marker for r in b]


def test_omega_sweep_peak_near_marker():
    cfg = paper_config(6, 0.6)
    markers = floquet_quasifrequencies(cfg).values
    grid = np.linspace(0.0005, 0.0145, 57)
    rows = energy_sweep(cfg, "omega", grid, markers=markers, threads=1)
    dev = np.array([abs(r.E - 1) for r in rows])
    k = int(np.argmax(dev))
    assert abs(rows[k].value - rows[k].nearest_marker) < 0.03 / 10


def test_length_sweep_keeps_gaps():
    cfg = paper_config(2, 0.3).with_omega(0.003)
    rows = energy_sweep(cfg, "length", [1.0, 2.0], threads=1)
    assert all(not r.error for r in rows)
    direct = mode_table(solve(paper_config(2, 0.3, length=1.0), 0.003))
    assert rows[0].E == pytest.approx(direct.E, rel=1e-12)


def test_bad_sweeps():
    cfg = paper_config(1, 0.0)
    with pytest.raises(ValueError):
        energy_sweep(cfg, "eps", [])
    with pytest.raises(ValueError):
        energy_sweep(cfg, "delta", [0.1])
