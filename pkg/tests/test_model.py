import json
import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmres.modulation import ModulationProfile
from tmres.model import (
    ConfigError,
    PhysicalParams,
    ResonatorArray,
    Truncation,
    build_config,
    config_to_dict,
    load_config,
    paper_config,
    parse_complex,
    uniform_array,
)


def raw_config(**over):
    doc = {
        "physical": {"rho_out": 1.0, "rho_in": 1e-4, "kappa_out": 1.0, "kappa_in": 1e-4},
        "geometry": {"uniform": {"n": 6, "length": 2.0, "gap": 10.0}},
        "modulation": {"omega": 0.03, "entries": [{"eps": 0.0}] * 6},
        "truncation": {"K": 4, "M": 1},
    }
    doc.update(over)
    return doc


def test_derived_quantities():
    p = PhysicalParams(2.0, 3e-4, 8.0, 1.2e-3)
    assert p.delta == 3e-4 / 2.0
    assert p.v_out == math.sqrt(8.0 / 2.0)
    assert p.v_in == math.sqrt(1.2e-3 / 3e-4)


def test_from_contrast_recovers_inputs():
    p = PhysicalParams.from_contrast(1e-4, 1.0, 1.0)
    assert p.delta == pytest.approx(1e-4, rel=1e-15)
    assert p.v_out == pytest.approx(1.0, rel=1e-15)
    assert p.v_in == pytest.approx(1.0, rel=1e-15)


def test_contrast_outside_unit_interval_warns_only():
    with pytest.warns(UserWarning):
        p = PhysicalParams(1.0, 2.0, 1.0, 1.0)
    assert p.delta == 2.0


def test_standard_experiment_is_valid():
    cfg = build_config(raw_config())
    ref = paper_config()
    assert cfg.n == 6
    assert cfg.params.delta == pytest.approx(1e-4)
    assert cfg.params.v_in == pytest.approx(1.0) and cfg.params.v_out == pytest.approx(1.0)
    assert cfg.omega_mod == 0.03
    assert cfg.truncation.K == 4
    assert np.allclose(cfg.array.lengths, 2.0) and np.allclose(cfg.array.gaps, 10.0)
    assert [e.phi for e in cfg.modulation.entries] == pytest.approx([math.pi / i for i in range(1, 7)])
    assert cfg.array == ref.array


@pytest.mark.parametrize("n,length,gap,expected", [
    (1, 2.0, 1.0, (0.0, 2.0)),
    (2, 2.0, 10.0, (0.0, 2.0, 12.0, 14.0)),
])
def test_uniform_array(n, length, gap, expected):
    assert uniform_array(n, length, gap).boundaries == expected


def test_uniform_array_six():
    assert uniform_array(6, 2.0, 10.0).boundaries[-1] == 62.0


def test_unordered_boundaries_rejected():
    with pytest.raises(ConfigError):
        ResonatorArray((0.0, 2.0, 1.0, 3.0))
    with pytest.raises(ConfigError):
        build_config(raw_config(geometry={"boundaries": [0, 2, 1, 3]},
                                modulation={"omega": 0.03, "entries": [{"eps": 0}] * 2}))


def test_eps_one_rejected():
    doc = raw_config(modulation={"omega": 0.03, "entries": [{"eps": 1.0}] + [{"eps": 0}] * 5})
    with pytest.raises(ConfigError):
        build_config(doc)


def test_truncation_bounds():
    Truncation(1, 1)
    with pytest.raises(ConfigError):
        Truncation(0, 1)


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(extra=1),
    lambda d: d["physical"].update(rho=1.0),
    lambda d: d["modulation"].update(entries=[{"eps": 0.1}] * 5),
    lambda d: d["truncation"].update(K=0),
    lambda d: d.update(incident={"omega": 0.01, "amplitude": 1, "amplitudes": [1, 0]}),
    lambda d: d.update(geometry={"uniform": {"n": 2.5, "length": 2}}),
])
def test_bad_documents(mutate):
    doc = json.loads(json.dumps(raw_config()))
    mutate(doc)
    with pytest.raises(ConfigError):
        build_config(doc)


def test_modulation_order_must_fit_truncation():
    doc = raw_config(truncation={"K": 4, "M": 1},
                     modulation={"omega": 0.03, "entries": [
                         {"fourier": [{"m": 0, "k": 1}, {"m": 2, "k": [0.1, 0]}, {"m": -2, "k": [0.1, 0]}]}
                     ] * 6})
    with pytest.raises(ConfigError):
        build_config(doc)


def test_omega_regime_warning():
    with pytest.warns(UserWarning):
        build_config(raw_config(modulation={"omega": 1.0, "entries": [{"eps": 0.0}] * 6}))


def test_parse_complex_forms():
    assert parse_complex(0.5) == 0.5
    assert parse_complex([0.1, -2e-4]) == complex(0.1, -2e-4)
    assert parse_complex("0.1-2e-4i") == complex(0.1, -2e-4)
    assert parse_complex("0.1-2e-4j") == complex(0.1, -2e-4)
    with pytest.raises(ConfigError):
        parse_complex("abc")


def test_round_trip_is_exact(tmp_path):
    doc = raw_config(
        geometry={"boundaries": [0.0, 1.3, 4.1, 6.0, 16.25, 17.0]},
        modulation={"omega": 0.029, "entries": [
            {"eps": 0.3, "phi": 0.7},
            {"fourier": [{"m": -1, "k": [0.1, 0.2]}, {"m": 0, "k": 1.0}, {"m": 1, "k": [0.1, -0.2]}]},
            {"eps": 0.0},
        ]},
        truncation={"K": 3, "M": 1},
        incident={"direction": "left", "amplitude": [0.5, 0.25], "omega": [0.004, -1e-6]},
    )
    cfg = build_config(doc)
    again = build_config(json.loads(json.dumps(config_to_dict(cfg))))
    assert again == cfg
    assert again.digest() == cfg.digest()
    path = tmp_path / "c.json"
    path.write_text(json.dumps(config_to_dict(cfg)))
    assert load_config(path) == cfg


@settings(max_examples=40, deadline=None)
@given(
    eps=st.lists(st.floats(0.0, 0.95), min_size=1, max_size=4),
    length=st.floats(0.1, 20.0),
    gap=st.floats(0.1, 50.0),
    K=st.integers(1, 6),
)
def test_round_trip_property(eps, length, gap, K):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = paper_config(len(eps), 0.0, length=length, gap=gap, K=K)
        cfg = replace(cfg, modulation=ModulationProfile.cosine(0.03, eps))
        again = build_config(json.loads(json.dumps(config_to_dict(cfg))))
    assert again == cfg


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)
