import json

import pytest
from hypothesis import given, strategies as st

from fresqo.config import (SCHEMA_VERSION, build_model, config_hash, load_config, parse_config, parse_target,
                           target_label)
from fresqo.errors import ConfigError
from fresqo.models import Variant
from fresqo.presets import PRESETS, preset_config, preset_names


def base(**kw):
    d = {"schema_version": SCHEMA_VERSION, "task": "tps",
         "model": {"variant": "OM_full", "g0": 0.1, "omega_b": 2.0, "omega_drive": 0.1},
         "filter": {"gamma": 0.05}, "grid": {"omega1": {"start": -1, "stop": 1, "num": 3}}}
    d.update(kw)
    return d


def test_expected_presets():
    assert preset_names() == ["fig2b", "fig2c", "fig2d", "fig3b", "fig3c", "fig3d", "fig4a", "fig4b",
                              "fig4c", "fig5", "fig6a", "fig6b", "fig6c", "fig7a", "fig7b", "fig8"]


@pytest.mark.parametrize("name", list(PRESETS))
def test_presets_parse(name):
    cfg = parse_config(preset_config(name))
    assert cfg.name == name
    build_model(cfg.model)


def test_fig4a_grid_and_params():
    cfg = parse_config(preset_config("fig4a"))
    w = cfg.omega1.array()
    assert w.size == 101 and w[0] == -3.0 and w[-1] == 3.0
    assert cfg.gamma_filter == 0.05 and cfg.model.g0 == 0.1
    assert cfg.model.params().delta_a == pytest.approx(0.005)


def test_fig5_sweep_points():
    cfg = parse_config(preset_config("fig5"))
    pts = {p.label: (p.omega1, p.omega2) for p in cfg.sweep.points}
    assert pts == {"SaS": (-2.0, 2.0), "leapfrog": (-1.0, 1.0)}
    v = cfg.sweep.values.array()
    assert v[0] == 0.02 and v[-1] == 1.2
    assert sorted(s["n_th"] for s in cfg.sweep.series) == [0.0, 0.1]


@pytest.mark.parametrize("mutate,path", [
    (lambda d: d.pop("grid"), "grid"),
    (lambda d: d["model"].pop("g0"), "model.g0"),
    (lambda d: d["filter"].update(gamma=-1), "filter.gamma"),
    (lambda d: d["model"].update(variant="OM"), "model.variant"),
    (lambda d: d.update(task="plot"), "task"),
    (lambda d: d["grid"].update(omega1={"start": 0, "stop": 1}), "grid.omega1.num"),
    (lambda d: d.update(schema_version=99), "schema_version"),
    (lambda d: d.update(targets=["a,b"], model=dict(d["model"], variant="KERR_DRIVEN")), "targets"),
    (lambda d: d.update(model=dict(d["model"], variant="POLARON_DRIVE")), "model.orders"),
])
def test_config_errors_name_field(mutate, path):
    d = base()
    mutate(d)
    with pytest.raises(ConfigError) as err:
        parse_config(d)
    assert err.value.path == path


def test_hash_ignores_threads_and_output_dir():
    a = parse_config(base(threads=1, output={"dir": "x"}))
    b = parse_config(base(threads=8, output={"dir": "y"}))
    c = parse_config(base(filter={"gamma": 0.1}))
    assert config_hash(a) == config_hash(b) != config_hash(c)


def test_load_config_overlay(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"filter": {"gamma": 0.2}, "grid": {"omega1": [0.0, 1.0]}}))
    cfg = load_config(str(f), preset="fig4a")
    assert cfg.gamma_filter == 0.2 and cfg.omega1.values == (0.0, 1.0)
    assert cfg.model.g0 == 0.1


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        load_config(str(bad))
    with pytest.raises(ConfigError):
        load_config(preset="nope")


def test_targets():
    assert parse_target("a") == ("a", "a")
    assert parse_target("δa") == ("da", "da")
    assert parse_target("a,b") == ("a", "b")
    assert target_label(("a", "b")) == "a,b"
    with pytest.raises(ConfigError):
        parse_target("a,b,c")


def test_fluctuation_models_use_real_alpha():
    cfg = parse_config(preset_config("fig2b"))
    m = build_model(cfg.model)
    assert m.variant.tag is Variant.KERR_SQUEEZE_ONLY
    assert m.variant.alpha > 0 and isinstance(m.variant.alpha, float)


@given(st.floats(0.01, 1.5), st.floats(0.5, 4.0))
def test_first_excited_detuning(g0, omega_b):
    d = base()
    d["model"].update(g0=g0, omega_b=omega_b, delta_a="first_excited")
    assert parse_config(d).model.params().delta_a == pytest.approx(g0 ** 2 / omega_b)
