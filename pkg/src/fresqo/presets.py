"""Named scenario presets, stored as plain JSON-compatible dictionaries.

Filter frequencies are given relative to the laser in units of kappa; with
omega_b = 2 the Stokes and anti-Stokes lines sit at -2 and +2. Map extents cover
+-1.5 omega_b unless a feature lies further out.
"""
from __future__ import annotations

import copy

from .config import SCHEMA_VERSION
from .errors import ConfigError

__all__ = ["PRESETS", "preset_config", "preset_names"]

_OM = {"variant": "OM_full", "omega_b": 2.0, "gamma": 0.1, "omega_drive": 0.1,
       "delta_a": "first_excited", "n_th": 0.0, "cavity_dim": 6, "phonon_dim": 8}
# Delta_g = Omega = Delta_a = 0.5 with g0 = 1, omega_b = 2
_KERR = {"g0": 1.0, "omega_b": 2.0, "omega_drive": 0.5, "delta_a": "first_excited", "cavity_dim": 10}
# the drive-expansion variants carry no Kerr term, so the Kerr-rotated detuning
# Delta_a - Delta_g = 0 keeps the laser on the one-photon level
_POLARON = {"variant": "POLARON_DRIVE", "g0": 1.0, "omega_b": 2.0, "omega_drive": 0.1,
            "delta_a": 0.0, "gamma": 0.1, "cavity_dim": 6, "phonon_dim": 10}
# weak coupling: the tiny inelastic part of da is sensitive to the photon cutoff;
# strong coupling: the map corners reach multi-phonon sidebands
_MAP = {"omega1": {"start": -3.0, "stop": 3.0, "num": 101}}
_SWEEP_POINTS = [{"label": "SaS", "omega1": -2.0, "omega2": 2.0},
                 {"label": "leapfrog", "omega1": -1.0, "omega2": 1.0}]
_THERMAL_SERIES = [{"label": "nth0", "n_th": 0.0}, {"label": "nth0.1", "n_th": 0.1}]


def _om(**kw):
    return dict(_OM, **kw)


def _doc(name, task, model, gamma=0.05, **kw):
    d = {"schema_version": SCHEMA_VERSION, "name": name, "task": task, "model": model,
         "filter": {"gamma": gamma}}
    d.update(kw)
    return d


PRESETS = {
    "fig2b": _doc("fig2b", "tps", dict(_KERR, variant="KERR_SQUEEZE_ONLY"),
                  description="one-mode squeezing of the fluctuation mode (the model's mode is da)",
                  targets=["a"], grid={"omega1": {"start": -1.5, "stop": 1.5, "num": 101}}),
    "fig2c": _doc("fig2c", "tps", dict(_KERR, variant="KERR_FLUCT_DRIVE"),
                  description="Kerr interaction and cubic-order drive of the fluctuation mode",
                  targets=["a"], grid={"omega1": {"start": -1.5, "stop": 1.5, "num": 101}}),
    "fig2d": _doc("fig2d", "tps", dict(_KERR, variant="KERR_DRIVEN"),
                  description="coherently driven Kerr cavity", targets=["a", "da"],
                  grid={"omega1": {"start": -1.5, "stop": 1.5, "num": 101}}),
    "fig3b": _doc("fig3b", "tps", dict(_POLARON, orders=[1]), targets=["a"],
                  description="first-order phonon-dressed drive",
                  grid={"omega1": {"start": -5.0, "stop": 5.0, "num": 101}}),
    "fig3c": _doc("fig3c", "tps", dict(_POLARON, orders=[2]), targets=["a", "da"],
                  description="second-order phonon-dressed drive",
                  grid={"omega1": {"start": -5.0, "stop": 5.0, "num": 101}}),
    "fig3d": _doc("fig3d", "tps", dict(_POLARON, orders=list(range(9))), targets=["a", "da"],
                  description="drive expansion up to eighth order",
                  grid={"omega1": {"start": -5.0, "stop": 5.0, "num": 101}}),
    "fig4a": _doc("fig4a", "tps", _om(g0=0.1, cavity_dim=7), targets=["a", "da"], grid=_MAP),
    "fig4b": _doc("fig4b", "tps", _om(g0=0.5), targets=["a", "da"], grid=_MAP),
    "fig4c": _doc("fig4c", "tps", _om(g0=1.0, phonon_dim=12), targets=["a", "da"], grid=_MAP),
    "fig5": _doc("fig5", "sweep", _om(g0=0.1, cavity_dim=8, phonon_dim=10), targets=["a", "da"],
                 sweep={"axis": "g0", "values": {"start": 0.02, "stop": 1.2, "num": 41},
                        "series": _THERMAL_SERIES, "points": _SWEEP_POINTS, "blind": True}),
    "fig6a": _doc("fig6a", "tau", _om(g0=0.08), gamma=0.05, targets=["a", "da"],
                  tau={"omega1": -2.0, "omega2": 2.0, "tau": {"start": -150.0, "stop": 150.0, "num": 3001}}),
    "fig6b": _doc("fig6b", "tau", _om(g0=1.0), gamma=0.5, targets=["a", "da"],
                  tau={"omega1": -2.0, "omega2": 2.0, "tau": {"start": -60.0, "stop": 60.0, "num": 1201}}),
    "fig6c": _doc("fig6c", "tau", _om(g0=0.2), gamma=0.05, targets=["a", "da"],
                  tau={"omega1": -1.0, "omega2": 1.0, "tau": {"start": -150.0, "stop": 150.0, "num": 3001}}),
    "fig7a": _doc("fig7a", "csi", _om(g0=0.1, cavity_dim=7), targets=["a", "da"], grid=_MAP),
    "fig7b": _doc("fig7b", "csi", _om(g0=1.0, phonon_dim=12), targets=["a", "da"], grid=_MAP),
    "fig8": _doc("fig8", "sweep", _om(g0=0.5, phonon_dim=10), targets=["a", "da"],
                 sweep={"axis": "gamma_filter",
                        "values": [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
                        "series": _THERMAL_SERIES, "points": _SWEEP_POINTS, "blind": True}),
}


def preset_names() -> list[str]:
    return list(PRESETS)


def preset_config(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}", "--preset") from None
