"""Model configuration files: flat INI sections [solid], [surface],
[species.N], [reaction.N], [transport], plus bundled presets."""

from __future__ import annotations

import configparser
from importlib import resources

import numpy as np

from .physics import (
    GasSpecies,
    GasTransport,
    ModelError,
    PropellantModel,
    Reaction,
    SolidProperties,
    SurfaceKinetics,
)

MODEL_PRESETS = ("baseline", "unstable")


class ConfigError(ValueError):
    """Malformed configuration file."""


def _floats(text):
    return np.array([float(v) for v in text.replace(",", " ").split()])


def parse_model(text, name=""):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(text)
    try:
        sol = cp["solid"]
        solid = SolidProperties(
            rho=sol.getfloat("rho"),
            c=sol.getfloat("c"),
            lam=sol.getfloat("lambda"),
            T0=sol.getfloat("T0"),
            dh_f=sol.getfloat("dh_f", 0.0),
        )
        srf = cp["surface"]
        surface = SurfaceKinetics(
            A_p=srf.getfloat("A_p"),
            T_ap=srf.getfloat("T_ap"),
            Y_inj=_floats(srf["Y_inj"]),
        )
        species = []
        i = 1
        while cp.has_section(f"species.{i}"):
            sp = cp[f"species.{i}"]
            species.append(GasSpecies(
                name=sp.get("name", f"S{i}"),
                molar_mass=sp.getfloat("molar_mass"),
                c_p=sp.getfloat("c_p"),
                dh_f=sp.getfloat("dh_f"),
            ))
            i += 1
        reactions = []
        i = 1
        while cp.has_section(f"reaction.{i}"):
            rx = cp[f"reaction.{i}"]
            reactions.append(Reaction(
                nu=_floats(rx["nu"]),
                A=rx.getfloat("A"),
                T_a=rx.getfloat("T_a"),
                reversible=rx.getboolean("reversible", False),
                A_rev=rx.getfloat("A_rev", 0.0),
                T_a_rev=rx.getfloat("T_a_rev", 0.0),
            ))
            i += 1
        tr = cp["transport"]
        kind = tr.get("diffusion", "unity_lewis")
        if kind == "unity_lewis":
            transport = GasTransport(lam=tr.getfloat("lambda"), unity_lewis=True)
        elif kind == "constant_matrix":
            D = _floats(tr["D_matrix"]).reshape(len(species), len(species))
            transport = GasTransport(lam=tr.getfloat("lambda"),
                                     unity_lewis=False, D_matrix=D)
        else:
            raise ConfigError(f"unknown diffusion rule {kind!r}")
    except (KeyError, ValueError, ModelError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad model configuration: {exc}") from exc
    return PropellantModel(solid=solid, surface=surface,
                           species=tuple(species), reactions=tuple(reactions),
                           transport=transport, name=name)


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model(fh.read(), name=str(path))


def preset_model(name):
    if name not in MODEL_PRESETS:
        raise ConfigError(f"unknown model preset {name!r}; choose from {MODEL_PRESETS}")
    text = resources.files("propburn.presets").joinpath(f"{name}.ini").read_text()
    return parse_model(text, name=name)


def preset_text(filename):
    """Raw text of a bundled data file (presets, golden profiles)."""
    return resources.files("propburn.presets").joinpath(filename).read_text()
