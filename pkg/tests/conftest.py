"""Shared fixtures: preset models, coarse meshes, and steady solutions.

Session-scoped fixtures cache the expensive objects (relaxed steady
states, discretizations) so the suite stays within a desk-scale runtime.
"""

import numpy as np
import pytest

from propburn.config import preset_model
from propburn.discretization import Discretization, Forcing
from propburn.mesh import preset_mesh
from propburn.steady import preset_steady, steady_by_relaxation

P_REF = 50e5


@pytest.fixture(scope="session")
def baseline_model():
    return preset_model("baseline")


@pytest.fixture(scope="session")
def unstable_model():
    return preset_model("unstable")


@pytest.fixture(scope="session")
def baseline_steady():
    """Bundled high-accuracy steady solution of the baseline model."""
    return preset_steady("baseline")


@pytest.fixture(scope="session")
def coarse_mesh(baseline_steady):
    """Small mesh (~60 cells) for fast integration tests."""
    from propburn.mesh import adaptive_mesh_from_profile
    x, T = baseline_steady.combined_profile()
    return adaptive_mesh_from_profile((x, T), 120.0)


@pytest.fixture(scope="session")
def coarse_disc(baseline_model, coarse_mesh):
    return Discretization(baseline_model, coarse_mesh, Forcing.constant(P_REF))


@pytest.fixture(scope="session")
def coarse_steady_state(baseline_model, coarse_mesh, baseline_steady):
    """Discrete steady state of the coarse mesh (relaxed, cached)."""
    disc = Discretization(baseline_model, coarse_mesh, Forcing.constant(P_REF))
    _, X = steady_by_relaxation(baseline_model, coarse_mesh, P_REF,
                                X0=baseline_steady.to_state(disc))
    return X


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
