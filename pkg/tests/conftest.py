import numpy as np
import pytest

from viscofree.constitutive import make_law
from viscofree.fixed_point import Problem, SolverSettings
from viscofree.geometry import DomainProfile, build_mesh
from viscofree.scaling import DimensionlessParams


@pytest.fixture
def flat_mesh():
    return build_mesh(DomainProfile.flat(16), 16, 9)


@pytest.fixture
def bump_mesh():
    return build_mesh(DomainProfile.sinusoidal(0.05, 16), 16, 9)


@pytest.fixture
def params():
    return DimensionlessParams(Re=1.0, We=0.5, eps=0.5, alpha=1.0, g0=1.0, a=1.0)


def make_problem(mesh, params, law="johnson_segalman", dt=0.02, nt=10, **kw):
    law_obj = make_law(law, a=params.a) if isinstance(law, str) else law
    return Problem(mesh, params, law_obj, dt, nt, SolverSettings(**kw))


def zero_initial(mesh):
    return np.zeros((2,) + mesh.shape), np.zeros((3,) + mesh.shape)
