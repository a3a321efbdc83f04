"""Shared fixtures. Expensive meshes and solves are session-scoped so the
acceptance battery and the unit tests pay for them once."""

import time

import numpy as np
import pytest

from rieszpot.balayage import default_sweep_target
from rieszpot.capacity import capacitary_measure
from rieszpot.condenser import Condenser, solve_standard_problem
from rieszpot.geometry import DomainSpec, discretize_sphere
from rieszpot.kernels import KernelSpec

ORIGIN = (0.0, 0.0, 0.0)


@pytest.fixture(scope="session")
def spec2():
    return KernelSpec(3, 2.0)


@pytest.fixture(scope="session")
def spec15():
    return KernelSpec(3, 1.5)


@pytest.fixture(scope="session")
def unit_ball():
    return DomainSpec("Ball", center=ORIGIN, radius=1.0)


@pytest.fixture(scope="session")
def sphere2000():
    return discretize_sphere(ORIGIN, 1.0, 2000)


@pytest.fixture(scope="session")
def sphere600():
    return discretize_sphere(ORIGIN, 1.0, 600)


@pytest.fixture(scope="session")
def sphere_equilibrium(sphere2000, spec2):
    """Equilibrium (capacitary) solve on the 2000-node unit sphere, timed."""
    t0 = time.perf_counter()
    res = capacitary_measure(sphere2000, spec2)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def spherical_condenser(unit_ball, spec2):
    """Inner sphere plate rho=0.5 against the unit-ball boundary."""
    plate = discretize_sphere(ORIGIN, 0.5, 800)
    target = default_sweep_target(unit_ball, spec2)
    return Condenser(plate, unit_ball, target, spec2)


@pytest.fixture(scope="session")
def condenser_solution(spherical_condenser):
    t0 = time.perf_counter()
    sol = solve_standard_problem(spherical_condenser)
    return sol, time.perf_counter() - t0


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


# --- acceptance reporting: one visible line per criterion -------------------

def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config._acceptance_lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
