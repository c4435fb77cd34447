import numpy as np
import pytest

import reference_runs as runs
from tdlag import catalog
from tdlag.diffkernel import Box, exp
from tdlag.lagrangian import TimeLagrangian


@pytest.fixture(scope="session")
def free2():
    return TimeLagrangian.from_function(lambda t, x, y: 0.5 * (y @ y), 2, name="free")


@pytest.fixture(scope="session")
def harmonic():
    return TimeLagrangian.from_function(lambda t, x, y: 0.5 * y[0] ** 2 - 0.5 * x[0] ** 2, 1, name="harmonic")


@pytest.fixture(scope="session")
def caldirola():
    return TimeLagrangian.from_function(lambda t, x, y: 0.5 * exp(2 * t) * y[0] ** 2, 1, name="caldirola")


@pytest.fixture(scope="session")
def cubic():
    return catalog.cubic_map(1)


@pytest.fixture(scope="session")
def cubic_tr():
    return catalog.cubic_transition(1, Box([-2.0], [2.0]))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture(scope="session")
def systems():
    return {name: runs.system(name) for name in catalog.CATALOG}


@pytest.fixture(scope="session")
def sphere():
    return runs.system("bead-on-sphere-forced", epsilon=0.0)


@pytest.fixture(scope="session")
def forced_sphere():
    return runs.system("bead-on-sphere-forced")


@pytest.fixture(scope="session")
def harmonic_runs():
    """Harmonic trajectories over [0, 2 pi] keyed by step size."""
    return {h: runs.harmonic_run(h) for h in (2e-3, 1e-3)}


@pytest.fixture(scope="session")
def sphere_forced_run():
    return runs.sphere_forced_run()


@pytest.fixture(scope="session")
def sphere_free_quarter():
    return runs.sphere_free_quarter()


@pytest.fixture(scope="session")
def intrinsic_forced_run():
    return runs.intrinsic_forced_run()
