from __future__ import annotations

import pytest

from pulse_maslov.maslov import maslov_index
from pulse_maslov.model import ModelParams
from pulse_maslov.pulse import solve_pulse
from pulse_maslov.singular_orbit import solve_jump_condition
from pulse_maslov.spectrum import point_spectrum

# frozen oracles (independent bisection of the jump-off function, 1e-15 bracket)
X_STAR_STABLE = 0.9307790397857247
X_STAR_UNSTABLE_1 = 0.0677612380485236
X_STAR_UNSTABLE_2 = 5.756212619909219
MARGIN_STABLE = -0.44868843020969273
MARGIN_UNSTABLE_1 = 3.3930381409673664
MARGIN_UNSTABLE_2 = -0.09995997998598864


@pytest.fixture(scope="session")
def stable_params():
    return ModelParams(epsilon=0.01, alpha=2.0, beta=1.0, gamma=1.0, D=5.0)


@pytest.fixture(scope="session")
def unstable_params():
    return ModelParams(epsilon=0.01, alpha=-5.0, beta=5.0, gamma=0.5, D=5.0)


@pytest.fixture(scope="session")
def stable_profile(stable_params):
    return solve_pulse(stable_params, solve_jump_condition(stable_params)[0])


@pytest.fixture(scope="session")
def unstable_profile(unstable_params):
    return solve_pulse(unstable_params, solve_jump_condition(unstable_params)[0])


@pytest.fixture(scope="session")
def root2_profile(unstable_params):
    return solve_pulse(unstable_params, solve_jump_condition(unstable_params)[1])


@pytest.fixture(scope="session")
def stable_maslov(stable_profile):
    return maslov_index(stable_profile)


@pytest.fixture(scope="session")
def unstable_maslov(unstable_profile):
    return maslov_index(unstable_profile)


@pytest.fixture(scope="session")
def stable_spectrum(stable_profile):
    return point_spectrum(stable_profile)


@pytest.fixture(scope="session")
def unstable_spectrum(unstable_profile):
    return point_spectrum(unstable_profile)


@pytest.fixture(scope="session")
def stable_pde_check(stable_profile, stable_spectrum):
    from pulse_maslov.pipeline import pde_check

    return pde_check(stable_profile, stable_spectrum)


@pytest.fixture(scope="session")
def unstable_pde_check(unstable_profile, unstable_spectrum):
    from pulse_maslov.pipeline import pde_check

    return pde_check(unstable_profile, unstable_spectrum)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
