import pytest

from twistdn.geometry import CrossSection, build_mesh

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def disc_coarse():
    return build_mesh(CrossSection.unit_disc(), 0.1)


@pytest.fixture(scope="session")
def disc_medium():
    return build_mesh(CrossSection.unit_disc(), 0.05)


@pytest.fixture(scope="session")
def half_disc():
    return build_mesh(CrossSection.ellipse(0.5, 0.5), 0.05)


@pytest.fixture(scope="session")
def kite():
    # nonconvex, no rotational symmetry
    return build_mesh(CrossSection.polygon([(-0.5, -0.4), (0.6, -0.3), (0.2, 0.1), (0.5, 0.5), (-0.4, 0.4)]), 0.08)


@pytest.fixture
def acceptance_line():
    """Record a one-line pass/fail verdict shown in the terminal summary."""

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
