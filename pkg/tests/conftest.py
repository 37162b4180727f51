import numpy as np
import pytest

from deltavar import GridFunction, make_qscale, make_uniform

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def unit5():
    """The grid {1, 2, 3, 4, 5}."""
    return make_uniform(1.0, 5.0, 4)


@pytest.fixture
def q2():
    """The grid {1, 2, 4, 8}."""
    return make_qscale(1.0, 2.0, 3)


def grid(scale, values, lo=0):
    values = np.asarray(values, dtype=float)
    return GridFunction(scale, lo, lo + values.size - 1, values)


_SLOT_FORMS = ("{u}", "{u}^2", "{u}^3", "sin({u})", "cos({u})", "exp(0.3*{u})")
_TIME_FORMS = ("1", "t", "sin(t)", "cos(0.5*t)", "(1 + 0.1*t)")


def random_lagrangian(rng: np.random.Generator, r: int, terms: int = 5) -> str:
    """Polynomial/trigonometric mixture in t and u0..ur touching every slot."""
    parts = []
    for k in range(terms):
        coef = float(rng.uniform(0.2, 2.0) * rng.choice([-1, 1]))
        slot = k if k <= r else int(rng.integers(0, r + 1))
        factor = rng.choice(_SLOT_FORMS).format(u=f"u{slot}")
        tf = rng.choice(_TIME_FORMS)
        if rng.random() < 0.4:
            other = f"u{int(rng.integers(0, r + 1))}"
            factor = f"{factor}*{other}"
        parts.append(f"{coef!r}*{tf}*{factor}")
    return " + ".join(parts)
