import math

import numpy as np
import pytest

from gradlab import GradientVector, SpectralProblem


def ulp_diff(a: float, b: float) -> float:
    """Distance between two doubles in units of the larger one's ulp."""
    if a == b:
        return 0.0
    return abs(a - b) / np.spacing(max(abs(a), abs(b)))


def assert_ulp(a: float, b: float, max_ulp: float = 4.0):
    d = ulp_diff(a, b)
    assert d <= max_ulp, f"{a!r} vs {b!r}: {d:.1f} ulp > {max_ulp}"


@pytest.fixture
def problem3():
    """The diag(1, 8, 16) problem used throughout."""
    return SpectralProblem(np.array([1.0, 8.0, 16.0]))


@pytest.fixture
def g0_example(problem3):
    """Start gradient (1, sqrt(40), sqrt(40)) for the 3-d counterexample."""
    return GradientVector(np.array([1.0, math.sqrt(40.0), math.sqrt(40.0)]), 0)


def random_problem(rng, n=None, kappa=None, spacing="log"):
    """Seeded random spectrum with exact endpoints 1 and kappa."""
    if n is None:
        n = int(rng.integers(2, 12))
    if kappa is None:
        kappa = float(rng.choice([10.0, 100.0, 1000.0]))
    if spacing == "log":
        lam = np.logspace(0.0, math.log10(kappa), n)
    else:
        lam = np.sort(rng.uniform(1.0, kappa, n))
    lam[0] = 1.0
    lam[-1] = kappa
    return SpectralProblem(lam)
