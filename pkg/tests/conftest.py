import numpy as np
import pytest

from bblab import GridFunction


def random_staircase(rng, n_min=4, n_max=24, zero_frac=0.25, origin=0.0, spacing=0.1):
    """Random 1-D staircase with some zero cells (support nonempty)."""
    n = int(rng.integers(n_min, n_max + 1))
    vals = rng.uniform(0.1, 2.0, size=n)
    vals[rng.random(n) < zero_frac] = 0.0
    if not vals.any():
        vals[int(rng.integers(0, n))] = 1.0
    return GridFunction(1, (origin,), spacing, vals)


def random_blob_2d(rng, n=12, spacing=0.1):
    vals = rng.uniform(0.0, 1.0, size=(n, n))
    vals[vals < 0.3] = 0.0
    if not vals.any():
        vals[n // 2, n // 2] = 1.0
    return GridFunction(2, (0.0, 0.0), spacing, vals)


def indicator(a, b, spacing, height=1.0):
    n = int(round((b - a) / spacing))
    return GridFunction(1, (a,), spacing, np.full(n, height))


def hat(width=2.0, height=1.0, spacing=0.01, origin=0.0):
    """Symmetric triangular hat on [origin, origin + width]."""
    n = int(round(width / spacing))
    x = (np.arange(n) + 0.5) * spacing
    vals = height * np.minimum(x, width - x) / (width / 2.0)
    return GridFunction(1, (origin,), spacing, vals)


def logconcave_bump(width=2.0, height=1.0, spacing=0.01, origin=0.0, sharp=3.0):
    n = int(round(width / spacing))
    x = (np.arange(n) + 0.5) * spacing - width / 2.0
    vals = height * np.exp(-sharp * x ** 2)
    return GridFunction(1, (origin,), spacing, vals)


def pconcave_bump(p, width=2.0, height=1.0, spacing=0.01, origin=0.0, sharp=3.0):
    """Smooth bump that is p-concave for the given p: its p-transform is a
    concave (p >= 0) or convex (p < 0) parabola.  Log-concave bump at p = 0."""
    n = int(round(width / spacing))
    u = ((np.arange(n) + 0.5) * spacing - width / 2.0) * (2.0 / width)
    if p > 0:
        vals = height * np.maximum(1.0 - u ** 2, 0.0) ** (1.0 / p)
    elif p == 0:
        vals = height * np.exp(-sharp * u ** 2)
    else:
        vals = height * (1.0 + sharp * u ** 2) ** (1.0 / p)
    return GridFunction(1, (origin,), spacing, vals)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
