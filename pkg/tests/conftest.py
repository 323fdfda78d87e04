import itertools

import numpy as np
import pytest
from hypothesis import settings

from cadlag_rough.tensor_algebra import TruncatedTensor, exp_trunc, tensor_mul

settings.register_profile("pkg", max_examples=40, deadline=None)
settings.load_profile("pkg")


def random_group_element(rng, d, N, factors=3, scale=0.7):
    """Product of exponentials of level-1 elements: group-like by construction."""
    g = TruncatedTensor.unit(d, N)
    for _ in range(factors):
        g = tensor_mul(g, exp_trunc(TruncatedTensor.from_level1(rng.normal(scale=scale, size=d), N)))
    return g


def riemann_signature(points_fn, N, d, mesh=1e-4, rule="trapezoid"):
    """Iterated Riemann-Stieltjes sums of a level-1 path sampled by
    ``points_fn`` on a uniform grid of [0, 1].  ``rule`` picks the integrand
    value on each cell: the left endpoint, or the mean of both endpoints.
    Returns {word: value}."""
    n = int(round(1.0 / mesh))
    x = points_fn(np.linspace(0.0, 1.0, n + 1))
    dx = np.diff(x, axis=0)
    out = {(): 1.0}
    # cum[w][i] approximates the iterated integral over [0, s_i]
    cum = {(): np.ones(n + 1)}
    for k in range(1, N + 1):
        for w in itertools.product(range(d), repeat=k):
            prev = cum[w[:-1]]
            y = prev[:-1] if rule == "left" else 0.5 * (prev[:-1] + prev[1:])
            cum[w] = np.concatenate([[0.0], np.cumsum(y * dx[:, w[-1]])])
            out[w] = float(cum[w][-1])
    return out


def piecewise_points(times, pts):
    times = np.asarray(times, dtype=float)
    pts = np.asarray(pts, dtype=float)

    def f(ts):
        return np.stack([np.interp(ts, times, pts[:, j]) for j in range(pts.shape[1])], axis=-1)

    return f


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance lines collected by tests/test_acceptance.py, echoed at the end of the run
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
