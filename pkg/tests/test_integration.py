import math

import numpy as np
import pytest

from cadlag_rough import fixtures
from cadlag_rough.functionals import Compose, LinearSig
from cadlag_rough.integration import (
    ControlledPath,
    MeshSchedule,
    functional_integrand,
    functional_pair,
    jump_compensator,
    parallel_map,
    remainder,
    rough_integral,
    worker_count,
    young_integral,
)
from cadlag_rough.paths import GroupPath, PiecewiseLinearMap, oscillatory_driver, time_extend

FAST = MeshSchedule(levels=9)


def identity_pair(d):
    """Y = X as a 1 x d map, Y' = identity."""
    return lambda X: ControlledPath(lambda ts: X.level1_at(ts)[:, None, :],
                                    lambda ts: np.broadcast_to(np.eye(d), (len(ts), 1, d, d)))


# ------------------------------------------------------------- schedule


def test_schedule_nested_and_contains_required():
    for kind in ("interval", "dyadic"):
        fine, idx = MeshSchedule(levels=5, kind=kind).grids(1.0, [0.3, 0.7])
        for a, b in zip(idx[:-1], idx[1:]):
            assert set(a.tolist()) <= set(b.tolist())
        for i in idx:
            pts = fine[i]
            assert 0.3 in pts and 0.7 in pts and pts[0] == 0.0 and pts[-1] == 1.0


def test_schedule_halves_mesh():
    fine, idx = MeshSchedule(levels=6).grids(1.0, [0.3])
    m = MeshSchedule().mesh_sizes(fine, idx)
    assert np.allclose(m[:-1] / m[1:], 2.0)
    with pytest.raises(ValueError):
        MeshSchedule(levels=1)
    with pytest.raises(ValueError):
        MeshSchedule(kind="random")


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("CADLAG_ROUGH_THREADS", "3")
    assert worker_count() == 3
    assert parallel_map(lambda x: x * x, [1, 2, 3, 4]) == [1, 4, 9, 16]


# ------------------------------------------------------------- Young


def test_zero_integrand():
    X = fixtures.two_jumps()
    res = young_integral(lambda ts: np.zeros((len(ts), 2)), X, 1.0, FAST)
    assert res.value == 0.0 and res.converged


def test_s_ds_is_half():
    Xh = time_extend(fixtures.two_segment())
    res = young_integral(lambda ts: np.stack([ts, 0 * ts, 0 * ts], -1), Xh, 1.0)
    assert abs(res.value[0] - 0.5) < 1e-12
    assert abs(res.raw[0] - 0.5) < 1e-4


def test_oscillatory_benchmark():
    X = oscillatory_driver(8)
    res = young_integral(lambda ts: np.stack([X.level1_at(ts)[:, 1], 0 * ts], -1), X, 1.0)
    assert res.meshes[-1] <= 1e-4
    assert abs(res.value[0] - 2 * math.pi) < 1e-3
    assert res.rate >= 0.9


def test_linear_and_additive():
    X = fixtures.two_jumps()
    Y1 = functional_integrand(LinearSig("(0,1)"), X)
    Y2 = functional_integrand(Compose("sin", "(1)"), X)
    a = young_integral(Y1, X, 1.0, FAST).raw
    b = young_integral(Y2, X, 1.0, FAST).raw
    ab = young_integral(lambda ts: 2 * Y1(ts) - 3 * Y2(ts), X, 1.0, FAST).raw
    assert abs(ab - (2 * a - 3 * b)).max() < 1e-10
    # split at a point every grid contains
    whole = young_integral(Y1, X, 1.0, FAST, required=[0.5]).raw
    left = young_integral(Y1, X, 0.5, FAST).raw
    right = young_integral(lambda ts: Y1(ts), X.refine([0.5]), 1.0, FAST, required=[0.5]).raw - young_integral(
        Y1, X, 0.5, FAST).raw
    assert abs(whole - (left + right)).max() < 1e-10


def test_reparametrization_invariance():
    X = fixtures.two_jumps()
    phi = PiecewiseLinearMap((0.0, 0.5, 1.0), (0.0, 0.3, 1.0))
    Xp = X.reparametrize(phi)
    F = Compose("sin", "(0,1) + (1)")
    a = young_integral(functional_integrand(F, X), X, 0.3).value
    b = young_integral(functional_integrand(F, Xp), Xp, 0.5).value
    assert abs(a - b).max() < 1e-8


def test_table_format():
    X = fixtures.two_segment()
    res = young_integral(lambda ts: X.level1_at(ts), X, 1.0, MeshSchedule(levels=3))
    lines = res.table().splitlines()
    assert lines[0] == "mesh,value,richardson,diff"
    assert len(lines) == 4
    assert lines[1].endswith(",")


# ------------------------------------------------------------- rough


def test_rough_zero():
    X = fixtures.area_path()
    cp = ControlledPath(lambda ts: np.zeros((len(ts), 1, 2)), lambda ts: np.zeros((len(ts), 1, 2, 2)))
    assert rough_integral(cp, X, 1.0, FAST).value == 0.0


def test_rough_needs_level2():
    with pytest.raises(ValueError):
        rough_integral(identity_pair(2)(fixtures.two_segment()), fixtures.two_segment())


def test_lemma_young_plus_half_jumps(rng):
    """Lifted finite-variation path: rough = Young + 1/2 sum Y'(dX)^2."""
    for _ in range(10):
        X = fixtures.random_jump_path(rng, n=4, d=2, n_jumps=2)
        X2 = X.lift(2)
        cp = identity_pair(2)(X2)
        rough = rough_integral(cp, X2).value[0]
        young = young_integral(lambda ts: X.level1_at(ts), X).value[0]
        jv = X.jump_vectors()
        assert abs(rough - (young + 0.5 * np.sum(jv * jv))) < 1e-6


def test_lemma_with_functional_pair(rng):
    X = fixtures.random_jump_path(rng, n=3, d=2, n_jumps=2)
    X2 = X.lift(2)
    F = Compose("sin", "(0,1) + (1)")
    rough = rough_integral(functional_pair(F, X2), X2).value[0]
    young = young_integral(functional_integrand(F, X), X).value[0]
    ts = X.jump_times
    D2 = F.derivatives(2, ts, X, side="left")
    corr = 0.5 * np.einsum("nab,na,nb->", D2, X.jump_vectors(), X.jump_vectors())
    assert abs(rough - (young + corr)) < 1e-6


def test_signature_functional_pair_on_area_path():
    """<u, S_1> - <u, S_0> = rough integral of (<u^(1), S>, <u^(2), S>)."""
    X = fixtures.area_path()
    F = LinearSig("(0,1) - 0.5*(1,1,0) + (1,0)")
    res = rough_integral(functional_pair(F, X), X)
    assert abs(res.value[0] - (F.value(1.0, X) - F.value(0.0, X))) < 1e-6


# ------------------------------------------------------------- compensator


def test_compensator_continuous_is_zero():
    assert jump_compensator(LinearSig("(0,1)"), fixtures.two_segment()) == 0.0


def test_compensator_sin_of_pure_jump():
    X = GroupPath.piecewise_linear([0, 0.3, 0.8, 1], [[0]] * 4, jumps={0.3: [0.7], 0.8: [-1.2]})
    F = Compose("sin", "(0)")
    z = X.level1_at([0.3, 0.8])[:, 0]
    zl = X.level1_at([0.3, 0.8], "left")[:, 0]
    want = np.sum(np.sin(z) - np.sin(zl) - np.cos(zl) * (z - zl))
    assert jump_compensator(F, X) == pytest.approx(want, abs=1e-14)


def test_compensator_linear_one_jump():
    X = fixtures.levy_jump()
    F = LinearSig("(0,1) + 2*(1,1,0)")
    t = 0.4
    grad = F.derivative(1, t, X, side="left")
    want = F.value(t, X) - F.values([t], X, "left")[0] - grad @ X.jump_vectors()[0]
    assert jump_compensator(F, X) == pytest.approx(want, abs=1e-14)
    assert jump_compensator(F, X, t=0.3) == 0.0


# ------------------------------------------------------------- remainders


def test_remainder_linear_is_zero():
    X = fixtures.two_jumps()
    assert remainder(LinearSig("(1) - 2*(0)"), X, 0.2, 0.9) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        remainder(LinearSig("(1)"), X, 0.9, 0.2)


def test_remainder_quadratic():
    X = fixtures.two_jumps()
    F = Compose("square", "(0)")
    for s, t in ((0.1, 0.25), (0.2, 0.9), (0.5, 0.65)):
        dx = X.level1_at(t)[0] - X.level1_at(s)[0]
        assert remainder(F, X, s, t) == pytest.approx(dx**2, abs=1e-14)


def test_controlled_remainder_is_second_order():
    X = fixtures.area_path()
    cp = functional_pair(LinearSig("(0,1,1) - (1,0,1)"), X)
    ratios = []
    for h in (0.1, 0.03, 0.01, 0.003):
        inc = X.increment(0.6, 0.6 + h)
        norm = max(abs(inc[(0,)]), abs(inc[(1,)]), abs(inc[(0, 1)]) ** 0.5)
        ratios.append(np.abs(cp.remainder(X, 0.6, 0.6 + h)).max() / norm**2)
    assert max(ratios) < 10 and np.isfinite(ratios).all()
