import numpy as np
import pytest

from cadlag_rough import fixtures
from cadlag_rough.functionals import Constant, LinearSig, RawLevy
from cadlag_rough.marcus import (
    MarcusPair,
    MarcusTransform,
    default_pair,
    marcus_transform,
    mu,
    pair_invariance_check,
    random_pair,
)
from cadlag_rough.paths import GroupPath, PiecewiseLinearMap, p_variation, tracking_jumps_extend
from cadlag_rough.tensor_algebra import TruncatedTensor, exp_trunc, homogeneous_norm_arrays, inverse_arrays, mul_arrays


def one_jump():
    return GroupPath.piecewise_linear([0, 0.5, 1], [[0, 0], [0.3, 0.1], [0.5, 0.6]], jumps={0.5: [1.0, 0.0]})


def test_continuous_identity_convention():
    X = fixtures.two_segment()
    tr = marcus_transform(X)
    ts = np.linspace(0, 1, 21)
    assert np.allclose(mu(tr, ts), ts)
    assert np.array_equal(tr.transformed.values_at(ts), X.values_at(ts))


def test_mu_single_jump_linear_psi():
    tr = MarcusTransform(one_jump(), MarcusPair.linear([0.5]))
    ts = np.array([0.0, 0.2, 0.49, 0.5, 0.7, 1.0])
    want = np.where(ts < 0.5, 2 / 3 * ts, 2 / 3 * (ts + 0.5))
    assert np.allclose(tr.mu(ts), want, atol=1e-15)
    assert tr.mu(0.5, side="left") == pytest.approx(1 / 3)
    assert tr.mu(1.0) == 1.0


def test_window_is_log_linear_bridge():
    X = one_jump()
    tr = MarcusTransform(X, MarcusPair.linear([0.5]))
    a, b = 1 / 3, 2 / 3
    left = X.eval_left(0.5).coeffs
    jump = TruncatedTensor.from_level1([1.0, 0.0])
    for theta in np.linspace(0, 1, 20):
        want = mul_arrays(left, exp_trunc(theta * jump).coeffs, 2, 1)
        got = tr.transformed.values_at([a + theta * (b - a)])[0]
        assert np.allclose(got, want, atol=1e-14)


def test_roundtrip_exact_at_breakpoints_and_interior():
    for X in (fixtures.two_jumps(), fixtures.levy_jump().lift(2), fixtures.dyadic_steps()):
        tr = MarcusTransform(X)
        assert tr.transformed.is_continuous()
        bp = X.times
        assert np.max(np.abs(tr.transformed.values_at(tr.mu(bp)) - X.values_at(bp))) < 1e-15
        ts = np.linspace(0.003, 0.997, 100)
        got = tr.transformed.values_at(tr.mu(ts))
        # coefficientwise: the norm's square root would turn 1e-16 area
        # rounding into 1e-8
        assert np.max(np.abs(got - X.values_at(ts))) < 1e-12
        inc = mul_arrays(inverse_arrays(X.values_at(ts), X.d, X.level), got, X.d, X.level)
        assert np.max(homogeneous_norm_arrays(inc, X.d, X.level)) < 1e-7


def test_mu_properties():
    X = fixtures.two_jumps()
    tr = MarcusTransform(X)
    ts = np.linspace(0, 1, 101)
    m = tr.mu(ts)
    assert m[0] == 0.0 and m[-1] == 1.0
    assert np.all(np.diff(m) > 0)
    jumps = tr.mu(X.jump_times) - tr.mu(X.jump_times, side="left")
    assert np.all(jumps > 0)


def test_default_pair_straightens_tracking_letter():
    Xh = tracking_jumps_extend(fixtures.two_jumps())
    Z = MarcusTransform(Xh).transformed
    us = np.linspace(0, 1, 57)
    assert np.allclose(Z.level1_at(us)[:, 0], us, atol=1e-14)


def test_default_weights_follow_jump_norm():
    X = fixtures.two_jumps()
    r = default_pair(X).r
    norms = np.linalg.norm(X.jump_vectors(), axis=1)
    assert (r[0] > r[1]) == (norms[0] > norms[1])
    assert sorted(r, reverse=True) == [0.25, 0.125]


def test_pair_validation():
    with pytest.raises(ValueError):
        MarcusPair.linear([0.0])
    with pytest.raises(ValueError):
        MarcusPair((0.5,), PiecewiseLinearMap.identity())
    with pytest.raises(ValueError):
        MarcusTransform(fixtures.two_jumps(), MarcusPair.linear([0.5]))


def test_two_pairs_differ_by_reparametrization(rng):
    X = fixtures.two_jumps().lift(2)
    A = MarcusTransform(X, default_pair(X))
    B = MarcusTransform(X, random_pair(X, rng))
    # knots of the tau timelines, matched across the two pairs
    bp = X.times
    ka = np.sort(np.concatenate([A.tau(bp, "left"), A.tau(bp)]))
    kb = np.sort(np.concatenate([B.tau(bp, "left"), B.tau(bp)]))
    us = np.linspace(0, 1, 101)
    s_b = np.asarray(B.pair.psi(us))
    u_a = np.asarray(A.pair.psi.inverse()(np.interp(s_b, kb, ka)))
    va = A.transformed.values_at(np.clip(u_a, 0, 1))
    vb = B.transformed.values_at(us)
    assert np.max(np.abs(va - vb)) < 1e-10


def test_one_variation_adds_jump_lengths():
    X = fixtures.two_jumps()
    Z = MarcusTransform(X).transformed
    cont = sum(np.linalg.norm(s[1:]) for s in X.seg_logs)
    jumps = np.sum(np.linalg.norm(X.jump_vectors(), axis=1))
    assert p_variation(Z, 1.0) == pytest.approx(cont + jumps, rel=1e-12)


def test_pair_invariance_examples(rng):
    X = fixtures.two_jumps()
    a, b = default_pair(X), random_pair(X, rng)
    F = LinearSig("(0,1) - 0.5*(1,1,0) + (1)")
    assert pair_invariance_check(F, X, a, b) < 1e-10
    assert pair_invariance_check(Constant(2.0), X, a, b) == 0.0


def test_raw_levy_is_detected():
    X = fixtures.pure_jump()
    gap = pair_invariance_check(RawLevy(0, 1), X, None, default_pair(X))
    dx = X.jump_vectors()[0]
    assert gap >= 0.5 * abs(dx[0] * dx[1]) - 1e-12
