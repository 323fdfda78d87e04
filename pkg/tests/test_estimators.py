import numpy as np
import pytest
from sklearn.base import clone

from cadlag_rough import fixtures
from cadlag_rough.estimators import LinearSignatureRegressor, RankDeficiencyWarning, SignatureTransformer
from cadlag_rough.signature import signature
from cadlag_rough.tensor_algebra import TruncatedTensor, shift_matrix
from cadlag_rough.verify import extended

TS = np.linspace(0.0, 1.0, 41)


@pytest.fixture
def path():
    return extended(fixtures.two_segment())


def test_sklearn_params_and_clone(path):
    reg = LinearSignatureRegressor(N=2, path=path, derivative_weight=0.3)
    assert reg.get_params()["derivative_weight"] == 0.3
    c = clone(reg)
    assert c.N == 2 and c.path.d == path.d and not hasattr(c, "coef_")


def test_transformer_matches_signature(path):
    tr = SignatureTransformer(N=3, path=path).fit(TS)
    Phi = tr.transform(TS)
    assert Phi.shape == (TS.size, tr.n_features_out_) == (TS.size, 40)
    S = signature(path, 3)
    for i in (0, 17, 40):
        assert np.allclose(Phi[i], S.value(TS[i]).coeffs, atol=1e-14)
    with pytest.raises(ValueError):
        SignatureTransformer(N=2).fit(TS)


def test_shift_design_matches_shift_matrix(path, rng):
    reg = LinearSignatureRegressor(N=3, path=path)
    Phi = SignatureTransformer(3, path).fit(TS).transform(TS)
    u = TruncatedTensor(3, 3, rng.normal(size=40))
    M = shift_matrix(u, 1)
    for a in range(3):
        direct = Phi[:, :M.shape[1]] @ M[a]
        assert np.allclose(reg._shift_design(Phi, a) @ u.coeffs, direct, atol=1e-13)


def test_fit_recovers_and_derivative_is_shift(path, rng):
    u = TruncatedTensor(3, 2, rng.normal(size=13))
    Phi = SignatureTransformer(2, path).fit(TS).transform(TS)
    y = Phi @ u.coeffs
    M = shift_matrix(u, 1)
    dy = Phi[:, :M.shape[1]] @ M.T
    with pytest.warns(RankDeficiencyWarning):
        reg = LinearSignatureRegressor(N=2, path=path, derivative_weight=0.5).fit(TS, y, dy)
    assert np.allclose(reg.predict(TS), y, atol=1e-12)
    assert np.allclose(reg.predict_derivative(1, TS), dy, atol=1e-10)
    assert reg.predict_derivative(3, TS).shape == (TS.size, 3, 3, 3)
    assert reg.score(TS, y) == pytest.approx(1.0)


def test_rank_deficiency_warns(path):
    y = np.sin(TS)
    with pytest.warns(RankDeficiencyWarning):
        LinearSignatureRegressor(N=3, path=path).fit(TS, y)


def test_derivative_rows_need_dy(path):
    with pytest.raises(ValueError):
        LinearSignatureRegressor(N=2, path=path, derivative_weight=0.1).fit(TS, np.zeros_like(TS))
