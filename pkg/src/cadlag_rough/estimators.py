"""scikit-learn style wrappers: signature features along one path and a
linear signature regressor whose derivatives come from shifts of u."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin

from .signature import _cached
from .tensor_algebra import TruncatedTensor, shift_matrix, tensor_dim


class RankDeficiencyWarning(UserWarning):
    pass


class SignatureTransformer(TransformerMixin, BaseEstimator):
    """Maps times t to the level-N signature of ``path`` at t (all words up
    to length N, the empty word included)."""

    def __init__(self, N: int = 3, path=None):
        self.N = N
        self.path = path

    def fit(self, ts, y=None):
        if self.path is None:
            raise ValueError("SignatureTransformer needs a path")
        self.n_features_out_ = tensor_dim(self.path.d, self.N)
        return self

    def transform(self, ts):
        ts = np.asarray(ts, dtype=float).reshape(-1)
        return _cached(self.path, max(self.N, self.path.level)).values_at(ts)[:, :tensor_dim(self.path.d, self.N)]


class LinearSignatureRegressor(RegressorMixin, BaseEstimator):
    """F(t) ~ <u, S_t> by least squares over the words of length <= N.

    With ``derivative_weight > 0`` rows matching the first vertical
    derivative <u^(1)_a, S_t> = D F[a] are appended (a Sobolev-type fit).
    Rank-deficient designs fall back to the minimum-norm solution and warn.
    """

    def __init__(self, N: int = 3, path=None, derivative_weight: float = 0.0):
        self.N = N
        self.path = path
        self.derivative_weight = derivative_weight

    def fit(self, ts, y, dy=None):
        tr = SignatureTransformer(self.N, self.path).fit(ts)
        Phi = tr.transform(ts)
        rows, rhs = [Phi], [np.asarray(y, dtype=float).reshape(-1)]
        if self.derivative_weight > 0:
            if dy is None:
                raise ValueError("derivative rows need dy")
            d = self.path.d
            dy = np.asarray(dy, dtype=float).reshape(len(Phi), d)
            for a in range(d):
                rows.append(self.derivative_weight * self._shift_design(Phi, a))
                rhs.append(self.derivative_weight * dy[:, a])
        A = np.vstack(rows)
        b = np.concatenate(rhs)
        self.n_features_in_signature_ = A.shape[1]
        self.rank_ = int(np.linalg.matrix_rank(A))
        if self.rank_ < A.shape[1]:
            warnings.warn(f"signature design has rank {self.rank_} < {A.shape[1]}; using the minimum-norm solution",
                          RankDeficiencyWarning, stacklevel=2)
        coef, *_ = np.linalg.lstsq(A, b, rcond=None)
        self.coef_ = coef
        self.u_ = TruncatedTensor(self.path.d, self.N, coef)
        return self

    def _shift_design(self, Phi: np.ndarray, a: int) -> np.ndarray:
        """Design rows for <u^(1)_a, S_t>: the coefficient of word w in u
        contributes S_t[w'] whenever w = w' a."""
        d = self.path.d
        out = np.zeros_like(Phi)
        offs = [0]
        for n in range(self.N + 1):
            offs.append(offs[-1] + d**n)
        for n in range(1, self.N + 1):
            cols = offs[n] + np.arange(d ** (n - 1)) * d + a
            out[:, cols] = Phi[:, offs[n - 1]:offs[n]]
        return out

    def predict(self, ts):
        return SignatureTransformer(self.N, self.path).fit(ts).transform(ts) @ self.coef_

    def predict_derivative(self, k: int, ts):
        """k-th vertical derivative of the fitted functional, shape (n,)+(d,)*k."""
        ts = np.asarray(ts, dtype=float).reshape(-1)
        d = self.path.d
        if k > self.N:
            return np.zeros((ts.size,) + (d,) * k)
        M = shift_matrix(self.u_, k)
        S = _cached(self.path, max(self.N, self.path.level)).values_at(ts)[:, :M.shape[1]]
        return (S @ M.T).reshape((ts.size,) + (d,) * k)
