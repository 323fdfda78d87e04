"""Truncated signatures of piecewise log-linear cadlag rough paths.

The level-N signature is the ordered product of exp^N of the (zero-padded)
piece logs: segments and jumps alike.  This is the closed-form solution of the
Marcus equation for this path class, and it meets the minimal-jump condition
log^N(jump of the signature) = padded log of the path jump.
"""

from __future__ import annotations

import io

import numpy as np

from .paths import GroupPath
from .tensor_algebra import (
    TruncatedTensor,
    all_words,
    embed_array,
    exp_arrays,
    format_word,
    inverse_arrays,
    mul_arrays,
    tensor_dim,
)


class SignaturePath:
    """Level-N signature of a GroupPath, cached at breakpoints."""

    def __init__(self, source: GroupPath, N: int):
        if N < source.level:
            raise ValueError("signature level below the path level")
        self.source, self.N, self.d = source, int(N), source.d
        X = source
        self.seg_logs = embed_array(X.seg_logs, X.d, X.level, N)
        self.jump_logs = embed_array(X.jump_logs, X.d, X.level, N)
        seg_exp = exp_arrays(self.seg_logs, X.d, N)
        jump_exp = exp_arrays(self.jump_logs, X.d, N)
        D = tensor_dim(X.d, N)
        left = np.zeros((X.times.size, D))
        right = np.zeros_like(left)
        left[0, 0] = right[0, 0] = 1.0
        for k in range(1, X.times.size):
            left[k] = mul_arrays(right[k - 1], seg_exp[k - 1], X.d, N)
            right[k] = mul_arrays(left[k], jump_exp[k], X.d, N) if X._has_jump(k) else left[k]
        self.left_values, self.right_values = left, right

    @property
    def dim(self) -> int:
        return tensor_dim(self.d, self.N)

    @property
    def times(self):
        return self.source.times

    def values_at(self, ts, side: str = "right") -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        flat = np.atleast_1d(ts)
        if np.any(flat < 0) or np.any(flat > 1):
            raise ValueError("times must lie in [0, 1]")
        X = self.source
        k = X._locate(flat)
        at_bp = X.times[k] == flat
        out = np.empty((flat.size, self.dim))
        out[at_bp] = (self.left_values if side == "left" else self.right_values)[k[at_bp]]
        inner = ~at_bp
        if np.any(inner):
            for kk in np.unique(k[inner]):
                sel = inner & (k == kk)
                theta = (flat[sel] - X.times[kk]) / (X.times[kk + 1] - X.times[kk])
                e = exp_arrays(theta[:, None] * self.seg_logs[kk], self.d, self.N)
                out[sel] = mul_arrays(self.right_values[kk], e, self.d, self.N)
        return out.reshape(ts.shape + (self.dim,))

    def value(self, t: float) -> TruncatedTensor:
        return TruncatedTensor(self.d, self.N, self.values_at(float(t)))

    def value_left(self, t: float) -> TruncatedTensor:
        return TruncatedTensor(self.d, self.N, self.values_at(float(t), side="left"))

    def increment(self, s: float, t: float) -> TruncatedTensor:
        if s > t:
            raise ValueError("increment needs s <= t")
        a = self.values_at(float(s))
        b = self.values_at(float(t))
        return TruncatedTensor(self.d, self.N, mul_arrays(inverse_arrays(a, self.d, self.N), b, self.d, self.N))

    def jump(self, t: float) -> TruncatedTensor:
        """Signature jump S_{t-}^{-1} S_t."""
        a = self.values_at(float(t), side="left")
        b = self.values_at(float(t))
        return TruncatedTensor(self.d, self.N, mul_arrays(inverse_arrays(a, self.d, self.N), b, self.d, self.N))

    def to_csv(self, ts, tol: float = 0.0) -> str:
        """Rows ``t,word,value`` in time order then word order."""
        ts = np.asarray(ts, dtype=float)
        vals = self.values_at(ts)
        words = [format_word(w) for w in all_words(self.d, self.N)]
        buf = io.StringIO()
        buf.write("t,word,value\n")
        for t, row in zip(ts, vals):
            for w, v in zip(words, row):
                if abs(v) >= tol:
                    buf.write(f"{float(t)!r},\"{w}\",{float(v)!r}\n")
        return buf.getvalue()


def signature(X: GroupPath, N: int | None = None) -> SignaturePath:
    """Level-N signature path (default N = level + 2); cached on the path."""
    N = X.level + 2 if N is None else int(N)
    if N <= X.level:
        raise ValueError("signature level must exceed the path level")
    return _cached(X, N)


def _cached(X: GroupPath, N: int) -> SignaturePath:
    """Signature with N >= path level; used internally where N may equal it."""
    cache = X.__dict__.setdefault("_sig_cache", {})
    if N not in cache:
        cache[N] = SignaturePath(X, N)
    return cache[N]


def sig_increment(S: SignaturePath, s: float, t: float) -> TruncatedTensor:
    return S.increment(s, t)


def linear_functional(u: TruncatedTensor):
    """F^u(t, X) = <u, signature of X at t>, with closed-form derivatives."""
    from .functionals import LinearSig

    return LinearSig(u)
