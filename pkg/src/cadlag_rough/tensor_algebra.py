"""Truncated tensor algebra T^N(R^d) and its group of group-like elements.

Coefficients are stored densely, level by level, with words of a level in
lexicographic order (first letter most significant).  Letters are 0-based.
Every function here is pure; tensors are read-only after construction.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

Word = tuple


@lru_cache(maxsize=None)
def level_offsets(d: int, level: int) -> tuple:
    """Start offset of every level block, plus the total size at the end."""
    offs = [0]
    for k in range(level + 1):
        offs.append(offs[-1] + d**k)
    return tuple(offs)


def tensor_dim(d: int, level: int) -> int:
    return level_offsets(d, level)[-1]


def word_index(word: Sequence[int], d: int) -> int:
    """Flat position of ``word`` inside the dense coefficient vector."""
    n = len(word)
    idx = 0
    for a in word:
        if not 0 <= a < d:
            raise ValueError(f"letter {a} outside alphabet of size {d}")
        idx = idx * d + a
    return level_offsets(d, n)[n] + idx


def index_word(index: int, d: int) -> Word:
    n = 0
    while level_offsets(d, n + 1)[n + 1] <= index:
        n += 1
    rest = index - level_offsets(d, n)[n]
    letters = []
    for _ in range(n):
        rest, a = divmod(rest, d)
        letters.append(a)
    return tuple(reversed(letters))


@lru_cache(maxsize=None)
def all_words(d: int, level: int) -> tuple:
    out = [()]
    layer = [()]
    for _ in range(level):
        layer = [w + (a,) for w in layer for a in range(d)]
        out.extend(layer)
    return tuple(out)


def format_word(word: Sequence[int]) -> str:
    return "(" + ",".join(str(a) for a in word) + ")"


def parse_word(text: str) -> Word:
    s = text.strip()
    if not (s.startswith("(") and s.endswith(")")):
        raise ValueError(f"word must look like (i,j,...), got {text!r}")
    body = s[1:-1].strip()
    if not body:
        return ()
    return tuple(int(x) for x in body.split(","))


# ---------------------------------------------------------------------------
# raw array kernels; leading axes broadcast, the last axis holds coefficients


def _blocks(a: np.ndarray, d: int, level: int) -> list:
    offs = level_offsets(d, level)
    return [a[..., offs[k]:offs[k + 1]] for k in range(level + 1)]


def mul_arrays(a: np.ndarray, b: np.ndarray, d: int, level: int) -> np.ndarray:
    ab = _blocks(a, d, level)
    bb = _blocks(b, d, level)
    shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    out = np.zeros(shape + (tensor_dim(d, level),))
    offs = level_offsets(d, level)
    for n in range(level + 1):
        acc = out[..., offs[n]:offs[n + 1]]
        for i in range(n + 1):
            x, y = ab[i], bb[n - i]
            if i == 0:
                acc += x * y
            elif i == n:
                acc += x * y[..., :1]
            else:
                acc += (x[..., :, None] * y[..., None, :]).reshape(shape + (d**n,))
    return out


def _unit_array(d: int, level: int, shape=()) -> np.ndarray:
    out = np.zeros(tuple(shape) + (tensor_dim(d, level),))
    out[..., 0] = 1.0
    return out


def exp_arrays(b: np.ndarray, d: int, level: int) -> np.ndarray:
    """Truncated exponential of Lie-type arrays (scalar part ignored)."""
    x = np.array(b, dtype=float, copy=True)
    x[..., 0] = 0.0
    one = _unit_array(d, level, x.shape[:-1])
    r = one.copy()
    for k in range(level, 0, -1):
        r = one + mul_arrays(x, r, d, level) / k
    return r


def log_arrays(g: np.ndarray, d: int, level: int) -> np.ndarray:
    x = np.array(g, dtype=float, copy=True)
    x[..., 0] = 0.0
    acc = x.copy()
    p = x
    for k in range(2, level + 1):
        p = mul_arrays(p, x, d, level)
        acc = acc + ((-1) ** (k + 1) / k) * p
    return acc


def inverse_arrays(g: np.ndarray, d: int, level: int) -> np.ndarray:
    x = np.array(g, dtype=float, copy=True)
    x[..., 0] = 0.0
    one = _unit_array(d, level, x.shape[:-1])
    r = one.copy()
    for _ in range(level):
        r = one - mul_arrays(x, r, d, level)
    return r


def exp_powers(v: np.ndarray, d: int, level: int) -> np.ndarray:
    """Stack of v^k / k! for k = 0..level; exp(theta v) = sum theta^k row_k."""
    x = np.array(v, dtype=float, copy=True)
    x[..., 0] = 0.0
    rows = [_unit_array(d, level, x.shape[:-1])]
    for k in range(1, level + 1):
        rows.append(mul_arrays(rows[-1], x, d, level) / k)
    return np.stack(rows, axis=-2)


def embed_array(a: np.ndarray, d: int, level: int, new_level: int) -> np.ndarray:
    """Pad with zeros (or truncate) to another truncation level."""
    n_new = tensor_dim(d, new_level)
    n_old = tensor_dim(d, level)
    if new_level <= level:
        return np.array(a[..., :n_new], dtype=float)
    out = np.zeros(a.shape[:-1] + (n_new,))
    out[..., :n_old] = a
    return out


# ---------------------------------------------------------------------------


class TruncatedTensor:
    """Element of T^N(R^d) with dense, read-only coefficients."""

    __slots__ = ("d", "level", "coeffs")

    def __init__(self, d: int, level: int, coeffs=None):
        if d < 1 or level < 0:
            raise ValueError("need d >= 1 and level >= 0")
        size = tensor_dim(d, level)
        if coeffs is None:
            arr = np.zeros(size)
        else:
            arr = np.array(coeffs, dtype=float).reshape(-1)
            if arr.size != size:
                raise ValueError(f"expected {size} coefficients for d={d}, N={level}, got {arr.size}")
        arr.setflags(write=False)
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "level", int(level))
        object.__setattr__(self, "coeffs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("TruncatedTensor is immutable")

    # constructors
    @classmethod
    def zero(cls, d: int, level: int) -> "TruncatedTensor":
        return cls(d, level)

    @classmethod
    def unit(cls, d: int, level: int) -> "TruncatedTensor":
        c = np.zeros(tensor_dim(d, level))
        c[0] = 1.0
        return cls(d, level, c)

    @classmethod
    def basis(cls, word: Sequence[int], d: int, level: int) -> "TruncatedTensor":
        if len(word) > level:
            raise ValueError("word longer than truncation level")
        c = np.zeros(tensor_dim(d, level))
        c[word_index(tuple(word), d)] = 1.0
        return cls(d, level, c)

    @classmethod
    def from_dict(cls, terms: Mapping, d: int, level: int) -> "TruncatedTensor":
        c = np.zeros(tensor_dim(d, level))
        for w, val in terms.items():
            w = parse_word(w) if isinstance(w, str) else tuple(w)
            if len(w) > level:
                raise ValueError(f"word {w} longer than level {level}")
            c[word_index(w, d)] += float(val)
        return cls(d, level, c)

    @classmethod
    def from_level1(cls, vec: Sequence[float], level: int = 1) -> "TruncatedTensor":
        v = np.asarray(vec, dtype=float).reshape(-1)
        c = np.zeros(tensor_dim(v.size, level))
        c[1:1 + v.size] = v
        return cls(v.size, level, c)

    # views
    def block(self, n: int) -> np.ndarray:
        """Projection pi_n as a flat array of length d^n."""
        if not 0 <= n <= self.level:
            raise ValueError(f"level {n} outside 0..{self.level}")
        offs = level_offsets(self.d, self.level)
        return self.coeffs[offs[n]:offs[n + 1]]

    def tensor_block(self, n: int) -> np.ndarray:
        return self.block(n).reshape((self.d,) * n)

    @property
    def scalar(self) -> float:
        return float(self.coeffs[0])

    def __getitem__(self, word) -> float:
        w = parse_word(word) if isinstance(word, str) else tuple(word)
        if len(w) > self.level:
            return 0.0
        return float(self.coeffs[word_index(w, self.d)])

    def items(self, tol: float = 0.0):
        for i, c in enumerate(self.coeffs):
            if abs(c) > tol:
                yield index_word(i, self.d), float(c)

    def degree(self) -> int:
        """Length of the longest word with a nonzero coefficient (-1 for 0)."""
        nz = np.flatnonzero(self.coeffs)
        if nz.size == 0:
            return -1
        return len(index_word(int(nz[-1]), self.d))

    def with_level(self, level: int) -> "TruncatedTensor":
        return TruncatedTensor(self.d, level, embed_array(self.coeffs, self.d, self.level, level))

    # arithmetic
    def _check(self, other: "TruncatedTensor"):
        if not isinstance(other, TruncatedTensor):
            raise TypeError("expected a TruncatedTensor")
        if other.d != self.d or other.level != self.level:
            raise ValueError(
                f"shape mismatch: (d={self.d}, N={self.level}) vs (d={other.d}, N={other.level})")

    def __add__(self, other):
        self._check(other)
        return TruncatedTensor(self.d, self.level, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return TruncatedTensor(self.d, self.level, self.coeffs - other.coeffs)

    def __neg__(self):
        return TruncatedTensor(self.d, self.level, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, TruncatedTensor):
            return NotImplemented
        return TruncatedTensor(self.d, self.level, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return TruncatedTensor(self.d, self.level, self.coeffs / float(scalar))

    def __matmul__(self, other):
        return tensor_mul(self, other)

    def __eq__(self, other):
        if not isinstance(other, TruncatedTensor):
            return NotImplemented
        return (self.d, self.level) == (other.d, other.level) and bool(
            np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.d, self.level, self.coeffs.tobytes()))

    def allclose(self, other: "TruncatedTensor", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.max(np.abs(self.coeffs - other.coeffs), initial=0.0) <= atol)

    def __repr__(self):
        terms = " + ".join(f"{c:.6g}*e{format_word(w)}" for w, c in self.items(1e-15)) or "0"
        return f"TruncatedTensor(d={self.d}, N={self.level}: {terms})"

    # serialization
    def to_json(self) -> dict:
        return {"d": self.d, "level": self.level, "coeffs": [float(c) for c in self.coeffs]}

    @classmethod
    def from_json(cls, obj) -> "TruncatedTensor":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(int(obj["d"]), int(obj["level"]), obj["coeffs"])


GroupElement = TruncatedTensor


def tensor_mul(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    """Truncated tensor product: (a b)_w = sum over splittings w = uv of a_u b_v."""
    a._check(b)
    return TruncatedTensor(a.d, a.level, mul_arrays(a.coeffs, b.coeffs, a.d, a.level))


def _require_scalar(g: TruncatedTensor, value: float, what: str):
    if abs(g.scalar - value) > 1e-12:
        raise ValueError(f"{what} requires scalar part {value}, got {g.scalar}")


def inverse(g: TruncatedTensor) -> TruncatedTensor:
    """Inverse of an element with scalar part 1: sum_k (-1)^k b^k with b = g - 1."""
    _require_scalar(g, 1.0, "inverse")
    return TruncatedTensor(g.d, g.level, inverse_arrays(g.coeffs, g.d, g.level))


def exp_trunc(b: TruncatedTensor) -> TruncatedTensor:
    _require_scalar(b, 0.0, "exp")
    return TruncatedTensor(b.d, b.level, exp_arrays(b.coeffs, b.d, b.level))


def log_trunc(g: TruncatedTensor) -> TruncatedTensor:
    _require_scalar(g, 1.0, "log")
    return TruncatedTensor(g.d, g.level, log_arrays(g.coeffs, g.d, g.level))


def is_group_like(g: TruncatedTensor, tol: float = 1e-12) -> bool:
    """Membership test for G^N.  Only decided for N <= 2; higher levels are
    trusted by construction and only the scalar part is checked."""
    if abs(g.scalar - 1.0) > tol:
        return False
    if g.level < 2:
        return True
    a = log_trunc(g).tensor_block(2)
    return bool(np.max(np.abs(a + a.T)) <= tol)


def shuffle(I: Sequence[int], J: Sequence[int]) -> Counter:
    """Shuffle product of two words as a multiset of words."""
    return Counter(_shuffle(tuple(I), tuple(J)))


@lru_cache(maxsize=4096)
def _shuffle(I: Word, J: Word) -> dict:
    if not I:
        return {J: 1}
    if not J:
        return {I: 1}
    out: Counter = Counter()
    a, b = I[-1], J[-1]
    for w, m in _shuffle(I[:-1], J).items():
        out[w + (a,)] += m
    for w, m in _shuffle(I, J[:-1]).items():
        out[w + (b,)] += m
    return dict(out)


def shuffle_product(u: TruncatedTensor, v: TruncatedTensor, level: int | None = None) -> TruncatedTensor:
    """Bilinear extension of the word shuffle, truncated at ``level``."""
    if u.d != v.d:
        raise ValueError("alphabet mismatch")
    level = u.level + v.level if level is None else level
    c = np.zeros(tensor_dim(u.d, level))
    for I, a in u.items():
        for J, b in v.items():
            if len(I) + len(J) > level:
                continue
            for w, m in _shuffle(I, J).items():
                c[word_index(w, u.d)] += m * a * b
    return TruncatedTensor(u.d, level, c)


class Shift:
    """The k-th shift of u: for each word I of length k, the tensor
    u^(k)_I = sum_J u_{JI} e_J (truncated at level N - k)."""

    def __init__(self, u: TruncatedTensor, k: int):
        if not 0 <= k <= u.level:
            raise ValueError(f"shift order {k} outside 0..{u.level}")
        self.u = u
        self.k = k
        self.d = u.d
        self.level = u.level - k
        self.matrix = shift_matrix(u, k)

    def __getitem__(self, word) -> TruncatedTensor:
        w = parse_word(word) if isinstance(word, str) else tuple(word)
        if len(w) != self.k:
            raise ValueError(f"index word must have length {self.k}")
        row = 0
        for a in w:
            row = row * self.d + a
        return TruncatedTensor(self.d, self.level, self.matrix[row])

    def words(self):
        return all_words(self.d, self.k)[-(self.d**self.k):] if self.k else ((),)

    def pair(self, g: TruncatedTensor) -> np.ndarray:
        """<u^(k)_I, g> for all I, shaped (d,)*k."""
        n = min(self.matrix.shape[1], g.coeffs.size)
        vals = self.matrix[:, :n] @ g.coeffs[:n]
        return vals.reshape((self.d,) * self.k)


def shift_matrix(u: TruncatedTensor, k: int) -> np.ndarray:
    """Dense form of the k-th shift: rows are suffix words I (|I| = k),
    columns index prefixes J in T^{N-k}."""
    d, N = u.d, u.level
    offs = level_offsets(d, N)
    out = np.zeros((d**k, tensor_dim(d, N - k)))
    suffixes = d**k
    for n in range(N - k + 1):
        block = u.coeffs[offs[n + k]:offs[n + k + 1]].reshape(d**n, suffixes)
        start = level_offsets(d, N - k)[n]
        out[:, start:start + d**n] = block.T
    return out


def shift(u: TruncatedTensor, k: int) -> Shift:
    if k > u.level:
        raise ValueError(f"shift order {k} exceeds level {u.level}")
    return Shift(u, k)


def homogeneous_norm(g: TruncatedTensor) -> float:
    """max_n (n! |pi_n(log g)|)^(1/n): a homogeneous surrogate for the
    Carnot-Caratheodory norm."""
    _require_scalar(g, 1.0, "homogeneous_norm")
    return homogeneous_norm_arrays(g.coeffs[None, :], g.d, g.level)[0]


def homogeneous_norm_arrays(g: np.ndarray, d: int, level: int) -> np.ndarray:
    lg = log_arrays(np.atleast_2d(g), d, level)
    offs = level_offsets(d, level)
    best = np.zeros(lg.shape[0])
    for n in range(1, level + 1):
        nrm = np.linalg.norm(lg[:, offs[n]:offs[n + 1]], axis=1)
        best = np.maximum(best, (math.factorial(n) * nrm) ** (1.0 / n))
    return best


def pair(u: TruncatedTensor, g: TruncatedTensor) -> float:
    """<u, g> = sum_I u_I g_I, truncated at the smaller level."""
    if u.d != g.d:
        raise ValueError("alphabet mismatch")
    n = tensor_dim(u.d, min(u.level, g.level))
    return float(u.coeffs[:n] @ g.coeffs[:n])


def lie_from_level(vec: Sequence[float], area: np.ndarray | None, level: int) -> TruncatedTensor:
    """Lie element with level-1 part ``vec`` and, at level 2, antisymmetric
    part ``area`` (a d x d matrix).  Convenience for building logs."""
    v = np.asarray(vec, dtype=float)
    d = v.size
    c = np.zeros(tensor_dim(d, level))
    c[1:1 + d] = v
    if area is not None:
        if level < 2:
            raise ValueError("area needs level >= 2")
        a = np.asarray(area, dtype=float)
        if np.max(np.abs(a + a.T), initial=0.0) > 1e-12:
            raise ValueError("level-2 log block must be antisymmetric")
        offs = level_offsets(d, level)
        c[offs[2]:offs[3]] = a.reshape(-1)
    return TruncatedTensor(d, level, c)


def words_up_to(d: int, level: int) -> Iterable[Word]:
    return all_words(d, level)
