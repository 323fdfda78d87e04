"""Cadlag weakly geometric rough paths built from log-linear segments and jumps.

A :class:`GroupPath` lives on [0, 1], starts at the unit and is stored by its
increments: one Lie element per inter-breakpoint interval (the path moves
log-linearly there) and one Lie element per jump.  Group values at breakpoints
are derived once at construction.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .tensor_algebra import (
    TruncatedTensor,
    all_words,
    embed_array,
    exp_arrays,
    homogeneous_norm_arrays,
    inverse_arrays,
    level_offsets,
    log_arrays,
    mul_arrays,
    tensor_dim,
    word_index,
)


class LowerBoundWarning(UserWarning):
    """Raised when a p-variation is only a grid lower bound."""


@dataclass(frozen=True)
class PiecewiseLinearMap:
    """Strictly increasing piecewise-linear map given by its knots."""

    x: tuple
    y: tuple

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ValueError("knots must be two 1-d sequences of equal length >= 2")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise ValueError("piecewise-linear map must be strictly increasing")
        object.__setattr__(self, "x", tuple(float(a) for a in x))
        object.__setattr__(self, "y", tuple(float(a) for a in y))

    @classmethod
    def identity(cls) -> "PiecewiseLinearMap":
        return cls((0.0, 1.0), (0.0, 1.0))

    @classmethod
    def from_function(cls, f, n: int = 16) -> "PiecewiseLinearMap":
        """Interpolate an increasing bijection of [0, 1] at n+1 uniform knots."""
        xs = np.linspace(0.0, 1.0, n + 1)
        ys = np.array([f(a) for a in xs], dtype=float)
        ys[0], ys[-1] = 0.0, 1.0
        return cls(tuple(xs), tuple(ys))

    def __call__(self, u):
        return np.interp(u, self.x, self.y)

    def inverse(self) -> "PiecewiseLinearMap":
        return PiecewiseLinearMap(self.y, self.x)

    @property
    def domain(self):
        return self.x[0], self.x[-1]

    @property
    def codomain(self):
        return self.y[0], self.y[-1]

    def to_json(self) -> dict:
        return {"x": list(self.x), "y": list(self.y)}

    @classmethod
    def from_json(cls, obj) -> "PiecewiseLinearMap":
        return cls(tuple(obj["x"]), tuple(obj["y"]))


@dataclass(frozen=True)
class PartitionSpec:
    """Partition recipe for [0, t]: ``uniform`` (parameter = number of
    intervals), ``dyadic`` (parameter = depth) or ``explicit`` (times)."""

    mode: str
    parameter: object

    def __post_init__(self):
        if self.mode not in ("uniform", "dyadic", "explicit"):
            raise ValueError(f"unknown partition mode {self.mode!r}")

    def points(self, t: float = 1.0, extra: Iterable[float] = ()) -> np.ndarray:
        if self.mode == "uniform":
            base = np.linspace(0.0, t, int(self.parameter) + 1)
        elif self.mode == "dyadic":
            n = 2 ** int(self.parameter)
            grid = np.arange(n + 1) / n
            base = grid[grid <= t]
        else:
            base = np.asarray(list(self.parameter), dtype=float)
            base = base[(base >= 0) & (base <= t)]
        pts = np.concatenate([base, [0.0, t], [e for e in extra if 0.0 <= e <= t]])
        return np.unique(pts)


def _lie_check(logs: np.ndarray, d: int, level: int, what: str):
    if np.any(np.abs(logs[..., 0]) > 0):
        raise ValueError(f"{what}: log must have zero scalar part")
    if level >= 2:
        offs = level_offsets(d, level)
        a = logs[..., offs[2]:offs[3]].reshape(logs.shape[:-1] + (d, d))
        if np.max(np.abs(a + np.swapaxes(a, -1, -2)), initial=0.0) > 1e-9:
            raise ValueError(f"{what}: level-2 block of a log must be antisymmetric")


class GroupPath:
    """Cadlag path [0, 1] -> G^level(R^d) made of log-linear pieces and jumps.

    ``times`` are the breakpoints 0 = t_0 < ... < t_m = 1, ``seg_logs[k]`` is
    the log-increment over [t_k, t_{k+1}] and ``jump_logs[k]`` the log of the
    jump at t_k (row 0 is always zero because X_0 = 1).
    """

    def __init__(self, d: int, level: int, times, seg_logs, jump_logs=None, *, tracking: bool = False):
        if level not in (1, 2):
            raise ValueError("path level must be 1 or 2")
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size < 2 or times[0] != 0.0 or times[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(times) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        D = tensor_dim(d, level)
        m = times.size - 1
        seg = np.array(seg_logs, dtype=float).reshape(m, D)
        jl = np.zeros((m + 1, D)) if jump_logs is None else np.array(jump_logs, dtype=float).reshape(m + 1, D)
        if np.any(jl[0] != 0):
            raise ValueError("a jump at time 0 would violate X_0 = 1")
        _lie_check(seg, d, level, "segment")
        _lie_check(jl, d, level, "jump")
        self.d, self.level, self.tracking = int(d), int(level), bool(tracking)
        self.times, self.seg_logs, self.jump_logs = times, seg, jl
        for a in (times, seg, jl):
            a.setflags(write=False)
        left = np.zeros((m + 1, D))
        right = np.zeros((m + 1, D))
        right[0, 0] = left[0, 0] = 1.0
        seg_exp = exp_arrays(seg, d, level)
        jump_exp = exp_arrays(jl, d, level)
        for k in range(1, m + 1):
            left[k] = mul_arrays(right[k - 1], seg_exp[k - 1], d, level)
            right[k] = mul_arrays(left[k], jump_exp[k], d, level) if self._has_jump(k) else left[k]
        self.left_values, self.right_values = left, right
        left.setflags(write=False)
        right.setflags(write=False)

    # ------------------------------------------------------------------ basics
    def _has_jump(self, k: int) -> bool:
        return bool(np.any(self.jump_logs[k] != 0))

    @property
    def n_pieces(self) -> int:
        return self.times.size - 1

    @property
    def dim(self) -> int:
        return tensor_dim(self.d, self.level)

    @property
    def jump_indices(self) -> np.ndarray:
        return np.flatnonzero(np.any(self.jump_logs != 0, axis=1))

    @property
    def jump_times(self) -> np.ndarray:
        return self.times[self.jump_indices]

    @property
    def breakpoints(self) -> np.ndarray:
        return self.times

    def is_continuous(self) -> bool:
        return self.jump_indices.size == 0

    def is_marcus_like(self, tol: float = 1e-12) -> bool:
        """Every jump has a log with vanishing level-2 block."""
        if self.level < 2:
            return True
        offs = level_offsets(self.d, self.level)
        return bool(np.max(np.abs(self.jump_logs[:, offs[2]:]), initial=0.0) <= tol)

    def jump_vectors(self) -> np.ndarray:
        """Level-1 jump sizes, one row per jump (in time order)."""
        return self.jump_logs[self.jump_indices, 1:1 + self.d]

    def jump_log(self, t: float) -> TruncatedTensor:
        k = np.searchsorted(self.times, t)
        if k < self.times.size and self.times[k] == t:
            return TruncatedTensor(self.d, self.level, self.jump_logs[k])
        return TruncatedTensor.zero(self.d, self.level)

    def _locate(self, ts: np.ndarray) -> np.ndarray:
        """Index k of the interval [t_k, t_{k+1}) containing each time (m at t = 1)."""
        return np.clip(np.searchsorted(self.times, ts, side="right") - 1, 0, self.n_pieces)

    def _check_times(self, ts):
        ts = np.asarray(ts, dtype=float)
        if np.any(ts < 0) or np.any(ts > 1):
            raise ValueError("times must lie in [0, 1]")
        return ts

    # ------------------------------------------------------------ evaluation
    def values_at(self, ts, side: str = "right") -> np.ndarray:
        """Group values (rows of coefficients) at the given times.
        ``side="left"`` returns left limits."""
        ts = self._check_times(ts)
        flat = np.atleast_1d(ts)
        out = np.empty((flat.size, self.dim))
        k = self._locate(flat)
        m = self.n_pieces
        at_bp = self.times[k] == flat
        if side == "left":
            out[at_bp] = self.left_values[k[at_bp]]
        else:
            out[at_bp] = self.right_values[k[at_bp]]
        inner = ~at_bp
        if np.any(inner):
            for kk in np.unique(k[inner]):
                sel = inner & (k == kk)
                theta = (flat[sel] - self.times[kk]) / (self.times[kk + 1] - self.times[kk])
                e = exp_arrays(theta[:, None] * self.seg_logs[kk], self.d, self.level)
                out[sel] = mul_arrays(self.right_values[kk], e, self.d, self.level)
        del m
        return out.reshape(np.shape(ts) + (self.dim,))

    def level1_at(self, ts, side: str = "right") -> np.ndarray:
        """Level-1 projection X^i_t (the R^d-valued trace)."""
        ts = self._check_times(ts)
        flat = np.atleast_1d(ts)
        k = self._locate(flat)
        base = (self.left_values if side == "left" else self.right_values)[k, 1:1 + self.d]
        inner = self.times[k] != flat
        out = base.copy()
        if np.any(inner):
            kk = k[inner]
            theta = (flat[inner] - self.times[kk]) / (self.times[kk + 1] - self.times[kk])
            out[inner] = self.right_values[kk, 1:1 + self.d] + theta[:, None] * self.seg_logs[kk, 1:1 + self.d]
        return out.reshape(np.shape(ts) + (self.d,))

    def eval(self, t: float) -> TruncatedTensor:
        return TruncatedTensor(self.d, self.level, self.values_at(float(t)))

    def eval_left(self, t: float) -> TruncatedTensor:
        return TruncatedTensor(self.d, self.level, self.values_at(float(t), side="left"))

    def increment(self, s: float, t: float) -> TruncatedTensor:
        """X_{s,t} = X_s^{-1} X_t."""
        if s > t:
            raise ValueError("increment needs s <= t")
        a = self.values_at(float(s))
        b = self.values_at(float(t))
        return TruncatedTensor(self.d, self.level, mul_arrays(inverse_arrays(a, self.d, self.level), b, self.d, self.level))

    def increments_between(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Batched X_{a_i, b_i} with right-continuous values at both ends."""
        va = self.values_at(a)
        vb = self.values_at(b)
        return mul_arrays(inverse_arrays(va, self.d, self.level), vb, self.d, self.level)

    # ------------------------------------------------------------ restructuring
    def refine(self, new_times: Iterable[float]) -> "GroupPath":
        """Same path with extra breakpoints (no jumps are introduced)."""
        grid = np.union1d(self.times, np.asarray(list(new_times), dtype=float))
        grid = grid[(grid >= 0) & (grid <= 1)]
        if grid.size == self.times.size:
            return self
        seg, jl = self._on_grid(grid)
        return GroupPath(self.d, self.level, grid, seg, jl, tracking=self.tracking)

    def _on_grid(self, grid: np.ndarray):
        """Segment and jump logs of this path on a grid containing its breakpoints."""
        k = self._locate(0.5 * (grid[:-1] + grid[1:]))
        frac = (grid[1:] - grid[:-1]) / (self.times[k + 1] - self.times[k])
        seg = frac[:, None] * self.seg_logs[k]
        jl = np.zeros((grid.size, self.dim))
        pos = np.searchsorted(grid, self.times)
        jl[pos] = self.jump_logs
        return seg, jl

    def _replace(self, times, seg, jl, **kw) -> "GroupPath":
        return GroupPath(self.d, self.level, times, seg, jl, tracking=kw.get("tracking", self.tracking))

    def stop(self, t: float) -> "GroupPath":
        """X^t: equal to X before t and frozen at X_t afterwards."""
        return self._stopped(float(t), keep_jump=True)

    def stop_left(self, t: float) -> "GroupPath":
        """Path frozen at the left limit X_{t-} from time t on."""
        return self._stopped(float(t), keep_jump=False)

    def _stopped(self, t: float, keep_jump: bool) -> "GroupPath":
        if not 0.0 <= t <= 1.0:
            raise ValueError("stopping time outside [0, 1]")
        p = self.refine([t])
        seg = p.seg_logs.copy()
        jl = p.jump_logs.copy()
        seg[p.times[:-1] >= t] = 0.0
        jl[p.times > t] = 0.0
        if not keep_jump:
            jl[p.times == t] = 0.0
        # a frozen tracking letter is no longer strictly increasing
        return GroupPath(self.d, self.level, p.times, seg, jl, tracking=self.tracking and t == 1.0 and keep_jump)

    def squeeze(self, t: float, t0: float) -> "GroupPath":
        """X on [0, t] run linearly over [0, t0], then frozen at X_t."""
        if not (0.0 < t <= 1.0 and 0.0 < t0 <= 1.0):
            raise ValueError("squeeze needs t, t0 in (0, 1]")
        p = self.stop(t).refine([t])
        keep = p.times <= t
        times = p.times[keep] * (t0 / t)
        times[-1] = t0
        seg = p.seg_logs[keep[:-1]][: times.size - 1]
        jl = p.jump_logs[keep]
        if t0 < 1.0:
            times = np.append(times, 1.0)
            seg = np.vstack([seg, np.zeros((1, self.dim))])
            jl = np.vstack([jl, np.zeros((1, self.dim))])
        return GroupPath(self.d, self.level, times, seg, jl, tracking=self.tracking)

    def with_jumps(self, jumps: Sequence) -> "GroupPath":
        """Multiply extra jumps exp(log) into the path at the given times."""
        if not jumps:
            return self
        p = self.refine([float(t) for t, _ in jumps])
        jl = p.jump_logs.copy()
        for t, lg in jumps:
            if float(t) <= 0.0:
                raise ValueError("jumps must happen at positive times")
            arr = lg.coeffs if isinstance(lg, TruncatedTensor) else np.asarray(lg, dtype=float)
            arr = embed_array(arr, self.d, _infer_level(arr.size, self.d), self.level)
            k = int(np.searchsorted(p.times, float(t)))
            if np.any(jl[k] != 0):
                g = mul_arrays(exp_arrays(jl[k], self.d, self.level), exp_arrays(arr, self.d, self.level), self.d, self.level)
                jl[k] = log_arrays(g, self.d, self.level)
            else:
                jl[k] = arr
        return GroupPath(self.d, self.level, p.times, p.seg_logs, jl)

    def reparametrize(self, phi: PiecewiseLinearMap) -> "GroupPath":
        """The path u -> X_{phi(u)} for an increasing bijection phi of [0, 1]."""
        if phi.codomain != (0.0, 1.0) or phi.domain != (0.0, 1.0):
            raise ValueError("reparametrization must map [0, 1] onto [0, 1]")
        inv = phi.inverse()
        pre = np.asarray(inv(self.times))
        pre[0], pre[-1] = 0.0, 1.0
        grid = np.unique(np.concatenate([np.asarray(phi.x), pre]))
        img = np.asarray(phi(grid))
        img[0], img[-1] = 0.0, 1.0
        # snap images of preimages back onto the exact breakpoints
        pos = np.searchsorted(grid, pre)
        img[pos] = self.times
        k = self._locate(0.5 * (img[:-1] + img[1:]))
        frac = (img[1:] - img[:-1]) / (self.times[k + 1] - self.times[k])
        seg = frac[:, None] * self.seg_logs[k]
        jl = np.zeros((grid.size, self.dim))
        jl[pos] = self.jump_logs
        return self._replace(grid, seg, jl)

    def lift(self, level: int = 2) -> "GroupPath":
        """Canonical lift of a level-1 path (linear pieces, Marcus-like jumps)."""
        if level < self.level:
            raise ValueError("cannot lower the level with lift")
        if level == self.level:
            return self
        seg = embed_array(self.seg_logs, self.d, self.level, level)
        jl = embed_array(self.jump_logs, self.d, self.level, level)
        return GroupPath(self.d, level, self.times, seg, jl, tracking=self.tracking)

    def project_level(self, level: int = 1) -> "GroupPath":
        if level > self.level:
            raise ValueError("cannot raise the level with project_level")
        seg = embed_array(self.seg_logs, self.d, self.level, level)
        jl = embed_array(self.jump_logs, self.d, self.level, level)
        return GroupPath(self.d, level, self.times, seg, jl, tracking=self.tracking)

    def restrict_letters(self, letters: Sequence[int]) -> "GroupPath":
        """Image under the algebra map keeping only the given letters."""
        letters = list(letters)
        new_d = len(letters)
        cols = []
        for w in all_words(new_d, self.level):
            cols.append(word_index(tuple(letters[a] for a in w), self.d))
        cols = np.asarray(cols)
        return GroupPath(new_d, self.level, self.times, self.seg_logs[:, cols], self.jump_logs[:, cols])

    def drop_letter(self, letter: int = 0) -> "GroupPath":
        return self.restrict_letters([a for a in range(self.d) if a != letter])

    # ------------------------------------------------------------ serialization
    def pieces(self) -> list:
        out = []
        for k in range(self.n_pieces):
            if np.any(self.seg_logs[k] != 0):
                out.append({"kind": "segment", "t0": self.times[k], "t1": self.times[k + 1],
                            "log_increment": self.seg_logs[k][1:].tolist()})
        for k in self.jump_indices:
            out.append({"kind": "jump", "t": self.times[k], "log_jump": self.jump_logs[k][1:].tolist()})
        out.sort(key=lambda p: (p.get("t0", p.get("t")), p["kind"] == "segment"))
        return out

    def to_json(self) -> dict:
        pieces = []
        for p in self.pieces():
            q = dict(p)
            for key in ("t0", "t1", "t"):
                if key in q:
                    q[key] = repr(float(q[key]))
            pieces.append(q)
        obj = {"d": self.d, "level": self.level, "pieces": pieces}
        if self.tracking:
            obj["tracking"] = True
        return obj

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def from_json(cls, obj) -> "GroupPath":
        if isinstance(obj, str):
            obj = json.loads(obj)
        d, level = int(obj["d"]), int(obj["level"])
        D = tensor_dim(d, level)
        segs, jumps = [], []
        for p in obj["pieces"]:
            kind = p.get("kind")
            if kind == "segment":
                t0, t1 = float(str(p["t0"])), float(str(p["t1"]))
                if not 0.0 <= t0 < t1 <= 1.0:
                    raise ValueError(f"bad segment times {t0}, {t1}")
                segs.append((t0, t1, _coeff_row(p["log_increment"], D)))
            elif kind == "jump":
                t = float(str(p["t"]))
                if not 0.0 < t <= 1.0:
                    raise ValueError(f"bad jump time {t}")
                jumps.append((t, _coeff_row(p["log_jump"], D)))
            else:
                raise ValueError(f"unknown piece kind {kind!r}")
        return cls.from_pieces(d, level, segs, jumps, tracking=bool(obj.get("tracking", False)))

    @classmethod
    def from_pieces(cls, d: int, level: int, segments: Sequence, jumps: Sequence = (), *, tracking: bool = False) -> "GroupPath":
        """Build from (t0, t1, log) segments and (t, log) jumps; gaps are constant.
        Logs are TruncatedTensors or coefficient rows (scalar entry included)."""
        D = tensor_dim(d, level)
        pts = {0.0, 1.0}
        clean_segs = []
        for t0, t1, lg in segments:
            t0, t1 = float(t0), float(t1)
            if not 0.0 <= t0 < t1 <= 1.0:
                raise ValueError(f"bad segment [{t0}, {t1}]")
            clean_segs.append((t0, t1, _as_row(lg, d, level)))
            pts.update((t0, t1))
        clean_jumps = []
        for t, lg in jumps:
            t = float(t)
            if not 0.0 < t <= 1.0:
                raise ValueError(f"bad jump time {t}")
            clean_jumps.append((t, _as_row(lg, d, level)))
            pts.add(t)
        times = np.array(sorted(pts))
        seg = np.zeros((times.size - 1, D))
        covered = np.zeros(times.size - 1, dtype=bool)
        for t0, t1, row in clean_segs:
            i0, i1 = np.searchsorted(times, t0), np.searchsorted(times, t1)
            if np.any(covered[i0:i1]):
                raise ValueError("segments overlap")
            covered[i0:i1] = True
            frac = (times[i0 + 1:i1 + 1] - times[i0:i1]) / (t1 - t0)
            seg[i0:i1] = frac[:, None] * row
        jl = np.zeros((times.size, D))
        for t, row in clean_jumps:
            k = np.searchsorted(times, t)
            if np.any(jl[k] != 0):
                raise ValueError(f"two jumps at time {t}")
            jl[k] = row
        return cls(d, level, times, seg, jl, tracking=tracking)

    @classmethod
    def piecewise_linear(cls, times: Sequence[float], points, jumps: dict | None = None, level: int = 1) -> "GroupPath":
        """Level-1 path through ``points`` (first point must be the origin),
        linear between consecutive ``times``, plus optional jumps {t: vector}.
        The points describe the continuous part; jumps shift everything after."""
        times = np.asarray(times, dtype=float)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] != times.size:
            raise ValueError("need one point per time")
        if np.any(pts[0] != 0):
            raise ValueError("paths start at the origin")
        d = pts.shape[1]
        segs = []
        for k in range(times.size - 1):
            inc = pts[k + 1] - pts[k]
            segs.append((times[k], times[k + 1], TruncatedTensor.from_level1(inc, level)))
        jl = [(t, TruncatedTensor.from_level1(v, level)) for t, v in (jumps or {}).items()]
        return cls.from_pieces(d, level, segs, jl)

    def __repr__(self):
        return (f"GroupPath(d={self.d}, level={self.level}, pieces={self.n_pieces}, "
                f"jumps={self.jump_indices.size}{', tracking' if self.tracking else ''})")


def _infer_level(size: int, d: int) -> int:
    n = 0
    while tensor_dim(d, n) < size:
        n += 1
    if tensor_dim(d, n) != size:
        raise ValueError(f"{size} coefficients do not match any level for d={d}")
    return n


def _as_row(lg, d: int, level: int) -> np.ndarray:
    if isinstance(lg, TruncatedTensor):
        if lg.d != d:
            raise ValueError("alphabet mismatch in piece")
        return embed_array(lg.coeffs, d, lg.level, level)
    arr = np.asarray(lg, dtype=float).reshape(-1)
    if arr.size == tensor_dim(d, level):
        return arr
    return _coeff_row(arr, tensor_dim(d, level))


def _coeff_row(values, D: int) -> np.ndarray:
    """JSON logs omit the (zero) scalar entry; accept either form."""
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size == D - 1:
        arr = np.concatenate([[0.0], arr])
    if arr.size > D:
        raise ValueError("too many log coefficients")
    out = np.zeros(D)
    out[:arr.size] = arr
    return out


# ---------------------------------------------------------------- operations


def increment(X: GroupPath, s: float, t: float) -> TruncatedTensor:
    return X.increment(s, t)


def stop(X: GroupPath, t: float) -> GroupPath:
    return X.stop(t)


def reparametrize(X: GroupPath, phi: PiecewiseLinearMap) -> GroupPath:
    return X.reparametrize(phi)


def time_stretch(X: GroupPath, t: float) -> GroupPath:
    """Time-stretched version of a continuous path on [0, t]: every constant
    stretch of [0, t] is absorbed by the preceding non-constant block, which
    is stretched linearly; the result is frozen at X_t after t."""
    if not X.is_continuous():
        raise ValueError("time stretching is defined for continuous paths only")
    t = float(t)
    if not 0.0 < t <= 1.0:
        raise ValueError("stretch time must lie in (0, 1]")
    p = X.refine([t])
    active = np.any(p.seg_logs != 0, axis=1) & (p.times[:-1] < t)
    if not np.any(active):
        return GroupPath(X.d, X.level, [0.0, 1.0], np.zeros((1, X.dim)), tracking=X.tracking)
    idx = np.flatnonzero(active)
    # maximal runs of consecutive moving intervals
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    starts = [p.times[r[0]] for r in runs]
    new_times, new_seg = [0.0], []
    for j, r in enumerate(runs):
        dom0 = 0.0 if j == 0 else starts[j]
        dom1 = starts[j + 1] if j + 1 < len(runs) else t
        a, b = p.times[r[0]], p.times[r[-1] + 1]
        scale = (dom1 - dom0) / (b - a)
        for k in r:
            new_times.append(dom0 + (p.times[k + 1] - a) * scale)
            new_seg.append(p.seg_logs[k])
        new_times[-1] = dom1
    if t < 1.0:
        new_times.append(1.0)
        new_seg.append(np.zeros(X.dim))
    return GroupPath(X.d, X.level, np.array(new_times), np.array(new_seg), tracking=X.tracking)


def _candidate_points(X: GroupPath, refine: int) -> np.ndarray:
    """Group values at breakpoints (both sides of jumps) and, when refine > 1,
    at refine-1 interior points per segment, in time order."""
    rows = []
    for k in range(X.n_pieces + 1):
        if k > 0 and X._has_jump(k):
            rows.append(X.left_values[k])
        rows.append(X.right_values[k])
        if k < X.n_pieces and refine > 1:
            theta = np.arange(1, refine) / refine
            e = exp_arrays(theta[:, None] * X.seg_logs[k], X.d, X.level)
            rows.extend(mul_arrays(X.right_values[k], e, X.d, X.level))
    return np.array(rows)


def p_variation(X: GroupPath, p: float, refine: int = 4) -> float:
    """p-variation (sup over partitions of sum d(X_{t_i}, X_{t_{i+1}})^p)^(1/p).

    Exact for level-1 paths (the optimum sits on breakpoints, both sides of
    jumps counted).  For level-2 paths the supremum is taken over the
    breakpoint grid refined ``refine`` times and is only a lower bound; a
    :class:`LowerBoundWarning` is emitted.
    """
    if p < 1:
        raise ValueError("p-variation needs p >= 1")
    if X.level == 1:
        pts = _candidate_points(X, 1)[:, 1:1 + X.d]
        dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    else:
        warnings.warn("level-2 p-variation is a grid lower bound", LowerBoundWarning, stacklevel=2)
        vals = _candidate_points(X, refine)
        inv = inverse_arrays(vals, X.d, X.level)
        n = vals.shape[0]
        dist = np.zeros((n, n))
        for i in range(n):
            inc = mul_arrays(inv[i], vals[i + 1:], X.d, X.level)
            dist[i, i + 1:] = homogeneous_norm_arrays(inc, X.d, X.level)
    return _pvar_dp(dist, p)


def _pvar_dp(dist: np.ndarray, p: float) -> float:
    n = dist.shape[0]
    best = np.zeros(n)
    w = dist**p
    for j in range(1, n):
        best[j] = np.max(best[:j] + w[:j, j])
    return float(best[-1] ** (1.0 / p))


def default_jump_weights(X: GroupPath) -> np.ndarray:
    """r_k = 2^{-k}/2 with jumps ranked by decreasing jump norm (ties broken by
    earlier time); returned in time order."""
    idx = X.jump_indices
    if idx.size == 0:
        return np.zeros(0)
    norms = homogeneous_norm_arrays(exp_arrays(X.jump_logs[idx], X.d, X.level), X.d, X.level)
    order = sorted(range(idx.size), key=lambda i: (-round(float(norms[i]), 12), X.times[idx[i]]))
    w = np.zeros(idx.size)
    for rank, i in enumerate(order, start=1):
        w[i] = 0.5 * 2.0 ** (-rank)
    return w


def _letter_shift_columns(d: int, level: int) -> np.ndarray:
    """Column map sending word w over d letters to w+1 over d+1 letters."""
    return np.array([word_index(tuple(a + 1 for a in w), d + 1) for w in all_words(d, level)])


def tracking_jumps_extend(X: GroupPath, jump_sizes: Sequence[float] | None = None) -> GroupPath:
    """Prepend a tracking component Z (new letter 0).

    Z is strictly increasing and piecewise linear with Z_0 = 0, Z_1 = 1 and
    jumps exactly at the jump times of X.  Before normalisation Z_t = t +
    sum_{t_k <= t} s_k with s_k = ``jump_sizes`` (default 2^{-k}/2 by
    decreasing jump norm); the whole component is then divided by Z_1.
    Continuous paths get Z = identity.  The cross log terms are zero, so at
    level 2 the (i, 0) entries are the Young integrals of X^i against Z plus
    half the products of simultaneous jumps.
    """
    if X.tracking:
        raise ValueError("path already carries a tracking component")
    sizes = default_jump_weights(X) if jump_sizes is None else np.asarray(jump_sizes, dtype=float)
    if sizes.size != X.jump_indices.size or np.any(sizes <= 0):
        raise ValueError("need one positive jump size per jump")
    total = 1.0 + float(np.sum(sizes))
    nd = X.d + 1
    D = tensor_dim(nd, X.level)
    cols = _letter_shift_columns(X.d, X.level)
    seg = np.zeros((X.n_pieces, D))
    seg[:, cols] = X.seg_logs
    seg[:, 1] = np.diff(X.times) / total
    jl = np.zeros((X.times.size, D))
    jl[:, cols] = X.jump_logs
    jl[X.jump_indices, 1] = sizes / total
    return GroupPath(nd, X.level, X.times, seg, jl, tracking=True)


def time_extend(X: GroupPath) -> GroupPath:
    if not X.is_continuous():
        raise ValueError("time extension is for continuous paths; use tracking_jumps_extend")
    return tracking_jumps_extend(X)


def concat(X: GroupPath, Y: GroupPath, t: float) -> GroupPath:
    """X on [0, t] followed by the increments of Y after t: X_t Y_t^{-1} Y_u."""
    if (X.d, X.level) != (Y.d, Y.level):
        raise ValueError("concatenation needs paths of equal dimension and level")
    t = float(t)
    grid = np.unique(np.concatenate([X.times, Y.times, [t]]))
    xs, xj = X.refine(grid)._on_grid(grid)
    ys, yj = Y.refine(grid)._on_grid(grid)
    before = grid[:-1] < t
    seg = np.where(before[:, None], xs, ys)
    jl = np.where((grid <= t)[:, None], xj, yj)
    return GroupPath(X.d, X.level, grid, seg, jl, tracking=X.tracking and Y.tracking)


class FunctionDriver:
    """Smooth level-1 driver given by a vectorised callable t -> R^d.

    Only used as an integrator in Riemann sums; it carries no group structure.
    """

    level = 1

    def __init__(self, func, d: int, breakpoints: Sequence[float] = ()):
        self.func = func
        self.d = int(d)
        self.times = np.unique(np.concatenate([[0.0, 1.0], np.asarray(breakpoints, dtype=float)]))
        self.jump_times = np.zeros(0)

    @property
    def breakpoints(self):
        return self.times

    def level1_at(self, ts, side: str = "right") -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        return np.asarray(self.func(ts), dtype=float).reshape(ts.shape + (self.d,))


def oscillatory_driver(n: int = 8) -> FunctionDriver:
    """X^1 = -n^{-1/3} cos(n s), X^2 = n^{-1/3} sin(n s), s = 2 pi t, t in [0, 1]."""
    c = n ** (-1.0 / 3.0)

    def f(t):
        s = 2.0 * math.pi * np.asarray(t)
        return np.stack([-c * np.cos(n * s), c * np.sin(n * s)], axis=-1)

    return FunctionDriver(f, 2)
