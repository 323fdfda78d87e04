"""Marcus transformation: jumps become log-linear bridges on inserted windows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .paths import GroupPath, PiecewiseLinearMap, default_jump_weights


@dataclass(frozen=True)
class MarcusPair:
    """Window lengths r_k (one per jump, time order) and the bijection
    psi: [0, 1] -> [0, 1 + sum(r)]."""

    r: tuple
    psi: PiecewiseLinearMap

    def __post_init__(self):
        r = tuple(float(x) for x in self.r)
        if any(x <= 0 for x in r):
            raise ValueError("window lengths must be positive")
        object.__setattr__(self, "r", r)
        lo, hi = self.psi.codomain
        if self.psi.domain != (0.0, 1.0) or lo != 0.0 or not np.isclose(hi, 1.0 + sum(r), rtol=0, atol=1e-12):
            raise ValueError("psi must map [0, 1] onto [0, 1 + sum(r)]")

    @property
    def total(self) -> float:
        return float(sum(self.r))

    @classmethod
    def linear(cls, r) -> "MarcusPair":
        r = tuple(float(x) for x in r)
        return cls(r, PiecewiseLinearMap((0.0, 1.0), (0.0, 1.0 + sum(r))))

    def to_json(self) -> dict:
        return {"r": list(self.r), "psi": self.psi.to_json()}

    @classmethod
    def from_json(cls, obj) -> "MarcusPair":
        return cls(tuple(obj["r"]), PiecewiseLinearMap.from_json(obj["psi"]))


def _tau_breakpoints(X: GroupPath, r: np.ndarray):
    """tau(t_k-) and tau(t_k) at every breakpoint of X."""
    add = np.zeros(X.times.size)
    add[X.jump_indices] = r
    right = X.times + np.cumsum(add)
    left = right - add
    return left, right


def default_pair(X: GroupPath) -> MarcusPair:
    """r_k = 2^{-k}/2 by decreasing jump norm.  psi is linear unless X carries
    a tracking component, in which case psi^{-1} follows that component on the
    tau timeline so the transformed tracking letter is exactly u -> u."""
    r = default_jump_weights(X)
    if r.size == 0:
        return MarcusPair((), PiecewiseLinearMap.identity())
    if not X.tracking:
        return MarcusPair.linear(r)
    left, right = _tau_breakpoints(X, r)
    z_left = X.left_values[:, 1]
    z_right = X.right_values[:, 1]
    s = np.empty(2 * X.times.size)
    z = np.empty_like(s)
    s[0::2], s[1::2] = left, right
    z[0::2], z[1::2] = z_left, z_right
    keep = np.concatenate([[True], np.diff(s) > 0])
    s, z = s[keep], z[keep]
    if np.any(np.diff(z) <= 0):
        return MarcusPair.linear(r)
    z[0], z[-1] = 0.0, 1.0
    return MarcusPair(tuple(r), PiecewiseLinearMap(tuple(z), tuple(s)))


def random_pair(X: GroupPath, rng: np.random.Generator, n_knots: int = 4) -> MarcusPair:
    """A random admissible pair, for invariance probes."""
    k = X.jump_indices.size
    r = rng.uniform(0.05, 0.6, size=k)
    top = 1.0 + float(r.sum())
    xs = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 0.95, n_knots)), [1.0]])
    ys = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 0.95, n_knots)) * top, [top]])
    if np.any(np.diff(xs) <= 1e-6) or np.any(np.diff(ys) <= 1e-6):
        return MarcusPair.linear(r)
    return MarcusPair(tuple(r), PiecewiseLinearMap(tuple(xs), tuple(ys)))


class MarcusTransform:
    """The continuous path X~ together with the time maps tau and mu."""

    def __init__(self, origin: GroupPath, pair: MarcusPair | None = None):
        if pair is None:
            pair = default_pair(origin)
        k = origin.jump_indices.size
        if len(pair.r) != k:
            raise ValueError(f"pair has {len(pair.r)} windows for {k} jumps")
        self.origin, self.pair = origin, pair
        r = np.asarray(pair.r)
        self._tau_left, self._tau_right = _tau_breakpoints(origin, r)
        if k == 0:
            # identity convention for continuous paths when psi is the identity
            self.transformed = origin if pair.psi == PiecewiseLinearMap.identity() else origin.reparametrize(pair.psi)
        else:
            self.transformed = self._build(r)

    def _build(self, r: np.ndarray) -> GroupPath:
        X = self.origin
        L = 1.0 + float(r.sum())
        times, segs = [0.0], []
        zero = np.zeros(X.dim)
        for k in range(X.n_pieces + 1):
            if k > 0:
                a = self._tau_left[k]
                if a > times[-1]:
                    times.append(a)
                    segs.append(X.seg_logs[k - 1])
                if X._has_jump(k):
                    times.append(self._tau_right[k])
                    segs.append(X.jump_logs[k])
        times = np.asarray(times) / L
        times[-1] = 1.0
        Y = GroupPath(X.d, X.level, times, np.array(segs) if segs else zero[None, :], tracking=X.tracking)
        psi = self.pair.psi
        ys = np.asarray(psi.y) / L
        ys[-1] = 1.0
        phi = PiecewiseLinearMap(psi.x, tuple(ys))
        return Y.reparametrize(phi)

    # time maps
    def tau(self, t, side: str = "right"):
        t = np.asarray(t, dtype=float)
        X = self.origin
        idx = X.jump_indices
        jt = X.times[idx]
        r = np.asarray(self.pair.r)
        cnt = np.searchsorted(jt, t, side="left" if side == "left" else "right")
        csum = np.concatenate([[0.0], np.cumsum(r)])
        return t + csum[cnt]

    def mu(self, t, side: str = "right"):
        """mu_t = psi^{-1}(tau(t)); ``side="left"`` gives mu_{t-}."""
        out = np.asarray(self.pair.psi.inverse()(self.tau(t, side)))
        return np.clip(out, 0.0, 1.0)

    def eval_origin(self, t):
        return self.transformed.eval(float(self.mu(t)))


def marcus_transform(X: GroupPath, pair: MarcusPair | None = None) -> MarcusTransform:
    return MarcusTransform(X, pair)


def mu(tr: MarcusTransform, t):
    return tr.mu(t)


def pair_invariance_check(F, X: GroupPath, pair_a: MarcusPair | None, pair_b: MarcusPair | None, ts=None) -> float:
    """max_t |F(mu^A_t, X~^A) - F(mu^B_t, X~^B)|; ``None`` for a pair means the
    direct evaluation F(t, X) on the cadlag path."""
    ts = np.linspace(0.05, 1.0, 20) if ts is None else np.asarray(ts, dtype=float)

    def vals(pair):
        if pair is None:
            return np.array([F.value(t, X) for t in ts])
        tr = MarcusTransform(X, pair)
        return np.array([F.value(float(m), tr.transformed) for m in tr.mu(ts)])

    return float(np.max(np.abs(vals(pair_a) - vals(pair_b))))
