"""Young and level-2 rough integrals as limits of (compensated) Riemann sums.

Every partition contains all breakpoints and jump times of the driver, so
mesh and refinement limits coincide for the piecewise path class used here.
Sums are computed on a nested schedule of meshes and extrapolated with the
two-point rule R_l = 2 S_l - S_{l-1}.
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor_algebra import inverse_arrays, level_offsets, mul_arrays


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("CADLAG_ROUGH_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Map in input order, threaded when CADLAG_ROUGH_THREADS > 1."""
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


@dataclass(frozen=True)
class MeshSchedule:
    """Nested partitions of [0, t].

    ``kind="interval"``: every interval between required points gets
    m_j 2^l equal cells, m_j = ceil(length / h0).  ``kind="dyadic"``: the
    dyadic grid of depth ``depth0 + l`` plus the required points.
    """

    h0: float = 2.0**-4
    levels: int = 12
    kind: str = "interval"
    depth0: int = 4

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("need at least two mesh levels")
        if self.kind not in ("interval", "dyadic"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    def grids(self, t: float, required: Sequence[float], start: float = 0.0):
        """Finest grid on [start, t] and, per level, the index array of its
        sub-partition."""
        req = np.unique(np.concatenate([[start, t], np.asarray(required, dtype=float)]))
        req = req[(req >= start) & (req <= t)]
        L = self.levels - 1
        if self.kind == "interval":
            pieces, idx_levels = [], [[] for _ in range(self.levels)]
            offset = 0
            for a, b in zip(req[:-1], req[1:]):
                m = max(1, int(math.ceil((b - a) / self.h0 - 1e-12)))
                n_fine = m * 2**L
                grid = a + (b - a) * np.arange(n_fine) / n_fine
                pieces.append(grid)
                for lvl in range(self.levels):
                    idx_levels[lvl].append(offset + np.arange(0, n_fine, 2 ** (L - lvl)))
                offset += n_fine
            fine = np.concatenate(pieces + [[t]])
            idx = [np.concatenate(parts + [[offset]]) for parts in idx_levels]
            return fine, idx
        depth = self.depth0 + L
        n = 2**depth
        k = np.arange(int(math.floor(t * n)) + 1)
        dy = k / n
        fine = np.union1d(dy[dy >= start], req)
        is_req = np.isin(fine, req)
        kk = np.round(fine * n)
        exact = np.abs(fine * n - kk) == 0
        idx = []
        for lvl in range(self.levels):
            step = 2 ** (L - lvl)
            on_grid = exact & (kk % step == 0)
            idx.append(np.flatnonzero(on_grid | is_req))
        return fine, idx

    def mesh_sizes(self, fine: np.ndarray, idx) -> np.ndarray:
        return np.array([float(np.max(np.diff(fine[i]))) if i.size > 1 else 0.0 for i in idx])


@dataclass
class IntegralResult:
    """Per-mesh sums, their extrapolations and a convergence diagnostic."""

    meshes: np.ndarray
    values: np.ndarray
    richardson: np.ndarray
    tol: float = 1e-5
    extra: dict = field(default_factory=dict)

    @property
    def value(self):
        return self.richardson[-1]

    @property
    def raw(self):
        return self.values[-1]

    @property
    def diffs(self) -> np.ndarray:
        v = self.values.reshape(len(self.values), -1)
        out = np.full(len(v), np.nan)
        out[1:] = np.max(np.abs(np.diff(v, axis=0)), axis=1)
        return out

    @property
    def error_estimate(self) -> float:
        r = self.richardson.reshape(len(self.richardson), -1)
        return float(min(np.max(np.abs(r[-1] - r[-2])), self.diffs[-1]))

    @property
    def converged(self) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.richardson[-1]))))
        return bool(self.error_estimate <= self.tol * scale)

    @property
    def rate(self) -> float:
        """Observed order from ratios of successive raw differences, ignoring
        levels that already sit on the rounding floor."""
        dd = self.diffs[1:]
        scale = max(1.0, float(np.max(np.abs(self.values))))
        floor = 1e-12 * scale
        rates = [math.log2(a / b) for a, b in zip(dd[:-1], dd[1:]) if a > floor and b > floor]
        if not rates:
            return float("inf")
        return float(np.median(rates[-4:]))

    def table(self) -> str:
        buf = io.StringIO()
        buf.write("mesh,value,richardson,diff\n")
        v = self.values.reshape(len(self.values), -1)[:, 0]
        r = self.richardson.reshape(len(self.richardson), -1)[:, 0]
        for m, a, b, c in zip(self.meshes, v, r, self.diffs):
            buf.write(f"{float(m)!r},{float(a)!r},{float(b)!r},{'' if np.isnan(c) else repr(float(c))}\n")
        return buf.getvalue()


def _richardson(values: np.ndarray) -> np.ndarray:
    out = values.copy()
    out[1:] = 2.0 * values[1:] - values[:-1]
    return out


def _required_points(X, t, extra=()):
    pts = [np.asarray(X.breakpoints, dtype=float), np.asarray(extra, dtype=float)]
    if hasattr(X, "jump_times"):
        pts.append(np.asarray(X.jump_times, dtype=float))
    allp = np.concatenate(pts)
    return allp[(allp >= 0.0) & (allp <= t)]


def _as_integrand(Y, ts):
    """Evaluate an integrand callback; scalar-per-letter outputs of shape
    (n, d) are read as 1 x d linear maps."""
    val = np.asarray(Y(ts), dtype=float)
    if val.ndim == 2:
        val = val[:, None, :]
    return val


def riemann_levels(Yf: np.ndarray, Xf: np.ndarray, idx, extra_terms=None) -> np.ndarray:
    """Left-point sums sum_i Y_{s_i} (X_{s_{i+1}} - X_{s_i}) for each level."""
    out = []
    for lvl, ii in enumerate(idx):
        dX = Xf[ii[1:]] - Xf[ii[:-1]]
        s = np.einsum("nmd,nd->m", Yf[ii[:-1]], dX)
        if extra_terms is not None:
            s = s + extra_terms(lvl, ii)
        out.append(s)
    return np.array(out)


def young_integral(Y: Callable, X, t: float = 1.0, schedule: MeshSchedule | None = None, tol: float = 1e-5,
                   required: Sequence[float] = ()) -> IntegralResult:
    """int_0^t Y_{s-} dX_s for a level-1 driver X and an integrand callback
    Y(ts) -> (n, m, d) or (n, d), evaluated with right values at partition points."""
    schedule = MeshSchedule() if schedule is None else schedule
    fine, idx = schedule.grids(float(t), _required_points(X, t, required))
    Xf = X.level1_at(fine)
    Yf = _as_integrand(Y, fine)
    vals = riemann_levels(Yf, Xf, idx)
    return IntegralResult(schedule.mesh_sizes(fine, idx), vals, _richardson(vals), tol,
                          {"grid": fine, "levels": idx})


class ControlledPath:
    """A controlled pair (Y, Y') given by callbacks Y(ts) -> (n, m, d) and
    Yprime(ts) -> (n, m, d, d), with Y'[m, a, b] the sensitivity of Y[m, a]
    to X^b.  The Gubinelli term is then sum_ab Y'[m, a, b] XX^{(b, a)}."""

    def __init__(self, Y: Callable, Yprime: Callable):
        self.Y, self.Yprime = Y, Yprime

    def remainder(self, X, s: float, t: float) -> np.ndarray:
        """R_{s,t} = Y_t - Y_s - Y'_s X_{s,t}."""
        ys = _as_integrand(self.Y, np.array([s]))[0]
        yt = _as_integrand(self.Y, np.array([t]))[0]
        yp = np.asarray(self.Yprime(np.array([s])), dtype=float)
        yp = yp.reshape((1,) + ys.shape + (X.d,))[0]
        inc = X.level1_at(t) - X.level1_at(s)
        return yt - ys - np.einsum("mde,e->md", yp, inc)


def level2_increments(X, fine: np.ndarray, ii: np.ndarray) -> np.ndarray:
    """Level-2 blocks of X_{s_i, s_{i+1}} along the sub-partition ``ii``."""
    V = X.values_at(fine[ii])
    inc = mul_arrays(inverse_arrays(V[:-1], X.d, X.level), V[1:], X.d, X.level)
    offs = level_offsets(X.d, X.level)
    return inc[:, offs[2]:offs[3]].reshape(-1, X.d, X.d)


def rough_integral(cp: ControlledPath, X, t: float = 1.0, schedule: MeshSchedule | None = None,
                   tol: float = 1e-5) -> IntegralResult:
    """Compensated sums sum Y_{s_i} X_{s_i,s_{i+1}} + Y'_{s_i} XX_{s_i,s_{i+1}}."""
    if X.level < 2:
        raise ValueError("rough integration needs a level-2 path")
    schedule = MeshSchedule() if schedule is None else schedule
    fine, idx = schedule.grids(float(t), _required_points(X, t))
    Xf = X.level1_at(fine)
    Yf = _as_integrand(cp.Y, fine)
    Ypf = np.asarray(cp.Yprime(fine), dtype=float).reshape(Yf.shape + (X.d,))

    def gubinelli(lvl, ii):
        XX = level2_increments(X, fine, ii)
        return np.einsum("nmab,nba->m", Ypf[ii[:-1]], XX)

    vals = riemann_levels(Yf, Xf, idx, gubinelli)
    return IntegralResult(schedule.mesh_sizes(fine, idx), vals, _richardson(vals), tol,
                          {"grid": fine, "levels": idx})


def jump_compensator(F, X, t: float = 1.0, order: int = 1) -> float:
    """sum_{0 < s <= t} F(s) - F(s-) - <DF(s-), dX_s> [- <D^2F(s-), dXX_s>]."""
    idx = X.jump_indices
    jt = X.times[idx]
    sel = jt <= t
    if not np.any(sel):
        return 0.0
    ts = jt[sel]
    logs = X.jump_logs[idx[sel]]
    d = X.d
    total = F.values(ts, X) - F.values(ts, X, side="left")
    dX = logs[:, 1:1 + d]
    total = total - np.einsum("nd,nd->n", F.derivatives(1, ts, X, side="left").reshape(-1, d), dX)
    if order >= 2:
        from .tensor_algebra import exp_arrays

        g = exp_arrays(logs, d, max(2, X.level))
        offs = level_offsets(d, max(2, X.level))
        dXX = g[:, offs[2]:offs[3]].reshape(-1, d, d)
        total = total - np.einsum("nab,nab->n", F.derivatives(2, ts, X, side="left").reshape(-1, d, d), dXX)
    return float(np.sum(total))


def remainder(F, X, s: float, t: float) -> float:
    """R((s, t), X) = F(t, X) - F(s, X) - <DF(s, X), pi_1(X_{s,t})>."""
    if s > t:
        raise ValueError("remainder needs s <= t")
    inc = X.level1_at(t) - X.level1_at(s)
    return float(F.value(t, X) - F.value(s, X) - F.derivative(1, s, X) @ inc)


def functional_integrand(F, X, order: int = 1):
    """Callback ts -> k-th derivative of F along X, shaped for the integrators.

    For order 2 the axes are swapped so that Y'[a, b] = D^2F[b, a]: the
    earlier perturbation b is the direction in which DF[a] moves."""
    d = X.d

    def Y(ts):
        v = F.derivatives(order, ts, X)
        if order == 2:
            v = np.swapaxes(v, 1, 2)
        return v.reshape((len(ts), 1) + (d,) * order)

    return Y


def functional_pair(F, X) -> ControlledPath:
    """The controlled pair (DF(., X), D^2F(., X))."""
    return ControlledPath(functional_integrand(F, X, 1), functional_integrand(F, X, 2))
