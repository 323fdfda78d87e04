"""Numerical checks of the functional Ito formulas, signature Taylor
expansions, Foellmer quadratic variation, the (RIE) property and the
universal approximation of functionals by linear signature functionals."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .functionals import PathFunctional
from .integration import (
    ControlledPath,
    IntegralResult,
    MeshSchedule,
    _richardson,
    functional_integrand,
    functional_pair,
    jump_compensator,
    level2_increments,
    rough_integral,
    young_integral,
)
from .marcus import MarcusTransform
from .paths import GroupPath, concat, tracking_jumps_extend
from .signature import _cached
from .tensor_algebra import level_offsets, log_arrays, inverse_arrays, mul_arrays

NOISE_FLOOR = 1e-12


class AsymmetricHessianError(ValueError):
    """Raised when a Foellmer-type check meets a non-symmetric second derivative."""


def extended(X: GroupPath) -> GroupPath:
    """The tracking-jumps extension of X unless X already carries one."""
    return X if X.tracking else tracking_jumps_extend(X)


def _num(x) -> float:
    return float(np.asarray(x).reshape(-1)[0])


def _decreasing(values, floor: float) -> bool:
    a = np.abs(np.asarray(values, dtype=float))
    return bool(all(b <= max(c, floor) for c, b in zip(a[:-1], a[1:])))


# ------------------------------------------------------------------ Ito


@dataclass
class ItoReport:
    """lhs = F(t) - F(0) against integral + compensator, per mesh level."""

    kind: str
    t: float
    lhs: float
    integral: IntegralResult
    compensator: float
    tol: float
    levels_total: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def integral_levels(self) -> np.ndarray:
        if self.levels_total is not None:
            return self.levels_total
        return self.integral.richardson.reshape(len(self.integral.richardson), -1)[:, 0]

    @property
    def integral_value(self) -> float:
        return float(self.integral_levels[-1])

    @property
    def residuals(self) -> np.ndarray:
        return self.lhs - (self.integral_levels + self.compensator)

    @property
    def residual(self) -> float:
        return float(self.residuals[-1])

    @property
    def decreasing(self) -> bool:
        """Residual non-increasing over the last three levels, up to the
        rounding floor."""
        floor = NOISE_FLOOR * max(1.0, abs(self.lhs))
        return _decreasing(self.residuals[-3:], floor)

    @property
    def passed(self) -> bool:
        ok = abs(self.residual) < self.tol
        gap = self.extra.get("route_gap")
        if gap is not None:
            ok = ok and gap < self.extra.get("route_tol", np.inf)
        return bool(ok)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "t": self.t,
            "lhs": self.lhs,
            "integral": self.integral_value,
            "compensator": self.compensator,
            "residual": self.residual,
            "residuals": [float(r) for r in self.residuals],
            "meshes": [float(m) for m in self.integral.meshes],
            "decreasing": self.decreasing,
            "tol": self.tol,
            "passed": self.passed,
            **{k: v for k, v in self.extra.items() if isinstance(v, (int, float, bool, str, type(None)))},
        }

    def table(self) -> str:
        buf = io.StringIO()
        buf.write("mesh,integral,richardson,residual\n")
        raw = self.integral.values.reshape(len(self.integral.values), -1)[:, 0]
        if self.levels_total is not None and "raw_total" in self.extra:
            raw = self.extra["raw_total"]
        for m, a, b, r in zip(self.integral.meshes, raw, self.integral_levels, self.residuals):
            buf.write(f"{float(m)!r},{float(a)!r},{float(b)!r},{float(r)!r}\n")
        return buf.getvalue()


def _lhs(F: PathFunctional, X: GroupPath, t: float) -> float:
    return float(F.value(float(t), X) - F.value(0.0, X))


def check_ito_young(F: PathFunctional, X: GroupPath, t: float = 1.0, schedule: MeshSchedule | None = None,
                    tol: float = 1e-6) -> ItoReport:
    """Young-case formula: F(t) - F(0) = int DF(s-) dX + sum of first-order
    jump corrections, on the tracking-jumps extension of X."""
    Xh = extended(X)
    integral = young_integral(functional_integrand(F, Xh, 1), Xh, t, schedule)
    comp = jump_compensator(F, Xh, t, order=1)
    return ItoReport("young", float(t), _lhs(F, Xh, t), integral, comp, tol, extra={"path": Xh})


def _is_lift(X: GroupPath) -> bool:
    offs = level_offsets(X.d, X.level)
    return bool(np.all(X.seg_logs[:, offs[2]:] == 0) and np.all(X.jump_logs[:, offs[2]:] == 0))


def lemma_route(F: PathFunctional, X: GroupPath, t: float, schedule: MeshSchedule | None = None) -> IntegralResult:
    """Young integral of DF plus half the sum of D^2F(s-) against squared
    jumps; equals the rough integral when X is the canonical lift of a
    finite-variation path."""
    young = young_integral(functional_integrand(F, X, 1), X, t, schedule)
    idx = X.jump_indices
    jt = X.times[idx]
    sel = jt <= t
    half = 0.0
    if np.any(sel):
        dX = X.jump_logs[idx[sel]][:, 1:1 + X.d]
        D2 = F.derivatives(2, jt[sel], X, side="left")
        half = 0.5 * float(np.einsum("nab,na,nb->", D2, dX, dX))
    return IntegralResult(young.meshes, young.values + half, young.richardson + half, young.tol, young.extra)


def check_ito_rough(F: PathFunctional, X: GroupPath, t: float = 1.0, schedule: MeshSchedule | None = None,
                    tol: float = 1e-5, route_tol: float = 1e-6) -> ItoReport:
    """Level-2 formula with the rough integral of (DF, D^2F) and second-order
    jump corrections; X must be Marcus-like.  When X is the canonical lift of
    a finite-variation path the rough integral is also compared with the
    Young route."""
    Xh = extended(X)
    if Xh.level == 1:
        Xh = Xh.lift(2)
    if not Xh.is_marcus_like():
        raise ValueError("the rough Ito check needs a Marcus-like path")
    integral = rough_integral(functional_pair(F, Xh), Xh, t, schedule)
    comp = jump_compensator(F, Xh, t, order=2)
    extra = {"path": Xh, "route_tol": route_tol}
    if _is_lift(Xh):
        route = lemma_route(F, Xh, t, schedule)
        extra["route_value"] = _num(route.value)
        extra["route_gap"] = abs(_num(route.value) - _num(integral.value))
    return ItoReport("rough", float(t), _lhs(F, Xh, t), integral, comp, tol, extra=extra)


# ------------------------------------------------------------------ Taylor


@dataclass
class TaylorReport:
    """F(t) = sum_j <D^jF(t0), X^(j)_{t0,t}> + remainder."""

    K: int
    level: int
    t0: float
    t: float
    lhs: float
    coefficients: list
    increments: list
    remainder: IntegralResult
    tol: float

    @property
    def terms(self) -> list:
        return [float(np.sum(c * x)) for c, x in zip(self.coefficients, self.increments)]

    @property
    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.terms)

    @property
    def remainder_value(self) -> float:
        return _num(self.remainder.value)

    @property
    def residual(self) -> float:
        return float(self.lhs - self.partial_sums[-1] - self.remainder_value)

    @property
    def passed(self) -> bool:
        return abs(self.residual) < self.tol

    def to_json(self) -> dict:
        return {
            "K": self.K, "level": self.level, "t0": self.t0, "t": self.t, "lhs": self.lhs,
            "terms": self.terms, "partial_sums": [float(x) for x in self.partial_sums],
            "remainder": self.remainder_value, "residual": self.residual,
            "remainder_levels": [_num(v) for v in self.remainder.richardson],
            "tol": self.tol, "passed": self.passed,
        }

    def table(self) -> str:
        buf = io.StringIO()
        buf.write("order,term,partial_sum\n")
        for j, (a, b) in enumerate(zip(self.terms, self.partial_sums)):
            buf.write(f"{j},{a!r},{float(b)!r}\n")
        buf.write(f"remainder,{self.remainder_value!r},{float(self.partial_sums[-1] + self.remainder_value)!r}\n")
        return buf.getvalue()


def _cumulative(inc: np.ndarray) -> np.ndarray:
    out = np.zeros((inc.shape[0] + 1,) + inc.shape[1:])
    np.cumsum(inc, axis=0, out=out[1:])
    return out


def iterated_remainder(F: PathFunctional, Z: GroupPath, a: float, b: float, K: int, level: int,
                       schedule: MeshSchedule | None = None) -> IntegralResult:
    """Iterated integral of the highest derivative of F along the continuous
    path Z over [a, b].  Level 1: K-1 nested Young integrals of D^{K-1}F, the
    first (earliest-perturbation) index contracted first.  Level 2: the
    controlled-pair recursion G^j = int (G^{j-1}, G^{j-2}) dZ started from
    G^{-1} = D^{K-1}F and G^0 = D^{K-2}F, evaluated as compensated sums."""
    schedule = MeshSchedule() if schedule is None else schedule
    fine, idx = schedule.grids(float(b), Z.breakpoints, start=float(a))
    Zf = Z.level1_at(fine)
    top = F.derivatives(K - 1, fine, Z)
    sub = F.derivatives(K - 2, fine, Z) if level == 2 else None
    vals = []
    for ii in idx:
        dZ = Zf[ii[1:]] - Zf[ii[:-1]]
        if level == 1:
            H = top[ii]
            for _ in range(K - 1):
                H = _cumulative(np.einsum("na...,na->n...", H[:-1], dZ))
            vals.append(float(H[-1]))
        else:
            XX = level2_increments(Z, fine, ii)
            prev2, prev1 = top[ii], sub[ii]
            for _ in range(K - 2):
                inc = np.einsum("na...,na->n...", prev1[:-1], dZ) + np.einsum("nba...,nba->n...", prev2[:-1], XX)
                prev2, prev1 = prev1, _cumulative(inc)
            vals.append(float(prev1[-1]))
    vals = np.array(vals)
    return IntegralResult(schedule.mesh_sizes(fine, idx), vals, _richardson(vals))


def _taylor(F, P: GroupPath, t0: float, t: float, K: int, level: int, schedule, tol) -> TaylorReport:
    jmax = K - 2 if level == 1 else K - 3
    S = _cached(P, max(P.level, jmax, 1))
    inc = S.increment(t0, t)
    coefs, incs = [], []
    for j in range(jmax + 1):
        coefs.append(np.asarray(F.derivative(j, t0, P), dtype=float))
        incs.append(inc.tensor_block(j) if j > 0 else np.asarray(1.0))
    tr = MarcusTransform(P)
    a, b = float(tr.mu(t0)), float(tr.mu(t))
    rem = iterated_remainder(F, tr.transformed, a, b, K, level, schedule)
    return TaylorReport(K, level, float(t0), float(t), float(F.value(t, P)), coefs, incs, rem, tol)


def taylor_expand(F: PathFunctional, X: GroupPath, t: float = 1.0, K: int = 4, level: int | None = None,
                  schedule: MeshSchedule | None = None, tol: float = 1e-6) -> TaylorReport:
    """Signature Taylor expansion of F at time 0 with the remainder computed on
    the time-extended Marcus transform up to mu_t."""
    Xh = extended(X)
    level = Xh.level if level is None else int(level)
    if level == 2 and Xh.level == 1:
        Xh = Xh.lift(2)
    if level == 1 and Xh.level == 2:
        raise ValueError("a level-1 expansion needs a level-1 path")
    if K < level + 1:
        raise ValueError(f"K must be at least {level + 1} at level {level}")
    return _taylor(F, Xh, 0.0, float(t), int(K), level, schedule, tol)


def taylor_at(F: PathFunctional, X: GroupPath, Y: GroupPath, t: float, s: float, K: int = 4,
              level: int | None = None, schedule: MeshSchedule | None = None, tol: float = 1e-6) -> TaylorReport:
    """Expansion of F(s, X + Y at t) around (t, X) in the signature of Y over [t, s]."""
    if not (X.is_continuous() and Y.is_continuous()):
        raise ValueError("concatenated expansions are for continuous paths")
    if not 0.0 <= t <= s <= 1.0:
        raise ValueError("need 0 <= t <= s <= 1")
    Xh, Yh = extended(X), extended(Y)
    level = Xh.level if level is None else int(level)
    if level == 2:
        Xh, Yh = Xh.lift(2), Yh.lift(2)
    P = concat(Xh, Yh, t)
    return _taylor(F, P, float(t), float(s), int(K), level, schedule, tol)


# ------------------------------------------------------------------ Foellmer


def dyadic_schedule(depth: int = 14, levels: int = 11) -> MeshSchedule:
    """Nested dyadic partitions whose finest level has the given depth."""
    return MeshSchedule(levels=levels, kind="dyadic", depth0=depth - levels + 1)


@dataclass
class QVReport:
    t: float
    grid: np.ndarray
    qv_path: np.ndarray
    jump_path: np.ndarray
    nu: np.ndarray
    meshes: np.ndarray
    polarization_gap: float
    tol: float = 1e-8

    @property
    def qv(self) -> np.ndarray:
        return self.qv_path[-1]

    @property
    def qv_continuous(self) -> np.ndarray:
        return self.qv_path[-1] - self.jump_path[-1]

    @property
    def continuous_path(self) -> np.ndarray:
        return self.qv_path - self.jump_path

    @property
    def converged(self) -> bool:
        diff = float(np.max(np.abs(self.nu[-1] - self.nu[-2])))
        return diff <= self.tol * max(1.0, float(np.max(np.abs(self.nu[-1]))))

    def to_json(self) -> dict:
        return {
            "t": self.t, "qv": self.qv.tolist(), "qv_continuous": self.qv_continuous.tolist(),
            "jumps": self.jump_path[-1].tolist(), "nu_levels": [v.tolist() for v in self.nu],
            "meshes": self.meshes.tolist(), "polarization_gap": self.polarization_gap,
            "converged": self.converged,
        }

    def table(self) -> str:
        buf = io.StringIO()
        d = self.qv.shape[0]
        buf.write("mesh," + ",".join(f"qv_{i}{j}" for i in range(d) for j in range(d)) + "\n")
        for m, v in zip(self.meshes, self.nu):
            buf.write(f"{float(m)!r}," + ",".join(repr(float(x)) for x in v.reshape(-1)) + "\n")
        return buf.getvalue()


def _jump_qv_path(X, grid: np.ndarray) -> np.ndarray:
    idx = X.jump_indices
    jt = X.times[idx]
    dX = X.jump_logs[idx][:, 1:1 + X.d]
    outer = np.einsum("na,nb->nab", dX, dX)
    cum = np.concatenate([np.zeros((1, X.d, X.d)), np.cumsum(outer, axis=0)])
    return cum[np.searchsorted(jt, grid, side="right")]


def foellmer_qv(X: GroupPath, t: float = 1.0, schedule: MeshSchedule | None = None, tol: float = 1e-8) -> QVReport:
    """Quadratic variation along nested dyadic partitions (jump times and
    breakpoints inserted), from squared increments; cross terms by
    polarization."""
    schedule = dyadic_schedule() if schedule is None else schedule
    fine, idx = schedule.grids(float(t), X.breakpoints)
    Xf = X.level1_at(fine)
    nu = []
    for ii in idx:
        inc = Xf[ii[1:]] - Xf[ii[:-1]]
        nu.append(np.einsum("na,nb->ab", inc, inc))
    ii = idx[-1]
    inc = Xf[ii[1:]] - Xf[ii[:-1]]
    grid = fine[ii]
    # matrix entries built by polarization from scalar quadratic variations
    sq = _cumulative(inc**2)
    qv_path = np.zeros((grid.size, X.d, X.d))
    gap = 0.0
    for i in range(X.d):
        qv_path[:, i, i] = sq[:, i]
        for j in range(i + 1, X.d):
            both = _cumulative((inc[:, i] + inc[:, j]) ** 2)
            cross = 0.5 * (both - sq[:, i] - sq[:, j])
            qv_path[:, i, j] = qv_path[:, j, i] = cross
            direct = _cumulative(inc[:, i] * inc[:, j])
            gap = max(gap, float(np.max(np.abs(cross - direct))))
    return QVReport(float(t), grid, qv_path, _jump_qv_path(X, grid), np.array(nu),
                    schedule.mesh_sizes(fine, idx), gap, tol)


def check_foellmer_ito(F: PathFunctional, X: GroupPath, t: float = 1.0, schedule: MeshSchedule | None = None,
                       tol: float = 1e-5, sym_tol: float = 1e-8) -> ItoReport:
    """Foellmer-type formula: partition-sum integral of DF, half the integral
    of D^2F against the continuous quadratic variation, and first-order jump
    corrections.  Refuses functionals whose D^2F is not symmetric on X."""
    Xh = extended(X)
    schedule = dyadic_schedule() if schedule is None else schedule
    fine, idx = schedule.grids(float(t), Xh.breakpoints)
    D2 = F.derivatives(2, fine, Xh)
    asym = float(np.max(np.abs(D2 - np.swapaxes(D2, 1, 2))))
    if asym > sym_tol * max(1.0, float(np.max(np.abs(D2)))):
        raise AsymmetricHessianError(f"second vertical derivative is not symmetric (max gap {asym:.3g})")
    D1 = F.derivatives(1, fine, Xh)
    Xf = Xh.level1_at(fine)
    idx_j = Xh.jump_indices
    jt = Xh.times[idx_j]
    sel = jt <= t
    jump_half = 0.0
    if np.any(sel):
        dX = Xh.jump_logs[idx_j[sel]][:, 1:1 + Xh.d]
        jump_half = 0.5 * float(np.einsum("nab,na,nb->", F.derivatives(2, jt[sel], Xh, side="left"), dX, dX))
    first, second = [], []
    for ii in idx:
        inc = Xf[ii[1:]] - Xf[ii[:-1]]
        first.append(float(np.einsum("na,na->", D1[ii[:-1]], inc)))
        second.append(0.5 * float(np.einsum("nab,na,nb->", D2[ii[:-1]], inc, inc)) - jump_half)
    first, second = np.array(first), np.array(second)
    meshes = schedule.mesh_sizes(fine, idx)
    integral = IntegralResult(meshes, first, _richardson(first))
    total = first + second
    comp = jump_compensator(F, Xh, t, order=1)
    extra = {"path": Xh, "qv_term": float(_richardson(second)[-1]), "raw_total": total}
    return ItoReport("foellmer", float(t), _lhs(F, Xh, t), integral, comp, tol, _richardson(total), extra)


# ------------------------------------------------------------------ RIE


@dataclass
class RIEReport:
    p: float
    clauses: dict
    lift_gap: float
    lift_group_gap: float
    bracket_gap: float
    tol: float = 1e-5
    lift_valid: bool = True

    @property
    def failing(self) -> list:
        out = [k for k, v in self.clauses.items() if not v["holds"]]
        if not self.lift_valid:
            out.append("lift-group")
        return out

    @property
    def holds(self) -> bool:
        return not self.failing

    @property
    def passed(self) -> bool:
        return self.holds and self.lift_gap < self.tol and self.bracket_gap < self.tol

    def to_json(self) -> dict:
        return {"p": self.p, "clauses": self.clauses, "lift_gap": self.lift_gap,
                "lift_group_gap": self.lift_group_gap, "bracket_gap": self.bracket_gap,
                "failing": self.failing, "passed": self.passed}

    def table(self) -> str:
        buf = io.StringIO()
        buf.write("clause,holds,values\n")
        for k, v in self.clauses.items():
            buf.write(f"{k},{v['holds']},\"{' '.join(repr(float(x)) for x in v['values'])}\"\n")
        return buf.getvalue()


def _one_var_path(X: GroupPath, grid: np.ndarray) -> np.ndarray:
    """Cumulative 1-variation (Euclidean) of the level-1 path at grid times."""
    seg = np.linalg.norm(X.seg_logs[:, 1:1 + X.d], axis=1)
    jmp = np.linalg.norm(X.jump_logs[:, 1:1 + X.d], axis=1)
    at_bp = np.concatenate([[0.0], np.cumsum(seg)]) + np.cumsum(jmp)
    k = X._locate(grid)
    frac = np.zeros_like(grid)
    inner = k < X.n_pieces
    frac[inner] = (grid[inner] - X.times[k[inner]]) / (X.times[k[inner] + 1] - X.times[k[inner]])
    return at_bp[k] + frac * np.where(inner, seg[np.minimum(k, X.n_pieces - 1)], 0.0)


def check_rie(X: GroupPath, p: float = 2.5, t: float = 1.0, schedule: MeshSchedule | None = None,
              pair_depth: int = 8, cp: ControlledPath | None = None, uniform_tol: float = 1e-2,
              cauchy_tol: float = 1e-6, tol: float = 1e-5) -> RIEReport:
    """(RIE) clauses along nested dyadic partitions, the rough path built from
    the Riemann sums and quadratic variation, and the consistency of the rough
    integral with the partition-limit route."""
    if not 2.0 < p < 3.0:
        raise ValueError("(RIE) is stated for p in (2, 3)")
    X1 = X.project_level(1)
    # cells between required points halve uniformly, so the partitions are
    # nested and the O(mesh) error terms extrapolate away
    schedule = MeshSchedule(levels=10) if schedule is None else schedule
    fine, idx = schedule.grids(float(t), X1.breakpoints)
    Xf = X1.level1_at(fine)
    Xl = X1.level1_at(fine, side="left")
    d = X1.d
    clauses = {}

    # (i) piecewise-constant approximations converge uniformly
    unif = []
    for ii in idx:
        gap_end = np.linalg.norm(Xl[ii[1:]] - Xf[ii[:-1]], axis=1)
        unif.append(float(np.max(gap_end)) if gap_end.size else 0.0)
    clauses["i"] = {"holds": bool(unif[-1] <= uniform_tol and _decreasing(unif, 1e-14)), "values": unif}

    # (ii) Riemann sums int X^n dX at every finest-grid time, uniform Cauchy gaps
    def sums_on_fine(ii):
        s = fine[ii]
        inc = Xf[ii[1:]] - Xf[ii[:-1]]
        cum = _cumulative(np.einsum("na,nb->nab", Xf[ii[:-1]], inc))
        cell = np.clip(np.searchsorted(s, fine, side="right") - 1, 0, s.size - 1)
        return cum[cell] + np.einsum("na,nb->nab", Xf[ii][cell], Xf - Xf[ii][cell])

    sums = [sums_on_fine(ii) for ii in idx]
    cauchy = [float(np.max(np.abs(a - b))) for a, b in zip(sums[:-1], sums[1:])]
    clauses["ii"] = {"holds": bool(cauchy[-1] <= cauchy_tol * max(1.0, float(np.max(np.abs(sums[-1]))))
                                   or (_decreasing(cauchy[-4:], 1e-14) and cauchy[-1] < uniform_tol)),
                     "values": cauchy}

    # (iii) control w = C * (1-variation)^p; witness C per level must stay bounded
    V = _one_var_path(X1, fine)
    witnesses = []
    for lvl, ii in enumerate(idx):
        if ii.size > 2**pair_depth + 64:
            break
        s_val, s_V = Xf[ii], V[ii]
        cum = _cumulative(np.einsum("na,nb->nab", s_val[:-1], s_val[1:] - s_val[:-1]))
        iu, ju = np.triu_indices(ii.size, k=1)
        w = s_V[ju] - s_V[iu]
        inc = s_val[ju] - s_val[iu]
        first = np.linalg.norm(inc, axis=1) ** p
        area = cum[ju] - cum[iu] - np.einsum("na,nb->nab", s_val[iu], inc)
        second = np.linalg.norm(area.reshape(area.shape[0], -1), axis=1) ** (p / 2.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = np.where(w > 0, first / w**p, 0.0)
            r2 = np.where(w > 0, second / w**p, 0.0)
        witnesses.append(float(np.max(r1, initial=0.0) + np.max(r2, initial=0.0)))
    bounded = bool(witnesses) and all(np.isfinite(witnesses)) and max(witnesses) <= 2.0 * max(witnesses[0], 1.0)
    clauses["iii"] = {"holds": bounded, "values": witnesses}

    # rough path from the Riemann-sum limit and the quadratic variation,
    # extrapolated jointly at the coarsest partition points
    coarse = idx[0]
    combo = []
    for ii in idx:
        inc = Xf[ii[1:]] - Xf[ii[:-1]]
        cum = _cumulative(np.einsum("na,nb->nab", Xf[ii[:-1]], inc) + 0.5 * np.einsum("na,nb->nab", inc, inc))
        combo.append(cum[np.searchsorted(ii, coarse)])
    XX = _richardson(np.array(combo))[-1]
    ct = fine[coarse]
    sig = _cached(X1, 2).values_at(ct)
    offs = level_offsets(d, 2)
    sig2 = sig[:, offs[2]:offs[3]].reshape(-1, d, d)
    lift_gap = float(np.max(np.abs(XX - sig2)))
    Xc = Xf[coarse]
    sym = 0.5 * (XX + np.swapaxes(XX, 1, 2))
    lift_group_gap = float(np.max(np.abs(sym - 0.5 * np.einsum("na,nb->nab", Xc, Xc))))
    lift_valid = lift_group_gap <= 1e-8 and _as_group_path(ct, Xc, XX) is not None

    # rough integral against the lift = partition sums + half int Y' d[X, X]
    if cp is None:
        cp = ControlledPath(lambda ts: X1.level1_at(ts)[:, None, :],
                            lambda ts: np.broadcast_to(np.eye(d), (np.size(ts), 1, d, d)))
    rough = rough_integral(cp, X1.lift(2), t, schedule)
    Yf = np.asarray(cp.Y(fine), dtype=float).reshape(fine.size, -1, d)
    Ypf = np.asarray(cp.Yprime(fine), dtype=float).reshape(fine.size, -1, d, d)
    part = []
    for ii in idx:
        inc = Xf[ii[1:]] - Xf[ii[:-1]]
        part.append(np.einsum("nma,na->m", Yf[ii[:-1]], inc) + 0.5 * np.einsum("nmab,na,nb->m", Ypf[ii[:-1]], inc, inc))
    route = _richardson(np.array(part))[-1]
    bracket_gap = float(np.max(np.abs(np.asarray(rough.value) - route)))
    return RIEReport(float(p), clauses, lift_gap, lift_group_gap, bracket_gap, tol, lift_valid)


def _as_group_path(grid: np.ndarray, X1: np.ndarray, X2: np.ndarray):
    """Level-2 GroupPath interpolating the given values log-linearly, or None
    when an increment is not group-like."""
    d = X1.shape[1]
    vals = np.concatenate([np.ones((grid.size, 1)), X1, X2.reshape(grid.size, -1)], axis=1)
    logs = log_arrays(mul_arrays(inverse_arrays(vals[:-1], d, 2), vals[1:], d, 2), d, 2)
    times = grid
    if grid[-1] < 1.0:
        times = np.append(grid, 1.0)
        logs = np.vstack([logs, np.zeros((1, logs.shape[1]))])
    try:
        return GroupPath(d, 2, times, logs)
    except ValueError:
        return None


# ------------------------------------------------------------------ UAT


@dataclass
class UATReport:
    N: int
    u: object
    sup_errors: list
    rank: int
    n_features: int

    def to_json(self) -> dict:
        return {"N": self.N, "sup_errors": self.sup_errors, "rank": self.rank,
                "n_features": self.n_features, "u": self.u.to_json()}


def uat_fit(F: PathFunctional, X: GroupPath, N: int, grid=None, K: int = 1, derivative_weight: float = 0.1) -> UATReport:
    """Least-squares fit of a linear signature functional to F along X.

    Values alone do not identify the coefficients that only matter for
    derivatives, so by default rows matching DF are appended with weight
    ``derivative_weight`` (0 gives the plain fit on values).  Returns sup
    errors over the grid of F and of D^jF, j <= K, the fitted derivatives
    being the shifts of the fitted u."""
    from .estimators import LinearSignatureRegressor

    Xh = extended(X)
    grid = np.linspace(0.0, 1.0, 201) if grid is None else np.asarray(grid, dtype=float)
    y = F.values(grid, Xh)
    dy = F.derivatives(1, grid, Xh) if derivative_weight > 0 else None
    reg = LinearSignatureRegressor(N=N, path=Xh, derivative_weight=derivative_weight).fit(grid, y, dy)
    errs = [float(np.max(np.abs(reg.predict(grid) - y)))]
    for j in range(1, K + 1):
        true = F.derivatives(j, grid, Xh)
        errs.append(float(np.max(np.abs(reg.predict_derivative(j, grid) - true))))
    return UATReport(int(N), reg.u_, errs, int(reg.rank_), int(reg.n_features_in_signature_))


def dumps(report) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True)
