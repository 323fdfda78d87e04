"""Named paths shared by the tests, the acceptance suite and the CLI."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .paths import GroupPath


def two_segment() -> GroupPath:
    """(0,0) -> (1,0) -> (1,1), each leg taking half the time."""
    return GroupPath.piecewise_linear([0.0, 0.5, 1.0], [[0, 0], [1, 0], [1, 1]])


def levy_jump() -> GroupPath:
    """Two-dimensional path with one jump by (0.5, -1) at t = 0.4."""
    return GroupPath.piecewise_linear([0.0, 0.4, 1.0], [[0, 0], [0.6, 0.3], [0.8, 1.0]],
                                      jumps={0.4: [0.5, -1.0]})


def two_jumps() -> GroupPath:
    """Two-dimensional path with jumps at 0.3 and 0.7."""
    return GroupPath.piecewise_linear([0.0, 0.3, 0.55, 0.7, 1.0],
                                      [[0, 0], [0.4, 0.2], [0.1, 0.6], [0.5, 0.4], [0.3, 0.9]],
                                      jumps={0.3: [0.3, -0.2], 0.7: [-0.25, 0.35]})


def step_path() -> GroupPath:
    """One-dimensional pure-jump path: +1 at 1/3 and +2 at 2/3."""
    return GroupPath.piecewise_linear([0.0, 1 / 3, 2 / 3, 1.0], [[0], [0], [0], [0]],
                                      jumps={1 / 3: [1.0], 2 / 3: [2.0]})


def dyadic_steps() -> GroupPath:
    """Two-dimensional pure-jump path with jumps at dyadic times."""
    return GroupPath.piecewise_linear([0.0, 0.25, 0.625, 1.0], [[0, 0]] * 4,
                                      jumps={0.25: [1.0, 0.5], 0.625: [-0.5, 1.5]})


def pure_jump() -> GroupPath:
    """Jump by (1, 1) at 1/2 and nothing else."""
    return GroupPath.piecewise_linear([0.0, 0.5, 1.0], [[0, 0]] * 3, jumps={0.5: [1.0, 1.0]})


def random_segments(rng: np.random.Generator, n: int = 3, d: int = 2, scale: float = 1.0) -> GroupPath:
    times = np.concatenate([[0.0], np.sort(rng.uniform(0.1, 0.9, n - 1)), [1.0]])
    pts = np.vstack([np.zeros(d), np.cumsum(rng.normal(scale=scale, size=(n, d)), axis=0)])
    return GroupPath.piecewise_linear(times, pts)


def random_jump_path(rng: np.random.Generator, n: int = 4, d: int = 2, n_jumps: int = 2, scale: float = 0.5) -> GroupPath:
    times = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 0.95, n - 1)), [1.0]])
    pts = np.vstack([np.zeros(d), np.cumsum(rng.normal(scale=scale, size=(n, d)), axis=0)])
    where = rng.choice(np.arange(1, n), size=min(n_jumps, n - 1), replace=False)
    jumps = {float(times[k]): rng.normal(scale=scale, size=d).tolist() for k in sorted(where)}
    return GroupPath.piecewise_linear(times, pts, jumps=jumps)


def area_path() -> GroupPath:
    """Level-2 continuous path whose second segment carries pure area."""
    seg1 = [0.0, 0.6, 0.2, 0.0, 0.0, 0.0, 0.0]
    seg2 = [0.0, 0.1, -0.3, 0.0, 0.25, -0.25, 0.0]
    return GroupPath.from_pieces(2, 2, [(0.0, 0.5, seg1), (0.5, 1.0, seg2)])


def chen_fixtures() -> list:
    """Five fixtures for the Chen-exactness check, the last with a jump."""
    rng = np.random.default_rng(11)
    return [two_segment(), random_segments(rng, 3), random_segments(rng, 4), area_path().project_level(1), levy_jump()]


NAMED = {
    "two_segment": two_segment,
    "levy_jump": levy_jump,
    "two_jumps": two_jumps,
    "step_path": step_path,
    "dyadic_steps": dyadic_steps,
    "pure_jump": pure_jump,
}


def write_all(directory: str | Path) -> list:
    """Regenerate the JSON golden paths; returns the written file names."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, make in sorted(NAMED.items()):
        target = out / f"{name}.json"
        target.write_text(json.dumps(make().to_json(), indent=2) + "\n")
        written.append(str(target))
    return written
