"""Timing of low-rank grid evaluation against dense SVDs."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .grid import GridSpec
from .lowrank import LowRankFactors, mu_many
from .oracle import dense_sigma_min_many


@dataclass(frozen=True)
class BenchRow:
    d: int
    r: int
    m: int
    lowrank_mean: float
    lowrank_std: float
    dense_mean: float
    dense_std: float
    dense_points: int

    @property
    def ratio(self) -> float:
        return self.dense_mean / self.lowrank_mean

    @property
    def log10_ratio(self) -> float:
        return float(np.log10(self.ratio))

    def as_row(self) -> list:
        return [self.d, self.r, self.m, self.lowrank_mean, self.lowrank_std,
                self.dense_mean, self.dense_std, self.dense_points, self.log10_ratio]


HEADER = ["d", "r", "m", "lowrank_mean_s", "lowrank_std_s", "dense_mean_s",
          "dense_std_s", "dense_points_timed", "log10_ratio"]


def random_factors(d: int, r: int, rng) -> LowRankFactors:
    u = (rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))) / np.sqrt(2 * d)
    v = (rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))) / np.sqrt(2 * d)
    return LowRankFactors(u, v)


def bench_grid(m: int) -> np.ndarray:
    side = max(1, int(round(np.sqrt(m))))
    pts = GridSpec(-1.5, 1.5, -1.5, 1.5, side, max(1, -(-m // side))).points()
    return pts[:m]


def run_case(d: int, r: int, m: int, trials: int, seed=0, dense_points: int | None = None,
             dense_budget: float = 4.0) -> BenchRow:
    """Time one (d, r) configuration.

    The dense side is timed on a prefix of the grid and scaled linearly to m
    points (each point is one independent SVD, so cost is linear in m).  With
    ``dense_points=None`` the prefix is sized to roughly ``dense_budget`` seconds.
    """
    rng = np.random.default_rng(seed)
    f = random_factors(d, r, rng)
    zs = bench_grid(m)
    a = f.dense()
    if dense_points is None:
        t0 = time.perf_counter()
        dense_sigma_min_many(a, zs[:1])
        one = max(time.perf_counter() - t0, 1e-6)
        dense_points = int(np.clip(dense_budget / one, 3, m))
    dense_points = min(dense_points, m)
    low, dense = [], []
    for _ in range(trials):
        t0 = time.perf_counter()
        g = LowRankFactors(f.u, f.v).gram  # Gram blocks are part of the cost
        mu_many(g, zs)
        low.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        dense_sigma_min_many(a, zs[:dense_points])
        dense.append((time.perf_counter() - t0) * m / dense_points)
    return BenchRow(d, r, m, float(np.mean(low)), float(np.std(low)),
                    float(np.mean(dense)), float(np.std(dense)), dense_points)


def run(dims, ranks, m: int, trials: int, seed=0, dense_points: int | None = None) -> list[BenchRow]:
    return [run_case(d, r, m, trials, seed, dense_points) for r in ranks for d in dims]
