"""Mergeable running moments.

Chunks of a Monte Carlo run are reduced independently and merged with
Chan's pairwise update, so the merged mean and variance do not depend on how
paths were split.  Sums use Neumaier compensation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def neumaier_sum(values) -> float:
    total = 0.0
    comp = 0.0
    for x in values:
        t = total + x
        if abs(total) >= abs(x):
            comp += (total - t) + x
        else:
            comp += (x - t) + total
        total = t
    return total + comp


@dataclass
class RunningMoments:
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, x) -> "RunningMoments":
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return cls()
        mean = math.fsum(x) / x.size
        return cls(int(x.size), mean, math.fsum((x - mean) ** 2))

    def push(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        if other.n == 0:
            return RunningMoments(self.n, self.mean, self.m2)
        if self.n == 0:
            return RunningMoments(other.n, other.mean, other.m2)
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return RunningMoments(n, mean, m2)

    __add__ = merge

    @property
    def variance(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else math.nan

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.n) if self.n > 1 else math.nan


def mean_stderr(x) -> tuple[float, float]:
    r = RunningMoments.of(x)
    return r.mean, r.stderr
