"""
Compensated accumulators with an associative merge, so ensemble statistics
do not drift with worker scheduling or batch size.
"""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class CompensatedSum:
    """Neumaier summation, elementwise over ``shape``."""

    shape: tuple[int, ...] = ()
    total: np.ndarray = field(init=False)
    comp: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.total = np.zeros(self.shape)
        self.comp = np.zeros(self.shape)

    def add(self, x: np.ndarray | float) -> None:
        x = np.asarray(x, dtype=float)
        t = self.total + x
        self.comp = self.comp + np.where(np.abs(self.total) >= np.abs(x), (self.total - t) + x, (x - t) + self.total)
        self.total = t

    def add_batch(self, values: np.ndarray) -> None:
        """Add the rows of ``values`` (leading axis is the batch)."""
        values = np.asarray(values, dtype=float)
        if self.shape == ():
            self.add(math.fsum(values.ravel()))
            return
        for row in values:
            self.add(row)

    def merge(self, other: "CompensatedSum") -> "CompensatedSum":
        out = CompensatedSum(self.shape)
        out.total, out.comp = self.total.copy(), self.comp.copy()
        out.add(other.total)
        out.comp = out.comp + other.comp
        return out

    @property
    def value(self) -> np.ndarray:
        return self.total + self.comp


@dataclass
class RunningMoments:
    """Count, mean, variance and standard error of a stream of samples."""

    shape: tuple[int, ...] = ()
    count: int = 0
    s1: CompensatedSum = field(init=False)
    s2: CompensatedSum = field(init=False)

    def __post_init__(self) -> None:
        self.s1 = CompensatedSum(self.shape)
        self.s2 = CompensatedSum(self.shape)

    def add_batch(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        self.count += values.shape[0]
        self.s1.add_batch(values)
        self.s2.add_batch(values**2)

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        out = RunningMoments(self.shape)
        out.count = self.count + other.count
        out.s1 = self.s1.merge(other.s1)
        out.s2 = self.s2.merge(other.s2)
        return out

    @property
    def mean(self) -> np.ndarray:
        return self.s1.value / self.count if self.count else np.full(self.shape, np.nan)

    @property
    def variance(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros(self.shape)
        centred = self.s2.value - self.count * self.mean**2
        return np.maximum(centred, 0.0) / (self.count - 1)

    @property
    def stderr(self) -> np.ndarray:
        if self.count < 1:
            return np.full(self.shape, np.nan)
        return np.sqrt(self.variance / self.count)
