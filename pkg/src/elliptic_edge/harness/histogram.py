"""Histograms and windowed conditional means with exact, order-independent
merging.

Weighted sums are accumulated as exact rationals (every float is a dyadic
rational), so merging partial results in any grouping or order gives
bit-identical totals. Floats appear only when results are read out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional

import numpy as np

COUNT_FLOOR = 50


class Histogram:
    """Weighted histogram on fixed sorted edges with under/overflow tallies."""

    def __init__(self, edges):
        edges = np.asarray(edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be a strictly increasing list of at least two values")
        self.edges = edges
        nb = edges.size - 1
        self._w = [Fraction(0)] * nb
        self._w2 = [Fraction(0)] * nb
        self._n = [0] * nb
        self._under = Fraction(0)
        self._over = Fraction(0)

    @property
    def nbins(self) -> int:
        return self.edges.size - 1

    def fill(self, values, weights=None) -> None:
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            return
        w = np.ones_like(values) if weights is None else np.asarray(weights, dtype=float).ravel()
        idx = np.searchsorted(self.edges, values, side="right") - 1
        # the last edge closes the final bin
        idx[values == self.edges[-1]] = self.nbins - 1
        for i, wi in zip(idx.tolist(), w.tolist()):
            if i < 0:
                self._under += Fraction(wi)
            elif i >= self.nbins:
                self._over += Fraction(wi)
            else:
                f = Fraction(wi)
                self._w[i] += f
                self._w2[i] += f * f
                self._n[i] += 1

    def merge(self, other: "Histogram") -> "Histogram":
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge histograms with different edges")
        out = Histogram(self.edges)
        out._w = [a + b for a, b in zip(self._w, other._w)]
        out._w2 = [a + b for a, b in zip(self._w2, other._w2)]
        out._n = [a + b for a, b in zip(self._n, other._n)]
        out._under = self._under + other._under
        out._over = self._over + other._over
        return out

    def __eq__(self, other) -> bool:
        return (isinstance(other, Histogram) and np.array_equal(self.edges, other.edges)
                and self._w == other._w and self._w2 == other._w2 and self._n == other._n
                and self._under == other._under and self._over == other._over)

    @property
    def counts(self) -> List[float]:
        return [float(v) for v in self._w]

    @property
    def weight_sq(self) -> List[float]:
        return [float(v) for v in self._w2]

    @property
    def raw_counts(self) -> List[int]:
        return list(self._n)

    @property
    def underflow(self) -> float:
        return float(self._under)

    @property
    def overflow(self) -> float:
        return float(self._over)

    @property
    def total(self) -> float:
        return float(sum(self._w, Fraction(0)) + self._under + self._over)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def density(self, total: Optional[float] = None):
        """Per-bin density estimate and its standard error, normalized by
        ``total`` (default: all weight including under/overflow)."""
        tot = self.total if total is None else float(total)
        if tot <= 0:
            nan = np.full(self.nbins, np.nan)
            return nan, nan.copy()
        counts = np.array(self.counts)
        value = counts / (tot * self.widths)
        err = np.sqrt(np.array(self.weight_sq)) / (tot * self.widths)
        return value, err


@dataclass
class BinnedConditionalMean:
    centers: List[float]
    means: List[float]
    std_errors: List[float]
    counts: List[int]
    floor: int = COUNT_FLOOR

    @property
    def defined(self) -> List[bool]:
        return [c >= self.floor for c in self.counts]


class WindowedMean:
    """Running sums of a value over windows center +/- half_width.

    A sample contributes to every window containing its coordinate, so
    windows may overlap.
    """

    def __init__(self, centers, half_width: float):
        self.centers = np.asarray(centers, dtype=float)
        if self.centers.ndim != 1 or self.centers.size == 0:
            raise ValueError("need at least one window center")
        if not half_width > 0:
            raise ValueError("half_width must be positive")
        self.half_width = float(half_width)
        k = self.centers.size
        self._n = [0] * k
        self._s = [Fraction(0)] * k
        self._s2 = [Fraction(0)] * k

    def membership(self, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=float).ravel()
        return np.abs(coords[:, None] - self.centers[None, :]) <= self.half_width

    def fill(self, coords, values) -> int:
        """Add samples; returns how many fell in at least one window."""
        values = np.asarray(values, dtype=float).ravel()
        member = self.membership(coords)
        hits = 0
        for j, row in enumerate(member):
            where = np.nonzero(row)[0]
            if where.size == 0:
                continue
            hits += 1
            f = Fraction(float(values[j]))
            f2 = f * f
            for i in where.tolist():
                self._n[i] += 1
                self._s[i] += f
                self._s2[i] += f2
        return hits

    def merge(self, other: "WindowedMean") -> "WindowedMean":
        if not (np.array_equal(self.centers, other.centers) and self.half_width == other.half_width):
            raise ValueError("cannot merge windowed means with different windows")
        out = WindowedMean(self.centers, self.half_width)
        out._n = [a + b for a, b in zip(self._n, other._n)]
        out._s = [a + b for a, b in zip(self._s, other._s)]
        out._s2 = [a + b for a, b in zip(self._s2, other._s2)]
        return out

    def __eq__(self, other) -> bool:
        return (isinstance(other, WindowedMean) and np.array_equal(self.centers, other.centers)
                and self.half_width == other.half_width and self._n == other._n
                and self._s == other._s and self._s2 == other._s2)

    @property
    def counts(self) -> List[int]:
        return list(self._n)

    def result(self, floor: int = COUNT_FLOOR) -> BinnedConditionalMean:
        means, errs = [], []
        for n, s, s2 in zip(self._n, self._s, self._s2):
            if n < max(floor, 2):
                means.append(math.nan)
                errs.append(math.nan)
                continue
            mean = s / n
            var = (s2 - n * mean * mean) / (n - 1)
            means.append(float(mean))
            errs.append(math.sqrt(max(float(var), 0.0) / n))
        return BinnedConditionalMean(self.centers.tolist(), means, errs, list(self._n), floor)


class SampleSet:
    """Multiset of floats whose read-out is sorted, hence order-independent."""

    def __init__(self, values=()):
        self._values = [float(v) for v in values]

    def add(self, values) -> None:
        self._values.extend(float(v) for v in np.asarray(values, dtype=float).ravel())

    def merge(self, other: "SampleSet") -> "SampleSet":
        return SampleSet(self._values + other._values)

    def values(self) -> np.ndarray:
        return np.sort(np.array(self._values, dtype=float))

    def __len__(self) -> int:
        return len(self._values)

    def __eq__(self, other) -> bool:
        return isinstance(other, SampleSet) and np.array_equal(self.values(), other.values())
