"""Small statistical helpers shared by the experiment drivers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


def mean_estimate(samples) -> Estimate:
    a = np.asarray(samples, dtype=float)
    se = float(a.std(ddof=1) / np.sqrt(a.size)) if a.size > 1 else 0.0
    return Estimate(float(a.mean()), se)


def variance_estimate(samples, rng: np.random.Generator, n_boot: int = 200) -> Estimate:
    """Sample variance (ddof=1) with a bootstrap standard error."""
    a = np.asarray(samples, dtype=float)
    if a.size < 2 or np.all(a == a[0]):
        # constant samples: exact zero rather than rounding residue of the mean
        return Estimate(0.0, 0.0)
    idx = rng.integers(0, a.size, size=(n_boot, a.size))
    boot = a[idx].var(axis=1, ddof=1)
    return Estimate(float(a.var(ddof=1)), float(boot.std(ddof=1)))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float

    @property
    def factor_per_step(self) -> float:
        """2**slope when the fitted quantity is a log2."""
        return float(2.0**self.slope)


def fit_slope(xs, ys) -> SlopeFit:
    """Ordinary least squares y = slope * x + intercept."""
    x, y = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points for a slope")
    xm = x - x.mean()
    sxx = float(xm @ xm)
    slope = float(xm @ (y - y.mean()) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    if x.size > 2:
        resid = y - (slope * x + intercept)
        se = float(np.sqrt(resid @ resid / (x.size - 2) / sxx))
    else:
        se = 0.0
    return SlopeFit(slope, intercept, se)
