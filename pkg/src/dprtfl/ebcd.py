"""Moment-based corruption detection for global models.

The name says "entropy" but the mechanism is the population variance,
skewness, and (Pearson, non-excess) kurtosis of the flattened parameter
vector, compared against the mean moments of the clients' first trained
models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BaselineNotEstablishedError, InvalidInputError
from .model import ParamVector

DEGENERATE_VARIANCE = 1e-24
BAND_FLOOR = 1e-6


@dataclass(frozen=True)
class MomentStats:
    variance: float
    skewness: float
    kurtosis: float

    def as_tuple(self):
        return (self.variance, self.skewness, self.kurtosis)


@dataclass
class EbcdBaseline:
    baseline: MomentStats | None = None
    tolerance_factor: float = 5.0

    @property
    def established(self) -> bool:
        return self.baseline is not None


def _flat(params) -> np.ndarray:
    if isinstance(params, ParamVector):
        return params.flat()
    return np.asarray(params, dtype=np.float64).reshape(-1)


def compute_moments(params) -> MomentStats:
    x = _flat(params)
    if x.size < 2:
        raise InvalidInputError("moments need at least two entries")
    c = x - x.mean()
    m2 = float(np.mean(c ** 2))
    if m2 < DEGENERATE_VARIANCE:
        return MomentStats(m2, 0.0, 3.0)
    m3 = float(np.mean(c ** 3))
    m4 = float(np.mean(c ** 4))
    return MomentStats(m2, m3 / m2 ** 1.5, m4 / m2 ** 2)


def establish_baseline(client_models, tolerance_factor: float = 5.0) -> EbcdBaseline:
    """Baseline = per-moment mean over the clients' initial trained models.

    Items may be parameter vectors or already-computed ``MomentStats`` (clients
    can report their three moments instead of the model itself).
    """
    stats = [m if isinstance(m, MomentStats) else compute_moments(m) for m in client_models]
    if not stats:
        raise InvalidInputError("baseline needs at least one client model")
    if not tolerance_factor > 0:
        raise InvalidInputError("tolerance_factor must be > 0")
    mean = np.mean(np.array([s.as_tuple() for s in stats]), axis=0)
    return EbcdBaseline(MomentStats(*map(float, mean)), float(tolerance_factor))


def check(params, b: EbcdBaseline) -> tuple[bool, MomentStats]:
    if not b.established:
        raise BaselineNotEstablishedError("EBCD baseline has not been established")
    stats = compute_moments(params)
    alert = False
    for got, ref in zip(stats.as_tuple(), b.baseline.as_tuple()):
        if abs(got - ref) > b.tolerance_factor * (abs(ref) + BAND_FLOOR):
            alert = True
    return alert, stats
