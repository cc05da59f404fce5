"""Client-side local differential privacy for parameter deltas.

Each delta is L2-clipped to norm ``clip_bound`` and perturbed with i.i.d.
Gaussian noise of standard deviation

    sigma = clip_bound * sqrt(2 * ln(1.25 / delta)) / epsilon

Noise comes from numpy's ``Generator(PCG64(seed)).standard_normal`` (the
ziggurat method). The generator and method are fixed so that a given seed
yields the same draws on every platform numpy supports.

No composition across rounds is tracked; the per-round (epsilon, delta) is
what is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError
from .model import as_delta, l2_norm

CLIP_STABILIZER = 1e-6


@dataclass(frozen=True)
class PrivacySpec:
    epsilon: float = 1.0
    delta: float = 1e-5
    clip_bound: float = 1.0
    enabled: bool = True

    def __post_init__(self):
        if not self.clip_bound > 0:
            raise InvalidConfigError(f"clip_bound must be > 0, got {self.clip_bound}")
        if self.enabled:
            # an enabled mechanism with epsilon <= 0 would silently add no noise
            if not self.epsilon > 0:
                raise InvalidConfigError(f"epsilon must be > 0 when privacy is enabled, got {self.epsilon}")
            if not 0 < self.delta < 1:
                raise InvalidConfigError(f"delta must lie in (0, 1), got {self.delta}")
        elif self.epsilon < 0:
            raise InvalidConfigError("epsilon must be non-negative")


@dataclass(frozen=True)
class NoiseReport:
    sigma: float
    pre_clip_norm: float
    clipped: bool


def clip_delta(d, clip_bound: float) -> np.ndarray:
    if not clip_bound > 0:
        raise InvalidConfigError(f"clip bound must be > 0, got {clip_bound}")
    arr = as_delta(d)
    norm = l2_norm(arr) if arr.size else 0.0
    return arr * min(1.0, clip_bound / (norm + CLIP_STABILIZER))


def noise_sigma(spec: PrivacySpec) -> float:
    if not spec.enabled or spec.epsilon <= 0:
        return 0.0
    if not 0 < spec.delta < 1:
        raise InvalidConfigError(f"delta must lie in (0, 1), got {spec.delta}")
    return spec.clip_bound * math.sqrt(2.0 * math.log(1.25 / spec.delta)) / spec.epsilon


def standard_normal_draws(seed: int, n: int) -> np.ndarray:
    return np.random.Generator(np.random.PCG64(int(seed))).standard_normal(n)


def privatize(d, spec: PrivacySpec, rng_seed: int) -> tuple[np.ndarray, NoiseReport]:
    """Clip ``d`` and add calibrated Gaussian noise.

    With privacy disabled the result is exactly ``clip_delta(d, C)`` and no
    random numbers are drawn.
    """
    arr = as_delta(d)
    pre = l2_norm(arr) if arr.size else 0.0
    clipped = clip_delta(arr, spec.clip_bound)
    sigma = noise_sigma(spec)
    report = NoiseReport(sigma=sigma, pre_clip_norm=pre, clipped=bool(spec.clip_bound < pre + CLIP_STABILIZER))
    if sigma == 0.0:
        return clipped, report
    return clipped + sigma * standard_normal_draws(rng_seed, arr.size), report
