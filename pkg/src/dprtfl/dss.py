"""Differential state synchronization: deltas and size-weighted aggregation."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, NoUpdatesError
from .model import ParamVector, as_delta


def compute_delta(local: ParamVector, base: ParamVector) -> np.ndarray:
    if local.dim != base.dim:
        raise InvalidInputError(f"dimension mismatch: {local.dim} vs {base.dim}")
    return local.flat() - base.flat()


def apply_delta(base: ParamVector, d) -> ParamVector:
    arr = as_delta(d)
    if arr.size != base.dim + 1:
        raise InvalidInputError(f"delta has {arr.size} entries, model needs {base.dim + 1}")
    return ParamVector.from_flat(base.flat() + arr)


def aggregate(updates: Iterable[Sequence]) -> np.ndarray:
    """Weighted mean of deltas, weights proportional to sample counts.

    ``updates`` holds ``(delta, sample_count)`` or ``(client_id, delta,
    sample_count)`` items. Summation runs in ascending client id (input order
    when ids are absent) so the result does not depend on arrival order.
    """
    items = []
    for pos, u in enumerate(updates):
        if len(u) == 3:
            cid, d, n = u
        else:
            (d, n), cid = u, pos
        items.append((cid, as_delta(d), int(n)))
    if not items:
        raise NoUpdatesError("no valid updates to aggregate")
    items.sort(key=lambda t: t[0])
    dim = items[0][1].size
    if any(d.size != dim for _, d, _ in items):
        raise InvalidInputError("deltas have different dimensions")
    if any(n < 1 for _, _, n in items):
        raise InvalidInputError("sample counts must be >= 1")
    total = float(sum(n for _, _, n in items))
    acc = np.zeros(dim)
    for _, d, n in items:
        acc += (n / total) * d
    return acc
