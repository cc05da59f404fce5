"""Parameter vectors and their canonical byte encoding.

A linear model is a coefficient vector plus an intercept. Everything that
crosses a module boundary (deltas, checkpoints, commitments) works on the
flattened form ``[w_0, ..., w_{d-1}, b]`` so that clipping and noise treat the
intercept exactly like any coefficient.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

_LEN = struct.Struct(">I")


def _frozen(values, *, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} contains NaN or Inf")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Immutable model parameters: ``coef`` (length d) and ``intercept``."""

    coef: np.ndarray
    intercept: float

    def __post_init__(self):
        object.__setattr__(self, "coef", _frozen(self.coef, what="coefficients"))
        b = float(self.intercept)
        if not np.isfinite(b):
            raise InvalidInputError("intercept is NaN or Inf")
        object.__setattr__(self, "intercept", b)

    @classmethod
    def zeros(cls, dim: int) -> "ParamVector":
        return cls(np.zeros(dim), 0.0)

    @classmethod
    def from_flat(cls, flat) -> "ParamVector":
        arr = np.asarray(flat, dtype=np.float64).reshape(-1)
        if arr.size < 1:
            raise InvalidInputError("flat parameter vector needs at least the intercept")
        return cls(arr[:-1], float(arr[-1]))

    @property
    def dim(self) -> int:
        return int(self.coef.size)

    def flat(self) -> np.ndarray:
        out = np.empty(self.dim + 1)
        out[:-1] = self.coef
        out[-1] = self.intercept
        out.setflags(write=False)
        return out

    def to_bytes(self) -> bytes:
        return canonical_serialize(self.flat())

    def bitwise_equal(self, other: "ParamVector") -> bool:
        return self.to_bytes() == other.to_bytes()

    def __eq__(self, other):
        if not isinstance(other, ParamVector):
            return NotImplemented
        return self.bitwise_equal(other)

    __hash__ = None

    def __repr__(self):
        return f"ParamVector(dim={self.dim}, intercept={self.intercept!r})"


def as_delta(values) -> np.ndarray:
    """Validate and return a float64 1-D delta vector (finite entries only)."""
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("delta contains NaN or Inf")
    return arr


def l2_norm(v) -> float:
    """sqrt(sum v_i^2), scaled by max |v_i| so tiny or huge entries neither underflow nor overflow."""
    arr = as_delta(v)
    if arr.size == 0:
        raise InvalidInputError("l2_norm of an empty vector")
    top = float(np.max(np.abs(arr)))
    if top == 0.0:
        return 0.0
    scaled = arr / top
    return top * float(np.sqrt(np.sum(scaled * scaled)))


def canonical_serialize(v) -> bytes:
    """Encode as a 4-byte big-endian count followed by big-endian binary64 entries."""
    arr = as_delta(v)
    return _LEN.pack(arr.size) + arr.astype(">f8").tobytes()


def canonical_deserialize(data: bytes) -> np.ndarray:
    if len(data) < 4:
        raise InvalidInputError("truncated canonical bytes")
    (n,) = _LEN.unpack_from(data)
    if len(data) != 4 + 8 * n:
        raise InvalidInputError(f"expected {4 + 8 * n} bytes, got {len(data)}")
    return np.frombuffer(data, dtype=">f8", offset=4, count=n).astype(np.float64)
