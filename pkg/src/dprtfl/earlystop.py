from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import InvalidInputError


class Mode(enum.Enum):
    MINIMIZE = "min"
    MAXIMIZE = "max"


@dataclass
class EarlyStopper:
    """Patience-based stopper that remembers the best state seen.

    Clients monitor validation loss (MINIMIZE); the server monitors validation
    accuracy (MAXIMIZE). ``observe`` returns True once more than ``patience``
    consecutive observations failed to improve by ``min_delta``.
    """

    mode: Mode
    patience: int
    min_delta: float = 1e-6
    best_value: float = field(init=False)
    best_state: Any = field(init=False, default=None)
    rounds_without_improvement: int = field(init=False, default=0)
    observations: int = field(init=False, default=0)

    def __post_init__(self):
        if self.patience < 1:
            raise InvalidInputError("patience must be >= 1")
        if self.min_delta < 0:
            raise InvalidInputError("min_delta must be >= 0")
        self.best_value = math.inf if self.mode is Mode.MINIMIZE else -math.inf

    def _improves(self, value: float) -> bool:
        if self.mode is Mode.MINIMIZE:
            return value < self.best_value - self.min_delta
        return value > self.best_value + self.min_delta

    def observe(self, value: float, state: Optional[Any] = None) -> bool:
        value = float(value)
        if not math.isfinite(value):
            raise InvalidInputError(f"observed value must be finite, got {value}")
        self.observations += 1
        if self._improves(value):
            self.best_value = value
            self.best_state = state
            self.rounds_without_improvement = 0
        else:
            self.rounds_without_improvement += 1
        return self.should_stop

    @property
    def should_stop(self) -> bool:
        return self.rounds_without_improvement > self.patience

    def best(self):
        if self.observations == 0:
            raise InvalidInputError("no observations yet")
        return self.best_value, self.best_state
