"""Temporal checkpoint manifold: an append-only, hash-chained log of global states.

Every entry is sealed with SHA-256 over a fixed binary encoding of its fields
plus the previous entry's hash, so editing any stored entry breaks the chain.
Dropping a suffix of entries cannot be detected this way; that would need an
externally anchored head hash.

Entry encoding (big-endian)::

    uint64 round | uint64 timestamp | canonical_serialize(params)
    | uint32 n_contributors | n * (int64 id, uint64 count, binary64 sigma, uint8 passed)
    | int64 coordinator_id | uint8 action | 32-byte prev_hash

Timestamps are a logical clock (entry counter), never wall time.
"""

from __future__ import annotations

import enum
import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import CheckpointNotFoundError, InvalidInputError, OrderingError
from .model import ParamVector, canonical_deserialize, canonical_serialize

GENESIS_PREV = bytes(32)
SERVER_ID = -1

_HEAD = struct.Struct(">QQ")
_COUNT = struct.Struct(">I")
_CONTRIB = struct.Struct(">qQdB")
_TAIL = struct.Struct(">qB")


class Action(enum.IntEnum):
    GENESIS = 0
    AGGREGATE = 1
    RECOVERY_ROLLBACK = 2
    ELECTION = 3
    SKIPPED_ROUND = 4


@dataclass(frozen=True)
class Contributor:
    client_id: int
    sample_count: int
    noise_sigma: float
    zkip_passed: bool


@dataclass(frozen=True, eq=False)
class CheckpointEntry:
    round: int
    timestamp: int
    global_params: ParamVector
    contributors: tuple
    coordinator_id: int
    action: Action
    prev_hash: bytes
    entry_hash: bytes
    # side channel, excluded from the hash
    wall_time: Optional[float] = None

    def body_bytes(self) -> bytes:
        return encode_body(
            self.round, self.timestamp, self.global_params, self.contributors,
            self.coordinator_id, self.action, self.prev_hash,
        )

    def recompute_hash(self) -> bytes:
        return hashlib.sha256(self.body_bytes()).digest()


def encode_body(round, timestamp, params, contributors, coordinator_id, action, prev_hash) -> bytes:
    if round < 0 or timestamp < 0:
        raise InvalidInputError("round and timestamp must be non-negative")
    parts = [_HEAD.pack(round, timestamp), canonical_serialize(params.flat()), _COUNT.pack(len(contributors))]
    for c in contributors:
        parts.append(_CONTRIB.pack(c.client_id, c.sample_count, c.noise_sigma, 1 if c.zkip_passed else 0))
    parts.append(_TAIL.pack(coordinator_id, int(action)))
    parts.append(bytes(prev_hash))
    return b"".join(parts)


@dataclass
class Manifold:
    entries: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def head_hash(self) -> bytes:
        return self.entries[-1].entry_hash if self.entries else GENESIS_PREV

    def append(
        self,
        round: int,
        global_params: ParamVector,
        coordinator_id: int,
        action: Action,
        contributors: Iterable[Contributor] = (),
        wall_time: Optional[float] = None,
    ) -> CheckpointEntry:
        return append(self, round, global_params, coordinator_id, action, contributors, wall_time)


def append(
    m: Manifold,
    round: int,
    global_params: ParamVector,
    coordinator_id: int,
    action: Action,
    contributors: Iterable[Contributor] = (),
    wall_time: Optional[float] = None,
) -> CheckpointEntry:
    if m.entries and round < m.entries[-1].round:
        raise OrderingError(f"round {round} precedes last checkpoint round {m.entries[-1].round}")
    contributors = tuple(contributors)
    timestamp = m.entries[-1].timestamp + 1 if m.entries else 0
    prev = m.head_hash
    body = encode_body(round, timestamp, global_params, contributors, coordinator_id, Action(action), prev)
    entry = CheckpointEntry(
        round=int(round), timestamp=timestamp, global_params=global_params, contributors=contributors,
        coordinator_id=int(coordinator_id), action=Action(action), prev_hash=prev,
        entry_hash=hashlib.sha256(body).digest(), wall_time=wall_time,
    )
    m.entries.append(entry)
    return entry


def first_bad_index(entries: Sequence[CheckpointEntry]) -> Optional[int]:
    """Index of the first entry whose hash or link fails, or None if the chain holds."""
    prev = GENESIS_PREV
    last_round = None
    for i, e in enumerate(entries):
        try:
            ok = e.prev_hash == prev and e.recompute_hash() == e.entry_hash
        except (InvalidInputError, struct.error, ValueError):
            ok = False
        if not ok or (last_round is not None and e.round < last_round):
            return i
        prev, last_round = e.entry_hash, e.round
    return None


def verify_chain(m) -> bool:
    entries = m.entries if isinstance(m, Manifold) else list(m)
    return first_bad_index(entries) is None


def rollback(m: Manifold, target_round: int) -> ParamVector:
    """Parameters of the latest entry whose round is <= ``target_round``."""
    for e in reversed(m.entries):
        if e.round <= target_round:
            return e.global_params
    raise CheckpointNotFoundError(f"no checkpoint at or before round {target_round}")


# ---------------------------------------------------------------- audit file

def entry_to_json(e: CheckpointEntry) -> str:
    rec = {
        "round": e.round,
        "timestamp": e.timestamp,
        "coordinator_id": e.coordinator_id,
        "action": e.action.name,
        "global_params": canonical_serialize(e.global_params.flat()).hex(),
        "contributors": [
            [c.client_id, c.sample_count, struct.pack(">d", c.noise_sigma).hex(), c.zkip_passed]
            for c in e.contributors
        ],
        "prev_hash": e.prev_hash.hex(),
        "entry_hash": e.entry_hash.hex(),
    }
    return json.dumps(rec, separators=(",", ":"))


def entry_from_json(line: str) -> CheckpointEntry:
    rec = json.loads(line)
    contributors = tuple(
        Contributor(int(cid), int(n), struct.unpack(">d", bytes.fromhex(sig))[0], bool(ok))
        for cid, n, sig, ok in rec["contributors"]
    )
    return CheckpointEntry(
        round=int(rec["round"]),
        timestamp=int(rec["timestamp"]),
        global_params=ParamVector.from_flat(canonical_deserialize(bytes.fromhex(rec["global_params"]))),
        contributors=contributors,
        coordinator_id=int(rec["coordinator_id"]),
        action=Action[rec["action"]],
        prev_hash=bytes.fromhex(rec["prev_hash"]),
        entry_hash=bytes.fromhex(rec["entry_hash"]),
    )


def export_manifold(m: Manifold, path) -> None:
    text = "".join(entry_to_json(e) + "\n" for e in m.entries)
    Path(path).write_text(text, encoding="utf-8")


def audit_file(path) -> tuple[int, Optional[int]]:
    """Verify an exported manifold. Returns (entry_count, first_bad_index).

    A line that no longer parses counts as a chain break at that line.
    """
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    entries = []
    for i, line in enumerate(lines):
        try:
            entries.append(entry_from_json(line))
        except (ValueError, KeyError, TypeError, InvalidInputError, struct.error):
            bad = first_bad_index(entries)
            return len(lines), i if bad is None else bad
    return len(lines), first_bad_index(entries)


def load_manifold(path) -> Manifold:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    return Manifold([entry_from_json(ln) for ln in lines])
