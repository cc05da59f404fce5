"""Adaptive role reassignment: coordinator failure detection and election.

The server coordinates while it is alive. When the current coordinator misses
its heartbeat, the lowest-numbered active, non-failed client takes over. A
recovered server reclaims the role at the next round boundary.

Lowest-id election is deterministic and easy to audit. Picking the client
with the largest dataset would be an equally valid rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import NoActiveClientsError
from .tcm import SERVER_ID


@dataclass
class RoleState:
    coordinator: int = SERVER_ID
    server_alive: bool = True
    active_clients: set = field(default_factory=set)
    election_count: int = 0

    @property
    def coordinator_is_server(self) -> bool:
        return self.coordinator == SERVER_ID

    def check_invariants(self):
        if self.coordinator == SERVER_ID:
            assert self.server_alive, "server coordinating while down"
        else:
            assert self.coordinator in self.active_clients, "client coordinator is not active"


def detect_failure(state: RoleState, heartbeat_ok: bool) -> bool:
    """True iff the current coordinator (server or client) missed its heartbeat."""
    return not heartbeat_ok


def coordinator_heartbeat(state: RoleState) -> bool:
    if state.coordinator == SERVER_ID:
        return state.server_alive
    return state.coordinator in state.active_clients


def elect(state: RoleState, failed=()) -> int:
    eligible = sorted(c for c in state.active_clients if c not in set(failed))
    if not eligible:
        raise NoActiveClientsError("no active client is eligible to coordinate")
    state.coordinator = eligible[0]
    state.election_count += 1
    return state.coordinator


def on_server_recovery(state: RoleState) -> RoleState:
    """Hand the role back to a live server; no-op if it already coordinates."""
    if state.server_alive and state.coordinator != SERVER_ID:
        state.coordinator = SERVER_ID
    return state
