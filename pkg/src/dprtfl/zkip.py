"""Hash-commitment integrity proofs for client deltas.

Despite the "zero-knowledge" name this is a keyed SHA-256 commitment: it shows
that an update was produced by someone holding the shared secret and was not
altered afterwards. It gives no zero-knowledge guarantee to arbitrary
verifiers and no protection once the secret leaks.

Preimage layout (frozen)::

    canonical_serialize(delta) || int64_be(client_id) || int64_be(round) || secret

Binding client id and round stops an old valid update from being replayed
under a different round or identity.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from dataclasses import dataclass

from .errors import InvalidInputError
from .model import canonical_serialize

MIN_SECRET_BYTES = 16
_CONTEXT = struct.Struct(">qq")


@dataclass(frozen=True)
class SharedSecret:
    secret: bytes

    def __post_init__(self):
        if not isinstance(self.secret, (bytes, bytearray)):
            raise InvalidInputError("secret must be bytes")
        if len(self.secret) < MIN_SECRET_BYTES:
            raise InvalidInputError(f"secret must be at least {MIN_SECRET_BYTES} bytes")
        object.__setattr__(self, "secret", bytes(self.secret))


@dataclass(frozen=True)
class IntegrityProof:
    digest: bytes
    client_id: int
    round: int

    def __post_init__(self):
        if len(self.digest) != 32:
            raise InvalidInputError("digest must be exactly 32 bytes")


def proof_preimage(d, client_id: int, round: int, secret: SharedSecret) -> bytes:
    return canonical_serialize(d) + _CONTEXT.pack(int(client_id), int(round)) + secret.secret


def generate_proof(d, secret: SharedSecret, client_id: int, round: int) -> IntegrityProof:
    digest = hashlib.sha256(proof_preimage(d, client_id, round, secret)).digest()
    return IntegrityProof(digest=digest, client_id=int(client_id), round=int(round))


def verify_proof(d, proof: IntegrityProof, secret: SharedSecret) -> bool:
    try:
        expected = hashlib.sha256(proof_preimage(d, proof.client_id, proof.round, secret)).digest()
    except InvalidInputError:
        return False
    return hmac.compare_digest(expected, proof.digest)
