"""Simulation configuration and fault scripts.

Configs are INI files (``configparser``) with typed sections; see
``scenarios/schema.cfg`` for every key, its type, and its default. Unknown
sections or keys are rejected so that typos fail loudly.
"""

from __future__ import annotations

import configparser
import dataclasses
import enum
import hashlib
import json
import re
import struct
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import InvalidConfigError
from .ldp import PrivacySpec
from .tcm import SERVER_ID
from .trainer import TrainConfig

DEFAULT_SECRET = b"dprtfl-simulation-shared-secret"


class FaultKind(enum.Enum):
    CRASH = "crash"
    RECOVER = "recover"
    DROPOUT = "dropout"
    CORRUPT_SIGNED = "corrupt_signed"
    CORRUPT_TAMPERED = "corrupt_tampered"


_KIND_ALIASES = {"corrupt": FaultKind.CORRUPT_SIGNED, "corrupt_update": FaultKind.CORRUPT_SIGNED}


@dataclass(frozen=True)
class FaultEvent:
    round: int
    target: int  # SERVER_ID or a client id
    kind: FaultKind
    scale: float = 1.0

    def __post_init__(self):
        if self.round < 0:
            raise InvalidConfigError("fault round must be >= 0")
        if self.kind in (FaultKind.CORRUPT_SIGNED, FaultKind.CORRUPT_TAMPERED) and self.target == SERVER_ID:
            raise InvalidConfigError("corruption events can only target clients")
        if self.kind is FaultKind.DROPOUT and self.target == SERVER_ID:
            raise InvalidConfigError("dropout applies to clients; use crash for the server")

    def describe(self) -> str:
        who = "server" if self.target == SERVER_ID else f"client:{self.target}"
        tail = f" {self.scale!r}" if self.kind in (FaultKind.CORRUPT_SIGNED, FaultKind.CORRUPT_TAMPERED) else ""
        return f"{self.round} {who} {self.kind.value}{tail}"


@dataclass(frozen=True)
class FaultScript:
    events: tuple = ()

    def __post_init__(self):
        rounds = [e.round for e in self.events]
        if rounds != sorted(rounds):
            raise InvalidConfigError("fault events must be sorted by round")

    def at(self, round: int) -> list:
        return [e for e in self.events if e.round == round]

    @classmethod
    def parse(cls, text: str) -> "FaultScript":
        events = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if line:
                events.append(parse_event(line))
        return cls(tuple(events))


_EVENT_RE = re.compile(r"^(\d+)\s+(server|client:(\d+))\s+([a-z_]+)(?:\s+(\S+))?$")


def parse_event(line: str) -> FaultEvent:
    m = _EVENT_RE.match(line.strip().lower())
    if not m:
        raise InvalidConfigError(f"cannot parse fault event {line!r}")
    rnd, who, cid, kind, scale = m.groups()
    try:
        k = _KIND_ALIASES.get(kind) or FaultKind(kind)
    except ValueError:
        raise InvalidConfigError(f"unknown fault kind {kind!r}") from None
    is_corrupt = k in (FaultKind.CORRUPT_SIGNED, FaultKind.CORRUPT_TAMPERED)
    if scale is not None and not is_corrupt:
        raise InvalidConfigError(f"only corruption events take a scale: {line!r}")
    try:
        s = float(scale) if scale is not None else 100.0 if is_corrupt else 1.0
    except ValueError:
        raise InvalidConfigError(f"bad corruption scale in {line!r}") from None
    return FaultEvent(int(rnd), SERVER_ID if who == "server" else int(cid), k, s)


@dataclass(frozen=True)
class DataConfig:
    source: str = "synthetic"
    n: int = 2000
    d: int = 20
    class_balance: float = 0.5
    separation: float = 2.0
    test_fraction: float = 0.2
    server_val_fraction: float = 0.1
    application_csv: Optional[str] = None
    credit_csv: Optional[str] = None

    def __post_init__(self):
        if self.source not in ("synthetic", "csv"):
            raise InvalidConfigError(f"data source must be 'synthetic' or 'csv', got {self.source!r}")
        if self.source == "csv" and not (self.application_csv and self.credit_csv):
            raise InvalidConfigError("csv source needs application_csv and credit_csv")
        if not 0 < self.server_val_fraction < 1:
            raise InvalidConfigError("server_val_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class SimConfig:
    num_clients: int = 5
    num_rounds: int = 10
    master_seed: int = 0
    privacy: PrivacySpec = PrivacySpec(epsilon=1.0, delta=1e-5, clip_bound=0.02, enabled=True)
    train: TrainConfig = TrainConfig(epochs=3, learning_rate=0.1, batch_size=32, l2_reg=1e-4)
    dirichlet_alpha: float = 1.0
    val_fraction: float = 0.1
    data: DataConfig = DataConfig()
    ebcd_tolerance: float = 5.0
    ebcd_rollback: bool = False
    ebcd_screen_clients: bool = False
    client_patience: int = 2
    server_patience: int = 10
    min_delta: float = 1e-6
    rollback_depth: int = 1
    weight_by: str = "local"
    secret: bytes = DEFAULT_SECRET
    faults: FaultScript = FaultScript()

    def __post_init__(self):
        if self.num_clients < 1:
            raise InvalidConfigError("num_clients must be >= 1")
        if self.num_rounds < 0:
            raise InvalidConfigError("num_rounds must be >= 0")
        if not 0 <= self.master_seed < 2 ** 64:
            raise InvalidConfigError("master_seed must be an unsigned 64-bit integer")
        if not self.ebcd_tolerance > 0:
            raise InvalidConfigError("ebcd tolerance_factor must be > 0")
        if self.client_patience < 1 or self.server_patience < 1:
            raise InvalidConfigError("patience values must be >= 1")
        if self.rollback_depth < 1:
            raise InvalidConfigError("rollback_depth must be >= 1")
        if self.weight_by not in ("local", "train"):
            raise InvalidConfigError("weight_by must be 'local' or 'train'")
        if len(self.secret) < 16:
            raise InvalidConfigError("shared secret must be at least 16 bytes")
        for e in self.faults.events:
            if e.target != SERVER_ID and not 0 <= e.target < self.num_clients:
                raise InvalidConfigError(f"fault targets unknown client {e.target}")

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        """Plain-data view used for hashing and the run manifest (secret omitted)."""
        d = dataclasses.asdict(self)
        d.pop("secret")
        d["faults"] = [e.describe() for e in self.faults.events]
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def derive_seed(master_seed: int, client_id: int, round: int, purpose: str = "") -> int:
    """First 8 bytes of SHA-256(master || client_id || round [|| purpose]) as an integer.

    Each (client, round) pair gets its own stream, so one client dropping out
    never shifts another client's randomness.
    """
    pre = struct.pack(">Qqq", master_seed, client_id, round) + purpose.encode("utf-8")
    return int.from_bytes(hashlib.sha256(pre).digest()[:8], "big")


# ------------------------------------------------------------------ INI files

_SCHEMA = {
    "run": {"num_clients": int, "num_rounds": int, "master_seed": int, "rollback_depth": int},
    "train": {"epochs": int, "learning_rate": float, "batch_size": int, "l2_reg": float},
    "privacy": {"enabled": bool, "epsilon": float, "delta": float, "clip_bound": float},
    "data": {
        "source": str, "n": int, "d": int, "class_balance": float, "separation": float,
        "test_fraction": float, "server_val_fraction": float, "application_csv": str, "credit_csv": str,
    },
    "partition": {"dirichlet_alpha": float, "val_fraction": float, "weight_by": str},
    "ebcd": {"tolerance_factor": float, "rollback": bool, "screen_clients": bool},
    "earlystop": {"client_patience": int, "server_patience": int, "min_delta": float},
    "zkip": {"secret": str, "secret_hex": str},
    "faults": {"events": str},
}


def _typed(parser, section, key, kind):
    try:
        if kind is bool:
            return parser.getboolean(section, key)
        if kind is int:
            return parser.getint(section, key)
        if kind is float:
            return parser.getfloat(section, key)
        return parser.get(section, key).strip()
    except ValueError as exc:
        raise InvalidConfigError(f"[{section}] {key}: {exc}") from None


def parse_config_text(text: str, base_dir: Optional[Path] = None) -> SimConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise InvalidConfigError(f"malformed config: {exc}") from None
    vals: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise InvalidConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise InvalidConfigError(f"unknown key {key!r} in [{section}]")
            vals[(section, key)] = _typed(parser, section, key, _SCHEMA[section][key])

    def get(section, key, default):
        return vals.get((section, key), default)

    base = SimConfig()
    try:
        train = TrainConfig(
            epochs=get("train", "epochs", base.train.epochs),
            learning_rate=get("train", "learning_rate", base.train.learning_rate),
            batch_size=get("train", "batch_size", base.train.batch_size),
            l2_reg=get("train", "l2_reg", base.train.l2_reg),
        )
        privacy = PrivacySpec(
            epsilon=get("privacy", "epsilon", base.privacy.epsilon),
            delta=get("privacy", "delta", base.privacy.delta),
            clip_bound=get("privacy", "clip_bound", base.privacy.clip_bound),
            enabled=get("privacy", "enabled", base.privacy.enabled),
        )
        paths = {}
        for key in ("application_csv", "credit_csv"):
            p = get("data", key, None)
            if p and base_dir is not None and not Path(p).is_absolute():
                p = str((base_dir / p).resolve())
            paths[key] = p
        data = DataConfig(
            source=get("data", "source", base.data.source),
            n=get("data", "n", base.data.n),
            d=get("data", "d", base.data.d),
            class_balance=get("data", "class_balance", base.data.class_balance),
            separation=get("data", "separation", base.data.separation),
            test_fraction=get("data", "test_fraction", base.data.test_fraction),
            server_val_fraction=get("data", "server_val_fraction", base.data.server_val_fraction),
            **paths,
        )
        if ("zkip", "secret_hex") in vals:
            secret = bytes.fromhex(vals[("zkip", "secret_hex")])
        elif ("zkip", "secret") in vals:
            secret = vals[("zkip", "secret")].encode("utf-8")
        else:
            secret = base.secret
        return SimConfig(
            num_clients=get("run", "num_clients", base.num_clients),
            num_rounds=get("run", "num_rounds", base.num_rounds),
            master_seed=get("run", "master_seed", base.master_seed),
            rollback_depth=get("run", "rollback_depth", base.rollback_depth),
            privacy=privacy,
            train=train,
            dirichlet_alpha=get("partition", "dirichlet_alpha", base.dirichlet_alpha),
            val_fraction=get("partition", "val_fraction", base.val_fraction),
            weight_by=get("partition", "weight_by", base.weight_by),
            data=data,
            ebcd_tolerance=get("ebcd", "tolerance_factor", base.ebcd_tolerance),
            ebcd_rollback=get("ebcd", "rollback", base.ebcd_rollback),
            ebcd_screen_clients=get("ebcd", "screen_clients", base.ebcd_screen_clients),
            client_patience=get("earlystop", "client_patience", base.client_patience),
            server_patience=get("earlystop", "server_patience", base.server_patience),
            min_delta=get("earlystop", "min_delta", base.min_delta),
            secret=secret,
            faults=FaultScript.parse(get("faults", "events", "")),
        )
    except InvalidConfigError:
        raise
    except ValueError as exc:
        raise InvalidConfigError(str(exc)) from None


def bundled_scenario(name: str) -> Optional[Path]:
    fname = name if name.endswith(".cfg") else name + ".cfg"
    ref = resources.files("dprtfl") / "scenarios" / fname
    return Path(str(ref)) if ref.is_file() else None


def load_config(path) -> SimConfig:
    """Read a config file; a bare bundled scenario name also works."""
    p = Path(path)
    if not p.is_file():
        bundled = bundled_scenario(p.name) if p.parent == Path(".") else None
        if bundled is None:
            raise InvalidConfigError(f"config file not found: {path}")
        p = bundled
    try:
        text = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, base_dir=p.parent)
