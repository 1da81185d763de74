"""Cluster membership, quorum arithmetic, leader selection and the
``cluster.yaml`` configuration file.

Configuration schema::

    members:
      - {id: 0, name: court, address: "127.0.0.1:7100", public_key: <hex>}
      - ...
    genesis: {timestamp: 0}
    leader_selection: round-robin     # or "random"
    leader_seed: 0
    max_block_txs: 100
    block_interval: 0.5               # seconds between proposals
    round_timeout: 3.0                # seconds before a round is closed

Private keys are kept next to the configuration in ``keys/<name>.key``, each
holding the hex encoding of a 32-byte Ed25519 seed.
"""

from copy import deepcopy
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from random import Random
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from deepmerge import always_merger

from veriframe.errors import ConfigurationError
from veriframe.utils import ceil_div, load_yaml_file

from .blocks import Vote
from .crypto import (
    derive_signing_key,
    load_public_key,
    load_signing_key,
    private_key_hex,
    public_key_hex,
    verify_vote,
)

__all__ = (
    "ClusterConfig",
    "DEFAULT_MEMBER_NAMES",
    "LeaderSelection",
    "MIN_MEMBERS",
    "Member",
    "bootstrap_cluster",
    "load_member_keys",
    "quorum",
)


MIN_MEMBERS = 3
"""A permissioned cluster is meaningless with fewer members than this."""

DEFAULT_MEMBER_NAMES = ("court", "police", "fire")
"""Names of the default member organizations."""

_DEFAULTS: Dict[str, Any] = {
    "genesis": {"timestamp": 0},
    "leader_selection": "round-robin",
    "leader_seed": 0,
    "max_block_txs": 100,
    "block_interval": 0.5,
    "round_timeout": 3.0,
}


def quorum(n: int) -> int:
    """Returns the number of matching signed copies needed to commit a block
    in a cluster of `n` members, i.e. the ceiling of (2n - 1) / 3.
    """
    if n < 1:
        raise ValueError(f"cluster size must be positive, got {n}")
    return ceil_div(2 * n - 1, 3)


class LeaderSelection(Enum):
    """Rules for choosing the leader of a round."""

    ROUND_ROBIN = "round-robin"
    RANDOM = "random"

    @classmethod
    def from_string(cls, value: str) -> "LeaderSelection":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ConfigurationError(
                f"unknown leader selection rule: {value!r}"
            ) from None


@dataclass(frozen=True)
class Member:
    """A member organization of the cluster."""

    id: int
    name: str
    public_key: Ed25519PublicKey = field(compare=False, repr=False)
    address: Optional[str] = None
    """``host:port`` of the node of the member, if it runs as a server."""

    @property
    def public_key_hex(self) -> str:
        from cryptography.hazmat.primitives import serialization

        return self.public_key.public_bytes(
            encoding=serialization.Encoding.Raw,
            format=serialization.PublicFormat.Raw,
        ).hex()


@dataclass
class ClusterConfig:
    """Static configuration shared by every node of a cluster."""

    members: Tuple[Member, ...]
    genesis_timestamp: int = 0
    leader_selection: LeaderSelection = LeaderSelection.ROUND_ROBIN
    leader_seed: int = 0
    max_block_txs: int = 100
    block_interval: float = 0.5
    round_timeout: float = 3.0

    path: Optional[Path] = field(default=None, compare=False)
    """Path of the file the configuration was loaded from, if any."""

    def __post_init__(self):
        self.validate()

    @property
    def n(self) -> int:
        return len(self.members)

    @property
    def quorum(self) -> int:
        return quorum(self.n)

    @property
    def member_ids(self) -> List[int]:
        return [member.id for member in self.members]

    def member(self, member_id: int) -> Member:
        for member in self.members:
            if member.id == member_id:
                return member
        raise ConfigurationError(f"no such cluster member: {member_id}")

    def has_member(self, member_id: int) -> bool:
        return any(member.id == member_id for member in self.members)

    def leader_for(self, height: int, attempt: int = 0) -> int:
        """Returns the id of the leader of the given round.

        A failed round is retried at the same height with `attempt`
        incremented, which moves leadership to another member.
        """
        if self.leader_selection is LeaderSelection.ROUND_ROBIN:
            index = (height - 1 + attempt) % self.n
        else:
            rng = Random(f"{self.leader_seed}:{height}:{attempt}")
            index = rng.randrange(self.n)
        return self.members[index].id

    def is_valid_vote(self, vote: Vote) -> bool:
        """Returns whether the vote comes from a member and carries a valid
        signature of its header hash.
        """
        if not self.has_member(vote.validator_id):
            return False
        return verify_vote(vote, self.member(vote.validator_id).public_key)

    def validate(self) -> None:
        if len(self.members) < MIN_MEMBERS:
            raise ConfigurationError(
                f"a cluster needs at least {MIN_MEMBERS} members, "
                f"got {len(self.members)}"
            )
        ids = [member.id for member in self.members]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("cluster member ids must be unique")
        if any(not 0 <= member_id <= 0xFFFF for member_id in ids):
            raise ConfigurationError("cluster member ids must fit in 16 bits")
        names = [member.name for member in self.members]
        if len(set(names)) != len(names):
            raise ConfigurationError("cluster member names must be unique")
        if self.max_block_txs < 1:
            raise ConfigurationError("max_block_txs must be at least 1")

    @classmethod
    def from_dict(cls, obj: Dict[str, Any], path: Optional[Path] = None):
        """Constructs a configuration from its parsed YAML form; keys that are
        missing fall back to the defaults.
        """
        obj = always_merger.merge(deepcopy(_DEFAULTS), obj)

        raw_members = obj.get("members")
        if not isinstance(raw_members, list):
            raise ConfigurationError("'members' must be a list")

        members: List[Member] = []
        for index, item in enumerate(raw_members):
            if not isinstance(item, dict):
                raise ConfigurationError(f"member #{index} must be a mapping")
            try:
                members.append(
                    Member(
                        id=int(item["id"]),
                        name=str(item["name"]),
                        public_key=load_public_key(str(item["public_key"])),
                        address=item.get("address"),
                    )
                )
            except KeyError as ex:
                raise ConfigurationError(
                    f"member #{index} has no {ex.args[0]!r} key"
                ) from None

        genesis = obj.get("genesis") or {}
        try:
            return cls(
                members=tuple(members),
                genesis_timestamp=int(genesis.get("timestamp", 0)),
                leader_selection=LeaderSelection.from_string(
                    str(obj["leader_selection"])
                ),
                leader_seed=int(obj["leader_seed"]),
                max_block_txs=int(obj["max_block_txs"]),
                block_interval=float(obj["block_interval"]),
                round_timeout=float(obj["round_timeout"]),
                path=path,
            )
        except (TypeError, ValueError) as ex:
            raise ConfigurationError(f"invalid cluster configuration: {ex}") from None

    def to_dict(self) -> Dict[str, Any]:
        members: List[Dict[str, Any]] = []
        for member in self.members:
            item: Dict[str, Any] = {"id": member.id, "name": member.name}
            if member.address:
                item["address"] = member.address
            item["public_key"] = member.public_key_hex
            members.append(item)
        return {
            "members": members,
            "genesis": {"timestamp": self.genesis_timestamp},
            "leader_selection": self.leader_selection.value,
            "leader_seed": self.leader_seed,
            "max_block_txs": self.max_block_txs,
            "block_interval": self.block_interval,
            "round_timeout": self.round_timeout,
        }

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ClusterConfig":
        """Loads a cluster configuration from a YAML file."""
        path = Path(path)
        return cls.from_dict(load_yaml_file(path), path=path)

    def save(self, path: Union[str, Path]) -> None:
        from yaml import safe_dump

        path = Path(path)
        with path.open("w") as fp:
            safe_dump(self.to_dict(), fp, sort_keys=False)
        self.path = path

    def key_path(self, member_id: int) -> Path:
        """Returns the path of the private key file of a member."""
        base = self.path.parent if self.path else Path.cwd()
        return base / "keys" / f"{self.member(member_id).name}.key"

    def load_signing_key(self, member_id: int) -> Ed25519PrivateKey:
        """Loads the private key of a member from its key file and checks it
        against the registered public key.
        """
        path = self.key_path(member_id)
        try:
            key = load_signing_key(path.read_text())
        except OSError as ex:
            raise ConfigurationError(f"cannot read key file {path}: {ex}") from None
        if public_key_hex(key) != self.member(member_id).public_key_hex:
            raise ConfigurationError(
                f"key file {path} does not match the public key of member {member_id}"
            )
        return key


def _member_names(n: int, names: Optional[Sequence[str]]) -> List[str]:
    if names:
        if len(names) != n:
            raise ConfigurationError(f"expected {n} member names, got {len(names)}")
        return list(names)
    result = list(DEFAULT_MEMBER_NAMES[:n])
    result.extend(f"member{index}" for index in range(len(result), n))
    return result


def bootstrap_cluster(
    n: int,
    names: Optional[Sequence[str]] = None,
    out_dir: Optional[Union[str, Path]] = None,
    *,
    seed: int = 0,
    host: str = "127.0.0.1",
    base_port: int = 7100,
    genesis_timestamp: int = 0,
    leader_selection: LeaderSelection = LeaderSelection.ROUND_ROBIN,
) -> Tuple[ClusterConfig, Dict[int, Ed25519PrivateKey]]:
    """Creates the configuration and the keys of a new cluster.

    Keys are derived from `seed`, so the same arguments always produce the
    same configuration. When `out_dir` is given, ``cluster.yaml`` and the
    ``keys/`` directory are written there.

    Raises:
        ConfigurationError: if fewer than three members are requested
    """
    if n < MIN_MEMBERS:
        raise ConfigurationError(
            f"a permissioned cluster needs at least {MIN_MEMBERS} members "
            f"(for instance court, police and fire); got {n}"
        )

    member_names = _member_names(n, names)
    keys: Dict[int, Ed25519PrivateKey] = {}
    members: List[Member] = []
    for member_id, name in enumerate(member_names):
        key = derive_signing_key(seed, member_id)
        keys[member_id] = key
        members.append(
            Member(
                id=member_id,
                name=name,
                public_key=key.public_key(),
                address=f"{host}:{base_port + member_id}",
            )
        )

    config = ClusterConfig(
        members=tuple(members),
        genesis_timestamp=genesis_timestamp,
        leader_selection=leader_selection,
        leader_seed=seed,
    )

    if out_dir is not None:
        out_dir = Path(out_dir)
        key_dir = out_dir / "keys"
        key_dir.mkdir(parents=True, exist_ok=True)
        config.save(out_dir / "cluster.yaml")
        for member in members:
            (key_dir / f"{member.name}.key").write_text(
                private_key_hex(keys[member.id]) + "\n"
            )

    return config, keys


def load_member_keys(
    config: ClusterConfig, member_ids: Iterable[int]
) -> Dict[int, Ed25519PrivateKey]:
    """Loads the private keys of the given members from their key files."""
    return {member_id: config.load_signing_key(member_id) for member_id in member_ids}
