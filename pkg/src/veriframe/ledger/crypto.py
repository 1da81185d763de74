"""Ed25519 keys and vote signatures.

Keys are derived deterministically from a seed and a member id when a
cluster is bootstrapped, so that a bootstrap can be reproduced exactly.
"""

from hashlib import sha256

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from veriframe.errors import ConfigurationError

from .blocks import Vote

__all__ = (
    "derive_signing_key",
    "load_public_key",
    "load_signing_key",
    "private_key_hex",
    "public_key_hex",
    "sign_header",
    "verify_vote",
)


def derive_signing_key(seed: int, member_id: int) -> Ed25519PrivateKey:
    """Derives the signing key of a member from the bootstrap seed."""
    material = sha256(f"veriframe-member:{seed}:{member_id}".encode()).digest()
    return Ed25519PrivateKey.from_private_bytes(material)


def private_key_hex(key: Ed25519PrivateKey) -> str:
    return key.private_bytes(
        encoding=serialization.Encoding.Raw,
        format=serialization.PrivateFormat.Raw,
        encryption_algorithm=serialization.NoEncryption(),
    ).hex()


def public_key_hex(key: Ed25519PrivateKey) -> str:
    return (
        key.public_key()
        .public_bytes(
            encoding=serialization.Encoding.Raw,
            format=serialization.PublicFormat.Raw,
        )
        .hex()
    )


def load_signing_key(value: str) -> Ed25519PrivateKey:
    """Loads a signing key from the hex encoding of its 32-byte seed."""
    try:
        return Ed25519PrivateKey.from_private_bytes(bytes.fromhex(value.strip()))
    except ValueError as ex:
        raise ConfigurationError(f"malformed private key: {ex}") from None


def load_public_key(value: str) -> Ed25519PublicKey:
    """Loads a verification key from its hex encoding."""
    try:
        return Ed25519PublicKey.from_public_bytes(bytes.fromhex(value.strip()))
    except ValueError as ex:
        raise ConfigurationError(f"malformed public key: {ex}") from None


def sign_header(key: Ed25519PrivateKey, validator_id: int, header_hash: bytes) -> Vote:
    """Signs a block header hash on behalf of the given member."""
    return Vote(validator_id, header_hash, key.sign(header_hash))


def verify_vote(vote: Vote, public_key: Ed25519PublicKey) -> bool:
    """Returns whether the vote carries a valid signature of its header hash."""
    try:
        public_key.verify(vote.signature, vote.block_header_hash)
    except InvalidSignature:
        return False
    return True
