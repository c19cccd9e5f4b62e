"""Key agreement and the authenticated-encryption envelope between nodes.

X25519 Diffie-Hellman, HKDF-SHA256 to a 256-bit key, AES-256-GCM. Keypairs are
derived from a seed so that simulations replay bit-for-bit.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .errors import AuthenticationError, MalformedKeyError, NonceExhaustedError

SUITE = "X25519/HKDF-SHA256/AES-256-GCM"
ENVELOPE_VERSION = 1
NONCE_SIZE = 12
TAG_SIZE = 16
_HKDF_INFO = b"agrichain shared key v1"
_MAX_COUNTER = 2**64 - 1

# nonce direction prefixes; both ends of a channel share one key
TN_TO_FN = 1
FN_TO_TN = 2


@dataclass(frozen=True)
class KeyPair:
    secret_key: bytes
    public_key: bytes

    def __repr__(self):
        return f"KeyPair(public_key={self.public_key.hex()[:16]}...)"


@dataclass(frozen=True)
class SealedPayload:
    ciphertext: bytes
    nonce: bytes
    auth_tag: bytes
    sender_public_key: bytes

    def to_bytes(self) -> bytes:
        """Layout: version u8 | nonce[12] | tag[16] | u32 len | ciphertext | u16 len | sender key."""
        return b"".join([
            struct.pack(">B", ENVELOPE_VERSION),
            self.nonce,
            self.auth_tag,
            struct.pack(">I", len(self.ciphertext)),
            self.ciphertext,
            struct.pack(">H", len(self.sender_public_key)),
            self.sender_public_key,
        ])

    @classmethod
    def from_bytes(cls, data: bytes) -> "SealedPayload":
        try:
            version = data[0]
            if version != ENVELOPE_VERSION:
                raise ValueError(f"unsupported envelope version {version}")
            pos = 1
            nonce = data[pos:pos + NONCE_SIZE]
            pos += NONCE_SIZE
            tag = data[pos:pos + TAG_SIZE]
            pos += TAG_SIZE
            (n,) = struct.unpack(">I", data[pos:pos + 4])
            pos += 4
            ciphertext = data[pos:pos + n]
            pos += n
            (m,) = struct.unpack(">H", data[pos:pos + 2])
            pos += 2
            sender = data[pos:pos + m]
            pos += m
        except (IndexError, struct.error) as exc:
            raise ValueError("truncated sealed payload") from exc
        if len(nonce) != NONCE_SIZE or len(tag) != TAG_SIZE or len(ciphertext) != n \
                or len(sender) != m or pos != len(data):
            raise ValueError("malformed sealed payload")
        return cls(bytes(ciphertext), bytes(nonce), bytes(tag), bytes(sender))


class SharedKey:
    """Symmetric channel key plus the sender's nonce counter.

    The counter is owned by whoever seals with this object; the two ends of a
    channel use different direction prefixes so their nonces never collide.
    """

    def __init__(self, key: bytes, direction: int = TN_TO_FN, counter: int = 0):
        if len(key) != 32:
            raise MalformedKeyError("shared key must be 32 bytes")
        self.key = key
        self.direction = direction
        self.counter = counter

    def next_nonce(self) -> bytes:
        if self.counter > _MAX_COUNTER:
            raise NonceExhaustedError("nonce counter exhausted for this key")
        nonce = struct.pack(">B3xQ", self.direction, self.counter)
        self.counter += 1
        return nonce

    def with_direction(self, direction: int) -> "SharedKey":
        return SharedKey(self.key, direction)

    def __eq__(self, other):
        return isinstance(other, SharedKey) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"SharedKey({self.key.hex()[:16]}..., direction={self.direction}, counter={self.counter})"


def _seed_bytes(seed) -> bytes:
    if isinstance(seed, (bytes, bytearray)):
        raw = bytes(seed)
    elif isinstance(seed, int):
        raw = seed.to_bytes((seed.bit_length() + 8) // 8 or 1, "big", signed=True)
    else:
        raw = str(seed).encode("utf-8")
    return hashlib.sha256(b"agrichain keypair|" + raw).digest()


def generate_keypair(seed) -> KeyPair:
    private = X25519PrivateKey.from_private_bytes(_seed_bytes(seed))
    secret = private.private_bytes(
        serialization.Encoding.Raw, serialization.PrivateFormat.Raw, serialization.NoEncryption()
    )
    public = private.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)
    return KeyPair(secret, public)


def public_key_from_secret(secret_key: bytes) -> bytes:
    try:
        private = X25519PrivateKey.from_private_bytes(secret_key)
    except ValueError as exc:
        raise MalformedKeyError(str(exc)) from exc
    return private.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)


def derive_shared_key(own_secret: bytes, peer_public: bytes, direction: int = TN_TO_FN) -> SharedKey:
    try:
        private = X25519PrivateKey.from_private_bytes(own_secret)
        public = X25519PublicKey.from_public_bytes(peer_public)
        raw = private.exchange(public)
    except ValueError as exc:
        raise MalformedKeyError(str(exc)) from exc
    key = HKDF(algorithm=hashes.SHA256(), length=32, salt=None, info=_HKDF_INFO).derive(raw)
    return SharedKey(key, direction)


def _full_ad(sender_public_key: bytes, associated_data: bytes) -> bytes:
    return struct.pack(">BH", ENVELOPE_VERSION, len(sender_public_key)) + sender_public_key + associated_data


def seal(key: SharedKey, plaintext: bytes, associated_data: bytes = b"",
         sender_public_key: bytes = b"") -> SealedPayload:
    """Encrypt and authenticate; the sender key is bound into the tag."""
    nonce = key.next_nonce()
    out = AESGCM(key.key).encrypt(nonce, plaintext, _full_ad(sender_public_key, associated_data))
    return SealedPayload(out[:-TAG_SIZE], nonce, out[-TAG_SIZE:], sender_public_key)


def open_sealed(key: SharedKey, sealed: SealedPayload, associated_data: bytes = b"") -> bytes:
    """Authenticated decryption; raises :class:`AuthenticationError` on any mismatch."""
    if len(sealed.nonce) != NONCE_SIZE or len(sealed.auth_tag) != TAG_SIZE:
        raise AuthenticationError("malformed nonce or tag")
    try:
        return AESGCM(key.key).decrypt(
            sealed.nonce,
            sealed.ciphertext + sealed.auth_tag,
            _full_ad(sealed.sender_public_key, associated_data),
        )
    except InvalidTag as exc:
        raise AuthenticationError("authentication failed") from exc
