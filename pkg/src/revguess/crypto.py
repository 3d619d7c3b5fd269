"""Idealized primitives for the protocol suite.

Nothing here is meant to be strong. Each primitive has exactly the property
the handshakes and the attack rely on:

* ``kdf`` is an injective-encoding SHA-256 hash.
* ``sym_encrypt`` is an unauthenticated keystream cipher, so decrypting under
  the wrong key silently yields garbage of the right length.
* ``sign``/``verify`` is a keyed tag whose secret never leaves the signer.
* ``Rng`` is a seedable, label-splittable deterministic stream.
"""
from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field
from functools import cached_property

try:
    from gmpy2 import powmod as _gmp_powmod

    def _powmod(b: int, e: int, m: int) -> int:
        return int(_gmp_powmod(b, e, m))
except ImportError:  # pragma: no cover
    _powmod = pow

DIGEST_SIZE = 32
NONCE_SIZE = 16


class CryptoUsageError(ValueError):
    """Primitives were combined in a way the model does not allow."""


# -- hashing -----------------------------------------------------------------

def _frame(data: bytes) -> bytes:
    return len(data).to_bytes(4, "big") + data


_LABELS: dict[str, bytes] = {}


def _encode(label: str, parts) -> bytes:
    head = _LABELS.get(label)
    if head is None:
        head = _LABELS[label] = _frame(label.encode())
    chunks = [head, len(parts).to_bytes(4, "big")]
    for p in parts:
        chunks.append(len(p).to_bytes(4, "big"))
        chunks.append(p)
    return b"".join(chunks)


def kdf(label: str, parts) -> bytes:
    """Hash a label and an ordered list of byte-strings into a 32-byte digest.

    Every component is length-prefixed, so two different part lists never
    produce the same hash input.
    """
    return hashlib.sha256(_encode(label, parts)).digest()


def kdf_int(label: str, parts) -> int:
    return int.from_bytes(kdf(label, parts), "big")


def kdf_scalar(label: str, parts, params: "GroupParams") -> int:
    """Derive a nonzero exponent modulo the group order.

    A zero reduction is re-derived with a counter appended to the parts.
    """
    parts = list(parts)
    counter = 0
    while True:
        extra = [counter.to_bytes(4, "big")] if counter else []
        x = kdf_int(label, parts + extra) % params.order
        if x:
            return x
        counter += 1


# -- groups ------------------------------------------------------------------

@dataclass(frozen=True)
class GroupParams:
    p: int
    g: int
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if self.p < 5 or not (2 <= self.g <= self.p - 1):
            raise CryptoUsageError(f"bad group parameters p={self.p} g={self.g}")

    @cached_property
    def order(self) -> int:
        """Order of ``g``: q for a quadratic-residue generator of a safe prime, else p-1."""
        q = (self.p - 1) // 2
        return q if pow(self.g, q, self.p) == 1 else self.p - 1

    @cached_property
    def element_size(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @cached_property
    def generator(self) -> "GroupElement":
        return GroupElement(self.g, self)

    def element(self, value: int) -> "GroupElement":
        if not (1 <= value < self.p):
            raise CryptoUsageError(f"{value} is not a group element mod {self.p}")
        return GroupElement(value, self)

    def decode(self, data: bytes) -> "GroupElement":
        """Map any byte-string onto a group element without failing.

        Wrong-key decryptions feed garbage into this; it must not signal.
        """
        v = int.from_bytes(data, "big") % self.p
        return GroupElement(v or 1, self)

    def hash_to_group(self, label: str, parts) -> "GroupElement":
        """Hash into the subgroup generated by ``g`` without exposing a discrete log."""
        parts = list(parts)
        counter = 0
        while True:
            extra = [counter.to_bytes(4, "big")] if counter else []
            v = kdf_int(label, parts + extra) % self.p
            if self.order != self.p - 1:
                v = v * v % self.p
            if v > 1:
                return GroupElement(v, self)
            counter += 1

    def to_json(self) -> dict:
        return {"p": str(self.p), "g": str(self.g)}

    @classmethod
    def from_json(cls, data) -> "GroupParams":
        if isinstance(data, str):
            return preset(data)
        return cls(int(data["p"]), int(data["g"]), data.get("name", "custom"))


@dataclass(frozen=True, slots=True)
class GroupElement:
    value: int
    params: GroupParams

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        if other.params != self.params:
            raise CryptoUsageError("cannot combine elements of different groups")
        return GroupElement(self.value * other.value % self.params.p, self.params)

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(self.params.element_size, "big")


def group_exp(base: GroupElement, exponent: int, params: GroupParams | None = None) -> GroupElement:
    """Raise ``base`` to ``exponent``; ``params``, if given, must match the base's group."""
    if params is not None and params != base.params:
        raise CryptoUsageError("exponentiation across mismatched group parameters")
    if exponent <= 0:
        raise CryptoUsageError("exponent must be a positive scalar")
    return GroupElement(_powmod(base.value, exponent, base.params.p), base.params)


def scalar_inverse(x: int, params: GroupParams) -> int:
    return pow(x, -1, params.order)


_RFC5054_2048 = int(
    "AC6BDB41324A9A9BF166DE5E1389582FAF72B6651987EE07FC3192943DB56050A37329CBB4"
    "A099ED8193E0757767A13DD52312AB4B03310DCD7F48A9DA04FD50E8083969EDB767B0CF60"
    "95179A163AB3661A05FBD5FAAAE82918A9962F0B93B855F97993EC975EEAA80D740ADBF4FF"
    "747359D041D5C33EA71D281E446B14773BCA97B43A23FB801676BD207A436C6481F1D2B907"
    "8717461A5B9D32E688F87748544523B524B0D57D5EA77A2775D2ECFA032CFBDBF52FB37861"
    "60279004E57AE6AF874E7303CE53299CCC041C7BC308D82A5698F3A8D0C38271AE35F8E9DB"
    "FBB694B5C803D89F7AE435DE236D525F54759B65E372FCD68EF20FA7111F9E4AFF73",
    16,
)

PRESETS = {
    # exhaustively testable; far too small for password soundness
    "toy-23": GroupParams(23, 5, "toy-23"),
    # largest 64-bit safe prime; cheap enough for population-scale runs
    "sim-64": GroupParams(18446744073709550147, 4, "sim-64"),
    "rfc5054-2048": GroupParams(_RFC5054_2048, 2, "rfc5054-2048"),
}


def preset(name: str) -> GroupParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise CryptoUsageError(f"unknown group preset {name!r}; have {sorted(PRESETS)}") from None


# -- symmetric cipher -----------------------------------------------------------

_KEYSTREAM = _frame(b"keystream") + (2).to_bytes(4, "big")


def _crypt(key: bytes, nonce: bytes, data: bytes) -> bytes:
    # SHAKE-256 over the framed (key, nonce) pair, XORed onto the data
    n = len(data)
    stream = hashlib.shake_256(b"".join((_KEYSTREAM, len(key).to_bytes(4, "big"), key,
                                         len(nonce).to_bytes(4, "big"), nonce))).digest(n)
    return (int.from_bytes(data, "big") ^ int.from_bytes(stream, "big")).to_bytes(n, "big")


def sym_encrypt(key: bytes, plaintext: bytes, rng: "Rng") -> bytes:
    """Encrypt without any integrity tag; the nonce is prepended."""
    nonce = rng.bytes(NONCE_SIZE)
    if not plaintext:
        return nonce
    return nonce + _crypt(key, nonce, plaintext)


def sym_decrypt(key: bytes, ciphertext: bytes) -> bytes:
    """Total inverse of :func:`sym_encrypt`. Any key yields some plaintext."""
    body = ciphertext[NONCE_SIZE:]
    if not body:
        return b""
    return _crypt(key, ciphertext[:NONCE_SIZE], body)


# -- signatures ----------------------------------------------------------------

@dataclass(frozen=True)
class VerifyingKey:
    fingerprint: bytes
    # held by reference so verification can recompute the tag; never serialized
    _secret: bytes = field(repr=False, compare=False)


@dataclass(frozen=True)
class SigKeypair:
    signing: bytes = field(repr=False)
    verifying: VerifyingKey

    @classmethod
    def from_secret(cls, secret: bytes) -> "SigKeypair":
        return cls(secret, VerifyingKey(kdf("sig-fingerprint", [secret]), secret))

    @classmethod
    def generate(cls, rng: "Rng") -> "SigKeypair":
        return cls.from_secret(rng.bytes(DIGEST_SIZE))


def sign(signing: bytes | SigKeypair, message: bytes) -> bytes:
    if isinstance(signing, SigKeypair):
        signing = signing.signing
    return hmac.new(signing, message, hashlib.sha256).digest()


def verify(verifying: VerifyingKey, message: bytes, signature: bytes | None) -> bool:
    if not signature:
        return False
    expected = hmac.new(verifying._secret, message, hashlib.sha256).digest()
    return hmac.compare_digest(expected, signature)


# -- randomness ------------------------------------------------------------------

class Rng:
    """Deterministic byte stream keyed by a 64-bit seed.

    ``split(label)`` derives a child stream from the key alone, so children
    do not depend on how much the parent has already consumed.
    """

    __slots__ = ("_key", "_buf", "_pos", "_block")
    _BLOCK = 256

    def __init__(self, seed: int = 0, *, key: bytes | None = None):
        if key is None:
            if not 0 <= seed < 2**64:
                raise ValueError("seed must be a 64-bit unsigned integer")
            key = kdf("rng-seed", [seed.to_bytes(8, "big")])
        self._key = key
        self._buf = b""
        self._pos = 0
        self._block = 0

    def split(self, label: str) -> "Rng":
        return Rng(key=kdf("rng-split", [self._key, label.encode()]))

    def bytes(self, n: int) -> bytes:
        end = self._pos + n
        if end <= len(self._buf):
            self._pos = end
            return self._buf[end - n:end]
        out = []
        while n > 0:
            if self._pos >= len(self._buf):
                self._buf = hashlib.shake_256(self._key + self._block.to_bytes(8, "big")).digest(self._BLOCK)
                self._block += 1
                self._pos = 0
            take = self._buf[self._pos:self._pos + n]
            self._pos += len(take)
            n -= len(take)
            out.append(take)
        return b"".join(out)

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randbelow needs a positive bound")
        k = n.bit_length()
        nbytes = (k + 7) // 8
        excess = nbytes * 8 - k
        while True:
            r = int.from_bytes(self.bytes(nbytes), "big") >> excess
            if r < n:
                return r

    def randint(self, lo: int, hi: int) -> int:
        return lo + self.randbelow(hi - lo + 1)

    def random(self) -> float:
        return (int.from_bytes(self.bytes(7), "big") >> 3) / 9007199254740992.0

    def scalar(self, params: GroupParams) -> int:
        return 1 + self.randbelow(params.order - 1)

    def invertible_scalar(self, params: GroupParams) -> int:
        from math import gcd

        while True:
            r = self.scalar(params)
            if gcd(r, params.order) == 1:
                return r
