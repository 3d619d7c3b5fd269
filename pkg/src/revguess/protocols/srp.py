"""SRP-6a key exchange in the shape of its TLS 1.2 embedding.

Arithmetic follows RFC 5054::

    x = H(s, U, P)      v = g^x
    k = H(N, g)         B = k*v + g^b
    u = H(A, B)         S_client = (B - k*g^x)^(a + u*x)
                        S_server = (A * v^u)^b

Messages::

    C -> S  srp-hello               U, suite, client nonce
    S -> C  srp-key-exchange        N, g, s, B, server nonce [, signature]
    C -> S  srp-client-finish       A, M1
    S -> C  srp-server-finish       M2

In the ``srp-cert`` suite the key exchange carries a signature over the
hash of its body, checked against a pinned server key before the client
derives anything.
"""
from __future__ import annotations

import hmac

from ..crypto import DIGEST_SIZE, GroupParams, Rng, group_exp, kdf, kdf_int, kdf_scalar, sign, verify
from .base import (
    AuthRecord,
    ClientCredential,
    Party,
    ProtocolError,
    ProtocolId,
    ProtocolMessage,
    RejectReason,
    Role,
)

HELLO = "srp-hello"
KEY_EXCHANGE = "srp-key-exchange"
CLIENT_FINISH = "srp-client-finish"
SERVER_FINISH = "srp-server-finish"

SUITE_PLAIN = b"srp"
SUITE_CERT = b"srp-cert"

SALT_SIZE = 16


def _int_bytes(n: int, params: GroupParams) -> bytes:
    return n.to_bytes(params.element_size, "big")


def multiplier(params: GroupParams) -> int:
    return kdf_int("srp-k", [_int_bytes(params.p, params), _int_bytes(params.g, params)]) % params.p


def private_exponent(salt: bytes, identity: str, password: str, params: GroupParams) -> int:
    return kdf_scalar("srp-x", [salt, identity.encode(), password.encode()], params)


def make_verifier(salt: bytes, identity: str, password: str, params: GroupParams):
    return group_exp(params.generator, private_exponent(salt, identity, password, params))


def make_record(protocol: ProtocolId, identity: str, password: str, params: GroupParams, rng: Rng) -> AuthRecord:
    salt = rng.bytes(SALT_SIZE)
    return AuthRecord(protocol, identity, {"salt": salt, "verifier": make_verifier(salt, identity, password, params)})


def _scramble(a_bytes: bytes, b_bytes: bytes, params: GroupParams) -> int:
    return kdf_int("srp-u", [a_bytes, b_bytes]) % params.order


def _signed_part(client_nonce: bytes, body: dict) -> bytes:
    return kdf("srp-ske", [client_nonce, body["N"], body["g"], body["salt"], body["B"], body["nonce"]])


class SrpClient(Party):
    role = Role.CLIENT
    _handlers = {
        "await-key-exchange": (KEY_EXCHANGE, "_on_key_exchange"),
        "await-server-finish": (SERVER_FINISH, "_on_server_finish"),
    }

    def __init__(self, credential: ClientCredential, rng: Rng):
        super().__init__(rng)
        self.credential = credential
        self.params = credential.params
        self.protocol = credential.protocol
        self.cert_mode = credential.protocol == ProtocolId.SRP6A_CERT
        if self.cert_mode and credential.server_key is None:
            raise ValueError("cert mode needs a pinned server verifying key")

    def start(self) -> ProtocolMessage:
        self._nonce = self.rng.bytes(DIGEST_SIZE)
        self.phase = "await-key-exchange"
        return ProtocolMessage(HELLO, {
            "identity": self.credential.identity.encode(),
            "suite": SUITE_CERT if self.cert_mode else SUITE_PLAIN,
            "nonce": self._nonce,
        })

    def _on_key_exchange(self, msg):
        body = {k: msg.field(k) for k in ("N", "g", "salt", "B", "nonce")}
        if self.cert_mode:
            # nothing is derived from an unauthenticated key exchange
            if not verify(self.credential.server_key, _signed_part(self._nonce, body), msg.body.get("signature")):
                raise ProtocolError(RejectReason.SIGNATURE_INVALID)
        p = self.params
        if int.from_bytes(body["N"], "big") != p.p or int.from_bytes(body["g"], "big") != p.g:
            raise ProtocolError(RejectReason.MALFORMED)
        big_b = int.from_bytes(body["B"], "big")
        if big_b % p.p == 0:
            raise ProtocolError(RejectReason.MALFORMED)
        a = self.rng.scalar(p)
        a_bytes = group_exp(p.generator, a).to_bytes()
        u = _scramble(a_bytes, body["B"], p)
        if u == 0:
            raise ProtocolError(RejectReason.MALFORMED)
        x = private_exponent(body["salt"], self.credential.identity, self.credential.password, p)
        base = (big_b - multiplier(p) * pow(p.g, x, p.p)) % p.p
        if base == 0:
            # only reachable when the server's B was built from another verifier
            base = 1
        secret = pow(base, (a + u * x) % p.order, p.p)
        self._key = kdf("srp-K", [_int_bytes(secret, p)])
        m1 = kdf("srp-M1", [a_bytes, body["B"], self._nonce, body["nonce"], self._key])
        self._m2 = kdf("srp-M2", [a_bytes, m1, self._key])
        self.phase = "await-server-finish"
        return ProtocolMessage(CLIENT_FINISH, {"A": a_bytes, "M1": m1})

    def _on_server_finish(self, msg):
        if not hmac.compare_digest(msg.field("M2"), self._m2):
            raise ProtocolError(RejectReason.VERIFICATION_FAILED)
        self._accept(self._key)
        return None


class SrpServer(Party):
    role = Role.SERVER
    _handlers = {
        "start": (HELLO, "_on_hello"),
        "await-client-finish": (CLIENT_FINISH, "_on_client_finish"),
    }

    def __init__(self, store, rng: Rng):
        super().__init__(rng)
        self.store = store
        self.params = store.params
        self.protocol = ProtocolId.SRP6A_NOCERT
        self.identity: str | None = None

    def _on_hello(self, msg):
        try:
            self.identity = msg.field("identity").decode()
        except UnicodeDecodeError:
            raise ProtocolError(RejectReason.MALFORMED) from None
        suite = msg.field("suite")
        if suite not in (SUITE_PLAIN, SUITE_CERT):
            raise ProtocolError(RejectReason.MALFORMED)
        if suite == SUITE_CERT:
            self.protocol = ProtocolId.SRP6A_CERT
        record = self.store.lookup(self.identity, self.protocol)
        if record is None:
            raise ProtocolError(RejectReason.VERIFICATION_FAILED)
        p = self.params
        self._v = record.payload["verifier"].value
        self._b = self.rng.scalar(p)
        big_b = (multiplier(p) * self._v + pow(p.g, self._b, p.p)) % p.p
        if big_b == 0:
            big_b = pow(p.g, self._b, p.p)
        self._client_nonce = msg.field("nonce")
        body = {
            "N": _int_bytes(p.p, p),
            "g": _int_bytes(p.g, p),
            "salt": record.payload["salt"],
            "B": _int_bytes(big_b, p),
            "nonce": self.rng.bytes(DIGEST_SIZE),
        }
        self._body = body
        if suite == SUITE_CERT:
            signer = self.store.signing_key
            if signer is None:
                raise ProtocolError(RejectReason.SIGNATURE_INVALID)
            body = dict(body, signature=sign(signer, _signed_part(self._client_nonce, body)))
        self.phase = "await-client-finish"
        return ProtocolMessage(KEY_EXCHANGE, body)

    def _on_client_finish(self, msg):
        p = self.params
        a_bytes = msg.field("A")
        big_a = int.from_bytes(a_bytes, "big")
        if big_a % p.p == 0:
            raise ProtocolError(RejectReason.MALFORMED)
        u = _scramble(a_bytes, self._body["B"], p)
        secret = pow(big_a * pow(self._v, u, p.p) % p.p, self._b, p.p)
        key = kdf("srp-K", [_int_bytes(secret, p)])
        m1 = kdf("srp-M1", [a_bytes, self._body["B"], self._client_nonce, self._body["nonce"], key])
        if not hmac.compare_digest(msg.field("M1"), m1):
            raise ProtocolError(RejectReason.VERIFICATION_FAILED)
        self._accept(key)
        return ProtocolMessage(SERVER_FINISH, {"M2": kdf("srp-M2", [a_bytes, m1, key])})
