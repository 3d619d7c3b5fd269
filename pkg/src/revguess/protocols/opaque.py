"""OPAQUE-lite: OPRF-hardened password, client envelope, triple-DH key exchange.

The OPRF output is ``H(pw)^k_s``, evaluated blindly: the client sends
``H(pw)^r``, the server raises it to ``k_s``, and the client strips ``r``.
The randomized password ``rwd`` opens the envelope, which holds the
client's long-term secret, the server's public key and, when the
confirmation mitigation is on, a tag only the real client knows.

Messages::

    C -> S  opaque-hello      U, H(pw)^r, X = g^x, client nonce
    S -> C  opaque-response   (H(pw)^r)^k_s, envelope, Y = g^y, server nonce, server MAC
    C -> S  opaque-finish     client MAC
"""
from __future__ import annotations

import hmac

from ..crypto import (
    DIGEST_SIZE,
    GroupParams,
    Rng,
    group_exp,
    kdf,
    scalar_inverse,
    sym_decrypt,
    sym_encrypt,
)
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

HELLO = "opaque-hello"
RESPONSE = "opaque-response"
FINISH = "opaque-finish"

TAG_SIZE = 32


def hashed_password(password: str, params: GroupParams):
    return params.hash_to_group("opaque-h2g", [password.encode()])


def randomized_password(password: str, oprf_output) -> bytes:
    return kdf("opaque-rwd", [password.encode(), oprf_output.to_bytes()])


def _scalar_bytes(x: int, params: GroupParams) -> bytes:
    return x.to_bytes(params.element_size, "big")


def seal_envelope(rwd: bytes, client_secret: int, server_pub, tag: bytes | None, rng: Rng) -> bytes:
    params = server_pub.params
    pt = _scalar_bytes(client_secret, params) + server_pub.to_bytes() + (tag or b"")
    return sym_encrypt(rwd, pt, rng)


def make_record(identity: str, password: str, params: GroupParams, rng: Rng, *,
                envelope_secret: bool = False) -> tuple[AuthRecord, bytes | None]:
    """Run registration with the OPRF evaluated directly. Returns (record, confirmation tag)."""
    oprf_key = rng.scalar(params)
    server_secret = rng.scalar(params)
    server_pub = group_exp(params.generator, server_secret)
    client_secret = rng.scalar(params)
    client_pub = group_exp(params.generator, client_secret)
    tag = rng.bytes(TAG_SIZE) if envelope_secret else None
    rwd = randomized_password(password, group_exp(hashed_password(password, params), oprf_key))
    record = AuthRecord(ProtocolId.OPAQUE_LITE, identity, {
        "oprf_key": oprf_key,
        "envelope": seal_envelope(rwd, client_secret, server_pub, tag, rng),
        "client_pub": client_pub,
        "server_secret": server_secret,
        "server_pub": server_pub,
    })
    return record, tag


def _session_key(dh1, dh2, dh3, transcript: list[bytes]) -> bytes:
    return kdf("opaque-K", [dh1.to_bytes(), dh2.to_bytes(), dh3.to_bytes(), *transcript])


class OpaqueClient(Party):
    role = Role.CLIENT
    protocol = ProtocolId.OPAQUE_LITE
    _handlers = {"await-response": (RESPONSE, "_on_response")}

    def __init__(self, credential: ClientCredential, rng: Rng):
        super().__init__(rng)
        self.credential = credential
        self.params = credential.params

    def start(self) -> ProtocolMessage:
        p = self.params
        self.blind = self.rng.invertible_scalar(p)
        self._x = self.rng.scalar(p)
        self._hello = {
            "identity": self.credential.identity.encode(),
            "blinded": group_exp(hashed_password(self.credential.password, p), self.blind).to_bytes(),
            "X": group_exp(p.generator, self._x).to_bytes(),
            "nonce": self.rng.bytes(DIGEST_SIZE),
        }
        self.phase = "await-response"
        return ProtocolMessage(HELLO, self._hello)

    def _on_response(self, msg):
        p = self.params
        size = p.element_size
        evaluated = p.decode(msg.field("evaluated"))
        envelope = msg.field("envelope")
        y_bytes = msg.field("Y")
        server_mac = msg.field("mac")
        oprf_output = group_exp(evaluated, scalar_inverse(self.blind, p))
        rwd = randomized_password(self.credential.password, oprf_output)
        pt = sym_decrypt(rwd, envelope)
        if len(pt) < 2 * size:
            raise ProtocolError(RejectReason.MALFORMED)
        client_secret = int.from_bytes(pt[:size], "big") % p.order or 1
        server_pub = p.decode(pt[size:2 * size])
        server_eph = p.decode(y_bytes)
        transcript = [self._hello["identity"], self._hello["blinded"], self._hello["X"], self._hello["nonce"],
                      msg.field("evaluated"), envelope, y_bytes, msg.field("nonce")]
        key = _session_key(group_exp(server_eph, self._x), group_exp(server_pub, self._x),
                           group_exp(server_eph, client_secret), transcript)
        if not hmac.compare_digest(server_mac, kdf("opaque-server-mac", [key])):
            raise ProtocolError(RejectReason.VERIFICATION_FAILED)
        expect_tag = self.credential.confirmation_tag
        if expect_tag is not None and not hmac.compare_digest(pt[2 * size:], expect_tag):
            raise ProtocolError(RejectReason.CONFIRMATION_MISMATCH)
        self._accept(key)
        return ProtocolMessage(FINISH, {"mac": kdf("opaque-client-mac", [key])})


class OpaqueServer(Party):
    role = Role.SERVER
    protocol = ProtocolId.OPAQUE_LITE
    _handlers = {
        "start": (HELLO, "_on_hello"),
        "await-finish": (FINISH, "_on_finish"),
    }

    def __init__(self, store, rng: Rng):
        super().__init__(rng)
        self.store = store
        self.params = store.params
        self.identity: str | None = None

    def _on_hello(self, msg):
        p = self.params
        try:
            self.identity = msg.field("identity").decode()
        except UnicodeDecodeError:
            raise ProtocolError(RejectReason.MALFORMED) from None
        record = self.store.lookup(self.identity, ProtocolId.OPAQUE_LITE)
        if record is None:
            raise ProtocolError(RejectReason.VERIFICATION_FAILED)
        rec = record.payload
        blinded_bytes = msg.field("blinded")
        x_bytes = msg.field("X")
        evaluated = group_exp(p.decode(blinded_bytes), rec["oprf_key"]).to_bytes()
        y = self.rng.scalar(p)
        y_bytes = group_exp(p.generator, y).to_bytes()
        nonce = self.rng.bytes(DIGEST_SIZE)
        client_eph = p.decode(x_bytes)
        transcript = [msg.field("identity"), blinded_bytes, x_bytes, msg.field("nonce"),
                      evaluated, rec["envelope"], y_bytes, nonce]
        self._key = _session_key(group_exp(client_eph, y), group_exp(client_eph, rec["server_secret"]),
                                 group_exp(rec["client_pub"], y), transcript)
        self.phase = "await-finish"
        return ProtocolMessage(RESPONSE, {
            "evaluated": evaluated,
            "envelope": rec["envelope"],
            "Y": y_bytes,
            "nonce": nonce,
            "mac": kdf("opaque-server-mac", [self._key]),
        })

    def _on_finish(self, msg):
        if not hmac.compare_digest(msg.field("mac"), kdf("opaque-client-mac", [self._key])):
            raise ProtocolError(RejectReason.VERIFICATION_FAILED)
        self._accept(self._key)
        return None
