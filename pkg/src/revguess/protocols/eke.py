"""Encrypted Key Exchange with ephemeral Diffie-Hellman as the asymmetric layer.

Messages (``P(.)`` is encryption under the password key, ``R(.)`` under the
session key)::

    C -> S  eke-request                U, P(P_u)
    S -> C  eke-response               P(P_u(R))     P_u(R) = (g^s, E_{dh}(R))
    C -> S  eke-challenge              R(c_A)
    S -> C  eke-challenge-response     R(c_A, c_B)
    C -> S  eke-confirm                R(c_B)
"""
from __future__ import annotations

import hmac

from ..crypto import DIGEST_SIZE, NONCE_SIZE, Rng, group_exp, kdf, sym_decrypt, sym_encrypt
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

REQUEST = "eke-request"
RESPONSE = "eke-response"
CHALLENGE = "eke-challenge"
CHALLENGE_RESPONSE = "eke-challenge-response"
CONFIRM = "eke-confirm"


def password_key(password: str) -> bytes:
    return kdf("eke-password", [password.encode()])


def make_record(identity: str, password: str) -> AuthRecord:
    return AuthRecord(ProtocolId.EKE, identity, {"password": password})


class EkeClient(Party):
    role = Role.CLIENT
    protocol = ProtocolId.EKE
    _handlers = {
        "await-response": (RESPONSE, "_on_response"),
        "await-challenge-response": (CHALLENGE_RESPONSE, "_on_challenge_response"),
    }

    def __init__(self, credential: ClientCredential, rng: Rng):
        super().__init__(rng)
        self.credential = credential
        self.params = credential.params
        self._pw_key = password_key(credential.password)

    def start(self) -> ProtocolMessage:
        self._u = self.rng.scalar(self.params)
        pub = group_exp(self.params.generator, self._u)
        self.phase = "await-response"
        return ProtocolMessage(REQUEST, {
            "identity": self.credential.identity.encode(),
            "ct": sym_encrypt(self._pw_key, pub.to_bytes(), self.rng),
        })

    def _on_response(self, msg):
        size = self.params.element_size
        pt = sym_decrypt(self._pw_key, msg.field("ct"))
        if len(pt) != size + NONCE_SIZE + DIGEST_SIZE:
            raise ProtocolError(RejectReason.MALFORMED)
        server_pub = self.params.decode(pt[:size])
        dh_key = kdf("eke-dh", [group_exp(server_pub, self._u).to_bytes()])
        self._session = sym_decrypt(dh_key, pt[size:])
        del self._u
        self._c_a = self.rng.bytes(DIGEST_SIZE)
        self.phase = "await-challenge-response"
        return ProtocolMessage(CHALLENGE, {"ct": sym_encrypt(self._session, self._c_a, self.rng)})

    def _on_challenge_response(self, msg):
        pt = sym_decrypt(self._session, msg.field("ct"))
        if len(pt) != 2 * DIGEST_SIZE:
            raise ProtocolError(RejectReason.MALFORMED)
        if not hmac.compare_digest(pt[:DIGEST_SIZE], self._c_a):
            raise ProtocolError(RejectReason.VERIFICATION_FAILED)
        self._accept(self._session)
        return ProtocolMessage(CONFIRM, {"ct": sym_encrypt(self._session, pt[DIGEST_SIZE:], self.rng)})


class EkeServer(Party):
    role = Role.SERVER
    protocol = ProtocolId.EKE
    _handlers = {
        "start": (REQUEST, "_on_request"),
        "await-challenge": (CHALLENGE, "_on_challenge"),
        "await-confirm": (CONFIRM, "_on_confirm"),
    }

    def __init__(self, store, rng: Rng):
        super().__init__(rng)
        self.store = store
        self.params = store.params
        self.identity: str | None = None

    def _on_request(self, msg):
        try:
            self.identity = msg.field("identity").decode()
        except UnicodeDecodeError:
            raise ProtocolError(RejectReason.MALFORMED) from None
        record = self.store.lookup(self.identity, ProtocolId.EKE)
        if record is None:
            raise ProtocolError(RejectReason.VERIFICATION_FAILED)
        pw_key = password_key(record.payload["password"])
        ct = msg.field("ct")
        if len(ct) != NONCE_SIZE + self.params.element_size:
            raise ProtocolError(RejectReason.MALFORMED)
        # succeeds for any password: the server cannot tell a wrong key here
        client_pub = self.params.decode(sym_decrypt(pw_key, ct))
        s = self.rng.scalar(self.params)
        dh_key = kdf("eke-dh", [group_exp(client_pub, s).to_bytes()])
        self._session = self.rng.bytes(DIGEST_SIZE)
        inner = sym_encrypt(dh_key, self._session, self.rng)
        pub = group_exp(self.params.generator, s).to_bytes()
        self.phase = "await-challenge"
        return ProtocolMessage(RESPONSE, {"ct": sym_encrypt(pw_key, pub + inner, self.rng)})

    def _on_challenge(self, msg):
        c_a = sym_decrypt(self._session, msg.field("ct"))
        if len(c_a) != DIGEST_SIZE:
            raise ProtocolError(RejectReason.MALFORMED)
        self._c_b = self.rng.bytes(DIGEST_SIZE)
        self.phase = "await-confirm"
        return ProtocolMessage(CHALLENGE_RESPONSE, {"ct": sym_encrypt(self._session, c_a + self._c_b, self.rng)})

    def _on_confirm(self, msg):
        if not hmac.compare_digest(sym_decrypt(self._session, msg.field("ct")), self._c_b):
            raise ProtocolError(RejectReason.VERIFICATION_FAILED)
        self._accept(self._session)
        return None
