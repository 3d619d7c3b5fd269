from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Iterator

from ..crypto import GroupElement, GroupParams, Rng, SigKeypair, VerifyingKey, kdf, preset


class ProtocolId(str, enum.Enum):
    EKE = "eke"
    SRP6A_NOCERT = "srp6a-nocert"
    SRP6A_CERT = "srp6a-cert"
    OPAQUE_LITE = "opaque-lite"


class RejectReason(str, enum.Enum):
    VERIFICATION_FAILED = "verification-failed"
    MALFORMED = "malformed"
    SIGNATURE_INVALID = "signature-invalid"
    CONFIRMATION_MISMATCH = "confirmation-mismatch"
    # server refused service before any protocol step
    LOCKED_OUT = "locked-out"


class Role(str, enum.Enum):
    CLIENT = "client"
    SERVER = "server"


class RegistrationError(ValueError):
    pass


class ProtocolError(Exception):
    """Raised inside a step to abort with a rejection reason."""

    def __init__(self, reason: RejectReason):
        super().__init__(reason.value)
        self.reason = reason


def check_password(text: str) -> str:
    if not isinstance(text, str) or not text:
        raise RegistrationError("password must be a nonempty string")
    return text


def check_identity(text: str) -> str:
    if not isinstance(text, str) or not text:
        raise RegistrationError("identity must be a nonempty string")
    return text


ALERT = "alert"


@dataclass(frozen=True)
class ProtocolMessage:
    kind: str
    body: dict[str, bytes] = field(default_factory=dict)

    def encode(self) -> bytes:
        out = bytearray()
        for name, value in self.body.items():
            n = name.encode()
            out += len(n).to_bytes(2, "big") + n + len(value).to_bytes(4, "big") + value
        return bytes(out)

    def field(self, name: str) -> bytes:
        try:
            value = self.body[name]
        except KeyError:
            raise ProtocolError(RejectReason.MALFORMED) from None
        if not isinstance(value, bytes):
            raise ProtocolError(RejectReason.MALFORMED)
        return value


@dataclass(frozen=True)
class Outcome:
    accepted: bool
    key: bytes | None = None
    reason: RejectReason | None = None

    @classmethod
    def accept(cls, key: bytes) -> "Outcome":
        return cls(True, key=key)

    @classmethod
    def reject(cls, reason: RejectReason) -> "Outcome":
        return cls(False, reason=reason)

    @property
    def key_digest(self) -> bytes | None:
        return key_digest(self.key) if self.key is not None else None

    def __str__(self):
        if self.accepted:
            return f"Accepted({self.key_digest.hex()[:16]})"
        return f"Rejected({self.reason.value})"


def key_digest(key: bytes) -> bytes:
    return kdf("session-key-digest", [key])


@dataclass
class AuthRecord:
    """Server-side auth data. ``payload`` keys depend on the protocol."""

    protocol: ProtocolId
    identity: str
    payload: dict[str, Any]

    def to_json(self) -> dict:
        out = {}
        for k, v in self.payload.items():
            if isinstance(v, GroupElement):
                out[k] = {"element": str(v.value)}
            elif isinstance(v, bytes):
                out[k] = {"hex": v.hex()}
            elif isinstance(v, int):
                out[k] = {"int": str(v)}
            else:
                out[k] = v
        return {"protocol": self.protocol.value, "identity": self.identity, "payload": out}

    @classmethod
    def from_json(cls, data: dict, params: GroupParams) -> "AuthRecord":
        payload = {}
        for k, v in data["payload"].items():
            if isinstance(v, dict) and "element" in v:
                payload[k] = params.element(int(v["element"]))
            elif isinstance(v, dict) and "hex" in v:
                payload[k] = bytes.fromhex(v["hex"])
            elif isinstance(v, dict) and "int" in v:
                payload[k] = int(v["int"])
            else:
                payload[k] = v
        return cls(ProtocolId(data["protocol"]), data["identity"], payload)


@dataclass(frozen=True)
class ClientCredential:
    identity: str
    password: str
    protocol: ProtocolId
    params: GroupParams
    confirmation_tag: bytes | None = None
    server_key: VerifyingKey | None = None

    def with_password(self, password: str) -> "ClientCredential":
        """Same client, different typed password."""
        return ClientCredential(self.identity, password, self.protocol, self.params,
                                self.confirmation_tag, self.server_key)


class AccountStore:
    """The honest server's account database plus its long-term keys.

    ``simulate_unknown`` makes lookups of unregistered identities return a
    fabricated record instead of failing, which hides account existence.
    """

    def __init__(self, params: GroupParams | None = None, *, signing_key: SigKeypair | None = None,
                 simulate_unknown: bool = True, secret: bytes = b"server-secret"):
        self.params = params or preset("sim-64")
        self.signing_key = signing_key
        self.simulate_unknown = simulate_unknown
        self.secret = secret
        self.records: dict[str, AuthRecord] = {}

    def __contains__(self, identity: str) -> bool:
        return identity in self.records

    def __len__(self):
        return len(self.records)

    def add(self, record: AuthRecord) -> None:
        if record.identity in self.records:
            raise RegistrationError(f"identity {record.identity!r} already registered")
        self.records[record.identity] = record

    def lookup(self, identity: str, protocol: ProtocolId) -> AuthRecord | None:
        rec = self.records.get(identity)
        if rec is not None and rec.protocol == protocol:
            return rec
        if not self.simulate_unknown:
            return None
        from .registry import fabricate_record

        return fabricate_record(protocol, identity, self)

    def to_json(self) -> str:
        data = {ident: rec.to_json() for ident, rec in sorted(self.records.items())}
        return json.dumps(data, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, params: GroupParams, **kwargs) -> "AccountStore":
        store = cls(params, **kwargs)
        for ident, rec in json.loads(text).items():
            record = AuthRecord.from_json(rec, params)
            if record.identity != ident:
                raise ValueError(f"store key {ident!r} does not match record identity")
            store.add(record)
        return store


class Party:
    """Base for step-wise handshake machines.

    Subclasses define ``_handlers``: phase -> (expected kind, method). A
    method returns the reply message (or None). Terminal phases are
    ``accepted`` and ``rejected``; exactly one Outcome is ever set.
    """

    role: Role
    protocol: ProtocolId
    _handlers: dict[str, tuple[str, str]] = {}

    def __init__(self, rng: Rng):
        self.rng = rng
        self.phase = "start"
        self.outcome: Outcome | None = None

    @property
    def done(self) -> bool:
        return self.outcome is not None

    def _accept(self, key: bytes) -> None:
        self.phase = "accepted"
        self.outcome = Outcome.accept(key)

    def _reject(self, reason: RejectReason) -> ProtocolMessage | None:
        self.phase = "rejected"
        self.outcome = Outcome.reject(reason)
        return ProtocolMessage(ALERT)

    def receive(self, msg: ProtocolMessage) -> ProtocolMessage | None:
        if self.done:
            return None
        if msg.kind == ALERT:
            # the peer gave up; from here it looks like a failed verification
            self.phase = "rejected"
            self.outcome = Outcome.reject(RejectReason.VERIFICATION_FAILED)
            return None
        expected = self._handlers.get(self.phase)
        if expected is None or msg.kind != expected[0]:
            return self._reject(RejectReason.MALFORMED)
        try:
            return getattr(self, expected[1])(msg)
        except ProtocolError as e:
            return self._reject(e.reason)


def converse(client: Party, server: Party, first: ProtocolMessage) -> Iterator[tuple[Role, ProtocolMessage]]:
    """Yield each (sender, message) transfer until neither side replies.

    The receiver processes a message right after it is yielded, so a
    caller can interleave its own bookkeeping (clocks, traces) per hop.
    """
    sender, msg = Role.CLIENT, first
    while msg is not None:
        yield sender, msg
        if sender is Role.CLIENT:
            msg, sender = server.receive(msg), Role.SERVER
        else:
            msg, sender = client.receive(msg), Role.CLIENT


def transcript_to_json(transcript: list[tuple[Role, ProtocolMessage]]) -> str:
    rows = [
        {"seq": i, "sender": role.value, "kind": msg.kind, "body-hex": msg.encode().hex()}
        for i, (role, msg) in enumerate(transcript)
    ]
    return json.dumps(rows, indent=2)
