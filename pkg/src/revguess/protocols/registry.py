from __future__ import annotations

from ..crypto import GroupParams, Rng, SigKeypair, kdf, preset
from . import eke, opaque, srp
from .base import (
    AccountStore,
    AuthRecord,
    ClientCredential,
    Outcome,
    Party,
    ProtocolId,
    ProtocolMessage,
    RegistrationError,
    RejectReason,
    Role,
    check_identity,
    check_password,
    converse,
)

CLIENTS = {
    ProtocolId.EKE: eke.EkeClient,
    ProtocolId.SRP6A_NOCERT: srp.SrpClient,
    ProtocolId.SRP6A_CERT: srp.SrpClient,
    ProtocolId.OPAQUE_LITE: opaque.OpaqueClient,
}

# first message kind -> server machine
SERVERS = {
    eke.REQUEST: eke.EkeServer,
    srp.HELLO: srp.SrpServer,
    opaque.HELLO: opaque.OpaqueServer,
}


def build_record(protocol: ProtocolId, identity: str, password: str, params: GroupParams, rng: Rng, *,
                 envelope_secret: bool = False) -> tuple[AuthRecord, bytes | None]:
    """Simulate registration for one account. Returns the record and an optional confirmation tag."""
    protocol = ProtocolId(protocol)
    if envelope_secret and protocol != ProtocolId.OPAQUE_LITE:
        raise RegistrationError("envelope_secret applies to opaque-lite only")
    if protocol == ProtocolId.EKE:
        return eke.make_record(identity, password), None
    if protocol in (ProtocolId.SRP6A_NOCERT, ProtocolId.SRP6A_CERT):
        return srp.make_record(protocol, identity, password, params, rng), None
    return opaque.make_record(identity, password, params, rng, envelope_secret=envelope_secret)


def register(protocol: ProtocolId, identity: str, password: str, store: AccountStore, rng: Rng, *,
             envelope_secret: bool = False,
             cert_mode_keys: SigKeypair | None = None) -> tuple[ClientCredential, AuthRecord]:
    """Register an account in ``store`` and return the client's side of it.

    For srp6a-cert the server's signing key is installed in the store (or
    taken from it) and pinned in the returned credential.
    """
    protocol = ProtocolId(protocol)
    check_identity(identity)
    check_password(password)
    if identity in store:
        raise RegistrationError(f"identity {identity!r} already registered")
    server_key = None
    if protocol == ProtocolId.SRP6A_CERT:
        if cert_mode_keys is not None:
            if store.signing_key is not None and store.signing_key != cert_mode_keys:
                raise RegistrationError("store already holds a different signing key")
            store.signing_key = cert_mode_keys
        if store.signing_key is None:
            raise RegistrationError("srp6a-cert registration needs server signing keys")
        server_key = store.signing_key.verifying
    record, tag = build_record(protocol, identity, password, store.params, rng, envelope_secret=envelope_secret)
    store.add(record)
    cred = ClientCredential(identity, password, protocol, store.params, confirmation_tag=tag, server_key=server_key)
    return cred, record


def fabricate_record(protocol: ProtocolId, identity: str, store: AccountStore) -> AuthRecord:
    """A stable, plausible record for an identity the store does not have."""
    rng = Rng(key=kdf("fabricate", [store.secret, identity.encode()]))
    password = rng.bytes(16).hex()
    record, _ = build_record(protocol, identity, password, store.params, rng)
    return record


def client_start(credential: ClientCredential, rng: Rng) -> tuple[Party, ProtocolMessage]:
    party = CLIENTS[credential.protocol](credential, rng)
    return party, party.start()


def client_step(state: Party, incoming: ProtocolMessage, rng: Rng | None = None):
    """Advance a client machine by one message: (state, reply or None, outcome or None)."""
    if rng is not None:
        state.rng = rng
    reply = state.receive(incoming)
    return state, reply, state.outcome


def server_start(store: AccountStore, first: ProtocolMessage, rng: Rng) -> Party:
    cls = SERVERS.get(first.kind)
    if cls is None:
        raise ValueError(f"{first.kind!r} does not open any known protocol")
    return cls(store, rng)


def server_step(state: Party | None, store: AccountStore, incoming: ProtocolMessage, rng: Rng):
    """Server counterpart of :func:`client_step`; ``state`` is None for the first message."""
    if state is None:
        try:
            state = server_start(store, incoming, rng)
        except ValueError:
            state = eke.EkeServer(store, rng)  # any machine rejects an unknown opener as malformed
    else:
        state.rng = rng
    reply = state.receive(incoming)
    return state, reply, state.outcome


def run_handshake(credential: ClientCredential, store: AccountStore, rng: Rng):
    """Loopback driver: (client outcome, server outcome, transcript).

    The transcript is a list of (sender role, message) pairs.
    """
    client, first = client_start(credential, rng.split("client"))
    server = server_start(store, first, rng.split("server"))
    transcript = list(converse(client, server, first))
    return _final(client), _final(server), transcript


def _final(party: Party) -> Outcome:
    # a machine left waiting on a peer that went silent counts as failed
    return party.outcome or Outcome.reject(RejectReason.VERIFICATION_FAILED)


def default_params() -> GroupParams:
    return preset("sim-64")


__all__ = [
    "CLIENTS", "SERVERS", "Role", "build_record", "register", "fabricate_record", "client_start",
    "client_step", "server_start", "server_step", "run_handshake", "default_params",
]
