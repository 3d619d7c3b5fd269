"""Step-wise PAKE state machines sharing one client/server interface."""
from .base import (
    ALERT,
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
    converse,
    key_digest,
    transcript_to_json,
)
from .registry import (
    build_record,
    client_start,
    client_step,
    fabricate_record,
    register,
    run_handshake,
    server_start,
    server_step,
)

__all__ = [
    "ALERT", "AccountStore", "AuthRecord", "ClientCredential", "Outcome", "Party", "ProtocolId",
    "ProtocolMessage", "RegistrationError", "RejectReason", "Role", "build_record", "client_start",
    "client_step", "converse", "fabricate_record", "key_digest", "register", "run_handshake",
    "server_start", "server_step", "transcript_to_json",
]
