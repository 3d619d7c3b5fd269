"""Discrete-event simulation of a client population under attack.

Time is an integer clock; each protocol message takes one unit to travel.
A client opens a login window every ``login_interval`` units and retries
failed sessions per its behavior spec. Each session is, with probability
``interception``, positioned for the adversary; the adversary takes it
only if it has budget and an untried guess for the target, otherwise the
session reaches the honest server untouched.
"""
from __future__ import annotations

import gc
import heapq
import itertools
import logging
import time as wallclock
from bisect import bisect_right
from dataclasses import dataclass, field

from ..adversary import BudgetPolicy, Guesser, TrialResult, TrialStatus, classify, impersonate
from ..crypto import Rng, SigKeypair
from ..protocols import (
    AccountStore,
    ClientCredential,
    Outcome,
    Party,
    ProtocolMessage,
    RejectReason,
    Role,
    client_start,
    register,
)
from ..server import HonestServer
from .config import ScenarioConfig
from .report import RunReport
from .trace import ADVERSARY, SERVER, SIM, Trace

log = logging.getLogger(__name__)

# session kinds
HONEST = "honest"        # real client, real server
REVERSE = "reverse"      # real client, adversary posing as server
STANDARD = "standard"    # adversary posing as client, real server
VERIFY = "verify"        # adversary re-checking a confirmed guess at the real server


class _Client:
    __slots__ = ("idx", "identity", "endpoint", "password", "credential", "busy")

    def __init__(self, idx, identity, endpoint, password, credential):
        self.idx = idx
        self.identity = identity
        self.endpoint = endpoint
        self.password = password
        self.credential = credential
        self.busy = False


@dataclass(slots=True)
class _Session:
    sid: int
    kind: str
    client: _Client
    actor: str              # who plays the client role
    attempt: int
    party: Party
    rng: Rng
    pending: tuple
    responder: Party | None = None
    guess: str | None = None
    target: str | None = None
    msg_index: int = 0
    refused: bool = False
    reported: set = field(default_factory=set)


class Simulation:
    def __init__(self, config: ScenarioConfig):
        self.cfg = config
        self.params = config.params
        self.rng = Rng(config.seed)
        self.trace = Trace()
        self.messages = config.trace_messages
        self._heap: list = []
        self._order = itertools.count()
        self._sid = itertools.count(1)
        self.compromised: set[str] = set()
        self.network_compromised = False
        self.counts = dict.fromkeys(RunReport.COUNTERS, 0)
        self.trials_per_client: dict[str, int] = {}
        self._setup()

    # -- setup ------------------------------------------------------------

    def _setup(self):
        cfg = self.cfg
        signing = SigKeypair.generate(self.rng.split("server-signing-key")) if cfg.cert_mode else None
        self.store = AccountStore(self.params, signing_key=signing, simulate_unknown=cfg.server.simulate_unknown,
                                  secret=self.rng.split("server-secret").bytes(32))
        self.server = HonestServer(self.store, cfg.server.lockout_threshold, cfg.server.lockout_duration)
        passwords = self._assign_passwords()
        width = len(str(cfg.clients - 1))
        self.clients = []
        reg_rng = self.rng.split("registration")
        for i, pw in enumerate(passwords):
            ident = f"client{i:0{width}d}"
            endpoint = f"10.{(i >> 16) & 255}.{(i >> 8) & 255}.{i & 255}"
            cred, _ = register(cfg.protocol, ident, pw, self.store, reg_rng.split(ident),
                               envelope_secret=cfg.envelope_secret)
            self.clients.append(_Client(i, ident, endpoint, pw, cred))
        self.by_identity = {c.identity: c for c in self.clients}

        a = cfg.adversary
        self.guesser = Guesser(a.strategy, cfg.adversary_dictionary(), self.rng.split("guesser"))
        limit = a.budget_range if a.budget_range is not None else a.budget_limit
        self.budget = BudgetPolicy(limit, a.reset_period, a.budget_key, self.rng.split("budget"))

    def _assign_passwords(self) -> list[str]:
        cfg = self.cfg
        d = cfg.population_dictionary()
        if d.weights is None:
            pick = [d.entries[i % len(d)] for i in range(cfg.clients)]
            return [pick[0]] * cfg.clients if cfg.shared_password else pick
        cum = list(itertools.accumulate(d.weights))
        total = cum[-1]
        r = self.rng.split("passwords")
        n = 1 if cfg.shared_password else cfg.clients
        drawn = [d.entries[min(bisect_right(cum, r.random() * total), len(d) - 1)] for _ in range(n)]
        return drawn * cfg.clients if cfg.shared_password else drawn

    # -- event plumbing ---------------------------------------------------

    def _at(self, t: int, handler, *args):
        heapq.heappush(self._heap, (t, next(self._order), handler, args))

    def run(self) -> tuple[RunReport, Trace]:
        started = wallclock.perf_counter()
        cfg = self.cfg
        self.trace.emit(0, SIM, "run-start", None, run_id=cfg.run_id, config_id=cfg.config_id, seed=cfg.seed,
                        protocol=cfg.protocol.value, clients=cfg.clients, shared_password=cfg.shared_password,
                        mitigated=cfg.cert_mode or cfg.envelope_secret)
        sched = self.rng.split("schedule")
        for c in self.clients:
            offset = sched.randbelow(cfg.client.login_interval)
            for t in range(offset, cfg.horizon, cfg.client.login_interval):
                self._at(t, self._login, c)
            if cfg.adversary.mode == "standard":
                self._at(offset, self._standard_attempt, c)
        now = 0
        # the trace and heap hold many long-lived objects; frequent collections only rescan them
        thresholds = gc.get_threshold()
        gc.set_threshold(100_000, 50, 1000)
        try:
            while self._heap:
                now, _, handler, args = heapq.heappop(self._heap)
                handler(now, *args)
        finally:
            gc.set_threshold(*thresholds)
        self.trace.emit(now, SIM, "run-end", None)
        report = RunReport.build(self, now, wallclock.perf_counter() - started)
        return report, self.trace

    # -- clients ----------------------------------------------------------

    def _login(self, t: int, client: _Client):
        if client.busy:
            return
        client.busy = True
        self._start_client_session(t, client, 0)

    def _start_client_session(self, t: int, client: _Client, attempt: int):
        sid = next(self._sid)
        srng = self.rng.split(f"session/{sid}")
        party, request = client_start(client.credential, srng.split("client"))
        s = _Session(sid, HONEST, client, client.identity, attempt, party, srng, (Role.CLIENT, request))
        if self.cfg.interception > 0 and srng.random() < self.cfg.interception:
            self._maybe_intercept(t, s)
        self.trace.emit(t, client.identity, "session-start", sid, route=s.kind, attempt=attempt)
        self._send(t, s, client.identity, request)

    def _target(self, client: _Client) -> str:
        return "*network*" if self.cfg.shared_password else client.identity

    def _maybe_intercept(self, t: int, s: _Session):
        if self.cfg.adversary.mode != "reverse":
            return
        client = s.client
        target = self._target(client)
        if self.network_compromised or target in self.compromised:
            return
        # one trial at a time per target, so nothing is left in flight once it falls
        if self.guesser.in_flight(target) or self.guesser.next_guess(target) is None:
            return
        if not self.budget.allow_trial(self.budget.client_key(client.identity, client.endpoint), t):
            return
        s.kind, s.target, s.guess = REVERSE, target, self.guesser.draw(target)

    def _send(self, t: int, s: _Session, actor: str, msg: ProtocolMessage):
        if self.messages:
            self.trace.emit(t, actor, "msg-send", s.sid, index=s.msg_index, msg=msg.kind)
        self._at(t + 1, self._deliver, s)

    def _responder_actor(self, s: _Session) -> str:
        return ADVERSARY if s.kind == REVERSE else SERVER

    def _deliver(self, t: int, s: _Session):
        sender, msg = s.pending
        if sender is Role.CLIENT:
            receiver, actor = s.responder, self._responder_actor(s)
            if receiver is None:
                receiver = self._open_responder(t, s, msg)
                if receiver is None:
                    return
        else:
            receiver, actor = s.party, s.actor
        if self.messages:
            self.trace.emit(t, actor, "msg-recv", s.sid, index=s.msg_index, msg=msg.kind)
        s.msg_index += 1
        reply = receiver.receive(msg)
        if reply is not None:
            s.pending = (receiver.role, reply)
            self._send(t, s, actor, reply)
        if receiver.outcome is not None and receiver.role not in s.reported:
            self._terminal(t, s, receiver, actor)
        if reply is None:
            self._finish(t, s)

    def _open_responder(self, t: int, s: _Session, request: ProtocolMessage) -> Party | None:
        if s.kind == REVERSE:
            try:
                s.responder, _ = impersonate(request, s.guess, s.rng.split("adversary"), self.params)
            except ValueError:
                # not a request the adversary can work with; drop the trial
                self._conclude_trial(t, s, TrialResult.incomplete(s.guess, "malformed"))
                s.party.outcome = Outcome.reject(RejectReason.MALFORMED)
                self._terminal(t, s, s.party, s.actor)
                self._finish(t, s)
                return None
            self.trace.emit(t, ADVERSARY, "forge", s.sid, target=s.target, guess=s.guess)
            return s.responder
        identity = s.client.identity
        if self.server.is_locked(identity, t):
            if self.messages:
                self.trace.emit(t, SERVER, "msg-recv", s.sid, index=s.msg_index, msg=request.kind)
            self.server.refuse(identity, t)
            s.refused = True
            self.trace.emit(t, SERVER, "server-reject", s.sid, identity=identity, reason=RejectReason.LOCKED_OUT.value)
            self.counts["server_refusals"] += 1
            s.party.phase = "rejected"
            s.party.outcome = Outcome.reject(RejectReason.LOCKED_OUT)
            self._terminal(t, s, s.party, s.actor)
            self._finish(t, s)
            return None
        s.responder = self.server.open(request, s.rng.split("server"))
        return s.responder

    def _terminal(self, t: int, s: _Session, party: Party, actor: str):
        s.reported.add(party.role)
        out = party.outcome
        if party.role is Role.CLIENT:
            if out.accepted:
                self.trace.emit(t, actor, "client-accept", s.sid, key=out.key_digest.hex())
            else:
                self.trace.emit(t, actor, "client-reject", s.sid, reason=out.reason.value)
            if s.kind in (HONEST, REVERSE):
                self.counts["client_successes" if out.accepted else "client_failures"] += 1
            return
        if s.kind == REVERSE:
            return  # the adversary's own verdict goes into the trial event
        identity = s.client.identity
        if out.accepted:
            self.trace.emit(t, SERVER, "server-accept", s.sid, identity=identity, key=out.key_digest.hex())
            self.counts["server_accepts"] += 1
        else:
            self.trace.emit(t, SERVER, "server-reject", s.sid, identity=identity, reason=out.reason.value)
            self.counts["server_failures"] += 1
        for ev in self.server.record(identity, out, t):
            if ev.kind == "lockout":
                self.trace.emit(t, SERVER, "lockout", None, identity=identity,
                                until=t + self.cfg.server.lockout_duration)
                self.counts["lockouts"] += 1

    def _finish(self, t: int, s: _Session):
        if s.kind == REVERSE:
            self._conclude_trial(t, s, classify(s.responder, s.party, s.guess) if s.responder else None)
        elif s.kind in (STANDARD, VERIFY):
            if s.refused:
                result = TrialResult.incomplete(s.guess, "locked-out")
            elif s.party.outcome is not None and s.party.outcome.accepted:
                result = TrialResult.confirmed(s.guess)
            else:
                result = TrialResult.refuted(s.guess)
            self._conclude_standard(t, s, result)
            return
        self._client_after(t, s)

    def _client_after(self, t: int, s: _Session):
        client = s.client
        out = s.party.outcome
        cb = self.cfg.client
        if out is not None and out.accepted:
            client.busy = False
            return
        if s.attempt < cb.max_retries and s.rng.random() < cb.retry_prob:
            self.trace.emit(t, client.identity, "retry", None, after=s.sid, attempt=s.attempt + 1)
            self._at(t + cb.retry_delay, self._start_client_session, client, s.attempt + 1)
        else:
            client.busy = False

    # -- adversary --------------------------------------------------------

    def _conclude_trial(self, t: int, s: _Session, result: TrialResult | None):
        if result is None:
            result = TrialResult.incomplete(s.guess, "malformed")
        self.trace.emit(t, ADVERSARY, "trial", s.sid, mode=REVERSE, client=s.client.identity, target=s.target,
                        guess=s.guess, result=result.status.value, reason=result.reason)
        self.counts["reverse_trials"] += 1
        self.counts["reverse_" + result.status.value] += 1
        self.trials_per_client[s.client.identity] = self.trials_per_client.get(s.client.identity, 0) + 1
        self.guesser.feedback(s.target, result.adversary_view())
        if result.status is TrialStatus.CONFIRMED:
            self._compromise(s.client)
            if self.cfg.adversary.verify_with_server:
                self._at(t + 1, self._start_adversary_session, s.client, s.guess, VERIFY)

    def _compromise(self, client: _Client):
        if self.cfg.shared_password:
            self.network_compromised = True
            self.compromised.update(c.identity for c in self.clients)
        else:
            self.compromised.add(client.identity)

    def _standard_attempt(self, t: int, client: _Client):
        if t >= self.cfg.horizon or client.identity in self.compromised:
            return
        target = client.identity
        if self.guesser.next_guess(target) is None:
            return
        if not self.budget.allow_trial(self.budget.client_key(client.identity, ADVERSARY), t):
            if self.cfg.adversary.reset_period > 0:
                self._at(t + self.cfg.adversary.attempt_interval, self._standard_attempt, client)
            return
        self._start_adversary_session(t, client, self.guesser.draw(target), STANDARD)

    def _start_adversary_session(self, t: int, client: _Client, guess: str, kind: str):
        sid = next(self._sid)
        srng = self.rng.split(f"session/{sid}")
        store = self.store
        pinned = store.signing_key.verifying if self.cfg.cert_mode else None
        cred = ClientCredential(client.identity, guess, self.cfg.protocol, self.params, server_key=pinned)
        party, request = client_start(cred, srng.split("client"))
        s = _Session(sid, kind, client, ADVERSARY, 0, party, srng, (Role.CLIENT, request),
                     guess=guess, target=client.identity)
        self.trace.emit(t, ADVERSARY, "session-start", sid, route=kind, identity=client.identity)
        self._send(t, s, ADVERSARY, request)

    def _conclude_standard(self, t: int, s: _Session, result: TrialResult):
        self.trace.emit(t, ADVERSARY, "trial", s.sid, mode=s.kind, client=s.client.identity, target=s.target,
                        guess=s.guess, result=result.status.value, reason=result.reason)
        if s.kind == VERIFY:
            self.counts["verify_trials"] += 1
            return
        self.counts["standard_trials"] += 1
        self.counts["standard_" + result.status.value] += 1
        self.guesser.feedback(s.target, result)
        if result.status is TrialStatus.CONFIRMED:
            self._compromise(s.client)
        else:
            self._at(t + self.cfg.adversary.attempt_interval, self._standard_attempt, s.client)


def run_scenario(config: ScenarioConfig) -> tuple[RunReport, Trace]:
    """Run one scenario to its horizon. Report and trace depend only on ``config``."""
    return Simulation(config).run()
