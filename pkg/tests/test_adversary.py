import pytest

from revguess.adversary import (
    BudgetPolicy,
    ClientKey,
    Dictionary,
    Guesser,
    Strategy,
    TrialResult,
    TrialStatus,
    allow_trial,
    forge_auth_data,
    impersonate,
    load_dictionary,
    reverse_trial,
    standard_trial,
    zipf_weights,
)
from revguess.crypto import Rng, SigKeypair, preset
from revguess.protocols import AccountStore, ProtocolId, ProtocolMessage, client_start, register
from revguess.protocols import srp
from revguess.server import HonestServer

SIM = preset("sim-64")


def live_client(protocol, password="hunter2", envelope_secret=False, seed=0):
    keys = SigKeypair.generate(Rng(99)) if protocol == ProtocolId.SRP6A_CERT else None
    store = AccountStore(SIM, signing_key=keys)
    cred, _ = register(protocol, "alice", password, store, Rng(seed).split("reg"), envelope_secret=envelope_secret)
    return store, cred


def trial(protocol, guess, password="hunter2", envelope_secret=False, seed=0):
    _, cred = live_client(protocol, password, envelope_secret)
    client, request = client_start(cred, Rng(seed).split("client"))
    return reverse_trial(client, request, guess, Rng(seed).split("adv"), SIM)


# -- guess ordering ----------------------------------------------------------------

def test_spray_priority_and_feedback():
    g = Guesser(Strategy.SPRAY, Dictionary(["123456", "password", "qwerty"]))
    assert g.next_guess("alice") == "123456"
    g.feedback("alice", TrialResult.refuted("123456"))
    assert g.next_guess("alice") == "password"
    g.feedback("alice", TrialResult.refuted("password"))
    g.feedback("alice", TrialResult.refuted("qwerty"))
    assert g.next_guess("alice") is None
    assert g.next_guess("bob") == "123456"


def test_history_grows_and_no_repeats():
    g = Guesser(Strategy.DICTIONARY, Dictionary([f"p{i}" for i in range(20)]))
    seen = []
    while (pw := g.draw("t")) is not None:
        assert pw not in seen
        seen.append(pw)
        before = g.history("t")
        g.feedback("t", TrialResult.refuted(pw))
        assert before < g.history("t")
    assert len(seen) == 20


def test_pending_guess_is_not_reissued_and_incomplete_returns_it():
    g = Guesser(Strategy.SPRAY, Dictionary(["a", "b"]))
    assert g.draw("t") == "a"
    assert g.in_flight("t")
    assert g.draw("t") == "b"
    assert g.draw("t") is None
    g.feedback("t", TrialResult.incomplete("a", "signature-rejected"))
    assert g.next_guess("t") == "a"


def test_weighted_order_is_per_target_and_deterministic():
    d = Dictionary([f"p{i}" for i in range(50)], zipf_weights(50, 1.0))
    a = Guesser(Strategy.WEIGHTED, d, Rng(1))
    b = Guesser(Strategy.WEIGHTED, d, Rng(1))
    order_a = [a.draw("t") for _ in range(50)]
    assert order_a == [b.draw("t") for _ in range(50)]
    assert sorted(order_a) == sorted(d.entries)
    # heavy entries come early on average across targets
    firsts = [Guesser(Strategy.WEIGHTED, d, Rng(s)).next_guess("t") for s in range(200)]
    assert firsts.count("p0") > firsts.count("p10")


def test_load_dictionary(tmp_path):
    f = tmp_path / "d.txt"
    f.write_text("123456\t5\npassword\t3\n\nqwerty\t1\n", encoding="utf-8")
    d = load_dictionary(f)
    assert d.entries == ["123456", "password", "qwerty"]
    assert d.weights == [5.0, 3.0, 1.0]
    f.write_text("a\nb\n", encoding="utf-8")
    assert load_dictionary(f).weights is None
    f.write_text("a\t1\nb\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_dictionary(f)
    f.write_text("a\tx\n", encoding="utf-8")
    with pytest.raises(ValueError, match=":1:"):
        load_dictionary(f)


# -- budgets -----------------------------------------------------------------------

def test_budget_limit_and_reset():
    b = BudgetPolicy(3, reset_period=100)
    assert all(allow_trial(b, "alice", t) for t in (0, 1, 2))
    assert not allow_trial(b, "alice", 50)
    assert allow_trial(b, "bob", 50)
    assert allow_trial(b, "alice", 100)


def test_budget_without_reset_is_one_period():
    b = BudgetPolicy(2, reset_period=0)
    assert b.allow_trial("a", 0) and b.allow_trial("a", 10**9)
    assert not b.allow_trial("a", 10**12)


def test_randomized_limits_are_reproducible():
    a = BudgetPolicy((2, 5), 0, rng=Rng(7))
    b = BudgetPolicy((2, 5), 0, rng=Rng(7))
    limits = [a.limit_for(f"c{i}") for i in range(100)]
    assert limits == [b.limit_for(f"c{i}") for i in range(100)]
    assert set(limits) == {2, 3, 4, 5}


def test_client_keys():
    assert BudgetPolicy(1, 0, ClientKey.IDENTITY).client_key("alice", "10.0.0.1") == "alice"
    assert BudgetPolicy(1, 0, ClientKey.ENDPOINT).client_key("alice", "10.0.0.1") == "10.0.0.1"
    assert BudgetPolicy(1, 0, ClientKey.IDENTITY_ENDPOINT).client_key("alice", "10.0.0.1") == "alice@10.0.0.1"


# -- forging ------------------------------------------------------------------------

def test_forge_eke_needs_nothing_but_the_guess():
    rec = forge_auth_data(ProtocolId.EKE, "alice", "hunter2", Rng(1), SIM)
    assert rec.payload == {"password": "hunter2"}


def test_forge_srp_differs_from_honest_record_but_is_well_formed():
    store, _ = live_client(ProtocolId.SRP6A_NOCERT)
    honest = store.records["alice"]
    forged = forge_auth_data(ProtocolId.SRP6A_NOCERT, "alice", "hunter2", Rng(1), SIM)
    assert forged.payload["salt"] != honest.payload["salt"]
    assert forged.payload["verifier"] == srp.make_verifier(forged.payload["salt"], "alice", "hunter2", SIM)


def test_forge_is_deterministic():
    for protocol in ProtocolId:
        a = forge_auth_data(protocol, "alice", "g", Rng(4), SIM)
        assert a == forge_auth_data(protocol, "alice", "g", Rng(4), SIM)


# -- trials ----------------------------------------------------------------------------

@pytest.mark.parametrize("protocol", [ProtocolId.EKE, ProtocolId.SRP6A_NOCERT, ProtocolId.OPAQUE_LITE])
def test_reverse_trial_is_a_password_oracle(protocol):
    result, transcript = trial(protocol, "hunter2")
    assert result.status is TrialStatus.CONFIRMED
    result, transcript = trial(protocol, "hunter3")
    assert result.status is TrialStatus.REFUTED


def test_eke_trial_client_believes_it_authenticated():
    _, cred = live_client(ProtocolId.EKE)
    client, request = client_start(cred, Rng(0))
    result, transcript = reverse_trial(client, request, "hunter2", Rng(1), SIM)
    assert client.outcome.accepted
    assert len(transcript) == 5


def test_refuted_trial_looks_like_a_typo_to_the_client():
    store, cred = live_client(ProtocolId.EKE)
    client, request = client_start(cred, Rng(0))
    reverse_trial(client, request, "nope", Rng(1), SIM)
    from revguess.protocols import run_handshake
    typo, _, _ = run_handshake(cred.with_password("hunter3"), store, Rng(2))
    assert client.outcome.reason == typo.reason


def test_cert_mode_trial_is_incomplete_either_way():
    for guess in ("hunter2", "wrong"):
        result, transcript = trial(ProtocolId.SRP6A_CERT, guess)
        assert result == TrialResult.incomplete(guess, "signature-rejected")
        assert result.adversary_view().status is TrialStatus.INCOMPLETE


def test_envelope_secret_hides_correct_guess():
    right, _ = trial(ProtocolId.OPAQUE_LITE, "hunter2", envelope_secret=True)
    wrong, _ = trial(ProtocolId.OPAQUE_LITE, "hunter3", envelope_secret=True)
    assert right == TrialResult.incomplete("hunter2", "confirmation-rejected")
    assert wrong.status is TrialStatus.REFUTED
    assert right.adversary_view().status is TrialStatus.REFUTED


def test_malformed_request_is_incomplete():
    _, cred = live_client(ProtocolId.EKE)
    client, _ = client_start(cred, Rng(0))
    result, transcript = reverse_trial(client, ProtocolMessage("bogus", {}), "g", Rng(1), SIM)
    assert result == TrialResult.incomplete("g", "malformed")
    assert transcript == []
    with pytest.raises(ValueError):
        impersonate(ProtocolMessage(srp.HELLO, {"identity": b"a", "suite": b"?"}), "g", Rng(1), SIM)


def test_standard_trial_and_lockout():
    store, _ = live_client(ProtocolId.SRP6A_NOCERT)
    server = HonestServer(store, lockout_threshold=3, lockout_duration=100)
    kw = dict(protocol=ProtocolId.SRP6A_NOCERT)
    assert standard_trial(server, "alice", "hunter2", Rng(1), **kw).status is TrialStatus.CONFIRMED
    assert [e.kind for e in server.telemetry] == ["success"]
    for i in range(3):
        assert standard_trial(server, "alice", f"bad{i}", Rng(i), now=i, **kw).status is TrialStatus.REFUTED
    assert server.telemetry[-1].kind == "lockout"
    locked = standard_trial(server, "alice", "hunter2", Rng(9), now=50, **kw)
    assert locked == TrialResult.incomplete("hunter2", "locked-out")
    assert standard_trial(server, "alice", "hunter2", Rng(9), now=102, **kw).status is TrialStatus.CONFIRMED


def test_standard_trial_in_cert_mode_confirms_correct_guess():
    store, _ = live_client(ProtocolId.SRP6A_CERT)
    server = HonestServer(store)
    r = standard_trial(server, "alice", "hunter2", Rng(1), protocol=ProtocolId.SRP6A_CERT)
    assert r.status is TrialStatus.CONFIRMED
