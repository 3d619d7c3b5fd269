import hashlib
import hmac

import pytest

from revguess.crypto import (
    DIGEST_SIZE,
    NONCE_SIZE,
    PRESETS,
    CryptoUsageError,
    GroupParams,
    Rng,
    SigKeypair,
    group_exp,
    kdf,
    kdf_scalar,
    preset,
    scalar_inverse,
    sign,
    sym_decrypt,
    sym_encrypt,
    verify,
)

TOY = preset("toy-23")


def naive_pow(base, exp, mod):
    """Repeated multiplication: the independent oracle for modular exponentiation."""
    acc = 1
    for _ in range(exp):
        acc = acc * base % mod
    return acc


def small_primes(limit):
    return [n for n in range(5, limit + 1) if all(n % d for d in range(2, int(n ** 0.5) + 1))]


# -- kdf -------------------------------------------------------------------------

def test_kdf_is_deterministic_and_32_bytes():
    a = kdf("x", [b"salt", b"alice", b"hunter2"])
    assert a == kdf("x", [b"salt", b"alice", b"hunter2"])
    assert len(a) == DIGEST_SIZE
    assert len(kdf("x", [])) == DIGEST_SIZE


def test_kdf_distinct_salts_give_distinct_digests():
    s1 = kdf("x", [b"salt-1", b"alice", b"hunter2"])
    s2 = kdf("x", [b"salt-2", b"alice", b"hunter2"])
    assert s1 != s2


def test_kdf_matches_framed_sha256_oracle():
    def frame(b):
        return len(b).to_bytes(4, "big") + b

    parts = [b"ab", b"", b"c"]
    expected = hashlib.sha256(frame(b"lbl") + (3).to_bytes(4, "big") + b"".join(frame(p) for p in parts)).digest()
    assert kdf("lbl", parts) == expected


def test_kdf_framing_separates_boundaries():
    assert kdf("x", [b"ab", b"c"]) != kdf("x", [b"a", b"bc"])
    assert kdf("x", [b"abc"]) != kdf("x", [b"abc", b""])
    assert kdf("xa", [b"b"]) != kdf("x", [b"ab"])


def test_kdf_scalar_never_zero():
    for i in range(10_000):
        x = kdf_scalar("s", [i.to_bytes(4, "big")], TOY)
        assert 1 <= x < TOY.order


# -- groups ------------------------------------------------------------------------

def test_toy_group_known_values():
    g = TOY.generator
    assert group_exp(g, 6).value == 8
    assert group_exp(group_exp(g, 3), 4).value == 18
    assert group_exp(group_exp(g, 4), 3).value == 18
    assert group_exp(g, 1) == g


def test_group_exp_against_naive_oracle_for_small_primes():
    for p in small_primes(101):
        for g in range(2, p):
            params = GroupParams(p, g)
            for e in range(1, p):
                assert group_exp(params.generator, e).value == naive_pow(g, e, p)


def test_group_exp_rejects_mismatched_params_and_bad_exponent():
    other = GroupParams(29, 2)
    with pytest.raises(CryptoUsageError):
        group_exp(TOY.generator, 3, other)
    with pytest.raises(CryptoUsageError):
        group_exp(TOY.generator, 0)
    with pytest.raises(CryptoUsageError):
        TOY.generator * other.generator


def test_group_order_and_inverse():
    assert TOY.order == 22
    sim = preset("sim-64")
    assert pow(sim.g, sim.order, sim.p) == 1
    assert sim.order == (sim.p - 1) // 2
    for x in range(1, 22, 2):
        if x == 11:
            continue
        inv = scalar_inverse(x, TOY)
        assert x * inv % TOY.order == 1


def test_presets_are_consistent():
    for name, params in PRESETS.items():
        assert preset(name) is params
        assert params.element_size == (params.p.bit_length() + 7) // 8
        assert GroupParams.from_json(name) == params
        assert GroupParams.from_json(params.to_json()) == params
    with pytest.raises(CryptoUsageError):
        preset("nope")


def test_decode_is_total():
    for data in (b"", b"\x00" * 8, b"\xff" * 64):
        el = TOY.decode(data)
        assert 1 <= el.value < TOY.p


def test_hash_to_group_lands_in_subgroup():
    sim = preset("sim-64")
    for i in range(50):
        h = sim.hash_to_group("h", [bytes([i])])
        assert pow(h.value, sim.order, sim.p) == 1


# -- symmetric cipher -----------------------------------------------------------

def test_sym_roundtrip():
    key = kdf("k", [])
    ct = sym_encrypt(key, b"attack at dawn", Rng(1))
    assert len(ct) == NONCE_SIZE + 14
    assert sym_decrypt(key, ct) == b"attack at dawn"


def test_sym_wrong_key_yields_same_length_garbage_without_error():
    ct = sym_encrypt(kdf("k1", []), b"x" * 40, Rng(1))
    out = sym_decrypt(kdf("k2", []), ct)
    assert len(out) == 40
    assert out != b"x" * 40


def test_sym_fresh_randomness_gives_distinct_ciphertexts():
    key = kdf("k", [])
    rng = Rng(5)
    a = sym_encrypt(key, b"same", rng.split("a"))
    b = sym_encrypt(key, b"same", rng.split("b"))
    assert a != b


def test_sym_empty_plaintext_and_short_ciphertext():
    key = kdf("k", [])
    assert sym_decrypt(key, sym_encrypt(key, b"", Rng(0))) == b""
    assert sym_decrypt(key, b"short") == b""


# -- signatures ------------------------------------------------------------------

def test_sign_verify():
    k1 = SigKeypair.generate(Rng(1))
    k2 = SigKeypair.generate(Rng(2))
    sig = sign(k1, b"m")
    assert verify(k1.verifying, b"m", sig)
    assert not verify(k1.verifying, b"m'", sig)
    assert not verify(k2.verifying, b"m", sig)
    assert not verify(k1.verifying, b"m", None)
    assert not verify(k1.verifying, b"m", b"")


def test_signature_is_hmac_under_signing_secret():
    k = SigKeypair.from_secret(b"s" * 32)
    assert sign(k, b"m") == hmac.new(b"s" * 32, b"m", hashlib.sha256).digest()
    assert "s" * 8 not in repr(k)


# -- rng -------------------------------------------------------------------------

def test_rng_deterministic_and_split_independent_of_consumption():
    a, b = Rng(42), Rng(42)
    assert a.bytes(100) == b.bytes(100)
    c = Rng(42)
    c.bytes(1000)
    assert c.split("x").bytes(16) == Rng(42).split("x").bytes(16)
    assert Rng(42).split("x").bytes(16) != Rng(42).split("y").bytes(16)
    assert Rng(1).bytes(16) != Rng(2).bytes(16)


def test_rng_chunking_does_not_change_stream():
    a = Rng(9)
    whole = a.bytes(700)
    b = Rng(9)
    pieces = b"".join(b.bytes(n) for n in (1, 255, 3, 300, 141))
    assert whole == pieces


def test_rng_ranges():
    r = Rng(3)
    counts = [0] * 7
    for _ in range(7000):
        counts[r.randbelow(7)] += 1
    assert all(800 < c < 1200 for c in counts)
    for _ in range(1000):
        assert 2 <= r.randint(2, 5) <= 5
        assert 0.0 <= r.random() < 1.0
        assert 1 <= r.scalar(TOY) < TOY.order
    with pytest.raises(ValueError):
        r.randbelow(0)
    with pytest.raises(ValueError):
        Rng(2**64)
