"""Scenario configuration: JSON schema, defaults and validation.

Every validation failure raises :class:`ConfigError` carrying the JSON path
of the offending value, which the CLI maps back to a line in the file.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from ..adversary import ClientKey, Dictionary, Strategy, load_dictionary, zipf_weights
from ..crypto import PRESETS, CryptoUsageError, GroupParams, kdf
from ..protocols import ProtocolId


class ConfigError(ValueError):
    def __init__(self, path: tuple, message: str, line: int | None = None):
        self.path = tuple(path)
        self.message = message
        self.line = line
        where = "/".join(str(p) for p in self.path) or "<root>"
        super().__init__(f"{where}: {message}")


@dataclass
class PasswordSpec:
    """Where client passwords come from.

    Exactly one of ``dictionary`` (file path), ``synthetic`` (generated
    ``{prefix}{rank}`` entries) or ``explicit`` (a list, assigned round-robin)
    is set. File and synthetic sources are sampled i.i.d. by Zipf weight.
    """

    dictionary: str | None = None
    synthetic: int | None = None
    prefix: str = "pw"
    explicit: list[str] | None = None
    zipf_exponent: float | None = 1.0


@dataclass
class AdversarySpec:
    mode: str = "reverse"  # "reverse" | "standard"
    strategy: Strategy = Strategy.SPRAY
    dictionary: str | None = None
    entries: list[str] | None = None
    population_top: int | None = None
    budget_limit: int | None = 10
    budget_range: tuple[int, int] | None = None
    reset_period: int = 0
    budget_key: ClientKey = ClientKey.IDENTITY
    verify_with_server: bool = False
    attempt_interval: int = 10


@dataclass
class ClientSpec:
    max_retries: int = 2
    retry_prob: float = 0.9
    login_interval: int = 100
    retry_delay: int = 1


@dataclass
class ServerSpec:
    lockout_threshold: int | None = None
    lockout_duration: int = 100
    simulate_unknown: bool = True


@dataclass
class ScenarioConfig:
    protocol: ProtocolId = ProtocolId.EKE
    group: str | dict = "sim-64"
    cert_mode: bool = False
    envelope_secret: bool = False
    clients: int = 10
    passwords: PasswordSpec = field(default_factory=PasswordSpec)
    shared_password: bool = False
    interception: float = 1.0
    adversary: AdversarySpec = field(default_factory=AdversarySpec)
    client: ClientSpec = field(default_factory=ClientSpec)
    server: ServerSpec = field(default_factory=ServerSpec)
    trace_messages: bool = True
    seed: int = 0
    horizon: int = 1000
    base_dir: str = field(default=".", compare=False)

    # -- derived ----------------------------------------------------------

    @property
    def params(self) -> GroupParams:
        return GroupParams.from_json(self.group)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        data = self.to_json()
        data["seed"] = seed
        return ScenarioConfig.from_json(data, base_dir=self.base_dir)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def population_dictionary(self) -> Dictionary:
        spec = self.passwords
        if spec.explicit is not None:
            return Dictionary(list(spec.explicit), None)
        if spec.synthetic is not None:
            width = len(str(spec.synthetic))
            entries = [f"{spec.prefix}{k:0{width}d}" for k in range(1, spec.synthetic + 1)]
            return Dictionary(entries, zipf_weights(len(entries), spec.zipf_exponent))
        d = load_dictionary(self.resolve(spec.dictionary))
        if spec.zipf_exponent is not None:
            d = Dictionary(d.entries, zipf_weights(len(d), spec.zipf_exponent))
        elif d.weights is None:
            raise ConfigError(("population", "passwords", "zipf_exponent"),
                              "dictionary has no weight column; a Zipf exponent is required")
        return d

    def adversary_dictionary(self) -> Dictionary:
        a = self.adversary
        if a.entries is not None:
            return Dictionary(list(a.entries))
        if a.dictionary is not None:
            return load_dictionary(self.resolve(a.dictionary))
        return self.population_dictionary().top(a.population_top)

    def head_mass(self, n: int) -> float:
        """Probability that a client's password is among the population's top ``n`` entries."""
        d = self.population_dictionary()
        if d.weights is None:
            return min(n, len(d)) / len(d)
        return math.fsum(d.weights[:n]) / math.fsum(d.weights)

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        a, c, s, pw = self.adversary, self.client, self.server, self.passwords
        budget: dict[str, Any] = {"reset_period": a.reset_period, "key": a.budget_key.value}
        if a.budget_range is not None:
            budget["limit_range"] = list(a.budget_range)
        else:
            budget["limit"] = a.budget_limit
        adv_dict: dict[str, Any]
        if a.entries is not None:
            adv_dict = {"entries": list(a.entries)}
        elif a.dictionary is not None:
            adv_dict = {"path": a.dictionary}
        else:
            adv_dict = {"population_top": a.population_top}
        pw_json: dict[str, Any] = {}
        if pw.explicit is not None:
            pw_json["explicit"] = list(pw.explicit)
        elif pw.synthetic is not None:
            pw_json["synthetic"] = {"size": pw.synthetic, "prefix": pw.prefix}
            pw_json["zipf_exponent"] = pw.zipf_exponent
        else:
            pw_json["dictionary"] = pw.dictionary
            pw_json["zipf_exponent"] = pw.zipf_exponent
        return {
            "protocol": self.protocol.value,
            "group": self.group,
            "mitigations": {"cert_mode": self.cert_mode, "envelope_secret": self.envelope_secret},
            "population": {"clients": self.clients, "passwords": pw_json},
            "shared_password": self.shared_password,
            "interception": self.interception,
            "adversary": {
                "mode": a.mode,
                "strategy": a.strategy.value,
                "dictionary": adv_dict,
                "budget": budget,
                "verify_with_server": a.verify_with_server,
                "attempt_interval": a.attempt_interval,
            },
            "client_behavior": asdict(c),
            "server": asdict(s),
            "trace": {"messages": self.trace_messages},
            "seed": self.seed,
            "horizon": self.horizon,
        }

    def canonical(self, *, include_seed: bool = True) -> bytes:
        data = self.to_json()
        if not include_seed:
            data.pop("seed")
        return json.dumps(data, sort_keys=True, separators=(",", ":")).encode()

    @property
    def run_id(self) -> str:
        return kdf("run-id", [self.canonical()]).hex()[:16]

    @property
    def config_id(self) -> str:
        return kdf("config-id", [self.canonical(include_seed=False)]).hex()[:16]

    @classmethod
    def from_json(cls, data: Any, base_dir: str | Path = ".") -> "ScenarioConfig":
        return _Parser(data).scenario(str(base_dir))

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError((), f"invalid JSON: {e.msg}", line=e.lineno) from None
        try:
            cfg = cls.from_json(data, base_dir=path.parent)
            cfg.check_sources()
        except ConfigError as e:
            e.line = locate(text, e.path)
            raise
        return cfg

    def check_sources(self) -> None:
        """Make sure referenced dictionary files exist and parse."""
        try:
            pop = self.population_dictionary()
        except (OSError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(("population", "passwords", "dictionary"), str(e)) from None
        try:
            adv = self.adversary_dictionary()
        except (OSError, ValueError) as e:
            raise ConfigError(("adversary", "dictionary"), str(e)) from None
        if not len(pop):
            raise ConfigError(("population", "passwords"), "password source is empty")
        if not len(adv):
            raise ConfigError(("adversary", "dictionary"), "adversary dictionary is empty")


def locate(text: str, path: tuple) -> int | None:
    """Best-effort line number of the key at ``path`` in JSON ``text``."""
    lines = text.splitlines()
    line, found = 0, None
    for key in path:
        if not isinstance(key, str):
            continue
        pat = re.compile(re.escape(json.dumps(key)) + r"\s*:")
        for i in range(line, len(lines)):
            if pat.search(lines[i]):
                line = found = i
                break
    return None if found is None else found + 1


class _Parser:
    """Walks the raw JSON, checking types and ranges as it goes."""

    def __init__(self, data):
        self.data = data

    def _obj(self, value, path):
        if value is None:
            return {}
        if not isinstance(value, dict):
            raise ConfigError(path, "expected an object")
        return value

    def _known(self, obj, allowed, path):
        for k in obj:
            if k not in allowed:
                raise ConfigError(path + (k,), f"unknown key (allowed: {', '.join(sorted(allowed))})")

    def _int(self, obj, key, path, default, lo=None, allow_none=False):
        v = obj.get(key, default)
        if v is None and allow_none:
            return None
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(path + (key,), f"expected an integer, got {v!r}")
        if lo is not None and v < lo:
            raise ConfigError(path + (key,), f"must be >= {lo}")
        return v

    def _prob(self, obj, key, path, default):
        v = obj.get(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not (0.0 <= v <= 1.0):
            raise ConfigError(path + (key,), f"expected a probability in [0, 1], got {v!r}")
        return float(v)

    def _bool(self, obj, key, path, default):
        v = obj.get(key, default)
        if not isinstance(v, bool):
            raise ConfigError(path + (key,), f"expected true/false, got {v!r}")
        return v

    def _enum(self, obj, key, path, enum_cls, default):
        v = obj.get(key, default)
        try:
            return enum_cls(v)
        except ValueError:
            choices = ", ".join(e.value for e in enum_cls)
            raise ConfigError(path + (key,), f"expected one of {choices}, got {v!r}") from None

    def scenario(self, base_dir: str) -> ScenarioConfig:
        root = self._obj(self.data, ())
        self._known(root, {"protocol", "group", "mitigations", "population", "shared_password", "interception",
                           "adversary", "client_behavior", "server", "trace", "seed", "horizon", "name",
                           "description"}, ())
        if "protocol" not in root:
            raise ConfigError(("protocol",), "missing required key")
        protocol = self._enum(root, "protocol", (), ProtocolId, None)

        group = root.get("group", "sim-64")
        try:
            GroupParams.from_json(group)
        except (CryptoUsageError, KeyError, TypeError, ValueError) as e:
            raise ConfigError(("group",), f"bad group: {e}") from None

        mit = self._obj(root.get("mitigations"), ("mitigations",))
        self._known(mit, {"cert_mode", "envelope_secret"}, ("mitigations",))
        cert_mode = self._bool(mit, "cert_mode", ("mitigations",), protocol == ProtocolId.SRP6A_CERT)
        if cert_mode != (protocol == ProtocolId.SRP6A_CERT):
            raise ConfigError(("mitigations", "cert_mode"), "cert_mode is on exactly when protocol is srp6a-cert")
        envelope = self._bool(mit, "envelope_secret", ("mitigations",), False)
        if envelope and protocol != ProtocolId.OPAQUE_LITE:
            raise ConfigError(("mitigations", "envelope_secret"), "envelope_secret needs protocol opaque-lite")

        pop = self._obj(root.get("population"), ("population",))
        self._known(pop, {"clients", "passwords"}, ("population",))
        clients = self._int(pop, "clients", ("population",), 10, lo=1)
        passwords = self.passwords(self._obj(pop.get("passwords"), ("population", "passwords")))

        shared = self._bool(root, "shared_password", (), False)
        interception = self._prob(root, "interception", (), 1.0)
        adversary = self.adversary(self._obj(root.get("adversary"), ("adversary",)))
        if adversary.mode == "standard" and interception > 0:
            raise ConfigError(("interception",), "standard-mode adversary does not intercept; set interception to 0")
        if adversary.population_top is not None and passwords.explicit is not None:
            raise ConfigError(("adversary", "dictionary", "population_top"),
                              "population_top needs a ranked password source, not an explicit list")

        cb = self._obj(root.get("client_behavior"), ("client_behavior",))
        self._known(cb, {f.name for f in fields(ClientSpec)}, ("client_behavior",))
        client = ClientSpec(
            max_retries=self._int(cb, "max_retries", ("client_behavior",), 2, lo=0),
            retry_prob=self._prob(cb, "retry_prob", ("client_behavior",), 0.9),
            login_interval=self._int(cb, "login_interval", ("client_behavior",), 100, lo=1),
            retry_delay=self._int(cb, "retry_delay", ("client_behavior",), 1, lo=1),
        )
        sv = self._obj(root.get("server"), ("server",))
        self._known(sv, {f.name for f in fields(ServerSpec)}, ("server",))
        server = ServerSpec(
            lockout_threshold=self._int(sv, "lockout_threshold", ("server",), None, lo=1, allow_none=True),
            lockout_duration=self._int(sv, "lockout_duration", ("server",), 100, lo=0),
            simulate_unknown=self._bool(sv, "simulate_unknown", ("server",), True),
        )
        tr = self._obj(root.get("trace"), ("trace",))
        self._known(tr, {"messages"}, ("trace",))
        seed = self._int(root, "seed", (), 0, lo=0)
        if seed >= 2**64:
            raise ConfigError(("seed",), "seed must fit in 64 bits")
        return ScenarioConfig(
            protocol=protocol, group=group, cert_mode=cert_mode, envelope_secret=envelope, clients=clients,
            passwords=passwords, shared_password=shared, interception=interception, adversary=adversary,
            client=client, server=server, trace_messages=self._bool(tr, "messages", ("trace",), True),
            seed=seed, horizon=self._int(root, "horizon", (), 1000, lo=1), base_dir=base_dir,
        )

    def passwords(self, obj) -> PasswordSpec:
        path = ("population", "passwords")
        self._known(obj, {"dictionary", "synthetic", "explicit", "zipf_exponent"}, path)
        sources = [k for k in ("dictionary", "synthetic", "explicit") if k in obj]
        if len(sources) != 1:
            raise ConfigError(path, "give exactly one of dictionary, synthetic, explicit")
        spec = PasswordSpec(zipf_exponent=None)
        if "zipf_exponent" in obj:
            z = obj["zipf_exponent"]
            if isinstance(z, bool) or not isinstance(z, (int, float)) or z < 0:
                raise ConfigError(path + ("zipf_exponent",), "expected a nonnegative number")
            spec.zipf_exponent = float(z)
        if "explicit" in obj:
            ex = obj["explicit"]
            if not isinstance(ex, list) or not ex or not all(isinstance(p, str) and p for p in ex):
                raise ConfigError(path + ("explicit",), "expected a nonempty list of nonempty strings")
            spec.explicit = list(ex)
        elif "synthetic" in obj:
            syn = self._obj(obj["synthetic"], path + ("synthetic",))
            self._known(syn, {"size", "prefix"}, path + ("synthetic",))
            spec.synthetic = self._int(syn, "size", path + ("synthetic",), None, lo=1)
            prefix = syn.get("prefix", "pw")
            if not isinstance(prefix, str):
                raise ConfigError(path + ("synthetic", "prefix"), "expected a string")
            spec.prefix = prefix
            if spec.zipf_exponent is None:
                raise ConfigError(path + ("zipf_exponent",), "synthetic passwords need a Zipf exponent")
        else:
            if not isinstance(obj["dictionary"], str):
                raise ConfigError(path + ("dictionary",), "expected a file path")
            spec.dictionary = obj["dictionary"]
        return spec

    def adversary(self, obj) -> AdversarySpec:
        path = ("adversary",)
        self._known(obj, {"mode", "strategy", "dictionary", "budget", "verify_with_server", "attempt_interval"}, path)
        mode = obj.get("mode", "reverse")
        if mode not in ("reverse", "standard"):
            raise ConfigError(path + ("mode",), f"expected reverse or standard, got {mode!r}")
        spec = AdversarySpec(mode=mode, strategy=self._enum(obj, "strategy", path, Strategy, "spray"))
        d = self._obj(obj.get("dictionary"), path + ("dictionary",))
        self._known(d, {"path", "entries", "population_top"}, path + ("dictionary",))
        srcs = [k for k in ("path", "entries", "population_top") if k in d]
        if len(srcs) != 1:
            raise ConfigError(path + ("dictionary",), "give exactly one of path, entries, population_top")
        if "entries" in d:
            e = d["entries"]
            if not isinstance(e, list) or not all(isinstance(p, str) and p for p in e):
                raise ConfigError(path + ("dictionary", "entries"), "expected a list of nonempty strings")
            spec.entries = list(e)
        elif "path" in d:
            if not isinstance(d["path"], str):
                raise ConfigError(path + ("dictionary", "path"), "expected a file path")
            spec.dictionary = d["path"]
        else:
            spec.population_top = self._int(d, "population_top", path + ("dictionary",), None, lo=1)

        b = self._obj(obj.get("budget"), path + ("budget",))
        bp = path + ("budget",)
        self._known(b, {"limit", "limit_range", "reset_period", "key"}, bp)
        if "limit_range" in b:
            if "limit" in b:
                raise ConfigError(bp, "give limit or limit_range, not both")
            r = b["limit_range"]
            if (not isinstance(r, list) or len(r) != 2 or not all(isinstance(x, int) and not isinstance(x, bool)
                                                                   for x in r) or not 1 <= r[0] <= r[1]):
                raise ConfigError(bp + ("limit_range",), "expected [lo, hi] with 1 <= lo <= hi")
            spec.budget_range = (r[0], r[1])
            spec.budget_limit = None
        else:
            spec.budget_limit = self._int(b, "limit", bp, 10, lo=1)
        spec.reset_period = self._int(b, "reset_period", bp, 0, lo=0)
        spec.budget_key = self._enum(b, "key", bp, ClientKey, "identity")
        spec.verify_with_server = self._bool(obj, "verify_with_server", path, False)
        spec.attempt_interval = self._int(obj, "attempt_interval", path, 10, lo=1)
        return spec
