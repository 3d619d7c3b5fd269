"""Command-line entry point: run, sweep, audit, demo, validate."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .adversary import classify, impersonate
from .audit import audit_summary, check_agreement, violations_json
from .crypto import Rng, SigKeypair
from .protocols import AccountStore, ProtocolId, ProtocolMessage, Role, client_start, converse, register, server_start
from .simnet import ConfigError, RunReport, ScenarioConfig, Trace, TraceParseError, UsageError, aggregate, run_scenario, to_csv

log = logging.getLogger("revguess")

EXIT_OK, EXIT_VIOLATIONS, EXIT_USAGE = 0, 1, 2

# symbolic form of each message, for the demo printout
SYMBOLS = {
    "eke-request": "U, P(P_u)",
    "eke-response": "P(P_u(R))",
    "eke-challenge": "R(c_A)",
    "eke-challenge-response": "R((c_A, c_B))",
    "eke-confirm": "R(c_B)",
    "srp-hello": "U, suite, n_C",
    "srp-key-exchange": "N, g, s, B, n_S",
    "srp-client-finish": "A, M1",
    "srp-server-finish": "M2",
    "opaque-hello": "U, H(P)^r, X, n_C",
    "opaque-response": "H(P)^(rk), Env, Y, n_S, mac_S",
    "opaque-finish": "mac_C",
    "alert": "alert",
}


def write_atomic(path: str | Path, text: str) -> None:
    """Write to a temp file in the target directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _config_error(path: str, e: ConfigError) -> int:
    where = f"{path}:{e.line}" if e.line else path
    print(f"{where}: error: {e}", file=sys.stderr)
    return EXIT_USAGE


def _load(path: str, seed: int | None = None) -> ScenarioConfig:
    cfg = ScenarioConfig.load(path)
    return cfg.with_seed(seed) if seed is not None else cfg


# -- subcommands -------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        cfg = _load(args.config)
    except ConfigError as e:
        return _config_error(args.config, e)
    print(f"{args.config}: ok ({cfg.protocol.value}, {cfg.clients} clients, config {cfg.config_id})")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = _load(args.config, args.seed)
    except ConfigError as e:
        return _config_error(args.config, e)
    report, trace = run_scenario(cfg)
    log.info("run %s finished in %.2fs", report.run_id, report.wall_clock)
    if args.trace:
        write_atomic(args.trace, trace.to_jsonl())
    if args.report:
        write_atomic(args.report, report.to_json())
    print(f"run {report.run_id} seed={report.seed} compromised={report.compromised_count}/{report.clients} "
          f"reverse={report.reverse_trials} (confirmed {report.reverse_confirmed}) "
          f"standard={report.standard_trials} server-failures={report.server_failures}")
    return EXIT_OK


def _run_seed(cfg_json: tuple[dict, str]) -> RunReport:
    data, base = cfg_json
    return run_scenario(ScenarioConfig.from_json(data, base_dir=base))[0]


def cmd_sweep(args) -> int:
    try:
        cfg = _load(args.config)
    except ConfigError as e:
        return _config_error(args.config, e)
    first = cfg.seed if args.first_seed is None else args.first_seed
    jobs = []
    for i in range(args.seeds):
        data = cfg.to_json()
        data["seed"] = (first + i) % 2**64
        jobs.append((data, cfg.base_dir))
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            reports = list(pool.map(_run_seed, jobs))
    else:
        reports = [_run_seed(j) for j in jobs]
    summary = aggregate(reports)
    if args.csv:
        write_atomic(args.csv, to_csv(reports, summary))
    print(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_audit(args) -> int:
    try:
        trace = Trace.load(args.trace)
    except TraceParseError as e:
        print(f"{args.trace}:{e.lineno}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    violations = check_agreement(trace)
    out = violations_json(violations)
    if args.out:
        write_atomic(args.out, out)
    else:
        sys.stdout.write(out)
    status = EXIT_VIOLATIONS if violations else EXIT_OK
    if args.report:
        try:
            rec = audit_summary(trace, RunReport.load(args.report))
        except UsageError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE
        print(f"reconciliation: {'OK' if rec.ok else 'DISCREPANCY'} "
              f"(violations {rec.violations}, confirmed reverse trials {rec.confirmed_reverse})", file=sys.stderr)
        for d in rec.discrepancies:
            print(f"  {d}", file=sys.stderr)
        if not rec.ok:
            status = EXIT_VIOLATIONS
    return status


def _arrow(role: Role, msg: ProtocolMessage, left: str, right: str) -> str:
    sym = SYMBOLS.get(msg.kind, msg.kind)
    head = f"{left:>9} ---> {right:<9}" if role is Role.CLIENT else f"{left:>9} <--- {right:<9}"
    return f"  {head} {msg.kind:<24} {sym:<30} {msg.encode().hex()[:32]}"


def cmd_demo(args) -> int:
    protocol = ProtocolId(args.protocol)
    envelope = False
    if args.mitigated:
        if protocol == ProtocolId.EKE:
            print("error: eke has no mitigation; use srp6a-cert or opaque-lite", file=sys.stderr)
            return EXIT_USAGE
        if protocol == ProtocolId.SRP6A_NOCERT:
            protocol = ProtocolId.SRP6A_CERT
        elif protocol == ProtocolId.OPAQUE_LITE:
            envelope = True
    rng = Rng(args.seed)
    keys = SigKeypair.generate(rng.split("server-keys")) if protocol == ProtocolId.SRP6A_CERT else None
    store = AccountStore(signing_key=keys, simulate_unknown=False)
    cred, _ = register(protocol, "alice", args.password, store, rng.split("register"), envelope_secret=envelope)
    mitigated = protocol == ProtocolId.SRP6A_CERT or envelope
    print(f"protocol {protocol.value}{' (mitigated)' if mitigated else ''}; client alice, password {args.password!r}")
    if not args.attack:
        client, first = client_start(cred, rng.split("client"))
        server = server_start(store, first, rng.split("server"))
        print("honest session:")
        for role, msg in converse(client, server, first):
            print(_arrow(role, msg, "client", "server"))
        print(f"client {client.outcome}, server {server.outcome}")
        return EXIT_OK

    guesses = args.guesses.split(",") if args.guesses else ["123456", "password", args.password, "qwerty"]
    for n, guess in enumerate(guesses, 1):
        trial_rng = rng.split(f"trial/{n}")
        client, request = client_start(cred, trial_rng.split("client"))
        print(f"trial {n}:")
        print(f"  Initiate Key Exchange   client sends {request.kind} (request)")
        print(f"  Guess Password          P' = {guess!r}")
        fake, record = impersonate(request, guess, trial_rng.split("adversary"), store.params)
        print(f"  Forge Auth Data         {', '.join(sorted(record.payload))}")
        print("  Complete Key Exchange")
        for role, msg in converse(client, fake, request):
            print(_arrow(role, msg, "client", "adversary"))
        result = classify(fake, client, guess)
        view = result.adversary_view()
        print(f"  client {client.outcome}; trial {result.status.value}"
              f"{f' ({result.reason})' if result.reason else ''}; adversary sees {view.status.value}")
        if client.outcome.accepted:
            print(f"client Accepted without server: password {guess!r} validated")
            return EXIT_OK
    print("no guess validated")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="revguess", description="Reverse online guessing simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--trace", help="write the JSONL trace here")
    r.add_argument("--report", help="write the JSON report here")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a scenario over many seeds and aggregate")
    s.add_argument("config")
    s.add_argument("--seeds", type=int, required=True)
    s.add_argument("--first-seed", type=int)
    s.add_argument("--csv", help="write one row per seed plus an aggregate row")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("audit", help="check a trace for agreement violations")
    a.add_argument("trace")
    a.add_argument("--report", help="also reconcile against this run report")
    a.add_argument("--out", help="write violations JSON here instead of stdout")
    a.set_defaults(func=cmd_audit)

    d = sub.add_parser("demo", help="print one annotated session")
    d.add_argument("protocol", choices=[pid.value for pid in ProtocolId])
    d.add_argument("--attack", action="store_true", help="answer the client with a forging adversary")
    d.add_argument("--mitigated", action="store_true", help="switch on the protocol's mitigation")
    d.add_argument("--password", default="hunter2")
    d.add_argument("--guesses", help="comma-separated guess list for --attack")
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_demo)

    v = sub.add_parser("validate", help="check a config file")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("REDTEAM_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "seeds", 1) < 1 or getattr(args, "workers", 1) < 1:
        print("error: --seeds and --workers must be positive", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must fit in 64 bits", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
