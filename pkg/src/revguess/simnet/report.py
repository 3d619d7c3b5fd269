"""Per-run report and multi-seed aggregation."""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import asdict, dataclass, field, fields
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .scenario import Simulation


class UsageError(ValueError):
    """Inputs that make no sense together (mixed configs, mismatched runs)."""


@dataclass
class RunReport:
    run_id: str
    config_id: str
    seed: int
    protocol: str
    mitigated: bool
    clients: int
    compromised: list[str]
    compromised_count: int
    compromise_rate: float
    reverse_trials: int = 0
    reverse_confirmed: int = 0
    reverse_refuted: int = 0
    reverse_incomplete: int = 0
    standard_trials: int = 0
    standard_confirmed: int = 0
    standard_refuted: int = 0
    standard_incomplete: int = 0
    verify_trials: int = 0
    server_accepts: int = 0
    server_failures: int = 0
    server_refusals: int = 0
    server_events: int = 0
    client_successes: int = 0
    client_failures: int = 0
    lockouts: int = 0
    sessions: int = 0
    trial_histogram: dict[str, int] = field(default_factory=dict)
    simulated_duration: int = 0
    wall_clock: float = field(default=0.0, compare=False)

    # counters the simulator increments directly
    COUNTERS = (
        "reverse_trials", "reverse_confirmed", "reverse_refuted", "reverse_incomplete",
        "standard_trials", "standard_confirmed", "standard_refuted", "standard_incomplete",
        "verify_trials", "server_accepts", "server_failures", "server_refusals",
        "client_successes", "client_failures", "lockouts",
    )
    # fields a CSV row carries, in order
    CSV_FIELDS = (
        "run_id", "config_id", "seed", "protocol", "mitigated", "clients", "compromised_count",
        "compromise_rate", *COUNTERS, "server_events", "sessions", "simulated_duration",
    )

    @classmethod
    def build(cls, sim: "Simulation", end_time: int, wall_clock: float) -> "RunReport":
        cfg = sim.cfg
        c = sim.counts
        compromised = sorted(sim.compromised)
        # number of clients that saw k reverse trials, for every k observed
        hist: dict[int, int] = {}
        for client in sim.clients:
            k = sim.trials_per_client.get(client.identity, 0)
            hist[k] = hist.get(k, 0) + 1
        return cls(
            run_id=cfg.run_id,
            config_id=cfg.config_id,
            seed=cfg.seed,
            protocol=cfg.protocol.value,
            mitigated=cfg.cert_mode or cfg.envelope_secret,
            clients=cfg.clients,
            compromised=compromised,
            compromised_count=len(compromised),
            compromise_rate=len(compromised) / cfg.clients,
            server_events=c["server_accepts"] + c["server_failures"] + c["server_refusals"],
            sessions=next(sim._sid) - 1,
            trial_histogram={str(k): hist[k] for k in sorted(hist)},
            simulated_duration=end_time,
            wall_clock=wall_clock,
            **{k: c[k] for k in cls.COUNTERS},
        )

    def to_dict(self) -> dict:
        """Deterministic content only; wall-clock time is left out."""
        d = asdict(self)
        d.pop("wall_clock")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise UsageError(f"unknown report fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunReport":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def csv_row(self) -> list:
        return [getattr(self, f) for f in self.CSV_FIELDS]


@dataclass(frozen=True)
class Stat:
    mean: float
    stdev: float
    ci_low: float
    ci_high: float

    @classmethod
    def of(cls, values: list[float], confidence: float = 0.95) -> "Stat":
        mean = statistics.fmean(values)
        sd = statistics.stdev(values) if len(values) > 1 else 0.0
        half = statistics.NormalDist().inv_cdf(0.5 + confidence / 2) * sd / math.sqrt(len(values))
        return cls(mean, sd, mean - half, mean + half)


AGGREGATED = ("compromise_rate", "compromised_count", "reverse_trials", "reverse_confirmed",
              "standard_trials", "server_failures", "client_failures", "lockouts")


@dataclass(frozen=True)
class Summary:
    config_id: str
    runs: int
    seeds: list[int]
    stats: dict[str, Stat]

    def to_dict(self) -> dict:
        return {"config_id": self.config_id, "runs": self.runs, "seeds": self.seeds,
                "stats": {k: asdict(v) for k, v in self.stats.items()}}


def aggregate(reports: list[RunReport]) -> Summary:
    """Mean, sample stdev and normal-approximation 95% CI per counter."""
    if not reports:
        raise UsageError("nothing to aggregate")
    ids = {r.config_id for r in reports}
    if len(ids) > 1:
        raise UsageError(f"reports come from {len(ids)} different configurations")
    stats = {name: Stat.of([float(getattr(r, name)) for r in reports]) for name in AGGREGATED}
    return Summary(reports[0].config_id, len(reports), [r.seed for r in reports], stats)


def to_csv(reports: list[RunReport], summary: Summary | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RunReport.CSV_FIELDS)
    for r in reports:
        w.writerow(r.csv_row())
    if summary is not None:
        row = []
        for f in RunReport.CSV_FIELDS:
            if f in summary.stats:
                row.append(repr(summary.stats[f].mean))
            elif f == "run_id":
                row.append("mean")
            elif f == "config_id":
                row.append(summary.config_id)
            else:
                row.append("")
        w.writerow(row)
    return buf.getvalue()
