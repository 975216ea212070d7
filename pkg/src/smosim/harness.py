"""Fault injection and mitigation mechanisms, plus signaling accounting.

Covers the six challenge experiments: poisoning + validation filtering,
pseudonymization/encryption inflation, component failover support,
priority scheduling under contention, and the per-interface byte report.
"""

from __future__ import annotations

import hashlib
import hmac
import math
from dataclasses import dataclass, field

import numpy as np

from .config import FeatureSpec, FilterSpec, PoisonSpec, PrivacySpec, SchedulerSpec
from .datagen import ManagementRecord
from .errors import MissingKey, ZeroCapacity
from .topology import Simulation


# -- data poisoning ---------------------------------------------------------------


def poison_inject(records: list[ManagementRecord], spec: PoisonSpec) -> list[ManagementRecord]:
    """Alter exactly floor(n * fraction) seeded-selected records.

    The poisoned flag is ground truth for reporting only; nothing downstream
    of the generator may branch on it.
    """
    n = len(records)
    n_poison = math.floor(n * spec.fraction)
    out = [r.copy() for r in records]
    if n_poison == 0:
        return out
    rng = np.random.default_rng(spec.seed)
    rows = rng.choice(n, size=n_poison, replace=False)
    for i in rows:
        r = out[int(i)]
        if spec.attack == "target_offset":
            r.target += spec.delta
        elif spec.attack == "target_flip":
            r.target = 1.0 - r.target if r.target in (0.0, 1.0) else -r.target
        else:  # feature_scale
            for name, value in r.features.items():
                if isinstance(value, float):
                    r.features[name] = value * spec.gamma
        r.poisoned = True
    return out


# -- validation filtering ------------------------------------------------------------


def mad_statistics(targets: list[float]) -> tuple[float, float]:
    """Median and median absolute deviation of the targets."""
    med = float(np.median(targets))
    mad = float(np.median([abs(t - med) for t in targets]))
    return med, mad


def validation_filter(records: list[ManagementRecord],
                      spec: FilterSpec) -> tuple[list[ManagementRecord], list[ManagementRecord]]:
    """Reject records whose target deviates more than k robust deviations.

    A record is rejected iff |target - median| / max(MAD, floor) > k. The
    filter sees targets only; hidden poison flags are unobservable.
    """
    if not records:
        return [], []
    med, mad = mad_statistics([r.target for r in records])
    denom = max(mad, spec.mad_floor)
    kept, rejected = [], []
    for r in records:
        if abs(r.target - med) / denom > spec.k:
            rejected.append(r)
        else:
            kept.append(r)
    return kept, rejected


def poison_detection_report(kept: list[ManagementRecord],
                            rejected: list[ManagementRecord]) -> dict:
    """Precision/recall of the filter against ground-truth flags.

    Reporting-only: this is the single place the hidden flag may be read.
    """
    tp = sum(1 for r in rejected if r.poisoned)
    fp = len(rejected) - tp
    fn = sum(1 for r in kept if r.poisoned)
    precision = tp / (tp + fp) if rejected else None
    recall = tp / (tp + fn) if (tp + fn) else None
    return {
        "rejected": len(rejected),
        "kept": len(kept),
        "true_positives": tp,
        "false_positives": fp,
        "false_negatives": fn,
        "precision": precision,
        "recall": recall,
    }


# -- privacy -------------------------------------------------------------------------


def pseudonym(value: str, key: str) -> str:
    digest = hmac.new(key.encode(), str(value).encode(), hashlib.sha256).hexdigest()
    return f"pid-{digest[:16]}"


def privacy_transform(records: list[ManagementRecord], schema: list[FeatureSpec],
                      spec: PrivacySpec) -> list[ManagementRecord]:
    """Replace sensitive identifier values with keyed pseudonyms, at the source."""
    if not spec.key:
        raise MissingKey("pseudonymization key required")
    sensitive = [f.name for f in schema if f.sensitive and f.type == "identifier"]
    out = [r.copy() for r in records]
    for r in out:
        for name in sensitive:
            v = r.features.get(name)
            if v is not None:
                r.features[name] = pseudonym(str(v), spec.key)
    return out


def inflate_bytes(payload_bytes: int, inflation: float) -> int:
    """Encryption overhead model: byte count scaled and rounded."""
    return int(round(payload_bytes * inflation))


# -- resource scheduling ----------------------------------------------------------------


@dataclass
class JobOutcome:
    name: str
    priority: int
    demand: int
    work: int
    completion_tick: int
    ideal_tick: int

    @property
    def delay(self) -> int:
        return self.completion_tick - self.ideal_tick


@dataclass
class ScheduleResult:
    allocations: list[dict[str, int]]  # index 0 = tick 1
    jobs: dict[str, JobOutcome]
    total_allocated: dict[str, int] = field(default_factory=dict)

    def delay_of(self, name: str) -> int:
        return self.jobs[name].delay


def schedule(spec: SchedulerSpec, horizon: int | None = None) -> ScheduleResult:
    """Strict-priority allocation with round-robin inside equal priority.

    Each tick hands out at most `budget` units: higher priority classes
    first, each capped by its per-tick demand and remaining work. A job
    completes on the first tick its cumulative allocation covers its work;
    delay is measured against the contention-free completion ceil(work/demand).
    """
    if spec.budget < 1:
        raise ZeroCapacity("scheduler budget must be >= 1")
    jobs = list(spec.classes)
    if any(j.work is None for j in jobs):
        raise ValueError("every job class needs a concrete work total")
    remaining = {j.name: int(j.work) for j in jobs}  # type: ignore[arg-type]
    completion: dict[str, int] = {j.name: 0 for j in jobs}
    totals: dict[str, int] = {j.name: 0 for j in jobs}
    allocations: list[dict[str, int]] = []
    by_priority: dict[int, list] = {}
    for j in jobs:
        by_priority.setdefault(j.priority, []).append(j)
    priorities = sorted(by_priority, reverse=True)

    tick = 0
    while any(remaining[j.name] > 0 for j in jobs):
        tick += 1
        if horizon is not None and tick > horizon:
            break
        budget_left = spec.budget
        row: dict[str, int] = {j.name: 0 for j in jobs}
        for prio in priorities:
            group = [j for j in by_priority[prio] if remaining[j.name] > 0]
            if not group:
                continue
            offset = (tick - 1) % len(group)
            for j in group[offset:] + group[:offset]:
                if budget_left <= 0:
                    break
                grant = min(j.demand, remaining[j.name], budget_left)
                if grant > 0:
                    row[j.name] += grant
                    remaining[j.name] -= grant
                    totals[j.name] += grant
                    budget_left -= grant
                    if remaining[j.name] == 0:
                        completion[j.name] = tick
        allocations.append(row)

    outcomes = {}
    for j in jobs:
        work = int(j.work)  # type: ignore[arg-type]
        outcomes[j.name] = JobOutcome(
            name=j.name, priority=j.priority, demand=j.demand, work=work,
            completion_tick=completion[j.name],
            ideal_tick=math.ceil(work / j.demand),
        )
    return ScheduleResult(allocations=allocations, jobs=outcomes, total_allocated=totals)


# -- signaling accounting -----------------------------------------------------------------


def signaling_report(sim: Simulation) -> dict:
    """Per-interface byte/message table plus the raw-vs-model traffic ratio."""
    table = sim.signaling_table()
    raw = sum(entry["by_kind"].get("RawData", {"bytes": 0})["bytes"]
              for entry in table.values())
    model = sum(entry["by_kind"].get("ModelArtifact", {"bytes": 0})["bytes"]
                for entry in table.values())
    return {
        "interfaces": table,
        "raw_data_bytes": raw,
        "model_artifact_bytes": model,
        "raw_to_artifact_ratio": (raw / model) if model else None,
    }
