"""Synthetic management-data generation for the simulated managed functions.

Targets are linear in the encoded features plus Gaussian noise, so model
quality is analytically checkable (irreducible error = sigma^2). Duplicates,
missing values and out-of-range errors are injected in exact floor(n*rate)
counts, all selections seeded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import FeatureSpec, SourceSpec, encoded_width
from .errors import SchemaMismatch
from .topology import ComponentId

MISSING = None


def derive_rng(*parts: int | str) -> np.random.Generator:
    """Independent, reproducible substream for a tagged part of the run."""
    entropy = [p if isinstance(p, int) else abs(hash_str(p)) for p in parts]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def hash_str(text: str) -> int:
    # stable across processes, unlike builtin hash()
    import hashlib

    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


@dataclass
class ManagementRecord:
    """One timestamped sample from a managed function."""

    record_id: int
    source: ComponentId
    tick: int
    features: dict[str, float | str | None]
    target: float
    poisoned: bool = field(default=False, compare=False)

    def field_tuple(self) -> tuple:
        """Value tuple used for exact-duplicate detection (flag excluded)."""
        return tuple(self.features.items()) + (self.target,)

    def copy(self) -> "ManagementRecord":
        return ManagementRecord(self.record_id, self.source, self.tick,
                                dict(self.features), self.target, self.poisoned)


def encode_features(schema: list[FeatureSpec],
                    features: dict[str, float | str | None]) -> np.ndarray:
    """Base numeric design row: numerics in order, then one-hot groups.

    Derived columns are appended later by the transform step; identifier
    fields never enter the encoding.
    """
    row: list[float] = []
    for spec in schema:
        if spec.type == "numeric":
            v = features[spec.name]
            row.append(float(v) if v is not None else math.nan)
    for spec in schema:
        if spec.type == "categorical":
            value = features[spec.name]
            row.extend(1.0 if value == entry else 0.0 for entry in spec.vocab)
    return np.array(row, dtype=float)


def true_target(spec: SourceSpec, features: dict[str, float | str | None]) -> float:
    x = encode_features(spec.schema, features)
    return float(np.dot(np.asarray(spec.coefficients), x) + spec.bias)


def generate_batch(spec: SourceSpec, n: int, seed: int | np.random.Generator,
                   id_start: int = 0, tick: int = 0,
                   owner: ComponentId | None = None) -> list[ManagementRecord]:
    """Draw n records from the source's generative process.

    After the n base records, floor(n*duplicate_rate) exact copies are
    appended, then floor(n*missing_rate) base records lose one feature and
    floor(n*error_rate) base records get one numeric feature pushed past its
    valid range. Targets are computed before corruption.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if len(spec.coefficients) != encoded_width(spec.schema):
        raise SchemaMismatch(
            f"{len(spec.coefficients)} coefficients for encoded width "
            f"{encoded_width(spec.schema)}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    owner = owner or spec.owner
    records: list[ManagementRecord] = []
    for i in range(n):
        features: dict[str, float | str | None] = {}
        for f in spec.schema:
            if f.type == "numeric":
                lo, hi = f.valid_range  # type: ignore[misc]
                features[f.name] = float(rng.uniform(lo, hi))
            elif f.type == "categorical":
                features[f.name] = str(f.vocab[int(rng.integers(len(f.vocab)))])
            else:
                features[f.name] = f"id-{int(rng.integers(1 << 31))}"
        target = true_target(spec, features)
        if spec.noise_sigma > 0:
            target += float(rng.normal(0.0, spec.noise_sigma))
        records.append(ManagementRecord(id_start + i, owner, tick, features, target))

    n_dup = math.floor(n * spec.duplicate_rate)
    if n_dup:
        picks = rng.choice(n, size=n_dup, replace=True)
        for p in picks:
            records.append(records[int(p)].copy())

    n_missing = math.floor(n * spec.missing_rate)
    if n_missing:
        rows = rng.choice(n, size=n_missing, replace=False)
        names = [f.name for f in spec.schema if f.type != "identifier"]
        for r in rows:
            victim = names[int(rng.integers(len(names)))]
            records[int(r)].features[victim] = MISSING

    n_error = math.floor(n * spec.error_rate)
    if n_error:
        numeric = [f for f in spec.schema if f.type == "numeric"]
        if not numeric:
            raise SchemaMismatch("error injection needs at least one numeric feature")
        rows = rng.choice(n, size=n_error, replace=False)
        for r in rows:
            f = numeric[int(rng.integers(len(numeric)))]
            lo, hi = f.valid_range  # type: ignore[misc]
            records[int(r)].features[f.name] = hi + spec.error_factor * (hi - lo)
    return records


def streaming_emission_ticks(start: int, window: int, interval: int) -> list[int]:
    """Emission ticks of a streaming source over (start, start + window]."""
    if interval < 1:
        raise ValueError("streaming interval must be >= 1")
    return [start + k * interval for k in range(1, window // interval + 1)]


def shifted(spec: SourceSpec, coefficients: tuple[float, ...] | None,
            bias: float | None) -> SourceSpec:
    """Source with replaced ground truth; used for injected concept drift."""
    new = replace(spec)
    if coefficients:
        if len(coefficients) != encoded_width(spec.schema):
            raise SchemaMismatch("shifted coefficient width differs from schema")
        new = replace(new, coefficients=list(coefficients))
    if bias is not None:
        new = replace(new, bias=bias)
    return new


def strip_hidden(records: list[ManagementRecord]) -> list[dict]:
    """Serialization view with the ground-truth poison flag removed."""
    return [
        {
            "record_id": r.record_id,
            "source": str(r.source),
            "tick": r.tick,
            "features": r.features,
            "target": r.target,
        }
        for r in records
    ]
