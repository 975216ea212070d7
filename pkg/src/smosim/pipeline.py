"""Data preparation inside the AI/ML function: cleanse, format, transform,
explore, split.

All operations are pure dataset-in/dataset-out functions. Stages only move
forward: Raw -> Cleansed -> Formatted -> Transformed -> Split.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .config import DerivedFeature, FeatureSpec, SplitSpec, model_feature_names
from .datagen import MISSING, ManagementRecord
from .errors import (
    ConfigError,
    EmptyDataset,
    InsufficientData,
    SchemaMismatch,
    UnmappableField,
)
from .topology import ComponentId


class Stage(str, Enum):
    RAW = "Raw"
    CLEANSED = "Cleansed"
    FORMATTED = "Formatted"
    TRANSFORMED = "Transformed"
    SPLIT = "Split"


_ORDER = [Stage.RAW, Stage.CLEANSED, Stage.FORMATTED, Stage.TRANSFORMED, Stage.SPLIT]


@dataclass(frozen=True)
class Provenance:
    sources: tuple[str, ...]
    window: tuple[int, int]
    config_hash: str


@dataclass
class Dataset:
    """Record-level dataset for the pre-encoding stages."""

    stage: Stage
    records: list[ManagementRecord]
    source_schemas: dict[ComponentId, list[FeatureSpec]]
    provenance: Provenance
    canonical: list[FeatureSpec] | None = None
    partial: bool = False

    def _require_stage(self, expected: Stage) -> None:
        if self.stage is not expected:
            raise SchemaMismatch(f"operation requires stage {expected.value}, "
                                 f"dataset is {self.stage.value}")

    def schema_for(self, source: ComponentId) -> list[FeatureSpec]:
        try:
            return self.source_schemas[source]
        except KeyError:
            raise SchemaMismatch(f"no schema registered for source {source}") from None


@dataclass
class ScalingParams:
    """Per-column affine scaling x' = (x - offset) / scale, reusable at inference."""

    mode: str
    feature_names: list[str]
    offset: np.ndarray
    scale: np.ndarray

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        return (matrix - self.offset) / self.scale

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "feature_names": list(self.feature_names),
            "offset": [float(v) for v in self.offset],
            "scale": [float(v) for v in self.scale],
        }

    @staticmethod
    def from_dict(d: dict) -> "ScalingParams":
        return ScalingParams(
            mode=d["mode"],
            feature_names=list(d["feature_names"]),
            offset=np.array(d["offset"], dtype=float),
            scale=np.array(d["scale"], dtype=float),
        )


@dataclass
class TransformedDataset:
    """Fully numeric design matrix plus targets; stage Transformed."""

    feature_names: list[str]
    X: np.ndarray
    y: np.ndarray
    scaler: ScalingParams
    provenance: Provenance
    record_ids: list[int] = field(default_factory=list)
    poisoned: np.ndarray | None = None  # ground truth, reporting only
    stage: Stage = Stage.TRANSFORMED

    def __len__(self) -> int:
        return len(self.y)

    def take(self, idx: np.ndarray) -> "TransformedDataset":
        return TransformedDataset(
            feature_names=self.feature_names,
            X=self.X[idx],
            y=self.y[idx],
            scaler=self.scaler,
            provenance=self.provenance,
            record_ids=[self.record_ids[i] for i in idx] if self.record_ids else [],
            poisoned=self.poisoned[idx] if self.poisoned is not None else None,
        )


@dataclass
class SplitDataset:
    spec: SplitSpec
    train: TransformedDataset
    val: TransformedDataset
    test: TransformedDataset
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray

    @property
    def feature_names(self) -> list[str]:
        return self.train.feature_names


@dataclass
class ExplorationReport:
    feature_names: list[str]
    mean: list[float]
    variance: list[float]
    minimum: list[float]
    maximum: list[float]
    correlation: list[list[float]]
    target_correlation: list[float]
    ranking: list[str]  # by |feature-target correlation|, descending

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=False)


# -- cleansing --------------------------------------------------------------------


def cleanse(d: Dataset) -> Dataset:
    """Dedup, impute and clamp. Idempotent.

    Duplicates (same record id or identical field tuple) keep their first
    occurrence. Missing numerics take the column median of present values,
    missing categoricals the most frequent value (ties: lexicographic).
    Out-of-range numerics clamp to the nearest declared bound.
    """
    d._require_stage(Stage.RAW)
    seen_ids: set[int] = set()
    seen_tuples: set[tuple] = set()
    kept: list[ManagementRecord] = []
    for r in d.records:
        key = r.field_tuple()
        if r.record_id in seen_ids or key in seen_tuples:
            continue
        seen_ids.add(r.record_id)
        seen_tuples.add(key)
        kept.append(r.copy())
    if not kept:
        raise EmptyDataset("no records left after deduplication")

    numeric_present: dict[str, list[float]] = {}
    categorical_present: dict[str, list[str]] = {}
    for r in kept:
        for spec in d.schema_for(r.source):
            v = r.features.get(spec.name, MISSING)
            if v is MISSING:
                continue
            if spec.type == "numeric":
                numeric_present.setdefault(spec.name, []).append(float(v))
            elif spec.type == "categorical":
                categorical_present.setdefault(spec.name, []).append(str(v))

    medians = {k: float(np.median(v)) for k, v in numeric_present.items()}
    modes: dict[str, str] = {}
    for k, values in categorical_present.items():
        counts = Counter(values)
        top = max(counts.values())
        modes[k] = min(v for v, c in counts.items() if c == top)

    for r in kept:
        for spec in d.schema_for(r.source):
            v = r.features.get(spec.name, MISSING)
            if spec.type == "numeric":
                lo, hi = spec.valid_range  # type: ignore[misc]
                if v is MISSING:
                    r.features[spec.name] = medians.get(spec.name, (lo + hi) / 2.0)
                else:
                    r.features[spec.name] = min(max(float(v), lo), hi)
            elif spec.type == "categorical":
                if v is MISSING:
                    r.features[spec.name] = modes.get(spec.name, spec.vocab[0])
            elif v is MISSING:
                r.features[spec.name] = ""
    return Dataset(Stage.CLEANSED, kept, d.source_schemas, d.provenance,
                   canonical=d.canonical, partial=d.partial)


# -- formatting -------------------------------------------------------------------


def format_dataset(d: Dataset, canonical: list[FeatureSpec],
                   renames: dict[ComponentId, dict[str, str]] | None = None) -> Dataset:
    """Rename every record's fields onto the canonical schema, fixed order."""
    d._require_stage(Stage.CLEANSED)
    renames = renames or {}
    canonical_names = [f.name for f in canonical]
    canonical_set = set(canonical_names)
    out: list[ManagementRecord] = []
    for r in d.records:
        table = renames.get(r.source, {})
        mapped: dict[str, float | str | None] = {}
        for name, value in r.features.items():
            new = table.get(name, name)
            if new not in canonical_set:
                raise UnmappableField(
                    f"field {name!r} from {r.source} has no canonical mapping")
            mapped[new] = value
        missing = canonical_set - mapped.keys()
        if missing:
            raise UnmappableField(
                f"record {r.record_id} lacks canonical fields {sorted(missing)}")
        ordered = {name: mapped[name] for name in canonical_names}
        out.append(ManagementRecord(r.record_id, r.source, r.tick, ordered,
                                    r.target, r.poisoned))
    return Dataset(Stage.FORMATTED, out, {s: canonical for s in d.source_schemas},
                   d.provenance, canonical=canonical, partial=d.partial)


# -- transformation -----------------------------------------------------------------


def base_design_matrix(records: list[ManagementRecord], canonical: list[FeatureSpec],
                       derived: tuple[DerivedFeature, ...] = ()) -> np.ndarray:
    """Unscaled design matrix: numerics, derived features, one-hot groups."""
    numeric_names = [f.name for f in canonical if f.type == "numeric"]
    rows = np.empty((len(records), len(numeric_names)), dtype=float)
    for i, r in enumerate(records):
        for j, name in enumerate(numeric_names):
            v = r.features[name]
            if v is MISSING:
                raise SchemaMismatch(f"record {r.record_id} still has MISSING {name!r}")
            rows[i, j] = float(v)
    cols = [rows]
    col_of = {name: rows[:, j] for j, name in enumerate(numeric_names)}
    for dspec in derived:
        if dspec.a not in col_of or dspec.b not in col_of:
            raise SchemaMismatch(f"derived feature {dspec.column_name()!r} "
                                 "references a non-numeric column")
        a, b = col_of[dspec.a], col_of[dspec.b]
        if dspec.op == "product":
            cols.append((a * b)[:, None])
        else:
            safe = np.where(np.abs(b) > 1e-12, b, 1.0)
            cols.append(np.where(np.abs(b) > 1e-12, a / safe, 0.0)[:, None])
    for f in canonical:
        if f.type == "categorical":
            block = np.zeros((len(records), len(f.vocab)), dtype=float)
            index = {v: k for k, v in enumerate(f.vocab)}
            for i, r in enumerate(records):
                value = r.features[f.name]
                if value is MISSING:
                    raise SchemaMismatch(f"record {r.record_id} still has MISSING {f.name!r}")
                if str(value) not in index:
                    raise SchemaMismatch(
                        f"value {value!r} outside vocab of {f.name!r}")
                block[i, index[str(value)]] = 1.0
            cols.append(block)
    return np.hstack(cols) if cols else np.empty((len(records), 0))


def fit_scaler(matrix: np.ndarray, names: list[str], canonical: list[FeatureSpec],
               derived: tuple[DerivedFeature, ...], mode: str) -> ScalingParams:
    """Scaling for numeric + derived columns; one-hot columns pass through.

    Z-scores use the population standard deviation; constant columns map to
    all-zeros instead of dividing by zero.
    """
    n_scaled = sum(1 for f in canonical if f.type == "numeric") + len(derived)
    offset = np.zeros(matrix.shape[1])
    scale = np.ones(matrix.shape[1])
    if mode == "none" or matrix.shape[0] == 0:
        return ScalingParams(mode, names, offset, scale)
    for j in range(n_scaled):
        col = matrix[:, j]
        if mode == "zscore":
            mu = float(np.mean(col))
            sigma = float(np.std(col))  # population
            offset[j], scale[j] = (mu, sigma) if sigma > 0 else (mu, 1.0)
        elif mode == "minmax":
            lo, hi = float(np.min(col)), float(np.max(col))
            offset[j], scale[j] = (lo, hi - lo) if hi > lo else (lo, 1.0)
        elif mode == "schema_range":
            spec = _schema_range_spec(j, canonical, derived)
            offset[j], scale[j] = spec
        else:
            raise ConfigError("pipeline.scaling", f"unknown scaling mode {mode!r}")
    return ScalingParams(mode, names, offset, scale)


def _schema_range_spec(j: int, canonical: list[FeatureSpec],
                       derived: tuple[DerivedFeature, ...]) -> tuple[float, float]:
    numeric = [f for f in canonical if f.type == "numeric"]
    if j < len(numeric):
        lo, hi = numeric[j].valid_range  # type: ignore[misc]
        return lo, (hi - lo) if hi > lo else 1.0
    # derived columns: bound by the product/ratio of declared ranges
    dspec = derived[j - len(numeric)]
    ranges = {f.name: f.valid_range for f in numeric}
    (alo, ahi), (blo, bhi) = ranges[dspec.a], ranges[dspec.b]  # type: ignore[misc]
    if dspec.op == "product":
        corners = [alo * blo, alo * bhi, ahi * blo, ahi * bhi]
        lo, hi = min(corners), max(corners)
    else:
        lo, hi = min(alo, blo, -abs(ahi)), max(ahi, bhi, abs(ahi))
    return lo, (hi - lo) if hi > lo else 1.0


def transform(d: Dataset, scaling: str = "zscore",
              derived: tuple[DerivedFeature, ...] = ()) -> TransformedDataset:
    """Scale numerics, one-hot categoricals, append derived features."""
    d._require_stage(Stage.FORMATTED)
    if d.canonical is None:
        raise SchemaMismatch("formatted dataset lost its canonical schema")
    names = model_feature_names(d.canonical, list(derived))
    base = base_design_matrix(d.records, d.canonical, derived)
    scaler = fit_scaler(base, names, d.canonical, derived, scaling)
    X = scaler.apply(base)
    y = np.array([r.target for r in d.records], dtype=float)
    flags = np.array([r.poisoned for r in d.records], dtype=bool)
    return TransformedDataset(
        feature_names=names, X=X, y=y, scaler=scaler, provenance=d.provenance,
        record_ids=[r.record_id for r in d.records], poisoned=flags,
    )


def reapply_transform(records: list[ManagementRecord], canonical: list[FeatureSpec],
                      derived: tuple[DerivedFeature, ...],
                      scaler: ScalingParams) -> np.ndarray:
    """Inference-time path: encode fresh records with stored scaling parameters."""
    base = base_design_matrix(records, canonical, derived)
    return scaler.apply(base)


# -- exploration -------------------------------------------------------------------


def _safe_corr(a: np.ndarray, b: np.ndarray) -> float:
    sa, sb = float(np.std(a)), float(np.std(b))
    if sa == 0.0 or sb == 0.0:
        return 0.0
    cov = float(np.mean((a - np.mean(a)) * (b - np.mean(b))))
    return cov / (sa * sb)


def explore(td: TransformedDataset) -> ExplorationReport:
    """Summary statistics and Pearson correlations of a transformed dataset."""
    if len(td) < 2:
        raise InsufficientData("exploration needs at least 2 records")
    X, y = td.X, td.y
    d = X.shape[1]
    corr = [[1.0 if i == j else _safe_corr(X[:, i], X[:, j]) for j in range(d)]
            for i in range(d)]
    target_corr = [_safe_corr(X[:, j], y) for j in range(d)]
    order = sorted(range(d), key=lambda j: (-abs(target_corr[j]), j))
    return ExplorationReport(
        feature_names=list(td.feature_names),
        mean=[float(v) for v in X.mean(axis=0)],
        variance=[float(v) for v in X.var(axis=0)],
        minimum=[float(v) for v in X.min(axis=0)] if len(td) else [],
        maximum=[float(v) for v in X.max(axis=0)] if len(td) else [],
        correlation=corr,
        target_correlation=target_corr,
        ranking=[td.feature_names[j] for j in order],
    )


# -- splitting ----------------------------------------------------------------------


def split(td: TransformedDataset, spec: SplitSpec) -> SplitDataset:
    """Seeded shuffle, then floor-rule partition; remainder goes to train."""
    ratios = spec.ratios()
    if any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ConfigError("split", f"ratios must be >= 0 and sum to 1, got {ratios}")
    n = len(td)
    n_val = math.floor(n * spec.val)
    n_test = math.floor(n * spec.test)
    n_train = n - n_val - n_test
    perm = np.random.default_rng(spec.seed).permutation(n)
    train_idx = np.sort(perm[:n_train])
    val_idx = np.sort(perm[n_train:n_train + n_val])
    test_idx = np.sort(perm[n_train + n_val:])
    return SplitDataset(
        spec=spec,
        train=td.take(train_idx),
        val=td.take(val_idx),
        test=td.take(test_idx),
        train_idx=train_idx,
        val_idx=val_idx,
        test_idx=test_idx,
    )


# -- CSV / JSONL interchange ----------------------------------------------------------


def transformed_to_csv(td: TransformedDataset) -> str:
    lines = [",".join(td.feature_names + ["target"])]
    for row, target in zip(td.X, td.y):
        lines.append(",".join([repr(float(v)) for v in row] + [repr(float(target))]))
    return "\n".join(lines) + "\n"


def transformed_from_csv(text: str, provenance: Provenance,
                         scaler: ScalingParams | None = None) -> TransformedDataset:
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines:
        raise EmptyDataset("CSV file has no rows")
    header = lines[0].split(",")
    if header[-1] != "target":
        raise SchemaMismatch("last CSV column must be named 'target'")
    names = header[:-1]
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    if data.ndim != 2 or data.shape[1] != len(header):
        raise SchemaMismatch("CSV rows do not match the header width")
    if scaler is None:
        scaler = ScalingParams("none", names, np.zeros(len(names)), np.ones(len(names)))
    return TransformedDataset(
        feature_names=names, X=data[:, :-1], y=data[:, -1], scaler=scaler,
        provenance=provenance, record_ids=list(range(len(data))),
        poisoned=np.zeros(len(data), dtype=bool),
    )


def records_to_jsonl(records: list[ManagementRecord]) -> str:
    """Debug dump; ground-truth poison flags are stripped."""
    from .datagen import strip_hidden

    return "".join(json.dumps(r, separators=(",", ":")) + "\n"
                   for r in strip_hidden(records))
