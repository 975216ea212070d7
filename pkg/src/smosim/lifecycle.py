"""Model registry, lifecycle state machine, monitoring window and drift rule.

The registry is the single authority on model versions and legal state
transitions; its JSON snapshot doubles as the failover checkpoint format and
the external import format.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from .config import ModelKind
from .errors import IllegalTransition, InvalidArtifact
from .learn import EvalMetrics, LinearParams, ModelParameters, params_from_list
from .pipeline import ScalingParams


class LifecycleState(str, Enum):
    COLLECTED = "Collected"
    PREPROCESSED = "Preprocessed"
    TRAINED = "Trained"
    VALIDATED = "Validated"
    DEPLOYED = "Deployed"
    MONITORED = "Monitored"
    REFINING = "Refining"
    RETIRED = "Retired"


LEGAL_TRANSITIONS: frozenset[tuple[LifecycleState, LifecycleState]] = frozenset({
    (LifecycleState.COLLECTED, LifecycleState.PREPROCESSED),
    (LifecycleState.PREPROCESSED, LifecycleState.TRAINED),
    (LifecycleState.TRAINED, LifecycleState.VALIDATED),
    (LifecycleState.VALIDATED, LifecycleState.DEPLOYED),
    (LifecycleState.VALIDATED, LifecycleState.RETIRED),
    (LifecycleState.DEPLOYED, LifecycleState.MONITORED),
    (LifecycleState.MONITORED, LifecycleState.REFINING),
    (LifecycleState.MONITORED, LifecycleState.RETIRED),
    (LifecycleState.REFINING, LifecycleState.TRAINED),
})


@dataclass
class ModelArtifact:
    """Serialized trained model: the deployment, import and checkpoint unit."""

    kind: ModelKind
    parameters: ModelParameters
    feature_names: list[str]
    scaler: ScalingParams
    metrics: EvalMetrics
    origin: str = "internal"  # internal | external | aggregated
    version: int = 1
    created_tick: int = 0
    packaged: bool = False

    def __post_init__(self) -> None:
        if self.origin not in ("internal", "external", "aggregated"):
            raise InvalidArtifact(f"unknown origin {self.origin!r}")
        width = len(self.feature_names)
        if isinstance(self.parameters, LinearParams):
            if len(self.parameters.weights) != width:
                raise InvalidArtifact(
                    f"parameter width {len(self.parameters.weights)} != schema width {width}")
        else:
            if self.parameters.feature >= width:
                raise InvalidArtifact("stump split feature outside the schema")

    @property
    def param_count(self) -> int:
        return self.parameters.param_count

    def predict(self, X: np.ndarray) -> np.ndarray:
        from .learn import predict_score

        return predict_score(self.parameters, self.kind, X)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "parameters": self.parameters.to_list(),
            "feature_schema": list(self.feature_names),
            "scaling_parameters": self.scaler.to_dict(),
            "metrics": self.metrics.to_dict(),
            "origin": self.origin,
            "version": self.version,
            "created_tick": self.created_tick,
            "packaged": self.packaged,
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "ModelArtifact":
        try:
            kind = ModelKind(d["kind"])
            params = params_from_list(kind, d["parameters"])
            return ModelArtifact(
                kind=kind,
                parameters=params,
                feature_names=list(d["feature_schema"]),
                scaler=ScalingParams.from_dict(d["scaling_parameters"]),
                metrics=EvalMetrics.from_dict(d["metrics"]),
                origin=d.get("origin", "external"),
                version=int(d.get("version", 1)),
                created_tick=int(d.get("created_tick", 0)),
                packaged=bool(d.get("packaged", False)),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise InvalidArtifact(f"malformed artifact: {exc}") from None


def save_artifact(artifact: ModelArtifact, path: str | Path) -> None:
    Path(path).write_text(json.dumps(artifact.to_dict(), indent=2) + "\n")


def load_artifact(path: str | Path) -> ModelArtifact:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(str(p))
    return ModelArtifact.from_dict(json.loads(p.read_text()))


@dataclass
class RegistryEntry:
    model_id: str
    version: int
    artifact: ModelArtifact
    state: LifecycleState
    provenance: dict[str, Any] = field(default_factory=dict)
    history: list[tuple[int, str, str]] = field(default_factory=list)
    refinements: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "model_id": self.model_id,
            "version": self.version,
            "artifact": self.artifact.to_dict(),
            "state": self.state.value,
            "provenance": self.provenance,
            "history": [list(h) for h in self.history],
            "refinements": self.refinements,
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "RegistryEntry":
        return RegistryEntry(
            model_id=d["model_id"],
            version=int(d["version"]),
            artifact=ModelArtifact.from_dict(d["artifact"]),
            state=LifecycleState(d["state"]),
            provenance=dict(d.get("provenance", {})),
            history=[(int(t), a, b) for t, a, b in d.get("history", [])],
            refinements=int(d.get("refinements", 0)),
        )


class Registry:
    """Versioned model store; every mutation honors the legal-transition digraph."""

    def __init__(self) -> None:
        self.entries: dict[str, RegistryEntry] = {}
        # (model_id, target) -> list of (version, tick, active)
        self.deployments: dict[tuple[str, str], list[list[Any]]] = {}

    # -- registration ------------------------------------------------------------

    def register(self, artifact: ModelArtifact, model_id: str, tick: int,
                 provenance: dict[str, Any] | None = None,
                 validation: tuple[np.ndarray, np.ndarray] | None = None,
                 mse_threshold: float | None = None) -> RegistryEntry:
        """New entry in Trained (internal) or Validated (external) state.

        External artifacts must additionally pass evaluation on a local
        validation partition before they are accepted.
        """
        if model_id in self.entries:
            raise InvalidArtifact(f"model id {model_id!r} already registered; "
                                  "use reregister for new versions")
        state = LifecycleState.TRAINED
        if artifact.origin == "external":
            if validation is None or mse_threshold is None:
                raise InvalidArtifact("external artifacts need local validation")
            from .learn import evaluate

            Xv, yv = validation
            if Xv.shape[1] != len(artifact.feature_names):
                raise InvalidArtifact(
                    f"validation width {Xv.shape[1]} != artifact schema "
                    f"{len(artifact.feature_names)}")
            Xs = artifact.scaler.apply(Xv) if artifact.scaler.mode != "none" else Xv
            metrics = evaluate(artifact.parameters, artifact.kind, Xs, yv)
            if metrics.mse > mse_threshold:
                raise InvalidArtifact(
                    f"external artifact failed validation: mse {metrics.mse:.6g} "
                    f"> threshold {mse_threshold:.6g}")
            artifact.metrics = metrics
            state = LifecycleState.VALIDATED
        artifact.version = 1
        entry = RegistryEntry(model_id=model_id, version=1, artifact=artifact,
                              state=state, provenance=provenance or {})
        self.entries[model_id] = entry
        return entry

    def reregister(self, model_id: str, artifact: ModelArtifact, tick: int) -> RegistryEntry:
        """Install a refined artifact as the next version (Refining -> Trained).

        An entry already sitting in Trained (a restored in-flight training
        job) is replaced in place without a transition record.
        """
        entry = self.entries[model_id]
        if entry.state is not LifecycleState.TRAINED:
            self.transition(entry, LifecycleState.TRAINED, tick)
        entry.version += 1
        artifact.version = entry.version
        entry.artifact = artifact
        return entry

    # -- state machine ------------------------------------------------------------

    def transition(self, entry: RegistryEntry, to: LifecycleState, tick: int) -> RegistryEntry:
        if (entry.state, to) not in LEGAL_TRANSITIONS:
            raise IllegalTransition(f"{entry.state.value} -> {to.value}")
        entry.history.append((tick, entry.state.value, to.value))
        entry.state = to
        return entry

    def deploy(self, entry: RegistryEntry, target: str, tick: int) -> None:
        """Mark entry active at target; only Validated (or already Deployed
        for additional targets) entries may be placed."""
        if entry.state is LifecycleState.VALIDATED:
            self.transition(entry, LifecycleState.DEPLOYED, tick)
        elif entry.state is not LifecycleState.DEPLOYED:
            raise IllegalTransition(f"deploy from {entry.state.value}")
        history = self.deployments.setdefault((entry.model_id, target), [])
        for rec in history:
            rec[2] = False
        history.append([entry.version, tick, True])

    def active_deployments(self, model_id: str) -> dict[str, int]:
        out = {}
        for (mid, target), history in self.deployments.items():
            if mid != model_id:
                continue
            active = [rec[0] for rec in history if rec[2]]
            if len(active) > 1:
                raise IllegalTransition(
                    f"{len(active)} versions active at {target} for {mid}")
            if active:
                out[target] = active[0]
        return out

    # -- checkpointing --------------------------------------------------------------

    def snapshot(self) -> dict[str, Any]:
        return {
            "entries": {mid: e.to_dict() for mid, e in sorted(self.entries.items())},
            "deployments": {
                f"{mid}@{target}": [list(rec) for rec in history]
                for (mid, target), history in sorted(self.deployments.items())
            },
        }

    @staticmethod
    def restore(snapshot: dict[str, Any]) -> "Registry":
        reg = Registry()
        for mid, entry_d in snapshot.get("entries", {}).items():
            reg.entries[mid] = RegistryEntry.from_dict(entry_d)
        for key, history in snapshot.get("deployments", {}).items():
            mid, _, target = key.partition("@")
            reg.deployments[(mid, target)] = [list(rec) for rec in history]
        return reg

    def total_params(self) -> int:
        return sum(e.artifact.param_count for e in self.entries.values())


# -- monitoring -------------------------------------------------------------------------


@dataclass
class MonitorWindow:
    """Ring buffer of (prediction, actual) with a drift rule against baseline."""

    capacity: int
    baseline_mse: float
    drift_factor: float
    min_samples: int
    buffer: deque = field(default_factory=deque)

    def ingest(self, prediction: float, actual: float, tick: int) -> None:
        if len(self.buffer) == self.capacity:
            self.buffer.popleft()
        self.buffer.append((float(prediction), float(actual), int(tick)))

    def mse(self) -> float:
        if not self.buffer:
            return 0.0
        return sum((p - a) ** 2 for p, a, _ in self.buffer) / len(self.buffer)

    def detect_drift(self) -> bool:
        if len(self.buffer) < self.min_samples:
            return False
        return self.mse() > self.baseline_mse * self.drift_factor

    def clear(self, new_baseline: float | None = None) -> None:
        self.buffer.clear()
        if new_baseline is not None:
            self.baseline_mse = new_baseline
