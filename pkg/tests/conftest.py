"""Shared config builders for the test suite."""

from __future__ import annotations

from typing import Any

import pytest

from smosim import config_from_dict
from smosim.config import ScenarioConfig


def numeric_feature(name: str, lo: float = 0.0, hi: float = 1.0,
                    sensitive: bool = False) -> dict[str, Any]:
    return {"name": name, "type": "numeric", "range": [lo, hi], "sensitive": sensitive}


def categorical_feature(name: str, vocab: list[str]) -> dict[str, Any]:
    return {"name": name, "type": "categorical", "vocab": vocab}


def source(owner: str, size: int, schema: list[dict], coefficients: list[float],
           bias: float = 0.0, sigma: float = 0.0, **extra: Any) -> dict[str, Any]:
    return {
        "owner": owner,
        "emission": {"mode": "batch", "size": size},
        "schema": schema,
        "coefficients": coefficients,
        "bias": bias,
        "noise_sigma": sigma,
        **extra,
    }


def scenario_b_dict(n_per_source: int = 200, sigma: float = 0.05,
                    seed: int = 42, **overrides: Any) -> dict[str, Any]:
    schema = [numeric_feature("cpu"), numeric_feature("mem"),
              categorical_feature("slice", ["embb", "urllc"])]
    coeffs = [1.5, -0.5, 0.3, -0.3]
    data: dict[str, Any] = {
        "scenario": {"kind": "B"},
        "seed": seed,
        "topology": {"nssmf": 1, "nfvo": 1, "mda_3gpp": 1, "mda_nfv": 1},
        "sources": [
            source("NSSMF#0", n_per_source, schema, coeffs, bias=0.2, sigma=sigma),
            source("NFVO#0", n_per_source, schema, coeffs, bias=0.2, sigma=sigma),
        ],
        "pipeline": {"scaling": "zscore",
                     "split": {"train": 0.6, "val": 0.2, "test": 0.2, "seed": 7}},
        "model": {"kind": "LinearSgd",
                  "hyperparams": {"learning_rate": 0.1, "epochs": 30, "batch_size": 16}},
        "deploy": {"targets": ["MdaSystem3GPP#0", "MdaSystemNFV#0"]},
    }
    data.update(overrides)
    return data


def build(data: dict[str, Any]) -> ScenarioConfig:
    return config_from_dict(data)


@pytest.fixture
def scenario_b_config() -> ScenarioConfig:
    return build(scenario_b_dict())
