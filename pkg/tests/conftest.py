"""Shared fixtures: a small fabric that keeps unit-test runs fast."""

import pytest

from greendc import config


def small_scenario(**overrides) -> dict:
    """A pocket-size three-tier scenario document (8 servers, 1 pod)."""
    data = {
        "label": "small",
        "architecture": {
            "kind": "three_tier",
            "core_count": 2,
            "agg_count": 2,
            "access_count": 4,
            "servers_per_access": 2,
        },
        "workload": {"class_mix": [0.0, 0.0, 1.0], "deadline_slack": 2.5,
                     "mean_compute": 0.1},
        "policy": {"scheme": "none"},
        "target_load": 0.3,
        "horizon_s": 8.0,
        "seed": 11,
    }
    data.update(overrides)
    return data


@pytest.fixture
def small_cfg():
    return config.from_dict(small_scenario())


@pytest.fixture
def make_cfg():
    def _make(**overrides):
        return config.from_dict(small_scenario(**overrides))
    return _make
