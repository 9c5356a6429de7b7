"""Shared builders for scenario objects used across the test suite."""

from __future__ import annotations

import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

from qkdnetsim.orchestration import PolicyVariant, SwitchPolicy
from qkdnetsim.topology import (
    AlignmentOverhead,
    ConsumerSpec,
    LinkSpec,
    NetworkTopology,
    NodeRole,
    NodeSpec,
    Scenario,
)

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def make_spec(**overrides) -> LinkSpec:
    base = dict(
        link_id="A-B",
        endpoints=("A", "B"),
        fiber_length=5.0,
        loss_coeff=0.2,
        nominal_sifted_rate=500_000 / 360.0,
        qber_mean_x=0.01,
        qber_mean_z=0.01,
    )
    base.update(overrides)
    return LinkSpec(**base)


def make_scenario(alignment: AlignmentOverhead | None = None, **overrides) -> Scenario:
    spec = make_spec()
    topology = NetworkTopology(
        nodes=(NodeSpec("A", NodeRole.ENDPOINT), NodeSpec("B", NodeRole.ENDPOINT)),
        links=(spec,),
    )
    base = dict(
        name="unit",
        topology=topology,
        policy_config={},
        schedules={},
        alignment_overhead=alignment or AlignmentOverhead(mean=120.0, std=30.0),
        duration=3600.0,
        seed=1,
    )
    base.update(overrides)
    return Scenario(**base)


def balancing_scenario(
    ratio_a: float = 2.0,
    ratio_b: float = 1.0,
    duration: float = 86_400.0,
    seed: int = 5,
    consumers: tuple[ConsumerSpec, ...] = (),
) -> Scenario:
    """Three nodes in a line, one switch node balancing two equal-rate links."""
    rate = 500_000 / 360.0
    la = LinkSpec("I-A", ("I", "A"), fiber_length=5.0, nominal_sifted_rate=rate)
    lb = LinkSpec("I-B", ("I", "B"), fiber_length=5.0, nominal_sifted_rate=rate)
    topology = NetworkTopology(
        nodes=(
            NodeSpec("I", NodeRole.INTERMEDIATE, switch_ports=2),
            NodeSpec("A", NodeRole.ENDPOINT),
            NodeSpec("B", NodeRole.ENDPOINT),
        ),
        links=(la, lb),
    )
    policy = SwitchPolicy(
        variant=PolicyVariant.KEY_BALANCING,
        ratios={"I-A": ratio_a, "I-B": ratio_b},
        skip_timeout=60.0,
    )
    return Scenario(
        name="balancing",
        topology=topology,
        policy_config={"I": policy},
        schedules={"I": ("I-A", "I-B")},
        consumers=consumers,
        duration=duration,
        seed=seed,
    )
