"""Scenario grammar, validation, round-trips, and the venqci preset."""

from __future__ import annotations

import pytest

from qkdnetsim import topology
from qkdnetsim.orchestration import PolicyVariant
from qkdnetsim.topology import (
    ScenarioSyntaxError,
    ScenarioValidationError,
    parse_duration,
    parse_scenario,
    serialize_scenario,
    suggested_sifted_rate,
    venqci_preset,
)

MINIMAL = """
nodes:
  - {id: A, role: endpoint}
  - {id: B, role: endpoint}
links:
  - {id: A-B, endpoints: [A, B], fiber_length: 5.0, nominal_sifted_rate: 1389.0}
"""


def test_minimal_document_defaults():
    sc = parse_scenario(MINIMAL)
    assert len(sc.topology.links) == 1
    assert sc.block_size == 500_000
    assert sc.chunk_size == 32
    assert sc.duration == 86_400.0
    assert sc.alignment_overhead.mean == 120.0
    assert sc.switch_reconfig_delay == 5.0
    assert sc.consumers == ()


def test_defaults_equal_explicit():
    explicit = """
format_version: 1
name: scenario
seed: 1
duration: 86400
block_size: 500000
chunk_size: 32
switch_reconfig_delay: 5.0
alignment_overhead: {mean: 120.0, std: 30.0}
nodes:
  - {id: A, role: endpoint, device_count: 1, switch_ports: 0}
  - {id: B, role: endpoint, device_count: 1, switch_ports: 0}
links:
  - {id: A-B, endpoints: [A, B], fiber_length: 5.0, loss_coeff: 0.2,
     nominal_sifted_rate: 1389.0, qber_mean_x: 0.01, qber_mean_z: 0.01,
     qber_rho: 0.9, qber_noise_std: 0.002, rate_jitter_shape: 100.0}
consumers: []
"""
    assert parse_scenario(MINIMAL) == parse_scenario(explicit)


def test_inverted_maintenance_window_names_field():
    doc = MINIMAL + """
faults:
  maintenance:
    - {link: A-B, start: 100, end: 50}
"""
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(doc)
    assert "A-B" in str(err.value) and "start" in str(err.value)


def test_dangling_link_endpoint():
    doc = """
nodes:
  - {id: A, role: endpoint}
  - {id: B, role: endpoint}
links:
  - {id: A-C, endpoints: [A, C], fiber_length: 5.0}
"""
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(doc)
    assert "C" in str(err.value)


def test_negative_rate_rejected():
    doc = MINIMAL.replace("nominal_sifted_rate: 1389.0", "nominal_sifted_rate: -5")
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(doc)
    assert "nominal_sifted_rate" in str(err.value)


def test_syntax_error_reports_position():
    with pytest.raises(ScenarioSyntaxError) as err:
        parse_scenario("nodes:\n  - {id: A, role: endpoint\n")
    assert "line" in str(err.value)


def test_unknown_format_version():
    with pytest.raises(ScenarioValidationError):
        parse_scenario("format_version: 99\n" + MINIMAL)


def test_policy_on_non_switch_node():
    doc = MINIMAL + """
policy:
  A: {variant: coordinated, n_blocks: 2}
"""
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(doc)
    assert "switch" in str(err.value)


def test_balancing_ratio_must_cover_schedule():
    doc = """
nodes:
  - {id: I, role: intermediate, switch_ports: 2}
  - {id: A, role: endpoint}
  - {id: B, role: endpoint}
links:
  - {id: I-A, endpoints: [I, A], fiber_length: 5.0}
  - {id: I-B, endpoints: [I, B], fiber_length: 5.0}
policy:
  I: {variant: balancing, ratios: {I-A: 2}}
"""
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(doc)
    assert "I-B" in str(err.value)


def test_capacity_validation():
    doc = """
nodes:
  - {id: A, role: endpoint, device_count: 1}
  - {id: B, role: endpoint}
  - {id: C, role: endpoint}
links:
  - {id: A-B, endpoints: [A, B], fiber_length: 5.0}
  - {id: A-C, endpoints: [A, C], fiber_length: 5.0}
"""
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(doc)
    assert "device_count" in str(err.value)


def test_port_map_total_and_injective():
    sc = venqci_preset()
    port_map = sc.topology.port_map()
    for node in sc.topology.nodes:
        assigned = port_map[node.node_id]
        incident = sc.topology.incident_links(node.node_id)
        assert set(assigned) == {l.link_id for l in incident}  # total
        assert len(set(assigned.values())) == len(assigned)  # injective


def test_round_trip_identity_minimal():
    sc = parse_scenario(MINIMAL)
    assert parse_scenario(serialize_scenario(sc)) == sc


def test_round_trip_identity_with_everything():
    doc = """
name: kitchen-sink
seed: 987654321
duration: 2d
block_size: 250000
nodes:
  - {id: I, role: intermediate, switch_ports: 3}
  - {id: A, role: endpoint}
  - {id: B, role: endpoint}
  - {id: C, role: endpoint}
links:
  - {id: I-A, endpoints: [I, A], fiber_length: 5.0}
  - {id: I-B, endpoints: [I, B], fiber_length: 12.5, qber_mean_x: 0.02}
  - {id: I-C, endpoints: [I, C], fiber_length: 8.0}
policy:
  I:
    variant: balancing
    ratios: {I-A: 2.5, I-B: 1.0, I-C: 1.0}
    skip_timeout: 30.0
    schedule: [I-B, I-A, I-C]
faults:
  maintenance:
    - {link: I-A, start: 100, end: 200}
  controller_fault_time: 3600
consumers:
  - {id: c1, link: I-A, rekey_interval: 30, key_size: 16, psk: "0badc0de"}
"""
    sc = parse_scenario(doc)
    assert sc.schedules["I"] == ("I-B", "I-A", "I-C")
    assert sc.policy_config["I"].variant is PolicyVariant.KEY_BALANCING
    assert sc.duration == 2 * 86_400.0
    assert sc.consumers[0].psk == bytes.fromhex("0badc0de")
    assert parse_scenario(serialize_scenario(sc)) == sc


def test_venqci_preset_link_lengths():
    sc = venqci_preset()
    assert [l.fiber_length for l in sc.topology.links] == [5.0, 20.0, 5.0]
    assert [l.link_id for l in sc.topology.links] == ["VSIX-CavPD", "CavPD-CavVE", "CavVE-VEGA"]


def test_venqci_preset_block_cadence():
    sc = venqci_preset()
    for link in sc.topology.links:
        assert sc.block_size / link.nominal_sifted_rate == pytest.approx(360.0, rel=0.01)


def test_venqci_preset_round_trip():
    sc = venqci_preset()
    assert parse_scenario(serialize_scenario(sc)) == sc


def test_venqci_switch_nodes():
    sc = venqci_preset()
    assert sc.switch_nodes() == ["CavPD", "CavVE"]
    assert set(sc.policy_config) == {"CavPD", "CavVE"}
    for consumer in sc.consumers:
        assert consumer.key_size == 32
        assert consumer.rekey_interval == 60.0


def test_rate_suggestion_halves_per_3db():
    ref = suggested_sifted_rate(5.0, 0.2)  # 1 dB reference
    assert ref == pytest.approx(500_000 / 360.0)
    assert suggested_sifted_rate(20.0, 0.2) == pytest.approx(ref / 2.0)  # +3 dB
    assert suggested_sifted_rate(35.0, 0.2) == pytest.approx(ref / 4.0)  # +6 dB


def test_rate_default_uses_suggestion():
    doc = MINIMAL.replace(", nominal_sifted_rate: 1389.0", "")
    sc = parse_scenario(doc)
    assert sc.topology.links[0].nominal_sifted_rate == pytest.approx(suggested_sifted_rate(5.0, 0.2))


def test_parse_duration_suffixes():
    assert parse_duration("90s") == 90.0
    assert parse_duration("6 m".replace(" ", "")) == 360.0
    assert parse_duration("2h") == 7200.0
    assert parse_duration("60d") == 5_184_000.0
    assert parse_duration(42) == 42.0
    with pytest.raises(ScenarioValidationError):
        parse_duration("abc")


def test_seed_bounds():
    with pytest.raises(ScenarioValidationError):
        parse_scenario("seed: -1\n" + MINIMAL)
    parse_scenario(f"seed: {2**63}\n" + MINIMAL)  # fits in 64 bits


def test_intermediate_needs_two_ports():
    doc = """
nodes:
  - {id: I, role: intermediate, switch_ports: 1}
  - {id: A, role: endpoint}
links:
  - {id: I-A, endpoints: [I, A], fiber_length: 5.0}
"""
    with pytest.raises(ScenarioValidationError):
        parse_scenario(doc)


def test_duplicate_ids_rejected():
    doc = """
nodes:
  - {id: A, role: endpoint}
  - {id: A, role: endpoint}
links: []
"""
    with pytest.raises(ScenarioValidationError):
        parse_scenario(doc)
