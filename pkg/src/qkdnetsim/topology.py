"""Static network description and scenario configuration.

A scenario file is a YAML tree of sections (``nodes``, ``links``, ``policy``,
``faults``, ``consumers``) plus scalar run parameters, versioned with a
``format_version`` field. The exact grammar is documented in the README;
:func:`parse_scenario` and :func:`serialize_scenario` round-trip it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Optional

import yaml

from .orchestration import PolicyVariant, SwitchPolicy

FORMAT_VERSION = 1

DEFAULT_BLOCK_SIZE = 500_000
DEFAULT_REKEY_INTERVAL = 60.0
DEFAULT_KEY_SIZE = 32
DEFAULT_CHUNK_SIZE = 32
DEFAULT_ALIGNMENT_MEAN = 120.0
DEFAULT_ALIGNMENT_STD = 30.0
DEFAULT_RECONFIG_DELAY = 5.0
DEFAULT_SKIP_TIMEOUT = 60.0
DEFAULT_QBER_RHO = 0.9
DEFAULT_QBER_NOISE_STD = 0.002
DEFAULT_RATE_JITTER_SHAPE = 100.0
DEFAULT_DURATION = 86_400.0
DEFAULT_SEED = 1

# Reference point for the loss-informed rate suggestion: a 5 km / 0.2 dB/km
# link producing one 500 kB block per 360 s. Rate halves per +3 dB of loss.
REFERENCE_LOSS_DB = 1.0
REFERENCE_SIFTED_RATE = DEFAULT_BLOCK_SIZE / 360.0
HALVING_LOSS_DB = 3.0

_DURATION_SUFFIXES = {"s": 1.0, "m": 60.0, "h": 3600.0, "d": 86_400.0}


class ScenarioSyntaxError(ValueError):
    """Malformed scenario document (YAML-level), with position when known."""


class ScenarioValidationError(ValueError):
    """Well-formed document that violates a semantic rule; names the field."""


class NodeRole(Enum):
    ENDPOINT = "endpoint"
    INTERMEDIATE = "intermediate"


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    role: NodeRole
    device_count: int = 1
    switch_ports: int = 0


@dataclass(frozen=True)
class LinkSpec:
    link_id: str
    endpoints: tuple[str, str]
    fiber_length: float
    loss_coeff: float = 0.2
    nominal_sifted_rate: float = 0.0  # 0 means "derive from loss" at parse time
    qber_mean_x: float = 0.01
    qber_mean_z: float = 0.01
    qber_rho: float = DEFAULT_QBER_RHO
    qber_noise_std: float = DEFAULT_QBER_NOISE_STD
    rate_jitter_shape: float = DEFAULT_RATE_JITTER_SHAPE


@dataclass(frozen=True)
class ConsumerSpec:
    consumer_id: str
    link_id: str
    rekey_interval: float = DEFAULT_REKEY_INTERVAL
    key_size: int = DEFAULT_KEY_SIZE
    psk: bytes = b"\x00" * 32


@dataclass(frozen=True)
class MaintenanceWindow:
    link_id: str
    start: float
    end: float


@dataclass(frozen=True)
class AlignmentOverhead:
    """Base-alignment time added to the first block after every switch."""

    mean: float = DEFAULT_ALIGNMENT_MEAN
    std: float = DEFAULT_ALIGNMENT_STD


@dataclass(frozen=True)
class NetworkTopology:
    nodes: tuple[NodeSpec, ...]
    links: tuple[LinkSpec, ...]

    def node(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)

    def link(self, link_id: str) -> LinkSpec:
        for l in self.links:
            if l.link_id == link_id:
                return l
        raise KeyError(link_id)

    def incident_links(self, node_id: str) -> list[LinkSpec]:
        return [l for l in self.links if node_id in l.endpoints]

    def port_map(self) -> dict[str, dict[str, tuple[int, int]]]:
        """Per node: link_id -> (device index, switch port index).

        The mapping assigns links in document order; it is total and injective
        per node for every valid topology (validated at parse time). Nodes
        without a switch get port index 0 and one device per link.
        """
        out: dict[str, dict[str, tuple[int, int]]] = {}
        for node in self.nodes:
            assigned: dict[str, tuple[int, int]] = {}
            for i, link in enumerate(self.incident_links(node.node_id)):
                if node.switch_ports > 0:
                    assigned[link.link_id] = (0, i)
                else:
                    assigned[link.link_id] = (i, 0)
            out[node.node_id] = assigned
        return out


@dataclass(frozen=True)
class Scenario:
    """Fully validated run configuration; immutable and shareable."""

    name: str
    topology: NetworkTopology
    policy_config: dict[str, SwitchPolicy]
    schedules: dict[str, tuple[str, ...]]
    block_size: int = DEFAULT_BLOCK_SIZE
    alignment_overhead: AlignmentOverhead = AlignmentOverhead()
    switch_reconfig_delay: float = DEFAULT_RECONFIG_DELAY
    maintenance_windows: tuple[MaintenanceWindow, ...] = ()
    controller_fault_time: Optional[float] = None
    consumers: tuple[ConsumerSpec, ...] = ()
    duration: float = DEFAULT_DURATION
    seed: int = DEFAULT_SEED
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def switch_nodes(self) -> list[str]:
        return [n.node_id for n in self.topology.nodes if n.switch_ports > 0]


def parse_duration(value: Any, where: str = "duration") -> float:
    """Seconds from a number or a string with an s/m/h/d suffix."""
    if isinstance(value, bool):
        raise ScenarioValidationError(f"{where} must be a duration, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        text = value.strip()
        suffix = text[-1:].lower()
        if suffix in _DURATION_SUFFIXES:
            body = text[:-1]
        else:
            suffix, body = "s", text
        try:
            return float(body) * _DURATION_SUFFIXES[suffix]
        except ValueError:
            raise ScenarioValidationError(f"{where}: cannot parse duration {value!r}") from None
    raise ScenarioValidationError(f"{where}: cannot parse duration {value!r}")


def suggested_sifted_rate(fiber_length: float, loss_coeff: float) -> float:
    """Default sifted rate for a link, halving per +3 dB over the reference loss."""
    loss_db = fiber_length * loss_coeff
    return REFERENCE_SIFTED_RATE * 2.0 ** (-(loss_db - REFERENCE_LOSS_DB) / HALVING_LOSS_DB)


def _require(mapping: dict, key: str, where: str) -> Any:
    if key not in mapping:
        raise ScenarioValidationError(f"{where}.{key} is required")
    return mapping[key]


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioValidationError(f"{where} must be a number")
    return float(value)


def _positive(value: Any, where: str) -> float:
    x = _number(value, where)
    if not x > 0:
        raise ScenarioValidationError(f"{where} must be > 0")
    return x


def _non_negative(value: Any, where: str) -> float:
    x = _number(value, where)
    if x < 0:
        raise ScenarioValidationError(f"{where} must be >= 0")
    return x


def _mapping(value: Any, where: str) -> dict:
    if not isinstance(value, dict):
        raise ScenarioValidationError(f"{where} must be a mapping")
    return value


def _sequence(value: Any, where: str) -> list:
    if not isinstance(value, list):
        raise ScenarioValidationError(f"{where} must be a list")
    return value


def _parse_node(raw: Any, where: str) -> NodeSpec:
    m = _mapping(raw, where)
    node_id = str(_require(m, "id", where))
    role_text = str(_require(m, "role", where))
    try:
        role = NodeRole(role_text)
    except ValueError:
        raise ScenarioValidationError(
            f"{where}.role must be 'endpoint' or 'intermediate', got {role_text!r}"
        ) from None
    device_count = int(m.get("device_count", 1))
    default_ports = 2 if role is NodeRole.INTERMEDIATE else 0
    switch_ports = int(m.get("switch_ports", default_ports))
    if device_count < 1:
        raise ScenarioValidationError(f"{where}.device_count must be >= 1")
    if role is NodeRole.INTERMEDIATE and switch_ports < 2:
        raise ScenarioValidationError(f"{where}.switch_ports must be >= 2 for intermediate nodes")
    if switch_ports < 0:
        raise ScenarioValidationError(f"{where}.switch_ports must be >= 0")
    return NodeSpec(node_id, role, device_count, switch_ports)


def _parse_link(raw: Any, where: str) -> LinkSpec:
    m = _mapping(raw, where)
    link_id = str(_require(m, "id", where))
    ends = _sequence(_require(m, "endpoints", where), f"{where}.endpoints")
    if len(ends) != 2:
        raise ScenarioValidationError(f"{where}.endpoints must name exactly two nodes")
    fiber_length = _positive(_require(m, "fiber_length", where), f"{where}.fiber_length")
    loss_coeff = _non_negative(m.get("loss_coeff", 0.2), f"{where}.loss_coeff")
    if "nominal_sifted_rate" in m:
        rate = _positive(m["nominal_sifted_rate"], f"{where}.nominal_sifted_rate")
    else:
        rate = suggested_sifted_rate(fiber_length, loss_coeff)
    qx = _number(m.get("qber_mean_x", 0.01), f"{where}.qber_mean_x")
    qz = _number(m.get("qber_mean_z", 0.01), f"{where}.qber_mean_z")
    for name, q in (("qber_mean_x", qx), ("qber_mean_z", qz)):
        if not 0.0 <= q <= 0.5:
            raise ScenarioValidationError(f"{where}.{name} must be in [0, 0.5]")
    rho = _number(m.get("qber_rho", DEFAULT_QBER_RHO), f"{where}.qber_rho")
    if not 0.0 <= rho < 1.0:
        raise ScenarioValidationError(f"{where}.qber_rho must be in [0, 1)")
    noise = _non_negative(m.get("qber_noise_std", DEFAULT_QBER_NOISE_STD), f"{where}.qber_noise_std")
    shape = _positive(m.get("rate_jitter_shape", DEFAULT_RATE_JITTER_SHAPE), f"{where}.rate_jitter_shape")
    return LinkSpec(
        link_id=link_id,
        endpoints=(str(ends[0]), str(ends[1])),
        fiber_length=fiber_length,
        loss_coeff=loss_coeff,
        nominal_sifted_rate=rate,
        qber_mean_x=qx,
        qber_mean_z=qz,
        qber_rho=rho,
        qber_noise_std=noise,
        rate_jitter_shape=shape,
    )


def _parse_policy(raw: Any, where: str) -> tuple[SwitchPolicy, Optional[list[str]]]:
    m = _mapping(raw, where)
    variant_text = str(m.get("variant", "coordinated"))
    try:
        variant = PolicyVariant(variant_text)
    except ValueError:
        raise ScenarioValidationError(
            f"{where}.variant must be 'balancing' or 'coordinated', got {variant_text!r}"
        ) from None
    ratios = None
    if "ratios" in m:
        ratios = {str(k): _number(v, f"{where}.ratios[{k!r}]") for k, v in _mapping(m["ratios"], f"{where}.ratios").items()}
    n_blocks = int(m["n_blocks"]) if "n_blocks" in m else (2 if variant is PolicyVariant.COORDINATED_SWITCHING else None)
    skip_timeout = _positive(m.get("skip_timeout", DEFAULT_SKIP_TIMEOUT), f"{where}.skip_timeout")
    schedule = None
    if "schedule" in m:
        schedule = [str(x) for x in _sequence(m["schedule"], f"{where}.schedule")]
    return SwitchPolicy(variant=variant, ratios=ratios, n_blocks=n_blocks, skip_timeout=skip_timeout), schedule


def _validate_topology(topology: NetworkTopology) -> None:
    seen_nodes: set[str] = set()
    for i, node in enumerate(topology.nodes):
        if node.node_id in seen_nodes:
            raise ScenarioValidationError(f"nodes[{i}].id {node.node_id!r} is duplicated")
        seen_nodes.add(node.node_id)
    seen_links: set[str] = set()
    for i, link in enumerate(topology.links):
        where = f"links[{i}] ({link.link_id})"
        if link.link_id in seen_links:
            raise ScenarioValidationError(f"links[{i}].id {link.link_id!r} is duplicated")
        seen_links.add(link.link_id)
        a, b = link.endpoints
        if a == b:
            raise ScenarioValidationError(f"{where}.endpoints must be distinct")
        for end in (a, b):
            if end not in seen_nodes:
                raise ScenarioValidationError(f"{where}.endpoints names unknown node {end!r}")
    # Device/port capacity: the link->(device, port) mapping must be total and
    # injective at every node.
    for node in topology.nodes:
        incident = topology.incident_links(node.node_id)
        capacity = node.switch_ports if node.switch_ports > 0 else node.device_count
        if len(incident) > capacity:
            kind = "switch_ports" if node.switch_ports > 0 else "device_count"
            raise ScenarioValidationError(
                f"node {node.node_id!r}: {len(incident)} incident links exceed {kind}={capacity}"
            )


def _build_scenario(doc: dict) -> Scenario:
    version = doc.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ScenarioValidationError(f"format_version {version!r} is not supported (expected {FORMAT_VERSION})")

    name = str(doc.get("name", "scenario"))
    nodes = tuple(
        _parse_node(raw, f"nodes[{i}]") for i, raw in enumerate(_sequence(_require(doc, "nodes", "document"), "nodes"))
    )
    links = tuple(
        _parse_link(raw, f"links[{i}]") for i, raw in enumerate(_sequence(_require(doc, "links", "document"), "links"))
    )
    topology = NetworkTopology(nodes=nodes, links=links)
    _validate_topology(topology)
    link_ids = {l.link_id for l in links}

    block_size = int(doc.get("block_size", DEFAULT_BLOCK_SIZE))
    if block_size <= 0:
        raise ScenarioValidationError("block_size must be > 0")
    chunk_size = int(doc.get("chunk_size", DEFAULT_CHUNK_SIZE))
    if chunk_size <= 0:
        raise ScenarioValidationError("chunk_size must be > 0")
    duration = parse_duration(doc.get("duration", DEFAULT_DURATION), "duration")
    if duration < 0:
        raise ScenarioValidationError("duration must be >= 0")
    seed = int(doc.get("seed", DEFAULT_SEED))
    if not 0 <= seed < 2**64:
        raise ScenarioValidationError("seed must fit in 64 bits")

    align_raw = _mapping(doc.get("alignment_overhead", {}), "alignment_overhead")
    alignment = AlignmentOverhead(
        mean=_non_negative(align_raw.get("mean", DEFAULT_ALIGNMENT_MEAN), "alignment_overhead.mean"),
        std=_non_negative(align_raw.get("std", DEFAULT_ALIGNMENT_STD), "alignment_overhead.std"),
    )
    reconfig = _non_negative(doc.get("switch_reconfig_delay", DEFAULT_RECONFIG_DELAY), "switch_reconfig_delay")

    # Policies and schedules for switch nodes.
    switch_nodes = [n.node_id for n in nodes if n.switch_ports > 0]
    policy_raw = _mapping(doc.get("policy", {}), "policy")
    policies: dict[str, SwitchPolicy] = {}
    schedules: dict[str, tuple[str, ...]] = {}
    for node_id, raw in policy_raw.items():
        where = f"policy[{node_id!r}]"
        if node_id not in {n.node_id for n in nodes}:
            raise ScenarioValidationError(f"{where} names unknown node")
        if node_id not in switch_nodes:
            raise ScenarioValidationError(f"{where}: node has no optical switch")
        policy, schedule = _parse_policy(raw, where)
        incident_ids = [l.link_id for l in topology.incident_links(node_id)]
        if schedule is None:
            schedule = incident_ids
        else:
            if len(set(schedule)) != len(schedule) or not schedule:
                raise ScenarioValidationError(f"{where}.schedule must be a non-empty list without duplicates")
            for link_id in schedule:
                if link_id not in incident_ids:
                    raise ScenarioValidationError(f"{where}.schedule names non-incident link {link_id!r}")
        try:
            policy.validate(schedule, where)
        except ValueError as exc:
            raise ScenarioValidationError(str(exc)) from None
        policies[node_id] = policy
        schedules[node_id] = tuple(schedule)
    for node_id in switch_nodes:
        if node_id not in policies:
            schedule = [l.link_id for l in topology.incident_links(node_id)]
            policy = SwitchPolicy(variant=PolicyVariant.COORDINATED_SWITCHING, n_blocks=2)
            try:
                policy.validate(schedule, f"policy[{node_id!r}]")
            except ValueError as exc:
                raise ScenarioValidationError(str(exc)) from None
            policies[node_id] = policy
            schedules[node_id] = tuple(schedule)

    faults_raw = _mapping(doc.get("faults", {}), "faults")
    windows = []
    for i, raw in enumerate(_sequence(faults_raw.get("maintenance", []), "faults.maintenance")):
        where = f"faults.maintenance[{i}]"
        m = _mapping(raw, where)
        link_id = str(_require(m, "link", where))
        if link_id not in link_ids:
            raise ScenarioValidationError(f"{where}.link names unknown link {link_id!r}")
        start = parse_duration(_require(m, "start", where), f"{where}.start")
        end = parse_duration(_require(m, "end", where), f"{where}.end")
        if start < 0:
            raise ScenarioValidationError(f"{where}.start must be >= 0")
        if not start < end:
            raise ScenarioValidationError(
                f"{where}: window on link {link_id!r} has start {start:g} >= end {end:g}"
            )
        windows.append(MaintenanceWindow(link_id, start, end))
    fault_time = faults_raw.get("controller_fault_time")
    if fault_time is not None:
        fault_time = parse_duration(fault_time, "faults.controller_fault_time")
        if fault_time < 0:
            raise ScenarioValidationError("faults.controller_fault_time must be >= 0")

    consumers = []
    seen_consumer_ids: set[str] = set()
    for i, raw in enumerate(_sequence(doc.get("consumers", []), "consumers")):
        where = f"consumers[{i}]"
        m = _mapping(raw, where)
        consumer_id = str(_require(m, "id", where))
        if consumer_id in seen_consumer_ids:
            raise ScenarioValidationError(f"{where}.id {consumer_id!r} is duplicated")
        seen_consumer_ids.add(consumer_id)
        link_id = str(_require(m, "link", where))
        if link_id not in link_ids:
            raise ScenarioValidationError(f"{where}.link names unknown link {link_id!r}")
        interval = _positive(m.get("rekey_interval", DEFAULT_REKEY_INTERVAL), f"{where}.rekey_interval")
        key_size = int(m.get("key_size", DEFAULT_KEY_SIZE))
        if key_size <= 0:
            raise ScenarioValidationError(f"{where}.key_size must be > 0")
        psk_hex = str(m.get("psk", "00" * 32))
        try:
            psk = bytes.fromhex(psk_hex)
        except ValueError:
            raise ScenarioValidationError(f"{where}.psk must be a hex string") from None
        consumers.append(ConsumerSpec(consumer_id, link_id, interval, key_size, psk))

    return Scenario(
        name=name,
        topology=topology,
        policy_config=policies,
        schedules=schedules,
        block_size=block_size,
        alignment_overhead=alignment,
        switch_reconfig_delay=reconfig,
        maintenance_windows=tuple(windows),
        controller_fault_time=fault_time,
        consumers=tuple(consumers),
        duration=duration,
        seed=seed,
        chunk_size=chunk_size,
    )


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document.

    Raises ScenarioSyntaxError for malformed YAML (with line/column) and
    ScenarioValidationError for semantic problems, naming the field.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            raise ScenarioSyntaxError(
                f"syntax error at line {mark.line + 1}, column {mark.column + 1}: {exc}"
            ) from exc
        raise ScenarioSyntaxError(f"syntax error: {exc}") from exc
    if doc is None:
        raise ScenarioValidationError("document is empty")
    if not isinstance(doc, dict):
        raise ScenarioValidationError("document root must be a mapping")
    return _build_scenario(doc)


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def serialize_scenario(scenario: Scenario) -> str:
    """Canonical YAML for a scenario; parse_scenario round-trips it exactly."""
    doc: dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "name": scenario.name,
        "seed": scenario.seed,
        "duration": scenario.duration,
        "block_size": scenario.block_size,
        "chunk_size": scenario.chunk_size,
        "switch_reconfig_delay": scenario.switch_reconfig_delay,
        "alignment_overhead": {
            "mean": scenario.alignment_overhead.mean,
            "std": scenario.alignment_overhead.std,
        },
        "nodes": [
            {
                "id": n.node_id,
                "role": n.role.value,
                "device_count": n.device_count,
                "switch_ports": n.switch_ports,
            }
            for n in scenario.topology.nodes
        ],
        "links": [
            {
                "id": l.link_id,
                "endpoints": list(l.endpoints),
                "fiber_length": l.fiber_length,
                "loss_coeff": l.loss_coeff,
                "nominal_sifted_rate": l.nominal_sifted_rate,
                "qber_mean_x": l.qber_mean_x,
                "qber_mean_z": l.qber_mean_z,
                "qber_rho": l.qber_rho,
                "qber_noise_std": l.qber_noise_std,
                "rate_jitter_shape": l.rate_jitter_shape,
            }
            for l in scenario.topology.links
        ],
    }
    policy_doc: dict[str, Any] = {}
    for node_id, policy in scenario.policy_config.items():
        entry: dict[str, Any] = {
            "variant": policy.variant.value,
            "skip_timeout": policy.skip_timeout,
            "schedule": list(scenario.schedules[node_id]),
        }
        if policy.variant is PolicyVariant.KEY_BALANCING:
            entry["ratios"] = dict(policy.ratios or {})
        else:
            entry["n_blocks"] = policy.n_blocks
        policy_doc[node_id] = entry
    if policy_doc:
        doc["policy"] = policy_doc
    faults: dict[str, Any] = {}
    if scenario.maintenance_windows:
        faults["maintenance"] = [
            {"link": w.link_id, "start": w.start, "end": w.end} for w in scenario.maintenance_windows
        ]
    if scenario.controller_fault_time is not None:
        faults["controller_fault_time"] = scenario.controller_fault_time
    if faults:
        doc["faults"] = faults
    if scenario.consumers:
        doc["consumers"] = [
            {
                "id": c.consumer_id,
                "link": c.link_id,
                "rekey_interval": c.rekey_interval,
                "key_size": c.key_size,
                "psk": c.psk.hex(),
            }
            for c in scenario.consumers
        ]
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=False)


def venqci_preset(seed: int = 42, duration: float = 60 * 86_400.0) -> Scenario:
    """The four-node production network: VSIX - CavPD - CavVE - VEGA.

    Three links of 5, 20 and 5 km; the two toll-booth nodes host optical
    switches and run coordinated switching with two blocks per stint. Sifted
    rates are calibrated so a 500 kB block accumulates in about six minutes.
    One rekeying consumer draws 32 B per minute from each link.
    """
    rate = 500_000 / 360.0
    nodes = (
        NodeSpec("VSIX", NodeRole.ENDPOINT),
        NodeSpec("CavPD", NodeRole.INTERMEDIATE, switch_ports=2),
        NodeSpec("CavVE", NodeRole.INTERMEDIATE, switch_ports=2),
        NodeSpec("VEGA", NodeRole.ENDPOINT),
    )
    links = (
        LinkSpec("VSIX-CavPD", ("VSIX", "CavPD"), fiber_length=5.0, nominal_sifted_rate=rate),
        LinkSpec("CavPD-CavVE", ("CavPD", "CavVE"), fiber_length=20.0, nominal_sifted_rate=rate),
        LinkSpec("CavVE-VEGA", ("CavVE", "VEGA"), fiber_length=5.0, nominal_sifted_rate=rate),
    )
    policy = SwitchPolicy(variant=PolicyVariant.COORDINATED_SWITCHING, n_blocks=2, skip_timeout=DEFAULT_SKIP_TIMEOUT)
    # Outer links first so both sides of the network start producing at once;
    # the shared middle link is visited when the two switch agents meet.
    schedules = {
        "CavPD": ("VSIX-CavPD", "CavPD-CavVE"),
        "CavVE": ("CavVE-VEGA", "CavPD-CavVE"),
    }
    consumers = tuple(
        ConsumerSpec(f"macsec-{l.link_id}", l.link_id, psk=bytes.fromhex("ab" * 32)) for l in links
    )
    return Scenario(
        name="venqci",
        topology=NetworkTopology(nodes=nodes, links=links),
        policy_config={"CavPD": policy, "CavVE": replace(policy)},
        schedules=schedules,
        consumers=consumers,
        duration=duration,
        seed=seed,
    )
