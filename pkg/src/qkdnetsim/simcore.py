"""Deterministic discrete-event engine.

Time is integer microseconds internally (reported in seconds) and the queue
is totally ordered by (time, schedule sequence number), so equal-timestamp
events always execute in the order they were scheduled. Every stochastic
entity draws from its own seed-derived Philox stream (see qkdnetsim.rng);
equal (scenario, seed) pairs therefore produce bit-identical results.

The recorded trace holds network-observable events only: completed blocks,
switch events, rekeys, maintenance boundaries, alignment probes and config
pushes. Controller death is engine metadata, not a trace entry, because a
faulted controller is indistinguishable from a healthy idle one to the
network itself.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from . import kms, linkmodel
from .linkmodel import US, BlockRecord, LinkState
from .orchestration import (
    AgentState,
    Phase,
    PolicyVariant,
    SwitchCause,
    SwitchEvent,
    SwitchPolicy,
    next_probe_candidate,
    select_next_link,
    should_switch,
    skip_target,
)
from .topology import Scenario, ScenarioValidationError

RESULT_FORMAT_VERSION = 1


class EventKind(Enum):
    BLOCK_COMPLETE = "block_complete"
    SWITCH_COMMIT = "switch_commit"
    CONSUMER_TICK = "consumer_tick"
    MAINTENANCE_START = "maintenance_start"
    MAINTENANCE_END = "maintenance_end"
    CONTROLLER_FAULT = "controller_fault"
    PROBE_RETRY = "probe_retry"
    CONTROL_ACTION = "control_action"


@dataclass(frozen=True)
class TraceEntry:
    """One observable event: (time, record kind, index into that record list)."""

    time_us: int
    kind: str  # block | switch | rekey | maint_start | maint_end | probe | push
    index: int

    @property
    def time(self) -> float:
        return self.time_us / US


@dataclass(frozen=True)
class MaintenanceRecord:
    time_us: int
    link_id: str
    boundary: str  # "start" | "end"


@dataclass(frozen=True)
class ProbeRecord:
    """A blocked attempt to bring up a link (no peer response on the fiber)."""

    time_us: int
    node_id: str
    link_id: str


@dataclass(frozen=True)
class PushRecord:
    time_us: int
    epoch: Optional[int]
    suppressed: bool = False
    node_id: Optional[str] = None


@dataclass(frozen=True)
class StatusReport:
    time_us: int
    agent: str
    node_id: str
    phase: str
    active_link: Optional[str]
    desired_link: Optional[str]
    config_epoch: int
    buffers: dict[str, int]


@dataclass(frozen=True)
class ControlAction:
    """One scripted controller verb (set-policy / force-switch / get-status)."""

    at: float
    verb: str
    node_id: Optional[str] = None
    policy: Optional[SwitchPolicy] = None
    schedule: Optional[tuple[str, ...]] = None
    to_link: Optional[str] = None


@dataclass
class RunResult:
    """Everything one run produced; serializable for regression snapshots."""

    scenario_name: str
    seed: int
    duration: float
    events: list[TraceEntry] = field(default_factory=list)
    blocks: list[BlockRecord] = field(default_factory=list)
    switches: list[SwitchEvent] = field(default_factory=list)
    rekeys: list[kms.RekeyEvent] = field(default_factory=list)
    maintenance: list[MaintenanceRecord] = field(default_factory=list)
    probes: list[ProbeRecord] = field(default_factory=list)
    pushes: list[PushRecord] = field(default_factory=list)
    status_reports: list[StatusReport] = field(default_factory=list)
    final_buffers: dict[str, int] = field(default_factory=dict)
    controller_faulted_at: Optional[float] = None
    # delivered key material hex by key id; populated only when the run was
    # started with dump_keys=True (debug aid, excluded from serialization)
    key_dump: dict[str, str] = field(default_factory=dict)
    format_version: int = RESULT_FORMAT_VERSION

    def _payload(self, observable_only: bool) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "format_version": self.format_version,
            "scenario": self.scenario_name,
            "seed": self.seed,
            "duration": self.duration,
            "trace": [[e.time_us, e.kind, e.index] for e in self.events],
            "blocks": [
                [b.link_id, b.seq, b.start_us, b.end_us, b.sifted_bytes, b.qber_x, b.qber_z, b.secret_bytes, b.first_after_switch]
                for b in self.blocks
            ],
            "switches": [
                [s.time, s.node_id, s.from_link, s.to_link, s.cause.value, s.blocks_on_from_link]
                for s in self.switches
            ],
            "rekeys": [[r.time_us, r.consumer_id, r.link_id, r.source, r.key_id] for r in self.rekeys],
            "maintenance": [[m.time_us, m.link_id, m.boundary] for m in self.maintenance],
            "probes": [[p.time_us, p.node_id, p.link_id] for p in self.probes],
            "pushes": [[p.time_us, p.epoch, p.suppressed, p.node_id] for p in self.pushes],
            "final_buffers": self.final_buffers,
        }
        if not observable_only:
            doc["status_reports"] = [
                [s.time_us, s.agent, s.node_id, s.phase, s.active_link, s.desired_link, s.config_epoch, s.buffers]
                for s in self.status_reports
            ]
            doc["controller_faulted_at"] = self.controller_faulted_at
        return doc

    def to_json_bytes(self) -> bytes:
        """Canonical full serialization (versioned; see README for the schema)."""
        return json.dumps(self._payload(observable_only=False), separators=(",", ":")).encode()

    def trace_bytes(self) -> bytes:
        """Network-observable behavior only; excludes controller metadata."""
        return json.dumps(self._payload(observable_only=True), separators=(",", ":")).encode()


@dataclass
class _LinkRt:
    spec: Any
    state: LinkState
    active: bool = False
    epoch: int = 0
    maintenance: bool = False


class _Engine:
    def __init__(self, scenario: Scenario, debug: bool, control: list[ControlAction], dump_keys: bool = False):
        self.sc = scenario
        self.debug = debug
        self.control = control
        self.dump_keys = dump_keys
        self.now_us = 0
        self.duration_us = round(scenario.duration * US)
        self.queue: list[tuple[int, int, EventKind, tuple]] = []
        self.seq = 0
        self.result = RunResult(scenario.name, scenario.seed, scenario.duration)
        self.controller_faulted = False

        topo = scenario.topology
        self.link_indices = {l.link_id: i for i, l in enumerate(topo.links)}
        self.links: dict[str, _LinkRt] = {
            l.link_id: _LinkRt(spec=l, state=LinkState.create(scenario.seed, l)) for l in topo.links
        }
        self.stores = {
            n.node_id: kms.KeyStore(n.node_id, scenario.seed, scenario.chunk_size, self.link_indices)
            for n in topo.nodes
        }

        # One agent per device slot: switch nodes multiplex one device over
        # their schedule; other nodes get one always-available slot per link.
        self.agents: dict[str, AgentState] = {}
        self.slot_of: dict[tuple[str, str], str] = {}  # (node, link) -> agent key
        switch_nodes = set(scenario.switch_nodes())
        for node in topo.nodes:
            if node.node_id in switch_nodes:
                key = node.node_id
                self.agents[key] = AgentState(
                    node_id=node.node_id,
                    schedule=list(scenario.schedules[node.node_id]),
                    policy=scenario.policy_config[node.node_id],
                    initiator=True,
                )
                for link in topo.incident_links(node.node_id):
                    self.slot_of[(node.node_id, link.link_id)] = key
            else:
                for link in topo.incident_links(node.node_id):
                    key = f"{node.node_id}#{link.link_id}"
                    # Drives the link only when no switch node is attached to it.
                    drives = (
                        link.endpoints[0] == node.node_id
                        and link.endpoints[0] not in switch_nodes
                        and link.endpoints[1] not in switch_nodes
                    )
                    self.agents[key] = AgentState(
                        node_id=node.node_id,
                        schedule=[link.link_id],
                        policy=SwitchPolicy(variant=PolicyVariant.COORDINATED_SWITCHING, n_blocks=1),
                        initiator=drives,
                    )
                    self.slot_of[(node.node_id, link.link_id)] = key

        self.pending_cause: dict[str, SwitchCause] = {}
        self.preemitted: set[str] = set()
        self.committed: dict[str, str] = {}  # agent key -> link with a scheduled commit

    # -- plumbing -----------------------------------------------------------

    def schedule(self, time_us: int, kind: EventKind, payload: tuple) -> None:
        self.seq += 1
        heapq.heappush(self.queue, (time_us, self.seq, kind, payload))

    def _trace(self, kind: str, index: int) -> None:
        self.result.events.append(TraceEntry(self.now_us, kind, index))

    def side_agents(self, link_id: str) -> list[AgentState]:
        spec = self.links[link_id].spec
        return [self.agents[self.slot_of[(n, link_id)]] for n in spec.endpoints]

    def agent_key(self, agent: AgentState) -> str:
        if agent.node_id in self.agents and self.agents[agent.node_id] is agent:
            return agent.node_id
        return f"{agent.node_id}#{agent.schedule[0]}"

    def skip_timeout_us(self, agent: AgentState) -> int:
        return round(agent.policy.skip_timeout * US)

    def buffers_view(self, agent: AgentState) -> dict[str, int]:
        return self.stores[agent.node_id].buffered_view(agent.schedule)

    # -- switching ----------------------------------------------------------

    def _peer_agent(self, link_id: str, agent: AgentState) -> AgentState:
        a, b = self.links[link_id].spec.endpoints
        other = b if agent.node_id == a else a
        return self.agents[self.slot_of[(other, link_id)]]

    def _willing(self, peer: AgentState, link_id: str) -> bool:
        key = self.agent_key(peer)
        if peer.active_link is not None or key in self.committed:
            return False
        if peer.desired_link is None or peer.desired_link == link_id:
            return True
        return False

    def _record_probe(self, node_id: str, link_id: str) -> None:
        self.result.probes.append(ProbeRecord(self.now_us, node_id, link_id))
        self._trace("probe", len(self.result.probes) - 1)

    def begin_switch_attempt(self, agent: AgentState, link_id: str, cause: SwitchCause) -> None:
        """Point the agent's device at a link and start the handshake."""
        key = self.agent_key(agent)
        if key in self.committed:
            return  # already recruited into a scheduled commit
        agent.desired_link = link_id
        self.pending_cause[key] = cause
        lr = self.links[link_id]
        if lr.maintenance:
            # Dark fiber: the probe gets no response; skip after the timeout.
            agent.phase = Phase.NEGOTIATING
            self._record_probe(agent.node_id, link_id)
            self.schedule(self.now_us + self.skip_timeout_us(agent), EventKind.PROBE_RETRY, (key, link_id))
            return
        peer = self._peer_agent(link_id, agent)
        if self._willing(peer, link_id):
            self._agree(agent, peer, link_id)
            return
        agent.phase = Phase.WAITING_PEER
        # Mutual wait on two different links between the same pair would
        # deadlock; the lower node id wins and both adopt its target.
        peer_key = self.agent_key(peer)
        if (
            peer.phase is Phase.WAITING_PEER
            and peer.desired_link is not None
            and peer.desired_link != link_id
            and peer_key not in self.committed
            and self._peer_agent(peer.desired_link, peer) is agent
        ):
            winner_link = link_id if agent.node_id < peer.node_id else peer.desired_link
            initiator, other = (agent, peer) if agent.node_id < peer.node_id else (peer, agent)
            self._agree(initiator, other, winner_link)

    def _agree(self, initiator: AgentState, peer: AgentState, link_id: str) -> None:
        commit_us = self.now_us + round(self.sc.switch_reconfig_delay * US)
        cause = self.pending_cause.get(self.agent_key(initiator), SwitchCause.POLICY)
        parties = []
        for who in (initiator, peer):
            key = self.agent_key(who)
            who.phase = Phase.NEGOTIATING
            who.desired_link = link_id
            self.committed[key] = link_id
            self.pending_cause.setdefault(key, cause)
            parties.append(key)
        self.schedule(commit_us, EventKind.SWITCH_COMMIT, (link_id, tuple(parties)))

    def _emit_switch(self, agent: AgentState, from_link: Optional[str], to_link: str, cause: SwitchCause) -> None:
        event = SwitchEvent(
            time=self.now_us / US,
            node_id=agent.node_id,
            from_link=from_link,
            to_link=to_link,
            cause=cause,
            blocks_on_from_link=agent.blocks_since_event,
        )
        agent.blocks_since_event = 0
        self.result.switches.append(event)
        self._trace("switch", len(self.result.switches) - 1)

    def _start_block(self, link_id: str, first: bool) -> None:
        lr = self.links[link_id]
        rec = linkmodel.next_block(lr.state, lr.spec, self.sc, first, self.now_us)
        self.schedule(rec.end_us, EventKind.BLOCK_COMPLETE, (link_id, lr.epoch, rec))

    def _deactivate(self, link_id: str) -> None:
        """Take a link out of production; side agents keep their own follow-up."""
        lr = self.links[link_id]
        lr.active = False
        lr.epoch += 1
        for agent in self.side_agents(link_id):
            if agent.active_link == link_id:
                agent.active_link = None
                agent.last_production_link = link_id

    def on_switch_commit(self, link_id: str, parties: tuple[str, ...]) -> None:
        for key in parties:
            self.committed.pop(key, None)
        lr = self.links[link_id]
        if lr.maintenance:
            # The window opened during reconfiguration; fall back to probing.
            for key in parties:
                agent = self.agents[key]
                if agent.initiator:
                    agent.phase = Phase.NEGOTIATING
                    agent.desired_link = link_id
                    self._record_probe(agent.node_id, link_id)
                    self.schedule(self.now_us + self.skip_timeout_us(agent), EventKind.PROBE_RETRY, (key, link_id))
                else:
                    agent.phase = Phase.IDLE
                    agent.desired_link = None
                    self.pending_cause.pop(key, None)
                    self.preemitted.discard(key)
            return
        for key in parties:
            agent = self.agents[key]
            cause = self.pending_cause.pop(key, SwitchCause.POLICY)
            if key in self.preemitted:
                self.preemitted.discard(key)  # skip event already in the trace
            elif agent.last_production_link != link_id:
                self._emit_switch(agent, agent.last_production_link, link_id, cause)
            agent.active_link = link_id
            agent.phase = Phase.ALIGNING
            agent.desired_link = None
            agent.blocks_since_switch = 0
        lr.active = True
        lr.epoch += 1
        self._start_block(link_id, first=True)

    # -- event handlers -----------------------------------------------------

    def on_block_complete(self, link_id: str, epoch: int, rec: BlockRecord) -> None:
        lr = self.links[link_id]
        if not lr.active or epoch != lr.epoch:
            return  # aborted mid-flight (maintenance or forced reassignment)
        self.result.blocks.append(rec)
        self._trace("block", len(self.result.blocks) - 1)
        a, b = lr.spec.endpoints
        kms.deposit_block(self.stores[a], self.stores[b], rec)
        sides = self.side_agents(link_id)
        for agent in sides:
            agent.phase = Phase.PRODUCING
            agent.blocks_since_switch += 1
            agent.blocks_since_event += 1

        # Policy evaluation happens at block boundaries, with targets chosen
        # before anybody releases the link (coordinated rotation needs the
        # still-active link).
        leavers: list[tuple[AgentState, str]] = []
        stayers: list[AgentState] = []
        for agent in sides:
            if not agent.initiator:
                continue
            if should_switch(agent, agent.blocks_since_switch, self.buffers_view(agent)):
                target = select_next_link(agent, self.buffers_view(agent))
                if target != link_id:
                    leavers.append((agent, target))
                    continue
            stayers.append(agent)
        if not leavers:
            self._start_block(link_id, first=False)
            return
        self._deactivate(link_id)
        # Leavers bid for their new links first, so a stayer's re-proposal for
        # this link cannot capture a peer that has already moved on.
        for agent, target in leavers:
            self.begin_switch_attempt(agent, target, SwitchCause.POLICY)
        for agent in stayers:
            # The peer left; keep bidding for the same link until it comes
            # back (or our own policy moves us elsewhere later).
            if agent.active_link is None and self.agent_key(agent) not in self.committed:
                self.begin_switch_attempt(agent, link_id, SwitchCause.POLICY)
        for agent in sides:
            if not agent.initiator and agent.active_link is None:
                agent.phase = Phase.IDLE
                agent.desired_link = None

    def on_probe_retry(self, key: str, link_id: str) -> None:
        agent = self.agents[key]
        if agent.desired_link != link_id or agent.phase is not Phase.NEGOTIATING or key in self.committed:
            return  # superseded by a later decision
        lr = self.links[link_id]
        if not lr.maintenance:
            cause = self.pending_cause.get(key, SwitchCause.POLICY)
            self.begin_switch_attempt(agent, link_id, cause)
            return
        maintained = {l for l, r in self.links.items() if r.maintenance}
        target = skip_target(agent, link_id, maintained)
        if target is not None:
            self._emit_switch(agent, link_id, target, SwitchCause.MAINTENANCE_SKIP)
            self.preemitted.add(key)
            self.begin_switch_attempt(agent, target, SwitchCause.MAINTENANCE_SKIP)
            return
        nxt = next_probe_candidate(agent, link_id)
        agent.desired_link = nxt
        self._record_probe(agent.node_id, nxt)
        self.schedule(self.now_us + self.skip_timeout_us(agent), EventKind.PROBE_RETRY, (key, nxt))

    def on_maintenance(self, link_id: str, boundary: str) -> None:
        lr = self.links[link_id]
        lr.maintenance = boundary == "start"
        self.result.maintenance.append(MaintenanceRecord(self.now_us, link_id, boundary))
        self._trace("maint_start" if lr.maintenance else "maint_end", len(self.result.maintenance) - 1)
        if boundary != "start":
            return
        was_active = lr.active
        if was_active:
            self._deactivate(link_id)
        for agent in self.side_agents(link_id):
            key = self.agent_key(agent)
            interrupted = was_active and agent.active_link is None and agent.last_production_link == link_id
            waiting_here = agent.phase is Phase.WAITING_PEER and agent.desired_link == link_id
            if not (interrupted or waiting_here):
                continue
            if agent.initiator:
                # Both an interrupted producer and a blocked proposer now face
                # dark fiber: probe it, then skip after the timeout.
                agent.phase = Phase.NEGOTIATING
                agent.desired_link = link_id
                self.pending_cause.setdefault(key, SwitchCause.POLICY)
                self._record_probe(agent.node_id, link_id)
                self.schedule(self.now_us + self.skip_timeout_us(agent), EventKind.PROBE_RETRY, (key, link_id))
            else:
                agent.phase = Phase.IDLE
                agent.desired_link = None
                self.pending_cause.pop(key, None)

    def on_consumer_tick(self, idx: int) -> None:
        consumer = self.sc.consumers[idx]
        a, b = self.links[consumer.link_id].spec.endpoints
        event = kms.consumer_tick(
            consumer.consumer_id, consumer.link_id, consumer.key_size, self.stores[a], self.stores[b], self.now_us
        )
        self.result.rekeys.append(event)
        self._trace("rekey", len(self.result.rekeys) - 1)
        if self.dump_keys and event.key_id is not None:
            self.result.key_dump[event.key_id] = self.stores[a].materialize(
                event.key_id, consumer.key_size
            ).hex()
        if self.debug:
            self.stores[a].check_conservation(consumer.link_id)
            self.stores[b].check_conservation(consumer.link_id)
        self.schedule(self.now_us + round(consumer.rekey_interval * US), EventKind.CONSUMER_TICK, (idx,))

    def on_controller_fault(self) -> None:
        self.controller_faulted = True
        self.result.controller_faulted_at = self.now_us / US

    def on_control_action(self, action: ControlAction) -> None:
        if action.verb == "get-status":
            keys = sorted(self.agents) if action.node_id is None else [
                k for k in sorted(self.agents) if self.agents[k].node_id == action.node_id
            ]
            for key in keys:
                agent = self.agents[key]
                self.result.status_reports.append(
                    StatusReport(
                        time_us=self.now_us,
                        agent=key,
                        node_id=agent.node_id,
                        phase=agent.phase.value,
                        active_link=agent.active_link,
                        desired_link=agent.desired_link,
                        config_epoch=agent.last_config_epoch,
                        buffers=self.buffers_view(agent),
                    )
                )
            return
        if self.controller_faulted:
            # Agents never hear from a dead controller; log and carry on.
            self.result.pushes.append(PushRecord(self.now_us, None, suppressed=True, node_id=action.node_id))
            self._trace("push", len(self.result.pushes) - 1)
            return
        if action.verb == "set-policy":
            agent = self.agents[action.node_id]
            if action.policy is not None:
                agent.policy = action.policy
            if action.schedule is not None:
                agent.schedule = list(action.schedule)
            epoch = None
            for other in self.agents.values():
                other.last_config_epoch += 1
                epoch = other.last_config_epoch
            self.result.pushes.append(PushRecord(self.now_us, epoch, node_id=action.node_id))
            self._trace("push", len(self.result.pushes) - 1)
            return
        if action.verb == "force-switch":
            agent = self.agents[action.node_id]
            key = self.agent_key(agent)
            if key in self.committed or action.to_link == agent.active_link:
                self.result.pushes.append(PushRecord(self.now_us, None, suppressed=True, node_id=action.node_id))
                self._trace("push", len(self.result.pushes) - 1)
                return
            if agent.active_link is not None:
                left = agent.active_link
                self._deactivate(left)
                for other in self.side_agents(left):
                    if other is agent or other.active_link is not None:
                        continue
                    if other.initiator:
                        self.begin_switch_attempt(other, left, SwitchCause.POLICY)
                    else:
                        other.phase = Phase.IDLE
                        other.desired_link = None
            self.pending_cause.pop(key, None)
            self.preemitted.discard(key)
            epoch = None
            for other in self.agents.values():
                other.last_config_epoch += 1
                epoch = other.last_config_epoch
            self.result.pushes.append(PushRecord(self.now_us, epoch, node_id=action.node_id))
            self._trace("push", len(self.result.pushes) - 1)
            self.begin_switch_attempt(agent, action.to_link, SwitchCause.POLICY)
            return
        raise ValueError(f"unknown control verb {action.verb!r}")

    # -- invariants ---------------------------------------------------------

    def check_invariants(self) -> None:
        for link_id, lr in self.links.items():
            sides = self.side_agents(link_id)
            if lr.active:
                for agent in sides:
                    assert agent.active_link == link_id, f"{agent.node_id} disagrees on active {link_id}"
            else:
                for agent in sides:
                    assert agent.active_link != link_id or agent.phase is not Phase.PRODUCING
            a, b = lr.spec.endpoints
            self.stores[a].check_conservation(link_id)
            self.stores[b].check_conservation(link_id)

    def final_checks(self) -> None:
        for link_id, lr in self.links.items():
            a, b = lr.spec.endpoints
            sa, sb = self.stores[a], self.stores[b]
            assert sa.snapshot(link_id) == sb.snapshot(link_id), f"stores diverged on {link_id}"
            entries_a = sa._bucket(link_id)
            if entries_a.total_chunks:
                for offset in {0, entries_a.total_chunks - 1}:
                    ea = sa._entry(link_id, sa._bucket(link_id), offset)
                    eb = sb._entry(link_id, sb._bucket(link_id), offset)
                    assert (ea.key_id, ea.bytes) == (eb.key_id, eb.bytes)

    # -- main loop ----------------------------------------------------------

    def run(self) -> RunResult:
        if self.duration_us <= 0:
            return self.result
        # Initial configuration push from the controller, then autonomous
        # operation: agents bring up the first link their policy selects.
        for agent in self.agents.values():
            agent.last_config_epoch = 1
        self.result.pushes.append(PushRecord(0, 1))
        self._trace("push", 0)
        for window in self.sc.maintenance_windows:
            start_us, end_us = round(window.start * US), round(window.end * US)
            if start_us <= 0:
                self.links[window.link_id].maintenance = True
            else:
                self.schedule(start_us, EventKind.MAINTENANCE_START, (window.link_id,))
            self.schedule(end_us, EventKind.MAINTENANCE_END, (window.link_id,))
        if self.sc.controller_fault_time is not None:
            self.schedule(round(self.sc.controller_fault_time * US), EventKind.CONTROLLER_FAULT, ())
        for idx in range(len(self.sc.consumers)):
            self.schedule(0, EventKind.CONSUMER_TICK, (idx,))
        for action in sorted(self.control, key=lambda a: a.at):
            self.schedule(round(action.at * US), EventKind.CONTROL_ACTION, (action,))
        for key in list(self.agents):
            agent = self.agents[key]
            if not agent.initiator:
                continue
            if key in self.committed or agent.desired_link is not None:
                continue  # an earlier agent's startup proposal recruited this one
            target = select_next_link(agent, self.buffers_view(agent))
            self.begin_switch_attempt(agent, target, SwitchCause.STARTUP)

        while self.queue:
            time_us, _, kind, payload = heapq.heappop(self.queue)
            if time_us >= self.duration_us:
                break
            self.now_us = time_us
            if kind is EventKind.BLOCK_COMPLETE:
                self.on_block_complete(*payload)
            elif kind is EventKind.SWITCH_COMMIT:
                self.on_switch_commit(*payload)
            elif kind is EventKind.CONSUMER_TICK:
                self.on_consumer_tick(*payload)
            elif kind is EventKind.MAINTENANCE_START:
                self.on_maintenance(payload[0], "start")
            elif kind is EventKind.MAINTENANCE_END:
                self.on_maintenance(payload[0], "end")
            elif kind is EventKind.CONTROLLER_FAULT:
                self.on_controller_fault()
            elif kind is EventKind.PROBE_RETRY:
                self.on_probe_retry(*payload)
            elif kind is EventKind.CONTROL_ACTION:
                self.on_control_action(*payload)
            if self.debug:
                self.check_invariants()

        self.result.final_buffers = {
            link_id: self.stores[lr.spec.endpoints[0]].buffered_bytes(link_id)
            for link_id, lr in self.links.items()
        }
        if self.debug:
            self.final_checks()
        return self.result


def inject_fault_schedule(scenario: Scenario) -> list[tuple[float, str, str]]:
    """The engine events a scenario's fault plan expands to (time, kind, link).

    Purely informational; run() performs the same expansion internally.
    """
    out: list[tuple[float, str, str]] = []
    for w in scenario.maintenance_windows:
        out.append((w.start, "maintenance_start", w.link_id))
        out.append((w.end, "maintenance_end", w.link_id))
    if scenario.controller_fault_time is not None:
        out.append((scenario.controller_fault_time, "controller_fault", ""))
    return sorted(out)


def run(
    scenario: Scenario,
    *,
    debug: bool = False,
    control: Optional[list[ControlAction]] = None,
    dump_keys: bool = False,
) -> RunResult:
    """Execute a scenario to completion; bit-identical for equal inputs."""
    return _Engine(scenario, debug, list(control or []), dump_keys).run()


def parse_control_script(text: str, scenario: Scenario) -> list[ControlAction]:
    """Parse a YAML control script (list of timed verbs) against a scenario."""
    import yaml

    from .topology import _parse_policy, parse_duration

    raw = yaml.safe_load(text)
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise ScenarioValidationError("control script root must be a list")
    switch_nodes = set(scenario.switch_nodes())
    link_ids = {l.link_id for l in scenario.topology.links}
    actions: list[ControlAction] = []
    for i, entry in enumerate(raw):
        where = f"control[{i}]"
        if not isinstance(entry, dict):
            raise ScenarioValidationError(f"{where} must be a mapping")
        verb = str(entry.get("verb", ""))
        at = parse_duration(entry.get("at", 0), f"{where}.at")
        node_id = entry.get("node")
        node_id = str(node_id) if node_id is not None else None
        if verb == "get-status":
            actions.append(ControlAction(at=at, verb=verb, node_id=node_id))
            continue
        if node_id is None:
            raise ScenarioValidationError(f"{where}.node is required for {verb!r}")
        if node_id not in switch_nodes:
            raise ScenarioValidationError(f"{where}.node must name a switch node")
        if verb == "set-policy":
            policy, schedule = _parse_policy(entry.get("policy", {}), f"{where}.policy")
            schedule_t = tuple(schedule) if schedule else tuple(scenario.schedules[node_id])
            try:
                policy.validate(list(schedule_t), f"{where}.policy")
            except ValueError as exc:
                raise ScenarioValidationError(str(exc)) from None
            actions.append(ControlAction(at=at, verb=verb, node_id=node_id, policy=policy, schedule=schedule_t))
        elif verb == "force-switch":
            to_link = str(entry.get("to_link", ""))
            if to_link not in link_ids:
                raise ScenarioValidationError(f"{where}.to_link names unknown link {to_link!r}")
            if node_id not in self_endpoints(scenario, to_link):
                raise ScenarioValidationError(f"{where}.to_link is not adjacent to node {node_id!r}")
            actions.append(ControlAction(at=at, verb=verb, node_id=node_id, to_link=to_link))
        else:
            raise ScenarioValidationError(f"{where}.verb must be set-policy, force-switch or get-status")
    return actions


def self_endpoints(scenario: Scenario, link_id: str) -> tuple[str, str]:
    return scenario.topology.link(link_id).endpoints
