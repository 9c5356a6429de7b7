"""Node-agent state machines and link-switching policies.

Each switch-capable node runs an agent that decides which of its links the
local QKD device serves. Two policies are supported:

* key balancing: after every block the agent moves the device to the link
  whose buffered secret bytes, divided by its configured weight, is smallest
  (the most underfilled link relative to its target share);
* coordinated switching: the device stays on a link for a fixed number of
  blocks, then rotates to the next link in the agent's schedule.

Switches between two agents are agreed through a two-phase propose/ack
handshake (protocol version 1, see README). The handshake itself is driven
by the event engine in :mod:`qkdnetsim.simcore`; this module holds the pure
decision logic and the agent/switch record types.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional


class PolicyVariant(Enum):
    KEY_BALANCING = "balancing"
    COORDINATED_SWITCHING = "coordinated"


class Phase(Enum):
    IDLE = "idle"
    ALIGNING = "aligning"
    PRODUCING = "producing"
    NEGOTIATING = "negotiating"
    WAITING_PEER = "waiting_peer"


class SwitchCause(Enum):
    POLICY = "policy"
    MAINTENANCE_SKIP = "maintenance_skip"
    STARTUP = "startup"


@dataclass
class SwitchPolicy:
    """Per-node switching configuration.

    ``ratios`` applies to key balancing only, ``n_blocks`` to coordinated
    switching only. ``skip_timeout`` is how long an agent probes a dark link
    before skipping it.
    """

    variant: PolicyVariant
    ratios: Optional[dict[str, float]] = None
    n_blocks: Optional[int] = None
    skip_timeout: float = 60.0

    def validate(self, schedule: list[str], where: str) -> None:
        if self.skip_timeout <= 0:
            raise ValueError(f"{where}.skip_timeout must be > 0")
        if self.variant is PolicyVariant.KEY_BALANCING:
            if not self.ratios:
                raise ValueError(f"{where}.ratios is required for the balancing policy")
            for link_id in schedule:
                weight = self.ratios.get(link_id)
                if weight is None:
                    raise ValueError(f"{where}.ratios is missing link {link_id!r}")
                if weight <= 0:
                    raise ValueError(f"{where}.ratios[{link_id!r}] must be > 0")
        else:
            if self.n_blocks is None or self.n_blocks < 1:
                raise ValueError(f"{where}.n_blocks must be >= 1")


@dataclass(eq=False)
class AgentState:
    """Mutable per-node agent state, owned by the event engine.

    ``desired_link`` is the link the agent is currently trying to activate
    (set while negotiating, waiting for a peer, or probing a dark link);
    ``last_production_link`` feeds the from_link field of switch records.
    """

    node_id: str
    schedule: list[str]
    policy: SwitchPolicy
    active_link: Optional[str] = None
    phase: Phase = Phase.IDLE
    last_config_epoch: int = 0
    desired_link: Optional[str] = None
    last_production_link: Optional[str] = None
    blocks_since_switch: int = 0
    blocks_since_event: int = 0
    initiator: bool = True


@dataclass(frozen=True)
class SwitchEvent:
    """One device reassignment at one node.

    For maintenance skips, ``from_link`` is the dark link that was probed and
    abandoned (it may never have been active); for policy and startup events
    it is the link the device last produced on, or None.
    """

    time: float
    node_id: str
    from_link: Optional[str]
    to_link: str
    cause: SwitchCause
    blocks_on_from_link: int = 0

    def __post_init__(self) -> None:
        if self.from_link == self.to_link:
            raise ValueError("switch event must change links")


def select_next_link(agent: AgentState, buffers: Mapping[str, int]) -> str:
    """Pick the link the agent's device should serve next.

    Key balancing returns the schedule link minimizing buffered/ratio; the
    coordinated policy returns the schedule entry after the active link,
    wrapping. Ties always resolve to the earliest schedule entry.
    """
    if not agent.schedule:
        raise ValueError(f"agent {agent.node_id} has an empty schedule")
    policy = agent.policy
    if policy.variant is PolicyVariant.KEY_BALANCING:
        assert policy.ratios is not None
        best = agent.schedule[0]
        best_q = buffers.get(best, 0) / policy.ratios[best]
        for link_id in agent.schedule[1:]:
            q = buffers.get(link_id, 0) / policy.ratios[link_id]
            if q < best_q:
                best, best_q = link_id, q
        return best
    if agent.active_link is None or agent.active_link not in agent.schedule:
        return agent.schedule[0]
    i = agent.schedule.index(agent.active_link)
    return agent.schedule[(i + 1) % len(agent.schedule)]


def should_switch(agent: AgentState, blocks_since_switch: int, buffers: Mapping[str, int]) -> bool:
    """Decide, right after a completed block, whether the agent switches away."""
    policy = agent.policy
    if policy.variant is PolicyVariant.COORDINATED_SWITCHING:
        assert policy.n_blocks is not None
        return blocks_since_switch >= policy.n_blocks
    return select_next_link(agent, buffers) != agent.active_link


def skip_target(agent: AgentState, attempted: str, maintained: frozenset[str] | set[str]) -> Optional[str]:
    """Next schedule entry after a dark link that is not itself dark.

    Returns None when every alternative is under maintenance, in which case
    the agent idles and keeps re-probing.
    """
    if attempted in agent.schedule:
        start = agent.schedule.index(attempted)
    else:
        start = -1
    n = len(agent.schedule)
    for step in range(1, n + 1):
        candidate = agent.schedule[(start + step) % n]
        if candidate != attempted and candidate not in maintained:
            return candidate
    return None


def next_probe_candidate(agent: AgentState, attempted: str) -> str:
    """Schedule entry probed next while every link is dark (cyclic walk)."""
    if attempted in agent.schedule:
        i = agent.schedule.index(attempted)
        return agent.schedule[(i + 1) % len(agent.schedule)]
    return agent.schedule[0]
