"""Deterministic discrete-event simulator for switched multi-node QKD networks."""

from .kms import InsufficientKeyError, KeyBlockEntry, KeyStore, RekeyEvent, consumer_tick, deposit_block
from .linkmodel import BlockRecord, LinkState, binary_entropy, next_block, sample_qber, secret_fraction
from .metrics import Aggregates, aggregate, export_csv, export_json
from .orchestration import (
    AgentState,
    Phase,
    PolicyVariant,
    SwitchCause,
    SwitchEvent,
    SwitchPolicy,
    select_next_link,
    should_switch,
)
from .simcore import ControlAction, RunResult, inject_fault_schedule, parse_control_script, run
from .topology import (
    ConsumerSpec,
    LinkSpec,
    NetworkTopology,
    NodeSpec,
    Scenario,
    ScenarioSyntaxError,
    ScenarioValidationError,
    load_scenario,
    parse_scenario,
    serialize_scenario,
    venqci_preset,
)

__version__ = "0.1.0"
