"""Stochastic model of one active QKD link.

While a link is active it accumulates fixed-size blocks of sifted key. Each
block gets a duration (block size over a jittered sifted rate, plus a base
alignment overhead for the first block after a switch), per-basis QBER values
from a clamped AR(1) process, and a secret-byte count from a pluggable
secret-fraction model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from . import rng

if TYPE_CHECKING:
    from .topology import LinkSpec, Scenario

US = 1_000_000  # microseconds per second; engine time is integer microseconds


def binary_entropy(q: float) -> float:
    """Shannon entropy of a binary variable, in bits."""
    if q < 0.0 or q > 1.0:
        raise ValueError(f"binary_entropy: argument {q!r} outside [0, 1]")
    if q == 0.0 or q == 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


def secret_fraction(qber: float) -> float:
    """Secret bytes per sifted byte at a given QBER: max(0, 1 - 2*h2(Q)).

    Monotone non-increasing, 1 at Q=0, and 0 at or above the zero-rate
    threshold near Q=0.110028. This is a deliberately simple stand-in for a
    finite-key bound; swap it via the ``fraction_model`` argument of
    :func:`next_block` if a sharper model is needed.
    """
    if qber < 0.0 or qber > 0.5:
        raise ValueError(f"secret_fraction: QBER {qber!r} outside [0, 0.5]")
    return max(0.0, 1.0 - 2.0 * binary_entropy(qber))


@dataclass(frozen=True)
class BlockRecord:
    """One completed block of sifted key on one link."""

    link_id: str
    seq: int
    start_us: int
    end_us: int
    sifted_bytes: int
    qber_x: float
    qber_z: float
    secret_bytes: int
    first_after_switch: bool

    @property
    def start_time(self) -> float:
        return self.start_us / US

    @property
    def end_time(self) -> float:
        return self.end_us / US

    @property
    def duration(self) -> float:
        return (self.end_us - self.start_us) / US


@dataclass
class LinkState:
    """Evolving per-link state; owned by exactly one link's event sequence."""

    link_id: str
    rng_stream: np.random.Generator
    qber_state_x: float
    qber_state_z: float
    sifted_rate_current: float
    blocks_completed: int = 0

    @classmethod
    def create(cls, seed: int, spec: "LinkSpec") -> "LinkState":
        return cls(
            link_id=spec.link_id,
            rng_stream=rng.stream(seed, f"link:{spec.link_id}"),
            qber_state_x=spec.qber_mean_x,
            qber_state_z=spec.qber_mean_z,
            sifted_rate_current=spec.nominal_sifted_rate,
        )

    def clone(self) -> "LinkState":
        gen = np.random.Generator(np.random.Philox())
        gen.bit_generator.state = self.rng_stream.bit_generator.state
        return LinkState(
            link_id=self.link_id,
            rng_stream=gen,
            qber_state_x=self.qber_state_x,
            qber_state_z=self.qber_state_z,
            sifted_rate_current=self.sifted_rate_current,
            blocks_completed=self.blocks_completed,
        )


def _ar1_step(prev: float, mean: float, rho: float, noise_std: float, gen: np.random.Generator) -> float:
    noise = gen.normal(0.0, noise_std) if noise_std > 0 else 0.0
    value = mean + rho * (prev - mean) + noise
    return min(0.5, max(0.0, value))


def sample_qber(state: LinkState, spec: "LinkSpec") -> tuple[float, float]:
    """Advance both per-basis AR(1) QBER processes one step and return them.

    Each basis follows q <- mu + rho*(q_prev - mu) + noise, clamped to
    [0, 0.5]; the X draw always precedes the Z draw on the link's stream.
    """
    state.qber_state_x = _ar1_step(state.qber_state_x, spec.qber_mean_x, spec.qber_rho, spec.qber_noise_std, state.rng_stream)
    state.qber_state_z = _ar1_step(state.qber_state_z, spec.qber_mean_z, spec.qber_rho, spec.qber_noise_std, state.rng_stream)
    return state.qber_state_x, state.qber_state_z


def sample_rate(state: LinkState, spec: "LinkSpec") -> float:
    """Per-block sifted rate: nominal times a unit-mean gamma jitter."""
    shape = spec.rate_jitter_shape
    jitter = state.rng_stream.gamma(shape, 1.0 / shape)
    state.sifted_rate_current = spec.nominal_sifted_rate * jitter
    return state.sifted_rate_current


def sample_alignment_overhead(state: LinkState, mean: float, std: float) -> float:
    """Base-alignment time in seconds; negative normal draws clamp to zero."""
    if std <= 0:
        return max(0.0, mean)
    return max(0.0, state.rng_stream.normal(mean, std))


def next_block(
    state: LinkState,
    spec: "LinkSpec",
    scenario: "Scenario",
    first_after_switch: bool,
    now_us: int,
    fraction_model: Callable[[float], float] = secret_fraction,
) -> BlockRecord:
    """Generate the next block on an active link starting at ``now_us``.

    Draw order on the link's stream is fixed: rate jitter, alignment overhead
    (only when ``first_after_switch``), QBER X, QBER Z. Identical state and
    arguments therefore always produce an identical record.
    """
    rate = sample_rate(state, spec)
    duration_us = round(scenario.block_size / rate * US)
    if first_after_switch:
        align = sample_alignment_overhead(
            state, scenario.alignment_overhead.mean, scenario.alignment_overhead.std
        )
        duration_us += round(align * US)
    qx, qz = sample_qber(state, spec)
    secret = math.floor(scenario.block_size * fraction_model(max(qx, qz)))
    state.blocks_completed += 1
    return BlockRecord(
        link_id=spec.link_id,
        seq=state.blocks_completed,
        start_us=now_us,
        end_us=now_us + duration_us,
        sifted_bytes=scenario.block_size,
        qber_x=qx,
        qber_z=qz,
        secret_bytes=secret,
        first_after_switch=first_after_switch,
    )
