"""Slot-level Monte Carlo simulation of the deadline-constrained channel.

Every station is saturated: as soon as a head-of-line packet is resolved a
new one takes its place. A packet is resolved in one of two ways. If the
station transmits, that single attempt decides it: the packet succeeds when
the slot carries at most `mpr` transmissions in total, and is lost otherwise.
If the station stays silent for `deadline` consecutive slots, the packet
expires unsent and counts as a failure.

`step_slot` advances one slot for explicit per-user state and is the
reference semantics. `run_stationary` is a vectorized implementation of the
same process that consumes the random stream identically (one uniform draw
per user per slot, slot-major then user-index order), so both produce
bit-identical counts for the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import ChannelConfig, as_probability, delivery_prob

__all__ = [
    "UserState",
    "SlotObservation",
    "SimResult",
    "IntervalOutcome",
    "TheoryComparison",
    "step_slot",
    "run_interval",
    "run_stationary",
    "theoretical_check",
]


@dataclass
class UserState:
    """Mutable per-station simulation state.

    hol_age counts consecutive silent slots for the current head-of-line
    packet and always stays below the deadline; reaching it expires the
    packet and resets the counter.
    """

    tx_prob: float
    hol_age: int = 0
    packets_completed: int = 0
    packets_succeeded: int = 0

    def __post_init__(self) -> None:
        self.tx_prob = as_probability(self.tx_prob)


@dataclass(frozen=True)
class SlotObservation:
    """What one station sees of one slot."""

    total_transmitters: int
    tagged_transmitted: bool
    success_count: int


@dataclass(frozen=True)
class SimResult:
    """Aggregate counts from a finished run."""

    slots: int
    seed: int
    packets_completed: tuple[int, ...]
    packets_succeeded: tuple[int, ...]

    def pooled_sdp(self) -> float:
        """Succeeded over completed, pooled across stations. NaN if nothing
        completed."""
        total = sum(self.packets_completed)
        if total == 0:
            return math.nan
        return sum(self.packets_succeeded) / total

    def per_user_sdp(self) -> tuple[float, ...]:
        return tuple(
            s / c if c else math.nan
            for s, c in zip(self.packets_succeeded, self.packets_completed)
        )


@dataclass(frozen=True)
class IntervalOutcome:
    """Per-station counts for one simulated stretch of slots.

    probe_counts[c] holds, per station, the number of slots in which the
    station was silent and exactly c transmissions occurred in total.
    """

    completed: np.ndarray
    succeeded: np.ndarray
    probe_counts: dict[int, np.ndarray] = field(default_factory=dict)


def step_slot(
    users: list[UserState],
    mpr: int,
    deadline: int,
    rng: np.random.Generator,
) -> list[SlotObservation]:
    """Advance every station one slot, mutating `users` in place.

    Draws exactly len(users) uniforms from `rng`, in user-index order.
    Returns one observation per station.
    """
    draws = rng.random(len(users))
    transmitted = [d < u.tx_prob for d, u in zip(draws, users)]
    total = sum(transmitted)
    decodable = total <= mpr
    observations = []
    for user, sent in zip(users, transmitted):
        if sent:
            user.packets_completed += 1
            if decodable:
                user.packets_succeeded += 1
            user.hol_age = 0
        else:
            user.hol_age += 1
            if user.hol_age >= deadline:
                # Deadline passed without a transmission: expired failure.
                user.packets_completed += 1
                user.hol_age = 0
        observations.append(
            SlotObservation(
                total_transmitters=total,
                tagged_transmitted=sent,
                success_count=total if decodable else 0,
            )
        )
    return observations


def run_interval(
    rng: np.random.Generator,
    tx_probs: np.ndarray,
    mpr: int,
    deadline: int,
    n_slots: int,
    hol_ages: np.ndarray,
    probes: tuple[int, ...] = (),
) -> IntervalOutcome:
    """Vectorized simulation of `n_slots` slots for len(tx_probs) stations.

    hol_ages is updated in place so consecutive intervals chain exactly like
    repeated `step_slot` calls. The random stream consumption matches
    `step_slot`: an (n_slots, n_users) uniform block in row-major order.
    """
    n_users = len(tx_probs)
    draws = rng.random((n_slots, n_users))
    transmitted = draws < tx_probs
    totals = transmitted.sum(axis=1)
    decodable = totals <= mpr

    attempts = transmitted.sum(axis=0)
    succeeded = (transmitted & decodable[:, None]).sum(axis=0)

    # Expiries only depend on the gaps between a station's transmissions:
    # every full `deadline` silent slots inside a gap expires one packet.
    expired = np.zeros(n_users, dtype=np.int64)
    for j in range(n_users):
        positions = np.flatnonzero(transmitted[:, j])
        age = int(hol_ages[j])
        if positions.size == 0:
            total_silent = age + n_slots
            expired[j] = total_silent // deadline
            hol_ages[j] = total_silent % deadline
            continue
        lead = age + int(positions[0])
        count = lead // deadline
        if positions.size > 1:
            gaps = np.diff(positions) - 1
            count += int((gaps // deadline).sum())
        tail = n_slots - 1 - int(positions[-1])
        count += tail // deadline
        hol_ages[j] = tail % deadline
        expired[j] = count

    probe_counts: dict[int, np.ndarray] = {}
    for c in probes:
        mask = totals == c
        silent_hits = mask.sum() - transmitted[mask].sum(axis=0)
        probe_counts[c] = silent_hits.astype(np.int64)

    return IntervalOutcome(
        completed=attempts + expired,
        succeeded=succeeded.astype(np.int64),
        probe_counts=probe_counts,
    )


def run_stationary(
    config: ChannelConfig,
    tau,
    slots: int,
    seed: int,
    block_slots: int = 200_000,
) -> SimResult:
    """Simulate `slots` slots with every station at the same fixed tau.

    Fresh stations (hol_age 0), counts from zero. Deterministic in `seed`.
    """
    if slots < 1:
        raise ValueError(f"slots must be >= 1, got {slots}")
    if block_slots < 1:
        raise ValueError(f"block_slots must be >= 1, got {block_slots}")
    t = as_probability(tau)
    rng = np.random.default_rng(seed)
    tx_probs = np.full(config.n_users, t)
    hol_ages = np.zeros(config.n_users, dtype=np.int64)
    completed = np.zeros(config.n_users, dtype=np.int64)
    succeeded = np.zeros(config.n_users, dtype=np.int64)
    remaining = slots
    while remaining > 0:
        chunk = min(block_slots, remaining)
        outcome = run_interval(
            rng, tx_probs, config.mpr, config.deadline, chunk, hol_ages
        )
        completed += outcome.completed
        succeeded += outcome.succeeded
        remaining -= chunk
    return SimResult(
        slots=slots,
        seed=seed,
        packets_completed=tuple(int(c) for c in completed),
        packets_succeeded=tuple(int(s) for s in succeeded),
    )


@dataclass(frozen=True)
class TheoryComparison:
    """Empirical delivery rate against the analytic value."""

    empirical: float
    analytic: float
    z_score: float
    packets: int


def theoretical_check(
    config: ChannelConfig, tau, slots: int, seed: int
) -> TheoryComparison:
    """Run `run_stationary` and compare the pooled delivery rate with
    `delivery_prob`, reporting a binomial z-score."""
    t = as_probability(tau)
    result = run_stationary(config, t, slots, seed)
    analytic = delivery_prob(config, t)
    total = sum(result.packets_completed)
    empirical = result.pooled_sdp()
    if total == 0:
        return TheoryComparison(empirical, analytic, math.nan, 0)
    se = math.sqrt(analytic * (1.0 - analytic) / total)
    if se == 0.0:
        z = 0.0 if empirical == analytic else math.copysign(math.inf, empirical - analytic)
    else:
        z = (empirical - analytic) / se
    return TheoryComparison(empirical, analytic, z, total)
