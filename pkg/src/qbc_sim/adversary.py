"""Cheating-Alice strategies that try to postpone the commitment.

A cheater only sees what physically arrives (``PulsePhysicalOutcome``): pulse
ids and photon states, never Bob's labels. Every strategy produces a
``CheatOutcomeStore`` that can answer an opening in either basis, so the bit is
chosen only at opening time.
"""

import itertools
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import ContractViolationError
from .models import (
    AdversaryConfig,
    Announcement,
    ChannelModel,
    OpeningRecord,
    SourceModel,
    Strategy,
    basis_for_bit,
)
from .photonics import PulsePhysicalOutcome, expected_detection_probability
from .qstate import (
    BREIDBART_BASES,
    BREIDBART_LABELS,
    COMMITMENT_BASES,
    SIN2_PI_8,
    MeasBasis,
    QubitState,
    StateLabel,
    measure,
    orthogonal_label,
    overlap_prob,
    state_of,
)

log = logging.getLogger(__name__)

# Claimed label per Breidbart outcome and opened basis: the basis vector with
# squared overlap cos^2(pi/8).
CLAIM_MAP: dict[StateLabel, dict[MeasBasis, StateLabel]] = {
    StateLabel.V1: {MeasBasis.XY: StateLabel.Y, MeasBasis.LR: StateLabel.R},
    StateLabel.U1: {MeasBasis.XY: StateLabel.X, MeasBasis.LR: StateLabel.L},
    StateLabel.V2: {MeasBasis.XY: StateLabel.Y, MeasBasis.LR: StateLabel.L},
    StateLabel.U2: {MeasBasis.XY: StateLabel.X, MeasBasis.LR: StateLabel.R},
}


class Provenance(str, Enum):
    BREIDBART_B1 = "breidbart_b1"
    BREIDBART_B2 = "breidbart_b2"
    PAIR_BOTH_BASES = "pair_both_bases"
    STORED_QUBIT = "stored_qubit"


@dataclass(frozen=True)
class CheatEntry:
    """What the cheater keeps for one announced pulse."""

    provenance: Provenance
    breidbart_outcome: StateLabel | None = None
    xy_label: StateLabel | None = None
    lr_label: StateLabel | None = None
    stored_state: QubitState | None = None

    def claim(
        self, basis: MeasBasis, storage_fidelity: float, rng: np.random.Generator
    ) -> StateLabel:
        """Label reported for this pulse when ``basis`` is opened."""
        if self.provenance is Provenance.PAIR_BOTH_BASES:
            return self.xy_label if basis is MeasBasis.XY else self.lr_label
        if self.provenance is Provenance.STORED_QUBIT:
            label = measure(self.stored_state, basis, rng)
            if rng.random() < 1.0 - storage_fidelity:
                label = orthogonal_label(label)
            return label
        return CLAIM_MAP[self.breidbart_outcome][basis]


@dataclass
class CheatOutcomeStore:
    """Per-pulse cheat entries, able to open either bit."""

    entries: dict[int, CheatEntry] = field(default_factory=dict)
    storage_fidelity: float = 1.0

    @property
    def announcement(self) -> Announcement:
        return Announcement(detected_pulse_ids=sorted(self.entries))

    @property
    def realized_p2(self) -> float:
        if not self.entries:
            return 0.0
        pairs = sum(
            e.provenance is Provenance.PAIR_BOTH_BASES for e in self.entries.values()
        )
        return pairs / len(self.entries)

    def open(self, bit: int, rng: np.random.Generator) -> OpeningRecord:
        """Answer an opening of ``bit``; stored qubits are read out now."""
        basis = basis_for_bit(bit)
        outcomes = {
            pulse_id: self.entries[pulse_id].claim(basis, self.storage_fidelity, rng)
            for pulse_id in sorted(self.entries)
        }
        return OpeningRecord(commitment_bit=bit, basis=basis, outcomes=outcomes)


@dataclass(frozen=True)
class CheatResult:
    announcement: Announcement
    store: CheatOutcomeStore
    realized_p2: float


# ============================================================================
# Single-pulse measurements
# ============================================================================


def breidbart_measure_and_store(
    state: QubitState, rng: np.random.Generator
) -> CheatEntry:
    """Measure one photon in a randomly chosen Breidbart basis."""
    basis = BREIDBART_BASES[int(rng.random() < 0.5)]
    outcome = measure(state, basis, rng)
    provenance = (
        Provenance.BREIDBART_B1 if basis is MeasBasis.B1 else Provenance.BREIDBART_B2
    )
    return CheatEntry(provenance=provenance, breidbart_outcome=outcome)


def pair_split_measure(
    states: Sequence[QubitState], rng: np.random.Generator
) -> CheatEntry:
    """Measure one photon of a multi-photon pulse in each commitment basis.

    Photons beyond the second are ignored.

    Raises:
        ContractViolationError: If fewer than two photons are given.
    """
    if len(states) < 2:
        raise ContractViolationError(
            f"Pair splitting needs at least 2 photons, got {len(states)}"
        )
    return CheatEntry(
        provenance=Provenance.PAIR_BOTH_BASES,
        xy_label=measure(states[0], MeasBasis.XY, rng),
        lr_label=measure(states[1], MeasBasis.LR, rng),
    )


def delayed_measure(
    state: QubitState, q: float, f: float, rng: np.random.Generator
) -> CheatEntry | None:
    """Nondemolition arrival detection followed by qubit storage.

    Succeeds with probability ``q``; otherwise the photon is lost. The storage
    fidelity ``f`` is applied when the entry is read out at opening.
    """
    if not rng.random() < q:
        return None
    return CheatEntry(provenance=Provenance.STORED_QUBIT, stored_state=state)


# ============================================================================
# Strategies
# ============================================================================


def rate_budget(
    source: SourceModel,
    channel: ChannelModel,
    rate_floor: float,
    n_pulses: float | None = None,
) -> int:
    """Minimum announcement count that passes the verifier's rate floor.

    ``n_pulses`` defaults to the expected pulse count of the session.
    """
    pulses = source.expected_pulses if n_pulses is None else n_pulses
    expected = pulses * expected_detection_probability(source, channel)
    # Guard against float noise pushing an exact product over an integer.
    return math.ceil(round(expected * rate_floor, 9))


def _subsample(
    pulse_ids: Sequence[int], cap: int, rng: np.random.Generator
) -> list[int]:
    if len(pulse_ids) <= cap:
        return list(pulse_ids)
    picked = rng.choice(len(pulse_ids), size=cap, replace=False)
    return sorted(pulse_ids[int(i)] for i in picked)


def combined_strategy(
    arrivals: Sequence[PulsePhysicalOutcome],
    config: AdversaryConfig,
    rate_budget: int,
    rng: np.random.Generator,
) -> tuple[Announcement, CheatOutcomeStore, float]:
    """Announce every pair pulse, then fill up to ``rate_budget`` with singles.

    Singles are measured in a Breidbart basis. With ``config.forced_p2`` set,
    every arrival is announced and treated as a pair with that probability
    (synthetic duplication of a single photon), which pins the pair fraction.
    """
    store = CheatOutcomeStore(storage_fidelity=config.storage_fidelity_f)
    if config.forced_p2 is not None:
        for arrival in arrivals:
            if not arrival.states:
                continue
            first = arrival.states[0]
            if rng.random() < config.forced_p2:
                photons = arrival.states if len(arrival.states) > 1 else (first, first)
                store.entries[arrival.pulse_id] = pair_split_measure(photons, rng)
            else:
                store.entries[arrival.pulse_id] = breidbart_measure_and_store(
                    first, rng
                )
        return store.announcement, store, store.realized_p2

    pairs = [a for a in arrivals if config.exploit_pairs and len(a.states) >= 2]
    pair_ids = {a.pulse_id for a in pairs}
    singles = [a for a in arrivals if a.states and a.pulse_id not in pair_ids]
    for arrival in pairs:
        store.entries[arrival.pulse_id] = pair_split_measure(arrival.states, rng)

    fill = max(0, rate_budget - len(pairs))
    if fill > len(singles):
        log.warning(
            "Rate budget %d unreachable (%d pairs, %d singles); announcing all",
            rate_budget,
            len(pairs),
            len(singles),
        )
    by_id = {a.pulse_id: a for a in singles}
    for pulse_id in _subsample([a.pulse_id for a in singles], fill, rng):
        store.entries[pulse_id] = breidbart_measure_and_store(
            by_id[pulse_id].states[0], rng
        )
    return store.announcement, store, store.realized_p2


def run_strategy(
    arrivals: Sequence[PulsePhysicalOutcome],
    config: AdversaryConfig,
    announce_cap: int,
    budget: int,
    rng: np.random.Generator,
) -> CheatResult:
    """Dispatch to the configured cheating strategy.

    ``announce_cap`` is the expected honest announcement count; the Breidbart
    and Delayed strategies never announce more so their rate looks honest.
    """
    store = CheatOutcomeStore(storage_fidelity=config.storage_fidelity_f)
    strategy = config.strategy
    present = [a for a in arrivals if a.states]

    if strategy is Strategy.COMBINED:
        announcement, store, p2 = combined_strategy(present, config, budget, rng)
        return CheatResult(announcement=announcement, store=store, realized_p2=p2)

    if strategy is Strategy.BREIDBART:
        by_id = {a.pulse_id: a for a in present}
        for pulse_id in _subsample(list(by_id), announce_cap, rng):
            store.entries[pulse_id] = breidbart_measure_and_store(
                by_id[pulse_id].states[0], rng
            )
    elif strategy is Strategy.PAIR_SPLIT:
        for arrival in present:
            if len(arrival.states) >= 2:
                store.entries[arrival.pulse_id] = pair_split_measure(
                    arrival.states, rng
                )
    elif strategy is Strategy.DELAYED:
        stored: dict[int, CheatEntry] = {}
        for arrival in present:
            entry = delayed_measure(
                arrival.states[0], config.qnd_success_q, config.storage_fidelity_f, rng
            )
            if entry is not None:
                stored[arrival.pulse_id] = entry
        for pulse_id in _subsample(list(stored), announce_cap, rng):
            store.entries[pulse_id] = stored[pulse_id]
    else:
        raise ContractViolationError(f"{strategy.value} is not a cheating strategy")

    return CheatResult(
        announcement=store.announcement, store=store, realized_p2=store.realized_p2
    )


# ============================================================================
# Analytic oracles
# ============================================================================


def expected_cheat_qber(p2: float, e: float = 0.0) -> float:
    """Expected matching QBER of the combined cheat with pair fraction ``p2``.

    A channel flip turns a Breidbart error of sin^2(pi/8) into cos^2(pi/8), so
    singles err with sin^2(pi/8) + e*cos(pi/4); pairs err with the channel only.
    """
    single_error = SIN2_PI_8 + e * math.cos(math.pi / 4)
    return (1.0 - p2) * single_error + p2 * e


def expected_claim_qber(
    mapping: dict[StateLabel, StateLabel], basis: MeasBasis
) -> float:
    """Expected matching QBER of a Breidbart claim mapping for ``basis``.

    Bob's label is uniform over ``basis``; the Breidbart basis is uniform.
    """
    error = 0.0
    for sent in basis.labels:
        for outcome in BREIDBART_LABELS:
            p_basis = 0.5
            p_outcome = overlap_prob(state_of(outcome), state_of(sent))
            if mapping[outcome] != sent:
                error += 0.5 * p_basis * p_outcome
    return error


ClaimMapping = dict[StateLabel, StateLabel]


def optimal_claim_mapping() -> dict[MeasBasis, tuple[ClaimMapping, float]]:
    """Brute-force the best deterministic claim mapping per opened basis."""
    best: dict[MeasBasis, tuple[dict[StateLabel, StateLabel], float]] = {}
    for basis in COMMITMENT_BASES:
        for choice in itertools.product(basis.labels, repeat=len(BREIDBART_LABELS)):
            mapping = dict(zip(BREIDBART_LABELS, choice))
            qber = expected_claim_qber(mapping, basis)
            if basis not in best or qber < best[basis][1] - 1e-15:
                best[basis] = (mapping, qber)
    return best
