"""Commit, announce and open state machines, plus the verifier.

Primary protocol: Bob sends BB84 pulses at random times, Alice commits by
choosing her measurement basis and announces detection times, and at opening
she reveals the basis with every outcome. Legacy protocol: Bob commits by
restricting the states he sends to one basis, Alice measures in random bases.
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .exceptions import PreconditionError
from .models import (
    Announcement,
    ChannelModel,
    OpeningRecord,
    PulseRecord,
    RejectReason,
    SimConfig,
    SourceModel,
    Thresholds,
    VerificationReport,
    Verdict,
    basis_for_bit,
)
from .photonics import (
    PulsePhysicalOutcome,
    expected_detection_probability,
    measure_pulse,
    propagate_pulse,
)
from .qstate import (
    BB84_LABELS,
    COMMITMENT_BASES,
    MeasBasis,
    StateLabel,
    detector_index,
    measure,
    orthogonal_label,
    state_of,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HonestOutcomeStore:
    """Alice's private record of her commit-phase measurements."""

    bit: int
    basis: MeasBasis
    outcomes: dict[int, StateLabel] = field(default_factory=dict)


# ============================================================================
# Primary protocol
# ============================================================================


def _validate_bit(bit: int) -> None:
    if bit not in (0, 1):
        raise PreconditionError(f"Commitment bit must be 0 or 1, got {bit!r}")


def _send_times(source: SourceModel, rng: np.random.Generator) -> np.ndarray:
    # Homogeneous Poisson process: Poisson count, then sorted uniform times.
    if source.session_duration == 0:
        return np.empty(0)
    n = int(rng.poisson(source.expected_pulses))
    times = np.sort(rng.uniform(0.0, source.session_duration, size=n))
    return np.unique(times)


def bob_prepare_session(
    source: SourceModel,
    rng: np.random.Generator,
    labels: Sequence[StateLabel] = BB84_LABELS,
) -> list[PulseRecord]:
    """Draw Bob's private pulse log: random send times, uniform labels."""
    times = _send_times(source, rng)
    choices = rng.integers(len(labels), size=times.size)
    records = [
        PulseRecord(
            pulse_id=i,
            send_time=float(t),
            label=labels[int(k)],
            mu=source.mean_photons_mu,
        )
        for i, (t, k) in enumerate(zip(times, choices))
    ]
    if not records:
        log.warning("Session has no pulses (expected %.3g)", source.expected_pulses)
    return records


def transmit_session(
    records: Sequence[PulseRecord],
    source: SourceModel,
    channel: ChannelModel,
    rng: np.random.Generator,
) -> list[PulsePhysicalOutcome]:
    """Propagate every pulse; only pulses with surviving photons are kept."""
    arrivals = []
    for record in records:
        outcome = propagate_pulse(record, source, channel, rng)
        if outcome.photons_at_alice:
            arrivals.append(outcome)
    return arrivals


def alice_commit(
    bit: int,
    physical_outcomes: Sequence[PulsePhysicalOutcome],
    channel: ChannelModel,
    rng: np.random.Generator,
) -> tuple[Announcement, HonestOutcomeStore]:
    """Measure every arriving photon in the committed basis.

    Returns the public announcement (detection ids only) and the private store.
    """
    _validate_bit(bit)
    basis = basis_for_bit(bit)
    outcomes: dict[int, StateLabel] = {}
    for arrival in physical_outcomes:
        label = measure_pulse(arrival.states, basis, channel, rng)
        if label is not None:
            outcomes[arrival.pulse_id] = label
    announcement = Announcement(detected_pulse_ids=sorted(outcomes))
    return announcement, HonestOutcomeStore(bit=bit, basis=basis, outcomes=outcomes)


def alice_open(store: HonestOutcomeStore, bit: int) -> OpeningRecord:
    """Reveal the committed basis and all stored outcomes."""
    _validate_bit(bit)
    if bit != store.bit:
        log.warning(
            "Honest opening of bit %d after committing to bit %d", bit, store.bit
        )
    return OpeningRecord(
        commitment_bit=bit,
        basis=basis_for_bit(bit),
        outcomes=dict(store.outcomes),
    )


def _malformed(n_sent: int, n_announced: int, expected_rate: float, detail: str):
    log.debug("Rejecting malformed opening: %s", detail)
    return VerificationReport(
        n_sent=n_sent,
        n_announced=n_announced,
        detection_rate=n_announced / n_sent if n_sent else 0.0,
        expected_rate=expected_rate,
        verdict=Verdict.REJECT,
        reject_reason=RejectReason.MALFORMED,
        detail=detail,
    )


def _judge(
    *,
    n_sent: int,
    n_announced: int,
    n_matching: int,
    n_errors: int,
    n_out: int,
    n_agree: int,
    expected_rate: float,
    thresholds: Thresholds,
    opened_bit: int,
) -> VerificationReport:
    detection_rate = n_announced / n_sent if n_sent else 0.0
    qber = n_errors / n_matching if n_matching else None

    reason: RejectReason | None = None
    if n_sent == 0:
        reason = RejectReason.EMPTY_SESSION
    elif detection_rate < thresholds.rate_floor * expected_rate:
        reason = RejectReason.RATE
    elif detection_rate > thresholds.rate_ceiling * expected_rate:
        reason = RejectReason.RATE_ANOMALY
    elif qber is None:
        reason = RejectReason.NO_EVIDENCE
    elif qber > thresholds.qber_threshold:
        reason = RejectReason.QBER

    return VerificationReport(
        n_sent=n_sent,
        n_announced=n_announced,
        n_matching_basis=n_matching,
        n_matching_errors=n_errors,
        matching_qber=qber,
        n_out_of_basis=n_out,
        n_out_of_basis_agreements=n_agree,
        out_of_basis_agreement=n_agree / n_out if n_out else None,
        detection_rate=detection_rate,
        expected_rate=expected_rate,
        opened_bit=opened_bit,
        verdict=Verdict.ACCEPT if reason is None else Verdict.REJECT,
        reject_reason=reason,
    )


def bob_verify(
    records: Sequence[PulseRecord],
    announcement: Announcement,
    opening: OpeningRecord,
    thresholds: Thresholds,
    expected_rate: float,
) -> VerificationReport:
    """Check an opening against Bob's private log.

    Pure function of its arguments. Errors are counted over announced pulses
    whose prepared label lies in the opened basis; the detection rate is
    compared with ``expected_rate`` (honest per-pulse detection probability).
    """
    by_id = {r.pulse_id: r for r in records}
    n_sent = len(records)
    announced = announcement.detected_pulse_ids
    n_announced = len(announced)

    unknown = [i for i in announced if i not in by_id]
    if unknown:
        return _malformed(
            n_sent, n_announced, expected_rate, f"unknown pulse ids {unknown[:5]}"
        )
    if opening.basis is not basis_for_bit(opening.commitment_bit):
        return _malformed(
            n_sent,
            n_announced,
            expected_rate,
            f"basis {opening.basis.value} does not encode bit {opening.commitment_bit}",
        )
    if set(opening.outcomes) != set(announced):
        return _malformed(
            n_sent, n_announced, expected_rate, "outcomes not keyed by announcement"
        )
    opened_labels = opening.basis.labels
    if any(label not in opened_labels for label in opening.outcomes.values()):
        return _malformed(
            n_sent, n_announced, expected_rate, "outcome outside the opened basis"
        )

    n_matching = n_errors = n_out = n_agree = 0
    for pulse_id in announced:
        sent = by_id[pulse_id].label
        claimed = opening.outcomes[pulse_id]
        if sent in opened_labels:
            n_matching += 1
            n_errors += claimed != sent
        else:
            n_out += 1
            n_agree += detector_index(claimed) == detector_index(sent)

    return _judge(
        n_sent=n_sent,
        n_announced=n_announced,
        n_matching=n_matching,
        n_errors=n_errors,
        n_out=n_out,
        n_agree=n_agree,
        expected_rate=expected_rate,
        thresholds=thresholds,
        opened_bit=opening.commitment_bit,
    )


# ============================================================================
# Legacy (role-swapped) protocol
# ============================================================================


@dataclass(frozen=True)
class LegacySession:
    """Outcome of one role-swapped session."""

    records: list[PulseRecord]
    alice_results: dict[int, tuple[MeasBasis, StateLabel]]
    reveal: OpeningRecord
    report: VerificationReport


def alice_verify_legacy(
    sent_ids: Sequence[int],
    alice_results: Mapping[int, tuple[MeasBasis, StateLabel]],
    reveal: OpeningRecord,
    thresholds: Thresholds,
    expected_rate: float,
) -> VerificationReport:
    """Alice's check of Bob's opening in the role-swapped protocol.

    Applies the same rate floor, rate ceiling and QBER threshold as
    ``bob_verify``, with Alice's detections in place of an announcement.
    """
    n_sent = len(sent_ids)
    n_detected = len(alice_results)
    if reveal.basis is not basis_for_bit(reveal.commitment_bit):
        return _malformed(n_sent, n_detected, expected_rate, "basis/bit mismatch")
    if any(i not in reveal.outcomes for i in alice_results):
        return _malformed(n_sent, n_detected, expected_rate, "missing pulse labels")
    committed = reveal.basis.labels
    if any(label not in committed for label in reveal.outcomes.values()):
        return _malformed(
            n_sent, n_detected, expected_rate, "label outside the committed basis"
        )

    n_matching = n_errors = n_out = n_agree = 0
    for pulse_id, (basis, outcome) in alice_results.items():
        claimed = reveal.outcomes[pulse_id]
        if basis is reveal.basis:
            n_matching += 1
            n_errors += outcome != claimed
        else:
            n_out += 1
            n_agree += detector_index(outcome) == detector_index(claimed)

    return _judge(
        n_sent=n_sent,
        n_announced=n_detected,
        n_matching=n_matching,
        n_errors=n_errors,
        n_out=n_out,
        n_agree=n_agree,
        expected_rate=expected_rate,
        thresholds=thresholds,
        opened_bit=reveal.commitment_bit,
    )


def _random_basis(rng: np.random.Generator) -> MeasBasis:
    return COMMITMENT_BASES[int(rng.integers(2))]


def _random_label(basis: MeasBasis, rng: np.random.Generator) -> StateLabel:
    return basis.labels[int(rng.integers(2))]


def run_legacy_session(
    config: SimConfig,
    bob_bit: int,
    bob_cheats: bool,
    rng: np.random.Generator,
) -> LegacySession:
    """Run the role-swapped commitment where Bob commits.

    A cheating Bob emits pulses with the source's photon statistics. For each
    pulse, deferral succeeds with probability q: the pulse carries half of an
    entangled pair, so Alice sees a uniform outcome in her basis and the
    stored partner collapses onto it. At opening Bob measures the partner in
    the basis of the bit he now wants, flipping with probability 1 - f. When
    deferral fails, the pulse carries a definite BB84 state chosen before the
    bit, and Bob can only reveal it if it lies in the committed basis.
    """
    source, channel = config.source, config.channel
    adversary, thresholds = config.adversary, config.thresholds
    _validate_bit(bob_bit)
    committed = basis_for_bit(bob_bit)

    if bob_cheats:
        records = bob_prepare_session(source, rng)
    else:
        records = bob_prepare_session(source, rng, labels=committed.labels)

    expected_rate = expected_detection_probability(source, channel)
    alice_results: dict[int, tuple[MeasBasis, StateLabel]] = {}
    partners: dict[int, StateLabel] = {}

    for record in records:
        basis = _random_basis(rng)
        sent = record
        if bob_cheats and rng.random() < adversary.qnd_success_q:
            collapsed = _random_label(basis, rng)
            partners[record.pulse_id] = collapsed
            sent = record.model_copy(update={"label": collapsed})
        arrival = propagate_pulse(sent, source, channel, rng)
        outcome = measure_pulse(arrival.states, basis, channel, rng)
        if outcome is not None:
            alice_results[record.pulse_id] = (basis, outcome)

    if bob_cheats:
        labels = {}
        for record in records:
            partner = partners.get(record.pulse_id)
            if partner is None:
                if record.label in committed.labels:
                    labels[record.pulse_id] = record.label
                else:
                    labels[record.pulse_id] = _random_label(committed, rng)
                continue
            label = measure(state_of(partner), committed, rng)
            if rng.random() < 1.0 - adversary.storage_fidelity_f:
                label = orthogonal_label(label)
            labels[record.pulse_id] = label
        log.debug("Cheating Bob deferred %d of %d pulses", len(partners), len(records))
    else:
        labels = {r.pulse_id: r.label for r in records}

    reveal = OpeningRecord(commitment_bit=bob_bit, basis=committed, outcomes=labels)
    report = alice_verify_legacy(
        [r.pulse_id for r in records], alice_results, reveal, thresholds, expected_rate
    )
    log.debug(
        "Legacy session: sent=%d detected=%d verdict=%s",
        len(records),
        len(alice_results),
        report.verdict.value,
    )
    return LegacySession(
        records=records, alice_results=alice_results, reveal=reveal, report=report
    )
