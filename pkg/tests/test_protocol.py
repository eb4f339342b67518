"""Tests for the commit/open state machines and both verifiers."""

import logging
import math

import numpy as np
import pytest

from qbc_sim.exceptions import PreconditionError
from qbc_sim.models import (
    AdversaryConfig,
    Announcement,
    ChannelModel,
    OpeningRecord,
    ProtocolMode,
    PulseRecord,
    RejectReason,
    SimConfig,
    SourceModel,
    Thresholds,
    Verdict,
)
from qbc_sim.photonics import expected_detection_probability
from qbc_sim.protocol import (
    alice_commit,
    alice_open,
    alice_verify_legacy,
    bob_prepare_session,
    bob_verify,
    run_legacy_session,
    transmit_session,
)
from qbc_sim.qstate import BB84_LABELS, MeasBasis, StateLabel


def _records(labels) -> list[PulseRecord]:
    return [
        PulseRecord(pulse_id=i, send_time=float(i), label=label, mu=0.2)
        for i, label in enumerate(labels)
    ]


def _honest_session(source, channel, bit, rng):
    records = bob_prepare_session(source, rng)
    arrivals = transmit_session(records, source, channel, rng)
    announcement, store = alice_commit(bit, arrivals, channel, rng)
    opening = alice_open(store, bit)
    expected = expected_detection_probability(source, channel)
    return records, announcement, opening, expected


class TestBobPrepareSession:
    """Tests for Bob's pulse log."""

    def test_pulse_count_near_expectation(self, rng):
        """200 expected pulses give between 150 and 250 sends."""
        records = bob_prepare_session(SourceModel(session_duration=200.0), rng)
        assert 150 <= len(records) <= 250

    def test_send_times_sorted_and_in_window(self, rng):
        records = bob_prepare_session(SourceModel(session_duration=500.0), rng)
        times = [r.send_time for r in records]
        assert times == sorted(times)
        assert all(0.0 <= t <= 500.0 for t in times)
        assert [r.pulse_id for r in records] == list(range(len(records)))

    def test_labels_uniform(self, rng):
        records = bob_prepare_session(SourceModel(session_duration=10_000.0), rng)
        n = len(records)
        for label in BB84_LABELS:
            freq = sum(r.label is label for r in records) / n
            assert freq == pytest.approx(0.25, abs=0.02)

    def test_zero_duration_is_empty(self, rng, caplog):
        """An empty session is valid but logged."""
        with caplog.at_level(logging.WARNING, logger="qbc_sim.protocol"):
            records = bob_prepare_session(SourceModel(session_duration=0.0), rng)
        assert records == []
        assert "no pulses" in caplog.text

    def test_restricted_labels(self, rng):
        records = bob_prepare_session(
            SourceModel(session_duration=300.0), rng, labels=MeasBasis.LR.labels
        )
        assert {r.label for r in records} <= {StateLabel.L, StateLabel.R}

    def test_pulse_record_rejects_breidbart_label(self):
        with pytest.raises(ValueError):
            PulseRecord(pulse_id=0, send_time=0.0, label=StateLabel.V1, mu=0.2)


class TestAliceCommit:
    """Tests for the commit phase."""

    def test_no_arrivals_empty_announcement(self, rng, ideal_channel):
        announcement, store = alice_commit(0, [], ideal_channel, rng)
        assert announcement.detected_pulse_ids == []
        assert store.outcomes == {}

    def test_single_photons_half_announced(self, rng, ideal_channel):
        """Only central-window photons click, about half of them."""
        source = SourceModel(single_photon=True, session_duration=10_000.0)
        records = bob_prepare_session(source, rng)
        arrivals = transmit_session(records, source, ideal_channel, rng)
        assert len(arrivals) == len(records)
        announcement, _ = alice_commit(1, arrivals, ideal_channel, rng)
        n = len(records)
        fraction = len(announcement.detected_pulse_ids) / n
        assert fraction == pytest.approx(0.5, abs=4 * math.sqrt(0.25 / n))

    def test_transmit_session_drops_vacuum(self, rng, ideal_channel, default_source):
        records = bob_prepare_session(default_source, rng)
        arrivals = transmit_session(records, default_source, ideal_channel, rng)
        assert all(a.photons_at_alice >= 1 for a in arrivals)
        assert len(arrivals) < len(records)

    def test_announcement_has_no_basis_field(self):
        """The public commit message carries detection ids only."""
        assert set(Announcement.model_fields) == {"detected_pulse_ids"}

    def test_announcement_must_be_sorted(self):
        with pytest.raises(ValueError):
            Announcement(detected_pulse_ids=[3, 1])

    def test_invalid_bit(self, rng, ideal_channel):
        with pytest.raises(PreconditionError):
            alice_commit(2, [], ideal_channel, rng)

    def test_opening_other_bit_is_flagged(self, rng, ideal_channel, caplog):
        _, store = alice_commit(0, [], ideal_channel, rng)
        with caplog.at_level(logging.WARNING, logger="qbc_sim.protocol"):
            opening = alice_open(store, 1)
        assert opening.basis is MeasBasis.LR
        assert "after committing to bit 0" in caplog.text


class TestBobVerify:
    """Tests for the primary-protocol verifier."""

    @pytest.mark.parametrize("bit", [0, 1])
    def test_ideal_honest_run(self, rng, ideal_channel, default_source, bit):
        records, announcement, opening, expected = _honest_session(
            default_source, ideal_channel, bit, rng
        )
        report = bob_verify(records, announcement, opening, Thresholds(), expected)
        assert report.matching_qber == 0.0
        assert report.verdict is Verdict.ACCEPT
        assert report.opened_bit == bit
        assert report.n_matching_basis + report.n_out_of_basis == report.n_announced

    def test_noisy_honest_run(self, rng):
        """e = 0.01 yields matching QBER 0.010 +- 0.003 and fair out-of-basis agreement."""
        source = SourceModel(single_photon=True, session_duration=200_000.0)
        channel = ChannelModel(qubit_error_e=0.01)
        records, announcement, opening, expected = _honest_session(
            source, channel, 0, rng
        )
        report = bob_verify(records, announcement, opening, Thresholds(), expected)
        assert report.n_announced >= 95_000
        assert report.matching_qber == pytest.approx(0.01, abs=0.003)
        assert report.out_of_basis_agreement == pytest.approx(0.5, abs=0.01)
        assert report.verdict is Verdict.ACCEPT

    def test_unknown_pulse_id_is_malformed(self):
        records = _records([StateLabel.X, StateLabel.Y])
        report = bob_verify(
            records,
            Announcement(detected_pulse_ids=[0, 5]),
            OpeningRecord(
                commitment_bit=0,
                basis=MeasBasis.XY,
                outcomes={0: StateLabel.X, 5: StateLabel.X},
            ),
            Thresholds(),
            0.5,
        )
        assert report.reject_reason is RejectReason.MALFORMED

    def test_wrong_basis_for_bit_is_malformed(self):
        records = _records([StateLabel.X])
        report = bob_verify(
            records,
            Announcement(detected_pulse_ids=[0]),
            OpeningRecord(
                commitment_bit=0, basis=MeasBasis.LR, outcomes={0: StateLabel.L}
            ),
            Thresholds(),
            0.5,
        )
        assert report.reject_reason is RejectReason.MALFORMED

    def test_label_outside_opened_basis_is_malformed(self):
        records = _records([StateLabel.X])
        report = bob_verify(
            records,
            Announcement(detected_pulse_ids=[0]),
            OpeningRecord(
                commitment_bit=0, basis=MeasBasis.XY, outcomes={0: StateLabel.L}
            ),
            Thresholds(),
            0.5,
        )
        assert report.reject_reason is RejectReason.MALFORMED
        assert report.verdict is Verdict.REJECT

    def test_outcomes_must_cover_announcement(self):
        records = _records([StateLabel.X, StateLabel.Y])
        report = bob_verify(
            records,
            Announcement(detected_pulse_ids=[0, 1]),
            OpeningRecord(
                commitment_bit=0, basis=MeasBasis.XY, outcomes={0: StateLabel.X}
            ),
            Thresholds(),
            0.5,
        )
        assert report.reject_reason is RejectReason.MALFORMED

    def test_empty_session(self):
        report = bob_verify(
            [],
            Announcement(),
            OpeningRecord(commitment_bit=1, basis=MeasBasis.LR),
            Thresholds(),
            0.1,
        )
        assert report.reject_reason is RejectReason.EMPTY_SESSION

    def test_silent_alice_fails_rate(self):
        records = _records([StateLabel.X] * 100)
        report = bob_verify(
            records,
            Announcement(),
            OpeningRecord(commitment_bit=0, basis=MeasBasis.XY),
            Thresholds(),
            0.1,
        )
        assert report.reject_reason is RejectReason.RATE
        assert report.detection_rate == 0.0

    def test_announcing_everything_is_anomalous(self):
        records = _records([StateLabel.X] * 100)
        report = bob_verify(
            records,
            Announcement(detected_pulse_ids=list(range(100))),
            OpeningRecord(
                commitment_bit=0,
                basis=MeasBasis.XY,
                outcomes={i: StateLabel.X for i in range(100)},
            ),
            Thresholds(),
            0.1,
        )
        assert report.reject_reason is RejectReason.RATE_ANOMALY

    def test_no_matching_pulses_is_no_evidence(self):
        records = _records([StateLabel.L, StateLabel.R])
        report = bob_verify(
            records,
            Announcement(detected_pulse_ids=[0, 1]),
            OpeningRecord(
                commitment_bit=0,
                basis=MeasBasis.XY,
                outcomes={0: StateLabel.X, 1: StateLabel.X},
            ),
            Thresholds(),
            1.0,
        )
        assert report.reject_reason is RejectReason.NO_EVIDENCE
        assert report.matching_qber is None
        assert report.n_out_of_basis == 2
        # X agrees with L (both detector 0), disagrees with R.
        assert report.n_out_of_basis_agreements == 1

    def test_wrong_claims_fail_qber(self):
        records = _records([StateLabel.X, StateLabel.Y, StateLabel.X, StateLabel.Y])
        report = bob_verify(
            records,
            Announcement(detected_pulse_ids=[0, 1, 2, 3]),
            OpeningRecord(
                commitment_bit=0,
                basis=MeasBasis.XY,
                outcomes={
                    0: StateLabel.X,
                    1: StateLabel.Y,
                    2: StateLabel.Y,
                    3: StateLabel.Y,
                },
            ),
            Thresholds(),
            1.0,
        )
        assert report.reject_reason is RejectReason.QBER
        assert report.matching_qber == pytest.approx(0.25)

    def test_verify_is_pure(self, rng, ideal_channel, default_source):
        records, announcement, opening, expected = _honest_session(
            default_source, ideal_channel, 1, rng
        )
        first = bob_verify(records, announcement, opening, Thresholds(), expected)
        second = bob_verify(records, announcement, opening, Thresholds(), expected)
        assert first == second


class TestLegacyProtocol:
    """Tests for the role-swapped commitment where Bob commits."""

    @staticmethod
    def _config(**adversary) -> SimConfig:
        return SimConfig(
            protocol_mode=ProtocolMode.LEGACY,
            source=SourceModel(session_duration=20_000.0),
            adversary=AdversaryConfig(**adversary),
        )

    @pytest.mark.parametrize("bit", [0, 1])
    def test_honest_bob_accepted(self, rng, bit):
        session = run_legacy_session(self._config(), bit, False, rng)
        report = session.report
        assert report.n_matching_errors == 0
        assert report.verdict is Verdict.ACCEPT
        committed = MeasBasis.XY if bit == 0 else MeasBasis.LR
        assert {r.label for r in session.records} <= set(committed.labels)
        assert report.out_of_basis_agreement == pytest.approx(0.5, abs=0.07)

    @pytest.mark.parametrize("bit", [0, 1])
    def test_perfect_memory_cheat_is_invisible(self, rng, bit):
        config = self._config(qnd_success_q=1.0, storage_fidelity_f=1.0)
        report = run_legacy_session(config, bit, True, rng).report
        assert report.n_matching_basis > 0
        assert report.n_matching_errors == 0
        assert report.verdict is Verdict.ACCEPT

    def test_imperfect_memory_shows_flip_rate(self, rng):
        config = self._config(qnd_success_q=1.0, storage_fidelity_f=0.9)
        report = run_legacy_session(config, 1, True, rng).report
        assert report.matching_qber == pytest.approx(0.1, abs=0.04)
        assert report.reject_reason is RejectReason.QBER

    @pytest.mark.parametrize(
        ("q", "expected_qber"), [(0.0, 0.25), (0.5, 0.125), (1.0, 0.0)]
    )
    def test_deferral_success_sets_qber(self, q, expected_qber):
        """Failed deferrals leave definite states that miss the basis half the time."""
        config = self._config(qnd_success_q=q, storage_fidelity_f=1.0)
        report = run_legacy_session(
            config, 0, True, np.random.default_rng(17)
        ).report
        assert report.matching_qber == pytest.approx(expected_qber, abs=0.06)

    def test_deferral_success_changes_outcomes(self):
        reports = [
            run_legacy_session(
                self._config(qnd_success_q=q, storage_fidelity_f=1.0),
                1,
                True,
                np.random.default_rng(17),
            ).report
            for q in (0.01, 0.5, 1.0)
        ]
        qbers = [r.matching_qber for r in reports]
        assert qbers[0] > qbers[1] > qbers[2]

    def test_cheating_bob_matches_honest_rate(self, rng):
        config = self._config(qnd_success_q=1.0, storage_fidelity_f=1.0)
        report = run_legacy_session(config, 0, True, rng).report
        assert report.detection_rate == pytest.approx(report.expected_rate, rel=0.1)

    def test_legacy_verifier_rejects_low_rate(self):
        reveal = OpeningRecord(
            commitment_bit=0, basis=MeasBasis.XY, outcomes={0: StateLabel.X}
        )
        results = {0: (MeasBasis.XY, StateLabel.X)}
        report = alice_verify_legacy(range(100), results, reveal, Thresholds(), 0.1)
        assert report.reject_reason is RejectReason.RATE

    def test_legacy_verifier_rejects_rate_anomaly(self):
        reveal = OpeningRecord(
            commitment_bit=0,
            basis=MeasBasis.XY,
            outcomes={i: StateLabel.X for i in range(4)},
        )
        results = {i: (MeasBasis.XY, StateLabel.X) for i in range(4)}
        report = alice_verify_legacy(range(4), results, reveal, Thresholds(), 0.1)
        assert report.reject_reason is RejectReason.RATE_ANOMALY

    def test_reveal_with_foreign_labels_is_malformed(self):
        reveal = OpeningRecord(
            commitment_bit=0, basis=MeasBasis.XY, outcomes={0: StateLabel.R}
        )
        report = alice_verify_legacy(
            [0], {0: (MeasBasis.XY, StateLabel.X)}, reveal, Thresholds(), 0.1
        )
        assert report.reject_reason is RejectReason.MALFORMED

    def test_legacy_verifier_counts_bases(self):
        reveal = OpeningRecord(
            commitment_bit=0,
            basis=MeasBasis.XY,
            outcomes={0: StateLabel.X, 1: StateLabel.Y, 2: StateLabel.X},
        )
        results = {
            0: (MeasBasis.XY, StateLabel.X),
            1: (MeasBasis.XY, StateLabel.X),
            2: (MeasBasis.LR, StateLabel.L),
        }
        report = alice_verify_legacy([0, 1, 2], results, reveal, Thresholds(), 1.0)
        assert report.n_matching_basis == 2
        assert report.n_matching_errors == 1
        assert report.n_out_of_basis_agreements == 1


def test_session_streams_are_reproducible(ideal_channel, default_source):
    """Same seed, same session."""
    first = _honest_session(
        default_source, ideal_channel, 0, np.random.default_rng(11)
    )
    second = _honest_session(
        default_source, ideal_channel, 0, np.random.default_rng(11)
    )
    assert first[1] == second[1]
    assert first[2] == second[2]
