"""
Pydantic models for simulator configuration, protocol messages and results.
"""

import math
from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .qstate import BB84_LABELS, COMMITMENT_BASES, MeasBasis, StateLabel

Probability = float

# ============================================================================
# Source & Channel Models
# ============================================================================


class SourceModel(BaseModel):
    """Bob's pulse source."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    mean_photons_mu: float = Field(0.2, ge=0.0)
    pulse_rate: float = Field(1.0, gt=0.0)
    session_duration: float = Field(2000.0, ge=0.0)
    single_photon: bool = False

    @property
    def expected_pulses(self) -> float:
        return self.pulse_rate * self.session_duration


class ChannelModel(BaseModel):
    """Loss and noise between Bob's source and Alice's detectors."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    transmittance_eta: Probability = Field(1.0, ge=0.0, le=1.0)
    qubit_error_e: Probability = Field(0.0, ge=0.0, le=1.0)
    visibility_v: Probability = Field(1.0, ge=0.0, le=1.0)
    detector_efficiency: Probability = Field(1.0, ge=0.0, le=1.0)
    dark_count_prob: Probability = Field(0.0, ge=0.0, le=1.0)
    # Multiplicative factors for Alice's XY and LR settings.
    basis_efficiency: tuple[Probability, Probability] = (1.0, 1.0)

    @field_validator("basis_efficiency")
    @classmethod
    def _check_basis_efficiency(
        cls, value: tuple[float, float]
    ) -> tuple[float, float]:
        if any(not 0.0 <= v <= 1.0 for v in value):
            raise ValueError("basis_efficiency factors must lie in [0, 1]")
        return value

    def efficiency_for(self, basis: MeasBasis) -> float:
        """Effective detector efficiency when Alice measures in ``basis``."""
        factor = self.basis_efficiency[COMMITMENT_BASES.index(basis)]
        return self.detector_efficiency * factor


# ============================================================================
# Adversary Models
# ============================================================================


class Strategy(str, Enum):
    """Alice's behaviour in the commit phase."""

    HONEST = "honest"
    BREIDBART = "breidbart"
    PAIR_SPLIT = "pair_split"
    DELAYED = "delayed"
    COMBINED = "combined"


class AdversaryConfig(BaseModel):
    """Cheating strategy and the technology available to it."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    strategy: Strategy = Strategy.HONEST
    qnd_success_q: Probability = Field(0.0, ge=0.0, le=1.0)
    storage_fidelity_f: Probability = Field(0.5, ge=0.0, le=1.0)
    exploit_pairs: bool = True
    forced_p2: Probability | None = Field(None, ge=0.0, le=1.0)


# ============================================================================
# Protocol Models
# ============================================================================


def basis_for_bit(bit: int) -> MeasBasis:
    """Public bit-to-basis convention: 0 -> XY, 1 -> LR."""
    return COMMITMENT_BASES[bit]


class PulseRecord(BaseModel):
    """Bob's private log entry for one sent pulse."""

    model_config = ConfigDict(frozen=True)

    pulse_id: int = Field(ge=0)
    send_time: float
    label: StateLabel
    mu: float = Field(ge=0.0)

    @field_validator("label")
    @classmethod
    def _check_bb84(cls, value: StateLabel) -> StateLabel:
        if value not in BB84_LABELS:
            raise ValueError(f"Pulses carry BB84 labels only, got {value.value}")
        return value


class Announcement(BaseModel):
    """Alice's commit-phase message: detection times only."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    detected_pulse_ids: list[int] = Field(default_factory=list)

    @field_validator("detected_pulse_ids")
    @classmethod
    def _check_sorted_unique(cls, value: list[int]) -> list[int]:
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("detected_pulse_ids must be strictly increasing")
        return value


class OpeningRecord(BaseModel):
    """Opening message: committed bit, its basis and per-pulse outcomes."""

    model_config = ConfigDict(frozen=True)

    commitment_bit: Literal[0, 1]
    basis: MeasBasis
    outcomes: dict[int, StateLabel] = Field(default_factory=dict)


class Verdict(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"


class RejectReason(str, Enum):
    MALFORMED = "malformed"
    EMPTY_SESSION = "empty_session"
    RATE = "rate"
    RATE_ANOMALY = "rate_anomaly"
    NO_EVIDENCE = "no_evidence"
    QBER = "qber"


class Thresholds(BaseModel):
    """Acceptance thresholds used by the verifier."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    qber_threshold: Probability = Field(0.05, ge=0.0, le=1.0)
    rate_floor: float = Field(0.5, ge=0.0, le=1.0)
    rate_ceiling: float = Field(1.5, ge=1.0)


class VerificationReport(BaseModel):
    """Verifier's summary of one opened session."""

    model_config = ConfigDict(frozen=True)

    n_sent: int = 0
    n_announced: int = 0
    n_matching_basis: int = 0
    n_matching_errors: int = 0
    matching_qber: float | None = None
    n_out_of_basis: int = 0
    n_out_of_basis_agreements: int = 0
    out_of_basis_agreement: float | None = None
    detection_rate: float = 0.0
    expected_rate: float = 0.0
    opened_bit: Literal[0, 1] | None = None
    verdict: Verdict = Verdict.REJECT
    reject_reason: RejectReason | None = None
    detail: str | None = None

    @model_validator(mode="after")
    def _check_consistency(self) -> "VerificationReport":
        if self.n_matching_basis > 0 and self.matching_qber is not None:
            expected = self.n_matching_errors / self.n_matching_basis
            if not math.isclose(self.matching_qber, expected, abs_tol=1e-12):
                raise ValueError("matching_qber disagrees with its counts")
        if (self.verdict is Verdict.ACCEPT) != (self.reject_reason is None):
            raise ValueError("A reject reason is required exactly for rejections")
        return self

    @property
    def accepted(self) -> bool:
        return self.verdict is Verdict.ACCEPT


# ============================================================================
# Transcript Models
# ============================================================================


class MessageKind(str, Enum):
    HEADER = "HEADER"
    PULSE_META = "PULSE_META"
    ANNOUNCE = "ANNOUNCE"
    OPEN = "OPEN"
    VERDICT = "VERDICT"


MESSAGE_ORDER: tuple[MessageKind, ...] = tuple(MessageKind)


class TranscriptMessage(BaseModel):
    """One line of a transcript file."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    session_id: str
    seq: int = Field(ge=0)
    kind: MessageKind
    payload: dict = Field(default_factory=dict)


# ============================================================================
# Harness Models
# ============================================================================


class ProtocolMode(str, Enum):
    PRIMARY = "primary"
    LEGACY = "legacy"


class SimConfig(BaseModel):
    """Full description of a Monte Carlo batch."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    source: SourceModel = Field(default_factory=SourceModel)
    channel: ChannelModel = Field(default_factory=ChannelModel)
    adversary: AdversaryConfig = Field(default_factory=AdversaryConfig)
    thresholds: Thresholds = Field(default_factory=Thresholds)
    protocol_mode: ProtocolMode = ProtocolMode.PRIMARY
    commitment_bit: Literal[0, 1] = 0
    legacy_bob_cheats: bool = False
    seed: int = Field(20240601, ge=0, lt=2**64)
    trials: int = Field(1, ge=1)
    basis_success_pulses: int = Field(200, ge=1)


class AggregateStats(BaseModel):
    """Pooled statistics of a Monte Carlo batch."""

    reports: list[VerificationReport] = Field(default_factory=list)
    n_sessions: int = 0
    n_announced: int = 0
    n_matching_basis: int = 0
    n_matching_errors: int = 0
    matching_qber: float | None = None
    qber_ci_lo: float | None = None
    qber_ci_hi: float | None = None
    n_out_of_basis: int = 0
    n_out_of_basis_agreements: int = 0
    out_of_basis_agreement: float | None = None
    realized_p2: float | None = None
    n_accepted: int = 0
    accept_fraction: float = 0.0
    wall_clock_seconds: float = 0.0


class SweepRow(BaseModel):
    """One row of a parameter sweep table."""

    param_value: float
    matching_qber: float | None = None
    qber_ci_lo: float | None = None
    qber_ci_hi: float | None = None
    out_of_basis_agreement: float | None = None
    realized_p2: float | None = None
    accept_fraction: float = 0.0
    n_announced: int = 0


class HidingTestResult(BaseModel):
    """Outcome of the two-sample chi-square hiding test."""

    statistic: float
    p_value: float
    n_bins: int
    dof: int
    counts_bit0: list[int] = Field(default_factory=list)
    counts_bit1: list[int] = Field(default_factory=list)
    note: str | None = None


class BasisSuccessRow(BaseModel):
    """Opening-stage success rates of one session."""

    session_index: int
    n_in_basis: int
    in_basis_success: float | None = None
    n_out_of_basis: int
    out_of_basis_success: float | None = None
