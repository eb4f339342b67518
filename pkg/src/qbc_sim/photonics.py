"""Stochastic physics: faint pulses, channel loss and noise, UMZI and detectors."""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import PreconditionError
from .models import ChannelModel, PulseRecord, SourceModel
from .qstate import (
    BASIS_LABELS,
    MeasBasis,
    QubitState,
    StateLabel,
    orthogonal_label,
    relative_phase,
    state_of,
)

# Probability that a photon lands in the long-long or short-short window.
SIDE_PEAK_PROB = 0.5

# Bob's encoding phases and Alice's analysis phases.
LABEL_PHASE: dict[StateLabel, float] = {
    StateLabel.X: 0.0,
    StateLabel.Y: math.pi,
    StateLabel.L: math.pi / 2,
    StateLabel.R: 3 * math.pi / 2,
}
BASIS_PHASE: dict[MeasBasis, float] = {
    MeasBasis.XY: 0.0,
    MeasBasis.LR: math.pi / 2,
}


class UmziOutcome(str, Enum):
    DETECTOR0 = "detector0"
    DETECTOR1 = "detector1"
    SIDE_PEAK = "side_peak"


@dataclass(frozen=True)
class PulsePhysicalOutcome:
    """What physically reaches Alice for one pulse.

    Carries quantum states only; Bob's preparation label is not part of it.
    """

    pulse_id: int
    states: tuple[QubitState, ...] = field(default_factory=tuple)

    @property
    def photons_at_alice(self) -> int:
        return len(self.states)


def sample_photon_number(mu: float, rng: np.random.Generator) -> int:
    """Poisson photon number of a weak coherent pulse."""
    if mu < 0:
        raise PreconditionError(f"Mean photon number must be >= 0, got {mu}")
    if mu == 0:
        return 0
    return int(rng.poisson(mu))


def transmit(n: int, eta: float, rng: np.random.Generator) -> int:
    """Binomial thinning of ``n`` photons by transmittance ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise PreconditionError(f"Transmittance must lie in [0, 1], got {eta}")
    if n == 0 or eta == 1.0:
        return n
    if eta == 0.0:
        return 0
    return int(rng.binomial(n, eta))


def apply_channel_error(
    label: StateLabel, e: float, rng: np.random.Generator
) -> StateLabel:
    """Flip ``label`` to its basis partner with probability ``e``."""
    if label not in LABEL_PHASE:
        raise PreconditionError(
            f"Channel noise applies to BB84 labels only, got {label.value}"
        )
    return orthogonal_label(label) if rng.random() < e else label


def umzi_detect(
    phase_bob: float, phase_alice: float, v: float, rng: np.random.Generator
) -> UmziOutcome:
    """Route one photon through Alice's UMZI.

    Half of the photons fall into a side peak. In the central window detector 0
    fires with probability (1 + v*cos(dphi)) / 2.
    """
    if not 0.0 <= v <= 1.0:
        raise PreconditionError(f"Visibility must lie in [0, 1], got {v}")
    if rng.random() < SIDE_PEAK_PROB:
        return UmziOutcome.SIDE_PEAK
    p0 = (1.0 + v * math.cos(phase_bob - phase_alice)) / 2.0
    return UmziOutcome.DETECTOR0 if rng.random() < p0 else UmziOutcome.DETECTOR1


def detect(
    arrivals: int,
    detector_efficiency: float,
    dark_count_prob: float,
    rng: np.random.Generator,
) -> bool:
    """Threshold detector: at least one photon detected or a dark count."""
    p_silent = (1.0 - detector_efficiency) ** arrivals * (1.0 - dark_count_prob)
    return bool(rng.random() < 1.0 - p_silent)


def propagate_pulse(
    record: PulseRecord,
    source: SourceModel,
    channel: ChannelModel,
    rng: np.random.Generator,
) -> PulsePhysicalOutcome:
    """Emit, attenuate and disturb one of Bob's pulses."""
    emitted = 1 if source.single_photon else sample_photon_number(record.mu, rng)
    arrived = transmit(emitted, channel.transmittance_eta, rng)
    states = tuple(
        state_of(apply_channel_error(record.label, channel.qubit_error_e, rng))
        for _ in range(arrived)
    )
    return PulsePhysicalOutcome(pulse_id=record.pulse_id, states=states)


def measure_pulse(
    states: tuple[QubitState, ...],
    basis: MeasBasis,
    channel: ChannelModel,
    rng: np.random.Generator,
) -> StateLabel | None:
    """Honest time-bin measurement of one pulse in ``basis``.

    Returns the first click's outcome, or None when nothing clicks.
    """
    efficiency = channel.efficiency_for(basis)
    first, second = BASIS_LABELS[basis]
    for state in states:
        hit = umzi_detect(
            relative_phase(state), BASIS_PHASE[basis], channel.visibility_v, rng
        )
        if hit is UmziOutcome.SIDE_PEAK:
            continue
        if detect(1, efficiency, 0.0, rng):
            return first if hit is UmziOutcome.DETECTOR0 else second
    if channel.dark_count_prob > 0.0 and detect(0, 0.0, channel.dark_count_prob, rng):
        return first if rng.random() < 0.5 else second
    return None


def expected_detection_probability(
    source: SourceModel, channel: ChannelModel, basis: MeasBasis = MeasBasis.XY
) -> float:
    """Probability that an honest Alice announces a given pulse."""
    per_photon = (
        channel.transmittance_eta
        * channel.efficiency_for(basis)
        * (1.0 - SIDE_PEAK_PROB)
    )
    dark = channel.dark_count_prob
    if source.single_photon:
        return per_photon + (1.0 - per_photon) * dark
    return 1.0 - math.exp(-source.mean_photons_mu * per_photon) * (1.0 - dark)


def honest_qber(channel: ChannelModel) -> float:
    """Expected matching-basis error of an honest session."""
    e = channel.qubit_error_e
    visibility_error = (1.0 - channel.visibility_v) / 2.0
    return e * (1.0 - visibility_error) + (1.0 - e) * visibility_error
