"""Two-dimensional qubit arithmetic in the time-bin basis {|A>, |B>}.

Houses the four BB84 states, the four Breidbart states, squared overlaps and
Born-rule sampling. Polarization labels (X, Y, L, R) and time-bin amplitudes
are the same objects: every state is stored by its |A>/|B> amplitudes.
"""

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import StateValidationError

# Tolerance for caller-provided states; constructed states are exact to ~1e-16.
INPUT_NORM_TOLERANCE = 1e-9
CONSTRUCTED_NORM_TOLERANCE = 1e-12

SIN2_PI_8 = math.sin(math.pi / 8) ** 2
COS2_PI_8 = math.cos(math.pi / 8) ** 2


class StateLabel(str, Enum):
    """Named qubit states: BB84 send labels and Breidbart outcome labels."""

    X = "X"
    Y = "Y"
    L = "L"
    R = "R"
    V1 = "V1"
    U1 = "U1"
    V2 = "V2"
    U2 = "U2"

    @property
    def is_bb84(self) -> bool:
        return self in BB84_LABELS


class MeasBasis(str, Enum):
    """Projective measurement bases (ordered pairs of labels)."""

    XY = "XY"
    LR = "LR"
    B1 = "B1"
    B2 = "B2"

    @property
    def labels(self) -> tuple[StateLabel, StateLabel]:
        return BASIS_LABELS[self]


BB84_LABELS: tuple[StateLabel, ...] = (
    StateLabel.X,
    StateLabel.Y,
    StateLabel.L,
    StateLabel.R,
)
BREIDBART_LABELS: tuple[StateLabel, ...] = (
    StateLabel.V1,
    StateLabel.U1,
    StateLabel.V2,
    StateLabel.U2,
)

BASIS_LABELS: dict[MeasBasis, tuple[StateLabel, StateLabel]] = {
    MeasBasis.XY: (StateLabel.X, StateLabel.Y),
    MeasBasis.LR: (StateLabel.L, StateLabel.R),
    MeasBasis.B1: (StateLabel.V1, StateLabel.U1),
    MeasBasis.B2: (StateLabel.V2, StateLabel.U2),
}

COMMITMENT_BASES: tuple[MeasBasis, MeasBasis] = (MeasBasis.XY, MeasBasis.LR)
BREIDBART_BASES: tuple[MeasBasis, MeasBasis] = (MeasBasis.B1, MeasBasis.B2)


@dataclass(frozen=True, slots=True)
class QubitState:
    """A pure qubit state a|A> + b|B>.

    Global phase is kept as constructed; only squared overlaps are meaningful.
    """

    amp_a: complex
    amp_b: complex

    @property
    def norm(self) -> float:
        return math.sqrt(abs(self.amp_a) ** 2 + abs(self.amp_b) ** 2)

    def is_normalized(self, tolerance: float = INPUT_NORM_TOLERANCE) -> bool:
        return abs(self.norm - 1.0) <= tolerance

    def as_vector(self) -> np.ndarray:
        """Return the amplitudes as a complex numpy vector."""
        return np.array([self.amp_a, self.amp_b], dtype=complex)

    def __add__(self, other: "QubitState") -> "QubitState":
        return QubitState(self.amp_a + other.amp_a, self.amp_b + other.amp_b)

    def __rmul__(self, scalar: complex) -> "QubitState":
        return QubitState(scalar * self.amp_a, scalar * self.amp_b)


def _bb84_states() -> dict[StateLabel, QubitState]:
    h = 1 / math.sqrt(2)
    return {
        StateLabel.X: QubitState(h, h),
        StateLabel.Y: QubitState(h, -h),
        StateLabel.L: QubitState(h, 1j * h),
        StateLabel.R: QubitState(h, -1j * h),
    }


def _breidbart_states(
    bb84: dict[StateLabel, QubitState],
) -> dict[StateLabel, QubitState]:
    # Coefficients are given in the {|X>, |Y>} basis and expanded into {|A>, |B>}.
    s = math.sin(math.pi / 8)
    c = math.cos(math.pi / 8)
    x, y = bb84[StateLabel.X], bb84[StateLabel.Y]
    return {
        StateLabel.V1: s * x + 1j * c * y,
        StateLabel.U1: c * x + -1j * s * y,
        StateLabel.V2: s * x + -1j * c * y,
        StateLabel.U2: c * x + 1j * s * y,
    }


_BB84 = _bb84_states()
_STATES: dict[StateLabel, QubitState] = {**_BB84, **_breidbart_states(_BB84)}


def state_of(label: StateLabel) -> QubitState:
    """Return the exact state for a named label."""
    return _STATES[StateLabel(label)]


def _require_normalized(state: QubitState) -> None:
    if not state.is_normalized(INPUT_NORM_TOLERANCE):
        raise StateValidationError(
            f"Qubit state is not normalized (norm={state.norm!r})", norm=state.norm
        )


def overlap_prob(s: QubitState, t: QubitState) -> float:
    """Return |<s|t>|^2 for two unit-norm states.

    Raises:
        StateValidationError: If either norm deviates from 1 by more than 1e-9.
    """
    _require_normalized(s)
    _require_normalized(t)
    inner = s.amp_a.conjugate() * t.amp_a + s.amp_b.conjugate() * t.amp_b
    return min(1.0, abs(inner) ** 2)


def outcome_probabilities(s: QubitState, basis: MeasBasis) -> tuple[float, float]:
    """Born probabilities of the two outcomes of ``basis`` on state ``s``."""
    first, second = BASIS_LABELS[basis]
    return overlap_prob(state_of(first), s), overlap_prob(state_of(second), s)


def measure(s: QubitState, basis: MeasBasis, rng: np.random.Generator) -> StateLabel:
    """Projectively measure ``s`` in ``basis`` (demolition: no post-state)."""
    first, second = BASIS_LABELS[basis]
    p_first = overlap_prob(state_of(first), s)
    return first if rng.random() < p_first else second


def relative_phase(s: QubitState) -> float:
    """Phase of |B> relative to |A> in [0, 2*pi), as a UMZI would encode it."""
    phase = cmath.phase(s.amp_b) - cmath.phase(s.amp_a)
    return phase % (2 * math.pi)


def basis_of(label: StateLabel) -> MeasBasis:
    """Return the basis a label belongs to."""
    for basis, labels in BASIS_LABELS.items():
        if label in labels:
            return basis
    raise KeyError(label)


def orthogonal_label(label: StateLabel) -> StateLabel:
    """Return the other vector of the label's basis (X<->Y, L<->R, ...)."""
    first, second = BASIS_LABELS[basis_of(label)]
    return second if label == first else first


def detector_index(label: StateLabel) -> int:
    """Index of a label within its basis: 0 for X, L, V1, V2 and 1 otherwise."""
    return BASIS_LABELS[basis_of(label)].index(label)
