"""Seeded Monte Carlo execution of commitment sessions.

Each session draws from its own stream, ``SeedSequence(seed,
spawn_key=(session_index,))``, so sessions can run in any order or
concurrently and still reproduce bit for bit.
"""

import asyncio
import csv
import io
import logging
import math
import time
import types
import typing
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ValidationError

from .adversary import rate_budget, run_strategy
from .config import get_settings
from .exceptions import ConfigurationError, InvariantViolationError, PreconditionError
from .models import (
    AdversaryConfig,
    AggregateStats,
    BasisSuccessRow,
    HidingTestResult,
    ProtocolMode,
    RejectReason,
    SimConfig,
    Strategy,
    SweepRow,
    VerificationReport,
)
from .photonics import expected_detection_probability
from .protocol import (
    alice_commit,
    alice_open,
    bob_prepare_session,
    bob_verify,
    run_legacy_session,
    transmit_session,
)
from .stats import ratio, two_sample_chi_square, wilson_interval
from .transcript import Transcript, TranscriptStore, build_transcript

log = logging.getLogger(__name__)

MIN_SESSIONS_PER_BIT = 30
BASIS_SUCCESS_SESSIONS = 5

SWEEP_COLUMNS = (
    "param_value",
    "matching_qber",
    "qber_ci_lo",
    "qber_ci_hi",
    "out_of_basis_agreement",
    "realized_p2",
    "accept_fraction",
    "n_announced",
)


@dataclass(frozen=True)
class SessionOutcome:
    session_index: int
    transcript: Transcript
    report: VerificationReport
    realized_p2: float | None = None


def session_rng(seed: int, session_index: int) -> np.random.Generator:
    """Independent stream for one session of a batch."""
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(session_index,))
    )


def _check_report(report: VerificationReport) -> None:
    classified = report.n_matching_basis + report.n_out_of_basis
    if report.reject_reason is not RejectReason.MALFORMED:
        if classified != report.n_announced:
            raise InvariantViolationError(
                f"Matching ({report.n_matching_basis}) + out-of-basis "
                f"({report.n_out_of_basis}) != announced ({report.n_announced})"
            )
    if report.n_announced > report.n_sent:
        raise InvariantViolationError("More announcements than sent pulses")


def _execute_session(config: SimConfig, session_index: int) -> SessionOutcome:
    rng = session_rng(config.seed, session_index)
    source, channel = config.source, config.channel
    bit = config.commitment_bit

    if config.protocol_mode is ProtocolMode.LEGACY:
        legacy = run_legacy_session(config, bit, config.legacy_bob_cheats, rng)
        transcript = build_transcript(
            config, session_index, len(legacy.records), legacy.report, legacy.reveal
        )
        _check_report(legacy.report)
        return SessionOutcome(session_index, transcript, legacy.report)

    records = bob_prepare_session(source, rng)
    arrivals = transmit_session(records, source, channel, rng)
    expected_rate = expected_detection_probability(source, channel)
    realized_p2 = None

    if config.adversary.strategy is Strategy.HONEST:
        announcement, store = alice_commit(bit, arrivals, channel, rng)
        opening = alice_open(store, bit)
    else:
        n_pulses = len(records)
        cheat = run_strategy(
            arrivals,
            config.adversary,
            announce_cap=round(n_pulses * expected_rate),
            budget=rate_budget(
                source, channel, config.thresholds.rate_floor, n_pulses=n_pulses
            ),
            rng=rng,
        )
        announcement = cheat.announcement
        opening = cheat.store.open(bit, rng)
        realized_p2 = cheat.realized_p2

    report = bob_verify(
        records, announcement, opening, config.thresholds, expected_rate
    )
    _check_report(report)
    transcript = build_transcript(
        config, session_index, len(records), report, opening, announcement
    )
    log.debug(
        "Session %d: sent=%d announced=%d qber=%s verdict=%s",
        session_index,
        report.n_sent,
        report.n_announced,
        report.matching_qber,
        report.verdict.value,
    )
    return SessionOutcome(session_index, transcript, report, realized_p2)


def run_session(
    config: SimConfig, session_index: int
) -> tuple[Transcript, VerificationReport]:
    """Prepare, transmit, commit, open and verify one session."""
    outcome = _execute_session(config, session_index)
    return outcome.transcript, outcome.report


# ============================================================================
# Batches
# ============================================================================


async def _run_sessions(
    config: SimConfig, indices: Iterable[int], parallelism: int
) -> list[SessionOutcome]:
    semaphore = asyncio.Semaphore(max(1, parallelism))

    async def run_one(index: int) -> SessionOutcome:
        async with semaphore:
            return await asyncio.to_thread(_execute_session, config, index)

    outcomes = await asyncio.gather(*(run_one(i) for i in indices))
    return sorted(outcomes, key=lambda o: o.session_index)


def aggregate(
    outcomes: Sequence[SessionOutcome], wall_clock_seconds: float = 0.0
) -> AggregateStats:
    """Pool integer counts over sessions; order of ``outcomes`` is irrelevant."""
    ordered = sorted(outcomes, key=lambda o: o.session_index)
    reports = [o.report for o in ordered]
    n_matching = sum(r.n_matching_basis for r in reports)
    n_errors = sum(r.n_matching_errors for r in reports)
    n_out = sum(r.n_out_of_basis for r in reports)
    n_agree = sum(r.n_out_of_basis_agreements for r in reports)
    n_accepted = sum(r.accepted for r in reports)
    p2_values = [o.realized_p2 for o in ordered if o.realized_p2 is not None]

    ci = wilson_interval(n_errors, n_matching)
    accept_fraction = n_accepted / len(reports) if reports else 0.0
    if not 0.0 <= accept_fraction <= 1.0:
        raise InvariantViolationError(f"accept_fraction {accept_fraction} out of range")
    if ci is not None and not 0.0 <= ci[0] <= ci[1] <= 1.0:
        raise InvariantViolationError(f"Wilson interval {ci} out of range")

    return AggregateStats(
        reports=reports,
        n_sessions=len(reports),
        n_announced=sum(r.n_announced for r in reports),
        n_matching_basis=n_matching,
        n_matching_errors=n_errors,
        matching_qber=ratio(n_errors, n_matching),
        qber_ci_lo=ci[0] if ci else None,
        qber_ci_hi=ci[1] if ci else None,
        n_out_of_basis=n_out,
        n_out_of_basis_agreements=n_agree,
        out_of_basis_agreement=ratio(n_agree, n_out),
        realized_p2=math.fsum(p2_values) / len(p2_values) if p2_values else None,
        n_accepted=n_accepted,
        accept_fraction=accept_fraction,
        wall_clock_seconds=wall_clock_seconds,
    )


async def run_monte_carlo_async(
    config: SimConfig,
    parallelism: int | None = None,
    transcript_store: TranscriptStore | None = None,
) -> AggregateStats:
    """Run ``config.trials`` sessions concurrently and pool the results."""
    if parallelism is None:
        parallelism = get_settings().parallelism
    started = time.perf_counter()
    outcomes = await _run_sessions(config, range(config.trials), parallelism)
    if transcript_store is not None:
        for outcome in outcomes:
            transcript_store.write(outcome.transcript)
    stats = aggregate(outcomes, wall_clock_seconds=time.perf_counter() - started)
    log.info(
        "Batch of %d sessions: qber=%s accept=%.3f",
        stats.n_sessions,
        stats.matching_qber,
        stats.accept_fraction,
    )
    return stats


def run_monte_carlo(
    config: SimConfig,
    parallelism: int | None = None,
    transcript_store: TranscriptStore | None = None,
) -> AggregateStats:
    """Synchronous wrapper around :func:`run_monte_carlo_async`."""
    return asyncio.run(run_monte_carlo_async(config, parallelism, transcript_store))


# ============================================================================
# Hiding test
# ============================================================================


def hiding_test(
    config: SimConfig, sessions_per_bit: int, parallelism: int = 1
) -> HidingTestResult:
    """Compare announced-count distributions of honest sessions for bit 0 and 1.

    Raises:
        PreconditionError: If fewer than 30 sessions per bit are requested.
    """
    if sessions_per_bit < MIN_SESSIONS_PER_BIT:
        raise PreconditionError(
            f"hiding_test needs >= {MIN_SESSIONS_PER_BIT} sessions per bit, "
            f"got {sessions_per_bit}"
        )
    honest = config.model_copy(
        update={
            "adversary": AdversaryConfig(strategy=Strategy.HONEST),
            "protocol_mode": ProtocolMode.PRIMARY,
        }
    )
    counts: list[list[int]] = []
    for bit in (0, 1):
        per_bit = honest.model_copy(update={"commitment_bit": bit})
        indices = range(bit * sessions_per_bit, (bit + 1) * sessions_per_bit)
        outcomes = asyncio.run(_run_sessions(per_bit, indices, parallelism))
        counts.append([o.report.n_announced for o in outcomes])
    result = two_sample_chi_square(counts[0], counts[1])
    log.info("Hiding test: chi2=%.4g p=%.4g", result.statistic, result.p_value)
    return result


# ============================================================================
# Sweeps
# ============================================================================


def _is_numeric(annotation: object) -> bool:
    if annotation in (int, float):
        return True
    if typing.get_origin(annotation) in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(annotation) if a is not type(None)]
        return bool(args) and all(a in (int, float) for a in args)
    return False


def with_parameter(config: SimConfig, parameter_path: str, value: float) -> SimConfig:
    """Return a copy of ``config`` with the numeric field at ``parameter_path`` set.

    Raises:
        PreconditionError: If the path does not name a numeric field.
        ConfigurationError: If the new value fails validation.
    """
    parts = parameter_path.split(".")
    model: type[BaseModel] = SimConfig
    for part in parts[:-1]:
        info = model.model_fields.get(part)
        annotation = info.annotation if info else None
        if not (isinstance(annotation, type) and issubclass(annotation, BaseModel)):
            raise PreconditionError(f"{parameter_path!r} is not a config path")
        model = annotation
    leaf = model.model_fields.get(parts[-1])
    if leaf is None or not _is_numeric(leaf.annotation):
        raise PreconditionError(f"{parameter_path!r} is not a numeric config field")

    data = config.model_dump()
    node = data
    for part in parts[:-1]:
        node = node[part]
    node[parts[-1]] = value
    try:
        return SimConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"{parameter_path}={value!r} is invalid: {e}") from e


def sweep(
    config: SimConfig,
    parameter_path: str,
    values: Sequence[float],
    parallelism: int | None = None,
) -> list[SweepRow]:
    """One Monte Carlo batch per value of ``parameter_path``."""
    configs = [with_parameter(config, parameter_path, v) for v in values]
    rows = []
    for value, swept in zip(values, configs):
        stats = run_monte_carlo(swept, parallelism)
        rows.append(
            SweepRow(
                param_value=value,
                matching_qber=stats.matching_qber,
                qber_ci_lo=stats.qber_ci_lo,
                qber_ci_hi=stats.qber_ci_hi,
                out_of_basis_agreement=stats.out_of_basis_agreement,
                realized_p2=stats.realized_p2,
                accept_fraction=stats.accept_fraction,
                n_announced=stats.n_announced,
            )
        )
    return rows


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    """Render sweep rows with the fixed sweep header."""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(
            {k: "" if v is None else v for k, v in row.model_dump().items()}
        )
    return buffer.getvalue()


# ============================================================================
# In-basis vs out-of-basis success
# ============================================================================


def basis_success_experiment(
    config: SimConfig, sessions: int = BASIS_SUCCESS_SESSIONS
) -> list[BasisSuccessRow]:
    """Opening-stage success rates of honest sessions, in and out of basis.

    Each session lasts long enough for ``config.basis_success_pulses`` pulses
    to be sent on average. Sessions with no opened qubit in a basis report
    ``None`` for that success rate.
    """
    source = config.source
    duration = config.basis_success_pulses / source.pulse_rate
    sized = config.model_copy(
        update={
            "source": source.model_copy(update={"session_duration": duration}),
            "adversary": AdversaryConfig(strategy=Strategy.HONEST),
            "protocol_mode": ProtocolMode.PRIMARY,
        }
    )
    rows = []
    for index in range(sessions):
        _, report = run_session(sized, index)
        qber = report.matching_qber
        rows.append(
            BasisSuccessRow(
                session_index=index,
                n_in_basis=report.n_matching_basis,
                in_basis_success=None if qber is None else 1.0 - qber,
                n_out_of_basis=report.n_out_of_basis,
                out_of_basis_success=report.out_of_basis_agreement,
            )
        )
    return rows
