"""Session transcripts: construction, JSONL codec and file storage."""

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from pydantic import ValidationError

from .exceptions import TranscriptError
from .models import (
    MESSAGE_ORDER,
    Announcement,
    MessageKind,
    OpeningRecord,
    ProtocolMode,
    SimConfig,
    TranscriptMessage,
    VerificationReport,
)

SCHEMA_VERSION = 1


def config_hash(config: SimConfig) -> str:
    """SHA-256 of the canonical JSON form of a config."""
    return hashlib.sha256(config.model_dump_json().encode("utf-8")).hexdigest()


def session_id_for(config: SimConfig, session_index: int) -> str:
    return f"{config_hash(config)[:12]}-{session_index:06d}"


def _dumps(data: dict) -> str:
    # Python floats serialize via repr: shortest round-trip form, <= 17 digits.
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def opening_payload(opening: OpeningRecord) -> dict:
    return {
        "commitment_bit": opening.commitment_bit,
        "basis": opening.basis.value,
        "outcomes": {
            str(pulse_id): opening.outcomes[pulse_id].value
            for pulse_id in sorted(opening.outcomes)
        },
    }


@dataclass
class Transcript:
    """Ordered protocol messages of one session."""

    session_id: str
    messages: list[TranscriptMessage] = field(default_factory=list)

    def append(self, kind: MessageKind, payload: dict) -> TranscriptMessage:
        """Append a message, enforcing the HEADER .. VERDICT order."""
        if self.messages:
            previous = self.messages[-1].kind
            if MESSAGE_ORDER.index(kind) <= MESSAGE_ORDER.index(previous):
                raise TranscriptError(
                    f"{kind.value} cannot follow {previous.value}",
                    seq=len(self.messages),
                )
        elif kind is not MessageKind.HEADER:
            raise TranscriptError("Transcript must start with HEADER", seq=0)
        message = TranscriptMessage(
            session_id=self.session_id,
            seq=len(self.messages),
            kind=kind,
            payload=payload,
        )
        self.messages.append(message)
        return message

    @property
    def kinds(self) -> list[MessageKind]:
        return [m.kind for m in self.messages]

    def to_jsonl(self) -> str:
        return "".join(
            _dumps(m.model_dump(mode="json")) + "\n" for m in self.messages
        )

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        """Parse and re-validate a transcript."""
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            raise TranscriptError("Empty transcript")
        try:
            parsed = [TranscriptMessage.model_validate_json(line) for line in lines]
        except ValidationError as e:
            raise TranscriptError(f"Invalid transcript message: {e}") from e
        transcript = cls(session_id=parsed[0].session_id)
        for expected_seq, message in enumerate(parsed):
            same_session = message.session_id == transcript.session_id
            if message.seq != expected_seq or not same_session:
                raise TranscriptError(
                    f"Unexpected message {message.session_id}#{message.seq}",
                    seq=expected_seq,
                )
            transcript.append(message.kind, message.payload)
        return transcript


def build_transcript(
    config: SimConfig,
    session_index: int,
    n_pulses: int,
    report: VerificationReport,
    opening: OpeningRecord,
    announcement: Announcement | None = None,
) -> Transcript:
    """Assemble the public transcript of a finished session."""
    transcript = Transcript(session_id=session_id_for(config, session_index))
    transcript.append(
        MessageKind.HEADER,
        {
            "schema_version": SCHEMA_VERSION,
            "config_hash": config_hash(config),
            "seed": config.seed,
            "session_index": session_index,
            "protocol_mode": config.protocol_mode.value,
        },
    )
    transcript.append(
        MessageKind.PULSE_META,
        {
            "n_pulses": n_pulses,
            "pulse_rate": config.source.pulse_rate,
            "session_duration": config.source.session_duration,
        },
    )
    if announcement is not None:
        transcript.append(MessageKind.ANNOUNCE, announcement.model_dump(mode="json"))
    elif config.protocol_mode is ProtocolMode.PRIMARY:
        raise TranscriptError("Primary-protocol transcripts need an ANNOUNCE")
    transcript.append(MessageKind.OPEN, opening_payload(opening))
    transcript.append(MessageKind.VERDICT, report.model_dump(mode="json"))
    return transcript


class TranscriptStore:
    """File-based transcript persistence, one JSONL file per session."""

    def __init__(self, directory: str) -> None:
        """Initialize the store.

        Args:
            directory: Target directory (supports ~ expansion).
        """
        self._directory = Path(os.path.expanduser(directory))
        self._ensure_directory()

    def _ensure_directory(self) -> None:
        if not self._directory.exists():
            self._directory.mkdir(parents=True, mode=0o755)

    def path_for(self, session_id: str) -> Path:
        return self._directory / f"{session_id}.jsonl"

    def write(self, transcript: Transcript) -> Path:
        """Write a transcript atomically and return its path."""
        self._ensure_directory()
        path = self.path_for(transcript.session_id)

        # Write to temp file first, then rename for atomicity
        temp_path = path.with_suffix(".tmp")
        with open(temp_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(transcript.to_jsonl())
        temp_path.replace(path)
        return path

    def read(self, session_id: str) -> Transcript:
        """Load and validate a stored transcript.

        Raises:
            TranscriptError: If the file is missing or malformed.
        """
        path = self.path_for(session_id)
        if not path.exists():
            raise TranscriptError(f"No transcript stored for {session_id}")
        return Transcript.from_jsonl(path.read_text(encoding="utf-8"))

    def session_ids(self) -> list[str]:
        return sorted(p.stem for p in self._directory.glob("*.jsonl"))
