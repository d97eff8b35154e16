"""Event boxes on the sample timeline."""
from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import InvalidInputError

LABELS = ("event", "click", "echo", "other")
PROVENANCES = ("external", "fod", "sliced", "annotation")


@dataclass(frozen=True, order=True)
class EventBox:
    """Half-open sample interval ``[start_sample, end_sample)``.

    Ordering is by ``(start_sample, end_sample, ...)``, which is the time
    order used everywhere downstream.
    """

    start_sample: int
    end_sample: int
    confidence: float = 1.0
    label: str = "event"
    provenance: str = "external"

    def __post_init__(self):
        if not self.start_sample < self.end_sample:
            raise InvalidInputError(
                f"EventBox needs start < end, got [{self.start_sample}, {self.end_sample})")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidInputError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def length(self) -> int:
        return self.end_sample - self.start_sample

    def seconds(self, sample_rate: int) -> tuple[float, float]:
        return self.start_sample / sample_rate, self.end_sample / sample_rate

    def with_(self, **changes) -> "EventBox":
        return replace(self, **changes)


def format_event_label(box: EventBox, digits: int = 4) -> str:
    """Label text carrying the confidence, e.g. ``click:0.9000``."""
    return f"{box.label}:{box.confidence:.{digits}f}"


def parse_event_label(text: str) -> tuple[str, float | None]:
    """Inverse of :func:`format_event_label`; plain labels give ``None``."""
    name, sep, conf = text.rpartition(":")
    if sep:
        try:
            return name, float(conf)
        except ValueError:
            pass
    return text, None
