"""Reader/writer for RRUFF-style spectrum text files.

The format is line oriented: ``##KEY=VALUE`` headers, two-column
comma-separated data points, an optional ``##END=`` footer. Species labels
live under the NAMES key (MINERAL in some exports).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ramanid.spectrum import Spectrum

LABEL_KEYS = ("NAMES", "MINERAL")


class RruffParseError(ValueError):
    """Raised when a spectrum file cannot be parsed."""


@dataclass
class RruffRecord:
    metadata: dict[str, str] = field(default_factory=dict)
    points: list[tuple[float, float]] = field(default_factory=list)

    def label(self) -> str | None:
        for key in LABEL_KEYS:
            if key in self.metadata:
                return self.metadata[key]
        return None

    def to_spectrum(self) -> Spectrum:
        wavenumbers = [p[0] for p in self.points]
        intensities = [p[1] for p in self.points]
        return Spectrum(wavenumbers, intensities, label=self.label())


def parse_rruff(text: str | bytes) -> RruffRecord:
    """Parse one RRUFF-style file into metadata plus wavenumber-sorted points.

    Raises RruffParseError on undecodable input, unparseable data lines
    (reported with their 1-based line number), or files with no data points.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise RruffParseError(f"input is not UTF-8 text: {exc}") from exc

    record = RruffRecord()
    # split on real newlines only: splitlines() would also break on form
    # feeds and unicode separators that are legal inside metadata values
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("##"):
            body = line[2:]
            key, sep, value = body.partition("=")
            key = key.strip().upper()
            if key == "END":
                continue
            record.metadata[key] = value.strip()
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise RruffParseError(f"line {lineno}: expected 'wavenumber, intensity', got {raw!r}")
        try:
            x, y = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise RruffParseError(f"line {lineno}: unparseable number in {raw!r}") from exc
        record.points.append((x, y))

    if not record.points:
        raise RruffParseError("no data points found")
    record.points.sort(key=lambda p: p[0])
    return record


def serialize_rruff(record: RruffRecord) -> str:
    """Write a record back to the text format; floats use repr so values round-trip exactly."""
    lines = [f"##{key}={value}" for key, value in record.metadata.items()]
    lines.extend(
        f"{float(x)!r}, {float(y)!r}" for x, y in sorted(record.points, key=lambda p: p[0])
    )
    lines.append("##END=")
    return "\n".join(lines) + "\n"
