"""Line-oriented text format for pulse sequences (``.seq`` files).

One segment per line::

    laser p=0.91
    rf theta=1.5708 [mode=ideal|driven]
    mw step=MW1 dur_ns=117 [phase=0]
    free tau_us=0.5
    readout

``#`` starts a comment; blank lines are ignored; LF and CRLF are accepted.
"""

from __future__ import annotations

import dataclasses
import enum
import math

from .params import MWStep
from .pulses import (FreeEvolution, LaserInit, MwPulse, PulseSegment, PulseSequence, Readout,
                     RfMode, RfRotation)


class Code(str, enum.Enum):
    INVALID_ENCODING = "invalid-encoding"
    UNKNOWN_KEYWORD = "unknown-keyword"
    UNKNOWN_ARGUMENT = "unknown-argument"
    DUPLICATE_ARGUMENT = "duplicate-argument"
    MALFORMED_ARGUMENT = "malformed-argument"
    MISSING_ARGUMENT = "missing-argument"
    NON_NUMERIC = "non-numeric"
    INVALID_VALUE = "invalid-value"
    NEGATIVE_DURATION = "negative-duration"
    READOUT_NOT_LAST = "readout-not-last"


@dataclasses.dataclass(frozen=True)
class Diagnostic:
    code: Code
    message: str
    line: int
    column: int
    expected: tuple[str, ...] = ()

    def __str__(self) -> str:
        text = f"{self.line}:{self.column}: {self.code.value}: {self.message}"
        if self.expected:
            text += f" (expected one of: {', '.join(self.expected)})"
        return text


class SequenceParseError(ValueError):
    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


# keyword -> (required args, optional args), in canonical order
_GRAMMAR: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "laser": (("p",), ()),
    "rf": (("theta",), ("mode",)),
    "mw": (("step", "dur_ns"), ("phase",)),
    "free": (("tau_us",), ()),
    "readout": ((), ()),
}
_NUMERIC = {"p", "theta", "dur_ns", "phase", "tau_us"}


def _fail(code: Code, message: str, line: int, column: int, expected=()) -> None:
    raise SequenceParseError(Diagnostic(code, message, line, column, tuple(expected)))


def _number(text: str, key: str, line: int, column: int) -> float:
    try:
        value = float(text)
    except ValueError:
        value = math.nan
    if not math.isfinite(value):
        _fail(Code.NON_NUMERIC, f"{key}={text!r} is not a finite number", line, column, ("<number>",))
    return value


def _parse_line(text: str, lineno: int) -> PulseSegment | None:
    body = text.split("#", 1)[0]
    tokens: list[tuple[int, str]] = []
    pos = 0
    for part in body.split():
        pos = body.index(part, pos)
        tokens.append((pos + 1, part))
        pos += len(part)
    if not tokens:
        return None

    kw_col, keyword = tokens[0]
    if keyword not in _GRAMMAR:
        _fail(Code.UNKNOWN_KEYWORD, f"unknown keyword {keyword!r}", lineno, kw_col, sorted(_GRAMMAR))
    required, optional = _GRAMMAR[keyword]
    allowed = required + optional

    args: dict[str, tuple[int, str]] = {}
    for col, tok in tokens[1:]:
        key, sep, value = tok.partition("=")
        if not sep or not key or not value:
            _fail(Code.MALFORMED_ARGUMENT, f"expected key=value, got {tok!r}", lineno, col,
                  [f"{a}=" for a in allowed])
        if key not in allowed:
            _fail(Code.UNKNOWN_ARGUMENT, f"{keyword} does not take {key!r}", lineno, col,
                  [f"{a}=" for a in allowed])
        if key in args:
            _fail(Code.DUPLICATE_ARGUMENT, f"{key} given twice", lineno, col)
        args[key] = (col, value)
    for key in required:
        if key not in args:
            _fail(Code.MISSING_ARGUMENT, f"{keyword} requires {key}=", lineno,
                  len(body.rstrip()) + 1, [f"{key}="])

    nums = {k: _number(v, k, lineno, c) for k, (c, v) in args.items() if k in _NUMERIC}

    if keyword == "laser":
        col = args["p"][0]
        if abs(nums["p"]) > 1:
            _fail(Code.INVALID_VALUE, "polarization must lie in [-1, 1]", lineno, col)
        return LaserInit(nums["p"])
    if keyword == "rf":
        mode = RfMode.IDEAL
        if "mode" in args:
            col, raw = args["mode"]
            try:
                mode = RfMode(raw)
            except ValueError:
                _fail(Code.INVALID_VALUE, f"unknown RF mode {raw!r}", lineno, col,
                      [m.value for m in RfMode])
        return RfRotation(nums["theta"], mode)
    if keyword == "mw":
        col, raw = args["step"]
        if raw not in (s.value for s in MWStep):
            _fail(Code.INVALID_VALUE, f"unknown MW step {raw!r}", lineno, col, [s.value for s in MWStep])
        if nums["dur_ns"] < 0:
            _fail(Code.NEGATIVE_DURATION, "negative duration", lineno, args["dur_ns"][0])
        return MwPulse(MWStep(raw), nums["dur_ns"], nums.get("phase", 0.0))
    if keyword == "free":
        if nums["tau_us"] < 0:
            _fail(Code.NEGATIVE_DURATION, "negative duration", lineno, args["tau_us"][0])
        return FreeEvolution(nums["tau_us"])
    return Readout()


def parse_sequence(text: str | bytes, name: str = "") -> PulseSequence:
    """Parse a ``.seq`` program; raises ``SequenceParseError`` with a diagnostic."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            _fail(Code.INVALID_ENCODING, f"not valid UTF-8 at byte {exc.start}", 1, 1)
    segments: list[PulseSegment] = []
    readout_line = None
    for lineno, line in enumerate(text.replace("\r\n", "\n").split("\n"), start=1):
        seg = _parse_line(line, lineno)
        if seg is None:
            continue
        if readout_line is not None:
            _fail(Code.READOUT_NOT_LAST, f"segment after readout on line {readout_line}", lineno, 1)
        if isinstance(seg, Readout):
            readout_line = lineno
        segments.append(seg)
    return PulseSequence(tuple(segments), name=name)


def check_sequence(text: str | bytes) -> Diagnostic | None:
    """``None`` if ``text`` parses, otherwise its diagnostic."""
    try:
        parse_sequence(text)
    except SequenceParseError as exc:
        return exc.diagnostic
    return None


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def serialize_segment(seg: PulseSegment) -> str:
    if isinstance(seg, LaserInit):
        return f"laser p={_fmt(seg.p)}"
    if isinstance(seg, RfRotation):
        line = f"rf theta={_fmt(seg.theta)}"
        return line if seg.mode is RfMode.IDEAL else f"{line} mode={seg.mode.value}"
    if isinstance(seg, MwPulse):
        line = f"mw step={seg.step.value} dur_ns={_fmt(seg.duration)}"
        return line if seg.phase == 0 else f"{line} phase={_fmt(seg.phase)}"
    if isinstance(seg, FreeEvolution):
        return f"free tau_us={_fmt(seg.tau)}"
    if isinstance(seg, Readout):
        return "readout"
    raise TypeError(f"not a pulse segment: {seg!r}")


def serialize_sequence(seq: PulseSequence) -> str:
    """Canonical text: fixed argument order, 9 significant digits, LF endings."""
    return "".join(serialize_segment(seg) + "\n" for seg in seq)
