"""Experiment timing: drive pulses and pump shutter windows.

A PulseSequence gates the oscillating drive and the pump beam on and off at
listed event times. Gating is piecewise constant and right-continuous: at an
event time the new state already applies. Shutter transitions are treated as
instantaneous, which is fine because real transition times are far shorter
than any relaxation time in the model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import FieldDrive

ACTIONS = ("drive_on", "drive_off", "pump_on", "pump_off")
PUMP_MODES = ("continuous", "gated-off-during-drive")


@dataclass(frozen=True)
class Segment:
    """Maximal interval [t0, t1) with constant gating.

    drive_origin is the time the current drive window started (None while the
    drive is off); the drive cosine is referenced to it so the field peaks at
    pulse start.
    """

    t0: float
    t1: float
    drive_on: bool
    pump_on: bool
    drive_origin: float | None


@dataclass(frozen=True)
class PulseSequence:
    """Event-driven gating of drive amplitude and pump polarization.

    The initial state at t = 0 is drive off, pump on. pump_value is the
    polarization P delivered while the pump is on.
    """

    events: tuple
    total_duration: float
    drive: FieldDrive
    pump_value: float

    def __post_init__(self):
        if not math.isfinite(self.total_duration) or self.total_duration <= 0.0:
            raise ValidationError("total_duration must be positive and finite")
        if not 0.0 <= self.pump_value <= 1.0:
            raise ValidationError("pump_value must lie in [0, 1]")
        norm = []
        for ev in self.events:
            try:
                t, action = ev
            except (TypeError, ValueError):
                raise ValidationError(f"malformed event {ev!r}") from None
            t = float(t)
            if action not in ACTIONS:
                raise ValidationError(f"unknown action {action!r}")
            if not 0.0 <= t <= self.total_duration:
                raise ValidationError(
                    f"event time {t} outside [0, {self.total_duration}]")
            norm.append((t, action))
        if norm != sorted(norm, key=lambda e: e[0]):
            raise ValidationError("events must be ordered by time")
        for channel in ("drive", "pump"):
            times = [t for t, a in norm if a.startswith(channel)]
            if any(b <= a for a, b in zip(times[:-1], times[1:])):
                raise ValidationError(
                    f"{channel} events must have strictly increasing times "
                    "(simultaneous actions on one channel are ambiguous)")
        object.__setattr__(self, "events", tuple(norm))

    # -- queries ------------------------------------------------------

    def params_at(self, t: float):
        """(effective B_M in nT, effective P) at time t, right-continuous."""
        if not 0.0 <= t <= self.total_duration:
            raise ValidationError(
                f"t = {t} outside sequence duration [0, {self.total_duration}]")
        drive_on, pump_on = False, True
        for et, action in self.events:
            if et > t:
                break
            if action == "drive_on":
                drive_on = True
            elif action == "drive_off":
                drive_on = False
            elif action == "pump_on":
                pump_on = True
            else:
                pump_on = False
        return (self.drive.b_osc if drive_on else 0.0,
                self.pump_value if pump_on else 0.0)

    def segments(self) -> list[Segment]:
        """The sequence as maximal constant-gating intervals covering
        [0, total_duration]."""
        cuts = sorted({0.0, self.total_duration, *(t for t, _ in self.events)})
        drive_on, pump_on = False, True
        origin = None
        out = []
        idx = 0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            while idx < len(self.events) and self.events[idx][0] <= lo:
                action = self.events[idx][1]
                if action == "drive_on":
                    drive_on, origin = True, self.events[idx][0]
                elif action == "drive_off":
                    drive_on, origin = False, None
                elif action == "pump_on":
                    pump_on = True
                else:
                    pump_on = False
                idx += 1
            if hi > lo:
                out.append(Segment(lo, hi, drive_on, pump_on,
                                   origin if drive_on else None))
        return out

    def drive_window(self):
        """(start, stop) of the first drive-on window, or None if the drive
        never turns on. Used as the default spectral analysis window."""
        start = None
        for t, action in self.events:
            if action == "drive_on" and start is None:
                start = t
            elif action == "drive_off" and start is not None:
                return (start, t)
        if start is not None:
            return (start, self.total_duration)
        return None

    # -- serialization ------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "total_duration": self.total_duration,
            "pump_value": self.pump_value,
            "drive": {"b_static": self.drive.b_static, "b_osc": self.drive.b_osc,
                      "drive_freq": self.drive.drive_freq, "phase": self.drive.phase},
            "events": [[t, a] for t, a in self.events],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PulseSequence":
        required = {"total_duration", "pump_value", "drive", "events"}
        unknown = set(d) - required
        if unknown:
            raise ValidationError(f"unknown sequence keys: {sorted(unknown)}")
        missing = required - set(d)
        if missing:
            raise ValidationError(f"missing sequence keys: {sorted(missing)}")
        drv = d["drive"]
        unknown = set(drv) - {"b_static", "b_osc", "drive_freq", "phase"}
        if unknown:
            raise ValidationError(f"unknown drive keys: {sorted(unknown)}")
        drive = FieldDrive(**drv)
        events = tuple((float(t), a) for t, a in d["events"])
        return cls(events=events, total_duration=float(d["total_duration"]),
                   drive=drive, pump_value=float(d["pump_value"]))


def standard_pulse(duration_before: float, pulse_length: float,
                   duration_after: float, drive: FieldDrive,
                   pump_mode: str = "continuous",
                   pump_value: float = 0.1) -> PulseSequence:
    """Canonical three-phase protocol: quiet lead-in, drive pulse, tail.

    pump_mode "continuous" keeps the pump on throughout; "gated-off-during-drive"
    shuts the pump exactly while the drive is on.
    """
    for name, v in (("duration_before", duration_before),
                    ("pulse_length", pulse_length),
                    ("duration_after", duration_after)):
        if v < 0.0 or not math.isfinite(v):
            raise ValidationError(f"{name} must be non-negative and finite")
    if pump_mode not in PUMP_MODES:
        raise ValidationError(
            f"pump_mode must be one of {PUMP_MODES}, got {pump_mode!r}")
    total = duration_before + pulse_length + duration_after
    if total <= 0.0:
        raise ValidationError("sequence must have positive total duration")
    events = []
    if pulse_length > 0.0:
        t_on = duration_before
        t_off = duration_before + pulse_length
        events.append((t_on, "drive_on"))
        if pump_mode == "gated-off-during-drive":
            events.append((t_on, "pump_off"))
        events.append((t_off, "drive_off"))
        if pump_mode == "gated-off-during-drive":
            events.append((t_off, "pump_on"))
        events.sort(key=lambda e: e[0])
    return PulseSequence(events=tuple(events), total_duration=total,
                         drive=drive, pump_value=pump_value)
