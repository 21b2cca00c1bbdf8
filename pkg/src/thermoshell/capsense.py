"""Capacitive proximity sensing under the cover: measured baselines, noise, recalibration, contact.

The model is a lookup of normalized no-contact readings per layer stack with
Gaussian noise; it has no thermal inputs. Synthetic streams accept a cover
temperature and a flow state only so callers can show they have no effect.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationRejected, ConfigError

STACKS = ("naked", "foam", "foam_gel", "foam_channels_gel", "foam_channels_gel_water")


@dataclass(frozen=True)
class CapBaseline:
    mean: float  # normalized, 1 = naked arm without contact
    std: float

    def __post_init__(self):
        if not (0.0 <= self.mean <= 1.0) or self.std < 0:
            raise ValueError("baseline mean must lie in [0, 1] and std >= 0")


_TABLE = {
    "naked": CapBaseline(1.00, 4.49e-3),
    "foam": CapBaseline(0.946, 3.21e-3),
    "foam_gel": CapBaseline(0.940, 4.88e-3),
    "foam_channels_gel": CapBaseline(0.833, 5.06e-3),
    "foam_channels_gel_water": CapBaseline(0.563, 1.67e-2),
}

MIN_WINDOW_S = 20.0
DEFAULT_THRESHOLD = 0.8
DEFAULT_DEBOUNCE = 5
# a clean window of the noisiest stack has std 1.67e-2; three times that means contact
REJECT_STD = 3 * 1.67e-2


def baseline(stack):
    try:
        return _TABLE[stack]
    except KeyError:
        raise ConfigError(f"unknown layer stack {stack!r}; expected one of {STACKS}", key="capsense.stack") from None


@dataclass(frozen=True)
class SensorCalibration:
    """Affine map ``normalized = gain * raw + offset``."""

    gain: float = 1.0
    offset: float = 0.0

    def apply(self, raw):
        return self.gain * np.asarray(raw, dtype=float) + self.offset


def recalibrate(times, raw, min_window=MIN_WINDOW_S, reject_std=REJECT_STD):
    """Gain-only map sending the mean of a contact-free window to 1.0.

    Raises :class:`CalibrationRejected` when the window is shorter than
    ``min_window`` seconds or its spread exceeds ``reject_std`` relative to its
    mean (a touch during calibration).
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(raw, dtype=float)
    # each sample stands for one sampling period, so N samples at rate f cover N/f seconds
    if t.size < 2 or (t[-1] - t[0]) + float(np.median(np.diff(t))) < min_window - 1e-9:
        raise CalibrationRejected(f"calibration window shorter than {min_window} s")
    mean = float(np.mean(x))
    if not mean > 0:
        raise CalibrationRejected("calibration window mean must be positive")
    if float(np.std(x)) / mean > reject_std:
        raise CalibrationRejected("calibration window too noisy; contact suspected")
    return SensorCalibration(1.0 / mean, 0.0)


class ContactDetector:
    """Debounced threshold detector on normalized samples."""

    def __init__(self, threshold=DEFAULT_THRESHOLD, debounce=DEFAULT_DEBOUNCE):
        if debounce < 1:
            raise ValueError("debounce must be >= 1")
        self.threshold = threshold
        self.debounce = debounce
        self.run = 0

    def update(self, sample):
        self.run = self.run + 1 if sample < self.threshold else 0
        return self.run >= self.debounce


def detect_contact(samples, threshold=DEFAULT_THRESHOLD, debounce=DEFAULT_DEBOUNCE):
    """Contact flag per sample: true once ``debounce`` consecutive samples are below ``threshold``."""
    det = ContactDetector(threshold, debounce)
    return np.array([det.update(float(s)) for s in np.atleast_1d(samples)], dtype=bool)


def synthetic_stream(stack, duration, rate=10.0, contacts=(), contact_level=0.3, seed=0,
                     cover_temperature=None, flow_rate=None):
    """Raw normalized readings for a layer stack with scripted full-hand contacts.

    ``contacts`` is a sequence of ``(start, end)`` intervals in seconds during
    which the reading drops to ``contact_level`` times the stack mean.
    ``cover_temperature`` and ``flow_rate`` are accepted and ignored: sensing
    does not depend on the thermal state.
    """
    del cover_temperature, flow_rate
    base = baseline(stack)
    rng = np.random.default_rng(seed)
    t = np.arange(int(round(duration * rate))) / rate
    level = np.full(t.size, base.mean)
    for start, end in contacts:
        level[(t >= start) & (t < end)] = base.mean * contact_level
    return t, level + rng.normal(0.0, base.std, t.size)


def grasp_protocol(total=180.0, quiet=20.0, touch=10.0, release=10.0):
    """Contact intervals: repeated grasps between quiet lead-in and lead-out periods."""
    intervals = []
    t = quiet
    while t + touch <= total - quiet + 1e-9:
        intervals.append((t, t + touch))
        t += touch + release
    return tuple(intervals)


def read_stream_csv(path):
    """Read ``t_s, raw`` rows; returns two arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header[:2] != ["t_s", "raw"]:
            raise ConfigError(f"capsense stream header must start with t_s,raw (got {header})")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    arr = np.array(rows, dtype=float).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def write_stream_csv(path, times, raw):
    with open(path, "w", newline="") as fh:
        fh.write("t_s,raw\n")
        for t, x in zip(times, raw):
            fh.write(f"{t:.6g},{x:.6g}\n")


def process_stream(times, raw, calibration_window=MIN_WINDOW_S, threshold=DEFAULT_THRESHOLD,
                   debounce=DEFAULT_DEBOUNCE):
    """Recalibrate on the leading window, then normalize and flag contact.

    Returns ``(calibration, normalized, contact_flags)``.
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(raw, dtype=float)
    sel = t < t[0] + calibration_window - 1e-9
    cal = recalibrate(t[sel], x[sel], calibration_window)
    norm = cal.apply(x)
    return cal, norm, detect_contact(norm, threshold, debounce)


def write_normalized_csv(path, times, normalized, flags):
    with open(path, "w", newline="") as fh:
        fh.write("t_s,normalized,contact_flag\n")
        for t, x, f in zip(times, normalized, flags):
            fh.write(f"{t:.6g},{x:.6g},{int(f)}\n")
