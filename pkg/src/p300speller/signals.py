"""Continuous EEG handling: filtering, epoching, feature extraction.

The pipeline turns a multi-channel recording into one fixed-length feature
vector per stimulus flash:

    bandpass_filter -> extract_epoch -> decimate_epoch

A recording holds channels x samples in microvolts plus a table of flash
markers (sample index, stimulus code).  Epochs cover 0..700 ms after flash
onset, which at 250 Hz is 175 samples.  Decimation averages non-overlapping
12-sample windows per channel; 175 = 14 * 12 + 7, so each channel yields 14
full-window means plus the mean of the remaining 7 samples, 15 values per
channel, 240 for the standard 16-channel montage.  Channel blocks are laid
out in montage order: feature i*15+j is window j of channel i.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import butter, sosfiltfilt

from .errors import InputError, ParameterError, ShapeError

CHANNEL_NAMES: tuple[str, ...] = (
    "Fz", "Cz", "Pz", "Oz", "P3", "P4", "P7", "P8",
    "FC1", "FC2", "CP1", "CP2", "C3", "C4", "O1", "O2",
)
SAMPLE_RATE_HZ = 250.0
EPOCH_SAMPLES = 175            # 0..700 ms at 250 Hz
DECIMATION_WINDOW = 12
FEATURES_PER_CHANNEL = 15      # ceil(175 / 12): 14 full windows + 7-sample tail
FEATURE_LENGTH = len(CHANNEL_NAMES) * FEATURES_PER_CHANNEL
BAND_LOW_HZ = 0.5
BAND_HIGH_HZ = 30.0
N_STIMULUS_CODES = 13

RECORDING_FORMAT = "recording.v1"


class TruncationError(InputError):
    """An epoch window runs past the end of the recording."""


@dataclass(frozen=True)
class FlashMarker:
    """One stimulus onset: sample index into the recording and its code."""

    sample: int
    code: int

    def __post_init__(self):
        if self.sample < 0:
            raise InputError(f"marker sample must be >= 0, got {self.sample}")
        if not 1 <= self.code <= N_STIMULUS_CODES:
            raise InputError(
                f"stimulus code must be in 1..{N_STIMULUS_CODES}, got {self.code}"
            )


@dataclass
class RawRecording:
    """Continuous multi-channel EEG with flash markers.

    samples: float64 array, shape (n_channels, n_samples), microvolts.
    """

    channels: tuple[str, ...]
    sample_rate_hz: float
    samples: np.ndarray
    markers: tuple[FlashMarker, ...] = ()

    def __post_init__(self):
        self.channels = tuple(self.channels)
        self.markers = tuple(self.markers)
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate_hz <= 0:
            raise ParameterError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if self.samples.ndim != 2:
            raise ShapeError(f"samples must be 2-D (channels, samples), got shape {self.samples.shape}")
        if self.samples.shape[0] != len(self.channels):
            raise ShapeError(
                f"{len(self.channels)} channel names but {self.samples.shape[0]} sample rows"
            )
        last = -1
        for m in self.markers:
            if m.sample <= last:
                raise InputError("markers must have strictly increasing sample indices")
            last = m.sample
            if m.sample >= self.n_samples:
                raise InputError(f"marker at sample {m.sample} outside recording of {self.n_samples}")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass
class EegEpoch:
    """One post-flash window, channels x EPOCH_SAMPLES, plus its stimulus code.

    label is None until assigned; during calibration it becomes "target" when
    the flash covered the attended key's row or column, else "nontarget".
    """

    data: np.ndarray
    stimulus_code: int
    label: str | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[1] != EPOCH_SAMPLES:
            raise ShapeError(
                f"epoch must be (n_channels, {EPOCH_SAMPLES}), got {self.data.shape}"
            )
        if not 1 <= self.stimulus_code <= N_STIMULUS_CODES:
            raise InputError(f"stimulus code must be in 1..{N_STIMULUS_CODES}, got {self.stimulus_code}")
        if self.label not in (None, "target", "nontarget"):
            raise InputError(f"label must be None, 'target' or 'nontarget', got {self.label!r}")


def bandpass_filter(
    rec: RawRecording,
    low_hz: float = BAND_LOW_HZ,
    high_hz: float = BAND_HIGH_HZ,
    order: int = 4,
) -> RawRecording:
    """Zero-phase Butterworth band-pass over every channel.

    Forward-backward filtering (sosfiltfilt) doubles the effective order and
    cancels phase shift, so component latencies survive.  Returns a new
    recording; markers and metadata carry over unchanged.
    """
    if not 0 < low_hz < high_hz:
        raise ParameterError(f"need 0 < low < high, got ({low_hz}, {high_hz})")
    nyquist = rec.sample_rate_hz / 2.0
    if high_hz >= nyquist:
        raise ParameterError(f"high edge {high_hz} Hz must be below Nyquist {nyquist} Hz")
    sos = butter(order, [low_hz, high_hz], btype="bandpass", fs=rec.sample_rate_hz, output="sos")
    try:
        filtered = sosfiltfilt(sos, rec.samples, axis=1)
    except ValueError as exc:  # too few samples for the reflect padding
        raise InputError(f"recording too short to filter: {exc}") from exc
    return RawRecording(rec.channels, rec.sample_rate_hz, filtered, rec.markers)


def extract_epoch(rec: RawRecording, marker_index: int) -> EegEpoch:
    """Cut the 0..700 ms window that starts at the given marker's sample."""
    try:
        marker = rec.markers[marker_index]
    except IndexError:
        raise InputError(
            f"marker index {marker_index} out of range ({len(rec.markers)} markers)"
        ) from None
    start = marker.sample
    stop = start + EPOCH_SAMPLES
    if stop > rec.n_samples:
        raise TruncationError(
            f"epoch at sample {start} needs {EPOCH_SAMPLES} samples, only {rec.n_samples - start} remain"
        )
    return EegEpoch(rec.samples[:, start:stop].copy(), marker.code)


def decimate_epoch(epoch: EegEpoch, window: int = DECIMATION_WINDOW) -> np.ndarray:
    """Average non-overlapping windows per channel and concatenate channel blocks.

    The final window may be partial and averages whatever samples remain, so
    every sample contributes exactly once.  Output is float64 with
    n_channels * ceil(EPOCH_SAMPLES / window) entries, channel-major.
    """
    if window < 1:
        raise ParameterError(f"window must be >= 1, got {window}")
    data = epoch.data
    n_channels, n_samples = data.shape
    n_full = n_samples // window
    means = [data[:, : n_full * window].reshape(n_channels, n_full, window).mean(axis=2)]
    if n_full * window < n_samples:
        means.append(data[:, n_full * window:].mean(axis=1, keepdims=True))
    return np.concatenate(means, axis=1).reshape(-1)


def feature_layout_hash(
    channels: tuple[str, ...] = CHANNEL_NAMES,
    sample_rate_hz: float = SAMPLE_RATE_HZ,
    epoch_samples: int = EPOCH_SAMPLES,
    window: int = DECIMATION_WINDOW,
) -> str:
    """Stable digest of the feature layout, stored in model files.

    A model trained under one layout refuses to score features from another.
    """
    doc = json.dumps(
        {
            "channels": list(channels),
            "sample_rate_hz": sample_rate_hz,
            "epoch_samples": epoch_samples,
            "window": window,
        },
        sort_keys=True,
    )
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def save_recording(rec: RawRecording, path: str | Path, packed: bool = False) -> None:
    """Write a recording as JSON; packed=True stores base64 float64 blocks."""
    doc: dict = {
        "format": RECORDING_FORMAT,
        "channels": list(rec.channels),
        "sample_rate_hz": rec.sample_rate_hz,
        "markers": [[m.sample, m.code] for m in rec.markers],
    }
    if packed:
        doc["encoding"] = "b64/f64-le"
        doc["samples_b64"] = [
            base64.b64encode(np.ascontiguousarray(row, dtype="<f8").tobytes()).decode("ascii")
            for row in rec.samples
        ]
    else:
        doc["encoding"] = "plain"
        doc["samples"] = rec.samples.tolist()
    Path(path).write_text(json.dumps(doc))


def load_recording(path: str | Path) -> RawRecording:
    """Read either encoding of the recording format back into memory."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read recording from {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != RECORDING_FORMAT:
        raise InputError(f"{path} is not a {RECORDING_FORMAT} file")
    for key in ("channels", "sample_rate_hz", "markers", "encoding"):
        if key not in doc:
            raise InputError(f"recording file missing field {key!r}")
    encoding = doc["encoding"]
    if encoding == "plain":
        samples = np.asarray(doc["samples"], dtype=np.float64)
    elif encoding == "b64/f64-le":
        rows = [np.frombuffer(base64.b64decode(blob), dtype="<f8") for blob in doc["samples_b64"]]
        if rows and any(len(r) != len(rows[0]) for r in rows):
            raise InputError("packed channel rows have unequal lengths")
        samples = np.asarray(rows, dtype=np.float64)
        if samples.ndim == 1:  # zero channels
            samples = samples.reshape(0, 0)
    else:
        raise InputError(f"unknown recording encoding {encoding!r}")
    markers = tuple(FlashMarker(int(s), int(c)) for s, c in doc["markers"])
    return RawRecording(tuple(doc["channels"]), float(doc["sample_rate_hz"]), samples, markers)
