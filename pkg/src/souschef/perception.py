"""Perception: pan-temperature extraction and debounced milestone events.

Raw observations (simulated, replayed, or fetched from a remote
inference endpoint) become per-label confidence vectors; a rolling-mean
filter turns those into milestone events once a label's windowed mean
crosses the confidence threshold.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plant

SENSOR_RANGE_C = (-40.0, 300.0)
NO_PAN_SPREAD_C = 3.0  # a frame this uniform carries no pan signature

DEFAULT_WINDOW_LEN = 4  # frames; 4 x 0.5 s = filter propagation time
DEFAULT_THRESHOLD = 0.5
PERCEPTION_HZ = 2.0


class VocabularyMismatch(ValueError):
    """Confidence vector labels do not match the filter vocabulary."""


@dataclass(frozen=True)
class ConfidenceVector:
    timestamp: float
    scores: dict[str, float]


@dataclass(frozen=True)
class MilestoneEvent:
    label: str
    timestamp: float
    mean_confidence: float


@dataclass(frozen=True)
class PanTemperatureReading:
    celsius: float
    valid: bool
    timestamp: float


def extract_pan_temperature(frame: plant.ThermalFrame) -> PanTemperatureReading:
    """Mean of the hottest decile of cells; invalid when the frame is
    too uniform to contain a pan. Malformed frames yield an invalid
    reading rather than an exception."""
    timestamp = getattr(frame, "timestamp", 0.0)
    try:
        grid = np.asarray(frame.grid, dtype=float)
        if grid.shape != (plant.FRAME_ROWS, plant.FRAME_COLS) or not np.isfinite(grid).all():
            return PanTemperatureReading(float("nan"), False, timestamp)
    except Exception:
        return PanTemperatureReading(float("nan"), False, timestamp)

    flat = np.sort(grid, axis=None)
    k = max(1, flat.size // 10)
    celsius = float(flat[-k:].mean())
    spread = float(flat[-1] - flat[0])
    valid = spread >= NO_PAN_SPREAD_C and SENSOR_RANGE_C[0] <= celsius <= SENSOR_RANGE_C[1]
    return PanTemperatureReading(celsius, valid, timestamp)


class RollingFilter:
    """Per-label rolling-mean confidence filter with edge-triggered events.

    An event fires for label L when its windowed mean reaches the
    threshold, the window is full, and L differs from the current label.
    All buffers reset on emission, so consecutive events are always at
    least window_len frames apart and never share a label.
    """

    def __init__(
        self,
        vocabulary,
        window_len: int = DEFAULT_WINDOW_LEN,
        threshold: float = DEFAULT_THRESHOLD,
        initial_label: str = plant.INITIAL_MILESTONE,
    ):
        if not 0 < threshold < 1:
            raise ValueError("threshold must be in (0, 1)")
        if window_len < 1:
            raise ValueError("window_len must be >= 1")
        self.vocabulary = tuple(vocabulary)
        if not self.vocabulary:
            raise ValueError("vocabulary is empty")
        self.window_len = window_len
        self.threshold = threshold
        self.current_label = initial_label
        self.buffers: dict[str, deque] = {
            label: deque(maxlen=window_len) for label in self.vocabulary
        }

    def reset(self):
        for buf in self.buffers.values():
            buf.clear()

    def means(self) -> dict[str, float]:
        return {
            label: (sum(buf) / len(buf) if buf else 0.0) for label, buf in self.buffers.items()
        }


def filter_update(
    filt: RollingFilter, conf: ConfidenceVector
) -> tuple[RollingFilter, MilestoneEvent | None]:
    """Push one confidence vector; emit at most one milestone event."""
    if set(conf.scores) != set(filt.vocabulary):
        raise VocabularyMismatch(
            f"vector labels {sorted(conf.scores)} != vocabulary {sorted(filt.vocabulary)}"
        )
    for label in filt.vocabulary:
        filt.buffers[label].append(float(conf.scores[label]))

    if any(len(buf) < filt.window_len for buf in filt.buffers.values()):
        return filt, None

    means = filt.means()
    candidates = [
        label
        for label, mean in means.items()
        if mean >= filt.threshold and label != filt.current_label
    ]
    if not candidates:
        return filt, None

    label = max(candidates, key=lambda l: (means[l], l))
    event = MilestoneEvent(label, conf.timestamp, means[label])
    filt.current_label = label
    filt.reset()
    return filt, event


class SimulatedBackend:
    """Classifier stand-in that reads plant ground truth."""

    kind = "simulated"

    def __init__(self, vocabulary, noise: float = 0.0, rng_seed: int = 0):
        self.vocabulary = tuple(vocabulary)
        self.noise = noise
        self.rng_seed = rng_seed
        self.fault_count = 0

    def classify(self, observation: plant.PlantState) -> ConfidenceVector | None:
        rng = np.random.default_rng([self.rng_seed, int(round(observation.time * 1000))])
        scores = plant.ground_truth_confidences(
            observation, self.vocabulary, noise=self.noise, rng=rng
        )
        return ConfidenceVector(observation.time, scores)


class ReplayBackend:
    """Plays back a recorded session file: one JSON record per line,
    {"t": ..., "scores": {label: conf, ...}}."""

    kind = "replay"

    def __init__(self, path):
        self.records = []
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            self.records.append(
                ConfidenceVector(float(doc["t"]), {k: float(v) for k, v in doc["scores"].items()})
            )
        self._next = 0
        self.fault_count = 0

    def classify(self, observation=None) -> ConfidenceVector | None:
        if self._next >= len(self.records):
            return None  # end of stream
        vec = self.records[self._next]
        self._next += 1
        return vec


class RemoteBackend:
    """POSTs an observation reference to an inference endpoint.

    Timeouts and malformed responses drop the tick (fault counted); the
    perception loop carries on with its filter state untouched.
    """

    kind = "remote"

    def __init__(self, endpoint: str, timeout_s: float = 1.0):
        self.endpoint = endpoint
        self.timeout_s = timeout_s
        self.fault_count = 0

    def classify(self, observation) -> ConfidenceVector | None:
        import httpx

        try:
            response = httpx.post(
                self.endpoint, json={"observation": observation}, timeout=self.timeout_s
            )
            response.raise_for_status()
            doc = response.json()
            scores = {str(k): float(v) for k, v in doc["scores"].items()}
            return ConfidenceVector(float(doc.get("t", 0.0)), scores)
        except Exception:
            self.fault_count += 1
            return None


def classify(observation, backend) -> ConfidenceVector | None:
    """Dispatch one observation to the active classifier backend."""
    return backend.classify(observation)
