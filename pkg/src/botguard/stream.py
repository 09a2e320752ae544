"""Distance-based outlier detection over an evolving one-dimensional stream window.

Objects carry a scalar feature and a timestamp.  An object is an outlier when
fewer than ``neighbor_threshold`` other live objects lie within ``radius`` of
its feature value; an inlier with at least ``neighbor_threshold`` neighbors
that arrived after it is a safe inlier and can never become an outlier before
it expires.  The window is time based: an object is live while
``now - arrival_time < window_span``.

Two modes are supported.  Exact mode keeps full preceding-neighbor evidence
and matches the brute-force oracle on every window.  Approximate mode bounds
per-object memory by retaining only the most recent preceding neighbors (a
lower bound on the live count), so it may raise false outlier alarms but can
never report a false safe inlier.
"""

import bisect
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigurationError, OrderingError, UnknownObjectError


class Mode(Enum):
    EXACT = "exact"
    APPROXIMATE = "approximate"


class Label(Enum):
    OUTLIER = "outlier"
    INLIER = "inlier"
    SAFE_INLIER = "safe_inlier"


@dataclass(frozen=True)
class DetectorParams:
    """Free parameters of the distance-based outlier model.

    radius: neighborhood half-width on the feature axis (closed ball, a tie
        at exactly ``radius`` counts as a neighbor).
    neighbor_threshold: minimum neighbor count for inlier status.
    window_span: time extent of the sliding window, half-open ``(now - span, now]``.
    reservoir_size: per-object cap on retained preceding neighbors in
        approximate mode; defaults to ``neighbor_threshold``.
    """

    radius: float = 1.0
    neighbor_threshold: int = 3
    window_span: float = 16.0
    mode: Mode = Mode.EXACT
    reservoir_size: int = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigurationError(f"radius must be > 0, got {self.radius}")
        if self.neighbor_threshold < 1:
            raise ConfigurationError(
                f"neighbor_threshold must be >= 1, got {self.neighbor_threshold}"
            )
        if not self.window_span > 0:
            raise ConfigurationError(
                f"window_span must be > 0, got {self.window_span}"
            )
        if not isinstance(self.mode, Mode):
            raise ConfigurationError(f"mode must be a Mode, got {self.mode!r}")
        if self.reservoir_size is None:
            object.__setattr__(self, "reservoir_size", self.neighbor_threshold)
        if self.reservoir_size < 1:
            raise ConfigurationError(
                f"reservoir_size must be >= 1, got {self.reservoir_size}"
            )


@dataclass(frozen=True)
class StreamObject:
    """One timestamped scalar feature point flowing through the window."""

    object_id: int
    arrival_time: float
    feature_value: float
    source_ref: str = ""


@dataclass(frozen=True)
class NeighborSummary:
    """Per-object neighbor evidence at the current window time.

    ``preceding_neighbors`` lists live ``(object_id, arrival_time)`` pairs of
    neighbors that arrived before the object (capped in approximate mode);
    ``succeeding_count`` counts neighbors that arrived after it and never
    decreases while the object is live.
    """

    object_id: int
    preceding_neighbors: tuple
    succeeding_count: int
    observed_preceding: int


class _Record:
    __slots__ = ("object_id", "arrival_time", "feature_value", "source_ref",
                 "prec", "succ", "observed_prec")

    def __init__(self, obj):
        self.object_id = obj.object_id
        self.arrival_time = obj.arrival_time
        self.feature_value = obj.feature_value
        self.source_ref = obj.source_ref
        self.prec = []          # [(arrival_time, object_id)] sorted ascending
        self.succ = 0
        self.observed_prec = 0


class Detector:
    """Evolving-window outlier detector (single writer per instance)."""

    def __init__(self, params: DetectorParams):
        self.params = params
        self.current_time = 0.0
        self._records = {}        # object_id -> _Record, live objects only
        self._arrival = deque()   # live records in arrival order
        self._by_value = []       # sorted [(feature_value, object_id)]
        self._last_id = None

    def __len__(self):
        return len(self._records)

    @property
    def live_ids(self):
        return list(self._records)

    def insert(self, obj: StreamObject) -> Label:
        """Advance the window to the object's arrival time, expire stale
        objects, wire up neighbor evidence and return the object's label."""
        if self._last_id is not None and obj.object_id <= self._last_id:
            raise OrderingError(
                f"object_id {obj.object_id} not greater than last id {self._last_id}"
            )
        if obj.arrival_time < self.current_time:
            raise OrderingError(
                f"arrival_time {obj.arrival_time} precedes window time {self.current_time}"
            )
        self._last_id = obj.object_id
        self._expire(obj.arrival_time)
        self.current_time = obj.arrival_time

        rec = _Record(obj)
        p = self.params
        lo = bisect.bisect_left(self._by_value, (obj.feature_value - p.radius, -math.inf))
        hi = bisect.bisect_right(self._by_value, (obj.feature_value + p.radius, math.inf))
        approximate = p.mode is Mode.APPROXIMATE
        for _, nid in self._by_value[lo:hi]:
            nb = self._records[nid]
            nb.succ += 1
            if approximate and nb.succ >= p.neighbor_threshold:
                # safe inlier: preceding evidence is no longer needed
                nb.prec.clear()
            rec.prec.append((nb.arrival_time, nid))
        rec.prec.sort()
        rec.observed_prec = len(rec.prec)
        if approximate and len(rec.prec) > p.reservoir_size:
            # keep the most recent entries: they expire last, so the retained
            # live count is a lower bound and can only over-report outliers
            rec.prec = rec.prec[-p.reservoir_size:]

        self._records[obj.object_id] = rec
        self._arrival.append(rec)
        bisect.insort(self._by_value, (obj.feature_value, obj.object_id))
        return self._label(rec)

    def advance_time(self, now: float) -> list:
        """Move the window to ``now`` and return the expired object ids."""
        if now < self.current_time:
            raise OrderingError(
                f"time regression: {now} < current time {self.current_time}"
            )
        expired = self._expire(now)
        self.current_time = now
        return expired

    def classify(self, object_id: int) -> Label:
        rec = self._records.get(object_id)
        if rec is None:
            raise UnknownObjectError(f"object {object_id} is not live")
        return self._label(rec)

    def query_outliers(self) -> set:
        return {
            rec.object_id
            for rec in self._records.values()
            if self._label(rec) is Label.OUTLIER
        }

    def neighbor_summary(self, object_id: int) -> NeighborSummary:
        rec = self._records.get(object_id)
        if rec is None:
            raise UnknownObjectError(f"object {object_id} is not live")
        cutoff = self.current_time - self.params.window_span
        start = bisect.bisect_right(rec.prec, (cutoff, math.inf))
        live = tuple((nid, t) for t, nid in rec.prec[start:])
        return NeighborSummary(
            object_id=object_id,
            preceding_neighbors=live,
            succeeding_count=rec.succ,
            observed_preceding=rec.observed_prec,
        )

    def snapshot(self) -> list:
        """Live window content as JSON-ready dicts, in arrival order."""
        return [
            {
                "object_id": rec.object_id,
                "arrival_time": rec.arrival_time,
                "feature_value": rec.feature_value,
                "source_ref": rec.source_ref,
                "label": self._label(rec).value,
                "succeeding_count": rec.succ,
            }
            for rec in self._arrival
        ]

    # -- internals ---------------------------------------------------------

    def _expire(self, now):
        span = self.params.window_span
        expired = []
        while self._arrival and now - self._arrival[0].arrival_time >= span:
            rec = self._arrival.popleft()
            del self._records[rec.object_id]
            idx = bisect.bisect_left(self._by_value, (rec.feature_value, rec.object_id))
            self._by_value.pop(idx)
            expired.append(rec.object_id)
        return expired

    def _live_preceding(self, rec):
        cutoff = self.current_time - self.params.window_span
        return len(rec.prec) - bisect.bisect_right(rec.prec, (cutoff, math.inf))

    def _label(self, rec):
        k = self.params.neighbor_threshold
        if rec.succ >= k:
            return Label.SAFE_INLIER
        if self._live_preceding(rec) + rec.succ < k:
            return Label.OUTLIER
        return Label.INLIER


def brute_force_outliers(objects, params: DetectorParams) -> set:
    """O(n^2) pairwise ground truth over an exact live-window content.

    An object is an outlier iff fewer than ``neighbor_threshold`` other
    objects lie within ``radius`` of it.  Independent of the streaming
    engine; used as the oracle it must match in exact mode.
    """
    objects = list(objects)
    if not objects:
        return set()
    values = np.array([o.feature_value for o in objects], dtype=float)
    ids = [o.object_id for o in objects]
    counts = np.zeros(len(values), dtype=np.int64)
    block = 512
    for start in range(0, len(values), block):
        chunk = values[start:start + block]
        within = np.abs(chunk[:, None] - values[None, :]) <= params.radius
        counts[start:start + block] = within.sum(axis=1) - 1  # exclude self
    k = params.neighbor_threshold
    return {oid for oid, c in zip(ids, counts) if c < k}
