"""Error taxonomy for the partial-isometry engine.

Every failure mode that a caller can act on gets its own class; all inherit
from GeometryError so library users can catch the whole family at once.
"""

from __future__ import annotations


class GeometryError(Exception):
    """Base class for all engine errors."""


class NonPositiveMetric(GeometryError):
    """A metric field failed its positive-definiteness invariant."""


class DimensionMismatch(GeometryError):
    """Two objects disagree on domain dimension or target dimension."""


class OutOfRange(GeometryError):
    """A scalar argument left its documented interval."""


class NotInCone(GeometryError):
    """A pointwise decomposition produced a negative coefficient.

    The dictionary's positive cone does not contain the form at the
    offending sample, which is attached as .point.
    """

    def __init__(self, message: str, point=None, coefficients=None):
        super().__init__(message)
        self.point = point
        self.coefficients = coefficients


class DegenerateFrame(GeometryError):
    """No usable orthonormal pair exists (target dimension too small)."""


class FrequencyExhausted(GeometryError):
    """No admissible oscillation frequency up to the configured cap.

    .transcript holds the per-candidate gate measurements.
    """

    def __init__(self, message: str, transcript=None):
        super().__init__(message)
        self.transcript = transcript if transcript is not None else []


class StageFailed(GeometryError):
    """A pipeline stage could not meet its postconditions.

    .report carries whatever partial diagnostics were collected and
    .completed the reports of the stages that did succeed.
    """

    def __init__(self, message: str, report=None, completed=None):
        super().__init__(message)
        self.report = report
        self.completed = completed if completed is not None else []


class PeriodicityObstruction(GeometryError):
    """Integrating along a closed orbit produced a multivalued primitive.

    .orbit identifies the orbit, .mean the offending average of the
    right-hand side over it.
    """

    def __init__(self, message: str, orbit=None, mean=None):
        super().__init__(message)
        self.orbit = orbit
        self.mean = mean


class NotHorizontal(GeometryError):
    """A curve's velocity leaves the distribution beyond tolerance."""


class SearchExhausted(GeometryError):
    """A randomized search ran out of trials; .best_margin is attached."""

    def __init__(self, message: str, best_margin=None):
        super().__init__(message)
        self.best_margin = best_margin


class ManifestError(GeometryError):
    """A run manifest is malformed or inconsistent."""
