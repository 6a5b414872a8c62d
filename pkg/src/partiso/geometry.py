"""Domains, distributions and metric fields.

A PeriodicDomain is a flat torus given by per-axis periods and a base
sample grid. A FrameField is a list of pointwise independent vector
fields spanning the distribution under study; a MetricOnH is the inner
product on that distribution expressed in the frame. BilinearFieldOnH
carries symmetric (not necessarily definite) forms such as metric
defects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import next_fast_len

from .errors import DimensionMismatch, NonPositiveMetric, OutOfRange
from .expressions import Field2, axis_grid

_MIN_RES = 8
_FRAME_SV_FLOOR = 1e-8
_METRIC_EIG_FLOOR = 1e-10


@dataclass(frozen=True)
class PeriodicDomain:
    """Flat periodic box: dimension, per-axis periods, base resolutions."""

    dim: int = 2
    periods: tuple = (2.0 * np.pi, 2.0 * np.pi)
    sample_grid: tuple = (64, 64)

    def __post_init__(self):
        if self.dim != len(self.periods) or self.dim != len(self.sample_grid):
            raise DimensionMismatch("periods/sample_grid length must equal dim")
        if any(p <= 0 for p in self.periods):
            raise OutOfRange("periods must be positive")
        if any(int(r) < _MIN_RES for r in self.sample_grid):
            raise OutOfRange(f"sample resolutions must be >= {_MIN_RES}")

    def axes(self, res=None) -> tuple[np.ndarray, np.ndarray]:
        res = self.sample_grid if res is None else res
        return tuple(axis_grid(int(n), p) for n, p in zip(res, self.periods))

    def points(self, res=None) -> np.ndarray:
        t, p = self.axes(res)
        out = np.empty((t.size, p.size, 2))
        out[..., 0] = t[:, None]
        out[..., 1] = p[None, :]
        return out


def refined_resolution(base: int, content_freq: float, refine: float,
                       cap: int, fundamental: int = 0) -> int:
    """Resolution for sup estimation over content up to content_freq.

    Uses refine samples per top wavelength plus a small offset, rounded to
    an FFT-friendly length that is not commensurate with the fundamental
    oscillation frequency (so sample phases sweep the full period instead
    of repeating a short cycle).
    """
    want = max(int(base), int(np.ceil(refine * content_freq)) + 17)
    if want > cap:
        want = int(cap)
    res = next_fast_len(want)
    f = max(1, int(fundamental))
    if f > 1:
        guard = 0
        while np.gcd(res, f) > max(1, f // 32) and guard < 64:
            res = next_fast_len(res + 11)
            guard += 1
    return min(res, next_fast_len(int(cap) + 1))


class FrameField:
    """k pointwise independent vector fields on a periodic domain.

    vectors[i][a] is the Field2 coefficient of the a-th coordinate of the
    i-th field. Pointwise independence is certified on the base sample
    grid at construction.
    """

    def __init__(self, domain: PeriodicDomain, vectors):
        self.domain = domain
        self.vectors = tuple(tuple(comp for comp in vec) for vec in vectors)
        self.k = len(self.vectors)
        if self.k == 0 or self.k > domain.dim:
            raise DimensionMismatch("frame rank must be in 1..dim")
        for vec in self.vectors:
            if len(vec) != domain.dim:
                raise DimensionMismatch("frame vector has wrong component count")
        v = self.values_on_axes(domain.axes())
        sv = np.linalg.svd(v, compute_uv=False)
        if float(sv[..., -1].min()) <= _FRAME_SV_FLOOR:
            raise DimensionMismatch(
                "frame fields are not pointwise independent on the sample grid")

    def values_on_axes(self, axes) -> np.ndarray:
        """Frame matrix V(x) with shape (n1, n2, dim, k)."""
        t, p = axes
        out = np.empty((t.size, p.size, self.domain.dim, self.k))
        for i, vec in enumerate(self.vectors):
            for a, comp in enumerate(vec):
                out[..., a, i] = comp.values_on_axes(t, p)
        return out

    def values_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        out = np.empty(pts.shape[:-1] + (self.domain.dim, self.k))
        for i, vec in enumerate(self.vectors):
            for a, comp in enumerate(vec):
                out[..., a, i] = comp.value_at(pts)
        return out

    def bandwidth(self) -> tuple[int, int]:
        bws = [comp.bandwidth() for vec in self.vectors for comp in vec]
        return (max(b[0] for b in bws), max(b[1] for b in bws))


class MetricOnH:
    """Symmetric positive definite k x k matrix of coefficient fields."""

    def __init__(self, domain: PeriodicDomain, entries):
        self.domain = domain
        self.entries = tuple(tuple(e for e in row) for row in entries)
        self.k = len(self.entries)
        for row in self.entries:
            if len(row) != self.k:
                raise DimensionMismatch("metric entries must form a square matrix")
        g = self.values_on_axes(domain.axes())
        asym = np.abs(g - np.swapaxes(g, -1, -2)).max()
        if asym > 1e-12:
            raise NonPositiveMetric("metric entries are not symmetric")
        eig = np.linalg.eigvalsh(g)
        if float(eig[..., 0].min()) <= _METRIC_EIG_FLOOR:
            raise NonPositiveMetric("metric is not positive definite on samples")

    def values_on_axes(self, axes) -> np.ndarray:
        t, p = axes
        out = np.empty((t.size, p.size, self.k, self.k))
        for i in range(self.k):
            for j in range(self.k):
                out[..., i, j] = self.entries[i][j].values_on_axes(t, p)
        return out

    def values_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        out = np.empty(pts.shape[:-1] + (self.k, self.k))
        for i in range(self.k):
            for j in range(self.k):
                out[..., i, j] = self.entries[i][j].value_at(pts)
        return out

    @classmethod
    def unit(cls, domain: PeriodicDomain, k: int = 1) -> "MetricOnH":
        entries = [[Field2.constant(1.0 if i == j else 0.0, domain.periods)
                    for j in range(k)] for i in range(k)]
        return cls(domain, entries)


@dataclass
class BilinearFieldOnH:
    """Symmetric k x k form on the distribution; closed-form or lazy.

    Exactly one of entries (k x k Field2 matrix) or row_eval
    (callable(axes) -> (n1, n2, k, k)) is set. Symmetry is by
    construction: closed-form entries are stored upper-triangular and
    mirrored, lazy evaluators are symmetrized at read time.
    """

    k: int
    entries: tuple = None
    row_eval: object = None
    point_eval: object = None
    bandwidth_hint: tuple = (0, 0)

    def values_on_axes(self, axes) -> np.ndarray:
        if self.row_eval is not None:
            raw = self.row_eval(axes)
            return 0.5 * (raw + np.swapaxes(raw, -1, -2))
        t, p = axes
        out = np.empty((t.size, p.size, self.k, self.k))
        for i in range(self.k):
            for j in range(self.k):
                e = self.entries[i][j] if j >= i else self.entries[j][i]
                out[..., i, j] = e.values_on_axes(t, p)
        return out

    def values_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.entries is not None:
            out = np.empty(pts.shape[:-1] + (self.k, self.k))
            for i in range(self.k):
                for j in range(self.k):
                    e = self.entries[i][j] if j >= i else self.entries[j][i]
                    out[..., i, j] = e.value_at(pts)
            return out
        if self.point_eval is None:
            raise DimensionMismatch(
                "this bilinear field has no pointwise evaluation route")
        raw = self.point_eval(pts)
        return 0.5 * (raw + np.swapaxes(raw, -1, -2))

    @classmethod
    def from_entries(cls, entries) -> "BilinearFieldOnH":
        k = len(entries)
        bw = (0, 0)
        for i in range(k):
            for j in range(i, k):
                b = entries[i][j].bandwidth()
                bw = (max(bw[0], b[0]), max(bw[1], b[1]))
        return cls(k=k, entries=tuple(tuple(row) for row in entries),
                   bandwidth_hint=bw)

    @classmethod
    def from_callable(cls, k: int, fn, point_eval=None,
                      bandwidth_hint=(0, 0)) -> "BilinearFieldOnH":
        return cls(k=k, row_eval=fn, point_eval=point_eval,
                   bandwidth_hint=bandwidth_hint)

    def scaled(self, c: float) -> "BilinearFieldOnH":
        if self.row_eval is not None:
            fn = self.row_eval
            pe = self.point_eval
            return BilinearFieldOnH.from_callable(
                self.k, lambda axes: c * fn(axes),
                point_eval=(None if pe is None
                            else (lambda pts: c * pe(pts))),
                bandwidth_hint=self.bandwidth_hint)
        rows = [[self.entries[min(i, j)][max(i, j)] * c for j in range(self.k)]
                for i in range(self.k)]
        return BilinearFieldOnH.from_entries(rows)
