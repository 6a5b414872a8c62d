"""Decomposition of positive defect forms into primitive rank-one terms.

A primitive term is phi^2 * (dpsi (x) dpsi) restricted to the
distribution, with dpsi a fixed integer covector (globally defined on the
torus) and phi^2 a nonnegative coefficient field. decompose writes a
positive form as a finite sum of such terms:

* rank 1: a single dictionary covector whose pairing with the spanning
  field is bounded away from zero does the job; when none exists the
  domain is split into four overlapping coordinate bands, each with its
  own covector, weighted by a smooth partition of unity.
* rank 2: the three dictionary covectors give a pointwise 3x3 linear
  solve; a negative coefficient anywhere means the form left the
  dictionary's positive cone and is reported, never clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonPositiveMetric, NotInCone
from scipy.fft import next_fast_len

from .expressions import _TWO_PI, BumpWindow, Field2, band_partition
from .geometry import BilinearFieldOnH, FrameField, PeriodicDomain
from .maps import phase_covector

# A covector is usable on a region when |dpsi(X)| stays above this floor
# (relative to the frame scale) on the region's inner part.
_W_FLOOR = 1e-3
_ROUNDOFF_CONE = 1e-12
_BAND_COUNT = 4


@dataclass(frozen=True)
class CovectorDictionary:
    """Ordered integer covectors; defaults span all symmetric forms for k=2."""

    covectors: tuple = ((1, 0), (0, 1), (1, 1))

    def __iter__(self):
        return iter(self.covectors)

    def __len__(self):
        return len(self.covectors)


class WeightField:
    """Nonnegative coefficient field phi^2 with two consistent eval routes.

    Both routes run the same pointwise formula; closed_form is set when
    the weight happens to be a plain trigonometric polynomial.
    """

    def __init__(self, point_eval, axes_eval=None, closed: Field2 = None,
                 label: str = ""):
        self._point = point_eval
        self._axes = axes_eval
        self.closed = closed
        self.label = label

    @classmethod
    def from_field(cls, f: Field2, label: str = "") -> "WeightField":
        return cls(point_eval=f.value_at,
                   axes_eval=lambda t, p: f.values_on_axes(t, p),
                   closed=f, label=label)

    def value_at(self, pts: np.ndarray) -> np.ndarray:
        return self._point(np.asarray(pts, dtype=float))

    def values_on_axes(self, tvals, pvals) -> np.ndarray:
        tvals = np.asarray(tvals, dtype=float).reshape(-1)
        pvals = np.asarray(pvals, dtype=float).reshape(-1)
        if self._axes is not None:
            return self._axes(tvals, pvals)
        pts = np.empty((tvals.size, pvals.size, 2))
        pts[..., 0] = tvals[:, None]
        pts[..., 1] = pvals[None, :]
        return self._point(pts)


@dataclass(frozen=True)
class PrimitiveTerm:
    """One rank-one summand phi^2 * (dpsi)^2 restricted to H."""

    psi_covector: tuple
    phi_sq: WeightField
    window: BumpWindow = None
    label: str = ""

    def pairing_fields(self, frame: FrameField) -> tuple:
        """dpsi(X_i) for each frame field, as closed-form scalars."""
        cov = phase_covector(frame.domain.periods, self.psi_covector)
        out = []
        for vec in frame.vectors:
            out.append(vec[0] * cov[0] + vec[1] * cov[1])
        return tuple(out)

    def bilinear(self, frame: FrameField) -> BilinearFieldOnH:
        """The term as a symmetric form on H in the frame basis."""
        pair = self.pairing_fields(frame)
        k = frame.k

        def rows(axes):
            tvals, pvals = axes
            phi2 = self.phi_sq.values_on_axes(tvals, pvals)
            w = np.stack([p.values_on_axes(tvals, pvals) for p in pair],
                         axis=-1)
            out = phi2[..., None, None] * w[..., :, None] * w[..., None, :]
            if self.window is not None:
                out *= self.window.mask_on_axes(
                    (np.asarray(tvals, dtype=float).reshape(-1),
                     np.asarray(pvals, dtype=float).reshape(-1)))[..., None, None]
            return out

        def at_points(pts):
            pts = np.asarray(pts, dtype=float)
            phi2 = self.phi_sq.value_at(pts)
            w = np.stack([p.value_at(pts) for p in pair], axis=-1)
            out = phi2[..., None, None] * w[..., :, None] * w[..., None, :]
            if self.window is not None:
                out *= self.window.support_mask(pts)[..., None, None]
            return out

        return BilinearFieldOnH.from_callable(k, rows, point_eval=at_points)


def _norm_scale(vals: np.ndarray) -> float:
    return float(np.abs(vals).max())


def _k1_weight(s_axes, s_point, w: Field2, window: BumpWindow,
               rho_pair, label: str) -> WeightField:
    """phi^2 = rho * s / w^2 with the band weight rho (1 when global).

    Where the band window vanishes faster than w^2, the quotient extends
    by zero; the guard only fires strictly inside that zero set.
    """

    def at_points(pts):
        pts = np.asarray(pts, dtype=float)
        s = s_point(pts)
        wv = w.value_at(pts)
        if window is None:
            return s / (wv * wv)
        rho = rho_pair[0].value_at(pts) / rho_pair[1](pts[..., rho_pair[2]])
        mask = window.support_mask(pts) & (np.abs(wv) > 1e-150)
        out = np.zeros_like(s)
        out[mask] = rho[mask] * s[mask] / (wv[mask] * wv[mask])
        return out

    def on_axes(tvals, pvals):
        tvals = np.asarray(tvals, dtype=float).reshape(-1)
        pvals = np.asarray(pvals, dtype=float).reshape(-1)
        s = s_axes(tvals, pvals)
        wv = w.values_on_axes(tvals, pvals)
        if window is None:
            return s / (wv * wv)
        pts = np.empty((tvals.size, pvals.size, 2))
        pts[..., 0] = tvals[:, None]
        pts[..., 1] = pvals[None, :]
        rho = rho_pair[0].value_at(pts) / rho_pair[1](pts[..., rho_pair[2]])
        mask = window.support_mask(pts) & (np.abs(wv) > 1e-150)
        out = np.zeros_like(s)
        out[mask] = rho[mask] * s[mask] / (wv[mask] * wv[mask])
        return out

    return WeightField(at_points, on_axes, label=label)


def _sample_axes(S, domain):
    """Certification axes wide enough for the form's spectral content."""
    bw = getattr(S, "bandwidth_hint", (0, 0)) or (0, 0)
    res = tuple(
        max(domain.sample_grid[ax], next_fast_len(2 * int(bw[ax]) + 17))
        for ax in range(2))
    return domain.axes(res)


def decompose(S: BilinearFieldOnH, frame: FrameField,
              dictionary: CovectorDictionary = CovectorDictionary()) -> list:
    """Write S = sum phi_i^2 (dpsi_i)^2|_H with dictionary covectors.

    Exact reconstruction at every sample (the weights are pointwise
    quotients or pointwise linear solves of the same sampled data).
    """
    domain = frame.domain
    k = frame.k
    if S.k != k:
        raise DimensionMismatch("form rank does not match frame rank")
    axes = _sample_axes(S, domain)
    Sv = S.values_on_axes(axes)
    scale = _norm_scale(Sv)
    if scale <= 1e-14:
        return []
    eig = np.linalg.eigvalsh(Sv)
    if float(eig[..., 0].min()) < -1e-12 * scale:
        raise NonPositiveMetric("defect form is not positive semidefinite")
    if k == 1:
        return _decompose_k1(S, frame, dictionary)
    if k == 2:
        return _decompose_k2(S, frame, dictionary)
    raise DimensionMismatch("decomposition implemented for rank 1 and 2")


def _pairing(frame: FrameField, cov) -> Field2:
    c = phase_covector(frame.domain.periods, cov)
    vec = frame.vectors[0]
    return vec[0] * c[0] + vec[1] * c[1]


def _probe_margin(frame: FrameField, cov, probe: np.ndarray) -> float:
    """min |dpsi(X)| over the probe, per unit covector length.

    Normalizing by the covector norm makes margins comparable across
    covector magnitudes: the quotient weight absorbs any rescaling, so
    only the direction quality matters. A sign change between adjacent
    probe points pins a zero crossing between them, so the margin is 0
    even when the grid straddles the zero; probe dim 0 sweeps the band
    (open interval), dim 1 wraps around the other axis.
    """
    c = phase_covector(frame.domain.periods, cov)
    w = _pairing(frame, cov).value_at(probe)
    if (np.signbit(w[1:]) != np.signbit(w[:-1])).any():
        return 0.0
    if (np.signbit(w) != np.signbit(np.roll(w, -1, axis=1))).any():
        return 0.0
    return float(np.abs(w).min()) / float(np.hypot(c[0], c[1]))


def _fallback_covectors():
    """Primitive integer pairs up to range 8, one per direction line."""
    out = []
    for p in range(0, 9):
        for q in range(-8, 9):
            if p == 0 and q <= 0:
                continue
            if p > 0 and q == 0 and p != 1:
                continue
            if math.gcd(p, abs(q)) != 1:
                continue
            out.append((p, q))
    return out


def _decompose_k1(S, frame, dictionary) -> list:
    domain = frame.domain
    axes = _sample_axes(S, domain)

    def s_axes(tvals, pvals):
        return S.values_on_axes((tvals, pvals))[..., 0, 0]

    def s_point(pts):
        return S.values_at(pts)[..., 0, 0]

    best = None
    for cov in dictionary:
        w = _pairing(frame, cov)
        wmin = float(np.abs(w.values_on_axes(*axes)).min())
        if best is None or wmin > best[0] + 1e-15:
            best = (wmin, cov, w)
    wmin, cov, w = best
    if wmin > _W_FLOOR:
        return [PrimitiveTerm(
            psi_covector=cov,
            phi_sq=WeightField(
                lambda pts, _w=w: s_point(pts) / _w.value_at(pts) ** 2,
                lambda t, p, _w=w: s_axes(t, p) / _w.values_on_axes(t, p) ** 2,
                label="global quotient"),
            label=f"covector {cov}")]

    # No single covector works globally: cover one coordinate with
    # overlapping bands and pick a covector per band. The phase of a
    # bump-supported term is still affine, so the covector need not come
    # from the user dictionary; primitive integer pairs up to a fixed
    # range give direction granularity far below the floor. Pairings may
    # vanish at the support boundary: the quartic window beats the
    # quadratic of the weight quotient there.
    try:
        return _banded_k1(S, frame, dictionary, 0, s_axes, s_point)
    except NotInCone as first_err:
        try:
            return _banded_k1(S, frame, dictionary, 1, s_axes, s_point)
        except NotInCone:
            raise first_err from None


def _banded_k1(S, frame, dictionary, axis, s_axes, s_point) -> list:
    domain = frame.domain
    axes = _sample_axes(S, domain)
    other = axes[1 - axis]
    candidates = list(dictionary)
    seen = set(candidates)
    candidates += [c for c in _fallback_covectors() if c not in seen]
    windows, normalizer = band_partition(domain.periods[axis], _BAND_COUNT,
                                         axis=axis)
    terms = []
    for j, win in enumerate(windows):
        c, h, _ = win.axes[axis]
        probe_t = np.linspace(c - 0.98 * h, c + 0.98 * h, 65)
        grids = np.meshgrid(probe_t % domain.periods[axis], other,
                            indexing="ij")
        probe = np.stack(grids if axis == 0 else grids[::-1], axis=-1)
        pick = None
        for covc in candidates:
            margin = _probe_margin(frame, covc, probe)
            if pick is None or margin > pick[0] + 1e-15:
                pick = (margin, covc)
        margin, covc = pick
        if margin <= _W_FLOOR:
            raise NotInCone(
                "no integer covector pairs with the line field across the "
                f"band near coordinate {float(c):.4f} on axis {axis} (best "
                f"|dpsi(X)| = {margin:.3e}); the field turns too fast for "
                f"{_BAND_COUNT} bands",
                point=(float(c), 0.0) if axis == 0 else (0.0, float(c)),
                coefficients=[margin],
            )
        w = _pairing(frame, covc)
        terms.append(PrimitiveTerm(
            psi_covector=covc,
            phi_sq=_k1_weight(s_axes, s_point, w, win,
                              (win, normalizer, axis), label=f"band {j}"),
            window=win,
            label=f"band {j} covector {covc}"))
    return terms


def _decompose_k2(S, frame, dictionary) -> list:
    if len(dictionary) < 3:
        raise DimensionMismatch("rank-2 decomposition needs three covectors")
    domain = frame.domain
    covs = list(dictionary)[:3]
    pairs = []
    for cov in covs:
        c = phase_covector(domain.periods, cov)
        pairs.append(tuple(vec[0] * c[0] + vec[1] * c[1]
                           for vec in frame.vectors))

    def coeffs_at(pts):
        pts = np.asarray(pts, dtype=float)
        Sv = S.values_at(pts)
        M = np.empty(pts.shape[:-1] + (3, 3))
        for l, pair in enumerate(pairs):
            w1 = pair[0].value_at(pts)
            w2 = pair[1].value_at(pts)
            M[..., 0, l] = w1 * w1
            M[..., 1, l] = w2 * w2
            M[..., 2, l] = w1 * w2
        rhs = np.stack([Sv[..., 0, 0], Sv[..., 1, 1], Sv[..., 0, 1]], axis=-1)
        return np.linalg.solve(M, rhs[..., None])[..., 0]

    def coeffs_axes(tvals, pvals):
        tvals = np.asarray(tvals, dtype=float).reshape(-1)
        pvals = np.asarray(pvals, dtype=float).reshape(-1)
        Sv = S.values_on_axes((tvals, pvals))
        M = np.empty(Sv.shape[:-2] + (3, 3))
        for l, pair in enumerate(pairs):
            w1 = pair[0].values_on_axes(tvals, pvals)
            w2 = pair[1].values_on_axes(tvals, pvals)
            M[..., 0, l] = w1 * w1
            M[..., 1, l] = w2 * w2
            M[..., 2, l] = w1 * w2
        rhs = np.stack([Sv[..., 0, 0], Sv[..., 1, 1], Sv[..., 0, 1]], axis=-1)
        return np.linalg.solve(M, rhs[..., None])[..., 0]

    axes = _sample_axes(S, domain)
    C = coeffs_axes(*axes)
    scale = max(_norm_scale(C), 1e-30)
    worst = np.unravel_index(int(np.argmin(C)), C.shape)
    if C[worst] < -_ROUNDOFF_CONE * scale:
        t, p = axes
        raise NotInCone(
            "pointwise coefficients leave the positive cone "
            f"(min {float(C[worst]):.6e} at grid sample {tuple(worst)})",
            point=(float(t[worst[0]]), float(p[worst[1]])),
            coefficients=[float(c) for c in C[worst[0], worst[1]]])

    terms = []
    for l, cov in enumerate(covs):
        terms.append(PrimitiveTerm(
            psi_covector=cov,
            phi_sq=WeightField(
                lambda pts, _l=l: np.maximum(coeffs_at(pts)[..., _l], 0.0),
                lambda t, p, _l=l: np.maximum(coeffs_axes(t, p)[..., _l], 0.0),
                label=f"cone solve {l}"),
            label=f"covector {cov}"))
    return terms


def halve_and_decompose(S: BilinearFieldOnH, frame: FrameField,
                        dictionary: CovectorDictionary = CovectorDictionary()
                        ) -> list:
    """Decomposition of S/2: the per-stage target adds half the defect."""
    return decompose(S.scaled(0.5), frame, dictionary)


def reconstruction_residual(terms: list, S: BilinearFieldOnH,
                            frame: FrameField, res: tuple = None) -> float:
    """Sup over samples of |sum of terms - S| in the frame matrix norm."""
    domain = frame.domain
    axes = domain.axes(res) if res is not None else _sample_axes(S, domain)
    total = np.zeros(S.values_on_axes(axes).shape)
    for term in terms:
        total += term.bilinear(frame).values_on_axes(axes)
    return float(np.abs(total - S.values_on_axes(axes)).max())
