"""Band-limited scalar fields on periodic 2-dimensional domains.

Two families of objects live here:

* Field2 / Field1: real trigonometric polynomials stored as sparse complex
  spectra. Values and first derivatives are exact analytic evaluations of
  the stored modes, at arbitrary points or on uniform grids (FFT route).
  These are the closed-form coefficient functions used everywhere: frame
  coefficients, metric entries, map components, frozen corrugation data.

* BumpWindow / band partitions of unity: compactly supported axis-aligned
  cosine-power windows with exact zero outside their support, used for
  chart-local decomposition terms and locality masks.

Conventions: a mode (j, k) has angular frequency (2*pi*j/P1, 2*pi*k/P2)
for domain periods (P1, P2); value(x) = Re sum c_jk exp(i w.x). Spectra of
real fields keep Hermitian symmetry by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfRange

_TWO_PI = 2.0 * np.pi
# Pointwise evaluation is chunked so points x modes stays in cache-friendly
# blocks regardless of spectrum size.
_EVAL_CHUNK = 2048


def axis_grid(n: int, period: float) -> np.ndarray:
    """Uniform sample coordinates of one periodic axis, endpoint excluded."""
    return np.arange(n) * (period / n)


def grid_points(axes: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """Cartesian product of two axis grids as an (N1, N2, 2) array."""
    t, p = axes
    out = np.empty((t.size, p.size, 2))
    out[..., 0] = t[:, None]
    out[..., 1] = p[None, :]
    return out


def _wrap_delta(x: np.ndarray, center: float, period: float) -> np.ndarray:
    """Signed displacement from center, wrapped to [-period/2, period/2)."""
    d = (x - center) % period
    return np.where(d >= 0.5 * period, d - period, d)


class Field1:
    """Real trigonometric polynomial of one periodic variable."""

    __slots__ = ("period", "freqs", "coefs")

    def __init__(self, period: float, freqs: np.ndarray, coefs: np.ndarray):
        self.period = float(period)
        self.freqs = np.asarray(freqs, dtype=np.int64)
        self.coefs = np.asarray(coefs, dtype=np.complex128)

    @classmethod
    def from_samples(cls, vals: np.ndarray, period: float, tol: float = 0.0) -> "Field1":
        vals = np.asarray(vals, dtype=float)
        n = vals.size
        spec = np.fft.fft(vals) / n
        freqs = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
        if n % 2 == 0:
            spec[n // 2] = 0.0  # ambiguous Nyquist bin; construction grids carry headroom
        keep = np.abs(spec) > tol
        return cls(period, freqs[keep], spec[keep])

    def value_at(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        w = self.freqs * (_TWO_PI / self.period)
        flat = t.reshape(-1)
        out = np.empty(flat.size)
        for lo in range(0, flat.size, _EVAL_CHUNK):
            blk = flat[lo:lo + _EVAL_CHUNK]
            out[lo:lo + _EVAL_CHUNK] = (
                np.exp(1j * np.outer(blk, w)) @ self.coefs
            ).real
        return out.reshape(t.shape)

    def derivative_at(self, t: np.ndarray) -> np.ndarray:
        w = self.freqs * (_TWO_PI / self.period)
        d = Field1(self.period, self.freqs, self.coefs * (1j * w))
        return d.value_at(t)

    def values_on_grid(self, n: int) -> np.ndarray:
        if self.freqs.size == 0:
            return np.zeros(n)
        if n <= 2 * int(np.max(np.abs(self.freqs))):
            raise OutOfRange("grid too coarse for the stored bandwidth")
        spec = np.zeros(n, dtype=np.complex128)
        spec[self.freqs % n] += self.coefs
        return (np.fft.ifft(spec) * n).real

    def mean(self) -> float:
        sel = self.freqs == 0
        return float(self.coefs[sel].real.sum()) if sel.any() else 0.0


class Field2:
    """Real trigonometric polynomial of two periodic variables.

    Stored sparsely as integer mode pairs with complex coefficients; all
    evaluation is an exact analytic sum over the stored modes, so the
    object *is* its spectrum: grid, point, line and derivative routes are
    mutually consistent to roundoff by construction.
    """

    __slots__ = ("periods", "freqs", "coefs")

    def __init__(self, periods, freqs: np.ndarray, coefs: np.ndarray):
        self.periods = (float(periods[0]), float(periods[1]))
        self.freqs = np.asarray(freqs, dtype=np.int64).reshape(-1, 2)
        self.coefs = np.asarray(coefs, dtype=np.complex128).reshape(-1)

    # ---------- construction ----------

    @classmethod
    def constant(cls, c: float, periods=( _TWO_PI, _TWO_PI)) -> "Field2":
        return cls(periods, np.array([[0, 0]]), np.array([c + 0j]))

    @classmethod
    def from_samples(cls, vals: np.ndarray, periods=(_TWO_PI, _TWO_PI),
                     tol: float = 1e-14) -> "Field2":
        """Spectrum of a real sample grid; relative truncation at tol.

        The sample grid must oversample the true content: even-size
        Nyquist bins are zeroed rather than interpreted.
        """
        vals = np.asarray(vals, dtype=float)
        n1, n2 = vals.shape
        spec = np.fft.fft2(vals) / (n1 * n2)
        if n1 % 2 == 0:
            spec[n1 // 2, :] = 0.0
        if n2 % 2 == 0:
            spec[:, n2 // 2] = 0.0
        f1 = np.fft.fftfreq(n1, d=1.0 / n1).astype(np.int64)
        f2 = np.fft.fftfreq(n2, d=1.0 / n2).astype(np.int64)
        mag = np.abs(spec)
        cut = tol * mag.max() if mag.max() > 0 else np.inf
        jj, kk = np.nonzero(mag > cut)
        freqs = np.stack([f1[jj], f2[kk]], axis=1)
        return cls(periods, freqs, spec[jj, kk])

    @classmethod
    def from_cos_sin(cls, terms, periods=(_TWO_PI, _TWO_PI)) -> "Field2":
        """Exact construction from (j, k, cos_amp, sin_amp) harmonics."""
        acc: dict[tuple[int, int], complex] = {}
        for j, k, ac, asn in terms:
            c = 0.5 * (ac - 1j * asn)
            acc[(j, k)] = acc.get((j, k), 0j) + c
            acc[(-j, -k)] = acc.get((-j, -k), 0j) + np.conj(c)
        freqs = np.array(list(acc.keys()), dtype=np.int64).reshape(-1, 2)
        coefs = np.array(list(acc.values()), dtype=np.complex128)
        keep = np.abs(coefs) > 0
        return cls(periods, freqs[keep], coefs[keep])

    # ---------- basic queries ----------

    def bandwidth(self) -> tuple[int, int]:
        if self.freqs.size == 0:
            return (0, 0)
        scale = np.abs(self.coefs).max()
        live = np.abs(self.coefs) > 1e-13 * scale
        if not live.any():
            return (0, 0)
        f = np.abs(self.freqs[live])
        return (int(f[:, 0].max()), int(f[:, 1].max()))

    def max_abs_coef(self) -> float:
        return float(np.abs(self.coefs).max()) if self.coefs.size else 0.0

    def truncate(self, tol: float) -> "Field2":
        """Drop modes below tol relative to the largest coefficient."""
        if self.coefs.size == 0:
            return self
        keep = np.abs(self.coefs) > tol * np.abs(self.coefs).max()
        return Field2(self.periods, self.freqs[keep], self.coefs[keep])

    # ---------- evaluation ----------

    def _omegas(self) -> np.ndarray:
        s = np.array([_TWO_PI / self.periods[0], _TWO_PI / self.periods[1]])
        return self.freqs * s[None, :]

    def value_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, 2)
        if self.coefs.size == 0:
            return np.zeros(flat.shape[0]).reshape(pts.shape[:-1])
        w = self._omegas()
        out = np.empty(flat.shape[0])
        for lo in range(0, flat.shape[0], _EVAL_CHUNK):
            blk = flat[lo:lo + _EVAL_CHUNK]
            out[lo:lo + _EVAL_CHUNK] = (
                np.exp(1j * (blk @ w.T)) @ self.coefs
            ).real
        return out.reshape(pts.shape[:-1])

    def grad_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, 2)
        out = np.zeros((flat.shape[0], 2))
        if self.coefs.size:
            w = self._omegas()
            for lo in range(0, flat.shape[0], _EVAL_CHUNK):
                blk = flat[lo:lo + _EVAL_CHUNK]
                ph = np.exp(1j * (blk @ w.T))
                for ax in range(2):
                    out[lo:lo + _EVAL_CHUNK, ax] = (
                        ph @ (self.coefs * 1j * w[:, ax])
                    ).real
        return out.reshape(pts.shape[:-1] + (2,))

    def _dense_spectrum(self):
        if self.coefs.size == 0:
            return 0, 0, np.zeros((1, 1), dtype=np.complex128)
        J = int(np.abs(self.freqs[:, 0]).max())
        K = int(np.abs(self.freqs[:, 1]).max())
        C = np.zeros((2 * J + 1, 2 * K + 1), dtype=np.complex128)
        np.add.at(C, (self.freqs[:, 0] + J, self.freqs[:, 1] + K), self.coefs)
        return J, K, C

    def values_on_axes(self, tvals: np.ndarray, pvals: np.ndarray) -> np.ndarray:
        """Exact values on the product of two arbitrary coordinate vectors.

        Separable evaluation: two small matrix products against the dense
        mini-spectrum. Intended for the narrow spectra of coefficient data
        (frames, metrics, base maps); wide spectra fall back to pointwise
        evaluation.
        """
        tvals = np.asarray(tvals, dtype=float).reshape(-1)
        pvals = np.asarray(pvals, dtype=float).reshape(-1)
        if self.coefs.size == 0:
            return np.zeros((tvals.size, pvals.size))
        J, K, C = self._dense_spectrum()
        if (2 * J + 1) * (2 * K + 1) > 4_000_000:
            pts = np.empty((tvals.size, pvals.size, 2))
            pts[..., 0] = tvals[:, None]
            pts[..., 1] = pvals[None, :]
            return self.value_at(pts)
        w1 = _TWO_PI / self.periods[0]
        w2 = _TWO_PI / self.periods[1]
        e1 = np.exp(1j * w1 * np.outer(tvals, np.arange(-J, J + 1)))
        e2 = np.exp(1j * w2 * np.outer(pvals, np.arange(-K, K + 1)))
        return ((e1 @ C) @ e2.T).real

    def jets_on_axes(self, tvals: np.ndarray, pvals: np.ndarray):
        """(value, d/dt, d/dp) arrays on an axis product, one spectrum pass."""
        tvals = np.asarray(tvals, dtype=float).reshape(-1)
        pvals = np.asarray(pvals, dtype=float).reshape(-1)
        shape = (tvals.size, pvals.size)
        if self.coefs.size == 0:
            return np.zeros(shape), np.zeros(shape), np.zeros(shape)
        J, K, C = self._dense_spectrum()
        if (2 * J + 1) * (2 * K + 1) > 4_000_000:
            pts = np.empty(shape + (2,))
            pts[..., 0] = tvals[:, None]
            pts[..., 1] = pvals[None, :]
            g = self.grad_at(pts)
            return self.value_at(pts), g[..., 0], g[..., 1]
        w1 = _TWO_PI / self.periods[0]
        w2 = _TWO_PI / self.periods[1]
        jj = np.arange(-J, J + 1)
        kk = np.arange(-K, K + 1)
        e1 = np.exp(1j * w1 * np.outer(tvals, jj))
        e2 = np.exp(1j * w2 * np.outer(pvals, kk))
        val = ((e1 @ C) @ e2.T).real
        d1 = ((e1 @ (C * (1j * w1 * jj)[:, None])) @ e2.T).real
        d2 = ((e1 @ (C * (1j * w2 * kk)[None, :])) @ e2.T).real
        return val, d1, d2

    def values_on_grid(self, res: tuple[int, int]) -> np.ndarray:
        """Exact values on a uniform res[0] x res[1] grid via zero-padded FFT."""
        n1, n2 = int(res[0]), int(res[1])
        bw = self.bandwidth()
        if (n1 < 2 * bw[0] + 1) or (n2 < 2 * bw[1] + 1):
            raise OutOfRange("grid too coarse for the stored bandwidth")
        spec = np.zeros((n1, n2), dtype=np.complex128)
        np.add.at(spec, (self.freqs[:, 0] % n1, self.freqs[:, 1] % n2), self.coefs)
        return (np.fft.ifft2(spec) * (n1 * n2)).real

    def grad_on_grid(self, res: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        out = []
        for ax in range(2):
            s = _TWO_PI / self.periods[ax]
            d = Field2(self.periods, self.freqs,
                       self.coefs * (1j * s * self.freqs[:, ax]))
            out.append(d.values_on_grid(res))
        return out[0], out[1]

    def on_line(self, axis: int, coord: float) -> Field1:
        """Restrict to a coordinate line: axis is the FIXED axis index."""
        w_fixed = _TWO_PI / self.periods[axis]
        phase = np.exp(1j * w_fixed * self.freqs[:, axis] * coord)
        free = 1 - axis
        acc: dict[int, complex] = {}
        for f, c in zip(self.freqs[:, free], self.coefs * phase):
            acc[int(f)] = acc.get(int(f), 0j) + c
        freqs = np.array(list(acc.keys()), dtype=np.int64)
        coefs = np.array(list(acc.values()), dtype=np.complex128)
        return Field1(self.periods[free], freqs, coefs)

    # ---------- algebra ----------

    def __add__(self, other: "Field2") -> "Field2":
        acc: dict[tuple[int, int], complex] = {}
        for fld in (self, other):
            for (j, k), c in zip(map(tuple, fld.freqs), fld.coefs):
                acc[(j, k)] = acc.get((j, k), 0j) + c
        freqs = np.array(list(acc.keys()), dtype=np.int64).reshape(-1, 2)
        coefs = np.array(list(acc.values()), dtype=np.complex128)
        keep = np.abs(coefs) > 0
        return Field2(self.periods, freqs[keep], coefs[keep])

    def __mul__(self, scalar: float) -> "Field2":
        return Field2(self.periods, self.freqs, self.coefs * scalar)

    __rmul__ = __mul__

    def __sub__(self, other: "Field2") -> "Field2":
        return self + (other * -1.0)

    # ---------- serialization ----------

    def to_sparse(self) -> list:
        order = np.lexsort((self.freqs[:, 1], self.freqs[:, 0]))
        return [
            [int(self.freqs[i, 0]), int(self.freqs[i, 1]),
             float(self.coefs[i].real), float(self.coefs[i].imag)]
            for i in order
        ]

    @classmethod
    def from_sparse(cls, rows, periods=(_TWO_PI, _TWO_PI)) -> "Field2":
        if not rows:
            return cls(periods, np.zeros((0, 2), dtype=np.int64),
                       np.zeros(0, dtype=np.complex128))
        arr = np.asarray(rows, dtype=float)
        freqs = arr[:, :2].astype(np.int64)
        coefs = arr[:, 2] + 1j * arr[:, 3]
        return cls(periods, freqs, coefs)


def field2_from_row_sampler(sampler, res: tuple[int, int],
                            periods=(_TWO_PI, _TWO_PI), tol: float = 1e-9,
                            block: int = 16) -> Field2:
    """Fit a Field2 to streamed sample rows without materializing the grid.

    sampler(tvals) must return the (len(tvals), res[1]) block of samples at
    the uniform grid rows tvals. Two passes: the first finds the live
    column frequencies (relative threshold tol against the global peak),
    the second assembles the reduced (res[0], n_live) spectrum and
    transforms along the first axis. Even-size Nyquist bins are dropped.
    """
    n1, n2 = int(res[0]), int(res[1])
    t = axis_grid(n1, periods[0])
    ncol = n2 // 2 + 1
    colmax = np.zeros(ncol)
    for lo in range(0, n1, block):
        rows = np.asarray(sampler(t[lo:lo + block]), dtype=float)
        spec = np.fft.rfft(rows, axis=1) / n2
        np.maximum(colmax, np.abs(spec).max(axis=0), out=colmax)
    peak = colmax.max()
    if peak == 0.0:
        return Field2(periods, np.zeros((0, 2), dtype=np.int64),
                      np.zeros(0, dtype=np.complex128))
    live = np.nonzero(colmax > tol * peak)[0]
    if n2 % 2 == 0:
        live = live[live != n2 // 2]
    reduced = np.empty((n1, live.size), dtype=np.complex128)
    for lo in range(0, n1, block):
        rows = np.asarray(sampler(t[lo:lo + block]), dtype=float)
        spec = np.fft.rfft(rows, axis=1) / n2
        reduced[lo:lo + rows.shape[0], :] = spec[:, live]
    theta_spec = np.fft.fft(reduced, axis=0) / n1
    if n1 % 2 == 0:
        theta_spec[n1 // 2, :] = 0.0
    f1 = np.fft.fftfreq(n1, d=1.0 / n1).astype(np.int64)
    mag = np.abs(theta_spec)
    jj, kk = np.nonzero(mag > tol * peak)
    freqs = np.stack([f1[jj], live[kk]], axis=1)
    coefs = theta_spec[jj, kk]
    # rfft halves: duplicate positive-column modes Hermitian-conjugate so the
    # stored spectrum is the full two-sided one.
    pos = freqs[:, 1] > 0
    freqs = np.concatenate([freqs, -freqs[pos]], axis=0)
    coefs = np.concatenate([coefs, np.conj(coefs[pos])], axis=0)
    return Field2(periods, freqs, coefs)


def fields_from_row_sampler(sampler, res: tuple[int, int], count: int,
                            periods=(_TWO_PI, _TWO_PI), tol: float = 1e-9,
                            block: int = 16) -> list:
    """Like field2_from_row_sampler, for count channels sharing one sampler.

    sampler(tvals) returns a (len(tvals), res[1], count) block; the
    expensive sampling runs twice total instead of twice per channel.
    Thresholds are per channel, relative to that channel's own peak.
    """
    n1, n2 = int(res[0]), int(res[1])
    t = axis_grid(n1, periods[0])
    ncol = n2 // 2 + 1
    colmax = np.zeros((ncol, count))
    for lo in range(0, n1, block):
        rows = np.asarray(sampler(t[lo:lo + block]), dtype=float)
        spec = np.fft.rfft(rows, axis=1) / n2
        np.maximum(colmax, np.abs(spec).max(axis=0), out=colmax)
    peaks = colmax.max(axis=0)
    lives = []
    for c in range(count):
        if peaks[c] == 0.0:
            lives.append(np.zeros(0, dtype=np.int64))
            continue
        live = np.nonzero(colmax[:, c] > tol * peaks[c])[0]
        if n2 % 2 == 0:
            live = live[live != n2 // 2]
        lives.append(live)
    reduced = [np.empty((n1, live.size), dtype=np.complex128)
               for live in lives]
    for lo in range(0, n1, block):
        rows = np.asarray(sampler(t[lo:lo + block]), dtype=float)
        spec = np.fft.rfft(rows, axis=1) / n2
        for c, live in enumerate(lives):
            if live.size:
                reduced[c][lo:lo + rows.shape[0], :] = spec[:, live, c]
    out = []
    f1 = np.fft.fftfreq(n1, d=1.0 / n1).astype(np.int64)
    for c, live in enumerate(lives):
        if live.size == 0:
            out.append(Field2(periods, np.zeros((0, 2), dtype=np.int64),
                              np.zeros(0, dtype=np.complex128)))
            continue
        theta_spec = np.fft.fft(reduced[c], axis=0) / n1
        if n1 % 2 == 0:
            theta_spec[n1 // 2, :] = 0.0
        mag = np.abs(theta_spec)
        jj, kk = np.nonzero(mag > tol * peaks[c])
        freqs = np.stack([f1[jj], live[kk]], axis=1)
        coefs = theta_spec[jj, kk]
        pos = freqs[:, 1] > 0
        freqs = np.concatenate([freqs, -freqs[pos]], axis=0)
        coefs = np.concatenate([coefs, np.conj(coefs[pos])], axis=0)
        out.append(Field2(periods, freqs, coefs))
    return out


def product_field(a: Field2, b: Field2, headroom: int = 4) -> Field2:
    """Pointwise product as a new Field2 (sample-multiply-refit, exact for
    trig polynomials when the summed bandwidth is resolved)."""
    bw1 = a.bandwidth()
    bw2 = b.bandwidth()
    res = (max(8, 2 * (bw1[0] + bw2[0]) + headroom),
           max(8, 2 * (bw1[1] + bw2[1]) + headroom))
    vals = a.values_on_grid(res) * b.values_on_grid(res)
    return Field2.from_samples(vals, a.periods, tol=0.0).truncate(1e-15)


@dataclass(frozen=True)
class BumpWindow:
    """Separable compact cosine-power window on the torus.

    Per axis, either None (no constraint) or (center, halfwidth, power p):
    the factor is cos(pi*d/(2*halfwidth))**(2p) for wrapped displacement
    |d| <= halfwidth and exactly 0 outside. The window is C^(2p-1) across
    the support boundary.
    """

    periods: tuple[float, float]
    axes: tuple  # per-axis None or (center, halfwidth, power)

    def value_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        out = np.ones(pts.shape[:-1])
        for ax, spec in enumerate(self.axes):
            if spec is None:
                continue
            c, h, p = spec
            d = _wrap_delta(pts[..., ax], c, self.periods[ax])
            inside = np.abs(d) < h
            f = np.zeros_like(out)
            f[inside] = np.cos(0.5 * np.pi * d[inside] / h) ** (2 * p)
            out = out * f
        return out

    def grad_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        vals = []
        ders = []
        for ax, spec in enumerate(self.axes):
            if spec is None:
                vals.append(np.ones(pts.shape[:-1]))
                ders.append(np.zeros(pts.shape[:-1]))
                continue
            c, h, p = spec
            d = _wrap_delta(pts[..., ax], c, self.periods[ax])
            inside = np.abs(d) < h
            f = np.zeros(pts.shape[:-1])
            g = np.zeros(pts.shape[:-1])
            arg = 0.5 * np.pi * d[inside] / h
            f[inside] = np.cos(arg) ** (2 * p)
            g[inside] = (-2 * p * (0.5 * np.pi / h) * np.sin(arg)
                         * np.cos(arg) ** (2 * p - 1))
            vals.append(f)
            ders.append(g)
        out = np.empty(pts.shape[:-1] + (2,))
        out[..., 0] = ders[0] * vals[1]
        out[..., 1] = vals[0] * ders[1]
        return out

    def support_mask(self, pts: np.ndarray) -> np.ndarray:
        """Boolean mask of the closed support (True strictly inside)."""
        pts = np.asarray(pts, dtype=float)
        mask = np.ones(pts.shape[:-1], dtype=bool)
        for ax, spec in enumerate(self.axes):
            if spec is None:
                continue
            c, h, _ = spec
            d = _wrap_delta(pts[..., ax], c, self.periods[ax])
            mask &= np.abs(d) < h
        return mask

    def mask_on_axes(self, axes: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
        t, p = axes
        masks = []
        for ax, (spec, coords) in enumerate(zip(self.axes, (t, p))):
            if spec is None:
                masks.append(np.ones(coords.size, dtype=bool))
            else:
                c, h, _ = spec
                d = _wrap_delta(coords, c, self.periods[ax])
                masks.append(np.abs(d) < h)
        return masks[0][:, None] & masks[1][None, :]


def band_partition(period: float, count: int, power: int = 2, axis: int = 0):
    """Overlapping band windows along one axis with exact unit sum.

    Returns (windows, normalizer) where windows[j] is the unnormalized
    cos^(2*power) band and normalizer(t) = sum_j windows[j](t), bounded
    away from zero. The normalized weights windows[j]/normalizer form a
    smooth partition of unity with compact band supports.
    """
    h = period / count
    specs = [((j + 0.5) * h, h, power) for j in range(count)]
    windows = [
        BumpWindow((period, period),
                   (s, None) if axis == 0 else (None, s))
        for s in specs
    ]

    def normalizer(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        total = np.zeros(t.shape)
        for c, hw, p in specs:
            d = _wrap_delta(t, c, period)
            inside = np.abs(d) < hw
            total[inside] += np.cos(0.5 * np.pi * d[inside] / hw) ** (2 * p)
        return total

    return windows, normalizer
