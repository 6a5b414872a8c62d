"""Map representations: smooth base plus a stack of corrugation layers.

A map into R^m is stored as m closed-form coefficient fields (plus an
optional linear-in-coordinates part) together with an ordered stack of
CorrugationLayer records. Each layer adds a one-parameter family of
harmonic bands

    delta_f(x) = (t / lam) * sum_n V_n(x) * sin(n * u(x)),   u = lam * psi(x)

where psi is a fixed integer-covector linear phase and the band envelopes
V_n are vector-valued coefficient fields frozen at construction time. The
differential is exact:

    d delta_f = t * sum_n n * V_n cos(n u) (x) dpsi
              + (t / lam) * sum_n grad V_n * sin(n u).

Both the pointwise and the grid evaluation routes read the same stored
spectra, so they agree to roundoff. Grid evaluation streams over rows of
the first axis and runs one inverse FFT per row block along the second
axis, which keeps memory flat for highly oscillatory stacks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, OutOfRange
from .expressions import _TWO_PI, BumpWindow, Field2
from .geometry import PeriodicDomain

# Row blocks for streamed grid evaluation are sized so one complex buffer
# stays near 2^24 entries.
_ROW_BUDGET = 1 << 22


def phase_covector(periods, pq) -> np.ndarray:
    """Coordinate covector of the linear phase psi(x) = p*x1 + q*x2 (scaled
    so integer (p, q) winds p resp. q times per period)."""
    return np.array([pq[0] * _TWO_PI / periods[0],
                     pq[1] * _TWO_PI / periods[1]])


@dataclass(frozen=True)
class CorrugationLayer:
    """One frozen corrugation: integer phase covector, frequency, bands.

    bands[i] is (n, components) where components holds one Field2 per
    target coordinate: the envelope of the sin(n*u) harmonic. window, when
    set, clips the layer to a compact support: envelopes are built to
    vanish smoothly at the window boundary and evaluation zeroes them
    outside it exactly. diagnostics carries small closed-form fields
    (corrugation amplitude, loop scale) kept for certificates and
    serialization, not used in evaluation.
    """

    covector: tuple
    lam: int
    amp_scale: float
    bands: tuple
    window: BumpWindow = None
    diagnostics: dict = field(default_factory=dict)

    def band_count(self) -> int:
        return len(self.bands)

    def max_axis_freq(self, periods) -> tuple[int, int]:
        """Largest integer mode magnitude per axis contributed by this layer."""
        p, q = self.covector
        out = [0, 0]
        for n, comps in self.bands:
            for f in comps:
                if f.coefs.size == 0:
                    continue
                bw = f.bandwidth()
                out[0] = max(out[0], bw[0] + abs(n * self.lam * p))
                out[1] = max(out[1], bw[1] + abs(n * self.lam * q))
        return (out[0], out[1])

    def value_at(self, pts: np.ndarray, periods, m: int,
                 global_scale: float = 1.0) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        cov = phase_covector(periods, self.covector)
        u = self.lam * (pts @ cov)
        out = np.zeros(pts.shape[:-1] + (m,))
        t_eff = self.amp_scale * global_scale
        for n, comps in self.bands:
            s = np.sin(n * u)
            for a in range(m):
                if comps[a].coefs.size:
                    out[..., a] += comps[a].value_at(pts) * s
        out *= t_eff / self.lam
        if self.window is not None:
            out *= self.window.support_mask(pts)[..., None]
        return out

    def differential_at(self, pts: np.ndarray, periods, m: int,
                        global_scale: float = 1.0) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        cov = phase_covector(periods, self.covector)
        u = self.lam * (pts @ cov)
        out = np.zeros(pts.shape[:-1] + (m, 2))
        t_eff = self.amp_scale * global_scale
        for n, comps in self.bands:
            s = np.sin(n * u)
            c = np.cos(n * u)
            for a in range(m):
                if comps[a].coefs.size == 0:
                    continue
                v = comps[a].value_at(pts)
                g = comps[a].grad_at(pts)
                for ax in range(2):
                    out[..., a, ax] += (t_eff * n * v * c * cov[ax]
                                        + (t_eff / self.lam) * g[..., ax] * s)
        if self.window is not None:
            out *= self.window.support_mask(pts)[..., None, None]
        return out

    def add_row_jets(self, tvals: np.ndarray, pres: int, periods, m: int,
                     out_val: np.ndarray, out_d1: np.ndarray,
                     out_d2: np.ndarray, global_scale: float = 1.0) -> None:
        """Accumulate value and jet rows on tvals x (uniform pres grid).

        Spectral route: every stored envelope mode (j, k) of band n lands
        at total frequency (j + n*lam*p, k + n*lam*q); rows are exact in
        the first coordinate (arbitrary tvals), the second coordinate is
        synthesized by inverse FFT, so pres must resolve the shifted
        bandwidth.
        """
        tvals = np.asarray(tvals, dtype=float).reshape(-1)
        T = tvals.size
        p, q = self.covector
        w1 = _TWO_PI / periods[0]
        w2 = _TWO_PI / periods[1]
        fmax = self.max_axis_freq(periods)[1]
        if pres < 2 * fmax + 2:
            raise OutOfRange("row grid too coarse for the shifted bandwidth")
        t_eff = self.amp_scale * global_scale
        rows = np.arange(T)[:, None]
        mask = None
        if self.window is not None:
            pvals = np.arange(pres) * (periods[1] / pres)
            mask = self.window.mask_on_axes((tvals, pvals)).astype(float)
        for a in range(m):
            spec_v = np.zeros((T, pres), dtype=np.complex128)
            spec_d1 = np.zeros((T, pres), dtype=np.complex128)
            touched = False
            for n, comps in self.bands:
                f = comps[a]
                if f.coefs.size == 0:
                    continue
                touched = True
                for sign in (1, -1):
                    jj = f.freqs[:, 0] * sign + n * self.lam * p * sign
                    kk = f.freqs[:, 1] * sign + n * self.lam * q * sign
                    base = (f.coefs if sign == 1 else np.conj(f.coefs))
                    cf = base * (sign / 2j) * (t_eff / self.lam)
                    ph = np.exp(1j * w1 * np.outer(tvals, jj))
                    contrib = ph * cf[None, :]
                    cols = (kk % pres)[None, :]
                    np.add.at(spec_v, (rows, cols), contrib)
                    np.add.at(spec_d1, (rows, cols),
                              contrib * (1j * w1 * jj)[None, :])
            if not touched:
                continue
            col_freq = np.fft.fftfreq(pres, d=1.0 / pres)
            val_a = (np.fft.ifft(spec_v, axis=1) * pres).real
            d2_a = (np.fft.ifft(
                spec_v * (1j * w2 * col_freq)[None, :], axis=1) * pres).real
            d1_a = (np.fft.ifft(spec_d1, axis=1) * pres).real
            if mask is not None:
                val_a *= mask
                d1_a *= mask
                d2_a *= mask
            out_val[:, :, a] += val_a
            out_d1[:, :, a] += d1_a
            out_d2[:, :, a] += d2_a

    def with_scale(self, t: float) -> "CorrugationLayer":
        return replace(self, amp_scale=float(t))

    def to_dict(self) -> dict:
        d = {
            "covector": [int(self.covector[0]), int(self.covector[1])],
            "lam": int(self.lam),
            "amp_scale": float(self.amp_scale),
            "bands": [
                {"n": int(n), "components": [f.to_sparse() for f in comps]}
                for n, comps in self.bands
            ],
            "diagnostics": {k: f.to_sparse()
                            for k, f in self.diagnostics.items()},
        }
        if self.window is not None:
            d["window"] = [list(map(float, s)) if s is not None else None
                           for s in self.window.axes]
        return d

    @classmethod
    def from_dict(cls, d: dict, periods) -> "CorrugationLayer":
        bands = tuple(
            (int(b["n"]),
             tuple(Field2.from_sparse(rows, periods)
                   for rows in b["components"]))
            for b in d["bands"]
        )
        window = None
        if d.get("window") is not None:
            axes = tuple(
                None if s is None else (float(s[0]), float(s[1]), int(s[2]))
                for s in d["window"]
            )
            window = BumpWindow(tuple(periods), axes)
        diags = {k: Field2.from_sparse(rows, periods)
                 for k, rows in d.get("diagnostics", {}).items()}
        return cls(covector=(int(d["covector"][0]), int(d["covector"][1])),
                   lam=int(d["lam"]), amp_scale=float(d["amp_scale"]),
                   bands=bands, window=window, diagnostics=diags)


class MapRep:
    """Map of the torus into R^m: closed-form base plus corrugation stack.

    components[a] is the Field2 periodic part of coordinate a; linear is
    an optional (m, 2) matrix adding linear growth in the coordinates
    (zero for honestly periodic maps). amp_scale multiplies every layer's
    own amplitude: the straight-line homotopy from the base map (0) to the
    fully corrugated map (1).
    """

    def __init__(self, domain: PeriodicDomain, components, linear=None,
                 layers=(), amp_scale: float = 1.0):
        self.domain = domain
        self.components = tuple(components)
        self.m = len(self.components)
        if self.m == 0:
            raise DimensionMismatch("map needs at least one target coordinate")
        self.linear = (np.zeros((self.m, 2)) if linear is None
                       else np.asarray(linear, dtype=float).reshape(self.m, 2))
        self.layers = tuple(layers)
        self.amp_scale = float(amp_scale)

    # ---------- evaluation ----------

    def value_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        out = np.empty(pts.shape[:-1] + (self.m,))
        for a in range(self.m):
            out[..., a] = self.components[a].value_at(pts)
        out += pts @ self.linear.T
        for layer in self.layers:
            out += layer.value_at(pts, self.domain.periods, self.m,
                                  self.amp_scale)
        return out

    def differential_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        out = np.empty(pts.shape[:-1] + (self.m, 2))
        for a in range(self.m):
            out[..., a, :] = self.components[a].grad_at(pts)
        out += self.linear
        for layer in self.layers:
            out += layer.differential_at(pts, self.domain.periods, self.m,
                                         self.amp_scale)
        return out

    def jets_on_rows(self, tvals: np.ndarray, pres: int):
        """(value, d1, d2) arrays of shape (T, pres, m) on tvals x phi-grid."""
        tvals = np.asarray(tvals, dtype=float).reshape(-1)
        pvals = np.arange(pres) * (self.domain.periods[1] / pres)
        shape = (tvals.size, pres, self.m)
        val = np.zeros(shape)
        d1 = np.zeros(shape)
        d2 = np.zeros(shape)
        for a in range(self.m):
            v, g1, g2 = self.components[a].jets_on_axes(tvals, pvals)
            val[:, :, a] = v
            d1[:, :, a] = g1
            d2[:, :, a] = g2
        val += tvals[:, None, None] * self.linear[:, 0][None, None, :]
        val += pvals[None, :, None] * self.linear[:, 1][None, None, :]
        d1 += self.linear[:, 0][None, None, :]
        d2 += self.linear[:, 1][None, None, :]
        for layer in self.layers:
            layer.add_row_jets(tvals, pres, self.domain.periods, self.m,
                               val, d1, d2, self.amp_scale)
        return val, d1, d2

    def row_block_size(self, pres: int) -> int:
        return max(1, min(64, _ROW_BUDGET // max(1, pres)))

    # ---------- structure ----------

    def with_layer(self, layer: CorrugationLayer) -> "MapRep":
        return MapRep(self.domain, self.components, self.linear,
                      self.layers + (layer,), self.amp_scale)

    def with_amplitude_scale(self, t: float) -> "MapRep":
        return MapRep(self.domain, self.components, self.linear,
                      self.layers, float(t))

    def base_map(self) -> "MapRep":
        return MapRep(self.domain, self.components, self.linear, (), 1.0)

    def content_freqs(self) -> tuple[int, int]:
        """Max integer mode magnitude per axis over base and all layers."""
        out = [0, 0]
        for f in self.components:
            bw = f.bandwidth()
            out[0] = max(out[0], bw[0])
            out[1] = max(out[1], bw[1])
        for layer in self.layers:
            mf = layer.max_axis_freq(self.domain.periods)
            out[0] = max(out[0], mf[0])
            out[1] = max(out[1], mf[1])
        return (out[0], out[1])

    def max_lambda(self) -> int:
        return max((layer.lam for layer in self.layers), default=0)
