"""One convex-integration step: corrugate a map along a primitive term.

Adding phi^2 (dpsi)^2 to the pullback of f means stretching f's derivative
along the direction v (the metric-unit field in the distribution pointing
across the phase kernel) from speed s0 = |df(v)| to speed

    r = sqrt(s0^2 + phi^2 * dpsi(v)^2),

while leaving derivatives along ker(dpsi) untouched. The step replaces
df(v) with a loop of radius r in the plane spanned by e1 = df(v)/s0 and a
unit field e2 orthogonal to it (and to the image of the kernel
directions, when the distribution has rank 2):

    gamma(u) = r [cos(a cos u) e1 + sin(a cos u) e2],

whose u-average is r J0(a) e1. The amplitude a is matched by solving
r J0(a) = s0, so the loop's mean is exactly df(v) and its speed exactly
r. Integrating the mean-zero part of gamma in u and dividing by the
frequency gives the actual map increment; expanding in harmonics of u
(a Bessel-function expansion of cos/sin of a cos u) yields the band form
stored in CorrugationLayer:

    delta_f = (1/lam) sum_n V_n(x) sin(n lam psi),
    V_n = (2 (-1)^(floor(n/2)) J_n(a) / n) * (r / dpsi(v)) * e_(1 if n even else 2).

All envelope fields are frozen once per term as band-limited coefficient
fields (they do not depend on the frequency), then the frequency ladder
just re-tests the same envelopes at doubling lam until the measured
postconditions hold:

    (a) the corrugated map is still an immersion on the distribution;
    (b) the defect against the step target drops below budget.delta;
    (c) the jet distance moved stays within sqrt(2 * term norm) + epsilon;
    (d) the value distance stays within the C0 bound.

The sqrt(2) in (c) is the sharp constant for this planar loop: the loop's
mean-square deviation from its average is exactly r^2 (1 - J0(a)^2) (the
term norm), and its sup deviation approaches sqrt(2) times that as the
amplitude shrinks, since J0(a) > cos(a) on (0, j0). A bound without the
sqrt(2) is unattainable for any frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.fft import next_fast_len
from scipy.special import j0 as _bessel_j0, jn_zeros, jv

from .errors import (DegenerateFrame, DimensionMismatch, FrequencyExhausted,
                     OutOfRange)
from .expressions import fields_from_row_sampler
from .functionals import defect_norm, pullback_on_H, survey
from .geometry import (BilinearFieldOnH, FrameField, MetricOnH,
                       PeriodicDomain, refined_resolution)
from .maps import CorrugationLayer, MapRep
from .decomposition import PrimitiveTerm

BESSEL_J0_FIRST_ZERO = float(jn_zeros(0, 1)[0])

# Corrugation envelopes are only formed where the term weight exceeds this;
# below it the increment is identically zero and the moving frame need not
# exist.
_PHI_SQ_FLOOR = 1e-14

_GENERIC_E2_CANDIDATES = (
    np.array([0.7548776662, -0.5692099788, 0.3287651954, 0.1848175553,
              -0.7521464716, 0.4038761256, -0.2811992327, 0.6190744682]),
    np.array([-0.1139427735, 0.4233465913, 0.8422877167, -0.5700439098,
              0.2364283944, -0.6612045826, 0.5071515849, 0.1184241416]),
)


@dataclass(frozen=True)
class StepBudget:
    """Per-step tolerances: residual defect, extra jet slack, C0 bound."""

    delta: float
    epsilon: float
    c0_bound: float

    def __post_init__(self):
        if min(self.delta, self.epsilon, self.c0_bound) <= 0:
            raise OutOfRange("step budget entries must be positive")


@dataclass(frozen=True)
class CorrugationConfig:
    n_harmonics: int = 12
    lam_max: int = 1 << 20
    freeze_tol: float = 1e-9
    freeze_oversample: int = 4
    refine: float = 4.0
    grid_cap: int = 1 << 22

    def __post_init__(self):
        if self.n_harmonics < 2 or self.lam_max < 1:
            raise OutOfRange("bad corrugation configuration")


def amplitude_solve(r, s0):
    """The unique a in [0, j0) with r * J0(a) = s0, by bisection.

    Vectorized over arrays; scalar inputs return a float. The residual
    after 80 halvings of [0, j0) is far below the 1e-12 * r contract.
    """
    r_arr = np.asarray(r, dtype=float)
    s_arr = np.asarray(s0, dtype=float)
    scalar = r_arr.ndim == 0 and s_arr.ndim == 0
    r_arr, s_arr = np.broadcast_arrays(r_arr, s_arr)
    if np.any(s_arr <= 0) or np.any(s_arr > r_arr * (1 + 1e-15)):
        raise OutOfRange("amplitude target must satisfy 0 < s0 <= r")
    q = np.minimum(s_arr / r_arr, 1.0)
    lo = np.zeros(q.shape)
    hi = np.full(q.shape, BESSEL_J0_FIRST_ZERO)
    exact = q >= 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        too_deep = _bessel_j0(mid) < q
        hi = np.where(too_deep, mid, hi)
        lo = np.where(too_deep, lo, mid)
    alpha = np.where(exact, 0.0, 0.5 * (lo + hi))
    return float(alpha) if scalar else alpha


def harmonic_coefficients(alpha: np.ndarray, n: int) -> np.ndarray:
    """Coefficient of sin(n u) in the mean-zero primitive of the loop,
    before the r/dpsi(v) scale: 2 (-1)^(n//2) J_n(alpha) / n."""
    return 2.0 * ((-1.0) ** (n // 2)) * jv(n, alpha) / n


def _phase_pairing(periods, covector, vecs: np.ndarray) -> np.ndarray:
    cov = np.array([covector[0] * 2.0 * np.pi / periods[0],
                    covector[1] * 2.0 * np.pi / periods[1]])
    return vecs @ cov


def _unit_direction(frame_vals: np.ndarray, metric_vals: np.ndarray,
                    periods, covector):
    """Metric-unit v in H crossing the phase kernel, oriented dpsi(v) > 0.

    Returns (v coordinates, dpsi(v), kernel-direction coordinates or None).
    """
    k = frame_vals.shape[-1]
    if k == 1:
        X = frame_vals[..., 0]
        v = X / np.sqrt(metric_vals[..., 0, 0])[..., None]
        w = _phase_pairing(periods, covector, v)
        sign = np.where(w >= 0, 1.0, -1.0)
        return v * sign[..., None], w * sign, None
    if k != 2:
        raise DimensionMismatch("corrugation handles rank 1 and 2 only")
    wf = np.stack([_phase_pairing(periods, covector, frame_vals[..., i])
                   for i in range(2)], axis=-1)
    det = (metric_vals[..., 0, 0] * metric_vals[..., 1, 1]
           - metric_vals[..., 0, 1] ** 2)
    ginv_w = np.empty_like(wf)
    ginv_w[..., 0] = (metric_vals[..., 1, 1] * wf[..., 0]
                      - metric_vals[..., 0, 1] * wf[..., 1]) / det
    ginv_w[..., 1] = (metric_vals[..., 0, 0] * wf[..., 1]
                      - metric_vals[..., 0, 1] * wf[..., 0]) / det
    quad = np.maximum((wf * ginv_w).sum(axis=-1), 1e-300)
    v_frame = ginv_w / np.sqrt(quad)[..., None]
    v = np.einsum("...ak,...k->...a", frame_vals, v_frame)
    w = _phase_pairing(periods, covector, v)
    sign = np.where(w >= 0, 1.0, -1.0)
    v = v * sign[..., None]
    w = w * sign
    ker_frame = np.stack([-wf[..., 1], wf[..., 0]], axis=-1)
    ker = np.einsum("...ak,...k->...a", frame_vals, ker_frame)
    return v, w, ker


def _normal_pair(dfv: np.ndarray, df_ker: np.ndarray, mask: np.ndarray):
    """e1 along df(v), e2 unit, orthogonal to e1 and to df(kernel).

    The completing vector is one fixed generic candidate projected and
    normalized; the candidate is chosen once for the whole region (the
    best of the two built-ins on the masked samples) so the resulting
    field is smooth. DegenerateFrame when no candidate clears 1e-6.
    """
    m = dfv.shape[-1]
    s0 = np.linalg.norm(dfv, axis=-1)
    e1 = dfv / np.maximum(s0, 1e-300)[..., None]
    if m == 2:
        e2 = np.stack([-e1[..., 1], e1[..., 0]], axis=-1)
        return e1, e2, "rotation"
    dhat = None
    if df_ker is not None:
        # second basis vector of the plane to avoid, orthogonalized to e1
        dperp = df_ker - np.einsum("...a,...a->...", e1, df_ker)[..., None] * e1
        nk = np.linalg.norm(dperp, axis=-1)
        dhat = np.zeros_like(dperp)
        ok = nk > 1e-12 * np.maximum(np.linalg.norm(df_ker, axis=-1), 1e-300)
        dhat[ok] = dperp[ok] / nk[ok][..., None]
    best = None
    for ci, cand in enumerate(_GENERIC_E2_CANDIDATES):
        u = cand[:m] / np.linalg.norm(cand[:m])
        proj = np.broadcast_to(u, e1.shape) - (e1 @ u)[..., None] * e1
        if dhat is not None:
            proj = proj - np.einsum("...a,...a->...", dhat, proj)[..., None] * dhat
        nrm = np.linalg.norm(proj, axis=-1)
        worst = float(nrm[mask].min()) if mask.any() else float(nrm.min())
        if best is None or worst > best[0]:
            best = (worst, proj, nrm, ci)
    worst, proj, nrm, ci = best
    if worst < 1e-6:
        raise DegenerateFrame(
            f"no generic completion clears 1e-6 (best {worst:.3e}); "
            "target dimension leaves no normal direction")
    e2 = np.zeros_like(proj)
    sel = nrm > 1e-300
    e2[sel] = proj[sel] / nrm[sel][..., None]
    return e1, e2, f"candidate {ci}"


def orthonormal_pair(f: MapRep, frame: FrameField, term: PrimitiveTerm,
                     x) -> tuple:
    """The corrugation plane at one point: (e1, e2) as plain vectors."""
    pts = np.asarray(x, dtype=float).reshape(1, 2)
    df = f.differential_at(pts)
    V = frame.values_at(pts)
    # metric values are needed only for the unit normalization of v, which
    # cancels in e1; use the frame Gram as a stand-in scale.
    G = np.einsum("...ai,...aj->...ij", V, V)
    v, w, ker = _unit_direction(V, G, f.domain.periods, term.psi_covector)
    if abs(float(w[0])) < 1e-14:
        raise OutOfRange(
            "phase kernel contains the distribution at this point; "
            "no corrugation direction exists")
    dfv = np.einsum("...ma,...a->...m", df, v)
    df_ker = (np.einsum("...ma,...a->...m", df, ker)
              if ker is not None else None)
    e1, e2, _ = _normal_pair(dfv, df_ker, np.ones(1, dtype=bool))
    return e1[0], e2[0]


def _freeze_envelopes(f: MapRep, frame: FrameField, metric: MetricOnH,
                      term: PrimitiveTerm, cfg: CorrugationConfig):
    """Sample and fit all harmonic envelopes V_n plus diagnostics.

    Returns (proto_layer_at_lam_1, freeze_report). The envelopes do not
    depend on the corrugation frequency, so the ladder reuses them.
    """
    domain = f.domain
    m = f.m
    N = cfg.n_harmonics
    content = f.content_freqs()
    slow = frame.bandwidth()
    res = tuple(
        refined_resolution(
            base=domain.sample_grid[ax],
            content_freq=cfg.freeze_oversample * (content[ax] + slow[ax] + 8),
            refine=1.0, cap=cfg.grid_cap)
        for ax in range(2))
    n2 = res[1]
    pvals = np.arange(n2) * (domain.periods[1] / n2)
    count = N * m + 2
    report = {
        "freeze_res": res,
        "e_orthonormality": 0.0,
        "kernel_orthogonality": 0.0,
        "alpha_max": 0.0,
        "frame_choice": None,
    }

    def sampler(tvals):
        _, d1, d2 = f.jets_on_rows(tvals, n2)
        df = np.stack([d1, d2], axis=-1)
        V = frame.values_on_axes((tvals, pvals))
        G = metric.values_on_axes((tvals, pvals))
        v, w, ker = _unit_direction(V, G, domain.periods, term.psi_covector)
        phi2 = np.maximum(term.phi_sq.values_on_axes(tvals, pvals), 0.0)
        if term.window is not None:
            phi2 = phi2 * term.window.mask_on_axes(
                (np.asarray(tvals, dtype=float).reshape(-1), pvals))
        mask = phi2 > _PHI_SQ_FLOOR
        dfv = np.einsum("tpma,tpa->tpm", df, v)
        df_ker = (np.einsum("tpma,tpa->tpm", df, ker)
                  if ker is not None else None)
        e1, e2, choice = _normal_pair(dfv, df_ker, mask)
        report["frame_choice"] = choice
        s0 = np.linalg.norm(dfv, axis=-1)
        r = np.sqrt(s0 * s0 + phi2 * w * w)
        alpha = np.zeros(r.shape)
        if mask.any():
            alpha[mask] = amplitude_solve(r[mask], s0[mask])
        bscale = np.zeros(r.shape)
        bscale[mask] = r[mask] / w[mask]
        if mask.any():
            dot = np.abs(np.einsum("tpm,tpm->tp", e1, e2))[mask].max()
            n1e = np.abs(np.linalg.norm(e1, axis=-1) - 1.0)[mask].max()
            n2e = np.abs(np.linalg.norm(e2, axis=-1) - 1.0)[mask].max()
            report["e_orthonormality"] = max(report["e_orthonormality"],
                                             float(dot), float(n1e), float(n2e))
            if df_ker is not None:
                lk = np.abs(np.einsum("tpm,tpm->tp", e2, df_ker))[mask]
                report["kernel_orthogonality"] = max(
                    report["kernel_orthogonality"],
                    float(lk.max()) if lk.size else 0.0)
            report["alpha_max"] = max(report["alpha_max"],
                                      float(alpha[mask].max()))
        out = np.zeros(alpha.shape + (count,))
        for n in range(1, N + 1):
            cn = np.zeros(alpha.shape)
            cn[mask] = harmonic_coefficients(alpha[mask], n) * bscale[mask]
            evec = e1 if n % 2 == 0 else e2
            out[..., (n - 1) * m:n * m] = cn[..., None] * evec
        out[..., count - 2] = alpha
        out[..., count - 1] = np.where(mask, bscale, 0.0)
        return out

    block = int(np.clip((1 << 19) // max(1, n2), 1, 64))
    fitted = fields_from_row_sampler(sampler, res, count, domain.periods,
                                     tol=cfg.freeze_tol, block=block)
    bands = tuple(
        (n, tuple(fitted[(n - 1) * m + a] for a in range(m)))
        for n in range(1, N + 1)
    )
    diagnostics = {"alpha": fitted[count - 2], "bscale": fitted[count - 1]}
    if report["alpha_max"] >= BESSEL_J0_FIRST_ZERO:
        raise OutOfRange("corrugation amplitude reached the Bessel zero")
    layer = CorrugationLayer(
        covector=(int(term.psi_covector[0]), int(term.psi_covector[1])),
        lam=1, amp_scale=1.0, bands=bands, window=term.window,
        diagnostics=diagnostics)
    return layer, report


def _step_target(f: MapRep, frame: FrameField,
                 term: PrimitiveTerm) -> BilinearFieldOnH:
    """The step's metric target on H: pullback of f plus the term."""
    pull = pullback_on_H(f, frame)
    term_b = term.bilinear(frame)

    def rows(axes):
        return pull.values_on_axes(axes) + term_b.values_on_axes(axes)

    return BilinearFieldOnH.from_callable(frame.k, rows)


def _axis_base(domain, content: float, ax: int, cfg: CorrugationConfig) -> int:
    # the sample grid is the floor only where the content can fill it;
    # exactly-sparse spectra need no more rows than their top frequency
    return min(domain.sample_grid[ax],
               next_fast_len(int(cfg.refine * content) + 17))


def measurement_resolution(f: MapRep, cfg: CorrugationConfig = None):
    """Grid fitted to the map's own content for sup-type functionals."""
    cfg = CorrugationConfig() if cfg is None else cfg
    content = f.content_freqs()
    return tuple(
        refined_resolution(
            base=_axis_base(f.domain, content[ax], ax, cfg),
            content_freq=content[ax], refine=cfg.refine, cap=cfg.grid_cap)
        for ax in range(2))


def gate_resolution(f1: MapRep, lam: int, covector, cfg: CorrugationConfig):
    """Measurement grid for one ladder candidate, or None past the cap."""
    domain = f1.domain
    content = f1.content_freqs()
    res = []
    for ax in range(2):
        want = cfg.refine * content[ax] + 17
        if want > cfg.grid_cap:
            return None
        res.append(refined_resolution(
            base=_axis_base(domain, content[ax], ax, cfg),
            content_freq=content[ax],
            refine=cfg.refine, cap=cfg.grid_cap,
            fundamental=lam * abs(covector[ax])))
    return tuple(res)


def choose_frequency(f: MapRep, frame: FrameField, metric: MetricOnH,
                     term: PrimitiveTerm, budget: StepBudget,
                     cfg: CorrugationConfig = CorrugationConfig(),
                     lam_start: int = 1):
    """Smallest power-of-two multiple of lam_start passing gates (a)-(d).

    Returns (lam, corrugated map, transcript). The transcript records
    every candidate with its grid and the four measured gate values.
    """
    if lam_start < 1:
        raise OutOfRange("frequency ladder must start at 1 or above")
    proto, freeze_report = _freeze_envelopes(f, frame, metric, term, cfg)
    target = _step_target(f, frame, term)
    term_norm = defect_norm(term.bilinear(frame), metric, f.domain,
                            res=measurement_resolution(f, cfg))
    dist_bound = math.sqrt(2.0 * term_norm) + budget.epsilon
    transcript = {
        "freeze": freeze_report,
        "term_norm": term_norm,
        "dist_bound": dist_bound,
        "candidates": [],
    }
    lam = int(lam_start)
    while lam <= cfg.lam_max:
        layer = replace(proto, lam=lam)
        f1 = f.with_layer(layer)
        res = gate_resolution(f1, lam, layer.covector, cfg)
        if res is None:
            transcript["candidates"].append(
                {"lam": lam, "verdict": "grid cap exceeded"})
            break
        rep = survey(f1, frame, metric, res, target=target, reference=f)
        entry = {
            "lam": lam,
            "res": res,
            "immersion_margin": rep["immersion_margin"],
            "defect": rep["defect"],
            "jet_distance": rep["jet_distance"],
            "value_distance": rep["value_distance"],
            "shortness_margin": rep["shortness_margin"],
        }
        ok = (rep["immersion_margin"] > 0.0
              and rep["defect"] < budget.delta
              and rep["jet_distance"] <= dist_bound
              and rep["value_distance"] <= budget.c0_bound)
        entry["verdict"] = "pass" if ok else "fail"
        transcript["candidates"].append(entry)
        if ok:
            return lam, f1, transcript
        lam *= 2
    raise FrequencyExhausted(transcript)


def corrugate(f: MapRep, term: PrimitiveTerm, budget: StepBudget,
              frame: FrameField, metric: MetricOnH,
              cfg: CorrugationConfig = CorrugationConfig(),
              lam_start: int = 1) -> MapRep:
    """One full convex-integration step; the term with zero weight is free."""
    f1, _ = corrugate_with_transcript(f, term, budget, frame, metric, cfg,
                                      lam_start)
    return f1


def corrugate_with_transcript(f: MapRep, term: PrimitiveTerm,
                              budget: StepBudget, frame: FrameField,
                              metric: MetricOnH,
                              cfg: CorrugationConfig = CorrugationConfig(),
                              lam_start: int = 1):
    axes = f.domain.axes(measurement_resolution(f, cfg))
    phi2 = term.phi_sq.values_on_axes(*axes)
    if term.window is not None:
        phi2 = phi2 * term.window.mask_on_axes(axes)
    if float(np.abs(phi2).max()) <= _PHI_SQ_FLOOR:
        return f, {"trivial": True, "candidates": []}
    lam, f1, transcript = choose_frequency(f, frame, metric, term, budget,
                                           cfg, lam_start)
    transcript["chosen_lam"] = lam
    return f1, transcript
