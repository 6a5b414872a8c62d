"""Geometric reductions over sample grids.

Everything here is a streamed reduction: maps, frames and metrics are
evaluated on row blocks of a product grid and combined pointwise, so only
a few rows of the (possibly very fine) grid are ever alive. The pointwise
algebra is closed-form for distribution rank one and two: generalized
eigenvalues through explicit 2x2 Cholesky factors, singular values
through 2x2 symmetric eigenvalue formulas.

Conventions. For a map f and frame V spanning the distribution H with
metric G, the pullback on H is P = (df V)^T (df V). Defects are measured
against G: the defect norm of a symmetric form D is the largest absolute
generalized eigenvalue of (D, G). The comparison metric used for map
distances extends G by declaring the frame [V L^{-T} | W] orthonormal,
where G = L L^T and W is a Euclidean-unit completion of the span of V.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch
from .expressions import axis_grid
from .geometry import BilinearFieldOnH, FrameField, MetricOnH, PeriodicDomain
from .maps import MapRep


def _gen_eig_range(D: np.ndarray, G: np.ndarray):
    """Min and max generalized eigenvalue of symmetric (D, G), G > 0.

    Closed form for k in {1, 2}: eigenvalues of L^{-1} D L^{-T} for the
    Cholesky factor G = L L^T.
    """
    k = D.shape[-1]
    if k == 1:
        e = D[..., 0, 0] / G[..., 0, 0]
        return e, e
    if k != 2:
        raise DimensionMismatch("closed forms cover distribution rank 1 and 2")
    l11 = np.sqrt(G[..., 0, 0])
    beta = G[..., 0, 1] / G[..., 0, 0]
    l22sq = G[..., 1, 1] - G[..., 0, 1] * beta
    a11 = D[..., 0, 0] / (l11 * l11)
    a12 = (D[..., 0, 1] - beta * D[..., 0, 0]) / (l11 * np.sqrt(l22sq))
    a22 = (D[..., 1, 1] - 2.0 * beta * D[..., 0, 1]
           + beta * beta * D[..., 0, 0]) / l22sq
    mean = 0.5 * (a11 + a22)
    disc = np.sqrt(np.maximum(0.25 * (a11 - a22) ** 2 + a12 * a12, 0.0))
    return mean - disc, mean + disc


def _sym2_max_eig(G2: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of a symmetric 2x2 matrix field."""
    mean = 0.5 * (G2[..., 0, 0] + G2[..., 1, 1])
    disc = np.sqrt(np.maximum(
        0.25 * (G2[..., 0, 0] - G2[..., 1, 1]) ** 2 + G2[..., 0, 1] ** 2, 0.0))
    return mean + disc


def _extension_columns(V: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Columns of E = [V L^{-T} | W], the comparison-orthonormal frame.

    For rank 1 the completion W is the Euclidean-unit rotation of the
    (normalized) frame vector; for rank 2 no completion is needed.
    """
    k = V.shape[-1]
    if k == 2:
        l11 = np.sqrt(G[..., 0, 0])
        beta = G[..., 0, 1] / G[..., 0, 0]
        l22 = np.sqrt(G[..., 1, 1] - G[..., 0, 1] * beta)
        E = np.empty_like(V)
        E[..., 0] = V[..., 0] / l11[..., None]
        E[..., 1] = (V[..., 1] - beta[..., None] * V[..., 0]) / l22[..., None]
        return E
    v = V[..., 0]
    vn = v / np.sqrt(G[..., 0, 0])[..., None]
    wn = v / np.linalg.norm(v, axis=-1, keepdims=True)
    E = np.empty(V.shape[:-1] + (2,))
    E[..., 0] = vn
    E[..., 0 + 1] = np.stack([-wn[..., 1], wn[..., 0]], axis=-1)
    return E


def survey(fmap: MapRep, frame: FrameField, metric: MetricOnH,
           res: tuple, target: BilinearFieldOnH = None,
           reference: MapRep = None) -> dict:
    """One streamed pass over a res[0] x res[1] grid.

    Always reports the shortness margin (min generalized eigenvalue of
    (G - P, G)) and the immersion margin (min singular value of df V
    L^{-T}). With target, reports the defect norm sup |gen-eig(target - P,
    G)|. With reference, reports the jet distance sup sigma_max((df -
    df_ref) E) and the value distance sup |f - f_ref|.
    """
    n1, n2 = int(res[0]), int(res[1])
    domain = fmap.domain
    tgrid = axis_grid(n1, domain.periods[0])
    pvals = axis_grid(n2, domain.periods[1])
    block = fmap.row_block_size(n2)
    out = {
        "shortness_margin": np.inf,
        "immersion_margin": np.inf,
        "pull_sup": 0.0,
    }
    if target is not None:
        out["defect"] = 0.0
        out["defect_argmax"] = (0.0, 0.0)
    if reference is not None:
        out["jet_distance"] = 0.0
        out["value_distance"] = 0.0
    for lo in range(0, n1, block):
        tvals = tgrid[lo:lo + block]
        val, d1, d2 = fmap.jets_on_rows(tvals, n2)
        df = np.stack([d1, d2], axis=-1)
        V = frame.values_on_axes((tvals, pvals))
        G = metric.values_on_axes((tvals, pvals))
        dfv = np.einsum("tpma,tpak->tpmk", df, V)
        P = np.einsum("tpmi,tpmj->tpij", dfv, dfv)
        pmin, pmax = _gen_eig_range(P, G)
        out["shortness_margin"] = min(out["shortness_margin"],
                                      float(1.0 - pmax.max()))
        out["immersion_margin"] = min(
            out["immersion_margin"],
            float(np.sqrt(max(pmin.min(), 0.0))))
        out["pull_sup"] = max(out["pull_sup"], float(pmax.max()))
        if target is not None:
            B = target.values_on_axes((tvals, pvals))
            emin, emax = _gen_eig_range(B - P, G)
            mag = np.maximum(np.abs(emin), np.abs(emax))
            idx = np.unravel_index(int(np.argmax(mag)), mag.shape)
            if float(mag[idx]) > out["defect"]:
                out["defect"] = float(mag[idx])
                out["defect_argmax"] = (float(tvals[idx[0]]),
                                        float(pvals[idx[1]]))
        if reference is not None:
            rval, rd1, rd2 = reference.jets_on_rows(tvals, n2)
            delta = np.stack([d1 - rd1, d2 - rd2], axis=-1)
            E = _extension_columns(V, G)
            C = np.einsum("tpma,tpab->tpmb", delta, E)
            G2 = np.einsum("tpma,tpmb->tpab", C, C)
            out["jet_distance"] = max(
                out["jet_distance"],
                float(np.sqrt(max(_sym2_max_eig(G2).max(), 0.0))))
            out["value_distance"] = max(
                out["value_distance"],
                float(np.sqrt(((val - rval) ** 2).sum(axis=-1).max())))
    return out


# ---------- spec-level wrappers ----------

def pullback_on_H(fmap: MapRep, frame: FrameField) -> BilinearFieldOnH:
    """Pullback of the target inner product restricted to the distribution."""
    def rows(axes):
        tvals, pvals = axes
        n2 = pvals.size
        step = fmap.domain.periods[1] / n2
        if n2 > 1 and not np.allclose(np.diff(pvals), step):
            raise DimensionMismatch("pullback rows need a uniform second axis")
        _, d1, d2 = fmap.jets_on_rows(np.asarray(tvals, dtype=float), n2)
        df = np.stack([d1, d2], axis=-1)
        V = frame.values_on_axes((tvals, pvals))
        dfv = np.einsum("tpma,tpak->tpmk", df, V)
        return np.einsum("tpmi,tpmj->tpij", dfv, dfv)

    def at_points(pts):
        df = fmap.differential_at(pts)
        V = frame.values_at(pts)
        dfv = np.einsum("pma,pak->pmk", df, V)
        return np.einsum("pmi,pmj->pij", dfv, dfv)

    bw = fmap.content_freqs()
    return BilinearFieldOnH.from_callable(frame.k, rows, point_eval=at_points,
                                          bandwidth_hint=(2 * bw[0], 2 * bw[1]))


def defect_norm(B: BilinearFieldOnH, G: MetricOnH, domain: PeriodicDomain,
                res: tuple = None) -> float:
    """Sup over the grid of the largest absolute generalized eigenvalue."""
    res = domain.sample_grid if res is None else res
    axes = domain.axes(res)
    D = B.values_on_axes(axes)
    Gv = G.values_on_axes(axes)
    emin, emax = _gen_eig_range(D, Gv)
    return float(np.maximum(np.abs(emin), np.abs(emax)).max())


def map_distance(f: MapRep, g: MapRep, frame: FrameField, metric: MetricOnH,
                 res: tuple = None) -> float:
    """Sup of sigma_max((df - dg) E) in the extended comparison metric."""
    res = f.domain.sample_grid if res is None else res
    rep = survey(f, frame, metric, res, reference=g)
    return rep["jet_distance"]


def value_distance(f: MapRep, g: MapRep, res: tuple = None) -> float:
    """Sup over the grid of the Euclidean distance between map values."""
    res = f.domain.sample_grid if res is None else res
    rep = survey(f, FrameField(f.domain, _unit_theta_frame(f.domain)),
                 MetricOnH.unit(f.domain, 1), res, reference=g)
    return rep["value_distance"]


def _unit_theta_frame(domain: PeriodicDomain):
    from .expressions import Field2
    one = Field2.constant(1.0, domain.periods)
    zero = Field2.constant(0.0, domain.periods)
    return ((one, zero),)


def h_immersion_margin(fmap: MapRep, frame: FrameField, metric: MetricOnH,
                       res: tuple = None) -> float:
    """Min over the grid of the smallest singular value of df V L^{-T}."""
    res = fmap.domain.sample_grid if res is None else res
    return survey(fmap, frame, metric, res)["immersion_margin"]


def shortness_margin(fmap: MapRep, frame: FrameField, metric: MetricOnH,
                     res: tuple = None) -> float:
    """Min generalized eigenvalue of (G - f*h, G); positive iff short."""
    res = fmap.domain.sample_grid if res is None else res
    return survey(fmap, frame, metric, res)["shortness_margin"]


def fd_check(fmap: MapRep, npts: int = 100, step: float = 1e-5,
             seed: int = 0) -> float:
    """Max deviation of the stored differential from central differences."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, 1.0, size=(npts, 2)) * np.array(fmap.domain.periods)
    err = 0.0
    d = fmap.differential_at(pts)
    for ax in range(2):
        e = np.zeros(2)
        e[ax] = step
        fd = (fmap.value_at(pts + e) - fmap.value_at(pts - e)) / (2.0 * step)
        err = max(err, float(np.abs(fd - d[..., ax]).max()))
    return err
