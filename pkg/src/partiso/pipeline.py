"""Stage loop and outer contraction iteration.

A stage halves the current defect, decomposes the half into primitive
terms, and corrugates once per term. Each term raises the pullback by
its own slice of the target, so the defect left after a full stage is
the untouched half plus the junk the corrugations leaked; with the junk
budgeted at a fixed fraction of the entry defect, every stage contracts
the defect by a factor bounded away from 1. The outer loop repeats
stages until the certified defect meets the target.

All stage arithmetic is measured, never assumed: entry and exit defects,
C^1 and C^0 motion, and shortness margins come from grid surveys at
resolutions matched to the map's exact spectral content.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .corrugation import (CorrugationConfig, StepBudget,
                          corrugate_with_transcript, measurement_resolution)
from .decomposition import CovectorDictionary, halve_and_decompose
from .errors import OutOfRange, StageFailed
from .functionals import defect_norm, pullback_on_H, survey
from .geometry import BilinearFieldOnH, FrameField, MetricOnH
from .maps import MapRep

# Junk budget per stage as a fraction of the entry defect. Must stay
# under 1/6 for the running feasibility inequality to survive the whole
# stage; 0.14 keeps the per-stage contraction near 0.5 + 0.14 = 0.64.
_DELTA_FRACTION = 0.14


def defect_field(f: MapRep, G: MetricOnH, frame: FrameField
                 ) -> BilinearFieldOnH:
    """G minus the pullback of f, restricted to H, both eval routes."""
    pull = pullback_on_H(f, frame)

    def rows(axes):
        return G.values_on_axes(axes) - pull.values_on_axes(axes)

    def at_points(pts):
        return G.values_at(pts) - pull.values_at(pts)

    return BilinearFieldOnH.from_callable(
        frame.k, rows, point_eval=at_points,
        bandwidth_hint=pull.bandwidth_hint)


@dataclass(frozen=True)
class StageBudgets:
    """Per-term junk and slack budgets for one stage.

    delta_primes bound the defect each corrugation may leave against its
    own target; their sum must stay under a sixth of the entry defect.
    epsilons are the per-term slacks on the jet-distance bound, any
    positive summable choice. c0_total is the stage's C^0 allowance,
    split geometrically across terms.
    """

    entry_defect: float
    delta_primes: tuple
    epsilons: tuple
    c0_total: float

    def __post_init__(self):
        dp = tuple(float(d) for d in self.delta_primes)
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "delta_primes", dp)
        object.__setattr__(self, "epsilons", eps)
        if len(dp) != len(eps):
            raise OutOfRange("need one delta and one epsilon per term")
        if not dp:
            raise OutOfRange("stage budgets need at least one term")
        if min(dp) <= 0 or min(eps) <= 0:
            raise OutOfRange("stage budgets must be positive")
        if self.c0_total <= 0:
            raise OutOfRange("stage C0 budget must be positive")
        if self.entry_defect <= 0:
            raise OutOfRange("entry defect must be positive")
        if sum(dp) >= self.entry_defect / 6.0:
            raise OutOfRange(
                f"junk budgets sum to {sum(dp):.6g}, not under a sixth of "
                f"the entry defect {self.entry_defect:.6g}")

    def step_budget(self, k: int) -> StepBudget:
        return StepBudget(
            delta=self.delta_primes[k],
            epsilon=self.epsilons[k],
            c0_bound=self.c0_total * 2.0 ** (-(k + 1)))


def default_budgets(entry_defect: float, term_norms, c0_total: float
                    ) -> StageBudgets:
    """Even junk split, geometrically shrinking jet slacks."""
    count = len(term_norms)
    if count == 0:
        raise OutOfRange("no terms to budget")
    dp = (_DELTA_FRACTION * entry_defect / count,) * count
    eps = tuple(0.1 * math.sqrt(max(term_norms[k], 1e-300)) * 2.0 ** (-k)
                for k in range(count))
    return StageBudgets(entry_defect=entry_defect, delta_primes=dp,
                        epsilons=eps, c0_total=c0_total)


@dataclass(frozen=True)
class StageReport:
    """Measured before/after record of one stage."""

    defect_in: float
    defect_out: float
    c1_moved: float
    c0_moved: float
    layers_added: int
    frequencies: tuple
    shortness_margin_out: float
    wall_time: float
    diagnostics: dict = None


@dataclass(frozen=True)
class RunConfig:
    """Outer-loop contract: stop at eta_target or max_stages."""

    eta_target: float
    max_stages: int = 8
    c0_total: float = 0.5
    contraction_assert: float = 0.7

    def __post_init__(self):
        if self.eta_target <= 0:
            raise OutOfRange("eta_target must be positive")
        if self.max_stages < 0:
            raise OutOfRange("max_stages must be nonnegative")
        if self.c0_total <= 0:
            raise OutOfRange("c0_total must be positive")
        if not 2.0 / 3.0 < self.contraction_assert < 1.0:
            raise OutOfRange(
                "contraction_assert must lie in (2/3, 1): each stage "
                "halves the defect and adds junk, so sub-2/3 per-stage "
                "contraction is not achievable in general")


def _entry_survey(f: MapRep, frame: FrameField, G: MetricOnH,
                  cfg: CorrugationConfig) -> dict:
    res = measurement_resolution(f, cfg)
    return survey(f, frame, G, res, target=G)


def run_stage(f: MapRep, G: MetricOnH, frame: FrameField,
              budgets: StageBudgets = None,
              cfg: CorrugationConfig = None,
              dictionary: CovectorDictionary = None,
              c0_total: float = 0.5,
              entry: dict = None):
    """One full stage: halve, decompose, corrugate term by term.

    Returns (new map, StageReport). budgets=None builds the defaults
    from the measured entry defect and c0_total; an explicit StageBudgets
    must match the decomposition's term count.
    """
    cfg = CorrugationConfig() if cfg is None else cfg
    dictionary = CovectorDictionary() if dictionary is None else dictionary
    t0 = time.monotonic()
    rep0 = _entry_survey(f, frame, G, cfg) if entry is None else entry
    defect_in = rep0["defect"]
    if rep0["shortness_margin"] <= 0 and defect_in > 1e-14:
        raise StageFailed(
            f"stage requires a strictly short start (margin "
            f"{rep0['shortness_margin']:.3e})")
    if defect_in <= 1e-14:
        return f, StageReport(
            defect_in=defect_in, defect_out=defect_in, c1_moved=0.0,
            c0_moved=0.0, layers_added=0, frequencies=(),
            shortness_margin_out=rep0["shortness_margin"],
            wall_time=time.monotonic() - t0,
            diagnostics={"trivial": True})

    S = defect_field(f, G, frame)
    terms = halve_and_decompose(S, frame, dictionary)
    norm_res = measurement_resolution(f, cfg)
    term_norms = [defect_norm(t.bilinear(frame), G, f.domain, res=norm_res)
                  for t in terms]
    if budgets is None:
        budgets = default_budgets(defect_in, term_norms, c0_total)
    elif len(budgets.delta_primes) != len(terms):
        raise OutOfRange(
            f"budgets cover {len(budgets.delta_primes)} terms, "
            f"decomposition produced {len(terms)}")

    f_cur = f
    frequencies = []
    transcripts = []
    layers_added = 0
    for k, term in enumerate(terms):
        try:
            f_cur, transcript = corrugate_with_transcript(
                f_cur, term, budgets.step_budget(k), frame, G, cfg)
        except Exception as exc:
            partial = StageReport(
                defect_in=defect_in, defect_out=float("nan"),
                c1_moved=float("nan"), c0_moved=float("nan"),
                layers_added=layers_added, frequencies=tuple(frequencies),
                shortness_margin_out=float("nan"),
                wall_time=time.monotonic() - t0,
                diagnostics={"failed_term": k, "transcripts": transcripts})
            raise StageFailed(
                f"term {k} of {len(terms)} failed: {exc}",
                report=partial) from exc
        transcripts.append(transcript)
        if transcript.get("trivial"):
            continue
        layers_added += 1
        frequencies.append(transcript["chosen_lam"])
        # running feasibility: what is still short must cover the terms
        # not yet corrugated plus the junk the remaining steps may leak
        margin = transcript["candidates"][-1]["shortness_margin"]
        remaining = sum(term_norms[k + 1:]) + sum(
            budgets.delta_primes[k + 1:])
        if margin <= 0 or (remaining > 0 and margin <= 0.999 * remaining
                           - 1e-12):
            partial = StageReport(
                defect_in=defect_in, defect_out=float("nan"),
                c1_moved=float("nan"), c0_moved=float("nan"),
                layers_added=layers_added, frequencies=tuple(frequencies),
                shortness_margin_out=margin,
                wall_time=time.monotonic() - t0,
                diagnostics={"failed_term": k, "transcripts": transcripts})
            raise StageFailed(
                f"feasibility lost after term {k}: shortness margin "
                f"{margin:.6g} cannot cover the remaining target mass "
                f"{remaining:.6g}", report=partial)

    res_out = measurement_resolution(f_cur, cfg)
    rep1 = survey(f_cur, frame, G, res_out, target=G, reference=f)
    report = StageReport(
        defect_in=defect_in,
        defect_out=rep1["defect"],
        c1_moved=rep1["jet_distance"],
        c0_moved=rep1["value_distance"],
        layers_added=layers_added,
        frequencies=tuple(frequencies),
        shortness_margin_out=rep1["shortness_margin"],
        wall_time=time.monotonic() - t0,
        diagnostics={"transcripts": transcripts,
                     "term_norms": term_norms,
                     "exit_survey_res": res_out,
                     "exit_report": rep1})
    if layers_added and report.defect_out >= defect_in:
        raise StageFailed(
            f"stage did not contract: defect {defect_in:.6g} -> "
            f"{report.defect_out:.6g}", report=report)
    return f_cur, report


def run(f0: MapRep, G: MetricOnH, frame: FrameField, config: RunConfig,
        cfg: CorrugationConfig = None,
        dictionary: CovectorDictionary = None):
    """Stage iteration until the defect certificate reaches the target.

    Returns (final map, list of StageReport). The per-stage C^0 budget is
    config.c0_total * 2^-(j+1), so the total motion stays inside
    config.c0_total however many stages run. A completed stage whose
    contraction ratio exceeds config.contraction_assert fails the run.
    """
    cfg = CorrugationConfig() if cfg is None else cfg
    f = f0
    reports = []
    entry = _entry_survey(f, frame, G, cfg)
    if entry["shortness_margin"] <= 0 and entry["defect"] > 1e-14:
        raise StageFailed(
            f"run requires a strictly short start (margin "
            f"{entry['shortness_margin']:.3e})", completed=[])
    for j in range(config.max_stages):
        if entry["defect"] <= config.eta_target:
            break
        try:
            f, rep = run_stage(
                f, G, frame, budgets=None, cfg=cfg, dictionary=dictionary,
                c0_total=config.c0_total * 2.0 ** (-(j + 1)), entry=entry)
        except StageFailed as exc:
            raise StageFailed(
                str(exc), report=exc.report, completed=list(reports)
            ) from exc
        if rep.layers_added and rep.defect_out > (
                config.contraction_assert * rep.defect_in):
            raise StageFailed(
                f"stage {j} contraction ratio "
                f"{rep.defect_out / rep.defect_in:.4f} exceeds "
                f"{config.contraction_assert}", report=rep,
                completed=list(reports))
        reports.append(rep)
        entry = rep.diagnostics["exit_report"]
        if rep.layers_added == 0:
            break
    return f, reports
