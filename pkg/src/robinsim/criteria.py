"""Series criteria over block ladders: convergence calls and closed-form thresholds.

Each criterion is a nonnegative series indexed by the ladder blocks.  The
evaluator aggregates terms per dyadic band (bands are exactly geometric for
the supported families, up to polynomial factors the rate fit absorbs), then
classifies the band rows:

* ``CONVERGES``   fitted per-band decay rate <= log(0.95)
* ``DIVERGES``    fitted rate >= -0.005 and the partial sums grew by at
                  least 5% over each of the last three doublings
* ``INCONCLUSIVE`` anything else

Measured classifications agree with the closed-form parameter thresholds
whenever at least 12 bands are evaluated and the parameter sits more than
0.05 from the threshold; the shipped defaults use 20 bands.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import blocks as _blocks
from . import stats as _stats
from .geometry import (
    Cusp,
    Disk,
    DomainSpec,
    FractalChannels2D,
    FractalChannelsD,
    SnowflakeCubes,
    UnitBox,
    boundary_area_total,
)

__all__ = [
    "ACTIVE",
    "CONVERGES",
    "CRITERION_IDS",
    "CriterionError",
    "CriterionReport",
    "DIVERGES",
    "INCONCLUSIVE",
    "NEARLY_INACTIVE",
    "NON_TRAP",
    "NoThresholdError",
    "TRAP",
    "classify_activity",
    "classify_trap",
    "closed_form_threshold",
    "hitting_bound_ratio",
    "resistance_series",
    "series_terms",
]

CONVERGES = "CONVERGES"
DIVERGES = "DIVERGES"
INCONCLUSIVE = "INCONCLUSIVE"

ACTIVE = "ACTIVE"
NEARLY_INACTIVE = "NEARLY_INACTIVE"
TRAP = "TRAP"
NON_TRAP = "NON_TRAP"

CRITERION_IDS = ("S3_1", "S3_2", "S4_1", "S4_2", "S5_3", "S5_4")

MIN_AGREEMENT_BANDS = 12

# band ratio 0.95 separates decay from stall; divergence needs sustained
# growth of the partial sums, not just a flat term fit
_RATE_CONVERGENT = math.log(0.95)
_RATE_FLAT = -0.005
_DOUBLING_DELTA = 0.05


class CriterionError(ValueError):
    """Criterion evaluated outside its contract."""


class NoThresholdError(CriterionError):
    """The family has no closed-form threshold for the requested criterion."""


@dataclass
class CriterionReport:
    """Outcome of one series criterion.

    ``terms`` and ``partial_sums`` are per evaluation row: one row per
    ladder block for reports built from an explicit decomposition, one row
    per dyadic band for the classifying entry points (which never
    materialize the blocks).  ``log_slope`` is the fitted exponent of row
    decay; ``threshold_verdict`` carries the closed-form verdict when the
    family has one.
    """

    criterion_id: str
    terms: list[float]
    partial_sums: list[float]
    classification: str
    log_slope: float
    threshold_verdict: Optional[str] = None

    def to_payload(self) -> dict:
        slope = self.log_slope
        return {
            "criterion_id": self.criterion_id,
            "terms": list(self.terms),
            "partial_sums": list(self.partial_sums),
            "classification": self.classification,
            "log_slope": slope if math.isfinite(slope) else None,
            "threshold_verdict": self.threshold_verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), sort_keys=True)

    def to_csv(self) -> str:
        lines = ["n,term,partial_sum"]
        for i, (t, s) in enumerate(zip(self.terms, self.partial_sums), start=1):
            lines.append("%d,%.17g,%.17g" % (i, t, s))
        return "\n".join(lines) + "\n"


def _check_criterion(criterion_id: str, d: int) -> None:
    if criterion_id not in CRITERION_IDS:
        raise CriterionError(f"unknown criterion id {criterion_id!r}")
    if int(d) != d:
        raise CriterionError("dimension must be an integer")
    if criterion_id.startswith("S3"):
        if d != 2:
            raise CriterionError(f"{criterion_id} is a planar criterion; got d={d}")
    elif d < 3:
        raise CriterionError(f"{criterion_id} needs d >= 3; got d={d}")


def series_terms(
    decomp: _blocks.BlockDecomposition, criterion_id: str, d: int
) -> list[float]:
    """Per-block terms of one criterion over an explicit decomposition."""
    _check_criterion(criterion_id, d)
    rs = np.array([b.r for b in decomp.blocks])
    if criterion_id == "S3_1":
        vals = [b.n * b.area for b in decomp.blocks]
    elif criterion_id == "S3_2":
        vals = [b.n * b.r for b in decomp.blocks]
    else:
        resist = np.cumsum(rs ** (2 - d))
        if criterion_id == "S4_1":
            vals = [b.area * resist[i] for i, b in enumerate(decomp.blocks)]
        elif criterion_id == "S4_2":
            vals = [b.r ** (d - 1) * resist[i] for i, b in enumerate(decomp.blocks)]
        else:
            vals = [b.vol * resist[i] for i, b in enumerate(decomp.blocks)]
    return [float(v) for v in vals]


def _band_rows(spec: DomainSpec, criterion_id: str, n_bands: int) -> list[float]:
    """Band-aggregated criterion contributions, computed from run algebra.

    With m uniform blocks of slab width r following a prefix of count N0 and
    resistance R0, every criterion sums in closed form over the run, so deep
    bands never materialize their (exponentially many) blocks.
    """
    d = spec.d
    rows: list[float] = []
    bands: list[int] = []
    n0 = 0.0
    r0 = 0.0
    for run in _blocks.band_runs(spec, n_bands):
        m = float(run.count)
        r = run.r
        rho = r ** (2 - d) if d >= 3 else 0.0
        tri = 0.5 * m * (m + 1.0)
        if criterion_id == "S3_1":
            v = n0 * run.area_sum + run.area_isum
        elif criterion_id == "S3_2":
            v = r * (n0 * m + tri)
        elif criterion_id == "S4_1":
            v = r0 * run.area_sum + rho * run.area_isum
        elif criterion_id == "S4_2":
            v = r ** (d - 1) * (m * r0 + rho * tri)
        else:
            v = r0 * run.vol_sum + rho * run.vol_isum
        if bands and run.band == bands[-1]:
            rows[-1] += v
        else:
            bands.append(run.band)
            rows.append(v)
        n0 += m
        r0 += m * rho
    return rows


def _sustained_doubling(partial: list[float]) -> bool:
    # S_K / S_{K/2} >= 1 + delta for the last three doublings
    k = len(partial)
    for _ in range(3):
        half = k // 2
        if half < 1 or half == k:
            return False
        if partial[k - 1] < (1.0 + _DOUBLING_DELTA) * partial[half - 1]:
            return False
        k = half
    return True


def _classify_rows(rows: list[float]) -> tuple[str, float]:
    partial = list(np.cumsum(rows))
    # shallow bands carry a startup transient (prefix index still settling,
    # near-mouth geometry corrections); the rate lives in the tail half
    tail = rows[len(rows) // 2 :] if len(rows) >= 8 else rows
    rate = math.nan
    try:
        rate = _stats.geometric_rate(tail)
    except ValueError:
        try:
            rate = _stats.log_slope(tail)
        except ValueError:
            pass
    if math.isfinite(rate) and rate <= _RATE_CONVERGENT:
        return CONVERGES, rate
    if math.isfinite(rate) and rate >= _RATE_FLAT and _sustained_doubling(partial):
        return DIVERGES, rate
    return INCONCLUSIVE, rate


def _band_report(spec: DomainSpec, criterion_id: str, n_bands: int) -> CriterionReport:
    _check_criterion(criterion_id, spec.d)
    rows = _band_rows(spec, criterion_id, n_bands)
    classification, rate = _classify_rows(rows)
    return CriterionReport(
        criterion_id=criterion_id,
        terms=rows,
        partial_sums=list(np.cumsum(rows)),
        classification=classification,
        log_slope=rate,
    )


def _trivial_report(criterion_id: str) -> CriterionReport:
    # Lipschitz control families carry no ladder; the criterion sum is empty
    return CriterionReport(criterion_id, [], [], CONVERGES, 0.0)


def closed_form_threshold(spec: DomainSpec, criterion: str = "activity") -> str:
    """Evaluate the family's parameter threshold as a pure predicate.

    ``criterion`` selects the activity verdict (default) or the trap
    verdict.  At the exact threshold the divergence side governs.
    """
    if criterion not in ("activity", "trap"):
        raise CriterionError(f"unknown threshold criterion {criterion!r}")
    if isinstance(spec, (UnitBox, Disk)):
        return ACTIVE if criterion == "activity" else NON_TRAP
    if criterion == "activity":
        if isinstance(spec, Cusp):
            return ACTIVE if spec.alpha < 2.0 else NEARLY_INACTIVE
        if isinstance(spec, (FractalChannels2D, FractalChannelsD)):
            if spec.alpha > 1.0 and spec.beta < 2.0 * spec.alpha:
                return ACTIVE
            return NEARLY_INACTIVE
        if isinstance(spec, SnowflakeCubes):
            if spec.rho ** (spec.d - 1) * (2 * spec.d - 1) >= 1.0:
                return NEARLY_INACTIVE  # infinite surface measure
            crit = (spec.d - 1.0) / (spec.d - 2.0)
            return ACTIVE if spec.beta < crit else NEARLY_INACTIVE
    else:
        if isinstance(spec, SnowflakeCubes):
            crit = spec.d / (spec.d - 2.0)
            return NON_TRAP if spec.beta < crit else TRAP
    raise NoThresholdError(
        f"family {type(spec).__name__} has no closed-form {criterion} threshold"
    )


def classify_activity(
    spec: DomainSpec, n_max: int = 20
) -> tuple[str, CriterionReport]:
    """Run the dimension-appropriate activity pair on ``n_max`` bands.

    Returns ``(verdict, report)`` where verdict is ACTIVE when the
    sufficient sum converges, NEARLY_INACTIVE when the divergence sum
    diverges or the idealized surface measure is infinite, INCONCLUSIVE
    otherwise.  The report is the series row data that decided the call.
    """
    try:
        verdict_cf: Optional[str] = closed_form_threshold(spec, "activity")
    except NoThresholdError:
        verdict_cf = None
    sufficient, divergent = ("S3_1", "S3_2") if spec.d == 2 else ("S4_1", "S4_2")
    if isinstance(spec, (UnitBox, Disk)):
        rep = _trivial_report(sufficient)
        rep.threshold_verdict = verdict_cf
        return ACTIVE, rep
    if boundary_area_total(spec) == math.inf:
        # infinite idealized surface measure decides by itself; the series
        # rows are diagnostic only and the ladder may not even build
        try:
            rep = _band_report(spec, divergent, n_max)
        except _blocks.DecompositionError:
            rep = CriterionReport(divergent, [], [], INCONCLUSIVE, math.nan)
        rep.threshold_verdict = verdict_cf
        return NEARLY_INACTIVE, rep
    rep = _band_report(spec, sufficient, n_max)
    rep.threshold_verdict = verdict_cf
    if rep.classification == CONVERGES:
        return ACTIVE, rep
    rep_div = _band_report(spec, divergent, n_max)
    rep_div.threshold_verdict = verdict_cf
    if rep_div.classification == DIVERGES:
        return NEARLY_INACTIVE, rep_div
    return INCONCLUSIVE, rep


def classify_trap(spec: DomainSpec, n_max: int = 20) -> tuple[str, CriterionReport]:
    """Run the trap series on ``n_max`` bands; d >= 3 only.

    Returns ``(verdict, report)``: convergence means the domain is NON_TRAP,
    divergence means TRAP.
    """
    if spec.d < 3:
        raise CriterionError("trap classification needs d >= 3")
    try:
        verdict_cf: Optional[str] = closed_form_threshold(spec, "trap")
    except NoThresholdError:
        verdict_cf = None
    if isinstance(spec, (UnitBox, Disk)):
        rep = _trivial_report("S5_3")
        rep.threshold_verdict = verdict_cf
        return NON_TRAP, rep
    rep = _band_report(spec, "S5_3", n_max)
    rep.threshold_verdict = verdict_cf
    if rep.classification == CONVERGES:
        return NON_TRAP, rep
    if rep.classification == DIVERGES:
        return TRAP, rep
    return INCONCLUSIVE, rep


def resistance_series(
    decomp: _blocks.BlockDecomposition, j: int, n: int, d: int
) -> float:
    """Sum r_i^(2-d) for i in [j, n]; the series-resistance lower-bound shape."""
    if int(d) != d or d < 3:
        raise CriterionError(f"resistance shape needs integer d >= 3; got d={d}")
    if j > n:
        return 0.0
    if j < 1 or n > len(decomp.blocks):
        raise CriterionError(
            f"block range [{j}, {n}] outside ladder of length {len(decomp.blocks)}"
        )
    return float(sum(b.r ** (2 - d) for b in decomp.blocks[j - 1 : n]))


def hitting_bound_ratio(
    decomp: _blocks.BlockDecomposition, n: int, m2: int, d: int
) -> tuple[float, float]:
    """Constant-free crossing-probability shapes over the window [n-m2-1, n].

    Returns ``(r_n^(2-d)/S, r_{n-m2-1}^(2-d)/S)`` with S the window's
    resistance sum: the downward and upward crossing bound shapes.
    """
    if int(d) != d or d < 3:
        raise CriterionError(f"hitting shapes need integer d >= 3; got d={d}")
    if int(m2) != m2 or m2 < 0:
        raise CriterionError("m2 must be a nonnegative integer")
    lo = n - m2 - 1
    if lo < 1:
        raise CriterionError(
            f"window underflows the ladder: n - m2 - 1 = {lo} must be >= 1"
        )
    if n > len(decomp.blocks):
        raise CriterionError(
            f"block index n={n} outside ladder of length {len(decomp.blocks)}"
        )
    window = decomp.blocks[lo - 1 : n]
    s = sum(b.r ** (2 - d) for b in window)
    return (
        float(window[-1].r ** (2 - d) / s),
        float(window[0].r ** (2 - d) / s),
    )
