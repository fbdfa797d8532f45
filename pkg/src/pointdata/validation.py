"""Campaign validation and multi-campaign pooling.

Single-record invariants live in the constructors (:mod:`pointdata.model`);
this module covers everything that spans records or campaigns and reports it
as :class:`CompatFinding` objects instead of exceptions, so a CLI run can
show every problem at once.  Only Block findings stop a pool.

Finding codes are stable API:

==========================  =====  ==================================================
code                        sev.   raised when
==========================  =====  ==================================================
INVARIANT                   Block  a record fails its own declared invariants
DUP_PAIR                    Block  a campaign repeats a (tx, rx) pair
FREQ_MISMATCH               Block  point frequencies disagree with metadata fc (>1%)
AS_DEF_MISSING              Block  campaign has points but no angular-spread def
DUP_CAMPAIGN                Block  two pooled campaigns share a campaign_id
ENV_MISMATCH                Block  pooled campaigns measured different environments
FREQ_FAR                    Block  carrier separation beyond the policy tolerance
THRESHOLD_MISSING           Warn*  a campaign lacks threshold rules (*Block by policy)
AS_DEF_MISMATCH             Warn*  pooled campaigns used different AS definitions
THRESHOLD_RULE_DIFFERS      Warn   pooled campaigns thresholded differently
BW_DIFFERS                  Warn   pooled campaigns used different sounding bandwidth
HPBW_RATIO                  Warn   beamwidth ratio beyond the policy threshold
FREQ_NEAR                   Info   carriers differ but sit inside the tolerance
THRESHOLD_COMBINE_ASSUMED   Info   multi-part rule without an explicit combiner
==========================  =====  ==================================================
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from itertools import combinations

from .errors import InvariantViolation, PoolBlocked
from .model import (
    Campaign,
    CompatFinding,
    PooledDataset,
    Severity,
    ThresholdCombine,
    ThresholdRule,
    revalidate,
)

__all__ = ["CompatPolicy", "DEFAULT_POLICY", "validate_campaign",
           "assess_pooling", "pool"]

# Point rows must agree with the metadata carrier to within this fraction.
FREQ_CONSISTENCY_REL_TOL = Decimal("0.01")


@dataclass(frozen=True)
class CompatPolicy:
    """Knobs governing when two campaigns may share one pool.

    ``freq_rel_tol`` is the carrier separation (relative to the larger
    carrier) beyond which pooling is blocked; inside it, a difference is
    still reported as Info.  The Warn-level checks never block.
    """

    freq_rel_tol: float = 0.05
    require_same_env: bool = True
    warn_on_as_def_mismatch: bool = True
    warn_on_hpbw_ratio_gt: float = 2.0
    block_on_missing_threshold: bool = False

    def __post_init__(self):
        if not 0 <= self.freq_rel_tol <= 1:
            raise InvariantViolation("freq_rel_tol", "must lie in [0, 1]")
        if self.warn_on_hpbw_ratio_gt < 1:
            raise InvariantViolation("warn_on_hpbw_ratio_gt", "must be >= 1")


DEFAULT_POLICY = CompatPolicy()


def _finding(severity: Severity, code: str, message: str, *,
             field: str | None = None, campaigns=()) -> CompatFinding:
    return CompatFinding(severity=severity, code=code, message=message,
                         field=field, campaigns=tuple(campaigns))


def _threshold_components(rule: ThresholdRule | None):
    if rule is None:
        return None
    return (rule.rel_peak_db, rule.above_noise_db, rule.gate_ns)


def validate_campaign(campaign: Campaign) -> list[CompatFinding]:
    """Run all cross-record checks on one campaign.

    Returns findings, never raises: a campaign with duplicate pairs or
    inconsistent frequencies is constructible on purpose, and this is where
    those problems become visible.
    """
    out: list[CompatFinding] = []
    cid = (campaign.campaign_id,)

    for i, p in enumerate(campaign.points):
        try:
            revalidate(p)
        except InvariantViolation as exc:
            out.append(_finding(
                Severity.BLOCK, "INVARIANT",
                f"point {i} ({p.tx}, {p.rx}): {exc}", field=exc.field, campaigns=cid))

    seen: dict[tuple[str, str], int] = {}
    dup_reported: set[tuple[str, str]] = set()
    for p in campaign.points:
        seen[p.pair] = seen.get(p.pair, 0) + 1
    for pair, count in seen.items():
        if count > 1 and pair not in dup_reported:
            dup_reported.add(pair)
            out.append(_finding(
                Severity.BLOCK, "DUP_PAIR",
                f"(tx, rx) pair {pair} appears {count} times; "
                "one row per location pair is required",
                field="tx,rx", campaigns=cid))

    fc = campaign.metadata.fc_ghz
    offending = sorted({
        p.freq_ghz for p in campaign.points
        if abs(p.freq_ghz - fc) > FREQ_CONSISTENCY_REL_TOL * fc
    })
    if offending:
        shown = ", ".join(str(f) for f in offending[:4])
        out.append(_finding(
            Severity.BLOCK, "FREQ_MISMATCH",
            f"point frequencies [{shown}] GHz differ from metadata carrier "
            f"{fc} GHz by more than {FREQ_CONSISTENCY_REL_TOL:%}",
            field="freq_ghz", campaigns=cid))

    if campaign.points and campaign.metadata.as_def is None:
        out.append(_finding(
            Severity.BLOCK, "AS_DEF_MISSING",
            "campaign reports angular spreads but no angular-spread definition",
            field="as_def", campaigns=cid))

    for name in ("t_pdp", "t_pas"):
        rule = getattr(campaign.metadata, name)
        if rule is None:
            continue
        n_parts = sum(1 for c in _threshold_components(rule) if c is not None)
        stated = rule.text and ("max(" in rule.text.lower().replace(" ", "")
                                or "all(" in rule.text.lower().replace(" ", ""))
        if n_parts > 1 and not stated:
            out.append(_finding(
                Severity.INFO, "THRESHOLD_COMBINE_ASSUMED",
                f"{name} has {n_parts} components without an explicit combiner; "
                f"assuming {rule.combine.value} (all components enforced)",
                field=name, campaigns=cid))
    return out


def assess_pooling(a: Campaign, b: Campaign,
                   policy: CompatPolicy = DEFAULT_POLICY) -> list[CompatFinding]:
    """Pairwise compatibility findings for pooling campaigns ``a`` and ``b``."""
    out: list[CompatFinding] = []
    ids = (a.campaign_id, b.campaign_id)
    ma, mb = a.metadata, b.metadata

    if a.campaign_id == b.campaign_id:
        out.append(_finding(
            Severity.BLOCK, "DUP_CAMPAIGN",
            f"both campaigns are identified as {a.campaign_id!r}",
            field="campaign_id", campaigns=ids))

    if ma.env is not mb.env:
        severity = Severity.BLOCK if policy.require_same_env else Severity.WARN
        out.append(_finding(
            severity, "ENV_MISMATCH",
            f"environments differ: {ma.env.value} vs {mb.env.value}",
            field="env", campaigns=ids))

    fa, fb = float(ma.fc_ghz), float(mb.fc_ghz)
    rel = abs(fa - fb) / max(fa, fb)
    if rel > policy.freq_rel_tol:
        out.append(_finding(
            Severity.BLOCK, "FREQ_FAR",
            f"carriers {fa:g} and {fb:g} GHz differ by {rel:.1%}, beyond the "
            f"{policy.freq_rel_tol:.0%} pooling tolerance",
            field="fc", campaigns=ids))
    elif rel > 0:
        out.append(_finding(
            Severity.INFO, "FREQ_NEAR",
            f"carriers {fa:g} and {fb:g} GHz differ by {rel:.1%}, within the "
            f"{policy.freq_rel_tol:.0%} pooling tolerance",
            field="fc", campaigns=ids))

    if policy.warn_on_as_def_mismatch and ma.as_def and mb.as_def \
            and ma.as_def is not mb.as_def:
        out.append(_finding(
            Severity.WARN, "AS_DEF_MISMATCH",
            f"angular-spread definitions differ: {ma.as_def.value} vs "
            f"{mb.as_def.value}; pooled angular statistics mix conventions",
            field="as_def", campaigns=ids))

    differing = [name for name in ("t_pdp", "t_pas")
                 if _threshold_components(getattr(ma, name))
                 != _threshold_components(getattr(mb, name))
                 and getattr(ma, name) is not None
                 and getattr(mb, name) is not None]
    if differing:
        out.append(_finding(
            Severity.WARN, "THRESHOLD_RULE_DIFFERS",
            "multipath threshold rules differ: " + ", ".join(differing) +
            "; spreads were computed from differently censored profiles",
            field=",".join(differing), campaigns=ids))

    for name in ("t_pdp", "t_pas"):
        missing = [c.campaign_id for c, m in ((a, ma), (b, mb))
                   if getattr(m, name) is None]
        if missing and not all(getattr(m, name) is None for m in (ma, mb)):
            severity = (Severity.BLOCK if policy.block_on_missing_threshold
                        else Severity.WARN)
            out.append(_finding(
                severity, "THRESHOLD_MISSING",
                f"{name} is unspecified for {', '.join(missing)} but stated "
                "by the other campaign",
                field=name, campaigns=ids))

    if ma.bw_ghz is not None and mb.bw_ghz is not None and ma.bw_ghz != mb.bw_ghz:
        out.append(_finding(
            Severity.WARN, "BW_DIFFERS",
            f"sounding bandwidths differ: {ma.bw_ghz} vs {mb.bw_ghz} GHz; "
            "delay resolution is not comparable",
            field="bw_ghz", campaigns=ids))

    for name in ("hpbw_tx_deg", "hpbw_rx_deg"):
        va, vb = getattr(ma, name), getattr(mb, name)
        if va is None or vb is None:
            continue
        ratio = float(max(va, vb) / min(va, vb))
        if ratio > policy.warn_on_hpbw_ratio_gt:
            out.append(_finding(
                Severity.WARN, "HPBW_RATIO",
                f"{name} ratio {ratio:.2f} exceeds {policy.warn_on_hpbw_ratio_gt:g}; "
                "lobe statistics resolve different angular scales",
                field=name, campaigns=ids))
    return out


def pool(campaigns, policy: CompatPolicy = DEFAULT_POLICY, *,
         force: bool = False) -> PooledDataset:
    """Pool campaigns into one dataset with per-point provenance.

    The compat report carries every per-campaign and pairwise finding.  Any
    Block finding raises :class:`PoolBlocked` unless ``force`` is set, in
    which case the findings still appear in the report.  A single campaign
    pools to itself (useful for uniform downstream handling).
    """
    campaigns = tuple(campaigns)
    if not campaigns:
        raise PoolBlocked((_finding(Severity.BLOCK, "EMPTY_POOL",
                                    "no campaigns to pool"),))

    report: list[CompatFinding] = []
    for c in campaigns:
        report.extend(validate_campaign(c))
    for a, b in combinations(campaigns, 2):
        report.extend(assess_pooling(a, b, policy))

    blocks = [f for f in report if f.severity is Severity.BLOCK]
    if blocks and not force:
        raise PoolBlocked(blocks)

    points = []
    provenance = []
    for c in campaigns:
        points.extend(c.points)
        provenance.extend([c.campaign_id] * len(c.points))
    return PooledDataset(
        campaigns=campaigns,
        points=tuple(points),
        provenance=tuple(provenance),
        compat_report=tuple(report),
    )
