"""Pooled statistics over point data: CI/ABG fits, lognormal stats, CDFs.

The regression math lives in :mod:`pointdata.pathloss`; the functions here
are the tuple-in, frozen-result-out surface that the CLI and most callers
use.  All sigmas use population normalization (divide by N) -- the
shadow-fading convention in the sounding literature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import EmptyInput, InvariantViolation, NonPositiveSample
from .model import LocCondition, PooledDataset
from .pathloss import ABGPathLossModel, CIPathLossModel

__all__ = [
    "Split",
    "CIFit",
    "ABGFit",
    "LognormalStats",
    "EmpiricalCDF",
    "fit_ci",
    "fit_abg",
    "lognormal_stats",
    "empirical_cdf",
    "scatter_data",
    "select_split",
]


class Split(Enum):
    LOS = "LOS"
    NLOS = "NLOS"
    BOTH = "Both"


def _require_finite(obj, names):
    for name in names:
        v = getattr(obj, name)
        if not math.isfinite(v):
            raise InvariantViolation(name, f"must be finite, got {v}")


@dataclass(frozen=True)
class CIFit:
    """Close-in model fit: PL = fspl_ref + 10 ple log10(d) + N(0, sigma)."""

    ple: float
    sigma_db: float
    fspl_ref_db: float
    freq_ghz_ref: float
    n_points: int
    fspl_mode: str = "per_point"

    def __post_init__(self):
        _require_finite(self, ("ple", "sigma_db", "fspl_ref_db", "freq_ghz_ref"))
        if self.sigma_db < 0:
            raise InvariantViolation("sigma_db", "must be >= 0")
        if self.n_points < 1:
            raise InvariantViolation("n_points", "must be >= 1")

    def to_json_dict(self, split: Split | None = None) -> dict:
        out = {"model": "CI", "ple": self.ple, "sigma_db": self.sigma_db,
               "fspl_ref_db": self.fspl_ref_db, "n_points": self.n_points}
        if split is not None:
            out["split"] = split.value
        return out


@dataclass(frozen=True)
class ABGFit:
    """Alpha-beta-gamma fit: PL = 10 a log10(d) + b + 10 g log10(f)."""

    alpha: float
    beta_db: float
    gamma: float
    sigma_db: float
    n_points: int

    def __post_init__(self):
        _require_finite(self, ("alpha", "beta_db", "gamma", "sigma_db"))
        if self.sigma_db < 0:
            raise InvariantViolation("sigma_db", "must be >= 0")
        if self.n_points < 3:
            raise InvariantViolation("n_points", "must be >= 3 (three parameters)")

    def to_json_dict(self, split: Split | None = None) -> dict:
        out = {"model": "ABG", "alpha": self.alpha, "beta_db": self.beta_db,
               "gamma": self.gamma, "sigma_db": self.sigma_db,
               "n_points": self.n_points}
        if split is not None:
            out["split"] = split.value
        return out


@dataclass(frozen=True)
class LognormalStats:
    """Moments of ln(samples) plus the implied linear-domain mean."""

    mu_ln: float
    sigma_ln: float
    mean_linear: float
    n_points: int

    def __post_init__(self):
        _require_finite(self, ("mu_ln", "sigma_ln", "mean_linear"))
        if self.sigma_ln < 0:
            raise InvariantViolation("sigma_ln", "must be >= 0")
        if self.n_points < 1:
            raise InvariantViolation("n_points", "must be >= 1")
        # mean_linear = exp(mu + sigma^2/2) >= exp(mu) = geometric mean
        if self.mean_linear < math.exp(self.mu_ln) * (1 - 1e-12):
            raise InvariantViolation("mean_linear",
                                     "cannot undercut the geometric mean")

    def to_json_dict(self) -> dict:
        return {"mu_ln": self.mu_ln, "sigma_ln": self.sigma_ln,
                "mean_linear": self.mean_linear, "n_points": self.n_points}


@dataclass(frozen=True)
class EmpiricalCDF:
    """Step CDF with plotting positions i/N, reaching exactly 1.0."""

    sorted_values: tuple[float, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "sorted_values", tuple(self.sorted_values))
        object.__setattr__(self, "probabilities", tuple(self.probabilities))
        n = len(self.sorted_values)
        if n == 0:
            raise InvariantViolation("sorted_values", "CDF needs samples")
        if len(self.probabilities) != n:
            raise InvariantViolation("probabilities", "length mismatch")
        if list(self.sorted_values) != sorted(self.sorted_values):
            raise InvariantViolation("sorted_values", "must be ascending")
        if any(q <= p for p, q in zip(self.probabilities, self.probabilities[1:])) \
                or self.probabilities[-1] != 1.0:
            raise InvariantViolation("probabilities",
                                     "must increase strictly to 1.0")

    def evaluate(self, x: float) -> float:
        """P(X <= x) under the empirical distribution."""
        idx = np.searchsorted(np.asarray(self.sorted_values), x, side="right")
        return 0.0 if idx == 0 else self.probabilities[idx - 1]


# ---------------------------------------------------------------------------
# Fitting fronts
# ---------------------------------------------------------------------------

def fit_ci(points, freq_ghz, *, fspl_mode: str = "per_point") -> CIFit:
    """Closed-form CI fit over ``(tr_sep_m, pl_db)`` pairs.

    ``freq_ghz`` is a scalar carrier or a per-point sequence.  With the
    default ``per_point`` mode, each sample is anchored at its own carrier's
    1 m FSPL, which is what makes mixed-carrier pools meaningful; ``common``
    anchors everything at one carrier.
    """
    pts = [(float(d), float(pl)) for d, pl in points]
    if not pts:
        raise EmptyInput("fit_ci needs at least one point")
    d = [p[0] for p in pts]
    y = [p[1] for p in pts]
    if np.ndim(freq_ghz) == 0:
        model = CIPathLossModel(freq_ghz=float(freq_ghz), fspl_mode=fspl_mode)
        X = np.column_stack([d])
    else:
        freqs = [float(f) for f in freq_ghz]
        if len(freqs) != len(pts):
            raise ValueError("freq_ghz sequence must match the point count")
        if fspl_mode == "common":
            raise ValueError("fspl_mode='common' takes a scalar freq_ghz")
        model = CIPathLossModel(fspl_mode=fspl_mode)
        X = np.column_stack([d, freqs])
    model.fit(X, np.asarray(y))
    return CIFit(ple=model.ple_, sigma_db=model.sigma_db_,
                 fspl_ref_db=model.fspl_ref_db_,
                 freq_ghz_ref=model.freq_ghz_ref_,
                 n_points=model.n_points_, fspl_mode=fspl_mode)


def fit_abg(points) -> ABGFit:
    """Normal-equations ABG fit over ``(tr_sep_m, pl_db, freq_ghz)`` triples."""
    pts = [(float(d), float(pl), float(f)) for d, pl, f in points]
    if not pts:
        raise EmptyInput("fit_abg needs points")
    model = ABGPathLossModel()
    X = np.column_stack([[p[0] for p in pts], [p[2] for p in pts]])
    model.fit(X, np.asarray([p[1] for p in pts]))
    return ABGFit(alpha=model.alpha_, beta_db=model.beta_db_,
                  gamma=model.gamma_, sigma_db=model.sigma_db_,
                  n_points=model.n_points_)


def lognormal_stats(samples) -> LognormalStats:
    values = [float(s) for s in samples]
    if not values:
        raise EmptyInput("lognormal_stats needs samples")
    for v in values:
        if not v > 0:
            raise NonPositiveSample(v)
    logs = [math.log(v) for v in values]
    mu = math.fsum(logs) / len(logs)
    var = math.fsum((x - mu) ** 2 for x in logs) / len(logs)
    sigma = math.sqrt(var)
    return LognormalStats(mu_ln=mu, sigma_ln=sigma,
                          mean_linear=math.exp(mu + var / 2.0),
                          n_points=len(values))


def empirical_cdf(samples) -> EmpiricalCDF:
    values = sorted(float(s) for s in samples)
    if not values:
        raise EmptyInput("empirical_cdf needs samples")
    n = len(values)
    return EmpiricalCDF(sorted_values=tuple(values),
                        probabilities=tuple((i + 1) / n for i in range(n)))


# ---------------------------------------------------------------------------
# Pool plumbing
# ---------------------------------------------------------------------------

def select_split(points, split: Split):
    """Filter point records by link state; BOTH passes everything through."""
    if split is Split.BOTH:
        return list(points)
    want = LocCondition(split.value)
    return [p for p in points if p.loc is want]


def scatter_data(pool: PooledDataset, split: Split = Split.BOTH) -> list[tuple]:
    """Rows of (tr_sep_m, pl_db, campaign_id, loc_condition) for plotting."""
    if not pool.points:
        raise EmptyInput("pool has no points")
    rows = []
    for record, cid in zip(pool.points, pool.provenance):
        if split is not Split.BOTH and record.loc.value != split.value:
            continue
        rows.append((record.tr_sep_m, record.pl_db, cid, record.loc))
    return rows
