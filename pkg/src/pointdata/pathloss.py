"""Close-in (CI) and alpha-beta-gamma (ABG) path-loss regressors.

Both follow the scikit-learn estimator protocol (``fit``/``predict``/
``get_params``) so they compose with sklearn tooling; the closed-form math
lives in ``fit`` itself.  Sums are accumulated with :func:`math.fsum`, so a
fit is exactly invariant under reordering of its input rows.

Conventions shared by both models: distances in meters against a 1 m
reference, frequencies in GHz, path loss in dB, and sigma as the *population*
RMS of the fit residuals (divide by N, not N-1).
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .errors import (
    DistanceBelowReference,
    EmptyInput,
    NonPositiveFrequency,
    RankDeficient,
)

__all__ = [
    "SPEED_OF_LIGHT_M_S",
    "fspl_1m",
    "CIPathLossModel",
    "ABGPathLossModel",
]

# Exact by SI definition of the meter.
SPEED_OF_LIGHT_M_S = 299_792_458.0


def fspl_1m(freq_ghz: float) -> float:
    """Free-space path loss in dB at the 1 m close-in reference distance.

    FSPL(1 m, f) = 20 log10(4 pi f / c) with f in Hz; e.g. 75.49 dB at
    142 GHz.  Doubling the frequency adds exactly 20 log10(2) dB.
    """
    freq_ghz = float(freq_ghz)
    if not freq_ghz > 0:
        raise NonPositiveFrequency(freq_ghz)
    return 20.0 * math.log10(4.0 * math.pi * freq_ghz * 1e9 / SPEED_OF_LIGHT_M_S)


def _as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"X must be 1- or 2-dimensional, got shape {X.shape}")
    return X


def _check_lengths(X: np.ndarray, y: np.ndarray) -> None:
    if y.ndim != 1:
        raise ValueError(f"y must be 1-dimensional, got shape {y.shape}")
    if len(X) != len(y):
        raise ValueError(f"X and y disagree on sample count: {len(X)} vs {len(y)}")


class CIPathLossModel(RegressorMixin, BaseEstimator):
    """Close-in free-space reference distance model.

    PL(d, f) = FSPL(1 m, f) + 10 n log10(d / 1 m) + X_sigma

    The path-loss exponent has the closed-form least-squares solution
    n = sum(A_i B_i) / sum(B_i^2) with A_i = PL_i - FSPL(1 m, f_i) and
    B_i = 10 log10(d_i).

    Parameters
    ----------
    freq_ghz : float, optional
        Carrier used when ``X`` carries no frequency column, and the anchor
        frequency in ``fspl_mode="common"``.
    fspl_mode : {"per_point", "common"}
        ``per_point`` (default) subtracts FSPL at each sample's own carrier,
        which is what makes pooling campaigns at nearby carriers meaningful.
        ``common`` anchors every sample at ``freq_ghz``.

    ``X`` is ``(n_samples, 1)`` distances in meters, optionally with a second
    column of per-sample carriers in GHz.  Fitted attributes: ``ple_``,
    ``sigma_db_``, ``freq_ghz_ref_``, ``fspl_ref_db_``, ``n_points_``.
    """

    def __init__(self, freq_ghz: float | None = None,
                 fspl_mode: str = "per_point"):
        self.freq_ghz = freq_ghz
        self.fspl_mode = fspl_mode

    def _resolve_freqs(self, X: np.ndarray) -> np.ndarray:
        if self.fspl_mode not in ("per_point", "common"):
            raise ValueError(f"fspl_mode must be 'per_point' or 'common', "
                             f"got {self.fspl_mode!r}")
        if self.fspl_mode == "common":
            if self.freq_ghz is None:
                raise ValueError("fspl_mode='common' requires freq_ghz")
            freqs = np.full(len(X), float(self.freq_ghz))
        elif X.shape[1] >= 2:
            freqs = X[:, 1]
        elif self.freq_ghz is not None:
            freqs = np.full(len(X), float(self.freq_ghz))
        else:
            raise ValueError("supply a frequency column in X or the freq_ghz "
                             "parameter")
        for f in freqs:
            if not f > 0:
                raise NonPositiveFrequency(float(f))
        return freqs

    @staticmethod
    def _check_distances(d: np.ndarray) -> None:
        if len(d) == 0:
            raise EmptyInput("no samples to fit")
        worst = float(np.min(d))
        if not worst > 1.0:
            raise DistanceBelowReference(worst)

    def fit(self, X, y):
        X = _as_2d(X)
        y = np.asarray(y, dtype=float)
        _check_lengths(X, y)
        d = X[:, 0]
        self._check_distances(d)
        freqs = self._resolve_freqs(X)

        anchors = [fspl_1m(f) for f in freqs]
        a = [float(pl) - ref for pl, ref in zip(y, anchors)]
        b = [10.0 * math.log10(float(di)) for di in d]
        denom = math.fsum(bi * bi for bi in b)
        if denom == 0.0:
            raise RankDeficient("all distances sit at the 1 m reference")
        n = math.fsum(ai * bi for ai, bi in zip(a, b)) / denom
        residuals = [ai - n * bi for ai, bi in zip(a, b)]
        sigma = math.sqrt(math.fsum(r * r for r in residuals) / len(residuals))

        self.ple_ = n
        self.sigma_db_ = sigma
        self.n_points_ = len(y)
        self.freq_ghz_ref_ = (float(self.freq_ghz) if self.fspl_mode == "common"
                              else math.fsum(freqs) / len(freqs))
        self.fspl_ref_db_ = fspl_1m(self.freq_ghz_ref_)
        return self

    def predict(self, X):
        if not hasattr(self, "ple_"):
            raise ValueError("model is not fitted")
        X = _as_2d(X)
        d = X[:, 0]
        if np.any(d <= 0):
            raise ValueError("distances must be > 0")
        freqs = self._resolve_freqs(X)
        return np.array([
            fspl_1m(f) + 10.0 * self.ple_ * math.log10(float(di))
            for di, f in zip(d, freqs)
        ])


class ABGPathLossModel(RegressorMixin, BaseEstimator):
    """Alpha-beta-gamma multi-frequency model.

    PL(d, f) = 10 alpha log10(d / 1 m) + beta + 10 gamma log10(f / 1 GHz)

    Fitted by 3-parameter linear least squares on the normal equations.  The
    CI model is nested inside this one (alpha = n, gamma = 2, beta =
    20 log10(4 pi 1e9 / c)), so on identical input the ABG residual RMS can
    never exceed the CI residual RMS.

    ``X`` is ``(n_samples, 2)``: distance in meters, carrier in GHz.  Fitted
    attributes: ``alpha_``, ``beta_db_``, ``gamma_``, ``sigma_db_``,
    ``n_points_``.  Raises :class:`RankDeficient` without at least two
    distinct distances and two distinct frequencies.
    """

    def fit(self, X, y):
        X = _as_2d(X)
        y = np.asarray(y, dtype=float)
        _check_lengths(X, y)
        if X.shape[1] != 2:
            raise ValueError(f"X must have columns (distance_m, freq_ghz), "
                             f"got shape {X.shape}")
        d, f = X[:, 0], X[:, 1]
        CIPathLossModel._check_distances(d)
        for fi in f:
            if not fi > 0:
                raise NonPositiveFrequency(float(fi))
        if len(y) < 3:
            raise RankDeficient("three parameters need at least three samples")
        if len(set(d.tolist())) < 2 or len(set(f.tolist())) < 2:
            raise RankDeficient(
                "ABG needs at least two distinct distances and two distinct "
                "frequencies")

        db = [10.0 * math.log10(float(v)) for v in d]
        gb = [10.0 * math.log10(float(v)) for v in f]
        cols = (db, [1.0] * len(y), gb)
        # Normal equations G theta = r, accumulated with fsum for exact
        # permutation invariance.
        gram = np.array([[math.fsum(u * v for u, v in zip(ci, cj))
                          for cj in cols] for ci in cols])
        rhs = np.array([math.fsum(u * float(v) for u, v in zip(ci, y))
                        for ci in cols])
        try:
            theta = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError as exc:
            raise RankDeficient(f"normal equations are singular: {exc}") from exc

        alpha, beta, gamma = (float(t) for t in theta)
        residuals = [float(yi) - (alpha * bi + beta + gamma * gi)
                     for yi, bi, gi in zip(y, db, gb)]
        self.alpha_ = alpha
        self.beta_db_ = beta
        self.gamma_ = gamma
        self.sigma_db_ = math.sqrt(
            math.fsum(r * r for r in residuals) / len(residuals))
        self.n_points_ = len(y)
        return self

    def predict(self, X):
        if not hasattr(self, "alpha_"):
            raise ValueError("model is not fitted")
        X = _as_2d(X)
        if X.shape[1] != 2:
            raise ValueError("X must have columns (distance_m, freq_ghz)")
        d, f = X[:, 0], X[:, 1]
        if np.any(d <= 0) or np.any(f <= 0):
            raise ValueError("distances and frequencies must be > 0")
        return (10.0 * self.alpha_ * np.log10(d) + self.beta_db_
                + 10.0 * self.gamma_ * np.log10(f))
