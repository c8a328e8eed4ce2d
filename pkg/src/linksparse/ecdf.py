"""Smooth monotone surrogate of the per-link utility CDF.

The CDF is a monotone piecewise-cubic Hermite interpolant of the empirical
CDF at quantile knots (Fritsch–Butland slopes, C1). Each interior knot takes
the midpoint of the empirical CDF's jump there. The smallest sample is the
exception: its whole atom, e.g. the mass of zero-backlog links at ``u = 0``,
is spread over one bandwidth below it, so ``cdf(min)`` equals the empirical
value. The largest knot is followed by an anchor one bandwidth above it where
the CDF reaches 1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "EcdfModel",
    "fit_ecdf",
    "cdf",
    "pdf",
    "quantile",
    "empirical_cdf",
    "read_samples",
    "write_samples",
    "save_ecdf",
    "load_ecdf",
]

EPS = 1e-6
DEFAULT_KNOTS = 256


@dataclass(frozen=True, eq=False)
class EcdfModel:
    knots: np.ndarray
    cdf_values: np.ndarray
    bandwidth: float
    slopes: np.ndarray
    provenance: dict = field(default_factory=dict)

    def cdf(self, u):
        return cdf(self, u)

    def pdf(self, u):
        return pdf(self, u)

    def quantile(self, eta):
        return quantile(self, eta)

    def sample(self, size, rng) -> np.ndarray:
        """Inverse-transform draws (clipped at 0, utilities are nonnegative)."""
        eta = rng.uniform(EPS, 1.0 - EPS, size=size)
        return np.maximum(_inverse(self, eta), 0.0)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])


def _hermite_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    h = np.diff(x)
    delta = np.diff(y) / h
    m = np.zeros_like(x)
    if len(x) > 2:
        # weighted harmonic mean of neighboring secants (Fritsch–Butland)
        w1 = 2 * h[1:] + h[:-1]
        w2 = h[1:] + 2 * h[:-1]
        d0, d1 = delta[:-1], delta[1:]
        m[1:-1] = (w1 + w2) / (w1 / d0 + w2 / d1)
    # zero end slopes: pdf vanishes continuously at the edges of the support
    return m


def fit_ecdf(samples, n_knots: int = DEFAULT_KNOTS, bandwidth: float | None = None,
             provenance: dict | None = None) -> EcdfModel:
    """Fit the surrogate to nonnegative utility samples."""
    s = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    if s.size < 2:
        raise ValueError("need at least 2 samples")
    if not np.all(np.isfinite(s)):
        raise ValueError("samples must be finite")
    if s[0] < 0:
        raise ValueError("utilities must be nonnegative")
    lo, hi = s[0], s[-1]
    span = hi - lo
    if bandwidth is None:
        scale = max(abs(hi), 1.0)
        bandwidth = max(1e-3 * span, 1e-9 * scale) if span > 0 else 1e-3 * scale
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    probs = np.linspace(0.0, 1.0, n_knots)
    qk = np.union1d(np.quantile(s, probs, method="inverted_cdf"), [lo, hi])
    # values closer than this count as one knot (keeps the secants finite)
    res = 1e-12 * max(1.0, abs(hi))
    qk = qk[np.concatenate([[True], np.diff(qk) > res])]
    left = np.searchsorted(s, qk, side="left") / s.size
    right = np.searchsorted(s, qk, side="right") / s.size
    fk = 0.5 * (left + right)
    fk[0] = right[0]
    x = np.concatenate([[lo - bandwidth], qk])
    y = np.concatenate([[0.0], fk])
    if y[-1] < 1.0:
        x = np.append(x, qk[-1] + bandwidth)
        y = np.append(y, 1.0)
    return EcdfModel(x, y, float(bandwidth), _hermite_slopes(x, y), dict(provenance or {}))


def _locate(model: EcdfModel, u):
    u = np.asarray(u, dtype=np.float64)
    k = np.clip(np.searchsorted(model.knots, u, side="right") - 1, 0, len(model.knots) - 2)
    x0, x1 = model.knots[k], model.knots[k + 1]
    h = x1 - x0
    t = np.clip((u - x0) / h, 0.0, 1.0)
    return u, k, h, t


def _raw_cdf(model: EcdfModel, u):
    u, k, h, t = _locate(model, u)
    y0, y1 = model.cdf_values[k], model.cdf_values[k + 1]
    m0, m1 = model.slopes[k] * h, model.slopes[k + 1] * h
    t2, t3 = t * t, t * t * t
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1


def cdf(model: EcdfModel, u):
    """Smooth CDF, clamped to ``[EPS, 1 - EPS]``."""
    return np.clip(_raw_cdf(model, u), EPS, 1.0 - EPS)


def pdf(model: EcdfModel, u):
    """Analytic derivative of the cubic pieces; zero outside the support.

    The clamp in ``cdf`` only bites within ``EPS`` of the support edges,
    where the slope already tends to zero, so it is ignored here.
    """
    u, k, h, t = _locate(model, u)
    y0, y1 = model.cdf_values[k], model.cdf_values[k + 1]
    m0, m1 = model.slopes[k] * h, model.slopes[k + 1] * h
    t2 = t * t
    dy_dt = (6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * m1
    out = dy_dt / h
    inside = (u >= model.knots[0]) & (u <= model.knots[-1])
    return np.where(inside, np.maximum(out, 0.0), 0.0)


def _inverse(model: EcdfModel, eta):
    eta = np.asarray(eta, dtype=np.float64)
    y = model.cdf_values
    k = np.clip(np.searchsorted(y, eta, side="left") - 1, 0, len(y) - 2)
    lo = model.knots[k].copy()
    hi = model.knots[k + 1].copy()
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = _raw_cdf(model, mid) < eta
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def quantile(model: EcdfModel, eta):
    """Utility level ``u`` with ``cdf(u) = eta``, for ``0 < eta < 1``."""
    e = np.asarray(eta, dtype=np.float64)
    if np.any((e <= 0) | (e >= 1)):
        raise ValueError("eta must lie in the open interval (0, 1)")
    out = _inverse(model, e)
    return float(out) if out.ndim == 0 else out


def empirical_cdf(samples, u) -> np.ndarray:
    s = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    return np.searchsorted(s, np.asarray(u, dtype=np.float64), side="right") / s.size


def write_samples(path, samples) -> None:
    np.savetxt(path, np.asarray(samples, dtype=np.float64).ravel(), fmt="%.10g")


def read_samples(path) -> np.ndarray:
    return np.atleast_1d(np.loadtxt(path, dtype=np.float64))


def save_ecdf(path, model: EcdfModel) -> None:
    doc = {
        "knots": model.knots.tolist(),
        "cdf_values": model.cdf_values.tolist(),
        "bandwidth": model.bandwidth,
        "provenance": model.provenance,
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_ecdf(path) -> EcdfModel:
    doc = json.loads(Path(path).read_text())
    x = np.asarray(doc["knots"], dtype=np.float64)
    y = np.asarray(doc["cdf_values"], dtype=np.float64)
    return EcdfModel(x, y, float(doc["bandwidth"]), _hermite_slopes(x, y), doc.get("provenance", {}))
