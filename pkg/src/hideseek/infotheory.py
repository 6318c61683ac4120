"""Exact information quantities on explicit finite pmfs.

Entropy and mutual information default to bits; KL defaults to nats because
the transcript bounds are stated with natural logarithms. Every function
takes an explicit ``base`` so the two never mix silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import entr, kl_div, rel_entr

from .errors import (
    AlphabetTooLarge,
    DimensionMismatch,
    DivisionByZeroSupport,
    NotIndependent,
    UnboundedRatio,
)

NORMALIZATION_TOL = 1e-12
_LOG_BASE = {"bits": math.log(2.0), "nats": 1.0}


def _scale(base: str) -> float:
    try:
        return _LOG_BASE[base]
    except KeyError:
        raise ValueError(f"base must be 'bits' or 'nats', got {base!r}") from None


def as_pmf(p, tol: float = NORMALIZATION_TOL) -> np.ndarray:
    """Validate and return ``p`` as a float array. Never renormalizes."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("pmf entries must be finite and non-negative")
    total = math.fsum(p.ravel())
    if abs(total - 1.0) > tol:
        raise ValueError(f"pmf sums to {total!r}, not 1")
    return p


def _pair(p, q):
    p, q = as_pmf(p), as_pmf(q)
    if p.shape != q.shape:
        raise DimensionMismatch(f"support sizes differ: {p.shape} vs {q.shape}")
    return p.ravel(), q.ravel()


def entropy(p, base: str = "bits") -> float:
    p = as_pmf(p)
    return math.fsum(entr(p.ravel())) / _scale(base)


def kl(p, q, base: str = "nats") -> float:
    """D(p || q); ``inf`` when p puts mass where q has none.

    Summed termwise as p ln(p/q) - p + q and clamped at 0, so rounding cannot
    push a near-zero divergence negative.
    """
    p, q = _pair(p, q)
    return max(0.0, math.fsum(kl_div(p, q))) / _scale(base)


def chi2(p, q) -> float:
    """Chi-squared divergence sum (p - q)^2 / q."""
    p, q = _pair(p, q)
    if np.any((q == 0) & (p > 0)):
        raise DivisionByZeroSupport("q vanishes on the support of p")
    keep = q > 0
    return math.fsum((p[keep] - q[keep]) ** 2 / q[keep])


def total_variation(p, q) -> float:
    """L1 distance sum |p - q|, in [0, 2]."""
    p, q = _pair(p, q)
    return math.fsum(np.abs(p - q))


def mutual_information(joint, axis_a: int, axis_b: int, base: str = "bits") -> float:
    """I(A; B) from a joint table, marginalizing every other axis."""
    joint = as_pmf(joint)
    if axis_a == axis_b:
        raise ValueError("axes must differ")
    others = tuple(k for k in range(joint.ndim) if k not in (axis_a, axis_b))
    pab = joint.sum(axis=others) if others else joint
    if axis_a > axis_b:
        pab = pab.T
    pa = pab.sum(axis=1, keepdims=True)
    pb = pab.sum(axis=0, keepdims=True)
    # a table that factorizes up to rounding carries exactly zero information
    if np.max(np.abs(pab - pa * pb)) <= 4 * np.finfo(float).eps:
        return 0.0
    mi = math.fsum(rel_entr(pab, pa * pb).ravel()) / _scale(base)
    return max(mi, 0.0)


@dataclass(frozen=True)
class InfoBudget:
    value: float
    bound: float
    value_nats: float
    bound_nats: float
    holds: bool
    margin: float


def avg_info_budget(joint, b: int, tol: float = 1e-9) -> InfoBudget:
    """Average information a 2^b-valued W carries on each of d independent Z's.

    ``joint`` has W on axis 0 and Z_1..Z_d on the remaining axes.
    """
    joint = as_pmf(joint)
    d = joint.ndim - 1
    if d < 1:
        raise ValueError("joint needs a W axis and at least one Z axis")
    if joint.shape[0] > 2**b:
        raise AlphabetTooLarge(f"W takes {joint.shape[0]} values, more than 2^{b}")
    pz = joint.sum(axis=0)
    product = np.ones(())
    for k in range(d):
        others = tuple(a for a in range(d) if a != k)
        marginal = pz.sum(axis=others) if others else pz
        product = np.multiply.outer(product, marginal)
    if np.max(np.abs(pz - product)) > tol:
        raise NotIndependent("Z axes are not mutually independent")
    value = sum(mutual_information(joint, 0, k + 1, "bits") for k in range(d)) / d
    bound = b / d
    return InfoBudget(
        value=value,
        bound=bound,
        value_nats=value * math.log(2),
        bound_nats=bound * math.log(2),
        holds=value <= bound + tol,
        margin=bound - value,
    )


@dataclass(frozen=True)
class DragomirReport:
    c: float
    kl_pq: float
    kl_qp: float
    chi2_pq: float
    lemma4_holds: bool
    lemma5_holds: bool


def dragomir_check(p, q, tol: float = 1e-9) -> DragomirReport:
    """Check KL(p||q) <= c KL(q||p) and KL(p||q) <= chi2(p||q) <= 2c KL(p||q).

    ``c`` is ``max p/q``; KL in nats.
    """
    p, q = _pair(p, q)
    if np.any((q == 0) & (p > 0)) or np.any((p == 0) & (q > 0)):
        raise UnboundedRatio("p and q must be mutually absolutely continuous")
    keep = q > 0
    c = float(np.max(p[keep] / q[keep]))
    kl_pq = kl(p, q)
    kl_qp = kl(q, p)
    x2 = chi2(p, q)
    return DragomirReport(
        c=c,
        kl_pq=kl_pq,
        kl_qp=kl_qp,
        chi2_pq=x2,
        lemma4_holds=kl_pq <= c * kl_qp + tol,
        lemma5_holds=(kl_pq <= x2 + tol) and (x2 <= 2 * c * kl_pq + tol),
    )


def log_sum_gap(a, b) -> float:
    """RHS minus LHS of the log-sum inequality (natural log); non-negative."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sa, sb = a.sum(), b.sum()
    lhs = float(rel_entr(sa, sb))
    rhs = math.fsum(rel_entr(a, b))
    return rhs - lhs


def balls_bins_moment(n: int, d: int, epsilon: float, trials: int, rng) -> tuple[float, float]:
    """Monte Carlo estimate of E[exp(epsilon * max bin load)] and its standard error.

    Throws ``n`` balls uniformly into ``d`` bins, ``trials`` times.
    """
    if n < 1 or d < 1 or epsilon < 0 or trials < 1:
        raise ValueError("need n, d, trials >= 1 and epsilon >= 0")
    loads = rng.multinomial(n, np.full(d, 1.0 / d), size=trials)
    values = np.exp(epsilon * loads.max(axis=1))
    se = float(values.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return float(values.mean()), se


def lemma2_bound(per_j_kls) -> tuple[float, float]:
    """Detection bound 3/d + 2B with B = sqrt((2/d) sum KL), clamped to 1.

    Returns ``(B, bound)``.
    """
    kls = np.asarray(per_j_kls, dtype=float)
    d = kls.size
    if d <= 1:
        raise ValueError("the detection bound needs d > 1")
    if np.any(kls < 0):
        raise ValueError("KL values must be non-negative")
    big_b = math.sqrt(2.0 / d * math.fsum(kls))
    return big_b, min(1.0, 3.0 / d + 2.0 * big_b)
