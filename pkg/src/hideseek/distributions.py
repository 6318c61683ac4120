"""Samplers and exact moments for the hide-and-seek distribution families.

Coordinates are 0-based throughout: a hidden coordinate ``j`` lives in
``range(d)`` and a hidden pair ``(i, j)`` satisfies ``0 <= i < j < d``.

Each family has a single-draw sampler returning an :class:`Instance` payload
and a ``*_batch`` sampler returning numpy arrays, which is what the estimators
and the harness use.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np

from .errors import ConfigError


def _check_rho(rho: float, hi: float = 0.5) -> None:
    if not (0.0 <= rho <= hi):
        raise ValueError(f"rho must lie in [0, {hi}], got {rho}")


def _check_d(d: int, lo: int = 1) -> None:
    if int(d) != d or d < lo:
        raise ValueError(f"d must be an integer >= {lo}, got {d}")


@dataclass(frozen=True)
class HideSeekV1Spec:
    """Product distribution on {-1,+1}^d with coordinate ``j`` biased toward +1.

    ``j=None`` gives the uniform reference distribution.
    """

    d: int
    rho: float
    j: Optional[int] = None
    variant = "v1"

    def __post_init__(self):
        _check_d(self.d)
        _check_rho(self.rho)
        if self.j is not None and not 0 <= self.j < self.d:
            raise ValueError(f"j must lie in range({self.d}), got {self.j}")


@dataclass(frozen=True)
class HideSeekV2Spec:
    """Distribution on {+e_i, -e_i}: uniform coordinate, sign biased at ``j``."""

    d: int
    rho: float
    j: Optional[int] = None
    variant = "v2"

    def __post_init__(self):
        _check_d(self.d)
        _check_rho(self.rho)
        if self.j is not None and not 0 <= self.j < self.d:
            raise ValueError(f"j must lie in range({self.d}), got {self.j}")


@dataclass(frozen=True)
class BanditLossSpec:
    """Binary loss vectors; arm ``j`` has loss 0 with probability 1/2 + rho."""

    d: int
    rho: float
    j: int = 0
    variant = "bandit"

    def __post_init__(self):
        _check_d(self.d)
        _check_rho(self.rho, 0.25)
        if not 0 <= self.j < self.d:
            raise ValueError(f"j must lie in range({self.d}), got {self.j}")


@dataclass(frozen=True)
class SparsePcaSpec:
    """2-sparse vectors sqrt(d/2)(s1 e_i + s2 e_j) with one correlated pair."""

    d: int
    rho: float
    pair: Optional[tuple[int, int]] = None
    variant = "sparse_pca"

    def __post_init__(self):
        _check_d(self.d, 2)
        if not 0.0 <= self.rho < 0.5:
            raise ValueError(f"rho must lie in [0, 1/2), got {self.rho}")
        if self.pair is not None:
            i, j = self.pair
            if not 0 <= i < j < self.d:
                raise ValueError(f"pair must satisfy 0 <= i < j < d, got {self.pair}")
            object.__setattr__(self, "pair", (int(i), int(j)))

    @property
    def tau(self) -> float:
        """Covariance of the correlated pair, 2 rho / (d - 1)."""
        return 2.0 * self.rho / (self.d - 1)

    @property
    def n_pairs(self) -> int:
        return self.d * (self.d - 1) // 2


@dataclass(frozen=True)
class MatrixOptSpec:
    """Random sign matrices whose entry ``pair`` has mean ``beta``.

    ``beta`` may be negative: the optimisation problem minimises the entry
    mean, so a negative bias is what makes the hidden entry the minimiser.
    """

    d: int
    beta: float
    pair: Optional[tuple[int, int]] = None
    variant = "matrix"

    def __post_init__(self):
        _check_d(self.d)
        if not -1.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [-1, 1], got {self.beta}")
        if self.pair is not None:
            i, j = self.pair
            if not (0 <= i < self.d and 0 <= j < self.d):
                raise ValueError(f"pair out of range for d={self.d}: {self.pair}")
            object.__setattr__(self, "pair", (int(i), int(j)))


AnySpec = Union[HideSeekV1Spec, HideSeekV2Spec, BanditLossSpec, SparsePcaSpec, MatrixOptSpec]

_SPEC_TYPES = {
    cls.variant: cls
    for cls in (HideSeekV1Spec, HideSeekV2Spec, BanditLossSpec, SparsePcaSpec, MatrixOptSpec)
}


def spec_to_dict(spec: AnySpec) -> dict:
    out = {"variant": spec.variant}
    for key, value in asdict(spec).items():
        out[key] = list(value) if isinstance(value, tuple) else value
    return out


def spec_from_dict(data: dict) -> AnySpec:
    data = dict(data)
    try:
        cls = _SPEC_TYPES[data.pop("variant")]
    except KeyError as exc:
        raise ConfigError(f"unknown or missing distribution variant: {exc}") from None
    if data.get("pair") is not None:
        data["pair"] = tuple(data["pair"])
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from None


# -- instance payloads -------------------------------------------------------


@dataclass(frozen=True)
class DenseSign:
    values: np.ndarray


@dataclass(frozen=True)
class SparsePair:
    """Up to two non-zero entries, stored as ``(index, value)`` tuples."""

    entries: tuple[tuple[int, float], ...]

    def __post_init__(self):
        idx = [i for i, _ in self.entries]
        if len(set(idx)) != len(idx):
            raise ValueError("SparsePair entries must have distinct indices")

    def to_dense(self, d: int) -> np.ndarray:
        x = np.zeros(d)
        for i, v in self.entries:
            x[i] = v
        return x


@dataclass(frozen=True)
class BinaryLoss:
    values: np.ndarray


@dataclass(frozen=True)
class SignMatrix:
    values: np.ndarray


Instance = Union[DenseSign, SparsePair, BinaryLoss, SignMatrix]


# -- pair indexing -------------------------------------------------------------


def pair_rank(i, j, d):
    """Lexicographic rank of the pair ``i < j`` among all pairs of ``range(d)``."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    return i * d - i * (i + 1) // 2 + (j - i - 1)


def pair_unrank(r: int, d: int) -> tuple[int, int]:
    """Inverse of :func:`pair_rank` for a single rank."""
    i = 0
    row = d - 1
    while r >= row:
        r -= row
        i += 1
        row -= 1
    return i, i + 1 + r


# -- batch samplers ------------------------------------------------------------


def sample_v1_batch(spec: HideSeekV1Spec, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` instances as an int8 array of shape ``(size, d)`` with entries +-1."""
    bits = rng.integers(0, 2, size=(size, spec.d), dtype=np.int8)
    x = 2 * bits - 1
    if spec.j is not None:
        x[:, spec.j] = np.where(rng.random(size) < 0.5 + spec.rho, 1, -1)
    return x


def sample_v2_batch(spec: HideSeekV2Spec, rng: np.random.Generator, size: int):
    """Return ``(index, sign)`` arrays; instance ``t`` is ``sign[t] * e_index[t]``."""
    index = rng.integers(0, spec.d, size=size)
    p_plus = np.full(size, 0.5)
    if spec.j is not None:
        p_plus[index == spec.j] += spec.rho
    sign = np.where(rng.random(size) < p_plus, 1, -1).astype(np.int8)
    return index, sign


def sample_bandit_loss_batch(spec: BanditLossSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Loss vectors in {0,1}^d as a uint8 array of shape ``(size, d)``."""
    loss = rng.integers(0, 2, size=(size, spec.d), dtype=np.uint8)
    loss[:, spec.j] = (rng.random(size) >= 0.5 + spec.rho).astype(np.uint8)
    return loss


def sample_sparse_pca_batch(spec: SparsePcaSpec, rng: np.random.Generator, size: int):
    """Return ``(i, j, s1, s2)`` arrays with ``i < j``.

    Instance ``t`` is ``sqrt(d/2) * (s1[t] e_i[t] + s2[t] e_j[t])``.
    """
    d = spec.d
    a = rng.integers(0, d, size=size)
    b = rng.integers(0, d - 1, size=size)
    b = b + (b >= a)
    i = np.minimum(a, b)
    j = np.maximum(a, b)
    s1 = np.where(rng.random(size) < 0.5, 1, -1).astype(np.int8)
    agree = np.full(size, 0.5)
    if spec.pair is not None:
        agree[(i == spec.pair[0]) & (j == spec.pair[1])] += spec.rho
    s2 = np.where(rng.random(size) < agree, s1, -s1).astype(np.int8)
    return i, j, s1, s2


def sample_opt_matrix_batch(spec: MatrixOptSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Sign matrices as an int8 array of shape ``(size, d, d)``."""
    z = rng.integers(0, 2, size=(size, spec.d, spec.d), dtype=np.int8)
    z = 2 * z - 1
    if spec.pair is not None:
        i, j = spec.pair
        z[:, i, j] = np.where(rng.random(size) < (1 + spec.beta) / 2, 1, -1)
    return z


# -- single-draw samplers ------------------------------------------------------


def sample_v1(spec: HideSeekV1Spec, rng: np.random.Generator) -> DenseSign:
    return DenseSign(sample_v1_batch(spec, rng, 1)[0])


def sample_v2(spec: HideSeekV2Spec, rng: np.random.Generator) -> SparsePair:
    index, sign = sample_v2_batch(spec, rng, 1)
    return SparsePair(((int(index[0]), float(sign[0])),))


def sample_bandit_loss(spec: BanditLossSpec, rng: np.random.Generator) -> BinaryLoss:
    return BinaryLoss(sample_bandit_loss_batch(spec, rng, 1)[0])


def sample_sparse_pca(spec: SparsePcaSpec, rng: np.random.Generator) -> SparsePair:
    i, j, s1, s2 = sample_sparse_pca_batch(spec, rng, 1)
    scale = math.sqrt(spec.d / 2)
    return SparsePair(((int(i[0]), scale * s1[0]), (int(j[0]), scale * s2[0])))


def sample_opt_matrix(spec: MatrixOptSpec, rng: np.random.Generator) -> SignMatrix:
    return SignMatrix(sample_opt_matrix_batch(spec, rng, 1)[0])


# -- exact moments and pmfs ----------------------------------------------------


def population_mean(spec: AnySpec) -> np.ndarray:
    """Exact mean of an instance.

    For the sparse-PCA family this is the second-moment matrix E[x x^T]
    (unit diagonal, ``tau`` at the correlated pair), since first moments are
    all zero there.
    """
    if isinstance(spec, HideSeekV1Spec):
        mu = np.zeros(spec.d)
        if spec.j is not None:
            mu[spec.j] = 2 * spec.rho
        return mu
    if isinstance(spec, HideSeekV2Spec):
        mu = np.zeros(spec.d)
        if spec.j is not None:
            mu[spec.j] = 2 * spec.rho / spec.d
        return mu
    if isinstance(spec, BanditLossSpec):
        mu = np.full(spec.d, 0.5)
        mu[spec.j] = 0.5 - spec.rho
        return mu
    if isinstance(spec, SparsePcaSpec):
        mom = np.eye(spec.d)
        if spec.pair is not None:
            i, j = spec.pair
            mom[i, j] = mom[j, i] = spec.tau
        return mom
    if isinstance(spec, MatrixOptSpec):
        mu = np.zeros((spec.d, spec.d))
        if spec.pair is not None:
            mu[spec.pair] = spec.beta
        return mu
    raise TypeError(f"unsupported spec {type(spec).__name__}")


def v1_pmf(spec: HideSeekV1Spec, x) -> float:
    """Exact probability of the sign vector ``x`` under ``spec``."""
    x = np.asarray(x)
    p = 0.5 ** (spec.d - (spec.j is not None))
    if spec.j is not None:
        p *= 0.5 + spec.rho if x[spec.j] > 0 else 0.5 - spec.rho
    return float(p)


def instance_alphabet(spec: Union[HideSeekV1Spec, HideSeekV2Spec]):
    """All instances with their exact probabilities.

    Returns ``(instances, probs)`` where ``instances`` has shape ``(K, d)``
    (dense representation, including for the sparse family).
    """
    if isinstance(spec, HideSeekV1Spec):
        if spec.d > 20:
            raise ValueError("v1 alphabet enumeration is limited to d <= 20")
        xs = np.array(list(itertools.product((-1, 1), repeat=spec.d)), dtype=np.int8)
        probs = np.array([v1_pmf(spec, x) for x in xs])
        return xs, probs
    if isinstance(spec, HideSeekV2Spec):
        d = spec.d
        xs = np.zeros((2 * d, d), dtype=np.int8)
        probs = np.full(2 * d, 1.0 / (2 * d))
        for i in range(d):
            xs[2 * i, i] = 1
            xs[2 * i + 1, i] = -1
        if spec.j is not None:
            probs[2 * spec.j] += spec.rho / d
            probs[2 * spec.j + 1] -= spec.rho / d
        return xs, probs
    raise TypeError(f"no finite alphabet for {type(spec).__name__}")
