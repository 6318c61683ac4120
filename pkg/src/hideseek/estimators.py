"""Detection algorithms: constraint-free plug-ins and memory-limited scans.

The segment scans exist twice. :class:`SegmentScan` and
:class:`PairSegmentScan` are literal b-memory online protocols whose whole
state is packed into a b-bit :class:`~hideseek.protocol.Message`;
:func:`segment_scan` and :func:`pair_segment_scan` compute the same decision
with numpy and are what the experiments run. The test suite checks the two
agree on shared data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import MatrixOptSpec, pair_rank, pair_unrank, population_mean
from .errors import BudgetTooSmall, InsufficientData
from .protocol import Message, OnlineProtocol


def _as_dense(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return samples
    rows = [getattr(s, "values", s) for s in samples]
    if not rows:
        raise InsufficientData("empty sample")
    return np.stack(rows)


def full_info_argmax(samples, d: Optional[int] = None) -> int:
    """Coordinate with the largest empirical mean; ties go to the lowest index."""
    x = _as_dense(samples)
    if x.shape[0] == 0:
        raise InsufficientData("empty sample")
    if d is not None and x.shape[1] != d:
        raise ValueError(f"expected {d} coordinates, got {x.shape[1]}")
    return int(np.argmax(x.sum(axis=0, dtype=np.int64)))


def most_common_action(actions) -> int:
    """Mode of a sequence of actions, ties to the lowest index."""
    a = np.asarray(actions, dtype=np.int64)
    if a.size == 0:
        raise InsufficientData("no actions")
    return int(np.argmax(np.bincount(a)))


# -- segment scan ----------------------------------------------------------------


def _width(k: int) -> int:
    """Bits needed to store a value in ``range(k)``."""
    return max(1, (k - 1).bit_length())


@dataclass(frozen=True)
class ScanPlan:
    """Memory layout of a segment scan over ``n_coords`` (virtual) coordinates.

    State fields, in order: segment index, instances seen in the current
    segment, ``segment_size`` signed counters, hit flag, hit index, best
    index, best counter (offset by one so "nothing yet" fits). Counters hold
    sums of +-1 values over at most ``per_segment`` instances.
    """

    n_coords: int
    segment_size: int
    per_segment: int

    @property
    def n_segments(self) -> int:
        return -(-self.n_coords // self.segment_size)

    @property
    def counter_bits(self) -> int:
        return _width(2 * self.per_segment + 1)

    @property
    def fields(self) -> tuple[int, ...]:
        idx = _width(self.n_coords)
        return (
            _width(self.n_segments + 1),
            _width(self.per_segment),
            *([self.counter_bits] * self.segment_size),
            1,
            idx,
            idx,
            _width(2 * self.per_segment + 2),
        )

    @property
    def state_bits(self) -> int:
        return sum(self.fields)

    @property
    def instances(self) -> int:
        return self.n_segments * self.per_segment


def plan_scan(n_coords: int, b: int, per_segment: int) -> ScanPlan:
    """Largest segment that fits in ``b`` bits of state."""
    if per_segment < 1:
        raise ValueError("per_segment must be >= 1")
    lo, hi = 0, n_coords
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if ScanPlan(n_coords, mid, per_segment).state_bits <= b:
            lo = mid
        else:
            hi = mid - 1
    if lo == 0:
        need = ScanPlan(n_coords, 1, per_segment).state_bits
        raise BudgetTooSmall(f"b={b} bits cannot hold one counter (need {need})")
    return ScanPlan(n_coords, lo, per_segment)


def scan_bits(n_coords: int, segment_size: int, per_segment: int) -> int:
    """Bit budget that yields exactly ``segment_size`` counters."""
    return ScanPlan(n_coords, segment_size, per_segment).state_bits


def hoeffding_per_segment(d: int, rho: float, delta: float) -> int:
    """Instances per segment so every +-1 coordinate mean is within rho w.p. 1 - delta."""
    return math.ceil(2 * math.log(2 * d / delta) / rho**2)


def pair_per_segment(d: int, rho: float, delta: float) -> int:
    """Per-segment instances for pair scans, from the exp(-m tau^2 / 6) tail."""
    tau = 2 * rho / (d - 1)
    n_pairs = d * (d - 1) // 2
    return math.ceil(6 * math.log(2 * n_pairs / delta) / tau**2)


def _close_segment(sums, lo, threshold, hit, best_idx, best_sum):
    """Shared end-of-segment rule.

    The segment's top counter is recorded as a hit if it beats the threshold
    and no earlier segment produced one; it also replaces the running best
    if strictly larger.
    """
    k = int(np.argmax(sums))
    top = int(sums[k])
    if hit is None and top > threshold:
        hit = lo + k
    if top > best_sum:
        best_idx, best_sum = lo + k, top
    return hit, best_idx, best_sum


class SegmentScan(OnlineProtocol):
    """b-memory segment scan over dense +-1 instances.

    Coordinates are split into segments of as many counters as fit in ``b``
    bits; each segment is scored on ``per_segment`` fresh instances. A
    coordinate whose mean exceeds ``threshold`` is a hit; the first hit wins,
    otherwise the best coordinate seen is returned.
    """

    def __init__(self, d: int, b: int, threshold: float, per_segment: int):
        self.plan = plan_scan(d, b, per_segment)
        self.threshold_count = threshold * per_segment
        self.b = b

    # state packing ---------------------------------------------------------

    def _pack(self, values) -> Message:
        out = 0
        for value, width in zip(values, self.plan.fields):
            out = (out << width) | value
        return Message.from_int(out, self.plan.state_bits)

    def _unpack(self, state: Optional[Message]):
        plan = self.plan
        n = plan.per_segment
        if state is None:
            return 0, 0, [0] * plan.segment_size, None, 0, -n - 1
        raw = state.to_int()
        values = []
        for width in reversed(plan.fields):
            values.append(raw & ((1 << width) - 1))
            raw >>= width
        values.reverse()
        seg, cnt = values[0], values[1]
        counters = [v - n for v in values[2:2 + plan.segment_size]]
        flag, hit_idx, best_idx, best_enc = values[2 + plan.segment_size:]
        best_sum = best_enc - n - 1
        return seg, cnt, counters, (hit_idx if flag else None), best_idx, best_sum

    def _encode(self, seg, cnt, counters, hit, best_idx, best_sum) -> Message:
        n = self.plan.per_segment
        return self._pack(
            [seg, cnt, *(c + n for c in counters), int(hit is not None), hit or 0, best_idx,
             best_sum + n + 1]
        )

    # protocol --------------------------------------------------------------

    def _contributions(self, x, lo, hi):
        return range(hi - lo), np.asarray(x)[lo:hi]

    def update(self, x, state):
        plan = self.plan
        seg, cnt, counters, hit, best_idx, best_sum = self._unpack(state)
        if seg >= plan.n_segments:
            return self._encode(seg, cnt, counters, hit, best_idx, best_sum)
        lo = seg * plan.segment_size
        hi = min(lo + plan.segment_size, plan.n_coords)
        for k, v in zip(*self._contributions(x, lo, hi)):
            counters[k] += int(v)
        cnt += 1
        if cnt == plan.per_segment:
            sums = np.array(counters[: hi - lo])
            hit, best_idx, best_sum = _close_segment(
                sums, lo, self.threshold_count, hit, best_idx, best_sum
            )
            seg, cnt, counters = seg + 1, 0, [0] * plan.segment_size
        return self._encode(seg, cnt, counters, hit, best_idx, best_sum)

    def decode(self, state):
        seg, _, _, hit, best_idx, _ = self._unpack(state)
        if seg < self.plan.n_segments:
            raise InsufficientData(f"scan stopped in segment {seg} of {self.plan.n_segments}")
        return hit if hit is not None else best_idx


class PairSegmentScan(SegmentScan):
    """Segment scan over the virtual coordinates z_(i,j) = x_i x_j, i < j.

    Instances are ``(i, j, s1, s2)`` tuples as produced by
    :func:`~hideseek.distributions.sample_sparse_pca_batch`; each touches a
    single virtual coordinate with sign ``s1 * s2``.
    """

    def __init__(self, d: int, b: int, rho: float, per_segment: int):
        self.d = d
        n_pairs = d * (d - 1) // 2
        self.plan = plan_scan(n_pairs, b, per_segment)
        # mean of z above tau/2  <=>  signed count above 2 rho N / (d (d-1))
        self.threshold_count = 2 * rho * per_segment / (d * (d - 1))
        self.b = b

    def _contributions(self, x, lo, hi):
        i, j, s1, s2 = x
        r = int(pair_rank(i, j, self.d))
        if lo <= r < hi:
            return (r - lo,), (int(s1) * int(s2),)
        return (), ()

    def decode(self, state):
        return pair_unrank(super().decode(state), self.d)


def _scan(sample_sums, plan: ScanPlan, threshold_count: float) -> int:
    hit, best_idx, best_sum = None, 0, -plan.per_segment - 1
    for seg in range(plan.n_segments):
        lo = seg * plan.segment_size
        hi = min(lo + plan.segment_size, plan.n_coords)
        sums = sample_sums(seg, lo, hi)
        hit, best_idx, best_sum = _close_segment(sums, lo, threshold_count, hit, best_idx, best_sum)
    return hit if hit is not None else best_idx


def segment_scan(
    samples,
    d: int,
    b: int,
    rho: float,
    delta: float = 0.05,
    per_segment: Optional[int] = None,
) -> int:
    """Memory-limited detection of the biased coordinate of dense +-1 data.

    ``per_segment`` defaults to the Hoeffding budget for failure probability
    ``delta``. The detection threshold is ``rho``, halfway between the null
    mean 0 and the biased mean ``2 rho``.

    Raises
    ------
    InsufficientData
        If ``samples`` has fewer rows than the scan consumes.
    BudgetTooSmall
        If ``b`` cannot hold a single counter.
    """
    x = _as_dense(samples)
    n = per_segment or hoeffding_per_segment(d, rho, delta)
    plan = plan_scan(d, b, n)
    if x.shape[0] < plan.instances:
        raise InsufficientData(f"scan needs {plan.instances} instances, got {x.shape[0]}")

    def sums(seg, lo, hi):
        return x[seg * n:(seg + 1) * n, lo:hi].sum(axis=0, dtype=np.int64)

    return _scan(sums, plan, rho * n)


def pca_plugin(samples, d: int) -> tuple[int, int]:
    """Pair with the largest empirical mean of x_i x_j (lexicographic ties).

    ``samples`` is the ``(i, j, s1, s2)`` array tuple; each instance touches one
    pair, so only the signed count per pair is accumulated.
    """
    i, j, s1, s2 = samples
    if len(i) == 0:
        raise InsufficientData("empty sample")
    n_pairs = d * (d - 1) // 2
    ranks = pair_rank(i, j, d)
    signed = s1.astype(np.int64) * s2
    counts = np.bincount(ranks, weights=signed, minlength=n_pairs)
    return pair_unrank(int(np.argmax(counts)), d)


def pair_segment_scan(
    samples,
    d: int,
    b: int,
    rho: float,
    delta: float = 0.05,
    per_segment: Optional[int] = None,
) -> tuple[int, int]:
    """:func:`segment_scan` applied to the d(d-1)/2 pair products."""
    i, j, s1, s2 = samples
    n_pairs = d * (d - 1) // 2
    n = per_segment or pair_per_segment(d, rho, delta)
    plan = plan_scan(n_pairs, b, n)
    if len(i) < plan.instances:
        raise InsufficientData(f"scan needs {plan.instances} instances, got {len(i)}")
    ranks = pair_rank(i, j, d)
    signed = s1.astype(np.int64) * s2

    def sums(seg, lo, hi):
        r = ranks[seg * n:(seg + 1) * n]
        v = signed[seg * n:(seg + 1) * n]
        keep = (r >= lo) & (r < hi)
        return np.bincount(r[keep] - lo, weights=v[keep], minlength=hi - lo).astype(np.int64)

    winner = _scan(sums, plan, 2 * rho * n / (d * (d - 1)))
    return pair_unrank(winner, d)


# -- stochastic optimisation -------------------------------------------------------


@dataclass(frozen=True)
class StochOptResult:
    entry: tuple[int, int]
    empirical_min: float
    gap: Optional[float]
    deviation: Optional[float]


def stochopt_plugin(samples, d: int, spec: Optional[MatrixOptSpec] = None) -> StochOptResult:
    """Entry with the smallest empirical mean (row-major ties).

    With ``spec`` given, also reports the exact optimisation gap
    F(e_I, e_J) - min F and the deviation |empirical min - true min|.
    """
    z = np.asarray(samples)
    if z.shape[0] == 0:
        raise InsufficientData("empty sample")
    means = z.sum(axis=0, dtype=np.int64) / z.shape[0]
    flat = int(np.argmin(means))
    entry = (flat // d, flat % d)
    emp = float(means[entry])
    gap = deviation = None
    if spec is not None:
        mu = population_mean(spec)
        gap = float(bilinear_value(mu, entry) - mu.min())
        deviation = abs(emp - float(mu.min()))
    return StochOptResult(entry, emp, gap, deviation)


def bilinear_value(mean_matrix, entry=None, w=None, v=None) -> float:
    """F(w, v) = w^T E[Z] v; ``entry`` selects the simplex vertex (e_i, e_j)."""
    mu = np.asarray(mean_matrix, dtype=float)
    if entry is not None:
        w = np.zeros(mu.shape[0])
        v = np.zeros(mu.shape[1])
        w[entry[0]] = v[entry[1]] = 1.0
    return float(w @ mu @ v)
