"""Monte Carlo experiment orchestration.

Every trial draws from its own stream ``stream(seed, trial)``, so results do
not depend on thread count or execution order, and re-running a config with
the same seed reproduces the CSV byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from . import __version__
from .distributions import (
    BanditLossSpec,
    HideSeekV1Spec,
    HideSeekV2Spec,
    MatrixOptSpec,
    SparsePcaSpec,
    sample_bandit_loss_batch,
    sample_opt_matrix_batch,
    sample_sparse_pca_batch,
    sample_v1_batch,
)
from .errors import HideSeekError, InsufficientData, TargetNotBracketed
from .estimators import (
    full_info_argmax,
    pair_segment_scan,
    pca_plugin,
    scan_bits,
    segment_scan,
    stochopt_plugin,
)
from .learners import run_coordinate_bandit, run_hedge
from .rng import stream


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return max(0.0, float(ci.low)), min(1.0, float(ci.high))


def _map_trials(fn, trials: int, threads: int = 1):
    if threads <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(trials)))


# -- hidden-coordinate handling --------------------------------------------------


def hidden_values(spec) -> list:
    if isinstance(spec, (HideSeekV1Spec, HideSeekV2Spec, BanditLossSpec)):
        return list(range(spec.d))
    if isinstance(spec, SparsePcaSpec):
        return [(i, j) for i in range(spec.d) for j in range(i + 1, spec.d)]
    if isinstance(spec, MatrixOptSpec):
        return [(i, j) for i in range(spec.d) for j in range(spec.d)]
    raise TypeError(f"unsupported spec {type(spec).__name__}")


def with_hidden(spec, hidden):
    if isinstance(spec, (SparsePcaSpec, MatrixOptSpec)):
        return replace(spec, pair=hidden)
    return replace(spec, j=hidden)


def hidden_of(spec):
    return spec.pair if isinstance(spec, (SparsePcaSpec, MatrixOptSpec)) else spec.j


# -- success probability ---------------------------------------------------------

Detector = Callable[[object, int, np.random.Generator], object]


@dataclass
class SuccessEstimate:
    successes: int
    trials: int
    p_hat: float
    ci_low: float
    ci_high: float
    per_hidden: dict = field(default_factory=dict)

    @property
    def min_over_hidden(self) -> float:
        return min(s / n for s, n in self.per_hidden.values())

    @property
    def mean_over_hidden(self) -> float:
        rates = [s / n for s, n in self.per_hidden.values()]
        return float(np.mean(rates))


def estimate_success_prob(
    algorithm: Detector,
    spec,
    budget: int,
    trials: int,
    seed: int,
    threads: int = 1,
    salt: int = 0,
) -> SuccessEstimate:
    """Fraction of trials in which ``algorithm`` recovers the hidden coordinate.

    The hidden coordinate (or pair) is drawn uniformly per trial; the
    per-hidden breakdown is kept so the worst case is also available.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    choices = hidden_values(spec)

    def one(trial):
        rng = stream(seed, salt, trial)
        hidden = choices[int(rng.integers(len(choices)))]
        try:
            found = algorithm(with_hidden(spec, hidden), budget, rng)
        except HideSeekError as exc:
            raise type(exc)(f"trial {trial}, budget {budget}: {exc}") from exc
        return hidden, found == hidden

    results = _map_trials(one, trials, threads)
    per: dict = {}
    for hidden, ok in results:
        s, n = per.get(hidden, (0, 0))
        per[hidden] = (s + int(ok), n + 1)
    k = sum(int(ok) for _, ok in results)
    lo, hi = wilson_interval(k, trials)
    return SuccessEstimate(k, trials, k / trials, lo, hi, dict(sorted(per.items())))


@dataclass
class ThresholdResult:
    m_star: int
    lo: int
    hi: int
    probes: list
    violations: list

    def as_dict(self) -> dict:
        return {"m_star": self.m_star, "lo": self.lo, "hi": self.hi,
                "probes": self.probes, "violations": self.violations}


def find_sample_threshold(
    algorithm: Detector,
    spec,
    target: float,
    m_lo: int,
    m_hi: int,
    trials: int,
    seed: int,
    threads: int = 1,
    rel_width: float = 0.1,
) -> ThresholdResult:
    """Bisect the sample budget at which empirical success first reaches ``target``.

    All probes share the seed, so neighbouring budgets see correlated data.
    Non-monotone probe pairs are reported in ``violations``, not smoothed.
    """
    probes: dict[int, float] = {}

    def success(m):
        if m not in probes:
            probes[m] = estimate_success_prob(algorithm, spec, m, trials, seed, threads).p_hat
        return probes[m]

    if success(m_hi) < target:
        raise TargetNotBracketed(f"success {probes[m_hi]:.3f} at m_hi={m_hi} is below {target}")
    if success(m_lo) >= target:
        lo = hi = m_lo
    else:
        lo, hi = m_lo, m_hi
        while hi - lo > max(1.0, rel_width * hi):
            mid = (lo + hi) // 2
            if success(mid) >= target:
                hi = mid
            else:
                lo = mid
    ordered = sorted(probes.items())
    violations = [
        (m1, p1, m2, p2)
        for (m1, p1), (m2, p2) in zip(ordered, ordered[1:])
        if p2 < p1 and (p1 >= target > p2)
    ]
    return ThresholdResult(round((lo + hi) / 2), lo, hi, ordered, violations)


# -- detector adapters --------------------------------------------------------------


def full_info_detector(spec: HideSeekV1Spec, budget: int, rng) -> int:
    return full_info_argmax(sample_v1_batch(spec, rng, budget))


def segment_scan_detector(segment_size: int, delta: float = 0.05) -> Detector:
    """Segment scan whose b is sized for ``segment_size`` counters at each budget."""

    def detect(spec: HideSeekV1Spec, budget: int, rng) -> int:
        n_seg = -(-spec.d // segment_size)
        per = budget // n_seg
        if per < 1:
            raise InsufficientData(f"budget {budget} below one instance per segment")
        b = scan_bits(spec.d, segment_size, per)
        x = sample_v1_batch(spec, rng, n_seg * per)
        return segment_scan(x, spec.d, b, spec.rho, delta, per_segment=per)

    return detect


def pca_plugin_detector(spec: SparsePcaSpec, budget: int, rng):
    return pca_plugin(sample_sparse_pca_batch(spec, rng, budget), spec.d)


def pair_scan_detector(counters: int) -> Detector:
    def detect(spec: SparsePcaSpec, budget: int, rng):
        n_pairs = spec.n_pairs
        n_seg = -(-n_pairs // counters)
        per = budget // n_seg
        if per < 1:
            raise InsufficientData(f"budget {budget} below one instance per segment")
        b = scan_bits(n_pairs, counters, per)
        data = sample_sparse_pca_batch(spec, rng, n_seg * per)
        return pair_segment_scan(data, spec.d, b, spec.rho, per_segment=per)

    return detect


def stochopt_detector(spec: MatrixOptSpec, budget: int, rng):
    return stochopt_plugin(sample_opt_matrix_batch(spec, rng, budget), spec.d).entry


def oracle_detector(spec, budget, rng):
    return hidden_of(spec)


def wrong_detector(spec, budget, rng):
    choices = hidden_values(spec)
    truth = hidden_of(spec)
    return next(h for h in choices if h != truth)


DETECTORS = {
    "full_info_argmax": lambda **kw: full_info_detector,
    "segment_scan": lambda segment_size=16, delta=0.05: segment_scan_detector(segment_size, delta),
    "pca_plugin": lambda **kw: pca_plugin_detector,
    "pair_segment_scan": lambda counters=16: pair_scan_detector(counters),
    "stochopt_plugin": lambda **kw: stochopt_detector,
    "oracle": lambda **kw: oracle_detector,
    "always_wrong": lambda **kw: wrong_detector,
}


def make_detector(name: str, **params) -> Detector:
    try:
        factory = DETECTORS[name]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; known: {sorted(DETECTORS)}") from None
    return factory(**params)


# -- regret ---------------------------------------------------------------------------


@dataclass
class RegretSummary:
    checkpoints: list
    # learner -> metric -> (means, standard errors) per checkpoint
    curves: dict

    def final(self, learner: str, metric: str = "best") -> float:
        return self.curves[learner][metric][0][-1]


def run_regret_experiment(
    d: int,
    T: int,
    rho: float,
    trials: int,
    seed: int,
    checkpoints: Optional[Sequence[int]] = None,
    threads: int = 1,
) -> RegretSummary:
    """Hedge vs the 1-bit bandit learner on shared loss sequences.

    Reports, per checkpoint, mean regret against the biased arm and against
    the best arm in hindsight, with standard errors across trials.
    """
    if checkpoints is None:
        checkpoints = [max(1, T * k // 10) for k in range(1, 11)]
    checkpoints = sorted(set(int(c) for c in checkpoints))

    def one(trial):
        rng = stream(seed, trial)
        spec = BanditLossSpec(d, rho, int(rng.integers(d)))
        losses = sample_bandit_loss_batch(spec, rng, T)
        out = {}
        for name, runner in (("hedge", run_hedge), ("bandit", run_coordinate_bandit)):
            trace = runner(spec, T, rng=rng, losses=losses)
            out[name] = trace.curves(checkpoints, spec.j)
        return out

    results = _map_trials(one, trials, threads)
    curves = {}
    for name in ("hedge", "bandit"):
        curves[name] = {}
        for k, metric in enumerate(("biased", "best")):
            data = np.array([r[name][k] for r in results])
            se = data.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.zeros(len(checkpoints))
            curves[name][metric] = (data.mean(axis=0).tolist(), se.tolist())
    return RegretSummary(checkpoints, curves)


# -- reports ----------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, tuple):
        return "-".join(_fmt(v) for v in value)
    return str(value)


@dataclass
class Report:
    kind: str
    columns: list
    rows: list
    config: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    passed: bool = True

    def formatted_rows(self) -> list:
        return [[_fmt(v) for v in row] for row in self.rows]


def write_report(report: Report, path) -> tuple[Path, Path]:
    """Write ``report`` as CSV plus a JSON sidecar carrying the config echo.

    The CSV holds only data determined by (config, seed); wall-clock time and
    library version live in the sidecar.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(report.columns)
            writer.writerows(report.formatted_rows())
        sidecar = path.with_suffix(".json")
        meta = {
            "kind": report.kind,
            "columns": report.columns,
            "config": report.config,
            "wall_clock_s": report.wall_clock,
            "version": __version__,
            "passed": report.passed,
        }
        sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str))
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path, sidecar


def read_report(path) -> Report:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    meta = json.loads(path.with_suffix(".json").read_text())
    return Report(meta["kind"], rows[0], rows[1:], meta["config"], meta["wall_clock_s"], meta["passed"])


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
