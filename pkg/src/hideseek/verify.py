"""Numeric verification sweeps for the auxiliary inequalities and KL bounds.

Each check produces one :class:`CaseResult` per case. Exact checks fail on a
margin below ``-EXACT_TOL``; the Monte Carlo check fails when its estimate
plus three standard errors crosses the bound.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import HideSeekV1Spec, HideSeekV2Spec, instance_alphabet
from .infotheory import (
    avg_info_budget,
    balls_bins_moment,
    dragomir_check,
    kl,
    lemma2_bound,
    log_sum_gap,
    total_variation,
)
from .protocol import (
    ProtocolSpec,
    TableProtocol,
    all_one_bit_two_round_protocols,
    enumerate_transcripts,
    transcript_kl,
    transcript_kl_bound_check,
)
from .rng import stream

EXACT_TOL = 1e-9


@dataclass(frozen=True)
class CaseResult:
    check: str
    case: int
    quantity: float
    bound: float
    margin: float
    holds: bool


@dataclass
class CheckSummary:
    name: str
    cases: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return all(c.holds for c in self.cases)

    @property
    def worst_margin(self) -> float:
        return min(c.margin for c in self.cases)

    @property
    def failures(self) -> int:
        return sum(not c.holds for c in self.cases)


def _case(check, case, quantity, bound, tol=EXACT_TOL):
    margin = bound - quantity
    return CaseResult(check, case, float(quantity), float(bound), float(margin), margin >= -tol)


def _random_pmf(rng, k):
    # mix sharp and flat Dirichlet draws so near-degenerate pairs are covered
    alpha = rng.choice([0.1, 0.5, 1.0, 5.0])
    p = rng.dirichlet(np.full(k, alpha))
    p = np.maximum(p, 1e-12)
    return p / p.sum()


# -- individual sweeps ---------------------------------------------------------


def check_pinsker(rng, cases=10_000):
    out = []
    for c in range(cases):
        k = int(rng.integers(2, 9))
        p, q = _random_pmf(rng, k), _random_pmf(rng, k)
        out.append(_case("pinsker", c, total_variation(p, q), math.sqrt(2 * kl(p, q))))
    return out


def check_log_sum(rng, cases=10_000):
    out = []
    for c in range(cases):
        k = int(rng.integers(1, 9))
        a = rng.exponential(size=k) * (rng.random(k) > 0.2)
        b = rng.exponential(size=k) + 1e-9
        # gap = RHS - LHS, so quantity 0 against bound gap
        out.append(_case("log_sum", c, 0.0, log_sum_gap(a, b)))
    return out


def check_dragomir(rng, cases=10_000):
    l4, l5 = [], []
    for c in range(cases):
        k = int(rng.integers(2, 9))
        p, q = _random_pmf(rng, k), _random_pmf(rng, k)
        r = dragomir_check(p, q)
        l4.append(_case("lemma4", c, r.kl_pq, r.c * r.kl_qp))
        # the sandwich has two sides; report the tighter one
        lo = r.chi2_pq - r.kl_pq
        hi = 2 * r.c * r.kl_pq - r.chi2_pq
        tight = min(lo, hi)
        l5.append(CaseResult("lemma5", c, r.chi2_pq, r.chi2_pq + tight, tight, tight >= -EXACT_TOL))
    return l4, l5


def random_lemma7_joint(rng, d=3, b=1):
    """Joint pmf of (W, Z_1..Z_d): independent Z's, W = channel(map(Z))."""
    sizes = [2] * d
    if rng.random() < 0.5:
        marginals = [np.array([0.5, 0.5]) for _ in range(d)]
    else:
        marginals = [rng.dirichlet([1.0, 1.0]) for _ in range(d)]
    pz = marginals[0]
    for mk in marginals[1:]:
        pz = np.multiply.outer(pz, mk)
    n_w = 2**b
    f = rng.integers(n_w, size=sizes)
    channel = rng.dirichlet(np.full(n_w, 0.5), size=n_w)
    joint = np.zeros((n_w, *sizes))
    for z in itertools.product(*(range(s) for s in sizes)):
        joint[(slice(None), *z)] = pz[z] * channel[f[z]]
    return joint


def check_lemma7(rng, cases=1000, d=3):
    out = []
    for c in range(cases):
        b = 1 + c % 2
        rep = avg_info_budget(random_lemma7_joint(rng, d, b), b)
        out.append(_case("lemma7", c, rep.value, rep.bound))
    return out


def check_lemma6(rng, n=12, d=8, eps=1 / 6, trials=100_000):
    mean, se = balls_bins_moment(n, d, eps, trials, rng)
    return [_case("lemma6", 0, mean + 3 * se, 13.0, tol=0.0)]


def _random_table_protocol(rng, xs, m, width=1):
    tables = []
    for t in range(m):
        prev = list(itertools.product(range(2**width), repeat=t))
        tables.append({(x, h): int(rng.integers(2**width)) for x in xs for h in prev})
    return TableProtocol(tables, width)


def check_lemma2(rng, cases=100, d=8, rho=0.25):
    """Exact detection probability of random tiny protocols vs the detection bound.

    Odd cases decode transcripts by maximum likelihood over j, even cases by a
    random map; the bound must hold for the worst-detected coordinate.
    """
    spec = ProtocolSpec(1, 1, 2)
    xs = [tuple(int(v) for v in x) for x in instance_alphabet(HideSeekV1Spec(d, rho))[0]]
    out = []
    for c in range(cases):
        proto = _random_table_protocol(rng, xs, spec.m)
        p0 = enumerate_transcripts(proto, spec, HideSeekV1Spec(d, rho))
        pjs = [enumerate_transcripts(proto, spec, HideSeekV1Spec(d, rho, j)) for j in range(d)]
        keys = sorted(set(p0) | set().union(*pjs), key=lambda ms: tuple(m.to_int() for m in ms))
        if c % 2:
            decide = {k: int(np.argmax([pj.get(k, 0.0) for pj in pjs])) for k in keys}
        else:
            decide = {k: int(rng.integers(d)) for k in keys}
        detect = [sum(p for k, p in pj.items() if decide[k] == j) for j, pj in enumerate(pjs)]
        null = [sum(p for k, p in p0.items() if decide[k] == j) for j in range(d)]
        big_b, bound = lemma2_bound([transcript_kl(p0, pj) for pj in pjs])
        out.append(_case("lemma2", c, min(detect), bound))
        # intermediate step of the argument: average detection shift <= B
        shift = sum(abs(a - z) for a, z in zip(null, detect)) / d
        out.append(_case("lemma2_shift", c, shift, big_b))
    return out


def check_kl_sweep_v1(d=2, rho=0.1):
    spec = ProtocolSpec(1, 1, 2)
    a, b = [], []
    for c, proto in enumerate(all_one_bit_two_round_protocols(d)):
        rep = transcript_kl_bound_check(proto, spec, "v1", d, rho)
        a.append(_case("kl_11ppr0", c, rep.lhs, rep.rhs["11ppr0"]))
        b.append(_case("kl_ppr0", c, rep.lhs, rep.rhs["ppr0"]))
    return a, b


def check_kl_sweep_v2(rng, cases=200, d=3, rho=0.03):
    spec = ProtocolSpec(1, 1, 2)
    xs = [tuple(int(v) for v in x) for x in instance_alphabet(HideSeekV2Spec(d, rho))[0]]
    out = []
    for c in range(cases):
        proto = _random_table_protocol(rng, xs, spec.m)
        rep = transcript_kl_bound_check(proto, spec, "v2", d, rho)
        out.append(_case("kl_2ppr0", c, rep.lhs, rep.rhs["2ppr0"]))
    return out


REQUIRED_CHECKS = (
    "lemma2", "lemma2_shift", "lemma4", "lemma5", "lemma6", "lemma7",
    "pinsker", "log_sum", "kl_11ppr0", "kl_ppr0", "kl_2ppr0",
)


def run_verify_suite(seed: int = 0, scale: float = 1.0) -> dict[str, CheckSummary]:
    """Run every sweep and return one summary per check name.

    ``scale`` shrinks the random sweeps (not the exhaustive protocol sweep)
    for quick runs.
    """
    def n(k):
        return max(1, int(k * scale))

    results: list[CaseResult] = []
    results += check_lemma2(stream(seed, 2), n(100))
    l4, l5 = check_dragomir(stream(seed, 4), n(10_000))
    results += l4 + l5
    results += check_lemma6(stream(seed, 6), trials=n(100_000))
    results += check_lemma7(stream(seed, 7), n(1000))
    results += check_pinsker(stream(seed, 8), n(10_000))
    results += check_log_sum(stream(seed, 9), n(10_000))
    a, b = check_kl_sweep_v1()
    results += a + b
    results += check_kl_sweep_v2(stream(seed, 11), n(200))

    suite = {name: CheckSummary(name) for name in REQUIRED_CHECKS}
    for r in results:
        suite[r.check].cases.append(r)
    missing = [name for name, s in suite.items() if not s.cases]
    assert not missing, f"verify suite skipped checks: {missing}"
    return suite
