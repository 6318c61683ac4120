"""Config-driven experiment runners that turn a JSON config into a :class:`Report`.

CSV schemas, one per experiment kind:

``hideseek`` / ``sparsepca``
    algorithm, budget, successes, trials, p_hat, ci_low, ci_high,
    min_over_hidden, mean_over_hidden
``hideseek`` / ``sparsepca`` with a ``threshold`` block
    algorithm, m_star, lo, hi, probes, violations
``regret``
    checkpoint, learner, mean_vs_biased, se_vs_biased, mean_vs_best, se_vs_best
``stochopt``
    trial, i, j, empirical_min, gap, deviation, bound, within
``verify``
    check, case, quantity, bound, margin, holds
``enumerate``
    protocol_id, j, kl_nats, bound, margin  (j = "all" rows carry the
    averaged left-hand side against each bound)
"""

from __future__ import annotations

import copy
import math

from .distributions import MatrixOptSpec, sample_opt_matrix_batch, spec_from_dict
from .errors import ConfigError
from .estimators import stochopt_plugin
from .harness import (
    DETECTORS,
    Report,
    Timer,
    estimate_success_prob,
    find_sample_threshold,
    hidden_values,
    make_detector,
    run_regret_experiment,
    with_hidden,
)
from .learners import appendix_rho
from .protocol import ProtocolSpec, all_one_bit_two_round_protocols, transcript_kl_bound_check
from .rng import stream
from .verify import run_verify_suite

SCHEMA_VERSION = 1
KINDS = ("hideseek", "regret", "sparsepca", "stochopt", "verify", "enumerate")

DEFAULTS = {
    "hideseek": {
        "distribution": {"variant": "v1", "d": 64, "rho": 0.1},
        "algorithms": [{"id": "full_info_argmax"}, {"id": "segment_scan", "params": {"segment_size": 16}}],
        "budgets": [2100],
        "trials": 200,
    },
    "sparsepca": {
        "distribution": {"variant": "sparse_pca", "d": 9, "rho": 0.25},
        "algorithms": [{"id": "pca_plugin"}, {"id": "pair_segment_scan", "params": {"counters": 16}}],
        "budgets": [10310],
        "trials": 100,
    },
    "regret": {"d": 32, "T": 20000, "c2": 5.9e-3, "trials": 50},
    "stochopt": {"distribution": {"variant": "matrix", "d": 32, "beta": 0.0}, "m": 10000, "trials": 100},
    "verify": {"scale": 1.0},
    "enumerate": {"d": 2, "rho": 0.1},
}

ALLOWED_ALGORITHMS = {
    "hideseek": {"full_info_argmax", "segment_scan", "oracle", "always_wrong"},
    "sparsepca": {"pca_plugin", "pair_segment_scan", "oracle", "always_wrong"},
}


def resolve_config(kind: str, user: dict | None = None, **overrides) -> dict:
    """Merge defaults, a user config and command-line overrides; validate."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    cfg = copy.deepcopy(DEFAULTS[kind])
    cfg.update({"schema_version": SCHEMA_VERSION, "kind": kind, "seed": 0, "threads": 1})
    if user:
        version = user.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        if user.get("kind", kind) != kind:
            raise ConfigError(f"config is for {user['kind']!r}, not {kind!r}")
        cfg.update(user)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    if "trials" in cfg and (not isinstance(cfg["trials"], int) or cfg["trials"] < 1):
        raise ConfigError("trials must be a positive integer")
    if not isinstance(cfg["seed"], int) or not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    for algo in cfg.get("algorithms", []):
        if algo.get("id") not in ALLOWED_ALGORITHMS.get(kind, set()):
            raise ConfigError(f"algorithm {algo.get('id')!r} is not available for {kind}")
    return cfg


def _detection_rows(cfg):
    spec = spec_from_dict(cfg["distribution"])
    rows = []
    threshold = cfg.get("threshold")
    for algo in cfg["algorithms"]:
        try:
            detector = make_detector(algo["id"], **algo.get("params", {}))
        except TypeError as exc:
            raise ConfigError(f"bad params for {algo['id']}: {exc}") from None
        if threshold:
            res = find_sample_threshold(
                detector, spec, threshold["target"], threshold["m_lo"], threshold["m_hi"],
                cfg["trials"], cfg["seed"], cfg["threads"],
            )
            probes = ";".join(f"{m}:{p!r}" for m, p in res.probes)
            rows.append((algo["id"], res.m_star, res.lo, res.hi, probes, len(res.violations)))
            continue
        for budget in cfg["budgets"]:
            est = estimate_success_prob(detector, spec, budget, cfg["trials"], cfg["seed"], cfg["threads"])
            rows.append((
                algo["id"], budget, est.successes, est.trials, est.p_hat, est.ci_low, est.ci_high,
                est.min_over_hidden, est.mean_over_hidden,
            ))
    if threshold:
        columns = ["algorithm", "m_star", "lo", "hi", "probes", "violations"]
    else:
        columns = ["algorithm", "budget", "successes", "trials", "p_hat", "ci_low", "ci_high",
                   "min_over_hidden", "mean_over_hidden"]
    return columns, rows, True


def _regret_rows(cfg):
    d, T = cfg["d"], cfg["T"]
    rho = cfg["rho"] if "rho" in cfg else appendix_rho(d, T, 1, cfg["c2"])
    summary = run_regret_experiment(d, T, rho, cfg["trials"], cfg["seed"], cfg.get("checkpoints"), cfg["threads"])
    rows = []
    for k, t in enumerate(summary.checkpoints):
        for name in ("hedge", "bandit"):
            c = summary.curves[name]
            rows.append((t, name, c["biased"][0][k], c["biased"][1][k], c["best"][0][k], c["best"][1][k]))
    columns = ["checkpoint", "learner", "mean_vs_biased", "se_vs_biased", "mean_vs_best", "se_vs_best"]
    return columns, rows, True


def _stochopt_rows(cfg):
    spec = spec_from_dict(cfg["distribution"])
    if not isinstance(spec, MatrixOptSpec):
        raise ConfigError("stochopt needs a 'matrix' distribution")
    m = cfg["m"]
    bound = 4 * math.sqrt(math.log(spec.d) / m)
    choices = hidden_values(spec)
    rows = []
    for trial in range(cfg["trials"]):
        rng = stream(cfg["seed"], trial)
        s = with_hidden(spec, choices[int(rng.integers(len(choices)))])
        res = stochopt_plugin(sample_opt_matrix_batch(s, rng, m), s.d, s)
        rows.append((trial, res.entry[0], res.entry[1], res.empirical_min, res.gap, res.deviation,
                     bound, res.gap <= bound))
    columns = ["trial", "i", "j", "empirical_min", "gap", "deviation", "bound", "within"]
    return columns, rows, True


def _verify_rows(cfg):
    suite = run_verify_suite(cfg["seed"], cfg.get("scale", 1.0))
    rows = [
        (c.check, c.case, c.quantity, c.bound, c.margin, c.holds)
        for summary in suite.values()
        for c in summary.cases
    ]
    passed = all(s.holds for s in suite.values())
    return ["check", "case", "quantity", "bound", "margin", "holds"], rows, passed


def _enumerate_rows(cfg):
    d, rho = cfg["d"], cfg["rho"]
    spec = ProtocolSpec(1, 1, 2)
    rows = []
    passed = True
    for pid, proto in enumerate(all_one_bit_two_round_protocols(d)):
        rep = transcript_kl_bound_check(proto, spec, "v1", d, rho)
        for j, value in enumerate(rep.per_j_kl):
            rows.append((pid, j, value, None, None))
        for name, bound in sorted(rep.rhs.items()):
            rows.append((pid, f"all:{name}", rep.lhs, bound, rep.margins[name]))
        passed &= rep.holds
    return ["protocol_id", "j", "kl_nats", "bound", "margin"], rows, passed


RUNNERS = {
    "hideseek": _detection_rows,
    "sparsepca": _detection_rows,
    "regret": _regret_rows,
    "stochopt": _stochopt_rows,
    "verify": _verify_rows,
    "enumerate": _enumerate_rows,
}


def run_experiment(cfg: dict) -> Report:
    with Timer() as timer:
        columns, rows, passed = RUNNERS[cfg["kind"]](cfg)
    return Report(cfg["kind"], columns, rows, cfg, timer.elapsed, passed)


__all__ = ["DETECTORS", "KINDS", "SCHEMA_VERSION", "resolve_config", "run_experiment"]
