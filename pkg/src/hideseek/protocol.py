"""Runtime for (b, n, m) protocols.

A protocol sees ``m`` consecutive batches of ``n`` instances. After each batch
it emits a message of at most ``b`` bits, which may depend on the batch and on
every earlier message. A final, unbudgeted output is computed from the
messages alone. The runtime enforces the bit budget on every message.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .distributions import HideSeekV1Spec, HideSeekV2Spec, instance_alphabet
from .errors import (
    BudgetExceeded,
    EnumerationTooLarge,
    InsufficientData,
    InvalidReduction,
    RhoOutOfRange,
)
from .infotheory import kl

DEFAULT_ENUMERATION_CAP = 2**24


@dataclass(frozen=True)
class ProtocolSpec:
    b: int
    n: int
    m: int

    def __post_init__(self):
        for name in ("b", "n", "m"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")


@dataclass(frozen=True)
class Message:
    """An explicit bit string. Hashable, so it can key exact pmfs."""

    bits: tuple[int, ...] = ()

    def __post_init__(self):
        if any(bit not in (0, 1) for bit in self.bits):
            raise ValueError("message bits must be 0 or 1")

    def __len__(self) -> int:
        return len(self.bits)

    @classmethod
    def from_int(cls, value: int, width: int) -> "Message":
        if value < 0 or value >> width:
            raise ValueError(f"{value} does not fit in {width} bits")
        return cls(tuple((value >> (width - 1 - k)) & 1 for k in range(width)))

    def to_int(self) -> int:
        out = 0
        for bit in self.bits:
            out = (out << 1) | bit
        return out

    def hex(self) -> str:
        if not self.bits:
            return ""
        return format(self.to_int(), "0{}x".format((len(self.bits) + 3) // 4))

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


EMPTY = Message()


@dataclass(frozen=True)
class Transcript:
    messages: tuple[Message, ...]
    final_output: Any = None

    def to_json(self) -> str:
        rounds = [
            {"round": t + 1, "length": len(msg), "hex": msg.hex()}
            for t, msg in enumerate(self.messages)
        ]
        output = self.final_output
        if isinstance(output, np.generic):
            output = output.item()
        return json.dumps({"messages": rounds, "final_output": output})

    @classmethod
    def from_json(cls, text: str) -> "Transcript":
        data = json.loads(text)
        msgs = []
        for item in data["messages"]:
            value = int(item["hex"], 16) if item["hex"] else 0
            msgs.append(Message.from_int(value, item["length"]))
        output = data["final_output"]
        if isinstance(output, list):
            output = tuple(output)
        return cls(tuple(msgs), output)


class Protocol:
    """Base class for protocols.

    Subclasses implement :meth:`step` (the per-round message function) and
    :meth:`finish` (the final output function). ``reset`` is called once at
    the start of every run with the protocol parameters and a random stream.
    """

    deterministic = True

    def reset(self, spec: ProtocolSpec, rng: Optional[np.random.Generator] = None) -> None:
        pass

    def step(self, batch, history: Sequence[Message]) -> Message:
        raise NotImplementedError

    def finish(self, history: Sequence[Message]) -> Any:
        return None


class OnlineProtocol(Protocol):
    """A b-memory streaming algorithm whose state *is* its message.

    :meth:`update` maps (instance, previous state) to the new state. The
    previous state is ``None`` before the first instance.
    """

    def update(self, x, state: Optional[Message]) -> Message:
        raise NotImplementedError

    def decode(self, state: Optional[Message]) -> Any:
        raise NotImplementedError

    def step(self, batch, history: Sequence[Message]) -> Message:
        state = history[-1] if history else None
        for x in batch:
            state = self.update(x, state)
        return state

    def finish(self, history: Sequence[Message]) -> Any:
        return self.decode(history[-1] if history else None)


class _BatchedOnline(Protocol):
    def __init__(self, online: OnlineProtocol, kappa: int):
        self.online = online
        self.kappa = kappa
        self.deterministic = online.deterministic

    def reset(self, spec, rng=None):
        self.online.reset(spec, rng)
        self._budget = spec.b

    def step(self, batch, history):
        state = history[-1] if history else None
        for x in batch:
            state = self.online.update(x, state)
            if len(state) > self._budget:
                # intermediate states are memory too
                raise BudgetExceeded(len(history) + 1, len(state), self._budget)
        return state

    def finish(self, history):
        return self.online.finish(history)


def batch_online(online: OnlineProtocol, kappa: int, m: int, b: int):
    """View a b-memory online protocol over ``m`` instances as a batched one.

    Returns ``(protocol, spec)`` with ``spec = (b, kappa, m // kappa)``.
    Trailing ``m % kappa`` instances are never delivered.
    """
    if not 1 <= kappa <= m:
        raise InvalidReduction(f"kappa must lie in [1, m={m}], got {kappa}")
    return _BatchedOnline(online, kappa), ProtocolSpec(b, kappa, m // kappa)


def _batches(source, n: int, m: int) -> Iterable:
    if isinstance(source, np.ndarray) or (
        isinstance(source, Sequence) and not isinstance(source, (str, bytes))
    ):
        if len(source) < n * m:
            raise InsufficientData(f"need {n * m} instances, source has {len(source)}")
        for t in range(m):
            yield source[t * n:(t + 1) * n]
        return
    it = iter(source)
    for t in range(m):
        batch = list(itertools.islice(it, n))
        if len(batch) < n:
            raise InsufficientData(f"stream exhausted in round {t + 1}")
        yield batch


def run_protocol(
    protocol: Protocol,
    spec: ProtocolSpec,
    source,
    rng: Optional[np.random.Generator] = None,
) -> Transcript:
    """Run ``protocol`` on ``spec.m`` consecutive batches of ``spec.n`` instances.

    ``source`` is either an indexable sequence/array (sliced) or any iterable
    (consumed lazily).

    Raises
    ------
    BudgetExceeded
        If a message is longer than ``spec.b`` bits.
    InsufficientData
        If fewer than ``n * m`` instances are available.
    """
    protocol.reset(spec, rng)
    history: list[Message] = []
    for t, batch in enumerate(_batches(source, spec.n, spec.m), start=1):
        msg = protocol.step(batch, history)
        if not isinstance(msg, Message):
            raise TypeError(f"round {t}: step must return a Message, got {type(msg).__name__}")
        if len(msg) > spec.b:
            raise BudgetExceeded(t, len(msg), spec.b)
        history.append(msg)
    return Transcript(tuple(history), protocol.finish(history))


# -- exact enumeration ---------------------------------------------------------


def enumerate_transcripts(
    protocol: Protocol,
    spec: ProtocolSpec,
    dist,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> dict[tuple[Message, ...], float]:
    """Exact pmf of the message sequence of a deterministic protocol.

    ``step`` must be a pure function of ``(batch, history)``. Histories are
    merged round by round, so the work is (number of distinct message
    prefixes) x (alphabet size)^n per round; that product is what ``cap``
    bounds.
    """
    if not getattr(protocol, "deterministic", True):
        raise ValueError("enumeration supports deterministic protocols only")
    xs, probs = instance_alphabet(dist)
    k = len(xs)
    per_round = k**spec.n
    if per_round > cap:
        raise EnumerationTooLarge(f"{k}^{spec.n} batches per round exceeds cap {cap}")

    batch_index = list(itertools.product(range(k), repeat=spec.n))
    batch_probs = [math.prod(probs[i] for i in idx) for idx in batch_index]
    batches = [xs[list(idx)] for idx in batch_index]

    protocol.reset(spec, None)
    layer: dict[tuple[Message, ...], float] = {(): 1.0}
    for t in range(spec.m):
        if len(layer) * per_round > cap:
            raise EnumerationTooLarge(
                f"round {t + 1}: {len(layer)} prefixes x {per_round} batches exceeds cap {cap}"
            )
        nxt: dict[tuple[Message, ...], float] = {}
        for prefix, p_prefix in layer.items():
            for batch, p_batch in zip(batches, batch_probs):
                if p_batch == 0.0:
                    continue
                msg = protocol.step(batch, list(prefix))
                if len(msg) > spec.b:
                    raise BudgetExceeded(t + 1, len(msg), spec.b)
                key = prefix + (msg,)
                nxt[key] = nxt.get(key, 0.0) + p_prefix * p_batch
        layer = nxt
    total = math.fsum(layer.values())
    if abs(total - 1.0) > 1e-12:
        raise AssertionError(f"transcript pmf sums to {total!r}")
    return layer


class TableProtocol(Protocol):
    """Deterministic protocol given by explicit lookup tables.

    ``tables[t]`` maps ``(instance bytes, previous message ints)`` keys to a
    message integer of width ``width``; used for exhaustive protocol sweeps.
    """

    def __init__(self, tables, width: int = 1):
        self.tables = tables
        self.width = width

    def step(self, batch, history):
        key = (tuple(np.asarray(batch).ravel().tolist()), tuple(m.to_int() for m in history))
        return Message.from_int(self.tables[len(history)][key], self.width)


def all_one_bit_two_round_protocols(d: int = 2):
    """Every deterministic (1, 1, 2) protocol on {-1,+1}^d instances.

    Round 1 is any map from the 2^d instances to a bit; round 2 is any map
    from (instance, first bit) to a bit: 2^(2^d) * 2^(2^(d+1)) protocols
    (4096 for d = 2).
    """
    xs = [tuple(x) for x in itertools.product((-1, 1), repeat=d)]
    keys1 = [(x, ()) for x in xs]
    keys2 = [(x, (w,)) for x in xs for w in (0, 1)]
    for bits1 in itertools.product((0, 1), repeat=len(keys1)):
        t1 = dict(zip(keys1, bits1))
        for bits2 in itertools.product((0, 1), repeat=len(keys2)):
            yield TableProtocol([t1, dict(zip(keys2, bits2))])


class _ConstantProtocol(Protocol):
    def step(self, batch, history):
        return Message((0,))


class CoordinateSignProtocol(Protocol):
    """Emit 1 iff coordinate ``coord`` of the first instance of the batch is positive."""

    def __init__(self, coord: int = 0):
        self.coord = coord

    def step(self, batch, history):
        return Message((int(np.asarray(batch[0]).ravel()[self.coord] > 0),))

    def finish(self, history):
        return tuple(m.bits[0] for m in history)


def constant_protocol() -> Protocol:
    """A protocol whose messages ignore the data."""
    return _ConstantProtocol()


# -- transcript KL bounds ------------------------------------------------------


@dataclass(frozen=True)
class KLBoundReport:
    lhs: float
    per_j_kl: tuple[float, ...]
    rhs: dict
    margins: dict
    holds: bool


def transcript_kl(p0: dict, pj: dict) -> float:
    """KL (nats) between two enumerated transcript pmfs."""
    keys = list(set(p0) | set(pj))
    a = np.array([p0.get(k, 0.0) for k in keys])
    b = np.array([pj.get(k, 0.0) for k in keys])
    return kl(a, b, base="nats")


def kl_bound_rhs(family: str, spec: ProtocolSpec, d: int, rho: float) -> dict:
    """Right-hand sides of the transcript-KL bounds applicable to ``family``.

    Raises :class:`RhoOutOfRange` when ``rho`` is outside the range under
    which the bounds are proved.
    """
    b, n, m = spec.b, spec.n, spec.m
    if family == "v1":
        if not 0 <= rho <= 1 / (4 * n):
            raise RhoOutOfRange(f"rho={rho} exceeds 1/(4n)={1 / (4 * n)}")
        return {
            "11ppr0": 51 * m * n * 2**n * rho**2 * b / d,
            "ppr0": min(60 * m * n * rho * b / d, 6 * m * n * rho**2),
        }
    if family == "v2":
        if d < 2:
            raise RhoOutOfRange("the sparse-family bound needs d > 1")
        limit = min(1 / 27, 1 / (9 * math.log(d)), d / (14 * n))
        if not 0 <= rho <= limit:
            raise RhoOutOfRange(f"rho={rho} exceeds {limit}")
        return {"2ppr0": 26 * m * b / d}
    raise ValueError(f"family must be 'v1' or 'v2', got {family!r}")


def transcript_kl_bound_check(
    protocol: Protocol,
    spec: ProtocolSpec,
    family: str,
    d: int,
    rho: float,
    cap: int = DEFAULT_ENUMERATION_CAP,
    tol: float = 1e-9,
) -> KLBoundReport:
    """Compare (2/d) sum_j KL(P_0(W) || P_j(W)) with the proof-level bounds."""
    rhs = kl_bound_rhs(family, spec, d, rho)
    cls = HideSeekV1Spec if family == "v1" else HideSeekV2Spec
    p0 = enumerate_transcripts(protocol, spec, cls(d, rho, None), cap)
    per_j = tuple(
        transcript_kl(p0, enumerate_transcripts(protocol, spec, cls(d, rho, j), cap))
        for j in range(d)
    )
    lhs = 2.0 / d * math.fsum(per_j)
    margins = {name: value - lhs for name, value in rhs.items()}
    return KLBoundReport(
        lhs=lhs,
        per_j_kl=per_j,
        rhs=rhs,
        margins=margins,
        holds=all(margin >= -tol for margin in margins.values()),
    )
