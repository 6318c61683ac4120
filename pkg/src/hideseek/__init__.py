"""Simulation of information-constrained estimation protocols.

Hide-and-seek distribution families, a (b, n, m) protocol runtime with exact
transcript enumeration, constrained and unconstrained detectors, an exact
discrete information-theory toolkit, and a reproducible Monte Carlo harness.
"""

__version__ = "0.1.0"

from .errors import HideSeekError  # noqa: E402
from .protocol import Message, Protocol, ProtocolSpec, Transcript, run_protocol  # noqa: E402

__all__ = ["HideSeekError", "Message", "Protocol", "ProtocolSpec", "Transcript", "run_protocol", "__version__"]
