"""Two-party key distribution sessions.

One cycle has two half-cycles. The initiator draws ``L`` fresh bits,
writes each on the basis picked by the last shared sequence, and sends the
quantized noisy positions. The responder removes the basis and decides each
bit. Both then take that sequence as the next basis material. Roles swap for
the second half-cycle. The starting key ``K0`` is used once and zeroized.

Each party keeps its own belief of the shared bits. Noise-induced
disagreements are not reconciled here; they are counted in the run
statistics, as is any resulting divergence of the basis material.

On the uniform wheel one basis consumes ``k_M`` bits, so ``L`` bits give
``floor(L/k_M)`` bases for ``L`` emissions; any leftover ``L mod k_M`` bits
do not select a basis. The basis sequence is reused cyclically within a
half-cycle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import channel
from .params import Encoding, ProtocolParams
from .phrg import EntropySource, NoiseModel, emit_indices, fresh_bits
from .wheel import basis_indices, decode_indices


class ProtocolError(RuntimeError):
    pass


class DesyncError(ProtocolError):
    def __init__(self, message: str, cycle: Optional[int] = None):
        super().__init__(message if cycle is None else f"cycle {cycle}: {message}")
        self.cycle = cycle


class Role(enum.Enum):
    INITIATOR = "initiator"
    RESPONDER = "responder"


@dataclass
class KeyBatch:
    """Bits shared in one half-cycle.

    ``bits`` is the sender's copy, ``received`` the receiver's decided copy
    (``None`` once a batch only exists on one side).
    """

    bits: np.ndarray
    received: Optional[np.ndarray] = None
    provenance: tuple = ()
    distilled: bool = False

    @property
    def disagreements(self) -> int:
        if self.received is None:
            return 0
        return int(np.count_nonzero(self.bits != self.received))

    def __len__(self):
        return int(self.bits.size)


@dataclass
class SessionState:
    role: Role
    params: ProtocolParams
    current_basis_bits: np.ndarray
    shared_batches: list = field(default_factory=list)
    cycle: int = 0
    half_cycles: int = 0
    k0_zeroized: bool = False

    @classmethod
    def start(cls, role: Role, params: ProtocolParams, k0) -> "SessionState":
        k0 = np.array(k0, dtype=np.uint8)
        if k0.size != params.L:
            raise ValueError(f"K0 has {k0.size} bits, expected L={params.L}")
        return cls(Role(role), params, k0)

    def _refresh(self, bits: np.ndarray) -> None:
        if not self.k0_zeroized:
            self.current_basis_bits.fill(0)  # K0 is never reused
            self.k0_zeroized = True
        self.current_basis_bits = np.array(bits, dtype=np.uint8)
        self.half_cycles += 1
        self.cycle = self.half_cycles // 2


def derive_bases(bits, params: ProtocolParams) -> np.ndarray:
    """Basis sequence from shared bits (identity for the sector)."""
    bits = np.asarray(bits, dtype=np.int64)
    if params.encoding is Encoding.SECTOR_M2:
        return bits.copy()
    return basis_indices(bits, params.k_M)


def emission_bases(bits, params: ProtocolParams) -> np.ndarray:
    """One basis per emitted bit, cycling the derived sequence to length L."""
    bits = np.asarray(bits)
    usable = bits.size - bits.size % params.k_M
    return np.resize(derive_bases(bits[:usable], params), params.L)


def send_half_cycle(state: SessionState, source: EntropySource,
                    model: NoiseModel) -> tuple[channel.SignalFrame, np.ndarray]:
    p = state.params
    r = fresh_bits(source, p.L)
    bases = emission_bases(state.current_basis_bits, p)
    frame = channel.SignalFrame.from_params(p, emit_indices(r, bases, p, model, source))
    state.shared_batches.append(KeyBatch(r.copy(), provenance=(state.half_cycles, "sent")))
    state._refresh(r)
    return frame, r


def receive_half_cycle(state: SessionState, frame: channel.SignalFrame) -> np.ndarray:
    p = state.params
    if frame.count != p.L:
        raise DesyncError(f"frame carries {frame.count} symbols, expected L={p.L}")
    if frame.encoding != p.encoding or frame.M != p.M or frame.delta_phi1 != p.delta_phi1:
        raise DesyncError("frame constellation does not match session parameters")
    bases = emission_bases(state.current_basis_bits, p)
    r = decode_indices(frame.positions, bases, p).astype(np.uint8)
    state.shared_batches.append(KeyBatch(r.copy(), provenance=(state.half_cycles, "received")))
    state._refresh(r)
    return r


@dataclass
class RunStats:
    rows: list = field(default_factory=list)
    tap: Optional[channel.Tap] = None

    @property
    def total_bits(self) -> int:
        return sum(r["L"] for r in self.rows)

    @property
    def total_errors(self) -> int:
        return sum(r["errors"] for r in self.rows)

    @property
    def disagreement_rate(self) -> float:
        return self.total_errors / self.total_bits if self.rows else 0.0

    FIELDS = ("cycle", "direction", "L", "errors", "ber", "basis_divergence",
              "bits_delivered", "basis_source", "tap_size")


def run_cycles(alice: SessionState, bob: SessionState, n_cycles: int, model: NoiseModel,
               sources: tuple[EntropySource, EntropySource],
               link=None) -> tuple[list[KeyBatch], RunStats]:
    """Run ``n_cycles`` full cycles (A->B then B->A) over a loopback link.

    Returns one :class:`KeyBatch` per half-cycle holding both parties'
    copies, and per-half-cycle statistics. A desynchronized frame aborts the
    run with a :class:`DesyncError` that names the cycle.
    """
    if alice.params != bob.params:
        raise ProtocolError("sessions were configured with different parameters")
    a_end, b_end, tap = link if link is not None else channel.loopback_pair(("A", "B"))
    stats = RunStats(tap=tap)
    batches = []
    delivered = 0
    source_label = "K0"
    parties = ((alice, a_end, sources[0]), (bob, b_end, sources[1]))
    for c in range(n_cycles):
        for half in (0, 1):
            (snd, snd_end, src), (rcv, rcv_end, _) = parties[half], parties[1 - half]
            divergence = float(np.mean(snd.current_basis_bits != rcv.current_basis_bits))
            frame, sent = send_half_cycle(snd, src, model)
            snd_end.send(frame)
            try:
                got = receive_half_cycle(rcv, rcv_end.recv())
            except DesyncError as exc:
                raise DesyncError(str(exc), cycle=c) from exc
            errors = int(np.count_nonzero(sent != got))
            delivered += sent.size
            direction = "A->B" if half == 0 else "B->A"
            batches.append(KeyBatch(sent, got, provenance=(c, direction)))
            stats.rows.append({
                "cycle": c, "direction": direction, "L": int(sent.size),
                "errors": errors, "ber": errors / sent.size,
                "basis_divergence": divergence, "bits_delivered": delivered,
                "basis_source": source_label, "tap_size": len(tap),
            })
            source_label = f"{direction}#{c}"
    return batches, stats


def pairwise_xor(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    n = bits.size - bits.size % 2
    return bits[0:n:2] ^ bits[1:n:2]


def privacy_amplify(batch: KeyBatch, ratio: float = 0.5,
                    compress: Callable[[np.ndarray], np.ndarray] = pairwise_xor) -> KeyBatch:
    """Shorten a batch by repeated compression passes.

    The default pass (XOR of disjoint pairs) is a non-normative placeholder
    that halves the length; it runs ``ceil(log2(1/ratio))`` times. Any
    deterministic ``compress`` can be plugged in. Both copies of the batch
    go through the same passes.
    """
    if not 0 < ratio < 1:
        raise ValueError("ratio must be in (0, 1)")
    passes = math.ceil(math.log2(1 / ratio) - 1e-12)
    if len(batch) < 2 ** passes:
        raise ValueError(f"batch of {len(batch)} bits too short for {passes} passes")
    bits, received = batch.bits, batch.received
    for _ in range(passes):
        bits = compress(bits)
        if received is not None:
            received = compress(received)
    return KeyBatch(bits, received, batch.provenance, distilled=True)
