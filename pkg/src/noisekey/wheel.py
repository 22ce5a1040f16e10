"""Mapping between bits, basis indices and phase positions.

Two constellations are supported:

* the uniform ciphering wheel with ``M`` bases, where basis ``k`` sits at
  ``pi*(k/M + (1 - (-1)**k)/2)`` and bit 1 is displaced by ``pi``;
* the ``M=2`` sector with positions ``(0, dphi, pi, pi + dphi)``.

Position indices are the integers that travel on the wire. On the wheel the
``2M`` positions are ``j*pi/M`` for ``j = 0..2M-1``; on the sector they are
numbered in ascending angle, ``0 -> 0``, ``1 -> dphi``, ``2 -> pi``,
``3 -> pi + dphi``.

Block-to-index conversion is big-endian: the first bit of a block carries
weight ``2**(k_M - 1)``. Peers must agree on this to interoperate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .params import Encoding, ProtocolParams

TWO_PI = 2.0 * math.pi

# Sector truth table, indexed [r_prev, r_cur] -> position index.
_SECTOR_INDEX = np.array([[0, 2], [3, 1]], dtype=np.int64)


@dataclass(frozen=True)
class PhasePoint:
    value: float
    quantized: bool = False
    index: Optional[int] = None


def wrap(phase):
    """Reduce phase(s) to [0, 2pi)."""
    r = np.mod(phase, TWO_PI)
    # np.mod can round a tiny negative input up to exactly 2pi
    r = np.where(r >= TWO_PI, 0.0, r)
    return float(r) if np.ndim(r) == 0 else r


def wrap_signed(phase):
    """Reduce phase(s) to (-pi, pi]."""
    r = wrap(phase)
    r = np.where(r > math.pi, r - TWO_PI, r)
    return float(r) if np.ndim(r) == 0 else r


def allowed_positions(encoding, M: int = 2, delta_phi1: float = 0.0) -> np.ndarray:
    encoding = Encoding(encoding)
    if encoding is Encoding.SECTOR_M2:
        return np.array([0.0, delta_phi1, math.pi, math.pi + delta_phi1])
    return np.arange(2 * M) * (math.pi / M)


def positions_for(params: ProtocolParams) -> np.ndarray:
    return allowed_positions(params.encoding, params.M, params.delta_phi1)


def basis_index(block: Sequence[int], k_M: Optional[int] = None) -> int:
    """Basis index of one block of ``k_M`` bits, first bit most significant."""
    block = [int(b) for b in block]
    if k_M is not None and len(block) != k_M:
        raise ValueError(f"block has {len(block)} bits, expected k_M={k_M}")
    if not block:
        raise ValueError("empty block")
    k = 0
    for b in block:
        if b not in (0, 1):
            raise ValueError(f"not a bit: {b!r}")
        k = (k << 1) | b
    return k


def basis_indices(bits, k_M: int) -> np.ndarray:
    """Vectorised :func:`basis_index` over consecutive blocks."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % k_M:
        raise ValueError(f"{bits.size} bits do not split into blocks of {k_M}")
    weights = 1 << np.arange(k_M - 1, -1, -1, dtype=np.int64)
    return bits.reshape(-1, k_M) @ weights


def wheel_phase(k: int, M: int) -> float:
    if not 0 <= k < M:
        raise ValueError(f"basis index {k} outside [0, {M})")
    return wrap(math.pi * (k / M + (1 - (-1) ** k) / 2))


def wheel_position_index(bit, k, M: int):
    """Position index of ``bit`` written on basis ``k`` (vectorised)."""
    k = np.asarray(k, dtype=np.int64)
    bit = np.asarray(bit, dtype=np.int64)
    j = (k + M * (k & 1) + M * bit) % (2 * M)
    return int(j) if j.ndim == 0 else j


def encode_mry(bit: int, k: int, M: int) -> PhasePoint:
    if bit not in (0, 1):
        raise ValueError(f"not a bit: {bit!r}")
    if not 0 <= k < M:
        raise ValueError(f"basis index {k} outside [0, {M})")
    j = wheel_position_index(bit, k, M)
    return PhasePoint(float(allowed_positions(Encoding.UNIFORM_WHEEL, M)[j]), True, j)


def sector_phase(r_prev: int, r_cur: int, delta_phi1: float) -> PhasePoint:
    """Sector position for bit ``r_cur`` on the basis selected by ``r_prev``."""
    if r_prev not in (0, 1) or r_cur not in (0, 1):
        raise ValueError("sector_phase takes two bits")
    value = ((1 - r_prev) * math.pi * ((1 - (-1) ** r_cur) / 2)
             + r_prev * (math.pi * ((1 + (-1) ** r_cur) / 2) + delta_phi1))
    return PhasePoint(value, True, int(_SECTOR_INDEX[r_prev, r_cur]))


def sector_position_index(r_prev, r_cur):
    idx = _SECTOR_INDEX[np.asarray(r_prev, dtype=np.int64), np.asarray(r_cur, dtype=np.int64)]
    return int(idx) if np.ndim(idx) == 0 else idx


def decode_sector(y_minus_basis, basis_bit):
    """Bit decision on a phase whose basis offset has already been removed.

    ``(-pi/2, pi/2]`` reads as 0, the opposite half as 1. On basis 1 the
    sector places bit 1 at ``dphi`` and bit 0 at ``pi + dphi``, so the
    reading is inverted. Works elementwise on arrays.
    """
    r = wrap_signed(y_minus_basis)
    near_zero = (r > -math.pi / 2) & (r <= math.pi / 2)
    bit = np.logical_not(near_zero).astype(np.int64) ^ np.asarray(basis_bit, dtype=np.int64)
    return int(bit) if bit.ndim == 0 else bit


def decode_wheel(index, k, M: int):
    """Bit decision on the wheel from position and basis indices.

    Done in integer arithmetic so offsets of exactly +-pi/2 resolve the same
    way on every platform: +pi/2 reads as 0, -pi/2 as 1.
    """
    d = (np.asarray(index, dtype=np.int64) - wheel_position_index(0, k, M)) % (2 * M)
    bit = np.logical_not((2 * d <= M) | (2 * d > 3 * M)).astype(np.int64)
    return int(bit) if bit.ndim == 0 else bit


def basis_offset(basis, params: ProtocolParams):
    if params.encoding is Encoding.SECTOR_M2:
        return np.asarray(basis, dtype=float) * params.delta_phi1
    return np.asarray(allowed_positions(Encoding.UNIFORM_WHEEL, params.M))[
        wheel_position_index(0, basis, params.M)]


def encode_indices(bits, bases, params: ProtocolParams) -> np.ndarray:
    """Noiseless position indices for arrays of bits and per-bit bases."""
    if params.encoding is Encoding.SECTOR_M2:
        return np.asarray(sector_position_index(bases, bits), dtype=np.int64)
    return np.asarray(wheel_position_index(bits, bases, params.M), dtype=np.int64)


def decode_indices(indices, bases, params: ProtocolParams) -> np.ndarray:
    """Legitimate-receiver bit decisions for position indices."""
    indices = np.asarray(indices, dtype=np.int64)
    if params.encoding is Encoding.SECTOR_M2:
        values = positions_for(params)[indices]
        bases = np.asarray(bases, dtype=np.int64)
        return np.asarray(decode_sector(values - bases * params.delta_phi1, bases))
    return np.asarray(decode_wheel(indices, bases, params.M))


def quantize_indices(raw, positions: np.ndarray, chunk: int = 1 << 16) -> np.ndarray:
    """Index of the circularly nearest position; ties go to the lower index."""
    raw = np.atleast_1d(np.asarray(raw, dtype=float))
    if not np.all(np.isfinite(raw)):
        raise ValueError("cannot quantize a non-finite phase")
    out = np.empty(raw.shape, dtype=np.int64)
    flat_in, flat_out = raw.ravel(), out.ravel()
    for start in range(0, flat_in.size, chunk):
        x = flat_in[start:start + chunk]
        d = np.abs(np.mod(x[:, None] - positions[None, :], TWO_PI))
        d = np.minimum(d, TWO_PI - d)
        flat_out[start:start + chunk] = np.argmin(d, axis=1)
    return out


def quantize(raw: float, encoding, M: int = 2, delta_phi1: float = 0.0) -> PhasePoint:
    positions = allowed_positions(encoding, M, delta_phi1)
    j = int(quantize_indices(raw, positions)[0])
    return PhasePoint(float(positions[j]), True, j)
