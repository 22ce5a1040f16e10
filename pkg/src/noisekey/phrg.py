"""Simulated physical random generator.

Stands in for the optical bit source: it hands out fresh random bits and
attaches to each emitted symbol a phase deviate drawn from one of two
coherent-state noise models, then quantizes the noisy phase to the nearest
allowed position. Only the quantized position is kept.

``EntropySource.seeded`` exists so tests are reproducible. It is a
pseudo-random generator and gives none of the protection the protocol
derives from physical randomness.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .params import ProtocolParams, default_q, sigma_phi
from .quantum import single_state_phase_probs, phase_grid, fock_tail, TAIL_TOL, AccuracyError
from .wheel import (TWO_PI, PhasePoint, encode_indices, positions_for, quantize_indices,
                    wrap_signed)

__all__ = ["EntropySource", "EntropyUnavailableError", "NoiseKind", "NoiseModel",
           "fresh_bits", "sigma_phi", "sample_noise", "emit_signal", "emit_indices",
           "position_probabilities", "cell_bounds"]


class EntropyUnavailableError(OSError):
    pass


class EntropySource:
    """Owner of one random stream. Not shared between workers."""

    def __init__(self, seed: Optional[int] = None):
        self.seed = seed
        # Without a seed numpy draws its state from the OS entropy pool.
        self._rng = np.random.default_rng(seed)

    @classmethod
    def os(cls) -> "EntropySource":
        return cls(None)

    @classmethod
    def seeded(cls, seed: int) -> "EntropySource":
        return cls(int(seed))

    @property
    def is_test_generator(self) -> bool:
        return self.seed is not None

    def bits(self, count: int) -> np.ndarray:
        if self.seed is None:
            try:
                raw = os.urandom((count + 7) // 8)
            except (OSError, NotImplementedError) as exc:
                raise EntropyUnavailableError("OS entropy source unavailable") from exc
            return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:count]
        return self._rng.integers(0, 2, size=count, dtype=np.uint8)

    def normal(self, scale: float, size=None):
        return self._rng.normal(0.0, scale, size)

    def uniform(self, size=None):
        return self._rng.random(size)


def fresh_bits(source: EntropySource, count: int) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be >= 1")
    return source.bits(count)


class NoiseKind(enum.Enum):
    GAUSSIAN_APPROX = "gaussian"
    PEGG_BARNETT_EXACT = "pegg-barnett"


@dataclass(frozen=True)
class NoiseModel:
    """Phase-noise model attached to each emitted symbol.

    The Gaussian model uses width ``sigma_phi``. The exact model samples
    signed grid offsets ``offsets`` with probabilities ``probs``, the
    Pegg-Barnett phase distribution of a single coherent state at phase 0.
    """

    kind: NoiseKind
    sigma_phi: float = 0.0
    offsets: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None

    @classmethod
    def gaussian(cls, mean_photons: Optional[float] = None,
                 sigma: Optional[float] = None) -> "NoiseModel":
        if sigma is None:
            if mean_photons is None:
                raise ValueError("need mean_photons or sigma")
            sigma = sigma_phi(mean_photons)
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        return cls(NoiseKind.GAUSSIAN_APPROX, float(sigma))

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls.gaussian(sigma=0.0)

    @classmethod
    def pegg_barnett(cls, mean_photons: float, q: Optional[int] = None) -> "NoiseModel":
        q = default_q(mean_photons) if q is None else q
        alpha = math.sqrt(mean_photons)
        if fock_tail(alpha, q) > TAIL_TOL:
            raise AccuracyError(f"q={q} too small for <n>={mean_photons}")
        p = single_state_phase_probs(alpha, 0.0, q)
        p = p / p.sum()
        offsets = wrap_signed(phase_grid(q))
        order = np.argsort(offsets, kind="stable")
        offsets, p = offsets[order], p[order]
        std = math.sqrt(float(np.sum(p * offsets ** 2)))
        return cls(NoiseKind.PEGG_BARNETT_EXACT, std, offsets, p)

    @classmethod
    def for_params(cls, params: ProtocolParams, kind=NoiseKind.GAUSSIAN_APPROX) -> "NoiseModel":
        if NoiseKind(kind) is NoiseKind.GAUSSIAN_APPROX:
            return cls.gaussian(params.mean_photons)
        return cls.pegg_barnett(params.mean_photons, params.effective_q)

    @property
    def std(self) -> float:
        return self.sigma_phi


def sample_noise(model: NoiseModel, source: EntropySource, size=None):
    """Signed phase deviate(s) from the model; zero-mean by construction."""
    if model.kind is NoiseKind.GAUSSIAN_APPROX:
        if model.sigma_phi == 0:
            return 0.0 if size is None else np.zeros(size)
        return source.normal(model.sigma_phi, size)
    cdf = np.cumsum(model.probs)
    u = source.uniform(size) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    out = model.offsets[idx]
    return float(out) if size is None else out


def emit_indices(bits, bases, params: ProtocolParams, model: NoiseModel,
                 source: EntropySource) -> np.ndarray:
    """Quantized noisy position indices for arrays of bits and bases."""
    bits = np.asarray(bits)
    positions = positions_for(params)
    nominal = positions[encode_indices(bits, bases, params)]
    noisy = nominal + sample_noise(model, source, nominal.shape)
    return quantize_indices(noisy, positions).astype(np.uint16)


def emit_signal(r_cur: int, basis: int, params: ProtocolParams, model: NoiseModel,
                source: EntropySource) -> PhasePoint:
    """One recorded symbol: bit on its basis, plus noise, quantized.

    For the sector ``basis`` is the previous shared bit; on the wheel it is
    the basis index.
    """
    j = int(emit_indices([r_cur], [basis], params, model, source)[0])
    return PhasePoint(float(positions_for(params)[j]), True, j)


def cell_bounds(positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Quantization cell (lo, hi) of each position, hi - lo <= 2pi.

    Positions must be in ascending order within [0, 2pi).
    """
    nxt = np.append(positions[1:], positions[0] + TWO_PI)
    prv = np.insert(positions[:-1], 0, positions[-1] - TWO_PI)
    return 0.5 * (prv + positions), 0.5 * (positions + nxt)


def position_probabilities(nominal: float, params: ProtocolParams,
                           model: NoiseModel) -> np.ndarray:
    """Exact probability that a symbol at ``nominal`` is recorded at each position.

    Gaussian noise is integrated (wrapped around the circle) over each
    quantization cell; the discrete exact model is summed over its support.
    """
    positions = positions_for(params)
    if model.kind is NoiseKind.PEGG_BARNETT_EXACT:
        idx = quantize_indices(nominal + model.offsets, positions)
        return np.bincount(idx, weights=model.probs, minlength=positions.size) / model.probs.sum()
    s = model.sigma_phi
    if s == 0:
        out = np.zeros(positions.size)
        out[quantize_indices(nominal, positions)[0]] = 1.0
        return out
    lo, hi = cell_bounds(positions)
    wraps = np.arange(-(int(6 * s / TWO_PI) + 2), int(6 * s / TWO_PI) + 3)
    shift = (wraps * TWO_PI)[:, None]
    mass = ndtr((hi[None, :] - nominal + shift) / s) - ndtr((lo[None, :] - nominal + shift) / s)
    return mass.sum(axis=0)
