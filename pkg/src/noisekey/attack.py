"""Eavesdropper models working on the tapped, quantized positions.

The attacker knows the constellation, the mean photon number and the noise
model. The only thing withheld is the basis sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from .params import Encoding, ProtocolParams
from .phrg import NoiseModel, position_probabilities
from .wheel import (PhasePoint, allowed_positions, decode_sector, positions_for,
                    quantize_indices)


@dataclass(frozen=True)
class AttackResult:
    trials: int
    successes: int
    success_rate: float
    wilson_interval: tuple[float, float]

    @property
    def defined(self) -> bool:
        return self.trials > 0

    @classmethod
    def from_counts(cls, successes: int, trials: int, confidence: float = 0.99):
        if trials == 0:
            return cls(0, 0, float("nan"), (0.0, 1.0))
        ci = binomtest(successes, trials).proportion_ci(confidence, method="wilson")
        return cls(trials, successes, successes / trials, (float(ci.low), float(ci.high)))


@dataclass(frozen=True)
class ComplexityEstimate:
    k0_bits: int
    n_sigma: int
    log2_combinations: float
    rounded: bool = False


def hypotheses(params: ProtocolParams) -> tuple[np.ndarray, np.ndarray]:
    """(nominal phase, bit) for every (basis, bit) pair, uniform prior."""
    pos = positions_for(params)
    if params.encoding is Encoding.SECTOR_M2:
        # (basis, bit) -> index: (0,0)->0 (0,1)->2 (1,0)->3 (1,1)->1
        idx, bits = np.array([0, 2, 3, 1]), np.array([0, 1, 0, 1])
    else:
        k = np.repeat(np.arange(params.M), 2)
        bits = np.tile([0, 1], params.M)
        idx = (k + params.M * (k & 1) + params.M * bits) % (2 * params.M)
    return pos[idx], bits


def likelihood_table(params: ProtocolParams, model: NoiseModel) -> tuple[np.ndarray, np.ndarray]:
    """P(recorded position | hypothesis), shape (n_hypotheses, n_positions)."""
    nominal, bits = hypotheses(params)
    table = np.stack([position_probabilities(x, params, model) for x in nominal])
    return table, bits


def guess_table(params: ProtocolParams, model: NoiseModel) -> np.ndarray:
    """Maximum-posterior bit for every position; ties resolve to 0."""
    table, bits = likelihood_table(params, model)
    p1 = table[bits == 1].sum(axis=0)
    p0 = table[bits == 0].sum(axis=0)
    return (p1 > p0).astype(np.uint8)


def bayes_success_probability(params: ProtocolParams, model: NoiseModel) -> float:
    """Expected success rate of the guesser when data follow ``model``."""
    table, bits = likelihood_table(params, model)
    prior = 1.0 / table.shape[0]
    guesses = guess_table(params, model)
    return float(prior * sum(table[h, bits[h] == guesses].sum() for h in range(table.shape[0])))


def posterior_odds(position: PhasePoint, params: ProtocolParams, model: NoiseModel) -> float:
    """P(bit=1 | position) / P(bit=0 | position)."""
    table, bits = likelihood_table(params, model)
    j = _position_index(position, params)
    return float(table[bits == 1, j].sum() / table[bits == 0, j].sum())


def _position_index(position, params: ProtocolParams) -> int:
    if isinstance(position, PhasePoint):
        if position.index is not None:
            return position.index
        position = position.value
    return int(quantize_indices(position, positions_for(params))[0])


def bayes_guess(position, params: ProtocolParams, model: NoiseModel) -> int:
    return int(guess_table(params, model)[_position_index(position, params)])


def run_guessing_attack(frames: Sequence, truth, params: ProtocolParams, model: NoiseModel,
                        attacker_model: Optional[NoiseModel] = None,
                        confidence: float = 0.99) -> AttackResult:
    """Score per-symbol Bayes guesses against the true bits.

    ``attacker_model`` lets the attacker assume a noise model different from
    the one that produced the data; by default it is the true model.
    """
    truth = np.asarray(truth, dtype=np.uint8).ravel()
    if not frames:
        if truth.size:
            raise ValueError("truth given for an empty capture")
        return AttackResult.from_counts(0, 0, confidence)
    positions = np.concatenate([np.asarray(f.positions, dtype=np.int64) for f in frames])
    if positions.size != truth.size:
        raise ValueError(f"{positions.size} captured symbols vs {truth.size} truth bits")
    guesses = guess_table(params, attacker_model or model)[positions]
    return AttackResult.from_counts(int(np.count_nonzero(guesses == truth)), int(truth.size),
                                    confidence)


@dataclass(frozen=True)
class XorDemoResult:
    pairs: int
    ones: int
    entropy: float

    @property
    def rate(self) -> float:
        return self.ones / self.pairs if self.pairs else float("nan")


def binary_entropy(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def hard_decisions(frame) -> np.ndarray:
    """Basis-blind half-plane reading of each position: near 0 -> 0, near pi -> 1."""
    pos = allowed_positions(frame.encoding, frame.M, frame.delta_phi1)
    return decode_sector(pos[np.asarray(frame.positions, dtype=np.int64)], 0).astype(np.uint8)


def xor_correlation_demo(frames: Sequence) -> XorDemoResult:
    """Entropy of the XOR of hard decisions across repeated emissions.

    ``frames`` must carry the same plaintext on the same bases. They are
    paired as (0, 1), (2, 3), ...; each pair contributes one XOR symbol per
    position. Without noise every XOR is 0.
    """
    if len(frames) < 2:
        raise ValueError("need at least two frames carrying the same bits")
    streams = []
    for a, b in zip(frames[0::2], frames[1::2]):
        if a.count != b.count:
            raise ValueError("paired frames differ in length")
        streams.append(hard_decisions(a) ^ hard_decisions(b))
    x = np.concatenate(streams)
    ones = int(x.sum())
    return XorDemoResult(int(x.size), ones, binary_entropy(ones / x.size))


def brute_force_complexity(k0_bits: int, n_sigma: int) -> ComplexityEstimate:
    """log2 of 2**K0 * (log2 N)! * N, computed without forming C."""
    if k0_bits < 0 or n_sigma < 1:
        raise ValueError("need k0_bits >= 0 and n_sigma >= 1")
    b = n_sigma.bit_length() - 1
    rounded = n_sigma != 1 << b
    if rounded:
        b += 1
    log2c = k0_bits + math.log2(math.factorial(b)) + math.log2(n_sigma)
    return ComplexityEstimate(k0_bits, n_sigma, log2c, rounded)


def estimate_n_sigma(params: ProtocolParams, width: float = 2.0) -> int:
    """Levels within +-width*sigma_phi of a level, the level itself included.

    Levels are the basis phases that share a half-plane: the sector has two
    (0 and dphi); the wheel has its 2M positions spaced pi/M apart.
    """
    reach = width * params.sigma_phi
    if params.encoding is Encoding.SECTOR_M2:
        return 2 if params.delta_phi1 <= reach else 1
    spacing = math.pi / params.M
    return int(min(2 * params.M, 1 + 2 * math.floor(reach / spacing)))
