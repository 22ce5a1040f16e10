"""Protocol constants shared by every layer of the simulator."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional


# "sigma_phi >> delta_phi1" is read as at least one order of magnitude.
COVER_RATIO = 10.0


class Encoding(enum.IntEnum):
    """Phase constellation in use. Values are the on-wire encoding byte."""

    UNIFORM_WHEEL = 0
    SECTOR_M2 = 1


def sigma_phi(mean_photons: float) -> float:
    """Gaussian phase-noise width sqrt(2/<n>) of a coherent state."""
    if not mean_photons > 0:
        raise ValueError(f"mean photon number must be positive, got {mean_photons!r}")
    return math.sqrt(2.0 / mean_photons)


def default_q(mean_photons: float) -> int:
    """Fock truncation large enough to keep the Poisson tail negligible."""
    return max(300, math.ceil(mean_photons + 10.0 * math.sqrt(mean_photons)))


@dataclass(frozen=True)
class ProtocolParams:
    """Physical and protocol constants for one key-distribution session.

    ``delta_phi1`` is the basis separation. For the uniform wheel it is
    fixed by ``M`` (pi/M) and may be omitted. ``q`` is the Fock truncation
    used by the exact phase-noise model; ``None`` picks :func:`default_q`.

    Hard structural constraints raise ``ValueError``. The security window
    ``delta_phi1 < sigma_phi < pi/2`` is *not* enforced here, because
    deliberately insecure configurations are needed to exercise the
    attacker; see :meth:`security_warnings`.
    """

    encoding: Encoding = Encoding.SECTOR_M2
    M: int = 2
    delta_phi1: Optional[float] = None
    mean_photons: float = 25.0
    L: int = 4096
    q: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "encoding", Encoding(self.encoding))
        if self.M < 2 or self.M & (self.M - 1):
            raise ValueError(f"M must be a power of two >= 2, got {self.M}")
        if self.M > 32768:
            raise ValueError("M above 32768 does not fit 16-bit position indices")
        if self.encoding is Encoding.SECTOR_M2:
            if self.M != 2:
                raise ValueError("the sector constellation is defined for M=2 only")
            if self.delta_phi1 is None or not 0 < self.delta_phi1 < math.pi:
                raise ValueError("sector encoding needs 0 < delta_phi1 < pi")
        elif self.delta_phi1 is None:
            object.__setattr__(self, "delta_phi1", math.pi / self.M)
        if not self.mean_photons > 0:
            raise ValueError("mean_photons must be positive")
        if self.L < self.k_M:
            raise ValueError(f"L={self.L} must be at least k_M={self.k_M}")
        if self.q is not None and self.q < 1:
            raise ValueError("q must be >= 1")

    @property
    def k_M(self) -> int:
        return self.M.bit_length() - 1

    @property
    def sigma_phi(self) -> float:
        return sigma_phi(self.mean_photons)

    @property
    def effective_q(self) -> int:
        return self.q if self.q is not None else default_q(self.mean_photons)

    @property
    def n_positions(self) -> int:
        return 4 if self.encoding is Encoding.SECTOR_M2 else 2 * self.M

    def security_warnings(self) -> list[str]:
        """Human-readable violations of the noise-hiding window."""
        s = self.sigma_phi
        out = []
        if s >= math.pi / 2:
            out.append(
                f"sigma_phi={s:.4g} >= pi/2: the legitimate receiver can no longer "
                "separate bit 0 from bit 1 (need sigma_phi < pi/2)")
        if self.encoding is Encoding.SECTOR_M2:
            if self.delta_phi1 * COVER_RATIO > s:
                out.append(
                    f"delta_phi1={self.delta_phi1:.4g} is not << sigma_phi={s:.4g} (need "
                    f"sigma_phi >= {COVER_RATIO:g} x delta_phi1 so noise hides the basis)")
        elif math.pi / self.M >= s:
            out.append(
                f"wheel spacing pi/M={math.pi / self.M:.4g} >= sigma_phi={s:.4g}: noise "
                "does not cover neighbouring bases")
        return out
