r"""Quantum-statistical analysis of the four-state sector constellation.

The sender emits one of four coherent states
:math:`|\alpha e^{i\phi_i}\rangle`, :math:`\phi_i \in (0, \Delta\phi_1, \pi,
\pi+\Delta\phi_1)`, each with probability 1/4. This module builds the
corresponding density matrix, diagonalizes it (closed form and numerically),
and evaluates the Von Neumann entropy, the Pegg-Barnett phase distribution
and the phase signal-to-noise ratio seen by an eavesdropper.

Notes
-----
Matrix elements are expressed in the non-orthogonal basis of the four
coherent states, ``entries[i, k] = w * <phi_i|phi_k>`` with ``w = 1/4``. The
nonzero spectrum of the mixture equals the spectrum of ``w * G`` for the
Gram matrix ``G``; the numeric path obtains it by canonical
orthonormalization of the four-state span so that it does not rely on the
perturbative expansion used by :func:`eigensystem_analytic`.

Fock-space sums are evaluated in log space (``log c_n = -<n>/2 + n log|a| -
lgamma(n+1)/2``), so no factorial is ever formed. On the uniform grid
``phi_dm = 2 pi m/(q+1)`` the sum over ``n`` is a discrete Fourier transform
and is carried out with ``numpy.fft``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, special, stats

from .params import default_q
from .wheel import TWO_PI, wrap_signed

ORTHO_TOL = 1e-12
TAIL_TOL = 1e-8


class AccuracyError(ValueError):
    """Truncation too small for the requested amplitude."""


class SingularityError(ZeroDivisionError):
    """A ratio was requested whose denominator vanishes."""


class MatrixForm(enum.Enum):
    EXACT_OVERLAP = "exact"
    FIRST_ORDER = "first_order"


def sech(x):
    x = np.abs(np.asarray(x, dtype=float))
    e = np.exp(-x)
    return 2.0 * e / (1.0 + e * e)


def constellation(delta_phi1: float) -> np.ndarray:
    return np.array([0.0, delta_phi1, math.pi, math.pi + delta_phi1])


def coherent_overlap(alpha: float, phi_i: float, phi_k: float) -> complex:
    """<alpha e^{i phi_i} | alpha e^{i phi_k}> for real alpha >= 0."""
    n = alpha * alpha
    return complex(np.exp(-n * (1.0 - np.exp(1j * (phi_k - phi_i)))))


@dataclass
class DensityMatrix:
    entries: np.ndarray
    alpha: float
    delta_phi1: float
    form: MatrixForm
    weights: np.ndarray = field(default_factory=lambda: np.full(4, 0.25))

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.conj().T)) <= tol)


def density_matrix_exact(alpha: float, delta_phi1: float) -> DensityMatrix:
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    phis = constellation(delta_phi1)
    diff = phis[None, :] - phis[:, None]
    gram = np.exp(-alpha * alpha * (1.0 - np.exp(1j * diff)))
    np.fill_diagonal(gram, 1.0)
    return DensityMatrix(0.25 * gram, alpha, delta_phi1, MatrixForm.EXACT_OVERLAP)


def density_matrix_first_order(alpha: float, delta_phi1: float) -> DensityMatrix:
    """Matrix elements to first order in ``delta_phi1``, as published.

    Near pairs ``(0, dphi)`` and ``(pi, pi+dphi)`` carry
    ``1 +- i|a|^2 dphi tanh(2|a|^2)``; every other off-diagonal element is
    ``sech(2|a|^2)``. The exact-overlap form is the reference; this one is
    kept for comparison with the closed-form eigenvalues.
    """
    if delta_phi1 > 0.1:
        warnings.warn(f"first-order expansion used at delta_phi1={delta_phi1} > 0.1 rad",
                      stacklevel=2)
    n = alpha * alpha
    s = float(sech(2 * n))
    eps = n * delta_phi1 * math.tanh(2 * n)
    m = np.full((4, 4), s, dtype=complex)
    np.fill_diagonal(m, 1.0)
    m[0, 1] = m[2, 3] = 1 + 1j * eps
    m[1, 0] = m[3, 2] = 1 - 1j * eps
    return DensityMatrix(0.25 * m, alpha, delta_phi1, MatrixForm.FIRST_ORDER)


@dataclass
class EigenSystem:
    """Eigenvalues and coefficient vectors over the four coherent states.

    ``eigenvectors[:, j]`` holds the coefficients of eigenstate ``j``.
    ``phi_C``, ``phi_T`` and ``normalizer`` are only set by the closed form.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    phi_C: Optional[float] = None
    phi_T: Optional[float] = None
    normalizer: Optional[float] = None
    residuals: Optional[np.ndarray] = None


def analytic_eigenvalues(alpha) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form (lambda_2, lambda_4), vectorised over alpha.

    ``lambda_2 = sech(2n) sinh(n)**2`` equals ``(1 - sech(2n))/2``; the
    product form is used below n=1 where the difference would cancel.
    """
    n = np.asarray(alpha, dtype=float) ** 2
    s = sech(2 * n)
    small = n < 1.0
    with np.errstate(over="ignore"):
        lam2 = np.where(small, s * np.sinh(np.minimum(n, 1.0)) ** 2, 0.5 * (1.0 - s))
    lam4 = 0.5 * (1.0 + s)
    return lam2, lam4


def eigensystem_analytic(alpha: float, delta_phi1: float) -> EigenSystem:
    if not alpha > 0:
        raise ValueError("closed-form eigensystem is degenerate at alpha=0 (normalizer vanishes)")
    n = alpha * alpha
    lam2, lam4 = (float(x) for x in analytic_eigenvalues(alpha))
    phi_c = math.atan(n * delta_phi1 / math.tanh(n))
    phi_t = math.atan(n * delta_phi1 * math.tanh(n))
    norm = 2.0 * math.sqrt(2.0 * -math.expm1(-n))
    ec, et = np.exp(1j * phi_c), np.exp(1j * phi_t)
    vecs = np.array([
        [ec, -1, -ec, 1],
        [-ec, -1, ec, 1],
        [-et, 1, -et, 1],
        [et, 1, et, 1],
    ], dtype=complex).T / norm
    return EigenSystem(np.array([0.0, lam2, 0.0, lam4]), vecs, phi_c, phi_t, norm)


def eigensystem_numeric(dm: DensityMatrix, tol: float = ORTHO_TOL) -> EigenSystem:
    """Numerical spectrum of the four-state mixture, sorted descending.

    For the exact-overlap form the four coherent states are orthonormalized
    (directions with Gram eigenvalue below ``tol`` are dropped) and the
    mixture is diagonalized in that basis. The first-order form is not a
    valid Gram structure, so its printed elements are diagonalized directly.
    Residuals ``|R v - lambda v|`` are reported in the representation used.
    """
    if not dm.is_hermitian():
        raise ValueError("density matrix is not Hermitian")
    if dm.form is MatrixForm.FIRST_ORDER:
        vals, vecs = np.linalg.eigh(dm.entries)
        order = np.argsort(vals)[::-1]
        vals, vecs = vals[order], vecs[:, order]
        res = np.linalg.norm(dm.entries @ vecs - vecs * vals, axis=0)
        return EigenSystem(vals, vecs, residuals=res)

    w = dm.weights
    gram = dm.entries / np.sqrt(np.outer(w, w))
    s, u = np.linalg.eigh(gram)
    keep = s > tol
    s_k, u_k = s[keep], u[:, keep]
    root = np.sqrt(s_k)
    # representation of sum_i w_i |phi_i><phi_i| in the basis A U S^-1/2
    rep = (root[:, None] * (u_k.conj().T @ np.diag(w) @ u_k)) * root[None, :]
    rep = 0.5 * (rep + rep.conj().T)
    vals, v = np.linalg.eigh(rep)
    res = np.linalg.norm(rep @ v - v * vals, axis=0)
    coeffs = u_k @ (v / root[:, None])
    dim = len(w)
    pad = dim - vals.size
    vals = np.concatenate([vals, np.zeros(pad)])
    coeffs = np.concatenate([coeffs, np.zeros((dim, pad), dtype=complex)], axis=1)
    res = np.concatenate([res, np.zeros(pad)])
    order = np.argsort(vals)[::-1]
    return EigenSystem(vals[order], coeffs[:, order], residuals=res[order])


def von_neumann_entropy(es) -> float:
    """-sum(l log2 l) in bits, with 0 log 0 = 0.

    Accepts an :class:`EigenSystem` or a plain sequence of eigenvalues.
    Eigenvalues within 1e-12 below zero are clipped; anything more negative
    is rejected.
    """
    lam = np.asarray(es.eigenvalues if isinstance(es, EigenSystem) else es, dtype=float)
    if np.any(lam < -1e-12) or np.any(lam > 1 + 1e-12):
        raise ValueError("eigenvalues must lie in [0, 1]")
    lam = lam[lam > 0]
    return float(-np.sum(lam * np.log2(lam))) + 0.0


def entropy_analytic(alpha) -> np.ndarray:
    """H(alpha) from the closed-form eigenvalues; alpha=0 is the rank-1 limit."""
    lam2, lam4 = analytic_eigenvalues(alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(special.xlogy(lam2, lam2) + special.xlogy(lam4, lam4)) / math.log(2)
    return np.where(np.asarray(alpha) == 0, 0.0, h)


def entropy_numeric(alpha: float, delta_phi1: float) -> float:
    return von_neumann_entropy(eigensystem_numeric(density_matrix_exact(alpha, delta_phi1)))


# -- Pegg-Barnett phase distribution -----------------------------------------

@dataclass
class PhaseDistribution:
    """Phase probabilities on the grid ``phi_dm = 2 pi m/(q+1)``.

    ``components[i]`` is the contribution of the ``i``-th modulation angle
    (already multiplied by its weight); ``values`` is their sum.
    """

    values: np.ndarray
    q: int
    grid: np.ndarray
    components: Optional[np.ndarray] = None
    phases: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None

    @property
    def total(self) -> float:
        return float(self.values.sum())


def phase_grid(q: int) -> np.ndarray:
    return TWO_PI * np.arange(q + 1) / (q + 1)


def fock_amplitudes(alpha: float, q: int) -> np.ndarray:
    """e^{-|a|^2/2} |a|^n / sqrt(n!) for n = 0..q, evaluated in log space."""
    k = np.arange(q + 1)
    if alpha == 0:
        out = np.zeros(q + 1)
        out[0] = 1.0
        return out
    return np.exp(-0.5 * alpha * alpha + k * math.log(alpha) - 0.5 * special.gammaln(k + 1))


def fock_tail(alpha: float, q: int) -> float:
    """Probability mass of photon numbers above the truncation ``q``."""
    return float(stats.poisson.sf(q, alpha * alpha)) if alpha > 0 else 0.0


def single_state_phase_probs(alpha: float, phase: float, q: int) -> np.ndarray:
    """|<phi_dm | alpha e^{i phase}>|^2 over the grid."""
    c = fock_amplitudes(alpha, q) * np.exp(1j * np.arange(q + 1) * phase)
    amp = np.fft.fft(c) / math.sqrt(q + 1)  # sum_n c_n e^{-i n phi_dm}
    return amp.real ** 2 + amp.imag ** 2


def phase_distribution(alpha: float, phis: Optional[Sequence[float]] = None,
                       q: Optional[int] = None, weights: Optional[Sequence[float]] = None,
                       *, delta_phi1: Optional[float] = None,
                       check_tail: bool = True) -> PhaseDistribution:
    """Phase distribution of a weighted mixture of coherent states.

    Parameters
    ----------
    alpha : float
        Coherent amplitude |alpha| (mean photon number alpha**2).
    phis : sequence of float, optional
        Modulation angles. Defaults to the sector constellation built from
        ``delta_phi1``.
    q : int, optional
        Fock truncation; the grid has q+1 points. Defaults to
        ``max(300, ceil(n + 10 sqrt(n)))``.
    weights : sequence of float, optional
        Mixture weights summing to one; uniform by default.
    check_tail : bool
        Raise :class:`AccuracyError` when more than 1e-8 of the photon-number
        distribution lies above ``q``.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if phis is None:
        if delta_phi1 is None:
            raise ValueError("give either phis or delta_phi1")
        phis = constellation(delta_phi1)
    phis = np.asarray(phis, dtype=float)
    if q is None:
        q = default_q(alpha * alpha)
    if q < 1:
        raise ValueError("q must be >= 1")
    if weights is None:
        weights = np.full(phis.size, 1.0 / phis.size)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != phis.shape or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must match phis and sum to 1")
    tail = fock_tail(alpha, q)
    if check_tail and tail > TAIL_TOL:
        raise AccuracyError(f"q={q} leaves Fock tail {tail:.3g} > {TAIL_TOL:g} at alpha={alpha}")
    comps = np.stack([w * single_state_phase_probs(alpha, p, q) for p, w in zip(phis, weights)])
    return PhaseDistribution(comps.sum(axis=0), q, phase_grid(q), comps, phis, weights)


def count_peaks(values: np.ndarray, rel_floor: float = 1e-6) -> int:
    """Strict local maxima on the circular grid above ``rel_floor * max``."""
    v = np.asarray(values)
    left, right = np.roll(v, 1), np.roll(v, -1)
    is_peak = (v > left) & (v >= right) & (v > rel_floor * v.max())
    return int(is_peak.sum())


def phase_moments(pd: PhaseDistribution, component: int) -> tuple[float, float]:
    """First and second phase moments of one constellation component.

    The component is renormalized by its weight (the factor 4 for the
    uniform four-state mixture). Grid phases are unwrapped into a window of
    width 2pi centred on the component's circular mean, so a peak sitting on
    the 0/2pi seam is not split in two. The mean is reported in
    (-pi/2, 3pi/2]. A component with no preferred direction (vanishing
    resultant) falls back to the plain [0, 2pi) grid.
    """
    if pd.components is None:
        raise ValueError("phase distribution carries no per-component data")
    p = pd.components[component] / pd.weights[component]
    z = np.sum(p * np.exp(1j * pd.grid))
    if abs(z) <= 1e-9 * p.sum():
        phi = pd.grid
    else:
        centre = math.atan2(z.imag, z.real)
        if centre <= -math.pi / 2:
            centre += TWO_PI
        phi = centre + wrap_signed(pd.grid - centre)
    return float(np.sum(phi * p)), float(np.sum(phi * phi * p))


def snr_phase(alpha: float, delta_phi1: float, q: Optional[int] = None,
              component: int = 1) -> float:
    """<phi>^2 / (<phi^2> - <phi>^2) for one constellation state.

    ``component`` indexes ``(0, dphi, pi, pi+dphi)``; the default is the
    ``dphi`` state that an eavesdropper must tell apart from ``0``.
    """
    pd = phase_distribution(alpha, delta_phi1=delta_phi1, q=q)
    mean, second = phase_moments(pd, component)
    var = second - mean * mean
    if var <= 0:
        raise SingularityError(f"phase variance {var:.3g} is not positive")
    return mean * mean / var


def snr_crossing(alpha: float, lo: float = 1e-4, hi: float = 1.0,
                 q: Optional[int] = None, xtol: float = 1e-10) -> float:
    """delta_phi1 at which the phase SNR of the dphi state equals one."""
    f = lambda d: snr_phase(alpha, d, q) - 1.0
    if f(lo) > 0 or f(hi) < 0:
        raise ValueError(f"SNR=1 not bracketed by [{lo}, {hi}] at alpha={alpha}")
    return float(optimize.bisect(f, lo, hi, xtol=xtol))


QUANTITIES = ("lambda2", "lambda4", "entropy", "entropy_numeric", "snr")


def sweep(quantity: str, alphas: Sequence[float], delta_phis: Sequence[float],
          q: Optional[int] = None):
    """Yield ``(alpha, mean_photons, delta_phi1, q, quantity, value)`` rows."""
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; choose from {QUANTITIES}")
    for a in alphas:
        for d in delta_phis:
            qq = q if q is not None else default_q(a * a)
            if quantity == "lambda2":
                v = float(analytic_eigenvalues(a)[0])
            elif quantity == "lambda4":
                v = float(analytic_eigenvalues(a)[1])
            elif quantity == "entropy":
                v = float(entropy_analytic(a))
            elif quantity == "entropy_numeric":
                v = entropy_numeric(a, d)
            else:
                v = snr_phase(a, d, qq)
            yield (a, a * a, d, qq, quantity, v)
