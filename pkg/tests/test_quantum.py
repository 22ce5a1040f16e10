import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisekey import quantum as qm

# Closed-form values frozen from a 40-digit mpmath evaluation of
# sech(2n) sinh(n)^2 and (1 + sech 2n)/2.
FROZEN_CLOSED_FORM = {
    0.5: (0.056590558014963045671, 0.94340944198503695433, 0.31375932121598970765),
    1.0: (0.36709888558296015394, 0.63290111441703984606, 0.94841846623666143714),
    2.0: (0.49966453740984882936, 0.50033546259015117064, 0.99999967529217173531),
    3.0: (0.49999998477002025529, 0.50000001522997974471, 0.99999999999999933073),
}

# Spectrum of the exact-overlap mixture, frozen from mpmath eighe on G/4.
FROZEN_EXACT_SPECTRUM = {
    (1.0, 0.01): (0.56765087371589841, 0.43232599281165453, 1.6767902407939072e-5,
                  6.3655700391284373e-6),
    (2.0, 0.001): (0.50016722879943317, 0.4998317712034507, 5.0251451808364696e-7,
                   4.9748259804906641e-7),
    (5.0, 0.01): (0.49968769783205005, 0.49968769783205005, 0.00031230216794994755,
                  0.00031230216794994755),
}


@pytest.mark.parametrize("alpha", sorted(FROZEN_CLOSED_FORM))
def test_closed_form_matches_frozen(alpha):
    l2, l4, h = FROZEN_CLOSED_FORM[alpha]
    got2, got4 = qm.analytic_eigenvalues(alpha)
    assert got2 == pytest.approx(l2, rel=1e-14)
    assert got4 == pytest.approx(l4, rel=1e-14)
    assert float(qm.entropy_analytic(alpha)) == pytest.approx(h, rel=1e-13)


def test_closed_form_small_alpha_no_cancellation():
    a = 1e-4
    n = mp.mpf(a) ** 2
    ref = mp.sech(2 * n) * mp.sinh(n) ** 2
    assert float(qm.analytic_eigenvalues(a)[0]) == pytest.approx(float(ref), rel=1e-12)


@pytest.mark.parametrize("key", sorted(FROZEN_EXACT_SPECTRUM))
def test_numeric_spectrum_matches_mpmath(key):
    es = qm.eigensystem_numeric(qm.density_matrix_exact(*key))
    np.testing.assert_allclose(es.eigenvalues, FROZEN_EXACT_SPECTRUM[key], rtol=1e-8, atol=1e-14)
    assert np.max(es.residuals) < 1e-12


def test_exact_spectrum_follows_gram_pairs():
    # at small dphi the two dominant exact eigenvalues approach (1 +- e^{-2n})/2
    for a in (0.7, 1.0, 1.5):
        n = a * a
        es = qm.eigensystem_numeric(qm.density_matrix_exact(a, 1e-4))
        assert es.eigenvalues[0] == pytest.approx(0.5 * (1 + math.exp(-2 * n)), abs=1e-6)
        assert es.eigenvalues[1] == pytest.approx(0.5 * (1 - math.exp(-2 * n)), abs=1e-6)


def test_first_order_form_reproduces_closed_form():
    a, d = 1.0, 1e-3
    es = qm.eigensystem_numeric(qm.density_matrix_first_order(a, d))
    l2, l4 = qm.analytic_eigenvalues(a)
    top = sorted(es.eigenvalues[:2])
    assert top[0] == pytest.approx(l2, abs=1e-5) and top[1] == pytest.approx(l4, abs=1e-5)


def test_first_order_warns_outside_range():
    with pytest.warns(UserWarning):
        qm.density_matrix_first_order(1.0, 0.2)


@given(st.floats(0.05, 6.0), st.floats(1e-4, 1.0))
@settings(max_examples=60, deadline=None)
def test_density_matrix_invariants(alpha, d):
    dm = qm.density_matrix_exact(alpha, d)
    assert dm.is_hermitian() and dm.trace == pytest.approx(1.0, abs=1e-14)
    lam = qm.eigensystem_numeric(dm).eigenvalues
    assert lam.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(lam > -1e-12)
    assert 0.0 <= qm.von_neumann_entropy(lam) <= 2.0 + 1e-12


@given(st.floats(0.1, 20.0))
def test_eigenvalue_sum(alpha):
    l2, l4 = qm.analytic_eigenvalues(alpha)
    assert abs(l2 + l4 - 1) <= 1e-12


def test_entropy_limits():
    assert float(qm.entropy_analytic(0.0)) == 0.0
    assert qm.entropy_numeric(0.0, 0.01) == pytest.approx(0.0, abs=1e-12)
    assert qm.von_neumann_entropy([1.0, 0, 0, 0]) == 0.0
    assert qm.von_neumann_entropy([0.25] * 4) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        qm.von_neumann_entropy([1.5, -0.5])


def test_analytic_eigensystem():
    es = qm.eigensystem_analytic(2.0, 0.01)
    assert es.normalizer == pytest.approx(2 * math.sqrt(2 * (1 - math.exp(-4))))
    assert es.eigenvalues[0] == 0 and es.eigenvalues[2] == 0
    assert es.phi_C == pytest.approx(math.atan(4 * 0.01 / math.tanh(4)))
    with pytest.raises(ValueError):
        qm.eigensystem_analytic(0.0, 0.01)


def test_sech_stable():
    assert float(qm.sech(1000.0)) == 0.0
    assert float(qm.sech(0.0)) == 1.0


# -- phase distribution -------------------------------------------------------

def brute_phase_distribution(alpha, phis, q):
    """Direct double sum |sum_n c_n e^{i n (phi - phi_m)}|^2 / (q+1), mpmath."""
    mp.mp.dps = 30
    a = mp.mpf(alpha)
    c = [mp.exp(-a * a / 2) * a ** k / mp.sqrt(mp.factorial(k)) for k in range(q + 1)]
    out = []
    for m in range(q + 1):
        pm = 2 * mp.pi * m / (q + 1)
        tot = 0
        for ph in phis:
            s = mp.fsum(c[k] * mp.expj(k * (ph - pm)) for k in range(q + 1))
            tot += abs(s) ** 2 / (q + 1) / len(phis)
        out.append(float(tot))
    return np.array(out)


def test_phase_distribution_matches_direct_sum():
    phis = qm.constellation(0.3)
    pd = qm.phase_distribution(2.0, phis, q=40, check_tail=False)
    np.testing.assert_allclose(pd.values, brute_phase_distribution(2.0, phis, 40),
                               rtol=1e-10, atol=1e-16)


@pytest.mark.parametrize("d", [0.5, 0.1, 0.01])
def test_phase_distribution_normalized(d):
    pd = qm.phase_distribution(5.0, delta_phi1=d, q=300)
    assert abs(pd.total - 1) <= 1e-9
    assert np.all(pd.values >= 0)


def test_peak_counts():
    counts = {d: qm.count_peaks(qm.phase_distribution(5.0, delta_phi1=d, q=300).values)
              for d in (0.5, 0.1, 0.01)}
    assert counts == {0.5: 4, 0.1: 2, 0.01: 2}


def test_tail_guard():
    with pytest.raises(qm.AccuracyError):
        qm.phase_distribution(20.0, delta_phi1=0.1, q=300)
    pd = qm.phase_distribution(20.0, delta_phi1=0.1, q=300, check_tail=False)
    assert pd.total < 1


def test_fock_amplitudes_large_n_finite():
    c = qm.fock_amplitudes(math.sqrt(1e4), 11000)
    assert np.all(np.isfinite(c)) and np.sum(c * c) == pytest.approx(1.0, abs=1e-10)


def test_weights_validation():
    with pytest.raises(ValueError):
        qm.phase_distribution(1.0, [0.0, 1.0], weights=[0.2, 0.2])
    with pytest.raises(ValueError):
        qm.phase_distribution(1.0)


# -- SNR ----------------------------------------------------------------------

def snr_oracle(n, d, q):
    """Moments of the dphi state straight from the direct sum, no FFT."""
    a = math.sqrt(n)
    k = np.arange(q + 1)
    c = np.exp(-n / 2 + k * math.log(a) - 0.5 * np.array([math.lgamma(x + 1) for x in k]))
    grid = 2 * np.pi * np.arange(q + 1) / (q + 1)
    amp = (c[None, :] * np.exp(1j * k[None, :] * (d - grid[:, None]))).sum(axis=1)
    p = np.abs(amp) ** 2 / (q + 1)
    phi = np.where(grid > np.pi + d, grid - 2 * np.pi, grid)  # window centred on d
    mean = np.sum(p * phi)
    return mean ** 2 / (np.sum(p * phi ** 2) - mean ** 2)


@pytest.mark.parametrize("n, d", [(25, 0.1), (400, 0.1), (25, 0.01), (400, 0.5)])
def test_snr_matches_oracle(n, d):
    q = 300 if n == 25 else 600
    assert qm.snr_phase(math.sqrt(n), d, q) == pytest.approx(snr_oracle(n, d, q), rel=1e-9)


def test_snr_crossing_equals_phase_width():
    # SNR = d^2 / var, so SNR = 1 exactly where d equals the single-state phase std
    for n in (25, 400):
        q = qm.default_q(n) if n == 25 else 600
        probs = qm.single_state_phase_probs(math.sqrt(n), 0.0, q)
        off = np.where(qm.phase_grid(q) > np.pi, qm.phase_grid(q) - 2 * np.pi, qm.phase_grid(q))
        std = math.sqrt(np.sum(probs * off ** 2))
        assert qm.snr_crossing(math.sqrt(n), q=q) == pytest.approx(std, rel=1e-6)


def test_snr_crossing_frozen():
    assert qm.snr_crossing(5.0) == pytest.approx(0.1010533, abs=2e-7)


def test_snr_crossing_unbracketed():
    with pytest.raises(ValueError):
        qm.snr_crossing(5.0, lo=0.5, hi=1.0)


def test_phase_moments_seam():
    # a component centred on 0 must not be split across the 0/2pi seam
    pd = qm.phase_distribution(5.0, delta_phi1=0.1, q=300)
    mean, _ = qm.phase_moments(pd, 0)
    assert abs(mean) < 1e-9


def test_sweep_rows():
    rows = list(qm.sweep("lambda2", [1.0, 2.0], [0.01]))
    assert len(rows) == 2 and rows[0][4] == "lambda2"
    with pytest.raises(ValueError):
        list(qm.sweep("bogus", [1.0], [0.01]))


def test_vacuum_phase_uniform():
    pd = qm.phase_distribution(0.0, delta_phi1=0.3, q=50)
    np.testing.assert_allclose(pd.values, 1 / 51, rtol=1e-12)
