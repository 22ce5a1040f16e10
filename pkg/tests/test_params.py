import math

import pytest

from noisekey import Encoding, ProtocolParams, default_q, sigma_phi


def test_sigma_phi_values():
    assert sigma_phi(25) == pytest.approx(math.sqrt(0.08))
    assert sigma_phi(400) == pytest.approx(0.0707106781)
    with pytest.raises(ValueError):
        sigma_phi(0)


def test_default_q():
    assert default_q(25) == 300
    assert default_q(1e4) == 10_000 + 1000


@pytest.mark.parametrize("kw", [
    dict(encoding=Encoding.UNIFORM_WHEEL, M=3),
    dict(encoding=Encoding.UNIFORM_WHEEL, M=65536),
    dict(encoding=Encoding.SECTOR_M2, M=4, delta_phi1=0.01),
    dict(encoding=Encoding.SECTOR_M2, delta_phi1=None),
    dict(encoding=Encoding.SECTOR_M2, delta_phi1=4.0),
    dict(encoding=Encoding.UNIFORM_WHEEL, M=8, L=2),
    dict(encoding=Encoding.SECTOR_M2, delta_phi1=0.01, mean_photons=0),
])
def test_invalid_params(kw):
    with pytest.raises(ValueError):
        ProtocolParams(**kw)


def test_wheel_defaults():
    p = ProtocolParams(Encoding.UNIFORM_WHEEL, M=8, L=4095)
    assert p.k_M == 3 and p.delta_phi1 == pytest.approx(math.pi / 8) and p.n_positions == 16


def test_security_warnings():
    assert ProtocolParams(delta_phi1=0.01, mean_photons=25).security_warnings() == []
    assert ProtocolParams(delta_phi1=0.5, mean_photons=4).security_warnings()
    assert ProtocolParams(delta_phi1=0.01, mean_photons=0.5).security_warnings()
    assert ProtocolParams(Encoding.UNIFORM_WHEEL, M=4, L=4).security_warnings()
