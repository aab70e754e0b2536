import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dqcomm.channels import (NONPOSITIVE, POSITIVE, ChannelError, MultiParticleChannelParams,
                             amplitude_damping_capacity, amplitude_damping_dilation, binary_entropy,
                             build_multiparticle_dilation, coherent_information, max_coherent_information,
                             simplex_grid, validate_density_matrix, verify_multiparticle_threshold,
                             von_neumann_entropy)
from dqcomm.oracles import ad_capacity_grid, displayed_multiparticle_channel

# frozen from oracles.ad_capacity_grid(0.75) (exhaustive tau grid, step 1e-6)
Q_AT_075 = 0.4150374992785735


def test_binary_entropy():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0 == binary_entropy(1.0)
    assert abs(binary_entropy(0.11) - 0.499915958164528) < 1e-12
    y = 1 - 2 * 0.11
    series = 1 - sum(y ** (2 * n) / (n * (2 * n - 1)) for n in range(1, 2000)) / (2 * math.log(2))
    assert abs(binary_entropy(0.11) - series) < 1e-12
    with pytest.raises(ChannelError):
        binary_entropy(1.2)


def test_amplitude_damping_values():
    assert amplitude_damping_capacity(1.0) == 1.0
    assert amplitude_damping_capacity(0.5) == 0.0
    assert abs(amplitude_damping_capacity(0.75) - Q_AT_075) < 1e-9
    for p in (0.55, 0.6, 0.9, 0.99):
        assert abs(amplitude_damping_capacity(p) - ad_capacity_grid(p, 1e-5)) < 1e-8
    with pytest.raises(ChannelError):
        amplitude_damping_capacity(-0.1)


def test_amplitude_damping_shape():
    ps = np.linspace(0, 1, 201)
    q = np.array([amplitude_damping_capacity(p) for p in ps])
    assert np.all(q[ps <= 0.5] == 0)
    assert np.all(np.diff(q[ps > 0.5]) > 0)
    assert amplitude_damping_capacity(0.5 + 1e-6) < 1e-4  # continuous at the threshold
    assert q[-1] == 1.0


def _random_rho(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


@settings(max_examples=60, deadline=None)
@given(p=st.floats(0, 1), frac=st.floats(0, 1), rank=st.integers(1, 3), seed=st.integers(0, 2 ** 32 - 1))
def test_dilation_is_isometry_and_reproduces_channel(p, frac, rank, seed):
    q = (1 - p) * frac
    rng = np.random.default_rng(seed)
    s = rng.random(rank) + 0.1
    s = tuple(s / s.sum())
    s = s[:-1] + (1.0 - sum(s[:-1]),)
    params = MultiParticleChannelParams(p, q, s)
    dil = build_multiparticle_dilation(params)
    assert np.max(np.abs(dil.V.conj().T @ dil.V - np.eye(2))) < 1e-12
    rho = _random_rho(rng)
    out = dil.output(rho)
    np.testing.assert_allclose(out, displayed_multiparticle_channel(rho, p, q, s), atol=1e-12)
    e0 = np.zeros((2, 2))
    e0[0, 0] = 1
    np.testing.assert_allclose(dil.output(e0)[:1, :1], [[1.0]], atol=1e-15)
    assert abs(np.trace(dil.environment(rho)) - 1) < 1e-12
    # data processing: I_c <= S(rho)
    assert coherent_information(dil, rho) <= von_neumann_entropy(rho) + 1e-9


def test_displayed_channel_example():
    params = MultiParticleChannelParams(0.5, 0.3, (1.0,))
    rho = np.array([[0.6, 0.2 - 0.1j], [0.2 + 0.1j, 0.4]])
    np.testing.assert_allclose(build_multiparticle_dilation(params).output(rho),
                               displayed_multiparticle_channel(rho, 0.5, 0.3, (1.0,)), atol=1e-12)


def test_noiseless_dilation():
    dil = build_multiparticle_dilation(MultiParticleChannelParams(1.0, 0.0))
    rho = np.eye(2) / 2
    assert abs(coherent_information(dil, rho) - 1.0) < 1e-12
    res = max_coherent_information(dil)
    assert abs(res["max_ic"] - 1.0) < 1e-12


def test_pure_zero_input_has_no_information():
    for p, q in [(0.3, 0.2), (0.9, 0.05), (0.2, 0.7)]:
        dil = build_multiparticle_dilation(MultiParticleChannelParams(p, q, (0.6, 0.4)))
        assert abs(coherent_information(dil, np.diag([1.0, 0.0]))) < 1e-12


@pytest.mark.parametrize("p", [0.55, 0.75, 0.9])
def test_reduces_to_amplitude_damping(p):
    from scipy.optimize import minimize_scalar

    for dil in (build_multiparticle_dilation(MultiParticleChannelParams(p, 1 - p)), amplitude_damping_dilation(p)):
        res = minimize_scalar(lambda t: -coherent_information(dil, np.diag([1 - t, t])),
                              bounds=(0, 1), method="bounded", options={"xatol": 1e-10})
        assert abs(-res.fun - amplitude_damping_capacity(p)) < 1e-8


def test_threshold_examples():
    rep = verify_multiparticle_threshold([
        MultiParticleChannelParams(0.7, 0.1, (1.0,)),
        MultiParticleChannelParams(0.4, 0.4, (1.0,)),
        MultiParticleChannelParams(1.0, 0.0),
    ])
    verdicts = [r.verdict for r in rep["rows"]]
    assert verdicts == [POSITIVE, NONPOSITIVE, POSITIVE]
    assert abs(rep["rows"][2].max_ic - 1.0) < 1e-12
    assert rep["violations"] == 0


def test_coherence_does_not_help():
    rep = verify_multiparticle_threshold(simplex_grid(6))
    assert rep["max_coherence_gain"] < 1e-9


def test_simplex_grid():
    g = simplex_grid(4, spectra=[(1.0,)])
    assert len(g) == 15
    assert all(x.p + x.q <= 1 + 1e-12 for x in g)
    with pytest.raises(ChannelError):
        MultiParticleChannelParams(0.8, 0.3)
    with pytest.raises(ChannelError):
        MultiParticleChannelParams(0.5, 0.2, (0.5, 0.6))


def test_density_matrix_validation():
    with pytest.raises(ChannelError):
        validate_density_matrix(np.array([[1.0, 0.5], [0.0, 0.0]]))
    with pytest.raises(ChannelError):
        validate_density_matrix(np.diag([1.5, -0.5]))
    with pytest.raises(ChannelError):
        coherent_information(amplitude_damping_dilation(0.6), np.eye(3) / 3)
