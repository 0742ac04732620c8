import math

import numpy as np
import pytest
import scipy.signal
from hypothesis import given, settings
from hypothesis import strategies as st

from dacfdi.consensus import AgentState, Kind, isac_derivative, default_design, rac_derivative
from dacfdi.fdi import (
    FaultModel,
    accommodate_isac,
    accommodate_rac,
    build_extended,
    corrupt,
    default_observer_poles,
    invariant_zeros,
    observer_derivative,
    half_frequency_fault,
    uio_design,
    uio_existence_check,
)
from dacfdi.lti import place_detectable_gain, place_observer_gain
from dacfdi.scenarios import REFERENCE_K1
from observer_harness import FAULT_KINDS, observer_trial, random_design, random_fault

EIG_F_REFERENCE = np.array([-100.000075 + 0j, -3 - 2.598076211353316j, -3 + 2.598076211353316j])


@pytest.fixture(scope="module")
def isac_ext():
    return build_extended(default_design(Kind.ISAC))


@pytest.fixture(scope="module")
def reference_obs(isac_ext):
    return uio_design(isac_ext, explicit_K1=REFERENCE_K1)


def test_extended_isac(isac_ext):
    np.testing.assert_array_equal(isac_ext.A, [[-3, -9, 1], [1, 0, 0], [0, 0, 0]])
    np.testing.assert_array_equal(isac_ext.B.ravel(), [-1, 0, 0])
    np.testing.assert_array_equal(isac_ext.C, [[3, 6.75, 1]])
    np.testing.assert_array_equal(isac_ext.E.ravel(), [0, 0, 1])


def test_extended_rac():
    ext = build_extended(default_design(Kind.RAC))
    np.testing.assert_array_equal(ext.A, [[0, -2.25, 1], [1, 0, 0], [0, 0, 0]])
    np.testing.assert_array_equal(ext.B.ravel(), [-1, 0, 0])
    np.testing.assert_array_equal(ext.C, [[1.5, 0, 1]])
    np.testing.assert_array_equal(ext.E.ravel(), [0, 0, 1])


def test_extended_one_state():
    from dacfdi.consensus import EstimatorDesign
    from dacfdi.lti import Polynomial, TransferFunction

    h = TransferFunction.from_coeffs([1.0], [1.0, 1.0])  # realizes as A=[-1], B=[1], C=[1]
    d = EstimatorDesign(h, default_design(Kind.ISAC).g_tf, Polynomial((2.25, 0, 1)), Kind.ISAC)
    ext = build_extended(d)
    np.testing.assert_array_equal(ext.A, [[-1, 1], [0, 0]])
    np.testing.assert_array_equal(ext.C, [[1, 1]])


@pytest.mark.parametrize("kind, zeros", [
    (Kind.ISAC, [-3 - 2.598076211353316j, -3 + 2.598076211353316j]),
    (Kind.RAC, [-0.75 - 1.299038105676658j, -0.75 + 1.299038105676658j]),
])
def test_existence_and_invariant_zeros(kind, zeros):
    ext = build_extended(default_design(kind))
    rep = uio_existence_check(ext)
    assert rep.rank_ok and rep.CE == 1.0 and rep.zeros_ok
    np.testing.assert_allclose(np.sort_complex(rep.zeros), zeros, atol=1e-9)
    # independent: zeros of the f -> y transfer function
    num, _ = scipy.signal.ss2tf(ext.A, ext.E, ext.C, np.zeros((1, 1)))
    ref = np.roots(np.trim_zeros(num[0], "f"))
    np.testing.assert_allclose(np.sort_complex(ref), zeros, atol=1e-9)


def test_reference_gain_design(reference_obs):
    np.testing.assert_array_equal(reference_obs.H.ravel(), [0, 0, 1])
    np.testing.assert_allclose(reference_obs.T, [[1, 0, 0], [0, 1, 0], [-3, -6.75, 0]], atol=1e-15)
    ev = np.sort_complex(np.linalg.eigvals(reference_obs.F))
    np.testing.assert_allclose(ev, EIG_F_REFERENCE, atol=1e-9)


def test_printed_gain_is_recovered_from_poles(isac_ext, reference_obs):
    A_bar = isac_ext.A - reference_obs.H @ isac_ext.C @ isac_ext.A
    with pytest.raises(ValueError, match="pair not observable"):
        place_observer_gain(A_bar, isac_ext.C, EIG_F_REFERENCE)
    K1 = place_detectable_gain(A_bar, isac_ext.C, [-100.000075])
    np.testing.assert_allclose(K1.ravel(), REFERENCE_K1, atol=5e-4)


def test_design_residuals_for_random_designs(rng):
    for _ in range(10):
        kind = Kind(rng.choice(["isac", "rac"]))
        ext = build_extended(random_design(rng, kind))
        obs = uio_design(ext, observer_poles=default_observer_poles(ext.n))
        I = np.eye(ext.n)
        assert np.linalg.norm((obs.H @ ext.C - I) @ ext.E) < 1e-12
        assert np.linalg.norm(obs.T - (I - obs.H @ ext.C)) < 1e-12
        assert np.linalg.norm(obs.K2 - obs.F @ obs.H) < 1e-12
        assert np.linalg.norm(obs.F - (ext.A - obs.H @ ext.C @ ext.A - obs.K1 @ ext.C)) < 1e-12
        assert np.max(np.linalg.eigvals(obs.F).real) < 0


def test_design_argument_errors(isac_ext):
    with pytest.raises(ValueError):
        uio_design(isac_ext)
    with pytest.raises(ValueError):
        uio_design(isac_ext, observer_poles=[-2], explicit_K1=REFERENCE_K1)
    with pytest.raises(ValueError, match="not Hurwitz"):
        uio_design(isac_ext, explicit_K1=(0.0, 0.0, -1.0))


def test_observer_rest(reference_obs):
    dz, xhat, fhat = observer_derivative(reference_obs, np.zeros(3), 0.0, 0.0)
    assert not dz.any() and not xhat.any() and fhat == 0.0


def test_corrupt():
    f = half_frequency_fault(1.5)
    assert corrupt(2.0, f, 24.9) == 2.0
    assert corrupt(2.0, f, 25.0) == 2.0  # off up to and including the onset
    assert f.shape(25.0) == 0.9950484010363788
    assert corrupt(0.0, f, 25.0 + 1e-12) == pytest.approx(0.9950484010363788, abs=1e-11)
    z = FaultModel(1, 2, 0.0, "zero")
    assert corrupt(1.25, z, 7.0) == 1.25
    assert f.links() == [(1, 2), (2, 1)]
    with pytest.raises(ValueError):
        FaultModel(1, 2, 0.0, "square")


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-3, 3), st.floats(-3, 3))
def test_isac_accommodation_cancels_exactly(nu_l, f, x1, x2):
    d = default_design(Kind.ISAC)
    s = AgentState(np.array([x1, 0.3]), np.array([x2, -0.2]))
    nu_self = float(d.h.C[0] @ s.X1)
    ref = isac_derivative(d, s, 0.7, nu_self, [nu_l, 0.1])
    got = accommodate_isac(d, s, 0.7, nu_self, [0.1], [(nu_l + f, f)])
    for a, b in zip(ref, got):
        assert np.allclose(a, b, rtol=1e-14, atol=1e-13)
    # zero estimate on an uncorrupted link reduces to the plain update
    got0 = accommodate_isac(d, s, 0.7, nu_self, [0.1], [(nu_l, 0.0)])
    for a, b in zip(ref, got0):
        assert np.allclose(a, b, rtol=1e-14, atol=1e-13)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-3, 3))
def test_rac_accommodation_cancels_exactly(eta_l, f, x2):
    d = default_design(Kind.RAC)
    s = AgentState(np.array([0.4, -1.0]), np.array([x2, 0.5]))
    eta_self = float(d.g.C[0] @ s.X2)
    ref = rac_derivative(d, s, -0.3, eta_self, [eta_l])
    got = accommodate_rac(d, s, -0.3, eta_self, [], [(eta_l + f, f)])
    for a, b in zip(ref, got):
        assert np.allclose(a, b, rtol=1e-14, atol=1e-13)
    got0 = accommodate_rac(d, s, -0.3, eta_self, [], [(eta_l, 0.0)])
    for a, b in zip(ref, got0):
        assert np.allclose(a, b, rtol=1e-14, atol=1e-13)


# ---- error dynamics --------------------------------------------------------------

@settings(max_examples=6)
@given(st.integers(0, 2**32 - 1), st.sampled_from(FAULT_KINDS), st.sampled_from(list(Kind)))
def test_error_is_autonomous(seed, fault_kind, kind):
    rng = np.random.default_rng(seed)
    design = random_design(rng, kind)
    m = design.m1 if kind is Kind.ISAC else design.m2
    fault = random_fault(rng, fault_kind, 2e-3)
    r = observer_trial(design, fault, rng.uniform(-1, 1, m), rng.uniform(-1, 1, m + 1),
                       np.linspace(0.6, 6.0, 10), dt=2e-3)
    assert np.max(np.abs(r.err - r.predicted)) < 1e-5


@pytest.mark.parametrize("waveform", ["constant", "ramp", "sin"])
def test_exact_initialization_stays_exact(waveform, rng):
    design = default_design(Kind.ISAC)
    ext = build_extended(design)
    obs = uio_design(ext, explicit_K1=REFERENCE_K1)
    x0 = rng.uniform(-1, 1, 2)
    y0 = float(design.h.C[0] @ x0)
    z0 = np.append(x0, 0.0) - obs.H[:, 0] * y0
    fault = FaultModel(1, 2, 1.0, waveform, amplitude=1.5, frequency=0.9)
    r = observer_trial(design, fault, x0, z0, np.linspace(0.5, 5.0, 10), obs=obs)
    assert np.max(np.abs(r.err)) < 1e-9


def test_error_decays_exponentially(rng, reference_obs):
    design = default_design(Kind.ISAC)
    fault = FaultModel(1, 2, 2.0, "sin", amplitude=1.0, frequency=0.75)
    times = np.linspace(0.1, 10.0, 100)
    r = observer_trial(design, fault, rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 3), times,
                       dt=2e-3, obs=reference_obs)
    alpha = float(np.max(np.linalg.eigvals(reference_obs.F).real)) + 0.05
    norms = np.linalg.norm(r.err, axis=1)
    first = times <= 5.0
    c = np.max(norms[first] * np.exp(-alpha * times[first]))
    assert np.all(norms[~first] <= c * np.exp(alpha * times[~first]))
    assert norms[-1] < 1e-3 * norms[0]


def test_default_poles_scale_with_omega():
    assert default_observer_poles(3, 1.5) == [-2.0, -2.5, -3.0]
    assert default_observer_poles(2, 3.0) == [-4.0, -5.0]


def test_zeros_of_unstable_subsystem_fail_existence():
    from dacfdi.consensus import EstimatorDesign
    from dacfdi.lti import Polynomial, TransferFunction

    # n + d = s^2 - s + 1 has right-half-plane roots
    h = TransferFunction.from_coeffs([-1.0, -2.0], [2.0, 1.0, 1.0])
    d = EstimatorDesign(h, default_design(Kind.ISAC).g_tf, Polynomial((2.25, 0, 1)), Kind.ISAC)
    rep = uio_existence_check(build_extended(d))
    assert rep.rank_ok and not rep.zeros_ok
    assert math.isclose(max(z.real for z in invariant_zeros(build_extended(d))), 0.5, abs_tol=1e-9)
    with pytest.raises(ValueError, match="invariant zeros"):
        uio_design(build_extended(d), observer_poles=[-2, -3, -4])
