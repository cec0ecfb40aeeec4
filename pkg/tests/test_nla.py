import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvqec.errors import (
    DegenerateHeraldError,
    InvalidParameterError,
    ResourceError,
    UnphysicalOutputError,
)
from cvqec.fock import FockKet, fidelity
from cvqec.nla import (
    EnsembleSpec,
    NlaConfig,
    effective_epr_params,
    ensemble_success,
    gaussian_ensemble_bound,
    ideal_nla,
    lo_success_scaling,
    lossy_epr,
    scissors_closed_form,
    scissors_device_kraus,
    scissors_failure_branch,
    scissors_kraus,
    scissors_nla,
    scissors_unit,
    success_bound,
    verify_epr_identity,
)
from cvqec.states import coherent_amplitudes, coherent_ket, fock_ket, vacuum_ket

gains = st.floats(1.0, 20.0)


def test_ideal_single_photon_probability():
    out = ideal_nla(NlaConfig(2.0), fock_ket(1, 4))
    assert out.p_success == pytest.approx(0.25, abs=1e-12)


def test_ideal_unit_gain_is_identity():
    ket = coherent_ket(0.5, 20)
    out = ideal_nla(NlaConfig(1.0), ket)
    assert out.p_success == pytest.approx(1.0)
    assert fidelity(out.state, ket) == pytest.approx(1.0, abs=1e-12)


def test_ideal_amplifies_coherent_amplitude():
    out = ideal_nla(NlaConfig(3.0), coherent_ket(0.3, 40))
    target = coherent_ket(math.sqrt(3) * 0.3, 40)
    assert fidelity(out.state, target) > 1 - 1e-9


def test_nla_config_validation():
    with pytest.raises(InvalidParameterError):
        NlaConfig(0.5)
    with pytest.raises(InvalidParameterError):
        NlaConfig(2.0, paths=0)
    with pytest.raises(InvalidParameterError):
        NlaConfig(2.0, detectors="neither")


def test_ensemble_bound_cases():
    assert gaussian_ensemble_bound(EnsembleSpec(2.0, 3.0)) == pytest.approx(0.5)
    assert gaussian_ensemble_bound(EnsembleSpec(2.0, 2.0)) == 1.0
    assert gaussian_ensemble_bound(EnsembleSpec(1.0, 3.0)) == 0.0
    assert gaussian_ensemble_bound(EnsembleSpec(1.0, 1.0)) == 1.0
    with pytest.raises(InvalidParameterError):
        EnsembleSpec(3.0, 2.0)


def test_effective_params_examples():
    assert effective_epr_params(0.5, 0.7, 1.0) == pytest.approx((0.5, 0.7))
    chi_eff, eta_eff = effective_epr_params(0.5, 0.5, 2.0)
    assert eta_eff == pytest.approx(2 / 3)
    assert chi_eff == pytest.approx(0.5 * math.sqrt(1.5))
    assert effective_epr_params(0.5, 1.0, 2.0)[1] == 1.0
    with pytest.raises(UnphysicalOutputError):
        effective_epr_params(0.9, 0.5, 3.0)


def test_success_bound_examples():
    assert success_bound(0.5, 0.5, 2.0) == pytest.approx(0.625 / 1.125)
    assert success_bound(0.5, 0.5, 1.0) == 1.0
    g_max = (1 - 0.5 * 0.25) / (0.5 * 0.25)
    assert success_bound(0.5, 0.5, g_max) == pytest.approx(0.0, abs=1e-12)


@given(st.floats(0.05, 0.95), st.floats(0.05, 1.0), gains, gains)
def test_success_bound_decreases_with_gain(chi, eta, g1, g2):
    lo, hi = sorted((g1, g2))
    assert success_bound(chi, eta, hi) <= success_bound(chi, eta, lo) + 1e-15


@pytest.mark.parametrize("chi,eta,gain", [(0.5, 0.7, 1.5), (0.3, 0.5, 2.0), (0.5, 1.0, 1.2)])
def test_epr_identity(chi, eta, gain):
    rep = verify_epr_identity(chi, eta, gain, 14)
    assert rep.fidelity >= 0.999
    assert rep.p_success <= rep.p_bound + 1e-12


def test_epr_identity_improves_with_cutoff():
    f = [verify_epr_identity(0.5, 0.7, 1.5, d).fidelity for d in (4, 6, 8, 10, 14)]
    assert all(b >= a - 1e-12 for a, b in zip(f, f[1:]))


def test_epr_identity_pure_limit():
    chi_eff, eta_eff = effective_epr_params(0.4, 1.0, 2.0)
    assert eta_eff == 1.0
    rho = lossy_epr(chi_eff, eta_eff, 12)
    assert np.linalg.matrix_rank(rho.matrix, tol=1e-12) == 1


# -- scissors ----------------------------------------------------------------


@given(gains)
def test_scissors_vacuum_herald(gain):
    # one-photon path: ancilla reflected (1 - tau), then 50:50 onto the signal detector
    des = scissors_unit(gain, 3, "designated").apply(vacuum_ket(3))
    assert des.trace == pytest.approx(1 / (2 * (1 + gain)), abs=1e-12)
    assert des.matrix[0, 0].real == pytest.approx(des.trace)
    either = scissors_unit(gain, 3, "either").apply(vacuum_ket(3))
    assert either.trace == pytest.approx(1 / (1 + gain), abs=1e-12)


@given(gains)
def test_scissors_amplitude_ratio(gain):
    k = scissors_unit(gain, 4).kraus[0]
    assert k[1, 1] / k[0, 0] == pytest.approx(math.sqrt(gain), rel=1e-10)
    # the unit truncates: two or more photons never herald into |0> or |1>
    assert np.max(np.abs(k[:, 2:])) < 1e-12
    assert np.max(np.abs(k[2:, :])) < 1e-12


def test_scissors_mirrored_pattern_differs_by_phase():
    a = scissors_kraus(2.0, 3, (1, 0))
    b = scissors_kraus(2.0, 3, (0, 1))
    assert abs(a[0, 0]) == pytest.approx(abs(b[0, 0]))
    assert abs(a[1, 1]) == pytest.approx(abs(b[1, 1]))
    # relative sign between |0> and |1> flips
    assert np.sign((a[1, 1] / a[0, 0]).real) == -np.sign((b[1, 1] / b[0, 0]).real)


def test_scissors_dead_pattern():
    with pytest.raises(DegenerateHeraldError):
        scissors_kraus(2.0, 3, (2, 2))


@pytest.mark.parametrize("paths", [1, 2, 3])
@pytest.mark.parametrize("gain", [1.0, 2.5, 9.0])
def test_device_matches_path_counting(paths, gain):
    dim = 5
    k = scissors_device_kraus(NlaConfig(gain, paths), dim)
    np.testing.assert_allclose(k, np.diag(scissors_closed_form(NlaConfig(gain, paths), dim)),
                               atol=1e-10)


def test_device_memory_budget():
    with pytest.raises(ResourceError):
        scissors_device_kraus(NlaConfig(2.0, 4), 30)


def test_single_path_coherent_input():
    alpha, gain, dim = 0.2, 2.0, 10
    out = scissors_nla(NlaConfig(gain, 1), coherent_ket(alpha, dim))
    # oracle: |0> + sqrt(G) alpha |1>, normalized, against coherent(sqrt(G) alpha)
    c = coherent_amplitudes(alpha, 2) * np.array([1, math.sqrt(gain)])
    ref = coherent_amplitudes(math.sqrt(gain) * alpha, 2)
    expected = abs(np.vdot(c, ref)) ** 2 / np.vdot(c, c).real
    f = fidelity(out.state, coherent_ket(math.sqrt(gain) * alpha, dim))
    assert f == pytest.approx(expected, abs=1e-10)
    assert 0.99 < f < 1.0


def test_unit_gain_vacuum_passes():
    out = scissors_nla(NlaConfig(1.0, 1), vacuum_ket(4))
    assert fidelity(out.state, vacuum_ket(4)) == pytest.approx(1.0)


def test_more_paths_track_ideal_better():
    ket = coherent_ket(0.4, 8)
    ideal = ideal_nla(NlaConfig(3.0), ket).state
    f = [fidelity(scissors_nla(NlaConfig(3.0, n), ket).state, ideal) for n in (1, 2, 3)]
    assert f[0] < f[1] < f[2]


def test_vacuum_scaling_is_exact():
    rep = lo_success_scaling([1.0, 2.0, 5.0, 16.0], 1, vacuum_ket(3))
    np.testing.assert_allclose(rep.xi, 1.0, atol=1e-12)
    assert rep.spread < 1e-10
    # one more path costs a factor 1/(1+G)
    for g in (2.0, 5.0):
        p1 = scissors_nla(NlaConfig(g, 1), vacuum_ket(3)).p_success
        p2 = scissors_nla(NlaConfig(g, 2), vacuum_ket(3)).p_success
        assert p2 / p1 == pytest.approx(1 / (1 + g))
    assert 1 / (1 + 2) ** 2 == pytest.approx(0.111, abs=1e-3)


@pytest.mark.parametrize("v_t", [1.5, 2.0, 4.0])
def test_ensemble_within_bound(v_t):
    chk = ensemble_success(v_t, 2.0, n_samples=10_000, seed=3)
    assert chk.passed
    assert chk.bound == pytest.approx(1 / 2)


def test_ensemble_is_seeded():
    a = ensemble_success(2.0, 3.0, n_samples=500, seed=11)
    b = ensemble_success(2.0, 3.0, n_samples=500, seed=11)
    assert a == b


def test_heralded_outcome_kets():
    out = ideal_nla(NlaConfig(4.0), FockKet((3,), [0.6, 0.8, 0]))
    assert isinstance(out.state, FockKet)
    assert out.state.norm == pytest.approx(1.0)


@pytest.mark.parametrize("detectors", ["either", "designated"])
@pytest.mark.parametrize("gain", [1.0, 4.0])
def test_failure_branch_closes_probability(gain, detectors):
    ket = coherent_ket(0.3, 6)
    p_ok = scissors_unit(gain, 6, detectors).apply(ket).trace
    fail = scissors_failure_branch(gain, ket, detectors)
    assert p_ok + fail.p_failure == pytest.approx(1.0, abs=1e-12)
    assert fail.state.trace == pytest.approx(1.0)


def test_failure_branch_is_not_vacuum():
    # the ancilla photon usually exits in the output port when the herald fails
    fail = scissors_failure_branch(2.0, coherent_ket(0.3, 6))
    assert fail.vacuum_fraction < 0.1
