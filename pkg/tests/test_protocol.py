import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvqec.errors import DomainError, InvalidParameterError
from cvqec.nla import success_bound
from cvqec.protocol import (
    ProtocolConfig,
    best_transmission,
    corrected_transmission,
    distill,
    end_to_end_verify,
    fig2_curve,
    fig3_curve,
    fig3_point,
    fixed_budget_gain,
    fixed_budget_ladder,
    gain_window,
    log_sweep,
    max_gain,
    tractable_gain,
)

chis = st.floats(0.05, 0.95)
etas = st.floats(0.01, 1.0)


def test_corrected_transmission_examples():
    assert corrected_transmission(5, 0.5, 0.5).value == pytest.approx(0.625)
    t = corrected_transmission(100, 0.5, 0.5)
    assert t.clamped and t.value == 1.0 and t.raw == pytest.approx(12.5)


@given(etas, chis)
def test_max_gain_reaches_limit(eta, chi):
    g = max_gain(eta, chi)
    assert corrected_transmission(g, eta, chi).raw == pytest.approx(best_transmission(eta, chi),
                                                                      abs=1e-12)
    assert success_bound(chi, eta, g) == pytest.approx(0.0, abs=1e-12)


def test_max_gain_chi_zero():
    assert max_gain(0.5, 0.0) == math.inf
    with pytest.raises(InvalidParameterError):
        max_gain(0.0, 0.5)


def test_log_sweep_endpoints():
    g = log_sweep(2.0, 7.0, 5)
    assert g[0] == 2.0 and g[-1] == 7.0
    assert np.all(np.diff(np.log(g)) > 0)
    with pytest.raises(InvalidParameterError):
        log_sweep(1, 2, 0)


@given(st.floats(0.5, 0.99), st.floats(0.1, 0.9))
def test_fig2_curve_shape(eta, chi):
    rows = fig2_curve(eta, chi, points=30)
    p = [r.p_success for r in rows]
    t = [r.eta_ec for r in rows]
    assert all(b <= a + 1e-15 for a, b in zip(p, p[1:]))
    assert all(b >= a - 1e-15 for a, b in zip(t, t[1:]))
    assert t[0] == pytest.approx(eta, abs=1e-9)
    assert t[-1] == pytest.approx(best_transmission(eta, chi), abs=1e-9)
    assert p[-1] == 0.0


def test_fig2_rejects_gains_outside_window():
    lo, hi = gain_window(0.9, 0.5)
    with pytest.raises(DomainError) as exc:
        fig2_curve(0.9, 0.5, [1.0, 4.1])
    assert exc.value.interval == (lo, hi)


def test_config_dims_and_validation():
    cfg = ProtocolConfig(0.5, 0.5, 5.0)
    dim_a, dim_b = cfg.resolved_dims()
    assert cfg.effective[0] ** (2 * dim_a) < 1e-8
    assert dim_b <= dim_a
    with pytest.raises(InvalidParameterError):
        ProtocolConfig(0.5, 0.5, 2.0, nla_model="magic")


def test_ideal_distill_reports_bound():
    cfg = ProtocolConfig(0.5, 0.5, 2.0, dims=(20, 20))
    assert distill(cfg).p_success == pytest.approx(success_bound(0.5, 0.5, 2.0))


def test_end_to_end_corrects_loss():
    rep = end_to_end_verify(ProtocolConfig(0.5, 0.5, 5.0))
    assert rep.passed
    assert rep.eta_est == pytest.approx(0.625, rel=1e-3)


def test_end_to_end_break_even():
    rep = end_to_end_verify(ProtocolConfig(0.5, 0.5, 4.0))
    assert rep.eta_est == pytest.approx(0.5, rel=1e-3)


def test_fig3_unit_gain_is_plain_teleportation():
    pt = fig3_point(0.01, 0.33, 1.0)
    assert pt.eta_ec == pytest.approx(0.01 * 0.33**2, rel=1e-3)
    # two paths, vacuum-dominated resource: (1+G)^-2
    assert pt.p_success == pytest.approx(0.25, rel=1e-3)
    assert pt.fidelity > 1 - 1e-5


def test_fig3_single_path_is_worse():
    g = [4.0]
    one = fig3_curve(0.01, 0.6, 1, g)[0]
    two = fig3_curve(0.01, 0.6, 2, g)[0]
    assert one.fidelity < two.fidelity


def test_fig3_curve_sorted_and_parallel_equal():
    gains = [3.0, 1.0, 2.0]
    serial = fig3_curve(0.01, 0.33, 2, gains)
    parallel = fig3_curve(0.01, 0.33, 2, gains, workers=3)
    assert [p.G for p in serial] == [1.0, 2.0, 3.0]
    assert serial == parallel


def test_tractable_gain_within_window():
    for chi in (0.33, 0.6, 0.82):
        g = tractable_gain(0.01, chi)
        assert 1 < g < max_gain(0.01, chi)


@given(st.floats(0.05, 0.9), st.floats(1e-4, 0.5))
def test_fixed_budget_gain_hits_budget(chi, p):
    g = fixed_budget_gain(0.01, chi, p)
    if g >= 1:
        assert success_bound(chi, 0.01, g) == pytest.approx(p, rel=1e-9)


def test_fixed_budget_ladder_approaches_limit():
    rows = fixed_budget_ladder(0.01, [0.3, 0.2, 0.1], 1e-4)
    t = [r[2] for r in rows]
    assert all(b > a for a, b in zip(t, t[1:]))
    assert all(r[2] <= best_transmission(0.01, r[0]) for r in rows)
    # the trend only holds while chi^2 stays well above the budget
    late = fixed_budget_ladder(0.01, [0.03, 0.01], 1e-2)
    assert late[1][2] < late[0][2]
