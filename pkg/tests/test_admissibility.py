from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import lattice_backend
from mfbsde import generators as G
from mfbsde import terminals
from mfbsde.admissibility import CHECK_NAMES, certify_scenario, compute_constants
from mfbsde.errors import ConfigurationError, InvalidArgument
from mfbsde.generators import check_assumption_A
from mfbsde.kernel import build_grid

positive = st.floats(1e-3, 1e3, allow_nan=False)
bound = st.floats(0.0, 0.05, allow_nan=False)


def test_unit_constants():
    rep = compute_constants(1.0, 1.0)
    assert rep.rho == pytest.approx(1 / math.sqrt(8194), rel=1e-15)
    assert rep.rho == pytest.approx(0.01104720, abs=1e-8)
    assert rep.beta == pytest.approx(16 * math.sqrt(2), rel=1e-15)
    assert rep.beta == pytest.approx(22.6274, abs=1e-4)
    assert rep.M_const == 1024.0


def test_small_terminal_is_certified():
    rep = compute_constants(1.0, 1.0, 0.005, 0.0)
    assert rep.R == pytest.approx(0.0141421, abs=1e-7)
    assert rep.MR2 == pytest.approx(0.2048, rel=1e-12)
    assert rep.certified and rep.overall == "certified"
    assert all(rep.checks[n].passed for n in CHECK_NAMES)


def test_large_terminal_fails_smallness():
    rep = compute_constants(1.0, 1.0, 0.02)
    assert not rep.checks["smallness"].passed
    assert rep.checks["smallness"].lhs == 0.02
    assert rep.overall == "not-certified"


@pytest.mark.parametrize("C,T", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0), (math.inf, 1.0), (math.nan, 1.0)])
def test_invalid_constants(C, T):
    with pytest.raises(InvalidArgument):
        compute_constants(C, T)


def test_negative_bound_rejected():
    with pytest.raises(InvalidArgument):
        compute_constants(1.0, 1.0, -0.1)


def test_report_dict_lists_margins():
    d = compute_constants(1.0, 1.0, 0.005).to_dict()
    assert set(d["checks"]) == set(CHECK_NAMES)
    for c in d["checks"].values():
        assert {"lhs", "rhs", "passed", "relation"} <= set(c)
    assert d["overall"] == "certified"


@settings(max_examples=200, deadline=None)
@given(positive, positive)
def test_constant_formulas(C, T):
    rep = compute_constants(C, T)
    s = T * T + 1
    assert rep.rho2 == 1.0 / (4097.0 * C * C * s)
    assert rep.beta == pytest.approx(16 * C * math.sqrt(s), rel=1e-15)
    assert rep.M_const == pytest.approx(512 * C * C * s, rel=1e-15)


@settings(max_examples=300, deadline=None)
@given(positive, positive, bound, bound, bound, bound)
def test_monotone_in_bounds(C, T, xi, zb, dxi, dzb):
    hi = compute_constants(C, T, xi + dxi, zb + dzb)
    lo = compute_constants(C, T, xi, zb)
    for name in CHECK_NAMES:
        assert lo.checks[name].lhs <= hi.checks[name].lhs
        assert lo.checks[name].rhs == hi.checks[name].rhs
        if hi.checks[name].passed:
            assert lo.checks[name].passed
    if hi.certified:
        assert lo.certified


@settings(max_examples=300, deadline=None)
@given(positive, positive, bound, bound)
def test_consistency_and_hierarchy(C, T, xi, zb):
    rep = compute_constants(C, T, xi, zb)
    if rep.checks["contraction_condition"].passed:
        assert rep.MR2 < 1.0
        assert rep.checks["radius_condition"].passed
    # 8 M b^2 and M R^2 agree up to rounding
    b = xi + zb
    assert rep.MR2 == pytest.approx(8 * rep.M_const * b * b, rel=1e-12, abs=1e-300)
    if rep.certified:
        assert all(c.passed for c in rep.checks.values())


@settings(max_examples=100, deadline=None)
@given(positive, positive)
def test_smallness_implies_contraction(C, T):
    # b <= rho forces M R^2 = 8 M b^2 <= 4096/4097
    rep = compute_constants(C, T, compute_constants(C, T).rho * (1 - 1e-9))
    assert rep.certified


def test_zero_scenario_certified_with_zero_margins():
    grid = build_grid(1.0, 16)
    rep = certify_scenario(G.make_zero(), terminals.make_constant(0.0), grid)
    assert rep.certified
    assert all(c.lhs == 0.0 for c in rep.checks.values())


def test_sum_of_squares_with_local_constant():
    gen = G.make_sum_of_squares(C=2.0)
    assert check_assumption_A(gen, samples=4096).passed
    rep = certify_scenario(gen, terminals.make_tanh(0.004), build_grid(1.0, 32))
    assert rep.certified
    assert rep.C == 2.0


def test_understated_terminal_bound():
    xi = terminals.make_constant(0.002, bound=0.001)
    with pytest.raises(ConfigurationError) as info:
        certify_scenario(G.make_zero(), xi, build_grid(1.0, 8))
    assert info.value.details["declared"] == 0.001
    assert info.value.details["sampled"] == pytest.approx(0.002)


def test_understated_zero_drift_bound():
    gen = G.make_quadratic_z(c=1.0, offset=0.003, zero_drift_integral_bound=0.001)
    with pytest.raises(ConfigurationError):
        certify_scenario(gen, terminals.make_constant(0.0), build_grid(1.0, 8))


def test_zero_drift_enters_effective_bound():
    gen = G.make_quadratic_z(c=1.0, offset=0.004, zero_drift_integral_bound=0.004)
    rep = certify_scenario(gen, terminals.make_tanh(0.004), build_grid(1.0, 8))
    assert rep.effective_bound == pytest.approx(0.008)
    assert rep.R == pytest.approx(2 * math.sqrt(2) * 0.008)


def test_backend_states_used_when_given():
    b = lattice_backend(8)
    rep = certify_scenario(G.make_zero(), terminals.make_digital(0.005), b.grid, b)
    assert rep.certified


def test_multidimensional_uses_sampled_states():
    gen = G.make_sum_of_squares(m=2, d=2, C=2.0)
    with pytest.raises(ConfigurationError):
        certify_scenario(gen, terminals.make_tanh(0.004, m=2, bound=0.004), build_grid(1.0, 8))
    rep = certify_scenario(gen, terminals.make_tanh(0.002, m=2), build_grid(1.0, 8))
    assert rep.xi_bound == pytest.approx(0.002 * np.sqrt(2))
