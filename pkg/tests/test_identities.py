import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact import identities as ids
from artifact.engine import FlavorParam, ParameterSet, Profile, gen_balanced_params
from artifact.errors import PreconditionError
from artifact.qkernel import QContext, chiral_ratio
from artifact.weights import CALIBRATED, MultiSpin, SpectralPair, Spin


def test_sum_integral_single_instance():
    ctx = ids.default_context("sum-integral", 0.5)
    rep = ids.check_sum_integral(gen_balanced_params(4, "six-flavor"), ctx)
    assert rep.passed and rep.rel_residual < 1e-10


def test_sum_integral_rejects_unbalanced_set():
    ps = gen_balanced_params(4, "six-flavor")
    flav = list(ps.flavors)
    flav[2] = FlavorParam(flav[2].modulus * 0.9, flav[2].phase, flav[2].charge)
    with pytest.raises(PreconditionError):
        ids.check_sum_integral(ParameterSet("six-flavor", flav), QContext(0.5))


def test_sum_integral_real_slice():
    # zero charges and real fugacities: both sides real
    q = 0.5
    mods = [0.8, 0.75, 0.7, 0.78, 0.72]
    mods.append(q / np.prod(mods))
    ps = ParameterSet("six-flavor", [FlavorParam(m, 0.0, 0) for m in mods])
    rep = ids.check_sum_integral(ps, ids.default_context("sum-integral", q))
    assert abs(rep.lhs.imag) < 1e-10 * abs(rep.lhs)
    assert abs(rep.rhs.imag) < 1e-10 * abs(rep.rhs)


def test_star_triangle_precondition():
    spins = [Spin(0.1, 0), Spin(1.0, 1), Spin(2.0, -1)]
    with pytest.raises(PreconditionError):
        ids.check_star_triangle(-0.1, -0.1, -0.1, spins, QContext(0.5), CALIBRATED)


def test_star_triangle_rhs_relabeling():
    # equal angles: relabeling the spins permutes the three weights of the right side
    ctx = ids.default_context("star-triangle", 0.5, quad_points=256, sum_m_max=30, tail_tol=1e-8)
    a = -1 / 6
    s = [Spin(0.3, 1), Spin(1.7, 0), Spin(-2.2, -1)]
    r1 = ids.check_star_triangle(a, a, a, s, ctx, CALIBRATED)
    r2 = ids.check_star_triangle(a, a, a, [s[1], s[2], s[0]], ctx, CALIBRATED)
    assert abs(r1.rhs - r2.rhs) < 1e-14 * abs(r1.rhs)


def test_star_triangle_calibration_is_deterministic():
    ctx = ids.default_context("star-triangle", 0.5)
    sets = [gen_balanced_params(2, "star-triangle")]
    c1, t1 = ids.calibrate_star_triangle(sets, ctx)
    c2, t2 = ids.calibrate_star_triangle(sets, ctx)
    assert c1 == c2 == CALIBRATED
    assert [t.get("convention") for t in t1] == [t.get("convention") for t in t2]


@given(seed=st.integers(0, 10 ** 5), n=st.sampled_from([1, 2, 3]))
@settings(max_examples=50, deadline=None)
def test_tilde_map_is_involution(seed, n):
    ps = gen_balanced_params(seed, "I-transform", n=n, profile=Profile(divisible=True))
    twice = ids.tilde_params(ids.tilde_params(ps))
    for a, b in zip(ps.flavors, twice.flavors):
        assert abs(a.fugacity - b.fugacity) < 1e-14
        assert a.charge == b.charge


def test_tilde_map_rejects_fractional_charges():
    flav = [FlavorParam(0.8, 0.0, c) for c in (1, 0, 0, 0)]
    with pytest.raises(PreconditionError):
        ids.tilde_flavors(flav, 2)


def test_eval_I_rank_one_is_closed_form():
    ps = gen_balanced_params(5, "I-transform", n=1, profile=Profile(divisible=True))
    t, s = ps.split()
    ctx = QContext(0.5)
    direct = ids.i_prefactor(t, s, 1, 0.5)
    for f in t:
        direct *= chiral_ratio(f.charge, f.fugacity, ctx)
    for f in s:
        direct *= chiral_ratio(f.charge, f.fugacity, ctx)
    assert abs(ids.eval_I(t, s, 1, ctx) - direct) < 1e-15 * abs(direct)


def test_rank_one_transform_needs_even_charge_sum():
    # an odd t charge sum flips the sign of one side
    ctx = QContext(0.5, tail_tol=1e-13)
    for seed in range(1, 30):
        ps = gen_balanced_params(seed, "I-transform", n=1)
        t, _ = ps.split()
        rep = ids.check_we7_transformation(ps, ctx)
        if sum(f.charge for f in t) % 2:
            assert abs(rep.lhs + rep.rhs) < 1e-12 * abs(rep.lhs)
        else:
            assert rep.rel_residual < 1e-12


def test_eval_V_forms_are_finite_and_validated():
    ps = gen_balanced_params(2, "I-transform", n=2, profile=Profile(divisible=True))
    t, s = ps.split()
    ctx = ids.default_context("v-consistency", 0.5)
    v = ids.eval_V(t, s, ctx)
    vp = ids.eval_V(t, s, ctx, form="printed")
    assert np.isfinite(v) and np.isfinite(vp) and v != 0
    with pytest.raises(ValueError):
        ids.eval_V(t, s, ctx, form="other")


def test_v_integrand_reflection_symmetry():
    ps = gen_balanced_params(3, "I-transform", n=2, profile=Profile(divisible=True))
    t, s = ps.split()
    ctx = QContext(0.5)
    z = np.exp(1j * np.array([0.3, 1.1, 2.9]))
    m = np.array([-2, 0, 3])

    def integrand(z, m):
        out = ids.self_weight(z, m, 0.5) * z ** (-8 * m)
        for f in list(t) + list(s):
            out = out * chiral_ratio(m + f.charge, f.fugacity * z, ctx) \
                * chiral_ratio(f.charge - m, f.fugacity / z, ctx)
        return out

    assert np.allclose(integrand(z, m), integrand(1 / z, -m), rtol=1e-12, atol=0)


def test_v_consistency_and_calibration():
    ps = gen_balanced_params(1, "I-transform", n=2, profile=Profile(divisible=True))
    ctx = ids.default_context("v-consistency", 0.5)
    choice, trials = ids.calibrate_i_normalization(ps, ctx)
    assert choice == (True, True)
    assert trials[0]["weyl"] is False and abs(trials[0]["rel"] - 0.5) < 1e-9
    rep = ids.check_v_consistency(ps, ctx, normalization=choice)
    assert rep.passed and rep.rel_residual < 1e-9


def test_star_star_precondition_and_exploratory_flag():
    corners = [MultiSpin((Spin(0.1 * k, 0), Spin(0.1 * k + 1.0, 0))) for k in range(4)]
    with pytest.raises(PreconditionError):
        ids.check_star_star(1, (0.5, 0.5, 0.5, 0.4), corners, QContext(0.5))
    ctx = QContext(0.5, quad_points=16, sum_m_max=3, tail_tol=1e-13, rel_tol=1e-6)
    rep = ids.check_star_star(2, (0.5, 0.5, 0.5, 0.5), corners, ctx)
    assert "exploratory-ansatz" in rep.convention_flags
    assert rep.passed is False


def test_star_star_rank_one():
    ps = gen_balanced_params(6, "star-star")
    corners = [MultiSpin((Spin(f.phase, f.charge),)) for f in ps.flavors]
    rep = ids.check_star_star(1, ps.spectral, corners, ids.default_context("star-star", 0.5))
    assert rep.passed


def _tiny_ybe():
    ctx = QContext(0.1, quad_points=16, sum_m_max=6, tail_tol=1e-4, rel_tol=1e-2)
    pairs = (SpectralPair(0.01, -0.02), SpectralPair(0.015, 0.0), SpectralPair(-0.01, 0.02))
    corners = {k: Spin(0.7 * i + 0.2, (i % 3) - 1) for i, k in enumerate("abcdef")}
    return ctx, pairs, corners


def test_ybe_prefactor_cancels():
    ctx, pairs, corners = _tiny_ybe()
    base = ids.check_irf_ybe(pairs, corners, ctx, h_max=4)
    inj = ids.check_irf_ybe(pairs, corners, ctx, h_max=4,
                            prefactor=lambda t: 1.7 + 3 * t[0] - t[3] ** 2)
    assert abs(inj.rel_residual - base.rel_residual) < 1e-12
    assert "prefactor=injected" in inj.convention_flags


def test_ybe_is_deterministic():
    ctx, pairs, corners = _tiny_ybe()
    a = ids.check_irf_ybe(pairs, corners, ctx, h_max=4)
    b = ids.check_irf_ybe(pairs, corners, ctx, h_max=4)
    assert (a.lhs, a.rhs) == (b.lhs, b.rhs)


def test_ybe_budget_reports_partial_result():
    from artifact.errors import BudgetError
    ctx, pairs, corners = _tiny_ybe()
    with pytest.raises(BudgetError) as info:
        ids.check_irf_ybe(pairs, corners, ctx, h_max=4, budget_s=0.0)
    assert info.value.partial["stage"]


def test_classical_limit_degenerate_input():
    # alpha - eta = 1/2 and x + y = 0 make every q-ratio trivially 1
    res = ids.check_classical_limit(0.25, -0.25, [(0.3, 1)], [(-0.3, -1)])
    assert all(d < 1e-15 for d in res.deviations)


def test_classical_limit_seeded():
    res = ids.check_classical_limit(*ids.classical_limit_instance(1))
    assert res.report.passed
    assert all(b <= a for a, b in zip(res.deviations, res.deviations[1:]))


def test_positivity_scan_zero_charge():
    grid = ids.PositivityGrid()
    res = ids.positivity_scan(grid, QContext(0.5))
    assert len(res.rows) == 500 and res.zero_charge_positive
    again = ids.positivity_scan(grid, QContext(0.5))
    assert [r["value_re"] for r in res.rows] == [r["value_re"] for r in again.rows]
    assert {"min_phase", "max_phase"} <= set(res.sectors["0,0"])


def test_positivity_scan_records_errors_and_continues():
    from artifact.weights import PRINTED
    grid = ids.PositivityGrid(alphas=(0.0, 0.2), angles=(0.1, 1.0))
    res = ids.positivity_scan(grid, QContext(0.5), PRINTED)
    assert len(res.rows) == 4 and len(res.errors) == 4
    assert not res.zero_charge_positive


def test_doubling_change_helper():
    ps = gen_balanced_params(2, "six-flavor")
    ctx = ids.default_context("sum-integral", 0.5)
    _, _, change = ids.doubling_change(lambda c: ids.check_sum_integral(ps, c), ctx)
    assert change < 1e-10
