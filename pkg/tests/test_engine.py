import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact.engine import (FlavorParam, ParameterSet, Profile, ResidualReport,
                             bilateral_sum, circle_quadrature, gen_balanced_params,
                             pole_guard, sun_torus_integrate)
from artifact.errors import (EvaluationError, GenerationError, PoleOnContourError,
                             PreconditionError, TailDivergenceError)
from artifact.qkernel import QContext


@given(k=st.integers(-31, 31))
def test_circle_quadrature_orthogonality(k):
    val = circle_quadrature(lambda z: z ** k, 32)
    assert abs(val - (1.0 if k == 0 else 0.0)) < 1e-14


def test_circle_quadrature_analytic_integrand():
    # 1 / (1 - a z^-1) averages to 1 for |a| < 1
    val = circle_quadrature(lambda z: 1 / (1 - 0.5 / z), 128)
    assert abs(val - 1) < 1e-15


def test_circle_quadrature_reports_bad_node():
    with pytest.raises(EvaluationError) as info, np.errstate(all="ignore"):
        circle_quadrature(lambda z: 1 / (z - 1), 8)
    assert info.value.node == 0


def test_bilateral_sum_geometric():
    ctx = QContext(0.5, sum_m_max=60)
    val = bilateral_sum(lambda m: 0.5 ** abs(m), ctx)
    assert abs(val - 3.0) < 1e-15
    vec = bilateral_sum(lambda ms: 0.5 ** np.abs(ms), ctx, vectorized=True)
    assert vec == val


def test_bilateral_sum_tail_certificate():
    ctx = QContext(0.5, sum_m_max=10)
    with pytest.raises(TailDivergenceError):
        bilateral_sum(lambda m: 0.9 ** abs(m), ctx)


def test_torus_rank_two_separable():
    q = 0.3
    ctx = QContext(q, quad_points=16, sum_m_max=40)

    def f(z, m):
        return q ** np.abs(m[0]) * (1 + z[0] ** 2 + z[1]) * np.ones(z.shape[-1])

    val = sun_torus_integrate(f, 2, ctx)
    assert abs(val - (1 + q) / (1 - q)) < 1e-14
    assert abs(sun_torus_integrate(f, 2, ctx, weyl=True) - val / 2) < 1e-15


def test_torus_rank_one_is_point_evaluation():
    assert sun_torus_integrate(lambda z, m: 7.0 + 0 * z[0, :, 0], 1, QContext(0.5)) == 7.0


def test_pole_guard():
    ctx = QContext(0.5, sum_m_max=5)
    safe = ParameterSet("effective", [FlavorParam(0.7, 0.0, 1)])
    assert pole_guard(safe, ctx) > 1e-3
    # |a| = q^-1 puts the j = 2, m = -1 pole of the z family on the circle
    hit = ParameterSet("effective", [FlavorParam(0.7, 0.0, 0), FlavorParam(2.0, 0.3, 1)])
    with pytest.raises(PoleOnContourError) as info:
        pole_guard(hit, ctx)
    assert info.value.offender["flavor"] == 1
    assert info.value.offender["family"] == "z"


@given(seed=st.integers(0, 10 ** 6), q=st.floats(0.2, 0.8))
@settings(max_examples=40, deadline=None)
def test_generated_six_flavor_sets_are_balanced(seed, q):
    ps = gen_balanced_params(seed, "six-flavor", q=q)
    ps.check_balanced(q)
    assert all(f.modulus < 1 for f in ps.flavors)
    assert all(abs(c) <= 2 for c in ps.charges())


@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_generated_transform_sets(seed, n):
    ps = gen_balanced_params(seed, "I-transform", n=n, profile=Profile(divisible=True))
    ps.check_balanced(0.5)
    t, s = ps.split()
    assert sum(f.charge for f in t) % math.lcm(n, 2) == 0


def test_generation_is_deterministic():
    for kind in ("six-flavor", "star-triangle", "star-star", "ybe"):
        assert gen_balanced_params(3, kind) == gen_balanced_params(3, kind)
    st_set = gen_balanced_params(3, "star-triangle")
    assert abs(sum(st_set.spectral) - 0.5) < 1e-15
    assert abs(sum(gen_balanced_params(3, "star-star").spectral) - 2.0) < 1e-14


def test_generation_rejects_impossible_window():
    with pytest.raises(GenerationError):
        gen_balanced_params(1, "six-flavor", profile=Profile(bounds=(0.95, 0.99)))


def test_balancing_violations():
    ps = gen_balanced_params(1, "six-flavor")
    flav = list(ps.flavors)
    flav[0] = FlavorParam(flav[0].modulus * 1.01, flav[0].phase, flav[0].charge)
    with pytest.raises(PreconditionError):
        ParameterSet("six-flavor", flav).check_balanced(0.5)
    flav = list(ps.flavors)
    flav[0] = FlavorParam(flav[0].modulus, flav[0].phase, flav[0].charge + 1)
    with pytest.raises(PreconditionError):
        ParameterSet("six-flavor", flav).check_balanced(0.5)


def test_flavor_param_validation():
    with pytest.raises(ValueError):
        FlavorParam(0.0, 0.0)
    with pytest.raises(ValueError):
        FlavorParam(1.0, 0.0, 0.5)
    f = FlavorParam.from_fugacity(-0.5j, 2)
    assert abs(f.fugacity + 0.5j) < 1e-16 and f.charge == 2


def test_report_negligible_side_never_passes():
    ctx = QContext(0.5)
    rep = ResidualReport.build("x", 1e-40, 1e-40, ctx)
    assert not rep.passed and "negligible-side" in rep.convention_flags
    rep = ResidualReport.build("x", 1.0, 1.0 + 1e-12, ctx)
    assert rep.passed
    rec = rep.as_record()
    assert list(rec) == ["identity", "seed", "q", "params", "lhs_re", "lhs_im", "rhs_re",
                         "rhs_im", "abs_residual", "rel_residual", "convention_flags",
                         "settings", "runtime_ms", "pass"]
