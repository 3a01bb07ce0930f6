"""Two-sided residual checkers for the identities of the lattice model.

Every checker evaluates both sides independently and returns a
ResidualReport.  Integrals over one circle use the trapezoid rule on
ctx.quad_points nodes, charge sums run over |m| <= ctx.sum_m_max, and the
outermost retained terms are certified negligible.
"""
import cmath
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import (FlavorParam, ParameterSet, ResidualReport, certify_tails,
                     circle_nodes, pole_guard, sun_torus_integrate)
from .errors import (BudgetError, CalibrationError, DomainError, PoleError,
                     PreconditionError)
from .qkernel import QContext, _log_qpoch, auto_truncation, chiral_ratio
from .weights import (CALIBRATED, PRINTED, STAR_TRIANGLE_CANDIDATES, SYMMETRIC, Spin,
                      edge_weight, face_weight_grid, gamma_weight_w,
                      classical_q_weight, self_weight, boltzmann_w)

DEFAULT_BUDGET_S = 120.0
YBE_BUDGET_S = 1800.0

# accepted settings per identity: (quad_points, rel_tol, tail_tol); the charge
# cutoff grows with q because the summands decay roughly like q^|m|
SETTINGS = {
    "sum-integral": (1024, 1e-8, 1e-13),
    "star-triangle": (1024, 1e-6, 1e-13),
    "I-transform": (512, 1e-6, 1e-13),
    "v-consistency": (512, 1e-9, 1e-13),
    "star-star": (1024, 1e-6, 1e-13),
    "irf-ybe": (64, 1e-3, 1e-13),
}


def default_context(identity, q, **overrides):
    """QContext with the accepted settings for one identity at nome q."""
    if identity not in SETTINGS:
        raise ValueError(f"unknown identity {identity!r}")
    nodes, rel_tol, tail_tol = SETTINGS[identity]
    mmax = 12 if identity == "irf-ybe" else math.ceil(40.0 / -math.log(q))
    opts = {"quad_points": nodes, "rel_tol": rel_tol, "tail_tol": tail_tol,
            "sum_m_max": mmax}
    opts.update({k: v for k, v in overrides.items() if v is not None})
    return QContext(q, **opts)


class _Budget:
    def __init__(self, identity, seconds):
        self.identity = identity
        self.seconds = seconds
        self.started = time.perf_counter()

    def check(self, stage, partial=None):
        spent = time.perf_counter() - self.started
        if self.seconds is not None and spent > self.seconds:
            raise BudgetError(
                f"{self.identity}: wall-clock budget of {self.seconds:.0f} s exceeded "
                f"after {stage} ({spent:.1f} s)",
                partial={"stage": stage, "elapsed_s": spent, **(partial or {})})


def _ring_sum(by_m, ctx, tol, what):
    """Sum a -M..M charge axis in symmetric order after certifying its tails."""
    certify_tails(by_m, tol, what)
    mmax = (len(by_m) - 1) // 2
    total = by_m[mmax]
    for m in range(1, mmax + 1):
        total = total + (by_m[mmax + m] + by_m[mmax - m])
    return complex(total)


def _circle_grid(ctx):
    z = circle_nodes(ctx.quad_points)[None, :]
    m = np.arange(-ctx.sum_m_max, ctx.sum_m_max + 1)[:, None]
    return z, m


# ---------------------------------------------------------------- star-triangle


def _edge_flavors(couplings_and_spins):
    """Effective flavors seen by the integrated spin: (|c|, charge of the far spin)."""
    return ParameterSet("effective", [FlavorParam(abs(c), 0.0, s.charge)
                                      for c, s in couplings_and_spins])


def check_star_triangle(alpha, beta, gamma, spins, ctx, convention=PRINTED,
                        budget_s=DEFAULT_BUDGET_S, seed=None, params=None):
    """Star-triangle relation for spins (x_i, x_j, x_k).

    LHS = sum_m int [d_m z] W_{eta-gamma}(z, x_i) W_{eta-beta}(x_j, z) W_{eta-alpha}(x_k, z)
    RHS = W_alpha(x_i, x_j) W_beta(x_k, x_i) W_gamma(x_k, x_j)
    with [d_m z] = S(z|m) dz / (4 pi i z).  Angles are in the convention's own
    units, so alpha + beta + gamma must equal its crossing value eta.
    """
    started = time.perf_counter()
    budget = _Budget("star-triangle", budget_s)
    eta = convention.eta
    if abs(alpha + beta + gamma - eta) > 1e-12:
        raise PreconditionError(
            f"spectral values must sum to eta = {eta:g}, got {alpha + beta + gamma!r}")
    si, sj, sk = spins
    thetas = (eta - gamma, eta - beta, eta - alpha)
    q = ctx.q
    pole_guard(_edge_flavors([(convention.coupling(t, q), s)
                              for t, s in zip(thetas, (si, sj, sk))]), ctx)
    z, m = _circle_grid(ctx)
    vals = self_weight(z, m, q) / 2.0
    for theta, s in zip(thetas, (si, sj, sk)):
        vals = vals * edge_weight(theta, z, m, s.fugacity, s.charge, ctx, convention)
    budget.check("integrand")
    lhs = _ring_sum(vals.mean(axis=1), ctx, ctx.tail_tol, "star-triangle charge sum")
    rhs = (boltzmann_w(alpha, eta, si, sj, ctx, convention)
           * boltzmann_w(beta, eta, sk, si, ctx, convention)
           * boltzmann_w(gamma, eta, sk, sj, ctx, convention))
    return ResidualReport.build(
        "star-triangle", lhs, rhs, ctx, convention.flags(), started, seed=seed,
        params=params or {"spectral": [alpha, beta, gamma],
                          "spins": [[s.angle, s.charge] for s in spins]})


def star_triangle_instance(params, convention):
    """Spectral values and spins of a star-triangle ParameterSet in a convention's units."""
    alpha, beta, gamma = (convention.spectral(x) for x in params.spectral)
    spins = [Spin(f.phase, f.charge) for f in params.flavors]
    return alpha, beta, gamma, spins


def calibrate_star_triangle(param_sets, ctx, candidates=STAR_TRIANGLE_CANDIDATES):
    """First convention, in a fixed order, under which every given set passes.

    Returns (convention, trials) with one record per attempted candidate.
    Raises CalibrationError if none passes.
    """
    trials = []
    for conv in candidates:
        worst = 0.0
        try:
            for ps in param_sets:
                a, b, g, spins = star_triangle_instance(ps, conv)
                rep = check_star_triangle(a, b, g, spins, ctx, conv, seed=ps.seed)
                worst = max(worst, rep.rel_residual)
                if not rep.passed:
                    break
            else:
                trials.append({"convention": conv.flags(), "worst": worst, "selected": True})
                return conv, trials
        except (DomainError, PoleError) as exc:
            trials.append({"convention": conv.flags(), "error": str(exc), "selected": False})
            continue
        trials.append({"convention": conv.flags(), "worst": worst, "selected": False})
    raise CalibrationError(f"no star-triangle convention passes: {trials}")


# ------------------------------------------------------------ six-flavor identity


def check_sum_integral(params, ctx, seed=None):
    """Six-flavor sum/integral evaluation formula.

    sum_m oint prod_i R_{n_i+m}(a_i z) R_{n_i-m}(a_i/z) S(z|m) z^{-6m} dz/(2 pi i z)
        = 2 prod_i a_i^{-n_i} prod_{i<j} R_{n_i+n_j}(a_i a_j)
    for prod a_i = q and sum n_i = 0.
    """
    started = time.perf_counter()
    params.check_balanced(ctx.q)
    pole_guard(params, ctx)
    a = params.fugacities()
    n = params.charges()
    z, m = _circle_grid(ctx)
    vals = self_weight(z, m, ctx.q) * z ** (-6 * m)
    for ai, ni in zip(a, n):
        vals = vals * chiral_ratio(ni + m, ai * z, ctx) * chiral_ratio(ni - m, ai / z, ctx)
    lhs = _ring_sum(vals.mean(axis=1), ctx, ctx.tail_tol, "six-flavor charge sum")
    rhs = 2.0 + 0j
    for i in range(6):
        rhs *= a[i] ** (-int(n[i]))
        for j in range(i + 1, 6):
            rhs *= chiral_ratio(int(n[i] + n[j]), a[i] * a[j], ctx)
    return ResidualReport.build("sum-integral", lhs, rhs, ctx, [], started,
                                params=params.as_dict(), seed=seed if seed is not None
                                else params.seed)


# ------------------------------------------------------------------- integral I


def _lin_log(f, q):
    """i pi + (1/2) ln q - log x, using the flavor's own (unwrapped) logarithm."""
    return complex(0.5 * math.log(q), math.pi) - f.log


def vector_factor(z, m, q):
    """prod_{j<k} q^{-|d|/2} (1 - q^{|d|/2} z_j/z_k)(1 - q^{|d|/2} z_k/z_j), d = m_j - m_k.

    Axis 0 of z and m enumerates the components.
    """
    n = z.shape[0]
    out = 1.0
    for j in range(n):
        for k in range(j + 1, n):
            h = np.abs(m[j] - m[k]) / 2.0
            qh = q ** h
            u = z[j] / z[k]
            out = out * (1.0 - qh * u) * (1.0 - qh / u) / qh
    return out


def i_prefactor(t, s, n, q):
    """exp(sum_j (n tau_j / 2) L(t_j) + (n kappa_j / 2) L(s_j)), L(x) = i pi + ln(q)/2 - log x."""
    expo = sum(0.5 * n * f.charge * _lin_log(f, q) for f in list(t) + list(s))
    return cmath.exp(expo)


def eval_I(t, s, n, ctx, weyl=True, two_pi_i=True, tol=None):
    """Integral I over SU(n) with 2n t-flavors and 2n s-flavors.

    Flavors (t_j, tau_j) enter as R_{tau_j + m_k}(t_j z_k) and (s_j, kappa_j)
    as R_{kappa_j - m_k}(s_j / z_k), with the symmetric vector factor, the
    compensating monomials z_k^{-2n m_k} and the prefactor ``i_prefactor``.
    n = 1 has no integral: the integrand at z = 1, m = 0.
    """
    t, s = list(t), list(s)
    if len(t) != 2 * n or len(s) != 2 * n:
        raise ValueError(f"I with n={n} needs {2 * n} t-flavors and {2 * n} s-flavors")
    q = ctx.q

    def integrand(z, m):
        vals = vector_factor(z, m, q) * np.prod(z ** (-2 * n * m), axis=0)
        for f in t:
            vals = vals * np.prod(chiral_ratio(f.charge + m, f.fugacity * z, ctx), axis=0)
        for f in s:
            vals = vals * np.prod(chiral_ratio(f.charge - m, f.fugacity / z, ctx), axis=0)
        return vals

    total = sun_torus_integrate(integrand, n, ctx, weyl=weyl, two_pi_i=two_pi_i, tol=tol)
    return i_prefactor(t, s, n, q) * total


def flavor_pair_block(t, s, ctx):
    """prod_{j,k} exp(((tau_j+kappa_k)/2) (L(t_j) + L(s_k) - i pi - ln(q)/2)) R_{tau_j+kappa_k}(t_j s_k)."""
    q = ctx.q
    base = complex(0.5 * math.log(q), math.pi)
    out = 1.0 + 0j
    for f in t:
        for g in s:
            k = f.charge + g.charge
            out *= cmath.exp(0.5 * k * (base - f.log - g.log))
            out *= chiral_ratio(k, f.fugacity * g.fugacity, ctx)
    return out


def tilde_flavors(flavors, n):
    """Dual flavors: log x~_j = (sum log x)/n - log x_j, charge~_j = (sum charge)/n - charge_j."""
    total_log = sum(f.log for f in flavors)
    total_ch = sum(f.charge for f in flavors)
    if total_ch % n:
        raise PreconditionError(
            f"dual charges are fractional: charge sum {total_ch} is not divisible by {n}")
    out = []
    for f in flavors:
        lg = total_log / n - f.log
        out.append(FlavorParam(math.exp(lg.real), lg.imag, total_ch // n - f.charge))
    return out


def tilde_params(params):
    t, s = params.split()
    return replace(params, flavors=tuple(tilde_flavors(t, params.n) + tilde_flavors(s, params.n)))


def check_we7_transformation(params, ctx, weyl=True, two_pi_i=True, seed=None,
                             budget_s=DEFAULT_BUDGET_S):
    """I(t, s) against prod_{j,k} flavor-pair block * I(t~, s~)."""
    started = time.perf_counter()
    budget = _Budget("I-transform", budget_s)
    n = params.n
    params.check_balanced(ctx.q)
    dual = tilde_params(params)
    if n > 1:
        pole_guard(params, ctx)
        pole_guard(dual, ctx)
    t, s = params.split()
    td, sd = dual.split()
    lhs = eval_I(t, s, n, ctx, weyl, two_pi_i)
    budget.check("left side", {"lhs": [lhs.real, lhs.imag]})
    rhs = flavor_pair_block(t, s, ctx) * eval_I(td, sd, n, ctx, weyl, two_pi_i)
    flags = [f"weyl={weyl}", f"two_pi_i={two_pi_i}", "vector=symmetric", "logs=linear"]
    return ResidualReport.build("I-transform", lhs, rhs, ctx, flags, started,
                                params=params.as_dict(),
                                seed=seed if seed is not None else params.seed)


# -------------------------------------------------------------------- V-function


def eval_V(t, s, ctx, form="symmetric"):
    """V-function: sum_m int [d_m z] prod_{i<=4} R_{m+tau_i}(t_i z) R_{tau_i-m}(t_i/z) (same for s).

    form="symmetric" adds the monomial z^{-8m} and the prefactor
    prod (-q^{1/2}/x)^{charge} (integer powers) that make it equal to I at
    n=2; form="printed" is the bare sum/integral.
    """
    if form not in ("symmetric", "printed"):
        raise ValueError(f"unknown V form {form!r}")
    t, s = list(t), list(s)
    if len(t) != 4 or len(s) != 4:
        raise ValueError("V takes four t-flavors and four s-flavors")
    q = ctx.q
    z, m = _circle_grid(ctx)
    vals = self_weight(z, m, q) / 2.0
    for f in t + s:
        x = f.fugacity
        vals = vals * chiral_ratio(m + f.charge, x * z, ctx) * chiral_ratio(f.charge - m, x / z, ctx)
    pref = 1.0 + 0j
    if form == "symmetric":
        vals = vals * z ** (-8 * m)
        for f in t + s:
            pref *= (-math.sqrt(q) / f.fugacity) ** f.charge
    return pref * _ring_sum(vals.mean(axis=1), ctx, ctx.tail_tol, "V charge sum")


I_NORMALIZATIONS = ((False, True), (True, True), (False, False), (True, False))


def calibrate_i_normalization(params, ctx):
    """Choose (weyl, two_pi_i) so that I at n=2 reproduces V on one parameter set.

    Candidates are tried in a fixed order; I is evaluated once per candidate.
    """
    t, s = params.split()
    v = eval_V(t, s, ctx)
    trials = []
    for weyl, tpi in I_NORMALIZATIONS:
        val = eval_I(t, s, 2, ctx, weyl=weyl, two_pi_i=tpi)
        rel = abs(val - v) / max(abs(val), abs(v))
        trials.append({"weyl": weyl, "two_pi_i": tpi, "rel": rel})
        if rel < 1e-6:
            return (weyl, tpi), trials
    raise CalibrationError(f"no normalization of I matches V: {trials}")


def check_v_consistency(params, ctx, normalization=(True, True), seed=None):
    """eval_I at n=2 against eval_V on the same flavors."""
    started = time.perf_counter()
    if params.n != 2:
        raise PreconditionError("the V cross-check needs an n=2 I-transform set")
    params.check_balanced(ctx.q)
    pole_guard(params, ctx)
    weyl, tpi = normalization
    t, s = params.split()
    lhs = eval_I(t, s, 2, ctx, weyl=weyl, two_pi_i=tpi)
    rhs = eval_V(t, s, ctx)
    return ResidualReport.build("v-consistency", lhs, rhs, ctx,
                                [f"weyl={weyl}", f"two_pi_i={tpi}"], started,
                                params=params.as_dict(),
                                seed=seed if seed is not None else params.seed)


# --------------------------------------------------------------------- star-star


def _star_n1(angles, spins, ctx, conv):
    z, m = _circle_grid(ctx)
    vals = self_weight(z, m, ctx.q) / 2.0
    for theta, sp in zip(angles, spins):
        vals = vals * edge_weight(theta, z, m, sp.fugacity, sp.charge, ctx, conv)
    return _ring_sum(vals.mean(axis=1), ctx, ctx.tail_tol, "star charge sum")


def _s_multi_grid(z, X, ctx):
    """Multi-spin self weight on arrays with the component axis first."""
    n = z.shape[0]
    q = ctx.q
    log_ratio = 0.0
    for j in range(n):
        for k in range(n):
            if j == k:
                continue
            num = q ** (1 + (X[j] - X[k]) / 2.0) * z[k] / z[j]
            den = q ** ((X[k] - X[j]) / 2.0) * z[j] / z[k]
            wmax = max(float(np.abs(num).max()), float(np.abs(den).max()))
            local = ctx.with_(product_truncation=max(
                int(ctx.product_truncation), auto_truncation(q, ctx.tail_tol, wmax)))
            ln, zero_n = _log_qpoch(num, local)
            ld, zero_d = _log_qpoch(den, local)
            if np.any(zero_n) or np.any(zero_d):
                raise PoleError("multi-spin self weight hits coincident components")
            log_ratio = log_ratio + ln - ld
    return 0.5 * np.exp(-log_ratio)


def _cross_pair_edge(theta, x, X, y, Y, ctx, conv):
    """Exploratory multi-spin edge: prod_{i,j} R_{X_i+Y_j}(c x_i y_j) R_{-X_i-Y_j}(c/(x_i y_j)) (x_i y_j)^{-(X_i+Y_j)}."""
    c = conv.coupling(theta, ctx.q)
    out = 1.0
    for i in range(x.shape[0]):
        for j in range(len(y)):
            u = x[i] * y[j]
            k = X[i] + Y[j]
            out = out * chiral_ratio(k, c * u, ctx) * chiral_ratio(-k, c / u, ctx) * u ** (-k)
    return out / conv.norm(theta, ctx)


def _star_multi(angles, corners, ctx, conv):
    n = corners[0].n
    nodes = circle_nodes(ctx.quad_points)
    ms = np.arange(-ctx.sum_m_max, ctx.sum_m_max + 1)
    # shift each coordinate by a different fraction of a step so components never coincide
    grids = [circle_nodes(ctx.quad_points, shift=k / (n + 1)) for k in range(n)]
    zg = np.stack(np.meshgrid(*grids, indexing="ij")).reshape(n, -1)[:, None, :]
    mg = np.stack(np.meshgrid(*([ms] * n), indexing="ij")).reshape(n, -1)[:, :, None]
    vals = _s_multi_grid(zg, mg, ctx)
    for theta, corner in zip(angles, corners):
        vals = vals * _cross_pair_edge(theta, zg, mg, corner.fugacities(), corner.charges(),
                                       ctx, conv)
    by_charge = vals.mean(axis=-1)
    shell = np.max(np.abs(mg[:, :, 0]), axis=0) == ctx.sum_m_max
    peak = np.abs(by_charge).max()
    tail = np.abs(by_charge[shell]).max() / peak if peak > 0 else 0.0
    return complex(by_charge.sum()), float(tail), nodes.size


def check_star_star(n, abgd, corners, ctx, convention=SYMMETRIC, seed=None,
                    budget_s=DEFAULT_BUDGET_S):
    """Star-star relation for four corners (a, b, c, d) and angles summing to 2.

    The angles are halved to crossing units (alpha' + ... + delta' = 1) and
    mapped to the convention.  With Star(p, q, r, s) the integrated four-star
    W_p(z, a) W_q(z, b) W_r(z, c) W_s(z, d):

      W_{eta-gamma-delta}(d, c) W_{eta-beta-gamma}(b, c) Star(alpha, beta, gamma, delta)
        = W_{eta-gamma-delta}(a, b) W_{eta-beta-gamma}(a, d) Star(gamma, delta, alpha, beta)

    n=1 uses the single-spin weights.  n >= 2 uses an exploratory cross-pair
    edge on the full n-torus with s_multi as the self weight; the report is
    flagged and its residual is informative only.
    """
    started = time.perf_counter()
    budget = _Budget("star-star", budget_s)
    if abs(sum(abgd) - 2.0) > 1e-13:
        raise PreconditionError(f"star-star angles must sum to 2, got {sum(abgd)!r}")
    al, be, ga, de = (convention.spectral(x / 2.0) for x in abgd)
    eta = convention.eta
    a, b, c, d = corners
    flags = convention.flags() + ["angles=halved"]
    if n == 1:
        a, b, c, d = (x.components[0] if hasattr(x, "components") else x for x in corners)
        th1, th2 = eta - ga - de, eta - be - ga
        for theta in (al, be, ga, de):
            pole_guard(ParameterSet("effective", [FlavorParam(abs(convention.coupling(theta, ctx.q)), 0.0, sp.charge)
                                                  for sp in (a, b, c, d)]), ctx)
        left = _star_n1((al, be, ga, de), (a, b, c, d), ctx, convention)
        budget.check("left star")
        right = _star_n1((ga, de, al, be), (a, b, c, d), ctx, convention)
        w = lambda th, x, y: boltzmann_w(th, eta, x, y, ctx, convention)
        lhs = w(th1, d, c) * w(th2, b, c) * left
        rhs = w(th1, a, b) * w(th2, a, d) * right
        extra = {}
    else:
        if any(x.n != n for x in corners):
            raise ValueError("all corners must have n components")
        flags.append("exploratory-ansatz")
        th1, th2 = eta - ga - de, eta - be - ga
        left, tail_l, _ = _star_multi((al, be, ga, de), corners, ctx, convention)
        budget.check("left star")
        right, tail_r, _ = _star_multi((ga, de, al, be), corners, ctx, convention)

        def wm(theta, x, y):
            val = _cross_pair_edge(theta, x.fugacities()[:, None], x.charges()[:, None],
                                   y.fugacities(), y.charges(), ctx, convention)
            return complex(np.asarray(val).reshape(-1)[0])

        lhs = wm(th1, d, c) * wm(th2, b, c) * left
        rhs = wm(th1, a, b) * wm(th2, a, d) * right
        extra = {"tail_left": tail_l, "tail_right": tail_r}
    rep = ResidualReport.build(
        "star-star", lhs, rhs, ctx, flags, started, seed=seed,
        params={"n": n, "spectral": list(abgd)}, extra=extra)
    if n > 1:
        rep.passed = False
    return rep


# ----------------------------------------------------------------- IRF Yang-Baxter


@dataclass(frozen=True)
class YBEInstance:
    """Spectral pairs (t4, t1), (t6, t3), (t2, t5) and corner spins a..f."""

    pairs: tuple
    corners: dict

    @classmethod
    def from_params(cls, params):
        t1, t2, t3, t4, t5, t6 = params.spectral
        from .weights import SpectralPair
        pairs = (SpectralPair(t4, t1), SpectralPair(t6, t3), SpectralPair(t2, t5))
        corners = {k: Spin(f.phase, f.charge) for k, f in zip("abcdef", params.flavors)}
        return cls(pairs, corners)


def check_irf_ybe(pairs, corners, ctx, h_max=8, convention=SYMMETRIC, layout="thick-line",
                  prefactor=None, budget_s=YBE_BUDGET_S, tail_tol=None, seed=None):
    """IRF Yang-Baxter equation with the central spin h integrated on both sides.

    With P1, P2, P3 the three spectral pairs and R_{PQ} the face weight with
    t = (P.first, P.second, Q.first, Q.second):

      LHS = sum_H int [d_H h] R_{P1P2}(a,b,h,c) R_{P2P3}(c,d,h,e) R_{P3P1}(e,f,h,a)
      RHS = sum_H int [d_H h] R_{P2P3}(b,h,a,f) R_{P3P1}(d,h,c,b) R_{P1P2}(f,h,e,d)

    [d_H h] is the single-spin measure.  The residual is |LHS/RHS - 1|, so a
    face prefactor depending only on the spectral values cancels.  Face
    charge sums are certified at ``tail_tol`` (default rel_tol/10); the outer
    sum over H, whose cutoff h_max is fixed, only needs its last shell below
    rel_tol.
    """
    started = time.perf_counter()
    budget = _Budget("irf-ybe", budget_s)
    tol = ctx.rel_tol / 10 if tail_tol is None else tail_tol
    p1, p2, p3 = pairs
    t12 = (p1.first, p1.second, p2.first, p2.second)
    t23 = (p2.first, p2.second, p3.first, p3.second)
    t31 = (p3.first, p3.second, p1.first, p1.second)
    nodes = circle_nodes(ctx.quad_points)
    hs = np.arange(-h_max, h_max + 1)
    hh = np.tile(nodes, hs.size)
    HH = np.repeat(hs, nodes.size)
    h = (hh, HH)
    meas = self_weight(hh, HH, ctx.q) / 2.0
    cn = corners

    def face(t, quad):
        return face_weight_grid(t, quad, ctx, convention, layout, prefactor, tol)

    def side(faces, label):
        vals = meas.copy()
        for t, quad in faces:
            vals = vals * face(t, quad)
            budget.check(label)
        by_h = vals.reshape(hs.size, nodes.size).mean(axis=1)
        return _ring_sum(by_h, ctx, ctx.rel_tol, f"{label} outer charge sum")

    lhs = side([(t12, (cn["a"], cn["b"], h, cn["c"])),
                (t23, (cn["c"], cn["d"], h, cn["e"])),
                (t31, (cn["e"], cn["f"], h, cn["a"]))], "left side")
    budget.check("left side", {"lhs": [lhs.real, lhs.imag]})
    rhs = side([(t23, (cn["b"], h, cn["a"], cn["f"])),
                (t31, (cn["d"], h, cn["c"], cn["b"])),
                (t12, (cn["f"], h, cn["e"], cn["d"]))], "right side")
    rel = abs(lhs / rhs - 1.0) if rhs != 0 else math.inf
    flags = convention.flags() + [f"layout={layout}", "measure=single-spin"]
    if prefactor is not None:
        flags.append("prefactor=injected")
    return ResidualReport.build(
        "irf-ybe", lhs, rhs, ctx, flags, started, rel=rel, seed=seed,
        params={"pairs": [[p.first, p.second] for p in pairs],
                "corners": {k: [v.angle, v.charge] for k, v in cn.items()},
                "h_max": h_max})


# ---------------------------------------------------------------- classical limit


@dataclass
class LimitResult:
    ks: list
    deviations: list
    report: ResidualReport


def classical_limit_instance(seed, eta=-0.25):
    """Seeded (alpha, eta, x, y) for the single-component classical limit."""
    rng = np.random.default_rng([int(seed), 7])
    alpha = float(rng.uniform(0.05, 0.2))
    x = [(float(rng.uniform(-0.5, 0.5)), int(rng.integers(-2, 3)))]
    y = [(float(rng.uniform(-0.5, 0.5)), int(rng.integers(-2, 3)))]
    return alpha, eta, x, y


def check_classical_limit(alpha, eta, x, y, ks=range(4, 11), tol=1e-2, seed=None):
    """Deviation of the (1-q)-rescaled q-weight from the gamma weight along q = 1 - 2^-k.

    Passes iff the deviations never increase and the last one is below tol.
    x and y are lists of real pairs (x_i, X_i).
    """
    started = time.perf_counter()
    target = gamma_weight_w(alpha, eta, x, y)
    devs = []
    value = None
    ctx = None
    for k in ks:
        ctx = QContext(1.0 - 2.0 ** (-k), tail_tol=1e-14, rel_tol=tol)
        value = classical_q_weight(alpha, eta, x, y, ctx)
        devs.append(abs(value / target - 1.0))
    monotone = all(b <= a for a, b in zip(devs, devs[1:]))
    rep = ResidualReport.build(
        "classical-limit", value, target, ctx, [], started, rel=devs[-1], seed=seed,
        params={"alpha": alpha, "eta": eta, "x": [list(p) for p in x], "y": [list(p) for p in y]},
        extra={"ks": list(ks), "deviations": devs, "monotone": monotone})
    rep.passed = bool(monotone and devs[-1] < tol)
    return LimitResult(list(ks), devs, rep)


# ----------------------------------------------------------------- positivity scan


@dataclass(frozen=True)
class PositivityGrid:
    alphas: tuple = (-0.1, -0.05, 0.0, 0.05, 0.1)
    angles: tuple = tuple(2 * math.pi * (k + 0.5) / 10 for k in range(10))
    charges: tuple = (0,)
    eta: float = -0.5

    def __post_init__(self):
        for v in list(self.alphas) + list(self.angles) + [self.eta]:
            if not math.isfinite(v):
                raise ValueError("positivity grid values must be finite")


@dataclass
class ScanResult:
    rows: list
    sectors: dict
    zero_charge_positive: bool
    errors: list = field(default_factory=list)


POSITIVE_TOL = 1e-10


def positivity_scan(grid, ctx, convention=CALIBRATED):
    """Evaluate the edge weight on a grid of spins, angles and charges.

    Real positivity (|Im| / |Re| < 1e-10 and Re > 0) is asserted on the
    zero-charge slice; other charge sectors only record phase statistics.
    """
    rows, errors = [], []
    sectors = {}
    for alpha in grid.alphas:
        for ai in grid.angles:
            for aj in grid.angles:
                for mi in grid.charges:
                    for mj in grid.charges:
                        point = {"q": ctx.q, "alpha": alpha, "angle_i": ai, "angle_j": aj,
                                 "m_i": mi, "m_j": mj}
                        try:
                            val = boltzmann_w(alpha, grid.eta, Spin(ai, mi), Spin(aj, mj),
                                              ctx, convention)
                        except Exception as exc:  # recorded per point, the scan continues
                            errors.append({**point, "error": f"{type(exc).__name__}: {exc}"})
                            continue
                        phase = cmath.phase(val)
                        positive = bool(val.real > 0 and abs(val.imag) < POSITIVE_TOL * abs(val.real))
                        rows.append({**point, "value_re": val.real, "value_im": val.imag,
                                     "phase": phase, "positive": positive})
                        sec = sectors.setdefault(f"{mi},{mj}", {"min_phase": math.inf,
                                                                "max_phase": -math.inf,
                                                                "count": 0, "positive": 0})
                        sec["min_phase"] = min(sec["min_phase"], phase)
                        sec["max_phase"] = max(sec["max_phase"], phase)
                        sec["count"] += 1
                        sec["positive"] += positive
    zero = [r for r in rows if r["m_i"] == 0 and r["m_j"] == 0]
    zero_ok = bool(zero) and all(r["positive"] for r in zero) and not any(
        e["m_i"] == 0 and e["m_j"] == 0 for e in errors)
    return ScanResult(rows, sectors, zero_ok, errors)


# ----------------------------------------------------------------- truncation check


def doubling_change(evaluate, ctx):
    """Relative change of (lhs, rhs) when quad_points and sum_m_max are doubled.

    ``evaluate(ctx)`` returns a ResidualReport; the result is
    (report at ctx, report at ctx.doubled(), max relative change of a side).
    """
    base = evaluate(ctx)
    fine = evaluate(ctx.doubled())
    change = max(abs(fine.lhs - base.lhs) / abs(fine.lhs),
                 abs(fine.rhs - base.rhs) / abs(fine.rhs))
    return base, fine, float(change)
