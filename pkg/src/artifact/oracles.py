"""Self-test oracles for the special-function kernel and the quadrature engine.

Each oracle compares a kernel routine against an independent formula and
returns (name, error, tolerance).  A routine that raises counts as failed.
"""
import cmath
import math


from .engine import circle_quadrature
from .qkernel import (QContext, chiral_ratio, gamma_fn, k_alpha, k_crossing,
                      qpoch_inf, qpoch_ratio)


def pentagonal(q, terms=200):
    """(q;q)_inf from Euler's pentagonal number series."""
    total = 1.0
    for k in range(1, terms):
        sign = -1.0 if k % 2 else 1.0
        total += sign * (q ** (k * (3 * k - 1) // 2) + q ** (k * (3 * k + 1) // 2))
    return total


def _pentagonal_checks(tail_tol):
    for q in (0.3, 0.5, 0.7, 0.9):
        ctx = QContext(q, tail_tol=tail_tol)
        yield f"pentagonal q={q}", lambda c=ctx, q=q: abs(qpoch_inf(q, c) - pentagonal(q)), 1e-12


def _gamma_recurrence():
    worst = 0.0
    for x in (0.3 + 0.2j, 1.7 - 0.9j, -2.5 + 0.1j, 4.2 + 3.0j):
        g1, g0 = gamma_fn(x + 1), gamma_fn(x)
        worst = max(worst, abs(g1 - x * g0) / abs(g1))
    worst = max(worst, abs(gamma_fn(0.5) - math.sqrt(math.pi)))
    return worst


def _telescoping(tail_tol):
    ctx = QContext(0.5, tail_tol=tail_tol)
    worst = 0.0
    for w in (0.3 + 0.4j, -0.7 + 0.1j, 1.9 - 0.5j):
        # (w;q)/(qw;q) = 1 - w
        worst = max(worst, abs(qpoch_ratio([(w, ctx.q * w)], ctx) - (1 - w)))
        # R_{k+2}(x) / R_k(x) = (1 - q^{k/2} x) / (1 - q^{1+k/2}/x)
        for k in (-3, 0, 2):
            lhs = chiral_ratio(k + 2, w, ctx) / chiral_ratio(k, w, ctx)
            rhs = (1 - ctx.q ** (k / 2) * w) / (1 - ctx.q ** (1 + k / 2) / w)
            worst = max(worst, abs(lhs / rhs - 1))
    return worst


def _k_symmetry(tail_tol):
    ctx = QContext(0.5, tail_tol=tail_tol)
    return max(abs(k_alpha(a, ctx) - k_alpha(-a, ctx)) for a in (0.01, 0.05, 0.1))


def _k_crossing_functional(tail_tol):
    ctx = QContext(0.5, tail_tol=tail_tol)
    worst = 0.0
    for th in (0.1, 0.2, 0.35):
        lhs = k_crossing(0.5 - th, ctx) / k_crossing(th, ctx)
        rhs = qpoch_ratio([(ctx.q ** (1 - 2 * th), ctx.q ** (2 * th))], ctx)
        worst = max(worst, abs(lhs / rhs - 1))
    return worst


def _orthogonality():
    worst = 0.0
    for k in range(-5, 6):
        val = circle_quadrature(lambda z, k=k: z ** k, 32)
        worst = max(worst, abs(val - (1.0 if k == 0 else 0.0)))
    return worst


def suite(tail_tol=1e-15):
    """List of (name, callable returning an error, tolerance)."""
    checks = list(_pentagonal_checks(tail_tol))
    checks += [
        ("gamma recurrence", _gamma_recurrence, 1e-12),
        ("telescoping", lambda: _telescoping(tail_tol), 1e-13),
        ("k(alpha) = k(-alpha)", lambda: _k_symmetry(tail_tol), 1e-12),
        ("crossing normalization", lambda: _k_crossing_functional(tail_tol), 1e-12),
        ("circle orthogonality", _orthogonality, 1e-14),
    ]
    return checks


def run(tail_tol=1e-15):
    """Evaluate every oracle; returns a list of dicts with name, error, tol, ok."""
    out = []
    for name, fn, tol in suite(tail_tol):
        try:
            err = float(fn())
            ok = bool(err < tol and not cmath.isnan(err))
            msg = ""
        except Exception as exc:  # a raising oracle is a named failure, not a crash
            err, ok, msg = math.inf, False, f"{type(exc).__name__}: {exc}"
        out.append({"name": name, "error": err, "tol": tol, "ok": ok, "message": msg})
    return out
