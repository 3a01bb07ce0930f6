"""Scalar special functions on the real nome slice 0 < q < 1.

Infinite q-Pochhammer symbols are evaluated as sums of log1p terms, so long
products never overflow and each call certifies its own truncation error.
"""
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from .errors import DomainError, PoleError, TruncationError

# |w| up to which an automatically chosen truncation is certified
AUTO_W_MAX = 4.0
# a denominator factor smaller than this counts as a pole
POLE_TOL = 1e-13


def auto_truncation(q, tail_tol, w_max=AUTO_W_MAX):
    """Smallest N with w_max * q**N / (1 - q) below tail_tol / 2."""
    bound = 0.5 * tail_tol * (1.0 - q) / w_max
    return max(1, math.ceil(math.log(bound) / math.log(q)))


@dataclass(frozen=True)
class QContext:
    """Nome, truncation orders and tolerances shared by every evaluation.

    ``product_truncation=None`` picks the smallest number of Pochhammer
    factors whose tail bound stays below ``tail_tol`` for |w| <= 4.
    """

    q: float
    product_truncation: int | None = None
    tail_tol: float = 1e-15
    sum_m_max: int = 60
    quad_points: int = 256
    rel_tol: float = 1e-8

    def __post_init__(self):
        q = self.q
        if not (isinstance(q, (int, float)) and math.isfinite(q) and 0.0 < q < 1.0):
            raise ValueError(f"nome must satisfy 0 < q < 1, got {q!r}")
        if not (self.tail_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.product_truncation is None:
            object.__setattr__(self, "product_truncation",
                               auto_truncation(q, self.tail_tol))
        if int(self.product_truncation) < 1:
            raise ValueError("product_truncation must be >= 1")
        if self.quad_points < 4 or self.quad_points % 2:
            raise ValueError("quad_points must be even and >= 4")
        if self.sum_m_max < 1:
            raise ValueError("sum_m_max must be >= 1")

    def with_(self, **changes):
        return replace(self, **changes)

    def doubled(self):
        """Same context with twice the nodes and twice the charge cutoff."""
        return replace(self, quad_points=2 * self.quad_points,
                       sum_m_max=2 * self.sum_m_max)

    def as_dict(self):
        return {
            "q": self.q,
            "product_truncation": int(self.product_truncation),
            "tail_tol": self.tail_tol,
            "sum_m_max": self.sum_m_max,
            "quad_points": self.quad_points,
            "rel_tol": self.rel_tol,
        }


def _log_qpoch(w, ctx):
    """log (w;q)_N as complex array plus a mask of exactly vanishing products."""
    w = np.asarray(w, dtype=complex)
    n_prod = int(ctx.product_truncation)
    wmax = float(np.max(np.abs(w))) if w.size else 0.0
    tail = wmax * ctx.q ** n_prod / (1.0 - ctx.q)
    if not tail < ctx.tail_tol:
        raise TruncationError(
            f"tail bound {tail:.3e} exceeds tail_tol {ctx.tail_tol:.1e} "
            f"with {n_prod} factors (|w| = {wmax:.3g})")
    powers = ctx.q ** np.arange(n_prod)
    terms = w[..., None] * powers
    zero = np.any(terms == 1.0, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log1p(-terms)
    logs[zero] = 0.0
    return logs.sum(axis=-1), zero


def qpoch_inf(w, ctx):
    """Infinite q-Pochhammer symbol (w;q)_inf with a certified tail.

    Accepts scalars or arrays; a retained factor that is exactly zero makes
    the result exactly zero.
    """
    logs, zero = _log_qpoch(w, ctx)
    out = np.exp(logs)
    out = np.where(zero, 0.0, out)
    if np.ndim(out) == 0:
        return complex(out)
    return out


def _check_poles(w_den, ctx, label=0):
    w = np.asarray(w_den, dtype=complex)
    powers = ctx.q ** np.arange(int(ctx.product_truncation))
    gaps = np.abs(1.0 - w[..., None] * powers)
    if gaps.size and gaps.min() < POLE_TOL:
        flat = np.unravel_index(np.argmin(gaps), gaps.shape)
        level = int(flat[-1])
        raise PoleError(
            f"denominator ({complex(w.flat[0]) if w.ndim == 0 else 'array'};q) "
            f"vanishes at factor {level} of pair {label}",
            index=(label, level))


def qpoch_ratio(pairs, ctx):
    """Product of (num;q)_inf / (den;q)_inf over (num, den) pairs.

    The quotient is assembled once in log space, so huge or tiny individual
    symbols do not overflow.
    """
    total = 0j
    for idx, (num, den) in enumerate(pairs):
        _check_poles(den, ctx, idx)
        log_num, zero = _log_qpoch(num, ctx)
        if np.any(zero):
            return 0j
        log_den, _ = _log_qpoch(den, ctx)
        total = total + log_num - log_den
    return complex(np.exp(total))


def _ratio_or_nan(num, den, ctx):
    """(num;q)_N / (den;q)_N elementwise, NaN where a denominator factor vanishes."""
    powers = ctx.q ** np.arange(int(ctx.product_truncation))
    pole = np.abs(1.0 - den[..., None] * powers).min(axis=-1) < POLE_TOL
    lnum, zero = _log_qpoch(num, ctx)
    lden, _ = _log_qpoch(den, ctx)
    with np.errstate(over="ignore", invalid="ignore"):
        val = np.where(zero, 0.0, np.exp(lnum - lden))
    return np.where(pole, np.nan, val)


def chiral_table(x, kmax, ctx):
    """Table of R_k(x) = (q^{1+k/2}/x;q)_inf / (q^{k/2} x;q)_inf, |k| <= kmax.

    Row ``kmax + k`` holds R_k.  Positive k follow from the two-step
    recurrence R_{k+2} = R_k (1 - q^{k/2} x) / (1 - q^{1+k/2}/x); negative k
    from the reflection R_{-k}(x) = (-q^{1/2}/x)^k R_k(x).  Entries at a
    genuine pole are NaN; entries where the recurrence meets 0/0 are
    recomputed from the products.
    """
    x = np.asarray(x, dtype=complex)
    shape = x.shape
    x = x.reshape(-1)
    kmax = int(kmax)
    q = ctx.q
    rq = math.sqrt(q)
    out = np.empty((2 * kmax + 1, x.size), dtype=complex)
    out[kmax] = _ratio_or_nan(q / x, x, ctx)
    if kmax >= 1:
        out[kmax + 1] = _ratio_or_nan(q * rq / x, rq * x, ctx)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for k in range(0, kmax - 1):
            out[kmax + k + 2] = (out[kmax + k] * (1.0 - q ** (k / 2) * x)
                                 / (1.0 - q ** (1 + k / 2) / x))
    bad = ~np.isfinite(out[kmax:])
    for k in np.nonzero(bad.any(axis=1))[0]:
        sel = bad[k]
        xs = x[sel]
        out[kmax + k, sel] = _ratio_or_nan(q ** (1 + k / 2) / xs, q ** (k / 2) * xs, ctx)
    refl = -rq / x
    with np.errstate(invalid="ignore", over="ignore"):
        for k in range(1, kmax + 1):
            out[kmax - k] = refl ** k * out[kmax + k]
    return out.reshape((2 * kmax + 1,) + shape)


def chiral_ratio(k, x, ctx):
    """R_k(x) for broadcastable integer k and complex x; PoleError at a pole."""
    k = np.asarray(k, dtype=int)
    x = np.asarray(x, dtype=complex)
    kmax = max(int(np.max(np.abs(k))) if k.size else 0, 1)
    table = chiral_table(x, kmax, ctx)
    shape = np.broadcast_shapes(k.shape, x.shape)
    idx = np.broadcast_to(k + kmax, shape)[None]
    tab = np.broadcast_to(table, table.shape[:1] + shape)
    out = np.take_along_axis(tab, idx, axis=0)[0]
    bad = ~np.isfinite(out)
    if bad.any():
        pos = np.unravel_index(int(np.argmax(bad)), shape) if shape else ()
        kk = int(np.broadcast_to(k, shape)[pos])
        xx = complex(np.broadcast_to(x, shape)[pos])
        raise PoleError(f"R_{kk}({xx:.6g}) sits on a pole", index=(kk, pos))
    if out.ndim == 0:
        return complex(out)
    return out


def _series_exp(term_block, tail_tol, max_terms, what):
    """exp of a positive-index series summed in blocks until terms are negligible."""
    total = 0.0
    start = 1
    block = 256
    while start <= max_terms:
        n = np.arange(start, start + block, dtype=float)
        terms = term_block(n)
        total += terms.sum()
        if abs(terms[-1]) <= tail_tol * max(abs(total), 1e-300):
            return math.exp(total)
        start += block
        block = min(2 * block, 1 << 16)
    raise DomainError(f"{what}: series did not converge within {max_terms} terms")


def k_alpha(alpha, ctx, margin=0.05):
    """Normalization k(alpha) = exp(-sum_{n != 0} e^{4 alpha n} / (n (q^n - q^-n))).

    The n and -n terms are combined into a cosh, so k(alpha) = k(-alpha)
    holds bit for bit.
    """
    alpha = float(alpha)
    lq = math.log(ctx.q)
    if not 4.0 * abs(alpha) < -lq - margin:
        raise DomainError(
            f"k(alpha) diverges: need 4|alpha| < -ln q - {margin}, "
            f"got 4|alpha| = {4 * abs(alpha):.4g}, -ln q = {-lq:.4g}")

    def block(n):
        # 2 cosh(4 alpha n) / (n (q^n - q^-n)), written to avoid overflow
        decay = np.exp(n * (4.0 * abs(alpha) + lq))
        back = np.exp(-n * (4.0 * abs(alpha) - lq))
        return -(decay + back) / (n * (1.0 - np.exp(2.0 * n * lq)))

    return _series_exp(lambda n: -block(n), ctx.tail_tol, 10 ** 7, "k_alpha")


def k_crossing(theta, ctx):
    """Crossing-symmetric normalization for the edge weight with c = q^{1/2 - theta}.

    k(theta) = exp(sum_{n>=1} (q^{2 theta n} + q^{-2 theta n}) q^n / (n (1-q^n)^2)),
    defined for |theta| < 1/2.  It satisfies
    k(1/2 - theta) / k(theta) = (q^{1-2 theta};q)_inf / (q^{2 theta};q)_inf.
    """
    theta = float(theta)
    if not abs(theta) < 0.5:
        raise DomainError(f"crossing normalization needs |theta| < 1/2, got {theta}")
    lq = math.log(ctx.q)

    def block(n):
        a = np.exp(n * lq * (1.0 - 2.0 * abs(theta)))
        b = np.exp(n * lq * (1.0 + 2.0 * abs(theta)))
        return (a + b) / (n * (1.0 - np.exp(n * lq)) ** 2)

    return _series_exp(block, ctx.tail_tol, 10 ** 8, "k_crossing")


def gamma_fn(x):
    """Euler gamma of a complex argument; raises at the poles 0, -1, -2, ..."""
    x = complex(x)
    if x.imag == 0.0 and x.real <= 0.0 and x.real == math.floor(x.real):
        raise PoleError(f"gamma has a pole at {x.real:g}", index=int(x.real))
    return complex(special.gamma(x))


def classical_limit_ratio(alpha, beta, ctx):
    """(q^alpha;q)_inf / (q^beta;q)_inf * (1-q)^(alpha-beta).

    Tends to Gamma(beta) / Gamma(alpha) as q -> 1.  Complex exponents are
    allowed; (1-q)^s uses the principal branch of a positive real base.
    """
    if alpha == beta:
        return 1.0 + 0j
    q = ctx.q
    lq = math.log(q)
    wa = np.exp(complex(alpha) * lq)
    wb = np.exp(complex(beta) * lq)
    try:
        ratio = qpoch_ratio([(wa, wb)], ctx)
    except PoleError as exc:
        raise PoleError(f"q^beta hits a pole: {exc}", index=exc.index) from None
    return ratio * np.exp((complex(alpha) - complex(beta)) * math.log1p(-q))
