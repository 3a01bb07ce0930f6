"""Boltzmann weights of the discrete/continuous spin model and derived weights.

Continuous spins are unit-modulus fugacities z; a spin is (z, m) with m an
integer charge.  The edge weight is built from the chiral ratio

    R_k(x) = (q^{1+k/2}/x; q)_inf / (q^{k/2} x; q)_inf

as  W(z|m, w|n) = R_{m+n}(c z w) R_{n-m}(c w/z) R_{-m-n}(c/(z w)) R_{m-n}(c z/w)
                  * z^{-2m} w^{-2n} / k

with coupling c = q^{alpha-eta} (or q^{eta-alpha}, see Convention).
"""
import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from . import qkernel
from .engine import certify_tails, circle_nodes
from .errors import PoleError
from .qkernel import chiral_ratio, k_alpha, k_crossing


@dataclass(frozen=True)
class Spin:
    """Continuous spin as an angle in [-pi, pi] together with an integer charge.

    The angle is reduced with an exact remainder, so negating it (the
    reflection z -> 1/z) is exact.
    """

    angle: float
    charge: int = 0

    def __post_init__(self):
        if not math.isfinite(self.angle):
            raise ValueError("spin angle must be finite")
        if int(self.charge) != self.charge:
            raise ValueError("charge must be an integer")
        object.__setattr__(self, "angle", math.remainder(float(self.angle), 2 * math.pi))
        object.__setattr__(self, "charge", int(self.charge))

    @classmethod
    def from_fugacity(cls, z, charge=0):
        z = complex(z)
        if abs(abs(z) - 1.0) > 1e-14:
            raise ValueError(f"spin fugacity must have unit modulus, got |z| = {abs(z)!r}")
        return cls(math.atan2(z.imag, z.real), charge)

    @property
    def fugacity(self):
        return complex(math.cos(self.angle), math.sin(self.angle))

    def conjugate(self):
        return Spin(-self.angle, self.charge)

    def reflected(self):
        """(z, m) -> (1/z, -m)."""
        return Spin(-self.angle, -self.charge)


@dataclass(frozen=True)
class MultiSpin:
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a multi-spin needs at least one component")
        if not all(isinstance(c, Spin) for c in comps):
            raise TypeError("multi-spin components must be Spin instances")
        object.__setattr__(self, "components", comps)

    @property
    def n(self):
        return len(self.components)

    def fugacities(self):
        return np.array([c.fugacity for c in self.components])

    def charges(self):
        return np.array([c.charge for c in self.components], dtype=int)


@dataclass(frozen=True)
class SpectralPair:
    first: float
    second: float

    def __post_init__(self):
        if not (math.isfinite(self.first) and math.isfinite(self.second)):
            raise ValueError("spectral values must be finite")


@dataclass(frozen=True)
class Convention:
    """Sign and normalization reading of the edge weight.

    sign="printed": c = q^{alpha - eta}; sign="flipped": c = q^{eta - alpha}.
    normalization="printed" uses k_alpha, "crossing" uses k_crossing and
    "none" leaves the weight unnormalized.  Under printed sign with
    eta = -1/2 the weight at -alpha equals the flipped weight at alpha with
    eta = +1/2, so physical angles map through ``spectral``.
    """

    sign: str = "printed"
    eta: float = -0.5
    normalization: str = "printed"

    def __post_init__(self):
        if self.sign not in ("printed", "flipped"):
            raise ValueError(f"unknown sign convention {self.sign!r}")
        if self.normalization not in ("printed", "crossing", "none"):
            raise ValueError(f"unknown normalization {self.normalization!r}")

    def exponent(self, alpha):
        """Power of q in the coupling c."""
        if self.sign == "printed":
            return alpha - self.eta
        return self.eta - alpha

    def coupling(self, alpha, q):
        return q ** self.exponent(alpha)

    def norm(self, alpha, ctx):
        if self.normalization == "none":
            return 1.0
        if self.normalization == "printed":
            return k_alpha(alpha, ctx)
        return k_crossing(0.5 - self.exponent(alpha), ctx)

    def spectral(self, theta):
        """Map a physical angle (crossing value 1/2) to this convention."""
        return 2.0 * self.eta * theta if self.sign == "printed" else theta

    def flags(self):
        return [f"sign={self.sign}", f"eta={self.eta:g}",
                f"normalization={self.normalization}"]


PRINTED = Convention("printed", -0.5, "printed")
SYMMETRIC = Convention("flipped", 0.5, "crossing")
# the reading selected by star-triangle calibration; k_alpha diverges on much of
# the physical range, so the printed normalization is not usable there
CALIBRATED = Convention("printed", -0.5, "crossing")
STAR_TRIANGLE_CANDIDATES = (
    Convention("printed", -0.5, "printed"),
    Convention("flipped", 0.5, "printed"),
    Convention("printed", -0.5, "crossing"),
    Convention("flipped", 0.5, "crossing"),
)


def chiral_block(c, z, m, w, n, ctx):
    """Four-ratio block of the edge weight without monomials or normalization.

    All arguments broadcast; z, w are fugacities and m, n integer charges.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    m = np.asarray(m, dtype=int)
    n = np.asarray(n, dtype=int)
    zw = z * w
    sums = chiral_ratio(m + n, c * zw, ctx) * chiral_ratio(-m - n, c / zw, ctx)
    diffs = chiral_ratio(n - m, c * w / z, ctx) * chiral_ratio(m - n, c * z / w, ctx)
    return sums * diffs


def edge_weight(alpha, z, m, w, n, ctx, convention=PRINTED):
    """Vectorized edge weight W_alpha(z|m, w|n) in the given convention."""
    c = convention.coupling(alpha, ctx.q)
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    m = np.asarray(m, dtype=int)
    n = np.asarray(n, dtype=int)
    mono = z ** (-2 * m) * w ** (-2 * n)
    return chiral_block(c, z, m, w, n, ctx) * mono / convention.norm(alpha, ctx)


def boltzmann_w(alpha, eta, si, sj, ctx, convention=None):
    """Edge weight between two spins; eta overrides the convention's crossing value."""
    conv = replace(convention or PRINTED, eta=float(eta))
    # the weight is symmetric; a canonical order makes the swap exact in floating point
    if (sj.angle, sj.charge) < (si.angle, si.charge):
        si, sj = sj, si
    val = edge_weight(float(alpha), si.fugacity, si.charge, sj.fugacity, sj.charge,
                      ctx, conv)
    return complex(val)


def phi_norm(alpha, si, sj, ctx, convention=None):
    """Monomial normalization z_i^{-2 m_i} z_j^{-2 m_j} / k(alpha)."""
    conv = convention or PRINTED
    return (si.fugacity ** (-2 * si.charge) * sj.fugacity ** (-2 * sj.charge)
            / conv.norm(float(alpha), ctx))


def self_weight(z, m, q):
    """q^{-m} (1 - q^m z^2)(1 - q^m z^-2), vectorized."""
    z = np.asarray(z, dtype=complex)
    m = np.asarray(m)
    qm = q ** m.astype(float)
    return (1.0 - qm * z * z) * (1.0 - qm / (z * z)) / qm


def self_weight_s(s, ctx):
    """Self-interaction of one spin; the same factor as the integration measure.

    On the unit circle S = q^m + q^-m - 2 cos(2 angle), which is real and
    invariant bit for bit under angle -> -angle and m -> -m.
    """
    q = ctx.q
    return complex((q ** s.charge + q ** (-s.charge)) - 2.0 * math.cos(2.0 * s.angle))


def _as_grid_corner(corner):
    if isinstance(corner, Spin):
        return np.asarray(corner.fugacity), np.asarray(corner.charge)
    w, n = corner
    return np.asarray(w, dtype=complex), np.asarray(n, dtype=int)


def face_angles(t, layout="thick-line"):
    """Edge angles of the four-star face weight for corners (a, b, f, h).

    "printed" pairs t_i with t_l, t_j with t_i, and so on as written; the
    default "thick-line" reading swaps the roles of t_j and t_k so that
    (t_i, t_j) and (t_k, t_l) are the two rapidity pairs that cross.
    """
    ti, tj, tk, tl = (float(x) for x in t)
    if layout == "thick-line":
        tj, tk = tk, tj
    elif layout != "printed":
        raise ValueError(f"unknown face layout {layout!r}")
    return (1 / 6 + ti - tl, 1 / 3 + tj - ti, 1 / 3 + tl - tk, 1 / 6 + tk - tj)


def face_weight_grid(t, corners, ctx, convention=SYMMETRIC, layout="thick-line",
                     prefactor=None, tail_tol=None):
    """Face weight with array-valued corners (each corner a (fugacity, charge) pair).

    The corners broadcast against each other; the star center is integrated
    over ctx.quad_points nodes and charges |m| <= ctx.sum_m_max.
    """
    angles = face_angles(t, layout)
    cs = [_as_grid_corner(c) for c in corners]
    shape = np.broadcast_shapes(*[np.shape(w) for w, _ in cs], *[np.shape(n) for _, n in cs])
    z = circle_nodes(ctx.quad_points)
    ms = np.arange(-ctx.sum_m_max, ctx.sum_m_max + 1)
    extra = (1,) * len(shape)
    zg = z.reshape((1,) + extra + (-1,))
    mg = ms.reshape((-1,) + extra + (1,))
    vals = self_weight(zg, mg, ctx.q) / 2.0
    for theta, (w, n) in zip(angles, cs):
        wg = np.broadcast_to(w, shape)[None, ..., None]
        ng = np.broadcast_to(n, shape)[None, ..., None]
        vals = vals * edge_weight(theta, zg, mg, wg, ng, ctx, convention)
    by_m = vals.mean(axis=-1)
    certify_tails(by_m, ctx.tail_tol if tail_tol is None else tail_tol, "face weight")
    total = by_m.sum(axis=0)
    if prefactor is not None:
        total = total * prefactor(tuple(t))
    return total


def face_weight_r(t, corners, ctx, convention=SYMMETRIC, layout="thick-line",
                  prefactor=None):
    """Face weight for corners (a|A, b|B, f|F, h|H) as a star around one spin.

    ``prefactor`` is an optional callable of the four spectral values; by
    default the spectral-only normalization is 1.
    """
    if len(corners) != 4:
        raise ValueError("face weight takes four corner spins")
    return complex(face_weight_grid(t, corners, ctx, convention, layout, prefactor))


def s_multi(x, ctx):
    """Self weight of a multi-spin: (1/2) / prod_{j != k} of the charge-shifted ratio."""
    z = x.fugacities()
    X = x.charges()
    q = ctx.q
    pairs = []
    for j in range(x.n):
        for k in range(x.n):
            if j == k:
                continue
            num = q ** (1 + (X[j] - X[k]) / 2) * z[k] / z[j]
            den = q ** ((X[k] - X[j]) / 2) * z[j] / z[k]
            pairs.append((num, den))
    if not pairs:
        return 0.5 + 0j
    try:
        prod = qkernel.qpoch_ratio(pairs, ctx)
    except PoleError as exc:
        raise PoleError(f"coincident multi-spin components: {exc}", index=exc.index) from None
    if prod == 0:
        raise PoleError("coincident multi-spin components make the self weight singular")
    return 0.5 / prod


def _gamma_pair(a, b):
    return qkernel.gamma_fn(a + b) * qkernel.gamma_fn(a - b)


def gamma_weight_w(alpha, eta, x, y):
    """Gamma-function edge weight between real multi-spins x = [(x_i, X_i)], y = [(y_j, Y_j)].

    Product over i, j of Gamma(alpha-eta +- b) / Gamma(1+eta-alpha +- d) with
    b = (X_i+Y_j)/2 + i(x_i+y_j) and d = -(X_i+Y_j)/2 + i(x_i+y_j).
    """
    a = float(alpha) - float(eta)
    c = 1.0 + float(eta) - float(alpha)
    out = 1.0 + 0j
    for i, (xi, Xi) in enumerate(x):
        for j, (yj, Yj) in enumerate(y):
            s = complex(0.0, xi + yj)
            M = (Xi + Yj) / 2.0
            try:
                out *= _gamma_pair(a, M + s) / _gamma_pair(c, -M + s)
            except PoleError as exc:
                raise PoleError(f"gamma pole at pair ({i}, {j}): {exc}", index=(i, j)) from None
    return out


def gamma_weight_s(x):
    """(1/n!) prod_{i != j} ((x_i - x_j)^2 + ((X_i - X_j)/2)^2)."""
    n = len(x)
    out = 1.0
    for i in range(n):
        for j in range(n):
            if i != j:
                out *= (x[i][0] - x[j][0]) ** 2 + ((x[i][1] - x[j][1]) / 2.0) ** 2
    return out / math.factorial(n)


def classical_q_weight(alpha, eta, x, y, ctx):
    """(1-q)-rescaled q-weight whose q -> 1 limit is gamma_weight_w.

    Keeps the two factors of the edge weight that depend on the sums
    x_i + y_j and X_i + Y_j, with fugacity q^{i(x_i + y_j)} and coupling
    q^{alpha - eta}; each ratio is rescaled by (1-q)^(B-A).
    """
    a = float(alpha) - float(eta)
    out = 1.0 + 0j
    for xi, Xi in x:
        for yj, Yj in y:
            s = complex(0.0, xi + yj)
            M = (Xi + Yj) / 2.0
            # (q^B;q)/(q^A;q) (1-q)^{B-A} -> Gamma(A)/Gamma(B)
            out *= qkernel.classical_limit_ratio(1 - a + M - s, a + M + s, ctx)
            out *= qkernel.classical_limit_ratio(1 - a - M + s, a - M - s, ctx)
    return out


def _principal_sqrt(val, flags, label):
    val = complex(val)
    if val.real < 0 and abs(val.imag) <= 1e-12 * abs(val):
        flags.append(f"branch-cut:{label}")
    return cmath.sqrt(val)


def multispin_r(uU, vV, corners, ctx, eta=-0.25, weyl=True, return_flags=False):
    """Multi-spin face weight built from the integral I.

    uU, vV are pairs (u_pair, U_pair) of SpectralPair values; corners are
    MultiSpins (a, b, c, d) of a common length n.  Flavors follow the
    substitution t_j ~ q^{-2(u-v)} / z(c_j), t_{n+j} ~ q^{-2(u'-v')} / z(b_j),
    s_j ~ q^{2(u'-v-eta)} z(a_j), s_{n+j} ~ q^{2(u-v'-eta)} z(d_j), with charges
    shifted by the discrete spectral values.  eta = -1/4 makes the
    continuous flavors balanced.  Square roots use the principal branch and
    any argument on the negative real axis is flagged.
    """
    from .engine import FlavorParam
    from .identities import eval_I, flavor_pair_block

    (u, U), (v, V) = uU, vV
    a, b, c, d = corners
    n = a.n
    if any(x.n != n for x in corners):
        raise ValueError("all corners must have the same number of components")
    q = ctx.q
    lq = math.log(q)

    def flav(power, spin, sign, shift):
        return FlavorParam(math.exp(power * lq), sign * spin.angle, shift + sign * spin.charge)

    t = ([flav(-2 * (u.first - v.first), x, -1, int(round(-2 * (U.first - V.first))))
          for x in c.components]
         + [flav(-2 * (u.second - v.second), x, -1, int(round(-2 * (U.second - V.second))))
            for x in b.components])
    s = ([flav(2 * (u.second - v.first - eta), x, 1, int(round(2 * (U.second - V.first))))
          for x in a.components]
         + [flav(2 * (u.first - v.second - eta), x, 1, int(round(2 * (U.first - V.second))))
            for x in d.components])
    flags = []
    kn = k_alpha if n <= 2 else (lambda _a, _c: 1.0)
    if n > 2:
        flags.append("k_n=1")
    rho = (_principal_sqrt(s_multi(c, ctx) * s_multi(b, ctx), flags, "rho")
           / (kn(eta - u.first + v.first, ctx) * kn(eta - u.second + v.second, ctx)
              * kn(u.second - v.first, ctx) * kn(u.first - v.second, ctx)))
    block = flavor_pair_block(t, s, ctx)
    val = rho / _principal_sqrt(block, flags, "flavor-block") * eval_I(t, s, n, ctx, weyl=weyl)
    if return_flags:
        return val, flags
    return val
