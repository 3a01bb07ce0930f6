"""Quadrature, certified charge sums, torus integration and parameter generation."""
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (EvaluationError, GenerationError, PoleOnContourError,
                     PreconditionError, TailDivergenceError)

KINDS = ("six-flavor", "I-transform", "star-triangle", "star-star", "ybe",
         "effective")
# both sides of an identity must exceed this before a residual means anything
NEGLIGIBLE = 1e-30


@dataclass(frozen=True)
class FlavorParam:
    """Flavor fugacity stored as modulus and unwrapped phase, plus a charge.

    Keeping the phase unwrapped gives every fugacity a definite logarithm,
    which fractional powers and the dual-parameter map rely on.
    """

    modulus: float
    phase: float
    charge: int = 0

    def __post_init__(self):
        if not (self.modulus > 0 and math.isfinite(self.modulus)):
            raise ValueError(f"fugacity must be non-zero and finite, got modulus {self.modulus}")
        if not math.isfinite(self.phase):
            raise ValueError("phase must be finite")
        if int(self.charge) != self.charge:
            raise ValueError("charge must be an integer")
        object.__setattr__(self, "charge", int(self.charge))

    @classmethod
    def from_fugacity(cls, z, charge=0):
        z = complex(z)
        return cls(abs(z), math.atan2(z.imag, z.real), charge)

    @property
    def fugacity(self):
        return self.modulus * complex(math.cos(self.phase), math.sin(self.phase))

    @property
    def log(self):
        return complex(math.log(self.modulus), self.phase)

    def as_dict(self):
        return {"modulus": self.modulus, "phase": self.phase, "charge": self.charge}


@dataclass(frozen=True)
class ParameterSet:
    """One identity instance: flavors, optional spectral values, rank and seed."""

    kind: str
    flavors: tuple
    n: int = 1
    seed: int | None = None
    spectral: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown parameter kind {self.kind!r}")
        object.__setattr__(self, "flavors", tuple(self.flavors))
        object.__setattr__(self, "spectral", tuple(float(s) for s in self.spectral))

    def fugacities(self):
        return np.array([f.fugacity for f in self.flavors])

    def charges(self):
        return np.array([f.charge for f in self.flavors], dtype=int)

    def split(self):
        """(t, s) halves of an I-transform set."""
        half = len(self.flavors) // 2
        return self.flavors[:half], self.flavors[half:]

    def check_balanced(self, q, tol=1e-13):
        """Raise PreconditionError unless the product and charge constraints hold."""
        if self.kind == "six-flavor":
            if len(self.flavors) != 6:
                raise PreconditionError("six-flavor set needs exactly 6 flavors")
            target = q
        elif self.kind == "I-transform":
            if len(self.flavors) != 4 * self.n:
                raise PreconditionError(f"I-transform set needs {4 * self.n} flavors")
            target = q ** self.n
        else:
            return
        prod = np.prod(self.fugacities())
        if abs(prod - target) > tol * max(1.0, abs(target)):
            raise PreconditionError(
                f"balancing violated: product of fugacities {prod:.15g} != {target:.15g}")
        if int(self.charges().sum()) != 0:
            raise PreconditionError(
                f"balancing violated: charges sum to {int(self.charges().sum())}")

    def as_dict(self):
        return {
            "kind": self.kind,
            "n": self.n,
            "flavors": [f.as_dict() for f in self.flavors],
            "spectral": list(self.spectral),
        }


@dataclass
class ResidualReport:
    """Two-sided evaluation of one identity instance."""

    identity: str
    lhs: complex
    rhs: complex
    abs_residual: float
    rel_residual: float
    settings: dict
    convention_flags: list
    runtime_ms: int
    passed: bool
    seed: int | None = None
    q: float | None = None
    params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @classmethod
    def build(cls, identity, lhs, rhs, ctx, flags=(), started=None, params=None,
              seed=None, rel=None, extra=None):
        """Fill residuals and the pass flag; ``rel`` overrides the relative residual."""
        lhs, rhs = complex(lhs), complex(rhs)
        abs_res = abs(lhs - rhs)
        scale = max(abs(lhs), abs(rhs))
        if rel is None:
            rel = abs_res / scale if scale > 0 else math.inf
        negligible = abs(lhs) <= NEGLIGIBLE or abs(rhs) <= NEGLIGIBLE
        flags = list(flags)
        if negligible:
            flags.append("negligible-side")
        runtime = 0 if started is None else int(round(1000 * (time.perf_counter() - started)))
        return cls(
            identity=identity, lhs=lhs, rhs=rhs, abs_residual=float(abs_res),
            rel_residual=float(rel), settings=ctx.as_dict(), convention_flags=flags,
            runtime_ms=runtime,
            passed=bool(rel < ctx.rel_tol and not negligible and math.isfinite(rel)),
            seed=seed, q=ctx.q, params=params or {}, extra=extra or {})

    def as_record(self):
        return {
            "identity": self.identity,
            "seed": self.seed,
            "q": self.q,
            "params": self.params,
            "lhs_re": self.lhs.real,
            "lhs_im": self.lhs.imag,
            "rhs_re": self.rhs.real,
            "rhs_im": self.rhs.imag,
            "abs_residual": self.abs_residual,
            "rel_residual": self.rel_residual,
            "convention_flags": list(self.convention_flags),
            "settings": self.settings,
            "runtime_ms": self.runtime_ms,
            "pass": self.passed,
        }


def circle_nodes(n, shift=0.0):
    """Equally spaced points on the unit circle (optionally offset by a fraction of a step)."""
    return np.exp(2j * np.pi * (np.arange(n) + shift) / n)


def circle_quadrature(f, n):
    """Trapezoid rule for the contour integral of f(z) dz / (2 pi i z) over |z| = 1.

    ``f`` is called once on the array of nodes; extra leading axes of the
    result are kept and the node axis (last) is averaged.
    """
    if n < 2 or n % 2:
        raise ValueError("node count must be even")
    z = circle_nodes(n)
    vals = np.asarray(f(z), dtype=complex)
    bad = ~np.isfinite(vals)
    if bad.any():
        node = int(np.argwhere(bad)[0][-1])
        raise EvaluationError(f"integrand is not finite at node {node}", node=node)
    return vals.mean(axis=-1)


def certify_tails(by_m, tol, what="charge sum"):
    """Check that the outermost terms of a symmetric sum are negligible.

    ``by_m`` has the charge axis first, ordered -M..M.  Each tail term must
    be below tol times the largest retained term.
    """
    mags = np.abs(np.asarray(by_m))
    mags = mags.reshape(mags.shape[0], -1).max(axis=1)
    peak = mags.max()
    if peak == 0:
        return 0.0
    tail = max(mags[0], mags[-1]) / peak
    if not tail < tol:
        raise TailDivergenceError(
            f"{what}: outermost term is {tail:.2e} of the peak (needs < {tol:.1e}); "
            f"increase the charge cutoff")
    return float(tail)


def bilateral_sum(term, ctx, tol=None, vectorized=False):
    """Sum term(m) over -M..M in a fixed symmetric order, with a tail certificate.

    With ``vectorized=True`` the callable receives the whole charge array
    and must return values with the charge axis first.
    """
    tol = ctx.tail_tol if tol is None else tol
    mmax = ctx.sum_m_max
    ms = np.arange(-mmax, mmax + 1)
    if vectorized:
        vals = np.asarray(term(ms), dtype=complex)
    else:
        vals = np.array([term(int(m)) for m in ms], dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("non-finite term in charge sum")
    certify_tails(vals, tol)
    # m = 0 first, then +-m pairs outwards
    total = vals[mmax].copy()
    for m in range(1, mmax + 1):
        total = total + (vals[mmax + m] + vals[mmax - m])
    if np.ndim(total) == 0:
        return complex(total)
    return total


def sun_torus_integrate(f, n, ctx, weyl=False, two_pi_i=True, tol=None):
    """Integrate over the maximal torus of SU(n) and sum its charge lattice.

    z_1..z_{n-1} run over the unit circle with z_n = 1/(z_1...z_{n-1}), and
    m_1..m_{n-1} over -M..M with m_n = -(m_1+...+m_{n-1}).  ``f(z, m)``
    receives z of shape (n, 1, G) and m of shape (n, C, 1) and returns an
    array of shape (C, G) (or anything broadcasting to it).  Each contour
    carries dz/(2 pi i z) unless ``two_pi_i`` is False, in which case the
    bare dz/z is used.  ``weyl`` divides by n!.
    """
    if n < 1:
        raise ValueError("rank must be >= 1")
    if n == 1:
        val = np.asarray(f(np.ones((1, 1, 1), complex), np.zeros((1, 1, 1), int)))
        return complex(val.reshape(-1)[0])
    tol = ctx.tail_tol if tol is None else tol
    nodes = circle_nodes(ctx.quad_points)
    mmax = ctx.sum_m_max
    ms = np.arange(-mmax, mmax + 1)
    free = n - 1
    zg = np.stack(np.meshgrid(*([nodes] * free), indexing="ij")).reshape(free, -1)
    mg = np.stack(np.meshgrid(*([ms] * free), indexing="ij")).reshape(free, -1)
    z_full = np.concatenate([zg, 1.0 / np.prod(zg, axis=0, keepdims=True)])
    m_full = np.concatenate([mg, -mg.sum(axis=0, keepdims=True)])
    vals = np.asarray(f(z_full[:, None, :], m_full[:, :, None]), dtype=complex)
    vals = np.broadcast_to(vals, (mg.shape[1], zg.shape[1]))
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("torus integrand is not finite")
    per_charge = vals.mean(axis=1)
    # tail certificate on the outer shell of the charge box
    shell = np.max(np.abs(mg), axis=0) == mmax
    peak = np.abs(per_charge).max()
    if peak > 0:
        tail = np.abs(per_charge[shell]).max() / peak
        if not tail < tol:
            raise TailDivergenceError(
                f"torus charge sum: outer shell is {tail:.2e} of the peak (needs < {tol:.1e})")
    total = complex(per_charge.sum())
    if not two_pi_i:
        total *= (2j * math.pi) ** free
    if weyl:
        total /= math.factorial(n)
    return total


def pole_radii(params, ctx):
    """All pole radii in |z| of the flavor ratios, with (flavor, m, level) labels.

    A flavor (a, n_a) enters as R_{n_a+m}(a z) and R_{n_a-m}(a/z).  The
    ratio R_k(x) has poles at x = q^{-|k|/2 - j}, j >= 0, so the radii are
    q^{-|k|/2-j}/|a| for the first family and |a| q^{|k|/2+j} for the second.
    """
    q = ctx.q
    mods = np.array([f.modulus for f in params.flavors])
    chg = params.charges()
    ms = np.arange(-ctx.sum_m_max, ctx.sum_m_max + 1)
    lev = np.arange(int(ctx.product_truncation))
    k1 = np.abs(chg[:, None] + ms[None, :])
    k2 = np.abs(chg[:, None] - ms[None, :])
    e1 = k1[:, :, None] / 2 + lev[None, None, :]
    e2 = k2[:, :, None] / 2 + lev[None, None, :]
    r1 = q ** (-e1) / mods[:, None, None]
    r2 = mods[:, None, None] * q ** e2
    return r1, r2, ms


def pole_guard(params, ctx, threshold=1e-6):
    """Smallest distance between a pole radius and the unit circle.

    Raises PoleOnContourError, naming the flavor, charge and level, when the
    clearance falls below ``threshold``.
    """
    r1, r2, ms = pole_radii(params, ctx)
    with np.errstate(over="ignore"):
        d1 = np.abs(r1 - 1.0)
        d2 = np.abs(r2 - 1.0)
    best = math.inf
    offender = None
    for d, fam in ((d1, "z"), (d2, "1/z")):
        idx = np.unravel_index(np.argmin(d), d.shape)
        if d[idx] < best:
            best = float(d[idx])
            offender = {"flavor": int(idx[0]), "m": int(ms[idx[1]]),
                        "level": int(idx[2]), "family": fam}
    if best < threshold:
        raise PoleOnContourError(
            f"pole within {best:.2e} of the contour: {offender}", offender=offender)
    return best


@dataclass(frozen=True)
class Profile:
    """Sampling window for generated parameters.

    ``spread`` is the half-width of the log-modulus jitter around the
    balanced center; ``bounds`` optionally pins every modulus to [lo, hi].
    Without bounds the moduli stay below q^(center/2), keeping every flavor
    well inside the unit circle.  ``divisible`` makes the t and s charge
    sums multiples of lcm(n, 2).
    """

    spread: float = 0.1
    charge_max: int = 2
    bounds: tuple | None = None
    divisible: bool = False
    spectral_window: tuple = (0.25, 0.75)
    spectral_jitter: float = 0.03


def _balanced_flavors(rng, count, q, total_power, profile):
    center = total_power / count
    if profile.bounds is not None:
        lo, hi = profile.bounds
        if not (0 < lo <= hi):
            raise GenerationError("modulus bounds must satisfy 0 < lo <= hi")
        target = q ** total_power
        if hi ** count < target or lo ** count > target:
            raise GenerationError(
                f"modulus window [{lo}, {hi}] cannot reach a product of q^{total_power}")
    hi_auto = q ** (center / 2)
    spread = profile.spread
    if profile.bounds is None:
        # keep the jitter inside the room below the automatic cap
        spread = min(spread, 0.8 * center * -math.log(q) / 2)
    for _ in range(200):
        logmod = center * math.log(q) + rng.uniform(-spread, spread, count)
        logmod += (total_power * math.log(q) - logmod.sum()) / count
        mods = np.exp(logmod)
        if profile.bounds is not None:
            lo, hi = profile.bounds
            if np.any(mods < lo) or np.any(mods > hi):
                continue
        elif np.any(mods > hi_auto):
            continue
        phases = rng.uniform(-math.pi, math.pi, count)
        phases -= phases.mean()
        phases[-1] = -phases[:-1].sum()
        return mods, phases
    raise GenerationError("profile too tight: no balanced moduli found in 200 draws")


def _zero_sum_charges(rng, count, cmax, modulus=1):
    for _ in range(1000):
        ch = rng.integers(-cmax, cmax + 1, count)
        ch[-1] -= ch.sum()
        if abs(ch[-1]) <= cmax:
            return ch
    raise GenerationError("could not draw zero-sum charges")


def _draw_spectral(rng, count, total, window):
    for _ in range(1000):
        w = rng.uniform(window[0], window[1], count)
        w *= total / w.sum()
        if np.all(w > 0):
            return tuple(float(x) for x in w)
    raise GenerationError("could not draw spectral parameters")


def gen_balanced_params(seed, kind, n=1, profile=None, q=0.5):
    """Deterministic random parameters for one identity instance.

    six-flavor: 6 flavors with product q and zero charge sum.
    I-transform: 2n t-flavors then 2n s-flavors, product q^n, zero charge sum;
    ``profile.divisible`` also makes the t and s charge sums multiples of lcm(n, 2).
    star-triangle: spectral (alpha, beta, gamma) > 0 summing to 1/2, three spins.
    star-star: spectral (alpha, beta, gamma, delta) > 0 summing to 2, four spins.
    ybe: spectral (t1..t6) small, six spins with charges in {-1, 0, 1}.
    """
    profile = profile or Profile()
    rng = np.random.default_rng([int(seed), KINDS.index(kind), int(n)])
    if kind == "six-flavor":
        mods, phases = _balanced_flavors(rng, 6, q, 1.0, profile)
        ch = _zero_sum_charges(rng, 6, profile.charge_max)
        flavors = [FlavorParam(float(a), float(p), int(c)) for a, p, c in zip(mods, phases, ch)]
        return ParameterSet(kind, flavors, 1, seed)
    if kind == "I-transform":
        count = 4 * n
        mods, phases = _balanced_flavors(rng, count, q, float(n), profile)
        for _ in range(1000):
            ch = _zero_sum_charges(rng, count, profile.charge_max)
            if not profile.divisible or ch[: 2 * n].sum() % math.lcm(n, 2) == 0:
                break
        else:
            raise GenerationError("could not draw divisible charge sums")
        flavors = [FlavorParam(float(a), float(p), int(c)) for a, p, c in zip(mods, phases, ch)]
        return ParameterSet(kind, flavors, n, seed)
    if kind in ("star-triangle", "star-star", "ybe"):
        count = {"star-triangle": 3, "star-star": 4, "ybe": 6}[kind]
        cmax = 1 if kind == "ybe" else profile.charge_max
        angles = rng.uniform(0.0, 2 * math.pi, count)
        ch = rng.integers(-cmax, cmax + 1, count)
        spins = [FlavorParam(1.0, float(a), int(c)) for a, c in zip(angles, ch)]
        if kind == "star-triangle":
            spectral = _draw_spectral(rng, 3, 0.5, profile.spectral_window)
        elif kind == "star-star":
            spectral = _draw_spectral(rng, 4, 2.0, profile.spectral_window)
        else:
            j = profile.spectral_jitter
            spectral = tuple(float(x) for x in rng.uniform(-j, j, 6))
        return ParameterSet(kind, spins, 1, seed, spectral)
    raise GenerationError(f"no generator for kind {kind!r}")
