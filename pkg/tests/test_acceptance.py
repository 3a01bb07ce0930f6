"""Acceptance criteria 1-10, one test each.

Every test records a single PASS/FAIL line; the lines are printed in the
terminal summary (see conftest.py) and by ``python tests/test_acceptance.py``.
The heavy criteria take several minutes in total.
"""
import functools
import os
import time

import numpy as np

from artifact import identities as ids
from artifact import oracles
from artifact.cli import _map, calibrate, run_instance
from artifact.engine import Profile, gen_balanced_params
from artifact.qkernel import QContext
from artifact.weights import CALIBRATED, SYMMETRIC, Spin, boltzmann_w, self_weight_s

RESULTS = {}
WORKERS = max(1, min(8, os.cpu_count() or 1))


def record(num, ok, detail):
    line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[num] = line
    print(line)
    return ok


def _worst(recs):
    return max((r["rel_residual"] if r["rel_residual"] is not None else np.inf) for r in recs)


def _flags(recs):
    return [f for r in recs if not r["pass"] for f in r["convention_flags"]][:3]


@functools.lru_cache(maxsize=None)
def suite(identity, seeds, q_values, n=2, doubling=False):
    """Run (identity, seeds x q_values) once, in parallel; returns (records, seconds)."""
    calib, _ = calibrate(identity, list(seeds), list(q_values), {})
    tasks = [(identity, s, q, {}, n, calib, doubling) for s in seeds for q in q_values]
    start = time.perf_counter()
    recs = _map(tasks, WORKERS)
    return recs, time.perf_counter() - start


def _timed_serial(identity, seeds, q_values, n=2):
    calib, _ = calibrate(identity, list(seeds), list(q_values), {})
    start = time.perf_counter()
    recs = [run_instance((identity, s, q, {}, n, calib, False)) for s in seeds for q in q_values]
    return recs, time.perf_counter() - start


SEEDS10 = tuple(range(1, 11))
SEEDS5 = tuple(range(1, 6))
SEEDS3 = (1, 2, 3)

# suites whose accepted instances are re-run with doubled quadrature and charge cutoff
DOUBLED = [
    ("sum-integral", SEEDS10, (0.4, 0.5, 0.6), 2),
    ("star-triangle", SEEDS10, (0.5,), 2),
    ("I-transform", SEEDS10, (0.5,), 1),
    ("I-transform", SEEDS5, (0.5,), 2),
    ("v-consistency", SEEDS5, (0.5,), 2),
    ("star-star", SEEDS10, (0.5,), 2),
]


def test_criterion_01_sum_integral():
    # timed serially on one core so the runtime bound is not helped by the pool
    recs, secs = _timed_serial("sum-integral", SEEDS10, (0.4, 0.5, 0.6))
    worst = _worst(recs)
    ok = len(recs) == 30 and all(r["pass"] for r in recs) and worst < 1e-8 and secs < 60
    assert record(1, ok, f"30 instances, worst rel {worst:.1e} (< 1e-8), {secs:.1f} s (< 60 s)"
                  f" {_flags(recs)}")


def test_criterion_02_truncation_separation():
    worst, bad = 0.0, []
    for identity, seeds, qs, n in DOUBLED:
        recs, _ = suite(identity, seeds, qs, n, doubling=True)
        for r in recs:
            if not r["pass"] and not any(f.startswith("doubling-change") for f in r["convention_flags"]):
                continue  # not an accepted instance; its own criterion reports it
            ch = [float(f.split("=")[1]) for f in r["convention_flags"]
                  if f.startswith("doubling-change")]
            change = ch[0] if ch else np.inf
            worst = max(worst, change)
            if not change < 1e-10:
                bad.append((identity, r["seed"], r["q"], change))
    assert record(2, not bad, f"worst doubling change {worst:.1e} (< 1e-10) over "
                  f"{len(DOUBLED)} suites; offenders {bad[:3]}")


def test_criterion_03_star_triangle():
    start = time.perf_counter()
    ctx = ids.default_context("star-triangle", 0.5)
    conv, _ = ids.calibrate_star_triangle([gen_balanced_params(1, "star-triangle", q=0.5)], ctx)
    recs, _ = _timed_serial("star-triangle", SEEDS10, (0.5,))
    secs = time.perf_counter() - start
    keys = ("sign=", "eta=", "normalization=")
    flags = {tuple(f for f in r["convention_flags"] if f.startswith(keys)) for r in recs}
    worst = _worst(recs)
    ok = conv == CALIBRATED and len(flags) == 1 and all(r["pass"] for r in recs) \
        and worst < 1e-6 and secs < 300
    assert record(3, ok, f"convention {conv.sign}/{conv.eta}/{conv.normalization} on all 10, "
                  f"worst rel {worst:.1e} (< 1e-6), {secs:.1f} s (< 300 s)")


def test_criterion_04_transformation():
    start = time.perf_counter()
    one, _ = _timed_serial("I-transform", SEEDS10, (0.5,), n=1)
    two, _ = _timed_serial("I-transform", SEEDS5, (0.5,), n=2)
    secs = time.perf_counter() - start
    even = True
    for s in SEEDS5:
        t, k = gen_balanced_params(s, "I-transform", n=2, q=0.5,
                                   profile=Profile(divisible=True)).split()
        even &= sum(f.charge for f in t) % 2 == 0 and sum(f.charge for f in k) % 2 == 0
    w1, w2 = _worst(one), _worst(two)
    ok = even and w1 < 1e-8 and w2 < 1e-6 and all(r["pass"] for r in one + two) and secs < 900
    assert record(4, ok, f"n=1 worst rel {w1:.1e} (< 1e-8), n=2 worst rel {w2:.1e} (< 1e-6), "
                  f"even charge sums {even}, {secs:.1f} s (< 900 s)")


def test_criterion_05_cross_path():
    ps = gen_balanced_params(1, "I-transform", n=2, q=0.5, profile=Profile(divisible=True))
    ctx = ids.default_context("v-consistency", 0.5)
    c1, _ = ids.calibrate_i_normalization(ps, ctx)
    c2, _ = ids.calibrate_i_normalization(ps, ctx)
    recs, _ = suite("v-consistency", SEEDS5, (0.5,), 2, doubling=True)
    worst = _worst(recs)
    ok = c1 == c2 and worst < 1e-9 and all(r["pass"] for r in recs)
    assert record(5, ok, f"normalization weyl={c1[0]} two_pi_i={c1[1]} (deterministic {c1 == c2}), "
                  f"worst rel {worst:.1e} (< 1e-9)")


def test_criterion_06_star_star():
    recs, _ = suite("star-star", SEEDS10, (0.5,), 2, doubling=True)
    worst = _worst(recs)
    ok = worst < 1e-6 and all(r["pass"] for r in recs)
    assert record(6, ok, f"n=1, 10 sets, worst rel {worst:.1e} (< 1e-6)")


def test_criterion_07_irf_ybe():
    recs, secs = suite("irf-ybe", SEEDS3, (0.3,))
    worst = _worst(recs)
    ctx = ids.default_context("irf-ybe", 0.3)
    coarse = ctx.quad_points == 64 and ctx.sum_m_max == 12
    ok = coarse and worst < 1e-3 and all(r["pass"] for r in recs) and secs < 1800
    assert record(7, ok, f"q=0.3, 64 nodes, |m|<=12, |H|<=8: worst |L/R-1| {worst:.1e} (< 1e-3), "
                  f"{secs:.0f} s wall (< 1800 s) {_flags(recs)}")


def test_criterion_08_classical_limit():
    devs, ok = [], True
    for s in SEEDS5:
        res = ids.check_classical_limit(*ids.classical_limit_instance(s), seed=s)
        d = res.deviations
        ok &= all(b <= a for a, b in zip(d, d[1:])) and d[-1] < 1e-2
        devs.append(d[-1])
    assert record(8, ok, f"5 inputs, k=4..10 non-increasing, final deviations "
                  f"max {max(devs):.1e} (< 1e-2)")


def test_criterion_09_kernel_oracles():
    res = oracles.run()
    wanted = ("pentagonal", "gamma recurrence", "telescoping", "k(alpha) = k(-alpha)")
    picked = [r for r in res if r["name"].startswith(wanted)]
    pent = {r["name"] for r in picked if r["name"].startswith("pentagonal")}
    ok = len(pent) == 4 and all(r["ok"] for r in picked)
    worst = max(r["error"] for r in picked)
    assert record(9, ok, f"{len(picked)} oracles ({', '.join(sorted(pent))}), worst error {worst:.1e}")


def test_criterion_10_symmetry_suite():
    ctx = QContext(0.5)
    rng = np.random.default_rng(10)
    swap = refl = 0
    for _ in range(200):
        a = rng.uniform(-0.3, 0.3)
        si = Spin(rng.uniform(-np.pi, np.pi), int(rng.integers(-3, 4)))
        sj = Spin(rng.uniform(-np.pi, np.pi), int(rng.integers(-3, 4)))
        for conv in (CALIBRATED, SYMMETRIC):
            swap += boltzmann_w(a, conv.eta, si, sj, ctx, conv) != \
                boltzmann_w(a, conv.eta, sj, si, ctx, conv)
        refl += self_weight_s(si, ctx) != self_weight_s(si.reflected(), ctx)
    scan = ids.positivity_scan(ids.PositivityGrid(), ctx)
    shape = len(scan.rows) == 500
    ok = swap == 0 and refl == 0 and shape and scan.zero_charge_positive and not scan.errors
    assert record(10, ok, f"swap mismatches {swap}/400, reflection mismatches {refl}/200, "
                  f"zero-charge grid {sum(r['positive'] for r in scan.rows)}/{len(scan.rows)} positive")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
